//! SVG rendering of closed-loop traces: one panel per state and input, all
//! traces overlaid.

use std::path::Path;

use asnmpc::{Error, Result};
use plotters::prelude::*;

use crate::trace::ClosedLoopTrace;

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(23, 190, 207),
];

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Io(std::io::Error::other(format!("plot: {e}")))
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9 * (1.0 + hi.abs()));
    (lo - pad, hi + pad)
}

/// Write `traces` (name, trace) to an SVG file.
pub fn write_svg(path: &Path, title: &str, traces: &[(&str, &ClosedLoopTrace)]) -> Result<()> {
    let Some((_, first)) = traces.first() else {
        return Err(Error::InvalidInput("nothing to plot".into()));
    };
    let nx = first.states.first().map_or(0, |x| x.len());
    let nu = first.inputs.first().map_or(0, |u| u.len());
    let panels = nx + nu;
    let rows = panels.div_ceil(2);
    let root = SVGBackend::new(path, (1000, 260 * rows as u32 + 40)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let root = root.titled(title, ("sans-serif", 20)).map_err(plot_err)?;
    let areas = root.split_evenly((rows, 2));

    for (p, area) in areas.iter().enumerate().take(panels) {
        let (name, series): (String, Vec<Vec<(f64, f64)>>) = if p < nx {
            (
                format!("x_{}", p + 1),
                traces
                    .iter()
                    .map(|(_, t)| {
                        t.states
                            .iter()
                            .enumerate()
                            .map(|(k, x)| (k as f64 * t.sample_time, x[p]))
                            .collect()
                    })
                    .collect(),
            )
        } else {
            let i = p - nx;
            (
                format!("u_{}", i + 1),
                traces
                    .iter()
                    .map(|(_, t)| {
                        t.inputs
                            .iter()
                            .enumerate()
                            .map(|(k, u)| (k as f64 * t.sample_time, u[i]))
                            .collect()
                    })
                    .collect(),
            )
        };
        let (t0, t1) = range(series.iter().flatten().map(|v| v.0));
        let (y0, y1) = range(series.iter().flatten().map(|v| v.1));
        let mut chart = ChartBuilder::on(area)
            .caption(&name, ("sans-serif", 16))
            .margin(8)
            .x_label_area_size(30)
            .y_label_area_size(60)
            .build_cartesian_2d(t0..t1, y0..y1)
            .map_err(plot_err)?;
        chart.configure_mesh().x_desc("t").draw().map_err(plot_err)?;
        for (j, pts) in series.into_iter().enumerate() {
            let color = PALETTE[j % PALETTE.len()];
            let s = chart.draw_series(LineSeries::new(pts, &color)).map_err(plot_err)?;
            if p == 0 {
                s.label(traces[j].0)
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
            }
        }
        if p == 0 && traces.len() > 1 {
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(plot_err)?;
        }
    }
    root.present().map_err(plot_err)
}
