//! Relative closed-loop performance difference Δ.

use asnmpc::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaStats {
    /// Mean of the per-sample values (a fraction, not percent).
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator; 0 for one sample).
    pub sd: f64,
    /// `(Ĵ_c − J_c) / |J_c|` per initial condition; `None` where excluded.
    pub per_sample: Vec<Option<f64>>,
    pub n_used: usize,
}

/// Δ over paired closed-loop costs. A pair is excluded when either run
/// failed (`None`) or the reference cost is exactly zero. The reference
/// enters through its magnitude so that a loss is positive for the
/// economic (negative-valued) cost as well.
pub fn performance_delta(reduced: &[Option<f64>], full: &[Option<f64>]) -> Result<DeltaStats> {
    if reduced.len() != full.len() {
        return Err(Error::Dimension(format!(
            "{} reduced runs against {} reference runs",
            reduced.len(),
            full.len()
        )));
    }
    let per_sample: Vec<Option<f64>> = reduced
        .iter()
        .zip(full)
        .enumerate()
        .map(|(j, pair)| match pair {
            (Some(_), Some(jc)) if *jc == 0.0 => {
                log::warn!("sample {j}: reference closed-loop cost is zero, excluded from Δ");
                None
            }
            (Some(jh), Some(jc)) => Some((jh - jc) / jc.abs()),
            _ => None,
        })
        .collect();
    let used: Vec<f64> = per_sample.iter().flatten().copied().collect();
    if used.is_empty() {
        return Err(Error::Estimation("no sample pair available for Δ".into()));
    }
    let n = used.len() as f64;
    let mean = used.iter().sum::<f64>() / n;
    let sd = if used.len() > 1 {
        (used.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(DeltaStats {
        mean,
        sd,
        per_sample,
        n_used: used.len(),
    })
}
