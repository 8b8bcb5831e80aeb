//! Closed-loop simulation and its per-step record.

use std::path::Path;
use std::time::Instant;

use asnmpc::controller::{Controller, StepMode};
use asnmpc::model::DiscreteModel;
use asnmpc::{Error, Result};
use nalgebra::DVector;

/// Per-step record of one closed-loop run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClosedLoopTrace {
    pub sample_time: f64,
    /// `x_0 … x_M` (fewer when the run was truncated).
    pub states: Vec<DVector<f64>>,
    /// Physical inputs `u_0 … u_{M−1}`.
    pub inputs: Vec<DVector<f64>>,
    /// `ℓ(x_k, u_k)` with the applied input.
    pub stage_costs: Vec<f64>,
    /// `J(x_k, u_k)` of the adopted stack.
    pub open_loop_costs: Vec<f64>,
    /// `J(x_k, ũ_k)` of the feasible guess.
    pub guess_costs: Vec<f64>,
    pub modes: Vec<StepMode>,
    /// `max g(x_k, u_k)`
    pub violations: Vec<f64>,
    /// `max g(x_k, ũ_k)`
    pub guess_violations: Vec<f64>,
    pub wall_ms: Vec<f64>,
    /// Why the run stopped early, if it did.
    pub error: Option<String>,
}

impl ClosedLoopTrace {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn completed(&self, m_sim: usize) -> bool {
        self.error.is_none() && self.steps() == m_sim
    }

    /// Accumulated closed-loop cost `J_c`.
    pub fn closed_loop_cost(&self) -> f64 {
        self.stage_costs.iter().sum()
    }

    /// Largest state deviation between the recorded trajectory and a
    /// re-simulation of the recorded inputs.
    pub fn replay_error(&self, model: &DiscreteModel) -> Result<f64> {
        let Some(x0) = self.states.first() else {
            return Ok(0.0);
        };
        let xs = model.rollout(x0, &self.inputs)?;
        Ok(xs
            .iter()
            .zip(&self.states)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max))
    }

    /// CSV with columns `step, t, x_1..x_nx, u_1..u_m, stage_cost,
    /// open_loop_cost, mode, max_constraint_violation, wall_ms`; the final
    /// state has a row of its own with empty step data.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::Io(std::io::Error::other(format!("{}: {e}", path.display())));
        let nx = self.states.first().map_or(0, |x| x.len());
        let nu = self.inputs.first().map_or(0, |u| u.len());
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header = vec!["step".to_string(), "t".to_string()];
        header.extend((1..=nx).map(|i| format!("x_{i}")));
        header.extend((1..=nu).map(|i| format!("u_{i}")));
        header.extend(
            ["stage_cost", "open_loop_cost", "mode", "max_constraint_violation", "wall_ms"].map(String::from),
        );
        w.write_record(&header).map_err(io)?;
        for (k, x) in self.states.iter().enumerate() {
            let mut rec = vec![k.to_string(), (k as f64 * self.sample_time).to_string()];
            rec.extend(x.iter().map(|v| v.to_string()));
            if k < self.steps() {
                rec.extend(self.inputs[k].iter().map(|v| v.to_string()));
                rec.push(self.stage_costs[k].to_string());
                rec.push(self.open_loop_costs[k].to_string());
                rec.push(self.modes[k].as_str().to_string());
                rec.push(self.violations[k].to_string());
                rec.push(format!("{:.3}", self.wall_ms[k]));
            } else {
                rec.extend(std::iter::repeat_n(String::new(), nu + 5));
            }
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))
    }

    /// Inverse of [`write_csv`](Self::write_csv); guess columns are not
    /// persisted and come back empty.
    pub fn read_csv(path: &Path) -> Result<ClosedLoopTrace> {
        let io = |e: csv::Error| Error::Io(std::io::Error::other(format!("{}: {e}", path.display())));
        let bad = |what: &str| Error::Parse(format!("{}: {what}", path.display()));
        let mut r = csv::Reader::from_path(path).map_err(io)?;
        let header = r.headers().map_err(io)?.clone();
        let nx = header.iter().filter(|h| h.starts_with("x_")).count();
        let nu = header.iter().filter(|h| h.starts_with("u_")).count();
        if header.len() != 2 + nx + nu + 5 || &header[0] != "step" {
            return Err(bad("unexpected header"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("not a number: {s:?}")));
        let mut t = ClosedLoopTrace::default();
        let mut times = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(io)?;
            times.push(num(&rec[1])?);
            t.states.push(DVector::from_iterator(nx, (0..nx).map(|i| num(&rec[2 + i]).unwrap_or(f64::NAN))));
            if rec[2 + nx].is_empty() {
                continue;
            }
            let o = 2 + nx;
            t.inputs.push(DVector::from_iterator(nu, (0..nu).map(|i| num(&rec[o + i]).unwrap_or(f64::NAN))));
            t.stage_costs.push(num(&rec[o + nu])?);
            t.open_loop_costs.push(num(&rec[o + nu + 1])?);
            t.modes.push(match &rec[o + nu + 2] {
                "reduced_optimal" => StepMode::ReducedOptimal,
                "fallback_guess" => StepMode::FallbackGuess,
                other => return Err(bad(&format!("unknown mode {other:?}"))),
            });
            t.violations.push(num(&rec[o + nu + 3])?);
            t.wall_ms.push(num(&rec[o + nu + 4])?);
        }
        if t.states.iter().any(|x| x.iter().any(|v| v.is_nan())) || t.inputs.iter().any(|u| u.iter().any(|v| v.is_nan())) {
            return Err(bad("malformed state or input entry"));
        }
        t.sample_time = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Ok(t)
    }
}

/// `m_sim` steps of the nominal loop `x_{k+1} = f(x_k, u_k)` from `x0`.
/// A failing step ends the run and is recorded in `error`.
pub fn run_closed_loop(ctrl: &Controller, x0: &DVector<f64>, m_sim: usize, tag: &str) -> ClosedLoopTrace {
    let initial = ctrl.initial_guess(x0).map_err(|e| e.to_string());
    run_closed_loop_from(ctrl, x0, initial, m_sim, tag)
}

/// [`run_closed_loop`] with the initial stack (or the reason there is none)
/// computed beforehand, e.g. shared between controllers on the same horizon.
pub fn run_closed_loop_from(
    ctrl: &Controller,
    x0: &DVector<f64>,
    initial: std::result::Result<DVector<f64>, String>,
    m_sim: usize,
    tag: &str,
) -> ClosedLoopTrace {
    let model = &ctrl.spec.model;
    let mut t = ClosedLoopTrace {
        sample_time: model.sample_time,
        states: vec![x0.clone()],
        ..Default::default()
    };
    let mut state = match initial {
        Ok(u0) => ctrl.start(u0),
        Err(e) => {
            log::info!("[{tag}] not started: {e}");
            t.error = Some(e);
            return t;
        }
    };
    let mut x = x0.clone();
    for k in 0..m_sim {
        let clock = Instant::now();
        let step = ctrl.step(&state, &x).and_then(|(out, next)| {
            let x_next = model.step(&x, &out.applied)?;
            Ok((out, next, x_next))
        });
        let (out, next, x_next) = match step {
            Ok(v) => v,
            Err(e) => {
                log::warn!("[{tag}] stopped at step {k}: {e}");
                t.error = Some(e.to_string());
                return t;
            }
        };
        t.wall_ms.push(clock.elapsed().as_secs_f64() * 1e3);
        t.stage_costs.push(ctrl.spec.stage_cost.eval(&x, &out.applied));
        t.open_loop_costs.push(out.cost);
        t.guess_costs.push(out.cost_guess);
        t.modes.push(out.mode);
        t.violations.push(out.violation);
        t.guess_violations.push(out.guess_violation);
        t.inputs.push(out.applied);
        t.states.push(x_next.clone());
        log::debug!("[{tag}] step {k}: J = {:.6e}, mode = {}", out.cost, out.mode.as_str());
        x = x_next;
        state = next;
    }
    t
}
