//! Subspace learning, benchmark sweeps, short-horizon baselines and reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use asnmpc::controller::{solver_options, Controller};
use asnmpc::model::sample_initial_conditions;
use asnmpc::ocp::{sample_feasible_states, OcpSpec};
use asnmpc::subspace::{
    compute_projectors, cumulative_energy, estimate_covariances, lemma1_check, CovarianceEstimate, Lemma1Report,
    Projector, Provenance, SensitivityKind,
};
use asnmpc::{Error, Result};
use nalgebra::DVector;

use crate::config::{BenchConfig, RunConfig};
use crate::metrics::{performance_delta, DeltaStats};
use crate::pool::par_map;
use crate::trace::{run_closed_loop, run_closed_loop_from, ClosedLoopTrace};

/// Initial stack of one run, or why the controller cannot start.
pub type InitialGuess = std::result::Result<DVector<f64>, String>;

/// Draws allowed per requested evaluation state during rejection sampling.
pub const DRAWS_PER_STATE: usize = 50;

pub fn training_states(cfg: &RunConfig, spec: &OcpSpec) -> Result<Vec<DVector<f64>>> {
    sample_initial_conditions(&cfg.initial_set, &spec.model, cfg.n_train, cfg.train_seed)
}

/// `n_x0` states of the initial-condition set from which the full-order
/// problem is feasible.
pub fn evaluation_states(cfg: &RunConfig, spec: &OcpSpec) -> Result<Vec<DVector<f64>>> {
    sample_feasible_states(
        spec,
        &cfg.initial_set,
        cfg.n_x0,
        cfg.eval_seed,
        DRAWS_PER_STATE * cfg.n_x0,
        &solver_options(),
    )
}

pub fn provenance(cfg: &RunConfig, spec: &OcpSpec, kind: Option<SensitivityKind>) -> Provenance {
    Provenance {
        kind,
        seed: cfg.train_seed,
        n_train: cfg.n_train,
        plant: cfg.plant.as_str().into(),
        spec_hash: spec.fingerprint(),
    }
}

/// Covariance estimates for several kinds from one pass over the training
/// states.
pub fn learn_estimates(cfg: &RunConfig, spec: &OcpSpec, kinds: &[SensitivityKind]) -> Result<Vec<CovarianceEstimate>> {
    let xs = training_states(cfg, spec)?;
    log::info!("[learn/{}] {} training states, kinds {:?}", cfg.plant, xs.len(), kinds);
    estimate_covariances(kinds, spec, &xs, &solver_options())
}

pub fn projector_from(est: &CovarianceEstimate, q: usize, cfg: &RunConfig, spec: &OcpSpec) -> Result<Projector> {
    compute_projectors(&est.c_hat, q, provenance(cfg, spec, Some(est.kind)))
}

/// Covariance estimation and projector extraction for `cfg.kind`, `cfg.q`.
pub fn learn_projector(cfg: &RunConfig) -> Result<(Projector, CovarianceEstimate)> {
    let spec = cfg.spec()?;
    let est = learn_estimates(cfg, &spec, &[cfg.kind])?.remove(0);
    let proj = projector_from(&est, cfg.q, cfg, &spec)?;
    Ok((proj, est))
}

/// Closed loops of one controller from every initial state.
#[derive(Debug, Clone)]
pub struct RunSet {
    pub label: String,
    pub traces: Vec<ClosedLoopTrace>,
}

impl RunSet {
    /// With `starts`, run `j` begins from `starts[j]` instead of the
    /// controller's own initial guess.
    pub fn run(
        ctrl: &Controller,
        x0s: &[DVector<f64>],
        starts: Option<&[InitialGuess]>,
        m_sim: usize,
        workers: usize,
        label: &str,
    ) -> RunSet {
        log::info!("[{label}] {} closed loops of {m_sim} steps", x0s.len());
        let traces = par_map(x0s, workers, |j, x0| {
            let tag = format!("{label}/x0_{j}");
            match starts {
                Some(s) => run_closed_loop_from(ctrl, x0, s[j].clone(), m_sim, &tag),
                None => run_closed_loop(ctrl, x0, m_sim, &tag),
            }
        });
        RunSet {
            label: label.to_string(),
            traces,
        }
    }

    /// `J_c` of each complete run.
    pub fn costs(&self, m_sim: usize) -> Vec<Option<f64>> {
        self.traces
            .iter()
            .map(|t| t.completed(m_sim).then(|| t.closed_loop_cost()))
            .collect()
    }

    pub fn n_failed(&self, m_sim: usize) -> usize {
        self.traces.iter().filter(|t| !t.completed(m_sim)).count()
    }

    fn wall_ms(&self) -> (f64, f64) {
        let all: Vec<f64> = self.traces.iter().flat_map(|t| t.wall_ms.iter().copied()).collect();
        if all.is_empty() {
            return (0.0, 0.0);
        }
        (all.iter().sum::<f64>() / all.len() as f64, all.iter().copied().fold(0.0, f64::max))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let sub = dir.join("traces").join(&self.label);
        fs::create_dir_all(&sub).map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", sub.display()))))?;
        for (j, t) in self.traces.iter().enumerate() {
            t.write_csv(&sub.join(format!("x0_{j:03}.csv")))?;
        }
        Ok(())
    }

    pub fn read(dir: &Path, label: &str, n: usize) -> Result<RunSet> {
        let sub = dir.join("traces").join(label);
        let traces = (0..n)
            .map(|j| ClosedLoopTrace::read_csv(&sub.join(format!("x0_{j:03}.csv"))))
            .collect::<Result<_>>()?;
        Ok(RunSet {
            label: label.into(),
            traces,
        })
    }
}

/// Where the active subspace of a cell comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Learned(SensitivityKind),
    /// Seeded random orthonormal basis.
    Random,
}

impl Basis {
    pub fn as_str(self) -> &'static str {
        match self {
            Basis::Learned(k) => k.as_str(),
            Basis::Random => "random",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub q: usize,
    pub basis: Basis,
    pub runs: RunSet,
    pub delta: Option<DeltaStats>,
    pub lemma1: Option<Lemma1Report>,
    /// `Σ_{i≤q} σ_i / Σ σ_i`
    pub energy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Baseline {
    pub n_bar: usize,
    pub runs: RunSet,
    /// Complete runs (feasible start, no later failure).
    pub n_feasible: usize,
    /// Δ over the feasible subset.
    pub delta: Option<DeltaStats>,
    pub spec_hash: String,
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub config: BenchConfig,
    pub spec_hash: String,
    pub x0s: Vec<DVector<f64>>,
    pub full: RunSet,
    pub cells: Vec<Cell>,
    pub baselines: Vec<Baseline>,
    pub estimates: Vec<CovarianceEstimate>,
}

pub fn cell_label(q: usize, basis: Basis) -> String {
    format!("q{q}_{}", basis.as_str())
}

pub fn baseline_label(n_bar: usize) -> String {
    format!("short_n{n_bar}")
}

/// Full-order reference runs, every `(q, basis)` cell, and the short-horizon
/// baselines, all from the same evaluation states.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchmarkReport> {
    let spec = cfg.run.spec()?;
    let estimates = if cfg.kinds.is_empty() {
        Vec::new()
    } else {
        learn_estimates(&cfg.run, &spec, &cfg.kinds)?
    };
    run_benchmark_with(cfg, &estimates)
}

/// [`run_benchmark`] with covariance estimates computed elsewhere (from the
/// same training states); one estimate per entry of `cfg.kinds` is picked.
pub fn run_benchmark_with(cfg: &BenchConfig, available: &[CovarianceEstimate]) -> Result<BenchmarkReport> {
    let run = &cfg.run;
    let spec = run.spec()?;
    let estimates: Vec<CovarianceEstimate> = cfg
        .kinds
        .iter()
        .map(|k| {
            available
                .iter()
                .find(|e| e.kind == *k && e.dim() == spec.dim_u())
                .cloned()
                .ok_or_else(|| Error::Config(format!("no {k} estimate supplied")))
        })
        .collect::<Result<_>>()?;
    let ctor = run.guess_constructor(&spec);
    let x0s = evaluation_states(run, &spec)?;
    let full_ctrl = Controller::full_order(spec.clone(), ctor);
    // the full-order initial solve is shared by every controller on horizon N
    let starts: Vec<InitialGuess> = par_map(&x0s, run.workers, |_, x0| {
        full_ctrl.initial_guess(x0).map_err(|e| e.to_string())
    });
    let full = RunSet::run(
        &full_ctrl,
        &x0s,
        Some(&starts),
        run.m_sim,
        run.workers,
        "full",
    );
    let full_costs = full.costs(run.m_sim);
    if full.n_failed(run.m_sim) > 0 {
        log::warn!("{} full-order runs failed", full.n_failed(run.m_sim));
    }

    let mut bases: Vec<(Basis, Option<&CovarianceEstimate>)> =
        estimates.iter().map(|e| (Basis::Learned(e.kind), Some(e))).collect();
    if cfg.random_projector {
        bases.push((Basis::Random, None));
    }

    let mut cells = Vec::new();
    for &q in &cfg.qs {
        for &(basis, est) in &bases {
            let proj = match est {
                Some(est) => projector_from(est, q, run, &spec)?,
                None => Projector::random(spec.dim_u(), q, run.train_seed, run.plant.as_str(), &spec.fingerprint())?,
            };
            let lemma1 = est
                .filter(|e| e.kind != SensitivityKind::Identity)
                .map(|e| lemma1_check(e, &proj))
                .transpose()?;
            let energy = est.map(|_| cumulative_energy(&proj.sigma, q));
            let label = cell_label(q, basis);
            let ctrl = Controller::reduced(spec.clone(), proj, ctor)?;
            let runs = RunSet::run(&ctrl, &x0s, Some(&starts), run.m_sim, run.workers, &label);
            let delta = performance_delta(&runs.costs(run.m_sim), &full_costs).ok();
            if let Some(d) = &delta {
                log::info!("[{label}] Δ = {:.4e} % (SD {:.4e} %)", 100.0 * d.mean, 100.0 * d.sd);
            }
            cells.push(Cell {
                q,
                basis,
                runs,
                delta,
                lemma1,
                energy,
            });
        }
    }

    let mut baselines = Vec::new();
    for &n_bar in &cfg.baselines {
        let short = run.plant.spec(n_bar)?;
        let label = baseline_label(n_bar);
        let ctrl = Controller::full_order(short.clone(), run.guess_constructor(&short));
        let runs = RunSet::run(&ctrl, &x0s, None, run.m_sim, run.workers, &label);
        let costs = runs.costs(run.m_sim);
        let n_feasible = costs.iter().flatten().count();
        let delta = performance_delta(&costs, &full_costs).ok();
        log::info!("[{label}] feasible {n_feasible}/{}", x0s.len());
        baselines.push(Baseline {
            n_bar,
            runs,
            n_feasible,
            delta,
            spec_hash: short.fingerprint(),
        });
    }

    Ok(BenchmarkReport {
        config: cfg.clone(),
        spec_hash: spec.fingerprint(),
        x0s,
        full,
        cells,
        baselines,
        estimates,
    })
}

fn opt_pct(v: Option<f64>) -> String {
    v.map(|v| (100.0 * v).to_string()).unwrap_or_default()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))
}

impl BenchmarkReport {
    pub fn delta_csv(&self) -> String {
        let m_sim = self.config.run.m_sim;
        let mut s = String::from("q,basis,n_used,n_failed,delta_mean_pct,delta_sd_pct\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                c.q,
                c.basis.as_str(),
                c.delta.as_ref().map_or(0, |d| d.n_used),
                c.runs.n_failed(m_sim),
                opt_pct(c.delta.as_ref().map(|d| d.mean)),
                opt_pct(c.delta.as_ref().map(|d| d.sd)),
            );
        }
        s
    }

    pub fn baselines_csv(&self) -> String {
        let m = self.config.run.nu();
        let mut s = String::from("n_bar,decision_vars,n_feasible,n_x0,feasible_pct,delta_mean_pct,delta_sd_pct\n");
        for b in &self.baselines {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                b.n_bar,
                b.n_bar * m,
                b.n_feasible,
                self.x0s.len(),
                100.0 * b.n_feasible as f64 / self.x0s.len() as f64,
                opt_pct(b.delta.as_ref().map(|d| d.mean)),
                opt_pct(b.delta.as_ref().map(|d| d.sd)),
            );
        }
        s
    }

    pub fn lemma1_csv(&self) -> String {
        let mut s =
            String::from("q,kind,active_mass,sigma_active,inactive_mass,sigma_inactive,relative_gap,energy_fraction\n");
        for c in &self.cells {
            if let (Some(r), Basis::Learned(kind)) = (&c.lemma1, c.basis) {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    c.q,
                    kind.as_str(),
                    r.active_mass,
                    r.sigma_active,
                    r.inactive_mass,
                    r.sigma_inactive,
                    r.relative_gap(),
                    c.energy.unwrap_or(f64::NAN)
                );
            }
        }
        s
    }

    /// Per-run closed-loop costs; empty where a run did not complete.
    pub fn costs_csv(&self) -> String {
        let m_sim = self.config.run.m_sim;
        let sets = std::iter::once(&self.full)
            .chain(self.cells.iter().map(|c| &c.runs))
            .chain(self.baselines.iter().map(|b| &b.runs));
        let mut s = String::from("label,x0,closed_loop_cost\n");
        for set in sets {
            for (j, c) in set.costs(m_sim).iter().enumerate() {
                let _ = writeln!(s, "{},{j},{}", set.label, c.map(|v| v.to_string()).unwrap_or_default());
            }
        }
        s
    }

    pub fn manifest(&self) -> Result<String> {
        let run = &self.config.run;
        let mut s = String::new();
        let _ = writeln!(s, "tool: asnmpc {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "plant: {}", run.plant);
        let _ = writeln!(s, "train_seed: {}", run.train_seed);
        let _ = writeln!(s, "eval_seed: {}", run.eval_seed);
        let _ = writeln!(s, "spec_hash (N = {}): {}", run.horizon, self.spec_hash);
        for b in &self.baselines {
            let _ = writeln!(s, "spec_hash (N = {}): {}", b.n_bar, b.spec_hash);
        }
        for e in &self.estimates {
            let _ = writeln!(
                s,
                "estimate {}: n_samples = {}, n_skipped = {}",
                e.kind, e.n_samples, e.n_skipped
            );
        }
        let _ = writeln!(s, "initial conditions:");
        for (j, x) in self.x0s.iter().enumerate() {
            let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "  x0_{j:03} = [{}]", xs.join(", "));
        }
        let _ = writeln!(s, "resolved config:\n{}", self.config.to_toml()?);
        Ok(s)
    }

    /// Wall-clock summary (informational, not reproducible).
    pub fn timing(&self) -> String {
        let sets = std::iter::once(&self.full)
            .chain(self.cells.iter().map(|c| &c.runs))
            .chain(self.baselines.iter().map(|b| &b.runs));
        let mut s = String::from("label mean_step_ms max_step_ms\n");
        for set in sets {
            let (mean, max) = set.wall_ms();
            let _ = writeln!(s, "{} {mean:.3} {max:.3}", set.label);
        }
        s
    }

    /// Report files plus every trace under `dir`; returns the report paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", dir.display()))))?;
        let files = [
            ("delta.csv", self.delta_csv()),
            ("baselines.csv", self.baselines_csv()),
            ("lemma1.csv", self.lemma1_csv()),
            ("closed_loop_costs.csv", self.costs_csv()),
            ("manifest.txt", self.manifest()?),
            ("timing.txt", self.timing()),
        ];
        let mut out = Vec::new();
        for (name, text) in files {
            let p = dir.join(name);
            write_file(&p, &text)?;
            out.push(p);
        }
        self.full.write(dir)?;
        for c in &self.cells {
            c.runs.write(dir)?;
        }
        for b in &self.baselines {
            b.runs.write(dir)?;
        }
        Ok(out)
    }
}
