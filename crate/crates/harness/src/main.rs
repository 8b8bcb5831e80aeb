use std::path::{Path, PathBuf};
use std::process::ExitCode;

use asnmpc::controller::Controller;
use asnmpc::subspace::{cumulative_energy, lemma1_check, Projector, SensitivityKind};
use asnmpc::{Error, Result};
use asnmpc_harness::bench::{evaluation_states, learn_projector};
use asnmpc_harness::config::{BenchLayer, ConfigLayer, ConstructorChoice, PlantId};
use asnmpc_harness::demo::{demo_infeasible, demo_table};
use asnmpc_harness::{plot, run_benchmark, run_closed_loop, BenchConfig, ClosedLoopTrace, RunConfig};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

#[derive(Parser, Debug)]
#[command(name = "asnmpc", version, about = "Active-subspace MPC: learning, closed loops and benchmarks")]
struct Cli {
    /// TOML configuration file; flags override its values
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    plant: Option<PlantId>,
    /// Prediction horizon N
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Active dimension
    #[arg(long, global = true)]
    q: Option<usize>,
    /// Sensitivity: identity, optimal_input or cost_gradient
    #[arg(long, global = true)]
    kind: Option<SensitivityKind>,
    #[arg(long, global = true)]
    train_seed: Option<u64>,
    #[arg(long, global = true)]
    eval_seed: Option<u64>,
    #[arg(long, global = true)]
    n_train: Option<usize>,
    #[arg(long, global = true)]
    n_x0: Option<usize>,
    /// Closed-loop length in steps
    #[arg(long, global = true)]
    m_sim: Option<usize>,
    /// auto, shift_terminal or turnpike_insert
    #[arg(long, global = true)]
    constructor: Option<ConstructorChoice>,
    #[arg(long, global = true)]
    turnpike_split: Option<usize>,
    #[arg(short, long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Benchmark active dimensions, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    qs: Option<Vec<usize>>,
    /// Benchmark sensitivity kinds, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    kinds: Option<Vec<SensitivityKind>>,
    /// Short-horizon baselines N̄, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    baselines: Option<Vec<usize>>,
    /// Add a seeded random orthonormal basis to the benchmark
    #[arg(long, global = true)]
    random_projector: bool,
}

impl Overrides {
    fn layer(&self) -> ConfigLayer {
        let bench = BenchLayer {
            qs: self.qs.clone(),
            kinds: self.kinds.clone(),
            random_projector: self.random_projector.then_some(true),
            baselines: self.baselines.clone(),
        };
        ConfigLayer {
            plant: self.plant,
            horizon: self.horizon,
            q: self.q,
            kind: self.kind,
            train_seed: self.train_seed,
            eval_seed: self.eval_seed,
            n_train: self.n_train,
            n_x0: self.n_x0,
            m_sim: self.m_sim,
            constructor: self.constructor,
            turnpike_split: self.turnpike_split,
            output_dir: self.output_dir.clone(),
            workers: self.workers,
            initial_set: None,
            bench: (bench != BenchLayer::default()).then_some(bench),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the sensitivity covariance and write a projector file
    Learn {
        /// Projector file (default: <output_dir>/projector_<plant>_<kind>_q<q>.json)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One closed loop; writes a trace CSV, an SVG plot and a manifest
    Run {
        /// Use this projector instead of learning one
        #[arg(long)]
        projector: Option<PathBuf>,
        /// Full-order MPC instead of the reduced controller
        #[arg(long)]
        full_order: bool,
        /// Initial state, comma separated (default: first evaluation state)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
    },
    /// Benchmark matrix over (q, kind) with short-horizon baselines
    Bench,
    /// Full versus naive reduced feasibility on the double integrator
    DemoInfeasible {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Render trace CSV files to one SVG
    Plot {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "closed loop")]
        title: String,
    },
}

fn resolve_layer(cli: &Cli) -> Result<ConfigLayer> {
    let file = match &cli.config {
        Some(p) => ConfigLayer::load(p)?,
        None => ConfigLayer::default(),
    };
    Ok(file.merged(&cli.overrides.layer()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", dir.display()))))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))
}

fn learn(cfg: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    let (proj, est) = learn_projector(cfg)?;
    create_dir(&cfg.output_dir)?;
    let path = out.unwrap_or_else(|| {
        cfg.output_dir
            .join(format!("projector_{}_{}_q{}.json", cfg.plant, cfg.kind, cfg.q))
    });
    proj.save(&path)?;
    println!("projector written to {}", path.display());
    println!(
        "samples used {}, skipped {}; orthonormality defect {:.2e}",
        est.n_samples,
        est.n_skipped,
        proj.orthonormality_defect()
    );
    let mut qs = vec![1, 2, 5, 6, 12, 24, cfg.q];
    qs.sort_unstable();
    qs.dedup();
    for q in qs {
        if q <= proj.dim() {
            println!("  energy(q = {q:>3}) = {:.6}", cumulative_energy(&proj.sigma, q));
        }
    }
    if est.kind != SensitivityKind::Identity {
        let r = lemma1_check(&est, &proj)?;
        println!(
            "active mass {:.6e} vs Σσ_active {:.6e} (relative gap {:.2e})",
            r.active_mass,
            r.sigma_active,
            r.relative_gap()
        );
    }
    if let Some(msg) = est.advisory() {
        println!("advisory: {msg}");
    }
    Ok(())
}

fn run(cfg: &RunConfig, projector: Option<PathBuf>, full_order: bool, x0: Option<Vec<f64>>) -> Result<()> {
    let spec = cfg.spec()?;
    let ctor = cfg.guess_constructor(&spec);
    let (ctrl, label) = if full_order {
        (Controller::full_order(spec.clone(), ctor), "full".to_string())
    } else {
        let proj = match projector {
            Some(p) => Projector::load(&p)?,
            None => learn_projector(cfg)?.0,
        };
        let label = format!("q{}_{}", proj.q, proj.provenance.kind.map_or("random", |k| k.as_str()));
        (Controller::reduced(spec.clone(), proj, ctor)?, label)
    };
    let x0 = match x0 {
        Some(v) => DVector::from_vec(v),
        None => evaluation_states(cfg, &spec)?.remove(0),
    };
    let trace = run_closed_loop(&ctrl, &x0, cfg.m_sim, &label);
    create_dir(&cfg.output_dir)?;
    let stem = format!("run_{}_{label}", cfg.plant);
    let csv = cfg.output_dir.join(format!("{stem}.csv"));
    trace.write_csv(&csv)?;
    plot::write_svg(&cfg.output_dir.join(format!("{stem}.svg")), &stem, &[(&label, &trace)])?;
    let manifest = format!(
        "tool: asnmpc {}\nspec_hash: {}\nx0: {:?}\nresolved config:\n{}",
        env!("CARGO_PKG_VERSION"),
        spec.fingerprint(),
        x0.as_slice(),
        cfg.to_toml()?
    );
    write(&cfg.output_dir.join(format!("{stem}_manifest.txt")), &manifest)?;
    println!("trace written to {}", csv.display());
    println!(
        "steps {}, J_c = {:.8e}, final state {:?}",
        trace.steps(),
        trace.closed_loop_cost(),
        trace.states.last().map(|x| x.as_slice().to_vec())
    );
    match trace.error {
        Some(e) => Err(Error::InvalidInput(format!("run stopped early: {e}"))),
        None => Ok(()),
    }
}

fn bench(cfg: &BenchConfig) -> Result<()> {
    let report = run_benchmark(cfg)?;
    let dir = cfg.run.output_dir.join(format!("bench_{}", cfg.run.plant));
    let files = report.write(&dir)?;
    print!("{}", report.delta_csv());
    print!("{}", report.baselines_csv());
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = (|| -> Result<()> {
        match &cli.command {
            Command::Learn { out } => learn(&RunConfig::resolve(&resolve_layer(&cli)?)?, out.clone()),
            Command::Run {
                projector,
                full_order,
                x0,
            } => run(
                &RunConfig::resolve(&resolve_layer(&cli)?)?,
                projector.clone(),
                *full_order,
                x0.clone(),
            ),
            Command::Bench => bench(&BenchConfig::resolve(&resolve_layer(&cli)?)?),
            Command::DemoInfeasible { n, seed } => {
                let rows = demo_infeasible(*n, *seed)?;
                print!("{}", demo_table(&rows));
                let full = rows.iter().filter(|r| r.full_feasible).count();
                let naive = rows.iter().filter(|r| !r.naive_feasible).count();
                println!("full problem feasible: {full}/{n}; naive reduced problem infeasible: {naive}/{n}");
                Ok(())
            }
            Command::Plot { traces, out, title } => {
                let loaded: Vec<(String, ClosedLoopTrace)> = traces
                    .iter()
                    .map(|p| {
                        let name = p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
                        ClosedLoopTrace::read_csv(p).map(|t| (name, t))
                    })
                    .collect::<Result<_>>()?;
                let refs: Vec<(&str, &ClosedLoopTrace)> = loaded.iter().map(|(n, t)| (n.as_str(), t)).collect();
                plot::write_svg(out, title, &refs)?;
                println!("wrote {}", out.display());
                Ok(())
            }
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
