//! Run and benchmark configuration: per-plant defaults, overridden by a TOML
//! file, overridden by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use asnmpc::controller::GuessConstructor;
use asnmpc::model::InitialConditionSet;
use asnmpc::ocp::{cstr_spec, robot_spec, synchrotron_spec, OcpSpec};
use asnmpc::subspace::SensitivityKind;
use asnmpc::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantId {
    Synchrotron,
    Robot,
    Cstr,
}

impl PlantId {
    pub fn as_str(self) -> &'static str {
        match self {
            PlantId::Synchrotron => "synchrotron",
            PlantId::Robot => "robot",
            PlantId::Cstr => "cstr",
        }
    }

    /// Problem set-up with horizon `n`.
    pub fn spec(self, horizon: usize) -> Result<OcpSpec> {
        match self {
            PlantId::Synchrotron => synchrotron_spec(horizon),
            PlantId::Robot => robot_spec(horizon),
            PlantId::Cstr => cstr_spec(horizon),
        }
    }

    /// Default initial-condition set 𝕏₀.
    pub fn initial_set(self) -> InitialConditionSet {
        match self {
            // The (x3, x4) block has an unstable mode (|λ| ≈ 1.42) that |u2| ≤ 0.1
            // can only hold when s = x3 − 0.2209 x4 stays within a few 1e-3,
            // so the set is a thin slab around s = 0.
            PlantId::Synchrotron => InitialConditionSet::Parallelotope {
                center: vec![0.0; 4],
                generators: vec![
                    vec![0.288, 0.0, 0.0, 0.0],
                    vec![0.0, 0.36, 0.0, 0.0],
                    vec![0.0, 0.0, 0.2209 * 0.414, 0.414],
                    vec![0.0, 0.0, 0.003, 0.0],
                ],
            },
            PlantId::Robot => InitialConditionSet::Box {
                lo: vec![-5.0, -4.0, -1.0, -1.0],
                hi: vec![-2.0, -1.0, 1.0, 1.0],
            },
            PlantId::Cstr => InitialConditionSet::Box {
                lo: vec![1.0, 0.5, 1.0],
                hi: vec![3.0, 1.2, 1.5],
            },
        }
    }
}

impl fmt::Display for PlantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlantId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synchrotron" => Ok(PlantId::Synchrotron),
            "robot" => Ok(PlantId::Robot),
            "cstr" => Ok(PlantId::Cstr),
            other => Err(Error::Config(format!("unknown plant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructorChoice {
    /// Shift with terminal feedback when the plant has one, turnpike otherwise.
    Auto,
    ShiftTerminal,
    TurnpikeInsert,
}

impl FromStr for ConstructorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ConstructorChoice::Auto),
            "shift_terminal" => Ok(ConstructorChoice::ShiftTerminal),
            "turnpike_insert" => Ok(ConstructorChoice::TurnpikeInsert),
            other => Err(Error::Config(format!("unknown constructor {other:?}"))),
        }
    }
}

/// One layer of configuration; unset fields fall through to the layer below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub plant: Option<PlantId>,
    pub horizon: Option<usize>,
    pub q: Option<usize>,
    pub kind: Option<SensitivityKind>,
    pub train_seed: Option<u64>,
    pub eval_seed: Option<u64>,
    pub n_train: Option<usize>,
    pub n_x0: Option<usize>,
    pub m_sim: Option<usize>,
    pub constructor: Option<ConstructorChoice>,
    pub turnpike_split: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub initial_set: Option<InitialConditionSet>,
    pub bench: Option<BenchLayer>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchLayer {
    pub qs: Option<Vec<usize>>,
    pub kinds: Option<Vec<SensitivityKind>>,
    pub random_projector: Option<bool>,
    pub baselines: Option<Vec<usize>>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
        Self::from_toml(&text)
    }

    /// `top` wins field by field.
    pub fn merged(mut self, top: &ConfigLayer) -> ConfigLayer {
        overlay!(
            self, top, plant, horizon, q, kind, train_seed, eval_seed, n_train, n_x0, m_sim, constructor,
            turnpike_split, output_dir, workers, initial_set
        );
        match (&mut self.bench, &top.bench) {
            (Some(b), Some(t)) => {
                overlay!(b, t, qs, kinds, random_projector, baselines);
            }
            (None, Some(t)) => self.bench = Some(t.clone()),
            _ => {}
        }
        self
    }
}

/// Fully resolved single-run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub plant: PlantId,
    pub horizon: usize,
    pub q: usize,
    pub kind: SensitivityKind,
    pub train_seed: u64,
    pub eval_seed: u64,
    pub n_train: usize,
    pub n_x0: usize,
    pub m_sim: usize,
    pub constructor: ConstructorChoice,
    /// Stage `L` of the turnpike constructor; `N/2` when unset.
    pub turnpike_split: Option<usize>,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub initial_set: InitialConditionSet,
}

impl RunConfig {
    pub fn defaults(plant: PlantId) -> RunConfig {
        let (horizon, q, kind, n_train, n_x0, m_sim) = match plant {
            PlantId::Synchrotron => (60, 6, SensitivityKind::CostGradient, 60, 20, 200),
            PlantId::Robot => (60, 12, SensitivityKind::CostGradient, 80, 10, 160),
            PlantId::Cstr => (100, 5, SensitivityKind::OptimalInput, 40, 10, 150),
        };
        RunConfig {
            plant,
            horizon,
            q,
            kind,
            train_seed: 1,
            eval_seed: 2,
            n_train,
            n_x0,
            m_sim,
            constructor: ConstructorChoice::Auto,
            turnpike_split: None,
            output_dir: PathBuf::from("out"),
            workers: 1,
            initial_set: plant.initial_set(),
        }
    }

    pub fn resolve(layer: &ConfigLayer) -> Result<RunConfig> {
        let plant = layer
            .plant
            .ok_or_else(|| Error::Config("no plant given (synchrotron, robot or cstr)".into()))?;
        let d = RunConfig::defaults(plant);
        let cfg = RunConfig {
            plant,
            horizon: layer.horizon.unwrap_or(d.horizon),
            q: layer.q.unwrap_or(d.q),
            kind: layer.kind.unwrap_or(d.kind),
            train_seed: layer.train_seed.unwrap_or(d.train_seed),
            eval_seed: layer.eval_seed.unwrap_or(d.eval_seed),
            n_train: layer.n_train.unwrap_or(d.n_train),
            n_x0: layer.n_x0.unwrap_or(d.n_x0),
            m_sim: layer.m_sim.unwrap_or(d.m_sim),
            constructor: layer.constructor.unwrap_or(d.constructor),
            turnpike_split: layer.turnpike_split.or(d.turnpike_split),
            output_dir: layer.output_dir.clone().unwrap_or(d.output_dir),
            workers: layer.workers.unwrap_or(d.workers),
            initial_set: layer.initial_set.clone().unwrap_or(d.initial_set),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Inputs per stage; all three plants have two.
    pub fn nu(&self) -> usize {
        2
    }

    pub fn dim_u(&self) -> usize {
        self.horizon * self.nu()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.q == 0 || self.q > self.dim_u() {
            return Err(Error::Config(format!("q = {} outside 1..={}", self.q, self.dim_u())));
        }
        if self.m_sim == 0 || self.n_x0 == 0 || self.n_train == 0 || self.workers == 0 {
            return Err(Error::Config("m_sim, n_x0, n_train and workers must be positive".into()));
        }
        if let Some(l) = self.turnpike_split {
            if l == 0 || l > self.horizon {
                return Err(Error::Config(format!("turnpike_split = {l} outside 1..={}", self.horizon)));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<OcpSpec> {
        self.plant.spec(self.horizon)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("config echo: {e}")))
    }

    pub fn guess_constructor(&self, spec: &OcpSpec) -> GuessConstructor {
        let turnpike = GuessConstructor::TurnpikeInsert {
            l: self.turnpike_split.unwrap_or(spec.horizon / 2).clamp(1, spec.horizon),
        };
        match self.constructor {
            ConstructorChoice::Auto => match GuessConstructor::default_for(spec) {
                GuessConstructor::TurnpikeInsert { .. } => turnpike,
                shift => shift,
            },
            ConstructorChoice::ShiftTerminal => GuessConstructor::ShiftTerminal,
            ConstructorChoice::TurnpikeInsert => turnpike,
        }
    }
}

/// A benchmark matrix: every `(q, kind)` cell plus short-horizon baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    pub qs: Vec<usize>,
    pub kinds: Vec<SensitivityKind>,
    /// Add one column with a seeded random orthonormal basis.
    pub random_projector: bool,
    /// Short horizons `N̄`; default `⌈q/m⌉` for every `q` below `N·m`.
    pub baselines: Vec<usize>,
}

impl BenchConfig {
    pub fn resolve(layer: &ConfigLayer) -> Result<BenchConfig> {
        let run = RunConfig::resolve(layer)?;
        let b = layer.bench.clone().unwrap_or_default();
        let qs = b.qs.unwrap_or_else(|| match run.plant {
            PlantId::Cstr => vec![5],
            _ => vec![6, 12, 24],
        });
        let kinds = b.kinds.unwrap_or_else(|| {
            vec![
                SensitivityKind::Identity,
                SensitivityKind::OptimalInput,
                SensitivityKind::CostGradient,
            ]
        });
        let m = run.nu();
        let baselines = b.baselines.unwrap_or_else(|| {
            let mut v: Vec<usize> = qs.iter().filter(|&&q| q < run.dim_u()).map(|q| q.div_ceil(m)).collect();
            v.dedup();
            v
        });
        let cfg = BenchConfig {
            random_projector: b.random_projector.unwrap_or(false),
            run,
            qs,
            kinds,
            baselines,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        if self.qs.is_empty() {
            return Err(Error::Config("bench.qs is empty".into()));
        }
        if let Some(q) = self.qs.iter().find(|&&q| q == 0 || q > self.run.dim_u()) {
            return Err(Error::Config(format!("bench q = {q} outside 1..={}", self.run.dim_u())));
        }
        if self.kinds.is_empty() && !self.random_projector {
            return Err(Error::Config("bench needs at least one kind or the random projector".into()));
        }
        if self.baselines.contains(&0) {
            return Err(Error::Config("baseline horizon must be at least 1".into()));
        }
        Ok(())
    }

    /// The resolved configuration as TOML, for the manifest.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("config echo: {e}")))
    }
}
