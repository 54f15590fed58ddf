//! Experiment configuration: a JSON file plus flag overrides fully determines
//! every command's output, byte for byte.

use serde::{Deserialize, Serialize};

use bwk::instances::{self, ConsumptionKind, InstancePair};
use bwk::model::BwkInstance;
use bwk::semibandit::FamilyDescriptor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub instance: Option<InstanceSource>,
    #[serde(default)]
    pub policy: Option<PolicySpec>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: u64,
    #[serde(default)]
    pub horizons: Vec<u64>,
    #[serde(default)]
    pub eps_grid: Vec<f64>,
    #[serde(default)]
    pub benchmark: BenchmarkSpec,
    #[serde(default)]
    pub trace_detail: TraceDetailSpec,
    /// Number of perturbation trials for the sensitivity command.
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Deltas as a fraction of each arm's Lagrangian gap in sensitivity trials.
    #[serde(default = "default_delta_scale")]
    pub delta_scale: f64,
    #[serde(default)]
    pub pair: Option<PairSpec>,
    #[serde(default)]
    pub semibandit: Option<SemiBanditSpec>,
}

fn default_schema_version() -> u32 {
    1
}
fn default_seed() -> u64 {
    0
}
fn default_reps() -> u64 {
    1
}
fn default_trials() -> u64 {
    100
}
fn default_delta_scale() -> f64 {
    0.9
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    File { file: String },
    Generator { generator: GeneratorSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum GeneratorSpec {
    ConcreteFamily {
        c_lb: f64,
        eps: f64,
        t: u64,
        #[serde(default)]
        deterministic_consumption: bool,
    },
    RandomBestArmOptimal {
        k: usize,
        t: u64,
        b: f64,
    },
    Random {
        k: usize,
        d: usize,
        t: u64,
    },
    D3Perturbed {
        base_file: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PairSpec {
    DeterministicPair { t: u64, eps: f64 },
    GeneralLbPair { c_lb: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PolicySpec {
    UcbBwk {
        /// Rescaling parameter; the formula value (clamped) when absent.
        #[serde(default)]
        eta: Option<f64>,
    },
    PrunedUcbBwk {
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        alpha0: Option<f64>,
    },
    FixedArm {
        arm: usize,
    },
    FixedDistribution {
        x: Vec<f64>,
    },
    /// Plays the solved relaxation's optimal distribution every round.
    LpOracle,
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec::UcbBwk { eta: None }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
#[derive(Default)]
pub enum BenchmarkSpec {
    #[default]
    LpProxy,
    MonteCarloFd {
        reps: u64,
    },
}

impl From<BenchmarkSpec> for bwk::metrics::BenchmarkMode {
    fn from(spec: BenchmarkSpec) -> Self {
        match spec {
            BenchmarkSpec::LpProxy => bwk::metrics::BenchmarkMode::LpProxy,
            BenchmarkSpec::MonteCarloFd { reps } => {
                bwk::metrics::BenchmarkMode::MonteCarloFd { reps }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
#[derive(Default)]
pub enum TraceDetailSpec {
    None,
    #[default]
    Summary,
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemiBanditSpec {
    pub n_atoms: usize,
    pub max_set_size: usize,
    /// "singletons", "all_subsets_k" for size-k subsets, or an explicit list
    /// via `explicit_sets`.
    pub family: String,
    #[serde(default)]
    pub explicit_sets: Option<Vec<Vec<usize>>>,
    pub d: usize,
    pub b: f64,
    pub t: u64,
    /// Compare against the naive per-set algorithm under paired seeds.
    #[serde(default)]
    pub compare_naive: bool,
}

impl SemiBanditSpec {
    pub fn descriptor(&self) -> Result<FamilyDescriptor, String> {
        if let Some(sets) = &self.explicit_sets {
            return Ok(FamilyDescriptor::Explicit(sets.clone()));
        }
        if self.family == "singletons" {
            return Ok(FamilyDescriptor::Singletons);
        }
        if let Some(k) = self.family.strip_prefix("all_subsets_") {
            let k: usize = k
                .parse()
                .map_err(|_| format!("bad family {}", self.family))?;
            return Ok(FamilyDescriptor::AllSubsetsOfSize(k));
        }
        Err(format!("unknown family descriptor {:?}", self.family))
    }
}

/// Materializes the configured instance (loading or generating).
pub fn build_instance(source: &InstanceSource, seed: u64) -> Result<BwkInstance, String> {
    match source {
        InstanceSource::File { file } => {
            let text = std::fs::read_to_string(file)
                .map_err(|e| format!("cannot read instance file {file}: {e}"))?;
            BwkInstance::from_json(&text).map_err(|e| e.to_string())
        }
        InstanceSource::Generator { generator } => build_generated(generator, seed),
    }
}

fn build_generated(spec: &GeneratorSpec, seed: u64) -> Result<BwkInstance, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec {
        GeneratorSpec::ConcreteFamily {
            c_lb,
            eps,
            t,
            deterministic_consumption,
        } => {
            let kind = if *deterministic_consumption {
                ConsumptionKind::Deterministic
            } else {
                ConsumptionKind::Bernoulli
            };
            instances::make_concrete_family_with(*c_lb, *eps, *t, kind).map_err(|e| e.to_string())
        }
        GeneratorSpec::RandomBestArmOptimal { k, t, b } => {
            instances::random_best_arm_optimal(*k, *t, *b, &mut rng)
                .map(|c| c.instance)
                .map_err(|e| e.to_string())
        }
        GeneratorSpec::Random { k, d, t } => Ok(instances::random_instance(*k, *d, *t, &mut rng)),
        GeneratorSpec::D3Perturbed { base_file } => {
            let text = std::fs::read_to_string(base_file)
                .map_err(|e| format!("cannot read base file {base_file}: {e}"))?;
            let base = BwkInstance::from_json(&text).map_err(|e| e.to_string())?;
            instances::make_d3_perturbed(&base, &mut rng).map_err(|e| e.to_string())
        }
    }
}

/// Materializes the configured instance pair for lower-bound experiments.
pub fn build_pair(config: &ExperimentConfig) -> Result<InstancePair, String> {
    let spec = config
        .pair
        .as_ref()
        .ok_or_else(|| "lowerbound needs a `pair` section".to_string())?;
    match spec {
        PairSpec::DeterministicPair { t, eps } => {
            instances::make_deterministic_pair(*t, *eps).map_err(|e| e.to_string())
        }
        PairSpec::GeneralLbPair { c_lb } => {
            let source = config
                .instance
                .as_ref()
                .ok_or_else(|| "general_lb_pair needs an `instance` section".to_string())?;
            let base = build_instance(source, config.seed)?;
            instances::make_general_lb_pair(&base, *c_lb).map_err(|e| e.to_string())
        }
    }
}
