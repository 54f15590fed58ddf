//! `bwk` — seeded, config-driven BwK experiments.
//!
//! Subcommands: `gen` (instance generation), `run` (one experiment),
//! `sweep` (horizon sweeps), `lowerbound` (two-instance stress), `sensitivity`
//! (LP perturbation trials), `semibandit` (the reduction demo).
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use bwk::algorithms::{
    FixedArm, FixedDistribution, PerArmRadiusProvider, Policy, PrunedUcbBwk, RadiusProvider, UcbBwk,
};
use bwk::lp;
use bwk::metrics::{self, BenchmarkMode};
use bwk::model::BwkInstance;
use bwk::semibandit::{SemiBanditInstance, SemiBanditRadiusProvider};
use bwk::simulator::{self, Environment, Feedback, TraceDetail};
use bwk::split_seed;

use config::{
    build_instance, build_pair, ExperimentConfig, GeneratorSpec, InstanceSource, PolicySpec,
    TraceDetailSpec,
};

#[derive(Parser)]
#[command(
    name = "bwk",
    version,
    about = "Bandits-with-knapsacks experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; replication i runs with a 64-bit mix of seed and i.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replication count.
    #[arg(long, global = true)]
    reps: Option<u64>,
    /// Output directory (default: $BWK_OUT_DIR or the working directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker pool size (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Trace detail: none, summary (radii kept in memory), full (also writes
    /// the first replication's trace).
    #[arg(long, global = true, value_enum)]
    trace_detail: Option<TraceDetailSpec>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured instance (or pair) and write it as JSON.
    Gen,
    /// Run one (instance, policy) experiment over the replication set.
    Run,
    /// Regret scaling across the configured horizons; writes CSV and JSON.
    Sweep,
    /// Run the policy on a lower-bound instance pair.
    Lowerbound,
    /// Optimistic LP perturbation trials against the Lagrangian gaps.
    Sensitivity,
    /// Semi-bandit reduction demo with the confidence-sum budget check.
    Semibandit,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
}

impl From<bwk::BwkError> for CliError {
    fn from(e: bwk::BwkError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let mut cfg: ExperimentConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = cli.reps {
        cfg.reps = reps;
    }
    if let Some(detail) = cli.trace_detail {
        cfg.trace_detail = detail;
    }
    if let Some(threads) = cli.threads {
        bwk::configure_threads(threads);
    }
    let out_dir = cli
        .out
        .or_else(|| std::env::var_os("BWK_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("cannot create output dir: {e}")))?;

    match cli.command {
        Command::Gen => cmd_gen(&cfg, &out_dir),
        Command::Run => cmd_run(&cfg, &out_dir),
        Command::Sweep => cmd_sweep(&cfg, &out_dir),
        Command::Lowerbound => cmd_lowerbound(&cfg, &out_dir),
        Command::Sensitivity => cmd_sensitivity(&cfg, &out_dir),
        Command::Semibandit => cmd_semibandit(&cfg, &out_dir),
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(dir.join(name), text)
        .map_err(|e| CliError::Runtime(format!("cannot write {name}: {e}")))
}

fn require_instance(cfg: &ExperimentConfig) -> Result<BwkInstance, CliError> {
    let source = cfg
        .instance
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no `instance` section".into()))?;
    build_instance(source, cfg.seed).map_err(CliError::Config)
}

fn build_policy(spec: &PolicySpec, instance: &BwkInstance) -> Result<Box<dyn Policy>, CliError> {
    let shape = instance.shape();
    let eta_or_default =
        |eta: Option<f64>| eta.unwrap_or_else(|| lp::compute_eta_shape(shape).value);
    match spec {
        PolicySpec::UcbBwk { eta } => {
            let provider = PerArmRadiusProvider::new(shape);
            UcbBwk::with_eta(provider, shape, eta_or_default(*eta))
                .map(|p| Box::new(p) as Box<dyn Policy>)
                .map_err(|e| CliError::Config(e.to_string()))
        }
        PolicySpec::PrunedUcbBwk { eta, alpha0 } => {
            let provider = PerArmRadiusProvider::new(shape);
            let inner = UcbBwk::with_eta(provider, shape, eta_or_default(*eta))
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(Box::new(PrunedUcbBwk::with_alpha0(
                inner,
                alpha0.unwrap_or(bwk::algorithms::DEFAULT_ALPHA0),
            )))
        }
        PolicySpec::FixedArm { arm } => {
            if *arm >= instance.num_arms() {
                return Err(CliError::Config(format!("fixed arm {arm} out of range")));
            }
            Ok(Box::new(FixedArm::new(*arm, instance.num_arms())))
        }
        PolicySpec::FixedDistribution { x } => {
            if x.len() != instance.num_arms()
                || x.iter().any(|&v| v < 0.0)
                || (x.iter().sum::<f64>() - 1.0).abs() > 1e-9
            {
                return Err(CliError::Config(
                    "fixed distribution is not a distribution".into(),
                ));
            }
            Ok(Box::new(FixedDistribution::new(x.clone())))
        }
        PolicySpec::LpOracle => {
            let sol = lp::solve(&lp::build_primal(instance))?;
            Ok(Box::new(FixedDistribution::new(sol.x)))
        }
    }
}

fn sim_detail(spec: TraceDetailSpec) -> TraceDetail {
    match spec {
        TraceDetailSpec::None => TraceDetail::Summary,
        TraceDetailSpec::Summary | TraceDetailSpec::Full => TraceDetail::Full,
    }
}

fn cmd_gen(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    if cfg.pair.is_some() {
        let pair = build_pair(cfg).map_err(CliError::Config)?;
        std::fs::write(out.join("pair_base.json"), pair.base.to_json())
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        std::fs::write(out.join("pair_twin.json"), pair.twin.to_json())
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        return write_json(
            out,
            "pair_meta.json",
            &json!({
                "schema_version": 1,
                "perturbation_size": pair.perturbation_size,
                "relation": pair.relation,
                "config": cfg,
            }),
        );
    }
    let instance = require_instance(cfg)?;
    std::fs::write(out.join("instance.json"), instance.to_json())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let instance = require_instance(cfg)?;
    let policy_spec = cfg.policy.clone().unwrap_or_default();
    build_policy(&policy_spec, &instance)?; // validate before the long run
    let detail = sim_detail(cfg.trace_detail);
    let traces = simulator::run_replications(
        &instance,
        || build_policy(&policy_spec, &instance).expect("validated above"),
        cfg.seed,
        cfg.reps,
        detail,
    )?;
    let benchmark = metrics::benchmark_value(
        &instance,
        BenchmarkMode::from(cfg.benchmark),
        split_seed(cfg.seed, u64::MAX / 2),
    )?;
    let opt_fd = match cfg.benchmark {
        config::BenchmarkSpec::LpProxy => None,
        _ => Some(benchmark),
    };
    let summary = metrics::summarize(&instance, &traces, benchmark, opt_fd, &cfg.eps_grid)?;
    write_json(
        out,
        "summary.json",
        &json!({
            "schema_version": 1,
            "config": cfg,
            "summary": summary,
        }),
    )?;
    if cfg.trace_detail == TraceDetailSpec::Full {
        std::fs::write(out.join("trace_rep0.ndjson"), traces[0].to_ndjson())
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn cmd_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    if cfg.horizons.is_empty() {
        return Err(CliError::Config(
            "sweep needs a non-empty `horizons` list".into(),
        ));
    }
    let family_spec = match &cfg.instance {
        Some(InstanceSource::Generator {
            generator:
                GeneratorSpec::ConcreteFamily {
                    c_lb,
                    eps,
                    deterministic_consumption,
                    ..
                },
        }) => (*c_lb, *eps, *deterministic_consumption),
        _ => {
            return Err(CliError::Config(
                "sweep needs a concrete_family generator (parameterized by T)".into(),
            ))
        }
    };
    let policy_spec = cfg.policy.clone().unwrap_or_default();
    let report = metrics::regret_scaling_report(
        |t| {
            let kind = if family_spec.2 {
                bwk::instances::ConsumptionKind::Deterministic
            } else {
                bwk::instances::ConsumptionKind::Bernoulli
            };
            bwk::instances::make_concrete_family_with(family_spec.0, family_spec.1, t, kind)
        },
        |inst| build_policy(&policy_spec, inst).expect("policy spec validated per horizon"),
        &cfg.horizons,
        cfg.reps,
        BenchmarkMode::from(cfg.benchmark),
        cfg.seed,
    )?;
    let mut csv = String::from("t,reps,benchmark,mean_regret,stderr,regret_over_sqrt_t\n");
    for row in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.t, row.reps, row.benchmark, row.mean_regret, row.stderr, row.regret_over_sqrt_t
        ));
    }
    std::fs::write(out.join("sweep.csv"), csv).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_json(
        out,
        "sweep.json",
        &json!({
            "schema_version": 1,
            "config": cfg,
            "report": report,
        }),
    )
}

fn cmd_lowerbound(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let pair = build_pair(cfg).map_err(CliError::Config)?;
    let policy_spec = cfg.policy.clone().unwrap_or_default();
    build_policy(&policy_spec, &pair.base)?;
    let report = metrics::lb_pair_report(
        &pair,
        |inst| build_policy(&policy_spec, inst).expect("validated above"),
        cfg.reps,
        BenchmarkMode::from(cfg.benchmark),
        cfg.seed,
    )?;
    write_json(
        out,
        "lowerbound.json",
        &json!({
            "schema_version": 1,
            "config": cfg,
            "perturbation_size": pair.perturbation_size,
            "relation": pair.relation,
            "report": report,
        }),
    )
}

fn cmd_sensitivity(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let source = cfg
        .instance
        .as_ref()
        .ok_or_else(|| CliError::Config("sensitivity needs an `instance` section".into()))?;
    if !(0.0..=1.0).contains(&cfg.delta_scale) {
        return Err(CliError::Config("delta_scale must lie in [0,1]".into()));
    }
    let mut trials = Vec::with_capacity(cfg.trials as usize);
    let mut preserved = 0u64;
    for trial in 0..cfg.trials {
        let instance =
            build_instance(source, split_seed(cfg.seed, trial)).map_err(CliError::Config)?;
        let sol = lp::solve(&lp::build_primal(&instance))?;
        let gaps = lp::lagrangian_gaps(&instance, &sol)?;
        let non_null_support: Vec<usize> = sol
            .support
            .iter()
            .copied()
            .filter(|&a| a != instance.null_index)
            .collect();
        if non_null_support.len() != 1 {
            return Err(CliError::Runtime(format!(
                "trial {trial}: instance is not best-arm-optimal"
            )));
        }
        let a_star = non_null_support[0];
        let deltas: Vec<f64> = (0..instance.num_arms())
            .map(|a| {
                if a == a_star || a == instance.null_index {
                    0.0
                } else {
                    (cfg.delta_scale * gaps[a]).clamp(0.0, 1.0)
                }
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, 1_000_000 + trial));
        let outcome = lp::sensitivity_trial(&instance, &sol, &deltas, &mut rng)?;
        preserved += outcome.support_preserved as u64;
        trials.push(json!({
            "trial": trial,
            "best_arm": a_star,
            "gaps": gaps,
            "deltas": deltas,
            "support_preserved": outcome.support_preserved,
            "perturbed_support": outcome.perturbed_support,
            "entrants_within_gap": outcome.entrants_within_gap,
        }));
    }
    write_json(
        out,
        "sensitivity.json",
        &json!({
            "schema_version": 1,
            "config": cfg,
            "trial_count": cfg.trials,
            "preserved_count": preserved,
            "trials": trials,
        }),
    )
}

/// Wraps the reduced policy to log the provider's radius of each chosen set
/// at decision time, which the confidence-sum budget check needs.
struct RadiusLogging<P: RadiusProvider> {
    inner: UcbBwk<P>,
    log: Vec<f64>,
}

impl<P: RadiusProvider> Policy for RadiusLogging<P> {
    fn decide(
        &mut self,
        t: u64,
        rng: &mut dyn rand::RngCore,
    ) -> bwk::Result<bwk::algorithms::Decision> {
        let d = self.inner.decide(t, rng)?;
        self.log.push(self.inner.provider().radius(d.arm));
        Ok(d)
    }

    fn observe(&mut self, arm: usize, feedback: &Feedback) {
        self.inner.observe(arm, feedback);
    }
}

fn cmd_semibandit(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let spec = cfg
        .semibandit
        .as_ref()
        .ok_or_else(|| CliError::Config("semibandit needs a `semibandit` section".into()))?;
    let descriptor = spec.descriptor().map_err(CliError::Config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, 77));
    let sb: SemiBanditInstance = bwk::semibandit::make_semibandit_instance(
        spec.n_atoms,
        spec.max_set_size,
        &descriptor,
        spec.d,
        spec.b,
        spec.t,
        &mut rng,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let induced = sb.induced_instance()?;
    let shape = Environment::shape(&sb);
    let opt = lp::solve(&lp::build_primal(&induced))?.value;
    let benchmark = spec.t as f64 * opt;
    let n = spec.max_set_size as f64;
    let c_rad = bwk::confidence::c_rad(shape.k, shape.d, shape.t);

    let mut reduced_regrets = Vec::with_capacity(cfg.reps as usize);
    let mut naive_regrets = Vec::new();
    let mut reduced_wins = 0u64;
    let mut worst_margin = f64::INFINITY;
    let mut bound_holds = true;
    for rep in 0..cfg.reps {
        let seed = split_seed(cfg.seed, rep);
        let mut policy = RadiusLogging {
            inner: UcbBwk::reduced(SemiBanditRadiusProvider::new(&sb), shape),
            log: Vec::new(),
        };
        let trace = simulator::run(&sb, &mut policy, seed, TraceDetail::Summary)?;
        let reduced_regret = benchmark - trace.total_reward;
        reduced_regrets.push(reduced_regret);
        let mut running = 0.0;
        for (i, rad) in policy.log.iter().enumerate() {
            running += rad;
            let s = (i + 1) as f64;
            let bound = 3.0 * (s * n * c_rad).sqrt() + 3.0 * n * s.ln() * c_rad;
            let margin = (bound - running) / bound;
            worst_margin = worst_margin.min(margin);
            if running > bound {
                bound_holds = false;
            }
        }
        if spec.compare_naive {
            let eta = lp::compute_eta_shape(shape).value;
            let mut naive = UcbBwk::with_eta(PerArmRadiusProvider::new(shape), shape, eta)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let tn = simulator::run(&sb, &mut naive, seed, TraceDetail::Summary)?;
            let naive_regret = benchmark - tn.total_reward;
            if reduced_regret <= naive_regret {
                reduced_wins += 1;
            }
            naive_regrets.push(naive_regret);
        }
    }
    let (reduced_mean, reduced_se) = simulator::mean_stderr(&reduced_regrets);
    let naive_mean = if naive_regrets.is_empty() {
        None
    } else {
        Some(simulator::mean_stderr(&naive_regrets).0)
    };
    write_json(
        out,
        "semibandit.json",
        &json!({
            "schema_version": 1,
            "config": cfg,
            "family_size": sb.family.len(),
            "opt_lp": opt,
            "benchmark": benchmark,
            "reduced_regret_mean": reduced_mean,
            "reduced_regret_stderr": reduced_se,
            "naive_regret_mean": naive_mean,
            "reduced_wins": if spec.compare_naive { Some(reduced_wins) } else { None },
            "confidence_sum_check": {
                "bound": "3 sqrt(s n C_rad) + 3 n ln(s) C_rad over all prefixes s",
                "c_rad": c_rad,
                "holds": bound_holds,
                "worst_relative_margin": worst_margin,
            },
        }),
    )
}
