use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use regbandit::algorithms::{run_algorithm, Algorithm, OfflineData, DEFAULT_DELTA};
use regbandit::evaluation::suboptimality;
use regbandit::harness::verify::{verify, Suite};
use regbandit::harness::{
    default_n_grid, fit_points, read_sweep_csv, summarize, write_d2_csv, write_sweep_csv, InstanceSource, Statistic,
    SweepConfig,
};
use regbandit::instances::{
    chi2_hard_family, dueling_hard_family, kl_hard_family, random_class, random_instance, sample_bandit_data,
    sample_preference_data, DuelingKind, ScenarioSpec,
};
use regbandit::io as store;
use regbandit::uncertainty::Variant;
use regbandit::{Regularizer, RngSeed};
use serde_json::json;

#[derive(Parser)]
#[command(name = "regbandit", version, about = "Offline regularized policy learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance (and optionally its class) as JSON, or a hard family as a directory.
    GenInstance {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Draw an offline dataset from an instance as CSV.
    Sample(SampleArgs),
    /// Run one learner on one dataset and print the policy with diagnostics.
    Run(RunArgs),
    /// Monte-Carlo sweep over sample sizes and seeds, written as CSV.
    Sweep(SweepArgs),
    /// Fit the log-log suboptimality slope of a sweep CSV.
    RateFit(RateFitArgs),
    /// Run invariant suites; optionally print an instance's D² table.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioName {
    Ladder,
    SkewedLadder,
    DuelingLadder,
    Undercovered,
}

impl ScenarioName {
    fn spec(self, n_target: usize) -> ScenarioSpec {
        match self {
            Self::Ladder => ScenarioSpec::Ladder,
            Self::SkewedLadder => ScenarioSpec::SkewedLadder,
            Self::DuelingLadder => ScenarioSpec::DuelingLadder,
            Self::Undercovered => ScenarioSpec::Undercovered { n_target },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyName {
    Kl,
    Chi2,
    KlDueling,
    Chi2Dueling,
}

#[derive(Subcommand)]
enum GenKind {
    /// Random rewards with a reference policy of adjustable skew.
    Random {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        ref_skew: f64,
        /// Also write a realizable random class of this size.
        #[arg(long)]
        class_size: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        class_out: Option<PathBuf>,
    },
    /// One of the built-in benchmark scenarios.
    Scenario {
        #[arg(long, value_enum)]
        name: ScenarioName,
        #[arg(long, default_value_t = 4096)]
        n_target: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        class_out: Option<PathBuf>,
    },
    /// A lower-bound family written as a directory with `family.json`.
    Family {
        #[arg(long, value_enum)]
        kind: FamilyName,
        #[arg(long)]
        states: usize,
        #[arg(long, default_value_t = 4.0)]
        c_star: f64,
        #[arg(long, default_value_t = 8.0)]
        eta: f64,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        n_target: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bradley–Terry preference labels instead of rewards.
    #[arg(long)]
    preferences: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    class: PathBuf,
    /// Reward CSV (`s,a,r`) or, for dueling learners, preference CSV (`s,a1,a2,y`).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    algo: Algorithm,
    #[arg(long)]
    eta: f64,
    /// χ² modulus for f learners.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with_all = ["instance", "class"])]
    scenario: Option<ScenarioName>,
    #[arg(long, default_value_t = 4096)]
    n_target: usize,
    #[arg(long, requires = "class")]
    instance: Option<PathBuf>,
    #[arg(long, requires = "instance")]
    class: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    record_runtime: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RateFitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "median")]
    statistic: Statistic,
    /// Only rows of this learner.
    #[arg(long)]
    algo: Option<Algorithm>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the D² table of this instance (requires --class) as CSV.
    #[arg(long, requires = "class")]
    instance: Option<PathBuf>,
    #[arg(long, requires = "instance")]
    class: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    #[arg(long)]
    dueling_bonus: bool,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn gen_instance(kind: GenKind) -> Result<()> {
    match kind {
        GenKind::Random { states, actions, seed, ref_skew, class_size, radius, out, class_out } => {
            let inst = random_instance(states, actions, RngSeed(seed), ref_skew)?;
            emit_json(out.as_deref(), &inst)?;
            if let Some(size) = class_size {
                let class = random_class(&inst.mean_reward, size, radius, &mut RngSeed(seed).stream(1))?;
                let Some(path) = class_out else { bail!("--class-size needs --class-out") };
                store::write_json(&path, &class)?;
            }
        }
        GenKind::Scenario { name, n_target, out, class_out } => {
            let sc = name.spec(n_target).build()?;
            emit_json(out.as_deref(), &sc.instance)?;
            if let Some(path) = class_out {
                store::write_json(&path, &sc.class)?;
            }
        }
        GenKind::Family { kind, states, c_star, eta, alpha, n_target, out } => {
            let family = match kind {
                FamilyName::Kl => kl_hard_family(states, c_star, eta, n_target)?,
                FamilyName::Chi2 => {
                    let Some(alpha) = alpha else { bail!("the chi2 family needs --alpha") };
                    chi2_hard_family(states, alpha, eta, n_target)?
                }
                FamilyName::KlDueling => dueling_hard_family(states, c_star, eta, n_target, DuelingKind::Kl, alpha)?,
                FamilyName::Chi2Dueling => dueling_hard_family(states, c_star, eta, n_target, DuelingKind::Chi2, alpha)?,
            };
            store::write_family(&out, &family)?;
            eprintln!("wrote {} instances to {}", family.len(), out.display());
        }
    }
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    let inst = store::read_instance(&args.instance)?;
    let w = output(args.out.as_deref())?;
    if args.preferences {
        store::write_preference_csv(w, &sample_preference_data(&inst, args.n, RngSeed(args.seed))?)?;
    } else {
        store::write_bandit_csv(w, &sample_bandit_data(&inst, args.n, RngSeed(args.seed))?)?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let inst = store::read_instance(&args.instance)?;
    let class = store::read_class(&args.class)?;
    class.validate_against(&inst)?;
    let file = BufReader::new(File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?);
    let data = if args.algo.is_dueling() {
        OfflineData::Preferences(store::read_preference_csv(file)?)
    } else {
        OfflineData::Rewards(store::read_bandit_csv(file)?)
    };
    let reg = if args.algo.uses_f_divergence() {
        Regularizer::chi_squared(args.eta, args.alpha)
    } else {
        Regularizer::kl(args.eta)
    };
    reg.validate()?;
    let out = run_algorithm(args.algo, &class, &data, &inst.reference_policy(), &inst.context_dist, &reg, args.delta)?;
    let subopt = suboptimality(&inst, &reg, &out.policy)?;
    emit_json(
        None,
        &json!({
            "algo": args.algo,
            "n": data.len(),
            "subopt": subopt,
            "policy": out.policy,
            "diagnostics": out.diagnostics,
        }),
    )
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => store::read_json::<SweepConfig>(path)?,
        None => {
            let (Some(algo), Some(eta)) = (args.algo, args.eta) else {
                bail!("without --config, --algo and --eta are required");
            };
            let source = match (&args.scenario, &args.instance, &args.class) {
                (Some(name), _, _) => InstanceSource::Scenario(name.spec(args.n_target)),
                (None, Some(instance), Some(class)) => InstanceSource::Files { instance: instance.clone(), class: class.clone() },
                _ => bail!("without --config, give --scenario or --instance with --class"),
            };
            SweepConfig::new(source, algo, eta)
        }
    };
    if args.config.is_some() {
        if let Some(name) = args.scenario {
            cfg.source = InstanceSource::Scenario(name.spec(args.n_target));
        }
        if let (Some(instance), Some(class)) = (&args.instance, &args.class) {
            cfg.source = InstanceSource::Files { instance: instance.clone(), class: class.clone() };
        }
        cfg.algo = args.algo.unwrap_or(cfg.algo);
        cfg.eta = args.eta.unwrap_or(cfg.eta);
    }
    cfg.alpha = args.alpha.or(cfg.alpha);
    cfg.n_grid = args.n_grid.unwrap_or(cfg.n_grid);
    cfg.seeds = args.seeds.unwrap_or(cfg.seeds);
    cfg.delta = args.delta.unwrap_or(cfg.delta);
    cfg.base_seed = args.base_seed.unwrap_or(cfg.base_seed);
    cfg.workers = args.workers.or(cfg.workers);
    cfg.record_runtime |= args.record_runtime;
    cfg.out = args.out.or(cfg.out);
    if cfg.n_grid.is_empty() {
        cfg.n_grid = default_n_grid();
    }

    let rows = write_sweep_csv(&cfg, output(cfg.out.as_deref())?)?;
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see the status column", rows.len());
    }
    match fit_points(&summarize(&rows, Statistic::Median)) {
        Ok(fit) => eprintln!("median slope {:.4} (r2 {:.4})", fit.slope, fit.r2),
        Err(e) => eprintln!("no rate fit: {e}"),
    }
    Ok(())
}

fn rate_fit(args: RateFitArgs) -> Result<()> {
    let file = File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let mut rows = read_sweep_csv(BufReader::new(file))?;
    if let Some(algo) = args.algo {
        rows.retain(|r| r.algo == algo);
    }
    let points = summarize(&rows, args.statistic);
    let fit = fit_points(&points)?;
    emit_json(
        None,
        &json!({
            "statistic": args.statistic,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r2": fit.r2,
            "points": points,
        }),
    )
}

fn verify_cmd(args: VerifyArgs) -> Result<bool> {
    if let (Some(instance), Some(class)) = (&args.instance, &args.class) {
        let inst = store::read_instance(instance)?;
        let class = store::read_class(class)?;
        let variant = if args.dueling_bonus { Variant::Dueling } else { Variant::Bandit };
        let mut w = BufWriter::new(io::stdout().lock());
        write_d2_csv(&mut w, &class, &inst, args.n, args.delta, variant)?;
        w.flush()?;
    }
    let report = verify(args.suite, RngSeed(args.seed));
    for c in &report.checks {
        eprintln!("{} {}/{}: measured {} (threshold {})", if c.passed { "PASS" } else { "FAIL" }, c.suite, c.name, c.measured, c.threshold);
    }
    if args.out.is_some() || args.instance.is_none() {
        emit_json(args.out.as_deref(), &report)?;
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenInstance { kind } => gen_instance(kind).map(|()| true),
        Command::Sample(args) => sample(args).map(|()| true),
        Command::Run(args) => run(args).map(|()| true),
        Command::Sweep(args) => sweep(args).map(|()| true),
        Command::RateFit(args) => rate_fit(args).map(|()| true),
        Command::Verify(args) => verify_cmd(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
