use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use power_uct::harness::{
    run_experiment, write_records, write_summaries, ExperimentConfig, ExperimentKind,
    ExperimentOutput, Settings,
};
use power_uct::schedule::{derive_schedule, validate_schedule, BonusSchedule, Derivation};
use power_uct::Error;

/// Power-mean Monte-Carlo tree search experiments.
#[derive(Parser, Debug)]
#[command(name = "power-uct", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Root-value error curves on synthetic trees.
    Synthetic(RunArgs),
    /// Discounted return of greedy replanning on FrozenLake or Taxi.
    Control(RunArgs),
    /// Concentration frequencies of the bandit or Lemma probe.
    Probe(RunArgs),
    /// Grid search over the exploration constant.
    Grid(RunArgs),
    /// Derive (or validate) an adaptive bonus schedule and print it.
    Schedule(ScheduleArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// File of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Synthetic trials, control evaluation runs or probe replications.
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated simulation budgets.
    #[arg(long)]
    sims: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "C")]
    c: Option<f64>,
    /// fixed, adaptive or log.
    #[arg(long)]
    bonus: Option<String>,
    /// synthetic, frozenlake4, frozenlake8 or taxi.
    #[arg(long)]
    env: Option<String>,
    /// Comma-separated algorithms, e.g. `uct@1.25,spuct:2@1.0`.
    #[arg(long)]
    algos: Option<String>,
    /// Planning depth on grid worlds.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long = "beta-h")]
    beta_h: Option<f64>,
    /// Record CSV path; summaries go next to it as `<stem>.summary.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Any other setting as KEY=VALUE (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 2)]
    horizon: usize,
    #[arg(long = "beta-h", default_value_t = 120.0)]
    beta_h: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    /// Validate this schedule file instead of deriving one.
    #[arg(long)]
    validate: Option<PathBuf>,
}

impl RunArgs {
    fn settings(&self) -> Result<Settings, Error> {
        let mut settings = match &self.config {
            Some(path) => Settings::parse(&fs::read_to_string(path)?)?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        let mut put = |k: &str, v: Option<String>| match v {
            Some(v) => flags.set(k, v),
            None => Ok(()),
        };
        put("seed", self.seed.map(|x| x.to_string()))?;
        put("trials", self.trials.map(|x| x.to_string()))?;
        put("sims", self.sims.clone())?;
        put("p", self.p.map(|x| x.to_string()))?;
        put("C", self.c.map(|x| x.to_string()))?;
        put("bonus", self.bonus.clone())?;
        put("env", self.env.clone())?;
        put("algos", self.algos.clone())?;
        put("horizon", self.horizon.map(|x| x.to_string()))?;
        put("beta_h", self.beta_h.map(|x| x.to_string()))?;
        put("out", self.out.as_ref().map(|x| x.display().to_string()))?;
        put("workers", self.workers.map(|x| x.to_string()))?;
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            flags.set(k.trim(), v.trim())?;
        }
        settings.merge(&flags);
        Ok(settings)
    }
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn emit(cfg: &ExperimentConfig, output: &ExperimentOutput) -> Result<(), Error> {
    match &cfg.out {
        Some(path) => {
            write_records(fs::File::create(path)?, &output.records)?;
            if !output.summaries.is_empty() {
                write_summaries(fs::File::create(summary_path(path))?, &output.summaries)?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_records(&mut lock, &output.records)?;
            lock.flush()?;
        }
    }
    for w in &output.winners {
        eprintln!("best C for {}:{}: {}", w.name(), w.p, w.c);
    }
    Ok(())
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<ExitCode, Error> {
    let settings = args.settings()?;
    let cfg = ExperimentConfig::from_settings(kind, &settings)?;
    let output = run_experiment(&cfg)?;
    emit(&cfg, &output)?;
    let adaptive_requested = settings.get("bonus").is_some_and(|b| b == "adaptive");
    if adaptive_requested && !output.skipped.is_empty() {
        for (spec, why) in &output.skipped {
            eprintln!("infeasible schedule for {spec}: {why}");
        }
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn schedule(args: &ScheduleArgs) -> Result<ExitCode, Error> {
    let s = match &args.validate {
        Some(path) => {
            BonusSchedule::adaptive_from_text(&fs::read_to_string(path)?, args.c, args.p)?
        }
        None => match derive_schedule(args.horizon, args.beta_h, args.p, args.c)? {
            Derivation::Feasible(s) => s,
            Derivation::Infeasible { violation, partial } => {
                eprintln!("infeasible: {violation}");
                for (i, k) in partial.iter().enumerate() {
                    if let Some(k) = k {
                        eprintln!("{i} {} {} {}", k.alpha, k.beta, k.b);
                    }
                }
                return Ok(ExitCode::from(2));
            }
        },
    };
    print!("{}", s.to_text());
    let violations = validate_schedule(&s);
    if violations.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for v in &violations {
        eprintln!("violation: {v}");
    }
    Ok(ExitCode::from(2))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Synthetic(a) => run(ExperimentKind::SyntheticConvergence, a),
        Command::Control(a) => run(ExperimentKind::ControlEvaluation, a),
        Command::Probe(a) => run(ExperimentKind::ConcentrationProbe, a),
        Command::Grid(a) => run(ExperimentKind::GridSearch, a),
        Command::Schedule(a) => schedule(a),
    };
    match result {
        Ok(code) => code,
        Err(Error::Infeasible(why)) => {
            eprintln!("error: infeasible schedule: {why}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
