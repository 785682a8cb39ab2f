use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use exchwalk_core::experiments::config::{env_seed, Overrides};
use exchwalk_core::experiments::output::write_atomic;
use exchwalk_core::experiments::renorm::{phi_of, zk_inequality, LawSide};
use exchwalk_core::experiments::{self, build_dominating_law, build_schedule, zk_law, ExperimentConfig, ExperimentKind};
use exchwalk_core::heat_kernel::{claim_checks, KernelTable};
use exchwalk_core::stats::derive_seed;
use exchwalk_core::walker::{run_annealed, run_annealed_revealed, run_infinite_gamma, ProjectionFrame, WalkSeeds};
use exchwalk_core::{Error, ErrorClass, MuSpec, Result};

/// Random walk on the interchange process: simulation, heat-kernel tables
/// and experiments.
#[derive(Debug, Parser)]
#[command(name = "exchwalk", version)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (overrides the config file).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample one annealed walk path.
    Simulate(SimulateArgs),
    /// Tabulate the heat kernel of the walk with rate gamma per edge.
    Kernel(KernelArgs),
    /// Run an experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Build the multiscale time schedule and the dominating laws.
    Schedule(ScheduleArgs),
    /// Parse, resolve and echo a config without running it.
    ValidateConfig(ConfigArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Engine {
    Revealed,
    Window,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Law of the transition vectors (JSON).
    #[arg(long)]
    mu: PathBuf,
    /// Swap rate per edge, or `inf` for the i.i.d. baseline.
    #[arg(long)]
    gamma: String,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value = "revealed")]
    engine: Engine,
    #[arg(long)]
    seed: Option<u64>,
    /// Replica index under the master seed.
    #[arg(long, default_value_t = 0)]
    replica: u64,
    /// Projection direction, comma separated; defaults to the annealed drift.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    direction: Option<Vec<f64>>,
    #[arg(long, default_value_t = exchwalk_core::walker::DEFAULT_DELTA_TRUNC)]
    delta_trunc: f64,
}

#[derive(Debug, Args)]
struct KernelArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    t: f64,
    /// CSV destination for the table over the truncation cube.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Also run the monotonicity and crown-ordering checks up to this norm.
    #[arg(long)]
    check_radius: Option<u32>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    kind: String,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    /// Base time `T`.
    #[arg(long)]
    base: u64,
    /// Target time `t >= T`.
    #[arg(long)]
    target: u64,
    #[arg(long)]
    epsilon: f64,
    /// Projected annealed drift `v`; taken from `--mu` when omitted.
    #[arg(long)]
    v: Option<f64>,
    /// Law used for the dominating laws.
    #[arg(long)]
    mu: Option<PathBuf>,
    #[arg(long)]
    delta: Option<f64>,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Schema => 2,
        ErrorClass::Precondition => 3,
        ErrorClass::Resource => 4,
    }
}

fn class_name(class: ErrorClass) -> &'static str {
    match class {
        ErrorClass::Schema => "schema",
        ErrorClass::Precondition => "precondition",
        ErrorClass::Resource => "resource",
    }
}

fn print_json(v: &Value) {
    let text = serde_json::to_string_pretty(v).expect("json value");
    // a closed pipe on stdout is not an error of the run
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn read_mu(path: &Path) -> Result<MuSpec> {
    MuSpec::from_json(&fs::read_to_string(path)?)
}

fn load_config(args: &ConfigArgs, workers: Option<usize>) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&args.config)?;
    let flags = Overrides {
        seed: args.seed,
        workers,
        replicas: args.replicas,
    };
    ExperimentConfig::from_json(&text)?.resolve(&flags, env_seed().as_deref())
}

/// Writes into a fresh directory by staging next to it and renaming, or
/// file by file (each atomically) when the directory already exists.
fn write_outputs<F>(dir: &Path, write: F) -> Result<Vec<PathBuf>>
where
    F: Fn(&Path) -> Result<Vec<PathBuf>>,
{
    if dir.exists() {
        return write(dir);
    }
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let staging = parent.join(format!(".{name}.staging-{}", std::process::id()));
    let result = (|| {
        fs::create_dir_all(&staging)?;
        let files = write(&staging)?;
        fs::rename(&staging, dir)?;
        Ok(files
            .iter()
            .map(|f| dir.join(f.file_name().expect("file name")))
            .collect())
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<Value> {
    let spec = read_mu(&args.mu)?;
    let mu = spec.distribution()?;
    let d = mu.dim();
    let seed = match (args.seed, env_seed()) {
        (Some(s), _) => s,
        (None, Some(text)) => text
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("EXCHWALK_SEED={text:?} is not an unsigned integer")))?,
        (None, None) => 0,
    };
    let drift = experiments::drift_from_slot_means(d, &mu.mean_vector());
    let frame = match &args.direction {
        Some(dir) => Some(ProjectionFrame::new(dir, &drift)?),
        None => ProjectionFrame::along_drift(&drift).ok(),
    };
    let sample = if args.gamma.trim().eq_ignore_ascii_case("inf") {
        run_infinite_gamma(&mu, args.steps, derive_seed(seed, &[args.replica, 2]))
    } else {
        let gamma: f64 = args
            .gamma
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("gamma `{}` is neither a number nor `inf`", args.gamma)))?;
        let seeds = WalkSeeds::for_replica(seed, args.replica);
        match args.engine {
            Engine::Revealed => run_annealed_revealed(&mu, gamma, args.steps, seeds)?,
            Engine::Window => run_annealed(&mu, gamma, args.steps, seeds, args.delta_trunc)?,
        }
    };
    let files = write_outputs(&cli.out, |dir| {
        let path = dir.join("walk.csv");
        let mut buf = Vec::new();
        sample.write_csv(&mut buf, frame.as_ref())?;
        write_atomic(&path, &buf)?;
        Ok(vec![path])
    })?;
    Ok(json!({
        "command": "simulate",
        "seed": seed,
        "replica": args.replica,
        "seeds": sample.seeds,
        "gamma": args.gamma,
        "steps": args.steps,
        "final_position": sample.final_position(),
        "velocity": sample.velocity(),
        "annealed_drift": drift,
        "projected_velocity": frame.as_ref().map(|f| f.project_point(sample.final_position()) / args.steps.max(1) as f64),
        "files": files,
    }))
}

fn kernel(args: &KernelArgs) -> Result<Value> {
    let table = KernelTable::new(args.d, args.gamma, args.t)?;
    let origin = vec![0i64; args.d];
    if let Some(path) = &args.table {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        write_atomic(path, &buf)?;
    }
    let checks = match args.check_radius {
        Some(r) => Some(claim_checks(&[args.d], &[args.gamma * args.t], &[0, 2, 5], r, 1e-12)?),
        None => None,
    };
    Ok(json!({
        "command": "kernel",
        "d": args.d,
        "gamma": args.gamma,
        "t": args.t,
        "r_trunc": table.r_trunc(),
        "axis_tail": table.axis_tail(),
        "mass_deficit": table.mass_deficit(),
        "value_at_origin": table.value(&origin),
        "table": args.table,
        "checks": checks,
    }))
}

fn experiment(cli: &Cli, args: &ExperimentArgs) -> Result<Value> {
    let kind = ExperimentKind::parse(&args.kind)?;
    let cfg = load_config(&args.config, cli.workers)?;
    if cfg.kind != kind {
        return Err(Error::InvalidInput(format!(
            "config describes a `{}` experiment, not `{}`",
            cfg.kind.name(),
            kind.name()
        )));
    }
    eprintln!("exchwalk: running {} with {} replicas, seed {}", kind.name(), cfg.replicas, cfg.seed);
    let result = experiments::run(&cfg)?;
    eprintln!("exchwalk: finished in {:.1}s", result.wall_clock.as_secs_f64());
    let files = write_outputs(&cli.out, |dir| result.write_to(dir))?;
    Ok(json!({
        "command": "experiment",
        "experiment": kind.name(),
        "config": cfg,
        "summary": result.summary,
        "files": files,
    }))
}

fn schedule(cli: &Cli, args: &ScheduleArgs) -> Result<Value> {
    let mu = args.mu.as_deref().map(read_mu).transpose()?;
    let drift_frame = match &mu {
        Some(spec) => {
            let law = spec.distribution()?;
            let drift = experiments::drift_from_slot_means(law.dim(), &law.mean_vector());
            Some((spec.clone(), law, ProjectionFrame::along_drift(&drift)?))
        }
        None => None,
    };
    let v = match (args.v, &drift_frame) {
        (Some(v), _) => v,
        (None, Some((_, _, frame))) => frame.v,
        (None, None) => return Err(Error::InvalidInput("give --v or --mu".into())),
    };
    let sched = build_schedule(args.base, args.target, args.epsilon, v)?;
    let blocks: Vec<Value> = sched
        .times
        .iter()
        .enumerate()
        .filter_map(|(n, &t_n)| {
            let t = t_n as f64;
            let c_next = *sched.c.get(n + 1)?;
            let ct_next = *sched.c_tilde.get(n + 1)?;
            let lower = zk_law(t, sched.c[n], phi_of(t), LawSide::Lower).ok()?;
            let upper = zk_law(t, sched.c_tilde[n], phi_of(t), LawSide::Upper).ok()?;
            Some(json!({
                "n": n,
                "t_n": t_n,
                "lower": lower,
                "lower_inequality": zk_inequality(&lower, c_next),
                "upper": upper,
                "upper_mean_gap": ct_next * t - upper.mean,
            }))
        })
        .collect();
    let laws = match (&drift_frame, args.delta) {
        (Some((spec, law, frame)), Some(delta)) => Some(json!({
            "lower": build_dominating_law(law, spec.resolution, frame, delta, LawSide::Lower)?,
            "upper": build_dominating_law(law, spec.resolution, frame, delta, LawSide::Upper)?,
        })),
        _ => None,
    };
    let out = json!({
        "command": "schedule",
        "schedule": sched,
        "limits": sched.limits(),
        "blocks": blocks,
        "dominating_laws": laws,
    });
    let text = serde_json::to_string_pretty(&out)? + "\n";
    let files = write_outputs(&cli.out, |dir| {
        let path = dir.join("schedule.json");
        write_atomic(&path, text.as_bytes())?;
        Ok(vec![path])
    })?;
    let mut out = out;
    out["files"] = json!(files);
    Ok(out)
}

fn validate_config(cli: &Cli, args: &ConfigArgs) -> Result<Value> {
    let cfg = load_config(args, cli.workers)?;
    let text = cfg.to_json_pretty()? + "\n";
    let files = write_outputs(&cli.out, |dir| {
        let path = dir.join("config.json");
        write_atomic(&path, text.as_bytes())?;
        Ok(vec![path])
    })?;
    Ok(json!({
        "command": "validate-config",
        "valid": true,
        "config": cfg,
        "files": files,
    }))
}

fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Kernel(a) => kernel(a),
        Command::Experiment(a) => experiment(cli, a),
        Command::Schedule(a) => schedule(cli, a),
        Command::ValidateConfig(a) => validate_config(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            print_json(&summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let class = e.class();
            let code = exit_code(class);
            print_json(&json!({
                "error": class_name(class),
                "message": e.to_string(),
                "exit_code": code,
            }));
            eprintln!("exchwalk: {e}");
            ExitCode::from(code)
        }
    }
}
