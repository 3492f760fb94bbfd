//! `portnav`: train, evaluate, sweep, replay and audit from one config file.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error
//! (bad flags, unreadable or invalid config or parameters, bad grid).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use portnav::agents::{Checkpoint, Policy, ScriptedPursuit};
use portnav::config::Config;
use portnav::env::{read_log, replay, write_log, Env, EnvConfig, LogRecord};
use portnav::plot::{scene_svg, PlotFormat};
use portnav::sweep::{default_grid, run_sweep, write_outputs, Grid, SweepParam, SweepSpec};
use portnav::trainer::{evaluate, run_episode, train_until, EvalStats};
use portnav::world::{generate, WorldScene};

/// A problem with how the tool was invoked rather than with the run itself.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(name = "portnav", version, about = "Vessel navigation simulator and learners")]
struct Cli {
    /// TOML config file; sections: env, world, sensor, vessel, agent, trainer, sweep.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config value, e.g. `--set vessel.mass=350000`. Repeatable;
    /// applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory (default: trainer.out_dir from the config).
    #[arg(long, env = "PORTNAV_OUT", global = true)]
    out: Option<PathBuf>,

    /// Log verbosity: error, warn, info, debug, trace.
    #[arg(long, default_value = "info", global = true)]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a learner; writes checkpoints, metrics.csv and eval.csv.
    Train(TrainArgs),
    /// Evaluate a checkpoint or the scripted controller.
    Evaluate(EvaluateArgs),
    /// Sweep mass or turn rate for a frozen policy.
    Sweep(SweepArgs),
    /// Re-simulate a trajectory log and verify it bit for bit.
    Replay(ReplayArgs),
    /// Print the resolved config and its hash; optionally audit generated scenes.
    Audit(AuditArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Total environment steps (trainer.total_steps).
    #[arg(long)]
    steps: Option<u64>,
    /// Rollout workers (trainer.workers).
    #[arg(long)]
    workers: Option<usize>,
    /// Master seed (trainer.seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct PolicyArgs {
    /// Learner checkpoint to evaluate.
    #[arg(long, conflicts_with = "scripted", required_unless_present = "scripted")]
    checkpoint: Option<PathBuf>,
    /// Use the scripted pursuit controller instead of a checkpoint.
    #[arg(long)]
    scripted: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    /// Number of episodes (default: trainer.eval_episodes).
    #[arg(long)]
    episodes: Option<usize>,
    /// First episode seed (default: trainer.eval_seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Write one trajectory log and scene file per episode here.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    /// Parameter to sweep: mass or turn_rate.
    #[arg(long)]
    param: String,
    /// Explicit comma-separated grid values.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["lo", "hi"])]
    grid: Vec<f64>,
    /// Lower grid end (with --hi).
    #[arg(long, requires = "hi")]
    lo: Option<f64>,
    /// Upper grid end (with --lo).
    #[arg(long, requires = "lo")]
    hi: Option<f64>,
    /// Number of grid points (default: sweep.points).
    #[arg(long)]
    points: Option<usize>,
    /// Space a --lo/--hi grid logarithmically.
    #[arg(long, requires = "lo")]
    log: bool,
    /// Episodes per grid point (default: sweep.episodes).
    #[arg(long)]
    episodes: Option<usize>,
    /// First episode seed, shared by every point (default: sweep.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Also draw mean return against the parameter: svg or png.
    #[arg(long)]
    plot: Option<String>,
    /// Output file stem (default: sweep_<param>).
    #[arg(long)]
    stem: Option<String>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Trajectory log (JSON lines) to verify.
    #[arg(long)]
    log: PathBuf,
    /// Scene file; by default the scene is regenerated from the logged seed.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Write a top-down SVG of the scene and replayed track.
    #[arg(long)]
    render: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    /// Generate this many scenes (seeds 0..N) and check their invariants.
    #[arg(long, default_value_t = 0)]
    scenes: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<portnav::Error>() {
        Some(portnav::Error::Config(_) | portnav::Error::Usage(_) | portnav::Error::InvalidParams(_)) => 2,
        _ => 1,
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(cli, a),
        Command::Evaluate(a) => cmd_evaluate(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
        Command::Replay(a) => cmd_replay(cli, a),
        Command::Audit(a) => cmd_audit(cli, a),
    }
}

/// Defaults, then the config file, then `--set` overrides, then `extra`
/// (flag-derived overrides, which take precedence over everything).
fn resolve(cli: &Cli, extra: &[String]) -> Result<Config> {
    if let Some(p) = &cli.config {
        if !p.is_file() {
            return Err(usage(format!("config file {} does not exist", p.display())));
        }
    }
    let mut overrides = cli.overrides.clone();
    overrides.extend_from_slice(extra);
    Ok(Config::load(cli.config.as_deref(), &overrides)?)
}

fn out_dir(cli: &Cli, cfg: &Config) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.trainer.out_dir))
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let mut extra = Vec::new();
    if let Some(s) = a.steps {
        extra.push(format!("trainer.total_steps={s}"));
    }
    if let Some(w) = a.workers {
        extra.push(format!("trainer.workers={w}"));
    }
    if let Some(s) = a.seed {
        extra.push(format!("trainer.seed={s}"));
    }
    let cfg = resolve(cli, &extra)?;
    let out = out_dir(cli, &cfg);

    let interrupt = Arc::new(AtomicBool::new(false));
    {
        let flag = Arc::clone(&interrupt);
        // Failing to install a handler only loses graceful shutdown.
        if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed)) {
            log::warn!("could not install interrupt handler: {e}");
        }
    }
    log::info!(
        "training {} for {} steps with {} worker(s) into {}",
        cfg.agent.algorithm,
        cfg.trainer.total_steps,
        cfg.trainer.workers,
        out.display()
    );
    let summary = train_until(&cfg, &out, &interrupt)?;
    if interrupt.load(Ordering::Relaxed) {
        log::warn!("interrupted; wrote final checkpoint at {} steps", summary.env_steps);
    }
    emit(&format!(
        "{}\n",
        serde_json::json!({
            "env_steps": summary.env_steps,
            "episodes": summary.episodes,
            "updates": summary.updates,
            "stopped_early": summary.stopped_early,
            "final_checkpoint": summary.final_checkpoint(),
            "metrics": summary.metrics_path,
        })
    ))
}

/// The policy under test plus the config to run it in. A checkpoint carries
/// its own config, used unless `--config`/`--set` say otherwise; in that case
/// the environment must still hash the same.
enum LoadedPolicy {
    Learner(Box<Checkpoint>),
    Scripted(ScriptedPursuit),
}

impl LoadedPolicy {
    fn as_policy(&self) -> &dyn Policy {
        match self {
            LoadedPolicy::Learner(ck) => &ck.agent,
            LoadedPolicy::Scripted(s) => s,
        }
    }
}

fn load_policy(cli: &Cli, p: &PolicyArgs) -> Result<(LoadedPolicy, Config)> {
    match &p.checkpoint {
        Some(path) => {
            if !path.is_file() {
                return Err(usage(format!("checkpoint {} does not exist", path.display())));
            }
            let ck = Checkpoint::load(path)?;
            let cfg = if cli.config.is_none() && cli.overrides.is_empty() {
                ck.config.clone()
            } else {
                let cfg = resolve(cli, &[])?;
                ck.check_env(&cfg.env_config())?;
                cfg
            };
            Ok((LoadedPolicy::Learner(Box::new(ck)), cfg))
        }
        None => {
            let cfg = resolve(cli, &[])?;
            let policy = ScriptedPursuit::from_env(&cfg.env_config());
            Ok((LoadedPolicy::Scripted(policy), cfg))
        }
    }
}

fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let (policy, cfg) = load_policy(cli, &a.policy)?;
    let env_cfg = cfg.env_config();
    let n = a.episodes.unwrap_or(cfg.trainer.eval_episodes);
    let seed = a.seed.unwrap_or(cfg.trainer.eval_seed);
    let stats = evaluate(policy.as_policy(), &env_cfg, n, seed, None)?;
    if let Some(dir) = &a.trace_dir {
        write_traces(policy.as_policy(), &env_cfg, n, seed, dir)?;
    }
    print_stats(&stats, policy.as_policy(), &env_cfg)
}

fn print_stats(stats: &EvalStats, policy: &dyn Policy, env_cfg: &EnvConfig) -> Result<()> {
    let mut v = serde_json::to_value(stats)?;
    v["policy"] = policy.name().into();
    v["env_hash"] = env_cfg.hash().into();
    emit(&format!("{}\n", serde_json::to_string_pretty(&v)?))
}

/// Re-runs each evaluation episode with recording on; episodes are
/// deterministic, so these are the same trajectories `evaluate` scored.
fn write_traces(policy: &dyn Policy, env_cfg: &EnvConfig, n: usize, seed: u64, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut env = Env::new(env_cfg.clone())?;
    env.set_recording(true);
    for k in 0..n as u64 {
        let s = seed + k;
        run_episode(&mut env, policy, s, None)?;
        write_log(&dir.join(format!("episode_{s}.jsonl")), &env.take_log())?;
        env.scene().save(&dir.join(format!("scene_{s}.json")))?;
    }
    log::info!("wrote {n} trajectory logs to {}", dir.display());
    Ok(())
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> Result<()> {
    let param: SweepParam = a
        .param
        .parse()
        .map_err(|_| usage(format!("unknown --param '{}'; expected mass or turn_rate", a.param)))?;
    let plot = a
        .plot
        .as_deref()
        .map(str::parse::<PlotFormat>)
        .transpose()
        .map_err(|_| usage("--plot must be svg or png"))?;
    let (policy, cfg) = load_policy(cli, &a.policy)?;
    let points = a.points.unwrap_or(cfg.sweep.points);
    let grid = if !a.grid.is_empty() {
        Grid::Explicit { values: a.grid.clone() }
    } else if let (Some(lo), Some(hi)) = (a.lo, a.hi) {
        if a.log {
            Grid::Log { lo, hi, count: points }
        } else {
            Grid::Linear { lo, hi, count: points }
        }
    } else {
        default_grid(param, points)
    };
    if let Err(e) = grid.values() {
        return Err(usage(format!("bad grid: {e}")));
    }
    let spec = SweepSpec {
        param,
        grid,
        episodes: a.episodes.unwrap_or(cfg.sweep.episodes),
        seed: a.seed.unwrap_or(cfg.sweep.seed),
    };
    let env_cfg = cfg.env_config();
    let curve = run_sweep(policy.as_policy(), &env_cfg, &spec).map_err(|e| match e {
        portnav::Error::InvalidParams(m) => usage(format!("bad grid: {m}")),
        other => other.into(),
    })?;
    let out = out_dir(cli, &cfg);
    let stem = a.stem.clone().unwrap_or_else(|| format!("sweep_{param}"));
    let files = write_outputs(&curve, &out, &stem, plot)?;
    for r in &curve.records {
        log::info!(
            "{param}={}: return {:.2} ± {:.2}, success {:.2}",
            r.value,
            r.mean_return,
            r.std_return,
            r.success_rate
        );
    }
    emit(&format!("{}\n", files.csv.display()))
}

fn cmd_replay(cli: &Cli, a: &ReplayArgs) -> Result<()> {
    if !a.log.is_file() {
        return Err(usage(format!("log {} does not exist", a.log.display())));
    }
    let cfg = resolve(cli, &[])?;
    let env_cfg = cfg.env_config();
    let records = read_log(&a.log)?;
    let scene = a.scene.as_deref().map(WorldScene::load).transpose()?;
    let report = replay(&env_cfg, scene.clone(), &records)?;
    emit(&format!(
        "ok: episode {} replayed {} steps bit-exactly\n",
        report.episode, report.steps
    ))?;
    if let Some(path) = &a.render {
        let scene = match scene {
            Some(s) => s,
            None => {
                let seed = records
                    .iter()
                    .find_map(|r| match r {
                        LogRecord::Header { seed, .. } => Some(*seed),
                        _ => None,
                    })
                    .context("log has no header")?;
                let mut env = Env::new(env_cfg)?;
                env.reset(seed)?;
                env.scene().clone()
            }
        };
        std::fs::write(path, scene_svg(&scene, &report.poses))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_audit(cli: &Cli, a: &AuditArgs) -> Result<()> {
    let cfg = resolve(cli, &[])?;
    emit(&format!(
        "# config hash: {}\n# environment hash: {}\n{}",
        cfg.hash(),
        cfg.env_config().hash(),
        cfg.to_toml()
    ))?;
    if a.scenes == 0 {
        return Ok(());
    }
    let ego = cfg.env.ego_radius;
    let mut problems = Vec::new();
    let (mut statics, mut movers) = (0usize, 0usize);
    for seed in 0..a.scenes {
        let scene = match generate(seed, &cfg.world) {
            Ok(s) => s,
            Err(e) => {
                problems.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        statics += scene.static_obstacles.len();
        movers += scene.dynamic_obstacles.len();
        if scene.check_collision(&scene.spawn_pose, ego) {
            problems.push(format!("seed {seed}: spawn is in collision"));
        }
        if scene.check_goal(&scene.spawn_pose) {
            problems.push(format!("seed {seed}: spawn already inside the goal"));
        }
        if !scene.basin.contains(scene.goal.center) {
            problems.push(format!("seed {seed}: goal centre outside the basin"));
        }
    }
    let mut text = format!(
        "# audited {} scenes: {} static / {} moving obstacles, {} problem(s)\n",
        a.scenes,
        statics,
        movers,
        problems.len()
    );
    for p in &problems {
        text.push_str(&format!("#   {p}\n"));
    }
    emit(&text)?;
    if problems.is_empty() {
        Ok(())
    } else {
        anyhow::bail!("{} scene(s) failed the audit", problems.len())
    }
}
