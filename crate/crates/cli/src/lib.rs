//! Command-line front end: argument parsing, config layering, run
//! directories and the subcommands behind the `galois` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod runs;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use galois_core::dsl::{extract, Provenance};
use galois_core::gridworld::Task;
use galois_core::grounding::Mode;
use galois_core::trainer::restore_checkpoint;

use commands::{Artifact, TrainOutput, Variant};
use config::{parse_seeds, parse_sizes, parse_value, resolve, ConfigSources, Preset, ResolvedConfig};
use error::CliError;
use runs::{output_root, Run};

#[derive(Debug, Parser)]
#[command(name = "galois", version, about = "Train, inspect and reuse programmatic gridworld policies")]
pub struct Cli {
    /// Root for run directories [env: GALOIS_RUN_DIR, default: ./runs]
    #[arg(long, global = true)]
    pub out_root: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train hole weights on a task
    Train(TrainArgs),
    /// Evaluate a checkpoint or program across grid sizes
    Eval(EvalArgs),
    /// Extract a clause program from a checkpoint
    Extract(ExtractArgs),
    /// Warm-start training on a new task from a checkpoint
    Reuse(ReuseArgs),
    /// Execute a clause program and record traces
    Run(RunArgs),
    /// Print an environment layout
    Render(RenderArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct TrainOpts {
    /// TOML config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base settings [default: desk]
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub size: Option<usize>,
    /// Single seed
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Seed list: a..b (inclusive) or a,b,c
    #[arg(long)]
    pub seeds: Option<String>,
    /// Training episode budget
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Stop once evaluation reaches this normalized return
    #[arg(long)]
    pub target: Option<f64>,
    /// Override any config key, e.g. --set entropy.every=25
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Output directory (default: a fresh directory under the root)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seeds trained in parallel
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Weight threshold for the program written at the end
    #[arg(long, default_value_t = galois_core::dsl::DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub task: Option<Task>,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true))]
pub struct EvalArgs {
    #[arg(long, group = "source")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, group = "source")]
    pub program: Option<PathBuf>,
    /// Defaults to the artifact's own task
    #[arg(long)]
    pub task: Option<Task>,
    /// Size list: a..b (step 2) or a,b,c [default: the task's sweep]
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long, value_enum, default_value = "train")]
    pub variant: Variant,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub seed_base: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = galois_core::dsl::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReuseArgs {
    /// Source checkpoint
    #[arg(long)]
    pub from: PathBuf,
    /// Target task
    #[arg(long)]
    pub to: Task,
    /// Holes to copy: all, or a list such as where,what
    #[arg(long, default_value = "all")]
    pub holes: String,
    /// Clause or head to drop before copying, e.g. where:gt_key, or a whole clause
    #[arg(long = "remove", value_name = "SELECTOR")]
    pub removals: Vec<String>,
    /// Also train the same seeds from scratch for comparison
    #[arg(long)]
    pub compare_scratch: bool,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub program: PathBuf,
    /// Defaults to the program's task
    #[arg(long)]
    pub task: Option<Task>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub episodes: usize,
    /// Print every frame of the first episode
    #[arg(long)]
    pub render: bool,
    #[arg(long, default_value = "argmax")]
    pub mode: Mode,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub task: Task,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub legend: bool,
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    let root = output_root(cli.out_root.as_deref());
    match cli.command {
        Command::Train(a) => train(&root, a, argv),
        Command::Eval(a) => eval(&root, a, argv),
        Command::Extract(a) => extract_cmd(&root, a, argv),
        Command::Reuse(a) => reuse(&root, a, argv),
        Command::Run(a) => run_cmd(&root, a, argv),
        Command::Render(a) => {
            let size = a.size.unwrap_or_else(|| commands::default_size(a.task));
            print!("{}", commands::render_layout(a.task, size, a.seed, a.legend)?);
            Ok(())
        }
    }
}

fn check_threshold(t: f64) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(CliError::Usage(format!("threshold {t} is outside [0, 1]")));
    }
    Ok(())
}

fn resolve_opts(task: Option<Task>, opts: &TrainOpts) -> Result<(ResolvedConfig, Vec<u64>), CliError> {
    let mut flags = Vec::new();
    if let Some(t) = task {
        flags.push(("task".into(), toml::Value::String(t.name().into())));
    }
    let int = |x: u64| parse_value(&x.to_string());
    if let Some(s) = opts.size {
        flags.push(("size".into(), int(s as u64)));
    }
    if let Some(s) = opts.seed {
        flags.push(("seed".into(), int(s)));
    }
    if let Some(e) = opts.episodes {
        flags.push(("max_episodes".into(), int(e as u64)));
    }
    if let Some(t) = opts.target {
        flags.push(("target_return".into(), toml::Value::Float(t)));
    }
    let resolved = resolve(&ConfigSources {
        preset: opts.preset,
        file: opts.config.as_deref(),
        flags,
        sets: &opts.sets,
    })?;
    let seeds = match &opts.seeds {
        Some(s) => parse_seeds(s)?,
        None => vec![resolved.train.seed],
    };
    Ok((resolved, seeds))
}

fn plan_seeds(
    resolved: &ResolvedConfig,
    seeds: &[u64],
    base: &Path,
    opts: &TrainOpts,
    argv: &[String],
) -> Vec<(ResolvedConfig, TrainOutput)> {
    commands::seed_dirs(base, seeds)
        .into_iter()
        .zip(seeds)
        .map(|(dir, &seed)| {
            let mut r = resolved.clone();
            r.train.seed = seed;
            (
                r,
                TrainOutput {
                    dir,
                    argv: argv.to_vec(),
                    threshold: opts.threshold,
                },
            )
        })
        .collect()
}

fn report(results: Vec<Result<commands::TrainOutcome, CliError>>) -> Result<(), CliError> {
    let mut first_err = None;
    for r in results {
        match r {
            Ok(o) => println!("{}", commands::describe(&o)),
            Err(e) => {
                eprintln!("error: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn train(root: &Path, a: TrainArgs, argv: &[String]) -> Result<(), CliError> {
    check_threshold(a.opts.threshold)?;
    let (resolved, seeds) = resolve_opts(a.task, &a.opts)?;
    if !resolved.task_given {
        return Err(CliError::Usage("no task given (use --task or set it in the config)".into()));
    }
    let name = format!("train-{}", resolved.train.task.name());
    let base = commands::base_dir(a.opts.out.as_deref(), root, &name)?;
    let work = plan_seeds(&resolved, &seeds, &base, &a.opts, argv)
        .into_iter()
        .map(|(c, o)| (c, o, None))
        .collect();
    report(commands::train_many(a.opts.jobs, work))
}

fn reuse(root: &Path, a: ReuseArgs, argv: &[String]) -> Result<(), CliError> {
    check_threshold(a.opts.threshold)?;
    let holes = commands::parse_holes(&a.holes)?;
    let (resolved, seeds) = resolve_opts(Some(a.to), &a.opts)?;
    let name = format!("reuse-{}", a.to.name());
    let base = commands::base_dir(a.opts.out.as_deref(), root, &name)?;
    let mut work: Vec<commands::TrainJob> = Vec::new();
    for (c, o) in plan_seeds(&resolved, &seeds, &base.join("warm"), &a.opts, argv) {
        let p = commands::reuse_params(&a.from, &c.train, holes.clone(), &a.removals)?;
        work.push((c, o, Some(p)));
    }
    if a.compare_scratch {
        for (c, o) in plan_seeds(&resolved, &seeds, &base.join("scratch"), &a.opts, argv) {
            work.push((c, o, None));
        }
    }
    report(commands::train_many(a.opts.jobs, work))
}

fn eval(root: &Path, a: EvalArgs, argv: &[String]) -> Result<(), CliError> {
    let artifact = match (&a.checkpoint, &a.program) {
        (Some(c), _) => Artifact::load_checkpoint(c)?,
        (_, Some(p)) => Artifact::load_program(p)?,
        _ => unreachable!("clap requires one source"),
    };
    let task = a.task.unwrap_or_else(|| artifact.task());
    let sizes = match &a.sizes {
        Some(s) => parse_sizes(s)?,
        None => task.sweep_sizes(),
    };
    let rows = commands::eval_rows(&artifact, task, a.variant, &sizes, a.episodes, a.seed_base)?;
    print!("{}", commands::format_table(&rows));
    let dir = commands::base_dir(a.out.as_deref(), root, &format!("eval-{}", task.name()))?;
    let config = serde_json::json!({
        "checkpoint": a.checkpoint,
        "program": a.program,
        "task": task,
        "variant": a.variant,
        "sizes": sizes,
        "episodes": a.episodes,
        "seed_base": a.seed_base,
    });
    let mut run = Run::start(dir, "eval", argv, None, config)?;
    let r = (|| -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(run.path("eval.csv"))?;
        for row in &rows {
            w.serialize(row)?;
        }
        w.flush()?;
        std::fs::write(run.path("eval.json"), serde_json::to_string_pretty(&rows)?)?;
        run.artifact("eval_csv", "eval.csv");
        run.artifact("eval_json", "eval.json");
        Ok(())
    })();
    run.finish(&r.as_ref().map(|_| ()).map_err(|e| CliError::Internal(e.to_string())))?;
    r
}

fn extract_cmd(root: &Path, a: ExtractArgs, argv: &[String]) -> Result<(), CliError> {
    check_threshold(a.threshold)?;
    let Artifact::Checkpoint { task, checkpoint } = Artifact::load_checkpoint(&a.checkpoint)? else {
        unreachable!()
    };
    let (params, _, libs) = restore_checkpoint(&checkpoint, task)?;
    let program = extract(
        task,
        &params,
        &libs,
        a.threshold,
        Provenance {
            source: Some(a.checkpoint.display().to_string()),
            threshold: Some(a.threshold),
            timestamp: Some(runs::timestamp()),
        },
    );
    let text = program.print();
    print!("{text}");
    let dir = commands::base_dir(a.out.as_deref(), root, &format!("extract-{}", task.name()))?;
    let config = serde_json::json!({ "checkpoint": a.checkpoint, "threshold": a.threshold });
    let mut run = Run::start(dir, "extract", argv, Some(checkpoint.seed), config)?;
    let r = std::fs::write(run.path("program.lhp"), &text).map_err(CliError::from);
    run.artifact("program", "program.lhp");
    run.finish(&r.as_ref().map(|_| ()).map_err(|e| CliError::Internal(e.to_string())))?;
    r
}

fn run_cmd(root: &Path, a: RunArgs, argv: &[String]) -> Result<(), CliError> {
    let Artifact::Program(program) = Artifact::load_program(&a.program)? else {
        unreachable!()
    };
    let task = a.task.unwrap_or(program.task);
    let size = a.size.unwrap_or_else(|| commands::default_size(task));
    if a.episodes == 0 {
        return Err(CliError::Usage("--episodes must be positive".into()));
    }
    let seeds = a.seed..a.seed + a.episodes as u64;
    let (summary, traces) = commands::run_program(&program, task, size, seeds, a.mode, a.render)?;
    if a.render {
        if let Some((_, t)) = traces.first() {
            for f in &t.frames {
                println!("{f}");
            }
        }
    }
    println!(
        "{} n={} episodes={} return={:.3} success={:.2} timeouts={} length={:.1}",
        task.name(),
        size,
        summary.episodes,
        summary.mean_return,
        summary.success_rate,
        summary.timeouts,
        summary.mean_length
    );
    let dir = commands::base_dir(a.out.as_deref(), root, &format!("run-{}", task.name()))?;
    let config = serde_json::json!({
        "program": a.program,
        "task": task,
        "size": size,
        "episodes": a.episodes,
        "mode": a.mode,
    });
    let mut run = Run::start(dir, "run", argv, Some(a.seed), config)?;
    let r = (|| -> Result<(), CliError> {
        let mut lines = String::new();
        for (seed, t) in &traces {
            let mut v = serde_json::to_value(t)?;
            if let Some(o) = v.as_object_mut() {
                o.insert("seed".into(), (*seed).into());
            }
            lines.push_str(&serde_json::to_string(&v)?);
            lines.push('\n');
        }
        std::fs::write(run.path("traces.jsonl"), lines)?;
        std::fs::write(run.path("summary.json"), serde_json::to_string_pretty(&summary)?)?;
        run.artifact("traces", "traces.jsonl");
        run.artifact("summary", "summary.json");
        Ok(())
    })();
    run.finish(&r.as_ref().map(|_| ()).map_err(|e| CliError::Internal(e.to_string())))?;
    r
}
