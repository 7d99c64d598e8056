use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use galois_core::diff::{Checkpoint, ParamStore};
use galois_core::dsl::{extract, run_sketch, ExtractedProgram, LearnedPolicy, Provenance, RunOptions, Selector, SketchProgram, Trace};
use galois_core::gridworld::{default_max_steps, render, reset, EnvConfig, Task, LEGEND};
use galois_core::grounding::{Mode, TaskVocabulary};
use galois_core::trainer::{
    evaluate, restore_checkpoint, warm_start, EvalMetrics, ReusePlan, TrainConfig, TrainEvent, TrainSummary, Trainer,
};
use galois_core::Hole;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ResolvedConfig;
use crate::error::CliError;
use crate::runs::{fresh_dir, stamp_for_name, timestamp, MetricsWriter, Run};

/// Where training output goes and what to extract at the end.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub dir: PathBuf,
    pub argv: Vec<String>,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub dir: PathBuf,
    pub seed: u64,
    pub target: Option<f64>,
    pub summary: TrainSummary,
}

fn checkpoint_of(t: &Trainer, params: &ParamStore) -> Result<Checkpoint, CliError> {
    Ok(Checkpoint::capture(
        t.config.task.name(),
        t.config.seed,
        t.episodes as u64,
        params,
        &t.adam,
        &t.libraries,
    )?)
}

#[derive(Serialize)]
struct EvalRecord<'a> {
    episode: usize,
    best: bool,
    #[serde(flatten)]
    metrics: &'a EvalMetrics,
}

/// Trains one seed into `out.dir`, optionally from given weights.
pub fn train_one(resolved: &ResolvedConfig, out: &TrainOutput, init: Option<ParamStore>) -> Result<TrainOutcome, CliError> {
    let cfg = &resolved.train;
    let config_json = serde_json::to_value(cfg)?;
    let mut run = Run::start(out.dir.clone(), "train", &out.argv, Some(cfg.seed), config_json)?;
    let outcome = train_in(&mut run, resolved, out.threshold, init);
    run.finish(&outcome.as_ref().map(|_| ()).map_err(|e| CliError::Internal(e.to_string())))?;
    let summary = outcome?;
    Ok(TrainOutcome {
        dir: run.dir.clone(),
        seed: cfg.seed,
        target: cfg.target_return,
        summary,
    })
}

fn train_in(run: &mut Run, resolved: &ResolvedConfig, threshold: f64, init: Option<ParamStore>) -> Result<TrainSummary, CliError> {
    let cfg = resolved.train.clone();
    std::fs::write(run.path("config.toml"), resolved.to_toml()?)?;
    run.artifact("config", "config.toml");
    let label = run.dir.file_name().and_then(|n| n.to_str()).unwrap_or("run").to_string();
    let mut metrics = MetricsWriter::create(&run.dir, &label, cfg.seed)?;
    run.artifact("metrics_jsonl", "metrics.jsonl");
    run.artifact("metrics_csv", "metrics.csv");
    run.save()?;

    let mut trainer = match init {
        Some(p) => Trainer::with_params(cfg.clone(), p)?,
        None => Trainer::new(cfg.clone())?,
    };
    let ck_path = run.path("checkpoint.json");
    let best_path = run.path("best.json");
    let mut failure: Option<CliError> = None;
    let result = trainer.run(|t, ev| {
        if failure.is_some() {
            return;
        }
        let r = (|| -> Result<(), CliError> {
            match ev {
                TrainEvent::Step(m) => metrics.write("step", m.episode, m)?,
                TrainEvent::Eval { episode, metrics: em, best } => {
                    metrics.write(
                        "eval",
                        *episode,
                        &EvalRecord {
                            episode: *episode,
                            best: *best,
                            metrics: em,
                        },
                    )?;
                    metrics.flush()?;
                    checkpoint_of(t, &t.params)?.save(&ck_path)?;
                    if *best {
                        checkpoint_of(t, &t.params)?.save(&best_path)?;
                    }
                    log::info!(
                        "episode {episode}: eval {:.3} success {:.2}{}",
                        em.mean_return,
                        em.success_rate,
                        em.program_return.map(|p| format!(" program {p:.3}")).unwrap_or_default()
                    );
                }
            }
            Ok(())
        })();
        if let Err(e) = r {
            failure = Some(e);
        }
    });
    metrics.flush()?;
    if let Some(e) = failure {
        return Err(e);
    }
    let summary = result?;
    if !best_path.exists() {
        checkpoint_of(&trainer, &trainer.params)?.save(&best_path)?;
    }
    checkpoint_of(&trainer, &trainer.params)?.save(&ck_path)?;
    run.artifact("checkpoint", "checkpoint.json");
    run.artifact("best_checkpoint", "best.json");

    let best = trainer.best.as_ref().map(|(_, p)| p).unwrap_or(&trainer.params);
    let program = extract(
        cfg.task,
        best,
        &trainer.libraries,
        threshold,
        Provenance {
            source: Some("best.json".into()),
            threshold: Some(threshold),
            timestamp: Some(timestamp()),
        },
    );
    std::fs::write(run.path("program.lhp"), program.print())?;
    run.artifact("program", "program.lhp");
    std::fs::write(run.path("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    run.artifact("summary", "summary.json");
    Ok(summary)
}

/// A config, its output location and optional warm-start weights.
pub type TrainJob = (ResolvedConfig, TrainOutput, Option<ParamStore>);

/// Runs `work` one after another, or on up to `jobs` threads.
pub fn train_many(jobs: usize, work: Vec<TrainJob>) -> Vec<Result<TrainOutcome, CliError>> {
    if jobs <= 1 || work.len() <= 1 {
        return work.into_iter().map(|(c, o, p)| train_one(&c, &o, p)).collect();
    }
    let mut results: Vec<Option<Result<TrainOutcome, CliError>>> = (0..work.len()).map(|_| None).collect();
    let mut items: Vec<(usize, TrainJob)> = work.into_iter().enumerate().collect();
    while !items.is_empty() {
        let chunk: Vec<_> = items.drain(..jobs.min(items.len())).collect();
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .into_iter()
                .map(|(i, (c, o, p))| (i, s.spawn(move || train_one(&c, &o, p))))
                .collect();
            for (i, h) in handles {
                results[i] = Some(h.join().unwrap_or_else(|_| Err(CliError::Internal("training thread panicked".into()))));
            }
        });
    }
    results.into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Output directories for a seed list: `base` itself for one seed, else
/// `base/seed-N`.
pub fn seed_dirs(base: &Path, seeds: &[u64]) -> Vec<PathBuf> {
    if seeds.len() == 1 {
        vec![base.to_path_buf()]
    } else {
        seeds.iter().map(|s| base.join(format!("seed-{s}"))).collect()
    }
}

pub fn base_dir(out: Option<&Path>, root: &Path, name: &str) -> Result<PathBuf, CliError> {
    match out {
        Some(p) => Ok(p.to_path_buf()),
        None => fresh_dir(root, &format!("{name}-{}", stamp_for_name())),
    }
}

pub fn describe(o: &TrainOutcome) -> String {
    let s = &o.summary;
    let mut line = format!("seed {}: {} episodes, {} updates", o.seed, s.episodes, s.updates);
    if let Some(b) = s.best_eval {
        let _ = write!(line, ", best eval {b:.3}");
    }
    if let Some(t) = o.target {
        match s.reached_at {
            Some(e) => {
                let _ = write!(line, ", reached {t} at episode {e}");
            }
            None => {
                let _ = write!(line, ", {t} not reached");
            }
        }
    }
    let _ = write!(line, " -> {}", o.dir.display());
    line
}

/// A loaded policy: checkpoint weights or a clause program.
pub enum Artifact {
    Checkpoint { task: Task, checkpoint: Checkpoint },
    Program(ExtractedProgram),
}

impl Artifact {
    pub fn load_checkpoint(path: &Path) -> Result<Self, CliError> {
        let checkpoint = Checkpoint::load(path)?;
        let task = checkpoint
            .env_name
            .parse()
            .map_err(|e: String| CliError::Artifact(format!("{}: {e}", path.display())))?;
        Ok(Artifact::Checkpoint { task, checkpoint })
    }

    pub fn load_program(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Ok(Artifact::Program(ExtractedProgram::parse(&text, None)?))
    }

    pub fn task(&self) -> Task {
        match self {
            Artifact::Checkpoint { task, .. } => *task,
            Artifact::Program(p) => p.task,
        }
    }

    /// Evaluates on `env` (any size or variant sharing the vocabulary).
    pub fn evaluate(&self, env: EnvConfig, episodes: usize, seed_base: u64) -> Result<EvalMetrics, CliError> {
        let vocab = TaskVocabulary::for_task(env.task);
        match self {
            Artifact::Checkpoint { checkpoint, .. } => {
                let (params, _, libs) = restore_checkpoint(checkpoint, env.task)?;
                let policy = LearnedPolicy::new(&params, &libs, &vocab, galois_core::diff::DEFAULT_TAU_MAX, false)
                    .map_err(|e| CliError::Artifact(e.to_string()))?;
                Ok(evaluate(&SketchProgram::learned(), Some(&policy), env, episodes, seed_base)?)
            }
            Artifact::Program(p) => {
                p.check_against(&vocab)?;
                Ok(evaluate(&SketchProgram::literal(p), None, env, episodes, seed_base)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Train,
    SemMod,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub task: Task,
    pub variant: Variant,
    pub size: usize,
    pub episodes: usize,
    pub mean_return: f64,
    pub std: f64,
    pub success_rate: f64,
    pub mean_length: f64,
    pub mean_shaped: f64,
}

pub fn eval_rows(
    artifact: &Artifact,
    task: Task,
    variant: Variant,
    sizes: &[usize],
    episodes: usize,
    seed_base: u64,
) -> Result<Vec<EvalRow>, CliError> {
    if sizes.is_empty() {
        return Err(CliError::Usage("empty size list".into()));
    }
    if episodes == 0 {
        return Err(CliError::Usage("--episodes must be positive".into()));
    }
    let env_task = match variant {
        Variant::Train => task,
        Variant::SemMod => task
            .sem_mod()
            .ok_or_else(|| CliError::Usage(format!("{task} has no sem-mod variant")))?,
    };
    sizes
        .iter()
        .map(|&size| {
            let m = artifact.evaluate(EnvConfig::new(env_task, size, 0), episodes, seed_base)?;
            Ok(EvalRow {
                task: env_task,
                variant,
                size,
                episodes,
                mean_return: m.mean_return,
                std: m.std,
                success_rate: m.success_rate,
                mean_length: m.mean_length,
                mean_shaped: m.mean_shaped,
            })
        })
        .collect()
}

pub fn format_table(rows: &[EvalRow]) -> String {
    let mut out = format!(
        "{:<20} {:>6} {:>9} {:>12} {:>8} {:>8} {:>8}\n",
        "task", "size", "episodes", "return", "success", "length", "shaped"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<20} {:>6} {:>9} {:>6.3}±{:<5.3} {:>8.2} {:>8.1} {:>8.3}",
            r.task.name(),
            r.size,
            r.episodes,
            r.mean_return,
            r.std,
            r.success_rate,
            r.mean_length,
            r.mean_shaped
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub task: Task,
    pub size: usize,
    pub episodes: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub timeouts: usize,
    pub mean_length: f64,
    pub mean_shaped: f64,
}

/// Executes `program` with every hole bound to its clauses, one episode per
/// seed.
pub fn run_program(
    program: &ExtractedProgram,
    task: Task,
    size: usize,
    seeds: impl IntoIterator<Item = u64>,
    mode: Mode,
    frames: bool,
) -> Result<(RunSummary, Vec<(u64, Trace)>), CliError> {
    let vocab = TaskVocabulary::for_task(task);
    program.check_against(&vocab)?;
    let sketch = SketchProgram::literal(program);
    let opts = RunOptions {
        mode,
        record_frames: frames,
        ..Default::default()
    };
    let mut traces = Vec::new();
    for seed in seeds {
        let mut env = reset(&EnvConfig::new(task, size, seed))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        traces.push((seed, run_sketch(&sketch, &mut env, &vocab, None, &opts, &mut rng)?));
    }
    let n = traces.len().max(1) as f64;
    let summary = RunSummary {
        task,
        size,
        episodes: traces.len(),
        mean_return: traces.iter().map(|(_, t)| t.normalized_return).sum::<f64>() / n,
        success_rate: traces.iter().filter(|(_, t)| t.success).count() as f64 / n,
        timeouts: traces.iter().filter(|(_, t)| t.timeout).count(),
        mean_length: traces.iter().map(|(_, t)| t.len() as f64).sum::<f64>() / n,
        mean_shaped: traces.iter().map(|(_, t)| t.shaped_return).sum::<f64>() / n,
    };
    Ok((summary, traces))
}

pub fn default_size(task: Task) -> usize {
    task.sweep_sizes()[0]
}

pub fn render_layout(task: Task, size: usize, seed: u64, legend: bool) -> Result<String, CliError> {
    let env = reset(&EnvConfig::new(task, size, seed))?;
    let mut out = format!(
        "{} n={} seed={} max_steps={}\n",
        task.name(),
        size,
        seed,
        default_max_steps(task, size)
    );
    out.push_str(&render(&env));
    if legend {
        out.push('\n');
        out.push_str(LEGEND);
    }
    Ok(out)
}

pub fn parse_holes(text: &str) -> Result<BTreeSet<Hole>, CliError> {
    if text == "all" {
        return Ok(Hole::ALL.into_iter().collect());
    }
    text.split(',')
        .map(|h| h.trim().parse::<Hole>().map_err(CliError::Usage))
        .collect()
}

/// Warm-start weights for `target` from the checkpoint at `from`.
pub fn reuse_params(
    from: &Path,
    target: &TrainConfig,
    holes: BTreeSet<Hole>,
    removals: &[String],
) -> Result<ParamStore, CliError> {
    let Artifact::Checkpoint { checkpoint, .. } = Artifact::load_checkpoint(from)? else {
        unreachable!()
    };
    let removals: Vec<Selector> = removals.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    let plan = ReusePlan {
        source: checkpoint,
        holes,
        removals,
        target: target.task,
    };
    let libs = TaskVocabulary::for_task(target.task)
        .libraries(target.library)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(target.seed);
    Ok(warm_start(&plan, &libs, &mut rng)?)
}
