//! Monte-Carlo policy-gradient training, evaluation and warm starts.

mod reuse;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{policy_update, AdamConfig, AdamState, DiffError, Gradients, ParamStore, DEFAULT_TAU_MAX};
use crate::dsl::{extract, LearnedPolicy, Provenance, RunOptions, SketchError, SketchExecutor, SketchProgram, Trace};
use crate::gridworld::{reset, EnvConfig, EnvError, Task};
use crate::grounding::{Mode, TaskVocabulary};
use crate::hole::Hole;
use crate::logic::{ClauseLibrary, LibraryConfig, LogicError};

pub use reuse::{restore_checkpoint, warm_start, ReuseError, ReusePlan};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("{0} updates skipped on non-finite gradients")]
    Numerics(usize),
}

/// What the batch size counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchUnit {
    /// Collect whole episodes until at least this many decisions.
    Decisions,
    Episodes,
}

/// `start / factor^floor(episode / every)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySchedule {
    pub start: f64,
    pub factor: f64,
    pub every: usize,
}

impl Default for EntropySchedule {
    fn default() -> Self {
        EntropySchedule {
            start: 5.0,
            factor: 10.0,
            every: 50,
        }
    }
}

impl EntropySchedule {
    pub fn coefficient(&self, episode: usize) -> f64 {
        let k = (episode / self.every.max(1)) as i32;
        self.start / self.factor.powi(k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub task: Task,
    pub size: usize,
    pub seed: u64,
    pub lr: f64,
    pub batch_unit: BatchUnit,
    pub batch_size: usize,
    pub discount: f64,
    pub entropy: EntropySchedule,
    pub tau_max: usize,
    pub max_episodes: usize,
    /// Evaluate after every this many training episodes.
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub eval_seed_base: u64,
    /// Subtract the batch-mean return from each decision's return.
    pub baseline: bool,
    pub library: LibraryConfig,
    /// Stop once an evaluation reaches this mean return.
    pub target_return: Option<f64>,
    /// When set, every evaluation also runs the program extracted at this
    /// threshold, and the target and best-checkpoint choice use the lower
    /// of the two returns.
    pub program_threshold: Option<f64>,
    /// Abort once more than this many updates were skipped.
    pub max_nan_skips: usize,
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: Task::DoorKey,
            size: 8,
            seed: 0,
            lr: AdamConfig::default().lr,
            batch_unit: BatchUnit::Decisions,
            batch_size: 256,
            discount: 0.99,
            entropy: EntropySchedule::default(),
            tau_max: DEFAULT_TAU_MAX,
            max_episodes: 5000,
            eval_every: 100,
            eval_episodes: 100,
            eval_seed_base: 1_000_000,
            baseline: false,
            library: LibraryConfig::default(),
            target_return: None,
            program_threshold: None,
            max_nan_skips: 10,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad(format!("discount must be in (0, 1], got {}", self.discount));
        }
        if !(self.entropy.start >= 0.0) || !(self.entropy.factor > 0.0) {
            return bad("entropy start must be >= 0 and factor > 0".into());
        }
        if self.batch_size == 0 || self.tau_max == 0 || self.eval_every == 0 || self.eval_episodes == 0 {
            return bad("batch_size, tau_max, eval_every and eval_episodes must be positive".into());
        }
        if let Some(t) = self.program_threshold {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("program_threshold must be in [0, 1], got {t}"));
            }
        }
        if self.library.depth == 0 || self.library.max_body == 0 {
            return bad("library depth and max_body must be positive".into());
        }
        let mut env = EnvConfig::new(self.task, self.size, 0);
        env.max_steps = self.max_steps;
        env.validate()?;
        Ok(())
    }

    pub fn env(&self, seed: u64) -> EnvConfig {
        EnvConfig {
            max_steps: self.max_steps,
            ..EnvConfig::new(self.task, self.size, seed)
        }
    }
}

/// Episodes collected under one parameter snapshot.
#[derive(Debug, Clone, Default)]
pub struct EpisodeBatch {
    pub traces: Vec<Trace>,
    /// Discounted return-to-go at each decision, per episode.
    pub returns: Vec<Vec<f64>>,
}

impl EpisodeBatch {
    pub fn decisions(&self) -> usize {
        self.traces.iter().map(|t| t.decisions.len()).sum()
    }
}

/// `Q_t = sum_k discount^k r_{t+k}` for every step index, plus a trailing 0.
pub fn discounted_returns(rewards: &[f64], discount: f64) -> Vec<f64> {
    let mut q = vec![0.0; rewards.len() + 1];
    for t in (0..rewards.len()).rev() {
        q[t] = rewards[t] + discount * q[t + 1];
    }
    q
}

fn decision_returns(trace: &Trace, discount: f64) -> Vec<f64> {
    let rewards: Vec<f64> = trace.steps.iter().map(|s| s.reward).collect();
    let q = discounted_returns(&rewards, discount);
    trace
        .decisions
        .iter()
        .map(|d| q[d.env_step.min(rewards.len())])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub episode: usize,
    pub update: u64,
    pub mean_return: f64,
    pub std: f64,
    pub mean_normalized: f64,
    pub success_rate: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    pub gamma_eps: f64,
    pub decisions: usize,
    pub skipped: bool,
    pub wallclock: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub task: Task,
    pub size: usize,
    pub episodes: usize,
    pub mean_return: f64,
    pub std: f64,
    pub success_rate: f64,
    pub mean_length: f64,
    pub mean_shaped: f64,
    /// Return of the extracted program, when evaluated alongside.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub program_return: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Runs `episodes` argmax episodes on seeds `seed_base + i`.
pub fn evaluate(
    sketch: &SketchProgram,
    policy: Option<&LearnedPolicy>,
    env: EnvConfig,
    episodes: usize,
    seed_base: u64,
) -> Result<EvalMetrics, TrainError> {
    let vocab = TaskVocabulary::for_task(env.task);
    let exec = SketchExecutor::new(sketch, &vocab, policy)?;
    let mut norm = Vec::with_capacity(episodes);
    let mut shaped = Vec::with_capacity(episodes);
    let mut len = 0usize;
    let mut wins = 0usize;
    for i in 0..episodes {
        let seed = seed_base.wrapping_add(i as u64);
        let mut state = reset(&EnvConfig { seed, ..env })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = exec.run(&mut state, &RunOptions::default(), &mut rng)?;
        norm.push(t.normalized_return);
        shaped.push(t.shaped_return);
        len += t.len();
        wins += t.success as usize;
    }
    let (mean_return, std) = mean_std(&norm);
    Ok(EvalMetrics {
        task: env.task,
        size: env.size,
        episodes,
        mean_return,
        std,
        success_rate: wins as f64 / episodes.max(1) as f64,
        mean_length: len as f64 / episodes.max(1) as f64,
        mean_shaped: mean_std(&shaped).0,
        program_return: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainEvent {
    Step(StepMetrics),
    Eval { episode: usize, metrics: EvalMetrics, best: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub episodes: usize,
    pub updates: u64,
    pub nan_skips: usize,
    pub best_eval: Option<f64>,
    pub last_eval: Option<f64>,
    /// Training episodes at the first evaluation reaching the target.
    pub reached_at: Option<usize>,
}

pub struct Trainer {
    pub config: TrainConfig,
    pub vocab: TaskVocabulary,
    pub libraries: BTreeMap<Hole, ClauseLibrary>,
    pub params: ParamStore,
    pub adam: AdamState,
    pub best: Option<(f64, ParamStore)>,
    pub episodes: usize,
    pub nan_skips: usize,
    rng: ChaCha8Rng,
    started: Instant,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let vocab = TaskVocabulary::for_task(config.task);
        let libraries = vocab.libraries(config.library)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = ParamStore::init_uniform(libraries.iter().map(|(h, l)| (*h, l)), &mut rng);
        Self::assemble(config, vocab, libraries, params, rng)
    }

    /// Starts from given weights (a warm start or a resumed run).
    pub fn with_params(config: TrainConfig, params: ParamStore) -> Result<Self, TrainError> {
        config.validate()?;
        let vocab = TaskVocabulary::for_task(config.task);
        let libraries = vocab.libraries(config.library)?;
        for (h, lib) in &libraries {
            params
                .hole(*h)
                .ok_or_else(|| TrainError::Config(format!("no weights for the {h} hole")))?
                .check(lib)?;
        }
        // Consume the same draws as a fresh start so the episode stream only
        // depends on the seed.
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let _ = ParamStore::init_uniform(libraries.iter().map(|(h, l)| (*h, l)), &mut rng);
        Self::assemble(config, vocab, libraries, params, rng)
    }

    fn assemble(
        config: TrainConfig,
        vocab: TaskVocabulary,
        libraries: BTreeMap<Hole, ClauseLibrary>,
        params: ParamStore,
        rng: ChaCha8Rng,
    ) -> Result<Self, TrainError> {
        Ok(Trainer {
            adam: AdamState::new(&params),
            config,
            vocab,
            libraries,
            params,
            best: None,
            episodes: 0,
            nan_skips: 0,
            rng,
            started: Instant::now(),
        })
    }

    pub fn policy(&self, grads: bool) -> Result<LearnedPolicy<'_>, TrainError> {
        Ok(LearnedPolicy::new(&self.params, &self.libraries, &self.vocab, self.config.tau_max, grads)?)
    }

    /// Samples one batch with the current weights.
    pub fn collect(&mut self) -> Result<EpisodeBatch, TrainError> {
        let sketch = SketchProgram::learned();
        let policy = LearnedPolicy::new(&self.params, &self.libraries, &self.vocab, self.config.tau_max, false)?;
        let exec = SketchExecutor::new(&sketch, &self.vocab, Some(&policy))?;
        let opts = RunOptions {
            mode: Mode::Sample,
            ..Default::default()
        };
        let mut batch = EpisodeBatch::default();
        loop {
            let done = match self.config.batch_unit {
                BatchUnit::Decisions => batch.decisions() >= self.config.batch_size,
                BatchUnit::Episodes => batch.traces.len() >= self.config.batch_size,
            };
            if done || self.episodes + batch.traces.len() >= self.config.max_episodes {
                break;
            }
            let seed: u64 = self.rng.random();
            let mut env = reset(&self.config.env(seed))?;
            let trace = exec.run(&mut env, &opts, &mut self.rng)?;
            batch.returns.push(decision_returns(&trace, self.config.discount));
            batch.traces.push(trace);
        }
        Ok(batch)
    }

    /// Gradient of the batch objective
    /// `(1/E) sum_decisions [(Q - b) log pi + gamma H]`.
    pub fn batch_gradient(&self, batch: &EpisodeBatch, gamma: f64) -> Result<Gradients, TrainError> {
        let policy = self.policy(true)?;
        let mut g = Gradients::zeros_like(&self.params);
        let all: Vec<f64> = batch.returns.iter().flatten().copied().collect();
        let b = if self.config.baseline { mean_std(&all).0 } else { 0.0 };
        // Group coefficients by (hole, input, head) so each distinct
        // gradient is scaled once.
        let mut coef: BTreeMap<(Hole, Vec<bool>), (Vec<f64>, f64)> = BTreeMap::new();
        for (trace, qs) in batch.traces.iter().zip(&batch.returns) {
            for (d, q) in trace.decisions.iter().zip(qs) {
                let heads = self.vocab.hole(d.hole).heads.len();
                let e = coef
                    .entry((d.hole, d.input.clone()))
                    .or_insert_with(|| (vec![0.0; heads], 0.0));
                e.0[d.head_index] += q - b;
                e.1 += gamma;
            }
        }
        for ((hole, input), (per_head, ent)) in coef {
            let v = crate::logic::ValuationVector(input.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect());
            let eval = policy.eval(hole, &v)?;
            let target = g.holes.get_mut(&hole).expect("every hole has weights");
            let mut add = |src: &Vec<Vec<f64>>, k: f64| {
                for (a, s) in target.iter_mut().zip(src) {
                    for (x, y) in a.iter_mut().zip(s) {
                        *x += k * y;
                    }
                }
            };
            let mut missing = false;
            for (i, k) in per_head.iter().enumerate() {
                if *k != 0.0 {
                    match &eval.log_grads[i] {
                        Some(lg) => add(lg, *k),
                        None => missing = true,
                    }
                }
            }
            if ent != 0.0 {
                if let Some(eg) = &eval.entropy_grad {
                    add(eg, ent);
                }
            }
            if missing {
                // A recorded choice with zero probability; poison the
                // gradient so the update is skipped and counted.
                target[0][0] = f64::NAN;
            }
        }
        g.scale(1.0 / batch.traces.len().max(1) as f64);
        Ok(g)
    }

    /// One ascent step on `batch`.
    pub fn train_step(&mut self, batch: &EpisodeBatch) -> Result<StepMetrics, TrainError> {
        if batch.traces.is_empty() {
            return Err(TrainError::Config("empty batch".into()));
        }
        let gamma = self.config.entropy.coefficient(self.episodes);
        let g = self.batch_gradient(batch, gamma)?;
        let adam = AdamConfig {
            lr: self.config.lr,
            ..AdamConfig::default()
        };
        let skipped = match policy_update(&mut self.params, &g, &adam, &mut self.adam) {
            Ok(()) => false,
            Err(DiffError::Numerics(msg)) => {
                self.nan_skips += 1;
                log::warn!("update skipped: {msg}");
                if self.nan_skips > self.config.max_nan_skips {
                    return Err(TrainError::Numerics(self.nan_skips));
                }
                true
            }
            Err(e) => return Err(e.into()),
        };
        self.episodes += batch.traces.len();
        let shaped: Vec<f64> = batch.traces.iter().map(|t| t.shaped_return).collect();
        let (mean_return, std) = mean_std(&shaped);
        let decisions = batch.decisions();
        let entropy = batch
            .traces
            .iter()
            .flat_map(|t| t.decisions.iter().map(|d| d.entropy))
            .sum::<f64>()
            / decisions.max(1) as f64;
        let n = batch.traces.len() as f64;
        Ok(StepMetrics {
            episode: self.episodes,
            update: self.params.step,
            mean_return,
            std,
            mean_normalized: batch.traces.iter().map(|t| t.normalized_return).sum::<f64>() / n,
            success_rate: batch.traces.iter().filter(|t| t.success).count() as f64 / n,
            entropy,
            grad_norm: if skipped { f64::NAN } else { g.norm() },
            gamma_eps: gamma,
            decisions,
            skipped,
            wallclock: self.started.elapsed().as_secs_f64(),
        })
    }

    /// Argmax evaluation of the current weights on the training task.
    pub fn evaluate_current(&self) -> Result<EvalMetrics, TrainError> {
        let policy = self.policy(false)?;
        let mut m = evaluate(
            &SketchProgram::learned(),
            Some(&policy),
            self.config.env(0),
            self.config.eval_episodes,
            self.config.eval_seed_base,
        )?;
        if let Some(th) = self.config.program_threshold {
            let p = extract(self.config.task, &self.params, &self.libraries, th, Provenance::default());
            let pm = evaluate(
                &SketchProgram::literal(&p),
                None,
                self.config.env(0),
                self.config.eval_episodes,
                self.config.eval_seed_base,
            )?;
            m.program_return = Some(pm.mean_return);
        }
        Ok(m)
    }

    /// Trains until `max_episodes` or the target return. `observer` sees
    /// every update and evaluation.
    pub fn run(&mut self, mut observer: impl FnMut(&Trainer, &TrainEvent)) -> Result<TrainSummary, TrainError> {
        let mut next_eval = self.episodes + self.config.eval_every;
        let mut summary = TrainSummary {
            episodes: self.episodes,
            updates: self.params.step,
            nan_skips: 0,
            best_eval: None,
            last_eval: None,
            reached_at: None,
        };
        while self.episodes < self.config.max_episodes {
            let batch = self.collect()?;
            if batch.traces.is_empty() {
                break;
            }
            let m = self.train_step(&batch)?;
            observer(self, &TrainEvent::Step(m));
            let last = self.episodes >= self.config.max_episodes;
            if self.episodes >= next_eval || last {
                next_eval = self.episodes + self.config.eval_every;
                let metrics = self.evaluate_current()?;
                let score = metrics.program_return.map_or(metrics.mean_return, |p| p.min(metrics.mean_return));
                let best = self.best.as_ref().is_none_or(|(b, _)| score > *b);
                if best {
                    self.best = Some((score, self.params.clone()));
                }
                summary.last_eval = Some(score);
                observer(
                    self,
                    &TrainEvent::Eval {
                        episode: self.episodes,
                        metrics,
                        best,
                    },
                );
                if let Some(t) = self.config.target_return {
                    if score >= t {
                        summary.reached_at = Some(self.episodes);
                        break;
                    }
                }
            }
        }
        summary.episodes = self.episodes;
        summary.updates = self.params.step;
        summary.nan_skips = self.nan_skips;
        summary.best_eval = self.best.as_ref().map(|(b, _)| *b);
        Ok(summary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_schedule_values() {
        let s = EntropySchedule::default();
        assert_eq!(s.coefficient(0), 5.0);
        assert_eq!(s.coefficient(49), 5.0);
        assert_eq!(s.coefficient(50), 0.5);
        assert_eq!(s.coefficient(100), 0.05);
    }

    #[test]
    fn discounted_return_examples() {
        let q = discounted_returns(&[-0.01, 1.19], 1.0);
        assert!((q[0] - 1.18).abs() < 1e-12);
        let q = discounted_returns(&[1.0, 2.0, 3.0], 0.9);
        assert!((q[0] - (1.0 + 0.9 * 2.0 + 0.81 * 3.0)).abs() < 1e-12);
        assert!((q[1] - (2.0 + 0.9 * 3.0)).abs() < 1e-12);
        assert_eq!(q[3], 0.0);
    }

    #[test]
    fn bad_configs_are_rejected() {
        for cfg in [
            TrainConfig { lr: 0.0, ..Default::default() },
            TrainConfig { discount: 0.0, ..Default::default() },
            TrainConfig { size: 9, ..Default::default() },
        ] {
            assert!(matches!(Trainer::new(cfg), Err(TrainError::Config(_) | TrainError::Env(_))));
        }
    }

    #[test]
    fn zero_return_and_no_entropy_gives_zero_gradient() {
        let t = Trainer::new(TrainConfig::default()).unwrap();
        let mut batch = EpisodeBatch::default();
        let mut tr = Trace::default();
        tr.decisions.push(crate::dsl::DecisionRecord {
            hole: Hole::Where,
            env_step: 0,
            input: t.vocab.where_.base.atoms().iter().map(|_| false).collect(),
            head_index: 0,
            head: "gt_door".into(),
            prob: 0.25,
            log_prob: 0.25f64.ln(),
            entropy: 0.0,
        });
        batch.traces.push(tr);
        batch.returns.push(vec![0.0]);
        let g = t.batch_gradient(&batch, 0.0).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn same_seed_same_metric_stream() {
        let cfg = TrainConfig {
            max_episodes: 6,
            batch_unit: BatchUnit::Episodes,
            batch_size: 2,
            eval_every: 3,
            eval_episodes: 5,
            ..Default::default()
        };
        let run = || {
            let mut log = Vec::new();
            let mut t = Trainer::new(cfg.clone()).unwrap();
            t.run(|_, e| {
                if let TrainEvent::Step(m) = e {
                    log.push((m.mean_return, m.grad_norm, m.entropy));
                } else {
                    log.push((0.0, 0.0, 0.0));
                }
            })
            .unwrap();
            (log, t.params)
        };
        assert_eq!(run(), run());
    }

    /// Surrogate `(1/E) sum_d [(Q_d - b) log p(a_d) + gamma H(p)]` evaluated
    /// from head values alone.
    fn surrogate(t: &Trainer, params: &ParamStore, batch: &EpisodeBatch, gamma: f64, b: f64) -> f64 {
        let policy = LearnedPolicy::new(params, &t.libraries, &t.vocab, t.config.tau_max, false).unwrap();
        let mut j = 0.0;
        for (tr, qs) in batch.traces.iter().zip(&batch.returns) {
            for (d, q) in tr.decisions.iter().zip(qs) {
                let v = crate::logic::ValuationVector(d.input.iter().map(|x| *x as u8 as f64).collect());
                let vals = policy.eval(d.hole, &v).unwrap().values.clone();
                let total: f64 = vals.iter().sum();
                let p: Vec<f64> = vals.iter().map(|x| x / total).collect();
                j += (q - b) * p[d.head_index].ln() + gamma * crate::diff::entropy(&p);
            }
        }
        j / batch.traces.len() as f64
    }

    #[test]
    fn policy_gradient_matches_finite_differences() {
        for baseline in [false, true] {
            let cfg = TrainConfig {
                batch_unit: BatchUnit::Episodes,
                batch_size: 2,
                baseline,
                ..Default::default()
            };
            let mut t = Trainer::new(cfg).unwrap();
            let batch = t.collect().unwrap();
            let gamma = 0.3;
            let g = t.batch_gradient(&batch, gamma).unwrap();
            let all: Vec<f64> = batch.returns.iter().flatten().copied().collect();
            let b = if baseline { all.iter().sum::<f64>() / all.len() as f64 } else { 0.0 };
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..30 {
                let hole = Hole::ALL[rng.random_range(0..3)];
                let w = &t.params.holes[&hole].weights;
                let hp = rng.random_range(0..w.len());
                let c = rng.random_range(0..w[hp].len());
                let h = 1e-5;
                let mut plus = t.params.clone();
                plus.holes.get_mut(&hole).unwrap().weights[hp][c] += h;
                let mut minus = t.params.clone();
                minus.holes.get_mut(&hole).unwrap().weights[hp][c] -= h;
                let fd = (surrogate(&t, &plus, &batch, gamma, b) - surrogate(&t, &minus, &batch, gamma, b)) / (2.0 * h);
                let a = g.holes[&hole][hp][c];
                assert!((a - fd).abs() <= 1e-6 * a.abs().max(fd.abs()).max(1.0), "{hole} {hp} {c}: {a} vs {fd}");
            }
        }
    }
}
