use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gridworld::{render, EnvAction, GridState};
use crate::grounding::{
    decode, encode_how, encode_what, encode_where, head_meaning, resolve_subgoal, HeadMeaning, Mode,
    Subgoal, SubgoalBinding, TaskVocabulary,
};
use crate::hole::Hole;
use crate::logic::{Clause, ValuationVector};

use super::ast::{recognize, FuncBody, Program};
use super::policy::{LearnedPolicy, LiteralHole};
use super::program::{hole_base, ExtractedProgram};
use super::SketchError;

#[derive(Debug, Clone, PartialEq)]
pub enum HoleBinding {
    Learned,
    Literal(Vec<Clause>),
}

/// The three-hole sketch with a binding per hole.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchProgram {
    program: Program,
    /// Library depth of literal clause sets (for auxiliary heads).
    pub literal_depth: usize,
}

impl SketchProgram {
    pub fn from_program(program: Program) -> Result<Self, SketchError> {
        recognize(&program)?;
        Ok(SketchProgram {
            program,
            literal_depth: 1,
        })
    }

    /// Every hole learned.
    pub fn learned() -> Self {
        SketchProgram::from_program(Program::sketch()).expect("standard sketch")
    }

    /// Every hole bound to the clauses of `p`.
    pub fn literal(p: &ExtractedProgram) -> Self {
        let mut s = SketchProgram::learned();
        for h in Hole::ALL {
            s = s.with_binding(h, HoleBinding::Literal(p.clauses(h).to_vec()));
        }
        s.literal_depth = p.depth;
        s
    }

    pub fn with_binding(mut self, hole: Hole, binding: HoleBinding) -> Self {
        let f = self
            .program
            .functions
            .iter_mut()
            .find(|f| f.name == hole.name())
            .expect("recognized sketch defines every hole");
        f.body = match binding {
            HoleBinding::Learned => FuncBody::Hole(hole),
            HoleBinding::Literal(cs) => FuncBody::Clauses(cs),
        };
        self
    }

    pub fn binding(&self, hole: Hole) -> HoleBinding {
        match &self.program.function(hole.name()).expect("recognized").body {
            FuncBody::Hole(_) => HoleBinding::Learned,
            FuncBody::Clauses(cs) => HoleBinding::Literal(cs.clone()),
        }
    }

    pub fn program(&self) -> &Program {
        &self.program
    }
}

/// One hole decision. `input` is the boolean valuation over the hole's
/// vocabulary base that the decision was made on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub hole: Hole,
    pub env_step: usize,
    pub input: Vec<bool>,
    pub head_index: usize,
    pub head: String,
    pub prob: f64,
    pub log_prob: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub action: EnvAction,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<StepRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub success: bool,
    pub timeout: bool,
    /// WHERE choices whose subgoal could not be resolved.
    pub retries: usize,
    /// Decisions where every head was false; a no-op was taken instead.
    pub fallbacks: usize,
    pub shaped_return: f64,
    pub normalized_return: f64,
    /// Rendered grid before the first step and after every step, when
    /// requested.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub frames: Vec<String>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub mode: Mode,
    /// HOW steps per subgoal before control returns to WHERE; defaults to
    /// twice the longer grid side.
    pub how_budget: Option<usize>,
    pub record_frames: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: Mode::Argmax,
            how_budget: None,
            record_frames: false,
        }
    }
}

enum Bound<'p, 'a> {
    Learned(&'p LearnedPolicy<'a>),
    Literal(LiteralHole),
}

/// A sketch bound to a task vocabulary and, for learned holes, a policy.
pub struct SketchExecutor<'p, 'a> {
    vocab: TaskVocabulary,
    holes: Vec<(Hole, Bound<'p, 'a>)>,
}

impl<'p, 'a> SketchExecutor<'p, 'a> {
    pub fn new(
        sketch: &SketchProgram,
        vocab: &TaskVocabulary,
        learned: Option<&'p LearnedPolicy<'a>>,
    ) -> Result<Self, SketchError> {
        let mut holes = Vec::new();
        for h in Hole::ALL {
            let b = match sketch.binding(h) {
                HoleBinding::Learned => match learned {
                    Some(p) if p.covers(h) => Bound::Learned(p),
                    _ => return Err(SketchError::Binding(format!("the {h} hole is learned but no weights were given"))),
                },
                HoleBinding::Literal(cs) => {
                    let base = hole_base(vocab, h, sketch.literal_depth);
                    Bound::Literal(
                        LiteralHole::new(vocab, h, &base, &cs)
                            .map_err(|e| SketchError::Vocabulary(format!("{h} hole: {e}")))?,
                    )
                }
            };
            holes.push((h, b));
        }
        Ok(SketchExecutor {
            vocab: vocab.clone(),
            holes,
        })
    }

    pub fn vocabulary(&self) -> &TaskVocabulary {
        &self.vocab
    }

    fn values(&self, hole: Hole, input: &ValuationVector) -> Result<Vec<f64>, SketchError> {
        let (_, b) = self.holes.iter().find(|(h, _)| *h == hole).unwrap();
        Ok(match b {
            Bound::Learned(p) => p.eval(hole, input)?.values.clone(),
            Bound::Literal(l) => l.values(input),
        })
    }

    /// Decides on `input`; `None` is a fallback.
    fn decide(
        &self,
        hole: Hole,
        input: &ValuationVector,
        env_step: usize,
        mode: Mode,
        rng: &mut impl Rng,
        trace: &mut Trace,
    ) -> Result<Option<HeadMeaning>, SketchError> {
        let values = self.values(hole, input)?;
        let Some(d) = decode(&values, mode, rng) else {
            trace.fallbacks += 1;
            return Ok(None);
        };
        let head = &self.vocab.hole(hole).heads[d.index];
        let meaning = head_meaning(hole, head)
            .ok_or_else(|| SketchError::Vocabulary(format!("head {head} has no meaning in the {hole} hole")))?;
        trace.decisions.push(DecisionRecord {
            hole,
            env_step,
            input: input.0.iter().map(|v| *v >= 0.5).collect(),
            head_index: d.index,
            head: head.to_string(),
            prob: d.probs[d.index],
            log_prob: d.log_prob,
            entropy: d.entropy,
        });
        Ok(Some(meaning))
    }

    /// Runs the sketch until the episode ends.
    pub fn run(&self, env: &mut GridState, opts: &RunOptions, rng: &mut impl Rng) -> Result<Trace, SketchError> {
        let mut trace = Trace::default();
        let budget = opts
            .how_budget
            .unwrap_or(2 * env.rows.max(env.cols))
            .max(1);
        if opts.record_frames {
            trace.frames.push(render(env));
        }
        let step = |env: &mut GridState, a: EnvAction, trace: &mut Trace| -> Result<(), SketchError> {
            let t = env.steps;
            let out = env.step(a)?;
            trace.steps.push(StepRecord {
                t,
                action: a,
                reward: out.reward,
            });
            if opts.record_frames {
                trace.frames.push(render(env));
            }
            Ok(())
        };
        while !env.done {
            let e = encode_where(env, &self.vocab.where_);
            let subgoal = match self.decide(Hole::Where, &e, env.steps, opts.mode, rng, &mut trace)? {
                Some(HeadMeaning::Subgoal(g)) => g,
                _ => {
                    step(env, EnvAction::Noop, &mut trace)?;
                    continue;
                }
            };
            let Some(binding) = self.navigate(env, subgoal, budget, opts, rng, &mut trace, &step)? else {
                continue;
            };
            if env.done {
                break;
            }
            let e = encode_what(env, Some(&binding), &self.vocab.what);
            let a = match self.decide(Hole::What, &e, env.steps, opts.mode, rng, &mut trace)? {
                Some(HeadMeaning::Action(a)) => a,
                _ => EnvAction::Noop,
            };
            step(env, a, &mut trace)?;
        }
        trace.success = env.success;
        trace.timeout = !env.success;
        trace.shaped_return = env.shaped_return();
        trace.normalized_return = env.normalized_return();
        Ok(trace)
    }

    /// HOW loop. Returns the binding on arrival, `None` when the subgoal
    /// cannot be resolved, the budget runs out or the episode ends.
    #[allow(clippy::too_many_arguments)]
    fn navigate(
        &self,
        env: &mut GridState,
        subgoal: Subgoal,
        budget: usize,
        opts: &RunOptions,
        rng: &mut impl Rng,
        trace: &mut Trace,
        step: &impl Fn(&mut GridState, EnvAction, &mut Trace) -> Result<(), SketchError>,
    ) -> Result<Option<SubgoalBinding>, SketchError> {
        for k in 0..=budget {
            if env.done {
                return Ok(None);
            }
            let b = match resolve_subgoal(env, subgoal) {
                Ok(b) => b,
                Err(e) => {
                    log::debug!("{e}; returning to WHERE");
                    trace.retries += 1;
                    step(env, EnvAction::Noop, trace)?;
                    return Ok(None);
                }
            };
            if b.arrived() {
                return Ok(Some(b));
            }
            if k == budget {
                break;
            }
            let e = encode_how(&b, &self.vocab.how);
            let a = match self.decide(Hole::How, &e, env.steps, opts.mode, rng, trace)? {
                Some(HeadMeaning::Action(a)) => a,
                _ => EnvAction::Noop,
            };
            step(env, a, trace)?;
        }
        Ok(None)
    }
}

/// Builds an executor and runs one episode.
pub fn run_sketch(
    sketch: &SketchProgram,
    env: &mut GridState,
    vocab: &TaskVocabulary,
    learned: Option<&LearnedPolicy>,
    opts: &RunOptions,
    rng: &mut impl Rng,
) -> Result<Trace, SketchError> {
    SketchExecutor::new(sketch, vocab, learned)?.run(env, opts, rng)
}
