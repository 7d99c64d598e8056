use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use thiserror::Error;

use crate::diff::{AdamState, Checkpoint, CheckpointError, HoleParams, ParamStore};
use crate::dsl::{hole_base, Selector, SelectorError};
use crate::gridworld::Task;
use crate::grounding::TaskVocabulary;
use crate::hole::Hole;
use crate::logic::{ClauseLibrary, Signature};

/// Logit given to clauses removed by an edit, relative to the head's
/// smallest source logit.
const REMOVED_OFFSET: f64 = 30.0;

/// Softmax weight above which an unmatched source clause is an error.
const SIGNIFICANT: f64 = 0.3;

#[derive(Debug, Error)]
pub enum ReuseError {
    #[error("source checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("unknown source task `{0}`")]
    SourceTask(String),
    #[error("head {head} of the {hole} hole cannot be transferred; unmatched clauses: {}", clauses.join("; "))]
    Unmatched {
        hole: Hole,
        head: String,
        clauses: Vec<String>,
    },
    #[error(transparent)]
    Selector(#[from] SelectorError),
}

/// What to carry over from a trained source run.
#[derive(Debug, Clone)]
pub struct ReusePlan {
    pub source: Checkpoint,
    pub holes: BTreeSet<Hole>,
    pub removals: Vec<Selector>,
    pub target: Task,
}

impl ReusePlan {
    pub fn source_task(&self) -> Result<Task, ReuseError> {
        self.source
            .env_name
            .parse()
            .map_err(|_| ReuseError::SourceTask(self.source.env_name.clone()))
    }
}

/// Weights, optimizer state and clause libraries of `ck` read against the
/// vocabulary of `task`.
pub fn restore_checkpoint(
    ck: &Checkpoint,
    task: Task,
) -> Result<(ParamStore, AdamState, BTreeMap<Hole, ClauseLibrary>), CheckpointError> {
    let vocab = TaskVocabulary::for_task(task);
    let mut libs = BTreeMap::new();
    for (h, hc) in &ck.holes {
        let lib = vocab
            .hole(*h)
            .library(hc.library)
            .map_err(|e| CheckpointError::Mismatch(e.to_string()))?;
        libs.insert(*h, lib);
    }
    if libs.is_empty() {
        return Err(CheckpointError::Mismatch("checkpoint has no holes".into()));
    }
    let (params, adam) = ck.restore(&libs)?;
    Ok((params, adam, libs))
}

fn sig_for(task: Task, hole: Hole, depth: usize) -> Signature {
    let v = TaskVocabulary::for_task(task);
    let mut s = Signature::from_base(&hole_base(&v, hole, depth), std::iter::empty());
    s.merge(&v.hole(hole).signature);
    s
}

/// Fresh weights for the target with the planned holes copied from the
/// source. Clauses are matched by identity; target clauses that the source
/// library lacks start at the source head's smallest logit, and removed
/// clauses far below it. Heads named by a removal selector stay fresh.
pub fn warm_start(
    plan: &ReusePlan,
    target_libs: &BTreeMap<Hole, ClauseLibrary>,
    rng: &mut impl Rng,
) -> Result<ParamStore, ReuseError> {
    let src_task = plan.source_task()?;
    let (src_params, _, src_libs) = restore_checkpoint(&plan.source, src_task)?;

    let mut out = ParamStore::init_uniform(target_libs.iter().map(|(h, l)| (*h, l)), rng);
    for hole in &plan.holes {
        let (Some(src_lib), Some(sp), Some(tgt_lib)) =
            (src_libs.get(hole), src_params.hole(*hole), target_libs.get(hole))
        else {
            continue;
        };
        let sig = sig_for(src_task, *hole, src_lib.config().depth);
        let tp: &mut HoleParams = out.holes.get_mut(hole).expect("initialized");
        for (pos, cand) in tgt_lib.heads().iter().enumerate() {
            let atom = tgt_lib.base().atom(cand.head);
            let dropped = plan.removals.iter().any(|s| {
                matches!(s, Selector::Head { hole: h, head } if h.is_none_or(|w| w == *hole) && *head == atom.predicate)
            });
            let Some(spos) = src_lib.head_position(atom) else { continue };
            if dropped {
                continue;
            }
            let mut w = sp.weights[spos].clone();
            let floor = w.iter().copied().fold(f64::INFINITY, f64::min);
            let mut removed = vec![false; w.len()];
            for (c, clause) in src_lib.clauses_of(spos).enumerate() {
                for s in &plan.removals {
                    if s.matches(*hole, &clause, &sig)? {
                        removed[c] = true;
                        w[c] = floor - REMOVED_OFFSET;
                    }
                }
            }
            let soft = crate::diff::softmax(&w);
            let mut matched = vec![false; w.len()];
            for (c, clause) in tgt_lib.clauses_of(pos).enumerate() {
                tp.weights[pos][c] = match src_lib.find(&clause) {
                    Some((p, sc)) if p == spos => {
                        matched[sc] = true;
                        w[sc]
                    }
                    _ => floor,
                };
            }
            let unmatched: Vec<String> = src_lib
                .clauses_of(spos)
                .enumerate()
                .filter(|(c, _)| !matched[*c] && !removed[*c] && soft[*c] >= SIGNIFICANT)
                .map(|(_, cl)| sig.print_clause(&cl))
                .collect();
            if !unmatched.is_empty() {
                return Err(ReuseError::Unmatched {
                    hole: *hole,
                    head: atom.to_string(),
                    clauses: unmatched,
                });
            }
        }
    }
    Ok(out)
}
