use std::collections::{HashSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::gridworld::{render, reset, Carried, Cell, EnvAction, EnvConfig, GridState, Pos};
use crate::grounding::{
    decode, encode_what, encode_where, head_meaning, resolve_subgoal, HeadMeaning, Mode, TaskVocabulary,
};
use crate::hole::Hole;
use crate::logic::ValuationVector;

use super::policy::LiteralHole;
use super::program::{hole_base, ExtractedProgram};
use super::SketchError;

/// A state where two programs pick different heads. `None` is a fallback.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionMismatch {
    pub seed: u64,
    pub hole: Hole,
    pub input: Vec<bool>,
    pub expected: Option<String>,
    pub found: Option<String>,
    pub grid: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub layouts: usize,
    pub states: usize,
    pub where_checked: usize,
    pub what_checked: usize,
    pub mismatches: Vec<DecisionMismatch>,
}

impl EquivalenceReport {
    pub fn equivalent(&self) -> bool {
        self.mismatches.is_empty()
    }
}

struct Pair {
    vocab: TaskVocabulary,
    reference: [LiteralHole; 2],
    candidate: [LiteralHole; 2],
}

fn literal(vocab: &TaskVocabulary, p: &ExtractedProgram, hole: Hole) -> Result<LiteralHole, SketchError> {
    LiteralHole::new(vocab, hole, &hole_base(vocab, hole, p.depth), p.clauses(hole))
        .map_err(|e| SketchError::Vocabulary(format!("{hole} hole: {e}")))
}

impl Pair {
    fn choose(&self, which: &[LiteralHole; 2], hole: Hole, input: &ValuationVector) -> Option<usize> {
        let l = &which[(hole == Hole::What) as usize];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        decode(&l.values(input), Mode::Argmax, &mut rng).map(|d| d.index)
    }

    fn head(&self, hole: Hole, i: Option<usize>) -> Option<String> {
        i.map(|i| self.vocab.hole(hole).heads[i].to_string())
    }
}

type Key = (Vec<Cell>, Pos, Option<Carried>);

/// Compares the WHERE and WHAT decisions of two programs on every state
/// reachable from each layout by moves, plus the reference program's own
/// interactions when it has arrived at its chosen subgoal.
pub fn compare_on_reachable(
    reference: &ExtractedProgram,
    candidate: &ExtractedProgram,
    env: EnvConfig,
    seeds: impl IntoIterator<Item = u64>,
) -> Result<EquivalenceReport, SketchError> {
    let vocab = TaskVocabulary::for_task(env.task);
    reference
        .check_against(&vocab)
        .and_then(|_| candidate.check_against(&vocab))
        .map_err(|e| SketchError::Vocabulary(e.to_string()))?;
    let pair = Pair {
        reference: [literal(&vocab, reference, Hole::Where)?, literal(&vocab, reference, Hole::What)?],
        candidate: [literal(&vocab, candidate, Hole::Where)?, literal(&vocab, candidate, Hole::What)?],
        vocab,
    };
    let moves = [EnvAction::MoveNorth, EnvAction::MoveEast, EnvAction::MoveSouth, EnvAction::MoveWest];
    let mut report = EquivalenceReport::default();
    for seed in seeds {
        report.layouts += 1;
        let mut start = reset(&EnvConfig { seed, ..env })?;
        start.max_steps = usize::MAX;
        let mut seen: HashSet<Key> = HashSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            if s.done || !seen.insert((s.cells.clone(), s.agent, s.carrying)) {
                continue;
            }
            report.states += 1;
            let mut next = Vec::new();
            let e = encode_where(&s, &pair.vocab.where_);
            let want = pair.choose(&pair.reference, Hole::Where, &e);
            let got = pair.choose(&pair.candidate, Hole::Where, &e);
            report.where_checked += 1;
            if want != got {
                report.mismatches.push(mismatch(&pair, seed, Hole::Where, &e, want, got, &s));
            }
            let subgoal = want.and_then(|i| head_meaning(Hole::Where, &pair.vocab.where_.heads[i]));
            if let Some(HeadMeaning::Subgoal(g)) = subgoal {
                if let Some(b) = resolve_subgoal(&s, g).ok().filter(|b| b.arrived()) {
                    let e = encode_what(&s, Some(&b), &pair.vocab.what);
                    let want = pair.choose(&pair.reference, Hole::What, &e);
                    let got = pair.choose(&pair.candidate, Hole::What, &e);
                    report.what_checked += 1;
                    if want != got {
                        report.mismatches.push(mismatch(&pair, seed, Hole::What, &e, want, got, &s));
                    }
                    if let Some(HeadMeaning::Action(a)) =
                        want.and_then(|i| head_meaning(Hole::What, &pair.vocab.what.heads[i]))
                    {
                        next.push(a);
                    }
                }
            }
            next.extend(moves);
            for a in next {
                let mut t = s.clone();
                t.step(a)?;
                queue.push_back(t);
            }
        }
    }
    Ok(report)
}

fn mismatch(
    pair: &Pair,
    seed: u64,
    hole: Hole,
    input: &ValuationVector,
    want: Option<usize>,
    got: Option<usize>,
    s: &GridState,
) -> DecisionMismatch {
    DecisionMismatch {
        seed,
        hole,
        input: input.0.iter().map(|v| *v >= 0.5).collect(),
        expected: pair.head(hole, want),
        found: pair.head(hole, got),
        grid: render(s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::oracle_program;
    use crate::gridworld::Task;

    #[test]
    fn oracle_matches_itself() {
        let p = oracle_program(Task::DoorKey);
        let r = compare_on_reachable(&p, &p, EnvConfig::new(Task::DoorKey, 8, 0), 0..3).unwrap();
        assert!(r.equivalent());
        assert!(r.states > 50 && r.what_checked >= 2, "{r:?}");
    }

    #[test]
    fn different_subgoal_choice_is_reported() {
        let p = oracle_program(Task::DoorKey);
        let text = crate::dsl::oracle_text(Task::DoorKey).replace(
            "gt_door :- has_key(X), is_agent(X), !is_open(Y), is_door(Y).",
            "gt_door :- !has_key(X), is_agent(X).",
        );
        let q = ExtractedProgram::parse(&text, None).unwrap();
        let r = compare_on_reachable(&p, &q, EnvConfig::new(Task::DoorKey, 8, 0), 0..1).unwrap();
        assert!(!r.equivalent());
        assert!(r.mismatches.iter().all(|m| m.hole == Hole::Where));
    }
}
