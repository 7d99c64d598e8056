//! Invariant suites that need no training.

mod checks;

use galois_core::diff::{deduce, HoleParams, Tape};
use galois_core::dsl::{ExtractedProgram, Provenance};
use galois_core::gridworld::{reset, Cell, EnvConfig, Task};
use galois_core::grounding::{decode, encode_where, resolve_subgoal, Mode, Subgoal, TaskVocabulary};
use galois_core::logic::ValuationVector;
use galois_core::Hole;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use checks::task_libraries as libraries;

fn task_strategy() -> impl Strategy<Value = Task> {
    prop::sample::select(Task::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn deduction_stays_in_unit_interval_and_grows(
        task in task_strategy(),
        seed in any::<u64>(),
        tau in 1usize..=4,
        soft_input in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let libs = libraries(task, 1 + (seed % 2) as usize);
        let hole = Hole::ALL[rng.random_range(0..3)];
        let lib = &libs[&hole];
        let mut p = HoleParams::zeros(lib);
        for w in p.weights.iter_mut().flatten() {
            *w = rng.random_range(-5.0..5.0);
        }
        let mut e0 = ValuationVector::zeros(lib.base().len());
        for i in lib.base().extensional_indices() {
            e0.0[i] = if soft_input { rng.random_range(0.0..=1.0) } else { rng.random_bool(0.5) as u8 as f64 };
        }
        let mut t = Tape::new();
        let d = deduce(&mut t, &e0, lib, &p, tau).unwrap();
        prop_assert_eq!(d.steps.len(), tau + 1);
        for w in d.steps.windows(2) {
            prop_assert!(w[1].in_unit_interval());
            for (a, b) in w[0].0.iter().zip(&w[1].0) {
                prop_assert!(b >= a, "valuation decreased: {a} -> {b}");
            }
        }
        for i in lib.base().extensional_indices() {
            prop_assert_eq!(d.final_valuation().0[i], e0.0[i]);
        }
    }

    #[test]
    fn generated_programs_round_trip(task in task_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let depth = if rng.random_bool(0.2) { 2 } else { 1 };
        let libs = libraries(task, depth);
        let mut clauses = Vec::new();
        for (h, lib) in &libs {
            for hp in 0..lib.heads().len() {
                for c in 0..lib.heads()[hp].len() {
                    if rng.random_bool(0.05) {
                        clauses.push((*h, lib.clause(hp, c)));
                    }
                }
            }
        }
        let prov = Provenance {
            source: rng.random_bool(0.5).then(|| format!("runs/r{}/best.json", rng.random::<u16>())),
            threshold: rng.random_bool(0.5).then(|| rng.random_range(0..100) as f64 / 100.0),
            timestamp: None,
        };
        let p = ExtractedProgram::new(task.base(), depth, prov, clauses);
        let text = p.print();
        let q = ExtractedProgram::parse(&text, None).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&q, &p);
        prop_assert_eq!(q.print(), text);
    }

    #[test]
    fn decode_normalizes_and_argmax_is_scale_invariant(
        values in prop::collection::vec(0.0f64..1.0, 1..8),
        scale in 1e-3f64..1e3,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total: f64 = values.iter().sum();
        let d = decode(&values, Mode::Argmax, &mut rng);
        if total <= 0.0 {
            prop_assert!(d.is_none());
            return Ok(());
        }
        let d = d.unwrap();
        prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (p, v) in d.probs.iter().zip(&values) {
            prop_assert!((p - v / total).abs() < 1e-12);
        }
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        let first = values.iter().position(|v| *v == max).unwrap();
        prop_assert_eq!(d.index, first);
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let s = decode(&scaled, Mode::Argmax, &mut rng).unwrap();
        prop_assert_eq!(s.index, d.index);
        let sampled = decode(&values, Mode::Sample, &mut rng).unwrap();
        prop_assert!(values[sampled.index] > 0.0);
    }
}

#[test]
fn oracle_programs_round_trip() {
    checks::programs_round_trip(0).unwrap();
}

#[test]
fn entropy_schedule_is_exact() {
    checks::entropy_schedule_exact().unwrap();
}

#[test]
fn environments_are_deterministic_and_rewards_add_up() {
    checks::environments_deterministic(500).unwrap();
}

#[test]
fn waypoints_are_legal_moves() {
    for task in [Task::DoorKey, Task::BoxKey, Task::UnlockPickup, Task::MultiRoom] {
        let vocab = TaskVocabulary::for_task(task);
        for seed in 0..100u64 {
            let env = reset(&EnvConfig::new(task, 8, seed)).unwrap();
            let facts = encode_where(&env, &vocab.where_);
            assert!(facts.0.iter().all(|v| *v == 0.0 || *v == 1.0));
            for head in &vocab.where_.heads {
                let Some(g) = Subgoal::from_head(head) else { continue };
                let Ok(b) = resolve_subgoal(&env, g) else { continue };
                let (dr, dc) = b.offset;
                assert_eq!(dr.abs() + dc.abs(), if b.arrived() { 0 } else { 1 });
                assert_eq!(
                    env.agent.offset(dr, dc),
                    Some(b.waypoint),
                    "{task} {seed} {head}"
                );
                assert!(env.cell(b.waypoint).passable() || b.waypoint == env.agent);
                assert_ne!(env.cell(b.waypoint), Cell::Wall);
            }
        }
    }
}
