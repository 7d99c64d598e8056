//! Seeded check loops shared by the core test targets and the acceptance
//! suite. Each returns a one-line summary or the first failure.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};
use std::time::Instant;

use galois_core::diff::{deduce, Gradients, HoleParams, Tape};
use galois_core::dsl::{oracle_program, ExtractedProgram, Provenance};
use galois_core::gridworld::{reset, EnvAction, EnvConfig, GridState, Task};
use galois_core::grounding::{decode, Mode, TaskVocabulary};
use galois_core::logic::{
    enumerate_clauses, Clause, ClauseLibrary, GroundAtom, HerbrandBase, LibraryConfig, PredicateKind, ValuationVector,
};
use galois_core::trainer::EntropySchedule;
use galois_core::Hole;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

pub fn random_library(rng: &mut impl Rng, max_candidates: usize) -> ClauseLibrary {
    loop {
        let n_ext = rng.random_range(1..=5);
        let n_heads = rng.random_range(1..=2);
        let config = LibraryConfig {
            depth: rng.random_range(1..=2),
            max_body: rng.random_range(1..=2),
        };
        let ext = (0..n_ext).map(|i| (GroundAtom::nullary(format!("p{i}")), PredicateKind::Extensional));
        let heads: Vec<GroundAtom> = (0..n_heads).map(|i| GroundAtom::nullary(format!("h{i}"))).collect();
        let base =
            HerbrandBase::from_atoms(ext.chain(heads.iter().map(|h| (h.clone(), PredicateKind::Intensional)))).unwrap();
        let Ok(lib) = enumerate_clauses(&base, &heads, config) else { continue };
        if lib.num_candidates() <= max_candidates && lib.base().len() <= 12 {
            return lib;
        }
    }
}

fn objective(lib: &ClauseLibrary, e0: &ValuationVector, p: &HoleParams, tau: usize, r: &[f64]) -> f64 {
    let mut t = Tape::new();
    let d = deduce(&mut t, e0, lib, p, tau).unwrap();
    d.final_valuation().0.iter().zip(r).map(|(a, b)| a * b).sum()
}

/// Tape gradients of a random linear readout of soft deduction against
/// central differences on 50 instances.
pub fn gradients_match_finite_differences() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut coords = 0;
    for _ in 0..50 {
        let lib = random_library(&mut rng, 10);
        let n = lib.base().len();
        let tau = rng.random_range(1..=3);
        let mut p = HoleParams::zeros(&lib);
        for w in p.weights.iter_mut().flatten() {
            *w = rng.random_range(-2.0..2.0);
        }
        let e0 = ValuationVector((0..n).map(|_| rng.random_range(0.0..1.0)).collect());
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();

        let mut t = Tape::new();
        let d = deduce(&mut t, &e0, &lib, &p, tau).unwrap();
        let rn = t.input(r.clone());
        let prod = t.hadamard(d.final_node(), rn);
        let f = t.sum(prod);
        let g = t.backward(&[(f, 1.0)]).unwrap();
        let analytic = Gradients::from_tape(Hole::Where, &p, &t, &g).holes.remove(&Hole::Where).unwrap();

        let h = 1e-5;
        for hp in 0..p.weights.len() {
            for c in 0..p.weights[hp].len() {
                let mut plus = p.clone();
                plus.weights[hp][c] += h;
                let mut minus = p.clone();
                minus.weights[hp][c] -= h;
                let numeric = (objective(&lib, &e0, &plus, tau, &r) - objective(&lib, &e0, &minus, tau, &r)) / (2.0 * h);
                let a = analytic[hp][c];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
                worst = worst.max(rel);
                coords += 1;
                ensure!(rel <= 1e-5, "head {hp} clause {c}: tape {a} vs fd {numeric} (rel {rel:.2e})");
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1} s");
    Ok(format!("50 instances, {coords} weights, worst rel err {worst:.2e}, {secs:.2} s"))
}

/// Naive chainer: each step derives a head when its selected clause body
/// holds on the previous step's facts.
fn oracle_chain(clauses: &[Clause], facts: &HashSet<GroundAtom>, steps: usize) -> HashSet<GroundAtom> {
    let mut cur = facts.clone();
    for _ in 0..steps {
        let mut next = cur.clone();
        for c in clauses {
            if c.body.iter().all(|l| cur.contains(&l.atom) != l.negated) {
                next.insert(c.head.clone());
            }
        }
        cur = next;
    }
    cur
}

/// One-hot weights on boolean inputs reproduce classical chaining exactly.
pub fn one_hot_matches_boolean_chaining() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..200 {
        let lib = random_library(&mut rng, 40);
        let tau = rng.random_range(1..=4);
        let mut p = HoleParams::zeros(&lib);
        let mut chosen = Vec::new();
        for (hp, h) in lib.heads().iter().enumerate() {
            let c = rng.random_range(0..h.len());
            p.weights[hp][c] = 1000.0;
            chosen.push(lib.clause(hp, c));
        }
        let facts: HashSet<GroundAtom> = lib
            .base()
            .extensional_indices()
            .filter(|_| rng.random_bool(0.5))
            .map(|i| lib.base().atom(i).clone())
            .collect();
        let e0 = lib.base().valuation_of(&facts);
        let mut t = Tape::new();
        let soft = deduce(&mut t, &e0, &lib, &p, tau).unwrap();
        let hard = oracle_chain(&chosen, &facts, tau);
        for (i, a) in lib.base().atoms().iter().enumerate() {
            let want = if hard.contains(a) { 1.0 } else { 0.0 };
            ensure!(soft.final_valuation().0[i] == want, "instance {k}: {a} is {} not {want}", soft.final_valuation().0[i]);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 5.0, "took {secs:.1} s");
    Ok(format!("200 instances exact, {secs:.2} s"))
}

pub fn task_libraries(task: Task, depth: usize) -> BTreeMap<Hole, ClauseLibrary> {
    TaskVocabulary::for_task(task)
        .libraries(LibraryConfig { depth, max_body: 2 })
        .unwrap()
}

/// Valuations stay in [0, 1], never decrease across steps, and leave
/// extensional atoms alone.
pub fn deduction_bounds(cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let libs = [1, 2].map(|d| Task::ALL.map(|t| task_libraries(t, d)));
    for k in 0..cases {
        let lib = &libs[rng.random_range(0..2)][rng.random_range(0..Task::ALL.len())][&Hole::ALL[rng.random_range(0..3)]];
        let tau = rng.random_range(1..=4);
        let soft_input = rng.random_bool(0.5);
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
        ensure!(d.steps.len() == tau + 1, "case {k}: {} steps", d.steps.len());
        for w in d.steps.windows(2) {
            ensure!(w[1].in_unit_interval(), "case {k}: valuation left [0, 1]");
            for (a, b) in w[0].0.iter().zip(&w[1].0) {
                ensure!(b >= a, "case {k}: valuation decreased {a} -> {b}");
            }
        }
        for i in lib.base().extensional_indices() {
            ensure!(d.final_valuation().0[i] == e0.0[i], "case {k}: extensional atom {i} changed");
        }
    }
    Ok(format!("{cases} deductions"))
}

/// Oracle programs plus `cases` random clause subsets survive print/parse.
pub fn programs_round_trip(cases: usize) -> Check {
    for task in [Task::DoorKey, Task::BoxKey, Task::UnlockPickup, Task::MultiRoom] {
        let p = oracle_program(task);
        let q = ExtractedProgram::parse(&p.print(), None).map_err(|e| format!("{task}: {e}"))?;
        ensure!(p == q, "{task} oracle program changed on round trip");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let libs = [1, 2].map(|d| Task::ALL.map(|t| task_libraries(t, d)));
    for k in 0..cases {
        let depth = if rng.random_bool(0.2) { 2 } else { 1 };
        let ti = rng.random_range(0..Task::ALL.len());
        let mut clauses = Vec::new();
        for (h, lib) in &libs[depth - 1][ti] {
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
        let p = ExtractedProgram::new(Task::ALL[ti].base(), depth, prov, clauses);
        let text = p.print();
        let q = ExtractedProgram::parse(&text, None).map_err(|e| format!("case {k}: {e}\n{text}"))?;
        ensure!(q == p && q.print() == text, "case {k} changed on round trip:\n{text}");
    }
    Ok(format!("4 oracle + {cases} generated programs"))
}

pub fn entropy_schedule_exact() -> Check {
    let s = EntropySchedule::default();
    for e in 0..1000usize {
        let expect: f64 = format!("5e-{}", e / 50).parse().unwrap();
        ensure!(s.coefficient(e) == expect, "episode {e}: {} != {expect}", s.coefficient(e));
    }
    Ok("episodes 0..1000".into())
}

fn random_episode(task: Task, seed: u64) -> (Vec<(EnvAction, f64, bool)>, GridState) {
    let mut env = reset(&EnvConfig::new(task, 8, seed)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut log = Vec::new();
    while !env.done {
        let a = EnvAction::ALL[rng.random_range(0..EnvAction::ALL.len())];
        let out = env.step(a).unwrap();
        log.push((a, out.reward, out.done));
    }
    (log, env)
}

/// Same seed, same layout and trajectory; rewards sum to the shaped return
/// and match the step, event and success counts.
pub fn environments_deterministic(seeds: u64) -> Check {
    for task in Task::ALL {
        for seed in 0..seeds {
            let a = reset(&EnvConfig::new(task, 8, seed)).unwrap();
            let b = reset(&EnvConfig::new(task, 8, seed)).unwrap();
            ensure!(a == b, "{task} {seed}: reset differs");
            let (log, end) = random_episode(task, seed);
            let (log2, end2) = random_episode(task, seed);
            ensure!(log == log2 && end == end2, "{task} {seed}: rollout differs");

            let total: f64 = log.iter().map(|(_, r, _)| r).sum();
            ensure!((total - end.shaped_return()).abs() < 1e-9, "{task} {seed}: rewards sum to {total}");
            let expect = -(end.steps as i64) + 20 * end.events.len() as i64 + 100 * end.success as i64;
            ensure!(end.return_cents == expect, "{task} {seed}: return {} != {expect}", end.return_cents);
            ensure!(end.steps == log.len() && end.steps <= end.max_steps, "{task} {seed}: step count");
            ensure!(end.success || end.steps == end.max_steps, "{task} {seed}: ended early without success");
            let norm = if end.success { 1.0 - 0.9 * end.steps as f64 / end.max_steps as f64 } else { 0.0 };
            ensure!(end.normalized_return() == norm, "{task} {seed}: normalized return");
            ensure!(log[..log.len() - 1].iter().all(|(_, _, d)| !d), "{task} {seed}: done before the end");
        }
    }
    Ok(format!("{} tasks x {seeds} seeds", Task::ALL.len()))
}

/// Probabilities are the normalized values, argmax takes the first maximum
/// and ignores positive scaling.
pub fn decode_properties(cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for k in 0..cases {
        let n = rng.random_range(1..8);
        let values: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..1.0) })
            .collect();
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let total: f64 = values.iter().sum();
        let d = decode(&values, Mode::Argmax, &mut rng);
        if total <= 0.0 {
            ensure!(d.is_none(), "case {k}: decoded all-zero values");
            continue;
        }
        let d = d.ok_or_else(|| format!("case {k}: no decision"))?;
        ensure!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12, "case {k}: probs do not sum to 1");
        for (p, v) in d.probs.iter().zip(&values) {
            ensure!((p - v / total).abs() < 1e-12, "case {k}: prob {p} for value {v}");
        }
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        let first = values.iter().position(|v| *v == max).unwrap();
        ensure!(d.index == first, "case {k}: argmax {} not {first}", d.index);
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let s = decode(&scaled, Mode::Argmax, &mut rng).unwrap();
        ensure!(s.index == d.index, "case {k}: scaling by {scale} moved argmax");
    }
    Ok(format!("{cases} decodes"))
}
