use super::{DiffError, HoleParams, NodeId, Tape};
use crate::logic::{ClauseLibrary, ValuationVector};

pub const DEFAULT_TAU_MAX: usize = 4;

/// Valuations `e^0 ..= e^tau` and their tape nodes.
#[derive(Debug, Clone)]
pub struct DeductionResult {
    pub steps: Vec<ValuationVector>,
    pub nodes: Vec<NodeId>,
}

impl DeductionResult {
    pub fn final_valuation(&self) -> &ValuationVector {
        self.steps.last().expect("at least e^0")
    }

    pub fn final_node(&self) -> NodeId {
        *self.nodes.last().expect("at least e^0")
    }
}

/// Runs `tau_max` soft forward-chaining steps on `tape`.
///
/// Each step computes, for every head, `sum_c softmax(theta)_c * body_c(e)`
/// where a body is the product of its literal values (`1 - v` when negated),
/// and merges it into the previous value with the probabilistic sum.
/// Weights enter the tape as parameter leaves whose slot is the head
/// position in the library.
pub fn deduce(
    tape: &mut Tape,
    e0: &ValuationVector,
    library: &ClauseLibrary,
    params: &HoleParams,
    tau_max: usize,
) -> Result<DeductionResult, DiffError> {
    if tau_max == 0 {
        return Err(DiffError::Shape("tau_max must be at least 1".into()));
    }
    let n = library.base().len();
    if e0.len() != n {
        return Err(DiffError::Shape(format!(
            "valuation of length {} for a base of {n} atoms",
            e0.len()
        )));
    }
    if !e0.in_unit_interval() {
        return Err(DiffError::Domain("initial valuation outside [0, 1]".into()));
    }
    params.check(library)?;

    let heads = library.heads();
    let soft: Vec<NodeId> = heads
        .iter()
        .enumerate()
        .map(|(hp, _)| {
            let w = tape.param(hp, &params.weights[hp]);
            tape.softmax(w)
        })
        .collect();
    let head_idx: Vec<u32> = heads.iter().map(|h| h.head as u32).collect();
    let one = tape.input(vec![1.0]);

    let mut e = tape.input(e0.0.clone());
    let mut result = DeductionResult {
        steps: vec![e0.clone()],
        nodes: vec![e],
    };
    for _ in 0..tau_max {
        let neg = tape.affine(e, -1.0, 1.0);
        let lit = tape.concat(&[e, neg, one]);
        let mut contrib = Vec::with_capacity(heads.len());
        for (hp, h) in heads.iter().enumerate() {
            let slots = h.slots();
            let mut body = tape.gather(lit, &slots[0]);
            for s in &slots[1..] {
                let g = tape.gather(lit, s);
                body = tape.hadamard(body, g);
            }
            let weighted = tape.hadamard(soft[hp], body);
            contrib.push(tape.sum(weighted));
        }
        let c = tape.concat(&contrib);
        let upd = tape.scatter(c, &head_idx, n);
        e = tape.prob_sum(e, upd);
        result.steps.push(ValuationVector(tape.value(e).to_vec()));
        result.nodes.push(e);
    }
    Ok(result)
}

/// A single deduction step without keeping the tape.
pub fn soft_step(
    e_prev: &ValuationVector,
    library: &ClauseLibrary,
    params: &HoleParams,
) -> Result<ValuationVector, DiffError> {
    let mut tape = Tape::new();
    let r = deduce(&mut tape, e_prev, library, params, 1)?;
    Ok(r.final_valuation().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{
        boolean_forward_chain, enumerate_clauses, Clause, GroundAtom, HerbrandBase, LibraryConfig, Literal,
        PredicateKind,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn atom(n: &str) -> GroundAtom {
        GroundAtom::nullary(n)
    }

    fn base_of(ext: &[&str], int: &[&str]) -> HerbrandBase {
        HerbrandBase::from_atoms(
            ext.iter()
                .map(|n| (atom(n), PredicateKind::Extensional))
                .chain(int.iter().map(|n| (atom(n), PredicateKind::Intensional))),
        )
        .unwrap()
    }

    fn one_hot(library: &ClauseLibrary, choice: &[usize]) -> HoleParams {
        let mut p = HoleParams::zeros(library);
        for (hp, &c) in choice.iter().enumerate() {
            for (j, w) in p.weights[hp].iter_mut().enumerate() {
                *w = if j == c { 1000.0 } else { 0.0 };
            }
        }
        p
    }

    #[test]
    fn single_clause_fires() {
        let lib = enumerate_clauses(&base_of(&["p"], &["h"]), &[atom("h")], LibraryConfig { depth: 1, max_body: 1 }).unwrap();
        // Candidates are h :- p and h :- !p; push all mass onto the first.
        let params = one_hot(&lib, &[0]);
        let e = lib.base().valuation_of([&atom("p")]);
        let out = soft_step(&e, &lib, &params).unwrap();
        let h = lib.base().index_of(&atom("h")).unwrap();
        assert_eq!(out.0[h], 1.0);
    }

    #[test]
    fn equal_weights_halve() {
        let lib = enumerate_clauses(&base_of(&["p"], &["h"]), &[atom("h")], LibraryConfig { depth: 1, max_body: 1 }).unwrap();
        let params = HoleParams::zeros(&lib);
        let e = lib.base().valuation_of([&atom("p")]);
        let out = soft_step(&e, &lib, &params).unwrap();
        let h = lib.base().index_of(&atom("h")).unwrap();
        assert_eq!(out.0[h], 0.5);
    }

    #[test]
    fn shape_errors() {
        let lib = enumerate_clauses(&base_of(&["p"], &["h"]), &[atom("h")], LibraryConfig::default()).unwrap();
        let params = HoleParams::zeros(&lib);
        assert!(matches!(
            soft_step(&ValuationVector::zeros(7), &lib, &params),
            Err(DiffError::Shape(_))
        ));
        let mut bad = params.clone();
        bad.weights[0].pop();
        assert!(matches!(
            soft_step(&ValuationVector::zeros(2), &lib, &bad),
            Err(DiffError::Shape(_))
        ));
    }

    #[test]
    fn chain_of_two_needs_two_steps() {
        // h2 :- h1 at layer 1 is modelled as depth 2 with h1 the aux atom.
        let base = base_of(&["p"], &["h2"]);
        let lib = enumerate_clauses(&base, &[atom("h2")], LibraryConfig { depth: 2, max_body: 1 }).unwrap();
        let aux = atom("h2_aux00");
        let h1 = Clause::new(aux.clone(), vec![Literal::pos(atom("p"))]).unwrap();
        let h2 = Clause::new(atom("h2"), vec![Literal::pos(aux.clone())]).unwrap();
        let mut params = HoleParams::zeros(&lib);
        for c in [&h1, &h2] {
            let (hp, cand) = lib.find(c).unwrap();
            params.weights[hp][cand] = 1000.0;
        }
        let e = lib.base().valuation_of([&atom("p")]);
        let i2 = lib.base().index_of(&atom("h2")).unwrap();
        let mut t = Tape::new();
        let one = deduce(&mut t, &e, &lib, &params, 1).unwrap();
        assert_eq!(one.final_valuation().0[i2], 0.0);
        let two = deduce(&mut t, &e, &lib, &params, 2).unwrap();
        assert_eq!(two.final_valuation().0[i2], 1.0);
    }

    #[test]
    fn one_hot_reproduces_boolean_chain() {
        let ext = ["a", "b", "c", "d"];
        let base = base_of(&ext, &["h", "g"]);
        let lib = enumerate_clauses(&base, &[atom("g"), atom("h")], LibraryConfig { depth: 2, max_body: 2 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let choice: Vec<usize> = lib.heads().iter().map(|h| rng.random_range(0..h.len())).collect();
            let params = one_hot(&lib, &choice);
            let clauses: Vec<Clause> = choice.iter().enumerate().map(|(hp, &c)| lib.clause(hp, c)).collect();
            let facts: BTreeSet<GroundAtom> = ext.iter().filter(|_| rng.random_bool(0.5)).map(|n| atom(n)).collect();
            let e0 = lib.base().valuation_of(&facts);
            let mut t = Tape::new();
            let soft = deduce(&mut t, &e0, &lib, &params, DEFAULT_TAU_MAX).unwrap();
            let hard = boolean_forward_chain(&clauses, &facts, DEFAULT_TAU_MAX);
            let expect = lib.base().valuation_of(&hard);
            assert_eq!(soft.final_valuation(), &expect);
        }
    }
}
