use std::collections::BTreeSet;

use super::{Clause, GroundAtom, HerbrandBase, LogicError};

/// Applies the immediate-consequence operator `steps` times starting from
/// `facts`. Derived atoms accumulate; a negated literal holds when its atom is
/// absent from the current interpretation.
pub fn boolean_forward_chain(
    clauses: &[Clause],
    facts: &BTreeSet<GroundAtom>,
    steps: usize,
) -> BTreeSet<GroundAtom> {
    let mut current = facts.clone();
    for _ in 0..steps {
        let mut next = current.clone();
        for c in clauses {
            let fires = c
                .body
                .iter()
                .all(|l| current.contains(&l.atom) != l.negated);
            if fires {
                next.insert(c.head.clone());
            }
        }
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Forward chaining compiled against a base, working on boolean vectors.
#[derive(Debug, Clone)]
pub struct ForwardChainer {
    len: usize,
    rules: Vec<(usize, Vec<(usize, bool)>)>,
}

impl ForwardChainer {
    pub fn new(base: &HerbrandBase, clauses: &[Clause]) -> Result<Self, LogicError> {
        let mut rules = Vec::with_capacity(clauses.len());
        for c in clauses {
            c.validate(base)?;
            let head = base.index_of(&c.head).expect("validated");
            let body = c
                .body
                .iter()
                .map(|l| (base.index_of(&l.atom).expect("validated"), l.negated))
                .collect();
            rules.push((head, body));
        }
        Ok(ForwardChainer {
            len: base.len(),
            rules,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Runs to fixpoint (at most `max_steps` rounds) from `facts`.
    pub fn run(&self, facts: &[bool], max_steps: usize) -> Vec<bool> {
        assert_eq!(facts.len(), self.len);
        let mut cur = facts.to_vec();
        for _ in 0..max_steps {
            let mut next = cur.clone();
            let mut changed = false;
            for (head, body) in &self.rules {
                if !next[*head] && body.iter().all(|&(i, neg)| cur[i] != neg) {
                    next[*head] = true;
                    changed = true;
                }
            }
            cur = next;
            if !changed {
                break;
            }
        }
        cur
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{Literal, PredicateKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn atom(name: &str) -> GroundAtom {
        GroundAtom::nullary(name)
    }

    fn set(names: &[&str]) -> BTreeSet<GroundAtom> {
        names.iter().map(|n| atom(n)).collect()
    }

    #[test]
    fn single_rule_fires() {
        let c = Clause::new(atom("h"), vec![Literal::pos(atom("p"))]).unwrap();
        assert_eq!(boolean_forward_chain(&[c], &set(&["p"]), 3), set(&["p", "h"]));
    }

    #[test]
    fn nothing_derivable_from_nothing() {
        let c = Clause::new(atom("h"), vec![Literal::pos(atom("p"))]).unwrap();
        assert!(boolean_forward_chain(&[c], &set(&[]), 3).is_empty());
    }

    /// A random instance: 6 extensional atoms e0..e5, 4 intensional i0..i3,
    /// 8 clauses with 1-2 body literals. Negation only on extensional atoms.
    fn random_instance(rng: &mut ChaCha8Rng, allow_neg: bool) -> (Vec<Clause>, BTreeSet<GroundAtom>) {
        let ext: Vec<GroundAtom> = (0..6).map(|i| atom(&format!("e{i}"))).collect();
        let int: Vec<GroundAtom> = (0..4).map(|i| atom(&format!("i{i}"))).collect();
        let mut clauses = Vec::new();
        while clauses.len() < 8 {
            let head = int[rng.random_range(0..4)].clone();
            let n = rng.random_range(1..=2);
            let mut body = Vec::new();
            for _ in 0..n {
                if rng.random_bool(0.5) {
                    let a = ext[rng.random_range(0..6)].clone();
                    body.push(Literal { atom: a, negated: allow_neg && rng.random_bool(0.3) });
                } else {
                    body.push(Literal::pos(int[rng.random_range(0..4)].clone()));
                }
            }
            if let Ok(c) = Clause::new(head, body) {
                clauses.push(c);
            }
        }
        let facts = ext.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        (clauses, facts)
    }

    /// Least model by brute force: the intersection of every interpretation
    /// that contains the facts and is closed under the clauses. Extensional
    /// atoms are fixed to the facts, so only the 2^4 intensional subsets are
    /// enumerated.
    fn least_model_brute_force(clauses: &[Clause], facts: &BTreeSet<GroundAtom>) -> BTreeSet<GroundAtom> {
        let int: Vec<GroundAtom> = (0..4).map(|i| atom(&format!("i{i}"))).collect();
        let mut model: Option<BTreeSet<GroundAtom>> = None;
        for mask in 0u32..16 {
            let mut interp = facts.clone();
            for (b, a) in int.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    interp.insert(a.clone());
                }
            }
            let closed = clauses.iter().all(|c| {
                !c.body.iter().all(|l| interp.contains(&l.atom) != l.negated) || interp.contains(&c.head)
            });
            if closed {
                model = Some(match model {
                    None => interp,
                    Some(m) => m.intersection(&interp).cloned().collect(),
                });
            }
        }
        model.expect("the full interpretation is always closed")
    }

    #[test]
    fn matches_brute_force_least_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (clauses, facts) = random_instance(&mut rng, true);
            let got = boolean_forward_chain(&clauses, &facts, 10);
            assert_eq!(got, least_model_brute_force(&clauses, &facts));
        }
    }

    #[test]
    fn fixpoint_within_intensional_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (clauses, facts) = random_instance(&mut rng, true);
            let at4 = boolean_forward_chain(&clauses, &facts, 4);
            assert_eq!(at4, boolean_forward_chain(&clauses, &facts, 20));
        }
    }

    #[test]
    fn monotone_for_definite_programs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (clauses, facts) = random_instance(&mut rng, false);
            let mut more = facts.clone();
            more.insert(atom(&format!("e{}", rng.random_range(0..6))));
            let a = boolean_forward_chain(&clauses, &facts, 10);
            let b = boolean_forward_chain(&clauses, &more, 10);
            assert!(a.is_subset(&b));
        }
    }

    #[test]
    fn compiled_chainer_agrees_with_set_version() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut atoms: Vec<(GroundAtom, PredicateKind)> =
            (0..6).map(|i| (atom(&format!("e{i}")), PredicateKind::Extensional)).collect();
        atoms.extend((0..4).map(|i| (atom(&format!("i{i}")), PredicateKind::Intensional)));
        let base = HerbrandBase::from_atoms(atoms).unwrap();
        for _ in 0..100 {
            let (clauses, facts) = random_instance(&mut rng, true);
            let chainer = ForwardChainer::new(&base, &clauses).unwrap();
            let input: Vec<bool> = base.atoms().iter().map(|a| facts.contains(a)).collect();
            let out = chainer.run(&input, 10);
            let expect = boolean_forward_chain(&clauses, &facts, 10);
            for (i, a) in base.atoms().iter().enumerate() {
                assert_eq!(out[i], expect.contains(a));
            }
        }
    }
}
