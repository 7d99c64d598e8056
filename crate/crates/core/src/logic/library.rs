use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Clause, GroundAtom, HerbrandBase, Literal, LogicError, PredicateKind};

/// Candidate body: `(atom index, negated)` pairs sorted by atom index.
pub type Body = Vec<(usize, bool)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryConfig {
    /// Number of layers. Depth 1 puts every target head in layer 0.
    pub depth: usize,
    /// Maximum number of literals per candidate body.
    pub max_body: usize,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig {
            depth: 1,
            max_body: 2,
        }
    }
}

/// Candidate clauses for one intensional head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadCandidates {
    pub head: usize,
    pub layer: usize,
    pub bodies: Vec<Body>,
    /// Literal-slot gather indices into `[e, 1 - e, 1]`, see
    /// [`ClauseLibrary::literal_slots`].
    slots: Vec<Vec<u32>>,
}

impl HeadCandidates {
    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }

    pub fn slots(&self) -> &[Vec<u32>] {
        &self.slots
    }
}

/// Layered candidate set. Layer-0 bodies mention only extensional atoms;
/// a layer-k head may also use its own auxiliary atoms from layer k-1.
#[derive(Debug, Clone, PartialEq)]
pub struct ClauseLibrary {
    base: HerbrandBase,
    heads: Vec<HeadCandidates>,
    targets: Vec<usize>,
    config: LibraryConfig,
}

fn aux_atom(head: &GroundAtom, layer: usize, i: usize) -> GroundAtom {
    let mut name = head.predicate.clone();
    for t in &head.terms {
        name.push('_');
        name.push_str(t);
    }
    GroundAtom::nullary(format!("{name}_aux{layer}{i}"))
}

/// Every subset of `pool` of size `1..=max`, with both polarities for atoms
/// in `negatable`.
fn subsets(pool: &[usize], negatable: &[bool], max: usize, must_touch: Option<&[usize]>) -> Vec<Body> {
    let mut out = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    fn rec(
        start: usize,
        pool: &[usize],
        max: usize,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if !chosen.is_empty() {
            out.push(chosen.clone());
        }
        if chosen.len() == max {
            return;
        }
        for j in start..pool.len() {
            chosen.push(j);
            rec(j + 1, pool, max, chosen, out);
            chosen.pop();
        }
    }
    let mut picks = Vec::new();
    rec(0, pool, max, &mut chosen, &mut picks);
    for pick in picks {
        if let Some(req) = must_touch {
            if !pick.iter().any(|&j| req.contains(&pool[j])) {
                continue;
            }
        }
        let neg_slots: Vec<usize> = pick.iter().copied().filter(|&j| negatable[j]).collect();
        for mask in 0..(1u32 << neg_slots.len()) {
            let mut body: Body = pick.iter().map(|&j| (pool[j], false)).collect();
            for (bit, slot) in neg_slots.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    let pos = pick.iter().position(|j| j == slot).unwrap();
                    body[pos].1 = true;
                }
            }
            body.sort();
            out.push(body);
        }
    }
    out
}

fn body_key(body: &Body) -> (Vec<usize>, Vec<bool>) {
    (
        body.iter().map(|(i, _)| *i).collect(),
        body.iter().map(|(_, n)| *n).collect(),
    )
}

/// Builds the layered candidate library for `heads` over `base`.
pub fn enumerate_clauses(
    base: &HerbrandBase,
    heads: &[GroundAtom],
    config: LibraryConfig,
) -> Result<ClauseLibrary, LogicError> {
    if config.depth == 0 {
        return Err(LogicError::Config("depth must be at least 1".into()));
    }
    if config.max_body == 0 {
        return Err(LogicError::Config("body-size cap must be at least 1".into()));
    }
    if heads.is_empty() {
        return Err(LogicError::Config("no target heads".into()));
    }
    for h in heads {
        match base.kind_of(h) {
            Some(PredicateKind::Intensional) => {}
            Some(PredicateKind::Extensional) => {
                return Err(LogicError::Vocabulary(format!("head {h} is extensional")))
            }
            None => return Err(LogicError::Vocabulary(format!("head {h} not in base"))),
        }
    }
    if base.extensional_indices().next().is_none() {
        return Err(LogicError::Config(
            "no extensional atoms: candidate bodies would be empty".into(),
        ));
    }

    let mut aux = Vec::new();
    for h in heads {
        for layer in 0..config.depth - 1 {
            for i in 0..2 {
                aux.push((aux_atom(h, layer, i), PredicateKind::Intensional));
            }
        }
    }
    let lib_base = base.extended(aux)?;
    let ext: Vec<usize> = lib_base.extensional_indices().collect();
    let n = lib_base.len();

    let mut ext_bodies = subsets(&ext, &vec![true; ext.len()], config.max_body, None);
    ext_bodies.sort_by_key(body_key);

    let mut per_layer: Vec<Vec<HeadCandidates>> = vec![Vec::new(); config.depth];
    for h in heads {
        for layer in 0..config.depth {
            let owners: Vec<GroundAtom> = if layer + 1 == config.depth {
                vec![h.clone()]
            } else {
                (0..2).map(|i| aux_atom(h, layer, i)).collect()
            };
            let bodies = if layer == 0 {
                ext_bodies.clone()
            } else {
                let prev: Vec<usize> = (0..2)
                    .map(|i| lib_base.index_of(&aux_atom(h, layer - 1, i)).unwrap())
                    .collect();
                let mut pool = prev.clone();
                pool.extend(&ext);
                pool.sort();
                let negatable: Vec<bool> = pool.iter().map(|&i| lib_base.is_extensional(i)).collect();
                let mut b = ext_bodies.clone();
                b.extend(subsets(&pool, &negatable, config.max_body, Some(&prev)));
                b.sort_by_key(body_key);
                b
            };
            for owner in owners {
                let head = lib_base.index_of(&owner).unwrap();
                let slots = literal_slots(&bodies, n, config.max_body);
                per_layer[layer].push(HeadCandidates {
                    head,
                    layer,
                    bodies: bodies.clone(),
                    slots,
                });
            }
        }
    }
    let mut flat = Vec::new();
    for mut layer in per_layer {
        layer.sort_by_key(|h| h.head);
        flat.extend(layer);
    }
    let mut targets: Vec<usize> = heads
        .iter()
        .map(|h| {
            let idx = lib_base.index_of(h).unwrap();
            flat.iter().position(|c| c.head == idx).unwrap()
        })
        .collect();
    targets.sort_by_key(|&t| flat[t].head);
    targets.dedup();

    Ok(ClauseLibrary {
        base: lib_base,
        heads: flat,
        targets,
        config,
    })
}

/// Gather indices per literal slot. Literal `(i, neg)` maps to `i + neg * n`
/// in `[e, 1 - e, 1]`; missing slots map to the trailing constant 1.
fn literal_slots(bodies: &[Body], n: usize, max_body: usize) -> Vec<Vec<u32>> {
    let width = bodies.iter().map(|b| b.len()).max().unwrap_or(0).min(max_body.max(1));
    (0..width)
        .map(|slot| {
            bodies
                .iter()
                .map(|b| match b.get(slot) {
                    Some(&(i, neg)) => (i + if neg { n } else { 0 }) as u32,
                    None => (2 * n) as u32,
                })
                .collect()
        })
        .collect()
}

impl ClauseLibrary {
    pub fn base(&self) -> &HerbrandBase {
        &self.base
    }

    pub fn config(&self) -> LibraryConfig {
        self.config
    }

    /// All heads with candidates, layer by layer. Parameter stores use this
    /// order.
    pub fn heads(&self) -> &[HeadCandidates] {
        &self.heads
    }

    /// Positions in [`heads`](Self::heads) of the requested target heads,
    /// sorted by atom.
    pub fn target_positions(&self) -> &[usize] {
        &self.targets
    }

    pub fn target_atoms(&self) -> Vec<&GroundAtom> {
        self.targets
            .iter()
            .map(|&t| self.base.atom(self.heads[t].head))
            .collect()
    }

    pub fn num_layers(&self) -> usize {
        self.config.depth
    }

    pub fn layer(&self, k: usize) -> impl Iterator<Item = &HeadCandidates> {
        self.heads.iter().filter(move |h| h.layer == k)
    }

    pub fn head_position(&self, atom: &GroundAtom) -> Option<usize> {
        let idx = self.base.index_of(atom)?;
        self.heads.iter().position(|h| h.head == idx)
    }

    pub fn clause(&self, head_pos: usize, cand: usize) -> Clause {
        let h = &self.heads[head_pos];
        Clause {
            head: self.base.atom(h.head).clone(),
            body: h.bodies[cand]
                .iter()
                .map(|&(i, neg)| Literal {
                    atom: self.base.atom(i).clone(),
                    negated: neg,
                })
                .collect(),
        }
    }

    pub fn clauses_of(&self, head_pos: usize) -> impl Iterator<Item = Clause> + '_ {
        (0..self.heads[head_pos].len()).map(move |c| self.clause(head_pos, c))
    }

    pub fn num_candidates(&self) -> usize {
        self.heads.iter().map(|h| h.len()).sum()
    }

    /// Locates a clause by identity. Returns `(head position, candidate)`.
    pub fn find(&self, clause: &Clause) -> Option<(usize, usize)> {
        let hp = self.head_position(&clause.head)?;
        let mut body: Body = Vec::with_capacity(clause.body.len());
        for l in &clause.body {
            body.push((self.base.index_of(&l.atom)?, l.negated));
        }
        body.sort();
        let cand = self.heads[hp].bodies.iter().position(|b| *b == body)?;
        Some((hp, cand))
    }

    /// Map from clause to `(head position, candidate)` for bulk lookups.
    pub fn clause_index(&self) -> HashMap<Clause, (usize, usize)> {
        let mut m = HashMap::new();
        for hp in 0..self.heads.len() {
            for (c, clause) in self.clauses_of(hp).enumerate() {
                m.insert(clause, (hp, c));
            }
        }
        m
    }

    /// Checks that each layer only refers to extensional atoms and to heads
    /// defined in earlier layers, and that negation stays extensional.
    pub fn check_stratification(&self) -> Result<(), LogicError> {
        let layer_of: HashMap<usize, usize> = self.heads.iter().map(|h| (h.head, h.layer)).collect();
        for h in &self.heads {
            for body in &h.bodies {
                for &(i, neg) in body {
                    if self.base.is_extensional(i) {
                        continue;
                    }
                    if neg {
                        return Err(LogicError::Config(format!(
                            "negated intensional atom {} in layer {}",
                            self.base.atom(i),
                            h.layer
                        )));
                    }
                    match layer_of.get(&i) {
                        Some(&l) if l < h.layer => {}
                        _ => {
                            return Err(LogicError::Config(format!(
                                "layer {} body uses {} which is not defined below it",
                                h.layer,
                                self.base.atom(i)
                            )))
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Stable content hash over the base listing and every candidate clause.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.base.listing().as_bytes());
        for hp in 0..self.heads.len() {
            for clause in self.clauses_of(hp) {
                hasher.update(clause.to_string().as_bytes());
                hasher.update(b"\n");
            }
        }
        hex::encode(hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{build_base, Predicate};

    fn pq_base() -> HerbrandBase {
        build_base(
            &[
                Predicate::extensional("p", 0),
                Predicate::extensional("q", 0),
                Predicate::intensional("h", 0),
            ],
            &[],
        )
        .unwrap()
    }

    fn texts(lib: &ClauseLibrary, hp: usize) -> Vec<String> {
        lib.clauses_of(hp).map(|c| c.to_string()).collect()
    }

    #[test]
    fn two_atoms_one_head_full_list() {
        let lib = enumerate_clauses(&pq_base(), &[GroundAtom::nullary("h")], LibraryConfig::default()).unwrap();
        assert_eq!(lib.heads().len(), 1);
        // Oracle: subsets {p}, {p,q}, {q} in index order, each with every
        // negation mask, ordered by (indices, flags).
        assert_eq!(
            texts(&lib, 0),
            vec![
                "h :- p.",
                "h :- !p.",
                "h :- p, q.",
                "h :- p, !q.",
                "h :- !p, q.",
                "h :- !p, !q.",
                "h :- q.",
                "h :- !q.",
            ]
        );
    }

    #[test]
    fn no_extensional_atoms_is_config_error() {
        let base = build_base(&[Predicate::intensional("h", 0)], &[]).unwrap();
        let err = enumerate_clauses(&base, &[GroundAtom::nullary("h")], LibraryConfig::default()).unwrap_err();
        assert!(matches!(err, LogicError::Config(_)));
    }

    #[test]
    fn zero_depth_or_cap_is_config_error() {
        let heads = [GroundAtom::nullary("h")];
        for cfg in [
            LibraryConfig { depth: 0, max_body: 2 },
            LibraryConfig { depth: 1, max_body: 0 },
        ] {
            assert!(matches!(
                enumerate_clauses(&pq_base(), &heads, cfg),
                Err(LogicError::Config(_))
            ));
        }
    }

    #[test]
    fn depth_two_composes_four_literal_bodies() {
        let base = HerbrandBase::from_atoms(vec![
            (GroundAtom::unary("has_key", "agent"), PredicateKind::Extensional),
            (GroundAtom::unary("has_key", "env"), PredicateKind::Extensional),
            (GroundAtom::unary("is_open", "door"), PredicateKind::Extensional),
            (GroundAtom::unary("is_agent", "agent"), PredicateKind::Extensional),
            (GroundAtom::unary("is_env", "env"), PredicateKind::Extensional),
            (GroundAtom::nullary("gt_key"), PredicateKind::Intensional),
        ])
        .unwrap();
        let lib = enumerate_clauses(
            &base,
            &[GroundAtom::nullary("gt_key")],
            LibraryConfig { depth: 2, max_body: 2 },
        )
        .unwrap();
        lib.check_stratification().unwrap();
        let a0 = GroundAtom::nullary("gt_key_aux00");
        let a1 = GroundAtom::nullary("gt_key_aux01");
        // gt_key :- !has_key(agent), is_agent(agent), has_key(env), is_env(env)
        // as two layer-0 pairs joined at layer 1.
        let left = Clause::new(
            a0.clone(),
            vec![
                Literal::neg(GroundAtom::unary("has_key", "agent")),
                Literal::pos(GroundAtom::unary("is_agent", "agent")),
            ],
        )
        .unwrap();
        let right = Clause::new(
            a1.clone(),
            vec![
                Literal::pos(GroundAtom::unary("has_key", "env")),
                Literal::pos(GroundAtom::unary("is_env", "env")),
            ],
        )
        .unwrap();
        let top = Clause::new(
            GroundAtom::nullary("gt_key"),
            vec![Literal::pos(a0), Literal::pos(a1)],
        )
        .unwrap();
        for c in [&left, &right, &top] {
            assert!(lib.find(c).is_some(), "missing {c}");
        }
        assert_eq!(lib.layer(0).count(), 2);
        assert_eq!(lib.layer(1).count(), 1);
        assert_eq!(lib.target_positions(), &[2]);
    }

    #[test]
    fn ordering_is_deterministic_and_hash_stable() {
        let a = enumerate_clauses(&pq_base(), &[GroundAtom::nullary("h")], LibraryConfig { depth: 3, max_body: 2 }).unwrap();
        let b = enumerate_clauses(&pq_base(), &[GroundAtom::nullary("h")], LibraryConfig { depth: 3, max_body: 2 }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        a.check_stratification().unwrap();
        let c = enumerate_clauses(&pq_base(), &[GroundAtom::nullary("h")], LibraryConfig::default()).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn slots_index_literal_vector() {
        let lib = enumerate_clauses(&pq_base(), &[GroundAtom::nullary("h")], LibraryConfig::default()).unwrap();
        let n = lib.base().len() as u32;
        let h = &lib.heads()[0];
        // "h :- !p." -> slot0 = p + n, slot1 = constant one.
        assert_eq!(h.slots()[0][1], lib.base().index_of(&GroundAtom::nullary("p")).unwrap() as u32 + n);
        assert_eq!(h.slots()[1][1], 2 * n);
    }
}
