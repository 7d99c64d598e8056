use std::collections::{BTreeSet, HashMap};

use super::{GroundAtom, LogicError, Predicate, PredicateKind, ValuationVector};

/// Ordered set of ground atoms with a position index.
#[derive(Debug, Clone, PartialEq)]
pub struct HerbrandBase {
    atoms: Vec<GroundAtom>,
    kinds: Vec<PredicateKind>,
    index: HashMap<GroundAtom, usize>,
}

/// Instantiates every predicate with every constant tuple of its arity.
/// Only arities 0 and 1 are supported.
pub fn build_base(
    vocabulary: &[Predicate],
    constants: &[String],
) -> Result<HerbrandBase, LogicError> {
    if vocabulary.is_empty() {
        return Err(LogicError::Vocabulary("empty vocabulary".into()));
    }
    let mut names = BTreeSet::new();
    for p in vocabulary {
        if !names.insert(p.name.as_str()) {
            return Err(LogicError::Vocabulary(format!(
                "duplicate predicate `{}`",
                p.name
            )));
        }
    }
    let mut atoms = Vec::new();
    for p in vocabulary {
        match p.arity {
            0 => atoms.push((GroundAtom::nullary(&p.name), p.kind)),
            1 => {
                if constants.is_empty() {
                    return Err(LogicError::Vocabulary(format!(
                        "unary predicate `{}` but no constants",
                        p.name
                    )));
                }
                for c in constants {
                    atoms.push((GroundAtom::unary(&p.name, c), p.kind));
                }
            }
            n => {
                return Err(LogicError::Vocabulary(format!(
                    "predicate `{}` has arity {n}; only 0 and 1 are supported",
                    p.name
                )))
            }
        }
    }
    HerbrandBase::from_atoms(atoms)
}

impl HerbrandBase {
    /// Builds a base from explicit atoms. Duplicates are rejected; the result
    /// is sorted by (predicate, terms).
    pub fn from_atoms(
        atoms: impl IntoIterator<Item = (GroundAtom, PredicateKind)>,
    ) -> Result<Self, LogicError> {
        let mut pairs: Vec<(GroundAtom, PredicateKind)> = atoms.into_iter().collect();
        pairs.sort();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(LogicError::Vocabulary(format!(
                    "atom {} declared twice",
                    w[0].0
                )));
            }
        }
        let mut kinds_by_pred: HashMap<&str, PredicateKind> = HashMap::new();
        for (a, k) in &pairs {
            if let Some(prev) = kinds_by_pred.insert(a.predicate.as_str(), *k) {
                if prev != *k {
                    return Err(LogicError::Vocabulary(format!(
                        "predicate `{}` is both extensional and intensional",
                        a.predicate
                    )));
                }
            }
        }
        let index = pairs
            .iter()
            .enumerate()
            .map(|(i, (a, _))| (a.clone(), i))
            .collect();
        let (atoms, kinds) = pairs.into_iter().unzip();
        Ok(HerbrandBase {
            atoms,
            kinds,
            index,
        })
    }

    /// A new base holding the atoms of `self` plus `extra`.
    pub fn extended(
        &self,
        extra: impl IntoIterator<Item = (GroundAtom, PredicateKind)>,
    ) -> Result<Self, LogicError> {
        let all = self
            .atoms
            .iter()
            .cloned()
            .zip(self.kinds.iter().copied())
            .chain(extra);
        HerbrandBase::from_atoms(all)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &GroundAtom {
        &self.atoms[i]
    }

    pub fn index_of(&self, atom: &GroundAtom) -> Option<usize> {
        self.index.get(atom).copied()
    }

    pub fn kind(&self, i: usize) -> PredicateKind {
        self.kinds[i]
    }

    pub fn kind_of(&self, atom: &GroundAtom) -> Option<PredicateKind> {
        self.index_of(atom).map(|i| self.kinds[i])
    }

    pub fn is_extensional(&self, i: usize) -> bool {
        self.kinds[i] == PredicateKind::Extensional
    }

    pub fn extensional_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.is_extensional(i))
    }

    pub fn intensional_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| !self.is_extensional(i))
    }

    /// Characteristic vector of a set of atoms. Unknown atoms are ignored.
    pub fn valuation_of<'a>(&self, atoms: impl IntoIterator<Item = &'a GroundAtom>) -> ValuationVector {
        let mut v = ValuationVector::zeros(self.len());
        for a in atoms {
            if let Some(i) = self.index_of(a) {
                v.0[i] = 1.0;
            }
        }
        v
    }

    /// One line per atom: `index kind atom`. Used for hashing and manifests.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        for (i, a) in self.atoms.iter().enumerate() {
            let k = match self.kinds[i] {
                PredicateKind::Extensional => "ext",
                PredicateKind::Intensional => "int",
            };
            out.push_str(&format!("{i} {k} {a}\n"));
        }
        out
    }
}
