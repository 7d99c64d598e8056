use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use crate::diff::{deduce, DiffError, Gradients, ParamStore, Tape};
use crate::grounding::TaskVocabulary;
use crate::hole::Hole;
use crate::logic::{Clause, ClauseLibrary, ForwardChainer, HerbrandBase, LogicError, ValuationVector};

/// Head values of one hole on one input, with optional gradients of
/// `log p_i` (per head) and of the entropy with respect to the hole's
/// weights.
#[derive(Debug, Clone)]
pub struct HoleEval {
    pub values: Vec<f64>,
    pub log_grads: Vec<Option<Vec<Vec<f64>>>>,
    pub entropy_grad: Option<Vec<Vec<f64>>>,
}

struct HoleMap {
    /// Vocabulary base position -> library base position.
    to_lib: Vec<usize>,
    /// Library base positions of the target heads, in vocabulary head order.
    targets: Vec<usize>,
}

fn hole_map(vocab_base: &HerbrandBase, heads: &[crate::logic::GroundAtom], lib_base: &HerbrandBase) -> Result<HoleMap, LogicError> {
    let missing = |a: &crate::logic::GroundAtom| LogicError::Vocabulary(format!("{a} missing from library base"));
    let to_lib = vocab_base
        .atoms()
        .iter()
        .map(|a| lib_base.index_of(a).ok_or_else(|| missing(a)))
        .collect::<Result<_, _>>()?;
    let targets = heads
        .iter()
        .map(|a| lib_base.index_of(a).ok_or_else(|| missing(a)))
        .collect::<Result<_, _>>()?;
    Ok(HoleMap { to_lib, targets })
}

fn key(input: &ValuationVector) -> Vec<bool> {
    input.0.iter().map(|v| *v >= 0.5).collect()
}

/// Soft deduction over learned weights, memoized per boolean input. The
/// cache is only valid for the parameter snapshot it was built with.
pub struct LearnedPolicy<'a> {
    params: &'a ParamStore,
    libraries: &'a BTreeMap<Hole, ClauseLibrary>,
    tau_max: usize,
    grads: bool,
    maps: BTreeMap<Hole, HoleMap>,
    cache: RefCell<HashMap<(Hole, Vec<bool>), Rc<HoleEval>>>,
}

impl<'a> LearnedPolicy<'a> {
    pub fn new(
        params: &'a ParamStore,
        libraries: &'a BTreeMap<Hole, ClauseLibrary>,
        vocab: &TaskVocabulary,
        tau_max: usize,
        grads: bool,
    ) -> Result<Self, DiffError> {
        let mut maps = BTreeMap::new();
        for (h, lib) in libraries {
            let v = vocab.hole(*h);
            let m = hole_map(&v.base, &v.heads, lib.base()).map_err(|e| DiffError::Shape(e.to_string()))?;
            params
                .hole(*h)
                .ok_or_else(|| DiffError::Shape(format!("no weights for the {h} hole")))?
                .check(lib)?;
            maps.insert(*h, m);
        }
        Ok(LearnedPolicy {
            params,
            libraries,
            tau_max,
            grads,
            maps,
            cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn params(&self) -> &ParamStore {
        self.params
    }

    pub fn covers(&self, hole: Hole) -> bool {
        self.maps.contains_key(&hole)
    }

    /// Evaluates the hole on a boolean input over its vocabulary base.
    pub fn eval(&self, hole: Hole, input: &ValuationVector) -> Result<Rc<HoleEval>, DiffError> {
        let k = (hole, key(input));
        if let Some(e) = self.cache.borrow().get(&k) {
            return Ok(e.clone());
        }
        let e = Rc::new(self.compute(hole, input)?);
        self.cache.borrow_mut().insert(k, e.clone());
        Ok(e)
    }

    /// Cached evaluation for a recorded input, if any.
    pub fn cached(&self, hole: Hole, input: &[bool]) -> Option<Rc<HoleEval>> {
        self.cache.borrow().get(&(hole, input.to_vec())).cloned()
    }

    fn compute(&self, hole: Hole, input: &ValuationVector) -> Result<HoleEval, DiffError> {
        let lib = &self.libraries[&hole];
        let map = &self.maps[&hole];
        let hp = self.params.hole(hole).expect("checked in new");
        let mut e0 = ValuationVector::zeros(lib.base().len());
        for (i, v) in input.0.iter().enumerate() {
            e0.0[map.to_lib[i]] = *v;
        }
        let mut tape = Tape::new();
        let r = deduce(&mut tape, &e0, lib, hp, self.tau_max)?;
        let idx: Vec<u32> = map.targets.iter().map(|&i| i as u32).collect();
        let heads = tape.gather(r.final_node(), &idx);
        let values = tape.value(heads).to_vec();
        let n = values.len();
        let mut out = HoleEval {
            values,
            log_grads: vec![None; n],
            entropy_grad: None,
        };
        if !self.grads || out.values.iter().sum::<f64>() <= 0.0 {
            return Ok(out);
        }
        let p = tape.normalize(heads);
        let logp = tape.log(p);
        let ent = tape.entropy(p);
        let grad_of = |tape: &Tape, node| -> Result<Vec<Vec<f64>>, DiffError> {
            let g = tape.backward(&[(node, 1.0)])?;
            Ok(Gradients::from_tape(hole, hp, tape, &g).holes.remove(&hole).unwrap())
        };
        for i in 0..n {
            if out.values[i] > 0.0 {
                let li = tape.gather(logp, &[i as u32]);
                out.log_grads[i] = Some(grad_of(&tape, li)?);
            }
        }
        out.entropy_grad = Some(grad_of(&tape, ent)?);
        Ok(out)
    }
}

/// Boolean evaluation of a literal clause set.
#[derive(Debug, Clone)]
pub struct LiteralHole {
    chainer: ForwardChainer,
    to_base: Vec<usize>,
    targets: Vec<usize>,
    len: usize,
    steps: usize,
}

impl LiteralHole {
    pub fn new(vocab: &TaskVocabulary, hole: Hole, base: &HerbrandBase, clauses: &[Clause]) -> Result<Self, LogicError> {
        let v = vocab.hole(hole);
        let m = hole_map(&v.base, &v.heads, base)?;
        Ok(LiteralHole {
            chainer: ForwardChainer::new(base, clauses)?,
            to_base: m.to_lib,
            targets: m.targets,
            len: base.len(),
            steps: base.intensional_indices().count().max(1),
        })
    }

    /// 0/1 value of each target head.
    pub fn values(&self, input: &ValuationVector) -> Vec<f64> {
        let mut facts = vec![false; self.len];
        for (i, v) in input.0.iter().enumerate() {
            facts[self.to_base[i]] = *v >= 0.5;
        }
        let out = self.chainer.run(&facts, self.steps);
        self.targets.iter().map(|&t| if out[t] { 1.0 } else { 0.0 }).collect()
    }
}
