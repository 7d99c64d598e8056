use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{softmax, DiffError, TapeGrads, Tape};
use crate::hole::Hole;
use crate::logic::{ClauseLibrary, GroundAtom};

/// Clause weights of one hole, one vector per library head in library order.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleParams {
    pub heads: Vec<GroundAtom>,
    pub weights: Vec<Vec<f64>>,
}

impl HoleParams {
    pub fn zeros(library: &ClauseLibrary) -> Self {
        HoleParams {
            heads: library
                .heads()
                .iter()
                .map(|h| library.base().atom(h.head).clone())
                .collect(),
            weights: library.heads().iter().map(|h| vec![0.0; h.len()]).collect(),
        }
    }

    /// I.i.d. uniform on `[-0.1, 0.1]`.
    pub fn init_uniform(library: &ClauseLibrary, rng: &mut impl Rng) -> Self {
        let mut p = HoleParams::zeros(library);
        for w in &mut p.weights {
            for v in w.iter_mut() {
                *v = rng.random_range(-0.1..=0.1);
            }
        }
        p
    }

    pub fn check(&self, library: &ClauseLibrary) -> Result<(), DiffError> {
        let heads = library.heads();
        if self.weights.len() != heads.len() || self.heads.len() != heads.len() {
            return Err(DiffError::Shape(format!(
                "{} weight vectors for {} library heads",
                self.weights.len(),
                heads.len()
            )));
        }
        for (i, h) in heads.iter().enumerate() {
            if self.heads[i] != *library.base().atom(h.head) {
                return Err(DiffError::Shape(format!(
                    "head {i} is {} in params but {} in library",
                    self.heads[i],
                    library.base().atom(h.head)
                )));
            }
            if self.weights[i].len() != h.len() {
                return Err(DiffError::Shape(format!(
                    "head {} has {} weights for {} candidates",
                    self.heads[i],
                    self.weights[i].len(),
                    h.len()
                )));
            }
        }
        Ok(())
    }

    pub fn position(&self, head: &GroundAtom) -> Option<usize> {
        self.heads.iter().position(|h| h == head)
    }

    pub fn softmax(&self, head_pos: usize) -> Vec<f64> {
        softmax(&self.weights[head_pos])
    }
}

/// Per-hole clause weights plus an update counter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    pub holes: BTreeMap<Hole, HoleParams>,
    pub step: u64,
}

impl ParamStore {
    pub fn init_uniform<'a>(
        libraries: impl IntoIterator<Item = (Hole, &'a ClauseLibrary)>,
        rng: &mut impl Rng,
    ) -> Self {
        let holes = libraries
            .into_iter()
            .map(|(h, lib)| (h, HoleParams::init_uniform(lib, rng)))
            .collect();
        ParamStore { holes, step: 0 }
    }

    pub fn hole(&self, hole: Hole) -> Option<&HoleParams> {
        self.holes.get(&hole)
    }

    pub fn num_weights(&self) -> usize {
        self.holes
            .values()
            .map(|h| h.weights.iter().map(Vec::len).sum::<usize>())
            .sum()
    }
}

/// Dense gradients with the layout of a [`ParamStore`]. Holes that are
/// absent are treated as zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Gradients {
    pub holes: BTreeMap<Hole, Vec<Vec<f64>>>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamStore) -> Self {
        Gradients {
            holes: params
                .holes
                .iter()
                .map(|(h, p)| (*h, p.weights.iter().map(|w| vec![0.0; w.len()]).collect()))
                .collect(),
        }
    }

    /// Gradient of one hole read off a tape; slots are head positions.
    pub fn from_tape(hole: Hole, params: &HoleParams, tape: &Tape, grads: &TapeGrads) -> Self {
        let mut g: Vec<Vec<f64>> = params.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        for (slot, d) in grads.params(tape) {
            for (a, b) in g[slot].iter_mut().zip(d) {
                *a += b;
            }
        }
        let mut holes = BTreeMap::new();
        holes.insert(hole, g);
        Gradients { holes }
    }

    pub fn add_scaled(&mut self, other: &Gradients, k: f64) {
        for (h, og) in &other.holes {
            let mine = self
                .holes
                .entry(*h)
                .or_insert_with(|| og.iter().map(|w| vec![0.0; w.len()]).collect());
            for (a, b) in mine.iter_mut().zip(og) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += k * y;
                }
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for g in self.holes.values_mut() {
            for w in g.iter_mut() {
                for v in w.iter_mut() {
                    *v *= k;
                }
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.holes.values().flat_map(|g| g.iter().flat_map(|w| w.iter().copied()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        AdamState {
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            t: 0,
        }
    }
}

/// One Adam step in the ascent direction. A non-finite gradient leaves
/// parameters and optimizer state untouched and returns `Numerics`.
pub fn policy_update(
    params: &mut ParamStore,
    grads: &Gradients,
    cfg: &AdamConfig,
    state: &mut AdamState,
) -> Result<(), DiffError> {
    if !grads.is_finite() {
        log::warn!("non-finite gradient at update {}; step skipped", params.step);
        return Err(DiffError::Numerics(format!(
            "non-finite gradient at update {}",
            params.step
        )));
    }
    for (hole, g) in &grads.holes {
        let p = params
            .holes
            .get(hole)
            .ok_or_else(|| DiffError::Shape(format!("gradient for missing hole {hole}")))?;
        if p.weights.len() != g.len() || p.weights.iter().zip(g).any(|(a, b)| a.len() != b.len()) {
            return Err(DiffError::Shape(format!("gradient shape mismatch in hole {hole}")));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (hole, p) in params.holes.iter_mut() {
        let zero;
        let g = match grads.holes.get(hole) {
            Some(g) => g,
            None => {
                zero = p.weights.iter().map(|w| vec![0.0; w.len()]).collect::<Vec<_>>();
                &zero
            }
        };
        let m = state
            .m
            .holes
            .entry(*hole)
            .or_insert_with(|| p.weights.iter().map(|w| vec![0.0; w.len()]).collect());
        let v = state
            .v
            .holes
            .entry(*hole)
            .or_insert_with(|| p.weights.iter().map(|w| vec![0.0; w.len()]).collect());
        for i in 0..p.weights.len() {
            for j in 0..p.weights[i].len() {
                let gij = g[i][j];
                m[i][j] = cfg.beta1 * m[i][j] + (1.0 - cfg.beta1) * gij;
                v[i][j] = cfg.beta2 * v[i][j] + (1.0 - cfg.beta2) * gij * gij;
                let mhat = m[i][j] / c1;
                let vhat = v[i][j] / c2;
                p.weights[i][j] += cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
            }
        }
    }
    params.step += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{build_base, enumerate_clauses, LibraryConfig, Predicate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> ParamStore {
        let mut holes = BTreeMap::new();
        holes.insert(
            Hole::How,
            HoleParams {
                heads: vec![GroundAtom::nullary("h")],
                weights: vec![vec![0.2, -0.4]],
            },
        );
        ParamStore { holes, step: 0 }
    }

    fn grad(a: f64, b: f64) -> Gradients {
        let mut holes = BTreeMap::new();
        holes.insert(Hole::How, vec![vec![a, b]]);
        Gradients { holes }
    }

    #[test]
    fn zero_gradient_leaves_weights() {
        let mut p = toy();
        let before = p.clone();
        let mut st = AdamState::new(&p);
        policy_update(&mut p, &grad(0.0, 0.0), &AdamConfig::default(), &mut st).unwrap();
        assert_eq!(p.holes, before.holes);
        assert_eq!(st.t, 1);
        assert_eq!(p.step, 1);
    }

    #[test]
    fn two_steps_match_hand_adam() {
        let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        let mut p = toy();
        let mut st = AdamState::new(&p);
        policy_update(&mut p, &grad(0.5, -2.0), &cfg, &mut st).unwrap();
        policy_update(&mut p, &grad(1.0, 1.0), &cfg, &mut st).unwrap();
        // Hand recurrences, written out per coordinate.
        let hand = |theta0: f64, g1: f64, g2: f64| {
            let m1 = 0.1 * g1;
            let v1 = 0.001 * g1 * g1;
            let th1 = theta0 + 0.1 * (m1 / 0.1) / ((v1 / 0.001).sqrt() + 1e-8);
            let m2 = 0.9 * m1 + 0.1 * g2;
            let v2 = 0.999 * v1 + 0.001 * g2 * g2;
            let mhat = m2 / (1.0 - 0.81);
            let vhat = v2 / (1.0 - 0.999 * 0.999);
            th1 + 0.1 * mhat / (vhat.sqrt() + 1e-8)
        };
        let w = &p.holes[&Hole::How].weights[0];
        assert!((w[0] - hand(0.2, 0.5, 1.0)).abs() < 1e-12);
        assert!((w[1] - hand(-0.4, -2.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn nan_gradient_is_skipped() {
        let mut p = toy();
        let before = p.clone();
        let mut st = AdamState::new(&p);
        let err = policy_update(&mut p, &grad(f64::NAN, 0.0), &AdamConfig::default(), &mut st).unwrap_err();
        assert!(matches!(err, DiffError::Numerics(_)));
        assert_eq!(p, before);
        assert_eq!(st.t, 0);
    }

    #[test]
    fn init_is_in_range_and_seeded() {
        let base = build_base(
            &[Predicate::extensional("p", 0), Predicate::extensional("q", 0), Predicate::intensional("h", 0)],
            &[],
        )
        .unwrap();
        let lib = enumerate_clauses(&base, &[GroundAtom::nullary("h")], LibraryConfig::default()).unwrap();
        let a = HoleParams::init_uniform(&lib, &mut ChaCha8Rng::seed_from_u64(1));
        let b = HoleParams::init_uniform(&lib, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        a.check(&lib).unwrap();
        assert!(a.weights[0].iter().all(|v| (-0.1..=0.1).contains(v)));
    }
}
