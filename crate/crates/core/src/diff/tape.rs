//! A small reverse-mode tape over dense `f64` vectors.
//!
//! Every node holds its forward value. `backward` walks the nodes in reverse
//! and accumulates adjoints; parameter leaves report their gradients by the
//! slot number given at creation.

use super::{prob_sum_unchecked, DiffError};

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(usize),
    Softmax(NodeId),
    Gather(NodeId, Vec<u32>),
    Hadamard(NodeId, NodeId),
    ProbSum(NodeId, NodeId),
    Sum(NodeId),
    Affine(NodeId, f64),
    Concat(Vec<NodeId>),
    Scatter(NodeId, Vec<u32>),
    Log(NodeId),
    Normalize(NodeId),
    Entropy(NodeId),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct TapeGrads {
    adjoints: Vec<Option<Vec<f64>>>,
    params: Vec<(usize, NodeId)>,
}

impl TapeGrads {
    /// Gradient with respect to a node, if anything flowed into it.
    pub fn node(&self, id: NodeId) -> Option<&[f64]> {
        self.adjoints.get(id).and_then(|a| a.as_deref())
    }

    /// `(slot, gradient)` for every parameter leaf, in creation order.
    /// Leaves that received no gradient report zeros.
    pub fn params<'a>(&'a self, tape: &'a Tape) -> impl Iterator<Item = (usize, Vec<f64>)> + 'a {
        self.params.iter().map(move |&(slot, id)| {
            let g = match &self.adjoints[id] {
                Some(g) => g.clone(),
                None => vec![0.0; tape.nodes[id].value.len()],
            };
            (slot, g)
        })
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id].value[0]
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn input(&mut self, value: Vec<f64>) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn param(&mut self, slot: usize, value: &[f64]) -> NodeId {
        self.push(Op::Param(slot), value.to_vec())
    }

    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let v = softmax(&self.nodes[x].value);
        self.push(Op::Softmax(x), v)
    }

    pub fn gather(&mut self, x: NodeId, idx: &[u32]) -> NodeId {
        let src = &self.nodes[x].value;
        let v = idx.iter().map(|&i| src[i as usize]).collect();
        self.push(Op::Gather(x, idx.to_vec()), v)
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.len(), vb.len(), "hadamard shape");
        let v = va.iter().zip(vb).map(|(x, y)| x * y).collect();
        self.push(Op::Hadamard(a, b), v)
    }

    pub fn prob_sum(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.len(), vb.len(), "prob_sum shape");
        let v = va
            .iter()
            .zip(vb)
            .map(|(&x, &y)| prob_sum_unchecked(x, y))
            .collect();
        self.push(Op::ProbSum(a, b), v)
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.nodes[x].value.iter().sum();
        self.push(Op::Sum(x), vec![s])
    }

    /// `scale * x + offset`.
    pub fn affine(&mut self, x: NodeId, scale: f64, offset: f64) -> NodeId {
        let v = self.nodes[x].value.iter().map(|v| scale * v + offset).collect();
        self.push(Op::Affine(x, scale), v)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut v = Vec::new();
        for &p in parts {
            v.extend_from_slice(&self.nodes[p].value);
        }
        self.push(Op::Concat(parts.to_vec()), v)
    }

    /// Zero vector of length `len` with `x[j]` added at `idx[j]`.
    pub fn scatter(&mut self, x: NodeId, idx: &[u32], len: usize) -> NodeId {
        let mut v = vec![0.0; len];
        for (j, &i) in idx.iter().enumerate() {
            v[i as usize] += self.nodes[x].value[j];
        }
        self.push(Op::Scatter(x, idx.to_vec()), v)
    }

    pub fn log(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x].value.iter().map(|v| v.ln()).collect();
        self.push(Op::Log(x), v)
    }

    /// `x / sum(x)`.
    pub fn normalize(&mut self, x: NodeId) -> NodeId {
        let src = &self.nodes[x].value;
        let s: f64 = src.iter().sum();
        let v = src.iter().map(|v| v / s).collect();
        self.push(Op::Normalize(x), v)
    }

    /// `-sum p log p` with `0 log 0 = 0`.
    pub fn entropy(&mut self, p: NodeId) -> NodeId {
        let h = entropy(&self.nodes[p].value);
        self.push(Op::Entropy(p), vec![h])
    }

    /// Reverse pass from scalar seeds `(node, d objective / d node)`.
    pub fn backward(&self, seeds: &[(NodeId, f64)]) -> Result<TapeGrads, DiffError> {
        if seeds.is_empty() {
            return Err(DiffError::Tape("backward called without seed gradients".into()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        for &(id, g) in seeds {
            let node = self
                .nodes
                .get(id)
                .ok_or_else(|| DiffError::Tape(format!("seed node {id} not on tape")))?;
            if node.value.len() != 1 {
                return Err(DiffError::Tape(format!(
                    "seed node {id} is not scalar (length {})",
                    node.value.len()
                )));
            }
            accumulate(&mut adj[id], &[g]);
        }
        let last = seeds.iter().map(|s| s.0).max().unwrap();
        for id in (0..=last).rev() {
            let Some(g) = adj[id].clone() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Input | Op::Param(_) => {}
                Op::Softmax(x) => {
                    let y = &node.value;
                    let dot: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    let d: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi * (gi - dot)).collect();
                    accumulate(&mut adj[*x], &d);
                }
                Op::Gather(x, idx) => {
                    let mut d = vec![0.0; self.nodes[*x].value.len()];
                    for (j, &i) in idx.iter().enumerate() {
                        d[i as usize] += g[j];
                    }
                    accumulate(&mut adj[*x], &d);
                }
                Op::Hadamard(a, b) => {
                    let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let da: Vec<f64> = g.iter().zip(vb).map(|(gi, bi)| gi * bi).collect();
                    let db: Vec<f64> = g.iter().zip(va).map(|(gi, ai)| gi * ai).collect();
                    accumulate(&mut adj[*a], &da);
                    accumulate(&mut adj[*b], &db);
                }
                Op::ProbSum(a, b) => {
                    let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let da: Vec<f64> = g.iter().zip(vb).map(|(gi, bi)| gi * (1.0 - bi)).collect();
                    let db: Vec<f64> = g.iter().zip(va).map(|(gi, ai)| gi * (1.0 - ai)).collect();
                    accumulate(&mut adj[*a], &da);
                    accumulate(&mut adj[*b], &db);
                }
                Op::Sum(x) => {
                    let d = vec![g[0]; self.nodes[*x].value.len()];
                    accumulate(&mut adj[*x], &d);
                }
                Op::Affine(x, scale) => {
                    let d: Vec<f64> = g.iter().map(|gi| gi * scale).collect();
                    accumulate(&mut adj[*x], &d);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.nodes[p].value.len();
                        accumulate(&mut adj[p], &g[off..off + n]);
                        off += n;
                    }
                }
                Op::Scatter(x, idx) => {
                    let d: Vec<f64> = idx.iter().map(|&i| g[i as usize]).collect();
                    accumulate(&mut adj[*x], &d);
                }
                Op::Log(x) => {
                    let vx = &self.nodes[*x].value;
                    let d: Vec<f64> = g.iter().zip(vx).map(|(gi, xi)| gi / xi).collect();
                    accumulate(&mut adj[*x], &d);
                }
                Op::Normalize(x) => {
                    let y = &node.value;
                    let s: f64 = self.nodes[*x].value.iter().sum();
                    let dot: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    let d: Vec<f64> = g.iter().map(|gi| (gi - dot) / s).collect();
                    accumulate(&mut adj[*x], &d);
                }
                Op::Entropy(p) => {
                    let vp = &self.nodes[*p].value;
                    let d: Vec<f64> = vp
                        .iter()
                        .map(|&pi| if pi > 0.0 { -g[0] * (pi.ln() + 1.0) } else { 0.0 })
                        .collect();
                    accumulate(&mut adj[*p], &d);
                }
            }
        }
        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(id, n)| match n.op {
                Op::Param(slot) => Some((slot, id)),
                _ => None,
            })
            .collect();
        Ok(TapeGrads {
            adjoints: adj,
            params,
        })
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, d: &[f64]) {
    match slot {
        Some(v) => {
            for (a, b) in v.iter_mut().zip(d) {
                *a += b;
            }
        }
        None => *slot = Some(d.to_vec()),
    }
}

/// Max-shifted softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn softmax_jacobian_closed_form() {
        let mut t = Tape::new();
        let x = t.param(0, &[0.3, -0.2, 1.1]);
        let s = t.softmax(x);
        let y = t.value(s).to_vec();
        for k in 0..3 {
            let pick = t.gather(s, &[k as u32]);
            let g = t.backward(&[(pick, 1.0)]).unwrap();
            let gx = g.node(x).unwrap();
            for j in 0..3 {
                let delta = if j == k { 1.0 } else { 0.0 };
                assert!(close(gx[j], y[k] * (delta - y[j])));
            }
        }
    }

    #[test]
    fn prob_sum_partials() {
        let mut t = Tape::new();
        let a = t.input(vec![0.3]);
        let b = t.input(vec![0.6]);
        let z = t.prob_sum(a, b);
        assert!(close(t.scalar(z), 0.3 + 0.6 - 0.18));
        let g = t.backward(&[(z, 1.0)]).unwrap();
        assert!(close(g.node(a).unwrap()[0], 0.4));
        assert!(close(g.node(b).unwrap()[0], 0.7));
    }

    #[test]
    fn unseeded_backward_is_an_error() {
        let mut t = Tape::new();
        let x = t.input(vec![1.0]);
        let _ = t.log(x);
        assert!(matches!(t.backward(&[]), Err(DiffError::Tape(_))));
        let v = t.input(vec![1.0, 2.0]);
        assert!(matches!(t.backward(&[(v, 1.0)]), Err(DiffError::Tape(_))));
    }

    #[test]
    fn entropy_gradient_matches_finite_difference() {
        let p0 = [0.2, 0.5, 0.3];
        let mut t = Tape::new();
        let x = t.param(0, &p0);
        let n = t.normalize(x);
        let h = t.entropy(n);
        let g = t.backward(&[(h, 1.0)]).unwrap();
        let gx = g.node(x).unwrap().to_vec();
        let f = |p: &[f64]| {
            let s: f64 = p.iter().sum();
            let q: Vec<f64> = p.iter().map(|v| v / s).collect();
            entropy(&q)
        };
        for j in 0..3 {
            let mut up = p0;
            let mut dn = p0;
            up[j] += 1e-6;
            dn[j] -= 1e-6;
            let fd = (f(&up) - f(&dn)) / 2e-6;
            assert!((fd - gx[j]).abs() < 1e-8, "{fd} vs {}", gx[j]);
        }
    }

    #[test]
    fn scatter_concat_affine_roundtrip() {
        let mut t = Tape::new();
        let x = t.param(3, &[0.1, 0.2]);
        let one = t.input(vec![1.0]);
        let c = t.concat(&[x, one]);
        let a = t.affine(c, -2.0, 1.0);
        let s = t.scatter(a, &[4, 0, 2], 5);
        assert_eq!(t.value(s), &[0.6, 0.0, -1.0, 0.0, 0.8]);
        let total = t.sum(s);
        let g = t.backward(&[(total, 1.0)]).unwrap();
        let params: Vec<_> = g.params(&t).collect();
        assert_eq!(params, vec![(3, vec![-2.0, -2.0])]);
    }
}
