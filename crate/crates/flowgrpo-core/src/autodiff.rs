//! Minimal reverse-mode differentiation over the statically known operation
//! set used by the encoder, the flow network, and the post-training losses:
//! linear maps, elementwise tanh/sigmoid/exp, layer norm, softmax over small
//! axes, reductions, and the scalar min/clamp pieces of the clipped
//! surrogate. Every operation has a finite-difference test registered in
//! this module's test suite.
//!
//! Values are column vectors (n x 1), scalars (1 x 1), or parameter matrices
//! (rows x cols). Graphs are built per loss evaluation and dropped after
//! backward; parameter leaves remember their offset into the flat parameter
//! vector so gradients come back as one flat buffer.

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Neg(Var),
    Hadamard(Var, Var),
    DivElem(Var, Var),
    ScaleConst(Var, f64),
    AddConst(Var),
    MulScalar(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    LayerNorm { x: Var, scale: Var, shift: Var, xhat: Vec<f64>, inv_std: f64 },
    Softmax(Var),
    Sum(Var),
    Mean(Var),
    Dot(Var, Var),
    Concat(Vec<Var>),
    Index(Var, usize),
    Min2(Var, Var),
    ClampConst(Var, f64, f64),
}

struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    /// Parameter leaves: (node index, offset into the flat parameter vector).
    params: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node { rows, cols, value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        debug_assert_eq!(self.nodes[v.0].value.len(), 1);
        self.nodes[v.0].value[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        (self.nodes[v.0].rows, self.nodes[v.0].cols)
    }

    fn vec_len(&self, v: Var) -> usize {
        let n = &self.nodes[v.0];
        assert_eq!(n.cols, 1, "expected a column vector, got {}x{}", n.rows, n.cols);
        n.rows
    }

    // ----- leaves -----

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        assert_eq!(value.len(), rows * cols, "constant shape mismatch");
        self.push(rows, cols, value, Op::Leaf)
    }

    pub fn constant_vec(&mut self, value: &[f64]) -> Var {
        self.push(value.len(), 1, value.to_vec(), Op::Leaf)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.push(1, 1, vec![value], Op::Leaf)
    }

    /// Parameter leaf whose gradient lands at `offset` in the flat buffer.
    pub fn param(&mut self, offset: usize, rows: usize, cols: usize, value: &[f64]) -> Var {
        assert_eq!(value.len(), rows * cols, "param shape mismatch");
        let v = self.push(rows, cols, value.to_vec(), Op::Leaf);
        self.params.push((v.0, offset));
        v
    }

    // ----- operations -----

    /// Matrix-vector product `W x`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let (rows, cols) = self.shape(w);
        let n = self.vec_len(x);
        assert_eq!(cols, n, "matvec: {rows}x{cols} times {n}-vector");
        let wv = &self.nodes[w.0].value;
        let xv = &self.nodes[x.0].value;
        let mut out = vec![0.0; rows];
        for r in 0..rows {
            let row = &wv[r * cols..(r + 1) * cols];
            let mut acc = 0.0;
            for c in 0..cols {
                acc += row[c] * xv[c];
            }
            out[r] = acc;
        }
        self.push(rows, 1, out, Op::MatVec(w, x))
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        assert_eq!((ar, ac), (br, bc), "elementwise shape mismatch");
        let out = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| f(*x, *y))
            .collect();
        self.push(ar, ac, out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Hadamard(a, b))
    }

    pub fn div_elem(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x / y, Op::DivElem(a, b))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let (r, c) = self.shape(a);
        let out = self.nodes[a.0].value.iter().map(|x| f(*x)).collect();
        self.push(r, c, out, op)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.map(a, |x| -x, Op::Neg(a))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.map(a, |x| k * x, Op::ScaleConst(a, k))
    }

    pub fn add_const(&mut self, a: Var, k: f64) -> Var {
        self.map(a, |x| x + k, Op::AddConst(a))
    }

    /// Broadcast multiply of a vector by a scalar node.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(self.nodes[s.0].value.len(), 1, "mul_scalar needs a scalar");
        let sv = self.nodes[s.0].value[0];
        self.map(a, |x| sv * x, Op::MulScalar(a, s))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    /// Layer normalization with learned scale and shift.
    pub fn layer_norm(&mut self, x: Var, scale: Var, shift: Var, eps: f64) -> Var {
        let n = self.vec_len(x);
        assert_eq!(self.vec_len(scale), n, "layer_norm scale shape");
        assert_eq!(self.vec_len(shift), n, "layer_norm shift shape");
        let xv = &self.nodes[x.0].value;
        let mean = xv.iter().sum::<f64>() / n as f64;
        let var = xv.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let inv_std = 1.0 / (var + eps).sqrt();
        let xhat: Vec<f64> = xv.iter().map(|v| (v - mean) * inv_std).collect();
        let out: Vec<f64> = xhat
            .iter()
            .zip(self.nodes[scale.0].value.iter().zip(&self.nodes[shift.0].value))
            .map(|(h, (s, b))| h * s + b)
            .collect();
        self.push(n, 1, out, Op::LayerNorm { x, scale, shift, xhat, inv_std })
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let n = self.vec_len(a);
        let av = &self.nodes[a.0].value;
        let max = av.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = av.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let out = exps.iter().map(|e| e / z).collect();
        self.push(n, 1, out, Op::Softmax(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.iter().sum();
        self.push(1, 1, vec![s], Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.nodes[a.0].value.len();
        let s = self.nodes[a.0].value.iter().sum::<f64>() / n as f64;
        self.push(1, 1, vec![s], Op::Mean(a))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let n = self.vec_len(a);
        assert_eq!(self.vec_len(b), n, "dot shape mismatch");
        let s = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x * y)
            .sum();
        self.push(1, 1, vec![s], Op::Dot(a, b))
    }

    /// Squared Euclidean norm, `dot(a, a)`.
    pub fn sq_norm(&mut self, a: Var) -> Var {
        self.dot(a, a)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut out = Vec::new();
        for p in parts {
            self.vec_len(*p);
            out.extend_from_slice(&self.nodes[p.0].value);
        }
        let n = out.len();
        self.push(n, 1, out, Op::Concat(parts.to_vec()))
    }

    pub fn index(&mut self, a: Var, i: usize) -> Var {
        let n = self.vec_len(a);
        assert!(i < n, "index {i} out of range {n}");
        let v = self.nodes[a.0].value[i];
        self.push(1, 1, vec![v], Op::Index(a, i))
    }

    /// Scalar minimum; ties propagate to the first argument.
    pub fn min2(&mut self, a: Var, b: Var) -> Var {
        let av = self.scalar_value(a);
        let bv = self.scalar_value(b);
        self.push(1, 1, vec![av.min(bv)], Op::Min2(a, b))
    }

    /// Elementwise clamp to `[lo, hi]`; gradient is 1 inside the interval
    /// (inclusive) and 0 outside.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.map(a, |x| x.clamp(lo, hi), Op::ClampConst(a, lo, hi))
    }

    // ----- backward -----

    /// Reverse accumulation from a scalar root. Returns per-node gradient
    /// buffers; use [`Gradients::flat_param_grads`] for optimizer input.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.nodes[root.0].value.len(), 1, "backward root must be scalar");
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.accumulate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        fn acc<'a>(
            grads: &'a mut [Option<Vec<f64>>],
            nodes: &[Node],
            v: Var,
        ) -> &'a mut Vec<f64> {
            let len = nodes[v.0].value.len();
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }
        let nodes = &self.nodes;
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatVec(w, x) => {
                let (rows, cols) = (self.nodes[w.0].rows, self.nodes[w.0].cols);
                let wv = &self.nodes[w.0].value;
                let xv = &self.nodes[x.0].value;
                {
                    let gw = grads[w.0].get_or_insert_with(|| vec![0.0; rows * cols]);
                    for r in 0..rows {
                        let gr = g[r];
                        if gr != 0.0 {
                            let row = &mut gw[r * cols..(r + 1) * cols];
                            for c in 0..cols {
                                row[c] += gr * xv[c];
                            }
                        }
                    }
                }
                let gx = grads[x.0].get_or_insert_with(|| vec![0.0; cols]);
                for r in 0..rows {
                    let gr = g[r];
                    if gr != 0.0 {
                        let row = &wv[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            gx[c] += gr * row[c];
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for (ga, gi) in acc(grads, nodes, *a).iter_mut().zip(g) {
                    *ga += gi;
                }
                for (gb, gi) in acc(grads, nodes, *b).iter_mut().zip(g) {
                    *gb += gi;
                }
            }
            Op::Sub(a, b) => {
                for (ga, gi) in acc(grads, nodes, *a).iter_mut().zip(g) {
                    *ga += gi;
                }
                for (gb, gi) in acc(grads, nodes, *b).iter_mut().zip(g) {
                    *gb -= gi;
                }
            }
            Op::Neg(a) => {
                for (ga, gi) in acc(grads, nodes, *a).iter_mut().zip(g) {
                    *ga -= gi;
                }
            }
            Op::Hadamard(a, b) => {
                for ((ga, gi), bi) in
                    acc(grads, nodes, *a).iter_mut().zip(g).zip(&nodes[b.0].value)
                {
                    *ga += gi * bi;
                }
                for ((gb, gi), ai) in
                    acc(grads, nodes, *b).iter_mut().zip(g).zip(&nodes[a.0].value)
                {
                    *gb += gi * ai;
                }
            }
            Op::DivElem(a, b) => {
                for ((ga, gi), bi) in
                    acc(grads, nodes, *a).iter_mut().zip(g).zip(&nodes[b.0].value)
                {
                    *ga += gi / bi;
                }
                for (((gb, gi), ai), bi) in acc(grads, nodes, *b)
                    .iter_mut()
                    .zip(g)
                    .zip(&nodes[a.0].value)
                    .zip(&nodes[b.0].value)
                {
                    *gb -= gi * ai / (bi * bi);
                }
            }
            Op::ScaleConst(a, k) => {
                for (ga, gi) in acc(grads, nodes, *a).iter_mut().zip(g) {
                    *ga += k * gi;
                }
            }
            Op::AddConst(a) => {
                for (ga, gi) in acc(grads, nodes, *a).iter_mut().zip(g) {
                    *ga += gi;
                }
            }
            Op::MulScalar(a, s) => {
                let sv = nodes[s.0].value[0];
                for (ga, gi) in acc(grads, nodes, *a).iter_mut().zip(g) {
                    *ga += sv * gi;
                }
                let gs: f64 = g.iter().zip(&nodes[a.0].value).map(|(gi, ai)| gi * ai).sum();
                acc(grads, nodes, *s)[0] += gs;
            }
            Op::Tanh(a) => {
                for ((ga, gi), y) in acc(grads, nodes, *a).iter_mut().zip(g).zip(&node.value) {
                    *ga += gi * (1.0 - y * y);
                }
            }
            Op::Sigmoid(a) => {
                for ((ga, gi), y) in acc(grads, nodes, *a).iter_mut().zip(g).zip(&node.value) {
                    *ga += gi * y * (1.0 - y);
                }
            }
            Op::Exp(a) => {
                for ((ga, gi), y) in acc(grads, nodes, *a).iter_mut().zip(g).zip(&node.value) {
                    *ga += gi * y;
                }
            }
            Op::LayerNorm { x, scale, shift, xhat, inv_std } => {
                let n = xhat.len();
                {
                    let gsc = acc(grads, nodes, *scale);
                    for i in 0..n {
                        gsc[i] += g[i] * xhat[i];
                    }
                }
                {
                    let gsh = acc(grads, nodes, *shift);
                    for i in 0..n {
                        gsh[i] += g[i];
                    }
                }
                let sv = &nodes[scale.0].value;
                let ghat: Vec<f64> = (0..n).map(|i| g[i] * sv[i]).collect();
                let mean_ghat = ghat.iter().sum::<f64>() / n as f64;
                let mean_gx =
                    ghat.iter().zip(xhat).map(|(gh, xh)| gh * xh).sum::<f64>() / n as f64;
                let gx = acc(grads, nodes, *x);
                for i in 0..n {
                    gx[i] += inv_std * (ghat[i] - mean_ghat - xhat[i] * mean_gx);
                }
            }
            Op::Softmax(a) => {
                let y = &node.value;
                let dot: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                for ((ga, gi), yi) in acc(grads, nodes, *a).iter_mut().zip(g).zip(y) {
                    *ga += yi * (gi - dot);
                }
            }
            Op::Sum(a) => {
                for ga in acc(grads, nodes, *a).iter_mut() {
                    *ga += g[0];
                }
            }
            Op::Mean(a) => {
                let n = nodes[a.0].value.len() as f64;
                for ga in acc(grads, nodes, *a).iter_mut() {
                    *ga += g[0] / n;
                }
            }
            Op::Dot(a, b) => {
                for (ga, bi) in acc(grads, nodes, *a).iter_mut().zip(&nodes[b.0].value) {
                    *ga += g[0] * bi;
                }
                for (gb, ai) in acc(grads, nodes, *b).iter_mut().zip(&nodes[a.0].value) {
                    *gb += g[0] * ai;
                }
            }
            Op::Concat(parts) => {
                let mut off = 0usize;
                for p in parts {
                    let len = nodes[p.0].value.len();
                    let gp = acc(grads, nodes, *p);
                    for i in 0..len {
                        gp[i] += g[off + i];
                    }
                    off += len;
                }
            }
            Op::Index(a, i) => {
                acc(grads, nodes, *a)[*i] += g[0];
            }
            Op::Min2(a, b) => {
                let av = nodes[a.0].value[0];
                let bv = nodes[b.0].value[0];
                if av <= bv {
                    acc(grads, nodes, *a)[0] += g[0];
                } else {
                    acc(grads, nodes, *b)[0] += g[0];
                }
            }
            Op::ClampConst(a, lo, hi) => {
                for ((ga, gi), x) in
                    acc(grads, nodes, *a).iter_mut().zip(g).zip(&nodes[a.0].value)
                {
                    if *x >= *lo && *x <= *hi {
                        *ga += gi;
                    }
                }
            }
        }
    }

    /// Flattens accumulated parameter-leaf gradients into one buffer of
    /// length `flat_len` aligned with the parameter vector.
    pub fn flat_param_grads(&self, grads: &Gradients, flat_len: usize) -> Vec<f64> {
        let mut out = vec![0.0; flat_len];
        for (node_idx, offset) in &self.params {
            if let Some(g) = &grads.grads[*node_idx] {
                out[*offset..*offset + g.len()].iter_mut().zip(g).for_each(|(o, gi)| *o += gi);
            }
        }
        out
    }
}

/// Per-node gradient buffers from one backward pass.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    /// Builds a scalar loss from a flat input vector. The inputs arrive as a
    /// parameter leaf so the flat gradient path is exercised too.
    type LossBuilder = fn(&mut Graph, Var) -> Var;

    /// Central finite differences against the reverse-mode gradient.
    fn check_grad(name: &str, build: LossBuilder, input: &[f64], tol: f64) {
        let n = input.len();
        let eval = |x: &[f64]| -> f64 {
            let mut g = Graph::new();
            let leaf = g.param(0, x.len(), 1, x);
            let loss = build(&mut g, leaf);
            g.scalar_value(loss)
        };
        let mut g = Graph::new();
        let leaf = g.param(0, n, 1, input);
        let loss = build(&mut g, leaf);
        let grads = g.backward(loss);
        let analytic = g.flat_param_grads(&grads, n);

        let h = 1e-6;
        for i in 0..n {
            let mut plus = input.to_vec();
            let mut minus = input.to_vec();
            plus[i] += h;
            minus[i] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let denom = fd.abs().max(analytic[i].abs()).max(1e-8);
            let rel = (fd - analytic[i]).abs() / denom;
            assert!(
                rel < tol,
                "{name}: input {i}: analytic {} vs fd {fd} (rel {rel})",
                analytic[i]
            );
        }
    }

    fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
        rng::normal_vec(&mut rng::stream(seed, "ad-fd"), n)
    }

    // One registered finite-difference test per operation in the set.

    #[test]
    fn fd_matvec() {
        // First 6 elements form a 2x3 matrix, the last 3 the vector.
        check_grad(
            "matvec",
            |g, leaf| {
                let mut w_rows = Vec::new();
                for r in 0..2 {
                    let mut row = Vec::new();
                    for c in 0..3 {
                        row.push(g.index(leaf, r * 3 + c));
                    }
                    w_rows.push(g.concat(&row));
                }
                // Recompose the matrix leaf through concat+index so the whole
                // input stays differentiable, then multiply explicitly.
                let x0 = g.index(leaf, 6);
                let x1 = g.index(leaf, 7);
                let x2 = g.index(leaf, 8);
                let x = g.concat(&[x0, x1, x2]);
                let y0 = g.dot(w_rows[0], x);
                let y1 = g.dot(w_rows[1], x);
                let y = g.concat(&[y0, y1]);
                g.sum(y)
            },
            &rand_vec(9, 1),
            1e-6,
        );
        // And the matvec op proper, with the matrix as the parameter.
        let w = rand_vec(6, 2);
        let x = rand_vec(3, 3);
        let mut g = Graph::new();
        let wl = g.param(0, 2, 3, &w);
        let xl = g.constant_vec(&x);
        let y = g.matvec(wl, xl);
        let loss = g.sum(y);
        let grads = g.backward(loss);
        let got = g.flat_param_grads(&grads, 6);
        let h = 1e-6;
        for i in 0..6 {
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus[i] += h;
            minus[i] -= h;
            let f = |wv: &[f64]| {
                let mut g = Graph::new();
                let wl = g.param(0, 2, 3, wv);
                let xl = g.constant_vec(&x);
                let y = g.matvec(wl, xl);
                let loss = g.sum(y);
                g.scalar_value(loss)
            };
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            assert!((fd - got[i]).abs() < 1e-6, "matvec weight grad {i}");
        }
    }

    #[test]
    fn fd_add_sub_neg() {
        check_grad(
            "add_sub_neg",
            |g, leaf| {
                let a = g.scale(leaf, 1.0);
                let b = g.tanh(leaf);
                let s = g.add(a, b);
                let d = g.sub(s, leaf);
                let n = g.neg(d);
                g.sum(n)
            },
            &rand_vec(5, 4),
            1e-6,
        );
    }

    #[test]
    fn fd_hadamard_div() {
        check_grad(
            "hadamard_div",
            |g, leaf| {
                let a = g.tanh(leaf);
                let b = g.add_const(leaf, 3.0); // keep denominators away from 0
                let m = g.hadamard(a, leaf);
                let d = g.div_elem(m, b);
                g.sum(d)
            },
            &rand_vec(5, 5),
            1e-6,
        );
    }

    #[test]
    fn fd_scale_add_const_mul_scalar() {
        check_grad(
            "scale_mul_scalar",
            |g, leaf| {
                let s = g.mean(leaf);
                let a = g.scale(leaf, -1.7);
                let b = g.add_const(a, 0.3);
                let c = g.mul_scalar(b, s);
                g.sum(c)
            },
            &rand_vec(4, 6),
            1e-6,
        );
    }

    #[test]
    fn fd_tanh_sigmoid_exp() {
        check_grad(
            "tanh_sigmoid_exp",
            |g, leaf| {
                let t = g.tanh(leaf);
                let s = g.sigmoid(t);
                let e = g.exp(s);
                g.mean(e)
            },
            &rand_vec(6, 7),
            1e-6,
        );
    }

    #[test]
    fn fd_layer_norm() {
        check_grad(
            "layer_norm",
            |g, leaf| {
                // Split the leaf into x, scale, shift (3 + 3 + 3).
                let xs: Vec<Var> = (0..3).map(|i| g.index(leaf, i)).collect();
                let ss: Vec<Var> = (3..6).map(|i| g.index(leaf, i)).collect();
                let bs: Vec<Var> = (6..9).map(|i| g.index(leaf, i)).collect();
                let x = g.concat(&xs);
                let sc = g.concat(&ss);
                let sh = g.concat(&bs);
                let y = g.layer_norm(x, sc, sh, 1e-5);
                let w = g.tanh(y);
                g.sum(w)
            },
            &rand_vec(9, 8),
            1e-5,
        );
    }

    #[test]
    fn fd_softmax() {
        check_grad(
            "softmax",
            |g, leaf| {
                let y = g.softmax(leaf);
                let t = g.tanh(leaf);
                let d = g.dot(y, t);
                g.scale(d, 2.0)
            },
            &rand_vec(5, 9),
            1e-6,
        );
    }

    #[test]
    fn fd_reductions_dot_concat_index() {
        check_grad(
            "reductions",
            |g, leaf| {
                let s = g.sum(leaf);
                let m = g.mean(leaf);
                let d = g.dot(leaf, leaf);
                let i0 = g.index(leaf, 0);
                let c = g.concat(&[s, m, d, i0]);
                let t = g.tanh(c);
                g.sum(t)
            },
            &rand_vec(5, 10),
            1e-6,
        );
    }

    #[test]
    fn fd_min2_clamp_away_from_kinks() {
        check_grad(
            "min2_clamp",
            |g, leaf| {
                let a = g.mean(leaf);
                let b = g.sum(leaf);
                let b = g.scale(b, 0.35);
                let b = g.add_const(b, 0.9); // separate the two branches
                let m = g.min2(a, b);
                let e = g.exp(m);
                let cl = g.clamp(e, 0.05, 40.0); // interior for these inputs
                g.scale(cl, 1.3)
            },
            &rand_vec(4, 11),
            1e-6,
        );
    }

    #[test]
    fn clamp_saturates_gradient_outside_interval() {
        let mut g = Graph::new();
        let x = g.param(0, 1, 1, &[2.0]);
        let y = g.clamp(x, -1.0, 1.0);
        let grads = g.backward(y);
        assert_eq!(g.flat_param_grads(&grads, 1), vec![0.0]);
        assert_eq!(g.scalar_value(y), 1.0);
    }

    #[test]
    fn min2_selects_smaller_branch() {
        let mut g = Graph::new();
        let a = g.param(0, 1, 1, &[3.0]);
        let b = g.param(1, 1, 1, &[1.0]);
        let m = g.min2(a, b);
        let grads = g.backward(m);
        assert_eq!(g.flat_param_grads(&grads, 2), vec![0.0, 1.0]);
    }

    #[test]
    fn shared_leaf_gradients_accumulate() {
        // f(x) = sum(x) + sum(x) has gradient 2 everywhere.
        let mut g = Graph::new();
        let x = g.param(0, 3, 1, &[1.0, 2.0, 3.0]);
        let s1 = g.sum(x);
        let s2 = g.sum(x);
        let t = g.add(s1, s2);
        let grads = g.backward(t);
        assert_eq!(g.flat_param_grads(&grads, 3), vec![2.0, 2.0, 2.0]);
    }
}
