//! Tape of recorded ops. Nodes are appended in evaluation order, so a reverse
//! sweep over the node list is a valid topological order for backprop.

use super::{AutodiffError, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    AddRow(Var, Var),
    MatMul(Var, Var),
    Tanh(Var),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Pick(Var, Vec<Option<usize>>),
    GatherRows(Var, Vec<usize>),
    SegmentMean(Var, Vec<(usize, usize)>),
    Sum(Var),
    Mean(Var),
    Dot(Var, Var),
    L2Norm(Var),
    CosDist(Var, Var),
    /// Per-row softmax probabilities are cached for the backward pass.
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        weights: Vec<f64>,
        probs: Vec<f64>,
    },
    Reshape(Var),
    Transpose(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Dynamic reverse-mode tape. Build one per forward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), AutodiffError> {
    if a.shape() != b.shape() {
        return Err(AutodiffError::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = (x - max).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

fn log_softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    for (o, &x) in out.iter_mut().zip(row) {
        *o = x - lse;
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let grad = Tensor::zeros(value.shape());
        self.nodes.push(Node {
            value,
            grad,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].grad
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad.fill(0.0);
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("add", x, y)?;
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p + q).collect();
        let t = Tensor::new(x.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("sub", x, y)?;
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p - q).collect();
        let t = Tensor::new(x.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("mul", x, y)?;
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let t = Tensor::new(x.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let x = self.value(a);
        let t = Tensor::from_fn(x.shape(), |i| x.data()[i] * c);
        let rg = self.rg(a);
        self.push(t, Op::Scale(a, c), rg)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let x = self.value(a);
        let t = Tensor::from_fn(x.shape(), |i| x.data()[i] + c);
        let rg = self.rg(a);
        self.push(t, Op::AddScalar(a), rg)
    }

    /// `a (m x n) + b (n)` with `b` added to every row.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        let (m, n) = x.dims2();
        if x.rank() != 2 || y.numel() != n {
            return Err(AutodiffError::ShapeMismatch {
                op: "add_row",
                lhs: x.shape().to_vec(),
                rhs: y.shape().to_vec(),
            });
        }
        let yd = y.data();
        let data = (0..m * n).map(|i| x.data()[i] + yd[i % n]).collect();
        let t = Tensor::matrix(m, n, data);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::AddRow(a, b), rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.rank() != 2 || y.rank() != 2 || x.shape()[1] != y.shape()[0] {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                lhs: x.shape().to_vec(),
                rhs: y.shape().to_vec(),
            });
        }
        let (m, k) = x.dims2();
        let n = y.shape()[1];
        let t = Tensor::matrix(m, n, matmul_raw(x.data(), y.data(), m, k, n));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::MatMul(a, b), rg))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let x = self.value(a);
        let t = Tensor::from_fn(x.shape(), |i| f(x.data()[i]));
        let rg = self.rg(a);
        self.push(t, op, rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let (m, n) = x.dims2();
        let mut out = vec![0.0; m * n];
        for r in 0..m {
            softmax_row(x.row(r), &mut out[r * n..(r + 1) * n]);
        }
        let t = Tensor::new(x.shape().to_vec(), out).expect("same numel");
        let rg = self.rg(a);
        self.push(t, Op::Softmax(a), rg)
    }

    /// Log-softmax along the last axis.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let (m, n) = x.dims2();
        let mut out = vec![0.0; m * n];
        for r in 0..m {
            log_softmax_row(x.row(r), &mut out[r * n..(r + 1) * n]);
        }
        let t = Tensor::new(x.shape().to_vec(), out).expect("same numel");
        let rg = self.rg(a);
        self.push(t, Op::LogSoftmax(a), rg)
    }

    /// Selects `a[r, idx[r]]` per row into an `m x 1` column; `None` yields 0
    /// and blocks the gradient (masked position).
    pub fn pick(&mut self, a: Var, idx: &[Option<usize>]) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        let (m, n) = x.dims2();
        if idx.len() != m {
            return Err(AutodiffError::ShapeMismatch {
                op: "pick",
                lhs: x.shape().to_vec(),
                rhs: vec![idx.len()],
            });
        }
        let mut out = Vec::with_capacity(m);
        for (r, i) in idx.iter().enumerate() {
            match *i {
                Some(i) if i >= n => {
                    return Err(AutodiffError::IndexOutOfRange {
                        op: "pick",
                        index: i,
                        bound: n,
                    })
                }
                Some(i) => out.push(x.data()[r * n + i]),
                None => out.push(0.0),
            }
        }
        let t = Tensor::matrix(m, 1, out);
        let rg = self.rg(a);
        Ok(self.push(t, Op::Pick(a, idx.to_vec()), rg))
    }

    /// Rows of `table` at `ids`, stacked into `len x d` (embedding lookup).
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var, AutodiffError> {
        let x = self.value(table);
        if x.rank() != 2 {
            return Err(AutodiffError::InvalidShape {
                op: "gather_rows",
                shape: x.shape().to_vec(),
                expected: "rank-2 table",
            });
        }
        let (v, d) = x.dims2();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(AutodiffError::IndexOutOfRange {
                    op: "gather_rows",
                    index: id,
                    bound: v,
                });
            }
            out.extend_from_slice(x.row(id));
        }
        let t = Tensor::matrix(ids.len(), d, out);
        let rg = self.rg(table);
        Ok(self.push(t, Op::GatherRows(table, ids.to_vec()), rg))
    }

    /// Mean of each half-open row range `[start, end)` of `a`.
    pub fn segment_mean(&mut self, a: Var, segs: &[(usize, usize)]) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        let (m, n) = x.dims2();
        let mut out = vec![0.0; segs.len() * n];
        for (s, &(lo, hi)) in segs.iter().enumerate() {
            if lo >= hi || hi > m {
                return Err(AutodiffError::InvalidShape {
                    op: "segment_mean",
                    shape: vec![lo, hi, m],
                    expected: "non-empty segment within rows",
                });
            }
            let inv = 1.0 / (hi - lo) as f64;
            for r in lo..hi {
                for (o, v) in out[s * n..(s + 1) * n].iter_mut().zip(x.row(r)) {
                    *o += v * inv;
                }
            }
        }
        let t = Tensor::matrix(segs.len(), n, out);
        let rg = self.rg(a);
        Ok(self.push(t, Op::SegmentMean(a, segs.to_vec()), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let s = x.data().iter().sum::<f64>() / x.numel() as f64;
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Mean(a), rg)
    }

    /// Inner product of two same-shape tensors, flattened.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("dot", x, y)?;
        let s = dot_raw(x.data(), y.data());
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b), rg))
    }

    pub fn l2_norm(&mut self, a: Var) -> Var {
        let s = self.value(a).norm();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::L2Norm(a), rg)
    }

    /// `1 - a.b / (|a| |b|)` over flattened operands.
    pub fn cos_dist(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("cos_dist", x, y)?;
        let d = cosine_distance(x.data(), y.data())?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::scalar(d), Op::CosDist(a, b), rg))
    }

    /// Mean cross-entropy of `logits (m x C)` against integer labels.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, AutodiffError> {
        let m = labels.len().max(1);
        let w = vec![1.0 / m as f64; labels.len()];
        self.weighted_cross_entropy(logits, labels, &w)
    }

    /// `sum_i w_i * CE(logits_i, labels_i)`.
    pub fn weighted_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        weights: &[f64],
    ) -> Result<Var, AutodiffError> {
        let x = self.value(logits);
        let (m, c) = x.dims2();
        if x.rank() != 2 || labels.len() != m || weights.len() != m {
            return Err(AutodiffError::ShapeMismatch {
                op: "cross_entropy",
                lhs: x.shape().to_vec(),
                rhs: vec![labels.len(), weights.len()],
            });
        }
        let mut probs = vec![0.0; m * c];
        let mut logp = vec![0.0; c];
        let mut loss = 0.0;
        for r in 0..m {
            if labels[r] >= c {
                return Err(AutodiffError::IndexOutOfRange {
                    op: "cross_entropy",
                    index: labels[r],
                    bound: c,
                });
            }
            log_softmax_row(x.row(r), &mut logp);
            loss -= weights[r] * logp[labels[r]];
            for (p, l) in probs[r * c..(r + 1) * c].iter_mut().zip(&logp) {
                *p = l.exp();
            }
        }
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                weights: weights.to_vec(),
                probs,
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, AutodiffError> {
        let t = self.value(a).clone().reshaped(shape)?;
        let rg = self.rg(a);
        Ok(self.push(t, Op::Reshape(a), rg))
    }

    /// Matrix transpose.
    pub fn transpose(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if x.rank() != 2 {
            return Err(AutodiffError::InvalidShape {
                op: "transpose",
                shape: x.shape().to_vec(),
                expected: "rank-2 tensor",
            });
        }
        let (m, n) = x.dims2();
        let d = x.data();
        let t = Tensor::matrix(n, m, (0..m * n).map(|k| d[(k % m) * n + k / m]).collect());
        let rg = self.rg(a);
        Ok(self.push(t, Op::Transpose(a), rg))
    }

    /// Reverse sweep from a scalar root. Gradients accumulate into each
    /// node's `grad` across calls until [`Graph::zero_grads`].
    pub fn backward(&mut self, root: Var) -> Result<(), AutodiffError> {
        let rv = &self.nodes[root.0].value;
        if rv.numel() != 1 {
            return Err(AutodiffError::NonScalarRoot {
                shape: rv.shape().to_vec(),
            });
        }
        let mut adj: Vec<Option<Vec<f64>>> = (0..=root.0).map(|_| None).collect();
        adj[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut adj);
            self.nodes[i]
                .grad
                .data_mut()
                .iter_mut()
                .zip(&g)
                .for_each(|(a, b)| *a += b);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let y = node.value.data();
        // Adds `f(k)` into the adjoint of `v` for every element k.
        let mut acc = |v: Var, f: &dyn Fn(usize) -> f64| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let n = self.nodes[v.0].value.numel();
            let slot = adj[v.0].get_or_insert_with(|| vec![0.0; n]);
            for (k, s) in slot.iter_mut().enumerate() {
                *s += f(k);
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, &|k| g[k]);
                acc(*b, &|k| g[k]);
            }
            Op::Sub(a, b) => {
                acc(*a, &|k| g[k]);
                acc(*b, &|k| -g[k]);
            }
            Op::Mul(a, b) => {
                let (x, z) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &|k| g[k] * z[k]);
                acc(*b, &|k| g[k] * x[k]);
            }
            Op::Scale(a, c) => acc(*a, &|k| g[k] * c),
            Op::AddScalar(a) | Op::Reshape(a) => acc(*a, &|k| g[k]),
            Op::Transpose(a) => {
                // node is n x m; element k of the input (m x n) maps to (k % n) * m + k / n
                let (n, m) = node.value.dims2();
                acc(*a, &|k| g[(k % n) * m + k / n])
            }
            Op::AddRow(a, b) => {
                let (m, n) = node.value.dims2();
                acc(*a, &|k| g[k]);
                let mut col = vec![0.0; n];
                for r in 0..m {
                    for c in 0..n {
                        col[c] += g[r * n + c];
                    }
                }
                acc(*b, &|k| col[k]);
            }
            Op::MatMul(a, b) => {
                let (xa, xb) = (self.value(*a), self.value(*b));
                let (m, k) = xa.dims2();
                let n = xb.shape()[1];
                if self.nodes[a.0].requires_grad {
                    // dA = G B^T
                    let mut da = vec![0.0; m * k];
                    let bd = xb.data();
                    for r in 0..m {
                        for c in 0..n {
                            let gv = g[r * n + c];
                            if gv == 0.0 {
                                continue;
                            }
                            for j in 0..k {
                                da[r * k + j] += gv * bd[j * n + c];
                            }
                        }
                    }
                    acc(*a, &|q| da[q]);
                }
                if self.nodes[b.0].requires_grad {
                    // dB = A^T G
                    let mut db = vec![0.0; k * n];
                    let ad = xa.data();
                    for r in 0..m {
                        for j in 0..k {
                            let av = ad[r * k + j];
                            if av == 0.0 {
                                continue;
                            }
                            for c in 0..n {
                                db[j * n + c] += av * g[r * n + c];
                            }
                        }
                    }
                    acc(*b, &|q| db[q]);
                }
            }
            Op::Tanh(a) => acc(*a, &|k| g[k] * (1.0 - y[k] * y[k])),
            Op::Relu(a) => {
                let x = self.value(*a).data();
                acc(*a, &|k| if x[k] > 0.0 { g[k] } else { 0.0 })
            }
            Op::Sigmoid(a) => acc(*a, &|k| g[k] * y[k] * (1.0 - y[k])),
            Op::Exp(a) => acc(*a, &|k| g[k] * y[k]),
            Op::Softmax(a) => {
                // Pairwise form y_k sum_j y_j (g_k - g_j): no cancellation
                // against the mean when the row is nearly one-hot.
                let (_, n) = node.value.dims2();
                acc(*a, &|k| {
                    let r = k / n * n;
                    let centered: f64 = (r..r + n).map(|j| y[j] * (g[k] - g[j])).sum();
                    y[k] * centered
                });
            }
            Op::LogSoftmax(a) => {
                let (m, n) = node.value.dims2();
                let sums: Vec<f64> = (0..m).map(|r| g[r * n..(r + 1) * n].iter().sum()).collect();
                acc(*a, &|k| g[k] - y[k].exp() * sums[k / n]);
            }
            Op::Pick(a, idx) => {
                let (_, n) = self.value(*a).dims2();
                acc(*a, &|k| match idx[k / n] {
                    Some(j) if j == k % n => g[k / n],
                    _ => 0.0,
                });
            }
            Op::GatherRows(t, ids) => {
                let (v, d) = self.value(*t).dims2();
                let mut dt = vec![0.0; v * d];
                for (r, &id) in ids.iter().enumerate() {
                    for c in 0..d {
                        dt[id * d + c] += g[r * d + c];
                    }
                }
                acc(*t, &|k| dt[k]);
            }
            Op::SegmentMean(a, segs) => {
                let (m, n) = self.value(*a).dims2();
                let mut da = vec![0.0; m * n];
                for (s, &(lo, hi)) in segs.iter().enumerate() {
                    let inv = 1.0 / (hi - lo) as f64;
                    for r in lo..hi {
                        for c in 0..n {
                            da[r * n + c] += g[s * n + c] * inv;
                        }
                    }
                }
                acc(*a, &|k| da[k]);
            }
            Op::Sum(a) => acc(*a, &|_| g[0]),
            Op::Mean(a) => {
                let n = self.value(*a).numel() as f64;
                acc(*a, &|_| g[0] / n)
            }
            Op::Dot(a, b) => {
                let (x, z) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &|k| g[0] * z[k]);
                acc(*b, &|k| g[0] * x[k]);
            }
            Op::L2Norm(a) => {
                let x = self.value(*a).data();
                let nrm = y[0];
                acc(*a, &|k| if nrm > 0.0 { g[0] * x[k] / nrm } else { 0.0 });
            }
            Op::CosDist(a, b) => {
                let (x, z) = (self.value(*a).data(), self.value(*b).data());
                let da = cosine_distance_grad(x, z);
                let db = cosine_distance_grad(z, x);
                acc(*a, &|k| g[0] * da[k]);
                acc(*b, &|k| g[0] * db[k]);
            }
            Op::CrossEntropy {
                logits,
                labels,
                weights,
                probs,
            } => {
                let (_, c) = self.value(*logits).dims2();
                acc(*logits, &|k| {
                    let r = k / c;
                    let onehot = if labels[r] == k % c { 1.0 } else { 0.0 };
                    g[0] * weights[r] * (probs[k] - onehot)
                });
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn dot_raw(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major `(m x k) * (k x n)`.
pub fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for r in 0..m {
        for j in 0..k {
            let av = a[r * k + j];
            if av == 0.0 {
                continue;
            }
            let brow = &b[j * n..(j + 1) * n];
            for (o, bv) in out[r * n..(r + 1) * n].iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `1 - a.b / (|a| |b|)`; fails when either operand has zero norm.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64, AutodiffError> {
    let na = dot_raw(a, a).sqrt();
    let nb = dot_raw(b, b).sqrt();
    if na == 0.0 {
        return Err(AutodiffError::ZeroNorm {
            op: "cos_dist",
            side: "lhs",
        });
    }
    if nb == 0.0 {
        return Err(AutodiffError::ZeroNorm {
            op: "cos_dist",
            side: "rhs",
        });
    }
    let cos = (dot_raw(a, b) / (na * nb)).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}

/// Gradient of `cosine_distance(a, b)` with respect to `a`.
pub fn cosine_distance_grad(a: &[f64], b: &[f64]) -> Vec<f64> {
    let na = dot_raw(a, a).sqrt();
    let nb = dot_raw(b, b).sqrt();
    let ab = dot_raw(a, b);
    a.iter()
        .zip(b)
        .map(|(x, y)| -(y / (na * nb) - ab * x / (na * na * na * nb)))
        .collect()
}
