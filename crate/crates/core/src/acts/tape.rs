//! Minimal reverse-mode differentiation over dense row-major 2-D tensors.
//!
//! Nodes are appended in evaluation order, so the backward sweep is a single pass over the
//! node list in reverse.

use std::rc::Rc;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "tensor shape mismatch");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn scalar(v: f64) -> Self {
        Self::new(1, 1, vec![v])
    }

    pub fn row(data: Vec<f64>) -> Self {
        Self::new(1, data.len(), data)
    }

    pub fn column(data: Vec<f64>) -> Self {
        Self::new(data.len(), 1, data)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1);
        self.data[0]
    }
}

/// `c (+)= op(a) op(b)` where `op` optionally transposes; shapes are given after `op`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    // Row-major storage: a is m x k (or k x m when transposed).
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    if k == 0 {
        if !accumulate {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices hold at least the addressed elements for these strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bcast {
    Same,
    Scalar,
    Row,
    Col,
}

fn bcast_kind(a: &Tensor, b: &Tensor) -> Bcast {
    if a.shape() == b.shape() {
        Bcast::Same
    } else if b.rows == 1 && b.cols == 1 {
        Bcast::Scalar
    } else if b.rows == 1 && b.cols == a.cols {
        Bcast::Row
    } else if b.cols == 1 && b.rows == a.rows {
        Bcast::Col
    } else {
        panic!("cannot broadcast {:?} onto {:?}", b.shape(), a.shape());
    }
}

fn bidx(kind: Bcast, cols: usize, i: usize) -> usize {
    match kind {
        Bcast::Same => i,
        Bcast::Scalar => 0,
        Bcast::Row => i % cols,
        Bcast::Col => i / cols,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unary {
    Exp,
    Log,
    Sigmoid,
    Relu,
    Abs,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Binary(Binary, Var, Var, Bcast),
    Unary(Unary, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    Conv1d {
        x: Var,
        kernel: Var,
        bias: Var,
    },
    MeanPool {
        a: Var,
        group: usize,
    },
    MeanAll(Var),
    Gather {
        a: Var,
        idx: Rc<Vec<usize>>,
    },
    Attend {
        q: Var,
        k: Var,
        v: Var,
        weights: Rc<Vec<f64>>,
    },
    Holt {
        alpha_raw: Var,
        beta_raw: Var,
        sens: Rc<Vec<[f64; 2]>>,
    },
    Stack(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints from one backward sweep, indexed by [`Var`].
#[derive(Debug)]
pub struct Grads {
    adj: Vec<Option<Tensor>>,
}

impl Grads {
    /// Gradient of the output with respect to `v` (zeros if `v` did not contribute).
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.adj[v.0].as_ref()
    }
}

fn acc(slot: &mut Option<Tensor>, rows: usize, cols: usize) -> &mut Tensor {
    slot.get_or_insert_with(|| Tensor::zeros(rows, cols))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        let bc = bcast_kind(ta, tb);
        let cols = ta.cols;
        let data = ta
            .data
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let y = tb.data[bidx(bc, cols, i)];
                match kind {
                    Binary::Add => x + y,
                    Binary::Sub => x - y,
                    Binary::Mul => x * y,
                    Binary::Div => x / y,
                    Binary::Max => x.max(y),
                }
            })
            .collect();
        let out = Tensor::new(ta.rows, ta.cols, data);
        self.push(out, Op::Binary(kind, a, b, bc))
    }

    /// Elementwise ops; `b` may be a scalar, a row vector or a column vector broadcast onto `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(Binary::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.binary(Binary::Div, a, b)
    }

    pub fn max(&mut self, a: Var, b: Var) -> Var {
        self.binary(Binary::Max, a, b)
    }

    fn unary(&mut self, kind: Unary, a: Var) -> Var {
        let t = self.value(a);
        let data = t
            .data
            .iter()
            .map(|&x| match kind {
                Unary::Exp => x.exp(),
                Unary::Log => x.ln(),
                Unary::Sigmoid => sigmoid(x),
                Unary::Relu => x.max(0.0),
                Unary::Abs => x.abs(),
            })
            .collect();
        let out = Tensor::new(t.rows, t.cols, data);
        self.push(out, Op::Unary(kind, a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(Unary::Exp, a)
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(Unary::Log, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(Unary::Sigmoid, a)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(Unary::Relu, a)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(Unary::Abs, a)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let t = self.value(a);
        let out = Tensor::new(t.rows, t.cols, t.data.iter().map(|x| x * k).collect());
        self.push(out, Op::Scale(a, k))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.cols, tb.rows, "matmul shape mismatch");
        let mut out = Tensor::zeros(ta.rows, tb.cols);
        gemm(
            ta.rows,
            ta.cols,
            tb.cols,
            &ta.data,
            false,
            &tb.data,
            false,
            &mut out.data,
            false,
        );
        self.push(out, Op::MatMul(a, b))
    }

    /// Single-channel 1-D convolution, stride 1, zero "same" padding, odd kernel width.
    ///
    /// `x` is `n x L` (one sequence per row), `kernel` is `w x C`, `bias` is `1 x C`; the
    /// output is `(n L) x C` with rows ordered sequence-major.
    pub fn conv1d(&mut self, x: Var, kernel: Var, bias: Var) -> Var {
        let (tx, tk, tb) = (self.value(x), self.value(kernel), self.value(bias));
        assert!(tk.rows % 2 == 1, "kernel width must be odd");
        assert_eq!(tb.shape(), (1, tk.cols));
        let cols = im2col(tx, tk.rows);
        let rows = tx.rows * tx.cols;
        let mut out = Tensor::zeros(rows, tk.cols);
        gemm(
            rows,
            tk.rows,
            tk.cols,
            &cols,
            false,
            &tk.data,
            false,
            &mut out.data,
            false,
        );
        for r in 0..rows {
            for c in 0..tk.cols {
                out.data[r * tk.cols + c] += tb.data[c];
            }
        }
        self.push(out, Op::Conv1d { x, kernel, bias })
    }

    /// Mean over consecutive groups of `group` rows.
    pub fn mean_pool(&mut self, a: Var, group: usize) -> Var {
        let t = self.value(a);
        assert!(group > 0 && t.rows % group == 0);
        let n = t.rows / group;
        let mut out = Tensor::zeros(n, t.cols);
        for r in 0..t.rows {
            for c in 0..t.cols {
                out.data[(r / group) * t.cols + c] += t.data[r * t.cols + c] / group as f64;
            }
        }
        self.push(out, Op::MeanPool { a, group })
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let m = t.data.iter().sum::<f64>() / t.data.len() as f64;
        self.push(Tensor::scalar(m), Op::MeanAll(a))
    }

    /// `out[k] = a.data[idx[k]]`, reshaped to `rows x cols`.
    pub fn gather(&mut self, a: Var, idx: Vec<usize>, rows: usize, cols: usize) -> Var {
        let t = self.value(a);
        let data = idx.iter().map(|&i| t.data[i]).collect();
        let out = Tensor::new(rows, cols, data);
        self.push(out, Op::Gather { a, idx: Rc::new(idx) })
    }

    /// Masked dot-product attention: row `i` of the output is `Σ_j softmax_j(q_i·k_j) v_j`
    /// over keys with `mask[i * m + j]` set. Rows without any allowed key produce zeros.
    pub fn attend(&mut self, q: Var, k: Var, v: Var, mask: &[bool]) -> Var {
        let (tq, tk, tv) = (self.value(q), self.value(k), self.value(v));
        let (n, d) = tq.shape();
        let m = tk.rows;
        assert_eq!(tk.cols, d);
        assert_eq!(tv.rows, m);
        assert_eq!(mask.len(), n * m);
        let mut scores = vec![0.0; n * m];
        gemm(n, d, m, &tq.data, false, &tk.data, true, &mut scores, false);
        let weights = masked_softmax(&scores, mask, n, m);
        let mut out = Tensor::zeros(n, tv.cols);
        gemm(n, m, tv.cols, &weights, false, &tv.data, false, &mut out.data, false);
        self.push(
            out,
            Op::Attend {
                q,
                k,
                v,
                weights: Rc::new(weights),
            },
        )
    }

    /// Stacks tensors with equal column counts vertically.
    pub fn stack(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let t = self.value(*p);
            assert_eq!(t.cols, cols, "stack column mismatch");
            rows += t.rows;
            data.extend_from_slice(&t.data);
        }
        self.push(Tensor::new(rows, cols, data), Op::Stack(parts.to_vec()))
    }

    /// Holt linear smoothing of the fixed series `y` with `α = σ(alpha_raw)`,
    /// `β = σ(beta_raw)`, level seeded at `y_0` and trend at `y_1 - y_0`.
    /// Output is `2 x T`: levels in row 0, trends in row 1.
    pub fn holt(&mut self, alpha_raw: Var, beta_raw: Var, y: &[f64]) -> Var {
        let a = sigmoid(self.value(alpha_raw).item());
        let b = sigmoid(self.value(beta_raw).item());
        let (da, db) = (a * (1.0 - a), b * (1.0 - b));
        let t_len = y.len();
        assert!(t_len >= 2, "Holt smoothing needs two points");
        let mut level = vec![0.0; t_len];
        let mut trend = vec![0.0; t_len];
        // Forward sensitivities with respect to (α, β).
        let mut dl = vec![[0.0; 2]; t_len];
        let mut dt = vec![[0.0; 2]; t_len];
        level[0] = y[0];
        trend[0] = y[1] - y[0];
        for t in 1..t_len {
            let pred = level[t - 1] + trend[t - 1];
            level[t] = a * y[t] + (1.0 - a) * pred;
            trend[t] = b * (level[t] - level[t - 1]) + (1.0 - b) * trend[t - 1];
            for s in 0..2 {
                let dpred = dl[t - 1][s] + dt[t - 1][s];
                let mut l = (1.0 - a) * dpred;
                if s == 0 {
                    l += y[t] - pred;
                }
                dl[t][s] = l;
                let mut tr = b * (dl[t][s] - dl[t - 1][s]) + (1.0 - b) * dt[t - 1][s];
                if s == 1 {
                    tr += level[t] - level[t - 1] - trend[t - 1];
                }
                dt[t][s] = tr;
            }
        }
        let mut sens: Vec<[f64; 2]> = dl.iter().chain(&dt).copied().collect();
        for s in sens.iter_mut() {
            s[0] *= da;
            s[1] *= db;
        }
        let mut data = level;
        data.extend(trend);
        let out = Tensor::new(2, t_len, data);
        self.push(
            out,
            Op::Holt {
                alpha_raw,
                beta_raw,
                sens: Rc::new(sens),
            },
        )
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, out: Var) -> Grads {
        assert_eq!(self.value(out).data.len(), 1, "backward needs a scalar output");
        let mut adj: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        adj[out.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=out.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Binary(kind, a, b, bc) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let cols = ta.cols;
                    let mut ga = vec![0.0; ta.data.len()];
                    let mut gb = vec![0.0; tb.data.len()];
                    for i in 0..ta.data.len() {
                        let j = bidx(*bc, cols, i);
                        let (x, y, gi) = (ta.data[i], tb.data[j], g.data[i]);
                        let (dx, dy) = match kind {
                            Binary::Add => (1.0, 1.0),
                            Binary::Sub => (1.0, -1.0),
                            Binary::Mul => (y, x),
                            Binary::Div => (1.0 / y, -x / (y * y)),
                            Binary::Max => {
                                if x >= y {
                                    (1.0, 0.0)
                                } else {
                                    (0.0, 1.0)
                                }
                            }
                        };
                        ga[i] += gi * dx;
                        gb[j] += gi * dy;
                    }
                    add_into(&mut adj[a.0], ta.rows, ta.cols, &ga);
                    add_into(&mut adj[b.0], tb.rows, tb.cols, &gb);
                }
                Op::Unary(kind, a) => {
                    let ta = self.value(*a);
                    let y = &node.value.data;
                    let ga: Vec<f64> = ta
                        .data
                        .iter()
                        .enumerate()
                        .map(|(i, &x)| {
                            let d = match kind {
                                Unary::Exp => y[i],
                                Unary::Log => 1.0 / x,
                                Unary::Sigmoid => y[i] * (1.0 - y[i]),
                                Unary::Relu => {
                                    if x > 0.0 {
                                        1.0
                                    } else {
                                        0.0
                                    }
                                }
                                Unary::Abs => {
                                    if x >= 0.0 {
                                        1.0
                                    } else {
                                        -1.0
                                    }
                                }
                            };
                            g.data[i] * d
                        })
                        .collect();
                    add_into(&mut adj[a.0], ta.rows, ta.cols, &ga);
                }
                Op::Scale(a, k) => {
                    let ga: Vec<f64> = g.data.iter().map(|v| v * k).collect();
                    add_into(&mut adj[a.0], g.rows, g.cols, &ga);
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.rows, ta.cols, tb.cols);
                    let ga = acc(&mut adj[a.0], m, k);
                    gemm(m, n, k, &g.data, false, &tb.data, true, &mut ga.data, true);
                    let gb = acc(&mut adj[b.0], k, n);
                    gemm(k, m, n, &ta.data, true, &g.data, false, &mut gb.data, true);
                }
                Op::Conv1d { x, kernel, bias } => {
                    let (tx, tk) = (self.value(*x), self.value(*kernel));
                    let w = tk.rows;
                    let c = tk.cols;
                    let rows = tx.rows * tx.cols;
                    let cols = im2col(tx, w);
                    let gk = acc(&mut adj[kernel.0], w, c);
                    gemm(w, rows, c, &cols, true, &g.data, false, &mut gk.data, true);
                    let gb = acc(&mut adj[bias.0], 1, c);
                    for r in 0..rows {
                        for j in 0..c {
                            gb.data[j] += g.data[r * c + j];
                        }
                    }
                    let mut gcols = vec![0.0; rows * w];
                    gemm(rows, c, w, &g.data, false, &tk.data, true, &mut gcols, false);
                    let gx = acc(&mut adj[x.0], tx.rows, tx.cols);
                    col2im_add(&gcols, tx.rows, tx.cols, w, &mut gx.data);
                }
                Op::MeanPool { a, group } => {
                    let ta = self.value(*a);
                    let cols = ta.cols;
                    let ga = acc(&mut adj[a.0], ta.rows, cols);
                    for r in 0..ta.rows {
                        for c in 0..cols {
                            ga.data[r * cols + c] += g.data[(r / group) * cols + c] / *group as f64;
                        }
                    }
                }
                Op::MeanAll(a) => {
                    let ta = self.value(*a);
                    let k = g.data[0] / ta.data.len() as f64;
                    let ga = acc(&mut adj[a.0], ta.rows, ta.cols);
                    ga.data.iter_mut().for_each(|v| *v += k);
                }
                Op::Gather { a, idx } => {
                    let ta = self.value(*a);
                    let ga = acc(&mut adj[a.0], ta.rows, ta.cols);
                    for (k, &i) in idx.iter().enumerate() {
                        ga.data[i] += g.data[k];
                    }
                }
                Op::Attend { q, k, v, weights } => {
                    let (tq, tk, tv) = (self.value(*q), self.value(*k), self.value(*v));
                    let (n, d) = tq.shape();
                    let m = tk.rows;
                    let dv = tv.cols;
                    // dV = Wᵀ G
                    let gv = acc(&mut adj[v.0], m, dv);
                    gemm(m, n, dv, weights, true, &g.data, false, &mut gv.data, true);
                    // dW = G Vᵀ, then the softmax Jacobian.
                    let mut gw = vec![0.0; n * m];
                    gemm(n, dv, m, &g.data, false, &tv.data, true, &mut gw, false);
                    for i in 0..n {
                        let row = &weights[i * m..(i + 1) * m];
                        let grow = &mut gw[i * m..(i + 1) * m];
                        let dotp: f64 = row.iter().zip(grow.iter()).map(|(a, b)| a * b).sum();
                        for j in 0..m {
                            grow[j] = row[j] * (grow[j] - dotp);
                        }
                    }
                    let gq = acc(&mut adj[q.0], n, d);
                    gemm(n, m, d, &gw, false, &tk.data, false, &mut gq.data, true);
                    let gk = acc(&mut adj[k.0], m, d);
                    gemm(m, n, d, &gw, true, &tq.data, false, &mut gk.data, true);
                }
                Op::Holt {
                    alpha_raw,
                    beta_raw,
                    sens,
                } => {
                    let (mut ga, mut gb) = (0.0, 0.0);
                    for (gi, s) in g.data.iter().zip(sens.iter()) {
                        ga += gi * s[0];
                        gb += gi * s[1];
                    }
                    add_into(&mut adj[alpha_raw.0], 1, 1, &[ga]);
                    add_into(&mut adj[beta_raw.0], 1, 1, &[gb]);
                }
                Op::Stack(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let t = self.value(*p);
                        let len = t.data.len();
                        add_into(&mut adj[p.0], t.rows, t.cols, &g.data[offset..offset + len]);
                        offset += len;
                    }
                }
            }
            adj[idx] = Some(g);
        }
        Grads { adj }
    }
}

fn add_into(slot: &mut Option<Tensor>, rows: usize, cols: usize, g: &[f64]) {
    let t = acc(slot, rows, cols);
    for (a, b) in t.data.iter_mut().zip(g) {
        *a += b;
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

/// Row-wise softmax over allowed entries, stabilized by subtracting the row maximum.
pub fn masked_softmax(scores: &[f64], mask: &[bool], n: usize, m: usize) -> Vec<f64> {
    let mut w = vec![0.0; n * m];
    for i in 0..n {
        let s = &scores[i * m..(i + 1) * m];
        let mk = &mask[i * m..(i + 1) * m];
        let max = s
            .iter()
            .zip(mk)
            .filter(|(_, k)| **k)
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            continue;
        }
        let mut total = 0.0;
        for j in 0..m {
            if mk[j] {
                let e = (s[j] - max).exp();
                w[i * m + j] = e;
                total += e;
            }
        }
        for j in 0..m {
            w[i * m + j] /= total;
        }
    }
    w
}

/// `(n L) x w` patch matrix for same-padded width-`w` convolution of each row of `x`.
fn im2col(x: &Tensor, w: usize) -> Vec<f64> {
    let (n, l) = x.shape();
    let half = (w / 2) as isize;
    let mut out = vec![0.0; n * l * w];
    for s in 0..n {
        for t in 0..l {
            for j in 0..w {
                let src = t as isize + j as isize - half;
                if src >= 0 && (src as usize) < l {
                    out[(s * l + t) * w + j] = x.data[s * l + src as usize];
                }
            }
        }
    }
    out
}

fn col2im_add(cols: &[f64], n: usize, l: usize, w: usize, gx: &mut [f64]) {
    let half = (w / 2) as isize;
    for s in 0..n {
        for t in 0..l {
            for j in 0..w {
                let src = t as isize + j as isize - half;
                if src >= 0 && (src as usize) < l {
                    gx[s * l + src as usize] += cols[(s * l + t) * w + j];
                }
            }
        }
    }
}

/// Largest relative discrepancy between tape gradients and central differences of a
/// scalar function of the given leaves. `build` receives the tape and the leaf handles and
/// returns the output node.
pub fn grad_check(params: &[Tensor], epsilon: f64, build: impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let eval = |ps: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.leaf(p.clone())).collect();
        let out = build(&mut tape, &vars);
        (tape.value(out).item(), tape, vars, out)
    };
    let (_, tape, vars, out) = eval(params);
    let grads = tape.backward(out);
    let mut worst = 0.0f64;
    let mut ps = params.to_vec();
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads
            .get(*var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(params[pi].rows, params[pi].cols));
        for k in 0..params[pi].data.len() {
            let x = params[pi].data[k];
            ps[pi].data[k] = x + epsilon;
            let fp = eval(&ps).0;
            ps[pi].data[k] = x - epsilon;
            let fm = eval(&ps).0;
            ps[pi].data[k] = x;
            let numeric = (fp - fm) / (2.0 * epsilon);
            let a = analytic.data[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(err);
        }
    }
    worst
}
