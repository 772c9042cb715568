use std::collections::HashMap;

use super::tensor::{gemm, gemm_into};
use super::{AutodiffError, ParamId, ParamStore, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    ScatterAddRows(Var, Vec<usize>),
    SliceCols(Var, usize),
    SumRows(Var),
    Sum(Var),
    Transpose(Var),
    Pick(Var, usize, usize),
    Gelu(Var),
    Relu(Var),
    Sigmoid(Var),
    Softplus(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Softmax(Var, f64),
    LogSoftmax(Var, f64),
    LogSumExp(Var),
    LayerNorm(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Records operations for one reverse-mode pass. Parameters are read from
/// the borrowed store.
pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    param_vars: HashMap<ParamId, Var>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Tape<'s> {
        Tape {
            store,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// A leaf that receives a gradient but is not a parameter.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let v = self.push(self.store.value(id).clone(), Op::Param);
        self.param_vars.insert(id, v);
        v
    }

    /// Copies a value into a fresh leaf, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).clone();
        self.leaf(t)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != y.rows() {
            return Err(mismatch("matmul", x, y));
        }
        let out = gemm(x, false, y, false);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), AutodiffError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch(op, x, y));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip(self.value(b), |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip(self.value(b), |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).zip(self.value(b), |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    fn row_broadcast(&mut self, op: &'static str, a: Var, row: Var, f: fn(f64, f64) -> f64) -> Result<Tensor, AutodiffError> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(mismatch(op, x, r));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (o, &b) in out.row_slice_mut(i).iter_mut().zip(r.as_slice()) {
                *o = f(*o, b);
            }
        }
        Ok(out)
    }

    /// Adds a 1 x c row to every row of an n x c tensor.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, AutodiffError> {
        let out = self.row_broadcast("add_row", a, row, |x, y| x + y)?;
        Ok(self.push(out, Op::AddRow(a, row)))
    }

    /// Multiplies every row elementwise by a 1 x c row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var, AutodiffError> {
        let out = self.row_broadcast("mul_row", a, row, |x, y| x * y)?;
        Ok(self.push(out, Op::MulRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x + s);
        self.push(out, Op::AddScalar(a))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(mismatch("concat_cols", self.value(parts[0]), t));
            }
            cols += t.cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            for &p in parts {
                let t = &self.nodes[p.0].value;
                out.row_slice_mut(r)[c0..c0 + t.cols()].copy_from_slice(t.row_slice(r));
                c0 += t.cols();
            }
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(mismatch("concat_rows", self.value(parts[0]), t));
            }
            data.extend_from_slice(t.as_slice());
            rows += t.rows();
        }
        let out = Tensor::new(rows, cols, data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    /// Output row i is input row `idx[i]`.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
            return Err(AutodiffError::IndexOutOfRange {
                op: "gather_rows",
                index: bad,
                len: x.rows(),
            });
        }
        let mut out = Tensor::zeros(idx.len(), x.cols());
        for (o, &i) in idx.iter().enumerate() {
            out.row_slice_mut(o).copy_from_slice(x.row_slice(i));
        }
        Ok(self.push(out, Op::GatherRows(a, idx.to_vec())))
    }

    /// Output row `idx[i]` accumulates input row i; output has `n` rows.
    pub fn scatter_add_rows(&mut self, a: Var, idx: &[usize], n: usize) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if idx.len() != x.rows() {
            return Err(AutodiffError::IndexOutOfRange {
                op: "scatter_add_rows",
                index: idx.len(),
                len: x.rows(),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(AutodiffError::IndexOutOfRange {
                op: "scatter_add_rows",
                index: bad,
                len: n,
            });
        }
        let mut out = Tensor::zeros(n, x.cols());
        for (i, &o) in idx.iter().enumerate() {
            for (d, &s) in out.row_slice_mut(o).iter_mut().zip(x.row_slice(i)) {
                *d += s;
            }
        }
        Ok(self.push(out, Op::ScatterAddRows(a, idx.to_vec())))
    }

    /// Columns `start..start + width`.
    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if start + width > x.cols() {
            return Err(AutodiffError::IndexOutOfRange {
                op: "slice_cols",
                index: start + width,
                len: x.cols(),
            });
        }
        let mut out = Tensor::zeros(x.rows(), width);
        for r in 0..x.rows() {
            out.row_slice_mut(r)
                .copy_from_slice(&x.row_slice(r)[start..start + width]);
        }
        Ok(self.push(out, Op::SliceCols(a, start)))
    }

    /// Column sums as a 1 x c row.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = Tensor::zeros(1, x.cols());
        for r in 0..x.rows() {
            out.add_assign(&Tensor::row(x.row_slice(r).to_vec()));
        }
        self.push(out, Op::SumRows(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).as_slice().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transposed();
        self.push(out, Op::Transpose(a))
    }

    /// Element (r, c) as a 1x1 tensor.
    pub fn pick(&mut self, a: Var, r: usize, c: usize) -> Result<Var, AutodiffError> {
        let x = self.value(a);
        if r >= x.rows() || c >= x.cols() {
            return Err(AutodiffError::IndexOutOfRange {
                op: "pick",
                index: r * x.cols() + c,
                len: x.len(),
            });
        }
        let out = Tensor::scalar(x.get(r, c));
        Ok(self.push(out, Op::Pick(a, r, c)))
    }

    /// Tanh approximation of GeLU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self
            .value(a)
            .map(|x| 0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh()));
        self.push(out, Op::Gelu(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    /// log(1 + e^x), computed stably.
    pub fn softplus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(softplus);
        self.push(out, Op::Softplus(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::ln);
        self.push(out, Op::Log(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        self.push(out, Op::Square(a))
    }

    /// Row-wise softmax of `alpha * a`.
    pub fn softmax_with_temperature(&mut self, a: Var, alpha: f64) -> Var {
        let out = row_softmax(self.value(a), alpha);
        self.push(out, Op::Softmax(a, alpha))
    }

    /// Row-wise log-softmax of `alpha * a`.
    pub fn log_softmax_with_temperature(&mut self, a: Var, alpha: f64) -> Var {
        let x = self.value(a);
        let lse = row_logsumexp(x, alpha);
        let mut out = x.map(|v| v * alpha);
        for r in 0..out.rows() {
            for o in out.row_slice_mut(r) {
                *o -= lse[r];
            }
        }
        self.push(out, Op::LogSoftmax(a, alpha))
    }

    /// Row-wise log-sum-exp as an n x 1 column.
    pub fn logsumexp(&mut self, a: Var) -> Var {
        let out = Tensor::column(row_logsumexp(self.value(a), 1.0));
        self.push(out, Op::LogSumExp(a))
    }

    /// Per-row standardization without affine terms.
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = x.clone();
        for r in 0..out.rows() {
            let row = out.row_slice_mut(r);
            let (mean, inv) = row_stats(row);
            for v in row.iter_mut() {
                *v = (*v - mean) * inv;
            }
        }
        self.push(out, Op::LayerNorm(a))
    }

    /// Reverse pass from a 1x1 output.
    pub fn backward(&self, out: Var) -> Result<Backward, AutodiffError> {
        let shape = self.value(out).shape();
        if shape != (1, 1) {
            return Err(AutodiffError::NotScalar(shape));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(Tensor::scalar(1.0));
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        let mut params = Gradients::zeros(self.store);
        for (id, v) in &self.param_vars {
            if let Some(g) = &grads[v.0] {
                params.values[id.0] = Some(g.clone());
            }
        }
        Ok(Backward {
            nodes: grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
            params,
        })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let value = &self.nodes[i].value;
        let v = |x: &Var| &self.nodes[x.0].value;
        match &self.nodes[i].op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                accumulate_with(grads, *a, v(a).shape(), |t| gemm_into(g, false, v(b), true, t));
                accumulate_with(grads, *b, v(b).shape(), |t| gemm_into(v(a), true, g, false, t));
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, g.zip(v(b), |x, y| x * y));
                accumulate(grads, *b, g.zip(v(a), |x, y| x * y));
            }
            Op::AddRow(a, row) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *row, column_sums(g));
            }
            Op::MulRow(a, row) => {
                let r = v(row);
                let mut ga = g.clone();
                for k in 0..ga.rows() {
                    for (x, &y) in ga.row_slice_mut(k).iter_mut().zip(r.as_slice()) {
                        *x *= y;
                    }
                }
                accumulate(grads, *a, ga);
                accumulate(grads, *row, column_sums(&g.zip(v(a), |x, y| x * y)));
            }
            Op::Scale(a, s) => accumulate(grads, *a, g.map(|x| x * s)),
            Op::AddScalar(a) => accumulate(grads, *a, g.clone()),
            Op::ConcatCols(parts) => {
                let mut c0 = 0;
                for p in parts {
                    let w = v(p).cols();
                    let mut t = Tensor::zeros(g.rows(), w);
                    for r in 0..g.rows() {
                        t.row_slice_mut(r).copy_from_slice(&g.row_slice(r)[c0..c0 + w]);
                    }
                    accumulate(grads, *p, t);
                    c0 += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut r0 = 0;
                for p in parts {
                    let (h, w) = v(p).shape();
                    let data = g.as_slice()[r0 * w..(r0 + h) * w].to_vec();
                    accumulate(grads, *p, Tensor::new(h, w, data).expect("slice shape"));
                    r0 += h;
                }
            }
            Op::GatherRows(a, idx) => {
                accumulate_with(grads, *a, v(a).shape(), |t| {
                    for (o, &src) in idx.iter().enumerate() {
                        for (d, &s) in t.row_slice_mut(src).iter_mut().zip(g.row_slice(o)) {
                            *d += s;
                        }
                    }
                });
            }
            Op::ScatterAddRows(a, idx) => {
                accumulate_with(grads, *a, v(a).shape(), |t| {
                    for (k, &o) in idx.iter().enumerate() {
                        for (d, &s) in t.row_slice_mut(k).iter_mut().zip(g.row_slice(o)) {
                            *d += s;
                        }
                    }
                });
            }
            Op::SliceCols(a, start) => {
                accumulate_with(grads, *a, v(a).shape(), |t| {
                    for r in 0..g.rows() {
                        for (d, &s) in t.row_slice_mut(r)[*start..*start + g.cols()]
                            .iter_mut()
                            .zip(g.row_slice(r))
                        {
                            *d += s;
                        }
                    }
                });
            }
            Op::SumRows(a) => {
                let (h, w) = v(a).shape();
                let mut t = Tensor::zeros(h, w);
                for r in 0..h {
                    t.row_slice_mut(r).copy_from_slice(g.as_slice());
                }
                accumulate(grads, *a, t);
            }
            Op::Sum(a) => {
                let (h, w) = v(a).shape();
                accumulate(grads, *a, Tensor::filled(h, w, g.item()));
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transposed()),
            Op::Pick(a, r, c) => {
                accumulate_with(grads, *a, v(a).shape(), |t| {
                    let cur = t.get(*r, *c);
                    t.set(*r, *c, cur + g.item());
                });
            }
            Op::Gelu(a) => {
                let d = v(a).map(|x| {
                    let u = GELU_C * (x + 0.044715 * x * x * x);
                    let th = u.tanh();
                    let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
                    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du
                });
                accumulate(grads, *a, g.zip(&d, |x, y| x * y));
            }
            Op::Relu(a) => {
                accumulate(grads, *a, g.zip(v(a), |x, y| if y > 0.0 { x } else { 0.0 }));
            }
            Op::Sigmoid(a) => {
                accumulate(grads, *a, g.zip(value, |x, s| x * s * (1.0 - s)));
            }
            Op::Softplus(a) => {
                accumulate(grads, *a, g.zip(v(a), |x, y| x * sigmoid(y)));
            }
            Op::Exp(a) => accumulate(grads, *a, g.zip(value, |x, e| x * e)),
            Op::Log(a) => accumulate(grads, *a, g.zip(v(a), |x, y| x / y)),
            Op::Square(a) => accumulate(grads, *a, g.zip(v(a), |x, y| 2.0 * x * y)),
            Op::Softmax(a, alpha) => {
                let mut t = Tensor::zeros(g.rows(), g.cols());
                for r in 0..g.rows() {
                    let y = value.row_slice(r);
                    let gy = g.row_slice(r);
                    let dot: f64 = y.iter().zip(gy).map(|(p, q)| p * q).sum();
                    for (c, d) in t.row_slice_mut(r).iter_mut().enumerate() {
                        *d = alpha * y[c] * (gy[c] - dot);
                    }
                }
                accumulate(grads, *a, t);
            }
            Op::LogSoftmax(a, alpha) => {
                let mut t = Tensor::zeros(g.rows(), g.cols());
                for r in 0..g.rows() {
                    let y = value.row_slice(r);
                    let gy = g.row_slice(r);
                    let total: f64 = gy.iter().sum();
                    for (c, d) in t.row_slice_mut(r).iter_mut().enumerate() {
                        *d = alpha * (gy[c] - y[c].exp() * total);
                    }
                }
                accumulate(grads, *a, t);
            }
            Op::LogSumExp(a) => {
                let x = v(a);
                let mut t = Tensor::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    let lse = value.get(r, 0);
                    let gr = g.get(r, 0);
                    for (d, &xv) in t.row_slice_mut(r).iter_mut().zip(x.row_slice(r)) {
                        *d = gr * (xv - lse).exp();
                    }
                }
                accumulate(grads, *a, t);
            }
            Op::LayerNorm(a) => {
                let x = v(a);
                let mut t = Tensor::zeros(x.rows(), x.cols());
                let w = x.cols() as f64;
                for r in 0..x.rows() {
                    let (_, inv) = row_stats(x.row_slice(r));
                    let y = value.row_slice(r);
                    let gy = g.row_slice(r);
                    let mean_g: f64 = gy.iter().sum::<f64>() / w;
                    let mean_gy: f64 = gy.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() / w;
                    for (c, d) in t.row_slice_mut(r).iter_mut().enumerate() {
                        *d = inv * (gy[c] - mean_g - y[c] * mean_gy);
                    }
                }
                accumulate(grads, *a, t);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, t: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&t),
        slot @ None => *slot = Some(t),
    }
}

fn accumulate_with(grads: &mut [Option<Tensor>], v: Var, shape: (usize, usize), f: impl FnOnce(&mut Tensor)) {
    let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(shape.0, shape.1));
    f(slot);
}

fn column_sums(g: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(1, g.cols());
    for r in 0..g.rows() {
        for (o, &x) in out.as_mut_slice().iter_mut().zip(g.row_slice(r)) {
            *o += x;
        }
    }
    out
}

fn row_stats(row: &[f64]) -> (f64, f64) {
    let w = row.len() as f64;
    let mean = row.iter().sum::<f64>() / w;
    let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / w;
    (mean, 1.0 / (var + LN_EPS).sqrt())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn row_logsumexp(x: &Tensor, alpha: f64) -> Vec<f64> {
    (0..x.rows())
        .map(|r| {
            let row = x.row_slice(r);
            let m = row.iter().map(|v| v * alpha).fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return m;
            }
            m + row.iter().map(|v| (v * alpha - m).exp()).sum::<f64>().ln()
        })
        .collect()
}

fn row_softmax(x: &Tensor, alpha: f64) -> Tensor {
    let lse = row_logsumexp(x, alpha);
    let mut out = x.clone();
    for (r, l) in lse.iter().enumerate() {
        for o in out.row_slice_mut(r) {
            *o = (*o * alpha - l).exp();
        }
    }
    out
}

/// Result of [`Tape::backward`].
pub struct Backward {
    nodes: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
    params: Gradients,
}

impl Backward {
    /// Gradient of the output w.r.t. any node; zeros when it did not contribute.
    pub fn wrt(&self, v: Var) -> Tensor {
        match &self.nodes[v.0] {
            Some(t) => t.clone(),
            None => Tensor::zeros(self.shapes[v.0].0, self.shapes[v.0].1),
        }
    }

    pub fn into_params(self) -> Gradients {
        self.params
    }

    pub fn params(&self) -> &Gradients {
        &self.params
    }
}

/// Gradient per parameter of a store; absent entries are zero.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub(crate) values: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn zeros(store: &ParamStore) -> Gradients {
        Gradients {
            values: vec![None; store.len()],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.values[id.0].as_ref()
    }

    /// Dense gradient for `id`, zeros when absent.
    pub fn dense(&self, store: &ParamStore, id: ParamId) -> Tensor {
        self.values[id.0].clone().unwrap_or_else(|| {
            let (r, c) = store.value(id).shape();
            Tensor::zeros(r, c)
        })
    }

    pub fn set(&mut self, id: ParamId, t: Tensor) {
        self.values[id.0] = Some(t);
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            if let Some(b) = b {
                match a {
                    Some(a) => a.add_assign(b),
                    None => *a = Some(b.clone()),
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.values.iter_mut().flatten() {
            t.scale_assign(s);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.values.iter().flatten().map(Tensor::sum_sq).sum::<f64>().sqrt()
    }

    /// Rescales to `max_norm` when the global norm exceeds it. Returns
    /// whether clipping happened.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> bool {
        let n = self.global_norm();
        if n > max_norm {
            self.scale(max_norm / n);
            true
        } else {
            false
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .flatten()
            .all(|t| t.as_slice().iter().all(|x| x.is_finite()))
    }
}
