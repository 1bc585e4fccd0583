//! Reverse-mode automatic differentiation over batched tensors.

use crate::tensor::{gemm, Tensor};
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    AddRow(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, f64),
    Offset(usize),
    Relu(usize),
    /// Tangent gated by the sign of a pre-activation; the gate is constant.
    ReluGate { pre: usize, tangent: usize },
    Sigmoid(usize),
    Tanh(usize),
    /// Elementwise map with the stored pointwise derivative.
    Map(usize, Vec<f64>),
    Sum(usize),
    Mean(usize),
    RepeatRows(usize, usize),
    ConcatCols(Vec<usize>),
    SliceCols { input: usize, start: usize },
    Im2col { input: usize, kernel: usize },
    MaxPool { input: usize, argmax: Vec<usize> },
    Reshape(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records every intermediate of a computation so gradients can be pulled
/// back from a scalar.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` for values the loss does not depend on through differentiable paths.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{what}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// tanh through one `exp`, about twice as fast as `f64::tanh`; absolute error ~1e-16.
pub(crate) fn tanh(x: f64) -> f64 {
    let t = (-2.0 * x.abs()).exp();
    ((1.0 - t) / (1.0 + t)).copysign(x)
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

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: usize) -> bool {
        self.nodes[v].needs_grad
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input that receives no gradient (data, frozen weights).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if tb.shape().len() != 2 || ta.cols() != tb.shape()[0] {
            return Err(Error::Shape(format!("matmul: {:?} x {:?}", ta.shape(), tb.shape())));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), false, tb.data(), false, &mut out, 0.0);
        let needs = self.needs(a.0) || self.needs(b.0);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a.0, b.0), needs))
    }

    /// Adds a `1 x cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ta, tr) = (&self.nodes[a.0].value, &self.nodes[row.0].value);
        if tr.len() != ta.cols() {
            return Err(Error::Shape(format!("add_row: {:?} + {:?}", ta.shape(), tr.shape())));
        }
        let c = ta.cols();
        let mut out = ta.clone();
        for chunk in out.data_mut().chunks_mut(c) {
            for (o, r) in chunk.iter_mut().zip(tr.data()) {
                *o += r;
            }
        }
        let needs = self.needs(a.0) || self.needs(row.0);
        Ok(self.push(out, Op::AddRow(a.0, row.0), needs))
    }

    fn binary(&mut self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        same_shape(ta, tb, what)?;
        let out = ta.zip_with(tb, f);
        let needs = self.needs(a.0) || self.needs(b.0);
        Ok(self.push(out, op, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a.0, b.0))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "div", |x, y| x / y, Op::Div(a.0, b.0))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.nodes[a.0].value.map(|x| k * x);
        let needs = self.needs(a.0);
        self.push(out, Op::Scale(a.0, k), needs)
    }

    /// `a + k` elementwise.
    pub fn offset(&mut self, a: Var, k: f64) -> Var {
        let out = self.nodes[a.0].value.map(|x| x + k);
        let needs = self.needs(a.0);
        self.push(out, Op::Offset(a.0), needs)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, |x| (x * x, 2.0 * x))
    }

    /// Rectifier with the subgradient at zero fixed to zero.
    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.map(|x| if x > 0.0 { x } else { 0.0 });
        let needs = self.needs(a.0);
        self.push(out, Op::Relu(a.0), needs)
    }

    /// `tangent * [pre > 0]`: the forward-mode image of a rectifier.
    pub fn relu_gate(&mut self, pre: Var, tangent: Var) -> Result<Var> {
        let (tp, tt) = (&self.nodes[pre.0].value, &self.nodes[tangent.0].value);
        same_shape(tp, tt, "relu_gate")?;
        let out = tt.zip_with(tp, |t, p| if p > 0.0 { t } else { 0.0 });
        let needs = self.needs(tangent.0);
        Ok(self.push(out, Op::ReluGate { pre: pre.0, tangent: tangent.0 }, needs))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.map(sigmoid);
        let needs = self.needs(a.0);
        self.push(out, Op::Sigmoid(a.0), needs)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.nodes[a.0].value.map(tanh);
        let needs = self.needs(a.0);
        self.push(out, Op::Tanh(a.0), needs)
    }

    /// Elementwise `f`, which returns the value and its derivative.
    pub fn map(&mut self, a: Var, f: impl Fn(f64) -> (f64, f64)) -> Var {
        let input = &self.nodes[a.0].value;
        let (values, deriv): (Vec<f64>, Vec<f64>) = input.data().iter().map(|&x| f(x)).unzip();
        let out = Tensor::new(input.shape().to_vec(), values).expect("same shape");
        let needs = self.needs(a.0);
        self.push(out, Op::Map(a.0, deriv), needs)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.data().iter().sum();
        let needs = self.needs(a.0);
        self.push(Tensor::scalar(s), Op::Sum(a.0), needs)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = &self.nodes[a.0].value;
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        let needs = self.needs(a.0);
        self.push(Tensor::scalar(m), Op::Mean(a.0), needs)
    }

    /// Each row of the matrix view repeated `k` times in place.
    pub fn repeat_rows(&mut self, a: Var, k: usize) -> Var {
        let t = &self.nodes[a.0].value;
        let c = t.cols();
        let mut out = Vec::with_capacity(t.len() * k);
        for row in t.data().chunks(c) {
            for _ in 0..k {
                out.extend_from_slice(row);
            }
        }
        let rows = t.rows() * k;
        let needs = self.needs(a.0);
        self.push(Tensor::matrix(rows, c, out).expect("consistent shape"), Op::RepeatRows(a.0, k), needs)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.nodes[parts[0].0].value.rows();
        if parts.iter().any(|p| self.nodes[p.0].value.rows() != rows) {
            return Err(Error::Shape("concat_cols: row counts differ".into()));
        }
        let total: usize = parts.iter().map(|p| self.nodes[p.0].value.cols()).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                let t = &self.nodes[p.0].value;
                let c = t.cols();
                out.extend_from_slice(&t.data()[r * c..(r + 1) * c]);
            }
        }
        let needs = parts.iter().any(|p| self.needs(p.0));
        let ids = parts.iter().map(|p| p.0).collect();
        Ok(self.push(Tensor::matrix(rows, total, out)?, Op::ConcatCols(ids), needs))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = &self.nodes[a.0].value;
        let c = t.cols();
        if start + len > c || len == 0 {
            return Err(Error::Shape(format!("slice_cols {start}..{} of {c} columns", start + len)));
        }
        let mut out = Vec::with_capacity(t.rows() * len);
        for row in t.data().chunks(c) {
            out.extend_from_slice(&row[start..start + len]);
        }
        let rows = t.rows();
        let needs = self.needs(a.0);
        Ok(self.push(Tensor::matrix(rows, len, out)?, Op::SliceCols { input: a.0, start }, needs))
    }

    /// Unfolds a `[batch, len, channels]` input into `[batch * (len - kernel + 1), kernel * channels]`.
    pub fn im2col(&mut self, a: Var, kernel: usize) -> Result<Var> {
        let t = &self.nodes[a.0].value;
        let &[b, l, c] = t.shape() else {
            return Err(Error::Shape(format!("im2col expects [batch, len, channels], got {:?}", t.shape())));
        };
        if l < kernel {
            return Err(Error::Shape(format!("sequence length {l} shorter than kernel {kernel}")));
        }
        let lo = l - kernel + 1;
        let mut out = Vec::with_capacity(b * lo * kernel * c);
        for bi in 0..b {
            let base = bi * l * c;
            for p in 0..lo {
                out.extend_from_slice(&t.data()[base + p * c..base + (p + kernel) * c]);
            }
        }
        let needs = self.needs(a.0);
        Ok(self.push(Tensor::matrix(b * lo, kernel * c, out)?, Op::Im2col { input: a.0, kernel }, needs))
    }

    /// Max pooling with window 2 and stride 2 along the length axis of `[batch, len, channels]`.
    pub fn max_pool2(&mut self, a: Var) -> Result<Var> {
        let t = &self.nodes[a.0].value;
        let &[b, l, c] = t.shape() else {
            return Err(Error::Shape(format!("max_pool expects [batch, len, channels], got {:?}", t.shape())));
        };
        let lo = l / 2;
        if lo == 0 {
            return Err(Error::Shape(format!("cannot pool a length-{l} sequence")));
        }
        let mut out = Vec::with_capacity(b * lo * c);
        let mut argmax = Vec::with_capacity(b * lo * c);
        let d = t.data();
        for bi in 0..b {
            for p in 0..lo {
                for ch in 0..c {
                    let i0 = (bi * l + 2 * p) * c + ch;
                    let i1 = i0 + c;
                    // ties go to the first element
                    let i = if d[i1] > d[i0] { i1 } else { i0 };
                    out.push(d[i]);
                    argmax.push(i);
                }
            }
        }
        let needs = self.needs(a.0);
        Ok(self.push(Tensor::new(vec![b, lo, c], out)?, Op::MaxPool { input: a.0, argmax }, needs))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.nodes[a.0].value.clone().reshape(shape)?;
        let needs = self.needs(a.0);
        Ok(self.push(out, Op::Reshape(a.0), needs))
    }

    /// Gradients of the scalar `loss` with respect to every recorded value
    /// that needs them.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(self.nodes[loss.0].value.shape(), 1.0));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], target: usize, g: Tensor) {
        if !self.nodes[target].needs_grad {
            return;
        }
        match &mut grads[target] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let value = |j: usize| &self.nodes[j].value;
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (value(*a), value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if self.needs(*a) {
                    let mut da = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), false, tb.data(), true, &mut da, 0.0);
                    self.accumulate(grads, *a, Tensor::new(ta.shape().to_vec(), da)?);
                }
                if self.needs(*b) {
                    let mut db = vec![0.0; k * n];
                    gemm(k, m, n, ta.data(), true, g.data(), false, &mut db, 0.0);
                    self.accumulate(grads, *b, Tensor::new(tb.shape().to_vec(), db)?);
                }
            }
            Op::AddRow(a, row) => {
                if self.needs(*row) {
                    let c = g.cols();
                    let mut dr = vec![0.0; c];
                    for chunk in g.data().chunks(c) {
                        for (d, v) in dr.iter_mut().zip(chunk) {
                            *d += v;
                        }
                    }
                    self.accumulate(grads, *row, Tensor::new(value(*row).shape().to_vec(), dr)?);
                }
                self.accumulate(grads, *a, g.clone());
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                if self.needs(*b) {
                    self.accumulate(grads, *b, g.map(|x| -x));
                }
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    self.accumulate(grads, *a, g.zip_with(value(*b), |x, y| x * y));
                }
                if self.needs(*b) {
                    self.accumulate(grads, *b, g.zip_with(value(*a), |x, y| x * y));
                }
            }
            Op::Div(a, b) => {
                let tb = value(*b);
                if self.needs(*a) {
                    self.accumulate(grads, *a, g.zip_with(tb, |x, y| x / y));
                }
                if self.needs(*b) {
                    // d(a/b)/db = -(a/b)/b
                    let q = g.zip_with(&self.nodes[i].value, |x, y| x * y);
                    self.accumulate(grads, *b, q.zip_with(tb, |x, y| -x / y));
                }
            }
            Op::Scale(a, k) => self.accumulate(grads, *a, g.map(|x| k * x)),
            Op::Offset(a) => self.accumulate(grads, *a, g.clone()),
            Op::Relu(a) => {
                let d = g.zip_with(value(*a), |x, p| if p > 0.0 { x } else { 0.0 });
                self.accumulate(grads, *a, d);
            }
            Op::ReluGate { pre, tangent } => {
                let d = g.zip_with(value(*pre), |x, p| if p > 0.0 { x } else { 0.0 });
                self.accumulate(grads, *tangent, d);
            }
            Op::Sigmoid(a) => {
                let d = g.zip_with(&self.nodes[i].value, |x, y| x * y * (1.0 - y));
                self.accumulate(grads, *a, d);
            }
            Op::Tanh(a) => {
                let d = g.zip_with(&self.nodes[i].value, |x, y| x * (1.0 - y * y));
                self.accumulate(grads, *a, d);
            }
            Op::Map(a, deriv) => {
                let mut d = g.clone();
                for (x, dv) in d.data_mut().iter_mut().zip(deriv) {
                    *x *= dv;
                }
                self.accumulate(grads, *a, d);
            }
            Op::Sum(a) => {
                let s = g.data()[0];
                self.accumulate(grads, *a, Tensor::filled(value(*a).shape(), s));
            }
            Op::Mean(a) => {
                let n = value(*a).len() as f64;
                let s = g.data()[0] / n;
                self.accumulate(grads, *a, Tensor::filled(value(*a).shape(), s));
            }
            Op::RepeatRows(a, k) => {
                let ta = value(*a);
                let c = ta.cols();
                let mut d = vec![0.0; ta.len()];
                for (r, chunk) in g.data().chunks(c).enumerate() {
                    let dst = &mut d[(r / k) * c..(r / k + 1) * c];
                    for (x, v) in dst.iter_mut().zip(chunk) {
                        *x += v;
                    }
                }
                self.accumulate(grads, *a, Tensor::new(ta.shape().to_vec(), d)?);
            }
            Op::ConcatCols(parts) => {
                let total = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let tp = value(p);
                    let c = tp.cols();
                    if self.needs(p) {
                        let mut d = Vec::with_capacity(tp.len());
                        for row in g.data().chunks(total) {
                            d.extend_from_slice(&row[offset..offset + c]);
                        }
                        self.accumulate(grads, p, Tensor::new(tp.shape().to_vec(), d)?);
                    }
                    offset += c;
                }
            }
            Op::SliceCols { input, start } => {
                let ti = value(*input);
                let (c, len) = (ti.cols(), g.cols());
                let mut d = vec![0.0; ti.len()];
                for (r, row) in g.data().chunks(len).enumerate() {
                    d[r * c + start..r * c + start + len].copy_from_slice(row);
                }
                self.accumulate(grads, *input, Tensor::new(ti.shape().to_vec(), d)?);
            }
            Op::Im2col { input, kernel } => {
                let ti = value(*input);
                let (b, l, c) = (ti.shape()[0], ti.shape()[1], ti.shape()[2]);
                let lo = l - kernel + 1;
                let width = kernel * c;
                let mut d = vec![0.0; ti.len()];
                for bi in 0..b {
                    for p in 0..lo {
                        let row = &g.data()[(bi * lo + p) * width..(bi * lo + p + 1) * width];
                        let dst = &mut d[(bi * l + p) * c..(bi * l + p) * c + width];
                        for (x, v) in dst.iter_mut().zip(row) {
                            *x += v;
                        }
                    }
                }
                self.accumulate(grads, *input, Tensor::new(ti.shape().to_vec(), d)?);
            }
            Op::MaxPool { input, argmax } => {
                let ti = value(*input);
                let mut d = vec![0.0; ti.len()];
                for (&idx, v) in argmax.iter().zip(g.data()) {
                    d[idx] += v;
                }
                self.accumulate(grads, *input, Tensor::new(ti.shape().to_vec(), d)?);
            }
            Op::Reshape(a) => {
                let d = g.clone().reshape(value(*a).shape())?;
                self.accumulate(grads, *a, d);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn fast_tanh_matches_std() {
        for x in [-40.0, -19.0, -3.2, -0.7, -1e-9, 0.0, 2e-6, 0.4, 1.0, 5.5, 800.0] {
            assert!((tanh(x) - f64::tanh(x)).abs() < 1e-15, "{x}");
        }
        assert!(tanh(-0.0).is_sign_negative() && tanh(f64::INFINITY) == 1.0);
    }

    /// Central-difference check of d loss / d input for a graph builder.
    fn check(inputs: Vec<Tensor>, build: impl Fn(&mut Tape, &[Var]) -> Var) {
        let eval = |vals: &[Tensor]| {
            let mut tape = Tape::new();
            let vars: Vec<Var> = vals.iter().map(|t| tape.leaf(t.clone())).collect();
            let out = build(&mut tape, &vars);
            (tape, vars, out)
        };
        let (tape, vars, out) = eval(&inputs);
        let grads = tape.backward(out).unwrap();
        let h = 1e-5;
        for (k, v) in vars.iter().enumerate() {
            let g = grads.get(*v).cloned().unwrap_or_else(|| Tensor::zeros(inputs[k].shape()));
            for idx in 0..inputs[k].len() {
                let mut plus = inputs.clone();
                plus[k].data_mut()[idx] += h;
                let mut minus = inputs.clone();
                minus[k].data_mut()[idx] -= h;
                let (tp, _, op) = eval(&plus);
                let (tm, _, om) = eval(&minus);
                let fd = (tp.value(op).data()[0] - tm.value(om).data()[0]) / (2.0 * h);
                let an = g.data()[idx];
                let err = (fd - an).abs() / (1e-6 + fd.abs().max(an.abs()));
                assert!(err < 1e-5, "input {k}[{idx}]: analytic {an}, numeric {fd}");
            }
        }
    }

    #[test]
    fn weighted_sum_gradient_is_the_input() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::matrix(1, 3, vec![1.0, -2.0, 0.5]).unwrap());
        let w = tape.leaf(Tensor::matrix(3, 1, vec![0.3, 0.1, 0.2]).unwrap());
        let y = tape.matmul(x, w).unwrap();
        let loss = tape.sum(y);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[1.0, -2.0, 0.5]);
        assert!(g.get(x).is_none());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[2, 2]));
        assert!(matches!(tape.backward(x), Err(Error::Usage(_))));
    }

    #[test]
    fn unused_values_get_no_gradient() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::scalar(2.0));
        let b = tape.leaf(Tensor::scalar(3.0));
        let loss = tape.square(a);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(a).unwrap().data(), &[4.0]);
        assert!(g.get(b).is_none());
    }

    #[test]
    fn dense_ops_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inputs = vec![random(&[4, 3], &mut rng), random(&[3, 5], &mut rng), random(&[1, 5], &mut rng)];
        check(inputs, |t, v| {
            let h = t.matmul(v[0], v[1]).unwrap();
            let h = t.add_row(h, v[2]).unwrap();
            let s = t.sigmoid(h);
            let r = t.relu(h);
            let m = t.mul(s, r).unwrap();
            let q = t.square(m);
            t.mean(q)
        });
    }

    #[test]
    fn elementwise_ops_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(&[3, 2], &mut rng);
        let b = random(&[3, 2], &mut rng).map(|x| x.abs() + 0.5);
        check(vec![a, b], |t, v| {
            let d = t.div(v[0], v[1]).unwrap();
            let s = t.sub(d, v[1]).unwrap();
            let e = t.map(s, |x| (x.asinh(), 1.0 / (1.0 + x * x).sqrt()));
            let k = t.scale(e, 3.0);
            let o = t.offset(k, 1.5);
            let w = t.add(o, v[0]).unwrap();
            let q = t.square(w);
            t.sum(q)
        });
    }

    #[test]
    fn structural_ops_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        check(vec![random(&[2, 3], &mut rng), random(&[6, 1], &mut rng)], |t, v| {
            let r = t.repeat_rows(v[0], 3);
            let c = t.concat_cols(&[r, v[1]]).unwrap();
            let s = t.slice_cols(c, 1, 3).unwrap();
            let sh = t.reshape(s, &[3, 6]).unwrap();
            let q = t.square(sh);
            let q = t.mul(q, sh).unwrap();
            t.sum(q)
        });
    }

    #[test]
    fn conv_and_pool_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inputs = vec![random(&[2, 9, 2], &mut rng), random(&[6, 3], &mut rng), random(&[1, 3], &mut rng)];
        check(inputs, |t, v| {
            let cols = t.im2col(v[0], 3).unwrap();
            let h = t.matmul(cols, v[1]).unwrap();
            let h = t.add_row(h, v[2]).unwrap();
            let h = t.reshape(h, &[2, 7, 3]).unwrap();
            let p = t.max_pool2(h).unwrap();
            let q = t.square(p);
            t.sum(q)
        });
    }

    #[test]
    fn relu_gate_passes_tangent_only_where_active() {
        let mut tape = Tape::new();
        let pre = tape.constant(Tensor::matrix(1, 3, vec![-1.0, 0.0, 2.0]).unwrap());
        let tan = tape.leaf(Tensor::matrix(1, 3, vec![5.0, 6.0, 7.0]).unwrap());
        let out = tape.relu_gate(pre, tan).unwrap();
        assert_eq!(tape.value(out).data(), &[0.0, 0.0, 7.0]);
        let loss = tape.sum(out);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(tan).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(&[2, 3]));
        let b = tape.leaf(Tensor::zeros(&[2, 2]));
        assert!(matches!(tape.add(a, b), Err(Error::Shape(_))));
        assert!(matches!(tape.matmul(a, b), Err(Error::Shape(_))));
    }
}
