//! Tape-based reverse-mode differentiation over rank-2 tensors.
//!
//! Every primitive appends a node holding its forward value and the handles
//! of its inputs. Inputs always precede their consumers, so walking the node
//! list backwards is a reverse topological order.

use std::collections::HashMap;

use rand::Rng;

use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Lower/upper clamp applied to predicted probabilities inside the losses.
pub const LOG_EPS: f64 = 1e-7;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>, Axis),
    SliceCols(Var, usize),
    SelectRows(Var, Vec<usize>),
    Transpose(Var),
    Tanh(Var),
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var, Axis),
    Dropout(Var, Vec<f64>),
    Sum(Var),
    Bce(Var, Vec<f64>),
    Kld(Var, Vec<f64>),
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bound: HashMap<ParamId, Var>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_slice(xs: &[f64], out: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(xs) {
        *o = (x - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    /// A constant or input; gradients reach it but it is not trained.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Binds a parameter to this tape. Repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let v = self.push(store.get(id).tensor.clone(), Op::Param);
        self.bound.insert(id, v);
        v
    }

    fn dims(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        self.value(v).dims(op)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize)> {
        let da = self.dims(op, a)?;
        let db = self.dims(op, b)?;
        if da != db {
            return Err(Error::shape(op, format!("operands {da:?} and {db:?} differ")));
        }
        Ok(da)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims("matmul", a)?;
        let (k2, n) = self.dims("matmul", b)?;
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                format!("inner dims differ: {m}x{k} times {k2}x{n}"),
            ));
        }
        let out = self.value(a).matmul_raw(self.value(b));
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// Elementwise sum. `b` may also be a single row broadcast over `a`'s rows.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ra, ca) = self.dims("add", a)?;
        let (rb, cb) = self.dims("add", b)?;
        if (ra, ca) == (rb, cb) {
            let mut out = self.value(a).clone();
            out.add_assign(self.value(b));
            return Ok(self.push(out, Op::Add(a, b)));
        }
        if rb == 1 && cb == ca {
            let row = self.value(b).data().to_vec();
            let mut out = self.value(a).clone();
            for chunk in out.data_mut().chunks_mut(ca) {
                for (o, r) in chunk.iter_mut().zip(&row) {
                    *o += r;
                }
            }
            return Ok(self.push(out, Op::AddRow(a, b)));
        }
        Err(Error::shape(
            "add",
            format!("cannot add {rb}x{cb} to {ra}x{ca}"),
        ))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let vb = self.value(b).data();
        let out = self
            .value(a)
            .with_data(self.value(a).data().iter().zip(vb).map(|(x, y)| x - y).collect());
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let vb = self.value(b).data();
        let out = self
            .value(a)
            .with_data(self.value(a).data().iter().zip(vb).map(|(x, y)| x * y).collect());
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn concat(&mut self, parts: &[Var], axis: Axis) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::shape("concat", "no inputs"))?;
        let (r0, c0) = self.dims("concat", first)?;
        let mut dims = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.dims("concat", p)?;
            let ok = match axis {
                Axis::Rows => c == c0,
                Axis::Cols => r == r0,
            };
            if !ok {
                return Err(Error::shape(
                    "concat",
                    format!("input {r}x{c} does not line up with {r0}x{c0} along {axis:?}"),
                ));
            }
            dims.push((r, c));
        }
        let out = match axis {
            Axis::Rows => {
                let rows: usize = dims.iter().map(|d| d.0).sum();
                let data = parts
                    .iter()
                    .flat_map(|&p| self.value(p).data().iter().copied())
                    .collect();
                Tensor::matrix(rows, c0, data)?
            }
            Axis::Cols => {
                let cols: usize = dims.iter().map(|d| d.1).sum();
                let mut data = Vec::with_capacity(r0 * cols);
                for i in 0..r0 {
                    for &p in parts {
                        data.extend_from_slice(self.value(p).row(i));
                    }
                }
                Tensor::matrix(r0, cols, data)?
            }
        };
        Ok(self.push(out, Op::Concat(parts.to_vec(), axis)))
    }

    /// Columns `start..end` of `x`.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.dims("slice_cols", x)?;
        if start >= end || end > c {
            return Err(Error::shape(
                "slice_cols",
                format!("range {start}..{end} out of bounds for {r}x{c}"),
            ));
        }
        let v = self.value(x);
        let data = (0..r)
            .flat_map(|i| v.row(i)[start..end].iter().copied())
            .collect();
        let out = Tensor::matrix(r, end - start, data)?;
        Ok(self.push(out, Op::SliceCols(x, start)))
    }

    /// Gathers rows of `x`; indices may repeat.
    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        self.gather("select_rows", x, rows)
    }

    /// Looks up embedding rows of `table` for `indices`.
    pub fn embedding_lookup(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        self.gather("embedding_lookup", table, indices)
    }

    fn gather(&mut self, op: &'static str, x: Var, rows: &[usize]) -> Result<Var> {
        let (r, c) = self.dims(op, x)?;
        if rows.is_empty() {
            return Err(Error::shape(op, "no indices"));
        }
        if let Some(&bad) = rows.iter().find(|&&i| i >= r) {
            return Err(Error::shape(op, format!("index {bad} out of range for {r} rows")));
        }
        let v = self.value(x);
        let data = rows.iter().flat_map(|&i| v.row(i).iter().copied()).collect();
        let out = Tensor::matrix(rows.len(), c, data)?;
        Ok(self.push(out, Op::SelectRows(x, rows.to_vec())))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        self.dims("transpose", x)?;
        let out = self.value(x).transpose();
        Ok(self.push(out, Op::Transpose(x)))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(f64::tanh);
        self.push(out, Op::Tanh(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(out, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        self.push(out, Op::Sigmoid(x))
    }

    /// Softmax over each row (`Axis::Cols`) or each column (`Axis::Rows`).
    pub fn softmax(&mut self, x: Var, axis: Axis) -> Result<Var> {
        let (r, c) = self.dims("softmax", x)?;
        let v = self.value(x);
        let mut out = vec![0.0; r * c];
        match axis {
            Axis::Cols => {
                for i in 0..r {
                    softmax_slice(v.row(i), &mut out[i * c..(i + 1) * c]);
                }
            }
            Axis::Rows => {
                let t = v.transpose();
                let mut tmp = vec![0.0; r];
                for j in 0..c {
                    softmax_slice(t.row(j), &mut tmp);
                    for i in 0..r {
                        out[i * c + j] = tmp[i];
                    }
                }
            }
        }
        let out = Tensor::matrix(r, c, out)?;
        Ok(self.push(out, Op::Softmax(x, axis)))
    }

    /// Inverted dropout. With `train == false` or `rate == 0` the input is
    /// returned unchanged.
    pub fn dropout<R: Rng>(&mut self, x: Var, rate: f64, train: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Validation(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !train || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(x).len())
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let v = self.value(x);
        let out = v.with_data(v.data().iter().zip(&mask).map(|(a, m)| a * m).collect());
        Ok(self.push(out, Op::Dropout(x, mask)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Mean binary cross-entropy of probabilities `pred` against soft
    /// targets in `[0, 1]`, with predictions clamped to `[ε, 1 − ε]`.
    pub fn bce_loss(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != target.len() {
            return Err(Error::shape(
                "bce_loss",
                format!("{} predictions for {} targets", p.len(), target.len()),
            ));
        }
        if let Some(y) = target.iter().find(|y| !(0.0..=1.0).contains(*y)) {
            return Err(Error::Validation(format!("bce target {y} outside [0, 1]")));
        }
        let n = target.len() as f64;
        let total: f64 = p
            .data()
            .iter()
            .zip(target)
            .map(|(&yh, &y)| bce_loss(y, yh))
            .sum();
        Ok(self.push(Tensor::scalar(total / n), Op::Bce(pred, target.to_vec())))
    }

    /// Mean over rows of `KL(target_row || pred_row)`. Both must be row
    /// distributions; zero target entries contribute nothing.
    pub fn kld_loss(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let (r, c) = self.dims("kld_loss", pred)?;
        let (tr, tc) = target.dims("kld_loss")?;
        if (r, c) != (tr, tc) {
            return Err(Error::shape(
                "kld_loss",
                format!("prediction {r}x{c} vs target {tr}x{tc}"),
            ));
        }
        let p = self.value(pred);
        let mut total = 0.0;
        for i in 0..r {
            total += kld_loss(target.row(i), p.row(i))?;
        }
        Ok(self.push(
            Tensor::scalar(total / r as f64),
            Op::Kld(pred, target.data().to_vec()),
        ))
    }

    /// Gradients of the scalar `output` with respect to every node.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let (r, c) = self.dims("backward", output)?;
        if (r, c) != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("output must be 1x1, got {r}x{c}"),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::new();
        grads.resize_with(output.0 + 1, || None);
        grads[output.0] = Some(Tensor::scalar(1.0));

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let y = &node.value;
        let mut acc = |v: Var, t: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&t),
            slot @ None => *slot = Some(t),
        };
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let va = self.value(*a);
                let vb = self.value(*b);
                acc(*a, g.matmul_raw(&vb.transpose()));
                acc(*b, va.transpose().matmul_raw(g));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::AddRow(a, b) => {
                let c = g.cols();
                let mut col_sums = vec![0.0; c];
                for chunk in g.data().chunks(c) {
                    for (s, v) in col_sums.iter_mut().zip(chunk) {
                        *s += v;
                    }
                }
                acc(*a, g.clone());
                acc(*b, self.value(*b).with_data(col_sums));
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let va = self.value(*a).data();
                let vb = self.value(*b).data();
                acc(*a, g.with_data(g.data().iter().zip(vb).map(|(x, y)| x * y).collect()));
                acc(*b, g.with_data(g.data().iter().zip(va).map(|(x, y)| x * y).collect()));
            }
            Op::Scale(a, s) => acc(*a, g.map(|x| x * s)),
            Op::Concat(parts, axis) => {
                let cols = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let vp = self.value(p);
                    let (pr, pc) = (vp.rows(), vp.cols());
                    let data: Vec<f64> = match axis {
                        Axis::Rows => g.data()[offset * cols..(offset + pr) * cols].to_vec(),
                        Axis::Cols => (0..pr)
                            .flat_map(|r| g.row(r)[offset..offset + pc].iter().copied())
                            .collect(),
                    };
                    offset += match axis {
                        Axis::Rows => pr,
                        Axis::Cols => pc,
                    };
                    acc(p, vp.with_data(data));
                }
            }
            Op::SliceCols(x, start) => {
                let vx = self.value(*x);
                let (r, c) = (vx.rows(), vx.cols());
                let w = g.cols();
                let mut data = vec![0.0; r * c];
                for i in 0..r {
                    data[i * c + start..i * c + start + w].copy_from_slice(g.row(i));
                }
                acc(*x, vx.with_data(data));
            }
            Op::SelectRows(x, rows) => {
                let vx = self.value(*x);
                let c = vx.cols();
                let mut data = vec![0.0; vx.len()];
                for (k, &r) in rows.iter().enumerate() {
                    for (d, s) in data[r * c..(r + 1) * c].iter_mut().zip(g.row(k)) {
                        *d += s;
                    }
                }
                acc(*x, vx.with_data(data));
            }
            Op::Transpose(x) => acc(*x, g.transpose()),
            Op::Tanh(x) => acc(
                *x,
                g.with_data(g.data().iter().zip(y.data()).map(|(g, y)| g * (1.0 - y * y)).collect()),
            ),
            Op::Relu(x) => {
                let vx = self.value(*x).data();
                acc(
                    *x,
                    g.with_data(
                        g.data()
                            .iter()
                            .zip(vx)
                            .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                            .collect(),
                    ),
                )
            }
            Op::Sigmoid(x) => acc(
                *x,
                g.with_data(g.data().iter().zip(y.data()).map(|(g, y)| g * y * (1.0 - y)).collect()),
            ),
            Op::Softmax(x, axis) => {
                let (r, c) = (y.rows(), y.cols());
                let mut data = vec![0.0; r * c];
                match axis {
                    Axis::Cols => {
                        for i in 0..r {
                            let (gy, yy) = (g.row(i), y.row(i));
                            let dot: f64 = gy.iter().zip(yy).map(|(a, b)| a * b).sum();
                            for j in 0..c {
                                data[i * c + j] = yy[j] * (gy[j] - dot);
                            }
                        }
                    }
                    Axis::Rows => {
                        for j in 0..c {
                            let dot: f64 = (0..r).map(|i| g.get(i, j) * y.get(i, j)).sum();
                            for i in 0..r {
                                data[i * c + j] = y.get(i, j) * (g.get(i, j) - dot);
                            }
                        }
                    }
                }
                acc(*x, y.with_data(data));
            }
            Op::Dropout(x, mask) => acc(
                *x,
                g.with_data(g.data().iter().zip(mask).map(|(g, m)| g * m).collect()),
            ),
            Op::Sum(x) => {
                let s = g.data()[0];
                acc(*x, self.value(*x).map(|_| s));
            }
            Op::Bce(pred, target) => {
                let s = g.data()[0] / target.len() as f64;
                let p = self.value(*pred);
                let data = p
                    .data()
                    .iter()
                    .zip(target)
                    .map(|(&yh, &t)| {
                        if yh <= LOG_EPS || yh >= 1.0 - LOG_EPS {
                            0.0
                        } else {
                            s * (-t / yh + (1.0 - t) / (1.0 - yh))
                        }
                    })
                    .collect();
                acc(*pred, p.with_data(data));
            }
            Op::Kld(pred, target) => {
                let p = self.value(*pred);
                let s = g.data()[0] / p.rows() as f64;
                let data = p
                    .data()
                    .iter()
                    .zip(target)
                    .map(|(&yh, &t)| {
                        if t == 0.0 || yh <= LOG_EPS || yh >= 1.0 - LOG_EPS {
                            0.0
                        } else {
                            -s * t / yh
                        }
                    })
                    .collect();
                acc(*pred, p.with_data(data));
            }
        }
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Adds the gradient of every parameter bound on `tape` into `store`.
    pub fn accumulate_into(&self, tape: &Tape, store: &mut ParamStore) {
        for (&id, &v) in &tape.bound {
            if let Some(g) = self.get(v) {
                store.get_mut(id).gradient.add_assign(g);
            }
        }
    }
}

/// Binary cross-entropy for one prediction; `y_hat` is clamped to `[ε, 1 − ε]`.
pub fn bce_loss(y: f64, y_hat: f64) -> f64 {
    let p = y_hat.clamp(LOG_EPS, 1.0 - LOG_EPS);
    -y * p.ln() - (1.0 - y) * (1.0 - p).ln()
}

/// `Σ Y·ln(Y / Ŷ)` over matching entries of two distributions; `Ŷ` is
/// clamped to `[ε, 1 − ε]` and zero entries of `Y` contribute nothing.
pub fn kld_loss(target: &[f64], pred: &[f64]) -> Result<f64> {
    if target.len() != pred.len() {
        return Err(Error::shape(
            "kld_loss",
            format!("distributions of length {} and {}", target.len(), pred.len()),
        ));
    }
    for (name, d) in [("target", target), ("prediction", pred)] {
        let sum: f64 = d.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || d.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::Validation(format!(
                "{name} {d:?} is not a probability distribution"
            )));
        }
    }
    Ok(target
        .iter()
        .zip(pred)
        .filter(|(&y, _)| y > 0.0)
        .map(|(&y, &yh)| y * (y / yh.clamp(LOG_EPS, 1.0 - LOG_EPS)).ln())
        .sum())
}
