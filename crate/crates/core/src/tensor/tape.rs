use std::cell::RefCell;

use super::kernels;
use super::{axis_split, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug)]
enum Op<F> {
    Leaf,
    MatMul(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// `x[.. × n] + b[n]`
    AddRow(usize, usize),
    Scale(usize, F),
    Exp(usize),
    Square(usize),
    Gelu(usize),
    Clamp(usize, F, F),
    Softmax {
        x: usize,
        outer: usize,
        len: usize,
        inner: usize,
    },
    LogSoftmax(usize),
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        xhat: Vec<F>,
        inv: Vec<F>,
    },
    Gather(usize, Vec<usize>),
    SliceCols {
        x: usize,
        start: usize,
    },
    ConcatCols(Vec<usize>),
    SumRows(usize),
    Sum(usize),
    Mean(usize),
}

#[derive(Debug)]
struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    requires_grad: bool,
}

/// Eagerly recorded computation. Node ids are assigned in creation order,
/// so reverse id order is a valid reverse topological order.
#[derive(Debug, Default)]
pub struct Tape<F> {
    nodes: RefCell<Vec<Node<F>>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, F> {
    tape: &'t Tape<F>,
    id: usize,
}

impl<F> std::fmt::Debug for Var<'_, F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({})", self.id)
    }
}

/// Leaf gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<F> {
    grads: Vec<Option<Tensor<F>>>,
}

impl<F: Scalar> Gradients<F> {
    pub fn get(&self, v: Var<'_, F>) -> Option<&Tensor<F>> {
        self.grads.get(v.id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var<'_, F>) -> Option<Tensor<F>> {
        self.grads.get_mut(v.id).and_then(|g| g.take())
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a trainable leaf.
    pub fn param(&self, value: Tensor<F>) -> Var<'_, F> {
        self.push(value, Op::Leaf, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor<F>) -> Var<'_, F> {
        self.push(value, Op::Leaf, false)
    }

    fn push(&self, value: Tensor<F>, op: Op<F>, requires_grad: bool) -> Var<'_, F> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn rg(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    /// Runs reverse-mode accumulation from the scalar `loss`.
    pub fn backward(&self, loss: Var<'_, F>) -> Result<Gradients<F>> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.numel() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        if !root.requires_grad {
            return Err(Error::Usage(
                "backward called on a tensor detached from every trainable leaf".into(),
            ));
        }

        let mut grads: Vec<Option<Vec<F>>> = (0..=loss.id).map(|_| None).collect();
        grads[loss.id] = Some(vec![F::one()]);

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                grads[id] = Some(g);
                continue;
            }
            backprop(&nodes, id, &g, &mut grads);
        }

        let out = grads
            .into_iter()
            .enumerate()
            .map(|(id, g)| match (&nodes[id].op, g) {
                (Op::Leaf, Some(g)) if nodes[id].requires_grad => Some(Tensor {
                    shape: nodes[id].value.shape.clone(),
                    data: g,
                }),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads: out })
    }
}

fn accum<F: Scalar>(grads: &mut [Option<Vec<F>>], nodes: &[Node<F>], id: usize, delta: Vec<F>) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(g) => {
            for (a, d) in g.iter_mut().zip(delta) {
                *a += d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

fn backprop<F: Scalar>(nodes: &[Node<F>], id: usize, g: &[F], grads: &mut [Option<Vec<F>>]) {
    let node = &nodes[id];
    let val = |i: usize| &nodes[i].value;
    let wants = |i: usize| nodes[i].requires_grad;
    match &node.op {
        Op::Leaf => {}
        &Op::MatMul(a, b) => {
            let (m, k, n) = (val(a).shape[0], val(a).shape[1], val(b).shape[1]);
            if wants(a) {
                let mut da = vec![F::zero(); m * k];
                kernels::matmul_nt(g, &val(b).data, m, n, k, &mut da);
                accum(grads, nodes, a, da);
            }
            if wants(b) {
                let mut db = vec![F::zero(); k * n];
                kernels::matmul_tn(&val(a).data, g, m, k, n, &mut db);
                accum(grads, nodes, b, db);
            }
        }
        &Op::Transpose(x) => {
            let (m, n) = (val(x).shape[0], val(x).shape[1]);
            accum(grads, nodes, x, kernels::transpose(g, n, m));
        }
        &Op::Add(a, b) => {
            accum(grads, nodes, a, g.to_vec());
            accum(grads, nodes, b, g.to_vec());
        }
        &Op::Sub(a, b) => {
            accum(grads, nodes, a, g.to_vec());
            accum(grads, nodes, b, g.iter().map(|&v| -v).collect());
        }
        &Op::Mul(a, b) => {
            if wants(a) {
                let d = g.iter().zip(&val(b).data).map(|(&g, &y)| g * y).collect();
                accum(grads, nodes, a, d);
            }
            if wants(b) {
                let d = g.iter().zip(&val(a).data).map(|(&g, &x)| g * x).collect();
                accum(grads, nodes, b, d);
            }
        }
        &Op::AddRow(x, b) => {
            accum(grads, nodes, x, g.to_vec());
            if wants(b) {
                let n = val(b).numel();
                let mut db = vec![F::zero(); n];
                for row in g.chunks(n) {
                    for (d, &v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                accum(grads, nodes, b, db);
            }
        }
        &Op::Scale(x, s) => accum(grads, nodes, x, g.iter().map(|&v| v * s).collect()),
        &Op::Exp(x) => {
            let d = g.iter().zip(&node.value.data).map(|(&g, &y)| g * y).collect();
            accum(grads, nodes, x, d);
        }
        &Op::Square(x) => {
            let two = F::lit(2.0);
            let d = g
                .iter()
                .zip(&val(x).data)
                .map(|(&g, &v)| two * g * v)
                .collect();
            accum(grads, nodes, x, d);
        }
        &Op::Gelu(x) => {
            let d = g
                .iter()
                .zip(&val(x).data)
                .map(|(&g, &v)| g * kernels::gelu_grad(v))
                .collect();
            accum(grads, nodes, x, d);
        }
        &Op::Clamp(x, lo, hi) => {
            let d = g
                .iter()
                .zip(&val(x).data)
                .map(|(&g, &v)| if v >= lo && v <= hi { g } else { F::zero() })
                .collect();
            accum(grads, nodes, x, d);
        }
        &Op::Softmax {
            x,
            outer,
            len,
            inner,
        } => {
            let y = &node.value.data;
            let mut d = vec![F::zero(); y.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let at = |j: usize| o * len * inner + j * inner + i;
                    let mut dot = F::zero();
                    for j in 0..len {
                        dot += g[at(j)] * y[at(j)];
                    }
                    for j in 0..len {
                        d[at(j)] = y[at(j)] * (g[at(j)] - dot);
                    }
                }
            }
            accum(grads, nodes, x, d);
        }
        &Op::LogSoftmax(x) => {
            let y = &node.value.data;
            let n = node.value.cols();
            let mut d = vec![F::zero(); y.len()];
            for (r, (grow, yrow)) in g.chunks(n).zip(y.chunks(n)).enumerate() {
                let gsum = grow.iter().fold(F::zero(), |s, &v| s + v);
                for j in 0..n {
                    d[r * n + j] = grow[j] - yrow[j].exp() * gsum;
                }
            }
            accum(grads, nodes, x, d);
        }
        Op::LayerNorm {
            x,
            gain,
            bias,
            xhat,
            inv,
        } => {
            let n = node.value.cols();
            let nf = F::from_usize(n).unwrap();
            let gv = &val(*gain).data;
            if wants(*x) {
                let mut dx = vec![F::zero(); g.len()];
                for (r, grow) in g.chunks(n).enumerate() {
                    let h = &xhat[r * n..(r + 1) * n];
                    let mut s1 = F::zero();
                    let mut s2 = F::zero();
                    for j in 0..n {
                        let dh = grow[j] * gv[j];
                        s1 += dh;
                        s2 += dh * h[j];
                    }
                    for j in 0..n {
                        let dh = grow[j] * gv[j];
                        dx[r * n + j] = inv[r] / nf * (nf * dh - s1 - h[j] * s2);
                    }
                }
                accum(grads, nodes, *x, dx);
            }
            if wants(*gain) {
                let mut dg = vec![F::zero(); n];
                for (grow, h) in g.chunks(n).zip(xhat.chunks(n)) {
                    for j in 0..n {
                        dg[j] += grow[j] * h[j];
                    }
                }
                accum(grads, nodes, *gain, dg);
            }
            if wants(*bias) {
                let mut db = vec![F::zero(); n];
                for grow in g.chunks(n) {
                    for j in 0..n {
                        db[j] += grow[j];
                    }
                }
                accum(grads, nodes, *bias, db);
            }
        }
        Op::Gather(x, idx) => {
            let mut d = vec![F::zero(); val(*x).numel()];
            for (&i, &v) in idx.iter().zip(g) {
                d[i] += v;
            }
            accum(grads, nodes, *x, d);
        }
        &Op::SliceCols { x, start } => {
            let n = val(x).cols();
            let w = node.value.cols();
            let mut d = vec![F::zero(); val(x).numel()];
            for (r, grow) in g.chunks(w).enumerate() {
                d[r * n + start..r * n + start + w].copy_from_slice(grow);
            }
            accum(grads, nodes, x, d);
        }
        Op::ConcatCols(parts) => {
            let total = node.value.cols();
            let mut offset = 0;
            for &p in parts {
                let w = val(p).cols();
                if wants(p) {
                    let mut d = Vec::with_capacity(val(p).numel());
                    for grow in g.chunks(total) {
                        d.extend_from_slice(&grow[offset..offset + w]);
                    }
                    accum(grads, nodes, p, d);
                }
                offset += w;
            }
        }
        &Op::SumRows(x) => {
            let n = val(x).cols();
            let mut d = Vec::with_capacity(val(x).numel());
            for &v in g {
                d.extend(std::iter::repeat_n(v, n));
            }
            accum(grads, nodes, x, d);
        }
        &Op::Sum(x) => accum(grads, nodes, x, vec![g[0]; val(x).numel()]),
        &Op::Mean(x) => {
            let n = val(x).numel();
            accum(grads, nodes, x, vec![g[0] / F::from_usize(n).unwrap(); n]);
        }
    }
}

impl<'t, F: Scalar> Var<'t, F> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<F> {
        self.tape
    }

    pub fn value(&self) -> Tensor<F> {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape.clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    fn with<R>(&self, f: impl FnOnce(&Tensor<F>) -> R) -> R {
        f(&self.tape.nodes.borrow()[self.id].value)
    }

    fn with2<R>(&self, other: Var<'t, F>, f: impl FnOnce(&Tensor<F>, &Tensor<F>) -> R) -> R {
        let nodes = self.tape.nodes.borrow();
        f(&nodes[self.id].value, &nodes[other.id].value)
    }

    fn unary(self, value: Tensor<F>, op: Op<F>) -> Var<'t, F> {
        let rg = self.tape.rg(&[self.id]);
        self.tape.push(value, op, rg)
    }

    fn map(self, f: impl Fn(F) -> F, op: Op<F>) -> Var<'t, F> {
        let value = self.with(|t| Tensor {
            shape: t.shape.clone(),
            data: t.data.iter().map(|&v| f(v)).collect(),
        });
        self.unary(value, op)
    }

    fn zip(
        self,
        other: Var<'t, F>,
        name: &'static str,
        f: impl Fn(F, F) -> F,
        op: Op<F>,
    ) -> Result<Var<'t, F>> {
        let value = self.with2(other, |a, b| {
            if a.shape != b.shape {
                return Err(Error::dim(name, &a.shape, &b.shape));
            }
            Ok(Tensor {
                shape: a.shape.clone(),
                data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
            })
        })?;
        let rg = self.tape.rg(&[self.id, other.id]);
        Ok(self.tape.push(value, op, rg))
    }

    pub fn matmul(self, other: Var<'t, F>) -> Result<Var<'t, F>> {
        let value = self.with2(other, |a, b| a.matmul(b))?;
        let rg = self.tape.rg(&[self.id, other.id]);
        Ok(self.tape.push(value, Op::MatMul(self.id, other.id), rg))
    }

    pub fn transpose(self) -> Result<Var<'t, F>> {
        let value = self.with(|t| t.transpose())?;
        Ok(self.unary(value, Op::Transpose(self.id)))
    }

    pub fn add(self, other: Var<'t, F>) -> Result<Var<'t, F>> {
        self.zip(other, "add", |a, b| a + b, Op::Add(self.id, other.id))
    }

    pub fn sub(self, other: Var<'t, F>) -> Result<Var<'t, F>> {
        self.zip(other, "sub", |a, b| a - b, Op::Sub(self.id, other.id))
    }

    pub fn mul(self, other: Var<'t, F>) -> Result<Var<'t, F>> {
        self.zip(other, "mul", |a, b| a * b, Op::Mul(self.id, other.id))
    }

    /// Adds the vector `bias` to every row.
    pub fn add_row(self, bias: Var<'t, F>) -> Result<Var<'t, F>> {
        let value = self.with2(bias, |x, b| {
            if b.numel() != x.cols() {
                return Err(Error::dim("add_row", &x.shape, &b.shape));
            }
            let mut data = x.data.clone();
            for row in data.chunks_mut(b.numel()) {
                for (v, &bv) in row.iter_mut().zip(&b.data) {
                    *v += bv;
                }
            }
            Ok(Tensor {
                shape: x.shape.clone(),
                data,
            })
        })?;
        let rg = self.tape.rg(&[self.id, bias.id]);
        Ok(self.tape.push(value, Op::AddRow(self.id, bias.id), rg))
    }

    pub fn scale(self, s: F) -> Var<'t, F> {
        self.map(|v| v * s, Op::Scale(self.id, s))
    }

    pub fn exp(self) -> Var<'t, F> {
        self.map(|v| v.exp(), Op::Exp(self.id))
    }

    pub fn square(self) -> Var<'t, F> {
        self.map(|v| v * v, Op::Square(self.id))
    }

    pub fn gelu(self) -> Var<'t, F> {
        self.map(kernels::gelu, Op::Gelu(self.id))
    }

    pub fn clamp(self, lo: F, hi: F) -> Var<'t, F> {
        self.map(|v| v.max(lo).min(hi), Op::Clamp(self.id, lo, hi))
    }

    pub fn softmax(self, axis: usize) -> Result<Var<'t, F>> {
        let (value, (outer, len, inner)) = self.with(|t| -> Result<_> {
            let split = axis_split(&t.shape, axis)?;
            Ok((t.softmax(axis)?, split))
        })?;
        Ok(self.unary(
            value,
            Op::Softmax {
                x: self.id,
                outer,
                len,
                inner,
            },
        ))
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(self) -> Var<'t, F> {
        let value = self.with(|t| {
            let mut data = t.data.clone();
            kernels::log_softmax_rows(&mut data, t.cols());
            Tensor {
                shape: t.shape.clone(),
                data,
            }
        });
        self.unary(value, Op::LogSoftmax(self.id))
    }

    pub fn layer_norm(self, gain: Var<'t, F>, bias: Var<'t, F>, eps: F) -> Result<Var<'t, F>> {
        let (value, xhat, inv) = {
            let nodes = self.tape.nodes.borrow();
            let (x, g, b) = (
                &nodes[self.id].value,
                &nodes[gain.id].value,
                &nodes[bias.id].value,
            );
            let n = x.cols();
            if g.numel() != n || b.numel() != n {
                return Err(Error::dim("layer_norm", &x.shape, &g.shape));
            }
            let mut out = vec![F::zero(); x.numel()];
            let mut xhat = vec![F::zero(); x.numel()];
            let mut inv = vec![F::zero(); x.rows()];
            kernels::layer_norm(
                &x.data, &g.data, &b.data, eps, n, &mut out, &mut xhat, &mut inv,
            );
            (
                Tensor {
                    shape: x.shape.clone(),
                    data: out,
                },
                xhat,
                inv,
            )
        };
        let rg = self.tape.rg(&[self.id, gain.id, bias.id]);
        Ok(self.tape.push(
            value,
            Op::LayerNorm {
                x: self.id,
                gain: gain.id,
                bias: bias.id,
                xhat,
                inv,
            },
            rg,
        ))
    }

    /// Picks flat elements `idx` of this tensor into a new tensor of `shape`.
    pub fn gather(self, idx: Vec<usize>, shape: Vec<usize>) -> Result<Var<'t, F>> {
        let value = self.with(|t| {
            if let Some(&bad) = idx.iter().find(|&&i| i >= t.numel()) {
                return Err(Error::Input(format!(
                    "gather index {bad} out of range for {} elements",
                    t.numel()
                )));
            }
            Tensor::new(shape, idx.iter().map(|&i| t.data[i]).collect())
        })?;
        Ok(self.unary(value, Op::Gather(self.id, idx)))
    }

    /// Columns `start..start + width` of a row-major matrix.
    pub fn slice_cols(self, start: usize, width: usize) -> Result<Var<'t, F>> {
        let value = self.with(|t| {
            let n = t.cols();
            if start + width > n || width == 0 {
                return Err(Error::dim("slice_cols", &t.shape, &[start, width]));
            }
            let mut data = Vec::with_capacity(t.rows() * width);
            for row in t.data.chunks(n) {
                data.extend_from_slice(&row[start..start + width]);
            }
            let mut shape = t.shape.clone();
            *shape.last_mut().unwrap() = width;
            Tensor::new(shape, data)
        })?;
        Ok(self.unary(value, Op::SliceCols { x: self.id, start }))
    }

    /// Concatenates matrices with equal row counts along the last axis.
    pub fn concat_cols(parts: &[Var<'t, F>]) -> Result<Var<'t, F>> {
        let tape = parts
            .first()
            .ok_or_else(|| Error::Input("concat_cols of nothing".into()))?
            .tape;
        let value = {
            let nodes = tape.nodes.borrow();
            let first = &nodes[parts[0].id].value;
            let rows = first.rows();
            let mut total = 0;
            for p in parts {
                let t = &nodes[p.id].value;
                if t.rows() != rows {
                    return Err(Error::dim("concat_cols", &first.shape, &t.shape));
                }
                total += t.cols();
            }
            let mut data = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for p in parts {
                    let t = &nodes[p.id].value;
                    let w = t.cols();
                    data.extend_from_slice(&t.data[r * w..(r + 1) * w]);
                }
            }
            Tensor::new(vec![rows, total], data)?
        };
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        let rg = tape.rg(&ids);
        Ok(tape.push(value, Op::ConcatCols(ids), rg))
    }

    /// Sums the last axis, yielding `[rows × 1]`.
    pub fn sum_rows(self) -> Var<'t, F> {
        let value = self.with(|t| {
            let data = t
                .data
                .chunks(t.cols())
                .map(|r| r.iter().fold(F::zero(), |s, &v| s + v))
                .collect::<Vec<_>>();
            Tensor {
                shape: vec![data.len(), 1],
                data,
            }
        });
        self.unary(value, Op::SumRows(self.id))
    }

    pub fn sum(self) -> Var<'t, F> {
        let value = self.with(|t| Tensor::scalar(t.data.iter().fold(F::zero(), |s, &v| s + v)));
        self.unary(value, Op::Sum(self.id))
    }

    pub fn mean(self) -> Var<'t, F> {
        let value = self.with(|t| {
            let s = t.data.iter().fold(F::zero(), |s, &v| s + v);
            Tensor::scalar(s / F::from_usize(t.numel()).unwrap())
        });
        self.unary(value, Op::Mean(self.id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gradient_is_ones() {
        let tape = Tape::<f64>::new();
        let x = tape.param(Tensor::from_f64(vec![2, 3], &[1., 2., 3., 4., 5., 6.]).unwrap());
        let loss = x.sum();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0; 6]);
        assert_eq!(g.get(x).unwrap().shape(), &[2, 3]);
    }

    #[test]
    fn square_sum_gradient_is_twice_input() {
        let tape = Tape::<f64>::new();
        let data = [0.5, -1.5, 2.0];
        let x = tape.param(Tensor::from_f64(vec![3], &data).unwrap());
        let loss = x.mul(x).unwrap().sum();
        let g = tape.backward(loss).unwrap();
        let expect: Vec<f64> = data.iter().map(|v| 2.0 * v).collect();
        assert_eq!(g.get(x).unwrap().data(), &expect[..]);
    }

    #[test]
    fn backward_on_detached_tensor_is_usage_error() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_f64(vec![2], &[1.0, 2.0]).unwrap());
        let loss = x.sum();
        assert!(matches!(tape.backward(loss), Err(Error::Usage(_))));
    }

    #[test]
    fn backward_requires_scalar() {
        let tape = Tape::<f64>::new();
        let x = tape.param(Tensor::from_f64(vec![2], &[1.0, 2.0]).unwrap());
        assert!(matches!(tape.backward(x.exp()), Err(Error::Usage(_))));
    }

    #[test]
    fn shared_input_accumulates_once_per_use() {
        // loss = sum(x) + sum(x) → grad 2
        let tape = Tape::<f64>::new();
        let x = tape.param(Tensor::from_f64(vec![2], &[1.0, 2.0]).unwrap());
        let loss = x.add(x).unwrap().sum();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[2.0, 2.0]);
    }

    #[test]
    fn constants_get_no_gradient() {
        let tape = Tape::<f64>::new();
        let x = tape.param(Tensor::from_f64(vec![2], &[1.0, 2.0]).unwrap());
        let c = tape.constant(Tensor::from_f64(vec![2], &[3.0, 4.0]).unwrap());
        let loss = x.mul(c).unwrap().sum();
        let g = tape.backward(loss).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(x).unwrap().data(), &[3.0, 4.0]);
    }
}
