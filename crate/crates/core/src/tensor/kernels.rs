//! Slice-level numeric kernels shared by [`Tensor`](super::Tensor) and the tape.

use super::Scalar;

/// `out[m×n] += a[m×k] · b[k×n]`. Each output row depends only on the
/// matching row of `a`, with a fixed accumulation order.
pub fn matmul<F: Scalar>(a: &[F], b: &[F], m: usize, k: usize, n: usize, out: &mut [F]) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == F::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

/// `out[m×k] += a[m×n] · b[k×n]ᵀ`.
pub fn matmul_nt<F: Scalar>(a: &[F], b: &[F], m: usize, n: usize, k: usize, out: &mut [F]) {
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for j in 0..k {
            let brow = &b[j * n..(j + 1) * n];
            let mut s = F::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                s += x * y;
            }
            out[i * k + j] += s;
        }
    }
}

/// `out[k×n] += a[m×k]ᵀ · c[m×n]`.
pub fn matmul_tn<F: Scalar>(a: &[F], c: &[F], m: usize, k: usize, n: usize, out: &mut [F]) {
    for i in 0..m {
        let crow = &c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == F::zero() {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &cv) in orow.iter_mut().zip(crow) {
                *o += aip * cv;
            }
        }
    }
}

pub fn transpose<F: Scalar>(a: &[F], m: usize, n: usize) -> Vec<F> {
    let mut out = vec![F::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

/// In-place softmax over the middle axis of an `outer × len × inner` layout.
pub fn softmax<F: Scalar>(x: &mut [F], outer: usize, len: usize, inner: usize) {
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| o * len * inner + j * inner + i;
            let mut max = F::neg_infinity();
            for j in 0..len {
                max = max.max(x[at(j)]);
            }
            let mut sum = F::zero();
            for j in 0..len {
                let e = (x[at(j)] - max).exp();
                x[at(j)] = e;
                sum += e;
            }
            for j in 0..len {
                x[at(j)] /= sum;
            }
        }
    }
}

/// In-place log-softmax over contiguous rows of width `n`.
pub fn log_softmax_rows<F: Scalar>(x: &mut [F], n: usize) {
    for row in x.chunks_mut(n) {
        let max = row.iter().fold(F::neg_infinity(), |m, &v| m.max(v));
        let mut sum = F::zero();
        for &v in row.iter() {
            sum += (v - max).exp();
        }
        let lse = max + sum.ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
}

/// Row-wise layer normalization. Writes the normalized rows into `xhat` and
/// each row's inverse standard deviation into `inv` for the backward pass.
#[allow(clippy::too_many_arguments)]
pub fn layer_norm<F: Scalar>(
    x: &[F],
    gain: &[F],
    bias: &[F],
    eps: F,
    n: usize,
    out: &mut [F],
    xhat: &mut [F],
    inv: &mut [F],
) {
    let nf = F::from_usize(n).unwrap();
    for (r, row) in x.chunks(n).enumerate() {
        let mean = row.iter().fold(F::zero(), |s, &v| s + v) / nf;
        let var = row
            .iter()
            .fold(F::zero(), |s, &v| s + (v - mean) * (v - mean))
            / nf;
        let iv = F::one() / (var + eps).sqrt();
        inv[r] = iv;
        for j in 0..n {
            let h = (row[j] - mean) * iv;
            xhat[r * n + j] = h;
            out[r * n + j] = gain[j] * h + bias[j];
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Tanh-form GELU.
#[inline]
pub fn gelu<F: Scalar>(x: F) -> F {
    let half = F::lit(0.5);
    let inner = F::lit(GELU_C) * (x + F::lit(GELU_A) * x * x * x);
    half * x * (F::one() + inner.tanh())
}

#[inline]
pub fn gelu_grad<F: Scalar>(x: F) -> F {
    let half = F::lit(0.5);
    let inner = F::lit(GELU_C) * (x + F::lit(GELU_A) * x * x * x);
    let t = inner.tanh();
    let dinner = F::lit(GELU_C) * (F::one() + F::lit(3.0 * GELU_A) * x * x);
    half * (F::one() + t) + half * x * (F::one() - t * t) * dinner
}
