//! Binned Gaussian value distributions.
//!
//! A distribution over values in `R^d` is described by `B` bins with fixed
//! centers `c_b`. Each bin carries an assignment probability `q_b`, an offset
//! `mu_b` from its center and an isotropic scale `sigma_b`. The raw head output
//! for one query is laid out bin-major, `[logit, mu_1..mu_d, log_sigma]` per bin.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor, Var};

pub const SIGMA_MIN: f64 = 1e-3;
pub const SIGMA_MAX: f64 = 1.0;
/// Weight of the Gaussian term against the bin-assignment term.
pub const DEFAULT_ALPHA: f64 = 0.1;

const KMEANS_SEED: u64 = 0x5eed_b1a5;
const KMEANS_ITERS: usize = 20;
/// Per-channel level cap for lattice bin placement.
const MAX_LATTICE_LEVELS: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinLayout {
    value_dim: usize,
    /// `B × d`, row-major.
    centers: Vec<f64>,
    value_range: Vec<(f64, f64)>,
}

impl BinLayout {
    pub fn new(value_dim: usize, centers: Vec<f64>, value_range: Vec<(f64, f64)>) -> Result<Self> {
        if value_dim == 0 {
            return Err(Error::Config("value dimension must be positive".into()));
        }
        if centers.is_empty() || !centers.len().is_multiple_of(value_dim) {
            return Err(Error::Config(format!(
                "{} center coordinates do not form bins of dimension {value_dim}",
                centers.len()
            )));
        }
        if value_range.len() != value_dim {
            return Err(Error::Config(format!(
                "value range has {} channels, expected {value_dim}",
                value_range.len()
            )));
        }
        if let Some((lo, hi)) = value_range.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Config(format!("empty value range [{lo}, {hi}]")));
        }
        let layout = BinLayout {
            value_dim,
            centers,
            value_range,
        };
        for b in 0..layout.bins() {
            let c = layout.center(b);
            if !layout.contains(c) {
                return Err(Error::Config(format!("bin center {c:?} outside value range")));
            }
            for other in 0..b {
                if layout.center(other) == c {
                    return Err(Error::Config(format!("duplicate bin center {c:?}")));
                }
            }
        }
        Ok(layout)
    }

    pub fn bins(&self) -> usize {
        self.centers.len() / self.value_dim
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn value_range(&self) -> &[(f64, f64)] {
        &self.value_range
    }

    pub fn center(&self, b: usize) -> &[f64] {
        &self.centers[b * self.value_dim..(b + 1) * self.value_dim]
    }

    /// Width of one raw head row: `B · (d + 2)`.
    pub fn raw_width(&self) -> usize {
        self.bins() * (self.value_dim + 2)
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.iter()
            .zip(&self.value_range)
            .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    pub fn clamp(&self, v: &mut [f64]) {
        for (x, (lo, hi)) in v.iter_mut().zip(&self.value_range) {
            *x = x.clamp(*lo, *hi);
        }
    }

    /// Index of the center nearest to `v`; the lowest index wins ties.
    pub fn closest_bin(&self, v: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for b in 0..self.bins() {
            let d: f64 = self
                .center(b)
                .iter()
                .zip(v)
                .map(|(c, x)| (x - c) * (x - c))
                .sum();
            if d < best_d {
                best = b;
                best_d = d;
            }
        }
        best
    }
}

/// Places `bins` centers over the value range.
///
/// One channel: uniform spacing at cell centers. Several channels: k-means
/// over `training_values` (flat `N × d`) when given, otherwise the first
/// `bins` points of the smallest uniform lattice holding that many.
pub fn make_bins(
    bins: usize,
    value_dim: usize,
    value_range: &[(f64, f64)],
    training_values: Option<&[f64]>,
) -> Result<BinLayout> {
    if bins == 0 {
        return Err(Error::Config("bin count must be at least 1".into()));
    }
    if value_range.len() != value_dim {
        return Err(Error::Config(format!(
            "value range has {} channels, expected {value_dim}",
            value_range.len()
        )));
    }
    let centers = if value_dim == 1 {
        let (lo, hi) = value_range[0];
        (0..bins)
            .map(|b| lo + (hi - lo) * (b as f64 + 0.5) / bins as f64)
            .collect()
    } else if let Some(values) = training_values {
        kmeans_centers(bins, value_dim, values)?
    } else {
        lattice_centers(bins, value_dim, value_range)?
    };
    BinLayout::new(value_dim, centers, value_range.to_vec())
}

fn lattice_centers(bins: usize, d: usize, range: &[(f64, f64)]) -> Result<Vec<f64>> {
    let mut levels = 1usize;
    while levels.checked_pow(d as u32).is_some_and(|cap| cap < bins) {
        levels += 1;
        if levels > MAX_LATTICE_LEVELS {
            return Err(Error::Config(format!(
                "{bins} bins exceed the lattice capacity for {d} channels"
            )));
        }
    }
    let mut centers = Vec::with_capacity(bins * d);
    for b in 0..bins {
        let mut rem = b;
        let mut point = vec![0.0; d];
        for ch in (0..d).rev() {
            let level = rem % levels;
            rem /= levels;
            let (lo, hi) = range[ch];
            point[ch] = lo + (hi - lo) * (level as f64 + 0.5) / levels as f64;
        }
        centers.extend(point);
    }
    Ok(centers)
}

fn kmeans_centers(bins: usize, d: usize, values: &[f64]) -> Result<Vec<f64>> {
    if !values.len().is_multiple_of(d) {
        return Err(Error::Config("training values are not a multiple of the value dimension".into()));
    }
    let points: Vec<&[f64]> = values.chunks(d).collect();
    let mut distinct: Vec<&[f64]> = Vec::new();
    for p in &points {
        if !distinct.contains(p) {
            distinct.push(p);
        }
    }
    if distinct.len() < bins {
        return Err(Error::Config(format!(
            "{bins} bins requested but only {} distinct training values",
            distinct.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(KMEANS_SEED);
    distinct.shuffle(&mut rng);
    let mut centers: Vec<f64> = distinct[..bins].iter().flat_map(|p| p.iter().copied()).collect();

    for _ in 0..KMEANS_ITERS {
        let mut sums = vec![0.0; bins * d];
        let mut counts = vec![0usize; bins];
        for p in &points {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for b in 0..bins {
                let dist: f64 = centers[b * d..(b + 1) * d]
                    .iter()
                    .zip(p.iter())
                    .map(|(c, x)| (x - c) * (x - c))
                    .sum();
                if dist < best_d {
                    best = b;
                    best_d = dist;
                }
            }
            counts[best] += 1;
            for (s, x) in sums[best * d..(best + 1) * d].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        // Empty clusters keep their previous center.
        for b in 0..bins {
            if counts[b] > 0 {
                for ch in 0..d {
                    centers[b * d + ch] = sums[b * d + ch] / counts[b] as f64;
                }
            }
        }
    }
    Ok(centers)
}

/// Predicted distribution for one query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistParams {
    pub q: Vec<f64>,
    /// `B × d` offsets from the bin centers.
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl DistParams {
    /// Maps one raw head row (`B · (d + 2)` values) to distribution parameters:
    /// softmax over logits, offsets unchanged, `sigma = exp(s)` clamped.
    pub fn from_raw(raw: &[f64], layout: &BinLayout) -> Result<Self> {
        let (bins, d) = (layout.bins(), layout.value_dim());
        if raw.len() != layout.raw_width() {
            return Err(Error::dim("head_to_params", &[raw.len()], &[bins, d + 2]));
        }
        let stride = d + 2;
        let logits: Vec<f64> = (0..bins).map(|b| raw[b * stride]).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let q = exps.iter().map(|e| e / z).collect();
        let mu = (0..bins)
            .flat_map(|b| raw[b * stride + 1..b * stride + 1 + d].iter().copied())
            .collect();
        let sigma = (0..bins)
            .map(|b| raw[b * stride + d + 1].exp().clamp(SIGMA_MIN, SIGMA_MAX))
            .collect();
        Ok(DistParams { q, mu, sigma })
    }

    pub fn bins(&self) -> usize {
        self.q.len()
    }

    pub fn mu(&self, b: usize) -> &[f64] {
        let d = self.mu.len() / self.q.len();
        &self.mu[b * d..(b + 1) * d]
    }

    /// Gaussian mean of bin `b`: `c_b + mu_b`.
    pub fn component_mean(&self, b: usize, layout: &BinLayout) -> Vec<f64> {
        layout
            .center(b)
            .iter()
            .zip(self.mu(b))
            .map(|(c, m)| c + m)
            .collect()
    }
}

/// Raw head output of shape `B × (d + 2)` (or any shape with that many
/// elements) to [`DistParams`].
pub fn head_to_params<F: Scalar>(raw: &Tensor<F>, layout: &BinLayout) -> Result<DistParams> {
    DistParams::from_raw(&raw.to_f64(), layout)
}

/// Splits a `[Q × B(d+2)]` raw head output into one [`DistParams`] per row.
pub fn head_rows_to_params<F: Scalar>(raw: &Tensor<F>, layout: &BinLayout) -> Result<Vec<DistParams>> {
    if raw.cols() != layout.raw_width() {
        return Err(Error::dim(
            "head_to_params",
            raw.shape(),
            &[layout.bins(), layout.value_dim() + 2],
        ));
    }
    raw.to_f64()
        .chunks(layout.raw_width())
        .map(|row| DistParams::from_raw(row, layout))
        .collect()
}

/// Closest-bin log-likelihood:
/// `log q_b* - alpha * (log sigma_b* + |v - c_b* - mu_b*|^2 / sigma_b*^2)`.
pub fn log_likelihood(value: &[f64], params: &DistParams, layout: &BinLayout, alpha: f64) -> f64 {
    let b = layout.closest_bin(value);
    let sigma = params.sigma[b];
    let sq: f64 = value
        .iter()
        .zip(layout.center(b))
        .zip(params.mu(b))
        .map(|((v, c), m)| {
            let r = v - c - m;
            r * r
        })
        .sum();
    params.q[b].ln() - alpha * (sigma.ln() + sq / (sigma * sigma))
}

/// `sum_b q_b (mu_b + c_b)`
pub fn expected_value(params: &DistParams, layout: &BinLayout) -> Vec<f64> {
    let d = layout.value_dim();
    let mut out = vec![0.0; d];
    for b in 0..layout.bins() {
        for (o, (c, m)) in out.iter_mut().zip(layout.center(b).iter().zip(params.mu(b))) {
            *o += params.q[b] * (m + c);
        }
    }
    out
}

/// Draws a bin from `q`, then a value from that bin's Gaussian, clamped to
/// the value range.
pub fn sample_value<R: Rng + ?Sized>(params: &DistParams, layout: &BinLayout, rng: &mut R) -> Vec<f64> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut bin = params.bins() - 1;
    for (b, q) in params.q.iter().enumerate() {
        acc += q;
        if u < acc {
            bin = b;
            break;
        }
    }
    let sigma = params.sigma[bin];
    let mut v: Vec<f64> = params
        .component_mean(bin, layout)
        .into_iter()
        .map(|m| {
            let z: f64 = rng.sample(StandardNormal);
            m + sigma * z
        })
        .collect();
    layout.clamp(&mut v);
    v
}

/// Differentiable closest-bin log-likelihood of `targets` (flat `Q × d`)
/// under a raw head output `[Q × B(d+2)]`. Returns `[Q × 1]`.
pub fn head_log_likelihood<'t, F: Scalar>(
    raw: Var<'t, F>,
    targets: &[f64],
    layout: &BinLayout,
    alpha: f64,
) -> Result<Var<'t, F>> {
    let shape = raw.shape();
    let (bins, d) = (layout.bins(), layout.value_dim());
    let width = layout.raw_width();
    if shape.len() != 2 || shape[1] != width || targets.len() != shape[0] * d {
        return Err(Error::dim("head_log_likelihood", &shape, &[targets.len() / d.max(1), width]));
    }
    let rows = shape[0];
    let stride = d + 2;
    let tape = raw.tape();

    let mut logit_idx = Vec::with_capacity(rows * bins);
    let mut mu_idx = Vec::with_capacity(rows * d);
    let mut s_idx = Vec::with_capacity(rows);
    let mut residual_target = Vec::with_capacity(rows * d);
    let mut best = Vec::with_capacity(rows);
    for r in 0..rows {
        let v = &targets[r * d..(r + 1) * d];
        let b = layout.closest_bin(v);
        best.push(r * bins + b);
        logit_idx.extend((0..bins).map(|k| r * width + k * stride));
        mu_idx.extend((0..d).map(|j| r * width + b * stride + 1 + j));
        s_idx.push(r * width + b * stride + d + 1);
        residual_target.extend(v.iter().zip(layout.center(b)).map(|(x, c)| x - c));
    }

    let logits = raw.gather(logit_idx, vec![rows, bins])?;
    let log_q = logits.log_softmax().gather(best, vec![rows, 1])?;
    let mu = raw.gather(mu_idx, vec![rows, d])?;
    let log_sigma = raw
        .gather(s_idx, vec![rows, 1])?
        .clamp(F::lit(SIGMA_MIN.ln()), F::lit(SIGMA_MAX.ln()));
    let target = tape.constant(Tensor::from_f64(vec![rows, d], &residual_target)?);
    let sq = target.sub(mu)?.square().sum_rows();
    let inv_var = log_sigma.scale(F::lit(-2.0)).exp();
    let penalty = log_sigma.add(sq.mul(inv_var)?)?;
    log_q.sub(penalty.scale(F::lit(alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tape;

    fn two_bin() -> (BinLayout, DistParams) {
        let layout = BinLayout::new(1, vec![-0.5, 0.5], vec![(-1.0, 1.0)]).unwrap();
        let params = DistParams {
            q: vec![0.25, 0.75],
            mu: vec![0.0, 0.0],
            sigma: vec![1.0, 1.0],
        };
        (layout, params)
    }

    #[test]
    fn uniform_bins() {
        let l = make_bins(1, 1, &[(-1.0, 1.0)], None).unwrap();
        assert_eq!(l.center(0), &[0.0]);

        let l = make_bins(4, 1, &[(0.0, 1.0)], None).unwrap();
        let c: Vec<f64> = (0..4).map(|b| l.center(b)[0]).collect();
        assert_eq!(c, vec![0.125, 0.375, 0.625, 0.875]);

        let l = make_bins(256, 1, &[(-1.0, 1.0)], None).unwrap();
        for b in 0..256 {
            let expect = -1.0 + 2.0 * (b as f64 + 0.5) / 256.0;
            assert!((l.center(b)[0] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_bins_rejected() {
        assert!(matches!(make_bins(0, 1, &[(-1.0, 1.0)], None), Err(Error::Config(_))));
    }

    #[test]
    fn lattice_bins_for_color() {
        let range = vec![(-1.0, 1.0); 3];
        let l = make_bins(10, 3, &range, None).unwrap();
        assert_eq!(l.bins(), 10);
        let l = make_bins(8, 3, &range, None).unwrap();
        // 2 levels per channel, every corner of the cube's inner lattice
        for b in 0..8 {
            assert!(l.center(b).iter().all(|v| v.abs() == 0.5));
        }
        assert!(make_bins(257 * 257 * 257, 3, &range, None).is_err());
    }

    #[test]
    fn kmeans_bins_recover_clusters() {
        let mut values = Vec::new();
        for i in 0..50 {
            let e = (i as f64) * 1e-3;
            values.extend([-0.8 + e, -0.8, 0.6 - e, 0.6]);
        }
        let l = make_bins(2, 2, &[(-1.0, 1.0), (-1.0, 1.0)], Some(&values)).unwrap();
        let mut firsts: Vec<f64> = (0..2).map(|b| l.center(b)[0]).collect();
        firsts.sort_by(f64::total_cmp);
        assert!((firsts[0] - (-0.8 + 0.0245)).abs() < 1e-9);
        assert!((firsts[1] - (0.6 - 0.0245)).abs() < 1e-9);
    }

    #[test]
    fn closest_bin_ties_go_low() {
        let (layout, _) = two_bin();
        assert_eq!(layout.closest_bin(&[0.0]), 0);
        assert_eq!(layout.closest_bin(&[0.01]), 1);
    }

    #[test]
    fn log_likelihood_hand_values() {
        let (layout, params) = two_bin();
        let ll = log_likelihood(&[0.4], &params, &layout, 0.1);
        assert!((ll - (-0.288682)).abs() < 1e-6, "{ll}");
        let ll = log_likelihood(&[-0.5], &params, &layout, 0.1);
        assert!((ll - (-1.386294)).abs() < 1e-6, "{ll}");
    }

    #[test]
    fn log_likelihood_at_center_is_log_q() {
        let (layout, params) = two_bin();
        let ll = log_likelihood(&[0.5], &params, &layout, 0.1);
        assert_eq!(ll, 0.75f64.ln());
    }

    #[test]
    fn expected_value_examples() {
        let (layout, _) = two_bin();
        let p = DistParams {
            q: vec![0.25, 0.75],
            mu: vec![0.1, -0.1],
            sigma: vec![1.0, 1.0],
        };
        assert!((expected_value(&p, &layout)[0] - 0.2).abs() < 1e-15);

        let single = BinLayout::new(1, vec![0.3], vec![(-1.0, 1.0)]).unwrap();
        let p = DistParams {
            q: vec![1.0],
            mu: vec![-0.05],
            sigma: vec![0.5],
        };
        assert_eq!(expected_value(&p, &single), vec![0.3 - 0.05]);

        let l4 = make_bins(4, 1, &[(0.0, 1.0)], None).unwrap();
        let p = DistParams {
            q: vec![0.25; 4],
            mu: vec![0.0; 4],
            sigma: vec![1.0; 4],
        };
        assert!((expected_value(&p, &l4)[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_raw_gives_uniform_unit_params() {
        let l = make_bins(5, 1, &[(-1.0, 1.0)], None).unwrap();
        let raw = Tensor::<f32>::zeros(vec![5, 3]);
        let p = head_to_params(&raw, &l).unwrap();
        assert!(p.q.iter().all(|&q| (q - 0.2).abs() < 1e-15));
        assert!(p.mu.iter().all(|&m| m == 0.0));
        assert!(p.sigma.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn head_shape_mismatch_is_dimension_error() {
        let l = make_bins(5, 1, &[(-1.0, 1.0)], None).unwrap();
        let raw = Tensor::<f32>::zeros(vec![5, 2]);
        assert!(matches!(head_to_params(&raw, &l), Err(Error::Dimension { .. })));
    }

    #[test]
    fn sigma_is_clamped() {
        let l = make_bins(2, 1, &[(-1.0, 1.0)], None).unwrap();
        let p = DistParams::from_raw(&[0.0, 0.0, 5.0, 0.0, 0.0, -20.0], &l).unwrap();
        assert_eq!(p.sigma, vec![SIGMA_MAX, SIGMA_MIN]);
    }

    #[test]
    fn deterministic_limit_sampling() {
        let l = make_bins(3, 1, &[(-1.0, 1.0)], None).unwrap();
        let p = DistParams {
            q: vec![0.0, 1.0, 0.0],
            mu: vec![0.0, 0.2, 0.0],
            sigma: vec![1.0, SIGMA_MIN, 1.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<f64> = (0..2000).map(|_| sample_value(&p, &l, &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64).sqrt();
        assert!((mean - 0.2).abs() < 1e-4);
        assert!(sd <= 1e-3 * 1.1);
    }

    #[test]
    fn samples_stay_in_range() {
        let l = make_bins(2, 1, &[(-1.0, 1.0)], None).unwrap();
        let p = DistParams {
            q: vec![0.5, 0.5],
            mu: vec![-0.4, 0.4],
            sigma: vec![1.0, 1.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5000 {
            let v = sample_value(&p, &l, &mut rng)[0];
            assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn tape_likelihood_matches_scalar_formula() {
        let layout = make_bins(3, 2, &[(-1.0, 1.0), (-1.0, 1.0)], None).unwrap();
        let raw: Vec<f64> = (0..2 * layout.raw_width())
            .map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.1)
            .collect();
        let targets = [0.3, -0.7, -0.9, 0.95];
        let tape = Tape::<f64>::new();
        let rv = tape.param(Tensor::from_f64(vec![2, layout.raw_width()], &raw).unwrap());
        let ll = head_log_likelihood(rv, &targets, &layout, 0.1).unwrap().value();
        for r in 0..2 {
            let p = DistParams::from_raw(&raw[r * layout.raw_width()..(r + 1) * layout.raw_width()], &layout).unwrap();
            let expect = log_likelihood(&targets[r * 2..r * 2 + 2], &p, &layout, 0.1);
            assert!((ll.data()[r] - expect).abs() < 1e-12);
        }
    }
}
