//! Dense signals on regular grids and the random draws used for training.
//!
//! Coordinate convention: position component `i` indexes grid axis `i`
//! (row-major, axis 0 slowest). A grid of extent `n` maps cell `j` to the
//! cell center `-1 + (2j + 1) / n`, so the cells tile `[-1, 1]` exactly.
//! Interpolation between cell centers is multilinear; coordinates beyond the
//! outermost centers clamp to the edge cells.

mod idx;
mod pnm;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{QueryBatch, SampleSet};

pub use idx::{load_idx, parse_idx, write_idx};
pub use pnm::{read_pnm, write_pgm, write_pnm, write_ppm};

/// Default value range for every modality.
pub const VALUE_RANGE: (f64, f64) = (-1.0, 1.0);

pub fn cell_center(index: usize, extent: usize) -> f64 {
    -1.0 + (2 * index + 1) as f64 / extent as f64
}

/// Index of the cell containing coordinate `x`.
pub fn cell_index(x: f64, extent: usize) -> usize {
    let u = ((x + 1.0) * 0.5 * extent as f64).floor();
    (u.max(0.0) as usize).min(extent - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    grid_shape: Vec<usize>,
    value_dim: usize,
    /// `N × d`, row-major over the grid.
    values: Vec<f64>,
}

impl Signal {
    pub fn new(grid_shape: Vec<usize>, value_dim: usize, values: Vec<f64>) -> Result<Self> {
        if grid_shape.is_empty() || grid_shape.contains(&0) || value_dim == 0 {
            return Err(Error::Input(format!(
                "invalid signal grid {grid_shape:?} with value dimension {value_dim}"
            )));
        }
        let n: usize = grid_shape.iter().product();
        if values.len() != n * value_dim {
            return Err(Error::dim("signal", &grid_shape, &[values.len()]));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("signal values must be finite".into()));
        }
        Ok(Signal {
            grid_shape,
            value_dim,
            values,
        })
    }

    pub fn constant(grid_shape: Vec<usize>, value: &[f64]) -> Result<Self> {
        let n: usize = grid_shape.iter().product();
        Signal::new(grid_shape, value.len(), value.repeat(n))
    }

    pub fn grid_shape(&self) -> &[usize] {
        &self.grid_shape
    }

    pub fn pos_dim(&self) -> usize {
        self.grid_shape.len()
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    /// Number of grid locations.
    pub fn len(&self) -> usize {
        self.values.len() / self.value_dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, n: usize) -> &[f64] {
        &self.values[n * self.value_dim..(n + 1) * self.value_dim]
    }

    pub fn set_value(&mut self, n: usize, v: &[f64]) {
        self.values[n * self.value_dim..(n + 1) * self.value_dim].copy_from_slice(v);
    }

    /// Multi-index of flat location `n`.
    pub fn unravel(&self, mut n: usize) -> Vec<usize> {
        let mut idx = vec![0; self.grid_shape.len()];
        for (i, &e) in self.grid_shape.iter().enumerate().rev() {
            idx[i] = n % e;
            n /= e;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.grid_shape)
            .fold(0, |acc, (&i, &e)| acc * e + i)
    }

    pub fn cell_position(&self, n: usize) -> Vec<f64> {
        self.unravel(n)
            .iter()
            .zip(&self.grid_shape)
            .map(|(&i, &e)| cell_center(i, e))
            .collect()
    }

    /// Flat index of the cell containing `x`.
    pub fn cell_at(&self, x: &[f64]) -> usize {
        let idx: Vec<usize> = x
            .iter()
            .zip(&self.grid_shape)
            .map(|(&c, &e)| cell_index(c, e))
            .collect();
        self.ravel(&idx)
    }

    /// All cell centers, in flat order.
    pub fn grid_queries(&self) -> QueryBatch {
        grid_queries(&self.grid_shape)
    }
}

pub fn grid_queries(grid_shape: &[usize]) -> QueryBatch {
    let n: usize = grid_shape.iter().product();
    let mut positions = Vec::with_capacity(n * grid_shape.len());
    for mut flat in 0..n {
        let mut idx = vec![0; grid_shape.len()];
        for (i, &e) in grid_shape.iter().enumerate().rev() {
            idx[i] = flat % e;
            flat /= e;
        }
        positions.extend(idx.iter().zip(grid_shape).map(|(&i, &e)| cell_center(i, e)));
    }
    QueryBatch::new(grid_shape.len(), positions).expect("cell centers lie inside the domain")
}

/// Multilinear interpolation at continuous position `x`.
pub fn sample_bilinear(sig: &Signal, x: &[f64]) -> Result<Vec<f64>> {
    let p = sig.pos_dim();
    if x.len() != p {
        return Err(Error::dim("sample_bilinear", &[x.len()], &[p]));
    }
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::Input(format!("non-finite sample position {x:?}")));
    }
    let mut lo = vec![0usize; p];
    let mut hi = vec![0usize; p];
    let mut frac = vec![0.0; p];
    for i in 0..p {
        let e = sig.grid_shape[i];
        let u = (((x[i] + 1.0) * e as f64 - 1.0) * 0.5).clamp(0.0, (e - 1) as f64);
        let i0 = (u.floor() as usize).min(e - 1);
        lo[i] = i0;
        hi[i] = (i0 + 1).min(e - 1);
        frac[i] = u - i0 as f64;
    }
    let d = sig.value_dim;
    let mut out = vec![0.0; d];
    let mut idx = vec![0usize; p];
    for corner in 0..(1usize << p) {
        let mut w = 1.0;
        for i in 0..p {
            if corner >> i & 1 == 1 {
                idx[i] = hi[i];
                w *= frac[i];
            } else {
                idx[i] = lo[i];
                w *= 1.0 - frac[i];
            }
        }
        if w == 0.0 {
            continue;
        }
        let v = sig.value(sig.ravel(&idx));
        for (o, &vv) in out.iter_mut().zip(v) {
            *o += w * vv;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialConfig {
    pub degree: usize,
    pub coeff_range: (f64, f64),
    pub cells: usize,
}

impl Default for PolynomialConfig {
    fn default() -> Self {
        PolynomialConfig {
            degree: 6,
            coeff_range: (-1.0, 1.0),
            cells: 128,
        }
    }
}

/// A random polynomial rasterized on `[-1, 1]`, rescaled to unit max-abs.
#[derive(Clone, Debug)]
pub struct Polynomial {
    /// Ascending powers, before rescaling.
    pub coefficients: Vec<f64>,
    /// Factor applied to every rasterized value.
    pub scale: f64,
    pub signal: Signal,
}

pub fn gen_polynomial<R: Rng + ?Sized>(rng: &mut R, cfg: &PolynomialConfig) -> Result<Polynomial> {
    let (lo, hi) = cfg.coeff_range;
    if !(lo <= hi) || cfg.cells == 0 {
        return Err(Error::Config(format!("invalid polynomial config {cfg:?}")));
    }
    let coefficients: Vec<f64> = (0..=cfg.degree)
        .map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) })
        .collect();
    let raw: Vec<f64> = (0..cfg.cells)
        .map(|j| {
            let x = cell_center(j, cfg.cells);
            let mut power = 1.0;
            let mut sum = 0.0;
            for c in &coefficients {
                sum += c * power;
                power *= x;
            }
            sum
        })
        .collect();
    let max_abs = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if max_abs > 0.0 { 1.0 / max_abs } else { 1.0 };
    let values = raw.iter().map(|v| (v * scale).clamp(-1.0, 1.0)).collect();
    Ok(Polynomial {
        coefficients,
        scale,
        signal: Signal::new(vec![cfg.cells], 1, values)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrawConfig {
    pub s_min: usize,
    pub s_max: usize,
    pub q_size: usize,
    pub log_uniform: bool,
}

impl Default for DrawConfig {
    fn default() -> Self {
        DrawConfig {
            s_min: 4,
            s_max: 2048,
            q_size: 2048,
            log_uniform: true,
        }
    }
}

impl DrawConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s_min < 1 || self.s_min > self.s_max || self.q_size < 1 {
            return Err(Error::Config(format!("invalid draw config {self:?}")));
        }
        Ok(())
    }

    /// Draws a conditioning-set size.
    pub fn sample_size<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.s_min == self.s_max {
            return self.s_min;
        }
        if self.log_uniform {
            // continuous log-uniform over [s_min - 1/2, s_max + 1/2], rounded
            let lo = (self.s_min as f64 - 0.5).ln();
            let hi = (self.s_max as f64 + 0.5).ln();
            let k = rng.random_range(lo..hi).exp().round() as usize;
            k.clamp(self.s_min, self.s_max)
        } else {
            rng.random_range(self.s_min..=self.s_max)
        }
    }
}

/// One self-supervised training example.
#[derive(Clone, Debug)]
pub struct Draw {
    pub samples: SampleSet,
    pub queries: QueryBatch,
    /// `|Q| × d` true values at the queries.
    pub targets: Vec<f64>,
}

fn uniform_positions<R: Rng + ?Sized>(rng: &mut R, count: usize, p: usize) -> Vec<f64> {
    (0..count * p).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Draws a conditioning set and an independent query batch at uniform
/// continuous positions, with values interpolated from `sig`.
pub fn draw_sq<R: Rng + ?Sized>(sig: &Signal, cfg: &DrawConfig, rng: &mut R) -> Result<Draw> {
    cfg.validate()?;
    let p = sig.pos_dim();
    let d = sig.value_dim();
    let k = cfg.sample_size(rng);
    let s_pos = uniform_positions(rng, k, p);
    let q_pos = uniform_positions(rng, cfg.q_size, p);
    let mut s_val = Vec::with_capacity(k * d);
    for x in s_pos.chunks(p) {
        s_val.extend(sample_bilinear(sig, x)?);
    }
    let mut targets = Vec::with_capacity(cfg.q_size * d);
    for x in q_pos.chunks(p) {
        targets.extend(sample_bilinear(sig, x)?);
    }
    Ok(Draw {
        samples: SampleSet::new(p, d, s_pos, s_val)?,
        queries: QueryBatch::new(p, q_pos)?,
        targets,
    })
}

/// Observes `count` distinct grid cells (at their centers) chosen uniformly.
pub fn observe_cells<R: Rng + ?Sized>(sig: &Signal, count: usize, rng: &mut R) -> Result<SampleSet> {
    if count > sig.len() {
        return Err(Error::Input(format!(
            "cannot observe {count} cells of a {}-cell signal",
            sig.len()
        )));
    }
    let mut set = SampleSet::empty(sig.pos_dim(), sig.value_dim());
    for n in rand::seq::index::sample(rng, sig.len(), count) {
        set.push(&sig.cell_position(n), sig.value(n))?;
    }
    Ok(set)
}

/// Area-weighted box resampling of a 2-D signal to `rows × cols`.
pub fn resample_box(sig: &Signal, rows: usize, cols: usize) -> Result<Signal> {
    if sig.pos_dim() != 2 || rows == 0 || cols == 0 {
        return Err(Error::Input(format!(
            "box resampling needs a 2-D signal and positive target, got {:?} -> {rows}x{cols}",
            sig.grid_shape()
        )));
    }
    let (sr, sc) = (sig.grid_shape[0], sig.grid_shape[1]);
    let d = sig.value_dim;
    let wr = overlap_weights(sr, rows);
    let wc = overlap_weights(sc, cols);
    let mut values = vec![0.0; rows * cols * d];
    for (r, row_w) in wr.iter().enumerate() {
        for (c, col_w) in wc.iter().enumerate() {
            let out = &mut values[(r * cols + c) * d..(r * cols + c + 1) * d];
            let mut total = 0.0;
            for &(i, a) in row_w {
                for &(j, b) in col_w {
                    let w = a * b;
                    total += w;
                    for (o, v) in out.iter_mut().zip(sig.value(i * sc + j)) {
                        *o += w * v;
                    }
                }
            }
            for o in out.iter_mut() {
                *o /= total;
            }
        }
    }
    Signal::new(vec![rows, cols], d, values)
}

/// For each target cell, the source cells it covers and the overlap length.
fn overlap_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|t| {
            let (a, b) = (t as f64 * ratio, (t + 1) as f64 * ratio);
            let first = a.floor() as usize;
            let last = (b.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let w = (b.min((s + 1) as f64) - a.max(s as f64)).max(0.0);
                    (w > 1e-12).then_some((s, w))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bilinear_identity_at_centers() {
        let values: Vec<f64> = (0..12).map(|v| v as f64 * 0.1 - 0.5).collect();
        let sig = Signal::new(vec![3, 4], 1, values.clone()).unwrap();
        for n in 0..12 {
            let v = sample_bilinear(&sig, &sig.cell_position(n)).unwrap();
            assert!((v[0] - values[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_midpoint() {
        let sig = Signal::new(vec![2], 1, vec![0.0, 1.0]).unwrap();
        assert!((sample_bilinear(&sig, &[0.0]).unwrap()[0] - 0.5).abs() < 1e-15);
        // clamped beyond the outer centers
        assert_eq!(sample_bilinear(&sig, &[-1.0]).unwrap()[0], 0.0);
        assert_eq!(sample_bilinear(&sig, &[1.0]).unwrap()[0], 1.0);
    }

    #[test]
    fn bilinear_exact_on_planes() {
        let (a, b, c) = (0.07, -0.03, 0.1);
        let (rows, cols) = (9, 7);
        let values = (0..rows * cols)
            .map(|n| a * (n / cols) as f64 + b * (n % cols) as f64 + c)
            .collect();
        let sig = Signal::new(vec![rows, cols], 1, values).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            // stay between the outer centers, where no clamping happens
            let x = [
                rng.random_range(cell_center(0, rows)..cell_center(rows - 1, rows)),
                rng.random_range(cell_center(0, cols)..cell_center(cols - 1, cols)),
            ];
            let i = ((x[0] + 1.0) * rows as f64 - 1.0) / 2.0;
            let j = ((x[1] + 1.0) * cols as f64 - 1.0) / 2.0;
            let v = sample_bilinear(&sig, &x).unwrap()[0];
            assert!((v - (a * i + b * j + c)).abs() < 1e-6);
        }
    }

    #[test]
    fn bilinear_rejects_non_finite() {
        let sig = Signal::new(vec![2], 1, vec![0.0, 1.0]).unwrap();
        assert!(matches!(sample_bilinear(&sig, &[f64::NAN]), Err(Error::Input(_))));
    }

    #[test]
    fn constant_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = PolynomialConfig {
            degree: 0,
            coeff_range: (-0.4, -0.4),
            cells: 16,
        };
        let p = gen_polynomial(&mut rng, &cfg).unwrap();
        assert_eq!(p.coefficients, vec![-0.4]);
        let first = p.signal.values()[0];
        assert!(p.signal.values().iter().all(|&v| v == first));
        assert!((first - (-0.4 * p.scale)).abs() < 1e-15);
    }

    #[test]
    fn polynomial_matches_horner() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = gen_polynomial(&mut rng, &PolynomialConfig::default()).unwrap();
            assert_eq!(p.coefficients.len(), 7);
            for j in 0..128 {
                let x = cell_center(j, 128);
                let horner = p.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c);
                assert!((p.signal.value(j)[0] - horner * p.scale).abs() < 1e-6);
            }
            let max = p.signal.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((max - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn draw_sizes_and_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sig = Signal::new(vec![8, 8], 1, (0..64).map(|v| v as f64 / 64.0).collect()).unwrap();
        let cfg = DrawConfig::default();
        for _ in 0..20 {
            let draw = draw_sq(&sig, &cfg, &mut rng).unwrap();
            assert!((4..=2048).contains(&draw.samples.len()));
            assert_eq!(draw.queries.len(), 2048);
            for i in 0..draw.queries.len() {
                let v = sample_bilinear(&sig, draw.queries.position(i)).unwrap();
                assert_eq!(v[0], draw.targets[i]);
            }
            for k in 0..draw.samples.len() {
                let v = sample_bilinear(&sig, draw.samples.position(k)).unwrap();
                assert_eq!(v, draw.samples.value(k));
            }
        }
        let poly = DrawConfig {
            s_min: 4,
            s_max: 20,
            q_size: 20,
            log_uniform: false,
        };
        let line = Signal::new(vec![128], 1, vec![0.0; 128]).unwrap();
        for _ in 0..100 {
            let draw = draw_sq(&line, &poly, &mut rng).unwrap();
            assert!((4..=20).contains(&draw.samples.len()));
            assert_eq!(draw.queries.len(), 20);
        }
    }

    #[test]
    fn log_uniform_median() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = DrawConfig::default();
        let mut logs: Vec<f64> = (0..10_000)
            .map(|_| (cfg.sample_size(&mut rng) as f64).ln())
            .collect();
        logs.sort_by(f64::total_cmp);
        let median = logs[logs.len() / 2];
        let mid = (4.0f64 * 2048.0).ln() / 2.0;
        assert!((median - mid).abs() < 0.05 * mid, "{median} vs {mid}");
    }

    #[test]
    fn invalid_draw_config() {
        let cfg = DrawConfig {
            s_min: 5,
            s_max: 4,
            q_size: 1,
            log_uniform: true,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn box_resample_halves_and_keeps_constants() {
        let sig = Signal::constant(vec![28, 28], &[0.25]).unwrap();
        let small = resample_box(&sig, 14, 14).unwrap();
        assert_eq!(small.grid_shape(), &[14, 14]);
        assert!(small.values().iter().all(|v| (v - 0.25).abs() < 1e-12));
        let small = resample_box(&sig, 16, 16).unwrap();
        assert!(small.values().iter().all(|v| (v - 0.25).abs() < 1e-12));

        let values: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let sig = Signal::new(vec![4, 4], 1, values).unwrap();
        let half = resample_box(&sig, 2, 2).unwrap();
        assert_eq!(half.values(), &[2.5, 4.5, 10.5, 12.5]);
    }

    #[test]
    fn cell_lookup_round_trip() {
        let sig = Signal::constant(vec![5, 3], &[0.0]).unwrap();
        for n in 0..15 {
            assert_eq!(sig.cell_at(&sig.cell_position(n)), n);
        }
        assert_eq!(cell_index(1.0, 4), 3);
        assert_eq!(cell_index(-1.0, 4), 0);
    }
}
