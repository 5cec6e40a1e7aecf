//! Mean inference and randomized-order autoregressive sampling.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{expected_value, sample_value, DistParams};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::sample::{QueryBatch, SampleSet};
use crate::signals::{grid_queries, Signal};
use crate::tensor::Scalar;

/// Queries decoded per batch when filling a grid.
pub const DEFAULT_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Locations sampled one at a time before the mean fill.
    pub n_prime: usize,
    /// Fixes the visiting order independently of the sampling rng.
    pub order_seed: Option<u64>,
    /// Cells containing an observation keep the observed value.
    pub clamp_observed: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_prime: 2048,
            order_seed: None,
            clamp_observed: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub signal: Signal,
    /// Visiting order over flat grid indices.
    pub order: Vec<usize>,
    pub n_autoregressive: usize,
}

/// Progress report for one autoregressive step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepInfo {
    /// 1-based step number.
    pub step: usize,
    pub location: usize,
    /// Conditioning-set size used for this step.
    pub context_len: usize,
}

fn require_samples(samples: &SampleSet) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Usage("at least one observed sample is required".into()));
    }
    Ok(())
}

fn check_grid<F: Scalar>(model: &Model<F>, grid_shape: &[usize]) -> Result<usize> {
    if grid_shape.len() != model.config().pos_dim || grid_shape.contains(&0) {
        return Err(Error::Config(format!(
            "grid {grid_shape:?} does not fit a model with p={}",
            model.config().pos_dim
        )));
    }
    Ok(grid_shape.iter().product())
}

/// Per-cell expected values conditioned on `samples` only.
pub fn infer_mean<F: Scalar>(model: &Model<F>, samples: &SampleSet, grid_shape: &[usize]) -> Result<Signal> {
    infer_mean_chunked(model, samples, grid_shape, DEFAULT_CHUNK)
}

pub fn infer_mean_chunked<F: Scalar>(
    model: &Model<F>,
    samples: &SampleSet,
    grid_shape: &[usize],
    chunk: usize,
) -> Result<Signal> {
    require_samples(samples)?;
    check_grid(model, grid_shape)?;
    let params = model.predict_chunked(&grid_queries(grid_shape), samples, chunk)?;
    let values = params
        .iter()
        .flat_map(|w| expected_value(w, model.layout()))
        .collect();
    Signal::new(grid_shape.to_vec(), model.config().value_dim, values)
}

/// Cell index for each observation, later observations winning.
fn observed_cells(samples: &SampleSet, grid_shape: &[usize]) -> Result<HashMap<usize, Vec<f64>>> {
    let probe = Signal::constant(grid_shape.to_vec(), &vec![0.0; samples.value_dim()])?;
    Ok((0..samples.len())
        .map(|k| (probe.cell_at(samples.position(k)), samples.value(k).to_vec()))
        .collect())
}

pub fn sample_signal<F: Scalar, R: Rng + ?Sized>(
    model: &Model<F>,
    samples: &SampleSet,
    grid_shape: &[usize],
    sampler: &SamplerConfig,
    rng: &mut R,
) -> Result<GenerationResult> {
    sample_signal_with(model, samples, grid_shape, sampler, rng, |_| {})
}

/// Samples the first `min(n_prime, N)` locations of a fresh random order one
/// at a time, each conditioned on the observations plus every value sampled
/// so far, then fills the rest with expected values conditioned on the
/// enlarged set.
pub fn sample_signal_with<F: Scalar, R: Rng + ?Sized>(
    model: &Model<F>,
    samples: &SampleSet,
    grid_shape: &[usize],
    sampler: &SamplerConfig,
    rng: &mut R,
    mut on_step: impl FnMut(StepInfo),
) -> Result<GenerationResult> {
    require_samples(samples)?;
    let n = check_grid(model, grid_shape)?;
    let d = model.config().value_dim;
    let layout = model.layout();
    let queries = grid_queries(grid_shape);

    let mut order: Vec<usize> = (0..n).collect();
    match sampler.order_seed {
        Some(seed) => order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
        None => order.shuffle(rng),
    }
    let observed = if sampler.clamp_observed {
        observed_cells(samples, grid_shape)?
    } else {
        HashMap::new()
    };

    let mut values = vec![0.0; n * d];
    let mut context = samples.clone();
    let n_ar = sampler.n_prime.min(n);
    for (t, &loc) in order[..n_ar].iter().enumerate() {
        on_step(StepInfo {
            step: t + 1,
            location: loc,
            context_len: context.len(),
        });
        let v = match observed.get(&loc) {
            Some(v) => v.clone(),
            None => {
                let w = model.predict(&queries.slice(loc..loc + 1), &context)?;
                sample_value(&w[0], layout, rng)
            }
        };
        values[loc * d..(loc + 1) * d].copy_from_slice(&v);
        context.push(queries.position(loc), &v)?;
    }

    if n_ar < n {
        let mut rest = order[n_ar..].to_vec();
        rest.sort_unstable();
        let params = model.predict_chunked(&queries.select(&rest), &context, DEFAULT_CHUNK)?;
        for (&loc, w) in rest.iter().zip(&params) {
            let v = match observed.get(&loc) {
                Some(v) => v.clone(),
                None => expected_value(w, layout),
            };
            values[loc * d..(loc + 1) * d].copy_from_slice(&v);
        }
    }

    Ok(GenerationResult {
        signal: Signal::new(grid_shape.to_vec(), d, values)?,
        order,
        n_autoregressive: n_ar,
    })
}

/// Independent chains, one per seed, run in parallel.
pub fn sample_chains<F: Scalar>(
    model: &Model<F>,
    samples: &SampleSet,
    grid_shape: &[usize],
    sampler: &SamplerConfig,
    seeds: &[u64],
) -> Result<Vec<GenerationResult>> {
    seeds
        .par_iter()
        .map(|&s| sample_signal(model, samples, grid_shape, sampler, &mut ChaCha8Rng::seed_from_u64(s)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub q: f64,
    pub center_plus_mu: Vec<f64>,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub expected: Vec<f64>,
    pub bins: Vec<BinSummary>,
    pub params: DistParams,
}

/// Full predicted distribution at one position.
pub fn query_point<F: Scalar>(model: &Model<F>, x: &[f64], samples: &SampleSet) -> Result<PointSummary> {
    let q = QueryBatch::new(model.config().pos_dim, x.to_vec())?;
    if q.len() != 1 {
        return Err(Error::Input(format!(
            "query position has {} coordinates, expected {}",
            x.len(),
            model.config().pos_dim
        )));
    }
    let params = model.predict(&q, samples)?.remove(0);
    let layout = model.layout();
    let bins = (0..params.bins())
        .map(|b| BinSummary {
            q: params.q[b],
            center_plus_mu: params.component_mean(b, layout),
            sigma: params.sigma[b],
        })
        .collect();
    Ok(PointSummary {
        expected: expected_value(&params, layout),
        bins,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::make_bins;
    use crate::model::ModelConfig;

    fn model(seed: u64) -> Model<f64> {
        let cfg = ModelConfig {
            pos_dim: 2,
            value_dim: 1,
            bins: 5,
            d_model: 8,
            n_heads: 2,
            n_enc_layers: 1,
            n_dec_layers: 1,
            n_octaves: 2,
            ff_mult: 2,
        };
        let layout = make_bins(5, 1, &[(-1.0, 1.0)], None).unwrap();
        let mut m = Model::init(cfg, layout, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, t) in m.params_mut().iter_mut() {
            for v in t.data_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
        m
    }

    fn obs() -> SampleSet {
        SampleSet::new(2, 1, vec![-0.6, -0.6, 0.3, 0.55], vec![0.8, -0.4]).unwrap()
    }

    #[test]
    fn zero_parameters_give_constant_mean() {
        let cfg = model(1).config().clone();
        let layout = make_bins(5, 1, &[(-1.0, 1.0)], None).unwrap();
        let mut m = Model::<f64>::init(cfg, layout, 1).unwrap();
        // zero head: uniform q over symmetric centers, so the mean is 0
        for (_, t) in m.params_mut().iter_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= 0.5);
        }
        let sig = infer_mean(&m, &obs(), &[3, 4]).unwrap();
        assert!(sig.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn chunking_is_exact() {
        let m = model(2);
        let a = infer_mean_chunked(&m, &obs(), &[4, 5], 1).unwrap();
        let b = infer_mean_chunked(&m, &obs(), &[4, 5], 1000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hybrid_boundaries() {
        let m = model(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let plain = SamplerConfig { n_prime: 0, order_seed: None, clamp_observed: false };
        let r = sample_signal(&m, &obs(), &[4, 4], &plain, &mut rng).unwrap();
        assert_eq!(r.n_autoregressive, 0);
        assert_eq!(r.signal, infer_mean(&m, &obs(), &[4, 4]).unwrap());

        let full = SamplerConfig { n_prime: 100, ..plain.clone() };
        let r = sample_signal(&m, &obs(), &[4, 4], &full, &mut rng).unwrap();
        assert_eq!(r.n_autoregressive, 16);
        let mut sorted = r.order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn context_grows_by_one_per_step() {
        let m = model(4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = SamplerConfig { n_prime: 7, ..SamplerConfig::default() };
        let mut seen = Vec::new();
        sample_signal_with(&m, &obs(), &[3, 3], &cfg, &mut rng, |s| seen.push(s)).unwrap();
        assert_eq!(seen.len(), 7);
        for s in &seen {
            assert_eq!(s.context_len, obs().len() + s.step - 1);
        }
    }

    #[test]
    fn clamped_cells_keep_observations() {
        let m = model(5);
        let grid = [5, 5];
        for n_prime in [0, 3, 25] {
            let cfg = SamplerConfig { n_prime, ..SamplerConfig::default() };
            let r = sample_signal(&m, &obs(), &grid, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            let s = &r.signal;
            assert_eq!(s.value(s.cell_at(&[-0.6, -0.6])), &[0.8]);
            assert_eq!(s.value(s.cell_at(&[0.3, 0.55])), &[-0.4]);
        }
    }

    #[test]
    fn seeds_control_results() {
        let m = model(6);
        let cfg = SamplerConfig { n_prime: 9, ..SamplerConfig::default() };
        let run = |seed| sample_signal(&m, &obs(), &[3, 3], &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(run(1), run(1));
        let (a, b) = (run(1), run(2));
        assert_ne!(a.order, b.order);
        assert_ne!(a.signal, b.signal);
        let chains = sample_chains(&m, &obs(), &[3, 3], &cfg, &[1, 2]).unwrap();
        assert_eq!(chains, vec![a, b]);
    }

    #[test]
    fn empty_conditioning_is_rejected() {
        let m = model(7);
        let empty = SampleSet::empty(2, 1);
        assert!(matches!(infer_mean(&m, &empty, &[2, 2]), Err(Error::Usage(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_signal(&m, &empty, &[2, 2], &SamplerConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn point_summary_matches_batch() {
        let m = model(8);
        let s = query_point(&m, &[0.2, -0.1], &obs()).unwrap();
        let sum: f64 = s.bins.iter().map(|b| b.q).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let recomputed: f64 = s.bins.iter().map(|b| b.q * b.center_plus_mu[0]).sum();
        assert!((recomputed - s.expected[0]).abs() < 1e-12);
        let batch = QueryBatch::new(2, vec![0.9, 0.9, 0.2, -0.1]).unwrap();
        assert_eq!(m.predict(&batch, &obs()).unwrap()[1], s.params);
        assert!(query_point(&m, &[1.5, 0.0], &obs()).is_err());
    }
}
