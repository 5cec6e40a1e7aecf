#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsefield::distribution::{make_bins, SIGMA_MAX, SIGMA_MIN};
use sparsefield::signals::Draw;
use sparsefield::training::draw_gradients;
use sparsefield::{Model, ModelConfig, QueryBatch, SampleSet, Scalar};

pub const FD_STEP: f64 = 1e-4;

/// Gradients smaller than this (per group, infinity norm) are compared
/// absolutely rather than relatively.
pub const GRAD_FLOOR: f64 = 1e-4;

pub fn random_config(rng: &mut ChaCha8Rng) -> ModelConfig {
    let n_heads = rng.random_range(1..=2);
    ModelConfig {
        pos_dim: rng.random_range(1..=2),
        value_dim: rng.random_range(1..=2),
        bins: rng.random_range(1..=4),
        d_model: n_heads * rng.random_range(2..=4),
        n_heads,
        n_enc_layers: rng.random_range(0..=2),
        n_dec_layers: rng.random_range(1..=2),
        n_octaves: rng.random_range(1..=3),
        ff_mult: rng.random_range(1..=2),
    }
}

/// A model with every parameter (including the zero-initialized head)
/// perturbed so that all paths carry gradient.
pub fn random_model(cfg: &ModelConfig, rng: &mut ChaCha8Rng, spread: f64) -> Model<f64> {
    let range = vec![(-1.0, 1.0); cfg.value_dim];
    let values: Vec<f64> = (0..64 * cfg.value_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let layout = make_bins(cfg.bins, cfg.value_dim, &range, Some(&values)).unwrap();
    let mut model = Model::init(cfg.clone(), layout, rng.random()).unwrap();
    for (_, t) in model.params_mut().iter_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-spread..spread);
        }
    }
    model
}

pub fn random_set(rng: &mut ChaCha8Rng, p: usize, d: usize, k: usize) -> SampleSet {
    SampleSet::new(
        p,
        d,
        (0..k * p).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        (0..k * d).map(|_| rng.random_range(-1.0..=1.0)).collect(),
    )
    .unwrap()
}

pub fn random_queries(rng: &mut ChaCha8Rng, p: usize, q: usize) -> QueryBatch {
    QueryBatch::new(p, (0..q * p).map(|_| rng.random_range(-1.0..=1.0)).collect()).unwrap()
}

pub fn random_draw(rng: &mut ChaCha8Rng, cfg: &ModelConfig, k: usize, q: usize) -> Draw {
    Draw {
        samples: random_set(rng, cfg.pos_dim, cfg.value_dim, k),
        queries: random_queries(rng, cfg.pos_dim, q),
        targets: (0..q * cfg.value_dim).map(|_| rng.random_range(-1.0..=1.0)).collect(),
    }
}

/// True when some scored log-sigma sits within `margin` of a clamp edge,
/// where central differences straddle a kink.
pub fn near_sigma_kink(model: &Model<f64>, draw: &Draw, margin: f64) -> bool {
    let raw = model.predict_raw(&draw.queries, &draw.samples).unwrap();
    let layout = model.layout();
    let (d, width) = (layout.value_dim(), layout.raw_width());
    (0..draw.queries.len()).any(|r| {
        let b = layout.closest_bin(&draw.targets[r * d..(r + 1) * d]);
        let s = raw.data()[r * width + b * (d + 2) + d + 1];
        (s - SIGMA_MIN.ln()).abs() < margin || (s - SIGMA_MAX.ln()).abs() < margin
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`
    ThreePoint,
    /// `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`, fourth-order accurate.
    FivePoint,
}

/// Central-difference gradient of the draw loss in 64-bit, registry order.
pub fn numeric_gradient(model: &Model<f64>, draw: &Draw, alpha: f64, h: f64, stencil: Stencil) -> Vec<Vec<f64>> {
    let names: Vec<String> = model.params().names().cloned().collect();
    let mut probe = model.clone();
    let loss = |m: &Model<f64>| draw_gradients(m, draw, alpha).unwrap().0;
    names
        .iter()
        .map(|name| {
            let len = model.params().get(name).unwrap().numel();
            (0..len)
                .map(|i| {
                    let orig = probe.params().get(name).unwrap().data()[i];
                    let mut at = |dx: f64| {
                        probe.params_mut().get_mut(name).unwrap().data_mut()[i] = orig + dx;
                        let l = loss(&probe);
                        probe.params_mut().get_mut(name).unwrap().data_mut()[i] = orig;
                        l
                    };
                    match stencil {
                        Stencil::ThreePoint => (at(h) - at(-h)) / (2.0 * h),
                        Stencil::FivePoint => {
                            (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
                        }
                    }
                })
                .collect()
        })
        .collect()
}

/// Worst per-group `‖analytic − numeric‖∞ / max(‖numeric‖∞, GRAD_FLOOR)`,
/// with the analytic gradient computed at precision `F`.
pub fn gradient_error<F: Scalar>(model: &Model<f64>, draw: &Draw, numeric: &[Vec<f64>], alpha: f64) -> (f64, String) {
    let cast: Model<F> = model.cast();
    let (_, analytic) = draw_gradients(&cast, draw, alpha).unwrap();
    let mut worst = (0.0, String::new());
    for ((name, a), n) in model.params().names().zip(&analytic).zip(numeric) {
        let scale = n.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(GRAD_FLOOR);
        let diff = a
            .data()
            .iter()
            .zip(n)
            .fold(0.0f64, |m, (x, y)| m.max((x.to_f64().unwrap() - y).abs()));
        let rel = diff / scale;
        if rel > worst.0 {
            worst = (rel, name.clone());
        }
    }
    worst
}

pub struct GradCase {
    pub model: Model<f64>,
    pub draw: Draw,
    pub numeric: Vec<Vec<f64>>,
}

/// Random tiny configuration, parameters and draw, avoiding sigma-clamp kinks.
pub fn grad_case(seed: u64) -> GradCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let cfg = random_config(&mut rng);
        let model = random_model(&cfg, &mut rng, 0.3);
        let k = rng.random_range(1..=4);
        let q = rng.random_range(1..=3);
        let draw = random_draw(&mut rng, &cfg, k, q);
        if near_sigma_kink(&model, &draw, 1e-2) {
            continue;
        }
        let numeric = numeric_gradient(&model, &draw, 0.1, FD_STEP, Stencil::FivePoint);
        return GradCase { model, draw, numeric };
    }
}
