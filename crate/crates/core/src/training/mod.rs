//! Self-supervised training: draw `(S, Q)` from a signal, score the true
//! values at `Q` under the predicted distributions, and minimize the mean
//! negative log-likelihood with Adam.

mod checkpoint;

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{head_log_likelihood, log_likelihood, make_bins, BinLayout, DistParams, DEFAULT_ALPHA, SIGMA_MAX, SIGMA_MIN};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ModelParams};
use crate::signals::{draw_sq, gen_polynomial, Draw, DrawConfig, PolynomialConfig, Signal, VALUE_RANGE};
use crate::tensor::{Scalar, Tape, Tensor};

pub use checkpoint::{Checkpoint, CheckpointMeta, MAGIC, VERSION};

/// Seed offset separating evaluation draws from training draws.
const EVAL_STREAM: u64 = 0x0e7a_1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub draw: DrawConfig,
    pub alpha: f64,
    pub lr: f64,
    /// Cosine schedule floor as a fraction of `lr`.
    pub lr_min_ratio: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub steps: u64,
    pub signals_per_step: usize,
    pub seed: u64,
    /// Zero disables evaluation.
    pub eval_every: u64,
    /// Held-out signals scored at each evaluation.
    pub eval_signals: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            draw: DrawConfig::default(),
            alpha: DEFAULT_ALPHA,
            lr: 3e-4,
            lr_min_ratio: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            steps: 10_000,
            signals_per_step: 4,
            seed: 0,
            eval_every: 500,
            eval_signals: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.draw.validate()?;
        let bad = |what: &str| Err(Error::Config(format!("train.{what}")));
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad("lr must be a non-negative number");
        }
        if !(0.0..=1.0).contains(&self.lr_min_ratio) {
            return bad("lr_min_ratio must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if self.signals_per_step == 0 {
            return bad("signals_per_step must be positive");
        }
        Ok(())
    }

    /// Cosine decay from `lr` to `lr * lr_min_ratio` over `steps`.
    pub fn learning_rate(&self, step: u64) -> f64 {
        let floor = self.lr * self.lr_min_ratio;
        if self.steps <= 1 {
            return self.lr;
        }
        let t = step.min(self.steps - 1) as f64 / (self.steps - 1) as f64;
        floor + 0.5 * (self.lr - floor) * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// Adam moments and time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<F> {
    pub m: ModelParams<F>,
    pub v: ModelParams<F>,
    pub t: u64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(params: &ModelParams<F>) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn cast<G: Scalar>(&self) -> Adam<G> {
        Adam {
            m: self.m.cast(),
            v: self.v.cast(),
            t: self.t,
        }
    }

    /// One bias-corrected step. `grads` follows the registry's name order.
    pub fn update(&mut self, params: &mut ModelParams<F>, grads: &[Tensor<F>], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 / (1.0 - b1.powi(self.t as i32));
        let c2 = 1.0 / (1.0 - b2.powi(self.t as i32));
        let (b1, b2, c1, c2) = (F::lit(b1), F::lit(b2), F::lit(c1), F::lit(c2));
        let (lr, eps, one) = (F::lit(lr), F::lit(cfg.adam_eps), F::one());
        let moments = self.m.iter_mut().zip(self.v.iter_mut());
        for (((_, p), g), ((_, m), (_, v))) in params.iter_mut().zip(grads).zip(moments) {
            let data = p.data_mut().iter_mut();
            let state = m.data_mut().iter_mut().zip(v.data_mut().iter_mut());
            for ((w, &g), (m, v)) in data.zip(g.data()).zip(state) {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let step = (*m * c1) / ((*v * c2).sqrt() + eps);
                *w -= lr * step;
            }
        }
    }
}

/// Mean closest-bin negative log-likelihood of `targets` (flat `Q × d`).
pub fn nll_loss(params: &[DistParams], targets: &[f64], layout: &BinLayout, alpha: f64) -> Result<f64> {
    let d = layout.value_dim();
    if params.is_empty() {
        return Err(Error::Usage("nll_loss on an empty batch".into()));
    }
    if targets.len() != params.len() * d {
        return Err(Error::dim("nll_loss", &[params.len(), d], &[targets.len()]));
    }
    let total: f64 = params
        .iter()
        .zip(targets.chunks(d))
        .map(|(w, v)| -log_likelihood(v, w, layout, alpha))
        .sum();
    Ok(total / params.len() as f64)
}

/// Loss and parameter gradients (registry name order) for one draw.
pub fn draw_gradients<F: Scalar>(model: &Model<F>, draw: &Draw, alpha: f64) -> Result<(f64, Vec<Tensor<F>>)> {
    let tape = Tape::new();
    let bound = model.bind(&tape, true);
    let memory = model.encode(&bound, &draw.samples)?;
    let raw = model.decode(&bound, memory, &draw.queries)?;
    let ll = head_log_likelihood(raw, &draw.targets, model.layout(), alpha)?;
    let loss = ll.mean().scale(F::lit(-1.0));
    let value = loss.value().data()[0].to_f64().unwrap_or(f64::NAN);
    let mut grads = tape.backward(loss)?;
    let out = model
        .params()
        .iter()
        .map(|(name, t)| {
            grads
                .take(bound.get(name))
                .unwrap_or_else(|| Tensor::zeros(t.shape().to_vec()))
        })
        .collect();
    Ok((value, out))
}

/// Mean loss over `draws` and one Adam step at `lr`. Draws are processed in
/// parallel; gradients are summed in draw order so results do not depend on
/// scheduling.
pub fn step_on_draws<F: Scalar>(
    model: &mut Model<F>,
    adam: &mut Adam<F>,
    draws: &[Draw],
    cfg: &TrainConfig,
    lr: f64,
) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::Usage("training step on an empty batch".into()));
    }
    let per_draw: Vec<Result<(f64, Vec<Tensor<F>>)>> = {
        let m = &*model;
        draws
            .par_iter()
            .map(|d| draw_gradients(m, d, cfg.alpha))
            .collect()
    };
    let mut loss = 0.0;
    let mut total: Option<Vec<Tensor<F>>> = None;
    for r in per_draw {
        let (l, grads) = r?;
        loss += l;
        match &mut total {
            None => total = Some(grads),
            Some(acc) => {
                for (a, g) in acc.iter_mut().zip(&grads) {
                    for (x, &y) in a.data_mut().iter_mut().zip(g.data()) {
                        *x += y;
                    }
                }
            }
        }
    }
    let n = draws.len() as f64;
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite training loss {loss} at optimizer step {}",
            adam.t + 1
        )));
    }
    let mut grads = total.expect("non-empty batch");
    let inv = F::lit(1.0 / n);
    for g in &mut grads {
        for x in g.data_mut() {
            *x *= inv;
        }
    }
    adam.update(model.params_mut(), &grads, lr, cfg);
    Ok(loss)
}

/// Draws `(S, Q)` from each signal and takes one optimizer step.
pub fn train_step<F: Scalar, R: Rng + ?Sized>(
    model: &mut Model<F>,
    adam: &mut Adam<F>,
    batch: &[Signal],
    cfg: &TrainConfig,
    step: u64,
    rng: &mut R,
) -> Result<f64> {
    let draws = batch
        .iter()
        .map(|s| draw_sq(s, &cfg.draw, rng))
        .collect::<Result<Vec<_>>>()?;
    step_on_draws(model, adam, &draws, cfg, cfg.learning_rate(step))
        .map_err(|e| match e {
            Error::Numeric(msg) => Error::Numeric(format!("{msg} (training step {step})")),
            other => other,
        })
}

/// Mean NLL over fixed draws, without gradients.
pub fn eval_nll<F: Scalar>(model: &Model<F>, draws: &[Draw], alpha: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::Usage("evaluation on an empty set".into()));
    }
    let mut total = 0.0;
    for d in draws {
        let params = model.predict(&d.queries, &d.samples)?;
        total += nll_loss(&params, &d.targets, model.layout(), alpha)?;
    }
    Ok(total / draws.len() as f64)
}

/// Training data: a fixed signal collection, or polynomials generated on demand.
#[derive(Clone, Debug)]
pub enum Dataset {
    Signals(Vec<Signal>),
    Polynomials(PolynomialConfig),
}

impl Dataset {
    pub fn pos_dim(&self) -> usize {
        match self {
            Dataset::Signals(s) => s.first().map_or(0, |s| s.pos_dim()),
            Dataset::Polynomials(_) => 1,
        }
    }

    pub fn value_dim(&self) -> usize {
        match self {
            Dataset::Signals(s) => s.first().map_or(0, |s| s.value_dim()),
            Dataset::Polynomials(_) => 1,
        }
    }

    pub fn grid_shape(&self) -> Option<Vec<usize>> {
        match self {
            Dataset::Signals(s) => s.first().map(|s| s.grid_shape().to_vec()),
            Dataset::Polynomials(p) => Some(vec![p.cells]),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Dataset::Signals(s) = self {
            let first = s.first().ok_or_else(|| Error::Input("empty dataset".into()))?;
            if let Some(i) = s
                .iter()
                .position(|x| x.pos_dim() != first.pos_dim() || x.value_dim() != first.value_dim())
            {
                return Err(Error::Input(format!(
                    "signal {i} has different dimensions from signal 0"
                )));
            }
        }
        Ok(())
    }
}

/// Training and held-out indices: 10% of signals by a seeded shuffle. A
/// single-signal dataset is evaluated on itself.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    if n < 2 {
        return (idx.clone(), idx);
    }
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held = (n / 10).max(1);
    let eval = idx[..held].to_vec();
    let train = idx[held..].to_vec();
    (train, eval)
}

/// Fresh polynomials for evaluation, independent of the training stream.
pub fn heldout_polynomials(cfg: &PolynomialConfig, count: usize, seed: u64) -> Result<Vec<Signal>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ EVAL_STREAM);
    (0..count)
        .map(|_| gen_polynomial(&mut rng, cfg).map(|p| p.signal))
        .collect()
}

/// Bins for a dataset: uniform in one channel, k-means over training values otherwise.
pub fn dataset_layout(dataset: &Dataset, bins: usize, seed: u64) -> Result<BinLayout> {
    let d = dataset.value_dim();
    let range = vec![VALUE_RANGE; d];
    match dataset {
        Dataset::Signals(signals) if d > 1 => {
            let (train, _) = split_indices(signals.len(), seed);
            let values: Vec<f64> = train
                .iter()
                .flat_map(|&i| signals[i].values().iter().copied())
                .collect();
            make_bins(bins, d, &range, Some(&values))
        }
        _ => make_bins(bins, d, &range, None),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub step: u64,
    /// Mean training loss since the previous row.
    pub loss: f64,
    pub eval_nll: f64,
}

pub const EVAL_CSV_HEADER: &str = "step,loss,eval_nll";

pub fn write_eval_csv(rows: &[EvalRow], path: &Path) -> Result<()> {
    let mut out = String::from(EVAL_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.step, r.loss, r.eval_nll));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub struct TrainReport<F> {
    pub model: Model<F>,
    pub adam: Adam<F>,
    pub log: Vec<EvalRow>,
}

impl<F: Scalar> TrainReport<F> {
    pub fn checkpoint(&self, dataset: &Dataset, cfg: &TrainConfig) -> Checkpoint {
        let mut ckpt = Checkpoint::from_model(&self.model, cfg.seed, self.adam.t).with_optimizer(&self.adam);
        ckpt.meta.grid_shape = dataset.grid_shape();
        ckpt.meta.train = Some(cfg.clone());
        ckpt
    }
}

/// Full training run from a fresh initialization. `on_eval` sees each log
/// row as it is produced.
pub fn train<F: Scalar>(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    mut on_eval: impl FnMut(&EvalRow),
) -> Result<TrainReport<F>> {
    cfg.validate()?;
    model_cfg.validate()?;
    dataset.validate()?;
    if dataset.pos_dim() != model_cfg.pos_dim || dataset.value_dim() != model_cfg.value_dim {
        return Err(Error::Config(format!(
            "dataset has p={} d={}, model expects p={} d={}",
            dataset.pos_dim(),
            dataset.value_dim(),
            model_cfg.pos_dim,
            model_cfg.value_dim
        )));
    }
    let layout = dataset_layout(dataset, model_cfg.bins, cfg.seed)?;
    let mut model = Model::<F>::init(model_cfg.clone(), layout, cfg.seed)?;
    let mut adam = Adam::new(model.params());

    let (train_signals, eval_signals): (Vec<&Signal>, Vec<Signal>) = match dataset {
        Dataset::Signals(s) => {
            let (tr, ev) = split_indices(s.len(), cfg.seed);
            let eval = ev.iter().take(cfg.eval_signals.max(1)).map(|&i| s[i].clone()).collect();
            (tr.iter().map(|&i| &s[i]).collect(), eval)
        }
        Dataset::Polynomials(p) => (Vec::new(), heldout_polynomials(p, cfg.eval_signals.max(1), cfg.seed)?),
    };
    let eval_draws = if cfg.eval_every > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ EVAL_STREAM);
        eval_signals
            .iter()
            .map(|s| draw_sq(s, &cfg.draw, &mut rng))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = Vec::new();
    let mut window = (0.0, 0u64);
    for step in 0..cfg.steps {
        let batch: Vec<Signal> = match dataset {
            Dataset::Signals(_) => (0..cfg.signals_per_step)
                .map(|_| train_signals[rng.random_range(0..train_signals.len())].clone())
                .collect(),
            Dataset::Polynomials(p) => (0..cfg.signals_per_step)
                .map(|_| gen_polynomial(&mut rng, p).map(|p| p.signal))
                .collect::<Result<_>>()?,
        };
        let loss = train_step(&mut model, &mut adam, &batch, cfg, step, &mut rng)?;
        window.0 += loss;
        window.1 += 1;
        if cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0 {
            let row = EvalRow {
                step: step + 1,
                loss: window.0 / window.1 as f64,
                eval_nll: eval_nll(&model, &eval_draws, cfg.alpha)?,
            };
            log::info!("step {} loss {:.4} eval_nll {:.4}", row.step, row.loss, row.eval_nll);
            on_eval(&row);
            log.push(row);
            window = (0.0, 0);
        }
    }
    Ok(TrainReport { model, adam, log })
}

/// Held-out NLL of the best single Gaussian under the closest-bin rule for a
/// one-bin layout. With `b* = 0` always, the score reduces to
/// `-alpha * (log s + mean((v - c - mu)^2) / s^2)`, maximized at
/// `mu = mean(v) - c` and `s^2 = 2 * mean squared deviation`.
pub fn constant_gaussian_nll(train_values: &[f64], eval_values: &[f64], layout: &BinLayout, alpha: f64) -> Result<f64> {
    if layout.bins() != 1 || layout.value_dim() != 1 {
        return Err(Error::Config("constant baseline needs a one-bin scalar layout".into()));
    }
    if train_values.is_empty() || eval_values.is_empty() {
        return Err(Error::Usage("constant baseline needs values".into()));
    }
    let n = train_values.len() as f64;
    let mean = train_values.iter().sum::<f64>() / n;
    let var = train_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sigma = (2.0 * var).sqrt().clamp(SIGMA_MIN, SIGMA_MAX);
    let params = DistParams {
        q: vec![1.0],
        mu: vec![mean - layout.center(0)[0]],
        sigma: vec![sigma],
    };
    let all = vec![params; eval_values.len()];
    nll_loss(&all, eval_values, layout, alpha)
}

/// Appends one CSV row to an open writer.
pub fn write_eval_row(out: &mut impl Write, row: &EvalRow) -> std::io::Result<()> {
    writeln!(out, "{},{},{}", row.step, row.loss, row.eval_nll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::make_bins;
    use crate::signals::gen_polynomial;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            pos_dim: 1,
            value_dim: 1,
            bins: 4,
            d_model: 16,
            n_heads: 2,
            n_enc_layers: 1,
            n_dec_layers: 1,
            n_octaves: 3,
            ff_mult: 2,
        }
    }

    fn fixed_draws(n: usize, seed: u64) -> Vec<Draw> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = DrawConfig { s_min: 4, s_max: 8, q_size: 16, log_uniform: false };
        (0..n)
            .map(|_| {
                let sig = gen_polynomial(&mut rng, &PolynomialConfig::default()).unwrap().signal;
                draw_sq(&sig, &draw, &mut rng).unwrap()
            })
            .collect()
    }

    fn tiny_model() -> Model<f64> {
        let layout = make_bins(4, 1, &[(-1.0, 1.0)], None).unwrap();
        Model::init(tiny_cfg(), layout, 3).unwrap()
    }

    #[test]
    fn nll_examples() {
        let layout = make_bins(2, 1, &[(-1.0, 1.0)], None).unwrap();
        let w = DistParams { q: vec![0.25, 0.75], mu: vec![0.0, 0.0], sigma: vec![1.0, 1.0] };
        let one = nll_loss(std::slice::from_ref(&w), &[0.5], &layout, 0.1).unwrap();
        assert!((one + 0.75f64.ln()).abs() < 1e-12);
        let two = nll_loss(&[w.clone(), w.clone()], &[0.5, 0.5], &layout, 0.1).unwrap();
        assert_eq!(one, two);
        assert!(matches!(nll_loss(&[], &[], &layout, 0.1), Err(Error::Usage(_))));
    }

    #[test]
    fn tape_loss_matches_scalar_loop() {
        let model = tiny_model();
        for d in fixed_draws(3, 4) {
            let (loss, _) = draw_gradients(&model, &d, 0.1).unwrap();
            let params = model.predict(&d.queries, &d.samples).unwrap();
            let oracle = nll_loss(&params, &d.targets, model.layout(), 0.1).unwrap();
            assert!((loss - oracle).abs() < 1e-9, "{loss} vs {oracle}");
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut model = tiny_model();
        let before = model.params().clone();
        let mut adam = Adam::new(model.params());
        let cfg = TrainConfig { lr: 0.0, ..TrainConfig::default() };
        for _ in 0..3 {
            step_on_draws(&mut model, &mut adam, &fixed_draws(2, 5), &cfg, 0.0).unwrap();
        }
        assert_eq!(model.params(), &before);
    }

    #[test]
    fn fixed_batch_loss_decreases() {
        let mut model = tiny_model().cast::<f32>();
        let mut adam = Adam::new(model.params());
        let cfg = TrainConfig::default();
        let draws = fixed_draws(2, 6);
        let losses: Vec<f64> = (0..200)
            .map(|_| step_on_draws(&mut model, &mut adam, &draws, &cfg, 1e-3).unwrap())
            .collect();
        for w in 0..=150 {
            assert!(losses[w + 49] < losses[w], "window at {w}: {} -> {}", losses[w], losses[w + 49]);
        }
    }

    #[test]
    fn schedule_endpoints() {
        let cfg = TrainConfig { lr: 1e-3, steps: 101, ..TrainConfig::default() };
        assert!((cfg.learning_rate(0) - 1e-3).abs() < 1e-15);
        assert!((cfg.learning_rate(100) - 1e-4).abs() < 1e-15);
        assert!(cfg.learning_rate(50) < 1e-3 && cfg.learning_rate(50) > 1e-4);
    }

    #[test]
    fn training_is_deterministic_and_logs() {
        let cfg = TrainConfig {
            draw: DrawConfig { s_min: 4, s_max: 20, q_size: 20, log_uniform: false },
            steps: 6,
            eval_every: 2,
            eval_signals: 3,
            signals_per_step: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let data = Dataset::Polynomials(PolynomialConfig::default());
        let a = train::<f32>(&data, &tiny_cfg(), &cfg, |_| {}).unwrap();
        let b = train::<f32>(&data, &tiny_cfg(), &cfg, |_| {}).unwrap();
        assert_eq!(a.log.len(), 3);
        assert_eq!(a.log, b.log);
        assert_eq!(a.model.params(), b.model.params());

        let zero = train::<f32>(&data, &tiny_cfg(), &TrainConfig { steps: 0, ..cfg.clone() }, |_| {}).unwrap();
        let init = ModelParams::<f32>::init(&tiny_cfg(), 9);
        assert_eq!(zero.model.params(), &init);
        assert!(zero.log.is_empty());
    }

    #[test]
    fn split_holds_out_a_tenth() {
        let (tr, ev) = split_indices(50, 1);
        assert_eq!((tr.len(), ev.len()), (45, 5));
        let mut all: Vec<usize> = tr.iter().chain(&ev).copied().collect();
        all.sort();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_eq!(split_indices(1, 1), (vec![0], vec![0]));
    }

    #[test]
    fn baseline_is_optimal_constant() {
        let layout = make_bins(1, 1, &[(-1.0, 1.0)], None).unwrap();
        let vals: Vec<f64> = (0..200).map(|i| (i as f64 * 0.13).sin() * 0.5).collect();
        let best = constant_gaussian_nll(&vals, &vals, &layout, 0.1).unwrap();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        for (dm, ds) in [(0.05, 1.0), (-0.05, 1.0), (0.0, 1.2), (0.0, 0.8)] {
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            let w = DistParams { q: vec![1.0], mu: vec![mean + dm], sigma: vec![(2.0 * var).sqrt() * ds] };
            let other = nll_loss(&vec![w; vals.len()], &vals, &layout, 0.1).unwrap();
            assert!(other > best);
        }
    }
}
