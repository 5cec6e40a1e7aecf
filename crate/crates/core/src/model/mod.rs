//! Set-conditioned value predictor.
//!
//! Observed samples are embedded as `linear(fourier(x)) + linear(v)` and
//! passed through pre-norm self-attention blocks. Each query position is
//! embedded the same way (position only) and refined by blocks that
//! cross-attend to the sample encodings; queries never attend to each other,
//! so every prediction depends only on its own position and the sample set.
//! No set-order index enters anywhere, which makes the output invariant to
//! the order of the samples.

mod params;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::distribution::{head_rows_to_params, BinLayout, DistParams};
use crate::error::{Error, Result};
use crate::sample::{QueryBatch, SampleSet};
use crate::tensor::{Scalar, Tape, Tensor, Var, LAYER_NORM_EPS};

pub use params::ModelParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub pos_dim: usize,
    pub value_dim: usize,
    pub bins: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub n_octaves: usize,
    /// Feed-forward width as a multiple of `d_model`.
    pub ff_mult: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            pos_dim: 2,
            value_dim: 1,
            bins: 256,
            d_model: 128,
            n_heads: 4,
            n_enc_layers: 4,
            n_dec_layers: 2,
            n_octaves: 8,
            ff_mult: 4,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pos_dim", self.pos_dim),
            ("value_dim", self.value_dim),
            ("bins", self.bins),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_octaves", self.n_octaves),
            ("ff_mult", self.ff_mult),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("model.{name} must be positive")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }

    pub fn fourier_width(&self) -> usize {
        2 * self.pos_dim * self.n_octaves
    }

    pub fn raw_width(&self) -> usize {
        self.bins * (self.value_dim + 2)
    }

    pub fn ff_width(&self) -> usize {
        self.ff_mult * self.d_model
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// `[sin(2^l π x_i), cos(2^l π x_i)]` for every coordinate `i` and level
/// `l < octaves`, coordinate-major.
pub fn fourier_features(x: &[f64], octaves: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * x.len() * octaves);
    for &xi in x {
        for l in 0..octaves {
            let arg = (1u64 << l) as f64 * std::f64::consts::PI * xi;
            out.push(arg.sin());
            out.push(arg.cos());
        }
    }
    out
}

/// Parameters bound as leaves on one tape.
pub struct Bound<'t, F> {
    vars: HashMap<String, Var<'t, F>>,
}

impl<'t, F: Scalar> Bound<'t, F> {
    pub fn get(&self, name: &str) -> Var<'t, F> {
        self.vars[name]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var<'t, F>)> {
        self.vars.iter()
    }
}

#[derive(Clone, Debug)]
pub struct Model<F> {
    config: ModelConfig,
    layout: BinLayout,
    params: ModelParams<F>,
}

impl<F: Scalar> Model<F> {
    pub fn new(config: ModelConfig, layout: BinLayout, params: ModelParams<F>) -> Result<Self> {
        config.validate()?;
        if layout.bins() != config.bins || layout.value_dim() != config.value_dim {
            return Err(Error::Config(format!(
                "bin layout ({} bins, d={}) does not match model config ({} bins, d={})",
                layout.bins(),
                layout.value_dim(),
                config.bins,
                config.value_dim
            )));
        }
        params.validate(&config)?;
        Ok(Model {
            config,
            layout,
            params,
        })
    }

    /// Freshly initialized model.
    pub fn init(config: ModelConfig, layout: BinLayout, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(&config, seed);
        Model::new(config, layout, params)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &BinLayout {
        &self.layout
    }

    pub fn params(&self) -> &ModelParams<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams<F> {
        &mut self.params
    }

    pub fn into_params(self) -> ModelParams<F> {
        self.params
    }

    pub fn cast<G: Scalar>(&self) -> Model<G> {
        Model {
            config: self.config.clone(),
            layout: self.layout.clone(),
            params: self.params.cast(),
        }
    }

    /// Records every parameter on `tape`, trainable or constant.
    pub fn bind<'t>(&self, tape: &'t Tape<F>, trainable: bool) -> Bound<'t, F> {
        let vars = self
            .params
            .iter()
            .map(|(name, t)| {
                let v = if trainable {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                };
                (name.clone(), v)
            })
            .collect();
        Bound { vars }
    }

    fn check_samples(&self, samples: &SampleSet) -> Result<()> {
        if samples.pos_dim() != self.config.pos_dim || samples.value_dim() != self.config.value_dim {
            return Err(Error::Config(format!(
                "samples have p={} d={}, model expects p={} d={}",
                samples.pos_dim(),
                samples.value_dim(),
                self.config.pos_dim,
                self.config.value_dim
            )));
        }
        Ok(())
    }

    fn check_queries(&self, queries: &QueryBatch) -> Result<()> {
        if queries.pos_dim() != self.config.pos_dim {
            return Err(Error::Config(format!(
                "queries have p={}, model expects p={}",
                queries.pos_dim(),
                self.config.pos_dim
            )));
        }
        Ok(())
    }

    fn fourier_tensor(&self, positions: &[f64]) -> Result<Tensor<F>> {
        let p = self.config.pos_dim;
        let n = positions.len() / p;
        let data: Vec<f64> = positions
            .chunks(p)
            .flat_map(|x| fourier_features(x, self.config.n_octaves))
            .collect();
        Tensor::from_f64(vec![n, self.config.fourier_width()], &data)
    }

    fn linear<'t>(&self, b: &Bound<'t, F>, name: &str, x: Var<'t, F>) -> Result<Var<'t, F>> {
        x.matmul(b.get(&format!("{name}.w")))?
            .add_row(b.get(&format!("{name}.b")))
    }

    fn norm<'t>(&self, b: &Bound<'t, F>, name: &str, x: Var<'t, F>) -> Result<Var<'t, F>> {
        x.layer_norm(
            b.get(&format!("{name}.g")),
            b.get(&format!("{name}.b")),
            F::lit(LAYER_NORM_EPS),
        )
    }

    fn attention<'t>(
        &self,
        b: &Bound<'t, F>,
        prefix: &str,
        queries: Var<'t, F>,
        keys: Var<'t, F>,
    ) -> Result<Var<'t, F>> {
        let q = self.linear(b, &format!("{prefix}.attn.q"), queries)?;
        let k = self.linear(b, &format!("{prefix}.attn.k"), keys)?;
        let v = self.linear(b, &format!("{prefix}.attn.v"), keys)?;
        let dh = self.config.head_dim();
        let scale = F::lit(1.0 / (dh as f64).sqrt());
        let mut heads = Vec::with_capacity(self.config.n_heads);
        for h in 0..self.config.n_heads {
            let qh = q.slice_cols(h * dh, dh)?;
            let kh = k.slice_cols(h * dh, dh)?;
            let vh = v.slice_cols(h * dh, dh)?;
            let weights = qh.matmul(kh.transpose()?)?.scale(scale).softmax(1)?;
            heads.push(weights.matmul(vh)?);
        }
        let merged = if heads.len() == 1 {
            heads[0]
        } else {
            Var::concat_cols(&heads)?
        };
        self.linear(b, &format!("{prefix}.attn.o"), merged)
    }

    fn feed_forward<'t>(&self, b: &Bound<'t, F>, prefix: &str, x: Var<'t, F>) -> Result<Var<'t, F>> {
        let h = self.linear(b, &format!("{prefix}.ff1"), x)?.gelu();
        self.linear(b, &format!("{prefix}.ff2"), h)
    }

    /// Sample encodings `[K × d_model]`, or `None` for an empty set.
    pub fn encode<'t>(&self, b: &Bound<'t, F>, samples: &SampleSet) -> Result<Option<Var<'t, F>>> {
        self.check_samples(samples)?;
        if samples.is_empty() {
            return Ok(None);
        }
        let tape = b.get("enc.norm.g").tape();
        let k = samples.len();
        let pos = tape.constant(self.fourier_tensor(samples.positions())?);
        let val = tape.constant(Tensor::from_f64(
            vec![k, self.config.value_dim],
            samples.values(),
        )?);
        let mut x = self
            .linear(b, "enc.pos", pos)?
            .add(self.linear(b, "enc.val", val)?)?;
        for i in 0..self.config.n_enc_layers {
            let p = format!("enc.{i}");
            let h = self.norm(b, &format!("{p}.ln1"), x)?;
            x = x.add(self.attention(b, &p, h, h)?)?;
            let h = self.norm(b, &format!("{p}.ln2"), x)?;
            x = x.add(self.feed_forward(b, &p, h)?)?;
        }
        Ok(Some(self.norm(b, "enc.norm", x)?))
    }

    /// Raw head output `[Q × B(d+2)]` for each query given the encodings.
    pub fn decode<'t>(
        &self,
        b: &Bound<'t, F>,
        memory: Option<Var<'t, F>>,
        queries: &QueryBatch,
    ) -> Result<Var<'t, F>> {
        self.check_queries(queries)?;
        if queries.is_empty() {
            return Err(Error::Input("empty query batch".into()));
        }
        let tape = b.get("dec.norm.g").tape();
        let pos = tape.constant(self.fourier_tensor(queries.positions())?);
        let mut x = self.linear(b, "dec.pos", pos)?;
        for i in 0..self.config.n_dec_layers {
            let p = format!("dec.{i}");
            if let Some(mem) = memory {
                let h = self.norm(b, &format!("{p}.ln1"), x)?;
                x = x.add(self.attention(b, &p, h, mem)?)?;
            }
            let h = self.norm(b, &format!("{p}.ln2"), x)?;
            x = x.add(self.feed_forward(b, &p, h)?)?;
        }
        let x = self.norm(b, "dec.norm", x)?;
        self.linear(b, "head", x)
    }

    /// Encodings as a plain tensor, for reuse across query chunks.
    pub fn encode_tensor(&self, samples: &SampleSet) -> Result<Option<Tensor<F>>> {
        let tape = Tape::new();
        let b = self.bind(&tape, false);
        Ok(self.encode(&b, samples)?.map(|v| v.value()))
    }

    /// Raw head output for `queries` given precomputed encodings.
    pub fn decode_tensor(&self, memory: Option<&Tensor<F>>, queries: &QueryBatch) -> Result<Tensor<F>> {
        let tape = Tape::new();
        let b = self.bind(&tape, false);
        let mem = memory.map(|m| tape.constant(m.clone()));
        Ok(self.decode(&b, mem, queries)?.value())
    }

    pub fn predict_raw(&self, queries: &QueryBatch, samples: &SampleSet) -> Result<Tensor<F>> {
        let memory = self.encode_tensor(samples)?;
        self.decode_tensor(memory.as_ref(), queries)
    }

    /// One distribution per query, conditioned on `samples`.
    pub fn predict(&self, queries: &QueryBatch, samples: &SampleSet) -> Result<Vec<DistParams>> {
        let raw = self.predict_raw(queries, samples)?;
        head_rows_to_params(&raw, &self.layout)
    }

    /// Like [`predict`](Self::predict), decoding at most `chunk` queries at a time.
    pub fn predict_chunked(
        &self,
        queries: &QueryBatch,
        samples: &SampleSet,
        chunk: usize,
    ) -> Result<Vec<DistParams>> {
        let chunk = chunk.max(1);
        let memory = self.encode_tensor(samples)?;
        let mut out = Vec::with_capacity(queries.len());
        let mut start = 0;
        while start < queries.len() {
            let end = (start + chunk).min(queries.len());
            let raw = self.decode_tensor(memory.as_ref(), &queries.slice(start..end))?;
            out.extend(head_rows_to_params(&raw, &self.layout)?);
            start = end;
        }
        Ok(out)
    }
}
