use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Init {
    /// Uniform in `±1/sqrt(fan_in)`, fan-in being the first extent.
    FanIn,
    Zeros,
    Ones,
}

/// Every parameter the configuration requires, in a fixed order.
pub(crate) fn schema(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let d = cfg.d_model;
    let ff = cfg.ff_width();
    let mut out = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, init: Init| out.push((name, shape, init));

    let linear = |push: &mut dyn FnMut(String, Vec<usize>, Init), name: &str, fan_in: usize, fan_out: usize| {
        push(format!("{name}.w"), vec![fan_in, fan_out], Init::FanIn);
        push(format!("{name}.b"), vec![fan_out], Init::Zeros);
    };
    let norm = |push: &mut dyn FnMut(String, Vec<usize>, Init), name: &str| {
        push(format!("{name}.g"), vec![d], Init::Ones);
        push(format!("{name}.b"), vec![d], Init::Zeros);
    };
    let block = |push: &mut dyn FnMut(String, Vec<usize>, Init), p: &str| {
        norm(push, &format!("{p}.ln1"));
        for proj in ["q", "k", "v", "o"] {
            linear(push, &format!("{p}.attn.{proj}"), d, d);
        }
        norm(push, &format!("{p}.ln2"));
        linear(push, &format!("{p}.ff1"), d, ff);
        linear(push, &format!("{p}.ff2"), ff, d);
    };

    linear(&mut push, "enc.pos", cfg.fourier_width(), d);
    linear(&mut push, "enc.val", cfg.value_dim, d);
    for i in 0..cfg.n_enc_layers {
        block(&mut push, &format!("enc.{i}"));
    }
    norm(&mut push, "enc.norm");
    linear(&mut push, "dec.pos", cfg.fourier_width(), d);
    for i in 0..cfg.n_dec_layers {
        block(&mut push, &format!("dec.{i}"));
    }
    norm(&mut push, "dec.norm");
    push("head.w".into(), vec![d, cfg.raw_width()], Init::Zeros);
    push("head.b".into(), vec![cfg.raw_width()], Init::Zeros);
    out
}

/// Named parameter registry.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<F> {
    tensors: BTreeMap<String, Tensor<F>>,
}

impl<F: Scalar> ModelParams<F> {
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = schema(cfg)
            .into_iter()
            .map(|(name, shape, init)| {
                let t = match init {
                    Init::Zeros => Tensor::zeros(shape),
                    Init::Ones => Tensor::ones(shape),
                    Init::FanIn => {
                        let bound = 1.0 / (shape[0] as f64).sqrt();
                        let n: usize = shape.iter().product();
                        let data = (0..n)
                            .map(|_| F::lit(rng.random_range(-bound..bound)))
                            .collect();
                        Tensor::new(shape, data).expect("schema shapes are consistent")
                    }
                };
                (name, t)
            })
            .collect();
        ModelParams { tensors }
    }

    /// Builds a registry from named tensors, checking it against the schema.
    pub fn from_tensors(cfg: &ModelConfig, tensors: BTreeMap<String, Tensor<F>>) -> Result<Self> {
        let params = ModelParams { tensors };
        params.validate(cfg)?;
        Ok(params)
    }

    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let schema = schema(cfg);
        for (name, shape, _) in &schema {
            match self.tensors.get(name) {
                None => return Err(Error::Config(format!("missing parameter {name}"))),
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(Error::Config(format!(
                        "parameter {name} has shape {:?}, expected {shape:?}",
                        t.shape()
                    )))
                }
                _ => {}
            }
        }
        if self.tensors.len() != schema.len() {
            let known: Vec<&String> = schema.iter().map(|(n, _, _)| n).collect();
            let extra = self.tensors.keys().find(|k| !known.contains(k));
            return Err(Error::Config(format!("unexpected parameter {extra:?}")));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<F>> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<F>> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<F>)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<F>)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(|t| t.numel()).sum()
    }

    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        ModelParams {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    /// Zero tensors with the same names and shapes.
    pub fn zeros_like(&self) -> ModelParams<F> {
        ModelParams {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape().to_vec())))
                .collect(),
        }
    }
}
