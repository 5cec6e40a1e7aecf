//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "PXTF" | u32 version | u64 meta_len | meta JSON (UTF-8) | u32 section_count
//! section: u32 path_len | path (UTF-8) | u32 rank | rank × u64 extents | f32 payload
//! ```
//!
//! Optimizer moments are stored as extra sections under `adam.m/` and
//! `adam.v/` prefixes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Adam, TrainConfig};
use crate::distribution::BinLayout;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ModelParams};
use crate::tensor::{Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"PXTF";
pub const VERSION: u32 = 1;
const M_PREFIX: &str = "adam.m/";
const V_PREFIX: &str = "adam.v/";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub layout: BinLayout,
    pub value_range: Vec<(f64, f64)>,
    /// Native raster of the training data, when it has one.
    pub grid_shape: Option<Vec<usize>>,
    pub train: Option<TrainConfig>,
    pub seed: u64,
    pub step: u64,
    /// Adam time step, present when moments are stored.
    pub optimizer_step: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: ModelParams<f32>,
    pub optimizer: Option<Adam<f32>>,
}

impl Checkpoint {
    pub fn from_model<F: Scalar>(model: &Model<F>, seed: u64, step: u64) -> Self {
        Checkpoint {
            meta: CheckpointMeta {
                model: model.config().clone(),
                layout: model.layout().clone(),
                value_range: model.layout().value_range().to_vec(),
                grid_shape: None,
                train: None,
                seed,
                step,
                optimizer_step: None,
            },
            params: model.params().cast(),
            optimizer: None,
        }
    }

    pub fn with_optimizer<F: Scalar>(mut self, adam: &Adam<F>) -> Self {
        self.meta.optimizer_step = Some(adam.t);
        self.optimizer = Some(adam.cast());
        self
    }

    pub fn model<F: Scalar>(&self) -> Result<Model<F>> {
        Model::new(
            self.meta.model.clone(),
            self.meta.layout.clone(),
            self.params.cast(),
        )
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta)
            .map_err(|e| Error::Config(format!("cannot encode checkpoint metadata: {e}")))?;
        let mut sections: Vec<(String, &Tensor<f32>)> =
            self.params.iter().map(|(k, t)| (k.clone(), t)).collect();
        if let Some(adam) = &self.optimizer {
            sections.extend(adam.m.iter().map(|(k, t)| (format!("{M_PREFIX}{k}"), t)));
            sections.extend(adam.v.iter().map(|(k, t)| (format!("{V_PREFIX}{k}"), t)));
        }

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
        for (path, t) in sections {
            out.extend_from_slice(&(path.len() as u32).to_le_bytes());
            out.extend_from_slice(path.as_bytes());
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &e in t.shape() {
                out.extend_from_slice(&(e as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::format(0, "bad checkpoint magic, expected PXTF"));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::format(
                4,
                format!("unsupported checkpoint version {version}, expected {VERSION}"),
            ));
        }
        let meta_len = r.u64("metadata length")?;
        let meta_at = r.pos;
        let meta_bytes = r.take_u64(meta_len, "metadata")?;
        let meta: CheckpointMeta = serde_json::from_slice(meta_bytes)
            .map_err(|e| Error::format(meta_at as u64, format!("bad checkpoint metadata: {e}")))?;

        let count = r.u32("section count")?;
        let mut params = BTreeMap::new();
        let mut m = BTreeMap::new();
        let mut v = BTreeMap::new();
        for i in 0..count {
            let label = format!("section {i}");
            let path_len = r.u32(&label)?;
            let path_bytes = r.take_u64(path_len as u64, &format!("{label} path"))?;
            let path = std::str::from_utf8(path_bytes)
                .map_err(|_| Error::format(r.pos as u64, format!("{label} path is not UTF-8")))?
                .to_string();
            let rank = r.u32(&format!("section {path:?} rank"))? as usize;
            if rank == 0 || rank > 8 {
                return Err(Error::format(
                    r.pos as u64,
                    format!("section {path:?} has implausible rank {rank}"),
                ));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64(&format!("section {path:?} extents"))?);
            }
            let numel = shape
                .iter()
                .try_fold(1u64, |acc, &e| acc.checked_mul(e))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| {
                    Error::format(r.pos as u64, format!("section {path:?} extents overflow"))
                })?;
            let payload = r.take_u64(numel, &format!("section {path:?} payload"))?;
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let shape: Vec<usize> = shape.into_iter().map(|e| e as usize).collect();
            let tensor = Tensor::new(shape, data).map_err(|e| {
                Error::format(r.pos as u64, format!("section {path:?}: {e}"))
            })?;
            let slot = if let Some(name) = path.strip_prefix(M_PREFIX) {
                m.insert(name.to_string(), tensor)
            } else if let Some(name) = path.strip_prefix(V_PREFIX) {
                v.insert(name.to_string(), tensor)
            } else {
                params.insert(path.clone(), tensor)
            };
            if slot.is_some() {
                return Err(Error::format(r.pos as u64, format!("duplicate section {path:?}")));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::format(
                r.pos as u64,
                format!("{} trailing bytes after last section", bytes.len() - r.pos),
            ));
        }

        let end = bytes.len() as u64;
        let invalid = |e: Error| Error::format(end, format!("checkpoint does not match its config: {e}"));
        let params = ModelParams::from_tensors(&meta.model, params).map_err(invalid)?;
        let optimizer = match (m.is_empty() && v.is_empty(), meta.optimizer_step) {
            (true, None) => None,
            (false, Some(t)) => Some(Adam {
                m: ModelParams::from_tensors(&meta.model, m).map_err(invalid)?,
                v: ModelParams::from_tensors(&meta.model, v).map_err(invalid)?,
                t,
            }),
            _ => {
                return Err(Error::format(
                    end,
                    "optimizer sections and optimizer_step disagree",
                ))
            }
        };
        let ckpt = Checkpoint {
            meta,
            params,
            optimizer,
        };
        ckpt.model::<f32>().map_err(invalid)?;
        Ok(ckpt)
    }

    /// Writes via a sibling temporary file so readers never see a partial file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("pxtf.tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if n > remaining {
            return Err(Error::format(
                self.pos as u64,
                format!("truncated {what}: need {n} bytes, {remaining} remain"),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn take_u64(&mut self, n: u64, what: &str) -> Result<&'a [u8]> {
        let n = usize::try_from(n).unwrap_or(usize::MAX);
        self.take(n, what)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::make_bins;
    use crate::sample::{QueryBatch, SampleSet};

    fn small() -> Checkpoint {
        let cfg = ModelConfig {
            pos_dim: 2,
            value_dim: 1,
            bins: 3,
            d_model: 8,
            n_heads: 2,
            n_enc_layers: 1,
            n_dec_layers: 1,
            n_octaves: 2,
            ff_mult: 2,
        };
        let layout = make_bins(3, 1, &[(-1.0, 1.0)], None).unwrap();
        let mut model = Model::<f32>::init(cfg, layout, 11).unwrap();
        for (i, (_, t)) in model.params_mut().iter_mut().enumerate() {
            for (j, v) in t.data_mut().iter_mut().enumerate() {
                *v += ((i * 31 + j * 7) % 13) as f32 * 0.01;
            }
        }
        let adam = Adam::new(model.params());
        Checkpoint::from_model(&model, 11, 5).with_optimizer(&adam)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ckpt = small();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pxtf");
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ckpt);

        let s = SampleSet::new(2, 1, vec![0.1, 0.2, -0.4, 0.9], vec![0.3, -0.7]).unwrap();
        let q = QueryBatch::new(2, vec![0.0, 0.5, -0.9, -0.1]).unwrap();
        let a = ckpt.model::<f32>().unwrap().predict_raw(&q, &s).unwrap();
        let b = back.model::<f32>().unwrap().predict_raw(&q, &s).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn truncation_is_rejected_everywhere() {
        let bytes = small().to_bytes().unwrap();
        for cut in [0, 3, 7, 15, 40, bytes.len() / 2, bytes.len() - 1] {
            match Checkpoint::from_bytes(&bytes[..cut]) {
                Err(Error::Format { .. }) => {}
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn corrupted_section_length_names_section() {
        let ckpt = small();
        let bytes = ckpt.to_bytes().unwrap();
        let meta_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        // first section starts after magic, version, meta length, meta, count
        let first = 16 + meta_len + 4;
        let path_len = u32::from_le_bytes(bytes[first..first + 4].try_into().unwrap()) as usize;
        let extent_at = first + 4 + path_len + 4;
        let mut bad = bytes.clone();
        bad[extent_at..extent_at + 8].copy_from_slice(&(1u64 << 40).to_le_bytes());
        let name = ckpt.params.names().next().unwrap().clone();
        match Checkpoint::from_bytes(&bad) {
            Err(Error::Format { message, .. }) => assert!(message.contains(&name), "{message}"),
            other => panic!("{other:?}"),
        }

        let mut bad = bytes.clone();
        bad[first..first + 4].copy_from_slice(&u32::MAX.to_le_bytes());
        match Checkpoint::from_bytes(&bad) {
            Err(Error::Format { message, .. }) => assert!(message.contains("section 0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn magic_and_version_checked() {
        let mut bytes = small().to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format { offset: 0, .. })));
        let mut bytes = small().to_bytes().unwrap();
        bytes[4] = 9;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format { offset: 4, .. })));
        let mut bytes = small().to_bytes().unwrap();
        bytes.push(0);
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format { .. })));
    }
}
