use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sparsefield::inference::{infer_mean, sample_chains, SamplerConfig};
use sparsefield::signals::{observe_cells, resample_box};
use sparsefield::training::Checkpoint;
use sparsefield::{Model, Precision, SampleSet, Scalar, Signal};

use crate::config::RunConfig;
use crate::output::{load_signal_ref, parse_observations, write_signal};
use crate::UsageError;

#[derive(Serialize)]
struct Chain {
    seed: u64,
    n_autoregressive: usize,
    order: Vec<usize>,
    file: String,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    checkpoint: String,
    grid_shape: &'a [usize],
    seed: u64,
    sampler: &'a SamplerConfig,
    observations: &'a SampleSet,
    mean: String,
    chains: Vec<Chain>,
}

/// Brings a reference signal onto the output raster.
fn fit_to_grid(sig: Signal, grid: &[usize]) -> anyhow::Result<Signal> {
    if sig.grid_shape() == grid {
        return Ok(sig);
    }
    if sig.pos_dim() == 2 && grid.len() == 2 {
        return Ok(resample_box(&sig, grid[0], grid[1])?);
    }
    Err(UsageError::new(format!("signal grid {:?} does not match output grid {grid:?}", sig.grid_shape())).into())
}

pub fn grid_for(cfg_grid: Option<&Vec<usize>>, ckpt: &Checkpoint) -> anyhow::Result<Vec<usize>> {
    cfg_grid
        .cloned()
        .or_else(|| ckpt.meta.grid_shape.clone())
        .ok_or_else(|| UsageError::new("the checkpoint has no native grid; set generate.grid").into())
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    let ckpt_path = cfg.checkpoint()?;
    let ckpt = Checkpoint::load(ckpt_path)?;
    match cfg.precision {
        Precision::F32 => generate_as(cfg, &ckpt, ckpt.model::<f32>()?),
        Precision::F64 => generate_as(cfg, &ckpt, ckpt.model::<f64>()?),
    }
}

fn generate_as<F: Scalar>(cfg: &RunConfig, ckpt: &Checkpoint, model: Model<F>) -> anyhow::Result<()> {
    let out = cfg.out_dir()?;
    let gen = &cfg.generate;
    let grid = grid_for(gen.grid.as_ref(), ckpt)?;
    let (p, d) = (model.config().pos_dim, model.config().value_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut truth = None;
    let observations = match (&gen.observe, &gen.from_signal) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| UsageError::new(format!("cannot read {}: {e}", path.display())))?;
            parse_observations(&text, p, d)?
        }
        (None, Some(reference)) => {
            if gen.num_observed == 0 {
                return Err(UsageError::new("num_observed must be at least 1").into());
            }
            let sig = fit_to_grid(load_signal_ref(reference, &cfg.data)?, &grid)?;
            if sig.value_dim() != d {
                return Err(UsageError::new(format!("signal has {} channels, model expects {d}", sig.value_dim())).into());
            }
            let set = observe_cells(&sig, gen.num_observed, &mut rng)?;
            truth = Some(sig);
            set
        }
        _ => return Err(UsageError::new("give exactly one of --observe or --from-signal").into()),
    };
    if observations.is_empty() {
        return Err(UsageError::new("at least one observation is required").into());
    }

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    cfg.write_resolved(out)?;
    if let Some(sig) = &truth {
        write_signal(sig, out, "truth")?;
    }

    let mean = infer_mean(&model, &observations, &grid)?;
    let mean_path = write_signal(&mean, out, "mean")?;

    let seeds: Vec<u64> = (0..gen.num_samples).map(|_| rng.random()).collect();
    let results = sample_chains(&model, &observations, &grid, &cfg.sampler, &seeds)?;
    let mut chains = Vec::with_capacity(results.len());
    for (i, (r, &seed)) in results.into_iter().zip(&seeds).enumerate() {
        let path = write_signal(&r.signal, out, &format!("sample_{i:03}"))?;
        chains.push(Chain {
            seed,
            n_autoregressive: r.n_autoregressive,
            order: r.order,
            file: file_name(&path),
        });
    }

    let sidecar = Sidecar {
        checkpoint: ckpt_path_string(cfg),
        grid_shape: &grid,
        seed: cfg.seed,
        sampler: &cfg.sampler,
        observations: &observations,
        mean: file_name(&mean_path),
        chains,
    };
    let path = out.join("generation.json");
    std::fs::write(&path, serde_json::to_string_pretty(&sidecar)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    log::info!(
        "wrote mean and {} samples from {} observations to {}",
        seeds.len(),
        observations.len(),
        out.display()
    );
    Ok(())
}

fn file_name(path: &std::path::Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn ckpt_path_string(cfg: &RunConfig) -> String {
    cfg.ckpt.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}
