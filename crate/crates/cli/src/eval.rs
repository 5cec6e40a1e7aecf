use std::fmt::Write as _;

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsefield::distribution::{expected_value, DistParams};
use sparsefield::inference::{sample_chains, DEFAULT_CHUNK};
use sparsefield::signals::{grid_queries, observe_cells, resample_box};
use sparsefield::training::{heldout_polynomials, nll_loss, Checkpoint};
use sparsefield::{BinLayout, Model, Precision, Scalar, Signal};

use crate::config::{RunConfig, Task};
use crate::output::load_images;
use crate::UsageError;

pub const CSV_HEADER: &str = "s_size,mean_mse,sample_mse,mean_sigma,eval_nll";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepRow {
    pub s_size: usize,
    /// Squared error of the mean field, averaged over cells and channels.
    pub mean_mse: f64,
    /// Same for sampled fields, averaged over draws.
    pub sample_mse: f64,
    /// Predictive standard deviation of the full mixture, averaged over cells.
    pub mean_sigma: f64,
    /// Negative log-likelihood of the true values at every cell.
    pub eval_nll: f64,
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// `sqrt(sum_b q_b (sigma_b^2 + |m_b - E|^2 / d))`, the per-channel mixture spread.
fn mixture_sigma(w: &DistParams, layout: &BinLayout) -> f64 {
    let mean = expected_value(w, layout);
    let d = mean.len() as f64;
    let var: f64 = (0..w.bins())
        .map(|b| {
            let m = w.component_mean(b, layout);
            let spread: f64 = m.iter().zip(&mean).map(|(x, e)| (x - e).powi(2)).sum::<f64>() / d;
            w.q[b] * (w.sigma[b].powi(2) + spread)
        })
        .sum();
    var.sqrt()
}

fn test_signals(cfg: &RunConfig, grid: &[usize]) -> anyhow::Result<Vec<Signal>> {
    let n = cfg.eval.num_images;
    match (&cfg.data.path, cfg.task) {
        (Some(path), _) => {
            let mut data = cfg.data.clone();
            if data.resize.is_none() && grid.len() == 2 {
                data.resize = Some([grid[0], grid[1]]);
            }
            data.limit = Some(data.limit.map_or(n, |l| l.min(n)));
            load_images(path, &data)
        }
        (None, Task::Idx) => Err(UsageError::new("task idx needs data.path (--data)").into()),
        (None, Task::Polynomial) => Ok(heldout_polynomials(&cfg.poly, n, cfg.seed)?),
    }
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    let ckpt = Checkpoint::load(cfg.checkpoint()?)?;
    let rows = match cfg.precision {
        Precision::F32 => sweep(cfg, &ckpt, &ckpt.model::<f32>()?)?,
        Precision::F64 => sweep(cfg, &ckpt, &ckpt.model::<f64>()?)?,
    };
    let out = cfg.out_dir()?;
    let mut csv = format!("{CSV_HEADER}\n");
    for r in &rows {
        writeln!(csv, "{},{},{},{},{}", r.s_size, r.mean_mse, r.sample_mse, r.mean_sigma, r.eval_nll)?;
    }
    let path = out.join("reconstruction.csv");
    std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

pub fn sweep<F: Scalar>(cfg: &RunConfig, ckpt: &Checkpoint, model: &Model<F>) -> anyhow::Result<Vec<SweepRow>> {
    let ev = &cfg.eval;
    if ev.sizes.is_empty() || ev.num_images == 0 || ev.num_draws == 0 {
        return Err(UsageError::new("eval needs at least one size, image and draw").into());
    }
    let grid = crate::generate::grid_for(cfg.generate.grid.as_ref(), ckpt)?;
    let signals = test_signals(cfg, &grid)?
        .into_iter()
        .map(|s| {
            if s.grid_shape() == grid.as_slice() {
                Ok(s)
            } else if s.pos_dim() == 2 && grid.len() == 2 {
                Ok(resample_box(&s, grid[0], grid[1])?)
            } else {
                Err(UsageError::new(format!("test signal grid {:?} differs from {grid:?}", s.grid_shape())).into())
            }
        })
        .collect::<anyhow::Result<Vec<Signal>>>()?;
    let cells: usize = grid.iter().product();
    if let Some(&s) = ev.sizes.iter().find(|&&s| s == 0 || s > cells) {
        return Err(UsageError::new(format!("size {s} is outside 1..={cells}")).into());
    }

    let out = cfg.out_dir()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    cfg.write_resolved(out)?;

    let layout = model.layout();
    let queries = grid_queries(&grid);
    let mut rows = Vec::with_capacity(ev.sizes.len());
    for &s in &ev.sizes {
        // One stream per size keeps a row independent of the rest of the sweep.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(s as u64);
        let mut row = SweepRow {
            s_size: s,
            ..SweepRow::default()
        };
        for sig in &signals {
            let set = observe_cells(sig, s, &mut rng)?;
            let params = model.predict_chunked(&queries, &set, DEFAULT_CHUNK)?;
            let mean: Vec<f64> = params.iter().flat_map(|w| expected_value(w, layout)).collect();
            row.mean_mse += mse(&mean, sig.values());
            row.mean_sigma += params.iter().map(|w| mixture_sigma(w, layout)).sum::<f64>() / params.len() as f64;
            row.eval_nll += nll_loss(&params, sig.values(), layout, cfg.train.alpha)?;

            let seeds: Vec<u64> = (0..ev.num_draws).map(|_| rng.random()).collect();
            let draws = sample_chains(model, &set, &grid, &cfg.sampler, &seeds)?;
            row.sample_mse += draws.iter().map(|g| mse(g.signal.values(), sig.values())).sum::<f64>() / draws.len() as f64;
        }
        let n = signals.len() as f64;
        row.mean_mse /= n;
        row.sample_mse /= n;
        row.mean_sigma /= n;
        row.eval_nll /= n;
        log::info!(
            "|S|={s}: mean mse {:.4}, sample mse {:.4}, sigma {:.4}, nll {:.4}",
            row.mean_mse,
            row.sample_mse,
            row.mean_sigma,
            row.eval_nll
        );
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sparsefield::make_bins;

    #[test]
    fn mixture_sigma_of_one_component_is_its_sigma() {
        let layout = make_bins(1, 1, &[(-1.0, 1.0)], None).unwrap();
        let w = DistParams { q: vec![1.0], mu: vec![0.2], sigma: vec![0.3] };
        assert!((mixture_sigma(&w, &layout) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn mixture_sigma_includes_spread_between_components() {
        let layout = make_bins(2, 1, &[(-1.0, 1.0)], None).unwrap();
        let w = DistParams { q: vec![0.5, 0.5], mu: vec![0.0, 0.0], sigma: vec![0.1, 0.1] };
        let (a, b) = (layout.center(0)[0], layout.center(1)[0]);
        let expect = (0.01 + ((a - b) / 2.0).powi(2)).sqrt();
        assert!((mixture_sigma(&w, &layout) - expect).abs() < 1e-12);
    }
}
