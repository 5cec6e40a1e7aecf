use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::Context;
use sparsefield::training::{self, write_eval_row, Dataset, EVAL_CSV_HEADER};
use sparsefield::{Precision, Scalar};

use crate::config::{RunConfig, Task};
use crate::output::load_images;
use crate::UsageError;

pub fn dataset(cfg: &RunConfig) -> anyhow::Result<Dataset> {
    match cfg.task {
        Task::Polynomial => Ok(Dataset::Polynomials(cfg.poly.clone())),
        Task::Idx => {
            let path = cfg
                .data
                .path
                .as_deref()
                .ok_or_else(|| UsageError::new("task idx needs data.path (--data)"))?;
            Ok(Dataset::Signals(load_images(path, &cfg.data)?))
        }
    }
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    let out = cfg.out_dir()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    cfg.write_resolved(out)?;

    let data = dataset(cfg)?;
    // Channel counts come from the data, not the file.
    let mut model_cfg = cfg.model.clone();
    model_cfg.pos_dim = data.pos_dim();
    model_cfg.value_dim = data.value_dim();

    match cfg.precision {
        Precision::F32 => train_as::<f32>(cfg, &data, &model_cfg),
        Precision::F64 => train_as::<f64>(cfg, &data, &model_cfg),
    }
}

fn train_as<F: Scalar>(cfg: &RunConfig, data: &Dataset, model_cfg: &sparsefield::ModelConfig) -> anyhow::Result<()> {
    let out = cfg.out_dir()?;
    let csv_path = out.join("eval.csv");
    let mut csv = BufWriter::new(File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?);
    writeln!(csv, "{EVAL_CSV_HEADER}")?;
    csv.flush()?;

    let mut write_err = None;
    let report = training::train::<F>(data, model_cfg, &cfg.train, |row| {
        if write_err.is_none() {
            if let Err(e) = write_eval_row(&mut csv, row).and_then(|_| csv.flush()) {
                write_err = Some(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).with_context(|| format!("writing {}", csv_path.display()));
    }

    let ckpt_path = out.join("checkpoint.pxtf");
    report.checkpoint(data, &cfg.train).save(&ckpt_path)?;
    log::info!(
        "wrote {} after {} steps ({} parameters)",
        ckpt_path.display(),
        cfg.train.steps,
        report.model.params().num_scalars()
    );
    Ok(())
}
