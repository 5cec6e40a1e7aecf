//! Loading inputs and writing signal artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sparsefield::signals::{parse_idx, read_pnm, resample_box, write_pnm};
use sparsefield::{SampleSet, Signal};

use crate::config::DataConfig;
use crate::UsageError;

/// Reads IDX images, truncating before resampling so large files stay cheap.
pub fn load_images(path: &Path, data: &DataConfig) -> anyhow::Result<Vec<Signal>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut images = parse_idx(&bytes)?;
    if let Some(limit) = data.limit {
        images.truncate(limit);
    }
    if images.is_empty() {
        return Err(UsageError::new(format!("{} holds no images", path.display())).into());
    }
    match data.resize {
        Some([r, c]) => Ok(images.iter().map(|s| resample_box(s, r, c)).collect::<Result<_, _>>()?),
        None => Ok(images),
    }
}

/// Loads `path:index`: a PGM/PPM file (index must be 0) or an image of an
/// IDX file.
pub fn load_signal_ref(reference: &str, data: &DataConfig) -> anyhow::Result<Signal> {
    let (path, index) = match reference.rsplit_once(':') {
        Some((p, i)) => (
            PathBuf::from(p),
            i.parse::<usize>()
                .map_err(|_| UsageError::new(format!("signal reference {reference:?} needs a numeric index")))?,
        ),
        None => (PathBuf::from(reference), 0),
    };
    let is_pnm = matches!(path.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm"));
    if is_pnm {
        if index != 0 {
            return Err(UsageError::new(format!("{} holds one image; index {index} is out of range", path.display())).into());
        }
        return Ok(read_pnm(&path)?);
    }
    let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    let images = parse_idx(&bytes)?;
    let image = images.get(index).ok_or_else(|| {
        UsageError::new(format!("{} holds {} images; index {index} is out of range", path.display(), images.len()))
    })?;
    match data.resize {
        Some([r, c]) => Ok(resample_box(image, r, c)?),
        None => Ok(image.clone()),
    }
}

/// Parses whitespace-separated `x_1 .. x_p v_1 .. v_d` rows. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_observations(text: &str, p: usize, d: usize) -> Result<SampleSet, UsageError> {
    let mut set = SampleSet::empty(p, d);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |why: String| UsageError::new(format!("observation line {}: {why}", i + 1));
        let nums = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("{t:?} is not a number"))))
            .collect::<Result<Vec<_>, _>>()?;
        if nums.len() != p + d {
            return Err(bad(format!("expected {} numbers, found {}", p + d, nums.len())));
        }
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(bad("values must be finite".into()));
        }
        if nums[..p].iter().any(|x| !(-1.0..=1.0).contains(x)) {
            return Err(bad("positions must lie in [-1, 1]".into()));
        }
        set.push(&nums[..p], &nums[p..]).map_err(|e| bad(e.to_string()))?;
    }
    Ok(set)
}

/// Writes `dir/stem.{pgm,ppm}` for 2-D images with one or three channels,
/// `dir/stem.csv` otherwise.
pub fn write_signal(sig: &Signal, dir: &Path, stem: &str) -> anyhow::Result<PathBuf> {
    if sig.pos_dim() == 2 && matches!(sig.value_dim(), 1 | 3) {
        let ext = if sig.value_dim() == 1 { "pgm" } else { "ppm" };
        let path = dir.join(format!("{stem}.{ext}"));
        write_pnm(sig, &path)?;
        return Ok(path);
    }
    let path = dir.join(format!("{stem}.csv"));
    let mut out = String::new();
    let header: Vec<String> = (0..sig.pos_dim())
        .map(|i| format!("x{i}"))
        .chain((0..sig.value_dim()).map(|i| format!("v{i}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for n in 0..sig.len() {
        let row: Vec<String> = sig
            .cell_position(n)
            .iter()
            .chain(sig.value(n))
            .map(|v| v.to_string())
            .collect();
        writeln!(out, "{}", row.join(",")).expect("writing to a string");
    }
    std::fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observation_rows_parse() {
        let set = parse_observations("# x y v\n0.1 -0.2 0.5\n\n-1 1 -0.25\n", 2, 1).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.position(1), &[-1.0, 1.0]);
        assert_eq!(set.value(1), &[-0.25]);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let err = parse_observations("0 0 0\n0 0\n", 2, 1).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = parse_observations("0 zero 0\n", 2, 1).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        assert!(parse_observations("0 1.5 0\n", 2, 1).is_err());
    }

    #[test]
    fn one_dimensional_signals_become_csv() {
        let dir = tempfile::tempdir().unwrap();
        let sig = Signal::new(vec![3], 1, vec![0.0, 0.5, 1.0]).unwrap();
        let path = write_signal(&sig, dir.path(), "mean").unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("x0,v0\n"));
    }
}
