use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_positions(positions: &[f64], pos_dim: usize) -> Result<()> {
    if pos_dim == 0 || !positions.len().is_multiple_of(pos_dim) {
        return Err(Error::Input(format!(
            "{} coordinates do not form positions of dimension {pos_dim}",
            positions.len()
        )));
    }
    if let Some(i) = positions
        .iter()
        .position(|x| !x.is_finite() || !(-1.0..=1.0).contains(x))
    {
        return Err(Error::Input(format!(
            "position {} has coordinate {} outside [-1, 1]",
            i / pos_dim,
            positions[i]
        )));
    }
    Ok(())
}

/// Observed `(position, value)` pairs. Positions lie in `[-1, 1]^p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pos_dim: usize,
    value_dim: usize,
    positions: Vec<f64>,
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(pos_dim: usize, value_dim: usize, positions: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_positions(&positions, pos_dim)?;
        if value_dim == 0 || values.len() != positions.len() / pos_dim * value_dim {
            return Err(Error::Input(format!(
                "{} values for {} positions of value dimension {value_dim}",
                values.len(),
                positions.len() / pos_dim
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("sample values must be finite".into()));
        }
        Ok(SampleSet {
            pos_dim,
            value_dim,
            positions,
            values,
        })
    }

    pub fn empty(pos_dim: usize, value_dim: usize) -> Self {
        SampleSet {
            pos_dim,
            value_dim,
            positions: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn pos_dim(&self) -> usize {
        self.pos_dim
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.pos_dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn position(&self, k: usize) -> &[f64] {
        &self.positions[k * self.pos_dim..(k + 1) * self.pos_dim]
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.value_dim..(k + 1) * self.value_dim]
    }

    pub fn push(&mut self, position: &[f64], value: &[f64]) -> Result<()> {
        check_positions(position, self.pos_dim)?;
        if position.len() != self.pos_dim || value.len() != self.value_dim {
            return Err(Error::dim(
                "sample push",
                &[position.len(), value.len()],
                &[self.pos_dim, self.value_dim],
            ));
        }
        self.positions.extend_from_slice(position);
        self.values.extend_from_slice(value);
        Ok(())
    }

    /// Samples reordered so that entry `k` is the original entry `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> SampleSet {
        let mut out = SampleSet::empty(self.pos_dim, self.value_dim);
        for &k in order {
            out.positions.extend_from_slice(self.position(k));
            out.values.extend_from_slice(self.value(k));
        }
        out
    }
}

/// Query positions in `[-1, 1]^p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryBatch {
    pos_dim: usize,
    positions: Vec<f64>,
}

impl QueryBatch {
    pub fn new(pos_dim: usize, positions: Vec<f64>) -> Result<Self> {
        check_positions(&positions, pos_dim)?;
        Ok(QueryBatch { pos_dim, positions })
    }

    pub fn pos_dim(&self) -> usize {
        self.pos_dim
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.pos_dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.pos_dim..(i + 1) * self.pos_dim]
    }

    /// Queries `range` as a new batch.
    pub fn slice(&self, range: std::ops::Range<usize>) -> QueryBatch {
        QueryBatch {
            pos_dim: self.pos_dim,
            positions: self.positions[range.start * self.pos_dim..range.end * self.pos_dim].to_vec(),
        }
    }

    /// Queries at the given indices.
    pub fn select(&self, idx: &[usize]) -> QueryBatch {
        QueryBatch {
            pos_dim: self.pos_dim,
            positions: idx.iter().flat_map(|&i| self.position(i).iter().copied()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_domain_positions() {
        assert!(SampleSet::new(2, 1, vec![0.0, 1.5], vec![0.0]).is_err());
        assert!(QueryBatch::new(1, vec![f64::NAN]).is_err());
        let err = SampleSet::new(1, 1, vec![0.0, -1.2], vec![0.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("position 1"));
    }

    #[test]
    fn value_count_must_match() {
        assert!(SampleSet::new(1, 2, vec![0.0, 0.5], vec![0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn permutation_reorders_pairs() {
        let s = SampleSet::new(1, 1, vec![-0.5, 0.0, 0.5], vec![1.0, 2.0, 3.0]).unwrap();
        let p = s.permuted(&[2, 0, 1]);
        assert_eq!(p.positions(), &[0.5, -0.5, 0.0]);
        assert_eq!(p.values(), &[3.0, 1.0, 2.0]);
    }
}
