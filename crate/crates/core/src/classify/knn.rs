use serde::{Deserialize, Serialize};

use super::squared_distance;
use crate::error::{Error, Result};
use crate::sensor::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("classifier.knn.k", "must be positive"));
        }
        Ok(())
    }
}

/// Euclidean majority vote. Distance ties go to the earlier training row,
/// vote ties to `Professional`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl KnnModel {
    pub fn fit(rows: &[Vec<f64>], labels: &[Label], params: &KnnParams) -> Result<Self> {
        params.validate()?;
        Ok(KnnModel {
            k: params.k.min(rows.len()),
            points: rows.to_vec(),
            labels: labels.to_vec(),
        })
    }

    pub fn predict(&self, z: &[f64]) -> Label {
        let mut order: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(p, z), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let pro = order[..self.k]
            .iter()
            .filter(|(_, i)| self.labels[*i].is_positive())
            .count();
        if 2 * pro >= self.k {
            Label::Professional
        } else {
            Label::Amateur
        }
    }
}
