//! SVM, random forest and k-nearest-neighbour classifiers over standardized
//! feature subsets.

pub mod forest;
pub mod knn;
pub mod svm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::Label;

pub use forest::{Forest, ForestParams};
pub use knn::{KnnModel, KnnParams};
pub use svm::{SvmModel, SvmParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Svm,
    Rf,
    Knn,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [ClassifierKind::Svm, ClassifierKind::Rf, ClassifierKind::Knn];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "svm",
            ClassifierKind::Rf => "rf",
            ClassifierKind::Knn => "knn",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svm" => Ok(ClassifierKind::Svm),
            "rf" | "random_forest" | "forest" => Ok(ClassifierKind::Rf),
            "knn" => Ok(ClassifierKind::Knn),
            _ => Err(Error::invalid("classifier", format!("unknown classifier {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    pub svm: SvmParams,
    pub rf: ForestParams,
    pub knn: KnnParams,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        self.svm.validate()?;
        self.rf.validate()?;
        self.knn.validate()
    }
}

/// Per-column z-scoring fitted on training rows. Columns with zero spread
/// pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut scale = vec![1.0; width];
        for ((sc, m), s) in scale.iter_mut().zip(mean.iter_mut()).zip(var) {
            let sd = (s / n).sqrt();
            if sd > 0.0 {
                *sc = sd;
            } else {
                *m = 0.0;
            }
        }
        Standardizer { mean, scale }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Anything that maps a full-width feature row to a label.
pub trait Predictor {
    fn predict(&self, row: &[f64]) -> Result<Label>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Svm(SvmModel),
    Rf(Forest),
    Knn(KnnModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    /// Width of the rows `predict` expects.
    pub input_width: usize,
    pub feature_indices: Vec<usize>,
    pub scaler: Standardizer,
    pub model: ModelParams,
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self.model {
            ModelParams::Svm(_) => ClassifierKind::Svm,
            ModelParams::Rf(_) => ClassifierKind::Rf,
            ModelParams::Knn(_) => ClassifierKind::Knn,
        }
    }

    fn project(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.input_width {
            return Err(Error::LengthMismatch {
                expected: self.input_width,
                actual: row.len(),
            });
        }
        let picked: Vec<f64> = self.feature_indices.iter().map(|&f| row[f]).collect();
        Ok(self.scaler.transform(&picked))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::parse("<model>", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(text).map_err(|e| Error::parse("<model>", e))?;
        if header.version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedModelVersion(header.version));
        }
        serde_json::from_str(text).map_err(|e| Error::parse("<model>", e))
    }
}

impl Predictor for TrainedModel {
    fn predict(&self, row: &[f64]) -> Result<Label> {
        let z = self.project(row)?;
        Ok(match &self.model {
            ModelParams::Svm(m) => m.predict(&z),
            ModelParams::Rf(m) => m.predict(&z),
            ModelParams::Knn(m) => m.predict(&z),
        })
    }
}

/// Fits `kind` on the columns `features` of `rows`. Standardization is
/// learned from these rows only.
pub fn fit(
    kind: ClassifierKind,
    rows: &[&[f64]],
    labels: &[Label],
    features: &[usize],
    hyper: &Hyperparams,
    seed: u64,
) -> Result<TrainedModel> {
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("fit: no training samples"));
    }
    if features.is_empty() {
        return Err(Error::EmptyInput("fit: empty feature set"));
    }
    let pro = labels.iter().filter(|l| l.is_positive()).count();
    if pro == 0 || pro == labels.len() {
        return Err(Error::SingleClass(format!(
            "training set of {} samples has a single class",
            labels.len()
        )));
    }
    let input_width = rows[0].len();
    if let Some(&bad) = features.iter().find(|&&f| f >= input_width) {
        return Err(Error::invalid("features", format!("index {bad} >= {input_width}")));
    }
    let picked: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| features.iter().map(|&f| r[f]).collect())
        .collect();
    let scaler = Standardizer::fit(&picked);
    let z: Vec<Vec<f64>> = picked.iter().map(|r| scaler.transform(r)).collect();
    let model = match kind {
        ClassifierKind::Svm => ModelParams::Svm(SvmModel::fit(&z, labels, &hyper.svm)?),
        ClassifierKind::Rf => ModelParams::Rf(Forest::fit(&z, labels, &hyper.rf, seed)?),
        ClassifierKind::Knn => ModelParams::Knn(KnnModel::fit(&z, labels, &hyper.knn)?),
    };
    Ok(TrainedModel {
        version: MODEL_FORMAT_VERSION,
        input_width,
        feature_indices: features.to_vec(),
        scaler,
        model,
    })
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(n: usize, gap: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = crate::seed::rng(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let pro = i % 2 == 0;
            let off = if pro { gap } else { -gap };
            rows.push(vec![
                off + rng.random::<f64>() - 0.5,
                rng.random::<f64>() * 10.0,
                -off + rng.random::<f64>() - 0.5,
                7.0,
            ]);
            labels.push(if pro { Label::Professional } else { Label::Amateur });
        }
        (rows, labels)
    }

    #[test]
    fn separable_blobs_fit_all_kinds() {
        let (rows, labels) = blobs(100, 2.0, 4);
        let views: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        for kind in ClassifierKind::ALL {
            let model = fit(kind, &views, &labels, &[0, 2, 3], &Hyperparams::default(), 1).unwrap();
            let correct = views
                .iter()
                .zip(&labels)
                .filter(|(r, l)| model.predict(r).unwrap() == **l)
                .count();
            assert_eq!(correct, 100, "{kind}");
        }
    }

    #[test]
    fn json_round_trip_predicts_identically() {
        let (rows, labels) = blobs(60, 0.3, 5);
        let views: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        for kind in ClassifierKind::ALL {
            let model = fit(kind, &views, &labels, &[0, 1, 2], &Hyperparams::default(), 2).unwrap();
            let back = TrainedModel::from_json(&model.to_json().unwrap()).unwrap();
            assert_eq!(back, model);
            for r in &views {
                assert_eq!(model.predict(r).unwrap(), back.predict(r).unwrap());
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let (rows, labels) = blobs(10, 1.0, 6);
        let views: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let h = Hyperparams::default();
        assert!(fit(ClassifierKind::Knn, &views, &labels, &[], &h, 0).is_err());
        assert!(fit(ClassifierKind::Knn, &views, &labels, &[9], &h, 0).is_err());
        let single = vec![Label::Amateur; 10];
        assert!(matches!(
            fit(ClassifierKind::Svm, &views, &single, &[0], &h, 0),
            Err(Error::SingleClass(_))
        ));
        let m = fit(ClassifierKind::Knn, &views, &labels, &[0], &h, 0).unwrap();
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn unknown_model_version_rejected() {
        let (rows, labels) = blobs(10, 1.0, 6);
        let views: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let m = fit(ClassifierKind::Knn, &views, &labels, &[0], &Hyperparams::default(), 0).unwrap();
        let text = m.to_json().unwrap().replacen("\"version\": 1", "\"version\": 99", 1);
        assert!(matches!(TrainedModel::from_json(&text), Err(Error::UnsupportedModelVersion(99))));
    }

    #[test]
    fn standardizer_passes_constant_columns() {
        let s = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(s.transform(&[2.0, 5.0]), vec![0.0, 5.0]);
        assert_eq!(s.transform(&[3.0, 6.0]), vec![1.0, 6.0]);
    }
}
