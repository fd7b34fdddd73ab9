use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::Label;

/// Binary confusion counts with Professional as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth.is_positive(), predicted.is_positive()) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut c = Confusion::default();
        for (t, p) in pairs {
            c.record(t, p);
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.tn + self.fp
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn sensitivity(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.tp as f64 / pos as f64)
    }

    pub fn specificity(&self) -> Option<f64> {
        let neg = self.tn + self.fp;
        (neg > 0).then(|| self.tn as f64 / neg as f64)
    }

    pub fn merge(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
        }
    }
}

/// Mean and sample standard deviation; `NaN` mean (serialized as `null`)
/// when no fold contributed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanStd {
                mean: f64::NAN,
                std: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: MeanStd,
    pub sensitivity: MeanStd,
    pub specificity: MeanStd,
    pub confusions: Vec<Confusion>,
}

impl Metrics {
    /// Accuracy over all test samples of all folds together.
    pub fn pooled_accuracy(&self) -> f64 {
        self.confusions
            .iter()
            .fold(Confusion::default(), |acc, c| acc.merge(c))
            .accuracy()
    }

    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.confusions.iter().map(Confusion::accuracy).collect()
    }
}

pub fn compute_metrics(confusions: &[Confusion]) -> Result<Metrics> {
    if confusions.is_empty() {
        return Err(Error::EmptyInput("compute_metrics: no folds"));
    }
    if let Some(i) = confusions.iter().position(|c| c.total() == 0) {
        return Err(Error::FoldTooSmall(format!("test fold {i} is empty")));
    }
    let acc: Vec<f64> = confusions.iter().map(Confusion::accuracy).collect();
    let sens: Vec<f64> = confusions.iter().filter_map(Confusion::sensitivity).collect();
    let spec: Vec<f64> = confusions.iter().filter_map(Confusion::specificity).collect();
    for (missing, n, what) in [
        ("Professional", confusions.len() - sens.len(), "sensitivity"),
        ("Amateur", confusions.len() - spec.len(), "specificity"),
    ] {
        if n > 0 {
            log::warn!("{n} of {} folds have no {missing} samples; left out of the {what} mean", confusions.len());
        }
    }
    Ok(Metrics {
        accuracy: MeanStd::of(&acc),
        sensitivity: MeanStd::of(&sens),
        specificity: MeanStd::of(&spec),
        confusions: confusions.to_vec(),
    })
}
