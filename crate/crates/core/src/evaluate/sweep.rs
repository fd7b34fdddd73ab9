use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crossval::{evaluate_with_consensus, fold_consensus};
use super::folds::{make_folds, FoldScheme};
use super::metrics::MeanStd;
use super::streams;
use super::tune::TdDatasets;
use crate::classify::{ClassifierKind, Hyperparams};
use crate::error::{Error, Result};
use crate::seed;
use crate::selection::CnCvParams;
use crate::windowing::EventFilter;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub td: u32,
    pub event_filter: String,
    /// A classifier name, or `mean` for all classifiers' folds pooled.
    pub classifier: String,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::parse("<sweep>", e);
        w.write_record(["td", "event_filter", "classifier", "accuracy_mean", "accuracy_std"])
            .map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.td.to_string(),
                r.event_filter.clone(),
                r.classifier.clone(),
                r.accuracy_mean.to_string(),
                r.accuracy_std.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<sweep>", e))
    }

    pub fn get(&self, td: u32, filter: &str, classifier: &str) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.td == td && r.event_filter == filter && r.classifier == classifier)
    }
}

pub struct SweepSettings<'a> {
    pub classifiers: &'a [ClassifierKind],
    pub hyper: &'a Hyperparams,
    pub cncv: &'a CnCvParams,
    pub k_all: usize,
    pub scheme: FoldScheme,
    pub seed: u64,
}

/// Mean cross-validated accuracy for every `(t_d, filter, classifier)`.
/// Cells that cannot be computed (too few samples, a single class) are
/// reported as `NaN` with a warning.
pub fn td_sweep(inputs: &[(EventFilter, &TdDatasets)], settings: &SweepSettings<'_>) -> Result<SweepTable> {
    let cells: Vec<(usize, usize)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(f, (_, data))| (0..data.td_values.len()).map(move |t| (f, t)))
        .collect();
    let results: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(f, t)| {
            let (filter, data) = &inputs[f];
            let td = data.td_values[t];
            let ds = &data.datasets[t];
            let filter_name = filter.to_string();
            let per_classifier: Result<Vec<Vec<f64>>> = (|| {
                let folds = make_folds(ds, settings.k_all, settings.scheme, seed::derive(settings.seed, &[streams::FOLDS]))?;
                let consensus = fold_consensus(ds, &folds, settings.cncv)?;
                settings
                    .classifiers
                    .iter()
                    .map(|&kind| {
                        evaluate_with_consensus(ds, &folds, &consensus, kind, settings.hyper, settings.seed)
                            .map(|r| r.metrics.fold_accuracies())
                    })
                    .collect()
            })();
            let per_classifier = per_classifier.unwrap_or_else(|e| {
                log::warn!("sweep cell t_d = {td}, {filter_name}: {e}");
                vec![Vec::new(); settings.classifiers.len()]
            });
            let mut rows = Vec::with_capacity(settings.classifiers.len() + 1);
            let mut pooled = Vec::new();
            for (kind, acc) in settings.classifiers.iter().zip(&per_classifier) {
                let s = MeanStd::of(acc);
                pooled.extend_from_slice(acc);
                rows.push(SweepRow {
                    td,
                    event_filter: filter_name.clone(),
                    classifier: kind.to_string(),
                    accuracy_mean: s.mean,
                    accuracy_std: s.std,
                });
            }
            let s = MeanStd::of(&pooled);
            rows.push(SweepRow {
                td,
                event_filter: filter_name,
                classifier: "mean".into(),
                accuracy_mean: s.mean,
                accuracy_std: s.std,
            });
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<SweepRow> = results.into_iter().flatten().collect();
    let filter_pos = |name: &str| inputs.iter().position(|(f, _)| f.to_string() == name);
    rows.sort_by_key(|r| (r.td, filter_pos(&r.event_filter)));
    Ok(SweepTable { rows })
}
