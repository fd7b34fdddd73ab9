use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{stratified_holdout, FoldAssignment};
use super::streams;
use crate::classify::{self, ClassifierKind, Hyperparams, Predictor};
use crate::dataset::{Dataset, Provenance};
use crate::error::{Error, Result};
use crate::seed;
use crate::selection::{cncv_select, CnCvParams};
use crate::sensor::Label;
use crate::windowing::balance_classes;

pub const TD_RANGE: std::ops::RangeInclusive<u32> = 1..=10;

/// Recomputes the feature dataset for a given half-window `t_d`.
pub trait FeatureSource: Sync {
    fn features(&self, td: u32) -> Result<Dataset>;
}

impl<F> FeatureSource for F
where
    F: Fn(u32) -> Result<Dataset> + Sync,
{
    fn features(&self, td: u32) -> Result<Dataset> {
        self(td)
    }
}

/// Feature datasets for several `t_d` values restricted to a common set of
/// samples in a common order, so one fold assignment applies to all.
#[derive(Debug, Clone, PartialEq)]
pub struct TdDatasets {
    pub td_values: Vec<u32>,
    pub datasets: Vec<Dataset>,
    /// Requested values whose windows are too short for the symbolisation.
    pub skipped: Vec<u32>,
}

impl TdDatasets {
    /// A sample survives if its provenance exists for every `t_d` (wider
    /// windows drop events near the recording edges). With `balance_seed`
    /// the common set is then class-balanced. A `t_d` whose segments are too
    /// short to hold one ordinal pattern is skipped with a warning.
    pub fn build(source: &dyn FeatureSource, td_values: &[u32], balance_seed: Option<u64>) -> Result<Self> {
        if td_values.is_empty() {
            return Err(Error::EmptyInput("no t_d values"));
        }
        let built: Vec<Result<Dataset>> = td_values
            .par_iter()
            .map(|&td| source.features(td).map_err(|e| e.context(format!("t_d = {td}"))))
            .collect();
        let mut kept = Vec::new();
        let mut datasets = Vec::new();
        let mut skipped = Vec::new();
        let mut first_short = None;
        for (&td, r) in td_values.iter().zip(built) {
            match r {
                Ok(ds) => {
                    kept.push(td);
                    datasets.push(ds);
                }
                Err(e) if e.kind() == "block_too_short" => {
                    log::warn!("skipping {e}");
                    skipped.push(td);
                    first_short.get_or_insert(e);
                }
                Err(e) => return Err(e),
            }
        }
        if let Some(e) = first_short.filter(|_| datasets.is_empty()) {
            return Err(e);
        }
        let td_values = kept;
        let mut common: Vec<Provenance> = datasets[0].samples.iter().map(|s| s.provenance.clone()).collect();
        for ds in &datasets[1..] {
            let present: BTreeSet<&Provenance> = ds.samples.iter().map(|s| &s.provenance).collect();
            common.retain(|p| present.contains(p));
        }
        common.sort();
        let dropped = datasets.iter().map(Dataset::len).max().unwrap_or(0) - common.len();
        if dropped > 0 {
            log::info!("{dropped} samples are not available for every t_d and were left out");
        }
        let mut datasets: Vec<Dataset> = datasets
            .iter()
            .map(|ds| ds.restrict_to(&common))
            .collect::<Result<_>>()?;
        for ds in &datasets[1..] {
            if ds.labels() != datasets[0].labels() {
                return Err(Error::invalid("labels", "sample labels differ between t_d values"));
            }
        }
        if let Some(seed) = balance_seed {
            let keep: Vec<Provenance> = balance_classes(&datasets[0].samples, seed)?
                .into_iter()
                .map(|s| s.provenance)
                .collect();
            datasets = datasets
                .iter()
                .map(|ds| ds.restrict_to(&keep))
                .collect::<Result<_>>()?;
        }
        Ok(TdDatasets {
            td_values,
            datasets,
            skipped,
        })
    }

    pub fn get(&self, td: u32) -> Option<&Dataset> {
        self.td_values.iter().position(|&t| t == td).map(|i| &self.datasets[i])
    }

    pub fn samples(&self) -> &Dataset {
        &self.datasets[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdTuningResult {
    pub td_values: Vec<u32>,
    pub per_fold_best: Vec<u32>,
    pub averaged_td: u32,
    /// `accuracies[t][fold]` is the validation accuracy at `td_values[t]`.
    pub accuracies: Vec<Vec<f64>>,
}

/// Round-half-up mean of the per-fold bests, computed exactly.
pub fn average_td(bests: &[u32]) -> Result<u32> {
    if bests.is_empty() {
        return Err(Error::EmptyInput("average_td: no folds"));
    }
    let sum: u64 = bests.iter().map(|&b| b as u64).sum();
    let k = bests.len() as u64;
    Ok(((2 * sum + k) / (2 * k)) as u32)
}

/// Per evaluation fold: split the remaining folds 80/20 (stratified), select
/// features on the 80 %, fit, score on the 20 %, for every `t_d`; keep the
/// best `t_d` per fold (ties to the smaller one) and average.
pub fn tune_td(
    data: &TdDatasets,
    folds: &FoldAssignment,
    kind: ClassifierKind,
    hyper: &Hyperparams,
    cncv: &CnCvParams,
    seed: u64,
) -> Result<TdTuningResult> {
    let labels = data.samples().labels();
    if folds.n_samples() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: folds.n_samples(),
        });
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds.n_folds())
        .map(|j| {
            let remainder = folds.train_indices(j);
            let l: Vec<Label> = remainder.iter().map(|&i| labels[i]).collect();
            let (train, val) = stratified_holdout(&l, 0.2, &mut seed::rng_for(seed, &[streams::HOLDOUT, j as u64]))
                .map_err(|e| e.context(format!("t_d tuning, fold {j}")))?;
            Ok((
                train.into_iter().map(|p| remainder[p]).collect(),
                val.into_iter().map(|p| remainder[p]).collect(),
            ))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..data.td_values.len())
        .flat_map(|t| (0..folds.n_folds()).map(move |j| (t, j)))
        .collect();
    let scores: HashMap<(usize, usize), f64> = jobs
        .par_iter()
        .map(|&(t, j)| {
            let ds = &data.datasets[t];
            let rows = ds.rows();
            let (train, val) = &splits[j];
            let r: Vec<&[f64]> = train.iter().map(|&i| rows[i]).collect();
            let l: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
            let params = CnCvParams {
                seed: seed::derive(cncv.seed, &[streams::TUNE_CNCV, j as u64]),
                ..cncv.clone()
            };
            let context = |e: Error| e.context(format!("t_d = {}, fold {j}", data.td_values[t]));
            let selected = cncv_select(&r, &l, &params).map_err(context)?.consensus;
            let model = classify::fit(
                kind,
                &r,
                &l,
                &selected,
                hyper,
                seed::derive(seed, &[streams::TUNE_MODEL, j as u64]),
            )
            .map_err(context)?;
            let mut correct = 0;
            for &i in val {
                if model.predict(rows[i])? == labels[i] {
                    correct += 1;
                }
            }
            Ok(((t, j), correct as f64 / val.len() as f64))
        })
        .collect::<Result<_>>()?;

    let accuracies: Vec<Vec<f64>> = (0..data.td_values.len())
        .map(|t| (0..folds.n_folds()).map(|j| scores[&(t, j)]).collect())
        .collect();
    let per_fold_best: Vec<u32> = (0..folds.n_folds())
        .map(|j| {
            let mut order: Vec<usize> = (0..data.td_values.len()).collect();
            order.sort_by_key(|&t| data.td_values[t]);
            let mut best = order[0];
            for &t in &order[1..] {
                if accuracies[t][j] > accuracies[best][j] {
                    best = t;
                }
            }
            data.td_values[best]
        })
        .collect();
    Ok(TdTuningResult {
        averaged_td: average_td(&per_fold_best)?,
        td_values: data.td_values.clone(),
        per_fold_best,
        accuracies,
    })
}
