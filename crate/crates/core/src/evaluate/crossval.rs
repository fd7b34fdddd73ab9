use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::FoldAssignment;
use super::metrics::{compute_metrics, Confusion, Metrics};
use super::streams;
use crate::classify::{self, ClassifierKind, Hyperparams, Predictor, TrainedModel};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;
use crate::selection::{cncv_select, fold_cncv_params, CnCvParams, ConsensusResult};
use crate::sensor::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome<M> {
    pub fold: usize,
    pub test_indices: Vec<usize>,
    pub predictions: Vec<Label>,
    pub confusion: Confusion,
    pub consensus: ConsensusResult,
    pub model: M,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub metrics: Metrics,
    pub folds: Vec<FoldOutcome<TrainedModel>>,
}

fn check_training_split(labels: &[Label], train: &[usize], fold: usize) -> Result<()> {
    let pro = train.iter().filter(|&&i| labels[i].is_positive()).count();
    if pro == 0 || pro == train.len() {
        return Err(Error::SingleClass(format!(
            "training split of fold {fold} has a single class"
        )));
    }
    Ok(())
}

/// Consensus selection on the training part of every fold. Test samples are
/// never passed to the selector.
pub fn fold_consensus(dataset: &Dataset, folds: &FoldAssignment, cncv: &CnCvParams) -> Result<Vec<ConsensusResult>> {
    if folds.n_samples() != dataset.len() {
        return Err(Error::LengthMismatch {
            expected: dataset.len(),
            actual: folds.n_samples(),
        });
    }
    let rows = dataset.rows();
    let labels = dataset.labels();
    (0..folds.n_folds())
        .into_par_iter()
        .map(|j| {
            let train = folds.train_indices(j);
            check_training_split(&labels, &train, j)?;
            let r: Vec<&[f64]> = train.iter().map(|&i| rows[i]).collect();
            let l: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
            cncv_select(&r, &l, &fold_cncv_params(cncv, j)).map_err(|e| e.context(format!("fold {j}")))
        })
        .collect()
}

/// Cross-validation with caller-supplied training. `fit` receives the
/// training rows and labels, the consensus feature indices and the fold
/// number.
pub fn crossval_with<M, F>(
    dataset: &Dataset,
    folds: &FoldAssignment,
    consensus: &[ConsensusResult],
    fit: F,
) -> Result<Vec<FoldOutcome<M>>>
where
    M: Predictor + Send,
    F: Fn(&[&[f64]], &[Label], &[usize], usize) -> Result<M> + Sync,
{
    if consensus.len() != folds.n_folds() {
        return Err(Error::LengthMismatch {
            expected: folds.n_folds(),
            actual: consensus.len(),
        });
    }
    let rows = dataset.rows();
    let labels = dataset.labels();
    (0..folds.n_folds())
        .into_par_iter()
        .map(|j| {
            let train = folds.train_indices(j);
            let test = folds.test_indices(j);
            if test.is_empty() {
                return Err(Error::FoldTooSmall(format!("test fold {j} is empty")));
            }
            check_training_split(&labels, &train, j)?;
            let r: Vec<&[f64]> = train.iter().map(|&i| rows[i]).collect();
            let l: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
            let model = fit(&r, &l, &consensus[j].consensus, j)?;
            let predictions = test
                .iter()
                .map(|&i| model.predict(rows[i]))
                .collect::<Result<Vec<_>>>()?;
            let confusion = Confusion::from_pairs(test.iter().map(|&i| labels[i]).zip(predictions.iter().copied()));
            Ok(FoldOutcome {
                fold: j,
                test_indices: test,
                predictions,
                confusion,
                consensus: consensus[j].clone(),
                model,
            })
        })
        .collect()
}

pub fn model_seed(seed: u64, fold: usize) -> u64 {
    seed::derive(seed, &[streams::MODEL, fold as u64])
}

/// Evaluates `kind` given precomputed per-fold consensus sets.
pub fn evaluate_with_consensus(
    dataset: &Dataset,
    folds: &FoldAssignment,
    consensus: &[ConsensusResult],
    kind: ClassifierKind,
    hyper: &Hyperparams,
    seed: u64,
) -> Result<CvReport> {
    let outcomes = crossval_with(dataset, folds, consensus, |r, l, features, j| {
        classify::fit(kind, r, l, features, hyper, model_seed(seed, j))
    })?;
    let confusions: Vec<Confusion> = outcomes.iter().map(|o| o.confusion).collect();
    Ok(CvReport {
        metrics: compute_metrics(&confusions)?,
        folds: outcomes,
    })
}

/// Per fold: consensus selection on the training folds, fit with the
/// consensus features, predict the held-out fold.
pub fn crossval_evaluate(
    dataset: &Dataset,
    kind: ClassifierKind,
    hyper: &Hyperparams,
    cncv: &CnCvParams,
    folds: &FoldAssignment,
    seed: u64,
) -> Result<CvReport> {
    let consensus = fold_consensus(dataset, folds, cncv)?;
    evaluate_with_consensus(dataset, folds, &consensus, kind, hyper, seed)
}
