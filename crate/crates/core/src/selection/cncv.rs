use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mrmr::{mrmr_rank, mrmr_rank_among};
use crate::error::{Error, Result};
use crate::evaluate::folds::{stratified_assignment, FoldAssignment};
use crate::seed;
use crate::sensor::Label;

/// Which samples of an inner fold split the mRMR ranking is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InnerFoldData {
    /// The held-out inner fold itself.
    #[default]
    Fold,
    /// All inner folds except the held-out one.
    Complement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CnCvParams {
    /// Outer folds `K_train`.
    pub k_train: usize,
    /// Inner folds `L`.
    pub inner_folds: usize,
    /// Features kept per inner ranking and per outer selection.
    pub n_inner: usize,
    /// Size of the final consensus set.
    pub n_consensus: usize,
    pub inner_data: InnerFoldData,
    pub seed: u64,
}

impl Default for CnCvParams {
    fn default() -> Self {
        CnCvParams {
            k_train: 5,
            inner_folds: 5,
            n_inner: 20,
            n_consensus: 8,
            inner_data: InnerFoldData::Fold,
            seed: 0,
        }
    }
}

impl CnCvParams {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.k_train < 2 {
            return Err(Error::invalid("k_train", "must be at least 2"));
        }
        if self.inner_folds < 2 {
            return Err(Error::invalid("inner_folds", "must be at least 2"));
        }
        if self.n_consensus == 0 {
            return Err(Error::invalid("n_consensus", "must be positive"));
        }
        if self.n_consensus > self.n_inner {
            return Err(Error::invalid("n_consensus", "must not exceed n_inner"));
        }
        if self.n_inner > n_features {
            return Err(Error::invalid(
                "n_inner",
                format!("{} exceeds the {n_features} available features", self.n_inner),
            ));
        }
        Ok(())
    }
}

/// Seeds for the selection run inside outer evaluation fold `fold`.
/// Evaluation and distinguishing-feature ranking both use this so they see
/// the same per-fold selections.
pub fn fold_cncv_params(params: &CnCvParams, fold: usize) -> CnCvParams {
    CnCvParams {
        seed: seed::derive(params.seed, &[0xF01D, fold as u64]),
        ..params.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterSelection {
    /// Ordered by frequency across inner rankings, then mean rank.
    pub features: Vec<usize>,
    pub inner_rankings: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub outer: Vec<OuterSelection>,
    /// Final set, ordered by frequency across outer selections, then mean rank.
    pub consensus: Vec<usize>,
    /// How many outer selections each feature appears in.
    pub frequencies: Vec<usize>,
}

impl ConsensusResult {
    pub fn outer_selections(&self) -> Vec<Vec<usize>> {
        self.outer.iter().map(|o| o.features.clone()).collect()
    }
}

struct Tally {
    count: Vec<usize>,
    rank_sum: Vec<usize>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Tally {
            count: vec![0; n],
            rank_sum: vec![0; n],
        }
    }

    fn add(&mut self, ordered: &[usize]) {
        for (pos, &f) in ordered.iter().enumerate() {
            self.count[f] += 1;
            self.rank_sum[f] += pos;
        }
    }

    /// Frequency descending, then mean rank ascending (unseen features rank
    /// last), then index ascending. Mean ranks are compared as exact
    /// fractions.
    fn cmp(&self, a: usize, b: usize) -> Ordering {
        let (ca, cb) = (self.count[a], self.count[b]);
        cb.cmp(&ca)
            .then_with(|| match (ca, cb) {
                (0, 0) => Ordering::Equal,
                _ => (self.rank_sum[a] * cb).cmp(&(self.rank_sum[b] * ca)),
            })
            .then(a.cmp(&b))
    }

    fn top(&self, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.count.len()).collect();
        order.sort_by(|&a, &b| self.cmp(a, b));
        order.truncate(n);
        order
    }
}

fn has_both_classes(labels: &[Label], idx: &[usize]) -> bool {
    let pro = idx.iter().filter(|&&i| labels[i].is_positive()).count();
    pro > 0 && pro < idx.len()
}

/// Consensus nested cross-validation feature selection (classifier-free).
pub fn cncv_select(rows: &[&[f64]], labels: &[Label], params: &CnCvParams) -> Result<ConsensusResult> {
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("cncv_select: no samples"));
    }
    let n_features = rows[0].len();
    params.validate(n_features)?;

    let outer_fold = stratified_assignment(labels, params.k_train, &mut seed::rng_for(params.seed, &[1]));
    let outer: Vec<OuterSelection> = (0..params.k_train)
        .into_par_iter()
        .map(|i| {
            let train: Vec<usize> = (0..rows.len()).filter(|&s| outer_fold[s] != i).collect();
            let train_labels: Vec<Label> = train.iter().map(|&s| labels[s]).collect();
            let inner_fold = stratified_assignment(
                &train_labels,
                params.inner_folds,
                &mut seed::rng_for(params.seed, &[2, i as u64]),
            );
            let mut tally = Tally::new(n_features);
            let mut inner_rankings = Vec::with_capacity(params.inner_folds);
            for l in 0..params.inner_folds {
                let pick: Vec<usize> = (0..train.len())
                    .filter(|&p| match params.inner_data {
                        InnerFoldData::Fold => inner_fold[p] == l,
                        InnerFoldData::Complement => inner_fold[p] != l,
                    })
                    .map(|p| train[p])
                    .collect();
                if pick.len() < 2 || !has_both_classes(labels, &pick) {
                    return Err(Error::FoldTooSmall(format!(
                        "inner fold {l} of outer fold {i} has {} samples without both classes",
                        pick.len()
                    )));
                }
                let sub_rows: Vec<&[f64]> = pick.iter().map(|&s| rows[s]).collect();
                let sub_labels: Vec<Label> = pick.iter().map(|&s| labels[s]).collect();
                let ranking = mrmr_rank(&sub_rows, &sub_labels, params.n_inner)?.indices();
                tally.add(&ranking);
                inner_rankings.push(ranking);
            }
            Ok(OuterSelection {
                features: tally.top(params.n_inner),
                inner_rankings,
            })
        })
        .collect::<Result<_>>()?;

    let mut tally = Tally::new(n_features);
    for o in &outer {
        tally.add(&o.features);
    }
    Ok(ConsensusResult {
        consensus: tally.top(params.n_consensus),
        frequencies: tally.count,
        outer,
    })
}

/// Features present in every set. Empty when `sets` is empty.
pub fn consensus_intersection(sets: &[BTreeSet<usize>]) -> BTreeSet<usize> {
    let Some((first, rest)) = sets.split_first() else {
        return BTreeSet::new();
    };
    rest.iter()
        .fold(first.clone(), |acc, s| acc.intersection(s).copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// One consensus run on all samples.
    WholeDataset,
    /// Intersection of the consensus sets of the evaluation folds.
    CvIntersection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeatureReport {
    pub index: usize,
    pub score: f64,
    pub frequency: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishingFeatures {
    pub mode: SelectionMode,
    pub ranking: Vec<RankedFeatureReport>,
    /// One consensus set per selection run.
    pub sets: Vec<Vec<usize>>,
    /// True when the per-fold sets did not intersect and the ranking falls
    /// back to the most frequent features.
    pub fallback: bool,
}

pub fn rank_distinguishing_features(
    rows: &[&[f64]],
    labels: &[Label],
    mode: SelectionMode,
    params: &CnCvParams,
    folds: Option<&FoldAssignment>,
) -> Result<DistinguishingFeatures> {
    let n_features = rows.first().map_or(0, |r| r.len());
    let (candidates, frequency, sets, fallback) = match mode {
        SelectionMode::WholeDataset => {
            let result = cncv_select(rows, labels, params)?;
            let sets = vec![result.consensus.clone()];
            (result.consensus, result.frequencies, sets, false)
        }
        SelectionMode::CvIntersection => {
            let folds = folds.ok_or_else(|| Error::invalid("folds", "cv_intersection mode needs fold assignments"))?;
            if folds.n_samples() != rows.len() {
                return Err(Error::LengthMismatch {
                    expected: rows.len(),
                    actual: folds.n_samples(),
                });
            }
            let sets: Vec<Vec<usize>> = (0..folds.n_folds())
                .into_par_iter()
                .map(|j| {
                    let train = folds.train_indices(j);
                    let r: Vec<&[f64]> = train.iter().map(|&i| rows[i]).collect();
                    let l: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
                    Ok(cncv_select(&r, &l, &fold_cncv_params(params, j))?.consensus)
                })
                .collect::<Result<_>>()?;
            let mut tally = Tally::new(n_features);
            for s in &sets {
                tally.add(s);
            }
            let as_sets: Vec<BTreeSet<usize>> = sets.iter().map(|s| s.iter().copied().collect()).collect();
            let common = consensus_intersection(&as_sets);
            let (candidates, fallback) = if common.is_empty() {
                log::warn!("per-fold consensus sets share no feature; ranking the most frequent ones instead");
                let top = tally.top(params.n_consensus);
                (top.into_iter().filter(|&f| tally.count[f] > 0).collect(), true)
            } else {
                (common.into_iter().collect(), false)
            };
            (candidates, tally.count, sets, fallback)
        }
    };
    let ranking = mrmr_rank_among(rows, labels, &candidates, candidates.len())?;
    Ok(DistinguishingFeatures {
        mode,
        ranking: ranking
            .entries
            .into_iter()
            .map(|e| RankedFeatureReport {
                index: e.index,
                score: e.score,
                frequency: frequency[e.index],
            })
            .collect(),
        sets,
        fallback,
    })
}
