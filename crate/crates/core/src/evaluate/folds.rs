use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;
use crate::sensor::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldScheme {
    /// Class-stratified random folds over samples.
    Stratified,
    /// Every player's samples land in a single fold; players are shuffled
    /// and dealt round-robin into `k` folds.
    PlayerGrouped,
    /// One fold per player, `k` is ignored.
    LeaveOneSubjectOut,
}

impl fmt::Display for FoldScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FoldScheme::Stratified => "stratified",
            FoldScheme::PlayerGrouped => "player_grouped",
            FoldScheme::LeaveOneSubjectOut => "loso",
        })
    }
}

impl FromStr for FoldScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "stratified" => Ok(FoldScheme::Stratified),
            "player_grouped" | "player" | "grouped" => Ok(FoldScheme::PlayerGrouped),
            "loso" | "leave_one_subject_out" => Ok(FoldScheme::LeaveOneSubjectOut),
            _ => Err(Error::invalid("fold_scheme", format!("unknown scheme {s:?}"))),
        }
    }
}

/// Fold id per sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub scheme: FoldScheme,
    pub k: usize,
    pub fold_of: Vec<usize>,
    /// For subject-wise schemes, the players held out in each fold.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub held_out_players: Vec<Vec<String>>,
}

impl FoldAssignment {
    pub fn n_folds(&self) -> usize {
        self.k
    }

    pub fn n_samples(&self) -> usize {
        self.fold_of.len()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

/// Shuffles each class separately, concatenates (amateurs first) and deals
/// positions round-robin, so every fold gets `floor` or `ceil` of each
/// class's share.
pub fn stratified_assignment(labels: &[Label], k: usize, rng: &mut seed::Rng) -> Vec<usize> {
    let mut amateur: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].is_positive()).collect();
    let mut pro: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_positive()).collect();
    amateur.shuffle(rng);
    pro.shuffle(rng);
    let mut fold_of = vec![0; labels.len()];
    for (pos, &i) in amateur.iter().chain(pro.iter()).enumerate() {
        fold_of[i] = pos % k;
    }
    fold_of
}

/// Stratified hold-out: `round(fraction * n_c)` samples of each class go to
/// validation, at least one when the class has two or more samples.
pub fn stratified_holdout(labels: &[Label], fraction: f64, rng: &mut seed::Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("fraction", "must lie in (0, 1)"));
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [Label::Amateur, Label::Professional] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        let mut n_val = (fraction * idx.len() as f64).round() as usize;
        if n_val == 0 && idx.len() >= 2 {
            n_val = 1;
        }
        n_val = n_val.min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    if val.is_empty() || train.is_empty() {
        return Err(Error::FoldTooSmall(format!(
            "hold-out split of {} samples left an empty side",
            labels.len()
        )));
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

pub fn make_folds(dataset: &Dataset, k: usize, scheme: FoldScheme, seed: u64) -> Result<FoldAssignment> {
    let n = dataset.len();
    let mut rng = seed::rng(seed);
    match scheme {
        FoldScheme::Stratified => {
            if k < 2 || k > n {
                return Err(Error::InvalidFolds(format!("k = {k} with {n} samples")));
            }
            Ok(FoldAssignment {
                scheme,
                k,
                fold_of: stratified_assignment(&dataset.labels(), k, &mut rng),
                held_out_players: Vec::new(),
            })
        }
        FoldScheme::PlayerGrouped | FoldScheme::LeaveOneSubjectOut => {
            let mut players: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, s) in dataset.samples.iter().enumerate() {
                players.entry(s.provenance.player_id.as_str()).or_default().push(i);
            }
            let mut order: Vec<&str> = players.keys().copied().collect();
            let k = if scheme == FoldScheme::LeaveOneSubjectOut {
                order.len()
            } else {
                order.shuffle(&mut rng);
                k
            };
            if k < 2 || k > order.len() {
                return Err(Error::InvalidFolds(format!(
                    "{k} folds over {} players",
                    order.len()
                )));
            }
            let mut fold_of = vec![0; n];
            let mut held_out_players = vec![Vec::new(); k];
            for (pos, player) in order.iter().enumerate() {
                let fold = pos % k;
                held_out_players[fold].push(player.to_string());
                for &i in &players[player] {
                    fold_of[i] = fold;
                }
            }
            for p in &mut held_out_players {
                p.sort();
            }
            Ok(FoldAssignment {
                scheme,
                k,
                fold_of,
                held_out_players,
            })
        }
    }
}
