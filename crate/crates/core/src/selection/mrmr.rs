use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::Label;

/// Scores closer than this are treated as tied; the lower feature index wins.
pub const TIE_EPS: f64 = 1e-12;

fn mean_and_population_std(column: &[f64]) -> (f64, f64) {
    let n = column.len() as f64;
    let mean = column.iter().sum::<f64>() / n;
    let var = column.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Three-level discretization: `-1` below `mu - sigma`, `+1` above
/// `mu + sigma`, `0` otherwise. `sigma` is the population standard deviation
/// of the column itself.
pub fn discretize(column: &[f64]) -> Vec<i8> {
    if column.is_empty() {
        return Vec::new();
    }
    let (mean, std) = mean_and_population_std(column);
    column
        .iter()
        .map(|&x| {
            if x < mean - std {
                -1
            } else if x > mean + std {
                1
            } else {
                0
            }
        })
        .collect()
}

fn discretize_codes(column: &[f64]) -> Vec<u8> {
    discretize(column).into_iter().map(|v| (v + 1) as u8).collect()
}

/// Plug-in mutual information of two code vectors with alphabets
/// `0..na` and `0..nb`, in bits.
fn mi_codes(a: &[u8], na: usize, b: &[u8], nb: usize) -> f64 {
    let n = a.len();
    let mut joint = vec![0u32; na * nb];
    let mut ca = vec![0u32; na];
    let mut cb = vec![0u32; nb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x as usize * nb + y as usize] += 1;
        ca[x as usize] += 1;
        cb[y as usize] += 1;
    }
    let total = n as f64;
    let mut mi = 0.0;
    for x in 0..na {
        for y in 0..nb {
            let c = joint[x * nb + y];
            if c == 0 {
                continue;
            }
            let ratio = (c as f64 * total) / (ca[x] as f64 * cb[y] as f64);
            mi += (c as f64 / total) * ratio.log2();
        }
    }
    mi.max(0.0)
}

fn compact_codes(values: &[i32]) -> (Vec<u8>, usize) {
    let mut alphabet: BTreeMap<i32, u8> = BTreeMap::new();
    for &v in values {
        alphabet.entry(v).or_insert(0);
    }
    for (k, code) in alphabet.values_mut().enumerate() {
        *code = k as u8;
    }
    assert!(alphabet.len() <= 256, "alphabet too large for compact codes");
    (values.iter().map(|v| alphabet[v]).collect(), alphabet.len())
}

/// Plug-in mutual information `sum p(a,b) log2(p(a,b) / (p(a) p(b)))` in bits.
pub fn mutual_information(a: &[i32], b: &[i32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("mutual_information: empty input"));
    }
    let (ca, na) = compact_codes(a);
    let (cb, nb) = compact_codes(b);
    Ok(mi_codes(&ca, na, &cb, nb))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub index: usize,
    pub score: f64,
}

/// Features in greedy selection order, not sorted by score.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub entries: Vec<RankedFeature>,
}

impl FeatureRanking {
    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.index).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Discretized view of a sample subset.
pub(crate) struct DiscreteTable {
    columns: Vec<Vec<u8>>,
    labels: Vec<u8>,
}

impl DiscreteTable {
    pub(crate) fn new(rows: &[&[f64]], labels: &[Label], candidates: &[usize]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        let width = rows.first().map_or(0, |r| r.len());
        if let Some(&bad) = candidates.iter().find(|&&c| c >= width) {
            return Err(Error::invalid("features", format!("feature index {bad} >= {width}")));
        }
        let mut column = vec![0.0; rows.len()];
        let columns = candidates
            .iter()
            .map(|&f| {
                for (slot, row) in column.iter_mut().zip(rows) {
                    *slot = row[f];
                }
                discretize_codes(&column)
            })
            .collect();
        Ok(DiscreteTable {
            columns,
            labels: labels.iter().map(|l| l.code()).collect(),
        })
    }
}

fn check_classes(labels: &[Label]) -> Result<()> {
    let pro = labels.iter().filter(|l| l.is_positive()).count();
    if pro == 0 || pro == labels.len() {
        return Err(Error::SingleClass(format!(
            "mRMR needs both classes among {} samples",
            labels.len()
        )));
    }
    Ok(())
}

/// Greedy MID ranking of `k` features out of all columns.
pub fn mrmr_rank(rows: &[&[f64]], labels: &[Label], k: usize) -> Result<FeatureRanking> {
    let width = rows.first().map_or(0, |r| r.len());
    let all: Vec<usize> = (0..width).collect();
    mrmr_rank_among(rows, labels, &all, k)
}

/// Greedy MID ranking restricted to `candidates`; returned indices refer to
/// the original columns.
pub fn mrmr_rank_among(rows: &[&[f64]], labels: &[Label], candidates: &[usize], k: usize) -> Result<FeatureRanking> {
    let mut candidates = candidates.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    if k > candidates.len() {
        return Err(Error::invalid(
            "k",
            format!("asked for {k} features out of {}", candidates.len()),
        ));
    }
    if k == 0 {
        return Ok(FeatureRanking::default());
    }
    check_classes(labels)?;
    let table = DiscreteTable::new(rows, labels, &candidates)?;
    let local = mrmr_on_table(&table, k);
    Ok(FeatureRanking {
        entries: local
            .into_iter()
            .map(|(pos, score)| RankedFeature {
                index: candidates[pos],
                score,
            })
            .collect(),
    })
}

/// Returns `(column position, score)` pairs in selection order.
pub(crate) fn mrmr_on_table(table: &DiscreteTable, k: usize) -> Vec<(usize, f64)> {
    let n_cols = table.columns.len();
    let relevance: Vec<f64> = table
        .columns
        .iter()
        .map(|c| mi_codes(c, 3, &table.labels, 2))
        .collect();
    let mut redundancy = vec![0.0; n_cols];
    let mut picked = vec![false; n_cols];
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(k);

    for step in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for f in 0..n_cols {
            if picked[f] {
                continue;
            }
            let score = if step == 0 {
                relevance[f]
            } else {
                relevance[f] - redundancy[f] / step as f64
            };
            match best {
                Some((_, b)) if score <= b + TIE_EPS => {}
                _ => best = Some((f, score)),
            }
        }
        let (chosen, score) = best.expect("k <= candidate count");
        picked[chosen] = true;
        out.push((chosen, score));
        if step + 1 < k {
            let last = &table.columns[chosen];
            for f in 0..n_cols {
                if !picked[f] {
                    redundancy[f] += mi_codes(&table.columns[f], 3, last, 3);
                }
            }
        }
    }
    out
}
