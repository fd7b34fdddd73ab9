use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-10;
const MAX_REFINE: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// Unit eigenvectors, largest-magnitude entry positive.
    pub components: [Vec<f64>; 2],
    pub eigenvalues: [f64; 2],
    /// Centred scores of every input sample.
    pub raw_scores: Vec<[f64; 2]>,
    /// Indices of the samples kept after the 3-sigma outlier cut.
    pub kept: Vec<usize>,
    /// Min-max normalized scores of the kept samples.
    pub scores: Vec<[f64; 2]>,
    pub rank_deficient: bool,
}

fn mat_vec(m: &[f64], p: usize, v: &[f64]) -> Vec<f64> {
    (0..p).map(|i| (0..p).map(|j| m[i * p + j] * v[j]).sum()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Leading eigenpair of a symmetric positive semidefinite matrix. Repeated
/// squaring gets close to the dominant direction quickly, plain power steps
/// then polish until `||Mv - lambda v|| <= tol * ||M||_F`.
fn leading_eigenpair(m: &[f64], p: usize) -> (f64, Vec<f64>) {
    let frob = norm(m);
    if frob == 0.0 {
        return (0.0, (0..p).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect());
    }
    let mut power: Vec<f64> = m.iter().map(|x| x / frob).collect();
    for _ in 0..40 {
        let mut sq = vec![0.0; p * p];
        for i in 0..p {
            for k in 0..p {
                let a = power[i * p + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..p {
                    sq[i * p + j] += a * power[k * p + j];
                }
            }
        }
        let n = norm(&sq);
        if n == 0.0 || !n.is_finite() {
            break;
        }
        power = sq.into_iter().map(|x| x / n).collect();
    }
    let best_col = (0..p)
        .max_by(|&a, &b| {
            let ca: f64 = (0..p).map(|i| power[i * p + a].powi(2)).sum();
            let cb: f64 = (0..p).map(|i| power[i * p + b].powi(2)).sum();
            ca.total_cmp(&cb).then(b.cmp(&a))
        })
        .unwrap_or(0);
    let mut v: Vec<f64> = (0..p).map(|i| power[i * p + best_col]).collect();
    let n = norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    } else {
        v = (0..p).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
    }
    let mut lambda = 0.0;
    for step in 0..MAX_REFINE {
        let mv = mat_vec(m, p, &v);
        lambda = v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>();
        let residual = norm(&mv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect::<Vec<_>>());
        if residual <= RESIDUAL_TOL * frob {
            break;
        }
        let n = norm(&mv);
        if n == 0.0 {
            break;
        }
        v = mv.into_iter().map(|x| x / n).collect();
        if step + 1 == MAX_REFINE {
            log::warn!("power iteration stopped at residual {residual:e}");
        }
    }
    (lambda, v)
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Two-component PCA of the rows, with a 3-sigma outlier cut and min-max
/// normalization of the surviving scores.
pub fn pca_project(rows: &[&[f64]]) -> Result<PcaProjection> {
    let n = rows.len();
    if n < 3 {
        return Err(Error::invalid("samples", format!("PCA needs at least 3 samples, got {n}")));
    }
    let p = rows[0].len();
    if p < 2 {
        return Err(Error::invalid("features", "PCA needs at least 2 features"));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::LengthMismatch {
            expected: p,
            actual: r.len(),
        });
    }
    let mean: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centred: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut cov = vec![0.0; p * p];
    for r in &centred {
        for i in 0..p {
            for j in i..p {
                cov[i * p + j] += r[i] * r[j];
            }
        }
    }
    for i in 0..p {
        for j in i..p {
            let v = cov[i * p + j] / (n - 1) as f64;
            cov[i * p + j] = v;
            cov[j * p + i] = v;
        }
    }

    let (l1, mut v1) = leading_eigenpair(&cov, p);
    if l1 <= 0.0 {
        return Err(Error::DegenerateSeries("PCA input has zero variance".into()));
    }
    fix_sign(&mut v1);
    let mut deflated = cov.clone();
    for i in 0..p {
        for j in 0..p {
            deflated[i * p + j] -= l1 * v1[i] * v1[j];
        }
    }
    let (mut l2, mut v2) = leading_eigenpair(&deflated, p);
    let rank_deficient = l2 <= 1e-12 * l1;
    if rank_deficient {
        log::warn!("covariance has rank 1; second principal component set to zero");
        l2 = 0.0;
        v2 = vec![0.0; p];
    } else {
        fix_sign(&mut v2);
    }

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let raw_scores: Vec<[f64; 2]> = centred.iter().map(|r| [dot(r, &v1), dot(r, &v2)]).collect();
    let sd = [0, 1].map(|c| sample_std(&raw_scores.iter().map(|s| s[c]).collect::<Vec<_>>()));
    let kept: Vec<usize> = (0..n)
        .filter(|&i| (0..2).all(|c| sd[c] == 0.0 || raw_scores[i][c].abs() <= 3.0 * sd[c]))
        .collect();
    let mut scores: Vec<[f64; 2]> = kept.iter().map(|&i| raw_scores[i]).collect();
    for c in 0..2 {
        let lo = scores.iter().map(|s| s[c]).fold(f64::INFINITY, f64::min);
        let hi = scores.iter().map(|s| s[c]).fold(f64::NEG_INFINITY, f64::max);
        for s in &mut scores {
            s[c] = if hi > lo { (s[c] - lo) / (hi - lo) } else { 0.0 };
        }
    }
    Ok(PcaProjection {
        components: [v1, v2],
        eigenvalues: [l1, l2],
        raw_scores,
        kept,
        scores,
        rank_deficient,
    })
}

impl PcaProjection {
    pub fn write_csv<W: Write>(&self, dataset: &Dataset, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::parse("<pca>", e);
        w.write_record(["player_id", "match_id", "subseq", "label", "pc1", "pc2"])
            .map_err(io)?;
        for (&i, s) in self.kept.iter().zip(&self.scores) {
            let sample = &dataset.samples[i];
            w.write_record([
                sample.provenance.player_id.clone(),
                sample.provenance.match_id.clone(),
                sample.provenance.subsequence.to_string(),
                sample.label.to_string(),
                s[0].to_string(),
                s[1].to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<pca>", e))
    }
}
