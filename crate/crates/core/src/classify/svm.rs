use serde::{Deserialize, Serialize};

use super::squared_distance;
use crate::error::{Error, Result};
use crate::sensor::Label;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmParams {
    pub c: f64,
    /// `None` means `1 / (p * mean column variance)` of the training data.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    pub max_iter: Option<usize>,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            tolerance: 1e-3,
            max_iter: None,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid("classifier.svm.c", "must be positive and finite"));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::invalid("classifier.svm.gamma", "must be positive and finite"));
            }
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::invalid("classifier.svm.tolerance", "must be positive"));
        }
        Ok(())
    }
}

/// RBF soft-margin machine; `decision(x) = sum coef_i K(sv_i, x) - rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub rho: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i`.
    pub coef: Vec<f64>,
    pub iterations: usize,
}

fn default_gamma(rows: &[Vec<f64>]) -> f64 {
    let p = rows[0].len();
    let n = rows.len() as f64;
    let mut total_var = 0.0;
    for f in 0..p {
        let mean = rows.iter().map(|r| r[f]).sum::<f64>() / n;
        total_var += rows.iter().map(|r| (r[f] - mean) * (r[f] - mean)).sum::<f64>() / n;
    }
    let mean_var = total_var / p as f64;
    if mean_var > 0.0 {
        1.0 / (p as f64 * mean_var)
    } else {
        1.0 / p as f64
    }
}

impl SvmModel {
    /// Dual coordinate descent on pairs of multipliers with second-order
    /// working-set selection, stopping when the maximal KKT violation drops
    /// below `tolerance`.
    pub fn fit(rows: &[Vec<f64>], labels: &[Label], params: &SvmParams) -> Result<Self> {
        params.validate()?;
        let n = rows.len();
        let c = params.c;
        let gamma = params.gamma.unwrap_or_else(|| default_gamma(rows));
        let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = (-gamma * squared_distance(&rows[i], &rows[j])).exp();
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        let kij = |i: usize, j: usize| k[i * n + j];

        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let max_iter = params.max_iter.unwrap_or((100 * n).max(10_000_000));
        let mut iterations = 0;
        let in_up = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] < c) || (y[t] < 0.0 && a[t] > 0.0);
        let in_low = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < c);

        while iterations < max_iter {
            let mut g_max = f64::NEG_INFINITY;
            let mut i_sel = None;
            for t in 0..n {
                if in_up(t, &alpha) {
                    let v = -y[t] * grad[t];
                    if v > g_max {
                        g_max = v;
                        i_sel = Some(t);
                    }
                }
            }
            let Some(i) = i_sel else { break };
            let mut g_max2 = f64::NEG_INFINITY;
            let mut j_sel = None;
            let mut obj_min = f64::INFINITY;
            for t in 0..n {
                if !in_low(t, &alpha) {
                    continue;
                }
                let yg = y[t] * grad[t];
                g_max2 = g_max2.max(yg);
                let b = g_max + yg;
                if b > 0.0 {
                    let mut a = kij(i, i) + kij(t, t) - 2.0 * kij(i, t);
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
            let Some(j) = j_sel else { break };
            if g_max + g_max2 < params.tolerance {
                break;
            }
            iterations += 1;

            let (old_i, old_j) = (alpha[i], alpha[j]);
            let qij = y[i] * y[j] * kij(i, j);
            if y[i] != y[j] {
                let mut quad = kij(i, i) + kij(j, j) + 2.0 * qij;
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let mut quad = kij(i, i) + kij(j, j) - 2.0 * qij;
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for t in 0..n {
                grad[t] += y[t] * (y[i] * kij(i, t) * di + y[j] * kij(j, t) * dj);
            }
        }
        if iterations >= max_iter {
            log::warn!("SVM optimizer stopped after {iterations} iterations without reaching tolerance");
        }

        let rho = {
            let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
            let (mut free, mut free_sum) = (0usize, 0.0);
            for t in 0..n {
                let yg = y[t] * grad[t];
                if alpha[t] >= c {
                    if y[t] < 0.0 {
                        ub = ub.min(yg);
                    } else {
                        lb = lb.max(yg);
                    }
                } else if alpha[t] <= 0.0 {
                    if y[t] > 0.0 {
                        ub = ub.min(yg);
                    } else {
                        lb = lb.max(yg);
                    }
                } else {
                    free += 1;
                    free_sum += yg;
                }
            }
            if free > 0 {
                free_sum / free as f64
            } else {
                (ub + lb) / 2.0
            }
        };

        let mut support_vectors = Vec::new();
        let mut coef = Vec::new();
        for t in 0..n {
            if alpha[t] > 0.0 {
                support_vectors.push(rows[t].clone());
                coef.push(alpha[t] * y[t]);
            }
        }
        Ok(SvmModel {
            gamma,
            rho,
            support_vectors,
            coef,
            iterations,
        })
    }

    pub fn decision(&self, z: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * (-self.gamma * squared_distance(sv, z)).exp())
            .sum::<f64>()
            - self.rho
    }

    /// Decision value `>= 0` is Professional.
    pub fn predict(&self, z: &[f64]) -> Label {
        if self.decision(z) >= 0.0 {
            Label::Professional
        } else {
            Label::Amateur
        }
    }
}
