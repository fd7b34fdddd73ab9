use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::sensor::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    /// Features tried per split; `None` means `floor(sqrt(p))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            max_features: None,
            min_samples_split: 2,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("classifier.rf.n_trees", "must be positive"));
        }
        if self.max_features == Some(0) {
            return Err(Error::invalid("classifier.rf.max_features", "must be positive"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::invalid("classifier.rf.min_samples_split", "must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf {
        label: Label,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, z: &[f64]) -> Label {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if z[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    /// Fraction of training rows left out of each tree's bootstrap sample.
    pub oob_fractions: Vec<f64>,
}

fn majority(pro: usize, total: usize) -> Label {
    if 2 * pro >= total {
        Label::Professional
    } else {
        Label::Amateur
    }
}

fn gini(pro: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pro as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [Label],
    max_features: usize,
    max_depth: Option<usize>,
    min_split: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn best_split_on(&self, idx: &[usize], feature: usize, total_pro: usize) -> Option<BestSplit> {
        let mut sorted: Vec<(f64, bool)> = idx
            .iter()
            .map(|&i| (self.rows[i][feature], self.labels[i].is_positive()))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = sorted.len();
        let mut left_pro = 0;
        let mut best: Option<BestSplit> = None;
        for cut in 1..n {
            left_pro += sorted[cut - 1].1 as usize;
            let (lo, hi) = (sorted[cut - 1].0, sorted[cut].0);
            if lo == hi {
                continue;
            }
            let right_pro = total_pro - left_pro;
            let impurity = cut as f64 * gini(left_pro, cut) + (n - cut) as f64 * gini(right_pro, n - cut);
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(BestSplit {
                    impurity,
                    feature,
                    threshold,
                });
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut seed::Rng) -> usize {
        let pro = idx.iter().filter(|&&i| self.labels[i].is_positive()).count();
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            label: majority(pro, idx.len()),
        });
        let pure = pro == 0 || pro == idx.len();
        if pure || idx.len() < self.min_split || self.max_depth.is_some_and(|d| depth >= d) {
            return at;
        }
        let width = self.rows[0].len();
        let mut features: Vec<usize> = (0..width).collect();
        features.shuffle(rng);
        // Like the usual CART forests, keep drawing features past the quota
        // until some split is valid.
        let mut best: Option<BestSplit> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.max_features && best.is_some() {
                break;
            }
            if let Some(s) = self.best_split_on(&idx, f, pro) {
                if best.as_ref().is_none_or(|b| s.impurity < b.impurity) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else {
            return at;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.rows[i][split.feature] <= split.threshold);
        let l = self.grow(left, depth + 1, rng);
        let r = self.grow(right, depth + 1, rng);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        at
    }
}

impl Forest {
    pub fn fit(rows: &[Vec<f64>], labels: &[Label], params: &ForestParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let n = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        let max_features = params
            .max_features
            .unwrap_or_else(|| (width as f64).sqrt().floor() as usize)
            .clamp(1, width.max(1));
        let mut trees = Vec::with_capacity(params.n_trees);
        let mut oob_fractions = Vec::with_capacity(params.n_trees);
        for t in 0..params.n_trees {
            let mut rng = seed::rng_for(seed, &[t as u64]);
            let mut drawn = vec![false; n];
            let sample: Vec<usize> = (0..n)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    drawn[i] = true;
                    i
                })
                .collect();
            oob_fractions.push(drawn.iter().filter(|&&d| !d).count() as f64 / n as f64);
            let mut builder = Builder {
                rows,
                labels,
                max_features,
                max_depth: params.max_depth,
                min_split: params.min_samples_split,
                nodes: Vec::new(),
            };
            builder.grow(sample, 0, &mut rng);
            trees.push(DecisionTree { nodes: builder.nodes });
        }
        Ok(Forest { trees, oob_fractions })
    }

    pub fn predict(&self, z: &[f64]) -> Label {
        let pro = self.trees.iter().filter(|t| t.predict(z).is_positive()).count();
        majority(pro, self.trees.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tree_fits_xor() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let labels = [Label::Amateur, Label::Professional, Label::Professional, Label::Amateur];
        let mut builder = Builder {
            rows: &rows,
            labels: &labels,
            max_features: 2,
            max_depth: None,
            min_split: 2,
            nodes: Vec::new(),
        };
        builder.grow(vec![0, 1, 2, 3], 0, &mut seed::rng(0));
        let tree = DecisionTree { nodes: builder.nodes };
        for (r, l) in rows.iter().zip(labels) {
            assert_eq!(tree.predict(r), l);
        }
    }

    #[test]
    fn max_depth_respected() {
        let rows: Vec<Vec<f64>> = (0..32).map(|i| vec![i as f64]).collect();
        let labels: Vec<Label> = (0..32)
            .map(|i| if i % 2 == 0 { Label::Professional } else { Label::Amateur })
            .collect();
        let params = ForestParams {
            n_trees: 3,
            max_depth: Some(2),
            ..ForestParams::default()
        };
        let f = Forest::fit(&rows, &labels, &params, 0).unwrap();
        assert!(f.trees.iter().all(|t| t.depth() <= 2));
    }

    #[test]
    fn oob_fraction_near_inverse_e() {
        let rows: Vec<Vec<f64>> = (0..1000).map(|i| vec![(i % 7) as f64]).collect();
        let labels: Vec<Label> = (0..1000)
            .map(|i| if i % 2 == 0 { Label::Professional } else { Label::Amateur })
            .collect();
        let params = ForestParams {
            n_trees: 5,
            max_depth: Some(1),
            ..ForestParams::default()
        };
        for seed in 0..5 {
            let f = Forest::fit(&rows, &labels, &params, seed).unwrap();
            for &frac in &f.oob_fractions {
                assert!((frac - (-1.0f64).exp()).abs() < 0.05, "{frac}");
            }
        }
    }

    #[test]
    fn unanimous_trees_decide() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let labels = [Label::Amateur, Label::Amateur, Label::Professional, Label::Professional];
        let f = Forest::fit(&rows, &labels, &ForestParams::default(), 3).unwrap();
        assert_eq!(f.predict(&[10.0]), Label::Professional);
        assert_eq!(f.predict(&[-10.0]), Label::Amateur);
    }
}
