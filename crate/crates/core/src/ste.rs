//! Ordinal-pattern symbolization and symbolic transfer entropy.
//!
//! A window of `m` amplitudes taken at spacing `d` maps to the permutation
//! that sorts it (ties resolved by time order). Patterns are stored as their
//! lexicographic rank in `0..m!`. Transfer entropy from `Y` to `X` is the
//! plug-in conditional mutual information
//! `I(X_{i+t}; Y_i | X_i)` over the joint symbol histogram, in bits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::{feature_index, SensorId, N_FEATURES, N_SENSORS};
use crate::windowing::EventGroup;

pub const MAX_EMBEDDING: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteParams {
    /// Embedding dimension `m`.
    pub m: usize,
    /// Time delay `d` between pattern elements.
    pub delay: usize,
    /// Prediction horizon `t`.
    pub horizon: usize,
}

impl Default for SteParams {
    fn default() -> Self {
        SteParams {
            m: 3,
            delay: 1,
            horizon: 1,
        }
    }
}

impl SteParams {
    pub fn new(m: usize, delay: usize, horizon: usize) -> Result<Self> {
        let p = SteParams { m, delay, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_EMBEDDING).contains(&self.m) {
            return Err(Error::invalid("ste.m", format!("{} not in 2..={MAX_EMBEDDING}", self.m)));
        }
        if self.delay == 0 {
            return Err(Error::invalid("ste.delay", "must be >= 1"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("ste.horizon", "must be >= 1"));
        }
        Ok(())
    }

    /// Samples spanned by one pattern: `(m - 1) d + 1`.
    pub fn pattern_span(&self) -> usize {
        (self.m - 1) * self.delay + 1
    }

    /// Shortest block that still yields one `(i, i + t)` pair.
    pub fn min_block_len(&self) -> usize {
        (self.m - 1) * self.delay + self.horizon + 1
    }

    pub fn alphabet_size(&self) -> usize {
        factorial(self.m)
    }

    /// Upper bound `log2(m!)` of any STE value.
    pub fn max_ste(&self) -> f64 {
        (self.alphabet_size() as f64).log2()
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// A permutation `(k_1, ..., k_m)` of `1..=m`: the `k_j`-th window element is
/// the `j`-th smallest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrdinalPattern(Vec<u8>);

impl OrdinalPattern {
    pub fn indices(&self) -> &[u8] {
        &self.0
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    /// Lexicographic rank among all permutations of `1..=m`.
    pub fn code(&self) -> u16 {
        lehmer_rank(&self.0)
    }

    pub fn from_code(m: usize, mut code: u16) -> OrdinalPattern {
        let mut pool: Vec<u8> = (1..=m as u8).collect();
        let mut out = Vec::with_capacity(m);
        for pos in (0..m).rev() {
            let f = factorial(pos) as u16;
            let k = (code / f) as usize;
            code %= f;
            out.push(pool.remove(k));
        }
        OrdinalPattern(out)
    }
}

fn lehmer_rank(perm: &[u8]) -> u16 {
    let m = perm.len();
    let mut rank = 0usize;
    for i in 0..m {
        let smaller_after = perm[i + 1..].iter().filter(|&&v| v < perm[i]).count();
        rank += smaller_after * factorial(m - 1 - i);
    }
    rank as u16
}

fn argsort_stable(window: &[f64], out: &mut [u8]) {
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = k as u8;
    }
    out.sort_by(|&a, &b| {
        window[a as usize]
            .total_cmp(&window[b as usize])
            .then(a.cmp(&b))
    });
}

/// Ordinal pattern of one window of `m` values.
pub fn symbolize(window: &[f64]) -> OrdinalPattern {
    let mut order = vec![0u8; window.len()];
    argsort_stable(window, &mut order);
    OrdinalPattern(order.into_iter().map(|k| k + 1).collect())
}

/// Symbol codes for every admissible start index of every block. Windows
/// never straddle a block boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence {
    m: usize,
    codes: Vec<u16>,
    block_lens: Vec<usize>,
}

impl SymbolSequence {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[u16] {
        &self.codes
    }

    /// Number of symbols per block.
    pub fn block_lens(&self) -> &[usize] {
        &self.block_lens
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[u16]> {
        let mut start = 0;
        self.block_lens.iter().map(move |&n| {
            let b = &self.codes[start..start + n];
            start += n;
            b
        })
    }

    pub fn pattern(&self, i: usize) -> OrdinalPattern {
        OrdinalPattern::from_code(self.m, self.codes[i])
    }
}

/// Symbolizes each block separately with embedding `m` and delay `d`.
pub fn symbol_sequence<'a, I>(blocks: I, params: &SteParams) -> Result<SymbolSequence>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    params.validate()?;
    let (m, d) = (params.m, params.delay);
    let span = params.pattern_span();
    let mut codes = Vec::new();
    let mut block_lens = Vec::new();
    let mut window = vec![0.0; m];
    let mut order = vec![0u8; m];
    for (b, block) in blocks.into_iter().enumerate() {
        if block.len() < params.min_block_len() {
            return Err(Error::BlockTooShort {
                block: b,
                len: block.len(),
                required: params.min_block_len(),
            });
        }
        let count = block.len() - span + 1;
        for i in 0..count {
            for (j, w) in window.iter_mut().enumerate() {
                *w = block[i + j * d];
            }
            argsort_stable(&window, &mut order);
            codes.push(lehmer_rank(&order));
        }
        block_lens.push(count);
    }
    Ok(SymbolSequence { m, codes, block_lens })
}

/// Counts of `(X_{i+t}, X_i, Y_i)` over all admissible `i`.
#[derive(Debug, Clone)]
pub(crate) struct TripleCounts {
    /// Keyed `(x_now, y_now, x_future)`, sorted.
    joint: Vec<((u16, u16, u16), u64)>,
    pair_future: BTreeMap<(u16, u16), u64>,
    total: u64,
}

impl TripleCounts {
    fn build(src: &SymbolSequence, dst: &SymbolSequence, horizon: usize) -> Result<Self> {
        if src.m != dst.m {
            return Err(Error::Misaligned(format!("embedding {} vs {}", src.m, dst.m)));
        }
        if src.block_lens != dst.block_lens {
            return Err(Error::Misaligned("block structure differs".into()));
        }
        let mut keys = Vec::with_capacity(dst.len());
        for (x, y) in dst.blocks().zip(src.blocks()) {
            for i in 0..x.len().saturating_sub(horizon) {
                keys.push((x[i], y[i], x[i + horizon]));
            }
        }
        if keys.is_empty() {
            return Err(Error::NoAdmissibleTriples);
        }
        keys.sort_unstable();
        let mut joint: Vec<((u16, u16, u16), u64)> = Vec::new();
        let mut pair_future = BTreeMap::new();
        for &k in &keys {
            match joint.last_mut() {
                Some((last, n)) if *last == k => *n += 1,
                _ => joint.push((k, 1)),
            }
            *pair_future.entry((k.0, k.2)).or_insert(0) += 1;
        }
        Ok(TripleCounts {
            joint,
            pair_future,
            total: keys.len() as u64,
        })
    }

    #[cfg(test)]
    fn probability_mass(&self) -> f64 {
        self.joint.iter().map(|&(_, n)| n as f64 / self.total as f64).sum()
    }

    fn transfer_entropy(&self) -> f64 {
        let total = self.total as f64;
        let mut sum = 0.0;
        let mut i = 0;
        while i < self.joint.len() {
            let x_now = self.joint[i].0 .0;
            let mut end_x = i;
            let mut n_x = 0u64;
            while end_x < self.joint.len() && self.joint[end_x].0 .0 == x_now {
                n_x += self.joint[end_x].1;
                end_x += 1;
            }
            let mut j = i;
            while j < end_x {
                let y_now = self.joint[j].0 .1;
                let mut end_y = j;
                let mut n_xy = 0u64;
                while end_y < end_x && self.joint[end_y].0 .1 == y_now {
                    n_xy += self.joint[end_y].1;
                    end_y += 1;
                }
                for &((_, _, x_future), n) in &self.joint[j..end_y] {
                    let n_xf = self.pair_future[&(x_now, x_future)];
                    let ratio = (n as f64 * n_x as f64) / (n_xy as f64 * n_xf as f64);
                    sum += (n as f64 / total) * ratio.log2();
                }
                j = end_y;
            }
            i = end_x;
        }
        sum.max(0.0)
    }
}

/// Transfer entropy `T_{Y -> X}` in bits, from source `Y` to destination `X`.
pub fn ste(src: &SymbolSequence, dst: &SymbolSequence, params: &SteParams) -> Result<f64> {
    Ok(TripleCounts::build(src, dst, params.horizon)?.transfer_entropy())
}

/// The 144 directed STE values of one event group, row-major by
/// `(source, destination)` in sensor order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteFeatureVector {
    values: Vec<f64>,
}

impl SteFeatureVector {
    pub fn get(&self, src: SensorId, dst: SensorId) -> f64 {
        self.values[feature_index(src, dst)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

pub fn group_symbols(group: &EventGroup, params: &SteParams) -> Result<Vec<SymbolSequence>> {
    SensorId::ALL
        .iter()
        .map(|&s| {
            symbol_sequence(group.blocks(s), params)
                .map_err(|e| e.context(format!("sensor {s}")))
        })
        .collect()
}

pub fn ste_feature_vector(group: &EventGroup, params: &SteParams) -> Result<SteFeatureVector> {
    let symbols = group_symbols(group, params)?;
    let mut values = vec![0.0; N_FEATURES];
    for src in 0..N_SENSORS {
        for dst in 0..N_SENSORS {
            values[src * N_SENSORS + dst] = ste(&symbols[src], &symbols[dst], params)?;
        }
    }
    Ok(SteFeatureVector { values })
}
