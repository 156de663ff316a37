//! Rank correlation between predicted scores and ground-truth grades.
//!
//! Ground-truth ranks are quality grades: within a group of `n` items they
//! are a permutation of `1..=n`, and a larger rank means better quality.
//! A measure agrees with the ground truth when larger scores go with larger
//! ranks.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    LengthMismatch { scores: usize, ranks: usize },
    TooShort(usize),
    /// Ranks are not a permutation of `1..=n`.
    InvalidRanks,
    NonFiniteScore(f64),
    NoGroups,
    /// Error inside a named group.
    Group { group: String, source: alloc::boxed::Box<EvalError> },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::LengthMismatch { scores, ranks } => {
                write!(f, "{scores} scores but {ranks} ground-truth ranks")
            }
            EvalError::TooShort(n) => write!(f, "ranking length {n} is below 2"),
            EvalError::InvalidRanks => {
                write!(f, "ground-truth ranks must be a permutation of 1..=n")
            }
            EvalError::NonFiniteScore(v) => write!(f, "score {v} is not finite"),
            EvalError::NoGroups => write!(f, "no groups to evaluate"),
            EvalError::Group { group, source } => write!(f, "group {group}: {source}"),
        }
    }
}

impl core::error::Error for EvalError {}

fn validate(scores: &[f64], gt_ranks: &[usize]) -> Result<(), EvalError> {
    let n = scores.len();
    if n != gt_ranks.len() {
        return Err(EvalError::LengthMismatch {
            scores: n,
            ranks: gt_ranks.len(),
        });
    }
    if n < 2 {
        return Err(EvalError::TooShort(n));
    }
    if let Some(&v) = scores.iter().find(|v| !v.is_finite()) {
        return Err(EvalError::NonFiniteScore(v));
    }
    let mut seen = vec![false; n];
    for &r in gt_ranks {
        if r == 0 || r > n || seen[r - 1] {
            return Err(EvalError::InvalidRanks);
        }
        seen[r - 1] = true;
    }
    Ok(())
}

/// Concordant and discordant pair counts. A pair with tied scores is neither.
pub fn concordance(scores: &[f64], gt_ranks: &[usize]) -> Result<(u64, u64), EvalError> {
    validate(scores, gt_ranks)?;
    let n = scores.len();
    let (mut nc, mut nd) = (0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let s = scores[i].partial_cmp(&scores[j]).unwrap_or(Ordering::Equal);
            let g = gt_ranks[i].cmp(&gt_ranks[j]);
            match (s, g) {
                (Ordering::Equal, _) => {}
                (a, b) if a == b => nc += 1,
                _ => nd += 1,
            }
        }
    }
    Ok((nc, nd))
}

/// Kendall rank correlation `(n_c − n_d) / (n(n − 1)/2)`.
pub fn krcc(scores: &[f64], gt_ranks: &[usize]) -> Result<f64, EvalError> {
    let (nc, nd) = concordance(scores, gt_ranks)?;
    let n = scores.len() as f64;
    Ok((nc as f64 - nd as f64) / (0.5 * n * (n - 1.0)))
}

/// 1-based ranks of `values` in ascending order; tied values share the mean
/// of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation `1 − 6 Σ d² / (n(n² − 1))`, where `d` is the
/// difference between an item's score rank and its ground-truth rank.
pub fn srcc(scores: &[f64], gt_ranks: &[usize]) -> Result<f64, EvalError> {
    validate(scores, gt_ranks)?;
    let n = scores.len() as f64;
    let d2: f64 = average_ranks(scores)
        .iter()
        .zip(gt_ranks)
        .map(|(r, &g)| {
            let d = r - g as f64;
            d * d
        })
        .sum();
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

/// One scored item of a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub item_id: String,
    pub score: f64,
    pub gt_rank: usize,
}

/// The items of one source group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub group_id: String,
    pub items: Vec<RankedItem>,
}

impl Ranking {
    pub fn scores(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.score).collect()
    }

    pub fn gt_ranks(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.gt_rank).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub group_id: String,
    pub n: usize,
    pub krcc: f64,
    pub srcc: f64,
}

/// Per-group correlations and their mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub groups: Vec<GroupResult>,
    pub mean_krcc: f64,
    pub std_krcc: f64,
    pub mean_srcc: f64,
    pub std_srcc: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, math::sqrt(var))
}

pub fn evaluate_groups(rankings: &[Ranking]) -> Result<RankingReport, EvalError> {
    if rankings.is_empty() {
        return Err(EvalError::NoGroups);
    }
    let mut groups = Vec::with_capacity(rankings.len());
    for r in rankings {
        let wrap = |e: EvalError| EvalError::Group {
            group: r.group_id.clone(),
            source: alloc::boxed::Box::new(e),
        };
        let scores = r.scores();
        let ranks = r.gt_ranks();
        groups.push(GroupResult {
            group_id: r.group_id.clone(),
            n: r.items.len(),
            krcc: krcc(&scores, &ranks).map_err(wrap)?,
            srcc: srcc(&scores, &ranks).map_err(wrap)?,
        });
    }
    let k: Vec<f64> = groups.iter().map(|g| g.krcc).collect();
    let s: Vec<f64> = groups.iter().map(|g| g.srcc).collect();
    let (mean_krcc, std_krcc) = mean_std(&k);
    let (mean_srcc, std_srcc) = mean_std(&s);
    Ok(RankingReport {
        groups,
        mean_krcc,
        std_krcc,
        mean_srcc,
        std_srcc,
    })
}
