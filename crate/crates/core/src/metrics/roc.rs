//! Rank-based AUROC with percentile bootstrap intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_rng;

/// Redraws allowed per resample slot before giving up on a one-class draw.
const MAX_REDRAWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub auc: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_resamples: usize,
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite score {s}")));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidArgument(format!("label {l} is not binary")));
    }
    Ok(())
}

/// Mann-Whitney AUROC with midranks for ties.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_inputs(scores, labels)?;
    auroc_unchecked(scores, labels, &mut Vec::new())
}

fn auroc_unchecked(scores: &[f64], labels: &[u8], order: &mut Vec<usize>) -> Result<f64> {
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUROC needs both classes ({n_pos} positive, {n_neg} negative)"
        )));
    }
    order.clear();
    order.extend(0..scores.len());
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j share their mean.
        let midrank = (i + 1 + j) as f64 / 2.0;
        let pos_in_tie = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        pos_rank_sum += midrank * pos_in_tie as f64;
        i = j;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Percentile with linear interpolation between order statistics; `q` in
/// [0, 100]. `sorted` must be ascending and non-empty.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let h = (sorted.len() - 1) as f64 * (q / 100.0).clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Point AUROC plus a 95% percentile-bootstrap interval over `n` resamples.
pub fn bootstrap_auc_ci(scores: &[f64], labels: &[u8], n: usize, seed: u64) -> Result<RocResult> {
    let auc = auroc(scores, labels)?;
    if n == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one resample".into()));
    }
    let mut rng = derive_rng(seed, "bootstrap", 0);
    let len = scores.len() as u64;
    let mut rs = vec![0.0; scores.len()];
    let mut rl = vec![0u8; scores.len()];
    let mut order = Vec::with_capacity(scores.len());
    let mut aucs = Vec::with_capacity(n);
    for slot in 0..n {
        let mut done = false;
        for _ in 0..=MAX_REDRAWS {
            for k in 0..scores.len() {
                let j = rng.below(len) as usize;
                rs[k] = scores[j];
                rl[k] = labels[j];
            }
            if let Ok(a) = auroc_unchecked(&rs, &rl, &mut order) {
                aucs.push(a);
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::UndefinedMetric(format!(
                "bootstrap slot {slot} drew a single class {} times",
                MAX_REDRAWS + 1
            )));
        }
    }
    aucs.sort_by(f64::total_cmp);
    Ok(RocResult {
        auc,
        ci_lo: percentile(&aucs, 2.5),
        ci_hi: percentile(&aucs, 97.5),
        n_resamples: n,
    })
}
