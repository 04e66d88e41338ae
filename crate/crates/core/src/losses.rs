//! Composite Tversky + focal loss for sparse foreground segmentation, with
//! exact gradients.
//!
//! Probabilities are clamped to `[eps, 1 - eps]` before use; the gradient
//! is that of the clamped composite, so it is zero for coordinates outside
//! the open clamp interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossParams {
    /// Weight on false positives.
    pub alpha: f64,
    /// Weight on false negatives.
    pub beta: f64,
    pub gamma: f64,
    pub eps: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.9,
            gamma: 4.0,
            eps: 1e-6,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha >= 0.0
            && self.beta >= 0.0
            && self.gamma >= 0.0
            && self.eps > 0.0
            && self.eps < 1e-3;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("loss params {self:?}")))
        }
    }

    #[inline]
    fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.eps, 1.0 - self.eps)
    }

    #[inline]
    fn in_interior(&self, p: f64) -> bool {
        p > self.eps && p < 1.0 - self.eps
    }
}

fn check(p: &[f64], y: &[u8]) -> Result<()> {
    if p.len() != y.len() {
        return Err(Error::LengthMismatch(p.len(), y.len()));
    }
    if let Some(v) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidArgument(format!("label {v} is not binary")));
    }
    Ok(())
}

struct TverskyTerms {
    tp: f64,
    fp: f64,
    fn_: f64,
}

fn tversky_terms(p: &[f64], y: &[u8], params: &LossParams) -> TverskyTerms {
    let mut t = TverskyTerms { tp: 0.0, fp: 0.0, fn_: 0.0 };
    for (&pi, &yi) in p.iter().zip(y) {
        let pc = params.clamp(pi);
        if yi == 1 {
            t.tp += pc;
            t.fn_ += 1.0 - pc;
        } else {
            t.fp += pc;
        }
    }
    t
}

/// `1 - (TP + eps) / (TP + alpha FP + beta FN + eps)`.
pub fn tversky_loss(p: &[f64], y: &[u8], params: &LossParams) -> Result<f64> {
    check(p, y)?;
    let t = tversky_terms(p, y, params);
    let num = t.tp + params.eps;
    let den = t.tp + params.alpha * t.fp + params.beta * t.fn_ + params.eps;
    Ok(1.0 - num / den)
}

#[inline]
fn focal_term(p: f64, y: u8, gamma: f64) -> f64 {
    let pt = if y == 1 { p } else { 1.0 - p };
    -(1.0 - pt).powf(gamma) * pt.ln()
}

/// Mean of `-(1 - p_t)^gamma ln(p_t)` over voxels.
pub fn focal_loss(p: &[f64], y: &[u8], params: &LossParams) -> Result<f64> {
    check(p, y)?;
    if p.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = p
        .iter()
        .zip(y)
        .map(|(&pi, &yi)| focal_term(params.clamp(pi), yi, params.gamma))
        .sum();
    Ok(sum / p.len() as f64)
}

/// Value and gradient with respect to each `p_i` of
/// `tversky_loss + focal_loss`.
pub fn total_loss_and_grad(p: &[f64], y: &[u8], params: &LossParams) -> Result<(f64, Vec<f64>)> {
    check(p, y)?;
    let n = p.len();
    let t = tversky_terms(p, y, params);
    let num = t.tp + params.eps;
    let den = t.tp + params.alpha * t.fp + params.beta * t.fn_ + params.eps;
    let tversky = 1.0 - num / den;
    let (a, b, g) = (params.alpha, params.beta, params.gamma);

    let mut focal_sum = 0.0;
    let mut grad = Vec::with_capacity(n);
    for (&pi, &yi) in p.iter().zip(y) {
        let pc = params.clamp(pi);
        focal_sum += focal_term(pc, yi, g);
        if !params.in_interior(pi) {
            grad.push(0.0);
            continue;
        }
        // d(num)/dp and d(den)/dp for this voxel.
        let (dnum, dden) = if yi == 1 { (1.0, 1.0 - b) } else { (0.0, a) };
        let d_tversky = -(dnum * den - num * dden) / (den * den);
        // d/dp of -(1 - p_t)^g ln p_t, chained through dp_t/dp = +-1.
        let (pt, sign) = if yi == 1 { (pc, 1.0) } else { (1.0 - pc, -1.0) };
        let q = 1.0 - pt;
        let mut d_focal_dpt = -q.powf(g) / pt;
        if g != 0.0 {
            d_focal_dpt += g * q.powf(g - 1.0) * pt.ln();
        }
        grad.push(d_tversky + sign * d_focal_dpt / n as f64);
    }
    let focal = if n == 0 { 0.0 } else { focal_sum / n as f64 };
    Ok((tversky + focal, grad))
}
