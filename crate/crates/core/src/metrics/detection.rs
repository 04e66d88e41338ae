//! Lesion-level detection scoring by component overlap.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::components::{connected_components, Connectivity};
use super::same_dims;
use crate::error::Result;
use crate::volume::MaskVolume;

/// A pair must overlap by strictly more than this many voxels.
pub const DEFAULT_MIN_OVERLAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LesionMatch {
    pub pred_id: u32,
    pub gt_id: u32,
    pub overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched_pairs: Vec<LesionMatch>,
    pub n_pred: usize,
    pub n_gt: usize,
}

/// Greedy one-to-one matching of 26-connected components, largest overlap
/// first. Ties break on `(gt_id, pred_id)`.
pub fn match_lesions(pred: &MaskVolume, gt: &MaskVolume, min_overlap: usize) -> Result<DetectionScores> {
    same_dims(pred, gt)?;
    let lp = connected_components(pred, Connectivity::TwentySix);
    let lg = connected_components(gt, Connectivity::TwentySix);

    let mut overlaps: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for (a, b) in lp.labels.iter().zip(&lg.labels) {
        if *a > 0 && *b > 0 {
            *overlaps.entry((*a, *b)).or_default() += 1;
        }
    }
    let mut candidates: Vec<LesionMatch> = overlaps
        .into_iter()
        .filter(|&(_, n)| n > min_overlap)
        .map(|((pred_id, gt_id), overlap)| LesionMatch { pred_id, gt_id, overlap })
        .collect();
    candidates.sort_by(|a, b| {
        b.overlap
            .cmp(&a.overlap)
            .then(a.gt_id.cmp(&b.gt_id))
            .then(a.pred_id.cmp(&b.pred_id))
    });

    let mut pred_used = vec![false; lp.count + 1];
    let mut gt_used = vec![false; lg.count + 1];
    let mut matched_pairs = Vec::new();
    for c in candidates {
        if !pred_used[c.pred_id as usize] && !gt_used[c.gt_id as usize] {
            pred_used[c.pred_id as usize] = true;
            gt_used[c.gt_id as usize] = true;
            matched_pairs.push(c);
        }
    }

    let m = matched_pairs.len() as f64;
    let (n_pred, n_gt) = (lp.count, lg.count);
    let (precision, recall) = match (n_pred, n_gt) {
        (0, 0) => (1.0, 1.0),
        (0, _) => (0.0, 0.0),
        (_, 0) => (0.0, 0.0),
        _ => (m / n_pred as f64, m / n_gt as f64),
    };
    let f1 = if n_pred == 0 && n_gt == 0 {
        1.0
    } else if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(DetectionScores { precision, recall, f1, matched_pairs, n_pred, n_gt })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(m: &mut MaskVolume, y: usize, x0: usize, len: usize) {
        for x in x0..x0 + len {
            let i = m.index(x, y, 1);
            m.voxels[i] = 1;
        }
    }

    fn empty() -> MaskVolume {
        MaskVolume::filled([32, 12, 3], [1.0; 3], 0).unwrap()
    }

    #[test]
    fn threshold_is_strict() {
        let mut gt = empty();
        line(&mut gt, 2, 0, 20);
        for (n, expect) in [(10, 0.0), (11, 1.0)] {
            let mut pred = empty();
            line(&mut pred, 2, 0, n);
            let s = match_lesions(&pred, &gt, DEFAULT_MIN_OVERLAP).unwrap();
            assert_eq!((s.precision, s.recall, s.f1), (expect, expect, expect), "overlap {n}");
        }
    }

    #[test]
    fn two_preds_one_gt() {
        let mut gt = empty();
        for y in 2..5 {
            line(&mut gt, y, 0, 30);
        }
        let mut pred = empty();
        line(&mut pred, 3, 0, 14);
        line(&mut pred, 3, 16, 12);
        let s = match_lesions(&pred, &gt, 10).unwrap();
        assert_eq!(s.precision, 0.5);
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.matched_pairs, vec![LesionMatch { pred_id: 1, gt_id: 1, overlap: 14 }]);
    }

    #[test]
    fn empty_side_conventions() {
        let e = empty();
        let s = match_lesions(&e, &e, 10).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let mut p = empty();
        line(&mut p, 2, 0, 12);
        let s = match_lesions(&p, &e, 10).unwrap();
        assert_eq!(s.precision, 0.0);
        let s = match_lesions(&e, &p, 10).unwrap();
        assert_eq!(s.recall, 0.0);
    }

    #[test]
    fn invariant_to_component_numbering() {
        // Mirroring along y reverses the smallest-index order of components.
        let mut gt = empty();
        line(&mut gt, 2, 0, 12);
        line(&mut gt, 8, 18, 12);
        let mut pred = empty();
        line(&mut pred, 2, 0, 12);
        line(&mut pred, 8, 20, 5);
        let flip = |m: &MaskVolume| {
            let mut o = m.clone();
            for i in 0..m.len() {
                let [x, y, z] = m.coords(i);
                o.voxels[m.index(x, m.dims[1] - 1 - y, z)] = m.voxels[i];
            }
            o
        };
        let a = match_lesions(&pred, &gt, 10).unwrap();
        let b = match_lesions(&flip(&pred), &flip(&gt), 10).unwrap();
        assert_eq!((a.precision, a.recall), (b.precision, b.recall));
        assert_eq!((a.precision, a.recall), (0.5, 0.5));
    }
}
