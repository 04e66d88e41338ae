use super::same_dims;
use super::skeleton::skeletonize3d;
use crate::error::Result;
use crate::volume::MaskVolume;

/// `2|a & b| / (|a| + |b|)`, 1 when both are empty.
pub fn dice(a: &MaskVolume, b: &MaskVolume) -> Result<f64> {
    same_dims(a, b)?;
    let (mut inter, mut sa, mut sb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.voxels.iter().zip(&b.voxels) {
        let (x, y) = (x != 0, y != 0);
        inter += usize::from(x && y);
        sa += usize::from(x);
        sb += usize::from(y);
    }
    if sa + sb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (sa + sb) as f64)
}

fn coverage(skel: &MaskVolume, mask: &MaskVolume) -> f64 {
    let total = skel.count();
    let hit = skel
        .voxels
        .iter()
        .zip(&mask.voxels)
        .filter(|(&s, &m)| s != 0 && m != 0)
        .count();
    hit as f64 / total as f64
}

/// Centerline Dice: harmonic mean of the fraction of `skel(pred)` inside
/// `gt` and the fraction of `skel(gt)` inside `pred`. Swapping the
/// arguments swaps the two terms, so the value is symmetric. Both empty
/// gives 1, exactly one empty gives 0.
pub fn cldice(pred: &MaskVolume, gt: &MaskVolume) -> Result<f64> {
    same_dims(pred, gt)?;
    match (pred.count(), gt.count()) {
        (0, 0) => return Ok(1.0),
        (0, _) | (_, 0) => return Ok(0.0),
        _ => {}
    }
    let sp = skeletonize3d(pred);
    let sg = skeletonize3d(gt);
    let t_prec = coverage(&sp, gt);
    let t_sens = coverage(&sg, pred);
    if t_prec + t_sens == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * t_prec * t_sens / (t_prec + t_sens))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxes(dims: [usize; 3], ranges: &[([usize; 3], [usize; 3])]) -> MaskVolume {
        let mut m = MaskVolume::filled(dims, [1.0; 3], 0).unwrap();
        for (lo, hi) in ranges {
            for z in lo[2]..hi[2] {
                for y in lo[1]..hi[1] {
                    for x in lo[0]..hi[0] {
                        let i = m.index(x, y, z);
                        m.voxels[i] = 1;
                    }
                }
            }
        }
        m
    }

    #[test]
    fn dice_examples() {
        let a = boxes([6, 6, 6], &[([0, 0, 0], [2, 2, 2])]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        let b = boxes([6, 6, 6], &[([3, 3, 3], [5, 5, 5])]);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        // |a| = |c| = 8 with 4 shared voxels.
        let c = boxes([6, 6, 6], &[([1, 0, 0], [3, 2, 2])]);
        assert_eq!(dice(&a, &c).unwrap(), 0.5);
        assert_eq!(dice(&c, &a).unwrap(), 0.5);
        let e = MaskVolume::zeros_like(&a);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn dice_dim_mismatch() {
        let a = MaskVolume::filled([2, 2, 2], [1.0; 3], 0).unwrap();
        let b = MaskVolume::filled([2, 2, 3], [1.0; 3], 0).unwrap();
        assert!(dice(&a, &b).is_err());
        assert!(cldice(&a, &b).is_err());
    }

    fn tube(n: usize) -> MaskVolume {
        boxes([7, 7, n + 4], &[([2, 2, 2], [5, 5, n + 2])])
    }

    #[test]
    fn cldice_identical_and_disjoint() {
        let t = tube(12);
        assert_eq!(cldice(&t, &t).unwrap(), 1.0);
        let a = boxes([9, 9, 9], &[([0, 0, 0], [3, 3, 9])]);
        let b = boxes([9, 9, 9], &[([6, 6, 0], [9, 9, 9])]);
        assert_eq!(cldice(&a, &b).unwrap(), 0.0);
        let e = MaskVolume::zeros_like(&a);
        assert_eq!(cldice(&e, &e).unwrap(), 1.0);
        assert_eq!(cldice(&a, &e).unwrap(), 0.0);
    }

    #[test]
    fn broken_tube_loses_sensitivity_only() {
        let n = 20;
        let gt = tube(n);
        let mut pred = gt.clone();
        for z in 10..13 {
            for y in 2..5 {
                for x in 2..5 {
                    let i = pred.index(x, y, z);
                    pred.voxels[i] = 0;
                }
            }
        }
        // Hand count against the skeletons: every pred-skeleton voxel lies in
        // gt, while the gt skeleton crosses the 3-slice gap.
        let sp = skeletonize3d(&pred);
        let sg = skeletonize3d(&gt);
        let t_prec = coverage(&sp, &gt);
        let t_sens = coverage(&sg, &pred);
        assert_eq!(t_prec, 1.0);
        let gap = (0..sg.len())
            .filter(|&i| sg.voxels[i] == 1 && pred.voxels[i] == 0)
            .count();
        assert_eq!(gap, 3);
        assert_eq!(t_sens, (sg.count() - 3) as f64 / sg.count() as f64);
        let c = cldice(&pred, &gt).unwrap();
        assert!(c > 0.0 && c < 1.0);
        assert_eq!(c, 2.0 * t_prec * t_sens / (t_prec + t_sens));
    }

    #[test]
    fn cldice_is_symmetric() {
        // Swapping arguments swaps the two coverage terms, and their harmonic
        // mean does not care about order.
        let slab = boxes([9, 9, 9], &[([1, 1, 1], [8, 8, 8])]);
        let line = boxes([9, 9, 9], &[([4, 4, 1], [5, 5, 8]), ([1, 1, 1], [2, 2, 2])]);
        assert_eq!(cldice(&line, &slab).unwrap(), cldice(&slab, &line).unwrap());
    }
}
