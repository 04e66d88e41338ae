//! Exact Euclidean distance transform and mean surface distance.

use super::same_dims;
use crate::error::{Error, Result};
use crate::volume::MaskVolume;

/// Lower envelope of parabolas `(q - v)^2 + f(v)` for one line; entries of
/// `f` that are infinite contribute no parabola.
fn envelope_1d(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for q in 0..f.len() {
        if !f[q].is_finite() {
            continue;
        }
        let fq = f[q] + (q * q) as f64;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
                    if s <= *z.last().expect("parallel to v") {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared Euclidean distance (in voxels) from every voxel to the nearest
/// foreground voxel, by three separable lower-envelope passes.
pub fn edt_sq(mask: &MaskVolume) -> Result<Vec<f64>> {
    if mask.count() == 0 {
        return Err(Error::InvalidArgument("distance transform of an empty mask".into()));
    }
    let [nx, ny, nz] = mask.dims;
    let mut d: Vec<f64> = mask
        .voxels
        .iter()
        .map(|&m| if m != 0 { 0.0 } else { f64::INFINITY })
        .collect();
    let longest = nx.max(ny).max(nz);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let (mut v, mut z) = (Vec::with_capacity(longest), Vec::with_capacity(longest));

    let mut pass = |len: usize, count: usize, at: &dyn Fn(usize, usize) -> usize, d: &mut Vec<f64>| {
        for l in 0..count {
            for q in 0..len {
                line[q] = d[at(l, q)];
            }
            envelope_1d(&line[..len], &mut out[..len], &mut v, &mut z);
            for q in 0..len {
                d[at(l, q)] = out[q];
            }
        }
    };
    pass(nx, ny * nz, &|l, q| q + nx * l, &mut d);
    pass(ny, nx * nz, &|l, q| (l % nx) + nx * (q + ny * (l / nx)), &mut d);
    pass(nz, nx * ny, &|l, q| l + nx * ny * q, &mut d);
    Ok(d)
}

/// Foreground voxels with at least one background face neighbour; the
/// outside of the grid counts as background.
pub fn surface(mask: &MaskVolume) -> MaskVolume {
    let mut out = MaskVolume::zeros_like(mask);
    for i in 0..mask.len() {
        if mask.voxels[i] == 0 {
            continue;
        }
        let [x, y, z] = mask.coords(i).map(|c| c as i64);
        let border = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
            .iter()
            .any(|[dx, dy, dz]| mask.get_or_fill(x + dx, y + dy, z + dz) == 0);
        out.voxels[i] = u8::from(border);
    }
    out
}

/// Symmetric mean surface distance in voxels.
pub fn msd(pred: &MaskVolume, gt: &MaskVolume) -> Result<f64> {
    same_dims(pred, gt)?;
    if pred.count() == 0 || gt.count() == 0 {
        return Err(Error::InvalidArgument("surface distance needs two non-empty masks".into()));
    }
    let sp = surface(pred);
    let sg = surface(gt);
    let to_gt = edt_sq(&sg)?;
    let to_pred = edt_sq(&sp)?;
    let mut total = 0.0;
    let mut n = 0usize;
    for i in 0..sp.len() {
        if sp.voxels[i] != 0 {
            total += to_gt[i].sqrt();
            n += 1;
        }
        if sg.voxels[i] != 0 {
            total += to_pred[i].sqrt();
            n += 1;
        }
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn brute_edt_sq(m: &MaskVolume) -> Vec<f64> {
        let fg: Vec<[usize; 3]> = m.foreground().into_iter().map(|i| m.coords(i)).collect();
        (0..m.len())
            .map(|i| {
                let p = m.coords(i);
                fg.iter()
                    .map(|q| (0..3).map(|a| (p[a] as f64 - q[a] as f64).powi(2)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn face_neighbour_is_one() {
        let mut m = MaskVolume::filled([3, 3, 3], [1.0; 3], 0).unwrap();
        let c = m.index(1, 1, 1);
        m.voxels[c] = 1;
        let d = edt_sq(&m).unwrap();
        assert_eq!(d[m.index(2, 1, 1)], 1.0);
        assert_eq!(d[m.index(2, 2, 2)], 3.0);
        assert_eq!(d[c], 0.0);
    }

    #[test]
    fn full_mask_is_zero_and_empty_is_error() {
        let m = MaskVolume::filled([3, 4, 2], [1.0; 3], 1).unwrap();
        assert!(edt_sq(&m).unwrap().iter().all(|&d| d == 0.0));
        let e = MaskVolume::filled([3, 4, 2], [1.0; 3], 0).unwrap();
        assert!(edt_sq(&e).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_masks() {
        for case in 0..8 {
            let mut r = derive_rng(21, "edt", case);
            let density = [0.01, 0.05, 0.3][case as usize % 3];
            let voxels = (0..7 * 9 * 5).map(|_| u8::from(r.bernoulli(density))).collect();
            let mut m = MaskVolume::new([7, 9, 5], [1.0; 3], voxels).unwrap();
            if m.count() == 0 {
                m.voxels[17] = 1;
            }
            assert_eq!(edt_sq(&m).unwrap(), brute_edt_sq(&m), "case {case}");
        }
    }

    #[test]
    fn surface_of_solid_cube() {
        let mut m = MaskVolume::filled([5, 5, 5], [1.0; 3], 0).unwrap();
        for z in 1..4 {
            for y in 1..4 {
                for x in 1..4 {
                    let i = m.index(x, y, z);
                    m.voxels[i] = 1;
                }
            }
        }
        let s = surface(&m);
        assert_eq!(s.count(), 26);
        assert_eq!(s.get(2, 2, 2), 0);
    }

    #[test]
    fn msd_examples() {
        let mut a = MaskVolume::filled([10, 3, 3], [1.0; 3], 0).unwrap();
        let mut b = a.clone();
        let ia = a.index(1, 1, 1);
        a.voxels[ia] = 1;
        let ib = b.index(6, 1, 1);
        b.voxels[ib] = 1;
        assert_eq!(msd(&a, &b).unwrap(), 5.0);
        assert_eq!(msd(&a, &a).unwrap(), 0.0);
        assert_eq!(msd(&a, &b).unwrap(), msd(&b, &a).unwrap());
        let e = MaskVolume::zeros_like(&a);
        assert!(msd(&a, &e).is_err());
    }
}
