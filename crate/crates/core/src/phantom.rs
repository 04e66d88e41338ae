//! Synthetic cardiac-like test volumes with tubular arteries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_rng, StreamRng};
use crate::volume::{Dims, MaskVolume, Spacing, Volume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub dims: Dims,
    pub spacing_mm: Spacing,
    pub seed: u64,
    pub n_vessels: usize,
    /// Tube radius range in voxels; one radius is drawn per vessel.
    pub radius_voxels: (f64, f64),
    /// Lumen HU range; one value is drawn per vessel.
    pub lumen_hu: (f64, f64),
    pub fat_hu: f64,
    pub soft_tissue_hu: f64,
    pub myocardium_hu: f64,
    /// Peak amplitude of the smooth background texture.
    pub texture_hu: f64,
    /// Vessel centreline length as a fraction of the smallest dimension.
    pub vessel_length_fraction: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            dims: [96, 96, 96],
            spacing_mm: [0.5; 3],
            seed: 0,
            n_vessels: 3,
            radius_voxels: (1.5, 3.0),
            lumen_hu: (350.0, 450.0),
            fat_hu: -80.0,
            soft_tissue_hu: 40.0,
            myocardium_hu: 45.0,
            texture_hu: 15.0,
            vessel_length_fraction: 0.6,
        }
    }
}

pub const MIN_PHANTOM_DIM: usize = 64;

impl PhantomConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN has to fail the checks
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.dims.iter().any(|&d| d < MIN_PHANTOM_DIM) {
            return bad(format!("phantom dims {:?} must be >= {MIN_PHANTOM_DIM} per axis", self.dims));
        }
        crate::volume::check_spacing(self.spacing_mm)?;
        let (rlo, rhi) = self.radius_voxels;
        if !(rlo > 0.0 && rlo <= rhi && rhi.is_finite()) {
            return bad(format!("radius range {:?} must be positive and ordered", self.radius_voxels));
        }
        if !(self.lumen_hu.0 <= self.lumen_hu.1) {
            return bad(format!("lumen range {:?} is not ordered", self.lumen_hu));
        }
        if self.n_vessels == 0 {
            return bad("n_vessels must be at least 1".into());
        }
        if !(self.texture_hu >= 0.0) || !(self.vessel_length_fraction > 0.0) {
            return bad("texture amplitude and vessel length must be non-negative".into());
        }
        Ok(())
    }
}

type P3 = [f64; 3];

fn add(a: P3, b: P3) -> P3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
fn scale(a: P3, s: f64) -> P3 {
    a.map(|v| v * s)
}
fn norm(a: P3) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn unit_vector(rng: &mut StreamRng) -> P3 {
    loop {
        let v = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
        let n = norm(v);
        if n > 1e-3 && n <= 1.0 {
            return scale(v, 1.0 / n);
        }
    }
}

/// Random-walk control points, reflected off a box shrunk by `margin`.
fn walk(rng: &mut StreamRng, dims: Dims, margin: f64, length: f64) -> Vec<P3> {
    const STEP: f64 = 6.0;
    let lo = margin;
    let hi: P3 = dims.map(|d| d as f64 - 1.0 - margin);
    let mut p: P3 = [0, 1, 2].map(|a| {
        let c = (dims[a] as f64 - 1.0) / 2.0;
        rng.uniform(c - (c - lo) / 2.0, c + (c - lo) / 2.0)
    });
    let mut dir = unit_vector(rng);
    let steps = (length / STEP).ceil().max(2.0) as usize;
    let mut pts = vec![p];
    for _ in 0..steps {
        let turn = unit_vector(rng);
        dir = add(dir, scale(turn, 0.5));
        dir = scale(dir, 1.0 / norm(dir));
        let mut next = add(p, scale(dir, STEP));
        for a in 0..3 {
            if next[a] < lo || next[a] > hi[a] {
                dir[a] = -dir[a];
                next[a] = next[a].clamp(lo, hi[a]);
            }
        }
        p = next;
        pts.push(p);
    }
    pts
}

/// Catmull-Rom interpolation through `pts` at roughly `step` spacing.
fn smooth_curve(pts: &[P3], step: f64) -> Vec<P3> {
    let n = pts.len();
    let at = |i: isize| pts[i.clamp(0, n as isize - 1) as usize];
    let mut out = Vec::new();
    for i in 0..n as isize - 1 {
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let seg = norm([p2[0] - p1[0], p2[1] - p1[1], p2[2] - p1[2]]);
        let k = (seg / step).ceil().max(1.0) as usize;
        for j in 0..k {
            let t = j as f64 / k as f64;
            let (t2, t3) = (t * t, t * t * t);
            let c = [0, 1, 2].map(|a| {
                0.5 * (2.0 * p1[a]
                    + (-p0[a] + p2[a]) * t
                    + (2.0 * p0[a] - 5.0 * p1[a] + 4.0 * p2[a] - p3[a]) * t2
                    + (-p0[a] + 3.0 * p1[a] - 3.0 * p2[a] + p3[a]) * t3)
            });
            out.push(c);
        }
    }
    out.push(pts[n - 1]);
    out
}

fn in_ellipsoid(p: P3, centre: P3, radii: P3) -> bool {
    (0..3).map(|a| ((p[a] - centre[a]) / radii[a]).powi(2)).sum::<f64>() <= 1.0
}

/// Generate a phantom volume and its artery mask. Lumen voxels carry the
/// vessel's HU before texture is added.
pub fn generate_phantom(config: &PhantomConfig) -> Result<(Volume, MaskVolume)> {
    config.validate()?;
    let dims = config.dims;
    let mut volume = Volume::filled(dims, config.spacing_mm, config.fat_hu as f32)?;
    let mut mask = MaskVolume::zeros_like(&volume);

    let mut layout = derive_rng(config.seed, "phantom-layout", 0);
    let centre: P3 = dims.map(|d| (d as f64 - 1.0) / 2.0);
    let tissue_radii: P3 = dims.map(|d| d as f64 * layout.uniform(0.38, 0.46));
    let myo_centre: P3 = [0, 1, 2].map(|a| centre[a] + dims[a] as f64 * layout.uniform(-0.08, 0.08));
    let myo_radii: P3 = dims.map(|d| d as f64 * layout.uniform(0.15, 0.22));
    for i in 0..volume.len() {
        let p = volume.coords(i).map(|c| c as f64);
        if in_ellipsoid(p, myo_centre, myo_radii) {
            volume.voxels[i] = config.myocardium_hu as f32;
        } else if in_ellipsoid(p, centre, tissue_radii) {
            volume.voxels[i] = config.soft_tissue_hu as f32;
        }
    }

    let min_dim = *dims.iter().min().expect("three dims") as f64;
    for v in 0..config.n_vessels {
        let mut rng = derive_rng(config.seed, "phantom-vessel", v as u64);
        let radius = rng.uniform(config.radius_voxels.0, config.radius_voxels.1);
        let lumen = rng.uniform(config.lumen_hu.0, config.lumen_hu.1) as f32;
        let ctrl = walk(&mut rng, dims, radius + 2.0, config.vessel_length_fraction * min_dim);
        let r = radius.ceil() as i64;
        for c in smooth_curve(&ctrl, 0.25) {
            let base = c.map(|x| x.round() as i64);
            for dz in -r..=r {
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (x, y, z) = (base[0] + dx, base[1] + dy, base[2] + dz);
                        if !volume.contains(x, y, z) {
                            continue;
                        }
                        let d2 = (x as f64 - c[0]).powi(2) + (y as f64 - c[1]).powi(2) + (z as f64 - c[2]).powi(2);
                        if d2 <= radius * radius {
                            let i = volume.index(x as usize, y as usize, z as usize);
                            volume.voxels[i] = lumen;
                            mask.voxels[i] = 1;
                        }
                    }
                }
            }
        }
    }

    if config.texture_hu > 0.0 {
        // Three plane waves whose amplitudes sum to the configured peak.
        let mut tex = derive_rng(config.seed, "phantom-texture", 0);
        let waves: Vec<(P3, f64)> = (0..3)
            .map(|_| {
                let k = scale(unit_vector(&mut tex), std::f64::consts::TAU / tex.uniform(8.0, 32.0));
                (k, tex.uniform(0.0, std::f64::consts::TAU))
            })
            .collect();
        let amp = config.texture_hu / waves.len() as f64;
        for i in 0..volume.len() {
            let p = volume.coords(i).map(|c| c as f64);
            let t: f64 = waves
                .iter()
                .map(|(k, phase)| amp * (k[0] * p[0] + k[1] * p[1] + k[2] * p[2] + phase).sin())
                .sum();
            volume.voxels[i] = (f64::from(volume.voxels[i]) + t) as f32;
        }
    }
    Ok((volume, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{connected_components, Connectivity};

    fn small(seed: u64) -> PhantomConfig {
        PhantomConfig { dims: [64, 64, 64], seed, ..PhantomConfig::default() }
    }

    #[test]
    fn lumen_hu_before_texture() {
        let cfg = PhantomConfig { texture_hu: 0.0, ..small(3) };
        let (v, m) = generate_phantom(&cfg).unwrap();
        assert!(m.count() > 0);
        for i in m.foreground() {
            assert!((350.0..=450.0).contains(&v.voxels[i]), "{}", v.voxels[i]);
        }
    }

    #[test]
    fn texture_is_bounded() {
        let base = generate_phantom(&PhantomConfig { texture_hu: 0.0, ..small(5) }).unwrap().0;
        let tex = generate_phantom(&small(5)).unwrap().0;
        for (a, b) in base.voxels.iter().zip(&tex.voxels) {
            assert!((a - b).abs() <= 15.0 + 1e-3);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(generate_phantom(&small(9)).unwrap(), generate_phantom(&small(9)).unwrap());
        assert_ne!(generate_phantom(&small(9)).unwrap().1, generate_phantom(&small(10)).unwrap().1);
    }

    #[test]
    fn vessels_connected_and_sparse() {
        for seed in 0..6 {
            let cfg = small(seed);
            let (_, m) = generate_phantom(&cfg).unwrap();
            let labels = connected_components(&m, Connectivity::TwentySix);
            assert!(labels.count >= 1 && labels.count <= cfg.n_vessels, "seed {seed}: {}", labels.count);
            let frac = m.count() as f64 / m.len() as f64;
            assert!(frac < 0.02, "seed {seed}: fraction {frac}");
        }
    }

    #[test]
    fn rejects_small_dims() {
        let cfg = PhantomConfig { dims: [32, 64, 64], ..PhantomConfig::default() };
        assert!(generate_phantom(&cfg).is_err());
    }
}
