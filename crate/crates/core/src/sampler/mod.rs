//! Artery-anchored patch sampling: crop, augment, inject, noise, window.

mod shard;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{apply_ct_noise, NoiseParams};
use crate::rng::derive_rng;
use crate::synth::{inject_into, synthesize_lesion, LesionConfig, LesionKind, LesionSpec};
use crate::transforms::{apply_window_bank, augment, AugmentParams, AugmentRanges, MultiChannelPatch, WindowBank};
use crate::volume::{crop, resample, resample_mask, Interpolation, MaskVolume, Spacing, Volume};

pub use shard::{generate_shard, ShardHeader, ShardReader, ShardRecord, ShardSummary, SHARD_MAGIC};

pub const MIN_PATCH_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub patch_size: usize,
    pub target_spacing_mm: Spacing,
    pub lesion_probability: f64,
    pub kind_probability_calcified: f64,
    pub max_lesions_per_patch: usize,
    pub augment: AugmentRanges,
    pub interpolation: Interpolation,
    pub lesion: LesionConfig,
    pub noise: NoiseParams,
    pub noise_enabled: bool,
    /// When false, noise is applied to the anatomy before lesions are
    /// stamped, leaving lesion voxels noise-free.
    pub noise_after_injection: bool,
    pub windows: WindowBank,
    pub master_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            patch_size: 96,
            target_spacing_mm: [0.5; 3],
            lesion_probability: 0.8,
            kind_probability_calcified: 0.5,
            max_lesions_per_patch: 1,
            augment: AugmentRanges::default(),
            interpolation: Interpolation::Trilinear,
            lesion: LesionConfig::default(),
            noise: NoiseParams::default(),
            noise_enabled: true,
            noise_after_injection: true,
            windows: WindowBank::default(),
            master_seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.patch_size < MIN_PATCH_SIZE {
            return bad(format!("patch_size {} is below {MIN_PATCH_SIZE}", self.patch_size));
        }
        crate::volume::check_spacing(self.target_spacing_mm)?;
        for (name, p) in [
            ("lesion_probability", self.lesion_probability),
            ("kind_probability_calcified", self.kind_probability_calcified),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} is outside [0, 1]"));
            }
        }
        if self.max_lesions_per_patch == 0 {
            return bad("max_lesions_per_patch must be at least 1".into());
        }
        self.augment.validate()?;
        self.lesion.validate()?;
        self.noise.validate()?;
        self.windows.validate()
    }
}

/// One placed lesion, in patch coordinates after augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedLesion {
    pub spec: LesionSpec,
    pub anchor: [usize; 3],
    pub stamp_voxels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchMeta {
    pub volume_id: String,
    pub index: u64,
    /// Anchor in source-grid voxel coordinates.
    pub anchor: [usize; 3],
    pub augment: AugmentParams,
    pub lesion_kind: Option<LesionKind>,
    pub lesions: Vec<PlacedLesion>,
    pub target_voxels: usize,
    /// Set when augmentation moved every artery voxel out of the patch and
    /// lesions were anchored at the patch centre instead.
    pub artery_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample {
    pub channels: MultiChannelPatch,
    pub target: MaskVolume,
    pub meta: PatchMeta,
}

/// A source volume with its artery mask, already on the target grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceVolume {
    pub id: String,
    pub volume: Volume,
    pub artery: MaskVolume,
}

/// Resample a volume/mask pair to `target_spacing_mm` unless it is already
/// there.
pub fn prepare_volume(
    id: impl Into<String>,
    volume: Volume,
    artery: MaskVolume,
    config: &SamplerConfig,
) -> Result<SourceVolume> {
    if !volume.same_grid(&artery) {
        return Err(Error::DimMismatch(volume.dims, artery.dims));
    }
    let (volume, artery) = if volume.spacing == config.target_spacing_mm {
        (volume, artery)
    } else {
        (
            resample(&volume, config.target_spacing_mm, config.interpolation)?,
            resample_mask(&artery, config.target_spacing_mm)?,
        )
    };
    if artery.count() == 0 {
        return Err(Error::Placement("artery mask is empty".into()));
    }
    Ok(SourceVolume { id: id.into(), volume, artery })
}

fn validate_pair(volume: &Volume, artery: &MaskVolume) -> Result<()> {
    if volume.dims != artery.dims {
        return Err(Error::DimMismatch(volume.dims, artery.dims));
    }
    Ok(())
}

/// Produce patch `index` from one source volume. All randomness comes from
/// `derive_rng(master_seed, volume_id, index)`.
pub fn sample_patch(
    volume: &Volume,
    artery: &MaskVolume,
    volume_id: &str,
    index: u64,
    config: &SamplerConfig,
) -> Result<PatchSample> {
    validate_pair(volume, artery)?;
    let candidates = artery.foreground();
    if candidates.is_empty() {
        return Err(Error::Placement(format!("artery mask of {volume_id} is empty")));
    }
    let mut rng = derive_rng(config.master_seed, volume_id, index);
    let d = config.patch_size;

    let anchor_index = candidates[rng.below(candidates.len() as u64) as usize];
    let anchor = artery.coords(anchor_index);
    let origin = anchor.map(|a| a as i64 - (d / 2) as i64);
    let hu = crop(volume, origin, [d; 3])?;
    let art = crop(artery, origin, [d; 3])?;

    let params = config.augment.sample(&mut rng);
    let (mut patch, art) = augment(&hu, &art, &params, config.interpolation)?;

    if config.noise_enabled && !config.noise_after_injection {
        patch = apply_ct_noise(&patch, &config.noise, &mut rng);
    }

    let mut target = MaskVolume::zeros_like(&patch);
    let mut lesions = Vec::new();
    let mut lesion_kind = None;
    let mut artery_fallback = false;
    if rng.bernoulli(config.lesion_probability) {
        let kind = if rng.bernoulli(config.kind_probability_calcified) {
            LesionKind::Calcified
        } else {
            LesionKind::Noncalcified
        };
        lesion_kind = Some(kind);
        let mut sites = art.foreground();
        if sites.is_empty() {
            artery_fallback = true;
            sites.push(patch.index(d / 2, d / 2, d / 2));
        }
        let n = 1 + rng.below(config.max_lesions_per_patch as u64) as usize;
        for _ in 0..n {
            let (spec, stamp) = synthesize_lesion(&mut rng, kind, &config.lesion)?;
            let at = inject_into(&mut patch, &mut target, &sites, &stamp, spec.target_hu, config.lesion.blend, &mut rng)?;
            lesions.push(PlacedLesion { spec, anchor: at, stamp_voxels: stamp.voxel_count() });
        }
    }

    if config.noise_enabled && config.noise_after_injection {
        patch = apply_ct_noise(&patch, &config.noise, &mut rng);
    }

    let channels = apply_window_bank(&patch, &config.windows);
    let meta = PatchMeta {
        volume_id: volume_id.to_string(),
        index,
        anchor,
        augment: params,
        lesion_kind,
        lesions,
        target_voxels: target.count(),
        artery_fallback,
    };
    Ok(PatchSample { channels, target, meta })
}
