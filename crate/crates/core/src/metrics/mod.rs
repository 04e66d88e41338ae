//! Segmentation, detection and ranking metrics.

pub mod components;
mod detection;
mod distance;
mod overlap;
mod roc;
pub mod skeleton;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::MaskVolume;

pub use components::{connected_components, Connectivity, Labels};
pub use detection::{match_lesions, DetectionScores, LesionMatch, DEFAULT_MIN_OVERLAP};
pub use distance::{edt_sq, msd, surface};
pub use overlap::{cldice, dice};
pub use roc::{auroc, bootstrap_auc_ci, percentile, RocResult};
pub use skeleton::skeletonize3d;

pub(crate) fn same_dims(a: &MaskVolume, b: &MaskVolume) -> Result<()> {
    if a.dims == b.dims {
        Ok(())
    } else {
        Err(Error::DimMismatch(a.dims, b.dims))
    }
}

/// Per-case segmentation scores. `msd_voxels` is `None` when either mask is
/// empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegScores {
    pub dice: f64,
    pub cldice: f64,
    pub msd_voxels: Option<f64>,
}

pub fn segmentation_scores(pred: &MaskVolume, gt: &MaskVolume) -> Result<SegScores> {
    same_dims(pred, gt)?;
    let msd_voxels = if pred.count() > 0 && gt.count() > 0 {
        Some(msd(pred, gt)?)
    } else {
        None
    };
    Ok(SegScores {
        dice: dice(pred, gt)?,
        cldice: cldice(pred, gt)?,
        msd_voxels,
    })
}
