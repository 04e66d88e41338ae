//! Intensity windowing and geometric augmentation of HU patches.

mod augment;
mod window;

pub use augment::{augment, AugmentParams, AugmentRanges};
pub use window::{apply_window, apply_window_bank, MultiChannelPatch, WindowBank, WindowSpec};
