use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dims, Volume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl WindowSpec {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Result<Self> {
        let w = Self {
            name: name.into(),
            lo,
            hi,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "window {:?} needs finite lo < hi, got ({}, {})",
                self.name, self.lo, self.hi
            )))
        }
    }
}

/// Linear window with clamping: `clamp((x - lo) / (hi - lo), 0, 1)`.
#[inline]
pub fn apply_window(x_hu: f32, window: &WindowSpec) -> f32 {
    ((f64::from(x_hu) - window.lo) / (window.hi - window.lo)).clamp(0.0, 1.0) as f32
}

/// The four clinical windows, in channel order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WindowBank(Vec<WindowSpec>);

impl WindowBank {
    pub const CHANNELS: usize = 4;

    pub fn new(windows: Vec<WindowSpec>) -> Result<Self> {
        let bank = Self(windows);
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.len() != Self::CHANNELS {
            return Err(Error::InvalidArgument(format!(
                "window bank needs {} windows, got {}",
                Self::CHANNELS,
                self.0.len()
            )));
        }
        self.0.iter().try_for_each(WindowSpec::validate)
    }

    pub fn windows(&self) -> &[WindowSpec] {
        &self.0
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.0.iter().map(|w| w.name.clone()).collect()
    }

    pub fn calcification(&self) -> &WindowSpec {
        &self.0[3]
    }
}

impl Default for WindowBank {
    /// Fat (-100, 140), soft tissue (50, 400), angiographic (350, 700),
    /// calcification (500, 2000).
    fn default() -> Self {
        Self(vec![
            WindowSpec { name: "fat".into(), lo: -100.0, hi: 140.0 },
            WindowSpec { name: "soft_tissue".into(), lo: 50.0, hi: 400.0 },
            WindowSpec { name: "angiographic".into(), lo: 350.0, hi: 700.0 },
            WindowSpec { name: "calcification".into(), lo: 500.0, hi: 2000.0 },
        ])
    }
}

/// Four windowed channels, stored channel-major (`4 * nx * ny * nz`).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelPatch {
    pub dims: Dims,
    pub data: Vec<f32>,
}

impl MultiChannelPatch {
    pub fn channel_len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn channel(&self, k: usize) -> &[f32] {
        let n = self.channel_len();
        &self.data[k * n..(k + 1) * n]
    }
}

pub fn apply_window_bank(patch: &Volume, bank: &WindowBank) -> MultiChannelPatch {
    let mut data = Vec::with_capacity(WindowBank::CHANNELS * patch.len());
    for w in bank.windows() {
        data.extend(patch.voxels.iter().map(|&x| apply_window(x, w)));
    }
    MultiChannelPatch {
        dims: patch.dims,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fat() -> WindowSpec {
        WindowBank::default().windows()[0].clone()
    }

    #[test]
    fn fat_window_examples() {
        assert_eq!(apply_window(-100.0, &fat()), 0.0);
        assert_eq!(apply_window(140.0, &fat()), 1.0);
        assert_eq!(apply_window(20.0, &fat()), 0.5);
    }

    #[test]
    fn bank_constants() {
        let bank = WindowBank::default();
        let at = |hu: f32| {
            let p = Volume::filled([2, 2, 2], [1.0; 3], hu).unwrap();
            let m = apply_window_bank(&p, &bank);
            (0..4).map(|k| m.channel(k)[0]).collect::<Vec<_>>()
        };
        assert_eq!(at(0.0), vec![(100.0f64 / 240.0) as f32, 0.0, 0.0, 0.0]);
        assert!((at(0.0)[0] - 0.4167).abs() < 1e-4);
        assert_eq!(at(2000.0), vec![1.0; 4]);
        assert_eq!(at(-1024.0), vec![0.0; 4]);
    }

    #[test]
    fn bank_must_have_four_ordered_windows() {
        let mut ws = WindowBank::default().windows().to_vec();
        ws.pop();
        assert!(WindowBank::new(ws).is_err());
        assert!(WindowSpec::new("bad", 10.0, 10.0).is_err());
        assert_eq!(
            WindowBank::default().channel_names(),
            ["fat", "soft_tissue", "angiographic", "calcification"]
        );
    }

    proptest! {
        #[test]
        fn window_is_monotone_and_lipschitz(a in -1e6f32..1e6, b in -1e6f32..1e6) {
            let w = fat();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (wl, wh) = (apply_window(lo, &w), apply_window(hi, &w));
            prop_assert!(wl <= wh);
            let scaled = f64::from(wh - wl) * (w.hi - w.lo);
            prop_assert!(scaled <= f64::from(hi) - f64::from(lo) + 1e-3 * (w.hi - w.lo));
        }

        #[test]
        fn bank_output_in_unit_interval(xs in proptest::collection::vec(-1e6f32..1e6, 8)) {
            let p = Volume::new([2, 2, 2], [1.0; 3], xs).unwrap();
            let m = apply_window_bank(&p, &WindowBank::default());
            prop_assert!(m.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
