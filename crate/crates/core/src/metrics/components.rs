//! Connected-component labelling on voxel masks.

use serde::{Deserialize, Serialize};

use crate::volume::{Dims, MaskVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    Six,
    Eighteen,
    #[default]
    TwentySix,
}

impl Connectivity {
    /// Neighbour offsets (excluding the centre) for this connectivity.
    pub fn offsets(self) -> Vec<[i64; 3]> {
        let max_l1 = match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        };
        let mut out = Vec::new();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let l1 = dx.abs() + dy.abs() + dz.abs();
                    if l1 > 0 && l1 <= max_l1 {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// Component labels: 0 is background, components are `1..=count`, numbered
/// in order of their smallest linear voxel index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    pub dims: Dims,
    pub labels: Vec<u32>,
    pub count: usize,
    /// Voxel count of component `k` at index `k - 1`.
    pub sizes: Vec<usize>,
}

impl Labels {
    /// Linear voxel indices of every component, ascending within each.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push(i);
            }
        }
        out
    }
}

pub fn connected_components(mask: &MaskVolume, connectivity: Connectivity) -> Labels {
    label_grid(mask.dims, &mask.voxels, connectivity)
}

pub(crate) fn label_grid(dims: Dims, voxels: &[u8], connectivity: Connectivity) -> Labels {
    let [nx, ny, nz] = dims;
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; voxels.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..voxels.len() {
        if voxels[seed] == 0 || labels[seed] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        labels[seed] = id;
        stack.push(seed);
        let mut size = 0usize;
        while let Some(i) = stack.pop() {
            size += 1;
            let x = (i % nx) as i64;
            let y = ((i / nx) % ny) as i64;
            let z = (i / (nx * ny)) as i64;
            for &[dx, dy, dz] in &offsets {
                let (qx, qy, qz) = (x + dx, y + dy, z + dz);
                if qx < 0 || qy < 0 || qz < 0 || qx >= nx as i64 || qy >= ny as i64 || qz >= nz as i64 {
                    continue;
                }
                let j = qx as usize + nx * (qy as usize + ny * qz as usize);
                if voxels[j] != 0 && labels[j] == 0 {
                    labels[j] = id;
                    stack.push(j);
                }
            }
        }
        sizes.push(size);
    }
    Labels {
        dims,
        count: sizes.len(),
        labels,
        sizes,
    }
}
