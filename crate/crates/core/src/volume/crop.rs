use super::{check_dims, Grid, Voxel};
use crate::error::{Error, Result};

/// Extracts `size` voxels starting at `origin` (which may lie outside the
/// grid). Out-of-bounds voxels take `T::FILL`: air for HU, 0 for masks.
pub fn crop<T: Voxel>(grid: &Grid<T>, origin: [i64; 3], size: [usize; 3]) -> Result<Grid<T>> {
    if size.contains(&0) {
        return Err(Error::InvalidArgument(format!("zero-size crop {size:?}")));
    }
    let n = check_dims(size)?;
    let mut voxels = Vec::with_capacity(n);
    for z in 0..size[2] as i64 {
        for y in 0..size[1] as i64 {
            let (sy, sz) = (origin[1] + y, origin[2] + z);
            let row_inside = sy >= 0
                && sz >= 0
                && (sy as usize) < grid.dims[1]
                && (sz as usize) < grid.dims[2];
            if !row_inside {
                voxels.extend(std::iter::repeat_n(T::FILL, size[0]));
                continue;
            }
            for x in 0..size[0] as i64 {
                voxels.push(grid.get_or_fill(origin[0] + x, sy, sz));
            }
        }
    }
    Ok(Grid {
        dims: size,
        spacing: grid.spacing,
        voxels,
    })
}
