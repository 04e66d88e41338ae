//! Topology-preserving 3D thinning.
//!
//! Foreground uses 26-connectivity and background 6-connectivity. Each pass
//! sweeps the six face directions in a fixed order; in a sweep, border
//! voxels (background neighbour in that direction) that are simple points
//! and not curve endpoints are collected, then deleted one at a time after
//! re-checking against the current image. Thinning stops after a full pass
//! deletes nothing.

use crate::volume::MaskVolume;

const DIRECTIONS: [[i64; 3]; 6] = [
    [0, 0, -1],
    [0, 0, 1],
    [0, -1, 0],
    [0, 1, 0],
    [-1, 0, 0],
    [1, 0, 0],
];

/// Index of offset `(dx, dy, dz)` in a 3x3x3 neighbourhood.
const fn nb(dx: i64, dy: i64, dz: i64) -> usize {
    ((dx + 1) + 3 * (dy + 1) + 9 * (dz + 1)) as usize
}

const CENTRE: usize = 13;

fn offset_of(i: usize) -> [i64; 3] {
    [(i % 3) as i64 - 1, ((i / 3) % 3) as i64 - 1, (i / 9) as i64 - 1]
}

/// Adjacency tables within the neighbourhood, centre excluded.
struct Tables {
    /// 26-adjacency among the 26 neighbours.
    adj26: Vec<Vec<usize>>,
    /// 6-adjacency among the 18-neighbourhood.
    adj6_n18: Vec<Vec<usize>>,
    is_n18: [bool; 27],
    is_n6: [bool; 27],
}

impl Tables {
    fn new() -> Self {
        let mut is_n18 = [false; 27];
        let mut is_n6 = [false; 27];
        for i in 0..27 {
            let l1: i64 = offset_of(i).iter().map(|c| c.abs()).sum();
            is_n18[i] = i != CENTRE && l1 <= 2;
            is_n6[i] = l1 == 1;
        }
        let mut adj26 = vec![Vec::new(); 27];
        let mut adj6_n18 = vec![Vec::new(); 27];
        for i in 0..27 {
            for j in 0..27 {
                if i == j || i == CENTRE || j == CENTRE {
                    continue;
                }
                let (a, b) = (offset_of(i), offset_of(j));
                let d: Vec<i64> = (0..3).map(|k| (a[k] - b[k]).abs()).collect();
                if d.iter().all(|&c| c <= 1) {
                    adj26[i].push(j);
                }
                if is_n18[i] && is_n18[j] && d.iter().sum::<i64>() == 1 {
                    adj6_n18[i].push(j);
                }
            }
        }
        Self {
            adj26,
            adj6_n18,
            is_n18,
            is_n6,
        }
    }

    /// Number of 26-components of foreground in N26 minus the centre.
    fn foreground_components(&self, n: &[bool; 27]) -> usize {
        let mut seen = [false; 27];
        let mut count = 0;
        let mut stack = Vec::with_capacity(26);
        for s in 0..27 {
            if s == CENTRE || !n[s] || seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(i) = stack.pop() {
                for &j in &self.adj26[i] {
                    if n[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }

    /// Number of 6-components of background in N18 minus the centre that
    /// touch a face neighbour of the centre.
    fn background_components(&self, n: &[bool; 27]) -> usize {
        let mut seen = [false; 27];
        let mut count = 0;
        let mut stack = Vec::with_capacity(18);
        for s in 0..27 {
            if !self.is_n6[s] || n[s] || seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(i) = stack.pop() {
                for &j in &self.adj6_n18[i] {
                    if self.is_n18[j] && !n[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        count
    }

    fn is_simple(&self, n: &[bool; 27]) -> bool {
        self.foreground_components(n) == 1 && self.background_components(n) == 1
    }
}

fn neighbourhood(m: &MaskVolume, x: i64, y: i64, z: i64) -> [bool; 27] {
    let mut n = [false; 27];
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                n[nb(dx, dy, dz)] = m.get_or_fill(x + dx, y + dy, z + dz) != 0;
            }
        }
    }
    n
}

fn neighbour_count(n: &[bool; 27]) -> usize {
    n.iter().enumerate().filter(|&(i, &v)| v && i != CENTRE).count()
}

fn deletable(t: &Tables, m: &MaskVolume, p: [i64; 3]) -> bool {
    let n = neighbourhood(m, p[0], p[1], p[2]);
    neighbour_count(&n) != 1 && t.is_simple(&n)
}

/// Returns the curve skeleton of `mask`, a subset of it with the same
/// 26-connected components.
pub fn skeletonize3d(mask: &MaskVolume) -> MaskVolume {
    let tables = Tables::new();
    let mut m = mask.clone();
    for v in &mut m.voxels {
        *v = u8::from(*v != 0);
    }
    let mut alive = m.foreground();
    loop {
        let mut deleted = 0usize;
        for dir in DIRECTIONS {
            let candidates: Vec<usize> = alive
                .iter()
                .copied()
                .filter(|&i| {
                    if m.voxels[i] == 0 {
                        return false;
                    }
                    let c = m.coords(i).map(|v| v as i64);
                    m.get_or_fill(c[0] + dir[0], c[1] + dir[1], c[2] + dir[2]) == 0
                        && deletable(&tables, &m, c)
                })
                .collect();
            for i in candidates {
                let c = m.coords(i).map(|v| v as i64);
                if deletable(&tables, &m, c) {
                    m.voxels[i] = 0;
                    deleted += 1;
                }
            }
        }
        if deleted == 0 {
            break;
        }
        alive.retain(|&i| m.voxels[i] != 0);
    }
    m
}
