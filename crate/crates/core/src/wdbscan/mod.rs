//! Intensity-weighted DBSCAN on the regular voxel lattice.
//!
//! A voxel's density is the summed weight of its closed lattice neighborhood
//! (itself plus every in-bounds stencil neighbor). Weights are 1 below the
//! threshold and `intensity / threshold` at or above it, so a handful of very
//! bright voxels can be as dense as a broad patch of faint ones. Masked (NaN)
//! voxels weigh nothing and are never core or border.
//!
//! Results are fixed by three order-free rules: clusters are the connected
//! components of the core graph, a border voxel joins the cluster of its
//! lowest-index core neighbor, and provisional cluster ids are one plus the
//! lowest core index of the component.

mod labels;
mod stencil;
mod union_find;

use rayon::prelude::*;

pub use labels::{load_labels, read_labels, save_labels, write_labels, LabelVolume, VXL1_MAGIC};
pub use stencil::{build_stencil, Stencil, EPS_SLACK};

use crate::error::{Error, Result};
use crate::volume::VoxelGrid;
use union_find::MinRootSets;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WdbscanParams {
    /// Neighborhood radius in index units.
    pub eps: f64,
    /// Weighted density a voxel needs to be core.
    pub min_pts: f64,
    /// Intensity at which weights start growing above 1.
    pub threshold: f64,
}

impl WdbscanParams {
    pub fn new(eps: f64, min_pts: f64, threshold: f64) -> Result<Self> {
        let params = WdbscanParams { eps, min_pts, threshold };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.eps) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {}", self.eps)));
        }
        if !positive(self.min_pts) {
            return Err(Error::InvalidParameter(format!("min_pts must be positive, got {}", self.min_pts)));
        }
        if !positive(self.threshold) {
            return Err(Error::InvalidParameter(format!("threshold must be positive, got {}", self.threshold)));
        }
        Ok(())
    }

    pub fn stencil(&self) -> Stencil {
        build_stencil(self.eps)
    }
}

#[inline]
pub fn weight(intensity: f32, threshold: f64) -> f64 {
    if intensity.is_nan() {
        return 0.0;
    }
    let i = intensity as f64;
    if i < threshold {
        1.0
    } else {
        i / threshold
    }
}

/// In-bounds neighbor list for one `(i1, i2)` row: `(d3, row start)` pairs in
/// stencil order.
fn row_neighbors(dims: [usize; 3], row: usize, offsets: &[[i32; 3]], out: &mut Vec<(i64, usize)>) {
    out.clear();
    let (i1, i2) = ((row / dims[1]) as i64, (row % dims[1]) as i64);
    for &[d1, d2, d3] in offsets {
        let (j1, j2) = (i1 + d1 as i64, i2 + d2 as i64);
        if (0..dims[0] as i64).contains(&j1) && (0..dims[1] as i64).contains(&j2) {
            out.push((d3 as i64, (j1 as usize * dims[1] + j2 as usize) * dims[2]));
        }
    }
}

/// Closed-neighborhood weight sums, summed in ascending neighbor index order.
pub fn density(grid: &VoxelGrid, params: &WdbscanParams) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    fill_rows(grid, params, &mut out, |sum, _| sum);
    out
}

pub fn classify_cores(grid: &VoxelGrid, params: &WdbscanParams) -> Vec<bool> {
    let mut out = vec![false; grid.len()];
    let min_pts = params.min_pts;
    fill_rows(grid, params, &mut out, |sum, own| sum >= min_pts && !own.is_nan());
    out
}

fn fill_rows<T: Send>(grid: &VoxelGrid, params: &WdbscanParams, out: &mut [T], map: impl Fn(f64, f32) -> T + Sync) {
    let dims = grid.dims();
    let n3 = dims[2] as i64;
    let closed = params.stencil().closed();
    let data = grid.data();
    let threshold = params.threshold;
    out.par_chunks_mut(dims[2]).enumerate().for_each_init(Vec::new, |nbrs, (row, slot)| {
        row_neighbors(dims, row, &closed, nbrs);
        for (i3, cell) in slot.iter_mut().enumerate() {
            let mut sum = 0.0;
            for &(d3, start) in nbrs.iter() {
                let j3 = i3 as i64 + d3;
                if (0..n3).contains(&j3) {
                    sum += weight(data[start + j3 as usize], threshold);
                }
            }
            *cell = map(sum, data[row * dims[2] + i3]);
        }
    });
}

/// Clusters the grid. Labels are provisional: 0 for noise, otherwise one plus
/// the smallest linear index among the cluster's core voxels.
pub fn cluster(grid: &VoxelGrid, params: &WdbscanParams) -> Result<LabelVolume> {
    params.validate()?;
    let n = grid.len();
    if n >= u32::MAX as usize {
        return Err(Error::InvalidParameter(format!("{n} voxels exceed the 32-bit label space")));
    }
    let cores = classify_cores(grid, params);
    let dims = grid.dims();
    let stencil = params.stencil();
    let n3 = dims[2] as i64;
    let rows = dims[0] * dims[1];
    let mut nbrs = Vec::new();

    let mut sets = MinRootSets::new(n);
    for row in 0..rows {
        row_neighbors(dims, row, stencil.forward(), &mut nbrs);
        let base = row * dims[2];
        for i3 in 0..dims[2] {
            let p = base + i3;
            if !cores[p] {
                continue;
            }
            for &(d3, start) in &nbrs {
                let j3 = i3 as i64 + d3;
                if (0..n3).contains(&j3) && cores[start + j3 as usize] {
                    sets.union(p as u32, (start + j3 as usize) as u32);
                }
            }
        }
    }
    sets.flatten((0..n).filter(|&p| cores[p]));
    let mut labels = sets.into_parents();
    for (label, &core) in labels.iter_mut().zip(&cores) {
        if core {
            *label += 1;
        }
    }

    // Non-core voxels: label of the lowest-index core neighbor, else noise.
    // Core entries are final above and only read here.
    for row in 0..rows {
        row_neighbors(dims, row, stencil.offsets(), &mut nbrs);
        let base = row * dims[2];
        for i3 in 0..dims[2] {
            let p = base + i3;
            if cores[p] {
                continue;
            }
            let mut label = 0;
            if !grid.data()[p].is_nan() {
                for &(d3, start) in &nbrs {
                    let j3 = i3 as i64 + d3;
                    if (0..n3).contains(&j3) && cores[start + j3 as usize] {
                        label = labels[start + j3 as usize];
                        break;
                    }
                }
            }
            labels[p] = label;
        }
    }
    LabelVolume::new(dims, labels)
}
