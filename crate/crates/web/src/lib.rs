//! Browser bindings: synthesize a small paper-like volume, cluster it with
//! adjustable parameters, and render slices and the size-vs-rank curve.

use voxclust::features::{self, ClusterTable};
use voxclust::synth;
use voxclust::volume::{AxisSpec, VoxelGrid};
use voxclust::wdbscan::{self, build_stencil, LabelVolume, WdbscanParams};
use voxclust::{stats, Error};
use wasm_bindgen::prelude::*;

const PRESET: &str = include_str!("../../core/presets/paper-like-101.synth");

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Number of neighbor offsets within `eps`; 0 outside (0, 32].
#[wasm_bindgen]
pub fn stencil_size(eps: f64) -> usize {
    if eps > 0.0 && eps <= 32.0 {
        build_stencil(eps).len()
    } else {
        0
    }
}

#[wasm_bindgen]
pub struct Demo {
    grid: VoxelGrid,
    median: f64,
    log_range: (f32, f32),
    clustered: Option<(ClusterTable, LabelVolume)>,
}

impl Demo {
    /// The bundled preset resampled to `points` per axis.
    pub fn build(points: usize, seed: u32) -> voxclust::Result<Demo> {
        let mut spec = synth::parse_spec(PRESET)?;
        for axis in spec.axes.iter_mut() {
            *axis = AxisSpec::new(axis.q_min, axis.q_max, points)?;
        }
        spec.seed = seed as u64;
        let (grid, _) = synth::generate(&spec)?;
        let median = stats::median(grid.data()).ok_or(Error::EmptyData)?;
        let logs = grid.data().iter().filter(|v| **v > 0.0).map(|v| v.log10());
        let log_range = logs.fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Ok(Demo { grid, median, log_range, clustered: None })
    }

    pub fn run(&mut self, eps: f64, min_pts: f64, threshold_frac: f64) -> voxclust::Result<u32> {
        let params = WdbscanParams::new(eps, min_pts, threshold_frac * self.median)?;
        let raw = wdbscan::cluster(&self.grid, &params)?;
        let (table, labels) = features::rank_clusters(raw, &self.grid)?;
        let n = table.max_rank();
        self.clustered = Some((table, labels));
        Ok(n)
    }

    fn shade(&self, v: f32) -> u8 {
        let (lo, hi) = self.log_range;
        if !(v > 0.0) || hi <= lo {
            return 0;
        }
        (((v.log10() - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0) as u8
    }
}

/// Distinct, stable color for a cluster rank.
fn rank_color(rank: u32) -> [u8; 3] {
    let h = rank.wrapping_mul(0x9E37_79B9);
    [64 + (h >> 24) as u8 % 192, 64 + (h >> 16) as u8 % 192, 64 + (h >> 8) as u8 % 192]
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(points: usize, seed: u32) -> Result<Demo, JsError> {
        Demo::build(points, seed).map_err(js)
    }

    pub fn dims(&self) -> Vec<u32> {
        self.grid.dims().iter().map(|&n| n as u32).collect()
    }

    pub fn median(&self) -> f64 {
        self.median
    }

    /// Clusters and ranks; returns the number of clusters.
    pub fn cluster(&mut self, eps: f64, min_pts: f64, threshold_frac: f64) -> Result<u32, JsError> {
        self.run(eps, min_pts, threshold_frac).map_err(js)
    }

    /// Cluster sizes in rank order.
    pub fn sizes(&self) -> Vec<f64> {
        self.clustered.as_ref().map_or_else(Vec::new, |(t, _)| t.sizes().map(|s| s as f64).collect())
    }

    pub fn noise(&self) -> f64 {
        self.clustered.as_ref().map_or(0.0, |(t, _)| t.noise_count as f64)
    }

    /// RGBA pixels of the slice `index` across `axis`. Rows run along the
    /// first remaining axis, columns along the second. With `labels`,
    /// clustered voxels are tinted by rank.
    pub fn slice(&self, axis: usize, index: usize, labels: bool) -> Vec<u8> {
        let dims = self.grid.dims();
        let axis = axis.min(2);
        let index = index.min(dims[axis] - 1);
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let ranks = self.clustered.as_ref().filter(|_| labels).map(|(_, l)| l.labels());
        let mut out = Vec::with_capacity(dims[a] * dims[b] * 4);
        for i in 0..dims[a] {
            for j in 0..dims[b] {
                let mut idx = [0; 3];
                idx[axis] = index;
                idx[a] = i;
                idx[b] = j;
                let lin = (idx[0] * dims[1] + idx[1]) * dims[2] + idx[2];
                let g = self.shade(self.grid.data()[lin]);
                let rgb = match ranks.map(|r| r[lin]) {
                    Some(r) if r > 0 => rank_color(r).map(|c| ((c as u16 * (64 + g as u16 * 3 / 4)) >> 8) as u8),
                    Some(_) => [g / 3, g / 3, g / 3],
                    None => [g, (g as u16 * 3 / 4) as u8, g / 3],
                };
                out.extend_from_slice(&[rgb[0], rgb[1], rgb[2], 255]);
            }
        }
        out
    }
}
