//! Deterministic synthetic volumes with known ground truth.
//!
//! Each voxel's intensity is the sum of analytic primitive profiles evaluated
//! at its Q position, plus exponential background noise with mean
//! `noise_floor`. The noise for voxel `p` is drawn from ChaCha8 keyed by the
//! seed (little-endian in the first 8 key bytes, remaining key bytes zero,
//! stream 0) at 64-bit word position `p`: with `x` that word, `u = (x >> 11) *
//! 2^-53` and the noise is `-noise_floor * ln(1 - u)`. Evaluation order does
//! not matter, so volumes are identical for any thread count.
//!
//! Primitive contributions are summed in ascending order of value, which
//! makes the sum independent of how primitives are listed; a mirror-symmetric
//! primitive set therefore yields an exactly mirror-symmetric volume.

mod config;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

pub use config::{format_spec, load_spec, parse_spec};

use crate::error::{Error, Result};
use crate::volume::{AxisSpec, VoxelGrid};
use crate::wdbscan::LabelVolume;

#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// Anisotropic Gaussian blob.
    GaussianPeak { center: [f64; 3], sigma: [f64; 3], amplitude: f64 },
    /// Double cone (both nappes) around `axis` through `apex`, with a
    /// Gaussian wall profile of width `thickness`, cut at `extent` along the
    /// axis.
    ConeShell { apex: [f64; 3], axis: [f64; 3], half_angle_deg: f64, thickness: f64, extent: f64, amplitude: f64 },
    /// Cylinder of Gaussian cross-section, `length` long, centered on `center`.
    Bar { center: [f64; 3], axis: [f64; 3], length: f64, radius: f64, amplitude: f64 },
    /// Streak starting at `base` along `direction`, with Gaussian
    /// cross-section widening from `width` at the base by `spread` per unit
    /// length.
    Broomstick { base: [f64; 3], direction: [f64; 3], length: f64, spread: f64, width: f64, amplitude: f64 },
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = dot(v, v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Axial coordinate and squared radial distance of `d` relative to unit `axis`.
fn axial(d: [f64; 3], axis: [f64; 3]) -> (f64, f64) {
    let t = dot(d, axis);
    (t, (dot(d, d) - t * t).max(0.0))
}

impl Primitive {
    pub fn kind(&self) -> &'static str {
        match self {
            Primitive::GaussianPeak { .. } => "gaussian_peak",
            Primitive::ConeShell { .. } => "cone_shell",
            Primitive::Bar { .. } => "bar",
            Primitive::Broomstick { .. } => "broomstick",
        }
    }

    fn anchor(&self) -> [f64; 3] {
        match *self {
            Primitive::GaussianPeak { center, .. } | Primitive::Bar { center, .. } => center,
            Primitive::ConeShell { apex, .. } => apex,
            Primitive::Broomstick { base, .. } => base,
        }
    }

    fn amplitude(&self) -> f64 {
        match *self {
            Primitive::GaussianPeak { amplitude, .. }
            | Primitive::ConeShell { amplitude, .. }
            | Primitive::Bar { amplitude, .. }
            | Primitive::Broomstick { amplitude, .. } => amplitude,
        }
    }

    fn validate(&self, axes: &[AxisSpec; 3]) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(format!("{}: {msg}", self.kind())));
        let anchor = self.anchor();
        for k in 0..3 {
            if !(anchor[k] >= axes[k].q_min && anchor[k] <= axes[k].q_max) {
                return Err(Error::OutOfRange { q: anchor[k], lo: axes[k].q_min, hi: axes[k].q_max });
            }
        }
        if !(self.amplitude() >= 0.0 && self.amplitude().is_finite()) {
            return bad(format!("amplitude must be non-negative, got {}", self.amplitude()));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let nonzero = |v: [f64; 3]| v.iter().all(|c| c.is_finite()) && dot(v, v) > 0.0;
        match *self {
            Primitive::GaussianPeak { sigma, .. } => {
                if !sigma.iter().all(|&s| positive(s)) {
                    return bad(format!("sigma must be positive, got {sigma:?}"));
                }
            }
            Primitive::ConeShell { axis, half_angle_deg, thickness, extent, .. } => {
                if !nonzero(axis) {
                    return bad("axis must be non-zero".into());
                }
                if !(half_angle_deg > 0.0 && half_angle_deg < 90.0) {
                    return bad(format!("half_angle_deg must be in (0, 90), got {half_angle_deg}"));
                }
                if !(positive(thickness) && positive(extent)) {
                    return bad("thickness and extent must be positive".into());
                }
            }
            Primitive::Bar { axis, length, radius, .. } => {
                if !nonzero(axis) {
                    return bad("axis must be non-zero".into());
                }
                if !(positive(length) && positive(radius)) {
                    return bad("length and radius must be positive".into());
                }
            }
            Primitive::Broomstick { direction, length, spread, width, .. } => {
                if !nonzero(direction) {
                    return bad("direction must be non-zero".into());
                }
                if !(positive(length) && positive(width) && spread >= 0.0 && spread.is_finite()) {
                    return bad("length and width must be positive, spread non-negative".into());
                }
            }
        }
        Ok(())
    }

    /// Noiseless contribution at physical position `q`.
    pub fn eval(&self, q: [f64; 3]) -> f64 {
        match *self {
            Primitive::GaussianPeak { center, sigma, amplitude } => {
                let z = [0, 1, 2].map(|k| (q[k] - center[k]) / sigma[k]);
                amplitude * (-0.5 * dot(z, z)).exp()
            }
            Primitive::ConeShell { apex, axis, half_angle_deg, thickness, extent, amplitude } => {
                let (t, r2) = axial(sub(q, apex), unit(axis));
                if t.abs() > extent {
                    return 0.0;
                }
                let angle = half_angle_deg.to_radians();
                let dist = (r2.sqrt() * angle.cos() - t.abs() * angle.sin()) / thickness;
                amplitude * (-0.5 * dist * dist).exp()
            }
            Primitive::Bar { center, axis, length, radius, amplitude } => {
                let (t, r2) = axial(sub(q, center), unit(axis));
                if t.abs() > 0.5 * length {
                    return 0.0;
                }
                amplitude * (-0.5 * r2 / (radius * radius)).exp()
            }
            Primitive::Broomstick { base, direction, length, spread, width, amplitude } => {
                let (t, r2) = axial(sub(q, base), unit(direction));
                if !(0.0..=length).contains(&t) {
                    return 0.0;
                }
                let s = width + spread * t;
                amplitude * (-0.5 * r2 / (s * s)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub axes: [AxisSpec; 3],
    pub noise_floor: f64,
    pub seed: u64,
    pub primitives: Vec<Primitive>,
}

impl SynthSpec {
    pub fn dims(&self) -> [usize; 3] {
        self.axes.map(|a| a.n)
    }

    pub fn validate(&self) -> Result<()> {
        for axis in &self.axes {
            axis.validate()?;
        }
        if !(self.noise_floor >= 0.0 && self.noise_floor.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise_floor must be non-negative, got {}", self.noise_floor)));
        }
        for p in &self.primitives {
            p.validate(&self.axes)?;
        }
        Ok(())
    }
}

/// Counter-based background noise sample for voxel `linear`.
pub fn noise_sample(seed: u64, noise_floor: f64, linear: u64) -> f64 {
    let mut rng = noise_rng(seed);
    rng.set_word_pos(2 * linear as u128);
    exponential(rng.next_u64(), noise_floor)
}

fn noise_rng(seed: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[inline]
fn exponential(x: u64, mean: f64) -> f64 {
    let u = (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    -mean * (-u).ln_1p()
}

/// Ground-truth masks: voxels where a primitive's own contribution exceeds
/// the noise floor. Evaluated on demand from the spec.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    spec: SynthSpec,
}

impl GroundTruth {
    pub fn primitives(&self) -> &[Primitive] {
        &self.spec.primitives
    }

    pub fn mask(&self, k: usize) -> Vec<bool> {
        let prim = &self.spec.primitives[k];
        let floor = self.spec.noise_floor;
        map_voxels(&self.spec.axes, |q| prim.eval(q) > floor)
    }

    /// Mask `k` as a label volume carrying primitive id `k + 1`.
    pub fn mask_labels(&self, k: usize) -> LabelVolume {
        let id = k as u32 + 1;
        let labels = self.mask(k).into_iter().map(|m| if m { id } else { 0 }).collect();
        LabelVolume::new(self.spec.dims(), labels).expect("mask matches grid dims")
    }

    /// Intensity without the noise term.
    pub fn noiseless(&self) -> Vec<f64> {
        map_voxels(&self.spec.axes, |q| sum_contributions(&self.spec.primitives, q, &mut Vec::new()))
    }
}

fn map_voxels<T: Send + Default + Clone>(axes: &[AxisSpec; 3], f: impl Fn([f64; 3]) -> T + Sync) -> Vec<T> {
    let dims = axes.map(|a| a.n);
    let mut out = vec![T::default(); dims.iter().product()];
    out.par_chunks_mut(dims[2]).enumerate().for_each(|(row, slot)| {
        let (q1, q2) = (axes[0].index_to_q(row / dims[1]), axes[1].index_to_q(row % dims[1]));
        for (i3, cell) in slot.iter_mut().enumerate() {
            *cell = f([q1, q2, axes[2].index_to_q(i3)]);
        }
    });
    out
}

fn sum_contributions(primitives: &[Primitive], q: [f64; 3], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(primitives.iter().map(|p| p.eval(q)));
    scratch.sort_unstable_by(f64::total_cmp);
    scratch.iter().fold(0.0, |acc, v| acc + v)
}

pub fn generate(spec: &SynthSpec) -> Result<(VoxelGrid, GroundTruth)> {
    spec.validate()?;
    let axes = spec.axes;
    let dims = spec.dims();
    let n = crate::volume::voxel_count(dims)?;
    let mut data = vec![0f32; n];
    let base_rng = noise_rng(spec.seed);
    data.par_chunks_mut(dims[2]).enumerate().for_each_init(
        || (base_rng.clone(), Vec::new()),
        |(rng, scratch), (row, slot)| {
            let (q1, q2) = (axes[0].index_to_q(row / dims[1]), axes[1].index_to_q(row % dims[1]));
            if spec.noise_floor > 0.0 {
                rng.set_word_pos(2 * (row * dims[2]) as u128);
            }
            for (i3, cell) in slot.iter_mut().enumerate() {
                let mut value = sum_contributions(&spec.primitives, [q1, q2, axes[2].index_to_q(i3)], scratch);
                if spec.noise_floor > 0.0 {
                    value += exponential(rng.next_u64(), spec.noise_floor);
                }
                *cell = value as f32;
            }
        },
    );
    let grid = VoxelGrid::new(axes, data)?;
    Ok((grid, GroundTruth { spec: spec.clone() }))
}
