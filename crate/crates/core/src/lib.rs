//! Feature extraction from gridded 3D scattering intensity volumes with an
//! intensity-weighted DBSCAN.
//!
//! The usual pipeline: load a [`volume::VoxelGrid`], derive a weight threshold
//! from its median ([`stats`]), cluster it ([`wdbscan::cluster`]), rank the
//! clusters by size ([`features::rank_clusters`]), then select and
//! characterize individual features ([`features::select`],
//! [`features::characterize`]). [`synth`] builds test volumes with known
//! ground truth.

pub mod cli;
pub mod error;
pub mod features;
pub mod stats;
pub mod synth;
pub mod volume;
pub mod wdbscan;

pub use error::{Error, Result};
