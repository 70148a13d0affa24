use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{read_dims, read_payload, voxel_count, write_dims};

pub const VXL1_MAGIC: &[u8; 4] = b"VXL1";

/// Per-voxel cluster ids in the grid's linear layout; 0 is noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVolume {
    dims: [usize; 3],
    labels: Vec<u32>,
}

impl LabelVolume {
    pub fn new(dims: [usize; 3], labels: Vec<u32>) -> Result<Self> {
        let expected = voxel_count(dims)?;
        if labels.len() != expected {
            return Err(Error::Corrupt(format!("expected {expected} labels, got {}", labels.len())));
        }
        Ok(LabelVolume { dims, labels })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub(crate) fn labels_mut(&mut self) -> &mut [u32] {
        &mut self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }
}

pub fn write_labels<W: Write + ?Sized>(labels: &LabelVolume, w: &mut W) -> Result<()> {
    write_dims(w, VXL1_MAGIC, labels.dims)?;
    let mut buf = Vec::with_capacity(1 << 18);
    for chunk in labels.labels.chunks(1 << 16) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_labels<R: Read>(r: &mut R) -> Result<LabelVolume> {
    let dims = read_dims(r, VXL1_MAGIC)?;
    let n = voxel_count(dims)?;
    let labels = read_payload(r, n, u32::from_le_bytes)?;
    LabelVolume::new(dims, labels)
}

pub fn save_labels(labels: &LabelVolume, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_labels(labels, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    read_labels(&mut BufReader::new(File::open(path)?))
}
