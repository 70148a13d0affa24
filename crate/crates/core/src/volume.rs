//! Dense 3D intensity volumes on a regular reciprocal-space grid, and the
//! `VXG1` binary container.
//!
//! Voxel `(i1, i2, i3)` lives at linear index `(i1 * n2 + i2) * n3 + i3`, so a
//! scan along the third axis is contiguous in memory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const VXG1_MAGIC: &[u8; 4] = b"VXG1";
pub const FORMAT_VERSION: u16 = 1;

/// Offsets closer than this to a half-integer are treated as exact ties.
const TIE_EPS: f64 = 1e-9;

/// One axis of the grid: `n` evenly spaced points covering `[q_min, q_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub n: usize,
}

impl AxisSpec {
    pub fn new(q_min: f64, q_max: f64, n: usize) -> Result<Self> {
        let axis = AxisSpec { q_min, q_max, n };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidHeader(format!("axis needs at least 2 points, got {}", self.n)));
        }
        if !(self.q_min.is_finite() && self.q_max.is_finite()) || self.q_min >= self.q_max {
            return Err(Error::InvalidHeader(format!(
                "axis range [{}, {}] is empty or not finite",
                self.q_min, self.q_max
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        (self.q_max - self.q_min) / (self.n - 1) as f64
    }

    /// Physical coordinate of grid point `i`.
    ///
    /// Evaluated as a weighted blend of the endpoints, which hits both
    /// endpoints exactly and makes `index_to_q(n - 1 - i) == -index_to_q(i)`
    /// bit-for-bit on symmetric axes.
    #[inline]
    pub fn index_to_q(&self, i: usize) -> f64 {
        let last = (self.n - 1) as f64;
        let i = i as f64;
        (self.q_min * (last - i) + self.q_max * i) / last
    }

    /// Nearest grid index to `q`, ties rounding up.
    pub fn q_to_index(&self, q: f64) -> Result<usize> {
        let offset = (q - self.q_min) / self.spacing();
        let last = (self.n - 1) as f64;
        if !(offset >= -0.5 - TIE_EPS && offset <= last + 0.5 + TIE_EPS) {
            return Err(Error::OutOfRange { q, lo: self.q_min, hi: self.q_max });
        }
        let floor = offset.floor();
        let rounded = if (offset - floor - 0.5).abs() <= TIE_EPS { floor + 1.0 } else { offset.round() };
        Ok(rounded.clamp(0.0, last) as usize)
    }

    /// Index interval covered by the physical interval `[lo, hi]`, after
    /// clipping it to the axis. `None` when the interval misses the axis.
    pub fn index_span(&self, lo: f64, hi: f64) -> Result<Option<(usize, usize)>> {
        if !(lo <= hi) {
            return Err(Error::InvalidRange { lo, hi });
        }
        if hi < self.q_min || lo > self.q_max {
            return Ok(None);
        }
        let a = self.q_to_index(lo.max(self.q_min))?;
        let b = self.q_to_index(hi.min(self.q_max))?;
        Ok(Some((a, b)))
    }
}

/// Number of voxels for `dims`, computed in `u64` and rejected if it does
/// not fit the platform's address space.
pub fn voxel_count(dims: [usize; 3]) -> Result<usize> {
    let total = (dims[0] as u64)
        .checked_mul(dims[1] as u64)
        .and_then(|v| v.checked_mul(dims[2] as u64))
        .ok_or_else(|| Error::InvalidHeader(format!("dims {dims:?} overflow u64")))?;
    usize::try_from(total).map_err(|_| Error::InvalidHeader(format!("dims {dims:?} exceed address space")))
}

/// Linear index in `u64`, usable for bounds arithmetic on any platform.
#[inline]
pub fn linear_index_u64(dims: [usize; 3], idx: [usize; 3]) -> u64 {
    (idx[0] as u64 * dims[1] as u64 + idx[1] as u64) * dims[2] as u64 + idx[2] as u64
}

#[inline]
pub fn linear_index(dims: [usize; 3], idx: [usize; 3]) -> usize {
    (idx[0] * dims[1] + idx[1]) * dims[2] + idx[2]
}

#[inline]
pub fn unravel(dims: [usize; 3], linear: usize) -> [usize; 3] {
    let i3 = linear % dims[2];
    let rest = linear / dims[2];
    [rest / dims[1], rest % dims[1], i3]
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    axes: [AxisSpec; 3],
    data: Vec<f32>,
}

impl VoxelGrid {
    pub fn new(axes: [AxisSpec; 3], data: Vec<f32>) -> Result<Self> {
        for axis in &axes {
            axis.validate()?;
        }
        let expected = voxel_count(axes.map(|a| a.n))?;
        if data.len() != expected {
            return Err(Error::Corrupt(format!("expected {expected} intensities, got {}", data.len())));
        }
        Ok(VoxelGrid { axes, data })
    }

    /// Grid filled with a constant intensity.
    pub fn filled(axes: [AxisSpec; 3], value: f32) -> Result<Self> {
        let n = voxel_count(axes.map(|a| a.n))?;
        Self::new(axes, vec![value; n])
    }

    pub fn axes(&self) -> &[AxisSpec; 3] {
        &self.axes
    }

    pub fn dims(&self) -> [usize; 3] {
        self.axes.map(|a| a.n)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, idx: [usize; 3]) -> f32 {
        self.data[linear_index(self.dims(), idx)]
    }

    #[inline]
    pub fn q_at(&self, idx: [usize; 3]) -> [f64; 3] {
        [
            self.axes[0].index_to_q(idx[0]),
            self.axes[1].index_to_q(idx[1]),
            self.axes[2].index_to_q(idx[2]),
        ]
    }

    pub fn nan_count(&self) -> usize {
        self.data.iter().filter(|v| v.is_nan()).count()
    }
}

pub(crate) fn write_dims<W: Write + ?Sized>(w: &mut W, magic: &[u8; 4], dims: [usize; 3]) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&0u16.to_le_bytes())?;
    for n in dims {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Corrupt(format!("file ends inside {what}")),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

pub(crate) fn read_dims<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<[usize; 3]> {
    let found: [u8; 4] = read_array(r, "magic")?;
    if &found != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&found),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = u16::from_le_bytes(read_array(r, "header")?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let _reserved: [u8; 2] = read_array(r, "header")?;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let n = u64::from_le_bytes(read_array(r, "header")?);
        *d = usize::try_from(n).map_err(|_| Error::InvalidHeader(format!("dimension {n} too large")))?;
    }
    Ok(dims)
}

/// Reads exactly `n` little-endian 4-byte words, then requires end of input.
pub(crate) fn read_payload<R: Read, T>(r: &mut R, n: usize, decode: impl Fn([u8; 4]) -> T) -> Result<Vec<T>> {
    const CHUNK: usize = 1 << 16;
    let mut out = Vec::with_capacity(n);
    let mut buf = vec![0u8; CHUNK * 4];
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(CHUNK);
        let bytes = &mut buf[..take * 4];
        let mut filled = 0;
        while filled < bytes.len() {
            match r.read(&mut bytes[filled..]) {
                Ok(0) => {
                    let got = n - remaining + filled / 4;
                    return Err(Error::Corrupt(format!("payload truncated: {got} of {n} values present")));
                }
                Ok(k) => filled += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        out.extend(bytes.chunks_exact(4).map(|c| decode([c[0], c[1], c[2], c[3]])));
        remaining -= take;
    }
    let mut probe = [0u8; 1];
    loop {
        match r.read(&mut probe) {
            Ok(0) => break,
            Ok(_) => return Err(Error::Corrupt("trailing bytes after payload".into())),
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

pub fn write_volume<W: Write + ?Sized>(grid: &VoxelGrid, w: &mut W) -> Result<()> {
    write_dims(w, VXG1_MAGIC, grid.dims())?;
    for axis in grid.axes() {
        w.write_all(&axis.q_min.to_le_bytes())?;
        w.write_all(&axis.q_max.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(1 << 18);
    for chunk in grid.data().chunks(1 << 16) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_volume<R: Read>(r: &mut R) -> Result<VoxelGrid> {
    let dims = read_dims(r, VXG1_MAGIC)?;
    let mut axes = [AxisSpec { q_min: 0.0, q_max: 0.0, n: 0 }; 3];
    for (axis, n) in axes.iter_mut().zip(dims) {
        let q_min = f64::from_le_bytes(read_array(r, "axis header")?);
        let q_max = f64::from_le_bytes(read_array(r, "axis header")?);
        *axis = AxisSpec { q_min, q_max, n };
        axis.validate()?;
    }
    let n = voxel_count(dims)?;
    let data = read_payload(r, n, f32::from_le_bytes)?;
    VoxelGrid::new(axes, data)
}

/// Loads a `VXG1` file, returning the grid and its NaN voxel count.
pub fn load_volume(path: impl AsRef<Path>) -> Result<(VoxelGrid, usize)> {
    let mut r = BufReader::new(File::open(path)?);
    let grid = read_volume(&mut r)?;
    let nans = grid.nan_count();
    Ok((grid, nans))
}

pub fn save_volume(grid: &VoxelGrid, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_volume(grid, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(lo: f64, hi: f64, n: usize) -> AxisSpec {
        AxisSpec::new(lo, hi, n).unwrap()
    }

    fn cube(n: usize) -> [AxisSpec; 3] {
        [axis(-1.0, 1.0, n), axis(-1.0, 1.0, n), axis(-2.0, 2.0, n)]
    }

    #[test]
    fn q_to_index_examples() {
        let q1 = axis(-10.0, 10.0, 501);
        let q3 = axis(-25.0, 25.0, 501);
        assert_eq!(q1.q_to_index(-10.0).unwrap(), 0);
        assert_eq!(q3.q_to_index(0.0).unwrap(), 250);
        // (0.06 + 10) / 0.04 = 251.5, a tie, rounds up.
        assert_eq!(q1.q_to_index(0.06).unwrap(), 252);
        assert_eq!(q1.q_to_index(-0.06).unwrap(), 249);
        assert_eq!(q1.q_to_index(10.0).unwrap(), 500);
        assert_eq!(q1.q_to_index(10.02).unwrap(), 500);
        assert_eq!(q1.q_to_index(-10.02).unwrap(), 0);
    }

    #[test]
    fn q_to_index_out_of_range() {
        let q1 = axis(-10.0, 10.0, 501);
        assert!(matches!(q1.q_to_index(10.03), Err(Error::OutOfRange { .. })));
        assert!(matches!(q1.q_to_index(-10.05), Err(Error::OutOfRange { .. })));
        assert!(q1.q_to_index(f64::NAN).is_err());
    }

    #[test]
    fn index_roundtrip_all_points() {
        for a in [axis(-10.0, 10.0, 501), axis(-25.0, 25.0, 501), axis(0.3, 7.1, 17), axis(-1.0, 1.0, 2)] {
            for i in 0..a.n {
                assert_eq!(a.q_to_index(a.index_to_q(i)).unwrap(), i);
            }
            assert_eq!(a.index_to_q(0), a.q_min);
            assert_eq!(a.index_to_q(a.n - 1), a.q_max);
        }
    }

    #[test]
    fn symmetric_axis_mirrors_exactly() {
        let a = axis(-10.0, 10.0, 201);
        for i in 0..a.n {
            assert_eq!(a.index_to_q(a.n - 1 - i), -a.index_to_q(i));
        }
    }

    #[test]
    fn invalid_axes() {
        assert!(matches!(AxisSpec::new(0.0, 1.0, 1), Err(Error::InvalidHeader(_))));
        assert!(matches!(AxisSpec::new(1.0, 1.0, 5), Err(Error::InvalidHeader(_))));
        assert!(matches!(AxisSpec::new(2.0, 1.0, 5), Err(Error::InvalidHeader(_))));
    }

    #[test]
    fn linear_index_bijection_small_dims() {
        for dims in [[2, 2, 2], [3, 4, 5], [5, 1, 7], [2, 9, 3]] {
            let total = dims[0] * dims[1] * dims[2];
            let mut seen = vec![false; total];
            for i1 in 0..dims[0] {
                for i2 in 0..dims[1] {
                    for i3 in 0..dims[2] {
                        let l = linear_index(dims, [i1, i2, i3]);
                        assert!(l < total);
                        assert!(!seen[l]);
                        seen[l] = true;
                        assert_eq!(unravel(dims, l), [i1, i2, i3]);
                        assert_eq!(linear_index_u64(dims, [i1, i2, i3]), l as u64);
                    }
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn full_size_grid_index_bounds() {
        let dims = [501, 501, 501];
        assert_eq!(voxel_count(dims).unwrap(), 125_751_501);
        let last = linear_index_u64(dims, [500, 500, 500]);
        assert_eq!(last, 125_751_500);
        assert!(last < u32::MAX as u64);
        assert!(voxel_count([1 << 22, 1 << 22, 1 << 22]).is_err());
    }

    #[test]
    fn roundtrip_zero_grid_bytes() {
        let grid = VoxelGrid::filled(cube(2), 0.0).unwrap();
        let mut a = Vec::new();
        write_volume(&grid, &mut a).unwrap();
        assert_eq!(a.len(), 80 + 8 * 4);
        let back = read_volume(&mut a.as_slice()).unwrap();
        assert_eq!(back.len(), 8);
        let mut b = Vec::new();
        write_volume(&back, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn roundtrip_preserves_nan_bits() {
        let mut data: Vec<f32> = (0..27).map(|i| i as f32 * 0.5 - 3.0).collect();
        data[4] = f32::from_bits(0x7fc0_1234);
        data[5] = -0.0;
        let grid = VoxelGrid::new(cube(3), data).unwrap();
        let mut buf = Vec::new();
        write_volume(&grid, &mut buf).unwrap();
        let back = read_volume(&mut buf.as_slice()).unwrap();
        assert_eq!(back.axes(), grid.axes());
        let bits = |g: &VoxelGrid| g.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&grid));
        assert_eq!(back.nan_count(), 1);
    }

    #[test]
    fn bad_magic_is_format_error() {
        let grid = VoxelGrid::filled(cube(2), 1.0).unwrap();
        let mut buf = Vec::new();
        write_volume(&grid, &mut buf).unwrap();
        buf[3] = b'X';
        assert!(matches!(read_volume(&mut buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let grid = VoxelGrid::filled(cube(2), 1.0).unwrap();
        let mut buf = Vec::new();
        write_volume(&grid, &mut buf).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(matches!(read_volume(&mut buf.as_slice()), Err(Error::Corrupt(_))));
        buf.truncate(40);
        assert!(matches!(read_volume(&mut buf.as_slice()), Err(Error::Corrupt(_))));
    }

    #[test]
    fn invalid_header_values() {
        let grid = VoxelGrid::filled(cube(2), 1.0).unwrap();
        let mut buf = Vec::new();
        write_volume(&grid, &mut buf).unwrap();
        let mut small = buf.clone();
        small[8..16].copy_from_slice(&1u64.to_le_bytes());
        assert!(matches!(read_volume(&mut small.as_slice()), Err(Error::InvalidHeader(_))));
        let mut flipped = buf.clone();
        flipped[32..40].copy_from_slice(&5.0f64.to_le_bytes());
        assert!(matches!(read_volume(&mut flipped.as_slice()), Err(Error::InvalidHeader(_))));
    }

    #[test]
    fn file_roundtrip_and_unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.vxg");
        let grid = VoxelGrid::new(cube(2), (0..8).map(|i| i as f32).collect()).unwrap();
        save_volume(&grid, &path).unwrap();
        let (back, nans) = load_volume(&path).unwrap();
        assert_eq!(back, grid);
        assert_eq!(nans, 0);
        let bad = dir.path().join("missing").join("v.vxg");
        assert!(matches!(save_volume(&grid, &bad), Err(Error::Io(_))));
        assert!(matches!(load_volume(&bad), Err(Error::Io(_))));
    }
}
