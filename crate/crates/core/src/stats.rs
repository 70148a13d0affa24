//! First-order photometric statistics: mean, median, and a linear-binned
//! histogram whose most populated bin marks HMAX.
//!
//! The mean is computed from an exact sum of the `f32` inputs, so every
//! statistic here is independent of voxel order and of how the data is split
//! across threads.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::VoxelGrid;

const CHUNK: usize = 1 << 16;

/// Exponent span of finite `f32` values: every one is `m * 2^e` with
/// `|m| < 2^24` and `e` in `[-149, 104]`.
const BUCKETS: usize = 254;
const MIN_EXP: i64 = -149;

/// Exact running sum of `f32` values, one integer mantissa bucket per binary
/// exponent. Buckets cannot overflow below 2^39 additions.
#[derive(Clone)]
pub struct ExactSum {
    buckets: [i64; BUCKETS],
    count: u64,
}

impl Default for ExactSum {
    fn default() -> Self {
        ExactSum { buckets: [0; BUCKETS], count: 0 }
    }
}

impl ExactSum {
    #[inline]
    pub fn add(&mut self, v: f32) {
        debug_assert!(v.is_finite());
        let bits = v.to_bits();
        let exp_field = ((bits >> 23) & 0xff) as usize;
        let frac = (bits & 0x7f_ffff) as i64;
        let (mantissa, bucket) = if exp_field == 0 { (frac, 0) } else { (frac | 0x80_0000, exp_field - 1) };
        if bits >> 31 == 1 {
            self.buckets[bucket] -= mantissa;
        } else {
            self.buckets[bucket] += mantissa;
        }
        self.count += 1;
    }

    pub fn merge(mut self, other: &ExactSum) -> Self {
        for (a, b) in self.buckets.iter_mut().zip(other.buckets.iter()) {
            *a += *b;
        }
        self.count += other.count;
        self
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// The sum as an integer multiple of 2^-149.
    fn scaled_total(&self) -> BigInt {
        let mut total = BigInt::zero();
        for &m in self.buckets.iter().rev() {
            total <<= 1;
            total += m;
        }
        total
    }

    /// Correctly rounded `sum / count`; `None` when empty.
    pub fn mean(&self) -> Option<f64> {
        if self.count == 0 {
            return None;
        }
        let total = self.scaled_total();
        if total.is_zero() {
            return Some(0.0);
        }
        let negative = total.is_negative();
        let magnitude = total.abs();
        let denom = BigInt::from(self.count);
        // At least 66 quotient bits, so the lowest one can serve as a sticky bit.
        let shift = (66 + denom.bits() as i64 - magnitude.bits() as i64).max(0);
        let numer: BigInt = magnitude << shift as usize;
        let (mut quotient, remainder) = (&numer / &denom, &numer % &denom);
        if !remainder.is_zero() {
            quotient |= BigInt::from(1u8);
        }
        let mut value = quotient.to_f64().expect("finite quotient");
        // The quotient keeps its value scaled by 2^(149 + shift); undo in
        // exact power-of-two steps.
        let mut exp = MIN_EXP - shift;
        while exp < -1000 {
            value *= 2f64.powi(-1000);
            exp += 1000;
        }
        value *= 2f64.powi(exp as i32);
        Some(if negative { -value } else { value })
    }
}

/// Linear-binned histogram over `[lo, hi]`; the last bin is closed at `hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
    pub nan_count: u64,
}

impl Histogram {
    pub fn new(bin_count: usize, lo: f64, hi: f64) -> Result<Self> {
        if bin_count == 0 {
            return Err(Error::InvalidParameter("bin count must be positive".into()));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidRange { lo, hi });
        }
        Ok(Histogram { lo, hi, counts: vec![0; bin_count], underflow: 0, overflow: 0, nan_count: 0 })
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_bounds(&self, b: usize) -> (f64, f64) {
        let w = self.width();
        let upper = if b + 1 == self.counts.len() { self.hi } else { self.lo + (b + 1) as f64 * w };
        (self.lo + b as f64 * w, upper)
    }

    pub fn bin_center(&self, b: usize) -> f64 {
        self.lo + (b as f64 + 0.5) * self.width()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow + self.nan_count
    }

    #[inline]
    fn add(&mut self, v: f32) {
        if v.is_nan() {
            self.nan_count += 1;
            return;
        }
        let v = v as f64;
        if v < self.lo {
            self.underflow += 1;
        } else if v > self.hi {
            self.overflow += 1;
        } else {
            let bins = self.counts.len();
            let b = (((v - self.lo) / self.width()) as usize).min(bins - 1);
            self.counts[b] += 1;
        }
    }

    fn merge(mut self, other: Histogram) -> Self {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self.nan_count += other.nan_count;
        self
    }

    /// Lowest-index bin with the maximal count.
    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        for (b, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = b;
            }
        }
        best
    }

    pub fn fill(bin_count: usize, lo: f64, hi: f64, values: &[f32]) -> Result<Self> {
        let empty = Self::new(bin_count, lo, hi)?;
        Ok(values
            .par_chunks(CHUNK)
            .fold(
                || empty.clone(),
                |mut h, chunk| {
                    chunk.iter().for_each(|&v| h.add(v));
                    h
                },
            )
            .reduce(|| empty.clone(), Histogram::merge))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityStats {
    pub vmean: f64,
    pub vmedian: f64,
    /// Center of the most populated histogram bin.
    pub hmax: f64,
    pub min: f64,
    pub max: f64,
    pub finite_count: u64,
    pub histogram: Histogram,
}

#[derive(Clone)]
struct Summary {
    sum: ExactSum,
    min: f32,
    max: f32,
}

impl Summary {
    fn new() -> Self {
        Summary { sum: ExactSum::default(), min: f32::INFINITY, max: f32::NEG_INFINITY }
    }

    fn merge(mut self, other: Summary) -> Self {
        self.sum = self.sum.merge(&other.sum);
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        self
    }
}

fn summarize(values: &[f32]) -> Summary {
    values
        .par_chunks(CHUNK)
        .fold(Summary::new, |mut s, chunk| {
            for &v in chunk.iter().filter(|v| v.is_finite()) {
                s.sum.add(v);
                s.min = s.min.min(v);
                s.max = s.max.max(v);
            }
            s
        })
        .reduce(Summary::new, Summary::merge)
}

/// Exact mean of the finite values.
pub fn mean(values: &[f32]) -> Option<f64> {
    summarize(values).sum.mean()
}

/// Median of the finite values; even counts take the midpoint of the two
/// central order statistics.
pub fn median(values: &[f32]) -> Option<f64> {
    let mut finite: Vec<f32> = values.par_iter().copied().filter(|v| v.is_finite()).collect();
    median_in_place(&mut finite)
}

fn median_in_place(finite: &mut [f32]) -> Option<f64> {
    let n = finite.len();
    if n == 0 {
        return None;
    }
    let k = n / 2;
    let (left, upper, _) = finite.select_nth_unstable_by(k, f32::total_cmp);
    let upper = *upper as f64;
    if n % 2 == 1 {
        return Some(upper);
    }
    let lower = left.iter().copied().max_by(f32::total_cmp).expect("non-empty lower half") as f64;
    Some((lower + upper) * 0.5)
}

/// Statistics of an arbitrary set of intensities. `range` defaults to the
/// finite min/max; a constant input is widened symmetrically so that its
/// value falls inside a bin.
pub fn intensity_stats_of(values: &[f32], bin_count: usize, range: Option<(f64, f64)>) -> Result<IntensityStats> {
    if bin_count == 0 {
        return Err(Error::InvalidParameter("bin count must be positive".into()));
    }
    let summary = summarize(values);
    let vmean = summary.sum.mean().ok_or(Error::EmptyData)?;
    let (min, max) = (summary.min as f64, summary.max as f64);
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(lo < hi) {
                return Err(Error::InvalidRange { lo, hi });
            }
            (lo, hi)
        }
        None if min < max => (min, max),
        None => {
            let half = if min == 0.0 { 0.5 } else { 0.5 * min.abs() };
            (min - half, min + half)
        }
    };
    let histogram = Histogram::fill(bin_count, lo, hi, values)?;
    let vmedian = median(values).ok_or(Error::EmptyData)?;
    let hmax = histogram.bin_center(histogram.peak_bin());
    Ok(IntensityStats { vmean, vmedian, hmax, min, max, finite_count: summary.sum.count(), histogram })
}

pub fn intensity_stats(grid: &VoxelGrid, bin_count: usize, range: Option<(f64, f64)>) -> Result<IntensityStats> {
    intensity_stats_of(grid.data(), bin_count, range)
}

/// Writes the non-empty bins as TSV. `footer` lines are emitted as
/// `# key<TAB>value` comments after the data rows.
pub fn write_histogram_tsv<W: Write + ?Sized>(h: &Histogram, footer: &[(&str, f64)], w: &mut W) -> Result<()> {
    writeln!(w, "bin_lo\tbin_hi\tcount")?;
    for (b, &count) in h.counts.iter().enumerate() {
        if count > 0 {
            let (lo, hi) = h.bin_bounds(b);
            writeln!(w, "{lo:?}\t{hi:?}\t{count}")?;
        }
    }
    for (key, value) in footer {
        writeln!(w, "# {key}\t{value:?}")?;
    }
    Ok(())
}

pub fn export_histogram(h: &Histogram, path: impl AsRef<Path>, footer: &[(&str, f64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_histogram_tsv(h, footer, &mut w)?;
    w.flush()?;
    Ok(())
}
