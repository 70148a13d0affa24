//! Size-ranked cluster tables, symmetry multiplets and index groups, and
//! region/intensity selections for isolating individual features.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::{intensity_stats_of, IntensityStats};
use crate::volume::{unravel, VoxelGrid};
use crate::wdbscan::LabelVolume;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRecord {
    /// 1 is the largest cluster.
    pub rank: u32,
    pub size: u64,
    /// Smallest member linear index; breaks ties between equal sizes.
    pub first_index: u64,
    pub bbox_min: [usize; 3],
    pub bbox_max: [usize; 3],
    pub q_min: [f64; 3],
    pub q_max: [f64; 3],
    pub sum_intensity: f64,
    pub min_intensity: f32,
    pub max_intensity: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTable {
    pub records: Vec<ClusterRecord>,
    pub noise_count: u64,
    /// Ranks after which a new index group starts.
    pub group_breaks: Vec<u32>,
}

impl ClusterTable {
    pub fn sizes(&self) -> impl Iterator<Item = u64> + '_ {
        self.records.iter().map(|r| r.size)
    }

    pub fn max_rank(&self) -> u32 {
        self.records.len() as u32
    }

    pub fn total(&self) -> u64 {
        self.sizes().sum::<u64>() + self.noise_count
    }

    /// Inclusive rank ranges of the index groups implied by `group_breaks`.
    pub fn groups(&self) -> Vec<(u32, u32)> {
        group_ranges(&self.group_breaks, self.max_rank())
    }
}

pub fn group_ranges(breaks: &[u32], max_rank: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let mut start = 1;
    for &b in breaks.iter().filter(|&&b| b >= 1 && b < max_rank) {
        if b >= start {
            out.push((start, b));
            start = b + 1;
        }
    }
    if start <= max_rank {
        out.push((start, max_rank));
    }
    out
}

/// Display name for the `i`-th index group: `a`, `b`, ..., `z`, `g27`, ...
pub fn group_name(i: usize) -> String {
    if i < 26 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        format!("g{}", i + 1)
    }
}

struct Acc {
    size: u64,
    first: u64,
    lo: [usize; 3],
    hi: [usize; 3],
    sum: f64,
    min: f32,
    max: f32,
}

/// Orders clusters by descending size (ties: ascending smallest member) and
/// relabels the volume so that id == rank. Noise stays 0.
pub fn rank_clusters(mut labels: LabelVolume, grid: &VoxelGrid) -> Result<(ClusterTable, LabelVolume)> {
    let dims = grid.dims();
    if labels.dims() != dims {
        return Err(Error::DimsMismatch(labels.dims(), dims));
    }
    let data = grid.data();
    let mut compact: HashMap<u32, u32> = HashMap::new();
    let mut accs: Vec<Acc> = Vec::new();
    let mut noise = 0u64;
    let mut cached: Option<(u32, u32)> = None;

    // First pass: replace each id with 1 + its first-appearance index.
    for (p, label) in labels.labels_mut().iter_mut().enumerate() {
        if *label == 0 {
            noise += 1;
            continue;
        }
        let slot = match cached {
            Some((id, slot)) if id == *label => slot,
            _ => {
                let next = accs.len() as u32;
                let slot = *compact.entry(*label).or_insert(next);
                if slot == next {
                    let idx = unravel(dims, p);
                    accs.push(Acc {
                        size: 0,
                        first: p as u64,
                        lo: idx,
                        hi: idx,
                        sum: 0.0,
                        min: f32::NAN,
                        max: f32::NAN,
                    });
                }
                cached = Some((*label, slot));
                slot
            }
        };
        let acc = &mut accs[slot as usize];
        let idx = unravel(dims, p);
        for k in 0..3 {
            acc.lo[k] = acc.lo[k].min(idx[k]);
            acc.hi[k] = acc.hi[k].max(idx[k]);
        }
        acc.size += 1;
        let v = data[p];
        if !v.is_nan() {
            acc.sum += v as f64;
            acc.min = if acc.min.is_nan() { v } else { acc.min.min(v) };
            acc.max = if acc.max.is_nan() { v } else { acc.max.max(v) };
        }
        *label = slot + 1;
    }

    let mut order: Vec<u32> = (0..accs.len() as u32).collect();
    order.sort_by(|&a, &b| {
        let (a, b) = (&accs[a as usize], &accs[b as usize]);
        b.size.cmp(&a.size).then(a.first.cmp(&b.first))
    });
    let mut rank_of = vec![0u32; accs.len() + 1];
    for (pos, &slot) in order.iter().enumerate() {
        rank_of[slot as usize + 1] = pos as u32 + 1;
    }
    labels.labels_mut().par_iter_mut().for_each(|l| *l = rank_of[*l as usize]);

    let axes = grid.axes();
    let records = order
        .iter()
        .enumerate()
        .map(|(pos, &slot)| {
            let a = &accs[slot as usize];
            ClusterRecord {
                rank: pos as u32 + 1,
                size: a.size,
                first_index: a.first,
                bbox_min: a.lo,
                bbox_max: a.hi,
                q_min: [0, 1, 2].map(|k| axes[k].index_to_q(a.lo[k])),
                q_max: [0, 1, 2].map(|k| axes[k].index_to_q(a.hi[k])),
                sum_intensity: a.sum,
                min_intensity: a.min,
                max_intensity: a.max,
            }
        })
        .collect();
    Ok((ClusterTable { records, noise_count: noise, group_breaks: Vec::new() }, labels))
}

/// A run of consecutive ranks with near-equal sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Multiplet {
    pub first_rank: u32,
    pub last_rank: u32,
    /// Size of the run's first (largest) cluster.
    pub size: u64,
}

impl Multiplet {
    pub fn multiplicity(&self) -> u32 {
        self.last_rank - self.first_rank + 1
    }
}

/// Greedy walk over ranks: a run continues while each size stays within
/// `rel_tol` (relative to the run's first size) of that first size.
pub fn symmetry_groups(table: &ClusterTable, rel_tol: f64) -> Result<Vec<Multiplet>> {
    if !(0.0..1.0).contains(&rel_tol) {
        return Err(Error::InvalidParameter(format!("rel_tol must be in [0, 1), got {rel_tol}")));
    }
    let mut out: Vec<Multiplet> = Vec::new();
    for r in &table.records {
        match out.last_mut() {
            Some(m) if (m.size.abs_diff(r.size) as f64) <= rel_tol * m.size as f64 => m.last_rank = r.rank,
            _ => out.push(Multiplet { first_rank: r.rank, last_rank: r.rank, size: r.size }),
        }
    }
    Ok(out)
}

/// Proposes group breaks after every rank whose size exceeds the next by at
/// least `min_gap` decades.
pub fn detect_index_groups(table: &ClusterTable, min_gap: f64) -> Result<Vec<u32>> {
    if !(min_gap > 0.0) {
        return Err(Error::InvalidParameter(format!("min_gap must be positive, got {min_gap}")));
    }
    Ok(table
        .records
        .windows(2)
        .filter(|w| (w[0].size as f64).log10() - (w[1].size as f64).log10() >= min_gap)
        .map(|w| w[0].rank)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassBand {
    /// Keeps intensity <= cutoff.
    Low,
    /// Keeps intensity > cutoff.
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityUnit {
    Raw,
    /// Raw intensity divided by the clustering threshold.
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityFilter {
    pub band: PassBand,
    pub cutoff: f64,
    pub unit: IntensityUnit,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selection {
    pub rank_range: Option<(u32, u32)>,
    pub q_region: [Option<(f64, f64)>; 3],
    pub intensity_filter: Option<IntensityFilter>,
}

impl Selection {
    pub fn validate(&self) -> Result<()> {
        if self.rank_range.is_none() && self.q_region.iter().all(Option::is_none) && self.intensity_filter.is_none()
        {
            return Err(Error::InvalidParameter("selection needs at least one criterion".into()));
        }
        if let Some((lo, hi)) = self.rank_range {
            if lo > hi {
                return Err(Error::InvalidParameter(format!("empty rank range {lo}:{hi}")));
            }
        }
        for &(lo, hi) in self.q_region.iter().flatten() {
            if !(lo <= hi) {
                return Err(Error::InvalidRange { lo, hi });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedPoint {
    pub index: [usize; 3],
    pub q: [f64; 3],
    pub intensity: f32,
    pub scaled: Option<f64>,
    pub rank: u32,
}

/// Voxels meeting every criterion of `sel`, in ascending linear-index order.
/// Masked (NaN) voxels are never selected. Region bounds are clipped to the
/// grid before being mapped to indices.
pub fn select(
    grid: &VoxelGrid,
    labels: &LabelVolume,
    sel: &Selection,
    threshold: Option<f64>,
) -> Result<Vec<SelectedPoint>> {
    sel.validate()?;
    let dims = grid.dims();
    if labels.dims() != dims {
        return Err(Error::DimsMismatch(labels.dims(), dims));
    }
    if let Some(t) = threshold {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("threshold must be positive, got {t}")));
        }
    }
    if matches!(sel.intensity_filter, Some(f) if f.unit == IntensityUnit::Scaled) && threshold.is_none() {
        return Err(Error::MissingParameter("threshold (needed for scaled intensity filters)"));
    }

    let axes = grid.axes();
    let mut spans = [(0usize, 0usize); 3];
    for k in 0..3 {
        spans[k] = match sel.q_region[k] {
            None => (0, dims[k] - 1),
            Some((lo, hi)) => match axes[k].index_span(lo, hi)? {
                Some(span) => span,
                None => return Ok(Vec::new()),
            },
        };
    }

    let data = grid.data();
    let ids = labels.labels();
    let keep = |p: usize| -> Option<(f32, Option<f64>, u32)> {
        let v = data[p];
        if v.is_nan() {
            return None;
        }
        let rank = ids[p];
        if let Some((lo, hi)) = sel.rank_range {
            if rank < lo || rank > hi {
                return None;
            }
        }
        let scaled = threshold.map(|t| v as f64 / t);
        if let Some(f) = sel.intensity_filter {
            let value = match f.unit {
                IntensityUnit::Raw => v as f64,
                IntensityUnit::Scaled => scaled.expect("checked above"),
            };
            let low = value <= f.cutoff;
            if low != (f.band == PassBand::Low) {
                return None;
            }
        }
        Some((v, scaled, rank))
    };

    let points = (spans[0].0..=spans[0].1)
        .into_par_iter()
        .flat_map_iter(|i1| {
            let keep = &keep;
            (spans[1].0..=spans[1].1).flat_map(move |i2| {
                (spans[2].0..=spans[2].1).filter_map(move |i3| {
                    let idx = [i1, i2, i3];
                    let p = (i1 * dims[1] + i2) * dims[2] + i3;
                    keep(p).map(|(intensity, scaled, rank)| SelectedPoint {
                        index: idx,
                        q: grid.q_at(idx),
                        intensity,
                        scaled,
                        rank,
                    })
                })
            })
        })
        .collect();
    Ok(points)
}

/// Histogram statistics of a selection's raw intensities.
pub fn characterize(points: &[SelectedPoint], bin_count: usize) -> Result<IntensityStats> {
    if points.is_empty() {
        return Err(Error::EmptyData);
    }
    let values: Vec<f32> = points.iter().map(|p| p.intensity).collect();
    intensity_stats_of(&values, bin_count, None)
}

pub fn write_points_csv<W: Write + ?Sized>(points: &[SelectedPoint], w: &mut W) -> Result<()> {
    writeln!(w, "i1,i2,i3,q1,q2,q3,intensity,scaled_intensity,rank")?;
    for p in points {
        let scaled = p.scaled.map(|s| format!("{s:?}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{:?},{:?},{:?},{:?},{},{}",
            p.index[0], p.index[1], p.index[2], p.q[0], p.q[1], p.q[2], p.intensity, scaled, p.rank
        )?;
    }
    Ok(())
}

pub fn write_table_csv<W: Write + ?Sized>(table: &ClusterTable, w: &mut W) -> Result<()> {
    writeln!(
        w,
        "rank,size,i1min,i1max,i2min,i2max,i3min,i3max,q1min,q1max,q2min,q2max,q3min,q3max,\
         sum_intensity,min_intensity,max_intensity"
    )?;
    for r in &table.records {
        write!(w, "{},{}", r.rank, r.size)?;
        for k in 0..3 {
            write!(w, ",{},{}", r.bbox_min[k], r.bbox_max[k])?;
        }
        for k in 0..3 {
            write!(w, ",{:?},{:?}", r.q_min[k], r.q_max[k])?;
        }
        writeln!(w, ",{:?},{:?},{:?}", r.sum_intensity, r.min_intensity, r.max_intensity)?;
    }
    Ok(())
}

/// Cluster size against rank, one row per cluster.
pub fn write_sizes_tsv<W: Write + ?Sized>(table: &ClusterTable, w: &mut W) -> Result<()> {
    writeln!(w, "rank\tsize")?;
    for r in &table.records {
        writeln!(w, "{}\t{}", r.rank, r.size)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::AxisSpec;

    fn axes(dims: [usize; 3]) -> [AxisSpec; 3] {
        [
            AxisSpec::new(-10.0, 10.0, dims[0]).unwrap(),
            AxisSpec::new(-10.0, 10.0, dims[1]).unwrap(),
            AxisSpec::new(-25.0, 25.0, dims[2]).unwrap(),
        ]
    }

    fn table_of(sizes: &[u64]) -> ClusterTable {
        let records = sizes
            .iter()
            .enumerate()
            .map(|(i, &size)| ClusterRecord {
                rank: i as u32 + 1,
                size,
                first_index: i as u64,
                bbox_min: [0; 3],
                bbox_max: [0; 3],
                q_min: [0.0; 3],
                q_max: [0.0; 3],
                sum_intensity: 0.0,
                min_intensity: 0.0,
                max_intensity: 0.0,
            })
            .collect();
        ClusterTable { records, noise_count: 0, group_breaks: Vec::new() }
    }

    #[test]
    fn ranking_breaks_ties_by_first_member() {
        let dims = [2, 2, 6];
        let grid = VoxelGrid::new(axes(dims), (0..24).map(|i| i as f32).collect()).unwrap();
        // id 7: 5 voxels, id 3: 9 voxels starting at 5, id 9: 9 voxels starting at 1.
        let mut ids = vec![0u32; 24];
        for p in [0, 2, 3, 4, 6] {
            ids[p] = 7;
        }
        for p in [5, 8, 10, 11, 12, 13, 14, 15, 16] {
            ids[p] = 3;
        }
        for p in [1, 7, 9, 17, 18, 19, 20, 21, 22] {
            ids[p] = 9;
        }
        let lv = LabelVolume::new(dims, ids).unwrap();
        let (table, ranked) = rank_clusters(lv, &grid).unwrap();
        assert_eq!(table.sizes().collect::<Vec<_>>(), vec![9, 9, 5]);
        assert_eq!(table.records[0].first_index, 1);
        assert_eq!(table.records[1].first_index, 5);
        assert_eq!(table.noise_count, 1);
        assert_eq!(table.total(), 24);
        assert_eq!(ranked.labels()[1], 1);
        assert_eq!(ranked.labels()[5], 2);
        assert_eq!(ranked.labels()[0], 3);
        assert_eq!(ranked.labels()[23], 0);
        let r = &table.records[2];
        assert_eq!(r.sum_intensity, 15.0);
        assert_eq!((r.min_intensity, r.max_intensity), (0.0, 6.0));
        assert_eq!(r.bbox_min, [0, 0, 0]);
        assert_eq!(r.bbox_max, [0, 1, 4]);
        assert_eq!(r.q_max[2], 15.0);

        let (again, same) = rank_clusters(ranked.clone(), &grid).unwrap();
        assert_eq!(again, table);
        assert_eq!(same, ranked);
    }

    #[test]
    fn all_noise_table() {
        let dims = [2, 3, 4];
        let grid = VoxelGrid::filled(axes(dims), 1.0).unwrap();
        let lv = LabelVolume::new(dims, vec![0; 24]).unwrap();
        let (table, _) = rank_clusters(lv, &grid).unwrap();
        assert!(table.records.is_empty());
        assert_eq!(table.noise_count, 24);
        assert!(table.groups().is_empty());
    }

    #[test]
    fn ranking_rejects_dims_mismatch() {
        let grid = VoxelGrid::filled(axes([2, 2, 2]), 1.0).unwrap();
        let lv = LabelVolume::new([2, 2, 3], vec![0; 12]).unwrap();
        assert!(matches!(rank_clusters(lv, &grid), Err(Error::DimsMismatch(..))));
    }

    #[test]
    fn multiplets() {
        let t = table_of(&[100, 100, 100, 100, 40, 40, 7]);
        let m = symmetry_groups(&t, 0.0).unwrap();
        assert_eq!(m.iter().map(|m| m.multiplicity()).collect::<Vec<_>>(), vec![4, 2, 1]);
        assert_eq!((m[1].first_rank, m[1].last_rank), (5, 6));

        let t = table_of(&[100, 99, 50]);
        let m = symmetry_groups(&t, 0.02).unwrap();
        assert_eq!(m.iter().map(|m| m.multiplicity()).collect::<Vec<_>>(), vec![2, 1]);
        assert!(symmetry_groups(&t, 1.0).is_err());
    }

    #[test]
    fn index_group_breaks() {
        let t = table_of(&[10_000_000, 10_000_000, 1000, 1000, 10]);
        assert_eq!(detect_index_groups(&t, 2.0).unwrap(), vec![2, 4]);
        let mut t = t;
        t.group_breaks = vec![2, 4];
        assert_eq!(t.groups(), vec![(1, 2), (3, 4), (5, 5)]);

        let sizes: Vec<u64> = (0..40).map(|i| (1e6 * 0.9f64.powi(i)).round() as u64).collect();
        assert!(detect_index_groups(&table_of(&sizes), 1.0).unwrap().is_empty());
        assert!(detect_index_groups(&table_of(&sizes), 0.0).is_err());
    }

    #[test]
    fn group_ranges_ignore_out_of_range_breaks() {
        assert_eq!(group_ranges(&[2, 27865], 77132), vec![(1, 2), (3, 27865), (27866, 77132)]);
        assert_eq!(group_ranges(&[5, 9], 4), vec![(1, 4)]);
        assert_eq!(group_name(2), "c");
    }

    fn sample() -> (VoxelGrid, LabelVolume) {
        let dims = [11, 11, 11];
        let n = 1331;
        let data: Vec<f32> = (0..n).map(|i| ((i * 37) % 101) as f32 * 1e-6).collect();
        let ids: Vec<u32> = (0..n).map(|i| ((i * 13) % 7) as u32).collect();
        (VoxelGrid::new(axes(dims), data).unwrap(), LabelVolume::new(dims, ids).unwrap())
    }

    #[test]
    fn low_and_high_pass_partition() {
        let (grid, labels) = sample();
        let t = Some(2e-6);
        let base = Selection { rank_range: Some((2, 5)), ..Default::default() };
        let all = select(&grid, &labels, &base, t).unwrap();
        for cutoff in [0.0, 8e-5, 5.0, 25.0, 1e9] {
            let mk = |band| Selection {
                intensity_filter: Some(IntensityFilter { band, cutoff, unit: IntensityUnit::Scaled }),
                ..base.clone()
            };
            let low = select(&grid, &labels, &mk(PassBand::Low), t).unwrap();
            let high = select(&grid, &labels, &mk(PassBand::High), t).unwrap();
            assert_eq!(low.len() + high.len(), all.len());
            let mut merged = [low, high].concat();
            merged.sort_by_key(|p| p.index);
            assert_eq!(merged, all);
        }
    }

    #[test]
    fn region_selection_stays_in_index_box() {
        let (grid, labels) = sample();
        let sel = Selection { q_region: [Some((-4.0, 4.0)), Some((-7.0, 7.0)), Some((10.0, 25.0))], ..Default::default() };
        let pts = select(&grid, &labels, &sel, None).unwrap();
        let axes = grid.axes();
        let bounds = [(-4.0, 4.0), (-7.0, 7.0), (10.0, 25.0)];
        assert!(!pts.is_empty());
        for p in &pts {
            for k in 0..3 {
                let lo = axes[k].q_to_index(bounds[k].0).unwrap();
                let hi = axes[k].q_to_index(bounds[k].1).unwrap();
                assert!((lo..=hi).contains(&p.index[k]));
            }
        }
        assert!(pts.windows(2).all(|w| w[0].index < w[1].index));
        assert!(pts.iter().all(|p| p.scaled.is_none()));
    }

    #[test]
    fn adding_criteria_never_grows_selection() {
        let (grid, labels) = sample();
        let a = Selection { rank_range: Some((1, 6)), ..Default::default() };
        let b = Selection { q_region: [Some((-5.0, 5.0)), None, None], ..a.clone() };
        let c = Selection {
            intensity_filter: Some(IntensityFilter { band: PassBand::High, cutoff: 5e-5, unit: IntensityUnit::Raw }),
            ..b.clone()
        };
        let na = select(&grid, &labels, &a, None).unwrap().len();
        let nb = select(&grid, &labels, &b, None).unwrap().len();
        let nc = select(&grid, &labels, &c, None).unwrap().len();
        assert!(na >= nb && nb >= nc && nc > 0);
    }

    #[test]
    fn selection_errors() {
        let (grid, labels) = sample();
        assert!(select(&grid, &labels, &Selection::default(), None).is_err());
        let scaled = Selection {
            intensity_filter: Some(IntensityFilter { band: PassBand::Low, cutoff: 1.0, unit: IntensityUnit::Scaled }),
            ..Default::default()
        };
        assert!(matches!(select(&grid, &labels, &scaled, None), Err(Error::MissingParameter(_))));
        let outside = Selection { q_region: [Some((11.0, 12.0)), None, None], ..Default::default() };
        assert!(select(&grid, &labels, &outside, None).unwrap().is_empty());
    }

    #[test]
    fn characterize_cases() {
        let (grid, labels) = sample();
        let whole = Selection { q_region: [Some((-10.0, 10.0)), None, None], ..Default::default() };
        let pts = select(&grid, &labels, &whole, None).unwrap();
        assert_eq!(pts.len(), grid.len());
        let full = crate::stats::intensity_stats(&grid, 64, None).unwrap();
        assert_eq!(characterize(&pts, 64).unwrap(), full);

        let one = &pts[17..18];
        let s = characterize(one, 10).unwrap();
        assert_eq!(s.vmean, one[0].intensity as f64);
        assert_eq!(s.vmedian, one[0].intensity as f64);
        assert!(matches!(characterize(&[], 10), Err(Error::EmptyData)));
    }

    #[test]
    fn csv_headers() {
        let mut out = Vec::new();
        write_table_csv(&table_of(&[3]), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("rank,size,i1min,i1max,"));
        assert_eq!(text.lines().nth(1).unwrap(), "1,3,0,0,0,0,0,0,0.0,0.0,0.0,0.0,0.0,0.0,0.0,0.0,0.0");
        let p = SelectedPoint { index: [1, 2, 3], q: [0.5, -1.0, 2.0], intensity: 0.25, scaled: Some(2.5), rank: 4 };
        let mut out = Vec::new();
        write_points_csv(&[p], &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "i1,i2,i3,q1,q2,q3,intensity,scaled_intensity,rank\n1,2,3,0.5,-1.0,2.0,0.25,2.5,4\n"
        );
    }
}
