//! Brute-force references shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use voxclust::features::{ClusterTable, Multiplet};
use voxclust::synth::{GroundTruth, Primitive};
use voxclust::volume::{AxisSpec, VoxelGrid};
use voxclust::wdbscan::LabelVolume;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn below(rng: &mut impl RngCore, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

pub fn grid(dims: [usize; 3], data: Vec<f32>) -> VoxelGrid {
    let axes = dims.map(|n| AxisSpec::new(0.0, (n - 1) as f64, n).unwrap());
    VoxelGrid::new(axes, data).unwrap()
}

fn coords(dims: [usize; 3]) -> Vec<[i64; 3]> {
    let mut out = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                out.push([i as i64, j as i64, k as i64]);
            }
        }
    }
    out
}

fn within(a: [i64; 3], b: [i64; 3], eps: f64) -> bool {
    let d2 = (a[0] - b[0]).pow(2) + (a[1] - b[1]).pow(2) + (a[2] - b[2]).pow(2);
    (d2 as f64) <= eps * eps
}

pub fn weight_oracle(v: f32, threshold: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else if (v as f64) >= threshold {
        v as f64 / threshold
    } else {
        1.0
    }
}

/// Weighted neighbor sums by checking the distance to every other voxel,
/// accumulating in ascending linear order.
pub fn density_oracle(g: &VoxelGrid, eps: f64, threshold: f64) -> Vec<f64> {
    let c = coords(g.dims());
    let data = g.data();
    (0..c.len())
        .map(|p| {
            let mut sum = 0.0;
            for q in 0..c.len() {
                if within(c[p], c[q], eps) {
                    sum += weight_oracle(data[q], threshold);
                }
            }
            sum
        })
        .collect()
}

/// Textbook DBSCAN over the voxel set: breadth-first expansion from each
/// unvisited core in linear order, border voxels joining the cluster of
/// their lowest-index core neighbor. Cluster ids are one plus the cluster's
/// smallest core index.
pub fn dbscan_oracle(g: &VoxelGrid, eps: f64, min_pts: f64, threshold: f64) -> (Vec<bool>, Vec<u32>) {
    let c = coords(g.dims());
    let data = g.data();
    let n = c.len();
    let dens = density_oracle(g, eps, threshold);
    let core: Vec<bool> = (0..n).map(|p| !data[p].is_nan() && dens[p] >= min_pts).collect();
    let c = &c;
    let neighbors = |p: usize| (0..n).filter(move |&q| q != p && within(c[p], c[q], eps));

    let mut labels = vec![0u32; n];
    for seed in 0..n {
        if !core[seed] || labels[seed] != 0 {
            continue;
        }
        let id = seed as u32 + 1;
        labels[seed] = id;
        let mut queue = VecDeque::from([seed]);
        while let Some(p) = queue.pop_front() {
            for q in neighbors(p) {
                if core[q] && labels[q] == 0 {
                    labels[q] = id;
                    queue.push_back(q);
                }
            }
        }
    }
    for p in 0..n {
        if core[p] || data[p].is_nan() {
            continue;
        }
        if let Some(q) = neighbors(p).find(|&q| core[q]) {
            labels[p] = labels[q];
        }
    }
    (core, labels)
}

/// True when `m` is a nearest `f64` to the exact mean of the finite values.
pub fn mean_is_correctly_rounded(values: &[f32], m: f64) -> bool {
    let finite: Vec<f32> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let mut sum = BigRational::zero();
    for &v in &finite {
        sum += BigRational::from_f32(v).unwrap();
    }
    let exact = sum / BigRational::from_integer(BigInt::from(finite.len()));
    let dist = |x: f64| (BigRational::from_f64(x).unwrap() - &exact).abs();
    let d = dist(m);
    let (up, down) = if m == 0.0 {
        (f64::from_bits(1), -f64::from_bits(1))
    } else if m > 0.0 {
        (f64::from_bits(m.to_bits() + 1), f64::from_bits(m.to_bits() - 1))
    } else {
        (f64::from_bits(m.to_bits() - 1), f64::from_bits(m.to_bits() + 1))
    };
    d <= dist(up) && d <= dist(down)
}

/// Median of the finite values by full sort.
pub fn median_oracle(values: &[f32]) -> Option<f64> {
    let mut v: Vec<f32> = values.iter().copied().filter(|v| v.is_finite()).collect();
    v.sort_by(f32::total_cmp);
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2] as f64),
        _ => Some((v[n / 2 - 1] as f64 + v[n / 2] as f64) * 0.5),
    }
}

/// Random values spanning many binades, with occasional NaN, infinities,
/// zeros and repeats.
pub fn wild_values(rng: &mut impl RngCore, n: usize) -> Vec<f32> {
    (0..n)
        .map(|_| match below(rng, 20) {
            0 => f32::NAN,
            1 => f32::INFINITY,
            2 => 0.0,
            3 => 1.5,
            _ => {
                let mag = (2f64).powf(uniform(rng) * 80.0 - 60.0);
                let sign = if below(rng, 3) == 0 { -1.0 } else { 1.0 };
                (sign * mag) as f32
            }
        })
        .collect()
}

/// For each planted primitive, the cluster rank overlapping its mask best and
/// the Jaccard index of that overlap (rank 0 when nothing overlaps).
pub fn best_matches(truth: &GroundTruth, table: &ClusterTable, labels: &LabelVolume) -> Vec<(u32, f64)> {
    let labels = labels.labels();
    (0..truth.primitives().len())
        .map(|k| {
            let mask = truth.mask(k);
            let mask_size = mask.iter().filter(|&&m| m).count() as u64;
            let mut overlap: HashMap<u32, u64> = HashMap::new();
            for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
                if labels[i] > 0 {
                    *overlap.entry(labels[i]).or_default() += 1;
                }
            }
            let mut best = (0, 0.0);
            for (&l, &common) in &overlap {
                let size = table.records[l as usize - 1].size;
                let j = common as f64 / (mask_size + size - common) as f64;
                if j > best.1 {
                    best = (l, j);
                }
            }
            best
        })
        .collect()
}

/// Primitive with its anchor folded into the positive octant; mirror images
/// share a key.
pub fn mirror_key(p: &Primitive) -> String {
    let mut p = p.clone();
    let anchor = match &mut p {
        Primitive::GaussianPeak { center, .. } | Primitive::Bar { center, .. } => center,
        Primitive::ConeShell { apex, .. } => apex,
        Primitive::Broomstick { base, .. } => base,
    };
    *anchor = anchor.map(f64::abs);
    format!("{p:?}")
}

/// Matched ranks of every planted mirror set with more than one member,
/// each sorted ascending.
pub fn mirror_sets(primitives: &[Primitive], ranks: &[u32]) -> Vec<Vec<u32>> {
    let mut planted: HashMap<String, Vec<u32>> = HashMap::new();
    for (p, &r) in primitives.iter().zip(ranks) {
        planted.entry(mirror_key(p)).or_default().push(r);
    }
    let mut sets: Vec<Vec<u32>> = planted.into_values().filter(|v| v.len() > 1).collect();
    sets.iter_mut().for_each(|v| v.sort_unstable());
    sets.sort();
    sets
}

/// True when the ranks are distinct and form exactly one multiplet.
pub fn is_run(ranks: &[u32], multiplets: &[Multiplet]) -> bool {
    let (lo, hi) = (ranks[0], *ranks.last().unwrap());
    ranks.windows(2).all(|w| w[0] < w[1]) && multiplets.iter().any(|m| m.first_rank == lo && m.last_rank == hi)
}
