//! The `voxclust` command-line driver.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage or parameter error,
//! 3 malformed input file or config, 4 I/O error.

mod manifest;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub use manifest::RunManifest;

use crate::error::{Error, Result};
use crate::features::{
    self, ClusterTable, IntensityFilter, IntensityUnit, PassBand, Selection, SelectedPoint,
};
use crate::stats::{self, IntensityStats};
use crate::synth;
use crate::volume::{load_volume, save_volume, VoxelGrid};
use crate::wdbscan::{self, load_labels, save_labels, WdbscanParams};

pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "voxclust", version, about = "Intensity-weighted density clustering of 3D voxel volumes")]
struct Cli {
    /// Cap on worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Intensity statistics and histogram of a volume.
    Stats(StatsArgs),
    /// Weighted DBSCAN; writes size-ranked labels and a run manifest.
    Cluster(ClusterArgs),
    /// Cluster table and size-vs-rank export.
    Rank(RankArgs),
    /// Symmetry multiplets and index groups.
    Groups(GroupsArgs),
    /// Export the voxels matching a selection as CSV.
    Select(SelectArgs),
    /// Intensity statistics of a selection.
    Characterize(CharacterizeArgs),
    /// Generate a synthetic volume and per-primitive masks.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct StatsArgs {
    volume: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    bins: usize,
    /// Histogram range `lo:hi` (default: finite min and max).
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    range: Option<(f64, f64)>,
    /// Histogram TSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(required_unless_present = "from_manifest")]
    volume: Option<PathBuf>,
    #[arg(long, default_value_t = 1.7)]
    eps: f64,
    #[arg(long, default_value_t = 80.0)]
    minpts: f64,
    /// Threshold as a fraction of the volume median (default 0.3).
    #[arg(long, conflicts_with = "threshold")]
    threshold_frac: Option<f64>,
    /// Absolute threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Output VXL1 label file.
    #[arg(long, required_unless_present = "from_manifest")]
    labels: Option<PathBuf>,
    /// Where to write the run manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Repeat the run recorded in a manifest.
    #[arg(long, conflicts_with_all = ["volume", "eps", "minpts", "threshold_frac", "threshold"])]
    from_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RankArgs {
    labels: PathBuf,
    volume: PathBuf,
    /// Cluster table CSV.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Size-vs-rank TSV.
    #[arg(long)]
    sizes: Option<PathBuf>,
    /// Write labels renumbered by rank.
    #[arg(long)]
    relabel: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GroupsArgs {
    labels: PathBuf,
    volume: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    rel_tol: f64,
    /// Minimum size drop, in decades, that starts a new group.
    #[arg(long, default_value_t = 1.0)]
    min_gap: f64,
    /// Manual group breaks `a,b,...` (ranks ending each group).
    #[arg(long)]
    breaks: Option<String>,
    /// Report output (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectionArgs {
    volume: PathBuf,
    labels: PathBuf,
    /// Inclusive rank range `lo:hi`.
    #[arg(long, value_parser = parse_rank_range)]
    ranks: Option<(u32, u32)>,
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    q1: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    q2: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    q3: Option<(f64, f64)>,
    /// Keep intensity <= cutoff.
    #[arg(long, conflicts_with = "high_pass")]
    low_pass: Option<f64>,
    /// Keep intensity > cutoff.
    #[arg(long)]
    high_pass: Option<f64>,
    /// Cutoff is in units of the clustering threshold.
    #[arg(long)]
    scaled: bool,
    /// Clustering threshold (for scaled intensities).
    #[arg(long, conflicts_with = "manifest")]
    threshold: Option<f64>,
    /// Take the clustering threshold from a run manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    sel: SelectionArgs,
    /// Point CSV output (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CharacterizeArgs {
    #[command(flatten)]
    sel: SelectionArgs,
    #[arg(long, default_value_t = 1_000_000)]
    bins: usize,
    /// Histogram TSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Skip writing `<stem>.mask<k>.vxl` files.
    #[arg(long)]
    no_masks: bool,
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> std::result::Result<(T, T), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected `lo:hi`, got {s:?}"))?;
    let a = a.trim().parse().map_err(|_| format!("bad bound {a:?}"))?;
    let b = b.trim().parse().map_err(|_| format!("bad bound {b:?}"))?;
    Ok((a, b))
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    parse_pair(s)
}

fn parse_rank_range(s: &str) -> std::result::Result<(u32, u32), String> {
    parse_pair(s)
}

/// Parses, runs and reports; returns the process exit code.
pub fn main() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("voxclust: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.threads {
        Some(0) => Err(Error::InvalidParameter("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            pool.install(|| execute(cli.command))
        }
        None => execute(cli.command),
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Stats(a) => cmd_stats(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Groups(a) => cmd_groups(a),
        Command::Select(a) => cmd_select(a),
        Command::Characterize(a) => cmd_characterize(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs `f` on a file writer or on stdout.
fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn print_stats(s: &IntensityStats, extra: &[(&str, String)]) -> Result<()> {
    let mut out = io::stdout().lock();
    for (k, v) in extra {
        writeln!(out, "{k}\t{v}")?;
    }
    writeln!(out, "finite\t{}", s.finite_count)?;
    writeln!(out, "min\t{:?}", s.min)?;
    writeln!(out, "max\t{:?}", s.max)?;
    writeln!(out, "vmean\t{:?}", s.vmean)?;
    writeln!(out, "vmedian\t{:?}", s.vmedian)?;
    writeln!(out, "hmax\t{:?}", s.hmax)?;
    Ok(())
}

fn export_stats(s: &IntensityStats, path: &Path) -> Result<()> {
    stats::export_histogram(&s.histogram, path, &[("vmean", s.vmean), ("vmedian", s.vmedian), ("hmax", s.hmax)])
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let (grid, nan) = load_volume(&a.volume)?;
    let s = stats::intensity_stats(&grid, a.bins, a.range)?;
    print_stats(&s, &[("voxels", grid.len().to_string()), ("nan", nan.to_string())])?;
    if let Some(out) = &a.out {
        export_stats(&s, out)?;
    }
    Ok(())
}

/// Clusters `grid` and ranks the result so that label = rank.
pub fn cluster_ranked(grid: &VoxelGrid, params: &WdbscanParams) -> Result<(ClusterTable, wdbscan::LabelVolume)> {
    let raw = wdbscan::cluster(grid, params)?;
    features::rank_clusters(raw, grid)
}

fn cmd_cluster(a: ClusterArgs) -> Result<()> {
    let start = Instant::now();
    let (input, eps, min_pts, frac, abs, frozen_median, labels_path) = match &a.from_manifest {
        Some(m) => {
            let m = RunManifest::load(m)?;
            let labels = a.labels.clone().unwrap_or(m.labels);
            // The frozen absolute threshold is reused as-is.
            (m.input, m.eps, m.min_pts, m.threshold_frac, Some(m.threshold), m.vmedian, labels)
        }
        None => {
            let volume = a.volume.clone().ok_or(Error::MissingParameter("volume"))?;
            let labels = a.labels.clone().ok_or(Error::MissingParameter("--labels"))?;
            let frac = match a.threshold {
                Some(_) => None,
                None => Some(a.threshold_frac.unwrap_or(0.3)),
            };
            (volume, a.eps, a.minpts, frac, a.threshold, None, labels)
        }
    };

    let (grid, _) = load_volume(&input)?;
    let (threshold, vmedian) = match (abs, frac) {
        (Some(t), _) => (t, frozen_median),
        (None, Some(f)) => {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::InvalidParameter(format!("--threshold-frac must be positive, got {f}")));
            }
            let med = stats::median(grid.data()).ok_or(Error::EmptyData)?;
            (f * med, Some(med))
        }
        (None, None) => return Err(Error::MissingParameter("--threshold-frac or --threshold")),
    };
    let params = WdbscanParams::new(eps, min_pts, threshold)?;
    let (table, labels) = cluster_ranked(&grid, &params)?;
    save_labels(&labels, &labels_path)?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input,
        eps,
        min_pts,
        threshold_frac: frac,
        vmedian,
        threshold,
        labels: labels_path,
        clusters: table.max_rank(),
        noise: table.noise_count,
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    if let Some(path) = &a.manifest {
        manifest.save(path)?;
    }
    println!("clusters\t{}", manifest.clusters);
    println!("noise\t{}", manifest.noise);
    println!("threshold\t{:?}", manifest.threshold);
    Ok(())
}

fn load_ranked(labels: &Path, volume: &Path) -> Result<(VoxelGrid, ClusterTable, wdbscan::LabelVolume)> {
    let (grid, _) = load_volume(volume)?;
    let labels = load_labels(labels)?;
    let (table, ranked) = features::rank_clusters(labels, &grid)?;
    Ok((grid, table, ranked))
}

fn cmd_rank(a: RankArgs) -> Result<()> {
    let (_, table, ranked) = load_ranked(&a.labels, &a.volume)?;
    if let Some(p) = &a.table {
        with_output(Some(p), |w| features::write_table_csv(&table, w))?;
    }
    if let Some(p) = &a.sizes {
        with_output(Some(p), |w| features::write_sizes_tsv(&table, w))?;
    }
    if let Some(p) = &a.relabel {
        save_labels(&ranked, p)?;
    }
    println!("clusters\t{}", table.max_rank());
    println!("clustered\t{}", table.total() - table.noise_count);
    println!("noise\t{}", table.noise_count);
    Ok(())
}

fn parse_breaks(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad break {t:?}"))))
        .collect()
}

fn cmd_groups(a: GroupsArgs) -> Result<()> {
    let (_, mut table, _) = load_ranked(&a.labels, &a.volume)?;
    let source = match &a.breaks {
        Some(b) => {
            table.group_breaks = parse_breaks(b)?;
            "manual"
        }
        None => {
            table.group_breaks = if table.records.is_empty() {
                Vec::new()
            } else {
                features::detect_index_groups(&table, a.min_gap)?
            };
            "detected"
        }
    };
    let multiplets = features::symmetry_groups(&table, a.rel_tol)?;
    let total = table.total();
    with_output(a.out.as_deref(), |w| {
        writeln!(w, "clusters\t{}", table.max_rank())?;
        writeln!(w, "voxels\t{total}")?;
        writeln!(w, "noise\t{}", table.noise_count)?;
        match &a.breaks {
            Some(b) => writeln!(w, "breaks\t{b}\t{source}")?,
            None => {
                let joined: Vec<String> = table.group_breaks.iter().map(u32::to_string).collect();
                writeln!(w, "breaks\t{}\t{source}", joined.join(","))?
            }
        }
        writeln!(w, "group\tfirst_rank\tlast_rank\tclusters\tvoxels\tfraction")?;
        for (i, (lo, hi)) in table.groups().into_iter().enumerate() {
            let voxels: u64 = table.records[(lo - 1) as usize..hi as usize].iter().map(|r| r.size).sum();
            let frac = voxels as f64 / total as f64;
            writeln!(w, "{}\t{lo}\t{hi}\t{}\t{voxels}\t{frac:?}", features::group_name(i), hi - lo + 1)?;
        }
        writeln!(w, "multiplet\tfirst_rank\tlast_rank\tmultiplicity\tsize")?;
        for m in &multiplets {
            writeln!(w, "multiplet\t{}\t{}\t{}\t{}", m.first_rank, m.last_rank, m.multiplicity(), m.size)?;
        }
        Ok(())
    })
}

fn run_selection(a: &SelectionArgs) -> Result<(VoxelGrid, Vec<SelectedPoint>)> {
    let (grid, _) = load_volume(&a.volume)?;
    let labels = load_labels(&a.labels)?;
    let unit = if a.scaled { IntensityUnit::Scaled } else { IntensityUnit::Raw };
    let intensity_filter = match (a.low_pass, a.high_pass) {
        (Some(c), _) => Some(IntensityFilter { band: PassBand::Low, cutoff: c, unit }),
        (None, Some(c)) => Some(IntensityFilter { band: PassBand::High, cutoff: c, unit }),
        (None, None) => None,
    };
    let threshold = match (&a.threshold, &a.manifest) {
        (Some(t), _) => Some(*t),
        (None, Some(m)) => Some(RunManifest::load(m)?.threshold),
        (None, None) => None,
    };
    let sel = Selection { rank_range: a.ranks, q_region: [a.q1, a.q2, a.q3], intensity_filter };
    let points = features::select(&grid, &labels, &sel, threshold)?;
    Ok((grid, points))
}

fn cmd_select(a: SelectArgs) -> Result<()> {
    let (_, points) = run_selection(&a.sel)?;
    with_output(a.out.as_deref(), |w| features::write_points_csv(&points, w))?;
    if a.out.is_some() {
        println!("points\t{}", points.len());
    }
    Ok(())
}

fn cmd_characterize(a: CharacterizeArgs) -> Result<()> {
    let (_, points) = run_selection(&a.sel)?;
    let s = features::characterize(&points, a.bins)?;
    print_stats(&s, &[("points", points.len().to_string())])?;
    if let Some(out) = &a.out {
        export_stats(&s, out)?;
    }
    Ok(())
}

/// `<stem>.mask<k>.vxl` next to `out`.
pub fn mask_path(out: &Path, k: usize) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.mask{k}.vxl"))
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let spec = synth::load_spec(&a.spec)?;
    let (grid, truth) = synth::generate(&spec)?;
    save_volume(&grid, &a.out)?;
    if !a.no_masks {
        for k in 0..truth.primitives().len() {
            save_labels(&truth.mask_labels(k), mask_path(&a.out, k))?;
        }
    }
    println!("voxels\t{}", grid.len());
    println!("primitives\t{}", truth.primitives().len());
    Ok(())
}
