//! Flat `key = value` run manifests written by `cluster`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    pub input: PathBuf,
    pub eps: f64,
    pub min_pts: f64,
    /// Set when the threshold was derived from the median.
    pub threshold_frac: Option<f64>,
    pub vmedian: Option<f64>,
    /// Absolute threshold actually used.
    pub threshold: f64,
    pub labels: PathBuf,
    pub clusters: u32,
    pub noise: u64,
    pub threads: usize,
    pub wall_time_s: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:?}"))
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = String::from("# voxclust cluster run\n");
        let _ = writeln!(s, "tool_version = {}", self.tool_version);
        let _ = writeln!(s, "input = {}", self.input.display());
        let _ = writeln!(s, "eps = {:?}", self.eps);
        let _ = writeln!(s, "min_pts = {:?}", self.min_pts);
        let _ = writeln!(s, "threshold_frac = {}", opt(self.threshold_frac));
        let _ = writeln!(s, "vmedian = {}", opt(self.vmedian));
        let _ = writeln!(s, "threshold = {:?}", self.threshold);
        let _ = writeln!(s, "labels = {}", self.labels.display());
        let _ = writeln!(s, "clusters = {}", self.clusters);
        let _ = writeln!(s, "noise = {}", self.noise);
        let _ = writeln!(s, "threads = {}", self.threads);
        let _ = writeln!(s, "wall_time_s = {:?}", self.wall_time_s);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config { line: i + 1, msg: "expected `key = value`".into() })?;
            fields.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        let end = text.lines().count();
        let get = |key: &str| -> Result<(usize, String)> {
            fields.get(key).cloned().ok_or_else(|| Error::Config { line: end, msg: format!("missing `{key}`") })
        };
        fn num<T: std::str::FromStr>((line, v): (usize, String)) -> Result<T> {
            v.parse().map_err(|_| Error::Config { line, msg: format!("bad value {v:?}") })
        }
        let opt_num = |key: &str| -> Result<Option<f64>> {
            let (line, v) = get(key)?;
            if v == "none" {
                Ok(None)
            } else {
                num((line, v)).map(Some)
            }
        };
        Ok(RunManifest {
            tool_version: get("tool_version")?.1,
            input: PathBuf::from(get("input")?.1),
            eps: num(get("eps")?)?,
            min_pts: num(get("min_pts")?)?,
            threshold_frac: opt_num("threshold_frac")?,
            vmedian: opt_num("vmedian")?,
            threshold: num(get("threshold")?)?,
            labels: PathBuf::from(get("labels")?.1),
            clusters: num(get("clusters")?)?,
            noise: num(get("noise")?)?,
            threads: num(get("threads")?)?,
            wall_time_s: num(get("wall_time_s")?)?,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}
