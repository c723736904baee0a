//! Result files: `x,mean,sem,n` CSVs, the JSON manifest and point-by-point comparison.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::Summary;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub mean: f64,
    pub sem: f64,
    pub n: u64,
}

impl Point {
    pub fn from_summary(x: f64, s: Summary) -> Self {
        Self { x, mean: s.mean, sem: s.sem, n: s.n }
    }

    /// A deterministic value: `n = 1`, no error bar.
    pub fn exact(x: f64, value: f64) -> Self {
        Self { x, mean: value, sem: 0.0, n: 1 }
    }
}

/// One observable over a grid, with the provenance of the run that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub observable: String,
    pub points: Vec<Point>,
    pub config_hash: String,
    pub version: String,
}

pub fn artifact_version() -> String {
    format!("nuchaos-{}", env!("CARGO_PKG_VERSION"))
}

impl EnsembleResult {
    pub fn new(observable: impl Into<String>, points: Vec<Point>, config_hash: &str) -> Self {
        Self { observable: observable.into(), points, config_hash: config_hash.to_string(), version: artifact_version() }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,mean,sem,n\n");
        for p in &self.points {
            s.push_str(&format!("{:.16e},{:.16e},{:.16e},{}\n", p.x, p.mean, p.sem, p.n));
        }
        s
    }

    pub fn csv_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.csv", self.observable))
    }

    pub fn write_csv(&self, dir: &Path) -> Result<PathBuf> {
        let path = self.csv_path(dir);
        write_atomic(&path, self.to_csv().as_bytes())?;
        Ok(path)
    }
}

pub fn read_csv(path: &Path) -> Result<Vec<Point>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format(format!("{}: empty", path.display())))?;
    if header.trim() != "x,mean,sem,n" {
        return Err(Error::Format(format!("{}: unexpected header '{header}'", path.display())));
    }
    let bad = |i: usize| Error::Format(format!("{}: line {}", path.display(), i + 2));
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(bad(i));
            }
            Ok(Point {
                x: f[0].parse().map_err(|_| bad(i))?,
                mean: f[1].parse().map_err(|_| bad(i))?,
                sem: f[2].parse().map_err(|_| bad(i))?,
                n: f[3].parse().map_err(|_| bad(i))?,
            })
        })
        .collect()
}

/// Write through a temporary file so that readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub realization: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: std::collections::BTreeMap<String, String>,
    pub config_hash: String,
    pub master_seed: u64,
    pub seed_rule: String,
    pub version: String,
    pub libraries: std::collections::BTreeMap<String, String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub realizations: u64,
    pub resumed: u64,
    pub excluded: Vec<Exclusion>,
    pub outputs: Vec<String>,
}

pub const SEED_RULE: &str = "ChaCha20 keyed by SHA-256(\"nuchaos-stream\" || master_seed as u64 LE || lane byte), \
stream = realization index; lanes: 0 transfer unitary, 1 fresh unitaries, 2 perturbations, 3 auxiliary";

pub fn libraries() -> std::collections::BTreeMap<String, String> {
    [
        ("nuchaos", env!("CARGO_PKG_VERSION")),
        ("lapack", "OpenBLAS (system)"),
        ("ndarray", "0.17"),
        ("ndarray-linalg", "0.18"),
        ("rand_chacha", "0.9"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Which part of a comparison counts, and how far it may stray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub z_max: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl Tolerance {
    pub fn new(z_max: f64) -> Self {
        Self { z_max, x_min: f64::NEG_INFINITY, x_max: f64::INFINITY }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    /// `(x, z)` for every compared point.
    pub z: Vec<(f64, f64)>,
    pub max_z: f64,
    pub pass: bool,
}

/// `|mean_a - mean_b| / sqrt(sem_a^2 + sem_b^2)` point by point over the selected x-range.
pub fn compare_points(result: &[Point], prediction: &[Point], tol: Tolerance) -> Result<ComparisonReport> {
    if result.len() != prediction.len() {
        return Err(Error::GridMismatch(format!("{} vs {} points", result.len(), prediction.len())));
    }
    let mut z = Vec::new();
    for (a, b) in result.iter().zip(prediction) {
        if (a.x - b.x).abs() > 1e-12 * a.x.abs().max(b.x.abs()).max(1e-300) {
            return Err(Error::GridMismatch(format!("x = {} vs {}", a.x, b.x)));
        }
        if a.x < tol.x_min || a.x > tol.x_max {
            continue;
        }
        let s = Summary { mean: a.mean, sem: a.sem.hypot(b.sem), n: a.n };
        z.push((a.x, s.z_score(b.mean)));
    }
    let max_z = z.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(ComparisonReport { pass: !z.is_empty() && max_z <= tol.z_max, max_z, z })
}

pub fn compare(result: &Path, prediction: &Path, tol: Tolerance) -> Result<ComparisonReport> {
    compare_points(&read_csv(result)?, &read_csv(prediction)?, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![
            Point { x: 0.1, mean: 1.0 / 3.0, sem: 2f64.sqrt() * 1e-300, n: 7 },
            Point { x: 1e20, mean: -5e-324, sem: 0.0, n: 1 },
        ];
        let r = EnsembleResult::new("obs", pts.clone(), "h");
        let path = r.write_csv(dir.path()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,mean,sem,n\n") && !text.contains('\r'));
        assert_eq!(read_csv(&path).unwrap(), pts);
    }

    #[test]
    fn identical_and_corrupted_comparisons() {
        let a = vec![Point { x: 1.0, mean: 2.0, sem: 0.1, n: 10 }, Point { x: 2.0, mean: 3.0, sem: 0.1, n: 10 }];
        let same = compare_points(&a, &a, Tolerance::new(3.0)).unwrap();
        assert!(same.pass && same.max_z == 0.0);
        let mut b = a.clone();
        b[1].mean = 4.0;
        assert!(!compare_points(&a, &b, Tolerance::new(3.0)).unwrap().pass);
        let window = Tolerance { x_max: 1.5, ..Tolerance::new(3.0) };
        assert!(compare_points(&a, &b, window).unwrap().pass);
        b[0].x = 1.5;
        assert!(matches!(compare_points(&a, &b, Tolerance::new(3.0)), Err(Error::GridMismatch(_))));
    }
}
