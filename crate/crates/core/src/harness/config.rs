//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{Mode, RenyiIndex};
use crate::ensemble::{TransferSpec, MAX_QUBITS};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Purify,
    Spectrum,
    Gap,
    Sff,
    Dbm,
    Theory,
    Oracle,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Purify,
        ExperimentKind::Spectrum,
        ExperimentKind::Gap,
        ExperimentKind::Sff,
        ExperimentKind::Dbm,
        ExperimentKind::Theory,
        ExperimentKind::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Purify => "purify",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Gap => "gap",
            ExperimentKind::Sff => "sff",
            ExperimentKind::Dbm => "dbm",
            ExperimentKind::Theory => "theory",
            ExperimentKind::Oracle => "oracle",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown experiment kind '{s}'")))
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const KEYS: &[&str] = &[
    "kind", "n_qubits", "field", "realizations", "seed", "t_max", "per_decade", "mode", "out", "workers", "renyi",
    "ds", "max_t", "budget",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n_qubits: u32,
    pub field: f64,
    pub n_realizations: u64,
    pub master_seed: u64,
    /// Last recorded time; a kind-specific default when absent.
    pub t_max: Option<u64>,
    pub per_decade: u32,
    pub mode: Mode,
    pub out_dir: PathBuf,
    /// Thread count; all available cores when absent.
    pub workers: Option<usize>,
    pub renyi: u32,
    /// Step of the eigenvalue motion; `1e-4/D` when absent.
    pub ds: Option<f64>,
    /// Largest time of the exact oracles.
    pub max_t: usize,
    /// Upper bound on the number of form-factor times.
    pub budget: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Theory,
            n_qubits: 4,
            field: 0.3,
            n_realizations: 100,
            master_seed: 0,
            t_max: None,
            per_decade: 20,
            mode: Mode::Fixed,
            out_dir: PathBuf::from("out"),
            workers: None,
            renyi: 2,
            ds: None,
            max_t: 4,
            budget: 2000,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
}

/// Parse `key = value` lines; `#` starts a comment, blank lines are ignored, later keys win.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in map {
            match k.as_str() {
                "kind" => c.kind = v.parse()?,
                "n_qubits" => c.n_qubits = parse(k, v)?,
                "field" => c.field = parse(k, v)?,
                "realizations" => c.n_realizations = parse(k, v)?,
                "seed" => c.master_seed = parse(k, v)?,
                "t_max" => c.t_max = Some(parse(k, v)?),
                "per_decade" => c.per_decade = parse(k, v)?,
                "mode" => c.mode = v.parse().map_err(|_| Error::Config(format!("bad mode '{v}'")))?,
                "out" => c.out_dir = PathBuf::from(v),
                "workers" => c.workers = Some(parse(k, v)?),
                "renyi" => c.renyi = parse(k, v)?,
                "ds" => c.ds = Some(parse(k, v)?),
                "max_t" => c.max_t = parse(k, v)?,
                "budget" => c.budget = parse(k, v)?,
                _ => return Err(Error::Config(format!("unknown key '{k}' (known: {})", KEYS.join(", ")))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_map(&parse_key_values(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 1 || self.n_qubits > MAX_QUBITS {
            return Err(Error::Config(format!("n_qubits must be in 1..={MAX_QUBITS}")));
        }
        if !self.field.is_finite() {
            return Err(Error::Config("field must be finite".into()));
        }
        if self.n_realizations == 0 {
            return Err(Error::Config("realizations must be positive".into()));
        }
        if self.per_decade == 0 {
            return Err(Error::Config("per_decade must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        if self.t_max == Some(0) {
            return Err(Error::Config("t_max must be positive".into()));
        }
        RenyiIndex::new(self.renyi).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(ds) = self.ds {
            if !(ds > 0.0 && ds.is_finite()) {
                return Err(Error::Config("ds must be positive".into()));
            }
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<TransferSpec> {
        TransferSpec::new(self.n_qubits, self.field)
    }

    /// Every key that can change numeric output, sorted, one `key=value` per line. Output
    /// location and thread count are left out.
    pub fn canonical(&self) -> String {
        let opt = |x: Option<String>| x.unwrap_or_else(|| "default".into());
        let pairs = [
            ("budget", self.budget.to_string()),
            ("ds", opt(self.ds.map(|d| format!("{d:e}")))),
            ("field", format!("{:e}", self.field)),
            ("kind", self.kind.to_string()),
            ("max_t", self.max_t.to_string()),
            ("mode", self.mode.to_string()),
            ("n_qubits", self.n_qubits.to_string()),
            ("per_decade", self.per_decade.to_string()),
            ("realizations", self.n_realizations.to_string()),
            ("renyi", self.renyi.to_string()),
            ("seed", self.master_seed.to_string()),
            ("t_max", opt(self.t_max.map(|t| t.to_string()))),
        ];
        pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// The configuration as it would be written to a file.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m: BTreeMap<String, String> = self
            .canonical()
            .lines()
            .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
            .collect();
        m.insert("out".into(), self.out_dir.display().to_string());
        m.insert("workers".into(), self.workers.map_or("default".into(), |w| w.to_string()));
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_with_comments() {
        let c = ExperimentConfig::from_text(
            "# a run\nkind = purify\nn-qubits = 8 # qubits\nfield=0.05\n\nrealizations = 100\nmode = fresh\n",
        )
        .unwrap();
        assert_eq!(c.kind, ExperimentKind::Purify);
        assert_eq!(c.n_qubits, 8);
        assert_eq!(c.mode, Mode::Fresh);
        assert_eq!(c.n_realizations, 100);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in ["kind = nope", "realizations = 0", "n_qubits = 0", "colour = red", "field", "renyi = 0"] {
            assert!(ExperimentConfig::from_text(text).is_err(), "{text}");
        }
    }

    #[test]
    fn hash_ignores_output_location_and_spelling() {
        let a = ExperimentConfig::from_text("field = 0.30\nout = a\nworkers = 2").unwrap();
        let b = ExperimentConfig::from_text("field = 3e-1\nout = b").unwrap();
        let c = ExperimentConfig::from_text("field = 0.31").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
