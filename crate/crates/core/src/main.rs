use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nuchaos::harness::{compare, parse_key_values, run_experiment, ExperimentConfig, Tolerance};
use nuchaos::Result;

#[derive(Parser)]
#[command(name = "nuchaos", version, about = "Ensemble experiments on non-unitary random circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropy and singular-value gap of the evolved state
    Purify(RunArgs),
    /// Radial eigenvalue density
    Spectrum(RunArgs),
    /// Leading eigenvalue gap and its distribution
    Gap(RunArgs),
    /// Spectral form factor
    Sff(RunArgs),
    /// One-step eigenvalue drift under random unitary kicks
    Dbm(RunArgs),
    /// Prediction curves only
    Theory(RunArgs),
    /// Exact small-order averages against Monte Carlo
    Oracle(RunArgs),
    /// Point-by-point z-scores of a result against a prediction
    Compare {
        result: PathBuf,
        prediction: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        z_max: f64,
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` file; flags given here take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_qubits: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    field: Option<f64>,
    #[arg(long)]
    realizations: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_max: Option<u64>,
    #[arg(long)]
    per_decade: Option<u32>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    renyi: Option<u32>,
    #[arg(long)]
    ds: Option<f64>,
    #[arg(long)]
    max_t: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
}

impl RunArgs {
    fn into_config(self, kind: &str) -> Result<ExperimentConfig> {
        let mut map: BTreeMap<String, String> = match &self.config {
            Some(path) => parse_key_values(&std::fs::read_to_string(path)?)?,
            None => BTreeMap::new(),
        };
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        set("n_qubits", self.n_qubits.map(|x| x.to_string()));
        set("field", self.field.map(|x| x.to_string()));
        set("realizations", self.realizations.map(|x| x.to_string()));
        set("seed", self.seed.map(|x| x.to_string()));
        set("t_max", self.t_max.map(|x| x.to_string()));
        set("per_decade", self.per_decade.map(|x| x.to_string()));
        set("mode", self.mode);
        set("out", self.out.map(|x| x.display().to_string()));
        set("workers", self.workers.map(|x| x.to_string()));
        set("renyi", self.renyi.map(|x| x.to_string()));
        set("ds", self.ds.map(|x| x.to_string()));
        set("max_t", self.max_t.map(|x| x.to_string()));
        set("budget", self.budget.map(|x| x.to_string()));
        map.insert("kind".into(), kind.into());
        ExperimentConfig::from_map(&map)
    }
}

fn run(args: RunArgs, kind: &str) -> Result<bool> {
    let config = args.into_config(kind)?;
    let out = run_experiment(&config)?;
    println!("config {}", out.manifest.config_hash);
    if out.manifest.resumed > 0 {
        println!("resumed {} of {} realizations", out.manifest.resumed, out.manifest.realizations);
    }
    for r in &out.results {
        println!("wrote {}", r.csv_path(&config.out_dir).display());
    }
    if kind == "oracle" {
        for name in ["oracle_sff", "oracle_purity_moment"] {
            let (Some(mc), Some(ex)) = (out.get(name), out.get(&format!("{name}_exact"))) else {
                continue;
            };
            println!("\n{name}\n{:>4} {:>22} {:>22} {:>12} {:>7}", "t", "exact", "monte carlo", "sem", "z");
            for (a, b) in mc.points.iter().zip(&ex.points) {
                let z = (a.mean - b.mean).abs() / a.sem;
                println!("{:>4} {:>22.15e} {:>22.15e} {:>12.4e} {:>7.2}", a.x, b.mean, a.mean, a.sem, z);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Purify(a) => run(a, "purify"),
        Command::Spectrum(a) => run(a, "spectrum"),
        Command::Gap(a) => run(a, "gap"),
        Command::Sff(a) => run(a, "sff"),
        Command::Dbm(a) => run(a, "dbm"),
        Command::Theory(a) => run(a, "theory"),
        Command::Oracle(a) => run(a, "oracle"),
        Command::Compare { result, prediction, z_max, x_min, x_max } => {
            let tol = Tolerance {
                z_max,
                x_min: x_min.unwrap_or(f64::NEG_INFINITY),
                x_max: x_max.unwrap_or(f64::INFINITY),
            };
            compare(&result, &prediction, tol).map(|rep| {
                for (x, z) in &rep.z {
                    println!("{x:.10e} {z:.3}");
                }
                println!("max z {:.3} over {} points: {}", rep.max_z, rep.z.len(), if rep.pass { "PASS" } else { "FAIL" });
                rep.pass
            })
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
