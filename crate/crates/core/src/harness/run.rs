//! Experiment execution: per-realization work in parallel, a completion ledger for resuming,
//! and reduction in realization order.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::output::{
    libraries, unix_now, write_atomic, EnsembleResult, Exclusion, Manifest, Point, SEED_RULE,
};
use crate::dbm::{dbm_drift_estimate, default_step};
use crate::dynamics::{evolve_singular, geometric_grid, Mode, RenyiIndex};
use crate::ensemble::{build_transfer, build_zeta, rho_edge, t_star, Lane, RngStream, TransferSpec};
use crate::error::{Error, Result};
use crate::sff::{default_times, log_form_factor};
use crate::spectral::{default_edges, eigendecompose, leading_gap};
use crate::stats::MeanAccumulator;
use crate::theory::{
    density_prediction, entropy_early_prediction, entropy_late_prediction, gap_pdf_prediction,
    log_sff_prediction, mean_gap_prediction, scaled_sff_prediction, tail_prediction, GapConstants,
};
use crate::weingarten::{exact_purity_moment_fresh, exact_sff_small_t, MAX_PURITY_TIME};

/// Excluded realizations may not exceed this fraction of the run.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;
const LEDGER_DIR: &str = "ledger";
const GAP_BIN: f64 = 0.1;
const GAP_RANGE: f64 = 4.0;

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub manifest: Manifest,
    pub results: Vec<EnsembleResult>,
    pub manifest_path: PathBuf,
}

impl RunOutput {
    pub fn get(&self, observable: &str) -> Option<&EnsembleResult> {
        self.results.iter().find(|r| r.observable == observable)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Outcome<T> {
    Done(T),
    Excluded(String),
}

#[derive(Serialize, Deserialize)]
struct LedgerEntry<T> {
    config_hash: String,
    realization: u64,
    outcome: Outcome<T>,
}

/// Numerical failures exclude a realization; anything else aborts the run.
fn is_excludable(e: &Error) -> bool {
    matches!(e, Error::LinAlg(_) | Error::NonConvergence(_) | Error::Collision(_))
}

struct Completed<T> {
    values: Vec<(u64, T)>,
    excluded: Vec<Exclusion>,
    resumed: u64,
}

fn run_realizations<T, F>(config: &ExperimentConfig, hash: &str, work: F) -> Result<Completed<T>>
where
    T: Serialize + DeserializeOwned + Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let dir = config.out_dir.join(LEDGER_DIR);
    fs::create_dir_all(&dir)?;
    let path = |r: u64| dir.join(format!("r{r:08}.json"));

    let mut known: Vec<Option<Outcome<T>>> = Vec::with_capacity(config.n_realizations as usize);
    for r in 0..config.n_realizations {
        let p = path(r);
        known.push(if p.exists() {
            let entry: LedgerEntry<T> = serde_json::from_slice(&fs::read(&p)?)?;
            if entry.config_hash != hash || entry.realization != r {
                return Err(Error::ResumeMismatch(format!(
                    "{} belongs to config {} (this run is {hash})",
                    p.display(),
                    entry.config_hash
                )));
            }
            Some(entry.outcome)
        } else {
            None
        });
    }
    let resumed = known.iter().filter(|k| k.is_some()).count() as u64;
    let todo: Vec<u64> = (0..config.n_realizations).filter(|&r| known[r as usize].is_none()).collect();

    let fresh: Vec<(u64, Outcome<T>)> = todo
        .into_par_iter()
        .map(|r| {
            let outcome = match work(r) {
                Ok(v) => Outcome::Done(v),
                Err(e) if is_excludable(&e) => {
                    log::warn!("realization {r} excluded: {e}");
                    Outcome::Excluded(e.to_string())
                }
                Err(e) => return Err(e),
            };
            let entry = LedgerEntry { config_hash: hash.to_string(), realization: r, outcome };
            write_atomic(&path(r), &serde_json::to_vec(&entry)?)?;
            Ok((r, entry.outcome))
        })
        .collect::<Result<_>>()?;
    for (r, o) in fresh {
        known[r as usize] = Some(o);
    }

    let mut values = Vec::new();
    let mut excluded = Vec::new();
    for (r, o) in known.into_iter().enumerate() {
        match o.expect("every realization has an outcome") {
            Outcome::Done(v) => values.push((r as u64, v)),
            Outcome::Excluded(reason) => excluded.push(Exclusion { realization: r as u64, reason }),
        }
    }
    Ok(Completed { values, excluded, resumed })
}

fn summarize<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> Vec<MeanAccumulator> {
    let mut acc = vec![MeanAccumulator::default(); width];
    for row in rows {
        for (a, &x) in acc.iter_mut().zip(row) {
            a.push(x);
        }
    }
    acc
}

fn series(name: &str, xs: &[f64], acc: &[MeanAccumulator], hash: &str) -> EnsembleResult {
    EnsembleResult::new(name, xs.iter().zip(acc).map(|(&x, a)| Point::from_summary(x, a.summary())).collect(), hash)
}

fn exact_series(name: &str, xs: &[f64], f: impl Fn(f64) -> f64, hash: &str) -> EnsembleResult {
    EnsembleResult::new(name, xs.iter().map(|&x| Point::exact(x, f(x))).collect(), hash)
}

fn default_t_max(spec: &TransferSpec, mode: Mode) -> u64 {
    let ts = t_star(spec);
    if !ts.is_finite() {
        return spec.dim() as u64;
    }
    match mode {
        Mode::Fixed => (10.0 * ts).ceil() as u64,
        Mode::Fresh => (5.0 * ts * ts).ceil() as u64,
    }
    .max(1)
}

/// Run one experiment, writing one CSV per observable and `manifest.json` into the output
/// directory. Realizations already present in the ledger are reused rather than recomputed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    fs::create_dir_all(&config.out_dir)?;
    let started = unix_now();
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = config.workers {
            b = b.num_threads(w);
        }
        b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?
    };
    let (results, excluded, resumed) = pool.install(|| execute(config))?;

    let outputs: Vec<String> = results.iter().map(|r| format!("{}.csv", r.observable)).collect();
    for r in &results {
        r.write_csv(&config.out_dir)?;
    }
    let manifest = Manifest {
        config: config.echo(),
        config_hash: config.hash(),
        master_seed: config.master_seed,
        seed_rule: SEED_RULE.to_string(),
        version: super::output::artifact_version(),
        libraries: libraries(),
        started_unix: started,
        finished_unix: unix_now(),
        realizations: config.n_realizations,
        resumed,
        excluded,
        outputs,
    };
    let manifest_path = config.out_dir.join("manifest.json");
    write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;

    let total = config.n_realizations as usize;
    let n_ex = manifest.excluded.len();
    if n_ex as f64 > MAX_EXCLUDED_FRACTION * total as f64 {
        return Err(Error::TooManyExclusions { excluded: n_ex, total });
    }
    Ok(RunOutput { manifest, results, manifest_path })
}

type Executed = (Vec<EnsembleResult>, Vec<Exclusion>, u64);

fn execute(config: &ExperimentConfig) -> Result<Executed> {
    let spec = config.spec()?;
    let hash = config.hash();
    match config.kind {
        ExperimentKind::Purify => purify(config, &spec, &hash),
        ExperimentKind::Spectrum => spectrum(config, &spec, &hash),
        ExperimentKind::Gap => gap(config, &spec, &hash),
        ExperimentKind::Sff => sff(config, &spec, &hash),
        ExperimentKind::Dbm => dbm(config, &spec, &hash),
        ExperimentKind::Theory => Ok((theory(config, &spec, &hash)?, Vec::new(), 0)),
        ExperimentKind::Oracle => oracle(config, &spec, &hash),
    }
}

#[derive(Serialize, Deserialize)]
struct PurifyRow {
    entropy: Vec<f64>,
    gap: Vec<f64>,
}

fn purify(config: &ExperimentConfig, spec: &TransferSpec, hash: &str) -> Result<Executed> {
    let renyi = RenyiIndex::new(config.renyi)?;
    let t_max = config.t_max.unwrap_or_else(|| default_t_max(spec, config.mode));
    let times = geometric_grid(t_max, config.per_decade);
    let done = run_realizations(config, hash, |r| {
        let stream = RngStream::new(config.master_seed, r);
        let tm = build_transfer(spec, &mut stream.rng(Lane::Transfer))?;
        let traj = evolve_singular(&tm, &times, config.mode, &mut stream.rng(Lane::Fresh))?;
        let entropy = times.iter().map(|&t| traj.renyi_entropy(t, renyi)).collect::<Result<_>>()?;
        let gap = if spec.dim() >= 2 {
            times.iter().map(|&t| traj.singular_gap(t)).collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(PurifyRow { entropy, gap })
    })?;
    let xs: Vec<f64> = times.iter().map(|&t| t as f64).collect();
    let name = format!("entropy_s{}", renyi.get());
    let mut out = vec![series(&name, &xs, &summarize(done.values.iter().map(|(_, v)| v.entropy.as_slice()), xs.len()), hash)];
    if spec.dim() >= 2 {
        let acc = summarize(done.values.iter().map(|(_, v)| v.gap.as_slice()), xs.len());
        out.push(series("singular_gap", &xs, &acc, hash));
    }
    out.push(exact_series("entropy_early_prediction", &xs, |t| entropy_early_prediction(spec, t), hash));
    if t_star(spec).is_finite() {
        let k = GapConstants::default();
        let late: Vec<Point> = xs
            .iter()
            .map(|&t| entropy_late_prediction(spec, t, config.mode, renyi, k).map(|v| Point::exact(t, v)))
            .collect::<Result<_>>()?;
        out.push(EnsembleResult::new("entropy_late_prediction", late, hash));
    }
    Ok((out, done.excluded, done.resumed))
}

#[derive(Serialize, Deserialize)]
struct CountsRow {
    counts: Vec<u32>,
    outside: u32,
}

fn spectrum_edges(spec: &TransferSpec) -> Vec<f64> {
    let ts = t_star(spec);
    let extent = rho_edge(spec) + if ts.is_finite() { 12.0 / ts } else { 1e-6 };
    default_edges(spec, extent)
}

fn spectrum(config: &ExperimentConfig, spec: &TransferSpec, hash: &str) -> Result<Executed> {
    let edges = spectrum_edges(spec);
    let nb = edges.len() - 1;
    let width = edges[1] - edges[0];
    let done = run_realizations(config, hash, |r| {
        let tm = build_transfer(spec, &mut RngStream::new(config.master_seed, r).rng(Lane::Transfer))?;
        let s = eigendecompose(&tm, false)?;
        let mut counts = vec![0u32; nb];
        let mut outside = 0;
        for &rho in &s.log_modulus {
            let k = ((rho - edges[0]) / width).floor();
            if k >= 0.0 && (k as usize) < nb {
                counts[k as usize] += 1;
            } else {
                outside += 1;
            }
        }
        Ok(CountsRow { counts, outside })
    })?;
    let centers: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let rows: Vec<Vec<f64>> = done.values.iter().map(|(_, v)| v.counts.iter().map(|&c| c as f64 / width).collect()).collect();
    let density = summarize(rows.iter().map(|r| r.as_slice()), nb);
    let mut out = vec![series("radial_density", &centers, &density, hash)];

    let integral: MeanAccumulator = rows.iter().map(|r| r.iter().sum::<f64>() * width).collect();
    out.push(EnsembleResult::new("density_integral", vec![Point::from_summary(spec.dim() as f64, integral.summary())], hash));

    let ts = t_star(spec);
    if ts.is_finite() {
        out.push(EnsembleResult::new("radial_density_prediction", density_curve(spec, &centers)?, hash));
        let edge = rho_edge(spec);
        let n_edge = ts * ts;
        let tail_x: Vec<f64> = centers.iter().copied().filter(|&c| c >= edge).collect();
        let first = centers.len() - tail_x.len();
        let pts: Vec<Point> = tail_x
            .iter()
            .zip(&density[first..])
            .map(|(&x, a)| Point { x, mean: a.mean() / n_edge, sem: a.sem() / n_edge, n: a.count() })
            .collect();
        out.push(EnsembleResult::new("radial_tail", pts, hash));
        let pred: Vec<Point> = tail_x.iter().map(|&x| tail_prediction(spec, x).map(|v| Point::exact(x, v))).collect::<Result<_>>()?;
        out.push(EnsembleResult::new("radial_tail_prediction", pred, hash));
    }
    Ok((out, done.excluded, done.resumed))
}

/// Predicted density at each center, zero where the saddle lies beyond its validity range.
fn density_curve(spec: &TransferSpec, centers: &[f64]) -> Result<Vec<Point>> {
    centers
        .iter()
        .map(|&x| match density_prediction(spec, x) {
            Ok(v) => Ok(Point::exact(x, v)),
            Err(Error::InvalidParameter(_)) => Ok(Point::exact(x, 0.0)),
            Err(e) => Err(e),
        })
        .collect()
}

fn gap(config: &ExperimentConfig, spec: &TransferSpec, hash: &str) -> Result<Executed> {
    if spec.dim() < 2 {
        return Err(Error::Config("the gap needs at least two eigenvalues".into()));
    }
    let done = run_realizations(config, hash, |r| {
        let tm = build_transfer(spec, &mut RngStream::new(config.master_seed, r).rng(Lane::Transfer))?;
        leading_gap(&eigendecompose(&tm, false)?)
    })?;
    let x = config.n_qubits as f64;
    let acc: MeanAccumulator = done.values.iter().map(|(_, g)| *g).collect();
    let mut out = vec![EnsembleResult::new("leading_gap", vec![Point::from_summary(x, acc.summary())], hash)];
    let ts = t_star(spec);
    if ts.is_finite() {
        let law = mean_gap_prediction(spec, GapConstants::default())?;
        out.push(EnsembleResult::new("leading_gap_prediction", vec![Point::exact(x, law.a_form)], hash));
        out.push(EnsembleResult::new("leading_gap_prediction_b", vec![Point::exact(x, law.b_form)], hash));

        let scale = (2.0 * ts * ts).sqrt();
        let nb = (GAP_RANGE / GAP_BIN).round() as usize;
        let centers: Vec<f64> = (0..nb).map(|k| (k as f64 + 0.5) * GAP_BIN).collect();
        let mut bins = vec![MeanAccumulator::default(); nb];
        for (_, g) in &done.values {
            let k = (g * scale / GAP_BIN).floor() as usize;
            for (j, b) in bins.iter_mut().enumerate() {
                b.push(if j == k { 1.0 / GAP_BIN } else { 0.0 });
            }
        }
        out.push(series("scaled_gap_distribution", &centers, &bins, hash));
        if ts / (2.0 * std::f64::consts::PI).sqrt() > 2.0 {
            let pred: Vec<Point> = centers
                .iter()
                .map(|&c| gap_pdf_prediction(spec, c / scale).map(|p| Point::exact(c, p.pdf / scale)))
                .collect::<Result<_>>()?;
            out.push(EnsembleResult::new("scaled_gap_distribution_prediction", pred, hash));
        }
    }
    Ok((out, done.excluded, done.resumed))
}

fn sff_times(config: &ExperimentConfig, spec: &TransferSpec) -> Vec<u64> {
    let mut times = default_times(spec, config.budget);
    if let Some(t) = config.t_max {
        times.retain(|&x| x <= t);
        if times.is_empty() {
            times.push(t);
        }
    }
    times
}

fn sff(config: &ExperimentConfig, spec: &TransferSpec, hash: &str) -> Result<Executed> {
    let times = sff_times(config, spec);
    let done = run_realizations(config, hash, |r| {
        let tm = build_transfer(spec, &mut RngStream::new(config.master_seed, r).rng(Lane::Transfer))?;
        let s = eigendecompose(&tm, false)?;
        Ok(times.iter().map(|&t| log_form_factor(&s, t)).collect::<Vec<f64>>())
    })?;
    let xs: Vec<f64> = times.iter().map(|&t| t as f64).collect();
    let rows: Vec<Vec<f64>> = done.values.iter().map(|(_, v)| v.iter().map(|l| l.exp()).collect()).collect();
    let mut out = vec![
        series("sff", &xs, &summarize(rows.iter().map(|r| r.as_slice()), xs.len()), hash),
        exact_series("sff_prediction", &xs, |t| log_sff_prediction(spec, t).exp(), hash),
    ];
    let ts = t_star(spec);
    if ts.is_finite() {
        let l1 = crate::ensemble::log_zeta_moment(spec, 1);
        let s: Vec<f64> = xs.iter().map(|t| t / ts).collect();
        let kappa: Vec<Vec<f64>> = done
            .values
            .iter()
            .map(|(_, v)| v.iter().zip(&xs).map(|(l, t)| (l - t * l1 - ts.ln()).exp()).collect())
            .collect();
        out.push(series("kappa", &s, &summarize(kappa.iter().map(|r| r.as_slice()), s.len()), hash));
        let pred: Vec<Point> = xs
            .iter()
            .zip(&s)
            .map(|(&t, &si)| Point::exact(si, (log_sff_prediction(spec, t) - t * l1 - ts.ln()).exp()))
            .collect();
        out.push(EnsembleResult::new("kappa_prediction", pred, hash));
        out.push(exact_series("kappa_scaling_limit", &s, scaled_sff_prediction, hash));
    }
    Ok((out, done.excluded, done.resumed))
}

fn dbm(config: &ExperimentConfig, spec: &TransferSpec, hash: &str) -> Result<Executed> {
    let stream = RngStream::new(config.master_seed, 0);
    let tm = build_transfer(spec, &mut stream.rng(Lane::Transfer))?;
    let ds = config.ds.unwrap_or_else(|| default_step(spec.dim()));
    let rep = dbm_drift_estimate(&tm, ds, config.n_realizations, &mut stream.rng(Lane::Auxiliary))?;
    let xs: Vec<f64> = (0..rep.eigenvalues.len()).map(|m| m as f64).collect();
    let part = |name: &str, acc: Vec<MeanAccumulator>| series(name, &xs, &acc, hash);
    let exact = |name: &str, v: Vec<f64>| EnsembleResult::new(name, xs.iter().zip(v).map(|(&x, y)| Point::exact(x, y)).collect(), hash);
    let out = vec![
        part("drift_re", rep.drift.iter().map(|a| a.re).collect()),
        part("drift_im", rep.drift.iter().map(|a| a.im).collect()),
        exact("drift_re_prediction", rep.predicted_drift.iter().map(|z| z.re).collect()),
        exact("drift_im_prediction", rep.predicted_drift.iter().map(|z| z.im).collect()),
        part("square_re", rep.square.iter().map(|a| a.re).collect()),
        part("square_im", rep.square.iter().map(|a| a.im).collect()),
        exact("square_re_prediction", rep.predicted_square.iter().map(|z| z.re).collect()),
        exact("square_im_prediction", rep.predicted_square.iter().map(|z| z.im).collect()),
        part("radial_drift", rep.radial.clone()),
    ];
    let excluded = (0..rep.discarded)
        .map(|i| Exclusion { realization: i, reason: "ambiguous eigenvalue matching".into() })
        .collect();
    Ok((out, excluded, 0))
}

fn theory(config: &ExperimentConfig, spec: &TransferSpec, hash: &str) -> Result<Vec<EnsembleResult>> {
    let ts = t_star(spec);
    let t_max = config.t_max.unwrap_or_else(|| default_t_max(spec, config.mode));
    let grid: Vec<f64> = geometric_grid(t_max, config.per_decade).iter().map(|&t| t as f64).collect();
    let mut out = vec![
        exact_series("entropy_early_prediction", &grid, |t| entropy_early_prediction(spec, t), hash),
        exact_series("sff_prediction", &grid, |t| log_sff_prediction(spec, t).exp(), hash),
    ];
    if !ts.is_finite() {
        return Ok(out);
    }
    let renyi = RenyiIndex::new(config.renyi)?;
    let late: Vec<Point> = grid
        .iter()
        .map(|&t| entropy_late_prediction(spec, t, config.mode, renyi, GapConstants::default()).map(|v| Point::exact(t, v)))
        .collect::<Result<_>>()?;
    out.push(EnsembleResult::new("entropy_late_prediction", late, hash));
    let edges = spectrum_edges(spec);
    let centers: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    out.push(EnsembleResult::new("radial_density_prediction", density_curve(spec, &centers)?, hash));
    let edge = rho_edge(spec);
    let tail: Vec<Point> = centers
        .iter()
        .filter(|&&c| c >= edge)
        .map(|&x| tail_prediction(spec, x).map(|v| Point::exact(x, v)))
        .collect::<Result<_>>()?;
    out.push(EnsembleResult::new("radial_tail_prediction", tail, hash));
    let s: Vec<f64> = (1..=60).map(|k| k as f64 * 0.05).collect();
    out.push(exact_series("kappa_scaling_limit", &s, scaled_sff_prediction, hash));
    let law = mean_gap_prediction(spec, GapConstants::default())?;
    let x = config.n_qubits as f64;
    out.push(EnsembleResult::new("leading_gap_prediction", vec![Point::exact(x, law.a_form)], hash));
    out.push(EnsembleResult::new("leading_gap_prediction_b", vec![Point::exact(x, law.b_form)], hash));
    if ts / (2.0 * std::f64::consts::PI).sqrt() > 2.0 {
        let scale = (2.0 * ts * ts).sqrt();
        let centers: Vec<f64> = (0..(GAP_RANGE / GAP_BIN) as usize).map(|k| (k as f64 + 0.5) * GAP_BIN).collect();
        let pred: Vec<Point> = centers
            .iter()
            .map(|&c| gap_pdf_prediction(spec, c / scale).map(|p| Point::exact(c, p.pdf / scale)))
            .collect::<Result<_>>()?;
        out.push(EnsembleResult::new("scaled_gap_distribution_prediction", pred, hash));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct OracleRow {
    sff: Vec<f64>,
    purity_moment: Vec<f64>,
}

fn oracle(config: &ExperimentConfig, spec: &TransferSpec, hash: &str) -> Result<Executed> {
    let d = spec.dim();
    let sff_t = config.max_t.min(crate::weingarten::MAX_SFF_TIME).min(d);
    let pur_t = config.max_t.min(MAX_PURITY_TIME);
    if sff_t == 0 {
        return Err(Error::Config("max_t must be positive".into()));
    }
    let zeta = build_zeta(spec);
    let done = run_realizations(config, hash, |r| {
        let stream = RngStream::new(config.master_seed, r);
        let tm = build_transfer(spec, &mut stream.rng(Lane::Transfer))?;
        let s = eigendecompose(&tm, false)?;
        let sff = (1..=sff_t as u64).map(|t| log_form_factor(&s, t).exp()).collect();
        let purity_moment = if d >= 2 && pur_t > 0 {
            let times: Vec<u64> = (1..=pur_t as u64).collect();
            let traj = evolve_singular(&tm, &times, Mode::Fresh, &mut stream.rng(Lane::Fresh))?;
            traj.log_singular.iter().map(|sig| sig.iter().map(|x| (4.0 * x).exp()).sum()).collect()
        } else {
            Vec::new()
        };
        Ok(OracleRow { sff, purity_moment })
    })?;
    let xs: Vec<f64> = (1..=sff_t).map(|t| t as f64).collect();
    let mut out = vec![
        series("oracle_sff", &xs, &summarize(done.values.iter().map(|(_, v)| v.sff.as_slice()), xs.len()), hash),
        EnsembleResult::new(
            "oracle_sff_exact",
            (1..=sff_t).map(|t| exact_sff_small_t(&zeta, t).map(|v| Point::exact(t as f64, v))).collect::<Result<_>>()?,
            hash,
        ),
    ];
    if d >= 4 && pur_t > 0 {
        let px: Vec<f64> = (1..=pur_t).map(|t| t as f64).collect();
        let acc = summarize(done.values.iter().map(|(_, v)| v.purity_moment.as_slice()), px.len());
        out.push(series("oracle_purity_moment", &px, &acc, hash));
        let exact: Vec<Point> = (1..=pur_t)
            .map(|t| exact_purity_moment_fresh(&zeta, t, 2, 1).map(|v| Point::exact(t as f64, v)))
            .collect::<Result<_>>()?;
        out.push(EnsembleResult::new("oracle_purity_moment_exact", exact, hash));
    }
    Ok((out, done.excluded, done.resumed))
}

/// Remove the completion ledger of a finished run.
pub fn clear_ledger(out_dir: &Path) -> Result<()> {
    let dir = out_dir.join(LEDGER_DIR);
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    Ok(())
}
