//! Spectral form factor `K(t) = |Tr T^t|^2` and its scaled form `kappa(s)`.

use rayon::prelude::*;

use crate::ensemble::{build_transfer, log_zeta_moment, t_star, Lane, RngStream, TransferSpec};
use crate::error::{Error, Result};
use crate::spectral::{eigendecompose, SpectralData};
use crate::stats::{MeanAccumulator, Summary};

#[derive(Clone, Debug, PartialEq)]
pub struct SffSeries {
    pub times: Vec<u64>,
    /// `ln K(t)`; `-inf` only when the trace vanishes exactly.
    pub log_k: Vec<f64>,
    /// `ln kappa(s)` at `s = t / t_*`, once scaled.
    pub log_kappa: Option<Vec<f64>>,
    pub realization: u64,
}

impl SffSeries {
    pub fn k(&self) -> Vec<f64> {
        self.log_k.iter().map(|l| l.exp()).collect()
    }
}

/// `ln |sum_alpha lambda_alpha^t|^2`, anchored at the largest modulus.
pub fn log_form_factor(spectrum: &SpectralData, t: u64) -> f64 {
    let top = spectrum.log_modulus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tf = t as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (rho, theta) in spectrum.log_modulus.iter().zip(&spectrum.phase) {
        let w = (tf * (rho - top)).exp();
        // reduce the phase before scaling so that large t keeps its precision
        let (s, c) = ((tf * theta) % std::f64::consts::TAU).sin_cos();
        re += w * c;
        im += w * s;
    }
    2.0 * tf * top + (re * re + im * im).ln()
}

pub fn form_factor(spectrum: &SpectralData, times: &[u64], realization: u64) -> SffSeries {
    SffSeries {
        times: times.to_vec(),
        log_k: times.iter().map(|&t| log_form_factor(spectrum, t)).collect(),
        log_kappa: None,
        realization,
    }
}

/// `ln kappa = ln K - t ln E[zeta^2] - ln t_*`.
pub fn scaled_sff(series: &SffSeries, spec: &TransferSpec) -> Result<SffSeries> {
    let ts = t_star(spec);
    if !ts.is_finite() {
        return Err(Error::InvalidParameter("scaled form factor is undefined in the unitary limit".into()));
    }
    let l1 = log_zeta_moment(spec, 1);
    let log_kappa = series
        .times
        .iter()
        .zip(&series.log_k)
        .map(|(&t, lk)| lk - t as f64 * l1 - ts.ln())
        .collect();
    Ok(SffSeries { log_kappa: Some(log_kappa), ..series.clone() })
}

/// Every integer time up to `3 t_*`, then a geometric tail to `20 t_*`, at most `budget` points.
pub fn default_times(spec: &TransferSpec, budget: usize) -> Vec<u64> {
    let ts = t_star(spec);
    let ts = if ts.is_finite() { ts } else { spec.dim() as f64 };
    let dense = ((3.0 * ts).floor() as u64).max(1);
    let mut out: Vec<u64> = (1..=dense.min(budget as u64)).collect();
    let end = (20.0 * ts).ceil() as u64;
    let mut t = dense as f64;
    while out.len() < budget {
        t *= 1.05;
        let ti = t.round() as u64;
        if ti > end {
            break;
        }
        if ti > *out.last().unwrap() {
            out.push(ti);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SffEnsemble {
    pub times: Vec<u64>,
    pub k: Vec<Summary>,
    /// Present for nonzero field.
    pub kappa: Option<Vec<Summary>>,
    pub s: Option<Vec<f64>>,
}

/// Mean and standard error of `K(t)` and `kappa(s)` over independent realizations. The
/// realizations run in parallel and are reduced in index order, so the result does not
/// depend on the number of threads.
pub fn ensemble_average_sff(
    spec: &TransferSpec,
    n_realizations: u64,
    times: &[u64],
    master_seed: u64,
) -> Result<SffEnsemble> {
    if n_realizations < 2 {
        return Err(Error::InvalidParameter("need at least two realizations".into()));
    }
    let series: Vec<SffSeries> = (0..n_realizations)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(master_seed, r).rng(Lane::Transfer);
            let tm = build_transfer(spec, &mut rng)?;
            Ok(form_factor(&eigendecompose(&tm, false)?, times, r))
        })
        .collect::<Result<_>>()?;
    Ok(reduce_series(spec, times, &series))
}

pub fn reduce_series(spec: &TransferSpec, times: &[u64], series: &[SffSeries]) -> SffEnsemble {
    let mut k = vec![MeanAccumulator::default(); times.len()];
    for s in series {
        for (acc, l) in k.iter_mut().zip(&s.log_k) {
            acc.push(l.exp());
        }
    }
    let ts = t_star(spec);
    let (kappa, s) = if ts.is_finite() {
        let l1 = log_zeta_moment(spec, 1);
        let mut acc = vec![MeanAccumulator::default(); times.len()];
        for s in series {
            for ((a, l), &t) in acc.iter_mut().zip(&s.log_k).zip(times) {
                a.push((l - t as f64 * l1 - ts.ln()).exp());
            }
        }
        (
            Some(acc.iter().map(|a| a.summary()).collect()),
            Some(times.iter().map(|&t| t as f64 / ts).collect()),
        )
    } else {
        (None, None)
    };
    SffEnsemble { times: times.to_vec(), k: k.iter().map(|a| a.summary()).collect(), kappa, s }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace;

    #[test]
    fn matches_direct_traces() {
        let spec = TransferSpec::new(3, 0.3).unwrap();
        let mut rng = RngStream::new(4, 0).rng(Lane::Transfer);
        let tm = build_transfer(&spec, &mut rng).unwrap();
        let sp = eigendecompose(&tm, false).unwrap();
        let series = form_factor(&sp, &[1, 2, 3, 7], 0);
        let mut p = tm.matrix.clone();
        let mut direct = Vec::new();
        for t in 1..=7 {
            if t > 1 {
                p = tm.matrix.dot(&p);
            }
            direct.push(trace(&p).norm_sqr());
        }
        for (i, &t) in series.times.iter().enumerate() {
            let want = direct[t as usize - 1];
            assert!((series.log_k[i].exp() / want - 1.0).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn large_times_stay_finite() {
        let spec = TransferSpec::new(4, 1.0).unwrap();
        let mut rng = RngStream::new(1, 0).rng(Lane::Transfer);
        let sp = eigendecompose(&build_transfer(&spec, &mut rng).unwrap(), false).unwrap();
        let s = scaled_sff(&form_factor(&sp, &[100_000], 0), &spec).unwrap();
        assert!(s.log_k[0].is_finite() && s.log_kappa.as_ref().unwrap()[0].is_finite());
        assert!(scaled_sff(&s, &TransferSpec::new(4, 0.0).unwrap()).is_err());
    }

    #[test]
    fn cancelling_pair_has_tiny_form_factor() {
        let sp = SpectralData {
            log_modulus: vec![0.0, 0.0],
            phase: vec![0.0, std::f64::consts::PI],
            right: None,
            left: None,
        };
        assert!(log_form_factor(&sp, 1) < -60.0);
        assert!((log_form_factor(&sp, 2) - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn reduction_is_independent_of_threads() {
        let spec = TransferSpec::new(3, 0.3).unwrap();
        let times = [1, 2, 5];
        let a = ensemble_average_sff(&spec, 16, &times, 11).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| ensemble_average_sff(&spec, 16, &times, 11).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn default_grid() {
        let spec = TransferSpec::new(8, 0.3).unwrap();
        let g = default_times(&spec, 500);
        let ts = t_star(&spec);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g[(3.0 * ts) as usize - 1], (3.0 * ts) as u64);
        assert!(*g.last().unwrap() as f64 <= 20.0 * ts + 1.0);
        assert_eq!(default_times(&spec, 5).len(), 5);
    }
}
