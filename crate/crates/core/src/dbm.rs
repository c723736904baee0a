//! One step of the non-unitary Dyson Brownian motion `T -> T exp(i H sqrt(ds))`.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::ensemble::{complex_normal, Lane, RngStream, TransferMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::spectral::{eigendecompose, eigendecompose_matrix, overlap_matrix, SpectralData};
use crate::stats::{ComplexAccumulator, MeanAccumulator};

// closer eigenvalues make the second-order prediction meaningless
const MIN_SEPARATION: f64 = 1e-12;
// largest dimension for which the full cross-moment matrix is accumulated
const MAX_CROSS_DIM: usize = 64;

pub fn default_step(dim: usize) -> f64 {
    1e-4 / dim as f64
}

fn min_separation(values: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            best = best.min((a - b).norm());
        }
    }
    best
}

/// Mean eigenvalue drift `-(D/2) ds lambda_m - ds sum_{n != m} lambda_m lambda_n / (lambda_m - lambda_n)`
/// with `D` the number of eigenvalues.
pub fn dbm_drift_theory(spectrum: &SpectralData, ds: f64) -> Result<Vec<C64>> {
    let lam = spectrum.eigenvalues();
    let sep = min_separation(&lam);
    if sep <= MIN_SEPARATION {
        return Err(Error::Collision(sep));
    }
    let d = lam.len() as f64;
    Ok(lam
        .iter()
        .enumerate()
        .map(|(m, &lm)| {
            let pair: C64 = lam.iter().enumerate().filter(|&(n, _)| n != m).map(|(_, &ln)| lm * ln / (lm - ln)).sum();
            -0.5 * d * ds * lm - ds * pair
        })
        .collect())
}

/// Pair interaction in polar form, per unit `ds`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairForce {
    /// `-sinh(d rho) / (cosh(d rho) - cos(d phi))`: attraction in `rho`.
    pub radial: f64,
    /// `sin(d phi) / (cosh(d rho) - cos(d phi))`: repulsion in angle.
    pub azimuthal: f64,
    /// `lambda_m lambda_n / (lambda_n - lambda_m)`.
    pub complex: C64,
}

pub fn pairwise_force(lambda_m: C64, lambda_n: C64) -> Result<PairForce> {
    let sep = (lambda_m - lambda_n).norm();
    if sep == 0.0 {
        return Err(Error::Collision(0.0));
    }
    let d_rho = lambda_m.norm().ln() - lambda_n.norm().ln();
    let d_phi = lambda_m.arg() - lambda_n.arg();
    // cosh x - cos y = 2 sinh^2(x/2) + 2 sin^2(y/2), free of cancellation
    let den = 2.0 * ((0.5 * d_rho).sinh().powi(2) + (0.5 * d_phi).sin().powi(2));
    Ok(PairForce {
        radial: -d_rho.sinh() / den,
        azimuthal: d_phi.sin() / den,
        complex: lambda_m * lambda_n / (lambda_n - lambda_m),
    })
}

/// Standard GUE draw: real unit-variance diagonal, complex off-diagonal with `E|H_ij|^2 = 1`.
pub fn sample_gue<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let mut h = Array2::<C64>::zeros((d, d));
    for i in 0..d {
        h[[i, i]] = C64::new(rng.sample(rand_distr::StandardNormal), 0.0);
        for j in 0..i {
            let z = complex_normal(rng);
            h[[i, j]] = z;
            h[[j, i]] = z.conj();
        }
    }
    h
}

/// Parent index of each perturbed eigenvalue, or `None` when the pairing is ambiguous.
pub fn match_eigenvalues(parents: &[C64], perturbed: &[C64]) -> Option<Vec<usize>> {
    let n = parents.len();
    if perturbed.len() != n {
        return None;
    }
    let nearest: Vec<usize> = perturbed
        .iter()
        .map(|z| (0..n).min_by(|&a, &b| (z - parents[a]).norm().total_cmp(&(z - parents[b]).norm())).unwrap())
        .collect();
    let mut used = vec![false; n];
    let bijective = nearest.iter().all(|&p| !std::mem::replace(&mut used[p], true));
    let assign = if bijective {
        nearest
    } else {
        let cost: Vec<Vec<f64>> = perturbed.iter().map(|z| parents.iter().map(|p| (z - p).norm_sqr()).collect()).collect();
        hungarian(&cost)
    };
    // a move beyond half the distance to the parent's nearest neighbour is not a small step
    for (k, &p) in assign.iter().enumerate() {
        let room = (0..n).filter(|&q| q != p).map(|q| (parents[p] - parents[q]).norm()).fold(f64::INFINITY, f64::min);
        if (perturbed[k] - parents[p]).norm() >= 0.5 * room {
            return None;
        }
    }
    Some(assign)
}

/// Minimum-cost perfect assignment of rows to columns for a square cost matrix.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // potentials formulation, 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

#[derive(Clone, Debug)]
pub struct DriftReport {
    pub eigenvalues: Vec<C64>,
    pub ds: f64,
    pub drift: Vec<ComplexAccumulator>,
    pub predicted_drift: Vec<C64>,
    /// `<d ln|lambda_m|>`.
    pub radial: Vec<MeanAccumulator>,
    /// `<(d lambda_m)^2>` against `-ds lambda_m^2`.
    pub square: Vec<ComplexAccumulator>,
    pub predicted_square: Vec<C64>,
    /// `<d lambda_m d lambda_n^*>` against `ds lambda_m lambda_n^* O_mn`, row-major; only for
    /// small dimensions.
    pub cross: Option<Vec<ComplexAccumulator>>,
    pub predicted_cross: Option<Vec<C64>>,
    pub samples: u64,
    pub discarded: u64,
}

struct Sample {
    d_lambda: Vec<C64>,
}

/// Monte Carlo estimate of the one-step drift and second moments. Draws are independent;
/// each uses its own substream derived from one value of `rng`, and results are reduced in
/// draw order.
pub fn dbm_drift_estimate<R: Rng + ?Sized>(
    transfer: &TransferMatrix,
    ds: f64,
    n_samples: u64,
    rng: &mut R,
) -> Result<DriftReport> {
    if !(ds > 0.0 && ds.is_finite()) {
        return Err(Error::InvalidParameter("ds must be positive".into()));
    }
    let base = eigendecompose(transfer, true)?;
    let lam = base.eigenvalues();
    let predicted_drift = dbm_drift_theory(&base, ds)?;
    let d = lam.len();
    let key: u64 = rng.random();
    let step = ds.sqrt();

    let draws: Vec<Option<Sample>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut r = RngStream::new(key, i).rng(Lane::Noise);
            let h = sample_gue(d, &mut r);
            let moved = transfer.matrix.dot(&linalg::hermitian_expi(&h, step)?);
            let values = eigendecompose_matrix(&moved, false)?.eigenvalues();
            Ok(match_eigenvalues(&lam, &values).map(|assign| {
                let mut d_lambda = vec![C64::new(0.0, 0.0); d];
                for (k, &p) in assign.iter().enumerate() {
                    d_lambda[p] = values[k] - lam[p];
                }
                Sample { d_lambda }
            }))
        })
        .collect::<Result<_>>()?;

    let mut drift = vec![ComplexAccumulator::default(); d];
    let mut radial = vec![MeanAccumulator::default(); d];
    let mut square = vec![ComplexAccumulator::default(); d];
    let mut cross = (d <= MAX_CROSS_DIM).then(|| vec![ComplexAccumulator::default(); d * d]);
    let mut discarded = 0;
    for s in &draws {
        let Some(s) = s else {
            discarded += 1;
            continue;
        };
        for m in 0..d {
            drift[m].push(s.d_lambda[m]);
            radial[m].push((1.0 + s.d_lambda[m] / lam[m]).norm().ln());
            square[m].push(s.d_lambda[m] * s.d_lambda[m]);
        }
        if let Some(c) = cross.as_mut() {
            for m in 0..d {
                for n in 0..d {
                    c[m * d + n].push(s.d_lambda[m] * s.d_lambda[n].conj());
                }
            }
        }
    }
    if discarded > 0 {
        log::info!("discarded {discarded} of {n_samples} draws with ambiguous eigenvalue matching");
    }
    let predicted_cross = if cross.is_some() {
        let o = overlap_matrix(&base)?;
        Some(
            (0..d * d)
                .map(|k| {
                    let (m, n) = (k / d, k % d);
                    let v = ds * lam[m] * lam[n].conj() * o[[m, n]];
                    // <|d lambda_m|^2> is real; drop the rounding residue
                    if m == n { C64::new(v.re, 0.0) } else { v }
                })
                .collect(),
        )
    } else {
        None
    };
    Ok(DriftReport {
        predicted_square: lam.iter().map(|&l| -ds * l * l).collect(),
        eigenvalues: lam,
        ds,
        drift,
        predicted_drift,
        radial,
        square,
        cross,
        predicted_cross,
        samples: n_samples - discarded,
        discarded,
    })
}

/// Largest componentwise z-score of a set of complex means against predictions.
pub fn max_z(acc: &[ComplexAccumulator], predicted: &[C64]) -> f64 {
    acc.iter()
        .zip(predicted)
        .flat_map(|(a, p)| [a.re.summary().z_score(p.re), a.im.summary().z_score(p.im)])
        .fold(0.0, f64::max)
}
