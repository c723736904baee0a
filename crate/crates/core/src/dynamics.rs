//! Products of transfer matrices and their finite-time singular values.
//!
//! The running product is stored as `P = Q diag(e^d) R` with `Q` unitary, `d` a vector of
//! log scales and `R` a well conditioned matrix. Factors are multiplied in directly until
//! their accumulated condition bound exceeds a budget, then folded into the factorization
//! by a QR step whose columns are pre-sorted by log-norm. Singular values are read off the
//! column-graded matrix `R^dagger diag(e^{d - max d})`, so every value is resolved relative to
//! its own scale rather than to the largest one.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::{sample_haar_unitary, TransferMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, adjoint, frobenius_sq, CMatrix, C64};

/// Time-translation invariant product `T^t`, or a new unitary at every step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fixed,
    Fresh,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Mode::Fixed),
            "fresh" => Ok(Mode::Fresh),
            other => Err(Error::InvalidParameter(format!("unknown mode '{other}'"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Fixed => "fixed",
            Mode::Fresh => "fresh",
        })
    }
}

/// How much dynamic range (in nats) raw factors may accumulate before they are folded into
/// the stable factorization. Small budgets cost one QR per step; large budgets are cheaper
/// but resolve small singular values less accurately.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stabilization {
    pub max_log_condition: f64,
}

impl Default for Stabilization {
    fn default() -> Self {
        Self { max_log_condition: 8.0 }
    }
}

// below this weight a column of the graded matrix is lost to underflow
const MIN_LOG_WEIGHT: f64 = -700.0;

/// Running product of matrices applied on the left.
#[derive(Clone, Debug)]
pub struct ProductState {
    dim: usize,
    q: CMatrix,
    log_d: Vec<f64>,
    r: CMatrix,
    factored: bool,
    pending: Option<CMatrix>,
    pending_log_condition: f64,
    steps: u64,
    stabilization: Stabilization,
}

impl ProductState {
    pub fn new(dim: usize, stabilization: Stabilization) -> Self {
        Self {
            dim,
            q: linalg::identity(dim),
            log_d: vec![0.0; dim],
            r: linalg::identity(dim),
            factored: false,
            pending: None,
            pending_log_condition: 0.0,
            steps: 0,
            stabilization,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Multiply `factor` onto the left; `log_condition` bounds `ln(s_max/s_min)` of the factor.
    pub fn push(&mut self, factor: &CMatrix, log_condition: f64) -> Result<()> {
        let budget = self.stabilization.max_log_condition;
        if self.pending.is_some() && self.pending_log_condition + log_condition > budget {
            self.fold()?;
        }
        self.pending = Some(match self.pending.take() {
            Some(p) => factor.dot(&p),
            None => factor.clone(),
        });
        self.pending_log_condition += log_condition;
        self.steps += 1;
        if self.pending_log_condition >= budget {
            self.fold()?;
        }
        Ok(())
    }

    /// Absorb the raw pending product into `Q diag(e^d) R`.
    pub fn fold(&mut self) -> Result<()> {
        let Some(c) = self.pending.take() else {
            return Ok(());
        };
        self.pending_log_condition = 0.0;
        let m = if self.factored { c.dot(&self.q) } else { c };
        let (q, n, new_log_d, order) = graded_qr(&m, &self.log_d)?;
        let permuted = self.r.select(Axis(0), &order);
        self.r = n.dot(&permuted);
        self.q = q;
        self.log_d = new_log_d;
        self.factored = true;
        Ok(())
    }

    /// Log singular values of the product, descending. All zero before any step.
    pub fn log_singular_values(&mut self) -> Result<Vec<f64>> {
        if !self.factored && self.pending.is_none() {
            return Ok(vec![0.0; self.dim]);
        }
        self.fold()?;
        let all: Vec<usize> = (0..self.dim).collect();
        let (lo, hi) = self.log_d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let mut sigma = if hi - lo < -MIN_LOG_WEIGHT {
            graded_singular_values(&self.r, &self.log_d, &all, &all)?
        } else {
            decoupled_singular_values(&self.r, &self.log_d)?
        };
        if sigma.iter().any(|x| !x.is_finite()) {
            return Err(Error::LinAlg("non-finite singular value".into()));
        }
        sigma.sort_by(|a, b| b.total_cmp(a));
        Ok(sigma)
    }

    /// `Tr Psi^2` of the normalized `P P^dagger`, without a singular value decomposition.
    pub fn purity(&mut self) -> Result<f64> {
        let w = if !self.factored {
            match &self.pending {
                Some(p) => p.clone(),
                None => return Ok(1.0 / self.dim as f64),
            }
        } else {
            self.fold()?;
            let top = self.log_d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut w = self.r.clone();
            let rel: Vec<f64> = self.log_d.iter().map(|l| l - top).collect();
            linalg::scale_rows(&mut w, &rel);
            w
        };
        let gram = adjoint(&w).dot(&w);
        let tr: f64 = gram.diag().iter().map(|z| z.re).sum();
        Ok(frobenius_sq(&gram) / (tr * tr))
    }
}

/// Log singular values of `diag(e^d) R` restricted to `rows x cols`; the rows' weights must
/// span less than the double-precision range.
fn graded_singular_values(r: &CMatrix, log_d: &[f64], rows: &[usize], cols: &[usize]) -> Result<Vec<f64>> {
    let mut order = rows.to_vec();
    order.sort_by(|&a, &b| log_d[b].total_cmp(&log_d[a]));
    let top = log_d[order[0]];
    // columns of R^dagger scaled by their relative weights, largest first
    let mut graded = Array2::<C64>::zeros((cols.len(), order.len()));
    for (j, &i) in order.iter().enumerate() {
        let w = (log_d[i] - top).exp();
        for (k, &c) in cols.iter().enumerate() {
            graded[[k, j]] = r[[i, c]].conj() * w;
        }
    }
    let s = linalg::singular_values(&graded)?;
    Ok(s.iter().take(order.len()).map(|x| top + x.ln()).collect())
}

// off-diagonal coupling below which two parts of the spectrum are treated as independent
const DECOUPLED: f64 = 1e-18;
const MAX_SWEEPS: usize = 200;

/// For spreads beyond the floating-point range: repeated QR of `(diag(e^d) R)^dagger` drives
/// `R` towards a block-diagonal form, after which each block is resolved on its own.
fn decoupled_singular_values(r: &CMatrix, log_d: &[f64]) -> Result<Vec<f64>> {
    let d = log_d.len();
    let mut r = r.clone();
    let mut log_d = log_d.to_vec();
    for _ in 0..MAX_SWEEPS {
        let m = adjoint(&r);
        let (_, n, new_d, _) = graded_qr(&m, &log_d)?;
        r = n;
        log_d = new_d;

        // r is upper triangular in the current order; split where nothing couples across
        let mut blocks = Vec::new();
        let mut start = 0;
        let mut reach = 0;
        for p in 0..d {
            let last = ((p + 1)..d).rev().find(|&k| r[[p, k]].norm() > DECOUPLED).unwrap_or(p);
            reach = reach.max(last);
            if reach == p {
                blocks.push(start..p + 1);
                start = p + 1;
            }
        }
        let fits = blocks.iter().all(|b| {
            let (lo, hi) = b.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, c), i| (a.min(log_d[i]), c.max(log_d[i])));
            hi - lo < -MIN_LOG_WEIGHT
        });
        if fits {
            let mut out = Vec::with_capacity(d);
            for b in blocks {
                let idx: Vec<usize> = b.collect();
                out.extend(graded_singular_values(&r, &log_d, &idx, &idx)?);
            }
            return Ok(out);
        }
    }
    Err(Error::NonConvergence("singular value deflation".into()))
}

/// QR of `m diag(e^d)` with columns ordered by weight: returns `(Q, N, d', order)` such that
/// `(m diag(e^d))[:, order] = Q diag(e^d') N` with `N` upper triangular, unit-modulus diagonal.
fn graded_qr(m: &CMatrix, log_d: &[f64]) -> Result<(CMatrix, CMatrix, Vec<f64>, Vec<usize>)> {
    let d = log_d.len();
    let score: Vec<f64> = (0..d)
        .map(|j| m.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().ln() + log_d[j])
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
    let mp = m.select(Axis(1), &order);
    let (q, rr) = linalg::qr(&mp)?;
    let mut new_d = vec![0.0; d];
    let mut n = Array2::<C64>::zeros((d, d));
    for i in 0..d {
        let rii = rr[[i, i]].norm();
        if rii == 0.0 || !rii.is_finite() {
            return Err(Error::LinAlg("singular factor in product".into()));
        }
        new_d[i] = rii.ln() + log_d[order[i]];
        let li = log_d[order[i]];
        for k in i..d {
            n[[i, k]] = rr[[i, k]] * ((log_d[order[k]] - li).exp() / rii);
        }
    }
    Ok((q, n, new_d, order))
}

/// Log singular values `sigma_alpha(t)` at the recorded times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularTrajectory {
    pub times: Vec<u64>,
    pub log_singular: Vec<Vec<f64>>,
    pub mode: Mode,
}

impl SingularTrajectory {
    fn at(&self, t: u64) -> Result<&[f64]> {
        self.times
            .iter()
            .position(|&x| x == t)
            .map(|i| self.log_singular[i].as_slice())
            .ok_or_else(|| Error::InvalidParameter(format!("time {t} was not recorded")))
    }

    pub fn renyi_entropy(&self, t: u64, n: RenyiIndex) -> Result<f64> {
        Ok(renyi_entropy(self.at(t)?, n))
    }

    pub fn purity(&self, t: u64) -> Result<f64> {
        Ok(purity(self.at(t)?))
    }

    /// `(sigma_0 - sigma_1) / t`.
    pub fn singular_gap(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(Error::InvalidParameter("gap needs t >= 1".into()));
        }
        let s = self.at(t)?;
        if s.len() < 2 {
            return Err(Error::InvalidParameter("gap needs D >= 2".into()));
        }
        Ok((s[0] - s[1]) / t as f64)
    }
}

/// Renyi index; `1` is the von Neumann entropy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RenyiIndex(u32);

impl RenyiIndex {
    pub const VON_NEUMANN: RenyiIndex = RenyiIndex(1);
    pub const COLLISION: RenyiIndex = RenyiIndex(2);

    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("Renyi index must be positive".into()));
        }
        Ok(Self(n))
    }

    pub fn get(&self) -> u32 {
        self.0
    }
}

// exponent below which a weight is exactly zero in double precision
const WEIGHT_CUTOFF: f64 = -745.0;

/// Exponents `x_a = 2(sigma_a - sigma_max)` that survive underflow, and `ln sum e^x`.
fn log_weights(sigma: &[f64]) -> (Vec<f64>, f64) {
    let top = sigma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let x: Vec<f64> = sigma
        .iter()
        .map(|s| 2.0 * (s - top))
        .filter(|&x| x >= WEIGHT_CUTOFF)
        .collect();
    let log_z = x.iter().map(|v| v.exp()).sum::<f64>().ln();
    (x, log_z)
}

/// Normalized weights `p_alpha` of the density matrix `Psi`.
pub fn probabilities(sigma: &[f64]) -> Vec<f64> {
    let top = sigma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (_, log_z) = log_weights(sigma);
    sigma
        .iter()
        .map(|s| {
            let x = 2.0 * (s - top);
            if x < WEIGHT_CUTOFF {
                0.0
            } else {
                (x - log_z).exp()
            }
        })
        .collect()
}

pub fn renyi_entropy(sigma: &[f64], n: RenyiIndex) -> f64 {
    let (x, log_z) = log_weights(sigma);
    if n.0 == 1 {
        let mean_x: f64 = x.iter().map(|v| (v - log_z).exp() * v).sum();
        (log_z - mean_x).max(0.0)
    } else {
        let nf = n.0 as f64;
        let log_sum = linalg::log_sum_exp(x.iter().map(|v| nf * v));
        ((log_sum - nf * log_z) / (1.0 - nf)).max(0.0)
    }
}

pub fn purity(sigma: &[f64]) -> f64 {
    probabilities(sigma).iter().map(|p| p * p).sum()
}

/// Run the product up to the last recorded time, calling `observe` at each recorded time.
/// `t = 0` is observed on the empty product.
pub fn evolve_with<R, F>(
    transfer: &TransferMatrix,
    times: &[u64],
    mode: Mode,
    rng: &mut R,
    stabilization: Stabilization,
    mut observe: F,
) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(u64, &mut ProductState) -> Result<()>,
{
    check_times(times)?;
    let d = transfer.dim();
    let log_cond = transfer.spec.log_condition();
    let mut state = ProductState::new(d, stabilization);
    let mut next = times.iter().peekable();
    if next.peek() == Some(&&0) {
        observe(0, &mut state)?;
        next.next();
    }
    let t_max = times.last().copied().unwrap_or(0);
    for step in 1..=t_max {
        match mode {
            Mode::Fresh if step > 1 => {
                let u = sample_haar_unitary(d, rng)?;
                let a = TransferMatrix::from_unitary(transfer.spec, transfer.zeta.clone(), u);
                state.push(&a.matrix, log_cond)?;
            }
            _ => state.push(&transfer.matrix, log_cond)?,
        }
        if next.peek() == Some(&&step) {
            observe(step, &mut state)?;
            next.next();
        }
    }
    Ok(())
}

fn check_times(times: &[u64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("no record times".into()));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("record times must be strictly increasing".into()));
    }
    Ok(())
}

/// Log singular values of `T^t` (fixed) or `zeta U_t ... zeta U_1` (fresh). In fresh mode
/// the first factor is `transfer` itself and later unitaries are drawn from `rng`.
pub fn evolve_singular<R: Rng + ?Sized>(
    transfer: &TransferMatrix,
    times: &[u64],
    mode: Mode,
    rng: &mut R,
) -> Result<SingularTrajectory> {
    let mut log_singular = Vec::with_capacity(times.len());
    evolve_with(transfer, times, mode, rng, Stabilization::default(), |_, st| {
        log_singular.push(st.log_singular_values()?);
        Ok(())
    })?;
    Ok(SingularTrajectory { times: times.to_vec(), log_singular, mode })
}

/// Integer times close to a geometric progression with `per_decade` points per decade,
/// deduplicated, from 1 up to and including `t_max`.
pub fn geometric_grid(t_max: u64, per_decade: u32) -> Vec<u64> {
    let mut out = Vec::new();
    if t_max == 0 {
        return out;
    }
    let mut k = 0u32;
    loop {
        let t = 10f64.powf(k as f64 / per_decade as f64).round() as u64;
        if t > t_max {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
        k += 1;
    }
    if out.last() != Some(&t_max) {
        out.push(t_max);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{build_transfer, build_zeta, Lane, RngStream, TransferSpec};

    fn diagonal_transfer(n: u32, h: f64) -> TransferMatrix {
        let spec = TransferSpec::new(n, h).unwrap();
        TransferMatrix::from_unitary(spec, build_zeta(&spec), linalg::identity(spec.dim()))
    }

    #[test]
    fn identity_unitary_gives_scaled_field() {
        let tm = diagonal_transfer(3, 0.4);
        let mut rng = RngStream::new(0, 0).rng(Lane::Fresh);
        let traj = evolve_singular(&tm, &[1, 5, 40], Mode::Fixed, &mut rng).unwrap();
        let mut expect = tm.zeta.log_diag().to_vec();
        expect.sort_by(|a, b| b.total_cmp(a));
        for (i, &t) in traj.times.iter().enumerate() {
            for (s, e) in traj.log_singular[i].iter().zip(&expect) {
                assert!((s - t as f64 * e).abs() < 1e-9 * t as f64);
            }
            assert!((traj.singular_gap(t).unwrap() - 0.8).abs() < 1e-9);
        }
    }

    #[test]
    fn single_step_matches_direct_svd() {
        let spec = TransferSpec::new(4, 0.7).unwrap();
        let mut rng = RngStream::new(3, 1).rng(Lane::Transfer);
        let tm = build_transfer(&spec, &mut rng).unwrap();
        let traj = evolve_singular(&tm, &[1], Mode::Fixed, &mut rng).unwrap();
        let direct = linalg::singular_values(&tm.matrix).unwrap();
        for (a, b) in traj.log_singular[0].iter().zip(&direct) {
            assert!((a - b.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_time_is_maximally_mixed() {
        let sigma = vec![0.0; 16];
        assert!((renyi_entropy(&sigma, RenyiIndex::VON_NEUMANN) - 16f64.ln()).abs() < 1e-12);
        assert!((renyi_entropy(&sigma, RenyiIndex::new(3).unwrap()) - 16f64.ln()).abs() < 1e-12);
        assert!((purity(&sigma) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn purity_matches_collision_entropy() {
        let sigma = [3.0, 2.5, 0.1, -1.0, -4.6];
        let s2 = renyi_entropy(&sigma, RenyiIndex::COLLISION);
        assert!((-purity(&sigma).ln() - s2).abs() < 1e-12);
        let p = probabilities(&sigma);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_spread_drops_underflowing_weights() {
        let sigma = [1000.0, 0.0, -1000.0];
        let p = probabilities(&sigma);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        assert_eq!(renyi_entropy(&sigma, RenyiIndex::VON_NEUMANN), 0.0);
    }

    #[test]
    fn direct_purity_agrees_with_singular_values() {
        let spec = TransferSpec::new(5, 0.3).unwrap();
        let mut rng = RngStream::new(9, 2).rng(Lane::Transfer);
        let tm = build_transfer(&spec, &mut rng).unwrap();
        let times = [1, 2, 7, 30];
        let mut fast = Vec::new();
        let mut slow = Vec::new();
        evolve_with(&tm, &times, Mode::Fixed, &mut rng, Stabilization::default(), |_, st| {
            fast.push(st.purity()?);
            slow.push(purity(&st.log_singular_values()?));
            Ok(())
        })
        .unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10 * b, "{a} {b}");
        }
    }

    #[test]
    fn determinant_is_conserved_over_long_products() {
        let spec = TransferSpec::new(4, 1.0).unwrap();
        let mut rng = RngStream::new(5, 0).rng(Lane::Transfer);
        let tm = build_transfer(&spec, &mut rng).unwrap();
        let traj = evolve_singular(&tm, &[10, 50, 200], Mode::Fixed, &mut rng).unwrap();
        for (i, &t) in traj.times.iter().enumerate() {
            let s = &traj.log_singular[i];
            let sum: f64 = s.iter().sum();
            assert!(sum.abs() < 1e-8 * 16.0 * t as f64, "t={t} sum={sum}");
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn deflation_agrees_with_direct_graded_svd() {
        let spec = TransferSpec::new(4, 1.0).unwrap();
        let mut rng = RngStream::new(9, 0).rng(Lane::Transfer);
        let tm = build_transfer(&spec, &mut rng).unwrap();
        let mut st = ProductState::new(16, Stabilization::default());
        for _ in 0..40 {
            st.push(&tm.matrix, spec.log_condition()).unwrap();
        }
        st.fold().unwrap();
        let all: Vec<usize> = (0..16).collect();
        let mut a = graded_singular_values(&st.r, &st.log_d, &all, &all).unwrap();
        let mut b = decoupled_singular_values(&st.r, &st.log_d).unwrap();
        a.sort_by(|x, y| y.total_cmp(x));
        b.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "{x} {y}");
        }
    }

    #[test]
    fn wide_spreads_keep_the_determinant() {
        let spec = TransferSpec::new(3, 1.0).unwrap();
        let mut rng = RngStream::new(2, 0).rng(Lane::Transfer);
        let tm = build_transfer(&spec, &mut rng).unwrap();
        let traj = evolve_singular(&tm, &[3000], Mode::Fixed, &mut rng).unwrap();
        let s = &traj.log_singular[0];
        assert!(s[0] - s[7] > 1400.0);
        assert!(s.iter().sum::<f64>().abs() < 1e-7 * 3000.0);
    }

    #[test]
    fn grid_is_increasing_and_ends_at_max() {
        let g = geometric_grid(1000, 20);
        assert_eq!(g[0], 1);
        assert_eq!(*g.last().unwrap(), 1000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!((45..=55).contains(&g.len()), "{}", g.len());
    }

    #[test]
    fn rejects_unsorted_times() {
        let tm = diagonal_transfer(2, 0.1);
        let mut rng = RngStream::new(0, 0).rng(Lane::Fresh);
        assert!(evolve_singular(&tm, &[3, 2], Mode::Fixed, &mut rng).is_err());
    }
}
