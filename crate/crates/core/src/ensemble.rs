//! Random transfer matrices `T = zeta * U` with a diagonal qubit field and a Haar unitary.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, log_sum_exp, ln_cosh, CMatrix, C64};

pub const MAX_QUBITS: u32 = 20;

/// Number of qubits and field strength of the non-unitary factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferSpec {
    n_qubits: u32,
    field: f64,
}

impl TransferSpec {
    pub fn new(n_qubits: u32, field: f64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::InvalidParameter(format!(
                "qubit count must lie in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        if !field.is_finite() {
            return Err(Error::InvalidParameter(format!("field must be finite, got {field}")));
        }
        Ok(Self { n_qubits, field })
    }

    pub fn n_qubits(&self) -> u32 {
        self.n_qubits
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    /// Largest minus smallest log-entry of the field, `2 N |h|`.
    pub fn log_condition(&self) -> f64 {
        2.0 * self.n_qubits as f64 * self.field.abs()
    }

    /// Hilbert space dimension `2^N`.
    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }
}

/// Log of the diagonal entries of the positive field operator.
#[derive(Clone, Debug)]
pub struct DiagonalField {
    log_diag: Vec<f64>,
}

impl DiagonalField {
    pub fn log_diag(&self) -> &[f64] {
        &self.log_diag
    }

    pub fn dim(&self) -> usize {
        self.log_diag.len()
    }

    /// `Tr zeta^p`, in log form.
    pub fn log_trace_power(&self, p: f64) -> f64 {
        log_sum_exp(self.log_diag.iter().map(|l| p * l))
    }
}

/// Basis index `a` has Hamming weight `w` and log-entry `h (N - 2w)`.
pub fn build_zeta(spec: &TransferSpec) -> DiagonalField {
    let n = spec.n_qubits as i64;
    let h = spec.field;
    let log_diag = (0..spec.dim())
        .map(|a| h * (n - 2 * (a as u64).count_ones() as i64) as f64)
        .collect();
    DiagonalField { log_diag }
}

/// `ln E[zeta^{2k}]` summed over the Hamming-weight classes.
pub fn log_zeta_moment(spec: &TransferSpec, k: u32) -> f64 {
    let n = spec.n_qubits;
    let h = spec.field;
    let terms = (0..=n).map(|w| {
        ln_binomial(n, w) + 2.0 * k as f64 * h * (n as f64 - 2.0 * w as f64)
    });
    log_sum_exp(terms) - n as f64 * std::f64::consts::LN_2
}

/// Closed form `N ln cosh(2kh)` of the same quantity.
pub fn log_zeta_moment_closed(spec: &TransferSpec, k: u32) -> f64 {
    spec.n_qubits as f64 * ln_cosh(2.0 * k as f64 * spec.field)
}

pub fn zeta_moment(spec: &TransferSpec, k: u32) -> f64 {
    log_zeta_moment(spec, k).exp()
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// `E[zeta^4] / E[zeta^2]^2 - 1`, from `ln(2 - sech^2 2h)` per qubit.
pub fn excess_fourth_moment(spec: &TransferSpec) -> f64 {
    // per qubit the ratio is 2 - sech^2(2h) = 1 + tanh^2(2h)
    let tanh2 = (2.0 * spec.field).tanh().powi(2);
    (spec.n_qubits as f64 * tanh2.ln_1p()).exp_m1()
}

/// Crossover time `t_* = sqrt(D) [E zeta^4 / (E zeta^2)^2 - 1]^{-1/2}`; infinite at zero field.
pub fn t_star(spec: &TransferSpec) -> f64 {
    let e = excess_fourth_moment(spec);
    if e <= 0.0 {
        return f64::INFINITY;
    }
    (spec.dim() as f64 / e).sqrt()
}

/// Outer edge of the bulk spectrum, `rho_N = (N/2) ln cosh 2h`.
pub fn rho_edge(spec: &TransferSpec) -> f64 {
    0.5 * spec.n_qubits as f64 * ln_cosh(2.0 * spec.field)
}

/// Per-qubit growth rate of the excess fourth moment, `ln(2 cosh 4h / (1 + cosh 4h))`.
pub fn excess_growth_rate(field: f64) -> f64 {
    (2.0 * field).tanh().powi(2).ln_1p()
}

/// Independent random substreams are addressed by `(master seed, realization, lane)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    pub master_seed: u64,
    pub realization: u64,
}

/// Purpose of a substream, so that draws for one purpose never shift another.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lane {
    Transfer,
    Fresh,
    Noise,
    Auxiliary,
}

impl RngStream {
    pub fn new(master_seed: u64, realization: u64) -> Self {
        Self { master_seed, realization }
    }

    pub fn rng(&self, lane: Lane) -> ChaCha20Rng {
        let mut hasher = Sha256::new();
        hasher.update(b"nuchaos-stream");
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update([lane as u8]);
        let key: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(self.realization);
        rng
    }
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar unitary from the QR decomposition of a complex Ginibre matrix, with the phases of
/// `diag(R)` moved into `Q`.
pub fn sample_haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<CMatrix> {
    let g = Array2::from_shape_simple_fn((d, d), || complex_normal(rng));
    let (mut q, r) = linalg::qr(&g)?;
    for j in 0..d {
        let rjj = r[[j, j]];
        let norm = rjj.norm();
        if norm == 0.0 {
            return Err(Error::LinAlg("singular Ginibre draw".into()));
        }
        let phase = rjj / norm;
        q.column_mut(j).mapv_inplace(|z| z * phase);
    }
    Ok(q)
}

/// One realization of the transfer matrix.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    pub spec: TransferSpec,
    pub zeta: DiagonalField,
    pub matrix: CMatrix,
}

impl TransferMatrix {
    /// Multiply a fresh unitary by the field: row `a` of `u` is scaled by `zeta_a`.
    pub fn from_unitary(spec: TransferSpec, zeta: DiagonalField, mut u: CMatrix) -> Self {
        linalg::scale_rows(&mut u, zeta.log_diag());
        Self { spec, zeta, matrix: u }
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }
}

pub fn build_transfer<R: Rng + ?Sized>(spec: &TransferSpec, rng: &mut R) -> Result<TransferMatrix> {
    let zeta = build_zeta(spec);
    let u = sample_haar_unitary(spec.dim(), rng)?;
    Ok(TransferMatrix::from_unitary(*spec, zeta, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::adjoint;

    #[test]
    fn zeta_entries_follow_hamming_weight() {
        let spec = TransferSpec::new(3, 0.4).unwrap();
        let z = build_zeta(&spec);
        assert_eq!(z.dim(), 8);
        assert!((z.log_diag()[0] - 1.2).abs() < 1e-15);
        assert!((z.log_diag()[7] + 1.2).abs() < 1e-15);
        assert!((z.log_diag()[5] + 0.4).abs() < 1e-15);
        assert!(z.log_diag().iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn moment_routes_agree() {
        for n in 1..=12 {
            for &h in &[0.0, 0.05, 0.3, 0.5, 1.0] {
                let spec = TransferSpec::new(n, h).unwrap();
                for k in 1..=4 {
                    let a = log_zeta_moment(&spec, k);
                    let b = log_zeta_moment_closed(&spec, k);
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{n} {h} {k}");
                }
            }
        }
    }

    #[test]
    fn crossover_time_limits() {
        assert!(t_star(&TransferSpec::new(6, 0.0).unwrap()).is_infinite());
        let spec = TransferSpec::new(10, 0.3).unwrap();
        let r = (zeta_moment(&spec, 2) / zeta_moment(&spec, 1).powi(2)) - 1.0;
        assert!((t_star(&spec) - (1024.0 / r).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(TransferSpec::new(0, 0.1).is_err());
        assert!(TransferSpec::new(21, 0.1).is_err());
        assert!(TransferSpec::new(3, -0.1).is_ok());
        assert!(TransferSpec::new(3, f64::NAN).is_err());
    }

    #[test]
    fn haar_draw_is_unitary() {
        let mut rng = RngStream::new(7, 3).rng(Lane::Transfer);
        let u = sample_haar_unitary(16, &mut rng).unwrap();
        let p = adjoint(&u).dot(&u);
        for i in 0..16 {
            for j in 0..16 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[[i, j]] - C64::new(e, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = RngStream::new(1, 5).rng(Lane::Transfer).random();
        let b: u64 = RngStream::new(1, 5).rng(Lane::Transfer).random();
        let c: u64 = RngStream::new(1, 6).rng(Lane::Transfer).random();
        let d: u64 = RngStream::new(1, 5).rng(Lane::Fresh).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
