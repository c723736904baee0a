//! Eigendecomposition of transfer matrices and radial eigenvalue statistics.

use ndarray::{Array1, Axis};
use serde::{Deserialize, Serialize};

use crate::ensemble::{rho_edge, t_star, TransferMatrix, TransferSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, adjoint, CMatrix, C64};

/// Eigenvalues `e^{rho + i theta}` sorted by `rho` descending, then `theta` ascending.
/// Right eigenvectors are the unit-norm columns of `right`; left eigenvectors are the rows of
/// `left = right^{-1}`.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub log_modulus: Vec<f64>,
    pub phase: Vec<f64>,
    pub right: Option<CMatrix>,
    pub left: Option<CMatrix>,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.log_modulus.len()
    }

    pub fn eigenvalue(&self, alpha: usize) -> C64 {
        C64::from_polar(self.log_modulus[alpha].exp(), self.phase[alpha])
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.dim()).map(|a| self.eigenvalue(a)).collect()
    }

    /// `sum_alpha lambda_alpha^p`.
    pub fn power_sum(&self, p: u32) -> C64 {
        (0..self.dim())
            .map(|a| {
                let pf = p as f64;
                C64::from_polar((pf * self.log_modulus[a]).exp(), pf * self.phase[a])
            })
            .sum()
    }
}

fn principal_phase(z: C64) -> f64 {
    let a = z.arg();
    if a <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}

fn sort_order(rho: &[f64], theta: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rho.len()).collect();
    order.sort_by(|&a, &b| rho[b].total_cmp(&rho[a]).then(theta[a].total_cmp(&theta[b])));
    order
}

/// Eigendecompose an arbitrary square matrix.
pub fn eigendecompose_matrix(m: &CMatrix, want_vectors: bool) -> Result<SpectralData> {
    let (values, vectors): (Array1<C64>, Option<CMatrix>) = if want_vectors {
        let (v, r) = linalg::eigen(m)?;
        (v, Some(r))
    } else {
        (linalg::eigenvalues(m)?, None)
    };
    if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite() || *z == C64::new(0.0, 0.0)) {
        return Err(Error::LinAlg("eigensolver returned a non-finite or zero eigenvalue".into()));
    }
    let rho: Vec<f64> = values.iter().map(|z| z.norm().ln()).collect();
    let theta: Vec<f64> = values.iter().map(|&z| principal_phase(z)).collect();
    let order = sort_order(&rho, &theta);
    let log_modulus = order.iter().map(|&i| rho[i]).collect();
    let phase = order.iter().map(|&i| theta[i]).collect();
    let (right, left) = match vectors {
        Some(r) => {
            let mut r = r.select(Axis(1), &order);
            for mut col in r.axis_iter_mut(Axis(1)) {
                let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                col.mapv_inplace(|z| z / n);
            }
            let l = linalg::inverse(&r)?;
            (Some(r), Some(l))
        }
        None => (None, None),
    };
    Ok(SpectralData { log_modulus, phase, right, left })
}

pub fn eigendecompose(transfer: &TransferMatrix, want_vectors: bool) -> Result<SpectralData> {
    eigendecompose_matrix(&transfer.matrix, want_vectors)
}

/// `rho_0 - rho_1`.
pub fn leading_gap(spectrum: &SpectralData) -> Result<f64> {
    if spectrum.dim() < 2 {
        return Err(Error::InvalidParameter("gap needs at least two eigenvalues".into()));
    }
    Ok(spectrum.log_modulus[0] - spectrum.log_modulus[1])
}

/// `O_mn = <l_m|l_n><r_n|r_m>`.
pub fn overlap_matrix(spectrum: &SpectralData) -> Result<CMatrix> {
    let (Some(r), Some(l)) = (&spectrum.right, &spectrum.left) else {
        return Err(Error::InvalidParameter("eigenvectors were not computed".into()));
    };
    let ll = l.dot(&adjoint(l));
    let rr = adjoint(r).dot(r);
    Ok(&ll * &rr.t())
}

/// Ensemble-summed counts of `rho` in fixed bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_realizations: u64,
    pub dim: usize,
}

impl RadialHistogram {
    pub fn new(edges: Vec<f64>, dim: usize) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("bin edges must be strictly increasing".into()));
        }
        let bins = edges.len() - 1;
        Ok(Self { edges, counts: vec![0; bins], n_realizations: 0, dim })
    }

    pub fn bin_of(&self, rho: f64) -> Option<usize> {
        let e = &self.edges;
        if !(rho >= e[0] && rho <= e[e.len() - 1]) {
            return None;
        }
        let i = e.partition_point(|&x| x <= rho);
        Some(i.saturating_sub(1).min(self.counts.len() - 1))
    }

    pub fn add(&mut self, spectrum: &SpectralData) -> Result<()> {
        if spectrum.dim() != self.dim {
            return Err(Error::InvalidParameter("spectrum dimension mismatch".into()));
        }
        let mut bins = Vec::with_capacity(self.dim);
        for &rho in &spectrum.log_modulus {
            bins.push(self.bin_of(rho).ok_or_else(|| {
                Error::InvalidParameter(format!("rho = {rho} lies outside the bins"))
            })?);
        }
        for b in bins {
            self.counts[b] += 1;
        }
        self.n_realizations += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &RadialHistogram) -> Result<()> {
        if other.edges != self.edges || other.dim != self.dim {
            return Err(Error::InvalidParameter("histograms have different bins".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_realizations += other.n_realizations;
        Ok(())
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Per-realization density `n(rho)`, normalized so that `sum n * width = D`.
    pub fn density(&self) -> Vec<f64> {
        let n = self.n_realizations.max(1) as f64;
        self.edges
            .windows(2)
            .zip(&self.counts)
            .map(|(w, &c)| c as f64 / (n * (w[1] - w[0])))
            .collect()
    }

    /// `int n(rho) d rho`.
    pub fn integral(&self) -> f64 {
        self.density().iter().zip(self.edges.windows(2)).map(|(d, w)| d * (w[1] - w[0])).sum()
    }
}

/// Default bin width `(2 rho_N + 6/t_*)/200`, falling back to `1e-3` at zero field.
pub fn default_bin_width(spec: &TransferSpec) -> f64 {
    let ts = t_star(spec);
    let w = (2.0 * rho_edge(spec) + 6.0 / ts) / 200.0;
    if w > 0.0 && w.is_finite() {
        w
    } else {
        1e-3
    }
}

/// Bins of the default width, one centered on zero, covering the bulk, three tail widths
/// on each side, and `extent` (the largest observed `|rho|`).
pub fn default_edges(spec: &TransferSpec, extent: f64) -> Vec<f64> {
    let w = default_bin_width(spec);
    let ts = t_star(spec);
    let mut half = rho_edge(spec) + if ts.is_finite() { 3.0 / ts } else { 0.0 };
    half = half.max(extent * (1.0 + 1e-12) + 1e-12);
    let per_side = (half / w).ceil().max(1.0) as i64;
    (-per_side..=per_side + 1).map(|k| (k as f64 - 0.5) * w).collect()
}

pub fn radial_histogram(spectra: &[SpectralData], edges: Vec<f64>) -> Result<RadialHistogram> {
    let first = spectra.first().ok_or_else(|| Error::InvalidParameter("no spectra".into()))?;
    let mut hist = RadialHistogram::new(edges, first.dim())?;
    for s in spectra {
        hist.add(s)?;
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{build_transfer, build_zeta, Lane, RngStream};

    fn sample(n: u32, h: f64, seed: u64) -> TransferMatrix {
        let spec = TransferSpec::new(n, h).unwrap();
        build_transfer(&spec, &mut RngStream::new(seed, 0).rng(Lane::Transfer)).unwrap()
    }

    #[test]
    fn unitary_spectrum_lies_on_circle() {
        let s = eigendecompose(&sample(4, 0.0, 1), false).unwrap();
        assert!(s.log_modulus.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn diagonal_case_recovers_field() {
        let spec = TransferSpec::new(2, 0.5).unwrap();
        let tm = TransferMatrix::from_unitary(spec, build_zeta(&spec), linalg::identity(4));
        let s = eigendecompose(&tm, true).unwrap();
        let expect = [1.0, 0.0, 0.0, -1.0];
        for (a, b) in s.log_modulus.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(s.phase.iter().all(|p| p.abs() < 1e-14));
        assert!((leading_gap(&s).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn traces_and_determinant_are_reproduced() {
        let tm = sample(3, 0.5, 2);
        let s = eigendecompose(&tm, false).unwrap();
        assert!(s.log_modulus.iter().sum::<f64>().abs() < 1e-8);
        let tr = linalg::trace(&tm.matrix);
        let tr2 = linalg::trace(&tm.matrix.dot(&tm.matrix));
        assert!((s.power_sum(1) - tr).norm() < 1e-8 * tr.norm().max(1.0));
        assert!((s.power_sum(2) - tr2).norm() < 1e-8 * tr2.norm().max(1.0));
        let bound = 3.0 * 0.5 + 1e-12;
        assert!(s.log_modulus.iter().all(|r| r.abs() <= bound));
        assert!(s.log_modulus.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn biorthonormal_and_overlap_rules() {
        let s = eigendecompose(&sample(3, 0.5, 3), true).unwrap();
        let (r, l) = (s.right.as_ref().unwrap(), s.left.as_ref().unwrap());
        let id = l.dot(r);
        for i in 0..8 {
            for j in 0..8 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[[i, j]] - C64::new(e, 0.0)).norm() < 1e-8);
            }
        }
        let o = overlap_matrix(&s).unwrap();
        for m in 0..8 {
            assert!(o[[m, m]].im.abs() < 1e-10 && o[[m, m]].re >= 1.0 - 1e-10);
            let row: C64 = o.row(m).iter().sum();
            assert!((row - C64::new(1.0, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn overlap_is_identity_for_unitary() {
        let s = eigendecompose(&sample(3, 0.0, 4), true).unwrap();
        let o = overlap_matrix(&s).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((o[[i, j]] - C64::new(e, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn unitary_histogram_has_single_bin() {
        let spec = TransferSpec::new(3, 0.0).unwrap();
        let s = eigendecompose(&sample(3, 0.0, 5), false).unwrap();
        let h = radial_histogram(&[s], default_edges(&spec, 0.0)).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert!((h.integral() - 8.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_is_order_insensitive() {
        let spec = TransferSpec::new(4, 0.3).unwrap();
        let spectra: Vec<_> =
            (0..5).map(|i| eigendecompose(&sample(4, 0.3, 10 + i), false).unwrap()).collect();
        let edges = default_edges(&spec, 4.0 * 0.3);
        let a = radial_histogram(&spectra, edges.clone()).unwrap();
        let mut rev = spectra.clone();
        rev.reverse();
        let b = radial_histogram(&rev, edges).unwrap();
        assert_eq!(a, b);
        assert!((a.integral() - 16.0).abs() < 1e-9);
    }

    #[test]
    fn missing_vectors_are_reported() {
        let s = eigendecompose(&sample(2, 0.3, 6), false).unwrap();
        assert!(overlap_matrix(&s).is_err());
    }
}
