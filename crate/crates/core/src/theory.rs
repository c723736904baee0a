//! Large-`D` predictions: radial density from the saddle point, edge tail, leading gap law
//! and distribution, early and late entropies, and the form factor expansion.

use std::f64::consts::{PI, SQRT_2};

use crate::dynamics::{Mode, RenyiIndex};
use crate::ensemble::{
    excess_fourth_moment, excess_growth_rate, log_zeta_moment, rho_edge, t_star, TransferSpec,
};
use crate::error::{Error, Result};
use crate::special::{erf, erfc, integrate, lambert_w0};

// beyond this the class sums below would overflow
const MAX_LOG_ZETA_SQ: f64 = 700.0;

/// Scalar summary of the field used by all predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoryParams {
    pub spec: TransferSpec,
    /// `ln E[zeta^{2k}]` for `k = 1..=4`.
    pub log_moments: [f64; 4],
    pub t_star: f64,
    pub rho_edge: f64,
    /// `n(rho_N) = t_*^2`.
    pub edge_density: f64,
    /// Expected number of eigenvalues beyond one edge, `t_* / sqrt(2 pi)`.
    pub tail_count: f64,
    pub b_exponent: f64,
}

impl TheoryParams {
    pub fn new(spec: &TransferSpec) -> Self {
        let ts = t_star(spec);
        Self {
            spec: *spec,
            log_moments: [1, 2, 3, 4].map(|k| log_zeta_moment(spec, k)),
            t_star: ts,
            rho_edge: rho_edge(spec),
            edge_density: ts * ts,
            tail_count: ts / (2.0 * PI).sqrt(),
            b_exponent: excess_growth_rate(spec.field()),
        }
    }
}

/// `(weight, zeta^2)` per Hamming-weight class, with weights summing to one.
fn classes(spec: &TransferSpec) -> Result<Vec<(f64, f64)>> {
    let n = spec.n_qubits();
    let h = spec.field().abs();
    if 2.0 * n as f64 * h > MAX_LOG_ZETA_SQ {
        return Err(Error::InvalidParameter("field too large for the class sums".into()));
    }
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut binom = 1.0f64;
    let scale = 0.5f64.powi(n as i32);
    for w in 0..=n {
        if w > 0 {
            binom = binom * (n - w + 1) as f64 / w as f64;
        }
        out.push((binom * scale, (2.0 * h * (n as f64 - 2.0 * w as f64)).exp()));
    }
    Ok(out)
}

/// `G(u) = D^{-1} sum_j u zeta_j^2 / (1 - u zeta_j^2)`.
pub fn moment_generating(spec: &TransferSpec, u: f64) -> Result<f64> {
    let mut g = 0.0;
    for (w, z2) in classes(spec)? {
        let den = 1.0 - u * z2;
        if den.abs() < 1e-14 {
            return Err(Error::Pole(u));
        }
        g += w * u * z2 / den;
    }
    Ok(g)
}

/// `H(u) = G(u)/u` and its derivative, free of the removable singularity at `u = 0`.
fn resolvent(cls: &[(f64, f64)], u: f64) -> Result<(f64, f64)> {
    let mut h = 0.0;
    let mut dh = 0.0;
    for &(w, z2) in cls {
        let den = 1.0 - u * z2;
        if den.abs() < 1e-14 {
            return Err(Error::Pole(u));
        }
        h += w * z2 / den;
        dh += w * z2 * z2 / (den * den);
    }
    Ok((h, dh))
}

/// Root `v_s` of `Phi'(v) = 0` at a given `rho`, with `Phi''(v_s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaddleSolution {
    pub rho: f64,
    pub v_s: f64,
    pub phi_second: f64,
    /// `|Phi'(v_s)|`.
    pub residual: f64,
}

/// Saddle function in the form `F(v) = v Phi'(v) = 1 - (c/v) H(c (1 - 1/v))`, `c = e^{-2 rho}`,
/// which has no spurious root at `v = 1`. Returns `(F, F', Phi'')`.
fn saddle_terms(cls: &[(f64, f64)], c: f64, v: f64) -> Result<(f64, f64, f64)> {
    let u = c * (1.0 - 1.0 / v);
    let (h, dh) = resolvent(cls, u)?;
    let f = 1.0 - c / v * h;
    let df = c / (v * v) * (h - c * dh / v);
    let phi2 = (1.0 - c * c * dh / (v * v)) / (v * v);
    Ok((f, df, phi2))
}

/// Newton steps kept inside a shrinking sign-change bracket.
fn safeguarded_newton<F>(f: F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let (flo, _) = f(lo)?;
    let (fhi, _) = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NonConvergence(format!("no sign change on [{lo}, {hi}]")));
    }
    let rising = fhi > 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (fx, dfx) = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == rising {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * x.abs() {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NonConvergence("saddle root finder".into()))
}

pub fn solve_saddle(spec: &TransferSpec, rho: f64) -> Result<SaddleSolution> {
    if spec.field() == 0.0 {
        return Err(Error::DegenerateBulk);
    }
    let params_edge = rho_edge(spec);
    let margin = 10.0 / t_star(spec);
    if !rho.is_finite() || rho.abs() > params_edge + margin {
        return Err(Error::InvalidParameter(format!(
            "rho = {rho} outside the bulk plus 10/t_* (edge {params_edge})"
        )));
    }
    // the field spectrum is symmetric, so v_s(-rho) = 1 - v_s(rho) and Phi'' is even
    if rho < 0.0 {
        let s = solve_saddle(spec, -rho)?;
        return Ok(SaddleSolution { rho, v_s: 1.0 - s.v_s, ..s });
    }
    let cls = classes(spec)?;
    let c = (-2.0 * rho).exp();
    let z2_max = cls[0].1;
    let g = |v: f64| saddle_terms(&cls, c, v).map(|(f, df, _)| (f, df));

    let (f1, _) = g(1.0)?;
    let v = if f1 < 0.0 {
        safeguarded_newton(g, 0.25, 1.0)?
    } else if f1 == 0.0 {
        1.0
    } else {
        // outside the bulk the root lies between 1 and the first pole; past rho = N|h| there
        // is no pole and no root, but no eigenvalue either since |lambda| <= max zeta
        if c * z2_max <= 1.0 {
            return Err(Error::InvalidParameter(format!("rho = {rho} is beyond the spectral radius bound")));
        }
        let pole = 1.0 / (1.0 - 1.0 / (c * z2_max));
        safeguarded_newton(g, 1.0, 1.0 + (pole - 1.0) * (1.0 - 1e-9))?
    };
    let (f, _, phi2) = saddle_terms(&cls, c, v)?;
    let residual = (f / v).abs();
    if residual > 1e-10 {
        return Err(Error::NonConvergence(format!("saddle residual {residual:e} at rho = {rho}")));
    }
    Ok(SaddleSolution { rho, v_s: v, phi_second: phi2, residual })
}

/// Asymptotic radial density `n(rho)`, normalized to `D` eigenvalues; negative values from
/// the first term are clamped to zero.
pub fn density_prediction(spec: &TransferSpec, rho: f64) -> Result<f64> {
    if spec.field() != 0.0 && rho.abs() >= spec.n_qubits() as f64 * spec.field().abs() {
        return Ok(0.0);
    }
    let s = solve_saddle(spec, rho)?;
    let d = spec.dim() as f64;
    let v = s.v_s;
    let p = s.phi_second.abs();
    let a = (d * p / 2.0).sqrt();
    let smooth = if v > 1.0 {
        erfc(a * (v - 1.0)) - erfc(a * v)
    } else if v < 0.0 {
        erfc(-a * v) - erfc(a * (1.0 - v))
    } else {
        erf(a * (1.0 - v)) + erf(a * v)
    };
    let inner = if v > 0.0 && v < 1.0 { 2.0 * d * v * (v - 1.0) } else { 0.0 };
    let total = inner + d / p * smooth;
    if total < 0.0 {
        log::debug!("clamped negative density {total:e} at rho = {rho}");
        return Ok(0.0);
    }
    Ok(total)
}

/// `n(rho)/n(rho_N) = erfc(sqrt(2) t_* (rho - rho_N))` beyond the edge.
pub fn tail_prediction(spec: &TransferSpec, rho: f64) -> Result<f64> {
    let edge = rho_edge(spec);
    if !(rho >= edge) {
        return Err(Error::InvalidParameter(format!("tail needs rho >= {edge}, got {rho}")));
    }
    let ts = t_star(spec);
    if !ts.is_finite() {
        return Err(Error::DegenerateBulk);
    }
    Ok(erfc(SQRT_2 * ts * (rho - edge)))
}

/// Fitted constants of the two gap-law parameterizations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapConstants {
    pub a: f64,
    pub b: f64,
}

impl Default for GapConstants {
    fn default() -> Self {
        Self { a: 0.4, b: 1.77 }
    }
}

/// Mean leading gap `A / (t_* sqrt(ln t_*))` and `1 / (B sqrt(n ln n))` with `n = t_*^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapLaw {
    pub a_form: f64,
    pub b_form: f64,
}

pub fn mean_gap_prediction(spec: &TransferSpec, constants: GapConstants) -> Result<GapLaw> {
    let ts = t_star(spec);
    if !ts.is_finite() {
        return Err(Error::InvalidParameter("gap law is undefined at zero field".into()));
    }
    // t_*^2 > D/(D-1) > 1 for any nonzero field, so the logarithms are positive
    let n = ts * ts;
    Ok(GapLaw {
        a_form: constants.a / (ts * ts.ln().sqrt()),
        b_form: 1.0 / (constants.b * (n * n.ln()).sqrt()),
    })
}

/// Leading-gap distribution from the edge tail, at one gap value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapPdf {
    /// `sqrt(2 n(rho_N)) Delta`.
    pub scaled_delta: f64,
    /// Density in `Delta`.
    pub pdf: f64,
    /// Normalized `k e^{-k Delta~}` with `k = 2 sqrt(ln N_tail)`, as a density in `Delta`.
    pub exponential_pdf: f64,
    /// Decay rate `2 x_0 + 1/x_0` in `Delta~` from the saddle `x_0 = sqrt(W_0(N_tail/4))`.
    pub saddle_rate: f64,
    /// `2 sqrt(ln N_tail)`.
    pub log_rate: f64,
}

/// Cumulative of the scaled tail density `sqrt(pi) erfc(x)` on `x >= 0`.
fn tail_cdf(x: f64) -> f64 {
    1.0 - (-x * x).exp() + PI.sqrt() * x * erfc(x)
}

pub fn gap_pdf_prediction(spec: &TransferSpec, delta: f64) -> Result<GapPdf> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter("gap must be non-negative".into()));
    }
    let p = TheoryParams::new(spec);
    if !p.t_star.is_finite() {
        return Err(Error::InvalidParameter("gap law is undefined at zero field".into()));
    }
    let count = p.tail_count;
    if count <= 2.0 {
        return Err(Error::InvalidParameter(format!("tail holds only {count} eigenvalues")));
    }
    let scale = (2.0 * p.edge_density).sqrt();
    let dt = scale * delta;
    // x beyond ~6 contributes below double precision: erfc(6) ~ 2e-17
    let integrand = |x: f64| erfc(x) * erfc(x + dt) * tail_cdf(x).powf(count - 2.0);
    let core = integrate(integrand, 0.0, 6.5, 1e-14)?;
    let scaled_pdf = count * (count - 1.0) * PI * core;
    let log_rate = 2.0 * count.ln().sqrt();
    let x0 = lambert_w0(count / 4.0)?.sqrt();
    Ok(GapPdf {
        scaled_delta: dt,
        pdf: scale * scaled_pdf,
        exponential_pdf: scale * log_rate * (-log_rate * dt).exp(),
        saddle_rate: 2.0 * x0 + 1.0 / x0,
        log_rate,
    })
}

/// `ln D - ln(1 + D t / t_*^2)`; at zero field the state stays maximally mixed.
pub fn entropy_early_prediction(spec: &TransferSpec, t: f64) -> f64 {
    let d = spec.dim() as f64;
    let excess = excess_fourth_moment(spec);
    // D t / t_*^2 = t (E zeta^4 / E^2 zeta^2 - 1)
    d.ln() - (t * excess).ln_1p()
}

/// Late-time entropy. Fixed mode: `1 / (2 <Delta_rho> t)` with the B-form gap (any Renyi
/// index). Fresh mode: `(t/t_*^2) e^{-t/t_*^2}` for von Neumann, `n/(n-1) e^{-t/t_*^2}` else.
pub fn entropy_late_prediction(
    spec: &TransferSpec,
    t: f64,
    mode: Mode,
    n: RenyiIndex,
    constants: GapConstants,
) -> Result<f64> {
    if t < 1.0 {
        return Err(Error::InvalidParameter("late-time prediction needs t >= 1".into()));
    }
    match mode {
        Mode::Fixed => {
            let gap = mean_gap_prediction(spec, constants)?.b_form;
            Ok(entropy_late_fixed(gap, t))
        }
        Mode::Fresh => {
            let ts = t_star(spec);
            if !ts.is_finite() {
                return Err(Error::InvalidParameter("no purification at zero field".into()));
            }
            let x = t / (ts * ts);
            Ok(if n.get() == 1 {
                x * (-x).exp()
            } else {
                let nf = n.get() as f64;
                nf / (nf - 1.0) * (-x).exp()
            })
        }
    }
}

/// `1 / (2 gap t)` for a given mean gap.
pub fn entropy_late_fixed(mean_gap: f64, t: f64) -> f64 {
    1.0 / (2.0 * mean_gap * t)
}

/// Limiting singular gap of the fresh model, `t_*^{-2}/2`.
pub fn fresh_limiting_gap(spec: &TransferSpec) -> f64 {
    let ts = t_star(spec);
    0.5 / (ts * ts)
}

/// `ln <K(t)>` to two subleading orders in `1/D`.
pub fn log_sff_prediction(spec: &TransferSpec, t: f64) -> f64 {
    let [l1, l2, l3, _] = TheoryParams::new(spec).log_moments;
    let d = spec.dim() as f64;
    let skew = (l3 - 3.0 * l1).exp() - 3.0 * (l2 - 2.0 * l1).exp() + 2.0;
    let excess = excess_fourth_moment(spec);
    let bracket = t
        + t.powi(4) / 6.0 * skew / (d * d)
        + (5.0 * t.ln() + 2.0 * excess.ln() - 2.0 * d.ln()).exp() / 24.0;
    t * l1 + bracket.ln()
}

pub fn sff_prediction(spec: &TransferSpec, t: f64) -> f64 {
    log_sff_prediction(spec, t).exp()
}

/// Scaled ramp `kappa(s) = s + s^5/24`.
pub fn scaled_sff_prediction(s: f64) -> f64 {
    s + s.powi(5) / 24.0
}
