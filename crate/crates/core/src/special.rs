//! Special functions and quadrature used by the analytic predictions.

use crate::error::{Error, Result};

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Principal branch `W_0(x)` for `x >= -1/e`, by Halley iteration.
pub fn lambert_w0(x: f64) -> Result<f64> {
    let branch = -(-1.0f64).exp();
    if !(x >= branch) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("W0 undefined at {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut w = if x < 1.0 {
        // series about the branch point, good enough as a start on [-1/e, 1)
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l = x.ln();
        l - l.max(1.0).ln().max(0.0)
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-15 * w.abs().max(1e-300) {
            return Ok(w);
        }
    }
    if (w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1e-300) {
        Ok(w)
    } else {
        Err(Error::NonConvergence(format!("Lambert W at {x}")))
    }
}

// 15-point Gauss-Legendre rule on [-1, 1]
const GL_NODES: [f64; 8] = [
    0.0,
    0.201_194_093_997_434_5,
    0.394_151_347_077_563_4,
    0.570_972_172_608_538_8,
    0.724_417_731_360_170_1,
    0.848_206_583_410_427_2,
    0.937_273_392_400_705_9,
    0.987_992_518_020_485_4,
];
const GL_WEIGHTS: [f64; 8] = [
    0.202_578_241_925_561_3,
    0.198_431_485_327_111_6,
    0.186_161_000_015_562_2,
    0.166_269_205_816_993_9,
    0.139_570_677_926_154_3,
    0.107_159_220_467_172_0,
    0.070_366_047_488_108_1,
    0.030_753_241_996_117_3,
];

fn gauss15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = GL_WEIGHTS[0] * f(c);
    for i in 1..8 {
        let dx = h * GL_NODES[i];
        s += GL_WEIGHTS[i] * (f(c - dx) + f(c + dx));
    }
    s * h
}

/// Adaptive Gauss-Legendre quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
        let m = 0.5 * (a + b);
        let left = gauss15(f, a, m);
        let right = gauss15(f, m, b);
        let err = (left + right - whole).abs();
        if err <= tol || (b - a).abs() < 1e-14 * (a.abs() + b.abs()).max(1e-300) {
            return Ok(left + right);
        }
        if depth == 0 {
            return Err(Error::NonConvergence(format!("quadrature on [{a}, {b}]")));
        }
        // errors of the halves rarely add coherently
        let sub = tol * std::f64::consts::FRAC_1_SQRT_2;
        Ok(rec(f, a, m, left, sub, depth - 1)? + rec(f, m, b, right, sub, depth - 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    let whole = gauss15(&f, a, b);
    rec(&f, a, b, whole, tol, 40)
}

/// Asymptotic Kolmogorov survival function `P(D_n > d)` with the usual small-sample
/// correction of the statistic.
pub fn kolmogorov_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambert_w_inverts() {
        for &x in &[-0.3678, -0.2, 1e-8, 0.5, 1.0, std::f64::consts::E, 10.0, 1e6] {
            let w = lambert_w0(x).unwrap();
            assert!((w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1e-12), "{x}");
        }
        assert!((lambert_w0(1.0).unwrap() - 0.567_143_290_409_783_8).abs() < 1e-15);
        assert!(lambert_w0(-1.0).is_err());
    }

    #[test]
    fn erf_reference_values() {
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((erfc(3.0) - 2.209_049_699_858_544e-5).abs() < 1e-18);
    }

    #[test]
    fn quadrature_of_gaussian() {
        let v = integrate(|x| (-x * x).exp(), -8.0, 8.0, 1e-13).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let w = integrate(|x| x.sqrt(), 0.0, 1.0, 1e-12).unwrap();
        assert!((w - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn kolmogorov_tail() {
        // lambda = 1.36 gives the classic 5% level
        let n = 10_000;
        let d = 1.358 / ((n as f64).sqrt() + 0.12 + 0.11 / (n as f64).sqrt());
        assert!((kolmogorov_pvalue(d, n) - 0.05).abs() < 2e-3);
    }
}
