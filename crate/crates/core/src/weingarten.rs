//! Exact Haar averages for small moment order.
//!
//! Weingarten values are class functions, so the defining relation
//! `sum_tau Wg(sigma tau^-1) D^{#cycles(tau pi^-1)} = delta` reduces to one linear equation per
//! cycle type, solved here in exact rational arithmetic.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::ensemble::DiagonalField;
use crate::error::{Error, Result};
use crate::perm::{all_perms, partitions, CycleType, Perm};

pub const MAX_ORDER: usize = 6;
pub const MAX_SFF_TIME: usize = 5;
pub const MAX_PURITY_ORDER: usize = 4;
pub const MAX_PURITY_TIME: usize = 6;

#[derive(Clone, Debug)]
pub struct WeingartenTable {
    dim: usize,
    order: usize,
    exact: BTreeMap<CycleType, BigRational>,
    values: BTreeMap<CycleType, f64>,
}

impl WeingartenTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn exact(&self, ct: &CycleType) -> Option<&BigRational> {
        self.exact.get(ct)
    }

    pub fn value(&self, ct: &CycleType) -> Option<f64> {
        self.values.get(ct).copied()
    }

    /// `Wg(p; D)`.
    pub fn get(&self, p: &Perm) -> f64 {
        self.values[&p.cycle_type()]
    }

    pub fn entries(&self) -> impl Iterator<Item = (&CycleType, f64)> {
        self.values.iter().map(|(k, v)| (k, *v))
    }
}

pub fn weingarten_table(dim: usize, order: usize) -> Result<WeingartenTable> {
    if order > MAX_ORDER {
        return Err(Error::SizeLimit(format!("Weingarten order {order} > {MAX_ORDER}")));
    }
    if dim < order.max(1) {
        return Err(Error::InvalidParameter(format!("need D >= M, got D = {dim}, M = {order}")));
    }
    let classes = partitions(order);
    let index: BTreeMap<CycleType, usize> = classes.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
    let perms = all_perms(order);
    let d = BigInt::from(dim);
    let pow: Vec<BigRational> = (0..=order).map(|c| BigRational::from_integer(num_traits::pow(d.clone(), c))).collect();

    // row lambda: sum_nu Wg(nu) D^{#cycles(nu^-1 rep_lambda)} = [lambda is the identity class]
    let p = classes.len();
    let mut a = vec![vec![BigRational::zero(); p + 1]; p];
    for (row, lambda) in classes.iter().enumerate() {
        let rep = lambda.representative();
        for nu in &perms {
            let col = index[&nu.cycle_type()];
            a[row][col] += &pow[nu.inverse().compose(&rep).n_cycles()];
        }
        if lambda.n_cycles() == order {
            a[row][p] = BigRational::one();
        }
    }
    let solution = solve_exact(a).ok_or_else(|| Error::LinAlg(format!("singular Gram system at D = {dim}")))?;

    let mut exact = BTreeMap::new();
    let mut values = BTreeMap::new();
    for (c, v) in classes.into_iter().zip(solution) {
        values.insert(c.clone(), v.to_f64().unwrap_or(f64::NAN));
        exact.insert(c, v);
    }
    Ok(WeingartenTable { dim, order, exact, values })
}

/// Gauss-Jordan elimination on an augmented `p x (p+1)` system.
fn solve_exact(mut a: Vec<Vec<BigRational>>) -> Option<Vec<BigRational>> {
    let p = a.len();
    for col in 0..p {
        let pivot = (col..p).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let inv = a[col][col].recip();
        for v in a[col].iter_mut() {
            *v *= &inv;
        }
        for r in 0..p {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in col..=p {
                    let sub = &f * &a[col][c];
                    a[r][c] -= sub;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[p].clone()).collect())
}

/// Row and column indices of the `U` and `U*` factors in `<prod U_{ij} prod U*_{i'j'}>`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MomentPattern {
    pub unitary: Vec<(usize, usize)>,
    pub conjugate: Vec<(usize, usize)>,
}

/// Exact `<prod U prod U*>`; zero whenever the numbers of `U` and `U*` differ.
pub fn haar_moment_oracle(table: &WeingartenTable, pattern: &MomentPattern) -> Result<f64> {
    let m = pattern.unitary.len();
    if m != pattern.conjugate.len() {
        return Ok(0.0);
    }
    if m != table.order {
        return Err(Error::InvalidParameter(format!("pattern of order {m} for a table of order {}", table.order)));
    }
    let all = pattern.unitary.iter().chain(&pattern.conjugate);
    if all.clone().any(|&(i, j)| i >= table.dim || j >= table.dim) {
        return Err(Error::InvalidParameter("index outside the dimension".into()));
    }
    let perms = all_perms(m);
    let matches = |pick: fn(&(usize, usize)) -> usize, s: &Perm| {
        (0..m).all(|a| pick(&pattern.unitary[a]) == pick(&pattern.conjugate[s.apply(a)]))
    };
    let rows: Vec<&Perm> = perms.iter().filter(|s| matches(|x| x.0, s)).collect();
    let cols: Vec<&Perm> = perms.iter().filter(|s| matches(|x| x.1, s)).collect();
    let mut sum = 0.0;
    for s in &rows {
        for t in &cols {
            sum += table.get(&s.compose(&t.inverse()));
        }
    }
    Ok(sum)
}

/// `Tr zeta^{2k}` for `k = 0..=kmax`.
fn even_traces(field: &DiagonalField, kmax: usize) -> Vec<f64> {
    (0..=kmax).map(|k| field.log_trace_power(2.0 * k as f64).exp()).collect()
}

fn cycle_product(p: &Perm, traces: &[f64]) -> f64 {
    p.cycle_lengths().iter().map(|&c| traces[c]).product()
}

/// Exact `<K(t)> = <|Tr (zeta U)^t|^2>` by enumerating `S_t x S_t`.
pub fn exact_sff_small_t(field: &DiagonalField, t: usize) -> Result<f64> {
    let d = field.dim();
    if t == 0 {
        return Ok((d * d) as f64);
    }
    if t > MAX_SFF_TIME {
        return Err(Error::SizeLimit(format!("exact SFF needs t <= {MAX_SFF_TIME}")));
    }
    let table = weingarten_table(d, t)?;
    let traces = even_traces(field, t);
    let perms = all_perms(t);
    // index r of Tr(zeta U)^t is glued to r+1; the contraction runs along sigma^-1 s^-1 tau s
    let up = Perm::block_shift(t, t, 1);
    let down = up.inverse();
    let mut sum = 0.0;
    for sigma in &perms {
        let si = sigma.inverse();
        for tau in &perms {
            let wg = table.get(&sigma.compose(&tau.inverse()));
            let g = si.compose(&up).compose(tau).compose(&down);
            sum += wg * cycle_product(&g, &traces);
        }
    }
    Ok(sum)
}

/// Exact `<Tr[(T T^dagger)^m]^n>` for `T = zeta U_t ... zeta U_1` with independent Haar `U_l`.
///
/// Averaging one step at a time gives `E_t(rho) = sum Wg(sigma tau^-1) z(rho sigma) E_{t-1}(tau^-1)`
/// over `S_{mn}`, with `E_0(tau) = D^{#cycles(tau)}` and `z` the product of `Tr zeta^{2|c|}` over
/// cycles. The moment is `E_t` at the permutation that cycles within each trace.
pub fn exact_purity_moment_fresh(field: &DiagonalField, t: usize, m: usize, n: usize) -> Result<f64> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("m and n must be positive".into()));
    }
    let k = m * n;
    if k > MAX_PURITY_ORDER || t > MAX_PURITY_TIME {
        return Err(Error::SizeLimit(format!(
            "exact fresh moments need mn <= {MAX_PURITY_ORDER} and t <= {MAX_PURITY_TIME}"
        )));
    }
    let d = field.dim();
    let table = weingarten_table(d, k)?;
    let traces = even_traces(field, k);
    let perms = all_perms(k);
    let pos: BTreeMap<&Perm, usize> = perms.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let inv: Vec<usize> = perms.iter().map(|p| pos[&p.inverse()]).collect();

    let np = perms.len();
    let mut wg = vec![0.0; np * np];
    let mut z = vec![0.0; np * np];
    for (a, pa) in perms.iter().enumerate() {
        for (b, pb) in perms.iter().enumerate() {
            wg[a * np + b] = table.get(&pa.compose(&pb.inverse()));
            z[a * np + b] = cycle_product(&pa.compose(pb), &traces);
        }
    }
    let mut e: Vec<f64> = perms.iter().map(|p| (d as f64).powi(p.n_cycles() as i32)).collect();
    for _ in 0..t {
        // g(sigma) = sum_tau Wg(sigma tau^-1) E(tau^-1)
        let g: Vec<f64> = (0..np).map(|s| (0..np).map(|tau| wg[s * np + tau] * e[inv[tau]]).sum()).collect();
        e = (0..np).map(|r| (0..np).map(|s| z[r * np + s] * g[s]).sum()).collect();
    }
    Ok(e[pos[&Perm::block_shift(k, m, 1)]])
}
