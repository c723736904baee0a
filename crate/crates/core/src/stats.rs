//! Running means, standard errors and ordered reductions.

use serde::{Deserialize, Serialize};

/// Welford accumulator for mean and sample variance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Sample standard deviation over `sqrt(n)`.
    pub fn sem(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn summary(&self) -> Summary {
        Summary { mean: self.mean(), sem: self.sem(), n: self.n }
    }
}

impl FromIterator<f64> for MeanAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sem: f64,
    pub n: u64,
}

impl Summary {
    /// `|mean - target| / sem`, infinite when the standard error vanishes and they differ.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.sem
        }
    }
}

/// Complex sample mean with per-component standard errors.
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexAccumulator {
    pub re: MeanAccumulator,
    pub im: MeanAccumulator,
}

impl ComplexAccumulator {
    pub fn push(&mut self, z: num_complex::Complex64) {
        self.re.push(z.re);
        self.im.push(z.im);
    }
}

/// Per-point summaries of a table of realizations, reduced in row order.
pub fn summarize_columns(rows: &[Vec<f64>]) -> Vec<Summary> {
    let width = rows.first().map_or(0, |r| r.len());
    (0..width)
        .map(|j| rows.iter().map(|r| r[j]).collect::<MeanAccumulator>().summary())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_mean_and_error() {
        let acc: MeanAccumulator = [1.0, 2.0, 3.0, 4.0].into_iter().collect();
        assert_eq!(acc.mean(), 2.5);
        assert!((acc.variance() - 5.0 / 3.0).abs() < 1e-15);
        assert!((acc.sem() - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn welford_matches_two_pass(xs in prop::collection::vec(-1e3f64..1e3, 2..200)) {
            let acc: MeanAccumulator = xs.iter().cloned().collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert!((acc.mean() - mean).abs() < 1e-9);
            prop_assert!((acc.variance() - var).abs() < 1e-7 * var.max(1.0));
        }
    }
}
