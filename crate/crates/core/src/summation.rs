//! Compensated (Neumaier) summation.

use num_complex::Complex64;

/// Running sum with a Neumaier error-free-transform compensation term.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator of reals.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Componentwise compensated sum for complex terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexCompensatedSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexCompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: Complex64) {
        self.re.add(value.re);
        self.im.add(value.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_summation() {
        let terms = [1.0, 1e100, 1.0, -1e100];
        let naive: f64 = terms.iter().sum();
        assert_eq!(naive, 0.0);
        assert_eq!(compensated_sum(terms), 2.0);
    }

    #[test]
    fn harmonic_tail_matches_reversed_order() {
        let forward = compensated_sum((1..=100_000).map(|k| 1.0 / k as f64));
        let backward = compensated_sum((1..=100_000).rev().map(|k| 1.0 / k as f64));
        assert!((forward - backward).abs() <= 2.0 * f64::EPSILON * forward);
    }

    #[test]
    fn complex_sum_is_componentwise() {
        let mut acc = ComplexCompensatedSum::new();
        acc.add(Complex64::new(1.0, 1e100));
        acc.add(Complex64::new(1e-20, -1e100));
        acc.add(Complex64::new(0.0, 3.0));
        assert_eq!(acc.value(), Complex64::new(1.0 + 1e-20, 3.0));
    }
}
