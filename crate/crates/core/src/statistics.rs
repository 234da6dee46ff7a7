//! Photon statistics of `|z⟩`: occupation probabilities, expectations of
//! monomials in the dressed boson operators, and the Mandel parameter.

use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{ladder_matrices, FockTruncation, TridiagonalOperator};
use crate::coherent::{domain_radius, normalization};
use crate::error::{Error, Result};
use crate::qcore::{structure_function, DeformParams};
use crate::summation::CompensatedSum;

const MONOMIAL_MAX_TERMS: usize = 10_000_000;

/// `⟨N⟩`, `⟨N²⟩` and `Q` at `x = |z|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatsPoint {
    pub x: f64,
    pub mean_n: f64,
    pub second_moment: f64,
    pub mandel_q: f64,
}

impl StatsPoint {
    pub fn variance(&self) -> f64 {
        self.second_moment - self.mean_n * self.mean_n
    }
}

/// `P(n) = q^{n(n+1)/2} xⁿ / (sⁿ [n]_q! 𝒩(x))`.
pub fn photon_pdf(p: &DeformParams, x: f64, n: u64) -> Result<f64> {
    let norm = normalization(p, x)?;
    if n == 0 {
        return Ok(1.0 / norm.value);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut term = 1.0 / norm.value;
    for k in 1..=n {
        term *= x * p.coefficient_ratio(k);
    }
    Ok(term)
}

/// `⟨(b†)^s b^r⟩` in `|z⟩`, summed until the certified tail is below
/// `rel_tol` times the partial sum.
///
/// Consecutive terms of the series differ by
/// `x √(g(n+s+1) g(n+r+1) (n+r+1)(n+s+1)) / (n+1)` with `g(m) = q^m/(s [m]_q)`,
/// a ratio that decreases in `n`, so the geometric remainder bound is rigorous
/// once it drops below one.
pub fn monomial_expectation(
    p: &DeformParams,
    z: Complex64,
    s: u32,
    r: u32,
    rel_tol: f64,
) -> Result<Complex64> {
    let x = z.norm_sqr();
    let norm = normalization(p, x)?;
    let g = |m: u64| p.coefficient_ratio(m);
    // n = 0 term: √(a_s a_r r! s!) with a_m = Π_{k<=m} g(k).
    let log_first: f64 = 0.5
        * ((1..=s as u64).map(|k| (g(k) * k as f64).ln()).sum::<f64>()
            + (1..=r as u64).map(|k| (g(k) * k as f64).ln()).sum::<f64>());
    let mut term = log_first.exp();
    let mut sum = CompensatedSum::new();
    sum.add(term);
    let ratio = |n: u64| -> f64 {
        let ns = n + s as u64 + 1;
        let nr = n + r as u64 + 1;
        x * (g(ns) * g(nr) * ns as f64 * nr as f64).sqrt() / (n + 1) as f64
    };
    let mut converged = x == 0.0;
    for n in 0..MONOMIAL_MAX_TERMS as u64 {
        if converged {
            break;
        }
        term *= ratio(n);
        if !term.is_finite() {
            return Err(Error::Overflow(format!(
                "monomial series overflows at x = {x}"
            )));
        }
        sum.add(term);
        let next = ratio(n + 1);
        if term == 0.0 || (next < 1.0 && term * next / (1.0 - next) <= rel_tol * sum.value()) {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "monomial expectation (s = {s}, r = {r}) did not settle within {MONOMIAL_MAX_TERMS} terms"
        )));
    }
    Ok(z.conj().powu(s) * z.powu(r) * (sum.value() / norm.value))
}

/// Mean, second moment and Mandel `Q` from the normalization series and its derivatives.
pub fn stats_point(p: &DeformParams, x: f64) -> Result<StatsPoint> {
    let n = normalization(p, x)?;
    if x == 0.0 {
        return Ok(StatsPoint {
            x,
            mean_n: 0.0,
            second_moment: 0.0,
            mandel_q: 0.0,
        });
    }
    let mean_n = x * n.d1 / n.value;
    let second_moment = x * x * n.d2 / n.value + mean_n;
    let mandel_q = x * (n.d2 / n.d1 - n.d1 / n.value);
    Ok(StatsPoint {
        x,
        mean_n,
        second_moment,
        mandel_q,
    })
}

/// `-q(1-q)/(s(1+q))`, the slope of `Q` at the origin.
pub fn mandel_small_x_slope(p: &DeformParams) -> f64 {
    let q = p.q();
    -q * (1.0 - q) / (p.scale() * (1.0 + q))
}

/// Measured against predicted small-`x` slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeCheck {
    pub measured_slope: f64,
    pub predicted_slope: f64,
    pub rel_error: f64,
}

/// Slope of `Q` at the origin from `Q(h)/h` and `Q(2h)/(2h)`, Richardson-extrapolated
/// to cancel the linear correction.
pub fn mandel_slope_richardson(p: &DeformParams, h: f64) -> Result<SlopeCheck> {
    check_small_x(p, 2.0 * h)?;
    let q1 = stats_point(p, h)?.mandel_q / h;
    let q2 = stats_point(p, 2.0 * h)?.mandel_q / (2.0 * h);
    let measured = 2.0 * q1 - q2;
    let predicted = mandel_small_x_slope(p);
    Ok(SlopeCheck {
        measured_slope: measured,
        predicted_slope: predicted,
        rel_error: (measured - predicted).abs() / predicted.abs(),
    })
}

pub(crate) fn check_small_x(p: &DeformParams, x: f64) -> Result<()> {
    let limit = 1e-3 * domain_radius(p).radius.min(p.scale()).min(1.0);
    if !(x > 0.0 && x <= limit) {
        return Err(Error::Domain(format!(
            "small-x checks need 0 < x <= {limit:e}, got {x}"
        )));
    }
    Ok(())
}

/// The conventional boson pair `b = a √(N/φ(N))`, `b† = √(N/φ(N)) a†` on the
/// truncated space. The dressing is singular on the vacuum, so `b|0⟩ = 0` is
/// set directly (the `a` matrix already maps `|0⟩` to zero).
pub fn dressed_bosons(
    p: &DeformParams,
    t: FockTruncation,
) -> (TridiagonalOperator, TridiagonalOperator) {
    let ladder = ladder_matrices(p, t);
    let mut b = ladder.a.clone();
    for (k, entry) in b.sup.iter_mut().enumerate() {
        let n = (k + 1) as u64;
        *entry *= (n as f64 / structure_function(p, n)).sqrt();
    }
    let mut b_dag = ladder.a_dag.clone();
    for (k, entry) in b_dag.sub.iter_mut().enumerate() {
        let n = (k + 1) as u64;
        *entry *= (n as f64 / structure_function(p, n)).sqrt();
    }
    let b_dag = TridiagonalOperator {
        hermitian: false,
        ..b_dag
    };
    (b, b_dag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent::amplitudes;
    use crate::qcore::q_factorial;

    fn params(q: f64, l: f64, lambda: f64) -> DeformParams {
        DeformParams::new(q, l, lambda).unwrap()
    }

    #[test]
    fn pdf_vacuum() {
        let p = params(0.5, 1.0, 0.0);
        assert_eq!(photon_pdf(&p, 0.0, 0).unwrap(), 1.0);
        assert_eq!(photon_pdf(&p, 0.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn pdf_example_against_amplitudes() {
        let p = params(0.5, 1.0, 0.0);
        let x: f64 = 0.3;
        let norm = normalization(&p, x).unwrap().value;
        let fact2 = q_factorial(2, 0.5).unwrap();
        assert_eq!(fact2, 1.5);
        let expected = 0.5f64.powi(3) * x * x / (fact2 * norm);
        let got = photon_pdf(&p, x, 2).unwrap();
        assert!((got - expected).abs() < 1e-15);
        let st = amplitudes(
            &p,
            Complex64::new(x.sqrt(), 0.0),
            FockTruncation::new(4).unwrap(),
        )
        .unwrap();
        assert!((st.amplitudes[2].norm_sqr() - got).abs() < 1e-15);
    }

    #[test]
    fn pdf_sums_to_one() {
        let p = params(1.4, 0.8, 0.2);
        let r = domain_radius(&p).radius;
        let x = 0.6 * r;
        let total: f64 = (0..2000)
            .map(|n| photon_pdf(&p, x, n).unwrap())
            .collect::<CompensatedSum>()
            .value();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn monomial_examples() {
        let p = params(0.5, 1.0, 0.0);
        let z = Complex64::new(0.5, 0.8);
        let x = z.norm_sqr();
        let one = monomial_expectation(&p, z, 0, 0, 1e-16).unwrap();
        assert!((one - 1.0).norm() < 1e-14);
        let n = normalization(&p, x).unwrap();
        let stats = stats_point(&p, x).unwrap();
        let m1 = monomial_expectation(&p, z, 1, 1, 1e-16).unwrap();
        assert!((m1.re - stats.mean_n).abs() < 1e-13 * stats.mean_n);
        assert!(m1.im.abs() < 1e-15);
        let m2 = monomial_expectation(&p, z, 2, 2, 1e-16).unwrap();
        let expected = x * x * n.d2 / n.value;
        assert!((m2.re - expected).abs() < 1e-13 * expected);
    }

    #[test]
    fn off_diagonal_monomial_against_amplitude_sum() {
        // ⟨(b†)^s b^r⟩ = Σ_n conj(c_{n+s}) c_{n+r} √((n+s)!(n+r)!)/n!
        let p = params(0.7, 1.1, 0.3);
        let z = Complex64::new(0.9, -0.4);
        let st = amplitudes(&p, z, FockTruncation::new(120).unwrap()).unwrap();
        let c = &st.amplitudes;
        let ln_fact = |n: usize| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
        for (s, r) in [(1u32, 0u32), (0, 2), (3, 1)] {
            let oracle: Complex64 = (0..100usize)
                .map(|n| {
                    let w = (0.5 * (ln_fact(n + s as usize) + ln_fact(n + r as usize))
                        - ln_fact(n))
                    .exp();
                    c[n + s as usize].conj() * c[n + r as usize] * w
                })
                .sum();
            let got = monomial_expectation(&p, z, s, r, 1e-16).unwrap();
            assert!(
                (got - oracle).norm() < 1e-12 * oracle.norm(),
                "s = {s}, r = {r}"
            );
        }
    }

    #[test]
    fn stats_vacuum_and_definition() {
        let p = params(2.0, 1.0, 0.0);
        let v = stats_point(&p, 0.0).unwrap();
        assert_eq!((v.mean_n, v.second_moment, v.mandel_q), (0.0, 0.0, 0.0));
        let st = stats_point(&p, 0.4).unwrap();
        let assembled = (st.second_moment - st.mean_n * st.mean_n - st.mean_n) / st.mean_n;
        assert!((st.mandel_q - assembled).abs() < 1e-12 * st.mandel_q.abs().max(1e-3));
    }

    #[test]
    fn second_moment_against_direct_sum() {
        let p = params(0.6, 1.3, -0.4);
        let x = 2.5;
        let direct: f64 = (0..400u64)
            .map(|n| (n * n) as f64 * photon_pdf(&p, x, n).unwrap())
            .collect::<CompensatedSum>()
            .value();
        let st = stats_point(&p, x).unwrap();
        assert!((st.second_moment - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn small_x_mandel_law() {
        let p = params(0.5, 1.0, 0.0);
        // -q(1-q)/(s(1+q)) = -0.5·0.5/1.5
        let predicted = -0.5 * 0.5 / 1.5;
        assert!((mandel_small_x_slope(&p) - predicted).abs() < 1e-16);
        let st = stats_point(&p, 1e-4).unwrap();
        assert!((st.mandel_q / 1e-4 - predicted).abs() < 1e-3 * predicted.abs());
        let rich = mandel_slope_richardson(&p, 1e-4).unwrap();
        assert!(rich.rel_error < 1e-6, "{rich:?}");
        assert!(mandel_slope_richardson(&p, 0.1).is_err());
    }

    #[test]
    fn dressed_boson_actions() {
        let p = params(0.5, 2.0, 1.0);
        let d = 12;
        let (b, b_dag) = dressed_bosons(&p, FockTruncation::new(d).unwrap());
        for n in 0..d {
            let mut e = vec![0.0; d];
            e[n] = 1.0;
            let down = b.apply(&e);
            if n > 0 {
                assert!((down[n - 1] - (n as f64).sqrt()).abs() < 1e-12);
            } else {
                assert!(down.iter().all(|&v| v == 0.0));
            }
            if n + 1 < d {
                let up = b_dag.apply(&e);
                assert!((up[n + 1] - ((n + 1) as f64).sqrt()).abs() < 1e-12);
            }
        }
    }
}
