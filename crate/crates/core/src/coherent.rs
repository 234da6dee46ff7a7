//! Deformed coherent states `|z⟩ = 𝒩(|z|²)^{-1/2} Σ c_n z^n |n⟩`.
//!
//! The normalization series is
//! `𝒩(x) = Σ_n q^{n(n+1)/2} xⁿ / (sⁿ [n]_q!)`, `s = l² q^λ`. Consecutive terms
//! differ by the factor `x·q^n/(s [n]_q)`, which decreases monotonically in `n`
//! for every valid `q`; once it drops below one, the geometric bound on the
//! remainder is rigorous. The same holds for the term-wise derivative series.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{jacobi_entries, FockTruncation};
use crate::error::{Error, Result};
use crate::qcore::{
    q_exponential, q_factorial, q_integral_enveloped, DeformParams, QIntegralOptions, Regime,
    SeriesEval,
};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::summation::{CompensatedSum, ComplexCompensatedSum};

/// Labels must satisfy `|z|²/R <= 1 - DOMAIN_MARGIN` when `R` is finite.
pub const DOMAIN_MARGIN: f64 = 1e-6;

/// Series are truncated once the remainder bound falls below this fraction of the sum.
const SERIES_REL_TAIL: f64 = 1e-17;

const SERIES_MAX_TERMS: usize = 200_000_000;

/// Truncated states whose discarded probability exceeds this are flagged.
pub const TRUNCATION_WARNING: f64 = 1e-10;

/// The convergence disk `{|z|² < R}` of the normalization series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainDisk {
    /// `R = s/(q-1)` for `q > 1`, infinite for `q < 1`.
    pub radius: f64,
}

impl DomainDisk {
    pub fn is_bounded(&self) -> bool {
        self.radius.is_finite()
    }

    /// Whether `x = |z|²` is a usable label: nonnegative and inside the disk by the margin.
    pub fn admits(&self, x: f64) -> bool {
        x.is_finite() && x >= 0.0 && (!self.is_bounded() || x / self.radius <= 1.0 - DOMAIN_MARGIN)
    }

    fn check(&self, x: f64, what: &str) -> Result<()> {
        if self.admits(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{what} = {x} is outside the convergence disk (R = {}, margin {DOMAIN_MARGIN:e})",
                self.radius
            )))
        }
    }
}

pub fn domain_radius(p: &DeformParams) -> DomainDisk {
    match p.regime() {
        Regime::QBelowOne => DomainDisk {
            radius: f64::INFINITY,
        },
        Regime::QAboveOne => DomainDisk {
            radius: p.scale() / (p.q() - 1.0),
        },
    }
}

/// Sums the value series and, when asked, the first two derivative series at `x > 0`.
/// Overflow of a term is reported as an error unless `saturate` is set, in which
/// case `+∞` is returned.
fn sum_series(p: &DeformParams, x: f64, derivatives: bool, saturate: bool) -> Result<SeriesEval> {
    debug_assert!(x > 0.0);
    let mut value = CompensatedSum::new();
    let mut d1 = CompensatedSum::new();
    let mut d2 = CompensatedSum::new();
    value.add(1.0);
    let mut term = 1.0;
    let inv_x = 1.0 / x;
    for n in 1..SERIES_MAX_TERMS as u64 {
        term *= x * p.coefficient_ratio(n);
        if !(term.is_finite() && (value.value() + term).is_finite()) {
            if saturate {
                return Ok(SeriesEval {
                    value: f64::INFINITY,
                    d1: f64::INFINITY,
                    d2: f64::INFINITY,
                    tail_bound: 0.0,
                    terms_used: n as usize,
                });
            }
            return Err(Error::Overflow(format!(
                "normalization series term {n} overflows at x = {x}"
            )));
        }
        let nf = n as f64;
        let t1 = nf * term * inv_x;
        let t2 = nf * (nf - 1.0) * term * inv_x * inv_x;
        value.add(term);
        if derivatives {
            d1.add(t1);
            d2.add(t2);
        }
        if term == 0.0 {
            return Ok(SeriesEval {
                value: value.value(),
                d1: d1.value(),
                d2: d2.value(),
                tail_bound: 0.0,
                terms_used: n as usize + 1,
            });
        }
        let ratio = x * p.coefficient_ratio(n + 1);
        let (ratio1, ratio2) = if derivatives {
            (
                ratio * (nf + 1.0) / nf,
                ratio * (nf + 1.0) / (nf - 1.0).max(1.0),
            )
        } else {
            (0.0, 0.0)
        };
        if n < 2 || ratio2 >= 1.0 || ratio >= 1.0 {
            continue;
        }
        let tail = term * ratio / (1.0 - ratio);
        let tail1 = t1 * ratio1 / (1.0 - ratio1);
        let tail2 = t2 * ratio2 / (1.0 - ratio2);
        if tail <= SERIES_REL_TAIL * value.value()
            && (!derivatives
                || (tail1 <= SERIES_REL_TAIL * d1.value() && tail2 <= SERIES_REL_TAIL * d2.value()))
        {
            return Ok(SeriesEval {
                value: value.value(),
                d1: d1.value(),
                d2: d2.value(),
                tail_bound: tail,
                terms_used: n as usize + 1,
            });
        }
    }
    Err(Error::NonConvergence(format!(
        "normalization series at x = {x} needs more than {SERIES_MAX_TERMS} terms"
    )))
}

/// `𝒩(x)` with its first two derivatives.
pub fn normalization(p: &DeformParams, x: f64) -> Result<SeriesEval> {
    domain_radius(p).check(x, "x")?;
    if x == 0.0 {
        let s = p.scale();
        let q = p.q();
        let c1 = q / s;
        let c2 = q * q * q / (s * s * (1.0 + q));
        return Ok(SeriesEval {
            value: 1.0,
            d1: c1,
            d2: 2.0 * c2,
            tail_bound: 0.0,
            terms_used: 1,
        });
    }
    sum_series(p, x, true, false)
}

/// `𝒩(x)` without the domain margin, saturating to `+∞` instead of failing.
/// Used by integrands that only need `1/𝒩`.
fn normalization_value_saturating(p: &DeformParams, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    match sum_series(p, x, false, true) {
        Ok(eval) => eval.value,
        Err(_) => f64::NAN,
    }
}

/// `𝒩` at a complex argument `w`, `|w| < R`, with a bound on the truncation error.
pub fn normalization_complex(p: &DeformParams, w: Complex64) -> Result<(Complex64, f64)> {
    let r = w.norm();
    domain_radius(p).check(r, "|w|")?;
    let mut sum = ComplexCompensatedSum::new();
    let mut abs_sum = CompensatedSum::new();
    let mut term = Complex64::new(1.0, 0.0);
    sum.add(term);
    abs_sum.add(1.0);
    if r == 0.0 {
        return Ok((sum.value(), 0.0));
    }
    for n in 1..SERIES_MAX_TERMS as u64 {
        term *= w * p.coefficient_ratio(n);
        let modulus = term.norm();
        if !modulus.is_finite() {
            return Err(Error::Overflow(format!(
                "complex normalization series overflows at |w| = {r}"
            )));
        }
        sum.add(term);
        abs_sum.add(modulus);
        let ratio = r * p.coefficient_ratio(n + 1);
        if modulus == 0.0 {
            return Ok((sum.value(), 0.0));
        }
        if ratio < 1.0 {
            let tail = modulus * ratio / (1.0 - ratio);
            if tail <= SERIES_REL_TAIL * abs_sum.value() {
                return Ok((sum.value(), tail));
            }
        }
    }
    Err(Error::NonConvergence(format!(
        "complex normalization series at |w| = {r}"
    )))
}

/// A truncated coherent state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherentState {
    #[serde(serialize_with = "serialize_complex")]
    pub z: Complex64,
    pub params: DeformParams,
    pub dim: usize,
    #[serde(serialize_with = "serialize_complex_vec")]
    pub amplitudes: Vec<Complex64>,
    /// `𝒩(|z|²)`.
    pub norm_value: f64,
    /// `Σ_{n >= D} |c_n|²`, the probability left outside the truncation.
    pub tail_residual: f64,
    /// Upper bound on `1 - Σ_{n<D} |c_n|²`.
    pub tail_bound: f64,
}

fn serialize_complex<S: serde::Serializer>(
    z: &Complex64,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

fn serialize_complex_vec<S: serde::Serializer>(
    v: &[Complex64],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    v.iter()
        .map(|z| [z.re, z.im])
        .collect::<Vec<_>>()
        .serialize(s)
}

impl CoherentState {
    /// `Σ_{n<D} |c_n|²`.
    pub fn retained_probability(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|c| c.norm_sqr())
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn truncation_warning(&self) -> bool {
        self.tail_residual > TRUNCATION_WARNING
    }
}

pub fn amplitudes(p: &DeformParams, z: Complex64, t: FockTruncation) -> Result<CoherentState> {
    let x = z.norm_sqr();
    let norm = normalization(p, x)?;
    let dim = t.dim();
    let mut amps = Vec::with_capacity(dim);
    let mut c = Complex64::new(norm.value.sqrt().recip(), 0.0);
    amps.push(c);
    for n in 1..dim as u64 {
        c *= z * p.coefficient_ratio(n).sqrt();
        amps.push(c);
    }
    // Remaining probability Σ_{n >= D} |c_n|², summed until its own geometric bound settles.
    let mut residual = CompensatedSum::new();
    let mut prob = amps[dim - 1].norm_sqr();
    let mut residual_tail = 0.0;
    if x > 0.0 {
        for n in dim as u64..SERIES_MAX_TERMS as u64 {
            prob *= x * p.coefficient_ratio(n);
            residual.add(prob);
            let ratio = x * p.coefficient_ratio(n + 1);
            if prob == 0.0 {
                break;
            }
            if ratio < 1.0 {
                residual_tail = prob * ratio / (1.0 - ratio);
                if residual_tail <= SERIES_REL_TAIL * residual.value().max(f64::MIN_POSITIVE) {
                    break;
                }
            }
        }
    }
    let tail_residual = residual.value();
    let rounding = 4.0 * (dim + norm.terms_used) as f64 * f64::EPSILON;
    let tail_bound = tail_residual + residual_tail + norm.tail_bound / norm.value + rounding;
    Ok(CoherentState {
        z,
        params: *p,
        dim,
        amplitudes: amps,
        norm_value: norm.value,
        tail_residual,
        tail_bound,
    })
}

/// `⟨z₁|z₂⟩ = 𝒩(z̄₁ z₂) / √(𝒩(|z₁|²) 𝒩(|z₂|²))`.
pub fn overlap(p: &DeformParams, z1: Complex64, z2: Complex64) -> Result<Complex64> {
    let n1 = normalization(p, z1.norm_sqr())?;
    let n2 = normalization(p, z2.norm_sqr())?;
    let (cross, _) = normalization_complex(p, z1.conj() * z2)?;
    Ok(cross / (n1.value * n2.value).sqrt())
}

/// `‖(a - z)|z⟩_D‖` over the rows `0 … D-2` of the truncated space.
///
/// Row `D-1` is left out: the truncated `a` cannot bring `|D⟩` down, so that
/// component is `-z c_{D-1}` by construction.
pub fn eigen_residual(p: &DeformParams, z: Complex64, t: FockTruncation) -> Result<f64> {
    let state = amplitudes(p, z, t)?;
    let x = jacobi_entries(p, t.dim());
    let c = &state.amplitudes;
    let sq = (0..t.dim() - 1)
        .map(|k| (c[k + 1] * x[k] - z * c[k]).norm_sqr())
        .collect::<CompensatedSum>()
        .value();
    Ok(sq.sqrt())
}

/// Radial density of the resolving measure at `x = |z|² > 0`.
///
/// For `q < 1` this is the density of `dμ` against `d²z/π`,
/// `(1-q)/(s ln q^{-1}) · 𝒩(x)/𝒩(x/q)`. For `q > 1` it is the density against
/// `d_q x dθ`, `1/(2π (1 - (q-1)x/s))`.
pub fn unity_weight(p: &DeformParams, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::Domain(format!("unity weight needs x > 0, got {x}")));
    }
    let disk = domain_radius(p);
    disk.check(x, "x")?;
    let s = p.scale();
    let q = p.q();
    match p.regime() {
        Regime::QBelowOne => {
            let ratio = normalization(p, x)?.value / normalization(p, x / q)?.value;
            Ok((1.0 - q) / (s * -p.ln_q()) * ratio)
        }
        Regime::QAboveOne => Ok(1.0 / (2.0 * std::f64::consts::PI * (1.0 - x / disk.radius))),
    }
}

/// Which moment problem the resolving measure solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentRegime {
    /// `0 < q < 1`: moments on `[0, ∞)`.
    StieltjesQlt1,
    /// `q > 1`: moments on `[0, R]` against the q-lattice.
    HausdorffQgt1,
}

/// Settings for [`verify_moments`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentConfig {
    pub quadrature: QuadratureConfig,
    /// The discarded parts of `[0, ∞)` are certified below this fraction of the target.
    pub remainder_rel: f64,
    pub lattice: QIntegralOptions,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self {
            quadrature: QuadratureConfig {
                rel_tol: 1e-12,
                abs_tol: 0.0,
                max_subdivisions: 4000,
            },
            remainder_rel: 1e-10,
            lattice: QIntegralOptions::default(),
        }
    }
}

/// Measured radial moments of the resolving measure against their targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub orders: Vec<u32>,
    pub computed: Vec<f64>,
    pub target: Vec<f64>,
    pub rel_error: Vec<f64>,
    /// Quadrature (or lattice) error estimate plus certified remainders.
    pub error_bound: Vec<f64>,
    pub regime: MomentRegime,
}

impl MomentReport {
    pub fn max_rel_error(&self) -> f64 {
        self.rel_error.iter().copied().fold(0.0, f64::max)
    }
}

/// `sⁿ q^{-n(n+1)/2} [n]_q!`.
pub fn moment_target(p: &DeformParams, n: u32) -> Result<f64> {
    let nf = n as f64;
    let log_part = nf * p.scale().ln() - 0.5 * nf * (nf + 1.0) * p.ln_q();
    Ok(log_part.exp() * q_factorial(n, p.q())?)
}

/// `∫_0^∞ x^power · inverse(x) dx` where `inverse = 1/S` for a positive power
/// series `S(x) >= exp(log_coeff(m)) x^m` (every `m`). The integral runs in
/// `u = ln x`; both discarded ends are bounded analytically below `budget`.
fn radial_moment<F, C>(
    power: u32,
    inverse: F,
    log_coeff: C,
    budget: f64,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64 + Sync,
    C: Fn(u32) -> f64,
{
    let k1 = power as f64 + 1.0;
    // Lower end: S >= 1, so ∫_0^{X} x^power/S dx <= X^{k+1}/(k+1).
    let u_lo = ((0.5 * budget * k1).ln()) / k1;
    let lower_rem = (k1 * u_lo).exp() / k1;
    // Upper end: 1/S <= exp(-log_coeff(m)) x^{-m}, integrable for m >= power + 2.
    let upper_bound = |u: f64| -> f64 {
        (power + 2..power + 400)
            .map(|m| {
                let mf = m as f64;
                (-log_coeff(m) + (k1 - mf) * u - (mf - k1).ln()).exp()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut u_hi = u_lo.max(0.0) + 1.0;
    while upper_bound(u_hi) > 0.5 * budget {
        u_hi += 0.5;
        if u_hi > 700.0 {
            return Err(Error::NonConvergence(format!(
                "no cutoff certifies the upper remainder below {budget:e}"
            )));
        }
    }
    let upper_rem = upper_bound(u_hi);
    let res = integrate(|u| (k1 * u).exp() * inverse(u.exp()), u_lo, u_hi, cfg)?;
    Ok((res.value, res.error_estimate + lower_rem + upper_rem))
}

fn log_normalization_coeff(p: &DeformParams, m: u32) -> f64 {
    (1..=m as u64).map(|k| p.coefficient_ratio(k).ln()).sum()
}

/// Radial moments `∫ xⁿ · 2π dω(x) / 𝒩(x)` for `n = 0 … n_max`.
///
/// For `q > 1` the measure lives on the q-lattice and the moment is the deformed
/// integral of `xⁿ/𝒩(x/q)` over `(0, R)`. For `q < 1` it is
/// `(1-q)/(s ln q^{-1}) ∫_0^∞ xⁿ/𝒩(x/q) dx`, integrated adaptively with certified
/// end remainders. The angular integral is done analytically.
pub fn verify_moments(p: &DeformParams, n_max: u32, cfg: &MomentConfig) -> Result<MomentReport> {
    let q = p.q();
    let orders: Vec<u32> = (0..=n_max).collect();
    let targets = orders
        .iter()
        .map(|&n| moment_target(p, n))
        .collect::<Result<Vec<_>>>()?;
    let regime = match p.regime() {
        Regime::QAboveOne => MomentRegime::HausdorffQgt1,
        Regime::QBelowOne => MomentRegime::StieltjesQlt1,
    };
    let results: Vec<(f64, f64)> = orders
        .par_iter()
        .zip(targets.par_iter())
        .map(|(&n, &target)| -> Result<(f64, f64)> {
            match regime {
                MomentRegime::HausdorffQgt1 => {
                    let disk = domain_radius(p);
                    disk.check(disk.radius / q, "x/q at the upper limit")?;
                    let sum = q_integral_enveloped(
                        |x| x.powi(n as i32) / normalization_value_saturating(p, x / q),
                        |y| y.powi(n as i32),
                        p,
                        disk.radius,
                        &cfg.lattice,
                    )?;
                    Ok((sum.value, sum.tail_bound))
                }
                MomentRegime::StieltjesQlt1 => {
                    let c = (1.0 - q) / (p.scale() * -p.ln_q());
                    let budget = cfg.remainder_rel * target / c;
                    let log_q = p.ln_q();
                    let (integral, err) = radial_moment(
                        n,
                        |x| 1.0 / normalization_value_saturating(p, x / q),
                        |m| log_normalization_coeff(p, m) - m as f64 * log_q,
                        budget,
                        &cfg.quadrature,
                    )?;
                    Ok((c * integral, c * err))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (computed, error_bound): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    let rel_error = computed
        .iter()
        .zip(&targets)
        .map(|(c, t)| (c - t).abs() / t)
        .collect();
    Ok(MomentReport {
        orders,
        computed,
        target: targets,
        rel_error,
        error_bound,
        regime,
    })
}

/// Numerical value and closed form of `g_q(n) = ∫_0^∞ y^{n-1} dy / E_q((1-q) y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StieltjesWeightCheck {
    pub n: u32,
    pub computed: f64,
    pub closed_form: f64,
    pub rel_error: f64,
}

/// Checks `g_q(n) = ln(q^{-1})/(1-q) · q^{-n(n-1)/2} [n-1]_q!` for `0 < q < 1`, `n >= 1`.
///
/// `E_q` is normalized as `Σ_k q^{k(k-1)/2} t^k/(q; q)_k`, which makes the
/// `n = 0` moment of the resolving measure equal to one.
pub fn stieltjes_weight_check(q: f64, n: u32, cfg: &MomentConfig) -> Result<StieltjesWeightCheck> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "the Stieltjes weight needs 0 < q < 1, got {q}"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("g_q(n) is defined for n >= 1".to_string()));
    }
    let ln_q = q.ln();
    let nf = n as f64;
    let closed_form =
        -ln_q / (1.0 - q) * (-0.5 * nf * (nf - 1.0) * ln_q).exp() * q_factorial(n - 1, q)?;
    // Coefficient of y^m in E_q((1-q) y) is q^{m(m-1)/2}/[m]_q!.
    let log_coeff = |m: u32| -> f64 {
        let mf = m as f64;
        0.5 * mf * (mf - 1.0) * ln_q
            - (1..=m)
                .map(|k| crate::qcore::q_number(k, q).unwrap().ln())
                .sum::<f64>()
    };
    let (computed, _) = radial_moment(
        n - 1,
        |y| match q_exponential((1.0 - q) * y, q) {
            Ok(v) => 1.0 / v,
            Err(Error::Overflow(_)) => 0.0,
            Err(_) => f64::NAN,
        },
        log_coeff,
        cfg.remainder_rel * closed_form,
        &cfg.quadrature,
    )?;
    Ok(StieltjesWeightCheck {
        n,
        computed,
        closed_form,
        rel_error: (computed - closed_form).abs() / closed_form,
    })
}
