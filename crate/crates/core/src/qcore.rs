//! q-arithmetic primitives, the structure function and the `(q; l, λ)`-calculus.
//!
//! All q-numbers are evaluated through `expm1`/`ln_1p` so that the q → 1
//! cross-check mode keeps full relative precision.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::summation::CompensatedSum;

/// Half-width of the excluded band around `q = 1`.
pub const Q_EXCLUSION: f64 = 1e-12;

/// Offset `q - 1` used by the q → 1 cross-check mode.
pub const LIMIT_Q1_OFFSET: f64 = 1e-8;

/// Infinite q-Pochhammer products stop once `|a·base^k|` drops below this.
pub const POCHHAMMER_CUTOFF: f64 = 1e-17;

const POCHHAMMER_MAX_FACTORS: usize = 100_000_000;

/// Which side of `q = 1` the deformation lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `0 < q < 1`: unbounded ladder operators, entire normalization series.
    QBelowOne,
    /// `q > 1`: bounded ladder operators, finite convergence disk.
    QAboveOne,
}

/// The deformation triple `(q, l, λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeformParams {
    q: f64,
    l: f64,
    lambda: f64,
}

fn check_q(q: f64) -> Result<()> {
    if !q.is_finite() || q <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "q must be a positive finite real, got {q}"
        )));
    }
    if (q - 1.0).abs() <= Q_EXCLUSION {
        return Err(Error::InvalidParams(format!(
            "q = {q} lies in the excluded band |q - 1| <= {Q_EXCLUSION:e}; use the q -> 1 limit mode instead"
        )));
    }
    Ok(())
}

impl DeformParams {
    pub fn new(q: f64, l: f64, lambda: f64) -> Result<Self> {
        check_q(q)?;
        if !l.is_finite() || l == 0.0 {
            return Err(Error::InvalidParams(format!(
                "l must be a nonzero finite real, got {l}"
            )));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidParams(format!(
                "lambda must be finite, got {lambda}"
            )));
        }
        let params = Self { q, l, lambda };
        let s = params.scale();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParams(format!(
                "scale l^2 q^lambda = {s} is not a positive finite number"
            )));
        }
        Ok(params)
    }

    /// The single-parameter case `l = 1`, `λ = 0`.
    pub fn unit_scale(q: f64) -> Result<Self> {
        Self::new(q, 1.0, 0.0)
    }

    /// Cross-check mode: `q = 1 + offset` with a tiny offset.
    pub fn near_unit(l: f64, lambda: f64, offset: f64) -> Result<Self> {
        Self::new(1.0 + offset, l, lambda)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `s = l² q^λ`, the scale every formula is measured in.
    pub fn scale(&self) -> f64 {
        self.l * self.l * (self.lambda * self.ln_q()).exp()
    }

    /// `ln q`, accurate near `q = 1`.
    pub fn ln_q(&self) -> f64 {
        (self.q - 1.0).ln_1p()
    }

    pub fn regime(&self) -> Regime {
        if self.q < 1.0 {
            Regime::QBelowOne
        } else {
            Regime::QAboveOne
        }
    }

    /// `q^{-n}`.
    pub(crate) fn q_pow_neg(&self, n: f64) -> f64 {
        (-n * self.ln_q()).exp()
    }

    /// Ratio of consecutive normalization coefficients,
    /// `q^n / (s [n]_q) = (1 - q) / (s (q^{-n} - 1))`, for `n >= 1`.
    pub(crate) fn coefficient_ratio(&self, n: u64) -> f64 {
        let ln_q = self.ln_q();
        -ln_q.exp_m1() / (self.scale() * (-(n as f64) * ln_q).exp_m1())
    }
}

/// A power-series value with its first two derivatives and a truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesEval {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    /// Rigorous bound on the truncation error of `value`.
    pub tail_bound: f64,
    pub terms_used: usize,
}

/// `[n]_q = (1 - qⁿ)/(1 - q)`.
pub fn q_number(n: u32, q: f64) -> Result<f64> {
    check_q(q)?;
    let ln_q = (q - 1.0).ln_1p();
    let value = (n as f64 * ln_q).exp_m1() / ln_q.exp_m1();
    if !value.is_finite() {
        return Err(Error::Overflow(format!("[{n}]_q overflows for q = {q}")));
    }
    Ok(value)
}

/// `[n]_q! = [1]_q [2]_q ⋯ [n]_q`, with `[0]_q! = 1`.
pub fn q_factorial(n: u32, q: f64) -> Result<f64> {
    check_q(q)?;
    let mut acc = 1.0;
    for k in 1..=n {
        acc *= q_number(k, q)?;
        if !acc.is_finite() {
            return Err(Error::Overflow(format!(
                "[{n}]_q! exceeds the floating range for q = {q}"
            )));
        }
    }
    Ok(acc)
}

/// Order of a q-Pochhammer product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PochhammerOrder {
    Finite(u32),
    Infinite,
}

/// A product value with a relative (multiplicative) truncation bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductEval {
    pub value: f64,
    /// Bound on `|∏_{k ≥ K}(1 - a·base^k) - 1|` for the discarded factors.
    pub tail_bound: f64,
    pub factors_used: usize,
}

/// `(a; base)_n = ∏_{k=0}^{n-1} (1 - a·base^k)`, including `n = ∞` for `|base| < 1`.
pub fn q_pochhammer(a: f64, base: f64, order: PochhammerOrder) -> Result<ProductEval> {
    if !a.is_finite() || !base.is_finite() {
        return Err(Error::Domain(format!(
            "q-Pochhammer arguments must be finite (a = {a}, base = {base})"
        )));
    }
    match order {
        PochhammerOrder::Finite(n) => {
            let mut value = 1.0;
            let mut power = 1.0;
            for _ in 0..n {
                value *= 1.0 - a * power;
                power *= base;
            }
            Ok(ProductEval {
                value,
                tail_bound: 0.0,
                factors_used: n as usize,
            })
        }
        PochhammerOrder::Infinite => {
            if base.abs() >= 1.0 {
                return Err(Error::Domain(format!(
                    "infinite q-Pochhammer product needs |base| < 1, got {base}"
                )));
            }
            let mut value = 1.0;
            let mut term = a;
            let mut used = 0usize;
            while term.abs() >= POCHHAMMER_CUTOFF {
                if used >= POCHHAMMER_MAX_FACTORS {
                    return Err(Error::NonConvergence(format!(
                        "(a; base)_inf with a = {a}, base = {base} needs more than {POCHHAMMER_MAX_FACTORS} factors"
                    )));
                }
                value *= 1.0 - term;
                term *= base;
                used += 1;
            }
            let tail_bound = (term.abs() / (1.0 - base.abs())).exp_m1();
            Ok(ProductEval {
                value,
                tail_bound,
                factors_used: used,
            })
        }
    }
}

/// `φ(n) = l² q^{λ-n} [n]_q = l² q^λ (1 - q^{-n})/(q - 1)`.
pub fn structure_function(p: &DeformParams, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let ln_q = p.ln_q();
    p.scale() * -(-(n as f64) * ln_q).exp_m1() / ln_q.exp_m1()
}

/// Split representation `φ(n) = anchor - offset(n)` with `anchor = s/(q-1)` and
/// `offset(n) = anchor·q^{-n}`.
///
/// Differences of φ taken through the offsets avoid the cancellation against the
/// anchor, which for `q > 1` destroys every digit of `φ(n+1) - φ(n)` once
/// `q^{-n}` falls below machine epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureSplit {
    pub anchor: f64,
    pub offset: f64,
}

impl StructureSplit {
    pub fn value(&self) -> f64 {
        self.anchor - self.offset
    }
}

pub fn structure_split(p: &DeformParams, n: u64) -> StructureSplit {
    let anchor = p.scale() / p.ln_q().exp_m1();
    StructureSplit {
        anchor,
        offset: anchor * p.q_pow_neg(n as f64),
    }
}

/// `φ(n+1) - φ(n)`, from whichever representation loses fewer digits.
///
/// The split form amplifies rounding by `1/|1 - q^{-1}|`, which is harmless
/// away from `q = 1` but costs eight digits at `q = 1 + 1e-8`. There the direct
/// difference of `φ` values is the better conditioned one.
pub fn structure_increment(p: &DeformParams, n: u64) -> f64 {
    let ln_q = p.ln_q();
    let split_cond = 1.0 / (-ln_q).exp_m1().abs();
    let direct_cond = (-((n + 1) as f64) * ln_q).exp_m1().abs()
        / (p.q_pow_neg(n as f64) * (-ln_q).exp_m1().abs());
    if direct_cond < split_cond {
        structure_function(p, n + 1) - structure_function(p, n)
    } else {
        structure_split(p, n).offset - structure_split(p, n + 1).offset
    }
}

/// The q-exponential `E_q(t) = Σ_k q^{k(k-1)/2} t^k / (q; q)_k` for `0 < q < 1`, `t >= 0`.
pub fn q_exponential(t: f64, q: f64) -> Result<f64> {
    check_q(q)?;
    if q > 1.0 {
        return Err(Error::Domain(format!(
            "E_q is evaluated here only for 0 < q < 1, got q = {q}"
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!(
            "E_q argument must be a nonnegative real, got {t}"
        )));
    }
    let mut sum = CompensatedSum::new();
    let mut term = 1.0;
    let mut q_pow = 1.0; // q^{k-1}
    sum.add(term);
    for _ in 0..100_000 {
        term *= q_pow * t / (1.0 - q_pow * q);
        if !term.is_finite() {
            return Err(Error::Overflow(format!(
                "E_q({t}) exceeds the floating range for q = {q}"
            )));
        }
        sum.add(term);
        q_pow *= q;
        let next_ratio = q_pow * t / (1.0 - q_pow * q);
        if term == 0.0
            || (next_ratio < 1.0 && term * next_ratio / (1.0 - next_ratio) <= 1e-17 * sum.value())
        {
            return Ok(sum.value());
        }
    }
    Err(Error::NonConvergence(format!(
        "E_q({t}) series for q = {q}"
    )))
}

/// The deformed derivative `s·(f(x) - f(x/q)) / ((q - 1) x)`.
pub fn q_derivative<F: Fn(f64) -> f64>(f: F, p: &DeformParams, x: f64) -> Result<f64> {
    if x == 0.0 || !x.is_finite() {
        return Err(Error::Domain(format!(
            "the deformed derivative is undefined at x = {x}; use the series coefficient at the origin"
        )));
    }
    let q = p.q();
    Ok(p.scale() * (f(x) - f(x / q)) / ((q - 1.0) * x))
}

/// Stopping rule and term cap for [`q_integral`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QIntegralOptions {
    /// Relative threshold applied to both the last increment and the tail bound.
    pub rel_tol: f64,
    /// Absolute floor added to the relative threshold.
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for QIntegralOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_terms: 1_000_000,
        }
    }
}

/// Result of a lattice sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSum {
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
}

/// The deformed integral `∫_0^a f d_q x = (q-1)/s · a · Σ_{k≥0} q^{-k} f(a q^{-k})`.
///
/// The tail bound uses the largest `|f|` seen on the last two lattice points as
/// the supremum of `|f|` on the remaining lattice; it is rigorous for integrands
/// whose modulus does not grow towards the origin. Use
/// [`q_integral_enveloped`] to supply a proper envelope otherwise.
pub fn q_integral<F: Fn(f64) -> f64>(
    f: F,
    p: &DeformParams,
    a: f64,
    opts: &QIntegralOptions,
) -> Result<LatticeSum> {
    lattice_sum(&f, None::<&fn(f64) -> f64>, p, a, opts)
}

/// As [`q_integral`], with `envelope(y) >= sup_{0 < t <= y} |f(t)|` driving the tail bound.
pub fn q_integral_enveloped<F, G>(
    f: F,
    envelope: G,
    p: &DeformParams,
    a: f64,
    opts: &QIntegralOptions,
) -> Result<LatticeSum>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    lattice_sum(&f, Some(&envelope), p, a, opts)
}

fn lattice_sum<F, G>(
    f: &F,
    envelope: Option<&G>,
    p: &DeformParams,
    a: f64,
    opts: &QIntegralOptions,
) -> Result<LatticeSum>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if p.regime() != Regime::QAboveOne {
        return Err(Error::Domain(format!(
            "the deformed integral needs q > 1 so the lattice a q^(-k) accumulates at 0, got q = {}",
            p.q()
        )));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Domain(format!(
            "upper limit must be positive and finite, got {a}"
        )));
    }
    let q = p.q();
    let inv_q = 1.0 / q;
    let mut sum = CompensatedSum::new();
    let mut previous_abs = 0.0f64;
    for k in 0..opts.max_terms {
        let weight = p.q_pow_neg(k as f64);
        let x = a * weight;
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::Domain(format!(
                "integrand is not finite at lattice point x = {x}"
            )));
        }
        let term = weight * fx;
        sum.add(term);
        let partial = sum.value().abs();
        let sup = match envelope {
            Some(env) => env(x * inv_q),
            None => fx.abs().max(previous_abs),
        };
        previous_abs = fx.abs();
        let tail = sup * weight * inv_q / (1.0 - inv_q);
        let threshold = opts.rel_tol * partial + opts.abs_tol;
        if term.abs() <= threshold && tail <= threshold {
            let prefactor = (q - 1.0) / p.scale() * a;
            return Ok(LatticeSum {
                value: prefactor * sum.value(),
                tail_bound: prefactor * tail,
                terms_used: k + 1,
            });
        }
    }
    Err(Error::NonConvergence(format!(
        "lattice sum did not settle within {} terms",
        opts.max_terms
    )))
}
