//! The identity suite behind `qdeform verify`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::output::{Cell, Table};
use super::RunConfig;
use crate::algebra::{boundedness_diagnostic, commutator_defect, reciprocal_ratio, spectrum};
use crate::coherent::{
    amplitudes, domain_radius, eigen_residual, normalization, overlap, stieltjes_weight_check,
    verify_moments, MomentConfig,
};
use crate::error::{Error, Result};
use crate::geometry::{metric_smallx_check, metric_w};
use crate::qcore::{
    q_derivative, q_number, q_pochhammer, structure_function, structure_increment, DeformParams,
    PochhammerOrder, Regime,
};
use crate::statistics::{mandel_small_x_slope, monomial_expectation, photon_pdf, stats_point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Passed,
    Failed,
    /// Not applicable to the current regime or parameters.
    Skipped,
}

impl CheckStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckStatus::Passed => "pass",
            CheckStatus::Failed => "fail",
            CheckStatus::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOutcome {
    pub check_name: String,
    pub max_rel_error: f64,
    pub threshold: f64,
    pub status: CheckStatus,
    pub detail: String,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Passed
    }
}

const CHECKS: &[(&str, f64)] = &[
    ("structure_recurrence", 1e-12),
    ("commutator_defect", 1e-12),
    ("boundedness", 1e-6),
    ("vacuum_uncertainty", 1e-12),
    ("functional_equation", 1e-11),
    ("product_form", 1e-10),
    ("q_derivative_fixed_point", 1e-9),
    ("moments_lattice", 1e-8),
    ("moments_stieltjes", 1e-5),
    ("stieltjes_weight", 1e-8),
    ("eigen_residual", 1e-10),
    ("overlap_bounds", 1e-12),
    ("pdf_normalization", 1e-12),
    ("monomial_consistency", 1e-10),
    ("mandel_small_x", 1e-3),
    ("metric_origin", 1e-10),
    ("metric_derivative", 1e-6),
    ("metric_small_x", 1e-2),
    ("unit_scale_reduction", 1e-13),
    ("harmonic_limit", 1e-4),
];

/// Default threshold for every named check.
pub fn default_tolerances() -> BTreeMap<String, f64> {
    CHECKS.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

enum Measured {
    Error(f64, String),
    Skip(String),
}

fn measured(err: f64, detail: impl Into<String>) -> Result<Measured> {
    Ok(Measured::Error(err, detail.into()))
}

fn skip(why: &str) -> Result<Measured> {
    Ok(Measured::Skip(why.to_string()))
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Disks wider than this are sampled like the whole plane: `𝒩` grows roughly
/// like `eˣ` there and would overflow long before the rim.
const WIDE_DISK: f64 = 1e3;

/// Upper end for grids: `0.999 R` on a moderate disk, otherwise `cap`, pulled
/// back until `𝒩` is representable there.
fn domain_span(p: &DeformParams, cap: f64) -> f64 {
    let disk = domain_radius(p);
    let mut top = if disk.is_bounded() && disk.radius <= WIDE_DISK {
        0.999 * disk.radius
    } else {
        cap
    };
    for _ in 0..200 {
        match normalization(p, top) {
            Err(Error::Overflow(_)) => top *= 0.8,
            _ => break,
        }
    }
    top
}

/// `q - 1` below this makes the infinite product and the lattice sums need
/// more than a hundred million factors or terms.
const NEAR_UNIT_GAP: f64 = 1e-6;

/// The lattice `R q^{-k}` needs about `40/ln q` points before the moment
/// integrand dies out, each one a full series evaluation.
const LATTICE_MIN_GAP: f64 = 5e-4;

fn near_unit(p: &DeformParams) -> bool {
    (p.q() - 1.0).abs() < NEAR_UNIT_GAP
}

/// `x` small against both the disk and the scale `s` of the first coefficient.
fn small_x(p: &DeformParams) -> f64 {
    1e-4 * domain_radius(p).radius.min(p.scale()).min(1.0)
}

fn check_structure_recurrence(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    let err = (0..=60u64)
        .map(|n| {
            rel(
                structure_increment(p, n),
                p.scale() * p.q_pow_neg(n as f64 + 1.0),
            )
        })
        .fold(0.0, f64::max);
    measured(err, "n = 0..60")
}

fn check_commutator(cfg: &RunConfig) -> Result<Measured> {
    let worst = commutator_defect(&cfg.params, cfg.dim)
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max);
    measured(worst / cfg.params.scale(), format!("D = {}", cfg.dim.dim()))
}

fn check_boundedness(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    let report = boundedness_diagnostic(p, 200)?;
    match p.regime() {
        Regime::QAboveOne => {
            let expected = (p.scale() / (p.q() - 1.0)).sqrt();
            let sup = report.sup_bound.unwrap_or(f64::NAN);
            let err = if report.bounded {
                rel(sup, expected)
            } else {
                f64::INFINITY
            };
            measured(err, "x_n below sup for n <= 200")
        }
        Regime::QBelowOne => {
            // The ratio approaches √q like q^n, so probe late enough for q near 1.
            let n = 200u64.max((20.0 / -p.ln_q()).ceil() as u64);
            let root = p.q().sqrt();
            measured(
                rel(reciprocal_ratio(p, n), root),
                format!("ratio test at n = {n}"),
            )
        }
    }
}

fn check_vacuum_uncertainty(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    let row = spectrum(p, 0, 1.0)?[0];
    measured(
        rel(row.uncertainty_in_hbar(), 0.5 * p.scale() / p.q()),
        "n = 0, hbar units",
    )
}

fn check_functional_equation(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    if p.regime() == Regime::QBelowOne {
        return skip("q < 1");
    }
    let r = domain_radius(p).radius;
    let top = domain_span(p, 200.0);
    let mut worst: f64 = 0.0;
    for x in log_grid(1e-6f64.min(1e-3 * top), top, 50) {
        let lhs = normalization(p, x)?.value * (1.0 - x / r);
        let rhs = normalization(p, x / p.q())?.value;
        worst = worst.max(rel(lhs, rhs));
    }
    measured(worst, format!("50 log-spaced x in (1e-6, {top:e})"))
}

fn check_product_form(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    if p.regime() == Regime::QBelowOne {
        return skip("q < 1");
    }
    if near_unit(p) {
        return skip("q too close to 1 for the infinite product");
    }
    let r = domain_radius(p).radius;
    let mut worst: f64 = 0.0;
    let mut bound: f64 = 0.0;
    let top = domain_span(p, 200.0);
    for x in log_grid(1e-6f64.min(1e-3 * top), top, 50) {
        let series = normalization(p, x)?;
        let prod = q_pochhammer(x / r, 1.0 / p.q(), PochhammerOrder::Infinite)?;
        worst = worst.max(rel(series.value, 1.0 / prod.value));
        bound = bound.max(series.tail_bound / series.value + prod.tail_bound / prod.value);
    }
    measured(worst, format!("combined tail bound {bound:e}"))
}

fn check_fixed_point(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    let f = |x: f64| normalization(p, x).map(|n| n.value).unwrap_or(f64::NAN);
    // The difference quotient amplifies rounding by 𝒩(x)/(𝒩(x) - 𝒩(x/q)); points
    // where that alone would approach the threshold say nothing about the identity.
    let limit = 1e-3
        * cfg
            .tolerances
            .get("q_derivative_fixed_point")
            .copied()
            .unwrap_or(1e-9);
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for x in log_grid(
        1e-3f64.min(1e-3 * domain_span(p, 5.0)),
        domain_span(p, 5.0),
        25,
    ) {
        let (hi, lo) = (f(x), f(x / p.q()));
        if hi.max(lo) / (hi - lo).abs() * f64::EPSILON > limit {
            continue;
        }
        used += 1;
        let d = q_derivative(f, p, x)?;
        worst = worst.max(rel(d, hi));
    }
    if used == 0 {
        return skip("difference quotient too ill-conditioned on the whole grid");
    }
    measured(worst, format!("{used} of 25 log-spaced x"))
}

fn check_moments(cfg: &RunConfig, want: Regime) -> Result<Measured> {
    let p = &cfg.params;
    if p.regime() != want {
        return skip(if want == Regime::QAboveOne {
            "q < 1"
        } else {
            "q > 1"
        });
    }
    if want == Regime::QAboveOne && p.q() - 1.0 < LATTICE_MIN_GAP {
        return skip("q too close to 1 for the lattice sum");
    }
    let n_max = if want == Regime::QAboveOne { 10 } else { 8 };
    let report = verify_moments(p, n_max, &MomentConfig::default())?;
    measured(report.max_rel_error(), format!("n = 0..{n_max}"))
}

fn check_stieltjes_weight(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    if p.regime() == Regime::QAboveOne {
        return skip("q > 1");
    }
    let mut worst: f64 = 0.0;
    for n in 1..=5 {
        worst = worst.max(stieltjes_weight_check(p.q(), n, &MomentConfig::default())?.rel_error);
    }
    measured(worst, "n = 1..5")
}

/// The configured label, or a default inside the disk when it is the vacuum.
fn probe_label(cfg: &RunConfig) -> Complex64 {
    if cfg.z.norm_sqr() > 0.0 {
        cfg.z
    } else {
        Complex64::new(0.4 * domain_radius(&cfg.params).radius.min(1.0).sqrt(), 0.0)
    }
}

fn check_eigen_residual(cfg: &RunConfig) -> Result<Measured> {
    let z = probe_label(cfg);
    let state = amplitudes(&cfg.params, z, cfg.dim)?;
    let res = eigen_residual(&cfg.params, z, cfg.dim)?;
    let err = if state.truncation_warning() {
        res.max(state.tail_residual)
    } else {
        res
    };
    measured(
        err,
        format!("z = {} + {}i, D = {}", z.re, z.im, cfg.dim.dim()),
    )
}

fn check_overlap(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    let span = 0.9 * domain_span(p, 4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut label = || {
        let r = (span * rng.gen::<f64>()).sqrt();
        let theta = std::f64::consts::TAU * rng.gen::<f64>();
        Complex64::from_polar(r, theta)
    };
    let mut worst: f64 = 0.0;
    for _ in 0..16 {
        let (z1, z2) = (label(), label());
        worst = worst.max((overlap(p, z1, z1)? - 1.0).norm());
        worst = worst.max(overlap(p, z1, z2)?.norm() - 1.0);
    }
    measured(worst, format!("16 random pairs, seed {}", cfg.seed))
}

fn check_pdf_normalization(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    let span = domain_span(p, 2.0);
    let mut worst: f64 = 0.0;
    for x in [0.1 * span, 0.5 * span] {
        let mut total = 0.0;
        let mut prev = f64::INFINITY;
        for n in 0..100_000u64 {
            let pn = photon_pdf(p, x, n)?;
            total += pn;
            if pn < 1e-18 * total && pn <= prev {
                break;
            }
            prev = pn;
        }
        worst = worst.max((total - 1.0).abs());
    }
    measured(worst, "x at 0.1 and 0.5 of the grid span")
}

fn check_monomials(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    let span = domain_span(p, 2.0);
    let mut worst: f64 = 0.0;
    for x in [0.05 * span, 0.4 * span] {
        let z = Complex64::new(x.sqrt(), 0.0);
        let n = normalization(p, x)?;
        let first = monomial_expectation(p, z, 1, 1, 1e-16)?;
        let second = monomial_expectation(p, z, 2, 2, 1e-16)?;
        worst = worst.max(rel(first.re, x * n.d1 / n.value));
        worst = worst.max(rel(second.re, x * x * n.d2 / n.value));
    }
    measured(worst, "r = s = 1, 2")
}

fn check_mandel(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    let x = small_x(p);
    let q = stats_point(p, x)?.mandel_q;
    measured(
        rel(q / x, mandel_small_x_slope(p)),
        format!("Q/x at x = {x:e}"),
    )
}

fn check_metric_origin(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    measured(rel(metric_w(p, 0.0)?.w, p.q() / p.scale()), "W(0)")
}

fn check_metric_derivative(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    let span = 0.8 * domain_span(p, 2.0);
    let mut worst: f64 = 0.0;
    for i in 1..=20 {
        let x = span * i as f64 / 20.0;
        let h = 1e-5 * span;
        let fd = (stats_point(p, x + h)?.mean_n - stats_point(p, x - h)?.mean_n) / (2.0 * h);
        worst = worst.max(rel(fd, metric_w(p, x)?.w));
    }
    measured(worst, "20 points, central differences")
}

fn check_metric_small_x(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    let x = small_x(p);
    measured(metric_smallx_check(p, x)?.rel_error, format!("x = {x:e}"))
}

fn check_unit_scale(cfg: &RunConfig) -> Result<Measured> {
    let p = &cfg.params;
    if p.l() != 1.0 || p.lambda() != 0.0 {
        return skip("needs l = 1, lambda = 0");
    }
    let mut worst: f64 = 0.0;
    for n in 0..=60u32 {
        let expected = p.q_pow_neg(n as f64) * q_number(n, p.q())?;
        worst = worst.max(rel(structure_function(p, n as u64), expected));
    }
    measured(worst, "n = 0..60")
}

/// Canonical oscillator recovery, always at `l = 1`, `λ = 0`.
fn check_harmonic_limit(cfg: &RunConfig) -> Result<Measured> {
    let p = DeformParams::near_unit(1.0, 0.0, 1e-6)?;
    let l2 = 1.0;
    let n_top = cfg.nmax.min(10);
    let mut worst: f64 = 0.0;
    for row in spectrum(&p, n_top, 1.0)? {
        let n = row.n as f64;
        if row.n > 0 {
            worst = worst.max((structure_function(&p, row.n) / l2 - n).abs() / n);
        }
        worst = worst.max((row.energy / l2 - (n + 0.5)).abs());
    }
    measured(worst, format!("|q - 1| = 1e-6, n <= {n_top}"))
}

type CheckFn = fn(&RunConfig) -> Result<Measured>;

fn suite() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("structure_recurrence", check_structure_recurrence),
        ("commutator_defect", check_commutator),
        ("boundedness", check_boundedness),
        ("vacuum_uncertainty", check_vacuum_uncertainty),
        ("functional_equation", check_functional_equation),
        ("product_form", check_product_form),
        ("q_derivative_fixed_point", check_fixed_point),
        ("moments_lattice", |c| check_moments(c, Regime::QAboveOne)),
        ("moments_stieltjes", |c| check_moments(c, Regime::QBelowOne)),
        ("stieltjes_weight", check_stieltjes_weight),
        ("eigen_residual", check_eigen_residual),
        ("overlap_bounds", check_overlap),
        ("pdf_normalization", check_pdf_normalization),
        ("monomial_consistency", check_monomials),
        ("mandel_small_x", check_mandel),
        ("metric_origin", check_metric_origin),
        ("metric_derivative", check_metric_derivative),
        ("metric_small_x", check_metric_small_x),
        ("unit_scale_reduction", check_unit_scale),
        ("harmonic_limit", check_harmonic_limit),
    ]
}

/// Run every check in a fixed order. A check that errors counts as failed.
pub fn run_verify(cfg: &RunConfig) -> Vec<VerifyOutcome> {
    suite()
        .into_iter()
        .map(|(name, check)| {
            let threshold = cfg.tolerances.get(name).copied().unwrap_or(f64::NAN);
            let (max_rel_error, status, detail) = match check(cfg) {
                Ok(Measured::Error(err, detail)) => {
                    let status = if err <= threshold {
                        CheckStatus::Passed
                    } else {
                        CheckStatus::Failed
                    };
                    (err, status, detail)
                }
                Ok(Measured::Skip(why)) => (f64::NAN, CheckStatus::Skipped, why),
                Err(e) => (f64::INFINITY, CheckStatus::Failed, describe_error(&e)),
            };
            VerifyOutcome {
                check_name: name.to_string(),
                max_rel_error,
                threshold,
                status,
                detail,
            }
        })
        .collect()
}

fn describe_error(e: &Error) -> String {
    format!("evaluation failed: {e}")
}

pub fn outcome_table(cfg: &RunConfig, outcomes: &[VerifyOutcome]) -> Table {
    let mut t = Table::new(["check", "status", "max_rel_error", "threshold", "detail"]);
    cfg.describe(&mut t);
    t.meta("seed", cfg.seed);
    for o in outcomes {
        t.push(vec![
            Cell::Text(o.check_name.clone()),
            Cell::Text(o.status.as_str().to_string()),
            if o.status == CheckStatus::Skipped {
                Cell::Missing
            } else {
                Cell::Num(o.max_rel_error)
            },
            Cell::Num(o.threshold),
            Cell::Text(o.detail.clone()),
        ]);
    }
    t
}
