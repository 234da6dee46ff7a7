//! Truncated Fock-space realizations of `a`, `a†`, `N`, `X`, `P`, the oscillator
//! spectrum and boundedness diagnostics for the Jacobi matrices.
//!
//! On the number basis `a|n⟩ = x_n |n-1⟩` with `x_n = √φ(n)`, so every operator
//! built from the ladder pair is tridiagonal.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qcore::{structure_function, structure_split, DeformParams, Regime};

/// Default cap on the number of retained Fock states.
pub const MAX_FOCK_DIM: usize = 4096;

/// Retain the number states `|0⟩ … |D-1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FockTruncation {
    dim: usize,
}

impl FockTruncation {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_max(dim, MAX_FOCK_DIM)
    }

    pub fn with_max(dim: usize, max_dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Truncation(format!(
                "need at least 2 Fock states, got {dim}"
            )));
        }
        if dim > max_dim {
            return Err(Error::Truncation(format!(
                "{dim} Fock states exceed the configured maximum {max_dim}"
            )));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Overall phase multiplying a real coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Real,
    /// The operator is `i` times the stored real matrix.
    Imaginary,
}

/// Tridiagonal matrix stored as three bands plus a phase.
///
/// `sub[k]` is entry `(k+1, k)` and `sup[k]` is entry `(k, k+1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TridiagonalOperator {
    pub dim: usize,
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub phase: Phase,
    pub hermitian: bool,
}

impl TridiagonalOperator {
    fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>, phase: Phase) -> Self {
        let hermitian = match phase {
            Phase::Real => sub == sup,
            Phase::Imaginary => {
                diag.iter().all(|&d| d == 0.0) && sub.iter().zip(&sup).all(|(l, u)| *l == -*u)
            }
        };
        Self {
            dim: diag.len(),
            sub,
            diag,
            sup,
            phase,
            hermitian,
        }
    }

    pub fn transpose(&self) -> Self {
        Self::new(
            self.sup.clone(),
            self.diag.clone(),
            self.sub.clone(),
            self.phase,
        )
    }

    /// Entry `(row, col)` of the real coefficient matrix (phase not applied).
    pub fn coefficient(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diag[row]
        } else if row == col + 1 {
            self.sub[col]
        } else if col == row + 1 {
            self.sup[row]
        } else {
            0.0
        }
    }

    /// Apply the real coefficient matrix to `v` (phase not applied).
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "vector length must match the truncation");
        (0..self.dim)
            .map(|k| {
                let mut acc = self.diag[k] * v[k];
                if k > 0 {
                    acc += self.sub[k - 1] * v[k - 1];
                }
                if k + 1 < self.dim {
                    acc += self.sup[k] * v[k + 1];
                }
                acc
            })
            .collect()
    }

    /// Diagonal of the operator square, phase included (`i² = -1`).
    pub fn square_diagonal(&self) -> Vec<f64> {
        let sign = match self.phase {
            Phase::Real => 1.0,
            Phase::Imaginary => -1.0,
        };
        (0..self.dim)
            .map(|k| {
                let mut acc = self.diag[k] * self.diag[k];
                if k > 0 {
                    acc += self.sub[k - 1] * self.sup[k - 1];
                }
                if k + 1 < self.dim {
                    acc += self.sup[k] * self.sub[k];
                }
                sign * acc
            })
            .collect()
    }
}

/// `a`, `a†` and `N` on a truncated Fock space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderMatrices {
    pub a: TridiagonalOperator,
    pub a_dag: TridiagonalOperator,
    pub number: TridiagonalOperator,
}

/// The Jacobi entries `x_1 … x_{D-1}` with `x_n = √φ(n)`.
pub fn jacobi_entries(p: &DeformParams, dim: usize) -> Vec<f64> {
    (1..dim as u64)
        .map(|n| structure_function(p, n).sqrt())
        .collect()
}

pub fn ladder_matrices(p: &DeformParams, t: FockTruncation) -> LadderMatrices {
    let d = t.dim();
    let x = jacobi_entries(p, d);
    let a = TridiagonalOperator::new(vec![0.0; d - 1], vec![0.0; d], x, Phase::Real);
    let a_dag = a.transpose();
    let number = TridiagonalOperator::new(
        vec![0.0; d - 1],
        (0..d).map(|n| n as f64).collect(),
        vec![0.0; d - 1],
        Phase::Real,
    );
    LadderMatrices { a, a_dag, number }
}

/// Per-state residual of `a a† - a† a = l² q^{λ-N-1}` on `|0⟩ … |D-2⟩`.
///
/// Row `n` compares `x_{n+1}² - x_n²` with `s q^{-n-1}` and is expressed in units
/// of the row's magnitude: the raw difference is divided by `max(1, x_{n+1}²/s)`.
/// For `q < 1` the entries grow like `q^{-n}`, so an unscaled residual would only
/// measure the floating spacing of the entries. The last retained state is
/// excluded because the truncated `a†` cannot reach `|D⟩`.
pub fn commutator_defect(p: &DeformParams, t: FockTruncation) -> Vec<f64> {
    let ladder = ladder_matrices(p, t);
    let s = p.scale();
    let d = t.dim();
    (0..d - 1)
        .map(|n| {
            let mut e = vec![0.0; d];
            e[n] = 1.0;
            let aa_dag = ladder.a.apply(&ladder.a_dag.apply(&e))[n];
            let a_dag_a = ladder.a_dag.apply(&ladder.a.apply(&e))[n];
            let expected = s * p.q_pow_neg(n as f64 + 1.0);
            (aa_dag - a_dag_a - expected) / (aa_dag / s).max(1.0)
        })
        .collect()
}

/// Deformed position and momentum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionMomentum {
    /// `√(ħ/2mω) (a + a†)`.
    pub x: TridiagonalOperator,
    /// `-i √(mħω/2) (a - a†)`, stored as `i` times a real antisymmetric matrix.
    pub p: TridiagonalOperator,
}

pub fn position_momentum(
    params: &DeformParams,
    t: FockTruncation,
    mass: f64,
    omega: f64,
    hbar: f64,
) -> Result<PositionMomentum> {
    for (name, v) in [("mass", mass), ("omega", omega), ("hbar", hbar)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    let d = t.dim();
    let entries = jacobi_entries(params, d);
    let cx = (hbar / (2.0 * mass * omega)).sqrt();
    let cp = (mass * hbar * omega / 2.0).sqrt();
    let xs: Vec<f64> = entries.iter().map(|x| cx * x).collect();
    let x = TridiagonalOperator::new(xs.clone(), vec![0.0; d], xs, Phase::Real);
    // -i c (a - a†): entry (n-1, n) is -i c x_n, entry (n, n-1) is +i c x_n.
    let p = TridiagonalOperator::new(
        entries.iter().map(|x| cp * x).collect(),
        vec![0.0; d],
        entries.iter().map(|x| -cp * x).collect(),
        Phase::Imaginary,
    );
    Ok(PositionMomentum { x, p })
}

/// One level of the deformed oscillator.
///
/// `var_x` is in units of `ħ/(2mω)`, `var_p` in units of `mħω/2` and
/// `uncertainty_product` in units of `ħ/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub n: u64,
    pub energy: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub uncertainty_product: f64,
}

impl SpectrumRow {
    /// `ΔX·ΔP` in units of `ħ`.
    pub fn uncertainty_in_hbar(&self) -> f64 {
        0.5 * self.uncertainty_product
    }
}

/// Levels `0 … n_max`: `E(n) = (ħω/2)(φ(n) + φ(n+1))`, with both variances equal
/// to `x_n² + x_{n+1}²` in their natural units.
pub fn spectrum(p: &DeformParams, n_max: u64, hbar_omega: f64) -> Result<Vec<SpectrumRow>> {
    if !(hbar_omega.is_finite() && hbar_omega > 0.0) {
        return Err(Error::Domain(format!(
            "hbar*omega must be positive, got {hbar_omega}"
        )));
    }
    Ok((0..=n_max)
        .map(|n| {
            let level = structure_function(p, n) + structure_function(p, n + 1);
            SpectrumRow {
                n,
                energy: 0.5 * hbar_omega * level,
                var_x: level,
                var_p: level,
                uncertainty_product: (level * level).sqrt(),
            }
        })
        .collect())
}

/// Outcome of the bounded/unbounded test for the Jacobi matrices of `a ± a†`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundednessReport {
    pub bounded: bool,
    /// `√(s/(q-1))` for `q > 1`.
    pub sup_bound: Option<f64>,
    /// `Σ_{n=1}^{probe_n} 1/x_n` for `q < 1`.
    pub reciprocal_sum_estimate: Option<f64>,
    /// Ratio-test limit `√q` of `(1/x_{n+1})/(1/x_n)` for `q < 1`.
    pub ratio_limit: Option<f64>,
    /// Number of entries checked.
    pub probe_n: u64,
}

/// `(1/x_{n+1}) / (1/x_n) = √(φ(n)/φ(n+1))` for `n >= 1`.
pub fn reciprocal_ratio(p: &DeformParams, n: u64) -> f64 {
    (structure_function(p, n) / structure_function(p, n + 1)).sqrt()
}

/// For `q > 1` each `x_n < sup_bound` is verified through the split form
/// `sup² - x_n² = s q^{-n}/(q-1) > 0`, which stays exact after `x_n` rounds to
/// the bound. For `q < 1` the reciprocal series is summed to `probe_n`.
pub fn boundedness_diagnostic(p: &DeformParams, probe_n: u64) -> Result<BoundednessReport> {
    if probe_n < 2 {
        return Err(Error::Domain(format!(
            "probe_n must be at least 2, got {probe_n}"
        )));
    }
    match p.regime() {
        Regime::QAboveOne => {
            let split = structure_split(p, 0);
            let sup = split.anchor.sqrt();
            // Past this index q^{-n} underflows and the offset reads as zero.
            let representable = (-f64::MIN_POSITIVE.ln() / p.ln_q()).floor() as u64;
            let all_below = (1..=probe_n).all(|n| {
                let s = structure_split(p, n);
                (s.offset > 0.0 || n >= representable) && structure_function(p, n).sqrt() <= sup
            });
            Ok(BoundednessReport {
                bounded: all_below,
                sup_bound: Some(sup),
                reciprocal_sum_estimate: None,
                ratio_limit: None,
                probe_n,
            })
        }
        Regime::QBelowOne => {
            let sum = (1..=probe_n)
                .map(|n| 1.0 / structure_function(p, n).sqrt())
                .sum();
            Ok(BoundednessReport {
                bounded: false,
                sup_bound: None,
                reciprocal_sum_estimate: Some(sum),
                ratio_limit: Some(p.q().sqrt()),
                probe_n,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::q_number;

    fn params(q: f64, l: f64, lambda: f64) -> DeformParams {
        DeformParams::new(q, l, lambda).unwrap()
    }

    #[test]
    fn truncation_bounds() {
        assert!(FockTruncation::new(1).is_err());
        assert!(FockTruncation::new(2).is_ok());
        assert!(FockTruncation::new(MAX_FOCK_DIM).is_ok());
        assert!(FockTruncation::new(MAX_FOCK_DIM + 1).is_err());
        assert!(FockTruncation::with_max(10, 8).is_err());
    }

    #[test]
    fn ladder_first_entry() {
        let p = params(2.0, 1.0, 0.0);
        let lad = ladder_matrices(&p, FockTruncation::new(3).unwrap());
        // x_1 = √(2^{-1}·[1]_2)
        let oracle = (0.5f64 * q_number(1, 2.0).unwrap()).sqrt();
        assert!((lad.a.sup[0] - oracle).abs() < 1e-15);
        assert!((lad.a.sup[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(lad.a.diag.iter().all(|&d| d == 0.0));
        assert!(lad.a.sub.iter().all(|&d| d == 0.0));
        assert_eq!(lad.number.diag, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn vacuum_is_annihilated() {
        let p = params(0.7, 1.3, 0.4);
        let lad = ladder_matrices(&p, FockTruncation::new(6).unwrap());
        let mut vac = vec![0.0; 6];
        vac[0] = 1.0;
        assert!(lad.a.apply(&vac).iter().all(|&c| c == 0.0));
    }

    #[test]
    fn entries_square_to_structure_function() {
        let p = params(0.5, 1.0, 0.0);
        let lad = ladder_matrices(&p, FockTruncation::new(12).unwrap());
        let x10 = lad.a.sup[9];
        let oracle = 0.5f64.powi(-10) * q_number(10, 0.5).unwrap();
        assert!((x10 * x10 - oracle).abs() < 1e-12 * oracle);
        assert!(lad.a.sup.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn hermiticity_flags() {
        let p = params(0.5, 2.0, 1.0);
        let t = FockTruncation::new(8).unwrap();
        let lad = ladder_matrices(&p, t);
        assert_eq!(lad.a_dag.sub, lad.a.sup);
        assert_eq!(lad.a_dag.sup, lad.a.sub);
        assert!(!lad.a.hermitian);
        assert!(lad.number.hermitian);
        let xp = position_momentum(&p, t, 1.0, 1.0, 1.0).unwrap();
        assert!(xp.x.hermitian);
        assert!(xp.p.hermitian);
        assert_eq!(xp.p.phase, Phase::Imaginary);
    }

    #[test]
    fn commutator_defect_examples() {
        for (q, l, lambda) in [(2.0, 1.0, 0.0), (0.5, 2.0, 1.0)] {
            let p = params(q, l, lambda);
            let r = commutator_defect(&p, FockTruncation::new(16).unwrap());
            assert_eq!(r.len(), 15);
            assert!(
                r.iter().all(|v| v.abs() < 1e-13 * p.scale().max(1.0)),
                "{r:?}"
            );
        }
        let p = params(3.0, 0.8, -0.5);
        let r = commutator_defect(&p, FockTruncation::new(2).unwrap());
        assert_eq!(r.len(), 1);
        assert!(r[0].abs() < 1e-15);
    }

    #[test]
    fn position_momentum_matrix_elements() {
        let p = params(0.6, 1.4, 0.3);
        let (m, w, hbar) = (2.0, 0.5, 1.3);
        let t = FockTruncation::new(10).unwrap();
        let xp = position_momentum(&p, t, m, w, hbar).unwrap();
        let x1 = structure_function(&p, 1).sqrt();
        assert!((xp.x.coefficient(0, 1) - (hbar / (2.0 * m * w)).sqrt() * x1).abs() < 1e-15);
        assert!((0..10).all(|n| xp.x.coefficient(n, n) == 0.0));
        let p2 = xp.p.square_diagonal();
        assert!((p2[0] - m * hbar * w / 2.0 * x1 * x1).abs() < 1e-14);
        assert!(position_momentum(&p, t, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn variances_follow_definitions() {
        let p = params(1.8, 0.9, 0.2);
        let (m, w, hbar) = (1.5, 2.0, 0.7);
        let t = FockTruncation::new(12).unwrap();
        let xp = position_momentum(&p, t, m, w, hbar).unwrap();
        let rows = spectrum(&p, 9, hbar * w).unwrap();
        let x2 = xp.x.square_diagonal();
        let p2 = xp.p.square_diagonal();
        for row in &rows {
            let n = row.n as usize;
            let vx = hbar / (2.0 * m * w) * row.var_x;
            let vp = m * hbar * w / 2.0 * row.var_p;
            assert!((x2[n] - vx).abs() < 1e-13 * vx);
            assert!((p2[n] - vp).abs() < 1e-13 * vp);
            assert!(((vx * vp).sqrt() - hbar / 2.0 * row.uncertainty_product).abs() < 1e-13);
        }
    }

    #[test]
    fn spectrum_examples() {
        let p = params(2.0, 1.0, 0.0);
        let rows = spectrum(&p, 4, 1.0).unwrap();
        assert_eq!(rows.len(), 5);
        // (φ(n) + φ(n+1))/2 with φ = 0, 0.5, 0.75
        assert!((rows[0].energy - 0.25).abs() < 1e-15);
        assert!((rows[1].energy - 0.625).abs() < 1e-15);
        assert!((rows[0].uncertainty_in_hbar() - 0.5 * 0.5).abs() < 1e-15);
        assert!(rows.windows(2).all(|w| w[1].energy > w[0].energy));
        assert!(spectrum(&p, 3, -1.0).is_err());
    }

    #[test]
    fn spectrum_harmonic_limit() {
        let p = DeformParams::near_unit(1.0, 0.0, crate::qcore::LIMIT_Q1_OFFSET).unwrap();
        for row in spectrum(&p, 10, 1.0).unwrap() {
            assert!((row.energy - (row.n as f64 + 0.5)).abs() < 1e-4);
        }
    }

    #[test]
    fn boundedness_examples() {
        let p = params(2.0, 1.0, 0.0);
        let rep = boundedness_diagnostic(&p, 200).unwrap();
        assert!(rep.bounded);
        assert!((rep.sup_bound.unwrap() - 1.0).abs() < 1e-15);

        let p = params(0.5, 1.0, 0.0);
        let rep = boundedness_diagnostic(&p, 200).unwrap();
        assert!(!rep.bounded);
        assert!(rep.reciprocal_sum_estimate.unwrap().is_finite());
        assert!((rep.ratio_limit.unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(structure_function(&p, 200).sqrt() > 1e29);
        assert!((reciprocal_ratio(&p, 200) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!(boundedness_diagnostic(&p, 1).is_err());
    }
}
