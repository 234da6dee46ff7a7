//! Numerics for the `(q; l, λ)`-deformed Heisenberg algebra.
//!
//! The algebra is generated by `N`, `a`, `a†` with `[N, a] = -a`, `[N, a†] = a†`
//! and `a a† - a† a = l² q^{λ-N-1}`. Everything here is parameterized by a
//! [`DeformParams`] triple:
//!
//! - [`qcore`]: q-numbers, q-factorials, q-Pochhammer products, the structure
//!   function `φ(n) = l² q^{λ-n} [n]_q` and the deformed derivative/integral.
//! - [`algebra`]: truncated Fock-space matrices of `a`, `a†`, `N`, `X`, `P`,
//!   the oscillator spectrum and boundedness diagnostics.
//! - [`coherent`]: coherent states `|z⟩`, the normalization series `𝒩`, the
//!   overlap kernel and the resolution-of-unity moment checks.
//! - [`statistics`]: occupation probabilities, boson monomial expectations and
//!   the Mandel parameter.
//! - [`geometry`]: the conformal factor `W(x)` of the Fubini–Study metric.
//! - [`cli`]: the batch front end behind the `qdeform` binary.

pub mod algebra;
pub mod cli;
pub mod coherent;
pub mod error;
pub mod geometry;
pub mod qcore;
pub mod quadrature;
pub mod statistics;
pub mod summation;

pub use error::{Error, Result};
pub use qcore::{DeformParams, Regime, SeriesEval};
