//! Fubini–Study metric induced by `z ↦ |z⟩`.
//!
//! The line element is conformal, `dσ² = W(x) dz̄ dz` with `x = |z|²` and
//! `W = d⟨N⟩/dx`. In polar form `dσ² = W(r²)(dr² + r² dθ²)`.

use serde::Serialize;

use crate::coherent::normalization;
use crate::error::Result;
use crate::qcore::{DeformParams, Regime};
use crate::statistics::{check_small_x, SlopeCheck};

/// Where a metric value sits relative to the derived case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricProvenance {
    /// `q < 1`, the case the metric was derived for.
    Derived,
    /// `q > 1`: same formula evaluated inside the finite disk.
    Extension,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricPoint {
    pub x: f64,
    pub w: f64,
    /// Coefficient of `dr²`.
    pub ds2_coeff_r: f64,
    /// Coefficient of `dθ²`, equal to `r² W(r²)`.
    pub ds2_coeff_theta: f64,
    pub provenance: MetricProvenance,
}

pub fn metric_w(p: &DeformParams, x: f64) -> Result<MetricPoint> {
    let n = normalization(p, x)?;
    let w = if x == 0.0 {
        n.d1
    } else {
        (n.d1 * n.value + x * n.d2 * n.value - x * n.d1 * n.d1) / (n.value * n.value)
    };
    let provenance = match p.regime() {
        Regime::QBelowOne => MetricProvenance::Derived,
        Regime::QAboveOne => MetricProvenance::Extension,
    };
    Ok(MetricPoint {
        x,
        w,
        ds2_coeff_r: w,
        ds2_coeff_theta: x * w,
        provenance,
    })
}

/// `-2q²(1-q)/(s²(1+q))`, the slope of `W` at the origin.
pub fn metric_small_x_slope(p: &DeformParams) -> f64 {
    let q = p.q();
    let s = p.scale();
    -2.0 * q * q * (1.0 - q) / (s * s * (1.0 + q))
}

/// One-sided difference `(W(x) - W(0))/x` against the predicted slope.
pub fn metric_smallx_check(p: &DeformParams, x: f64) -> Result<SlopeCheck> {
    check_small_x(p, x)?;
    let w0 = metric_w(p, 0.0)?.w;
    let wx = metric_w(p, x)?.w;
    let measured = (wx - w0) / x;
    let predicted = metric_small_x_slope(p);
    Ok(SlopeCheck {
        measured_slope: measured,
        predicted_slope: predicted,
        rel_error: (measured - predicted).abs() / predicted.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::{mandel_small_x_slope, stats_point};

    fn params(q: f64, l: f64, lambda: f64) -> DeformParams {
        DeformParams::new(q, l, lambda).unwrap()
    }

    #[test]
    fn origin_value() {
        let p = params(0.5, 1.0, 0.0);
        let m = metric_w(&p, 0.0).unwrap();
        assert!((m.w - 0.5).abs() < 1e-15);
        assert_eq!(m.provenance, MetricProvenance::Derived);
        let p = params(3.0, 2.0, 1.0);
        let m = metric_w(&p, 0.0).unwrap();
        assert!((m.w - 3.0 / 12.0).abs() < 1e-15);
        assert_eq!(m.provenance, MetricProvenance::Extension);
    }

    #[test]
    fn w_is_derivative_of_mean_number() {
        let p = params(0.5, 1.0, 0.0);
        let x = 0.2;
        let h = 1e-5;
        let fd = (stats_point(&p, x + h).unwrap().mean_n - stats_point(&p, x - h).unwrap().mean_n)
            / (2.0 * h);
        assert!((metric_w(&p, x).unwrap().w - fd).abs() < 1e-6);
    }

    #[test]
    fn polar_coefficients_are_conformal() {
        let p = params(0.8, 1.0, 0.0);
        for x in [0.0, 0.3, 4.0] {
            let m = metric_w(&p, x).unwrap();
            assert_eq!(m.ds2_coeff_theta, x * m.ds2_coeff_r);
            assert!(m.w > 0.0);
        }
    }

    #[test]
    fn small_x_slope_example() {
        let p = params(0.5, 1.0, 0.0);
        // -2·0.25·0.5/(1·1.5)
        assert!((metric_small_x_slope(&p) + 1.0 / 6.0).abs() < 1e-16);
        let chk = metric_smallx_check(&p, 1e-4).unwrap();
        assert!(chk.rel_error <= 1e-2, "{chk:?}");
        assert!(metric_smallx_check(&p, 0.5).is_err());
    }

    #[test]
    fn metric_and_mandel_slopes_share_factor() {
        for (q, l, lambda) in [(0.5, 1.0, 0.0), (2.0, 1.5, -0.5), (0.3, 0.7, 2.0)] {
            let p = params(q, l, lambda);
            let w0 = metric_w(&p, 0.0).unwrap().w;
            let lhs = metric_small_x_slope(&p);
            let rhs = 2.0 * mandel_small_x_slope(&p) * w0;
            assert!((lhs - rhs).abs() < 1e-14 * lhs.abs());
        }
    }
}
