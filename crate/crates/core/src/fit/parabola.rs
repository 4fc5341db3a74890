//! Weighted quadratic fit y = k (V − V_m)² + minimum at one distance.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::model::{distinct_count, ParabolaFit};

/// One (V, y ± σ) sample of a parabola measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaPoint {
    pub voltage: f64,
    pub value: f64,
    pub sigma: f64,
}

impl From<(f64, f64, f64)> for ParabolaPoint {
    fn from((voltage, value, sigma): (f64, f64, f64)) -> Self {
        Self {
            voltage,
            value,
            sigma,
        }
    }
}

/// Fits y = aV² + bV + c by weighted least squares and converts to
/// (k, V_m, minimum) = (a, −b/2a, c − b²/4a) with delta-method covariance.
///
/// Repeated voltages count as independent replicates. The returned fit has
/// `d_r = 0`; callers that know the distance set it.
pub fn fit_parabola(points: &[ParabolaPoint]) -> Result<ParabolaFit> {
    let voltages: Vec<f64> = points.iter().map(|p| p.voltage).collect();
    let distinct = distinct_count(&voltages);
    if distinct < 3 {
        return Err(Error::Underdetermined { distinct });
    }
    for p in points {
        if !(p.sigma > 0.0 && p.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "fit_parabola: sigma must be > 0, got {} at V = {}",
                p.sigma, p.voltage
            )));
        }
        if !(p.voltage.is_finite() && p.value.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "fit_parabola: non-finite sample at V = {}",
                p.voltage
            )));
        }
    }

    // Work in t = (V − V̄)/s with V̄ the weighted mean voltage and s the
    // largest |V − V̄|, which keeps the design matrix well conditioned.
    let weight_sum: f64 = points.iter().map(|p| p.sigma.powi(-2)).sum();
    let center = points
        .iter()
        .map(|p| p.voltage * p.sigma.powi(-2))
        .sum::<f64>()
        / weight_sum;
    let scale = points
        .iter()
        .map(|p| (p.voltage - center).abs())
        .fold(0.0, f64::max);

    let n = points.len();
    let mut design = DMatrix::zeros(n, 3);
    let mut rhs = DVector::zeros(n);
    for (i, p) in points.iter().enumerate() {
        let t = (p.voltage - center) / scale;
        let w = 1.0 / p.sigma;
        design[(i, 0)] = t * t * w;
        design[(i, 1)] = t * w;
        design[(i, 2)] = w;
        rhs[i] = p.value * w;
    }

    let qr = design.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &rhs;
    let coeffs = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("fit_parabola: rank-deficient design".into()))?;
    let (a, b, c) = (coeffs[0], coeffs[1], coeffs[2]);
    if !(a > 0.0) {
        return Err(Error::NonConvex {
            a: a / (scale * scale),
        });
    }

    let r3 = Matrix3::from_fn(|i, j| r[(i, j)]);
    let r_inv = r3
        .try_inverse()
        .ok_or_else(|| Error::Singular("fit_parabola: rank-deficient design".into()))?;
    let cov_t = r_inv * r_inv.transpose();

    let curvature = a / (scale * scale);
    let v_min = center - scale * b / (2.0 * a);
    let minimum = c - b * b / (4.0 * a);

    let jac = Matrix3::new(
        1.0 / (scale * scale),
        0.0,
        0.0,
        scale * b / (2.0 * a * a),
        -scale / (2.0 * a),
        0.0,
        b * b / (4.0 * a * a),
        -b / (2.0 * a),
        1.0,
    );
    let cov = jac * cov_t * jac.transpose();
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            // symmetrize away rounding asymmetry
            *entry = 0.5 * (cov[(i, j)] + cov[(j, i)]);
        }
    }

    let residual = &design * &coeffs - &rhs;
    Ok(ParabolaFit {
        d_r: 0.0,
        curvature,
        v_min,
        minimum,
        covariance,
        chi2: residual.norm_squared(),
        dof: n - 3,
    })
}
