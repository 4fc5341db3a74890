//! Linear decomposition of the distance-only term onto inverse powers of d.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctSample {
    pub d: f64,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub exponents: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2_per_dof: f64,
}

/// Weighted linear least squares of f(d) on the basis {d⁻ⁿ}.
pub fn decompose_fluct(samples: &[FluctSample], exponents: &[f64]) -> Result<Decomposition> {
    let p = exponents.len();
    if p == 0 {
        return Err(Error::InvalidInput("empty basis".into()));
    }
    for (i, a) in exponents.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite exponent {a}")));
        }
        if exponents[..i].contains(a) {
            return Err(Error::DuplicateExponent(*a));
        }
    }
    let n = samples.len();
    if n < p + 1 {
        return Err(Error::InvalidInput(format!(
            "decomposition with {p} terms needs at least {} samples, got {n}",
            p + 1
        )));
    }
    for s in samples {
        if !(s.d > 0.0 && s.sigma > 0.0 && s.value.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "invalid fluct sample at d = {:e}",
                s.d
            )));
        }
    }

    let mut design = DMatrix::from_fn(n, p, |i, j| {
        samples[i].d.powf(-exponents[j]) / samples[i].sigma
    });
    let rhs = DVector::from_iterator(n, samples.iter().map(|s| s.value / s.sigma));
    let scale: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();
    for (j, s) in scale.iter().enumerate() {
        design.column_mut(j).unscale_mut(*s);
    }

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::Singular(format!(
            "basis {exponents:?} is collinear over the sampled distances (condition {:e})",
            smax / smin
        )));
    }
    let coeffs = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let residual = &design * &coeffs - &rhs;

    // (AᵀA)⁻¹ = V Σ⁻² Vᵀ for the equilibrated design
    let v_t = svd.v_t.as_ref().expect("svd computed with V");
    let inv_sq = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / (s * s)));
    let cov_scaled = v_t.transpose() * inv_sq * v_t;
    let covariance: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| cov_scaled[(i, j)] / (scale[i] * scale[j]))
                .collect()
        })
        .collect();

    let dof = n - p;
    Ok(Decomposition {
        exponents: exponents.to_vec(),
        amplitudes: (0..p).map(|j| coeffs[j] / scale[j]).collect(),
        sigmas: (0..p).map(|j| covariance[j][j].max(0.0).sqrt()).collect(),
        covariance,
        chi2_per_dof: residual.norm_squared() / dof as f64,
    })
}
