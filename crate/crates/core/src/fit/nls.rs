//! Damped Gauss–Newton for small weighted least-squares problems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) const MAX_ITERATIONS: usize = 200;
pub(crate) const STEP_TOLERANCE: f64 = 1e-10;

/// A model y = f(p; x) with analytic gradient in p.
pub(crate) trait Model {
    fn n_params(&self) -> usize;

    /// Returns f(p; x) and writes ∂f/∂p into `grad`.
    fn eval(&self, params: &[f64], x: f64, grad: &mut [f64]) -> f64;

    fn feasible(&self, params: &[f64]) -> bool;
}

pub(crate) struct Data<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub sigma: &'a [f64],
}

pub(crate) struct Outcome {
    pub params: Vec<f64>,
    /// (JᵀWJ)⁻¹ at the solution, not rescaled by chi².
    pub covariance: Option<DMatrix<f64>>,
    pub chi2: f64,
    pub iterations: usize,
}

pub(crate) fn chi2<M: Model>(model: &M, data: &Data<'_>, params: &[f64]) -> f64 {
    let mut grad = vec![0.0; model.n_params()];
    data.x
        .iter()
        .zip(data.y)
        .zip(data.sigma)
        .map(|((&x, &y), &s)| {
            let r = (y - model.eval(params, x, &mut grad)) / s;
            r * r
        })
        .sum()
}

fn weighted_system<M: Model>(
    model: &M,
    data: &Data<'_>,
    params: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let n = data.x.len();
    let p = model.n_params();
    let mut jac = DMatrix::zeros(n, p);
    let mut res = DVector::zeros(n);
    let mut grad = vec![0.0; p];
    for i in 0..n {
        let f = model.eval(params, data.x[i], &mut grad);
        res[i] = (data.y[i] - f) / data.sigma[i];
        for j in 0..p {
            jac[(i, j)] = grad[j] / data.sigma[i];
        }
    }
    (jac, res)
}

/// Inverse of JᵀWJ computed with column equilibration. `None` when singular.
pub(crate) fn covariance<M: Model>(
    model: &M,
    data: &Data<'_>,
    params: &[f64],
) -> Option<DMatrix<f64>> {
    let (jac, _) = weighted_system(model, data, params);
    let scale = column_norms(&jac)?;
    let scaled = scale_columns(&jac, &scale);
    let normal = scaled.transpose() * &scaled;
    let inv = normal.cholesky()?.inverse();
    let p = scale.len();
    Some(DMatrix::from_fn(p, p, |i, j| {
        inv[(i, j)] / (scale[i] * scale[j])
    }))
}

fn column_norms(jac: &DMatrix<f64>) -> Option<Vec<f64>> {
    let norms: Vec<f64> = jac.column_iter().map(|c| c.norm()).collect();
    if norms.iter().all(|n| *n > 0.0 && n.is_finite()) {
        Some(norms)
    } else {
        None
    }
}

fn scale_columns(jac: &DMatrix<f64>, scale: &[f64]) -> DMatrix<f64> {
    let mut out = jac.clone();
    for (j, s) in scale.iter().enumerate() {
        out.column_mut(j).unscale_mut(*s);
    }
    out
}

/// Refines `start` by Gauss–Newton steps with step halving. Stops when the
/// largest relative parameter change falls below [`STEP_TOLERANCE`].
pub(crate) fn gauss_newton<M: Model>(
    model: &M,
    data: &Data<'_>,
    start: &[f64],
    what: &'static str,
) -> Result<Outcome> {
    let mut params = start.to_vec();
    let mut current = chi2(model, data, &params);
    for iteration in 1..=MAX_ITERATIONS {
        let (jac, res) = weighted_system(model, data, &params);
        let scale = column_norms(&jac)
            .ok_or_else(|| Error::Singular(format!("{what}: zero Jacobian column")))?;
        let scaled = scale_columns(&jac, &scale);
        // least-squares step via SVD of the equilibrated Jacobian
        let svd = scaled.svd(true, true);
        let step_scaled = svd
            .solve(&res, 1e-14)
            .map_err(|e| Error::Singular(format!("{what}: {e}")))?;
        let step: Vec<f64> = step_scaled.iter().zip(&scale).map(|(s, c)| s / c).collect();
        let rel_step = step
            .iter()
            .zip(&params)
            .map(|(s, p)| s.abs() / p.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + t * s).collect();
            if model.feasible(&trial) {
                let c = chi2(model, data, &trial);
                if c <= current {
                    accepted = Some((trial, c));
                    break;
                }
            }
            t *= 0.5;
        }

        match accepted {
            Some((trial, c)) => {
                params = trial;
                current = c;
                if rel_step * t < STEP_TOLERANCE {
                    return Ok(finish(model, data, params, current, iteration));
                }
            }
            // no descent along the Gauss–Newton direction: numerical minimum
            None if rel_step < 1e-6 => {
                return Ok(finish(model, data, params, current, iteration));
            }
            None => {
                return Err(Error::NonConvergence {
                    what,
                    iterations: iteration,
                })
            }
        }
    }
    Err(Error::NonConvergence {
        what,
        iterations: MAX_ITERATIONS,
    })
}

fn finish<M: Model>(
    model: &M,
    data: &Data<'_>,
    params: Vec<f64>,
    chi2: f64,
    iterations: usize,
) -> Outcome {
    let covariance = covariance(model, data, &params);
    Outcome {
        params,
        covariance,
        chi2,
        iterations,
    }
}
