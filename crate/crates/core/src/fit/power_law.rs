//! Distance calibration of curvature profiles: k = A·s(d₀ − d_r) with the
//! amplitude A and contact point d₀ fitted jointly.
//!
//! Strategy: scan d₀ over a geometric grid of offsets above max(d_r), solving
//! the amplitude linearly at each candidate, then refine the best candidate
//! with damped Gauss–Newton.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::nls::{self, Data, Model};
use super::CalibrationProfiles;
use crate::constants::VACUUM_PERMITTIVITY;
use crate::error::{Error, Result};
use crate::model::{Geometry, PowerLaw, PowerLawFit};

const SCAN_POINTS: usize = 600;
/// Smallest scanned offset d₀ − max(d_r), as a fraction of the d_r span.
const SCAN_MIN_FRACTION: f64 = 1e-6;
/// Largest scanned offset, as a multiple of the d_r span.
const SCAN_MAX_SPAN: f64 = 10.0;

fn shape(law: PowerLaw, radius: f64, x: f64) -> (f64, f64) {
    match law {
        PowerLaw::InverseLinear => (1.0 / x, -1.0 / (x * x)),
        PowerLaw::InverseSquare => (1.0 / (x * x), -2.0 / (x * x * x)),
        PowerLaw::CapacitanceSquared => {
            let scale = 2.0 * PI * radius * VACUUM_PERMITTIVITY;
            let c = scale * (radius / x).ln();
            (c * c, -2.0 * c * scale / x)
        }
    }
}

struct LawModel {
    law: PowerLaw,
    radius: f64,
    min_dr: f64,
    max_dr: f64,
}

impl Model for LawModel {
    fn n_params(&self) -> usize {
        2
    }

    fn eval(&self, p: &[f64], d_r: f64, grad: &mut [f64]) -> f64 {
        let (s, ds) = shape(self.law, self.radius, p[1] - d_r);
        grad[0] = s;
        grad[1] = p[0] * ds;
        p[0] * s
    }

    fn feasible(&self, p: &[f64]) -> bool {
        let inside = p[1] > self.max_dr && p[0].is_finite();
        match self.law {
            PowerLaw::CapacitanceSquared => inside && p[1] - self.min_dr < self.radius,
            _ => inside,
        }
    }
}

/// Free-exponent model k = A/(d₀ − d_r)^p.
struct FreeModel {
    max_dr: f64,
}

impl Model for FreeModel {
    fn n_params(&self) -> usize {
        3
    }

    fn eval(&self, p: &[f64], d_r: f64, grad: &mut [f64]) -> f64 {
        let x = p[1] - d_r;
        let s = x.powf(-p[2]);
        grad[0] = s;
        grad[1] = -p[2] * p[0] * s / x;
        grad[2] = -p[0] * s * x.ln();
        p[0] * s
    }

    fn feasible(&self, p: &[f64]) -> bool {
        p[1] > self.max_dr && p.iter().all(|v| v.is_finite())
    }
}

struct Columns {
    d_r: Vec<f64>,
    k: Vec<f64>,
    sigma: Vec<f64>,
}

impl Columns {
    fn from_profiles(profiles: &CalibrationProfiles, min_rows: usize) -> Result<Self> {
        let n = profiles.rows.len();
        if n < min_rows {
            return Err(Error::InvalidInput(format!(
                "power-law fit needs at least {min_rows} distances, got {n}"
            )));
        }
        if let Some(r) = profiles.rows.iter().find(|r| !(r.sigma_k > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "sigma_k must be > 0 (d_r = {:e})",
                r.d_r
            )));
        }
        if profiles.rows.windows(2).any(|w| w[1].k < w[0].k) {
            log::warn!(
                "{} curvature profile is not monotone increasing in d_r",
                profiles.mode
            );
        }
        Ok(Self {
            d_r: profiles.rows.iter().map(|r| r.d_r).collect(),
            k: profiles.rows.iter().map(|r| r.k).collect(),
            sigma: profiles.rows.iter().map(|r| r.sigma_k).collect(),
        })
    }

    fn data(&self) -> Data<'_> {
        Data {
            x: &self.d_r,
            y: &self.k,
            sigma: &self.sigma,
        }
    }

    fn min_dr(&self) -> f64 {
        self.d_r.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn max_dr(&self) -> f64 {
        self.d_r.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Candidate d₀ values, geometric in the offset above max(d_r).
    fn scan(&self, max_offset: f64) -> Vec<f64> {
        let max_dr = self.max_dr();
        let span = (max_dr - self.min_dr())
            .max(max_dr.abs())
            .max(f64::MIN_POSITIVE);
        let lo = (span * SCAN_MIN_FRACTION).ln();
        let hi = max_offset.min(span * SCAN_MAX_SPAN).ln();
        (0..SCAN_POINTS)
            .map(|i| max_dr + (lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64).exp())
            .filter(|d0| *d0 > max_dr)
            .collect()
    }
}

/// Weighted linear amplitude and chi² for fixed d₀.
fn linear_amplitude(cols: &Columns, law: PowerLaw, radius: f64, d0: f64) -> (f64, f64, f64) {
    let (mut sws, mut swy) = (0.0, 0.0);
    for i in 0..cols.d_r.len() {
        let (s, _) = shape(law, radius, d0 - cols.d_r[i]);
        let w = cols.sigma[i].powi(-2);
        sws += w * s * s;
        swy += w * s * cols.k[i];
    }
    let amplitude = swy / sws;
    let chi2 = (0..cols.d_r.len())
        .map(|i| {
            let (s, _) = shape(law, radius, d0 - cols.d_r[i]);
            ((cols.k[i] - amplitude * s) / cols.sigma[i]).powi(2)
        })
        .sum();
    (amplitude, chi2, sws.recip().sqrt())
}

/// Fits k(d_r) of a calibration profile to `law`.
///
/// Uncertainties come from the inverse Gauss–Newton normal matrix, inflated
/// by √(χ²/dof) when χ²/dof > 1. A profile too flat to locate d₀ yields
/// `d0_sigma = ∞` instead of an error.
pub fn fit_power_law(
    profiles: &CalibrationProfiles,
    law: PowerLaw,
    geometry: &Geometry,
) -> Result<PowerLawFit> {
    let cols = Columns::from_profiles(profiles, 4)?;
    let radius = geometry.sphere_radius();
    let (min_dr, max_dr) = (cols.min_dr(), cols.max_dr());
    let max_offset = match law {
        PowerLaw::CapacitanceSquared => {
            let room = radius - (max_dr - min_dr);
            if !(room > 0.0) {
                return Err(Error::InvalidInput(
                    "d_r span exceeds the sphere radius".into(),
                ));
            }
            0.999 * room
        }
        _ => f64::INFINITY,
    };
    let candidates = cols.scan(max_offset);
    let (best_idx, (amp0, chi0, amp_sigma0)) = candidates
        .iter()
        .map(|&d0| linear_amplitude(&cols, law, radius, d0))
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .ok_or_else(|| Error::InvalidInput("empty d0 scan".into()))?;
    let dof = cols.d_r.len() - 2;

    if best_idx + 1 == candidates.len() {
        log::warn!("{law:?} fit: curvature profile too flat to locate d0");
        return Ok(PowerLawFit {
            law,
            amplitude: amp0,
            amplitude_sigma: amp_sigma0,
            d0_hat: candidates[best_idx],
            d0_sigma: f64::INFINITY,
            chi2_per_dof: chi0 / dof as f64,
            dof,
            iterations: 0,
        });
    }

    let model = LawModel {
        law,
        radius,
        min_dr,
        max_dr,
    };
    let out = nls::gauss_newton(
        &model,
        &cols.data(),
        &[amp0, candidates[best_idx]],
        "fit_power_law",
    )?;
    let (amplitude, d0_hat) = (out.params[0], out.params[1]);
    if !(d0_hat > max_dr) {
        return Err(Error::Unphysical { d0: d0_hat, max_dr });
    }
    let chi2_per_dof = out.chi2 / dof as f64;
    let inflate = chi2_per_dof.max(1.0);
    let (amplitude_sigma, d0_sigma) = match &out.covariance {
        Some(cov) => (
            (cov[(0, 0)] * inflate).sqrt(),
            (cov[(1, 1)] * inflate).sqrt(),
        ),
        None => (f64::INFINITY, f64::INFINITY),
    };
    Ok(PowerLawFit {
        law,
        amplitude,
        amplitude_sigma,
        d0_hat,
        d0_sigma,
        chi2_per_dof,
        dof,
        iterations: out.iterations,
    })
}

/// Curvature profile refitted with the exponent as a free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeExponentFit {
    pub amplitude: f64,
    pub d0_hat: f64,
    #[serde(with = "crate::io::float_ext")]
    pub d0_sigma: f64,
    pub exponent: f64,
    #[serde(with = "crate::io::float_ext")]
    pub exponent_sigma: f64,
    pub chi2_per_dof: f64,
}

/// Fits k = A/(d₀ − d_r)^p with A, d₀ and p free.
pub fn fit_free_exponent(profiles: &CalibrationProfiles) -> Result<FreeExponentFit> {
    let cols = Columns::from_profiles(profiles, 5)?;
    let max_dr = cols.max_dr();
    let n = cols.d_r.len();
    let model = FreeModel { max_dr };
    let data = cols.data();

    // For each candidate d₀, ln k = ln A − p ln(d₀ − d_r) is linear in (ln A, p).
    let start = cols
        .scan(f64::INFINITY)
        .into_iter()
        .filter_map(|d0| {
            let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..n {
                let x = (d0 - cols.d_r[i]).ln();
                let y = cols.k[i].ln();
                let w = (cols.k[i] / cols.sigma[i]).powi(2);
                sw += w;
                swx += w * x;
                swy += w * y;
                swxx += w * x * x;
                swxy += w * x * y;
            }
            let det = sw * swxx - swx * swx;
            if !(det.abs() > 0.0) {
                return None;
            }
            let slope = (sw * swxy - swx * swy) / det;
            let intercept = (swy - slope * swx) / sw;
            let params = [intercept.exp(), d0, -slope];
            let c = nls::chi2(&model, &data, &params);
            c.is_finite().then_some((params, c))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| p)
        .ok_or_else(|| Error::Singular("fit_free_exponent: empty scan".into()))?;

    let out = nls::gauss_newton(&model, &data, &start, "fit_free_exponent")?;
    let dof = n - 3;
    let chi2_per_dof = out.chi2 / dof as f64;
    let inflate = chi2_per_dof.max(1.0);
    let sigma = |i: usize| {
        out.covariance
            .as_ref()
            .map_or(f64::INFINITY, |c| (c[(i, i)] * inflate).sqrt())
    };
    Ok(FreeExponentFit {
        amplitude: out.params[0],
        d0_hat: out.params[1],
        d0_sigma: sigma(1),
        exponent: out.params[2],
        exponent_sigma: sigma(2),
        chi2_per_dof,
    })
}
