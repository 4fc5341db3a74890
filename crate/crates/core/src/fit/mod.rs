//! Inverse pipeline: per-distance parabola fits, calibration profiles and
//! power-law distance calibration.

mod nls;
mod parabola;
mod power_law;

use rayon::prelude::*;

pub use parabola::{fit_parabola, ParabolaPoint};
pub use power_law::{fit_free_exponent, fit_power_law, FreeExponentFit};

use crate::error::{Error, Result};
use crate::model::{MeasurementGrid, Mode, ParabolaFit};

/// One distance of a calibration profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub d_r: f64,
    pub k: f64,
    pub sigma_k: f64,
    pub v_m: f64,
    pub sigma_v: f64,
    pub fluct: f64,
    pub sigma_f: f64,
}

impl From<&ParabolaFit> for ProfileRow {
    fn from(fit: &ParabolaFit) -> Self {
        Self {
            d_r: fit.d_r,
            k: fit.curvature,
            sigma_k: fit.sigma_curvature(),
            v_m: fit.v_min,
            sigma_v: fit.sigma_v_min(),
            fluct: fit.minimum,
            sigma_f: fit.sigma_minimum(),
        }
    }
}

/// k(d_r), V_m(d_r) and fluct(d_r) of one mode, ordered by d_r.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationProfiles {
    pub mode: Mode,
    pub rows: Vec<ProfileRow>,
}

impl CalibrationProfiles {
    pub fn new(mode: Mode, rows: Vec<ProfileRow>) -> Result<Self> {
        if rows.windows(2).any(|w| !(w[1].d_r > w[0].d_r)) {
            return Err(Error::InvalidInput(
                "profile rows must be strictly increasing in d_r".into(),
            ));
        }
        if let Some(row) = rows.iter().find(|r| !(r.k > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "profile curvature must be > 0 (d_r = {:e})",
                row.d_r
            )));
        }
        Ok(Self { mode, rows })
    }

    pub fn d_r(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.d_r).collect()
    }

    pub fn max_d_r(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.d_r)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Fits one parabola per distance of the grid, in ascending d_r order.
pub fn fit_grid(grid: &MeasurementGrid) -> Result<Vec<ParabolaFit>> {
    grid.distances()
        .par_iter()
        .map(|&d_r| {
            let points: Vec<ParabolaPoint> = grid
                .rows()
                .iter()
                .filter(|r| r.d_r == d_r)
                .map(|r| ParabolaPoint {
                    voltage: r.voltage,
                    value: r.value,
                    sigma: r.sigma,
                })
                .collect();
            fit_parabola(&points)
                .map(|fit| ParabolaFit { d_r, ..fit })
                .map_err(|e| Error::AtDistance {
                    d_r,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Groups the grid by d_r and assembles the three parabola-parameter profiles.
pub fn extract_profiles(grid: &MeasurementGrid) -> Result<CalibrationProfiles> {
    let fits = fit_grid(grid)?;
    CalibrationProfiles::new(grid.mode(), fits.iter().map(ProfileRow::from).collect())
}

/// d = d₀ − d_r elementwise.
pub fn absolute_distances(d_r: &[f64], d0: f64) -> Result<Vec<f64>> {
    d_r.iter()
        .map(|&x| {
            if x < d0 {
                Ok(d0 - x)
            } else {
                Err(Error::InvalidInput(format!(
                    "d_r = {x:e} m is not below d0 = {d0:e} m"
                )))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absolute_distance_examples() {
        assert_eq!(absolute_distances(&[0.0], 2e-6).unwrap(), vec![2e-6]);
        let d = absolute_distances(&[0.0, 1.5e-6], 2e-6).unwrap();
        assert!((d[1] - 0.5e-6).abs() < 1e-21);
        assert!(absolute_distances(&[2.5e-6], 2e-6).is_err());
    }
}
