//! Overestimation of the distance-only term when a single compensation
//! voltage is used while the CPD drifts with distance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{fit_grid, CalibrationProfiles};
use crate::forward::{electrostatic_curvature, fluct_total};
use crate::model::{MeasurementGrid, Scenario};

/// Curvature, CPD and true distance-only term at one absolute separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasPoint {
    pub d: f64,
    pub k: f64,
    pub v_m: f64,
    pub fluct_true: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasRow {
    pub d: f64,
    pub bias: f64,
    pub fluct_true: f64,
    /// bias / fluct_true; `None` when fluct_true ≤ 0.
    pub relative_overestimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCurve {
    pub v_const: f64,
    pub rows: Vec<BiasRow>,
}

/// bias(d) = k(d)·(V_m(d) − V_const)².
pub fn constant_cpd_bias(points: &[BiasPoint], v_const: f64) -> Result<BiasCurve> {
    if !v_const.is_finite() {
        return Err(Error::InvalidInput("V_const must be finite".into()));
    }
    let rows = points
        .iter()
        .map(|p| {
            if !(p.k > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "bias: curvature must be > 0 at d = {:e}",
                    p.d
                )));
            }
            let dv = p.v_m - v_const;
            let bias = p.k * dv * dv;
            Ok(BiasRow {
                d: p.d,
                bias,
                fluct_true: p.fluct_true,
                relative_overestimate: (p.fluct_true > 0.0).then(|| bias / p.fluct_true),
            })
        })
        .collect::<Result<_>>()?;
    Ok(BiasCurve { v_const, rows })
}

/// Ground-truth bias inputs at the scenario's scheduled distances.
pub fn bias_points_from_scenario(scenario: &Scenario) -> Result<Vec<BiasPoint>> {
    let geometry = scenario.geometry()?;
    let gamma = scenario.dissipation.map(|p| p.gamma);
    scenario
        .d_r_schedule
        .iter()
        .map(|&d_r| {
            let d = scenario.separation(d_r);
            Ok(BiasPoint {
                d,
                k: electrostatic_curvature(scenario.mode, d, &geometry, gamma)?,
                v_m: scenario.cpd.evaluate(d)?,
                fluct_true: fluct_total(scenario, d)?,
            })
        })
        .collect()
}

/// Bias inputs from extracted profiles, at d = d0 − d_r. The minima-path
/// fluct column stands in for the true distance-only term.
pub fn bias_points_from_profiles(
    profiles: &CalibrationProfiles,
    d0: f64,
) -> Result<Vec<BiasPoint>> {
    profiles
        .rows
        .iter()
        .map(|r| {
            if !(r.d_r < d0) {
                return Err(Error::InvalidInput(format!(
                    "d_r = {:e} m is not below d0 = {d0:e} m",
                    r.d_r
                )));
            }
            Ok(BiasPoint {
                d: d0 - r.d_r,
                k: r.k,
                v_m: r.v_m,
                fluct_true: r.fluct,
            })
        })
        .collect()
}

/// Observable at a fixed compensation voltage for each distance, as
/// (d_r, value). Uses the measured cell when `v_const` is on the voltage
/// schedule, otherwise the fitted parabola at `v_const`.
pub fn fluct_at_fixed_voltage(grid: &MeasurementGrid, v_const: f64) -> Result<Vec<(f64, f64)>> {
    let fits = fit_grid(grid)?;
    Ok(fits
        .iter()
        .map(|fit| {
            let measured = grid
                .rows()
                .iter()
                .find(|r| r.d_r == fit.d_r && r.voltage == v_const)
                .map(|r| r.value);
            (fit.d_r, measured.unwrap_or_else(|| fit.evaluate(v_const)))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CpdProfile, ForceComponents, Mode, NoiseModel};

    fn scenario(cpd: CpdProfile) -> Scenario {
        Scenario {
            mode: Mode::Static,
            sphere_radius: 1e-4,
            cpd,
            forces: ForceComponents::default(),
            d0_true: 2e-6,
            d_r_schedule: (0..12).map(|i| i as f64 * 1.5e-7).collect(),
            voltage_schedule: vec![-0.2, 0.0, 0.2, 0.4, 0.6],
            noise: NoiseModel::default(),
            rng_seed: 1,
            oscillator: None,
            dissipation: None,
        }
    }

    #[test]
    fn constant_profile_has_no_bias() {
        let s = scenario(CpdProfile::Constant { v0: 0.3 });
        let curve = constant_cpd_bias(&bias_points_from_scenario(&s).unwrap(), 0.3).unwrap();
        assert!(curve.rows.iter().all(|r| r.bias == 0.0));
    }

    #[test]
    fn bias_example_at_100nm() {
        // k = πRε₀/d at R = 100 µm, d = 100 nm; ΔV = 10 mV
        let k = std::f64::consts::PI * 1e-4 * crate::constants::VACUUM_PERMITTIVITY / 1e-7;
        let p = BiasPoint {
            d: 1e-7,
            k,
            v_m: 0.31,
            fluct_true: 1e-12,
        };
        let curve = constant_cpd_bias(&[p], 0.3).unwrap();
        assert!((curve.rows[0].bias / 2.7816e-12 - 1.0).abs() < 1e-4);
        assert!(curve.rows[0].relative_overestimate.is_some());
        let zero = BiasPoint {
            fluct_true: 0.0,
            ..p
        };
        assert!(constant_cpd_bias(&[zero], 0.3).unwrap().rows[0]
            .relative_overestimate
            .is_none());
    }

    #[test]
    fn drift_bias_vanishes_only_at_matched_distance() {
        let s = scenario(CpdProfile::LogDrift {
            v0: 0.1,
            slope: 0.02,
            d_ref: 1e-6,
        });
        let points = bias_points_from_scenario(&s).unwrap();
        let star = 4;
        let curve = constant_cpd_bias(&points, points[star].v_m).unwrap();
        for (i, row) in curve.rows.iter().enumerate() {
            if i == star {
                assert_eq!(row.bias, 0.0);
            } else {
                assert!(row.bias > 0.0);
            }
        }
    }
}
