//! Forward physics: sphere-plane capacitance, electrostatic parabola
//! curvatures, distance-only forces, and noisy grid synthesis.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::constants::{casimir_pfa_prefactor, VACUUM_PERMITTIVITY};
use crate::error::{Error, Result};
use crate::model::{Geometry, GridRow, MeasurementGrid, Mode, OscillatorParams, Scenario};

/// Sphere-plane capacitance C(d) = 2πRε₀ ln(R/d), F.
pub fn capacitance(d: f64, geometry: &Geometry) -> Result<f64> {
    geometry.check_separation(d)?;
    let r = geometry.sphere_radius();
    Ok(2.0 * PI * r * VACUUM_PERMITTIVITY * (r / d).ln())
}

/// (C′, C″) = (−2πRε₀/d, 2πRε₀/d²).
pub fn capacitance_derivatives(d: f64, geometry: &Geometry) -> Result<(f64, f64)> {
    geometry.check_separation(d)?;
    let scale = 2.0 * PI * geometry.sphere_radius() * VACUUM_PERMITTIVITY;
    Ok((-scale / d, scale / (d * d)))
}

/// Parabola curvature of the electric term in the given mode.
///
/// Static: ½|C′| = πRε₀/d. Gradient: ½|C″| = πRε₀/d². Dissipation: γC².
pub fn electrostatic_curvature(
    mode: Mode,
    d: f64,
    geometry: &Geometry,
    gamma: Option<f64>,
) -> Result<f64> {
    match mode {
        Mode::Static => {
            let (c1, _) = capacitance_derivatives(d, geometry)?;
            Ok(0.5 * c1.abs())
        }
        Mode::Gradient => {
            let (_, c2) = capacitance_derivatives(d, geometry)?;
            Ok(0.5 * c2.abs())
        }
        Mode::Dissipation => {
            let gamma = gamma.ok_or(Error::MissingGamma)?;
            let c = capacitance(d, geometry)?;
            Ok(gamma * c * c)
        }
    }
}

/// Electric term k(d)·(V − V_m(d))² of the scenario's mode.
pub fn electric_observable(scenario: &Scenario, d: f64, voltage: f64) -> Result<f64> {
    let geometry = scenario.geometry()?;
    let gamma = scenario.dissipation.map(|p| p.gamma);
    let k = electrostatic_curvature(scenario.mode, d, &geometry, gamma)?;
    let dv = voltage - scenario.cpd.evaluate(d)?;
    Ok(k * dv * dv)
}

/// Ideal-conductor proximity-force Casimir force π³ħcR/(360 d³), N (attractive, positive).
pub fn casimir_force_pfa(d: f64, geometry: &Geometry) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Separation {
            d,
            radius: geometry.sphere_radius(),
        });
    }
    Ok(casimir_pfa_prefactor() * geometry.sphere_radius() / (d * d * d))
}

/// Generic power law A/dⁿ, N.
pub fn auxiliary_force(d: f64, amplitude: f64, exponent: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidInput(format!(
            "separation must be > 0, got {d:e}"
        )));
    }
    if !(amplitude >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "amplitude must be >= 0, got {amplitude:e}"
        )));
    }
    Ok(amplitude / d.powf(exponent))
}

/// |d/dd (A/dⁿ)| = nA/dⁿ⁺¹.
fn auxiliary_gradient(d: f64, amplitude: f64, exponent: f64) -> Result<f64> {
    Ok(exponent * auxiliary_force(d, amplitude, exponent)? / d)
}

/// Distance-only term of the scenario's mode at absolute separation `d`.
///
/// Static: F_cas + F_surf + F_exotic. Gradient: the magnitude of the
/// analytic d-derivative of that sum. Dissipation: the configured background.
pub fn fluct_total(scenario: &Scenario, d: f64) -> Result<f64> {
    let geometry = scenario.geometry()?;
    let forces = &scenario.forces;
    match scenario.mode {
        Mode::Static => {
            let mut total = auxiliary_force(d, forces.surf_amplitude, forces.surf_exponent)?
                + auxiliary_force(d, forces.exotic_amplitude, forces.exotic_exponent)?;
            if forces.casimir {
                total += casimir_force_pfa(d, &geometry)?;
            }
            Ok(total)
        }
        Mode::Gradient => {
            let mut total = auxiliary_gradient(d, forces.surf_amplitude, forces.surf_exponent)?
                + auxiliary_gradient(d, forces.exotic_amplitude, forces.exotic_exponent)?;
            if forces.casimir {
                total += 3.0 * casimir_force_pfa(d, &geometry)? / d;
            }
            Ok(total)
        }
        Mode::Dissipation => match scenario.dissipation {
            Some(p) => auxiliary_force(d, p.background_amplitude, p.background_exponent),
            None => Ok(0.0),
        },
    }
}

/// Noiseless observable at actuator reading `d_r` and voltage `voltage`.
pub fn noiseless_observable(scenario: &Scenario, d_r: f64, voltage: f64) -> Result<f64> {
    let d = scenario.separation(d_r);
    Ok(electric_observable(scenario, d, voltage)? + fluct_total(scenario, d)?)
}

/// Frequency-domain view of a force gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyShift {
    /// Δν² = ν₀² − ν²_meas, Hz².
    pub delta_nu_sq: f64,
    /// Exact Δν = ν₀ − ν_meas, Hz.
    pub delta_nu: f64,
    /// Small-shift approximation Δν²/(2ν₀), Hz.
    pub delta_nu_approx: f64,
}

/// Converts a gradient G (N/m) into the resonance shift of a harmonic
/// oscillator, Δν² = G/(4π²m_eff).
pub fn gradient_to_frequency_shift(
    gradient: f64,
    osc: &OscillatorParams,
) -> Result<FrequencyShift> {
    osc.validate()?;
    if !(gradient >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "gradient must be >= 0, got {gradient:e}"
        )));
    }
    let delta_nu_sq = gradient / (4.0 * PI * PI * osc.m_eff);
    let nu_meas_sq = osc.nu0 * osc.nu0 - delta_nu_sq;
    if !(nu_meas_sq > 0.0) {
        return Err(Error::FrequencyCollapse { gradient });
    }
    Ok(FrequencyShift {
        delta_nu_sq,
        delta_nu: osc.nu0 - nu_meas_sq.sqrt(),
        delta_nu_approx: delta_nu_sq / (2.0 * osc.nu0),
    })
}

/// Short hex digest identifying a scenario, used as grid provenance.
pub fn scenario_digest(scenario: &Scenario) -> String {
    let json = serde_json::to_vec(scenario).expect("scenario serializes");
    let digest = Sha256::digest(&json);
    format!("scenario:{}", hex::encode(&digest[..8]))
}

/// Synthesizes the noisy grid for a scenario.
///
/// Each cell draws its Gaussian deviate from its own ChaCha stream, keyed by
/// (mode, cell index), so the output does not depend on evaluation order.
/// Cells whose noise sigma is zero are stored noiseless with a unit sigma.
pub fn synthesize_grid(scenario: &Scenario) -> Result<MeasurementGrid> {
    scenario.validate()?;
    let n_v = scenario.voltage_schedule.len();
    let cells: Vec<(usize, f64, f64)> = scenario
        .d_r_schedule
        .iter()
        .enumerate()
        .flat_map(|(i, &d_r)| {
            scenario
                .voltage_schedule
                .iter()
                .enumerate()
                .map(move |(j, &v)| (i * n_v + j, d_r, v))
        })
        .collect();

    let rows = cells
        .par_iter()
        .map(|&(cell, d_r, voltage)| {
            let clean = noiseless_observable(scenario, d_r, voltage)?;
            let sigma = scenario.noise.sigma_for(clean);
            let (value, sigma) = if sigma > 0.0 {
                (clean + sigma * cell_deviate(scenario, cell), sigma)
            } else {
                (clean, 1.0)
            };
            Ok(GridRow {
                d_r,
                voltage,
                value,
                sigma,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    MeasurementGrid::new(scenario.mode, rows, scenario_digest(scenario))
}

fn cell_deviate(scenario: &Scenario, cell: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    rng.set_stream((scenario.mode.stream_tag() << 56) | cell as u64);
    StandardNormal.sample(&mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CpdProfile, DissipationParams, ForceComponents, NoiseModel};
    use proptest::prelude::*;

    fn geometry() -> Geometry {
        Geometry::new(1e-4).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    pub(crate) fn scenario(mode: Mode) -> Scenario {
        Scenario {
            mode,
            sphere_radius: 1e-4,
            cpd: CpdProfile::Constant { v0: 0.3 },
            forces: ForceComponents::default(),
            d0_true: 2e-6,
            d_r_schedule: (0..10).map(|i| i as f64 * 1.5e-7).collect(),
            voltage_schedule: vec![-0.3, 0.0, 0.3, 0.6, 0.9],
            noise: NoiseModel::Absolute { sigma: 0.0 },
            rng_seed: 7,
            oscillator: None,
            dissipation: Some(DissipationParams {
                gamma: 1e20,
                background_amplitude: 0.0,
                background_exponent: 0.0,
            }),
        }
    }

    #[test]
    fn capacitance_examples() {
        let g = geometry();
        assert!(capacitance(1e-4, &g).is_err());
        // 2π·8.8541878128e-12·1e-4·ln(100)
        let c = capacitance(1e-6, &g).unwrap();
        assert!(rel(c, 2.5619714e-14) < 1e-7, "{c}");
        let d = 3e-7;
        let diff = capacitance(d / 2.0, &g).unwrap() - capacitance(d, &g).unwrap();
        let expected = 2.0 * PI * 1e-4 * VACUUM_PERMITTIVITY * 2f64.ln();
        assert!(rel(diff, expected) < 1e-12);
    }

    #[test]
    fn capacitance_derivative_matches_finite_difference() {
        let g = geometry();
        let (c1, c2) = capacitance_derivatives(1e-6, &g).unwrap();
        assert!(rel(c1, -5.5632503e-9) < 1e-7, "{c1}");
        assert!(rel(c2 * 1e-6, -c1) < 1e-15);
        let h = 1e-10;
        let fd =
            (capacitance(1e-6 + h, &g).unwrap() - capacitance(1e-6 - h, &g).unwrap()) / (2.0 * h);
        assert!(rel(fd, c1) < 1e-6, "fd {fd} vs {c1}");
    }

    #[test]
    fn curvature_examples() {
        let g = geometry();
        let ks = electrostatic_curvature(Mode::Static, 1e-6, &g, None).unwrap();
        assert!(rel(ks, 2.7816e-9) < 1e-4, "{ks}");
        let kg = electrostatic_curvature(Mode::Gradient, 1e-6, &g, None).unwrap();
        assert!(rel(kg, 2.7816e-3) < 1e-4, "{kg}");
        let ratio_s = ks / electrostatic_curvature(Mode::Static, 2e-6, &g, None).unwrap();
        let ratio_g = kg / electrostatic_curvature(Mode::Gradient, 2e-6, &g, None).unwrap();
        assert!((ratio_s - 2.0).abs() < 1e-14);
        assert!((ratio_g - 4.0).abs() < 1e-14);
        assert!(matches!(
            electrostatic_curvature(Mode::Dissipation, 1e-6, &g, None),
            Err(Error::MissingGamma)
        ));
    }

    #[test]
    fn electric_observable_examples() {
        let s = scenario(Mode::Static);
        assert_eq!(electric_observable(&s, 1e-6, 0.3).unwrap(), 0.0);
        let k = electrostatic_curvature(Mode::Static, 1e-6, &geometry(), None).unwrap();
        let v = electric_observable(&s, 1e-6, 0.4).unwrap();
        assert!(rel(v, k * 0.01) < 1e-12);
        assert!(rel(v, 2.7816e-11) < 1e-4);
        let lo = electric_observable(&s, 1e-6, 0.3 - 0.17).unwrap();
        let hi = electric_observable(&s, 1e-6, 0.3 + 0.17).unwrap();
        assert!(rel(lo, hi) < 1e-14);
    }

    #[test]
    fn casimir_examples() {
        let g = geometry();
        let f = casimir_force_pfa(1e-6, &g).unwrap();
        assert!(rel(f, 2.7230e-13) < 1e-3, "{f}");
        assert!(rel(f / casimir_force_pfa(2e-6, &g).unwrap(), 8.0) < 1e-14);
        let g2 = Geometry::new(2e-4).unwrap();
        assert!(rel(casimir_force_pfa(1e-6, &g2).unwrap(), 2.0 * f) < 1e-15);
        assert!(casimir_force_pfa(0.0, &g).is_err());
    }

    #[test]
    fn auxiliary_examples() {
        assert_eq!(auxiliary_force(1e-7, 3.0, 0.0).unwrap(), 3.0);
        assert!(rel(auxiliary_force(1e-6, 1e-25, 2.0).unwrap(), 1e-13) < 1e-12);
        assert_eq!(auxiliary_force(1e-6, 0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn fluct_total_examples() {
        let mut s = scenario(Mode::Static);
        s.forces.casimir = false;
        assert_eq!(fluct_total(&s, 1e-6).unwrap(), 0.0);
        s.forces.casimir = true;
        let f = fluct_total(&s, 1e-6).unwrap();
        assert_eq!(f, casimir_force_pfa(1e-6, &geometry()).unwrap());
        s.mode = Mode::Gradient;
        let g = fluct_total(&s, 1e-6).unwrap();
        assert!(rel(g, 3.0 * f / 1e-6) < 1e-14);
        assert!(rel(g, 8.169e-7) < 1e-3);
    }

    #[test]
    fn frequency_shift_examples() {
        let osc = OscillatorParams {
            m_eff: 1e-11,
            nu0: 3e5,
        };
        let zero = gradient_to_frequency_shift(0.0, &osc).unwrap();
        assert_eq!((zero.delta_nu_sq, zero.delta_nu), (0.0, 0.0));
        let s = gradient_to_frequency_shift(1e-3, &osc).unwrap();
        assert!(rel(s.delta_nu_sq, 2.533029e6) < 1e-6, "{}", s.delta_nu_sq);
        assert!((s.delta_nu - 4.2217).abs() < 1e-3, "{}", s.delta_nu);
        assert!(rel(s.delta_nu_approx, s.delta_nu) < 1e-4);
        assert!(gradient_to_frequency_shift(1e12, &osc).is_err());
    }

    #[test]
    fn noiseless_grid_minimum_rows_equal_fluct() {
        let s = scenario(Mode::Static);
        let grid = synthesize_grid(&s).unwrap();
        for row in grid.rows().iter().filter(|r| r.voltage == 0.3) {
            assert_eq!(row.value, fluct_total(&s, s.separation(row.d_r)).unwrap());
        }
    }

    #[test]
    fn synthesis_is_deterministic_and_unbiased() {
        let mut s = scenario(Mode::Static);
        s.d_r_schedule = (0..40).map(|i| i as f64 * 3e-8).collect();
        s.voltage_schedule = (0..25).map(|i| -0.3 + 0.05 * i as f64).collect();
        let sigma = 1e-12;
        s.noise = NoiseModel::Absolute { sigma };
        let a = synthesize_grid(&s).unwrap();
        let b = synthesize_grid(&s).unwrap();
        assert_eq!(a, b);
        let n = a.rows().len() as f64;
        let mean = a
            .rows()
            .iter()
            .map(|r| r.value - noiseless_observable(&s, r.d_r, r.voltage).unwrap())
            .sum::<f64>()
            / n;
        assert!(mean.abs() < 5.0 * sigma / n.sqrt(), "mean {mean:e}");
        s.rng_seed += 1;
        assert_ne!(a, synthesize_grid(&s).unwrap());
    }

    #[test]
    fn synthesis_rejects_schedule_past_contact() {
        let mut s = scenario(Mode::Static);
        s.d_r_schedule.push(2.5e-6);
        assert!(synthesize_grid(&s).is_err());
    }

    proptest! {
        #[test]
        fn electric_term_is_exact_parabola(
            mode_idx in 0usize..3,
            d in 1e-8f64..5e-6,
            dv in -2.0f64..2.0,
        ) {
            let s = scenario(Mode::ALL[mode_idx]);
            let vm = s.cpd.evaluate(d).unwrap();
            let gamma = s.dissipation.map(|p| p.gamma);
            let k = electrostatic_curvature(s.mode, d, &geometry(), gamma).unwrap();
            let v = vm + dv;
            let dv = v - vm;
            let lhs = electric_observable(&s, d, v).unwrap()
                - electric_observable(&s, d, vm).unwrap();
            let rhs = k * dv * dv;
            prop_assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * rhs);
        }
    }
}
