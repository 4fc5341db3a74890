use std::f64::consts::PI;

use parabolib::analysis::{decompose_fluct, FluctSample};
use parabolib::fit::{extract_profiles, fit_power_law};
use parabolib::forward::{casimir_force_pfa, synthesize_grid};
use parabolib::io::tables::{profiles_from_str, profiles_to_string};
use parabolib::{
    CpdProfile, DissipationParams, ForceComponents, Geometry, Mode, NoiseModel, PowerLaw, Scenario,
};

const EPS0: f64 = 8.854_187_812_8e-12;

fn scenario(mode: Mode, cpd: CpdProfile, noise: NoiseModel) -> Scenario {
    Scenario {
        mode,
        sphere_radius: 1e-4,
        cpd,
        forces: ForceComponents::default(),
        d0_true: 2e-6,
        d_r_schedule: (0..20).map(|i| i as f64 * 1.5e-6 / 19.0).collect(),
        voltage_schedule: vec![-0.6, -0.3, 0.0, 0.3, 0.6, 0.9, 1.2],
        noise,
        rng_seed: 3,
        oscillator: None,
        dissipation: None,
    }
}

#[test]
fn constant_cpd_gives_flat_v_m() {
    let sc = scenario(
        Mode::Static,
        CpdProfile::Constant { v0: 0.3 },
        NoiseModel::default(),
    );
    let profiles = extract_profiles(&synthesize_grid(&sc).unwrap()).unwrap();
    for r in &profiles.rows {
        assert!((r.v_m - 0.3).abs() < 1e-10, "{}", r.v_m);
    }
}

#[test]
fn log_drift_v_m_within_three_sigma() {
    let cpd = CpdProfile::LogDrift {
        v0: 0.25,
        slope: 0.02,
        d_ref: 1e-6,
    };
    let sc = scenario(
        Mode::Static,
        cpd.clone(),
        NoiseModel::Relative {
            fraction: 0.01,
            floor: 0.0,
        },
    );
    let profiles = extract_profiles(&synthesize_grid(&sc).unwrap()).unwrap();
    let outside = profiles
        .rows
        .iter()
        .filter(|r| {
            let truth = cpd.evaluate(sc.separation(r.d_r)).unwrap();
            (r.v_m - truth).abs() > 3.0 * r.sigma_v
        })
        .count();
    // 20 independent fits; allow one 3σ excursion
    assert!(outside <= 1, "{outside} distances outside 3σ");
}

#[test]
fn casimir_only_fluct_is_pfa_force() {
    let sc = scenario(
        Mode::Static,
        CpdProfile::Constant { v0: -0.1 },
        NoiseModel::default(),
    );
    let g = Geometry::new(sc.sphere_radius).unwrap();
    let profiles = extract_profiles(&synthesize_grid(&sc).unwrap()).unwrap();
    for r in &profiles.rows {
        let truth = casimir_force_pfa(sc.separation(r.d_r), &g).unwrap();
        assert!((r.fluct / truth - 1.0).abs() < 1e-8);
    }
}

#[test]
fn gradient_mode_recovers_beta_and_d0() {
    let sc = scenario(
        Mode::Gradient,
        CpdProfile::Constant { v0: 0.3 },
        NoiseModel::default(),
    );
    let g = Geometry::new(sc.sphere_radius).unwrap();
    let profiles = extract_profiles(&synthesize_grid(&sc).unwrap()).unwrap();
    let fit = fit_power_law(&profiles, PowerLaw::InverseSquare, &g).unwrap();
    assert!((fit.d0_hat / 2e-6 - 1.0).abs() < 1e-8);
    assert!((fit.amplitude / (PI * 1e-4 * EPS0) - 1.0).abs() < 1e-6);
}

#[test]
fn dissipation_mode_recovers_gamma() {
    let mut sc = scenario(
        Mode::Dissipation,
        CpdProfile::Constant { v0: 0.3 },
        NoiseModel::default(),
    );
    sc.dissipation = Some(DissipationParams {
        gamma: 2e20,
        background_amplitude: 0.0,
        background_exponent: 0.0,
    });
    let g = Geometry::new(sc.sphere_radius).unwrap();
    let profiles = extract_profiles(&synthesize_grid(&sc).unwrap()).unwrap();
    let fit = fit_power_law(&profiles, PowerLaw::CapacitanceSquared, &g).unwrap();
    assert!((fit.d0_hat / 2e-6 - 1.0).abs() < 1e-6, "{}", fit.d0_hat);
    assert!(
        (fit.amplitude / 2e20 - 1.0).abs() < 1e-6,
        "{}",
        fit.amplitude
    );
}

#[test]
fn noisy_static_and_gradient_agree_on_d0() {
    let noise = NoiseModel::Relative {
        fraction: 0.01,
        floor: 0.0,
    };
    let g = Geometry::new(1e-4).unwrap();
    let mut agree = 0;
    for seed in 0..20 {
        let mut fits = Vec::new();
        for (mode, law) in [
            (Mode::Static, PowerLaw::InverseLinear),
            (Mode::Gradient, PowerLaw::InverseSquare),
        ] {
            let mut sc = scenario(mode, CpdProfile::Constant { v0: 0.3 }, noise);
            sc.rng_seed = seed;
            let profiles = extract_profiles(&synthesize_grid(&sc).unwrap()).unwrap();
            fits.push(fit_power_law(&profiles, law, &g).unwrap());
        }
        let z = (fits[0].d0_hat - fits[1].d0_hat).abs() / fits[0].d0_sigma.hypot(fits[1].d0_sigma);
        if z < 3.0 {
            agree += 1;
        }
    }
    assert!(agree >= 19, "agreement in {agree}/20 seeds");
}

#[test]
fn decomposition_separates_casimir_and_patch_terms() {
    let mut sc = scenario(
        Mode::Static,
        CpdProfile::Constant { v0: 0.3 },
        NoiseModel::default(),
    );
    sc.forces.surf_amplitude = 5e-26;
    sc.forces.surf_exponent = 2.0;
    let g = Geometry::new(sc.sphere_radius).unwrap();
    let profiles = extract_profiles(&synthesize_grid(&sc).unwrap()).unwrap();
    let samples: Vec<_> = profiles
        .rows
        .iter()
        .map(|r| FluctSample {
            d: sc.separation(r.d_r),
            value: r.fluct,
            sigma: r.fluct * 1e-3,
        })
        .collect();
    let dec = decompose_fluct(&samples, &[3.0, 2.0]).unwrap();
    let cas = casimir_force_pfa(1.0, &g).unwrap();
    assert!(
        (dec.amplitudes[0] / cas - 1.0).abs() < 1e-6,
        "{:?}",
        dec.amplitudes
    );
    assert!(
        (dec.amplitudes[1] / 5e-26 - 1.0).abs() < 1e-6,
        "{:?}",
        dec.amplitudes
    );
}

#[test]
fn profiles_csv_round_trips() {
    let sc = scenario(
        Mode::Static,
        CpdProfile::Constant { v0: 0.3 },
        NoiseModel::Relative {
            fraction: 0.01,
            floor: 0.0,
        },
    );
    let profiles = extract_profiles(&synthesize_grid(&sc).unwrap()).unwrap();
    let text = profiles_to_string(&profiles).unwrap();
    let back = profiles_from_str(&text).unwrap();
    assert_eq!(back.rows, profiles.rows);
    assert_eq!(back.mode, Mode::Static);
}
