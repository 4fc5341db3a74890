//! simulate → fit → analyze, writing every intermediate artifact.
//!
//! Layout under the output directory:
//!
//! ```text
//! summary.json            recovered parameters, uncertainties and truth
//! consistency.json        cross-mode report (two or more modes)
//! <mode>/grid.csv         synthetic measurement grid
//! <mode>/profiles.csv     k, V_m, fluct per distance
//! <mode>/powerlaw.json    distance calibration
//! <mode>/bias.csv         constant-CPD overestimate
//! <mode>/fixed_voltage.csv  fluct on the minima path vs at fixed V
//! <mode>/parabolas.csv    measured and fitted parabolas at a few distances
//! <mode>/frequency.csv    gradient grid as frequency shifts (gradient mode)
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ModeRun, RunConfig};
use super::float_ext;
use super::tables::{self, write_text};
use super::{to_json, write_power_law};
use crate::analysis::{
    bias_points_from_profiles, constant_cpd_bias, cross_mode_consistency, decompose_fluct,
    fluct_at_fixed_voltage, ConsistencyReport, Decomposition, FluctSample, ModeCalibration,
};
use crate::constants::casimir_pfa_prefactor;
use crate::error::Error;
use crate::fit::{fit_grid, fit_power_law, CalibrationProfiles, ProfileRow};
use crate::forward::{gradient_to_frequency_shift, synthesize_grid};
use crate::model::{Mode, PowerLawFit, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Simulate,
    FitParabola,
    FitPowerLaw,
    Bias,
    DecomposeFluct,
    Consistency,
    Write,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Simulate => "simulate",
            Stage::FitParabola => "fit_parabola",
            Stage::FitPowerLaw => "fit_power_law",
            Stage::Bias => "bias",
            Stage::DecomposeFluct => "decompose_fluct",
            Stage::Consistency => "consistency",
            Stage::Write => "write",
        }
    }

    /// Process exit status for a failure in this stage.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config | Stage::Simulate => 2,
            Stage::Write => 4,
            _ => 3,
        }
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub mode: Option<Mode>,
    pub source: Error,
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self.source {
            Error::Io(_) => 4,
            _ => self.stage.exit_code(),
        }
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            Some(mode) => write!(
                f,
                "stage {} failed ({mode} mode): {}",
                self.stage.name(),
                self.source
            ),
            None => write!(f, "stage {} failed: {}", self.stage.name(), self.source),
        }
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

trait StageExt<T> {
    fn stage(self, stage: Stage, mode: Option<Mode>) -> Result<T, PipelineError>;
}

impl<T> StageExt<T> for crate::error::Result<T> {
    fn stage(self, stage: Stage, mode: Option<Mode>) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError {
            stage,
            mode,
            source,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctComponent {
    pub name: &'static str,
    pub exponent: f64,
    /// Force amplitude A of A/dⁿ (N·mⁿ), or the dissipation background amplitude.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truth {
    pub d0_true: f64,
    pub amplitude: f64,
    pub v_m_truth: Vec<f64>,
    pub fluct_components: Vec<FluctComponent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionSummary {
    /// Exponents of the fitted basis in the mode's own observable.
    pub fit: Decomposition,
    /// Basis translated back to force laws A/dⁿ.
    pub force_exponents: Vec<f64>,
    pub force_amplitudes: Vec<f64>,
    pub force_sigmas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub provenance: String,
    pub truth: Truth,
    pub power_law: PowerLawFit,
    #[serde(with = "float_ext")]
    pub d0_pull: f64,
    #[serde(with = "float_ext")]
    pub amplitude_pull: f64,
    pub v_m_mean: f64,
    pub v_m_max_abs_error: f64,
    pub v_const: f64,
    pub max_bias: f64,
    pub decomposition: DecompositionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub format_version: &'static str,
    pub modes: Vec<ModeSummary>,
    pub consistency: Option<ConsistencyReport>,
}

impl Summary {
    pub fn mode(&self, mode: Mode) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

/// Runs every configured mode, then the cross-mode checks, writing all
/// artifacts under `config.output_dir`. Output is a pure function of the
/// configuration.
pub fn run_pipeline(config: &RunConfig) -> Result<Summary, PipelineError> {
    config.validate().stage(Stage::Config, None)?;
    let out = config.output_dir.clone();
    let mut summaries = Vec::new();
    let mut calibrations = Vec::new();
    for run in &config.modes {
        let (summary, calibration) = run_mode(config, run, &out)?;
        summaries.push(summary);
        calibrations.push(calibration);
    }

    let consistency = if calibrations.len() >= 2 {
        let report = cross_mode_consistency(&calibrations, config.analysis.z_threshold)
            .stage(Stage::Consistency, None)?;
        write_text(&out.join("consistency.json"), &to_json(&report)).stage(Stage::Write, None)?;
        Some(report)
    } else {
        None
    };

    let summary = Summary {
        format_version: "parabolib-summary v1",
        modes: summaries,
        consistency,
    };
    write_text(&out.join("summary.json"), &to_json(&summary)).stage(Stage::Write, None)?;
    Ok(summary)
}

pub(crate) fn mode_dir(out: &Path, mode: Mode) -> PathBuf {
    out.join(mode.as_str())
}

fn run_mode(
    config: &RunConfig,
    run: &ModeRun,
    out: &Path,
) -> Result<(ModeSummary, ModeCalibration), PipelineError> {
    let mode = Some(run.mode);
    let scenario = config.scenario_for(run);
    scenario.validate().stage(Stage::Config, mode)?;
    let geometry = scenario.geometry().stage(Stage::Config, mode)?;
    let dir = mode_dir(out, run.mode);

    let grid = synthesize_grid(&scenario).stage(Stage::Simulate, mode)?;
    tables::write_grid(&grid, &dir.join("grid.csv")).stage(Stage::Write, mode)?;

    let fits = fit_grid(&grid).stage(Stage::FitParabola, mode)?;
    let profiles = CalibrationProfiles::new(run.mode, fits.iter().map(ProfileRow::from).collect())
        .stage(Stage::FitParabola, mode)?;
    tables::write_profiles(&profiles, &dir.join("profiles.csv")).stage(Stage::Write, mode)?;

    let plot_idx = plot_indices(fits.len(), config.analysis.parabola_plot_count);
    let plotted: Vec<_> = plot_idx.iter().map(|&i| fits[i]).collect();
    write_text(
        &dir.join("parabolas.csv"),
        &tables::parabolas_to_string(&grid, &plotted).stage(Stage::Write, mode)?,
    )
    .stage(Stage::Write, mode)?;

    let power_law = fit_power_law(&profiles, run.mode.curvature_law(), &geometry)
        .stage(Stage::FitPowerLaw, mode)?;
    write_power_law(&power_law, &dir.join("powerlaw.json")).stage(Stage::Write, mode)?;

    // bias of a single compensation voltage, by default the far-distance CPD
    let v_const = config
        .analysis
        .v_const
        .unwrap_or_else(|| profiles.rows[0].v_m);
    let points = bias_points_from_profiles(&profiles, power_law.d0_hat).stage(Stage::Bias, mode)?;
    let bias = constant_cpd_bias(&points, v_const).stage(Stage::Bias, mode)?;
    write_text(
        &dir.join("bias.csv"),
        &tables::bias_to_string(&bias, run.mode).stage(Stage::Write, mode)?,
    )
    .stage(Stage::Write, mode)?;
    let fixed = fluct_at_fixed_voltage(&grid, v_const).stage(Stage::Bias, mode)?;
    write_text(
        &dir.join("fixed_voltage.csv"),
        &tables::fixed_voltage_to_string(run.mode, v_const, power_law.d0_hat, &profiles, &fixed)
            .stage(Stage::Write, mode)?,
    )
    .stage(Stage::Write, mode)?;

    if let (Mode::Gradient, Some(osc)) = (run.mode, scenario.oscillator) {
        let rows = grid
            .rows()
            .iter()
            .map(|r| Ok((*r, gradient_to_frequency_shift(r.value.max(0.0), &osc)?)))
            .collect::<crate::error::Result<Vec<_>>>()
            .stage(Stage::Simulate, mode)?;
        write_text(
            &dir.join("frequency.csv"),
            &tables::frequency_to_string(&rows).stage(Stage::Write, mode)?,
        )
        .stage(Stage::Write, mode)?;
    }

    let decomposition = decompose(
        &profiles,
        power_law.d0_hat,
        run.mode,
        &config.analysis.basis_exponents,
    )
    .stage(Stage::DecomposeFluct, mode)?;

    let truth = truth_for(&scenario).stage(Stage::Config, mode)?;
    let v_m_mean = profiles.rows.iter().map(|r| r.v_m).sum::<f64>() / profiles.rows.len() as f64;
    let v_m_max_abs_error = profiles
        .rows
        .iter()
        .zip(&truth.v_m_truth)
        .map(|(r, t)| (r.v_m - t).abs())
        .fold(0.0, f64::max);
    let summary = ModeSummary {
        mode: run.mode,
        provenance: grid.provenance().to_owned(),
        d0_pull: (power_law.d0_hat - truth.d0_true) / power_law.d0_sigma,
        amplitude_pull: (power_law.amplitude - truth.amplitude) / power_law.amplitude_sigma,
        truth,
        power_law,
        v_m_mean,
        v_m_max_abs_error,
        v_const,
        max_bias: bias.rows.iter().map(|r| r.bias).fold(0.0, f64::max),
        decomposition,
    };
    Ok((
        summary,
        ModeCalibration {
            profiles,
            fit: power_law,
        },
    ))
}

fn plot_indices(n: usize, count: usize) -> Vec<usize> {
    match (n, count) {
        (0, _) | (_, 0) => Vec::new(),
        (_, 1) => vec![0],
        _ => {
            let mut idx: Vec<usize> = (0..count)
                .map(|i| ((i * (n - 1)) as f64 / (count - 1) as f64).round() as usize)
                .collect();
            idx.dedup();
            idx
        }
    }
}

/// Fits the fluct column at d = d̂₀ − d_r. A force term A/dⁿ appears in the
/// gradient observable as nA/dⁿ⁺¹, so the gradient basis is shifted by one
/// and constant force terms drop out.
fn decompose(
    profiles: &CalibrationProfiles,
    d0: f64,
    mode: Mode,
    force_exponents: &[f64],
) -> crate::error::Result<DecompositionSummary> {
    let samples: Vec<FluctSample> = profiles
        .rows
        .iter()
        .map(|r| FluctSample {
            d: d0 - r.d_r,
            value: r.fluct,
            sigma: r.sigma_f,
        })
        .collect();
    let force_exponents: Vec<f64> = match mode {
        Mode::Gradient => force_exponents
            .iter()
            .copied()
            .filter(|n| *n != 0.0)
            .collect(),
        _ => force_exponents.to_vec(),
    };
    let (basis, factor): (Vec<f64>, Vec<f64>) = match mode {
        Mode::Gradient => force_exponents.iter().map(|n| (n + 1.0, *n)).unzip(),
        _ => force_exponents.iter().map(|n| (*n, 1.0)).unzip(),
    };
    let fit = decompose_fluct(&samples, &basis)?;
    let force_amplitudes = fit
        .amplitudes
        .iter()
        .zip(&factor)
        .map(|(a, f)| a / f)
        .collect();
    let force_sigmas = fit.sigmas.iter().zip(&factor).map(|(s, f)| s / f).collect();
    Ok(DecompositionSummary {
        fit,
        force_exponents,
        force_amplitudes,
        force_sigmas,
    })
}

fn truth_for(scenario: &Scenario) -> crate::error::Result<Truth> {
    let geometry = scenario.geometry()?;
    let amplitude = match scenario.mode {
        Mode::Static | Mode::Gradient => geometry.pi_r_eps0(),
        Mode::Dissipation => scenario.dissipation.ok_or(Error::MissingGamma)?.gamma,
    };
    let mut fluct_components = Vec::new();
    match scenario.mode {
        Mode::Static | Mode::Gradient => {
            let f = &scenario.forces;
            if f.casimir {
                fluct_components.push(FluctComponent {
                    name: "casimir",
                    exponent: 3.0,
                    amplitude: casimir_pfa_prefactor() * geometry.sphere_radius(),
                });
            }
            if f.surf_amplitude > 0.0 {
                fluct_components.push(FluctComponent {
                    name: "surf",
                    exponent: f.surf_exponent,
                    amplitude: f.surf_amplitude,
                });
            }
            if f.exotic_amplitude > 0.0 {
                fluct_components.push(FluctComponent {
                    name: "exotic",
                    exponent: f.exotic_exponent,
                    amplitude: f.exotic_amplitude,
                });
            }
        }
        Mode::Dissipation => {
            if let Some(p) = scenario
                .dissipation
                .filter(|p| p.background_amplitude > 0.0)
            {
                fluct_components.push(FluctComponent {
                    name: "dissipation_background",
                    exponent: p.background_exponent,
                    amplitude: p.background_amplitude,
                });
            }
        }
    }
    let v_m_truth = scenario
        .d_r_schedule
        .iter()
        .map(|&d_r| scenario.cpd.evaluate(scenario.separation(d_r)))
        .collect::<crate::error::Result<_>>()?;
    Ok(Truth {
        d0_true: scenario.d0_true,
        amplitude,
        v_m_truth,
        fluct_components,
    })
}
