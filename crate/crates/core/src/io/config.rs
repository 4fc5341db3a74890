//! Run configuration: one TOML file describing the shared scenario, the
//! modes to simulate and the analysis options. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    CpdProfile, DissipationParams, ForceComponents, Mode, NoiseModel, OscillatorParams, Scenario,
};

pub const CONFIG_VERSION: &str = "parabolib-config v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: String,
    pub output_dir: PathBuf,
    pub modes: Vec<ModeRun>,
    pub scenario: ScenarioTemplate,
    #[serde(default)]
    pub analysis: AnalysisOptions,
}

/// One mode to simulate. `d0_true` and `rng_seed` override the shared
/// scenario, e.g. to inject a contact-point offset into one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeRun {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d0_true: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
}

/// All scenario fields except the mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTemplate {
    pub sphere_radius: f64,
    pub d0_true: f64,
    pub d_r_schedule: Vec<f64>,
    pub voltage_schedule: Vec<f64>,
    #[serde(default)]
    pub rng_seed: u64,
    pub cpd: CpdProfile,
    #[serde(default)]
    pub forces: ForceComponents,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oscillator: Option<OscillatorParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissipation: Option<DissipationParams>,
}

fn default_basis() -> Vec<f64> {
    vec![3.0, 2.0]
}

fn default_z() -> f64 {
    crate::analysis::DEFAULT_Z_THRESHOLD
}

fn default_plot_count() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOptions {
    /// Force-law exponents n of the A/dⁿ basis for the fluct decomposition.
    #[serde(default = "default_basis")]
    pub basis_exponents: Vec<f64>,
    /// Compensation voltage of the bias study; defaults to the V_m fitted at
    /// the largest separation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_const: Option<f64>,
    #[serde(default = "default_z")]
    pub z_threshold: f64,
    /// Number of distances exported to parabolas.csv.
    #[serde(default = "default_plot_count")]
    pub parabola_plot_count: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            basis_exponents: default_basis(),
            v_const: None,
            z_threshold: default_z(),
            parabola_plot_count: default_plot_count(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_owned()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "format_version '{}' is not supported (expected '{CONFIG_VERSION}')",
                self.format_version
            )));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("no modes configured".into()));
        }
        for (i, run) in self.modes.iter().enumerate() {
            if self.modes[..i].iter().any(|r| r.mode == run.mode) {
                return Err(Error::Config(format!("mode '{}' listed twice", run.mode)));
            }
        }
        if !(self.analysis.z_threshold > 0.0) {
            return Err(Error::Config("analysis.z_threshold must be > 0".into()));
        }
        Ok(())
    }

    /// The concrete scenario simulated for one mode.
    pub fn scenario_for(&self, run: &ModeRun) -> Scenario {
        let t = &self.scenario;
        Scenario {
            mode: run.mode,
            sphere_radius: t.sphere_radius,
            cpd: t.cpd.clone(),
            forces: t.forces.clone(),
            d0_true: run.d0_true.unwrap_or(t.d0_true),
            d_r_schedule: t.d_r_schedule.clone(),
            voltage_schedule: t.voltage_schedule.clone(),
            noise: t.noise,
            rng_seed: run.rng_seed.unwrap_or(t.rng_seed),
            oscillator: t.oscillator,
            dissipation: t.dissipation,
        }
    }

    pub fn mode_run(&self, mode: Mode) -> Result<&ModeRun> {
        self.modes
            .iter()
            .find(|r| r.mode == mode)
            .ok_or_else(|| Error::Config(format!("mode '{mode}' is not configured")))
    }

    /// Static + gradient campaign: R = 100 µm, d₀ = 2 µm, constant CPD of
    /// 0.3 V, Casimir force only, 1 % relative noise, 20 distances and 7
    /// voltages.
    pub fn demo() -> Self {
        RunConfig {
            format_version: CONFIG_VERSION.into(),
            output_dir: PathBuf::from("parabolib-out"),
            modes: vec![
                ModeRun {
                    mode: Mode::Static,
                    d0_true: None,
                    rng_seed: None,
                },
                ModeRun {
                    mode: Mode::Gradient,
                    d0_true: None,
                    rng_seed: None,
                },
            ],
            scenario: ScenarioTemplate {
                sphere_radius: 1e-4,
                d0_true: 2e-6,
                d_r_schedule: (0..20).map(|i| i as f64 * 1.5e-6 / 19.0).collect(),
                voltage_schedule: vec![-0.6, -0.3, 0.0, 0.3, 0.6, 0.9, 1.2],
                rng_seed: 42,
                cpd: CpdProfile::Constant { v0: 0.3 },
                forces: ForceComponents::default(),
                noise: NoiseModel::Relative {
                    fraction: 0.01,
                    floor: 0.0,
                },
                oscillator: Some(OscillatorParams {
                    m_eff: 1e-11,
                    nu0: 3e5,
                }),
                dissipation: None,
            },
            analysis: AnalysisOptions::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_round_trips_through_toml() {
        let demo = RunConfig::demo();
        let text = demo.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), demo);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut text = RunConfig::demo().to_toml_string().unwrap();
        text = text.replacen("[scenario]", "[scenario]\nsphere_radus = 1.0", 1);
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("sphere_radus"), "{err}");
    }

    #[test]
    fn mode_override_applies() {
        let mut cfg = RunConfig::demo();
        cfg.modes[1].d0_true = Some(2.05e-6);
        let s = cfg.scenario_for(&cfg.modes[1]);
        assert_eq!(s.mode, Mode::Gradient);
        assert_eq!(s.d0_true, 2.05e-6);
        assert_eq!(cfg.scenario_for(&cfg.modes[0]).d0_true, 2e-6);
    }

    #[test]
    fn version_checked() {
        let mut cfg = RunConfig::demo();
        cfg.format_version = "v0".into();
        let text = cfg.to_toml_string().unwrap();
        assert!(matches!(
            RunConfig::from_toml_str(&text),
            Err(Error::Config(_))
        ));
    }
}
