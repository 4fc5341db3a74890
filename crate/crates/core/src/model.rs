//! Shared domain types: geometry, CPD profiles, force components, scenarios
//! and measurement grids.
//!
//! Sign convention: attractive forces and force gradients are positive
//! magnitudes everywhere. Units are SI.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constants::VACUUM_PERMITTIVITY;
use crate::error::{Error, Result};

/// AFM operation mode, selecting the observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Cantilever deflection; observable is a force in N.
    Static,
    /// Frequency shift; observable is a force gradient in N/m.
    Gradient,
    /// Resonance linewidth; observable is a dissipation in user units.
    Dissipation,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Static, Mode::Gradient, Mode::Dissipation];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Static => "static",
            Mode::Gradient => "gradient",
            Mode::Dissipation => "dissipation",
        }
    }

    /// Curvature law this mode's k(d_r) profile follows.
    pub fn curvature_law(self) -> PowerLaw {
        match self {
            Mode::Static => PowerLaw::InverseLinear,
            Mode::Gradient => PowerLaw::InverseSquare,
            Mode::Dissipation => PowerLaw::CapacitanceSquared,
        }
    }

    pub(crate) fn stream_tag(self) -> u64 {
        match self {
            Mode::Static => 1,
            Mode::Gradient => 2,
            Mode::Dissipation => 3,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "static" => Ok(Mode::Static),
            "gradient" => Ok(Mode::Gradient),
            "dissipation" => Ok(Mode::Dissipation),
            other => Err(Error::InvalidInput(format!("unknown mode '{other}'"))),
        }
    }
}

/// Distance law used to calibrate a curvature profile k(d_r).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerLaw {
    /// k = α / (d₀ − d_r)
    InverseLinear,
    /// k = β / (d₀ − d_r)²
    InverseSquare,
    /// k = γ · C(d₀ − d_r)², sphere-plane capacitance
    CapacitanceSquared,
}

impl PowerLaw {
    /// Exponent of the inverse power law, `None` for the capacitance form.
    pub fn exponent(self) -> Option<f64> {
        match self {
            PowerLaw::InverseLinear => Some(1.0),
            PowerLaw::InverseSquare => Some(2.0),
            PowerLaw::CapacitanceSquared => None,
        }
    }
}

impl FromStr for PowerLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "inverse_linear" => Ok(PowerLaw::InverseLinear),
            "inverse_square" => Ok(PowerLaw::InverseSquare),
            "capacitance_squared" => Ok(PowerLaw::CapacitanceSquared),
            other => Err(Error::InvalidInput(format!("unknown power law '{other}'"))),
        }
    }
}

/// Sphere-plane geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    sphere_radius: f64,
}

impl Geometry {
    pub fn new(sphere_radius: f64) -> Result<Self> {
        if !(sphere_radius.is_finite() && sphere_radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sphere radius must be positive, got {sphere_radius:e}"
            )));
        }
        Ok(Self { sphere_radius })
    }

    pub fn sphere_radius(&self) -> f64 {
        self.sphere_radius
    }

    pub fn vacuum_permittivity(&self) -> f64 {
        VACUUM_PERMITTIVITY
    }

    /// πRε₀, the electrostatic calibration amplitude of both the static and
    /// gradient curvature laws under the ½C′V² convention.
    pub fn pi_r_eps0(&self) -> f64 {
        std::f64::consts::PI * self.sphere_radius * VACUUM_PERMITTIVITY
    }

    /// Checks 0 < d < R. Separations above R/10 are accepted with a warning,
    /// the sphere-plane formulas assume R ≫ d.
    pub fn check_separation(&self, d: f64) -> Result<()> {
        if !(d > 0.0 && d < self.sphere_radius) {
            return Err(Error::Separation {
                d,
                radius: self.sphere_radius,
            });
        }
        if d > self.sphere_radius / 10.0 {
            log::warn!(
                "separation {d:e} m exceeds R/10 = {:e} m; sphere-plane approximation is poor",
                self.sphere_radius / 10.0
            );
        }
        Ok(())
    }
}

fn default_d_ref() -> f64 {
    1e-6
}

/// Contact potential difference V_m as a function of absolute separation d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CpdProfile {
    /// V_m(d) = V0 at every d.
    Constant { v0: f64 },
    /// V_m(d) = V0 + slope · ln(d / d_ref).
    LogDrift {
        v0: f64,
        slope: f64,
        #[serde(default = "default_d_ref")]
        d_ref: f64,
    },
    /// Linear interpolation between (d, V_m) knots, strictly increasing in d.
    Tabulated { table: Vec<(f64, f64)> },
}

impl CpdProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            CpdProfile::Constant { v0 } if !v0.is_finite() => {
                Err(Error::InvalidInput("constant CPD must be finite".into()))
            }
            CpdProfile::LogDrift { v0, slope, d_ref } => {
                if !(v0.is_finite() && slope.is_finite()) || !(*d_ref > 0.0) {
                    return Err(Error::InvalidInput(
                        "log_drift CPD needs finite v0, slope and d_ref > 0".into(),
                    ));
                }
                Ok(())
            }
            CpdProfile::Tabulated { table } => {
                if table.len() < 2 {
                    return Err(Error::InvalidInput(
                        "tabulated CPD needs at least two knots".into(),
                    ));
                }
                if table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::InvalidInput(
                        "tabulated CPD knots must be strictly increasing in d".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Evaluates V_m(d) in volts.
    pub fn evaluate(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) {
            return Err(Error::InvalidInput(format!(
                "CPD evaluated at non-positive separation {d:e}"
            )));
        }
        match self {
            CpdProfile::Constant { v0 } => Ok(*v0),
            CpdProfile::LogDrift { v0, slope, d_ref } => Ok(v0 + slope * (d / d_ref).ln()),
            CpdProfile::Tabulated { table } => interpolate(table, d),
        }
    }
}

fn interpolate(table: &[(f64, f64)], d: f64) -> Result<f64> {
    let (lo, hi) = match (table.first(), table.last()) {
        (Some(first), Some(last)) => (first.0, last.0),
        _ => return Err(Error::InvalidInput("empty CPD table".into())),
    };
    if d < lo || d > hi {
        return Err(Error::CpdOutOfRange { d, lo, hi });
    }
    // first knot with x >= d
    let idx = table.partition_point(|&(x, _)| x < d);
    let (x1, y1) = table[idx];
    if x1 == d || idx == 0 {
        return Ok(y1);
    }
    let (x0, y0) = table[idx - 1];
    let t = (d - x0) / (x1 - x0);
    Ok(y0 + t * (y1 - y0))
}

/// Free-form sources of the distance-only term F_fluct = F_cas + F_surf + F_exotic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceComponents {
    #[serde(default)]
    pub casimir: bool,
    /// A_s in N·m^m.
    #[serde(default)]
    pub surf_amplitude: f64,
    #[serde(default)]
    pub surf_exponent: f64,
    /// A_x in N·m^p.
    #[serde(default)]
    pub exotic_amplitude: f64,
    #[serde(default)]
    pub exotic_exponent: f64,
}

impl Default for ForceComponents {
    fn default() -> Self {
        Self {
            casimir: true,
            surf_amplitude: 0.0,
            surf_exponent: 0.0,
            exotic_amplitude: 0.0,
            exotic_exponent: 0.0,
        }
    }
}

impl ForceComponents {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("surf_amplitude", self.surf_amplitude),
            ("surf_exponent", self.surf_exponent),
            ("exotic_amplitude", self.exotic_amplitude),
            ("exotic_exponent", self.exotic_exponent),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and >= 0, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Measurement noise per grid cell. Noise is i.i.d. Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    /// Fixed standard deviation in mode units.
    Absolute { sigma: f64 },
    /// σ = max(fraction · |noiseless value|, floor).
    Relative {
        fraction: f64,
        #[serde(default)]
        floor: f64,
    },
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Absolute { sigma: 0.0 }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::Absolute { sigma } => sigma.is_finite() && sigma >= 0.0,
            NoiseModel::Relative { fraction, floor } => {
                fraction.is_finite() && fraction >= 0.0 && floor.is_finite() && floor >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid noise model {self:?}")))
        }
    }

    /// Standard deviation for a cell whose noiseless value is `value`.
    /// Zero means the cell is synthesized without noise.
    pub fn sigma_for(&self, value: f64) -> f64 {
        match *self {
            NoiseModel::Absolute { sigma } => sigma,
            NoiseModel::Relative { fraction, floor } => (fraction * value.abs()).max(floor),
        }
    }
}

/// Harmonic oscillator parameters for the frequency-shift conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorParams {
    /// Effective mass, kg.
    pub m_eff: f64,
    /// Free resonance frequency ν₀, Hz.
    pub nu0: f64,
}

impl OscillatorParams {
    pub fn validate(&self) -> Result<()> {
        if self.m_eff > 0.0 && self.nu0 > 0.0 && self.m_eff.is_finite() && self.nu0.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "oscillator needs m_eff > 0 and nu0 > 0".into(),
            ))
        }
    }
}

/// Dissipation-mode parameters: the curvature coefficient γ of k = γC² and a
/// power-law background D_fluct = A/dⁿ (zero by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationParams {
    pub gamma: f64,
    #[serde(default)]
    pub background_amplitude: f64,
    #[serde(default)]
    pub background_exponent: f64,
}

/// Ground truth of one simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: Mode,
    /// Sphere radius R, m.
    pub sphere_radius: f64,
    pub cpd: CpdProfile,
    #[serde(default)]
    pub forces: ForceComponents,
    /// True contact-point parameter d₀, m.
    pub d0_true: f64,
    /// Actuator readings d_r, m; strictly increasing, all below d0_true.
    pub d_r_schedule: Vec<f64>,
    /// Applied voltages, V.
    pub voltage_schedule: Vec<f64>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oscillator: Option<OscillatorParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissipation: Option<DissipationParams>,
}

impl Scenario {
    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.sphere_radius)
    }

    /// Absolute separation for an actuator reading.
    pub fn separation(&self, d_r: f64) -> f64 {
        self.d0_true - d_r
    }

    pub fn validate(&self) -> Result<()> {
        let geometry = self.geometry()?;
        self.cpd.validate()?;
        self.forces.validate()?;
        self.noise.validate()?;
        if self.d_r_schedule.is_empty() {
            return Err(Error::InvalidInput("empty d_r schedule".into()));
        }
        if self.d_r_schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "d_r schedule must be strictly increasing".into(),
            ));
        }
        for &d_r in &self.d_r_schedule {
            let d = self.separation(d_r);
            if !(d > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "scheduled d_r = {d_r:e} m is not below d0_true = {:e} m",
                    self.d0_true
                )));
            }
            geometry.check_separation(d)?;
        }
        if self.voltage_schedule.is_empty() || self.voltage_schedule.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput(
                "voltage schedule must be non-empty and finite".into(),
            ));
        }
        let distinct = distinct_count(&self.voltage_schedule);
        if distinct != self.voltage_schedule.len() {
            return Err(Error::InvalidInput(
                "voltage schedule contains duplicate values".into(),
            ));
        }
        if distinct < 5 {
            // the parabola fit reports the hard failure below three voltages
            log::warn!(
                "voltage schedule has only {distinct} distinct values (5 or more recommended)"
            );
        }
        match self.mode {
            Mode::Gradient => {
                if let Some(osc) = &self.oscillator {
                    osc.validate()?;
                }
            }
            Mode::Dissipation => {
                let diss = self.dissipation.as_ref().ok_or(Error::MissingGamma)?;
                if !(diss.gamma > 0.0 && diss.gamma.is_finite()) {
                    return Err(Error::InvalidInput("dissipation gamma must be > 0".into()));
                }
                if !(diss.background_amplitude >= 0.0 && diss.background_exponent >= 0.0) {
                    return Err(Error::InvalidInput(
                        "dissipation background amplitude and exponent must be >= 0".into(),
                    ));
                }
            }
            Mode::Static => {}
        }
        Ok(())
    }
}

pub(crate) fn distinct_count(values: &[f64]) -> usize {
    values
        .iter()
        .map(|v| if *v == 0.0 { 0u64 } else { v.to_bits() })
        .collect::<HashSet<_>>()
        .len()
}

/// One cell of a measurement grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub d_r: f64,
    pub voltage: f64,
    pub value: f64,
    pub sigma: f64,
}

/// Observable table over (d_r, V). Always a complete rectangular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementGrid {
    mode: Mode,
    rows: Vec<GridRow>,
    provenance: String,
}

impl MeasurementGrid {
    pub fn new(mode: Mode, rows: Vec<GridRow>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        let mut d_values = HashSet::new();
        let mut v_values = HashSet::new();
        for (i, row) in rows.iter().enumerate() {
            let fields = [
                ("d_r", row.d_r),
                ("V", row.voltage),
                ("value", row.value),
                ("sigma", row.sigma),
            ];
            for (name, value) in fields {
                if !value.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "row {i}: {name} is not finite"
                    )));
                }
            }
            if !(row.sigma > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "row {i}: sigma must be > 0, got {}",
                    row.sigma
                )));
            }
            let key = (key_bits(row.d_r), key_bits(row.voltage));
            if !seen.insert(key) {
                return Err(Error::InvalidInput(format!(
                    "row {i}: duplicate (d_r = {}, V = {}) breaks the rectangular grid",
                    row.d_r, row.voltage
                )));
            }
            d_values.insert(key.0);
            v_values.insert(key.1);
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput("grid has no rows".into()));
        }
        if d_values.len() * v_values.len() != rows.len() {
            return Err(Error::InvalidInput(format!(
                "grid is not rectangular: {} distances x {} voltages but {} rows",
                d_values.len(),
                v_values.len(),
                rows.len()
            )));
        }
        Ok(Self {
            mode,
            rows,
            provenance: provenance.into(),
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn rows(&self) -> &[GridRow] {
        &self.rows
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Distinct d_r values in ascending order.
    pub fn distances(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.rows.iter().map(|r| r.d_r).collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    }

    /// Distinct voltages in ascending order.
    pub fn voltages(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.rows.iter().map(|r| r.voltage).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

fn key_bits(v: f64) -> u64 {
    // -0.0 and 0.0 denote the same grid coordinate
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

/// Per-distance result of the quadratic fit y = k (V − V_m)² + minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaFit {
    pub d_r: f64,
    /// Curvature k, mode units per V².
    pub curvature: f64,
    /// Minimizing voltage V_m, V.
    pub v_min: f64,
    /// Value at the minimum (F_fluct, G_dist or D_fluct sample).
    pub minimum: f64,
    /// Covariance over (k, V_m, minimum).
    pub covariance: [[f64; 3]; 3],
    pub chi2: f64,
    pub dof: usize,
}

impl ParabolaFit {
    pub fn sigma_curvature(&self) -> f64 {
        self.covariance[0][0].max(0.0).sqrt()
    }

    pub fn sigma_v_min(&self) -> f64 {
        self.covariance[1][1].max(0.0).sqrt()
    }

    pub fn sigma_minimum(&self) -> f64 {
        self.covariance[2][2].max(0.0).sqrt()
    }

    /// Fitted observable at voltage `v`.
    pub fn evaluate(&self, v: f64) -> f64 {
        let dv = v - self.v_min;
        self.curvature * dv * dv + self.minimum
    }
}

/// Result of calibrating k(d_r) against a distance law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub law: PowerLaw,
    /// α (N·m/V²), β (N/V² for the gradient law) or γ.
    pub amplitude: f64,
    #[serde(with = "crate::io::float_ext")]
    pub amplitude_sigma: f64,
    pub d0_hat: f64,
    /// Infinite when the profile is too flat to locate d₀.
    #[serde(with = "crate::io::float_ext")]
    pub d0_sigma: f64,
    pub chi2_per_dof: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl PowerLawFit {
    pub fn is_degenerate(&self) -> bool {
        !self.d0_sigma.is_finite()
    }
}
