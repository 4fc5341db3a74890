//! Cross-mode consistency: common contact point, curvature exponents and
//! CPD profiles compared between operation modes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_free_exponent, CalibrationProfiles, FreeExponentFit};
use crate::io::float_ext;
use crate::model::{Mode, PowerLawFit};

pub const DEFAULT_Z_THRESHOLD: f64 = 3.0;

/// One mode's profiles together with its power-law calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCalibration {
    pub profiles: CalibrationProfiles,
    pub fit: PowerLawFit,
}

impl ModeCalibration {
    pub fn mode(&self) -> Mode {
        self.profiles.mode
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    NotApplicable,
}

impl Verdict {
    fn from_z(z: f64, threshold: f64) -> Self {
        if z.is_nan() {
            Verdict::NotApplicable
        } else if z < threshold {
            Verdict::Consistent
        } else {
            Verdict::Inconsistent
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeD0 {
    pub mode: Mode,
    pub d0_hat: f64,
    #[serde(with = "float_ext")]
    pub d0_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct D0Check {
    pub a: Mode,
    pub b: Mode,
    #[serde(with = "float_ext")]
    pub z: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentCheck {
    pub mode: Mode,
    pub expected: Option<f64>,
    pub fitted: Option<FreeExponentFit>,
    #[serde(with = "float_ext::option")]
    pub z: Option<f64>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpdCheck {
    pub a: Mode,
    pub b: Mode,
    pub shared_points: usize,
    #[serde(with = "float_ext::option")]
    pub max_abs_diff: Option<f64>,
    #[serde(with = "float_ext::option")]
    pub max_z: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub z_threshold: f64,
    pub modes: Vec<ModeD0>,
    pub d0_checks: Vec<D0Check>,
    pub exponent_checks: Vec<ExponentCheck>,
    pub cpd_checks: Vec<CpdCheck>,
    pub overall: Verdict,
}

fn z_score(diff: f64, sa: f64, sb: f64) -> f64 {
    let denom = (sa * sa + sb * sb).sqrt();
    if diff == 0.0 {
        0.0
    } else if denom > 0.0 {
        diff.abs() / denom
    } else {
        f64::INFINITY
    }
}

/// Compares every pair of supplied modes.
///
/// d₀ agreement: z = |d₀ᴬ − d₀ᴮ| / √(σᴬ² + σᴮ²). Exponent: each k profile is
/// refitted with a free exponent and compared to 1 (static) or 2 (gradient).
/// CPD: V_m profiles placed on absolute distance d = d̂₀ − d_r, the finer one
/// interpolated linearly onto the coarser one's distances inside the overlap.
pub fn cross_mode_consistency(
    inputs: &[ModeCalibration],
    z_threshold: f64,
) -> Result<ConsistencyReport> {
    if inputs.len() < 2 {
        return Err(Error::InvalidInput(
            "cross-mode consistency needs at least two modes".into(),
        ));
    }
    if !(z_threshold > 0.0) {
        return Err(Error::InvalidInput("z threshold must be > 0".into()));
    }

    let modes = inputs
        .iter()
        .map(|m| ModeD0 {
            mode: m.mode(),
            d0_hat: m.fit.d0_hat,
            d0_sigma: m.fit.d0_sigma,
        })
        .collect();

    let mut d0_checks = Vec::new();
    let mut cpd_checks = Vec::new();
    for i in 0..inputs.len() {
        for j in i + 1..inputs.len() {
            let (a, b) = (&inputs[i], &inputs[j]);
            let z = z_score(a.fit.d0_hat - b.fit.d0_hat, a.fit.d0_sigma, b.fit.d0_sigma);
            d0_checks.push(D0Check {
                a: a.mode(),
                b: b.mode(),
                z,
                verdict: Verdict::from_z(z, z_threshold),
            });
            cpd_checks.push(compare_cpd(a, b, z_threshold));
        }
    }

    let exponent_checks = inputs
        .iter()
        .map(|m| check_exponent(m, z_threshold))
        .collect::<Vec<_>>();

    let verdicts = d0_checks
        .iter()
        .map(|c| c.verdict)
        .chain(exponent_checks.iter().map(|c| c.verdict))
        .chain(cpd_checks.iter().map(|c| c.verdict));
    let mut overall = Verdict::NotApplicable;
    for v in verdicts {
        match v {
            Verdict::Inconsistent => {
                overall = Verdict::Inconsistent;
                break;
            }
            Verdict::Consistent => overall = Verdict::Consistent,
            Verdict::NotApplicable => {}
        }
    }

    Ok(ConsistencyReport {
        z_threshold,
        modes,
        d0_checks,
        exponent_checks,
        cpd_checks,
        overall,
    })
}

fn check_exponent(m: &ModeCalibration, threshold: f64) -> ExponentCheck {
    let expected = m.mode().curvature_law().exponent();
    let not_applicable = |note: String| ExponentCheck {
        mode: m.mode(),
        expected,
        fitted: None,
        z: None,
        verdict: Verdict::NotApplicable,
        note: Some(note),
    };
    let Some(expected_p) = expected else {
        return not_applicable("curvature law has no single exponent".into());
    };
    match fit_free_exponent(&m.profiles) {
        Ok(fit) => {
            let z = z_score(fit.exponent - expected_p, fit.exponent_sigma, 0.0);
            ExponentCheck {
                mode: m.mode(),
                expected,
                fitted: Some(fit),
                z: Some(z),
                verdict: Verdict::from_z(z, threshold),
                note: None,
            }
        }
        Err(e) => not_applicable(format!("free-exponent fit failed: {e}")),
    }
}

struct CpdSeries {
    d: Vec<f64>,
    v: Vec<f64>,
    sigma: Vec<f64>,
}

impl CpdSeries {
    fn new(m: &ModeCalibration) -> Self {
        // ascending d means descending d_r
        let rows = m.profiles.rows.iter().rev();
        let mut s = CpdSeries {
            d: Vec::new(),
            v: Vec::new(),
            sigma: Vec::new(),
        };
        for r in rows {
            s.d.push(m.fit.d0_hat - r.d_r);
            s.v.push(r.v_m);
            s.sigma.push(r.sigma_v);
        }
        s
    }

    fn interpolate(&self, d: f64) -> Option<(f64, f64)> {
        let (lo, hi) = (*self.d.first()?, *self.d.last()?);
        if d < lo || d > hi {
            return None;
        }
        let idx = self.d.partition_point(|&x| x < d);
        if self.d[idx] == d || idx == 0 {
            return Some((self.v[idx], self.sigma[idx]));
        }
        let t = (d - self.d[idx - 1]) / (self.d[idx] - self.d[idx - 1]);
        let lerp = |y: &[f64]| y[idx - 1] + t * (y[idx] - y[idx - 1]);
        Some((lerp(&self.v), lerp(&self.sigma)))
    }
}

fn compare_cpd(a: &ModeCalibration, b: &ModeCalibration, threshold: f64) -> CpdCheck {
    let (sa, sb) = (CpdSeries::new(a), CpdSeries::new(b));
    let (coarse, fine) = if sa.d.len() <= sb.d.len() {
        (&sa, &sb)
    } else {
        (&sb, &sa)
    };
    let mut shared = 0;
    let mut max_abs: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    for i in 0..coarse.d.len() {
        if let Some((v, s)) = fine.interpolate(coarse.d[i]) {
            shared += 1;
            let diff = coarse.v[i] - v;
            max_abs = max_abs.max(diff.abs());
            max_z = max_z.max(z_score(diff, coarse.sigma[i], s));
        }
    }
    if shared == 0 {
        return CpdCheck {
            a: a.mode(),
            b: b.mode(),
            shared_points: 0,
            max_abs_diff: None,
            max_z: None,
            verdict: Verdict::NotApplicable,
        };
    }
    CpdCheck {
        a: a.mode(),
        b: b.mode(),
        shared_points: shared,
        max_abs_diff: Some(max_abs),
        max_z: Some(max_z),
        verdict: Verdict::from_z(max_z, threshold),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::ProfileRow;

    fn calibration(mode: Mode, d0: f64, d0_sigma: f64, offset: f64) -> ModeCalibration {
        let p = mode.curvature_law().exponent().unwrap();
        let rows = (0..10)
            .map(|i| {
                let d_r = i as f64 * 1e-7;
                ProfileRow {
                    d_r: d_r + offset,
                    k: 1e-15 / (2e-6 - d_r).powf(p),
                    sigma_k: 1e-17 / (2e-6 - d_r).powf(p),
                    v_m: 0.3,
                    sigma_v: 1e-3,
                    fluct: 0.0,
                    sigma_f: 1.0,
                }
            })
            .collect();
        ModeCalibration {
            profiles: CalibrationProfiles::new(mode, rows).unwrap(),
            fit: PowerLawFit {
                law: mode.curvature_law(),
                amplitude: 1e-15,
                amplitude_sigma: 1e-17,
                d0_hat: d0,
                d0_sigma,
                chi2_per_dof: 1.0,
                dof: 8,
                iterations: 3,
            },
        }
    }

    #[test]
    fn mode_against_itself_is_consistent() {
        let a = calibration(Mode::Static, 2e-6, 5e-9, 0.0);
        let report = cross_mode_consistency(&[a.clone(), a], 3.0).unwrap();
        assert_eq!(report.d0_checks[0].z, 0.0);
        assert_eq!(report.cpd_checks[0].max_abs_diff, Some(0.0));
        assert_eq!(report.overall, Verdict::Consistent);
    }

    #[test]
    fn offset_d0_is_flagged() {
        let a = calibration(Mode::Static, 2e-6, 5e-9 / 2f64.sqrt(), 0.0);
        let b = calibration(Mode::Gradient, 2.05e-6, 5e-9 / 2f64.sqrt(), 0.0);
        let report = cross_mode_consistency(&[a.clone(), b.clone()], 3.0).unwrap();
        assert!((report.d0_checks[0].z - 10.0).abs() < 1e-6);
        assert_eq!(report.d0_checks[0].verdict, Verdict::Inconsistent);
        assert_eq!(report.overall, Verdict::Inconsistent);
        let swapped = cross_mode_consistency(&[b, a], 3.0).unwrap();
        assert_eq!(swapped.d0_checks[0].z, report.d0_checks[0].z);
    }

    #[test]
    fn disjoint_ranges_are_not_fatal() {
        let a = calibration(Mode::Static, 2e-6, 5e-9, 0.0);
        let mut b = calibration(Mode::Gradient, 2e-6, 5e-9, 0.0);
        b.fit.d0_hat = 2e-3;
        let report = cross_mode_consistency(&[a, b], 3.0).unwrap();
        assert_eq!(report.cpd_checks[0].verdict, Verdict::NotApplicable);
        assert_eq!(report.cpd_checks[0].shared_points, 0);
    }

    #[test]
    fn needs_two_modes() {
        let a = calibration(Mode::Static, 2e-6, 5e-9, 0.0);
        assert!(cross_mode_consistency(&[a], 3.0).is_err());
    }
}
