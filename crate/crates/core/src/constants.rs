//! Fundamental constants (CODATA 2018 exact or recommended values) and
//! derived quantities. All SI.

use std::f64::consts::PI;

/// Vacuum permittivity ε₀, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.8541878128e-12;
/// Reduced Planck constant ħ, J·s.
pub const HBAR: f64 = 1.054571817e-34;
/// Planck constant h, J·s.
pub const PLANCK: f64 = 6.62607015e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Elementary charge e, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;

/// ħc, J·m (≈ 3.1615268e-26).
pub const HBAR_C: f64 = HBAR * SPEED_OF_LIGHT;

/// Conductance quantum G₀ = 2e²/h, S.
pub fn conductance_quantum() -> f64 {
    2.0 * ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / PLANCK
}

/// Resistance quantum R₀ = 1/G₀ ≈ 12906.404 Ω.
pub fn resistance_quantum() -> f64 {
    1.0 / conductance_quantum()
}

/// Ideal-conductor sphere-plane Casimir prefactor π³ħc/360, J·m (multiply by R, divide by d³).
pub fn casimir_pfa_prefactor() -> f64 {
    PI.powi(3) * HBAR_C / 360.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resistance_quantum_value() {
        assert!((resistance_quantum() - 12906.40).abs() < 0.01);
    }

    #[test]
    fn hbar_c_value() {
        assert!((HBAR_C / 3.1615e-26 - 1.0).abs() < 1e-4);
    }
}
