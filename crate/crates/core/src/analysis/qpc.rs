use crate::constants::resistance_quantum;
use crate::error::{Error, Result};

/// Effective contact potential of a quantum point contact with residual
/// resistance `residual_ohm` at junction voltage `voltage`:
/// ΔV_eff = V(1 − R₀/(R₀ + R_r)) = V·R_r/(R₀ + R_r), R₀ = h/2e².
///
/// At V = 50 mV and R_r = 400 Ω this gives 1.503 mV. The value sometimes
/// quoted for these inputs, about 1 mV, does not follow from the formula.
pub fn qpc_effective_cpd(voltage: f64, residual_ohm: f64) -> Result<f64> {
    if !(residual_ohm >= 0.0) || !voltage.is_finite() {
        return Err(Error::InvalidInput(format!(
            "qpc: need finite V and R_r >= 0, got V = {voltage}, R_r = {residual_ohm}"
        )));
    }
    if residual_ohm.is_infinite() {
        return Ok(voltage);
    }
    Ok(voltage * residual_ohm / (resistance_quantum() + residual_ohm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpc_examples() {
        assert_eq!(qpc_effective_cpd(0.05, 0.0).unwrap(), 0.0);
        let v = qpc_effective_cpd(0.05, 400.0).unwrap();
        assert!((v / 1.50303e-3 - 1.0).abs() < 1e-5, "{v}");
        // the relative gap to V is exactly R₀/(R₀ + R_r)
        let far = qpc_effective_cpd(0.05, 1e12).unwrap();
        let gap = resistance_quantum() / (resistance_quantum() + 1e12);
        assert!(((1.0 - far / 0.05) - gap).abs() < 1e-15);
        let farther = qpc_effective_cpd(0.05, 1e13).unwrap();
        assert!((farther / 0.05 - 1.0).abs() < 1e-8);
        assert!(qpc_effective_cpd(0.05, -1.0).is_err());
    }

    #[test]
    fn monotone_in_both_arguments() {
        let mut last = 0.0;
        for r in [0.0, 1.0, 10.0, 400.0, 1e4, 1e6] {
            let v = qpc_effective_cpd(0.05, r).unwrap();
            assert!(v >= last);
            last = v;
        }
        assert!(qpc_effective_cpd(0.06, 400.0).unwrap() > qpc_effective_cpd(0.05, 400.0).unwrap());
    }
}
