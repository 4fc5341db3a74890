//! Studies built on top of the calibration pipeline.

mod bias;
mod consistency;
mod decompose;
mod qpc;

pub use bias::{
    bias_points_from_profiles, bias_points_from_scenario, constant_cpd_bias,
    fluct_at_fixed_voltage, BiasCurve, BiasPoint, BiasRow,
};
pub use consistency::{
    cross_mode_consistency, ConsistencyReport, CpdCheck, D0Check, ExponentCheck, ModeCalibration,
    ModeD0, Verdict, DEFAULT_Z_THRESHOLD,
};
pub use decompose::{decompose_fluct, Decomposition, FluctSample};
pub use qpc::qpc_effective_cpd;
