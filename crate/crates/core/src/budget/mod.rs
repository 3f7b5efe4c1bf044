//! Dephasing-budget decomposition, density estimates and sensitivity projections.

mod decompose;
mod factors;
mod record;
mod sensitivity;

pub use decompose::{
    conversion_analysis, decompose, estimate_concentrations, optimal_gamma2star, Concentrations, ConversionFit,
    ConversionRow, DephasingBudget, Estimate, OptimalBreakdown, OptimalContext, Term, NVNV_DETECTION_FLOOR,
};
pub use factors::ConversionFactors;
pub use record::{bundled_growth, bundled_rates, bundled_samples, Rate, SampleRecord, SampleSet};
pub use sensitivity::{
    cw_point, five_level_steady_state, nv_count, sensitivity_cwodmr, sensitivity_ramsey, CwParams, CwPoint,
    FiveLevelRates, RamseyParams, Sensitivity, LORENTZ_FACTOR,
};
