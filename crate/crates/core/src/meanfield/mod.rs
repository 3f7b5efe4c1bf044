//! Mean-field dephasing from randomly placed bath spins.
//!
//! Each bath level i contributes a coupling vector e_i; a sequence turns these into
//! effective vectors E_i = ∫ s(t) e_{level(t)} dt, and the decay exponent is
//! (π/6)·2πJ·n·Σ p_i ∫ |a(r̂)·E_i| dΩ with a = ẑ − 3(ẑ·r̂)r̂. The radial integral is
//! done analytically.

mod bath;
mod deer;
mod engine;
mod gates;
pub mod quadrature;

pub use bath::{
    axial_field, coupling_strengths, BathHamiltonian, BathLevels, BathSpeciesSpec, CouplingModel,
    LevelPopulations, OrientationGroup,
};
pub use deer::{
    bath_driving_residual, bath_transitions, best_pairing, deer_rate, driven_group_rate,
    enumerate_pairings, free_rate, nearest_transition, nv_deer_default_field, nv_deer_with_bath,
    nv_offaxis_deer_rate, nv_offaxis_deer_rate_for, total_dephasing_curve, BathDrivingResult,
    DeerMode, DephasingCurvePoint, LevelRate, Pairing, DRIVE_THRESHOLD, FINITE_PULSE_FLIP_FACTOR,
};
pub use engine::{
    analytic_rate_aligned_halfspin, angular_integral, effective_terms, ensemble_decay_rate,
    RatePerDensity, Term, QUADRATURE_TOL,
};
pub use gates::{LevelSwap, SequenceGates};
