//! Monte Carlo pulse-sequence simulation.
//!
//! Two models: a single spin-1 under static Sz and Sz² disorder with ideal pulses, and
//! pairs of two-level spins coupled by v(SxSx + SySy − SzSz) with finite, miscalibrated
//! pulses propagated exactly.

mod convergence;
mod curve;
mod pairs;
mod sequence;
mod single;
mod stats;

pub use convergence::{initial_decay_rate, interaction_only_rate, sweep_convergence, DECAY_WINDOW_FLOOR, ConvergencePoint, ConvergenceTable};
pub use curve::DecayCurve;
pub use pairs::{
    sequence_duration_us, simulate_interacting_pairs, unitarity_defect, InteractionDistribution, NoiseModel, PairDraw,
    PulseParams,
};
pub use sequence::{default_tau_grid, log_grid, SequenceKind, SequenceSpec, Sweep};
pub use single::{simulate_single_spin_ensemble, SingleSpinNoise};
pub use stats::{max_batch_deviation, mc_statistics, McStats};
