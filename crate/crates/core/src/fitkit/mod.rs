//! Decay-curve and zero-field ODMR fitting.

pub mod lm;
mod decay;
mod odmr;

pub use decay::{
    aicc, decay_model_jacobian, fit_decay, fit_decay_with, model_select, DecaySeed, FitModel, FitOptions, FitResult,
    ParamErrors, STRETCH_MAX, STRETCH_MIN,
};
pub use odmr::{
    dip_lineshape, fit_zero_field_odmr, gamma_elec_from_nu, power_broadened_width, synth_zero_field_odmr, OdmrFit,
    OdmrSpectrum, OdmrSynthParams, POWER_BROADENING_COEFF,
};
