//! Few-mode fiber beam synthesis and mode decomposition.
//!
//! The pipeline: solve the LP modes of a step-index fiber ([`fiber_modes`]),
//! render beam intensities from random mode coefficients ([`field_synth`]),
//! train a convolutional regressor on them ([`cnn`]), and decompose a single
//! near-field image into modal weights and relative phases ([`decompose`]),
//! scoring reconstructions with the intensity correlation ([`metrics`]).

pub mod bessel;
pub mod cnn;
pub mod decompose;
pub mod error;
pub mod fiber_modes;
pub mod field_synth;
pub mod metrics;
pub mod par;
pub mod rng;

pub use decompose::{
    brute_force_decompose, decompose, disambiguate, spgd_refine, DecompositionResult, IntensityModel, SpgdConfig,
};
pub use error::{Error, Result};
pub use fiber_modes::{
    sample_basis, solve_modes, v_number, FiberSpec, GridSpec, ModeBasis, ModeId, ModeSolution,
    Parity,
};
pub use field_synth::{
    add_noise, decode_label, encode_label, intensity, preprocess_frame, render,
    sample_coefficients, superpose, BeamImage, ComplexField, DecodedLabel, LabelVector,
    ModeCoefficients,
};
pub use metrics::{correlation, error_stats, residual, ErrorReport};
