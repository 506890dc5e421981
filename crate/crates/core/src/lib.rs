//! Secret-key rates for the entanglement-based six-state QKD protocol with
//! an SPDC source, photon-number post-selection and biased basis choice.
//!
//! * [`math`]: binary entropy, QBER fluctuation bound, EC leakage, entropy bound
//! * [`spdc`]: source, channel and detector model giving `p11` and `e_PDC`
//! * [`rate`]: finite key length, asymptotic rate, QBER threshold, minimal pulse count
//! * [`optimize`]: deterministic search over the free protocol parameters
//! * [`sim`]: event-level Monte Carlo of the sifting steps

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod math;
pub mod optimize;
pub mod rate;
pub mod sim;
pub mod spdc;

pub use error::{Error, Result};
pub use math::QberTriple;
pub use optimize::{optimize_asymptotic, optimize_key_length, AsymptoticOptimum, Optimum, SearchSpace};
pub use rate::{
    asymptotic_rate, key_length, key_length_with, min_pulses_for_key, qber_threshold, Breakdown, EvalOptions,
    KeyConfig, LeakQber, MinPulses, OperatingPoint, PeSharing, ProtocolCounts, RateResult, SecurityBudget,
    SiftingProbabilities,
};
pub use sim::{empirical_rate_check, simulate, Basis, DetectionRecord, SimTally};
pub use spdc::{SetupParams, SourceStats};
