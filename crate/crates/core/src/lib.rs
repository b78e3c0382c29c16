//! kaonlab: a numerical laboratory for neutral-kaon decay-time statistics.
//!
//! Two rival descriptions of the decaying kaon are implemented side by
//! side: the standard non-Hermitian mass-decay-matrix evolution ([`wwa`])
//! and a binary temporal-wave-function model in which the decay time obeys
//! a Born rule of its own ([`twf`]). The two agree exactly when CP
//! violation is switched off and split measurably through the two-pion
//! asymmetry A_pipi(t) ([`asymmetry`]). The crate closes the loop with a
//! Monte Carlo event generator ([`events`]), chi-square fits and model
//! tests ([`fit`]), and an end-to-end study pipeline ([`pipeline`]).
//!
//! Two standalone numerical checks accompany the kaon machinery:
//! [`golden_rule`] integrates a discretized multi-channel continuum and
//! verifies the golden-rule decay constant and its per-species sum rule,
//! and [`spectral`] demonstrates that Breit-Wigner energy fits cannot
//! distinguish the two readings of pure exponential decay.
//!
//! Unit conventions: times in units of the K_S lifetime tau_S, rates in
//! 1/tau_S, CSV output with 12 significant digits.
//!
//! ```
//! use kaonlab::{asymmetry_at, large_t_limit, KaonPhysics, Model, TwfVariant};
//!
//! let physics = KaonPhysics::default();
//! // The standard description starts at zero asymmetry...
//! assert!(asymmetry_at(Model::Wwa, 0.0, &physics).unwrap().abs() < 1e-12);
//! // ...the temporal-wave-function model starts near 8%...
//! let twf = Model::Twf(TwfVariant::MatchedLargeT);
//! assert!((asymmetry_at(twf, 0.0, &physics).unwrap() - 0.0744).abs() < 1e-3);
//! // ...and both settle to 2 Re(eps) at large times.
//! assert_eq!(large_t_limit(twf, &physics), large_t_limit(Model::Wwa, &physics));
//! ```

// Guards written as `!(x > 0.0)` are deliberate: they reject NaN, which
// `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymmetry;
pub mod error;
pub mod events;
pub mod evolution;
pub mod fit;
pub mod golden_rule;
pub mod kv;
pub mod params;
pub mod pipeline;
pub mod spectral;
pub mod twf;
pub mod wwa;

pub use asymmetry::{asymmetry_at, curve, discrepancy, large_t_limit, AsymmetryCurve, Model};
pub use error::{Error, Result};
pub use events::{bin_asymmetry, sample, BinnedAsymmetry, DecayEvent};
pub use fit::{fit_epsilon, model_chi2, FitResult, ModelChi2};
pub use kv::KvDoc;
pub use params::{derive, load_physics, ComplexEnergy, DerivedConstants, KaonPhysics, Scaled};
pub use twf::{constrain, prepare, twf_amplitude, Preparation, TwfParams, TwfVariant, TwoComponentAmplitude};
pub use wwa::{complex_energies, evolve_flavor, Channel, Flavor, FlavorState, LeptonSign, RateCurve};
