//! Simulator and analysis toolkit for a fiber-linked remote atomic-qubit
//! entanglement protocol.
//!
//! The crate models the chain from probabilistic atom–photon pair
//! generation through fiber transfer, helicity-dependent storage, and
//! polarization-resolved coincidence detection, and provides both
//! closed-form predictions and a seeded Monte Carlo trial engine for the
//! resulting correlation fringes and CHSH Bell parameter.
//!
//! Modules:
//! * [`model`] — the pure state-chain derivations (source, channel,
//!   storage, effective two-photon state).
//! * [`detection`] — analyzer/detector model: click-pattern probabilities
//!   and the exact correlation function.
//! * [`montecarlo`] — high-throughput stochastic trials with splittable
//!   RNG streams and the four-run detector symmetrization.
//! * [`analysis`] — correlation estimates, fringe fits, angle
//!   optimization, and the Bell parameter.
//! * [`config`] / [`scenario`] — experiment configuration files, scenario
//!   orchestration, and CSV output.

pub mod analysis;
pub mod config;
pub mod constants;
pub mod detection;
pub mod model;
pub mod montecarlo;
pub mod scenario;

pub use analysis::{
    chsh_s, estimate_e, fit_correlation, fit_fringe, find_optimal_angles, AnalysisError,
    BellResult, CorrelationEstimate, CorrelationFit, FringeFit, OptimalAngles,
};
pub use detection::{
    analytic_correlation, coincidence_probability, outcome_distribution, AnalyzerSetting,
    ClickDistribution, DetectionError, DetectorBank,
};
pub use model::{
    average_storage_efficiency, derive_effective_state, derive_single_excitation_channel,
    larmor_phase, single_excitation_weights, ChannelParams, EffectiveTwoPhotonState, ModelError,
    QwpSignConvention, SingleExcitationChannel, SingleExcitationWeights, SourceParams,
    StorageParams,
};
pub use montecarlo::{
    run_point, run_point_conditioned, run_point_partitioned, run_symmetrized,
    run_symmetrized_partitioned, CoincidenceCounts, RunPlan,
};
