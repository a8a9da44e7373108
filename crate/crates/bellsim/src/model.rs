//! Value-level model of the entanglement-distribution state chain.
//!
//! The chain starts from a probabilistic atom-photon entangled source with
//! pair amplitude `chi` and asymmetry angle `eta`, sends the photonic half
//! through a fiber channel, stores it with helicity-dependent efficiency at
//! the receiving site, and ends in an effective two-photon polarization
//! state parametrized by a mixing angle `eta_f`, a relative phase `phi_f`,
//! and a pair probability per trial. The unpaired single-excitation left at
//! the generating site when storage fails is modeled as a separate
//! background channel.
//!
//! All types are immutable values and all operations are pure functions;
//! they are safe to evaluate concurrently without coordination.

use thiserror::Error;

use crate::constants::{
    DEFAULT_B_FIELD_GAUSS, DEFAULT_CHI, DEFAULT_EPS_B_MINUS, DEFAULT_EPS_B_PLUS, DEFAULT_ETA,
    DEFAULT_G_FACTOR, DEFAULT_STORAGE_TIME_B_S, MU_B_OVER_HBAR,
};

/// Errors from the state-chain derivations.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    /// Both storage efficiencies are zero: no photon is ever stored and the
    /// effective two-photon state is undefined.
    #[error("average storage efficiency is zero; effective state undefined")]
    ZeroStorageEfficiency,
    /// Average storage efficiency is one: every photon is stored, so the
    /// unpaired-excitation weights (which condition on storage failure)
    /// are undefined.
    #[error("average storage efficiency is one; single-excitation weights undefined")]
    FullStorage,
    /// A parameter is outside its documented range.
    #[error("parameter `{name}` = {value} outside valid range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), ModelError> {
    // NaN fails every comparison and is rejected here too.
    if value >= lo && value <= hi {
        Ok(())
    } else {
        Err(ModelError::OutOfRange {
            name,
            value,
            range: match (lo, hi) {
                _ if lo == 0.0 && hi == 1.0 => "[0, 1]",
                _ => "[lo, hi]",
            },
        })
    }
}

/// Parameters of the probabilistic entangled-pair source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    /// Dimensionless pair amplitude, 0 < chi < 1. The pair generation
    /// probability per trial scales as chi².
    pub chi: f64,
    /// Asymmetry angle in radians, in [0, π/2]. `eta = π/4` is a symmetric
    /// source.
    pub eta: f64,
    /// Retrieval-and-detection factor for the generating site's idler,
    /// in [0, 1]. Scales the pair and single-excitation probabilities.
    pub retrieval: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        Self {
            chi: DEFAULT_CHI,
            eta: DEFAULT_ETA,
            retrieval: 1.0,
        }
    }
}

impl SourceParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(ModelError::OutOfRange {
                name: "chi",
                value: self.chi,
                range: "(0, 1)",
            });
        }
        if !(self.eta >= 0.0 && self.eta <= std::f64::consts::FRAC_PI_2) {
            return Err(ModelError::OutOfRange {
                name: "eta",
                value: self.eta,
                range: "[0, pi/2]",
            });
        }
        check_range("retrieval", self.retrieval, 0.0, 1.0)
    }
}

/// Sign convention for the quarter-wave-plate pair in the fiber path,
/// i.e. whether the helicity modes map as `a± → ±a∓` or `a± → ∓a∓`.
///
/// The two conventions differ by an overall sign of the transmitted
/// two-photon amplitude. An overall sign is invisible to every detection
/// probability, so the choice has no observable consequence; the flag is
/// kept so configurations can state which convention they assume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QwpSignConvention {
    /// `a± → ±a∓`
    #[default]
    PlusMinus,
    /// `a± → ∓a∓`
    MinusPlus,
}

/// Parameters of the fiber channel between the two sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Fiber transmission, in [0, 1].
    pub transmission: f64,
    /// Helicity-swap sign convention of the quarter-wave-plate pair.
    pub qwp_sign_convention: QwpSignConvention,
    /// Static contribution to the two-photon relative phase, in radians.
    /// Collects optical-path and light-shift phases not captured by the
    /// Larmor term; zero by default.
    pub static_phase: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            transmission: 1.0,
            qwp_sign_convention: QwpSignConvention::default(),
            static_phase: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_range("transmission", self.transmission, 0.0, 1.0)?;
        if !self.static_phase.is_finite() {
            return Err(ModelError::OutOfRange {
                name: "static_phase",
                value: self.static_phase,
                range: "finite",
            });
        }
        Ok(())
    }
}

/// Storage parameters of the receiving site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageParams {
    /// Combined storage-and-retrieval efficiency for positive helicity.
    pub eps_plus: f64,
    /// Combined storage-and-retrieval efficiency for negative helicity.
    pub eps_minus: f64,
    /// Bias magnetic field along the propagation axis, in gauss.
    pub b_field: f64,
    /// Landé g-factor of the storage level.
    pub g_factor: f64,
    /// Storage time in seconds.
    pub storage_time: f64,
}

impl Default for StorageParams {
    fn default() -> Self {
        Self {
            eps_plus: DEFAULT_EPS_B_PLUS,
            eps_minus: DEFAULT_EPS_B_MINUS,
            b_field: DEFAULT_B_FIELD_GAUSS,
            g_factor: DEFAULT_G_FACTOR,
            storage_time: DEFAULT_STORAGE_TIME_B_S,
        }
    }
}

impl StorageParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_range("eps_plus", self.eps_plus, 0.0, 1.0)?;
        check_range("eps_minus", self.eps_minus, 0.0, 1.0)?;
        if self.storage_time < 0.0 || !self.storage_time.is_finite() {
            return Err(ModelError::OutOfRange {
                name: "storage_time",
                value: self.storage_time,
                range: ">= 0",
            });
        }
        if !self.b_field.is_finite() {
            return Err(ModelError::OutOfRange {
                name: "b_field",
                value: self.b_field,
                range: "finite",
            });
        }
        if !self.g_factor.is_finite() {
            return Err(ModelError::OutOfRange {
                name: "g_factor",
                value: self.g_factor,
                range: "finite",
            });
        }
        Ok(())
    }
}

/// The effective two-photon polarization state
/// `cos(eta_f)|HV> + exp(i phi_f) sin(eta_f)|VH>`, together with the
/// probability per trial that a detectable pair is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTwoPhotonState {
    /// Mixing angle in radians, in [0, π/2]. `π/4` is maximal entanglement.
    pub eta_f: f64,
    /// Relative phase in radians.
    pub phi_f: f64,
    /// Probability per trial that a detectable idler pair is produced.
    pub p_pair: f64,
}

impl EffectiveTwoPhotonState {
    pub fn new(eta_f: f64, phi_f: f64, p_pair: f64) -> Self {
        Self {
            eta_f,
            phi_f,
            p_pair,
        }
    }
}

/// Probabilities for the unpaired excitation at the generating site to
/// occupy the +/− logical state, conditioned on the transmitted photon not
/// having been stored. The weights always sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleExcitationWeights {
    pub w_plus: f64,
    pub w_minus: f64,
}

/// The uncorrelated single-photon background channel: with probability
/// `probability` per trial the generating site emits a detectable idler
/// while the receiving site holds nothing, polarized per `weights`
/// (`w_plus` → H, `w_minus` → V).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleExcitationChannel {
    pub probability: f64,
    pub weights: SingleExcitationWeights,
}

impl SingleExcitationChannel {
    /// A disabled background channel (no single-excitation events).
    pub fn none() -> Self {
        Self {
            probability: 0.0,
            weights: SingleExcitationWeights {
                w_plus: 1.0,
                w_minus: 0.0,
            },
        }
    }
}

/// Larmor precession phase accumulated over `storage_time` seconds in a
/// bias field of `b_field` gauss: `-2 (g μ_B / ħ) B₀ t`.
pub fn larmor_phase(b_field: f64, g_factor: f64, storage_time: f64) -> f64 {
    -2.0 * g_factor * MU_B_OVER_HBAR * b_field * storage_time
}

/// Average storage efficiency seen by the source asymmetry `eta`:
/// `ε = ε₋ cos²η + ε₊ sin²η`.
pub fn average_storage_efficiency(eps_plus: f64, eps_minus: f64, eta: f64) -> f64 {
    let (s, c) = eta.sin_cos();
    eps_minus * c * c + eps_plus * s * s
}

/// Derives the effective two-photon state from the source, channel, and
/// storage parameters.
///
/// The mixing angle follows `cos(eta_f) = sqrt(ε₋/ε) cos(eta)` with `ε` the
/// average storage efficiency; the phase is the Larmor phase plus the
/// channel's static offset; and the pair probability is the product
/// `chi² · transmission · ε · retrieval`.
///
/// Rejects parameter sets whose average storage efficiency is zero: with no
/// photon ever stored there is no two-photon state to speak of.
pub fn derive_effective_state(
    source: &SourceParams,
    channel: &ChannelParams,
    storage: &StorageParams,
) -> Result<EffectiveTwoPhotonState, ModelError> {
    source.validate()?;
    channel.validate()?;
    storage.validate()?;

    let eps = average_storage_efficiency(storage.eps_plus, storage.eps_minus, source.eta);
    if eps <= 0.0 {
        return Err(ModelError::ZeroStorageEfficiency);
    }

    let cos_eta_f = ((storage.eps_minus / eps).sqrt() * source.eta.cos()).clamp(0.0, 1.0);
    let eta_f = cos_eta_f.acos();

    // The quarter-wave-plate sign convention only flips the overall sign of
    // the transmitted amplitude, which is unobservable; phi_f is unaffected.
    let phi_f = larmor_phase(storage.b_field, storage.g_factor, storage.storage_time)
        + channel.static_phase;

    let p_pair = source.chi * source.chi * channel.transmission * eps * source.retrieval;

    Ok(EffectiveTwoPhotonState {
        eta_f,
        phi_f,
        p_pair,
    })
}

/// Weights of the unpaired excitation left at the generating site when the
/// transmitted photon is not stored:
/// `w₊ = (1-ε₋) cos²η / (1-ε)`, `w₋ = 1 - w₊`.
///
/// Rejects `ε = 1` (every photon stored), where the conditional weights are
/// undefined.
pub fn single_excitation_weights(
    source: &SourceParams,
    storage: &StorageParams,
) -> Result<SingleExcitationWeights, ModelError> {
    source.validate()?;
    storage.validate()?;

    let eps = average_storage_efficiency(storage.eps_plus, storage.eps_minus, source.eta);
    if eps >= 1.0 {
        return Err(ModelError::FullStorage);
    }
    let c = source.eta.cos();
    let w_plus = ((1.0 - storage.eps_minus) * c * c / (1.0 - eps)).clamp(0.0, 1.0);
    // Computed as the complement so the pair sums to one exactly.
    let w_minus = 1.0 - w_plus;
    Ok(SingleExcitationWeights { w_plus, w_minus })
}

/// Derives the single-excitation background channel: the per-trial
/// probability that only the generating site emits a detectable idler
/// (`chi² (1 - transmission·ε) retrieval`), together with its polarization
/// weights.
pub fn derive_single_excitation_channel(
    source: &SourceParams,
    channel: &ChannelParams,
    storage: &StorageParams,
) -> Result<SingleExcitationChannel, ModelError> {
    channel.validate()?;
    let weights = single_excitation_weights(source, storage)?;
    let eps = average_storage_efficiency(storage.eps_plus, storage.eps_minus, source.eta);
    let probability =
        source.chi * source.chi * (1.0 - channel.transmission * eps) * source.retrieval;
    Ok(SingleExcitationChannel {
        probability,
        weights,
    })
}
