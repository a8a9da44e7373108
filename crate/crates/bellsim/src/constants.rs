//! Physical constants and experiment-anchored defaults shared across the crate.

use std::f64::consts::PI;

/// Bohr magneton over hbar, in rad s^-1 G^-1: 2π × 1.3996 MHz/G.
pub const MU_B_OVER_HBAR: f64 = 2.0 * PI * 1.3996e6;

/// Effective protocol repetition rate in Hz; used to convert wall-clock
/// acquisition durations into trial counts.
pub const EFFECTIVE_REP_RATE_HZ: f64 = 108_000.0;

/// Duration of a single protocol trial in seconds (1.1 us).
pub const TRIAL_PERIOD_S: f64 = 1.1e-6;

/// Default source asymmetry angle in radians (0.81 π/4, i.e. 36.45°).
pub const DEFAULT_ETA: f64 = 0.81 * PI / 4.0;

/// Default pair amplitude. Chosen so that with the default storage
/// efficiencies the no-background coincidence rate is about 1e-4 per trial.
pub const DEFAULT_CHI: f64 = 0.0458;

/// Default combined storage-and-retrieval efficiency, positive helicity.
pub const DEFAULT_EPS_B_PLUS: f64 = 0.08;

/// Default combined storage-and-retrieval efficiency, negative helicity.
pub const DEFAULT_EPS_B_MINUS: f64 = 0.03;

/// Default bias magnetic field at the storage site, in gauss.
pub const DEFAULT_B_FIELD_GAUSS: f64 = 0.2;

/// Default Landé g-factor (ground-level F=3 value of 1/3; nuclear term
/// neglected).
pub const DEFAULT_G_FACTOR: f64 = 1.0 / 3.0;

/// Default storage time at the receiving site, in seconds (200 ns).
pub const DEFAULT_STORAGE_TIME_B_S: f64 = 200e-9;

/// Default storage time at the generating site, in seconds (500 ns).
/// Recorded for completeness; the bias field at that site is compensated,
/// so this duration contributes no precession phase.
pub const DEFAULT_STORAGE_TIME_A_S: f64 = 500e-9;

/// CHSH angle settings of the standard four-point Bell measurement,
/// in degrees: (θ_A, θ_A', θ_B, θ_B').
pub const DEFAULT_CHSH_ANGLES_DEG: (f64, f64, f64, f64) = (78.5, 33.5, 45.0, 0.0);

/// Tsirelson bound 2√2, the largest |S| any state of this model can reach.
pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;
