//! Turns counters into physics results: correlation estimates with
//! uncertainties, sinusoidal fringe fits, CHSH angle optimization, and the
//! Bell parameter.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use thiserror::Error;

use crate::detection::AnalyzerSetting;
use crate::model::EffectiveTwoPhotonState;
use crate::montecarlo::CoincidenceCounts;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    /// Zero total coincidences carry no correlation information.
    #[error("no coincidences recorded; correlation undefined")]
    NoCoincidences,
    /// The four estimates do not realize the (θ_A, θ_A', θ_B, θ_B') roles.
    #[error("settings do not form a CHSH quadruple: {0}")]
    SettingMismatch(String),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    /// The sampled angles span too little of the fringe to constrain it.
    #[error("samples span {span_deg}° of rotation; at least 90° required")]
    InsufficientCoverage { span_deg: f64 },
    /// Sample uncertainties must be all positive or all zero.
    #[error("sample uncertainties mix zero and nonzero values")]
    MixedWeights,
    /// The weighted normal equations are singular.
    #[error("degenerate fit design")]
    DegenerateFit,
    #[error("fitted offset {0} is not positive")]
    NonPositiveOffset(f64),
}

/// A correlation value `E(θ_A, θ_B)` with its standard error and the
/// setting and coincidence count that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationEstimate {
    pub e_value: f64,
    pub sigma: f64,
    pub setting: AnalyzerSetting,
    pub n_coincidences: u64,
}

/// The Bell parameter `S` with its uncertainty, the four angle roles, and
/// the four correlation estimates it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct BellResult {
    pub s_value: f64,
    pub sigma: f64,
    pub theta_a_deg: f64,
    pub theta_a_prime_deg: f64,
    pub theta_b_deg: f64,
    pub theta_b_prime_deg: f64,
    pub estimates: [CorrelationEstimate; 4],
}

/// Correlation estimate from coincidence counters:
/// `E = (C13 + C24 - C14 - C23) / (C13 + C24 + C14 + C23)`, with the
/// binomial standard error `σ = sqrt((1 - E²) / N)`.
pub fn estimate_e(
    counts: &CoincidenceCounts,
    setting: AnalyzerSetting,
) -> Result<CorrelationEstimate, AnalysisError> {
    let n = counts.total_coincidences();
    if n == 0 {
        return Err(AnalysisError::NoCoincidences);
    }
    let agree = (counts.c13() + counts.c24()) as f64;
    let disagree = (counts.c14() + counts.c23()) as f64;
    let total = n as f64;
    let e_value = (agree - disagree) / total;
    let sigma = ((1.0 - e_value * e_value).max(0.0) / total).sqrt();
    Ok(CorrelationEstimate {
        e_value,
        sigma,
        setting,
        n_coincidences: n,
    })
}

/// Alternative uncertainty for `estimate_e`: full first-order Poisson
/// propagation through the ratio, treating the four counters as
/// independent Poisson variables with variance equal to their counts.
/// Agrees with the binomial form to rounding error.
pub fn sigma_e_poisson(counts: &CoincidenceCounts) -> Result<f64, AnalysisError> {
    let n = counts.total_coincidences();
    if n == 0 {
        return Err(AnalysisError::NoCoincidences);
    }
    let total = n as f64;
    let diff = (counts.c13() + counts.c24()) as f64 - (counts.c14() + counts.c23()) as f64;
    let mut var = 0.0;
    for (count, sign) in [
        (counts.c13(), 1.0),
        (counts.c24(), 1.0),
        (counts.c14(), -1.0),
        (counts.c23(), -1.0),
    ] {
        // dE/dC_i = (sign * total - diff) / total^2 for each counter.
        let grad = (sign * total - diff) / (total * total);
        var += grad * grad * count as f64;
    }
    Ok(var.sqrt())
}

fn angle_distance_mod_180(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// CHSH Bell parameter from four correlation estimates in the roles
/// `E(θ_A, θ_B) + E(θ_A', θ_B) + E(θ_A, θ_B') - E(θ_A', θ_B')`.
/// The uncertainty is the quadrature sum of the four standard errors.
pub fn chsh_s(
    e1: &CorrelationEstimate,
    e2: &CorrelationEstimate,
    e3: &CorrelationEstimate,
    e4: &CorrelationEstimate,
) -> Result<BellResult, AnalysisError> {
    const TOL: f64 = 1e-9;
    let theta_a = e1.setting.theta_a_deg;
    let theta_b = e1.setting.theta_b_deg;
    let theta_a_prime = e2.setting.theta_a_deg;
    let theta_b_prime = e3.setting.theta_b_deg;

    let check = |ok: bool, msg: &str| {
        if ok {
            Ok(())
        } else {
            Err(AnalysisError::SettingMismatch(msg.to_string()))
        }
    };
    check(
        angle_distance_mod_180(e2.setting.theta_b_deg, theta_b) < TOL,
        "second estimate must share θ_B with the first",
    )?;
    check(
        angle_distance_mod_180(e3.setting.theta_a_deg, theta_a) < TOL,
        "third estimate must share θ_A with the first",
    )?;
    check(
        angle_distance_mod_180(e4.setting.theta_a_deg, theta_a_prime) < TOL,
        "fourth estimate must share θ_A' with the second",
    )?;
    check(
        angle_distance_mod_180(e4.setting.theta_b_deg, theta_b_prime) < TOL,
        "fourth estimate must share θ_B' with the third",
    )?;
    check(
        angle_distance_mod_180(theta_a, theta_a_prime) > TOL,
        "θ_A and θ_A' coincide",
    )?;
    check(
        angle_distance_mod_180(theta_b, theta_b_prime) > TOL,
        "θ_B and θ_B' coincide",
    )?;

    let s_value = e1.e_value + e2.e_value + e3.e_value - e4.e_value;
    let sigma =
        (e1.sigma * e1.sigma + e2.sigma * e2.sigma + e3.sigma * e3.sigma + e4.sigma * e4.sigma)
            .sqrt();
    Ok(BellResult {
        s_value,
        sigma,
        theta_a_deg: theta_a,
        theta_a_prime_deg: theta_a_prime,
        theta_b_deg: theta_b,
        theta_b_prime_deg: theta_b_prime,
        estimates: [*e1, *e2, *e3, *e4],
    })
}

/// Result of a sinusoidal fringe fit
/// `count(θ) = offset · (1 + visibility · cos(2(θ - phase)))` with the
/// period fixed at 180°.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeFit {
    pub offset: f64,
    pub amplitude: f64,
    /// Fringe phase in degrees, normalized to [0, 180).
    pub phase_deg: f64,
    /// `amplitude / offset`.
    pub visibility: f64,
    pub sigma_offset: f64,
    pub sigma_visibility: f64,
    pub sigma_phase_deg: f64,
    /// Weighted sum of squared residuals.
    pub chi2: f64,
    /// Residual degrees of freedom (samples minus three parameters).
    pub dof: usize,
}

impl FringeFit {
    /// The fringe period in θ is fixed by the half-wave-plate geometry.
    pub const PERIOD_DEG: f64 = 180.0;

    /// Fitted curve value at `theta_deg`.
    pub fn value_at(&self, theta_deg: f64) -> f64 {
        let t = (2.0 * (theta_deg - self.phase_deg)).to_radians();
        self.offset * (1.0 + self.visibility * t.cos())
    }
}

enum WeightScheme {
    /// All uncertainties positive: weights 1/σ², covariance (XᵀWX)⁻¹.
    Given,
    /// All uncertainties zero: unit weights, covariance scaled by the
    /// residual variance.
    Unit,
}

fn weight_scheme(sigmas: impl Iterator<Item = f64> + Clone) -> Result<WeightScheme, AnalysisError> {
    let any_zero = sigmas.clone().any(|s| s == 0.0);
    let all_zero = sigmas.clone().all(|s| s == 0.0);
    if sigmas.clone().any(|s| s < 0.0 || !s.is_finite()) {
        return Err(AnalysisError::MixedWeights);
    }
    match (any_zero, all_zero) {
        (false, _) => Ok(WeightScheme::Given),
        (true, true) => Ok(WeightScheme::Unit),
        (true, false) => Err(AnalysisError::MixedWeights),
    }
}

fn check_coverage(angles: impl Iterator<Item = f64>) -> Result<(), AnalysisError> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for a in angles {
        min = min.min(a);
        max = max.max(a);
    }
    let span_deg = max - min;
    if span_deg < 90.0 {
        return Err(AnalysisError::InsufficientCoverage { span_deg });
    }
    Ok(())
}

/// Weighted least-squares fit of fringe counts versus θ (degrees) to a
/// 180°-periodic sinusoid, linearized on the basis
/// `a + b cos(2θ) + c sin(2θ)` and solved by the normal equations, then
/// transformed to (offset, visibility, phase) with first-order error
/// propagation.
///
/// Samples are `(θ_deg, count, σ_count)`. Uncertainties must be either all
/// positive (used as weights) or all zero (unit weights; the covariance is
/// then scaled by the residual variance).
pub fn fit_fringe(samples: &[(f64, f64, f64)]) -> Result<FringeFit, AnalysisError> {
    if samples.len() < 4 {
        return Err(AnalysisError::InsufficientData {
            needed: 4,
            got: samples.len(),
        });
    }
    check_coverage(samples.iter().map(|s| s.0))?;
    let scheme = weight_scheme(samples.iter().map(|s| s.2))?;

    let mut xtx = Matrix3::zeros();
    let mut xty = Vector3::zeros();
    for &(theta_deg, y, sigma) in samples {
        let w = match scheme {
            WeightScheme::Given => 1.0 / (sigma * sigma),
            WeightScheme::Unit => 1.0,
        };
        let t = (2.0 * theta_deg).to_radians();
        let row = Vector3::new(1.0, t.cos(), t.sin());
        xtx += w * row * row.transpose();
        xty += w * y * row;
    }
    let inv = xtx.try_inverse().ok_or(AnalysisError::DegenerateFit)?;
    let params = inv * xty;
    let (a, b, c) = (params[0], params[1], params[2]);

    let mut chi2 = 0.0;
    for &(theta_deg, y, sigma) in samples {
        let t = (2.0 * theta_deg).to_radians();
        let fit = a + b * t.cos() + c * t.sin();
        let r = y - fit;
        let w = match scheme {
            WeightScheme::Given => 1.0 / (sigma * sigma),
            WeightScheme::Unit => 1.0,
        };
        chi2 += w * r * r;
    }
    let dof = samples.len() - 3;
    let cov = match scheme {
        WeightScheme::Given => inv,
        WeightScheme::Unit => inv * (chi2 / dof as f64),
    };

    if a <= 0.0 {
        return Err(AnalysisError::NonPositiveOffset(a));
    }
    let amplitude = b.hypot(c);
    let visibility = amplitude / a;
    let sigma_offset = cov[(0, 0)].max(0.0).sqrt();

    // Below rounding level the fringe is flat and the phase unconstrained.
    let flat = amplitude <= 1e-12 * a;
    let (phase_deg, sigma_visibility, sigma_phase_deg) = if !flat {
        let phase_deg = (0.5 * c.atan2(b)).to_degrees().rem_euclid(180.0);
        // Delta method through v = sqrt(b²+c²)/a and phase = atan2(c,b)/2.
        let jv = Vector3::new(-amplitude / (a * a), b / (amplitude * a), c / (amplitude * a));
        let sigma_v = (jv.transpose() * cov * jv)[(0, 0)].max(0.0).sqrt();
        let r2 = amplitude * amplitude;
        let jp = Vector3::new(0.0, -c / (2.0 * r2), b / (2.0 * r2));
        let sigma_p = (jp.transpose() * cov * jp)[(0, 0)].max(0.0).sqrt().to_degrees();
        (phase_deg, sigma_v, sigma_p)
    } else {
        // Flat fringe: the phase is unconstrained.
        let sigma_v = (cov[(1, 1)] + cov[(2, 2)]).max(0.0).sqrt() / a;
        (0.0, sigma_v, f64::INFINITY)
    };

    Ok(FringeFit {
        offset: a,
        amplitude,
        phase_deg,
        visibility,
        sigma_offset,
        sigma_visibility,
        sigma_phase_deg,
        chi2,
        dof,
    })
}

/// Result of fitting measured correlations `E(θ_A)` at fixed `θ_B` to the
/// two-channel form
/// `E = -1/2 [A_diff cos(2(θ_A-θ_B)) + A_sum cos(2(θ_A+θ_B))]`.
///
/// The fit itself runs on the Fourier basis `b cos(2θ_A) + c sin(2θ_A)`,
/// which is always well-posed given angular coverage; the channel
/// amplitudes are then recovered from `θ_B`. At special values of `θ_B`
/// only some combinations are identifiable, so those fields are optional:
/// `product` (the visibility-weighted `sin(2η_f) cos(φ_f)`) requires
/// `sin(2θ_B) ≠ 0` and `visibility_scale` requires `cos(2θ_B) ≠ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFit {
    /// Coefficient of `cos(2θ_A)` in the fitted sinusoid.
    pub coeff_cos: f64,
    /// Coefficient of `sin(2θ_A)` in the fitted sinusoid.
    pub coeff_sin: f64,
    /// Phase of the fitted sinusoid in degrees, in [0, 180).
    pub phase_deg: f64,
    /// `V · sin(2η_f) cos(φ_f)`, when identifiable.
    pub product: Option<f64>,
    /// Standard error of `product`.
    pub sigma_product: Option<f64>,
    /// Overall visibility scale `V`, when identifiable.
    pub visibility_scale: Option<f64>,
    pub sigma_visibility_scale: Option<f64>,
    /// `V (1 + sin 2η_f cos φ_f)`, the θ_A+θ_B channel amplitude.
    pub amplitude_sum: Option<f64>,
    /// `V (1 - sin 2η_f cos φ_f)`, the θ_A-θ_B channel amplitude.
    pub amplitude_diff: Option<f64>,
    pub chi2: f64,
    pub dof: usize,
}

/// Weighted least-squares fit of correlation estimates versus θ_A at fixed
/// `θ_B`. Samples are `(θ_A_deg, estimate)` pairs; the estimates'
/// uncertainties provide the weights (all zero means unit weights).
pub fn fit_correlation(
    samples: &[(f64, CorrelationEstimate)],
    theta_b_deg: f64,
) -> Result<CorrelationFit, AnalysisError> {
    if samples.len() < 4 {
        return Err(AnalysisError::InsufficientData {
            needed: 4,
            got: samples.len(),
        });
    }
    check_coverage(samples.iter().map(|s| s.0))?;
    let scheme = weight_scheme(samples.iter().map(|s| s.1.sigma))?;

    let mut xtx = Matrix2::zeros();
    let mut xty = Vector2::zeros();
    for (theta_deg, est) in samples {
        let w = match scheme {
            WeightScheme::Given => 1.0 / (est.sigma * est.sigma),
            WeightScheme::Unit => 1.0,
        };
        let t = (2.0 * theta_deg).to_radians();
        let row = Vector2::new(t.cos(), t.sin());
        xtx += w * row * row.transpose();
        xty += w * est.e_value * row;
    }
    let inv = xtx.try_inverse().ok_or(AnalysisError::DegenerateFit)?;
    let params = inv * xty;
    let (b, c) = (params[0], params[1]);

    let mut chi2 = 0.0;
    for (theta_deg, est) in samples {
        let t = (2.0 * theta_deg).to_radians();
        let r = est.e_value - (b * t.cos() + c * t.sin());
        let w = match scheme {
            WeightScheme::Given => 1.0 / (est.sigma * est.sigma),
            WeightScheme::Unit => 1.0,
        };
        chi2 += w * r * r;
    }
    let dof = samples.len() - 2;
    let cov = match scheme {
        WeightScheme::Given => inv,
        WeightScheme::Unit => inv * (chi2 / dof as f64),
    };

    // E(θ_A) = -V cos2θ_B cos2θ_A + V K sin2θ_B sin2θ_A, so the channel
    // quantities follow from the Fourier coefficients and θ_B.
    const TRIG_TOL: f64 = 1e-9;
    let tb = (2.0 * theta_b_deg).to_radians();
    let (sin2b, cos2b) = tb.sin_cos();
    let (product, sigma_product) = if sin2b.abs() > TRIG_TOL {
        (
            Some(c / sin2b),
            Some(cov[(1, 1)].max(0.0).sqrt() / sin2b.abs()),
        )
    } else {
        (None, None)
    };
    let (scale, sigma_scale) = if cos2b.abs() > TRIG_TOL {
        (
            Some(-b / cos2b),
            Some(cov[(0, 0)].max(0.0).sqrt() / cos2b.abs()),
        )
    } else {
        (None, None)
    };
    let (amplitude_sum, amplitude_diff) = match (scale, product) {
        (Some(v), Some(p)) => (Some(v + p), Some(v - p)),
        _ => (None, None),
    };

    let phase_deg = if b.hypot(c) > 0.0 {
        (0.5 * c.atan2(b)).to_degrees().rem_euclid(180.0)
    } else {
        0.0
    };

    Ok(CorrelationFit {
        coeff_cos: b,
        coeff_sin: c,
        phase_deg,
        product,
        sigma_product,
        visibility_scale: scale,
        sigma_visibility_scale: sigma_scale,
        amplitude_sum,
        amplitude_diff,
        chi2,
        dof,
    })
}

/// The four CHSH angles and the Bell parameter the model predicts there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalAngles {
    pub theta_a_deg: f64,
    pub theta_a_prime_deg: f64,
    pub theta_b_deg: f64,
    pub theta_b_prime_deg: f64,
    pub predicted_s: f64,
}

/// Model correlation expressed through its Fourier coefficients,
/// `E(a, b) = -V cos2b cos2a + V K sin2b sin2a` with
/// `K = cos(φ_f) sin(2η_f)`; `a`, `b` in radians here.
#[derive(Clone, Copy)]
struct CorrelationKernel {
    v: f64,
    vk: f64,
}

impl CorrelationKernel {
    fn new(state: &EffectiveTwoPhotonState, visibility: f64) -> Self {
        let k = state.phi_f.cos() * (2.0 * state.eta_f).sin();
        Self {
            v: visibility,
            vk: visibility * k,
        }
    }

    fn e(&self, a: f64, b: f64) -> f64 {
        -self.v * (2.0 * b).cos() * (2.0 * a).cos() + self.vk * (2.0 * b).sin() * (2.0 * a).sin()
    }

    fn s(&self, a: f64, ap: f64, b: f64, bp: f64) -> f64 {
        self.e(a, b) + self.e(ap, b) + self.e(a, bp) - self.e(ap, bp)
    }
}

/// Finds analyzer angles maximizing the Bell parameter of the model state.
///
/// Deterministic two-stage search: a 1° grid scan over the four angles
/// (separable in θ_B and θ_B' for each site-A pair, so the scan is cheap),
/// followed by cyclic coordinate refinement using the closed-form maximizer
/// of `R cos(2θ - ψ)` per coordinate. Grid ties resolve to the smallest
/// lexicographic (θ_A, θ_A', θ_B, θ_B') quadruple. Because rotating both
/// site-A angles by 90° flips the sign of S, the maximum of S equals the
/// maximum of |S|; the positive branch is returned, with angles in
/// [0°, 180°).
pub fn find_optimal_angles(state: &EffectiveTwoPhotonState, visibility: f64) -> OptimalAngles {
    let kernel = CorrelationKernel::new(state, visibility);

    const STEPS: usize = 180;
    let mut cos2 = [0.0f64; STEPS];
    let mut sin2 = [0.0f64; STEPS];
    for (i, (c2, s2)) in cos2.iter_mut().zip(sin2.iter_mut()).enumerate() {
        let t = (i as f64).to_radians();
        *c2 = (2.0 * t).cos();
        *s2 = (2.0 * t).sin();
    }

    let mut best = (f64::NEG_INFINITY, 0usize, 0usize, 0usize, 0usize);
    for ia in 0..STEPS {
        for iap in 0..STEPS {
            let sum_c = cos2[ia] + cos2[iap];
            let sum_s = sin2[ia] + sin2[iap];
            let diff_c = cos2[ia] - cos2[iap];
            let diff_s = sin2[ia] - sin2[iap];
            // S = f(b) + g(b'): maximize the two θ_B channels independently.
            let mut best_b = (f64::NEG_INFINITY, 0usize);
            let mut best_bp = (f64::NEG_INFINITY, 0usize);
            for ib in 0..STEPS {
                let f = -kernel.v * cos2[ib] * sum_c + kernel.vk * sin2[ib] * sum_s;
                if f > best_b.0 {
                    best_b = (f, ib);
                }
                let g = -kernel.v * cos2[ib] * diff_c + kernel.vk * sin2[ib] * diff_s;
                if g > best_bp.0 {
                    best_bp = (g, ib);
                }
            }
            let s = best_b.0 + best_bp.0;
            if s > best.0 {
                best = (s, ia, iap, best_b.1, best_bp.1);
            }
        }
    }

    let mut a = (best.1 as f64).to_radians();
    let mut ap = (best.2 as f64).to_radians();
    let mut b = (best.3 as f64).to_radians();
    let mut bp = (best.4 as f64).to_radians();
    let mut s = kernel.s(a, ap, b, bp);

    // Each coordinate enters S as R cos(2θ - ψ); jump straight to ψ/2.
    const MAX_SWEEPS: usize = 256;
    for _ in 0..MAX_SWEEPS {
        for coord in 0..4 {
            let (ccoef, scoef) = match coord {
                0 => (
                    -kernel.v * ((2.0 * b).cos() + (2.0 * bp).cos()),
                    kernel.vk * ((2.0 * b).sin() + (2.0 * bp).sin()),
                ),
                1 => (
                    -kernel.v * ((2.0 * b).cos() - (2.0 * bp).cos()),
                    kernel.vk * ((2.0 * b).sin() - (2.0 * bp).sin()),
                ),
                2 => (
                    -kernel.v * ((2.0 * a).cos() + (2.0 * ap).cos()),
                    kernel.vk * ((2.0 * a).sin() + (2.0 * ap).sin()),
                ),
                _ => (
                    -kernel.v * ((2.0 * a).cos() - (2.0 * ap).cos()),
                    kernel.vk * ((2.0 * a).sin() - (2.0 * ap).sin()),
                ),
            };
            if ccoef.hypot(scoef) < 1e-15 {
                continue;
            }
            let target = 0.5 * scoef.atan2(ccoef);
            match coord {
                0 => a = target,
                1 => ap = target,
                2 => b = target,
                _ => bp = target,
            }
        }
        let s_new = kernel.s(a, ap, b, bp);
        if s_new - s < 1e-12 {
            s = s_new.max(s);
            break;
        }
        s = s_new;
    }

    let norm = |t: f64| t.to_degrees().rem_euclid(180.0);
    OptimalAngles {
        theta_a_deg: norm(a),
        theta_a_prime_deg: norm(ap),
        theta_b_deg: norm(b),
        theta_b_prime_deg: norm(bp),
        predicted_s: s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{DEFAULT_CHSH_ANGLES_DEG, TSIRELSON_BOUND};
    use crate::detection::{analytic_correlation, coincidence_probability, DetectorBank};
    use crate::model::{
        derive_effective_state, ChannelParams, SingleExcitationChannel, SourceParams,
        StorageParams,
    };
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    const TOL: f64 = 1e-12;

    fn counts(c13: u64, c14: u64, c23: u64, c24: u64) -> CoincidenceCounts {
        CoincidenceCounts {
            c: [[c13, c14], [c23, c24]],
            trials: c13 + c14 + c23 + c24,
        }
    }

    fn derived_state_zero_field() -> EffectiveTwoPhotonState {
        let storage = StorageParams {
            b_field: 0.0,
            ..StorageParams::default()
        };
        derive_effective_state(&SourceParams::default(), &ChannelParams::default(), &storage)
            .unwrap()
    }

    fn setting(a: f64, b: f64) -> AnalyzerSetting {
        AnalyzerSetting::new(a, b)
    }

    #[test]
    fn perfect_correlation_has_zero_sigma() {
        let est = estimate_e(&counts(50, 0, 0, 50), setting(0.0, 0.0)).unwrap();
        assert_eq!(est.e_value, 1.0);
        assert_eq!(est.sigma, 0.0);
        assert_eq!(est.n_coincidences, 100);
    }

    #[test]
    fn one_third_correlation_point() {
        let est = estimate_e(&counts(100, 50, 50, 100), setting(0.0, 0.0)).unwrap();
        assert!((est.e_value - 1.0 / 3.0).abs() < TOL);
        // Frozen from sqrt((1 - 1/9)/300).
        assert!((est.sigma - 0.05443310539518174).abs() < TOL);
    }

    #[test]
    fn table_row_sigma_implies_coincidence_count() {
        // E = 0.447 ± 0.017 inverts to about 2.8e3 coincidences.
        let n = ((1.0 - 0.447f64 * 0.447) / (0.017 * 0.017)).round();
        assert!((n - 2769.0).abs() < 1.0);
        let agree = 2003u64;
        let disagree = 766u64;
        let est = estimate_e(&counts(agree, disagree, 0, 0), setting(78.5, 45.0)).unwrap();
        assert!((est.e_value - 0.447).abs() < 5e-4);
        assert!((est.sigma - 0.017).abs() < 2e-4);
    }

    #[test]
    fn zero_counts_is_an_error() {
        let err = estimate_e(&counts(0, 0, 0, 0), setting(0.0, 0.0)).unwrap_err();
        assert_eq!(err, AnalysisError::NoCoincidences);
    }

    #[test]
    fn estimate_invariant_under_uniform_scaling() {
        let a = estimate_e(&counts(120, 37, 55, 88), setting(10.0, 20.0)).unwrap();
        let b = estimate_e(&counts(1200, 370, 550, 880), setting(10.0, 20.0)).unwrap();
        assert!((a.e_value - b.e_value).abs() < TOL);
    }

    #[test]
    fn poisson_sigma_matches_binomial() {
        for c in [
            counts(100, 50, 50, 100),
            counts(2003, 400, 366, 0),
            counts(7, 5, 3, 11),
            counts(1_000_000, 250_000, 250_000, 500_000),
        ] {
            let est = estimate_e(&c, setting(0.0, 0.0)).unwrap();
            let poisson = sigma_e_poisson(&c).unwrap();
            assert!(
                (poisson - est.sigma).abs() <= 0.05 * est.sigma.max(1e-300),
                "poisson {poisson} vs binomial {}",
                est.sigma
            );
            assert!((poisson - est.sigma).abs() < 1e-12);
        }
    }

    fn table1_estimates() -> [CorrelationEstimate; 4] {
        let mk = |e, s, a, b| CorrelationEstimate {
            e_value: e,
            sigma: s,
            setting: setting(a, b),
            n_coincidences: 0,
        };
        [
            mk(0.447, 0.017, 78.5, 45.0),
            mk(0.640, 0.014, 33.5, 45.0),
            mk(0.572, 0.015, 78.5, 0.0),
            mk(-0.504, 0.016, 33.5, 0.0),
        ]
    }

    #[test]
    fn chsh_from_measured_correlations() {
        let [e1, e2, e3, e4] = table1_estimates();
        let bell = chsh_s(&e1, &e2, &e3, &e4).unwrap();
        assert!((bell.s_value - 2.163).abs() < TOL);
        // Frozen quadrature sum of (0.017, 0.014, 0.015, 0.016).
        assert!((bell.sigma - 0.03108054053584011).abs() < TOL);
        assert_eq!(bell.theta_a_deg, 78.5);
        assert_eq!(bell.theta_b_prime_deg, 0.0);
    }

    #[test]
    fn chsh_of_zero_correlations_is_zero() {
        let [mut e1, mut e2, mut e3, mut e4] = table1_estimates();
        for e in [&mut e1, &mut e2, &mut e3, &mut e4] {
            e.e_value = 0.0;
        }
        let bell = chsh_s(&e1, &e2, &e3, &e4).unwrap();
        assert_eq!(bell.s_value, 0.0);
    }

    #[test]
    fn chsh_from_ideal_model_correlations() {
        let state = derived_state_zero_field();
        let (a, ap, b, bp) = DEFAULT_CHSH_ANGLES_DEG;
        let mk = |ta, tb| CorrelationEstimate {
            e_value: analytic_correlation(&state, &setting(ta, tb), 1.0),
            sigma: 0.0,
            setting: setting(ta, tb),
            n_coincidences: 0,
        };
        let bell = chsh_s(&mk(a, b), &mk(ap, b), &mk(a, bp), &mk(ap, bp)).unwrap();
        // Frozen from the closed-form chain at the derived mixing angle.
        assert!((bell.s_value - 2.599772154703968).abs() < TOL);
    }

    #[test]
    fn chsh_rejects_mismatched_roles() {
        let [e1, e2, e3, mut e4] = table1_estimates();
        e4.setting.theta_b_deg = 45.0;
        assert!(matches!(
            chsh_s(&e1, &e2, &e3, &e4),
            Err(AnalysisError::SettingMismatch(_))
        ));
    }

    #[test]
    fn chsh_rejects_duplicate_angles() {
        let [e1, mut e2, e3, mut e4] = table1_estimates();
        e2.setting.theta_a_deg = 78.5;
        e4.setting.theta_a_deg = 78.5;
        assert!(matches!(
            chsh_s(&e1, &e2, &e3, &e4),
            Err(AnalysisError::SettingMismatch(_))
        ));
    }

    /// Independent Fourier decomposition of the D1–D3 coincidence fringe.
    fn expected_fringe(
        state: &EffectiveTwoPhotonState,
        theta_b_deg: f64,
    ) -> (f64, f64, f64) {
        let (s, c) = state.eta_f.sin_cos();
        let tb = theta_b_deg.to_radians();
        let (sb, cb) = tb.sin_cos();
        let a0 = 0.5 * (c * c * sb * sb + s * s * cb * cb);
        let b = 0.5 * (c * c * sb * sb - s * s * cb * cb);
        let cc = c * s * state.phi_f.cos() * sb * cb;
        (a0, b, cc)
    }

    fn fringe_samples(
        state: &EffectiveTwoPhotonState,
        theta_b_deg: f64,
        n: usize,
        detector: usize,
    ) -> Vec<(f64, f64, f64)> {
        let conditioned = EffectiveTwoPhotonState {
            p_pair: 1.0,
            ..*state
        };
        (0..n)
            .map(|i| {
                let theta = 180.0 * i as f64 / n as f64;
                let p = coincidence_probability(
                    &conditioned,
                    &SingleExcitationChannel::none(),
                    &setting(theta, theta_b_deg),
                    detector,
                    3,
                    &DetectorBank::ideal(),
                )
                .unwrap();
                (theta, 1e4 * p, 0.0)
            })
            .collect()
    }

    #[test]
    fn fringe_fit_recovers_noiseless_curve() {
        let state = derived_state_zero_field();
        let samples = fringe_samples(&state, 135.0, 12, 1);
        let fit = fit_fringe(&samples).unwrap();

        let (a0, b, cc) = expected_fringe(&state, 135.0);
        let want_visibility = b.hypot(cc) / a0;
        let want_phase = (0.5 * cc.atan2(b)).to_degrees().rem_euclid(180.0);
        assert!(
            (fit.visibility - want_visibility).abs() < 1e-9,
            "visibility {} vs {}",
            fit.visibility,
            want_visibility
        );
        assert!((fit.phase_deg - want_phase).abs() < 1e-9);
        // Residuals of a noiseless synthetic fit collapse to rounding error.
        for &(theta, y, _) in &samples {
            assert!((fit.value_at(theta) - y).abs() < 1e-9 * fit.offset);
        }
    }

    #[test]
    fn fringe_fit_constant_samples_zero_visibility() {
        let samples: Vec<_> = (0..8).map(|i| (22.5 * i as f64, 100.0, 0.0)).collect();
        let fit = fit_fringe(&samples).unwrap();
        assert!(fit.visibility.abs() < TOL);
        assert_eq!(fit.phase_deg, 0.0);
    }

    #[test]
    fn fringe_fit_rejects_degenerate_designs() {
        let same: Vec<_> = (0..6).map(|_| (45.0, 10.0, 1.0)).collect();
        assert!(matches!(
            fit_fringe(&same),
            Err(AnalysisError::InsufficientCoverage { .. })
        ));
        let narrow: Vec<_> = (0..6).map(|i| (i as f64, 10.0, 1.0)).collect();
        assert!(matches!(
            fit_fringe(&narrow),
            Err(AnalysisError::InsufficientCoverage { .. })
        ));
        assert!(matches!(
            fit_fringe(&[(0.0, 1.0, 1.0), (90.0, 1.0, 1.0)]),
            Err(AnalysisError::InsufficientData { .. })
        ));
    }

    #[test]
    fn fringe_fit_rejects_mixed_uncertainties() {
        let samples = vec![
            (0.0, 1.0, 1.0),
            (45.0, 2.0, 0.0),
            (90.0, 1.0, 1.0),
            (135.0, 2.0, 1.0),
        ];
        assert_eq!(fit_fringe(&samples).unwrap_err(), AnalysisError::MixedWeights);
    }

    #[test]
    fn companion_fringes_are_90_degrees_apart() {
        let state = derived_state_zero_field();
        let d1 = fit_fringe(&fringe_samples(&state, 135.0, 12, 1)).unwrap();
        let d2 = fit_fringe(&fringe_samples(&state, 135.0, 12, 2)).unwrap();
        let dphi = (d1.phase_deg - d2.phase_deg).rem_euclid(180.0);
        assert!((dphi - 90.0).abs() < 1e-9, "phase gap {dphi}");
        assert!((d1.visibility - d2.visibility).abs() < 1e-9);
    }

    fn correlation_samples(
        state: &EffectiveTwoPhotonState,
        theta_b_deg: f64,
        n: usize,
        visibility: f64,
    ) -> Vec<(f64, CorrelationEstimate)> {
        (0..n)
            .map(|i| {
                let theta = 180.0 * i as f64 / n as f64;
                let e = analytic_correlation(state, &setting(theta, theta_b_deg), visibility);
                (
                    theta,
                    CorrelationEstimate {
                        e_value: e,
                        sigma: 0.0,
                        setting: setting(theta, theta_b_deg),
                        n_coincidences: 0,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn correlation_fit_recovers_product_at_45_degrees() {
        let state = derived_state_zero_field();
        let fit = fit_correlation(&correlation_samples(&state, 45.0, 8, 1.0), 45.0).unwrap();
        let want = (2.0 * state.eta_f).sin() * state.phi_f.cos();
        let got = fit.product.unwrap();
        assert!((got - want).abs() < 1e-9, "product {got} vs {want}");
        // cos(2θ_B) vanishes at 45°, so the overall scale is unidentifiable.
        assert!(fit.visibility_scale.is_none());
    }

    #[test]
    fn correlation_fit_maximal_state_kills_difference_channel() {
        let state = EffectiveTwoPhotonState::new(FRAC_PI_4, 0.0, 1.0);
        let fit = fit_correlation(&correlation_samples(&state, 30.0, 8, 1.0), 30.0).unwrap();
        assert!(fit.amplitude_diff.unwrap().abs() < 1e-9);
        assert!((fit.amplitude_sum.unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn correlation_fit_recovers_background_visibility() {
        let state = derived_state_zero_field();
        let fit = fit_correlation(&correlation_samples(&state, 30.0, 8, 0.83), 30.0).unwrap();
        assert!((fit.visibility_scale.unwrap() - 0.83).abs() < 1e-9);
        let k = (2.0 * state.eta_f).sin();
        assert!((fit.product.unwrap() - 0.83 * k).abs() < 1e-9);
    }

    #[test]
    fn correlation_fit_requires_coverage() {
        let state = derived_state_zero_field();
        let samples: Vec<_> = correlation_samples(&state, 45.0, 8, 1.0)
            .into_iter()
            .take(4)
            .map(|(t, e)| (t / 3.0, e))
            .collect();
        assert!(matches!(
            fit_correlation(&samples, 45.0),
            Err(AnalysisError::InsufficientCoverage { .. })
        ));
    }

    #[test]
    fn optimizer_reaches_tsirelson_for_maximal_state() {
        let state = EffectiveTwoPhotonState::new(FRAC_PI_4, 0.0, 1.0);
        let opt = find_optimal_angles(&state, 1.0);
        assert!(
            (opt.predicted_s - TSIRELSON_BOUND).abs() < 1e-6,
            "S = {}",
            opt.predicted_s
        );
    }

    #[test]
    fn optimizer_capped_at_two_for_quarter_phase() {
        let state = EffectiveTwoPhotonState::new(0.9, FRAC_PI_2, 1.0);
        let opt = find_optimal_angles(&state, 1.0);
        assert!((opt.predicted_s - 2.0).abs() < 1e-6, "S = {}", opt.predicted_s);
    }

    #[test]
    fn optimizer_dominates_fixed_table_angles() {
        let state = derived_state_zero_field();
        let opt = find_optimal_angles(&state, 1.0);
        let (a, ap, b, bp) = DEFAULT_CHSH_ANGLES_DEG;
        let fixed = analytic_correlation(&state, &setting(a, b), 1.0)
            + analytic_correlation(&state, &setting(ap, b), 1.0)
            + analytic_correlation(&state, &setting(a, bp), 1.0)
            - analytic_correlation(&state, &setting(ap, bp), 1.0);
        assert!(opt.predicted_s >= fixed - 1e-9);
        assert!(opt.predicted_s <= TSIRELSON_BOUND + 1e-9);
    }
}
