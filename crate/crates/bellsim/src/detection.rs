//! Polarization-resolved detection model.
//!
//! Maps the effective two-photon state plus analyzer settings and detector
//! imperfections to per-trial click-pattern probabilities and to the exact
//! correlation function the four-run symmetrized measurement estimates.
//!
//! Conventions, fixed throughout the crate:
//! * `theta_a` / `theta_b` are the angles by which the half-wave plates
//!   rotate the polarization, in degrees, interpreted modulo 180°. The
//!   quarter-wave plate ahead of each analyzer is folded into a fixed
//!   circular-to-linear basis map, so the model acts on H/V amplitudes only.
//! * The transmitted PBS port feeds D1 (site A) / D3 (site B) and measures
//!   the rotated-H projection; the reflected port feeds D2 / D4 and measures
//!   rotated-V, i.e. the same projection at `theta + 90°`.
//! * Detectors are numbered 1..4; click patterns are bitmasks with bit
//!   `k-1` set when detector `Dk` clicks.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{EffectiveTwoPhotonState, SingleExcitationChannel};

/// Number of detectors in the bank.
pub const NUM_DETECTORS: usize = 4;

/// Number of joint click patterns over the four detectors.
pub const NUM_PATTERNS: usize = 1 << NUM_DETECTORS;

#[derive(Debug, Error, PartialEq)]
pub enum DetectionError {
    /// Site-A detectors are 1 and 2; site-B detectors are 3 and 4.
    #[error("invalid detector pair (n={n}, m={m}); expected n in {{1,2}}, m in {{3,4}}")]
    InvalidDetectorIndex { n: usize, m: usize },
}

/// Half-wave-plate polarization rotation angles at the two sites, in
/// degrees. Settings are interpreted modulo 180°.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzerSetting {
    pub theta_a_deg: f64,
    pub theta_b_deg: f64,
}

impl AnalyzerSetting {
    pub fn new(theta_a_deg: f64, theta_b_deg: f64) -> Self {
        Self {
            theta_a_deg,
            theta_b_deg,
        }
    }

    /// The same setting with site A's rotation advanced by 90°.
    pub fn flip_a(&self) -> Self {
        Self::new(self.theta_a_deg + 90.0, self.theta_b_deg)
    }

    /// The same setting with site B's rotation advanced by 90°.
    pub fn flip_b(&self) -> Self {
        Self::new(self.theta_a_deg, self.theta_b_deg + 90.0)
    }
}

/// Per-detector overall efficiencies (including propagation losses) and
/// per-trial dark/stray click probabilities, for D1..D4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorBank {
    pub eps: [f64; NUM_DETECTORS],
    pub p_dark: [f64; NUM_DETECTORS],
}

impl Default for DetectorBank {
    fn default() -> Self {
        Self::ideal()
    }
}

impl DetectorBank {
    /// Unit-efficiency, dark-count-free bank.
    pub fn ideal() -> Self {
        Self {
            eps: [1.0; NUM_DETECTORS],
            p_dark: [0.0; NUM_DETECTORS],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (i, &e) in self.eps.iter().enumerate() {
            if !(0.0..=1.0).contains(&e) {
                return Err(format!("eps{} = {} outside [0, 1]", i + 1, e));
            }
        }
        for (i, &d) in self.p_dark.iter().enumerate() {
            if !(0.0..=1.0).contains(&d) {
                return Err(format!("p_dark{} = {} outside [0, 1]", i + 1, d));
            }
        }
        Ok(())
    }

    fn eps_of(&self, detector: usize) -> f64 {
        self.eps[detector - 1]
    }

    fn dark_of(&self, detector: usize) -> f64 {
        self.p_dark[detector - 1]
    }
}

/// Conditional pair-projection probabilities |A_nm|^2, indexed
/// `[n-1][m-3]`. The four entries sum to one for every setting.
pub fn pair_projection_probabilities(
    state: &EffectiveTwoPhotonState,
    setting: &AnalyzerSetting,
) -> [[f64; 2]; 2] {
    let (sin_f, cos_f) = state.eta_f.sin_cos();
    let phase = Complex64::from_polar(1.0, state.phi_f);
    let ta = setting.theta_a_deg.to_radians();
    let tb = setting.theta_b_deg.to_radians();
    let (sa, ca) = ta.sin_cos();
    let (sb, cb) = tb.sin_cos();

    // Transmitted ports project onto the rotated-H direction (cos theta on
    // an H photon, sin theta on a V photon); reflected ports are the same
    // projections at theta + 90°.
    let a13 = cos_f * ca * sb + phase * sin_f * sa * cb;
    let a14 = cos_f * ca * cb - phase * sin_f * sa * sb;
    let a23 = -cos_f * sa * sb + phase * sin_f * ca * cb;
    let a24 = -(cos_f * sa * cb) - phase * sin_f * ca * sb;

    [
        [a13.norm_sqr(), a14.norm_sqr()],
        [a23.norm_sqr(), a24.norm_sqr()],
    ]
}

/// Probabilities of the single-excitation idler reaching the D1 / D2 paths
/// (before detection efficiency), given the analyzer rotation at site A.
fn single_path_probabilities(single: &SingleExcitationChannel, setting: &AnalyzerSetting) -> [f64; 2] {
    let ta = setting.theta_a_deg.to_radians();
    let (sa, ca) = ta.sin_cos();
    let r1 = single.weights.w_plus * ca * ca + single.weights.w_minus * sa * sa;
    [r1, 1.0 - r1]
}

/// Click probability of detector `det` given that the photics routed a
/// photon to it (`hit`), folding detection efficiency and the dark count.
fn click_given(hit: bool, bank: &DetectorBank, det: usize) -> f64 {
    let d = bank.dark_of(det);
    if hit {
        let e = bank.eps_of(det);
        e + (1.0 - e) * d
    } else {
        d
    }
}

/// Per-trial probability that detectors `Dn` (site A, n in {1,2}) and `Dm`
/// (site B, m in {3,4}) click in the same trial.
///
/// The leading term is `p_pair · eps_n · eps_m · |A_nm|^2`; accidental
/// contributions combine dark/stray clicks with the unpaired
/// single-excitation channel and with pair photons routed to other
/// detectors.
pub fn coincidence_probability(
    state: &EffectiveTwoPhotonState,
    single: &SingleExcitationChannel,
    setting: &AnalyzerSetting,
    n: usize,
    m: usize,
    bank: &DetectorBank,
) -> Result<f64, DetectionError> {
    if !(n == 1 || n == 2) || !(m == 3 || m == 4) {
        return Err(DetectionError::InvalidDetectorIndex { n, m });
    }
    let pair = pair_projection_probabilities(state, setting);
    let singles = single_path_probabilities(single, setting);
    let p_pair = state.p_pair;
    let p_single = single.probability;
    let p_vac = 1.0 - p_pair - p_single;
    debug_assert!(p_vac >= -1e-12, "pair + single probability exceeds one");

    let mut prob = 0.0;
    // Pair produced: photons are routed to (a, b), then thinned by
    // efficiency; any detector can additionally dark-click.
    for a in 1..=2 {
        for b in 3..=4 {
            let q = pair[a - 1][b - 3];
            prob += p_pair * q * click_given(a == n, bank, n) * click_given(b == m, bank, m);
        }
    }
    // Single excitation: only site A receives a photon.
    for a in 1..=2 {
        prob += p_single * singles[a - 1] * click_given(a == n, bank, n) * bank.dark_of(m);
    }
    // Vacuum trial: both clicks must be dark.
    prob += p_vac * bank.dark_of(n) * bank.dark_of(m);
    Ok(prob)
}

/// Probability of each joint click pattern over D1..D4 in one trial.
///
/// Patterns are bitmasks with bit `k-1` for detector `Dk`; entries are
/// nonnegative and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickDistribution {
    p: [f64; NUM_PATTERNS],
}

impl ClickDistribution {
    /// Probability of the exact pattern `mask`.
    pub fn probability(&self, mask: usize) -> f64 {
        self.p[mask]
    }

    pub fn as_slice(&self) -> &[f64; NUM_PATTERNS] {
        &self.p
    }

    /// Marginal probability that detectors `n` and `m` both click,
    /// obtained by exhaustive summation over the pattern table.
    pub fn marginal_coincidence(&self, n: usize, m: usize) -> Result<f64, DetectionError> {
        if !(n == 1 || n == 2) || !(m == 3 || m == 4) {
            return Err(DetectionError::InvalidDetectorIndex { n, m });
        }
        let want = (1 << (n - 1)) | (1 << (m - 1));
        Ok(self
            .p
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask & want == want)
            .map(|(_, &q)| q)
            .sum())
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// Full 16-pattern click distribution for one trial: pair events,
/// single-excitation events, independent dark clicks, and the no-click
/// pattern. Marginal coincidences of this table reproduce
/// [`coincidence_probability`] for every detector pair.
pub fn outcome_distribution(
    state: &EffectiveTwoPhotonState,
    single: &SingleExcitationChannel,
    setting: &AnalyzerSetting,
    bank: &DetectorBank,
) -> ClickDistribution {
    let p_pair = state.p_pair;
    let p_single = single.probability;
    assert!(
        p_pair >= 0.0 && p_single >= 0.0 && p_pair + p_single <= 1.0 + 1e-12,
        "event probabilities must lie in [0, 1]"
    );
    let p_vac = (1.0 - p_pair - p_single).max(0.0);

    let pair = pair_projection_probabilities(state, setting);
    let singles = single_path_probabilities(single, setting);

    let mut p = [0.0; NUM_PATTERNS];

    // Physics clicks only: route photons, thin by detector efficiency.
    for a in 1..=2usize {
        for b in 3..=4usize {
            let q = p_pair * pair[a - 1][b - 3];
            let (ea, eb) = (bank.eps_of(a), bank.eps_of(b));
            let (bit_a, bit_b) = (1 << (a - 1), 1 << (b - 1));
            p[bit_a | bit_b] += q * ea * eb;
            p[bit_a] += q * ea * (1.0 - eb);
            p[bit_b] += q * (1.0 - ea) * eb;
            p[0] += q * (1.0 - ea) * (1.0 - eb);
        }
    }
    for a in 1..=2usize {
        let q = p_single * singles[a - 1];
        let ea = bank.eps_of(a);
        p[1 << (a - 1)] += q * ea;
        p[0] += q * (1.0 - ea);
    }
    p[0] += p_vac;

    // OR an independent dark click onto each detector.
    for det in 0..NUM_DETECTORS {
        let d = bank.p_dark[det];
        if d == 0.0 {
            continue;
        }
        let bit = 1 << det;
        for mask in 0..NUM_PATTERNS {
            if mask & bit == 0 {
                let moved = p[mask] * d;
                p[mask] -= moved;
                p[mask | bit] += moved;
            }
        }
    }

    ClickDistribution { p }
}

/// Exact correlation function of the symmetrized measurement:
/// `E = -V/2 [cos(2(θ_A-θ_B))(1-K) + cos(2(θ_A+θ_B))(1+K)]` with
/// `K = cos(phi_f) sin(2 eta_f)`. `visibility = 1` is the ideal value;
/// smaller values model a uniform accidental-coincidence floor.
pub fn analytic_correlation(
    state: &EffectiveTwoPhotonState,
    setting: &AnalyzerSetting,
    visibility: f64,
) -> f64 {
    let k = state.phi_f.cos() * (2.0 * state.eta_f).sin();
    let ta = setting.theta_a_deg.to_radians();
    let tb = setting.theta_b_deg.to_radians();
    -0.5 * visibility * ((2.0 * (ta - tb)).cos() * (1.0 - k) + (2.0 * (ta + tb)).cos() * (1.0 + k))
}

/// Correlation value implied by the four conditional pair probabilities at
/// unit efficiency and zero background; used as the counting-side route to
/// the correlation function.
pub fn correlation_from_projections(
    state: &EffectiveTwoPhotonState,
    setting: &AnalyzerSetting,
) -> f64 {
    let p = pair_projection_probabilities(state, setting);
    p[0][0] + p[1][1] - p[0][1] - p[1][0]
}
