//! Stochastic trial engine.
//!
//! Samples one click pattern per protocol trial from the detection model's
//! outcome distribution and accumulates coincidence counters. Trials are
//! independent, so a run may be partitioned across workers: every worker
//! draws from its own ChaCha8 stream derived from the master seed and the
//! worker index, and the per-worker accumulators merge associatively.
//! Results are therefore bit-reproducible for a fixed (seed, worker count)
//! and statistically identical across partitionings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::detection::{outcome_distribution, AnalyzerSetting, DetectorBank, NUM_PATTERNS};
use crate::model::{EffectiveTwoPhotonState, SingleExcitationChannel};

/// Coincidence counters for the four site-A/site-B detector pairs plus the
/// number of trials accumulated. Counters are 64-bit: a two-hour
/// acquisition at the effective repetition rate is ~7.8e8 trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CoincidenceCounts {
    /// `c[n-1][m-3]` counts joint clicks of Dn (site A) and Dm (site B).
    pub c: [[u64; 2]; 2],
    pub trials: u64,
}

impl CoincidenceCounts {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn c13(&self) -> u64 {
        self.c[0][0]
    }

    pub fn c14(&self) -> u64 {
        self.c[0][1]
    }

    pub fn c23(&self) -> u64 {
        self.c[1][0]
    }

    pub fn c24(&self) -> u64 {
        self.c[1][1]
    }

    /// Sum of the four coincidence counters.
    pub fn total_coincidences(&self) -> u64 {
        self.c13() + self.c14() + self.c23() + self.c24()
    }

    /// Fieldwise sum; associative and commutative, with `zero()` as the
    /// identity.
    pub fn merge(&self, other: &Self) -> Self {
        let mut c = self.c;
        for (row, other_row) in c.iter_mut().zip(&other.c) {
            for (cell, other_cell) in row.iter_mut().zip(other_row) {
                *cell += other_cell;
            }
        }
        Self {
            c,
            trials: self.trials + other.trials,
        }
    }
}

/// One Monte Carlo measurement point: an analyzer setting, a trial budget
/// per run, the master seed, and whether to apply the four-run detector
/// symmetrization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPlan {
    pub setting: AnalyzerSetting,
    pub trials_per_run: u64,
    pub seed: u64,
    pub symmetrize: bool,
}

impl RunPlan {
    /// Executes the plan on `workers` parallel streams.
    pub fn execute(
        &self,
        state: &EffectiveTwoPhotonState,
        single: &SingleExcitationChannel,
        bank: &DetectorBank,
        workers: usize,
    ) -> CoincidenceCounts {
        if self.symmetrize {
            run_symmetrized_partitioned(
                state,
                single,
                &self.setting,
                bank,
                self.trials_per_run,
                self.seed,
                workers,
            )
        } else {
            run_point_partitioned(
                state,
                single,
                &self.setting,
                bank,
                self.trials_per_run,
                self.seed,
                workers,
            )
        }
    }
}

/// Precomputed per-trial sampler: cumulative pattern probabilities in
/// descending-probability order plus the counter increments each pattern
/// triggers. Every concurrent (n, m) detector pair in a pattern increments
/// its counter, so double clicks at one site feed two counters.
struct TrialSampler {
    cum: [f64; NUM_PATTERNS],
    increments: [u8; NUM_PATTERNS],
    active: usize,
}

impl TrialSampler {
    fn new(
        state: &EffectiveTwoPhotonState,
        single: &SingleExcitationChannel,
        setting: &AnalyzerSetting,
        bank: &DetectorBank,
    ) -> Self {
        let dist = outcome_distribution(state, single, setting, bank);
        let mut order: Vec<usize> = (0..NUM_PATTERNS).collect();
        // Descending probability, pattern index as the deterministic tie-break.
        order.sort_by(|&a, &b| {
            dist.probability(b)
                .partial_cmp(&dist.probability(a))
                .unwrap()
                .then(a.cmp(&b))
        });

        let mut cum = [f64::INFINITY; NUM_PATTERNS];
        let mut increments = [0u8; NUM_PATTERNS];
        let mut active = 0;
        let mut acc = 0.0;
        for (slot, &mask) in order.iter().enumerate() {
            let p = dist.probability(mask);
            if p <= 0.0 {
                break;
            }
            acc += p;
            cum[slot] = acc;
            increments[slot] = Self::increment_mask(mask);
            active = slot + 1;
        }
        Self {
            cum,
            increments,
            active,
        }
    }

    /// Bit `2*(n-1) + (m-3)` set when detectors Dn and Dm both click.
    fn increment_mask(pattern: usize) -> u8 {
        let mut inc = 0u8;
        for n in 0..2 {
            for m in 0..2 {
                if pattern & (1 << n) != 0 && pattern & (1 << (m + 2)) != 0 {
                    inc |= 1 << (2 * n + m);
                }
            }
        }
        inc
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, counts: &mut CoincidenceCounts) {
        let u: f64 = rng.random();
        let mut slot = self.active - 1;
        for i in 0..self.active {
            if u < self.cum[i] {
                slot = i;
                break;
            }
        }
        let inc = self.increments[slot];
        if inc != 0 {
            for n in 0..2 {
                for m in 0..2 {
                    counts.c[n][m] += u64::from(inc >> (2 * n + m) & 1);
                }
            }
        }
        counts.trials += 1;
    }

    fn run(&self, trials: u64, seed: u64, stream: u64) -> CoincidenceCounts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut counts = CoincidenceCounts::zero();
        for _ in 0..trials {
            self.sample_into(&mut rng, &mut counts);
        }
        counts
    }

    fn run_partitioned(&self, trials: u64, seed: u64, run_index: u64, workers: usize) -> CoincidenceCounts {
        let workers = workers.max(1) as u64;
        if workers == 1 {
            return self.run(trials, seed, stream_id(run_index, 0));
        }
        let base = trials / workers;
        let remainder = trials % workers;
        (0..workers)
            .into_par_iter()
            .map(|w| {
                let share = base + u64::from(w < remainder);
                self.run(share, seed, stream_id(run_index, w))
            })
            .collect::<Vec<_>>()
            .iter()
            .fold(CoincidenceCounts::zero(), |acc, c| acc.merge(c))
    }
}

/// Stream identifier for (run, worker); runs and workers never collide.
fn stream_id(run_index: u64, worker: u64) -> u64 {
    (run_index << 32) | worker
}

/// Samples `trials` protocol trials at one analyzer setting on a single
/// stream and returns the accumulated coincidence counters.
pub fn run_point(
    state: &EffectiveTwoPhotonState,
    single: &SingleExcitationChannel,
    setting: &AnalyzerSetting,
    bank: &DetectorBank,
    trials: u64,
    seed: u64,
) -> CoincidenceCounts {
    run_point_partitioned(state, single, setting, bank, trials, seed, 1)
}

/// [`run_point`] split across `workers` independent ChaCha8 streams and
/// merged. Identical (seed, workers) inputs reproduce identical counters.
pub fn run_point_partitioned(
    state: &EffectiveTwoPhotonState,
    single: &SingleExcitationChannel,
    setting: &AnalyzerSetting,
    bank: &DetectorBank,
    trials: u64,
    seed: u64,
    workers: usize,
) -> CoincidenceCounts {
    assert!(trials > 0, "trials must be positive");
    TrialSampler::new(state, single, setting, bank).run_partitioned(trials, seed, 0, workers)
}

/// Samples only trials that contain a pair (the single-excitation channel
/// is suppressed and the pair probability forced to one). Dark counts are
/// retained. Intended for fast statistical checks against the conditional
/// pair probabilities.
pub fn run_point_conditioned(
    state: &EffectiveTwoPhotonState,
    setting: &AnalyzerSetting,
    bank: &DetectorBank,
    trials: u64,
    seed: u64,
) -> CoincidenceCounts {
    assert!(trials > 0, "trials must be positive");
    let conditioned = EffectiveTwoPhotonState {
        p_pair: 1.0,
        ..*state
    };
    TrialSampler::new(&conditioned, &SingleExcitationChannel::none(), setting, bank)
        .run_partitioned(trials, seed, 0, 1)
}

/// Four equal-length runs at (θ_A, θ_B), (θ_A+90°, θ_B), (θ_A, θ_B+90°),
/// and (θ_A+90°, θ_B+90°), with detector roles relabeled per run so that
/// every effective counter sees the symmetric efficiency factor
/// `(ε₁+ε₂)(ε₃+ε₄)/4` in expectation:
///
/// ```text
/// C~13 = C13(r0) + C23(r1) + C14(r2) + C24(r3)
/// C~14 = C14(r0) + C24(r1) + C13(r2) + C23(r3)
/// C~23 = C23(r0) + C13(r1) + C24(r2) + C14(r3)
/// C~24 = C24(r0) + C14(r1) + C23(r2) + C13(r3)
/// ```
///
/// The returned `trials` field is `4 * trials_per_run`.
pub fn run_symmetrized(
    state: &EffectiveTwoPhotonState,
    single: &SingleExcitationChannel,
    base_setting: &AnalyzerSetting,
    bank: &DetectorBank,
    trials_per_run: u64,
    seed: u64,
) -> CoincidenceCounts {
    run_symmetrized_partitioned(state, single, base_setting, bank, trials_per_run, seed, 1)
}

/// [`run_symmetrized`] with each of the four runs partitioned across
/// `workers` streams.
pub fn run_symmetrized_partitioned(
    state: &EffectiveTwoPhotonState,
    single: &SingleExcitationChannel,
    base_setting: &AnalyzerSetting,
    bank: &DetectorBank,
    trials_per_run: u64,
    seed: u64,
    workers: usize,
) -> CoincidenceCounts {
    assert!(trials_per_run > 0, "trials_per_run must be positive");
    let settings = [
        *base_setting,
        base_setting.flip_a(),
        base_setting.flip_b(),
        base_setting.flip_a().flip_b(),
    ];
    let runs: Vec<CoincidenceCounts> = settings
        .iter()
        .enumerate()
        .map(|(r, setting)| {
            TrialSampler::new(state, single, setting, bank).run_partitioned(
                trials_per_run,
                seed,
                r as u64,
                workers,
            )
        })
        .collect();

    // Flipping a site by 90° swaps its transmitted and reflected roles, so
    // the counter measuring a given joint projection moves detectors.
    let c13 = runs[0].c13() + runs[1].c23() + runs[2].c14() + runs[3].c24();
    let c14 = runs[0].c14() + runs[1].c24() + runs[2].c13() + runs[3].c23();
    let c23 = runs[0].c23() + runs[1].c13() + runs[2].c24() + runs[3].c14();
    let c24 = runs[0].c24() + runs[1].c14() + runs[2].c23() + runs[3].c13();
    CoincidenceCounts {
        c: [[c13, c14], [c23, c24]],
        trials: runs.iter().map(|r| r.trials).sum(),
    }
}
