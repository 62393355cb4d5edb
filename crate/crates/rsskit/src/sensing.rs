//! Statistical validation of sensing: semantic error measures, PAC-style
//! offline checks, Lipschitz regret bounds, majority fusion of redundant
//! subsystems, and the small probabilistic lemmas that justify offline (as
//! opposed to on-road) validation.
//!
//! Every stochastic operation takes an explicit seed and produces identical
//! results on every platform and at any parallelism, by drawing from fixed
//! counter-indexed substreams.

use crate::math::Vec2;
use rand::distributions::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SensingError {
    #[error("relative error is undefined at zero range")]
    ZeroRange,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("stochastic operations require an explicit seed")]
    SeedRequired,
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

/// Number of logical random substreams; results are summed over all of them
/// regardless of worker count, so parallelism never changes the answer.
const RNG_STREAMS: u64 = 64;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trials assigned to each substream: as even a split as possible.
fn stream_share(trials: u64, stream: u64) -> u64 {
    trials / RNG_STREAMS + u64::from(stream < trials % RNG_STREAMS)
}

/// Wilson score interval for a binomial proportion at `z` standard errors.
pub fn wilson_interval(events: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p_hat = events as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// An empirical event rate with its Wilson confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub events: u64,
    pub trials: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RateEstimate {
    fn new(events: u64, trials: u64, z: f64) -> Self {
        let (ci_low, ci_high) = wilson_interval(events, trials, z);
        RateEstimate { events, trials, rate: events as f64 / trials.max(1) as f64, ci_low, ci_high }
    }
}

/// Position and velocity of one object expressed in lane-relative semantic
/// units: lateral quantities as lane-width fractions, longitudinal ones in
/// meters along the lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticMeasurement {
    pub lat: f64,
    pub lon: f64,
    pub lat_vel: f64,
    pub lon_vel: f64,
}

/// Distance between an estimated and a true measurement in semantic units:
/// the lateral term is absolute (fractions are already scale-free), the
/// longitudinal term is relative to the true range, clamped at 1 m so close
/// objects do not blow up the denominator.
pub fn semantic_error(estimate: &SemanticMeasurement, truth: &SemanticMeasurement) -> f64 {
    let lat_term = (estimate.lat - truth.lat).abs();
    let lon_term = (estimate.lon - truth.lon).abs() / truth.lon.abs().max(1.0);
    lat_term.max(lon_term)
}

/// Range-relative position error of a world-frame estimate as seen from the
/// ego at the origin.
pub fn ego_relative_error(estimate: Vec2, truth: Vec2) -> Result<f64, SensingError> {
    let range = truth.norm();
    if range < 1e-12 {
        return Err(SensingError::ZeroRange);
    }
    Ok(estimate.dist(truth) / range)
}

/// Accuracy/confidence ladder for PAC checks: each pair demands
/// `Pr[Q-regret > epsilon_i] <= delta_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacSpec {
    pub pairs: Vec<(f64, f64)>,
}

impl PacSpec {
    pub fn validated(self) -> Result<Self, SensingError> {
        if self.pairs.is_empty() {
            return Err(SensingError::InvalidSpec("PAC spec needs at least one pair".into()));
        }
        for w in self.pairs.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SensingError::InvalidSpec(
                    "epsilon values must be strictly increasing".into(),
                ));
            }
        }
        if self.pairs.iter().any(|&(e, d)| e < 0.0 || d <= 0.0 || d >= 1.0) {
            return Err(SensingError::InvalidSpec(
                "epsilons must be non-negative and deltas in (0,1)".into(),
            ));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacPairOutcome {
    pub epsilon: f64,
    pub delta: f64,
    pub failures: u64,
    pub total: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacReport {
    pub outcomes: Vec<PacPairOutcome>,
}

impl PacReport {
    pub fn all_pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }
}

/// Offline PAC check of a sensing map: over the dataset of (raw input, true
/// state) pairs, measures how often acting on the sensed state loses more
/// than each epsilon of quality relative to acting on the truth, and
/// compares the rates against the deltas.
pub fn check_pac<X, S>(
    dataset: &[(X, S)],
    sense: impl Fn(&X) -> S,
    policy: impl Fn(&S) -> usize,
    q: impl Fn(&S, usize) -> f64,
    spec: &PacSpec,
) -> Result<PacReport, SensingError> {
    if dataset.is_empty() {
        return Err(SensingError::EmptyDataset);
    }
    let regrets: Vec<f64> = dataset
        .iter()
        .map(|(x, s)| {
            let sensed = sense(x);
            q(s, policy(s)) - q(s, policy(&sensed))
        })
        .collect();
    let total = regrets.len() as u64;
    let outcomes = spec
        .pairs
        .iter()
        .map(|&(epsilon, delta)| {
            let failures = regrets.iter().filter(|&&r| r > epsilon).count() as u64;
            let est = RateEstimate::new(failures, total, 2.0);
            PacPairOutcome {
                epsilon,
                delta,
                failures,
                total,
                rate: est.rate,
                ci_low: est.ci_low,
                ci_high: est.ci_high,
                pass: est.rate <= delta,
            }
        })
        .collect();
    Ok(PacReport { outcomes })
}

/// The regret level a semantically-Lipschitz quality function guarantees at
/// sensing error `d`: epsilon = L * d.
pub fn lipschitz_regret_bound(l: f64, d: f64) -> f64 {
    l * d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// (state pair, action) combinations examined.
    pub checked: usize,
    pub violations: usize,
    /// Largest observed |dQ| / d — the empirical Lipschitz constant.
    pub max_ratio: f64,
    /// Index into the sample list of the first violating pair, if any.
    pub first_violation: Option<usize>,
}

/// Converse check of the Lipschitz property on sampled (true, perturbed)
/// state pairs: verifies |Q(s,a) - Q(s_hat,a)| <= L * d(s, s_hat) for every
/// action, reporting violations and the empirically estimated constant.
pub fn lipschitz_check<S>(
    samples: &[(S, S)],
    n_actions: usize,
    q: impl Fn(&S, usize) -> f64,
    distance: impl Fn(&S, &S) -> f64,
    l: f64,
) -> LipschitzReport {
    let mut checked = 0;
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    let mut first_violation = None;
    for (idx, (s, s_hat)) in samples.iter().enumerate() {
        let d = distance(s, s_hat);
        for a in 0..n_actions {
            let dq = (q(s, a) - q(s_hat, a)).abs();
            checked += 1;
            if d > 1e-12 {
                max_ratio = max_ratio.max(dq / d);
            }
            if dq > l * d + 1e-12 {
                violations += 1;
                first_violation.get_or_insert(idx);
            }
        }
    }
    LipschitzReport { checked, violations, max_ratio, first_violation }
}

/// Redundant-sensing fusion parameters: per-subsystem error probability `p`
/// and the one-sided approximate-independence factor `c` bounding pairwise
/// joint failures by `c * p^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    pub c: f64,
    pub p: f64,
}

impl FusionConfig {
    pub fn validated(self) -> Result<Self, SensingError> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(SensingError::InvalidSpec("p must lie in (0,1)".into()));
        }
        if self.c < 1.0 {
            return Err(SensingError::InvalidSpec("c must be at least 1".into()));
        }
        if self.c * self.p > 1.0 {
            return Err(SensingError::InvalidSpec(
                "c*p must not exceed 1 (no coupling can realize it)".into(),
            ));
        }
        Ok(self)
    }
}

/// Majority vote over the three subsystems: dangerous iff at least two say
/// so.
pub fn fusion_verdict(votes: [bool; 3]) -> bool {
    votes.iter().filter(|&&v| v).count() >= 2
}

/// Closed-form bound on the probability that fusion itself errs (a missed
/// danger or a ghost) under one-sided c-approximate independence: 6 c p^2.
pub fn fusion_error_bound(cfg: &FusionConfig) -> f64 {
    6.0 * cfg.c * cfg.p * cfg.p
}

/// How subsystem failures are correlated in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CorrelationModel {
    Independent,
    /// Mixture construction: with the mixing probability all three
    /// subsystems fail from a common trigger, otherwise they fail
    /// independently — calibrated so pairwise joint failures equal c * p^2
    /// exactly.
    Coupled { c: f64 },
}

impl CorrelationModel {
    fn c(&self) -> f64 {
        match self {
            CorrelationModel::Independent => 1.0,
            CorrelationModel::Coupled { c } => *c,
        }
    }

    /// (common-trigger probability, residual independent probability) that
    /// realize marginal `p` and pairwise `c * p^2`.
    fn mixture(&self, p: f64) -> Result<(f64, f64), SensingError> {
        match self {
            CorrelationModel::Independent => Ok((0.0, p)),
            CorrelationModel::Coupled { c } => {
                if *c < 1.0 || *c * p > 1.0 {
                    return Err(SensingError::InvalidSpec(
                        "coupled model needs 1 <= c <= 1/p".into(),
                    ));
                }
                let m = p * p * (c - 1.0) / (1.0 - 2.0 * p + c * p * p);
                let b = (p - m) / (1.0 - m);
                Ok((m, b))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub miss: RateEstimate,
    pub ghost: RateEstimate,
    pub either: RateEstimate,
    /// The 6 c p^2 bound at p = max(miss, ghost) subsystem rate.
    pub bound: f64,
    /// Each fused failure process stays below the bound, and the combined
    /// rate does not statistically contradict it. The combined true rate can
    /// sit within a fraction of a standard error of 6 c p^2 (its analytic
    /// slack is only ~4 c p^3), so the OR-term is compared through its
    /// confidence interval rather than the point estimate.
    pub within_bound: bool,
}

/// Simulates the three-subsystem fusion over `trials` scenes, with misses
/// and ghosts as two failure processes under the chosen correlation model,
/// and checks the fused error rate against the closed-form bound.
/// Deterministic for a given seed at any parallelism.
pub fn monte_carlo_fusion(
    miss_p: f64,
    ghost_p: f64,
    model: CorrelationModel,
    trials: u64,
    seed: Option<u64>,
) -> Result<FusionReport, SensingError> {
    let seed = seed.ok_or(SensingError::SeedRequired)?;
    if trials == 0 {
        return Err(SensingError::InvalidSpec("trials must be positive".into()));
    }
    for p in [miss_p, ghost_p] {
        if !(0.0..1.0).contains(&p) {
            return Err(SensingError::InvalidSpec("rates must lie in [0,1)".into()));
        }
    }
    let miss_mix = if miss_p > 0.0 { Some(model.mixture(miss_p)?) } else { None };
    let ghost_mix = if ghost_p > 0.0 { Some(model.mixture(ghost_p)?) } else { None };

    let counts: Vec<(u64, u64, u64)> = (0..RNG_STREAMS)
        .into_par_iter()
        .map(|stream| {
            let mut rng = stream_rng(seed, stream);
            let share = stream_share(trials, stream);
            let draw_process = |rng: &mut ChaCha8Rng, mix: &Option<(f64, f64)>| -> bool {
                let Some((m, b)) = mix else { return false };
                let common = Bernoulli::new(*m).expect("valid probability").sample(rng);
                let indep = Bernoulli::new(*b).expect("valid probability");
                let mut votes = [false; 3];
                for v in &mut votes {
                    // Draw unconditionally to keep the stream layout fixed.
                    let solo = indep.sample(rng);
                    *v = common || solo;
                }
                fusion_verdict(votes)
            };
            let mut misses = 0u64;
            let mut ghosts = 0u64;
            let mut either = 0u64;
            for _ in 0..share {
                let e_m = draw_process(&mut rng, &miss_mix);
                let e_g = draw_process(&mut rng, &ghost_mix);
                misses += u64::from(e_m);
                ghosts += u64::from(e_g);
                either += u64::from(e_m || e_g);
            }
            (misses, ghosts, either)
        })
        .collect();
    let (misses, ghosts, either) = counts
        .iter()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));

    let p_worst = miss_p.max(ghost_p);
    let bound = 6.0 * model.c() * p_worst * p_worst;
    let miss_est = RateEstimate::new(misses, trials, 3.0);
    let ghost_est = RateEstimate::new(ghosts, trials, 3.0);
    let either_est = RateEstimate::new(either, trials, 3.0);
    Ok(FusionReport {
        within_bound: miss_est.rate <= bound
            && ghost_est.rate <= bound
            && either_est.ci_low <= bound,
        miss: miss_est,
        ghost: ghost_est,
        either: either_est,
        bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    /// Draws per trial: the reciprocal of the event probability.
    pub m: u64,
    pub trials: u64,
    /// Empirical probability of observing zero events in m draws.
    pub empirical: f64,
    /// (1 - p1)^m.
    pub closed_form: f64,
    /// The e^-2 floor: driving for 1/p1 hours says nothing at this scale.
    pub lower_bound: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Estimates the probability that 1/p1 Bernoulli(p1) draws contain no event
/// at all — the reason a rare failure rate cannot be validated by driving
/// the corresponding number of hours. Stays above e^-2 for p1 <= 0.1.
pub fn validation_infeasibility(
    p1: f64,
    trials: u64,
    seed: Option<u64>,
) -> Result<InfeasibilityReport, SensingError> {
    let seed = seed.ok_or(SensingError::SeedRequired)?;
    if !(p1 > 0.0 && p1 <= 0.1) {
        return Err(SensingError::InvalidSpec("p1 must lie in (0, 0.1]".into()));
    }
    if trials == 0 {
        return Err(SensingError::InvalidSpec("trials must be positive".into()));
    }
    let m = (1.0 / p1).round() as u64;
    let zero_runs: u64 = (0..RNG_STREAMS)
        .into_par_iter()
        .map(|stream| {
            let mut rng = stream_rng(seed, stream);
            let share = stream_share(trials, stream);
            let event = Bernoulli::new(p1).expect("validated probability");
            let mut zeros = 0u64;
            for _ in 0..share {
                let mut hit = false;
                for _ in 0..m {
                    hit |= event.sample(&mut rng);
                }
                zeros += u64::from(!hit);
            }
            zeros
        })
        .sum();
    let est = RateEstimate::new(zero_runs, trials, 3.0);
    Ok(InfeasibilityReport {
        m,
        trials,
        empirical: est.rate,
        closed_form: (1.0 - p1).powi(m as i32),
        lower_bound: (-2.0f64).exp(),
        ci_low: est.ci_low,
        ci_high: est.ci_high,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpInequalityReport {
    pub grid_points: usize,
    /// Smallest value of (1 - x) - e^(-2x) on the grid; the inequality holds
    /// iff this is non-negative.
    pub min_margin: f64,
    /// d/dx of that margin at x = 0.1: -1 + 2 e^-0.2.
    pub derivative_at_tenth: f64,
}

/// Verifies 1 - x >= e^(-2x) on a grid over [0, 0.1] — the elementary
/// inequality behind the validation-infeasibility bound.
pub fn exp_inequality_check(resolution: f64) -> ExpInequalityReport {
    let resolution = resolution.clamp(1e-9, 1e-4);
    let n = (0.1 / resolution).ceil() as usize;
    let mut min_margin = f64::INFINITY;
    for k in 0..=n {
        let x = 0.1 * k as f64 / n as f64;
        min_margin = min_margin.min(1.0 - x - (-2.0 * x).exp());
    }
    ExpInequalityReport {
        grid_points: n + 1,
        min_margin,
        derivative_at_tenth: -1.0 + 2.0 * (-0.2f64).exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semantic_error_cases() {
        let truth = SemanticMeasurement { lat: 0.4, lon: 100.0, lat_vel: 0.0, lon_vel: 20.0 };
        assert_eq!(semantic_error(&truth, &truth), 0.0);
        let est = SemanticMeasurement { lat: 0.42, lon: 95.0, ..truth };
        assert!((semantic_error(&est, &truth) - 0.05).abs() < 1e-12);
        // Near-zero range clamps the denominator at 1 m.
        let close = SemanticMeasurement { lat: 0.0, lon: 0.5, lat_vel: 0.0, lon_vel: 0.0 };
        let close_est = SemanticMeasurement { lon: 0.8, ..close };
        assert!((semantic_error(&close_est, &close) - 0.3).abs() < 1e-12);
        // The lateral term is symmetric in its arguments.
        let a = SemanticMeasurement { lat: 0.1, lon: 50.0, lat_vel: 0.0, lon_vel: 0.0 };
        let b = SemanticMeasurement { lat: 0.3, lon: 50.0, lat_vel: 0.0, lon_vel: 0.0 };
        assert_eq!(semantic_error(&a, &b), semantic_error(&b, &a));
    }

    #[test]
    fn relative_error_cases() {
        let truth = Vec2::new(150.0, 0.0);
        let est = Vec2::new(150.0, 5.0);
        let e = ego_relative_error(est, truth).unwrap();
        assert!((e - 1.0 / 30.0).abs() < 1e-12);
        assert_eq!(ego_relative_error(truth, truth), Ok(0.0));
        let e2 = ego_relative_error(Vec2::new(110.0, 0.0), Vec2::new(100.0, 0.0)).unwrap();
        assert!((e2 - 0.1).abs() < 1e-12);
        assert_eq!(ego_relative_error(est, Vec2::ZERO), Err(SensingError::ZeroRange));
    }

    #[test]
    fn fusion_verdict_and_bound() {
        assert!(!fusion_verdict([false, false, false]));
        assert!(!fusion_verdict([true, false, false]));
        assert!(fusion_verdict([true, true, false]));
        assert!(fusion_verdict([true, true, true]));
        let cfg = FusionConfig { c: 1.0, p: 1e-2 }.validated().unwrap();
        assert!((fusion_error_bound(&cfg) - 6e-4).abs() < 1e-15);
        let cfg2 = FusionConfig { c: 2.0, p: 1e-3 }.validated().unwrap();
        assert!((fusion_error_bound(&cfg2) - 1.2e-5).abs() < 1e-15);
        // Monotone in both parameters.
        assert!(fusion_error_bound(&cfg2) < fusion_error_bound(&FusionConfig { c: 2.0, p: 2e-3 }));
        assert!(fusion_error_bound(&cfg2) < fusion_error_bound(&FusionConfig { c: 3.0, p: 1e-3 }));
        // To reach a 1e-9 system-level failure rate, each subsystem needs
        // p ~ 1.3e-5 — validation sets of order 1e5, not 1e9.
        let p_needed = (1e-9f64 / 6.0).sqrt();
        assert!((fusion_error_bound(&FusionConfig { c: 1.0, p: p_needed }) - 1e-9).abs() < 1e-18);
        assert!((p_needed - 1.29e-5).abs() < 1e-7);
        assert!(1.0 / p_needed < 1e5 && 1.0 / p_needed > 5e4);
        assert!(FusionConfig { c: 0.5, p: 0.01 }.validated().is_err());
        assert!(FusionConfig { c: 200.0, p: 0.01 }.validated().is_err());
    }

    #[test]
    fn fusion_monte_carlo_matches_closed_forms() {
        // Independent subsystems: majority-miss probability is exactly
        // 3p^2 - 2p^3 by inclusion-exclusion.
        let p = 0.01;
        let exact = 3.0 * p * p - 2.0 * p * p * p;
        let report =
            monte_carlo_fusion(p, 0.0, CorrelationModel::Independent, 1_000_000, Some(7)).unwrap();
        assert!(report.miss.ci_low <= exact && exact <= report.miss.ci_high);
        assert!(report.within_bound, "empirical {} vs bound {}", report.either.rate, report.bound);
        assert!((report.bound - 6e-4).abs() < 1e-15);
        assert_eq!(report.ghost.events, 0);

        // Zero rates produce zero events.
        let silent =
            monte_carlo_fusion(0.0, 0.0, CorrelationModel::Independent, 10_000, Some(1)).unwrap();
        assert_eq!(silent.either.events, 0);

        // The coupled construction realizes its pairwise target: majority
        // probability m + (1-m)(3b^2 - 2b^3) with the calibrated mixture.
        let c = 2.0;
        let model = CorrelationModel::Coupled { c };
        let (m, b) = model.mixture(p).unwrap();
        let exact_coupled = m + (1.0 - m) * (3.0 * b * b - 2.0 * b * b * b);
        let coupled = monte_carlo_fusion(p, 0.0, model, 1_000_000, Some(11)).unwrap();
        assert!(coupled.miss.ci_low <= exact_coupled && exact_coupled <= coupled.miss.ci_high);
        assert!(coupled.either.rate <= 12.0 * p * p);

        // Reproducibility and the seed contract.
        let again =
            monte_carlo_fusion(p, 0.0, CorrelationModel::Independent, 1_000_000, Some(7)).unwrap();
        assert_eq!(report, again);
        assert_eq!(
            monte_carlo_fusion(p, 0.0, CorrelationModel::Independent, 100, None),
            Err(SensingError::SeedRequired)
        );
    }

    #[test]
    fn infeasibility_lemma_numbers() {
        let report = validation_infeasibility(0.01, 20_000, Some(42)).unwrap();
        assert_eq!(report.m, 100);
        let truth = 0.99f64.powi(100);
        assert!((truth - 0.366).abs() < 1e-3);
        assert!((report.empirical - truth).abs() < 0.02);
        assert!(report.empirical >= report.lower_bound);
        // Boundary of the lemma hypothesis.
        let edge = validation_infeasibility(0.1, 20_000, Some(42)).unwrap();
        assert!((edge.closed_form - 0.9f64.powi(10)).abs() < 1e-12);
        assert!(edge.closed_form >= (-2.0f64).exp());
        assert!(validation_infeasibility(0.2, 100, Some(1)).is_err());
        assert_eq!(
            validation_infeasibility(0.01, 100, None),
            Err(SensingError::SeedRequired)
        );
        // Same seed, same answer.
        let again = validation_infeasibility(0.01, 20_000, Some(42)).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn exp_inequality_holds_on_grid() {
        let report = exp_inequality_check(1e-4);
        assert!(report.min_margin >= 0.0, "violation of 1-x >= exp(-2x)");
        // Equality at x = 0, clear slack at x = 0.1.
        assert!((1.0f64 - 0.0 - (-0.0f64).exp()).abs() < 1e-15);
        assert!((0.9 - (-0.2f64).exp() - 0.0813).abs() < 1e-4);
        assert!((report.derivative_at_tenth - 0.637).abs() < 1e-3);
    }

    /// The brake/no-brake toy: an object sits in-lane at 150 m; the policy
    /// brakes iff the sensed lateral offset stays within the lane. Uniform
    /// lateral noise makes the misassignment probability exactly
    /// (w - margin) / (2w) for noise half-width w beyond the margin.
    #[test]
    fn pac_check_against_analytic_oracle() {
        // True lateral offset 1.0 m from lane center, lane half-width 1.75 m
        // -> margin 0.75 m. Noise half-width 1.5 m -> flip probability
        // (1.5 - 0.75) / 3.0 = 0.25.
        let margin = 0.75;
        let noise = 1.5;
        let flip = (noise - margin) / (2.0 * noise);
        let mut rng = stream_rng(3, 0);
        let dataset: Vec<(f64, f64)> = (0..20_000)
            .map(|_| {
                let u: f64 = rand::Rng::gen_range(&mut rng, -noise..noise);
                (1.0 + u, 1.0) // (sensed raw lateral, true lateral)
            })
            .collect();
        let sense = |x: &f64| *x;
        let in_lane = |lat: &f64| lat.abs() < 1.75;
        let policy = |s: &f64| usize::from(in_lane(s)); // 1 = brake
        let q = |s: &f64, a: usize| {
            if usize::from(in_lane(s)) == a {
                1.0
            } else {
                0.0
            }
        };
        let spec = PacSpec { pairs: vec![(0.5, 0.3), (2.0, 0.3)] }.validated().unwrap();
        let report = check_pac(&dataset, sense, policy, q, &spec).unwrap();
        // Regret is 1 on a flip: the first rung sees them, the second rung's
        // epsilon = 2 exceeds any achievable regret.
        let first = &report.outcomes[0];
        assert!((first.rate - flip).abs() < 0.02, "rate {} vs analytic {}", first.rate, flip);
        assert!(first.pass);
        assert_eq!(report.outcomes[1].failures, 0);
        // A delta below the achievable rate fails.
        let strict = PacSpec { pairs: vec![(0.5, 0.01)] }.validated().unwrap();
        assert!(!check_pac(&dataset, sense, policy, q, &strict).unwrap().all_pass());
        // Perfect sensing passes everything.
        let perfect: Vec<(f64, f64)> = (0..100).map(|k| (k as f64, k as f64)).collect();
        let clean = check_pac(&perfect, sense, policy, q, &spec).unwrap();
        assert!(clean.all_pass());
        assert!(clean.outcomes.iter().all(|o| o.failures == 0));
        let empty: Vec<(f64, f64)> = vec![];
        assert_eq!(
            check_pac(&empty, sense, policy, q, &spec).unwrap_err(),
            SensingError::EmptyDataset
        );
    }

    #[test]
    fn lipschitz_check_flags_discontinuity() {
        // A 1-Lipschitz quality: Q(s, a) = -(s - a)^2 on s in [0,2], a in
        // {0,1,2}; |dQ| <= |ds| * |2s - 2a| <= 8|ds| on the domain.
        let pairs: Vec<(f64, f64)> = (0..100)
            .map(|k| {
                let s = k as f64 * 0.02;
                (s, s + 0.01)
            })
            .collect();
        let q_smooth = |s: &f64, a: usize| -(s - a as f64) * (s - a as f64);
        let d = |a: &f64, b: &f64| (a - b).abs();
        let smooth = lipschitz_check(&pairs, 3, q_smooth, d, 8.0);
        assert_eq!(smooth.violations, 0);
        assert!(smooth.max_ratio <= 8.0);
        // Zero perturbation: trivially within any bound.
        let zero: Vec<(f64, f64)> = vec![(1.0, 1.0)];
        assert_eq!(lipschitz_check(&zero, 3, q_smooth, d, 0.0).violations, 0);
        // A lane-flip style step function breaks any modest constant.
        let q_step = |s: &f64, _a: usize| if *s < 1.0 { 0.0 } else { 100.0 };
        let flip = vec![(0.999, 1.001)];
        let report = lipschitz_check(&flip, 1, q_step, d, 8.0);
        assert_eq!(report.violations, 1);
        assert_eq!(report.first_violation, Some(0));
        assert!(report.max_ratio > 8.0);
    }
}
