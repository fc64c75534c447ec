//! The foreclosure coordination game played by an agent's lenders.
//!
//! When an agent with `ell` liabilities, `b` illiquid assets and `b0` cash is
//! disclosed, each lender chooses between foreclosing (payoff 0) and rolling
//! over (payoff `1 - c` if the agent survives, `-c` if more than `b + b0`
//! lenders foreclose). Under noisy private costs the unique equilibrium is a
//! switching strategy with threshold
//!
//! ```text
//! c* = (b + b0 + 1) / (ell + 1)
//! ```
//!
//! and with a common cost `c` the lenders foreclose iff `c (ell + 1) > b + b0 + 1`.
//! The network model only needs [`default_on_disclosure`]; the rest of this
//! module is a numerical check that the threshold really is an equilibrium.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Equilibrium switching threshold `c* = (b + b0 + 1) / (ell + 1)`.
pub fn switching_threshold(ell: usize, b: usize, b0: f64) -> f64 {
    (b as f64 + b0 + 1.0) / (ell as f64 + 1.0)
}

/// Foreclosure rule applied on disclosure: lenders withdraw iff
/// `c (ell + 1) > b + b0 + 1`. Equality rolls over.
#[inline]
pub fn default_on_disclosure(c: f64, ell: usize, b: usize, b0: f64) -> bool {
    c * (ell as f64 + 1.0) > b as f64 + b0 + 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Rollover,
    Foreclose,
}

/// Lender payoff given its action and whether the borrower failed.
pub fn payoff(action: Action, failed: bool, c: f64) -> f64 {
    match (action, failed) {
        (Action::Foreclose, _) => 0.0,
        (Action::Rollover, false) => 1.0 - c,
        (Action::Rollover, true) => -c,
    }
}

/// One instance of the noisy-cost game.
///
/// `delta` (the loan nominal) shifts every payoff by the same constant and
/// therefore never moves the equilibrium; it is carried for completeness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameSpec {
    pub ell: usize,
    pub b: usize,
    pub b0: f64,
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("a foreclosure game needs at least one lender")]
    NoLenders,
    #[error("noise half-width must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("liquid assets must be non-negative, got {0}")]
    BadLiquidity(f64),
    #[error("loan nominal must lie in (0, 1), got {0}")]
    BadNominal(f64),
    #[error("quadrature did not converge: estimate {estimate}, error estimate {error:e}")]
    Quadrature { estimate: f64, error: f64 },
}

impl GameSpec {
    pub fn new(ell: usize, b: usize, b0: f64, epsilon: f64) -> Result<Self, GameError> {
        let spec = GameSpec {
            ell,
            b,
            b0,
            epsilon,
            delta: 0.5,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.ell == 0 {
            return Err(GameError::NoLenders);
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(GameError::BadEpsilon(self.epsilon));
        }
        if !(self.b0 >= 0.0 && self.b0.is_finite()) {
            return Err(GameError::BadLiquidity(self.b0));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(GameError::BadNominal(self.delta));
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        switching_threshold(self.ell, self.b, self.b0)
    }

    /// The borrower survives iff at most `b + b0` lenders foreclose.
    pub fn survives(&self, foreclosures: usize) -> bool {
        foreclosures as f64 <= self.b as f64 + self.b0
    }

    /// Smallest number of rollovers for which the borrower survives.
    fn min_rollovers(&self) -> usize {
        let needed = self.ell as f64 - (self.b as f64 + self.b0);
        if needed <= 0.0 {
            0
        } else {
            needed.ceil() as usize
        }
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// `sum_{k >= k_min} C(n, k) p^k (1 - p)^(n - k)`, each term formed in log space.
fn binomial_upper_tail(n: usize, k_min: usize, p: f64) -> f64 {
    if k_min == 0 {
        return 1.0;
    }
    if k_min > n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    (k_min..=n)
        .map(|k| (ln_binomial(n, k) + k as f64 * lp + (n - k) as f64 * lq).exp())
        .sum::<f64>()
        .min(1.0)
}

/// Probability that the borrower survives, from the point of view of a
/// marginal lender whose cost sits exactly at the threshold `c*`.
///
/// The fundamental `theta` is uniform on `[c* - eps, c* + eps]` given that
/// cost; each of the `ell` lenders rolls over with probability
/// `(c* - theta + eps) / (2 eps)`, and the number of rollovers is binomial.
/// The `theta` integral is done by adaptive Simpson quadrature; successive
/// refinements must agree to 1e-9.
///
/// Equals `c*` whenever `c* <= 1`.
pub fn success_probability_at_threshold(spec: &GameSpec) -> Result<f64, GameError> {
    spec.validate()?;
    let c_star = spec.threshold();
    let eps = spec.epsilon;
    let n_min = spec.min_rollovers();
    let density = 1.0 / (2.0 * eps);
    let integrand = |theta: f64| {
        let p_roll = ((c_star - theta + eps) * density).clamp(0.0, 1.0);
        density * binomial_upper_tail(spec.ell, n_min, p_roll)
    };
    adaptive_simpson(integrand, c_star - eps, c_star + eps, 1e-10, 60)
}

fn adaptive_simpson(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<f64, GameError> {
    struct Panel {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        depth: u32,
        tol: f64,
    }
    let simpson = |a: f64, b: f64, fa: f64, fm: f64, fb: f64| (b - a) / 6.0 * (fa + 4.0 * fm + fb);

    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let mut stack = vec![Panel {
        a,
        b,
        fa,
        fm,
        fb,
        whole: simpson(a, b, fa, fm, fb),
        depth: 0,
        tol,
    }];
    let mut total = 0.0;
    let mut unresolved = 0.0;
    // A handful of forced splits keeps a polynomial integrand from fooling
    // the first error estimate.
    const MIN_DEPTH: u32 = 4;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let (lm, rm) = (0.5 * (p.a + m), 0.5 * (m + p.b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let diff = left + right - p.whole;
        if p.depth >= MIN_DEPTH && diff.abs() <= 15.0 * p.tol {
            total += left + right + diff / 15.0;
        } else if p.depth >= max_depth {
            total += left + right;
            unresolved += diff.abs();
        } else {
            let tol = 0.5 * p.tol;
            stack.push(Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left, depth: p.depth + 1, tol });
            stack.push(Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right, depth: p.depth + 1, tol });
        }
    }
    if unresolved > 1e-9 {
        return Err(GameError::Quadrature {
            estimate: total,
            error: unresolved,
        });
    }
    Ok(total)
}

/// Empirical distribution of the number of foreclosing lenders.
#[derive(Debug, Clone, PartialEq)]
pub struct ForeclosureHistogram {
    /// `counts[k]` = trials with exactly `k` foreclosures, `k = 0..=ell`.
    pub counts: Vec<u64>,
    pub trials: u64,
}

impl ForeclosureHistogram {
    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.trials as f64;
        self.counts.iter().map(|&k| k as f64 / n).collect()
    }

    /// Binomial standard error of each bin under the uniform law `1/(ell+1)`.
    pub fn uniform_standard_error(&self) -> f64 {
        let p = 1.0 / self.counts.len() as f64;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Monte Carlo law of the number of lenders whose cost exceeds the threshold,
/// as seen by a lender sitting exactly at it.
///
/// `theta` is drawn from the posterior around the threshold and each of the
/// `ell` costs is `theta + s_j` with `s_j` uniform on `[-eps, eps]`. The
/// threshold's value drops out, so it is fixed at 1/2 here. Every bin tends
/// to `1 / (ell + 1)`.
pub fn foreclosure_count_distribution(
    ell: usize,
    epsilon: f64,
    trials: u64,
    seed: u64,
) -> ForeclosureHistogram {
    assert!(trials >= 1, "at least one trial is required");
    assert!(epsilon > 0.0, "noise half-width must be positive");
    let c_star = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; ell + 1];
    for _ in 0..trials {
        let theta = c_star + epsilon * (2.0 * rng.random::<f64>() - 1.0);
        let k = (0..ell)
            .filter(|_| theta + epsilon * (2.0 * rng.random::<f64>() - 1.0) > c_star)
            .count();
        counts[k] += 1;
    }
    ForeclosureHistogram { counts, trials }
}

/// Expected gain of rolling over instead of foreclosing, for a marginal lender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationReport {
    /// Mean of `payoff(rollover) - payoff(foreclose)`.
    pub mean_gain: f64,
    pub std_error: f64,
    /// Fraction of trials in which the borrower survived.
    pub success_rate: f64,
    pub trials: u64,
}

/// Plays the game `trials` times with every lender on the switching strategy
/// at `c_star`, and measures the payoff difference of a lender whose own cost
/// is exactly `c_star`.
///
/// At the equilibrium threshold the gain vanishes; a threshold set too high
/// makes rolling over at the margin a losing bet, and vice versa.
pub fn simulate_game(spec: &GameSpec, c_star: f64, trials: u64, seed: u64) -> DeviationReport {
    assert!(trials >= 1, "at least one trial is required");
    let eps = spec.epsilon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq, mut successes) = (0.0, 0.0, 0u64);
    for _ in 0..trials {
        let theta = c_star + eps * (2.0 * rng.random::<f64>() - 1.0);
        let foreclosures = (0..spec.ell)
            .filter(|_| theta + eps * (2.0 * rng.random::<f64>() - 1.0) > c_star)
            .count();
        let failed = !spec.survives(foreclosures);
        if !failed {
            successes += 1;
        }
        let gain = payoff(Action::Rollover, failed, c_star) - payoff(Action::Foreclose, failed, c_star);
        sum += gain;
        sum_sq += gain * gain;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = if trials > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    DeviationReport {
        mean_gain: mean,
        std_error: (var / n).sqrt(),
        success_rate: successes as f64 / n,
        trials,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        assert_eq!(switching_threshold(5, 3, 2.0), 1.0);
        assert_eq!(switching_threshold(0, 0, 0.0), 1.0);
        assert_eq!(switching_threshold(9, 2, 2.0), 0.5);
    }

    #[test]
    fn disclosure_rule_examples() {
        assert!(default_on_disclosure(0.6, 9, 2, 2.0));
        assert!(!default_on_disclosure(0.5, 9, 2, 2.0));
        for (ell, b) in [(0, 0), (7, 1), (100, 0)] {
            assert!(!default_on_disclosure(0.0, ell, b, 0.0));
        }
    }

    #[test]
    fn rule_matches_threshold_exhaustively() {
        for ell in 0..=50 {
            for b in 0..=50 {
                for b0 in [0.0, 0.5, 1.0, 2.0, 3.7] {
                    let t = switching_threshold(ell, b, b0);
                    // dyadic costs, so that c (ell + 1) is exact
                    for k in 0..=96 {
                        let c = k as f64 / 64.0;
                        assert_eq!(
                            default_on_disclosure(c, ell, b, b0),
                            c > t,
                            "ell={ell} b={b} b0={b0} c={c}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn threshold_monotonicity() {
        for ell in 0..30 {
            for b in 0..30 {
                let t = switching_threshold(ell, b, 1.0);
                assert!(switching_threshold(ell, b + 1, 1.0) > t);
                assert!(switching_threshold(ell, b, 1.5) > t);
                assert!(switching_threshold(ell + 1, b, 1.0) < t);
            }
        }
    }

    #[test]
    fn payoff_matrix() {
        assert_eq!(payoff(Action::Foreclose, false, 0.3), 0.0);
        assert_eq!(payoff(Action::Foreclose, true, 0.3), 0.0);
        assert!((payoff(Action::Rollover, false, 0.3) - 0.7).abs() < 1e-15);
        assert_eq!(payoff(Action::Rollover, true, 0.3), -0.3);
    }

    #[test]
    fn game_spec_validation() {
        assert_eq!(GameSpec::new(0, 1, 0.0, 0.01), Err(GameError::NoLenders));
        assert_eq!(GameSpec::new(1, 1, 0.0, 0.0), Err(GameError::BadEpsilon(0.0)));
        assert_eq!(GameSpec::new(1, 1, -1.0, 0.1), Err(GameError::BadLiquidity(-1.0)));
        let bad = GameSpec { delta: 1.0, ..GameSpec::new(1, 1, 0.0, 0.1).unwrap() };
        assert_eq!(bad.validate(), Err(GameError::BadNominal(1.0)));
    }

    #[test]
    fn success_probability_at_boundary_threshold() {
        let spec = GameSpec::new(5, 3, 2.0, 0.01).unwrap();
        let phi = success_probability_at_threshold(&spec).unwrap();
        assert!((phi - 1.0).abs() < 1e-12);
    }

    /// Composite midpoint rule on a fine grid, with the binomial sum built from
    /// direct products rather than logs.
    fn midpoint_oracle(spec: &GameSpec, panels: usize) -> f64 {
        let c_star = spec.threshold();
        let eps = spec.epsilon;
        let n_min = (spec.ell as f64 - spec.b as f64 - spec.b0).max(0.0).ceil() as usize;
        let h = 2.0 * eps / panels as f64;
        let mut acc = 0.0;
        for i in 0..panels {
            let theta = c_star - eps + (i as f64 + 0.5) * h;
            let p = (c_star - theta + eps) / (2.0 * eps);
            let mut tail = 0.0;
            for n in n_min..=spec.ell {
                let mut binom = 1.0;
                for j in 0..n {
                    binom *= (spec.ell - j) as f64 / (j + 1) as f64;
                }
                tail += binom * p.powi(n as i32) * (1.0 - p).powi((spec.ell - n) as i32);
            }
            acc += tail / (2.0 * eps) * h;
        }
        acc
    }

    #[test]
    fn success_probability_matches_quadrature_and_beta_oracles() {
        let spec = GameSpec::new(9, 2, 2.0, 0.01).unwrap();
        let phi = success_probability_at_threshold(&spec).unwrap();
        // each binomial weight integrates to B(n+1, ell-n+1) C(ell, n) = 1/(ell+1);
        // rollover counts 5..=9 survive, five of ten outcomes.
        let beta_closed_form = 5.0 / 10.0;
        assert!((phi - beta_closed_form).abs() < 1e-6, "phi = {phi}");
        let oracle = midpoint_oracle(&spec, 100_000);
        assert!((phi - oracle).abs() < 1e-8, "phi = {phi}, oracle = {oracle}");
        assert!((oracle - 0.5).abs() < 1e-6);

        for eps in [0.001, 0.05, 0.1] {
            let other = GameSpec { epsilon: eps, ..spec };
            let value = success_probability_at_threshold(&other).unwrap();
            assert!((value - phi).abs() < 1e-6, "eps = {eps}");
        }
    }

    #[test]
    fn success_probability_handles_many_lenders() {
        // log-space terms keep the large-ell binomial finite.
        let spec = GameSpec::new(400, 150, 2.0, 0.02).unwrap();
        let phi = success_probability_at_threshold(&spec).unwrap();
        assert!((phi - spec.threshold()).abs() < 1e-6, "phi = {phi}");
    }

    #[test]
    fn foreclosure_counts_are_uniform() {
        let h = foreclosure_count_distribution(0, 0.01, 1000, 1);
        assert_eq!(h.counts, vec![1000]);

        for ell in [1usize, 4] {
            let h = foreclosure_count_distribution(ell, 0.01, 200_000, 11);
            let se = h.uniform_standard_error();
            for p in h.probabilities() {
                assert!((p - 1.0 / (ell as f64 + 1.0)).abs() < 3.0 * se, "ell={ell} p={p}");
            }
        }
    }

    #[test]
    fn deviation_gain_vanishes_at_equilibrium() {
        let spec = GameSpec::new(9, 2, 2.0, 0.01).unwrap();
        let c_star = spec.threshold();
        let eq = simulate_game(&spec, c_star, 200_000, 3);
        assert!(eq.mean_gain.abs() < 3.0 * eq.std_error, "{eq:?}");

        let high = simulate_game(&spec, c_star + 0.1, 200_000, 4);
        assert!(high.mean_gain < -3.0 * high.std_error, "{high:?}");
        let above = simulate_game(&spec, c_star + 0.05, 200_000, 5);
        let below = simulate_game(&spec, c_star - 0.05, 200_000, 6);
        assert!(above.mean_gain < 0.0 && below.mean_gain > 0.0);
    }

    #[test]
    fn well_capitalised_borrower_survives_total_foreclosure() {
        let spec = GameSpec::new(4, 2, 2.0, 0.01).unwrap();
        let report = simulate_game(&spec, 0.0, 10_000, 9);
        assert_eq!(report.success_rate, 1.0);
        assert_eq!(report.mean_gain, 1.0);
    }
}
