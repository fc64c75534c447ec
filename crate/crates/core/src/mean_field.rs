//! Mean-field closure for the endogenous default rate `mu`.
//!
//! Between resets a representative agent's liabilities and assets behave as
//! independent immigration-death processes (birth `gamma`, death
//! `lambda + mu` per link), so in the stationary state both are Poisson with
//! mean `gamma / (lambda + mu)`. The default rate must then satisfy
//!
//! ```text
//! mu = nu * Prob{ b + b0 + 1 - c <= c * ell }
//! ```
//!
//! [`poisson_rhs`] evaluates that probability exactly; [`gaussian_rhs`]
//! replaces `b - c ell` by a Gaussian, which gives `(nu/2) erfc(Z)` with
//!
//! ```text
//! Z = (gamma (1 - c) + b0 (lambda + mu)) / sqrt(2 (1 + c^2) gamma (lambda + mu))
//! ```
//!
//! With `gamma = 1` these are the usual closed forms. The fixed points of
//! `mu -> rhs(mu)` come in ones or threes; three roots (stable, unstable,
//! stable) mark the coexistence phase.

use rayon::prelude::*;
use thiserror::Error;

use crate::params::{Params, ParamsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeanFieldError {
    #[error("lambda + mu must be positive, got {0}")]
    NonPositiveDecay(f64),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("bracketing grid needs at least 100 intervals and a positive tolerance")]
    BadGrid,
    #[error("found {count} fixed points with no tangency to explain an even count")]
    EvenRootCount { count: usize },
}

/// Complementary error function.
///
/// Absolute error below 1e-12 on `|x| <= 6` and relative error below 1e-10 for
/// larger `x` as long as the result is a normal double (`x` up to about 26.5).
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Which right-hand side of the self-consistency equation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhsKind {
    #[default]
    Gaussian,
    Poisson,
}

fn decay(mu: f64, params: &Params) -> Result<f64, MeanFieldError> {
    let k = params.lambda + mu;
    if !(k > 0.0) {
        return Err(MeanFieldError::NonPositiveDecay(k));
    }
    Ok(k)
}

/// Connectivity implied by a default rate, `gamma / (lambda + mu)`.
pub fn connectivity(mu: f64, params: &Params) -> f64 {
    params.gamma / (params.lambda + mu)
}

/// Argument of the erfc in the Gaussian closure.
pub fn z_value(mu: f64, params: &Params) -> Result<f64, MeanFieldError> {
    let k = decay(mu, params)?;
    let c = params.c;
    Ok((params.gamma * (1.0 - c) + params.b0 * k) / (2.0 * (1.0 + c * c) * params.gamma * k).sqrt())
}

/// `(nu/2) erfc(Z(mu))`.
pub fn gaussian_rhs(mu: f64, params: &Params) -> Result<f64, MeanFieldError> {
    if params.nu == 0.0 {
        decay(mu, params)?;
        return Ok(0.0);
    }
    Ok(0.5 * params.nu * erfc(z_value(mu, params)?))
}

/// Poisson probabilities `P(K = k)` for `k = 0..` until the remaining upper
/// tail is below 1e-12 (and past the mean).
fn poisson_pmf(mean: f64) -> Vec<f64> {
    if mean == 0.0 {
        return vec![1.0];
    }
    let ln_mean = mean.ln();
    let mut pmf = Vec::new();
    let mut cumulative = 0.0;
    for k in 0.. {
        let p = (k as f64 * ln_mean - mean - libm::lgamma(k as f64 + 1.0)).exp();
        pmf.push(p);
        cumulative += p;
        if k as f64 > mean && 1.0 - cumulative < 1e-12 && p < 1e-14 {
            break;
        }
    }
    pmf
}

/// `nu * Prob{ b + b0 + 1 - c <= c ell }` with `ell`, `b` independent
/// Poisson of mean `gamma / (lambda + mu)`, summed exactly.
pub fn poisson_rhs(mu: f64, params: &Params) -> Result<f64, MeanFieldError> {
    let k = decay(mu, params)?;
    if params.nu == 0.0 || params.c == 0.0 {
        return Ok(0.0);
    }
    let (c, b0) = (params.c, params.b0);
    let pmf = poisson_pmf(params.gamma / k);
    let mut cdf = Vec::with_capacity(pmf.len());
    let mut acc = 0.0;
    for p in &pmf {
        acc += p;
        cdf.push(acc);
    }
    let satisfied = |ell: usize, b: i64| b as f64 + b0 + 1.0 - c <= c * ell as f64;
    let mut prob = 0.0;
    for (ell, p_ell) in pmf.iter().enumerate() {
        // largest b meeting the condition, computed with the same float
        // comparison as `satisfied`
        let mut b_max = (c * ell as f64 + c - b0 - 1.0).floor() as i64;
        while satisfied(ell, b_max + 1) {
            b_max += 1;
        }
        while b_max >= 0 && !satisfied(ell, b_max) {
            b_max -= 1;
        }
        if b_max < 0 {
            continue;
        }
        let f = cdf.get(b_max as usize).copied().unwrap_or(1.0).min(1.0);
        prob += p_ell * f;
    }
    Ok(params.nu * prob.min(1.0))
}

pub fn rhs(kind: RhsKind, mu: f64, params: &Params) -> Result<f64, MeanFieldError> {
    match kind {
        RhsKind::Gaussian => gaussian_rhs(mu, params),
        RhsKind::Poisson => poisson_rhs(mu, params),
    }
}

/// A solution of `mu = rhs(mu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub mu: f64,
    /// `|rhs'(mu)| < 1`.
    pub stable: bool,
    pub slope: f64,
    pub rhs_kind: RhsKind,
    /// Slope within 1e-4 of one: the root sits on a fold and may be a merged
    /// pair.
    pub degenerate: bool,
}

/// Root search settings for [`fixed_points`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSearch {
    /// Number of bracketing intervals on `[0, nu]`.
    pub grid: usize,
    /// Bisection tolerance in `mu`, also the residual bound.
    pub tol: f64,
}

impl Default for RootSearch {
    fn default() -> Self {
        RootSearch { grid: 1000, tol: 1e-10 }
    }
}

/// Enumerates the fixed points of `mu -> rhs(mu)` on `[0, nu]`, ascending.
///
/// Sign changes of `g(mu) = rhs(mu) - mu` are bracketed on a uniform grid
/// and refined by bisection until the bracket is narrower than `tol` and
/// `|g| < tol`. Since `g(0) >= 0 >= g(nu)` the count is odd unless a fold
/// (reported through [`FixedPoint::degenerate`]) is involved.
pub fn fixed_points(
    params: &Params,
    kind: RhsKind,
    search: RootSearch,
) -> Result<Vec<FixedPoint>, MeanFieldError> {
    params.validate_stationary()?;
    if search.grid < 100 || !(search.tol > 0.0) {
        return Err(MeanFieldError::BadGrid);
    }
    let g = |mu: f64| rhs(kind, mu, params).map(|r| r - mu);
    let finish = |mu: f64| -> Result<FixedPoint, MeanFieldError> {
        let slope = rhs_slope(kind, mu, params, search.tol)?;
        Ok(FixedPoint {
            mu,
            stable: slope.abs() < 1.0,
            slope,
            rhs_kind: kind,
            degenerate: (slope - 1.0).abs() < 1e-4,
        })
    };

    if params.nu == 0.0 {
        return Ok(vec![finish(0.0)?]);
    }

    let step = params.nu / search.grid as f64;
    let mut roots = Vec::new();
    let mut prev_mu = 0.0;
    let mut prev_g = g(0.0)?;
    if prev_g == 0.0 {
        roots.push(finish(0.0)?);
    }
    for i in 1..=search.grid {
        let mu = if i == search.grid { params.nu } else { i as f64 * step };
        let gi = g(mu)?;
        if gi == 0.0 {
            roots.push(finish(mu)?);
        } else if prev_g != 0.0 && (prev_g > 0.0) != (gi > 0.0) {
            let root = bisect(&g, prev_mu, mu, prev_g, search.tol)?;
            roots.push(finish(root)?);
        }
        prev_mu = mu;
        prev_g = gi;
    }

    if roots.len() % 2 == 0 && !roots.iter().any(|r| r.degenerate) {
        return Err(MeanFieldError::EvenRootCount { count: roots.len() });
    }
    for r in &roots {
        debug_assert!(g(r.mu)?.abs() < search.tol, "residual at {}", r.mu);
    }
    Ok(roots)
}

fn bisect(
    g: &impl Fn(f64) -> Result<f64, MeanFieldError>,
    mut lo: f64,
    mut hi: f64,
    mut g_lo: f64,
    tol: f64,
) -> Result<f64, MeanFieldError> {
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid)?;
        if g_mid == 0.0 || (hi - lo < tol && g_mid.abs() < tol) || mid == lo || mid == hi {
            return Ok(mid);
        }
        if (g_mid > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Central difference of the right-hand side with step `max(1e-6, tol)`,
/// falling back to a forward difference where `lambda + mu - h` is not positive.
fn rhs_slope(kind: RhsKind, mu: f64, params: &Params, tol: f64) -> Result<f64, MeanFieldError> {
    let h = tol.max(1e-6);
    let f = |x: f64| rhs(kind, x, params);
    if params.lambda + mu - h > 0.0 {
        Ok((f(mu + h)? - f(mu - h)?) / (2.0 * h))
    } else {
        Ok((f(mu + h)? - f(mu)?) / h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Dense,
    Sparse,
    Coexistence,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Dense => "D",
            Phase::Sparse => "S",
            Phase::Coexistence => "CO",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub lambda: f64,
    pub c: f64,
    pub phase: Phase,
    pub fixed_points: Vec<FixedPoint>,
}

/// Labels the fixed-point structure at `(c, lambda)`, other parameters taken
/// from `params`.
///
/// Two or more stable roots mean coexistence. A unique stable root is dense
/// when its connectivity is at least half the default-free value, i.e. when
/// `mu <= lambda`, and sparse otherwise.
pub fn classify_phase(c: f64, lambda: f64, params: &Params) -> Result<PhasePoint, MeanFieldError> {
    classify_phase_with(c, lambda, params, RhsKind::Gaussian, RootSearch::default())
}

pub fn classify_phase_with(
    c: f64,
    lambda: f64,
    params: &Params,
    kind: RhsKind,
    search: RootSearch,
) -> Result<PhasePoint, MeanFieldError> {
    let point = params.with_c(c).with_lambda(lambda);
    let roots = fixed_points(&point, kind, search)?;
    let stable: Vec<&FixedPoint> = roots.iter().filter(|r| r.stable && !r.degenerate).collect();
    let phase = if stable.len() >= 2 {
        Phase::Coexistence
    } else {
        let mu = stable
            .first()
            .copied()
            .or_else(|| roots.iter().find(|r| r.stable))
            .map_or(roots[0].mu, |r| r.mu);
        if connectivity(mu, &point) >= 0.5 * connectivity(0.0, &point) {
            Phase::Dense
        } else {
            Phase::Sparse
        }
    };
    Ok(PhasePoint {
        lambda,
        c,
        phase,
        fixed_points: roots,
    })
}

/// Phase transitions in `c` at one `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaBoundary {
    pub lambda: f64,
    /// Edge where a third root appears coming from the dense side.
    pub dense_to_coexistence: Option<f64>,
    /// Edge where the dense root disappears.
    pub coexistence_to_sparse: Option<f64>,
    /// Dense/sparse crossover when there is no coexistence window.
    pub crossover: Option<f64>,
    /// Why a boundary could not be bracketed, if it could not.
    pub note: Option<String>,
}

impl LambdaBoundary {
    pub fn has_coexistence(&self) -> bool {
        self.dense_to_coexistence.is_some() || self.coexistence_to_sparse.is_some()
    }
}

/// Number of `c` samples used to bracket phase changes.
const BOUNDARY_SCAN: usize = 200;

/// Locates the D/CO/S boundaries in `c` for every `lambda` in the grid.
///
/// `c_range` is scanned on a uniform grid and each change of phase is
/// refined by bisection in `c` to `tol`. Failures to bracket are recorded per
/// `lambda` rather than aborting the whole diagram.
pub fn phase_boundary(
    params: &Params,
    lambda_grid: &[f64],
    c_range: (f64, f64),
    tol: f64,
) -> Result<Vec<LambdaBoundary>, MeanFieldError> {
    if lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MeanFieldError::BadGrid);
    }
    lambda_grid
        .par_iter()
        .map(|&lambda| boundary_at(params, lambda, c_range, tol))
        .collect()
}

fn boundary_at(
    params: &Params,
    lambda: f64,
    (c_lo, c_hi): (f64, f64),
    tol: f64,
) -> Result<LambdaBoundary, MeanFieldError> {
    let phase_at = |c: f64| classify_phase(c, lambda, params).map(|p| p.phase);
    let cs: Vec<f64> = (0..=BOUNDARY_SCAN)
        .map(|i| c_lo + (c_hi - c_lo) * i as f64 / BOUNDARY_SCAN as f64)
        .collect();
    let phases = cs.iter().map(|&c| phase_at(c)).collect::<Result<Vec<_>, _>>()?;

    // refine the first change from `from` to anything else
    let refine = |from: Phase, pred: &dyn Fn(Phase) -> bool| -> Result<Option<f64>, MeanFieldError> {
        let Some(i) = (1..phases.len()).find(|&i| phases[i - 1] == from && pred(phases[i])) else {
            return Ok(None);
        };
        let (mut lo, mut hi) = (cs[i - 1], cs[i]);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if pred(phase_at(mid)?) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    };

    let mut out = LambdaBoundary {
        lambda,
        dense_to_coexistence: None,
        coexistence_to_sparse: None,
        crossover: None,
        note: None,
    };
    if phases.contains(&Phase::Coexistence) {
        out.dense_to_coexistence = refine(Phase::Dense, &|p| p == Phase::Coexistence)?;
        out.coexistence_to_sparse = refine(Phase::Coexistence, &|p| p == Phase::Sparse)?;
        if out.dense_to_coexistence.is_none() || out.coexistence_to_sparse.is_none() {
            out.note = Some("coexistence window touches the edge of the c range".into());
        }
    } else {
        out.crossover = refine(Phase::Dense, &|p| p == Phase::Sparse)?;
        if out.crossover.is_none() {
            out.note = Some(format!(
                "single phase {} over the whole c range",
                phases[0].label()
            ));
        }
    }
    Ok(out)
}

/// Classifies every `(lambda, c)` pair, row-major in `lambda`, in parallel.
/// Output order follows the grid, not completion order.
pub fn phase_grid(
    params: &Params,
    lambdas: &[f64],
    cs: &[f64],
) -> Vec<Result<PhasePoint, MeanFieldError>> {
    let cells: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| cs.iter().map(move |&c| (l, c)))
        .collect();
    cells
        .par_iter()
        .map(|&(lambda, c)| classify_phase(c, lambda, params))
        .collect()
}
