//! Stationary master equation for one agent's balance sheet `(ell, b)`.
//!
//! At fixed endogenous rates the joint law `P(ell, b)` evolves under a
//! continuous-time Markov chain on the lattice `0..=L x 0..=B`:
//!
//! | move                 | rate                          |
//! |----------------------|-------------------------------|
//! | `ell -> ell + 1`     | `gamma` (suppressed at `L`)   |
//! | `b -> b + 1`         | `gamma` (suppressed at `B`)   |
//! | `ell -> ell - 1`     | `(lambda + mu_b) ell`         |
//! | `b -> b - 1`         | `(lambda + mu_ell) b`         |
//! | `(ell, b) -> (0, 0)` | `nu` when the foreclosure rule fires |
//!
//! The re-injection at the origin is therefore `mu = nu * sum Theta P` taken
//! from the current `P`, so mass is conserved exactly. The endogenous rates
//! are closed by [`rate_closure`] and iterated to a fixed point by
//! [`self_consistent_solve`].
//!
//! The linear stationary problem is solved by Gauss-Seidel sweeps
//! accelerated with aggregation/disaggregation steps on the `ell` and `b`
//! marginals, whose one-dimensional chains (birth, death, reset to zero) are
//! solved exactly by a cut-flux recursion.

use std::io::{self, Write};

use thiserror::Error;

use crate::game::default_on_disclosure;
use crate::params::{Params, ParamsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MasterEqError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("stationary solve did not reach residual {tol:e} in {sweeps} sweeps (residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64, tol: f64 },
    #[error("truncation too small: boundary mass {boundary_mass:e} exceeds 1e-8")]
    Truncation { boundary_mass: f64 },
    #[error("self-consistent rates did not converge in {iterations} iterations (last residual {:e})", history.last().copied().unwrap_or(f64::NAN))]
    RatesNonConvergence { iterations: usize, history: Vec<f64> },
    #[error("invalid setting: {0}")]
    Settings(String),
}

/// Largest `ell` and `b` kept on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub max_ell: usize,
    pub max_b: usize,
}

impl Truncation {
    pub fn square(max: usize) -> Self {
        Truncation { max_ell: max, max_b: max }
    }

    /// Default-free mean `gamma/lambda` plus twelve Poisson standard
    /// deviations and a margin of 20, capped at 600. Defaults only shrink the
    /// distribution, so this bounds every branch.
    pub fn for_params(params: &Params) -> Self {
        let mean = params.gamma / params.lambda;
        let max = (mean + 12.0 * mean.sqrt() + 20.0).ceil().min(600.0) as usize;
        Truncation::square(max)
    }

    fn len(&self) -> usize {
        (self.max_ell + 1) * (self.max_b + 1)
    }
}

/// `P(ell, b)` on a truncated lattice, stored row-major in `ell`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    trunc: Truncation,
    grid: Vec<f64>,
}

impl JointDistribution {
    /// Product of two independent Poisson laws with the given mean,
    /// truncated and renormalised.
    pub fn product_poisson(trunc: Truncation, mean: f64) -> Self {
        let pmf = |n: usize| -> Vec<f64> {
            (0..=n)
                .map(|k| {
                    if mean == 0.0 {
                        if k == 0 { 1.0 } else { 0.0 }
                    } else {
                        (k as f64 * mean.ln() - mean - libm::lgamma(k as f64 + 1.0)).exp()
                    }
                })
                .collect()
        };
        let (pl, pb) = (pmf(trunc.max_ell), pmf(trunc.max_b));
        let mut grid = Vec::with_capacity(trunc.len());
        for x in &pl {
            grid.extend(pb.iter().map(|y| x * y));
        }
        let mut dist = JointDistribution { trunc, grid };
        dist.normalize();
        dist
    }

    /// All mass at the origin.
    pub fn origin(trunc: Truncation) -> Self {
        let mut grid = vec![0.0; trunc.len()];
        grid[0] = 1.0;
        JointDistribution { trunc, grid }
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    #[inline]
    fn idx(&self, ell: usize, b: usize) -> usize {
        ell * (self.trunc.max_b + 1) + b
    }

    pub fn get(&self, ell: usize, b: usize) -> f64 {
        self.grid[self.idx(ell, b)]
    }

    /// Iterates `(ell, b, probability)` row by row.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let width = self.trunc.max_b + 1;
        self.grid
            .iter()
            .enumerate()
            .map(move |(i, &p)| (i / width, i % width, p))
    }

    pub fn total_mass(&self) -> f64 {
        self.grid.iter().sum()
    }

    /// Mass on the outer edges `ell = L` or `b = B`.
    pub fn boundary_mass(&self) -> f64 {
        self.iter()
            .filter(|&(l, b, _)| l == self.trunc.max_ell || b == self.trunc.max_b)
            .map(|(_, _, p)| p)
            .sum()
    }

    pub fn mean_ell(&self) -> f64 {
        self.iter().map(|(l, _, p)| l as f64 * p).sum()
    }

    pub fn mean_b(&self) -> f64 {
        self.iter().map(|(_, b, p)| b as f64 * p).sum()
    }

    pub fn marginal_ell(&self) -> Vec<f64> {
        self.grid
            .chunks(self.trunc.max_b + 1)
            .map(|row| row.iter().sum())
            .collect()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.trunc.max_b + 1];
        for row in self.grid.chunks(self.trunc.max_b + 1) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
        out
    }

    fn normalize(&mut self) {
        let total = self.total_mass();
        if total > 0.0 {
            self.grid.iter_mut().for_each(|p| *p /= total);
        }
    }

    /// Non-negativity, unit mass (1e-10) and boundary mass (1e-8).
    pub fn check_invariants(&self) -> Result<(), MasterEqError> {
        if let Some(p) = self.grid.iter().find(|p| !(**p >= 0.0)) {
            return Err(MasterEqError::Settings(format!("negative or NaN probability {p}")));
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(MasterEqError::Settings(format!("total mass {mass}")));
        }
        let boundary_mass = self.boundary_mass();
        if boundary_mass >= 1e-8 {
            return Err(MasterEqError::Truncation { boundary_mass });
        }
        Ok(())
    }

    /// Text dump: header `ell,b,probability`, one row per lattice site,
    /// probabilities with 12 significant digits.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "ell,b,probability")?;
        for (l, b, p) in self.iter() {
            writeln!(out, "{l},{b},{p:.11e}")?;
        }
        Ok(())
    }
}

/// Endogenous default-driven decay rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateClosure {
    /// Default rate per agent.
    pub mu: f64,
    /// Extra decay rate per asset (borrower defaults).
    pub mu_ell: f64,
    /// Extra decay rate per liability (lender defaults).
    pub mu_b: f64,
}

impl RateClosure {
    /// Start of the sparse branch: every rate at its ceiling `nu`.
    pub fn saturated(nu: f64) -> Self {
        RateClosure { mu: nu, mu_ell: nu, mu_b: nu }
    }

    fn max_abs_diff(&self, other: &RateClosure) -> f64 {
        (self.mu - other.mu)
            .abs()
            .max((self.mu_ell - other.mu_ell).abs())
            .max((self.mu_b - other.mu_b).abs())
    }

    fn blend(&self, target: &RateClosure, damping: f64) -> RateClosure {
        let mix = |a: f64, b: f64| (1.0 - damping) * a + damping * b;
        RateClosure {
            mu: mix(self.mu, target.mu),
            mu_ell: mix(self.mu_ell, target.mu_ell),
            mu_b: mix(self.mu_b, target.mu_b),
        }
    }
}

/// Generator of the lattice chain at fixed rates.
struct Operator {
    trunc: Truncation,
    gamma: f64,
    /// `lambda + mu_b`, per liability.
    down_ell: f64,
    /// `lambda + mu_ell`, per asset.
    down_b: f64,
    nu: f64,
    /// The foreclosure rule holds at `(ell, b)` iff `b < cut[ell]`.
    cut: Vec<usize>,
}

impl Operator {
    fn new(params: &Params, rates: &RateClosure, trunc: Truncation) -> Self {
        let cut = (0..=trunc.max_ell)
            .map(|l| {
                (0..=trunc.max_b)
                    .find(|&b| !default_on_disclosure(params.c, l, b, params.b0))
                    .unwrap_or(trunc.max_b + 1)
            })
            .collect();
        Operator {
            trunc,
            gamma: params.gamma,
            down_ell: params.lambda + rates.mu_b,
            down_b: params.lambda + rates.mu_ell,
            nu: params.nu,
            cut,
        }
    }

    #[inline]
    fn width(&self) -> usize {
        self.trunc.max_b + 1
    }

    /// Reset rate out of `(l, b)`; a reset at the origin is a no-op.
    #[inline]
    fn reset(&self, l: usize, b: usize) -> f64 {
        if b < self.cut[l] && (l, b) != (0, 0) {
            self.nu
        } else {
            0.0
        }
    }

    #[inline]
    fn out_rate(&self, l: usize, b: usize) -> f64 {
        let up_l = if l < self.trunc.max_ell { self.gamma } else { 0.0 };
        let up_b = if b < self.trunc.max_b { self.gamma } else { 0.0 };
        up_l + up_b + self.down_ell * l as f64 + self.down_b * b as f64 + self.reset(l, b)
    }

    /// Probability flow into `(l, b)` from its lattice neighbours, plus
    /// `reset_in` at the origin.
    #[inline]
    fn inflow(&self, p: &[f64], l: usize, b: usize, reset_in: f64) -> f64 {
        let w = self.width();
        let i = l * w + b;
        let mut flow = 0.0;
        if l > 0 {
            flow += self.gamma * p[i - w];
        }
        if b > 0 {
            flow += self.gamma * p[i - 1];
        }
        if l < self.trunc.max_ell {
            flow += self.down_ell * (l + 1) as f64 * p[i + w];
        }
        if b < self.trunc.max_b {
            flow += self.down_b * (b + 1) as f64 * p[i + 1];
        }
        if i == 0 {
            flow += reset_in;
        }
        flow
    }

    fn reset_flow(&self, p: &[f64]) -> f64 {
        let w = self.width();
        let mut total = 0.0;
        for l in 0..=self.trunc.max_ell {
            let cut = self.cut[l].min(w);
            total += p[l * w..l * w + cut].iter().sum::<f64>();
        }
        total -= if self.cut[0] > 0 { p[0] } else { 0.0 };
        self.nu * total
    }

    /// Max-norm of `P Q`, the time derivative of `P`.
    fn residual(&self, p: &[f64]) -> f64 {
        let reset_in = self.reset_flow(p);
        let w = self.width();
        let mut worst = 0.0f64;
        for l in 0..=self.trunc.max_ell {
            for b in 0..w {
                let r = self.inflow(p, l, b, reset_in) - self.out_rate(l, b) * p[l * w + b];
                worst = worst.max(r.abs());
            }
        }
        worst
    }

    fn gauss_seidel(&self, p: &mut [f64], forward: bool) {
        let w = self.width();
        let mut reset_in = self.reset_flow(p);
        let mut update = |p: &mut [f64], l: usize, b: usize| {
            let i = l * w + b;
            let out = self.out_rate(l, b);
            if out > 0.0 {
                let new = self.inflow(p, l, b, reset_in) / out;
                reset_in += self.reset(l, b) * (new - p[i]);
                p[i] = new;
            }
        };
        if forward {
            for l in 0..=self.trunc.max_ell {
                for b in 0..w {
                    update(p, l, b);
                }
            }
        } else {
            for l in (0..=self.trunc.max_ell).rev() {
                for b in (0..w).rev() {
                    update(p, l, b);
                }
            }
        }
    }

    /// Aggregation on the `ell` marginal: solve its exact 1D chain and
    /// rescale each row to match it.
    fn aggregate_ell(&self, p: &mut [f64]) {
        let w = self.width();
        let n = self.trunc.max_ell;
        let mut mass = vec![0.0; n + 1];
        let mut reset = vec![0.0; n + 1];
        for l in 0..=n {
            let row = &p[l * w..(l + 1) * w];
            mass[l] = row.iter().sum();
            if l > 0 && mass[l] > 0.0 {
                let cut = self.cut[l].min(w);
                reset[l] = self.nu * row[..cut].iter().sum::<f64>() / mass[l];
            }
        }
        let down: Vec<f64> = (0..=n).map(|l| self.down_ell * l as f64).collect();
        let target = solve_reset_chain(self.gamma, &down, &reset);
        for l in 0..=n {
            if mass[l] > 0.0 {
                let scale = target[l] / mass[l];
                p[l * w..(l + 1) * w].iter_mut().for_each(|x| *x *= scale);
            }
        }
    }

    /// Aggregation on the `b` marginal.
    fn aggregate_b(&self, p: &mut [f64]) {
        let w = self.width();
        let n = self.trunc.max_b;
        let mut mass = vec![0.0; n + 1];
        let mut reset = vec![0.0; n + 1];
        for l in 0..=self.trunc.max_ell {
            let cut = self.cut[l].min(w);
            for (b, &x) in p[l * w..(l + 1) * w].iter().enumerate() {
                mass[b] += x;
                if b < cut && l > 0 {
                    reset[b] += x;
                }
            }
        }
        for b in 0..=n {
            reset[b] = if b > 0 && mass[b] > 0.0 { self.nu * reset[b] / mass[b] } else { 0.0 };
        }
        let down: Vec<f64> = (0..=n).map(|b| self.down_b * b as f64).collect();
        let target = solve_reset_chain(self.gamma, &down, &reset);
        let scale: Vec<f64> = (0..=n)
            .map(|b| if mass[b] > 0.0 { target[b] / mass[b] } else { 1.0 })
            .collect();
        for row in p.chunks_mut(w) {
            for (x, s) in row.iter_mut().zip(&scale) {
                *x *= s;
            }
        }
    }
}

/// Stationary law of a chain on `0..=K` with birth rate `up` (none at `K`),
/// death rates `down[k]` and reset-to-zero rates `reset[k]`.
///
/// Flux balance across the cut between `k` and `k + 1`:
/// `pi_k up = pi_{k+1} down_{k+1} + sum_{j > k} pi_j reset_j`, solved from
/// the top down with periodic rescaling.
fn solve_reset_chain(up: f64, down: &[f64], reset: &[f64]) -> Vec<f64> {
    let k_max = down.len() - 1;
    let mut pi = vec![0.0; k_max + 1];
    pi[k_max] = 1.0;
    let mut above = reset[k_max];
    for k in (0..k_max).rev() {
        pi[k] = (pi[k + 1] * down[k + 1] + above) / up;
        above += pi[k] * reset[k];
        if pi[k] > 1e200 {
            pi[k..].iter_mut().for_each(|x| *x *= 1e-200);
            above *= 1e-200;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    pi
}

/// Iteration limits of the linear stationary solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSolve {
    /// Bound on the max-norm of `P Q`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for InnerSolve {
    fn default() -> Self {
        InnerSolve { tol: 1e-12, max_sweeps: 200_000 }
    }
}

/// Result of a linear stationary solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub dist: JointDistribution,
    pub sweeps: usize,
    pub residual: f64,
}

/// Stationary `P` at fixed rates, starting from the rates' product-Poisson
/// guess. The returned distribution meets the residual contract
/// `max |P Q| < tol` and the truncation invariants.
pub fn stationary_distribution(
    params: &Params,
    rates: &RateClosure,
    trunc: Truncation,
    tol: f64,
) -> Result<JointDistribution, MasterEqError> {
    let guess = JointDistribution::product_poisson(trunc, params.gamma / (params.lambda + rates.mu));
    let solved = stationary_from(params, rates, guess, InnerSolve { tol, ..InnerSolve::default() })?;
    solved.dist.check_invariants()?;
    Ok(solved.dist)
}

/// Warm-started linear solve. Truncation adequacy is not checked here.
pub fn stationary_from(
    params: &Params,
    rates: &RateClosure,
    start: JointDistribution,
    solve: InnerSolve,
) -> Result<Stationary, MasterEqError> {
    params.validate_stationary()?;
    if !(solve.tol > 0.0) {
        return Err(MasterEqError::Settings(format!("tolerance must be positive, got {}", solve.tol)));
    }
    let trunc = start.truncation();
    if params.gamma == 0.0 {
        // pure decay: everything drains into the origin
        return Ok(Stationary {
            dist: JointDistribution::origin(trunc),
            sweeps: 0,
            residual: 0.0,
        });
    }
    let op = Operator::new(params, rates, trunc);
    let mut dist = start;
    if dist.total_mass() <= 0.0 {
        dist = JointDistribution::origin(trunc);
    }
    dist.normalize();
    let mut residual = op.residual(&dist.grid);
    let mut sweeps = 0;
    while residual >= solve.tol {
        if sweeps >= solve.max_sweeps {
            return Err(MasterEqError::NonConvergence {
                sweeps,
                residual,
                tol: solve.tol,
            });
        }
        op.aggregate_ell(&mut dist.grid);
        op.aggregate_b(&mut dist.grid);
        op.gauss_seidel(&mut dist.grid, true);
        op.gauss_seidel(&mut dist.grid, false);
        dist.normalize();
        sweeps += 1;
        residual = op.residual(&dist.grid);
    }
    Ok(Stationary { dist, sweeps, residual })
}

/// Max-norm of `P Q` for the chain at `rates`.
pub fn stationarity_residual(params: &Params, rates: &RateClosure, dist: &JointDistribution) -> f64 {
    Operator::new(params, rates, dist.truncation()).residual(&dist.grid)
}

/// Default rates implied by `P`:
///
/// ```text
/// mu     = nu * sum Theta P
/// mu_ell = nu / <ell> * sum Theta ell P
/// mu_b   = nu / <b>   * sum Theta b P
/// ```
///
/// with `Theta` the foreclosure rule (strict, so `Theta(0) = 0`). A
/// vanishing mean sends the matching rate to zero.
pub fn rate_closure(params: &Params, dist: &JointDistribution) -> RateClosure {
    let (mut mass, mut ell_mass, mut b_mass) = (0.0, 0.0, 0.0);
    for (l, b, p) in dist.iter() {
        if default_on_disclosure(params.c, l, b, params.b0) {
            mass += p;
            ell_mass += l as f64 * p;
            b_mass += b as f64 * p;
        }
    }
    let (mean_ell, mean_b) = (dist.mean_ell(), dist.mean_b());
    RateClosure {
        mu: params.nu * mass,
        mu_ell: if mean_ell > 0.0 { params.nu * ell_mass / mean_ell } else { 0.0 },
        mu_b: if mean_b > 0.0 { params.nu * b_mass / mean_b } else { 0.0 },
    }
}

/// Average connectivity `<ell>` of the representative agent.
pub fn connectivity_from_distribution(dist: &JointDistribution) -> f64 {
    dist.mean_ell()
}

/// Outer-loop settings for [`self_consistent_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    /// Initial weight of the new closure in the damped update.
    pub damping: f64,
    /// Bound on `max |closure(P) - rates|`.
    pub tol: f64,
    pub max_iter: usize,
    pub inner: InnerSolve,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            damping: 0.5,
            tol: 1e-9,
            max_iter: 5000,
            inner: InnerSolve::default(),
        }
    }
}

/// A self-consistent stationary state.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfConsistent {
    pub dist: JointDistribution,
    /// `rate_closure(dist)`.
    pub rates: RateClosure,
    pub iterations: usize,
    /// `max |closure - rates|` per outer iteration.
    pub history: Vec<f64>,
}

impl SelfConsistent {
    pub fn connectivity(&self) -> f64 {
        connectivity_from_distribution(&self.dist)
    }
}

/// Alternates the linear stationary solve with [`rate_closure`], moving the
/// rates by `damping` towards the closure each time, until they agree to
/// `tol`.
///
/// The starting rates select the branch: all zero reaches the dense
/// solution, [`RateClosure::saturated`] the sparse one. The damping halves
/// whenever the residual of any rate flips sign twice in a row.
pub fn self_consistent_solve(
    params: &Params,
    trunc: Truncation,
    init: RateClosure,
    settings: SolveSettings,
) -> Result<SelfConsistent, MasterEqError> {
    let guess = JointDistribution::product_poisson(trunc, params.gamma / (params.lambda + init.mu));
    self_consistent_from(params, guess, init, settings)
}

/// [`self_consistent_solve`] warm-started from a previous distribution.
pub fn self_consistent_from(
    params: &Params,
    start: JointDistribution,
    init: RateClosure,
    settings: SolveSettings,
) -> Result<SelfConsistent, MasterEqError> {
    params.validate_stationary()?;
    if !(settings.damping > 0.0 && settings.damping <= 1.0) {
        return Err(MasterEqError::Settings(format!(
            "damping must lie in (0, 1], got {}",
            settings.damping
        )));
    }
    let mut damping = settings.damping;
    let mut rates = init;
    let mut dist = start;
    let mut history = Vec::new();
    let mut last_signs: Option<[i8; 3]> = None;
    let mut flips = 0;
    // Far from the fixed point an accurate linear solve is wasted work, so
    // the inner tolerance tracks the outer residual; acceptance always
    // re-checks at full inner accuracy.
    let mut inner_tol = settings.inner.tol.max(1e-6);
    for iteration in 1..=settings.max_iter {
        let inner = InnerSolve { tol: inner_tol, ..settings.inner };
        dist = stationary_from(params, &rates, dist, inner)?.dist;
        let target = rate_closure(params, &dist);
        let residual = target.max_abs_diff(&rates);
        history.push(residual);
        if residual < settings.tol && inner_tol > settings.inner.tol {
            inner_tol = settings.inner.tol;
            continue;
        }
        inner_tol = settings.inner.tol.max((1e-3 * residual).min(inner_tol));
        if residual < settings.tol {
            dist.check_invariants()?;
            return Ok(SelfConsistent {
                dist,
                rates: target,
                iterations: iteration,
                history,
            });
        }
        let signs = [
            (target.mu - rates.mu).signum() as i8,
            (target.mu_ell - rates.mu_ell).signum() as i8,
            (target.mu_b - rates.mu_b).signum() as i8,
        ];
        if let Some(prev) = last_signs {
            if signs.iter().zip(prev).any(|(a, b)| *a != 0 && *a == -b) {
                flips += 1;
                if flips >= 2 {
                    damping = (damping * 0.5).max(1.0 / 64.0);
                    flips = 0;
                }
            } else {
                flips = 0;
            }
        }
        last_signs = Some(signs);
        rates = rates.blend(&target, damping);
    }
    Err(MasterEqError::RatesNonConvergence {
        iterations: settings.max_iter,
        history,
    })
}

/// One point of a master-equation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub params: Params,
    pub rho: f64,
    pub mean_b: f64,
    pub rates: RateClosure,
    pub iterations: usize,
}

/// Solves a sequence of parameter points, warm-starting each from the
/// previous point's `(P, rates)` so that the branch reached at the first
/// point is followed for as long as it exists.
pub fn sweep(
    points: &[Params],
    trunc: Truncation,
    init: RateClosure,
    settings: SolveSettings,
) -> Result<Vec<SweepPoint>, MasterEqError> {
    let Some(first) = points.first() else {
        return Ok(Vec::new());
    };
    let mut dist = JointDistribution::product_poisson(trunc, first.gamma / (first.lambda + init.mu));
    let mut rates = init;
    let mut out = Vec::with_capacity(points.len());
    for params in points {
        let solved = self_consistent_from(params, dist, rates, settings)?;
        out.push(SweepPoint {
            params: *params,
            rho: solved.connectivity(),
            mean_b: solved.dist.mean_b(),
            rates: solved.rates,
            iterations: solved.iterations,
        });
        rates = solved.rates;
        dist = solved.dist;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64, nu: f64, c: f64) -> Params {
        Params {
            gamma: 1.0,
            lambda,
            nu,
            b0: 2.0,
            c,
            n_agents: 1000,
        }
    }

    #[test]
    fn reset_chain_without_resets_is_poisson() {
        let k = 60;
        let down: Vec<f64> = (0..=k).map(|i| 0.25 * i as f64).collect();
        let pi = solve_reset_chain(1.0, &down, &vec![0.0; k + 1]);
        let exact = JointDistribution::product_poisson(Truncation::square(k), 4.0).marginal_ell();
        for (a, b) in pi.iter().zip(exact) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn reset_chain_balances_flux() {
        let down = vec![0.0, 0.5, 1.0, 1.5, 2.0];
        let reset = vec![0.0, 0.0, 1.0, 2.0, 3.0];
        let pi = solve_reset_chain(1.0, &down, &reset);
        // global balance: inflow at 0 equals outflow
        let into_zero = pi[1] * down[1] + (1..5).map(|j| pi[j] * reset[j]).sum::<f64>();
        assert!((into_zero - pi[0] * 1.0).abs() < 1e-14);
        for k in 1..4 {
            let inflow = pi[k - 1] + pi[k + 1] * down[k + 1];
            let outflow = pi[k] * (1.0 + down[k] + reset[k]);
            assert!((inflow - outflow).abs() < 1e-14);
        }
    }

    #[test]
    fn rate_closure_examples() {
        let trunc = Truncation::square(12);
        let origin = JointDistribution::origin(trunc);
        for c in [0.0, 0.5, 1.0] {
            assert_eq!(rate_closure(&params(0.1, 2.0, c), &origin), RateClosure::default());
        }
        let mut point = JointDistribution::origin(trunc);
        point.grid[0] = 0.0;
        let i = point.idx(9, 2);
        point.grid[i] = 1.0;
        let r = rate_closure(&params(0.1, 2.0, 0.6), &point);
        assert_eq!(r.mu, 2.0);
        assert_eq!(r.mu_ell, 2.0);
        assert_eq!(r.mu_b, 2.0);
        assert_eq!(rate_closure(&params(0.1, 2.0, 0.0), &point), RateClosure::default());
    }

    #[test]
    fn dump_format() {
        let dist = JointDistribution::origin(Truncation::square(1));
        let mut out = Vec::new();
        dist.write_dump(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "ell,b,probability\n0,0,1.00000000000e0\n0,1,0.00000000000e0\n1,0,0.00000000000e0\n1,1,0.00000000000e0\n"
        );
    }

    #[test]
    fn no_disclosure_gives_product_poisson() {
        for lambda in [0.05, 0.1, 0.5] {
            let p = params(lambda, 0.0, 0.8);
            let trunc = Truncation::for_params(&p);
            let dist = stationary_distribution(&p, &RateClosure::default(), trunc, 1e-12).unwrap();
            let exact = JointDistribution::product_poisson(trunc, 1.0 / lambda);
            let err = dist
                .iter()
                .map(|(l, b, x)| (x - exact.get(l, b)).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "lambda = {lambda}: {err}");
        }
    }

    #[test]
    fn zero_cost_matches_no_disclosure() {
        let trunc = Truncation::square(60);
        let a = stationary_distribution(&params(0.1, 2.0, 0.0), &RateClosure::default(), trunc, 1e-13).unwrap();
        let b = stationary_distribution(&params(0.1, 0.0, 0.0), &RateClosure::default(), trunc, 1e-13).unwrap();
        let err = a.iter().map(|(l, bb, x)| (x - b.get(l, bb)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn pure_decay_collapses_to_origin() {
        let p = Params { gamma: 0.0, ..params(0.1, 2.0, 0.5) };
        let dist = stationary_distribution(&p, &RateClosure::default(), Truncation::square(10), 1e-12).unwrap();
        assert_eq!(dist.get(0, 0), 1.0);
        assert_eq!(dist.total_mass(), 1.0);
    }

    #[test]
    fn too_small_truncation_is_reported() {
        let p = params(0.1, 0.0, 0.5);
        let err = stationary_distribution(&p, &RateClosure::default(), Truncation::square(15), 1e-12).unwrap_err();
        assert!(matches!(err, MasterEqError::Truncation { .. }), "{err:?}");
    }

    /// Dense LU solve of the balance equations with the normalisation
    /// replacing the origin's row.
    fn dense_oracle(p: &Params, rates: &RateClosure, trunc: Truncation) -> Vec<f64> {
        use nalgebra::{DMatrix, DVector};
        let w = trunc.max_b + 1;
        let n = trunc.len();
        let rule = |l: usize, b: usize| p.c * (l as f64 + 1.0) > b as f64 + p.b0 + 1.0;
        // q[(to, from)] holds the generator transposed
        let mut q = DMatrix::<f64>::zeros(n, n);
        for l in 0..=trunc.max_ell {
            for b in 0..=trunc.max_b {
                let from = l * w + b;
                let mut moves = Vec::new();
                if l < trunc.max_ell {
                    moves.push((from + w, p.gamma));
                }
                if b < trunc.max_b {
                    moves.push((from + 1, p.gamma));
                }
                if l > 0 {
                    moves.push((from - w, (p.lambda + rates.mu_b) * l as f64));
                }
                if b > 0 {
                    moves.push((from - 1, (p.lambda + rates.mu_ell) * b as f64));
                }
                if from != 0 && rule(l, b) {
                    moves.push((0, p.nu));
                }
                for (to, rate) in moves {
                    q[(to, from)] += rate;
                    q[(from, from)] -= rate;
                }
            }
        }
        for j in 0..n {
            q[(0, j)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(n);
        rhs[0] = 1.0;
        q.lu().solve(&rhs).unwrap().iter().copied().collect()
    }

    #[test]
    fn iterative_solve_matches_dense_oracle() {
        let trunc = Truncation::square(24);
        let cases = [
            (params(0.3, 2.0, 0.9), RateClosure { mu: 0.2, mu_ell: 0.3, mu_b: 0.1 }),
            (params(0.2, 1.0, 0.6).with_b0(0.0), RateClosure { mu: 0.05, mu_ell: 0.02, mu_b: 0.04 }),
            (params(0.5, 3.0, 1.4), RateClosure::default()),
        ];
        for (p, rates) in cases {
            let oracle = dense_oracle(&p, &rates, trunc);
            let guess = JointDistribution::product_poisson(trunc, 1.0 / p.lambda);
            let solved = stationary_from(&p, &rates, guess, InnerSolve { tol: 1e-14, max_sweeps: 100_000 }).unwrap();
            let err = solved
                .dist
                .grid
                .iter()
                .zip(&oracle)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-11, "{p:?}: {err}");
            assert!(stationarity_residual(&p, &rates, &solved.dist) < 1e-14);
        }
    }

    #[test]
    fn self_consistent_without_disclosure_is_immediate() {
        let p = params(0.1, 0.0, 0.9);
        let solved = self_consistent_solve(&p, Truncation::for_params(&p), RateClosure::default(), SolveSettings::default()).unwrap();
        // one loose pass, then the full-accuracy re-check; the rates never move
        assert_eq!(solved.iterations, 2);
        assert!(solved.history.iter().all(|&r| r == 0.0), "{:?}", solved.history);
        assert_eq!(solved.rates, RateClosure::default());
        assert!((solved.connectivity() - 10.0).abs() < 1e-8);
    }

    #[test]
    fn dense_branch_at_low_cost() {
        let p = params(0.05, 2.0, 0.1);
        let solved = self_consistent_solve(&p, Truncation::for_params(&p), RateClosure::default(), SolveSettings::default()).unwrap();
        assert!(solved.rates.mu < 1e-4, "{:?}", solved.rates);
        assert!((solved.connectivity() - 20.0).abs() / 20.0 < 0.01);
        let sym = (solved.dist.mean_ell() - solved.dist.mean_b()).abs() / solved.dist.mean_ell();
        assert!(sym < 1e-3);
        assert!(stationarity_residual(&p, &solved.rates, &solved.dist) < 1e-9);
    }

    #[test]
    fn settings_are_validated() {
        let p = params(0.05, 2.0, 0.1);
        let bad = SolveSettings { damping: 0.0, ..SolveSettings::default() };
        assert!(matches!(
            self_consistent_solve(&p, Truncation::square(50), RateClosure::default(), bad),
            Err(MasterEqError::Settings(_))
        ));
        let tiny = SolveSettings { max_iter: 1, ..SolveSettings::default() };
        let err = self_consistent_solve(&p.with_c(0.6), Truncation::square(94), RateClosure::default(), tiny).unwrap_err();
        match err {
            MasterEqError::RatesNonConvergence { iterations, history } => {
                assert_eq!(iterations, 1);
                assert_eq!(history.len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }
}
