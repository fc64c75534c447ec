//! Exact event-driven simulation of the credit network.
//!
//! Three Poisson processes drive the network:
//!
//! * every agent borrows at rate `gamma` from a lender drawn uniformly among
//!   the other agents,
//! * every link matures at rate `lambda`,
//! * every agent discloses its balance sheet at rate `nu`; if the lenders'
//!   foreclosure rule fires, the agent defaults and all its links vanish.
//!
//! Events are drawn with the Gillespie scheme: exponential waiting time with
//! the total rate `R = gamma N + lambda E + nu N`, then an event kind with
//! probability proportional to its share of `R`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use thiserror::Error;

use crate::game::default_on_disclosure;
use crate::network::{CreditNetwork, DefaultReport, Event, NetworkError};
use crate::params::{Params, ParamsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("total event rate is zero: the network is frozen")]
    Terminal,
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("network has {network} agents but params ask for {params}")]
    AgentMismatch { network: usize, params: usize },
    #[error("invalid run settings: {0}")]
    Settings(String),
    #[error("sweep values are not strictly {0:?}")]
    NotMonotone(Direction),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventCounters {
    pub borrows: u64,
    pub maturations: u64,
    pub disclosures: u64,
    pub defaults: u64,
}

impl EventCounters {
    pub fn events(&self) -> u64 {
        self.borrows + self.maturations + self.disclosures
    }
}

/// A simulation in progress. Owns its network and random stream.
#[derive(Debug, Clone)]
pub struct SimState {
    pub net: CreditNetwork,
    pub time: f64,
    pub counters: EventCounters,
    rng: ChaCha8Rng,
}

/// Outcome of a single [`step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub elapsed: f64,
    pub event: Event,
    /// Set when the event was a disclosure that ended in default.
    pub default: Option<DefaultReport>,
}

impl SimState {
    pub fn new(net: CreditNetwork, seed: u64) -> Self {
        SimState {
            net,
            time: 0.0,
            counters: EventCounters::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn empty(n_agents: usize, seed: u64) -> Result<Self, SimError> {
        Ok(SimState::new(CreditNetwork::new(n_agents)?, seed))
    }

    fn total_rate(&self, params: &Params) -> f64 {
        let n = self.net.n_agents() as f64;
        (params.gamma + params.nu) * n + params.lambda * self.net.link_count() as f64
    }

    fn waiting_time(&mut self, params: &Params) -> Result<f64, SimError> {
        let rate = self.total_rate(params);
        if rate <= 0.0 {
            return Err(SimError::Terminal);
        }
        let draw: f64 = self.rng.sample(Exp1);
        Ok(draw / rate)
    }

    /// Chooses and applies one event. Assumes a positive total rate.
    fn fire(&mut self, params: &Params) -> Step {
        let n = self.net.n_agents();
        let borrow_rate = params.gamma * n as f64;
        let mature_rate = params.lambda * self.net.link_count() as f64;
        let u = self.rng.random::<f64>() * self.total_rate(params);

        let step = if u < borrow_rate {
            let borrower = self.rng.random_range(0..n);
            let mut lender = self.rng.random_range(0..n - 1);
            if lender >= borrower {
                lender += 1;
            }
            self.net
                .add_loan(lender, borrower)
                .expect("lender and borrower are distinct valid agents");
            self.counters.borrows += 1;
            Step {
                elapsed: 0.0,
                event: Event::Borrow { borrower, lender },
                default: None,
            }
        } else if u < borrow_rate + mature_rate && self.net.link_count() > 0 {
            let link = self.net.link_at(self.rng.random_range(0..self.net.link_count()));
            self.net.mature_loan(link).expect("sampled link is live");
            self.counters.maturations += 1;
            Step {
                elapsed: 0.0,
                event: Event::Mature(link),
                default: None,
            }
        } else {
            let agent = self.rng.random_range(0..n);
            self.counters.disclosures += 1;
            let sheet = self.net.sheet(agent);
            // Without lenders nobody can foreclose.
            let default = if sheet.ell > 0 && default_on_disclosure(params.c, sheet.ell, sheet.b, params.b0) {
                debug_assert!(params.c * (sheet.ell as f64 + 1.0) > sheet.b as f64 + params.b0 + 1.0);
                self.counters.defaults += 1;
                Some(self.net.default_agent(agent).expect("sampled agent is valid"))
            } else {
                None
            };
            Step {
                elapsed: 0.0,
                event: Event::Disclose(agent),
                default,
            }
        };

        #[cfg(debug_assertions)]
        if self.counters.events() % (1 << 16) == 0 {
            if let Err(msg) = self.net.check_invariants() {
                panic!("network invariant broken after {:?}: {msg}", step.event);
            }
        }
        step
    }
}

/// Advances the simulation by one event.
pub fn step(state: &mut SimState, params: &Params) -> Result<Step, SimError> {
    let elapsed = state.waiting_time(params)?;
    state.time += elapsed;
    let mut step = state.fire(params);
    step.elapsed = elapsed;
    Ok(step)
}

/// Average connectivity `rho = E / N`.
pub fn measure_connectivity(net: &CreditNetwork) -> f64 {
    net.connectivity()
}

/// Timing of a single stationary run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub t_max: f64,
    pub burn_in: f64,
    pub sample_interval: f64,
}

impl RunSettings {
    /// Burn-in of `max(100, 20/lambda)`, an equally long measurement window,
    /// and one sample per mean disclosure interval `1/nu` (unit interval when
    /// `nu = 0`).
    pub fn for_params(params: &Params) -> Self {
        let relax = (20.0 / params.lambda).max(100.0);
        RunSettings {
            t_max: 2.0 * relax,
            burn_in: relax,
            sample_interval: default_sample_interval(params),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.burn_in >= 0.0 && self.burn_in < self.t_max && self.t_max.is_finite()) {
            return Err(SimError::Settings(format!(
                "need 0 <= burn_in < t_max, got burn_in = {}, t_max = {}",
                self.burn_in, self.t_max
            )));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(SimError::Settings(format!(
                "sample interval must be positive, got {}",
                self.sample_interval
            )));
        }
        Ok(())
    }
}

pub fn default_sample_interval(params: &Params) -> f64 {
    if params.nu > 0.0 {
        1.0 / params.nu
    } else {
        1.0
    }
}

/// Connectivity statistics over the measurement window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub rho_mean: f64,
    /// Sample standard deviation of the sampled `rho(t)`.
    pub rho_std: f64,
    /// Defaults per agent per unit time after burn-in.
    pub default_rate: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    /// Network at `t_max`, for carrying into the next sweep point.
    pub network: CreditNetwork,
    pub counters: EventCounters,
}

/// Starting network of a run.
#[derive(Debug, Clone, Default)]
pub enum InitialCondition {
    #[default]
    Empty,
    /// Every agent starts with a Poisson(`gamma/lambda`) number of loans from
    /// uniformly chosen lenders.
    Dense,
    Given(CreditNetwork),
}

fn dense_network(params: &Params, rng: &mut ChaCha8Rng) -> Result<CreditNetwork, SimError> {
    let n = params.n_agents;
    let mut net = CreditNetwork::new(n)?;
    let mean = params.gamma / params.lambda;
    if mean > 0.0 && mean.is_finite() {
        let poisson = Poisson::new(mean).expect("positive finite mean");
        for borrower in 0..n {
            let k = poisson.sample(rng) as usize;
            for _ in 0..k {
                let mut lender = rng.random_range(0..n - 1);
                if lender >= borrower {
                    lender += 1;
                }
                net.add_loan(lender, borrower)?;
            }
        }
    }
    Ok(net)
}

/// Runs the dynamics to `t_max` and summarises `rho` sampled every
/// `sample_interval` from `burn_in` on.
pub fn run(
    params: &Params,
    settings: &RunSettings,
    seed: u64,
    initial: InitialCondition,
) -> Result<RunOutcome, SimError> {
    params.validate()?;
    settings.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1B5_4A32_D192_ED03);
    let net = match initial {
        InitialCondition::Empty => CreditNetwork::new(params.n_agents)?,
        InitialCondition::Dense => dense_network(params, &mut init_rng)?,
        InitialCondition::Given(net) => {
            if net.n_agents() != params.n_agents {
                return Err(SimError::AgentMismatch {
                    network: net.n_agents(),
                    params: params.n_agents,
                });
            }
            net
        }
    };
    let mut state = SimState::new(net, seed);

    let mut samples = Vec::new();
    let mut next_index = 0u64;
    let sample_time = |k: u64| settings.burn_in + k as f64 * settings.sample_interval;
    let mut defaults_before_burn_in = None;

    loop {
        let elapsed = match state.waiting_time(params) {
            Ok(dt) => dt,
            // Nothing can ever happen again: the state is absorbing.
            Err(SimError::Terminal) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let t_next = state.time + elapsed;
        let rho = state.net.connectivity();
        while sample_time(next_index) <= settings.t_max && sample_time(next_index) < t_next {
            samples.push(rho);
            next_index += 1;
        }
        if defaults_before_burn_in.is_none() && t_next > settings.burn_in {
            defaults_before_burn_in = Some(state.counters.defaults);
        }
        if t_next > settings.t_max {
            state.time = settings.t_max;
            break;
        }
        state.time = t_next;
        state.fire(params);
    }

    let window = settings.t_max - settings.burn_in;
    let defaults = state.counters.defaults - defaults_before_burn_in.unwrap_or(state.counters.defaults);
    let summary = summarize(&samples, defaults as f64 / (params.n_agents as f64 * window));
    Ok(RunOutcome {
        summary,
        network: state.net,
        counters: state.counters,
    })
}

fn summarize(samples: &[f64], default_rate: f64) -> RunSummary {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    RunSummary {
        rho_mean: mean,
        rho_std: var.sqrt(),
        default_rate,
        samples: n,
    }
}

/// Seed for point `index` of a sweep: `base XOR splitmix64(index)`.
///
/// Independent of evaluation order, so sweep points can be dispatched in any
/// order and still reproduce.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = index.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    base ^ (z ^ (z >> 31))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

/// Which parameter a sweep moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepAxis {
    /// Cost of miscoordination `c`.
    #[default]
    Cost,
    /// Liquid assets `b0`.
    LiquidAssets,
}

impl SweepAxis {
    pub fn apply(self, params: &Params, value: f64) -> Params {
        match self {
            SweepAxis::Cost => params.with_c(value),
            SweepAxis::LiquidAssets => params.with_b0(value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub c: f64,
    pub lambda: f64,
    pub nu: f64,
    pub b0: f64,
    pub direction: Direction,
    pub rho_mean: f64,
    pub rho_std: f64,
    pub default_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Checks that `values` move strictly in `direction`.
pub fn check_monotone(values: &[f64], direction: Direction) -> Result<(), SimError> {
    let ok = values.windows(2).all(|w| match direction {
        Direction::Up => w[1] > w[0],
        Direction::Down => w[1] < w[0],
    });
    if ok {
        Ok(())
    } else {
        Err(SimError::NotMonotone(direction))
    }
}

/// Quasi-static sweep: each point starts from the final network of the
/// previous one, which is what exposes hysteresis.
///
/// Point `k` runs with seed `derive_seed(seed, first_index + k)`. Returns the
/// rows and the network after the last point.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    params: &Params,
    axis: SweepAxis,
    values: &[f64],
    direction: Direction,
    settings: &RunSettings,
    seed: u64,
    first_index: u64,
    initial: InitialCondition,
) -> Result<(SweepResult, Option<CreditNetwork>), SimError> {
    check_monotone(values, direction)?;
    let mut carry = initial;
    let mut rows = Vec::with_capacity(values.len());
    let mut last = None;
    for (k, &value) in values.iter().enumerate() {
        let point = axis.apply(params, value);
        let outcome = run(&point, settings, derive_seed(seed, first_index + k as u64), carry)?;
        rows.push(SweepRow {
            c: point.c,
            lambda: point.lambda,
            nu: point.nu,
            b0: point.b0,
            direction,
            rho_mean: outcome.summary.rho_mean,
            rho_std: outcome.summary.rho_std,
            default_rate: outcome.summary.default_rate,
        });
        carry = InitialCondition::Given(outcome.network.clone());
        last = Some(outcome.network);
    }
    Ok((SweepResult { rows }, last))
}

/// Sweep in `c` from an empty network.
pub fn hysteresis_sweep(
    params: &Params,
    c_values: &[f64],
    direction: Direction,
    settings: &RunSettings,
    seed: u64,
) -> Result<SweepResult, SimError> {
    sweep(params, SweepAxis::Cost, c_values, direction, settings, seed, 0, InitialCondition::Empty)
        .map(|(result, _)| result)
}

/// Up sweep over the ascending grid `values`, then down sweep over the same
/// grid reversed, continuing from the network reached at the top.
pub fn hysteresis_loop(
    params: &Params,
    axis: SweepAxis,
    values: &[f64],
    settings: &RunSettings,
    seed: u64,
) -> Result<SweepResult, SimError> {
    let (up, top) = sweep(params, axis, values, Direction::Up, settings, seed, 0, InitialCondition::Empty)?;
    let down_values: Vec<f64> = values.iter().rev().copied().collect();
    let carry = top.map(InitialCondition::Given).unwrap_or_default();
    let (down, _) = sweep(
        params,
        axis,
        &down_values,
        Direction::Down,
        settings,
        seed,
        values.len() as u64,
        carry,
    )?;
    let mut rows = up.rows;
    rows.extend(down.rows);
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::BalanceSheet;

    fn params(lambda: f64, nu: f64, c: f64, n: usize) -> Params {
        Params {
            gamma: 1.0,
            lambda,
            nu,
            b0: 2.0,
            c,
            n_agents: n,
        }
    }

    #[test]
    fn zero_rate_is_terminal() {
        let p = Params {
            gamma: 0.0,
            nu: 0.0,
            ..params(0.1, 0.0, 0.5, 4)
        };
        let mut state = SimState::empty(4, 0).unwrap();
        assert_eq!(step(&mut state, &p), Err(SimError::Terminal));
    }

    #[test]
    fn single_link_decays_at_rate_lambda() {
        let lambda = 0.5;
        let p = Params {
            gamma: 0.0,
            nu: 0.0,
            ..params(lambda, 0.0, 0.5, 2)
        };
        let trials = 40_000;
        let mut total = 0.0;
        for seed in 0..trials {
            let mut net = CreditNetwork::new(2).unwrap();
            net.add_loan(0, 1).unwrap();
            let mut state = SimState::new(net, seed);
            let s = step(&mut state, &p).unwrap();
            assert!(matches!(s.event, Event::Mature(_)));
            assert_eq!(state.net.link_count(), 0);
            total += s.elapsed;
        }
        let mean = total / trials as f64;
        // exponential: standard error of the mean is (1/lambda)/sqrt(trials)
        let se = 1.0 / lambda / (trials as f64).sqrt();
        assert!((mean - 1.0 / lambda).abs() < 4.0 * se, "mean = {mean}");
    }

    #[test]
    fn time_and_counters_track_events() {
        let p = params(0.1, 1.0, 0.9, 50);
        let mut state = SimState::empty(50, 7).unwrap();
        let mut last = 0.0;
        let mut defaults = 0;
        for _ in 0..20_000 {
            let s = step(&mut state, &p).unwrap();
            assert!(state.time >= last);
            last = state.time;
            if let Some(report) = s.default {
                assert!(matches!(s.event, Event::Disclose(_)));
                let _ = report;
                defaults += 1;
            }
        }
        assert_eq!(state.counters.events(), 20_000);
        assert_eq!(state.counters.defaults, defaults);
        state.net.check_invariants().unwrap();
    }

    #[test]
    fn defaults_only_when_rule_holds() {
        let p = params(0.05, 2.0, 0.7, 100);
        let mut state = SimState::empty(100, 3).unwrap();
        for _ in 0..50_000 {
            let before: Vec<BalanceSheet> = state.net.sheets().collect();
            let s = step(&mut state, &p).unwrap();
            if let Event::Disclose(i) = s.event {
                let sh = before[i];
                let rule = sh.ell > 0 && default_on_disclosure(p.c, sh.ell, sh.b, p.b0);
                assert_eq!(s.default.is_some(), rule);
                if rule {
                    assert_eq!(state.net.sheet(i), BalanceSheet::default());
                } else {
                    assert_eq!(state.net.sheet(i), sh);
                }
            }
        }
    }

    #[test]
    fn zero_cost_never_defaults_and_matches_no_disclosure_law() {
        let settings = RunSettings {
            t_max: 300.0,
            burn_in: 100.0,
            sample_interval: 0.5,
        };
        let with = run(&params(0.1, 2.0, 0.0, 300), &settings, 5, InitialCondition::Empty).unwrap();
        assert_eq!(with.counters.defaults, 0);
        assert_eq!(with.summary.default_rate, 0.0);
        let without = run(&params(0.1, 0.0, 0.0, 300), &settings, 5, InitialCondition::Empty).unwrap();
        assert!((with.summary.rho_mean - without.summary.rho_mean).abs() < 0.5);
        assert!((with.summary.rho_mean - 10.0).abs() < 0.5);
    }

    #[test]
    fn run_is_reproducible() {
        let p = params(0.1, 2.0, 0.8, 200);
        let settings = RunSettings {
            t_max: 150.0,
            burn_in: 50.0,
            sample_interval: 0.5,
        };
        let a = run(&p, &settings, 42, InitialCondition::Empty).unwrap();
        let b = run(&p, &settings, 42, InitialCondition::Empty).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.counters, b.counters);
        assert_eq!(
            a.network.sheets().collect::<Vec<_>>(),
            b.network.sheets().collect::<Vec<_>>()
        );
        let c = run(&p, &settings, 43, InitialCondition::Empty).unwrap();
        assert_ne!(a.counters, c.counters);
    }

    #[test]
    fn sampling_count_and_settings_validation() {
        let p = params(0.5, 1.0, 0.5, 10);
        let settings = RunSettings {
            t_max: 10.0,
            burn_in: 2.0,
            sample_interval: 0.5,
        };
        let out = run(&p, &settings, 1, InitialCondition::Empty).unwrap();
        // samples at 2.0, 2.5, ..., 10.0
        assert_eq!(out.summary.samples, 17);
        let bad = RunSettings { burn_in: 10.0, ..settings };
        assert!(matches!(run(&p, &bad, 1, InitialCondition::Empty), Err(SimError::Settings(_))));
        let wrong = InitialCondition::Given(CreditNetwork::new(3).unwrap());
        assert!(matches!(run(&p, &settings, 1, wrong), Err(SimError::AgentMismatch { .. })));
    }

    #[test]
    fn frozen_network_keeps_sampling() {
        let p = Params {
            gamma: 0.0,
            nu: 0.0,
            ..params(0.5, 0.0, 0.5, 5)
        };
        let settings = RunSettings {
            t_max: 50.0,
            burn_in: 10.0,
            sample_interval: 1.0,
        };
        let out = run(&p, &settings, 0, InitialCondition::Empty).unwrap();
        assert_eq!(out.summary.samples, 41);
        assert_eq!(out.summary.rho_mean, 0.0);
    }

    #[test]
    fn dense_start_seeds_erdos_renyi_connectivity() {
        let p = params(0.1, 0.0, 0.0, 2000);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = dense_network(&p, &mut rng).unwrap();
        assert!((net.connectivity() - 10.0).abs() < 0.3);
        net.check_invariants().unwrap();
    }

    #[test]
    fn measure_connectivity_examples() {
        let mut net = CreditNetwork::new(3).unwrap();
        assert_eq!(measure_connectivity(&net), 0.0);
        for (a, b) in [(0, 1), (1, 2), (2, 0), (0, 2), (1, 0), (2, 1)] {
            net.add_loan(a, b).unwrap();
        }
        assert_eq!(measure_connectivity(&net), 2.0);

        let mut star = CreditNetwork::new(4).unwrap();
        star.add_loan(0, 1).unwrap();
        star.add_loan(2, 0).unwrap();
        star.default_agent(0).unwrap();
        assert_eq!(measure_connectivity(&star), 0.0);
    }

    #[test]
    fn seeds_differ_per_point() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|k| derive_seed(7, k)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn sweep_rejects_non_monotone_grid() {
        let p = params(0.2, 2.0, 0.5, 10);
        let settings = RunSettings {
            t_max: 2.0,
            burn_in: 1.0,
            sample_interval: 0.5,
        };
        assert_eq!(
            hysteresis_sweep(&p, &[0.5, 0.5], Direction::Up, &settings, 0),
            Err(SimError::NotMonotone(Direction::Up))
        );
        assert_eq!(
            hysteresis_sweep(&p, &[0.5, 0.6], Direction::Down, &settings, 0),
            Err(SimError::NotMonotone(Direction::Down))
        );
    }

    #[test]
    fn single_point_sweep_equals_run() {
        let p = params(0.2, 2.0, 0.7, 100);
        let settings = RunSettings {
            t_max: 60.0,
            burn_in: 20.0,
            sample_interval: 0.5,
        };
        let mut start = CreditNetwork::new(100).unwrap();
        for i in 0..99 {
            start.add_loan(i, i + 1).unwrap();
        }
        let (swept, _) = sweep(
            &p,
            SweepAxis::Cost,
            &[0.7],
            Direction::Up,
            &settings,
            9,
            0,
            InitialCondition::Given(start.clone()),
        )
        .unwrap();
        let single = run(&p, &settings, derive_seed(9, 0), InitialCondition::Given(start)).unwrap();
        assert_eq!(swept.rows.len(), 1);
        assert_eq!(swept.rows[0].rho_mean, single.summary.rho_mean);
        assert_eq!(swept.rows[0].default_rate, single.summary.default_rate);
    }

    #[test]
    fn loop_emits_both_branches() {
        let p = params(0.2, 2.0, 0.5, 50);
        let settings = RunSettings {
            t_max: 20.0,
            burn_in: 10.0,
            sample_interval: 1.0,
        };
        let grid = [0.5, 0.7, 0.9];
        let result = hysteresis_loop(&p, SweepAxis::Cost, &grid, &settings, 1).unwrap();
        let dirs: Vec<_> = result.rows.iter().map(|r| (r.direction, r.c)).collect();
        assert_eq!(
            dirs,
            vec![
                (Direction::Up, 0.5),
                (Direction::Up, 0.7),
                (Direction::Up, 0.9),
                (Direction::Down, 0.9),
                (Direction::Down, 0.7),
                (Direction::Down, 0.5)
            ]
        );
        let b0_loop = hysteresis_loop(&p, SweepAxis::LiquidAssets, &[0.0, 1.0], &settings, 1).unwrap();
        assert_eq!(b0_loop.rows[1].b0, 1.0);
        assert_eq!(b0_loop.rows[1].c, 0.5);
    }
}
