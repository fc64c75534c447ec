use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};
use trustnet_core::dynamics::{run, step, InitialCondition, RunSettings, SimState};
use trustnet_core::game::default_on_disclosure;
use trustnet_core::master_eq::{self_consistent_solve, RateClosure, SolveSettings, Truncation};
use trustnet_core::{Event, Params};

/// Pearson statistic against Poisson(`mean`) with bins merged until every
/// expected count reaches 5; the last bin holds the upper tail.
fn poisson_chi_square(hist: &[usize], mean: f64) -> (f64, usize) {
    let n: usize = hist.iter().sum();
    let law = Poisson::new(mean).unwrap();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut expected, mut observed, mut covered) = (0.0, 0.0, 0.0);
    let mut k = 0u64;
    loop {
        let p = law.pmf(k);
        expected += n as f64 * p;
        covered += p;
        observed += hist.get(k as usize).copied().unwrap_or(0) as f64;
        k += 1;
        let tail = n as f64 * (1.0 - covered);
        if expected >= 5.0 && tail >= 5.0 {
            bins.push((observed, expected));
            expected = 0.0;
            observed = 0.0;
        } else if tail < 5.0 {
            let rest: usize = hist.iter().skip(k as usize).sum();
            bins.push((observed + rest as f64, expected + tail));
            break;
        }
    }
    let stat = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    (stat, bins.len() - 1)
}

#[test]
fn without_disclosure_the_graph_is_erdos_renyi() {
    let p = Params { nu: 0.0, lambda: 0.1, ..Params::default() };
    let settings = RunSettings { t_max: 500.0, burn_in: 100.0, sample_interval: 1.0 };
    let outcome = run(&p, &settings, 2024, InitialCondition::Empty).unwrap();
    assert!((outcome.summary.rho_mean - 10.0).abs() < 0.5, "{:?}", outcome.summary);
    for hist in [outcome.network.in_degree_histogram(), outcome.network.out_degree_histogram()] {
        let (stat, dof) = poisson_chi_square(&hist, 10.0);
        let critical = ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.99);
        assert!(stat < critical, "chi2 = {stat} with {dof} dof (critical {critical})");
    }
}

#[test]
fn cheap_miscoordination_keeps_the_network_dense() {
    let p = Params { c: 0.1, ..Params::default() };
    let outcome = run(&p, &RunSettings::for_params(&p), 5, InitialCondition::Empty).unwrap();
    assert!((outcome.summary.rho_mean - 20.0).abs() < 1.0, "{:?}", outcome.summary);
}

#[test]
fn sparse_phase_agrees_with_master_equation() {
    let p = Params { c: 1.2, ..Params::default() };
    let sim = run(&p, &RunSettings::for_params(&p), 9, InitialCondition::Empty).unwrap();
    let me = self_consistent_solve(&p, Truncation::for_params(&p), RateClosure::default(), SolveSettings::default()).unwrap();
    let rel = (sim.summary.rho_mean - me.connectivity()).abs() / me.connectivity();
    assert!(rel < 0.1, "simulation {} vs master equation {}", sim.summary.rho_mean, me.connectivity());
    // the per-agent default rate is the same quantity as mu
    let rel_mu = (sim.summary.default_rate - me.rates.mu).abs() / me.rates.mu;
    assert!(rel_mu < 0.1, "default rate {} vs mu {}", sim.summary.default_rate, me.rates.mu);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_event_preserves_the_bookkeeping(
        n in 2usize..30,
        lambda in 0.05f64..2.0,
        nu in 0.0f64..3.0,
        c in 0.0f64..2.0,
        b0 in 0.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let p = Params { gamma: 1.0, lambda, nu, b0, c, n_agents: n };
        let mut state = SimState::empty(n, seed).unwrap();
        let mut last_time = 0.0;
        for _ in 0..400 {
            let before: Vec<_> = state.net.sheets().collect();
            let links_before = state.net.link_count();
            let out = step(&mut state, &p).unwrap();
            prop_assert!(state.time > last_time);
            last_time = state.time;
            state.net.check_invariants().map_err(TestCaseError::fail)?;
            let sum_ell: usize = state.net.sheets().map(|s| s.ell).sum();
            let sum_b: usize = state.net.sheets().map(|s| s.b).sum();
            prop_assert_eq!(sum_ell, state.net.link_count());
            prop_assert_eq!(sum_b, state.net.link_count());
            match out.event {
                Event::Borrow { borrower, lender } => {
                    prop_assert_ne!(borrower, lender);
                    prop_assert_eq!(state.net.link_count(), links_before + 1);
                }
                Event::Mature(_) => prop_assert_eq!(state.net.link_count() + 1, links_before),
                Event::Disclose(i) => {
                    let s = before[i];
                    let fires = s.ell > 0 && default_on_disclosure(c, s.ell, s.b, b0);
                    prop_assert_eq!(out.default.is_some(), fires);
                    if let Some(report) = out.default {
                        prop_assert_eq!(report.removed_liabilities, s.ell);
                        prop_assert_eq!(report.removed_assets, s.b);
                        prop_assert_eq!(state.net.sheet(i).ell, 0);
                        prop_assert_eq!(state.net.sheet(i).b, 0);
                        prop_assert_eq!(state.net.link_count() + s.ell + s.b, links_before);
                    } else {
                        prop_assert_eq!(state.net.link_count(), links_before);
                    }
                }
            }
        }
        let c_sum = state.counters;
        prop_assert_eq!(c_sum.events(), 400);
        prop_assert!(c_sum.defaults <= c_sum.disclosures);
    }
}
