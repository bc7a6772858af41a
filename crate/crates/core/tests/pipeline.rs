mod support;

use elcarb_core::equilibrium::{
    candidate, find_eps_delta, tau_clearing, tau_profile, willing_to_buy, CaseTag, Construction,
};
use elcarb_core::rational::{int, ratio};
use elcarb_core::scenario_io::{parse_scenario_str, serialize_scenario, ScenarioFile, VerifySettings};
use elcarb_core::verifier::{check_coupled_nash, check_monotonicity, monotonicity_samples, DeviationFamily};
use elcarb_core::{
    solve, DemandCurve, EquilibriumError, Producer, Rational, Scenario, SolveOptions,
};
use num_traits::Zero;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::*;

fn s0(cap: i64) -> Scenario {
    Scenario::new(
        vec![
            Producer::new("P1", int(10), int(1), int(10)).unwrap(),
            Producer::new("P2", int(12), int(2), int(10)).unwrap(),
        ],
        DemandCurve::linear(vec![(int(0), int(60)), (int(60), int(0))]).unwrap(),
        int(cap),
        int(30),
        int(100),
    )
    .unwrap()
}

fn small() -> SolveOptions {
    SolveOptions {
        refinements: 2,
        max_steps: 1,
        grid: 2,
    }
}

#[test]
fn s0_report() {
    let s = s0(12);
    let r = solve(&s, &SolveOptions::default()).unwrap();
    assert_eq!(r.tau_guess, int(14));
    assert_eq!(r.tau_bar_guess, int(14));
    assert_eq!(r.case, CaseTag::CaseA { i_bar: 1 });
    assert!(r.verified());
    assert!(r.admissible);
    // the cap is covered and P2 holds allowances for what it sells
    assert_eq!(r.delta.iter().sum::<Rational>(), int(12));
    assert!(!r.cap_check.holds);
    assert_eq!(r.cap_check.w_at, int(10));
    assert_eq!(r.eps, int(2));
    assert_eq!(r.delta_param, ratio(5, 2));
}

#[test]
fn loose_eps_admits_a_deviation() {
    // P1 cheap and dirty, P2 expensive and clean; the cap is tiny
    let s = Scenario::new(
        vec![
            Producer::new("P1", int(2), int(3), int(10)).unwrap(),
            Producer::new("P2", int(19), int(1), int(10)).unwrap(),
        ],
        DemandCurve::linear(vec![(int(0), int(23)), (int(23), int(0))]).unwrap(),
        ratio(1, 2),
        int(30),
        int(200),
    )
    .unwrap();
    let profile = tau_profile(&s).unwrap();
    let c = Construction::new(&s, &profile).unwrap();
    let accepted = find_eps_delta(&s, &c, &small()).unwrap();
    assert!(accepted.falsifier.witness.is_none());

    let loose = c.inputs.stair_end(&s, c.case) - ratio(1, 100);
    let cand = candidate(&s, &c, &loose, &accepted.candidate.delta).unwrap();
    let family = DeviationFamily::structural(&s, &c, &cand, &small());
    let report = check_coupled_nash(&s, &cand, &family);
    let w = report.witness.expect("a large eps leaves room to deviate");
    assert!(w.replay_confirms);
    assert!(w.deviated_phi > w.baseline_phi);
}

#[test]
fn cap_inside_a_willingness_jump_exhausts_the_grid() {
    let s = Scenario::new(
        vec![
            Producer::new("P1", int(18), int(3), int(15)).unwrap(),
            Producer::new("P2", int(10), int(2), int(10)).unwrap(),
            Producer::new("P3", int(12), int(1), int(5)).unwrap(),
        ],
        DemandCurve::linear(vec![(int(0), int(34)), (int(34), int(0))]).unwrap(),
        ratio(11, 2),
        int(30),
        int(200),
    )
    .unwrap();
    match solve(&s, &small()) {
        Err(EquilibriumError::NoValidatedParameters { tried, last, .. }) => {
            assert!(tried > 0);
            let w = last.unwrap().witness.unwrap();
            assert!(w.replay_confirms);
            // P2 outbids P3 for the whole cap
            assert_eq!(w.producer, 1);
            assert_eq!(w.replay.delta[1], ratio(11, 2));
        }
        other => panic!("expected exhaustion, got {other:?}"),
    }
}

/// Price never falls as tau rises. Sold quantity can rise again, but only
/// after a point where the price setter sells nothing: its stair is not
/// offered at its own ask level.
#[test]
fn random_scenarios_are_monotone_in_tau() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let s = random_scenario(&mut rng, 4);
        let taus = monotonicity_samples(&s).unwrap();
        let r = check_monotonicity(&s, &taus).unwrap();
        for v in &r.violations {
            assert_eq!(v.quantity, "total_sold", "{v:?}");
            let at = tau_clearing(&s, &v.tau_before).unwrap();
            let idle_setter = s
                .producers
                .iter()
                .zip(&at.phi)
                .any(|(p, phi)| p.cost_at(&v.tau_before) == at.p_elec && phi.is_zero());
            assert!(idle_setter, "{v:?}");
        }
    }
}

#[test]
fn willingness_takes_subset_sum_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let s = random_scenario(&mut rng, 4);
        let sums = subset_sums(&s.producers.iter().map(|p| p.full_coverage()).collect::<Vec<_>>());
        for sample in tau_profile(&s).unwrap() {
            let w = &sample.willing;
            assert!(sums.binary_search(&w.w_bar).is_ok(), "W_bar {} at {}", q(&w.w_bar), q(&w.tau));
            assert!(w.w <= w.w_bar);
        }
    }
}

#[test]
fn tau_clearing_is_cost_shifted_market() {
    let s = s0(12);
    let out = tau_clearing(&s, &int(0)).unwrap();
    assert_eq!(out.p_elec, int(40));
    let w = willing_to_buy(&s, &int(20)).unwrap();
    assert_eq!(w.w_bar, int(10));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenario_text_round_trips(seed in any::<u64>(), with_verify in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = random_scenario(&mut rng, 5);
        let verify = if with_verify {
            VerifySettings { seed, samples: 10, max_steps: 1, grid: 3, refinements: 1 }
        } else {
            VerifySettings::default()
        };
        let file = ScenarioFile { scenario, verify, bids: None };
        let text = serialize_scenario(&file);
        let parsed = parse_scenario_str(&text).unwrap();
        prop_assert_eq!(&parsed, &file);
        prop_assert_eq!(serialize_scenario(&parsed), text);
    }
}
