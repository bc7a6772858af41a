mod support;

use elcarb_core::curves::Stair;
use elcarb_core::rational::{int, midpoint, ratio};
use elcarb_core::{clear_auction, clear_market, AskCurve, BidCurve, DemandCurve, Rational};
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use support::*;

fn ask_strategy() -> impl Strategy<Value = AskCurve> {
    prop::collection::vec((1i64..=20, 0i64..=180), 1..=6).prop_map(|raw| {
        let mut upto = Rational::zero();
        let stairs = raw
            .into_iter()
            .map(|(w, p)| {
                upto += int(w);
                Stair::new(upto.clone(), ratio(p, 2))
            })
            .collect();
        AskCurve::new(stairs, int(P_LOLC)).unwrap()
    })
}

fn demand_strategy() -> impl Strategy<Value = DemandCurve> {
    (
        prop::collection::vec((1i64..=30, 0i64..=20), 0..=4),
        5i64..=80,
        any::<bool>(),
    )
        .prop_map(|(steps, start, linear)| {
            let mut x = 0;
            let mut level = start;
            let mut points = vec![(int(0), int(start))];
            for (dx, drop) in steps {
                x += dx;
                level = (level - drop).max(0);
                points.push((int(x), int(level)));
            }
            if linear {
                DemandCurve::linear(points).unwrap()
            } else {
                DemandCurve::step(points).unwrap()
            }
        })
}

fn bid_strategy() -> impl Strategy<Value = BidCurve> {
    prop::collection::vec((1i64..=15, 0i64..=60), 1..=4).prop_map(|mut raw| {
        raw.sort_by(|a, b| b.1.cmp(&a.1));
        let mut upto = Rational::zero();
        let stairs = raw
            .into_iter()
            .map(|(w, p)| {
                upto += int(w);
                Stair::new(upto.clone(), ratio(p, 2))
            })
            .collect();
        BidCurve::new(stairs).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sold_quantity_is_min_of_demand_and_offer(
        asks in prop::collection::vec(ask_strategy(), 1..=5),
        d in demand_strategy(),
    ) {
        let out = clear_market(&asks, &d, &int(P_LOLC)).unwrap();
        let sold: Rational = out.phi.iter().sum();
        let expected = demand(&d, &out.p_elec).min(total_offer(&asks, &out.p_elec));
        prop_assert_eq!(&sold, &expected);
        prop_assert_eq!(&sold, &out.total_sold);
    }

    #[test]
    fn p_under_matches_grid_scan(
        asks in prop::collection::vec(ask_strategy(), 1..=5),
        d in demand_strategy(),
    ) {
        let out = clear_market(&asks, &d, &int(P_LOLC)).unwrap();
        prop_assert_eq!(out.p_under.clone(), grid_p_under(&asks, &d, &int(P_LOLC)));
        prop_assert!(out.p_under <= out.p_elec);
        // the price sits on the demand plateau starting at p_under
        prop_assert_eq!(demand(&d, &out.p_elec), demand(&d, &out.p_under));
    }

    #[test]
    fn each_producer_sells_within_its_offer(
        asks in prop::collection::vec(ask_strategy(), 1..=5),
        d in demand_strategy(),
    ) {
        let out = clear_market(&asks, &d, &int(P_LOLC)).unwrap();
        for (a, phi) in asks.iter().zip(&out.phi) {
            prop_assert!(!phi.is_negative());
            prop_assert!(phi <= &offer(a, &out.p_elec));
        }
    }

    #[test]
    fn carbon_price_matches_grid_scan(
        bids in prop::collection::vec(bid_strategy(), 1..=5),
        cap in 1i64..=40,
    ) {
        let cap = int(cap);
        match clear_auction(&bids, &cap) {
            Ok(out) => {
                prop_assert_eq!(out.p_co2.clone(), grid_p_co2(&bids, &cap, &int(31)));
                let above = just_above_bids(&bids, &out.p_co2);
                for (b, d) in bids.iter().zip(&out.delta) {
                    prop_assert!(d <= &theta(b, &out.p_co2));
                    prop_assert!(d >= &theta(b, &above));
                }
                let total: Rational = out.delta.iter().sum();
                if total_theta(&bids, &Rational::zero()) >= cap {
                    prop_assert_eq!(total, cap);
                } else {
                    prop_assert!(total < cap);
                }
            }
            Err(e) => prop_assert!(false, "auction failed: {}", e),
        }
    }

    #[test]
    fn offer_curve_is_the_generalized_inverse(a in ask_strategy(), p in 0i64..=220) {
        let p = ratio(p, 2);
        prop_assert_eq!(a.generalized_inverse().eval(&p), offer(&a, &p));
    }

    #[test]
    fn allowance_demand_inverts_the_bid(b in bid_strategy(), p in 0i64..=70) {
        let p = ratio(p, 2);
        prop_assert_eq!(b.allowance_demand().eval(&p), theta(&b, &p));
    }
}

#[test]
fn equal_ask_levels_share_in_proportion_to_size() {
    let a = AskCurve::flat(int(20), int(30), int(P_LOLC)).unwrap();
    let b = AskCurve::flat(int(20), int(10), int(P_LOLC)).unwrap();
    let d = DemandCurve::step(vec![(int(0), int(20))]).unwrap();
    let out = clear_market(&[a, b], &d, &int(P_LOLC)).unwrap();
    assert_eq!(out.p_elec, int(P_LOLC));
    assert_eq!(out.phi, vec![int(15), int(5)]);
}

#[test]
fn price_at_top_of_demand_plateau() {
    let a = AskCurve::flat(int(10), int(30), int(P_LOLC)).unwrap();
    let d = DemandCurve::step(vec![(int(0), int(40)), (int(5), int(20)), (int(50), int(0))]).unwrap();
    let out = clear_market(&[a], &d, &int(P_LOLC)).unwrap();
    assert_eq!(out.p_under, int(10));
    assert_eq!(out.p_elec, int(50));
    assert_eq!(out.phi, vec![int(20)]);
    assert_eq!(demand(&d, &midpoint(&int(10), &int(50))), int(20));
}
