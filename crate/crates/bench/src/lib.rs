//! Instance builders for the clearing benchmarks.

use elcarb_core::curves::Stair;
use elcarb_core::rational::{int, ratio};
use elcarb_core::{AskCurve, BidCurve, DemandCurve, Producer, Rational, Scenario};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const P_LOLC: i64 = 200;

/// `n` ask staircases with `stairs` stairs each.
pub fn asks(rng: &mut ChaCha8Rng, n: usize, stairs: usize) -> Vec<AskCurve> {
    (0..n)
        .map(|_| {
            let mut upto = Rational::from_integer(0.into());
            let s = (0..stairs)
                .map(|_| {
                    upto += int(rng.gen_range(1..=20));
                    Stair::new(upto.clone(), ratio(rng.gen_range(0..=360), 2))
                })
                .collect();
            AskCurve::new(s, int(P_LOLC)).expect("valid ask")
        })
        .collect()
}

/// Decreasing bid staircases.
pub fn bids(rng: &mut ChaCha8Rng, n: usize, stairs: usize) -> Vec<BidCurve> {
    (0..n)
        .map(|_| {
            let mut levels: Vec<i64> = (0..stairs).map(|_| rng.gen_range(0..=60)).collect();
            levels.sort_unstable_by(|a, b| b.cmp(a));
            let mut upto = Rational::from_integer(0.into());
            let s = levels
                .into_iter()
                .map(|l| {
                    upto += int(rng.gen_range(1..=15));
                    Stair::new(upto.clone(), ratio(l, 2))
                })
                .collect();
            BidCurve::new(s).expect("valid bid")
        })
        .collect()
}

pub fn linear_demand(top: i64) -> DemandCurve {
    DemandCurve::linear(vec![(int(0), int(top)), (int(top), int(0))]).expect("valid demand")
}

/// Two producers, linear demand `60 - p`, cap 12.
pub fn s0() -> Scenario {
    Scenario::new(
        vec![
            Producer::new("P1", int(10), int(1), int(10)).expect("valid producer"),
            Producer::new("P2", int(12), int(2), int(10)).expect("valid producer"),
        ],
        linear_demand(60),
        int(12),
        int(30),
        int(100),
    )
    .expect("valid scenario")
}
