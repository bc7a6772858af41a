//! Random instance generators and brute-force oracles shared by the
//! integration and acceptance tests. The oracles only read curve data
//! (stairs, demand pieces) and never call the crate's clearing code.
#![allow(dead_code)]

use elcarb_core::rational::{int, midpoint, ratio};
use elcarb_core::{AskCurve, BidCurve, DemandCurve, Producer, Rational, Scenario};
use elcarb_core::curves::Stair;
use num_traits::{Signed, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const P_LOLC: i64 = 100;

pub fn q(x: &Rational) -> String {
    elcarb_core::rational::decimal_string(x)
}

/// Staircase with up to `max_stairs` stairs, levels in `[0, 90]` (not necessarily monotone).
pub fn random_ask(rng: &mut ChaCha8Rng, max_stairs: usize) -> AskCurve {
    let n = rng.gen_range(1..=max_stairs);
    let mut upto = Rational::zero();
    let stairs = (0..n)
        .map(|_| {
            upto += ratio(rng.gen_range(1..=20), rng.gen_range(1..=2));
            let price = if rng.gen_bool(0.7) {
                int(rng.gen_range(0..=90))
            } else {
                ratio(rng.gen_range(0..=180), 2)
            };
            Stair::new(upto.clone(), price)
        })
        .collect();
    AskCurve::new(stairs, int(P_LOLC)).expect("valid ask")
}

/// Step or piecewise-linear demand with integer-ish breakpoints below `P_LOLC`.
pub fn random_demand(rng: &mut ChaCha8Rng) -> DemandCurve {
    let n = rng.gen_range(1..=4);
    let mut xs: Vec<i64> = (0..n).map(|_| rng.gen_range(1..P_LOLC)).collect();
    xs.push(0);
    xs.sort();
    xs.dedup();
    let mut level = rng.gen_range(5..=80);
    let mut points = Vec::new();
    for x in xs {
        points.push((int(x), int(level)));
        level = rng.gen_range(0..=level);
    }
    if rng.gen_bool(0.5) {
        DemandCurve::step(points).expect("valid step demand")
    } else {
        let last = points.last().expect("non-empty").0.clone();
        points.push((last + int(rng.gen_range(1..=10)), int(level)));
        DemandCurve::linear(points).expect("valid linear demand")
    }
}

/// Decreasing bid staircase with levels in `[0, 30]`.
pub fn random_bid(rng: &mut ChaCha8Rng, max_stairs: usize) -> BidCurve {
    let n = rng.gen_range(1..=max_stairs);
    let mut levels: Vec<Rational> = (0..n).map(|_| ratio(rng.gen_range(0..=60), 2)).collect();
    levels.sort();
    levels.reverse();
    let mut upto = Rational::zero();
    let stairs = levels
        .into_iter()
        .map(|price| {
            upto += int(rng.gen_range(1..=15));
            Stair::new(upto.clone(), price)
        })
        .collect();
    BidCurve::new(stairs).expect("valid bid")
}

/// Scenario with `2..=max_producers` producers, distinct `(c, e)` pairs.
pub fn random_scenario(rng: &mut ChaCha8Rng, max_producers: usize) -> Scenario {
    loop {
        let n = rng.gen_range(2..=max_producers);
        let producers: Vec<Producer> = (0..n)
            .map(|i| {
                Producer::new(
                    format!("P{}", i + 1),
                    int(rng.gen_range(0..=20)),
                    int(rng.gen_range(1..=3)),
                    int(rng.gen_range(1..=4) * 5),
                )
                .expect("valid producer")
            })
            .collect();
        let demand = random_demand(rng);
        if let Ok(s) = Scenario::new(producers, demand, int(10), int(30), int(200)) {
            return s;
        }
    }
}

// ---- oracles ----

/// `sup{ q : ask(q) < p }`.
pub fn offer(ask: &AskCurve, p: &Rational) -> Rational {
    ask.stairs()
        .iter()
        .filter(|s| &s.price < p)
        .map(|s| s.upto.clone())
        .max()
        .unwrap_or_else(Rational::zero)
}

pub fn total_offer(asks: &[AskCurve], p: &Rational) -> Rational {
    asks.iter().map(|a| offer(a, p)).sum()
}

/// Left-continuous evaluation straight from the pieces.
pub fn demand(d: &DemandCurve, p: &Rational) -> Rational {
    let pieces = d.pieces();
    let mut idx = 0;
    for (i, piece) in pieces.iter().enumerate() {
        if &piece.start < p {
            idx = i;
        }
    }
    let piece = &pieces[idx];
    &piece.value + &piece.slope * (p - &piece.start)
}

/// `sup{ w : bid(w) >= p }`.
pub fn theta(bid: &BidCurve, p: &Rational) -> Rational {
    bid.stairs()
        .iter()
        .filter(|s| &s.price >= p)
        .map(|s| s.upto.clone())
        .max()
        .unwrap_or_else(Rational::zero)
}

pub fn total_theta(bids: &[BidCurve], p: &Rational) -> Rational {
    bids.iter().map(|b| theta(b, p)).sum()
}

fn sorted(mut v: Vec<Rational>) -> Vec<Rational> {
    v.sort();
    v.dedup();
    v
}

/// Uniform grid over `[0, top]` with `n` cells.
fn uniform(top: &Rational, n: i64) -> Vec<Rational> {
    (0..=n).map(|i| top * ratio(i, n)).collect()
}

/// `inf{ p > 0 : offer(p) > demand(p) }` by scanning a dense grid refined with
/// every ask level, demand breakpoint and offer/demand crossing. Between two
/// consecutive grid points the offer is constant and demand monotone, so
/// testing each point and each midpoint is exhaustive.
pub fn grid_p_under(asks: &[AskCurve], d: &DemandCurve, p_lolc: &Rational) -> Rational {
    let mut pts = uniform(p_lolc, 400);
    for a in asks {
        pts.extend(a.stairs().iter().map(|s| s.price.clone()));
    }
    pts.extend(d.pieces().iter().map(|p| p.start.clone()));
    let probe = sorted(pts.clone());
    let levels: Vec<Rational> = probe
        .windows(2)
        .map(|w| total_offer(asks, &midpoint(&w[0], &w[1])))
        .collect();
    for piece in d.pieces() {
        if piece.slope.is_negative() {
            for l in &levels {
                pts.push(&piece.start + (l - &piece.value) / &piece.slope);
            }
        }
    }
    let pts: Vec<Rational> = sorted(pts)
        .into_iter()
        .filter(|p| !p.is_negative() && p <= p_lolc)
        .collect();
    let holds = |p: &Rational| total_offer(asks, p) > demand(d, p);
    for w in pts.windows(2) {
        if (w[0].is_positive() && holds(&w[0])) || holds(&midpoint(&w[0], &w[1])) {
            return w[0].clone();
        }
    }
    p_lolc.clone()
}

/// `inf{ p >= 0 : theta(p) < cap }` on a grid refined with every bid level.
pub fn grid_p_co2(bids: &[BidCurve], cap: &Rational, top: &Rational) -> Rational {
    let mut pts = uniform(top, 400);
    for b in bids {
        pts.extend(b.stairs().iter().map(|s| s.price.clone()));
    }
    let pts = sorted(pts);
    let holds = |p: &Rational| &total_theta(bids, p) < cap;
    if holds(&Rational::zero()) {
        return Rational::zero();
    }
    for w in pts.windows(2) {
        if holds(&w[0]) || holds(&midpoint(&w[0], &w[1])) {
            return w[0].clone();
        }
    }
    top.clone()
}

/// Every subset sum of `values`.
pub fn subset_sums(values: &[Rational]) -> Vec<Rational> {
    let mut sums = vec![Rational::zero()];
    for v in values {
        let more: Vec<Rational> = sums.iter().map(|s| s + v).collect();
        sums.extend(more);
    }
    sorted(sums)
}

/// A point strictly between `p` and the next bid level above it.
pub fn just_above_bids(bids: &[BidCurve], p: &Rational) -> Rational {
    let next = bids
        .iter()
        .flat_map(|b| b.stairs().iter().map(|s| s.price.clone()))
        .filter(|l| l > p)
        .min()
        .unwrap_or_else(|| p + int(2));
    midpoint(p, &next)
}
