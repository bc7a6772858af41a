//! CO2 allowance auction.
//!
//! Bids are turned into allowance demand curves `p -> sup{ w : bid(w) >= p }`,
//! aggregated, and cleared against the cap `W` at
//! `p_co2 = inf{ p : demand(p) < W }`. Every winner pays `p_co2`. When the cap
//! binds, bidders whose demand drops at `p_co2` share what is left of the cap in
//! proportion to their drop.

use num_traits::{Signed, Zero};

use crate::curves::{AllowanceDemand, BidCurve, Continuity, CurveError, Direction, StepCurve};
use crate::rational::{decimal_string, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuctionError {
    #[error("at least one bidder is required")]
    NoBidders,
    #[error("allowance cap must be positive, got {0}")]
    NonPositiveCap(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("allowance demand must be decreasing and left-continuous")]
    MalformedDemand,
    #[error("aggregate allowance demand never drops below the cap")]
    Unbounded,
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarbonOutcome {
    pub p_co2: Rational,
    /// Allowances awarded to each bidder.
    pub delta: Vec<Rational>,
}

pub fn allowance_demand(bid: &BidCurve) -> AllowanceDemand {
    bid.allowance_demand()
}

fn check_demand(theta: &AllowanceDemand) -> Result<(), AuctionError> {
    if theta.direction() != Direction::Decreasing
        || theta.continuity() != Continuity::LeftContinuous
    {
        return Err(AuctionError::MalformedDemand);
    }
    Ok(())
}

fn check_cap(cap: &Rational) -> Result<(), AuctionError> {
    if !cap.is_positive() {
        return Err(AuctionError::NonPositiveCap(decimal_string(cap)));
    }
    Ok(())
}

/// `inf{ p >= 0 : theta(p) < cap }`; zero when the cap is never reached.
pub fn carbon_price(theta: &AllowanceDemand, cap: &Rational) -> Result<Rational, AuctionError> {
    check_demand(theta)?;
    check_cap(cap)?;
    if theta.origin() < cap {
        return Ok(Rational::zero());
    }
    // theta equals y_i on (x_i, x_{i+1}], so the first piece below the cap
    // starts the set
    theta
        .points()
        .iter()
        .find(|(_, y)| y < cap)
        .map(|(x, _)| x.clone())
        .ok_or(AuctionError::Unbounded)
}

/// Allowances per bidder at `p_co2`.
pub fn allocate_allowances(
    thetas: &[AllowanceDemand],
    p_co2: &Rational,
    cap: &Rational,
) -> Result<Vec<Rational>, AuctionError> {
    check_cap(cap)?;
    let at: Vec<Rational> = thetas.iter().map(|t| t.eval(p_co2)).collect();
    let demanded: Rational = at.iter().sum();
    if &demanded <= cap {
        return Ok(at);
    }
    let after: Vec<Rational> = thetas.iter().map(|t| t.eval_right(p_co2)).collect();
    let drops: Vec<Rational> = at.iter().zip(&after).map(|(a, b)| a - b).collect();
    let total_drop: Rational = drops.iter().sum();
    let left_over = cap - after.iter().sum::<Rational>();
    if !total_drop.is_positive() || left_over.is_negative() {
        return Err(AuctionError::Inconsistent(format!(
            "demand {} exceeds the cap at {} without a drop to share",
            decimal_string(&demanded),
            decimal_string(p_co2)
        )));
    }
    Ok(after
        .into_iter()
        .zip(&drops)
        .map(|(base, drop)| {
            if drop.is_zero() {
                base
            } else {
                base + drop * &left_over / &total_drop
            }
        })
        .collect())
}

pub fn clear_auction(bids: &[BidCurve], cap: &Rational) -> Result<CarbonOutcome, AuctionError> {
    if bids.is_empty() {
        return Err(AuctionError::NoBidders);
    }
    let thetas: Vec<AllowanceDemand> = bids.iter().map(allowance_demand).collect();
    let total = StepCurve::sum(&thetas)?;
    let p_co2 = carbon_price(&total, cap)?;
    let delta = allocate_allowances(&thetas, &p_co2, cap)?;
    Ok(CarbonOutcome { p_co2, delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::Stair;
    use crate::rational::int;

    fn flat(price: i64, w: i64) -> BidCurve {
        BidCurve::flat(int(price), int(w)).unwrap()
    }

    #[test]
    fn second_item_price() {
        let out = clear_auction(&[flat(50, 8), flat(30, 8)], &int(10)).unwrap();
        assert_eq!(out.p_co2, int(30));
        assert_eq!(out.delta, vec![int(8), int(2)]);
    }

    #[test]
    fn price_from_aggregate_demand() {
        let thetas: Vec<_> = [flat(50, 8), flat(30, 8)]
            .iter()
            .map(allowance_demand)
            .collect();
        let total = StepCurve::sum(&thetas).unwrap();
        assert_eq!(total.eval(&int(30)), int(16));
        assert_eq!(total.eval(&int(31)), int(8));
        assert_eq!(carbon_price(&total, &int(10)).unwrap(), int(30));
    }

    #[test]
    fn oversupply_clears_at_zero() {
        let out = clear_auction(&[flat(5, 10)], &int(20)).unwrap();
        assert_eq!(out.p_co2, int(0));
        assert_eq!(out.delta, vec![int(10)]);
    }

    #[test]
    fn small_cap_clears_at_top_bid() {
        let out = clear_auction(&[flat(50, 8), flat(30, 8)], &int(3)).unwrap();
        assert_eq!(out.p_co2, int(50));
        assert_eq!(out.delta, vec![int(3), int(0)]);
    }

    #[test]
    fn single_bidder_jumping_across_cap() {
        let out = clear_auction(&[flat(12, 30)], &int(7)).unwrap();
        assert_eq!(out.p_co2, int(12));
        assert_eq!(out.delta, vec![int(7)]);
    }

    #[test]
    fn zero_bids_give_zero_price() {
        let out = clear_auction(&[flat(0, 4), flat(0, 9)], &int(5)).unwrap();
        assert_eq!(out.p_co2, int(0));
        assert_eq!(out.delta.iter().sum::<Rational>(), int(5));
    }

    #[test]
    fn identical_bidders_split_evenly() {
        let out = clear_auction(&[flat(20, 6), flat(20, 6)], &int(6)).unwrap();
        assert_eq!(out.p_co2, int(20));
        assert_eq!(out.delta, vec![int(3), int(3)]);
    }

    #[test]
    fn non_binding_cap_serves_everyone_at_zero_price() {
        let out = clear_auction(&[flat(0, 6), flat(3, 2)], &int(20)).unwrap();
        assert_eq!(out.p_co2, int(0));
        assert_eq!(out.delta, vec![int(6), int(2)]);
    }

    #[test]
    fn multi_stair_bids() {
        let a = BidCurve::new(vec![Stair::new(int(3), int(50)), Stair::new(int(8), int(30))]).unwrap();
        let b = flat(40, 5);
        // demand: p <= 30: 13, (30, 40]: 8, (40, 50]: 3
        let out = clear_auction(&[a, b], &int(10)).unwrap();
        assert_eq!(out.p_co2, int(30));
        // a drops 5 at 30, b does not: a gets 3 + 5 * (10 - 8) / 5
        assert_eq!(out.delta, vec![int(5), int(5)]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(clear_auction(&[], &int(1)).unwrap_err(), AuctionError::NoBidders);
        assert!(matches!(
            clear_auction(&[flat(1, 1)], &int(0)),
            Err(AuctionError::NonPositiveCap(_))
        ));
        let inc = StepCurve::constant(int(3), Direction::Increasing, Continuity::LeftContinuous);
        assert_eq!(
            carbon_price(&inc, &int(1)).unwrap_err(),
            AuctionError::MalformedDemand
        );
        let never = StepCurve::constant(int(3), Direction::Decreasing, Continuity::LeftContinuous);
        assert_eq!(carbon_price(&never, &int(1)).unwrap_err(), AuctionError::Unbounded);
    }
}
