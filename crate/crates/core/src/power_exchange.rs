//! Electricity market clearing.
//!
//! Asks are turned into offer curves, aggregated, and crossed with demand:
//!
//! * `p_under = inf{ p > 0 : offer(p) > demand(p) }` (or `p_lolc` if the set is empty),
//! * `p_over  = sup{ p in [p_under, p_lolc] : demand(p) = demand(p_under) }`,
//! * the market price is `p_over`.
//!
//! When demand at the price falls short of the offer, the producers whose offer
//! jumps between `p_under^-` and the price share the residual demand in
//! proportion to their jumps.

use num_traits::{Signed, Zero};

use crate::curves::{aggregate, AskCurve, Continuity, CurveError, DemandCurve, Direction, OfferCurve};
use crate::rational::{decimal_string, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClearingError {
    #[error("at least one producer is required")]
    NoProducers,
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("offer curve must be increasing, left-continuous and start at 0")]
    MalformedOffer,
    #[error("ask level {level} is above the loss-of-load cost {p_lolc}")]
    AskAboveLossOfLoad { level: String, p_lolc: String },
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

/// Outcome of one power exchange clearing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElecOutcome {
    pub p_under: Rational,
    pub p_over: Rational,
    pub p_elec: Rational,
    /// Quantity sold by each producer.
    pub phi: Vec<Rational>,
    pub total_sold: Rational,
}

/// How the residual demand is shared among producers whose offer jumps at the
/// clearing price. `jumps` are all non-negative with a positive sum, and
/// `residual` lies in `[0, sum(jumps)]`.
pub trait RationingRule: Sync {
    fn share(&self, residual: &Rational, jumps: &[Rational]) -> Vec<Rational>;
}

/// Shares proportional to each producer's jump, the market's rule.
#[derive(Debug, Clone, Copy, Default)]
pub struct Proportional;

impl RationingRule for Proportional {
    fn share(&self, residual: &Rational, jumps: &[Rational]) -> Vec<Rational> {
        let total: Rational = jumps.iter().sum();
        jumps.iter().map(|j| j * residual / &total).collect()
    }
}

fn check_offer(offer: &OfferCurve) -> Result<(), ClearingError> {
    if offer.direction() != Direction::Increasing
        || offer.continuity() != Continuity::LeftContinuous
        || !offer.origin().is_zero()
    {
        return Err(ClearingError::MalformedOffer);
    }
    Ok(())
}

/// Computes `(p_under, p_over)` by scanning the merged breakpoints of offer and
/// demand. On each interval `(a, b]` the offer is constant and demand affine,
/// so the infimum is either `a` itself or the exact affine crossing.
pub fn clearing_interval(
    offer: &OfferCurve,
    demand: &DemandCurve,
    p_lolc: &Rational,
) -> Result<(Rational, Rational), ClearingError> {
    check_offer(offer)?;
    let p_under = lowest_crossing(offer, demand, p_lolc);
    let p_over = top_of_plateau(demand, &p_under, p_lolc);
    Ok((p_under, p_over))
}

fn lowest_crossing(offer: &OfferCurve, demand: &DemandCurve, p_lolc: &Rational) -> Rational {
    let mut grid: Vec<Rational> = offer
        .breakpoints()
        .chain(demand.breakpoints())
        .filter(|p| *p < p_lolc)
        .cloned()
        .collect();
    grid.push(Rational::zero());
    grid.push(p_lolc.clone());
    grid.sort();
    grid.dedup();

    for w in grid.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let offered = offer.eval_right(a);
        let piece = demand.piece_after(a);
        let demand_a = demand.eval_right(a);
        if offered > demand_a {
            return a.clone();
        }
        if piece.slope.is_negative() && offered > demand.eval(b) {
            // demand_a + slope * (p - a) = offered
            return a + (&offered - &demand_a) / &piece.slope;
        }
    }
    p_lolc.clone()
}

fn top_of_plateau(demand: &DemandCurve, p_under: &Rational, p_lolc: &Rational) -> Rational {
    if p_under >= p_lolc {
        return p_lolc.clone();
    }
    let level = demand.eval(p_under);
    let mut at = p_under.clone();
    loop {
        let piece = demand.piece_after(&at);
        if !piece.slope.is_zero() || demand.eval_right(&at) != level {
            return at;
        }
        match demand.pieces().iter().find(|p| p.start > at) {
            Some(next) if &next.start < p_lolc => at = next.start.clone(),
            _ => return p_lolc.clone(),
        }
    }
}

/// The market price rule: the top of the clearing interval.
pub fn clearing_price(p_under: &Rational, p_over: &Rational) -> Rational {
    debug_assert!(p_under <= p_over);
    p_over.clone()
}

/// Quantities sold by each producer at `p_elec`.
pub fn allocate(
    offers: &[OfferCurve],
    demand: &DemandCurve,
    p_under: &Rational,
    p_elec: &Rational,
) -> Result<Vec<Rational>, ClearingError> {
    allocate_with(offers, demand, p_under, p_elec, &Proportional)
}

pub fn allocate_with(
    offers: &[OfferCurve],
    demand: &DemandCurve,
    p_under: &Rational,
    p_elec: &Rational,
    rule: &dyn RationingRule,
) -> Result<Vec<Rational>, ClearingError> {
    let at_price: Vec<Rational> = offers.iter().map(|o| o.eval(p_elec)).collect();
    let offered: Rational = at_price.iter().sum();
    let wanted = demand.eval(p_elec);
    if wanted >= offered {
        return Ok(at_price);
    }
    let below: Vec<Rational> = offers.iter().map(|o| o.eval_left(p_under)).collect();
    let jumps: Vec<Rational> = at_price.iter().zip(&below).map(|(a, b)| a - b).collect();
    let total_jump: Rational = jumps.iter().sum();
    if !total_jump.is_positive() {
        return Err(ClearingError::Inconsistent(format!(
            "demand {} below offer {} at {} but the offer does not jump there",
            decimal_string(&wanted),
            decimal_string(&offered),
            decimal_string(p_elec)
        )));
    }
    let residual = wanted - below.iter().sum::<Rational>();
    if residual.is_negative() {
        return Err(ClearingError::Inconsistent(
            "offer below the clearing interval exceeds demand".into(),
        ));
    }
    let shares = rule.share(&residual, &jumps);
    Ok(below.into_iter().zip(shares).map(|(b, s)| b + s).collect())
}

/// Full clearing: asks -> offers -> aggregate -> interval -> price -> allocation.
pub fn clear_market(
    asks: &[AskCurve],
    demand: &DemandCurve,
    p_lolc: &Rational,
) -> Result<ElecOutcome, ClearingError> {
    clear_market_with(asks, demand, p_lolc, &Proportional)
}

pub fn clear_market_with(
    asks: &[AskCurve],
    demand: &DemandCurve,
    p_lolc: &Rational,
    rule: &dyn RationingRule,
) -> Result<ElecOutcome, ClearingError> {
    if asks.is_empty() {
        return Err(ClearingError::NoProducers);
    }
    if let Some(level) = asks.iter().map(|a| a.max_level()).find(|l| *l > p_lolc) {
        return Err(ClearingError::AskAboveLossOfLoad {
            level: decimal_string(level),
            p_lolc: decimal_string(p_lolc),
        });
    }
    let offers: Vec<OfferCurve> = asks.iter().map(AskCurve::generalized_inverse).collect();
    clear_offers_with(&offers, demand, p_lolc, rule)
}

/// Clearing from already-inverted offer curves.
pub fn clear_offers_with(
    offers: &[OfferCurve],
    demand: &DemandCurve,
    p_lolc: &Rational,
    rule: &dyn RationingRule,
) -> Result<ElecOutcome, ClearingError> {
    if offers.is_empty() {
        return Err(ClearingError::NoProducers);
    }
    let total = aggregate(offers)?;
    let (p_under, p_over) = clearing_interval(&total, demand, p_lolc)?;
    let p_elec = clearing_price(&p_under, &p_over);
    let phi = allocate_with(offers, demand, &p_under, &p_elec, rule)?;
    let total_sold = phi.iter().sum();
    Ok(ElecOutcome {
        p_under,
        p_over,
        p_elec,
        phi,
        total_sold,
    })
}
