//! Producers, scenarios, and the link between the two markets.
//!
//! Allowances won on the carbon auction lower a producer's marginal cost on the
//! covered part of its output; the rest of the output pays the penalty rate.

use num_traits::{Signed, Zero};

use crate::carbon_auction::{clear_auction, AuctionError, CarbonOutcome};
use crate::curves::{AskCurve, BidCurve, CurveError, DemandCurve, Stair};
use crate::power_exchange::{clear_market, ClearingError, ElecOutcome};
use crate::rational::{decimal_string, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario needs at least one producer")]
    NoProducers,
    #[error("producer {name:?}: {reason}")]
    InvalidProducer { name: String, reason: String },
    #[error(
        "producers {first:?} and {second:?} share the same (c, e) pair; producers must be pairwise distinct"
    )]
    DuplicateProducers { first: String, second: String },
    #[error("loss-of-load cost {p_lolc} must exceed every penalized cost c + e * penalty (max {max_cost})")]
    LossOfLoadTooLow { p_lolc: String, max_cost: String },
    #[error("allowance cap W must be positive, got {0}")]
    NonPositiveCap(String),
    #[error("penalty must be positive, got {0}")]
    NonPositivePenalty(String),
    #[error("producer names must be unique ({0:?} repeats)")]
    DuplicateName(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CouplingError {
    #[error("allowance price {p_co2} outside [0, penalty = {penalty}]")]
    PriceOutOfRange { p_co2: String, penalty: String },
    #[error("allowance quantity must be non-negative, got {0}")]
    NegativeAllowance(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
    #[error("expected {expected} bids, got {got}")]
    BidCount { expected: usize, got: usize },
}

/// A single-unit producer with constant base marginal cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Producer {
    pub name: String,
    /// Base marginal cost per MWh.
    pub c: Rational,
    /// Emission rate, tCO2 per MWh.
    pub e: Rational,
    /// Capacity in MWh.
    pub kappa: Rational,
}

impl Producer {
    pub fn new(
        name: impl Into<String>,
        c: Rational,
        e: Rational,
        kappa: Rational,
    ) -> Result<Self, ScenarioError> {
        let name = name.into();
        let invalid = |reason: &str| ScenarioError::InvalidProducer {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if c.is_negative() {
            return Err(invalid("base cost c must be non-negative"));
        }
        if !e.is_positive() {
            return Err(invalid("emission rate e must be positive"));
        }
        if !kappa.is_positive() {
            return Err(invalid("capacity kappa must be positive"));
        }
        Ok(Producer { name, c, e, kappa })
    }

    /// Marginal cost when every MWh pays carbon at `tau`.
    pub fn cost_at(&self, tau: &Rational) -> Rational {
        &self.c + &self.e * tau
    }

    /// Allowances needed to cover full capacity.
    pub fn full_coverage(&self) -> Rational {
        &self.e * &self.kappa
    }
}

/// Market data shared by both auctions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub producers: Vec<Producer>,
    pub demand: DemandCurve,
    /// Allowance cap `W`.
    pub cap: Rational,
    /// Penalty per uncovered tonne.
    pub penalty: Rational,
    pub p_lolc: Rational,
}

impl Scenario {
    pub fn new(
        producers: Vec<Producer>,
        demand: DemandCurve,
        cap: Rational,
        penalty: Rational,
        p_lolc: Rational,
    ) -> Result<Self, ScenarioError> {
        if producers.is_empty() {
            return Err(ScenarioError::NoProducers);
        }
        for (i, a) in producers.iter().enumerate() {
            for b in &producers[i + 1..] {
                if a.name == b.name {
                    return Err(ScenarioError::DuplicateName(a.name.clone()));
                }
                if a.c == b.c && a.e == b.e {
                    return Err(ScenarioError::DuplicateProducers {
                        first: a.name.clone(),
                        second: b.name.clone(),
                    });
                }
            }
        }
        if !cap.is_positive() {
            return Err(ScenarioError::NonPositiveCap(decimal_string(&cap)));
        }
        if !penalty.is_positive() {
            return Err(ScenarioError::NonPositivePenalty(decimal_string(&penalty)));
        }
        let max_cost = producers
            .iter()
            .map(|p| p.cost_at(&penalty))
            .max()
            .expect("non-empty");
        if p_lolc <= max_cost {
            return Err(ScenarioError::LossOfLoadTooLow {
                p_lolc: decimal_string(&p_lolc),
                max_cost: decimal_string(&max_cost),
            });
        }
        Ok(Scenario {
            producers,
            demand,
            cap,
            penalty,
            p_lolc,
        })
    }

    pub fn len(&self) -> usize {
        self.producers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.producers.is_empty()
    }

    /// Same market with a different allowance cap.
    pub fn with_cap(&self, cap: Rational) -> Result<Self, ScenarioError> {
        Scenario::new(
            self.producers.clone(),
            self.demand.clone(),
            cap,
            self.penalty.clone(),
            self.p_lolc.clone(),
        )
    }
}

/// Increasing marginal-cost staircase on `[0, kappa]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostCurve {
    stairs: Vec<Stair>,
}

/// Cost curve produced by the coupling of the two markets.
pub type RegulatedCost = CostCurve;

impl CostCurve {
    pub fn new(stairs: Vec<Stair>) -> Result<Self, CurveError> {
        let stairs = crate::curves::normalize_stairs(stairs)?;
        for w in stairs.windows(2) {
            if w[1].price < w[0].price {
                return Err(CurveError::NotMonotone {
                    direction: crate::curves::Direction::Increasing,
                    at: decimal_string(&w[0].upto),
                });
            }
        }
        Ok(CostCurve { stairs })
    }

    pub fn flat(cost: Rational, kappa: Rational) -> Result<Self, CurveError> {
        Self::new(vec![Stair::new(kappa, cost)])
    }

    pub fn stairs(&self) -> &[Stair] {
        &self.stairs
    }

    pub fn kappa(&self) -> &Rational {
        &self.stairs.last().expect("non-empty").upto
    }

    /// Cost at `q`; `None` outside `[0, kappa]`.
    pub fn eval(&self, q: &Rational) -> Option<&Rational> {
        if q.is_negative() {
            return None;
        }
        let idx = self.stairs.partition_point(|s| &s.upto < q);
        self.stairs.get(idx).map(|s| &s.price)
    }

    pub fn max_level(&self) -> &Rational {
        &self.stairs.last().expect("non-empty").price
    }

    /// The marginal-production-cost ask: the cost itself on `[0, kappa]`,
    /// `p_lolc` beyond.
    pub fn marginal_cost_ask(&self, p_lolc: &Rational) -> Result<AskCurve, CurveError> {
        AskCurve::new(self.stairs.clone(), p_lolc.clone())
    }
}

/// Marginal cost once the carbon auction has cleared: `c + e * p_co2` on the
/// first `delta / e` MWh, `c + e * penalty` on the rest of the capacity.
pub fn regulated_cost(
    producer: &Producer,
    delta: &Rational,
    p_co2: &Rational,
    penalty: &Rational,
) -> Result<RegulatedCost, CouplingError> {
    if p_co2.is_negative() || p_co2 > penalty {
        return Err(CouplingError::PriceOutOfRange {
            p_co2: decimal_string(p_co2),
            penalty: decimal_string(penalty),
        });
    }
    if delta.is_negative() {
        return Err(CouplingError::NegativeAllowance(decimal_string(delta)));
    }
    let covered = (delta / &producer.e).min(producer.kappa.clone());
    let mut stairs = Vec::with_capacity(2);
    if covered.is_positive() {
        stairs.push(Stair::new(covered.clone(), producer.cost_at(p_co2)));
    }
    if covered < producer.kappa {
        stairs.push(Stair::new(producer.kappa.clone(), producer.cost_at(penalty)));
    }
    Ok(CostCurve::new(stairs)?)
}

/// Regulated costs of every producer after the carbon auction.
pub fn regulated_costs(
    scenario: &Scenario,
    carbon: &CarbonOutcome,
) -> Result<Vec<RegulatedCost>, CouplingError> {
    scenario
        .producers
        .iter()
        .zip(&carbon.delta)
        .map(|(p, d)| regulated_cost(p, d, &carbon.p_co2, &scenario.penalty))
        .collect()
}

/// Both clearings of one coupled strategy profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoupledOutcome {
    pub carbon: CarbonOutcome,
    pub costs: Vec<RegulatedCost>,
    pub asks: Vec<AskCurve>,
    pub elec: ElecOutcome,
}

/// Clears the carbon auction, derives regulated costs, lets each producer turn
/// its cost into an ask via `ask_for`, then clears electricity.
pub fn clear_coupled_with(
    scenario: &Scenario,
    bids: &[BidCurve],
    mut ask_for: impl FnMut(usize, &RegulatedCost) -> Result<AskCurve, CurveError>,
) -> Result<CoupledOutcome, CouplingError> {
    if bids.len() != scenario.len() {
        return Err(CouplingError::BidCount {
            expected: scenario.len(),
            got: bids.len(),
        });
    }
    let carbon = clear_auction(bids, &scenario.cap)?;
    let costs = regulated_costs(scenario, &carbon)?;
    let asks = costs
        .iter()
        .enumerate()
        .map(|(j, c)| ask_for(j, c))
        .collect::<Result<Vec<_>, _>>()?;
    let elec = clear_market(&asks, &scenario.demand, &scenario.p_lolc)?;
    Ok(CoupledOutcome {
        carbon,
        costs,
        asks,
        elec,
    })
}

/// Coupled clearing where every producer asks its marginal production cost.
pub fn clear_coupled(scenario: &Scenario, bids: &[BidCurve]) -> Result<CoupledOutcome, CouplingError> {
    clear_coupled_with(scenario, bids, |_, c| c.marginal_cost_ask(&scenario.p_lolc))
}

/// Where an ask dips below its producer's marginal cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub producer: usize,
    pub q: Rational,
    pub ask: Rational,
    pub cost: Rational,
}

/// Sell-at-no-loss check: `ask_j(q) >= cost_j(q)` on the whole cost domain,
/// and nothing offered beyond capacity below `p_lolc`.
pub fn check_admissible(asks: &[AskCurve], costs: &[CostCurve]) -> Result<(), Violation> {
    for (j, (ask, cost)) in asks.iter().zip(costs).enumerate() {
        if let Some(v) = first_violation(ask, cost) {
            return Err(Violation { producer: j, ..v });
        }
    }
    Ok(())
}

fn first_violation(ask: &AskCurve, cost: &CostCurve) -> Option<Violation> {
    let mut qs: Vec<Rational> = ask
        .quantity_breaks()
        .into_iter()
        .chain(std::iter::once(Rational::zero()))
        .chain(cost.stairs().iter().map(|s| s.upto.clone()))
        .collect();
    qs.sort();
    qs.dedup();
    let mut probes = qs.clone();
    probes.extend(qs.windows(2).map(|w| (&w[0] + &w[1]) / Rational::from_integer(2.into())));
    probes.sort();
    for q in probes {
        let asked = ask.eval(&q);
        match cost.eval(&q) {
            Some(c) if &asked < c => {
                return Some(Violation {
                    producer: 0,
                    q,
                    ask: asked,
                    cost: c.clone(),
                })
            }
            None if &asked < ask.p_lolc() => {
                return Some(Violation {
                    producer: 0,
                    q,
                    ask: asked,
                    cost: ask.p_lolc().clone(),
                })
            }
            _ => {}
        }
    }
    None
}
