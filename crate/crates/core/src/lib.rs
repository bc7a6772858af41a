//! Exact clearing of a coupled electricity / CO2-allowance market.
//!
//! Producers first buy emission allowances in a uniform-price auction, then
//! sell energy on a uniform-price power exchange. Everything is computed over
//! exact rationals.

pub mod carbon_auction;
pub mod coupling;
pub mod curves;
pub mod equilibrium;
pub mod power_exchange;
pub mod rational;
pub mod scenario_io;
pub mod verifier;

pub use carbon_auction::{clear_auction, AuctionError, CarbonOutcome};
pub use coupling::{
    check_admissible, clear_coupled, regulated_cost, CostCurve, CoupledOutcome, CouplingError,
    Producer, RegulatedCost, Scenario, ScenarioError, Violation,
};
pub use equilibrium::{solve, CaseTag, EquilibriumError, EquilibriumReport, SolveOptions};
pub use verifier::{DeviationFamily, FalsifierReport};
pub use curves::{
    AllowanceDemand, AskCurve, BidCurve, Continuity, CurveError, DemandCurve, Direction,
    OfferCurve, Stair, StepCurve,
};
pub use power_exchange::{clear_market, ClearingError, ElecOutcome, Proportional, RationingRule};
pub use rational::Rational;
pub use scenario_io::{parse_scenario, parse_scenario_str, IoError, ScenarioFile, VerifySettings};
