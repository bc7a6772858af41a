//! Construction of the coupled-market equilibrium candidate.
//!
//! With an exogenous carbon cost `tau`, every producer asks `c_j + tau e_j` on
//! its capacity. Clearing that market for each `tau` gives the willing-to-buy
//! functions
//!
//! * `W(tau)     = sum_j e_j phi_j(tau)`,
//! * `W_bar(tau) = sum_j e_j kappa_j [phi_j(tau) > 0]`,
//!
//! whose last crossings of the cap, `tau_guess` and `tau_bar_guess`, drive the
//! equilibrium bids. Both functions are piecewise constant in `tau` between the
//! structural breakpoints returned by [`tau_breakpoints`], so evaluating them at
//! breakpoints and interval midpoints gives exact suprema.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::carbon_auction::AuctionError;
use crate::coupling::{
    check_admissible, clear_coupled, CostCurve, CoupledOutcome, CouplingError, RegulatedCost,
    Scenario,
};
use crate::curves::{AskCurve, BidCurve, CurveError, Stair};
use crate::power_exchange::{clear_market, ClearingError};
use crate::rational::{decimal_string, int, midpoint, Rational};
use crate::verifier::{check_coupled_nash, DeviationFamily, FalsifierReport};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DesignRejection {
    #[error(
        "too many allowances: cap W = {cap} is not below W(0) = {w_zero}, the allowances needed at zero carbon cost"
    )]
    TooManyAllowances { cap: String, w_zero: String },
    #[error(
        "too few allowances: cap W = {cap} is not above W_bar(penalty) = {w_bar_penalty}, the allowances covering the capacity still active at the penalty price"
    )]
    TooFewAllowances { cap: String, w_bar_penalty: String },
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum EquilibriumError {
    #[error(transparent)]
    Clearing(#[from] ClearingError),
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("carbon cost {tau} outside [0, penalty = {penalty}]")]
    TauOutOfRange { tau: String, penalty: String },
    #[error("design rejected: {0}")]
    Design(#[from] DesignRejection),
    #[error(
        "active sets around tau_bar_guess = {tau} ({left:?} on the left, {right:?} on the right) match neither case"
    )]
    NonclassifiableCrossing {
        tau: String,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid (eps, delta): {0}")]
    InvalidParameters(String),
    #[error(
        "no (eps, delta) on the search grid passed the deviation check ({tried} pairs checked, {skipped} skipped)"
    )]
    NoValidatedParameters {
        tried: usize,
        skipped: usize,
        last: Option<Box<FalsifierReport>>,
    },
}

/// Power exchange outcome when carbon costs `tau` per tonne.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TauOutcome {
    pub tau: Rational,
    pub p_elec: Rational,
    pub phi: Vec<Rational>,
    /// Producers selling a positive quantity.
    pub active: Vec<usize>,
}

impl TauOutcome {
    pub fn total_sold(&self) -> Rational {
        self.phi.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WillingToBuy {
    pub tau: Rational,
    pub w: Rational,
    pub w_bar: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    /// One producer leaves the active set at `tau_bar_guess`.
    CaseA { i_bar: usize },
    /// `i_l` leaves and `i_r` enters at `tau_bar_guess`.
    CaseB { i_l: usize, i_r: usize },
}

/// The marginal-production-cost ask for a cost curve.
pub fn dominant_strategy(cost: &CostCurve, p_lolc: &Rational) -> Result<AskCurve, CurveError> {
    cost.marginal_cost_ask(p_lolc)
}

fn tau_asks(scenario: &Scenario, tau: &Rational) -> Result<Vec<AskCurve>, CurveError> {
    scenario
        .producers
        .iter()
        .map(|p| AskCurve::flat(p.cost_at(tau), p.kappa.clone(), scenario.p_lolc.clone()))
        .collect()
}

fn clear_tau(scenario: &Scenario, tau: &Rational) -> Result<TauOutcome, EquilibriumError> {
    let asks = tau_asks(scenario, tau)?;
    let out = clear_market(&asks, &scenario.demand, &scenario.p_lolc)?;
    let active = out
        .phi
        .iter()
        .enumerate()
        .filter(|(_, q)| !q.is_zero())
        .map(|(j, _)| j)
        .collect();
    Ok(TauOutcome {
        tau: tau.clone(),
        p_elec: out.p_elec,
        phi: out.phi,
        active,
    })
}

fn check_tau(scenario: &Scenario, tau: &Rational) -> Result<(), EquilibriumError> {
    if tau.is_negative() || tau > &scenario.penalty {
        return Err(EquilibriumError::TauOutOfRange {
            tau: decimal_string(tau),
            penalty: decimal_string(&scenario.penalty),
        });
    }
    Ok(())
}

/// Clears electricity with asks `c_j + tau e_j` on `[0, kappa_j]`.
pub fn tau_clearing(scenario: &Scenario, tau: &Rational) -> Result<TauOutcome, EquilibriumError> {
    check_tau(scenario, tau)?;
    clear_tau(scenario, tau)
}

fn willing_from(scenario: &Scenario, out: &TauOutcome) -> WillingToBuy {
    let mut w = Rational::zero();
    let mut w_bar = Rational::zero();
    for (p, q) in scenario.producers.iter().zip(&out.phi) {
        w += &p.e * q;
        if q.is_positive() {
            w_bar += p.full_coverage();
        }
    }
    WillingToBuy {
        tau: out.tau.clone(),
        w,
        w_bar,
    }
}

pub fn willing_to_buy(scenario: &Scenario, tau: &Rational) -> Result<WillingToBuy, EquilibriumError> {
    Ok(willing_from(scenario, &tau_clearing(scenario, tau)?))
}

/// Every distinct positive subset sum of `values`.
fn subset_sums(values: &[Rational]) -> BTreeSet<Rational> {
    let mut sums = BTreeSet::new();
    sums.insert(Rational::zero());
    for v in values {
        let next: Vec<Rational> = sums.iter().map(|s| s + v).collect();
        sums.extend(next);
    }
    sums.remove(&Rational::zero());
    sums
}

/// All `tau >= 0` where the clearing structure can change, without the upper
/// clip at the penalty. The last entry is always above the penalty because the
/// loss-of-load crossings are included.
fn structural_taus(scenario: &Scenario) -> Vec<Rational> {
    let mut prices: BTreeSet<Rational> = scenario.demand.breakpoints().cloned().collect();
    prices.insert(scenario.p_lolc.clone());
    let kappas: Vec<Rational> = scenario.producers.iter().map(|p| p.kappa.clone()).collect();
    for level in subset_sums(&kappas) {
        prices.extend(scenario.demand.crossings(&level));
    }
    let mut taus: BTreeSet<Rational> = BTreeSet::new();
    taus.insert(Rational::zero());
    for p in &scenario.producers {
        for rho in &prices {
            let t = (rho - &p.c) / &p.e;
            if !t.is_negative() {
                taus.insert(t);
            }
        }
    }
    for (i, a) in scenario.producers.iter().enumerate() {
        for b in &scenario.producers[i + 1..] {
            if a.e != b.e {
                let t = (&a.c - &b.c) / (&b.e - &a.e);
                if !t.is_negative() {
                    taus.insert(t);
                }
            }
        }
    }
    taus.into_iter().collect()
}

/// Sorted breakpoints in `[0, penalty]`, both ends included.
pub fn tau_breakpoints(scenario: &Scenario) -> Vec<Rational> {
    let mut out: Vec<Rational> = structural_taus(scenario)
        .into_iter()
        .filter(|t| t <= &scenario.penalty)
        .collect();
    if out.last() != Some(&scenario.penalty) {
        out.push(scenario.penalty.clone());
    }
    out
}

/// A point just left of `tau` with the same clearing as the whole open
/// interval up to `tau`; `None` at 0.
pub fn left_of(scenario: &Scenario, tau: &Rational) -> Option<Rational> {
    structural_taus(scenario)
        .into_iter()
        .filter(|t| t < tau)
        .max()
        .map(|prev| midpoint(&prev, tau))
}

/// A point just right of `tau` with the same clearing as the whole open
/// interval after `tau`.
pub fn right_of(scenario: &Scenario, tau: &Rational) -> Rational {
    let next = structural_taus(scenario)
        .into_iter()
        .find(|t| t > tau)
        .unwrap_or_else(|| tau + int(1));
    midpoint(tau, &next)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TauSample {
    pub is_breakpoint: bool,
    pub outcome: TauOutcome,
    pub willing: WillingToBuy,
}

/// Clearing at every breakpoint in `[0, penalty]` and at every interval midpoint.
pub fn tau_profile(scenario: &Scenario) -> Result<Vec<TauSample>, EquilibriumError> {
    let bps = tau_breakpoints(scenario);
    let mut points: Vec<(Rational, bool)> = Vec::with_capacity(2 * bps.len());
    for (i, b) in bps.iter().enumerate() {
        if i > 0 {
            points.push((midpoint(&bps[i - 1], b), false));
        }
        points.push((b.clone(), true));
    }
    points
        .into_par_iter()
        .map(|(tau, is_breakpoint)| {
            let outcome = clear_tau(scenario, &tau)?;
            let willing = willing_from(scenario, &outcome);
            Ok(TauSample {
                is_breakpoint,
                outcome,
                willing,
            })
        })
        .collect()
}

/// `sup{ tau : f(tau) > cap }` over a profile; `f` is constant on the open
/// intervals between breakpoints.
fn last_above(profile: &[TauSample], f: impl Fn(&WillingToBuy) -> &Rational, cap: &Rational) -> Option<Rational> {
    let i = profile.iter().rposition(|s| f(&s.willing) > cap)?;
    if profile[i].is_breakpoint {
        Some(profile[i].outcome.tau.clone())
    } else {
        Some(profile[i + 1].outcome.tau.clone())
    }
}

/// Rejects caps outside `(W_bar(penalty), W(0))`.
pub fn design_check(scenario: &Scenario) -> Result<(), EquilibriumError> {
    let at_zero = willing_from(scenario, &clear_tau(scenario, &Rational::zero())?);
    let at_penalty = willing_from(scenario, &clear_tau(scenario, &scenario.penalty)?);
    if at_zero.w <= scenario.cap {
        return Err(DesignRejection::TooManyAllowances {
            cap: decimal_string(&scenario.cap),
            w_zero: decimal_string(&at_zero.w),
        }
        .into());
    }
    if at_penalty.w_bar >= scenario.cap {
        return Err(DesignRejection::TooFewAllowances {
            cap: decimal_string(&scenario.cap),
            w_bar_penalty: decimal_string(&at_penalty.w_bar),
        }
        .into());
    }
    Ok(())
}

/// `(tau_guess, tau_bar_guess)`.
pub fn guess_prices(scenario: &Scenario) -> Result<(Rational, Rational), EquilibriumError> {
    design_check(scenario)?;
    let profile = tau_profile(scenario)?;
    guesses_from(&profile, &scenario.cap)
}

fn guesses_from(profile: &[TauSample], cap: &Rational) -> Result<(Rational, Rational), EquilibriumError> {
    let missing = || EquilibriumError::Clearing(ClearingError::Inconsistent("W(0) does not exceed the cap".into()));
    let tau_guess = last_above(profile, |w| &w.w, cap).ok_or_else(missing)?;
    let tau_bar = last_above(profile, |w| &w.w_bar, cap).ok_or_else(missing)?;
    Ok((tau_guess, tau_bar))
}

/// Active sets just left and just right of `tau`.
pub fn active_around(
    scenario: &Scenario,
    tau: &Rational,
) -> Result<(Vec<usize>, Vec<usize>), EquilibriumError> {
    let left_tau = left_of(scenario, tau).unwrap_or_else(|| tau.clone());
    let left = clear_tau(scenario, &left_tau)?.active;
    let right = clear_tau(scenario, &right_of(scenario, tau))?.active;
    Ok((left, right))
}

pub fn classify_case(scenario: &Scenario, tau_bar_guess: &Rational) -> Result<CaseTag, EquilibriumError> {
    let (left, right) = active_around(scenario, tau_bar_guess)?;
    let leavers: Vec<usize> = left.iter().filter(|j| !right.contains(j)).copied().collect();
    let enterers: Vec<usize> = right.iter().filter(|j| !left.contains(j)).copied().collect();
    match (leavers.as_slice(), enterers.as_slice()) {
        ([i_bar], []) => Ok(CaseTag::CaseA { i_bar: *i_bar }),
        ([i_l], [i_r]) => Ok(CaseTag::CaseB { i_l: *i_l, i_r: *i_r }),
        _ => Err(EquilibriumError::NonclassifiableCrossing {
            tau: decimal_string(tau_bar_guess),
            left,
            right,
        }),
    }
}

/// Values the bid construction reads off the `tau` market.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidInputs {
    pub tau_guess: Rational,
    pub tau_bar_guess: Rational,
    /// `p_elec(tau_bar_guess)`.
    pub p_elec_bar: Rational,
    /// `phi(tau_bar_guess^-)`.
    pub phi_left: Vec<Rational>,
    /// `W_bar(tau_bar_guess^+)`.
    pub w_bar_right: Rational,
}

impl BidInputs {
    pub fn compute(
        scenario: &Scenario,
        tau_guess: &Rational,
        tau_bar_guess: &Rational,
    ) -> Result<Self, EquilibriumError> {
        let at = clear_tau(scenario, tau_bar_guess)?;
        let left_tau = left_of(scenario, tau_bar_guess).unwrap_or_else(|| tau_bar_guess.clone());
        let left = clear_tau(scenario, &left_tau)?;
        let right = clear_tau(scenario, &right_of(scenario, tau_bar_guess))?;
        Ok(BidInputs {
            tau_guess: tau_guess.clone(),
            tau_bar_guess: tau_bar_guess.clone(),
            p_elec_bar: at.p_elec,
            phi_left: left.phi,
            w_bar_right: willing_from(scenario, &right).w_bar,
        })
    }

    /// Quantity where the high stair of the special bidder ends, before `eps`.
    pub fn stair_end(&self, scenario: &Scenario, case: CaseTag) -> Rational {
        match case {
            CaseTag::CaseA { i_bar } => &scenario.producers[i_bar].e * &self.phi_left[i_bar],
            CaseTag::CaseB { .. } => &scenario.cap - &self.w_bar_right,
        }
    }
}

fn flat_level(scenario: &Scenario, k: usize, p_elec_bar: &Rational) -> Rational {
    let p = &scenario.producers[k];
    let level = (p_elec_bar - &p.c) / &p.e;
    level.max(Rational::zero()).min(scenario.penalty.clone())
}

/// The equilibrium bid profile `A*` for a given `(eps, delta)`.
pub fn build_bids(
    scenario: &Scenario,
    case: CaseTag,
    inputs: &BidInputs,
    eps: &Rational,
    delta: &Rational,
) -> Result<Vec<BidCurve>, EquilibriumError> {
    let invalid = |msg: String| Err(EquilibriumError::InvalidParameters(msg));
    if !eps.is_positive() || !delta.is_positive() {
        return invalid("eps and delta must be positive".into());
    }
    let high = &inputs.tau_bar_guess + delta;
    if high > scenario.penalty {
        return invalid(format!(
            "tau_bar_guess + delta = {} exceeds the penalty {}",
            decimal_string(&high),
            decimal_string(&scenario.penalty)
        ));
    }
    let end = inputs.stair_end(scenario, case) - eps;
    if !end.is_positive() {
        return invalid(format!(
            "eps = {} leaves no room for the high stair (end {})",
            decimal_string(eps),
            decimal_string(&end)
        ));
    }
    let two_step = |j: usize, low: &Rational| -> Result<BidCurve, CurveError> {
        let full = scenario.producers[j].full_coverage();
        if end >= full {
            BidCurve::flat(high.clone(), full)
        } else {
            BidCurve::new(vec![Stair::new(end.clone(), high.clone()), Stair::new(full, low.clone())])
        }
    };
    let mut bids = Vec::with_capacity(scenario.len());
    for (k, p) in scenario.producers.iter().enumerate() {
        let bid = match case {
            CaseTag::CaseA { i_bar } if k == i_bar => two_step(k, &inputs.tau_guess)?,
            CaseTag::CaseB { i_l, .. } if k == i_l => two_step(k, &inputs.tau_bar_guess)?,
            CaseTag::CaseB { i_r, .. } if k == i_r => BidCurve::flat(high.clone(), p.full_coverage())?,
            _ => BidCurve::flat(flat_level(scenario, k, &inputs.p_elec_bar), p.full_coverage())?,
        };
        bids.push(bid);
    }
    Ok(bids)
}

/// Search settings for [`find_eps_delta`] and [`solve`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOptions {
    /// Halvings tried for each of `eps` and `delta`.
    pub refinements: u32,
    /// Longest staircase used for deviations.
    pub max_steps: usize,
    /// Extra evenly spaced price levels added to the deviation family.
    pub grid: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            refinements: 4,
            max_steps: 2,
            grid: 4,
        }
    }
}

/// Starting points of the `(eps, delta)` grid: the smallest nonzero distance
/// between a `W` plateau and the cap, and the smallest breakpoint spacing.
pub fn search_bases(scenario: &Scenario, profile: &[TauSample]) -> (Rational, Rational) {
    let eps = profile
        .iter()
        .map(|s| (&s.willing.w - &scenario.cap).abs())
        .filter(|d| d.is_positive())
        .min()
        .unwrap_or_else(|| scenario.cap.clone());
    let bps = tau_breakpoints(scenario);
    let delta = bps
        .windows(2)
        .map(|w| &w[1] - &w[0])
        .min()
        .unwrap_or_else(|| scenario.penalty.clone());
    (eps, delta)
}

/// Everything the construction fixes before `(eps, delta)` is chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Construction {
    pub case: CaseTag,
    pub inputs: BidInputs,
    pub eps_base: Rational,
    pub delta_base: Rational,
}

impl Construction {
    pub fn new(scenario: &Scenario, profile: &[TauSample]) -> Result<Self, EquilibriumError> {
        let (tau_guess, tau_bar) = guesses_from(profile, &scenario.cap)?;
        let case = classify_case(scenario, &tau_bar)?;
        let inputs = BidInputs::compute(scenario, &tau_guess, &tau_bar)?;
        let (eps_base, delta_base) = search_bases(scenario, profile);
        Ok(Construction {
            case,
            inputs,
            eps_base,
            delta_base,
        })
    }
}

/// Strategy profile `(A*, C)` with its coupled clearing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub eps: Rational,
    pub delta: Rational,
    pub bids: Vec<BidCurve>,
    pub outcome: CoupledOutcome,
}

pub fn candidate(
    scenario: &Scenario,
    construction: &Construction,
    eps: &Rational,
    delta: &Rational,
) -> Result<Candidate, EquilibriumError> {
    let bids = build_bids(scenario, construction.case, &construction.inputs, eps, delta)?;
    let outcome = clear_coupled(scenario, &bids)?;
    Ok(Candidate {
        eps: eps.clone(),
        delta: delta.clone(),
        bids,
        outcome,
    })
}

#[derive(Debug, Clone)]
pub struct ParameterSearch {
    pub candidate: Candidate,
    pub falsifier: FalsifierReport,
    /// Pairs run through the falsifier, including the accepted one.
    pub tried: usize,
    /// Pairs rejected before clearing (invalid parameters).
    pub skipped: usize,
}

/// Walks `eps = eps_base / 2^k`, `delta = delta_base / 2^m` for
/// `k, m = 0..=refinements` (`k` outer) and returns the first pair whose
/// profile survives the deviation family.
pub fn find_eps_delta(
    scenario: &Scenario,
    construction: &Construction,
    opts: &SolveOptions,
) -> Result<ParameterSearch, EquilibriumError> {
    let mut tried = 0;
    let mut skipped = 0;
    let mut last = None;
    for k in 0..=opts.refinements {
        let eps = &construction.eps_base / Rational::from_integer(num_traits::pow(2.into(), k as usize));
        for m in 0..=opts.refinements {
            let delta =
                &construction.delta_base / Rational::from_integer(num_traits::pow(2.into(), m as usize));
            let cand = match candidate(scenario, construction, &eps, &delta) {
                Ok(c) => c,
                Err(EquilibriumError::InvalidParameters(_)) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            tried += 1;
            let family = DeviationFamily::structural(scenario, construction, &cand, opts);
            let report = check_coupled_nash(scenario, &cand, &family);
            if report.best_improvement.is_zero() {
                return Ok(ParameterSearch {
                    candidate: cand,
                    falsifier: report,
                    tried,
                    skipped,
                });
            }
            last = Some(Box::new(report));
        }
    }
    Err(EquilibriumError::NoValidatedParameters {
        tried,
        skipped,
        last,
    })
}

/// A checked claim: `expected` is what the construction promises.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub holds: bool,
    pub expected: Rational,
    pub actual: Rational,
}

impl Claim {
    fn new(expected: Rational, actual: Rational) -> Self {
        Claim {
            holds: expected == actual,
            expected,
            actual,
        }
    }
}

/// `W` around `tau_guess` and whether `W(tau_guess) = cap`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapCheck {
    pub w_left: Option<Rational>,
    pub w_at: Rational,
    pub w_right: Rational,
    pub holds: bool,
}

#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub tau_guess: Rational,
    pub tau_bar_guess: Rational,
    pub case: CaseTag,
    pub active_left: Vec<usize>,
    pub active_right: Vec<usize>,
    pub eps: Rational,
    pub delta_param: Rational,
    pub bids: Vec<BidCurve>,
    pub costs: Vec<RegulatedCost>,
    pub asks: Vec<AskCurve>,
    pub p_co2: Rational,
    pub p_elec: Rational,
    pub phi: Vec<Rational>,
    /// Allowances won.
    pub delta: Vec<Rational>,
    pub covered_emissions: Vec<Rational>,
    /// Market at the carbon cost `tau_guess`.
    pub at_tau_guess: TauOutcome,
    /// Carbon price equals `tau_guess`.
    pub claim_carbon_price: Claim,
    /// Electricity price equals `p_elec(tau_guess)`.
    pub claim_elec_price: Claim,
    /// Producers selling nothing but holding allowances.
    pub claim_zero_sales: Vec<usize>,
    pub cap_check: CapCheck,
    /// Case A: `(p_elec(t) - c_i) / e_i = t` at `tau_bar_guess` and `tau_guess`.
    pub case_a_identities: Vec<Claim>,
    /// Case B: `W - W_bar(tau_bar_guess^+)`.
    pub case_b_breakpoint: Option<Rational>,
    pub admissible: bool,
    pub falsifier: FalsifierReport,
    pub params_tried: usize,
    pub params_skipped: usize,
    /// Human-readable list of every claim that failed.
    pub discrepancies: Vec<String>,
}

impl EquilibriumReport {
    /// True when the falsifier found no improving deviation.
    pub fn verified(&self) -> bool {
        self.falsifier.witness.is_none()
    }
}

/// Full pipeline: design check, guesses, case, `(eps, delta)` search and claims.
pub fn solve(scenario: &Scenario, opts: &SolveOptions) -> Result<EquilibriumReport, EquilibriumError> {
    design_check(scenario)?;
    let profile = tau_profile(scenario)?;
    let construction = Construction::new(scenario, &profile)?;
    let search = find_eps_delta(scenario, &construction, opts)?;
    Ok(assemble(scenario, &construction, search)?)
}

/// Builds the report for an accepted (or externally chosen) candidate.
pub fn assemble(
    scenario: &Scenario,
    construction: &Construction,
    search: ParameterSearch,
) -> Result<EquilibriumReport, EquilibriumError> {
    let inputs = &construction.inputs;
    let cand = search.candidate;
    let out = &cand.outcome;
    let tau_guess = inputs.tau_guess.clone();
    let tau_bar = inputs.tau_bar_guess.clone();
    let at_tau_guess = clear_tau(scenario, &tau_guess)?;
    let (active_left, active_right) = active_around(scenario, &tau_bar)?;

    let claim_carbon_price = Claim::new(tau_guess.clone(), out.carbon.p_co2.clone());
    let claim_elec_price = Claim::new(at_tau_guess.p_elec.clone(), out.elec.p_elec.clone());
    let claim_zero_sales: Vec<usize> = out
        .elec
        .phi
        .iter()
        .zip(&out.carbon.delta)
        .enumerate()
        .filter(|(_, (q, d))| q.is_zero() && !d.is_zero())
        .map(|(j, _)| j)
        .collect();

    let w_at = willing_from(scenario, &at_tau_guess).w;
    let w_left = match left_of(scenario, &tau_guess) {
        Some(t) => Some(willing_from(scenario, &clear_tau(scenario, &t)?).w),
        None => None,
    };
    let w_right = willing_from(scenario, &clear_tau(scenario, &right_of(scenario, &tau_guess))?).w;
    let cap_check = CapCheck {
        holds: w_at == scenario.cap,
        w_left,
        w_at,
        w_right,
    };

    let mut case_a_identities = Vec::new();
    let mut case_b_breakpoint = None;
    match construction.case {
        CaseTag::CaseA { i_bar } => {
            let p = &scenario.producers[i_bar];
            for (t, price) in [
                (&tau_bar, &inputs.p_elec_bar),
                (&tau_guess, &at_tau_guess.p_elec),
            ] {
                case_a_identities.push(Claim::new(t.clone(), (price - &p.c) / &p.e));
            }
        }
        CaseTag::CaseB { .. } => {
            case_b_breakpoint = Some(&scenario.cap - &inputs.w_bar_right);
        }
    }

    let covered_emissions = scenario
        .producers
        .iter()
        .zip(&out.elec.phi)
        .zip(&out.carbon.delta)
        .map(|((p, q), d)| (&p.e * q).min(d.clone()))
        .collect();
    let admissible = check_admissible(&out.asks, &out.costs).is_ok();

    let mut discrepancies = Vec::new();
    if !claim_carbon_price.holds {
        discrepancies.push(format!(
            "carbon price {} differs from tau_guess {}",
            decimal_string(&claim_carbon_price.actual),
            decimal_string(&claim_carbon_price.expected)
        ));
    }
    if !claim_elec_price.holds {
        discrepancies.push(format!(
            "electricity price {} differs from p_elec(tau_guess) = {}",
            decimal_string(&claim_elec_price.actual),
            decimal_string(&claim_elec_price.expected)
        ));
    }
    for j in &claim_zero_sales {
        discrepancies.push(format!(
            "producer {} sells nothing but holds {} allowances",
            scenario.producers[*j].name,
            decimal_string(&out.carbon.delta[*j])
        ));
    }
    if !cap_check.holds {
        discrepancies.push(format!(
            "W(tau_guess) = {} differs from the cap {} (W is discontinuous there)",
            decimal_string(&cap_check.w_at),
            decimal_string(&scenario.cap)
        ));
    }
    for (label, c) in ["tau_bar_guess", "tau_guess"].iter().zip(&case_a_identities) {
        if !c.holds {
            discrepancies.push(format!(
                "(p_elec({label}) - c) / e = {} differs from {label} = {}",
                decimal_string(&c.actual),
                decimal_string(&c.expected)
            ));
        }
    }
    if let Some(b) = &case_b_breakpoint {
        if b.is_negative() {
            discrepancies.push(format!(
                "W - W_bar(tau_bar_guess^+) = {} is negative",
                decimal_string(b)
            ));
        }
    }
    if !admissible {
        discrepancies.push("equilibrium asks are not admissible".into());
    }

    Ok(EquilibriumReport {
        tau_guess,
        tau_bar_guess: tau_bar,
        case: construction.case,
        active_left,
        active_right,
        eps: cand.eps.clone(),
        delta_param: cand.delta.clone(),
        bids: cand.bids.clone(),
        costs: out.costs.clone(),
        asks: out.asks.clone(),
        p_co2: out.carbon.p_co2.clone(),
        p_elec: out.elec.p_elec.clone(),
        phi: out.elec.phi.clone(),
        delta: out.carbon.delta.clone(),
        covered_emissions,
        at_tau_guess,
        claim_carbon_price,
        claim_elec_price,
        claim_zero_sales,
        cap_check,
        case_a_identities,
        case_b_breakpoint,
        admissible,
        falsifier: search.falsifier,
        params_tried: search.tried,
        params_skipped: search.skipped,
        discrepancies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::Producer;
    use crate::curves::DemandCurve;
    use crate::rational::ratio;

    pub(crate) fn s0(cap: i64) -> Scenario {
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

    #[test]
    fn flat_cost_dominant_strategy() {
        let ask = dominant_strategy(&CostCurve::flat(int(10), int(5)).unwrap(), &int(200)).unwrap();
        assert_eq!(ask.eval(&int(5)), int(10));
        assert_eq!(ask.eval(&int(6)), int(200));
    }

    #[test]
    fn s0_tau_clearing() {
        let s = s0(12);
        let zero = tau_clearing(&s, &int(0)).unwrap();
        assert_eq!(zero.p_elec, int(40));
        assert_eq!(zero.phi, vec![int(10), int(10)]);
        let fifteen = tau_clearing(&s, &int(15)).unwrap();
        assert_eq!(fifteen.p_elec, int(42));
        assert_eq!(fifteen.phi, vec![int(10), int(0)]);
        assert_eq!(fifteen.active, vec![0]);
        assert!(tau_clearing(&s, &int(31)).is_err());
    }

    #[test]
    fn s0_willing_to_buy() {
        let s = s0(12);
        let w0 = willing_to_buy(&s, &int(0)).unwrap();
        assert_eq!((w0.w, w0.w_bar), (int(30), int(30)));
        let w15 = willing_to_buy(&s, &int(15)).unwrap();
        assert_eq!((w15.w, w15.w_bar), (int(10), int(10)));
    }

    #[test]
    fn s0_breakpoints() {
        let bps = tau_breakpoints(&s0(12));
        assert!(bps.contains(&int(14)));
        assert_eq!(bps.first(), Some(&int(0)));
        assert_eq!(bps.last(), Some(&int(30)));
    }

    #[test]
    fn s0_guesses_and_case() {
        let s = s0(12);
        assert_eq!(guess_prices(&s).unwrap(), (int(14), int(14)));
        assert_eq!(classify_case(&s, &int(14)).unwrap(), CaseTag::CaseA { i_bar: 1 });
    }

    #[test]
    fn design_rejections() {
        assert!(matches!(
            design_check(&s0(35)),
            Err(EquilibriumError::Design(DesignRejection::TooManyAllowances { .. }))
        ));
        assert!(matches!(
            design_check(&s0(5)),
            Err(EquilibriumError::Design(DesignRejection::TooFewAllowances { .. }))
        ));
        assert!(design_check(&s0(12)).is_ok());
    }

    #[test]
    fn s0_bids() {
        let s = s0(12);
        let inputs = BidInputs::compute(&s, &int(14), &int(14)).unwrap();
        assert_eq!(inputs.p_elec_bar, int(40));
        let bids = build_bids(&s, CaseTag::CaseA { i_bar: 1 }, &inputs, &ratio(1, 2), &int(1)).unwrap();
        assert_eq!(
            bids[1].stairs(),
            &[Stair::new(ratio(39, 2), int(15)), Stair::new(int(20), int(14))]
        );
        assert_eq!(bids[0].stairs(), &[Stair::new(int(10), int(30))]);
    }

    #[test]
    fn oversized_parameters_rejected() {
        let s = s0(12);
        let inputs = BidInputs::compute(&s, &int(14), &int(14)).unwrap();
        let case = CaseTag::CaseA { i_bar: 1 };
        assert!(matches!(
            build_bids(&s, case, &inputs, &int(20), &int(1)),
            Err(EquilibriumError::InvalidParameters(_))
        ));
        assert!(matches!(
            build_bids(&s, case, &inputs, &int(1), &int(17)),
            Err(EquilibriumError::InvalidParameters(_))
        ));
    }

    #[test]
    fn negative_levels_clamp_to_zero() {
        let s = Scenario::new(
            vec![
                Producer::new("cheap", int(1), int(1), int(10)).unwrap(),
                Producer::new("dear", int(50), int(1), int(10)).unwrap(),
            ],
            DemandCurve::linear(vec![(int(0), int(60)), (int(60), int(0))]).unwrap(),
            int(5),
            int(30),
            int(100),
        )
        .unwrap();
        assert_eq!(flat_level(&s, 1, &int(20)), int(0));
    }
}
