//! Numerical falsification of the game-theoretic claims.
//!
//! Every check searches a finite family of deviations or random profiles. A
//! clean report means no counterexample was found in that family; it is not a
//! proof.

use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::carbon_auction::clear_auction;
use crate::coupling::{
    check_admissible, clear_coupled_with, regulated_costs, CostCurve, CoupledOutcome, Scenario,
};
use crate::curves::{AskCurve, BidCurve, CurveError, DemandCurve, Stair};
use crate::equilibrium::{tau_profile, Candidate, Construction, EquilibriumError, SolveOptions};
use crate::power_exchange::{clear_market, clear_market_with, ElecOutcome, Proportional, RationingRule};
use crate::rational::{int, midpoint, ratio, Rational};

pub const FAMILY_NOTE: &str =
    "no counterexample in the deviation family; the family is finite, so this is not a proof";

/// Finite set of staircase deviations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviationFamily {
    /// Candidate levels, used for bids (those in `[0, penalty]`) and ask floors.
    pub price_levels: Vec<Rational>,
    /// Candidate allowance quantities for bid stairs.
    pub quantity_breaks: Vec<Rational>,
    pub max_steps: usize,
}

fn sorted_unique(mut v: Vec<Rational>) -> Vec<Rational> {
    v.retain(|x| !x.is_negative());
    v.sort();
    v.dedup();
    v
}

impl DeviationFamily {
    pub fn new(price_levels: Vec<Rational>, quantity_breaks: Vec<Rational>, max_steps: usize) -> Self {
        let mut quantity_breaks = sorted_unique(quantity_breaks);
        quantity_breaks.retain(|q| q.is_positive());
        DeviationFamily {
            price_levels: sorted_unique(price_levels),
            quantity_breaks,
            max_steps: max_steps.max(1),
        }
    }

    /// Levels and quantities read off the construction and the candidate.
    pub fn structural(
        scenario: &Scenario,
        construction: &Construction,
        cand: &Candidate,
        opts: &SolveOptions,
    ) -> Self {
        let inputs = &construction.inputs;
        let tau_bar = &inputs.tau_bar_guess;
        let penalty = &scenario.penalty;
        let high = tau_bar + &cand.delta;

        let mut bid_levels = vec![
            Rational::zero(),
            penalty.clone(),
            inputs.tau_guess.clone(),
            tau_bar.clone(),
            high.clone(),
            midpoint(tau_bar, &high),
            tau_bar - &cand.delta,
            cand.outcome.carbon.p_co2.clone(),
        ];
        bid_levels.extend(crate::equilibrium::tau_breakpoints(scenario));
        for p in &scenario.producers {
            bid_levels.push((&inputs.p_elec_bar - &p.c) / &p.e);
        }
        let grid = opts.grid.max(1) as i64;
        bid_levels.extend((0..=grid).map(|i| penalty * ratio(i, grid)));
        bid_levels.retain(|l| !l.is_negative() && l <= penalty);
        let mut bid_levels = sorted_unique(bid_levels);
        let mids: Vec<Rational> = bid_levels.windows(2).map(|w| midpoint(&w[0], &w[1])).collect();
        bid_levels.extend(mids);

        let p_elec = &cand.outcome.elec.p_elec;
        let mut ask_levels = vec![scenario.p_lolc.clone(), inputs.p_elec_bar.clone(), p_elec.clone()];
        let step = &scenario.p_lolc / int(grid * 8);
        for h in [step.clone(), step / int(4)] {
            ask_levels.push(p_elec + &h);
            ask_levels.push(p_elec - &h);
            ask_levels.push(&inputs.p_elec_bar + &h);
            ask_levels.push(&inputs.p_elec_bar - &h);
        }
        for p in &scenario.producers {
            for t in [&Rational::zero(), &inputs.tau_guess, tau_bar, &high, penalty] {
                ask_levels.push(p.cost_at(t));
            }
        }

        let eps = &cand.eps;
        let mut breaks = vec![scenario.cap.clone(), &scenario.cap - &inputs.w_bar_right];
        for (j, p) in scenario.producers.iter().enumerate() {
            breaks.push(p.full_coverage());
            breaks.push(&p.e * &inputs.phi_left[j]);
            breaks.push(&p.e * &cand.outcome.elec.phi[j]);
            breaks.push(cand.outcome.carbon.delta[j].clone());
        }
        let base: Vec<Rational> = breaks.clone();
        for b in base {
            breaks.push(&b + eps);
            breaks.push(&b - eps);
        }

        let mut levels = bid_levels;
        levels.extend(ask_levels);
        levels.retain(|l| l <= &scenario.p_lolc);
        DeviationFamily::new(levels, breaks, opts.max_steps)
    }

    /// Every decreasing bid staircase with at most `max_steps` stairs whose
    /// levels lie in `[0, cap_level]` and quantities in `(0, w_max]`.
    pub fn bids(&self, w_max: &Rational, cap_level: &Rational) -> Vec<BidCurve> {
        let levels: Vec<&Rational> = self.price_levels.iter().filter(|l| *l <= cap_level).collect();
        let mut qs: Vec<&Rational> = self.quantity_breaks.iter().filter(|q| *q <= w_max).collect();
        if qs.last().map(|q| *q != w_max).unwrap_or(true) {
            qs.push(w_max);
        }
        let mut out = Vec::new();
        for k in 1..=self.max_steps {
            for qi in combinations(qs.len(), k) {
                for li in combinations(levels.len(), k) {
                    let stairs = qi
                        .iter()
                        .zip(li.iter().rev())
                        .map(|(&q, &l)| Stair::new(qs[q].clone(), levels[l].clone()))
                        .collect();
                    if let Ok(b) = BidCurve::new(stairs) {
                        out.push(b);
                    }
                }
            }
        }
        out
    }

    /// Ask rules applied to a producer's realized cost.
    pub fn ask_rules(&self, e: &Rational, kappa: &Rational) -> Vec<AskRule> {
        let mut rules = vec![AskRule::Marginal];
        rules.extend(self.price_levels.iter().cloned().map(AskRule::Floor));
        for b in &self.quantity_breaks {
            let q = b / e;
            if &q < kappa {
                rules.push(AskRule::Withhold(q));
            }
        }
        rules
    }
}

/// Increasing index tuples of length `k` from `0..n`.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// How a deviating producer turns its realized cost into an ask. All rules
/// stay at or above the cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AskRule {
    Marginal,
    /// `max(cost(q), level)`.
    Floor(Rational),
    /// Marginal cost up to `q`, the rest at `p_lolc`.
    Withhold(Rational),
}

impl AskRule {
    pub fn apply(&self, cost: &CostCurve, p_lolc: &Rational) -> Result<AskCurve, CurveError> {
        match self {
            AskRule::Marginal => cost.marginal_cost_ask(p_lolc),
            AskRule::Floor(level) => {
                let level = level.clone().min(p_lolc.clone());
                let stairs = cost
                    .stairs()
                    .iter()
                    .map(|s| Stair::new(s.upto.clone(), s.price.clone().max(level.clone())))
                    .collect();
                AskCurve::new(stairs, p_lolc.clone())
            }
            AskRule::Withhold(q) => {
                let mut stairs: Vec<Stair> = Vec::new();
                for s in cost.stairs() {
                    let start = stairs.last().map(|s| s.upto.clone()).unwrap_or_else(Rational::zero);
                    if &start >= q {
                        break;
                    }
                    stairs.push(Stair::new(s.upto.clone().min(q.clone()), s.price.clone()));
                }
                if stairs.is_empty() {
                    return AskCurve::flat(p_lolc.clone(), cost.kappa().clone(), p_lolc.clone());
                }
                if &stairs.last().expect("non-empty").upto < cost.kappa() {
                    stairs.push(Stair::new(cost.kappa().clone(), p_lolc.clone()));
                }
                AskCurve::new(stairs, p_lolc.clone())
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            AskRule::Marginal => "marginal cost".into(),
            AskRule::Floor(l) => format!("max(cost, {})", crate::rational::decimal_string(l)),
            AskRule::Withhold(q) => format!("marginal cost up to {}", crate::rational::decimal_string(q)),
        }
    }
}

/// Both clearings replayed for a witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replay {
    pub p_co2: Rational,
    pub delta: Vec<Rational>,
    pub p_elec: Rational,
    pub phi: Vec<Rational>,
}

impl From<&CoupledOutcome> for Replay {
    fn from(o: &CoupledOutcome) -> Self {
        Replay {
            p_co2: o.carbon.p_co2.clone(),
            delta: o.carbon.delta.clone(),
            p_elec: o.elec.p_elec.clone(),
            phi: o.elec.phi.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub producer: usize,
    pub bid: BidCurve,
    pub ask_rule: AskRule,
    pub ask: AskCurve,
    pub baseline_phi: Rational,
    pub deviated_phi: Rational,
    pub replay: Replay,
    /// Re-running both clearings gave the same market share.
    pub replay_confirms: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FalsifierReport {
    pub checked_count: usize,
    /// Deviations that could not be evaluated (inadmissible or invalid).
    pub skipped: usize,
    pub best_improvement: Rational,
    pub witness: Option<Witness>,
    pub levels: usize,
    pub quantity_breaks: usize,
    pub max_steps: usize,
    pub note: &'static str,
}

#[derive(Debug, Clone)]
struct Best {
    improvement: Rational,
    key: (usize, usize, usize),
}

fn better(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            if b.improvement > a.improvement || (b.improvement == a.improvement && b.key < a.key) {
                Some(b)
            } else {
                Some(a)
            }
        }
    }
}

/// Unilateral deviations in both markets against the candidate profile.
///
/// The deviator's bid changes the carbon clearing, hence every producer's
/// regulated cost; the other producers keep asking their marginal cost, and the
/// deviator applies one of the family's ask rules to its own new cost.
pub fn check_coupled_nash(scenario: &Scenario, cand: &Candidate, family: &DeviationFamily) -> FalsifierReport {
    let baseline = &cand.outcome.elec.phi;
    let p_lolc = &scenario.p_lolc;
    let mut jobs: Vec<(usize, usize, BidCurve)> = Vec::new();
    let mut rules: Vec<Vec<AskRule>> = Vec::new();
    for (j, p) in scenario.producers.iter().enumerate() {
        let mut bids = vec![cand.bids[j].clone()];
        bids.extend(family.bids(&p.full_coverage(), &scenario.penalty));
        jobs.extend(bids.into_iter().enumerate().map(|(i, b)| (j, i, b)));
        rules.push(family.ask_rules(&p.e, &p.kappa));
    }

    let (best, checked, skipped) = jobs
        .par_iter()
        .map(|(j, bi, bid)| {
            let mut bids = cand.bids.clone();
            bids[*j] = bid.clone();
            let mut best = None;
            let mut checked = 0usize;
            let mut skipped = 0usize;
            let carbon = match clear_auction(&bids, &scenario.cap) {
                Ok(c) => c,
                Err(_) => return (None, 0, rules[*j].len()),
            };
            let costs = match regulated_costs(scenario, &carbon) {
                Ok(c) => c,
                Err(_) => return (None, 0, rules[*j].len()),
            };
            let mut asks: Vec<AskCurve> = costs
                .iter()
                .map(|c| c.marginal_cost_ask(p_lolc).expect("regulated costs stay below p_lolc"))
                .collect();
            let mut seen: Vec<AskCurve> = Vec::new();
            let lowest = &costs[*j].stairs()[0].price;
            for (ri, rule) in rules[*j].iter().enumerate() {
                if matches!(rule, AskRule::Floor(l) if l <= lowest) {
                    continue;
                }
                let ask = match rule.apply(&costs[*j], p_lolc) {
                    Ok(a) => a,
                    Err(_) => {
                        skipped += 1;
                        continue;
                    }
                };
                if seen.contains(&ask) {
                    continue;
                }
                if check_admissible(std::slice::from_ref(&ask), std::slice::from_ref(&costs[*j])).is_err() {
                    skipped += 1;
                    continue;
                }
                seen.push(ask.clone());
                asks[*j] = ask;
                let elec = match clear_market(&asks, &scenario.demand, p_lolc) {
                    Ok(e) => e,
                    Err(_) => {
                        skipped += 1;
                        continue;
                    }
                };
                checked += 1;
                let improvement = &elec.phi[*j] - &baseline[*j];
                best = better(
                    best,
                    Some(Best {
                        improvement,
                        key: (*j, *bi, ri),
                    }),
                );
            }
            (best, checked, skipped)
        })
        .reduce(
            || (None, 0, 0),
            |a, b| (better(a.0, b.0), a.1 + b.1, a.2 + b.2),
        );

    let mut best_improvement = Rational::zero();
    let mut witness = None;
    if let Some(b) = best {
        if b.improvement.is_positive() {
            best_improvement = b.improvement.clone();
            let (j, bi, ri) = b.key;
            let bid = jobs
                .iter()
                .find(|(jj, ii, _)| *jj == j && *ii == bi)
                .map(|(_, _, b)| b.clone())
                .expect("witness bid comes from the job list");
            let rule = rules[j][ri].clone();
            let mut bids = cand.bids.clone();
            bids[j] = bid.clone();
            let replayed = clear_coupled_with(scenario, &bids, |k, cost| {
                if k == j {
                    rule.apply(cost, p_lolc)
                } else {
                    cost.marginal_cost_ask(p_lolc)
                }
            })
            .expect("witness replays");
            let deviated_phi = replayed.elec.phi[j].clone();
            witness = Some(Witness {
                producer: j,
                bid,
                ask: replayed.asks[j].clone(),
                ask_rule: rule,
                baseline_phi: baseline[j].clone(),
                replay_confirms: &deviated_phi - &baseline[j] == best_improvement,
                deviated_phi,
                replay: Replay::from(&replayed),
            });
        }
    }
    FalsifierReport {
        checked_count: checked,
        skipped,
        best_improvement,
        witness,
        levels: family.price_levels.len(),
        quantity_breaks: family.quantity_breaks.len(),
        max_steps: family.max_steps,
        note: FAMILY_NOTE,
    }
}

/// Runs the structural deviation family against a given bid profile, every
/// producer asking its marginal regulated cost.
pub fn check_bid_profile(
    scenario: &Scenario,
    bids: &[BidCurve],
    opts: &SolveOptions,
) -> Result<FalsifierReport, EquilibriumError> {
    let profile = tau_profile(scenario)?;
    let construction = Construction::new(scenario, &profile)?;
    let outcome = crate::coupling::clear_coupled(scenario, bids)?;
    let cand = Candidate {
        eps: construction.eps_base.clone(),
        delta: construction.delta_base.clone(),
        bids: bids.to_vec(),
        outcome,
    };
    let family = DeviationFamily::structural(scenario, &construction, &cand, opts);
    Ok(check_coupled_nash(scenario, &cand, &family))
}

/// Electricity-only game: costs are fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedCostGame {
    pub costs: Vec<CostCurve>,
    pub demand: DemandCurve,
    pub p_lolc: Rational,
}

impl FixedCostGame {
    pub fn marginal_cost_asks(&self) -> Vec<AskCurve> {
        self.costs
            .iter()
            .map(|c| c.marginal_cost_ask(&self.p_lolc).expect("costs stay below p_lolc"))
            .collect()
    }

    pub fn clear(&self, asks: &[AskCurve], rule: &dyn RationingRule) -> ElecOutcome {
        clear_market_with(asks, &self.demand, &self.p_lolc, rule).expect("admissible asks clear")
    }
}

/// A random ask at or above `cost`: up to `max_stairs` stairs on a grid of
/// eighths of capacity, each at the cost's top level on the stair plus a random
/// markup, sometimes withholding the tail at `p_lolc`.
pub fn random_admissible_ask(
    cost: &CostCurve,
    p_lolc: &Rational,
    rng: &mut impl Rng,
    max_stairs: usize,
) -> AskCurve {
    let kappa = cost.kappa();
    loop {
        let n = rng.gen_range(1..=max_stairs.max(1));
        let mut grid: Vec<i64> = (1..8).collect();
        grid.shuffle(rng);
        let mut cuts: Vec<Rational> = grid[..n - 1].iter().map(|&i| kappa * ratio(i, 8)).collect();
        cuts.sort();
        cuts.push(kappa.clone());
        let mut stairs = Vec::with_capacity(n);
        for upto in cuts {
            let floor = cost.eval(&upto).expect("inside the domain").clone();
            let level = if rng.gen_bool(1.0 / 3.0) {
                floor
            } else {
                let r = ratio(rng.gen_range(0..=8), 8);
                &floor + (p_lolc - &floor) * r
            };
            stairs.push(Stair::new(upto, level));
        }
        if rng.gen_bool(0.2) && stairs.len() > 1 {
            stairs.pop();
        }
        let ask = AskCurve::new(stairs, p_lolc.clone()).expect("levels within [cost, p_lolc]");
        if check_admissible(std::slice::from_ref(&ask), std::slice::from_ref(cost)).is_ok() {
            return ask;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DominanceWitness {
    pub sample: usize,
    pub producer: usize,
    pub asks: Vec<AskCurve>,
    pub phi_profile: Rational,
    pub phi_marginal: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DominanceReport {
    /// Producer-profile pairs compared.
    pub checked_count: usize,
    pub violations: usize,
    /// Largest `phi_j(s) - phi_j(s_-j; C_j)`, zero when never positive.
    pub worst: Rational,
    /// The largest loss.
    pub witness: Option<DominanceWitness>,
    /// Every loss, in sample order.
    pub losses: Vec<DominanceWitness>,
}

/// Compares `phi_j(s)` with `phi_j(s_-j; C_j)` over random admissible profiles.
pub fn check_dominance(game: &FixedCostGame, samples: usize, seed: u64) -> DominanceReport {
    check_dominance_with(game, samples, seed, 4, &Proportional)
}

pub fn check_dominance_with(
    game: &FixedCostGame,
    samples: usize,
    seed: u64,
    max_stairs: usize,
    rule: &dyn RationingRule,
) -> DominanceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profiles: Vec<Vec<AskCurve>> = (0..samples)
        .map(|_| {
            game.costs
                .iter()
                .map(|c| random_admissible_ask(c, &game.p_lolc, &mut rng, max_stairs))
                .collect()
        })
        .collect();
    let marginal = game.marginal_cost_asks();
    let results: Vec<(usize, usize, Rational, Rational)> = profiles
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, asks)| {
            let base = game.clear(asks, rule);
            (0..asks.len())
                .map(|j| {
                    let mut dev = asks.clone();
                    dev[j] = marginal[j].clone();
                    let after = game.clear(&dev, rule);
                    (i, j, base.phi[j].clone(), after.phi[j].clone())
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut report = DominanceReport {
        checked_count: results.len(),
        violations: 0,
        worst: Rational::zero(),
        witness: None,
        losses: Vec::new(),
    };
    for (i, j, before, after) in results {
        let loss = &before - &after;
        if loss.is_positive() {
            report.violations += 1;
            let w = DominanceWitness {
                sample: i,
                producer: j,
                asks: profiles[i].clone(),
                phi_profile: before,
                phi_marginal: after,
            };
            if loss > report.worst {
                report.worst = loss;
                report.witness = Some(w.clone());
            }
            report.losses.push(w);
        }
    }
    report
}

/// Ask deviations for the electricity-only scan.
fn fixed_cost_rules(cost: &CostCurve, levels: &[Rational]) -> Vec<AskRule> {
    let mut rules = vec![AskRule::Marginal];
    rules.extend(levels.iter().cloned().map(AskRule::Floor));
    let kappa = cost.kappa();
    for s in cost.stairs() {
        if &s.upto < kappa {
            rules.push(AskRule::Withhold(s.upto.clone()));
        }
    }
    for i in 1..4 {
        rules.push(AskRule::Withhold(kappa * ratio(i, 4)));
    }
    rules
}

/// First improving unilateral ask deviation in the family, if any.
pub fn improving_deviation(
    game: &FixedCostGame,
    asks: &[AskCurve],
    levels: &[Rational],
) -> Option<(usize, AskRule)> {
    let base = game.clear(asks, &Proportional);
    for (j, cost) in game.costs.iter().enumerate() {
        for rule in fixed_cost_rules(cost, levels) {
            let mut dev = asks.to_vec();
            dev[j] = rule.apply(cost, &game.p_lolc).expect("rules stay within bounds");
            if game.clear(&dev, &Proportional).phi[j] > base.phi[j] {
                return Some((j, rule));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub profile: usize,
    pub p_elec: Rational,
    pub phi: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniquenessReport {
    pub reference: ElecOutcome,
    /// Profiles that passed the deviation scan.
    pub compared: usize,
    /// Profiles with an improving deviation; not part of the comparison.
    pub excluded: Vec<usize>,
    pub mismatches: Vec<Mismatch>,
}

impl UniquenessReport {
    pub fn consistent(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares the outcome of every no-improving-deviation profile with the
/// outcome of the marginal-cost profile.
pub fn check_equilibrium_uniqueness(
    game: &FixedCostGame,
    profiles: &[Vec<AskCurve>],
    levels: &[Rational],
) -> UniquenessReport {
    let reference = game.clear(&game.marginal_cost_asks(), &Proportional);
    let verdicts: Vec<(usize, Option<ElecOutcome>)> = profiles
        .par_iter()
        .enumerate()
        .map(|(i, asks)| {
            if improving_deviation(game, asks, levels).is_some() {
                (i, None)
            } else {
                (i, Some(game.clear(asks, &Proportional)))
            }
        })
        .collect();
    let mut report = UniquenessReport {
        reference,
        compared: 0,
        excluded: Vec::new(),
        mismatches: Vec::new(),
    };
    for (i, out) in verdicts {
        match out {
            None => report.excluded.push(i),
            Some(out) => {
                report.compared += 1;
                if out.p_elec != report.reference.p_elec || out.phi != report.reference.phi {
                    report.mismatches.push(Mismatch {
                        profile: i,
                        p_elec: out.p_elec,
                        phi: out.phi,
                    });
                }
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotonicityViolation {
    pub quantity: &'static str,
    pub tau_before: Rational,
    pub tau_after: Rational,
    pub before: Rational,
    pub after: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub violations: Vec<MonotonicityViolation>,
}

/// `p_elec(tau)` must not decrease and total sales must not increase along
/// the sorted samples.
pub fn check_monotonicity(scenario: &Scenario, taus: &[Rational]) -> Result<MonotonicityReport, EquilibriumError> {
    let mut taus = taus.to_vec();
    taus.sort();
    taus.dedup();
    let outs = taus
        .par_iter()
        .map(|t| crate::equilibrium::tau_clearing(scenario, t))
        .collect::<Result<Vec<_>, _>>()?;
    let mut violations = Vec::new();
    for w in outs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.p_elec < a.p_elec {
            violations.push(MonotonicityViolation {
                quantity: "p_elec",
                tau_before: a.tau.clone(),
                tau_after: b.tau.clone(),
                before: a.p_elec.clone(),
                after: b.p_elec.clone(),
            });
        }
        if b.total_sold() > a.total_sold() {
            violations.push(MonotonicityViolation {
                quantity: "total_sold",
                tau_before: a.tau.clone(),
                tau_after: b.tau.clone(),
                before: a.total_sold(),
                after: b.total_sold(),
            });
        }
    }
    Ok(MonotonicityReport {
        samples: outs.len(),
        violations,
    })
}

/// Breakpoints and midpoints in `[0, penalty]`.
pub fn monotonicity_samples(scenario: &Scenario) -> Result<Vec<Rational>, EquilibriumError> {
    Ok(tau_profile(scenario)?
        .into_iter()
        .map(|s| s.outcome.tau)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::Producer;

    fn s0() -> Scenario {
        Scenario::new(
            vec![
                Producer::new("P1", int(10), int(1), int(10)).unwrap(),
                Producer::new("P2", int(12), int(2), int(10)).unwrap(),
            ],
            DemandCurve::linear(vec![(int(0), int(60)), (int(60), int(0))]).unwrap(),
            int(12),
            int(30),
            int(100),
        )
        .unwrap()
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert!(combinations(2, 3).is_empty());
    }

    #[test]
    fn ask_rules_stay_admissible() {
        let cost = CostCurve::new(vec![Stair::new(int(4), int(20)), Stair::new(int(10), int(50))]).unwrap();
        for rule in [
            AskRule::Marginal,
            AskRule::Floor(int(30)),
            AskRule::Floor(int(500)),
            AskRule::Withhold(int(2)),
            AskRule::Withhold(int(6)),
        ] {
            let ask = rule.apply(&cost, &int(100)).unwrap();
            assert!(check_admissible(&[ask], &[cost.clone()]).is_ok(), "{rule:?}");
        }
        let w = AskRule::Withhold(int(6)).apply(&cost, &int(100)).unwrap();
        assert_eq!(w.eval(&int(5)), int(50));
        assert_eq!(w.eval(&int(7)), int(100));
    }

    #[test]
    fn bid_family_is_decreasing_and_bounded() {
        let fam = DeviationFamily::new(vec![int(0), int(5), int(40)], vec![int(2), int(8)], 2);
        let bids = fam.bids(&int(8), &int(30));
        assert!(!bids.is_empty());
        for b in &bids {
            assert!(b.w_max() <= &int(8));
            assert!(b.stairs().iter().all(|s| s.price <= int(30)));
        }
        // 1 step: 2 quantities x 2 levels; 2 steps: 1 x 1
        assert_eq!(bids.len(), 5);
    }

    #[test]
    fn marginal_profile_has_no_dominance_violation() {
        let game = FixedCostGame {
            costs: vec![CostCurve::flat(int(10), int(5)).unwrap(), CostCurve::flat(int(20), int(5)).unwrap()],
            demand: DemandCurve::step(vec![(int(0), int(8)), (int(30), int(2)), (int(60), int(0))]).unwrap(),
            p_lolc: int(100),
        };
        let r = check_dominance(&game, 50, 7);
        assert_eq!(r.violations, 0);
        assert_eq!(r.checked_count, 100);
        assert_eq!(r, check_dominance(&game, 50, 7));
    }

    #[test]
    fn monotone_in_s0() {
        let s = s0();
        let taus = monotonicity_samples(&s).unwrap();
        let r = check_monotonicity(&s, &taus).unwrap();
        assert!(r.violations.is_empty());
        assert_eq!(r.samples, taus.len());
    }
}
