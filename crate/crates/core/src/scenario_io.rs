//! Scenario files and machine-readable results.
//!
//! Scenarios are TOML documents. Every number is written either as a TOML
//! integer or as a string holding a decimal (`"12.5"`) or a fraction
//! (`"25/2"`); TOML floats are rejected so that no value passes through binary
//! floating point.
//!
//! ```toml
//! [market]
//! W = "12"
//! penalty = "30"
//! p_lolc = "100"
//!
//! [[producers]]
//! name = "P1"
//! c = "10"
//! e = "1"
//! kappa = "10"
//!
//! [demand]
//! kind = "piecewise_linear"
//! points = [["0", "60"], ["60", "0"]]
//! ```
//!
//! Results are emitted as JSON with sorted keys; each rational is an object
//! `{"exact": "num/den", "approx": <f64>}`.

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};
use toml::Spanned;

use crate::carbon_auction::CarbonOutcome;
use crate::coupling::{Producer, Scenario, ScenarioError};
use crate::curves::{AskCurve, BidCurve, CurveError, DemandCurve, DemandPiece, Stair};
use crate::equilibrium::{CaseTag, Claim, EquilibriumReport, TauOutcome, WillingToBuy};
use crate::power_exchange::ElecOutcome;
use crate::rational::{decimal_string, exact_string, parse_rational, to_f64, Rational};
use crate::verifier::{
    DominanceReport, FalsifierReport, MonotonicityReport, UniquenessReport, Witness,
};

/// A parse or validation problem, anchored to a 1-based line when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IoError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for IoError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawNumber {
    Int(i64),
    Text(String),
    Float(f64),
}

type Num = Spanned<RawNumber>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    market: Spanned<RawMarket>,
    producers: Vec<Spanned<RawProducer>>,
    demand: Spanned<RawDemand>,
    verify: Option<RawVerify>,
    bids: Option<Vec<Spanned<RawBid>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarket {
    #[serde(rename = "W")]
    cap: Num,
    penalty: Num,
    p_lolc: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProducer {
    name: String,
    c: Num,
    e: Num,
    kappa: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDemand {
    kind: Spanned<String>,
    points: Vec<Vec<Num>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    seed: Option<u64>,
    samples: Option<usize>,
    max_steps: Option<usize>,
    grid: Option<usize>,
    refinements: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBid {
    producer: String,
    /// `[upto, price]` pairs.
    stairs: Vec<Vec<Num>>,
}

/// Falsifier settings read from the optional `[verify]` table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifySettings {
    pub seed: u64,
    pub samples: usize,
    pub max_steps: usize,
    pub grid: usize,
    pub refinements: u32,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            seed: 0,
            samples: 200,
            max_steps: 2,
            grid: 4,
            refinements: 4,
        }
    }
}

/// A parsed scenario document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub verify: VerifySettings,
    /// Optional carbon bids, one per producer in producer order.
    pub bids: Option<Vec<BidCurve>>,
}

struct Lines<'a> {
    text: &'a str,
}

impl Lines<'_> {
    fn line_of(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, span: std::ops::Range<usize>, message: impl Into<String>) -> IoError {
        let _ = std::marker::PhantomData::<T>;
        IoError {
            line: Some(self.line_of(span.start)),
            message: message.into(),
        }
    }

    fn number(&self, n: &Num, what: &str) -> Result<Rational, IoError> {
        match n.get_ref() {
            RawNumber::Int(i) => Ok(Rational::from_integer((*i).into())),
            RawNumber::Text(s) => {
                parse_rational(s).map_err(|e| self.err::<()>(n.span(), format!("{what}: {e}")))
            }
            RawNumber::Float(f) => Err(self.err::<()>(
                n.span(),
                format!("{what}: float {f} is not allowed; write it as a string such as \"{f}\""),
            )),
        }
    }

    fn pair(&self, row: &[Num], what: &str, span: std::ops::Range<usize>) -> Result<(Rational, Rational), IoError> {
        match row {
            [a, b] => Ok((self.number(a, what)?, self.number(b, what)?)),
            _ => Err(self.err::<()>(span, format!("{what}: expected [x, y] pairs"))),
        }
    }
}

fn describe_curve_error(e: &CurveError) -> String {
    match e {
        CurveError::NoDemandAtZero => "demand at price 0 must be positive".into(),
        other => other.to_string(),
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario_str(text: &str) -> Result<ScenarioFile, IoError> {
    let lines = Lines { text };
    let raw: RawFile = toml::from_str(text).map_err(|e| IoError {
        line: e.span().map(|s| lines.line_of(s.start)),
        message: e.message().trim().to_string(),
    })?;

    let market = raw.market.get_ref();
    let cap = lines.number(&market.cap, "W")?;
    let penalty = lines.number(&market.penalty, "penalty")?;
    let p_lolc = lines.number(&market.p_lolc, "p_lolc")?;

    let mut producers = Vec::with_capacity(raw.producers.len());
    for sp in &raw.producers {
        let p = sp.get_ref();
        let producer = Producer::new(
            p.name.clone(),
            lines.number(&p.c, "c")?,
            lines.number(&p.e, "e")?,
            lines.number(&p.kappa, "kappa")?,
        )
        .map_err(|e| lines.err::<()>(sp.span(), e.to_string()))?;
        producers.push(producer);
    }

    let demand_raw = raw.demand.get_ref();
    let demand_span = raw.demand.span();
    let demand = match demand_raw.kind.get_ref().as_str() {
        "step" | "piecewise_linear" => {
            let points = demand_raw
                .points
                .iter()
                .map(|row| lines.pair(row, "demand point", demand_span.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            if demand_raw.kind.get_ref() == "step" {
                DemandCurve::step(points)
            } else {
                DemandCurve::linear(points)
            }
        }
        "pieces" => {
            let pieces = demand_raw
                .points
                .iter()
                .map(|row| match row.as_slice() {
                    [s, v, k] => Ok(DemandPiece {
                        start: lines.number(s, "demand piece")?,
                        value: lines.number(v, "demand piece")?,
                        slope: lines.number(k, "demand piece")?,
                    }),
                    _ => Err(lines.err::<()>(
                        demand_span.clone(),
                        "demand piece: expected [start, value, slope] triples",
                    )),
                })
                .collect::<Result<Vec<_>, _>>()?;
            DemandCurve::new(pieces)
        }
        other => {
            return Err(lines.err::<()>(
                demand_raw.kind.span(),
                format!("unknown demand kind {other:?}; expected \"step\", \"piecewise_linear\" or \"pieces\""),
            ))
        }
    }
    .map_err(|e| lines.err::<()>(demand_span.clone(), format!("demand: {}", describe_curve_error(&e))))?;

    let scenario = Scenario::new(producers, demand, cap, penalty, p_lolc).map_err(|e| {
        let span = match &e {
            ScenarioError::DuplicateProducers { second: name, .. } | ScenarioError::DuplicateName(name) => raw
                .producers
                .iter()
                .filter(|p| &p.get_ref().name == name)
                .last()
                .map(|p| p.span()),
            ScenarioError::LossOfLoadTooLow { .. } => Some(market.p_lolc.span()),
            ScenarioError::NonPositiveCap(_) => Some(market.cap.span()),
            ScenarioError::NonPositivePenalty(_) => Some(market.penalty.span()),
            ScenarioError::NoProducers => None,
            ScenarioError::InvalidProducer { .. } => None,
        };
        IoError {
            line: span.map(|s| lines.line_of(s.start)),
            message: e.to_string(),
        }
    })?;

    let defaults = VerifySettings::default();
    let verify = match raw.verify {
        Some(v) => VerifySettings {
            seed: v.seed.unwrap_or(defaults.seed),
            samples: v.samples.unwrap_or(defaults.samples),
            max_steps: v.max_steps.unwrap_or(defaults.max_steps),
            grid: v.grid.unwrap_or(defaults.grid),
            refinements: v.refinements.unwrap_or(defaults.refinements),
        },
        None => defaults,
    };

    let bids = match raw.bids {
        None => None,
        Some(list) => {
            let mut slots: Vec<Option<BidCurve>> = vec![None; scenario.len()];
            for sb in &list {
                let b = sb.get_ref();
                let j = scenario
                    .producers
                    .iter()
                    .position(|p| p.name == b.producer)
                    .ok_or_else(|| lines.err::<()>(sb.span(), format!("bid for unknown producer {:?}", b.producer)))?;
                if slots[j].is_some() {
                    return Err(lines.err::<()>(sb.span(), format!("second bid for producer {:?}", b.producer)));
                }
                let stairs = b
                    .stairs
                    .iter()
                    .map(|row| lines.pair(row, "bid stair", sb.span()).map(|(q, p)| Stair::new(q, p)))
                    .collect::<Result<Vec<_>, _>>()?;
                let bid = BidCurve::new(stairs).map_err(|e| lines.err::<()>(sb.span(), format!("bid: {e}")))?;
                slots[j] = Some(bid);
            }
            let mut bids = Vec::with_capacity(slots.len());
            for (j, slot) in slots.into_iter().enumerate() {
                bids.push(slot.ok_or_else(|| IoError {
                    line: None,
                    message: format!("no bid for producer {:?}", scenario.producers[j].name),
                })?);
            }
            Some(bids)
        }
    };

    Ok(ScenarioFile {
        scenario,
        verify,
        bids,
    })
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioFile, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_scenario_str(&text)
}

fn q(r: &Rational) -> String {
    format!("\"{}\"", decimal_string(r))
}

/// Writes a scenario document that parses back to the same value.
pub fn serialize_scenario(file: &ScenarioFile) -> String {
    let s = &file.scenario;
    let mut out = String::new();
    out.push_str("[market]\n");
    out.push_str(&format!("W = {}\npenalty = {}\np_lolc = {}\n", q(&s.cap), q(&s.penalty), q(&s.p_lolc)));
    for p in &s.producers {
        out.push_str(&format!(
            "\n[[producers]]\nname = {}\nc = {}\ne = {}\nkappa = {}\n",
            toml_string(&p.name),
            q(&p.c),
            q(&p.e),
            q(&p.kappa)
        ));
    }
    out.push_str("\n[demand]\n");
    let pieces = s.demand.pieces();
    let rows: Vec<String> = if s.demand.is_step() {
        out.push_str("kind = \"step\"\n");
        pieces.iter().map(|p| format!("[{}, {}]", q(&p.start), q(&p.value))).collect()
    } else if s.demand.is_continuous() {
        out.push_str("kind = \"piecewise_linear\"\n");
        pieces.iter().map(|p| format!("[{}, {}]", q(&p.start), q(&p.value))).collect()
    } else {
        out.push_str("kind = \"pieces\"\n");
        pieces
            .iter()
            .map(|p| format!("[{}, {}, {}]", q(&p.start), q(&p.value), q(&p.slope)))
            .collect()
    };
    out.push_str(&format!("points = [{}]\n", rows.join(", ")));
    let v = &file.verify;
    out.push_str(&format!(
        "\n[verify]\nseed = {}\nsamples = {}\nmax_steps = {}\ngrid = {}\nrefinements = {}\n",
        v.seed, v.samples, v.max_steps, v.grid, v.refinements
    ));
    if let Some(bids) = &file.bids {
        for (p, b) in s.producers.iter().zip(bids) {
            let stairs: Vec<String> = b
                .stairs()
                .iter()
                .map(|st| format!("[{}, {}]", q(&st.upto), q(&st.price)))
                .collect();
            out.push_str(&format!(
                "\n[[bids]]\nproducer = {}\nstairs = [{}]\n",
                toml_string(&p.name),
                stairs.join(", ")
            ));
        }
    }
    out
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// `{"approx": f64, "exact": "num/den"}`.
pub fn rational_json(r: &Rational) -> Value {
    json!({ "exact": exact_string(r), "approx": to_f64(r) })
}

/// Reads back a value written by [`rational_json`].
pub fn rational_from_json(v: &Value) -> Option<Rational> {
    parse_rational(v.get("exact")?.as_str()?).ok()
}

fn list(v: &[Rational]) -> Value {
    Value::Array(v.iter().map(rational_json).collect())
}

fn stairs_json(stairs: &[Stair]) -> Value {
    Value::Array(
        stairs
            .iter()
            .map(|s| json!({ "upto": rational_json(&s.upto), "price": rational_json(&s.price) }))
            .collect(),
    )
}

fn names(s: &Scenario) -> Value {
    Value::Array(s.producers.iter().map(|p| Value::String(p.name.clone())).collect())
}

fn index_names(s: &Scenario, idx: &[usize]) -> Value {
    Value::Array(idx.iter().map(|&j| Value::String(s.producers[j].name.clone())).collect())
}

pub fn elec_outcome_json(s: &Scenario, out: &ElecOutcome) -> Value {
    json!({
        "producers": names(s),
        "p_under": rational_json(&out.p_under),
        "p_over": rational_json(&out.p_over),
        "p_elec": rational_json(&out.p_elec),
        "phi": list(&out.phi),
        "total_sold": rational_json(&out.total_sold),
    })
}

pub fn carbon_outcome_json(s: &Scenario, out: &CarbonOutcome) -> Value {
    json!({
        "producers": names(s),
        "p_co2": rational_json(&out.p_co2),
        "delta": list(&out.delta),
        "total": rational_json(&out.delta.iter().sum()),
    })
}

pub fn tau_outcome_json(s: &Scenario, out: &TauOutcome, w: &WillingToBuy) -> Value {
    json!({
        "producers": names(s),
        "tau": rational_json(&out.tau),
        "p_elec": rational_json(&out.p_elec),
        "phi": list(&out.phi),
        "active": index_names(s, &out.active),
        "total_sold": rational_json(&out.total_sold()),
        "W": rational_json(&w.w),
        "W_bar": rational_json(&w.w_bar),
    })
}

pub fn case_json(s: &Scenario, case: &CaseTag) -> Value {
    match *case {
        CaseTag::CaseA { i_bar } => json!({ "kind": "A", "i_bar": s.producers[i_bar].name }),
        CaseTag::CaseB { i_l, i_r } => json!({
            "kind": "B",
            "i_l": s.producers[i_l].name,
            "i_r": s.producers[i_r].name,
        }),
    }
}

fn claim_json(c: &Claim) -> Value {
    json!({ "holds": c.holds, "expected": rational_json(&c.expected), "actual": rational_json(&c.actual) })
}

fn witness_json(s: &Scenario, w: &Witness) -> Value {
    json!({
        "producer": s.producers[w.producer].name,
        "bid": stairs_json(w.bid.stairs()),
        "ask_rule": w.ask_rule.describe(),
        "ask": ask_json(&w.ask),
        "baseline_phi": rational_json(&w.baseline_phi),
        "deviated_phi": rational_json(&w.deviated_phi),
        "replay": {
            "p_co2": rational_json(&w.replay.p_co2),
            "delta": list(&w.replay.delta),
            "p_elec": rational_json(&w.replay.p_elec),
            "phi": list(&w.replay.phi),
            "confirms": w.replay_confirms,
        },
    })
}

fn ask_json(a: &AskCurve) -> Value {
    json!({ "stairs": stairs_json(a.stairs()), "p_lolc": rational_json(a.p_lolc()) })
}

pub fn falsifier_json(s: &Scenario, r: &FalsifierReport) -> Value {
    json!({
        "checked_count": r.checked_count,
        "skipped": r.skipped,
        "best_improvement": rational_json(&r.best_improvement),
        "witness": r.witness.as_ref().map(|w| witness_json(s, w)),
        "family": { "price_levels": r.levels, "quantity_breaks": r.quantity_breaks, "max_steps": r.max_steps },
        "note": r.note,
    })
}

pub fn report_json(s: &Scenario, r: &EquilibriumReport) -> Value {
    json!({
        "producers": names(s),
        "tau_guess": rational_json(&r.tau_guess),
        "tau_bar_guess": rational_json(&r.tau_bar_guess),
        "case": case_json(s, &r.case),
        "active_left": index_names(s, &r.active_left),
        "active_right": index_names(s, &r.active_right),
        "eps": rational_json(&r.eps),
        "delta_param": rational_json(&r.delta_param),
        "bids": Value::Array(r.bids.iter().map(|b| stairs_json(b.stairs())).collect()),
        "costs": Value::Array(r.costs.iter().map(|c| stairs_json(c.stairs())).collect()),
        "asks": Value::Array(r.asks.iter().map(ask_json).collect()),
        "p_co2": rational_json(&r.p_co2),
        "p_elec": rational_json(&r.p_elec),
        "phi": list(&r.phi),
        "delta": list(&r.delta),
        "covered_emissions": list(&r.covered_emissions),
        "at_tau_guess": {
            "p_elec": rational_json(&r.at_tau_guess.p_elec),
            "phi": list(&r.at_tau_guess.phi),
        },
        "claims": {
            "carbon_price_is_tau_guess": claim_json(&r.claim_carbon_price),
            "elec_price_is_p_elec_tau_guess": claim_json(&r.claim_elec_price),
            "no_sales_no_allowances": {
                "holds": r.claim_zero_sales.is_empty(),
                "offenders": index_names(s, &r.claim_zero_sales),
            },
        },
        "w_at_tau_guess": {
            "left": r.cap_check.w_left.as_ref().map(rational_json),
            "at": rational_json(&r.cap_check.w_at),
            "right": rational_json(&r.cap_check.w_right),
            "equals_cap": r.cap_check.holds,
            "discontinuity_flag": !r.cap_check.holds,
        },
        "case_a_identities": Value::Array(r.case_a_identities.iter().map(claim_json).collect()),
        "case_b_breakpoint": r.case_b_breakpoint.as_ref().map(rational_json),
        "admissible": r.admissible,
        "verified": r.verified(),
        "falsifier": falsifier_json(s, &r.falsifier),
        "params_tried": r.params_tried,
        "params_skipped": r.params_skipped,
        "discrepancies": r.discrepancies,
    })
}

pub fn dominance_json(r: &DominanceReport) -> Value {
    json!({
        "checked_count": r.checked_count,
        "violations": r.violations,
        "worst": rational_json(&r.worst),
        "witness": r.witness.as_ref().map(|w| json!({
            "sample": w.sample,
            "producer": w.producer,
            "asks": Value::Array(w.asks.iter().map(ask_json).collect()),
            "phi_profile": rational_json(&w.phi_profile),
            "phi_marginal": rational_json(&w.phi_marginal),
        })),
    })
}

pub fn monotonicity_json(r: &MonotonicityReport) -> Value {
    json!({
        "samples": r.samples,
        "violations": Value::Array(r.violations.iter().map(|v| json!({
            "quantity": v.quantity,
            "tau_before": rational_json(&v.tau_before),
            "tau_after": rational_json(&v.tau_after),
            "before": rational_json(&v.before),
            "after": rational_json(&v.after),
        })).collect()),
    })
}

pub fn uniqueness_json(r: &UniquenessReport) -> Value {
    json!({
        "reference": { "p_elec": rational_json(&r.reference.p_elec), "phi": list(&r.reference.phi) },
        "compared": r.compared,
        "excluded": r.excluded,
        "mismatches": Value::Array(r.mismatches.iter().map(|m| json!({
            "profile": m.profile,
            "p_elec": rational_json(&m.p_elec),
            "phi": list(&m.phi),
        })).collect()),
    })
}

/// Canonical text form: pretty JSON with sorted keys and a trailing newline.
pub fn to_canonical_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&sort_keys(v)).expect("values serialize");
    s.push('\n');
    s
}

fn sort_keys(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            let mut out = serde_json::Map::new();
            for k in keys {
                out.insert(k.clone(), sort_keys(&m[k]));
            }
            Value::Object(out)
        }
        Value::Array(a) => Value::Array(a.iter().map(sort_keys).collect()),
        other => other.clone(),
    }
}

/// CSV for a `tau` sweep: `tau,p_elec,total_sold,W,W_bar`, exact `num/den` cells.
pub fn sweep_csv(rows: &[(TauOutcome, WillingToBuy)]) -> String {
    let mut out = String::from("tau,p_elec,total_sold,W,W_bar\n");
    for (o, w) in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            exact_string(&o.tau),
            exact_string(&o.p_elec),
            exact_string(&o.total_sold()),
            exact_string(&w.w),
            exact_string(&w.w_bar)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    const S0: &str = r#"
[market]
W = "12"
penalty = 30
p_lolc = "100"

[[producers]]
name = "P1"
c = "10"
e = "1"
kappa = "10"

[[producers]]
name = "P2"
c = "12"
e = "2"
kappa = "10"

[demand]
kind = "piecewise_linear"
points = [["0", "60"], ["60", "0"]]
"#;

    #[test]
    fn parses_s0() {
        let f = parse_scenario_str(S0).unwrap();
        assert_eq!(f.scenario.len(), 2);
        assert_eq!(f.scenario.cap, int(12));
        assert_eq!(f.scenario.demand.eval(&int(20)), int(40));
        assert_eq!(f.verify, VerifySettings::default());
        assert!(f.bids.is_none());
    }

    #[test]
    fn round_trip() {
        let f = parse_scenario_str(S0).unwrap();
        let again = parse_scenario_str(&serialize_scenario(&f)).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn decimals_are_exact() {
        let text = S0.replace("c = \"10\"", "c = \"10.1\"");
        let f = parse_scenario_str(&text).unwrap();
        assert_eq!(f.scenario.producers[0].c, crate::rational::ratio(101, 10));
    }

    #[test]
    fn floats_rejected_with_line() {
        let text = S0.replace("c = \"12\"", "c = 12.5");
        let err = parse_scenario_str(&text).unwrap_err();
        assert_eq!(err.line, Some(15));
        assert!(err.message.contains("float"), "{err}");
    }

    #[test]
    fn duplicate_producers_anchor_second() {
        let text = S0.replace("c = \"12\"\ne = \"2\"", "c = \"10\"\ne = \"1\"");
        let err = parse_scenario_str(&text).unwrap_err();
        assert!(err.message.contains("pairwise distinct"), "{err}");
        assert_eq!(err.line, Some(13));
    }

    #[test]
    fn zero_demand_at_zero_rejected() {
        let text = S0.replace("[\"0\", \"60\"], [\"60\", \"0\"]", "[\"0\", \"0\"]");
        let err = parse_scenario_str(&text).unwrap_err();
        assert!(err.message.contains("demand at price 0 must be positive"), "{err}");
    }

    #[test]
    fn low_loss_of_load_anchored() {
        let err = parse_scenario_str(&S0.replace("p_lolc = \"100\"", "p_lolc = \"60\"")).unwrap_err();
        assert_eq!(err.line, Some(5));
    }

    #[test]
    fn syntax_errors_have_lines() {
        let err = parse_scenario_str("[market]\nW = \n").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn bids_in_producer_order() {
        let text = format!(
            "{S0}\n[[bids]]\nproducer = \"P2\"\nstairs = [[\"20\", \"15\"]]\n\n[[bids]]\nproducer = \"P1\"\nstairs = [[\"10\", \"30\"]]\n"
        );
        let f = parse_scenario_str(&text).unwrap();
        let bids = f.bids.clone().unwrap();
        assert_eq!(bids[0].stairs()[0].price, int(30));
        assert_eq!(bids[1].stairs()[0].price, int(15));
        assert_eq!(parse_scenario_str(&serialize_scenario(&f)).unwrap(), f);
    }

    #[test]
    fn rational_json_round_trip() {
        let r = crate::rational::ratio(-7, 3);
        assert_eq!(rational_from_json(&rational_json(&r)), Some(r));
        assert_eq!(rational_json(&int(14))["exact"], "14/1");
    }

    #[test]
    fn canonical_json_sorts_keys() {
        let v = json!({"b": 1, "a": {"d": 2, "c": 3}});
        assert_eq!(to_canonical_json(&v), "{\n  \"a\": {\n    \"c\": 3,\n    \"d\": 2\n  },\n  \"b\": 1\n}\n");
    }
}
