//! Command-line front end: `elcarb <subcommand> --scenario FILE`.
//!
//! Results go to standard output as canonical JSON (or CSV where a flat table
//! makes sense), diagnostics go to standard error. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | internal or I/O failure |
//! | 2 | invalid scenario, flags or market design |
//! | 3 | `verify` found an improving deviation or a property violation |
//! | 4 | no `(eps, delta)` on the search grid survived the deviation check |

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use elcarb_core::equilibrium::{tau_clearing, willing_to_buy, EquilibriumError};
use elcarb_core::rational::{exact_string, parse_rational};
use elcarb_core::scenario_io::{
    carbon_outcome_json, dominance_json, elec_outcome_json, falsifier_json, monotonicity_json,
    rational_json, report_json, sweep_csv, tau_outcome_json, to_canonical_json,
};
use elcarb_core::verifier::{
    check_bid_profile, check_dominance, check_monotonicity, monotonicity_samples, FixedCostGame,
};
use elcarb_core::{
    clear_auction, clear_coupled, parse_scenario, solve, Rational, Scenario, ScenarioFile,
    SolveOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_WITNESS: i32 = 3;
pub const EXIT_NO_PARAMETERS: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "elcarb", version, about = "Coupled electricity and carbon allowance market solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clear the electricity market with every producer asking c + tau * e.
    ClearElec(ClearElecArgs),
    /// Clear the allowance auction on the scenario's [[bids]].
    ClearCarbon(Common),
    /// Construct and check the equilibrium bid profile.
    Equilibrium(SolveArgs),
    /// Run the deviation checks: on the scenario's [[bids]] if present,
    /// otherwise on the constructed equilibrium plus dominance and
    /// monotonicity sampling.
    Verify(SolveArgs),
    /// Tabulate the market and willingness to buy over a range of carbon costs.
    SweepTau(SweepArgs),
    /// Check that the cap lies strictly between W_bar(penalty) and W(0).
    CheckDesign(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct ClearElecArgs {
    #[command(flatten)]
    common: Common,
    /// Carbon cost per tonne, e.g. "14" or "29/2".
    #[arg(long, default_value = "0")]
    tau: String,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Seed for randomized checks; overrides [verify] seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Price grid divisions for the deviation family; overrides [verify] grid.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "0")]
    from: String,
    /// Defaults to the penalty.
    #[arg(long)]
    to: Option<String>,
    #[arg(long, default_value_t = 61)]
    samples: usize,
}

struct Failure {
    code: i32,
    message: String,
    document: Option<Value>,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.into(),
            document: None,
        }
    }
}

fn from_equilibrium(s: &Scenario, e: EquilibriumError) -> Failure {
    let code = match &e {
        EquilibriumError::Design(_)
        | EquilibriumError::TauOutOfRange { .. }
        | EquilibriumError::InvalidParameters(_) => EXIT_INVALID,
        EquilibriumError::NoValidatedParameters { .. } => EXIT_NO_PARAMETERS,
        _ => EXIT_FAILURE,
    };
    let document = match &e {
        EquilibriumError::NoValidatedParameters { tried, skipped, last } => Some(json!({
            "verified": false,
            "params_tried": tried,
            "params_skipped": skipped,
            "last_falsifier": last.as_ref().map(|r| falsifier_json(s, r)),
        })),
        _ => None,
    };
    Failure {
        code,
        message: e.to_string(),
        document,
    }
}

fn rational_arg(name: &str, text: &str) -> Result<Rational, Failure> {
    parse_rational(text).map_err(|e| Failure::invalid(format!("--{name}: {e}")))
}

fn solve_options(file: &ScenarioFile, args: &SolveArgs) -> SolveOptions {
    SolveOptions {
        refinements: file.verify.refinements,
        max_steps: file.verify.max_steps,
        grid: args.grid.unwrap_or(file.verify.grid),
    }
}

enum Output {
    Json(Value),
    Text(String),
}

fn load(common: &Common) -> Result<ScenarioFile, Failure> {
    parse_scenario(&common.scenario).map_err(|e| Failure::invalid(format!("{}: {e}", common.scenario.display())))
}

fn names(s: &Scenario) -> impl Iterator<Item = &str> {
    s.producers.iter().map(|p| p.name.as_str())
}

fn clear_elec(args: &ClearElecArgs) -> Result<Output, Failure> {
    let file = load(&args.common)?;
    let s = &file.scenario;
    let tau = rational_arg("tau", &args.tau)?;
    let outcome = tau_clearing(s, &tau).map_err(|e| from_equilibrium(s, e))?;
    let willing = willing_to_buy(s, &tau).map_err(|e| from_equilibrium(s, e))?;
    Ok(match args.common.format {
        Format::Json => {
            let mut v = tau_outcome_json(s, &outcome, &willing);
            v["p_under"] = rational_json(&outcome_under(s, &tau)?);
            Output::Json(v)
        }
        Format::Csv => {
            let mut text = String::from("producer,phi,p_elec\n");
            for (name, phi) in names(s).zip(&outcome.phi) {
                text.push_str(&format!("{name},{},{}\n", exact_string(phi), exact_string(&outcome.p_elec)));
            }
            Output::Text(text)
        }
    })
}

fn outcome_under(s: &Scenario, tau: &Rational) -> Result<Rational, Failure> {
    let asks = s
        .producers
        .iter()
        .map(|p| elcarb_core::AskCurve::flat(p.cost_at(tau), p.kappa.clone(), s.p_lolc.clone()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::invalid(e.to_string()))?;
    let out = elcarb_core::clear_market(&asks, &s.demand, &s.p_lolc).map_err(|e| Failure {
        code: EXIT_FAILURE,
        message: e.to_string(),
        document: None,
    })?;
    Ok(out.p_under)
}

fn require_bids(file: &ScenarioFile) -> Result<&[elcarb_core::BidCurve], Failure> {
    file.bids
        .as_deref()
        .ok_or_else(|| Failure::invalid("scenario has no [[bids]] section"))
}

fn clear_carbon(common: &Common) -> Result<Output, Failure> {
    let file = load(common)?;
    let s = &file.scenario;
    let bids = require_bids(&file)?;
    let carbon = clear_auction(bids, &s.cap).map_err(|e| Failure::invalid(e.to_string()))?;
    Ok(match common.format {
        Format::Json => {
            let mut v = carbon_outcome_json(s, &carbon);
            if let Ok(coupled) = clear_coupled(s, bids) {
                v["elec"] = elec_outcome_json(s, &coupled.elec);
            }
            Output::Json(v)
        }
        Format::Csv => {
            let mut text = String::from("producer,delta,p_co2\n");
            for (name, d) in names(s).zip(&carbon.delta) {
                text.push_str(&format!("{name},{},{}\n", exact_string(d), exact_string(&carbon.p_co2)));
            }
            Output::Text(text)
        }
    })
}

fn equilibrium(args: &SolveArgs) -> Result<Output, Failure> {
    let file = load(&args.common)?;
    let s = &file.scenario;
    let report = solve(s, &solve_options(&file, args)).map_err(|e| from_equilibrium(s, e))?;
    Ok(match args.common.format {
        Format::Json => Output::Json(report_json(s, &report)),
        Format::Csv => {
            let mut text = String::from("producer,delta,phi,p_co2,p_elec\n");
            for (j, name) in names(s).enumerate() {
                text.push_str(&format!(
                    "{name},{},{},{},{}\n",
                    exact_string(&report.delta[j]),
                    exact_string(&report.phi[j]),
                    exact_string(&report.p_co2),
                    exact_string(&report.p_elec)
                ));
            }
            Output::Text(text)
        }
    })
}

fn verify(args: &SolveArgs) -> Result<(Output, i32), Failure> {
    if args.common.format == Format::Csv {
        return Err(Failure::invalid("verify emits JSON only"));
    }
    let file = load(&args.common)?;
    let s = &file.scenario;
    let opts = solve_options(&file, args);

    if let Some(bids) = &file.bids {
        let report = check_bid_profile(s, bids, &opts).map_err(|e| from_equilibrium(s, e))?;
        let code = if report.witness.is_some() { EXIT_WITNESS } else { EXIT_OK };
        let doc = json!({
            "target": "scenario_bids",
            "falsifier": falsifier_json(s, &report),
        });
        return Ok((Output::Json(doc), code));
    }

    let report = solve(s, &opts).map_err(|e| from_equilibrium(s, e))?;
    let seed = args.seed.unwrap_or(file.verify.seed);
    let game = FixedCostGame {
        costs: report.costs.clone(),
        demand: s.demand.clone(),
        p_lolc: s.p_lolc.clone(),
    };
    let dominance = check_dominance(&game, file.verify.samples, seed);
    let taus = monotonicity_samples(s).map_err(|e| from_equilibrium(s, e))?;
    let monotonicity = check_monotonicity(s, &taus).map_err(|e| from_equilibrium(s, e))?;
    let clean = report.falsifier.witness.is_none() && dominance.violations == 0 && monotonicity.violations.is_empty();
    let doc = json!({
        "target": "equilibrium",
        "seed": seed,
        "equilibrium": report_json(s, &report),
        "dominance": dominance_json(&dominance),
        "monotonicity": monotonicity_json(&monotonicity),
        "clean": clean,
    });
    Ok((Output::Json(doc), if clean { EXIT_OK } else { EXIT_WITNESS }))
}

fn sweep(args: &SweepArgs) -> Result<Output, Failure> {
    let file = load(&args.common)?;
    let s = &file.scenario;
    let from = rational_arg("from", &args.from)?;
    let to = match &args.to {
        Some(t) => rational_arg("to", t)?,
        None => s.penalty.clone(),
    };
    if args.samples == 0 {
        return Err(Failure::invalid("--samples must be at least 1"));
    }
    if to < from {
        return Err(Failure::invalid("--to must not be below --from"));
    }
    let steps = Rational::from_integer(((args.samples.max(2) - 1) as i64).into());
    let mut rows = Vec::with_capacity(args.samples);
    for i in 0..args.samples {
        let tau = &from + (&to - &from) * Rational::from_integer((i as i64).into()) / &steps;
        let o = tau_clearing(s, &tau).map_err(|e| from_equilibrium(s, e))?;
        let w = willing_to_buy(s, &tau).map_err(|e| from_equilibrium(s, e))?;
        rows.push((o, w));
    }
    Ok(match args.common.format {
        Format::Csv => Output::Text(sweep_csv(&rows)),
        Format::Json => Output::Json(Value::Array(
            rows.iter().map(|(o, w)| tau_outcome_json(s, o, w)).collect(),
        )),
    })
}

fn check_design(common: &Common) -> Result<(Output, i32), Failure> {
    let file = load(common)?;
    let s = &file.scenario;
    let at_zero = willing_to_buy(s, &Rational::from_integer(0.into())).map_err(|e| from_equilibrium(s, e))?;
    let at_penalty = willing_to_buy(s, &s.penalty).map_err(|e| from_equilibrium(s, e))?;
    let verdict = elcarb_core::equilibrium::design_check(s);
    let doc = json!({
        "W": rational_json(&s.cap),
        "W_at_zero": rational_json(&at_zero.w),
        "W_bar_at_penalty": rational_json(&at_penalty.w_bar),
        "ok": verdict.is_ok(),
        "reason": verdict.as_ref().err().map(|e| e.to_string()),
    });
    let code = if verdict.is_ok() { EXIT_OK } else { EXIT_INVALID };
    Ok((
        match common.format {
            Format::Json => Output::Json(doc),
            Format::Csv => Output::Text(format!(
                "W,W_at_zero,W_bar_at_penalty,ok\n{},{},{},{}\n",
                exact_string(&s.cap),
                exact_string(&at_zero.w),
                exact_string(&at_penalty.w_bar),
                verdict.is_ok()
            )),
        },
        code,
    ))
}

fn emit(out: &mut dyn Write, output: &Output) -> std::io::Result<()> {
    match output {
        Output::Json(v) => out.write_all(to_canonical_json(v).as_bytes()),
        Output::Text(t) => out.write_all(t.as_bytes()),
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_INVALID } else {
                let _ = write!(out, "{e}");
                EXIT_OK
            };
        }
    };
    let result = match &cli.command {
        Command::ClearElec(a) => clear_elec(a).map(|o| (o, EXIT_OK)),
        Command::ClearCarbon(a) => clear_carbon(a).map(|o| (o, EXIT_OK)),
        Command::Equilibrium(a) => equilibrium(a).map(|o| (o, EXIT_OK)),
        Command::Verify(a) => verify(a),
        Command::SweepTau(a) => sweep(a).map(|o| (o, EXIT_OK)),
        Command::CheckDesign(a) => check_design(a),
    };
    match result {
        Ok((output, code)) => {
            if let Err(e) = emit(out, &output) {
                let _ = writeln!(err, "error: {e}");
                return EXIT_FAILURE;
            }
            if code == EXIT_INVALID {
                if let Output::Json(v) = &output {
                    if let Some(reason) = v.get("reason").and_then(Value::as_str) {
                        let _ = writeln!(err, "error: {reason}");
                    }
                }
            }
            code
        }
        Err(f) => {
            if let Some(doc) = &f.document {
                let _ = emit(out, &Output::Json(doc.clone()));
            }
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
