//! Command-line driver: `run`, `params` and `deviate`.
//!
//! Exit codes: 0 success (or a converged run), 1 internal error, 2 parse or
//! argument error, 3 infeasible α in private mode, 4 the run hit `Fail`.
//! Summary and report JSON documents carry `schema_version` = [`SCHEMA_VERSION`].

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::dynamics::{run_br_exact, run_counter_engine, EngineConfig, RunOutcome, TraceOptions};
use crate::error::{Error, Result};
use crate::game::{Game, PlayerType, Route, RouteProfile, VertexId};
use crate::harness::{
    best_misreport_search, evaluate_profile, mediated_cost, DeviationKind, DeviationReport, DeviationSpec,
    MediatorSettings, Remap, RemapStrategy, Verdict,
};
use crate::params::{exact_params, GameDims, PrivateParams};
use crate::scenario::Scenario;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_FAIL: i32 = 4;

pub const TRACE_HEADER: &str = "t,mover,moved,potential,mover_regret_exact,max_counter_error";

#[derive(Debug, Parser)]
#[command(
    name = "privroute",
    version,
    about = "Private best-response dynamics for routing games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Private,
    /// Counter engine with noise disabled, on the exact-engine schedule.
    NoiselessPrivate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Truthful,
    Misreport,
    OptOut,
    /// Search reported types with fitted remaps.
    Search,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RemapArg {
    Identity,
    Empirical,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ParamArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the dynamics on a scenario.
    Run {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the round count T.
        #[arg(long)]
        rounds: Option<u64>,
        /// Override the per-player move budget k.
        #[arg(long)]
        k: Option<u64>,
        /// Per-turn trace CSV.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Summary JSON.
        #[arg(long)]
        report_out: Option<PathBuf>,
        /// Print the summary JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Print the derived parameters.
    Params {
        scenario: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        json: bool,
    },
    /// Estimate a player's gain from deviating from the mediator.
    Deviate {
        scenario: PathBuf,
        #[arg(long)]
        player: usize,
        #[arg(long, value_enum, default_value = "truthful")]
        kind: Kind,
        /// Reported type as `SRC,DST`; repeat for several search candidates.
        #[arg(long)]
        reported: Vec<String>,
        /// Comma-separated edge ids: the opt-out route, or a constant remap.
        #[arg(long)]
        route: Option<String>,
        #[arg(long, value_enum)]
        remap: Option<RemapArg>,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Report JSON.
        #[arg(long)]
        report_out: Option<PathBuf>,
        /// Per-trial costs CSV.
        #[arg(long)]
        trials_out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

/// Maps a library error to its exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InfeasibleAlpha { .. } => EXIT_INFEASIBLE,
        Error::StreamExhausted { .. } | Error::InvalidSymbol(_) => EXIT_INTERNAL,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name) and executes the command.
pub fn main_with_args<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return e.exit_code();
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Run {
            scenario,
            mode,
            params,
            seed,
            rounds,
            k,
            trace_out,
            report_out,
            json,
        } => {
            let sc = Scenario::from_path(scenario)?;
            let opts = RunOptions {
                mode: *mode,
                params: params.clone(),
                seed: *seed,
                rounds: *rounds,
                k: *k,
                trace: trace_out.is_some(),
            };
            let (summary, outcome) = cmd_run(&sc, &opts)?;
            if let Some(p) = trace_out {
                write_file(p, &trace_csv(&outcome))?;
            }
            let text = pretty(&summary);
            if let Some(p) = report_out {
                write_file(p, &text)?;
            }
            if *json {
                out.write_all(text.as_bytes())?;
            } else {
                out.write_all(run_text(&summary).as_bytes())?;
            }
            Ok(if outcome.converged() { EXIT_OK } else { EXIT_FAIL })
        }
        Command::Params { scenario, params, json } => {
            let sc = Scenario::from_path(scenario)?;
            let value = cmd_params(&sc, params)?;
            let text = if *json { pretty(&value) } else { flat_table(&value) };
            out.write_all(text.as_bytes())?;
            Ok(EXIT_OK)
        }
        Command::Deviate {
            scenario,
            player,
            kind,
            reported,
            route,
            remap,
            params,
            trials,
            seed,
            parallel,
            report_out,
            trials_out,
            json,
        } => {
            let sc = Scenario::from_path(scenario)?;
            let opts = DeviateOptions {
                player: *player,
                kind: *kind,
                reported: reported.clone(),
                route: route.clone(),
                remap: *remap,
                params: params.clone(),
                trials: *trials,
                seed: *seed,
                parallel: *parallel,
            };
            let (value, report) = cmd_deviate(&sc, &opts)?;
            let text = pretty(&value);
            if let Some(p) = report_out {
                write_file(p, &text)?;
            }
            if let Some(p) = trials_out {
                write_file(p, &trials_csv(&report))?;
            }
            if *json {
                out.write_all(text.as_bytes())?;
            } else {
                out.write_all(deviate_text(&report).as_bytes())?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// JSON number, or `null` for non-finite values.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    pub params: ParamArgs,
    pub seed: u64,
    pub rounds: Option<u64>,
    pub k: Option<u64>,
    pub trace: bool,
}

fn resolve(sc: &Scenario, p: &ParamArgs) -> (Option<f64>, Option<f64>, Option<f64>) {
    (
        p.alpha.or(sc.defaults.alpha),
        p.epsilon.or(sc.defaults.epsilon),
        p.beta.or(sc.defaults.beta),
    )
}

fn required(v: Option<f64>, name: &'static str) -> Result<f64> {
    v.ok_or(Error::Parse {
        line: 0,
        field: name.to_string(),
        message: format!("no --{name} flag and no scenario default"),
    })
}

fn route_names(game: &Game, r: &Route) -> Value {
    json!(r.edges().iter().map(|&e| game.edge(e).name.clone()).collect::<Vec<_>>())
}

fn profile_json(game: &Game, p: &RouteProfile) -> Value {
    Value::Array(p.routes.iter().map(|r| route_names(game, r)).collect())
}

fn private_params_json(p: &PrivateParams) -> Value {
    json!({
        "n": p.dims.n,
        "m": p.dims.m,
        "L": p.dims.max_route_len,
        "delta_loss": p.dims.sensitivity,
        "alpha": p.alpha,
        "epsilon": p.epsilon,
        "beta": p.beta,
        "T_formula": num(p.t_formula),
        "T": p.t,
        "k_formula": num(p.k_formula),
        "k": p.k,
        "epsilon_prime": num(p.epsilon_prime),
        "count_error": num(p.count_error),
        "delta_T": num(p.cost_error),
        "alpha_gate": num(4.0 * p.cost_error),
        "feasible": p.feasible,
        "eta": num(p.eta),
        "eta_prime": num(p.eta_prime),
        "stream_budget": p.stream_budget(),
        "alpha_order": num(p.reference.alpha_order),
        "epsilon_order": num(p.reference.epsilon_order),
        "beta_order": num(p.reference.beta_order),
    })
}

/// Runs the engine selected by `opts`; returns the summary JSON and the outcome.
pub fn cmd_run(sc: &Scenario, opts: &RunOptions) -> Result<(Value, RunOutcome)> {
    let (game, types) = sc.game()?;
    let (alpha, epsilon, beta) = resolve(sc, &opts.params);
    let alpha = required(alpha, "alpha")?;
    let mut private = None;
    let mut config = match opts.mode {
        Mode::Exact | Mode::NoiselessPrivate => EngineConfig::exact(&game, alpha)?,
        Mode::Private => {
            let p = PrivateParams::for_game(&game, alpha, required(epsilon, "epsilon")?, required(beta, "beta")?)?;
            p.require_feasible()?;
            let c = EngineConfig::private(&p, opts.seed);
            private = Some(p);
            c
        }
    };
    config.seed = opts.seed;
    if let Some(t) = opts.rounds {
        config.rounds = t;
    }
    if let Some(k) = opts.k {
        config.move_budget = k;
    }
    config.trace = TraceOptions {
        mover_regret: opts.trace,
        ..TraceOptions::default()
    };
    let outcome = match opts.mode {
        Mode::Exact => run_br_exact(&game, &types, &config)?,
        Mode::Private | Mode::NoiselessPrivate => run_counter_engine(&game, &types, &config)?,
    };
    let summary = run_summary(sc, &game, &types, opts, &outcome, private.as_ref())?;
    Ok((summary, outcome))
}

fn run_summary(
    sc: &Scenario,
    game: &Game,
    types: &[PlayerType],
    opts: &RunOptions,
    outcome: &RunOutcome,
    private: Option<&PrivateParams>,
) -> Result<Value> {
    let (profile, which) = match &outcome.final_profile {
        Some(p) => (p, "final"),
        None => (&outcome.halted_profile, "halted"),
    };
    let metrics = evaluate_profile(game, types, profile)?;
    let cfg = &outcome.config;
    let mode = match opts.mode {
        Mode::Exact => "exact",
        Mode::Private => "private",
        Mode::NoiselessPrivate => "noiseless-private",
    };
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "run",
        "scenario": sc.name,
        "mode": mode,
        "seed": opts.seed,
        "status": outcome.status,
        "config": {
            "alpha": cfg.alpha,
            "rounds": cfg.rounds,
            "move_budget": cfg.move_budget,
            "epsilon_prime": num(cfg.epsilon_prime.value()),
        },
        "params": private.map(private_params_json),
        "turns_played": outcome.turns_played(),
        "accepted_moves": outcome.accepted_moves(),
        "move_counts": outcome.move_counts,
        "failure": outcome.failure,
        "profile_kind": which,
        "profile": profile_json(game, profile),
        "costs": metrics.costs,
        "regrets": metrics.regrets,
        "max_regret": metrics.max_regret,
        "potential": metrics.potential,
        "initial_potential": outcome.initial_potential,
        "max_counter_error": outcome.max_counter_error.map(num),
    }))
}

fn run_text(v: &Value) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "status: {}", v["status"].as_str().unwrap_or("?"));
    let _ = writeln!(s, "mode: {}", v["mode"].as_str().unwrap_or("?"));
    let _ = writeln!(s, "turns: {}", v["turns_played"]);
    let _ = writeln!(s, "accepted moves: {}", v["accepted_moves"]);
    let _ = writeln!(s, "max regret: {}", v["max_regret"]);
    let _ = writeln!(s, "potential: {}", v["potential"]);
    if !v["failure"].is_null() {
        let f = &v["failure"];
        let _ = writeln!(
            s,
            "fail: player {} exceeded the budget on turn {}",
            f["player"], f["turn"]
        );
    }
    s
}

fn opt_cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// Per-turn CSV with the columns of [`TRACE_HEADER`].
pub fn trace_csv(outcome: &RunOutcome) -> String {
    let mut s = String::with_capacity(32 * (outcome.trace.len() + 1));
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in &outcome.trace {
        let _ = writeln!(
            s,
            "{},{},{},{:?},{},{}",
            r.t,
            r.mover,
            u8::from(r.moved()),
            r.potential,
            opt_cell(r.mover_regret),
            opt_cell(r.max_counter_error)
        );
    }
    s
}

/// All parameter fields as a JSON object. Infeasible α is reported, not an error.
pub fn cmd_params(sc: &Scenario, args: &ParamArgs) -> Result<Value> {
    let (game, _) = sc.game()?;
    let (alpha, epsilon, beta) = resolve(sc, args);
    let alpha = required(alpha, "alpha")?;
    let dims = GameDims::of(&game);
    let exact = exact_params(dims, alpha)?;
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": sc.name,
        "n": dims.n,
        "m": dims.m,
        "L": dims.max_route_len,
        "delta_loss": dims.sensitivity,
        "alpha": alpha,
        "exact_T": exact.t,
        "exact_k_lemma": exact.k_lemma,
        "exact_k_algorithm": exact.k_algorithm,
    });
    if let (Some(e), Some(b)) = (epsilon, beta) {
        let p = PrivateParams::for_game(&game, alpha, e, b)?;
        if let (Value::Object(dst), Value::Object(src)) = (&mut v, private_params_json(&p)) {
            for (key, val) in src {
                dst.entry(key).or_insert(val);
            }
        }
    }
    Ok(v)
}

/// `key value` lines in the JSON object's key order.
pub fn flat_table(v: &Value) -> String {
    let mut s = String::new();
    if let Value::Object(map) = v {
        let width = map.keys().map(String::len).max().unwrap_or(0);
        for (k, val) in map {
            let cell = match val {
                Value::String(x) => x.clone(),
                other => other.to_string(),
            };
            let _ = writeln!(s, "{k:<width$}  {cell}");
        }
    }
    s
}

#[derive(Debug, Clone)]
pub struct DeviateOptions {
    pub player: usize,
    pub kind: Kind,
    pub reported: Vec<String>,
    pub route: Option<String>,
    pub remap: Option<RemapArg>,
    pub params: ParamArgs,
    pub trials: usize,
    pub seed: u64,
    pub parallel: usize,
}

fn parse_type(game: &Game, spec: &str) -> Result<PlayerType> {
    let bad = |message: String| Error::Parse {
        line: 0,
        field: "reported".into(),
        message,
    };
    let (s, d) = spec
        .split_once(',')
        .ok_or_else(|| bad(format!("expected `SRC,DST`, got `{spec}`")))?;
    let vertex = |name: &str| {
        game.vertex_id(name.trim())
            .ok_or_else(|| bad(format!("unknown vertex `{}`", name.trim())))
    };
    let t = PlayerType {
        source: vertex(s)?,
        destination: vertex(d)?,
    };
    game.check_type(&t)?;
    Ok(t)
}

fn parse_route(game: &Game, spec: &str) -> Result<Route> {
    spec.split(',')
        .map(|name| {
            game.edge_id(name.trim()).ok_or_else(|| Error::Parse {
                line: 0,
                field: "route".into(),
                message: format!("unknown edge `{}`", name.trim()),
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(Route)
}

/// Every `(source, destination)` pair with at least one route.
fn all_types(game: &Game) -> Vec<PlayerType> {
    let k = game.vertices().len();
    let mut out = Vec::new();
    for s in 0..k {
        for d in 0..k {
            let t = PlayerType {
                source: VertexId(s),
                destination: VertexId(d),
            };
            if game.check_type(&t).is_ok() {
                out.push(t);
            }
        }
    }
    out
}

fn missing(field: &str, message: &str) -> Error {
    Error::Parse {
        line: 0,
        field: field.into(),
        message: message.into(),
    }
}

/// Runs a deviation experiment; returns the report JSON and the raw report.
pub fn cmd_deviate(sc: &Scenario, opts: &DeviateOptions) -> Result<(Value, DeviationReport)> {
    let (game, types) = sc.game()?;
    if opts.player >= types.len() {
        return Err(Error::InvalidPlayer {
            index: opts.player,
            n: types.len(),
        });
    }
    let (alpha, epsilon, beta) = resolve(sc, &opts.params);
    let settings = MediatorSettings {
        alpha: required(alpha, "alpha")?,
        epsilon: required(epsilon, "epsilon")?,
        beta: required(beta, "beta")?,
        parallel: opts.parallel.max(1),
    };
    let params = PrivateParams::for_game(&game, settings.alpha, settings.epsilon, settings.beta)?;
    let route = opts.route.as_deref().map(|r| parse_route(&game, r)).transpose()?;
    let report = match opts.kind {
        Kind::Search => {
            let candidates = if opts.reported.is_empty() {
                all_types(&game)
            } else {
                opts.reported
                    .iter()
                    .map(|s| parse_type(&game, s))
                    .collect::<Result<Vec<_>>>()?
            };
            let strategy = match opts.remap {
                Some(RemapArg::Identity) => RemapStrategy::Identity,
                _ => RemapStrategy::Empirical,
            };
            best_misreport_search(
                &game,
                &types,
                opts.player,
                &candidates,
                opts.trials,
                opts.seed,
                strategy,
                &settings,
            )?
            .worst_case
        }
        kind => {
            let kind = match kind {
                Kind::Truthful => DeviationKind::Truthful,
                Kind::Misreport => {
                    let spec = opts
                        .reported
                        .first()
                        .ok_or_else(|| missing("reported", "misreport needs --reported SRC,DST"))?;
                    let remap = match (&route, opts.remap) {
                        (Some(r), _) => Remap::Constant(r.clone()),
                        (None, Some(RemapArg::Empirical)) => {
                            return Err(missing("remap", "empirical remaps need --kind search"))
                        }
                        (None, _) => Remap::Identity,
                    };
                    DeviationKind::Misreport {
                        reported: parse_type(&game, spec)?,
                        remap,
                    }
                }
                Kind::OptOut => DeviationKind::OptOut {
                    route: route.ok_or_else(|| missing("route", "opt-out needs --route EDGE[,EDGE..]"))?,
                },
                Kind::Search => unreachable!(),
            };
            let spec = DeviationSpec {
                player: opts.player,
                kind,
                trials: opts.trials,
                seed: opts.seed,
            };
            mediated_cost(&game, &types, &spec, &settings)?
        }
    };
    let kind = match &report.kind {
        DeviationKind::Truthful => json!({"kind": "truthful"}),
        DeviationKind::Misreport { reported, remap } => json!({
            "kind": "misreport",
            "reported": [game.vertices()[reported.source.0], game.vertices()[reported.destination.0]],
            "remap": remap_json(&game, remap),
        }),
        DeviationKind::OptOut { route } => json!({"kind": "opt_out", "route": route_names(&game, route)}),
    };
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "deviate",
        "scenario": sc.name,
        "player": report.player,
        "deviation": kind,
        "search": opts.kind == Kind::Search,
        "seed": opts.seed,
        "trials": report.trials,
        "mean_cost_truthful": report.mean_cost_truthful,
        "mean_cost_deviating": report.mean_cost_deviating,
        "gain": report.gain,
        "halfwidth": report.halfwidth,
        "fail_rate": report.fail_rate,
        "deviating_fail_rate": report.deviating_fail_rate,
        "eta": num(report.eta),
        "eta_prime_reference": num(report.eta_prime_reference),
        "verdict": report.verdict,
        "params": private_params_json(&params),
    });
    Ok((value, report))
}

fn remap_json(game: &Game, remap: &Remap) -> Value {
    match remap {
        Remap::Identity => json!("identity"),
        Remap::Constant(r) => json!({"constant": route_names(game, r)}),
        Remap::Table { map, fallback } => json!({
            "table": map
                .iter()
                .map(|(k, v)| json!([route_names(game, k), route_names(game, v)]))
                .collect::<Vec<_>>(),
            "fallback": route_names(game, fallback),
        }),
    }
}

fn deviate_text(r: &DeviationReport) -> String {
    let verdict = match r.verdict {
        Verdict::WithinBound => "within-bound",
        Verdict::Flagged => "flagged",
    };
    let mut s = String::new();
    let _ = writeln!(s, "trials: {}", r.trials);
    let _ = writeln!(s, "mean cost truthful: {}", r.mean_cost_truthful);
    let _ = writeln!(s, "mean cost deviating: {}", r.mean_cost_deviating);
    let _ = writeln!(s, "gain: {}", r.gain);
    let _ = writeln!(s, "halfwidth: {}", r.halfwidth);
    let _ = writeln!(s, "fail rate: {}", r.fail_rate);
    let _ = writeln!(s, "eta_prime reference: {}", r.eta_prime_reference);
    let _ = writeln!(s, "verdict: {verdict}");
    s
}

/// Per-trial costs CSV.
pub fn trials_csv(r: &DeviationReport) -> String {
    let mut s = String::from("trial,seed,truthful,deviating,truthful_failed,deviating_failed\n");
    for c in &r.per_trial {
        let _ = writeln!(
            s,
            "{},{},{:?},{:?},{},{}",
            c.trial,
            c.seed,
            c.truthful,
            c.deviating,
            u8::from(c.truthful_failed),
            u8::from(c.deviating_failed)
        );
    }
    s
}
