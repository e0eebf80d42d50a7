//! Mediator-game experiments.
//!
//! A deviation experiment runs the private mediator `trials` times for the
//! truthful arm and for the deviating arm. Trial `j` of both arms uses the
//! same sub-seed, so arms that coincide produce identical costs. Player `i`'s
//! cost in a failed run is charged the maximum possible cost `L`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::best_response::{enumerate_routes, fewest_edges_route, regret_with_loads};
use crate::dynamics::run_br_private;
use crate::error::{Error, Result};
use crate::game::{Game, PlayerType, Route, RouteProfile, DEFAULT_ROUTE_CAP};
use crate::params::PrivateParams;

/// Normal quantile for the reported two-sided 95% interval.
const Z95: f64 = 1.959_963_984_540_054;

/// Sub-seed for trial `j`: SplitMix64 applied to `seed + (j + 1)·φ`, where φ is
/// the 64-bit golden-ratio increment. Trial `j`'s seed does not depend on the
/// total number of trials.
pub fn trial_seed(seed: u64, j: u64) -> u64 {
    let mut z = seed.wrapping_add((j + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMetrics {
    pub costs: Vec<f64>,
    pub regrets: Vec<f64>,
    pub max_regret: f64,
    pub potential: f64,
    pub loads: Vec<usize>,
}

/// Per-player exact costs and regrets, potential and loads of a profile.
pub fn evaluate_profile(game: &Game, types: &[PlayerType], profile: &RouteProfile) -> Result<ProfileMetrics> {
    game.check_profile(types, profile)?;
    let loads = game.edge_loads(profile);
    let costs = profile.routes.iter().map(|r| game.route_cost(r, &loads)).collect();
    let regrets: Vec<f64> = types
        .iter()
        .zip(&profile.routes)
        .map(|(t, r)| regret_with_loads(game, t, r, &loads))
        .collect();
    Ok(ProfileMetrics {
        costs,
        max_regret: regrets.iter().copied().fold(0.0, f64::max),
        regrets,
        potential: game.potential_from_loads(&loads),
        loads,
    })
}

/// How a misreporting player turns the suggestion for her reported type into
/// a route for her true type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Remap {
    /// Follow the suggestion when it is a route for the true type, else take
    /// the true type's fewest-edges route.
    Identity,
    /// Always play this route.
    Constant(Route),
    /// Look the suggestion up; unseen suggestions map to `fallback`.
    Table {
        map: BTreeMap<Route, Route>,
        fallback: Route,
    },
}

impl Remap {
    fn apply(&self, game: &Game, true_type: &PlayerType, suggestion: &Route) -> Route {
        match self {
            Remap::Identity => {
                if game.check_route(true_type, suggestion).is_ok() {
                    suggestion.clone()
                } else {
                    fewest_edges_route(game, true_type)
                }
            }
            Remap::Constant(r) => r.clone(),
            Remap::Table { map, fallback } => map.get(suggestion).unwrap_or(fallback).clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    Truthful,
    Misreport {
        reported: PlayerType,
        remap: Remap,
    },
    /// Report nothing and play a fixed route.
    OptOut {
        route: Route,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSpec {
    pub player: usize,
    pub kind: DeviationKind,
    pub trials: usize,
    pub seed: u64,
}

/// Mediator parameters and execution settings shared by all trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediatorSettings {
    pub alpha: f64,
    pub epsilon: f64,
    pub beta: f64,
    /// Worker threads for trials; 1 runs sequentially. Results do not depend on it.
    pub parallel: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialCosts {
    pub trial: u64,
    pub seed: u64,
    pub truthful: f64,
    pub deviating: f64,
    pub truthful_failed: bool,
    pub deviating_failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    WithinBound,
    Flagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub player: usize,
    pub kind: DeviationKind,
    pub trials: usize,
    pub mean_cost_truthful: f64,
    pub mean_cost_deviating: f64,
    /// `truthful - deviating`; positive means the deviation helps.
    pub gain: f64,
    /// 95% normal-approximation halfwidth of the paired gain.
    pub halfwidth: f64,
    /// Failure fraction of the truthful-arm mediator runs.
    pub fail_rate: f64,
    pub deviating_fail_rate: f64,
    pub eta: f64,
    pub eta_prime_reference: f64,
    pub verdict: Verdict,
    pub per_trial: Vec<TrialCosts>,
}

/// One mediator run seen from player `i`: her cost under her action, or failure.
#[derive(Debug, Clone)]
struct ArmRun {
    failed: bool,
    /// Suggested profile when the run converged.
    profile: Option<RouteProfile>,
}

fn with_pool<T: Send>(parallel: usize, f: impl FnOnce() -> T + Send) -> T {
    if parallel <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(parallel).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn map_trials<T: Send>(
    seeds: &[(u64, u64)],
    parallel: usize,
    f: impl Fn(u64, u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    with_pool(parallel, || {
        if parallel <= 1 {
            seeds.iter().map(|&(j, s)| f(j, s)).collect()
        } else {
            seeds.par_iter().map(|&(j, s)| f(j, s)).collect()
        }
    })
}

fn mediator_run(game: &Game, types: &[PlayerType], settings: &MediatorSettings, seed: u64) -> Result<ArmRun> {
    let run = run_br_private(game, types, settings.epsilon, settings.beta, settings.alpha, seed)?;
    Ok(ArmRun {
        failed: !run.outcome.converged(),
        profile: run.outcome.final_profile,
    })
}

fn truthful_cost(game: &Game, i: usize, run: &ArmRun) -> f64 {
    match &run.profile {
        Some(p) => game.player_cost(i, p),
        None => game.max_route_len() as f64,
    }
}

/// Cost to `i` of playing `route` against the suggestions to everyone else.
fn cost_against(game: &Game, i: usize, route: &Route, profile: &RouteProfile) -> f64 {
    game.deviation_cost(i, route, profile)
}

struct DeviatingArm<'a> {
    game: &'a Game,
    types: Vec<PlayerType>,
    player: usize,
    true_type: PlayerType,
    kind: &'a DeviationKind,
    opt_out_game: Option<Game>,
}

impl<'a> DeviatingArm<'a> {
    fn new(game: &'a Game, types: &[PlayerType], player: usize, kind: &'a DeviationKind) -> Result<Self> {
        let true_type = types[player];
        let mut reported = types.to_vec();
        let mut opt_out_game = None;
        match kind {
            DeviationKind::Truthful => {}
            DeviationKind::Misreport { reported: r, remap } => {
                game.check_type(r)?;
                if let Remap::Constant(route) = remap {
                    game.check_route(&true_type, route)?;
                }
                if let Remap::Table { map, fallback } = remap {
                    game.check_route(&true_type, fallback)?;
                    map.values().try_for_each(|route| game.check_route(&true_type, route))?;
                }
                reported[player] = *r;
            }
            DeviationKind::OptOut { route } => {
                game.check_route(&true_type, route)?;
                reported.remove(player);
                if !reported.is_empty() {
                    opt_out_game = Some(game.with_player_count(reported.len())?);
                }
            }
        }
        Ok(Self {
            game,
            types: reported,
            player,
            true_type,
            kind,
            opt_out_game,
        })
    }

    fn run(&self, settings: &MediatorSettings, seed: u64) -> Result<ArmRun> {
        match self.kind {
            DeviationKind::OptOut { .. } => match &self.opt_out_game {
                Some(g) => mediator_run(g, &self.types, settings, seed),
                None => Ok(ArmRun {
                    failed: false,
                    profile: Some(RouteProfile::default()),
                }),
            },
            _ => mediator_run(self.game, &self.types, settings, seed),
        }
    }

    /// Player `i`'s realized cost given this arm's mediator output.
    fn cost(&self, run: &ArmRun) -> f64 {
        let Some(profile) = &run.profile else {
            return self.game.max_route_len() as f64;
        };
        match self.kind {
            DeviationKind::Truthful => self.game.player_cost(self.player, profile),
            DeviationKind::Misreport { remap, .. } => {
                let own = remap.apply(self.game, &self.true_type, profile.route(self.player));
                cost_against(self.game, self.player, &own, profile)
            }
            DeviationKind::OptOut { route } => {
                let mut full = profile.routes.clone();
                full.insert(self.player, route.clone());
                self.game.player_cost(self.player, &RouteProfile::new(full))
            }
        }
    }
}

fn summarize(
    player: usize,
    kind: DeviationKind,
    per_trial: Vec<TrialCosts>,
    params: &PrivateParams,
) -> DeviationReport {
    let n = per_trial.len().max(1) as f64;
    let mean = |f: &dyn Fn(&TrialCosts) -> f64| per_trial.iter().map(f).sum::<f64>() / n;
    let mean_t = mean(&|c| c.truthful);
    let mean_d = mean(&|c| c.deviating);
    let diffs: Vec<f64> = per_trial.iter().map(|c| c.truthful - c.deviating).collect();
    let gain = diffs.iter().sum::<f64>() / n;
    let halfwidth = if diffs.len() > 1 {
        let var = diffs.iter().map(|d| (d - gain).powi(2)).sum::<f64>() / (n - 1.0);
        Z95 * (var / n).sqrt()
    } else {
        0.0
    };
    let verdict = if gain <= params.eta_prime + 3.0 * halfwidth {
        Verdict::WithinBound
    } else {
        Verdict::Flagged
    };
    DeviationReport {
        player,
        kind,
        trials: per_trial.len(),
        mean_cost_truthful: mean_t,
        mean_cost_deviating: mean_d,
        gain,
        halfwidth,
        fail_rate: mean(&|c| f64::from(u8::from(c.truthful_failed))),
        deviating_fail_rate: mean(&|c| f64::from(u8::from(c.deviating_failed))),
        eta: params.eta,
        eta_prime_reference: params.eta_prime,
        verdict,
        per_trial,
    }
}

fn check_player(game: &Game, types: &[PlayerType], player: usize) -> Result<()> {
    if player >= types.len() || types.len() != game.n() {
        return Err(Error::InvalidPlayer {
            index: player,
            n: types.len(),
        });
    }
    Ok(())
}

/// Monte-Carlo estimate of player `i`'s mediated cost, truthful versus the deviation.
pub fn mediated_cost(
    game: &Game,
    types: &[PlayerType],
    spec: &DeviationSpec,
    settings: &MediatorSettings,
) -> Result<DeviationReport> {
    check_player(game, types, spec.player)?;
    if spec.trials == 0 {
        return Err(Error::param("trials", 0.0, "must be at least 1"));
    }
    let params = PrivateParams::for_game(game, settings.alpha, settings.epsilon, settings.beta)?;
    params.require_feasible()?;
    let arm = DeviatingArm::new(game, types, spec.player, &spec.kind)?;
    let seeds: Vec<(u64, u64)> = (0..spec.trials as u64).map(|j| (j, trial_seed(spec.seed, j))).collect();
    let i = spec.player;

    let per_trial = map_trials(&seeds, settings.parallel, |j, seed| {
        let truthful = mediator_run(game, types, settings, seed)?;
        let deviating = match spec.kind {
            DeviationKind::Truthful => truthful.clone(),
            _ => arm.run(settings, seed)?,
        };
        Ok(TrialCosts {
            trial: j,
            seed,
            truthful: truthful_cost(game, i, &truthful),
            deviating: arm.cost(&deviating),
            truthful_failed: truthful.failed,
            deviating_failed: deviating.failed,
        })
    })?;
    Ok(summarize(i, spec.kind.clone(), per_trial, &params))
}

/// How `best_misreport_search` builds the remap for each candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemapStrategy {
    Identity,
    /// Per-suggestion empirical cost minimizer fitted on the training half.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    /// Held-out report of the candidate with the largest gain.
    pub worst_case: DeviationReport,
    pub candidates: Vec<DeviationReport>,
}

/// Searches reported types for the most profitable misreport. Each candidate's
/// remap is fitted on the first half of the trials and scored on the second.
#[allow(clippy::too_many_arguments)]
pub fn best_misreport_search(
    game: &Game,
    types: &[PlayerType],
    player: usize,
    candidates: &[PlayerType],
    trials: usize,
    seed: u64,
    strategy: RemapStrategy,
    settings: &MediatorSettings,
) -> Result<SearchReport> {
    check_player(game, types, player)?;
    if candidates.is_empty() {
        return Err(Error::param("candidates", 0.0, "need at least one candidate type"));
    }
    if trials < 2 {
        return Err(Error::param("trials", trials as f64, "need at least 2 to split"));
    }
    let params = PrivateParams::for_game(game, settings.alpha, settings.epsilon, settings.beta)?;
    params.require_feasible()?;
    let true_type = types[player];
    let true_routes = enumerate_routes(game, &true_type, DEFAULT_ROUTE_CAP)?;

    let train_len = trials / 2;
    let seeds: Vec<(u64, u64)> = (0..trials as u64).map(|j| (j, trial_seed(seed, j))).collect();
    let (train, test) = seeds.split_at(train_len);

    let truthful_test = map_trials(test, settings.parallel, |_, s| mediator_run(game, types, settings, s))?;

    let mut reports = Vec::with_capacity(candidates.len());
    for reported in candidates {
        game.check_type(reported)?;
        let mut reported_types = types.to_vec();
        reported_types[player] = *reported;

        let remap = match strategy {
            RemapStrategy::Identity => Remap::Identity,
            RemapStrategy::Empirical => {
                let runs = map_trials(train, settings.parallel, |_, s| {
                    mediator_run(game, &reported_types, settings, s)
                })?;
                fit_remap(game, player, &true_routes, &runs)
            }
        };
        let kind = DeviationKind::Misreport {
            reported: *reported,
            remap,
        };
        let arm = DeviatingArm::new(game, types, player, &kind)?;
        let deviating = map_trials(test, settings.parallel, |_, s| arm.run(settings, s))?;
        let per_trial = test
            .iter()
            .zip(&truthful_test)
            .zip(&deviating)
            .map(|((&(j, s), t), d)| TrialCosts {
                trial: j,
                seed: s,
                truthful: truthful_cost(game, player, t),
                deviating: arm.cost(d),
                truthful_failed: t.failed,
                deviating_failed: d.failed,
            })
            .collect();
        reports.push(summarize(player, kind, per_trial, &params));
    }
    let worst_case = reports
        .iter()
        .fold(None::<&DeviationReport>, |best, r| match best {
            Some(b) if b.gain >= r.gain => Some(b),
            _ => Some(r),
        })
        .cloned()
        .expect("at least one candidate");
    Ok(SearchReport {
        worst_case,
        candidates: reports,
    })
}

/// For each observed suggestion, the true route with the lowest mean training cost.
fn fit_remap(game: &Game, player: usize, true_routes: &[Route], runs: &[ArmRun]) -> Remap {
    let mut by_suggestion: BTreeMap<Route, Vec<f64>> = BTreeMap::new();
    let mut overall = vec![0.0; true_routes.len()];
    let mut converged = 0usize;
    for profile in runs.iter().filter_map(|r| r.profile.as_ref()) {
        converged += 1;
        let costs: Vec<f64> = true_routes
            .iter()
            .map(|rho| cost_against(game, player, rho, profile))
            .collect();
        for (acc, c) in overall.iter_mut().zip(&costs) {
            *acc += c;
        }
        let entry = by_suggestion
            .entry(profile.route(player).clone())
            .or_insert_with(|| vec![0.0; true_routes.len()]);
        for (acc, c) in entry.iter_mut().zip(&costs) {
            *acc += c;
        }
    }
    let argmin = |totals: &[f64]| {
        let mut best = 0;
        for (k, &v) in totals.iter().enumerate() {
            if v < totals[best] {
                best = k;
            }
        }
        true_routes[best].clone()
    };
    let fallback = if converged == 0 {
        true_routes[0].clone()
    } else {
        argmin(&overall)
    };
    let map = by_suggestion
        .into_iter()
        .map(|(suggestion, totals)| (suggestion, argmin(&totals)))
        .collect();
    Remap::Table { map, fallback }
}
