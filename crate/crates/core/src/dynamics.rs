//! Round-robin best-response engines.
//!
//! Both engines place every player on a fewest-edges route, then play
//! `n·T` turns. On turn `t` the mover is player `(t - 1) mod n`. The exact
//! engine reads true edge loads; the private engine reads the releases of one
//! binary-mechanism counter per edge, which are fed the `n` placement symbols
//! followed by one symbol per turn. A run fails as soon as any player's
//! accepted moves exceed the move budget `k`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::best_response::{
    alpha_best_response_with_loads, fewest_edges_route, noisy_alpha_best_response, regret_with_loads,
};
use crate::counter::{EpsilonPrime, PrivateCounter};
use crate::error::{Error, Result};
use crate::game::{EdgeId, Game, PlayerType, Route, RouteProfile};
use crate::params::{exact_params, GameDims, PrivateParams};

/// What to keep in the per-turn trace beyond the always-on fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Exact regret of the mover after the turn.
    pub mover_regret: bool,
    /// Nonzero stream symbols of each turn.
    pub symbols: bool,
    /// Full noisy-load snapshot and exact counter counts after each turn (`O(m)` per turn).
    pub noisy_loads: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub alpha: f64,
    /// `T`: the engine plays `n·T` turns.
    pub rounds: u64,
    /// `k`: per-player move budget.
    pub move_budget: u64,
    pub epsilon_prime: EpsilonPrime,
    pub seed: u64,
    pub trace: TraceOptions,
}

impl EngineConfig {
    /// Exact-engine defaults: `T = ⌈mn/α⌉`, `k = ⌈4LmnΔℓ/α²⌉`.
    pub fn exact(game: &Game, alpha: f64) -> Result<Self> {
        let p = exact_params(GameDims::of(game), alpha)?;
        Ok(Self {
            alpha,
            rounds: p.t,
            move_budget: p.k_algorithm,
            epsilon_prime: EpsilonPrime::Infinite,
            seed: 0,
            trace: TraceOptions::default(),
        })
    }

    /// Private-engine configuration derived from a parameter set.
    pub fn private(params: &PrivateParams, seed: u64) -> Self {
        Self {
            alpha: params.alpha,
            rounds: params.t,
            move_budget: params.k,
            epsilon_prime: EpsilonPrime::Finite(params.epsilon_prime),
            seed,
            trace: TraceOptions::default(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(Error::param("alpha", self.alpha, "must be positive"));
        }
        if self.rounds == 0 {
            return Err(Error::param("T", 0.0, "must be at least 1"));
        }
        if self.move_budget == 0 {
            return Err(Error::param("k", 0.0, "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    Fail,
}

/// Which player broke the move budget, and when.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailInfo {
    pub player: usize,
    pub turn: u64,
    pub moves: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    /// 1-based turn index.
    pub t: u64,
    pub mover: usize,
    /// The route moved to, `None` when the mover stayed.
    pub new_route: Option<Route>,
    /// Potential after the turn.
    pub potential: f64,
    /// Mover's true cost before minus after the turn; zero on a stay.
    pub exact_cost_drop: f64,
    pub mover_regret: Option<f64>,
    /// `max_e |ŷ_e - y_e|` after the counters absorbed this turn.
    pub max_counter_error: Option<f64>,
    pub symbols: Option<Vec<(EdgeId, i8)>>,
    pub noisy_loads: Option<Vec<f64>>,
    /// Exact prefix sums held by the counters after the turn.
    pub counter_counts: Option<Vec<i64>>,
}

impl TurnRecord {
    pub fn moved(&self) -> bool {
        self.new_route.is_some()
    }
}

/// An accepted move as `(turn, mover, new route)`.
pub type Move = (u64, usize, Route);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub status: RunStatus,
    /// Suggested profile; present only on convergence.
    pub final_profile: Option<RouteProfile>,
    /// Profile when the engine stopped, for diagnostics.
    pub halted_profile: RouteProfile,
    pub initial_profile: RouteProfile,
    pub initial_potential: f64,
    /// Noisy loads after the placement symbols, when noisy loads are traced.
    pub initial_noisy_loads: Option<Vec<f64>>,
    pub trace: Vec<TurnRecord>,
    /// Accepted moves per player (the initial placement is not counted).
    pub move_counts: Vec<u64>,
    pub failure: Option<FailInfo>,
    /// Largest counter error seen over the whole run, private engine only.
    pub max_counter_error: Option<f64>,
    pub config: EngineConfig,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn accepted_moves(&self) -> u64 {
        self.move_counts.iter().sum()
    }

    pub fn moves(&self) -> Vec<Move> {
        self.trace
            .iter()
            .filter_map(|r| r.new_route.clone().map(|route| (r.t, r.mover, route)))
            .collect()
    }

    pub fn turns_played(&self) -> u64 {
        self.trace.len() as u64
    }
}

/// Fewest-edges starting route for every player.
pub fn initial_profile(game: &Game, types: &[PlayerType]) -> RouteProfile {
    RouteProfile::new(types.iter().map(|t| fewest_edges_route(game, t)).collect())
}

/// Per-edge stream symbols of a move: -1 on left edges, +1 on joined edges.
pub fn move_symbols(m: usize, old: &Route, new: &Route) -> Vec<i8> {
    let mut symbols = vec![0i8; m];
    for &e in old.edges() {
        if !new.contains(e) {
            symbols[e.0] = -1;
        }
    }
    for &e in new.edges() {
        if !old.contains(e) {
            symbols[e.0] = 1;
        }
    }
    symbols
}

/// Replaces player `i`'s route and returns the new profile with the stream symbols.
pub fn apply_move(profile: &RouteProfile, m: usize, i: usize, new_route: Route) -> (RouteProfile, Vec<i8>) {
    let symbols = move_symbols(m, profile.route(i), &new_route);
    let mut next = profile.clone();
    next.routes[i] = new_route;
    (next, symbols)
}

fn check_types(game: &Game, types: &[PlayerType]) -> Result<()> {
    if types.len() != game.n() {
        return Err(Error::InvalidPlayer {
            index: types.len(),
            n: game.n(),
        });
    }
    types.iter().try_for_each(|t| game.check_type(t))
}

enum LoadView {
    Exact,
    Counters {
        counters: Vec<PrivateCounter>,
        noisy: Vec<f64>,
        max_error: f64,
    },
}

impl LoadView {
    fn counters(game: &Game, config: &EngineConfig, initial: &RouteProfile) -> Result<Self> {
        let budget = game.n() as u64 * (config.rounds + 1);
        let counters = (0..game.m())
            .map(|e| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(e as u64);
                PrivateCounter::with_rng(budget, config.epsilon_prime, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut view = LoadView::Counters {
            counters,
            noisy: vec![0.0; game.m()],
            max_error: 0.0,
        };
        for r in &initial.routes {
            let symbols: Vec<i8> = (0..game.m()).map(|e| i8::from(r.contains(EdgeId(e)))).collect();
            view.feed(&symbols)?;
        }
        Ok(view)
    }

    /// Feeds one symbol per edge; returns this step's max counter error.
    fn feed(&mut self, symbols: &[i8]) -> Result<Option<f64>> {
        match self {
            LoadView::Exact => Ok(None),
            LoadView::Counters {
                counters,
                noisy,
                max_error,
            } => {
                let mut step = 0.0f64;
                for ((c, y), &s) in counters.iter_mut().zip(noisy.iter_mut()).zip(symbols) {
                    *y = c.feed(s)?;
                    step = step.max((*y - c.exact_count() as f64).abs());
                }
                *max_error = max_error.max(step);
                Ok(Some(step))
            }
        }
    }
}

fn run_engine(game: &Game, types: &[PlayerType], config: &EngineConfig, private: bool) -> Result<RunOutcome> {
    check_types(game, types)?;
    config.check()?;
    let n = game.n();
    let m = game.m();
    let initial = initial_profile(game, types);
    let mut profile = initial.clone();
    let mut loads = game.edge_loads(&profile);
    let mut view = if private {
        LoadView::counters(game, config, &initial)?
    } else {
        LoadView::Exact
    };
    let initial_potential = game.potential_from_loads(&loads);
    let initial_noisy_loads = match (&view, config.trace.noisy_loads) {
        (LoadView::Counters { noisy, .. }, true) => Some(noisy.clone()),
        _ => None,
    };
    let mut move_counts = vec![0u64; n];
    let mut trace = Vec::new();
    let mut failure = None;
    let total_turns = n as u64 * config.rounds;

    for t in 1..=total_turns {
        let i = ((t - 1) % n as u64) as usize;
        let current = profile.route(i).clone();
        let response = match &view {
            LoadView::Exact => alpha_best_response_with_loads(game, &types[i], &current, &loads, config.alpha),
            LoadView::Counters { noisy, .. } => {
                noisy_alpha_best_response(game, &types[i], &current, noisy, config.alpha)
            }
        };

        let mut exact_cost_drop = 0.0;
        let symbols = match &response.route {
            Some(next) => {
                let before = game.route_cost(&current, &loads);
                let symbols = move_symbols(m, &current, next);
                for (y, &s) in loads.iter_mut().zip(&symbols) {
                    *y = (*y as i64 + i64::from(s)) as usize;
                }
                profile.routes[i] = next.clone();
                exact_cost_drop = before - game.route_cost(next, &loads);
                move_counts[i] += 1;
                symbols
            }
            None => vec![0i8; m],
        };
        let step_error = view.feed(&symbols)?;

        trace.push(TurnRecord {
            t,
            mover: i,
            new_route: response.route,
            potential: game.potential_from_loads(&loads),
            exact_cost_drop,
            mover_regret: config
                .trace
                .mover_regret
                .then(|| regret_with_loads(game, &types[i], profile.route(i), &loads)),
            max_counter_error: step_error,
            symbols: config.trace.symbols.then(|| {
                symbols
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| s != 0)
                    .map(|(e, &s)| (EdgeId(e), s))
                    .collect()
            }),
            noisy_loads: match (&view, config.trace.noisy_loads) {
                (LoadView::Counters { noisy, .. }, true) => Some(noisy.clone()),
                _ => None,
            },
            counter_counts: match (&view, config.trace.noisy_loads) {
                (LoadView::Counters { counters, .. }, true) => Some(counters.iter().map(|c| c.exact_count()).collect()),
                _ => None,
            },
        });

        if move_counts[i] > config.move_budget {
            failure = Some(FailInfo {
                player: i,
                turn: t,
                moves: move_counts[i],
            });
            break;
        }
    }

    let status = if failure.is_some() {
        RunStatus::Fail
    } else {
        RunStatus::Converged
    };
    Ok(RunOutcome {
        status,
        final_profile: (status == RunStatus::Converged).then(|| profile.clone()),
        halted_profile: profile,
        initial_profile: initial,
        initial_potential,
        initial_noisy_loads,
        trace,
        move_counts,
        failure,
        max_counter_error: match view {
            LoadView::Counters { max_error, .. } => Some(max_error),
            LoadView::Exact => None,
        },
        config: config.clone(),
    })
}

/// Best-response dynamics on exact edge loads. `config.epsilon_prime` is ignored.
pub fn run_br_exact(game: &Game, types: &[PlayerType], config: &EngineConfig) -> Result<RunOutcome> {
    run_engine(game, types, config, false)
}

/// Best-response dynamics on binary-mechanism counts with the given configuration.
/// With `EpsilonPrime::Infinite` the counters are noiseless.
pub fn run_counter_engine(game: &Game, types: &[PlayerType], config: &EngineConfig) -> Result<RunOutcome> {
    run_engine(game, types, config, true)
}

/// A private run together with the schedule it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivateRun {
    pub params: PrivateParams,
    pub outcome: RunOutcome,
}

/// The private mediator: derives `T`, `k`, `ε′` from `(α, ε, β)`, checks
/// `α > 4Δ_T(β)` and runs the counter engine.
pub fn run_br_private(
    game: &Game,
    types: &[PlayerType],
    epsilon: f64,
    beta: f64,
    alpha: f64,
    seed: u64,
) -> Result<PrivateRun> {
    let params = PrivateParams::for_game(game, alpha, epsilon, beta)?;
    params.require_feasible()?;
    let outcome = run_counter_engine(game, types, &EngineConfig::private(&params, seed))?;
    Ok(PrivateRun { params, outcome })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::best_response::regret;
    use crate::game::{LossSpec, RawEdge, RawGame};

    fn r(ids: &[usize]) -> Route {
        Route(ids.iter().map(|&i| EdgeId(i)).collect())
    }

    fn parallel(tables: &[Vec<f64>], n: usize) -> (Game, Vec<PlayerType>) {
        let raw = RawGame {
            vertices: vec!["u".into(), "v".into()],
            edges: tables
                .iter()
                .enumerate()
                .map(|(i, t)| RawEdge {
                    id: format!("e{i}"),
                    tail: "u".into(),
                    head: "v".into(),
                    loss: LossSpec::Table(t.clone()),
                })
                .collect(),
            players: vec![("u".into(), "v".into()); n],
            l_bound: None,
        };
        Game::validate(&raw).unwrap()
    }

    #[test]
    fn symbols_of_moves() {
        assert_eq!(move_symbols(3, &r(&[0]), &r(&[1])), vec![-1, 1, 0]);
        assert_eq!(move_symbols(3, &r(&[0]), &r(&[0])), vec![0, 0, 0]);
        assert_eq!(move_symbols(3, &r(&[0, 1]), &r(&[1, 2])), vec![-1, 0, 1]);
        let p = RouteProfile::new(vec![r(&[0]), r(&[2])]);
        let (q, s) = apply_move(&p, 3, 1, r(&[1]));
        assert_eq!(q.routes, vec![r(&[0]), r(&[1])]);
        assert_eq!(s, vec![0, 1, -1]);
    }

    #[test]
    fn two_players_split_across_parallel_edges() {
        let (g, t) = parallel(&[vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0]], 2);
        let cfg = EngineConfig::exact(&g, 0.4).unwrap();
        let out = run_br_exact(&g, &t, &cfg).unwrap();
        assert!(out.converged());
        let fin = out.final_profile.as_ref().unwrap();
        assert_ne!(fin.route(0), fin.route(1));
        for (i, ty) in t.iter().enumerate() {
            assert_eq!(g.player_cost(i, fin), 0.5);
            assert_eq!(regret(&g, ty, i, fin), 0.0);
        }
        assert_eq!(out.accepted_moves(), 1);
    }

    #[test]
    fn nash_start_makes_no_moves() {
        let (g, t) = parallel(&[vec![0.0, 0.2, 0.4], vec![0.0, 0.9, 1.0]], 2);
        let out = run_br_exact(&g, &t, &EngineConfig::exact(&g, 0.1).unwrap()).unwrap();
        assert!(out.converged());
        assert_eq!(out.accepted_moves(), 0);
        assert_eq!(out.turns_played(), 2 * out.config.rounds);
    }

    #[test]
    fn potential_drops_by_alpha_on_every_move() {
        let (g, t) = parallel(
            &[
                vec![0.0, 0.1, 0.5, 0.9, 1.0],
                vec![0.0, 0.2, 0.3, 0.6, 1.0],
                vec![0.0, 0.4, 0.5, 0.6, 0.7],
            ],
            4,
        );
        let alpha = 0.05;
        let out = run_br_exact(&g, &t, &EngineConfig::exact(&g, alpha).unwrap()).unwrap();
        let mut prev = out.initial_potential;
        for rec in &out.trace {
            if rec.moved() {
                assert!(prev - rec.potential >= alpha - 1e-12);
            } else {
                assert_eq!(prev, rec.potential);
            }
            prev = rec.potential;
        }
        assert!(out.accepted_moves() > 0);
    }

    #[test]
    fn breaching_the_move_budget_fails() {
        let (g, t) = parallel(&[vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0]], 2);
        let mut cfg = EngineConfig::exact(&g, 0.4).unwrap();
        cfg.move_budget = 1;
        let out = run_br_exact(&g, &t, &cfg).unwrap();
        // one move per player is within budget
        assert!(out.converged());
    }

    #[test]
    fn counter_engine_determinism() {
        let (g, t) = parallel(&[vec![0.0, 0.3, 0.6, 0.9], vec![0.0, 0.2, 0.5, 1.0]], 3);
        let mut cfg = EngineConfig::exact(&g, 0.2).unwrap();
        cfg.epsilon_prime = EpsilonPrime::Finite(2.0);
        cfg.seed = 9;
        cfg.trace.noisy_loads = true;
        let a = run_counter_engine(&g, &t, &cfg).unwrap();
        let b = run_counter_engine(&g, &t, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.max_counter_error.unwrap() > 0.0);
    }

    #[test]
    fn wrong_type_count_is_rejected() {
        let (g, t) = parallel(&[vec![0.0, 0.3, 0.6]], 2);
        let cfg = EngineConfig::exact(&g, 0.2).unwrap();
        assert!(run_br_exact(&g, &t[..1], &cfg).is_err());
    }

    #[test]
    fn infeasible_alpha_is_reported() {
        let (g, t) = parallel(&[vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0]], 2);
        match run_br_private(&g, &t, 0.5, 0.1, 0.4, 1).unwrap_err() {
            Error::InfeasibleAlpha { delta_t, threshold, .. } => {
                assert!(delta_t > 0.0);
                assert_eq!(threshold, 4.0 * delta_t);
            }
            e => panic!("unexpected {e}"),
        }
    }
}
