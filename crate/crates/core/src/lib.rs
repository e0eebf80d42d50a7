//! Jointly differentially private best-response dynamics for atomic routing games.
//!
//! A trusted mediator runs α-best-response dynamics on behalf of the players,
//! but every player sees edge loads only through per-edge binary-mechanism
//! counters. See the crate README for the module map.

pub mod best_response;
pub mod cli;
pub mod counter;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod harness;
pub mod params;
pub mod scenario;

pub use best_response::{
    alpha_best_response, enumerate_routes, exact_best_route, noisy_alpha_best_response, regret, BestResponse,
};
pub use counter::{error_bound, EpsilonPrime, PrivateCounter};
pub use dynamics::{run_br_exact, run_br_private, EngineConfig, RunOutcome, RunStatus};
pub use error::{Error, Result};
pub use game::{validate_game, EdgeId, Game, LossSpec, PlayerType, RawEdge, RawGame, Route, RouteProfile, VertexId};
pub use harness::{
    best_misreport_search, evaluate_profile, mediated_cost, DeviationKind, DeviationReport, DeviationSpec,
};
pub use params::{derive_private_params, eta_bound, eta_prime_bound, exact_params, PrivateParams};
