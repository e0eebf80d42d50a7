//! Exact and noisy best-response oracles over simple-path action sets.
//!
//! Every argmin here resolves ties by taking the lexicographically smallest
//! edge-id sequence among the minimizers. The search runs a reverse Dijkstra
//! to get cost-to-go, then walks greedily along tight edges from the source,
//! picking the smallest edge id that still admits a simple tight completion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{EdgeId, Game, PlayerType, Route, RouteProfile, VertexId};

/// Two path costs closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Outcome of an (exact or noisy) α-best-response query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    /// `None` means NA: no route improves by at least α.
    pub route: Option<Route>,
    pub old_cost: f64,
    pub new_cost: f64,
    pub improvement: f64,
}

impl BestResponse {
    pub fn moved(&self) -> bool {
        self.route.is_some()
    }
}

/// Minimum-cost simple path for `ty` under per-edge weights, with the
/// lexicographic tie rule. Weights must be nonnegative.
pub fn min_cost_route(game: &Game, ty: &PlayerType, weights: &[f64]) -> (Route, f64) {
    debug_assert_eq!(weights.len(), game.m());
    let nv = game.vertices().len();
    let dist = cost_to_go(game, ty.destination, weights);
    assert!(
        dist[ty.source.0].is_finite(),
        "destination unreachable; types are validated at load"
    );

    let tight = |e: EdgeId| {
        let edge = game.edge(e);
        let (u, w) = (edge.tail.0, edge.head.0);
        dist[w].is_finite() && weights[e.0] + dist[w] <= dist[u] + TIE_TOLERANCE
    };

    let mut on_path = vec![false; nv];
    let mut at = ty.source;
    on_path[at.0] = true;
    let mut edges = Vec::new();
    while at != ty.destination {
        let next = game
            .out_edges(at)
            .iter()
            .copied()
            .filter(|&e| tight(e) && !on_path[game.edge(e).head.0])
            .find(|&e| tight_reachable(game, game.edge(e).head, ty.destination, &on_path, &tight))
            .expect("a tight simple completion always exists");
        edges.push(next);
        at = game.edge(next).head;
        on_path[at.0] = true;
    }
    let route = Route(edges);
    let cost = game.route_cost_with(&route, |e| weights[e.0]);
    (route, cost)
}

/// Dijkstra on the reversed graph: cheapest cost from each vertex to `target`.
fn cost_to_go(game: &Game, target: VertexId, weights: &[f64]) -> Vec<f64> {
    let nv = game.vertices().len();
    let mut incoming: Vec<Vec<EdgeId>> = vec![Vec::new(); nv];
    for (i, e) in game.edges().iter().enumerate() {
        incoming[e.head.0].push(EdgeId(i));
    }
    let mut dist = vec![f64::INFINITY; nv];
    let mut done = vec![false; nv];
    dist[target.0] = 0.0;
    for _ in 0..nv {
        let Some(v) = (0..nv)
            .filter(|&v| !done[v] && dist[v].is_finite())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
        else {
            break;
        };
        done[v] = true;
        for &e in &incoming[v] {
            let u = game.edge(e).tail.0;
            let cand = dist[v] + weights[e.0];
            if cand < dist[u] {
                dist[u] = cand;
            }
        }
    }
    dist
}

fn tight_reachable(
    game: &Game,
    from: VertexId,
    target: VertexId,
    blocked: &[bool],
    tight: &impl Fn(EdgeId) -> bool,
) -> bool {
    let mut seen = blocked.to_vec();
    seen[from.0] = true;
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        if v == target {
            return true;
        }
        for &e in game.out_edges(v) {
            let h = game.edge(e).head;
            if !seen[h.0] && tight(e) {
                seen[h.0] = true;
                stack.push(h);
            }
        }
    }
    false
}

/// Weights player `i` faces with exact loads: `l_e(y_e - [e in r_i] + 1)`.
pub fn exact_weights(game: &Game, current: &Route, loads: &[usize]) -> Vec<f64> {
    (0..game.m())
        .map(|e| {
            let id = EdgeId(e);
            let y = loads[e] - usize::from(current.contains(id)) + 1;
            game.loss(id, y)
        })
        .collect()
}

/// Rounds a real-valued count to an integer load: clamp into `[0, n]`, then round half up.
pub fn round_load(count: f64, n: usize) -> usize {
    let clamped = count.clamp(0.0, n as f64);
    ((clamped + 0.5).floor() as usize).min(n)
}

/// Weights player on `current` faces with noisy loads: edges off the current
/// route are evaluated at `ŷ_e + 1`, edges on it at `ŷ_e`.
pub fn noisy_weights(game: &Game, current: &Route, noisy_loads: &[f64]) -> Vec<f64> {
    (0..game.m())
        .map(|e| {
            let id = EdgeId(e);
            let adjust = if current.contains(id) { 0.0 } else { 1.0 };
            game.loss(id, round_load(noisy_loads[e] + adjust, game.n()))
        })
        .collect()
}

fn threshold_response(game: &Game, ty: &PlayerType, current: &Route, weights: &[f64], alpha: f64) -> BestResponse {
    let old_cost = game.route_cost_with(current, |e| weights[e.0]);
    let (best, new_cost) = min_cost_route(game, ty, weights);
    let improvement = old_cost - new_cost;
    let route = (improvement >= alpha && best != *current).then_some(best);
    BestResponse {
        route,
        old_cost,
        new_cost,
        improvement,
    }
}

/// Route minimizing player `i`'s cost against the others' routes in `profile`.
pub fn exact_best_route(game: &Game, ty: &PlayerType, i: usize, profile: &RouteProfile) -> Route {
    let loads = game.edge_loads(profile);
    let w = exact_weights(game, profile.route(i), &loads);
    min_cost_route(game, ty, &w).0
}

/// α-best response with exact counts. Returns NA unless the improvement is at least `alpha`.
pub fn alpha_best_response(game: &Game, ty: &PlayerType, i: usize, profile: &RouteProfile, alpha: f64) -> BestResponse {
    let loads = game.edge_loads(profile);
    alpha_best_response_with_loads(game, ty, profile.route(i), &loads, alpha)
}

/// As [`alpha_best_response`], with the current loads already known.
pub fn alpha_best_response_with_loads(
    game: &Game,
    ty: &PlayerType,
    current: &Route,
    loads: &[usize],
    alpha: f64,
) -> BestResponse {
    let w = exact_weights(game, current, loads);
    threshold_response(game, ty, current, &w, alpha)
}

/// α-noisy best response: the same threshold rule evaluated on noisy counts.
pub fn noisy_alpha_best_response(
    game: &Game,
    ty: &PlayerType,
    current: &Route,
    noisy_loads: &[f64],
    alpha: f64,
) -> BestResponse {
    let w = noisy_weights(game, current, noisy_loads);
    threshold_response(game, ty, current, &w, alpha)
}

/// How much player `i` could save by switching to an exact best response.
pub fn regret(game: &Game, ty: &PlayerType, i: usize, profile: &RouteProfile) -> f64 {
    let loads = game.edge_loads(profile);
    regret_with_loads(game, ty, profile.route(i), &loads)
}

pub fn regret_with_loads(game: &Game, ty: &PlayerType, current: &Route, loads: &[usize]) -> f64 {
    let w = exact_weights(game, current, loads);
    let old = game.route_cost_with(current, |e| w[e.0]);
    let (_, best) = min_cost_route(game, ty, &w);
    (old - best).max(0.0)
}

/// All simple paths for `ty`, in lexicographic edge-id order.
pub fn enumerate_routes(game: &Game, ty: &PlayerType, cap: usize) -> Result<Vec<Route>> {
    let mut out = Vec::new();
    let mut on_path = vec![false; game.vertices().len()];
    let mut path = Vec::new();
    on_path[ty.source.0] = true;
    dfs(game, ty.source, ty.destination, &mut on_path, &mut path, &mut out, cap)?;
    Ok(out)
}

fn dfs(
    game: &Game,
    at: VertexId,
    target: VertexId,
    on_path: &mut [bool],
    path: &mut Vec<EdgeId>,
    out: &mut Vec<Route>,
    cap: usize,
) -> Result<()> {
    if at == target {
        if out.len() == cap {
            return Err(Error::RouteExplosion { cap });
        }
        out.push(Route(path.clone()));
        return Ok(());
    }
    for &e in game.out_edges(at) {
        let h = game.edge(e).head;
        if on_path[h.0] {
            continue;
        }
        on_path[h.0] = true;
        path.push(e);
        dfs(game, h, target, on_path, path, out, cap)?;
        path.pop();
        on_path[h.0] = false;
    }
    Ok(())
}

/// Route with the fewest edges, ties broken lexicographically (BFS over edge ids).
pub fn fewest_edges_route(game: &Game, ty: &PlayerType) -> Route {
    let w = vec![1.0; game.m()];
    min_cost_route(game, ty, &w).0
}
