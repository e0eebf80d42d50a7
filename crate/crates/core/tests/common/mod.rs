#![allow(dead_code)]

use std::path::PathBuf;

use privroute::game::{EdgeId, Game, LossSpec, PlayerType, RawEdge, RawGame, Route, RouteProfile};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

#[derive(Clone)]
pub struct Instance {
    pub label: String,
    pub raw: RawGame,
    pub game: Game,
    pub types: Vec<PlayerType>,
}

/// Shape limits for the random corpus.
#[derive(Clone, Copy)]
pub struct Shape {
    pub max_vertices: usize,
    pub max_players: usize,
    pub max_edges: usize,
    pub cyclic: bool,
}

pub const SMALL: Shape = Shape {
    max_vertices: 6,
    max_players: 20,
    max_edges: 20,
    cyclic: true,
};

fn random_loss(rng: &mut ChaCha8Rng, n: usize) -> LossSpec {
    match rng.gen_range(0..4) {
        0 => LossSpec::Linear {
            a: rng.gen_range(0.0..0.5),
            b: rng.gen_range(0.0..2.0) / n as f64,
        },
        1 => {
            let mut v: Vec<f64> = (0..=n).map(|_| rng.gen_range(0.0..=1.0)).collect();
            v.sort_by(f64::total_cmp);
            LossSpec::Table(v)
        }
        2 => LossSpec::Table((0..=n).map(|_| f64::from(rng.gen_range(0..=16u8)) / 16.0).collect()),
        _ => LossSpec::Table((0..=n).map(|_| rng.gen_range(0.0..=1.0)).collect()),
    }
}

/// Random connected game. A spine `v0 -> v1 -> ... ` guarantees every
/// forward pair has a route; cyclic instances get one back edge and a
/// declared `L_bound` computed by the oracle.
pub fn random_instance(seed: u64, shape: Shape) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = rng.gen_range(2..=shape.max_vertices);
    let n = rng.gen_range(1..=shape.max_players);
    let vertices: Vec<String> = (0..nv).map(|v| format!("v{v}")).collect();
    let mut arcs: Vec<(usize, usize)> = (0..nv - 1).map(|v| (v, v + 1)).collect();
    let m = rng.gen_range(arcs.len()..=shape.max_edges.max(arcs.len()));
    let cyclic = shape.cyclic && nv >= 3 && rng.gen_bool(0.25);
    while arcs.len() < m {
        let a = rng.gen_range(0..nv);
        let b = rng.gen_range(0..nv);
        let back = cyclic && a > b && !arcs.iter().any(|&(x, y)| x > y);
        if a < b || back {
            arcs.push((a, b));
        }
    }
    arcs.shuffle(&mut rng);
    let edges: Vec<RawEdge> = arcs
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| RawEdge {
            id: format!("e{k}"),
            tail: vertices[a].clone(),
            head: vertices[b].clone(),
            loss: random_loss(&mut rng, n),
        })
        .collect();
    let players: Vec<(usize, usize)> = (0..n)
        .map(|_| {
            let a = rng.gen_range(0..nv - 1);
            let b = rng.gen_range(a + 1..nv);
            (a, b)
        })
        .collect();
    let l_bound = if arcs.iter().any(|&(a, b)| a > b) {
        let longest = players
            .iter()
            .flat_map(|&(s, d)| oracle_routes(nv, &arcs, s, d))
            .map(|r| r.len())
            .max()
            .unwrap();
        Some(longest + rng.gen_range(0..2))
    } else {
        None
    };
    let raw = RawGame {
        vertices: vertices.clone(),
        edges,
        players: players
            .iter()
            .map(|&(a, b)| (vertices[a].clone(), vertices[b].clone()))
            .collect(),
        l_bound,
    };
    let (game, types) = Game::validate(&raw).expect("corpus instance validates");
    Instance {
        label: format!("seed={seed} n={n} m={m} v={nv} cyclic={}", l_bound.is_some()),
        raw,
        game,
        types,
    }
}

pub fn corpus(count: u64, base: u64, shape: Shape) -> Vec<Instance> {
    (0..count).map(|k| random_instance(base + k, shape)).collect()
}

pub fn arcs_of(game: &Game) -> Vec<(usize, usize)> {
    game.edges().iter().map(|e| (e.tail.0, e.head.0)).collect()
}

/// All simple `s -> d` paths as edge-index lists, by plain DFS over vertices.
pub fn oracle_routes(nv: usize, arcs: &[(usize, usize)], s: usize, d: usize) -> Vec<Vec<usize>> {
    fn go(
        v: usize,
        d: usize,
        arcs: &[(usize, usize)],
        seen: &mut Vec<bool>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if v == d {
            out.push(path.clone());
            return;
        }
        for (k, &(a, b)) in arcs.iter().enumerate() {
            if a == v && !seen[b] {
                seen[b] = true;
                path.push(k);
                go(b, d, arcs, seen, path, out);
                path.pop();
                seen[b] = false;
            }
        }
    }
    let mut seen = vec![false; nv];
    seen[s] = true;
    let mut out = Vec::new();
    go(s, d, arcs, &mut seen, &mut Vec::new(), &mut out);
    out
}

pub fn routes_for(game: &Game, t: &PlayerType) -> Vec<Route> {
    oracle_routes(game.vertices().len(), &arcs_of(game), t.source.0, t.destination.0)
        .into_iter()
        .map(|r| Route(r.into_iter().map(EdgeId).collect()))
        .collect()
}

/// Loss table of every edge, read once from the game.
pub fn tables(game: &Game) -> Vec<Vec<f64>> {
    game.edges().iter().map(|e| e.loss.values().to_vec()).collect()
}

pub fn oracle_loads(m: usize, routes: &[Route]) -> Vec<usize> {
    let mut y = vec![0; m];
    for r in routes {
        for e in r.edges() {
            y[e.0] += 1;
        }
    }
    y
}

/// Cost of `route` at `loads`, summed in ascending edge order.
pub fn oracle_cost(tables: &[Vec<f64>], route: &Route, loads: &[usize]) -> f64 {
    let mut es: Vec<usize> = route.edges().iter().map(|e| e.0).collect();
    es.sort_unstable();
    es.iter().map(|&e| tables[e][loads[e]]).sum()
}

/// Cost to player `i` of each of her routes with everyone else fixed.
pub fn oracle_deviation_costs(
    game: &Game,
    tables: &[Vec<f64>],
    t: &PlayerType,
    i: usize,
    profile: &RouteProfile,
) -> Vec<(Route, f64)> {
    routes_for(game, t)
        .into_iter()
        .map(|rho| {
            let mut routes = profile.routes.clone();
            routes[i] = rho.clone();
            let loads = oracle_loads(game.m(), &routes);
            let c = oracle_cost(tables, &rho, &loads);
            (rho, c)
        })
        .collect()
}

pub fn oracle_regret(game: &Game, t: &PlayerType, i: usize, profile: &RouteProfile) -> f64 {
    let tables = tables(game);
    let loads = oracle_loads(game.m(), &profile.routes);
    let own = oracle_cost(&tables, profile.route(i), &loads);
    let best = oracle_deviation_costs(game, &tables, t, i, profile)
        .into_iter()
        .map(|(_, c)| c)
        .fold(f64::INFINITY, f64::min);
    (own - best).max(0.0)
}

pub fn oracle_max_regret(game: &Game, types: &[PlayerType], profile: &RouteProfile) -> f64 {
    types
        .iter()
        .enumerate()
        .map(|(i, t)| oracle_regret(game, t, i, profile))
        .fold(0.0, f64::max)
}

/// Uniformly random route per player.
pub fn random_profile(rng: &mut ChaCha8Rng, game: &Game, types: &[PlayerType]) -> RouteProfile {
    RouteProfile::new(
        types
            .iter()
            .map(|t| routes_for(game, t).choose(rng).unwrap().clone())
            .collect(),
    )
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
