//! Routing-game model: directed graph, per-edge loss tables, player types,
//! route profiles, costs, the congestion potential and the sensitivity.
//!
//! Loss functions are stored as explicit tables over every integer load
//! `0..=n`. Linear specifications are clamped into `[0, 1]` and expanded at
//! validation time, so every downstream computation (sensitivity, potential,
//! costs) sees the same effective function.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of an edge in declaration order. Tie-breaking compares these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

/// Index of a vertex in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub usize);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Loss specification as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossSpec {
    /// `clamp(a + b * y, 0, 1)`
    Linear { a: f64, b: f64 },
    /// Explicit values for loads `0..=n`.
    Table(Vec<f64>),
}

/// Canonical loss function: one value per integer load `0..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossFunction {
    values: Vec<f64>,
}

impl LossFunction {
    fn from_spec(edge: &str, spec: &LossSpec, n: usize) -> Result<Self> {
        let values = match spec {
            LossSpec::Linear { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::LossOutOfRange {
                        edge: edge.to_string(),
                        load: 0,
                        value: if a.is_finite() { *b } else { *a },
                    });
                }
                (0..=n).map(|y| (a + b * y as f64).clamp(0.0, 1.0)).collect()
            }
            LossSpec::Table(values) => {
                if values.len() != n + 1 {
                    return Err(Error::LossTableLength {
                        edge: edge.to_string(),
                        got: values.len(),
                        expected: n + 1,
                    });
                }
                values.clone()
            }
        };
        if let Some((load, &value)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::LossOutOfRange {
                edge: edge.to_string(),
                load,
                value,
            });
        }
        Ok(Self { values })
    }

    /// Loss at integer load `y`. Panics if `y` exceeds the player count.
    #[inline]
    pub fn at(&self, y: usize) -> f64 {
        self.values[y]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest one-step increment `|l(y+1) - l(y)|` for `0 <= y < n`.
    pub fn max_increment(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEdge {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub loss: LossSpec,
}

/// Unvalidated game description, usually produced by the scenario parser.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawGame {
    pub vertices: Vec<String>,
    pub edges: Vec<RawEdge>,
    /// `(source, destination)` per player.
    pub players: Vec<(String, String)>,
    pub l_bound: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub name: String,
    pub tail: VertexId,
    pub head: VertexId,
    pub loss: LossFunction,
}

/// A player's private type: a source-destination pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlayerType {
    pub source: VertexId,
    pub destination: VertexId,
}

/// A simple path, stored as edge ids in travel order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Route(pub Vec<EdgeId>);

impl Route {
    pub fn edges(&self) -> &[EdgeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.0.contains(&e)
    }

    /// Edge ids in ascending order; the canonical summation order for costs.
    pub fn sorted_edges(&self) -> Vec<EdgeId> {
        let mut v = self.0.clone();
        v.sort_unstable();
        v
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.0.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// One route per player.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RouteProfile {
    pub routes: Vec<Route>,
}

impl RouteProfile {
    pub fn new(routes: Vec<Route>) -> Self {
        Self { routes }
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn route(&self, i: usize) -> &Route {
        &self.routes[i]
    }
}

/// A validated routing game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Game {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<EdgeId>>,
    n: usize,
    max_route_len: usize,
    sensitivity: f64,
    /// `potential_prefix[e][y] = sum_{j=1..y} l_e(j)`
    potential_prefix: Vec<Vec<f64>>,
    acyclic: bool,
}

/// Default cap for simple-path enumeration.
pub const DEFAULT_ROUTE_CAP: usize = 10_000;

impl Game {
    /// Validate a raw description. Returns the game together with the
    /// reported player types in input order.
    pub fn validate(raw: &RawGame) -> Result<(Game, Vec<PlayerType>)> {
        if raw.edges.is_empty() {
            return Err(Error::EmptyGame("at least one edge is required"));
        }
        if raw.players.is_empty() {
            return Err(Error::EmptyGame("at least one player is required"));
        }
        let n = raw.players.len();

        let mut vindex: HashMap<&str, VertexId> = HashMap::new();
        for (i, v) in raw.vertices.iter().enumerate() {
            if vindex.insert(v.as_str(), VertexId(i)).is_some() {
                return Err(Error::DuplicateId {
                    kind: "vertex",
                    id: v.clone(),
                });
            }
        }

        let mut seen_edges: BTreeSet<&str> = BTreeSet::new();
        let mut edges = Vec::with_capacity(raw.edges.len());
        for re in &raw.edges {
            if !seen_edges.insert(re.id.as_str()) {
                return Err(Error::DuplicateId {
                    kind: "edge",
                    id: re.id.clone(),
                });
            }
            let lookup = |name: &str| {
                vindex.get(name).copied().ok_or_else(|| Error::DanglingEndpoint {
                    edge: re.id.clone(),
                    vertex: name.to_string(),
                })
            };
            let tail = lookup(&re.tail)?;
            let head = lookup(&re.head)?;
            let loss = LossFunction::from_spec(&re.id, &re.loss, n)?;
            edges.push(Edge {
                name: re.id.clone(),
                tail,
                head,
                loss,
            });
        }

        let mut types = Vec::with_capacity(n);
        for (p, (s, d)) in raw.players.iter().enumerate() {
            let get = |name: &String| {
                vindex.get(name.as_str()).copied().ok_or(Error::UnknownVertex {
                    player: p,
                    vertex: name.clone(),
                })
            };
            types.push(PlayerType {
                source: get(s)?,
                destination: get(d)?,
            });
        }

        let mut game = Game::assemble(raw.vertices.clone(), edges, n, 1);
        for t in &types {
            game.check_type(t)?;
        }

        let acyclic_len = game.longest_path_if_acyclic();
        game.acyclic = acyclic_len.is_some();
        game.max_route_len = match (acyclic_len, raw.l_bound) {
            (Some(l), Some(declared)) if declared < l => return Err(Error::LBoundTooSmall { declared, found: l }),
            (Some(l), _) => l,
            (None, None) => return Err(Error::MissingLBound),
            (None, Some(declared)) => {
                let mut distinct: Vec<PlayerType> = Vec::new();
                for t in &types {
                    if !distinct.contains(t) {
                        distinct.push(*t);
                    }
                }
                for t in &distinct {
                    let found = crate::best_response::enumerate_routes(&game, t, DEFAULT_ROUTE_CAP)?
                        .iter()
                        .map(Route::len)
                        .max()
                        .unwrap_or(0);
                    if found > declared {
                        return Err(Error::LBoundTooSmall { declared, found });
                    }
                }
                declared.max(1)
            }
        };
        Ok((game, types))
    }

    fn assemble(vertices: Vec<String>, edges: Vec<Edge>, n: usize, max_route_len: usize) -> Game {
        let mut out_edges = vec![Vec::new(); vertices.len()];
        for (i, e) in edges.iter().enumerate() {
            out_edges[e.tail.0].push(EdgeId(i));
        }
        let sensitivity = edges.iter().map(|e| e.loss.max_increment()).fold(0.0, f64::max);
        let potential_prefix = edges
            .iter()
            .map(|e| {
                let mut acc = 0.0;
                let mut prefix = Vec::with_capacity(n + 1);
                prefix.push(0.0);
                for y in 1..=n {
                    acc += e.loss.at(y);
                    prefix.push(acc);
                }
                prefix
            })
            .collect();
        Game {
            vertices,
            edges,
            out_edges,
            n,
            max_route_len,
            sensitivity,
            potential_prefix,
            acyclic: true,
        }
    }

    /// The same graph restricted to `players` participants: loss tables are
    /// truncated to loads `0..=players`. Used when a player opts out of the
    /// mediator and the remaining reports form a smaller game.
    pub fn with_player_count(&self, players: usize) -> Result<Game> {
        if players == 0 || players > self.n {
            return Err(Error::InvalidPlayer {
                index: players,
                n: self.n,
            });
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                loss: LossFunction {
                    values: e.loss.values[..=players].to_vec(),
                },
                ..e.clone()
            })
            .collect();
        let mut g = Game::assemble(self.vertices.clone(), edges, players, self.max_route_len);
        g.acyclic = self.acyclic;
        Ok(g)
    }

    /// Longest path (in edges) when the graph is a DAG, `None` on a cycle.
    fn longest_path_if_acyclic(&self) -> Option<usize> {
        let nv = self.vertices.len();
        let mut indeg = vec![0usize; nv];
        for e in &self.edges {
            indeg[e.head.0] += 1;
        }
        let mut queue: VecDeque<usize> = (0..nv).filter(|&v| indeg[v] == 0).collect();
        let mut longest = vec![0usize; nv];
        let mut visited = 0;
        while let Some(v) = queue.pop_front() {
            visited += 1;
            for &eid in &self.out_edges[v] {
                let h = self.edges[eid.0].head.0;
                longest[h] = longest[h].max(longest[v] + 1);
                indeg[h] -= 1;
                if indeg[h] == 0 {
                    queue.push_back(h);
                }
            }
        }
        (visited == nv).then(|| longest.into_iter().max().unwrap_or(0).max(1))
    }

    /// Checks that a (possibly reported) type has at least one route.
    pub fn check_type(&self, t: &PlayerType) -> Result<()> {
        let nv = self.vertices.len();
        if t.source.0 >= nv || t.destination.0 >= nv {
            return Err(Error::InvalidRoute("type references unknown vertex".into()));
        }
        let no_path = || Error::NoFeasiblePath {
            source_vertex: self.vertices[t.source.0].clone(),
            destination: self.vertices[t.destination.0].clone(),
        };
        if t.source == t.destination {
            return Err(no_path());
        }
        let mut seen = vec![false; nv];
        let mut stack = vec![t.source.0];
        seen[t.source.0] = true;
        while let Some(v) = stack.pop() {
            if v == t.destination.0 {
                return Ok(());
            }
            for &eid in &self.out_edges[v] {
                let h = self.edges[eid.0].head.0;
                if !seen[h] {
                    seen[h] = true;
                    stack.push(h);
                }
            }
        }
        Err(no_path())
    }

    /// Checks that `route` is a simple path for type `t`.
    pub fn check_route(&self, t: &PlayerType, route: &Route) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidRoute(msg));
        if route.is_empty() {
            return bad("empty route".into());
        }
        let mut at = t.source;
        let mut visited = vec![at];
        for &e in route.edges() {
            let Some(edge) = self.edges.get(e.0) else {
                return bad(format!("unknown edge id {}", e.0));
            };
            if edge.tail != at {
                return bad(format!("edge `{}` does not continue the path", edge.name));
            }
            at = edge.head;
            if visited.contains(&at) {
                return bad(format!("route revisits vertex `{}`", self.vertices[at.0]));
            }
            visited.push(at);
        }
        if at != t.destination {
            return bad("route does not end at the destination".into());
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of edges `m`.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// `L`: length of the longest simple path, or the declared bound on cyclic graphs.
    pub fn max_route_len(&self) -> usize {
        self.max_route_len
    }

    /// Sensitivity: largest change in any edge loss caused by one extra player.
    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn is_acyclic(&self) -> bool {
        self.acyclic
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_id(&self, name: &str) -> Option<VertexId> {
        self.vertices.iter().position(|v| v == name).map(VertexId)
    }

    pub fn edge_id(&self, name: &str) -> Option<EdgeId> {
        self.edges.iter().position(|e| e.name == name).map(EdgeId)
    }

    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.out_edges[v.0]
    }

    /// Loss on edge `e` at integer load `y`.
    #[inline]
    pub fn loss(&self, e: EdgeId, y: usize) -> f64 {
        self.edges[e.0].loss.at(y)
    }

    /// Edge loads `y_e`: number of players whose route contains `e`.
    pub fn edge_loads(&self, profile: &RouteProfile) -> Vec<usize> {
        let mut loads = vec![0usize; self.m()];
        for r in &profile.routes {
            for e in r.edges() {
                loads[e.0] += 1;
            }
        }
        loads
    }

    /// Cost of `route` when edge `e` is charged `weight(e)`, summed in ascending edge-id order.
    pub fn route_cost_with(&self, route: &Route, weight: impl Fn(EdgeId) -> f64) -> f64 {
        route.sorted_edges().into_iter().map(weight).sum()
    }

    /// Cost of `route` under the given loads.
    pub fn route_cost(&self, route: &Route, loads: &[usize]) -> f64 {
        self.route_cost_with(route, |e| self.loss(e, loads[e.0]))
    }

    /// `c(s_i, r)`: the cost player `i` pays in `profile`.
    pub fn player_cost(&self, i: usize, profile: &RouteProfile) -> f64 {
        let loads = self.edge_loads(profile);
        self.route_cost(profile.route(i), &loads)
    }

    /// Cost player `i` would pay on `candidate` if everyone else kept their route.
    pub fn deviation_cost(&self, i: usize, candidate: &Route, profile: &RouteProfile) -> f64 {
        let loads = self.edge_loads(profile);
        let own = profile.route(i);
        self.route_cost_with(candidate, |e| {
            let y = loads[e.0] - usize::from(own.contains(e)) + 1;
            self.loss(e, y)
        })
    }

    /// Congestion potential `sum_e sum_{j=1..y_e} l_e(j)`.
    pub fn potential(&self, profile: &RouteProfile) -> f64 {
        self.potential_from_loads(&self.edge_loads(profile))
    }

    pub fn potential_from_loads(&self, loads: &[usize]) -> f64 {
        loads
            .iter()
            .zip(&self.potential_prefix)
            .map(|(&y, prefix)| prefix[y])
            .sum()
    }

    /// Validates a full profile against the types.
    pub fn check_profile(&self, types: &[PlayerType], profile: &RouteProfile) -> Result<()> {
        if types.len() != profile.len() {
            return Err(Error::InvalidRoute(format!(
                "profile has {} routes for {} players",
                profile.len(),
                types.len()
            )));
        }
        for (t, r) in types.iter().zip(&profile.routes) {
            self.check_route(t, r)?;
        }
        Ok(())
    }

    pub fn describe_route(&self, route: &Route) -> String {
        let names: Vec<&str> = route.edges().iter().map(|e| self.edges[e.0].name.as_str()).collect();
        names.join(",")
    }
}

/// Free-function form of [`Game::validate`].
pub fn validate_game(raw: &RawGame) -> Result<(Game, Vec<PlayerType>)> {
    Game::validate(raw)
}
