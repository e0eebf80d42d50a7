//! Line-oriented scenario files.
//!
//! ```text
//! file      = { line } ;
//! line      = blank | comment | header | entry ;
//! comment   = "#" { any } ;
//! header    = "[" section "]" ;
//! section   = "scenario" | "defaults" | "vertices" | "edges" | "players" ;
//! entry     = scenario-kv | default-kv | vertex-list | edge | player ;
//! scenario-kv = ( "name" | "description" ) "=" text | "L_bound" "=" uint ;
//! default-kv  = ( "alpha" | "epsilon" | "beta" ) "=" number ;
//! vertex-list = name { name } ;
//! edge      = name name name loss ;
//! loss      = "linear" number number | "table" number { number } ;
//! player    = name name [ "*" uint ] ;
//! ```
//!
//! `linear a b` is the loss `clamp(a + b*y, 0, 1)`; a table lists the values at
//! loads `0..=n`. Text after `#` on any line is ignored. A player line with
//! `*k` declares `k` identical players.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, LossSpec, PlayerType, RawEdge, RawGame};

/// Parameter defaults a scenario may carry.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Defaults {
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub raw: RawGame,
    pub defaults: Defaults,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Scenario,
    Defaults,
    Vertices,
    Edges,
    Players,
}

/// Source lines of each declaration, for semantic diagnostics.
#[derive(Debug, Default)]
struct Lines {
    edges: Vec<usize>,
    players: Vec<usize>,
    l_bound: usize,
}

fn parse_err(line: usize, field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        field: field.into(),
        message: message.into(),
    }
}

fn number(tok: &str, line: usize, field: &str) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(line, field, format!("expected a finite number, got `{tok}`")))
}

fn uint(tok: &str, line: usize, field: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| parse_err(line, field, format!("expected a non-negative integer, got `{tok}`")))
}

impl Scenario {
    pub fn parse_str(text: &str) -> Result<Scenario> {
        let (scenario, lines) = Self::parse_syntax(text)?;
        scenario.check_semantics(&lines)?;
        Ok(scenario)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Scenario> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    fn parse_syntax(text: &str) -> Result<(Scenario, Lines)> {
        let mut sc = Scenario::default();
        let mut lines = Lines::default();
        let mut section = Section::None;
        for (idx, raw_line) in text.lines().enumerate() {
            let ln = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| parse_err(ln, "section", "missing `]`"))?
                    .trim();
                section = match name {
                    "scenario" => Section::Scenario,
                    "defaults" => Section::Defaults,
                    "vertices" => Section::Vertices,
                    "edges" => Section::Edges,
                    "players" => Section::Players,
                    other => return Err(parse_err(ln, "section", format!("unknown section `{other}`"))),
                };
                continue;
            }
            match section {
                Section::None => return Err(parse_err(ln, "section", "content before the first section header")),
                Section::Scenario => sc.parse_meta(content, ln, &mut lines)?,
                Section::Defaults => sc.parse_default(content, ln)?,
                Section::Vertices => sc.raw.vertices.extend(content.split_whitespace().map(str::to_string)),
                Section::Edges => {
                    sc.parse_edge(content, ln)?;
                    lines.edges.push(ln);
                }
                Section::Players => {
                    let count = sc.parse_player(content, ln)?;
                    lines.players.extend(std::iter::repeat_n(ln, count));
                }
            }
        }
        Ok((sc, lines))
    }

    fn key_value(content: &str, ln: usize, section: &str) -> Result<(String, String)> {
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| parse_err(ln, section, "expected `key = value`"))?;
        Ok((k.trim().to_string(), v.trim().to_string()))
    }

    fn parse_meta(&mut self, content: &str, ln: usize, lines: &mut Lines) -> Result<()> {
        let (k, v) = Self::key_value(content, ln, "scenario")?;
        match k.as_str() {
            "name" => self.name = v,
            "description" => self.description = v,
            "L_bound" => {
                self.raw.l_bound = Some(uint(&v, ln, "scenario.L_bound")?);
                lines.l_bound = ln;
            }
            other => return Err(parse_err(ln, format!("scenario.{other}"), "unknown key")),
        }
        Ok(())
    }

    fn parse_default(&mut self, content: &str, ln: usize) -> Result<()> {
        let (k, v) = Self::key_value(content, ln, "defaults")?;
        let field = format!("defaults.{k}");
        let slot = match k.as_str() {
            "alpha" => &mut self.defaults.alpha,
            "epsilon" => &mut self.defaults.epsilon,
            "beta" => &mut self.defaults.beta,
            _ => return Err(parse_err(ln, field, "unknown key")),
        };
        *slot = Some(number(&v, ln, &field)?);
        Ok(())
    }

    fn parse_edge(&mut self, content: &str, ln: usize) -> Result<()> {
        let toks: Vec<&str> = content.split_whitespace().collect();
        let id = toks[0];
        let field = |f: &str| format!("edges.{id}.{f}");
        let tail = toks.get(1).ok_or_else(|| parse_err(ln, field("tail"), "missing"))?;
        let head = toks.get(2).ok_or_else(|| parse_err(ln, field("head"), "missing"))?;
        let kind = toks
            .get(3)
            .ok_or_else(|| parse_err(ln, field("loss"), "missing loss spec"))?;
        let args = &toks[4..];
        let loss = match *kind {
            "linear" => {
                if args.len() != 2 {
                    return Err(parse_err(ln, field("loss"), "`linear` takes exactly two numbers"));
                }
                LossSpec::Linear {
                    a: number(args[0], ln, &field("loss.a"))?,
                    b: number(args[1], ln, &field("loss.b"))?,
                }
            }
            "table" => {
                if args.is_empty() {
                    return Err(parse_err(ln, field("loss"), "`table` needs at least one value"));
                }
                let values = args
                    .iter()
                    .enumerate()
                    .map(|(j, t)| number(t, ln, &field(&format!("loss[{j}]"))))
                    .collect::<Result<Vec<_>>>()?;
                LossSpec::Table(values)
            }
            other => return Err(parse_err(ln, field("loss"), format!("unknown loss kind `{other}`"))),
        };
        self.raw.edges.push(RawEdge {
            id: id.to_string(),
            tail: tail.to_string(),
            head: head.to_string(),
            loss,
        });
        Ok(())
    }

    fn parse_player(&mut self, content: &str, ln: usize) -> Result<usize> {
        let toks: Vec<&str> = content.split_whitespace().collect();
        let field = format!("players[{}]", self.raw.players.len());
        let src = toks[0];
        let dst = toks
            .get(1)
            .ok_or_else(|| parse_err(ln, format!("{field}.destination"), "missing"))?;
        let count = match toks.get(2) {
            None => 1,
            Some(t) => {
                let c = t
                    .strip_prefix('*')
                    .ok_or_else(|| parse_err(ln, format!("{field}.count"), format!("expected `*count`, got `{t}`")))?;
                let c = uint(c, ln, &format!("{field}.count"))?;
                if c == 0 {
                    return Err(parse_err(ln, format!("{field}.count"), "must be at least 1"));
                }
                c
            }
        };
        if toks.len() > 3 {
            return Err(parse_err(ln, field, "trailing tokens"));
        }
        for _ in 0..count {
            self.raw.players.push((src.to_string(), dst.to_string()));
        }
        Ok(count)
    }

    /// Runs game validation and pins any failure to the offending line.
    fn check_semantics(&self, lines: &Lines) -> Result<()> {
        let Err(err) = Game::validate(&self.raw) else {
            return Ok(());
        };
        let edge_line = |name: &str| {
            self.raw
                .edges
                .iter()
                .position(|e| e.id == name)
                .map_or(0, |k| lines.edges[k])
        };
        let (line, field) = match &err {
            Error::DanglingEndpoint { edge, .. } => (edge_line(edge), format!("edges.{edge}")),
            Error::DuplicateId { kind: "edge", id } => {
                let k = self.raw.edges.iter().rposition(|e| &e.id == id).unwrap_or(0);
                (lines.edges.get(k).copied().unwrap_or(0), format!("edges.{id}"))
            }
            Error::LossOutOfRange { edge, .. } | Error::LossTableLength { edge, .. } => {
                (edge_line(edge), format!("edges.{edge}.loss"))
            }
            Error::UnknownVertex { player, .. } => (
                lines.players.get(*player).copied().unwrap_or(0),
                format!("players[{player}]"),
            ),
            Error::NoFeasiblePath {
                source_vertex,
                destination,
            } => {
                let k = self
                    .raw
                    .players
                    .iter()
                    .position(|(s, d)| s == source_vertex && d == destination);
                (
                    k.and_then(|k| lines.players.get(k).copied()).unwrap_or(0),
                    format!("players[{}]", k.unwrap_or(0)),
                )
            }
            Error::MissingLBound | Error::LBoundTooSmall { .. } => (lines.l_bound, "scenario.L_bound".to_string()),
            _ => (0, "scenario".to_string()),
        };
        Err(parse_err(line, field, err.to_string()))
    }

    /// Validated game and type profile.
    pub fn game(&self) -> Result<(Game, Vec<PlayerType>)> {
        Game::validate(&self.raw)
    }

    /// Canonical text form; `parse_str(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("[scenario]\n");
        if !self.name.is_empty() {
            let _ = writeln!(out, "name = {}", self.name);
        }
        if !self.description.is_empty() {
            let _ = writeln!(out, "description = {}", self.description);
        }
        if let Some(l) = self.raw.l_bound {
            let _ = writeln!(out, "L_bound = {l}");
        }
        let d = &self.defaults;
        if d.alpha.is_some() || d.epsilon.is_some() || d.beta.is_some() {
            out.push_str("\n[defaults]\n");
            for (k, v) in [("alpha", d.alpha), ("epsilon", d.epsilon), ("beta", d.beta)] {
                if let Some(v) = v {
                    let _ = writeln!(out, "{k} = {v:?}");
                }
            }
        }
        out.push_str("\n[vertices]\n");
        let _ = writeln!(out, "{}", self.raw.vertices.join(" "));
        out.push_str("\n[edges]\n");
        for e in &self.raw.edges {
            let _ = write!(out, "{} {} {} ", e.id, e.tail, e.head);
            match &e.loss {
                LossSpec::Linear { a, b } => {
                    let _ = writeln!(out, "linear {a:?} {b:?}");
                }
                LossSpec::Table(values) => {
                    out.push_str("table");
                    for v in values {
                        let _ = write!(out, " {v:?}");
                    }
                    out.push('\n');
                }
            }
        }
        out.push_str("\n[players]\n");
        for (s, t) in &self.raw.players {
            let _ = writeln!(out, "{s} {t}");
        }
        out
    }
}

/// Reads and fully validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    Scenario::from_path(path)
}
