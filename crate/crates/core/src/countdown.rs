//! Countdown games: model, text format, minimax solver, random generation,
//! and the encoding as an MDP against a uniformly randomizing opponent.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mdp::{ActionId, Distribution, Mdp, MdpBuilder, StateId, LABEL_HELL, LABEL_START};

pub const LABEL_TARGET: &str = "target";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: usize,
    pub weight: u64,
    pub to: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("edge weight must be at least 1")]
    ZeroWeight,
    #[error("vertex index {0} out of range")]
    UnknownVertex(usize),
    #[error("duplicate edge ({from}, {weight}, {to})")]
    DuplicateEdge { from: String, weight: u64, to: String },
    #[error("game has no vertices")]
    NoVertices,
    #[error("invalid vertex id {0:?}")]
    BadVertexId(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("missing init")]
    MissingInit,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

/// A countdown game: a weighted digraph plus the initial (vertex, counter) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountdownGame {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    init_vertex: usize,
    init_counter: u64,
}

fn valid_vertex_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl CountdownGame {
    pub fn new(
        vertices: Vec<String>,
        edges: Vec<Edge>,
        init_vertex: usize,
        init_counter: u64,
    ) -> Result<Self, GameError> {
        if vertices.is_empty() {
            return Err(GameError::NoVertices);
        }
        if let Some(bad) = vertices.iter().find(|v| !valid_vertex_id(v)) {
            return Err(GameError::BadVertexId(bad.clone()));
        }
        if init_vertex >= vertices.len() {
            return Err(GameError::UnknownVertex(init_vertex));
        }
        let mut seen = BTreeSet::new();
        for e in &edges {
            if e.weight == 0 {
                return Err(GameError::ZeroWeight);
            }
            for v in [e.from, e.to] {
                if v >= vertices.len() {
                    return Err(GameError::UnknownVertex(v));
                }
            }
            if !seen.insert(*e) {
                return Err(GameError::DuplicateEdge {
                    from: vertices[e.from].clone(),
                    weight: e.weight,
                    to: vertices[e.to].clone(),
                });
            }
        }
        Ok(Self { vertices, edges, init_vertex, init_counter })
    }

    /// Convenience constructor from named edges; vertices are ordered by first
    /// appearance, starting with the initial vertex.
    pub fn from_named(init: (&str, u64), edges: &[(&str, u64, &str)]) -> Result<Self, GameError> {
        let mut names: Vec<String> = vec![init.0.to_string()];
        let lookup = |name: &str, names: &mut Vec<String>| -> usize {
            match names.iter().position(|n| n == name) {
                Some(i) => i,
                None => {
                    names.push(name.to_string());
                    names.len() - 1
                }
            }
        };
        let mut out = Vec::with_capacity(edges.len());
        for &(from, weight, to) in edges {
            let from = lookup(from, &mut names);
            let to = lookup(to, &mut names);
            out.push(Edge { from, weight, to });
        }
        Self::new(names, out, 0, init.1)
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn init_vertex(&self) -> usize {
        self.init_vertex
    }

    pub fn init_counter(&self) -> u64 {
        self.init_counter
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    /// Largest edge weight, 0 for an edgeless game.
    pub fn d_max(&self) -> u64 {
        self.edges.iter().map(|e| e.weight).max().unwrap_or(0)
    }

    /// Successors of `v` along edges of weight `d`, in edge order.
    pub fn successors(&self, v: usize, d: u64) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.from == v && e.weight == d).map(|e| e.to)
    }

    /// Distinct weights on edges leaving `v`, ascending.
    pub fn weights_from(&self, v: usize) -> Vec<u64> {
        let set: BTreeSet<u64> = self.edges.iter().filter(|e| e.from == v).map(|e| e.weight).collect();
        set.into_iter().collect()
    }

    /// Distinct (vertex, weight) pairs appearing on edges, ordered by vertex then weight.
    pub fn moves(&self) -> Vec<(usize, u64)> {
        let set: BTreeSet<(usize, u64)> = self.edges.iter().map(|e| (e.from, e.weight)).collect();
        set.into_iter().collect()
    }

    /// Same game with vertices renumbered in text-format order (init vertex,
    /// then edge endpoints by first appearance). Vertices that are neither the
    /// init vertex nor an edge endpoint are dropped; the text format cannot
    /// express them.
    pub fn normalized(&self) -> CountdownGame {
        let mut order: Vec<usize> = vec![self.init_vertex];
        for e in &self.edges {
            for v in [e.from, e.to] {
                if !order.contains(&v) {
                    order.push(v);
                }
            }
        }
        let remap = |v: usize| order.iter().position(|&o| o == v).expect("vertex in order");
        let edges = self
            .edges
            .iter()
            .map(|e| Edge { from: remap(e.from), weight: e.weight, to: remap(e.to) })
            .collect();
        let vertices = order.iter().map(|&v| self.vertices[v].clone()).collect();
        CountdownGame { vertices, edges, init_vertex: 0, init_counter: self.init_counter }
    }

    /// Renders the game in the line-oriented text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("init {} {}\n", self.vertices[self.init_vertex], self.init_counter);
        for e in &self.edges {
            out.push_str(&format!(
                "edge {} {} {}\n",
                self.vertices[e.from], e.weight, self.vertices[e.to]
            ));
        }
        out
    }
}

impl fmt::Display for CountdownGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn line_err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Line { line, message: message.into() }
}

fn parse_int(tok: &str, line: usize, what: &str) -> Result<u64, ParseError> {
    if tok.is_empty() || !tok.chars().all(|c| c.is_ascii_digit()) {
        return Err(line_err(line, format!("invalid {what} {tok:?}")));
    }
    tok.parse().map_err(|_| line_err(line, format!("{what} {tok:?} out of range")))
}

fn parse_vertex(tok: &str, line: usize) -> Result<&str, ParseError> {
    if valid_vertex_id(tok) {
        Ok(tok)
    } else {
        Err(line_err(line, format!("invalid vertex id {tok:?}")))
    }
}

/// Parses the countdown text format (`init`, `edge`, and `#` comment lines).
pub fn parse_game(source: &str) -> Result<CountdownGame, ParseError> {
    let mut vertices: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut intern = |name: &str, vertices: &mut Vec<String>| -> usize {
        *index.entry(name.to_string()).or_insert_with(|| {
            vertices.push(name.to_string());
            vertices.len() - 1
        })
    };
    let mut init: Option<(usize, u64)> = None;
    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();

    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = text.split_whitespace().collect();
        match toks[0] {
            "init" => {
                if toks.len() != 3 {
                    return Err(line_err(line, "expected `init <vertex> <counter>`"));
                }
                if init.is_some() {
                    return Err(line_err(line, "duplicate init"));
                }
                let v = parse_vertex(toks[1], line)?;
                let c = parse_int(toks[2], line, "counter")?;
                init = Some((intern(v, &mut vertices), c));
            }
            "edge" => {
                if toks.len() != 4 {
                    return Err(line_err(line, "expected `edge <from> <weight> <to>`"));
                }
                let from = parse_vertex(toks[1], line)?;
                let weight = parse_int(toks[2], line, "weight")?;
                let to = parse_vertex(toks[3], line)?;
                if weight < 1 {
                    return Err(line_err(line, "weight must be at least 1"));
                }
                let e = Edge { from: intern(from, &mut vertices), weight, to: intern(to, &mut vertices) };
                if !seen.insert(e) {
                    return Err(line_err(line, "duplicate edge"));
                }
                edges.push(e);
            }
            other => return Err(line_err(line, format!("unknown token {other:?}"))),
        }
    }

    let (init_vertex, init_counter) = init.ok_or(ParseError::MissingInit)?;
    CountdownGame::new(vertices, edges, init_vertex, init_counter).map_err(|e| line_err(0, e.to_string()))
}

/// Minimax values of a countdown game over counters `0..=init_counter`.
#[derive(Debug, Clone)]
pub struct WinTable {
    init_vertex: usize,
    init_counter: u64,
    win: Vec<Vec<bool>>,
    moves: Vec<Vec<Option<u64>>>,
}

impl WinTable {
    pub fn win(&self, v: usize, c: u64) -> bool {
        self.win[v][c as usize]
    }

    /// Player 1's chosen weight at a winning position with a positive counter.
    pub fn winning_move(&self, v: usize, c: u64) -> Option<u64> {
        self.moves[v][c as usize]
    }

    pub fn max_counter(&self) -> u64 {
        self.init_counter
    }

    pub fn player1_wins(&self) -> bool {
        self.win(self.init_vertex, self.init_counter)
    }
}

/// Bottom-up minimax over counter values. The smallest winning weight is kept
/// as the move.
pub fn solve_game(game: &CountdownGame) -> WinTable {
    let nv = game.vertices().len();
    let c0 = game.init_counter() as usize;
    let weights: Vec<Vec<u64>> = (0..nv).map(|v| game.weights_from(v)).collect();
    let mut win = vec![vec![false; c0 + 1]; nv];
    let mut moves = vec![vec![None; c0 + 1]; nv];
    for row in win.iter_mut() {
        row[0] = true;
    }
    for c in 1..=c0 {
        for v in 0..nv {
            let choice = weights[v].iter().copied().take_while(|&d| d as usize <= c).find(|&d| {
                game.successors(v, d).all(|to| win[to][c - d as usize])
            });
            if let Some(d) = choice {
                win[v][c] = true;
                moves[v][c] = Some(d);
            }
        }
    }
    WinTable { init_vertex: game.init_vertex(), init_counter: game.init_counter(), win, moves }
}

/// MDP view of a game against a uniformly randomizing opponent.
#[derive(Debug, Clone)]
pub struct CountdownMdp {
    pub mdp: Mdp,
    pub target: Vec<StateId>,
    pub initial: StateId,
    /// Weight played by each action.
    pub action_weights: Vec<u64>,
    counter_span: u64,
}

impl CountdownMdp {
    pub fn state_of(&self, v: usize, c: u64) -> StateId {
        StateId((v as u64 * (self.counter_span + 1) + c) as u32)
    }

    pub fn action_of(&self, d: u64) -> Option<ActionId> {
        self.action_weights.iter().position(|&w| w == d).map(|i| ActionId(i as u32))
    }
}

/// States are `(v, c)` for `0 <= c <= c0` plus an absorbing sink; action `d`
/// moves uniformly over `d`-successors, or to the sink when unplayable.
pub fn countdown_as_mdp(game: &CountdownGame) -> CountdownMdp {
    let c0 = game.init_counter();
    let weights: Vec<u64> = game.edges().iter().map(|e| e.weight).collect::<BTreeSet<_>>().into_iter().collect();
    let nv = game.vertices().len();
    let mut b = MdpBuilder::new();
    for v in 0..nv {
        for c in 0..=c0 {
            let mut labels = Vec::new();
            if c == 0 {
                labels.push(LABEL_TARGET);
            }
            if v == game.init_vertex() && c == c0 {
                labels.push(LABEL_START);
            }
            b.add_state(format!("({},{})", game.vertices()[v], c), labels);
        }
    }
    let sink = b.add_state("sink", [LABEL_HELL]);
    for d in &weights {
        b.add_action(d.to_string());
    }
    let span = c0 + 1;
    let id = |v: usize, c: u64| StateId((v as u64 * span + c) as u32);
    for v in 0..nv {
        for c in 0..=c0 {
            let s = id(v, c);
            for (ai, &d) in weights.iter().enumerate() {
                let a = ActionId(ai as u32);
                let dist = if c == 0 {
                    Distribution::point(s)
                } else if d > c {
                    Distribution::point(sink)
                } else {
                    let succ: Vec<StateId> = game.successors(v, d).map(|to| id(to, c - d)).collect();
                    if succ.is_empty() {
                        Distribution::point(sink)
                    } else {
                        Distribution::uniform(&succ)
                    }
                };
                b.set(s, a, dist);
            }
        }
    }
    for ai in 0..weights.len() {
        b.set(sink, ActionId(ai as u32), Distribution::point(sink));
    }
    let target = (0..nv).map(|v| id(v, 0)).collect();
    CountdownMdp {
        mdp: b.finish(),
        target,
        initial: id(game.init_vertex(), c0),
        action_weights: weights,
        counter_span: c0,
    }
}

/// Random game over vertices `v0..`, each with up to three outgoing edges.
/// The result is normalized, so isolated non-initial vertices are dropped.
pub fn random_game(n_vertices: usize, max_weight: u64, c0: u64, seed: u64) -> CountdownGame {
    assert!(n_vertices >= 1 && max_weight >= 1, "n_vertices and max_weight must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices: Vec<String> = (0..n_vertices).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    for from in 0..n_vertices {
        let tries = rng.gen_range(0..=3);
        for _ in 0..tries {
            let e = Edge { from, weight: rng.gen_range(1..=max_weight), to: rng.gen_range(0..n_vertices) };
            if seen.insert(e) {
                edges.push(e);
            }
        }
    }
    CountdownGame::new(vertices, edges, 0, c0).expect("generated game is valid").normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn three_edge(c0: u64) -> CountdownGame {
        CountdownGame::from_named((("v0"), c0), &[("v0", 1, "v0"), ("v0", 1, "u"), ("u", 2, "u")]).unwrap()
    }

    #[test]
    fn parses_single_loop() {
        let g = parse_game("init v 3\nedge v 1 v").unwrap();
        assert_eq!(g.vertices(), &["v".to_string()]);
        assert_eq!(g.edges(), &[Edge { from: 0, weight: 1, to: 0 }]);
        assert_eq!((g.init_vertex(), g.init_counter()), (0, 3));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse_game("edge v 1 v").unwrap_err(), ParseError::MissingInit);
        assert_eq!(parse_game("edge v 1 v").unwrap_err().to_string(), "missing init");
        let dup = parse_game("init v 3\nedge v 1 v\nedge v 1 v").unwrap_err();
        assert_eq!(dup, ParseError::Line { line: 3, message: "duplicate edge".into() });
        assert!(parse_game("init v 3\ninit v 2").unwrap_err().to_string().contains("line 2: duplicate init"));
        assert!(parse_game("init v 3\nedge v 0 v").unwrap_err().to_string().contains("line 2"));
        assert!(parse_game("init v 3\nnode v").unwrap_err().to_string().contains("unknown token"));
        assert!(parse_game("init v -3").is_err());
        assert!(parse_game("init v! 3").is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        let g = parse_game("# a game\n\ninit a 2\n  # indented comment\nedge a 2 b\n").unwrap();
        assert_eq!(g.vertices().len(), 2);
        assert_eq!(g.d_max(), 2);
    }

    #[test]
    fn text_round_trip() {
        let g = three_edge(3);
        assert_eq!(parse_game(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn solve_single_loop() {
        let g = parse_game("init v 3\nedge v 1 v").unwrap();
        let wt = solve_game(&g);
        assert!((0..=3).all(|c| wt.win(0, c)));
        assert_eq!(wt.winning_move(0, 3), Some(1));
    }

    #[test]
    fn solve_three_edge_game() {
        let g = three_edge(4);
        let wt = solve_game(&g);
        let (v0, u) = (g.vertex_index("v0").unwrap(), g.vertex_index("u").unwrap());
        assert!(wt.win(v0, 1));
        assert!(!wt.win(v0, 2));
        assert!(!wt.win(v0, 3));
        assert!(wt.win(u, 2));
        assert!(!wt.win(u, 1));
    }

    #[test]
    fn solve_even_steps() {
        let g3 = parse_game("init v 3\nedge v 2 v").unwrap();
        assert!(!solve_game(&g3).win(0, 3));
        let g4 = parse_game("init v 4\nedge v 2 v").unwrap();
        assert!(solve_game(&g4).win(0, 4));
    }

    #[test]
    fn zero_counter_wins_immediately() {
        let g = parse_game("init v 0").unwrap();
        assert!(solve_game(&g).player1_wins());
    }

    #[test]
    fn mdp_single_successor() {
        let g = parse_game("init v 2\nedge v 1 v").unwrap();
        let cm = countdown_as_mdp(&g);
        let a = cm.action_of(1).unwrap();
        let d = cm.mdp.dist(cm.state_of(0, 2), a);
        assert_eq!(d, &[(cm.state_of(0, 1), Ratio::new(1, 1))]);
    }

    #[test]
    fn mdp_uniform_over_matching_edges() {
        let g = three_edge(2);
        let cm = countdown_as_mdp(&g);
        let a = cm.action_of(1).unwrap();
        let d = cm.mdp.dist(cm.state_of(0, 2), a);
        let half = Ratio::new(1, 2);
        assert_eq!(d, &[(cm.state_of(0, 1), half), (cm.state_of(1, 1), half)]);
        // weight 2 has no edge at v0: sink
        let a2 = cm.action_of(2).unwrap();
        let sink = cm.mdp.dist(cm.state_of(0, 2), a2);
        assert!(cm.mdp.state(sink[0].0).labels.contains(LABEL_HELL));
        assert!(cm.mdp.validate().is_empty());
    }

    #[test]
    fn random_game_is_deterministic() {
        assert_eq!(random_game(3, 3, 4, 7), random_game(3, 3, 4, 7));
        let g = random_game(3, 3, 4, 7);
        assert!(g.edges().len() <= 9);
        assert_eq!(parse_game(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn degenerate_random_game() {
        for seed in 0..20 {
            let g = random_game(1, 1, 2, seed);
            assert!(g.edges().iter().all(|e| *e == Edge { from: 0, weight: 1, to: 0 }));
        }
    }
}
