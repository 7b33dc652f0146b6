//! Per-game pipeline checking the equivalence between Player 1 winning a
//! countdown game and synchronizability of the compiled MDP, plus the game
//! corpora used by the test suites and the CLI.

use serde::Serialize;
use thiserror::Error;

use crate::countdown::{random_game, solve_game, CountdownGame};
use crate::pilot::{verify_pilot, PilotContext, PilotError};
use crate::population::{check_sync, PopulationError, QuotientOptions};
use crate::reduction::{compile, CompileError, CompileOptions};
use crate::sim::run_seed;

pub const CORPUS_SEED: u64 = 0x5EED_C0DE;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error(transparent)]
    Pilot(#[from] PilotError),
}

impl HarnessError {
    pub fn is_resource(&self) -> bool {
        matches!(self, HarnessError::Population(PopulationError::CapExceeded { .. }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Player1,
    Player2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GameSummary {
    pub vertices: usize,
    pub edges: usize,
    pub c0: u64,
    pub d_max: u64,
    pub k_mc: usize,
    pub k_ac: usize,
    pub min_sync_n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SizeResult {
    pub n: u32,
    pub synchronizable: bool,
    pub reachable_config_count: usize,
    /// Wall-clock time; the only nondeterministic report field.
    pub solve_millis: u128,
    pub strategy_certified: Option<bool>,
    pub pilot_certified: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LemmaReport {
    pub game: GameSummary,
    pub dp_winner: Winner,
    pub results: Vec<SizeResult>,
    pub literal_control_error: bool,
    pub consistent: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LemmaOptions {
    /// Sizes checked are `1..=min_sync_n + extra`.
    pub extra: u32,
    pub compile: CompileOptions,
    pub quotient: QuotientOptions,
    pub certify_pilot: bool,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        Self { extra: 1, compile: CompileOptions::default(), quotient: QuotientOptions::default(), certify_pilot: true }
    }
}

/// The expected shape of the verdicts: a Player 1 win synchronizes at every
/// size; a Player 2 win synchronizes exactly below `min_sync_n`.
pub fn lemma_consistent(winner: Winner, min_sync_n: usize, results: &[SizeResult]) -> bool {
    results.iter().all(|r| match winner {
        Winner::Player1 => r.synchronizable && r.pilot_certified != Some(false) && r.strategy_certified != Some(false),
        Winner::Player2 => r.synchronizable == ((r.n as usize) < min_sync_n),
    })
}

pub fn verify_lemma(game: &CountdownGame, opts: &LemmaOptions) -> Result<LemmaReport, HarnessError> {
    let wt = solve_game(game);
    let compiled = compile(game, opts.compile)?;
    let gm = &compiled.gadgets;
    let winner = if wt.player1_wins() { Winner::Player1 } else { Winner::Player2 };
    let pilot = (winner == Winner::Player1 && opts.certify_pilot).then(|| PilotContext::new(&compiled, &wt));
    let mut results = Vec::new();
    for n in 1..=(gm.min_sync_n as u32 + opts.extra) {
        let sync = check_sync(&compiled.mdp, n, &opts.quotient)?;
        let pilot_certified = match &pilot {
            Some(ctx) => Some(verify_pilot(&compiled.mdp, ctx, n)?.certified),
            None => None,
        };
        results.push(SizeResult {
            n,
            synchronizable: sync.synchronizable,
            reachable_config_count: sync.diagnostics.reachable_configs,
            solve_millis: sync.diagnostics.solve_millis,
            strategy_certified: sync.diagnostics.certified,
            pilot_certified,
        });
    }
    let consistent = lemma_consistent(winner, gm.min_sync_n, &results);
    Ok(LemmaReport {
        game: GameSummary {
            vertices: game.vertices().len(),
            edges: game.edges().len(),
            c0: game.init_counter(),
            d_max: game.d_max(),
            k_mc: gm.k_mc,
            k_ac: gm.k_ac,
            min_sync_n: gm.min_sync_n,
        },
        dp_winner: winner,
        results,
        literal_control_error: opts.compile.literal_control_error,
        consistent,
    })
}

/// The hand-written games used throughout the docs and tests.
pub fn hand_examples() -> Vec<(String, CountdownGame)> {
    let games = [
        ("unit-loop", CountdownGame::from_named(("v", 1), &[("v", 1, "v")])),
        ("even-steps", CountdownGame::from_named(("v", 3), &[("v", 2, "v")])),
        ("branching", CountdownGame::from_named(("v0", 1), &[("v0", 1, "v0"), ("v0", 1, "u"), ("u", 2, "u")])),
    ];
    games.into_iter().map(|(name, g)| (name.to_string(), g.expect("hand example is valid"))).collect()
}

/// Deterministic random games with at most three vertices, weights at most
/// three and initial counters at most four.
pub fn generated_corpus(count: usize) -> Vec<(String, CountdownGame)> {
    (0..count as u64)
        .map(|i| {
            let seed = run_seed(CORPUS_SEED, i);
            let n_vertices = 1 + (seed % 3) as usize;
            let max_weight = 1 + (seed >> 8) % 3;
            let c0 = (seed >> 16) % 5;
            (format!("gen-{i:03}"), random_game(n_vertices, max_weight, c0, seed))
        })
        .collect()
}

/// Hand examples followed by 50 generated games.
pub fn standard_corpus() -> Vec<(String, CountdownGame)> {
    let mut all = hand_examples();
    all.extend(generated_corpus(50));
    all
}
