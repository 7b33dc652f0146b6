use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use popsync::dot::export_dot;
use popsync::harness::{verify_lemma, HarnessError, LemmaOptions, Winner};
use popsync::pilot::PilotContext;
use popsync::population::{check_sync, full_sync, PopulationError, QuotientOptions, DEFAULT_CAP};
use popsync::sim::{default_max_steps, estimate, run, trace_dump, ConfigPolicy};
use popsync::{compile, parse_game, random_game, solve_game, CompileOptions, CountdownGame};

#[derive(Parser)]
#[command(name = "popsync", version, about = "Countdown games, gadget MDPs and population synchronization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a countdown game and print the winner.
    SolveGame {
        game: PathBuf,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a game into the gadget MDP.
    Compile {
        game: PathBuf,
        /// Output stem: writes <stem>.mdp.json, <stem>.gadgets.json and, with --dot, <stem>.dot.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dot: bool,
        #[arg(long)]
        literal_control_error: bool,
    },
    /// Decide synchronizability of the n-fold product.
    CheckSync {
        game: PathBuf,
        #[arg(long)]
        n: u32,
        /// Use the explicit tuple product (n ≤ 3) instead of the counting quotient.
        #[arg(long)]
        full_product: bool,
        #[arg(long)]
        literal_control_error: bool,
        #[arg(long, env = "POPSYNC_CAP", default_value_t = DEFAULT_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that the verdicts for n = 1..=min_sync_n + extra match the game winner.
    VerifyLemma {
        game: PathBuf,
        #[arg(long, default_value_t = 1)]
        extra: u32,
        #[arg(long)]
        literal_control_error: bool,
        #[arg(long, env = "POPSYNC_CAP", default_value_t = DEFAULT_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo runs of a synchronizing strategy.
    Simulate {
        game: PathBuf,
        /// Population size; defaults to min_sync_n.
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, default_value_t = 1000)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to 10 (c0 + 1) n (k_mc + k_ac + 4).
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long, value_enum, default_value_t = StrategyKind::Pilot)]
        strategy: StrategyKind,
        #[arg(long, env = "POPSYNC_CAP", default_value_t = DEFAULT_CAP)]
        cap: usize,
        /// JSON report path; the trace of run 0 goes to <out>.trace.tsv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a random game.
    Gen {
        vertices: usize,
        max_weight: u64,
        c0: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum StrategyKind {
    Pilot,
    Solver,
}

enum Failure {
    Violation(String),
    Input(String),
    Resource(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Violation(_) => 1,
            Failure::Input(_) => 2,
            Failure::Resource(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Violation(m) | Failure::Input(m) | Failure::Resource(m) => m,
        }
    }
}

impl From<PopulationError> for Failure {
    fn from(e: PopulationError) -> Self {
        match e {
            PopulationError::CapExceeded { .. } => Failure::Resource(e.to_string()),
            PopulationError::TooLarge(_) | PopulationError::EmptyPopulation => Failure::Input(e.to_string()),
            other => Failure::Violation(other.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read_game(path: &Path) -> Result<CountdownGame, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    parse_game(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Temp file in the destination directory, then rename.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Input(format!("{}: {e}", path.display()));
    let name = path.file_name().ok_or_else(|| Failure::Input(format!("{}: not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn write_report(out: Option<&Path>, report: &impl Serialize) -> CmdResult {
    if let Some(path) = out {
        let mut text = serde_json::to_string_pretty(report).expect("report serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    Ok(())
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn compile_options(literal_control_error: bool) -> CompileOptions {
    CompileOptions { literal_control_error, ..CompileOptions::default() }
}

fn solve_cmd(path: &Path, out: Option<&Path>) -> CmdResult {
    let game = read_game(path)?;
    let wt = solve_game(&game);
    let mut moves = Vec::new();
    if wt.player1_wins() {
        println!("Player 1 wins");
        for (v, name) in game.vertices().iter().enumerate() {
            for c in 1..=game.init_counter() {
                if let Some(d) = wt.winning_move(v, c) {
                    println!("  ({name}, {c}) -> {d}");
                    moves.push(json!({ "vertex": name, "counter": c, "weight": d }));
                }
            }
        }
    } else {
        println!("Player 2 wins");
    }
    let winner = if wt.player1_wins() { Winner::Player1 } else { Winner::Player2 };
    write_report(out, &json!({ "winner": winner, "moves": moves }))
}

fn compile_cmd(path: &Path, out: Option<&Path>, dot: bool, literal: bool) -> CmdResult {
    let game = read_game(path)?;
    let c = compile(&game, compile_options(literal)).map_err(|e| Failure::Violation(e.to_string()))?;
    let stem = out.map(Path::to_path_buf).unwrap_or_else(|| path.with_extension(""));
    let mdp_path = with_suffix(&stem, ".mdp.json");
    let map_path = with_suffix(&stem, ".gadgets.json");
    write_atomic(&mdp_path, format!("{}\n", c.mdp.to_json()).as_bytes())?;
    write_atomic(&map_path, format!("{}\n", c.gadgets.to_json()).as_bytes())?;
    println!(
        "{} states, {} actions (k_mc = {}, k_ac = {}, min_sync_n = {})",
        c.mdp.num_states(),
        c.mdp.num_actions(),
        c.gadgets.k_mc,
        c.gadgets.k_ac,
        c.gadgets.min_sync_n
    );
    println!("wrote {}", mdp_path.display());
    println!("wrote {}", map_path.display());
    if dot {
        let dot_path = with_suffix(&stem, ".dot");
        write_atomic(&dot_path, export_dot(&c.mdp, &c.gadgets).as_bytes())?;
        println!("wrote {}", dot_path.display());
    }
    Ok(())
}

fn check_sync_cmd(path: &Path, n: u32, full: bool, literal: bool, cap: usize, out: Option<&Path>) -> CmdResult {
    let game = read_game(path)?;
    let c = compile(&game, compile_options(literal)).map_err(|e| Failure::Violation(e.to_string()))?;
    let report = if full {
        let (sync, product, win) = full_sync(&c.mdp, n)?;
        json!({
            "n": n,
            "full_product": true,
            "synchronizable": sync,
            "reachable_config_count": product.mdp.num_states(),
            "winning_configs": win.len(),
            "permutation_closed": product.permutation_closed(&win),
        })
    } else {
        let r = check_sync(&c.mdp, n, &QuotientOptions { cap, ..QuotientOptions::default() })?;
        json!({
            "n": n,
            "full_product": false,
            "synchronizable": r.synchronizable,
            "reachable_config_count": r.diagnostics.reachable_configs,
            "winning_configs": r.diagnostics.winning_configs,
            "strategy_certified": r.diagnostics.certified,
            "solve_millis": r.diagnostics.solve_millis,
        })
    };
    let sync = report["synchronizable"].as_bool().unwrap_or(false);
    println!(
        "n = {n}: {} ({} configurations)",
        if sync { "synchronizable" } else { "not synchronizable" },
        report["reachable_config_count"]
    );
    write_report(out, &report)
}

fn verify_lemma_cmd(path: &Path, extra: u32, literal: bool, cap: usize, out: Option<&Path>) -> CmdResult {
    let game = read_game(path)?;
    let opts = LemmaOptions {
        extra,
        compile: compile_options(literal),
        quotient: QuotientOptions { cap, ..QuotientOptions::default() },
        ..LemmaOptions::default()
    };
    let report = verify_lemma(&game, &opts).map_err(|e| match e {
        e if e.is_resource() => Failure::Resource(e.to_string()),
        HarnessError::Compile(e) => Failure::Violation(e.to_string()),
        e => Failure::Violation(e.to_string()),
    })?;
    let winner = match report.dp_winner {
        Winner::Player1 => "Player 1",
        Winner::Player2 => "Player 2",
    };
    println!("{winner} wins; min_sync_n = {}", report.game.min_sync_n);
    for r in &report.results {
        println!(
            "  n = {}: {} ({} configurations, {} ms)",
            r.n,
            if r.synchronizable { "synchronizable" } else { "not synchronizable" },
            r.reachable_config_count,
            r.solve_millis
        );
    }
    write_report(out, &report)?;
    if report.consistent {
        println!("consistent");
        Ok(())
    } else {
        Err(Failure::Violation("inconsistent: verdicts do not match the game winner".into()))
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    path: &Path,
    n: Option<u32>,
    runs: u64,
    seed: u64,
    max_steps: Option<u64>,
    kind: StrategyKind,
    cap: usize,
    out: Option<&Path>,
) -> CmdResult {
    if runs == 0 {
        return Err(Failure::Input("--runs must be positive".into()));
    }
    let game = read_game(path)?;
    let c = compile(&game, CompileOptions::default()).map_err(|e| Failure::Violation(e.to_string()))?;
    let gm = &c.gadgets;
    let n = n.unwrap_or(gm.min_sync_n as u32);
    if n == 0 {
        return Err(Failure::Input("--n must be positive".into()));
    }
    let budget = max_steps.unwrap_or_else(|| default_max_steps(game.init_counter(), n, gm.k_mc, gm.k_ac));
    let wt = solve_game(&game);
    let policy: Box<dyn ConfigPolicy> = match kind {
        StrategyKind::Pilot => {
            if !wt.player1_wins() {
                return Err(Failure::Violation("Player 2 wins; no pilot strategy exists".into()));
            }
            Box::new(PilotContext::new(&c, &wt))
        }
        StrategyKind::Solver => {
            let r = check_sync(&c.mdp, n, &QuotientOptions { cap, ..QuotientOptions::default() })?;
            if !r.synchronizable {
                return Err(Failure::Violation("no synchronizing strategy at this n".into()));
            }
            Box::new(r)
        }
    };
    let est = estimate(&c.mdp, n, policy.as_ref(), runs, seed, budget).map_err(|e| Failure::Violation(e.to_string()))?;
    println!(
        "{}/{} runs reached End (rate {}); steps mean {:.2}, min {}, max {}; budget {budget}",
        est.successes, est.runs, est.success_rate, est.mean_steps, est.min_steps, est.max_steps
    );
    if let Some(path) = out {
        let first = run(&c.mdp, n, policy.as_ref(), popsync::sim::run_seed(seed, 0), budget, true)
            .map_err(|e| Failure::Violation(e.to_string()))?;
        let trace = trace_dump(&c.mdp, first.trace.as_deref().unwrap_or(&[]));
        write_atomic(&with_suffix(path, ".trace.tsv"), trace.as_bytes())?;
    }
    write_report(
        out,
        &json!({ "n": n, "strategy": kind, "seed": seed, "max_steps": budget, "estimate": est }),
    )
}

fn gen_cmd(vertices: usize, max_weight: u64, c0: u64, seed: u64, out: Option<&Path>) -> CmdResult {
    if vertices == 0 {
        return Err(Failure::Input("a game needs at least one vertex".into()));
    }
    let text = random_game(vertices, max_weight, c0, seed).to_text();
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SolveGame { game, out } => solve_cmd(game, out.as_deref()),
        Command::Compile { game, out, dot, literal_control_error } => {
            compile_cmd(game, out.as_deref(), *dot, *literal_control_error)
        }
        Command::CheckSync { game, n, full_product, literal_control_error, cap, out } => {
            check_sync_cmd(game, *n, *full_product, *literal_control_error, *cap, out.as_deref())
        }
        Command::VerifyLemma { game, extra, literal_control_error, cap, out } => {
            verify_lemma_cmd(game, *extra, *literal_control_error, *cap, out.as_deref())
        }
        Command::Simulate { game, n, runs, seed, max_steps, strategy, cap, out } => {
            simulate_cmd(game, *n, *runs, *seed, *max_steps, *strategy, *cap, out.as_deref())
        }
        Command::Gen { vertices, max_weight, c0, seed, out } => gen_cmd(*vertices, *max_weight, *c0, *seed, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
