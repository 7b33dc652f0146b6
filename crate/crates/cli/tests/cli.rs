use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use popsync::{parse_game, random_game};
use serde_json::Value;
use tempfile::TempDir;

const WIN: &str = "init v 1\nedge v 1 v\n";
const LOSE: &str = "init v 3\nedge v 2 v\n";
const EXAMPLE: &str = "# three edges\ninit v0 1\nedge v0 1 v0\nedge v0 1 u\nedge u 2 u\n";

fn popsync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_popsync")).args(args).env_remove("POPSYNC_CAP").output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn solve_game_reports_winner() {
    let dir = TempDir::new().unwrap();
    let win = write(&dir, "win.txt", WIN);
    let out = popsync(&["solve-game", s(&win)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("Player 1 wins"));

    let lose = write(&dir, "lose.txt", LOSE);
    let report = dir.path().join("r.json");
    let out = popsync(&["solve-game", s(&lose), "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("Player 2 wins"));
    assert_eq!(json(&report)["winner"], "player2");
}

#[test]
fn malformed_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.txt", "edge v 1 v\n");
    let out = popsync(&["solve-game", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing init"));
    assert_eq!(popsync(&["check-sync", "/nonexistent/game.txt", "--n", "1"]).status.code(), Some(2));
    assert_eq!(popsync(&["check-sync", s(&bad)]).status.code(), Some(2));
}

#[test]
fn compile_is_byte_identical_and_emits_dot() {
    let dir = TempDir::new().unwrap();
    let game = write(&dir, "g.txt", EXAMPLE);
    let stem = dir.path().join("g");
    let out = popsync(&["compile", s(&game), "--out", s(&stem), "--dot"]);
    assert_eq!(out.status.code(), Some(0));
    let mdp = fs::read(dir.path().join("g.mdp.json")).unwrap();
    let map = fs::read(dir.path().join("g.gadgets.json")).unwrap();
    let dot = fs::read_to_string(dir.path().join("g.dot")).unwrap();
    let doc = json(&dir.path().join("g.mdp.json"));
    assert_eq!(doc["states"].as_array().unwrap().len(), 17);

    assert_eq!(popsync(&["compile", s(&game), "--out", s(&stem), "--dot"]).status.code(), Some(0));
    assert_eq!(fs::read(dir.path().join("g.mdp.json")).unwrap(), mdp);
    assert_eq!(fs::read(dir.path().join("g.gadgets.json")).unwrap(), map);
    assert_eq!(fs::read_to_string(dir.path().join("g.dot")).unwrap(), dot);

    let loaded = popsync::Mdp::from_json(&String::from_utf8(mdp).unwrap()).unwrap();
    assert!(loaded.validate().is_empty());
    assert_dot_parses(&dot);
    // no temp files left behind
    let names: Vec<String> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(names.iter().all(|n| !n.ends_with(".tmp")), "{names:?}");
}

/// Structural DOT check: balanced braces outside strings, one statement per
/// line, every edge endpoint declared as a node.
fn assert_dot_parses(dot: &str) {
    assert!(dot.starts_with("digraph "));
    let mut depth = 0i32;
    let mut in_str = false;
    let mut escaped = false;
    for ch in dot.chars() {
        match (in_str, ch) {
            (true, _) if escaped => escaped = false,
            (true, '\\') => escaped = true,
            (_, '"') => in_str = !in_str,
            (false, '{') => depth += 1,
            (false, '}') => {
                depth -= 1;
                assert!(depth >= 0);
            }
            _ => {}
        }
    }
    assert_eq!(depth, 0);
    assert!(!in_str);
    let mut nodes = std::collections::HashSet::new();
    let mut edges = Vec::new();
    for line in dot.lines().map(str::trim) {
        if line.is_empty() || line == "}" || line.ends_with('{') {
            continue;
        }
        assert!(line.ends_with(';'), "unterminated statement: {line}");
        if let Some((lhs, rest)) = line.split_once(" -> ") {
            let rhs = rest.split_whitespace().next().unwrap();
            edges.push((lhs.to_string(), rhs.to_string()));
        } else if line.starts_with('n') && line.contains("[label=") {
            nodes.insert(line.split_whitespace().next().unwrap().to_string());
        }
    }
    assert!(!edges.is_empty());
    for (a, b) in edges {
        assert!(nodes.contains(&a) && nodes.contains(&b), "{a} -> {b}");
    }
}

#[test]
fn check_sync_verdicts_and_cap() {
    let dir = TempDir::new().unwrap();
    let win = write(&dir, "win.txt", WIN);
    let lose = write(&dir, "lose.txt", LOSE);
    let report = dir.path().join("r.json");
    let out = popsync(&["check-sync", s(&win), "--n", "4", "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&report)["synchronizable"], true);

    let out = popsync(&["check-sync", s(&lose), "--n", "6", "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("not synchronizable"));
    assert_eq!(json(&report)["synchronizable"], false);

    let out = popsync(&["check-sync", s(&lose), "--n", "2", "--full-product", "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&report);
    assert_eq!(r["synchronizable"], true);
    assert_eq!(r["permutation_closed"], true);

    assert_eq!(popsync(&["check-sync", s(&lose), "--n", "6", "--cap", "50"]).status.code(), Some(3));
    let env = Command::new(env!("CARGO_BIN_EXE_popsync"))
        .args(["check-sync", s(&lose), "--n", "6"])
        .env("POPSYNC_CAP", "50")
        .output()
        .unwrap();
    assert_eq!(env.status.code(), Some(3));
    assert_eq!(popsync(&["check-sync", s(&lose), "--n", "4", "--full-product"]).status.code(), Some(2));
}

#[test]
fn verify_lemma_exit_codes() {
    let dir = TempDir::new().unwrap();
    let win = write(&dir, "win.txt", WIN);
    let lose = write(&dir, "lose.txt", LOSE);
    let report = dir.path().join("r.json");
    let out = popsync(&["verify-lemma", s(&win), "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let r = json(&report);
    assert_eq!(r["consistent"], true);
    assert_eq!(r["dp_winner"], "player1");
    assert_eq!(r["results"].as_array().unwrap().len(), 5);

    assert_eq!(popsync(&["verify-lemma", s(&lose), "--extra", "0"]).status.code(), Some(0));
    let out = popsync(&["verify-lemma", s(&lose), "--extra", "0", "--literal-control-error"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(popsync(&["verify-lemma", s(&lose), "--cap", "50"]).status.code(), Some(3));
}

#[test]
fn simulate_pilot_and_solver() {
    let dir = TempDir::new().unwrap();
    let win = write(&dir, "win.txt", WIN);
    let lose = write(&dir, "lose.txt", LOSE);
    let r1 = dir.path().join("a.json");
    let r2 = dir.path().join("b.json");
    for r in [&r1, &r2] {
        let out = popsync(&["simulate", s(&win), "--runs", "50", "--seed", "11", "--out", s(r)]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());
    let r = json(&r1);
    assert_eq!(r["estimate"]["success_rate"], "1");
    assert_eq!(r["max_steps"], 10 * 2 * 4 * 6);
    let trace = fs::read_to_string(dir.path().join("a.json.trace.tsv")).unwrap();
    assert!(trace.lines().next().unwrap().starts_with("Start:4\tstart"));
    assert!(trace.lines().all(|l| l.split('\t').count() == 2));

    let out = popsync(&["simulate", s(&win), "--runs", "20", "--strategy", "solver", "--n", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("20/20"));

    let out = popsync(&["simulate", s(&lose), "--runs", "5", "--strategy", "solver", "--n", "6"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no synchronizing strategy at this n"));
    assert_eq!(popsync(&["simulate", s(&lose), "--runs", "5"]).status.code(), Some(1));
}

#[test]
fn gen_round_trips() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    assert_eq!(popsync(&["gen", "3", "3", "4", "--seed", "7", "--out", s(&a)]).status.code(), Some(0));
    assert_eq!(popsync(&["gen", "3", "3", "4", "--seed", "7", "--out", s(&b)]).status.code(), Some(0));
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let parsed = parse_game(&text).unwrap();
    assert_eq!(parsed, random_game(3, 3, 4, 7));
    assert!(parsed.edges().len() <= 9);
    assert_eq!(popsync(&["gen", "0", "3", "4"]).status.code(), Some(2));
    let out = popsync(&["gen", "1", "1", "2", "--seed", "1"]);
    assert_eq!(parse_game(&stdout(&out)).unwrap(), random_game(1, 1, 2, 1));
}
