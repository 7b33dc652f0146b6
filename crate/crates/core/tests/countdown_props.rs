use std::collections::BTreeSet;

use popsync::countdown::Edge;
use popsync::solver::{extract_strategy, prob1};
use popsync::{countdown_as_mdp, parse_game, random_game, solve_game, CountdownGame};
use proptest::prelude::*;

/// Exhaustive game-tree search over all plays, no memoization.
fn oracle_wins(game: &CountdownGame, v: usize, c: u64) -> bool {
    if c == 0 {
        return true;
    }
    (1..=c).any(|d| {
        let succ: Vec<usize> = game.edges().iter().filter(|e| e.from == v && e.weight == d).map(|e| e.to).collect();
        !succ.is_empty() && succ.iter().all(|&t| oracle_wins(game, t, c - d))
    })
}

fn small_game() -> impl Strategy<Value = CountdownGame> {
    (1usize..=3, 0u64..=6, proptest::collection::vec(any::<bool>(), 27)).prop_map(|(nv, c0, mask)| {
        let mut edges = Vec::new();
        for from in 0..nv {
            for weight in 1..=3u64 {
                for to in 0..nv {
                    if mask[(from * 3 + (weight as usize - 1)) * 3 + to] {
                        edges.push(Edge { from, weight, to });
                    }
                }
            }
        }
        let names = (0..nv).map(|i| format!("v{i}")).collect();
        CountdownGame::new(names, edges, 0, c0).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn solver_matches_game_tree_search(game in small_game()) {
        let wt = solve_game(&game);
        for v in 0..game.vertices().len() {
            for c in 0..=game.init_counter() {
                prop_assert_eq!(wt.win(v, c), oracle_wins(&game, v, c), "({}, {})", v, c);
            }
        }
    }

    #[test]
    fn move_table_is_consistent(game in small_game()) {
        let wt = solve_game(&game);
        for v in 0..game.vertices().len() {
            prop_assert!(wt.win(v, 0));
            prop_assert_eq!(wt.winning_move(v, 0), None);
            for c in 1..=game.init_counter() {
                match wt.winning_move(v, c) {
                    Some(d) => {
                        prop_assert!(wt.win(v, c) && d <= c);
                        let succ: Vec<usize> = game.successors(v, d).collect();
                        prop_assert!(!succ.is_empty());
                        for t in succ {
                            prop_assert!(wt.win(t, c - d));
                        }
                        // smallest winning weight
                        for smaller in 1..d {
                            let s: Vec<usize> = game.successors(v, smaller).collect();
                            prop_assert!(s.is_empty() || s.iter().any(|&t| !wt.win(t, c - smaller)));
                        }
                    }
                    None => prop_assert!(!wt.win(v, c)),
                }
            }
        }
    }

    /// Every play consistent with the move table hits counter 0 within c0 rounds.
    #[test]
    fn move_table_plays_terminate(game in small_game()) {
        let wt = solve_game(&game);
        let c0 = game.init_counter();
        if wt.player1_wins() {
            let mut frontier: BTreeSet<(usize, u64)> = BTreeSet::from([(game.init_vertex(), c0)]);
            let mut rounds = 0;
            while frontier.iter().any(|&(_, c)| c > 0) {
                prop_assert!(rounds < c0);
                let mut next = BTreeSet::new();
                for &(v, c) in &frontier {
                    if c == 0 {
                        next.insert((v, 0));
                        continue;
                    }
                    let d = wt.winning_move(v, c).expect("winning position has a move");
                    for t in game.successors(v, d) {
                        next.insert((t, c - d));
                    }
                }
                frontier = next;
                rounds += 1;
            }
        }
    }

    #[test]
    fn randomized_adversary_agrees(game in small_game()) {
        let wt = solve_game(&game);
        let cm = countdown_as_mdp(&game);
        let win = prob1(&cm.mdp, &cm.target).unwrap();
        for v in 0..game.vertices().len() {
            for c in 0..=game.init_counter() {
                prop_assert_eq!(win.contains(cm.state_of(v, c)), wt.win(v, c));
            }
        }
    }

    /// Extracted strategies on the randomized-adversary MDP pick winning moves.
    #[test]
    fn extracted_weights_are_winning_moves(game in small_game()) {
        let wt = solve_game(&game);
        let cm = countdown_as_mdp(&game);
        let win = prob1(&cm.mdp, &cm.target).unwrap();
        let strategy = extract_strategy(&cm.mdp, &win, &cm.target).unwrap();
        for v in 0..game.vertices().len() {
            for c in 1..=game.init_counter() {
                if wt.win(v, c) {
                    let a = strategy.get(cm.state_of(v, c)).unwrap();
                    let d = cm.action_weights[a.index()];
                    prop_assert!(d <= c);
                    prop_assert!(game.successors(v, d).all(|t| wt.win(t, c - d)));
                }
            }
        }
    }

    #[test]
    fn generated_games_round_trip(nv in 1usize..=3, mw in 1u64..=3, c0 in 0u64..=6, seed in any::<u64>()) {
        let g = random_game(nv, mw, c0, seed);
        prop_assert_eq!(&g, &random_game(nv, mw, c0, seed));
        prop_assert_eq!(parse_game(&g.to_text()).unwrap(), g.clone());
        prop_assert_eq!(g.init_vertex(), 0);
        for v in 0..g.vertices().len() {
            let out = g.edges().iter().filter(|e| e.from == v).count();
            prop_assert!(out <= 3);
        }
        prop_assert!(g.edges().iter().all(|e| (1..=mw).contains(&e.weight)));
    }
}

#[test]
fn three_edge_game_oracle_values() {
    let g = CountdownGame::from_named(("v0", 3), &[("v0", 1, "v0"), ("v0", 1, "u"), ("u", 2, "u")]).unwrap();
    let v0 = g.vertex_index("v0").unwrap();
    let u = g.vertex_index("u").unwrap();
    let wt = solve_game(&g);
    for (v, c, expected) in [(v0, 1, true), (v0, 2, false), (v0, 3, false), (u, 2, true), (u, 1, false)] {
        assert_eq!(oracle_wins(&g, v, c), expected);
        assert_eq!(wt.win(v, c), expected);
    }
}

#[test]
fn even_steps_oracle_values() {
    let g = parse_game("init v 4\nedge v 2 v").unwrap();
    let wt = solve_game(&g);
    assert!(!wt.win(0, 3) && !oracle_wins(&g, 0, 3));
    assert!(wt.win(0, 4) && oracle_wins(&g, 0, 4));
}
