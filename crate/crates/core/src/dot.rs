//! Graphviz rendering of compiled MDPs, one cluster per gadget.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::mdp::{Mdp, StateId};
use crate::reduction::{behavior, BehaviorEntry, Gadget, GadgetMap};

const CLUSTERS: [(Gadget, &str); 6] = [
    (Gadget::Special, "start / end"),
    (Gadget::Waiting, "waiting"),
    (Gadget::Control, "control"),
    (Gadget::Game, "game"),
    (Gadget::MainCounter, "main counter"),
    (Gadget::AuxCounter, "auxiliary counter"),
];

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EdgeKind {
    Plain,
    Angelic,
    Daemonic,
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Deterministic DOT text. Ignored actions are omitted; angelic edges are
/// dashed blue, daemonic edges dotted red.
pub fn export_dot(mdp: &Mdp, gm: &GadgetMap) -> String {
    let mut out = String::from("digraph mdp {\n  rankdir=LR;\n  node [shape=ellipse];\n");
    for (i, (gadget, label)) in CLUSTERS.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{i} {{\n    label={};", quote(label));
        for s in mdp.states().filter(|&s| gm.role(s).gadget() == *gadget) {
            let _ = writeln!(out, "    n{} [label={}];", s.0, quote(mdp.state_name(s)));
        }
        out.push_str("  }\n");
    }

    let mut edges: BTreeMap<(StateId, StateId, EdgeKind), Vec<&str>> = BTreeMap::new();
    for s in mdp.states() {
        for a in mdp.actions() {
            let kind = match behavior(mdp, gm, s, a).expect("ids come from the mdp") {
                BehaviorEntry::Ignore => continue,
                BehaviorEntry::Angelic => EdgeKind::Angelic,
                BehaviorEntry::Daemonic => EdgeKind::Daemonic,
                BehaviorEntry::Successors(_) => EdgeKind::Plain,
            };
            for t in mdp.successors(s, a) {
                edges.entry((s, t, kind)).or_default().push(mdp.action_name(a));
            }
        }
    }
    for ((s, t, kind), actions) in edges {
        let style = match kind {
            EdgeKind::Plain => "",
            EdgeKind::Angelic => ", style=dashed, color=blue",
            EdgeKind::Daemonic => ", style=dotted, color=red",
        };
        let _ = writeln!(out, "  n{} -> n{} [label={}{style}];", s.0, t.0, quote(&actions.join(",")));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::countdown::parse_game;
    use crate::reduction::{compile, CompileOptions};

    #[test]
    fn edgeless_game_has_all_clusters() {
        let g = parse_game("init v 0").unwrap();
        let c = compile(&g, CompileOptions::default()).unwrap();
        let dot = export_dot(&c.mdp, &c.gadgets);
        for i in 0..CLUSTERS.len() {
            assert!(dot.contains(&format!("subgraph cluster_{i}")));
        }
        assert_eq!(dot, export_dot(&c.mdp, &c.gadgets));
    }

    #[test]
    fn node_count_matches_states() {
        let g = parse_game("init v0 1\nedge v0 1 v0\nedge v0 1 u\nedge u 2 u").unwrap();
        let c = compile(&g, CompileOptions::default()).unwrap();
        let dot = export_dot(&c.mdp, &c.gadgets);
        let nodes = dot.lines().filter(|l| {
                let l = l.trim_start();
                l.starts_with('n') && l[1..].starts_with(|c: char| c.is_ascii_digit()) && !l.contains("->")
            }).count();
        assert_eq!(nodes, c.mdp.num_states());
        assert!(dot.contains("style=dotted"));
        assert!(dot.contains("style=dashed"));
    }
}
