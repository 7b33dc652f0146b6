//! Compiles a countdown game into the gadget MDP whose n-fold products are
//! synchronizable exactly when Player 1 wins.
//!
//! Each (state, action) pair is resolved from a ledger of declarations with
//! four precedence tiers:
//!
//! 1. Heaven and Hell ignore every action.
//! 2. Repairs: every action but `start` is daemonic at the start state, and
//!    `end` / `error` are daemonic on the control states G, A, B (both can be
//!    switched back to their literal scope through [`CompileOptions`]).
//! 3. State-specific declarations, both from the gadget descriptions and the
//!    depicted gadget edges.
//! 4. Catch-all clauses ("angelic for every other state", ...).
//!
//! Pairs with no declaration take the gadget default: ignore for the waiting,
//! game and counter gadgets, daemonic for the control gadget and the start
//! state. Two different declarations on the same tier are a compile error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::countdown::CountdownGame;
use crate::mdp::{
    ActionId, Distribution, Mdp, MdpBuilder, StateId, LABEL_HEAVEN, LABEL_HELL, LABEL_START,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum StateRole {
    StartState,
    Heaven,
    Hell,
    Wait,
    Ready,
    ControlW,
    ControlG,
    ControlA,
    ControlB,
    GameVertex { vertex: usize },
    McBit { bit: usize, value: u8 },
    AcBit { bit: usize, value: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum ActionRole {
    Start,
    End,
    Wait,
    Go,
    Win,
    Next,
    ControlError,
    GameMove { vertex: usize, weight: u64 },
    McDec { bit: usize },
    AcDec { bit: usize },
    McError { bit: usize },
    AcError { bit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gadget {
    Special,
    Waiting,
    Control,
    Game,
    MainCounter,
    AuxCounter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Counter {
    Main,
    Aux,
}

impl StateRole {
    pub fn gadget(self) -> Gadget {
        match self {
            StateRole::StartState | StateRole::Heaven | StateRole::Hell => Gadget::Special,
            StateRole::Wait | StateRole::Ready => Gadget::Waiting,
            StateRole::ControlW | StateRole::ControlG | StateRole::ControlA | StateRole::ControlB => {
                Gadget::Control
            }
            StateRole::GameVertex { .. } => Gadget::Game,
            StateRole::McBit { .. } => Gadget::MainCounter,
            StateRole::AcBit { .. } => Gadget::AuxCounter,
        }
    }
}

/// Role tables and sizes of a compiled MDP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetMap {
    pub states: Vec<StateRole>,
    pub actions: Vec<ActionRole>,
    pub k_mc: usize,
    pub k_ac: usize,
    pub min_sync_n: usize,
    pub init_counter: u64,
    pub d_max: u64,
    pub vertex_names: Vec<String>,
}

impl GadgetMap {
    pub fn state(&self, role: StateRole) -> Option<StateId> {
        self.states.iter().position(|&r| r == role).map(|i| StateId(i as u32))
    }

    pub fn action(&self, role: ActionRole) -> Option<ActionId> {
        self.actions.iter().position(|&r| r == role).map(|i| ActionId(i as u32))
    }

    pub fn role(&self, s: StateId) -> StateRole {
        self.states[s.index()]
    }

    pub fn action_role(&self, a: ActionId) -> ActionRole {
        self.actions[a.index()]
    }

    pub fn bits(&self, counter: Counter) -> usize {
        match counter {
            Counter::Main => self.k_mc,
            Counter::Aux => self.k_ac,
        }
    }

    pub fn bit(&self, counter: Counter, bit: usize, value: u8) -> Option<StateId> {
        self.state(match counter {
            Counter::Main => StateRole::McBit { bit, value },
            Counter::Aux => StateRole::AcBit { bit, value },
        })
    }

    pub fn dec(&self, counter: Counter, bit: usize) -> Option<ActionId> {
        self.action(match counter {
            Counter::Main => ActionRole::McDec { bit },
            Counter::Aux => ActionRole::AcDec { bit },
        })
    }

    pub fn error(&self, counter: Counter, bit: usize) -> Option<ActionId> {
        self.action(match counter {
            Counter::Main => ActionRole::McError { bit },
            Counter::Aux => ActionRole::AcError { bit },
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gadget map serializes")
    }
}

/// Declared reaction of one state to one action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BehaviorEntry {
    Successors(Vec<StateId>),
    Angelic,
    Daemonic,
    Ignore,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompileOptions {
    /// `error` daemonic for W only, angelic on G, A, B.
    pub literal_control_error: bool,
    /// `end` angelic on G, A, B.
    pub literal_end: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("conflicting declarations for ({state}, {action}): {first} vs {second}")]
    Conflict { state: String, action: String, first: String, second: String },
    #[error("unknown state {0}")]
    UnknownState(StateId),
    #[error("unknown action {0}")]
    UnknownAction(ActionId),
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub mdp: Mdp,
    pub gadgets: GadgetMap,
    ledger: Vec<(BehaviorEntry, &'static str)>,
}

impl Compiled {
    /// Resolved ledger entry and the clause it came from.
    pub fn declared(&self, s: StateId, a: ActionId) -> (&BehaviorEntry, &'static str) {
        let (b, src) = &self.ledger[s.index() * self.mdp.num_actions() + a.index()];
        (b, src)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Tier {
    Absolute,
    Repair,
    Specific,
    CatchAll,
}

struct Decl {
    tier: Tier,
    behavior: BehaviorEntry,
    source: &'static str,
}

struct Ledger {
    num_actions: usize,
    decls: Vec<Vec<Decl>>,
}

impl Ledger {
    fn declare(&mut self, s: StateId, a: ActionId, tier: Tier, behavior: BehaviorEntry, source: &'static str) {
        self.decls[s.index() * self.num_actions + a.index()].push(Decl { tier, behavior, source });
    }

    fn declare_all(
        &mut self,
        states: impl IntoIterator<Item = StateId>,
        a: ActionId,
        tier: Tier,
        behavior: BehaviorEntry,
        source: &'static str,
    ) {
        for s in states {
            self.declare(s, a, tier, behavior.clone(), source);
        }
    }
}

fn bitlength(x: u64) -> usize {
    (64 - x.leading_zeros()) as usize
}

fn bit_of(x: u64, i: usize) -> u8 {
    ((x >> i) & 1) as u8
}

struct Layout {
    vertex_base: u32,
    mc_base: u32,
    ac_base: u32,
}

impl Layout {
    fn vertex(&self, v: usize) -> StateId {
        StateId(self.vertex_base + v as u32)
    }

    fn bit(&self, counter: Counter, i: usize, value: u8) -> StateId {
        let base = match counter {
            Counter::Main => self.mc_base,
            Counter::Aux => self.ac_base,
        };
        StateId(base + 2 * i as u32 + value as u32)
    }
}

/// Builds the gadget MDP for `game`.
pub fn compile(game: &CountdownGame, options: CompileOptions) -> Result<Compiled, CompileError> {
    let c0 = game.init_counter();
    let d_max = game.d_max();
    let k_mc = bitlength(c0).max(1);
    let k_ac = bitlength(d_max).max(1);
    let nv = game.vertices().len();

    let mut b = MdpBuilder::new();
    let mut roles = Vec::new();
    let add = |b: &mut MdpBuilder, roles: &mut Vec<StateRole>, role: StateRole, name: String, labels: &[&str]| {
        roles.push(role);
        b.add_state(name, labels.iter().copied())
    };
    let start = add(&mut b, &mut roles, StateRole::StartState, "Start".into(), &[LABEL_START]);
    let heaven = add(&mut b, &mut roles, StateRole::Heaven, "Heaven".into(), &[LABEL_HEAVEN]);
    let hell = add(&mut b, &mut roles, StateRole::Hell, "Hell".into(), &[LABEL_HELL]);
    let wait = add(&mut b, &mut roles, StateRole::Wait, "Wait".into(), &[]);
    let ready = add(&mut b, &mut roles, StateRole::Ready, "Ready".into(), &[]);
    let w = add(&mut b, &mut roles, StateRole::ControlW, "W".into(), &[]);
    let g = add(&mut b, &mut roles, StateRole::ControlG, "G".into(), &[]);
    let ca = add(&mut b, &mut roles, StateRole::ControlA, "A".into(), &[]);
    let cb = add(&mut b, &mut roles, StateRole::ControlB, "B".into(), &[]);
    let vertex_base = roles.len() as u32;
    for (v, name) in game.vertices().iter().enumerate() {
        add(&mut b, &mut roles, StateRole::GameVertex { vertex: v }, format!("v.{name}"), &[]);
    }
    let mc_base = roles.len() as u32;
    for bit in 0..k_mc {
        for value in 0..2u8 {
            add(&mut b, &mut roles, StateRole::McBit { bit, value }, format!("MC.bit{bit}.{value}"), &[]);
        }
    }
    let ac_base = roles.len() as u32;
    for bit in 0..k_ac {
        for value in 0..2u8 {
            add(&mut b, &mut roles, StateRole::AcBit { bit, value }, format!("AC.bit{bit}.{value}"), &[]);
        }
    }
    let layout = Layout { vertex_base, mc_base, ac_base };

    let mut action_roles = Vec::new();
    let act = |b: &mut MdpBuilder, action_roles: &mut Vec<ActionRole>, role: ActionRole, name: String| {
        action_roles.push(role);
        b.add_action(name)
    };
    let a_start = act(&mut b, &mut action_roles, ActionRole::Start, "start".into());
    let a_end = act(&mut b, &mut action_roles, ActionRole::End, "end".into());
    let a_wait = act(&mut b, &mut action_roles, ActionRole::Wait, "wait".into());
    let a_go = act(&mut b, &mut action_roles, ActionRole::Go, "go".into());
    let a_win = act(&mut b, &mut action_roles, ActionRole::Win, "win".into());
    let a_next = act(&mut b, &mut action_roles, ActionRole::Next, "next".into());
    let a_error = act(&mut b, &mut action_roles, ActionRole::ControlError, "error".into());
    let moves: Vec<(usize, u64, ActionId)> = game
        .moves()
        .into_iter()
        .map(|(v, d)| {
            let id = act(
                &mut b,
                &mut action_roles,
                ActionRole::GameMove { vertex: v, weight: d },
                format!("move({},{d})", game.vertices()[v]),
            );
            (v, d, id)
        })
        .collect();
    let mc_dec: Vec<ActionId> =
        (0..k_mc).map(|i| act(&mut b, &mut action_roles, ActionRole::McDec { bit: i }, format!("MC.dec{i}"))).collect();
    let ac_dec: Vec<ActionId> =
        (0..k_ac).map(|i| act(&mut b, &mut action_roles, ActionRole::AcDec { bit: i }, format!("AC.dec{i}"))).collect();
    let mc_err: Vec<ActionId> =
        (0..k_mc).map(|i| act(&mut b, &mut action_roles, ActionRole::McError { bit: i }, format!("MC.error{i}"))).collect();
    let ac_err: Vec<ActionId> =
        (0..k_ac).map(|i| act(&mut b, &mut action_roles, ActionRole::AcError { bit: i }, format!("AC.error{i}"))).collect();

    let num_states = roles.len();
    let num_actions = action_roles.len();
    let all_states: Vec<StateId> = (0..num_states as u32).map(StateId).collect();
    let ordinary: Vec<StateId> = all_states.iter().copied().filter(|&s| s != heaven && s != hell).collect();
    let vertices: Vec<StateId> = (0..nv).map(|v| layout.vertex(v)).collect();
    let bits = |c: Counter, value: u8| -> Vec<StateId> {
        let k = if c == Counter::Main { k_mc } else { k_ac };
        (0..k).map(|i| layout.bit(c, i, value)).collect()
    };

    let mut ledger = Ledger { num_actions, decls: (0..num_states * num_actions).map(|_| Vec::new()).collect() };
    use BehaviorEntry::{Angelic, Daemonic, Ignore, Successors};
    use Tier::*;
    let to = |s: StateId| Successors(vec![s]);

    for a in (0..num_actions as u32).map(ActionId) {
        ledger.declare(heaven, a, Absolute, Ignore, "Heaven ignores all actions");
        ledger.declare(hell, a, Absolute, Ignore, "Hell ignores all actions");
        if a != a_start {
            ledger.declare(start, a, Repair, Daemonic, "only start is safe at the start state");
        }
    }

    // start / end
    let mut start_targets = vec![wait, w];
    start_targets.extend(bits(Counter::Main, 0));
    start_targets.extend(bits(Counter::Aux, 0));
    ledger.declare(start, a_start, Specific, Successors(start_targets), "start initializes the gadgets");
    ledger.declare_all(ordinary.iter().copied(), a_start, CatchAll, Daemonic, "start: daemonic for every other state");
    ledger.declare_all([wait, ready], a_end, Specific, Daemonic, "end: daemonic for Wait and Ready");
    ledger.declare_all(ordinary.iter().copied(), a_end, CatchAll, Angelic, "end: angelic for every other state");
    if !options.literal_end {
        ledger.declare_all([g, ca, cb], a_end, Repair, Daemonic, "end: daemonic while control is away from W");
    }

    // waiting gadget and control loop on W
    ledger.declare(wait, a_wait, Specific, Successors(vec![wait, ready]), "wait: Wait -> {Wait, Ready}");
    ledger.declare(ready, a_wait, Specific, to(wait), "wait: Ready -> Wait");
    ledger.declare(w, a_wait, Specific, to(w), "wait: W -> W");

    // go: isolate, load MC with c0, W -> G
    ledger.declare(ready, a_go, Specific, to(layout.vertex(game.init_vertex())), "go: Ready -> v0");
    declare_set(&mut ledger, &layout, Counter::Main, k_mc, c0, a_go, "go: sets MC to c0");
    ledger.declare(w, a_go, Specific, to(g), "go: W -> G");

    // game moves
    for &(v, d, a) in &moves {
        let succ: Vec<StateId> = game.successors(v, d).map(|t| layout.vertex(t)).collect();
        ledger.declare(layout.vertex(v), a, Specific, Successors(succ), "move: follows the game edges");
        ledger.declare_all(
            vertices.iter().copied().filter(|&x| x != layout.vertex(v)),
            a,
            Specific,
            Daemonic,
            "move: daemonic for other game vertices",
        );
        declare_set(&mut ledger, &layout, Counter::Aux, k_ac, d, a, "move: sets AC to d");
        ledger.declare(g, a, Specific, to(ca), "move: G -> A");
    }

    // win / next
    ledger.declare_all(vertices.iter().copied(), a_win, Specific, Angelic, "win: angelic for game vertices");
    ledger.declare_all(bits(Counter::Main, 1), a_win, Specific, Daemonic, "win: MC must hold 0");
    ledger.declare(g, a_win, Specific, to(w), "win: G -> W");
    ledger.declare_all(bits(Counter::Aux, 1), a_next, Specific, Daemonic, "next: AC must hold 0");
    ledger.declare(ca, a_next, Specific, to(g), "next: A -> G");

    // counters
    for (counter, decs, errs, from, into) in
        [(Counter::Main, &mc_dec, &mc_err, ca, cb), (Counter::Aux, &ac_dec, &ac_err, cb, ca)]
    {
        for (i, &a) in decs.iter().enumerate() {
            ledger.declare(layout.bit(counter, i, 1), a, Specific, to(layout.bit(counter, i, 0)), "dec(i): Bit_i^1 -> Bit_i^0");
            ledger.declare(layout.bit(counter, i, 0), a, Specific, Daemonic, "dec(i): daemonic for Bit_i^0");
            for j in 0..i {
                ledger.declare(layout.bit(counter, j, 0), a, Specific, to(layout.bit(counter, j, 1)), "dec(i): Bit_j^0 -> Bit_j^1 below i");
                ledger.declare(layout.bit(counter, j, 1), a, Specific, Daemonic, "dec(i): daemonic for Bit_j^1 below i");
            }
            ledger.declare(from, a, Specific, to(into), "dec: control edge");
        }
        for (i, &a) in errs.iter().enumerate() {
            ledger.declare_all(
                [layout.bit(counter, i, 0), layout.bit(counter, i, 1)],
                a,
                Specific,
                Daemonic,
                "error(i): daemonic for the bit pair",
            );
            ledger.declare_all(ordinary.iter().copied(), a, CatchAll, Angelic, "error(i): angelic for every other state");
        }
    }

    // control error
    ledger.declare(w, a_error, Specific, Daemonic, "error: daemonic for W");
    ledger.declare_all(ordinary.iter().copied(), a_error, CatchAll, Angelic, "error: angelic for every other state");
    if !options.literal_control_error {
        ledger.declare_all([g, ca, cb], a_error, Repair, Daemonic, "error: daemonic for the whole control gadget");
    }

    // resolve
    let mut resolved = Vec::with_capacity(num_states * num_actions);
    for s in all_states.iter().copied() {
        for a in (0..num_actions as u32).map(ActionId) {
            let decls = &ledger.decls[s.index() * num_actions + a.index()];
            let entry = match decls.iter().map(|d| d.tier).min() {
                Some(top) => {
                    let mut winners = decls.iter().filter(|d| d.tier == top);
                    let first = winners.next().expect("tier present");
                    if let Some(other) = winners.find(|d| d.behavior != first.behavior) {
                        return Err(CompileError::Conflict {
                            state: b_state_name(&roles, game, s),
                            action: format!("{:?}", action_roles[a.index()]),
                            first: first.source.into(),
                            second: other.source.into(),
                        });
                    }
                    (first.behavior.clone(), first.source)
                }
                None => match roles[s.index()].gadget() {
                    Gadget::Control | Gadget::Special => (Daemonic, "control default: daemonic"),
                    _ => (Ignore, "gadget default: ignore"),
                },
            };
            let dist = match &entry.0 {
                Successors(v) => Distribution::uniform(v),
                Angelic => Distribution::point(heaven),
                Daemonic => Distribution::point(hell),
                Ignore => Distribution::point(s),
            };
            b.set(s, a, dist);
            resolved.push(entry);
        }
    }

    let gadgets = GadgetMap {
        states: roles,
        actions: action_roles,
        k_mc,
        k_ac,
        min_sync_n: 2 + k_mc + k_ac,
        init_counter: c0,
        d_max,
        vertex_names: game.vertices().to_vec(),
    };
    Ok(Compiled { mdp: b.finish(), gadgets, ledger: resolved })
}

fn b_state_name(roles: &[StateRole], game: &CountdownGame, s: StateId) -> String {
    match roles[s.index()] {
        StateRole::GameVertex { vertex } => format!("v.{}", game.vertices()[vertex]),
        r => format!("{r:?}"),
    }
}

/// An action that sets `counter` to `value`: Bit_i^0 moves to the bit of
/// `value`, every Bit_i^1 is daemonic.
fn declare_set(
    ledger: &mut Ledger,
    layout: &Layout,
    counter: Counter,
    k: usize,
    value: u64,
    a: ActionId,
    source: &'static str,
) {
    for i in 0..k {
        let target = layout.bit(counter, i, bit_of(value, i));
        ledger.declare(layout.bit(counter, i, 0), a, Tier::Specific, BehaviorEntry::Successors(vec![target]), source);
        ledger.declare(layout.bit(counter, i, 1), a, Tier::Specific, BehaviorEntry::Daemonic, source);
    }
}

/// Classifies `trans(state, action)` of a compiled MDP.
pub fn behavior(mdp: &Mdp, gm: &GadgetMap, state: StateId, action: ActionId) -> Result<BehaviorEntry, CompileError> {
    if state.index() >= mdp.num_states() {
        return Err(CompileError::UnknownState(state));
    }
    if action.index() >= mdp.num_actions() {
        return Err(CompileError::UnknownAction(action));
    }
    let heaven = gm.state(StateRole::Heaven).expect("compiled map has Heaven");
    let hell = gm.state(StateRole::Hell).expect("compiled map has Hell");
    let succ: Vec<StateId> = mdp.successors(state, action).collect();
    Ok(match succ.as_slice() {
        [t] if *t == state => BehaviorEntry::Ignore,
        [t] if *t == heaven => BehaviorEntry::Angelic,
        [t] if *t == hell => BehaviorEntry::Daemonic,
        _ => BehaviorEntry::Successors(succ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::countdown::parse_game;

    fn example() -> Compiled {
        let g = parse_game("init v0 1\nedge v0 1 v0\nedge v0 1 u\nedge u 2 u").unwrap();
        compile(&g, CompileOptions::default()).unwrap()
    }

    #[test]
    fn example_sizes() {
        let c = example();
        assert_eq!((c.gadgets.k_mc, c.gadgets.k_ac), (1, 2));
        assert_eq!(c.mdp.num_states(), 17);
        assert_eq!(c.mdp.num_actions(), 15);
        assert_eq!(c.gadgets.min_sync_n, 5);
        assert!(c.mdp.validate().is_empty());
    }

    #[test]
    fn heaven_and_hell_ignore_everything() {
        let c = example();
        for role in [StateRole::Heaven, StateRole::Hell] {
            let s = c.gadgets.state(role).unwrap();
            for a in c.mdp.actions() {
                assert_eq!(behavior(&c.mdp, &c.gadgets, s, a).unwrap(), BehaviorEntry::Ignore);
            }
        }
    }

    #[test]
    fn spot_checks() {
        let c = example();
        let gm = &c.gadgets;
        let mc00 = gm.bit(Counter::Main, 0, 0).unwrap();
        let dec0 = gm.dec(Counter::Main, 0).unwrap();
        assert_eq!(behavior(&c.mdp, gm, mc00, dec0).unwrap(), BehaviorEntry::Daemonic);
        let wait = gm.state(StateRole::Wait).unwrap();
        let win = gm.action(ActionRole::Win).unwrap();
        assert_eq!(behavior(&c.mdp, gm, wait, win).unwrap(), BehaviorEntry::Ignore);
        let w = gm.state(StateRole::ControlW).unwrap();
        let mv = gm.action(ActionRole::GameMove { vertex: 0, weight: 1 }).unwrap();
        assert_eq!(behavior(&c.mdp, gm, w, mv).unwrap(), BehaviorEntry::Daemonic);
        assert!(behavior(&c.mdp, gm, StateId(99), mv).is_err());
    }

    #[test]
    fn repairs_and_literal_variants() {
        let g = parse_game("init v 3\nedge v 2 v").unwrap();
        let repaired = compile(&g, CompileOptions::default()).unwrap();
        let literal =
            compile(&g, CompileOptions { literal_control_error: true, literal_end: true }).unwrap();
        let gm = &repaired.gadgets;
        let gs = gm.state(StateRole::ControlG).unwrap();
        let err = gm.action(ActionRole::ControlError).unwrap();
        let end = gm.action(ActionRole::End).unwrap();
        assert_eq!(behavior(&repaired.mdp, gm, gs, err).unwrap(), BehaviorEntry::Daemonic);
        assert_eq!(behavior(&literal.mdp, gm, gs, err).unwrap(), BehaviorEntry::Angelic);
        assert_eq!(behavior(&repaired.mdp, gm, gs, end).unwrap(), BehaviorEntry::Daemonic);
        assert_eq!(behavior(&literal.mdp, gm, gs, end).unwrap(), BehaviorEntry::Angelic);
        let w = gm.state(StateRole::ControlW).unwrap();
        assert_eq!(behavior(&literal.mdp, gm, w, err).unwrap(), BehaviorEntry::Daemonic);
        assert_eq!(behavior(&repaired.mdp, gm, w, end).unwrap(), BehaviorEntry::Angelic);
        let start = gm.state(StateRole::StartState).unwrap();
        assert_eq!(behavior(&literal.mdp, gm, start, end).unwrap(), BehaviorEntry::Daemonic);
    }

    #[test]
    fn ledger_agrees_with_transitions() {
        let c = example();
        for s in c.mdp.states() {
            for a in c.mdp.actions() {
                let (declared, _) = c.declared(s, a);
                let observed = behavior(&c.mdp, &c.gadgets, s, a).unwrap();
                let normalized = match declared {
                    BehaviorEntry::Successors(v) if v.len() == 1 && v[0] == s => BehaviorEntry::Ignore,
                    other => other.clone(),
                };
                assert_eq!(normalized, observed, "{} / {}", c.mdp.state_name(s), c.mdp.action_name(a));
            }
        }
    }

    #[test]
    fn start_targets() {
        let c = example();
        let gm = &c.gadgets;
        let start = gm.state(StateRole::StartState).unwrap();
        let a = gm.action(ActionRole::Start).unwrap();
        assert_eq!(c.mdp.dist(start, a).len(), gm.min_sync_n);
    }

    #[test]
    fn bit_widths() {
        assert_eq!(bitlength(0), 0);
        assert_eq!(bitlength(1), 1);
        assert_eq!(bitlength(4), 3);
        let g = parse_game("init v 0").unwrap();
        let c = compile(&g, CompileOptions::default()).unwrap();
        assert_eq!((c.gadgets.k_mc, c.gadgets.k_ac), (1, 1));
        assert_eq!(c.mdp.num_states(), 9 + 1 + 4);
        assert_eq!(c.mdp.num_actions(), 7 + 4);
    }
}
