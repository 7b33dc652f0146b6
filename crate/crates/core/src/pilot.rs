//! The explicit synchronizing strategy for compiled games that Player 1 wins.
//!
//! The pilot reads the configuration gadget by gadget:
//!
//! * all components at Start: `start`;
//! * some gadget left empty by `start`: the matching error action (or `end`
//!   when the waiting gadget is empty and control is not mid-simulation);
//! * control at W: `go` once exactly one component is at Ready, else `wait`;
//! * control at G: `win` when MC holds 0, else the winning move from the
//!   marked vertex with MC's value as the counter;
//! * control at A / B: alternate decrements of MC and AC (lowest set bit
//!   first), then `next` once AC is back at 0.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::countdown::WinTable;
use crate::mdp::{ActionId, Mdp, StateId};
use crate::population::{config_distribution, Config, PopulationError};
use crate::reduction::{ActionRole, Compiled, Counter, GadgetMap, StateRole};
use crate::solver::{chain_almost_sure, MarkovChain};

#[derive(Debug, Error)]
pub enum PilotError {
    #[error("pilot undefined at {config}: {reason}")]
    Undefined { config: String, reason: String },
    #[error("Player 1 does not win the game; no pilot exists")]
    GameLost,
    #[error("position ({vertex}, {counter}) is not winning for Player 1")]
    NotWinning { vertex: String, counter: u64 },
    #[error(transparent)]
    Population(#[from] PopulationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Start,
    InitCheck,
    Isolate,
    GameStep,
    CountMain,
    CountAux,
    Done,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Start => "start",
            Phase::InitCheck => "init-check",
            Phase::Isolate => "isolate",
            Phase::GameStep => "game",
            Phase::CountMain => "count-mc",
            Phase::CountAux => "count-ac",
            Phase::Done => "done",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct PilotContext {
    gm: GadgetMap,
    wt: WinTable,
    names: Vec<String>,
    start: StateId,
    heaven: StateId,
    hell: StateId,
    wait: StateId,
    ready: StateId,
    w: StateId,
    g: StateId,
    a: StateId,
    b: StateId,
    vertices: Vec<StateId>,
    mc: Vec<[StateId; 2]>,
    ac: Vec<[StateId; 2]>,
    act_start: ActionId,
    act_end: ActionId,
    act_wait: ActionId,
    act_go: ActionId,
    act_win: ActionId,
    act_next: ActionId,
    act_error: ActionId,
    moves: HashMap<(usize, u64), ActionId>,
    mc_dec: Vec<ActionId>,
    ac_dec: Vec<ActionId>,
    mc_err: Vec<ActionId>,
    ac_err: Vec<ActionId>,
}

impl PilotContext {
    /// `wt` must be the table of the game `compiled` was built from.
    pub fn new(compiled: &Compiled, wt: &WinTable) -> Self {
        let gm = compiled.gadgets.clone();
        let st = |r: StateRole| gm.state(r).expect("compiled map has every fixed role");
        let ac = |r: ActionRole| gm.action(r).expect("compiled map has every fixed action");
        let bits = |c: Counter| -> Vec<[StateId; 2]> {
            (0..gm.bits(c)).map(|i| [gm.bit(c, i, 0).unwrap(), gm.bit(c, i, 1).unwrap()]).collect()
        };
        let moves = gm
            .actions
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match *r {
                ActionRole::GameMove { vertex, weight } => Some(((vertex, weight), ActionId(i as u32))),
                _ => None,
            })
            .collect();
        Self {
            names: compiled.mdp.states().map(|s| compiled.mdp.state_name(s).to_string()).collect(),
            start: st(StateRole::StartState),
            heaven: st(StateRole::Heaven),
            hell: st(StateRole::Hell),
            wait: st(StateRole::Wait),
            ready: st(StateRole::Ready),
            w: st(StateRole::ControlW),
            g: st(StateRole::ControlG),
            a: st(StateRole::ControlA),
            b: st(StateRole::ControlB),
            vertices: (0..gm.vertex_names.len()).map(|v| st(StateRole::GameVertex { vertex: v })).collect(),
            mc: bits(Counter::Main),
            ac: bits(Counter::Aux),
            act_start: ac(ActionRole::Start),
            act_end: ac(ActionRole::End),
            act_wait: ac(ActionRole::Wait),
            act_go: ac(ActionRole::Go),
            act_win: ac(ActionRole::Win),
            act_next: ac(ActionRole::Next),
            act_error: ac(ActionRole::ControlError),
            moves,
            mc_dec: (0..gm.k_mc).map(|i| gm.dec(Counter::Main, i).unwrap()).collect(),
            ac_dec: (0..gm.k_ac).map(|i| gm.dec(Counter::Aux, i).unwrap()).collect(),
            mc_err: (0..gm.k_mc).map(|i| gm.error(Counter::Main, i).unwrap()).collect(),
            ac_err: (0..gm.k_ac).map(|i| gm.error(Counter::Aux, i).unwrap()).collect(),
            wt: wt.clone(),
            gm,
        }
    }

    pub fn gadgets(&self) -> &GadgetMap {
        &self.gm
    }

    pub fn win_table(&self) -> &WinTable {
        &self.wt
    }

    fn key(&self, config: &Config) -> String {
        config
            .counts()
            .iter()
            .map(|&(s, c)| format!("{}:{c}", self.names.get(s.index()).map(String::as_str).unwrap_or("?")))
            .collect::<Vec<_>>()
            .join(",")
    }

    fn undefined(&self, config: &Config, reason: impl Into<String>) -> PilotError {
        PilotError::Undefined { config: self.key(config), reason: reason.into() }
    }

    /// Number held by a counter, if every bit pair has exactly one marked state.
    pub fn counter_value(&self, counter: Counter, config: &Config) -> Option<u64> {
        let bits = match counter {
            Counter::Main => &self.mc,
            Counter::Aux => &self.ac,
        };
        let mut value = 0u64;
        for (i, [zero, one]) in bits.iter().enumerate() {
            match (config.marks(*zero), config.marks(*one)) {
                (true, false) => {}
                (false, true) => value |= 1 << i,
                _ => return None,
            }
        }
        Some(value)
    }

    fn is_end(&self, config: &Config) -> bool {
        config.counts().len() == 1 && config.counts()[0].0 == self.heaven
    }
}

/// Phase and action chosen by the pilot.
pub fn pilot_decision(ctx: &PilotContext, config: &Config) -> Result<(Phase, ActionId), PilotError> {
    if config.marks(ctx.hell) {
        return Err(ctx.undefined(config, "Hell is marked"));
    }
    if ctx.is_end(config) {
        return Ok((Phase::Done, ctx.act_end));
    }
    if config.marks(ctx.start) {
        return if config.counts().len() == 1 {
            Ok((Phase::Start, ctx.act_start))
        } else {
            Err(ctx.undefined(config, "Start marked after start"))
        };
    }

    for (bits, errs) in [(&ctx.mc, &ctx.mc_err), (&ctx.ac, &ctx.ac_err)] {
        if let Some(i) = bits.iter().position(|[z, o]| !config.marks(*z) && !config.marks(*o)) {
            return Ok((Phase::InitCheck, errs[i]));
        }
    }
    let control: Vec<StateId> = [ctx.w, ctx.g, ctx.a, ctx.b].into_iter().filter(|&s| config.marks(s)).collect();
    let waiting = config.count(ctx.wait) + config.count(ctx.ready);
    let mid_simulation = control.iter().any(|&s| s != ctx.w);
    if waiting == 0 && !mid_simulation {
        return Ok((Phase::InitCheck, ctx.act_end));
    }
    if control.is_empty() {
        return Ok((Phase::InitCheck, ctx.act_error));
    }
    if control.len() > 1 {
        return Err(ctx.undefined(config, "control gadget marks several states"));
    }

    let mc = ctx.counter_value(Counter::Main, config).ok_or_else(|| ctx.undefined(config, "MC holds no number"))?;
    let ac = ctx.counter_value(Counter::Aux, config).ok_or_else(|| ctx.undefined(config, "AC holds no number"))?;
    let here = control[0];
    if here == ctx.w {
        return Ok((Phase::Isolate, if config.count(ctx.ready) == 1 { ctx.act_go } else { ctx.act_wait }));
    }
    if here == ctx.g {
        let marked: Vec<usize> = (0..ctx.vertices.len()).filter(|&v| config.marks(ctx.vertices[v])).collect();
        if mc == 0 {
            return Ok((Phase::GameStep, ctx.act_win));
        }
        let &[v] = marked.as_slice() else {
            return Err(ctx.undefined(config, "expected exactly one marked game vertex"));
        };
        let d = ctx.wt.winning_move(v, mc).ok_or_else(|| PilotError::NotWinning {
            vertex: ctx.gm.vertex_names[v].clone(),
            counter: mc,
        })?;
        let a = ctx.moves.get(&(v, d)).copied().ok_or_else(|| ctx.undefined(config, "missing move action"))?;
        return Ok((Phase::GameStep, a));
    }
    if here == ctx.a {
        if ac == 0 {
            return Ok((Phase::CountMain, ctx.act_next));
        }
        if mc == 0 {
            return Err(ctx.undefined(config, "MC exhausted before AC"));
        }
        return Ok((Phase::CountMain, ctx.mc_dec[mc.trailing_zeros() as usize]));
    }
    if ac == 0 {
        return Err(ctx.undefined(config, "AC empty at B"));
    }
    Ok((Phase::CountAux, ctx.ac_dec[ac.trailing_zeros() as usize]))
}

pub fn pilot_action(ctx: &PilotContext, config: &Config) -> Result<ActionId, PilotError> {
    pilot_decision(ctx, config).map(|(_, a)| a)
}

/// No marked state is sent to Hell by `action`.
pub fn is_safe(mdp: &Mdp, hell: StateId, config: &Config, action: ActionId) -> bool {
    config.marked().all(|s| s == hell || !mdp.successors(s, action).any(|t| t == hell))
}

/// Markov chain induced by the pilot on the counting quotient.
#[derive(Debug, Clone)]
pub struct PilotChain {
    pub configs: Vec<Config>,
    pub decisions: Vec<(Phase, ActionId)>,
    pub chain: MarkovChain,
    pub end: Option<usize>,
}

pub fn pilot_chain(mdp: &Mdp, ctx: &PilotContext, n: u32) -> Result<PilotChain, PilotError> {
    let start = Config::all_at(ctx.start, n);
    let end_config = Config::all_at(ctx.heaven, n);
    let mut index: HashMap<Config, u32> = HashMap::new();
    let mut configs = vec![start.clone()];
    index.insert(start, 0);
    let mut decisions = Vec::new();
    let mut next = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let config = configs[i].clone();
        let decision = pilot_decision(ctx, &config)?;
        let mut row = Vec::new();
        for (succ, p) in config_distribution(mdp, &config, decision.1)? {
            let id = match index.get(&succ) {
                Some(&id) => id,
                None => {
                    let id = configs.len() as u32;
                    index.insert(succ.clone(), id);
                    configs.push(succ);
                    queue.push_back(id as usize);
                    id
                }
            };
            row.push((id, p));
        }
        decisions.push(decision);
        next.push(row);
    }
    let names = configs.iter().map(|c| ctx.key(c)).collect();
    let end = index.get(&end_config).map(|&i| i as usize);
    Ok(PilotChain { configs, decisions, chain: MarkovChain::new(names, next), end })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PilotCertificate {
    pub certified: bool,
    pub reachable_configs: usize,
}

/// Certifies that the pilot reaches End almost surely from Start at size `n`.
pub fn verify_pilot(mdp: &Mdp, ctx: &PilotContext, n: u32) -> Result<PilotCertificate, PilotError> {
    if !ctx.wt.player1_wins() {
        return Err(PilotError::GameLost);
    }
    let pc = pilot_chain(mdp, ctx, n)?;
    let certified = match pc.end {
        Some(end) => chain_almost_sure(&pc.chain, 0, &[end]),
        None => false,
    };
    Ok(PilotCertificate { certified, reachable_configs: pc.configs.len() })
}
