//! Almost-sure reachability on finite MDPs and Markov chains.
//!
//! Everything here looks only at transition supports; probability values
//! never influence a verdict.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::mdp::{ActionId, Mdp, MdpError, Prob, StateId};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("target set is empty")]
    EmptyTarget,
    #[error("target state {0} out of range")]
    UnknownTarget(StateId),
    #[error("winning set is not closed: {0}")]
    NotClosed(String),
    #[error("strategy undefined at reachable state {0}")]
    Undefined(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Membership mask over the states of one MDP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSet {
    mask: Vec<bool>,
}

impl StateSet {
    pub fn empty(n: usize) -> Self {
        Self { mask: vec![false; n] }
    }

    pub fn from_states(n: usize, states: impl IntoIterator<Item = StateId>) -> Self {
        let mut set = Self::empty(n);
        for s in states {
            set.insert(s);
        }
        set
    }

    pub fn insert(&mut self, s: StateId) -> bool {
        !std::mem::replace(&mut self.mask[s.index()], true)
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.mask.get(s.index()).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn capacity(&self) -> usize {
        self.mask.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| StateId(i as u32))
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.iter().all(|s| other.contains(s))
    }
}

/// Rows of `mdp` grouped by the successors they can reach.
struct Predecessors {
    offsets: Vec<usize>,
    rows: Vec<u32>,
}

impl Predecessors {
    fn new(mdp: &Mdp) -> Self {
        let n = mdp.num_states();
        let mut counts = vec![0usize; n + 1];
        for r in 0..mdp.row_count() {
            for &(t, _) in mdp.row_entries(r) {
                counts[t.index() + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut rows = vec![0u32; counts[n]];
        for r in 0..mdp.row_count() {
            for &(t, _) in mdp.row_entries(r) {
                rows[fill[t.index()]] = r as u32;
                fill[t.index()] += 1;
            }
        }
        Self { offsets: counts, rows }
    }

    fn of(&self, t: StateId) -> &[u32] {
        &self.rows[self.offsets[t.index()]..self.offsets[t.index() + 1]]
    }
}

fn target_set(mdp: &Mdp, target: &[StateId]) -> Result<StateSet, SolveError> {
    if target.is_empty() {
        return Err(SolveError::EmptyTarget);
    }
    if let Some(&t) = target.iter().find(|t| t.index() >= mdp.num_states()) {
        return Err(SolveError::UnknownTarget(t));
    }
    Ok(StateSet::from_states(mdp.num_states(), target.iter().copied()))
}

/// One backward sweep: states of `within` that reach `target ∩ within` using
/// only rows whose support stays inside `within`. Returns BFS levels
/// (`u32::MAX` for unreached).
fn attract(mdp: &Mdp, preds: &Predecessors, within: &StateSet, target: &StateSet) -> Vec<u32> {
    let na = mdp.num_actions();
    let mut allowed = vec![false; mdp.row_count()];
    for s in within.iter() {
        for a in 0..na {
            let r = s.index() * na + a;
            allowed[r] = mdp.row_entries(r).iter().all(|&(t, _)| within.contains(t));
        }
    }
    let mut level = vec![u32::MAX; mdp.num_states()];
    let mut queue = VecDeque::new();
    for t in target.iter().filter(|&t| within.contains(t)) {
        level[t.index()] = 0;
        queue.push_back(t);
    }
    while let Some(t) = queue.pop_front() {
        let next = level[t.index()] + 1;
        for &r in preds.of(t) {
            let s = r as usize / na.max(1);
            if allowed[r as usize] && level[s] == u32::MAX {
                level[s] = next;
                queue.push_back(StateId(s as u32));
            }
        }
    }
    level
}

/// States from which some memoryless strategy reaches `target` with
/// probability one (greatest fixpoint of the support-restricted attractor).
pub fn prob1(mdp: &Mdp, target: &[StateId]) -> Result<StateSet, SolveError> {
    mdp.check_total()?;
    let target = target_set(mdp, target)?;
    let preds = Predecessors::new(mdp);
    let mut win = StateSet::from_states(mdp.num_states(), mdp.states());
    loop {
        let level = attract(mdp, &preds, &win, &target);
        let next = StateSet { mask: level.iter().map(|&l| l != u32::MAX).collect() };
        if next == win {
            return Ok(win);
        }
        win = next;
    }
}

/// States from which `target` is reachable in the underlying graph.
pub fn graph_reachable_to(mdp: &Mdp, target: &[StateId]) -> StateSet {
    let preds = Predecessors::new(mdp);
    let na = mdp.num_actions().max(1);
    let mut seen = StateSet::from_states(mdp.num_states(), target.iter().copied());
    let mut queue: VecDeque<StateId> = target.iter().copied().collect();
    while let Some(t) = queue.pop_front() {
        for &r in preds.of(t) {
            let s = StateId((r as usize / na) as u32);
            if seen.insert(s) {
                queue.push_back(s);
            }
        }
    }
    seen
}

/// Memoryless deterministic strategy, defined on a subset of states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    choice: Vec<Option<ActionId>>,
}

impl Strategy {
    pub fn new(num_states: usize) -> Self {
        Self { choice: vec![None; num_states] }
    }

    pub fn set(&mut self, s: StateId, a: ActionId) {
        self.choice[s.index()] = Some(a);
    }

    pub fn get(&self, s: StateId) -> Option<ActionId> {
        self.choice.get(s.index()).copied().flatten()
    }

    pub fn defined(&self) -> impl Iterator<Item = (StateId, ActionId)> + '_ {
        self.choice.iter().enumerate().filter_map(|(i, a)| a.map(|a| (StateId(i as u32), a)))
    }
}

/// Picks, for every state of `winset` outside the target, the action whose
/// support stays in `winset` and reaches the lowest rank (ties: lowest
/// action index). Target states get the lowest action that stays inside.
pub fn extract_strategy(mdp: &Mdp, winset: &StateSet, target: &[StateId]) -> Result<Strategy, SolveError> {
    mdp.check_total()?;
    let target = target_set(mdp, target)?;
    if winset.capacity() != mdp.num_states() {
        return Err(SolveError::NotClosed("winning set sized for another mdp".into()));
    }
    let preds = Predecessors::new(mdp);
    let rank = attract(mdp, &preds, winset, &target);
    if let Some(s) = winset.iter().find(|s| rank[s.index()] == u32::MAX) {
        return Err(SolveError::NotClosed(format!(
            "state {} cannot reach the target inside the set",
            mdp.state_name(s)
        )));
    }
    let inside = |s: StateId, a: ActionId| mdp.successors(s, a).all(|t| winset.contains(t));
    let mut strategy = Strategy::new(mdp.num_states());
    for s in winset.iter() {
        if target.contains(s) {
            if let Some(a) = mdp.actions().find(|&a| inside(s, a)).or_else(|| mdp.actions().next()) {
                strategy.set(s, a);
            }
            continue;
        }
        let best = mdp
            .actions()
            .filter(|&a| inside(s, a))
            .map(|a| (mdp.successors(s, a).map(|t| rank[t.index()]).min().unwrap_or(u32::MAX), a))
            .min()
            .filter(|&(r, _)| r < rank[s.index()]);
        match best {
            Some((_, a)) => strategy.set(s, a),
            None => {
                return Err(SolveError::NotClosed(format!("no progressing action at {}", mdp.state_name(s))))
            }
        }
    }
    Ok(strategy)
}

#[derive(Debug, Clone)]
pub struct MarkovChain {
    names: Vec<String>,
    next: Vec<Vec<(u32, Prob)>>,
}

impl MarkovChain {
    pub fn new(names: Vec<String>, next: Vec<Vec<(u32, Prob)>>) -> Self {
        assert_eq!(names.len(), next.len());
        Self { names, next }
    }

    pub fn len(&self) -> usize {
        self.next.len()
    }

    pub fn is_empty(&self) -> bool {
        self.next.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn next(&self, i: usize) -> &[(u32, Prob)] {
        &self.next[i]
    }

    /// Violations of the chain invariants (nonempty rows summing to one over
    /// known, distinct states).
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, row) in self.next.iter().enumerate() {
            if row.is_empty() {
                out.push(format!("{} has no successors", self.names[i]));
            }
            let sum: Prob = row.iter().map(|e| e.1).sum();
            if !row.is_empty() && sum != Prob::from_integer(1) {
                out.push(format!("{} sums to {sum}", self.names[i]));
            }
            if row.iter().any(|e| e.0 as usize >= self.next.len() || e.1 == Prob::from_integer(0)) {
                out.push(format!("{} has a bad successor entry", self.names[i]));
            }
        }
        out
    }
}

/// Chain induced by a strategy, together with the MDP state behind each
/// chain state.
#[derive(Debug, Clone)]
pub struct InducedChain {
    pub chain: MarkovChain,
    pub origin: Vec<StateId>,
}

impl InducedChain {
    pub fn index_of(&self, s: StateId) -> Option<usize> {
        self.origin.iter().position(|&o| o == s)
    }

    pub fn indices_of(&self, states: &[StateId]) -> Vec<usize> {
        let lookup: HashMap<StateId, usize> = self.origin.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        states.iter().filter_map(|s| lookup.get(s).copied()).collect()
    }
}

/// Restricts the strategy-fixed dynamics to states reachable from `initial`.
/// Chain index 0 is `initial`.
pub fn induced_chain(mdp: &Mdp, strategy: &Strategy, initial: StateId) -> Result<InducedChain, SolveError> {
    induced_chain_until(mdp, strategy, initial, &[])
}

/// Like [`induced_chain`], but `stop` states become absorbing and are not
/// expanded, so the strategy need not be defined (or stay anywhere) there.
pub fn induced_chain_until(
    mdp: &Mdp,
    strategy: &Strategy,
    initial: StateId,
    stop: &[StateId],
) -> Result<InducedChain, SolveError> {
    mdp.check_total()?;
    let mut index: HashMap<StateId, u32> = HashMap::new();
    let mut origin = vec![initial];
    let mut next = Vec::new();
    index.insert(initial, 0);
    let mut i = 0;
    while i < origin.len() {
        let s = origin[i];
        if stop.contains(&s) {
            next.push(vec![(i as u32, Prob::from_integer(1))]);
            i += 1;
            continue;
        }
        let a = strategy.get(s).ok_or_else(|| SolveError::Undefined(mdp.state_name(s).to_string()))?;
        let mut row = Vec::new();
        for &(t, p) in mdp.dist(s, a) {
            let id = *index.entry(t).or_insert_with(|| {
                origin.push(t);
                origin.len() as u32 - 1
            });
            row.push((id, p));
        }
        next.push(row);
        i += 1;
    }
    let names = origin.iter().map(|&s| mdp.state_name(s).to_string()).collect();
    Ok(InducedChain { chain: MarkovChain::new(names, next), origin })
}

/// Finite-chain criterion: the target is hit almost surely from `initial`
/// iff it stays graph-reachable from every state reachable before hitting it.
pub fn chain_almost_sure(chain: &MarkovChain, initial: usize, target: &[usize]) -> bool {
    let n = chain.len();
    let mut is_target = vec![false; n];
    for &t in target {
        is_target[t] = true;
    }
    if is_target[initial] {
        return true;
    }
    let mut reach = vec![false; n];
    let mut stack = vec![initial];
    reach[initial] = true;
    let mut reverse: Vec<Vec<u32>> = vec![Vec::new(); n];
    while let Some(s) = stack.pop() {
        for &(t, _) in chain.next(s) {
            reverse[t as usize].push(s as u32);
            if !reach[t as usize] {
                reach[t as usize] = true;
                if !is_target[t as usize] {
                    stack.push(t as usize);
                }
            }
        }
    }
    let mut good = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&t| is_target[t] && reach[t]).collect();
    for &t in &stack {
        good[t] = true;
    }
    while let Some(t) = stack.pop() {
        for &s in &reverse[t] {
            if !good[s as usize] {
                good[s as usize] = true;
                stack.push(s as usize);
            }
        }
    }
    (0..n).all(|s| !reach[s] || good[s])
}
