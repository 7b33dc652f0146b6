//! Finite MDPs with exact rational transition probabilities.
//!
//! Transitions are stored row-major in a flat table: row `s * |actions| + a`
//! holds the distribution `trans(s, a)`. An empty row means the pair is
//! undefined, which [`Mdp::validate`] reports as a totality violation.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Prob = Ratio<u64>;

pub const LABEL_START: &str = "start";
pub const LABEL_HEAVEN: &str = "heaven";
pub const LABEL_HELL: &str = "hell";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ActionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateInfo {
    pub name: String,
    pub labels: BTreeSet<String>,
}

/// An owned distribution, sorted by successor id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distribution {
    entries: Vec<(StateId, Prob)>,
}

impl Distribution {
    /// Builds a distribution from raw entries. Entries for the same state are
    /// summed; nothing else is checked.
    pub fn new(mut entries: Vec<(StateId, Prob)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(StateId, Prob)> = Vec::with_capacity(entries.len());
        for (s, p) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == s => last.1 += p,
                _ => merged.push((s, p)),
            }
        }
        Self { entries: merged }
    }

    pub fn point(s: StateId) -> Self {
        Self { entries: vec![(s, Prob::from_integer(1))] }
    }

    /// Uniform over the distinct states in `support`.
    pub fn uniform(support: &[StateId]) -> Self {
        let set: BTreeSet<StateId> = support.iter().copied().collect();
        let p = Prob::new(1, set.len() as u64);
        Self { entries: set.into_iter().map(|s| (s, p)).collect() }
    }

    pub fn entries(&self) -> &[(StateId, Prob)] {
        &self.entries
    }

    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.entries.iter().map(|e| e.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NotTotal { state: StateId, action: ActionId },
    BadSum { state: StateId, action: ActionId, sum: Prob },
    NonPositive { state: StateId, action: ActionId, successor: StateId },
    UnknownSuccessor { state: StateId, action: ActionId, successor: StateId },
    DuplicateSuccessor { state: StateId, action: ActionId, successor: StateId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotTotal { state, action } => write!(f, "trans not total at ({state}, {action})"),
            Violation::BadSum { state, action, sum } => {
                write!(f, "distribution sums to {sum} at ({state}, {action})")
            }
            Violation::NonPositive { state, action, successor } => {
                write!(f, "non-positive probability for {successor} at ({state}, {action})")
            }
            Violation::UnknownSuccessor { state, action, successor } => {
                write!(f, "unknown successor {successor} at ({state}, {action})")
            }
            Violation::DuplicateSuccessor { state, action, successor } => {
                write!(f, "duplicate successor {successor} at ({state}, {action})")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("invalid mdp: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("malformed mdp document: {0}")]
    Document(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone)]
pub struct Mdp {
    states: Vec<StateInfo>,
    actions: Vec<String>,
    offsets: Vec<usize>,
    entries: Vec<(StateId, Prob)>,
}

impl Mdp {
    /// Assembles an MDP from a flat row table. `offsets` must have
    /// `states.len() * actions.len() + 1` nondecreasing entries indexing into
    /// `entries`. Distribution invariants are not checked here.
    pub fn from_parts(
        states: Vec<StateInfo>,
        actions: Vec<String>,
        offsets: Vec<usize>,
        entries: Vec<(StateId, Prob)>,
    ) -> Self {
        assert_eq!(offsets.len(), states.len() * actions.len() + 1, "row table size mismatch");
        assert_eq!(*offsets.last().unwrap(), entries.len(), "row table does not cover entries");
        Self { states, actions, offsets, entries }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len() as u32).map(StateId)
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> {
        (0..self.actions.len() as u32).map(ActionId)
    }

    pub fn state(&self, s: StateId) -> &StateInfo {
        &self.states[s.index()]
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s.index()].name
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.actions[a.index()]
    }

    pub fn find_state(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s.name == name).map(|i| StateId(i as u32))
    }

    pub fn find_action(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a == name).map(|i| ActionId(i as u32))
    }

    pub fn states_with_label<'a>(&'a self, label: &'a str) -> impl Iterator<Item = StateId> + 'a {
        self.states().filter(move |&s| self.states[s.index()].labels.contains(label))
    }

    /// The unique state carrying `label`, if exactly one does.
    pub fn labeled(&self, label: &str) -> Option<StateId> {
        let mut it = self.states_with_label(label);
        let first = it.next()?;
        it.next().is_none().then_some(first)
    }

    #[inline]
    pub(crate) fn row(&self, s: StateId, a: ActionId) -> usize {
        s.index() * self.actions.len() + a.index()
    }

    /// `trans(s, a)`; empty when the pair is undefined.
    #[inline]
    pub fn dist(&self, s: StateId, a: ActionId) -> &[(StateId, Prob)] {
        let r = self.row(s, a);
        &self.entries[self.offsets[r]..self.offsets[r + 1]]
    }

    pub fn successors(&self, s: StateId, a: ActionId) -> impl Iterator<Item = StateId> + '_ {
        self.dist(s, a).iter().map(|e| e.0)
    }

    pub(crate) fn row_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub(crate) fn row_entries(&self, r: usize) -> &[(StateId, Prob)] {
        &self.entries[self.offsets[r]..self.offsets[r + 1]]
    }

    /// Copy of this MDP with every distribution replaced by `f(state, action, support)`,
    /// which must return one probability per support entry.
    pub fn reweighted(&self, mut f: impl FnMut(StateId, ActionId, &[StateId]) -> Vec<Prob>) -> Mdp {
        let mut entries = Vec::with_capacity(self.entries.len());
        for s in self.states() {
            for a in self.actions() {
                let support: Vec<StateId> = self.successors(s, a).collect();
                let probs = f(s, a, &support);
                assert_eq!(probs.len(), support.len());
                entries.extend(support.into_iter().zip(probs));
            }
        }
        Mdp::from_parts(self.states.clone(), self.actions.clone(), self.offsets.clone(), entries)
    }

    /// All invariant violations; empty iff the MDP is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.states.len() as u32;
        for s in self.states() {
            for a in self.actions() {
                let d = self.dist(s, a);
                if d.is_empty() {
                    out.push(Violation::NotTotal { state: s, action: a });
                    continue;
                }
                let mut sum = Prob::from_integer(0);
                let mut seen = BTreeSet::new();
                for &(t, p) in d {
                    if t.0 >= n {
                        out.push(Violation::UnknownSuccessor { state: s, action: a, successor: t });
                    }
                    if !seen.insert(t) {
                        out.push(Violation::DuplicateSuccessor { state: s, action: a, successor: t });
                    }
                    if p <= Prob::from_integer(0) {
                        out.push(Violation::NonPositive { state: s, action: a, successor: t });
                    }
                    sum += p;
                }
                if sum != Prob::from_integer(1) {
                    out.push(Violation::BadSum { state: s, action: a, sum });
                }
            }
        }
        out
    }

    /// Cheap structural check used by the solvers: every row is present and
    /// points at known states.
    pub fn check_total(&self) -> Result<(), MdpError> {
        let n = self.states.len() as u32;
        let mut bad = Vec::new();
        for s in self.states() {
            for a in self.actions() {
                let d = self.dist(s, a);
                if d.is_empty() {
                    bad.push(Violation::NotTotal { state: s, action: a });
                }
                for &(t, _) in d {
                    if t.0 >= n {
                        bad.push(Violation::UnknownSuccessor { state: s, action: a, successor: t });
                    }
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(MdpError::Invalid(bad))
        }
    }

    pub fn to_document(&self) -> MdpDocument {
        let states = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| StateDoc { id: i as u32, name: s.name.clone(), labels: s.labels.iter().cloned().collect() })
            .collect();
        let actions =
            self.actions.iter().enumerate().map(|(i, a)| ActionDoc { id: i as u32, name: a.clone() }).collect();
        let mut transitions = Vec::with_capacity(self.row_count());
        for s in self.states() {
            for a in self.actions() {
                let successors = self
                    .dist(s, a)
                    .iter()
                    .map(|&(t, p)| SuccessorDoc { state: t.0, num: *p.numer(), den: *p.denom() })
                    .collect();
                transitions.push(TransitionDoc { state: s.0, action: a.0, successors });
            }
        }
        MdpDocument { states, actions, transitions }
    }

    /// Reads a document. Ids must be dense and in order; probabilities are
    /// taken as written (see [`Mdp::validate`] for semantic checks).
    pub fn from_document(doc: &MdpDocument) -> Result<Mdp, MdpError> {
        let bad = |m: String| MdpError::Document(m);
        let mut states = Vec::with_capacity(doc.states.len());
        for (i, s) in doc.states.iter().enumerate() {
            if s.id as usize != i {
                return Err(bad(format!("state id {} at position {i}", s.id)));
            }
            states.push(StateInfo { name: s.name.clone(), labels: s.labels.iter().cloned().collect() });
        }
        let mut actions = Vec::with_capacity(doc.actions.len());
        for (i, a) in doc.actions.iter().enumerate() {
            if a.id as usize != i {
                return Err(bad(format!("action id {} at position {i}", a.id)));
            }
            actions.push(a.name.clone());
        }
        let na = actions.len();
        let mut rows: Vec<Option<Vec<(StateId, Prob)>>> = vec![None; states.len() * na];
        for t in &doc.transitions {
            if t.state as usize >= states.len() || t.action as usize >= na {
                return Err(bad(format!("transition ({}, {}) out of range", t.state, t.action)));
            }
            let r = t.state as usize * na + t.action as usize;
            if rows[r].is_some() {
                return Err(bad(format!("duplicate transition ({}, {})", t.state, t.action)));
            }
            let mut row = Vec::with_capacity(t.successors.len());
            for succ in &t.successors {
                if succ.den == 0 {
                    return Err(bad(format!("zero denominator in transition ({}, {})", t.state, t.action)));
                }
                row.push((StateId(succ.state), Prob::new(succ.num, succ.den)));
            }
            rows[r] = Some(row);
        }
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for row in rows {
            entries.extend(row.unwrap_or_default());
            offsets.push(entries.len());
        }
        Ok(Mdp::from_parts(states, actions, offsets, entries))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("mdp document serializes")
    }

    pub fn from_json(text: &str) -> Result<Mdp, MdpError> {
        let doc: MdpDocument = serde_json::from_str(text)?;
        Mdp::from_document(&doc)
    }
}

#[derive(Debug, Clone, Default)]
pub struct MdpBuilder {
    states: Vec<StateInfo>,
    actions: Vec<String>,
    rows: Vec<Vec<Option<Distribution>>>,
}

impl MdpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_state<L, I>(&mut self, name: impl Into<String>, labels: I) -> StateId
    where
        I: IntoIterator<Item = L>,
        L: Into<String>,
    {
        self.states.push(StateInfo { name: name.into(), labels: labels.into_iter().map(Into::into).collect() });
        self.rows.push(vec![None; self.actions.len()]);
        StateId(self.states.len() as u32 - 1)
    }

    pub fn add_action(&mut self, name: impl Into<String>) -> ActionId {
        self.actions.push(name.into());
        for row in &mut self.rows {
            row.push(None);
        }
        ActionId(self.actions.len() as u32 - 1)
    }

    pub fn set(&mut self, s: StateId, a: ActionId, dist: Distribution) {
        self.rows[s.index()][a.index()] = Some(dist);
    }

    /// Undefined pairs become empty rows.
    pub fn finish(self) -> Mdp {
        let mut offsets = Vec::with_capacity(self.states.len() * self.actions.len() + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for row in self.rows {
            for d in row {
                if let Some(d) = d {
                    entries.extend_from_slice(d.entries());
                }
                offsets.push(entries.len());
            }
        }
        Mdp::from_parts(self.states, self.actions, offsets, entries)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdpDocument {
    pub states: Vec<StateDoc>,
    pub actions: Vec<ActionDoc>,
    pub transitions: Vec<TransitionDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDoc {
    pub id: u32,
    pub name: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDoc {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionDoc {
    pub state: u32,
    pub action: u32,
    pub successors: Vec<SuccessorDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessorDoc {
    pub state: u32,
    pub num: u64,
    pub den: u64,
}
