//! The n-fold synchronized product of an MDP, explored under the counting
//! abstraction (configurations as multisets of states), plus an unquotiented
//! tuple product for small n that serves as an oracle.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::time::Instant;

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::mdp::{ActionId, Mdp, MdpError, Prob, StateId, StateInfo, LABEL_HEAVEN, LABEL_HELL, LABEL_START};
use crate::solver::{self, chain_almost_sure, extract_strategy, induced_chain, prob1, SolveError, StateSet, Strategy};

pub const DEFAULT_CAP: usize = 5_000_000;
pub const FULL_PRODUCT_MAX_N: u32 = 3;

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("unknown action {0}")]
    UnknownAction(ActionId),
    #[error("config mentions unknown state {0}")]
    UnknownState(StateId),
    #[error("mdp has no unique state labeled {0:?}")]
    MissingLabel(&'static str),
    #[error("state space cap of {cap} configurations exceeded")]
    CapExceeded { cap: usize },
    #[error("full product limited to n <= {FULL_PRODUCT_MAX_N}, got {0}")]
    TooLarge(u32),
    #[error("population size must be positive")]
    EmptyPopulation,
    #[error("product probability does not fit in 64-bit fractions")]
    Overflow,
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// A configuration of the n-fold product up to component permutation:
/// nonzero counts sorted by state index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Config {
    counts: Vec<(StateId, u32)>,
}

impl Config {
    pub fn new(counts: impl IntoIterator<Item = (StateId, u32)>) -> Self {
        let mut map: BTreeMap<StateId, u32> = BTreeMap::new();
        for (s, c) in counts {
            *map.entry(s).or_default() += c;
        }
        Self { counts: map.into_iter().filter(|&(_, c)| c > 0).collect() }
    }

    pub fn all_at(s: StateId, n: u32) -> Self {
        Self::new([(s, n)])
    }

    pub fn from_dense(dense: &[u32]) -> Self {
        Self {
            counts: dense
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (StateId(i as u32), c))
                .collect(),
        }
    }

    pub fn dense(&self, num_states: usize) -> Vec<u32> {
        let mut out = vec![0; num_states];
        for &(s, c) in &self.counts {
            out[s.index()] = c;
        }
        out
    }

    pub fn counts(&self) -> &[(StateId, u32)] {
        &self.counts
    }

    pub fn n(&self) -> u32 {
        self.counts.iter().map(|e| e.1).sum()
    }

    pub fn count(&self, s: StateId) -> u32 {
        self.counts.binary_search_by_key(&s, |e| e.0).map(|i| self.counts[i].1).unwrap_or(0)
    }

    pub fn marks(&self, s: StateId) -> bool {
        self.count(s) > 0
    }

    pub fn marked(&self) -> impl Iterator<Item = StateId> + '_ {
        self.counts.iter().map(|e| e.0)
    }

    /// `name:count,...` in state order.
    pub fn key(&self, mdp: &Mdp) -> String {
        self.counts
            .iter()
            .map(|&(s, c)| format!("{}:{c}", mdp.state_name(s)))
            .collect::<Vec<_>>()
            .join(",")
    }

    fn check(&self, mdp: &Mdp) -> Result<(), PopulationError> {
        match self.counts.iter().find(|e| e.0.index() >= mdp.num_states()) {
            Some(&(s, _)) => Err(PopulationError::UnknownState(s)),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.counts.iter().map(|(s, c)| format!("{s}:{c}")).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

type Wide = Ratio<u128>;

/// All ways of writing `k` as an ordered sum of `m` nonnegative parts.
fn compositions(k: u32, m: usize) -> Vec<Vec<u32>> {
    fn rec(k: u32, m: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if m == 1 {
            cur.push(k);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for first in (0..=k).rev() {
            cur.push(first);
            rec(k - first, m - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, m, &mut Vec::with_capacity(m), &mut out);
    out
}

fn multinomial(parts: &[u32]) -> u128 {
    // product of binomials, exact at every step
    let mut total = 0u128;
    let mut acc = 1u128;
    for &p in parts {
        for i in 1..=p as u128 {
            total += 1;
            acc = acc * total / i;
        }
    }
    acc
}

fn widen(p: Prob) -> Wide {
    Wide::new(*p.numer() as u128, *p.denom() as u128)
}

fn narrow(p: Wide) -> Result<Prob, PopulationError> {
    let num = u64::try_from(*p.numer()).map_err(|_| PopulationError::Overflow)?;
    let den = u64::try_from(*p.denom()).map_err(|_| PopulationError::Overflow)?;
    Ok(Prob::new(num, den))
}

/// Successor distribution of a dense configuration: each component moves
/// independently, and the result is grouped by count vector.
fn expand(mdp: &Mdp, dense: &[u32], a: ActionId) -> Result<Vec<(Vec<u32>, Wide)>, PopulationError> {
    let mut acc: Vec<(Vec<u32>, Wide)> = vec![(vec![0; dense.len()], Wide::from_integer(1))];
    for (q, &k) in dense.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let d = mdp.dist(StateId(q as u32), a);
        if d.is_empty() {
            return Err(MdpError::Invalid(vec![crate::mdp::Violation::NotTotal {
                state: StateId(q as u32),
                action: a,
            }])
            .into());
        }
        if d.len() == 1 {
            let t = d[0].0.index();
            for (v, _) in acc.iter_mut() {
                v[t] += k;
            }
            continue;
        }
        let probs: Vec<Wide> = d.iter().map(|e| widen(e.1)).collect();
        let mut next: BTreeMap<Vec<u32>, Wide> = BTreeMap::new();
        let splits = compositions(k, d.len());
        for (v, p) in &acc {
            for split in &splits {
                let mut pr = *p * Wide::from_integer(multinomial(split));
                let mut w = v.clone();
                for (i, &part) in split.iter().enumerate() {
                    if part > 0 {
                        w[d[i].0.index()] += part;
                        pr *= probs[i].pow(part as i32);
                    }
                }
                *next.entry(w).or_insert_with(|| Wide::from_integer(0)) += pr;
            }
        }
        acc = next.into_iter().collect();
    }
    acc.sort_by(|x, y| x.0.cmp(&y.0));
    Ok(acc)
}

fn check_action(mdp: &Mdp, a: ActionId) -> Result<(), PopulationError> {
    if a.index() >= mdp.num_actions() {
        Err(PopulationError::UnknownAction(a))
    } else {
        Ok(())
    }
}

/// Exact successor distribution of `config` under `action`.
pub fn config_distribution(mdp: &Mdp, config: &Config, action: ActionId) -> Result<Vec<(Config, Prob)>, PopulationError> {
    config.check(mdp)?;
    check_action(mdp, action)?;
    expand(mdp, &config.dense(mdp.num_states()), action)?
        .into_iter()
        .map(|(v, p)| Ok((Config::from_dense(&v), narrow(p)?)))
        .collect()
}

/// Support of [`config_distribution`], sorted.
pub fn config_successors(mdp: &Mdp, config: &Config, action: ActionId) -> Result<Vec<Config>, PopulationError> {
    let mut out: Vec<Config> = config_distribution(mdp, config, action)?.into_iter().map(|e| e.0).collect();
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct QuotientOptions {
    pub cap: usize,
    /// Merge every configuration marking a state that cannot reach Heaven
    /// into one absorbing configuration. Exact for reachability of End.
    pub collapse_doomed: bool,
}

impl Default for QuotientOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_CAP, collapse_doomed: true }
    }
}

/// Counting-abstraction product restricted to configurations reachable
/// from Start.
#[derive(Debug, Clone)]
pub struct AbstractProduct {
    pub mdp: Mdp,
    pub configs: Vec<Config>,
    pub start: StateId,
    pub end: Option<StateId>,
    pub n: u32,
    index: HashMap<Config, StateId>,
}

impl AbstractProduct {
    pub fn id_of(&self, config: &Config) -> Option<StateId> {
        self.index.get(config).copied()
    }

    pub fn config(&self, s: StateId) -> &Config {
        &self.configs[s.index()]
    }
}

fn required_label(mdp: &Mdp, label: &'static str) -> Result<StateId, PopulationError> {
    mdp.labeled(label).ok_or(PopulationError::MissingLabel(label))
}

/// Base states from which no Heaven state is reachable.
pub fn doomed_states(mdp: &Mdp) -> Vec<bool> {
    let heaven: Vec<StateId> = mdp.states_with_label(LABEL_HEAVEN).collect();
    let alive = solver::graph_reachable_to(mdp, &heaven);
    mdp.states().map(|s| !alive.contains(s)).collect()
}

pub fn build_quotient(mdp: &Mdp, n: u32, opts: &QuotientOptions) -> Result<AbstractProduct, PopulationError> {
    if n == 0 {
        return Err(PopulationError::EmptyPopulation);
    }
    mdp.check_total()?;
    let start_state = required_label(mdp, LABEL_START)?;
    let heaven = required_label(mdp, LABEL_HEAVEN)?;
    let ns = mdp.num_states();
    let doomed = if opts.collapse_doomed { doomed_states(mdp) } else { vec![false; ns] };
    let sink: Option<Vec<u32>> = doomed.iter().position(|&d| d).map(|i| {
        let mut v = vec![0; ns];
        v[i] = n;
        v
    });
    let is_doomed = |v: &[u32]| v.iter().zip(&doomed).any(|(&c, &d)| c > 0 && d);

    let start_dense = Config::all_at(start_state, n).dense(ns);
    let mut index: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut order: Vec<Vec<u32>> = Vec::new();
    index.insert(start_dense.clone(), 0);
    order.push(start_dense);

    let mut offsets = vec![0usize];
    let mut entries: Vec<(StateId, Prob)> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let here = order[i].clone();
        let absorbing = is_doomed(&here);
        for a in mdp.actions() {
            if absorbing {
                entries.push((StateId(i as u32), Prob::from_integer(1)));
                offsets.push(entries.len());
                continue;
            }
            let mut row: BTreeMap<u32, Wide> = BTreeMap::new();
            for (mut succ, p) in expand(mdp, &here, a)? {
                if is_doomed(&succ) {
                    succ = sink.clone().expect("doomed implies a sink");
                }
                let id = match index.get(&succ) {
                    Some(&id) => id,
                    None => {
                        if order.len() >= opts.cap {
                            return Err(PopulationError::CapExceeded { cap: opts.cap });
                        }
                        let id = order.len() as u32;
                        index.insert(succ.clone(), id);
                        order.push(succ);
                        id
                    }
                };
                *row.entry(id).or_insert_with(|| Wide::from_integer(0)) += p;
            }
            for (id, p) in row {
                entries.push((StateId(id), narrow(p)?));
            }
            offsets.push(entries.len());
        }
        i += 1;
    }

    let configs: Vec<Config> = order.iter().map(|v| Config::from_dense(v)).collect();
    let end_config = Config::all_at(heaven, n);
    let mut states = Vec::with_capacity(configs.len());
    let mut end = None;
    for (i, c) in configs.iter().enumerate() {
        let mut info = StateInfo { name: c.key(mdp), labels: Default::default() };
        if i == 0 {
            info.labels.insert(LABEL_START.to_string());
        }
        if *c == end_config {
            info.labels.insert(LABEL_HEAVEN.to_string());
            end = Some(StateId(i as u32));
        }
        if is_doomed(&order[i]) {
            info.labels.insert(LABEL_HELL.to_string());
        }
        states.push(info);
    }
    let actions = mdp.actions().map(|a| mdp.action_name(a).to_string()).collect();
    let product = Mdp::from_parts(states, actions, offsets, entries);
    let index = configs.iter().enumerate().map(|(i, c)| (c.clone(), StateId(i as u32))).collect();
    Ok(AbstractProduct { mdp: product, configs, start: StateId(0), end, n, index })
}

/// Ordered-tuple product for small populations.
#[derive(Debug, Clone)]
pub struct FullProduct {
    pub mdp: Mdp,
    pub tuples: Vec<Vec<StateId>>,
    pub start: StateId,
    pub end: Option<StateId>,
    index: HashMap<Vec<StateId>, StateId>,
}

impl FullProduct {
    pub fn id_of(&self, tuple: &[StateId]) -> Option<StateId> {
        self.index.get(tuple).copied()
    }

    /// Every reachable permutation of a member of `set` is also a member.
    pub fn permutation_closed(&self, set: &StateSet) -> bool {
        set.iter().all(|s| {
            permutations(&self.tuples[s.index()])
                .iter()
                .all(|p| self.id_of(p).is_some_and(|id| set.contains(id)))
        })
    }
}

fn permutations(v: &[StateId]) -> Vec<Vec<StateId>> {
    if v.len() <= 1 {
        return vec![v.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..v.len() {
        let mut rest = v.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

pub fn build_full(mdp: &Mdp, n: u32) -> Result<FullProduct, PopulationError> {
    if n == 0 {
        return Err(PopulationError::EmptyPopulation);
    }
    if n > FULL_PRODUCT_MAX_N {
        return Err(PopulationError::TooLarge(n));
    }
    mdp.check_total()?;
    let start_state = required_label(mdp, LABEL_START)?;
    let heaven = required_label(mdp, LABEL_HEAVEN)?;
    let start = vec![start_state; n as usize];
    let mut index: HashMap<Vec<StateId>, StateId> = HashMap::new();
    let mut tuples = vec![start.clone()];
    index.insert(start, StateId(0));
    let mut offsets = vec![0usize];
    let mut entries = Vec::new();
    let mut i = 0;
    while i < tuples.len() {
        let here = tuples[i].clone();
        for a in mdp.actions() {
            let mut row: Vec<(Vec<StateId>, Prob)> = vec![(Vec::new(), Prob::from_integer(1))];
            for &q in &here {
                let d = mdp.dist(q, a);
                row = row
                    .into_iter()
                    .flat_map(|(prefix, p)| {
                        d.iter().map(move |&(t, pt)| {
                            let mut v = prefix.clone();
                            v.push(t);
                            (v, p * pt)
                        })
                    })
                    .collect();
            }
            let mut ids: Vec<(StateId, Prob)> = Vec::with_capacity(row.len());
            for (t, p) in row {
                let id = *index.entry(t.clone()).or_insert_with(|| {
                    tuples.push(t);
                    StateId(tuples.len() as u32 - 1)
                });
                ids.push((id, p));
            }
            ids.sort_by_key(|e| e.0);
            entries.extend(ids);
            offsets.push(entries.len());
        }
        i += 1;
    }
    let end_tuple = vec![heaven; n as usize];
    let end = index.get(&end_tuple).copied();
    let states = tuples
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut info = StateInfo {
                name: format!("({})", t.iter().map(|&s| mdp.state_name(s)).collect::<Vec<_>>().join(",")),
                labels: Default::default(),
            };
            if i == 0 {
                info.labels.insert(LABEL_START.to_string());
            }
            if Some(StateId(i as u32)) == end {
                info.labels.insert(LABEL_HEAVEN.to_string());
            }
            info
        })
        .collect();
    let actions = mdp.actions().map(|a| mdp.action_name(a).to_string()).collect();
    Ok(FullProduct { mdp: Mdp::from_parts(states, actions, offsets, entries), tuples, start: StateId(0), end, index })
}

/// Verdict on the tuple product together with its winning set.
pub fn full_sync(mdp: &Mdp, n: u32) -> Result<(bool, FullProduct, StateSet), PopulationError> {
    let full = build_full(mdp, n)?;
    let win = match full.end {
        Some(end) => prob1(&full.mdp, &[end])?,
        None => StateSet::empty(full.mdp.num_states()),
    };
    Ok((win.contains(full.start), full, win))
}

#[derive(Debug, Clone, Serialize)]
pub struct SyncDiagnostics {
    pub reachable_configs: usize,
    pub winning_configs: usize,
    /// Whether the extracted strategy's induced chain hits End almost surely.
    pub certified: Option<bool>,
    pub solve_millis: u128,
}

#[derive(Debug, Clone)]
pub struct SyncResult {
    pub synchronizable: bool,
    pub product: AbstractProduct,
    pub strategy: Option<Strategy>,
    pub diagnostics: SyncDiagnostics,
}

impl SyncResult {
    pub fn action_for(&self, config: &Config) -> Option<ActionId> {
        let id = self.product.id_of(config)?;
        self.strategy.as_ref()?.get(id)
    }
}

/// Decides whether Start can be synchronized in the `n`-fold product.
pub fn check_sync(mdp: &Mdp, n: u32, opts: &QuotientOptions) -> Result<SyncResult, PopulationError> {
    let started = Instant::now();
    let product = build_quotient(mdp, n, opts)?;
    let (synchronizable, strategy, winning, certified) = match product.end {
        None => (false, None, 0, None),
        Some(end) => {
            let win = prob1(&product.mdp, &[end])?;
            if win.contains(product.start) {
                let strategy = extract_strategy(&product.mdp, &win, &[end])?;
                let chain = induced_chain(&product.mdp, &strategy, product.start)?;
                let target = chain.indices_of(&[end]);
                let ok = chain_almost_sure(&chain.chain, 0, &target);
                (true, Some(strategy), win.len(), Some(ok))
            } else {
                (false, None, win.len(), None)
            }
        }
    };
    let diagnostics = SyncDiagnostics {
        reachable_configs: product.configs.len(),
        winning_configs: winning,
        certified,
        solve_millis: started.elapsed().as_millis(),
    };
    Ok(SyncResult { synchronizable, product, strategy, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::countdown::parse_game;
    use crate::reduction::{compile, ActionRole, CompileOptions, StateRole};

    fn compiled(text: &str) -> crate::reduction::Compiled {
        compile(&parse_game(text).unwrap(), CompileOptions::default()).unwrap()
    }

    #[test]
    fn compositions_and_multinomials() {
        assert_eq!(compositions(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(compositions(3, 3).len(), 10);
        assert_eq!(multinomial(&[1, 1]), 2);
        assert_eq!(multinomial(&[2, 1, 1]), 12);
    }

    #[test]
    fn two_waiting_components_split_three_ways() {
        let c = compiled("init v 1\nedge v 1 v");
        let gm = &c.gadgets;
        let wait = gm.state(StateRole::Wait).unwrap();
        let ready = gm.state(StateRole::Ready).unwrap();
        let a = gm.action(ActionRole::Wait).unwrap();
        let dist = config_distribution(&c.mdp, &Config::all_at(wait, 2), a).unwrap();
        let expect = vec![
            (Config::new([(wait, 2)]), Prob::new(1, 4)),
            (Config::new([(wait, 1), (ready, 1)]), Prob::new(1, 2)),
            (Config::new([(ready, 2)]), Prob::new(1, 4)),
        ];
        for e in &expect {
            assert!(dist.contains(e), "{dist:?}");
        }
        assert_eq!(dist.len(), 3);
    }

    #[test]
    fn ignored_action_is_identity() {
        let c = compiled("init v 1\nedge v 1 v");
        let gm = &c.gadgets;
        let wait = gm.state(StateRole::Wait).unwrap();
        let mc = gm.bit(crate::reduction::Counter::Main, 0, 0).unwrap();
        let cfg = Config::new([(wait, 2), (mc, 1)]);
        let win = gm.action(ActionRole::Win).unwrap();
        assert_eq!(config_successors(&c.mdp, &cfg, win).unwrap(), vec![cfg]);
    }

    #[test]
    fn single_start_component() {
        let c = compiled("init v0 1\nedge v0 1 v0\nedge v0 1 u\nedge u 2 u");
        let gm = &c.gadgets;
        let start = gm.state(StateRole::StartState).unwrap();
        let a = gm.action(ActionRole::Start).unwrap();
        let succ = config_successors(&c.mdp, &Config::all_at(start, 1), a).unwrap();
        assert_eq!(succ.len(), gm.min_sync_n);
        assert!(succ.iter().all(|s| s.n() == 1));
    }

    #[test]
    fn quotient_n1_matches_reachable_part() {
        let c = compiled("init v 1\nedge v 1 v");
        let q = build_quotient(&c.mdp, 1, &QuotientOptions::default()).unwrap();
        let start = c.mdp.labeled(LABEL_START).unwrap();
        let mut seen = vec![start];
        let mut i = 0;
        while i < seen.len() {
            for a in c.mdp.actions() {
                for t in c.mdp.successors(seen[i], a) {
                    if !seen.contains(&t) {
                        seen.push(t);
                    }
                }
            }
            i += 1;
        }
        assert_eq!(q.configs.len(), seen.len());
        assert!(q.mdp.validate().is_empty());
        assert_eq!(q.config(q.start), &Config::all_at(start, 1));
    }

    #[test]
    fn collapse_preserves_verdict() {
        let c = compiled("init v 3\nedge v 2 v");
        for n in 1..=3 {
            let plain = QuotientOptions { collapse_doomed: false, ..Default::default() };
            let a = check_sync(&c.mdp, n, &QuotientOptions::default()).unwrap();
            let b = check_sync(&c.mdp, n, &plain).unwrap();
            assert_eq!(a.synchronizable, b.synchronizable);
            assert!(a.diagnostics.reachable_configs <= b.diagnostics.reachable_configs);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let c = compiled("init v 1\nedge v 1 v");
        let err = build_quotient(&c.mdp, 2, &QuotientOptions { cap: 3, collapse_doomed: true }).unwrap_err();
        assert!(matches!(err, PopulationError::CapExceeded { cap: 3 }));
    }

    #[test]
    fn full_product_limits() {
        let c = compiled("init v 1\nedge v 1 v");
        assert!(matches!(build_full(&c.mdp, 4), Err(PopulationError::TooLarge(4))));
        let full = build_full(&c.mdp, 1).unwrap();
        let q = build_quotient(&c.mdp, 1, &QuotientOptions { collapse_doomed: false, ..Default::default() }).unwrap();
        assert_eq!(full.tuples.len(), q.configs.len());
    }

    #[test]
    fn key_format() {
        let c = compiled("init v 1\nedge v 1 v");
        let gm = &c.gadgets;
        let cfg = Config::new([(gm.state(StateRole::Wait).unwrap(), 2), (gm.state(StateRole::ControlW).unwrap(), 1)]);
        assert_eq!(cfg.key(&c.mdp), "Wait:2,W:1");
    }
}
