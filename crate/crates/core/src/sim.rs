//! Seeded Monte Carlo runs of configuration strategies on the n-fold product.

use std::collections::HashMap;

use num_rational::Ratio;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::mdp::{ActionId, Mdp, Prob, StateId, LABEL_HEAVEN, LABEL_START};
use crate::pilot::{pilot_action, PilotContext};
use crate::population::{Config, SyncResult};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("strategy undefined at {0}")]
    Undefined(String),
    #[error("mdp has no unique state labeled {0:?}")]
    MissingLabel(&'static str),
    #[error("trans({state}, {action}) is undefined")]
    NotTotal { state: String, action: String },
}

/// Anything that picks an action for a configuration.
pub trait ConfigPolicy {
    fn choose(&self, config: &Config) -> Option<ActionId>;
}

impl ConfigPolicy for PilotContext {
    fn choose(&self, config: &Config) -> Option<ActionId> {
        pilot_action(self, config).ok()
    }
}

impl ConfigPolicy for SyncResult {
    fn choose(&self, config: &Config) -> Option<ActionId> {
        self.action_for(config)
    }
}

impl ConfigPolicy for HashMap<Config, ActionId> {
    fn choose(&self, config: &Config) -> Option<ActionId> {
        self.get(config).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOutcome {
    pub reached_end: bool,
    pub steps: u64,
    pub final_config: Config,
    pub trace: Option<Vec<(Config, ActionId)>>,
}

/// Step budget used when none is given: `10 (c0 + 1) n (k_mc + k_ac + 4)`.
pub fn default_max_steps(c0: u64, n: u32, k_mc: usize, k_ac: usize) -> u64 {
    10 * (c0 + 1) * n as u64 * (k_mc + k_ac + 4) as u64
}

/// splitmix64 finalizer applied to `seed + index * golden gamma`.
pub fn run_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Picks successor `i` for a uniform 64-bit draw `u` when
/// `u / 2^64 < cumulative(i)`, compared exactly as `u * den < num * 2^64`.
pub fn pick(dist: &[(StateId, Prob)], u: u64) -> StateId {
    let mut cum = Prob::from_integer(0);
    for &(s, p) in dist {
        cum += p;
        let lhs = u as u128 * *cum.denom() as u128;
        let rhs = (*cum.numer() as u128) << 64;
        if lhs < rhs {
            return s;
        }
    }
    dist.last().expect("nonempty distribution").0
}

pub fn sample_successor(dist: &[(StateId, Prob)], rng: &mut impl RngCore) -> StateId {
    pick(dist, rng.next_u64())
}

/// One run from the all-Start configuration. Each step samples every
/// component independently.
pub fn run(
    mdp: &Mdp,
    n: u32,
    policy: &dyn ConfigPolicy,
    seed: u64,
    max_steps: u64,
    record_trace: bool,
) -> Result<SimOutcome, SimError> {
    let start = mdp.labeled(LABEL_START).ok_or(SimError::MissingLabel(LABEL_START))?;
    let heaven = mdp.labeled(LABEL_HEAVEN).ok_or(SimError::MissingLabel(LABEL_HEAVEN))?;
    run_from(mdp, Config::all_at(start, n), heaven, policy, seed, max_steps, record_trace)
}

pub fn run_from(
    mdp: &Mdp,
    initial: Config,
    heaven: StateId,
    policy: &dyn ConfigPolicy,
    seed: u64,
    max_steps: u64,
    record_trace: bool,
) -> Result<SimOutcome, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = Config::all_at(heaven, initial.n());
    let mut config = initial;
    let mut trace = record_trace.then(Vec::new);
    let mut steps = 0;
    while config != end && steps < max_steps {
        let a = policy.choose(&config).ok_or_else(|| SimError::Undefined(config.key(mdp)))?;
        let mut moved = Vec::with_capacity(config.counts().len());
        for &(s, k) in config.counts() {
            let dist = mdp.dist(s, a);
            if dist.is_empty() {
                return Err(SimError::NotTotal {
                    state: mdp.state_name(s).into(),
                    action: mdp.action_name(a).into(),
                });
            }
            for _ in 0..k {
                moved.push((sample_successor(dist, &mut rng), 1));
            }
        }
        if let Some(t) = trace.as_mut() {
            t.push((config.clone(), a));
        }
        config = Config::new(moved);
        steps += 1;
    }
    Ok(SimOutcome { reached_end: config == end, steps, final_config: config, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub runs: u64,
    pub successes: u64,
    #[serde(serialize_with = "ser_ratio")]
    pub success_rate: Ratio<u64>,
    pub mean_steps: f64,
    pub min_steps: u64,
    pub max_steps: u64,
}

fn ser_ratio<S: serde::Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

/// Aggregates `runs` independent runs seeded with [`run_seed`].
pub fn estimate(
    mdp: &Mdp,
    n: u32,
    policy: &dyn ConfigPolicy,
    runs: u64,
    seed: u64,
    max_steps: u64,
) -> Result<Estimate, SimError> {
    assert!(runs > 0, "runs must be positive");
    let mut successes = 0;
    let mut total = 0u64;
    let (mut lo, mut hi) = (u64::MAX, 0);
    for i in 0..runs {
        let out = run(mdp, n, policy, run_seed(seed, i), max_steps, false)?;
        successes += out.reached_end as u64;
        total += out.steps;
        lo = lo.min(out.steps);
        hi = hi.max(out.steps);
    }
    Ok(Estimate {
        runs,
        successes,
        success_rate: Ratio::new(successes, runs),
        mean_steps: total as f64 / runs as f64,
        min_steps: lo,
        max_steps: hi,
    })
}

/// One `config_key<TAB>action_name` line per step.
pub fn trace_dump(mdp: &Mdp, trace: &[(Config, ActionId)]) -> String {
    trace.iter().map(|(c, a)| format!("{}\t{}\n", c.key(mdp), mdp.action_name(*a))).collect()
}
