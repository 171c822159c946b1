//! The coordinator's dynamic program: a forward pass enumerating every
//! belief reachable from the initial one under any enumerated prescription,
//! then backward induction over those beliefs with terminal value zero.
//!
//! Beliefs are deduplicated by canonical key. Values and minimizing
//! prescriptions are memoized per (slot, belief); ties break toward the
//! first minimizer in prescription enumeration order so that solves are
//! reproducible run to run.
//!
//! The forward pass records, memory permitting, the successor index of
//! every (belief, prescription, action) triple so backward induction runs
//! on plain arrays instead of re-hashing posterior beliefs.

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::belief::{likelihood_factor, Belief, BeliefKey};
use crate::error::{Error, Result};
use crate::model::{JointAction, ModeProfile, Scenario};
use crate::prescription::{Prescription, PrescriptionSpace};

/// Memory allowed for recorded successor indices before backward induction
/// falls back to hash lookups, in entries (u32 each).
const TRANSITION_BUDGET: usize = 96_000_000;

/// Per-slot collections of reachable beliefs, index 0 = slot 1.
#[derive(Debug)]
pub struct ReachableSets {
    levels: Vec<Level>,
}

impl ReachableSets {
    /// Number of slots covered.
    pub fn horizon(&self) -> usize {
        self.levels.len()
    }

    /// Beliefs reachable at 1-based slot `t`, in discovery order.
    pub fn beliefs_at(&self, t: usize) -> &[Belief] {
        &self.levels[t - 1].beliefs
    }

    /// Total beliefs stored across all slots.
    pub fn total(&self) -> usize {
        self.levels.iter().map(|l| l.beliefs.len()).sum()
    }
}

#[derive(Debug, Default)]
struct Level {
    beliefs: Vec<Belief>,
    lookup: FxHashMap<BeliefKey, u32>,
}

impl Level {
    fn with_capacity(capacity: usize) -> Level {
        Level {
            beliefs: Vec::with_capacity(capacity),
            lookup: FxHashMap::with_capacity_and_hasher(capacity, Default::default()),
        }
    }

    fn insert(&mut self, key: BeliefKey, belief: Belief) -> u32 {
        let index = self.beliefs.len() as u32;
        self.lookup.insert(key, index);
        self.beliefs.push(belief);
        index
    }

    fn index_of(&self, key: &[i64]) -> Option<u32> {
        self.lookup.get(key).copied()
    }

    fn len(&self) -> usize {
        self.beliefs.len()
    }
}

/// One row of a solved table: a reachable belief, its optimal expected
/// remaining cost, and the minimizing prescription.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableEntry {
    pub belief: Belief,
    pub value: f64,
    pub prescription: Prescription,
}

/// Output of [`solve`]: per-slot value tables plus everything needed to
/// execute the policy without re-running the solver.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolvedPolicy {
    /// Content hash of the scenario this policy was solved for.
    pub fingerprint: String,
    pub agents: usize,
    pub horizon: usize,
    /// Rounding used for belief lookups; must match the solve.
    pub dedup_rounding: u32,
    pub space: PrescriptionSpace,
    /// steps[t-1] lists the reachable beliefs of slot t in discovery order.
    pub steps: Vec<Vec<TableEntry>>,
    #[serde(skip)]
    index: Vec<FxHashMap<BeliefKey, u32>>,
}

impl SolvedPolicy {
    /// Optimal expected cumulative cost from the initial belief.
    pub fn initial_value(&self) -> f64 {
        self.steps[0][0].value
    }

    /// Stored entry for `belief` at 1-based slot `t`.
    pub fn entry_at(&self, t: usize, belief: &Belief) -> Result<&TableEntry> {
        if t < 1 || t > self.horizon {
            return Err(Error::InvalidInput(format!(
                "slot {t} outside horizon 1..={}",
                self.horizon
            )));
        }
        let key = belief.canonical_key(self.dedup_rounding);
        let index = self.index[t - 1].get(&key).copied().ok_or_else(|| {
            Error::UnreachableBelief {
                time: t,
                detail: format!(
                    "belief {:?} is not in the solved support; \
                     was the policy solved for a different scenario?",
                    belief.probs()
                ),
            }
        })?;
        Ok(&self.steps[t - 1][index as usize])
    }

    /// Minimizing prescription for `belief` at slot `t`.
    pub fn prescription_at(&self, t: usize, belief: &Belief) -> Result<&Prescription> {
        Ok(&self.entry_at(t, belief)?.prescription)
    }

    /// Optimal expected remaining cost for `belief` at slot `t`.
    pub fn value_at(&self, t: usize, belief: &Belief) -> Result<f64> {
        Ok(self.entry_at(t, belief)?.value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<SolvedPolicy> {
        let mut policy: SolvedPolicy = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("policy parse error: {e}")))?;
        policy.rebuild_index();
        Ok(policy)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| {
            Error::InvalidInput(format!("cannot write policy {}: {e}", path.display()))
        })
    }

    pub fn load(path: &std::path::Path) -> Result<SolvedPolicy> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidInput(format!("cannot read policy {}: {e}", path.display()))
        })?;
        SolvedPolicy::from_json(&text)
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .steps
            .iter()
            .map(|entries| {
                entries
                    .iter()
                    .enumerate()
                    .map(|(i, e)| (e.belief.canonical_key(self.dedup_rounding), i as u32))
                    .collect()
            })
            .collect();
    }
}

/// Precomputed per-scenario dimensions and per-action cost row. Solves run
/// restricted to the support of the initial belief: reachable posteriors
/// never put mass on a profile the prior excluded, and the excluded entries
/// stay exactly zero, so dropping them changes no result bit.
struct Kernel {
    agents: usize,
    profiles: usize,
    actions: usize,
    /// Profile indices the computation is restricted to, ascending.
    support: Vec<usize>,
    /// cost_of[u] = 1.0 unless exactly one bit of u is set.
    cost_of: Vec<f64>,
}

impl Kernel {
    fn with_support(agents: usize, support: Vec<usize>) -> Kernel {
        let actions = 1usize << agents;
        Kernel {
            agents,
            profiles: ModeProfile::count(agents),
            actions,
            support,
            cost_of: (0..actions)
                .map(|u| f64::from(u.count_ones() != 1))
                .collect(),
        }
    }

    fn full(agents: usize) -> Kernel {
        let profiles = ModeProfile::count(agents);
        Kernel::with_support(agents, (0..profiles).collect())
    }

    fn restricted(agents: usize, initial: &Belief) -> Kernel {
        let support = initial
            .probs()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(m, _)| m)
            .collect();
        Kernel::with_support(agents, support)
    }

    /// Supported entries per belief.
    fn dim(&self) -> usize {
        self.support.len()
    }

    /// Restricted likelihood table for one prescription: entry
    /// [u * dim + j] is the probability of joint action `u` given profile
    /// `support[j]`. Factors accumulate in agent order to stay bit-identical
    /// with [`Belief::update`].
    fn likelihood_table(&self, gamma: &Prescription) -> Vec<f64> {
        let prob = |_: usize, mode, transmit| gamma.action_prob(mode, transmit);
        let mut table = Vec::with_capacity(self.actions * self.dim());
        for u in 0..self.actions {
            for &m in &self.support {
                table.push(likelihood_factor(m, self.agents, u, &prob));
            }
        }
        table
    }

    /// Copies a belief's supported entries into `out`.
    fn gather(&self, belief: &Belief, out: &mut [f64]) {
        for (j, &m) in self.support.iter().enumerate() {
            out[j] = belief.prob(m);
        }
    }

    /// Full-length posterior of a gathered belief after the action whose
    /// restricted likelihood row is given; `None` when the action has zero
    /// probability. Off-support entries are exactly zero, matching what
    /// [`Belief::update`] computes for them.
    fn materialize(&self, gathered: &[f64], row: &[f64]) -> Option<(f64, Belief)> {
        let mut pu = 0.0;
        for j in 0..self.dim() {
            pu += gathered[j] * row[j];
        }
        if pu == 0.0 {
            return None;
        }
        let inv = 1.0 / pu;
        let mut probs = vec![0.0; self.profiles];
        for (j, &m) in self.support.iter().enumerate() {
            probs[m] = gathered[j] * row[j] * inv;
        }
        Some((pu, Belief::from_normalized(probs)))
    }
}

/// Expected cost of the current slot: sum over profiles and joint actions of
/// belief mass times action likelihood times the stage cost.
pub fn stage_expected_cost(belief: &Belief, gamma: &Prescription) -> f64 {
    let kernel = Kernel::full(belief.agents());
    let table = kernel.likelihood_table(gamma);
    let mut cost = 0.0;
    for u in 0..kernel.actions {
        let row = &table[u * kernel.profiles..(u + 1) * kernel.profiles];
        let mut pu = 0.0;
        for (m, f) in row.iter().enumerate() {
            pu += belief.prob(m) * f;
        }
        cost += pu * kernel.cost_of[u];
    }
    cost
}

/// All positive-probability joint actions with their probabilities and
/// posterior beliefs. Probabilities sum to one; each posterior equals
/// [`Belief::update`] for that action.
pub fn successor_distribution(
    belief: &Belief,
    gamma: &Prescription,
) -> Vec<(JointAction, f64, Belief)> {
    let kernel = Kernel::full(belief.agents());
    let table = kernel.likelihood_table(gamma);
    let mut gathered = vec![0.0; kernel.profiles];
    kernel.gather(belief, &mut gathered);
    let mut out = Vec::new();
    for u in 0..kernel.actions {
        let row = &table[u * kernel.profiles..(u + 1) * kernel.profiles];
        if let Some((pu, posterior)) = kernel.materialize(&gathered, row) {
            out.push((JointAction::from_bits(u, kernel.agents), pu, posterior));
        }
    }
    out
}

/// Successors of a contiguous run of nodes, deduplicated within the run so
/// the sequential global merge probes each locally-distinct key once.
struct RunExpansion {
    /// One entry per positive-probability successor:
    /// (node offset in run, slot, local distinct id).
    entries: Vec<(u16, u32, u32)>,
    /// Flat canonical keys, `profiles` entries per local distinct id.
    keys: Vec<i64>,
    /// First (node offset, slot) that produced each distinct key, kept so
    /// the merge can rebuild the posterior for newly discovered beliefs.
    first: Vec<(u16, u32)>,
}

fn expand_run(
    run: &[Belief],
    kernel: &Kernel,
    tables: &[Vec<f64>],
    scale: f64,
) -> RunExpansion {
    let dim = kernel.dim();
    let mut local: FxHashMap<BeliefKey, u32> = FxHashMap::default();
    let mut entries = Vec::with_capacity(run.len() * tables.len() * kernel.actions);
    let mut keys = Vec::new();
    let mut first = Vec::new();
    let mut gathered = vec![0.0; dim];
    let mut weights = vec![0.0; dim];
    let mut scratch = vec![0i64; dim];
    for (offset, belief) in run.iter().enumerate() {
        kernel.gather(belief, &mut gathered);
        for (gi, table) in tables.iter().enumerate() {
            for u in 0..kernel.actions {
                let row = &table[u * dim..(u + 1) * dim];
                let mut pu = 0.0;
                for j in 0..dim {
                    weights[j] = gathered[j] * row[j];
                    pu += weights[j];
                }
                if pu == 0.0 {
                    continue;
                }
                let inv = 1.0 / pu;
                // (w * inv) is the posterior entry; rounding it here must
                // match Belief::canonical_key of the normalized posterior.
                for j in 0..dim {
                    scratch[j] = (weights[j] * inv * scale).round() as i64;
                }
                let slot = (gi * kernel.actions + u) as u32;
                let id = match local.get(scratch.as_slice()) {
                    Some(&id) => id,
                    None => {
                        let id = first.len() as u32;
                        local.insert(BeliefKey::from(scratch.clone()), id);
                        keys.extend_from_slice(&scratch);
                        first.push((offset as u16, slot));
                        id
                    }
                };
                entries.push((offset as u16, slot, id));
            }
        }
    }
    RunExpansion {
        entries,
        keys,
        first,
    }
}

/// Successor indices recorded per source level; `u32::MAX` marks a
/// zero-probability (slot, action) pair.
struct Transitions {
    stride: usize,
    index: Vec<u32>,
}

struct Forward {
    levels: Vec<Level>,
    /// transitions[t-1] maps slot-t nodes to slot-t+1 indices, when recorded.
    transitions: Vec<Option<Transitions>>,
}

/// Forward pass: breadth-first enumeration of the beliefs reachable at each
/// slot under every enumerated prescription, deduplicated by canonical key.
pub fn enumerate_reachable(scenario: &Scenario) -> Result<ReachableSets> {
    scenario.validate()?;
    let gammas = PrescriptionSpace::for_scenario(scenario).enumerate();
    let kernel = Kernel::restricted(scenario.agents, &scenario.initial_belief);
    let tables: Vec<Vec<f64>> = gammas.iter().map(|g| kernel.likelihood_table(g)).collect();
    let forward = forward_pass(scenario, &kernel, &tables, false)?;
    Ok(ReachableSets {
        levels: forward.levels,
    })
}

fn forward_pass(
    scenario: &Scenario,
    kernel: &Kernel,
    tables: &[Vec<f64>],
    record: bool,
) -> Result<Forward> {
    let digits = scenario.dedup_rounding;
    let scale = 10f64.powi(digits as i32);
    let cap = scenario.max_belief_states;
    let stride = tables.len() * kernel.actions;

    let mut first = Level::default();
    first.insert(
        scenario.initial_belief.canonical_key(digits),
        scenario.initial_belief.clone(),
    );
    let mut levels = vec![first];
    let mut transitions: Vec<Option<Transitions>> = Vec::new();
    let mut stored = 1usize;
    let mut budget = TRANSITION_BUDGET;

    // Runs bound the per-task key buffers no matter how many prescriptions
    // are enumerated; batches bound how many expansions are in flight.
    let run_size = (600_000 / stride.max(1)).clamp(1, 10_000);
    let batch_runs = 64;

    for source_slot in 1..scenario.horizon {
        let prev_len = levels.last().unwrap().len();
        let mut next = Level::with_capacity((prev_len * 6).min(cap.saturating_sub(stored) + 1));
        let mut recorded = if record && prev_len.saturating_mul(stride) <= budget {
            budget -= prev_len * stride;
            Some(Transitions {
                stride,
                index: vec![u32::MAX; prev_len * stride],
            })
        } else {
            None
        };

        let prev = levels.last().unwrap();
        let mut local_to_global: Vec<u32> = Vec::new();
        let mut gathered = vec![0.0; kernel.dim()];
        for (batch_no, batch) in prev.beliefs.chunks(run_size * batch_runs).enumerate() {
            let expanded: Vec<(usize, RunExpansion)> = batch
                .par_chunks(run_size)
                .enumerate()
                .map(|(run_no, run)| (run_no, expand_run(run, kernel, tables, scale)))
                .collect();
            let batch_base = batch_no * run_size * batch_runs;
            for (run_no, expansion) in &expanded {
                let run_base = batch_base + run_no * run_size;
                local_to_global.clear();
                for (id, key) in expansion.keys.chunks(kernel.dim()).enumerate() {
                    let index = match next.index_of(key) {
                        Some(index) => index,
                        None => {
                            stored += 1;
                            if stored > cap {
                                return Err(Error::StateExplosion {
                                    time: source_slot + 1,
                                    stored,
                                    cap,
                                });
                            }
                            let (offset, slot) = expansion.first[id];
                            let row_start = (slot as usize % kernel.actions) * kernel.dim();
                            let table = &tables[slot as usize / kernel.actions];
                            let row = &table[row_start..row_start + kernel.dim()];
                            let source = &prev.beliefs[run_base + offset as usize];
                            kernel.gather(source, &mut gathered);
                            let (_, posterior) = kernel
                                .materialize(&gathered, row)
                                .expect("positive-probability successor");
                            next.insert(BeliefKey::from(key.to_vec()), posterior)
                        }
                    };
                    local_to_global.push(index);
                }
                if let Some(tr) = &mut recorded {
                    for &(offset, slot, id) in &expansion.entries {
                        let node = run_base + offset as usize;
                        tr.index[node * tr.stride + slot as usize] =
                            local_to_global[id as usize];
                    }
                }
            }
        }
        levels.push(next);
        transitions.push(recorded);
    }
    Ok(Forward {
        levels,
        transitions,
    })
}

/// Backward induction over the reachable beliefs, terminal value zero.
/// Returns the per-slot tables of optimal values and prescriptions.
pub fn solve(scenario: &Scenario) -> Result<SolvedPolicy> {
    scenario.validate()?;
    let space = PrescriptionSpace::for_scenario(scenario);
    let gammas = space.enumerate();
    let kernel = Kernel::restricted(scenario.agents, &scenario.initial_belief);
    let tables: Vec<Vec<f64>> = gammas.iter().map(|g| kernel.likelihood_table(g)).collect();
    let forward = forward_pass(scenario, &kernel, &tables, true)?;
    let digits = scenario.dedup_rounding;
    let horizon = scenario.horizon;

    // values[t-1][i] for belief i at slot t, filled from t = T down.
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); horizon];
    let mut argmins: Vec<Vec<u32>> = vec![Vec::new(); horizon];

    for t in (1..=horizon).rev() {
        let level = &forward.levels[t - 1];
        let next = if t < horizon {
            Some((
                &forward.levels[t],
                values[t].as_slice(),
                forward.transitions[t - 1].as_ref(),
            ))
        } else {
            None
        };
        let solved: Result<Vec<(f64, u32)>> = level
            .beliefs
            .par_iter()
            .enumerate()
            .map(|(node, belief)| match next {
                None => Ok(terminal_min(belief, &kernel, &tables)),
                Some((_, next_values, Some(tr))) => {
                    Ok(recorded_min(belief, node, &kernel, &tables, next_values, tr))
                }
                Some((next_level, next_values, None)) => probing_min(
                    belief,
                    &kernel,
                    &tables,
                    next_values,
                    next_level,
                    digits,
                ),
            })
            .collect();
        let solved = solved?;
        values[t - 1] = solved.iter().map(|&(v, _)| v).collect();
        argmins[t - 1] = solved.iter().map(|&(_, g)| g).collect();
    }

    let steps: Vec<Vec<TableEntry>> = forward
        .levels
        .iter()
        .enumerate()
        .map(|(ti, level)| {
            level
                .beliefs
                .iter()
                .enumerate()
                .map(|(i, belief)| TableEntry {
                    belief: belief.clone(),
                    value: values[ti][i],
                    prescription: gammas[argmins[ti][i] as usize],
                })
                .collect()
        })
        .collect();

    let mut policy = SolvedPolicy {
        fingerprint: scenario.fingerprint(),
        agents: scenario.agents,
        horizon,
        dedup_rounding: digits,
        space,
        steps,
        index: Vec::new(),
    };
    policy.rebuild_index();
    Ok(policy)
}

/// Last slot: only the stage cost matters.
fn terminal_min(belief: &Belief, kernel: &Kernel, tables: &[Vec<f64>]) -> (f64, u32) {
    let dim = kernel.dim();
    let mut gathered = vec![0.0; dim];
    kernel.gather(belief, &mut gathered);
    let mut best = f64::INFINITY;
    let mut best_gamma = 0u32;
    for (gi, table) in tables.iter().enumerate() {
        let mut stage = 0.0;
        for u in 0..kernel.actions {
            let row = &table[u * dim..(u + 1) * dim];
            let mut pu = 0.0;
            for j in 0..dim {
                pu += gathered[j] * row[j];
            }
            stage += pu * kernel.cost_of[u];
        }
        if stage < best {
            best = stage;
            best_gamma = gi as u32;
        }
    }
    (best, best_gamma)
}

/// Bellman minimization using recorded successor indices: no hashing.
fn recorded_min(
    belief: &Belief,
    node: usize,
    kernel: &Kernel,
    tables: &[Vec<f64>],
    next_values: &[f64],
    tr: &Transitions,
) -> (f64, u32) {
    let dim = kernel.dim();
    let mut gathered = vec![0.0; dim];
    kernel.gather(belief, &mut gathered);
    let mut best = f64::INFINITY;
    let mut best_gamma = 0u32;
    let row_base = node * tr.stride;
    for (gi, table) in tables.iter().enumerate() {
        let mut stage = 0.0;
        let mut future = 0.0;
        for u in 0..kernel.actions {
            let target = tr.index[row_base + gi * kernel.actions + u];
            if target == u32::MAX {
                continue;
            }
            let row = &table[u * dim..(u + 1) * dim];
            let mut pu = 0.0;
            for j in 0..dim {
                pu += gathered[j] * row[j];
            }
            stage += pu * kernel.cost_of[u];
            future += pu * next_values[target as usize];
        }
        let rhs = stage + future;
        if rhs < best {
            best = rhs;
            best_gamma = gi as u32;
        }
    }
    (best, best_gamma)
}

/// Bellman minimization via canonical-key lookups, used when recording the
/// transition table would exceed the memory budget.
fn probing_min(
    belief: &Belief,
    kernel: &Kernel,
    tables: &[Vec<f64>],
    next_values: &[f64],
    next_level: &Level,
    digits: u32,
) -> Result<(f64, u32)> {
    let scale = 10f64.powi(digits as i32);
    let dim = kernel.dim();
    let mut gathered = vec![0.0; dim];
    kernel.gather(belief, &mut gathered);
    let mut best = f64::INFINITY;
    let mut best_gamma = 0u32;
    let mut weights = vec![0.0; dim];
    let mut key = vec![0i64; dim];
    for (gi, table) in tables.iter().enumerate() {
        let mut stage = 0.0;
        let mut future = 0.0;
        for u in 0..kernel.actions {
            let row = &table[u * dim..(u + 1) * dim];
            let mut pu = 0.0;
            for j in 0..dim {
                weights[j] = gathered[j] * row[j];
                pu += weights[j];
            }
            if pu == 0.0 {
                continue;
            }
            stage += pu * kernel.cost_of[u];
            let inv = 1.0 / pu;
            for j in 0..dim {
                key[j] = (weights[j] * inv * scale).round() as i64;
            }
            let index = next_level.index_of(&key).ok_or_else(|| {
                Error::InternalInconsistency(format!(
                    "successor belief missing from the reachable set (action bits {u})"
                ))
            })?;
            future += pu * next_values[index as usize];
        }
        let rhs = stage + future;
        if rhs < best {
            best = rhs;
            best_gamma = gi as u32;
        }
    }
    Ok((best, best_gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Mode, Mode::*, SpaceVariant};

    fn scenario(
        belief: Vec<f64>,
        space: SpaceVariant,
        alpha: f64,
        beta: f64,
        horizon: usize,
    ) -> Scenario {
        Scenario {
            agents: 2,
            horizon,
            alpha,
            beta,
            grid_step: 0.05,
            prescription_space: space,
            initial_belief: Belief::new(belief).unwrap(),
            baselines: vec![],
            dedup_rounding: 9,
            max_belief_states: 2_000_000,
        }
    }

    fn b1() -> Vec<f64> {
        vec![0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    }

    fn gamma(de: f64, ag: f64, pa: f64) -> Prescription {
        Prescription::new(de, ag, pa).unwrap()
    }

    fn point(m1: Mode, m2: Mode) -> Belief {
        Belief::point_mass(&ModeProfile::new(vec![m1, m2]))
    }

    #[test]
    fn stage_cost_of_lone_aggressive_transmitter() {
        let cost = stage_expected_cost(&point(Designer, Aggressive), &gamma(0.0, 1.0, 0.3));
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn stage_cost_of_b1_under_always_transmit_designer() {
        // (De,Ag) collides (prob 1/2), (De,Pa) succeeds (prob 1/2).
        let belief = Belief::new(b1()).unwrap();
        let cost = stage_expected_cost(&belief, &gamma(1.0, 1.0, 0.0));
        assert!((cost - 0.5).abs() < 1e-15);
    }

    #[test]
    fn stage_cost_of_two_aggressives_at_half() {
        let cost = stage_expected_cost(&point(Aggressive, Aggressive), &gamma(0.0, 0.5, 0.0));
        assert!((cost - 0.5).abs() < 1e-15);
    }

    #[test]
    fn successors_of_b1_reveal_the_peer() {
        let belief = Belief::new(b1()).unwrap();
        let successors = successor_distribution(&belief, &gamma(0.0, 1.0, 0.0));
        assert_eq!(successors.len(), 2);
        // u iteration order is ascending bit patterns: (0,0) then (0,1).
        let (ref a0, p0, ref s0) = successors[0];
        assert_eq!(a0.bits(), 0b00);
        assert!((p0 - 0.5).abs() < 1e-15);
        assert_eq!(s0, &point(Designer, Passive));
        let (ref a1, p1, ref s1) = successors[1];
        assert_eq!(a1.bits(), 0b01);
        assert!((p1 - 0.5).abs() < 1e-15);
        assert_eq!(s1, &point(Designer, Aggressive));
    }

    #[test]
    fn successors_match_update_exactly() {
        let belief = Belief::new(vec![0.1, 0.2, 0.05, 0.15, 0.1, 0.1, 0.1, 0.1, 0.1]).unwrap();
        let g = gamma(0.35, 0.9, 0.05);
        let successors = successor_distribution(&belief, &g);
        let mut mass = 0.0;
        for (action, p, posterior) in &successors {
            mass += p;
            let updated = belief.update(&g, action).unwrap();
            assert_eq!(posterior.probs(), updated.probs());
        }
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_prescription_gives_single_successor() {
        let belief = point(Designer, Passive);
        let successors = successor_distribution(&belief, &gamma(1.0, 1.0, 0.0));
        assert_eq!(successors.len(), 1);
        assert_eq!(successors[0].1, 1.0);
        assert_eq!(successors[0].2, belief);
    }

    #[test]
    fn uniform_belief_even_coin_has_four_equal_successors() {
        let successors = successor_distribution(&Belief::uniform(2), &gamma(0.5, 0.5, 0.5));
        assert_eq!(successors.len(), 4);
        for (_, p, _) in &successors {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn reachable_sets_stabilize_for_b1() {
        let s = scenario(b1(), SpaceVariant::Constrained, 1.0, 0.0, 10);
        let reach = enumerate_reachable(&s).unwrap();
        assert_eq!(reach.horizon(), 10);
        assert_eq!(reach.beliefs_at(1), &[s.initial_belief.clone()]);
        let expect: Vec<BeliefKey> = [point(Designer, Aggressive), point(Designer, Passive)]
            .iter()
            .map(|b| b.canonical_key(9))
            .collect();
        for t in 2..=10 {
            let mut keys: Vec<BeliefKey> = reach
                .beliefs_at(t)
                .iter()
                .map(|b| b.canonical_key(9))
                .collect();
            keys.sort();
            let mut want = expect.clone();
            want.sort();
            assert_eq!(keys, want, "slot {t}");
        }
    }

    #[test]
    fn point_mass_is_absorbing() {
        let mut belief = vec![0.0; 9];
        belief[ModeProfile::new(vec![Aggressive, Passive]).index()] = 1.0;
        let s = scenario(belief.clone(), SpaceVariant::Full, 1.0, 0.0, 4);
        let reach = enumerate_reachable(&s).unwrap();
        for t in 1..=4 {
            assert_eq!(reach.beliefs_at(t), &[Belief::new(belief.clone()).unwrap()]);
        }
    }

    #[test]
    fn horizon_one_has_no_forward_pass() {
        let s = scenario(b1(), SpaceVariant::Full, 1.0, 0.0, 1);
        let reach = enumerate_reachable(&s).unwrap();
        assert_eq!(reach.horizon(), 1);
        assert_eq!(reach.total(), 1);
    }

    #[test]
    fn tiny_cap_reports_state_explosion() {
        let mut s = scenario(b1(), SpaceVariant::Constrained, 1.0, 0.0, 10);
        s.max_belief_states = 2;
        let err = enumerate_reachable(&s).unwrap_err();
        match err {
            Error::StateExplosion { time, stored, cap } => {
                assert_eq!(time, 2);
                assert_eq!(cap, 2);
                assert!(stored > cap);
            }
            other => panic!("expected StateExplosion, got {other:?}"),
        }
        assert!(err.to_string().contains("dedup_rounding"));
    }

    #[test]
    fn solve_known_designer_passive_pair_is_free() {
        let mut belief = vec![0.0; 9];
        belief[ModeProfile::new(vec![Designer, Passive]).index()] = 1.0;
        let s = scenario(belief, SpaceVariant::Constrained, 1.0, 0.0, 10);
        let policy = solve(&s).unwrap();
        assert_eq!(policy.initial_value(), 0.0);
        for t in 1..=10 {
            let entry = &policy.steps[t - 1][0];
            assert_eq!(entry.prescription.p_de, 1.0, "slot {t}");
        }
    }

    #[test]
    fn solve_two_aggressives_collide_every_slot() {
        let mut belief = vec![0.0; 9];
        belief[ModeProfile::new(vec![Aggressive, Aggressive]).index()] = 1.0;
        let s = scenario(belief, SpaceVariant::Constrained, 1.0, 0.0, 10);
        let policy = solve(&s).unwrap();
        assert_eq!(policy.initial_value(), 10.0);
    }

    #[test]
    fn solve_b1_constrained_costs_half() {
        let s = scenario(b1(), SpaceVariant::Constrained, 1.0, 0.0, 10);
        let policy = solve(&s).unwrap();
        assert!((policy.initial_value() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn solve_two_aggressives_full_space_single_slot() {
        let mut belief = vec![0.0; 9];
        belief[ModeProfile::new(vec![Aggressive, Aggressive]).index()] = 1.0;
        let s = scenario(belief, SpaceVariant::Full, 1.0, 0.0, 1);
        let policy = solve(&s).unwrap();
        assert!((policy.initial_value() - 0.5).abs() < 1e-15);
        assert_eq!(policy.steps[0][0].prescription.p_ag, 0.5);
    }

    #[test]
    fn prescription_lookup_after_reveal() {
        let s = scenario(b1(), SpaceVariant::Constrained, 1.0, 0.0, 10);
        let policy = solve(&s).unwrap();
        let b2 = point(Designer, Aggressive);
        let b3 = point(Designer, Passive);
        assert_eq!(policy.prescription_at(2, &b2).unwrap().p_de, 0.0);
        assert_eq!(policy.prescription_at(2, &b3).unwrap().p_de, 1.0);
        let err = policy.prescription_at(1, &b3).unwrap_err();
        assert!(matches!(err, Error::UnreachableBelief { time: 1, .. }));
    }

    #[test]
    fn values_respect_remaining_horizon_bounds() {
        let s = scenario(
            vec![0.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0, 0.0, 0.0, 0.0, 0.0],
            SpaceVariant::Constrained,
            1.0,
            0.0,
            10,
        );
        let policy = solve(&s).unwrap();
        for (ti, entries) in policy.steps.iter().enumerate() {
            let remaining = (10 - ti) as f64;
            for entry in entries {
                assert!(entry.value >= -1e-12 && entry.value <= remaining + 1e-12);
            }
        }
    }

    #[test]
    fn value_is_monotone_in_horizon() {
        for horizon in 1..6 {
            let short = scenario(b1(), SpaceVariant::Constrained, 0.9, 0.1, horizon);
            let long = scenario(b1(), SpaceVariant::Constrained, 0.9, 0.1, horizon + 1);
            let v_short = solve(&short).unwrap().initial_value();
            let v_long = solve(&long).unwrap().initial_value();
            assert!(v_short <= v_long + 1e-12);
        }
    }

    #[test]
    fn recorded_and_probing_backward_passes_agree() {
        // A non-degenerate instance exercises both code paths; the values
        // and argmins must match bit for bit.
        let s = scenario(
            vec![0.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0, 0.0, 0.0, 0.0, 0.0],
            SpaceVariant::Constrained,
            0.9,
            0.1,
            5,
        );
        let space = PrescriptionSpace::for_scenario(&s);
        let gammas = space.enumerate();
        let kernel = Kernel::restricted(2, &s.initial_belief);
        let tables: Vec<Vec<f64>> = gammas.iter().map(|g| kernel.likelihood_table(g)).collect();
        let forward = forward_pass(&s, &kernel, &tables, true).unwrap();
        for t in 1..s.horizon {
            let level = &forward.levels[t - 1];
            let next_level = &forward.levels[t];
            let fake_values: Vec<f64> = (0..next_level.len()).map(|i| (i % 7) as f64).collect();
            let tr = forward.transitions[t - 1].as_ref().unwrap();
            for (node, belief) in level.beliefs.iter().enumerate() {
                let a = recorded_min(belief, node, &kernel, &tables, &fake_values, tr);
                let b = probing_min(belief, &kernel, &tables, &fake_values, next_level, 9).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn policy_round_trips_through_json() {
        let s = scenario(b1(), SpaceVariant::Constrained, 1.0, 0.0, 5);
        let policy = solve(&s).unwrap();
        let restored = SolvedPolicy::from_json(&policy.to_json()).unwrap();
        assert_eq!(restored.fingerprint, policy.fingerprint);
        assert_eq!(restored.horizon, policy.horizon);
        for (a, b) in policy.steps.iter().flatten().zip(restored.steps.iter().flatten()) {
            assert_eq!(a.value, b.value);
            assert_eq!(a.belief.probs(), b.belief.probs());
            assert_eq!(a.prescription, b.prescription);
        }
        // Lookups work after the round trip.
        let b2 = point(Designer, Aggressive);
        assert_eq!(restored.prescription_at(2, &b2).unwrap().p_de, 0.0);
    }
}
