//! Expected-cost evaluation of policies: exact by enumeration of every
//! positive-probability history, and statistical by seeded Monte-Carlo
//! simulation of decentralized execution.

use rayon::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::model::{stage_cost, JointAction, ModeProfile, Scenario};
use crate::policies::{OptimalPolicy, Policy, ThresholdPolicy};
use crate::solver::solve;

/// How an expected cost was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMethod {
    Exact,
    MonteCarlo,
}

impl std::fmt::Display for EvalMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalMethod::Exact => f.write_str("exact"),
            EvalMethod::MonteCarlo => f.write_str("monte-carlo"),
        }
    }
}

/// One evaluated (policy, initial belief) pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostReport {
    pub policy: String,
    pub belief_id: String,
    pub method: EvalMethod,
    pub expected_cost: f64,
    /// Monte-Carlo only.
    pub episodes: Option<u64>,
    /// Monte-Carlo only: standard error of the mean.
    pub stderr: Option<f64>,
    /// Monte-Carlo only: master seed.
    pub seed: Option<u64>,
}

/// Cap on history branches visited by exact evaluation. Branching is at most
/// 4^T per profile for two agents, so the default covers every desk-scale
/// instance while still catching runaway scenarios.
pub const DEFAULT_MAX_BRANCHES: u64 = 10_000_000;

/// Exact expected cumulative cost of `policy` on `scenario`: an outer sum
/// over mode profiles weighted by the initial belief, and a depth-first
/// recursion over joint-action histories that only extends branches with
/// positive probability.
pub fn exact_cost<P: Policy + ?Sized>(policy: &P, scenario: &Scenario) -> Result<f64> {
    exact_cost_with(policy, scenario, DEFAULT_MAX_BRANCHES)
}

pub fn exact_cost_with<P: Policy + ?Sized>(
    policy: &P,
    scenario: &Scenario,
    max_branches: u64,
) -> Result<f64> {
    Ok(exact_cost_detailed(policy, scenario, max_branches)?.expected_cost)
}

/// Exact evaluation with per-profile accounting, used by tests to check
/// that the enumerated history probabilities of each profile sum to one.
pub struct ExactBreakdown {
    pub expected_cost: f64,
    /// (profile index, conditional expected cost, total history probability).
    pub per_profile: Vec<(usize, f64, f64)>,
}

pub fn exact_cost_detailed<P: Policy + ?Sized>(
    policy: &P,
    scenario: &Scenario,
    max_branches: u64,
) -> Result<ExactBreakdown> {
    scenario.validate()?;
    let n = scenario.agents;
    let mut per_profile = Vec::new();
    let mut total = 0.0;
    let mut branches = 0u64;
    for (index, &mass) in scenario.initial_belief.probs().iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let profile = ModeProfile::from_index(index, n)?;
        let (cost, reached) = history_recursion(
            policy,
            scenario,
            &profile,
            1,
            &scenario.initial_belief,
            &mut branches,
            max_branches,
        )?;
        per_profile.push((index, cost, reached));
        total += mass * cost;
    }
    Ok(ExactBreakdown {
        expected_cost: total,
        per_profile,
    })
}

/// Returns (expected remaining cost, total probability of the enumerated
/// sub-histories) for the given true profile.
fn history_recursion<P: Policy + ?Sized>(
    policy: &P,
    scenario: &Scenario,
    profile: &ModeProfile,
    t: usize,
    belief: &Belief,
    branches: &mut u64,
    max_branches: u64,
) -> Result<(f64, f64)> {
    if t > scenario.horizon {
        return Ok((0.0, 1.0));
    }
    *branches += 1;
    if *branches > max_branches {
        return Err(Error::HistoryExplosion { cap: max_branches });
    }
    let n = scenario.agents;
    let gammas = policy.slot_prescriptions(t, belief)?;
    let mut expected = 0.0;
    let mut mass = 0.0;
    for bits in 0..1usize << n {
        let mut prob = 1.0;
        for agent in 0..n {
            let transmit = bits >> (n - 1 - agent) & 1 == 1;
            prob *= gammas[agent].action_prob(profile.mode(agent), transmit);
        }
        if prob == 0.0 {
            continue;
        }
        let action = JointAction::from_bits(bits, n);
        let slot_cost = f64::from(stage_cost(profile, &action)?);
        let next_belief = belief.update_per_agent(&gammas, &action)?;
        let (rest, sub_mass) = history_recursion(
            policy,
            scenario,
            profile,
            t + 1,
            &next_belief,
            branches,
            max_branches,
        )?;
        expected += prob * (slot_cost + rest);
        mass += prob * sub_mass;
    }
    Ok((expected, mass))
}

/// Per-agent uniform draws K in (0,1], one per agent per slot. An agent
/// transmits when K is at most its behavioral probability, so probability 0
/// never transmits and probability 1 always does.
#[derive(Clone, Debug)]
pub struct SlotRandoms {
    agents: usize,
    values: Vec<f64>,
}

impl SlotRandoms {
    /// `values` is slot-major: the draw for agent `i` in slot `t` sits at
    /// `(t - 1) * agents + i`.
    pub fn new(values: Vec<f64>, agents: usize, horizon: usize) -> Result<SlotRandoms> {
        if values.len() != agents * horizon {
            return Err(Error::InvalidInput(format!(
                "expected {} randoms ({} agents x {} slots), got {}",
                agents * horizon,
                agents,
                horizon,
                values.len()
            )));
        }
        if values.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
            return Err(Error::InvalidInput(
                "slot randoms must lie in the half-open interval (0,1]".into(),
            ));
        }
        Ok(SlotRandoms { agents, values })
    }

    pub fn sample<R: Rng>(rng: &mut R, agents: usize, horizon: usize) -> SlotRandoms {
        let values = (0..agents * horizon)
            .map(|_| 1.0 - rng.gen::<f64>())
            .collect();
        SlotRandoms { agents, values }
    }

    fn get(&self, t: usize, agent: usize) -> f64 {
        self.values[(t - 1) * self.agents + agent]
    }
}

/// One slot of a simulated episode.
#[derive(Clone, Debug)]
pub struct SlotOutcome {
    pub action: JointAction,
    pub cost: u8,
    /// Shared belief after every agent observed the slot.
    pub belief_after: Belief,
}

/// A full simulated episode of decentralized execution.
#[derive(Clone, Debug)]
pub struct EpisodeTrace {
    pub profile: ModeProfile,
    pub slots: Vec<SlotOutcome>,
}

impl EpisodeTrace {
    pub fn total_cost(&self) -> f64 {
        self.slots.iter().map(|s| f64::from(s.cost)).sum()
    }
}

/// Simulates one episode: each agent maps its own mode through the policy's
/// prescription, randomizes with its private uniform, and then every agent
/// applies the identical belief update to the observed joint action.
pub fn simulate_episode<P: Policy + ?Sized>(
    policy: &P,
    scenario: &Scenario,
    profile: &ModeProfile,
    randoms: &SlotRandoms,
) -> Result<EpisodeTrace> {
    scenario.validate()?;
    let n = scenario.agents;
    if profile.agents() != n {
        return Err(Error::InvalidInput(format!(
            "profile has {} agents, scenario {}",
            profile.agents(),
            n
        )));
    }
    if scenario.initial_belief.prob(profile.index()) == 0.0 {
        return Err(Error::ImpossibleObservation(format!(
            "true profile {profile} has zero probability under the initial belief"
        )));
    }
    let mut belief = scenario.initial_belief.clone();
    let mut slots = Vec::with_capacity(scenario.horizon);
    for t in 1..=scenario.horizon {
        let gammas = policy.slot_prescriptions(t, &belief)?;
        let transmit: Vec<bool> = (0..n)
            .map(|agent| {
                let p = gammas[agent].action_prob(profile.mode(agent), true);
                randoms.get(t, agent) <= p
            })
            .collect();
        let action = JointAction::new(transmit);
        let cost = stage_cost(profile, &action)?;
        belief = belief.update_per_agent(&gammas, &action)?;
        slots.push(SlotOutcome {
            action,
            cost,
            belief_after: belief.clone(),
        });
    }
    Ok(EpisodeTrace {
        profile: profile.clone(),
        slots,
    })
}

/// Fixed integer mix (splitmix64) deriving one episode's RNG seed from the
/// master seed and episode index. Documented so reruns and parallel
/// schedules partition episodes identically.
pub fn episode_seed(master_seed: u64, episode: u64) -> u64 {
    let mut z = master_seed ^ episode.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Monte-Carlo estimate of the expected cumulative cost. Bit-reproducible
/// for a fixed master seed and episode count: each episode draws its true
/// profile and its uniforms from a ChaCha stream seeded by
/// [`episode_seed`], and the mean/standard-error reduction runs in episode
/// order.
pub fn monte_carlo_cost<P: Policy + Sync + ?Sized>(
    policy: &P,
    scenario: &Scenario,
    belief_id: &str,
    episodes: u64,
    master_seed: u64,
) -> Result<CostReport> {
    if episodes < 1 {
        return Err(Error::InvalidInput("episodes must be at least 1".into()));
    }
    scenario.validate()?;
    let costs: Result<Vec<f64>> = (0..episodes)
        .into_par_iter()
        .map(|episode| {
            let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(master_seed, episode));
            let profile = sample_profile(&scenario.initial_belief, rng.gen::<f64>())?;
            let randoms = SlotRandoms::sample(&mut rng, scenario.agents, scenario.horizon);
            Ok(simulate_episode(policy, scenario, &profile, &randoms)?.total_cost())
        })
        .collect();
    let costs = costs?;
    let count = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / count;
    let stderr = if costs.len() < 2 {
        0.0
    } else {
        let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (count - 1.0);
        (var / count).sqrt()
    };
    Ok(CostReport {
        policy: policy.label(),
        belief_id: belief_id.into(),
        method: EvalMethod::MonteCarlo,
        expected_cost: mean,
        episodes: Some(episodes),
        stderr: Some(stderr),
        seed: Some(master_seed),
    })
}

fn sample_profile(belief: &Belief, draw: f64) -> Result<ModeProfile> {
    let n = belief.agents();
    let mut cumulative = 0.0;
    let mut last_positive = None;
    for (index, &p) in belief.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        cumulative += p;
        last_positive = Some(index);
        if draw < cumulative {
            return ModeProfile::from_index(index, n);
        }
    }
    // Rounding left the draw above the accumulated mass.
    let index = last_positive
        .ok_or_else(|| Error::InvalidInput("initial belief has no support".into()))?;
    ModeProfile::from_index(index, n)
}

/// One row of a comparison run; failures are recorded per row so the rest
/// of the table still comes out.
#[derive(Debug)]
pub struct CompareRow {
    pub belief_id: String,
    pub policy: String,
    pub outcome: Result<CostReport>,
}

/// Exact Table-style comparison: for each scenario, the solved policy first
/// (when requested) and then every baseline in scenario order.
pub fn compare(scenarios: &[Scenario], include_optimal: bool) -> Vec<CompareRow> {
    let mut rows = Vec::new();
    for (i, scenario) in scenarios.iter().enumerate() {
        let belief_id = format!("b{}", i + 1);
        if include_optimal {
            let outcome = solve(scenario).and_then(|solved| {
                let policy = OptimalPolicy::new(&solved);
                let cost = exact_cost(&policy, scenario)?;
                Ok(CostReport {
                    policy: policy.label(),
                    belief_id: belief_id.clone(),
                    method: EvalMethod::Exact,
                    expected_cost: cost,
                    episodes: None,
                    stderr: None,
                    seed: None,
                })
            });
            rows.push(CompareRow {
                belief_id: belief_id.clone(),
                policy: "proposed".into(),
                outcome,
            });
        }
        for params in &scenario.baselines {
            let outcome = ThresholdPolicy::new(*params, scenario).and_then(|policy| {
                let cost = exact_cost(&policy, scenario)?;
                Ok(CostReport {
                    policy: policy.label(),
                    belief_id: belief_id.clone(),
                    method: EvalMethod::Exact,
                    expected_cost: cost,
                    episodes: None,
                    stderr: None,
                    seed: None,
                })
            });
            rows.push(CompareRow {
                belief_id: belief_id.clone(),
                policy: params.label(),
                outcome,
            });
        }
    }
    rows
}
