//! Executable policies: decentralized execution of a solved policy driven by
//! the shared belief, and the threshold baseline family.
//!
//! Every policy here exposes the per-slot transmit behavior of each agent as
//! a prescription (mode -> transmit probability). Agents sharing a mode and
//! the same common belief always get the same probability, which is the
//! symmetric-strategy guarantee.

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::model::{JointAction, Mode, Scenario};
use crate::prescription::Prescription;
use crate::solver::SolvedPolicy;

/// What one agent knows at the start of a slot: its own fixed mode plus the
/// belief every agent reconstructs from the shared action history.
#[derive(Clone, Debug)]
pub struct AgentState {
    /// Zero-based agent index; determines whose conditional the threshold
    /// rules evaluate.
    pub agent: usize,
    pub own_mode: Mode,
    pub common_belief: Belief,
    /// One-based slot index.
    pub time: usize,
}

/// A belief-feedback policy that can be executed and evaluated.
pub trait Policy {
    /// Report label, e.g. `proposed` or `policy-(0.8,1.1,1)`.
    fn label(&self) -> String;

    /// One prescription per agent for this slot. Symmetric policies return
    /// the same prescription for every agent; threshold baselines may give
    /// the Designer entry per agent because its rule conditions on which
    /// agent holds the mode.
    fn slot_prescriptions(&self, t: usize, belief: &Belief) -> Result<Vec<Prescription>>;
}

/// Executes a [`SolvedPolicy`] table with no re-optimization at run time.
pub struct OptimalPolicy<'a> {
    solved: &'a SolvedPolicy,
}

impl<'a> OptimalPolicy<'a> {
    pub fn new(solved: &'a SolvedPolicy) -> OptimalPolicy<'a> {
        OptimalPolicy { solved }
    }
}

impl Policy for OptimalPolicy<'_> {
    fn label(&self) -> String {
        "proposed".into()
    }

    fn slot_prescriptions(&self, t: usize, belief: &Belief) -> Result<Vec<Prescription>> {
        let gamma = *self.solved.prescription_at(t, belief)?;
        Ok(vec![gamma; self.solved.agents])
    }
}

/// Transmit probability an agent uses this slot under the solved policy.
pub fn optimal_act(policy: &SolvedPolicy, state: &AgentState) -> Result<f64> {
    let gamma = policy.prescription_at(state.time, &state.common_belief)?;
    Ok(gamma.action_prob(state.own_mode, true))
}

/// Shared-belief update every agent applies after observing the slot.
pub fn optimal_belief_step(
    policy: &SolvedPolicy,
    belief: &Belief,
    t: usize,
    observed: &JointAction,
) -> Result<Belief> {
    let gamma = policy.prescription_at(t, belief)?;
    belief.update(gamma, observed)
}

/// Parameters of one threshold baseline. Thresholds above 1 never trigger
/// (the comparison is strict), which is how always/never variants are
/// written, e.g. (1.1, 1.1, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdParams {
    /// Peer-aggressive probability above which the Designer stays silent.
    pub x: f64,
    /// Peer-passive probability above which the Designer transmits.
    pub y: f64,
    /// Fallback Designer transmit probability when neither rule triggers.
    pub z: f64,
}

impl ThresholdParams {
    pub fn new(x: f64, y: f64, z: f64) -> Result<ThresholdParams> {
        let params = ThresholdParams { x, y, z };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.z) {
            return Err(Error::InvalidInput(format!(
                "threshold fallback z={} outside [0,1]",
                self.z
            )));
        }
        if self.x < 0.0 || self.y < 0.0 {
            return Err(Error::InvalidInput(format!(
                "thresholds must be nonnegative, got x={} y={}",
                self.x, self.y
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("policy-({},{},{})", self.x, self.y, self.z)
    }
}

/// The (x, y, z) baseline: Aggressive and Passive agents keep their fixed
/// probabilities; a Designer looks at the peer's conditional mode
/// distribution and stays silent past `x`, transmits past `y`, and otherwise
/// transmits with probability `z`. Defined for two agents only.
#[derive(Clone, Debug)]
pub struct ThresholdPolicy {
    pub params: ThresholdParams,
    alpha: f64,
    beta: f64,
}

impl ThresholdPolicy {
    pub fn new(params: ThresholdParams, scenario: &Scenario) -> Result<ThresholdPolicy> {
        if scenario.agents != 2 {
            return Err(Error::Unsupported(format!(
                "threshold baselines are defined for 2 agents, scenario has {}",
                scenario.agents
            )));
        }
        params.validate()?;
        Ok(ThresholdPolicy {
            params,
            alpha: scenario.alpha,
            beta: scenario.beta,
        })
    }

    /// Transmit probability for one agent this slot.
    pub fn act(&self, state: &AgentState) -> Result<f64> {
        match state.own_mode {
            Mode::Aggressive => Ok(self.alpha),
            Mode::Passive => Ok(self.beta),
            Mode::Designer => self.designer_prob(state.agent, &state.common_belief),
        }
    }

    /// Shared-belief update under the prescription this baseline induces.
    pub fn belief_step(&self, belief: &Belief, observed: &JointAction) -> Result<Belief> {
        let gammas = self.slot_prescriptions(1, belief)?;
        belief.update_per_agent(&gammas, observed)
    }

    fn designer_prob(&self, agent: usize, belief: &Belief) -> Result<f64> {
        let peer = belief.conditional_on_own_mode(agent, Mode::Designer)?;
        let q_aggressive = peer.prob(Mode::Aggressive.index());
        let q_passive = peer.prob(Mode::Passive.index());
        // Strict comparisons; the silence rule is checked first.
        Ok(if q_aggressive > self.params.x {
            0.0
        } else if q_passive > self.params.y {
            1.0
        } else {
            self.params.z
        })
    }
}

impl Policy for ThresholdPolicy {
    fn label(&self) -> String {
        self.params.label()
    }

    fn slot_prescriptions(&self, _t: usize, belief: &Belief) -> Result<Vec<Prescription>> {
        let mut out = Vec::with_capacity(2);
        for agent in 0..2 {
            // The Designer entry matters only for profiles where this agent
            // is in Designer mode; when that has no mass the conditional is
            // undefined and the fallback stands in.
            let de = if belief.marginal(agent)?[Mode::Designer.index()] > 0.0 {
                self.designer_prob(agent, belief)?
            } else {
                self.params.z
            };
            out.push(Prescription::new(de, self.alpha, self.beta)?);
        }
        Ok(out)
    }
}
