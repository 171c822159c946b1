//! Channel model: sensor modes, joint actions, the per-slot team cost, and
//! the scenario container shared by the solver, policies, and evaluators.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::policies::ThresholdParams;

/// A sensor's private mode. The declaration order (Designer, Aggressive,
/// Passive) fixes all indexing: belief vectors, profile indices, and the
/// 3x3 matrix rendering all use it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Transmit probability chosen by the optimized strategy.
    Designer,
    /// Transmits with the scenario's `alpha`.
    Aggressive,
    /// Transmits with the scenario's `beta`.
    Passive,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Designer, Mode::Aggressive, Mode::Passive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Mode> {
        Mode::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("mode index {i} out of range")))
    }

    pub fn short(self) -> &'static str {
        match self {
            Mode::Designer => "De",
            Mode::Aggressive => "Ag",
            Mode::Passive => "Pa",
        }
    }

    /// Parses the two-letter form used on the command line (`De`, `Ag`, `Pa`).
    pub fn parse(s: &str) -> Result<Mode> {
        match s.trim() {
            "De" | "de" | "DE" => Ok(Mode::Designer),
            "Ag" | "ag" | "AG" => Ok(Mode::Aggressive),
            "Pa" | "pa" | "PA" => Ok(Mode::Passive),
            other => Err(Error::InvalidInput(format!(
                "unknown mode {other:?}; expected De, Ag, or Pa"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short())
    }
}

/// An assignment of one mode to each of the `n` sensors; the hidden joint
/// state the coordinator holds a belief over.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModeProfile {
    modes: Vec<Mode>,
}

impl ModeProfile {
    pub fn new(modes: Vec<Mode>) -> ModeProfile {
        ModeProfile { modes }
    }

    /// Number of mode profiles for `agents` sensors.
    pub fn count(agents: usize) -> usize {
        3usize.pow(agents as u32)
    }

    pub fn agents(&self) -> usize {
        self.modes.len()
    }

    pub fn mode(&self, agent: usize) -> Mode {
        self.modes[agent]
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Base-3 row-major index with agent 1 most significant, so for n=2 the
    /// 9-vector layout reads as a 3x3 matrix with rows = agent 1's mode.
    pub fn index(&self) -> usize {
        self.modes.iter().fold(0, |acc, m| acc * 3 + m.index())
    }

    /// Inverse of [`ModeProfile::index`].
    pub fn from_index(index: usize, agents: usize) -> Result<ModeProfile> {
        if agents == 0 || index >= ModeProfile::count(agents) {
            return Err(Error::InvalidInput(format!(
                "profile index {index} out of range for {agents} agents"
            )));
        }
        let mut modes = vec![Mode::Designer; agents];
        let mut rest = index;
        for slot in (0..agents).rev() {
            modes[slot] = Mode::from_index(rest % 3)?;
            rest /= 3;
        }
        Ok(ModeProfile { modes })
    }

    /// Parses a comma list such as `De,Ag`.
    pub fn parse(s: &str) -> Result<ModeProfile> {
        let modes = s
            .split(',')
            .map(Mode::parse)
            .collect::<Result<Vec<Mode>>>()?;
        if modes.is_empty() {
            return Err(Error::InvalidInput("empty mode profile".into()));
        }
        Ok(ModeProfile { modes })
    }
}

impl std::fmt::Display for ModeProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<&str> = self.modes.iter().map(|m| m.short()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// One slot's transmit/idle decisions, one bit per sensor (`true` = transmit).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JointAction {
    transmit: Vec<bool>,
}

impl JointAction {
    pub fn new(transmit: Vec<bool>) -> JointAction {
        JointAction { transmit }
    }

    /// Decodes a bitmask with agent 1 in the most significant bit, matching
    /// the profile-index convention.
    pub fn from_bits(bits: usize, agents: usize) -> JointAction {
        let transmit = (0..agents)
            .map(|i| bits >> (agents - 1 - i) & 1 == 1)
            .collect();
        JointAction { transmit }
    }

    pub fn bits(&self) -> usize {
        self.transmit
            .iter()
            .fold(0, |acc, &b| acc << 1 | usize::from(b))
    }

    pub fn agents(&self) -> usize {
        self.transmit.len()
    }

    pub fn transmits(&self, agent: usize) -> bool {
        self.transmit[agent]
    }

    pub fn exactly_one(&self) -> bool {
        self.transmit.iter().filter(|&&b| b).count() == 1
    }
}

impl std::fmt::Display for JointAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<&str> = self
            .transmit
            .iter()
            .map(|&b| if b { "1" } else { "0" })
            .collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Per-slot team cost: 0 when exactly one sensor transmits, 1 otherwise
/// (collision or idle slot). Independent of the modes and of the slot index.
pub fn stage_cost(profile: &ModeProfile, action: &JointAction) -> Result<u8> {
    if profile.agents() != action.agents() {
        return Err(Error::InvalidInput(format!(
            "profile has {} agents but action has {}",
            profile.agents(),
            action.agents()
        )));
    }
    Ok(u8::from(!action.exactly_one()))
}

/// Which prescription coordinates the solver is allowed to vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceVariant {
    /// Aggressive and Passive pinned to the scenario's `alpha`/`beta`; only
    /// the Designer probability ranges over the grid.
    Constrained,
    /// All three mode probabilities range over the grid.
    Full,
}

impl std::fmt::Display for SpaceVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpaceVariant::Constrained => f.write_str("constrained"),
            SpaceVariant::Full => f.write_str("full"),
        }
    }
}

pub const DEFAULT_DEDUP_ROUNDING: u32 = 9;
pub const DEFAULT_MAX_BELIEF_STATES: usize = 2_000_000;

/// A full problem instance. Parsed from a JSON scenario file; see
/// [`Scenario::from_json`] for the validation rules.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Number of sensors (2 to 4).
    pub agents: usize,
    /// Number of slots.
    pub horizon: usize,
    /// Aggressive-mode transmit probability.
    pub alpha: f64,
    /// Passive-mode transmit probability.
    pub beta: f64,
    /// Probability grid increment for enumerated prescriptions.
    pub grid_step: f64,
    /// Which prescription coordinates the solver varies.
    pub prescription_space: SpaceVariant,
    /// Belief over the 3^n mode profiles at the first slot.
    pub initial_belief: Belief,
    /// Threshold baselines to compare against, in report order.
    #[serde(default)]
    pub baselines: Vec<ThresholdParams>,
    /// Decimal digits kept when canonicalizing beliefs for deduplication.
    #[serde(default = "default_dedup_rounding")]
    pub dedup_rounding: u32,
    /// Hard cap on beliefs stored across all time steps of a solve.
    #[serde(default = "default_max_belief_states")]
    pub max_belief_states: usize,
}

fn default_dedup_rounding() -> u32 {
    DEFAULT_DEDUP_ROUNDING
}

fn default_max_belief_states() -> usize {
    DEFAULT_MAX_BELIEF_STATES
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let scenario: Scenario = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("scenario parse error: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidInput(format!("cannot read scenario {}: {e}", path.display()))
        })?;
        Scenario::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.agents) {
            return Err(Error::InvalidInput(format!(
                "agents must be between 2 and 4, got {}",
                self.agents
            )));
        }
        if self.horizon < 1 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        for (name, p) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in [0,1], got {p}"
                )));
            }
        }
        if self.beta > self.alpha {
            return Err(Error::InvalidInput(format!(
                "beta ({}) must not exceed alpha ({})",
                self.beta, self.alpha
            )));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "grid_step must lie in (0,1], got {}",
                self.grid_step
            )));
        }
        let steps = (1.0 / self.grid_step).round();
        if steps < 1.0 || (steps * self.grid_step - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "grid_step {} does not evenly divide 1",
                self.grid_step
            )));
        }
        if !(1..=15).contains(&self.dedup_rounding) {
            return Err(Error::InvalidInput(format!(
                "dedup_rounding must be between 1 and 15, got {}",
                self.dedup_rounding
            )));
        }
        if self.max_belief_states == 0 {
            return Err(Error::InvalidInput("max_belief_states must be positive".into()));
        }
        if self.initial_belief.len() != ModeProfile::count(self.agents) {
            return Err(Error::InvalidInput(format!(
                "initial_belief has {} entries, expected {} for {} agents",
                self.initial_belief.len(),
                ModeProfile::count(self.agents),
                self.agents
            )));
        }
        self.initial_belief.validate()?;
        Ok(())
    }

    /// Number of grid points, e.g. 21 for the default 0.05 step.
    pub fn grid_points(&self) -> usize {
        (1.0 / self.grid_step).round() as usize + 1
    }

    /// Content hash of the effective scenario, embedded in policy files so a
    /// policy solved offline is never executed against a different instance.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("scenario serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..16])
    }
}
