//! The coordinator's information state: a probability distribution over the
//! 3^n joint mode profiles, updated by Bayes rule after every observed slot.
//!
//! Beliefs are plain probability vectors in the profile-index layout of
//! [`crate::model::ModeProfile::index`]. Canonical keys round entries to a
//! configurable number of decimal digits so that beliefs reproduced through
//! different floating-point paths deduplicate to one stored state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JointAction, Mode, ModeProfile};
use crate::prescription::Prescription;

/// Tolerance on the total mass of a valid belief.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Distribution over mode profiles, indexed by profile index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief {
    probs: Vec<f64>,
}

/// Canonical form of a belief: entries rounded to a fixed number of decimal
/// digits. Equal keys identify beliefs that agree entrywise up to rounding.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeliefKey(Vec<i64>);

impl BeliefKey {
    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for BeliefKey {
    fn from(digits: Vec<i64>) -> BeliefKey {
        BeliefKey(digits)
    }
}

// Lets hash maps keyed by BeliefKey answer lookups from a scratch slice
// without allocating a key per probe.
impl std::borrow::Borrow<[i64]> for BeliefKey {
    fn borrow(&self) -> &[i64] {
        &self.0
    }
}

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Belief> {
        let belief = Belief { probs };
        belief.validate()?;
        Ok(belief)
    }

    /// Builds a belief without checking mass; used where the entries are
    /// normalized by construction.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Belief {
        Belief { probs }
    }

    /// Point mass on one profile.
    pub fn point_mass(profile: &ModeProfile) -> Belief {
        let mut probs = vec![0.0; ModeProfile::count(profile.agents())];
        probs[profile.index()] = 1.0;
        Belief { probs }
    }

    /// Uniform distribution over all profiles of `agents` sensors.
    pub fn uniform(agents: usize) -> Belief {
        let count = ModeProfile::count(agents);
        Belief {
            probs: vec![1.0 / count as f64; count],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let agents = agents_for_len(self.probs.len())?;
        debug_assert!(agents >= 1);
        if let Some(bad) = self.probs.iter().find(|&&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
            return Err(Error::InvalidInput(format!(
                "belief entry {bad} outside [0,1]"
            )));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "belief mass {sum} deviates from 1 by more than {MASS_TOLERANCE}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Number of agents implied by the vector length.
    pub fn agents(&self) -> usize {
        agents_for_len(self.probs.len()).expect("belief length is a power of 3")
    }

    pub fn prob(&self, profile_index: usize) -> f64 {
        self.probs[profile_index]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Bayes update after observing `action` under prescription `gamma`
    /// applied by every agent: posterior(m) is proportional to
    /// prior(m) * prod_i gamma(m_i; u_i).
    pub fn update(&self, gamma: &Prescription, action: &JointAction) -> Result<Belief> {
        let n = self.agents();
        if action.agents() != n {
            return Err(Error::InvalidInput(format!(
                "action has {} agents, belief implies {n}",
                action.agents()
            )));
        }
        let mut weights = vec![0.0; self.probs.len()];
        posterior_weights(&self.probs, n, action.bits(), |_, mode, transmit| {
            gamma.action_prob(mode, transmit)
        }, &mut weights);
        normalize(weights, action)
    }

    /// As [`Belief::update`] but with one prescription per agent. Used by
    /// baselines whose Designer behavior depends on which agent holds it.
    pub fn update_per_agent(
        &self,
        gammas: &[Prescription],
        action: &JointAction,
    ) -> Result<Belief> {
        let n = self.agents();
        if gammas.len() != n || action.agents() != n {
            return Err(Error::InvalidInput(format!(
                "expected {n} prescriptions and {n} action bits, got {} and {}",
                gammas.len(),
                action.agents()
            )));
        }
        let mut weights = vec![0.0; self.probs.len()];
        posterior_weights(&self.probs, n, action.bits(), |agent, mode, transmit| {
            gammas[agent].action_prob(mode, transmit)
        }, &mut weights);
        normalize(weights, action)
    }

    /// Marginal mode distribution of one agent, in (De, Ag, Pa) order.
    pub fn marginal(&self, agent: usize) -> Result<[f64; 3]> {
        let n = self.agents();
        if agent >= n {
            return Err(Error::InvalidInput(format!(
                "agent index {agent} out of range for {n} agents"
            )));
        }
        let mut out = [0.0; 3];
        for (index, p) in self.probs.iter().enumerate() {
            out[mode_index_of(index, agent, n)] += p;
        }
        Ok(out)
    }

    /// Distribution over the other agents' profiles given that `agent` is in
    /// `mode`. The returned belief is indexed over the remaining agents in
    /// their original order.
    pub fn conditional_on_own_mode(&self, agent: usize, mode: Mode) -> Result<Belief> {
        let n = self.agents();
        if agent >= n {
            return Err(Error::InvalidInput(format!(
                "agent index {agent} out of range for {n} agents"
            )));
        }
        let rest = ModeProfile::count(n - 1);
        let mut weights = vec![0.0; rest];
        let mut mass = 0.0;
        for (others, weight) in weights.iter_mut().enumerate() {
            let full = insert_mode(others, agent, mode.index(), n);
            *weight = self.probs[full];
            mass += *weight;
        }
        if mass == 0.0 {
            return Err(Error::ImpossibleObservation(format!(
                "agent {} has zero probability of mode {}",
                agent + 1,
                mode
            )));
        }
        for w in &mut weights {
            *w /= mass;
        }
        Ok(Belief { probs: weights })
    }

    /// Canonical key with entries rounded to `digits` decimal digits.
    pub fn canonical_key(&self, digits: u32) -> BeliefKey {
        let scale = 10f64.powi(digits as i32);
        BeliefKey(
            self.probs
                .iter()
                .map(|p| (p * scale).round() as i64)
                .collect(),
        )
    }

    /// 3x3 matrix view for two-agent beliefs: rows are agent 1's mode.
    pub fn to_matrix3(&self) -> Option<[[f64; 3]; 3]> {
        if self.probs.len() != 9 {
            return None;
        }
        let mut m = [[0.0; 3]; 3];
        for row in 0..3 {
            for col in 0..3 {
                m[row][col] = self.probs[row * 3 + col];
            }
        }
        Some(m)
    }
}

/// Mode index of `agent` inside the base-3 profile `index` for `n` agents.
#[inline]
pub(crate) fn mode_index_of(index: usize, agent: usize, n: usize) -> usize {
    index / 3usize.pow((n - 1 - agent) as u32) % 3
}

/// Inserts a mode digit for `agent` into a profile index over the other
/// `n - 1` agents, producing a full profile index.
fn insert_mode(others: usize, agent: usize, mode: usize, n: usize) -> usize {
    let tail = 3usize.pow((n - 1 - agent) as u32);
    let high = others / tail;
    let low = others % tail;
    (high * 3 + mode) * tail + low
}

/// Likelihood of joint action `action_bits` for the profile `index`: the
/// per-agent action probabilities accumulated in agent order. Every caller
/// that must agree bit-for-bit with [`Belief::update`] (the solver in
/// particular) uses this exact accumulation.
#[inline]
pub(crate) fn likelihood_factor(
    index: usize,
    n: usize,
    action_bits: usize,
    action_prob: &impl Fn(usize, Mode, bool) -> f64,
) -> f64 {
    let mut factor = 1.0;
    for agent in 0..n {
        let mode = Mode::ALL[mode_index_of(index, agent, n)];
        let transmit = action_bits >> (n - 1 - agent) & 1 == 1;
        factor *= action_prob(agent, mode, transmit);
    }
    factor
}

/// Shared posterior kernel: per-agent factors first, prior multiplied last.
#[inline]
pub(crate) fn posterior_weights(
    prior: &[f64],
    n: usize,
    action_bits: usize,
    action_prob: impl Fn(usize, Mode, bool) -> f64,
    out: &mut [f64],
) {
    for (index, weight) in out.iter_mut().enumerate() {
        *weight = prior[index] * likelihood_factor(index, n, action_bits, &action_prob);
    }
}

fn normalize(mut weights: Vec<f64>, action: &JointAction) -> Result<Belief> {
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::ImpossibleObservation(format!(
            "action {action} has zero probability under the current belief and prescription"
        )));
    }
    // Multiply by the reciprocal; the solver kernel normalizes the same way
    // so that posteriors agree bit for bit across both paths.
    let inv = 1.0 / total;
    for w in &mut weights {
        *w *= inv;
    }
    Ok(Belief { probs: weights })
}

fn agents_for_len(len: usize) -> Result<usize> {
    let mut n = 0;
    let mut size = 1;
    while size < len {
        size *= 3;
        n += 1;
    }
    if size == len && n >= 1 {
        Ok(n)
    } else {
        Err(Error::InvalidInput(format!(
            "belief length {len} is not a positive power of 3"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Mode::*;

    fn b(entries: &[f64]) -> Belief {
        Belief::new(entries.to_vec()).unwrap()
    }

    fn gamma(de: f64, ag: f64, pa: f64) -> Prescription {
        Prescription::new(de, ag, pa).unwrap()
    }

    const B1: [f64; 9] = [0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];

    #[test]
    fn update_reveals_aggressive_peer() {
        // Deterministic Ag/Pa behavior: the peer's action exposes its mode.
        let pi = b(&B1);
        let g = gamma(0.3, 1.0, 0.0);
        let up = pi.update(&g, &JointAction::new(vec![false, true])).unwrap();
        assert_eq!(up.probs(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let down = pi.update(&g, &JointAction::new(vec![false, false])).unwrap();
        assert_eq!(down.probs(), &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn update_keeps_point_mass() {
        let pi = Belief::point_mass(&ModeProfile::new(vec![Designer, Aggressive]));
        let g = gamma(0.5, 0.9, 0.1);
        for bits in 0..4 {
            let action = JointAction::from_bits(bits, 2);
            let post = pi.update(&g, &action).unwrap();
            assert_eq!(post.probs(), pi.probs());
        }
    }

    #[test]
    fn update_matches_brute_force_joint_table() {
        // Condition the full 9x4 joint distribution on the observed column.
        let pi = Belief::uniform(2);
        let g = gamma(0.5, 0.9, 0.1);
        let action = JointAction::new(vec![true, false]);
        let post = pi.update(&g, &action).unwrap();

        let mut joint = [0.0; 9];
        for m in 0..9 {
            let m1 = Mode::ALL[m / 3];
            let m2 = Mode::ALL[m % 3];
            joint[m] = pi.prob(m) * g.action_prob(m1, true) * g.action_prob(m2, false);
        }
        let mass: f64 = joint.iter().sum();
        for m in 0..9 {
            assert!((post.prob(m) - joint[m] / mass).abs() < 1e-12);
        }
    }

    #[test]
    fn update_rejects_impossible_observation() {
        let pi = b(&B1);
        // Nobody transmits with probability one under this prescription.
        let g = gamma(1.0, 1.0, 1.0);
        let err = pi
            .update(&g, &JointAction::new(vec![false, false]))
            .unwrap_err();
        assert!(matches!(err, Error::ImpossibleObservation(_)));
    }

    #[test]
    fn marginal_of_b1() {
        let pi = b(&B1);
        assert_eq!(pi.marginal(1).unwrap(), [0.0, 0.5, 0.5]);
        assert_eq!(pi.marginal(0).unwrap(), [1.0, 0.0, 0.0]);
        let uniform = Belief::uniform(2);
        for agent in 0..2 {
            for p in uniform.marginal(agent).unwrap() {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn conditional_on_designer_mode() {
        let pi = b(&B1);
        let cond = pi.conditional_on_own_mode(0, Designer).unwrap();
        assert_eq!(cond.probs(), &[0.0, 0.5, 0.5]);

        // Row 5 of the comparison table: (De,Ag) 1/6, (De,Pa) 1/6, (Pa,Ag) 2/3.
        let sixth = 1.0 / 6.0;
        let row5 = b(&[0.0, sixth, sixth, 0.0, 0.0, 0.0, 0.0, 2.0 / 3.0, 0.0]);
        let cond = row5.conditional_on_own_mode(0, Designer).unwrap();
        assert!((cond.prob(1) - 0.5).abs() < 1e-12);
        assert!((cond.prob(2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn conditional_on_zero_probability_mode_fails() {
        let pi = b(&B1);
        let err = pi.conditional_on_own_mode(1, Designer).unwrap_err();
        assert!(matches!(err, Error::ImpossibleObservation(_)));
    }

    #[test]
    fn conditional_point_mass() {
        let pi = Belief::point_mass(&ModeProfile::new(vec![Designer, Aggressive]));
        let cond = pi.conditional_on_own_mode(0, Designer).unwrap();
        assert_eq!(cond.probs(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn canonical_keys_collapse_rounding_noise() {
        let digits = 9;
        let a = b(&B1);
        let mut noisy = B1;
        noisy[1] += 1e-12;
        noisy[2] -= 1e-12;
        let c = Belief::from_normalized(noisy.to_vec());
        assert_eq!(a.canonical_key(digits), c.canonical_key(digits));

        let b2 = Belief::point_mass(&ModeProfile::new(vec![Designer, Aggressive]));
        let b3 = Belief::point_mass(&ModeProfile::new(vec![Designer, Passive]));
        assert_ne!(b2.canonical_key(digits), b3.canonical_key(digits));
        assert_ne!(a.canonical_key(digits), b3.canonical_key(digits));
    }

    #[test]
    fn matrix_view_matches_layout() {
        let m = b(&B1).to_matrix3().unwrap();
        assert_eq!(m[0], [0.0, 0.5, 0.5]);
        assert_eq!(m[1], [0.0; 3]);
    }

    #[test]
    fn rejects_negative_and_denormalized() {
        assert!(Belief::new(vec![0.5, 0.6, -0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(Belief::new(vec![0.3; 9]).is_err());
        assert!(Belief::new(vec![0.25; 4]).is_err());
    }
}
