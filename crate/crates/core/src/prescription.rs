//! Prescriptions — maps from a sensor's mode to a transmit probability — and
//! enumeration of the quantized prescription space the solver searches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Mode, Scenario, SpaceVariant};

/// One transmit probability per mode. The same prescription is handed to
/// every sensor, which is what makes the resulting strategies symmetric; the
/// type deliberately has no agent index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prescription {
    #[serde(rename = "de")]
    pub p_de: f64,
    #[serde(rename = "ag")]
    pub p_ag: f64,
    #[serde(rename = "pa")]
    pub p_pa: f64,
}

impl Prescription {
    pub fn new(p_de: f64, p_ag: f64, p_pa: f64) -> Result<Prescription> {
        for (mode, p) in [("de", p_de), ("ag", p_ag), ("pa", p_pa)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!(
                    "prescription probability {mode}={p} outside [0,1]"
                )));
            }
        }
        Ok(Prescription { p_de, p_ag, p_pa })
    }

    /// Transmit probability for a mode.
    pub fn transmit_prob(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Designer => self.p_de,
            Mode::Aggressive => self.p_ag,
            Mode::Passive => self.p_pa,
        }
    }

    /// Probability this prescription assigns to `transmit` for `mode`.
    /// The transmit and idle probabilities sum to 1 exactly in f64.
    pub fn action_prob(&self, mode: Mode, transmit: bool) -> f64 {
        let p = self.transmit_prob(mode);
        if transmit {
            p
        } else {
            1.0 - p
        }
    }
}

impl std::fmt::Display for Prescription {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{De->{}, Ag->{}, Pa->{}}}", self.p_de, self.p_ag, self.p_pa)
    }
}

/// The quantized set of prescriptions the solver minimizes over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrescriptionSpace {
    pub variant: SpaceVariant,
    /// Sorted grid 0, step, 2*step, ..., 1.
    pub grid: Vec<f64>,
    /// Aggressive probability pinned by the constrained variant.
    pub alpha: f64,
    /// Passive probability pinned by the constrained variant.
    pub beta: f64,
}

impl PrescriptionSpace {
    pub fn new(variant: SpaceVariant, grid_step: f64, alpha: f64, beta: f64) -> PrescriptionSpace {
        let steps = (1.0 / grid_step).round() as usize;
        // k / steps keeps the endpoints and midpoint exact in f64.
        let grid = (0..=steps).map(|k| k as f64 / steps as f64).collect();
        PrescriptionSpace {
            variant,
            grid,
            alpha,
            beta,
        }
    }

    pub fn for_scenario(scenario: &Scenario) -> PrescriptionSpace {
        PrescriptionSpace::new(
            scenario.prescription_space,
            scenario.grid_step,
            scenario.alpha,
            scenario.beta,
        )
    }

    /// All prescriptions in deterministic order: ascending by
    /// (p_de, p_ag, p_pa). Solver tie-breaking relies on this order.
    pub fn enumerate(&self) -> Vec<Prescription> {
        match self.variant {
            SpaceVariant::Constrained => self
                .grid
                .iter()
                .map(|&d| Prescription {
                    p_de: d,
                    p_ag: self.alpha,
                    p_pa: self.beta,
                })
                .collect(),
            SpaceVariant::Full => {
                let mut out = Vec::with_capacity(self.grid.len().pow(3));
                for &d in &self.grid {
                    for &a in &self.grid {
                        for &p in &self.grid {
                            out.push(Prescription {
                                p_de: d,
                                p_ag: a,
                                p_pa: p,
                            });
                        }
                    }
                }
                out
            }
        }
    }

    pub fn len(&self) -> usize {
        match self.variant {
            SpaceVariant::Constrained => self.grid.len(),
            SpaceVariant::Full => self.grid.len().pow(3),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_probs_complement_exactly() {
        let space = PrescriptionSpace::new(SpaceVariant::Full, 0.05, 1.0, 0.0);
        for gamma in space.enumerate() {
            for mode in Mode::ALL {
                let sum = gamma.action_prob(mode, true) + gamma.action_prob(mode, false);
                assert_eq!(sum, 1.0, "non-exact complement for {gamma}");
            }
        }
    }

    #[test]
    fn constrained_enumeration_counts() {
        let space = PrescriptionSpace::new(SpaceVariant::Constrained, 0.05, 1.0, 0.0);
        let all = space.enumerate();
        assert_eq!(all.len(), 21);
        assert!(all.iter().all(|g| g.p_ag == 1.0 && g.p_pa == 0.0));

        let coarse = PrescriptionSpace::new(SpaceVariant::Constrained, 0.5, 0.9, 0.1);
        let got: Vec<f64> = coarse.enumerate().iter().map(|g| g.p_de).collect();
        assert_eq!(got, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn full_enumeration_is_cartesian_and_ordered() {
        let space = PrescriptionSpace::new(SpaceVariant::Full, 0.05, 1.0, 0.0);
        let all = space.enumerate();
        assert_eq!(all.len(), 9261);
        for pair in all.windows(2) {
            let key = |g: &Prescription| (g.p_de, g.p_ag, g.p_pa);
            assert!(key(&pair[0]) < key(&pair[1]), "enumeration not ascending");
        }
    }

    #[test]
    fn enumeration_is_deterministic() {
        let space = PrescriptionSpace::new(SpaceVariant::Full, 0.1, 0.8, 0.2);
        assert_eq!(space.enumerate(), space.enumerate());
    }

    #[test]
    fn constrained_is_subset_of_full_for_grid_alpha_beta() {
        let constrained = PrescriptionSpace::new(SpaceVariant::Constrained, 0.05, 1.0, 0.0);
        let full = PrescriptionSpace::new(SpaceVariant::Full, 0.05, 1.0, 0.0);
        let all = full.enumerate();
        for gamma in constrained.enumerate() {
            assert!(all.iter().any(|g| g == &gamma));
        }
    }

    #[test]
    fn grid_endpoints_and_midpoint_are_exact() {
        let space = PrescriptionSpace::new(SpaceVariant::Constrained, 0.05, 1.0, 0.0);
        assert_eq!(space.grid[0], 0.0);
        assert_eq!(space.grid[10], 0.5);
        assert_eq!(space.grid[20], 1.0);
    }

    #[test]
    fn rejects_out_of_range_probabilities() {
        assert!(Prescription::new(1.2, 0.5, 0.0).is_err());
        assert!(Prescription::new(0.5, -0.1, 0.0).is_err());
    }
}
