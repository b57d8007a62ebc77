//! Deterministic 2D tool-placement environment.
//!
//! Actions are "tools": line segments with latent angle, length, restitution,
//! and tangential friction. A launcher ball bounces vertically in place until
//! a placed tool redirects it; the episode goal is to knock a resting target
//! ball into a goal region. Latent tool parameters are observable only
//! through physics: agents see kinematic probe trajectories
//! ([`ActionObservation`]), never the parameters themselves.

mod dataset;
mod env;
mod obs;
mod physics;

pub use dataset::{load_dataset, save_dataset, DatasetManifest, ObservationDataset, FORMAT_VERSION};
pub use env::{agent_obs_dim, EnvAction, EnvState, PlacementEnv, StepOutcome};
pub use obs::{generate_observations, probe_initial_condition};
pub use physics::{physics_step, Ball, Segment};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::EnvConfig;
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Latent description of one discrete action. Never exposed through any
/// agent-facing interface; only the dataset generator and debug dumps may
/// serialize it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub tool_id: usize,
    /// Segment orientation in radians, within `[0, pi)`.
    pub angle: f64,
    /// Segment length in arena units, within `[0.05, 0.3]`.
    pub length: f64,
    /// Normal-velocity scale on contact, within `(0, 1]`.
    pub restitution: f64,
    /// Tangential-velocity loss on contact, within `[0, 1]`.
    pub tangential_friction: f64,
}

/// One probe trajectory characterizing an action's intrinsic behavior.
/// States are stored as `f32` to match the on-disk dataset format exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionObservation {
    /// H records of (x, y, vx, vy).
    pub states: Vec<[f32; 4]>,
    pub initial_condition_id: usize,
}

impl ActionObservation {
    /// Flattened `H*4` vector promoted to f64 for model input.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.states.len() * 4);
        for s in &self.states {
            out.extend(s.iter().map(|&v| v as f64));
        }
        out
    }
}

/// Draw `num_actions` tools with latent parameters from documented uniform
/// ranges: angle U[0, pi), length U[0.05, 0.3], restitution U(0.2, 1.0],
/// tangential friction U[0, 0.5]. Ids are assigned 0..num_actions.
pub fn sample_action_universe(num_actions: usize, universe_seed: u64) -> Result<Vec<ToolSpec>> {
    if num_actions < 2 {
        return Err(Error::invalid(format!(
            "num_actions must be >= 2, got {num_actions}"
        )));
    }
    let mut rng = rng_for(universe_seed, "action-universe");
    let mut out = Vec::with_capacity(num_actions);
    for tool_id in 0..num_actions {
        out.push(ToolSpec {
            tool_id,
            angle: rng.gen_range(0.0..std::f64::consts::PI),
            length: rng.gen_range(0.05..=0.3),
            restitution: rng.gen_range(0.2..=1.0),
            tangential_friction: rng.gen_range(0.0..=0.5),
        });
    }
    Ok(out)
}

/// Discounted return of a reward sequence: sum over t of gamma^t * r_t.
/// Kept as the single shared implementation so reports and their oracles can
/// be compared for exact equality.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut total = 0.0;
    for (t, &r) in rewards.iter().enumerate() {
        total += gamma.powi(t as i32) * r;
    }
    total
}

/// Convenience bundle tying a tool universe to the config that generated it.
#[derive(Debug, Clone)]
pub struct ActionUniverse {
    pub tools: Vec<ToolSpec>,
}

impl ActionUniverse {
    pub fn sample(cfg: &EnvConfig, universe_seed: u64) -> Result<Self> {
        Ok(ActionUniverse {
            tools: sample_action_universe(cfg.num_actions, universe_seed)?,
        })
    }

    pub fn tool(&self, id: usize) -> &ToolSpec {
        &self.tools[id]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn universe_is_deterministic_under_fixed_seed() {
        let a = sample_action_universe(16, 7).unwrap();
        let b = sample_action_universe(16, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_action_universe(16, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn universe_assigns_sequential_ids() {
        let tools = sample_action_universe(2, 0).unwrap();
        assert_eq!(tools[0].tool_id, 0);
        assert_eq!(tools[1].tool_id, 1);
    }

    #[test]
    fn universe_respects_latent_ranges() {
        let tools = sample_action_universe(32, 1).unwrap();
        for t in &tools {
            assert!(t.angle >= 0.0 && t.angle < std::f64::consts::PI);
            assert!(t.length >= 0.05 && t.length <= 0.3);
            assert!(t.restitution > 0.0 && t.restitution <= 1.0);
            assert!(t.tangential_friction >= 0.0 && t.tangential_friction <= 1.0);
        }
    }

    #[test]
    fn universe_rejects_tiny_counts() {
        assert!(matches!(
            sample_action_universe(1, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn discounted_return_matches_hand_value() {
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 0.5), 1.75);
    }
}
