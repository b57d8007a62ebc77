//! Experiment configuration: every hyperparameter and seed needed to make a
//! run bit-reproducible.
//!
//! The resolved config is echoed into every artifact and hashed (SHA-256 of
//! the canonical JSON serialization); downstream stages refuse artifacts whose
//! hash disagrees with their own resolved config. Unknown keys are a hard
//! error everywhere.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::OptimizerKind;

/// Environment and dataset-generation parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Total number of actions (tools) in the universe.
    pub num_actions: usize,
    /// K: actions sampled into each episode's action set.
    pub actions_per_episode: usize,
    /// T: maximum episode length in env steps.
    pub horizon: usize,
    /// H: records per probe observation.
    pub obs_horizon: usize,
    /// n: observations generated per action for training datasets.
    pub obs_per_action: usize,
    /// Extra held-out observations per seen action (classifier sanity checks).
    pub holdout_obs_per_action: usize,
    /// Physics sub-steps per env step.
    pub substeps: usize,
    /// Integrator step size.
    pub dt: f64,
    /// Bonus added the first time the target ball moves.
    pub reward_target_hit: f64,
    /// Bonus added when the target enters the goal region.
    pub reward_goal_hit: f64,
    /// Per-step cost subtracted from the shaped reward.
    pub step_cost: f64,
    /// Adds a static obstacle segment to the arena.
    pub obstacle: bool,
    pub ball_radius: f64,
    pub goal_radius: f64,
    /// Floor-contact vertical speed below which a ball settles and rolls.
    pub ground_speed_threshold: f64,
    /// Speed above which the target counts as having moved.
    pub target_move_speed: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            num_actions: 32,
            actions_per_episode: 8,
            horizon: 15,
            obs_horizon: 20,
            obs_per_action: 5,
            holdout_obs_per_action: 3,
            substeps: 10,
            dt: 0.05,
            reward_target_hit: 1.0,
            reward_goal_hit: 5.0,
            step_cost: 0.01,
            obstacle: false,
            ball_radius: 0.02,
            goal_radius: 0.08,
            ground_speed_threshold: 0.6,
            target_move_speed: 1e-6,
        }
    }
}

/// Action-representation learning parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ReprConfig {
    /// d: action embedding size.
    pub embed_dim: usize,
    /// Width of the per-state coarse encoder layers.
    pub coarse_width: usize,
    /// Hidden width of the observation classifier.
    pub classifier_hidden: usize,
    /// Latent dimension of the per-observation variable z.
    pub latent_dim: usize,
    /// Hidden width of HVAE encoder/decoder/prior networks.
    pub hvae_hidden: usize,
    /// Pearson threshold controlling graph sparsity.
    pub epsilon: f64,
    /// Contrastive temperature.
    pub kappa: f64,
    /// K': negatives sampled per node.
    pub num_negatives: usize,
    pub lambda_ce: f64,
    pub lambda_cont: f64,
    pub epochs: usize,
    /// Actions per training batch.
    pub batch_actions: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    /// Drop same-action nodes from the negative pool (off = follow the
    /// written contrastive objective literally).
    pub exclude_same_action_negatives: bool,
    /// Elementwise floor applied to produced variances.
    pub variance_floor: f64,
    /// Monte-Carlo samples per reconstruction expectation.
    pub mc_samples: usize,
}

impl Default for ReprConfig {
    fn default() -> Self {
        ReprConfig {
            embed_dim: 128,
            coarse_width: 128,
            classifier_hidden: 128,
            latent_dim: 32,
            hvae_hidden: 128,
            epsilon: 0.95,
            kappa: 0.5,
            num_negatives: 5,
            lambda_ce: 1e-3,
            lambda_cont: 1e-1,
            epochs: 500,
            batch_actions: 32,
            lr: 1e-3,
            optimizer: OptimizerKind::RAdam,
            exclude_same_action_negatives: false,
            variance_floor: 1e-6,
            mc_samples: 1,
        }
    }
}

/// Policy learning parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    /// Hidden width of the state encoder.
    pub state_hidden: usize,
    /// Hidden width of the utility head.
    pub utility_hidden: usize,
    /// Beta(alpha, alpha) parameter of the mixup coefficient.
    pub alpha: f64,
    /// Entropy regularization coefficient.
    pub beta: f64,
    /// Discount factor.
    pub gamma: f64,
    pub clip_ratio: f64,
    pub gae_lambda: f64,
    pub value_coef: f64,
    /// Gradient passes per collected batch.
    pub update_epochs: usize,
    /// Transitions collected per update.
    pub batch_transitions: usize,
    /// Total environment steps of training.
    pub total_steps: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    /// Rollout workers (independent env instances; >1 trades determinism for speed).
    pub workers: usize,
    /// Mixup augmentation of the per-episode action set.
    pub use_augmentation: bool,
    /// Env steps between learning-curve probes (0 disables probes).
    pub probe_every: usize,
    /// Fixed probe episodes per split.
    pub probe_episodes: usize,
    /// Floor on the placement Gaussian standard deviation.
    pub placement_std_floor: f64,
    /// Normalize advantages per batch.
    pub advantage_norm: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            state_hidden: 64,
            utility_hidden: 64,
            alpha: 0.4,
            beta: 5e-3,
            gamma: 0.99,
            clip_ratio: 0.2,
            gae_lambda: 0.95,
            value_coef: 0.5,
            update_epochs: 4,
            batch_transitions: 1024,
            total_steps: 40_000,
            lr: 1e-3,
            optimizer: OptimizerKind::Adam,
            workers: 1,
            use_augmentation: true,
            probe_every: 10_000,
            probe_episodes: 200,
            placement_std_floor: 1e-3,
            advantage_norm: true,
        }
    }
}

/// Evaluation-protocol parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Episodes per evaluation run.
    pub episodes: usize,
    /// Independent evaluation runs (separate episode seed streams).
    pub runs: usize,
    /// Train/validation/test proportions; must sum to 1.
    pub proportions: [f64; 3],
    /// Action selection during evaluation: "sample" or "greedy".
    pub mode: EvalMode,
    /// Use mixup-augmented embeddings at evaluation time.
    pub eval_augmentation: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Sample,
    Greedy,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 200,
            runs: 3,
            proportions: [0.5, 0.25, 0.25],
            mode: EvalMode::Sample,
            eval_augmentation: false,
        }
    }
}

/// Base seeds; each consumer derives its own stream (see [`crate::rng`]).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SeedConfig {
    pub universe: u64,
    pub dataset: u64,
    pub split: u64,
    pub repr: u64,
    pub policy: u64,
    pub eval: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            universe: 7,
            dataset: 11,
            split: 13,
            repr: 17,
            policy: 19,
            eval: 23,
        }
    }
}

/// Full experiment configuration. The default profile is desk scale; §-scale
/// constants are available through [`ExperimentConfig::paper_profile`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub repr: ReprConfig,
    pub policy: PolicyConfig,
    pub eval: EvalConfig,
    pub seeds: SeedConfig,
}

impl ExperimentConfig {
    /// Desk profile: default scale with reduced network widths so a full
    /// train/eval cycle fits in seconds on one CPU core.
    pub fn desk_profile() -> Self {
        let mut c = ExperimentConfig::default();
        c.repr.embed_dim = 32;
        c.repr.coarse_width = 32;
        c.repr.classifier_hidden = 64;
        c.repr.latent_dim = 16;
        c.repr.hvae_hidden = 64;
        c.repr.epsilon = 0.5;
        c
    }

    /// Paper-scale profile mirroring the published training regimen. Not part
    /// of the desk acceptance runs.
    pub fn paper_profile() -> Self {
        let mut c = ExperimentConfig::default();
        c.env.num_actions = 128;
        c.env.actions_per_episode = 50;
        c.env.horizon = 30;
        c.repr.epochs = 10_000;
        c.policy.total_steps = 60_000_000;
        c.policy.batch_transitions = 3072;
        c
    }

    /// Parse from TOML, rejecting unknown keys.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("config parse error: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 hex digest of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.env.num_actions < 2 {
            return Err(Error::invalid("env.num_actions must be >= 2"));
        }
        if self.env.actions_per_episode < 1 {
            return Err(Error::invalid("env.actions_per_episode must be >= 1"));
        }
        if self.env.obs_per_action < 1 {
            return Err(Error::invalid("env.obs_per_action must be >= 1"));
        }
        let psum: f64 = self.eval.proportions.iter().sum();
        if (psum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "eval.proportions must sum to 1, got {psum}"
            )));
        }
        if self.repr.lambda_ce < 0.0 || self.repr.lambda_cont < 0.0 {
            return Err(Error::invalid("loss weights must be non-negative"));
        }
        if self.policy.gamma <= 0.0 || self.policy.gamma > 1.0 {
            return Err(Error::invalid("policy.gamma must lie in (0, 1]"));
        }
        if self.policy.beta < 0.0 {
            return Err(Error::invalid("policy.beta must be >= 0"));
        }
        if self.policy.workers < 1 {
            return Err(Error::invalid("policy.workers must be >= 1"));
        }
        Ok(())
    }

    /// Flattened `section.key = default` view of a config, used for CLI help
    /// and override parsing. Keys come from the serde serialization itself so
    /// the listing cannot drift from the schema.
    pub fn flat_keys(&self) -> Vec<(String, String)> {
        let v = serde_json::to_value(self).expect("config serializes");
        let mut out = Vec::new();
        if let serde_json::Value::Object(sections) = v {
            for (sec, body) in sections {
                if let serde_json::Value::Object(fields) = body {
                    for (key, val) in fields {
                        out.push((format!("{sec}.{key}"), val.to_string()));
                    }
                }
            }
        }
        out
    }

    /// Apply a `section.key=value` override (CLI flag or environment).
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let mut v = serde_json::to_value(&*self).expect("config serializes");
        let (sec, field) = key
            .split_once('.')
            .ok_or_else(|| Error::invalid(format!("override key `{key}` must be section.key")))?;
        let slot = v
            .get_mut(sec)
            .and_then(|s| s.get_mut(field))
            .ok_or_else(|| Error::invalid(format!("unknown config key `{key}`")))?;
        let parsed: serde_json::Value = serde_json::from_str(value)
            .or_else(|_| serde_json::from_str(&format!("\"{value}\"")))
            .map_err(|e| Error::invalid(format!("cannot parse value for `{key}`: {e}")))?;
        *slot = parsed;
        *self = serde_json::from_value(v)
            .map_err(|e| Error::invalid(format!("invalid value for `{key}`: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pins_published_constants() {
        let c = ExperimentConfig::default();
        assert_eq!(c.repr.embed_dim, 128);
        assert_eq!(c.repr.epsilon, 0.95);
        assert_eq!(c.repr.kappa, 0.5);
        assert_eq!(c.repr.num_negatives, 5);
        assert_eq!(c.repr.lambda_ce, 1e-3);
        assert_eq!(c.repr.lambda_cont, 1e-1);
        assert_eq!(c.policy.alpha, 0.4);
        assert_eq!(c.policy.beta, 5e-3);
        assert_eq!(c.eval.episodes, 200);
        assert_eq!(c.eval.proportions, [0.5, 0.25, 0.25]);
        assert_eq!(c.env.obs_per_action, 5);
        assert_eq!(c.repr.lr, 1e-3);
    }

    #[test]
    fn paper_profile_mirrors_published_regimen() {
        let c = ExperimentConfig::paper_profile();
        assert_eq!(c.env.actions_per_episode, 50);
        assert_eq!(c.env.horizon, 30);
        assert_eq!(c.repr.epochs, 10_000);
        assert_eq!(c.policy.total_steps, 60_000_000);
        assert_eq!(c.policy.batch_transitions, 3072);
    }

    #[test]
    fn toml_round_trip_and_unknown_key_rejection() {
        let c = ExperimentConfig::desk_profile();
        let text = c.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());

        let bad = format!("{text}\n[env]\nnot_a_key = 3\n");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn overrides_apply_and_reject_unknown() {
        let mut c = ExperimentConfig::default();
        c.apply_override("policy.total_steps", "5000").unwrap();
        assert_eq!(c.policy.total_steps, 5000);
        c.apply_override("eval.mode", "greedy").unwrap();
        assert_eq!(c.eval.mode, EvalMode::Greedy);
        assert!(c.apply_override("env.bogus", "1").is_err());
        assert!(c.apply_override("nosection", "1").is_err());
    }

    #[test]
    fn flat_keys_cover_every_section_field() {
        let keys = ExperimentConfig::default().flat_keys();
        let find = |k: &str| keys.iter().any(|(name, _)| name == k);
        assert!(find("env.num_actions"));
        assert!(find("repr.lambda_cont"));
        assert!(find("policy.total_steps"));
        assert!(find("eval.episodes"));
        assert!(find("seeds.universe"));
    }
}
