//! Experiment configuration: flat `key = value` text with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::algo::{TrainConfig, Variant};
use crate::envs::{ParticleWorldConfig, Scenario};
use crate::error::{config, Result};
use crate::nn::Activation;

/// Keys forwarded to [`ParticleWorldConfig`]. They are applied after the
/// scenario defaults, whatever their position in the file.
const WORLD_KEYS: [&str; 10] = [
    "world_halfwidth",
    "dt",
    "damping",
    "max_force",
    "landmark_count",
    "hazard_enabled",
    "hazard_radius",
    "p_fail",
    "comm_radius",
    "episode_length",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: Scenario,
    pub n_agents: usize,
    pub train: TrainConfig,
    pub master_seed: u64,
    pub trials: usize,
    pub output_dir: PathBuf,
    /// Iterations between periodic checkpoints; 0 keeps only the final one.
    pub checkpoint_interval: usize,
    /// Batches between learning-curve points.
    pub eval_interval: usize,
    world_overrides: BTreeMap<String, String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: Scenario::HazardousNav,
            n_agents: 3,
            train: TrainConfig::default(),
            master_seed: 0,
            trials: 4,
            output_dir: PathBuf::from("runs"),
            checkpoint_interval: 0,
            eval_interval: 1,
            world_overrides: BTreeMap::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_widths(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|w| parse(key, w.trim())).collect()
}

fn widths_string(w: &[usize]) -> String {
    w.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses the text format on top of the defaults.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config(format!("line {}: expected 'key = value'", no + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    /// Sets one field by key. Used for file entries and command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "env" => self.env = value.parse()?,
            "agents" | "n_agents" => self.n_agents = parse(key, value)?,
            "variant" => t.variant = value.parse::<Variant>()?,
            "seed" | "master_seed" => self.master_seed = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "out" | "output_dir" => self.output_dir = PathBuf::from(value),
            "checkpoint_interval" => self.checkpoint_interval = parse(key, value)?,
            "eval_interval" => self.eval_interval = parse(key, value)?,
            "gamma" => t.gamma = parse(key, value)?,
            "lambda" => t.lambda = parse(key, value)?,
            "clip_epsilon" => t.clip_epsilon = parse(key, value)?,
            "entropy_coef" => t.entropy_coef = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "minibatches" => t.minibatches = parse(key, value)?,
            "episodes_per_batch" => t.episodes_per_batch = parse(key, value)?,
            "episodes" | "total_episodes" => t.total_episodes = parse(key, value)?,
            "actor_lr" => t.actor_lr = parse(key, value)?,
            "critic_lr" => t.critic_lr = parse(key, value)?,
            "local_critic_lr" => t.local_critic_lr = parse(key, value)?,
            "normalize_advantages" => t.normalize_advantages = parse(key, value)?,
            "h_min" => t.h_min = parse(key, value)?,
            "policy_hidden" => t.policy_hidden = parse_widths(key, value)?,
            "policy_activation" => t.policy_activation = value.parse::<Activation>()?,
            "critic_hidden" => t.critic_hidden = parse_widths(key, value)?,
            "critic_activation" => t.critic_activation = value.parse::<Activation>()?,
            "local_critic_hidden" => t.local_critic_hidden = parse_widths(key, value)?,
            "local_critic_activation" => t.local_critic_activation = value.parse::<Activation>()?,
            k if WORLD_KEYS.contains(&k) => {
                // Reject malformed values now rather than at world construction.
                apply_world(&mut ParticleWorldConfig::for_scenario(Scenario::HazardousNav, 1), k, value)?;
                self.world_overrides.insert(k.to_string(), value.to_string());
            }
            _ => return Err(config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Scenario defaults with the world overrides applied.
    pub fn world(&self) -> Result<ParticleWorldConfig> {
        let mut w = ParticleWorldConfig::for_scenario(self.env, self.n_agents);
        for (k, v) in &self.world_overrides {
            apply_world(&mut w, k, v)?;
        }
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config("trials must be at least 1"));
        }
        if self.eval_interval == 0 {
            return Err(config("eval_interval must be at least 1"));
        }
        if !self.env.is_particle() {
            return Err(config(format!("'{}' cannot be trained on", self.env)));
        }
        self.train.validate()?;
        self.world()?.validate()
    }

    /// Seed of trial `k`.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.master_seed.wrapping_add(trial as u64)
    }

    /// Canonical text form; parsing it reproduces the configuration.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("env", self.env.to_string());
        put("agents", self.n_agents.to_string());
        put("variant", t.variant.to_string());
        put("seed", self.master_seed.to_string());
        put("trials", self.trials.to_string());
        put("out", self.output_dir.display().to_string());
        put("checkpoint_interval", self.checkpoint_interval.to_string());
        put("eval_interval", self.eval_interval.to_string());
        put("gamma", t.gamma.to_string());
        put("lambda", t.lambda.to_string());
        put("clip_epsilon", t.clip_epsilon.to_string());
        put("entropy_coef", t.entropy_coef.to_string());
        put("epochs", t.epochs.to_string());
        put("minibatches", t.minibatches.to_string());
        put("episodes_per_batch", t.episodes_per_batch.to_string());
        put("total_episodes", t.total_episodes.to_string());
        put("actor_lr", t.actor_lr.to_string());
        put("critic_lr", t.critic_lr.to_string());
        put("local_critic_lr", t.local_critic_lr.to_string());
        put("normalize_advantages", t.normalize_advantages.to_string());
        put("h_min", t.h_min.to_string());
        put("policy_hidden", widths_string(&t.policy_hidden));
        put("policy_activation", t.policy_activation.name().to_string());
        put("critic_hidden", widths_string(&t.critic_hidden));
        put("critic_activation", t.critic_activation.name().to_string());
        put("local_critic_hidden", widths_string(&t.local_critic_hidden));
        put("local_critic_activation", t.local_critic_activation.name().to_string());
        for (k, v) in &self.world_overrides {
            put(k, v.clone());
        }
        s
    }
}

fn apply_world(w: &mut ParticleWorldConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "world_halfwidth" => w.world_halfwidth = parse(key, value)?,
        "dt" => w.dt = parse(key, value)?,
        "damping" => w.damping = parse(key, value)?,
        "max_force" => w.max_force = parse(key, value)?,
        "landmark_count" => w.landmark_count = parse(key, value)?,
        "hazard_enabled" => w.hazard_enabled = parse(key, value)?,
        "hazard_radius" => w.hazard_radius = parse(key, value)?,
        "p_fail" => w.p_fail = parse(key, value)?,
        "comm_radius" => w.comm_radius = if value == "auto" { None } else { Some(parse(key, value)?) },
        "episode_length" => w.episode_length = parse(key, value)?,
        _ => return Err(config(format!("unknown world key '{key}'"))),
    }
    Ok(())
}
