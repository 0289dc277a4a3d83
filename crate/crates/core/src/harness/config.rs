//! Run configuration.
//!
//! The config file is flat `key = value` TOML with dotted section prefixes,
//! for example:
//!
//! ```toml
//! seed = 7
//! episodes = 1000
//! scenario.name = "1"
//! scenario.n_vehicles = 6
//! channel.shadow_enabled = true
//! reward.handover_k = 0.5
//! agent.batch_size = 256
//! ```
//!
//! Every key mirrors a field of [`RunConfig`] or one of its sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::ddpg::AgentConfig;
use crate::env::RewardConfig;
use crate::policies::PolicyKind;
use crate::world::{
    make_scenario1, make_scenario2, Pose, Scenario, ScenarioKind, DEFAULT_AP_SPEED_MPS,
    DEFAULT_GOAL_RADIUS_M, DEFAULT_MAX_STEPS, DEFAULT_VEHICLE_SPEED_MPS, DEFAULT_WORLD_SIZE_M,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// `"1"`, `"2"` or `"custom"`.
    pub name: String,
    pub n_vehicles: usize,
    pub n_aps: usize,
    pub world_size_m: f64,
    pub goal_radius_m: f64,
    pub dt_s: f64,
    pub max_steps: usize,
    pub vehicle_speed_mps: f64,
    pub ap_speed_mps: f64,
    /// Explicit poses as `[x, y]` pairs. Required for custom scenarios and
    /// override the generated layout otherwise.
    pub vehicle_starts: Option<Vec<[f64; 2]>>,
    pub vehicle_targets: Option<Vec<[f64; 2]>>,
    pub ap_starts: Option<Vec<[f64; 2]>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "1".to_string(),
            n_vehicles: 6,
            n_aps: 4,
            world_size_m: DEFAULT_WORLD_SIZE_M,
            goal_radius_m: DEFAULT_GOAL_RADIUS_M,
            dt_s: 1.0,
            max_steps: DEFAULT_MAX_STEPS,
            vehicle_speed_mps: DEFAULT_VEHICLE_SPEED_MPS,
            ap_speed_mps: DEFAULT_AP_SPEED_MPS,
            vehicle_starts: None,
            vehicle_targets: None,
            ap_starts: None,
        }
    }
}

fn poses(list: &[[f64; 2]]) -> Vec<Pose> {
    list.iter().copied().map(Pose::from).collect()
}

impl ScenarioConfig {
    pub fn kind(&self) -> Result<ScenarioKind> {
        match self.name.trim().to_ascii_lowercase().as_str() {
            "1" | "scenario1" => Ok(ScenarioKind::Scenario1),
            "2" | "scenario2" => Ok(ScenarioKind::Scenario2),
            "custom" => Ok(ScenarioKind::Custom),
            other => Err(Error::config(format!(
                "scenario.name must be 1, 2 or custom, got '{other}'"
            ))),
        }
    }

    pub fn label(&self) -> String {
        match self.kind() {
            Ok(ScenarioKind::Scenario1) => "scenario1".into(),
            Ok(ScenarioKind::Scenario2) => "scenario2".into(),
            _ => "custom".into(),
        }
    }

    pub fn build(&self) -> Result<Scenario> {
        let kind = self.kind()?;
        let mut s = match kind {
            ScenarioKind::Scenario1 => make_scenario1(self.n_vehicles, self.n_aps, self.world_size_m)?,
            ScenarioKind::Scenario2 => make_scenario2(self.n_vehicles, self.n_aps, self.world_size_m)?,
            ScenarioKind::Custom => {
                let missing = |f: &Option<Vec<[f64; 2]>>, name: &str| {
                    f.as_ref()
                        .map(|v| poses(v))
                        .ok_or_else(|| Error::config(format!("custom scenario needs scenario.{name}")))
                };
                Scenario {
                    kind,
                    world_size_m: self.world_size_m,
                    vehicle_starts: missing(&self.vehicle_starts, "vehicle_starts")?,
                    vehicle_targets: missing(&self.vehicle_targets, "vehicle_targets")?,
                    ap_starts: missing(&self.ap_starts, "ap_starts")?,
                    goal_radius_m: self.goal_radius_m,
                    dt_s: self.dt_s,
                    max_steps: self.max_steps,
                    vehicle_speed_mps: self.vehicle_speed_mps,
                    ap_speed_mps: self.ap_speed_mps,
                }
            }
        };
        if kind != ScenarioKind::Custom {
            if let Some(v) = &self.vehicle_starts {
                s.vehicle_starts = poses(v);
            }
            if let Some(v) = &self.vehicle_targets {
                s.vehicle_targets = poses(v);
            }
            if let Some(v) = &self.ap_starts {
                s.ap_starts = poses(v);
            }
        }
        s.goal_radius_m = self.goal_radius_m;
        s.dt_s = self.dt_s;
        s.max_steps = self.max_steps;
        s.vehicle_speed_mps = self.vehicle_speed_mps;
        s.ap_speed_mps = self.ap_speed_mps;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub policy: PolicyKind,
    pub episodes: usize,
    pub trials: usize,
    pub seed: u64,
    pub channel: ChannelParams,
    pub reward: RewardConfig,
    pub agent: AgentConfig,
    pub out_dir: PathBuf,
    /// Trained agent used by DDPG evaluation.
    pub checkpoint: Option<PathBuf>,
    /// Training writes an intermediate checkpoint every this many episodes
    /// (0 disables them).
    pub checkpoint_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            policy: PolicyKind::Ddpg,
            episodes: 5000,
            trials: 100,
            seed: 0,
            channel: ChannelParams::default(),
            reward: RewardConfig::default(),
            agent: AgentConfig::default(),
            out_dir: PathBuf::from("runs"),
            checkpoint: None,
            checkpoint_every: 100,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: ScenarioConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Applies a `--scenario` argument: `1`, `2` or `custom:<file>`, where
    /// the file holds `scenario.*` keys.
    pub fn apply_scenario_arg(&mut self, arg: &str) -> Result<()> {
        match arg.split_once(':') {
            Some(("custom", file)) => {
                let path = Path::new(file);
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let parsed: ScenarioFile = toml::from_str(&text)
                    .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
                self.scenario = parsed.scenario;
                self.scenario.name = "custom".into();
            }
            None if matches!(arg, "1" | "2") => self.scenario.name = arg.to_string(),
            _ => {
                return Err(Error::usage(format!(
                    "--scenario expects 1, 2 or custom:<file>, got '{arg}'"
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.build()?;
        self.channel.validate()?;
        self.reward.validate()?;
        self.agent.validate()?;
        if self.trials == 0 {
            return Err(Error::config("trials must be >= 1"));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.scenario.build()
    }
}

/// Vehicle and AP counts of a built scenario.
pub fn counts(s: &Scenario) -> (usize, usize) {
    (s.n_vehicles(), s.n_aps())
}
