//! The association decision process.
//!
//! One centralized agent picks an AP for every vehicle each step. The state
//! holds normalized AP loads, the normalized SNR matrix and the previous
//! association; the reward averages per-vehicle SNR, load and handover terms
//! and adds a terminal bonus or penalty.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channel::{scenario_snr_bounds, Channel, ChannelParams, SnrBounds};
use crate::policies::argmax_row;
use crate::rng::{self, purpose, SimRng};
use crate::world::{Scenario, WorldState};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Per-AP load divided by the fleet size.
    pub ap_loads: Vec<f64>,
    /// Normalized SNR, `[n_vehicles x n_aps]`.
    pub snr_matrix: Array2<f64>,
    /// One-hot association in effect, `[n_vehicles x n_aps]`.
    pub prev_assoc: Array2<f64>,
}

impl Observation {
    pub fn flat_len(n_vehicles: usize, n_aps: usize) -> usize {
        n_aps + 2 * n_vehicles * n_aps
    }

    /// Loads, then the SNR matrix and the association, both row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.ap_loads.len() + 2 * self.snr_matrix.len());
        out.extend_from_slice(&self.ap_loads);
        out.extend(self.snr_matrix.iter().copied());
        out.extend(self.prev_assoc.iter().copied());
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationAction {
    pub assoc: Vec<usize>,
    /// Continuous scores the association was decoded from.
    pub scores: Array2<f64>,
}

impl AssociationAction {
    /// Decodes each row by argmax, ties going to the lowest index.
    pub fn from_scores(scores: Array2<f64>) -> Self {
        let assoc = scores.rows().into_iter().map(|r| argmax_row(r.iter().copied())).collect();
        Self { assoc, scores }
    }

    /// One-hot scores for a fixed association.
    pub fn from_indices(assoc: Vec<usize>, n_aps: usize) -> Self {
        let scores = one_hot(&assoc, n_aps);
        Self { assoc, scores }
    }
}

pub(crate) fn one_hot(assoc: &[usize], n_aps: usize) -> Array2<f64> {
    let mut m = Array2::zeros((assoc.len(), n_aps));
    for (i, &j) in assoc.iter().enumerate() {
        m[[i, j]] = 1.0;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub w_snr: f64,
    pub w_load: f64,
    pub w_handover: f64,
    pub w_target: f64,
    pub load_penalty: f64,
    pub handover_k: f64,
    pub success_reward: f64,
    pub failure_reward: f64,
    pub snr_threshold_db: f64,
    /// Defaults to the number of vehicles.
    pub max_load: Option<usize>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            w_snr: 1.0,
            w_load: 1.0,
            w_handover: 1.0,
            w_target: 1.0,
            load_penalty: 0.0,
            handover_k: 0.5,
            success_reward: 2500.0,
            failure_reward: -2000.0,
            snr_threshold_db: 22.0,
            max_load: None,
        }
    }
}

impl RewardConfig {
    pub fn max_load_for(&self, n_vehicles: usize) -> usize {
        self.max_load.unwrap_or(n_vehicles)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.handover_k > 0.0) {
            return Err(Error::config("reward.handover_k must be > 0"));
        }
        if self.max_load == Some(0) {
            return Err(Error::config("reward.max_load must be >= 1"));
        }
        let all = [
            self.w_snr,
            self.w_load,
            self.w_handover,
            self.w_target,
            self.load_penalty,
            self.success_reward,
            self.failure_reward,
            self.snr_threshold_db,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("reward parameters must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Ongoing,
    Success,
    LowSnr,
    HighLoad,
    Timeout,
}

impl Outcome {
    pub const TERMINAL: [Outcome; 4] = [
        Outcome::Success,
        Outcome::LowSnr,
        Outcome::HighLoad,
        Outcome::Timeout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Ongoing => "ongoing",
            Outcome::Success => "success",
            Outcome::LowSnr => "low_snr",
            Outcome::HighLoad => "high_load",
            Outcome::Timeout => "timeout",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// SNR reward of the serving link; `curr_snr` is normalized and clamped to [0,1].
pub fn r_snr(curr_snr: f64) -> f64 {
    let x = curr_snr.clamp(0.0, 1.0);
    2.0 * ((x.exp() - 1.0) / (std::f64::consts::E - 1.0)) - 1.0
}

/// Load reward of the serving AP.
pub fn r_ap_load(curr_load: usize, max_load: usize, load_penalty: f64) -> Result<f64> {
    if max_load == 0 {
        return Err(Error::domain("max_load must be >= 1"));
    }
    if curr_load > max_load {
        return Err(Error::domain(format!(
            "load {curr_load} exceeds max_load {max_load}"
        )));
    }
    if curr_load == max_load {
        return Ok(-1.0);
    }
    let rel = (curr_load as f64 - max_load as f64) / max_load as f64;
    Ok(load_penalty + (10.0 * rel).exp())
}

/// Handover reward for a vehicle's cumulative handover count.
pub fn r_handover(handovers: u32, k: f64) -> f64 {
    -(-k * handovers as f64).exp()
}

pub(crate) fn loads_of(assoc: &[usize], n_aps: usize) -> Vec<usize> {
    let mut loads = vec![0; n_aps];
    for &j in assoc {
        loads[j] += 1;
    }
    loads
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Raw SNR of each vehicle's serving link, dB.
    pub serving_snr_db: Vec<f64>,
    pub loads: Vec<usize>,
    /// Cumulative per-vehicle handover counts.
    pub handovers: Vec<u32>,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub outcome: Outcome,
    pub info: StepInfo,
}

/// Single-owner environment instance.
#[derive(Debug, Clone)]
pub struct Env {
    scenario: Scenario,
    channel: Channel,
    bounds: SnrBounds,
    reward: RewardConfig,
    max_load: usize,
    world: WorldState,
    world_rng: SimRng,
    channel_rng: SimRng,
    raw_snr: Array2<f64>,
    assoc: Vec<usize>,
    handovers: Vec<u32>,
    steps: usize,
    outcome: Outcome,
}

impl Env {
    /// Builds the environment and resets it with `seed`.
    pub fn new(
        scenario: Scenario,
        channel: ChannelParams,
        reward: RewardConfig,
        seed: u64,
    ) -> Result<Self> {
        scenario.validate()?;
        reward.validate()?;
        let channel = Channel::new(channel)?;
        let bounds = scenario_snr_bounds(scenario.world_size_m, channel.params())?;
        let max_load = reward.max_load_for(scenario.n_vehicles());
        let mut world_rng = rng::stream(seed, purpose::WORLD, 0);
        let world = WorldState::from_scenario(&scenario, &mut world_rng)?;
        let n = scenario.n_vehicles();
        let mut env = Self {
            raw_snr: Array2::zeros((n, scenario.n_aps())),
            scenario,
            channel,
            bounds,
            reward,
            max_load,
            world,
            world_rng,
            channel_rng: rng::stream(seed, purpose::CHANNEL, 0),
            assoc: vec![0; n],
            handovers: vec![0; n],
            steps: 0,
            outcome: Outcome::Ongoing,
        };
        env.reset(seed)?;
        Ok(env)
    }

    /// Restores the start poses and draws fresh random streams from `seed`.
    /// The initial association is strongest-signal-first on the initial SNR.
    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        self.world_rng = rng::stream(seed, purpose::WORLD, 0);
        self.channel_rng = rng::stream(seed, purpose::CHANNEL, 0);
        self.world = WorldState::from_scenario(&self.scenario, &mut self.world_rng)?;
        self.raw_snr = self
            .channel
            .snr_matrix(&self.world.distance_matrix(), &mut self.channel_rng);
        self.assoc = self
            .raw_snr
            .rows()
            .into_iter()
            .map(|r| argmax_row(r.iter().copied()))
            .collect();
        self.handovers.iter_mut().for_each(|h| *h = 0);
        self.steps = 0;
        self.outcome = Outcome::Ongoing;
        Ok(self.observe())
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn snr_bounds(&self) -> SnrBounds {
        self.bounds
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn n_vehicles(&self) -> usize {
        self.scenario.n_vehicles()
    }

    pub fn n_aps(&self) -> usize {
        self.scenario.n_aps()
    }

    pub fn obs_dim(&self) -> usize {
        Observation::flat_len(self.n_vehicles(), self.n_aps())
    }

    pub fn action_dim(&self) -> usize {
        self.n_vehicles() * self.n_aps()
    }

    pub fn max_load(&self) -> usize {
        self.max_load
    }

    /// Raw SNR matrix in dB at the current step.
    pub fn raw_snr(&self) -> &Array2<f64> {
        &self.raw_snr
    }

    /// Association in effect (the previous action).
    pub fn assoc(&self) -> &[usize] {
        &self.assoc
    }

    pub fn loads(&self) -> Vec<usize> {
        loads_of(&self.assoc, self.n_aps())
    }

    pub fn handovers(&self) -> &[u32] {
        &self.handovers
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn is_done(&self) -> bool {
        self.outcome != Outcome::Ongoing
    }

    pub fn observe(&self) -> Observation {
        let n = self.n_vehicles() as f64;
        Observation {
            ap_loads: self.loads().iter().map(|&l| l as f64 / n).collect(),
            snr_matrix: self.raw_snr.mapv(|v| self.bounds.normalize(v)),
            prev_assoc: one_hot(&self.assoc, self.n_aps()),
        }
    }

    pub fn step(&mut self, action: &AssociationAction) -> Result<StepResult> {
        if self.is_done() {
            return Err(Error::usage(format!(
                "step called after the episode ended ({})",
                self.outcome
            )));
        }
        let (n, m) = (self.n_vehicles(), self.n_aps());
        if action.assoc.len() != n {
            return Err(Error::usage(format!(
                "action covers {} vehicles, environment has {n}",
                action.assoc.len()
            )));
        }
        if let Some(&bad) = action.assoc.iter().find(|&&j| j >= m) {
            return Err(Error::usage(format!("AP index {bad} out of range 0..{m}")));
        }

        for ((h, &new), &old) in self.handovers.iter_mut().zip(&action.assoc).zip(&self.assoc) {
            if new != old {
                *h += 1;
            }
        }
        self.assoc.clone_from(&action.assoc);
        let loads = loads_of(&self.assoc, m);

        self.world.step(self.scenario.dt_s, &mut self.world_rng);
        self.steps += 1;
        self.raw_snr = self
            .channel
            .snr_matrix(&self.world.distance_matrix(), &mut self.channel_rng);

        let cfg = &self.reward;
        let serving_snr_db: Vec<f64> = (0..n).map(|i| self.raw_snr[[i, self.assoc[i]]]).collect();
        let mut total = 0.0;
        for i in 0..n {
            let load = loads[self.assoc[i]];
            // an overloaded AP ends the episode; score it like a full one
            let load_term = r_ap_load(load.min(self.max_load), self.max_load, cfg.load_penalty)?;
            total += cfg.w_snr * r_snr(self.bounds.normalize(serving_snr_db[i]))
                + cfg.w_load * load_term
                + cfg.w_handover * r_handover(self.handovers[i], cfg.handover_k);
        }
        let mut reward = total / n as f64;

        self.outcome = if self.world.all_arrived() {
            Outcome::Success
        } else if serving_snr_db.iter().any(|&s| s < cfg.snr_threshold_db) {
            Outcome::LowSnr
        } else if loads.iter().any(|&l| l > self.max_load) {
            Outcome::HighLoad
        } else if self.steps >= self.scenario.max_steps {
            Outcome::Timeout
        } else {
            Outcome::Ongoing
        };
        reward += match self.outcome {
            Outcome::Ongoing => 0.0,
            Outcome::Success => cfg.w_target * cfg.success_reward,
            _ => cfg.failure_reward,
        };

        Ok(StepResult {
            obs: self.observe(),
            reward,
            done: self.is_done(),
            outcome: self.outcome,
            info: StepInfo {
                serving_snr_db,
                loads,
                handovers: self.handovers.clone(),
                step: self.steps,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{make_scenario1, make_scenario2, Pose};

    fn quiet() -> ChannelParams {
        ChannelParams {
            shadow_enabled: false,
            ..ChannelParams::default()
        }
    }

    #[test]
    fn reward_terms() {
        assert_eq!(r_snr(0.0), -1.0);
        assert!((r_snr(1.0) - 1.0).abs() < 1e-12);
        assert!((r_snr(0.5) + 0.2449).abs() < 1e-4);
        assert_eq!(r_snr(-3.0), r_snr(0.0));

        assert_eq!(r_ap_load(6, 6, 0.3).unwrap(), -1.0);
        assert!((r_ap_load(0, 6, 0.0).unwrap() - 4.54e-5).abs() < 1e-7);
        assert!((r_ap_load(0, 6, 0.0).unwrap() - (-10f64).exp()).abs() < 1e-9);
        assert!((r_ap_load(3, 6, 0.0).unwrap() - (-5f64).exp()).abs() < 1e-7);
        assert!(r_ap_load(7, 6, 0.0).is_err());

        assert_eq!(r_handover(0, 0.5), -1.0);
        assert!((r_handover(4, 0.5) + 0.1353).abs() < 1e-4);
        for h in 0..50 {
            assert!(r_handover(h + 1, 0.5) > r_handover(h, 0.5));
        }
    }

    #[test]
    fn reset_is_ssf_one_hot() {
        let s = make_scenario1(6, 4, 20.0).unwrap();
        let env = Env::new(s, ChannelParams::default(), RewardConfig::default(), 5).unwrap();
        let obs = env.observe();
        for row in obs.prev_assoc.rows() {
            assert_eq!(row.sum(), 1.0);
        }
        for (i, row) in env.raw_snr().rows().into_iter().enumerate() {
            let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(row[env.assoc()[i]], best);
        }
        assert_eq!(obs.to_flat().len(), 52);
    }

    #[test]
    fn reset_deterministic() {
        let s = make_scenario2(6, 4, 20.0).unwrap();
        let a = Env::new(s.clone(), ChannelParams::default(), RewardConfig::default(), 11).unwrap();
        let b = Env::new(s, ChannelParams::default(), RewardConfig::default(), 11).unwrap();
        assert_eq!(a.observe(), b.observe());
    }

    #[test]
    fn handover_and_load_counting() {
        let mut s = make_scenario1(2, 2, 20.0).unwrap();
        s.ap_speed_mps = 0.0;
        let mut env = Env::new(s, quiet(), RewardConfig::default(), 1).unwrap();
        env.assoc = vec![0, 1];
        let r = env.step(&AssociationAction::from_indices(vec![1, 1], 2)).unwrap();
        assert_eq!(r.info.handovers, vec![1, 0]);
        assert_eq!(r.info.loads, vec![0, 2]);

        let mut s3 = make_scenario1(3, 2, 20.0).unwrap();
        s3.ap_speed_mps = 0.0;
        let mut env = Env::new(s3, quiet(), RewardConfig::default(), 1).unwrap();
        let r = env.step(&AssociationAction::from_indices(vec![0, 0, 1], 2)).unwrap();
        assert_eq!(r.info.loads, vec![2, 1]);
        assert_eq!(r.info.loads.iter().sum::<usize>(), 3);
    }

    #[test]
    fn observation_loads_normalized() {
        let s = make_scenario1(6, 4, 20.0).unwrap();
        let mut env = Env::new(s, quiet(), RewardConfig::default(), 1).unwrap();
        env.assoc = vec![0, 0, 1, 3, 3, 3];
        let obs = env.observe();
        let want = [2.0 / 6.0, 1.0 / 6.0, 0.0, 0.5];
        for (g, w) in obs.ap_loads.iter().zip(want) {
            assert!((g - w).abs() < 1e-3);
        }
        assert!(obs.snr_matrix.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn success_bonus_when_all_arrive() {
        let mut s = make_scenario1(2, 2, 20.0).unwrap();
        s.ap_speed_mps = 0.0;
        // one short hop from the goal, right next to an AP
        s.vehicle_starts = vec![Pose::new(10.0, 5.6), Pose::new(10.0, 15.6)];
        s.vehicle_targets = vec![Pose::new(10.0, 5.0), Pose::new(10.0, 15.0)];
        s.goal_radius_m = 0.1;
        let mut env = Env::new(s, quiet(), RewardConfig::default(), 3).unwrap();
        let r = env.step(&AssociationAction::from_indices(vec![0, 1], 2)).unwrap();
        assert_eq!(r.outcome, Outcome::Success);
        assert!(r.done);
        assert!(r.reward > 2490.0);
        assert!(matches!(
            env.step(&AssociationAction::from_indices(vec![0, 1], 2)),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn low_snr_terminates_with_penalty() {
        let mut s = make_scenario1(2, 2, 20.0).unwrap();
        s.ap_speed_mps = 0.0;
        s.ap_starts = vec![Pose::new(19.0, 1.0), Pose::new(19.0, 19.0)];
        let mut env = Env::new(s, quiet(), RewardConfig::default(), 3).unwrap();
        // both vehicles on the far AP, well beyond 12 m
        let r = env.step(&AssociationAction::from_indices(vec![1, 0], 2)).unwrap();
        assert_eq!(r.outcome, Outcome::LowSnr);
        assert!(r.reward < -1990.0);
    }

    #[test]
    fn high_load_when_cap_is_lower() {
        let mut s = make_scenario1(2, 1, 20.0).unwrap();
        s.ap_speed_mps = 0.0;
        s.ap_starts = vec![Pose::new(10.0, 10.0)];
        s.vehicle_starts = vec![Pose::new(9.0, 9.0), Pose::new(11.0, 11.0)];
        s.vehicle_targets = vec![Pose::new(1.0, 9.0), Pose::new(19.0, 11.0)];
        let reward = RewardConfig {
            max_load: Some(1),
            ..RewardConfig::default()
        };
        let mut env = Env::new(s, quiet(), reward, 3).unwrap();
        let r = env.step(&AssociationAction::from_indices(vec![0, 0], 1)).unwrap();
        assert_eq!(r.outcome, Outcome::HighLoad);
    }

    #[test]
    fn timeout_at_max_steps() {
        let mut s = make_scenario1(1, 1, 20.0).unwrap();
        s.ap_speed_mps = 0.0;
        s.max_steps = 3;
        s.vehicle_speed_mps = 0.01;
        s.vehicle_starts = vec![Pose::new(9.0, 10.0)];
        s.vehicle_targets = vec![Pose::new(11.0, 10.0)];
        let mut env = Env::new(s, quiet(), RewardConfig::default(), 3).unwrap();
        let a = AssociationAction::from_indices(vec![0], 1);
        assert_eq!(env.step(&a).unwrap().outcome, Outcome::Ongoing);
        assert_eq!(env.step(&a).unwrap().outcome, Outcome::Ongoing);
        let last = env.step(&a).unwrap();
        assert_eq!(last.outcome, Outcome::Timeout);
        assert!(last.done);
    }

    #[test]
    fn rejects_bad_actions() {
        let s = make_scenario1(2, 2, 20.0).unwrap();
        let mut env = Env::new(s, quiet(), RewardConfig::default(), 3).unwrap();
        assert!(env.step(&AssociationAction::from_indices(vec![0], 2)).is_err());
        let bad = AssociationAction {
            assoc: vec![0, 5],
            scores: Array2::zeros((2, 2)),
        };
        assert!(matches!(env.step(&bad), Err(Error::Usage(_))));
    }
}
