use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::{soft_update, Activation, Mlp};
use super::replay::{ReplayBuffer, Transition};
use crate::env::{AssociationAction, Env, Observation};
use crate::policies::{AssociationPolicy, PolicyKind};
use crate::rng::SimRng;
use crate::{Error, Result};

/// Stored and critic-facing scores are kept strictly inside (0, 1).
pub const SCORE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub noise_sigma: f64,
    /// Defaults to `batch_size`.
    pub warmup_transitions: Option<usize>,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Multiplies environment rewards before they enter the critic targets.
    pub reward_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            lr_actor: 0.003,
            lr_critic: 0.003,
            gamma: 0.99,
            tau: 0.003,
            batch_size: 1024,
            buffer_capacity: 1_000_000,
            epsilon_start: 1.0,
            epsilon_decay: 0.9999,
            epsilon_min: 0.05,
            noise_sigma: 0.1,
            warmup_transitions: None,
            actor_hidden: vec![512, 512],
            critic_hidden: vec![512, 512, 256],
            reward_scale: 1.0,
        }
    }
}

impl AgentConfig {
    pub fn warmup(&self) -> usize {
        self.warmup_transitions.unwrap_or(self.batch_size)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(msg.to_string()))
            }
        };
        check(self.tau > 0.0 && self.tau <= 1.0, "agent.tau must lie in (0, 1]")?;
        check((0.0..=1.0).contains(&self.gamma), "agent.gamma must lie in [0, 1]")?;
        check(
            (0.0..=1.0).contains(&self.epsilon_min),
            "agent.epsilon_min must lie in [0, 1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.epsilon_start),
            "agent.epsilon_start must lie in [0, 1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.epsilon_decay),
            "agent.epsilon_decay must lie in [0, 1]",
        )?;
        check(self.lr_actor > 0.0 && self.lr_critic > 0.0, "learning rates must be > 0")?;
        check(self.batch_size >= 1, "agent.batch_size must be >= 1")?;
        check(self.buffer_capacity >= 1, "agent.buffer_capacity must be >= 1")?;
        check(self.noise_sigma >= 0.0, "agent.noise_sigma must be >= 0")?;
        check(self.reward_scale > 0.0, "agent.reward_scale must be > 0")?;
        check(
            !self.actor_hidden.contains(&0) && !self.critic_hidden.contains(&0),
            "hidden widths must be >= 1",
        )?;
        Ok(())
    }

    pub fn actor_dims(&self, obs_dim: usize, act_dim: usize) -> (Vec<usize>, Vec<Activation>) {
        let mut dims = vec![obs_dim];
        dims.extend(&self.actor_hidden);
        dims.push(act_dim);
        let mut acts = vec![Activation::Relu; self.actor_hidden.len()];
        acts.push(Activation::Sigmoid);
        (dims, acts)
    }

    pub fn critic_dims(&self, obs_dim: usize, act_dim: usize) -> (Vec<usize>, Vec<Activation>) {
        let mut dims = vec![obs_dim + act_dim];
        dims.extend(&self.critic_hidden);
        dims.push(1);
        let mut acts = vec![Activation::Relu; self.critic_hidden.len()];
        acts.push(Activation::Identity);
        (dims, acts)
    }
}

/// Shape of the problem the agent was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDims {
    pub n_vehicles: usize,
    pub n_aps: usize,
}

impl AgentDims {
    pub fn obs_dim(&self) -> usize {
        Observation::flat_len(self.n_vehicles, self.n_aps)
    }

    pub fn act_dim(&self) -> usize {
        self.n_vehicles * self.n_aps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    /// Gaussian score noise, epsilon-random rows and epsilon decay.
    Explore,
    /// Pure argmax of the actor output.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub(crate) config: AgentConfig,
    pub(crate) dims: AgentDims,
    pub(crate) actor: Mlp,
    pub(crate) critic: Mlp,
    pub(crate) actor_target: Mlp,
    pub(crate) critic_target: Mlp,
    pub(crate) actor_opt: Adam,
    pub(crate) critic_opt: Adam,
    pub(crate) buffer: ReplayBuffer,
    pub(crate) epsilon: f64,
}

/// Critic input for a batch: observations followed by action scores.
pub fn critic_input(obs: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
    concatenate![Axis(1), obs.view(), actions.view()]
}

impl DdpgAgent {
    /// Fresh agent; targets start as copies of the online networks.
    pub fn new<R: Rng + ?Sized>(config: AgentConfig, dims: AgentDims, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if dims.n_vehicles == 0 || dims.n_aps == 0 {
            return Err(Error::config("agent needs at least one vehicle and one AP"));
        }
        let (obs_dim, act_dim) = (dims.obs_dim(), dims.act_dim());
        let (ad, aa) = config.actor_dims(obs_dim, act_dim);
        let (cd, ca) = config.critic_dims(obs_dim, act_dim);
        let actor = Mlp::init(&ad, &aa, rng)?;
        let critic = Mlp::init(&cd, &ca, rng)?;
        Ok(Self {
            actor_opt: Adam::new(&actor, config.lr_actor),
            critic_opt: Adam::new(&critic, config.lr_critic),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(config.buffer_capacity, obs_dim, act_dim)?,
            epsilon: config.epsilon_start,
            config,
            dims,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn dims(&self) -> AgentDims {
        self.dims
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn actor_target(&self) -> &Mlp {
        &self.actor_target
    }

    pub fn critic_target(&self) -> &Mlp {
        &self.critic_target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn remember(&mut self, t: Transition) -> Result<()> {
        self.buffer.push(t)
    }

    /// Actor output for one observation, `[n_vehicles x n_aps]`.
    pub fn scores(&self, obs: &[f64]) -> Result<Array2<f64>> {
        let out = self.actor.forward_one(obs)?;
        Array2::from_shape_vec((self.dims.n_vehicles, self.dims.n_aps), out)
            .map_err(|e| Error::usage(e.to_string()))
    }

    pub fn act<R: Rng + ?Sized>(&mut self, obs: &[f64], mode: ActMode, rng: &mut R) -> Result<AssociationAction> {
        let mut scores = self.scores(obs)?;
        if mode == ActMode::Explore {
            if self.config.noise_sigma > 0.0 {
                let normal = Normal::new(0.0, self.config.noise_sigma)
                    .map_err(|e| Error::config(e.to_string()))?;
                scores.mapv_inplace(|v| v + normal.sample(rng));
            }
            let n_aps = self.dims.n_aps;
            for mut row in scores.rows_mut() {
                if rng.random::<f64>() < self.epsilon {
                    let pick = rng.random_range(0..n_aps);
                    row.iter_mut().enumerate().for_each(|(j, v)| *v = if j == pick { 1.0 } else { 0.0 });
                }
            }
            self.epsilon = (self.epsilon * self.config.epsilon_decay).max(self.config.epsilon_min);
        }
        scores.mapv_inplace(|v| v.clamp(SCORE_FLOOR, 1.0 - SCORE_FLOOR));
        Ok(AssociationAction::from_scores(scores))
    }

    /// One learning step on a uniform batch. Returns `None` while the buffer
    /// holds fewer than the warm-up count.
    pub fn update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<UpdateStats>> {
        if self.buffer.len() < self.config.warmup().max(1) {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.config.batch_size, rng);
        let (obs_dim, act_dim) = (self.dims.obs_dim(), self.dims.act_dim());
        let n = batch.len();
        let mut obs = Array2::zeros((n, obs_dim));
        let mut next = Array2::zeros((n, obs_dim));
        let mut actions = Array2::zeros((n, act_dim));
        let mut rewards = Array1::zeros(n);
        let mut not_done = Array1::zeros(n);
        for (k, t) in batch.iter().enumerate() {
            obs.row_mut(k).assign(&ndarray::ArrayView1::from(&t.obs));
            next.row_mut(k).assign(&ndarray::ArrayView1::from(&t.next_obs));
            actions.row_mut(k).assign(&ndarray::ArrayView1::from(&t.action_scores));
            rewards[k] = t.reward * self.config.reward_scale;
            not_done[k] = if t.done { 0.0 } else { 1.0 };
        }
        self.update_on(&obs, &actions, &rewards, &next, &not_done)
            .map(Some)
    }

    /// Learning step on an explicit batch.
    pub fn update_on(
        &mut self,
        obs: &Array2<f64>,
        actions: &Array2<f64>,
        rewards: &Array1<f64>,
        next_obs: &Array2<f64>,
        not_done: &Array1<f64>,
    ) -> Result<UpdateStats> {
        let n = obs.nrows() as f64;
        let targets = self.td_targets(rewards, next_obs, not_done)?;

        // critic: mean squared TD error
        let q = self.critic.forward_cached(critic_input(obs, actions).view())?;
        let err = &q.column(0) - &targets;
        let critic_loss = err.mapv(|e| e * e).sum() / n;
        let upstream = err.mapv(|e| 2.0 * e / n).insert_axis(Axis(1));
        let (critic_grads, _) = self.critic.backward(upstream.view())?;
        self.critic_opt.step(&mut self.critic, &critic_grads)?;

        // actor: ascend mean Q(s, actor(s)) through the critic's input gradient
        let policy_actions = self.actor.forward_cached(obs.view())?;
        let q_pi = self.critic.forward_cached(critic_input(obs, &policy_actions).view())?;
        let actor_loss = -q_pi.sum() / n;
        let dq = Array2::from_elem((obs.nrows(), 1), -1.0 / n);
        let (_, dinput) = self.critic.backward(dq.view())?;
        let dactions = dinput.slice(s![.., obs.ncols()..]).to_owned();
        let (actor_grads, _) = self.actor.backward(dactions.view())?;
        self.actor_opt.step(&mut self.actor, &actor_grads)?;

        if !critic_loss.is_finite() || !actor_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "critic loss {critic_loss}, actor loss {actor_loss}"
            )));
        }
        Ok(UpdateStats {
            critic_loss,
            actor_loss,
        })
    }

    /// y = r + γ (1 − done) Q'(s', μ'(s')).
    pub fn td_targets(
        &self,
        rewards: &Array1<f64>,
        next_obs: &Array2<f64>,
        not_done: &Array1<f64>,
    ) -> Result<Array1<f64>> {
        let next_actions = self.actor_target.forward(next_obs.view())?;
        let next_q = self
            .critic_target
            .forward(critic_input(next_obs, &next_actions).view())?;
        Ok(rewards + &(next_q.column(0).to_owned() * not_done * self.config.gamma))
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        soft_update(&mut self.actor_target, &self.actor, self.config.tau)?;
        soft_update(&mut self.critic_target, &self.critic, self.config.tau)
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, net) in [
            ("actor", &self.actor),
            ("critic", &self.critic),
            ("actor_target", &self.actor_target),
            ("critic_target", &self.critic_target),
        ] {
            if let Some((layer, what)) = net.first_non_finite() {
                return Err(Error::Diverged(format!("{name} layer {layer}: {what}")));
            }
        }
        Ok(())
    }

    /// Read-only greedy policy view of this agent.
    pub fn greedy_policy(&self) -> DdpgPolicy {
        DdpgPolicy {
            actor: self.actor.clone(),
            dims: self.dims,
        }
    }
}

/// Evaluation-mode actor: no noise, no epsilon, no learning.
#[derive(Debug, Clone)]
pub struct DdpgPolicy {
    actor: Mlp,
    dims: AgentDims,
}

impl DdpgPolicy {
    pub fn dims(&self) -> AgentDims {
        self.dims
    }
}

impl AssociationPolicy for DdpgPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Ddpg
    }

    fn select(&mut self, env: &Env, _rng: &mut SimRng) -> Result<AssociationAction> {
        if env.n_vehicles() != self.dims.n_vehicles || env.n_aps() != self.dims.n_aps {
            return Err(Error::usage(format!(
                "actor trained for {}x{}, environment is {}x{}",
                self.dims.n_vehicles,
                self.dims.n_aps,
                env.n_vehicles(),
                env.n_aps()
            )));
        }
        let out = self.actor.forward_one(&env.observe().to_flat())?;
        let scores = Array2::from_shape_vec((self.dims.n_vehicles, self.dims.n_aps), out)
            .map_err(|e| Error::usage(e.to_string()))?;
        Ok(AssociationAction::from_scores(scores))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;

    fn small_config() -> AgentConfig {
        AgentConfig {
            batch_size: 8,
            actor_hidden: vec![8, 8],
            critic_hidden: vec![8, 8, 4],
            epsilon_start: 1.0,
            ..AgentConfig::default()
        }
    }

    fn dims() -> AgentDims {
        AgentDims {
            n_vehicles: 2,
            n_aps: 2,
        }
    }

    #[test]
    fn network_shapes() {
        let a = DdpgAgent::new(
            AgentConfig {
                actor_hidden: vec![16, 16],
                critic_hidden: vec![16, 16, 8],
                ..AgentConfig::default()
            },
            AgentDims {
                n_vehicles: 6,
                n_aps: 4,
            },
            &mut rng::stream(0, 0, 0),
        )
        .unwrap();
        assert_eq!(a.actor().input_dim(), 52);
        assert_eq!(a.actor().output_dim(), 24);
        assert_eq!(a.critic().input_dim(), 76);
        assert_eq!(a.critic().output_dim(), 1);
        assert_eq!(a.actor(), a.actor_target());
    }

    #[test]
    fn epsilon_follows_closed_form() {
        let mut r = rng::stream(5, 5, 5);
        let mut a = DdpgAgent::new(small_config(), dims(), &mut r).unwrap();
        let obs = vec![0.1; dims().obs_dim()];
        let mut prev = a.epsilon();
        for n in 1..=40_000u32 {
            a.act(&obs, ActMode::Explore, &mut r).unwrap();
            let expected = 0.9999f64.powi(n as i32).max(0.05);
            assert!((a.epsilon() - expected).abs() <= 1e-12 * expected.max(1.0), "n={n}");
            assert!(a.epsilon() <= prev && a.epsilon() >= 0.05);
            prev = a.epsilon();
        }
    }

    #[test]
    fn greedy_mode_is_argmax_and_keeps_epsilon() {
        let mut r = rng::stream(6, 6, 6);
        let mut a = DdpgAgent::new(small_config(), dims(), &mut r).unwrap();
        let obs: Vec<f64> = (0..dims().obs_dim()).map(|k| (k as f64 * 0.37).sin().abs()).collect();
        let act = a.act(&obs, ActMode::Greedy, &mut r).unwrap();
        let raw = a.scores(&obs).unwrap();
        assert_eq!(act, AssociationAction::from_scores(raw.mapv(|v| v.clamp(SCORE_FLOOR, 1.0 - SCORE_FLOOR))));
        assert_eq!(a.epsilon(), 1.0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let cfg = AgentConfig {
            epsilon_decay: 1.0,
            ..small_config()
        };
        let mut r = rng::stream(7, 7, 7);
        let mut a = DdpgAgent::new(cfg, dims(), &mut r).unwrap();
        let obs = vec![0.2; dims().obs_dim()];
        let mut counts = [0usize; 2];
        for _ in 0..20_000 {
            counts[a.act(&obs, ActMode::Explore, &mut r).unwrap().assoc[0]] += 1;
        }
        let p = counts[0] as f64 / 20_000.0;
        assert!((p - 0.5).abs() < 0.02, "{counts:?}");
    }

    #[test]
    fn terminal_targets_are_rewards() {
        let mut r = rng::stream(8, 8, 8);
        let a = DdpgAgent::new(small_config(), dims(), &mut r).unwrap();
        let next = Array2::from_elem((3, dims().obs_dim()), 0.3);
        let y = a.td_targets(&array![1.0, -2.0, 5.0], &next, &array![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(y, array![1.0, -2.0, 5.0]);

        let myopic = DdpgAgent::new(AgentConfig { gamma: 0.0, ..small_config() }, dims(), &mut r).unwrap();
        let y = myopic.td_targets(&array![1.0, -2.0, 5.0], &next, &array![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(y, array![1.0, -2.0, 5.0]);
    }

    #[test]
    fn update_waits_for_warmup() {
        let mut r = rng::stream(9, 9, 9);
        let mut a = DdpgAgent::new(small_config(), dims(), &mut r).unwrap();
        assert!(a.update(&mut r).unwrap().is_none());
    }

    #[test]
    fn critic_memorizes_two_transitions() {
        let cfg = AgentConfig {
            batch_size: 2,
            warmup_transitions: Some(2),
            actor_hidden: vec![16, 16],
            critic_hidden: vec![32, 32, 16],
            ..AgentConfig::default()
        };
        let mut r = rng::stream(10, 10, 10);
        let mut a = DdpgAgent::new(cfg, dims(), &mut r).unwrap();
        let d = dims();
        let obs_a: Vec<f64> = (0..d.obs_dim()).map(|k| (k % 3) as f64 / 3.0).collect();
        let obs_b: Vec<f64> = (0..d.obs_dim()).map(|k| ((k + 1) % 2) as f64).collect();
        let obs = Array2::from_shape_vec((2, d.obs_dim()), [obs_a.clone(), obs_b.clone()].concat()).unwrap();
        let acts = Array2::from_shape_vec((2, d.act_dim()), vec![0.9, 0.1, 0.2, 0.8, 0.3, 0.7, 0.6, 0.4]).unwrap();
        let rewards = array![1.0, -1.0];
        let done = array![0.0, 0.0];
        let first = a.update_on(&obs, &acts, &rewards, &obs, &done).unwrap().critic_loss;
        let mut last = first;
        for _ in 0..500 {
            last = a.update_on(&obs, &acts, &rewards, &obs, &done).unwrap().critic_loss;
        }
        assert!(last < 0.01 * first, "first {first}, last {last}");
    }
}
