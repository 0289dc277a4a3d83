use std::time::Instant;

use super::agent::{ActMode, AgentDims, DdpgAgent};
use super::replay::Transition;
use crate::env::Env;
use crate::harness::metrics::{EpisodeTracker, MetricsRecord};
use crate::rng::{self, purpose};
use crate::Result;

use super::AgentConfig;

/// Environment seed for training episode `episode`.
pub fn episode_seed(master: u64, episode: usize) -> u64 {
    rng::child_seed(master, purpose::EPISODE, episode as u64)
}

impl DdpgAgent {
    /// Agent sized for `env` with parameters drawn from the init stream of `seed`.
    pub fn for_env(config: AgentConfig, env: &Env, seed: u64) -> Result<Self> {
        let dims = AgentDims {
            n_vehicles: env.n_vehicles(),
            n_aps: env.n_aps(),
        };
        Self::new(config, dims, &mut rng::stream(seed, purpose::INIT, 0))
    }
}

/// Runs `episodes` training episodes. Every environment step is followed by
/// one learner update (once warm) and a soft target update. `on_episode`
/// sees each finished episode and the agent at that boundary.
pub fn train<F>(
    env: &mut Env,
    agent: &mut DdpgAgent,
    episodes: usize,
    seed: u64,
    mut on_episode: F,
) -> Result<Vec<MetricsRecord>>
where
    F: FnMut(&MetricsRecord, &DdpgAgent) -> Result<()>,
{
    let mut rng = rng::stream(seed, purpose::AGENT, 0);
    let mut records = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let started = Instant::now();
        let mut obs = env.reset(episode_seed(seed, episode))?.to_flat();
        let mut tracker = EpisodeTracker::new();
        loop {
            let action = agent.act(&obs, ActMode::Explore, &mut rng)?;
            let step = env.step(&action)?;
            tracker.record_step(&step);
            let next = step.obs.to_flat();
            agent.remember(Transition {
                obs: std::mem::take(&mut obs),
                action_scores: action.scores.iter().copied().collect(),
                reward: step.reward,
                next_obs: next.clone(),
                done: step.done,
            })?;
            if let Some(stats) = agent.update(&mut rng)? {
                tracker.record_update(stats.critic_loss);
                agent.soft_update_targets()?;
            }
            obs = next;
            if step.done {
                break;
            }
        }
        agent.check_finite()?;
        let record = tracker.finish(episode, env, started.elapsed().as_secs_f64());
        on_episode(&record, agent)?;
        records.push(record);
    }
    Ok(records)
}
