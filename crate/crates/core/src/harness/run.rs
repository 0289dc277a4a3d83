//! Training, evaluation and comparison runs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::RunConfig;
use super::metrics::{
    mean_std, write_metrics_csv, write_outcomes_csv, write_summary_csv, write_timings_csv,
    EpisodeTracker, MetricsRecord, Summary,
};
use super::seeds::{trial_policy_stream, trial_seed};
use super::stats::{paired_t, PairedTest};
use super::atomic_write;
use crate::ddpg::{train, DdpgAgent, DdpgPolicy};
use crate::env::Env;
use crate::policies::{baseline, AssociationPolicy, PolicyKind};
use crate::rng::SimRng;
use crate::{Error, Result};

pub const TRAIN_METRICS: &str = "train_metrics.csv";
pub const EVAL_METRICS: &str = "eval_metrics.csv";
pub const EVAL_SUMMARY: &str = "eval_summary.csv";
pub const OUTCOMES: &str = "outcomes.csv";
pub const TIMINGS: &str = "timings.csv";
pub const COMPARE: &str = "compare.csv";
pub const COMPARE_PAIRED: &str = "compare_paired.csv";
pub const CHECKPOINT: &str = "checkpoint.json";

fn env_for(config: &RunConfig, seed: u64) -> Result<Env> {
    Env::new(
        config.scenario()?,
        config.channel.clone(),
        config.reward.clone(),
        seed,
    )
}

fn create_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Where training writes its checkpoint: the configured path, or
/// `checkpoint.json` inside the output directory.
pub fn train_checkpoint_path(config: &RunConfig) -> PathBuf {
    config
        .checkpoint
        .clone()
        .unwrap_or_else(|| config.out_dir.join(CHECKPOINT))
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub records: Vec<MetricsRecord>,
    pub checkpoint: PathBuf,
    /// Mean cumulative reward over the first and last (up to) 100 episodes.
    pub first_reward_mean: f64,
    pub last_reward_mean: f64,
}

impl TrainReport {
    pub fn convergence_summary(&self) -> String {
        let n = self.records.len();
        let window = n.min(100);
        format!(
            "episodes: {n}; mean reward first {window}: {:.3}; last {window}: {:.3}; checkpoint: {}",
            self.first_reward_mean,
            self.last_reward_mean,
            self.checkpoint.display()
        )
    }
}

fn head_tail_means(records: &[MetricsRecord]) -> (f64, f64) {
    let w = records.len().min(100);
    let head = mean_std(records[..w].iter().map(|r| r.cumulative_reward)).0;
    let tail = mean_std(records[records.len() - w..].iter().map(|r| r.cumulative_reward)).0;
    (head, tail)
}

pub fn run_train(config: &RunConfig) -> Result<TrainReport> {
    run_train_with(config, |_| {})
}

/// Training run that reports every finished episode to `progress`.
pub fn run_train_with<F>(config: &RunConfig, mut progress: F) -> Result<TrainReport>
where
    F: FnMut(&MetricsRecord),
{
    if config.policy != PolicyKind::Ddpg {
        return Err(Error::usage(format!(
            "only the ddpg policy is trained, config has '{}'",
            config.policy
        )));
    }
    config.validate()?;
    create_out_dir(&config.out_dir)?;
    let mut env = env_for(config, config.seed)?;
    let mut agent = DdpgAgent::for_env(config.agent.clone(), &env, config.seed)?;
    let ck_path = train_checkpoint_path(config);
    agent.save_checkpoint(&ck_path, 0)?;

    let every = config.checkpoint_every;
    let records = train(&mut env, &mut agent, config.episodes, config.seed, |rec, agent| {
        progress(rec);
        let done = rec.episode_or_trial + 1;
        if every > 0 && done % every == 0 && done < config.episodes {
            agent.save_checkpoint(&ck_path, done)?;
        }
        Ok(())
    })?;
    agent.save_checkpoint(&ck_path, records.len())?;

    write_metrics_csv(&config.out_dir.join(TRAIN_METRICS), &records)?;
    write_outcomes_csv(&config.out_dir.join(OUTCOMES), &records)?;
    write_timings_csv(&config.out_dir.join(TIMINGS), &records)?;

    let (first_reward_mean, last_reward_mean) = if records.is_empty() {
        (0.0, 0.0)
    } else {
        head_tail_means(&records)
    };
    Ok(TrainReport {
        records,
        checkpoint: ck_path,
        first_reward_mean,
        last_reward_mean,
    })
}

/// One rollout of `policy`; nothing learns and nothing explores.
pub fn run_episode(
    env: &mut Env,
    policy: &mut dyn AssociationPolicy,
    rng: &mut SimRng,
    index: usize,
) -> Result<MetricsRecord> {
    let started = Instant::now();
    let mut tracker = EpisodeTracker::new();
    while !env.is_done() {
        let action = policy.select(env, rng)?;
        let step = env.step(&action)?;
        tracker.record_step(&step);
    }
    Ok(tracker.finish(index, env, started.elapsed().as_secs_f64()))
}

/// A policy that can be instantiated once per trial.
#[derive(Debug, Clone)]
enum PolicySource {
    Baseline(PolicyKind),
    Ddpg(DdpgPolicy),
}

impl PolicySource {
    fn for_config(config: &RunConfig) -> Result<Self> {
        if config.policy != PolicyKind::Ddpg {
            return Ok(PolicySource::Baseline(config.policy));
        }
        let path = config.checkpoint.as_ref().ok_or_else(|| {
            Error::usage("evaluating ddpg needs a checkpoint (--checkpoint or checkpoint = ...)")
        })?;
        let (agent, _) = DdpgAgent::load_checkpoint(path, None)?;
        let scenario = config.scenario()?;
        let dims = agent.dims();
        if dims.n_vehicles != scenario.n_vehicles() || dims.n_aps != scenario.n_aps() {
            return Err(Error::Checkpoint(format!(
                "{} holds an agent for {} vehicles x {} APs, the scenario has {} x {}",
                path.display(),
                dims.n_vehicles,
                dims.n_aps,
                scenario.n_vehicles(),
                scenario.n_aps()
            )));
        }
        Ok(PolicySource::Ddpg(agent.greedy_policy()))
    }

    fn instantiate(&self) -> Box<dyn AssociationPolicy + Send> {
        match self {
            PolicySource::Baseline(k) => baseline(*k).expect("baseline kinds only"),
            PolicySource::Ddpg(p) => Box::new(p.clone()),
        }
    }
}

/// Runs `trials` seeded episodes in parallel, ordered by trial index.
fn evaluate(config: &RunConfig, source: &PolicySource) -> Result<Vec<MetricsRecord>> {
    (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut env = env_for(config, trial_seed(config.seed, trial))?;
            let mut policy = source.instantiate();
            let mut rng = trial_policy_stream(config.seed, trial);
            run_episode(&mut env, policy.as_mut(), &mut rng, trial)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub records: Vec<MetricsRecord>,
    pub summary: Summary,
}

pub fn run_eval(config: &RunConfig) -> Result<EvalReport> {
    config.validate()?;
    let source = PolicySource::for_config(config)?;
    let records = evaluate(config, &source)?;
    let summary = Summary::from_records(config.policy.as_str(), &config.scenario.label(), &records);
    create_out_dir(&config.out_dir)?;
    write_metrics_csv(&config.out_dir.join(EVAL_METRICS), &records)?;
    write_summary_csv(&config.out_dir.join(EVAL_SUMMARY), std::slice::from_ref(&summary))?;
    Ok(EvalReport { records, summary })
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub reports: Vec<EvalReport>,
}

/// Paired test of `policy` against `reference` on one metric.
#[derive(Debug, Clone)]
pub struct PairedRow {
    pub policy: String,
    pub reference: String,
    pub metric: &'static str,
    pub test: PairedTest,
}

type MetricFn = fn(&MetricsRecord) -> f64;

const PAIRED_METRICS: [(&str, MetricFn); 4] = [
    ("cumulative_reward", |r| r.cumulative_reward),
    ("mean_handovers", |r| r.mean_handovers),
    ("mean_snr_db", |r| r.mean_snr_db),
    ("completion_time_s", |r| r.completion_time_s),
];

impl CompareReport {
    pub fn summaries(&self) -> Vec<Summary> {
        self.reports.iter().map(|r| r.summary.clone()).collect()
    }

    pub fn report(&self, policy: PolicyKind) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.summary.policy == policy.as_str())
    }

    /// Paired tests of the first policy against every other one.
    pub fn paired(&self) -> Vec<PairedRow> {
        let Some(first) = self.reports.first() else {
            return Vec::new();
        };
        let mut rows = Vec::new();
        for other in &self.reports[1..] {
            for (metric, f) in PAIRED_METRICS {
                let a: Vec<f64> = first.records.iter().map(f).collect();
                let b: Vec<f64> = other.records.iter().map(f).collect();
                rows.push(PairedRow {
                    policy: first.summary.policy.clone(),
                    reference: other.summary.policy.clone(),
                    metric,
                    test: paired_t(&a, &b),
                });
            }
        }
        rows
    }
}

fn write_paired_csv(path: &Path, rows: &[PairedRow]) -> Result<()> {
    atomic_write(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["policy", "reference", "metric", "n", "mean_diff", "std_diff", "t", "p_less"])?;
        for r in rows {
            csv.write_record([
                r.policy.clone(),
                r.reference.clone(),
                r.metric.to_string(),
                r.test.n.to_string(),
                r.test.mean_diff.to_string(),
                r.test.std_diff.to_string(),
                r.test.t.to_string(),
                r.test.p_less.to_string(),
            ])?;
        }
        csv.flush().map_err(csv::Error::from)?;
        Ok(())
    })
}

/// Evaluates each config on the same scenario, seed and trial count and
/// writes one summary row per policy to the first config's output
/// directory, plus per-policy metrics and paired tests.
pub fn compare(configs: &[RunConfig]) -> Result<CompareReport> {
    let first = configs
        .first()
        .ok_or_else(|| Error::usage("compare needs at least one policy"))?;
    for c in &configs[1..] {
        if c.scenario != first.scenario
            || c.seed != first.seed
            || c.trials != first.trials
            || c.channel != first.channel
            || c.reward != first.reward
        {
            return Err(Error::usage(format!(
                "compare configs must share scenario, channel, reward, seed and trials ({} differs)",
                c.policy
            )));
        }
    }
    for c in configs {
        c.validate()?;
    }
    let sources = configs
        .iter()
        .map(PolicySource::for_config)
        .collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::with_capacity(configs.len());
    for (c, source) in configs.iter().zip(&sources) {
        let records = evaluate(c, source)?;
        let summary = Summary::from_records(c.policy.as_str(), &c.scenario.label(), &records);
        reports.push(EvalReport { records, summary });
    }
    let out = &first.out_dir;
    create_out_dir(out)?;
    for r in &reports {
        write_metrics_csv(&out.join(format!("eval_metrics_{}.csv", r.summary.policy)), &r.records)?;
    }
    let report = CompareReport { reports };
    write_summary_csv(&out.join(COMPARE), &report.summaries())?;
    write_paired_csv(&out.join(COMPARE_PAIRED), &report.paired())?;
    Ok(report)
}
