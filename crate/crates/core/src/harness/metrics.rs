//! Per-episode statistics and their CSV form.

use std::path::Path;

use serde::Serialize;

use super::atomic_write;
use crate::env::{Env, Outcome, StepResult};
use crate::Result;

/// Column order of `train_metrics.csv` and `eval_metrics.csv`.
pub const METRICS_HEADER: [&str; 10] = [
    "episode_or_trial",
    "cumulative_reward",
    "critic_loss_mean",
    "updates",
    "outcome",
    "steps",
    "mean_handovers",
    "mean_snr_db",
    "peak_ap_load",
    "completion_time_s",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub episode_or_trial: usize,
    pub cumulative_reward: f64,
    /// Mean critic loss over this episode's learner updates, 0 without updates.
    pub critic_loss_mean: f64,
    pub updates: usize,
    pub outcome: Outcome,
    pub steps: usize,
    /// Handovers per vehicle over the episode.
    pub mean_handovers: f64,
    /// Serving-link SNR averaged over vehicles and steps.
    pub mean_snr_db: f64,
    pub peak_ap_load: usize,
    /// Simulated time to finish the drive. Episodes that do not end in
    /// success count as the full horizon.
    pub completion_time_s: f64,
    /// Host time spent on the episode. Kept out of the metrics CSVs so that
    /// they stay reproducible.
    pub wall_time_s: f64,
}

impl MetricsRecord {
    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::Success
    }

    fn csv_row(&self) -> Vec<String> {
        vec![
            self.episode_or_trial.to_string(),
            self.cumulative_reward.to_string(),
            self.critic_loss_mean.to_string(),
            self.updates.to_string(),
            self.outcome.to_string(),
            self.steps.to_string(),
            self.mean_handovers.to_string(),
            self.mean_snr_db.to_string(),
            self.peak_ap_load.to_string(),
            self.completion_time_s.to_string(),
        ]
    }
}

/// Accumulates step results into a [`MetricsRecord`].
#[derive(Debug, Default, Clone)]
pub struct EpisodeTracker {
    reward: f64,
    steps: usize,
    snr_sum: f64,
    snr_count: usize,
    peak_load: usize,
    loss_sum: f64,
    updates: usize,
}

impl EpisodeTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_step(&mut self, step: &StepResult) {
        self.reward += step.reward;
        self.steps += 1;
        self.snr_sum += step.info.serving_snr_db.iter().sum::<f64>();
        self.snr_count += step.info.serving_snr_db.len();
        self.peak_load = self
            .peak_load
            .max(step.info.loads.iter().copied().max().unwrap_or(0));
    }

    pub fn record_update(&mut self, critic_loss: f64) {
        self.loss_sum += critic_loss;
        self.updates += 1;
    }

    pub fn finish(self, index: usize, env: &Env, wall_time_s: f64) -> MetricsRecord {
        let handovers = env.handovers();
        let scenario = env.scenario();
        let completion_steps = if env.outcome() == Outcome::Success {
            self.steps
        } else {
            scenario.max_steps
        };
        MetricsRecord {
            episode_or_trial: index,
            cumulative_reward: self.reward,
            critic_loss_mean: if self.updates > 0 {
                self.loss_sum / self.updates as f64
            } else {
                0.0
            },
            updates: self.updates,
            outcome: env.outcome(),
            steps: self.steps,
            mean_handovers: handovers.iter().map(|&h| h as f64).sum::<f64>()
                / handovers.len().max(1) as f64,
            mean_snr_db: if self.snr_count > 0 {
                self.snr_sum / self.snr_count as f64
            } else {
                0.0
            },
            peak_ap_load: self.peak_load,
            completion_time_s: completion_steps as f64 * scenario.dt_s,
            wall_time_s,
        }
    }
}

pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    atomic_write(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(METRICS_HEADER)?;
        for r in records {
            csv.write_record(r.csv_row())?;
        }
        csv.flush().map_err(csv::Error::from)?;
        Ok(())
    })
}

pub const OUTCOMES_HEADER: [&str; 7] = [
    "episode",
    "outcome",
    "success_total",
    "low_snr_total",
    "high_load_total",
    "timeout_total",
    "success_rate_last_100",
];

/// Running outcome tallies after every episode.
pub fn write_outcomes_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    atomic_write(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(OUTCOMES_HEADER)?;
        let mut totals = [0usize; 4];
        for (k, r) in records.iter().enumerate() {
            if let Some(slot) = Outcome::TERMINAL.iter().position(|&o| o == r.outcome) {
                totals[slot] += 1;
            }
            let window = &records[k.saturating_sub(99)..=k];
            let rate = window.iter().filter(|r| r.is_success()).count() as f64 / window.len() as f64;
            csv.write_record([
                r.episode_or_trial.to_string(),
                r.outcome.to_string(),
                totals[0].to_string(),
                totals[1].to_string(),
                totals[2].to_string(),
                totals[3].to_string(),
                rate.to_string(),
            ])?;
        }
        csv.flush().map_err(csv::Error::from)?;
        Ok(())
    })
}

pub fn write_timings_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    atomic_write(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["episode_or_trial", "wall_time_s"])?;
        for r in records {
            csv.write_record([r.episode_or_trial.to_string(), r.wall_time_s.to_string()])?;
        }
        csv.flush().map_err(csv::Error::from)?;
        Ok(())
    })
}

/// Mean and sample standard deviation; the deviation is 0 for one sample.
pub fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub policy: String,
    pub scenario: String,
    pub trials: usize,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub snr_mean: f64,
    pub snr_std: f64,
    pub handovers_mean: f64,
    pub handovers_std: f64,
    pub steps_mean: f64,
    pub steps_std: f64,
    pub completion_time_mean: f64,
    pub completion_time_std: f64,
    pub peak_load_mean: f64,
    pub peak_load_std: f64,
    pub success_rate: f64,
}

pub const SUMMARY_HEADER: [&str; 16] = [
    "policy",
    "scenario",
    "trials",
    "reward_mean",
    "reward_std",
    "snr_mean",
    "snr_std",
    "handovers_mean",
    "handovers_std",
    "steps_mean",
    "steps_std",
    "completion_time_mean",
    "completion_time_std",
    "peak_load_mean",
    "peak_load_std",
    "success_rate",
];

impl Summary {
    pub fn from_records(policy: &str, scenario: &str, records: &[MetricsRecord]) -> Self {
        let (reward_mean, reward_std) = mean_std(records.iter().map(|r| r.cumulative_reward));
        let (snr_mean, snr_std) = mean_std(records.iter().map(|r| r.mean_snr_db));
        let (handovers_mean, handovers_std) = mean_std(records.iter().map(|r| r.mean_handovers));
        let (steps_mean, steps_std) = mean_std(records.iter().map(|r| r.steps as f64));
        let (completion_time_mean, completion_time_std) =
            mean_std(records.iter().map(|r| r.completion_time_s));
        let (peak_load_mean, peak_load_std) = mean_std(records.iter().map(|r| r.peak_ap_load as f64));
        let success_rate = if records.is_empty() {
            0.0
        } else {
            records.iter().filter(|r| r.is_success()).count() as f64 / records.len() as f64
        };
        Self {
            policy: policy.to_string(),
            scenario: scenario.to_string(),
            trials: records.len(),
            reward_mean,
            reward_std,
            snr_mean,
            snr_std,
            handovers_mean,
            handovers_std,
            steps_mean,
            steps_std,
            completion_time_mean,
            completion_time_std,
            peak_load_mean,
            peak_load_std,
            success_rate,
        }
    }

    fn csv_row(&self) -> Vec<String> {
        vec![
            self.policy.clone(),
            self.scenario.clone(),
            self.trials.to_string(),
            self.reward_mean.to_string(),
            self.reward_std.to_string(),
            self.snr_mean.to_string(),
            self.snr_std.to_string(),
            self.handovers_mean.to_string(),
            self.handovers_std.to_string(),
            self.steps_mean.to_string(),
            self.steps_std.to_string(),
            self.completion_time_mean.to_string(),
            self.completion_time_std.to_string(),
            self.peak_load_mean.to_string(),
            self.peak_load_std.to_string(),
            self.success_rate.to_string(),
        ]
    }
}

pub fn write_summary_csv(path: &Path, rows: &[Summary]) -> Result<()> {
    atomic_write(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(SUMMARY_HEADER)?;
        for r in rows {
            csv.write_record(r.csv_row())?;
        }
        csv.flush().map_err(csv::Error::from)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: usize, reward: f64, outcome: Outcome) -> MetricsRecord {
        MetricsRecord {
            episode_or_trial: i,
            cumulative_reward: reward,
            critic_loss_mean: 0.0,
            updates: 0,
            outcome,
            steps: 10 + i,
            mean_handovers: 0.5,
            mean_snr_db: 30.0,
            peak_ap_load: 2,
            completion_time_s: 10.0,
            wall_time_s: 0.1,
        }
    }

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std([2.0]), (2.0, 0.0));
        let (m, s) = mean_std([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - 1.2909944487358056).abs() < 1e-12);
    }

    #[test]
    fn single_trial_summary_is_identity() {
        let r = rec(0, 123.5, Outcome::Success);
        let s = Summary::from_records("ssf", "scenario1", std::slice::from_ref(&r));
        assert_eq!(s.reward_mean, r.cumulative_reward);
        assert_eq!(s.reward_std, 0.0);
        assert_eq!(s.steps_mean, r.steps as f64);
        assert_eq!(s.success_rate, 1.0);
    }

    #[test]
    fn csv_has_fixed_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_metrics_csv(&p, &[rec(0, 1.0, Outcome::LowSnr), rec(1, 2.0, Outcome::Success)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), METRICS_HEADER.join(","));
        assert_eq!(lines.count(), 2);
        assert!(!text.contains("wall_time"));
    }
}
