use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use edgesel::harness::run::run_train_with;
use edgesel::harness::selftest::run_self_test;
use edgesel::harness::{compare, run_eval, RunConfig};
use edgesel::policies::PolicyKind;
use edgesel::Error;

#[derive(Parser)]
#[command(name = "edgesel", version, about = "Vehicle-to-edge association simulator")]
struct Cli {
    /// Scenario override: 1, 2 or custom:<file>.
    #[arg(long, global = true)]
    scenario: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a DDPG agent.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Print a progress line every this many episodes (0 = quiet).
        #[arg(long, default_value_t = 100)]
        log_every: usize,
    },
    /// Evaluate one policy over seeded trials.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        policy: PolicyKind,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Evaluate several policies on shared seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated list, e.g. ddpg,ra,ssf,llf.
        #[arg(long, value_delimiter = ',', required = true)]
        policies: Vec<PolicyKind>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the built-in analytic checks.
    SelfTest,
}

fn load(path: &PathBuf, scenario: Option<&str>) -> edgesel::Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = scenario {
        cfg.apply_scenario_arg(s)?;
    }
    Ok(cfg)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Usage(_) | Error::Config(_) | Error::Domain(_) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> edgesel::Result<u8> {
    let scenario = cli.scenario.as_deref();
    match cli.command {
        Command::Train {
            config,
            episodes,
            seed,
            out_dir,
            log_every,
        } => {
            let mut cfg = load(&config, scenario)?;
            cfg.policy = PolicyKind::Ddpg;
            if let Some(n) = episodes {
                cfg.episodes = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = out_dir {
                cfg.out_dir = d;
            }
            let report = run_train_with(&cfg, |r| {
                if log_every > 0 && (r.episode_or_trial + 1) % log_every == 0 {
                    eprintln!(
                        "episode {:>6}  reward {:>10.2}  critic loss {:>10.4}  {}",
                        r.episode_or_trial + 1,
                        r.cumulative_reward,
                        r.critic_loss_mean,
                        r.outcome
                    );
                }
            })?;
            println!("{}", report.convergence_summary());
        }
        Command::Eval {
            config,
            policy,
            checkpoint,
            trials,
            seed,
            out_dir,
        } => {
            let mut cfg = load(&config, scenario)?;
            cfg.policy = policy;
            if checkpoint.is_some() {
                cfg.checkpoint = checkpoint;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = out_dir {
                cfg.out_dir = d;
            }
            let rep = run_eval(&cfg)?;
            let s = &rep.summary;
            println!(
                "{} on {}: {} trials, reward {:.2} ± {:.2}, snr {:.2} dB, handovers {:.3}, steps {:.1}, success {:.2}",
                s.policy, s.scenario, s.trials, s.reward_mean, s.reward_std, s.snr_mean,
                s.handovers_mean, s.steps_mean, s.success_rate
            );
        }
        Command::Compare {
            config,
            policies,
            checkpoint,
            trials,
            seed,
            out_dir,
        } => {
            let mut base = load(&config, scenario)?;
            if checkpoint.is_some() {
                base.checkpoint = checkpoint;
            }
            if let Some(t) = trials {
                base.trials = t;
            }
            if let Some(s) = seed {
                base.seed = s;
            }
            if let Some(d) = out_dir {
                base.out_dir = d;
            }
            let configs: Vec<RunConfig> = policies
                .into_iter()
                .map(|p| RunConfig {
                    policy: p,
                    ..base.clone()
                })
                .collect();
            let rep = compare(&configs)?;
            println!("policy  reward_mean  snr_mean  handovers_mean  steps_mean  success_rate");
            for s in rep.summaries() {
                println!(
                    "{:<6}  {:>11.2}  {:>8.2}  {:>14.3}  {:>10.1}  {:>12.2}",
                    s.policy, s.reward_mean, s.snr_mean, s.handovers_mean, s.steps_mean, s.success_rate
                );
            }
        }
        Command::SelfTest => {
            let checks = run_self_test();
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
