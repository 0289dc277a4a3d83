mod common;

use common::{brute_argmax, brute_llf, chi_square_uniform, random_matrix};
use edgesel::channel::ChannelParams;
use edgesel::env::{Env, RewardConfig};
use edgesel::harness::run::run_episode;
use edgesel::harness::seeds::{trial_policy_stream, trial_seed};
use edgesel::harness::stats::paired_t;
use edgesel::harness::{run_eval, RunConfig, Summary};
use edgesel::policies::{
    llf_select, ra_select, ssf_select, AssociationPolicy, PolicyKind, RandomAllocation,
    StrongestSignalFirst,
};
use edgesel::rng::stream;
use edgesel::world::make_scenario2;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn ssf_equals_brute_force_argmax() {
    let mut rng = stream(1, 2, 3);
    for k in 0..10_000 {
        let (n, m) = (rng.random_range(1..=8), rng.random_range(1..=6));
        let mut snr = random_matrix(n, m, -30.0, 70.0, &mut rng);
        if k % 4 == 0 {
            // coarse values force plenty of ties
            snr.mapv_inplace(|v| (v / 25.0).round());
        }
        assert_eq!(ssf_select(&snr).assoc, brute_argmax(&snr), "{snr}");
    }
}

#[test]
fn llf_equals_brute_force_sequential_rule() {
    let mut rng = stream(4, 5, 6);
    for _ in 0..10_000 {
        let n_aps = rng.random_range(1..=5);
        let n = rng.random_range(1..=10);
        let prev: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_aps)).collect();
        let mut loads = vec![0; n_aps];
        for &j in &prev {
            loads[j] += 1;
        }
        assert_eq!(llf_select(&loads, &prev).assoc, brute_llf(n_aps, &prev), "prev {prev:?}");
    }
}

#[test]
fn ra_is_uniform_per_vehicle_and_jointly() {
    let mut rng = stream(8, 9, 10);
    let n_aps = 4;
    let draws = 100_000;
    let mut single = vec![0u64; n_aps];
    let mut pairs = vec![0u64; n_aps * n_aps];
    for _ in 0..draws {
        let a = ra_select(2, n_aps, &mut rng).assoc;
        single[a[0]] += 1;
        pairs[a[0] * n_aps + a[1]] += 1;
    }
    let crit1 = ChiSquared::new((n_aps - 1) as f64).unwrap().inverse_cdf(0.99);
    let crit2 = ChiSquared::new((n_aps * n_aps - 1) as f64).unwrap().inverse_cdf(0.99);
    let (x1, x2) = (chi_square_uniform(&single), chi_square_uniform(&pairs));
    assert!(x1 < crit1, "chi2 {x1} >= {crit1}");
    assert!(x2 < crit2, "chi2 {x2} >= {crit2}");
}

#[test]
fn ssf_serves_the_row_maximum_it_observed() {
    let mut cfg = RunConfig::default();
    cfg.scenario.n_vehicles = 6;
    cfg.scenario.n_aps = 4;
    let mut env = Env::new(cfg.scenario().unwrap(), cfg.channel.clone(), cfg.reward.clone(), 5).unwrap();
    let mut policy = StrongestSignalFirst;
    let mut rng = stream(0, 0, 0);
    let mut steps = 0;
    while !env.is_done() {
        let seen = env.raw_snr().clone();
        let action = policy.select(&env, &mut rng).unwrap();
        for (i, &j) in action.assoc.iter().enumerate() {
            let row_max = seen.row(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(seen[[i, j]], row_max);
        }
        let step = env.step(&action).unwrap();
        for (i, &j) in action.assoc.iter().enumerate() {
            assert_eq!(step.info.serving_snr_db[i], env.raw_snr()[[i, j]]);
        }
        steps += 1;
    }
    assert!(steps >= 1);
}

#[test]
fn ra_hands_over_more_than_ssf_on_scenario2() {
    let scenario = make_scenario2(6, 4, 20.0).unwrap();
    let mut ra = Vec::new();
    let mut ssf = Vec::new();
    for trial in 0..100 {
        let seed = trial_seed(3, trial);
        for (policy, out) in [
            (&mut RandomAllocation as &mut dyn AssociationPolicy, &mut ra),
            (&mut StrongestSignalFirst, &mut ssf),
        ] {
            let mut env = Env::new(scenario.clone(), ChannelParams::default(), RewardConfig::default(), seed).unwrap();
            let mut rng = trial_policy_stream(3, trial);
            out.push(run_episode(&mut env, policy, &mut rng, trial).unwrap().mean_handovers);
        }
    }
    let test = paired_t(&ra, &ssf);
    assert!(test.greater_at(0.05), "{test:?}");
}

#[test]
fn one_trial_summary_is_that_trial() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.policy = PolicyKind::LeastLoadedFirst;
    cfg.trials = 1;
    cfg.out_dir = dir.path().to_path_buf();
    let rep = run_eval(&cfg).unwrap();
    let r = &rep.records[0];
    let want = Summary::from_records("llf", "scenario1", std::slice::from_ref(r));
    assert_eq!(rep.summary, want);
    assert_eq!(rep.summary.reward_mean, r.cumulative_reward);
    assert_eq!(rep.summary.handovers_mean, r.mean_handovers);
    assert_eq!(rep.summary.reward_std, 0.0);
}
