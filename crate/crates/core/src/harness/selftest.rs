//! Fast built-in sanity checks run by `edgesel self-test`.

use std::fmt;

use ndarray::Array2;
use rand::Rng;

use crate::channel::{breakpoint_loss, noise_power, ChannelParams};
use crate::ddpg::{soft_update, ActMode, AgentConfig, AgentDims, DdpgAgent, Mlp, Activation};
use crate::env::{r_ap_load, r_handover, r_snr};
use crate::policies::{argmax_row, llf_select, ssf_select};
use crate::rng::{self, purpose};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{status}] {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn channel_checks(out: &mut Vec<Check>) {
    let p = ChannelParams::default();
    let n = noise_power(p.op_bandwidth_hz, p.noise_figure_db).unwrap_or(f64::NAN);
    out.push(check(
        "noise power",
        ((n - 4.0124e-13) / 4.0124e-13).abs() < 5e-4,
        format!("{n:.5e} W"),
    ));
    let l5 = breakpoint_loss(5.0, &p);
    let l50 = breakpoint_loss(50.0, &p);
    out.push(check(
        "path loss",
        (l5 - 60.4).abs() <= 0.1 && (l50 - 95.4).abs() <= 0.1,
        format!("{l5:.3} dB at 5 m, {l50:.3} dB at 50 m"),
    ));
}

fn reward_checks(out: &mut Vec<Check>) {
    let vals = [
        (r_snr(0.0), -1.0, 1e-12),
        (r_snr(1.0), 1.0, 1e-12),
        (r_snr(0.5), -0.2449, 1e-4),
        (r_ap_load(6, 6, 0.0).unwrap_or(f64::NAN), -1.0, 1e-12),
        (r_ap_load(0, 6, 0.0).unwrap_or(f64::NAN), (-10.0f64).exp(), 1e-9),
        (r_handover(0, 0.5), -1.0, 1e-12),
    ];
    let worst = vals
        .iter()
        .map(|(got, want, tol)| (got - want).abs() / tol)
        .fold(0.0, f64::max);
    out.push(check(
        "reward terms",
        worst <= 1.0,
        format!("worst error {worst:.3} x tolerance"),
    ));
}

fn learner_checks(out: &mut Vec<Check>) {
    let mut r = rng::stream(1, purpose::INIT, 0);
    let dims = [3, 4, 2];
    let acts = [Activation::Relu, Activation::Sigmoid];
    let ok: crate::Result<f64> = (|| {
        let online = Mlp::init(&dims, &acts, &mut r)?;
        let mut worst: f64 = 0.0;
        for tau in [0.0, 0.003, 1.0] {
            let before = Mlp::init(&dims, &acts, &mut r)?;
            let mut target = before.clone();
            soft_update(&mut target, &online, tau)?;
            for ((t, b), o) in target.layers().iter().zip(before.layers()).zip(online.layers()) {
                let want = &o.weights * tau + &b.weights * (1.0 - tau);
                worst = worst.max((&t.weights - &want).iter().fold(0.0, |m, d| m.max(d.abs())));
            }
        }
        Ok(worst)
    })();
    out.push(match ok {
        Ok(w) => check("soft update", w < 1e-12, format!("max deviation {w:.2e}")),
        Err(e) => check("soft update", false, e.to_string()),
    });

    let config = AgentConfig {
        actor_hidden: vec![4],
        critic_hidden: vec![4],
        ..AgentConfig::default()
    };
    let dims = AgentDims { n_vehicles: 1, n_aps: 2 };
    let result: crate::Result<(f64, f64)> = (|| {
        let mut agent = DdpgAgent::new(config, dims, &mut r)?;
        let obs = vec![0.0; dims.obs_dim()];
        let calls = 1000;
        for _ in 0..calls {
            agent.act(&obs, ActMode::Explore, &mut r)?;
        }
        Ok((agent.epsilon(), 0.9999f64.powi(calls).max(0.05)))
    })();
    out.push(match result {
        Ok((got, want)) => check(
            "epsilon schedule",
            (got - want).abs() <= 1e-12 * want,
            format!("{got:.12} after 1000 calls"),
        ),
        Err(e) => check("epsilon schedule", false, e.to_string()),
    });
}

fn baseline_checks(out: &mut Vec<Check>) {
    let mut r = rng::stream(2, purpose::POLICY, 0);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let m = Array2::from_shape_fn((5, 4), |_| r.random_range(-20.0..60.0));
        let want: Vec<usize> = m
            .rows()
            .into_iter()
            .map(|row| (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b }))
            .collect();
        if ssf_select(&m).assoc != want {
            mismatches += 1;
        }
    }
    out.push(check("ssf argmax", mismatches == 0, format!("{mismatches} mismatches in 1000")));

    let a = llf_select(&[3, 1, 1], &[1]).assoc;
    let b = llf_select(&[3, 1, 2], &[0]).assoc;
    out.push(check(
        "llf examples",
        a == [1] && b == [1] && argmax_row([1.0, 3.0, 3.0]) == 1,
        format!("{a:?} {b:?}"),
    ));
}

/// Runs every check. All must pass for a healthy build.
pub fn run_self_test() -> Vec<Check> {
    let mut out = Vec::new();
    channel_checks(&mut out);
    reward_checks(&mut out);
    learner_checks(&mut out);
    baseline_checks(&mut out);
    out
}
