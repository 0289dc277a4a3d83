//! Legacy association baselines and the common policy interface.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{AssociationAction, Env};
use crate::rng::SimRng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    #[serde(rename = "ra")]
    Random,
    #[serde(rename = "ssf")]
    StrongestSignalFirst,
    #[serde(rename = "llf")]
    LeastLoadedFirst,
    Ddpg,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Ddpg,
        PolicyKind::Random,
        PolicyKind::StrongestSignalFirst,
        PolicyKind::LeastLoadedFirst,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Random => "ra",
            PolicyKind::StrongestSignalFirst => "ssf",
            PolicyKind::LeastLoadedFirst => "llf",
            PolicyKind::Ddpg => "ddpg",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ra" | "random" => Ok(PolicyKind::Random),
            "ssf" => Ok(PolicyKind::StrongestSignalFirst),
            "llf" => Ok(PolicyKind::LeastLoadedFirst),
            "ddpg" => Ok(PolicyKind::Ddpg),
            other => Err(Error::usage(format!(
                "unknown policy '{other}' (expected ddpg, ra, ssf or llf)"
            ))),
        }
    }
}

/// Anything that maps the current environment state to an association.
pub trait AssociationPolicy {
    fn kind(&self) -> PolicyKind;

    fn select(&mut self, env: &Env, rng: &mut SimRng) -> Result<AssociationAction>;
}

/// Index of the largest value, lowest index on ties. NaNs never win.
pub fn argmax_row(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (j, v) in values.into_iter().enumerate() {
        if v > best_val {
            best = j;
            best_val = v;
        }
    }
    best
}

pub fn ra_select<R: Rng + ?Sized>(n_vehicles: usize, n_aps: usize, rng: &mut R) -> AssociationAction {
    let assoc = (0..n_vehicles).map(|_| rng.random_range(0..n_aps)).collect();
    AssociationAction::from_indices(assoc, n_aps)
}

pub fn ssf_select(snr_db: &Array2<f64>) -> AssociationAction {
    let assoc = snr_db
        .rows()
        .into_iter()
        .map(|r| argmax_row(r.iter().copied()))
        .collect();
    AssociationAction::from_indices(assoc, snr_db.ncols())
}

/// Sequential least-loaded assignment. `ap_loads` are the loads of the
/// association in effect; every vehicle is counted on its previous AP and
/// moves update the running loads before the next vehicle decides.
pub fn llf_select(ap_loads: &[usize], prev_assoc: &[usize]) -> AssociationAction {
    let n_aps = ap_loads.len();
    let mut loads = ap_loads.to_vec();
    let mut assoc = Vec::with_capacity(prev_assoc.len());
    for &prev in prev_assoc {
        let min = *loads.iter().min().expect("at least one AP");
        let pick = if prev < n_aps && loads[prev] == min {
            prev
        } else {
            loads.iter().position(|&l| l == min).expect("minimum exists")
        };
        if pick != prev && prev < n_aps {
            loads[prev] = loads[prev].saturating_sub(1);
            loads[pick] += 1;
        } else if prev >= n_aps {
            loads[pick] += 1;
        }
        assoc.push(pick);
    }
    AssociationAction::from_indices(assoc, n_aps)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct RandomAllocation;

#[derive(Debug, Default, Clone, Copy)]
pub struct StrongestSignalFirst;

#[derive(Debug, Default, Clone, Copy)]
pub struct LeastLoadedFirst;

impl AssociationPolicy for RandomAllocation {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Random
    }

    fn select(&mut self, env: &Env, rng: &mut SimRng) -> Result<AssociationAction> {
        Ok(ra_select(env.n_vehicles(), env.n_aps(), rng))
    }
}

impl AssociationPolicy for StrongestSignalFirst {
    fn kind(&self) -> PolicyKind {
        PolicyKind::StrongestSignalFirst
    }

    fn select(&mut self, env: &Env, _rng: &mut SimRng) -> Result<AssociationAction> {
        Ok(ssf_select(env.raw_snr()))
    }
}

impl AssociationPolicy for LeastLoadedFirst {
    fn kind(&self) -> PolicyKind {
        PolicyKind::LeastLoadedFirst
    }

    fn select(&mut self, env: &Env, _rng: &mut SimRng) -> Result<AssociationAction> {
        Ok(llf_select(&env.loads(), env.assoc()))
    }
}

/// Boxed baseline for a kind. DDPG needs a trained actor and is built by
/// the learner instead.
pub fn baseline(kind: PolicyKind) -> Option<Box<dyn AssociationPolicy + Send>> {
    match kind {
        PolicyKind::Random => Some(Box::new(RandomAllocation)),
        PolicyKind::StrongestSignalFirst => Some(Box::new(StrongestSignalFirst)),
        PolicyKind::LeastLoadedFirst => Some(Box::new(LeastLoadedFirst)),
        PolicyKind::Ddpg => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn ssf_picks_strongest() {
        let a = ssf_select(&array![[10.0, 22.0, 15.0], [20.0, 20.0, 3.0]]);
        assert_eq!(a.assoc, vec![1, 0]);
        assert_eq!(a.scores, array![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]);
    }

    #[test]
    fn llf_examples() {
        assert_eq!(llf_select(&[3, 1, 1], &[1]).assoc, vec![1]);
        assert_eq!(llf_select(&[3, 1, 2], &[0]).assoc, vec![1]);
    }

    #[test]
    fn llf_running_loads() {
        // both vehicles sit on AP0; the first leaves, the second then ties and stays
        let a = llf_select(&[2, 0], &[0, 0]);
        assert_eq!(a.assoc, vec![1, 0]);
    }

    #[test]
    fn ra_single_ap() {
        let mut r = rng::stream(3, 3, 3);
        for _ in 0..100 {
            assert_eq!(ra_select(5, 1, &mut r).assoc, vec![0; 5]);
        }
    }

    #[test]
    fn ra_reproducible() {
        let draw = || {
            let mut r = rng::stream(8, 1, 0);
            (0..20).map(|_| ra_select(6, 4, &mut r).assoc).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn parse_kinds() {
        for k in PolicyKind::ALL {
            assert_eq!(k.as_str().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("greedy".parse::<PolicyKind>().is_err());
    }

    proptest! {
        #[test]
        fn ssf_invariant_under_monotone_transform(
            rows in prop::collection::vec(prop::collection::vec(-50.0f64..80.0, 4), 1..8)
        ) {
            let n = rows.len();
            let m = Array2::from_shape_vec((n, 4), rows.concat()).unwrap();
            let t = m.mapv(|v| (v / 7.0).exp() * 3.0 + 1.0);
            prop_assert_eq!(ssf_select(&m).assoc, ssf_select(&t).assoc);
        }

        #[test]
        fn llf_never_picks_a_strictly_heavier_ap(
            prev in prop::collection::vec(0usize..5, 1..12)
        ) {
            let n_aps = 5;
            let mut loads = vec![0; n_aps];
            for &j in &prev { loads[j] += 1; }
            let out = llf_select(&loads, &prev);
            // replay with the running loads and check each decision
            let mut running = loads.clone();
            for (i, &pick) in out.assoc.iter().enumerate() {
                let min = *running.iter().min().unwrap();
                prop_assert_eq!(running[pick], min);
                if pick != prev[i] {
                    running[prev[i]] -= 1;
                    running[pick] += 1;
                }
            }
            prop_assert!(out.assoc.iter().all(|&j| j < n_aps));
        }
    }
}
