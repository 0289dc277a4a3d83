//! Versioned JSON checkpoints holding all four networks, both optimizer
//! states and the exploration rate.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::Adam;
use super::agent::{AgentConfig, AgentDims, DdpgAgent};
use super::mlp::{Activation, Dense, Gradients, Mlp};
use super::replay::ReplayBuffer;
use crate::harness::atomic_write;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "edgesel-ddpg-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Row-major parameters of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetRecord {
    pub layer_dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub layers: Vec<ParamRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamRecord {
    pub lr: f64,
    pub t: u64,
    pub m: Vec<ParamRecord>,
    pub v: Vec<ParamRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub agent_config: AgentConfig,
    pub dims: AgentDims,
    pub epsilon: f64,
    pub episodes_completed: usize,
    pub actor: NetRecord,
    pub critic: NetRecord,
    pub actor_target: NetRecord,
    pub critic_target: NetRecord,
    pub actor_opt: AdamRecord,
    pub critic_opt: AdamRecord,
}

/// Hash of everything that fixes the network shapes. Learning rates and
/// exploration settings may differ between a checkpoint and its user.
pub fn config_hash(config: &AgentConfig, dims: AgentDims) -> String {
    let (ad, aa) = config.actor_dims(dims.obs_dim(), dims.act_dim());
    let (cd, ca) = config.critic_dims(dims.obs_dim(), dims.act_dim());
    let tags = |a: &[Activation]| a.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(",");
    let canonical = format!(
        "v{CHECKPOINT_VERSION};vehicles={};aps={};actor={:?}[{}];critic={:?}[{}]",
        dims.n_vehicles,
        dims.n_aps,
        ad,
        tags(&aa),
        cd,
        tags(&ca)
    );
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn param_record(w: &Array2<f64>, b: &Array1<f64>) -> ParamRecord {
    ParamRecord {
        rows: w.nrows(),
        cols: w.ncols(),
        weights: w.iter().copied().collect(),
        biases: b.to_vec(),
    }
}

fn net_record(net: &Mlp) -> NetRecord {
    NetRecord {
        layer_dims: net.layer_dims(),
        activations: net.activations(),
        layers: net
            .layers()
            .iter()
            .map(|l| param_record(&l.weights, &l.biases))
            .collect(),
    }
}

fn grads_record(g: &Gradients) -> Vec<ParamRecord> {
    g.weights
        .iter()
        .zip(&g.biases)
        .map(|(w, b)| param_record(w, b))
        .collect()
}

fn arrays(p: &ParamRecord) -> Result<(Array2<f64>, Array1<f64>)> {
    let w = Array2::from_shape_vec((p.rows, p.cols), p.weights.clone())
        .map_err(|e| Error::Checkpoint(format!("weight block: {e}")))?;
    if p.biases.len() != p.cols {
        return Err(Error::Checkpoint(format!(
            "{} biases for {} columns",
            p.biases.len(),
            p.cols
        )));
    }
    Ok((w, Array1::from(p.biases.clone())))
}

fn restore_net(rec: &NetRecord, name: &str) -> Result<Mlp> {
    if rec.activations.len() != rec.layers.len() {
        return Err(Error::Checkpoint(format!("{name}: activation count mismatch")));
    }
    let layers = rec
        .layers
        .iter()
        .zip(&rec.activations)
        .map(|(p, &activation)| {
            let (weights, biases) = arrays(p)?;
            Ok(Dense {
                weights,
                biases,
                activation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let net = Mlp::from_layers(layers).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
    if net.layer_dims() != rec.layer_dims {
        return Err(Error::Checkpoint(format!(
            "{name}: declared dims {:?} but parameters give {:?}",
            rec.layer_dims,
            net.layer_dims()
        )));
    }
    if !net.is_finite() {
        return Err(Error::Checkpoint(format!("{name}: non-finite parameters")));
    }
    Ok(net)
}

fn restore_adam(rec: &AdamRecord, net: &Mlp, name: &str) -> Result<Adam> {
    let mut adam = Adam::new(net, rec.lr);
    adam.t = rec.t;
    if rec.m.len() != net.layers().len() || rec.v.len() != net.layers().len() {
        return Err(Error::Checkpoint(format!("{name}: optimizer layer count mismatch")));
    }
    for k in 0..net.layers().len() {
        let (mw, mb) = arrays(&rec.m[k])?;
        let (vw, vb) = arrays(&rec.v[k])?;
        if mw.dim() != net.layers()[k].weights.dim() || vw.dim() != mw.dim() {
            return Err(Error::Checkpoint(format!("{name}: moment shape mismatch in layer {k}")));
        }
        adam.m.weights[k] = mw;
        adam.m.biases[k] = mb;
        adam.v.weights[k] = vw;
        adam.v.biases[k] = vb;
    }
    Ok(adam)
}

impl DdpgAgent {
    pub fn to_checkpoint(&self, episodes_completed: usize) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config_hash: config_hash(&self.config, self.dims),
            agent_config: self.config.clone(),
            dims: self.dims,
            epsilon: self.epsilon,
            episodes_completed,
            actor: net_record(&self.actor),
            critic: net_record(&self.critic),
            actor_target: net_record(&self.actor_target),
            critic_target: net_record(&self.critic_target),
            actor_opt: AdamRecord {
                lr: self.actor_opt.lr,
                t: self.actor_opt.t,
                m: grads_record(&self.actor_opt.m),
                v: grads_record(&self.actor_opt.v),
            },
            critic_opt: AdamRecord {
                lr: self.critic_opt.lr,
                t: self.critic_opt.t,
                m: grads_record(&self.critic_opt.m),
                v: grads_record(&self.critic_opt.v),
            },
        }
    }

    /// Rebuilds an agent with an empty replay buffer. When `expected` is
    /// given, its architecture hash must match the checkpoint's.
    pub fn from_checkpoint(ck: &Checkpoint, expected: Option<(&AgentConfig, AgentDims)>) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format '{}'", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        let own = config_hash(&ck.agent_config, ck.dims);
        if own != ck.config_hash {
            return Err(Error::Checkpoint("stored config hash does not match its config".into()));
        }
        if let Some((cfg, dims)) = expected {
            let want = config_hash(cfg, dims);
            if want != ck.config_hash {
                return Err(Error::Checkpoint(format!(
                    "checkpoint built for {}x{} with actor {:?} / critic {:?} is incompatible with the run configuration ({}x{}, actor {:?}, critic {:?})",
                    ck.dims.n_vehicles,
                    ck.dims.n_aps,
                    ck.agent_config.actor_hidden,
                    ck.agent_config.critic_hidden,
                    dims.n_vehicles,
                    dims.n_aps,
                    cfg.actor_hidden,
                    cfg.critic_hidden
                )));
            }
        }
        let config = ck.agent_config.clone();
        config.validate()?;
        let actor = restore_net(&ck.actor, "actor")?;
        let critic = restore_net(&ck.critic, "critic")?;
        let actor_target = restore_net(&ck.actor_target, "actor_target")?;
        let critic_target = restore_net(&ck.critic_target, "critic_target")?;
        let (ad, aa) = config.actor_dims(ck.dims.obs_dim(), ck.dims.act_dim());
        let (cd, ca) = config.critic_dims(ck.dims.obs_dim(), ck.dims.act_dim());
        for (net, dims, acts, name) in [
            (&actor, &ad, &aa, "actor"),
            (&actor_target, &ad, &aa, "actor_target"),
            (&critic, &cd, &ca, "critic"),
            (&critic_target, &cd, &ca, "critic_target"),
        ] {
            if &net.layer_dims() != dims || &net.activations() != acts {
                return Err(Error::Checkpoint(format!("{name}: architecture does not match config")));
            }
        }
        Ok(Self {
            actor_opt: restore_adam(&ck.actor_opt, &actor, "actor")?,
            critic_opt: restore_adam(&ck.critic_opt, &critic, "critic")?,
            buffer: ReplayBuffer::new(config.buffer_capacity, ck.dims.obs_dim(), ck.dims.act_dim())?,
            epsilon: ck.epsilon,
            actor,
            critic,
            actor_target,
            critic_target,
            dims: ck.dims,
            config,
        })
    }

    pub fn save_checkpoint(&self, path: &Path, episodes_completed: usize) -> Result<()> {
        let ck = self.to_checkpoint(episodes_completed);
        atomic_write(path, |w| {
            serde_json::to_writer(&mut *w, &ck).map_err(|e| Error::Checkpoint(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))
        })
    }

    pub fn load_checkpoint(path: &Path, expected: Option<(&AgentConfig, AgentDims)>) -> Result<(Self, usize)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Ok((Self::from_checkpoint(&ck, expected)?, ck.episodes_completed))
    }
}
