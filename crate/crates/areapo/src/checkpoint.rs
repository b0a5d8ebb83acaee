//! Versioned binary checkpoints holding everything needed to resume or
//! evaluate a run: both networks, the shared optimizer state, observation
//! normalization statistics, gain estimates, and the configuration snapshot.
//! The encoding is fixed-layout little-endian, so identical states produce
//! identical bytes.

use std::path::Path;

use crate::env::{EnvConfig, RunningStats};
use crate::error::{Error, Result};
use crate::learner::{GainEstimates, LearnerConfig};
use crate::nn::{Adam, Critic, GaussianPolicy};
use crate::rng;

const MAGIC: &[u8; 4] = b"ARCP";
const VERSION: u32 = 1;
/// Upper bound on any stored vector length; a corrupt length field fails
/// fast instead of attempting a giant allocation.
const MAX_LEN: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub env_cfg: EnvConfig,
    pub learner_cfg: LearnerConfig,
    pub policy: GaussianPolicy,
    pub critic: Critic,
    pub opt: Adam,
    pub stats: RunningStats,
    pub gains: GainEstimates,
    pub iteration: u64,
    pub frames: u64,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::with_capacity(1 << 20) }
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.f64(v);
        }
    }

    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.buf.extend_from_slice(b);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "truncated: wanted {} bytes at offset {}, file has {}",
                n,
                self.pos,
                self.buf.len()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self, what: &str) -> Result<usize> {
        let n = self.u64()?;
        if n > MAX_LEN {
            return Err(Error::Checkpoint(format!("implausible {what} length {n}")));
        }
        Ok(n as usize)
    }

    fn f64s(&mut self, what: &str) -> Result<Vec<f64>> {
        let n = self.len(what)?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    fn bytes(&mut self, what: &str) -> Result<&'a [u8]> {
        let n = self.len(what)?;
        self.take(n)
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::new();
        w.buf.extend_from_slice(MAGIC);
        w.buf.extend_from_slice(&VERSION.to_le_bytes());

        let env_toml = toml::to_string(&self.env_cfg)
            .map_err(|e| Error::Checkpoint(format!("env config did not serialize: {e}")))?;
        let learner_toml = toml::to_string(&self.learner_cfg)
            .map_err(|e| Error::Checkpoint(format!("learner config did not serialize: {e}")))?;
        w.bytes(env_toml.as_bytes());
        w.bytes(learner_toml.as_bytes());

        let mut p = vec![0.0; self.policy.param_count()];
        self.policy.write_params(&mut p);
        w.f64s(&p);
        let mut c = vec![0.0; self.critic.param_count()];
        self.critic.write_params(&mut c);
        w.f64s(&c);

        w.f64(self.opt.lr);
        w.f64(self.opt.beta1);
        w.f64(self.opt.beta2);
        w.f64(self.opt.eps);
        w.u64(self.opt.t);
        w.f64s(&self.opt.m);
        w.f64s(&self.opt.v);

        w.u64(self.stats.count);
        for i in 0..4 {
            w.f64(self.stats.mean[i]);
        }
        for i in 0..4 {
            w.f64(self.stats.m2[i]);
        }

        w.f64(self.gains.reward_gain);
        w.f64(self.gains.entropy_gain);
        w.u64(self.iteration);
        w.u64(self.frames);
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic (not a checkpoint file)".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (this build reads {VERSION})"
            )));
        }
        let env_toml = std::str::from_utf8(r.bytes("env config")?)
            .map_err(|_| Error::Checkpoint("env config is not UTF-8".into()))?;
        let env_cfg: EnvConfig = toml::from_str(env_toml)
            .map_err(|e| Error::Checkpoint(format!("env config did not parse: {e}")))?;
        let learner_toml = std::str::from_utf8(r.bytes("learner config")?)
            .map_err(|_| Error::Checkpoint("learner config is not UTF-8".into()))?;
        let learner_cfg: LearnerConfig = toml::from_str(learner_toml)
            .map_err(|e| Error::Checkpoint(format!("learner config did not parse: {e}")))?;

        let policy_params = r.f64s("policy parameters")?;
        let critic_params = r.f64s("critic parameters")?;

        // Rebuild the networks at the configured shapes, then overwrite every
        // parameter. A count mismatch means the file and its embedded config
        // disagree.
        let mut scratch = rng::stream(0, "checkpoint-rebuild");
        let mut policy = GaussianPolicy::new(4, &learner_cfg.policy_hidden, 0.0, &mut scratch)?;
        if policy.param_count() != policy_params.len() {
            return Err(Error::Checkpoint(format!(
                "policy has {} parameters but file stores {}",
                policy.param_count(),
                policy_params.len()
            )));
        }
        policy.read_params(&policy_params);
        let mut critic = Critic::new(4, &learner_cfg.critic_hidden, &mut scratch)?;
        if critic.param_count() != critic_params.len() {
            return Err(Error::Checkpoint(format!(
                "critic has {} parameters but file stores {}",
                critic.param_count(),
                critic_params.len()
            )));
        }
        critic.read_params(&critic_params);

        let mut opt = Adam::new(1.0, 0);
        opt.lr = r.f64()?;
        opt.beta1 = r.f64()?;
        opt.beta2 = r.f64()?;
        opt.eps = r.f64()?;
        opt.t = r.u64()?;
        opt.m = r.f64s("adam first moments")?;
        opt.v = r.f64s("adam second moments")?;
        let n_params = policy_params.len() + critic_params.len();
        if opt.m.len() != n_params || opt.v.len() != n_params {
            return Err(Error::Checkpoint(format!(
                "optimizer tracks {} parameters but networks have {n_params}",
                opt.m.len()
            )));
        }

        let mut stats = RunningStats::new();
        stats.count = r.u64()?;
        for i in 0..4 {
            stats.mean[i] = r.f64()?;
        }
        for i in 0..4 {
            stats.m2[i] = r.f64()?;
        }

        let gains = GainEstimates { reward_gain: r.f64()?, entropy_gain: r.f64()? };
        let iteration = r.u64()?;
        let frames = r.u64()?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after checkpoint payload",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            env_cfg,
            learner_cfg,
            policy,
            critic,
            opt,
            stats,
            gains,
            iteration,
            frames,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| {
            Error::Checkpoint(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_bytes(&bytes)
    }
}
