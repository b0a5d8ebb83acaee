//! The training algorithm: vectorized rollout collection, generalized
//! advantage estimation for the average-reward setting (run twice, once for
//! the task reward and once for the entropy pseudo-reward), incremental gain
//! tracking, and clipped-surrogate policy/critic updates on a single flat
//! Adam parameter vector.

use ndarray::{Array1, Array2};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::checkpoint::Checkpoint;
use crate::env::{EnvConfig, VecEnv};
use crate::error::{Error, Result};
use crate::eval::{self, NoiseSpec, ScoreSpec};
use crate::nn::{Adam, Critic, GaussianPolicy};
use crate::rng;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Algorithm hyperparameters. The defaults are the tuned values used for
/// both swing-up tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Entropy temperature τ weighting the pseudo-reward `−τ ln π(a|s)`.
    pub tau: f64,
    /// GAE decay for the task-reward advantage.
    pub lambda: f64,
    /// GAE decay for the entropy advantage.
    pub lambda_entropy: f64,
    /// Clipped-surrogate radius ε.
    pub clip_eps: f64,
    /// Step size η for the incremental gain estimates.
    pub gain_lr: f64,
    /// Adam learning rate.
    pub lr: f64,
    /// Weight c₂ on the entropy advantage in the combined advantage.
    pub entropy_adv_coef: f64,
    /// Weight on the critic loss.
    pub vf_coef: f64,
    pub n_envs: usize,
    pub rollout_steps: usize,
    /// Optimization epochs per rollout.
    pub epochs: usize,
    pub minibatch_size: usize,
    /// Normalize the combined advantage per minibatch.
    pub normalize_adv: bool,
    pub max_grad_norm: f64,
    pub log_std_init: f64,
    /// Ceiling on log_std, enforced after every optimizer step. The entropy
    /// pseudo-reward grows without bound in log_std while torque clamping
    /// saturates the behavior, so the unconstrained objective is maximized by
    /// σ → ∞ and the mean net stops receiving gradient; the ceiling keeps the
    /// exploration width in the regime where the reward channel can push back.
    pub log_std_max: f64,
    /// Ceiling at `total_frames`; the ceiling moves linearly from
    /// `log_std_max` to this value as training progresses. Equal values (the
    /// default) keep it constant. Annealing matters for stabilization tasks:
    /// under wide exploration noise an upright hold is worth little to the
    /// critic, so the catch only becomes learnable once the noise shrinks.
    pub log_std_max_final: f64,
    pub policy_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Per-step random truncation probability, injected into the
    /// environment's reset spec by `train`.
    pub p_trunc: f64,
    pub total_frames: u64,
    /// Evaluate (and checkpoint) every this many iterations.
    pub eval_interval: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            tau: 2.0,
            lambda: 0.8,
            lambda_entropy: 0.6,
            clip_eps: 0.05,
            gain_lr: 0.01,
            lr: 5e-4,
            entropy_adv_coef: 0.5,
            vf_coef: 0.25,
            n_envs: 64,
            rollout_steps: 128,
            epochs: 6,
            minibatch_size: 1024,
            normalize_adv: true,
            max_grad_norm: 10.0,
            log_std_init: -1.0,
            log_std_max: 0.0,
            log_std_max_final: 0.0,
            policy_hidden: vec![256, 256],
            critic_hidden: vec![512, 512],
            p_trunc: 1e-3,
            total_frames: 5_000_000,
            eval_interval: 100,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("clip_eps", self.clip_eps),
            ("gain_lr", self.gain_lr),
            ("lr", self.lr),
            ("vf_coef", self.vf_coef),
            ("max_grad_norm", self.max_grad_norm),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::Config("tau must be >= 0".into()));
        }
        for (name, l) in [("lambda", self.lambda), ("lambda_entropy", self.lambda_entropy)] {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::Config(format!("{name} must be in [0,1], got {l}")));
            }
        }
        if self.clip_eps >= 1.0 {
            return Err(Error::Config("clip_eps must be < 1".into()));
        }
        if !(self.entropy_adv_coef.is_finite() && self.entropy_adv_coef >= 0.0) {
            return Err(Error::Config("entropy_adv_coef must be >= 0".into()));
        }
        if self.n_envs == 0
            || self.rollout_steps == 0
            || self.epochs == 0
            || self.minibatch_size == 0
            || self.eval_interval == 0
        {
            return Err(Error::Config("batch shape fields must all be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.p_trunc) {
            return Err(Error::Config("p_trunc must be in [0,1)".into()));
        }
        if !self.log_std_init.is_finite() {
            return Err(Error::Config("log_std_init must be finite".into()));
        }
        if !self.log_std_max.is_finite() || self.log_std_init > self.log_std_max {
            return Err(Error::Config(format!(
                "log_std_max must be finite and >= log_std_init, got {} (init {})",
                self.log_std_max, self.log_std_init
            )));
        }
        if !self.log_std_max_final.is_finite() || self.log_std_max_final > self.log_std_max {
            return Err(Error::Config(format!(
                "log_std_max_final must be finite and <= log_std_max, got {} (max {})",
                self.log_std_max_final, self.log_std_max
            )));
        }
        if self.total_frames == 0 {
            return Err(Error::Config("total_frames must be >= 1".into()));
        }
        Ok(())
    }

    /// Frames gathered per learner iteration.
    pub fn frames_per_iter(&self) -> u64 {
        (self.n_envs * self.rollout_steps) as u64
    }

    /// log_std ceiling in effect after `frames_done` frames: linear from
    /// `log_std_max` at the start to `log_std_max_final` at `total_frames`.
    pub fn log_std_ceiling(&self, frames_done: u64) -> f64 {
        let p = (frames_done as f64 / self.total_frames as f64).clamp(0.0, 1.0);
        self.log_std_max + (self.log_std_max_final - self.log_std_max) * p
    }
}

/// Running estimates of the long-run average reward ρ̂ and average entropy
/// pseudo-reward ρ̂_H. Both start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GainEstimates {
    pub reward_gain: f64,
    pub entropy_gain: f64,
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

/// One rollout of `steps × n_envs` transitions, flattened as
/// `index = t·n_envs + e`. `next_values` / `next_entropy_values` hold critic
/// bootstraps only where they are needed — at truncated transitions (value of
/// the pre-reset terminal observation) and on the last row (value of the
/// observation after the final step); everywhere else they are NaN and must
/// not be read.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub n_envs: usize,
    pub steps: usize,
    pub obs: Array2<f64>,
    pub actions: Vec<f64>,
    pub pre_clamp: Array1<f64>,
    pub log_prob_old: Array1<f64>,
    pub rewards: Vec<f64>,
    /// Entropy pseudo-rewards `−τ·log_prob_old`, fixed at collection time.
    pub entropy_rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub entropy_values: Vec<f64>,
    pub truncated: Vec<bool>,
    pub next_values: Vec<f64>,
    pub next_entropy_values: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.steps * self.n_envs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn checked(self) -> Result<Self> {
        let n = self.len();
        if self.obs.nrows() != n
            || self.actions.len() != n
            || self.pre_clamp.len() != n
            || self.log_prob_old.len() != n
            || self.rewards.len() != n
            || self.entropy_rewards.len() != n
            || self.values.len() != n
            || self.entropy_values.len() != n
            || self.truncated.len() != n
            || self.next_values.len() != n
            || self.next_entropy_values.len() != n
        {
            return Err(Error::InvalidBatch("field lengths disagree".into()));
        }
        Ok(self)
    }
}

/// Gathers `steps` synchronous steps from every environment. `current_obs`
/// is the persistent caller-owned frontier: the observations the policy acts
/// on first, updated in place to the post-rollout frontier.
///
/// Each distinct observation gets exactly one critic forward: acting
/// observations per step, terminal and frontier observations in one batch at
/// the end.
pub fn collect_rollouts(
    policy: &GaussianPolicy,
    critic: &Critic,
    venv: &mut VecEnv,
    current_obs: &mut [[f64; 4]],
    steps: usize,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<RolloutBatch> {
    let n = venv.len();
    if current_obs.len() != n {
        return Err(Error::InvalidInput(format!(
            "got {} frontier observations for {} environments",
            current_obs.len(),
            n
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("rollout needs at least one step".into()));
    }
    let total = steps * n;
    let mut obs = Array2::<f64>::zeros((total, 4));
    let mut actions = vec![0.0; total];
    let mut pre_clamp = Array1::<f64>::zeros(total);
    let mut log_prob_old = Array1::<f64>::zeros(total);
    let mut rewards = vec![0.0; total];
    let mut entropy_rewards = vec![0.0; total];
    let mut values = vec![0.0; total];
    let mut entropy_values = vec![0.0; total];
    let mut truncated = vec![false; total];
    let mut next_values = vec![f64::NAN; total];
    let mut next_entropy_values = vec![f64::NAN; total];
    // (flat index, terminal observation) pairs, valued in one batch below.
    let mut terminals: Vec<(usize, [f64; 4])> = Vec::new();

    for t in 0..steps {
        let mut step_obs = Array2::<f64>::zeros((n, 4));
        for (e, o) in current_obs.iter().enumerate() {
            for k in 0..4 {
                step_obs[(e, k)] = o[k];
                obs[(t * n + e, k)] = o[k];
            }
        }
        let sampled = policy.act_batch(&step_obs, rng)?;
        let (vals, _) = critic.values_batch(&step_obs)?;
        let outcomes = venv.step(&sampled.iter().map(|s| s.action).collect::<Vec<_>>())?;
        for e in 0..n {
            let i = t * n + e;
            actions[i] = sampled[e].action;
            pre_clamp[i] = sampled[e].pre_clamp;
            log_prob_old[i] = sampled[e].log_prob;
            rewards[i] = outcomes[e].reward;
            entropy_rewards[i] = -tau * sampled[e].log_prob;
            values[i] = vals[(e, 0)];
            entropy_values[i] = vals[(e, 1)];
            truncated[i] = outcomes[e].truncated;
            if let Some(term) = outcomes[e].terminal_observation {
                terminals.push((i, term));
            }
            current_obs[e] = outcomes[e].observation;
        }
    }

    // Frontier bootstraps fill the last row first; truncated transitions in
    // the last row are then overwritten by their terminal-observation values.
    let mut frontier = Array2::<f64>::zeros((n, 4));
    for (e, o) in current_obs.iter().enumerate() {
        for k in 0..4 {
            frontier[(e, k)] = o[k];
        }
    }
    let (fvals, _) = critic.values_batch(&frontier)?;
    for e in 0..n {
        let i = (steps - 1) * n + e;
        next_values[i] = fvals[(e, 0)];
        next_entropy_values[i] = fvals[(e, 1)];
    }
    if !terminals.is_empty() {
        let mut tobs = Array2::<f64>::zeros((terminals.len(), 4));
        for (row, (_, o)) in terminals.iter().enumerate() {
            for k in 0..4 {
                tobs[(row, k)] = o[k];
            }
        }
        let (tvals, _) = critic.values_batch(&tobs)?;
        for (row, &(i, _)) in terminals.iter().enumerate() {
            next_values[i] = tvals[(row, 0)];
            next_entropy_values[i] = tvals[(row, 1)];
        }
    }

    RolloutBatch {
        n_envs: n,
        steps,
        obs,
        actions,
        pre_clamp,
        log_prob_old,
        rewards,
        entropy_rewards,
        values,
        entropy_values,
        truncated,
        next_values,
        next_entropy_values,
    }
    .checked()
}

// ---------------------------------------------------------------------------
// Advantage estimation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct GaeOutput {
    pub advantage: Vec<f64>,
    pub entropy_advantage: Vec<f64>,
    pub value_target: Vec<f64>,
    pub entropy_value_target: Vec<f64>,
}

/// Average-reward GAE over both reward channels. Per transition the TD error
/// is `δ = r − ρ̂ + v(s') − v(s)` (no discounting); the advantage recursion
/// `A_t = δ_t + λ·A_{t+1}` restarts at truncations, where `v(s')` is the
/// critic bootstrap of the pre-reset terminal observation. Value targets are
/// `advantage + v(s)`.
pub fn dual_gae(
    batch: &RolloutBatch,
    gains: GainEstimates,
    lambda: f64,
    lambda_entropy: f64,
) -> Result<GaeOutput> {
    for (name, l) in [("lambda", lambda), ("lambda_entropy", lambda_entropy)] {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::InvalidInput(format!("{name} must be in [0,1], got {l}")));
        }
    }
    let (n, steps) = (batch.n_envs, batch.steps);
    let total = steps * n;
    if batch.len() != total || batch.values.len() != total {
        return Err(Error::InvalidBatch("batch shape fields disagree".into()));
    }
    let mut advantage = vec![0.0; total];
    let mut entropy_advantage = vec![0.0; total];
    let mut value_target = vec![0.0; total];
    let mut entropy_value_target = vec![0.0; total];
    for e in 0..n {
        let mut a_next = 0.0;
        let mut ah_next = 0.0;
        for t in (0..steps).rev() {
            let i = t * n + e;
            let boundary = batch.truncated[i] || t == steps - 1;
            let (v_next, vh_next) = if boundary {
                let (v, vh) = (batch.next_values[i], batch.next_entropy_values[i]);
                if !(v.is_finite() && vh.is_finite()) {
                    return Err(Error::InvalidBatch(format!(
                        "missing bootstrap value at step {t}, env {e}"
                    )));
                }
                (v, vh)
            } else {
                (batch.values[i + n], batch.entropy_values[i + n])
            };
            if batch.truncated[i] {
                a_next = 0.0;
                ah_next = 0.0;
            }
            let delta = batch.rewards[i] - gains.reward_gain + v_next - batch.values[i];
            let delta_h =
                batch.entropy_rewards[i] - gains.entropy_gain + vh_next - batch.entropy_values[i];
            a_next = delta + lambda * a_next;
            ah_next = delta_h + lambda_entropy * ah_next;
            advantage[i] = a_next;
            entropy_advantage[i] = ah_next;
            value_target[i] = a_next + batch.values[i];
            entropy_value_target[i] = ah_next + batch.entropy_values[i];
        }
    }
    Ok(GaeOutput { advantage, entropy_advantage, value_target, entropy_value_target })
}

/// One incremental step of both gain estimates from the batch-mean
/// advantages: `ρ̂ ← ρ̂ + η·mean(A)`, `ρ̂_H ← ρ̂_H + η·mean(A_H)`.
/// Returns the two means.
pub fn update_gains(gains: &mut GainEstimates, gae: &GaeOutput, gain_lr: f64) -> (f64, f64) {
    let n = gae.advantage.len().max(1) as f64;
    let mean_a = gae.advantage.iter().sum::<f64>() / n;
    let mean_ah = gae.entropy_advantage.iter().sum::<f64>() / n;
    gains.reward_gain += gain_lr * mean_a;
    gains.entropy_gain += gain_lr * mean_ah;
    (mean_a, mean_ah)
}

// ---------------------------------------------------------------------------
// Policy optimization
// ---------------------------------------------------------------------------

/// Diagnostics from one `ppo_update` call, averaged over minibatches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    /// Mean negated clipped surrogate.
    pub policy_loss: f64,
    /// Mean squared error summed over both critic heads (before `vf_coef`).
    pub value_loss: f64,
    /// Fraction of samples whose clipped branch was strictly active.
    pub clip_fraction: f64,
    /// Mean pre-clip global gradient norm.
    pub grad_norm: f64,
}

fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Several epochs of clipped-surrogate updates over shuffled minibatches.
/// Policy and critic share one flat Adam state (policy parameters first).
/// The combined advantage `A + c₂·A_H` is normalized per minibatch when
/// configured, and log_std is projected onto `(-∞, log_std_max]` after each
/// step. A non-finite gradient aborts with parameters untouched.
pub fn ppo_update(
    policy: &mut GaussianPolicy,
    critic: &mut Critic,
    opt: &mut Adam,
    batch: &RolloutBatch,
    gae: &GaeOutput,
    cfg: &LearnerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateReport> {
    let total = batch.len();
    if gae.advantage.len() != total {
        return Err(Error::InvalidBatch("advantage length does not match batch".into()));
    }
    let np = policy.param_count();
    let nc = critic.param_count();
    if opt.m.len() != np + nc {
        return Err(Error::InvalidInput(format!(
            "optimizer tracks {} parameters, networks have {}",
            opt.m.len(),
            np + nc
        )));
    }
    let combined: Vec<f64> = gae
        .advantage
        .iter()
        .zip(&gae.entropy_advantage)
        .map(|(&a, &ah)| a + cfg.entropy_adv_coef * ah)
        .collect();

    let mut params = vec![0.0; np + nc];
    policy.write_params(&mut params[..np]);
    critic.write_params(&mut params[np..]);
    let mut grads = vec![0.0; np + nc];

    let mut sum_policy_loss = 0.0;
    let mut sum_value_loss = 0.0;
    let mut sum_grad_norm = 0.0;
    let mut clipped = 0usize;
    let mut seen = 0usize;
    let mut n_minibatches = 0usize;

    for _ in 0..cfg.epochs {
        let order = shuffled_indices(total, rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let b = chunk.len();
            let mut mobs = Array2::<f64>::zeros((b, 4));
            let mut mpre = Array1::<f64>::zeros(b);
            let mut lp_old = vec![0.0; b];
            let mut adv = vec![0.0; b];
            let mut vt = vec![0.0; b];
            let mut vht = vec![0.0; b];
            for (row, &i) in chunk.iter().enumerate() {
                for k in 0..4 {
                    mobs[(row, k)] = batch.obs[(i, k)];
                }
                mpre[row] = batch.pre_clamp[i];
                lp_old[row] = batch.log_prob_old[i];
                adv[row] = combined[i];
                vt[row] = gae.value_target[i];
                vht[row] = gae.entropy_value_target[i];
            }
            if cfg.normalize_adv {
                let mean = adv.iter().sum::<f64>() / b as f64;
                let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / b as f64;
                let std = var.sqrt() + 1e-8;
                for a in &mut adv {
                    *a = (*a - mean) / std;
                }
            }

            let (lp_new, means, cache) = policy.log_prob_batch(&mobs, &mpre)?;
            let mut dlp = Array1::<f64>::zeros(b);
            let mut mb_policy_loss = 0.0;
            for row in 0..b {
                let ratio = (lp_new[row] - lp_old[row]).exp();
                let clipped_ratio = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
                let surr = ratio * adv[row];
                let surr_clip = clipped_ratio * adv[row];
                if surr <= surr_clip {
                    mb_policy_loss -= surr;
                    dlp[row] = -adv[row] * ratio / b as f64;
                } else {
                    mb_policy_loss -= surr_clip;
                    clipped += 1;
                }
            }
            mb_policy_loss /= b as f64;
            seen += b;
            let (pgrads, dlog_std) = policy.backward_log_prob(&cache, &means, &mpre, &dlp)?;

            let (vals, vcache) = critic.values_batch(&mobs)?;
            let mut dvals = Array2::<f64>::zeros((b, 2));
            let mut mb_value_loss = 0.0;
            for row in 0..b {
                let d0 = vals[(row, 0)] - vt[row];
                let d1 = vals[(row, 1)] - vht[row];
                mb_value_loss += d0 * d0 + d1 * d1;
                dvals[(row, 0)] = cfg.vf_coef * 2.0 * d0 / b as f64;
                dvals[(row, 1)] = cfg.vf_coef * 2.0 * d1 / b as f64;
            }
            mb_value_loss /= b as f64;
            let (cgrads, _) = critic.net.backward(&vcache, &dvals)?;

            let k = pgrads.write_params(&mut grads[..np]);
            debug_assert_eq!(k, np - 1);
            grads[np - 1] = dlog_std;
            cgrads.write_params(&mut grads[np..]);

            let report = opt.step(&mut params, &grads, cfg.max_grad_norm)?;
            params[np - 1] = params[np - 1].min(cfg.log_std_max);
            policy.read_params(&params[..np]);
            critic.read_params(&params[np..]);

            sum_policy_loss += mb_policy_loss;
            sum_value_loss += mb_value_loss;
            sum_grad_norm += report.grad_norm;
            n_minibatches += 1;
        }
    }
    let nm = n_minibatches.max(1) as f64;
    Ok(UpdateReport {
        policy_loss: sum_policy_loss / nm,
        value_loss: sum_value_loss / nm,
        clip_fraction: clipped as f64 / seen.max(1) as f64,
        grad_norm: sum_grad_norm / nm,
    })
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

pub const TRAIN_LOG_HEADER: &str =
    "iter,frames,rho_hat,rho_H_hat,policy_loss,value_loss,clip_frac,eval_score";

/// Where `train` put its outputs and how the run ended.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainArtifacts {
    pub log_path: PathBuf,
    pub final_checkpoint: PathBuf,
    pub best_checkpoint: PathBuf,
    pub iterations: u64,
    pub frames: u64,
    pub final_eval_score: f64,
    pub best_eval_score: f64,
}

/// Runs the full training loop: collect → advantages → gain update → policy
/// update, evaluating the deterministic controller (policy mean, frozen
/// stats, no truncation) on the first iteration, every `eval_interval`
/// iterations, and at the end. Writes `train_log.csv`, `best.ckpt` (highest
/// evaluation score) and `final.ckpt` into `out_dir`. If an update aborts on
/// a non-finite gradient the error is returned after the last consistent
/// state has been checkpointed.
pub fn train(
    env_cfg: &EnvConfig,
    cfg: &LearnerConfig,
    score_spec: &ScoreSpec,
    seed: u64,
    out_dir: &Path,
) -> Result<TrainArtifacts> {
    cfg.validate()?;
    score_spec.validate()?;
    let mut env_cfg = *env_cfg;
    env_cfg.reset.p_trunc = cfg.p_trunc;
    env_cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;

    let mut venv = VecEnv::new(env_cfg, cfg.n_envs, seed)?;
    let mut current_obs = venv.reset_all();
    let mut policy = GaussianPolicy::new(
        4,
        &cfg.policy_hidden,
        cfg.log_std_init,
        &mut rng::stream(seed, "policy-init"),
    )?;
    let mut critic = Critic::new(4, &cfg.critic_hidden, &mut rng::stream(seed, "critic-init"))?;
    let mut opt = Adam::new(cfg.lr, policy.param_count() + critic.param_count());
    let mut gains = GainEstimates::default();
    let mut rollout_rng = rng::stream(seed, "rollout");
    let mut shuffle_rng = rng::stream(seed, "shuffle");

    let iterations = cfg.total_frames.div_ceil(cfg.frames_per_iter()).max(1);
    let log_path = out_dir.join("train_log.csv");
    let best_path = out_dir.join("best.ckpt");
    let final_path = out_dir.join("final.ckpt");
    let mut log = String::from(TRAIN_LOG_HEADER);
    log.push('\n');
    let mut best_score = f64::NEG_INFINITY;
    let mut last_score = f64::NAN;
    let mut frames = 0u64;

    let checkpoint = |policy: &GaussianPolicy,
                      critic: &Critic,
                      opt: &Adam,
                      venv: &VecEnv,
                      gains: GainEstimates,
                      iteration: u64,
                      frames: u64|
     -> Checkpoint {
        Checkpoint {
            env_cfg,
            learner_cfg: cfg.clone(),
            policy: policy.clone(),
            critic: critic.clone(),
            opt: opt.clone(),
            stats: venv.stats,
            gains,
            iteration,
            frames,
        }
    };

    for iter in 1..=iterations {
        let batch = collect_rollouts(
            &policy,
            &critic,
            &mut venv,
            &mut current_obs,
            cfg.rollout_steps,
            cfg.tau,
            &mut rollout_rng,
        )?;
        frames += cfg.frames_per_iter();
        let gae = dual_gae(&batch, gains, cfg.lambda, cfg.lambda_entropy)?;
        update_gains(&mut gains, &gae, cfg.gain_lr);
        let iter_cfg =
            LearnerConfig { log_std_max: cfg.log_std_ceiling(frames), ..cfg.clone() };
        let report = match ppo_update(
            &mut policy,
            &mut critic,
            &mut opt,
            &batch,
            &gae,
            &iter_cfg,
            &mut shuffle_rng,
        ) {
            Ok(r) => r,
            Err(e) => {
                // Parameters are untouched by the failed step; keep them.
                checkpoint(&policy, &critic, &opt, &venv, gains, iter, frames)
                    .save(&final_path)?;
                std::fs::write(&log_path, &log)?;
                return Err(e);
            }
        };

        if iter == 1 || iter % cfg.eval_interval as u64 == 0 || iter == iterations {
            let traj = eval::run_episode(
                &policy,
                &venv.stats,
                &env_cfg,
                &NoiseSpec::clean(),
                env_cfg.reset.episode_cap,
                seed,
            )?;
            last_score = eval::compute_criteria(&traj, score_spec)?.score;
            if last_score > best_score {
                best_score = last_score;
                checkpoint(&policy, &critic, &opt, &venv, gains, iter, frames).save(&best_path)?;
            }
            std::fs::write(&log_path, &log)?;
        }
        let _ = writeln!(
            log,
            "{},{},{},{},{},{},{},{}",
            iter,
            frames,
            gains.reward_gain,
            gains.entropy_gain,
            report.policy_loss,
            report.value_loss,
            report.clip_fraction,
            last_score
        );
    }

    checkpoint(&policy, &critic, &opt, &venv, gains, iterations, frames).save(&final_path)?;
    if best_score == f64::NEG_INFINITY {
        // No eval ever ran (cannot happen: iter 1 always evaluates), but keep
        // the invariant that both files exist.
        std::fs::copy(&final_path, &best_path)?;
    }
    std::fs::write(&log_path, &log)?;
    Ok(TrainArtifacts {
        log_path,
        final_checkpoint: final_path,
        best_checkpoint: best_path,
        iterations,
        frames,
        final_eval_score: last_score,
        best_eval_score: best_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ResetSpec;
    use crate::tabular::{self, TabularMdp, TabularPolicy};
    use rand_distr::Distribution;

    fn small_net(seed: u64) -> (GaussianPolicy, Critic) {
        let mut r1 = rng::stream(seed, "p");
        let mut r2 = rng::stream(seed, "c");
        (
            GaussianPolicy::new(4, &[8, 8], -1.0, &mut r1).unwrap(),
            Critic::new(4, &[8, 8], &mut r2).unwrap(),
        )
    }

    fn quiet_env_cfg() -> EnvConfig {
        EnvConfig {
            reset: ResetSpec { p_trunc: 0.0, ..ResetSpec::default() },
            ..EnvConfig::default()
        }
    }

    fn collect_small(seed: u64, p_trunc: f64, steps: usize, n_envs: usize) -> RolloutBatch {
        let (policy, critic) = small_net(seed);
        let mut cfg = quiet_env_cfg();
        cfg.reset.p_trunc = p_trunc;
        let mut venv = VecEnv::new(cfg, n_envs, seed).unwrap();
        let mut obs = venv.reset_all();
        let mut r = rng::stream(seed, "roll");
        collect_rollouts(&policy, &critic, &mut venv, &mut obs, steps, 2.0, &mut r).unwrap()
    }

    /// Equality that also matches the NaN bootstrap sentinels bit for bit.
    fn assert_batch_bits_eq(a: &RolloutBatch, b: &RolloutBatch) {
        assert_eq!(a.n_envs, b.n_envs);
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.obs, b.obs);
        assert_eq!(a.actions, b.actions);
        assert_eq!(a.pre_clamp, b.pre_clamp);
        assert_eq!(a.log_prob_old, b.log_prob_old);
        assert_eq!(a.rewards, b.rewards);
        assert_eq!(a.entropy_rewards, b.entropy_rewards);
        assert_eq!(a.values, b.values);
        assert_eq!(a.entropy_values, b.entropy_values);
        assert_eq!(a.truncated, b.truncated);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.next_values), bits(&b.next_values));
        assert_eq!(bits(&a.next_entropy_values), bits(&b.next_entropy_values));
    }

    #[test]
    fn rollouts_are_deterministic_and_shaped() {
        let a = collect_small(3, 0.05, 16, 4);
        let b = collect_small(3, 0.05, 16, 4);
        assert_batch_bits_eq(&a, &b);
        assert_eq!(a.len(), 64);
        assert_eq!(a.obs.nrows(), 64);
    }

    #[test]
    fn entropy_rewards_recomputable_from_log_probs() {
        let batch = collect_small(5, 0.02, 32, 2);
        for i in 0..batch.len() {
            assert_eq!(batch.entropy_rewards[i], -2.0 * batch.log_prob_old[i]);
        }
        // τ = 0 kills the channel entirely.
        let (policy, critic) = small_net(5);
        let mut venv = VecEnv::new(quiet_env_cfg(), 2, 5).unwrap();
        let mut obs = venv.reset_all();
        let mut r = rng::stream(5, "roll");
        let batch =
            collect_rollouts(&policy, &critic, &mut venv, &mut obs, 8, 0.0, &mut r).unwrap();
        assert!(batch.entropy_rewards.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bootstraps_live_exactly_where_needed() {
        let batch = collect_small(7, 0.08, 24, 4);
        let (n, steps) = (batch.n_envs, batch.steps);
        let mut saw_truncation = false;
        for t in 0..steps {
            for e in 0..n {
                let i = t * n + e;
                let needed = batch.truncated[i] || t == steps - 1;
                assert_eq!(batch.next_values[i].is_finite(), needed, "step {t} env {e}");
                assert_eq!(batch.next_entropy_values[i].is_finite(), needed);
                saw_truncation |= batch.truncated[i];
            }
        }
        assert!(saw_truncation, "p_trunc=0.08 over 96 steps should truncate");
    }

    #[test]
    fn gae_with_zero_lambda_is_exactly_td() {
        let batch = collect_small(11, 0.05, 16, 3);
        let gains = GainEstimates { reward_gain: 0.3, entropy_gain: -0.1 };
        let out = dual_gae(&batch, gains, 0.0, 0.0).unwrap();
        let (n, steps) = (batch.n_envs, batch.steps);
        for e in 0..n {
            for t in 0..steps {
                let i = t * n + e;
                let v_next = if batch.truncated[i] || t == steps - 1 {
                    batch.next_values[i]
                } else {
                    batch.values[i + n]
                };
                let delta = batch.rewards[i] - gains.reward_gain + v_next - batch.values[i];
                assert_eq!(out.advantage[i], delta, "step {t} env {e}");
            }
        }
    }

    fn hand_batch(
        rewards: Vec<f64>,
        values: Vec<f64>,
        truncated: Vec<bool>,
        next_values: Vec<f64>,
    ) -> RolloutBatch {
        let steps = rewards.len();
        let total = steps;
        RolloutBatch {
            n_envs: 1,
            steps,
            obs: Array2::zeros((total, 4)),
            actions: vec![0.0; total],
            pre_clamp: Array1::zeros(total),
            log_prob_old: Array1::zeros(total),
            rewards,
            entropy_rewards: vec![0.0; total],
            values,
            entropy_values: vec![0.0; total],
            truncated,
            next_values,
            next_entropy_values: vec![0.0; total],
        }
    }

    #[test]
    fn three_step_unroll_matches_hand_numbers() {
        let nan = f64::NAN;
        let batch = hand_batch(
            vec![1.0, 0.0, 2.0],
            vec![0.5, 1.0, 0.0],
            vec![false, false, false],
            vec![nan, nan, 0.25],
        );
        let gains = GainEstimates { reward_gain: 0.5, entropy_gain: 0.0 };
        let out = dual_gae(&batch, gains, 0.8, 0.0).unwrap();
        // δ = [1.0, −1.5, 1.75]; A_2 = 1.75, A_1 = −1.5+0.8·1.75 = −0.1,
        // A_0 = 1.0+0.8·(−0.1) = 0.92.
        assert!((out.advantage[2] - 1.75).abs() < 1e-12);
        assert!((out.advantage[1] + 0.1).abs() < 1e-12);
        assert!((out.advantage[0] - 0.92).abs() < 1e-12);
        assert!((out.value_target[0] - 1.42).abs() < 1e-12);
        assert!((out.value_target[1] - 0.9).abs() < 1e-12);
        assert!((out.value_target[2] - 1.75).abs() < 1e-12);
    }

    #[test]
    fn truncation_bootstraps_from_terminal_not_next_row() {
        let batch = hand_batch(
            vec![1.0, 2.0],
            vec![0.5, 0.3],
            vec![true, false],
            vec![0.7, 0.1],
        );
        let out = dual_gae(&batch, GainEstimates::default(), 0.9, 0.0).unwrap();
        // Truncated step uses its own bootstrap 0.7 (not v[1] = 0.3) and the
        // recursion restarts, so A_0 has no λ·A_1 term.
        assert!((out.advantage[0] - (1.0 + 0.7 - 0.5)).abs() < 1e-12);
        assert!((out.advantage[1] - (2.0 + 0.1 - 0.3)).abs() < 1e-12);
    }

    #[test]
    fn missing_bootstrap_is_an_error() {
        let batch = hand_batch(
            vec![1.0, 2.0],
            vec![0.5, 0.3],
            vec![true, false],
            vec![f64::NAN, 0.1],
        );
        match dual_gae(&batch, GainEstimates::default(), 0.8, 0.6) {
            Err(Error::InvalidBatch(msg)) => assert!(msg.contains("step 0")),
            other => panic!("expected InvalidBatch, got {other:?}"),
        }
    }

    #[test]
    fn gain_update_arithmetic_is_exact() {
        let gae = GaeOutput {
            advantage: vec![1.0, 2.0, 3.0],
            entropy_advantage: vec![-1.0, -1.0, -4.0],
            value_target: vec![0.0; 3],
            entropy_value_target: vec![0.0; 3],
        };
        let mut gains = GainEstimates::default();
        let (ma, mh) = update_gains(&mut gains, &gae, 0.01);
        assert_eq!(ma, 2.0);
        assert_eq!(mh, -2.0);
        assert_eq!(gains.reward_gain, 0.02);
        assert_eq!(gains.entropy_gain, -0.02);
        // Constant advantages pull the estimate geometrically onto the mean.
        let constant = GaeOutput {
            advantage: vec![5.0; 4],
            entropy_advantage: vec![0.0; 4],
            value_target: vec![0.0; 4],
            entropy_value_target: vec![0.0; 4],
        };
        let mut g = GainEstimates::default();
        for _ in 0..10 {
            // mean advantage here is 5 − nothing: the advantage vector is
            // fixed, so ρ̂ after k steps is 0.01·5·k.
            update_gains(&mut g, &constant, 0.01);
        }
        assert!((g.reward_gain - 0.5).abs() < 1e-12);
    }

    /// Samples a trajectory from a tabular MDP under a fixed policy, filling
    /// a RolloutBatch whose critic values are the exact bias functions.
    #[allow(clippy::too_many_arguments)]
    fn tabular_batch(
        mdp: &TabularMdp,
        policy: &TabularPolicy,
        v: &[f64],
        vh: &[f64],
        tau: f64,
        steps: usize,
        state: &mut usize,
        rng: &mut ChaCha8Rng,
    ) -> RolloutBatch {
        let mut rewards = vec![0.0; steps];
        let mut entropy_rewards = vec![0.0; steps];
        let mut values = vec![0.0; steps];
        let mut entropy_values = vec![0.0; steps];
        let mut next_values = vec![f64::NAN; steps];
        let mut next_entropy_values = vec![f64::NAN; steps];
        for t in 0..steps {
            let s = *state;
            let mut u: f64 = rng.random();
            let mut a = 0;
            for cand in 0..mdp.n_actions {
                let p = policy.prob(s, cand);
                if u < p {
                    a = cand;
                    break;
                }
                u -= p;
                a = cand;
            }
            rewards[t] = mdp.r(s, a);
            entropy_rewards[t] = -tau * policy.prob(s, a).ln();
            values[t] = v[s];
            entropy_values[t] = vh[s];
            let mut w: f64 = rng.random();
            let mut s2 = 0;
            for cand in 0..mdp.n_states {
                let p = mdp.p(s, a, cand);
                if w < p {
                    s2 = cand;
                    break;
                }
                w -= p;
                s2 = cand;
            }
            *state = s2;
            if t == steps - 1 {
                next_values[t] = v[s2];
                next_entropy_values[t] = vh[s2];
            }
        }
        RolloutBatch {
            n_envs: 1,
            steps,
            obs: Array2::zeros((steps, 4)),
            actions: vec![0.0; steps],
            pre_clamp: Array1::zeros(steps),
            log_prob_old: Array1::zeros(steps),
            rewards,
            entropy_rewards,
            values,
            entropy_values,
            truncated: vec![false; steps],
            next_values,
            next_entropy_values,
        }
    }

    #[test]
    fn gain_estimates_track_oracle_on_small_chain() {
        let mdp = TabularMdp::random_recurrent(&mut rng::stream(42, "mdp"), 5, 2);
        let policy = TabularPolicy::random(&mut rng::stream(43, "pol"), 5, 2);
        let tau = 0.7;
        let oracle = tabular::exact_soft_advantage(&mdp, &policy, tau).unwrap();
        let mut gains = GainEstimates::default();
        let mut state = 0usize;
        let mut r = rng::stream(44, "chain");
        for _ in 0..500 {
            let batch =
                tabular_batch(&mdp, &policy, &oracle.bias, &oracle.entropy_bias, tau, 8192, &mut state, &mut r);
            let gae = dual_gae(&batch, gains, 0.0, 0.0).unwrap();
            update_gains(&mut gains, &gae, 0.01);
        }
        assert!(
            (gains.reward_gain - oracle.gain).abs() < 1e-2,
            "ρ̂ = {}, ρ = {}",
            gains.reward_gain,
            oracle.gain
        );
        assert!(
            (gains.entropy_gain - oracle.entropy_gain).abs() < 1e-2,
            "ρ̂_H = {}, ρ_H = {}",
            gains.entropy_gain,
            oracle.entropy_gain
        );
    }

    #[test]
    fn reevaluated_log_probs_match_collection() {
        let batch = collect_small(13, 0.0, 8, 4);
        let (policy, _) = small_net(13);
        let (lp, _, _) = policy.log_prob_batch(&batch.obs, &batch.pre_clamp).unwrap();
        for i in 0..batch.len() {
            assert_eq!(lp[i], batch.log_prob_old[i], "sample {i}");
        }
    }

    fn tiny_cfg() -> LearnerConfig {
        LearnerConfig {
            n_envs: 2,
            rollout_steps: 8,
            epochs: 2,
            minibatch_size: 8,
            policy_hidden: vec![8],
            critic_hidden: vec![8],
            total_frames: 64,
            eval_interval: 2,
            ..LearnerConfig::default()
        }
    }

    #[test]
    fn ppo_update_is_deterministic() {
        let batch = collect_small(17, 0.0, 8, 4);
        let gae = dual_gae(&batch, GainEstimates::default(), 0.8, 0.6).unwrap();
        let cfg = LearnerConfig { minibatch_size: 16, ..tiny_cfg() };
        let run = || {
            let (mut policy, mut critic) = small_net(17);
            let mut opt = Adam::new(5e-4, policy.param_count() + critic.param_count());
            let mut r = rng::stream(17, "shuffle");
            let report =
                ppo_update(&mut policy, &mut critic, &mut opt, &batch, &gae, &cfg, &mut r)
                    .unwrap();
            let mut p = vec![0.0; policy.param_count()];
            policy.write_params(&mut p);
            (report, p)
        };
        let (ra, pa) = run();
        let (rb, pb) = run();
        assert_eq!(ra, rb);
        assert_eq!(pa, pb);
        assert!(ra.clip_fraction >= 0.0 && ra.clip_fraction <= 1.0);
        assert!(ra.grad_norm.is_finite());
    }

    #[test]
    fn constant_advantage_leaves_policy_untouched() {
        let batch = collect_small(19, 0.0, 8, 2);
        let total = batch.len();
        // 1.5 is dyadic, so the minibatch mean subtraction is exact and the
        // normalized advantage is identically zero (any rounding residue
        // would be blown up to a full-size step by Adam's rescaling).
        let gae = GaeOutput {
            advantage: vec![1.5; total],
            entropy_advantage: vec![0.0; total],
            value_target: vec![0.4; total],
            entropy_value_target: vec![-0.2; total],
        };
        let (mut policy, mut critic) = small_net(19);
        let mut p_before = vec![0.0; policy.param_count()];
        policy.write_params(&mut p_before);
        let mut c_before = vec![0.0; critic.param_count()];
        critic.write_params(&mut c_before);
        let mut opt = Adam::new(5e-4, policy.param_count() + critic.param_count());
        let cfg = LearnerConfig { minibatch_size: 16, normalize_adv: true, ..tiny_cfg() };
        let mut r = rng::stream(19, "shuffle");
        ppo_update(&mut policy, &mut critic, &mut opt, &batch, &gae, &cfg, &mut r).unwrap();
        let mut p_after = vec![0.0; policy.param_count()];
        policy.write_params(&mut p_after);
        let mut c_after = vec![0.0; critic.param_count()];
        critic.write_params(&mut c_after);
        // Normalized constant advantage is identically zero → no policy
        // gradient; the critic still regresses toward its targets.
        assert_eq!(p_before, p_after);
        assert_ne!(c_before, c_after);
    }

    #[test]
    fn positive_advantage_pushes_the_mean_toward_those_actions() {
        let mut r = rng::stream(23, "p");
        let mut policy = GaussianPolicy::new(4, &[8], -1.0, &mut r).unwrap();
        let mut critic = Critic::new(4, &[8], &mut rng::stream(23, "c")).unwrap();
        let total = 64;
        let obs = Array2::from_elem((total, 4), 1.0);
        let pre_clamp =
            Array1::from_iter((0..total).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }));
        let (lp_old, _, _) = policy.log_prob_batch(&obs, &pre_clamp).unwrap();
        let batch = RolloutBatch {
            n_envs: 1,
            steps: total,
            obs,
            actions: pre_clamp.to_vec(),
            pre_clamp: pre_clamp.clone(),
            log_prob_old: lp_old,
            rewards: vec![0.0; total],
            entropy_rewards: vec![0.0; total],
            values: vec![0.0; total],
            entropy_values: vec![0.0; total],
            truncated: vec![false; total],
            next_values: vec![0.0; total],
            next_entropy_values: vec![0.0; total],
        };
        let gae = GaeOutput {
            advantage: (0..total).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(),
            entropy_advantage: vec![0.0; total],
            value_target: vec![0.0; total],
            entropy_value_target: vec![0.0; total],
        };
        let before = policy.mean_action(&[1.0; 4]).unwrap();
        let cfg = LearnerConfig {
            minibatch_size: 64,
            epochs: 1,
            normalize_adv: false,
            lr: 1e-3,
            ..LearnerConfig::default()
        };
        let mut opt = Adam::new(cfg.lr, policy.param_count() + critic.param_count());
        for _ in 0..50 {
            let mut shuffle = rng::stream(23, "shuffle");
            ppo_update(&mut policy, &mut critic, &mut opt, &batch, &gae, &cfg, &mut shuffle)
                .unwrap();
        }
        let after = policy.mean_action(&[1.0; 4]).unwrap();
        assert!(
            after > before + 0.005,
            "mean should move toward positively-advantaged actions: {before} → {after}"
        );
    }

    /// Advantages that consistently favor tail samples (the entropy channel's
    /// signature: ∂lp/∂log_std = z²−1 > 0 in the tails) widen the policy
    /// without bound; the ceiling must pin log_std while a loose ceiling lets
    /// the same pressure through.
    #[test]
    fn log_std_ceiling_caps_entropy_driven_widening() {
        let widen = |log_std_max: f64| {
            let mut policy = GaussianPolicy::new(4, &[8], -0.2, &mut rng::stream(29, "p")).unwrap();
            let mut critic = Critic::new(4, &[8], &mut rng::stream(29, "c")).unwrap();
            let cfg = LearnerConfig {
                minibatch_size: 64,
                epochs: 1,
                lr: 1e-2,
                log_std_init: -0.2,
                log_std_max,
                ..LearnerConfig::default()
            };
            let mut opt = Adam::new(cfg.lr, policy.param_count() + critic.param_count());
            let mut zs = rng::stream(29, "z");
            let total = 64;
            for _ in 0..60 {
                let obs = Array2::from_elem((total, 4), 1.0);
                let (means, _) = policy.mean_batch(&obs).unwrap();
                let sigma = policy.log_std.exp();
                let z: Vec<f64> =
                    (0..total).map(|_| rand_distr::StandardNormal.sample(&mut zs)).collect();
                let pre_clamp =
                    Array1::from_iter(z.iter().zip(&means).map(|(&zi, &m)| m + sigma * zi));
                let (lp_old, _, _) = policy.log_prob_batch(&obs, &pre_clamp).unwrap();
                let batch = RolloutBatch {
                    n_envs: 1,
                    steps: total,
                    obs,
                    actions: pre_clamp.to_vec(),
                    pre_clamp,
                    log_prob_old: lp_old,
                    rewards: vec![0.0; total],
                    entropy_rewards: vec![0.0; total],
                    values: vec![0.0; total],
                    entropy_values: vec![0.0; total],
                    truncated: vec![false; total],
                    next_values: vec![0.0; total],
                    next_entropy_values: vec![0.0; total],
                };
                let gae = GaeOutput {
                    advantage: z.iter().map(|&zi| zi * zi - 1.0).collect(),
                    entropy_advantage: vec![0.0; total],
                    value_target: vec![0.0; total],
                    entropy_value_target: vec![0.0; total],
                };
                let mut shuffle = rng::stream(29, "shuffle");
                ppo_update(&mut policy, &mut critic, &mut opt, &batch, &gae, &cfg, &mut shuffle)
                    .unwrap();
            }
            policy.log_std
        };
        let pinned = widen(0.0);
        assert!(pinned <= 0.0, "ceiling violated: log_std = {pinned}");
        assert!(pinned > -0.05, "pressure should drive log_std up to the ceiling, got {pinned}");
        let loose = widen(4.0);
        assert!(loose > 0.05, "same pressure under a loose ceiling should widen past 0, got {loose}");
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let cfg = LearnerConfig { lambda: 1.5, ..LearnerConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = LearnerConfig { clip_eps: 0.0, ..LearnerConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = LearnerConfig { p_trunc: 1.0, ..LearnerConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = LearnerConfig { minibatch_size: 0, ..LearnerConfig::default() };
        assert!(cfg.validate().is_err());
        // A ceiling below the initial value would start out infeasible.
        let cfg = LearnerConfig { log_std_max: -2.0, ..LearnerConfig::default() };
        assert!(cfg.validate().is_err());
        // The schedule may only tighten the ceiling.
        let cfg = LearnerConfig { log_std_max_final: 0.5, ..LearnerConfig::default() };
        assert!(cfg.validate().is_err());
        assert!(LearnerConfig::default().validate().is_ok());
    }

    #[test]
    fn log_std_ceiling_schedule_is_linear_in_frames() {
        let cfg = LearnerConfig {
            log_std_max: 0.0,
            log_std_max_final: -1.5,
            total_frames: 1000,
            ..LearnerConfig::default()
        };
        assert_eq!(cfg.log_std_ceiling(0), 0.0);
        assert_eq!(cfg.log_std_ceiling(500), -0.75);
        assert_eq!(cfg.log_std_ceiling(1000), -1.5);
        assert_eq!(cfg.log_std_ceiling(2000), -1.5);
        let flat = LearnerConfig::default();
        assert_eq!(flat.log_std_ceiling(12345), flat.log_std_max);
    }

    #[test]
    fn train_smoke_run_writes_artifacts_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg();
        let env_cfg = quiet_env_cfg();
        let score = ScoreSpec::default();
        let a = train(&env_cfg, &cfg, &score, 5, &dir.path().join("a")).unwrap();
        let b = train(&env_cfg, &cfg, &score, 5, &dir.path().join("b")).unwrap();
        let c = train(&env_cfg, &cfg, &score, 6, &dir.path().join("c")).unwrap();
        assert_eq!(a.iterations, 4); // 64 frames / (2·8)
        assert_eq!(a.frames, 64);
        let log_a = std::fs::read_to_string(&a.log_path).unwrap();
        let log_b = std::fs::read_to_string(&b.log_path).unwrap();
        let log_c = std::fs::read_to_string(&c.log_path).unwrap();
        assert_eq!(log_a, log_b, "same seed must reproduce the log byte for byte");
        assert_ne!(log_a, log_c, "different seed should differ");
        assert!(log_a.starts_with(TRAIN_LOG_HEADER));
        assert_eq!(log_a.lines().count(), 5); // header + one row per iteration
        assert!(a.final_checkpoint.exists());
        assert!(a.best_checkpoint.exists());
        let ck_a = std::fs::read(&a.final_checkpoint).unwrap();
        let ck_b = std::fs::read(&b.final_checkpoint).unwrap();
        assert_eq!(ck_a, ck_b, "checkpoints must be byte-identical across reruns");
    }
}
