//! Continuing-MDP swing-up environment over the rigid-body dynamics.
//!
//! One control step = one 100 Hz interval of zero-order-hold torque. There is
//! no terminal state: episodes end only by truncation (step cap or the
//! per-step random truncation that decorrelates parallel environments), and
//! value bootstrapping continues through truncations. Observations are scaled
//! to roughly unit range and then normalized by shared running statistics.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dynamics::{apply_actuation, step_zoh, ActuationMode, ModelParams, PendulumState};
use crate::error::{Error, Result};
use crate::rng;

/// Maps an angle to the half-open interval (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI);
    if y == 0.0 {
        PI
    } else {
        y - PI
    }
}

// ---------------------------------------------------------------------------
// Reward and reset specifications
// ---------------------------------------------------------------------------

/// Quadratic state/action cost turned into a non-positive reward:
/// `r = −alpha·[(s−goal)ᵀ·diag(q_diag)·(s−goal) + action·r_coef·action]`,
/// with both angle components of `s − goal` wrapped to (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSpec {
    pub q_diag: [f64; 4],
    pub r_coef: f64,
    pub alpha: f64,
    pub goal: [f64; 4],
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            q_diag: [50.0, 50.0, 4.0, 2.0],
            r_coef: 1.0,
            alpha: 0.001,
            goal: [PI, 0.0, 0.0, 0.0],
        }
    }
}

impl RewardSpec {
    pub fn validate(&self) -> Result<()> {
        if self.q_diag.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
            return Err(Error::InvalidInput("reward q_diag entries must be >= 0".into()));
        }
        if !(self.r_coef.is_finite() && self.r_coef >= 0.0) {
            return Err(Error::InvalidInput("reward r_coef must be >= 0".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidInput("reward alpha must be > 0".into()));
        }
        if self.goal.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidInput("reward goal must be finite".into()));
        }
        Ok(())
    }
}

/// Quadratic cost reward on the unscaled state. `action` is the applied
/// torque at the driven joint in N·m.
pub fn reward(state: [f64; 4], action: f64, spec: &RewardSpec) -> f64 {
    let d = [
        wrap_angle(state[0] - spec.goal[0]),
        wrap_angle(state[1] - spec.goal[1]),
        state[2] - spec.goal[2],
        state[3] - spec.goal[3],
    ];
    let quad: f64 = (0..4).map(|i| spec.q_diag[i] * d[i] * d[i]).sum();
    -spec.alpha * (quad + spec.r_coef * action * action)
}

/// Start-state distribution and truncation rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResetSpec {
    pub start_state: [f64; 4],
    /// Per-component Gaussian σ added to the start state.
    pub noise_std: [f64; 4],
    /// Hard step cap per episode (1000 steps = 10 s at 100 Hz).
    pub episode_cap: usize,
    /// Per-step probability of random truncation.
    pub p_trunc: f64,
}

impl Default for ResetSpec {
    fn default() -> Self {
        Self {
            start_state: [0.0; 4],
            noise_std: [0.01, 0.01, 0.05, 0.05],
            episode_cap: 1000,
            p_trunc: 1e-3,
        }
    }
}

impl ResetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.noise_std.iter().any(|&s| !(s.is_finite() && s >= 0.0)) {
            return Err(Error::InvalidInput("reset noise_std must be >= 0".into()));
        }
        if !(self.p_trunc.is_finite() && (0.0..1.0).contains(&self.p_trunc)) {
            return Err(Error::InvalidInput(format!(
                "p_trunc must lie in [0, 1), got {}",
                self.p_trunc
            )));
        }
        if self.episode_cap == 0 {
            return Err(Error::InvalidInput("episode_cap must be >= 1".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Observation scaling and running normalization
// ---------------------------------------------------------------------------

/// Scales raw state into roughly unit range:
/// `[wrap(q1)/π, wrap(q2)/π, qd1/vel_scale, qd2/vel_scale]`.
pub fn scale_observation(state: &PendulumState, vel_scale: f64) -> [f64; 4] {
    [
        wrap_angle(state.q1) / PI,
        wrap_angle(state.q2) / PI,
        state.qd1 / vel_scale,
        state.qd2 / vel_scale,
    ]
}

/// Streaming per-component mean/variance (Welford). Normalization uses the
/// population variance with a 1e-8 floor inside the square root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub count: u64,
    pub mean: [f64; 4],
    /// Sum of squared deviations from the running mean.
    pub m2: [f64; 4],
}

impl Default for RunningStats {
    fn default() -> Self {
        Self { count: 0, mean: [0.0; 4], m2: [0.0; 4] }
    }
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, obs: [f64; 4]) {
        self.count += 1;
        let n = self.count as f64;
        for (i, &x) in obs.iter().enumerate() {
            let delta = x - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (x - self.mean[i]);
        }
    }

    pub fn variance(&self) -> [f64; 4] {
        if self.count == 0 {
            return [0.0; 4];
        }
        let n = self.count as f64;
        [self.m2[0] / n, self.m2[1] / n, self.m2[2] / n, self.m2[3] / n]
    }

    /// `(obs − mean) / sqrt(var + 1e-8)` clipped to [−10, 10].
    pub fn normalize(&self, obs: [f64; 4]) -> [f64; 4] {
        let var = self.variance();
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = ((obs[i] - self.mean[i]) / (var[i] + 1e-8).sqrt()).clamp(-10.0, 10.0);
        }
        out
    }
}

/// Updates the stats with `obs` (unless `freeze`), then returns the
/// normalized observation. Evaluation runs set `freeze`.
pub fn normalize_and_update(obs: [f64; 4], stats: &mut RunningStats, freeze: bool) -> [f64; 4] {
    if !freeze {
        stats.update(obs);
    }
    stats.normalize(obs)
}

// ---------------------------------------------------------------------------
// Single environment
// ---------------------------------------------------------------------------

/// Everything a single environment needs, bundled for config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub mode: ActuationMode,
    pub model: ModelParams,
    pub reward: RewardSpec,
    pub reset: ResetSpec,
    /// Control interval (s); the policy acts at 1/control_dt Hz.
    pub control_dt: f64,
    /// RK4 substeps per control interval.
    pub substeps: usize,
    /// Velocity scale (rad/s) used in observation scaling.
    pub vel_scale: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            mode: ActuationMode::Pendubot,
            model: ModelParams::default(),
            reward: RewardSpec::default(),
            reset: ResetSpec::default(),
            control_dt: 0.01,
            substeps: 5,
            vel_scale: 20.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.reward.validate()?;
        self.reset.validate()?;
        if !(self.control_dt.is_finite() && self.control_dt > 0.0) {
            return Err(Error::InvalidInput("control_dt must be > 0".into()));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidInput("substeps must be >= 1".into()));
        }
        if !(self.vel_scale.is_finite() && self.vel_scale > 0.0) {
            return Err(Error::InvalidInput("vel_scale must be > 0".into()));
        }
        Ok(())
    }
}

/// Result of one control step (or of a reset, with zero reward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Scaled + normalized observation. After an auto-reset this is the
    /// fresh post-reset observation.
    pub observation: [f64; 4],
    pub reward: f64,
    pub truncated: bool,
    pub raw_state: PendulumState,
    /// Torque actually applied at the driven joint (N·m).
    pub applied_torque: f64,
    /// Pre-reset observation of the step that got truncated, normalized with
    /// the stats as of that moment but never folded into them; the critic
    /// bootstraps from this.
    pub terminal_observation: Option<[f64; 4]>,
}

/// One swing-up environment instance with its own RNG stream.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    state: PendulumState,
    steps_since_reset: usize,
    rng: ChaCha8Rng,
}

impl Env {
    /// `index` selects the per-environment RNG stream; vectorized sets give
    /// each member a distinct index under one seed.
    pub fn new(cfg: EnvConfig, seed: u64, index: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            state: PendulumState::hanging(),
            steps_since_reset: 0,
            rng: rng::indexed_stream(seed, "env", index),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn raw_state(&self) -> PendulumState {
        self.state
    }

    pub fn steps_since_reset(&self) -> usize {
        self.steps_since_reset
    }

    /// Draws a noisy start state, zeroes the step counter, and returns the
    /// fresh observation (reward 0, not truncated).
    pub fn reset(&mut self, stats: &mut RunningStats, freeze: bool) -> StepOutcome {
        let mut s = self.cfg.reset.start_state;
        for (si, &sd) in s.iter_mut().zip(&self.cfg.reset.noise_std) {
            if sd > 0.0 {
                let dist = Normal::new(0.0, sd).expect("validated noise std");
                *si += dist.sample(&mut self.rng);
            }
        }
        self.state = PendulumState::new(s[0], s[1], s[2], s[3]);
        self.steps_since_reset = 0;
        let obs = normalize_and_update(
            scale_observation(&self.state, self.cfg.vel_scale),
            stats,
            freeze,
        );
        StepOutcome {
            observation: obs,
            reward: 0.0,
            truncated: false,
            raw_state: self.state,
            applied_torque: 0.0,
            terminal_observation: None,
        }
    }

    /// Advances one control interval. `action` is the policy output in
    /// [−1, 1] (clamped), scaled by the torque limit and masked to the driven
    /// joint. On truncation the caller must reset before stepping again; the
    /// truncated step's observation is normalized without a stats update
    /// since the agent never acts on it.
    pub fn step(&mut self, action: f64, stats: &mut RunningStats, freeze: bool) -> Result<StepOutcome> {
        if !action.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite action {action}")));
        }
        let command = action.clamp(-1.0, 1.0) * self.cfg.model.torque_limit;
        let torques = apply_actuation(self.cfg.mode, command, self.cfg.model.torque_limit);
        self.state = step_zoh(
            &self.state,
            torques,
            self.cfg.control_dt,
            self.cfg.substeps,
            &self.cfg.model,
        )?;
        self.steps_since_reset += 1;
        let applied = torques[self.cfg.mode.active_joint()];
        let r = reward(self.state.as_vec4(), applied, &self.cfg.reward);
        // Draw the truncation coin every step so RNG consumption stays
        // fixed regardless of the cap.
        let coin: f64 = self.rng.random();
        let truncated =
            self.steps_since_reset >= self.cfg.reset.episode_cap || coin < self.cfg.reset.p_trunc;
        let scaled = scale_observation(&self.state, self.cfg.vel_scale);
        let obs = normalize_and_update(scaled, stats, freeze || truncated);
        Ok(StepOutcome {
            observation: obs,
            reward: r,
            truncated,
            raw_state: self.state,
            applied_torque: applied,
            terminal_observation: None,
        })
    }
}

// ---------------------------------------------------------------------------
// Vectorized environment
// ---------------------------------------------------------------------------

/// Fixed-size set of environments sharing one normalization statistic.
/// Members that truncate are reset in place and report both the fresh
/// observation and the pre-reset terminal observation.
#[derive(Debug, Clone)]
pub struct VecEnv {
    envs: Vec<Env>,
    pub stats: RunningStats,
    pub freeze_stats: bool,
}

impl VecEnv {
    pub fn new(cfg: EnvConfig, n_envs: usize, seed: u64) -> Result<Self> {
        if n_envs == 0 {
            return Err(Error::InvalidInput("n_envs must be >= 1".into()));
        }
        let envs = (0..n_envs)
            .map(|i| Env::new(cfg, seed, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { envs, stats: RunningStats::new(), freeze_stats: false })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn config(&self) -> &EnvConfig {
        self.envs[0].config()
    }

    /// Resets every member and returns the fresh observations.
    pub fn reset_all(&mut self) -> Vec<[f64; 4]> {
        let freeze = self.freeze_stats;
        let mut out = Vec::with_capacity(self.envs.len());
        for env in &mut self.envs {
            out.push(env.reset(&mut self.stats, freeze).observation);
        }
        out
    }

    /// Steps every member with its own action; truncated members are
    /// auto-reset, their outcome carrying the fresh observation plus the
    /// terminal one for bootstrapping.
    pub fn step(&mut self, actions: &[f64]) -> Result<Vec<StepOutcome>> {
        if actions.len() != self.envs.len() {
            return Err(Error::InvalidInput(format!(
                "got {} actions for {} environments",
                actions.len(),
                self.envs.len()
            )));
        }
        let freeze = self.freeze_stats;
        let mut out = Vec::with_capacity(self.envs.len());
        for (env, &a) in self.envs.iter_mut().zip(actions) {
            let mut outcome = env.step(a, &mut self.stats, freeze)?;
            if outcome.truncated {
                let fresh = env.reset(&mut self.stats, freeze);
                outcome.terminal_observation = Some(outcome.observation);
                outcome.observation = fresh.observation;
            }
            out.push(outcome);
        }
        Ok(out)
    }
}
