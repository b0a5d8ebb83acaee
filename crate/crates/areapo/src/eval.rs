//! Controller evaluation: scripted episodes under configurable disturbances,
//! swing-up criteria, an aggregate score, and a six-category robustness sweep.
//!
//! Episodes here always run the deterministic policy mean with frozen
//! normalization stats from a noiseless hanging start; stochasticity enters
//! only through the disturbance model, which is seeded and reproducible.

use rand::RngExt;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dynamics::{apply_actuation, step_zoh, PendulumState};
use crate::env::{reward, scale_observation, wrap_angle, EnvConfig, RunningStats};
use crate::error::{Error, Result};
use crate::nn::GaussianPolicy;
use crate::rng;
use crate::svg;

// ---------------------------------------------------------------------------
// Disturbance model
// ---------------------------------------------------------------------------

/// A constant external torque pulse on one joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    /// Onset time (s).
    pub time: f64,
    /// 0 = shoulder, 1 = elbow.
    pub joint: usize,
    /// Torque added while active (N·m); applied outside the actuator limit.
    pub magnitude: f64,
    /// Active for `time ≤ t < time + duration`.
    pub duration: f64,
}

/// Everything that can be done to an episode to probe robustness. The
/// default is a clean, disturbance-free run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Gaussian σ added to each measured joint velocity (observation only).
    pub velocity_noise_std: f64,
    /// Gaussian σ added to the commanded torque.
    pub torque_noise_std: f64,
    /// Multiplier on the commanded torque before noise. The serde default of
    /// 0.0 is read as the neutral factor 1.0 so a blank spec stays clean.
    pub torque_response: f64,
    /// FIFO delay on the applied torque, in control steps.
    pub delay_steps: usize,
    pub impulses: Vec<Impulse>,
    /// Plant parameter name → scale factor, applied before the run.
    pub model_scale: Vec<(String, f64)>,
}

impl NoiseSpec {
    pub fn clean() -> Self {
        Self { torque_response: 1.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.velocity_noise_std < 0.0 || self.torque_noise_std < 0.0 {
            return Err(Error::InvalidInput("noise magnitudes must be >= 0".into()));
        }
        if self.torque_response < 0.0 {
            return Err(Error::InvalidInput("torque_response must be >= 0".into()));
        }
        for imp in &self.impulses {
            if imp.joint > 1 || imp.duration < 0.0 {
                return Err(Error::InvalidInput("bad impulse entry".into()));
            }
        }
        Ok(())
    }

    fn effective_response(&self) -> f64 {
        // Serde default gives 0.0; treat that as the neutral factor so a
        // blank spec stays a clean run.
        if self.torque_response == 0.0 {
            1.0
        } else {
            self.torque_response
        }
    }
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub q1: f64,
    pub q2: f64,
    pub qd1: f64,
    pub qd2: f64,
    /// Motor torque applied at the driven joint during the step that ended
    /// here (0 for the initial point).
    pub torque: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// Index of the driven joint (0 = shoulder, 1 = elbow).
    pub active_joint: usize,
    /// Initial state followed by one post-step point per control step.
    pub points: Vec<TrajectoryPoint>,
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,q1,q2,qd1,qd2,torque,reward";

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 64);
        out.push_str(TRAJECTORY_CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.t, p.q1, p.q2, p.qd1, p.qd2, p.torque, p.reward
            );
        }
        out
    }
}

/// Runs one deterministic-mean episode of `steps` control intervals under
/// the given disturbances. Returns the full trajectory (initial point plus
/// one point per step).
pub fn run_episode(
    policy: &GaussianPolicy,
    stats: &RunningStats,
    env_cfg: &EnvConfig,
    noise: &NoiseSpec,
    steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    noise.validate()?;
    env_cfg.validate()?;
    if steps == 0 {
        return Err(Error::InvalidInput("episode needs at least one step".into()));
    }
    let mut model = env_cfg.model;
    for (name, factor) in &noise.model_scale {
        model = model.scaled(name, *factor)?;
    }
    let mode = env_cfg.mode;
    let active = mode.active_joint();
    let response = noise.effective_response();
    let mut rng = rng::stream(seed, "eval-noise");
    let vel_noise = if noise.velocity_noise_std > 0.0 {
        Some(Normal::new(0.0, noise.velocity_noise_std).expect("validated"))
    } else {
        None
    };
    let tau_noise = if noise.torque_noise_std > 0.0 {
        Some(Normal::new(0.0, noise.torque_noise_std).expect("validated"))
    } else {
        None
    };
    // The FIFO starts full of zeros: the first `delay_steps` intervals apply
    // no torque, as a real transport delay would.
    let mut fifo: VecDeque<f64> = std::iter::repeat_n(0.0, noise.delay_steps).collect();

    let mut state = PendulumState::hanging();
    let mut points = Vec::with_capacity(steps + 1);
    points.push(TrajectoryPoint {
        t: 0.0,
        q1: state.q1,
        q2: state.q2,
        qd1: state.qd1,
        qd2: state.qd2,
        torque: 0.0,
        reward: 0.0,
    });
    for _ in 0..steps {
        // Measured state: true state with optional velocity sensor noise.
        let mut measured = state;
        if let Some(dist) = &vel_noise {
            measured.qd1 += dist.sample(&mut rng);
            measured.qd2 += dist.sample(&mut rng);
        }
        let obs = stats.normalize(scale_observation(&measured, env_cfg.vel_scale));
        let action = policy.mean_action(&obs)?;
        let mut command = action * model.torque_limit * response;
        if let Some(dist) = &tau_noise {
            command += dist.sample(&mut rng);
        }
        let command = if noise.delay_steps > 0 {
            fifo.push_back(command);
            fifo.pop_front().unwrap()
        } else {
            command
        };
        let mut torques = apply_actuation(mode, command, model.torque_limit);
        let applied = torques[active];
        for imp in &noise.impulses {
            if state.t >= imp.time && state.t < imp.time + imp.duration {
                torques[imp.joint] += imp.magnitude;
            }
        }
        state = step_zoh(&state, torques, env_cfg.control_dt, env_cfg.substeps, &model)?;
        let r = reward(state.as_vec4(), applied, &env_cfg.reward);
        points.push(TrajectoryPoint {
            t: state.t,
            q1: state.q1,
            q2: state.q2,
            qd1: state.qd1,
            qd2: state.qd2,
            torque: applied,
            reward: r,
        });
    }
    Ok(Trajectory { dt: env_cfg.control_dt, active_joint: active, points })
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

/// Success thresholds and score normalizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSpec {
    /// Angular tolerance around upright for both links (rad).
    pub angle_tol: f64,
    /// Joint-velocity bound while holding (rad/s).
    pub vel_tol: f64,
    /// Upright must be sustained for this final window (s).
    pub hold_time: f64,
    /// Normalizers for [swingup_time, energy, torque_cost, smoothness,
    /// velocity_cost]; each cost saturates at its normalizer.
    pub normalizers: [f64; 5],
}

impl Default for ScoreSpec {
    fn default() -> Self {
        Self {
            angle_tol: 0.1,
            vel_tol: 0.5,
            hold_time: 1.0,
            normalizers: [10.0, 60.0, 20.0, 0.5, 400.0],
        }
    }
}

impl ScoreSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_tol > 0.0 && self.vel_tol > 0.0 && self.hold_time >= 0.0) {
            return Err(Error::Config("score thresholds must be positive".into()));
        }
        if self.normalizers.iter().any(|&n| !(n.is_finite() && n > 0.0)) {
            return Err(Error::Config("score normalizers must be strictly positive".into()));
        }
        Ok(())
    }
}

/// One evaluated episode, condensed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub success: bool,
    pub swingup_time: f64,
    pub energy: f64,
    pub torque_cost: f64,
    pub torque_smoothness: f64,
    pub velocity_cost: f64,
    pub score: f64,
}

fn upright(p: &TrajectoryPoint, spec: &ScoreSpec) -> bool {
    wrap_angle(p.q1 - PI).abs() < spec.angle_tol
        && wrap_angle(p.q2).abs() < spec.angle_tol
        && p.qd1.abs() < spec.vel_tol
        && p.qd2.abs() < spec.vel_tol
}

/// Weighted combination of the five criteria:
/// `success · (1/5)·Σᵢ (1 − min(cᵢ/nᵢ, 1))`.
pub fn aggregate_score(success: bool, costs: [f64; 5], normalizers: [f64; 5]) -> Result<f64> {
    if normalizers.iter().any(|&n| !(n.is_finite() && n > 0.0)) {
        return Err(Error::Config("score normalizers must be strictly positive".into()));
    }
    if !success {
        return Ok(0.0);
    }
    let sum: f64 = costs
        .iter()
        .zip(&normalizers)
        .map(|(&c, &n)| 1.0 - (c / n).min(1.0))
        .sum();
    Ok(sum / 5.0)
}

/// Scores a trajectory: sustained-upright success, earliest hold onset, and
/// the four integral costs (rectangle rule at the trajectory's dt).
pub fn compute_criteria(traj: &Trajectory, spec: &ScoreSpec) -> Result<CriteriaReport> {
    spec.validate()?;
    if traj.points.len() < 2 {
        return Err(Error::InvalidInput("trajectory has no steps".into()));
    }
    let dt = traj.dt;
    let duration = traj.points.last().unwrap().t;
    let steps = &traj.points[1..];

    // success: upright throughout the final hold window.
    let window_start = duration - spec.hold_time;
    let success = traj
        .points
        .iter()
        .filter(|p| p.t >= window_start)
        .all(|p| upright(p, spec));

    // swingup_time: earliest time from which upright holds to the end.
    let swingup_time = if success {
        let mut onset = 0.0;
        for p in traj.points.iter().rev() {
            if !upright(p, spec) {
                onset = p.t + dt;
                break;
            }
        }
        onset
    } else {
        duration
    };

    let mut energy = 0.0;
    let mut torque_cost = 0.0;
    let mut velocity_cost = 0.0;
    for p in steps {
        let qd_active = if traj.active_joint == 0 { p.qd1 } else { p.qd2 };
        energy += (p.torque * qd_active).abs() * dt;
        torque_cost += p.torque * p.torque * dt;
        velocity_cost += (p.qd1 * p.qd1 + p.qd2 * p.qd2) * dt;
    }
    let torque_smoothness = if steps.len() > 1 {
        steps
            .windows(2)
            .map(|w| (w[1].torque - w[0].torque).abs())
            .sum::<f64>()
            / (steps.len() - 1) as f64
    } else {
        0.0
    };

    let costs = [swingup_time, energy, torque_cost, torque_smoothness, velocity_cost];
    let score = aggregate_score(success, costs, spec.normalizers)?;
    Ok(CriteriaReport {
        success,
        swingup_time,
        energy,
        torque_cost,
        torque_smoothness,
        velocity_cost,
        score,
    })
}

// ---------------------------------------------------------------------------
// Robustness sweep
// ---------------------------------------------------------------------------

pub const ROBUSTNESS_CATEGORIES: [&str; 6] = [
    "model",
    "velocity_noise",
    "torque_noise",
    "torque_response",
    "delay",
    "perturbations",
];

/// Severity grids per category. Every grid point yields one scored episode
/// (stochastic categories run several seeds per point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub model_params: Vec<String>,
    pub model_factors: Vec<f64>,
    pub velocity_noise_stds: Vec<f64>,
    pub torque_noise_stds: Vec<f64>,
    pub response_factors: Vec<f64>,
    pub delay_steps: Vec<usize>,
    /// Number of randomized impulse schedules.
    pub perturbation_seeds: usize,
    /// Seeds per stochastic (noise) grid point.
    pub noise_seeds: usize,
    pub impulse_count: usize,
    /// Impulse magnitudes are drawn uniformly from ±this bound (N·m).
    pub impulse_magnitude: f64,
    pub impulse_duration: (f64, f64),
    /// Episode length per sweep point (control steps).
    pub episode_steps: usize,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            model_params: [
                "mass_1", "mass_2", "length_1", "length_2", "com_1", "com_2", "inertia_1",
                "inertia_2",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            model_factors: vec![0.8, 0.9, 1.1, 1.2],
            velocity_noise_stds: vec![0.05, 0.1, 0.25, 0.5],
            torque_noise_stds: vec![0.05, 0.1, 0.25, 0.5],
            response_factors: vec![0.9, 0.95, 1.05, 1.1],
            delay_steps: vec![1, 2, 3, 5],
            perturbation_seeds: 8,
            noise_seeds: 3,
            impulse_count: 3,
            impulse_magnitude: 3.0,
            impulse_duration: (0.05, 0.2),
            episode_steps: 1000,
        }
    }
}

/// Pass fraction per category plus their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    /// `(category, pass fraction)` in the fixed category order (categories
    /// excluded from a partial sweep are absent).
    pub categories: Vec<(String, f64)>,
    pub overall: f64,
    /// Causes of episodes that failed by erroring rather than by falling.
    pub notes: Vec<String>,
}

/// Builds the randomized impulse schedule for one perturbation-category seed.
fn impulse_schedule(cfg: &RobustnessConfig, seed: u64, idx: usize, duration_s: f64) -> Vec<Impulse> {
    let mut r = rng::indexed_stream(seed, "robust-perturb", idx);
    (0..cfg.impulse_count)
        .map(|_| {
            let time = 0.5 + r.random::<f64>() * (duration_s - 1.5).max(0.1);
            let joint = usize::from(r.random::<f64>() < 0.5);
            let magnitude = (r.random::<f64>() * 2.0 - 1.0) * cfg.impulse_magnitude;
            let duration = cfg.impulse_duration.0
                + r.random::<f64>() * (cfg.impulse_duration.1 - cfg.impulse_duration.0).max(0.0);
            Impulse { time, joint, magnitude, duration }
        })
        .collect()
}

/// Runs the sweep for the selected categories (all six when `only` is None).
/// Episodes within the sweep run in parallel; the report is assembled in the
/// fixed category order, so results do not depend on scheduling.
pub fn robustness_suite(
    policy: &GaussianPolicy,
    stats: &RunningStats,
    env_cfg: &EnvConfig,
    score_spec: &ScoreSpec,
    cfg: &RobustnessConfig,
    seed: u64,
    only: Option<&[String]>,
) -> Result<RobustnessReport> {
    let selected: Vec<&str> = match only {
        None => ROBUSTNESS_CATEGORIES.to_vec(),
        Some(names) => {
            for n in names {
                if !ROBUSTNESS_CATEGORIES.contains(&n.as_str()) {
                    return Err(Error::Config(format!(
                        "unknown robustness category '{n}' (expected one of {ROBUSTNESS_CATEGORIES:?})"
                    )));
                }
            }
            ROBUSTNESS_CATEGORIES
                .iter()
                .copied()
                .filter(|c| names.iter().any(|n| n == c))
                .collect()
        }
    };
    let duration_s = cfg.episode_steps as f64 * env_cfg.control_dt;
    let mut categories = Vec::with_capacity(selected.len());
    let mut notes = Vec::new();
    for cat in selected {
        // Enumerate this category's episodes as NoiseSpecs.
        let mut specs: Vec<NoiseSpec> = Vec::new();
        match cat {
            "model" => {
                for name in &cfg.model_params {
                    for &f in &cfg.model_factors {
                        specs.push(NoiseSpec {
                            model_scale: vec![(name.clone(), f)],
                            ..NoiseSpec::clean()
                        });
                    }
                }
            }
            "velocity_noise" => {
                for &sd in &cfg.velocity_noise_stds {
                    for _ in 0..cfg.noise_seeds {
                        specs.push(NoiseSpec { velocity_noise_std: sd, ..NoiseSpec::clean() });
                    }
                }
            }
            "torque_noise" => {
                for &sd in &cfg.torque_noise_stds {
                    for _ in 0..cfg.noise_seeds {
                        specs.push(NoiseSpec { torque_noise_std: sd, ..NoiseSpec::clean() });
                    }
                }
            }
            "torque_response" => {
                for &f in &cfg.response_factors {
                    specs.push(NoiseSpec { torque_response: f, ..NoiseSpec::clean() });
                }
            }
            "delay" => {
                for &d in &cfg.delay_steps {
                    specs.push(NoiseSpec { delay_steps: d, ..NoiseSpec::clean() });
                }
            }
            "perturbations" => {
                for i in 0..cfg.perturbation_seeds {
                    specs.push(NoiseSpec {
                        impulses: impulse_schedule(cfg, seed, i, duration_s),
                        ..NoiseSpec::clean()
                    });
                }
            }
            _ => unreachable!(),
        }
        if specs.is_empty() {
            return Err(Error::Config(format!("robustness category '{cat}' has an empty grid")));
        }
        let outcomes: Vec<std::result::Result<bool, String>> = specs
            .par_iter()
            .enumerate()
            .map(|(i, spec)| {
                let episode_seed = seed
                    .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1))
                    ^ fnv(cat);
                run_episode(policy, stats, env_cfg, spec, cfg.episode_steps, episode_seed)
                    .and_then(|traj| compute_criteria(&traj, score_spec))
                    .map(|c| c.success)
                    .map_err(|e| format!("{cat}[{i}]: {e}"))
            })
            .collect();
        let mut passes = 0usize;
        for outcome in &outcomes {
            match outcome {
                Ok(true) => passes += 1,
                Ok(false) => {}
                Err(why) => notes.push(why.clone()),
            }
        }
        categories.push((cat.to_string(), passes as f64 / outcomes.len() as f64));
    }
    let overall = categories.iter().map(|(_, f)| f).sum::<f64>() / categories.len() as f64;
    Ok(RobustnessReport { categories, overall, notes })
}

fn fnv(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

// ---------------------------------------------------------------------------
// Report export
// ---------------------------------------------------------------------------

pub const CRITERIA_CSV_HEADER: &str =
    "success,swingup_time,energy,torque_cost,torque_smoothness,velocity_cost,score";

pub fn criteria_to_csv(reports: &[CriteriaReport]) -> String {
    let mut out = String::from(CRITERIA_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.success,
            r.swingup_time,
            r.energy,
            r.torque_cost,
            r.torque_smoothness,
            r.velocity_cost,
            r.score
        );
    }
    out
}

/// Parses the output of `criteria_to_csv` (used by round-trip checks and the
/// self-test).
pub fn parse_criteria_csv(text: &str) -> Result<Vec<CriteriaReport>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CRITERIA_CSV_HEADER => {}
        other => {
            return Err(Error::InvalidInput(format!("bad criteria CSV header: {other:?}")));
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(Error::InvalidInput(format!("criteria CSV row {} malformed", i + 2)));
        }
        let f = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad number '{s}' in criteria CSV")))
        };
        out.push(CriteriaReport {
            success: cols[0] == "true",
            swingup_time: f(cols[1])?,
            energy: f(cols[2])?,
            torque_cost: f(cols[3])?,
            torque_smoothness: f(cols[4])?,
            velocity_cost: f(cols[5])?,
            score: f(cols[6])?,
        });
    }
    Ok(out)
}

pub const ROBUSTNESS_CSV_HEADER: &str = "category,pass_fraction";

pub fn robustness_to_csv(report: &RobustnessReport) -> String {
    let mut out = String::from(ROBUSTNESS_CSV_HEADER);
    out.push('\n');
    for (name, frac) in &report.categories {
        let _ = writeln!(out, "{name},{frac}");
    }
    let _ = writeln!(out, "overall,{}", report.overall);
    out
}

/// Writes criteria and (optionally) robustness reports into `dir`:
/// `criteria.csv`, `robustness.csv`, and a fixed-scale category bar chart
/// `robustness.svg`. Returns the paths written.
pub fn export_report(
    criteria: &[CriteriaReport],
    robustness: Option<&RobustnessReport>,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let crit_path = dir.join("criteria.csv");
    std::fs::write(&crit_path, criteria_to_csv(criteria))?;
    written.push(crit_path);
    if let Some(rob) = robustness {
        let csv_path = dir.join("robustness.csv");
        std::fs::write(&csv_path, robustness_to_csv(rob))?;
        written.push(csv_path);
        let chart = svg::bar_chart_percent(
            &rob.categories,
            "Robustness pass rate by category",
        );
        let svg_path = dir.join("robustness.svg");
        std::fs::write(&svg_path, chart)?;
        written.push(svg_path);
    }
    Ok(written)
}
