//! Command-line entry point: training, evaluation, robustness sweeps,
//! self-tests, and artifact export.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use areapo::checkpoint::Checkpoint;
use areapo::config::{load_config, Config};
use areapo::dynamics::{self, ActuationMode, ModelParams, PendulumState};
use areapo::env;
use areapo::error::{Error, Result};
use areapo::eval::{self, NoiseSpec, Trajectory};
use areapo::learner::{self, GainEstimates, RolloutBatch};
use areapo::nn::Mlp;
use areapo::rng;
use areapo::svg;
use areapo::tabular::{self, Fixture, TabularPolicy};

use ndarray::{Array1, Array2};

#[derive(Parser)]
#[command(
    name = "areapo",
    version,
    about = "Average-reward entropy-advantage policy optimization for double-pendulum swing-up"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a controller and write checkpoints plus a training log.
    Train(TrainArgs),
    /// Run a checkpointed controller through a scored episode.
    Eval(EvalArgs),
    /// Run the six-category robustness sweep on a checkpoint.
    Robust(RobustArgs),
    /// Run the built-in health checks (oracle fixtures, physics, gradients).
    Selftest(SelftestArgs),
    /// Re-render charts from previously written CSV artifacts.
    Export(ExportArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// TOML configuration file (defaults apply to everything it omits).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Which joint is driven: acrobot or pendubot.
    #[arg(long)]
    task: Option<String>,
    /// Frame budget override.
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $AREAPO_OUT/train or ./runs/train).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Episode length in control steps (default: the training episode cap).
    #[arg(long)]
    steps: Option<usize>,
    /// TOML disturbance spec; adds a noisy episode export alongside the
    /// clean one.
    #[arg(long)]
    noise_config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RobustArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of: model, velocity_noise, torque_noise,
    /// torque_response, delay, perturbations.
    #[arg(long)]
    categories: Option<String>,
    /// Run episodes on one thread (results are identical either way).
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Only run checks whose name contains this substring.
    #[arg(long)]
    filter: Option<String>,
    /// Extra oracle fixture files to check alongside the built-in ones.
    #[arg(long)]
    fixture: Vec<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Training log CSV; renders gain, loss, and score charts.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Robustness report CSV; renders the category bar chart.
    #[arg(long)]
    robustness: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Train(a) => cmd_train(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Robust(a) => cmd_robust(a),
        Cmd::Selftest(a) => cmd_selftest(a),
        Cmd::Export(a) => cmd_export(a),
    }
}

/// Output directory: explicit flag, else $AREAPO_OUT/<sub>, else runs/<sub>.
fn resolve_out(flag: Option<PathBuf>, sub: &str) -> PathBuf {
    flag.unwrap_or_else(|| match std::env::var_os("AREAPO_OUT") {
        Some(root) => PathBuf::from(root).join(sub),
        None => PathBuf::from("runs").join(sub),
    })
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    let seed = flag.unwrap_or_else(rand::random);
    println!("seed: {seed}");
    seed
}

fn write_snapshot(cfg: &Config, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(task) = &args.task {
        cfg.env.mode = ActuationMode::from_str(task)?;
    }
    if let Some(frames) = args.frames {
        cfg.learner.total_frames = frames;
    }
    cfg.validate()?;
    let seed = resolve_seed(args.seed);
    let out = resolve_out(args.out, "train");
    write_snapshot(&cfg, &out)?;

    let artifacts = learner::train(&cfg.env, &cfg.learner, &cfg.score, seed, &out)?;
    println!(
        "trained {} iterations / {} frames ({:?})",
        artifacts.iterations, artifacts.frames, cfg.env.mode
    );
    println!("final eval score: {:.4}", artifacts.final_eval_score);
    println!("best eval score:  {:.4}", artifacts.best_eval_score);
    println!("log:        {}", artifacts.log_path.display());
    println!("best ckpt:  {}", artifacts.best_checkpoint.display());
    println!("final ckpt: {}", artifacts.final_checkpoint.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn trajectory_chart(traj: &Trajectory, title: &str) -> String {
    let pick = |f: fn(&eval::TrajectoryPoint) -> f64| -> Vec<(f64, f64)> {
        traj.points.iter().map(|p| (p.t, f(p))).collect()
    };
    let series = vec![
        ("q1 (rad)".to_string(), pick(|p| p.q1)),
        ("q2 (rad)".to_string(), pick(|p| p.q2)),
        ("qd1 (rad/s)".to_string(), pick(|p| p.qd1)),
        ("qd2 (rad/s)".to_string(), pick(|p| p.qd2)),
        ("torque (N·m)".to_string(), pick(|p| p.torque)),
    ];
    svg::line_chart(&series, title, "time (s)", "")
}

fn print_criteria(report: &eval::CriteriaReport) {
    println!("success            {}", report.success);
    println!("swingup_time       {:.3} s", report.swingup_time);
    println!("energy             {:.3} J", report.energy);
    println!("torque_cost        {:.4}", report.torque_cost);
    println!("torque_smoothness  {:.5}", report.torque_smoothness);
    println!("velocity_cost      {:.3}", report.velocity_cost);
    println!("score              {:.4}", report.score);
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    cfg.validate()?;
    let ck = Checkpoint::load(&args.checkpoint)?;
    let seed = resolve_seed(args.seed);
    let out = resolve_out(args.out, "eval");
    let snapshot = Config {
        env: ck.env_cfg,
        learner: ck.learner_cfg.clone(),
        score: cfg.score,
        robustness: cfg.robustness.clone(),
    };
    write_snapshot(&snapshot, &out)?;

    let steps = args.steps.unwrap_or(ck.env_cfg.reset.episode_cap);
    let traj = eval::run_episode(
        &ck.policy,
        &ck.stats,
        &ck.env_cfg,
        &NoiseSpec::clean(),
        steps,
        seed,
    )?;
    let report = eval::compute_criteria(&traj, &cfg.score)?;
    print_criteria(&report);
    std::fs::write(out.join("criteria.csv"), eval::criteria_to_csv(&[report]))?;
    std::fs::write(out.join("trajectory.csv"), traj.to_csv())?;
    std::fs::write(
        out.join("trajectory.svg"),
        trajectory_chart(&traj, &format!("{:?} swing-up", ck.env_cfg.mode)),
    )?;

    if let Some(noise_path) = &args.noise_config {
        let text = std::fs::read_to_string(noise_path).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", noise_path.display()))
        })?;
        let noise: NoiseSpec = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", noise_path.display())))?;
        let noisy = eval::run_episode(&ck.policy, &ck.stats, &ck.env_cfg, &noise, steps, seed)?;
        let noisy_report = eval::compute_criteria(&noisy, &cfg.score)?;
        println!("--- with disturbances ({}) ---", noise_path.display());
        print_criteria(&noisy_report);
        std::fs::write(out.join("trajectory_noisy.csv"), noisy.to_csv())?;
        std::fs::write(
            out.join("trajectory_noisy.svg"),
            trajectory_chart(&noisy, &format!("{:?} swing-up, disturbed", ck.env_cfg.mode)),
        )?;
        std::fs::write(out.join("criteria_noisy.csv"), eval::criteria_to_csv(&[noisy_report]))?;
    }
    println!("artifacts in {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// robust
// ---------------------------------------------------------------------------

fn cmd_robust(args: RobustArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    cfg.validate()?;
    let ck = Checkpoint::load(&args.checkpoint)?;
    let seed = resolve_seed(args.seed);
    let out = resolve_out(args.out, "robust");
    let snapshot = Config {
        env: ck.env_cfg,
        learner: ck.learner_cfg.clone(),
        score: cfg.score,
        robustness: cfg.robustness.clone(),
    };
    write_snapshot(&snapshot, &out)?;

    let selected: Option<Vec<String>> = args.categories.map(|s| {
        s.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect()
    });
    if let Some(sel) = &selected {
        eprintln!(
            "warning: only {} of {} categories selected; the overall figure covers just those",
            sel.len(),
            eval::ROBUSTNESS_CATEGORIES.len()
        );
    }
    let run_suite = || {
        eval::robustness_suite(
            &ck.policy,
            &ck.stats,
            &ck.env_cfg,
            &cfg.score,
            &cfg.robustness,
            seed,
            selected.as_deref(),
        )
    };
    let report = if args.sequential {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run_suite)?
    } else {
        run_suite()?
    };

    // A clean baseline episode gives the criteria row next to the sweep.
    let steps = cfg.robustness.episode_steps;
    let traj =
        eval::run_episode(&ck.policy, &ck.stats, &ck.env_cfg, &NoiseSpec::clean(), steps, seed)?;
    let clean = eval::compute_criteria(&traj, &cfg.score)?;

    for (name, frac) in &report.categories {
        println!("{name:<16} {:>6.1}%", frac * 100.0);
    }
    println!("{:<16} {:>6.1}%", "overall", report.overall * 100.0);
    for note in &report.notes {
        eprintln!("note: episode error counted as failure: {note}");
    }
    let written = eval::export_report(&[clean], Some(&report), &out)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

type Check = (String, Box<dyn Fn() -> std::result::Result<(), String>>);

fn fixture_check(fixture: Fixture) -> Check {
    let name = format!("oracle:{}", fixture.name);
    let check = move || -> std::result::Result<(), String> {
        let policy = match &fixture.policy {
            Some(p) => p.clone(),
            None => TabularPolicy::uniform(fixture.mdp.n_states, fixture.mdp.n_actions),
        };
        let result = tabular::exact_soft_advantage(&fixture.mdp, &policy, fixture.tau)
            .map_err(|e| e.to_string())?;
        if let Some(want) = fixture.expect_gain {
            if (result.gain - want).abs() > 1e-8 {
                return Err(format!("gain = {}, fixture expects {}", result.gain, want));
            }
        }
        if let Some(want) = fixture.expect_entropy_gain {
            if (result.entropy_gain - want).abs() > 1e-8 {
                return Err(format!(
                    "entropy gain = {}, fixture expects {}",
                    result.entropy_gain, want
                ));
            }
        }
        Ok(())
    };
    (name, Box::new(check))
}

fn approx(label: &str, got: f64, want: f64, tol: f64) -> std::result::Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{label}: got {got}, want {want} (±{tol})"))
    }
}

fn physics_checks() -> Vec<Check> {
    let energy = || -> std::result::Result<(), String> {
        let p = ModelParams {
            damping_1: 0.0,
            damping_2: 0.0,
            coulomb_1: 0.0,
            coulomb_2: 0.0,
            ..ModelParams::default()
        };
        let mut s = PendulumState::new(1.0, 0.5, 0.0, 0.0);
        let e0 = dynamics::total_energy(&s, &p);
        for _ in 0..1000 {
            s = dynamics::step_zoh(&s, [0.0, 0.0], 0.01, 5, &p).map_err(|e| e.to_string())?;
        }
        let drift = (dynamics::total_energy(&s, &p) - e0).abs();
        if drift < 1e-3 {
            Ok(())
        } else {
            Err(format!("energy drifted {drift} J over 10 s of free swing"))
        }
    };
    let equilibria = || -> std::result::Result<(), String> {
        let p = ModelParams::default();
        for (q1, label) in [(0.0, "hanging"), (std::f64::consts::PI, "upright")] {
            let s = PendulumState::new(q1, 0.0, 0.0, 0.0);
            let acc = dynamics::forward_dynamics(&s, [0.0, 0.0], &p).map_err(|e| e.to_string())?;
            if acc[0].abs() > 1e-9 || acc[1].abs() > 1e-9 {
                return Err(format!("{label} equilibrium accelerates: {acc:?}"));
            }
        }
        Ok(())
    };
    vec![
        ("physics:energy-conservation".into(), Box::new(energy)),
        ("physics:equilibria".into(), Box::new(equilibria)),
    ]
}

fn gradient_check() -> Check {
    let check = || -> std::result::Result<(), String> {
        let mut r = rng::stream(7, "selftest-grad");
        let net = Mlp::new(&[3, 8, 8, 2], 1.0, &mut r).map_err(|e| e.to_string())?;
        let x = Array2::from_shape_fn((4, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
        let dout = Array2::from_shape_fn((4, 2), |(i, j)| ((i * 2 + j) as f64 * 0.61).cos());
        let loss = |net: &Mlp| -> f64 {
            let (y, _) = net.forward(&x).unwrap();
            (&y * &dout).sum()
        };
        let (_, cache) = net.forward(&x).map_err(|e| e.to_string())?;
        let (grads, _) = net.backward(&cache, &dout).map_err(|e| e.to_string())?;
        let n = net.param_count();
        let mut params = vec![0.0; n];
        net.write_params(&mut params);
        let mut analytic = vec![0.0; n];
        grads.write_params(&mut analytic);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut p = params.clone();
            p[i] += h;
            plus.read_params(&p);
            p[i] -= 2.0 * h;
            minus.read_params(&p);
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let denom = analytic[i].abs().max(fd.abs()).max(1e-8);
            worst = worst.max((analytic[i] - fd).abs() / denom);
        }
        if worst < 1e-4 {
            Ok(())
        } else {
            Err(format!("worst relative gradient error {worst:.2e} exceeds 1e-4"))
        }
    };
    ("gradients:finite-difference".into(), Box::new(check))
}

fn env_checks() -> Vec<Check> {
    let rewards = || -> std::result::Result<(), String> {
        let spec = env::RewardSpec::default();
        let pi = std::f64::consts::PI;
        approx("goal, no torque", env::reward([pi, 0.0, 0.0, 0.0], 0.0, &spec), 0.0, 0.0)?;
        approx(
            "hanging, no torque",
            env::reward([0.0; 4], 0.0, &spec),
            -0.001 * 50.0 * pi * pi,
            1e-15,
        )?;
        approx("goal, 1 N·m", env::reward([pi, 0.0, 0.0, 0.0], 1.0, &spec), -0.001, 1e-18)?;
        Ok(())
    };
    let wrap = || -> std::result::Result<(), String> {
        let pi = std::f64::consts::PI;
        approx("wrap(3π)", env::wrap_angle(3.0 * pi), pi, 0.0)?;
        approx("wrap(−π)", env::wrap_angle(-pi), pi, 0.0)?;
        approx("wrap(π/2)", env::wrap_angle(pi / 2.0), pi / 2.0, 1e-15)?;
        Ok(())
    };
    vec![
        ("env:reward-examples".into(), Box::new(rewards)),
        ("env:angle-wrapping".into(), Box::new(wrap)),
    ]
}

fn learner_checks() -> Vec<Check> {
    let gae = || -> std::result::Result<(), String> {
        let nan = f64::NAN;
        let batch = RolloutBatch {
            n_envs: 1,
            steps: 3,
            obs: Array2::zeros((3, 4)),
            actions: vec![0.0; 3],
            pre_clamp: Array1::zeros(3),
            log_prob_old: Array1::zeros(3),
            rewards: vec![1.0, 0.0, 2.0],
            entropy_rewards: vec![0.0; 3],
            values: vec![0.5, 1.0, 0.0],
            entropy_values: vec![0.0; 3],
            truncated: vec![false; 3],
            next_values: vec![nan, nan, 0.25],
            next_entropy_values: vec![0.0; 3],
        };
        let gains = GainEstimates { reward_gain: 0.5, entropy_gain: 0.0 };
        let out = learner::dual_gae(&batch, gains, 0.8, 0.0).map_err(|e| e.to_string())?;
        approx("A_0", out.advantage[0], 0.92, 1e-12)?;
        approx("A_1", out.advantage[1], -0.1, 1e-12)?;
        approx("A_2", out.advantage[2], 1.75, 1e-12)?;
        Ok(())
    };
    vec![("learner:gae-hand-unroll".into(), Box::new(gae))]
}

fn metric_checks() -> Vec<Check> {
    let metrics = || -> std::result::Result<(), String> {
        let mut points = vec![eval::TrajectoryPoint {
            t: 0.0,
            q1: 0.0,
            q2: 0.0,
            qd1: 0.0,
            qd2: 0.0,
            torque: 0.0,
            reward: 0.0,
        }];
        for i in 0..100 {
            points.push(eval::TrajectoryPoint {
                t: (i + 1) as f64 * 0.01,
                q1: 0.0,
                q2: 0.0,
                qd1: 2.0,
                qd2: 0.0,
                torque: 1.0,
                reward: 0.0,
            });
        }
        let traj = Trajectory { dt: 0.01, active_joint: 0, points };
        let report =
            eval::compute_criteria(&traj, &eval::ScoreSpec::default()).map_err(|e| e.to_string())?;
        approx("energy of 1 N·m at 2 rad/s for 1 s", report.energy, 2.0, 1e-9)?;
        approx("torque cost of 1 N·m for 1 s", report.torque_cost, 1.0, 1e-9)?;
        approx("smoothness of constant torque", report.torque_smoothness, 0.0, 0.0)?;
        Ok(())
    };
    let score = || -> std::result::Result<(), String> {
        let n = eval::ScoreSpec::default().normalizers;
        approx("failed episode", eval::aggregate_score(false, [0.0; 5], n).unwrap(), 0.0, 0.0)?;
        approx("perfect episode", eval::aggregate_score(true, [0.0; 5], n).unwrap(), 1.0, 0.0)?;
        let halves = [n[0] / 2.0, n[1] / 2.0, n[2] / 2.0, n[3] / 2.0, n[4] / 2.0];
        approx("half-cost episode", eval::aggregate_score(true, halves, n).unwrap(), 0.5, 1e-15)?;
        Ok(())
    };
    vec![
        ("metrics:integral-examples".into(), Box::new(metrics)),
        ("metrics:score-boundaries".into(), Box::new(score)),
    ]
}

fn cmd_selftest(args: SelftestArgs) -> Result<()> {
    let mut checks: Vec<Check> = Vec::new();
    for fixture in tabular::builtin_fixtures()? {
        checks.push(fixture_check(fixture));
    }
    for path in &args.fixture {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        checks.push(fixture_check(tabular::parse_fixture(&text)?));
    }
    checks.extend(physics_checks());
    checks.push(gradient_check());
    checks.extend(env_checks());
    checks.extend(learner_checks());
    checks.extend(metric_checks());

    let mut ran = 0usize;
    let mut failed = 0usize;
    for (name, check) in &checks {
        if let Some(f) = &args.filter {
            if !name.contains(f.as_str()) {
                continue;
            }
        }
        ran += 1;
        match check() {
            Ok(()) => println!("ok   {name}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if ran == 0 {
        return Err(Error::Config(format!(
            "filter {:?} matched none of the {} checks",
            args.filter.as_deref().unwrap_or(""),
            checks.len()
        )));
    }
    println!("{} checks, {} failed", ran, failed);
    if failed > 0 {
        return Err(Error::InvalidInput(format!("{failed} self-test check(s) failed")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// export
// ---------------------------------------------------------------------------

fn parse_log_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == learner::TRAIN_LOG_HEADER => {}
        other => {
            return Err(Error::InvalidInput(format!(
                "unexpected training log header {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|c| {
                c.parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!("training log row {}: bad number '{c}'", i + 2))
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != 8 {
            return Err(Error::InvalidInput(format!("training log row {} malformed", i + 2)));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn cmd_export(args: ExportArgs) -> Result<()> {
    if args.log.is_none() && args.robustness.is_none() {
        return Err(Error::Config("export needs --log and/or --robustness".into()));
    }
    let out = resolve_out(args.out, "export");
    std::fs::create_dir_all(&out)?;

    if let Some(log_path) = &args.log {
        let text = std::fs::read_to_string(log_path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", log_path.display())))?;
        let rows = parse_log_csv(&text)?;
        let col = |k: usize| -> Vec<(f64, f64)> { rows.iter().map(|r| (r[0], r[k])).collect() };
        type Series = Vec<(String, Vec<(f64, f64)>)>;
        let charts: [(&str, Series, &str); 3] = [
            (
                "gain_curves.svg",
                vec![
                    ("reward gain".to_string(), col(2)),
                    ("entropy gain".to_string(), col(3)),
                ],
                "Gain estimates",
            ),
            (
                "loss_curves.svg",
                vec![
                    ("policy loss".to_string(), col(4)),
                    ("value loss".to_string(), col(5)),
                ],
                "Losses",
            ),
            ("eval_score.svg", vec![("eval score".to_string(), col(7))], "Evaluation score"),
        ];
        for (file, series, title) in charts {
            let path = out.join(file);
            std::fs::write(&path, svg::line_chart(&series, title, "iteration", ""))?;
            println!("wrote {}", path.display());
        }
    }

    if let Some(rob_path) = &args.robustness {
        let text = std::fs::read_to_string(rob_path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", rob_path.display())))?;
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == eval::ROBUSTNESS_CSV_HEADER => {}
            other => {
                return Err(Error::InvalidInput(format!(
                    "unexpected robustness header {other:?}"
                )))
            }
        }
        let mut categories = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (name, frac) = line.split_once(',').ok_or_else(|| {
                Error::InvalidInput(format!("robustness row malformed: {line}"))
            })?;
            if name == "overall" {
                continue;
            }
            let frac: f64 = frac.parse().map_err(|_| {
                Error::InvalidInput(format!("robustness row malformed: {line}"))
            })?;
            categories.push((name.to_string(), frac));
        }
        let path = out.join("robustness.svg");
        std::fs::write(
            &path,
            svg::bar_chart_percent(&categories, "Robustness pass rate by category"),
        )?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
