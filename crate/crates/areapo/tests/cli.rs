//! End-to-end checks of the command-line binary: exit codes, artifact
//! layout, and run-to-run determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_areapo"))
        .args(args)
        .env_remove("AREAPO_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("not killed by signal")
}

/// Everything shrunk so a full train → eval → robust chain runs in seconds.
const TINY_CONFIG: &str = r#"
[learner]
n_envs = 2
rollout_steps = 8
epochs = 1
minibatch_size = 8
policy_hidden = [8]
critic_hidden = [8]
total_frames = 32
eval_interval = 1

[env.reset]
episode_cap = 50

[robustness]
model_params = ["mass_1"]
model_factors = [1.1]
velocity_noise_stds = [0.1]
torque_noise_stds = [0.1]
response_factors = [0.9]
delay_steps = [1]
perturbation_seeds = 1
noise_seeds = 1
impulse_count = 1
episode_steps = 30
"#;

fn tiny_train(dir: &Path, seed: &str) -> Output {
    let cfg = dir.join("tiny.toml");
    fs::write(&cfg, TINY_CONFIG).unwrap();
    run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--task",
        "pendubot",
        "--seed",
        seed,
        "--out",
        dir.join("train").to_str().unwrap(),
    ])
}

#[test]
fn train_writes_artifacts_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out_a = tiny_train(a.path(), "11");
    assert_eq!(code(&out_a), 0, "{}", stderr(&out_a));
    let out_b = tiny_train(b.path(), "11");
    assert_eq!(code(&out_b), 0, "{}", stderr(&out_b));

    for name in ["train_log.csv", "best.ckpt", "final.ckpt", "config.toml"] {
        let pa = a.path().join("train").join(name);
        assert!(pa.exists(), "missing {name}");
        assert_eq!(
            fs::read(&pa).unwrap(),
            fs::read(b.path().join("train").join(name)).unwrap(),
            "{name} differs between identical invocations"
        );
    }
    let log = fs::read_to_string(a.path().join("train/train_log.csv")).unwrap();
    assert!(log.starts_with("iter,frames,rho_hat,rho_H_hat,"));
    // 32 frames at 2 envs × 8 steps = 2 iterations.
    assert_eq!(log.lines().count(), 3);
}

#[test]
fn eval_on_untrained_checkpoint_fails_episode_but_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let t = tiny_train(dir.path(), "12");
    assert_eq!(code(&t), 0, "{}", stderr(&t));

    let out_dir = dir.path().join("eval");
    let out = run(&[
        "eval",
        "--checkpoint",
        dir.path().join("train/final.ckpt").to_str().unwrap(),
        "--steps",
        "40",
        "--seed",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("success            false"), "{text}");
    assert!(text.contains("score              0.0000"), "{text}");
    for name in ["criteria.csv", "trajectory.csv", "trajectory.svg", "config.toml"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let criteria = fs::read_to_string(out_dir.join("criteria.csv")).unwrap();
    assert!(criteria.lines().nth(1).unwrap().starts_with("false,"), "{criteria}");
}

#[test]
fn eval_noise_config_adds_disturbed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let t = tiny_train(dir.path(), "13");
    assert_eq!(code(&t), 0, "{}", stderr(&t));
    let noise = dir.path().join("noise.toml");
    fs::write(&noise, "torque_noise_std = 0.5\ndelay_steps = 2\n").unwrap();

    let out_dir = dir.path().join("eval");
    let out = run(&[
        "eval",
        "--checkpoint",
        dir.path().join("train/final.ckpt").to_str().unwrap(),
        "--steps",
        "40",
        "--seed",
        "1",
        "--noise-config",
        noise.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["trajectory_noisy.csv", "trajectory_noisy.svg", "criteria_noisy.csv"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    // The disturbances must actually change the rollout.
    assert_ne!(
        fs::read(out_dir.join("trajectory.csv")).unwrap(),
        fs::read(out_dir.join("trajectory_noisy.csv")).unwrap()
    );
}

#[test]
fn robust_subset_warns_and_parallel_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let t = tiny_train(dir.path(), "14");
    assert_eq!(code(&t), 0, "{}", stderr(&t));
    let cfg = dir.path().join("tiny.toml");
    let ckpt = dir.path().join("train/final.ckpt");

    let mut outputs = Vec::new();
    for (label, extra) in [("par", None), ("seq", Some("--sequential"))] {
        let out_dir = dir.path().join(label);
        let mut args = vec![
            "robust",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "--categories",
            "model,delay",
            "--seed",
            "7",
            "--out",
        ];
        let out_str = out_dir.to_str().unwrap().to_string();
        args.push(Box::leak(out_str.into_boxed_str()));
        if let Some(flag) = extra {
            args.push(flag);
        }
        let out = run(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(
            stderr(&out).contains("only 2 of 6 categories"),
            "missing subset warning: {}",
            stderr(&out)
        );
        let csv = fs::read_to_string(out_dir.join("robustness.csv")).unwrap();
        assert!(csv.starts_with("category,pass_fraction\nmodel,"), "{csv}");
        assert!(csv.contains("\ndelay,"), "{csv}");
        assert!(!csv.contains("velocity_noise"), "unselected category present: {csv}");
        assert!(out_dir.join("robustness.svg").exists());
        outputs.push(csv);
    }
    assert_eq!(outputs[0], outputs[1], "parallel and sequential sweeps disagree");
}

#[test]
fn selftest_passes_and_filter_narrows() {
    let all = run(&["selftest"]);
    assert_eq!(code(&all), 0, "{}", stdout(&all));
    let text = stdout(&all);
    assert!(text.contains("ok   oracle:two-state-cycle"), "{text}");
    assert!(text.contains("ok   physics:energy-conservation"), "{text}");
    assert!(text.contains("0 failed"), "{text}");

    let filtered = run(&["selftest", "--filter", "oracle"]);
    assert_eq!(code(&filtered), 0);
    let text = stdout(&filtered);
    assert!(text.lines().filter(|l| l.starts_with("ok ")).all(|l| l.contains("oracle:")), "{text}");

    let none = run(&["selftest", "--filter", "no-such-check"]);
    assert_eq!(code(&none), 2, "{}", stderr(&none));
}

#[test]
fn selftest_detects_perturbed_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let fixture = manifest.join("fixtures/perturbed_cycle.txt");
    assert!(fixture.exists());
    // Copy so the check runs on an arbitrary user-supplied path.
    let local = dir.path().join("bad.txt");
    fs::copy(&fixture, &local).unwrap();

    let out = run(&["selftest", "--fixture", local.to_str().unwrap(), "--filter", "oracle"]);
    assert_eq!(code(&out), 1, "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("FAIL oracle:perturbed-two-state-cycle"), "{text}");
    assert!(text.contains("gain"), "{text}");
}

#[test]
fn export_renders_charts_from_csv_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let t = tiny_train(dir.path(), "15");
    assert_eq!(code(&t), 0, "{}", stderr(&t));

    let out_dir = dir.path().join("export");
    let out = run(&[
        "export",
        "--log",
        dir.path().join("train/train_log.csv").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["gain_curves.svg", "loss_curves.svg", "eval_score.svg"] {
        let path = out_dir.join(name);
        let body = fs::read_to_string(&path).unwrap();
        assert!(body.starts_with("<svg"), "{name} is not an svg");
    }

    let empty = run(&["export"]);
    assert_eq!(code(&empty), 2);
}

#[test]
fn error_exit_codes_distinguish_config_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();

    let missing_cfg = run(&["train", "--config", "/definitely/not/here.toml"]);
    assert_eq!(code(&missing_cfg), 2);
    assert!(stderr(&missing_cfg).contains("/definitely/not/here.toml"));

    let missing_ckpt = run(&["eval", "--checkpoint", "/definitely/not/here.ckpt"]);
    assert_eq!(code(&missing_ckpt), 3);

    let garbage = dir.path().join("garbage.ckpt");
    fs::write(&garbage, b"not a checkpoint").unwrap();
    let bad = run(&["robust", "--checkpoint", garbage.to_str().unwrap()]);
    assert_eq!(code(&bad), 3, "{}", stderr(&bad));

    let bad_task = run(&["train", "--task", "triplebot"]);
    assert_eq!(code(&bad_task), 2);
    assert!(stderr(&bad_task).contains("triplebot"));
}

#[test]
fn rerunning_from_resolved_snapshot_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    // First run sets everything through flags on top of a config file.
    let first = tiny_train(dir.path(), "17");
    assert_eq!(code(&first), 0, "{}", stderr(&first));

    // Second run consumes only the snapshot the first one wrote.
    let out = run(&[
        "train",
        "--config",
        dir.path().join("train/config.toml").to_str().unwrap(),
        "--seed",
        "17",
        "--out",
        dir.path().join("replay").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["train_log.csv", "final.ckpt", "best.ckpt", "config.toml"] {
        assert_eq!(
            fs::read(dir.path().join("train").join(name)).unwrap(),
            fs::read(dir.path().join("replay").join(name)).unwrap(),
            "{name} differs when replaying the snapshot"
        );
    }
}

#[test]
fn output_root_env_var_is_used_when_no_flag_given() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY_CONFIG).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_areapo"))
        .args(["train", "--config", cfg.to_str().unwrap(), "--seed", "16"])
        .env("AREAPO_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("train/train_log.csv").exists());
    assert!(dir.path().join("train/config.toml").exists());
}
