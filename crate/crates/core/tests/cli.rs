use std::fs::{self, File};
use std::path::Path;
use std::process::{Command, Output};

use collusionlab::io::read_game;
use collusionlab::io::tables::{read_qtables, read_trace, write_qtables};
use collusionlab::qlearning::QTables;
use collusionlab::scenarios::scenario;
use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collusionlab"))
        .args(args)
        .env_remove("COLLUSIONLAB_OUT_DIR")
        .output()
        .unwrap()
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn verify_spe_grim_and_policy_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_stdout(&cli(&["verify-spe", "--scenario", "pd", "--delta", "0.6", "--strategy", "grim"]));
    assert_eq!(v["verdict"], "spe");

    let policy = dir.path().join("grim.toml");
    let p = policy.to_str().unwrap();
    assert!(cli(&["dump-policy", "--scenario", "pd", "--strategy", "grim", "--out", p]).status.success());
    let report = dir.path().join("report.json");
    let r = report.to_str().unwrap();
    assert!(cli(&["verify-spe", "--scenario", "pd", "--delta", "0.4", "--policy", p, "--out", r]).status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["verdict"], "rejected");
    assert!(v["max_recurrent_gain"].as_f64().unwrap() > 0.0);
}

#[test]
fn validate_reports_and_errors_are_structured() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_stdout(&cli(&["validate", "--scenario", "bertrand5"]));
    assert_eq!(v["valid"], true);
    assert_eq!(v["special_prices"]["p_star_is_stage_nash"], true);

    let text = scenario("pd").unwrap().source.replace("discounts = [0.5, 0.5]", "discounts = [0.5, 1.5]");
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, text).unwrap();
    let out = cli(&["validate", "--game", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["valid"], false);
    assert_eq!(v["violations"][0]["kind"], "discount");

    assert_eq!(error_kind(&cli(&["verify-spe", "--game", bad.to_str().unwrap(), "--strategy", "grim"])), "invalid_game");
    assert_eq!(error_kind(&cli(&["verify-spe", "--scenario", "pd", "--strategy", "tit-for-tat"])), "config");
    assert_eq!(error_kind(&cli(&["verify-spe", "--nonsense"])), "usage");
}

#[test]
fn run_qlearning_writes_parseable_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("schedule.toml");
    fs::write(&sched, "experimentation = 400\nalpha = { kind = \"constant\", alpha = 0.2 }\n").unwrap();
    let out = dir.path().join("run");
    let args = [
        "run-qlearning", "--scenario", "pd", "--schedule", sched.to_str().unwrap(), "--p0", "1,1", "--T", "300",
        "--horizon", "500", "--seed", "11", "--out", out.to_str().unwrap(),
    ];
    let summary = json_stdout(&cli(&args));
    assert_eq!(summary["experimentation"], 300);
    assert_eq!(summary["rng"], "ChaCha8Rng");
    let rows = read_trace(File::open(out.join("trace.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| (r.t < 300) == (r.phase == "softmax")));
    let game = scenario("pd").unwrap().game().unwrap();
    read_qtables(&game, File::open(out.join("q_final.csv")).unwrap()).unwrap();
    let on_disk: Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(on_disk, summary);

    // same seed, same bytes
    let again = dir.path().join("again");
    let mut args2 = args;
    args2[args2.len() - 1] = again.to_str().unwrap();
    json_stdout(&cli(&args2));
    for f in ["trace.csv", "q_final.csv", "price_path.csv", "q_collusive.csv"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

fn crafted_grim_tables(dir: &Path) -> std::path::PathBuf {
    let game = scenario("pd").unwrap().game().unwrap().with_common_discount(0.6).unwrap();
    let pc = game.joint_space().symmetric(1);
    let q = QTables::from_fn(&game, |_, s, a| match (s == pc, a) {
        (true, 1) => 4.0,
        (_, 1) => 1.0,
        _ => 3.0,
    });
    let path = dir.join("q_t.csv");
    write_qtables(&game, &q, File::create(&path).unwrap()).unwrap();
    path
}

#[test]
fn check_conditions_and_limit_q() {
    let dir = tempfile::tempdir().unwrap();
    let q = crafted_grim_tables(dir.path());
    let q = q.to_str().unwrap();
    let base = ["--scenario", "pd", "--delta", "0.6", "--qtables", q, "--p-prev", "0,1"];
    let with = |extra: &[&'static str]| {
        let mut a: Vec<&str> = base.to_vec();
        a.extend_from_slice(extra);
        a
    };

    let mut args = vec!["check-conditions", "--which", "prop6"];
    args.extend(with(&["--alpha-t", "0.5,0.5", "--alpha-delta", "3,3"]));
    let report = json_stdout(&cli(&args));
    assert_eq!(report["which"], "grim");
    assert_eq!(report["holds"], true);

    // α(δ)(1 − δ) = 1 fails the strict α condition
    let mut args = vec!["check-conditions", "--which", "grim"];
    args.extend(with(&["--alpha-t", "0.5,0.5", "--alpha-delta", "2.5,2.5"]));
    assert_eq!(json_stdout(&cli(&args))["holds"], false);

    let mut args = vec!["check-conditions", "--which", "thm4"];
    args.extend(with(&[]));
    assert_eq!(json_stdout(&cli(&args))["which"], "lock_in");

    let mut args = vec!["check-conditions", "--which", "naive"];
    args.extend(with(&[]));
    assert_eq!(error_kind(&cli(&args)), "config");

    let out = dir.path().join("limit.csv");
    let mut args = vec!["limit-q"];
    args.extend(with(&["--alpha-t", "0.5,0.5", "--alpha-delta", "3,3", "--out"]));
    args.push(out.to_str().unwrap());
    assert!(cli(&args).status.success());
    let game = scenario("pd").unwrap().game().unwrap();
    let limit = read_qtables(&game, File::open(&out).unwrap()).unwrap();
    let pc = game.joint_space().symmetric(1);
    assert_eq!(limit.get(0, pc, 1), 6.0);
    assert!((limit.get(1, 1, 1) - 2.7).abs() < 1e-15);
}

#[test]
fn alpha_limit_and_scenarios() {
    let v = json_stdout(&cli(&["alpha-limit", "--alpha1", "0.5", "--delta", "0.5"]));
    assert!((v["value"].as_f64().unwrap() - 0.8).abs() < 1e-9);
    assert_eq!(v["sum_diverges"], false);
    let list = json_stdout(&cli(&["scenarios"]));
    assert_eq!(list.as_array().unwrap().len(), 3);
    let out = cli(&["scenarios", "--show", "bertrand5"]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b5.toml");
    fs::write(&path, &out.stdout).unwrap();
    read_game(&path).unwrap();
}

const SWEEP: &str = r#"
mode = "sweep"
scenario = "pd"
seeds = [5, 6]
deltas = [0.4, 0.6]

[qlearning]
p0 = [1, 1]
horizon = 300
[qlearning.schedule]
experimentation = 200
alpha = { kind = "constant", alpha = 0.3 }
"#;

#[test]
fn run_config_respects_env_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(&cfg, SWEEP).unwrap();
    let out_env = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_collusionlab"))
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--seed", "9", "--jobs", "2"])
        .env("COLLUSIONLAB_OUT_DIR", &out_env)
        .output()
        .unwrap();
    let v = json_stdout(&out);
    assert_eq!(v["mode"], "sweep");
    assert_eq!(v["total_runs"], 2);
    assert_eq!(v["acceptance_boundary"], 0.6);
    assert!(out_env.join("runs/delta_0.4000_seed_9/trace.csv").is_file());
    let snapshot = fs::read_to_string(out_env.join("config.toml")).unwrap();
    assert!(snapshot.contains("seeds = [9]"), "{snapshot}");

    // flag wins over the environment
    let flag_dir = dir.path().join("from_flag");
    let out = Command::new(env!("CARGO_BIN_EXE_collusionlab"))
        .args(["run", "--config", cfg.to_str().unwrap(), "--out-dir", flag_dir.to_str().unwrap()])
        .env("COLLUSIONLAB_OUT_DIR", dir.path().join("ignored"))
        .output()
        .unwrap();
    json_stdout(&out);
    assert!(flag_dir.join("summary.json").is_file());
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn bad_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, format!("{SWEEP}\nwarmup = 3\n")).unwrap();
    let out_dir = dir.path().join("out");
    let out = cli(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(error_kind(&out), "toml");
    assert!(!out_dir.exists());

    fs::write(&cfg, SWEEP.replace("scenario = \"pd\"", "game = \"missing.toml\"")).unwrap();
    let out = cli(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(!out_dir.exists());
}
