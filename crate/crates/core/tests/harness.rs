use std::fs::{self, File};
use std::path::Path;

use collusionlab::harness::{run_experiment, ExperimentConfig, ExperimentSummary};
use collusionlab::io::read_game;
use collusionlab::io::tables::{read_qtables, read_trace, read_values, write_qtables};
use collusionlab::policy::make_grim_trigger;
use collusionlab::qlearning::QTables;
use collusionlab::scenarios::scenario;
use collusionlab::value::solve_bellman;
use serde_json::Value;

fn write_config(dir: &Path, text: &str) -> ExperimentConfig {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    ExperimentConfig::read(&path).unwrap()
}

#[test]
fn verify_mode_values_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mode = \"verify-spe\"\nscenario = \"bertrand5\"\ndeltas = [0.55, 0.6, 0.9]\n[strategy]\nkind = \"grim\"\n",
    );
    let out = dir.path().join("out");
    let ExperimentSummary::VerifySpe { cells } = run_experiment(&cfg, &out, None).unwrap() else {
        panic!("wrong mode")
    };
    let spe: Vec<bool> = cells.iter().map(|c| c.spe).collect();
    assert_eq!(spe, [false, true, true]);

    let game = read_game(&out.join("game.toml")).unwrap().with_common_discount(0.9).unwrap();
    let expected = solve_bellman(&game, &make_grim_trigger(&game).unwrap()).unwrap();
    let back = read_values(&game, File::open(out.join("verify/delta_0.9000_values.csv")).unwrap()).unwrap();
    assert_eq!(back, expected);
}

#[test]
fn override_and_switch_tables_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let game = scenario("pd").unwrap().game().unwrap();
    let q = QTables::from_fn(&game, |_, _, a| if a == 1 { 3.0 } else { 2.5 });
    write_qtables(&game, &q, File::create(dir.path().join("q.csv")).unwrap()).unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
mode = "run-qlearning"
scenario = "pd"
seeds = [1, 2]
output_dir = "results"

[qlearning]
p0 = [0, 0]
horizon = 400
q_override = "q.csv"
[qlearning.schedule]
experimentation = 100
alpha = { kind = "constant", alpha = 0.5 }
"#,
    );
    let out = collusionlab::harness::output_dir(&cfg, None).unwrap();
    assert_eq!(out, dir.path().join("results"));
    let ExperimentSummary::RunQlearning { runs } = run_experiment(&cfg, &out, Some(2)).unwrap() else {
        panic!("wrong mode")
    };
    for r in &runs {
        let run_dir = out.join("runs").join(&r.label);
        let switch = read_qtables(&game, File::open(run_dir.join("q_switch.csv")).unwrap()).unwrap();
        assert_eq!(switch, q);
        assert_eq!(r.conditions.lock_in, Some(true));
        assert_eq!(r.lock_in_time, Some(100));
        assert!(r.stays_locked && r.converged);
        // constant rates: Q(pC, pC) → π(pC)/(1 − δ) = 4
        assert!(r.limit_q_collusive_diff.as_ref().unwrap().iter().all(|d| *d < 1e-9));

        let rows = read_trace(File::open(run_dir.join("trace.csv")).unwrap()).unwrap();
        let text = fs::read_to_string(run_dir.join("q_collusive.csv")).unwrap();
        let mut lines = text.lines().skip(1);
        for pair in rows.chunks(2).filter(|p| p[0].t >= 101) {
            let line = lines.by_ref().find(|l| l.starts_with(&format!("{},", pair[0].t))).unwrap();
            let q0: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert_eq!(q0.to_bits(), pair[0].q_chosen.to_bits());
        }
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "run-qlearning");
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn check_conditions_mode() {
    let dir = tempfile::tempdir().unwrap();
    let game = scenario("pd").unwrap().game().unwrap();
    let pc = game.joint_space().symmetric(1);
    let q = QTables::from_fn(&game, |_, s, a| match (s == pc, a) {
        (true, 1) => 4.0,
        (_, 1) => 1.0,
        _ => 3.0,
    });
    write_qtables(&game, &q, File::create(dir.path().join("q.csv")).unwrap()).unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
mode = "check-conditions"
scenario = "pd"

[conditions]
which = "prop6"
qtables = "q.csv"
p_before_switch = [0, 1]
alpha_t = [0.5, 0.5]
alpha_delta = [3.0, 3.0]
"#,
    );
    let out = dir.path().join("out");
    let ExperimentSummary::CheckConditions { report } = run_experiment(&cfg, &out, None).unwrap() else {
        panic!("wrong mode")
    };
    // the α condition α(δ)(1 − δ) > 1 holds at δ = 0.5 with α(δ) = 3
    assert!(report.holds, "{report:?}");
    let on_disk: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk["report"]["holds"], true);
}
