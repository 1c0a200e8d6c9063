//! Batch runner: resolves a configuration into cells, runs them and writes
//! a fixed directory layout.
//!
//! ```text
//! <out>/config.toml            configuration snapshot
//! <out>/game.toml              resolved game
//! <out>/summary.json
//! <out>/sweep.csv              sweep mode: one row per (delta, seed)
//! <out>/verify/<delta>.json    reference-strategy reports
//! <out>/verify/<delta>_values.csv
//! <out>/runs/<delta>_seed_<s>/{run.json, trace.csv, q_switch.csv, q_final.csv,
//!                              price_path.csv, q_collusive.csv}
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ConditionKind, ExperimentConfig, Mode, QLearningSpec, StrategySpec};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::io::tables::{fmt_f64, read_qtables, write_qtables, write_trace, write_values};
use crate::io::{game_to_toml, write_json};
use crate::qlearning::{
    alpha_delta_limit_capped, check_grim, check_ladder_conditions, check_lock_in, check_naive, limit_q_closed_form,
    run_q_learning, ConditionReport, QTables, RunConfig, RunOutput,
};
use crate::verify::{check_spe, Verdict};

/// Overrides the output directory of every run.
pub const OUT_DIR_ENV: &str = "COLLUSIONLAB_OUT_DIR";

/// Iteration cap for the per-run `α(δ)` accumulation.
const ALPHA_LIMIT_CAP: usize = 1_000_000;
const ALPHA_LIMIT_TOL: f64 = 1e-12;
/// Trailing greedy periods that must repeat one joint vector for a run to
/// count as converged.
pub const CONVERGENCE_WINDOW: usize = 100;
pub const CONVERGENCE_TOL: f64 = 1e-9;

/// Command-line flag, then the environment, then the config file.
pub fn output_dir(config: &ExperimentConfig, flag: Option<&Path>) -> Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p.to_path_buf());
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|p| !p.is_empty()) {
        return Ok(PathBuf::from(p));
    }
    config
        .output_dir
        .as_ref()
        .map(|p| config.resolve(p))
        .ok_or_else(|| Error::Config(format!("no output directory: pass --out-dir, set {OUT_DIR_ENV} or `output_dir`")))
}

/// Inputs of a sufficient-condition check at the switch to greedy play.
#[derive(Debug, Clone, Copy)]
pub struct ConditionInputs<'a> {
    pub which: ConditionKind,
    pub q_t: &'a QTables,
    pub p_before_switch: usize,
    pub alpha_t: Option<&'a [f64]>,
    pub alpha_delta: Option<&'a [f64]>,
    pub ladder: Option<&'a [usize]>,
}

fn need<'a, T: ?Sized>(v: Option<&'a T>, what: &str, which: ConditionKind) -> Result<&'a T> {
    v.ok_or_else(|| Error::Config(format!("{which} conditions need {what}")))
}

pub fn evaluate_conditions(game: &Game, inp: ConditionInputs<'_>) -> Result<ConditionReport> {
    let w = inp.which;
    let limit = || {
        let at = need(inp.alpha_t, "alpha_t", w)?;
        let ad = need(inp.alpha_delta, "alpha_delta", w)?;
        limit_q_closed_form(game, inp.q_t, inp.p_before_switch, at, ad)
    };
    match w {
        ConditionKind::LockIn => check_lock_in(game, inp.q_t, inp.p_before_switch),
        ConditionKind::Naive => check_naive(game, inp.q_t, inp.p_before_switch, need(inp.alpha_delta, "alpha_delta", w)?),
        ConditionKind::Grim => {
            let q_star = limit()?;
            check_grim(game, inp.q_t, inp.p_before_switch, &q_star, need(inp.alpha_delta, "alpha_delta", w)?)
        }
        ConditionKind::Ladder => {
            let q_star = limit()?;
            let ladder = need(inp.ladder, "a ladder", w)?;
            check_ladder_conditions(game, inp.q_t, inp.p_before_switch, ladder, &q_star, need(inp.alpha_delta, "alpha_delta", w)?)
        }
    }
}

/// Condition verdicts at the switch; `None` when a check does not apply.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunConditions {
    pub lock_in: Option<bool>,
    pub naive: Option<bool>,
    pub grim: Option<bool>,
    pub ladder: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub delta: Option<f64>,
    pub seed: u64,
    pub rng: String,
    pub experimentation: usize,
    pub horizon: usize,
    pub lock_in_time: Option<usize>,
    /// Play stayed at the collusive vector from `lock_in_time` to the horizon.
    pub stays_locked: bool,
    pub final_prices: Vec<usize>,
    pub final_symmetric_price: Option<usize>,
    /// The last [`CONVERGENCE_WINDOW`] periods are greedy and repeat one
    /// joint vector, and the last update moved no cell by more than
    /// [`CONVERGENCE_TOL`].
    pub converged: bool,
    pub last_update: f64,
    pub conditions: RunConditions,
    pub alpha_delta: Option<Vec<f64>>,
    /// Largest `|Q_final − Q*|` over all cells, `Q*` from the lock-in closed form.
    pub limit_q_max_diff: Option<f64>,
    /// `|Q_final(pC, pC) − α(δ) π(pC)|` per firm.
    pub limit_q_collusive_diff: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyCell {
    pub label: String,
    pub delta: Option<f64>,
    pub verdict: Verdict,
    pub spe: bool,
    pub nash_from_t1: bool,
    pub max_recurrent_gain: f64,
    pub max_initial_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaAggregate {
    pub delta: Option<f64>,
    pub runs: usize,
    pub locked: usize,
    pub fraction_locked: f64,
    pub mean_lock_in_time: Option<f64>,
    pub reference: VerifyCell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub runs: Vec<RunSummary>,
    pub per_delta: Vec<DeltaAggregate>,
    pub total_runs: usize,
    /// Share of runs that lock in at the collusive vector and stay there.
    pub fraction_locked: f64,
    /// Mean lock-in time over those runs.
    pub mean_lock_in_time: Option<f64>,
    /// Grid points at which the reference strategy is an SPE.
    pub accepted_deltas: Vec<f64>,
    /// Smallest accepted grid point.
    pub acceptance_boundary: Option<f64>,
    /// Acceptance is upward closed on the grid.
    pub acceptance_monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ExperimentSummary {
    VerifySpe { cells: Vec<VerifyCell> },
    RunQlearning { runs: Vec<RunSummary> },
    CheckConditions { report: ConditionReport },
    Sweep(SweepSummary),
}

fn delta_label(delta: Option<f64>) -> String {
    match delta {
        Some(d) => format!("delta_{d:.4}"),
        None => "delta_base".into(),
    }
}

fn game_at(base: &Game, delta: Option<f64>) -> Result<Game> {
    match delta {
        Some(d) => base.with_common_discount(d),
        None => Ok(base.clone()),
    }
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(BufWriter::new(f))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Fraction of locked runs and their mean lock-in time.
pub fn lock_in_aggregates(runs: &[RunSummary]) -> (usize, f64, Option<f64>) {
    let locked: Vec<&RunSummary> = runs.iter().filter(|r| r.stays_locked).collect();
    let fraction = if runs.is_empty() { 0.0 } else { locked.len() as f64 / runs.len() as f64 };
    let mean_t = mean(locked.iter().filter_map(|r| r.lock_in_time).map(|t| t as f64));
    (locked.len(), fraction, mean_t)
}

fn verify_cell(game: &Game, strategy: &StrategySpec, config: &ExperimentConfig, delta: Option<f64>, dir: &Path) -> Result<VerifyCell> {
    let profile = strategy.build(game, &config.base_dir)?;
    let report = check_spe(game, &profile, config.tolerance)?;
    let label = delta_label(delta);
    write_json(&dir.join(format!("{label}.json")), &report)?;
    write_values(game, &report.values, create_file(&dir.join(format!("{label}_values.csv")))?)?;
    Ok(VerifyCell {
        label,
        delta,
        verdict: report.verdict,
        spe: report.is_spe(),
        nash_from_t1: report.is_nash_from_t1(),
        max_recurrent_gain: report.max_recurrent_gain,
        max_initial_gain: report.max_initial_gain,
    })
}

fn run_conditions(game: &Game, spec: &QLearningSpec, out: &RunOutput) -> (RunConditions, Option<Vec<f64>>, Option<QTables>) {
    let mut c = RunConditions::default();
    let (Some(q_t), Some(prev)) = (&out.q_at_switch, out.p_before_switch) else {
        return (c, None, None);
    };
    if !game.is_repeated() || game.special_opt().is_none() {
        return (c, None, None);
    }
    let verdict = |which, alpha_t: Option<&[f64]>, alpha_delta: Option<&[f64]>| {
        let inp = ConditionInputs {
            which,
            q_t,
            p_before_switch: prev,
            alpha_t,
            alpha_delta,
            ladder: spec.ladder.as_deref(),
        };
        evaluate_conditions(game, inp).ok().map(|r| r.holds)
    };
    c.lock_in = verdict(ConditionKind::LockIn, None, None);
    let switch = spec.schedule.experimentation;
    let alpha_t = out.trace.step(switch).map(|s| s.alphas.clone());
    let alpha_delta = (0..game.firms())
        .map(|i| {
            alpha_delta_limit_capped(&spec.schedule.alpha, game.discount(i), switch, ALPHA_LIMIT_TOL, ALPHA_LIMIT_CAP)
                .ok()
                .filter(|l| l.converged)
                .map(|l| l.value)
        })
        .collect::<Option<Vec<f64>>>();
    let Some(ad) = alpha_delta else {
        return (c, None, None);
    };
    c.naive = verdict(ConditionKind::Naive, None, Some(&ad));
    let q_star = alpha_t.as_deref().and_then(|at| limit_q_closed_form(game, q_t, prev, at, &ad).ok());
    if q_star.is_some() {
        c.grim = verdict(ConditionKind::Grim, alpha_t.as_deref(), Some(&ad));
        if spec.ladder.is_some() {
            c.ladder = verdict(ConditionKind::Ladder, alpha_t.as_deref(), Some(&ad));
        }
    }
    (c, Some(ad), q_star)
}

fn write_price_path(game: &Game, out: &RunOutput, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let n = game.firms();
    let mut header = vec!["t".to_string(), "state".to_string()];
    header.extend((0..n).map(|i| format!("price_{i}")));
    w.write_record(&header)?;
    let space = game.joint_space();
    for s in &out.trace.steps {
        let mut row = vec![s.t.to_string(), s.state.to_string()];
        row.extend(space.decode(s.joint).into_iter().map(|a| fmt_f64(game.grid().level(a))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_collusive_q(game: &Game, out: &RunOutput, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let mut header = vec!["t".to_string()];
    header.extend((0..game.firms()).map(|i| format!("q_{i}")));
    w.write_record(&header)?;
    for (idx, row) in out.collusive_q.iter().enumerate() {
        let mut rec = vec![(idx + 1).to_string()];
        rec.extend(row.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs one seed and writes its directory.
pub fn run_cell(
    game: &Game,
    spec: &QLearningSpec,
    q_override: Option<&QTables>,
    delta: Option<f64>,
    seed: u64,
    dir: &Path,
) -> Result<RunSummary> {
    fs::create_dir_all(dir)?;
    let space = game.joint_space();
    let cfg = RunConfig {
        p0: space.encode(&spec.p0)?,
        initial_state: spec.initial_state,
        horizon: spec.horizon,
        seed,
        q_override_at_switch: q_override.cloned(),
    };
    let out = run_q_learning(game, &spec.schedule, &cfg)?;
    write_trace(game, &out.trace, create_file(&dir.join("trace.csv"))?)?;
    write_qtables(game, &out.final_q, create_file(&dir.join("q_final.csv"))?)?;
    if let Some(q) = &out.q_at_switch {
        write_qtables(game, q, create_file(&dir.join("q_switch.csv"))?)?;
    }
    write_price_path(game, &out, &dir.join("price_path.csv"))?;
    write_collusive_q(game, &out, &dir.join("q_collusive.csv"))?;

    let last = out.trace.steps.last();
    let final_prices = last.map(|s| space.decode(s.joint)).unwrap_or_default();
    let final_symmetric_price = last.filter(|s| space.is_symmetric(s.joint)).map(|s| space.action_of(s.joint, 0));
    let last_update = last
        .map(|s| {
            let aug = game.augmented(s.state, s.prev);
            (0..game.firms())
                .map(|i| (out.final_q.get(i, aug, space.action_of(s.joint, i)) - s.q_chosen[i]).abs())
                .fold(0.0, f64::max)
        })
        .unwrap_or(0.0);
    let steps = &out.trace.steps;
    let window_ok = steps.len() >= CONVERGENCE_WINDOW && {
        let tail = &steps[steps.len() - CONVERGENCE_WINDOW..];
        tail[0].t >= spec.schedule.experimentation && tail.iter().all(|s| s.joint == tail[0].joint)
    };

    let (conditions, alpha_delta, q_star) = run_conditions(game, spec, &out);
    let limit_q_max_diff = q_star.as_ref().map(|q| out.final_q.max_abs_diff(q));
    let limit_q_collusive_diff = match (&alpha_delta, game.special_opt()) {
        (Some(ad), Some(sp)) if game.is_repeated() => {
            let pc = space.symmetric(sp.p_c);
            Some(
                (0..game.firms())
                    .map(|i| (out.final_q.get(i, pc, sp.p_c) - ad[i] * game.profit(i, pc, 0)).abs())
                    .collect(),
            )
        }
        _ => None,
    };

    let summary = RunSummary {
        label: dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        delta,
        seed,
        rng: out.trace.rng.to_string(),
        experimentation: spec.schedule.experimentation,
        horizon: spec.horizon,
        lock_in_time: out.trace.lock_in_time,
        stays_locked: out.trace.stays_locked,
        final_prices,
        final_symmetric_price,
        converged: window_ok && last_update <= CONVERGENCE_TOL,
        last_update,
        conditions,
        alpha_delta,
        limit_q_max_diff,
        limit_q_collusive_diff,
    };
    write_json(&dir.join("run.json"), &summary)?;
    Ok(summary)
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn run_grid(
    config: &ExperimentConfig,
    base: &Game,
    spec: &QLearningSpec,
    q_override: Option<&QTables>,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<Vec<RunSummary>> {
    let cells: Vec<(Option<f64>, u64)> = config
        .delta_grid()
        .into_iter()
        .flat_map(|d| config.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let runs_dir = out_dir.join("runs");
    with_pool(jobs, || {
        cells
            .par_iter()
            .map(|&(d, seed)| {
                let game = game_at(base, d)?;
                let dir = runs_dir.join(format!("{}_seed_{seed}", delta_label(d)));
                run_cell(&game, spec, q_override, d, seed, &dir)
            })
            .collect::<Result<Vec<_>>>()
    })?
}

fn write_sweep_csv(runs: &[RunSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    w.write_record(["delta", "seed", "lock_in_time", "stays_locked", "final_symmetric_price", "converged"])?;
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in runs {
        w.write_record([
            r.delta.map(fmt_f64).unwrap_or_default(),
            r.seed.to_string(),
            opt(r.lock_in_time),
            r.stays_locked.to_string(),
            opt(r.final_symmetric_price),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_summary(runs: Vec<RunSummary>, references: Vec<VerifyCell>) -> SweepSummary {
    let per_delta = references
        .into_iter()
        .map(|reference| {
            let cell: Vec<RunSummary> = runs.iter().filter(|r| r.delta == reference.delta).cloned().collect();
            let (locked, fraction_locked, mean_lock_in_time) = lock_in_aggregates(&cell);
            DeltaAggregate {
                delta: reference.delta,
                runs: cell.len(),
                locked,
                fraction_locked,
                mean_lock_in_time,
                reference,
            }
        })
        .collect::<Vec<_>>();
    let (_, fraction_locked, mean_lock_in_time) = lock_in_aggregates(&runs);
    let accepted_deltas: Vec<f64> = per_delta.iter().filter(|d| d.reference.spe).filter_map(|d| d.delta).collect();
    let mut sorted: Vec<(f64, bool)> = per_delta.iter().filter_map(|d| d.delta.map(|x| (x, d.reference.spe))).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let acceptance_monotone = sorted.windows(2).all(|w| !w[0].1 || w[1].1);
    SweepSummary {
        total_runs: runs.len(),
        runs,
        per_delta,
        fraction_locked,
        mean_lock_in_time,
        acceptance_boundary: sorted.iter().find(|x| x.1).map(|x| x.0),
        accepted_deltas,
        acceptance_monotone,
    }
}

/// Validates `config`, then runs it into `out_dir`. Nothing is written when
/// validation fails.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path, jobs: Option<usize>) -> Result<ExperimentSummary> {
    let base = config.validate()?;
    let conditions_q = match (&config.mode, &config.conditions) {
        (Mode::CheckConditions, Some(c)) => Some(read_qtables(&base, File::open(config.resolve(&c.qtables))?)?),
        _ => None,
    };
    let q_override = match &config.qlearning {
        Some(QLearningSpec { q_override: Some(p), .. }) if config.mode.is_simulation() => {
            Some(read_qtables(&base, File::open(config.resolve(p))?)?)
        }
        _ => None,
    };
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("config.toml"), config.to_toml()?)?;
    fs::write(out_dir.join("game.toml"), game_to_toml(&base)?)?;

    let references = |strategy: &StrategySpec| -> Result<Vec<VerifyCell>> {
        let dir = out_dir.join("verify");
        fs::create_dir_all(&dir)?;
        config
            .delta_grid()
            .into_iter()
            .map(|d| verify_cell(&game_at(&base, d)?, strategy, config, d, &dir))
            .collect()
    };

    let summary = match config.mode {
        Mode::VerifySpe => ExperimentSummary::VerifySpe {
            cells: references(config.strategy.as_ref().expect("validated"))?,
        },
        Mode::RunQlearning => {
            let spec = config.qlearning.as_ref().expect("validated");
            ExperimentSummary::RunQlearning {
                runs: run_grid(config, &base, spec, q_override.as_ref(), out_dir, jobs)?,
            }
        }
        Mode::CheckConditions => {
            let c = config.conditions.as_ref().expect("validated");
            let q_t = conditions_q.expect("loaded above");
            let inp = ConditionInputs {
                which: c.which,
                q_t: &q_t,
                p_before_switch: base.joint_space().encode(&c.p_before_switch)?,
                alpha_t: c.alpha_t.as_deref(),
                alpha_delta: c.alpha_delta.as_deref(),
                ladder: c.ladder.as_deref(),
            };
            ExperimentSummary::CheckConditions {
                report: evaluate_conditions(&base, inp)?,
            }
        }
        Mode::Sweep => {
            let spec = config.qlearning.as_ref().expect("validated");
            let strategy = config.strategy.clone().unwrap_or(StrategySpec::Grim {});
            let refs = references(&strategy)?;
            let runs = run_grid(config, &base, spec, q_override.as_ref(), out_dir, jobs)?;
            write_sweep_csv(&runs, &out_dir.join("sweep.csv"))?;
            ExperimentSummary::Sweep(sweep_summary(runs, refs))
        }
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}
