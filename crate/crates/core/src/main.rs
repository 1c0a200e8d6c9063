use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use collusionlab::game::{special_price_report, validate_game, Game};
use collusionlab::harness::{
    evaluate_conditions, output_dir, run_cell, run_experiment, ConditionInputs, ConditionKind, ExperimentConfig,
    QLearningSpec, StrategySpec,
};
use collusionlab::io::game_file::parse_game_data;
use collusionlab::io::tables::{read_qtables, write_qtables};
use collusionlab::io::{policy_to_toml, read_game, read_schedule, to_json};
use collusionlab::qlearning::{alpha_delta_limit, limit_q_closed_form, AlphaRule};
use collusionlab::scenarios::{builtin_scenarios, scenario};
use collusionlab::verify::{check_spe, DEFAULT_TOLERANCE};
use collusionlab::{Error, Result};

#[derive(Parser)]
#[command(name = "collusionlab", version, about = "One-memory pricing games: SPE checks and Q-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a game file against the model invariants.
    Validate(GameArgs),
    /// Verify that a one-memory profile is a subgame perfect equilibrium.
    VerifySpe(VerifyArgs),
    /// Simulate Q-learning with bounded experimentation.
    RunQlearning(QLearningArgs),
    /// Check sufficient conditions on switchover Q-tables.
    CheckConditions(ConditionArgs),
    /// Closed-form limit Q-tables after lock-in at the collusive price.
    LimitQ(LimitArgs),
    /// Limit of the discounted learning-rate sum for a schedule.
    AlphaLimit(AlphaLimitArgs),
    /// Print a constructed strategy profile as a policy file.
    DumpPolicy(DumpArgs),
    /// List or print the built-in scenarios.
    Scenarios {
        /// Print this scenario's game file.
        #[arg(long)]
        show: Option<String>,
    },
    /// Run an experiment configuration.
    #[command(alias = "sweep")]
    Run(RunArgs),
}

#[derive(Args)]
struct GameArgs {
    /// Game TOML file.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    game: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    scenario: Option<String>,
    /// Common discount replacing the game's own.
    #[arg(long)]
    delta: Option<f64>,
}

impl GameArgs {
    fn load(&self) -> Result<Game> {
        let g = match (&self.game, &self.scenario) {
            (Some(p), _) => read_game(p)?,
            (None, Some(name)) => scenario(name)?.game()?,
            (None, None) => return Err(Error::Config("pass --game or --scenario".into())),
        };
        match self.delta {
            Some(d) => g.with_common_discount(d),
            None => Ok(g),
        }
    }
}

#[derive(Args)]
struct StrategyArgs {
    /// Policy TOML file.
    #[arg(long, conflicts_with = "strategy")]
    policy: Option<PathBuf>,
    /// Constructed profile: grim, naive or ladder.
    #[arg(long)]
    strategy: Option<String>,
    /// Ladder price indices from p* up to p^C, comma-separated.
    #[arg(long, value_delimiter = ',')]
    ladder: Vec<usize>,
}

impl StrategyArgs {
    fn spec(&self) -> Result<StrategySpec> {
        if let Some(p) = &self.policy {
            return Ok(StrategySpec::File { path: p.clone() });
        }
        match self.strategy.as_deref() {
            Some("grim") => Ok(StrategySpec::Grim {}),
            Some("naive") => Ok(StrategySpec::Naive {}),
            Some("ladder") if !self.ladder.is_empty() => Ok(StrategySpec::Ladder { ladder: self.ladder.clone() }),
            Some("ladder") => Err(Error::Config("--strategy ladder needs --ladder".into())),
            Some(other) => Err(Error::Config(format!("unknown strategy {other:?}; expected grim, naive or ladder"))),
            None => Err(Error::Config("pass --policy or --strategy".into())),
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    game: GameArgs,
    #[command(flatten)]
    strategy: StrategyArgs,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QLearningArgs {
    #[command(flatten)]
    game: GameArgs,
    /// Schedule TOML file.
    #[arg(long)]
    schedule: PathBuf,
    /// Initial price indices, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    p0: Vec<usize>,
    /// Experimentation horizon, overriding the schedule's.
    #[arg(long = "T")]
    switch: Option<usize>,
    #[arg(long)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    initial_state: usize,
    /// Q-table CSV installed at the switch to greedy play.
    #[arg(long)]
    q_override: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SwitchArgs {
    #[command(flatten)]
    game: GameArgs,
    /// Q-table CSV holding Q_T.
    #[arg(long)]
    qtables: PathBuf,
    /// Price indices of p_(T-1), comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    p_prev: Vec<usize>,
    /// Per-firm alpha_T, comma-separated.
    #[arg(long, value_delimiter = ',')]
    alpha_t: Vec<f64>,
    /// Per-firm alpha(delta), comma-separated.
    #[arg(long, value_delimiter = ',')]
    alpha_delta: Vec<f64>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn non_empty<T>(v: &[T]) -> Option<&[T]> {
    (!v.is_empty()).then_some(v)
}

#[derive(Args)]
struct ConditionArgs {
    /// lock_in, naive, grim, ladder (or thm4, prop5, prop6, prop7).
    #[arg(long)]
    which: String,
    #[command(flatten)]
    switch: SwitchArgs,
    #[arg(long, value_delimiter = ',')]
    ladder: Vec<usize>,
}

#[derive(Args)]
struct LimitArgs {
    #[command(flatten)]
    switch: SwitchArgs,
}

#[derive(Args)]
struct AlphaLimitArgs {
    /// Schedule TOML file; its alpha rule and horizon are used.
    #[arg(long, conflicts_with = "alpha1")]
    schedule: Option<PathBuf>,
    /// First rate of the appendix rule.
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    delta: f64,
    /// Experimentation horizon.
    #[arg(long = "T")]
    switch: Option<usize>,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    game: GameArgs,
    #[command(flatten)]
    strategy: StrategyArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Replace the configured seed list with this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent runs.
    #[arg(long)]
    jobs: Option<usize>,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    emit(&to_json(value)?, out)
}

fn validate(args: &GameArgs) -> Result<bool> {
    let data = match (&args.game, &args.scenario) {
        (Some(p), _) => parse_game_data(&fs::read_to_string(p)?)?,
        _ => args.load()?.to_data(),
    };
    let report = validate_game(&data);
    let special = if report.is_valid() {
        let game = Game::new(data)?;
        match game.special_opt() {
            Some(_) if game.is_repeated() => Some(special_price_report(&game)?),
            _ => None,
        }
    } else {
        None
    };
    emit_json(
        &json!({ "valid": report.is_valid(), "violations": report.violations, "special_prices": special }),
        None,
    )?;
    Ok(report.is_valid())
}

fn run_qlearning(args: &QLearningArgs) -> Result<()> {
    let game = args.game.load()?;
    let mut schedule = read_schedule(&args.schedule)?;
    if let Some(t) = args.switch {
        schedule.experimentation = t;
        schedule.validate()?;
    }
    let q_override = args
        .q_override
        .as_ref()
        .map(|p| read_qtables(&game, File::open(p)?))
        .transpose()?;
    let spec = QLearningSpec {
        p0: args.p0.clone(),
        initial_state: args.initial_state,
        horizon: args.horizon,
        schedule,
        q_override: None,
        ladder: None,
    };
    let out = args
        .out
        .clone()
        .or_else(|| std::env::var_os(collusionlab::harness::OUT_DIR_ENV).map(PathBuf::from))
        .ok_or_else(|| Error::Config("pass --out".into()))?;
    let summary = run_cell(&game, &spec, q_override.as_ref(), args.game.delta, args.seed, &out)?;
    emit_json(&summary, None)
}

fn load_switch(args: &SwitchArgs) -> Result<(Game, collusionlab::qlearning::QTables, usize)> {
    let game = args.game.load()?;
    let q = read_qtables(&game, File::open(&args.qtables)?)?;
    let prev = game.joint_space().encode(&args.p_prev)?;
    Ok((game, q, prev))
}

fn check_conditions(args: &ConditionArgs) -> Result<()> {
    let which: ConditionKind = args.which.parse()?;
    let s = &args.switch;
    let (game, q_t, prev) = load_switch(s)?;
    let report = evaluate_conditions(
        &game,
        ConditionInputs {
            which,
            q_t: &q_t,
            p_before_switch: prev,
            alpha_t: non_empty(&s.alpha_t),
            alpha_delta: non_empty(&s.alpha_delta),
            ladder: non_empty(&args.ladder),
        },
    )?;
    emit_json(&report, s.out.as_deref())
}

fn need<'a>(v: &'a [f64], what: &str) -> Result<&'a [f64]> {
    non_empty(v).ok_or_else(|| Error::Config(format!("limit-q needs --{what}")))
}

fn limit_q(args: &LimitArgs) -> Result<()> {
    let s = &args.switch;
    let (game, q_t, prev) = load_switch(s)?;
    let q_star = limit_q_closed_form(&game, &q_t, prev, need(&s.alpha_t, "alpha-t")?, need(&s.alpha_delta, "alpha-delta")?)?;
    let mut buf = Vec::new();
    write_qtables(&game, &q_star, &mut buf)?;
    emit(&String::from_utf8(buf).expect("CSV output is UTF-8"), s.out.as_deref())
}

fn alpha_limit(args: &AlphaLimitArgs) -> Result<()> {
    let (rule, switch) = match (&args.schedule, args.alpha1) {
        (Some(p), _) => {
            let s = read_schedule(p)?;
            (s.alpha, args.switch.unwrap_or(s.experimentation))
        }
        (None, Some(alpha1)) => (AlphaRule::Appendix { alpha1, origin: 1 }, args.switch.unwrap_or(0)),
        (None, None) => return Err(Error::Config("pass --schedule or --alpha1".into())),
    };
    emit_json(&alpha_delta_limit(&rule, args.delta, switch, args.tol)?, None)
}

fn run(args: &RunArgs) -> Result<()> {
    let mut config = ExperimentConfig::read(&args.config)?;
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    let out = output_dir(&config, args.out_dir.as_deref())?;
    let summary = run_experiment(&config, &out, args.jobs)?;
    emit_json(&summary, None)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate(args) => {
            return Ok(if validate(&args)? { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Command::VerifySpe(args) => {
            let game = args.game.load()?;
            let profile = args.strategy.spec()?.build(&game, Path::new(""))?;
            let report = check_spe(&game, &profile, args.tol)?;
            emit_json(&report, args.out.as_deref())?;
        }
        Command::RunQlearning(args) => run_qlearning(&args)?,
        Command::CheckConditions(args) => check_conditions(&args)?,
        Command::LimitQ(args) => limit_q(&args)?,
        Command::AlphaLimit(args) => alpha_limit(&args)?,
        Command::DumpPolicy(args) => {
            let game = args.game.load()?;
            let profile = args.strategy.spec()?.build(&game, Path::new(""))?;
            emit(&policy_to_toml(&game, &profile)?, args.out.as_deref())?;
        }
        Command::Scenarios { show } => match show {
            Some(name) => print!("{}", scenario(&name)?.source),
            None => emit_json(&builtin_scenarios(), None)?,
        },
        Command::Run(args) => run(&args)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn report_error(kind: &str, message: &str) -> ExitCode {
    let body = json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{}", serde_json::to_string_pretty(&body).unwrap_or_else(|_| message.to_string()));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim_end());
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => report_error(e.kind(), &e.to_string()),
    }
}
