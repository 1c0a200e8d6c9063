//! Experiment configuration files.
//!
//! ```toml
//! mode = "sweep"            # verify-spe | run-qlearning | check-conditions | sweep
//! scenario = "pd"           # or: game = "games/pd.toml" (relative to this file)
//! seeds = [1, 2, 3]
//! deltas = [0.3, 0.5, 0.7]  # common discounts; empty keeps the game's own
//!
//! [strategy]                # verify-spe and the sweep's reference check
//! kind = "grim"             # grim | naive | ladder | stationary | file
//!
//! [qlearning]
//! p0 = [1, 1]
//! horizon = 3000
//! [qlearning.schedule]
//! experimentation = 2000
//! alpha = { kind = "constant", alpha = 0.1 }
//! beta = { kind = "exponential", beta0 = 1.0, kappa = 0.005 }
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::io::game_file::read_text;
use crate::io::{read_game, read_policy};
use crate::policy::{make_grim_trigger, make_increasing_ladder, make_naive_collusion, PolicyProfile};
use crate::qlearning::LearningSchedule;
use crate::scenarios::scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    VerifySpe,
    RunQlearning,
    CheckConditions,
    Sweep,
}

impl Mode {
    pub fn is_simulation(self) -> bool {
        matches!(self, Mode::RunQlearning | Mode::Sweep)
    }
}

/// Reference strategy profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    Grim {},
    Naive {},
    Ladder { ladder: Vec<usize> },
    Stationary { action: usize },
    File { path: PathBuf },
}

impl StrategySpec {
    pub fn build(&self, game: &Game, base: &Path) -> Result<PolicyProfile> {
        match self {
            StrategySpec::Grim {} => make_grim_trigger(game),
            StrategySpec::Naive {} => make_naive_collusion(game),
            StrategySpec::Ladder { ladder } => make_increasing_ladder(game, ladder),
            StrategySpec::Stationary { action } => PolicyProfile::stationary(game, *action),
            StrategySpec::File { path } => read_policy(game, &resolve(base, path)),
        }
    }
}

/// Sufficient-condition families for the greedy phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    #[serde(alias = "thm4")]
    LockIn,
    #[serde(alias = "prop5")]
    Naive,
    #[serde(alias = "prop6")]
    Grim,
    #[serde(alias = "prop7")]
    Ladder,
}

impl FromStr for ConditionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lock_in" | "lock-in" | "thm4" => Ok(ConditionKind::LockIn),
            "naive" | "prop5" => Ok(ConditionKind::Naive),
            "grim" | "prop6" => Ok(ConditionKind::Grim),
            "ladder" | "prop7" => Ok(ConditionKind::Ladder),
            other => Err(Error::Config(format!(
                "unknown condition family {other:?}; expected lock_in|naive|grim|ladder (or thm4|prop5|prop6|prop7)"
            ))),
        }
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionKind::LockIn => "lock_in",
            ConditionKind::Naive => "naive",
            ConditionKind::Grim => "grim",
            ConditionKind::Ladder => "ladder",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QLearningSpec {
    /// Price indices played at `t = 0`, one per firm.
    pub p0: Vec<usize>,
    #[serde(default)]
    pub initial_state: usize,
    pub horizon: usize,
    pub schedule: LearningSchedule,
    /// Q-table CSV installed at the switch to greedy play.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_override: Option<PathBuf>,
    /// Ladder used for the per-run ladder condition check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsSpec {
    pub which: ConditionKind,
    /// Q-table CSV holding `Q_T`.
    pub qtables: PathBuf,
    /// Price indices of `p_{T−1}`.
    pub p_before_switch: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_delta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qlearning: Option<QLearningSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionsSpec>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_tolerance() -> f64 {
    crate::verify::DEFAULT_TOLERANCE
}

pub(crate) fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c: ExperimentConfig = toml::from_str(text)?;
        c.base_dir = base_dir.to_path_buf();
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&read_text(path)?, &base)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        resolve(&self.base_dir, path)
    }

    /// Loads the referenced game with its own discounts.
    pub fn load_game(&self) -> Result<Game> {
        match (&self.game, &self.scenario) {
            (Some(path), None) => read_game(&self.resolve(path)),
            (None, Some(name)) => scenario(name)?.game(),
            (Some(_), Some(_)) => Err(Error::Config("set either `game` or `scenario`, not both".into())),
            (None, None) => Err(Error::Config("one of `game` or `scenario` is required".into())),
        }
    }

    /// Discount grid; `None` stands for the game's own discounts.
    pub fn delta_grid(&self) -> Vec<Option<f64>> {
        if self.deltas.is_empty() {
            vec![None]
        } else {
            self.deltas.iter().map(|&d| Some(d)).collect()
        }
    }

    /// Checks everything that can be checked without running anything.
    pub fn validate(&self) -> Result<Game> {
        let game = self.load_game()?;
        for &d in &self.deltas {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::Config(format!("delta {d} outside (0, 1)")));
            }
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config(format!("tolerance must be non-negative, got {}", self.tolerance)));
        }
        if self.mode.is_simulation() && self.seeds.is_empty() {
            return Err(Error::Config("seed list must be non-empty for simulation modes".into()));
        }
        if let Some(StrategySpec::File { path }) = &self.strategy {
            require_file(&self.resolve(path))?;
        }
        match self.mode {
            Mode::VerifySpe => {
                let s = self.strategy.as_ref().ok_or_else(|| missing("strategy", self.mode))?;
                s.build(&game, &self.base_dir)?;
            }
            Mode::RunQlearning | Mode::Sweep => {
                let q = self.qlearning.as_ref().ok_or_else(|| missing("qlearning", self.mode))?;
                q.schedule.validate()?;
                game.joint_space().encode(&q.p0)?;
                game.check_state(q.initial_state)?;
                if let Some(path) = &q.q_override {
                    require_file(&self.resolve(path))?;
                }
                if self.mode == Mode::Sweep {
                    game.special()?;
                }
            }
            Mode::CheckConditions => {
                let c = self.conditions.as_ref().ok_or_else(|| missing("conditions", self.mode))?;
                require_file(&self.resolve(&c.qtables))?;
                game.joint_space().encode(&c.p_before_switch)?;
            }
        }
        Ok(game)
    }
}

fn missing(section: &str, mode: Mode) -> Error {
    Error::Config(format!("mode {mode:?} needs a [{section}] section"))
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Config(format!("referenced file {} does not exist", path.display())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"
mode = "sweep"
scenario = "pd"
seeds = [1, 2]
deltas = [0.4, 0.6]

[strategy]
kind = "grim"

[qlearning]
p0 = [1, 1]
horizon = 50
[qlearning.schedule]
experimentation = 20
alpha = { kind = "constant", alpha = 0.2 }
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = ExperimentConfig::parse(SWEEP, Path::new(".")).unwrap();
        assert_eq!(c.mode, Mode::Sweep);
        assert_eq!(c.delta_grid(), vec![Some(0.4), Some(0.6)]);
        c.validate().unwrap();
        let again = ExperimentConfig::parse(&c.to_toml().unwrap(), Path::new(".")).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_unknown_keys_and_empty_seeds() {
        assert!(ExperimentConfig::parse(&format!("{SWEEP}\ncolour = 1\n"), Path::new(".")).is_err());
        let bad = SWEEP.replace("kind = \"grim\"", "kind = \"grim\"\nextra = 2");
        assert!(ExperimentConfig::parse(&bad, Path::new(".")).is_err());
        let c = ExperimentConfig::parse(&SWEEP.replace("seeds = [1, 2]", "seeds = []"), Path::new(".")).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_missing_files_and_bad_deltas() {
        let c = ExperimentConfig::parse(&SWEEP.replace("scenario = \"pd\"", "game = \"nope.toml\""), Path::new("/nonexistent")).unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::parse(&SWEEP.replace("[0.4, 0.6]", "[0.4, 1.0]"), Path::new(".")).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn condition_aliases() {
        assert_eq!("prop6".parse::<ConditionKind>().unwrap(), ConditionKind::Grim);
        assert_eq!("thm4".parse::<ConditionKind>().unwrap(), ConditionKind::LockIn);
        assert!("prop9".parse::<ConditionKind>().is_err());
        let c: ConditionsSpec = toml::from_str("which = \"prop7\"\nqtables = \"q.csv\"\np_before_switch = [0, 1]").unwrap();
        assert_eq!(c.which, ConditionKind::Ladder);
    }
}
