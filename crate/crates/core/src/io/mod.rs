//! File formats: TOML inputs, CSV tables and JSON reports.

pub mod game_file;
pub mod policy_file;
pub mod tables;

use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::qlearning::LearningSchedule;

pub use game_file::{game_to_toml, parse_game, read_game};
pub use policy_file::{parse_policy, policy_to_toml, read_policy};

pub fn parse_schedule(text: &str) -> Result<LearningSchedule> {
    let s: LearningSchedule = toml::from_str(text)?;
    s.validate()?;
    Ok(s)
}

pub fn read_schedule(path: &Path) -> Result<LearningSchedule> {
    parse_schedule(&game_file::read_text(path)?)
}

pub fn schedule_to_toml(schedule: &LearningSchedule) -> Result<String> {
    Ok(toml::to_string(schedule)?)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}
