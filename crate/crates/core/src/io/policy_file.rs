//! TOML policy files: one entry per conditioning state and firm.
//!
//! ```toml
//! [[firm]]
//! initial = [{ state = 0, probs = [0.0, 1.0] }]
//! recurrent = [
//!   { state = 0, prev = [0, 0], probs = [1.0, 0.0] },
//!   ...
//! ]
//! ```
//!
//! Every conditioning state must appear exactly once per firm.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::game_file::read_text;
use crate::error::{Error, Result};
use crate::game::Game;
use crate::policy::PolicyProfile;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub firm: Vec<FirmPolicy>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmPolicy {
    pub initial: Vec<InitialRow>,
    pub recurrent: Vec<RecurrentRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialRow {
    pub state: usize,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrentRow {
    pub state: usize,
    pub prev: Vec<usize>,
    pub probs: Vec<f64>,
}

fn place(table: &mut [f64], filled: &mut [bool], slot: usize, probs: &[f64], k: usize, what: &str) -> Result<()> {
    if probs.len() != k {
        return Err(Error::Parse(format!("{what}: {} probabilities, expected {k}", probs.len())));
    }
    if filled[slot] {
        return Err(Error::Parse(format!("{what}: listed twice")));
    }
    filled[slot] = true;
    table[slot * k..(slot + 1) * k].copy_from_slice(probs);
    Ok(())
}

impl PolicyFile {
    pub fn into_profile(self, game: &Game) -> Result<PolicyProfile> {
        if self.firm.len() != game.firms() {
            return Err(Error::Parse(format!(
                "policy file lists {} firms, game has {}",
                self.firm.len(),
                game.firms()
            )));
        }
        let k = game.num_actions();
        let space = game.joint_space();
        let mut tables = Vec::with_capacity(game.firms());
        for (i, fp) in self.firm.into_iter().enumerate() {
            let mut init = vec![0.0; game.num_states() * k];
            let mut seen = vec![false; game.num_states()];
            for row in &fp.initial {
                game.check_state(row.state)?;
                let what = format!("firm {i}, initial state {}", row.state);
                place(&mut init, &mut seen, row.state, &row.probs, k, &what)?;
            }
            if let Some(s) = seen.iter().position(|x| !x) {
                return Err(Error::Parse(format!("firm {i}: no initial distribution for state {s}")));
            }
            let mut rec = vec![0.0; game.num_augmented() * k];
            let mut seen = vec![false; game.num_augmented()];
            for row in &fp.recurrent {
                game.check_state(row.state)?;
                let aug = game.augmented(row.state, space.encode(&row.prev)?);
                let what = format!("firm {i}, state {}, previous prices {:?}", row.state, row.prev);
                place(&mut rec, &mut seen, aug, &row.probs, k, &what)?;
            }
            if let Some(aug) = seen.iter().position(|x| !x) {
                let (s, prev) = game.split_augmented(aug);
                return Err(Error::Parse(format!(
                    "firm {i}: no recurrent distribution for state {s}, previous prices {:?}",
                    space.decode(prev)
                )));
            }
            tables.push((init, rec));
        }
        PolicyProfile::from_tables(game, tables)
    }

    pub fn from_profile(game: &Game, profile: &PolicyProfile) -> Self {
        let k = game.num_actions();
        let space = game.joint_space();
        let firm = (0..game.firms())
            .map(|i| {
                let pol = profile.policy(i);
                FirmPolicy {
                    initial: (0..game.num_states())
                        .map(|s| InitialRow {
                            state: s,
                            probs: pol.initial_table()[s * k..(s + 1) * k].to_vec(),
                        })
                        .collect(),
                    recurrent: (0..game.num_augmented())
                        .map(|aug| {
                            let (s, prev) = game.split_augmented(aug);
                            RecurrentRow {
                                state: s,
                                prev: space.decode(prev),
                                probs: pol.recurrent_table()[aug * k..(aug + 1) * k].to_vec(),
                            }
                        })
                        .collect(),
                }
            })
            .collect();
        PolicyFile { firm }
    }
}

pub fn parse_policy(game: &Game, text: &str) -> Result<PolicyProfile> {
    toml::from_str::<PolicyFile>(text)?.into_profile(game)
}

pub fn read_policy(game: &Game, path: &Path) -> Result<PolicyProfile> {
    parse_policy(game, &read_text(path)?)
}

pub fn policy_to_toml(game: &Game, profile: &PolicyProfile) -> Result<String> {
    Ok(toml::to_string(&PolicyFile::from_profile(game, profile))?)
}
