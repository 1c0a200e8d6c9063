//! TOML game definitions.
//!
//! ```toml
//! [game]
//! firms = 2
//! states = ["s0"]           # state labels, in index order
//! prices = [1.0, 2.0]       # strictly increasing price levels
//! discounts = [0.5, 0.5]    # one per firm
//!
//! [profits]
//! # one row per (state, joint price vector), states outer, joint vectors in
//! # row-major order with firm 0 most significant; each row lists the profit
//! # of every firm
//! rows = [[1.0, 1.0], [3.0, 0.0], [0.0, 3.0], [2.0, 2.0]]
//!
//! [transition]              # optional with a single state
//! rows = [[1.0], [1.0], [1.0], [1.0]]
//!
//! [special]                 # optional
//! p_star = 0
//! p_c = 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, GameData, JointSpace, SpecialPrices};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub game: GameSection,
    pub profits: RowsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<RowsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub special: Option<SpecialSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub firms: usize,
    pub states: Vec<String>,
    pub prices: Vec<f64>,
    pub discounts: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowsSection {
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecialSection {
    pub p_star: usize,
    pub p_c: usize,
}

impl GameFile {
    pub fn into_data(self) -> Result<GameData> {
        let g = self.game;
        let r = g.states.len();
        let m = JointSpace::new(g.firms, g.prices.len()).size();
        if self.profits.rows.len() != r * m {
            return Err(Error::Parse(format!(
                "[profits] has {} rows, expected {} ({} states x {} joint price vectors)",
                self.profits.rows.len(),
                r * m,
                r,
                m
            )));
        }
        if let Some(bad) = self.profits.rows.iter().position(|row| row.len() != g.firms) {
            return Err(Error::Parse(format!(
                "[profits] row {bad} has {} entries, expected {}",
                self.profits.rows[bad].len(),
                g.firms
            )));
        }
        let transition_rows = match self.transition {
            Some(t) => t.rows,
            None if r == 1 => vec![vec![1.0]; m],
            None => return Err(Error::Parse("[transition] is required with more than one state".into())),
        };
        if transition_rows.len() != r * m {
            return Err(Error::Parse(format!(
                "[transition] has {} rows, expected {}",
                transition_rows.len(),
                r * m
            )));
        }
        if let Some(bad) = transition_rows.iter().position(|row| row.len() != r) {
            return Err(Error::Parse(format!(
                "[transition] row {bad} has {} entries, expected {r}",
                transition_rows[bad].len()
            )));
        }
        // profit layout is firm-major
        let mut profit = vec![0.0; g.firms * r * m];
        for (row_idx, row) in self.profits.rows.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                profit[i * r * m + row_idx] = v;
            }
        }
        Ok(GameData {
            firms: g.firms,
            states: g.states,
            prices: g.prices,
            profit,
            transition: transition_rows.into_iter().flatten().collect(),
            discounts: g.discounts,
            special: self.special.map(|s| SpecialPrices {
                p_star: s.p_star,
                p_c: s.p_c,
            }),
        })
    }

    pub fn from_game(game: &Game) -> Self {
        let data = game.to_data();
        let r = data.states.len();
        let m = game.num_joint();
        let profits = (0..r * m)
            .map(|row| (0..data.firms).map(|i| data.profit[i * r * m + row]).collect())
            .collect();
        let transition = data.transition.chunks(r).map(|c| c.to_vec()).collect();
        GameFile {
            game: GameSection {
                firms: data.firms,
                states: data.states,
                prices: data.prices,
                discounts: data.discounts,
            },
            profits: RowsSection { rows: profits },
            transition: Some(RowsSection { rows: transition }),
            special: data.special.map(|s| SpecialSection {
                p_star: s.p_star,
                p_c: s.p_c,
            }),
        }
    }
}

pub fn parse_game_data(text: &str) -> Result<GameData> {
    toml::from_str::<GameFile>(text)?.into_data()
}

pub fn parse_game(text: &str) -> Result<Game> {
    Game::new(parse_game_data(text)?)
}

pub fn read_game(path: &Path) -> Result<Game> {
    parse_game(&read_text(path)?)
}

pub fn game_to_toml(game: &Game) -> Result<String> {
    Ok(toml::to_string(&GameFile::from_game(game))?)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::pd;

    const PD: &str = r#"
[game]
firms = 2
states = ["s0"]
prices = [1.0, 2.0]
discounts = [0.5, 0.5]

[profits]
rows = [[1.0, 1.0], [3.0, 0.0], [0.0, 3.0], [2.0, 2.0]]

[special]
p_star = 0
p_c = 1
"#;

    #[test]
    fn parses_pd() {
        let g = parse_game(PD).unwrap();
        let reference = pd(0.5);
        assert_eq!(g.to_data().profit, reference.to_data().profit);
        assert_eq!(g.special().unwrap(), reference.special().unwrap());
    }

    #[test]
    fn round_trips() {
        let g = parse_game(PD).unwrap();
        let again = parse_game(&game_to_toml(&g).unwrap()).unwrap();
        assert_eq!(g.to_data(), again.to_data());
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = PD.replace("firms = 2", "firms = 2\ncolour = \"red\"");
        assert!(matches!(parse_game(&text), Err(Error::TomlDe(_))));
        let text = format!("{PD}\n[extra]\nx = 1\n");
        assert!(parse_game(&text).is_err());
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        let short = PD.replace(", [2.0, 2.0]]", "]");
        assert!(matches!(parse_game(&short), Err(Error::Parse(_))));
        let bad_delta = PD.replace("discounts = [0.5, 0.5]", "discounts = [0.5, 1.0]");
        let err = parse_game(&bad_delta).unwrap_err();
        assert!(err.to_string().contains("discount not in (0,1)"), "{err}");
        let two_states = PD.replace("states = [\"s0\"]", "states = [\"a\", \"b\"]");
        assert!(parse_game(&two_states).is_err());
    }
}
