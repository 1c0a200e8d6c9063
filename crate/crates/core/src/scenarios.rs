//! Built-in games shipped with the library.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::io::parse_game;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    #[serde(skip)]
    pub source: &'static str,
}

impl Scenario {
    pub fn game(&self) -> Result<Game> {
        parse_game(self.source)
    }
}

const SCENARIOS: [Scenario; 3] = [
    Scenario {
        name: "pd",
        description: "two-firm prisoner's dilemma in prices, delta = 0.5",
        source: include_str!("../scenarios/pd.toml"),
    },
    Scenario {
        name: "bertrand5",
        description: "five-price linear-demand Bertrand duopoly, delta = 0.9",
        source: include_str!("../scenarios/bertrand5.toml"),
    },
    Scenario {
        name: "pd_modified",
        description: "prisoner's dilemma where the collusive price is a stage equilibrium",
        source: include_str!("../scenarios/pd_modified.toml"),
    },
];

pub fn builtin_scenarios() -> Vec<Scenario> {
    SCENARIOS.to_vec()
}

pub fn scenario(name: &str) -> Result<Scenario> {
    SCENARIOS.iter().find(|s| s.name == name).copied().ok_or_else(|| {
        let known: Vec<_> = SCENARIOS.iter().map(|s| s.name).collect();
        Error::Config(format!("unknown scenario {name:?}; known: {}", known.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{grim_trigger_delta_threshold, is_one_stage_nash, special_price_report};

    #[test]
    fn all_scenarios_load() {
        for s in builtin_scenarios() {
            let g = s.game().unwrap();
            assert!(g.is_repeated());
            assert!(special_price_report(&g).unwrap().holds(), "{}", s.name);
        }
        assert!(scenario("nope").is_err());
    }

    #[test]
    fn pd_facts() {
        let g = scenario("pd").unwrap().game().unwrap();
        let s = g.joint_space();
        assert!(is_one_stage_nash(&g, s.symmetric(0), 0).unwrap());
        assert!(!is_one_stage_nash(&g, s.symmetric(1), 0).unwrap());
        assert_eq!(grim_trigger_delta_threshold(&g, 0).unwrap(), 0.5);
    }

    #[test]
    fn bertrand_has_unique_stage_equilibrium_at_lowest_price() {
        let g = scenario("bertrand5").unwrap().game().unwrap();
        let s = g.joint_space();
        let nash: Vec<usize> = (0..g.num_joint()).filter(|&j| is_one_stage_nash(&g, j, 0).unwrap()).collect();
        assert_eq!(nash, vec![s.symmetric(0)]);
        for i in 0..2 {
            assert!(g.profit(i, s.symmetric(4), 0) > g.profit(i, s.symmetric(0), 0));
            assert!((grim_trigger_delta_threshold(&g, i).unwrap() - 0.6).abs() < 1e-15);
        }
    }

    #[test]
    fn modified_pd_collusive_price_is_stage_equilibrium() {
        let g = scenario("pd_modified").unwrap().game().unwrap();
        assert!(is_one_stage_nash(&g, g.joint_space().symmetric(1), 0).unwrap());
    }
}
