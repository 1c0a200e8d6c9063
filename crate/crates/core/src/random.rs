//! Random games and profiles for property checks and benchmarks.

use rand::Rng;

use crate::game::{Game, GameData, JointSpace, SpecialPrices};
use crate::policy::PolicyProfile;

/// Sizes and ranges for [`random_game`].
#[derive(Debug, Clone)]
pub struct RandomGameSpec {
    pub firms: usize,
    pub actions: usize,
    pub states: usize,
    pub delta_range: (f64, f64),
    pub max_profit: f64,
}

impl Default for RandomGameSpec {
    fn default() -> Self {
        Self {
            firms: 2,
            actions: 3,
            states: 2,
            delta_range: (0.3, 0.9),
            max_profit: 10.0,
        }
    }
}

/// A point on the simplex with `len` entries.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|x| x / sum).collect()
}

pub fn random_game<R: Rng + ?Sized>(rng: &mut R, spec: &RandomGameSpec) -> Game {
    let space = JointSpace::new(spec.firms, spec.actions);
    let m = space.size();
    let r = spec.states;
    let profit: Vec<Vec<f64>> = (0..r * m)
        .map(|_| {
            (0..spec.firms)
                .map(|_| rng.gen::<f64>() * spec.max_profit)
                .collect()
        })
        .collect();
    let transition: Vec<Vec<f64>> = (0..r * m).map(|_| random_simplex(rng, r)).collect();
    let (lo, hi) = spec.delta_range;
    let discounts = (0..spec.firms).map(|_| rng.gen_range(lo..=hi)).collect();
    Game::new(GameData::from_fn(
        spec.firms,
        (0..r).map(|s| format!("s{s}")).collect(),
        (0..spec.actions).map(|a| 1.0 + a as f64).collect(),
        discounts,
        Some(SpecialPrices {
            p_star: 0,
            p_c: spec.actions - 1,
        }),
        |s, p| profit[s * m + space.encode(p).unwrap()].clone(),
        |s, p| transition[s * m + space.encode(p).unwrap()].clone(),
    ))
    .expect("random game satisfies the model invariants")
}

/// Fully mixed random profile.
pub fn random_profile<R: Rng + ?Sized>(rng: &mut R, game: &Game) -> PolicyProfile {
    let k = game.num_actions();
    let tables = (0..game.firms())
        .map(|_| {
            let init = (0..game.num_states())
                .flat_map(|_| random_simplex(rng, k))
                .collect();
            let rec = (0..game.num_augmented())
                .flat_map(|_| random_simplex(rng, k))
                .collect();
            (init, rec)
        })
        .collect();
    PolicyProfile::from_tables(game, tables).expect("random rows are on the simplex")
}

/// Random mixed recurrent table for a single firm (`rM * k` entries).
pub fn random_recurrent_table<R: Rng + ?Sized>(rng: &mut R, game: &Game) -> Vec<f64> {
    (0..game.num_augmented())
        .flat_map(|_| random_simplex(rng, game.num_actions()))
        .collect()
}
