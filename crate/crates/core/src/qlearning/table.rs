use crate::error::{Error, Result};
use crate::game::Game;

/// Per-firm Q-values indexed by `(augmented state, own action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTables {
    firms: usize,
    augmented: usize,
    actions: usize,
    values: Vec<f64>,
}

impl QTables {
    pub fn zeros(game: &Game) -> Self {
        Self::filled(game, 0.0)
    }

    pub fn filled(game: &Game, value: f64) -> Self {
        let (n, a, k) = (game.firms(), game.num_augmented(), game.num_actions());
        Self {
            firms: n,
            augmented: a,
            actions: k,
            values: vec![value; n * a * k],
        }
    }

    /// Builds tables from `f(firm, aug, action)`.
    pub fn from_fn(game: &Game, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut q = Self::zeros(game);
        for i in 0..q.firms {
            for aug in 0..q.augmented {
                for a in 0..q.actions {
                    q.set(i, aug, a, f(i, aug, a));
                }
            }
        }
        q
    }

    pub fn from_vec(game: &Game, values: Vec<f64>) -> Result<Self> {
        let mut q = Self::zeros(game);
        if values.len() != q.values.len() {
            return Err(Error::Dimension(format!(
                "Q-tables have {} entries, expected {}",
                values.len(),
                q.values.len()
            )));
        }
        q.values = values;
        Ok(q)
    }

    pub fn firms(&self) -> usize {
        self.firms
    }

    pub fn augmented(&self) -> usize {
        self.augmented
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn check_game(&self, game: &Game) -> Result<()> {
        if self.firms != game.firms()
            || self.augmented != game.num_augmented()
            || self.actions != game.num_actions()
        {
            return Err(Error::Dimension(format!(
                "Q-table shape ({}, {}, {}) does not match game ({}, {}, {})",
                self.firms,
                self.augmented,
                self.actions,
                game.firms(),
                game.num_augmented(),
                game.num_actions()
            )));
        }
        Ok(())
    }

    #[inline]
    fn index(&self, firm: usize, aug: usize, action: usize) -> usize {
        (firm * self.augmented + aug) * self.actions + action
    }

    #[inline]
    pub fn get(&self, firm: usize, aug: usize, action: usize) -> f64 {
        self.values[self.index(firm, aug, action)]
    }

    #[inline]
    pub fn set(&mut self, firm: usize, aug: usize, action: usize, value: f64) {
        let idx = self.index(firm, aug, action);
        self.values[idx] = value;
    }

    pub fn row(&self, firm: usize, aug: usize) -> &[f64] {
        let start = self.index(firm, aug, 0);
        &self.values[start..start + self.actions]
    }

    pub fn row_max(&self, firm: usize, aug: usize) -> f64 {
        self.row(firm, aug).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Number of cells whose bit patterns differ.
    pub fn cells_changed(&self, other: &Self) -> usize {
        self.values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a.to_bits() != b.to_bits())
            .count()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}
