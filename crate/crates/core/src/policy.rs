//! One-memory mixed policies and the named strategy families.
//!
//! Each firm holds two dense tables: the initial policy `σ₀(a | s₀)` laid out
//! as `state * k + a`, and the recurrent policy `σ₁(a | s, p_prev)` laid out
//! as `aug * k + a` where `aug = s * M + p_prev`. Deterministic policies are
//! stored as point masses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;

/// Tolerance on the sum of every stored distribution.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// What a distribution is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Conditioning {
    /// `t = 0`, given the initial state.
    Initial { state: usize },
    /// `t ≥ 1`, given the current state and the previous joint price index.
    Recurrent { state: usize, prev: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneMemoryPolicy {
    initial: Vec<f64>,
    recurrent: Vec<f64>,
}

impl OneMemoryPolicy {
    pub fn initial_table(&self) -> &[f64] {
        &self.initial
    }

    pub fn recurrent_table(&self) -> &[f64] {
        &self.recurrent
    }
}

/// Dimensions shared by all firms of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Shape {
    firms: usize,
    actions: usize,
    states: usize,
    joint: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyProfile {
    shape: Shape,
    policies: Vec<OneMemoryPolicy>,
}

fn check_simplex(row: &[f64], what: impl FnOnce() -> String) -> Result<()> {
    if row.iter().any(|&p| !(0.0..=1.0).contains(&p) || p.is_nan()) {
        return Err(Error::InvalidPolicy(format!("{}: entry outside [0,1]", what())));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::InvalidPolicy(format!("{}: sums to {sum}", what())));
    }
    Ok(())
}

fn point_mass(k: usize, a: usize) -> impl Iterator<Item = f64> {
    (0..k).map(move |b| if a == b { 1.0 } else { 0.0 })
}

impl PolicyProfile {
    /// Builds a profile from per-firm `(initial, recurrent)` tables and
    /// checks every row lies on the simplex.
    pub fn from_tables(game: &Game, tables: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let shape = Shape {
            firms: game.firms(),
            actions: game.num_actions(),
            states: game.num_states(),
            joint: game.num_joint(),
        };
        if tables.len() != shape.firms {
            return Err(Error::Dimension(format!(
                "{} policies for {} firms",
                tables.len(),
                shape.firms
            )));
        }
        let k = shape.actions;
        let mut policies = Vec::with_capacity(tables.len());
        for (i, (initial, recurrent)) in tables.into_iter().enumerate() {
            if initial.len() != shape.states * k {
                return Err(Error::Dimension(format!(
                    "firm {i}: initial table has {} entries, expected {}",
                    initial.len(),
                    shape.states * k
                )));
            }
            if recurrent.len() != shape.states * shape.joint * k {
                return Err(Error::Dimension(format!(
                    "firm {i}: recurrent table has {} entries, expected {}",
                    recurrent.len(),
                    shape.states * shape.joint * k
                )));
            }
            for (s, row) in initial.chunks(k).enumerate() {
                check_simplex(row, || format!("firm {i}, initial state {s}"))?;
            }
            for (aug, row) in recurrent.chunks(k).enumerate() {
                check_simplex(row, || format!("firm {i}, augmented state {aug}"))?;
            }
            policies.push(OneMemoryPolicy { initial, recurrent });
        }
        Ok(Self { shape, policies })
    }

    /// Deterministic profile from action maps.
    ///
    /// `initial(firm, state)` and `recurrent(firm, state, prev_joint)` return
    /// price indices.
    pub fn deterministic(
        game: &Game,
        initial: impl Fn(usize, usize) -> usize,
        recurrent: impl Fn(usize, usize, usize) -> usize,
    ) -> Result<Self> {
        let k = game.num_actions();
        let r = game.num_states();
        let m = game.num_joint();
        let mut tables = Vec::with_capacity(game.firms());
        for i in 0..game.firms() {
            let mut init = Vec::with_capacity(r * k);
            for s in 0..r {
                let a = initial(i, s);
                check_action(a, k)?;
                init.extend(point_mass(k, a));
            }
            let mut rec = Vec::with_capacity(r * m * k);
            for s in 0..r {
                for p in 0..m {
                    let a = recurrent(i, s, p);
                    check_action(a, k)?;
                    rec.extend(point_mass(k, a));
                }
            }
            tables.push((init, rec));
        }
        Self::from_tables(game, tables)
    }

    /// Every firm mixes uniformly everywhere.
    pub fn uniform(game: &Game) -> Self {
        let k = game.num_actions();
        let u = 1.0 / k as f64;
        let tables = (0..game.firms())
            .map(|_| {
                (
                    vec![u; game.num_states() * k],
                    vec![u; game.num_augmented() * k],
                )
            })
            .collect();
        Self::from_tables(game, tables).expect("uniform rows are on the simplex")
    }

    /// Every firm plays `action` at every decision point.
    pub fn stationary(game: &Game, action: usize) -> Result<Self> {
        Self::deterministic(game, |_, _| action, |_, _, _| action)
    }

    pub fn firms(&self) -> usize {
        self.shape.firms
    }

    pub fn num_actions(&self) -> usize {
        self.shape.actions
    }

    pub fn policy(&self, firm: usize) -> &OneMemoryPolicy {
        &self.policies[firm]
    }

    /// Checks that the profile was built for a game of the same shape.
    pub fn check_game(&self, game: &Game) -> Result<()> {
        let ok = self.shape.firms == game.firms()
            && self.shape.actions == game.num_actions()
            && self.shape.states == game.num_states()
            && self.shape.joint == game.num_joint();
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("policy profile does not match game shape".into()))
        }
    }

    #[inline]
    pub fn recurrent_row(&self, firm: usize, aug: usize) -> &[f64] {
        let k = self.shape.actions;
        &self.policies[firm].recurrent[aug * k..(aug + 1) * k]
    }

    #[inline]
    pub fn initial_row(&self, firm: usize, state: usize) -> &[f64] {
        let k = self.shape.actions;
        &self.policies[firm].initial[state * k..(state + 1) * k]
    }

    /// The stored distribution of `firm` for the given conditioning.
    pub fn action_distribution(&self, firm: usize, cond: Conditioning) -> Result<&[f64]> {
        if firm >= self.shape.firms {
            return Err(Error::Index(format!("firm {firm} outside 0..{}", self.shape.firms)));
        }
        match cond {
            Conditioning::Initial { state } => {
                if state >= self.shape.states {
                    return Err(Error::Index(format!("initial state {state} out of range")));
                }
                Ok(self.initial_row(firm, state))
            }
            Conditioning::Recurrent { state, prev } => {
                if state >= self.shape.states || prev >= self.shape.joint {
                    return Err(Error::Index(format!(
                        "recurrent conditioning (state {state}, prev {prev}) out of range"
                    )));
                }
                Ok(self.recurrent_row(firm, state * self.shape.joint + prev))
            }
        }
    }

    /// Joint probability of `joint` at augmented state `aug`: the product of
    /// the firms' marginals.
    pub fn joint_recurrent_prob(&self, game: &Game, aug: usize, joint: usize) -> f64 {
        let space = game.joint_space();
        (0..self.shape.firms)
            .map(|i| self.recurrent_row(i, aug)[space.action_of(joint, i)])
            .product()
    }

    /// Full joint distribution over `0..M` at augmented state `aug`.
    pub fn joint_recurrent_distribution(&self, game: &Game, aug: usize) -> Vec<f64> {
        self.joint_distribution(game, |i| self.recurrent_row(i, aug))
    }

    /// Full joint distribution over `0..M` at `t = 0` given `state`.
    pub fn joint_initial_distribution(&self, game: &Game, state: usize) -> Vec<f64> {
        self.joint_distribution(game, |i| self.initial_row(i, state))
    }

    fn joint_distribution<'a>(&'a self, game: &Game, row: impl Fn(usize) -> &'a [f64]) -> Vec<f64> {
        let mut dist = vec![1.0];
        for i in 0..self.shape.firms {
            let r = row(i);
            let mut next = Vec::with_capacity(dist.len() * r.len());
            for &w in &dist {
                next.extend(r.iter().map(|&p| w * p));
            }
            dist = next;
        }
        debug_assert_eq!(dist.len(), game.num_joint());
        dist
    }

    /// The action at `aug` if `firm` plays a point mass there.
    pub fn deterministic_action(&self, firm: usize, aug: usize) -> Option<usize> {
        let row = self.recurrent_row(firm, aug);
        row.iter().position(|&p| p == 1.0)
    }

    /// Replaces the recurrent table of `firm`.
    pub fn with_recurrent(&self, firm: usize, table: Vec<f64>) -> Result<Self> {
        let mut tables: Vec<_> = self
            .policies
            .iter()
            .map(|p| (p.initial.clone(), p.recurrent.clone()))
            .collect();
        tables[firm].1 = table;
        let shape = self.shape;
        let k = shape.actions;
        for (aug, row) in tables[firm].1.chunks(k).enumerate() {
            check_simplex(row, || format!("firm {firm}, augmented state {aug}"))?;
        }
        if tables[firm].1.len() != shape.states * shape.joint * k {
            return Err(Error::Dimension("recurrent table size".into()));
        }
        Ok(Self {
            shape,
            policies: tables
                .into_iter()
                .map(|(initial, recurrent)| OneMemoryPolicy { initial, recurrent })
                .collect(),
        })
    }
}

fn check_action(a: usize, k: usize) -> Result<()> {
    if a >= k {
        return Err(Error::Index(format!("price index {a} outside grid of {k} prices")));
    }
    Ok(())
}

/// Grim trigger: play `p^C` at `t = 0`; afterwards play `p^C` iff every firm
/// played `p^C` last period, otherwise `p*`.
pub fn make_grim_trigger(game: &Game) -> Result<PolicyProfile> {
    game.require_repeated("grim trigger")?;
    let sp = game.special()?;
    let collusive = game.joint_space().symmetric(sp.p_c);
    PolicyProfile::deterministic(
        game,
        |_, _| sp.p_c,
        |_, _, prev| if prev == collusive { sp.p_c } else { sp.p_star },
    )
}

/// Every firm plays `p^C` everywhere, with no punishment.
pub fn make_naive_collusion(game: &Game) -> Result<PolicyProfile> {
    let sp = game.special()?;
    PolicyProfile::stationary(game, sp.p_c)
}

/// Checks a price ladder: strictly increasing, from `p*` to `p^C`.
pub fn check_ladder(game: &Game, ladder: &[usize]) -> Result<()> {
    let sp = game.special()?;
    if ladder.len() < 2 {
        return Err(Error::InvalidPolicy("ladder needs at least two rungs".into()));
    }
    if let Some(&bad) = ladder.iter().find(|&&a| a >= game.num_actions()) {
        return Err(Error::Index(format!("ladder price {bad} outside grid")));
    }
    if ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidPolicy("ladder must be strictly increasing".into()));
    }
    if ladder[0] != sp.p_star || *ladder.last().unwrap() != sp.p_c {
        return Err(Error::InvalidPolicy(format!(
            "ladder must start at p* = {} and end at p^C = {}",
            sp.p_star, sp.p_c
        )));
    }
    Ok(())
}

/// Action prescribed by a ladder at previous joint price `prev`: the next
/// rung after a symmetric rung, `p^C` after `p^C`, and `p*` elsewhere.
pub fn ladder_action(game: &Game, ladder: &[usize], prev: usize) -> usize {
    let space = game.joint_space();
    let top = *ladder.last().unwrap();
    if space.is_symmetric(prev) {
        let a = space.action_of(prev, 0);
        if let Some(pos) = ladder.iter().position(|&l| l == a) {
            return if a == top { top } else { ladder[pos + 1] };
        }
    }
    ladder[0]
}

/// Increasing-ladder profile. At `t = 0` every firm plays the bottom rung `p*`.
pub fn make_increasing_ladder(game: &Game, ladder: &[usize]) -> Result<PolicyProfile> {
    game.require_repeated("the increasing ladder")?;
    check_ladder(game, ladder)?;
    PolicyProfile::deterministic(game, |_, _| ladder[0], |_, _, prev| ladder_action(game, ladder, prev))
}
