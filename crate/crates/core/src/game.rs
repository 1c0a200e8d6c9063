//! Finite stochastic pricing games.
//!
//! A [`Game`] has `n` firms, `r` environment states and a shared grid of
//! `k` prices. Joint price vectors are enumerated row-major with firm 0 as
//! the most significant digit, so there are `M = k^n` joint vectors indexed
//! `0..M`. Augmented states `(s, p)` are enumerated as `s * M + p`.
//!
//! Prices are handled by index everywhere; the real price levels are only
//! used for reporting.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance accepted from configuration before rows are renormalised.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Ordered set of distinct price levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceGrid {
    prices: Vec<f64>,
}

impl PriceGrid {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::Config("price grid needs at least one price".into()));
        }
        if prices.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("price grid contains a non-finite price".into()));
        }
        if prices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("price grid must be strictly increasing".into()));
        }
        Ok(Self { prices })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn level(&self, index: usize) -> f64 {
        self.prices[index]
    }

    pub fn levels(&self) -> &[f64] {
        &self.prices
    }
}

/// Enumeration of joint price vectors for `n` firms over `k` prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointSpace {
    firms: usize,
    actions: usize,
    size: usize,
}

impl JointSpace {
    pub fn new(firms: usize, actions: usize) -> Self {
        let size = actions.pow(firms as u32);
        Self {
            firms,
            actions,
            size,
        }
    }

    pub fn firms(&self) -> usize {
        self.firms
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    /// Number of joint vectors, `k^n`.
    pub fn size(&self) -> usize {
        self.size
    }

    fn stride(&self, firm: usize) -> usize {
        self.actions.pow((self.firms - 1 - firm) as u32)
    }

    pub fn encode(&self, prices: &[usize]) -> Result<usize> {
        if prices.len() != self.firms {
            return Err(Error::Dimension(format!(
                "price vector has {} entries, expected {}",
                prices.len(),
                self.firms
            )));
        }
        let mut idx = 0;
        for &p in prices {
            if p >= self.actions {
                return Err(Error::Index(format!(
                    "price index {p} outside grid of {} prices",
                    self.actions
                )));
            }
            idx = idx * self.actions + p;
        }
        Ok(idx)
    }

    pub fn decode(&self, joint: usize) -> Vec<usize> {
        let mut out = vec![0; self.firms];
        let mut rest = joint;
        for slot in out.iter_mut().rev() {
            *slot = rest % self.actions;
            rest /= self.actions;
        }
        out
    }

    /// Price index played by `firm` in joint vector `joint`.
    pub fn action_of(&self, joint: usize, firm: usize) -> usize {
        (joint / self.stride(firm)) % self.actions
    }

    /// `joint` with `firm`'s price replaced by `action`.
    pub fn with_action(&self, joint: usize, firm: usize, action: usize) -> usize {
        let stride = self.stride(firm);
        let current = (joint / stride) % self.actions;
        joint - current * stride + action * stride
    }

    /// The symmetric vector `(a, ..., a)`.
    pub fn symmetric(&self, action: usize) -> usize {
        (0..self.firms).fold(0, |acc, _| acc * self.actions + action)
    }

    pub fn is_symmetric(&self, joint: usize) -> bool {
        let first = self.action_of(joint, 0);
        (1..self.firms).all(|i| self.action_of(joint, i) == first)
    }

    pub fn check(&self, joint: usize) -> Result<()> {
        if joint >= self.size {
            return Err(Error::Index(format!(
                "joint price index {joint} outside 0..{}",
                self.size
            )));
        }
        Ok(())
    }
}

/// Indices of the competitive price `p*` and the collusive-enabling price `p^C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialPrices {
    pub p_star: usize,
    pub p_c: usize,
}

/// Raw game description, checked by [`validate_game`] and consumed by [`Game::new`].
///
/// Layouts:
/// * `profit[(firm * r + state) * M + joint]`
/// * `transition[(state * M + joint) * r + next_state]`
#[derive(Debug, Clone, PartialEq)]
pub struct GameData {
    pub firms: usize,
    pub states: Vec<String>,
    pub prices: Vec<f64>,
    pub profit: Vec<f64>,
    pub transition: Vec<f64>,
    pub discounts: Vec<f64>,
    pub special: Option<SpecialPrices>,
}

impl GameData {
    /// Builds the dense tables from closures over `(state, joint price vector)`.
    pub fn from_fn(
        firms: usize,
        states: Vec<String>,
        prices: Vec<f64>,
        discounts: Vec<f64>,
        special: Option<SpecialPrices>,
        profit: impl Fn(usize, &[usize]) -> Vec<f64>,
        transition: impl Fn(usize, &[usize]) -> Vec<f64>,
    ) -> Self {
        let r = states.len();
        let space = JointSpace::new(firms, prices.len());
        let m = space.size();
        let mut profit_table = vec![0.0; firms * r * m];
        let mut transition_table = vec![0.0; r * m * r];
        for s in 0..r {
            for j in 0..m {
                let joint = space.decode(j);
                for (i, v) in profit(s, &joint).into_iter().enumerate().take(firms) {
                    profit_table[(i * r + s) * m + j] = v;
                }
                for (s2, v) in transition(s, &joint).into_iter().enumerate().take(r) {
                    transition_table[(s * m + j) * r + s2] = v;
                }
            }
        }
        Self {
            firms,
            states,
            prices,
            profit: profit_table,
            transition: transition_table,
            discounts,
            special,
        }
    }

    /// Single-state (repeated) game with the given stage payoffs.
    pub fn repeated(
        firms: usize,
        prices: Vec<f64>,
        discounts: Vec<f64>,
        special: Option<SpecialPrices>,
        profit: impl Fn(&[usize]) -> Vec<f64>,
    ) -> Self {
        Self::from_fn(
            firms,
            vec!["s0".to_string()],
            prices,
            discounts,
            special,
            |_, p| profit(p),
            |_, _| vec![1.0],
        )
    }
}

/// One violated model invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Shape { detail: String },
    PriceGrid { detail: String },
    TransitionRowSum { state: usize, prices: Vec<usize>, sum: f64 },
    TransitionEntry { state: usize, prices: Vec<usize>, next_state: usize, value: f64 },
    NegativeProfit { firm: usize, state: usize, prices: Vec<usize>, value: f64 },
    NonFiniteProfit { firm: usize, state: usize, prices: Vec<usize> },
    Discount { firm: usize, value: f64 },
    SpecialPrice { detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape { detail } => write!(f, "shape: {detail}"),
            Violation::PriceGrid { detail } => write!(f, "price grid: {detail}"),
            Violation::TransitionRowSum { state, prices, sum } => write!(
                f,
                "transition row (state {state}, prices {prices:?}) row sums to {sum}"
            ),
            Violation::TransitionEntry {
                state,
                prices,
                next_state,
                value,
            } => write!(
                f,
                "transition entry P({next_state} | {prices:?}, {state}) = {value} not in [0, 1]"
            ),
            Violation::NegativeProfit {
                firm,
                state,
                prices,
                value,
            } => write!(
                f,
                "profit of firm {firm} at (state {state}, prices {prices:?}) is negative: {value}"
            ),
            Violation::NonFiniteProfit {
                firm,
                state,
                prices,
            } => write!(
                f,
                "profit of firm {firm} at (state {state}, prices {prices:?}) is not finite"
            ),
            Violation::Discount { firm, value } => {
                write!(f, "discount of firm {firm} is {value}: discount not in (0,1)")
            }
            Violation::SpecialPrice { detail } => write!(f, "special prices: {detail}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "pass");
        }
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Checks the model invariants: stochastic transition rows, nonnegative
/// profits, discounts in (0,1), consistent table shapes.
pub fn validate_game(data: &GameData) -> ValidationReport {
    let mut violations = Vec::new();
    let r = data.states.len();
    let k = data.prices.len();

    if data.firms == 0 {
        violations.push(Violation::Shape {
            detail: "at least one firm is required".into(),
        });
    }
    if r == 0 {
        violations.push(Violation::Shape {
            detail: "at least one state is required".into(),
        });
    }
    if let Err(e) = PriceGrid::new(data.prices.clone()) {
        violations.push(Violation::PriceGrid {
            detail: e.to_string(),
        });
    }
    if data.discounts.len() != data.firms {
        violations.push(Violation::Shape {
            detail: format!(
                "{} discounts given for {} firms",
                data.discounts.len(),
                data.firms
            ),
        });
    }
    for (i, &d) in data.discounts.iter().enumerate() {
        if !(d > 0.0 && d < 1.0) {
            violations.push(Violation::Discount { firm: i, value: d });
        }
    }
    if data.firms == 0 || r == 0 || k == 0 {
        return ValidationReport { violations };
    }

    let space = JointSpace::new(data.firms, k);
    let m = space.size();
    if data.profit.len() != data.firms * r * m {
        violations.push(Violation::Shape {
            detail: format!(
                "profit table has {} entries, expected {}",
                data.profit.len(),
                data.firms * r * m
            ),
        });
    } else {
        for i in 0..data.firms {
            for s in 0..r {
                for j in 0..m {
                    let v = data.profit[(i * r + s) * m + j];
                    if !v.is_finite() {
                        violations.push(Violation::NonFiniteProfit {
                            firm: i,
                            state: s,
                            prices: space.decode(j),
                        });
                    } else if v < 0.0 {
                        violations.push(Violation::NegativeProfit {
                            firm: i,
                            state: s,
                            prices: space.decode(j),
                            value: v,
                        });
                    }
                }
            }
        }
    }

    if data.transition.len() != r * m * r {
        violations.push(Violation::Shape {
            detail: format!(
                "transition table has {} entries, expected {}",
                data.transition.len(),
                r * m * r
            ),
        });
    } else {
        for s in 0..r {
            for j in 0..m {
                let row = &data.transition[(s * m + j) * r..(s * m + j + 1) * r];
                for (s2, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        violations.push(Violation::TransitionEntry {
                            state: s,
                            prices: space.decode(j),
                            next_state: s2,
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    violations.push(Violation::TransitionRowSum {
                        state: s,
                        prices: space.decode(j),
                        sum,
                    });
                }
            }
        }
    }

    if let Some(sp) = data.special {
        for (name, idx) in [("p_star", sp.p_star), ("p_c", sp.p_c)] {
            if idx >= k {
                violations.push(Violation::SpecialPrice {
                    detail: format!("{name} = {idx} outside grid of {k} prices"),
                });
            }
        }
    }

    ValidationReport { violations }
}

/// An immutable, validated stochastic game.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    states: Vec<String>,
    grid: PriceGrid,
    space: JointSpace,
    profit: Vec<f64>,
    transition: Vec<f64>,
    discounts: Vec<f64>,
    special: Option<SpecialPrices>,
}

impl Game {
    pub fn new(data: GameData) -> Result<Self> {
        let report = validate_game(&data);
        if !report.is_valid() {
            return Err(Error::InvalidGame(report));
        }
        let r = data.states.len();
        let space = JointSpace::new(data.firms, data.prices.len());
        let m = space.size();
        let mut transition = data.transition;
        for row in transition.chunks_mut(r) {
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= sum);
        }
        debug_assert_eq!(transition.len(), r * m * r);
        Ok(Self {
            states: data.states,
            grid: PriceGrid::new(data.prices)?,
            space,
            profit: data.profit,
            transition,
            discounts: data.discounts,
            special: data.special,
        })
    }

    /// Returns the raw description (useful for edits followed by revalidation).
    pub fn to_data(&self) -> GameData {
        GameData {
            firms: self.firms(),
            states: self.states.clone(),
            prices: self.grid.levels().to_vec(),
            profit: self.profit.clone(),
            transition: self.transition.clone(),
            discounts: self.discounts.clone(),
            special: self.special,
        }
    }

    /// Same game with different discount factors.
    pub fn with_discounts(&self, discounts: Vec<f64>) -> Result<Self> {
        let mut data = self.to_data();
        data.discounts = discounts;
        Self::new(data)
    }

    /// Same game with every firm discounting at `delta`.
    pub fn with_common_discount(&self, delta: f64) -> Result<Self> {
        self.with_discounts(vec![delta; self.firms()])
    }

    pub fn firms(&self) -> usize {
        self.space.firms()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_labels(&self) -> &[String] {
        &self.states
    }

    pub fn num_actions(&self) -> usize {
        self.space.actions()
    }

    pub fn num_joint(&self) -> usize {
        self.space.size()
    }

    /// Number of augmented states `r * M`.
    pub fn num_augmented(&self) -> usize {
        self.num_states() * self.num_joint()
    }

    pub fn joint_space(&self) -> &JointSpace {
        &self.space
    }

    pub fn grid(&self) -> &PriceGrid {
        &self.grid
    }

    pub fn discount(&self, firm: usize) -> f64 {
        self.discounts[firm]
    }

    pub fn discounts(&self) -> &[f64] {
        &self.discounts
    }

    pub fn special(&self) -> Result<SpecialPrices> {
        self.special.ok_or(Error::MissingSpecialPrices)
    }

    pub fn special_opt(&self) -> Option<SpecialPrices> {
        self.special
    }

    pub fn is_repeated(&self) -> bool {
        self.num_states() == 1
    }

    pub fn require_repeated(&self, what: &str) -> Result<()> {
        if self.is_repeated() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "{what} requires a single-state (repeated) game, got {} states",
                self.num_states()
            )))
        }
    }

    /// Augmented index of `(state, joint)`.
    pub fn augmented(&self, state: usize, joint: usize) -> usize {
        state * self.num_joint() + joint
    }

    /// Inverse of [`Game::augmented`].
    pub fn split_augmented(&self, aug: usize) -> (usize, usize) {
        (aug / self.num_joint(), aug % self.num_joint())
    }

    pub fn check_state(&self, state: usize) -> Result<()> {
        if state >= self.num_states() {
            return Err(Error::Index(format!(
                "state {state} outside 0..{}",
                self.num_states()
            )));
        }
        Ok(())
    }

    pub fn check_firm(&self, firm: usize) -> Result<()> {
        if firm >= self.firms() {
            return Err(Error::Index(format!("firm {firm} outside 0..{}", self.firms())));
        }
        Ok(())
    }

    /// `π^i(p, s)`.
    #[inline]
    pub fn profit(&self, firm: usize, joint: usize, state: usize) -> f64 {
        self.profit[(firm * self.num_states() + state) * self.num_joint() + joint]
    }

    /// `P(s' | p, s)`.
    #[inline]
    pub fn transition(&self, state: usize, joint: usize, next: usize) -> f64 {
        let r = self.num_states();
        self.transition[(state * self.num_joint() + joint) * r + next]
    }

    /// Row `P(· | p, s)`.
    #[inline]
    pub fn transition_row(&self, state: usize, joint: usize) -> &[f64] {
        let r = self.num_states();
        let start = (state * self.num_joint() + joint) * r;
        &self.transition[start..start + r]
    }

    /// Largest absolute stage profit of `firm`.
    pub fn max_abs_profit(&self, firm: usize) -> f64 {
        let r = self.num_states();
        let m = self.num_joint();
        self.profit[firm * r * m..(firm + 1) * r * m]
            .iter()
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Profit of `firm` when every firm charges price index `action` in `state`.
    pub fn symmetric_profit(&self, firm: usize, action: usize, state: usize) -> f64 {
        self.profit(firm, self.space.symmetric(action), state)
    }
}

/// Whether joint vector `joint` is a Nash equilibrium of the stage game at
/// `state`. Deviations that tie are allowed.
pub fn is_one_stage_nash(game: &Game, joint: usize, state: usize) -> Result<bool> {
    game.joint_space().check(joint)?;
    game.check_state(state)?;
    let space = game.joint_space();
    for i in 0..game.firms() {
        let base = game.profit(i, joint, state);
        for q in 0..game.num_actions() {
            if game.profit(i, space.with_action(joint, i, q), state) > base {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Best payoff of a firm deviating from the all-`p^C` vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestDeviation {
    /// `max_{p ≠ p^C} π^i(p, p^C_{-i})`.
    pub payoff: f64,
    pub action: usize,
    /// `π^i(p^C, ..., p^C)`.
    pub collusive_payoff: f64,
    /// Set when the best alternative earns strictly less than colluding, i.e.
    /// `p^C` is a strict best reply to itself.
    pub below_collusive: bool,
}

pub fn best_deviation_payoff(game: &Game, firm: usize, state: usize) -> Result<BestDeviation> {
    game.check_firm(firm)?;
    game.check_state(state)?;
    let sp = game.special()?;
    let space = game.joint_space();
    let collusive = space.symmetric(sp.p_c);
    let mut best: Option<(f64, usize)> = None;
    for q in (0..game.num_actions()).filter(|&q| q != sp.p_c) {
        let v = game.profit(firm, space.with_action(collusive, firm, q), state);
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, q));
        }
    }
    let (payoff, action) = best.ok_or_else(|| {
        Error::Unsupported("best deviation needs a price other than p_c".into())
    })?;
    let collusive_payoff = game.profit(firm, collusive, state);
    Ok(BestDeviation {
        payoff,
        action,
        collusive_payoff,
        below_collusive: payoff < collusive_payoff,
    })
}

/// Lower bound on the discount factor of `firm` above which the grim-trigger
/// profile is self-enforcing:
/// `(π^m − π(p^C)) / (π^m − π(p*))`.
pub fn grim_trigger_delta_threshold(game: &Game, firm: usize) -> Result<f64> {
    game.require_repeated("the grim-trigger threshold")?;
    let sp = game.special()?;
    let dev = best_deviation_payoff(game, firm, 0)?;
    let competitive = game.symmetric_profit(firm, sp.p_star, 0);
    let denominator = dev.payoff - competitive;
    if denominator <= 0.0 {
        return Err(Error::ThresholdUndefined {
            deviation: dev.payoff,
            competitive,
        });
    }
    Ok((dev.payoff - dev.collusive_payoff) / denominator)
}

/// Diagnostics for the structural conditions on `p*` and `p^C` in a repeated game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecialPriceReport {
    pub single_state: bool,
    pub p_star_is_stage_nash: bool,
    pub p_c_is_stage_nash: bool,
    /// Per firm: `π^i(p^C) > π^i(p*)`.
    pub collusive_dominates: Vec<bool>,
    /// Per firm grim-trigger threshold, `None` when undefined.
    pub grim_thresholds: Vec<Option<f64>>,
}

impl SpecialPriceReport {
    pub fn holds(&self) -> bool {
        self.single_state && self.p_star_is_stage_nash && self.collusive_dominates.iter().all(|&b| b)
    }
}

pub fn special_price_report(game: &Game) -> Result<SpecialPriceReport> {
    let sp = game.special()?;
    let space = game.joint_space();
    let p_star_is_stage_nash = is_one_stage_nash(game, space.symmetric(sp.p_star), 0)?;
    let p_c_is_stage_nash = is_one_stage_nash(game, space.symmetric(sp.p_c), 0)?;
    let collusive_dominates = (0..game.firms())
        .map(|i| game.symmetric_profit(i, sp.p_c, 0) > game.symmetric_profit(i, sp.p_star, 0))
        .collect();
    let grim_thresholds = (0..game.firms())
        .map(|i| grim_trigger_delta_threshold(game, i).ok())
        .collect();
    Ok(SpecialPriceReport {
        single_state: game.is_repeated(),
        p_star_is_stage_nash,
        p_c_is_stage_nash,
        collusive_dominates,
        grim_thresholds,
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub const L: usize = 0;
    pub const H: usize = 1;

    /// Two-firm prisoner's dilemma: L = 1, H = 2;
    /// π(L,L) = (1,1), π(H,H) = (2,2), π(L,H) = (3,0), π(H,L) = (0,3).
    pub fn pd_data(delta: f64) -> GameData {
        pd_with_temptation(delta, 3.0)
    }

    pub fn pd_with_temptation(delta: f64, temptation: f64) -> GameData {
        GameData::repeated(
            2,
            vec![1.0, 2.0],
            vec![delta, delta],
            Some(SpecialPrices { p_star: L, p_c: H }),
            move |p| match (p[0], p[1]) {
                (L, L) => vec![1.0, 1.0],
                (H, H) => vec![2.0, 2.0],
                (L, H) => vec![temptation, 0.0],
                _ => vec![0.0, temptation],
            },
        )
    }

    pub fn pd(delta: f64) -> Game {
        Game::new(pd_data(delta)).unwrap()
    }
}
