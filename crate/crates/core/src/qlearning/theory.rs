//! Closed forms and sufficient conditions for the greedy phase of
//! Q-learning in repeated games (a single environment state).
//!
//! With one environment state an augmented state is just the previous joint
//! price vector, so Q-table rows are indexed by joint price index.

use serde::Serialize;

use super::table::QTables;
use crate::error::{Error, Result};
use crate::game::Game;
use crate::policy::{check_ladder, ladder_action, PolicyProfile};
use crate::value::{argmax_with_ties, own_action_values, solve_bellman, ValueVector};
use crate::verify::check_nash_from_t1;

fn collusive_setup(game: &Game, q: &QTables, what: &str) -> Result<(usize, usize, usize)> {
    game.require_repeated(what)?;
    q.check_game(game)?;
    let sp = game.special()?;
    Ok((sp.p_star, sp.p_c, game.joint_space().symmetric(sp.p_c)))
}

fn check_alpha_delta(game: &Game, alpha_delta: &[f64]) -> Result<()> {
    if alpha_delta.len() != game.firms() {
        return Err(Error::Dimension(format!(
            "{} alpha(delta) values for {} firms",
            alpha_delta.len(),
            game.firms()
        )));
    }
    Ok(())
}

/// `(1 − α_T) Q_T(p_{T−1}, p^C) + α_T [π(p^C) + δ Q_T(p^C, p^C)]`.
fn first_greedy_update(game: &Game, q_t: &QTables, firm: usize, prev: usize, alpha_t: f64) -> Result<f64> {
    let sp = game.special()?;
    let pc = game.joint_space().symmetric(sp.p_c);
    Ok((1.0 - alpha_t) * q_t.get(firm, prev, sp.p_c)
        + alpha_t * (game.profit(firm, pc, 0) + game.discount(firm) * q_t.get(firm, pc, sp.p_c)))
}

/// Limit tables after lock-in at the collusive vector:
/// `α(δ_i) π^i(p^C)` at `(p^C, p^C)`, the single first greedy update at
/// `(p_{T−1}, p^C)` when `p_{T−1} ≠ p^C`, and `Q_T` everywhere else.
pub fn limit_q_closed_form(
    game: &Game,
    q_t: &QTables,
    p_before_switch: usize,
    alpha_t: &[f64],
    alpha_delta: &[f64],
) -> Result<QTables> {
    let (_, pc_price, pc) = collusive_setup(game, q_t, "the lock-in limit")?;
    game.joint_space().check(p_before_switch)?;
    check_alpha_delta(game, alpha_delta)?;
    check_alpha_delta(game, alpha_t)?;
    let mut out = q_t.clone();
    for i in 0..game.firms() {
        if p_before_switch != pc {
            let v = first_greedy_update(game, q_t, i, p_before_switch, alpha_t[i])?;
            out.set(i, p_before_switch, pc_price, v);
        }
        out.set(i, pc, pc_price, alpha_delta[i] * game.profit(i, pc, 0));
    }
    Ok(out)
}

/// `Q_t^i(p^C, p^C)` for `t = T+1, …, T + alphas.len() − 1` along a locked-in
/// greedy path, each value summed directly from its closed form:
/// `Π_{k=T+1}^{t−1} ᾱ_k Q_{T+1} + Σ_{k=T+1}^{t−1} Π_{l=k+1}^{t−1} ᾱ_l α_k π^i(p^C)`
/// with `ᾱ_k = 1 − α_k(1 − δ_i)`. `alphas[j]` is `α_{T+j}`.
pub fn lock_in_trajectory(
    game: &Game,
    q_t: &QTables,
    p_before_switch: usize,
    firm: usize,
    alphas: &[f64],
) -> Result<Vec<f64>> {
    let (_, pc_price, pc) = collusive_setup(game, q_t, "the lock-in trajectory")?;
    game.check_firm(firm)?;
    if alphas.is_empty() {
        return Ok(Vec::new());
    }
    let delta = game.discount(firm);
    let profit = game.profit(firm, pc, 0);
    let q_next = if p_before_switch == pc {
        first_greedy_update(game, q_t, firm, pc, alphas[0])?
    } else {
        q_t.get(firm, pc, pc_price)
    };
    let bar: Vec<f64> = alphas.iter().map(|a| 1.0 - a * (1.0 - delta)).collect();
    let mut out = Vec::with_capacity(alphas.len() - 1);
    // t − T runs over 1..len; products over k ∈ [1, t − T − 1] in offsets
    for m in 1..alphas.len() {
        let mut tail = 1.0;
        let mut sum = 0.0;
        for k in (1..m).rev() {
            sum += tail * alphas[k] * profit;
            tail *= bar[k];
        }
        out.push(tail * q_next + sum);
    }
    Ok(out)
}

/// One inequality instance of a sufficient condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionInstance {
    pub firm: usize,
    pub state: Option<Vec<usize>>,
    pub price: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionOutcome {
    pub name: String,
    pub statement: String,
    pub holds: bool,
    pub checked: usize,
    pub violations: Vec<ConditionInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub which: String,
    pub holds: bool,
    pub conditions: Vec<ConditionOutcome>,
    /// Symmetric action per previous joint price index that the induced limit
    /// strategy takes when the conditions hold.
    pub predicted_map: Option<Vec<usize>>,
    pub notes: Vec<String>,
}

struct Condition {
    outcome: ConditionOutcome,
}

impl Condition {
    fn new(name: &str, statement: &str) -> Self {
        Self {
            outcome: ConditionOutcome {
                name: name.into(),
                statement: statement.into(),
                holds: true,
                checked: 0,
                violations: Vec::new(),
            },
        }
    }

    fn record(&mut self, game: &Game, firm: usize, state: Option<usize>, price: Option<usize>, lhs: f64, rhs: f64, ok: bool) {
        self.outcome.checked += 1;
        if !ok {
            self.outcome.holds = false;
            self.outcome.violations.push(ConditionInstance {
                firm,
                state: state.map(|s| game.joint_space().decode(s)),
                price,
                lhs,
                rhs,
            });
        }
    }

    fn strict(&mut self, game: &Game, firm: usize, state: Option<usize>, price: Option<usize>, lhs: f64, rhs: f64) {
        self.record(game, firm, state, price, lhs, rhs, lhs > rhs);
    }

    fn weak(&mut self, game: &Game, firm: usize, state: Option<usize>, price: Option<usize>, lhs: f64, rhs: f64) {
        self.record(game, firm, state, price, lhs, rhs, lhs >= rhs);
    }
}

fn finish(which: &str, conditions: Vec<Condition>, predicted_map: Option<Vec<usize>>, notes: Vec<String>) -> ConditionReport {
    let conditions: Vec<ConditionOutcome> = conditions.into_iter().map(|c| c.outcome).collect();
    ConditionReport {
        which: which.into(),
        holds: conditions.iter().all(|c| c.holds),
        conditions,
        predicted_map,
        notes,
    }
}

/// `π^i(p^C) ≥ (1 − δ_i) Q_T^i(p^C, p)` for every `p ≠ p^C`.
fn collusive_bound(game: &Game, q_t: &QTables, name: &str) -> Result<Condition> {
    let sp = game.special()?;
    let pc = game.joint_space().symmetric(sp.p_c);
    let mut c = Condition::new(name, "pi(pC) >= (1 - delta) * Q_T(pC, p) for p != pC");
    for i in 0..game.firms() {
        for p in (0..game.num_actions()).filter(|&p| p != sp.p_c) {
            let rhs = (1.0 - game.discount(i)) * q_t.get(i, pc, p);
            c.weak(game, i, Some(pc), Some(p), game.profit(i, pc, 0), rhs);
        }
    }
    Ok(c)
}

/// Tolerance for labelling `α(δ)(1 − δ)` as equal to one in report notes.
const UNIT_PRODUCT_SLACK: f64 = 1e-9;

fn alpha_condition(game: &Game, alpha_delta: &[f64], notes: &mut Vec<String>) -> Result<Condition> {
    check_alpha_delta(game, alpha_delta)?;
    let mut c = Condition::new("alpha", "alpha(delta) * (1 - delta) > 1");
    for (i, &a) in alpha_delta.iter().enumerate() {
        let product = a * (1.0 - game.discount(i));
        c.strict(game, i, None, None, product, 1.0);
        if (product - 1.0).abs() <= UNIT_PRODUCT_SLACK {
            notes.push(format!(
                "firm {i}: alpha(delta) = 1/(1 - delta), so alpha(delta)(1 - delta) = 1 and the strict requirement fails; \
                 this is the value a schedule with non-summable rates produces"
            ));
        }
    }
    Ok(c)
}

/// Lock-in at the collusive vector from the switchover tables: for
/// `s ∈ {p_{T−1}, p^C}` and `p ≠ p^C`, (i) `Q_T(s, p^C) > Q_T(s, p)` and
/// (ii) `π(p^C) ≥ (1 − δ) Q_T(p^C, p)`.
pub fn check_lock_in(game: &Game, q_t: &QTables, p_before_switch: usize) -> Result<ConditionReport> {
    let (_, pc_price, pc) = collusive_setup(game, q_t, "lock-in conditions")?;
    game.joint_space().check(p_before_switch)?;
    let mut states = vec![p_before_switch, pc];
    states.dedup();
    let mut first = Condition::new("i", "Q_T(s, pC) > Q_T(s, p) for s in {p_(T-1), pC}, p != pC");
    for i in 0..game.firms() {
        for &s in &states {
            for p in (0..game.num_actions()).filter(|&p| p != pc_price) {
                first.strict(game, i, Some(s), Some(p), q_t.get(i, s, pc_price), q_t.get(i, s, p));
            }
        }
    }
    let second = collusive_bound(game, q_t, "ii")?;
    Ok(finish("lock_in", vec![first, second], None, Vec::new()))
}

/// Naive collusion: α condition; (i) `Q_T(s, p^C) > Q_T(s, p)` at every
/// state; (ii) `π(p^C) ≥ Q_T(p_{T−1}, p) − δ Q_T(p^C, p)` for `p ≠ p^C`.
pub fn check_naive(game: &Game, q_t: &QTables, p_before_switch: usize, alpha_delta: &[f64]) -> Result<ConditionReport> {
    let (_, pc_price, pc) = collusive_setup(game, q_t, "naive-collusion conditions")?;
    game.joint_space().check(p_before_switch)?;
    let mut notes = Vec::new();
    let alpha = alpha_condition(game, alpha_delta, &mut notes)?;
    let mut first = Condition::new("i", "Q_T(s, pC) > Q_T(s, p) for every s, p != pC");
    let mut second = Condition::new("ii", "pi(pC) >= Q_T(p_(T-1), p) - delta * Q_T(pC, p) for p != pC");
    for i in 0..game.firms() {
        for s in 0..game.num_joint() {
            for p in (0..game.num_actions()).filter(|&p| p != pc_price) {
                first.strict(game, i, Some(s), Some(p), q_t.get(i, s, pc_price), q_t.get(i, s, p));
            }
        }
        for p in (0..game.num_actions()).filter(|&p| p != pc_price) {
            let rhs = q_t.get(i, p_before_switch, p) - game.discount(i) * q_t.get(i, pc, p);
            second.weak(game, i, Some(p_before_switch), Some(p), game.profit(i, pc, 0), rhs);
        }
    }
    let map = vec![pc_price; game.num_joint()];
    Ok(finish("naive", vec![alpha, first, second], Some(map), notes))
}

/// Grim-trigger collusion: α condition; (i-a) `Q_T(s, p*) > Q_T(s, p)` for
/// `s ∉ {p^C, p_{T−1}}`; (i-b) `Q_T(p_{T−1}, p*) > Q*(p_{T−1}, p)`, both for
/// `p ≠ p*`; (ii) the collusive bound. `q_star` is the limit table.
pub fn check_grim(
    game: &Game,
    q_t: &QTables,
    p_before_switch: usize,
    q_star: &QTables,
    alpha_delta: &[f64],
) -> Result<ConditionReport> {
    let (p_star, pc_price, pc) = collusive_setup(game, q_t, "grim-trigger conditions")?;
    q_star.check_game(game)?;
    game.joint_space().check(p_before_switch)?;
    let mut notes = Vec::new();
    let alpha = alpha_condition(game, alpha_delta, &mut notes)?;
    let mut first_a = Condition::new("i.a", "Q_T(s, p*) > Q_T(s, p) for s not in {pC, p_(T-1)}, p != p*");
    let mut first_b = Condition::new("i.b", "Q_T(p_(T-1), p*) > Q*(p_(T-1), p) for p != p*");
    for i in 0..game.firms() {
        for s in (0..game.num_joint()).filter(|&s| s != pc && s != p_before_switch) {
            for p in (0..game.num_actions()).filter(|&p| p != p_star) {
                first_a.strict(game, i, Some(s), Some(p), q_t.get(i, s, p_star), q_t.get(i, s, p));
            }
        }
        for p in (0..game.num_actions()).filter(|&p| p != p_star) {
            let lhs = q_t.get(i, p_before_switch, p_star);
            first_b.strict(game, i, Some(p_before_switch), Some(p), lhs, q_star.get(i, p_before_switch, p));
        }
    }
    let second = collusive_bound(game, q_t, "ii")?;
    let map = (0..game.num_joint()).map(|s| if s == pc { pc_price } else { p_star }).collect();
    Ok(finish("grim", vec![alpha, first_a, first_b, second], Some(map), notes))
}

/// Increasing-ladder collusion along `ladder = (p^0 = p*, …, p^{k+1} = p^C)`:
/// `p_{T−1}` is not a symmetric rung; (i) `Q_T(p^l, p^{l+1}) > Q_T(p^l, p)`
/// for every rung below the top; (ii) `Q_T(s, p*) > max{Q_T(s, p),
/// Q*(p_{T−1}, p^C)}` off the ladder for `p ≠ p*`, `(s, p) ≠ (p_{T−1}, p^C)`;
/// the collusive bound; and the α condition.
pub fn check_ladder_conditions(
    game: &Game,
    q_t: &QTables,
    p_before_switch: usize,
    ladder: &[usize],
    q_star: &QTables,
    alpha_delta: &[f64],
) -> Result<ConditionReport> {
    let (p_star, pc_price, _) = collusive_setup(game, q_t, "ladder conditions")?;
    q_star.check_game(game)?;
    check_ladder(game, ladder)?;
    let space = game.joint_space();
    space.check(p_before_switch)?;
    let rungs: Vec<usize> = ladder.iter().map(|&p| space.symmetric(p)).collect();
    let mut notes = Vec::new();

    let mut placement = Condition::new("start", "p_(T-1) is not a symmetric ladder vector");
    let on_ladder = rungs.contains(&p_before_switch);
    placement.record(game, 0, Some(p_before_switch), None, on_ladder as u8 as f64, 0.0, !on_ladder);

    let alpha = alpha_condition(game, alpha_delta, &mut notes)?;
    let mut first = Condition::new("i", "Q_T(p^l, p^(l+1)) > Q_T(p^l, p) for each rung below pC, p != p^(l+1)");
    let mut second = Condition::new(
        "ii",
        "Q_T(s, p*) > max(Q_T(s, p), Q*(p_(T-1), pC)) off the ladder, p != p*, (s, p) != (p_(T-1), pC)",
    );
    for i in 0..game.firms() {
        for l in 0..ladder.len() - 1 {
            let (s, up) = (rungs[l], ladder[l + 1]);
            for p in (0..game.num_actions()).filter(|&p| p != up) {
                first.strict(game, i, Some(s), Some(p), q_t.get(i, s, up), q_t.get(i, s, p));
            }
        }
        let threshold = q_star.get(i, p_before_switch, pc_price);
        for s in (0..game.num_joint()).filter(|s| !rungs.contains(s)) {
            for p in (0..game.num_actions()).filter(|&p| p != p_star) {
                if s == p_before_switch && p == pc_price {
                    continue;
                }
                let rhs = q_t.get(i, s, p).max(threshold);
                second.strict(game, i, Some(s), Some(p), q_t.get(i, s, p_star), rhs);
            }
        }
    }
    let bound = collusive_bound(game, q_t, "collusive_bound")?;
    let map = (0..game.num_joint()).map(|s| ladder_action(game, ladder, s)).collect();
    Ok(finish("ladder", vec![placement, alpha, first, second, bound], Some(map), notes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TieRecord {
    pub firm: usize,
    pub state: usize,
    pub prev_prices: Vec<usize>,
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct InducedStrategy {
    pub profile: PolicyProfile,
    /// Chosen action, indexed `firm * rM + aug`.
    pub actions: Vec<usize>,
    pub ties: Vec<TieRecord>,
}

impl InducedStrategy {
    pub fn action(&self, firm: usize, aug: usize) -> usize {
        self.actions[firm * (self.actions.len() / self.profile.firms()) + aug]
    }
}

/// Greedy strategy of `q` with ties broken towards the lowest price index.
/// The `t = 0` policy is a point mass on each firm's component of `p0`.
pub fn induced_strategy(game: &Game, q: &QTables, p0: usize) -> Result<InducedStrategy> {
    q.check_game(game)?;
    let space = game.joint_space();
    space.check(p0)?;
    let naug = game.num_augmented();
    let mut actions = Vec::with_capacity(game.firms() * naug);
    let mut ties = Vec::new();
    for i in 0..game.firms() {
        for aug in 0..naug {
            let row = q.row(i, aug);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let set: Vec<usize> = (0..row.len()).filter(|&a| row[a] == max).collect();
            if set.len() > 1 {
                let (state, prev) = game.split_augmented(aug);
                ties.push(TieRecord {
                    firm: i,
                    state,
                    prev_prices: space.decode(prev),
                    actions: set.clone(),
                });
            }
            actions.push(set[0]);
        }
    }
    let profile = PolicyProfile::deterministic(
        game,
        |i, _| space.action_of(p0, i),
        |i, s, prev| actions[i * naug + game.augmented(s, prev)],
    )?;
    Ok(InducedStrategy { profile, actions, ties })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityViolation {
    pub firm: usize,
    pub state: usize,
    pub prev_prices: Vec<usize>,
    pub q_value: f64,
    pub bellman_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QFixedReport {
    pub tolerance: f64,
    pub max_residual: f64,
    pub identity_holds: bool,
    pub violations: Vec<IdentityViolation>,
    /// Each induced action maximises the one-step value with continuation
    /// `v_{i,s} = Q^i(s, w^i(s))`.
    pub sufficient_condition_holds: bool,
    pub sufficient_violations: usize,
    /// Verdict of the recurrent equilibrium check, run only when the
    /// sufficient condition holds.
    pub nash_from_t1: Option<bool>,
    pub ties: Vec<TieRecord>,
}

/// Compares `Q^i(s, w^i(s))` with the Bellman value of the induced profile
/// at every augmented state.
pub fn check_qfixed_identity(game: &Game, q: &QTables, p0: usize, tol: f64) -> Result<QFixedReport> {
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::Config(format!("tolerance must be non-negative, got {tol}")));
    }
    let induced = induced_strategy(game, q, p0)?;
    let v = solve_bellman(game, &induced.profile)?;
    let space = game.joint_space();
    let naug = game.num_augmented();
    let mut violations = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut v_q = ValueVector::zeros(game);
    for i in 0..game.firms() {
        for aug in 0..naug {
            let qv = q.get(i, aug, induced.actions[i * naug + aug]);
            v_q.set(i, aug, qv);
            let residual = (qv - v.get(i, aug)).abs();
            max_residual = max_residual.max(residual);
            if residual > tol {
                let (state, prev) = game.split_augmented(aug);
                violations.push(IdentityViolation {
                    firm: i,
                    state,
                    prev_prices: space.decode(prev),
                    q_value: qv,
                    bellman_value: v.get(i, aug),
                });
            }
        }
    }
    let mut sufficient_violations = 0;
    for i in 0..game.firms() {
        for aug in 0..naug {
            let values = own_action_values(game, &induced.profile, i, aug, &v_q);
            let (best, _) = argmax_with_ties(&values);
            if values[induced.actions[i * naug + aug]] < best - tol {
                sufficient_violations += 1;
            }
        }
    }
    let sufficient = sufficient_violations == 0;
    let nash_from_t1 = if sufficient {
        Some(check_nash_from_t1(game, &induced.profile, tol.max(crate::verify::DEFAULT_TOLERANCE))?.is_nash_from_t1())
    } else {
        None
    };
    Ok(QFixedReport {
        tolerance: tol,
        max_residual,
        identity_holds: violations.is_empty(),
        violations,
        sufficient_condition_holds: sufficient,
        sufficient_violations,
        nash_from_t1,
        ties: induced.ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::{pd, H, L};
    use crate::game::{GameData, SpecialPrices};
    use crate::policy::{make_grim_trigger, make_naive_collusion};

    fn uniform_q(g: &Game, high: f64, low: f64) -> QTables {
        QTables::from_fn(g, |_, _, a| if a == H { high } else { low })
    }

    #[test]
    fn limit_cases() {
        let g = pd(0.5);
        let s = g.joint_space();
        let q_t = uniform_q(&g, 3.0, 2.5);
        let lh = s.encode(&[L, H]).unwrap();
        let hh = s.symmetric(H);
        let lim = limit_q_closed_form(&g, &q_t, lh, &[0.5, 0.5], &[2.0, 2.0]).unwrap();
        assert_eq!(lim.get(0, hh, H), 4.0);
        assert_eq!(lim.get(0, lh, H), 0.5 * 3.0 + 0.5 * (2.0 + 0.5 * 3.0));
        assert_eq!(lim.get(0, lh, L), 2.5);
        assert_eq!(lim.get(1, 0, H), 3.0);

        let collapsed = limit_q_closed_form(&g, &q_t, hh, &[0.5, 0.5], &[2.0, 2.0]).unwrap();
        assert_eq!(collapsed.cells_changed(&q_t), 2);
        assert_eq!(collapsed.get(1, hh, H), 4.0);
    }

    #[test]
    fn lock_in_examples() {
        let g = pd(0.5);
        let s = g.joint_space();
        let lh = s.encode(&[L, H]).unwrap();
        let ok = check_lock_in(&g, &uniform_q(&g, 3.0, 2.5), lh).unwrap();
        assert!(ok.holds, "{ok:?}");

        let mut q = uniform_q(&g, 3.0, 2.5);
        q.set(0, s.symmetric(H), L, 5.0);
        let r = check_lock_in(&g, &q, lh).unwrap();
        assert!(!r.holds);
        let ii = r.conditions.iter().find(|c| c.name == "ii").unwrap();
        assert_eq!(ii.violations.len(), 1);
        assert_eq!((ii.violations[0].lhs, ii.violations[0].rhs), (2.0, 2.5));

        let mut q = uniform_q(&g, 3.0, 2.5);
        q.set(1, lh, L, 3.0);
        let r = check_lock_in(&g, &q, lh).unwrap();
        let i = r.conditions.iter().find(|c| c.name == "i").unwrap();
        assert!(!i.holds && i.violations[0].firm == 1);
    }

    #[test]
    fn alpha_condition_flags_unit_product() {
        let g = pd(0.5);
        let lh = g.joint_space().encode(&[L, H]).unwrap();
        let r = check_naive(&g, &uniform_q(&g, 3.0, 2.5), lh, &[2.0, 2.0]).unwrap();
        let alpha = r.conditions.iter().find(|c| c.name == "alpha").unwrap();
        assert!(!alpha.holds);
        assert_eq!(r.notes.len(), 2);
        let r = check_naive(&g, &uniform_q(&g, 3.0, 2.5), lh, &[3.0, 3.0]).unwrap();
        assert!(r.holds, "{r:?}");
        assert_eq!(r.predicted_map.unwrap(), vec![H; 4]);
    }

    #[test]
    fn lock_in_trajectory_recursion() {
        let g = pd(0.5);
        let q_t = uniform_q(&g, 3.0, 2.5);
        let alphas = [0.5, 0.4, 0.3, 0.2, 0.1];
        let traj = lock_in_trajectory(&g, &q_t, 0, 0, &alphas).unwrap();
        // Q_{T+1} = Q_T(pC, pC) = 3, then Q_{t+1} = ᾱ_t Q_t + α_t π
        let mut q = 3.0;
        let mut expect = vec![q];
        for a in &alphas[1..4] {
            q = (1.0 - a * 0.5) * q + a * 2.0;
            expect.push(q);
        }
        for (x, y) in traj.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn induced_strategy_ties() {
        let g = pd(0.5);
        let q = QTables::filled(&g, 1.0);
        let ind = induced_strategy(&g, &q, 0).unwrap();
        assert_eq!(ind.ties.len(), 8);
        assert!(ind.actions.iter().all(|&a| a == L));

        let q = QTables::from_fn(&g, |_, aug, a| if (aug == g.joint_space().symmetric(H)) == (a == H) { 1.0 } else { 0.0 });
        let ind = induced_strategy(&g, &q, g.joint_space().symmetric(H)).unwrap();
        assert!(ind.ties.is_empty());
        let grim = make_grim_trigger(&g).unwrap();
        for i in 0..2 {
            assert_eq!(ind.profile.policy(i), grim.policy(i));
        }
    }

    fn one_price_game(delta: f64) -> Game {
        Game::new(GameData {
            firms: 2,
            states: vec!["s0".into()],
            prices: vec![1.0],
            profit: vec![2.0, 3.0],
            transition: vec![1.0],
            discounts: vec![delta, delta],
            special: Some(SpecialPrices { p_star: 0, p_c: 0 }),
        })
        .unwrap()
    }

    #[test]
    fn qfixed_identity_on_single_price() {
        let g = one_price_game(0.5);
        let q = QTables::from_fn(&g, |i, _, _| [2.0, 3.0][i] / 0.5);
        let r = check_qfixed_identity(&g, &q, 0, 1e-12).unwrap();
        assert!(r.identity_holds && r.max_residual == 0.0);
        assert!(r.sufficient_condition_holds);
        assert_eq!(r.nash_from_t1, Some(true));

        let mut bumped = q.clone();
        bumped.set(1, 0, 0, 6.1);
        let r = check_qfixed_identity(&g, &bumped, 0, 1e-12).unwrap();
        assert!(!r.identity_holds);
        assert!((r.max_residual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn qfixed_identity_detects_naive_collusion_incentive() {
        // Bellman values of naive collusion with Q = 4 on H, 0 on L: identity
        // holds, but deviating to L is profitable one step ahead
        let g = pd(0.5);
        let q = uniform_q(&g, 4.0, 0.0);
        let r = check_qfixed_identity(&g, &q, g.joint_space().symmetric(H), 1e-10).unwrap();
        assert!(r.identity_holds);
        assert!(!r.sufficient_condition_holds);
        assert_eq!(r.nash_from_t1, None);
        let naive = make_naive_collusion(&g).unwrap();
        let ind = induced_strategy(&g, &q, g.joint_space().symmetric(H)).unwrap();
        assert_eq!(ind.profile.policy(0), naive.policy(0));
    }

    #[test]
    fn checkers_require_one_state() {
        use crate::random::{random_game, RandomGameSpec};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let g = random_game(&mut rng, &RandomGameSpec::default());
        let q = QTables::zeros(&g);
        assert!(matches!(check_lock_in(&g, &q, 0), Err(Error::Unsupported(_))));
    }
}
