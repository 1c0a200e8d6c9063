//! Value objects of one-memory profiles.
//!
//! Everything here is exact: expectations over the next environment state
//! use the transition kernel directly, and the recurrent value of a profile
//! is obtained from one dense `rM × rM` linear system per firm.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::policy::{Conditioning, PolicyProfile};

/// Acceptance bound on the Bellman substitution residual.
pub const BELLMAN_TOLERANCE: f64 = 1e-10;

/// Real vector indexed by `(firm, augmented state)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector {
    firms: usize,
    augmented: usize,
    values: Vec<f64>,
}

/// Flattened view of one coordinate, used for reports and CSV export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueEntry {
    pub firm: usize,
    pub state: usize,
    pub prev_prices: Vec<usize>,
    pub value: f64,
}

impl ValueVector {
    pub fn zeros(game: &Game) -> Self {
        Self::filled(game, 0.0)
    }

    pub fn filled(game: &Game, value: f64) -> Self {
        Self {
            firms: game.firms(),
            augmented: game.num_augmented(),
            values: vec![value; game.firms() * game.num_augmented()],
        }
    }

    pub fn from_vec(game: &Game, values: Vec<f64>) -> Result<Self> {
        let expected = game.firms() * game.num_augmented();
        if values.len() != expected {
            return Err(Error::Dimension(format!(
                "value vector has {} entries, expected {expected}",
                values.len()
            )));
        }
        Ok(Self {
            firms: game.firms(),
            augmented: game.num_augmented(),
            values,
        })
    }

    pub fn firms(&self) -> usize {
        self.firms
    }

    pub fn augmented(&self) -> usize {
        self.augmented
    }

    #[inline]
    pub fn get(&self, firm: usize, aug: usize) -> f64 {
        self.values[firm * self.augmented + aug]
    }

    #[inline]
    pub fn set(&mut self, firm: usize, aug: usize, value: f64) {
        self.values[firm * self.augmented + aug] = value;
    }

    pub fn firm_slice(&self, firm: usize) -> &[f64] {
        &self.values[firm * self.augmented..(firm + 1) * self.augmented]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `‖self − other‖∞`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }

    fn check(&self, game: &Game) -> Result<()> {
        if self.firms != game.firms() || self.augmented != game.num_augmented() {
            return Err(Error::Dimension(format!(
                "value vector shape ({}, {}) does not match game ({}, {})",
                self.firms,
                self.augmented,
                game.firms(),
                game.num_augmented()
            )));
        }
        Ok(())
    }

    pub fn entries(&self, game: &Game) -> Vec<ValueEntry> {
        let mut out = Vec::with_capacity(self.values.len());
        for i in 0..self.firms {
            for aug in 0..self.augmented {
                let (state, prev) = game.split_augmented(aug);
                out.push(ValueEntry {
                    firm: i,
                    state,
                    prev_prices: game.joint_space().decode(prev),
                    value: self.get(i, aug),
                });
            }
        }
        out
    }
}

/// One-period payoff plus discounted continuation at `(state, joint)`:
/// `π^i(p, s) + δ_i Σ_{s'} P(s'|p, s) v_{i, s', p}`.
#[inline]
fn continuation(game: &Game, firm: usize, v: &ValueVector, state: usize, joint: usize) -> f64 {
    let delta = game.discount(firm);
    let expected: f64 = game
        .transition_row(state, joint)
        .iter()
        .enumerate()
        .map(|(s2, &p)| p * v.get(firm, game.augmented(s2, joint)))
        .sum();
    game.profit(firm, joint, state) + delta * expected
}

/// Value to `firm` of each pure own action at `aug`, when the other firms
/// follow `profile` and continuation values are `v`.
pub fn own_action_values(
    game: &Game,
    profile: &PolicyProfile,
    firm: usize,
    aug: usize,
    v: &ValueVector,
) -> Vec<f64> {
    let space = game.joint_space();
    let (state, _) = game.split_augmented(aug);
    let mut out = vec![0.0; game.num_actions()];
    for joint in 0..game.num_joint() {
        let mut weight = 1.0;
        for j in (0..game.firms()).filter(|&j| j != firm) {
            weight *= profile.recurrent_row(j, aug)[space.action_of(joint, j)];
            if weight == 0.0 {
                break;
            }
        }
        if weight != 0.0 {
            out[space.action_of(joint, firm)] += weight * continuation(game, firm, v, state, joint);
        }
    }
    out
}

/// One coordinate of the one-step operator: `firm` follows `tau` (its own
/// recurrent table, `rM × k`) for one period, others follow `sigma`, and
/// continuation values are `v`.
pub fn v1_apply(
    game: &Game,
    sigma: &PolicyProfile,
    tau: &[f64],
    v: &ValueVector,
    firm: usize,
    aug: usize,
) -> Result<f64> {
    sigma.check_game(game)?;
    v.check(game)?;
    game.check_firm(firm)?;
    let k = game.num_actions();
    if tau.len() != game.num_augmented() * k {
        return Err(Error::Dimension(format!(
            "own policy table has {} entries, expected {}",
            tau.len(),
            game.num_augmented() * k
        )));
    }
    if aug >= game.num_augmented() {
        return Err(Error::Index(format!("augmented state {aug} out of range")));
    }
    let row = &tau[aug * k..(aug + 1) * k];
    let values = own_action_values(game, sigma, firm, aug, v);
    Ok(row.iter().zip(&values).map(|(p, q)| p * q).sum())
}

/// The one-step operator at every coordinate, each firm following its own
/// recurrent policy in `tau`.
pub fn v1_apply_all(
    game: &Game,
    sigma: &PolicyProfile,
    tau: &PolicyProfile,
    v: &ValueVector,
) -> Result<ValueVector> {
    tau.check_game(game)?;
    let mut out = ValueVector::zeros(game);
    for i in 0..game.firms() {
        let table = tau.policy(i).recurrent_table();
        for aug in 0..game.num_augmented() {
            out.set(i, aug, v1_apply(game, sigma, table, v, i, aug)?);
        }
    }
    Ok(out)
}

/// Matrix `A = I − δ_i W` and right-hand side `b` of the recurrent Bellman
/// system for `firm`, where `W[(s₁,p₀), (s₂,p₁)] = σ(p₁|p₀,s₁) P(s₂|p₁,s₁)`
/// and `b[(s₁,p₀)] = Σ_{p₁} σ(p₁|p₀,s₁) π^i(p₁,s₁)`.
pub fn bellman_system(
    game: &Game,
    profile: &PolicyProfile,
    firm: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    profile.check_game(game)?;
    game.check_firm(firm)?;
    let n = game.num_augmented();
    let delta = game.discount(firm);
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for row in 0..n {
        let (s1, _) = game.split_augmented(row);
        let dist = profile.joint_recurrent_distribution(game, row);
        for (p1, &prob) in dist.iter().enumerate() {
            if prob == 0.0 {
                continue;
            }
            b[row] += prob * game.profit(firm, p1, s1);
            for (s2, &tp) in game.transition_row(s1, p1).iter().enumerate() {
                a[(row, game.augmented(s2, p1))] -= delta * prob * tp;
            }
        }
    }
    Ok((a, b))
}

/// Sup-norm residual of the Bellman equation `v = V₁(σ, σ, v)`.
pub fn bellman_residual(game: &Game, profile: &PolicyProfile, v: &ValueVector) -> Result<f64> {
    Ok(v1_apply_all(game, profile, profile, v)?.distance(v))
}

/// Exact recurrent values of `profile`: one dense LU solve per firm.
pub fn solve_bellman(game: &Game, profile: &PolicyProfile) -> Result<ValueVector> {
    let mut out = ValueVector::zeros(game);
    for i in 0..game.firms() {
        let (a, b) = bellman_system(game, profile, i)?;
        let x = a
            .clone()
            .lu()
            .solve(&b)
            .ok_or(Error::SolverResidual {
                firm: i,
                residual: f64::INFINITY,
                tolerance: BELLMAN_TOLERANCE,
            })?;
        let scale = 1.0_f64.max(x.amax());
        let residual = (&a * &x - &b).amax();
        let tolerance = BELLMAN_TOLERANCE * scale;
        if !(residual <= tolerance) {
            return Err(Error::SolverResidual {
                firm: i,
                residual,
                tolerance,
            });
        }
        for (aug, &val) in x.iter().enumerate() {
            out.set(i, aug, val);
        }
    }
    Ok(out)
}

/// Exact expected discounted profit over periods `0..=horizon` counted from
/// `start`, one entry per firm, obtained by pushing the probability mass over
/// augmented states forward in time.
///
/// For a recurrent start the first period is `t = 1` with the given
/// conditioning; for an initial start it is `t = 0` with `σ₀`. The gap to the
/// infinite-horizon value is at most [`truncation_bound`].
pub fn finite_horizon_value(
    game: &Game,
    profile: &PolicyProfile,
    start: Conditioning,
    horizon: usize,
) -> Result<Vec<f64>> {
    profile.check_game(game)?;
    let n = game.firms();
    let naug = game.num_augmented();
    let mut totals = vec![0.0; n];
    let mut discount_pow = vec![1.0; n];
    let mut mass = vec![0.0; naug];
    let mut remaining = horizon + 1;

    match start {
        Conditioning::Initial { state } => {
            game.check_state(state)?;
            let dist = profile.joint_initial_distribution(game, state);
            for (p0, &prob) in dist.iter().enumerate() {
                if prob == 0.0 {
                    continue;
                }
                for (i, total) in totals.iter_mut().enumerate() {
                    *total += prob * game.profit(i, p0, state);
                }
                for (s1, &tp) in game.transition_row(state, p0).iter().enumerate() {
                    mass[game.augmented(s1, p0)] += prob * tp;
                }
            }
            for (i, d) in discount_pow.iter_mut().enumerate() {
                *d = game.discount(i);
            }
            remaining -= 1;
        }
        Conditioning::Recurrent { state, prev } => {
            game.check_state(state)?;
            game.joint_space().check(prev)?;
            mass[game.augmented(state, prev)] = 1.0;
        }
    }

    for _ in 0..remaining {
        let mut next = vec![0.0; naug];
        for (aug, &w) in mass.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let (s, _) = game.split_augmented(aug);
            let dist = profile.joint_recurrent_distribution(game, aug);
            for (p, &prob) in dist.iter().enumerate() {
                if prob == 0.0 {
                    continue;
                }
                let wp = w * prob;
                for i in 0..n {
                    totals[i] += discount_pow[i] * wp * game.profit(i, p, s);
                }
                for (s2, &tp) in game.transition_row(s, p).iter().enumerate() {
                    next[game.augmented(s2, p)] += wp * tp;
                }
            }
        }
        mass = next;
        for (i, d) in discount_pow.iter_mut().enumerate() {
            *d *= game.discount(i);
        }
    }
    Ok(totals)
}

/// [`finite_horizon_value`] for every recurrent starting coordinate.
pub fn finite_horizon_values(
    game: &Game,
    profile: &PolicyProfile,
    horizon: usize,
) -> Result<ValueVector> {
    let mut out = ValueVector::zeros(game);
    for aug in 0..game.num_augmented() {
        let (state, prev) = game.split_augmented(aug);
        let vals = finite_horizon_value(game, profile, Conditioning::Recurrent { state, prev }, horizon)?;
        for (i, v) in vals.into_iter().enumerate() {
            out.set(i, aug, v);
        }
    }
    Ok(out)
}

/// `δ^{h+1} π_max / (1 − δ)`: the tail dropped by a horizon-`h` truncation.
pub fn truncation_bound(game: &Game, firm: usize, horizon: usize) -> f64 {
    let delta = game.discount(firm);
    delta.powi(horizon as i32 + 1) * game.max_abs_profit(firm) / (1.0 - delta)
}

/// `v̂^i(p₀, s₀) = π^i(p₀, s₀) + δ_i Σ_{s₁} P(s₁|p₀, s₀) v_{i, s₁, p₀}`.
pub fn nash_q_hat(game: &Game, v: &ValueVector, firm: usize, p0: usize, s0: usize) -> Result<f64> {
    v.check(game)?;
    game.check_firm(firm)?;
    game.check_state(s0)?;
    game.joint_space().check(p0)?;
    Ok(continuation(game, firm, v, s0, p0))
}

/// Time-zero value per firm: the expectation of [`nash_q_hat`] under the
/// joint initial distribution at `s0`.
pub fn v0(game: &Game, profile: &PolicyProfile, v: &ValueVector, s0: usize) -> Result<Vec<f64>> {
    profile.check_game(game)?;
    v.check(game)?;
    game.check_state(s0)?;
    let dist = profile.joint_initial_distribution(game, s0);
    Ok((0..game.firms())
        .map(|i| {
            dist.iter()
                .enumerate()
                .filter(|(_, &p)| p != 0.0)
                .map(|(p0, &p)| p * continuation(game, i, v, s0, p0))
                .sum()
        })
        .collect())
}

/// Result of the best-response operator.
#[derive(Debug, Clone)]
pub struct BestResponse {
    pub values: ValueVector,
    /// Maximising own actions, indexed `firm * rM + aug`.
    pub argmax: Vec<Vec<usize>>,
}

impl BestResponse {
    pub fn argmax_at(&self, firm: usize, aug: usize) -> &[usize] {
        &self.argmax[firm * self.values.augmented() + aug]
    }
}

/// Relative slack under which two action values count as tied.
pub const ARGMAX_TIE_TOLERANCE: f64 = 1e-12;

pub(crate) fn argmax_with_ties(values: &[f64]) -> (f64, Vec<usize>) {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = ARGMAX_TIE_TOLERANCE * best.abs().max(1.0);
    let set = values
        .iter()
        .enumerate()
        .filter(|(_, &q)| q >= best - slack)
        .map(|(a, _)| a)
        .collect();
    (best, set)
}

/// `T(v, σ)`: per coordinate, the best one-period value over pure own
/// actions. Pure actions suffice because the one-step value is linear in the
/// own policy row.
pub fn best_response_t(game: &Game, v: &ValueVector, profile: &PolicyProfile) -> Result<BestResponse> {
    profile.check_game(game)?;
    v.check(game)?;
    let mut values = ValueVector::zeros(game);
    let mut argmax = Vec::with_capacity(game.firms() * game.num_augmented());
    for i in 0..game.firms() {
        for aug in 0..game.num_augmented() {
            let q = own_action_values(game, profile, i, aug, v);
            let (best, set) = argmax_with_ties(&q);
            values.set(i, aug, best);
            argmax.push(set);
        }
    }
    Ok(BestResponse { values, argmax })
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub values: ValueVector,
    pub iterations: usize,
    /// `‖v_{k+1} − v_k‖∞` for every iteration.
    pub steps: Vec<f64>,
}

/// Default iteration cap for [`fixed_point_b`].
pub const FIXED_POINT_MAX_ITER: usize = 100_000;

/// Fixed point of `v ↦ T(v, σ)` by iteration from `v = 0`.
///
/// Stops once `‖v_{k+1} − v_k‖∞ ≤ tol (1 − δ)/δ` with `δ = max_i δ_i`, which
/// bounds the distance of the returned iterate to the fixed point by `tol`.
pub fn fixed_point_b(game: &Game, profile: &PolicyProfile, tol: f64) -> Result<FixedPoint> {
    fixed_point_b_capped(game, profile, tol, FIXED_POINT_MAX_ITER)
}

pub fn fixed_point_b_capped(
    game: &Game,
    profile: &PolicyProfile,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("fixed-point tolerance must be positive, got {tol}")));
    }
    let delta = game.discounts().iter().copied().fold(0.0, f64::max);
    let threshold = tol * (1.0 - delta) / delta;
    let mut v = ValueVector::zeros(game);
    let mut steps = Vec::new();
    for iter in 1..=max_iter {
        let next = best_response_t(game, &v, profile)?.values;
        let step = next.distance(&v);
        steps.push(step);
        v = next;
        if step <= threshold {
            return Ok(FixedPoint {
                values: v,
                iterations: iter,
                steps,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: steps.last().copied().unwrap_or(f64::INFINITY),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::{pd, H, L};
    use crate::policy::{make_grim_trigger, make_naive_collusion};
    use crate::random::{random_game, random_profile, random_recurrent_table, RandomGameSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hh(g: &Game) -> usize {
        g.joint_space().encode(&[H, H]).unwrap()
    }

    #[test]
    fn v1_with_zero_and_constant_continuation() {
        let g = pd(0.5);
        let prof = make_naive_collusion(&g).unwrap();
        let tau = prof.policy(0).recurrent_table().to_vec();
        for aug in 0..4 {
            let z = v1_apply(&g, &prof, &tau, &ValueVector::zeros(&g), 0, aug).unwrap();
            assert_eq!(z, 2.0);
            let c = v1_apply(&g, &prof, &tau, &ValueVector::filled(&g, 4.0), 0, aug).unwrap();
            assert_eq!(c, 4.0);
        }
    }

    #[test]
    fn v1_rejects_bad_dimensions() {
        let g = pd(0.5);
        let prof = make_naive_collusion(&g).unwrap();
        let v = ValueVector::zeros(&g);
        assert!(v1_apply(&g, &prof, &[0.5, 0.5], &v, 0, 0).is_err());
        let tau = prof.policy(0).recurrent_table().to_vec();
        assert!(v1_apply(&g, &prof, &tau, &v, 0, 4).is_err());
    }

    #[test]
    fn naive_collusion_values() {
        let g = pd(0.5);
        let v = solve_bellman(&g, &make_naive_collusion(&g).unwrap()).unwrap();
        for aug in 0..4 {
            assert!((v.get(0, aug) - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grim_trigger_values() {
        let g = pd(0.5);
        let prof = make_grim_trigger(&g).unwrap();
        let v = solve_bellman(&g, &prof).unwrap();
        for i in 0..2 {
            for aug in 0..4 {
                let expect = if aug == hh(&g) { 4.0 } else { 2.0 };
                assert!((v.get(i, aug) - expect).abs() < 1e-12);
            }
        }
        assert!(bellman_residual(&g, &prof, &v).unwrap() <= BELLMAN_TOLERANCE);
        // one-period and long truncations of the cooperative path
        let start = Conditioning::Recurrent { state: 0, prev: hh(&g) };
        assert_eq!(finite_horizon_value(&g, &prof, start, 0).unwrap()[0], 2.0);
        let long = finite_horizon_value(&g, &prof, start, 20).unwrap()[0];
        assert!((long - 4.0).abs() <= 2.0 * 0.5f64.powi(21) / 0.5);
    }

    #[test]
    fn nash_q_hat_and_v0_on_grim() {
        let g = pd(0.5);
        let prof = make_grim_trigger(&g).unwrap();
        let v = solve_bellman(&g, &prof).unwrap();
        let s = g.joint_space();
        assert!((nash_q_hat(&g, &v, 0, hh(&g), 0).unwrap() - 4.0).abs() < 1e-12);
        let lh = s.encode(&[L, H]).unwrap();
        assert!((nash_q_hat(&g, &v, 0, lh, 0).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(nash_q_hat(&g, &ValueVector::zeros(&g), 0, lh, 0).unwrap(), 3.0);
        let v0s = v0(&g, &prof, &v, 0).unwrap();
        assert!((v0s[0] - 4.0).abs() < 1e-12 && (v0s[1] - 4.0).abs() < 1e-12);
        let from_start = finite_horizon_value(&g, &prof, Conditioning::Initial { state: 0 }, 60).unwrap();
        assert!((from_start[0] - 4.0).abs() < 1e-15 + truncation_bound(&g, 0, 60));
    }

    #[test]
    fn v0_mixes_linearly() {
        let g = pd(0.5);
        let grim = make_grim_trigger(&g).unwrap();
        let v = solve_bellman(&g, &grim).unwrap();
        // firm 0 mixes 50/50 at t = 0, firm 1 plays H
        let tables = vec![
            (vec![0.5, 0.5], grim.policy(0).recurrent_table().to_vec()),
            (vec![0.0, 1.0], grim.policy(1).recurrent_table().to_vec()),
        ];
        let mixed = PolicyProfile::from_tables(&g, tables).unwrap();
        let s = g.joint_space();
        let a = nash_q_hat(&g, &v, 1, s.encode(&[L, H]).unwrap(), 0).unwrap();
        let b = nash_q_hat(&g, &v, 1, hh(&g), 0).unwrap();
        assert!((v0(&g, &mixed, &v, 0).unwrap()[1] - 0.5 * (a + b)).abs() < 1e-12);
    }

    #[test]
    fn best_response_to_collusive_opponent() {
        let g = pd(0.5);
        let prof = make_naive_collusion(&g).unwrap();
        let br = best_response_t(&g, &ValueVector::zeros(&g), &prof).unwrap();
        for aug in 0..4 {
            assert_eq!(br.values.get(0, aug), 3.0);
            assert_eq!(br.argmax_at(0, aug), &[L]);
        }
    }

    #[test]
    fn fixed_point_at_grim_matches_bellman() {
        let g = pd(0.5);
        let prof = make_grim_trigger(&g).unwrap();
        let fp = fixed_point_b(&g, &prof, 1e-11).unwrap();
        let v = solve_bellman(&g, &prof).unwrap();
        assert!(fp.values.distance(&v) <= 1e-10);
        assert!(fp.values.sup_norm() <= 3.0 / (1.0 - 0.5) + 1e-12);
    }

    #[test]
    fn fixed_point_rejects_bad_tolerance() {
        let g = pd(0.5);
        let prof = make_grim_trigger(&g).unwrap();
        assert!(fixed_point_b(&g, &prof, 0.0).is_err());
        assert!(matches!(
            fixed_point_b_capped(&g, &prof, 1e-12, 3),
            Err(Error::NoConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn bellman_matrix_is_diagonally_dominant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let g = random_game(&mut rng, &RandomGameSpec::default());
            let prof = random_profile(&mut rng, &g);
            for i in 0..g.firms() {
                let (a, _) = bellman_system(&g, &prof, i).unwrap();
                for row in 0..a.nrows() {
                    let off: f64 = (0..a.ncols()).filter(|&c| c != row).map(|c| a[(row, c)].abs()).sum();
                    let margin = a[(row, row)].abs() - off;
                    assert!(margin >= 1.0 - g.discount(i) - 1e-12, "margin {margin}");
                }
            }
        }
    }

    fn small_spec(k: usize, r: usize) -> RandomGameSpec {
        RandomGameSpec {
            firms: 2,
            actions: k,
            states: r,
            ..RandomGameSpec::default()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn bellman_identity_holds(seed: u64, k in 2usize..=3, r in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_game(&mut rng, &small_spec(k, r));
            let prof = random_profile(&mut rng, &g);
            let v = solve_bellman(&g, &prof).unwrap();
            let applied = v1_apply_all(&g, &prof, &prof, &v).unwrap();
            prop_assert!(applied.distance(&v) <= 1e-10);
            for i in 0..2 {
                let cap = g.max_abs_profit(i) / (1.0 - g.discount(i));
                prop_assert!(v.firm_slice(i).iter().all(|&x| x >= -1e-12 && x <= cap + 1e-9));
            }
        }

        #[test]
        fn v1_is_linear_in_own_policy(seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_game(&mut rng, &small_spec(3, 2));
            let prof = random_profile(&mut rng, &g);
            let v = ValueVector::from_vec(&g, (0..2 * g.num_augmented()).map(|x| x as f64).collect()).unwrap();
            let a = random_recurrent_table(&mut rng, &g);
            let b = random_recurrent_table(&mut rng, &g);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * x + 0.5 * y).collect();
            for aug in 0..g.num_augmented() {
                let va = v1_apply(&g, &prof, &a, &v, 1, aug).unwrap();
                let vb = v1_apply(&g, &prof, &b, &v, 1, aug).unwrap();
                let vm = v1_apply(&g, &prof, &mid, &v, 1, aug).unwrap();
                prop_assert!((vm - 0.5 * (va + vb)).abs() <= 1e-10);
            }
        }

        #[test]
        fn best_response_is_monotone(seed: u64) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_game(&mut rng, &small_spec(3, 2));
            let prof = random_profile(&mut rng, &g);
            let n = 2 * g.num_augmented();
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let w: Vec<f64> = u.iter().map(|x| x + rng.gen_range(0.0..3.0)).collect();
            let tu = best_response_t(&g, &ValueVector::from_vec(&g, u).unwrap(), &prof).unwrap().values;
            let tw = best_response_t(&g, &ValueVector::from_vec(&g, w).unwrap(), &prof).unwrap().values;
            for (a, b) in tu.as_slice().iter().zip(tw.as_slice()) {
                prop_assert!(a <= &(b + 1e-12));
            }
        }
    }
}
