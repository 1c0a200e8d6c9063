//! Certificates for one-memory equilibria.
//!
//! The check runs in three steps: solve the recurrent Bellman system of the
//! profile, confirm that no pure one-shot deviation improves on it at any
//! augmented state, and confirm that no firm gains by deviating at `t = 0`.
//! Pure deviations suffice at both steps because the objectives are linear in
//! the deviating firm's own policy row.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::policy::PolicyProfile;
use crate::value::{
    argmax_with_ties, own_action_values, solve_bellman, v0, ValueEntry, ValueVector,
};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NashFromT1,
    Spe,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrentViolation {
    pub firm: usize,
    pub state: usize,
    pub prev_prices: Vec<usize>,
    /// Value of the profile at this coordinate.
    pub value: f64,
    /// `T(v) − v` at this coordinate.
    pub gain: f64,
    pub best_action: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialViolation {
    pub firm: usize,
    pub initial_state: usize,
    pub value: f64,
    pub gain: f64,
    pub deviation: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub tolerance: f64,
    #[serde(skip)]
    pub values: ValueVector,
    pub step1_values: Vec<ValueEntry>,
    pub step2_violations: Vec<RecurrentViolation>,
    /// Largest `T(v) − v` over all coordinates, whether or not it is a violation.
    pub max_recurrent_gain: f64,
    /// `false` when step 2 already rejected the profile.
    pub step3_checked: bool,
    pub step3_violations: Vec<InitialViolation>,
    pub max_initial_gain: Option<f64>,
}

impl VerificationReport {
    pub fn is_nash_from_t1(&self) -> bool {
        self.step2_violations.is_empty()
    }

    pub fn is_spe(&self) -> bool {
        self.verdict == Verdict::Spe
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_tolerance(tol: f64) -> Result<()> {
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::Config(format!("tolerance must be non-negative, got {tol}")));
    }
    Ok(())
}

/// Steps 1 and 2: Bellman values of the recurrent profile and the largest
/// one-shot recurrent deviation gain per coordinate.
pub fn check_nash_from_t1(game: &Game, profile: &PolicyProfile, tol: f64) -> Result<VerificationReport> {
    check_tolerance(tol)?;
    profile.check_game(game)?;
    let v = solve_bellman(game, profile)?;
    let space = game.joint_space();
    let mut violations = Vec::new();
    let mut max_gain = f64::NEG_INFINITY;
    for i in 0..game.firms() {
        for aug in 0..game.num_augmented() {
            let q = own_action_values(game, profile, i, aug, &v);
            let (best, set) = argmax_with_ties(&q);
            let gain = best - v.get(i, aug);
            max_gain = max_gain.max(gain);
            if gain > tol {
                let (state, prev) = game.split_augmented(aug);
                violations.push(RecurrentViolation {
                    firm: i,
                    state,
                    prev_prices: space.decode(prev),
                    value: v.get(i, aug),
                    gain,
                    best_action: set[0],
                });
            }
        }
    }
    let verdict = if violations.is_empty() {
        Verdict::NashFromT1
    } else {
        Verdict::Rejected
    };
    Ok(VerificationReport {
        verdict,
        tolerance: tol,
        step1_values: v.entries(game),
        values: v,
        step2_violations: violations,
        max_recurrent_gain: max_gain,
        step3_checked: false,
        step3_violations: Vec::new(),
        max_initial_gain: None,
    })
}

/// Full check: steps 1–2, then the `t = 0` deviation check for every
/// initial state. The verdict is `spe` only if all three steps pass; a
/// profile that is Nash from `t = 1` but fails step 3 keeps the
/// `nash_from_t1` verdict.
pub fn check_spe(game: &Game, profile: &PolicyProfile, tol: f64) -> Result<VerificationReport> {
    let mut report = check_nash_from_t1(game, profile, tol)?;
    if report.verdict == Verdict::Rejected {
        return Ok(report);
    }
    let v = &report.values;
    let mut max_gain = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for s0 in 0..game.num_states() {
        let base = v0(game, profile, v, s0)?;
        for i in 0..game.firms() {
            let dev: Vec<f64> = (0..game.num_actions())
                .map(|q| initial_deviation_value(game, profile, v, i, s0, q))
                .collect();
            let (best, set) = argmax_with_ties(&dev);
            let gain = best - base[i];
            max_gain = max_gain.max(gain);
            if gain > tol {
                violations.push(InitialViolation {
                    firm: i,
                    initial_state: s0,
                    value: base[i],
                    gain,
                    deviation: set[0],
                });
            }
        }
    }
    report.step3_checked = true;
    report.max_initial_gain = Some(max_gain);
    if violations.is_empty() {
        report.verdict = Verdict::Spe;
    }
    report.step3_violations = violations;
    Ok(report)
}

/// `E_{σ₀^{-i}}[v̂^i((q, p^{-i}), s₀)]`.
fn initial_deviation_value(
    game: &Game,
    profile: &PolicyProfile,
    v: &ValueVector,
    firm: usize,
    s0: usize,
    q: usize,
) -> f64 {
    let space = game.joint_space();
    let delta = game.discount(firm);
    let mut total = 0.0;
    for joint in (0..game.num_joint()).filter(|&j| space.action_of(j, firm) == q) {
        let mut weight = 1.0;
        for j in (0..game.firms()).filter(|&j| j != firm) {
            weight *= profile.initial_row(j, s0)[space.action_of(joint, j)];
        }
        if weight == 0.0 {
            continue;
        }
        let cont: f64 = game
            .transition_row(s0, joint)
            .iter()
            .enumerate()
            .map(|(s1, &p)| p * v.get(firm, game.augmented(s1, joint)))
            .sum();
        total += weight * (game.profit(firm, joint, s0) + delta * cont);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::{pd, pd_with_temptation, H, L};
    use crate::game::{GameData, SpecialPrices};
    use crate::policy::{make_grim_trigger, make_naive_collusion};
    use crate::random::{random_game, random_profile, RandomGameSpec};
    use crate::value::fixed_point_b;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grim_trigger_accepted_above_threshold() {
        let g = pd(0.6);
        let report = check_spe(&g, &make_grim_trigger(&g).unwrap(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(report.verdict, Verdict::Spe);
        assert!(report.step2_violations.is_empty() && report.step3_violations.is_empty());
    }

    #[test]
    fn grim_trigger_rejected_below_threshold() {
        let g = pd(0.3);
        let report = check_nash_from_t1(&g, &make_grim_trigger(&g).unwrap(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(report.verdict, Verdict::Rejected);
        let expect = (3.0 + 0.3 * (1.0 / 0.7)) - 2.0 / 0.7;
        let at_hh: Vec<_> = report
            .step2_violations
            .iter()
            .filter(|v| v.prev_prices == vec![H, H])
            .collect();
        assert_eq!(at_hh.len(), 2);
        for v in at_hh {
            assert_eq!(v.best_action, L);
            assert!((v.gain - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_stage_nash_is_accepted() {
        for delta in [0.1, 0.5, 0.95] {
            let g = pd(delta);
            let prof = PolicyProfile::stationary(&g, L).unwrap();
            assert_eq!(check_spe(&g, &prof, DEFAULT_TOLERANCE).unwrap().verdict, Verdict::Spe);
        }
    }

    #[test]
    fn naive_collusion_iff_collusive_price_is_stage_nash() {
        let g = pd(0.6);
        let report = check_spe(&g, &make_naive_collusion(&g).unwrap(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(report.verdict, Verdict::Rejected);
        assert!(!report.step3_checked);
        // deviating once to L: 3 + 0.6 * 5 against 2 / (1 - 0.6)
        assert!((report.max_recurrent_gain - 1.0).abs() < 1e-12);

        let m = Game::new(pd_with_temptation(0.6, 1.5)).unwrap();
        let report = check_spe(&m, &make_naive_collusion(&m).unwrap(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(report.verdict, Verdict::Spe);
    }

    #[test]
    fn initial_deviation_is_caught() {
        // recurrent play is stage Nash everywhere, but σ₀ starts at H, which
        // firm 0 can profitably abandon at t = 0
        let g = pd(0.6);
        let prof = PolicyProfile::deterministic(&g, |_, _| H, |_, _, _| L).unwrap();
        let report = check_spe(&g, &prof, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(report.verdict, Verdict::NashFromT1);
        assert_eq!(report.step3_violations.len(), 2);
        assert!(report.step3_violations.iter().all(|v| v.deviation == L));
        assert!((report.max_initial_gain.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_serialises() {
        let g = pd(0.6);
        let json = check_spe(&g, &make_grim_trigger(&g).unwrap(), DEFAULT_TOLERANCE)
            .unwrap()
            .to_json()
            .unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["verdict"], "spe");
        assert_eq!(parsed["step1_values"].as_array().unwrap().len(), 8);
    }

    #[test]
    fn negative_tolerance_rejected() {
        let g = pd(0.6);
        assert!(check_spe(&g, &make_grim_trigger(&g).unwrap(), -1.0).is_err());
    }

    #[test]
    fn accepted_profile_values_match_fixed_point() {
        let g = pd(0.8);
        let prof = make_grim_trigger(&g).unwrap();
        let report = check_nash_from_t1(&g, &prof, DEFAULT_TOLERANCE).unwrap();
        assert!(report.is_nash_from_t1());
        let b = fixed_point_b(&g, &prof, 1e-10).unwrap();
        assert!(b.values.distance(&report.values) <= 1e-9);
    }

    fn scale_firm(g: &Game, firm: usize, c: f64) -> Game {
        let data = g.to_data();
        let m = g.num_joint();
        let r = g.num_states();
        let mut profit = data.profit.clone();
        for idx in 0..r * m {
            profit[(firm * r) * m + idx] *= c;
        }
        Game::new(GameData { profit, ..data }).unwrap()
    }

    #[test]
    fn special_prices_are_not_needed() {
        let mut data = pd(0.6).to_data();
        data.special = None::<SpecialPrices>;
        let g = Game::new(data).unwrap();
        let prof = PolicyProfile::stationary(&g, L).unwrap();
        assert!(check_spe(&g, &prof, DEFAULT_TOLERANCE).unwrap().is_spe());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn verdicts_monotone_in_tolerance(seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_game(&mut rng, &RandomGameSpec { states: 1, ..RandomGameSpec::default() });
            let prof = random_profile(&mut rng, &g);
            let low = check_spe(&g, &prof, 1e-9).unwrap();
            let high = check_spe(&g, &prof, 1e3).unwrap();
            if low.is_spe() {
                prop_assert!(high.is_spe());
            }
            prop_assert!(high.step2_violations.len() <= low.step2_violations.len());
        }

        #[test]
        fn scaling_one_firm_preserves_argmax(seed: u64, c in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_game(&mut rng, &RandomGameSpec::default());
            let prof = random_profile(&mut rng, &g);
            let scaled = scale_firm(&g, 0, c);
            let a = check_nash_from_t1(&g, &prof, 0.0).unwrap();
            let b = check_nash_from_t1(&scaled, &prof, 0.0).unwrap();
            prop_assert_eq!(a.verdict, b.verdict);
            for aug in 0..g.num_augmented() {
                prop_assert!((b.values.get(0, aug) - c * a.values.get(0, aug)).abs() <= 1e-9 * c.max(1.0) * (1.0 + a.values.get(0, aug).abs()));
                prop_assert!((b.values.get(1, aug) - a.values.get(1, aug)).abs() <= 1e-9 * (1.0 + a.values.get(1, aug).abs()));
            }
            let best = |r: &VerificationReport| -> Vec<(usize, usize, usize)> {
                r.step2_violations.iter().filter(|v| v.firm == 0).map(|v| (v.state, v.best_action, v.prev_prices[0] * 10 + v.prev_prices[1])).collect()
            };
            prop_assert_eq!(best(&a), best(&b));
        }
    }
}
