//! Tabular Q-learning with bounded experimentation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schedule::LearningSchedule;
use super::table::QTables;
use crate::error::{Error, Result};
use crate::game::Game;

pub const RNG_NAME: &str = "ChaCha8Rng";

/// `e^{q(a)/β} / Σ e^{q(ã)/β}`, shifted by the row maximum.
pub fn softmax_probs(q_row: &[f64], beta: f64) -> Result<Vec<f64>> {
    if !(beta > 0.0) {
        return Err(Error::Config(format!("softmax temperature must be positive, got {beta}")));
    }
    let max = q_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = q_row.iter().map(|q| ((q - max) / beta).exp()).collect();
    let sum: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / sum).collect())
}

/// Uniform draw over the actions whose stored value equals the row maximum.
pub fn greedy_action<R: Rng + ?Sized>(q_row: &[f64], rng: &mut R) -> usize {
    let max = q_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..q_row.len()).filter(|&a| q_row[a] == max).collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.gen_range(0..ties.len())]
    }
}

fn sample<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    // rounding left `acc` just below one: fall back to the last positive entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// One Q-learning update of the single cell `(aug, own action of firm)`.
///
/// The target is `π^i(p, s) + δ_i Σ_{s'} P(s'|p, s) max_a Q(s', p, a)`,
/// evaluated on the tables before the update. Returns the new cell value.
pub fn q_update(game: &Game, firm: usize, q: &mut QTables, aug: usize, joint: usize, alpha: f64) -> f64 {
    let (state, _) = game.split_augmented(aug);
    let expected: f64 = game
        .transition_row(state, joint)
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(s2, &p)| p * q.row_max(firm, game.augmented(s2, joint)))
        .sum();
    let target = game.profit(firm, joint, state) + game.discount(firm) * expected;
    let action = game.joint_space().action_of(joint, firm);
    let new = (1.0 - alpha) * q.get(firm, aug, action) + alpha * target;
    q.set(firm, aug, action, new);
    new
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Softmax,
    Greedy,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Softmax => "softmax",
            Phase::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Joint price index played at `t = 0`.
    pub p0: usize,
    pub initial_state: usize,
    /// Last simulated period.
    pub horizon: usize,
    pub seed: u64,
    /// Tables installed at `t = T`, just before the first greedy choice.
    pub q_override_at_switch: Option<QTables>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub phase: Phase,
    pub state: usize,
    /// Joint index of `p_{t−1}`.
    pub prev: usize,
    /// Joint index of `p_t`.
    pub joint: usize,
    pub rewards: Vec<f64>,
    /// `Q_t^i(s_t, p_t^i)` before the update.
    pub q_chosen: Vec<f64>,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub seed: u64,
    pub rng: &'static str,
    pub experimentation: usize,
    pub steps: Vec<StepRecord>,
    /// First `t ≥ T` at which the collusive vector is played.
    pub lock_in_time: Option<usize>,
    /// Whether every period from `lock_in_time` on plays the collusive vector.
    pub stays_locked: bool,
}

impl RunTrace {
    pub fn step(&self, t: usize) -> Option<&StepRecord> {
        t.checked_sub(1).and_then(|i| self.steps.get(i))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: RunTrace,
    /// `Q_T` as used for the first greedy choice.
    pub q_at_switch: Option<QTables>,
    /// Joint index of `p_{T−1}`.
    pub p_before_switch: Option<usize>,
    /// Tables after the last update.
    pub final_q: QTables,
    /// `Q_t^i((s_t, p^C), p^C)` before each period's update, indexed
    /// `[t − 1][firm]`; empty without special prices.
    pub collusive_q: Vec<Vec<f64>>,
}

/// Runs Q-learning from `Q₀ ≡ 0`: softmax choices for `1 ≤ t < T`, greedy
/// choices with uniform tie-breaking for `t ≥ T`.
///
/// Firm `i` draws from ChaCha8 stream `i + 1` of the run seed, the
/// environment from stream 0.
pub fn run_q_learning(game: &Game, schedule: &LearningSchedule, config: &RunConfig) -> Result<RunOutput> {
    schedule.validate()?;
    game.joint_space().check(config.p0)?;
    game.check_state(config.initial_state)?;
    if let Some(q) = &config.q_override_at_switch {
        q.check_game(game)?;
    }
    let n = game.firms();
    let switch = schedule.experimentation;
    let space = game.joint_space();
    let special = game.special_opt();
    let collusive = special.map(|sp| space.symmetric(sp.p_c));
    let mut collusive_q = Vec::new();

    let mut env_rng = ChaCha8Rng::seed_from_u64(config.seed);
    env_rng.set_stream(0);
    let mut firm_rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(i as u64 + 1);
            r
        })
        .collect();
    let mut alpha_streams: Vec<_> = (0..n).map(|i| schedule.alpha.stream(game.discount(i))).collect();

    let mut q = QTables::zeros(game);
    let mut q_at_switch = None;
    let mut p_before_switch = None;
    let mut state = config.initial_state;
    let mut prev = config.p0;
    let mut steps = Vec::with_capacity(config.horizon);
    let mut lock_in_time = None;
    let mut stays_locked = true;
    let mut actions = vec![0usize; n];

    for t in 1..=config.horizon {
        let alphas: Vec<f64> = alpha_streams
            .iter_mut()
            .map(|s| s.next().expect("rate streams are infinite"))
            .collect();
        if t == switch {
            if let Some(o) = &config.q_override_at_switch {
                q = o.clone();
            }
            q_at_switch = Some(q.clone());
            p_before_switch = Some(prev);
        }
        let aug = game.augmented(state, prev);
        let phase = if t < switch { Phase::Softmax } else { Phase::Greedy };
        for (i, rng) in firm_rngs.iter_mut().enumerate() {
            let row = q.row(i, aug);
            actions[i] = match phase {
                Phase::Softmax => sample(&softmax_probs(row, schedule.beta.at(t))?, rng),
                Phase::Greedy => greedy_action(row, rng),
            };
        }
        let joint = space.encode(&actions)?;
        if let (Some(sp), Some(pc)) = (special, collusive) {
            let at = game.augmented(state, pc);
            collusive_q.push((0..n).map(|i| q.get(i, at, sp.p_c)).collect());
        }
        let mut rewards = Vec::with_capacity(n);
        let mut q_chosen = Vec::with_capacity(n);
        // all firms read Q_t before any of them writes Q_{t+1}
        for (i, &a) in actions.iter().enumerate() {
            q_chosen.push(q.get(i, aug, a));
            rewards.push(game.profit(i, joint, state));
        }
        for (i, &alpha) in alphas.iter().enumerate() {
            q_update(game, i, &mut q, aug, joint, alpha);
        }
        if t >= switch {
            if Some(joint) == collusive {
                lock_in_time.get_or_insert(t);
            } else if lock_in_time.is_some() {
                stays_locked = false;
            }
        }
        steps.push(StepRecord {
            t,
            phase,
            state,
            prev,
            joint,
            rewards,
            q_chosen,
            alphas,
        });
        if game.num_states() > 1 {
            state = sample(game.transition_row(state, joint), &mut env_rng);
        }
        prev = joint;
    }

    Ok(RunOutput {
        trace: RunTrace {
            seed: config.seed,
            rng: RNG_NAME,
            experimentation: switch,
            steps,
            stays_locked: lock_in_time.is_some() && stays_locked,
            lock_in_time,
        },
        q_at_switch,
        p_before_switch,
        final_q: q,
        collusive_q,
    })
}
