//! Learning-rate and temperature sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning-rate rule. Rates are indexed by period `t ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaRule {
    /// `α_t = α₁` for `t ≤ origin`, then
    /// `α_t = δ α_{t−1} / (1 + δ(1 − δ) α_{t−1})`.
    Appendix {
        alpha1: f64,
        #[serde(default = "default_origin")]
        origin: usize,
    },
    Constant { alpha: f64 },
    /// `values[t − 1]`, the last entry repeating.
    Table { values: Vec<f64> },
}

fn default_origin() -> usize {
    1
}

impl AlphaRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            AlphaRule::Appendix { alpha1, origin } => {
                if !(*alpha1 > 0.0 && *alpha1 < 1.0) {
                    return Err(Error::InvalidSchedule(format!("alpha1 must lie in (0, 1), got {alpha1}")));
                }
                if *origin == 0 {
                    return Err(Error::InvalidSchedule("origin must be at least 1".into()));
                }
            }
            AlphaRule::Constant { alpha } => check_rate(*alpha)?,
            AlphaRule::Table { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidSchedule("alpha table is empty".into()));
                }
                values.iter().try_for_each(|a| check_rate(*a))?;
            }
        }
        Ok(())
    }

    /// Rates `α₁, α₂, …` for a firm with discount `delta`.
    pub fn stream(&self, delta: f64) -> AlphaStream {
        AlphaStream {
            rule: self.clone(),
            delta,
            t: 0,
            last: 0.0,
        }
    }
}

fn check_rate(alpha: f64) -> Result<()> {
    // α = 1 is admitted for constant-rate fixed-point experiments
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidSchedule(format!("learning rate must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// Lazy learning-rate sequence for one firm.
#[derive(Debug, Clone)]
pub struct AlphaStream {
    rule: AlphaRule,
    delta: f64,
    t: usize,
    last: f64,
}

impl Iterator for AlphaStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        self.t += 1;
        let t = self.t;
        let value = match &self.rule {
            AlphaRule::Appendix { alpha1, origin } => {
                if t <= *origin {
                    *alpha1
                } else {
                    appendix_step(self.last, self.delta)
                }
            }
            AlphaRule::Constant { alpha } => *alpha,
            AlphaRule::Table { values } => values[(t - 1).min(values.len() - 1)],
        };
        self.last = value;
        Some(value)
    }
}

#[inline]
fn appendix_step(prev: f64, delta: f64) -> f64 {
    delta * prev / (1.0 + delta * (1.0 - delta) * prev)
}

/// `α₁, α₂, …` from the recursion, starting at `k = 1`.
pub fn appendix_alpha_schedule(alpha1: f64, delta: f64) -> Result<AlphaStream> {
    let rule = AlphaRule::Appendix { alpha1, origin: 1 };
    rule.validate()?;
    Ok(rule.stream(delta))
}

/// Softmax temperature rule, used for `t < T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaRule {
    /// `β_t = β₀ exp(−κ t)`, floored at the smallest positive normal.
    Exponential { beta0: f64, kappa: f64 },
    Constant { beta: f64 },
    Table { values: Vec<f64> },
}

impl Default for BetaRule {
    fn default() -> Self {
        BetaRule::Exponential {
            beta0: 1.0,
            kappa: 1e-3,
        }
    }
}

impl BetaRule {
    pub fn validate(&self) -> Result<()> {
        let positive = |b: f64, what: &str| {
            if b > 0.0 && b.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidSchedule(format!("{what} must be positive, got {b}")))
            }
        };
        match self {
            BetaRule::Exponential { beta0, kappa } => {
                positive(*beta0, "beta0")?;
                if !(*kappa >= 0.0 && kappa.is_finite()) {
                    return Err(Error::InvalidSchedule(format!("kappa must be non-negative, got {kappa}")));
                }
            }
            BetaRule::Constant { beta } => positive(*beta, "beta")?,
            BetaRule::Table { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidSchedule("beta table is empty".into()));
                }
                values.iter().try_for_each(|b| positive(*b, "beta"))?;
            }
        }
        Ok(())
    }

    pub fn at(&self, t: usize) -> f64 {
        match self {
            BetaRule::Exponential { beta0, kappa } => {
                (beta0 * (-kappa * t as f64).exp()).max(f64::MIN_POSITIVE)
            }
            BetaRule::Constant { beta } => *beta,
            BetaRule::Table { values } => values[t.saturating_sub(1).min(values.len() - 1)],
        }
    }
}

/// Rates, temperatures and the experimentation horizon `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningSchedule {
    pub alpha: AlphaRule,
    #[serde(default)]
    pub beta: BetaRule,
    /// Softmax is used for `t < experimentation`, greedy play afterwards.
    pub experimentation: usize,
}

impl LearningSchedule {
    pub fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        self.beta.validate()?;
        if self.experimentation == 0 {
            return Err(Error::InvalidSchedule("experimentation horizon T must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of [`alpha_delta_limit`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaLimit {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `Π_{l=T+1}^{t} (1 − α_l(1 − δ))` at the last iterate. It tends to zero
    /// exactly when the rates are not summable.
    pub residual_product: f64,
    pub alpha_sum: f64,
    /// Numerical verdict on `Σ α_t = ∞`: the residual product fell below 1e-9.
    pub sum_diverges: bool,
}

pub const ALPHA_LIMIT_STREAK: usize = 50;
pub const ALPHA_LIMIT_MAX_ITER: usize = 10_000_000;

/// `lim_t Σ_{k=T+1}^t Π_{l=k+1}^t (1 − α_l(1 − δ)) α_k`, accumulated with
/// `S_t = (1 − α_t(1 − δ)) S_{t−1} + α_t` from `S_T = 0` until the increment
/// stays below `tol` for [`ALPHA_LIMIT_STREAK`] consecutive steps.
pub fn alpha_delta_limit(rule: &AlphaRule, delta: f64, horizon: usize, tol: f64) -> Result<AlphaLimit> {
    alpha_delta_limit_capped(rule, delta, horizon, tol, ALPHA_LIMIT_MAX_ITER)
}

pub fn alpha_delta_limit_capped(
    rule: &AlphaRule,
    delta: f64,
    horizon: usize,
    tol: f64,
    max_iter: usize,
) -> Result<AlphaLimit> {
    rule.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("discount must lie in (0, 1), got {delta}")));
    }
    let mut stream = rule.stream(delta).skip(horizon);
    let mut s = 0.0;
    let mut product = 1.0;
    let mut sum = 0.0;
    let mut streak = 0;
    let mut iterations = 0;
    while iterations < max_iter {
        let a = stream.next().expect("rate streams are infinite");
        iterations += 1;
        let damp = 1.0 - a * (1.0 - delta);
        let next = damp * s + a;
        product *= damp;
        sum += a;
        let step = (next - s).abs();
        s = next;
        streak = if step < tol { streak + 1 } else { 0 };
        if streak >= ALPHA_LIMIT_STREAK {
            break;
        }
    }
    Ok(AlphaLimit {
        value: s,
        iterations,
        converged: streak >= ALPHA_LIMIT_STREAK,
        residual_product: product,
        alpha_sum: sum,
        sum_diverges: product < 1e-9,
    })
}
