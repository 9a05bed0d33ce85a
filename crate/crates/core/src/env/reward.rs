use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::features::cell_index;
use crate::error::{Error, Result};

/// A per-step reward r_h(s, a). `step` is zero-based (h = step + 1).
pub trait RewardFn: Sync {
    fn reward(&self, step: usize, state: &DVector<f64>, action: &DVector<f64>) -> Result<f64>;
}

impl<T: RewardFn + ?Sized> RewardFn for &T {
    fn reward(&self, step: usize, state: &DVector<f64>, action: &DVector<f64>) -> Result<f64> {
        (**self).reward(step, state, action)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RewardSpec {
    Zero,
    /// max(0, 1 − ‖s − goal‖² / radius²)
    QuadraticDistance { goal: Vec<f64>, radius: f64 },
    /// `value` when round(s[0]) == `cell` (cells clamped to [0, n_cells)).
    Cell { cell: usize, n_cells: usize, value: f64 },
    /// Reward depending only on which listed action was taken.
    ActionTable { actions: Vec<Vec<f64>>, values: Vec<f64> },
    Sum { terms: Vec<RewardSpec> },
}

impl RewardSpec {
    /// Validates parameters and clamps out-of-range reward levels into
    /// [0, 1], logging a warning for each adjustment.
    pub fn sanitized(self) -> Result<Self> {
        fn clamp_level(x: f64, what: &str) -> Result<f64> {
            if !x.is_finite() {
                return Err(Error::Config(format!("{what} is not finite")));
            }
            if !(0.0..=1.0).contains(&x) {
                log::warn!("{what} = {x} lies outside [0, 1]; clamping");
            }
            Ok(x.clamp(0.0, 1.0))
        }
        Ok(match self {
            RewardSpec::Zero => RewardSpec::Zero,
            RewardSpec::QuadraticDistance { goal, radius } => {
                if !(radius > 0.0 && radius.is_finite()) || goal.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Config("quadratic-distance reward needs finite goal and radius > 0".into()));
                }
                RewardSpec::QuadraticDistance { goal, radius }
            }
            RewardSpec::Cell { cell, n_cells, value } => {
                if cell >= n_cells {
                    return Err(Error::Config(format!("reward cell {cell} outside corridor of {n_cells}")));
                }
                RewardSpec::Cell {
                    cell,
                    n_cells,
                    value: clamp_level(value, "cell reward")?,
                }
            }
            RewardSpec::ActionTable { actions, values } => {
                if actions.len() != values.len() {
                    return Err(Error::Config("action table needs one value per action".into()));
                }
                let values = values
                    .into_iter()
                    .map(|v| clamp_level(v, "action reward"))
                    .collect::<Result<_>>()?;
                RewardSpec::ActionTable { actions, values }
            }
            RewardSpec::Sum { terms } => RewardSpec::Sum {
                terms: terms.into_iter().map(RewardSpec::sanitized).collect::<Result<_>>()?,
            },
        })
    }

    fn raw(&self, state: &DVector<f64>, action: &DVector<f64>) -> Result<f64> {
        Ok(match self {
            RewardSpec::Zero => 0.0,
            RewardSpec::QuadraticDistance { goal, radius } => {
                if goal.len() != state.len() {
                    return Err(Error::Config("reward goal has the wrong dimension".into()));
                }
                let d2: f64 = goal.iter().zip(state.iter()).map(|(g, s)| (s - g).powi(2)).sum();
                (1.0 - d2 / (radius * radius)).max(0.0)
            }
            RewardSpec::Cell { cell, n_cells, value } => {
                if cell_index(state, *n_cells) == *cell {
                    *value
                } else {
                    0.0
                }
            }
            RewardSpec::ActionTable { actions, values } => actions
                .iter()
                .position(|a| a.len() == action.len() && a.iter().zip(action.iter()).all(|(x, y)| x == y))
                .map(|i| values[i])
                .unwrap_or(0.0),
            RewardSpec::Sum { terms } => {
                let mut total = 0.0;
                for t in terms {
                    total += t.raw(state, action)?;
                }
                total
            }
        })
    }

    pub fn evaluate(&self, state: &DVector<f64>, action: &DVector<f64>) -> Result<f64> {
        let r = self.raw(state, action)?;
        if r.is_nan() {
            return Err(Error::Numeric("reward evaluated to NaN".into()));
        }
        Ok(r.clamp(0.0, 1.0))
    }
}

/// The H true reward functions of a world.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardSet {
    per_step: Vec<RewardSpec>,
}

impl RewardSet {
    /// Accepts either one spec per step or a single spec broadcast to all
    /// H steps.
    pub fn new(specs: Vec<RewardSpec>, horizon: usize) -> Result<Self> {
        let specs = match specs.len() {
            1 => vec![specs[0].clone(); horizon],
            n if n == horizon => specs,
            n => return Err(Error::Config(format!("expected 1 or {horizon} reward specs, got {n}"))),
        };
        Ok(Self {
            per_step: specs.into_iter().map(RewardSpec::sanitized).collect::<Result<_>>()?,
        })
    }

    pub fn specs(&self) -> &[RewardSpec] {
        &self.per_step
    }

    pub fn len(&self) -> usize {
        self.per_step.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_step.is_empty()
    }
}

impl RewardFn for RewardSet {
    fn reward(&self, step: usize, state: &DVector<f64>, action: &DVector<f64>) -> Result<f64> {
        self.per_step
            .get(step)
            .ok_or_else(|| Error::Domain(format!("step {step} beyond horizon {}", self.per_step.len())))?
            .evaluate(state, action)
    }
}
