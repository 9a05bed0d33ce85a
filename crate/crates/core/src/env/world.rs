use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::features::{FeatureMap, FeatureSpec};
use super::reward::{RewardFn, RewardSet, RewardSpec};
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::stats::Welford;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ActionSpace {
    Finite { actions: Vec<Vec<f64>> },
    Box { low: Vec<f64>, high: Vec<f64> },
}

impl ActionSpace {
    pub fn dim(&self) -> usize {
        match self {
            ActionSpace::Finite { actions } => actions.first().map_or(0, Vec::len),
            ActionSpace::Box { low, .. } => low.len(),
        }
    }

    pub fn finite(&self) -> Option<&[Vec<f64>]> {
        match self {
            ActionSpace::Finite { actions } => Some(actions),
            ActionSpace::Box { .. } => None,
        }
    }

    pub fn contains(&self, action: &DVector<f64>) -> bool {
        match self {
            ActionSpace::Finite { actions } => actions
                .iter()
                .any(|a| a.len() == action.len() && a.iter().zip(action.iter()).all(|(x, y)| x == y)),
            ActionSpace::Box { low, high } => {
                action.len() == low.len()
                    && action
                        .iter()
                        .zip(low.iter().zip(high))
                        .all(|(x, (l, h))| *l <= *x && *x <= *h)
            }
        }
    }

    /// Uniform draw from the space.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            ActionSpace::Finite { actions } => DVector::from_row_slice(&actions[rng.random_range(0..actions.len())]),
            ActionSpace::Box { low, high } => DVector::from_iterator(
                low.len(),
                low.iter().zip(high).map(|(l, h)| if l < h { rng.random_range(*l..=*h) } else { *l }),
            ),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ActionSpace::Finite { actions } => {
                if actions.is_empty() {
                    return Err(Error::Config("finite action space is empty".into()));
                }
                let d = actions[0].len();
                if actions.iter().any(|a| a.len() != d || a.iter().any(|x| !x.is_finite())) {
                    return Err(Error::Config("action vectors must share a dimension and be finite".into()));
                }
            }
            ActionSpace::Box { low, high } => {
                if low.len() != high.len() || low.iter().zip(high).any(|(l, h)| !(l <= h)) {
                    return Err(Error::Config("box action bounds must satisfy low <= high".into()));
                }
            }
        }
        Ok(())
    }
}

/// Serialized form of a world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    pub features: FeatureSpec,
    /// W* in row-major order, d_S × d_φ.
    pub w_star: Vec<f64>,
    pub sigma: f64,
    pub rewards: Vec<RewardSpec>,
    pub actions: ActionSpace,
    pub s1: Vec<f64>,
}

/// Transition model s' = W φ(s, a) + ε, ε ~ N(0, σ² I).
#[derive(Clone, Copy, Debug)]
pub struct Dynamics<'a> {
    pub w: &'a DMatrix<f64>,
    pub features: &'a FeatureMap,
    pub sigma: f64,
}

impl Dynamics<'_> {
    pub fn mean_next(&self, state: &DVector<f64>, action: &DVector<f64>) -> Result<DVector<f64>> {
        let phi = self.features.evaluate(state, action)?;
        Ok(self.w * phi)
    }

    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &DVector<f64>,
        action: &DVector<f64>,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        let mut next = self.mean_next(state, action)?;
        if self.sigma > 0.0 {
            for x in next.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *x += self.sigma * z;
            }
        }
        Ok(next)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: DVector<f64>,
    pub action: DVector<f64>,
    pub next_state: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStep {
    /// One-based step index.
    pub h: usize,
    pub state: DVector<f64>,
    pub action: DVector<f64>,
    pub reward_true: f64,
    pub reward_used: f64,
    pub next_state: DVector<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn return_true(&self) -> f64 {
        self.steps.iter().fold(0.0, |acc, s| acc + s.reward_true)
    }

    pub fn return_used(&self) -> f64 {
        self.steps.iter().fold(0.0, |acc, s| acc + s.reward_used)
    }

    pub fn transitions(&self) -> Vec<Transition> {
        self.steps
            .iter()
            .map(|s| Transition {
                state: s.state.clone(),
                action: s.action.clone(),
                next_state: s.next_state.clone(),
            })
            .collect()
    }
}

/// Maps (step, state) to an action. `step` is zero-based.
pub trait Policy {
    fn act(&mut self, step: usize, state: &DVector<f64>) -> Result<DVector<f64>>;
}

impl<F> Policy for F
where
    F: FnMut(usize, &DVector<f64>) -> DVector<f64>,
{
    fn act(&mut self, step: usize, state: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self(step, state))
    }
}

/// Executes `policy` for steps `start_step..horizon` on arbitrary dynamics.
#[allow(clippy::too_many_arguments)]
pub fn rollout_on<R: Rng + ?Sized>(
    dynamics: &Dynamics<'_>,
    actions: &ActionSpace,
    start: &DVector<f64>,
    start_step: usize,
    horizon: usize,
    policy: &mut dyn Policy,
    true_rewards: &dyn RewardFn,
    reward_override: Option<&dyn RewardFn>,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut steps = Vec::with_capacity(horizon.saturating_sub(start_step));
    let mut state = start.clone();
    for step in start_step..horizon {
        let action = policy.act(step, &state)?;
        if !actions.contains(&action) {
            return Err(Error::Policy(format!(
                "action {:?} at step {} is outside the action space",
                action.as_slice(),
                step + 1
            )));
        }
        let reward_true = true_rewards.reward(step, &state, &action)?;
        let reward_used = match reward_override {
            Some(r) => r.reward(step, &state, &action)?,
            None => reward_true,
        };
        let next_state = dynamics.step(&state, &action, rng)?;
        steps.push(TrajectoryStep {
            h: step + 1,
            state: std::mem::replace(&mut state, next_state.clone()),
            action,
            reward_true,
            reward_used,
            next_state,
        });
    }
    Ok(Trajectory { steps })
}

/// Monte Carlo estimate of V^π_1(s_1; rewards, W) with its standard error.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_value_on<R: Rng + ?Sized>(
    dynamics: &Dynamics<'_>,
    actions: &ActionSpace,
    start: &DVector<f64>,
    start_step: usize,
    horizon: usize,
    policy: &mut dyn Policy,
    rewards: &dyn RewardFn,
    n_rollouts: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_rollouts == 0 {
        return Err(Error::Config("n_rollouts must be at least 1".into()));
    }
    let mut acc = Welford::default();
    for _ in 0..n_rollouts {
        let traj = rollout_on(dynamics, actions, start, start_step, horizon, policy, rewards, None, rng)?;
        acc.push(traj.return_true());
    }
    Ok((acc.mean(), acc.std_error()))
}

/// Ground-truth KNR environment. Immutable after construction.
#[derive(Clone, Debug)]
pub struct KnrWorld {
    features: FeatureMap,
    w_star: DMatrix<f64>,
    w_star_norm: f64,
    sigma: f64,
    rewards: RewardSet,
    actions: ActionSpace,
    s1: DVector<f64>,
}

impl KnrWorld {
    pub fn from_spec(spec: &WorldSpec) -> Result<Self> {
        spec.actions.validate()?;
        if spec.actions.dim() != spec.action_dim {
            return Err(Error::Config("action space dimension disagrees with action_dim".into()));
        }
        let features = FeatureMap::new(spec.features.clone(), spec.state_dim, spec.action_dim, spec.horizon)?;
        if spec.w_star.len() != spec.state_dim * features.dim() {
            return Err(Error::Config(format!(
                "W* has {} entries, expected {} x {}",
                spec.w_star.len(),
                spec.state_dim,
                features.dim()
            )));
        }
        if spec.w_star.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("W* has non-finite entries".into()));
        }
        if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
            return Err(Error::Config("sigma must be finite and non-negative".into()));
        }
        if spec.s1.len() != spec.state_dim {
            return Err(Error::Config("s1 has the wrong dimension".into()));
        }
        let w_star = DMatrix::from_row_slice(spec.state_dim, features.dim(), &spec.w_star);
        let w_star_norm = spectral_norm(&w_star);
        Ok(Self {
            features,
            w_star_norm,
            w_star,
            sigma: spec.sigma,
            rewards: RewardSet::new(spec.rewards.clone(), spec.horizon)?,
            actions: spec.actions.clone(),
            s1: DVector::from_row_slice(&spec.s1),
        })
    }

    pub fn to_spec(&self) -> WorldSpec {
        WorldSpec {
            state_dim: self.state_dim(),
            action_dim: self.features.action_dim(),
            horizon: self.horizon(),
            features: self.features.spec().clone(),
            w_star: self.w_star.transpose().as_slice().to_vec(),
            sigma: self.sigma,
            rewards: self.rewards.specs().to_vec(),
            actions: self.actions.clone(),
            s1: self.s1.as_slice().to_vec(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(&serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_spec())?)
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn w_star(&self) -> &DMatrix<f64> {
        &self.w_star
    }

    /// ‖W*‖₂, computed once at construction.
    pub fn w_star_norm(&self) -> f64 {
        self.w_star_norm
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rewards(&self) -> &RewardSet {
        &self.rewards
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn s1(&self) -> &DVector<f64> {
        &self.s1
    }

    pub fn horizon(&self) -> usize {
        self.features.horizon()
    }

    pub fn state_dim(&self) -> usize {
        self.w_star.nrows()
    }

    pub fn dynamics(&self) -> Dynamics<'_> {
        Dynamics {
            w: &self.w_star,
            features: &self.features,
            sigma: self.sigma,
        }
    }

    /// Dynamics sharing this world's features but with a different matrix
    /// and noise level (e.g. a fitted model).
    pub fn model<'a>(&'a self, w: &'a DMatrix<f64>, sigma: f64) -> Dynamics<'a> {
        Dynamics {
            w,
            features: &self.features,
            sigma,
        }
    }

    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &DVector<f64>,
        action: &DVector<f64>,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        if !self.actions.contains(action) {
            return Err(Error::Config(format!("action {:?} not in action space", action.as_slice())));
        }
        self.dynamics().step(state, action, rng)
    }

    pub fn rollout<R: Rng + ?Sized>(
        &self,
        policy: &mut dyn Policy,
        reward_override: Option<&dyn RewardFn>,
        rng: &mut R,
    ) -> Result<Trajectory> {
        rollout_on(
            &self.dynamics(),
            &self.actions,
            &self.s1,
            0,
            self.horizon(),
            policy,
            &self.rewards,
            reward_override,
            rng,
        )
    }

    pub fn monte_carlo_value<R: Rng + ?Sized>(
        &self,
        policy: &mut dyn Policy,
        rewards: &dyn RewardFn,
        n_rollouts: usize,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        monte_carlo_value_on(
            &self.dynamics(),
            &self.actions,
            &self.s1,
            0,
            self.horizon(),
            policy,
            rewards,
            n_rollouts,
            rng,
        )
    }
}
