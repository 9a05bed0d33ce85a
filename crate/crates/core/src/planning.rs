//! Approximate Plan oracle: exact enumeration for small finite instances and
//! random shooting otherwise, both over open-loop action sequences.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{monte_carlo_value_on, rollout_on, ActionSpace, Dynamics, Policy, RewardFn};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

pub const DEFAULT_BUDGET: usize = 100_000;

/// Everything a planner needs: start state, remaining steps, rewards and model.
#[derive(Clone, Copy)]
pub struct PlanningProblem<'a> {
    pub s1: &'a DVector<f64>,
    /// Zero-based index of the first step to plan.
    pub start_step: usize,
    pub horizon: usize,
    pub rewards: &'a dyn RewardFn,
    pub dynamics: Dynamics<'a>,
    pub actions: &'a ActionSpace,
}

impl PlanningProblem<'_> {
    pub fn steps(&self) -> usize {
        self.horizon.saturating_sub(self.start_step)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Exhaustive,
    Shooting,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    pub budget: usize,
    pub n_candidates: usize,
    /// Rollouts per candidate when the model is stochastic.
    pub n_eval_rollouts: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            kind: PlannerKind::Exhaustive,
            budget: DEFAULT_BUDGET,
            n_candidates: 256,
            n_eval_rollouts: 16,
        }
    }
}

/// A fixed action sequence indexed from `start_step`.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenLoopPolicy {
    pub start_step: usize,
    pub actions: Vec<DVector<f64>>,
}

impl Policy for OpenLoopPolicy {
    fn act(&mut self, step: usize, _state: &DVector<f64>) -> Result<DVector<f64>> {
        step.checked_sub(self.start_step)
            .and_then(|i| self.actions.get(i))
            .cloned()
            .ok_or_else(|| Error::Policy(format!("open-loop policy has no action for step {}", step + 1)))
    }
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    pub policy: OpenLoopPolicy,
    pub value_estimate: f64,
    pub value_std_error: f64,
    pub planner_kind: PlannerKind,
    pub n_model_rollouts: usize,
}

/// Value of an action sequence on the problem's model. Exact (one rollout)
/// when the model is deterministic.
pub fn evaluate_sequence(
    problem: &PlanningProblem<'_>,
    sequence: &[DVector<f64>],
    n_eval_rollouts: usize,
    rng: &mut StreamRng,
) -> Result<(f64, f64)> {
    let mut policy = OpenLoopPolicy {
        start_step: problem.start_step,
        actions: sequence.to_vec(),
    };
    evaluate_policy_on_model(&mut policy, problem, n_eval_rollouts, rng)
}

/// Monte Carlo V^π under the problem's model and rewards.
pub fn evaluate_policy_on_model(
    policy: &mut dyn Policy,
    problem: &PlanningProblem<'_>,
    n_rollouts: usize,
    rng: &mut StreamRng,
) -> Result<(f64, f64)> {
    let n = if problem.dynamics.sigma == 0.0 { 1 } else { n_rollouts };
    let (mean, se) = monte_carlo_value_on(
        &problem.dynamics,
        problem.actions,
        problem.s1,
        problem.start_step,
        problem.horizon,
        policy,
        problem.rewards,
        n,
        rng,
    )?;
    Ok((mean, if n == 1 { 0.0 } else { se }))
}

fn finite_actions<'a>(problem: &PlanningProblem<'a>) -> Result<Vec<DVector<f64>>> {
    problem
        .actions
        .finite()
        .map(|a| a.iter().map(|x| DVector::from_row_slice(x)).collect())
        .ok_or_else(|| Error::PlannerRefused("exhaustive planning needs a finite action space".into()))
}

/// Number of sequences, or None on overflow.
fn sequence_count(n_actions: usize, steps: usize) -> Option<usize> {
    (0..steps).try_fold(1usize, |acc, _| acc.checked_mul(n_actions))
}

/// Enumerates every open-loop sequence and returns the best; ties go to the
/// lexicographically first sequence.
pub fn plan_exhaustive(
    problem: &PlanningProblem<'_>,
    n_eval_rollouts: usize,
    budget: usize,
    rng: &mut StreamRng,
) -> Result<PlanResult> {
    let actions = finite_actions(problem)?;
    let steps = problem.steps();
    let count = sequence_count(actions.len(), steps)
        .filter(|&c| c <= budget)
        .ok_or_else(|| {
            Error::PlannerRefused(format!(
                "{} actions over {steps} steps exceeds the budget of {budget} sequences",
                actions.len()
            ))
        })?;

    let (best, value, se) = if problem.dynamics.sigma == 0.0 {
        let mut search = Search {
            problem,
            actions: &actions,
            prefix: Vec::with_capacity(steps),
            best: None,
        };
        search.descend(problem.s1.clone(), problem.start_step, 0.0)?;
        let (seq, value) = search.best.expect("at least one sequence");
        (seq, value, 0.0)
    } else {
        // Common random numbers across sequences.
        let seed: u64 = rng.random();
        let values = (0..count)
            .into_par_iter()
            .map(|idx| {
                let seq = decode(idx, actions.len(), steps);
                let seq: Vec<_> = seq.into_iter().map(|i| actions[i].clone()).collect();
                evaluate_sequence(problem, &seq, n_eval_rollouts, &mut StreamRng::seed_from_u64(seed))
            })
            .collect::<Result<Vec<_>>>()?;
        let idx = argmax(values.iter().map(|v| v.0));
        let seq = decode(idx, actions.len(), steps).into_iter().map(|i| actions[i].clone()).collect();
        (seq, values[idx].0, values[idx].1)
    };

    Ok(PlanResult {
        policy: OpenLoopPolicy {
            start_step: problem.start_step,
            actions: best,
        },
        value_estimate: value,
        value_std_error: se,
        planner_kind: PlannerKind::Exhaustive,
        n_model_rollouts: if problem.dynamics.sigma == 0.0 { count } else { count * n_eval_rollouts },
    })
}

/// First index of the maximum under strict comparison.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Mixed-radix digits of `idx`, most significant first.
fn decode(mut idx: usize, base: usize, len: usize) -> Vec<usize> {
    let mut digits = vec![0; len];
    for d in digits.iter_mut().rev() {
        *d = idx % base;
        idx /= base;
    }
    digits
}

/// Depth-first enumeration on a deterministic model, sharing prefixes.
struct Search<'p, 'a> {
    problem: &'p PlanningProblem<'a>,
    actions: &'p [DVector<f64>],
    prefix: Vec<DVector<f64>>,
    best: Option<(Vec<DVector<f64>>, f64)>,
}

impl Search<'_, '_> {
    fn descend(&mut self, state: DVector<f64>, step: usize, acc: f64) -> Result<()> {
        if step == self.problem.horizon {
            if self.best.as_ref().is_none_or(|(_, v)| acc > *v) {
                self.best = Some((self.prefix.clone(), acc));
            }
            return Ok(());
        }
        for a in self.actions {
            let r = self.problem.rewards.reward(step, &state, a)?;
            let next = self.problem.dynamics.mean_next(&state, a)?;
            self.prefix.push(a.clone());
            self.descend(next, step + 1, acc + r)?;
            self.prefix.pop();
        }
        Ok(())
    }
}

/// Random shooting: N uniform candidate sequences, best one returned.
pub fn plan_shooting(
    problem: &PlanningProblem<'_>,
    n_candidates: usize,
    n_eval_rollouts: usize,
    rng: &mut StreamRng,
) -> Result<PlanResult> {
    if n_candidates == 0 {
        return Err(Error::Config("n_candidates must be at least 1".into()));
    }
    let steps = problem.steps();
    let candidates: Vec<Vec<DVector<f64>>> = (0..n_candidates)
        .map(|_| (0..steps).map(|_| problem.actions.sample(rng)).collect())
        .collect();
    plan_over(problem, candidates, n_eval_rollouts, rng)
}

/// Evaluates the given candidates and returns the best (first on ties).
pub fn plan_over(
    problem: &PlanningProblem<'_>,
    candidates: Vec<Vec<DVector<f64>>>,
    n_eval_rollouts: usize,
    rng: &mut StreamRng,
) -> Result<PlanResult> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidate sequences".into()));
    }
    let seed: u64 = rng.random();
    let values = candidates
        .par_iter()
        .map(|seq| evaluate_sequence(problem, seq, n_eval_rollouts, &mut StreamRng::seed_from_u64(seed)))
        .collect::<Result<Vec<_>>>()?;
    let idx = argmax(values.iter().map(|v| v.0));
    let n = candidates.len();
    let (value, se) = values[idx];
    Ok(PlanResult {
        policy: OpenLoopPolicy {
            start_step: problem.start_step,
            actions: candidates.into_iter().nth(idx).expect("index in range"),
        },
        value_estimate: value,
        value_std_error: se,
        planner_kind: PlannerKind::Shooting,
        n_model_rollouts: if problem.dynamics.sigma == 0.0 { n } else { n * n_eval_rollouts },
    })
}

pub fn plan(problem: &PlanningProblem<'_>, config: &PlannerConfig, rng: &mut StreamRng) -> Result<PlanResult> {
    match config.kind {
        PlannerKind::Exhaustive => plan_exhaustive(problem, config.n_eval_rollouts, config.budget, rng),
        PlannerKind::Shooting => plan_shooting(problem, config.n_candidates, config.n_eval_rollouts, rng),
    }
}

/// Re-plans from the observed state at every step and executes the first
/// action of the new plan.
pub struct MpcPolicy<'a> {
    pub rewards: &'a dyn RewardFn,
    pub dynamics: Dynamics<'a>,
    pub actions: &'a ActionSpace,
    pub horizon: usize,
    pub config: PlannerConfig,
    pub rng: StreamRng,
}

impl Policy for MpcPolicy<'_> {
    fn act(&mut self, step: usize, state: &DVector<f64>) -> Result<DVector<f64>> {
        let problem = PlanningProblem {
            s1: state,
            start_step: step,
            horizon: self.horizon,
            rewards: self.rewards,
            dynamics: self.dynamics,
            actions: self.actions,
        };
        let result = plan(&problem, &self.config, &mut self.rng)?;
        Ok(result.policy.actions[0].clone())
    }
}

/// Rolls a planned open-loop policy out on a model and reports the true
/// and planned rewards along the way.
pub fn replay(
    problem: &PlanningProblem<'_>,
    policy: &OpenLoopPolicy,
    true_rewards: &dyn RewardFn,
    rng: &mut StreamRng,
) -> Result<crate::env::Trajectory> {
    rollout_on(
        &problem.dynamics,
        problem.actions,
        problem.s1,
        problem.start_step,
        problem.horizon,
        &mut policy.clone(),
        true_rewards,
        Some(problem.rewards),
        rng,
    )
}
