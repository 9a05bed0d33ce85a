use serde::{Deserialize, Serialize};

use crate::env::WorldSpec;
use crate::error::{Error, Result};
use crate::planning::{PlannerConfig, PlannerKind, DEFAULT_BUDGET};
use crate::randomization::{default_beta_delta, SchemeKind};
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    PlanexKnr,
    PlanexGeneral,
    Greedy,
    UcbBonus,
    UniformRandom,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::PlanexKnr => "planex-knr",
            AgentKind::PlanexGeneral => "planex-general",
            AgentKind::Greedy => "greedy",
            AgentKind::UcbBonus => "ucb-bonus",
            AgentKind::UniformRandom => "uniform-random",
        }
    }
}

/// Noise inside planning rollouts: certainty-equivalent (none) or the
/// model's own Gaussian noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanNoise {
    #[default]
    Ce,
    Stochastic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VStarConfig {
    #[serde(default = "default_v_star_rollouts")]
    pub n_rollouts: usize,
    /// Overrides the run's planner for the V* plan.
    #[serde(default)]
    pub planner: Option<PlannerKind>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub n_candidates: Option<usize>,
}

impl Default for VStarConfig {
    fn default() -> Self {
        Self {
            n_rollouts: default_v_star_rollouts(),
            planner: None,
            budget: None,
            n_candidates: None,
        }
    }
}

fn default_v_star_rollouts() -> usize {
    2000
}
fn one() -> f64 {
    1.0
}
fn default_sigma_min() -> f64 {
    1e-3
}
fn default_budget() -> usize {
    DEFAULT_BUDGET
}
fn default_candidates() -> usize {
    256
}
fn default_eval_rollouts() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldSpec,
    pub agent: AgentKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub lambda_reg: f64,
    /// Scheme for planex-general; planex-knr always uses knr-gaussian.
    #[serde(default)]
    pub scheme: Option<SchemeKind>,
    /// Multiplies β_k in the agent's reward noise (and ι for general schemes).
    #[serde(default = "one")]
    pub beta_scale: f64,
    #[serde(default = "default_sigma_min")]
    pub sigma_min: f64,
    /// Custom stream id for reward noise; defaults to the standard stream.
    #[serde(default)]
    pub noise_seed_stream: Option<u64>,
    /// β(δ) of the general schemes; defaults to √(2 log(2K)).
    #[serde(default)]
    pub beta_delta: Option<f64>,
    #[serde(default = "default_planner")]
    pub planner: PlannerKind,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_candidates")]
    pub n_candidates: usize,
    #[serde(default)]
    pub plan_noise: PlanNoise,
    #[serde(default = "default_eval_rollouts")]
    pub n_eval_rollouts: usize,
    /// Bound on ‖W*‖ used in β_k; defaults to the true spectral norm.
    #[serde(default)]
    pub w_norm_bound: Option<f64>,
    /// UCB bonus multiplier.
    #[serde(default = "one")]
    pub bonus: f64,
    #[serde(default)]
    pub v_star: VStarConfig,
    /// When positive, each π^k is re-evaluated with this many rollouts and
    /// regret uses that value instead of the realized return.
    #[serde(default)]
    pub eval_rollouts: usize,
    /// Re-plan at every step during execution.
    #[serde(default)]
    pub mpc: bool,
}

fn default_planner() -> PlannerKind {
    PlannerKind::Exhaustive
}

impl ExperimentConfig {
    pub fn new(world: WorldSpec, agent: AgentKind, k: usize, seed: u64) -> Self {
        Self {
            world,
            agent,
            k,
            seed,
            lambda_reg: 1.0,
            scheme: None,
            beta_scale: 1.0,
            sigma_min: default_sigma_min(),
            noise_seed_stream: None,
            beta_delta: None,
            planner: default_planner(),
            budget: DEFAULT_BUDGET,
            n_candidates: default_candidates(),
            plan_noise: PlanNoise::Ce,
            n_eval_rollouts: default_eval_rollouts(),
            w_norm_bound: None,
            bonus: 1.0,
            v_star: VStarConfig::default(),
            eval_rollouts: 0,
            mpc: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.k == 0 {
            return bad("K must be at least 1");
        }
        if !(self.lambda_reg > 0.0 && self.lambda_reg.is_finite()) {
            return bad("lambda_reg must be positive");
        }
        if !(self.beta_scale >= 0.0 && self.beta_scale.is_finite()) {
            return bad("beta_scale must be finite and non-negative");
        }
        if !(self.sigma_min > 0.0 && self.sigma_min.is_finite()) {
            return bad("sigma_min must be positive");
        }
        if !(self.bonus >= 0.0 && self.bonus.is_finite()) {
            return bad("bonus must be finite and non-negative");
        }
        if self.beta_delta.is_some_and(|b| !(b >= 0.0 && b.is_finite())) {
            return bad("beta_delta must be finite and non-negative");
        }
        if self.w_norm_bound.is_some_and(|b| !(b >= 0.0 && b.is_finite())) {
            return bad("w_norm_bound must be finite and non-negative");
        }
        if self.budget == 0 || self.n_candidates == 0 || self.n_eval_rollouts == 0 || self.v_star.n_rollouts == 0 {
            return bad("budget, n_candidates and rollout counts must be positive");
        }
        if self.agent == AgentKind::PlanexGeneral && self.scheme == Some(SchemeKind::KnrGaussian) {
            return bad("planex-general needs scheme general-gaussian or bernoulli");
        }
        Ok(())
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            kind: self.planner,
            budget: self.budget,
            n_candidates: self.n_candidates,
            n_eval_rollouts: self.n_eval_rollouts,
        }
    }

    pub fn v_star_planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            kind: self.v_star.planner.unwrap_or(self.planner),
            budget: self.v_star.budget.unwrap_or(self.budget),
            n_candidates: self.v_star.n_candidates.unwrap_or(self.n_candidates),
            n_eval_rollouts: self.n_eval_rollouts,
        }
    }

    pub fn reward_stream(&self) -> Stream {
        self.noise_seed_stream.map_or(Stream::RewardNoise, Stream::Custom)
    }

    pub fn general_scheme(&self) -> SchemeKind {
        self.scheme.unwrap_or(SchemeKind::GeneralGaussian)
    }

    /// β(δ) with δ = 1/K unless configured.
    pub fn beta_delta(&self) -> f64 {
        self.beta_delta.unwrap_or_else(|| default_beta_delta(1.0 / self.k as f64))
    }
}
