//! The PlanEx loops (KNR and calibrated-model variants) and baseline agents.

mod config;
mod record;

pub use config::{AgentKind, ExperimentConfig, PlanNoise, VStarConfig};
pub use record::{read_csv, read_rows, write_csv, write_rows, IterationRow, RunRecord, TraceEntry};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};

use crate::env::{Dynamics, KnrWorld, RewardFn, Trajectory};
use crate::error::{Error, Result};
use crate::estimation::{confidence_radius, mahalanobis_error, RidgeEstimate};
use crate::planning::{
    evaluate_sequence, plan, MpcPolicy, OpenLoopPolicy, PlanResult, PlannerConfig, PlanningProblem,
};
use crate::randomization::{
    draw_knr_noise, sigma_k_squared, BonusRewards, CalibratedRewards, KnrPerturbedRewards, SchemeKind, SchemeParams,
};
use crate::rng::{stream, Stream, StreamRng};

/// Plans on the true model with true rewards, then evaluates that policy on
/// the true world. Returns (mean, standard error).
pub fn estimate_v_star(config: &ExperimentConfig) -> Result<(f64, f64)> {
    let world = KnrWorld::from_spec(&config.world)?;
    estimate_v_star_on(&world, config)
}

pub fn estimate_v_star_on(world: &KnrWorld, config: &ExperimentConfig) -> Result<(f64, f64)> {
    let plan_sigma = match config.plan_noise {
        PlanNoise::Ce => 0.0,
        PlanNoise::Stochastic => world.sigma(),
    };
    let problem = PlanningProblem {
        s1: world.s1(),
        start_step: 0,
        horizon: world.horizon(),
        rewards: world.rewards(),
        dynamics: world.model(world.w_star(), plan_sigma),
        actions: world.actions(),
    };
    let mut rng = stream(config.seed, Stream::VStar);
    let result = plan(&problem, &config.v_star_planner_config(), &mut rng)?;
    let mut policy = result.policy;
    let n = if world.sigma() == 0.0 { 1 } else { config.v_star.n_rollouts };
    let (mean, se) = world.monte_carlo_value(&mut policy, world.rewards(), n, &mut rng)?;
    Ok((mean, if n == 1 { 0.0 } else { se }))
}

/// Runs the configured agent, estimating V* first.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let world = KnrWorld::from_spec(&config.world)?;
    let (v_star, v_star_se) = estimate_v_star_on(&world, config)?;
    run_with_v_star(config, &world, v_star, v_star_se)
}

fn run_checked(config: &ExperimentConfig, allowed: &[AgentKind]) -> Result<RunRecord> {
    if !allowed.contains(&config.agent) {
        return Err(Error::Config(format!("agent {} not handled here", config.agent.name())));
    }
    run(config)
}

/// Algorithm 1: KNR-specific PlanEx.
pub fn run_planex_knr(config: &ExperimentConfig) -> Result<RunRecord> {
    run_checked(config, &[AgentKind::PlanexKnr])
}

/// The calibrated-model loop with a general-gaussian or bernoulli scheme.
pub fn run_planex_general(config: &ExperimentConfig) -> Result<RunRecord> {
    run_checked(config, &[AgentKind::PlanexGeneral])
}

pub fn run_baseline(config: &ExperimentConfig) -> Result<RunRecord> {
    run_checked(config, &[AgentKind::Greedy, AgentKind::UcbBonus, AgentKind::UniformRandom])
}

/// Runs with a precomputed V*, so several agents can share one estimate.
pub fn run_with_v_star(config: &ExperimentConfig, world: &KnrWorld, v_star: f64, v_star_se: f64) -> Result<RunRecord> {
    config.validate()?;
    let mut agent = Agent::new(config, world)?;
    let mut record = RunRecord {
        agent: config.agent,
        seed: config.seed,
        k_max: config.k,
        v_star,
        v_star_se,
        rows: Vec::with_capacity(config.k),
        trajectories: Vec::with_capacity(config.k),
        final_estimate: None,
    };
    let mut cum_regret = 0.0;
    for k in 1..=config.k {
        match agent.episode(k) {
            Ok((mut row, traj)) => {
                let realized = row.policy_value.unwrap_or(row.episode_return);
                cum_regret += v_star - realized;
                row.cum_regret = cum_regret;
                let tol = 2.0 * (v_star_se.powi(2) + row.value_se.unwrap_or(0.0).powi(2)).sqrt();
                row.opt_flag = row.value_est >= v_star - tol;
                record.rows.push(row);
                record.trajectories.push(traj);
            }
            Err(e) => {
                log::error!("{} seed {} aborted at k={k}: {e}", config.agent.name(), config.seed);
                record.final_estimate = Some(agent.est.to_checkpoint(k));
                return Err(Error::Aborted {
                    partial: Box::new(record),
                    source: Box::new(e),
                });
            }
        }
    }
    record.final_estimate = Some(agent.est.to_checkpoint(config.k + 1));
    Ok(record)
}

fn problem_on<'a>(world: &'a KnrWorld, rewards: &'a dyn RewardFn, model: Dynamics<'a>) -> PlanningProblem<'a> {
    PlanningProblem {
        s1: world.s1(),
        start_step: 0,
        horizon: world.horizon(),
        rewards,
        dynamics: model,
        actions: world.actions(),
    }
}

struct Agent<'w> {
    config: &'w ExperimentConfig,
    world: &'w KnrWorld,
    est: RidgeEstimate,
    env_rng: StreamRng,
    reward_rng: StreamRng,
    plan_rng: StreamRng,
    eval_rng: StreamRng,
    planner: PlannerConfig,
    plan_sigma: f64,
    sigma_eff: f64,
    w_bound: f64,
    scheme: SchemeParams,
}

/// What the agent-specific part of an episode produces.
struct Outcome {
    traj: Trajectory,
    policy: Option<OpenLoopPolicy>,
    value_est: f64,
    value_se: f64,
    sigma_k_sq: Option<f64>,
    xi_norm_max: Option<f64>,
    iota_sq_sum: Option<f64>,
}

impl<'w> Agent<'w> {
    fn new(config: &'w ExperimentConfig, world: &'w KnrWorld) -> Result<Self> {
        let seed = config.seed;
        let h = world.horizon();
        let kind = match config.agent {
            AgentKind::PlanexGeneral => config.general_scheme(),
            _ => SchemeKind::KnrGaussian,
        };
        let delta = 1.0 / config.k as f64;
        Ok(Self {
            config,
            world,
            est: RidgeEstimate::new(world.state_dim(), world.features().dim(), config.lambda_reg)?,
            env_rng: stream(seed, Stream::EnvNoise),
            reward_rng: stream(seed, config.reward_stream()),
            plan_rng: stream(seed, Stream::Planner),
            eval_rng: stream(seed, Stream::Evaluation),
            planner: config.planner_config(),
            plan_sigma: match config.plan_noise {
                PlanNoise::Ce => 0.0,
                PlanNoise::Stochastic => world.sigma(),
            },
            sigma_eff: if world.sigma() > 0.0 { world.sigma() } else { config.sigma_min },
            w_bound: config.w_norm_bound.unwrap_or_else(|| world.w_star_norm()),
            scheme: SchemeParams::new(kind, config.beta_delta(), h, delta.min(0.5))?,
        })
    }

    fn episode(&mut self, k: usize) -> Result<(IterationRow, Trajectory)> {
        let world = self.world;
        let h = world.horizon();
        let beta_k = confidence_radius(&self.est, k, self.w_bound, world.sigma())?.beta_k;
        let logdet = self.est.logdet();
        let maha = mahalanobis_error(&self.est, world.w_star())?;
        let w_hat = self.est.w_hat().clone();
        let model = world.model(&w_hat, self.plan_sigma);

        let out = match self.config.agent {
            AgentKind::PlanexKnr => {
                let sk2 = sigma_k_squared(self.config.beta_scale * beta_k, h, self.sigma_eff)?;
                let draw = draw_knr_noise(self.est.cholesky(), sk2, h, k, &mut self.reward_rng)?;
                let rewards = KnrPerturbedRewards {
                    base: world.rewards(),
                    features: world.features(),
                    draw: &draw,
                };
                let mut out = self.plan_and_execute(&rewards, model)?;
                out.sigma_k_sq = Some(sk2);
                out.xi_norm_max = Some(draw.max_precision_norm_sq());
                out
            }
            AgentKind::PlanexGeneral => {
                let round_seed: u64 = self.reward_rng.random();
                let est = self.est.clone();
                let rewards = CalibratedRewards {
                    base: world.rewards(),
                    features: world.features(),
                    est: &est,
                    params: self.scheme,
                    beta_scale: self.config.beta_scale,
                    horizon: h,
                    round_seed,
                };
                let mut out = self.plan_and_execute(&rewards, model)?;
                let mut iota_sq = 0.0;
                for s in &out.traj.steps {
                    iota_sq += rewards.iota(&s.state, &s.action)?.powi(2);
                }
                out.iota_sq_sum = Some(iota_sq);
                out
            }
            AgentKind::Greedy => self.plan_and_execute(world.rewards(), model)?,
            AgentKind::UcbBonus => {
                let est = self.est.clone();
                let rewards = BonusRewards {
                    base: world.rewards(),
                    features: world.features(),
                    est: &est,
                    bonus: self.config.bonus,
                };
                self.plan_and_execute(&rewards, model)?
            }
            AgentKind::UniformRandom => {
                let seq: Vec<DVector<f64>> = (0..h).map(|_| world.actions().sample(&mut self.plan_rng)).collect();
                let problem = problem_on(world, world.rewards(), model);
                let (value_est, value_se) =
                    evaluate_sequence(&problem, &seq, self.planner.n_eval_rollouts, &mut self.plan_rng)?;
                let mut policy = OpenLoopPolicy {
                    start_step: 0,
                    actions: seq,
                };
                let traj = world.rollout(&mut policy, None, &mut self.env_rng)?;
                Outcome {
                    traj,
                    policy: Some(policy),
                    value_est,
                    value_se,
                    sigma_k_sq: None,
                    xi_norm_max: None,
                    iota_sq_sum: None,
                }
            }
        };

        let mut pot_sum = 0.0;
        for s in &out.traj.steps {
            pot_sum += self.est.phi_uncertainty(world.features(), &s.state, &s.action)?.powi(2);
        }
        self.est.update(world.features(), &out.traj.transitions())?;

        let policy_value = match (&out.policy, self.config.eval_rollouts) {
            (Some(p), n) if n > 0 => {
                let mut p = p.clone();
                Some(world.monte_carlo_value(&mut p, world.rewards(), n, &mut self.eval_rng)?.0)
            }
            _ => None,
        };
        // δ = 1/K gives log(KH/δ) = log(K²H).
        let kf = self.config.k as f64;
        let beta_xi = out.sigma_k_sq.map(|s| 2.0 * s * (kf * kf * h as f64).ln());
        let row = IterationRow {
            k,
            episode_return: out.traj.return_true(),
            value_est: out.value_est,
            beta_k,
            logdet,
            opt_flag: false,
            wgood_flag: maha <= beta_k,
            pot_sum,
            cum_regret: 0.0,
            value_se: Some(out.value_se),
            maha_err: Some(maha),
            logdet_next: Some(self.est.logdet()),
            sigma_k_sq: out.sigma_k_sq,
            xi_norm_max: out.xi_norm_max,
            beta_xi,
            xigood_flag: out.xi_norm_max.zip(beta_xi).map(|(x, b)| x <= b),
            iota_sq_sum: out.iota_sq_sum,
            policy_value,
        };
        Ok((row, out.traj))
    }

    /// Plans on (rewards, model) and executes on the real world.
    fn plan_and_execute(&mut self, rewards: &dyn RewardFn, model: Dynamics<'_>) -> Result<Outcome> {
        let world = self.world;
        let problem = problem_on(world, rewards, model);
        let PlanResult {
            policy,
            value_estimate,
            value_std_error,
            ..
        } = plan(&problem, &self.planner, &mut self.plan_rng)?;
        let (traj, policy) = if self.config.mpc {
            let mut mpc = MpcPolicy {
                rewards,
                dynamics: model,
                actions: world.actions(),
                horizon: world.horizon(),
                config: self.planner,
                rng: StreamRng::seed_from_u64(self.plan_rng.random()),
            };
            (world.rollout(&mut mpc, Some(rewards), &mut self.env_rng)?, None)
        } else {
            let mut policy = policy;
            (world.rollout(&mut policy, Some(rewards), &mut self.env_rng)?, Some(policy))
        };
        Ok(Outcome {
            traj,
            policy,
            value_est: value_estimate,
            value_se: value_std_error,
            sigma_k_sq: None,
            xi_norm_max: None,
            iota_sq_sum: None,
        })
    }
}
