//! Built-in benchmark worlds.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::features::{FeatureMap, FeatureSpec};
use super::reward::RewardSpec;
use super::world::{ActionSpace, KnrWorld, WorldSpec};
use crate::error::Result;
use crate::rng::{stream, Stream};

/// Planar point mass: s' = clamp(s) + dt·a + ε with linear features of
/// (s, a) plus a constant, and a dense reward for being near `goal`.
#[derive(Clone, Debug)]
pub struct IntegratorParams {
    pub horizon: usize,
    pub sigma: f64,
    pub dt: f64,
    /// Half-width of the state box the features saturate at.
    pub state_bound: f64,
    pub goal: [f64; 2],
    pub radius: f64,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        Self {
            horizon: 10,
            sigma: 0.05,
            dt: 0.25,
            state_bound: 2.0,
            goal: [1.0, 0.5],
            radius: 1.0,
        }
    }
}

pub fn integrator(p: &IntegratorParams) -> Result<KnrWorld> {
    let u = 1.0;
    let actions = vec![
        vec![0.0, 0.0],
        vec![u, 0.0],
        vec![-u, 0.0],
        vec![0.0, u],
        vec![0.0, -u],
    ];
    let b = p.state_bound;
    let features = FeatureSpec::Polynomial {
        degree: 1,
        low: vec![-b, -b, -u, -u],
        high: vec![b, b, u, u],
    };
    let map = FeatureMap::new(features.clone(), 2, 2, p.horizon)?;
    let c = map.scale();
    // Graded monomial order for degree 1: [1, x1, x2, a1, a2].
    let w_star = vec![
        0.0, 1.0 / c, 0.0, p.dt / c, 0.0, //
        0.0, 0.0, 1.0 / c, 0.0, p.dt / c,
    ];
    debug_assert_eq!(map.dim(), 5);
    KnrWorld::from_spec(&WorldSpec {
        state_dim: 2,
        action_dim: 2,
        horizon: p.horizon,
        features,
        w_star,
        sigma: p.sigma,
        rewards: vec![RewardSpec::QuadraticDistance {
            goal: p.goal.to_vec(),
            radius: p.radius,
        }],
        actions: ActionSpace::Finite { actions },
        s1: vec![0.0, 0.0],
    })
}

/// One-dimensional corridor of `n_cells` cells with moves left/right and a
/// sparse reward for ending at the far cell. A small distractor reward for
/// sitting in the start cell makes staying home locally attractive.
#[derive(Clone, Debug)]
pub struct CorridorParams {
    pub n_cells: usize,
    pub horizon: usize,
    pub sigma: f64,
    pub goal_reward: f64,
    pub distractor_reward: f64,
}

impl Default for CorridorParams {
    fn default() -> Self {
        Self {
            n_cells: 5,
            horizon: 6,
            sigma: 0.05,
            goal_reward: 1.0,
            distractor_reward: 0.05,
        }
    }
}

pub fn corridor(p: &CorridorParams) -> Result<KnrWorld> {
    let n = p.n_cells;
    let moves = [-1.0, 1.0];
    let actions: Vec<Vec<f64>> = moves.iter().map(|m| vec![*m]).collect();
    let features = FeatureSpec::TabularOneHot {
        n_cells: n,
        actions: actions.clone(),
    };
    let map = FeatureMap::new(features.clone(), 1, 1, p.horizon)?;
    let c = map.scale();
    let mut w_star = Vec::with_capacity(n * moves.len());
    for cell in 0..n {
        for m in moves {
            let next = (cell as f64 + m).clamp(0.0, (n - 1) as f64);
            w_star.push(next / c);
        }
    }
    let home = RewardSpec::Cell {
        cell: 0,
        n_cells: n,
        value: p.distractor_reward,
    };
    let mut rewards = vec![home.clone(); p.horizon];
    rewards[p.horizon - 1] = RewardSpec::Sum {
        terms: vec![
            home,
            RewardSpec::Cell {
                cell: n - 1,
                n_cells: n,
                value: p.goal_reward,
            },
        ],
    };
    KnrWorld::from_spec(&WorldSpec {
        state_dim: 1,
        action_dim: 1,
        horizon: p.horizon,
        features,
        w_star,
        sigma: p.sigma,
        rewards,
        actions: ActionSpace::Finite { actions },
        s1: vec![0.0],
    })
}

/// Random W* over random Fourier features of (s, a).
#[derive(Clone, Debug)]
pub struct RandomFourierParams {
    pub state_dim: usize,
    pub d_phi: usize,
    pub horizon: usize,
    pub sigma: f64,
    pub n_actions: usize,
    pub bandwidth: f64,
    pub seed: u64,
}

impl Default for RandomFourierParams {
    fn default() -> Self {
        Self {
            state_dim: 2,
            d_phi: 8,
            horizon: 5,
            sigma: 0.05,
            n_actions: 4,
            bandwidth: 1.0,
            seed: 0,
        }
    }
}

pub fn random_fourier(p: &RandomFourierParams) -> Result<KnrWorld> {
    let mut rng = stream(p.seed, Stream::Custom(7));
    let action_dim = 1;
    let features = FeatureSpec::random_fourier(p.state_dim + action_dim, p.d_phi, p.bandwidth, &mut rng);
    let map = FeatureMap::new(features.clone(), p.state_dim, action_dim, p.horizon)?;
    // Entries scaled so that W*φ has O(1) magnitude.
    let entry_scale = 1.0 / (map.scale() * (p.d_phi as f64).sqrt());
    let w_star = (0..p.state_dim * p.d_phi)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * entry_scale
        })
        .collect();
    let actions = (0..p.n_actions)
        .map(|i| vec![-1.0 + 2.0 * i as f64 / (p.n_actions.max(2) - 1) as f64])
        .collect();
    let goal = (0..p.state_dim).map(|_| rng.random_range(-0.5..0.5)).collect();
    KnrWorld::from_spec(&WorldSpec {
        state_dim: p.state_dim,
        action_dim,
        horizon: p.horizon,
        features,
        w_star,
        sigma: p.sigma,
        rewards: vec![RewardSpec::QuadraticDistance { goal, radius: 1.5 }],
        actions: ActionSpace::Finite { actions },
        s1: vec![0.0; p.state_dim],
    })
}
