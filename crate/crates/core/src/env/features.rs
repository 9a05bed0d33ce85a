//! Known feature embeddings φ(s, a).
//!
//! Every map rescales itself at construction so that ‖φ(s, a)‖₂ ≤ 1/√H over
//! its declared domain. Evaluation re-checks the bound and reports a domain
//! error if it is ever exceeded.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORM_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureSpec {
    /// All monomials of the concatenated input x = (s, a) up to `degree`,
    /// constant included. Inputs are clamped to the box [low, high], so the
    /// map saturates outside its domain.
    Polynomial {
        degree: u32,
        low: Vec<f64>,
        high: Vec<f64>,
    },
    /// √2·cos(ωⱼᵀx + bⱼ) with one row of `frequencies` per feature.
    RandomFourier {
        frequencies: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
    /// One-hot over (cell, action) pairs. The cell is round(s[0]) clamped to
    /// [0, n_cells); the action must be one of `actions`.
    TabularOneHot {
        n_cells: usize,
        actions: Vec<Vec<f64>>,
    },
}

impl FeatureSpec {
    /// Random Fourier features with Gaussian frequencies of the given
    /// bandwidth and uniform phase offsets.
    pub fn random_fourier<R: Rng + ?Sized>(
        input_dim: usize,
        d_phi: usize,
        bandwidth: f64,
        rng: &mut R,
    ) -> Self {
        let frequencies = (0..d_phi)
            .map(|_| {
                (0..input_dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        z / bandwidth
                    })
                    .collect()
            })
            .collect();
        let offsets = (0..d_phi)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        FeatureSpec::RandomFourier {
            frequencies,
            offsets,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FeatureMap {
    spec: FeatureSpec,
    state_dim: usize,
    action_dim: usize,
    horizon: usize,
    d_phi: usize,
    scale: f64,
    exponents: Vec<Vec<u32>>,
}

fn monomial_exponents(n: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=remaining {
            prefix.push(e);
            rec(n, remaining - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, degree, &mut Vec::with_capacity(n), &mut out);
    // Graded order: constant first, then by total degree.
    out.sort_by_key(|e| (e.iter().sum::<u32>(), std::cmp::Reverse(e.clone())));
    out
}

impl FeatureMap {
    pub fn new(spec: FeatureSpec, state_dim: usize, action_dim: usize, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        let input_dim = state_dim + action_dim;
        let (d_phi, raw_max_sq, exponents) = match &spec {
            FeatureSpec::Polynomial { degree, low, high } => {
                if low.len() != input_dim || high.len() != input_dim {
                    return Err(Error::Config(format!(
                        "polynomial bounds must have length d_S + d_A = {input_dim}"
                    )));
                }
                if low.iter().zip(high).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
                    return Err(Error::Config("polynomial bounds must satisfy low <= high".into()));
                }
                let exps = monomial_exponents(input_dim, *degree);
                // Every monomial attains its maximal magnitude at the corner
                // where each |x_i| is largest, simultaneously.
                let corner: Vec<f64> = low.iter().zip(high).map(|(l, h)| l.abs().max(h.abs())).collect();
                let max_sq: f64 = exps
                    .iter()
                    .map(|e| {
                        e.iter()
                            .zip(&corner)
                            .map(|(&p, &c)| c.powi(p as i32))
                            .product::<f64>()
                            .powi(2)
                    })
                    .sum();
                (exps.len(), max_sq, exps)
            }
            FeatureSpec::RandomFourier {
                frequencies,
                offsets,
            } => {
                if frequencies.is_empty() || frequencies.len() != offsets.len() {
                    return Err(Error::Config("random-fourier needs one offset per frequency row".into()));
                }
                if frequencies.iter().any(|row| row.len() != input_dim) {
                    return Err(Error::Config(format!(
                        "random-fourier frequency rows must have length {input_dim}"
                    )));
                }
                (frequencies.len(), 2.0 * frequencies.len() as f64, Vec::new())
            }
            FeatureSpec::TabularOneHot { n_cells, actions } => {
                if *n_cells == 0 || actions.is_empty() {
                    return Err(Error::Config("tabular features need cells and actions".into()));
                }
                if actions.iter().any(|a| a.len() != action_dim) {
                    return Err(Error::Config("tabular action vectors have the wrong dimension".into()));
                }
                if state_dim == 0 {
                    return Err(Error::Config("tabular features need a state coordinate".into()));
                }
                (n_cells * actions.len(), 1.0, Vec::new())
            }
        };
        if !(raw_max_sq > 0.0 && raw_max_sq.is_finite()) {
            return Err(Error::Config("feature map has degenerate norm".into()));
        }
        let scale = 1.0 / ((horizon as f64).sqrt() * raw_max_sq.sqrt());
        Ok(Self {
            spec,
            state_dim,
            action_dim,
            horizon,
            d_phi,
            scale,
            exponents,
        })
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.d_phi
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// The rescaling factor applied to the raw features.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn norm_bound(&self) -> f64 {
        1.0 / (self.horizon as f64).sqrt()
    }

    pub fn evaluate(&self, state: &DVector<f64>, action: &DVector<f64>) -> Result<DVector<f64>> {
        if state.len() != self.state_dim || action.len() != self.action_dim {
            return Err(Error::Config(format!(
                "feature input has dims ({}, {}), expected ({}, {})",
                state.len(),
                action.len(),
                self.state_dim,
                self.action_dim
            )));
        }
        if state.iter().chain(action.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite feature input".into()));
        }
        let input = |i: usize| {
            if i < self.state_dim {
                state[i]
            } else {
                action[i - self.state_dim]
            }
        };
        let phi = match &self.spec {
            FeatureSpec::Polynomial { low, high, .. } => {
                let x: Vec<f64> = (0..low.len()).map(|i| input(i).clamp(low[i], high[i])).collect();
                DVector::from_iterator(
                    self.d_phi,
                    self.exponents.iter().map(|e| {
                        self.scale * e.iter().zip(&x).map(|(&p, &v)| v.powi(p as i32)).product::<f64>()
                    }),
                )
            }
            FeatureSpec::RandomFourier {
                frequencies,
                offsets,
            } => DVector::from_iterator(
                self.d_phi,
                frequencies.iter().zip(offsets).map(|(w, b)| {
                    let arg: f64 = w.iter().enumerate().map(|(i, wi)| wi * input(i)).sum::<f64>() + b;
                    self.scale * std::f64::consts::SQRT_2 * arg.cos()
                }),
            ),
            FeatureSpec::TabularOneHot { n_cells, actions } => {
                let cell = cell_index(state, *n_cells);
                let a = actions
                    .iter()
                    .position(|v| v.iter().zip(action.iter()).all(|(x, y)| (x - y).abs() <= 1e-9))
                    .ok_or_else(|| Error::Domain(format!("action {:?} is not tabulated", action.as_slice())))?;
                let mut phi = DVector::zeros(self.d_phi);
                phi[cell * actions.len() + a] = self.scale;
                phi
            }
        };
        let bound = self.norm_bound();
        if phi.norm() > bound * (1.0 + NORM_SLACK) + NORM_SLACK {
            return Err(Error::Domain(format!(
                "feature norm {} exceeds 1/sqrt(H) = {}",
                phi.norm(),
                bound
            )));
        }
        Ok(phi)
    }
}

/// round(s[0]) clamped to the corridor.
pub fn cell_index(state: &DVector<f64>, n_cells: usize) -> usize {
    let c = state[0].round();
    if c <= 0.0 {
        0
    } else {
        (c as usize).min(n_cells - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use rand::Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn polynomial_counts_monomials() {
        let spec = FeatureSpec::Polynomial {
            degree: 2,
            low: vec![-1.0; 3],
            high: vec![1.0; 3],
        };
        let map = FeatureMap::new(spec, 2, 1, 4).unwrap();
        // C(3 + 2, 2) = 10
        assert_eq!(map.dim(), 10);
        let phi = map.evaluate(&v(&[0.0, 0.0]), &v(&[0.0])).unwrap();
        assert_eq!(phi[0], map.scale());
        assert!(phi.iter().skip(1).all(|&x| x == 0.0));
    }

    #[test]
    fn corner_attains_the_bound() {
        let spec = FeatureSpec::Polynomial {
            degree: 1,
            low: vec![-2.0, -1.0],
            high: vec![2.0, 1.0],
        };
        let map = FeatureMap::new(spec, 1, 1, 9).unwrap();
        let phi = map.evaluate(&v(&[-5.0]), &v(&[1.0])).unwrap();
        approx::assert_relative_eq!(phi.norm(), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn norm_bound_on_random_points() {
        let mut rng = stream(3, Stream::Custom(0));
        let maps = vec![
            FeatureMap::new(
                FeatureSpec::Polynomial {
                    degree: 2,
                    low: vec![-1.0, -3.0, -0.5],
                    high: vec![2.0, 1.0, 0.5],
                },
                2,
                1,
                10,
            )
            .unwrap(),
            FeatureMap::new(FeatureSpec::random_fourier(3, 7, 0.8, &mut rng), 2, 1, 10).unwrap(),
        ];
        for map in &maps {
            let mut max_norm: f64 = 0.0;
            for _ in 0..10_000 {
                let s = v(&[rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]);
                let a = v(&[rng.random_range(-1.0..1.0)]);
                max_norm = max_norm.max(map.evaluate(&s, &a).unwrap().norm());
            }
            assert!(max_norm <= 1.0 / 10f64.sqrt() + 1e-12);
        }
    }

    #[test]
    fn tabular_one_hot_index() {
        let spec = FeatureSpec::TabularOneHot {
            n_cells: 3,
            actions: vec![vec![-1.0], vec![1.0]],
        };
        let map = FeatureMap::new(spec, 1, 1, 4).unwrap();
        let phi = map.evaluate(&v(&[1.2]), &v(&[1.0])).unwrap();
        assert_eq!(phi[3], 0.5);
        assert_eq!(phi.iter().filter(|&&x| x != 0.0).count(), 1);
        assert!(matches!(map.evaluate(&v(&[1.0]), &v(&[0.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let spec = FeatureSpec::Polynomial {
            degree: 1,
            low: vec![-1.0; 2],
            high: vec![1.0; 2],
        };
        let map = FeatureMap::new(spec, 1, 1, 1).unwrap();
        assert!(matches!(map.evaluate(&v(&[0.0, 1.0]), &v(&[0.0])), Err(Error::Config(_))));
        assert!(matches!(map.evaluate(&v(&[f64::NAN]), &v(&[0.0])), Err(Error::Domain(_))));
    }

    proptest::proptest! {
        #[test]
        fn features_respect_the_norm_bound(
            s in proptest::collection::vec(-50.0f64..50.0, 2),
            a in -3.0f64..3.0,
            horizon in 1usize..20,
            degree in 1u32..4,
            seed in 0u64..1000,
        ) {
            let mut rng = stream(seed, Stream::Custom(0));
            let maps = [
                FeatureMap::new(
                    FeatureSpec::Polynomial {
                        degree,
                        low: vec![-2.0, -1.0, -1.0],
                        high: vec![1.0, 3.0, 1.0],
                    },
                    2,
                    1,
                    horizon,
                )
                .unwrap(),
                FeatureMap::new(FeatureSpec::random_fourier(3, 6, 1.3, &mut rng), 2, 1, horizon).unwrap(),
            ];
            for map in &maps {
                let phi = map.evaluate(&v(&s), &v(&[a])).unwrap();
                proptest::prop_assert!(phi.norm() <= 1.0 / (horizon as f64).sqrt() * (1.0 + 1e-12));
            }
        }
    }
}
