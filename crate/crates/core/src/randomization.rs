//! Randomized reward generators.
//!
//! * KNR Gaussian: r + φᵀξ_h clipped at zero, ξ_h ~ N(0, σ_k² Λ⁻¹), one
//!   draw per step and round.
//! * General Gaussian / Bernoulli: perturbations scaled by a calibrated
//!   uncertainty ι_k(s, a) ≤ 1, realized lazily and keyed on the quantized
//!   (h, s, a) so the reward is a fixed function within a round.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::{FeatureMap, RewardFn};
use crate::error::{Error, Result};
use crate::estimation::RidgeEstimate;
use crate::linalg::{cholesky, solve_upper_transposed};
use crate::rng::keyed;
use crate::stats::phi_minus_one;

/// Certified optimism probability of the Bernoulli scheme.
pub const BERNOULLI_P0: f64 = 3.0 / 16.0;
pub const IOTA_FLOOR: f64 = 1e-12;
/// Cell size used to key lazily drawn rewards on continuous inputs.
pub const QUANTUM: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    KnrGaussian,
    GeneralGaussian,
    Bernoulli,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub kind: SchemeKind,
    pub beta_delta: f64,
    /// Concentration constant C_r(δ′): |r_ξ − r| ≤ C_r ι with probability 1 − δ′.
    pub c_r_delta: f64,
    pub p0: f64,
}

impl SchemeParams {
    /// `delta_prime` sets the failure level of the concentration constant.
    pub fn new(kind: SchemeKind, beta_delta: f64, horizon: usize, delta_prime: f64) -> Result<Self> {
        if !(beta_delta >= 0.0 && beta_delta.is_finite()) {
            return Err(Error::Config("beta_delta must be finite and non-negative".into()));
        }
        if !(delta_prime > 0.0 && delta_prime < 1.0) {
            return Err(Error::Config("delta' must lie in (0, 1)".into()));
        }
        let h = horizon as f64;
        let (c_r_delta, p0) = match kind {
            SchemeKind::Bernoulli => (2.0 * h.sqrt() * beta_delta, BERNOULLI_P0),
            SchemeKind::GeneralGaussian => ((h * beta_delta * 2.0 * (2.0 / delta_prime).ln()).sqrt(), phi_minus_one()),
            SchemeKind::KnrGaussian => (f64::NAN, phi_minus_one()),
        };
        Ok(Self {
            kind,
            beta_delta,
            c_r_delta,
            p0,
        })
    }
}

/// β(δ) = √(2 log(2/δ)).
pub fn default_beta_delta(delta: f64) -> f64 {
    (2.0 * (2.0 / delta).ln()).sqrt()
}

/// σ_k² = H³ β_k / σ².
pub fn sigma_k_squared(beta_k: f64, horizon: usize, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(beta_k >= 0.0 && beta_k.is_finite()) || horizon == 0 {
        return Err(Error::Domain("beta_k must be finite and non-negative, H positive".into()));
    }
    Ok((horizon as f64).powi(3) * beta_k / (sigma * sigma))
}

/// One round of KNR reward noise, ξ_h for every step h.
#[derive(Clone, Debug, PartialEq)]
pub struct KnrNoiseDraw {
    pub xi: Vec<DVector<f64>>,
    pub sigma_k_sq: f64,
    pub round: usize,
    /// ‖ξ_h‖²_Λ for each step.
    pub precision_norms_sq: Vec<f64>,
}

impl KnrNoiseDraw {
    pub fn max_precision_norm_sq(&self) -> f64 {
        self.precision_norms_sq.iter().copied().fold(0.0, f64::max)
    }
}

/// ξ_h = σ_k L⁻ᵀ z_h with Λ = LLᵀ, so Cov(ξ_h) = σ_k² Λ⁻¹.
pub fn draw_knr_noise<R: Rng + ?Sized>(
    chol: &Cholesky<f64, Dyn>,
    sigma_k_sq: f64,
    horizon: usize,
    round: usize,
    rng: &mut R,
) -> Result<KnrNoiseDraw> {
    if !(sigma_k_sq >= 0.0 && sigma_k_sq.is_finite()) {
        return Err(Error::Domain(format!("sigma_k^2 must be finite and non-negative, got {sigma_k_sq}")));
    }
    let d = chol.l_dirty().nrows();
    let sigma_k = sigma_k_sq.sqrt();
    let mut xi = Vec::with_capacity(horizon);
    let mut norms = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        norms.push(sigma_k_sq * z.norm_squared());
        xi.push(solve_upper_transposed(chol, &z) * sigma_k);
    }
    Ok(KnrNoiseDraw {
        xi,
        sigma_k_sq,
        round,
        precision_norms_sq: norms,
    })
}

pub fn draw_knr_noise_from_precision<R: Rng + ?Sized>(
    precision: &DMatrix<f64>,
    sigma_k_sq: f64,
    horizon: usize,
    round: usize,
    rng: &mut R,
) -> Result<KnrNoiseDraw> {
    draw_knr_noise(&cholesky(precision)?, sigma_k_sq, horizon, round, rng)
}

/// {r + φᵀξ}⁺
pub fn perturb_knr(r_value: f64, phi: &DVector<f64>, xi_h: &DVector<f64>) -> f64 {
    (r_value + phi.dot(xi_h)).max(0.0)
}

/// The perturbed reward functions of one KNR round.
pub struct KnrPerturbedRewards<'a> {
    pub base: &'a dyn RewardFn,
    pub features: &'a FeatureMap,
    pub draw: &'a KnrNoiseDraw,
}

impl RewardFn for KnrPerturbedRewards<'_> {
    fn reward(&self, step: usize, state: &DVector<f64>, action: &DVector<f64>) -> Result<f64> {
        let r = self.base.reward(step, state, action)?;
        let xi = self
            .draw
            .xi
            .get(step)
            .ok_or_else(|| Error::Domain(format!("no noise drawn for step {}", step + 1)))?;
        Ok(perturb_knr(r, &self.features.evaluate(state, action)?, xi))
    }
}

/// A draw from N(r, H β(δ) ι²).
pub fn general_gaussian_reward<R: Rng + ?Sized>(
    r_value: f64,
    iota: f64,
    horizon: usize,
    beta_delta: f64,
    rng: &mut R,
) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    gaussian_from_normal(r_value, iota, horizon, beta_delta, z)
}

fn gaussian_from_normal(r_value: f64, iota: f64, horizon: usize, beta_delta: f64, z: f64) -> f64 {
    r_value + (horizon as f64 * beta_delta).sqrt() * iota * z
}

/// r ± 2√H β(δ) ι with a fair sign.
pub fn bernoulli_reward<R: Rng + ?Sized>(
    r_value: f64,
    iota: f64,
    horizon: usize,
    beta_delta: f64,
    rng: &mut R,
) -> f64 {
    bernoulli_from_sign(r_value, iota, horizon, beta_delta, rng.random_bool(0.5))
}

fn bernoulli_from_sign(r_value: f64, iota: f64, horizon: usize, beta_delta: f64, positive: bool) -> f64 {
    let magnitude = 2.0 * (horizon as f64).sqrt() * beta_delta * iota;
    if positive {
        r_value + magnitude
    } else {
        r_value - magnitude
    }
}

/// min(1, scale·‖φ‖_{Λ⁻¹}), floored at 1e-12.
pub fn knr_iota(est: &RidgeEstimate, phi: &DVector<f64>, beta_scale: f64) -> Result<f64> {
    Ok((beta_scale * est.uncertainty(phi)?).clamp(IOTA_FLOOR, 1.0))
}

fn quantize(x: f64) -> u64 {
    (x / QUANTUM).round() as i64 as u64
}

/// Randomized rewards for the calibrated-model loop, with the KNR ridge
/// estimate supplying ι_k.
pub struct CalibratedRewards<'a> {
    pub base: &'a dyn RewardFn,
    pub features: &'a FeatureMap,
    pub est: &'a RidgeEstimate,
    pub params: SchemeParams,
    pub beta_scale: f64,
    pub horizon: usize,
    pub round_seed: u64,
}

impl CalibratedRewards<'_> {
    pub fn iota(&self, state: &DVector<f64>, action: &DVector<f64>) -> Result<f64> {
        knr_iota(self.est, &self.features.evaluate(state, action)?, self.beta_scale)
    }

    fn key(step: usize, state: &DVector<f64>, action: &DVector<f64>) -> Vec<u64> {
        let mut key = Vec::with_capacity(1 + state.len() + action.len());
        key.push(step as u64);
        key.extend(state.iter().chain(action.iter()).map(|&x| quantize(x)));
        key
    }
}

impl RewardFn for CalibratedRewards<'_> {
    fn reward(&self, step: usize, state: &DVector<f64>, action: &DVector<f64>) -> Result<f64> {
        let r = self.base.reward(step, state, action)?;
        let iota = self.iota(state, action)?;
        let beta = self.params.beta_delta;
        Ok(match self.params.kind {
            SchemeKind::GeneralGaussian => {
                let z: f64 = StandardNormal.sample(&mut keyed(self.round_seed, &Self::key(step, state, action)));
                gaussian_from_normal(r, iota, self.horizon, beta, z)
            }
            SchemeKind::Bernoulli => {
                // One sign per (round, step), shared by all states.
                let positive = keyed(self.round_seed, &[step as u64]).random_bool(0.5);
                bernoulli_from_sign(r, iota, self.horizon, beta, positive)
            }
            SchemeKind::KnrGaussian => {
                return Err(Error::Config("knr-gaussian rewards are built from a KnrNoiseDraw".into()))
            }
        })
    }
}

/// Additive exploration bonus r + b‖φ‖_{Λ⁻¹}.
pub struct BonusRewards<'a> {
    pub base: &'a dyn RewardFn,
    pub features: &'a FeatureMap,
    pub est: &'a RidgeEstimate,
    pub bonus: f64,
}

impl RewardFn for BonusRewards<'_> {
    fn reward(&self, step: usize, state: &DVector<f64>, action: &DVector<f64>) -> Result<f64> {
        let r = self.base.reward(step, state, action)?;
        let u = self.est.uncertainty(&self.features.evaluate(state, action)?)?;
        Ok(r + self.bonus * u)
    }
}

/// Exact count of sign vectors ε ∈ {±1}ⁿ with Σ wᵢεᵢ ≥ threshold.
pub fn rademacher_upper_count(weights: &[f64], threshold: f64) -> u64 {
    let n = weights.len();
    assert!(n < 63, "enumeration limited to fewer than 63 weights");
    let total: f64 = weights.iter().sum();
    let slack = 1e-12 * total.abs().max(1.0);
    (0u64..1 << n)
        .filter(|mask| {
            let s: f64 = weights
                .iter()
                .enumerate()
                .map(|(i, w)| if mask >> i & 1 == 1 { *w } else { -*w })
                .sum();
            s >= threshold - slack
        })
        .count() as u64
}

/// Exact probability that the Bernoulli scheme's summed perturbation clears
/// half its own scale: P(Σ wₕεₕ ≥ ½√(Σ wₕ²)) with wₕ = √H β ι_h.
/// Returns (favourable count, 2^H).
pub fn khintchine_event_count(iotas: &[f64], beta_delta: f64) -> (u64, u64) {
    let h = iotas.len() as f64;
    let weights: Vec<f64> = iotas.iter().map(|i| h.sqrt() * beta_delta * i).collect();
    let threshold = 0.5 * weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    (rademacher_upper_count(&weights, threshold), 1u64 << iotas.len())
}

/// Empirical frequency of Σ_h (r_ξ − r) ≥ √(H β Σ ι²) for the general
/// Gaussian scheme on a fixed trajectory.
pub fn gaussian_optimism_frequency<R: Rng + ?Sized>(
    iotas: &[f64],
    beta_delta: f64,
    n_resamples: usize,
    rng: &mut R,
) -> f64 {
    let h = iotas.len();
    let threshold = (h as f64 * beta_delta * iotas.iter().map(|i| i * i).sum::<f64>()).sqrt();
    let hits = (0..n_resamples)
        .filter(|_| {
            let total: f64 = iotas
                .iter()
                .map(|&i| general_gaussian_reward(0.0, i, h, beta_delta, rng))
                .sum();
            total >= threshold
        })
        .count();
    hits as f64 / n_resamples as f64
}
