//! Online ridge regression of the transition matrix.
//!
//! Keeps Λ = Σ φφᵀ + λI and Σ s'φᵀ, refactorizes Λ after each batch of
//! transitions and never forms Λ⁻¹ explicitly.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::env::{FeatureMap, Transition};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, logdet, solve_lower, spectral_norm};

#[derive(Clone, Debug)]
pub struct RidgeEstimate {
    w_hat: DMatrix<f64>,
    precision: DMatrix<f64>,
    lambda_reg: f64,
    n_transitions: usize,
    sum_outer: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    logdet: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeCheckpoint {
    pub state_dim: usize,
    pub d_phi: usize,
    /// Row-major d_S × d_φ.
    pub w_hat: Vec<f64>,
    /// Row-major d_φ × d_φ.
    pub precision: Vec<f64>,
    pub lambda_reg: f64,
    pub k: usize,
    pub n_transitions: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceRadius {
    pub beta_k: f64,
    pub w_star_norm_bound: f64,
    pub sigma: f64,
    pub logdet_ratio: f64,
}

impl RidgeEstimate {
    pub fn new(state_dim: usize, d_phi: usize, lambda_reg: f64) -> Result<Self> {
        if !(lambda_reg > 0.0 && lambda_reg.is_finite()) {
            return Err(Error::Config("lambda_reg must be positive".into()));
        }
        let precision = DMatrix::identity(d_phi, d_phi) * lambda_reg;
        let chol = cholesky(&precision)?;
        Ok(Self {
            w_hat: DMatrix::zeros(state_dim, d_phi),
            logdet: logdet(&chol),
            precision,
            lambda_reg,
            n_transitions: 0,
            sum_outer: DMatrix::zeros(state_dim, d_phi),
            chol,
        })
    }

    /// Adds featurized transitions (φ(s, a), s').
    pub fn update_featurized(&mut self, batch: &[(DVector<f64>, DVector<f64>)]) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let mut precision = self.precision.clone();
        let mut sum_outer = self.sum_outer.clone();
        for (phi, next) in batch {
            if phi.len() != self.d_phi() || next.len() != self.state_dim() {
                return Err(Error::Config("transition dimensions disagree with the estimate".into()));
            }
            if phi.iter().chain(next.iter()).any(|x| !x.is_finite()) {
                return Err(Error::Numeric("non-finite transition".into()));
            }
            precision.ger(1.0, phi, phi, 1.0);
            sum_outer.ger(1.0, next, phi, 1.0);
        }
        let chol = cholesky(&precision)?;
        // W = S Λ⁻¹  ⇔  Wᵀ = Λ⁻¹ Sᵀ
        let w_hat = chol.solve(&sum_outer.transpose()).transpose();
        self.logdet = logdet(&chol);
        self.precision = precision;
        self.sum_outer = sum_outer;
        self.chol = chol;
        self.w_hat = w_hat;
        self.n_transitions += batch.len();
        Ok(())
    }

    pub fn update(&mut self, features: &FeatureMap, transitions: &[Transition]) -> Result<()> {
        let batch = transitions
            .iter()
            .map(|t| Ok((features.evaluate(&t.state, &t.action)?, t.next_state.clone())))
            .collect::<Result<Vec<_>>>()?;
        self.update_featurized(&batch)
    }

    pub fn w_hat(&self) -> &DMatrix<f64> {
        &self.w_hat
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn sum_outer(&self) -> &DMatrix<f64> {
        &self.sum_outer
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    pub fn lambda_reg(&self) -> f64 {
        self.lambda_reg
    }

    pub fn n_transitions(&self) -> usize {
        self.n_transitions
    }

    pub fn state_dim(&self) -> usize {
        self.w_hat.nrows()
    }

    pub fn d_phi(&self) -> usize {
        self.w_hat.ncols()
    }

    /// log det Λ
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// log(det Λ / det λI)
    pub fn logdet_ratio(&self) -> f64 {
        self.logdet - self.d_phi() as f64 * self.lambda_reg.ln()
    }

    /// ‖φ‖_{Λ⁻¹} = ‖L⁻¹φ‖ with Λ = LLᵀ.
    pub fn uncertainty(&self, phi: &DVector<f64>) -> Result<f64> {
        if phi.len() != self.d_phi() {
            return Err(Error::Config("feature vector has the wrong dimension".into()));
        }
        Ok(solve_lower(&self.chol, phi).norm())
    }

    pub fn phi_uncertainty(
        &self,
        features: &FeatureMap,
        state: &DVector<f64>,
        action: &DVector<f64>,
    ) -> Result<f64> {
        self.uncertainty(&features.evaluate(state, action)?)
    }

    /// ‖v‖²_Λ = vᵀΛv
    pub fn precision_norm_sq(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.precision * v))
    }

    pub fn to_checkpoint(&self, k: usize) -> RidgeCheckpoint {
        RidgeCheckpoint {
            state_dim: self.state_dim(),
            d_phi: self.d_phi(),
            w_hat: self.w_hat.transpose().as_slice().to_vec(),
            precision: self.precision.transpose().as_slice().to_vec(),
            lambda_reg: self.lambda_reg,
            k,
            n_transitions: self.n_transitions,
        }
    }

    /// Restores an estimate; Σ s'φᵀ is recovered as W Λ.
    pub fn from_checkpoint(cp: &RidgeCheckpoint) -> Result<Self> {
        if cp.w_hat.len() != cp.state_dim * cp.d_phi || cp.precision.len() != cp.d_phi * cp.d_phi {
            return Err(Error::Schema("checkpoint matrix sizes disagree with its dims".into()));
        }
        if !(cp.lambda_reg > 0.0) {
            return Err(Error::Schema("checkpoint lambda_reg must be positive".into()));
        }
        let w_hat = DMatrix::from_row_slice(cp.state_dim, cp.d_phi, &cp.w_hat);
        let precision = DMatrix::from_row_slice(cp.d_phi, cp.d_phi, &cp.precision);
        let chol = cholesky(&precision)?;
        Ok(Self {
            sum_outer: &w_hat * &precision,
            logdet: logdet(&chol),
            w_hat,
            precision,
            lambda_reg: cp.lambda_reg,
            n_transitions: cp.n_transitions,
            chol,
        })
    }
}

/// β_k = 2λ‖W*‖² + 8σ²(d_S log 5 + 2 log k + log 4 + log(det Λ_k / det Λ_0)).
pub fn confidence_radius(est: &RidgeEstimate, k: usize, w_star_norm_bound: f64, sigma: f64) -> Result<ConfidenceRadius> {
    if k == 0 {
        return Err(Error::Domain("round index k must be at least 1".into()));
    }
    if !(w_star_norm_bound >= 0.0 && sigma >= 0.0) {
        return Err(Error::Domain("norm bound and sigma must be non-negative".into()));
    }
    let logdet_ratio = est.logdet_ratio();
    let d_s = est.state_dim() as f64;
    let beta_k = 2.0 * est.lambda_reg() * w_star_norm_bound * w_star_norm_bound
        + 8.0 * sigma * sigma * (d_s * 5f64.ln() + 2.0 * (k as f64).ln() + 4f64.ln() + logdet_ratio);
    Ok(ConfidenceRadius {
        beta_k,
        w_star_norm_bound,
        sigma,
        logdet_ratio,
    })
}

/// ‖(W_true − Ŵ) Λ^{1/2}‖₂², the good-event statistic.
pub fn mahalanobis_error(est: &RidgeEstimate, w_true: &DMatrix<f64>) -> Result<f64> {
    if w_true.shape() != est.w_hat().shape() {
        return Err(Error::Config("matrix shapes disagree".into()));
    }
    // (D L)(D L)ᵀ = D Λ Dᵀ
    let whitened = (w_true - est.w_hat()) * est.cholesky().l();
    let s = spectral_norm(&whitened);
    Ok(s * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    /// Direct normal-equations solve of the ridge objective.
    fn batch_oracle(data: &[(DVector<f64>, DVector<f64>)], d_s: usize, d_phi: usize, lambda: f64) -> DMatrix<f64> {
        let mut a = DMatrix::<f64>::identity(d_phi, d_phi) * lambda;
        let mut b = DMatrix::<f64>::zeros(d_phi, d_s);
        for (phi, y) in data {
            a += phi * phi.transpose();
            b += phi * y.transpose();
        }
        a.lu().solve(&b).unwrap().transpose()
    }

    fn random_data(seed: u64, n: usize, d_s: usize, d_phi: usize) -> Vec<(DVector<f64>, DVector<f64>)> {
        let mut rng = stream(seed, Stream::Custom(1));
        (0..n)
            .map(|_| {
                let phi = DVector::from_fn(d_phi, |_, _| rng.random_range(-0.3..0.3));
                let y = DVector::from_fn(d_s, |_, _| rng.random_range(-2.0..2.0));
                (phi, y)
            })
            .collect()
    }

    #[test]
    fn empty_prior() {
        let est = RidgeEstimate::new(1, 2, 1.0).unwrap();
        assert_eq!(est.w_hat(), &DMatrix::zeros(1, 2));
        assert_eq!(est.precision(), &DMatrix::identity(2, 2));
        assert_eq!(est.logdet_ratio(), 0.0);
    }

    #[test]
    fn single_transition_by_hand() {
        let mut est = RidgeEstimate::new(1, 2, 1.0).unwrap();
        est.update_featurized(&[(v(&[1.0, 0.0]), v(&[3.0]))]).unwrap();
        assert_eq!(est.precision(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        assert_abs_diff_eq!(est.w_hat()[(0, 0)], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(est.w_hat()[(0, 1)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fifty_transitions_match_normal_equations() {
        let data = random_data(3, 50, 2, 4);
        let mut est = RidgeEstimate::new(2, 4, 1.0).unwrap();
        est.update_featurized(&data).unwrap();
        let oracle = batch_oracle(&data, 2, 4, 1.0);
        assert!((est.w_hat() - oracle).amax() <= 1e-8);
    }

    #[test]
    fn w_hat_is_sum_outer_times_inverse_precision() {
        let data = random_data(4, 30, 3, 5);
        let mut est = RidgeEstimate::new(3, 5, 0.5).unwrap();
        est.update_featurized(&data).unwrap();
        assert!((est.w_hat() * est.precision() - est.sum_outer()).amax() <= 1e-10);
        let min_eig = est.precision().clone().symmetric_eigen().eigenvalues.min();
        assert!(min_eig >= 0.5 - 1e-10);
    }

    #[test]
    fn non_finite_input_is_numeric_error() {
        let mut est = RidgeEstimate::new(1, 2, 1.0).unwrap();
        let err = est.update_featurized(&[(v(&[f64::NAN, 0.0]), v(&[1.0]))]).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert_eq!(est.n_transitions(), 0);
    }

    #[test]
    fn radius_at_first_round() {
        let est = RidgeEstimate::new(2, 3, 1.0).unwrap();
        let r = confidence_radius(&est, 1, 1.5, 0.1).unwrap();
        let expected = 2.0 * 1.5 * 1.5 + 8.0 * 0.01 * (2.0 * 5f64.ln() + 4f64.ln());
        assert_abs_diff_eq!(r.beta_k, expected, epsilon = 1e-14);
        assert_eq!(r.logdet_ratio, 0.0);
        assert!(matches!(confidence_radius(&est, 0, 1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn radius_doubling_k_adds_log_two_term() {
        let mut est = RidgeEstimate::new(1, 3, 1.0).unwrap();
        est.update_featurized(&random_data(5, 20, 1, 3)).unwrap();
        let sigma = 0.3;
        let a = confidence_radius(&est, 7, 2.0, sigma).unwrap().beta_k;
        let b = confidence_radius(&est, 14, 2.0, sigma).unwrap().beta_k;
        assert_abs_diff_eq!(b - a, 8.0 * sigma * sigma * 2.0 * 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn radius_is_monotone_over_a_run() {
        let data = random_data(6, 200, 2, 4);
        let mut est = RidgeEstimate::new(2, 4, 1.0).unwrap();
        let mut last = 0.0;
        for (k, chunk) in data.chunks(10).enumerate() {
            let beta = confidence_radius(&est, k + 1, 1.0, 0.2).unwrap().beta_k;
            assert!(beta >= last);
            last = beta;
            est.update_featurized(chunk).unwrap();
        }
    }

    #[test]
    fn mahalanobis_basic_cases() {
        let mut est = RidgeEstimate::new(2, 3, 1.0).unwrap();
        assert_eq!(mahalanobis_error(&est, &est.w_hat().clone()).unwrap(), 0.0);
        let w = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0]);
        let raw = w.clone().svd(false, false).singular_values.max();
        assert_abs_diff_eq!(mahalanobis_error(&est, &w).unwrap(), raw * raw, epsilon = 1e-9);
        est.update_featurized(&random_data(8, 5, 2, 3)).unwrap();
        assert!(mahalanobis_error(&est, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn mahalanobis_matches_eigen_oracle() {
        for seed in 0..20 {
            let mut est = RidgeEstimate::new(2, 2, 1.0).unwrap();
            est.update_featurized(&random_data(seed, 10, 2, 2)).unwrap();
            let mut rng = stream(seed, Stream::Custom(2));
            let w = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-3.0..3.0));
            let d = &w - est.w_hat();
            let oracle = (&d * est.precision() * d.transpose()).symmetric_eigen().eigenvalues.max();
            let got = mahalanobis_error(&est, &w).unwrap();
            assert!((got - oracle).abs() <= 1e-10 * oracle.max(1.0), "seed {seed}: {got} vs {oracle}");
        }
    }

    #[test]
    fn uncertainty_cases() {
        let est = RidgeEstimate::new(1, 2, 1.0).unwrap();
        assert_abs_diff_eq!(est.uncertainty(&v(&[0.6, 0.8])).unwrap(), 1.0, epsilon = 1e-15);
        let mut est = RidgeEstimate::new(1, 2, 1.0).unwrap();
        // Λ = diag(4, 1): one transition with φ = (√3, 0).
        est.update_featurized(&[(v(&[3f64.sqrt(), 0.0]), v(&[0.0]))]).unwrap();
        assert_abs_diff_eq!(est.uncertainty(&v(&[2.0, 0.0])).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut est = RidgeEstimate::new(2, 3, 1.0).unwrap();
        est.update_featurized(&random_data(9, 25, 2, 3)).unwrap();
        let cp = est.to_checkpoint(4);
        let json = serde_json::to_string(&cp).unwrap();
        let back = RidgeEstimate::from_checkpoint(&serde_json::from_str(&json).unwrap()).unwrap();
        assert!((back.sum_outer() - est.sum_outer()).amax() <= 1e-10);
        let more = random_data(10, 5, 2, 3);
        est.update_featurized(&more).unwrap();
        let mut back = back;
        back.update_featurized(&more).unwrap();
        assert!((back.w_hat() - est.w_hat()).amax() <= 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn incremental_equals_batch(seed in 0u64..10_000, n in 1usize..120, split in 0usize..120, lambda in 0.1f64..3.0) {
            let data = random_data(seed, n, 2, 4);
            let split = split.min(n);
            let mut est = RidgeEstimate::new(2, 4, lambda).unwrap();
            est.update_featurized(&data[..split]).unwrap();
            est.update_featurized(&data[split..]).unwrap();
            let oracle = batch_oracle(&data, 2, 4, lambda);
            prop_assert!((est.w_hat() - oracle).amax() <= 1e-8);
        }

        #[test]
        fn uncertainty_bounded_by_prior(seed in 0u64..10_000, n in 0usize..60) {
            let mut est = RidgeEstimate::new(1, 3, 0.7).unwrap();
            est.update_featurized(&random_data(seed, n, 1, 3)).unwrap();
            let phi = random_data(seed + 1, 1, 1, 3)[0].0.clone();
            prop_assert!(est.uncertainty(&phi).unwrap() <= phi.norm() / 0.7f64.sqrt() + 1e-12);
        }
    }
}
