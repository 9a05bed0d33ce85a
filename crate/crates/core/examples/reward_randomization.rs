// The three reward perturbation schemes side by side.

use nalgebra::DVector;
use planex::env::{zoo, RewardFn};
use planex::estimation::{confidence_radius, RidgeEstimate};
use planex::randomization::{
    default_beta_delta, draw_knr_noise, khintchine_event_count, sigma_k_squared, CalibratedRewards,
    KnrPerturbedRewards, SchemeKind, SchemeParams,
};
use planex::rng::{stream, Stream};

pub fn run_example() -> planex::Result<()> {
    let world = zoo::corridor(&zoo::CorridorParams::default())?;
    let h = world.horizon();
    let est = RidgeEstimate::new(1, world.features().dim(), 1.0)?;
    let beta = confidence_radius(&est, 1, world.w_star_norm(), world.sigma())?.beta_k;
    let sk2 = sigma_k_squared(beta, h, world.sigma())?;
    println!("beta_1 = {beta:.2}, theory sigma_1^2 = {sk2:.3e}");

    // KNR scheme with a small multiplier so the numbers stay readable.
    let draw = draw_knr_noise(est.cholesky(), sk2 * 1e-6, h, 1, &mut stream(0, Stream::RewardNoise))?;
    let knr = KnrPerturbedRewards {
        base: world.rewards(),
        features: world.features(),
        draw: &draw,
    };
    let s = DVector::from_row_slice(&[0.0]);
    for a in [-1.0, 1.0] {
        let a = DVector::from_row_slice(&[a]);
        let row: Vec<String> = (0..h)
            .map(|step| format!("{:.3}", knr.reward(step, &s, &a).unwrap_or(f64::NAN)))
            .collect();
        println!("knr      a={:+} {}", a[0], row.join(" "));
    }

    let beta_delta = default_beta_delta(0.01);
    for kind in [SchemeKind::GeneralGaussian, SchemeKind::Bernoulli] {
        let f = CalibratedRewards {
            base: world.rewards(),
            features: world.features(),
            est: &est,
            params: SchemeParams::new(kind, beta_delta, h, 0.01)?,
            beta_scale: 0.2,
            horizon: h,
            round_seed: 42,
        };
        let a = DVector::from_row_slice(&[1.0]);
        let row: Vec<String> = (0..h).map(|step| format!("{:.3}", f.reward(step, &s, &a).unwrap_or(f64::NAN))).collect();
        println!("{kind:?} {}", row.join(" "));
    }

    let (hits, total) = khintchine_event_count(&[0.2, 0.9, 0.4, 0.4, 0.1, 0.7], beta_delta);
    println!("bernoulli optimism event: {hits}/{total} = {:.4} (floor 3/16)", hits as f64 / total as f64);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("reward_randomization example failed");
}
