// Fit W* from random exploration data and watch the confidence radius.

use planex::env::zoo;
use planex::estimation::{confidence_radius, mahalanobis_error, RidgeEstimate};
use planex::rng::{stream, Stream};

pub fn run_example() -> planex::Result<()> {
    let world = zoo::integrator(&zoo::IntegratorParams::default())?;
    let mut est = RidgeEstimate::new(world.state_dim(), world.features().dim(), 1.0)?;
    let mut env_rng = stream(1, Stream::EnvNoise);
    let mut act_rng = stream(1, Stream::Planner);

    for k in 1..=200usize {
        let actions = world.actions().clone();
        let mut policy = |_: usize, _: &nalgebra::DVector<f64>| actions.sample(&mut act_rng);
        let traj = world.rollout(&mut policy, None, &mut env_rng)?;
        est.update(world.features(), &traj.transitions())?;
        if k.is_power_of_two() {
            let radius = confidence_radius(&est, k + 1, world.w_star_norm(), world.sigma())?;
            let err = mahalanobis_error(&est, world.w_star())?;
            println!(
                "k={k:4} n={:5} logdet ratio={:7.3} beta={:8.3} error={:8.4} inside={}",
                est.n_transitions(),
                est.logdet_ratio(),
                radius.beta_k,
                err,
                err <= radius.beta_k
            );
        }
    }
    println!("W_hat =\n{:.3}", est.w_hat());
    println!("W*    =\n{:.3}", world.w_star());

    // Checkpoints restore the same estimate.
    let cp = est.to_checkpoint(201);
    let back = RidgeEstimate::from_checkpoint(&cp)?;
    assert!((back.w_hat() - est.w_hat()).abs().max() < 1e-9);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("ridge_estimation example failed");
}
