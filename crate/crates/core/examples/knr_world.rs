// Build the built-in worlds, roll out a policy and estimate its value.

use nalgebra::DVector;
use planex::env::{zoo, KnrWorld};
use planex::rng::{stream, Stream};

pub fn run_example() -> planex::Result<()> {
    let world = zoo::integrator(&zoo::IntegratorParams::default())?;
    println!(
        "integrator: d_S={} d_phi={} H={} sigma={} |W*|={:.3}",
        world.state_dim(),
        world.features().dim(),
        world.horizon(),
        world.sigma(),
        world.w_star_norm()
    );

    // Push right, then up.
    let mut policy = |step: usize, _s: &DVector<f64>| {
        if step < 4 {
            DVector::from_row_slice(&[1.0, 0.0])
        } else {
            DVector::from_row_slice(&[0.0, 1.0])
        }
    };
    let mut rng = stream(0, Stream::EnvNoise);
    let traj = world.rollout(&mut policy, None, &mut rng)?;
    for s in &traj.steps {
        println!("h={:2} s=({:+.3}, {:+.3}) r={:.3}", s.h, s.state[0], s.state[1], s.reward_true);
    }
    let (mean, se) = world.monte_carlo_value(&mut policy, world.rewards(), 2000, &mut rng)?;
    println!("V = {mean:.4} +- {se:.4}");

    // Worlds serialize to JSON and back.
    let json = world.to_json()?;
    let again = KnrWorld::from_json(&json)?;
    assert_eq!(again.to_spec(), world.to_spec());

    let corridor = zoo::corridor(&zoo::CorridorParams::default())?;
    println!("corridor spec: {}", serde_json::to_string(&corridor.to_spec()).unwrap_or_default());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("knr_world example failed");
}
