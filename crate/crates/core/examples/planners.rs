// Exhaustive enumeration against random shooting on the integrator.

use planex::env::zoo;
use planex::planning::{plan_exhaustive, plan_shooting, PlanningProblem, DEFAULT_BUDGET};
use planex::rng::{stream, Stream};

pub fn run_example() -> planex::Result<()> {
    let world = zoo::integrator(&zoo::IntegratorParams {
        horizon: 6,
        ..Default::default()
    })?;
    let problem = PlanningProblem {
        s1: world.s1(),
        start_step: 0,
        horizon: world.horizon(),
        rewards: world.rewards(),
        dynamics: world.model(world.w_star(), 0.0),
        actions: world.actions(),
    };
    let exact = plan_exhaustive(&problem, 1, DEFAULT_BUDGET, &mut stream(0, Stream::Planner))?;
    println!("exhaustive: value {:.4} over {} sequences", exact.value_estimate, exact.n_model_rollouts);
    for n in [16, 64, 256, 1024] {
        let res = plan_shooting(&problem, n, 1, &mut stream(0, Stream::Planner))?;
        println!("shooting N={n:5}: value {:.4}", res.value_estimate);
    }

    // Executing the plan on the noisy world.
    let mut policy = exact.policy;
    let (v, se) = world.monte_carlo_value(&mut policy, world.rewards(), 1000, &mut stream(0, Stream::Evaluation))?;
    println!("realized on the world: {v:.4} +- {se:.4}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("planners example failed");
}
