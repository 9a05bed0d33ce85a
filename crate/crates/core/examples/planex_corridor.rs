// PlanEx against greedy planning on the sparse corridor.

use planex::driver::{estimate_v_star_on, run_with_v_star, AgentKind, ExperimentConfig};
use planex::env::zoo;

pub fn run_example() -> planex::Result<()> {
    let world = zoo::corridor(&zoo::CorridorParams::default())?;
    let k = 400;
    let mut base = ExperimentConfig::new(world.to_spec(), AgentKind::Greedy, k, 0);
    base.beta_scale = 5e-7;
    base.v_star.n_rollouts = 500;
    let (v_star, se) = estimate_v_star_on(&world, &base)?;
    println!("V* = {v_star:.4} +- {se:.4}");

    for agent in [AgentKind::Greedy, AgentKind::PlanexKnr, AgentKind::UcbBonus, AgentKind::UniformRandom] {
        let cfg = ExperimentConfig { agent, ..base.clone() };
        let rec = run_with_v_star(&cfg, &world, v_star, se)?;
        let goal_hits = rec.rows.iter().filter(|r| r.episode_return > 1.0).count();
        println!(
            "{:15} regret after {k}: {:7.1}  episodes reaching the goal: {goal_hits}",
            agent.name(),
            rec.final_regret()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("planex_corridor example failed");
}
