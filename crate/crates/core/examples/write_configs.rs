// Regenerates the JSON files under configs/.

use planex::cli::SweepConfig;
use planex::driver::{AgentKind, ExperimentConfig};
use planex::env::zoo;
use planex::planning::PlannerKind;

pub fn run_example() -> planex::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    std::fs::create_dir_all(&dir)?;
    let corridor = zoo::corridor(&zoo::CorridorParams::default())?;
    let mut planex = ExperimentConfig::new(corridor.to_spec(), AgentKind::PlanexKnr, 2000, 0);
    planex.beta_scale = 5e-7;
    std::fs::write(dir.join("corridor_planex.json"), serde_json::to_string_pretty(&planex)?)?;

    let sweep = SweepConfig {
        base: planex,
        seeds: (0..10).collect(),
        agents: Some(vec![AgentKind::PlanexKnr, AgentKind::Greedy, AgentKind::UniformRandom]),
        beta_scales: None,
    };
    std::fs::write(dir.join("sweep_corridor.json"), serde_json::to_string_pretty(&sweep)?)?;

    let integrator = zoo::integrator(&zoo::IntegratorParams::default())?;
    let mut cfg = ExperimentConfig::new(integrator.to_spec(), AgentKind::PlanexKnr, 500, 0);
    cfg.planner = PlannerKind::Shooting;
    cfg.n_candidates = 256;
    cfg.v_star.planner = Some(PlannerKind::Exhaustive);
    cfg.v_star.budget = Some(10_000_000);
    std::fs::write(dir.join("integrator_planex.json"), serde_json::to_string_pretty(&cfg)?)?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("write_configs example failed");
}
