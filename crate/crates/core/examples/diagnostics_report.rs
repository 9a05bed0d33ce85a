// Multi-seed diagnostics for the KNR agent, plus the CSV and summary
// files the command-line tool writes.

use planex::diagnostics::{report, summarize, RunData};
use planex::driver::{estimate_v_star_on, run_with_v_star, write_csv, AgentKind, ExperimentConfig};
use planex::env::zoo;
use planex::planning::PlannerKind;

pub fn run_example() -> planex::Result<()> {
    let world = zoo::integrator(&zoo::IntegratorParams::default())?;
    let mut base = ExperimentConfig::new(world.to_spec(), AgentKind::PlanexKnr, 100, 0);
    base.planner = PlannerKind::Shooting;
    base.n_candidates = 64;
    base.v_star.n_candidates = Some(4096);
    base.v_star.n_rollouts = 500;
    let (v_star, se) = estimate_v_star_on(&world, &base)?;

    let out = std::env::temp_dir().join("planex_diagnostics_example");
    std::fs::create_dir_all(&out)?;
    let mut runs = Vec::new();
    for seed in 0..5 {
        let cfg = ExperimentConfig { seed, ..base.clone() };
        let rec = run_with_v_star(&cfg, &world, v_star, se)?;
        write_csv(&rec.rows, &out.join(format!("seed{seed}.csv")))?;
        let summary = summarize(&rec)?;
        println!("seed {seed}: final regret {:.2}, optimism {:.3}", summary.final_regret, summary.optimism_rate);
        runs.push(RunData::from(&rec));
    }
    let rep = report(&runs)?;
    print!("{}", rep.table());
    println!("CSV files in {}", out.display());
    assert!(!rep.hard_failure());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("diagnostics_report example failed");
}
