//! Small Monte Carlo study comparing methods on a few scenarios.
//!
//! Scale `reps` up for publication-grade numbers; the full sixteen-scenario
//! study is better run through the `simulate` command.

use durations::{run_simulation, BootstrapConfig, EstimationTarget, Method, ScenarioId, SimulationConfig};

fn main() -> durations::Result<()> {
    let scenarios = [1, 4, 8].into_iter().map(ScenarioId::new).collect::<durations::Result<Vec<_>>>()?;
    let mut cfg = SimulationConfig::new(
        scenarios,
        vec![Method::ConfBands, Method::Delta, Method::BootDuration],
        EstimationTarget::risk_difference(0.10),
        40,
        2025,
    );
    cfg.bootstrap = BootstrapConfig { m: 100, ..BootstrapConfig::default() };

    let summary = run_simulation(&cfg)?;
    print!("{}", summary.table());
    println!("config hash {}", summary.provenance.config_hash);
    Ok(())
}
