//! Bootstrap percentile interval for the optimal duration itself.

use durations::{generate_dataset, recommend_boot_duration, BootstrapConfig, EstimationTarget, RngStream, ScenarioId, TrialDesign};

fn main() -> durations::Result<()> {
    let design = TrialDesign::standard();
    let target: EstimationTarget = "risk-diff:0.10".parse()?;
    let data = generate_dataset(ScenarioId::new(12)?, &design, RngStream::new(5))?;
    let cfg = BootstrapConfig { m: 400, ..BootstrapConfig::default() };

    let rec = recommend_boot_duration(&data, &target, &design, &cfg, RngStream::new(99))?;
    let d_star = rec.d_star_hat.unwrap_or(design.d_max());
    println!("mean bootstrap optimum {d_star:.2} days");
    println!("95% interval ({:.2}, {:.2})", rec.ci.0, rec.ci.1);
    println!("recommended duration {} days", rec.d_recommended);
    println!(
        "replicates used {} (failed fits {}, dropped {})",
        rec.bootstrap_dstar.len(),
        rec.diagnostics.boot_failures,
        rec.diagnostics.boot_dropped
    );
    Ok(())
}
