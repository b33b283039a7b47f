//! BCa bootstrap intervals for the comparison at each whole-day duration,
//! here against a non-inferiority frontier.

use durations::{generate_dataset, recommend_boot_diff, BootstrapConfig, EstimationTarget, RngStream, ScenarioId, TrialDesign};

fn main() -> durations::Result<()> {
    let design = TrialDesign::standard();
    let target: EstimationTarget = "frontier:8=0.10,18=0.05".parse()?;
    let data = generate_dataset(ScenarioId::new(5)?, &design, RngStream::new(3))?;
    let cfg = BootstrapConfig { m: 300, ..BootstrapConfig::default() };

    let rec = recommend_boot_diff(&data, &target, &design, &cfg, RngStream::new(8))?;
    println!("{:>8} {:>8} {:>18} {:>8} {:>6}", "duration", "loss", "BCa 95% CI", "allowed", "pass");
    for b in &rec.per_duration {
        println!(
            "{:>8} {:>8.4}   ({:>6.3}, {:>6.3}) {:>8.3} {:>6}",
            b.duration, b.estimate, b.lower, b.upper, b.bound, b.passes
        );
    }
    println!("\nrecommended duration {} days", rec.d_recommended);
    Ok(())
}
