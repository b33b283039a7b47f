//! Delta-method intervals for the loss in cure rate relative to the longest
//! duration, and the resulting recommendation.

use durations::{delta_diff_ci, generate_dataset, recommend_delta, select_fp2_exhaustive, EstimationTarget, RngStream, ScenarioId, TrialDesign};

fn main() -> durations::Result<()> {
    let design = TrialDesign::standard();
    let target = EstimationTarget::risk_difference(0.10);
    let data = generate_dataset(ScenarioId::new(1)?, &design, RngStream::new(17))?;
    let curve = select_fp2_exhaustive(&data)?;

    println!("{:>8} {:>8} {:>8} {:>18}", "duration", "loss", "se", "95% CI");
    for d in design.integer_durations() {
        let ci = delta_diff_ci(&curve, design.d_max(), f64::from(d), 0.95);
        println!("{d:>8} {:>8.4} {:>8.4}   ({:>6.3}, {:>6.3})", ci.diff, ci.se, ci.lower, ci.upper);
    }

    let rec = recommend_delta(&curve, &target, &design, 0.95)?;
    println!("\nrecommended duration: {} days", rec.d_recommended);
    if rec.diagnostics.not_attained {
        println!("no shorter duration met the margin");
    }
    Ok(())
}
