//! Simulate one trial from a reference scenario and fit the duration-response
//! curve with both power-selection algorithms.
//!
//! cargo run --example fit_duration_response -- 6

use durations::{generate_dataset, select_fp2_exhaustive, select_fp_closed_test, true_curve, RngStream, ScenarioId, TrialDesign};

fn main() -> durations::Result<()> {
    let id: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let scenario = ScenarioId::new(id)?;
    let design = TrialDesign::standard();
    let data = generate_dataset(scenario, &design, RngStream::new(2024))?;

    let exhaustive = select_fp2_exhaustive(&data)?;
    let closed = select_fp_closed_test(&data, 0.05)?;
    println!("scenario {id}: {}", scenario.description());
    println!("exhaustive FP2: {} deviance {:.3}", exhaustive.powers.label(), exhaustive.deviance);
    println!("closed test:    {} deviance {:.3}", closed.powers.label(), closed.deviance);

    println!("\n{:>8} {:>8} {:>10} {:>10} {:>8}", "duration", "true", "exhaustive", "closed", "se");
    for d in design.integer_durations() {
        let d = f64::from(d);
        println!(
            "{d:>8} {:>8.4} {:>10.4} {:>10.4} {:>8.4}",
            true_curve(scenario, d)?,
            exhaustive.prob(d),
            closed.prob(d),
            exhaustive.pointwise_se(d)
        );
    }
    Ok(())
}
