//! True optimal durations of the sixteen reference scenarios under several
//! estimation targets.

use durations::scenarios::true_optimal;
use durations::{EstimationTarget, ScenarioId, TrialDesign};

fn main() -> durations::Result<()> {
    let design = TrialDesign::standard();
    let targets: Vec<EstimationTarget> = ["risk-diff:0.10", "risk-ratio:0.9", "frontier:8=0.10,18=0.05", "max-grad:0.01"]
        .iter()
        .map(|s| s.parse())
        .collect::<durations::Result<_>>()?;

    print!("{:>8}", "scenario");
    for t in &targets {
        print!(" {:>24}", t.to_string());
    }
    println!();
    for id in ScenarioId::all() {
        print!("{:>8}", id.get());
        for t in &targets {
            let opt = true_optimal(id, t, &design);
            let cell = match (opt.d_star, opt.d_star_integer) {
                (Some(d), Some(i)) => format!("{d:.3} -> {i}"),
                _ => "not attained".to_string(),
            };
            print!(" {cell:>24}");
        }
        println!();
    }
    Ok(())
}
