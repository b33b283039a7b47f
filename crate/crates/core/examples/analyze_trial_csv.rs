//! Read a trial CSV (`duration,cure` per patient), analyse it and print the
//! JSON report. Without an argument a simulated trial is used.
//!
//! cargo run --example analyze_trial_csv -- trial.csv

use std::path::PathBuf;

use durations::cli::{analyze_dataset, read_dataset_csv, AnalysisOptions};
use durations::{generate_dataset, BootstrapConfig, Method, RngStream, ScenarioId, TrialDesign};

fn main() -> durations::Result<()> {
    let data = match std::env::args().nth(1) {
        Some(path) => read_dataset_csv(&PathBuf::from(path), false)?,
        None => generate_dataset(ScenarioId::new(9)?, &TrialDesign::standard(), RngStream::new(12))?,
    };
    let opts = AnalysisOptions {
        method: Method::BootDiff,
        target: "risk-diff:0.10".parse()?,
        bootstrap: BootstrapConfig { m: 200, ..BootstrapConfig::default() },
        seed: 1,
        frontier: None,
    };
    let report = analyze_dataset(&data, &opts)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    eprintln!("recommended duration {} days", report.recommended_duration);
    Ok(())
}
