//! Monte Carlo operating characteristics for (scenario, method) cells.
//!
//! Replicate `r` of scenario `s` draws its dataset from the stream
//! `(seed, s, r, 0)` and its bootstrap from `(seed, s, r, 1)`, so every
//! method sees the same datasets and results do not depend on the number of
//! worker threads.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inference::{recommend, BootstrapConfig, Method};
use crate::rng::RngStream;
use crate::scenarios::{generate_dataset, true_optimal, ScenarioId, TrialDesign, TrueCurve, TrueOptimum};
use crate::targets::{DurationResponse, EstimationTarget};

const WALD_Z: f64 = 1.96;

mod target_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::targets::EstimationTarget;

    pub fn serialize<S: Serializer>(t: &EstimationTarget, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(t)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<EstimationTarget, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub scenarios: Vec<ScenarioId>,
    pub design: TrialDesign,
    pub methods: Vec<Method>,
    #[serde(with = "target_text")]
    pub target: EstimationTarget,
    pub reps: usize,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    pub seed: u64,
    /// Worker threads; `None` uses every available core. Not part of the
    /// serialized echo since it cannot change results.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
}

impl SimulationConfig {
    pub fn new(scenarios: Vec<ScenarioId>, methods: Vec<Method>, target: EstimationTarget, reps: usize, seed: u64) -> Self {
        SimulationConfig {
            scenarios,
            design: TrialDesign::standard(),
            methods,
            target,
            reps,
            bootstrap: BootstrapConfig::default(),
            seed,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if self.scenarios.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidConfig("need at least one scenario and one method".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        self.target.validate()?;
        self.design.check_scenario_range()?;
        for m in &self.methods {
            if !m.supports(&self.target) {
                return Err(Error::UnsupportedTarget {
                    method: m.to_string(),
                    target: self.target.to_string(),
                });
            }
        }
        if self.methods.iter().any(|m| matches!(m, Method::BootDiff | Method::BootDuration)) {
            self.bootstrap.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the serialized configuration (worker count excluded).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Stream for replicate `rep` of `scenario`.
pub fn replicate_stream(seed: u64, scenario: ScenarioId, rep: usize) -> RngStream {
    RngStream::new(seed).child(u64::from(scenario.get())).child(rep as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub d_recommended: u32,
    /// True cure rate at the recommendation.
    pub true_prob: f64,
    pub bootstrap_unreliable: bool,
    pub not_attained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub outcome: std::result::Result<ReplicateOutcome, String>,
}

/// Simulate one dataset, analyse it with `method` and score the
/// recommendation against the true curve. Errors are captured.
pub fn run_replicate(
    scenario: ScenarioId,
    design: &TrialDesign,
    method: Method,
    target: &EstimationTarget,
    cfg: &BootstrapConfig,
    stream: RngStream,
    replicate: usize,
) -> ReplicateResult {
    let outcome = (|| {
        let data = generate_dataset(scenario, design, stream.child(0))?;
        let rec = recommend(method, &data, target, design, cfg, stream.child(1))?;
        Ok::<_, Error>(ReplicateOutcome {
            d_recommended: rec.d_recommended,
            true_prob: TrueCurve(scenario).prob(f64::from(rec.d_recommended)),
            bootstrap_unreliable: rec.diagnostics.unreliable,
            not_attained: rec.diagnostics.not_attained,
        })
    })()
    .map_err(|e| e.to_string());
    ReplicateResult { replicate, outcome }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub scenario: ScenarioId,
    pub method: Method,
    pub target: String,
    /// Successful replicates (the denominator of every percentage).
    pub reps: usize,
    pub failures: usize,
    pub type1: f64,
    pub type1_ci: (f64, f64),
    pub full_power: f64,
    pub partial_power: f64,
    /// True optimal duration on the 100-point grid.
    pub true_min_duration: Option<f64>,
    pub truth: TrueOptimum,
    pub rec_min: u32,
    pub rec_p2_5: u32,
    pub rec_median: u32,
    pub rec_histogram: BTreeMap<u32, usize>,
    pub bootstrap_unreliable: usize,
    pub not_attained: usize,
}

/// Wald interval `p +/- 1.96 sqrt(p (1 - p) / n)` in percent, clipped to
/// `[0, 100]`.
pub fn wald_ci(events: usize, n: usize) -> (f64, f64) {
    let p = events as f64 / n as f64;
    let half = WALD_Z * (p * (1.0 - p) / n as f64).sqrt();
    ((100.0 * (p - half)).max(0.0), (100.0 * (p + half)).min(100.0))
}

/// Smallest value whose empirical CDF reaches `p`.
pub fn histogram_quantile(hist: &BTreeMap<u32, usize>, p: f64) -> u32 {
    let total: usize = hist.values().sum();
    let mut cum = 0;
    for (&d, &count) in hist {
        cum += count;
        if cum as f64 >= p * total as f64 {
            return d;
        }
    }
    *hist.keys().next_back().expect("nonempty histogram")
}

pub fn compute_metrics(
    results: &[ReplicateResult],
    scenario: ScenarioId,
    method: Method,
    design: &TrialDesign,
    target: &EstimationTarget,
) -> Result<CellMetrics> {
    let ok: Vec<&ReplicateOutcome> = results.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    if ok.is_empty() {
        return Err(Error::AllReplicatesFailed);
    }
    let truth_curve = TrueCurve(scenario);
    let truth = true_optimal(scenario, target, design);
    let d_max = design.d_max();
    let optimum = truth.d_star_integer.unwrap_or(d_max.floor() as u32);

    let n = ok.len();
    let mut hist = BTreeMap::new();
    let (mut type1_events, mut exact) = (0, 0);
    for o in &ok {
        *hist.entry(o.d_recommended).or_insert(0) += 1;
        if !target.acceptance_threshold(&truth_curve, d_max, f64::from(o.d_recommended)).holds() {
            type1_events += 1;
        }
        if o.d_recommended == optimum {
            exact += 1;
        }
    }
    let type1 = 100.0 * type1_events as f64 / n as f64;
    Ok(CellMetrics {
        scenario,
        method,
        target: target.to_string(),
        reps: n,
        failures: results.len() - n,
        type1,
        type1_ci: wald_ci(type1_events, n),
        full_power: 100.0 * exact as f64 / n as f64,
        partial_power: 100.0 - type1,
        true_min_duration: truth.d_star_grid,
        truth,
        rec_min: *hist.keys().next().expect("nonempty"),
        rec_p2_5: histogram_quantile(&hist, 0.025),
        rec_median: histogram_quantile(&hist, 0.5),
        rec_histogram: hist,
        bootstrap_unreliable: ok.iter().filter(|o| o.bootstrap_unreliable).count(),
        not_attained: ok.iter().filter(|o| o.not_attained).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub scenario: ScenarioId,
    pub method: Method,
    pub failures: usize,
    pub first_error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub provenance: Provenance,
    pub cells: Vec<CellMetrics>,
    pub failed_cells: Vec<FailedCell>,
}

fn run_cells(config: &SimulationConfig) -> Vec<(ScenarioId, Method, Vec<ReplicateResult>)> {
    let jobs: Vec<(ScenarioId, usize)> = config
        .scenarios
        .iter()
        .flat_map(|&s| (0..config.reps).map(move |r| (s, r)))
        .collect();
    let per_job: Vec<Vec<ReplicateResult>> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let stream = replicate_stream(config.seed, s, r);
            config
                .methods
                .iter()
                .map(|&m| run_replicate(s, &config.design, m, &config.target, &config.bootstrap, stream, r))
                .collect()
        })
        .collect();

    let mut cells = Vec::new();
    for (si, &s) in config.scenarios.iter().enumerate() {
        for (mi, &m) in config.methods.iter().enumerate() {
            let results = (0..config.reps)
                .map(|r| per_job[si * config.reps + r][mi].clone())
                .collect();
            cells.push((s, m, results));
        }
    }
    cells
}

/// Run every (scenario, method) cell. Cells whose replicates all fail are
/// listed in `failed_cells`; the run fails only if every cell fails.
pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationSummary> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let raw = pool.install(|| run_cells(config));

    let mut summary = SimulationSummary {
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config_hash: config.hash(),
        },
        cells: Vec::new(),
        failed_cells: Vec::new(),
    };
    for (s, m, results) in raw {
        match compute_metrics(&results, s, m, &config.design, &config.target) {
            Ok(metrics) => summary.cells.push(metrics),
            Err(_) => summary.failed_cells.push(FailedCell {
                scenario: s,
                method: m,
                failures: results.len(),
                first_error: results
                    .iter()
                    .find_map(|r| r.outcome.as_ref().err().cloned())
                    .unwrap_or_default(),
            }),
        }
    }
    if summary.cells.is_empty() {
        return Err(Error::AllReplicatesFailed);
    }
    Ok(summary)
}

pub const SUMMARY_COLUMNS: [&str; 17] = [
    "scenario",
    "method",
    "target",
    "reps",
    "partial_power",
    "full_power",
    "type1",
    "type1_ci_lo",
    "type1_ci_hi",
    "true_min_duration",
    "rec_min",
    "rec_p2_5",
    "rec_median",
    "failures",
    "seed",
    "config_hash",
    "version",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "not-attained".to_string(), |x| format!("{x:.3}"))
}

impl SimulationSummary {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SUMMARY_COLUMNS)?;
        for c in &self.cells {
            w.write_record([
                c.scenario.to_string(),
                c.method.to_string(),
                c.target.clone(),
                c.reps.to_string(),
                format!("{:.2}", c.partial_power),
                format!("{:.2}", c.full_power),
                format!("{:.2}", c.type1),
                format!("{:.2}", c.type1_ci.0),
                format!("{:.2}", c.type1_ci.1),
                fmt_opt(c.true_min_duration),
                c.rec_min.to_string(),
                c.rec_p2_5.to_string(),
                c.rec_median.to_string(),
                c.failures.to_string(),
                self.provenance.seed.to_string(),
                self.provenance.config_hash.clone(),
                self.provenance.version.clone(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// Fixed-width table for terminals.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:>8} {:<15} {:>6} {:>8} {:>8} {:>20} {:>9} {:>5} {:>5} {:>6}\n",
            "scenario", "method", "reps", "partial", "full", "type1 (95% CI)", "true_min", "min", "p2.5", "median"
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{:>8} {:<15} {:>6} {:>8.1} {:>8.1} {:>20} {:>9} {:>5} {:>5} {:>6}\n",
                c.scenario.get(),
                c.method.as_str(),
                c.reps,
                c.partial_power,
                c.full_power,
                format!("{:.1} ({:.1},{:.1})", c.type1, c.type1_ci.0, c.type1_ci.1),
                c.true_min_duration.map_or("n/a".into(), |d| format!("{d:.1}")),
                c.rec_min,
                c.rec_p2_5,
                c.rec_median,
            ));
        }
        for f in &self.failed_cells {
            out.push_str(&format!("{:>8} {:<15} all {} replicates failed: {}\n", f.scenario.get(), f.method.as_str(), f.failures, f.first_error));
        }
        out
    }

    /// Write `summary.csv`, `summary.json` and `config.json` into `dir`.
    pub fn write(&self, dir: &Path, config: &SimulationConfig) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.csv"), self.to_csv()?)?;
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(self)? + "\n")?;
        fs::write(dir.join("config.json"), serde_json::to_string_pretty(config)? + "\n")?;
        Ok(())
    }
}
