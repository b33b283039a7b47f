//! The `analyze` output: fitted curve, uncertainty table and recommendation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp_model::{FittedCurve, FpPowers, TrialDataset};
use crate::inference::{recommend, round_up_strict, z_quantile, BootstrapConfig, DurationBound, Method, Recommendation};
use crate::rng::RngStream;
use crate::scenarios::TrialDesign;
use crate::targets::{EstimationTarget, Frontier};

/// Spacing of `curve.csv` rows, in days.
pub const CURVE_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub powers: FpPowers,
    pub label: String,
    pub coef: Vec<f64>,
    pub deviance: f64,
    pub converged: bool,
    pub n_obs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub duration: f64,
    pub patients: usize,
    pub cured: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub duration: f64,
    pub fitted: f64,
    pub lower: f64,
    pub upper: f64,
    /// Minimum acceptable cure rate at this duration under the target, on
    /// the fitted curve. Absent for the gradient target.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub version: String,
    pub seed: u64,
    pub boot_m: usize,
    pub method: Method,
    pub target: String,
    pub fp: String,
    pub level: f64,
    pub contiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub provenance: ReportProvenance,
    pub arms: Vec<ArmSummary>,
    pub fit: FitSummary,
    pub recommended_duration: u32,
    pub recommendation: Recommendation,
    pub curve: Vec<CurvePoint>,
    /// `(duration, fitted control rate - frontier loss)` pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frontier_overlay: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub method: Method,
    pub target: EstimationTarget,
    pub bootstrap: BootstrapConfig,
    pub seed: u64,
    /// Extra frontier drawn on the curve, independent of the target.
    pub frontier: Option<Frontier>,
}

/// Fit, run the chosen method and assemble the report.
pub fn analyze_dataset(dataset: &TrialDataset, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    opts.target.validate()?;
    let found = dataset.distinct_durations().len();
    if found < 3 {
        return Err(Error::Unidentifiable { found, needed: 3 });
    }
    let design = TrialDesign::from_dataset(dataset)?;
    let cfg = &opts.bootstrap;
    let curve = cfg.fp.fit(&dataset.grouped(), &cfg.fit)?;
    let recommendation = recommend(opts.method, dataset, &opts.target, &design, cfg, RngStream::new(opts.seed))?;

    let grouped = dataset.grouped();
    let arms = grouped
        .durations
        .iter()
        .zip(&grouped.trials)
        .zip(&grouped.cures)
        .map(|((&duration, &n), &c)| ArmSummary {
            duration,
            patients: n as usize,
            cured: c as usize,
        })
        .collect();

    let frontier = opts.frontier.clone().or_else(|| match &opts.target {
        EstimationTarget::Frontier { frontier } => Some(frontier.clone()),
        _ => None,
    });
    let grid = curve_grid(design.d_min(), design.d_max());
    let control = curve.prob(design.d_max());
    let frontier_overlay = frontier
        .map(|f| grid.iter().map(|&d| (d, control - f.allowed_loss(d))).collect())
        .unwrap_or_default();

    Ok(AnalysisReport {
        provenance: ReportProvenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: opts.seed,
            boot_m: cfg.m,
            method: opts.method,
            target: opts.target.to_string(),
            fp: cfg.fp.name().to_string(),
            level: cfg.level,
            contiguous: cfg.contiguous,
        },
        arms,
        fit: FitSummary {
            powers: curve.powers,
            label: curve.powers.label(),
            coef: curve.coef.clone(),
            deviance: curve.deviance,
            converged: curve.converged,
            n_obs: curve.n_obs,
        },
        recommended_duration: recommendation.d_recommended,
        curve: curve_points(&curve, &opts.target, &grid, control, cfg.level),
        recommendation,
        frontier_overlay,
    })
}

fn curve_grid(d_min: f64, d_max: f64) -> Vec<f64> {
    let n = ((d_max - d_min) / CURVE_STEP + 1e-9).floor() as usize;
    (0..=n).map(|i| d_min + i as f64 * CURVE_STEP).collect()
}

fn curve_points(curve: &FittedCurve, target: &EstimationTarget, grid: &[f64], control: f64, level: f64) -> Vec<CurvePoint> {
    let z = z_quantile(level);
    grid.iter()
        .map(|&d| {
            let fitted = curve.prob(d);
            let half = z * curve.pointwise_se(d);
            CurvePoint {
                duration: d,
                fitted,
                lower: fitted - half,
                upper: fitted + half,
                threshold: target.level_threshold(control, d),
            }
        })
        .collect()
}

fn first_pass(rows: &[DurationBound], contiguous: bool, d_max: u32) -> u32 {
    let pick = if contiguous {
        let tail = rows.iter().rev().take_while(|r| r.upper < r.bound).count();
        rows.get(rows.len() - tail).map(|r| r.duration)
    } else {
        rows.iter().find(|r| r.upper < r.bound).map(|r| r.duration)
    };
    pick.filter(|&d| d < d_max).unwrap_or(d_max)
}

impl AnalysisReport {
    /// Apply the method's recommendation rule to the report's own tables.
    pub fn rederive(&self) -> u32 {
        let d_min = self.arms.first().map_or(0.0, |a| a.duration);
        let d_max = self.arms.last().map_or(0.0, |a| a.duration);
        let top = d_max.floor() as u32;
        let rec = &self.recommendation;
        match rec.method {
            Method::Delta | Method::BootDiff => first_pass(&rec.per_duration, self.provenance.contiguous, top),
            Method::BootDuration => round_up_strict(rec.ci.1, d_min, d_max).0,
            Method::ConfBands | Method::GradientPoint => match rec.d_star_hat {
                Some(cut) => round_up_strict(cut, d_min, d_max).0,
                None => top,
            },
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.rederive() == self.recommended_duration
    }

    /// Plot-ready curve table.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("duration,fitted,lower,upper,threshold,frontier\n");
        for (i, p) in self.curve.iter().enumerate() {
            let threshold = p.threshold.map_or(String::new(), |t| format!("{t:.6}"));
            let frontier = self
                .frontier_overlay
                .get(i)
                .map_or(String::new(), |&(_, v)| format!("{v:.6}"));
            let _ = writeln!(
                out,
                "{:.1},{:.6},{:.6},{:.6},{},{}",
                p.duration, p.fitted, p.lower, p.upper, threshold, frontier
            );
        }
        out
    }
}
