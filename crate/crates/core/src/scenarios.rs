//! Reference duration-response curves, trial designs and dataset simulation.
//!
//! The sixteen curves are defined on durations 8 to 20 days. Scenarios 5, 14
//! and 15 use reconstructed forms; see [`TrueCurve`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp_model::{Record, TrialDataset};
use crate::rng::RngStream;
use crate::targets::{solve_dstar, solve_dstar_on_grid, DurationResponse, EstimationTarget};

/// Duration range the reference curves are defined on.
pub const SCENARIO_RANGE: (f64, f64) = (8.0, 20.0);

/// Points of the evenly spaced grid over the design range used for the
/// reference true minimum durations.
pub const REFERENCE_GRID_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ScenarioId(u32);

impl ScenarioId {
    pub fn new(id: u32) -> Result<Self> {
        if (1..=16).contains(&id) {
            Ok(ScenarioId(id))
        } else {
            Err(Error::UnknownScenario(id))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = ScenarioId> {
        (1..=16).map(ScenarioId)
    }

    pub fn description(self) -> &'static str {
        match self.0 {
            1 => "linear on log-odds",
            2 => "quadratic + linear on log-odds",
            3 => "quadratic on log-odds",
            4 => "constant response",
            5 => "logarithmic on log-odds",
            6 => "square root on log-odds",
            7 => "cubic on log-odds",
            8 => "cubic + quadratic on log-odds",
            9 => "logistic growth, early",
            10 => "logistic growth, late",
            11 => "Gompertz A",
            12 => "Gompertz B",
            13 => "Gompertz C",
            14 => "quadratic on probability scale",
            15 => "concave quadratic on probability scale",
            _ => "linear spline",
        }
    }
}

impl TryFrom<u32> for ScenarioId {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        ScenarioId::new(v)
    }
}

impl From<ScenarioId> for u32 {
    fn from(s: ScenarioId) -> u32 {
        s.0
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[inline]
fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// The true curve of one scenario.
///
/// Scenario 5 uses `ln(D - 7)` so the curve is finite at the shortest arm,
/// scenario 14 is `0.7 + 0.15 ((D - 8) / 12)^2` so it stays a probability up
/// to 20 days, and scenario 15 is a concave quadratic calibrated to the
/// published minimum durations. The spline (16) is evaluated by the right
/// piece at its knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrueCurve(pub ScenarioId);

impl TrueCurve {
    /// Linear predictor and its derivative for the log-odds scenarios.
    fn logit_parts(&self, d: f64) -> Option<(f64, f64)> {
        let x = d - 8.0;
        Some(match self.0.get() {
            1 => (0.85 + 0.17 * x, 0.17),
            2 => (0.62 + 0.13 * x + 0.01 * x * x, 0.13 + 0.02 * x),
            3 => (0.85 + 0.01 * x * x, 0.02 * x),
            5 => (0.85 + 1.19 * (d - 7.0).ln(), 1.19 / (d - 7.0)),
            6 => (0.62 + 0.67 * x.sqrt(), 0.67 / (2.0 * x.sqrt())),
            7 => (1.10 + 0.002 * x.powi(3), 0.006 * x * x),
            8 => (1.39 + 0.002 * x * x + 0.001 * x.powi(3), 0.004 * x + 0.003 * x * x),
            _ => return None,
        })
    }
}

impl DurationResponse for TrueCurve {
    fn prob(&self, d: f64) -> f64 {
        if let Some((eta, _)) = self.logit_parts(d) {
            return logistic(eta);
        }
        let x = d - 8.0;
        match self.0.get() {
            4 => 0.95,
            9 => 0.05 + 0.9 / (1.0 + (23.0 - 2.0 * d).exp()),
            10 => 0.05 + 0.9 / (1.0 + (28.0 - 2.0 * d).exp()),
            11 => 0.9 * (-(-0.5 * (d - 13.0)).exp()).exp(),
            12 => 0.9 * (-(-(d - 9.0)).exp()).exp(),
            13 => 0.9 * (-(-2.0 * (d - 7.0)).exp()).exp(),
            14 => 0.7 + 0.15 * (x / 12.0).powi(2),
            15 => 0.71259 + 0.04204 * x - 0.00175 * x * x,
            16 => {
                if d < 11.0 {
                    0.5 + 0.10 * x
                } else if d < 14.0 {
                    0.8 + 0.04 * (d - 11.0)
                } else {
                    0.94 + 0.01 * (d - 14.0)
                }
            }
            _ => unreachable!("log-odds scenarios handled above"),
        }
    }

    fn gradient(&self, d: f64) -> f64 {
        if let Some((eta, deta)) = self.logit_parts(d) {
            let p = logistic(eta);
            return p * (1.0 - p) * deta;
        }
        let x = d - 8.0;
        let sigmoid_slope = |u: f64| 0.9 * 2.0 * u.exp() / (1.0 + u.exp()).powi(2);
        match self.0.get() {
            4 => 0.0,
            9 => sigmoid_slope(23.0 - 2.0 * d),
            10 => sigmoid_slope(28.0 - 2.0 * d),
            11 => self.prob(d) * 0.5 * (-0.5 * (d - 13.0)).exp(),
            12 => self.prob(d) * (-(d - 9.0)).exp(),
            13 => self.prob(d) * 2.0 * (-2.0 * (d - 7.0)).exp(),
            14 => 0.3 * x / 144.0,
            15 => 0.04204 - 0.0035 * x,
            16 => {
                if d < 11.0 {
                    0.10
                } else if d < 14.0 {
                    0.04
                } else {
                    0.01
                }
            }
            _ => unreachable!("log-odds scenarios handled above"),
        }
    }
}

pub fn true_curve(scenario: ScenarioId, d: f64) -> Result<f64> {
    let (lo, hi) = SCENARIO_RANGE;
    if !(lo..=hi).contains(&d) {
        return Err(Error::InvalidDesign(format!(
            "scenario curves are defined on [{lo}, {hi}] days, got {d}"
        )));
    }
    Ok(TrueCurve(scenario).prob(d))
}

/// Arms, sample size and allocation of a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDesign {
    arms: Vec<f64>,
    n_total: usize,
    allocation: Vec<usize>,
}

impl TrialDesign {
    /// Equal allocation; when `n_total` does not divide evenly the remainder
    /// goes one patient each to the shortest arms.
    pub fn new(arms: Vec<f64>, n_total: usize) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::InvalidDesign("no arms".into()));
        }
        let k = arms.len();
        let base = n_total / k;
        let extra = n_total % k;
        let allocation = (0..k).map(|i| base + usize::from(i < extra)).collect();
        Self::with_allocation(arms, allocation)
    }

    pub fn with_allocation(arms: Vec<f64>, allocation: Vec<usize>) -> Result<Self> {
        if arms.len() < 2 {
            return Err(Error::InvalidDesign("at least two arms are required".into()));
        }
        if arms.len() != allocation.len() {
            return Err(Error::InvalidDesign("one allocation count per arm is required".into()));
        }
        if arms.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidDesign("arm durations must be positive".into()));
        }
        if arms.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidDesign("arm durations must be strictly increasing".into()));
        }
        if allocation.iter().any(|&n| n == 0) {
            return Err(Error::InvalidDesign("every arm needs at least one patient".into()));
        }
        let n_total = allocation.iter().sum();
        Ok(TrialDesign {
            arms,
            n_total,
            allocation,
        })
    }

    /// Seven arms from 8 to 20 days, 500 patients.
    pub fn standard() -> Self {
        Self::standard_with_n(500)
    }

    pub fn standard_with_n(n_total: usize) -> Self {
        TrialDesign::new(vec![8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0], n_total).expect("valid standard design")
    }

    pub fn arms(&self) -> &[f64] {
        &self.arms
    }

    pub fn allocation(&self) -> &[usize] {
        &self.allocation
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn d_min(&self) -> f64 {
        self.arms[0]
    }

    pub fn d_max(&self) -> f64 {
        *self.arms.last().expect("non-empty")
    }

    /// Whole-day durations in `[d_min, d_max]`.
    pub fn integer_durations(&self) -> Vec<u32> {
        let lo = self.d_min().ceil() as u32;
        let hi = self.d_max().floor() as u32;
        (lo..=hi).collect()
    }

    /// Design spanned by the distinct durations of a dataset.
    pub fn from_dataset(dataset: &TrialDataset) -> Result<Self> {
        let g = dataset.grouped();
        let allocation = g.trials.iter().map(|&t| t as usize).collect();
        Self::with_allocation(g.durations, allocation)
    }

    pub fn check_scenario_range(&self) -> Result<()> {
        let (lo, hi) = SCENARIO_RANGE;
        if self.d_min() < lo || self.d_max() > hi {
            return Err(Error::InvalidDesign(format!(
                "scenario simulation needs arms within [{lo}, {hi}] days"
            )));
        }
        Ok(())
    }
}

impl Default for TrialDesign {
    fn default() -> Self {
        Self::standard()
    }
}

/// Independent Bernoulli cures per patient at the true cure rate of each arm.
pub fn generate_dataset(scenario: ScenarioId, design: &TrialDesign, stream: RngStream) -> Result<TrialDataset> {
    design.check_scenario_range()?;
    let curve = TrueCurve(scenario);
    let mut rng = stream.rng();
    let mut records = Vec::with_capacity(design.n_total());
    for (&d, &n) in design.arms().iter().zip(design.allocation()) {
        let p = curve.prob(d);
        for _ in 0..n {
            let cure = u8::from(rng.random::<f64>() < p);
            records.push(Record { duration: d, cure });
        }
    }
    Ok(TrialDataset { records })
}

/// True optimal durations for one scenario under one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueOptimum {
    /// First crossing on the continuous curve (1e-4 day resolution or
    /// better); `None` when the condition never holds.
    pub d_star: Option<f64>,
    /// First qualifying point of the 100-point grid over the design range.
    pub d_star_grid: Option<f64>,
    /// Smallest whole-day duration meeting the condition.
    pub d_star_integer: Option<u32>,
}

pub fn true_optimal(scenario: ScenarioId, target: &EstimationTarget, design: &TrialDesign) -> TrueOptimum {
    let curve = TrueCurve(scenario);
    let d_max = design.d_max();
    TrueOptimum {
        d_star: solve_dstar(&curve, target, design).value(),
        d_star_grid: solve_dstar_on_grid(&curve, target, design.d_min(), d_max, REFERENCE_GRID_POINTS).value(),
        d_star_integer: design
            .integer_durations()
            .into_iter()
            .find(|&d| target.acceptance_threshold(&curve, d_max, f64::from(d)).holds()),
    }
}
