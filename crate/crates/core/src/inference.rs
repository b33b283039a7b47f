//! Turning a fitted (or refitted) curve into an integer recommended duration.
//!
//! | method           | uncertainty from                     | cut point             |
//! |------------------|--------------------------------------|-----------------------|
//! | `conf-bands`     | pointwise band around the curve      | band crossing         |
//! | `delta`          | delta-method CI of each difference   | first passing day     |
//! | `boot-diff`      | bootstrap CI of each difference      | first passing day     |
//! | `boot-duration`  | bootstrap CI of the optimal duration | CI upper bound        |
//! | `gradient-point` | none                                 | point estimate        |
//!
//! Real-valued cut points are rounded strictly up to the next whole day,
//! except that a cut point at or below the shortest arm recommends that arm.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fp_model::{FitOptions, FittedCurve, FpAlgorithm, GroupedData, Record, TrialDataset};
use crate::rng::RngStream;
use crate::scenarios::TrialDesign;
use crate::targets::{first_crossing, solve_dstar, DStar, EstimationTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ConfBands,
    Delta,
    BootDiff,
    BootDuration,
    GradientPoint,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::ConfBands,
        Method::Delta,
        Method::BootDiff,
        Method::BootDuration,
        Method::GradientPoint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ConfBands => "conf-bands",
            Method::Delta => "delta",
            Method::BootDiff => "boot-diff",
            Method::BootDuration => "boot-duration",
            Method::GradientPoint => "gradient-point",
        }
    }

    pub fn supports(self, target: &EstimationTarget) -> bool {
        match self {
            Method::ConfBands | Method::BootDiff | Method::BootDuration => !target.is_gradient(),
            Method::Delta => target.is_difference(),
            Method::GradientPoint => target.is_gradient(),
        }
    }

    fn check(self, target: &EstimationTarget) -> Result<()> {
        if self.supports(target) {
            Ok(())
        } else {
            Err(Error::UnsupportedTarget {
                method: self.to_string(),
                target: target.to_string(),
            })
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalKind {
    Bca,
    Percentile,
}

/// Scale on which confidence bands are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandScale {
    /// `pi - z * SE(pi)` with the delta-method SE of the probability.
    #[default]
    Probability,
    /// `expit(eta - z * SE(eta))`.
    LinearPredictor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    /// Bootstrap replicates per analysis.
    pub m: usize,
    /// Interval construction; `None` uses BCa for `boot-diff` and the
    /// percentile interval for `boot-duration`.
    pub interval: Option<IntervalKind>,
    /// Two-sided confidence level.
    pub level: f64,
    pub max_retries_per_replicate: usize,
    pub jackknife_groups: usize,
    /// Require every longer duration to pass as well (`boot-diff` only).
    pub contiguous: bool,
    pub fp: FpAlgorithm,
    pub fit: FitOptions,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            m: 500,
            interval: None,
            level: 0.95,
            max_retries_per_replicate: 5,
            jackknife_groups: 50,
            contiguous: false,
            fp: FpAlgorithm::Exact2,
            fit: FitOptions::default(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidConfig("bootstrap needs at least 2 replicates".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig("confidence level must lie in (0, 1)".into()));
        }
        if self.jackknife_groups < 2 {
            return Err(Error::InvalidConfig("jackknife needs at least 2 groups".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Bootstrap fits that failed and were redrawn or dropped.
    pub boot_failures: usize,
    /// Replicates dropped after exhausting retries.
    pub boot_dropped: usize,
    /// More than 10% of replicates dropped.
    pub unreliable: bool,
    /// The target was met at no duration shorter than the control.
    pub not_attained: bool,
    /// The cut point was at or below the shortest arm.
    pub clamped_to_min: bool,
    pub degenerate_ci: bool,
    pub z0_clamped: bool,
}

/// Per-duration comparison used by `delta` and `boot-diff`.
///
/// For difference targets `estimate` is `pi(d_max) - pi(d)` and `bound` the
/// allowed loss; for ratio and fixed-rate targets `estimate` is the shortfall
/// `threshold - pi(d)` and `bound` is zero. A duration passes when
/// `upper < bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationBound {
    pub duration: u32,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub bound: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub d_recommended: u32,
    /// Real-valued optimal-duration estimate, where the method has one.
    pub d_star_hat: Option<f64>,
    /// Interval on the method's native quantity.
    pub ci: (f64, f64),
    pub method: Method,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_duration: Vec<DurationBound>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bootstrap_dstar: Vec<f64>,
}

pub fn z_quantile(level: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + level / 2.0)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Smallest whole day strictly above `cut`, within the design's range. A cut
/// at or below `d_min` recommends `d_min`.
pub fn round_up_strict(cut: f64, d_min: f64, d_max: f64) -> (u32, bool) {
    let lo = d_min.ceil() as u32;
    let hi = d_max.floor() as u32;
    if cut <= d_min {
        return (lo, true);
    }
    let next = (cut.floor() as i64 + 1).clamp(i64::from(lo), i64::from(hi));
    (next as u32, false)
}

fn rounded(cut: DStar, design: &TrialDesign, diag: &mut Diagnostics) -> u32 {
    match cut {
        DStar::Attained(d) => {
            let (day, clamped) = round_up_strict(d, design.d_min(), design.d_max());
            diag.clamped_to_min = clamped;
            day
        }
        DStar::NotAttained => {
            diag.not_attained = true;
            design.d_max().floor() as u32
        }
    }
}

/// Method 1: the first duration where the lower pointwise band reaches the
/// target threshold, rounded up.
pub fn recommend_conf_bands(
    curve: &FittedCurve,
    target: &EstimationTarget,
    design: &TrialDesign,
    level: f64,
) -> Result<Recommendation> {
    recommend_conf_bands_on(curve, target, design, level, BandScale::Probability)
}

pub fn recommend_conf_bands_on(
    curve: &FittedCurve,
    target: &EstimationTarget,
    design: &TrialDesign,
    level: f64,
    scale: BandScale,
) -> Result<Recommendation> {
    Method::ConfBands.check(target)?;
    let z = z_quantile(level);
    let control = curve.prob(design.d_max());
    let lower = |d: f64| match scale {
        BandScale::Probability => curve.prob(d) - z * curve.pointwise_se(d),
        BandScale::LinearPredictor => {
            crate::fp_model::inv_logit(curve.linear_predictor(d) - z * curve.linear_predictor_se(d))
        }
    };
    let threshold = |d: f64| target.level_threshold(control, d).expect("level target");
    let band_cut = first_crossing(design.d_min(), design.d_max(), |d| lower(d) >= threshold(d));
    let point = solve_dstar(curve, target, design);

    let mut diagnostics = Diagnostics::default();
    let d_recommended = rounded(band_cut, design, &mut diagnostics);
    let d_l = band_cut.or_max(design.d_max());
    let d_hat = point.or_max(design.d_max());
    Ok(Recommendation {
        d_recommended,
        d_star_hat: band_cut.value(),
        ci: (d_hat.min(d_l), d_hat.max(d_l)),
        method: Method::ConfBands,
        diagnostics,
        per_duration: Vec::new(),
        bootstrap_dstar: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffCi {
    pub diff: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Gradient of `pi(d1) - pi(d2)` with respect to the coefficients.
pub fn diff_jacobian(curve: &FittedCurve, d1: f64, d2: f64) -> Vec<f64> {
    let k = curve.dim();
    let (p1, p2) = (curve.prob(d1), curve.prob(d2));
    let (x1, x2) = (curve.design_row(d1), curve.design_row(d2));
    (0..k)
        .map(|j| p1 * (1.0 - p1) * x1[j] - p2 * (1.0 - p2) * x2[j])
        .collect()
}

/// Delta-method CI for `pi(d1) - pi(d2)`.
pub fn delta_diff_ci(curve: &FittedCurve, d1: f64, d2: f64, level: f64) -> DiffCi {
    let k = curve.dim();
    let j = diff_jacobian(curve, d1, d2);
    let mut var = 0.0;
    for a in 0..k {
        for b in 0..k {
            var += j[a] * curve.cov(a, b) * j[b];
        }
    }
    let se = var.max(0.0).sqrt();
    let diff = curve.prob(d1) - curve.prob(d2);
    let z = z_quantile(level);
    DiffCi {
        diff,
        se,
        lower: diff - z * se,
        upper: diff + z * se,
    }
}

fn first_passing(bounds: &[DurationBound], contiguous: bool) -> Option<u32> {
    if contiguous {
        let mut candidate = None;
        for b in bounds.iter().rev() {
            if b.passes {
                candidate = Some(b.duration);
            } else {
                break;
            }
        }
        candidate
    } else {
        bounds.iter().find(|b| b.passes).map(|b| b.duration)
    }
}

fn pick_duration(bounds: &[DurationBound], design: &TrialDesign, contiguous: bool, diag: &mut Diagnostics) -> u32 {
    let d_max = design.d_max().floor() as u32;
    match first_passing(bounds, contiguous) {
        Some(d) if d < d_max => d,
        _ => {
            diag.not_attained = true;
            d_max
        }
    }
}

/// Method 2: minimum whole-day duration whose delta-method upper bound for
/// `pi(d_max) - pi(D)` is strictly below the allowed loss at `D`.
pub fn recommend_delta(
    curve: &FittedCurve,
    target: &EstimationTarget,
    design: &TrialDesign,
    level: f64,
) -> Result<Recommendation> {
    Method::Delta.check(target)?;
    let d_max = design.d_max();
    let bounds: Vec<DurationBound> = design
        .integer_durations()
        .into_iter()
        .map(|d| {
            let ci = delta_diff_ci(curve, d_max, f64::from(d), level);
            let bound = target.allowed_loss(f64::from(d)).expect("difference target");
            DurationBound {
                duration: d,
                estimate: ci.diff,
                lower: ci.lower,
                upper: ci.upper,
                bound,
                passes: ci.upper < bound,
            }
        })
        .collect();
    let mut diagnostics = Diagnostics::default();
    let d_recommended = pick_duration(&bounds, design, false, &mut diagnostics);
    let chosen = bounds.iter().find(|b| b.duration == d_recommended).expect("duration in range");
    Ok(Recommendation {
        d_recommended,
        d_star_hat: None,
        ci: (chosen.lower, chosen.upper),
        method: Method::Delta,
        diagnostics,
        per_duration: bounds,
        bootstrap_dstar: Vec::new(),
    })
}

/// `N` draws with replacement from the `N` records.
pub fn bootstrap_resample(dataset: &TrialDataset, stream: RngStream) -> TrialDataset {
    let mut rng = stream.rng();
    let n = dataset.len();
    let records = (0..n).map(|_| dataset.records[rng.random_range(0..n)]).collect();
    TrialDataset { records }
}

/// Dataset prepared for fast grouped resampling.
struct ResampleBase {
    durations: Vec<f64>,
    arm: Vec<u16>,
    cure: Vec<u8>,
}

impl ResampleBase {
    fn new(records: &[Record]) -> Self {
        let mut durations: Vec<f64> = records.iter().map(|r| r.duration).collect();
        durations.sort_by(f64::total_cmp);
        durations.dedup();
        let arm = records
            .iter()
            .map(|r| durations.partition_point(|&d| d < r.duration) as u16)
            .collect();
        let cure = records.iter().map(|r| r.cure).collect();
        ResampleBase { durations, arm, cure }
    }

    fn group(&self, counts: impl Iterator<Item = usize>) -> GroupedData {
        let k = self.durations.len();
        let mut trials = vec![0.0; k];
        let mut cures = vec![0.0; k];
        for i in counts {
            let a = self.arm[i] as usize;
            trials[a] += 1.0;
            cures[a] += f64::from(self.cure[i]);
        }
        let mut g = GroupedData::default();
        for a in 0..k {
            if trials[a] > 0.0 {
                g.durations.push(self.durations[a]);
                g.trials.push(trials[a]);
                g.cures.push(cures[a]);
            }
        }
        g
    }

    /// Same draws as [`bootstrap_resample`] with the same stream.
    fn resample(&self, stream: RngStream) -> GroupedData {
        let mut rng = stream.rng();
        let n = self.arm.len();
        self.group((0..n).map(|_| rng.random_range(0..n)))
    }

    fn without_group(&self, group: usize, n_groups: usize) -> GroupedData {
        self.group((0..self.arm.len()).filter(|i| i % n_groups != group))
    }

    fn full(&self) -> GroupedData {
        self.group(0..self.arm.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcaInterval {
    pub lower: f64,
    pub upper: f64,
    pub z0: f64,
    pub acceleration: f64,
    pub degenerate: bool,
    pub z0_clamped: bool,
}

const Z0_LIMIT: f64 = 4.0;

/// Order statistic for probability `alpha`: the `ceil(alpha * M)`-th smallest
/// (1-based), clamped to `1..=M`.
fn order_statistic(sorted: &[f64], alpha: f64) -> f64 {
    let m = sorted.len();
    let rank = ((alpha * m as f64).ceil() as usize).clamp(1, m);
    sorted[rank - 1]
}

/// Jackknife acceleration `sum (mean - t_i)^3 / (6 (sum (mean - t_i)^2)^1.5)`.
pub fn jackknife_acceleration(jackknife: &[f64]) -> f64 {
    if jackknife.is_empty() {
        return 0.0;
    }
    let mean = jackknife.iter().sum::<f64>() / jackknife.len() as f64;
    let (mut s2, mut s3) = (0.0, 0.0);
    for t in jackknife {
        let d = mean - t;
        s2 += d * d;
        s3 += d * d * d;
    }
    if s2 <= 0.0 {
        0.0
    } else {
        s3 / (6.0 * s2.powf(1.5))
    }
}

/// BCa limits for given bias correction and acceleration.
pub fn bca_with_params(boot_estimates: &[f64], z0: f64, acceleration: f64, level: f64) -> (f64, f64) {
    let mut sorted = boot_estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let normal = std_normal();
    let adjust = |z_alpha: f64| {
        let num = z0 + z_alpha;
        normal.cdf(z0 + num / (1.0 - acceleration * num))
    };
    let z_lo = normal.inverse_cdf((1.0 - level) / 2.0);
    let z_hi = normal.inverse_cdf((1.0 + level) / 2.0);
    (order_statistic(&sorted, adjust(z_lo)), order_statistic(&sorted, adjust(z_hi)))
}

/// Bias-corrected and accelerated bootstrap interval.
pub fn bca_interval(boot_estimates: &[f64], original: f64, jackknife_estimates: &[f64], level: f64) -> BcaInterval {
    let first = boot_estimates.first().copied().unwrap_or(original);
    if boot_estimates.len() < 2 || boot_estimates.iter().all(|&b| b == first) {
        return BcaInterval {
            lower: first,
            upper: first,
            z0: 0.0,
            acceleration: 0.0,
            degenerate: true,
            z0_clamped: false,
        };
    }
    let m = boot_estimates.len() as f64;
    let below = boot_estimates.iter().filter(|&&b| b < original).count() as f64;
    let ties = boot_estimates.iter().filter(|&&b| b == original).count() as f64;
    let prop = (below + 0.5 * ties) / m;
    let (z0, z0_clamped) = if prop <= 0.0 {
        (-Z0_LIMIT, true)
    } else if prop >= 1.0 {
        (Z0_LIMIT, true)
    } else {
        let z = std_normal().inverse_cdf(prop);
        (z.clamp(-Z0_LIMIT, Z0_LIMIT), z.abs() > Z0_LIMIT)
    };
    let acceleration = jackknife_acceleration(jackknife_estimates);
    let (lower, upper) = bca_with_params(boot_estimates, z0, acceleration, level);
    BcaInterval {
        lower,
        upper,
        z0,
        acceleration,
        degenerate: false,
        z0_clamped,
    }
}

/// Linearly interpolated empirical quantile (`(n-1) p` positioning).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed percentile interval.
pub fn percentile_interval(boot_estimates: &[f64], level: f64) -> (f64, f64) {
    let mut sorted = boot_estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    (
        quantile_type7(&sorted, (1.0 - level) / 2.0),
        quantile_type7(&sorted, (1.0 + level) / 2.0),
    )
}

/// Outcome of refitting on every bootstrap replicate.
struct BootstrapRun<T> {
    values: Vec<T>,
    failures: usize,
    dropped: usize,
}

fn run_bootstrap<T, F>(base: &ResampleBase, cfg: &BootstrapConfig, stream: RngStream, f: F) -> Result<BootstrapRun<T>>
where
    T: Send,
    F: Fn(&FittedCurve) -> T + Sync,
{
    let outcomes: Vec<(Option<T>, usize)> = (0..cfg.m)
        .into_par_iter()
        .map(|m| {
            let replicate = stream.child(m as u64);
            let mut failures = 0;
            for attempt in 0..=cfg.max_retries_per_replicate {
                let data = base.resample(replicate.child(attempt as u64));
                match cfg.fp.fit(&data, &cfg.fit) {
                    Ok(curve) if curve.converged => return (Some(f(&curve)), failures),
                    _ => failures += 1,
                }
            }
            (None, failures)
        })
        .collect();
    let mut run = BootstrapRun {
        values: Vec::with_capacity(cfg.m),
        failures: 0,
        dropped: 0,
    };
    for (value, failures) in outcomes {
        run.failures += failures;
        match value {
            Some(v) => run.values.push(v),
            None => run.dropped += 1,
        }
    }
    if run.values.is_empty() {
        return Err(Error::BootstrapExhausted);
    }
    Ok(run)
}

fn jackknife<T, F>(base: &ResampleBase, cfg: &BootstrapConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&FittedCurve) -> T + Sync,
{
    let groups = cfg.jackknife_groups.min(base.arm.len());
    (0..groups)
        .into_par_iter()
        .filter_map(|g| {
            let data = base.without_group(g, groups);
            match cfg.fp.fit(&data, &cfg.fit) {
                Ok(curve) if curve.converged => Some(f(&curve)),
                _ => None,
            }
        })
        .collect::<Vec<_>>()
}

fn fill_bootstrap_diagnostics<T>(run: &BootstrapRun<T>, m: usize, diag: &mut Diagnostics) {
    diag.boot_failures = run.failures;
    diag.boot_dropped = run.dropped;
    diag.unreliable = run.dropped * 10 > m;
}

/// Comparison quantity and its pass bound at whole-day duration `d`.
fn comparison(curve: &FittedCurve, target: &EstimationTarget, d_max: f64, d: f64) -> f64 {
    let control = curve.prob(d_max);
    match target {
        EstimationTarget::RiskDifference { .. } | EstimationTarget::Frontier { .. } => control - curve.prob(d),
        other => other.level_threshold(control, d).expect("level target") - curve.prob(d),
    }
}

fn comparison_bound(target: &EstimationTarget, d: f64) -> f64 {
    target.allowed_loss(d).unwrap_or(0.0)
}

/// Method 3: bootstrap CIs for the comparison at every whole-day duration,
/// refitting the full model selection on each replicate.
pub fn recommend_boot_diff(
    dataset: &TrialDataset,
    target: &EstimationTarget,
    design: &TrialDesign,
    cfg: &BootstrapConfig,
    stream: RngStream,
) -> Result<Recommendation> {
    Method::BootDiff.check(target)?;
    cfg.validate()?;
    let base = ResampleBase::new(&dataset.records);
    let original_curve = cfg.fp.fit(&base.full(), &cfg.fit)?;
    let days = design.integer_durations();
    let d_max = design.d_max();
    let profile = |c: &FittedCurve| -> Vec<f64> {
        days.iter().map(|&d| comparison(c, target, d_max, f64::from(d))).collect()
    };
    let original = profile(&original_curve);
    let run = run_bootstrap(&base, cfg, stream, profile)?;
    let kind = cfg.interval.unwrap_or(IntervalKind::Bca);
    let jack = match kind {
        IntervalKind::Bca => jackknife(&base, cfg, profile),
        IntervalKind::Percentile => Vec::new(),
    };

    let mut diagnostics = Diagnostics::default();
    fill_bootstrap_diagnostics(&run, cfg.m, &mut diagnostics);
    let mut bounds = Vec::with_capacity(days.len());
    for (i, &d) in days.iter().enumerate() {
        let boot: Vec<f64> = run.values.iter().map(|v| v[i]).collect();
        let (lower, upper) = match kind {
            IntervalKind::Bca => {
                let jk: Vec<f64> = jack.iter().map(|v| v[i]).collect();
                let ci = bca_interval(&boot, original[i], &jk, cfg.level);
                diagnostics.z0_clamped |= ci.z0_clamped;
                (ci.lower, ci.upper)
            }
            IntervalKind::Percentile => percentile_interval(&boot, cfg.level),
        };
        let bound = comparison_bound(target, f64::from(d));
        bounds.push(DurationBound {
            duration: d,
            estimate: original[i],
            lower,
            upper,
            bound,
            passes: upper < bound,
        });
    }
    let d_recommended = pick_duration(&bounds, design, cfg.contiguous, &mut diagnostics);
    let chosen = bounds.iter().find(|b| b.duration == d_recommended).expect("duration in range");
    Ok(Recommendation {
        d_recommended,
        d_star_hat: None,
        ci: (chosen.lower, chosen.upper),
        method: Method::BootDiff,
        diagnostics,
        per_duration: bounds,
        bootstrap_dstar: Vec::new(),
    })
}

/// Method 4: bootstrap interval for the optimal duration itself; recommend
/// the first whole day above its upper limit.
pub fn recommend_boot_duration(
    dataset: &TrialDataset,
    target: &EstimationTarget,
    design: &TrialDesign,
    cfg: &BootstrapConfig,
    stream: RngStream,
) -> Result<Recommendation> {
    Method::BootDuration.check(target)?;
    cfg.validate()?;
    let base = ResampleBase::new(&dataset.records);
    let d_max = design.d_max();
    let dstar = |c: &FittedCurve| solve_dstar(c, target, design).or_max(d_max);
    let run = run_bootstrap(&base, cfg, stream, dstar)?;

    let mut diagnostics = Diagnostics::default();
    fill_bootstrap_diagnostics(&run, cfg.m, &mut diagnostics);
    let (lower, upper) = match cfg.interval.unwrap_or(IntervalKind::Percentile) {
        IntervalKind::Percentile => percentile_interval(&run.values, cfg.level),
        IntervalKind::Bca => {
            let original = dstar(&cfg.fp.fit(&base.full(), &cfg.fit)?);
            let jack = jackknife(&base, cfg, dstar);
            let ci = bca_interval(&run.values, original, &jack, cfg.level);
            diagnostics.z0_clamped = ci.z0_clamped;
            diagnostics.degenerate_ci = ci.degenerate;
            (ci.lower, ci.upper)
        }
    };
    let (d_recommended, clamped) = round_up_strict(upper, design.d_min(), d_max);
    diagnostics.clamped_to_min = clamped;
    diagnostics.not_attained = upper >= d_max;
    let mean = run.values.iter().sum::<f64>() / run.values.len() as f64;
    Ok(Recommendation {
        d_recommended,
        d_star_hat: Some(mean),
        ci: (lower, upper),
        method: Method::BootDuration,
        diagnostics,
        per_duration: Vec::new(),
        bootstrap_dstar: run.values,
    })
}

/// Gradient target: point estimate on the fitted curve, no interval.
pub fn recommend_gradient_point(
    curve: &FittedCurve,
    target: &EstimationTarget,
    design: &TrialDesign,
) -> Result<Recommendation> {
    Method::GradientPoint.check(target)?;
    let cut = solve_dstar(curve, target, design);
    let mut diagnostics = Diagnostics::default();
    let d_recommended = rounded(cut, design, &mut diagnostics);
    let point = cut.or_max(design.d_max());
    Ok(Recommendation {
        d_recommended,
        d_star_hat: cut.value(),
        ci: (point, point),
        method: Method::GradientPoint,
        diagnostics,
        per_duration: Vec::new(),
        bootstrap_dstar: Vec::new(),
    })
}

/// Fit the dataset and run `method`.
pub fn recommend(
    method: Method,
    dataset: &TrialDataset,
    target: &EstimationTarget,
    design: &TrialDesign,
    cfg: &BootstrapConfig,
    stream: RngStream,
) -> Result<Recommendation> {
    method.check(target)?;
    match method {
        Method::BootDiff => recommend_boot_diff(dataset, target, design, cfg, stream),
        Method::BootDuration => recommend_boot_duration(dataset, target, design, cfg, stream),
        _ => {
            let curve = cfg.fp.fit(&dataset.grouped(), &cfg.fit)?;
            match method {
                Method::ConfBands => recommend_conf_bands(&curve, target, design, cfg.level),
                Method::Delta => recommend_delta(&curve, target, design, cfg.level),
                _ => recommend_gradient_point(&curve, target, design),
            }
        }
    }
}
