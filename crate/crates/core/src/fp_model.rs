//! Fractional-polynomial logistic regression of cure on duration.
//!
//! A model with powers `(p1, p2)` has linear predictor
//! `a + b1 * f(D; p1) + b2 * g(D; p2)` where `f(D; p) = D^p` (`ln D` for
//! `p = 0`) and a repeated power `p1 == p2` contributes `f(D; p) * ln D` as
//! its second term. Fitting is maximum likelihood by IRLS on grouped binomial
//! counts, which gives the same estimate and deviance as the per-patient
//! Bernoulli likelihood at a fraction of the cost.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::linalg;

/// Candidate power set used by both selection algorithms.
pub const DEFAULT_POWERS: [f64; 8] = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0];

/// Powers of a fitted model. `Fp2` always stores `p1 <= p2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FpPowers {
    /// Intercept only; duration dropped.
    Null,
    /// One FP term. `Fp1 { p: 1.0 }` is the linear model.
    Fp1 { p: f64 },
    Fp2 { p1: f64, p2: f64 },
}

impl FpPowers {
    pub fn fp2(a: f64, b: f64) -> Self {
        if a <= b {
            FpPowers::Fp2 { p1: a, p2: b }
        } else {
            FpPowers::Fp2 { p1: b, p2: a }
        }
    }

    pub fn fp1(p: f64) -> Self {
        FpPowers::Fp1 { p }
    }

    pub fn linear() -> Self {
        FpPowers::Fp1 { p: 1.0 }
    }

    pub fn n_terms(&self) -> usize {
        match self {
            FpPowers::Null => 0,
            FpPowers::Fp1 { .. } => 1,
            FpPowers::Fp2 { .. } => 2,
        }
    }

    pub fn n_coef(&self) -> usize {
        1 + self.n_terms()
    }

    pub fn label(&self) -> String {
        match self {
            FpPowers::Null => "null".to_string(),
            FpPowers::Fp1 { p } if *p == 1.0 => "linear".to_string(),
            FpPowers::Fp1 { p } => format!("FP1({p})"),
            FpPowers::Fp2 { p1, p2 } => format!("FP2({p1},{p2})"),
        }
    }

    /// All canonical FP2 pairs over `set`: repeated and distinct, `p1 <= p2`,
    /// in lexicographic order of the set's own ordering.
    pub fn fp2_pairs(set: &[f64]) -> Vec<FpPowers> {
        let mut sorted = set.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut out = Vec::with_capacity(sorted.len() * (sorted.len() + 1) / 2);
        for i in 0..sorted.len() {
            for j in i..sorted.len() {
                out.push(FpPowers::Fp2 { p1: sorted[i], p2: sorted[j] });
            }
        }
        out
    }
}

/// `D^p`, or `ln D` when `p == 0`.
pub fn fp_transform(d: f64, p: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDuration(d));
    }
    Ok(transform_unchecked(d, p))
}

#[inline]
fn transform_unchecked(d: f64, p: f64) -> f64 {
    if p == 0.0 {
        d.ln()
    } else if p == 1.0 {
        d
    } else if p == 0.5 {
        d.sqrt()
    } else {
        d.powf(p)
    }
}

#[inline]
fn transform_derivative(d: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0 / d
    } else {
        p * d.powf(p - 1.0)
    }
}

/// Design row at `d`: intercept then one entry per FP term.
fn fill_row(d: f64, powers: &FpPowers, row: &mut [f64]) {
    row[0] = 1.0;
    match *powers {
        FpPowers::Null => {}
        FpPowers::Fp1 { p } => row[1] = transform_unchecked(d, p),
        FpPowers::Fp2 { p1, p2 } => {
            let f1 = transform_unchecked(d, p1);
            row[1] = f1;
            row[2] = if p1 == p2 { f1 * d.ln() } else { transform_unchecked(d, p2) };
        }
    }
}

/// d/dD of each design-row entry.
fn fill_row_derivative(d: f64, powers: &FpPowers, row: &mut [f64]) {
    row[0] = 0.0;
    match *powers {
        FpPowers::Null => {}
        FpPowers::Fp1 { p } => row[1] = transform_derivative(d, p),
        FpPowers::Fp2 { p1, p2 } => {
            let df1 = transform_derivative(d, p1);
            row[1] = df1;
            row[2] = if p1 == p2 {
                df1 * d.ln() + transform_unchecked(d, p1) / d
            } else {
                transform_derivative(d, p2)
            };
        }
    }
}

/// Row-major dense design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged design matrix");
        DesignMatrix {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

pub fn build_design_matrix(durations: &[f64], powers: &FpPowers) -> Result<DesignMatrix> {
    let cols = powers.n_coef();
    let mut data = vec![0.0; durations.len() * cols];
    for (i, &d) in durations.iter().enumerate() {
        if !(d > 0.0) {
            return Err(Error::NonPositiveDuration(d));
        }
        fill_row(d, powers, &mut data[i * cols..(i + 1) * cols]);
    }
    Ok(DesignMatrix {
        rows: durations.len(),
        cols,
        data,
    })
}

/// IRLS controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Converged when the largest coefficient step falls below this.
    pub tol: f64,
    /// Fitted probabilities are clamped to `[prob_clamp, 1 - prob_clamp]`.
    pub prob_clamp: f64,
    /// Added to the information diagonal.
    pub ridge: f64,
    /// Linear predictor magnitude treated as separation.
    pub eta_limit: f64,
    /// Durations are divided by this before transformation.
    pub scale: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 50,
            tol: 1e-8,
            prob_clamp: 1e-10,
            ridge: 1e-8,
            eta_limit: 30.0,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlsFit {
    pub coef: Vec<f64>,
    /// Row-major `coef.len()` square covariance (inverse Fisher information).
    pub covariance: Vec<f64>,
    pub deviance: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[inline]
pub(crate) fn inv_logit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli-logit maximum likelihood for per-patient binary outcomes.
pub fn fit_logistic_irls(x: &DesignMatrix, y: &[f64]) -> Result<IrlsFit> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            rows: x.rows(),
            outcomes: y.len(),
        });
    }
    let trials = vec![1.0; y.len()];
    fit_logistic_grouped(x, &trials, y, &FitOptions::default())
}

fn grouped_deviance(eta: &[f64], trials: &[f64], cures: &[f64], clamp: f64) -> f64 {
    let mut ll = 0.0;
    for i in 0..eta.len() {
        let p = inv_logit(eta[i]).clamp(clamp, 1.0 - clamp);
        if cures[i] > 0.0 {
            ll += cures[i] * p.ln();
        }
        let fails = trials[i] - cures[i];
        if fails > 0.0 {
            ll += fails * (1.0 - p).ln();
        }
    }
    -2.0 * ll
}

/// Binomial-logit maximum likelihood on grouped counts (`cures[i]` successes
/// out of `trials[i]` at design row `i`).
pub fn fit_logistic_grouped(
    x: &DesignMatrix,
    trials: &[f64],
    cures: &[f64],
    opts: &FitOptions,
) -> Result<IrlsFit> {
    let n = x.rows();
    let k = x.cols();
    if trials.len() != n || cures.len() != n {
        return Err(Error::DimensionMismatch {
            rows: n,
            outcomes: cures.len(),
        });
    }

    // Column equilibration keeps D^3 ln D and D^-2 on the same footing; the
    // estimates are mapped back to the original columns at the end.
    let mut col_scale = vec![1.0; k];
    for (j, s) in col_scale.iter_mut().enumerate() {
        let m = (0..n).map(|i| x.get(i, j).abs()).fold(0.0, f64::max);
        if m > 0.0 && m.is_finite() {
            *s = m;
        }
    }
    let z: Vec<f64> = (0..n * k).map(|idx| x.data[idx] / col_scale[idx % k]).collect();

    let total: f64 = trials.iter().sum();
    let mean = (cures.iter().sum::<f64>() / total).clamp(opts.prob_clamp, 1.0 - opts.prob_clamp);
    let mut beta = vec![0.0; k];
    beta[0] = (mean / (1.0 - mean)).ln();

    let predictor = |b: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = (0..k).map(|j| z[i * k + j] * b[j]).sum();
        }
    };

    let mut eta = vec![0.0; n];
    predictor(&beta, &mut eta);
    let mut dev = grouped_deviance(&eta, trials, cures, opts.prob_clamp);
    let mut converged = false;
    let mut diverged = false;
    let mut iterations = 0;
    let mut info = vec![0.0; k * k];
    let mut score = vec![0.0; k];
    let mut trial_beta = vec![0.0; k];
    let mut trial_eta = vec![0.0; n];

    while iterations < opts.max_iter {
        iterations += 1;
        info.iter_mut().for_each(|v| *v = 0.0);
        score.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let p = inv_logit(eta[i]).clamp(opts.prob_clamp, 1.0 - opts.prob_clamp);
            let w = trials[i] * p * (1.0 - p);
            let r = cures[i] - trials[i] * p;
            let zi = &z[i * k..(i + 1) * k];
            for a in 0..k {
                score[a] += zi[a] * r;
                for b in 0..=a {
                    info[a * k + b] += w * zi[a] * zi[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                info[b * k + a] = info[a * k + b];
            }
            info[a * k + a] += opts.ridge;
        }
        let chol = linalg::cholesky(&info, k).ok_or(Error::SingularInformation)?;
        let step = linalg::cholesky_solve(&chol, k, &score);

        // Step halving guards against overshoot near separation.
        let mut t = 1.0;
        loop {
            for j in 0..k {
                trial_beta[j] = beta[j] + t * step[j];
            }
            predictor(&trial_beta, &mut trial_eta);
            let trial_dev = grouped_deviance(&trial_eta, trials, cures, opts.prob_clamp);
            if trial_dev <= dev + 1e-9 * (1.0 + dev.abs()) || t < 1e-3 {
                dev = trial_dev;
                break;
            }
            t *= 0.5;
        }
        let max_step = step.iter().map(|s| (t * s).abs()).fold(0.0, f64::max);
        beta.copy_from_slice(&trial_beta);
        eta.copy_from_slice(&trial_eta);

        if !beta.iter().all(|b| b.is_finite()) || eta.iter().any(|e| e.abs() > opts.eta_limit) {
            diverged = true;
            break;
        }
        if max_step < opts.tol {
            converged = true;
            break;
        }
    }

    // Covariance at the final iterate.
    info.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        let p = inv_logit(eta[i]).clamp(opts.prob_clamp, 1.0 - opts.prob_clamp);
        let w = trials[i] * p * (1.0 - p);
        let zi = &z[i * k..(i + 1) * k];
        for a in 0..k {
            for b in 0..k {
                info[a * k + b] += w * zi[a] * zi[b];
            }
        }
    }
    let cov_z = match linalg::spd_inverse(&info, k) {
        Some(c) => c,
        None => {
            for a in 0..k {
                info[a * k + a] += opts.ridge;
            }
            linalg::spd_inverse(&info, k).ok_or(Error::SingularInformation)?
        }
    };
    let coef: Vec<f64> = beta.iter().zip(&col_scale).map(|(b, s)| b / s).collect();
    let mut covariance = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            covariance[a * k + b] = cov_z[a * k + b] / (col_scale[a] * col_scale[b]);
        }
    }

    Ok(IrlsFit {
        coef,
        covariance,
        deviance: dev,
        converged: converged && !diverged,
        iterations,
    })
}

/// One patient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub duration: f64,
    pub cure: u8,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialDataset {
    pub records: Vec<Record>,
}

impl TrialDataset {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if !(r.duration > 0.0) || !r.duration.is_finite() {
                return Err(Error::MalformedRow {
                    row: i + 1,
                    message: format!("duration must be positive, got {}", r.duration),
                });
            }
            if r.cure > 1 {
                return Err(Error::MalformedRow {
                    row: i + 1,
                    message: format!("cure must be 0 or 1, got {}", r.cure),
                });
            }
        }
        Ok(TrialDataset { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn grouped(&self) -> GroupedData {
        GroupedData::from_records(&self.records)
    }

    pub fn distinct_durations(&self) -> Vec<f64> {
        self.grouped().durations
    }
}

/// Cure counts per distinct duration, sorted by duration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupedData {
    pub durations: Vec<f64>,
    pub trials: Vec<f64>,
    pub cures: Vec<f64>,
}

impl GroupedData {
    pub fn from_records(records: &[Record]) -> Self {
        let mut pairs: Vec<(f64, u8)> = records.iter().map(|r| (r.duration, r.cure)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut g = GroupedData::default();
        for (d, c) in pairs {
            if g.durations.last() != Some(&d) {
                g.durations.push(d);
                g.trials.push(0.0);
                g.cures.push(0.0);
            }
            *g.trials.last_mut().unwrap() += 1.0;
            *g.cures.last_mut().unwrap() += f64::from(c);
        }
        g
    }

    pub fn n_obs(&self) -> usize {
        self.trials.iter().sum::<f64>() as usize
    }

    fn require_distinct(&self, needed: usize) -> Result<()> {
        if self.durations.len() < needed {
            return Err(Error::Unidentifiable {
                found: self.durations.len(),
                needed,
            });
        }
        Ok(())
    }
}

/// A fitted duration-response curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedCurve {
    pub powers: FpPowers,
    pub coef: Vec<f64>,
    /// Row-major square covariance over `coef`.
    pub covariance: Vec<f64>,
    pub deviance: f64,
    pub converged: bool,
    pub n_obs: usize,
    /// Durations are divided by this before transformation.
    pub scale: f64,
}

impl FittedCurve {
    /// A curve with the given coefficients and no sampling uncertainty.
    pub fn from_coefficients(powers: FpPowers, coef: Vec<f64>) -> Self {
        assert_eq!(coef.len(), powers.n_coef(), "coefficient count does not match powers");
        let k = coef.len();
        FittedCurve {
            powers,
            coef,
            covariance: vec![0.0; k * k],
            deviance: 0.0,
            converged: true,
            n_obs: 0,
            scale: 1.0,
        }
    }

    pub fn with_covariance(mut self, covariance: Vec<f64>) -> Self {
        assert_eq!(covariance.len(), self.coef.len() * self.coef.len());
        self.covariance = covariance;
        self
    }

    pub fn dim(&self) -> usize {
        self.coef.len()
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.covariance[i * self.dim() + j]
    }

    /// Design row at `d` (on the curve's own scale).
    pub fn design_row(&self, d: f64) -> [f64; 3] {
        let mut row = [0.0; 3];
        fill_row(d / self.scale, &self.powers, &mut row);
        row
    }

    /// d/dD of the design row.
    pub fn design_row_derivative(&self, d: f64) -> [f64; 3] {
        let mut row = [0.0; 3];
        fill_row_derivative(d / self.scale, &self.powers, &mut row);
        for v in row.iter_mut() {
            *v /= self.scale;
        }
        row
    }

    pub fn linear_predictor(&self, d: f64) -> f64 {
        let row = self.design_row(d);
        self.coef.iter().zip(row.iter()).map(|(c, x)| c * x).sum()
    }

    pub fn prob(&self, d: f64) -> f64 {
        inv_logit(self.linear_predictor(d))
    }

    pub fn gradient(&self, d: f64) -> f64 {
        let p = self.prob(d);
        let drow = self.design_row_derivative(d);
        let deta: f64 = self.coef.iter().zip(drow.iter()).map(|(c, x)| c * x).sum();
        p * (1.0 - p) * deta
    }

    /// Standard error of the linear predictor at `d`.
    pub fn linear_predictor_se(&self, d: f64) -> f64 {
        let row = self.design_row(d);
        linalg::quad_form(&self.covariance, self.dim(), &row[..self.dim()]).max(0.0).sqrt()
    }

    /// Delta-method standard error of the fitted probability at `d`.
    pub fn pointwise_se(&self, d: f64) -> f64 {
        let p = self.prob(d);
        p * (1.0 - p) * self.linear_predictor_se(d)
    }
}

pub fn curve_eval(curve: &FittedCurve, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDuration(d));
    }
    Ok(curve.prob(d))
}

pub fn curve_gradient(curve: &FittedCurve, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDuration(d));
    }
    Ok(curve.gradient(d))
}

pub fn pointwise_se(curve: &FittedCurve, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDuration(d));
    }
    Ok(curve.pointwise_se(d))
}

/// Fit a model with fixed powers to grouped data.
pub fn fit_powers(data: &GroupedData, powers: FpPowers, opts: &FitOptions) -> Result<FittedCurve> {
    let scaled: Vec<f64> = data.durations.iter().map(|d| d / opts.scale).collect();
    let x = build_design_matrix(&scaled, &powers)?;
    let fit = fit_logistic_grouped(&x, &data.trials, &data.cures, opts)?;
    Ok(FittedCurve {
        powers,
        coef: fit.coef,
        covariance: fit.covariance,
        deviance: fit.deviance,
        converged: fit.converged,
        n_obs: data.n_obs(),
        scale: opts.scale,
    })
}

/// Deviance ties closer than this keep the earlier canonical candidate.
const TIE_TOLERANCE: f64 = 1e-8;

fn best_of(data: &GroupedData, candidates: &[FpPowers], opts: &FitOptions) -> Result<FittedCurve> {
    let mut best: Option<FittedCurve> = None;
    for &powers in candidates {
        let Ok(fit) = fit_powers(data, powers, opts) else { continue };
        if !fit.converged {
            continue;
        }
        if best.as_ref().is_none_or(|b| fit.deviance < b.deviance - TIE_TOLERANCE) {
            best = Some(fit);
        }
    }
    best.ok_or(Error::NoConvergedFit)
}

/// Modified algorithm: exactly two FP terms, best of all canonical pairs.
pub fn select_fp2_exhaustive(dataset: &TrialDataset) -> Result<FittedCurve> {
    select_fp2_grouped(&dataset.grouped(), &DEFAULT_POWERS, &FitOptions::default())
}

pub fn select_fp2_grouped(data: &GroupedData, power_set: &[f64], opts: &FitOptions) -> Result<FittedCurve> {
    data.require_distinct(3)?;
    best_of(data, &FpPowers::fp2_pairs(power_set), opts)
}

/// Standard closed-test function selection at `sig_level`.
pub fn select_fp_closed_test(dataset: &TrialDataset, sig_level: f64) -> Result<FittedCurve> {
    select_closed_test_grouped(&dataset.grouped(), sig_level, &DEFAULT_POWERS, &FitOptions::default())
}

/// Outcome of each step of the closed test, for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedTestTrace {
    pub p_vs_null: f64,
    pub p_vs_linear: Option<f64>,
    pub p_vs_fp1: Option<f64>,
}

pub fn closed_test_trace(
    data: &GroupedData,
    sig_level: f64,
    power_set: &[f64],
    opts: &FitOptions,
) -> Result<(FittedCurve, ClosedTestTrace)> {
    data.require_distinct(3)?;
    let fp2 = best_of(data, &FpPowers::fp2_pairs(power_set), opts)?;
    let p_value = |dev_reduced: f64, df: f64| {
        let diff = (dev_reduced - fp2.deviance).max(0.0);
        1.0 - ChiSquared::new(df).expect("positive df").cdf(diff)
    };
    let null = fit_powers(data, FpPowers::Null, opts)?;
    let p_null = p_value(null.deviance, 4.0);
    let mut trace = ClosedTestTrace {
        p_vs_null: p_null,
        p_vs_linear: None,
        p_vs_fp1: None,
    };
    if p_null > sig_level {
        return Ok((null, trace));
    }
    let linear = fit_powers(data, FpPowers::linear(), opts)?;
    let p_lin = p_value(linear.deviance, 3.0);
    trace.p_vs_linear = Some(p_lin);
    if p_lin > sig_level && linear.converged {
        return Ok((linear, trace));
    }
    let fp1_candidates: Vec<FpPowers> = {
        let mut s = power_set.to_vec();
        s.sort_by(f64::total_cmp);
        s.into_iter().map(FpPowers::fp1).collect()
    };
    let fp1 = best_of(data, &fp1_candidates, opts)?;
    let p_fp1 = p_value(fp1.deviance, 2.0);
    trace.p_vs_fp1 = Some(p_fp1);
    if p_fp1 > sig_level {
        return Ok((fp1, trace));
    }
    Ok((fp2, trace))
}

pub fn select_closed_test_grouped(
    data: &GroupedData,
    sig_level: f64,
    power_set: &[f64],
    opts: &FitOptions,
) -> Result<FittedCurve> {
    closed_test_trace(data, sig_level, power_set, opts).map(|(c, _)| c)
}

/// Which selection algorithm to run on each (re)fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum FpAlgorithm {
    /// Exactly two terms, minimal deviance over all pairs.
    Exact2,
    /// Up to two terms via the closed test.
    ClosedTest { sig_level: f64 },
}

impl Default for FpAlgorithm {
    fn default() -> Self {
        FpAlgorithm::Exact2
    }
}

impl FpAlgorithm {
    pub fn fit(&self, data: &GroupedData, opts: &FitOptions) -> Result<FittedCurve> {
        match *self {
            FpAlgorithm::Exact2 => select_fp2_grouped(data, &DEFAULT_POWERS, opts),
            FpAlgorithm::ClosedTest { sig_level } => {
                select_closed_test_grouped(data, sig_level, &DEFAULT_POWERS, opts)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FpAlgorithm::Exact2 => "exact2",
            FpAlgorithm::ClosedTest { .. } => "closed-test",
        }
    }
}

impl std::str::FromStr for FpAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact2" => Ok(FpAlgorithm::Exact2),
            "closed-test" => Ok(FpAlgorithm::ClosedTest { sig_level: 0.05 }),
            other => Err(Error::InvalidConfig(format!(
                "unknown FP algorithm '{other}' (expected exact2 or closed-test)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_examples() {
        assert_eq!(fp_transform(10.0, 1.0).unwrap(), 10.0);
        assert_eq!(fp_transform(1.0, 0.0).unwrap(), 0.0);
        // 8^-0.5 = 1/(2*sqrt 2)
        assert!((fp_transform(8.0, -0.5).unwrap() - 0.353_553_390_593_273_8).abs() < 1e-15);
        assert!(matches!(fp_transform(0.0, 1.0), Err(Error::NonPositiveDuration(_))));
        assert!(fp_transform(-3.0, 2.0).is_err());
    }

    #[test]
    fn design_matrix_examples() {
        let x = build_design_matrix(&[8.0, 20.0], &FpPowers::linear()).unwrap();
        assert_eq!(x.row(0), &[1.0, 8.0]);
        assert_eq!(x.row(1), &[1.0, 20.0]);

        let x = build_design_matrix(&[std::f64::consts::E], &FpPowers::fp2(0.0, 0.0)).unwrap();
        for (a, b) in x.row(0).iter().zip([1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }

        let x = build_design_matrix(&[10.0], &FpPowers::fp2(2.0, 1.0)).unwrap();
        assert_eq!(x.row(0), &[1.0, 10.0, 100.0]);

        assert!(build_design_matrix(&[8.0, -1.0], &FpPowers::linear()).is_err());
    }

    #[test]
    fn powers_are_canonical() {
        assert_eq!(FpPowers::fp2(3.0, -2.0), FpPowers::fp2(-2.0, 3.0));
        let pairs = FpPowers::fp2_pairs(&DEFAULT_POWERS);
        assert_eq!(pairs.len(), 36);
        let repeated = pairs
            .iter()
            .filter(|p| matches!(p, FpPowers::Fp2 { p1, p2 } if p1 == p2))
            .count();
        assert_eq!(repeated, 8);
    }

    #[test]
    fn intercept_only_is_logit_of_mean() {
        let y: Vec<f64> = (0..100).map(|i| if i < 70 { 1.0 } else { 0.0 }).collect();
        let x = DesignMatrix::from_rows(vec![vec![1.0]; 100]);
        let fit = fit_logistic_irls(&x, &y).unwrap();
        assert!(fit.converged);
        assert!((fit.coef[0] - (0.7f64 / 0.3).ln()).abs() < 1e-9);
        // var(logit p̂) = 1 / (n p (1-p))
        assert!((fit.covariance[0] - 1.0 / (100.0 * 0.21)).abs() < 1e-9);
    }

    #[test]
    fn all_cured_flags_non_convergence() {
        let y = vec![1.0; 50];
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![1.0, 8.0 + (i % 7) as f64 * 2.0]).collect();
        let fit = fit_logistic_irls(&DesignMatrix::from_rows(rows.clone()), &y).unwrap();
        assert!(!fit.converged);
        for r in &rows {
            let eta = fit.coef[0] + fit.coef[1] * r[1];
            let p = inv_logit(eta);
            assert!(p > 0.5 && p <= 1.0);
        }
    }

    #[test]
    fn grouped_matches_bernoulli() {
        let durations = [8.0, 8.0, 8.0, 14.0, 14.0, 20.0, 20.0, 20.0, 20.0];
        let cures = [0u8, 1, 0, 1, 0, 1, 1, 0, 1];
        let records: Vec<Record> = durations
            .iter()
            .zip(cures)
            .map(|(&duration, cure)| Record { duration, cure })
            .collect();
        let grouped = GroupedData::from_records(&records);
        assert_eq!(grouped.durations, vec![8.0, 14.0, 20.0]);
        let opts = FitOptions::default();
        let g = fit_powers(&grouped, FpPowers::linear(), &opts).unwrap();
        let x = build_design_matrix(&durations, &FpPowers::linear()).unwrap();
        let y: Vec<f64> = cures.iter().map(|&c| f64::from(c)).collect();
        let b = fit_logistic_irls(&x, &y).unwrap();
        for (a, c) in g.coef.iter().zip(&b.coef) {
            assert!((a - c).abs() < 1e-8);
        }
        assert!((g.deviance - b.deviance).abs() < 1e-8);
    }

    #[test]
    fn gradient_matches_finite_difference_for_repeated_and_log_powers() {
        for powers in [FpPowers::fp2(0.0, 0.0), FpPowers::fp2(-0.5, 3.0), FpPowers::fp2(2.0, 2.0), FpPowers::fp1(0.0)] {
            let coef = match powers.n_coef() {
                2 => vec![-1.0, 0.9],
                _ => vec![0.3, 0.02, -0.01],
            };
            let curve = FittedCurve::from_coefficients(powers, coef);
            for d in [8.0, 11.3, 17.0, 20.0] {
                let h = 1e-5;
                let fd = (curve.prob(d + h) - curve.prob(d - h)) / (2.0 * h);
                let an = curve.gradient(d);
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-8), "{powers:?} at {d}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn zero_coefficients_give_half() {
        let curve = FittedCurve::from_coefficients(FpPowers::fp2(1.0, 2.0), vec![0.0; 3]);
        assert_eq!(curve_eval(&curve, 13.0).unwrap(), 0.5);
        assert_eq!(curve_gradient(&curve, 13.0).unwrap(), 0.0);
        assert_eq!(pointwise_se(&curve, 13.0).unwrap(), 0.0);
        assert!(curve_eval(&curve, 0.0).is_err());
    }

    #[test]
    fn scenario_one_truth_at_twenty() {
        // logit(pi) = 0.85 + 0.17 (D - 8) = -0.51 + 0.17 D
        let curve = FittedCurve::from_coefficients(FpPowers::linear(), vec![-0.51, 0.17]);
        assert!((curve.prob(20.0) - 0.947_3).abs() < 5e-5);
        assert!((curve.gradient(8.0) - 0.035_66).abs() < 5e-5);
        assert!(curve.prob(10.0) < curve.prob(12.0));
    }

    #[test]
    fn two_arm_dataset_is_rejected() {
        let records: Vec<Record> = (0..40)
            .map(|i| Record { duration: if i % 2 == 0 { 8.0 } else { 20.0 }, cure: (i % 3 != 0) as u8 })
            .collect();
        let ds = TrialDataset::new(records).unwrap();
        assert!(matches!(select_fp2_exhaustive(&ds), Err(Error::Unidentifiable { found: 2, .. })));
    }

    #[test]
    fn dataset_validation_reports_row() {
        let mut records = vec![Record { duration: 8.0, cure: 1 }; 20];
        records[16].duration = -2.0;
        match TrialDataset::new(records) {
            Err(Error::MalformedRow { row, .. }) => assert_eq!(row, 17),
            other => panic!("unexpected {other:?}"),
        }
    }
}
