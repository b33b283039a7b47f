//! Estimation targets and the optimal-duration solver.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp_model::FittedCurve;
use crate::scenarios::TrialDesign;

/// Resolution of the upward scan that brackets the first crossing.
pub const SCAN_STEP: f64 = 0.01;
const BISECTION_STEPS: usize = 40;

/// Anything that maps a duration to a cure probability.
pub trait DurationResponse {
    fn prob(&self, d: f64) -> f64;
    fn gradient(&self, d: f64) -> f64;
}

impl DurationResponse for FittedCurve {
    fn prob(&self, d: f64) -> f64 {
        FittedCurve::prob(self, d)
    }

    fn gradient(&self, d: f64) -> f64 {
        FittedCurve::gradient(self, d)
    }
}

impl<T: DurationResponse + ?Sized> DurationResponse for &T {
    fn prob(&self, d: f64) -> f64 {
        (**self).prob(d)
    }

    fn gradient(&self, d: f64) -> f64 {
        (**self).gradient(d)
    }
}

/// Piecewise-linear acceptable loss in cure rate as a function of duration.
///
/// Outside the knot range the nearest segment is extended linearly and the
/// result floored at zero; a single knot is a constant margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    knots: Vec<(f64, f64)>,
}

impl Frontier {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidTarget("frontier needs at least one knot".into()));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidTarget("frontier knots must be strictly increasing in duration".into()));
            }
        }
        if knots.iter().any(|&(d, loss)| !d.is_finite() || !(0.0..=1.0).contains(&loss)) {
            return Err(Error::InvalidTarget("frontier losses must lie in [0, 1]".into()));
        }
        Ok(Frontier { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn allowed_loss(&self, d: f64) -> f64 {
        let k = &self.knots;
        if k.len() == 1 {
            return k[0].1;
        }
        let seg = match k.iter().position(|&(kd, _)| kd > d) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => k.len() - 2,
        };
        let (d0, l0) = k[seg];
        let (d1, l1) = k[seg + 1];
        (l0 + (l1 - l0) * (d - d0) / (d1 - d0)).max(0.0)
    }
}

pub fn frontier_allowed_loss(frontier: &Frontier, d: f64) -> f64 {
    frontier.allowed_loss(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimationTarget {
    /// Cure rate at least `pi(d_max) - delta`.
    RiskDifference { delta: f64 },
    /// Cure rate at least `rate`.
    FixedRate { rate: f64 },
    /// Cure rate at least `ratio * pi(d_max)`.
    RiskRatio { ratio: f64 },
    /// Cure rate at least `pi(d_max) - frontier(D)`.
    Frontier { frontier: Frontier },
    /// Gradient at most `max_slope` at every longer duration.
    MaxGradient { max_slope: f64 },
}

/// Direction in which a [`Condition`] is satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    AtLeast,
    AtMost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub lhs: f64,
    pub rhs: f64,
    pub sense: Sense,
}

impl Condition {
    pub fn holds(&self) -> bool {
        match self.sense {
            Sense::AtLeast => self.lhs >= self.rhs,
            Sense::AtMost => self.lhs <= self.rhs,
        }
    }
}

impl EstimationTarget {
    pub fn risk_difference(delta: f64) -> Self {
        EstimationTarget::RiskDifference { delta }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |v: f64, what: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidTarget(format!("{what} must lie in [0, 1], got {v}")))
            }
        };
        match self {
            EstimationTarget::RiskDifference { delta } => prob(*delta, "risk difference"),
            EstimationTarget::FixedRate { rate } => prob(*rate, "fixed rate"),
            EstimationTarget::RiskRatio { ratio } => {
                if *ratio > 0.0 && *ratio <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidTarget(format!("risk ratio must lie in (0, 1], got {ratio}")))
                }
            }
            EstimationTarget::Frontier { .. } => Ok(()),
            EstimationTarget::MaxGradient { max_slope } => {
                if max_slope.is_finite() && *max_slope >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidTarget(format!("gradient cap must be non-negative, got {max_slope}")))
                }
            }
        }
    }

    pub fn is_gradient(&self) -> bool {
        matches!(self, EstimationTarget::MaxGradient { .. })
    }

    /// Whether the target compares each duration against the control rate
    /// through a loss on the difference scale.
    pub fn is_difference(&self) -> bool {
        matches!(self, EstimationTarget::RiskDifference { .. } | EstimationTarget::Frontier { .. })
    }

    /// Allowed loss `pi(d_max) - pi(d)` for difference targets.
    pub fn allowed_loss(&self, d: f64) -> Option<f64> {
        match self {
            EstimationTarget::RiskDifference { delta } => Some(*delta),
            EstimationTarget::Frontier { frontier } => Some(frontier.allowed_loss(d)),
            _ => None,
        }
    }

    /// Minimum acceptable cure rate at `d`, given the control-duration cure
    /// rate. `None` for the gradient target.
    pub fn level_threshold(&self, control_rate: f64, d: f64) -> Option<f64> {
        match self {
            EstimationTarget::RiskDifference { delta } => Some(control_rate - delta),
            EstimationTarget::FixedRate { rate } => Some(*rate),
            EstimationTarget::RiskRatio { ratio } => Some(ratio * control_rate),
            EstimationTarget::Frontier { frontier } => Some(control_rate - frontier.allowed_loss(d)),
            EstimationTarget::MaxGradient { .. } => None,
        }
    }

    /// The target's comparison at `d` on `curve`. Every target accepts when
    /// `lhs >= rhs` except the gradient cap, which accepts when `lhs <= rhs`.
    pub fn acceptance_threshold<C: DurationResponse + ?Sized>(&self, curve: &C, d_max: f64, d: f64) -> Condition {
        match self {
            EstimationTarget::MaxGradient { max_slope } => Condition {
                lhs: sup_gradient(curve, d, d_max),
                rhs: *max_slope,
                sense: Sense::AtMost,
            },
            level => Condition {
                lhs: curve.prob(d),
                rhs: level.level_threshold(curve.prob(d_max), d).expect("level target"),
                sense: Sense::AtLeast,
            },
        }
    }
}

/// Supremum of the gradient over `[d, d_max]` on a `SCAN_STEP` grid.
pub fn sup_gradient<C: DurationResponse + ?Sized>(curve: &C, d: f64, d_max: f64) -> f64 {
    let mut sup = curve.gradient(d);
    let mut x = d + SCAN_STEP;
    while x < d_max {
        sup = sup.max(curve.gradient(x));
        x += SCAN_STEP;
    }
    sup.max(curve.gradient(d_max))
}

impl fmt::Display for EstimationTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimationTarget::RiskDifference { delta } => write!(f, "risk-diff:{delta}"),
            EstimationTarget::FixedRate { rate } => write!(f, "fixed-rate:{rate}"),
            EstimationTarget::RiskRatio { ratio } => write!(f, "risk-ratio:{ratio}"),
            EstimationTarget::Frontier { frontier } => {
                write!(f, "frontier:")?;
                for (i, (d, l)) in frontier.knots().iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{d}={l}")?;
                }
                Ok(())
            }
            EstimationTarget::MaxGradient { max_slope } => write!(f, "max-grad:{max_slope}"),
        }
    }
}

impl FromStr for EstimationTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidTarget(format!("'{s}' is not of the form kind:value")))?;
        let number = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidTarget(format!("'{v}' is not a number")))
        };
        let target = match kind.trim() {
            "risk-diff" => EstimationTarget::RiskDifference { delta: number(arg)? },
            "fixed-rate" => EstimationTarget::FixedRate { rate: number(arg)? },
            "risk-ratio" => EstimationTarget::RiskRatio { ratio: number(arg)? },
            "max-grad" => EstimationTarget::MaxGradient { max_slope: number(arg)? },
            "frontier" => {
                let knots = arg
                    .split(',')
                    .map(|kv| {
                        let (d, l) = kv
                            .split_once('=')
                            .ok_or_else(|| Error::InvalidTarget(format!("frontier knot '{kv}' is not D=loss")))?;
                        Ok((number(d)?, number(l)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                EstimationTarget::Frontier { frontier: Frontier::new(knots)? }
            }
            other => return Err(Error::InvalidTarget(format!("unknown target kind '{other}'"))),
        };
        target.validate()?;
        Ok(target)
    }
}

/// Result of the optimal-duration solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "kebab-case")]
pub enum DStar {
    Attained(f64),
    /// The condition holds nowhere in `[d_min, d_max]`.
    NotAttained,
}

impl DStar {
    pub fn value(self) -> Option<f64> {
        match self {
            DStar::Attained(d) => Some(d),
            DStar::NotAttained => None,
        }
    }

    pub fn is_attained(self) -> bool {
        matches!(self, DStar::Attained(_))
    }

    /// The attained value, or `d_max` when not attained.
    pub fn or_max(self, d_max: f64) -> f64 {
        self.value().unwrap_or(d_max)
    }
}

/// Smallest `d` in `[d_min, d_max]` where `pred` first holds scanning upward:
/// `SCAN_STEP` grid then bisection on the bracketing cell.
pub fn first_crossing(d_min: f64, d_max: f64, mut pred: impl FnMut(f64) -> bool) -> DStar {
    if pred(d_min) {
        return DStar::Attained(d_min);
    }
    let steps = ((d_max - d_min) / SCAN_STEP).ceil() as usize;
    let mut lo = d_min;
    for i in 1..=steps {
        let hi = if i == steps { d_max } else { d_min + i as f64 * SCAN_STEP };
        if pred(hi) {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (a + b);
                if pred(mid) {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            return DStar::Attained(b);
        }
        lo = hi;
    }
    DStar::NotAttained
}

/// Smallest duration at which `target` holds on `curve`.
pub fn solve_dstar<C: DurationResponse + ?Sized>(curve: &C, target: &EstimationTarget, design: &TrialDesign) -> DStar {
    solve_dstar_range(curve, target, design.d_min(), design.d_max())
}

pub fn solve_dstar_range<C: DurationResponse + ?Sized>(curve: &C, target: &EstimationTarget, d_min: f64, d_max: f64) -> DStar {
    match target {
        EstimationTarget::MaxGradient { max_slope } => {
            // Suffix maxima over the scan grid make the sup O(1) per query.
            let steps = ((d_max - d_min) / SCAN_STEP).ceil() as usize;
            let grid: Vec<f64> = (0..=steps)
                .map(|i| if i == steps { d_max } else { d_min + i as f64 * SCAN_STEP })
                .collect();
            let mut suffix: Vec<f64> = grid.iter().map(|&x| curve.gradient(x)).collect();
            for i in (0..suffix.len() - 1).rev() {
                suffix[i] = suffix[i].max(suffix[i + 1]);
            }
            let sup_from = |d: f64| {
                let next = grid.partition_point(|&g| g <= d);
                let tail = suffix.get(next).copied().unwrap_or(f64::NEG_INFINITY);
                curve.gradient(d).max(tail)
            };
            first_crossing(d_min, d_max, |d| sup_from(d) <= *max_slope)
        }
        level => {
            let control = curve.prob(d_max);
            first_crossing(d_min, d_max, |d| {
                curve.prob(d) >= level.level_threshold(control, d).expect("level target")
            })
        }
    }
}

/// First point of an `n`-point equally spaced grid over `[d_min, d_max]` at
/// which the target holds. This is the convention behind published
/// "true minimum duration" tables.
pub fn solve_dstar_on_grid<C: DurationResponse + ?Sized>(
    curve: &C,
    target: &EstimationTarget,
    d_min: f64,
    d_max: f64,
    n: usize,
) -> DStar {
    let step = (d_max - d_min) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { d_max } else { d_min + i as f64 * step })
        .find(|&d| target.acceptance_threshold(curve, d_max, d).holds())
        .map_or(DStar::NotAttained, DStar::Attained)
}
