//! Continuous data-efficiency curves `h(x) = a / x^b + c`.
//!
//! `x` is the target subset percentage and `h(x)` the exact match it buys.
//! For an increasing curve `a < 0`, `b > 0`, and `c` is the exact-match
//! ceiling approached as data grows. The inverse
//! `h⁻¹(y) = ((y - c) / a)^(-1/b)` answers "how much target data reaches
//! `y`% exact match".
//!
//! Fitting minimizes `Σ (h(x_i) - y_i)²` with a damped Gauss-Newton
//! (Levenberg-Marquardt) iteration from three fixed starting points, keeping
//! the lowest residual. Points at `x = 0` are skipped: `h` has a pole there.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const B_MIN: f64 = 1e-3;
pub const B_MAX: f64 = 10.0;
pub const MAX_ITERATIONS: usize = 500;
pub const REL_SSE_TOL: f64 = 1e-12;
pub const GRAD_TOL: f64 = 1e-10;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_FACTOR: f64 = 10.0;
const LAMBDA_MAX: f64 = 1e20;

/// One observed (subset %, exact match %) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub subset_percent: f64,
    pub exact_match: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model_id: String,
    #[serde(default)]
    pub domain: String,
}

impl EfficiencyPoint {
    pub fn new(subset_percent: f64, exact_match: f64) -> Self {
        Self {
            subset_percent,
            exact_match,
            seed: 0,
            model_id: String::new(),
            domain: String::new(),
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=100.0).contains(&self.subset_percent) && (0.0..=100.0).contains(&self.exact_match)
    }
}

/// Fitted parameters plus diagnostics. Parameters are never rounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Range of positive `x` the model was fitted on; `None` for
    /// hand-specified models.
    pub fit_domain: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub raw: f64,
    /// `raw` clamped to [0, 100] for reporting.
    pub clamped: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub subset_percent: f64,
    /// The requirement is more than all of the target data.
    pub exceeds_full_data: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("need at least 3 distinct positive subset sizes, got {0}")]
    TooFewPoints(usize),
    #[error("point ({x}, {y}) lies outside [0, 100] x [0, 100]")]
    PointOutOfRange { x: f64, y: f64 },
    #[error("h(x) is undefined for x = {0} <= 0")]
    NonPositiveX(f64),
    #[error("{y}% is unreachable: the curve approaches its asymptote {c:.2}% from below")]
    AboveAsymptote { y: f64, c: f64 },
    #[error("{y}% is unreachable: the curve approaches its asymptote {c:.2}% from above")]
    BelowAsymptote { y: f64, c: f64 },
    #[error("the curve is flat at {c}%")]
    FlatCurve { c: f64 },
    #[error("exponent b = {0} must be positive")]
    NonPositiveExponent(f64),
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Average exact match over points sharing a subset size before fitting,
    /// instead of fitting every point jointly.
    pub average_by_subset: bool,
}

impl CurveModel {
    /// A model with given parameters and no fit diagnostics.
    pub fn from_params(a: f64, b: f64, c: f64) -> Self {
        Self {
            a,
            b,
            c,
            sse: 0.0,
            iterations: 0,
            converged: true,
            fit_domain: None,
        }
    }

    pub fn params(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    /// Shape of an increasing efficiency curve: `a < 0`, `b > 0`,
    /// `0 < c < 200`. Other fits are reported, not rejected.
    pub fn is_well_formed(&self) -> bool {
        self.a < 0.0 && self.b > 0.0 && self.c > 0.0 && self.c < 200.0
    }

    pub fn value(&self, x: f64) -> f64 {
        self.a / x.powf(self.b) + self.c
    }

    pub fn evaluate(&self, x: f64) -> Result<Evaluation, CurveError> {
        if !(x > 0.0) {
            return Err(CurveError::NonPositiveX(x));
        }
        let raw = self.value(x);
        Ok(Evaluation {
            raw,
            clamped: raw.clamp(0.0, 100.0),
        })
    }

    pub fn invert(&self, y: f64) -> Result<Inversion, CurveError> {
        if !(self.b > 0.0) {
            return Err(CurveError::NonPositiveExponent(self.b));
        }
        if self.a == 0.0 {
            return Err(CurveError::FlatCurve { c: self.c });
        }
        let ratio = (y - self.c) / self.a;
        if !(ratio > 0.0) {
            return Err(if self.a < 0.0 {
                CurveError::AboveAsymptote { y, c: self.c }
            } else {
                CurveError::BelowAsymptote { y, c: self.c }
            });
        }
        let x = ratio.powf(-1.0 / self.b);
        Ok(Inversion {
            subset_percent: x,
            exceeds_full_data: x > 100.0,
        })
    }
}

pub fn evaluate(model: &CurveModel, x: f64) -> Result<Evaluation, CurveError> {
    model.evaluate(x)
}

pub fn invert(model: &CurveModel, y: f64) -> Result<Inversion, CurveError> {
    model.invert(y)
}

/// Sum of squared residuals of `θ = [a, b, c]` over `(x, y)` pairs.
pub fn sse(theta: [f64; 3], data: &[(f64, f64)]) -> f64 {
    let [a, b, c] = theta;
    data.iter()
        .map(|&(x, y)| {
            let r = a / x.powf(b) + c - y;
            r * r
        })
        .sum()
}

/// Analytic gradient of [`sse`] with respect to `[a, b, c]`.
pub fn sse_gradient(theta: [f64; 3], data: &[(f64, f64)]) -> [f64; 3] {
    let (_, jtr) = normal_equations(theta, data);
    [2.0 * jtr[0], 2.0 * jtr[1], 2.0 * jtr[2]]
}

/// `(JᵀJ, Jᵀr)` for residuals `r_i = h(x_i) - y_i`, with Jacobian rows
/// `[x^-b, -a ln(x) x^-b, 1]`.
fn normal_equations(theta: [f64; 3], data: &[(f64, f64)]) -> (Matrix3<f64>, Vector3<f64>) {
    let [a, b, c] = theta;
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for &(x, y) in data {
        let xb = x.powf(-b);
        let row = Vector3::new(xb, -a * x.ln() * xb, 1.0);
        let r = a * xb + c - y;
        jtj += row * row.transpose();
        jtr += row * r;
    }
    (jtj, jtr)
}

fn project(theta: [f64; 3]) -> [f64; 3] {
    [theta[0], theta[1].clamp(B_MIN, B_MAX), theta[2]]
}

/// Positive-`x` points as `(x, y)` pairs, optionally averaged per `x`.
fn prepare(points: &[EfficiencyPoint], average: bool) -> Vec<(f64, f64)> {
    let positive = points.iter().filter(|p| p.subset_percent > 0.0);
    if !average {
        return positive.map(|p| (p.subset_percent, p.exact_match)).collect();
    }
    let mut groups: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for p in positive {
        let entry = groups
            .entry(p.subset_percent.to_bits())
            .or_insert((p.subset_percent, 0.0, 0));
        entry.1 += p.exact_match;
        entry.2 += 1;
    }
    groups.into_values().map(|(x, sum, n)| (x, sum / n as f64)).collect()
}

fn distinct_x(data: &[(f64, f64)]) -> usize {
    let mut xs: Vec<u64> = data.iter().map(|(x, _)| x.to_bits()).collect();
    xs.sort_unstable();
    xs.dedup();
    xs.len()
}

/// Fits `h` to every point jointly.
pub fn fit_curve(points: &[EfficiencyPoint]) -> Result<CurveModel, CurveError> {
    fit_curve_with(points, &FitOptions::default())
}

pub fn fit_curve_with(
    points: &[EfficiencyPoint],
    options: &FitOptions,
) -> Result<CurveModel, CurveError> {
    if let Some(p) = points.iter().find(|p| !p.is_valid()) {
        return Err(CurveError::PointOutOfRange {
            x: p.subset_percent,
            y: p.exact_match,
        });
    }
    let data = prepare(points, options.average_by_subset);
    let distinct = distinct_x(&data);
    if distinct < 3 {
        return Err(CurveError::TooFewPoints(distinct));
    }
    let x_min = data.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
    let x_max = data.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    let y_min = data.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    let y_max = data.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);

    if y_min == y_max {
        return Ok(CurveModel {
            a: 0.0,
            b: 1.0,
            c: y_max,
            sse: 0.0,
            iterations: 0,
            converged: true,
            fit_domain: Some((x_min, x_max)),
        });
    }

    let starts = [
        [y_min - y_max, 0.5, y_max],
        [-20.0, 0.35, 95.0],
        log_log_start(&data, y_max),
    ];
    let best = starts
        .into_iter()
        .map(|start| levenberg_marquardt(project(start), &data))
        .reduce(|best, run| if run.sse < best.sse { run } else { best })
        .expect("three starts");

    let [a, b, c] = best.theta;
    Ok(CurveModel {
        a,
        b,
        c,
        sse: best.sse,
        iterations: best.iterations,
        converged: best.converged,
        fit_domain: Some((x_min, x_max)),
    })
}

/// Start from a straight-line fit of `ln(y_max + 1 - y)` against `ln x`:
/// slope `-b`, intercept `ln(-a)`, with `c = y_max + 1`.
fn log_log_start(data: &[(f64, f64)], y_max: f64) -> [f64; 3] {
    let c = y_max + 1.0;
    let n = data.len() as f64;
    let (sx, sz, sxx, sxz) = data.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &(x, y)| {
        let lx = x.ln();
        let lz = (c - y).ln();
        (acc.0 + lx, acc.1 + lz, acc.2 + lx * lx, acc.3 + lx * lz)
    });
    let denom = n * sxx - sx * sx;
    let slope = if denom.abs() > 0.0 {
        (n * sxz - sx * sz) / denom
    } else {
        -0.5
    };
    let intercept = (sz - slope * sx) / n;
    [-intercept.exp(), -slope, c]
}

struct LmRun {
    theta: [f64; 3],
    sse: f64,
    iterations: usize,
    converged: bool,
}

/// Marquardt-scaled damping: solves `(JᵀJ + λ diag(JᵀJ)) δ = -Jᵀr`,
/// `λ` starting at 1e-3, ×10 after a rejected step and ÷10 after an accepted
/// one. `b` is projected onto `[B_MIN, B_MAX]` after every step. Each trial
/// step counts as one iteration.
fn levenberg_marquardt(start: [f64; 3], data: &[(f64, f64)]) -> LmRun {
    let mut theta = start;
    let mut current = sse(theta, data);
    let mut lambda = LAMBDA_INIT;
    let mut iterations = 0;
    let mut converged = false;

    let (mut jtj, mut jtr) = normal_equations(theta, data);
    while iterations < MAX_ITERATIONS {
        if 2.0 * jtr.norm() < GRAD_TOL || current == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;

        let mut damped = jtj;
        for i in 0..3 {
            // Floor keeps the system solvable when a Jacobian column vanishes.
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
        }
        let step = damped.lu().solve(&(-jtr));
        let candidate = step.map(|d| project([theta[0] + d[0], theta[1] + d[1], theta[2] + d[2]]));
        let trial = candidate.map(|t| (t, sse(t, data)));

        match trial {
            Some((t, s)) if s.is_finite() && s < current => {
                let rel = (current - s) / current;
                theta = t;
                current = s;
                lambda = (lambda / LAMBDA_FACTOR).max(1e-15);
                (jtj, jtr) = normal_equations(theta, data);
                if rel < REL_SSE_TOL {
                    converged = true;
                    break;
                }
            }
            _ => {
                lambda *= LAMBDA_FACTOR;
                if lambda > LAMBDA_MAX {
                    // No representable descent step remains.
                    converged = true;
                    break;
                }
            }
        }
    }
    LmRun {
        theta,
        sse: current,
        iterations,
        converged,
    }
}
