//! Norm sequences of truncated kernels and a growth-based stability verdict.
//!
//! For a horizon `T` the kernel is restricted to `[0, T]²` and its norm
//! `a(T)` is estimated by multistart ascent. Horizons share one step, so a
//! grid is a prefix of the next one and the previous maximizer can be
//! extended onto the larger grid: filling the new tail with a constant
//! sign chosen by [`extend_sign`] never lowers the objective, which makes
//! the reported sequence non-decreasing.
//!
//! The verdict of [`classify`] is a heuristic. No finite number of
//! horizons can prove that `a(T)` stays bounded.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{make_evaluator, make_matrix, KernelEvaluator, KernelParams, KernelSpec, TimeMode};
use crate::norms::norm_restarts_from;
use crate::operator::{build_grid, discretize, weighted_l1, DiscreteOperator, Grid, SignPattern};

/// Share of the output 1-norm allowed beyond the input horizon before a horizon is flagged.
pub const TAIL_FLAG_FRACTION: f64 = 0.01;

/// Relative slack tolerated when checking that `a(T)` does not decrease.
pub const MONOTONE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationConfig {
    pub horizons: Vec<f64>,
    /// Grid step; ignored in discrete mode.
    pub step: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl TruncationConfig {
    /// `count` horizons doubling from `first`.
    pub fn doubling(first: f64, count: usize, step: f64, restarts: usize, seed: u64) -> Self {
        Self {
            horizons: (0..count).map(|k| first * 2f64.powi(k as i32)).collect(),
            step,
            restarts,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthModel {
    /// `a∞ - c/T`
    Bounded,
    /// `c₁ log T + c₂`
    Logarithmic,
    /// `c₁ T^q + c₂`, `q ≥ 1/2`
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub model: GrowthModel,
    /// Sum of squared residuals.
    pub residual: f64,
    /// `[a∞, c]`, `[c₁, c₂]` or `[c₁, c₂]` depending on the model.
    pub coefficients: [f64; 2],
    /// Exponent `q` of the polynomial model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResiduals {
    pub bounded: f64,
    pub logarithmic: f64,
    pub polynomial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub classification: Classification,
    pub growth_model: GrowthFit,
    pub fit_residuals: FitResiduals,
    /// `(T, a(2T)/a(T))` for every horizon whose double is also present.
    pub doubling_ratios: Vec<(f64, f64)>,
    pub heuristic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Runner-up residual within this factor of the best one ⇒ inconclusive.
    pub tie_ratio: f64,
    pub min_horizons: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            tie_ratio: 1.5,
            min_horizons: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub kernel: String,
    pub mode: TimeMode,
    pub horizons: Vec<f64>,
    pub a_values: Vec<f64>,
    /// Certified upper bound per horizon.
    pub upper_values: Vec<f64>,
    pub converged: Vec<bool>,
    #[serde(skip)]
    pub warm_starts: Vec<SignPattern>,
    /// Share of the output 1-norm on `[T, 2T]`, continuous mode only.
    pub tail_fractions: Vec<Option<f64>>,
    pub classification: Classification,
    pub growth_model: Option<GrowthFit>,
}

impl TruncationReport {
    /// Horizons whose output carries more than [`TAIL_FLAG_FRACTION`] beyond `T`.
    pub fn tail_flags(&self) -> Vec<f64> {
        self.horizons
            .iter()
            .zip(&self.tail_fractions)
            .filter(|(_, f)| f.is_some_and(|f| f > TAIL_FLAG_FRACTION))
            .map(|(h, _)| *h)
            .collect()
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.a_values.windows(2).all(|w| w[1] >= w[0])
    }

    /// `horizon,a_value,converged` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("horizon,a_value,converged\n");
        for ((h, a), c) in self.horizons.iter().zip(&self.a_values).zip(&self.converged) {
            out.push_str(&format!("{h},{a},{c}\n"));
        }
        out
    }
}

/// Fills the tail of `new_op`'s grid with the constant sign that maximizes `‖K' u‖₁`,
/// keeping `prev` on the prefix. Ties choose `+1`.
pub fn extend_sign(prev: &SignPattern, prev_grid: &Grid, new_op: &DiscreteOperator) -> Result<SignPattern> {
    if prev.len() != prev_grid.len() {
        return Err(Error::GridMismatch(format!(
            "pattern has {} entries, grid has {} nodes",
            prev.len(),
            prev_grid.len()
        )));
    }
    if !prev_grid.is_prefix_of(new_op.grid()) {
        return Err(Error::GridMismatch(format!(
            "grid ({:?}, step {}, {} nodes) is not a prefix of ({:?}, step {}, {} nodes)",
            prev_grid.mode,
            prev_grid.step,
            prev_grid.len(),
            new_op.grid().mode,
            new_op.grid().step,
            new_op.grid().len()
        )));
    }
    let tail = new_op.dim() - prev.len();
    let mut plus = prev.clone();
    plus.extend_with(1, tail);
    let mut minus = prev.clone();
    minus.extend_with(-1, tail);
    let plus_value = new_op.output_l1_signs(&plus)?;
    let minus_value = new_op.output_l1_signs(&minus)?;
    Ok(if minus_value > plus_value { minus } else { plus })
}

enum Source {
    ClosedFormDiagonal(f64),
    Matrix(crate::matrix::SquareMatrix),
    SampledDiscrete,
    Continuous(KernelEvaluator),
}

/// Norm estimates of the kernel truncated to each horizon.
///
/// Discrete horizons are node counts. The diagonal family uses the closed
/// form `a(n) = Σ_{i ≤ n} i^-p`; explicit matrices use leading blocks.
pub fn truncation_norms(spec: &KernelSpec, cfg: &TruncationConfig) -> Result<TruncationReport> {
    validate_horizons(&cfg.horizons, spec.mode)?;
    if cfg.restarts == 0 {
        return Err(Error::InvalidParam("restarts must be >= 1".into()));
    }
    let source = match (&spec.params, spec.mode) {
        (KernelParams::Diagonal { p }, _) => Source::ClosedFormDiagonal(*p),
        (KernelParams::Matrix(m), _) => Source::Matrix(m.clone()),
        (_, TimeMode::Discrete) => Source::SampledDiscrete,
        (_, TimeMode::Continuous) => Source::Continuous(make_evaluator(spec)?),
    };
    if let Source::Continuous(_) = source {
        build_grid(cfg.horizons[0], cfg.step, TimeMode::Continuous)?;
    }

    let mut report = TruncationReport {
        kernel: spec.describe(),
        mode: spec.mode,
        horizons: cfg.horizons.clone(),
        a_values: Vec::new(),
        upper_values: Vec::new(),
        converged: Vec::new(),
        warm_starts: Vec::new(),
        tail_fractions: Vec::new(),
        classification: Classification::Inconclusive,
        growth_model: None,
    };

    if let Source::ClosedFormDiagonal(p) = source {
        let mut sum = 0.0;
        let mut done = 0usize;
        for &h in &cfg.horizons {
            let n = h as usize;
            for i in (done + 1)..=n {
                sum += (i as f64).powf(-p);
            }
            done = n;
            report.a_values.push(sum);
            report.upper_values.push(sum);
            report.converged.push(true);
            report.warm_starts.push(SignPattern::ones(n));
            report.tail_fractions.push(None);
        }
    } else {
        let mut prev: Option<(SignPattern, Grid, f64)> = None;
        for &h in &cfg.horizons {
            let (op, tail) = match &source {
                Source::Matrix(m) => {
                    let n = h as usize;
                    (DiscreteOperator::from_matrix(m.leading(n)?), None)
                }
                Source::SampledDiscrete => (DiscreteOperator::from_matrix(make_matrix(spec, h as usize)?), None),
                Source::Continuous(k) => {
                    let grid = build_grid(h, cfg.step, TimeMode::Continuous)?;
                    (discretize(k, &grid), Some(k))
                }
                Source::ClosedFormDiagonal(_) => unreachable!(),
            };
            let extra = match &prev {
                Some((pattern, grid, _)) => vec![extend_sign(pattern, grid, &op)?],
                None => Vec::new(),
            };
            let est = norm_restarts_from(&op, cfg.restarts, cfg.seed, &extra)?;
            if let Some((_, _, prev_a)) = &prev {
                if est.lower < prev_a * (1.0 - MONOTONE_TOLERANCE) {
                    return Err(Error::Internal(format!(
                        "truncated norm decreased from {prev_a} to {} at horizon {h}",
                        est.lower
                    )));
                }
            }
            let fraction = tail.map(|k| output_tail_fraction(k, op.grid(), &est.argmax));
            report.a_values.push(est.lower);
            report.upper_values.push(est.upper);
            report.converged.push(est.converged);
            report.tail_fractions.push(fraction);
            report.warm_starts.push(est.argmax.clone());
            prev = Some((est.argmax, *op.grid(), est.lower));
        }
    }

    if report.horizons.len() >= ClassifyOptions::default().min_horizons {
        let verdict = classify(&report, &ClassifyOptions::default())?;
        report.classification = verdict.classification;
        report.growth_model = Some(verdict.growth_model);
    }
    Ok(report)
}

fn validate_horizons(horizons: &[f64], mode: TimeMode) -> Result<()> {
    if horizons.is_empty() {
        return Err(Error::InvalidHorizons("no horizons given".into()));
    }
    if let Some(h) = horizons.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
        return Err(Error::InvalidHorizons(format!("horizon {h} is not positive")));
    }
    if mode == TimeMode::Discrete {
        if let Some(h) = horizons.iter().find(|h| h.fract() != 0.0) {
            return Err(Error::InvalidHorizons(format!(
                "discrete horizon {h} is not an integer node count"
            )));
        }
    }
    if horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidHorizons("horizons must be strictly increasing".into()));
    }
    Ok(())
}

/// Fraction of `‖K u‖₁`, measured on `[0, 2T]`, that falls on `[T, 2T]`.
fn output_tail_fraction(kernel: &KernelEvaluator, grid: &Grid, u: &SignPattern) -> f64 {
    let n = grid.len();
    let h = grid.step;
    let u = u.to_values();
    let rows: Vec<f64> = (0..2 * n)
        .into_par_iter()
        .map(|i| {
            let t = (i as f64 + 0.5) * h;
            (0..n).map(|j| kernel.eval(t, grid.node(j)) * h * u[j]).sum()
        })
        .collect();
    let total = weighted_l1(&rows, h);
    if total == 0.0 {
        0.0
    } else {
        weighted_l1(&rows[n..], h) / total
    }
}

/// Least-squares fit of `y ≈ c₁ x + c₂`; returns `(c₁, c₂, ssr)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ssr = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    (slope, intercept, ssr)
}

fn fit_bounded(t: &[f64], y: &[f64]) -> GrowthFit {
    let x: Vec<f64> = t.iter().map(|v| -1.0 / v).collect();
    let (c, a_inf, ssr) = linear_fit(&x, y);
    GrowthFit {
        model: GrowthModel::Bounded,
        residual: ssr,
        coefficients: [a_inf, c],
        exponent: None,
    }
}

fn fit_logarithmic(t: &[f64], y: &[f64]) -> GrowthFit {
    let x: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let (c1, c2, ssr) = linear_fit(&x, y);
    GrowthFit {
        model: GrowthModel::Logarithmic,
        residual: ssr,
        coefficients: [c1, c2],
        exponent: None,
    }
}

const Q_MIN: f64 = 0.5;
const Q_MAX: f64 = 4.0;

/// `c₁ T^q + c₂` with `q ∈ [1/2, 4]` and `c₁ ≥ 0`: grid search on `q`, then golden-section refinement.
fn fit_polynomial(t: &[f64], y: &[f64]) -> GrowthFit {
    // Work in T / max(T) to keep powers well scaled; c₁ is rescaled afterwards.
    let t_max = t.iter().cloned().fold(f64::MIN, f64::max);
    let scaled: Vec<f64> = t.iter().map(|v| v / t_max).collect();
    let eval = |q: f64| -> (f64, f64, f64) {
        let x: Vec<f64> = scaled.iter().map(|v| v.powf(q)).collect();
        let (c1, c2, ssr) = linear_fit(&x, y);
        if c1 < 0.0 {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let ssr0 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
            (0.0, mean, ssr0)
        } else {
            (c1, c2, ssr)
        }
    };
    let steps = ((Q_MAX - Q_MIN) / 0.01).round() as usize;
    let mut best_q = Q_MIN;
    let mut best_ssr = f64::INFINITY;
    for k in 0..=steps {
        let q = Q_MIN + k as f64 * 0.01;
        let ssr = eval(q).2;
        if ssr < best_ssr {
            best_ssr = ssr;
            best_q = q;
        }
    }
    let (mut lo, mut hi) = ((best_q - 0.01).max(Q_MIN), (best_q + 0.01).min(Q_MAX));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..40 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if eval(a).2 <= eval(b).2 {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mid = 0.5 * (lo + hi);
    let q = if eval(mid).2 < best_ssr { mid } else { best_q };
    let (c1, c2, ssr) = eval(q);
    GrowthFit {
        model: GrowthModel::Polynomial,
        residual: ssr,
        coefficients: [c1 / t_max.powf(q), c2],
        exponent: Some(q),
    }
}

/// `(T, a(2T)/a(T))` for horizon pairs exactly a factor two apart.
pub fn doubling_ratios(horizons: &[f64], a_values: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (i, t) in horizons.iter().enumerate() {
        if let Some(j) = horizons.iter().position(|u| *u == 2.0 * t) {
            if a_values[i] > 0.0 {
                out.push((*t, a_values[j] / a_values[i]));
            }
        }
    }
    out
}

/// Fits the three growth models to `a(T)` and picks the one with the smallest residual.
///
/// Bounded growth reads as stable, logarithmic or polynomial growth as
/// unstable. When the runner-up residual is within `tie_ratio` of the best
/// the verdict is inconclusive. A flat sequence is bounded outright.
pub fn classify(report: &TruncationReport, opts: &ClassifyOptions) -> Result<Verdict> {
    let t = &report.horizons;
    let y = &report.a_values;
    if t.len() < opts.min_horizons || y.len() != t.len() {
        return Err(Error::TooFewHorizons {
            needed: opts.min_horizons,
            got: t.len().min(y.len()),
        });
    }
    let bounded = fit_bounded(t, y);
    let logarithmic = fit_logarithmic(t, y);
    let polynomial = fit_polynomial(t, y);
    let fit_residuals = FitResiduals {
        bounded: bounded.residual,
        logarithmic: logarithmic.residual,
        polynomial: polynomial.residual,
    };
    let doubling = doubling_ratios(t, y);

    let y_max = y.iter().cloned().fold(f64::MIN, f64::max);
    let y_min = y.iter().cloned().fold(f64::MAX, f64::min);
    if y_max - y_min <= 1e-12 * y_max.abs().max(f64::MIN_POSITIVE) {
        return Ok(Verdict {
            classification: Classification::Stable,
            growth_model: bounded,
            fit_residuals,
            doubling_ratios: doubling,
            heuristic: true,
        });
    }

    let mut fits = [bounded, logarithmic, polynomial];
    fits.sort_by(|a, b| a.residual.total_cmp(&b.residual));
    let [best, runner_up, _] = fits;
    let classification = if runner_up.residual <= opts.tie_ratio * best.residual {
        Classification::Inconclusive
    } else if best.model == GrowthModel::Bounded {
        Classification::Stable
    } else {
        Classification::Unstable
    };
    Ok(Verdict {
        classification,
        growth_model: best,
        fit_residuals,
        doubling_ratios: doubling,
        heuristic: true,
    })
}
