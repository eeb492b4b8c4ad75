//! Estimation of the (∞,1) operator norm `sup ‖K u‖₁` over sign patterns.
//!
//! Four routes are provided:
//!
//! * [`norm_exact`] enumerates every sign pattern (Gray-code order, one
//!   column update per pattern) and is limited to small grids;
//! * [`norm_alternating`] climbs the bilinear form `sᵀ W K u` by
//!   alternately setting `s = sign(W K u)` and `u = sign(Kᵀ W s)`;
//! * [`norm_restarts`] runs the ascent from several seeded starts;
//! * [`norm_upper`] is the entrywise bound `Σ w |K_ij|`, valid for every
//!   `u` with `‖u‖∞ ≤ 1`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::operator::{sup_norm, weighted_l1, DiscreteOperator, SignPattern};
use crate::rng;

/// Hard ceiling on exhaustive enumeration (2^24 patterns).
pub const ENUMERATION_LIMIT: usize = 25;

/// Half-step budget of the alternating ascent, per node.
pub const HALF_STEPS_PER_NODE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Alternating,
    Restarts,
    BoundOnly,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Alternating => "alternating",
            Method::Restarts => "restarts",
            Method::BoundOnly => "bound_only",
        })
    }
}

/// Certified bracket on the operator norm.
///
/// `lower` is attained by `argmax`; `upper` is a proven over-estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEstimate {
    pub lower: f64,
    #[serde(serialize_with = "serialize_bound")]
    pub upper: f64,
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
    pub argmax: SignPattern,
}

fn serialize_bound<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("+inf")
    } else {
        s.serialize_f64(*v)
    }
}

impl NormEstimate {
    fn new(
        op: &DiscreteOperator,
        argmax: SignPattern,
        upper: f64,
        method: Method,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let lower = objective(op, &argmax.to_values());
        Self {
            lower,
            // rounding in the two summations must not invert the bracket
            upper: upper.max(lower),
            method,
            iterations,
            converged,
            argmax,
        }
    }

    /// Relative width `(upper - lower) / upper`, zero for a zero operator.
    pub fn gap(&self) -> f64 {
        if self.upper == 0.0 {
            0.0
        } else {
            (self.upper - self.lower) / self.upper
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("estimate serializes")
    }
}

#[inline]
fn objective(op: &DiscreteOperator, u: &[f64]) -> f64 {
    weighted_l1(&op.matrix().mul_vec(u), op.grid().weight())
}

/// `Σ_ij w |K_ij|`.
pub fn norm_upper(op: &DiscreteOperator) -> f64 {
    let m = op.matrix();
    let row_sums: Vec<f64> = (0..m.dim())
        .map(|i| m.row(i).iter().map(|a| a.abs()).sum())
        .collect();
    weighted_l1(&row_sums, op.grid().weight())
}

/// Exhaustive maximization over all sign patterns, refusing grids above [`ENUMERATION_LIMIT`].
pub fn norm_exact(op: &DiscreteOperator) -> Result<NormEstimate> {
    norm_exact_with_limit(op, ENUMERATION_LIMIT)
}

/// As [`norm_exact`] with a lower, caller-chosen limit. Limits above
/// [`ENUMERATION_LIMIT`] are clamped to it.
pub fn norm_exact_with_limit(op: &DiscreteOperator, limit: usize) -> Result<NormEstimate> {
    let limit = limit.min(ENUMERATION_LIMIT);
    let n = op.dim();
    if n > limit {
        return Err(Error::EnumerationLimit { n, limit });
    }
    let m = op.matrix();
    let w = op.grid().weight();
    let columns: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();

    // u[0] stays +1: patterns u and -u have the same objective.
    let mut u = vec![1.0; n];
    let mut y = m.mul_vec(&u);
    let mut best = weighted_l1(&y, w);
    let mut best_u = u.clone();
    let total: u64 = 1 << (n - 1);
    for k in 1..total {
        let j = k.trailing_zeros() as usize + 1;
        u[j] = -u[j];
        let delta = 2.0 * u[j];
        for (yi, c) in y.iter_mut().zip(&columns[j]) {
            *yi += delta * c;
        }
        if k % 4096 == 0 {
            y = m.mul_vec(&u);
        }
        let value = weighted_l1(&y, w);
        if value > best {
            best = value;
            best_u.copy_from_slice(&u);
        }
    }
    let argmax = SignPattern::sign_of(&best_u);
    let mut est = NormEstimate::new(op, argmax, 0.0, Method::Exact, total as usize, true);
    est.upper = est.lower;
    Ok(est)
}

/// One run of the alternating ascent.
#[derive(Debug, Clone)]
pub struct AscentRun {
    pub pattern: SignPattern,
    pub value: f64,
    /// Number of completed `(s, u)` update pairs.
    pub iterations: usize,
    /// False when the half-step budget ran out before a plateau.
    pub converged: bool,
    /// Objective after the start and after every accepted update.
    pub history: Vec<f64>,
}

/// Alternating sign ascent from `u0`.
///
/// Zeros in `W K u` or `Kᵀ W s` keep the previous sign. The run stops at
/// the first update that does not strictly raise the objective, or after
/// `10 n` half-steps.
pub fn alternate(op: &DiscreteOperator, u0: &SignPattern) -> Result<AscentRun> {
    let n = op.dim();
    if u0.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: u0.len(),
        });
    }
    let m = op.matrix();
    let w = op.grid().weight();
    let mut u = u0.clone();
    let mut y = m.mul_vec(&u.to_values());
    let mut value = weighted_l1(&y, w);
    let mut history = vec![value];
    let mut s = SignPattern::sign_of(&y);
    let budget = HALF_STEPS_PER_NODE * n.max(1);
    let mut half_steps = 0;
    let mut iterations = 0;
    let mut converged = false;
    while half_steps + 2 <= budget {
        // W is a positive multiple of the identity, so sign(W y) = sign(y).
        s = SignPattern::sign_keeping(&y, &s);
        let ws: Vec<f64> = s.signs().iter().map(|v| f64::from(*v) * w).collect();
        let g = m.mul_vec_transposed(&ws);
        let candidate = SignPattern::sign_keeping(&g, &u);
        half_steps += 2;
        iterations += 1;
        let y_next = m.mul_vec(&candidate.to_values());
        let next = weighted_l1(&y_next, w);
        if next > value {
            u = candidate;
            y = y_next;
            value = next;
            history.push(value);
        } else {
            converged = true;
            break;
        }
    }
    debug_assert!(history.windows(2).all(|p| p[0] <= p[1]));
    Ok(AscentRun {
        pattern: u,
        value,
        iterations,
        converged,
        history,
    })
}

/// Alternating ascent from a single start; `upper` is [`norm_upper`].
pub fn norm_alternating(op: &DiscreteOperator, u0: &SignPattern) -> Result<NormEstimate> {
    let run = alternate(op, u0)?;
    Ok(NormEstimate::new(
        op,
        run.pattern,
        norm_upper(op),
        Method::Alternating,
        run.iterations,
        run.converged,
    ))
}

/// Multistart ascent from `restarts` random patterns plus `u ≡ 1` and the sign of the row sums.
pub fn norm_restarts(op: &DiscreteOperator, restarts: usize, seed: u64) -> Result<NormEstimate> {
    norm_restarts_from(op, restarts, seed, &[])
}

/// As [`norm_restarts`], with extra deterministic starts (for instance a warm start).
///
/// Start order is: `u ≡ 1`, sign of row sums, `extra` in order, then the
/// random patterns. Random start `k` draws from stream `k` of `seed`. Runs
/// execute in parallel; ties go to the earliest start.
pub fn norm_restarts_from(
    op: &DiscreteOperator,
    restarts: usize,
    seed: u64,
    extra: &[SignPattern],
) -> Result<NormEstimate> {
    if restarts == 0 {
        return Err(Error::InvalidParam("restarts must be >= 1".into()));
    }
    let n = op.dim();
    if let Some(bad) = extra.iter().find(|p| p.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    let mut starts = Vec::with_capacity(restarts + 2 + extra.len());
    starts.push(SignPattern::ones(n));
    starts.push(SignPattern::sign_of(&op.matrix().mul_vec(&vec![1.0; n])));
    starts.extend(extra.iter().cloned());
    for k in 0..restarts {
        let mut r = rng::stream(seed, k as u64);
        starts.push(rng::random_signs(&mut r, n));
    }
    let runs: Vec<AscentRun> = starts
        .par_iter()
        .map(|s| alternate(op, s))
        .collect::<Result<_>>()?;
    let total_iterations = runs.iter().map(|r| r.iterations).sum();
    let best = runs
        .into_iter()
        .reduce(|best, r| if r.value > best.value { r } else { best })
        .expect("at least one start");
    Ok(NormEstimate::new(
        op,
        best.pattern,
        norm_upper(op),
        Method::Restarts,
        total_iterations,
        best.converged,
    ))
}

/// Upper bound only; `argmax` is `u ≡ 1` and `lower` its objective.
pub fn norm_bound_only(op: &DiscreteOperator) -> NormEstimate {
    NormEstimate::new(
        op,
        SignPattern::ones(op.dim()),
        norm_upper(op),
        Method::BoundOnly,
        0,
        false,
    )
}

/// Largest `‖K u‖₁` over `samples` random points of the discretized unit sphere of L∞.
///
/// Each draw is uniform on `[-1, 1]^n`, rescaled so that `max |u_i| = 1`.
pub fn box_sample_max(op: &DiscreteOperator, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidParam("samples must be >= 1".into()));
    }
    let n = op.dim();
    let mut r = rng::stream(seed, 0);
    let mut best = 0.0f64;
    let mut drawn = 0;
    while drawn < samples {
        let mut u = rng::random_box(&mut r, n);
        let scale = sup_norm(&u);
        if scale == 0.0 {
            continue;
        }
        u.iter_mut().for_each(|v| *v /= scale);
        best = best.max(objective(op, &u));
        drawn += 1;
    }
    Ok(best)
}
