//! Constructive moves from box-valued test functions to sign patterns.
//!
//! Every move perturbs `u` along a fixed direction, `u + x·d`, on a set of
//! indices selected by magnitude. The objective `x ↦ ‖K(u + x d)‖₁` is
//! convex, so on an interval containing `x = 1` (the unperturbed point) one
//! of the two endpoints is at least as good as the current value; each move
//! evaluates both endpoints and keeps the better one. This makes every
//! recorded step non-decreasing in objective.
//!
//! * [`lemma2_boost`] lifts every entry to `|v_i| ≥ 1/2`;
//! * [`lemma3_signify`] pushes entries toward `±1` in stages of geometric
//!   precision and rounds once the remaining distance is below the
//!   tolerance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::norms::{alternate, norm_upper, Method, NormEstimate};
use crate::operator::{sup_norm, weighted_l1, DiscreteOperator, SignPattern, TestFunction};

/// Highest refinement stage of [`lemma3_signify`]. Past this the level-set
/// intervals collapse below double precision.
pub const MAX_SIGNIFY_STAGES: u32 = 24;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoostStep {
    pub stage: String,
    /// Chosen endpoint; `1` for an identity step on an empty set.
    pub x: f64,
    pub set_size: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoostTrace {
    pub steps: Vec<BoostStep>,
    pub initial_objective: f64,
    pub final_objective: f64,
}

impl BoostTrace {
    fn start(initial: f64) -> Self {
        Self {
            steps: Vec::new(),
            initial_objective: initial,
            final_objective: initial,
        }
    }

    fn record(&mut self, stage: String, x: f64, set_size: usize, objective: f64) {
        self.steps.push(BoostStep {
            stage,
            x,
            set_size,
            objective,
        });
        self.final_objective = objective;
    }

    /// Objectives of the recorded steps never decrease.
    pub fn is_monotone(&self) -> bool {
        let mut prev = self.initial_objective;
        self.steps.iter().all(|s| {
            let ok = s.objective >= prev;
            prev = s.objective;
            ok
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// Componentwise sign, `sign(0) = +1`.
pub fn sign_of(f: &TestFunction) -> SignPattern {
    SignPattern::sign_of(&f.values)
}

/// `‖f‖₁` of a single impulse response, cross-checked against `Σ f_i sign(f_i) w`.
///
/// The second sum is the value of the functional `u ↦ ∫ f u` at the sign
/// of `f`, which is where its supremum over sign-valued `u` is attained.
pub fn bibo_single(f: &TestFunction) -> Result<f64> {
    let w = f.grid.weight();
    let norm = weighted_l1(&f.values, w);
    let signs = sign_of(f);
    let paired: f64 = f
        .values
        .iter()
        .zip(signs.signs())
        .map(|(v, s)| v * f64::from(*s) * w)
        .sum();
    if (paired - norm).abs() > 1e-12 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Internal(format!(
            "sign pairing {paired} disagrees with 1-norm {norm}"
        )));
    }
    Ok(norm)
}

/// Indices with `a ≤ |u_i| < b`.
pub fn level_set(u: &[f64], a: f64, b: f64) -> Result<Vec<usize>> {
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "level set needs 0 <= a < b <= 1, got [{a}, {b})"
        )));
    }
    Ok(u
        .iter()
        .enumerate()
        .filter(|(_, v)| {
            let m = v.abs();
            a <= m && m < b
        })
        .map(|(i, _)| i)
        .collect())
}

fn objective(op: &DiscreteOperator, v: &[f64]) -> f64 {
    weighted_l1(&op.matrix().mul_vec(v), op.grid().weight())
}

/// Applies `edit(value, x)` on `set` for `x = -x_max` and `x = +x_max` and keeps the
/// better candidate, preferring `+x_max` on ties.
fn best_endpoint(
    op: &DiscreteOperator,
    v: &mut Vec<f64>,
    set: &[usize],
    x_max: f64,
    edit: impl Fn(f64, f64) -> f64,
) -> (f64, f64) {
    let candidate = |x: f64| {
        let mut c = v.clone();
        for &i in set {
            c[i] = edit(c[i], x);
        }
        let obj = objective(op, &c);
        (c, obj)
    };
    let (pos, pos_obj) = candidate(x_max);
    let (neg, neg_obj) = candidate(-x_max);
    if neg_obj > pos_obj {
        *v = neg;
        (-x_max, neg_obj)
    } else {
        *v = pos;
        (x_max, pos_obj)
    }
}

fn check_operand(op: &DiscreteOperator, u: &TestFunction) -> Result<()> {
    if u.values.len() != op.dim() {
        return Err(Error::LengthMismatch {
            expected: op.dim(),
            got: u.values.len(),
        });
    }
    if u.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("test function has non-finite entries".into()));
    }
    Ok(())
}

/// Lifts `u` (with `‖u‖∞ ≤ 1`) to `v` with `1/2 ≤ |v_i| ≤ 1` and `‖K v‖₁ ≥ ‖K u‖₁`.
///
/// Entries with `1/4 ≤ |u_i| < 1/2` are first multiplied by `x ∈ {-2, 2}`;
/// entries with `|z_i| < 1/4` then receive `x ∈ {-3/4, 3/4}`. An empty set
/// is recorded as an identity step.
pub fn lemma2_boost(op: &DiscreteOperator, u: &TestFunction) -> Result<(TestFunction, BoostTrace)> {
    check_operand(op, u)?;
    let sup = sup_norm(&u.values);
    if sup > 1.0 {
        return Err(Error::Precondition(format!(
            "boost needs max |u_i| <= 1, got {sup}"
        )));
    }
    let mut v = u.values.clone();
    let mut trace = BoostTrace::start(objective(op, &v));

    let scale_set = level_set(&v, 0.25, 0.5)?;
    if scale_set.is_empty() {
        trace.record("lemma2.scale".into(), 1.0, 0, trace.final_objective);
    } else {
        let (x, obj) = best_endpoint(op, &mut v, &scale_set, 2.0, |vi, x| vi * x);
        trace.record("lemma2.scale".into(), x, scale_set.len(), obj);
    }
    if !level_set(&v, 0.25, 0.5)?.is_empty() {
        return Err(Error::Internal("entries left in [1/4, 1/2) after scaling".into()));
    }

    let shift_set = level_set(&v, 0.0, 0.25)?;
    if shift_set.is_empty() {
        trace.record("lemma2.shift".into(), 1.0, 0, trace.final_objective);
    } else {
        let (x, obj) = best_endpoint(op, &mut v, &shift_set, 0.75, |vi, x| vi + x);
        trace.record("lemma2.shift".into(), x, shift_set.len(), obj);
    }
    if let Some(bad) = v.iter().find(|x| !(0.5..=1.0).contains(&x.abs())) {
        return Err(Error::Internal(format!(
            "boosted entry {bad} outside 1/2 <= |v| <= 1"
        )));
    }
    Ok((TestFunction { values: v, grid: u.grid }, trace))
}

/// Full outcome of [`lemma3_signify_detailed`].
#[derive(Debug, Clone)]
pub struct Signification {
    pub pattern: SignPattern,
    /// The last box-valued iterate, whose sign is `pattern`.
    pub relaxed: TestFunction,
    /// Stopping stage `n`; every entry of `relaxed` satisfies `|v_i| ≥ 1 - 2^-(n+1)`.
    pub stages: u32,
    pub trace: BoostTrace,
}

/// Rounds `u` (with `1/2 ≤ |u_i| ≤ 1`) to a sign pattern losing at most `eps` in objective.
pub fn lemma3_signify(
    op: &DiscreteOperator,
    u: &TestFunction,
    eps: f64,
) -> Result<(SignPattern, BoostTrace)> {
    let out = lemma3_signify_detailed(op, u, eps)?;
    Ok((out.pattern, out.trace))
}

/// Stage `n ≥ 1` raises every entry to at least `1 - 2^-(n+1)`:
///
/// 1. entries with `(2ⁿ-1)/2ⁿ ≤ |v_i| < 2(2ⁿ-1)/(2ⁿ⁺¹-1)` are multiplied by
///    `x ∈ {±(2ⁿ⁺¹-1)/(2(2ⁿ-1))}`;
/// 2. entries with `2(2ⁿ-1)/(2ⁿ⁺¹-1) ≤ |v_i| < (2ⁿ⁺¹-1)/2ⁿ⁺¹` are multiplied
///    by `x ∈ {±2ⁿ⁺¹/(2ⁿ⁺¹-1)}`.
///
/// Iteration stops at the first `n` with `norm_upper · 2^-(n+1) ≤ eps`, and
/// the sign of the current iterate is returned. Since `‖s - v‖∞ ≤ 2^-(n+1)`
/// and `norm_upper` bounds the operator, `‖K s‖₁ ≥ ‖K v‖₁ - eps ≥ ‖K u‖₁ - eps`.
/// Tolerances below `norm_upper · 2^-(MAX_SIGNIFY_STAGES+1)` stop at the last stage.
pub fn lemma3_signify_detailed(
    op: &DiscreteOperator,
    u: &TestFunction,
    eps: f64,
) -> Result<Signification> {
    check_operand(op, u)?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Precondition(format!("eps must be finite and > 0, got {eps}")));
    }
    if let Some(bad) = u.values.iter().find(|x| !(0.5..=1.0).contains(&x.abs())) {
        return Err(Error::Precondition(format!(
            "signify needs 1/2 <= |u_i| <= 1, found {bad}"
        )));
    }
    let upper = norm_upper(op);
    let mut v = u.values.clone();
    let mut trace = BoostTrace::start(objective(op, &v));
    let mut stages = 0;
    for n in 1..=MAX_SIGNIFY_STAGES {
        let p = 2f64.powi(n as i32);
        let lo = (p - 1.0) / p;
        let hi = 2.0 * (p - 1.0) / (2.0 * p - 1.0);
        let target = (2.0 * p - 1.0) / (2.0 * p);
        let clamp = |m: f64| m.clamp(target, 1.0);

        let set = level_set(&v, lo, hi)?;
        if set.is_empty() {
            trace.record(format!("lemma3.scale[{n}]"), 1.0, 0, trace.final_objective);
        } else {
            let x_max = (2.0 * p - 1.0) / (2.0 * (p - 1.0));
            let (x, obj) = best_endpoint(op, &mut v, &set, x_max, |vi, x| {
                let y = vi * x;
                y.signum() * clamp(y.abs())
            });
            trace.record(format!("lemma3.scale[{n}]"), x, set.len(), obj);
        }

        // Entries in [hi, target) are outside the set above but still short of the stage target.
        let gap = level_set(&v, hi, target)?;
        if gap.is_empty() {
            trace.record(format!("lemma3.gap[{n}]"), 1.0, 0, trace.final_objective);
        } else {
            let (x, obj) = best_endpoint(op, &mut v, &gap, 1.0 / target, |vi, x| {
                let y = vi * x;
                y.signum() * clamp(y.abs())
            });
            trace.record(format!("lemma3.gap[{n}]"), x, gap.len(), obj);
        }

        if let Some(bad) = v.iter().find(|x| !(target..=1.0).contains(&x.abs())) {
            return Err(Error::Internal(format!(
                "stage {n}: entry {bad} outside [{target}, 1]"
            )));
        }
        stages = n;
        if upper * 0.5f64.powi(n as i32 + 1) <= eps {
            break;
        }
    }
    let pattern = SignPattern::sign_of(&v);
    trace.final_objective = objective(op, &pattern.to_values());
    Ok(Signification {
        pattern,
        relaxed: TestFunction { values: v, grid: u.grid },
        stages,
        trace,
    })
}

/// Lemma-2 boost, Lemma-3 rounding and an alternating polish, chained.
pub fn maximize_sign(op: &DiscreteOperator, u0: &TestFunction, eps: f64) -> Result<NormEstimate> {
    maximize_sign_traced(op, u0, eps).map(|(est, _)| est)
}

/// As [`maximize_sign`], also returning the boost trace (boost and rounding stages).
///
/// A zero `u0` is replaced by `u ≡ 1`.
pub fn maximize_sign_traced(
    op: &DiscreteOperator,
    u0: &TestFunction,
    eps: f64,
) -> Result<(NormEstimate, BoostTrace)> {
    check_operand(op, u0)?;
    let start = if u0.values.iter().all(|v| *v == 0.0) {
        TestFunction {
            values: vec![1.0; u0.values.len()],
            grid: u0.grid,
        }
    } else {
        u0.clone()
    };
    let (boosted, mut trace) = lemma2_boost(op, &start)?;
    let signed = lemma3_signify_detailed(op, &boosted, eps)?;
    trace.steps.extend(signed.trace.steps);
    trace.final_objective = signed.trace.final_objective;
    trace.initial_objective = objective(op, &u0.values);

    let run = alternate(op, &signed.pattern)?;
    let lower = run.value;
    let est = NormEstimate {
        lower,
        upper: norm_upper(op).max(lower),
        method: Method::Alternating,
        iterations: run.iterations,
        converged: run.converged,
        argmax: run.pattern,
    };
    Ok((est, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::TimeMode;
    use crate::matrix::SquareMatrix;
    use crate::operator::{build_grid, Grid};

    fn ones3() -> DiscreteOperator {
        DiscreteOperator::from_matrix(SquareMatrix::from_fn(3, |_, _| 1.0))
    }

    fn tf(values: &[f64]) -> TestFunction {
        TestFunction::new(values.to_vec(), Grid::discrete(values.len()).unwrap()).unwrap()
    }

    #[test]
    fn signs_with_zero_convention() {
        assert_eq!(sign_of(&tf(&[2.0, -3.0, 0.0])).signs(), &[1, -1, 1]);
        assert_eq!(sign_of(&tf(&[-1.0, -0.1])).signs(), &[-1, -1]);
        assert_eq!(sign_of(&tf(&[0.0, 0.0])).signs(), &[1, 1]);
    }

    #[test]
    fn single_system_norms() {
        assert_eq!(bibo_single(&tf(&[1.0, -2.0, 3.0])).unwrap(), 6.0);
        assert_eq!(bibo_single(&tf(&[0.0, 0.0])).unwrap(), 0.0);
        let grid = build_grid(20.0, 0.01, TimeMode::Continuous).unwrap();
        let f = TestFunction::from_fn(grid, |t| (-t).exp());
        assert!((bibo_single(&f).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn level_sets() {
        let u = [0.1, 0.3, -1.0];
        assert_eq!(level_set(&u, 0.25, 0.5).unwrap(), vec![1]);
        assert_eq!(level_set(&u, 0.0, 0.25).unwrap(), vec![0]);
        assert!(level_set(&[1.0, -1.0], 0.3, 1.0).unwrap().is_empty());
        assert!(level_set(&u, 0.5, 0.5).is_err());
        assert!(level_set(&u, -0.1, 0.5).is_err());
        assert!(level_set(&u, 0.1, 1.5).is_err());
    }

    #[test]
    fn boost_on_all_ones_kernel() {
        let (v, trace) = lemma2_boost(&ones3(), &tf(&[0.1, 0.3, -1.0])).unwrap();
        let expected = [-0.65, -0.6, -1.0];
        for (a, b) in v.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        let objectives: Vec<f64> = trace.steps.iter().map(|s| s.objective).collect();
        assert!((trace.initial_objective - 1.8).abs() < 1e-12);
        assert!((objectives[0] - 4.5).abs() < 1e-12);
        assert!((objectives[1] - 6.75).abs() < 1e-12);
        assert_eq!(trace.steps[0].x, -2.0);
        assert_eq!(trace.steps[1].x, -0.75);
    }

    #[test]
    fn boost_is_identity_on_sign_patterns() {
        let u = tf(&[1.0, -1.0, 1.0]);
        let (v, trace) = lemma2_boost(&ones3(), &u).unwrap();
        assert_eq!(v, u);
        assert_eq!(trace.steps.len(), 2);
        assert!(trace.steps.iter().all(|s| s.set_size == 0 && s.x == 1.0));
    }

    #[test]
    fn boost_of_zero_shifts_everything() {
        let (v, _) = lemma2_boost(&ones3(), &tf(&[0.0, 0.0, 0.0])).unwrap();
        assert!(v.values.iter().all(|x| *x == 0.75));
    }

    #[test]
    fn boost_rejects_out_of_box_input() {
        assert!(matches!(
            lemma2_boost(&ones3(), &tf(&[1.5, 0.0, 0.0])).unwrap_err(),
            Error::Precondition(_)
        ));
        assert!(lemma2_boost(&ones3(), &tf(&[0.5, 0.0])).is_err());
    }

    #[test]
    fn signify_all_ones_example() {
        let out = lemma3_signify_detailed(&ones3(), &tf(&[-0.65, -0.6, -1.0]), 0.5).unwrap();
        assert_eq!(out.stages, 4);
        assert_eq!(out.pattern.signs(), &[-1, -1, -1]);
        assert_eq!(out.trace.final_objective, 9.0);
        assert!(out.trace.is_monotone());
    }

    #[test]
    fn signify_keeps_sign_patterns() {
        let u = tf(&[1.0, -1.0, -1.0]);
        let (s, trace) = lemma3_signify(&ones3(), &u, 0.01).unwrap();
        assert_eq!(s.signs(), &[1, -1, -1]);
        assert!(trace.steps.iter().all(|st| st.set_size == 0));
    }

    #[test]
    fn signify_doubles_aligned_half_vector() {
        let nonneg = DiscreteOperator::from_matrix(
            SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap(),
        );
        let u = tf(&[0.5, 0.5]);
        let (s, trace) = lemma3_signify(&nonneg, &u, 0.1).unwrap();
        assert_eq!(s.signs(), &[1, 1]);
        assert_eq!(trace.final_objective, 2.0 * trace.initial_objective);
    }

    #[test]
    fn signify_preconditions() {
        assert!(lemma3_signify(&ones3(), &tf(&[0.4, 1.0, 1.0]), 0.1).is_err());
        assert!(lemma3_signify(&ones3(), &tf(&[1.0, 1.0, 1.0]), 0.0).is_err());
        assert!(lemma3_signify(&ones3(), &tf(&[1.0, 1.0, 1.0]), f64::NAN).is_err());
    }

    #[test]
    fn entries_stuck_between_sets_are_still_lifted() {
        // 0.7 lies above the first scaled set [1/2, 2/3) but below 3/4.
        let op = DiscreteOperator::from_matrix(SquareMatrix::from_diagonal(&[1.0, 1.0]));
        let out = lemma3_signify_detailed(&op, &tf(&[0.7, -0.7]), 1e-3).unwrap();
        let bound = 0.5f64.powi(out.stages as i32 + 1);
        for (v, s) in out.relaxed.values.iter().zip(out.pattern.signs()) {
            assert!((f64::from(*s) - v).abs() <= bound);
        }
    }

    #[test]
    fn maximize_sign_chain() {
        let est = maximize_sign(&ones3(), &tf(&[0.1, 0.3, -1.0]), 0.5).unwrap();
        assert_eq!(est.lower, 9.0);
        let zero = maximize_sign(&ones3(), &tf(&[0.0, 0.0, 0.0]), 0.5).unwrap();
        assert_eq!(zero.lower, norm_upper(&ones3()));
    }
}
