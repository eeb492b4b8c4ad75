use kstab_core::*;
use proptest::prelude::*;

fn matrix_strategy(n: usize) -> impl Strategy<Value = SquareMatrix> {
    prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |data| {
        SquareMatrix::from_fn(n, |i, j| data[i * n + j])
    })
}

fn op_strategy(max_n: usize) -> impl Strategy<Value = DiscreteOperator> {
    (1..=max_n).prop_flat_map(|n| matrix_strategy(n).prop_map(DiscreteOperator::from_matrix))
}

fn op_and_box(n: usize) -> impl Strategy<Value = (DiscreteOperator, Vec<f64>)> {
    (
        matrix_strategy(n).prop_map(DiscreteOperator::from_matrix),
        prop::collection::vec(-1.0f64..=1.0, n),
    )
}

fn builtin_evaluators() -> Vec<KernelEvaluator> {
    ["family=tc beta=0.7", "family=gaussian sigma=1.3", "family=rank_one beta=0.4"]
        .iter()
        .map(|s| make_evaluator(&parse_spec(s).unwrap()).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn kernels_are_symmetric_with_nonnegative_diagonal(
        points in prop::collection::vec((0.0f64..50.0, 0.0f64..50.0), 200)
    ) {
        for k in builtin_evaluators() {
            for &(s, t) in &points {
                prop_assert_eq!(k.eval(s, t), k.eval(t, s));
                prop_assert!(k.eval(s, s) >= 0.0);
                prop_assert_eq!(k.eval(s, t), k.eval(s, t));
            }
        }
    }

    #[test]
    fn discrete_matrices_are_symmetric(n in 1usize..30, p in 0.1f64..3.0) {
        for spec in [
            KernelSpec::diagonal(p).unwrap(),
            KernelSpec::tc(p).unwrap().with_mode(TimeMode::Discrete).unwrap(),
            KernelSpec::gaussian(p).unwrap().with_mode(TimeMode::Discrete).unwrap(),
            KernelSpec::rank_one(p).unwrap().with_mode(TimeMode::Discrete).unwrap(),
        ] {
            prop_assert!(make_matrix(&spec, n).unwrap().is_symmetric());
        }
    }

    #[test]
    fn objective_is_sign_symmetric((op, u) in op_and_box(7)) {
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        prop_assert_eq!(op.output_l1(&u).unwrap(), op.output_l1(&neg).unwrap());
    }

    #[test]
    fn l1_norm_is_a_norm(
        y in prop::collection::vec(-10.0f64..10.0, 12),
        z in prop::collection::vec(-10.0f64..10.0, 12),
        c in -4.0f64..4.0,
    ) {
        let grid = build_grid(3.0, 0.25, TimeMode::Continuous).unwrap();
        let f = TestFunction::new(y.clone(), grid).unwrap();
        let scaled = TestFunction::new(y.iter().map(|v| c * v).collect(), grid).unwrap();
        let sum = TestFunction::new(y.iter().zip(&z).map(|(a, b)| a + b).collect(), grid).unwrap();
        let g = TestFunction::new(z, grid).unwrap();
        prop_assert!((l1_norm(&scaled) - c.abs() * l1_norm(&f)).abs() <= 1e-12 * (1.0 + l1_norm(&scaled)));
        prop_assert!(l1_norm(&sum) <= l1_norm(&f) + l1_norm(&g) + 1e-12);
    }

    #[test]
    fn box_points_never_beat_vertices(op in op_strategy(8), seed in any::<u64>()) {
        let exact = norm_exact(&op).unwrap();
        let sampled = box_sample_max(&op, 500, seed).unwrap();
        prop_assert!(sampled <= exact.lower * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn alternating_ascent_is_monotone(op in op_strategy(12), seed in any::<u64>()) {
        let start = {
            let mut r = kstab_core::rng::stream(seed, 0);
            kstab_core::rng::random_signs(&mut r, op.dim())
        };
        let run = alternate(&op, &start).unwrap();
        prop_assert!(run.history.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(*run.history.last().unwrap(), run.value);
        prop_assert!(run.iterations * 2 <= 10 * op.dim());
        let est = norm_alternating(&op, &start).unwrap();
        prop_assert!(est.lower <= est.upper);
        prop_assert_eq!(op.output_l1_signs(&est.argmax).unwrap(), est.lower);
    }

    #[test]
    fn restarts_never_exceed_enumeration(op in op_strategy(9), seed in any::<u64>()) {
        let exact = norm_exact(&op).unwrap();
        let multi = norm_restarts(&op, 8, seed).unwrap();
        prop_assert!(multi.lower <= exact.lower * (1.0 + 1e-12) + 1e-12);
        prop_assert!(exact.lower <= multi.upper * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn nonnegative_matrices_are_solved_by_ones(
        n in 1usize..20,
        data in prop::collection::vec(0.0f64..3.0, 400),
        seed in any::<u64>(),
    ) {
        let op = DiscreteOperator::from_matrix(SquareMatrix::from_fn(n, |i, j| data[i * 20 + j]));
        let est = norm_restarts(&op, 2, seed).unwrap();
        prop_assert_eq!(est.lower, norm_upper(&op));
        prop_assert_eq!(est.lower, est.upper);
    }

    #[test]
    fn negating_the_operator_changes_nothing(op in op_strategy(9), seed in any::<u64>()) {
        let neg = op.negated();
        prop_assert_eq!(norm_exact(&op).unwrap().lower, norm_exact(&neg).unwrap().lower);
        prop_assert_eq!(norm_upper(&op), norm_upper(&neg));
        prop_assert_eq!(norm_restarts(&op, 4, seed).unwrap().lower, norm_restarts(&neg, 4, seed).unwrap().lower);
    }

    #[test]
    fn boost_and_signify_postconditions((op, u) in op_and_box(8), rel_eps in 1e-4f64..1e-1) {
        let grid = *op.grid();
        let u = TestFunction::new(u, grid).unwrap();
        let eps = rel_eps * norm_upper(&op).max(1e-12);
        let before = op.output_l1(&u.values).unwrap();

        let (v, trace) = lemma2_boost(&op, &u).unwrap();
        prop_assert!(trace.is_monotone());
        prop_assert!(v.values.iter().all(|x| (0.5..=1.0).contains(&x.abs())));
        prop_assert!(op.output_l1(&v.values).unwrap() >= before);

        let out = lemma3_signify_detailed(&op, &v, eps).unwrap();
        prop_assert!(out.trace.is_monotone());
        prop_assert!(out.pattern.signs().iter().all(|s| *s == 1 || *s == -1));
        let bound = 0.5f64.powi(out.stages as i32 + 1);
        for (x, s) in out.relaxed.values.iter().zip(out.pattern.signs()) {
            prop_assert!((f64::from(*s) - x).abs() <= bound);
        }
        prop_assert!(out.trace.final_objective >= before - eps);

        let est = maximize_sign(&op, &u, eps).unwrap();
        prop_assert!(est.lower >= out.trace.final_objective);
        prop_assert!(est.lower >= before - eps);
    }

    #[test]
    fn absolute_sum_along_a_line_is_convex(
        y in prop::collection::vec(-10.0f64..10.0, 10),
        w in prop::collection::vec(-10.0f64..10.0, 10),
        x1 in -5.0f64..5.0,
        x2 in -5.0f64..5.0,
    ) {
        let f = |x: f64| y.iter().zip(&w).map(|(a, b)| (a + x * b).abs()).sum::<f64>();
        let mid = f(0.5 * (x1 + x2));
        let chord = 0.5 * (f(x1) + f(x2));
        prop_assert!(mid <= chord * (1.0 + 1e-12) + 1e-12);
        let (a, b) = (x1.min(x2), x1.max(x2));
        for k in 1..20 {
            let x = a + (b - a) * k as f64 / 20.0;
            prop_assert!(f(x) <= f(a).max(f(b)) * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn truncation_values_never_decrease(
        n in 4usize..14,
        data in prop::collection::vec(-2.0f64..2.0, 196),
        seed in any::<u64>(),
    ) {
        let m = SquareMatrix::from_fn(n, |i, j| {
            let (a, b) = (i.min(j), i.max(j));
            data[a * 14 + b]
        });
        let spec = KernelSpec::matrix(m).unwrap();
        let horizons: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        let cfg = TruncationConfig { horizons, step: 1.0, restarts: 3, seed };
        let report = truncation_norms(&spec, &cfg).unwrap();
        for w in report.a_values.windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-12));
        }
    }
}

#[test]
fn extended_warm_start_dominates_previous_value() {
    let k = KernelEvaluator::from_fn(|s, t| ((s - t) * 2.3).cos() * (-0.1 * (s + t)).exp());
    let small = build_grid(3.0, 0.1, TimeMode::Continuous).unwrap();
    let large = build_grid(6.0, 0.1, TimeMode::Continuous).unwrap();
    let op_small = discretize(&k, &small);
    let op_large = discretize(&k, &large);
    let est = norm_restarts(&op_small, 8, 11).unwrap();
    let extended = extend_sign(&est.argmax, &small, &op_large).unwrap();
    assert_eq!(&extended.signs()[..est.argmax.len()], est.argmax.signs());
    assert!(op_large.output_l1_signs(&extended).unwrap() >= est.lower);
}
