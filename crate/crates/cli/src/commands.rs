use kstab_core::{
    build_grid, classify, discretize, io, lemma2_boost, lemma3_signify, load_spec, make_evaluator,
    make_matrix, norm_exact_with_limit, norm_restarts, norm_upper, sign_of, truncation_norms,
    bibo_single, ClassifyOptions, DiscreteOperator, Family, FitResiduals, GrowthFit, KernelParams,
    KernelSpec, SquareMatrix, TestFunction, TimeMode, TruncationConfig, ENUMERATION_LIMIT,
};
use serde::Serialize;

use crate::args::{Cli, Command, Common, WithInput, DEFAULT_ENUM_LIMIT, DEFAULT_RESTARTS, DEFAULT_SEED};
use crate::output::{check_writable, write_atomic};
use crate::Failure;

pub const SEED_ENV: &str = "KSTAB_SEED";
const DEFAULT_NORM_STEP: f64 = 0.01;
const DEFAULT_STABILITY_STEP: f64 = 0.1;
const DEFAULT_STABILITY_COUNT: usize = 4;

pub fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Zoo(c) => zoo(&c),
        Command::Norm(c) => norm(&c),
        Command::Single(w) => single(&w),
        Command::Boost(w) => boost(&w),
        Command::Stability(c) => stability(&c),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Options shared by every subcommand, validated up front.
struct Settings {
    seed: u64,
    restarts: usize,
    eps: Option<f64>,
    enum_limit: usize,
}

fn settings(c: &Common) -> Result<Settings, Failure> {
    let seed = match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map_err(|_| usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))?,
        Err(_) => c.seed.unwrap_or(DEFAULT_SEED),
    };
    let restarts = c.restarts.unwrap_or(DEFAULT_RESTARTS);
    if restarts == 0 {
        return Err(usage("--restarts must be >= 1"));
    }
    if let Some(eps) = c.eps {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(usage(format!("--eps must be finite and > 0, got {eps}")));
        }
    }
    if let Some(step) = c.step {
        if !(step.is_finite() && step > 0.0) {
            return Err(usage(format!("--step must be finite and > 0, got {step}")));
        }
    }
    let enum_limit = c.enum_limit.unwrap_or(DEFAULT_ENUM_LIMIT);
    if enum_limit > ENUMERATION_LIMIT {
        return Err(Failure::Guard(format!(
            "--enum-limit {enum_limit} exceeds the enumeration guard of {ENUMERATION_LIMIT} nodes"
        )));
    }
    check_writable(c.out_json.as_deref())?;
    check_writable(c.out_csv.as_deref())?;
    Ok(Settings {
        seed,
        restarts,
        eps: c.eps,
        enum_limit,
    })
}

fn resolve_kernel(c: &Common) -> Result<KernelSpec, Failure> {
    match (&c.spec, &c.matrix) {
        (Some(path), None) => Ok(load_spec(path)?),
        (None, Some(json)) => {
            let rows: Vec<Vec<f64>> = serde_json::from_str(json)
                .map_err(|e| usage(format!("--matrix is not a nested numeric array: {e}")))?;
            Ok(KernelSpec::matrix(SquareMatrix::from_rows(&rows)?)?)
        }
        (None, None) => Err(usage("one of --spec or --matrix is required")),
        (Some(_), Some(_)) => Err(usage("--spec and --matrix are mutually exclusive")),
    }
}

fn node_count(h: f64) -> Result<usize, Failure> {
    if h.is_finite() && h >= 1.0 && h.fract() == 0.0 {
        Ok(h as usize)
    } else {
        Err(usage(format!("discrete horizon must be a positive integer, got {h}")))
    }
}

/// Operator for a kernel on `[0, horizon)` (continuous) or on `horizon` nodes (discrete).
fn operator_for(spec: &KernelSpec, horizon: Option<f64>, step: f64) -> Result<DiscreteOperator, Failure> {
    match spec.mode {
        TimeMode::Continuous => {
            let t = horizon.ok_or_else(|| usage("--horizon is required for continuous kernels"))?;
            let grid = build_grid(t, step, TimeMode::Continuous)?;
            Ok(discretize(&make_evaluator(spec)?, &grid))
        }
        TimeMode::Discrete => {
            let matrix = match (&spec.params, horizon) {
                (KernelParams::Matrix(m), None) => m.clone(),
                (KernelParams::Matrix(m), Some(h)) => m.leading(node_count(h)?)?,
                (_, Some(h)) => make_matrix(spec, node_count(h)?)?,
                (_, None) => return Err(usage("--horizon (node count) is required for this kernel")),
            };
            Ok(DiscreteOperator::from_matrix(matrix))
        }
    }
}

/// Operator matching the grid of an input test function.
fn operator_on_grid(spec: &KernelSpec, f: &TestFunction) -> Result<DiscreteOperator, Failure> {
    let grid = f.grid;
    if grid.mode != spec.mode {
        return Err(usage(format!(
            "kernel is {} but the test function grid is {}",
            spec.mode.name(),
            grid.mode.name()
        )));
    }
    match spec.mode {
        TimeMode::Continuous => Ok(discretize(&make_evaluator(spec)?, &grid)),
        TimeMode::Discrete => {
            let n = grid.len();
            let matrix = match &spec.params {
                KernelParams::Matrix(m) if m.dim() != n => {
                    return Err(usage(format!(
                        "matrix is {0}x{0} but the test function has {n} nodes",
                        m.dim()
                    )))
                }
                KernelParams::Matrix(m) => m.clone(),
                _ => make_matrix(spec, n)?,
            };
            Ok(DiscreteOperator::new(matrix, grid)?)
        }
    }
}

fn emit(c: &Common, stdout: &str, json: Option<&str>, csv: Option<&str>) -> Result<(), Failure> {
    if let (Some(path), Some(body)) = (&c.out_json, json) {
        write_atomic(path, body)?;
    }
    if let (Some(path), Some(body)) = (&c.out_csv, csv) {
        write_atomic(path, body)?;
    }
    if !c.quiet {
        println!("{stdout}");
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct ZooEntry {
    family: &'static str,
    kernel: &'static str,
    parameters: &'static str,
    modes: &'static str,
}

fn zoo(c: &Common) -> Result<(), Failure> {
    check_writable(c.out_json.as_deref())?;
    let entries: Vec<ZooEntry> = Family::ALL
        .iter()
        .map(|f| match f {
            Family::Tc => ZooEntry {
                family: "tc",
                kernel: "exp(-beta * max(s, t))",
                parameters: "beta > 0 (default 1)",
                modes: "continuous, discrete",
            },
            Family::Gaussian => ZooEntry {
                family: "gaussian",
                kernel: "exp(-(s - t)^2 / sigma^2)",
                parameters: "sigma > 0 (default 1)",
                modes: "continuous, discrete",
            },
            Family::RankOne => ZooEntry {
                family: "rank_one",
                kernel: "f(s) f(t), f(t) = scale * exp(-beta * t)",
                parameters: "beta > 0 (default 1), scale (default 1)",
                modes: "continuous, discrete",
            },
            Family::Diagonal => ZooEntry {
                family: "diagonal",
                kernel: "diag(1^-p, 2^-p, ...)",
                parameters: "p > 0 (default 1)",
                modes: "discrete",
            },
            Family::Matrix => ZooEntry {
                family: "matrix",
                kernel: "explicit symmetric matrix",
                parameters: "rows=[[..],..] or file=PATH (CSV)",
                modes: "discrete",
            },
        })
        .collect();
    let mut text = String::new();
    for e in &entries {
        text.push_str(&format!(
            "{:<9} {:<42} {:<40} [{}]\n",
            e.family, e.kernel, e.parameters, e.modes
        ));
    }
    text.pop();
    emit(c, &text, Some(&to_json(&entries)), None)
}

fn norm(c: &Common) -> Result<(), Failure> {
    let s = settings(c)?;
    if c.horizons.is_some() {
        return Err(usage("`norm` takes a single --horizon"));
    }
    let spec = resolve_kernel(c)?;
    let op = operator_for(&spec, c.horizon, c.step.unwrap_or(DEFAULT_NORM_STEP))?;
    let est = if op.dim() <= s.enum_limit {
        norm_exact_with_limit(&op, s.enum_limit)?
    } else {
        norm_restarts(&op, s.restarts, s.seed)?
    };
    let json = to_json(&est);
    let csv = io::write_sign_pattern(&est.argmax, op.grid());
    emit(c, json.trim_end(), Some(&json), Some(&csv))
}

#[derive(Serialize)]
struct SingleReport {
    mode: TimeMode,
    nodes: usize,
    l1_norm: f64,
    /// `Σ f_i sign(f_i) w`, the supremum of `∫ f u` over sign-valued `u`.
    sign_pairing: f64,
}

fn single(w: &WithInput) -> Result<(), Failure> {
    settings(&w.common)?;
    let f = io::read_test_function(&w.input)?;
    let norm = bibo_single(&f)?;
    let signs = sign_of(&f);
    let pairing: f64 = f
        .values
        .iter()
        .zip(signs.signs())
        .map(|(v, s)| v * f64::from(*s) * f.grid.weight())
        .sum();
    let report = SingleReport {
        mode: f.grid.mode,
        nodes: f.grid.len(),
        l1_norm: norm,
        sign_pairing: pairing,
    };
    let json = to_json(&report);
    let csv = io::write_sign_pattern(&signs, &f.grid);
    emit(&w.common, json.trim_end(), Some(&json), Some(&csv))
}

fn boost(w: &WithInput) -> Result<(), Failure> {
    let s = settings(&w.common)?;
    let spec = resolve_kernel(&w.common)?;
    let f = io::read_test_function(&w.input)?;
    let op = operator_on_grid(&spec, &f)?;
    let eps = s.eps.unwrap_or_else(|| 1e-3 * norm_upper(&op)).max(f64::MIN_POSITIVE);
    let start = if f.values.iter().all(|v| *v == 0.0) {
        TestFunction {
            values: vec![1.0; f.values.len()],
            grid: f.grid,
        }
    } else {
        f.clone()
    };
    let (boosted, mut trace) = lemma2_boost(&op, &start)?;
    let (pattern, signify) = lemma3_signify(&op, &boosted, eps)?;
    trace.steps.extend(signify.steps);
    trace.final_objective = signify.final_objective;
    trace.initial_objective = op.output_l1(&f.values).map_err(Failure::from)?;
    let json = format!("{}\n", trace.to_json());
    let csv = io::write_sign_pattern(&pattern, &f.grid);
    emit(&w.common, json.trim_end(), Some(&json), Some(&csv))
}

#[derive(Serialize)]
struct StabilityVerdict<'a> {
    kernel: &'a str,
    classification: kstab_core::Classification,
    growth_model: GrowthFit,
    fit_residuals: FitResiduals,
    doubling_ratios: Vec<(f64, f64)>,
    heuristic: bool,
    horizons: &'a [f64],
    a_values: &'a [f64],
    tail_flagged_horizons: Vec<f64>,
}

fn stability(c: &Common) -> Result<(), Failure> {
    let s = settings(c)?;
    if c.horizon.is_some() && c.horizons.is_some() {
        return Err(usage("--horizon and --horizons are mutually exclusive"));
    }
    let spec = resolve_kernel(c)?;
    let discrete = spec.mode == TimeMode::Discrete;
    let horizons = match (&c.horizons, c.horizon) {
        (Some(list), _) => list.clone(),
        (None, first) => {
            let first = first.unwrap_or(if discrete { 16.0 } else { 5.0 });
            (0..DEFAULT_STABILITY_COUNT)
                .map(|k| first * 2f64.powi(k as i32))
                .collect()
        }
    };
    let opts = ClassifyOptions::default();
    if horizons.len() < opts.min_horizons {
        return Err(usage(format!(
            "stability needs at least {} horizons, got {}",
            opts.min_horizons,
            horizons.len()
        )));
    }
    let step = if discrete { 1.0 } else { c.step.unwrap_or(DEFAULT_STABILITY_STEP) };
    if discrete {
        horizons.iter().try_for_each(|h| node_count(*h).map(|_| ()))?;
    } else {
        build_grid(horizons[0], step, TimeMode::Continuous)?;
    }
    let cfg = TruncationConfig {
        horizons,
        step,
        restarts: s.restarts,
        seed: s.seed,
    };
    let report = truncation_norms(&spec, &cfg)?;
    if !report.is_nondecreasing() {
        // within the rounding slack accepted by the truncation module
        eprintln!("warning: a_values decrease by less than rounding error");
    }
    let verdict = classify(&report, &opts)?;
    let out = StabilityVerdict {
        kernel: &report.kernel,
        classification: verdict.classification,
        growth_model: verdict.growth_model,
        fit_residuals: verdict.fit_residuals,
        doubling_ratios: verdict.doubling_ratios,
        heuristic: verdict.heuristic,
        horizons: &report.horizons,
        a_values: &report.a_values,
        tail_flagged_horizons: report.tail_flags(),
    };
    let json = to_json(&out);
    emit(c, json.trim_end(), Some(&json), Some(&report.to_csv()))
}
