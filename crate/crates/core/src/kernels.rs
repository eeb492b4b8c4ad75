//! Kernel zoo, kernel evaluation and spec-file parsing.
//!
//! A spec file is either a sequence of whitespace-separated `key=value`
//! tokens or a JSON object with the same keys:
//!
//! ```text
//! family=tc beta=1.0 mode=continuous
//! family=matrix rows=[[2,1],[1,2]]
//! {"family": "diagonal", "p": 2}
//! ```
//!
//! Recognised keys are `family`, `mode`, `beta`, `sigma`, `p`, `scale`,
//! `rows` and `file`. Whitespace inside brackets does not split tokens and
//! `#` starts a comment that runs to the end of the line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Tc,
    Gaussian,
    RankOne,
    Diagonal,
    Matrix,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Tc,
        Family::Gaussian,
        Family::RankOne,
        Family::Diagonal,
        Family::Matrix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Tc => "tc",
            Family::Gaussian => "gaussian",
            Family::RankOne => "rank_one",
            Family::Diagonal => "diagonal",
            Family::Matrix => "matrix",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }

    /// Families with no continuous-time realization.
    pub fn discrete_only(self) -> bool {
        matches!(self, Family::Diagonal | Family::Matrix)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    Continuous,
    Discrete,
}

impl TimeMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(TimeMode::Continuous),
            "discrete" => Ok(TimeMode::Discrete),
            other => Err(Error::InvalidParam(format!(
                "mode must be `continuous` or `discrete`, got `{other}`"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeMode::Continuous => "continuous",
            TimeMode::Discrete => "discrete",
        }
    }
}

/// Family-specific parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelParams {
    /// `K(s,t) = exp(-beta * max(s,t))`.
    Tc { beta: f64 },
    /// `K(s,t) = exp(-(s-t)^2 / sigma^2)`.
    Gaussian { sigma: f64 },
    /// `K(s,t) = f(s) f(t)` with `f(t) = scale * exp(-decay * t)`.
    RankOne { decay: f64, scale: f64 },
    /// `K = diag(1^-p, 2^-p, ...)`.
    Diagonal { p: f64 },
    Matrix(SquareMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub params: KernelParams,
    pub mode: TimeMode,
}

impl KernelSpec {
    pub fn tc(beta: f64) -> Result<Self> {
        Self::new(KernelParams::Tc { beta }, TimeMode::Continuous)
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(KernelParams::Gaussian { sigma }, TimeMode::Continuous)
    }

    pub fn rank_one(decay: f64) -> Result<Self> {
        Self::new(
            KernelParams::RankOne { decay, scale: 1.0 },
            TimeMode::Continuous,
        )
    }

    pub fn diagonal(p: f64) -> Result<Self> {
        Self::new(KernelParams::Diagonal { p }, TimeMode::Discrete)
    }

    pub fn matrix(m: SquareMatrix) -> Result<Self> {
        Self::new(KernelParams::Matrix(m), TimeMode::Discrete)
    }

    /// Validates parameters and mode compatibility.
    pub fn new(params: KernelParams, mode: TimeMode) -> Result<Self> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::ParamOutOfRange {
                    name,
                    value: v,
                    reason: "must be finite and > 0",
                })
            }
        }
        match &params {
            KernelParams::Tc { beta } => positive("beta", *beta)?,
            KernelParams::Gaussian { sigma } => positive("sigma", *sigma)?,
            KernelParams::RankOne { decay, scale } => {
                positive("beta", *decay)?;
                if !scale.is_finite() {
                    return Err(Error::ParamOutOfRange {
                        name: "scale",
                        value: *scale,
                        reason: "must be finite",
                    });
                }
            }
            KernelParams::Diagonal { p } => positive("p", *p)?,
            KernelParams::Matrix(m) => {
                if let Some((i, j)) = m.asymmetry() {
                    return Err(Error::NonSymmetric { i, j });
                }
            }
        }
        let spec = Self { params, mode };
        if spec.family().discrete_only() && mode == TimeMode::Continuous {
            return Err(Error::ModeConflict {
                family: spec.family().name(),
                required: "discrete",
            });
        }
        Ok(spec)
    }

    pub fn family(&self) -> Family {
        match self.params {
            KernelParams::Tc { .. } => Family::Tc,
            KernelParams::Gaussian { .. } => Family::Gaussian,
            KernelParams::RankOne { .. } => Family::RankOne,
            KernelParams::Diagonal { .. } => Family::Diagonal,
            KernelParams::Matrix(_) => Family::Matrix,
        }
    }

    pub fn with_mode(mut self, mode: TimeMode) -> Result<Self> {
        self.mode = mode;
        Self::new(self.params, self.mode)
    }

    /// Short human-readable description, e.g. `tc(beta=1)`.
    pub fn describe(&self) -> String {
        let body = match &self.params {
            KernelParams::Tc { beta } => format!("tc(beta={beta})"),
            KernelParams::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            KernelParams::RankOne { decay, scale } => {
                format!("rank_one(beta={decay}, scale={scale})")
            }
            KernelParams::Diagonal { p } => format!("diagonal(p={p})"),
            KernelParams::Matrix(m) => format!("matrix({0}x{0})", m.dim()),
        };
        format!("{body} [{}]", self.mode.name())
    }
}

/// Pure symmetric map `(s, t) -> K(s, t)` on the nonnegative half-line.
#[derive(Clone)]
pub enum KernelEvaluator {
    Tc { beta: f64 },
    Gaussian { sigma: f64 },
    RankOne { decay: f64, scale: f64 },
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for KernelEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelEvaluator::Tc { beta } => write!(f, "Tc {{ beta: {beta} }}"),
            KernelEvaluator::Gaussian { sigma } => write!(f, "Gaussian {{ sigma: {sigma} }}"),
            KernelEvaluator::RankOne { decay, scale } => {
                write!(f, "RankOne {{ decay: {decay}, scale: {scale} }}")
            }
            KernelEvaluator::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl KernelEvaluator {
    /// Wraps an arbitrary function. Symmetry is the caller's responsibility.
    pub fn from_fn(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        KernelEvaluator::Custom(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        match self {
            KernelEvaluator::Tc { beta } => (-beta * s.max(t)).exp(),
            KernelEvaluator::Gaussian { sigma } => {
                let d = s - t;
                (-(d * d) / (sigma * sigma)).exp()
            }
            KernelEvaluator::RankOne { decay, scale } => {
                scale * (-decay * s).exp() * scale * (-decay * t).exp()
            }
            KernelEvaluator::Custom(f) => f(s, t),
        }
    }
}

/// Evaluator for a continuous-time spec. Discrete-only families are rejected.
pub fn make_evaluator(spec: &KernelSpec) -> Result<KernelEvaluator> {
    if spec.mode != TimeMode::Continuous {
        return Err(Error::ModeConflict {
            family: spec.family().name(),
            required: "continuous",
        });
    }
    builtin_evaluator(spec)
}

fn builtin_evaluator(spec: &KernelSpec) -> Result<KernelEvaluator> {
    match spec.params {
        KernelParams::Tc { beta } => Ok(KernelEvaluator::Tc { beta }),
        KernelParams::Gaussian { sigma } => Ok(KernelEvaluator::Gaussian { sigma }),
        KernelParams::RankOne { decay, scale } => Ok(KernelEvaluator::RankOne { decay, scale }),
        KernelParams::Diagonal { .. } | KernelParams::Matrix(_) => Err(Error::ModeConflict {
            family: spec.family().name(),
            required: "discrete",
        }),
    }
}

/// Leading `n × n` block of the kernel viewed as a matrix on ℕ × ℕ.
///
/// Continuous families are sampled at integer arguments `K(i, j)`, `1 ≤ i, j ≤ n`.
pub fn make_matrix(spec: &KernelSpec, n: usize) -> Result<SquareMatrix> {
    if spec.mode != TimeMode::Discrete {
        return Err(Error::ModeConflict {
            family: spec.family().name(),
            required: "discrete",
        });
    }
    if n == 0 {
        return Err(Error::InvalidParam("matrix size must be >= 1".into()));
    }
    match &spec.params {
        KernelParams::Diagonal { p } => Ok(SquareMatrix::from_diagonal(&diagonal_entries(*p, n))),
        KernelParams::Matrix(m) => {
            if m.dim() != n {
                return Err(Error::SizeMismatch {
                    expected: m.dim(),
                    got: n,
                });
            }
            Ok(m.clone())
        }
        _ => {
            let k = builtin_evaluator(spec)?;
            Ok(SquareMatrix::from_fn(n, |i, j| {
                k.eval((i + 1) as f64, (j + 1) as f64)
            }))
        }
    }
}

/// `d_i = i^-p` for `i = 1..=n`.
pub fn diagonal_entries(p: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| (i as f64).powf(-p)).collect()
}

#[derive(Debug, Clone, PartialEq)]
enum RawValue {
    Text(String),
    Number(f64),
    Rows(Vec<Vec<f64>>),
}

/// Parses a spec file. `file=` paths are resolved against the working directory.
pub fn parse_spec(text: &str) -> Result<KernelSpec> {
    parse_spec_in(text, Path::new("."))
}

/// Parses a spec file, resolving relative `file=` paths against `base`.
pub fn parse_spec_in(text: &str, base: &Path) -> Result<KernelSpec> {
    let trimmed = text.trim_start();
    let fields = if trimmed.starts_with('{') {
        json_fields(trimmed, text.len() - trimmed.len())?
    } else {
        token_fields(text)?
    };
    build_spec(fields, base)
}

/// Reads and parses a spec file from disk.
pub fn load_spec(path: &Path) -> Result<KernelSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_spec_in(&text, base)
}

fn token_fields(text: &str) -> Result<BTreeMap<String, (RawValue, usize)>> {
    let mut fields = BTreeMap::new();
    for (pos, token) in tokenize(text)? {
        let Some(eq) = token.find('=') else {
            return Err(Error::Syntax {
                pos,
                msg: format!("expected key=value, found `{token}`"),
            });
        };
        let key = &token[..eq];
        let raw = &token[eq + 1..];
        if key.is_empty() || raw.is_empty() {
            return Err(Error::Syntax {
                pos,
                msg: format!("empty key or value in `{token}`"),
            });
        }
        let value = if key == "rows" {
            let rows: Vec<Vec<f64>> = serde_json::from_str(raw).map_err(|e| Error::Syntax {
                pos: pos + eq + 1,
                msg: format!("rows must be a nested numeric array: {e}"),
            })?;
            RawValue::Rows(rows)
        } else if let Ok(v) = raw.parse::<f64>() {
            RawValue::Number(v)
        } else {
            RawValue::Text(raw.to_string())
        };
        if fields.insert(key.to_string(), (value, pos)).is_some() {
            return Err(Error::Syntax {
                pos,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(fields)
}

/// Splits on whitespace outside brackets; strips `#` comments.
fn tokenize(text: &str) -> Result<Vec<(usize, String)>> {
    let mut tokens = Vec::new();
    let mut depth = 0usize;
    let mut start: Option<usize> = None;
    let mut in_comment = false;
    for (i, c) in text.char_indices() {
        if in_comment {
            if c == '\n' {
                in_comment = false;
            }
            continue;
        }
        match c {
            '#' if depth == 0 => {
                if let Some(s) = start.take() {
                    tokens.push((s, text[s..i].to_string()));
                }
                in_comment = true;
            }
            '[' => {
                depth += 1;
                start.get_or_insert(i);
            }
            ']' => {
                if depth == 0 {
                    return Err(Error::Syntax {
                        pos: i,
                        msg: "unbalanced `]`".into(),
                    });
                }
                depth -= 1;
            }
            c if c.is_whitespace() && depth == 0 => {
                if let Some(s) = start.take() {
                    tokens.push((s, text[s..i].to_string()));
                }
            }
            _ => {
                start.get_or_insert(i);
            }
        }
    }
    if depth != 0 {
        return Err(Error::Syntax {
            pos: text.len(),
            msg: "unterminated `[`".into(),
        });
    }
    if let Some(s) = start {
        tokens.push((s, text[s..].trim_end().to_string()));
    }
    Ok(tokens)
}

fn json_fields(text: &str, offset: usize) -> Result<BTreeMap<String, (RawValue, usize)>> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Syntax {
        pos: offset + byte_offset(text, e.line(), e.column()),
        msg: e.to_string(),
    })?;
    let serde_json::Value::Object(map) = value else {
        return Err(Error::Syntax {
            pos: offset,
            msg: "expected a JSON object".into(),
        });
    };
    let mut fields = BTreeMap::new();
    for (key, v) in map {
        let raw = match (key.as_str(), v) {
            ("rows", v) => RawValue::Rows(serde_json::from_value(v).map_err(|e| Error::Syntax {
                pos: offset,
                msg: format!("rows must be a nested numeric array: {e}"),
            })?),
            (_, serde_json::Value::Number(n)) => RawValue::Number(n.as_f64().unwrap_or(f64::NAN)),
            (_, serde_json::Value::String(s)) => match s.parse::<f64>() {
                Ok(v) if !matches!(key.as_str(), "family" | "mode" | "file") => {
                    RawValue::Number(v)
                }
                _ => RawValue::Text(s),
            },
            (k, other) => {
                return Err(Error::Syntax {
                    pos: offset,
                    msg: format!("unsupported value for `{k}`: {other}"),
                })
            }
        };
        fields.insert(key, (raw, offset));
    }
    Ok(fields)
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (idx, l) in text.split_inclusive('\n').enumerate() {
        if idx + 1 == line {
            return offset + column.saturating_sub(1);
        }
        offset += l.len();
    }
    offset
}

fn build_spec(mut fields: BTreeMap<String, (RawValue, usize)>, base: &Path) -> Result<KernelSpec> {
    const KNOWN: [&str; 8] = ["family", "mode", "beta", "sigma", "p", "scale", "rows", "file"];
    if let Some(k) = fields.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(Error::UnknownKey(k.clone()));
    }
    let family = match fields.remove("family") {
        Some((RawValue::Text(s), _)) => Family::parse(&s)?,
        Some((other, pos)) => {
            return Err(Error::Syntax {
                pos,
                msg: format!("family must be a name, got {other:?}"),
            })
        }
        None => return Err(Error::InvalidParam("missing required key `family`".into())),
    };
    let explicit_mode = match fields.remove("mode") {
        Some((RawValue::Text(s), _)) => Some(TimeMode::parse(&s)?),
        Some((other, pos)) => {
            return Err(Error::Syntax {
                pos,
                msg: format!("mode must be a name, got {other:?}"),
            })
        }
        None => None,
    };
    let mut number = |name: &'static str, default: f64| -> Result<f64> {
        match fields.remove(name) {
            Some((RawValue::Number(v), _)) => Ok(v),
            Some((other, pos)) => Err(Error::Syntax {
                pos,
                msg: format!("`{name}` must be a number, got {other:?}"),
            }),
            None => Ok(default),
        }
    };
    let params = match family {
        Family::Tc => KernelParams::Tc {
            beta: number("beta", 1.0)?,
        },
        Family::Gaussian => KernelParams::Gaussian {
            sigma: number("sigma", 1.0)?,
        },
        Family::RankOne => KernelParams::RankOne {
            decay: number("beta", 1.0)?,
            scale: number("scale", 1.0)?,
        },
        Family::Diagonal => KernelParams::Diagonal {
            p: number("p", 1.0)?,
        },
        Family::Matrix => {
            let rows = match (fields.remove("rows"), fields.remove("file")) {
                (Some((RawValue::Rows(r), _)), None) => r,
                (None, Some((RawValue::Text(path), _))) => read_matrix_csv(&base.join(path))?,
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidParam(
                        "matrix family takes either `rows` or `file`, not both".into(),
                    ))
                }
                _ => {
                    return Err(Error::InvalidParam(
                        "matrix family requires `rows` or `file`".into(),
                    ))
                }
            };
            KernelParams::Matrix(SquareMatrix::from_rows(&rows)?)
        }
    };
    if let Some(k) = fields.keys().next() {
        return Err(Error::InvalidParam(format!(
            "key `{k}` does not apply to family `{family}`"
        )));
    }
    let mode = explicit_mode.unwrap_or(if family.discrete_only() {
        TimeMode::Discrete
    } else {
        TimeMode::Continuous
    });
    KernelSpec::new(params, mode)
}

/// Reads a comma-separated matrix with one row per line and no header.
pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::Format(format!(
                        "{}:{}: `{}` is not a number",
                        path.display(),
                        lineno + 1,
                        cell.trim()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}
