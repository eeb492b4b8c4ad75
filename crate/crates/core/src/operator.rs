//! Quadrature grids, discretized kernel operators and the weighted 1-norm.
//!
//! A continuous kernel on `[0, T]²` is sampled at midpoint nodes
//! `t_i = (i + 1/2) h`; the input-side measure `dτ` is folded into the
//! matrix as a factor `h`, while the output-side measure `dt` is applied by
//! [`l1_norm`]. Discrete kernels use the counting measure, so both weights
//! are one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelEvaluator, TimeMode};
use crate::matrix::SquareMatrix;

/// Uniform grid on `[0, horizon)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub mode: TimeMode,
    pub horizon: f64,
    pub step: f64,
    #[serde(skip)]
    n: usize,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Quadrature weight of every node.
    pub fn weight(&self) -> f64 {
        match self.mode {
            TimeMode::Continuous => self.step,
            TimeMode::Discrete => 1.0,
        }
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        match self.mode {
            TimeMode::Continuous => (i as f64 + 0.5) * self.step,
            TimeMode::Discrete => (i + 1) as f64,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Discrete grid with `n` integer nodes.
    pub fn discrete(n: usize) -> Result<Self> {
        build_grid(n as f64, 1.0, TimeMode::Discrete)
    }

    /// True when `self` is a leading segment of `other` with the same step.
    pub fn is_prefix_of(&self, other: &Grid) -> bool {
        self.mode == other.mode && self.step == other.step && self.n <= other.n
    }

    /// Rebuilds the node count after deserialization.
    pub fn revalidate(self) -> Result<Self> {
        build_grid(self.horizon, self.step, self.mode)
    }
}

/// Builds a grid. Discrete grids take `horizon` as the node count and require `step == 1`.
pub fn build_grid(horizon: f64, step: f64, mode: TimeMode) -> Result<Grid> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidGrid(format!("horizon must be > 0, got {horizon}")));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidGrid(format!("step must be > 0, got {step}")));
    }
    let n = match mode {
        TimeMode::Discrete => {
            if step != 1.0 {
                return Err(Error::InvalidGrid(format!(
                    "discrete grids use the counting measure (step 1), got {step}"
                )));
            }
            if horizon.fract() != 0.0 {
                return Err(Error::InvalidGrid(format!(
                    "discrete horizon must be an integer node count, got {horizon}"
                )));
            }
            horizon as usize
        }
        TimeMode::Continuous => {
            let n = (horizon / step).round();
            if n < 1.0 {
                return Err(Error::InvalidGrid(format!(
                    "step {step} is larger than twice the horizon {horizon}"
                )));
            }
            let n = n as usize;
            if (n as f64 - 0.5) * step >= horizon {
                return Err(Error::InvalidGrid(format!(
                    "step {step} does not fit horizon {horizon}: last midpoint falls outside"
                )));
            }
            n
        }
    };
    Ok(Grid {
        mode,
        horizon,
        step,
        n,
    })
}

/// Real values on grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub values: Vec<f64>,
    pub grid: Grid,
}

impl TestFunction {
    pub fn new(values: Vec<f64>, grid: Grid) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { values, grid })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: grid.nodes().into_iter().map(f).collect(),
            grid,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    /// Membership in the discretized unit sphere of L∞: `max |u_i| = 1`.
    pub fn on_unit_sphere(&self) -> bool {
        self.sup_norm() == 1.0
    }
}

impl AsRef<[f64]> for TestFunction {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// A vector with every entry exactly `-1.0` or `+1.0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignPattern(Vec<i8>);

impl SignPattern {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(i) = signs.iter().position(|s| *s != 1 && *s != -1) {
            return Err(Error::InvalidParam(format!(
                "sign pattern entry {i} is {}, expected ±1",
                signs[i]
            )));
        }
        Ok(Self(signs))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1; n])
    }

    /// Componentwise sign with `sign(0) = +1`.
    pub fn sign_of(values: &[f64]) -> Self {
        Self(values.iter().map(|v| if *v >= 0.0 { 1 } else { -1 }).collect())
    }

    /// Componentwise sign, keeping `previous[i]` wherever `values[i] == 0`.
    pub fn sign_keeping(values: &[f64], previous: &SignPattern) -> Self {
        Self(
            values
                .iter()
                .zip(&previous.0)
                .map(|(v, p)| {
                    if *v > 0.0 {
                        1
                    } else if *v < 0.0 {
                        -1
                    } else {
                        *p
                    }
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn to_values(&self) -> Vec<f64> {
        self.0.iter().map(|s| f64::from(*s)).collect()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }

    pub(crate) fn extend_with(&mut self, sign: i8, count: usize) {
        self.0.extend(std::iter::repeat_n(sign, count));
    }
}

impl Serialize for SignPattern {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SignPattern {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i8>::deserialize(deserializer)?;
        SignPattern::new(v).map_err(serde::de::Error::custom)
    }
}

/// Kernel operator `u ↦ K u` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    matrix: SquareMatrix,
    grid: Grid,
}

impl DiscreteOperator {
    pub fn new(matrix: SquareMatrix, grid: Grid) -> Result<Self> {
        if matrix.dim() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: matrix.dim(),
            });
        }
        Ok(Self { matrix, grid })
    }

    /// Operator on a discrete grid sized to the matrix.
    pub fn from_matrix(matrix: SquareMatrix) -> Self {
        let grid = Grid::discrete(matrix.dim()).expect("matrix has at least one row");
        Self { matrix, grid }
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn negated(&self) -> Self {
        Self {
            matrix: self.matrix.scaled(-1.0),
            grid: self.grid,
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// `y = K u` on the raw values.
    pub fn apply_values(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u.len())?;
        Ok(self.matrix.mul_vec(u))
    }

    pub fn apply(&self, u: &TestFunction) -> Result<TestFunction> {
        Ok(TestFunction {
            values: self.apply_values(&u.values)?,
            grid: self.grid,
        })
    }

    pub fn apply_signs(&self, u: &SignPattern) -> Result<TestFunction> {
        Ok(TestFunction {
            values: self.apply_values(&u.to_values())?,
            grid: self.grid,
        })
    }

    /// `‖K u‖₁` with the grid's output weight.
    pub fn output_l1(&self, u: &[f64]) -> Result<f64> {
        let y = self.apply_values(u)?;
        Ok(weighted_l1(&y, self.grid.weight()))
    }

    pub fn output_l1_signs(&self, u: &SignPattern) -> Result<f64> {
        self.output_l1(&u.to_values())
    }
}

#[inline]
pub(crate) fn weighted_l1(y: &[f64], weight: f64) -> f64 {
    y.iter().map(|v| v.abs() * weight).sum()
}

/// Samples the kernel at grid nodes. Continuous grids fold the column weight `h` into
/// each entry; discrete grids reproduce `K(i, j)` with `i, j ≥ 1`.
pub fn discretize(kernel: &KernelEvaluator, grid: &Grid) -> DiscreteOperator {
    let n = grid.len();
    let w = grid.weight();
    let nodes = grid.nodes();
    let data: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|&s| nodes.iter().map(|&t| kernel.eval(s, t) * w).collect())
        .collect();
    let matrix = SquareMatrix::from_fn(n, |i, j| data[i][j]);
    DiscreteOperator {
        matrix,
        grid: *grid,
    }
}

/// Wraps an explicit matrix on a grid; on a discrete grid the matrix passes through.
pub fn discretize_matrix(matrix: &SquareMatrix, grid: &Grid) -> Result<DiscreteOperator> {
    let m = match grid.mode {
        TimeMode::Discrete => matrix.clone(),
        TimeMode::Continuous => matrix.scaled(grid.weight()),
    };
    DiscreteOperator::new(m, *grid)
}

/// `Σ |y_i| · w`.
pub fn l1_norm(y: &TestFunction) -> f64 {
    weighted_l1(&y.values, y.grid.weight())
}

/// `‖K u‖₁`.
pub fn output_l1(op: &DiscreteOperator, u: &[f64]) -> Result<f64> {
    op.output_l1(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2() -> DiscreteOperator {
        DiscreteOperator::from_matrix(
            SquareMatrix::from_rows(&[vec![1.0, -2.0], vec![3.0, 4.0]]).unwrap(),
        )
    }

    #[test]
    fn midpoint_grids() {
        let g = build_grid(1.0, 0.5, TimeMode::Continuous).unwrap();
        assert_eq!(g.nodes(), vec![0.25, 0.75]);
        assert_eq!(g.weight(), 0.5);

        let g = build_grid(1.0, 0.3, TimeMode::Continuous).unwrap();
        assert_eq!(g.len(), 3);
        let nodes = g.nodes();
        for (a, b) in nodes.iter().zip([0.15, 0.45, 0.75]) {
            assert!((a - b).abs() < 1e-15);
        }

        let g = build_grid(3.0, 1.0, TimeMode::Discrete).unwrap();
        assert_eq!(g.nodes(), vec![1.0, 2.0, 3.0]);
        assert_eq!(g.weight(), 1.0);
    }

    #[test]
    fn grid_errors() {
        assert!(build_grid(0.0, 0.1, TimeMode::Continuous).is_err());
        assert!(build_grid(1.0, -0.1, TimeMode::Continuous).is_err());
        assert!(build_grid(3.0, 0.5, TimeMode::Discrete).is_err());
        assert!(build_grid(2.5, 1.0, TimeMode::Discrete).is_err());
        // round(1/0.4) = 3 would put the last midpoint at 1.0
        assert!(build_grid(1.0, 0.4, TimeMode::Continuous).is_err());
    }

    #[test]
    fn discretize_tc_on_coarse_grid() {
        let grid = build_grid(1.0, 0.5, TimeMode::Continuous).unwrap();
        let op = discretize(&KernelEvaluator::Tc { beta: 1.0 }, &grid);
        let a = 0.5 * (-0.25f64).exp();
        let b = 0.5 * (-0.75f64).exp();
        let expected = [[a, b], [b, b]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((op.matrix().get(i, j) - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_kernel_discretizes_to_zero() {
        let grid = build_grid(2.0, 0.5, TimeMode::Continuous).unwrap();
        let zero = KernelEvaluator::RankOne {
            decay: 1.0,
            scale: 0.0,
        };
        let op = discretize(&zero, &grid);
        assert!(op.matrix().as_slice().iter().all(|v| *v == 0.0));
        let y = op.apply(&TestFunction::from_fn(grid, |t| t.sin())).unwrap();
        assert_eq!(l1_norm(&y), 0.0);
    }

    #[test]
    fn discrete_matrix_passthrough() {
        let m = SquareMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let op = discretize_matrix(&m, &Grid::discrete(2).unwrap()).unwrap();
        assert_eq!(op.matrix(), &m);
    }

    #[test]
    fn apply_and_norms() {
        let op = m2();
        let y = op.apply_values(&[1.0, 1.0]).unwrap();
        assert_eq!(y, vec![-1.0, 7.0]);
        assert_eq!(op.apply_values(&[1.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        assert_eq!(op.output_l1(&[1.0, 1.0]).unwrap(), 8.0);
        assert_eq!(op.output_l1(&[1.0, -1.0]).unwrap(), 4.0);

        let half = build_grid(1.0, 0.5, TimeMode::Continuous).unwrap();
        let yc = TestFunction::new(vec![-1.0, 7.0], half).unwrap();
        assert_eq!(l1_norm(&yc), 4.0);
        let yd = TestFunction::new(vec![-1.0, 7.0], Grid::discrete(2).unwrap()).unwrap();
        assert_eq!(l1_norm(&yd), 8.0);

        let diag = DiscreteOperator::from_matrix(SquareMatrix::from_diagonal(&[1.0, 2.0, 3.0]));
        assert_eq!(diag.output_l1(&[1.0, -1.0, 1.0]).unwrap(), 6.0);

        let zero = DiscreteOperator::from_matrix(SquareMatrix::zeros(3));
        assert_eq!(zero.apply_values(&[0.3, -1.0, 0.2]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            m2().apply_values(&[1.0]).unwrap_err(),
            Error::LengthMismatch { expected: 2, got: 1 }
        ));
    }

    #[test]
    fn sign_conventions() {
        let s = SignPattern::sign_of(&[2.0, -3.0, 0.0]);
        assert_eq!(s.signs(), &[1, -1, 1]);
        let prev = SignPattern::new(vec![-1, -1, -1]).unwrap();
        assert_eq!(SignPattern::sign_keeping(&[2.0, 0.0, -1.0], &prev).signs(), &[1, -1, -1]);
        assert!(SignPattern::new(vec![1, 0]).is_err());
    }
}
