//! Functions on `[0, 1]` sampled on a regular grid, with the discrete
//! inner product `<a, b>_d = (1/d) * sum_k a(x_k) b(x_k)`.
//!
//! The grid always includes both endpoints. Quadrature weights are the plain
//! `1/d` average, with no endpoint half-weights, so that estimator values are
//! reproducible at a fixed `d`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Regular grid `0 = x_1 < ... < x_d = 1`.
///
/// A one-point grid is allowed and consists of the single point `0`; it is
/// how scalar covariates are represented.
#[derive(Clone)]
pub struct Grid {
    points: Arc<[f64]>,
}

impl Grid {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("grid needs at least one point"));
        }
        let points: Vec<f64> = if d == 1 {
            vec![0.0]
        } else {
            let step = (d - 1) as f64;
            (0..d).map(|k| k as f64 / step).collect()
        };
        Ok(Self {
            points: points.into(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Grid spacing, `0` for the one-point grid.
    pub fn spacing(&self) -> f64 {
        if self.len() < 2 {
            0.0
        } else {
            1.0 / (self.len() - 1) as f64
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        // A regular grid on [0, 1] is fully determined by its size.
        self.len() == other.len()
    }
}

impl Eq for Grid {}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid(d={})", self.len())
    }
}

/// A function sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionSample {
    grid: Grid,
    values: Vec<f64>,
}

impl FunctionSample {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                left: grid.len(),
                right: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "function value at grid index {pos} is not finite"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Builds a sample whose grid is implied by the number of values.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let grid = Grid::new(values.len())?;
        Self::new(grid, values)
    }

    /// Evaluates `f` at each grid point.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid.clone(), values)
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        Self::new(grid.clone(), vec![c; grid.len()])
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Returns `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Self) -> Result<Self> {
        check_grids(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        inner_product(self, other)
    }

    pub fn norm(&self) -> f64 {
        norm(self)
    }

    /// Distance `||self - other||`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        check_grids(self, other)?;
        let ss: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((ss / self.len() as f64).sqrt())
    }
}

fn check_grids(a: &FunctionSample, b: &FunctionSample) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch {
            left: a.grid.len(),
            right: b.grid.len(),
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn dot_raw(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Discrete inner product `(1/d) * sum_k a_k b_k`.
pub fn inner_product(a: &FunctionSample, b: &FunctionSample) -> Result<f64> {
    check_grids(a, b)?;
    Ok(dot_raw(&a.values, &b.values) / a.len() as f64)
}

pub fn norm(a: &FunctionSample) -> f64 {
    (dot_raw(&a.values, &a.values) / a.len() as f64).sqrt()
}

/// Norms at or below `1e-300 * d` are treated as zero.
pub fn degeneracy_threshold(d: usize) -> f64 {
    1e-300 * d as f64
}

/// Rescales `a` to unit norm.
pub fn normalize(a: &FunctionSample) -> Result<FunctionSample> {
    let n = norm(a);
    if !(n > degeneracy_threshold(a.len())) {
        return Err(Error::DegenerateDirection(format!(
            "cannot normalize a function of norm {n:e}"
        )));
    }
    Ok(a.scaled(1.0 / n))
}

/// Gram-Schmidt step: the unit-norm component of `a` orthogonal to the unit
/// vector `against`.
pub fn orthogonalize(a: &FunctionSample, against: &FunctionSample) -> Result<FunctionSample> {
    check_grids(a, against)?;
    let scale = norm(a);
    let mut r = a.clone();
    // Two passes keep the result orthogonal to round-off level.
    for _ in 0..2 {
        let c = inner_product(&r, against)?;
        r = r.add_scaled(-c, against)?;
    }
    if !(norm(&r) > 1e-10 * scale) {
        return Err(Error::DegenerateDirection(
            "input is collinear with the reference direction".into(),
        ));
    }
    normalize(&r)
}
