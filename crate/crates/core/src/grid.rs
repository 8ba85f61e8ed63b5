//! Uniform rectangular grids and real-valued grid functions.
//!
//! Nodes sit at `(i * hx, j * hy)` for `i < nx`, `j < ny`, stored row-major
//! with `j` outer and `i` inner. All space integrals use trapezoid weights
//! (1 inside, 1/2 on edges, 1/4 on corners, times `hx * hy`), which makes the
//! mirror-reflection Neumann Laplacian self-adjoint in the induced inner
//! product.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 3 nodes per axis, got {nx}x{ny}"
            )));
        }
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid side lengths must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / (nx - 1) as f64,
            hy: ly / (ny - 1) as f64,
        })
    }

    /// `n x n` nodes on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    /// 1D trapezoid factor along x: 1/2 at the ends, 1 inside.
    #[inline]
    pub fn edge_factor_x(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx - 1 {
            0.5
        } else {
            1.0
        }
    }

    #[inline]
    pub fn edge_factor_y(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny - 1 {
            0.5
        } else {
            1.0
        }
    }

    /// Quadrature weight of node `(i, j)`, including the cell area.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.edge_factor_x(i) * self.edge_factor_y(j) * self.hx * self.hy
    }

    /// All quadrature weights in storage order.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                w.push(self.weight(i, j));
            }
        }
        w
    }

    pub fn check_same(&self, other: &Grid2D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}x{} on {}x{} vs {}x{} on {}x{}",
                self.nx, self.ny, self.lx, self.ly, other.nx, other.ny, other.lx, other.ly
            )))
        }
    }
}

/// A scalar grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid2D, c: f64) -> Self {
        Self {
            grid: *grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: &Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid: *grid, values })
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self { grid: *grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Field) -> Result<()> {
        self.grid.check_same(&x.grid)?;
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the smallest entry as `(i, j)`.
    pub fn argmin(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v < self.values[best] {
                best = k;
            }
        }
        (best % self.grid.nx(), best / self.grid.nx())
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Trapezoid-weighted L2 inner product.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(weighted_dot(&self.grid, &self.values, &other.values))
    }

    /// Trapezoid-weighted L2 norm.
    pub fn norm(&self) -> f64 {
        weighted_dot(&self.grid, &self.values, &self.values).sqrt()
    }

    /// Integral of the field over the domain.
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for j in 0..g.ny() {
            let mut row = 0.0;
            for i in 0..g.nx() {
                row += g.edge_factor_x(i) * self.values[g.index(i, j)];
            }
            s += g.edge_factor_y(j) * row;
        }
        s * g.hx() * g.hy()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.grid.area()
    }
}

/// Trapezoid inner product of two raw node arrays on `grid`.
pub fn weighted_dot(grid: &Grid2D, a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), grid.len());
    debug_assert_eq!(b.len(), grid.len());
    let nx = grid.nx();
    let mut s = 0.0;
    for j in 0..grid.ny() {
        let row = j * nx;
        let mut acc = 0.5 * (a[row] * b[row] + a[row + nx - 1] * b[row + nx - 1]);
        for i in 1..nx - 1 {
            acc += a[row + i] * b[row + i];
        }
        s += grid.edge_factor_y(j) * acc;
    }
    s * grid.hx() * grid.hy()
}

/// Discrete L2 inner product (trapezoid rule in space).
pub fn field_inner(f: &Field, g: &Field) -> Result<f64> {
    f.inner(g)
}

/// Mean value `<f, 1> / |Omega|`.
pub fn field_mean(f: &Field) -> f64 {
    f.mean()
}
