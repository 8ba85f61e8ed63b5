//! Time-indexed sequences of fields: controls, running targets, bounds.

use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid2D};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeq {
    grid: Grid2D,
    fields: Vec<Field>,
}

/// A distributed control, one field per time step (piecewise constant in time).
pub type Control = FieldSeq;

impl FieldSeq {
    pub fn new(grid: &Grid2D, fields: Vec<Field>) -> Result<Self> {
        for f in &fields {
            grid.check_same(f.grid())?;
        }
        Ok(Self { grid: *grid, fields })
    }

    pub fn zeros(grid: &Grid2D, len: usize) -> Self {
        Self::constant(grid, len, 0.0)
    }

    pub fn constant(grid: &Grid2D, len: usize, c: f64) -> Self {
        Self {
            grid: *grid,
            fields: vec![Field::constant(grid, c); len],
        }
    }

    /// `f(n, x, y)` sampled at every step and node.
    pub fn from_fn(grid: &Grid2D, len: usize, f: impl Fn(usize, f64, f64) -> f64) -> Self {
        Self {
            grid: *grid,
            fields: (0..len).map(|n| Field::from_fn(grid, |x, y| f(n, x, y))).collect(),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn get(&self, n: usize) -> &Field {
        &self.fields[n]
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Field> {
        self.fields.iter()
    }

    pub fn check_shape(&self, other: &FieldSeq) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch(format!(
                "sequence lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FieldSeq {
        FieldSeq {
            grid: self.grid,
            fields: self.fields.iter().map(|x| x.map(&f)).collect(),
        }
    }

    pub fn zip_map(&self, other: &FieldSeq, f: impl Fn(f64, f64) -> f64) -> Result<FieldSeq> {
        self.check_shape(other)?;
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.zip_map(b, &f))
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldSeq {
            grid: self.grid,
            fields,
        })
    }

    pub fn axpy(&mut self, a: f64, x: &FieldSeq) -> Result<()> {
        self.check_shape(x)?;
        for (s, v) in self.fields.iter_mut().zip(&x.fields) {
            s.axpy(a, v)?;
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> FieldSeq {
        self.map(|v| a * v)
    }

    /// `sum_n dt <a_n, b_n>`: rectangle rule in time, trapezoid in space.
    pub fn q_inner(&self, other: &FieldSeq, dt: f64) -> Result<f64> {
        self.check_shape(other)?;
        let mut s = 0.0;
        for (a, b) in self.fields.iter().zip(&other.fields) {
            s += a.inner(b)?;
        }
        Ok(dt * s)
    }

    pub fn q_norm(&self, dt: f64) -> f64 {
        self.q_inner(self, dt).expect("same shape").sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.fields.iter().fold(0.0, |m, f| m.max(f.norm_inf()))
    }

    pub fn is_finite(&self) -> bool {
        self.fields.iter().all(Field::is_finite)
    }

    /// Checksum of the grid and all values, used to tie trajectories to the
    /// control that produced them.
    pub fn checksum(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.grid.nx().hash(&mut h);
        self.grid.ny().hash(&mut h);
        self.grid.lx().to_bits().hash(&mut h);
        self.grid.ly().to_bits().hash(&mut h);
        self.fields.len().hash(&mut h);
        for f in &self.fields {
            for v in f.values() {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}
