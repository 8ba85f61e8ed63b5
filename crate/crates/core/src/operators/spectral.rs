//! Exact diagonalisation of the mirror-Neumann Laplacian.
//!
//! The 1D stencil with mirror ghosts has eigenvectors `cos(k pi i / (n-1))`,
//! which is the DCT-I basis. The 2D operator is a tensor sum, so any function
//! of `-Delta_h` can be applied with two separable DCT-I passes.

use std::sync::Arc;

use rustdct::{Dct1, DctPlanner};

use crate::grid::Grid2D;

pub struct NeumannSpectrum {
    grid: Grid2D,
    dct_x: Arc<dyn Dct1<f64>>,
    dct_y: Arc<dyn Dct1<f64>>,
    /// Eigenvalues of `-Delta_h` along x, ascending, first is zero.
    eig_x: Vec<f64>,
    eig_y: Vec<f64>,
}

impl std::fmt::Debug for NeumannSpectrum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeumannSpectrum").field("grid", &self.grid).finish()
    }
}

fn eigenvalues(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let theta = std::f64::consts::PI * k as f64 / (n - 1) as f64;
            (2.0 - 2.0 * theta.cos()) / (h * h)
        })
        .collect()
}

impl NeumannSpectrum {
    pub fn new(grid: &Grid2D) -> Self {
        let mut planner = DctPlanner::new();
        Self {
            grid: *grid,
            dct_x: planner.plan_dct1(grid.nx()),
            dct_y: planner.plan_dct1(grid.ny()),
            eig_x: eigenvalues(grid.nx(), grid.hx()),
            eig_y: eigenvalues(grid.ny(), grid.hy()),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Largest eigenvalue of `-Delta_h`.
    pub fn max_eigenvalue(&self) -> f64 {
        self.eig_x[self.eig_x.len() - 1] + self.eig_y[self.eig_y.len() - 1]
    }

    fn transform(&self, data: &mut [f64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        for row in data.chunks_exact_mut(nx) {
            self.dct_x.process_dct1(row);
        }
        let mut col = vec![0.0; ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = data[j * nx + i];
            }
            self.dct_y.process_dct1(&mut col);
            for j in 0..ny {
                data[j * nx + i] = col[j];
            }
        }
    }

    /// Replaces `data` by `f(-Delta_h) data`.
    pub fn apply_symbol(&self, data: &mut [f64], symbol: impl Fn(f64) -> f64) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        debug_assert_eq!(data.len(), nx * ny);
        self.transform(data);
        // DCT-I applied twice multiplies by (n-1)/2 per axis.
        let norm = 4.0 / ((nx - 1) as f64 * (ny - 1) as f64);
        for j in 0..ny {
            for i in 0..nx {
                data[j * nx + i] *= norm * symbol(self.eig_x[i] + self.eig_y[j]);
            }
        }
        self.transform(data);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Field;
    use crate::operators::stencil::neg_laplacian_into;

    #[test]
    fn identity_symbol_round_trips() {
        let g = Grid2D::new(9, 6, 1.0, 0.5).unwrap();
        let sp = NeumannSpectrum::new(&g);
        let f = Field::from_fn(&g, |x, y| (3.0 * x).sin() + y * y - x * y);
        let mut d = f.values().to_vec();
        sp.apply_symbol(&mut d, |_| 1.0);
        for (a, b) in d.iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn reproduces_the_stencil() {
        let g = Grid2D::new(12, 7, 1.0, 0.8).unwrap();
        let sp = NeumannSpectrum::new(&g);
        let f = Field::from_fn(&g, |x, y| (2.0 * x).exp() * (1.0 + y).ln());
        let mut spec = f.values().to_vec();
        sp.apply_symbol(&mut spec, |nu| nu);
        let mut direct = vec![0.0; g.len()];
        neg_laplacian_into(&g, f.values(), &mut direct);
        let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in spec.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-11 * scale);
        }
    }

    #[test]
    fn inverts_shifted_operator() {
        let g = Grid2D::unit_square(10).unwrap();
        let sp = NeumannSpectrum::new(&g);
        let f = Field::from_fn(&g, |x, y| x - y * y);
        let mut u = f.values().to_vec();
        sp.apply_symbol(&mut u, |nu| 1.0 / (2.0 + nu));
        let mut lu = vec![0.0; g.len()];
        neg_laplacian_into(&g, &u, &mut lu);
        for k in 0..g.len() {
            assert!((2.0 * u[k] + lu[k] - f.values()[k]).abs() < 1e-12);
        }
    }
}
