//! Finite-difference stencils with homogeneous Neumann (mirror) boundaries.
//!
//! Every operator here is written in flux form over a node-centred control
//! volume whose size matches the trapezoid weight of the node, so the
//! discrete integrals of `laplacian` and `chemotaxis_div` telescope to zero.

use crate::error::Result;
use crate::grid::{Field, Grid2D};

/// `out = Delta_h f` (5-point stencil, mirror ghosts).
pub fn laplacian_into(grid: &Grid2D, f: &[f64], out: &mut [f64]) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let ihx2 = 1.0 / (grid.hx() * grid.hx());
    let ihy2 = 1.0 / (grid.hy() * grid.hy());
    for j in 0..ny {
        let row = j * nx;
        // row offsets of the lower and upper neighbours (mirrored at the edges)
        let down = if j == 0 { row + nx } else { row - nx };
        let up = if j == ny - 1 { row - nx } else { row + nx };
        for i in 0..nx {
            let k = row + i;
            let left = if i == 0 { k + 1 } else { k - 1 };
            let right = if i == nx - 1 { k - 1 } else { k + 1 };
            let c = f[k];
            out[k] = (f[left] + f[right] - 2.0 * c) * ihx2 + (f[down + i] + f[up + i] - 2.0 * c) * ihy2;
        }
    }
}

/// `out = -Delta_h f`, the positive semidefinite form used by the solvers.
pub fn neg_laplacian_into(grid: &Grid2D, f: &[f64], out: &mut [f64]) {
    laplacian_into(grid, f, out);
    for v in out.iter_mut() {
        *v = -*v;
    }
}

pub fn laplacian_neumann(f: &Field) -> Field {
    let mut out = Field::zeros(f.grid());
    laplacian_into(f.grid(), f.values(), out.values_mut());
    out
}

/// `out = div(sigma grad phi)` with arithmetic face averages of `sigma` and
/// zero flux through the boundary.
pub fn chemotaxis_div_into(grid: &Grid2D, sigma: &[f64], phi: &[f64], out: &mut [f64]) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let ihx2 = 1.0 / (grid.hx() * grid.hx());
    let ihy2 = 1.0 / (grid.hy() * grid.hy());
    for j in 0..ny {
        let wy = grid.edge_factor_y(j);
        for i in 0..nx {
            let k = j * nx + i;
            let mut fx = 0.0;
            if i + 1 < nx {
                fx += 0.5 * (sigma[k] + sigma[k + 1]) * (phi[k + 1] - phi[k]);
            }
            if i > 0 {
                fx -= 0.5 * (sigma[k] + sigma[k - 1]) * (phi[k] - phi[k - 1]);
            }
            let mut fy = 0.0;
            if j + 1 < ny {
                fy += 0.5 * (sigma[k] + sigma[k + nx]) * (phi[k + nx] - phi[k]);
            }
            if j > 0 {
                fy -= 0.5 * (sigma[k] + sigma[k - nx]) * (phi[k] - phi[k - nx]);
            }
            out[k] = fx * ihx2 / grid.edge_factor_x(i) + fy * ihy2 / wy;
        }
    }
}

pub fn chemotaxis_div(sigma: &Field, phi: &Field) -> Result<Field> {
    sigma.grid().check_same(phi.grid())?;
    let mut out = Field::zeros(sigma.grid());
    chemotaxis_div_into(sigma.grid(), sigma.values(), phi.values(), out.values_mut());
    Ok(out)
}

/// Adjoint of `zeta -> div(zeta grad phi)` in the trapezoid inner product,
/// i.e. the discrete `-grad phi . grad v`, evaluated at every node.
pub fn chemotaxis_div_adjoint_into(grid: &Grid2D, phi: &[f64], v: &[f64], out: &mut [f64]) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let ihx2 = 1.0 / (grid.hx() * grid.hx());
    let ihy2 = 1.0 / (grid.hy() * grid.hy());
    for j in 0..ny {
        let wy = grid.edge_factor_y(j);
        for i in 0..nx {
            let k = j * nx + i;
            let mut sx = 0.0;
            if i + 1 < nx {
                sx += (phi[k + 1] - phi[k]) * (v[k + 1] - v[k]);
            }
            if i > 0 {
                sx += (phi[k] - phi[k - 1]) * (v[k] - v[k - 1]);
            }
            let mut sy = 0.0;
            if j + 1 < ny {
                sy += (phi[k + nx] - phi[k]) * (v[k + nx] - v[k]);
            }
            if j > 0 {
                sy += (phi[k] - phi[k - nx]) * (v[k] - v[k - nx]);
            }
            out[k] = -0.5 * (sx * ihx2 / grid.edge_factor_x(i) + sy * ihy2 / wy);
        }
    }
}

pub fn chemotaxis_div_adjoint(phi: &Field, v: &Field) -> Result<Field> {
    phi.grid().check_same(v.grid())?;
    let mut out = Field::zeros(phi.grid());
    chemotaxis_div_adjoint_into(phi.grid(), phi.values(), v.values(), out.values_mut());
    Ok(out)
}

/// `<grad_h f, grad_h g>` summed over faces with trapezoid face weights.
/// Equals `<-Delta_h f, g>` exactly.
pub fn gradient_inner(f: &Field, g: &Field) -> Result<f64> {
    f.grid().check_same(g.grid())?;
    let grid = f.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (a, b) = (f.values(), g.values());
    let mut sx = 0.0;
    let mut sy = 0.0;
    for j in 0..ny {
        let wy = grid.edge_factor_y(j);
        for i in 0..nx {
            let k = j * nx + i;
            if i + 1 < nx {
                sx += wy * (a[k + 1] - a[k]) * (b[k + 1] - b[k]);
            }
            if j + 1 < ny {
                sy += grid.edge_factor_x(i) * (a[k + nx] - a[k]) * (b[k + nx] - b[k]);
            }
        }
    }
    Ok(sx * grid.hy() / grid.hx() + sy * grid.hx() / grid.hy())
}

/// Discrete `H^1` norm: `sqrt(|f|^2 + |grad f|^2)`.
pub fn h1_norm(f: &Field) -> f64 {
    let g = gradient_inner(f, f).expect("same grid");
    (f.norm().powi(2) + g).sqrt()
}
