//! Preconditioner for path optimization: the inverse of a flat Sobolev
//! operator in space tensored with the inverse discrete Laplacian in time.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::ParamGrid;

pub(crate) struct PathPreconditioner {
    n_u: usize,
    n_v: usize,
    dim: usize,
    slices: usize,
    /// `1 / Σ_{j≤k} λ^j` per Fourier mode, `λ` the symbol of `−Δ` built from
    /// the grid stencil.
    inv_symbol: Vec<f64>,
    fwd_u: Arc<dyn Fft<f64>>,
    inv_u: Arc<dyn Fft<f64>>,
    fwd_v: Arc<dyn Fft<f64>>,
    inv_v: Arc<dyn Fft<f64>>,
}

fn derivative_symbol(grid: &ParamGrid, n: usize, h: f64) -> Vec<f64> {
    let c = grid.stencil_coefficients();
    (0..n)
        .map(|m| {
            let theta = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
            let s: f64 = c.iter().enumerate().map(|(j, cj)| 2.0 * cj * ((j + 1) as f64 * theta).sin()).sum();
            s / h
        })
        .collect()
}

impl PathPreconditioner {
    pub(crate) fn new(grid: ParamGrid, dim: usize, slices: usize, k: usize) -> Self {
        let (n_u, n_v) = (grid.n_u(), grid.n_v());
        let (hu, hv) = grid.spacing();
        let su = derivative_symbol(&grid, n_u, hu);
        let sv = derivative_symbol(&grid, n_v, hv);
        let mut inv_symbol = Vec::with_capacity(n_u * n_v);
        for b in &sv {
            for a in &su {
                let lam = a * a + b * b;
                let s: f64 = (0..=k).map(|j| lam.powi(j as i32)).sum();
                inv_symbol.push(1.0 / s);
            }
        }
        let mut planner = FftPlanner::new();
        PathPreconditioner {
            n_u,
            n_v,
            dim,
            slices,
            inv_symbol,
            fwd_u: planner.plan_fft_forward(n_u),
            inv_u: planner.plan_fft_inverse(n_u),
            fwd_v: planner.plan_fft_forward(n_v),
            inv_v: planner.plan_fft_inverse(n_v),
        }
    }

    fn spatial(&self, values: &mut [f64]) {
        let (nu, nv, d) = (self.n_u, self.n_v, self.dim);
        let mut buf = vec![Complex::new(0.0, 0.0); nu * nv];
        let mut col = vec![Complex::new(0.0, 0.0); nv];
        for comp in 0..d {
            for (node, z) in buf.iter_mut().enumerate() {
                *z = Complex::new(values[node * d + comp], 0.0);
            }
            self.fwd_u.process(&mut buf);
            for i in 0..nu {
                for j in 0..nv {
                    col[j] = buf[i + nu * j];
                }
                self.fwd_v.process(&mut col);
                for (j, z) in col.iter_mut().enumerate() {
                    *z *= self.inv_symbol[i + nu * j];
                }
                self.inv_v.process(&mut col);
                for j in 0..nv {
                    buf[i + nu * j] = col[j];
                }
            }
            self.inv_u.process(&mut buf);
            let norm = 1.0 / (nu * nv) as f64;
            for (node, z) in buf.iter().enumerate() {
                values[node * d + comp] = z.re * norm;
            }
        }
    }

    /// Applies the preconditioner to interior degrees of freedom laid out
    /// slice by slice.
    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        let len = self.n_u * self.n_v * self.dim;
        let mut out = x.to_vec();
        for slice in out.chunks_exact_mut(len) {
            self.spatial(slice);
        }
        // tridiagonal [-1, 2, -1] with Dirichlet ends, Thomas algorithm per dof
        let m = self.slices;
        let mut c = vec![-0.5; m];
        for t in 1..m {
            c[t] = -1.0 / (2.0 + c[t - 1]);
        }
        for dof in 0..len {
            let at = |t: usize| t * len + dof;
            out[at(0)] *= 0.5;
            for t in 1..m {
                out[at(t)] = (out[at(t)] + out[at(t - 1)]) / (2.0 + c[t - 1]);
            }
            for t in (0..m.saturating_sub(1)).rev() {
                out[at(t)] -= c[t] * out[at(t + 1)];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_solve_inverts_the_laplacian() {
        let grid = ParamGrid::square(8).unwrap();
        let p = PathPreconditioner::new(grid, 1, 5, 0);
        let len = 64;
        // k = 0 makes the spatial factor 1/1, leaving the time solve
        let x: Vec<f64> = (0..5 * len).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let y = p.apply(&x);
        for dof in 0..len {
            for t in 0..5 {
                let get = |s: isize| if s < 0 || s >= 5 { 0.0 } else { y[s as usize * len + dof] };
                let t = t as isize;
                let lhs = 2.0 * get(t) - get(t - 1) - get(t + 1);
                assert!((lhs - x[t as usize * len + dof]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constants_pass_through_the_spatial_factor() {
        let grid = ParamGrid::square(8).unwrap();
        let p = PathPreconditioner::new(grid, 2, 1, 3);
        let mut v = vec![1.5; 128];
        p.spatial(&mut v);
        assert!(v.iter().all(|x| (x - 1.5).abs() < 1e-14));
    }
}
