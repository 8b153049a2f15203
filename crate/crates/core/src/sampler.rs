//! Seeded band-limited random fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::grid::{ParamGrid, TensorField, TensorType};

/// Random trigonometric polynomials `Σ a cos(pu + qv) + b sin(pu + qv)` with
/// `|p|, |q| ≤ max_freq` and standard normal coefficients per component.
///
/// Sample `index` depends only on `(seed, index, dim, max_freq)`, never on the
/// grid, so the same continuous field can be resampled at several resolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FieldSampler {
    pub max_freq: usize,
    pub seed: u64,
}

impl FieldSampler {
    pub fn new(max_freq: usize, seed: u64) -> Self {
        FieldSampler { max_freq, seed }
    }

    /// Gaussian Fourier coefficients behind sample `index`, ordered by
    /// component, `u` frequency, `v` frequency, then cosine and sine.
    pub fn coefficients(&self, dim: usize, index: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let k = self.max_freq;
        let count = (k + 1) * (2 * k + 1) * 2 * dim;
        (0..count).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// An `R^dim`-valued `(0, 0, 1)` field.
    pub fn sample(&self, grid: ParamGrid, dim: usize, index: u64) -> TensorField {
        let coeffs = self.coefficients(dim, index);
        let k = self.max_freq as i64;
        let nq = (2 * k + 1) as usize;
        let (nu, nv) = (grid.n_u(), grid.n_v());
        let (hu, hv) = grid.spacing();
        let cu: Vec<Vec<(f64, f64)>> = (0..=k)
            .map(|p| (0..nu).map(|i| (p as f64 * i as f64 * hu).sin_cos()).collect())
            .collect();
        let cv: Vec<Vec<(f64, f64)>> = (-k..=k)
            .map(|q| (0..nv).map(|j| (q as f64 * j as f64 * hv).sin_cos()).collect())
            .collect();
        let mut values = vec![0.0; grid.len() * dim];
        let mut x_p = vec![0.0; nv];
        let mut y_p = vec![0.0; nv];
        for c in 0..dim {
            for p in 0..=k as usize {
                x_p.iter_mut().for_each(|x| *x = 0.0);
                y_p.iter_mut().for_each(|x| *x = 0.0);
                for qi in 0..nq {
                    let q = qi as i64 - k;
                    // half-plane of modes plus the constant term
                    if p == 0 && q < 0 {
                        continue;
                    }
                    let base = ((c * (k as usize + 1) + p) * nq + qi) * 2;
                    let (a, b) = (coeffs[base], coeffs[base + 1]);
                    for j in 0..nv {
                        let (sq, cq) = cv[qi][j];
                        x_p[j] += a * cq + b * sq;
                        y_p[j] += b * cq - a * sq;
                    }
                }
                for j in 0..nv {
                    for i in 0..nu {
                        let (sp, cp) = cu[p][i];
                        values[(i + nu * j) * dim + c] += cp * x_p[j] + sp * y_p[j];
                    }
                }
            }
        }
        TensorField::from_raw(grid, TensorType::VECTOR, dim, values)
    }

    /// Sample normalized to unit maximum component.
    pub fn sample_normalized(&self, grid: ParamGrid, dim: usize, index: u64) -> TensorField {
        let f = self.sample(grid, dim, index);
        let m = f.max_abs();
        if m > 0.0 {
            f.scaled(1.0 / m)
        } else {
            f
        }
    }
}
