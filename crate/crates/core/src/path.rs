//! Time-discrete paths of immersions and their energy and length.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridImmersion, ParamGrid, TensorField, TensorType};
use crate::metric::{metric_eval_at, MetricConfig};

/// Slices `f_0, …, f_T` on a common grid, uniform step `Δτ = 1/T`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    slices: Vec<GridImmersion>,
    energy: Option<f64>,
}

impl DiscretePath {
    pub fn new(slices: Vec<GridImmersion>) -> Result<Self> {
        if slices.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "a path needs at least 2 slices, got {}",
                slices.len()
            )));
        }
        let (grid, d) = (slices[0].grid(), slices[0].dim());
        if slices.iter().any(|s| s.grid() != grid || s.dim() != d) {
            return Err(Error::ShapeMismatch("path slices differ in grid or dimension".into()));
        }
        Ok(DiscretePath {
            slices,
            energy: None,
        })
    }

    pub fn constant(f: &GridImmersion, steps: usize) -> Result<Self> {
        DiscretePath::new(vec![f.clone(); steps + 1])
    }

    /// `f_t = (1 − t/T) f0 + (t/T) f1`, endpoints copied exactly.
    pub fn linear(f0: &GridImmersion, f1: &GridImmersion, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidConfig("path needs at least one step".into()));
        }
        f0.positions().check_same_shape(f1.positions())?;
        let mut slices = Vec::with_capacity(steps + 1);
        slices.push(f0.clone());
        for t in 1..steps {
            let s = t as f64 / steps as f64;
            let p = f0.positions().scaled(1.0 - s).axpy(s, f1.positions())?;
            slices.push(GridImmersion::new(p)?);
        }
        slices.push(f1.clone());
        DiscretePath::new(slices)
    }

    pub fn steps(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn dtau(&self) -> f64 {
        1.0 / self.steps() as f64
    }

    pub fn grid(&self) -> ParamGrid {
        self.slices[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.slices[0].dim()
    }

    pub fn slices(&self) -> &[GridImmersion] {
        &self.slices
    }

    pub fn slice(&self, t: usize) -> &GridImmersion {
        &self.slices[t]
    }

    pub fn into_slices(self) -> Vec<GridImmersion> {
        self.slices
    }

    pub fn cached_energy(&self) -> Option<f64> {
        self.energy
    }

    pub fn with_energy(mut self, cfg: &MetricConfig) -> Result<Self> {
        self.energy = Some(path_energy(&self, cfg)?);
        Ok(self)
    }

    pub fn reversed(&self) -> DiscretePath {
        let mut slices = self.slices.clone();
        slices.reverse();
        DiscretePath {
            slices,
            energy: self.energy,
        }
    }

    /// Midpoint `m_t = (f_t + f_{t+1}) / 2` of step `t`.
    pub fn midpoint(&self, t: usize) -> GridImmersion {
        let p = self.slices[t]
            .positions()
            .add(self.slices[t + 1].positions())
            .expect("slices share a shape")
            .scaled(0.5);
        GridImmersion::new(p).expect("midpoint of immersions is a vector field")
    }

    /// Increment `Δf_t = f_{t+1} − f_t`; the velocity is `Δf_t / Δτ`.
    pub fn increment(&self, t: usize) -> TensorField {
        self.slices[t + 1]
            .positions()
            .sub(self.slices[t].positions())
            .expect("slices share a shape")
    }

    pub fn check_immersions(&self, floor: f64) -> Result<()> {
        self.slices.iter().try_for_each(|s| s.check_immersion(floor))
    }

    /// Number of free coordinates: all interior slices.
    pub fn interior_len(&self) -> usize {
        (self.steps() - 1) * self.grid().len() * self.dim()
    }

    pub fn interior_dofs(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.interior_len());
        for s in &self.slices[1..self.steps()] {
            out.extend_from_slice(s.positions().values());
        }
        out
    }

    /// Same endpoints, interior slices replaced by `dofs`.
    pub fn with_interior_dofs(&self, dofs: &[f64]) -> Result<DiscretePath> {
        if dofs.len() != self.interior_len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} interior coordinates, got {}",
                self.interior_len(),
                dofs.len()
            )));
        }
        let chunk = self.grid().len() * self.dim();
        let mut slices = Vec::with_capacity(self.slices.len());
        slices.push(self.slices[0].clone());
        for c in dofs.chunks_exact(chunk) {
            let p = TensorField::new(self.grid(), TensorType::VECTOR, self.dim(), c.to_vec())?;
            slices.push(GridImmersion::new(p)?);
        }
        slices.push(self.slices[self.steps()].clone());
        Ok(DiscretePath {
            slices,
            energy: None,
        })
    }
}

/// `G_{m_t}(Δf_t, Δf_t)` for every step.
pub fn step_metric_values(path: &DiscretePath, cfg: &MetricConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    (0..path.steps())
        .into_par_iter()
        .map(|t| {
            let h = path.increment(t);
            metric_eval_at(&path.midpoint(t), &h, &h, cfg)
        })
        .collect()
}

/// `E = Σ_t G_{m_t}(Δf_t, Δf_t) / Δτ`.
pub fn path_energy(path: &DiscretePath, cfg: &MetricConfig) -> Result<f64> {
    let vals = step_metric_values(path, cfg)?;
    Ok(vals.iter().sum::<f64>() * path.steps() as f64)
}

/// `L = Σ_t ‖Δf_t‖_{G_{m_t}}`.
pub fn path_length(path: &DiscretePath, cfg: &MetricConfig) -> Result<f64> {
    let vals = step_metric_values(path, cfg)?;
    Ok(vals.iter().map(|v| v.max(0.0).sqrt()).sum())
}
