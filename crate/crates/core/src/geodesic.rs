//! Geodesic boundary-value problems by discrete energy minimization, and the
//! per-step diagnostics of the completeness criterion along a path.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::InducedGeometry;
use crate::grid::{chart_gradient, GridImmersion, TensorField};
use crate::metric::{background_metric_eval, lp_norm, metric_eval, MetricConfig};
use crate::optim::{minimize, minimize_preconditioned, sup_norm, IterationRecord, LbfgsOptions, Termination};
use crate::path::{path_energy, DiscretePath};
use crate::precond::PathPreconditioner;
use crate::sampler::FieldSampler;
use crate::variations::{energy_and_gradient, energy_gradient, flatten, Engine};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub engine: Engine,
    /// Relative size of the smooth random perturbation added to the interior
    /// of the initial path.
    pub perturbation: f64,
    pub seed: u64,
    pub memory: usize,
    /// Use a flat Sobolev operator as the initial inverse Hessian.
    pub precondition: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 2000,
            grad_tol: 1e-6,
            engine: Engine::Analytic,
            perturbation: 0.0,
            seed: 0,
            memory: 10,
            precondition: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverStatus {
    /// Identical endpoints; the constant path is returned untouched.
    Trivial,
    Converged,
    MaxIterations,
    /// The line search could not make progress before reaching `grad_tol`.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct GeodesicSolution {
    pub path: DiscretePath,
    pub energy: f64,
    pub initial_energy: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    pub grad_sup: f64,
    pub history: Vec<IterationRecord>,
}

/// Straight-line initial path, or the scale-normalized interpolation if the
/// straight line leaves the immersions.
pub fn initial_path(
    f0: &GridImmersion,
    f1: &GridImmersion,
    steps: usize,
    cfg: &MetricConfig,
) -> Result<DiscretePath> {
    let linear = DiscretePath::linear(f0, f1, steps)?;
    if feasible(&linear, cfg) {
        return Ok(linear);
    }
    let normalized = normalized_interpolation(f0, f1, steps, cfg)?;
    if feasible(&normalized, cfg) {
        Ok(normalized)
    } else {
        Err(Error::InfeasibleInitialization)
    }
}

fn feasible(path: &DiscretePath, cfg: &MetricConfig) -> bool {
    path.check_immersions(cfg.immersion_floor).is_ok() && path_energy(path, cfg).is_ok()
}

/// Interpolates `f/√Vol` and `√Vol` separately.
fn normalized_interpolation(
    f0: &GridImmersion,
    f1: &GridImmersion,
    steps: usize,
    cfg: &MetricConfig,
) -> Result<DiscretePath> {
    let r0 = InducedGeometry::new(f0, cfg.immersion_floor)?.volume().sqrt();
    let r1 = InducedGeometry::new(f1, cfg.immersion_floor)?.volume().sqrt();
    let u0 = f0.positions().scaled(1.0 / r0);
    let u1 = f1.positions().scaled(1.0 / r1);
    let mut slices = vec![f0.clone()];
    for t in 1..steps {
        let s = t as f64 / steps as f64;
        let r = (1.0 - s) * r0 + s * r1;
        let u = u0.scaled(1.0 - s).axpy(s, &u1)?;
        slices.push(GridImmersion::new(u.scaled(r))?);
    }
    slices.push(f1.clone());
    DiscretePath::new(slices)
}

/// Adds `amp · sin(πt/T) · ξ_t` to interior slices, `ξ_t` smooth random
/// fields of unit maximum.
fn perturb(path: &DiscretePath, amp: f64, seed: u64) -> Result<DiscretePath> {
    let steps = path.steps();
    let sampler = FieldSampler::new(2, seed);
    let mut slices = path.slices().to_vec();
    for (t, s) in slices.iter_mut().enumerate().take(steps).skip(1) {
        let w = amp * (std::f64::consts::PI * t as f64 / steps as f64).sin();
        let xi = sampler.sample_normalized(path.grid(), path.dim(), t as u64);
        *s = GridImmersion::new(s.positions().axpy(w, &xi)?)?;
    }
    DiscretePath::new(slices)
}

/// Minimizes the discrete energy over paths from `f0` to `f1` with `steps`
/// time steps. Endpoints are copied, never modified.
pub fn solve_geodesic_bvp(
    f0: &GridImmersion,
    f1: &GridImmersion,
    steps: usize,
    cfg: &MetricConfig,
    opts: &SolverOptions,
) -> Result<GeodesicSolution> {
    cfg.validate()?;
    if steps < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 time steps, got {steps}")));
    }
    f0.positions().check_same_shape(f1.positions())?;
    f0.check_immersion(cfg.immersion_floor)?;
    f1.check_immersion(cfg.immersion_floor)?;
    if f0 == f1 {
        let path = DiscretePath::constant(f0, steps)?;
        return Ok(GeodesicSolution {
            path,
            energy: 0.0,
            initial_energy: 0.0,
            status: SolverStatus::Trivial,
            iterations: 0,
            grad_sup: 0.0,
            history: Vec::new(),
        });
    }
    let mut start = initial_path(f0, f1, steps, cfg)?;
    if opts.perturbation > 0.0 {
        let span = f1.positions().sub(f0.positions())?.max_abs();
        let perturbed = perturb(&start, opts.perturbation * span, opts.seed)?;
        if feasible(&perturbed, cfg) {
            start = perturbed;
        }
    }
    minimize_path(start, cfg, opts)
}

/// Runs the optimizer from a given feasible path.
pub fn minimize_path(
    start: DiscretePath,
    cfg: &MetricConfig,
    opts: &SolverOptions,
) -> Result<GeodesicSolution> {
    let initial_energy = path_energy(&start, cfg)?;
    let objective = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let p = start.with_interior_dofs(x)?;
        p.check_immersions(cfg.immersion_floor)?;
        match opts.engine {
            Engine::Analytic => {
                let (e, g) = energy_and_gradient(&p, cfg)?;
                Ok((e, flatten(&g)))
            }
            Engine::FiniteDifference => {
                let e = path_energy(&p, cfg)?;
                Ok((e, flatten(&energy_gradient(&p, cfg, Engine::FiniteDifference)?)))
            }
        }
    };
    let lopts = LbfgsOptions {
        memory: opts.memory,
        max_iters: opts.max_iters,
        grad_tol: opts.grad_tol,
        ..LbfgsOptions::default()
    };
    let res = if opts.precondition {
        let p = PathPreconditioner::new(start.grid(), start.dim(), start.steps() - 1, cfg.k);
        minimize_preconditioned(start.interior_dofs(), objective, |g: &[f64]| p.apply(g), &lopts)?
    } else {
        minimize(start.interior_dofs(), objective, &lopts)?
    };
    let path = start.with_interior_dofs(&res.x)?;
    let status = match res.termination {
        Termination::Converged => SolverStatus::Converged,
        Termination::MaxIterations => SolverStatus::MaxIterations,
        Termination::LineSearchFailed => SolverStatus::Stalled,
    };
    Ok(GeodesicSolution {
        energy: res.value,
        path,
        initial_energy,
        status,
        iterations: res.iterations,
        grad_sup: sup_norm(&res.grad),
        history: res.history,
    })
}

/// Quantities the completeness criterion asks to stay controlled, evaluated at
/// the midpoint of one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    /// `Ḡ^k(ḟ, ḟ) / G^k(ḟ, ḟ)`, zero for a resting step.
    pub domination_ratio: f64,
    /// `G^k(ḟ, ḟ)` with `ḟ = Δf / Δτ`.
    pub energy_density: f64,
    /// `‖∇ḟ‖_{L²(g)}` at the midpoint.
    pub grad_velocity_l2: f64,
    /// `‖∇ḟ‖_{L²(g)}` averaged over the straight segment of the step.
    pub grad_velocity_l2_avg: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub min_singular_value: f64,
    pub g_linf: f64,
    pub g_inv_linf: f64,
    pub s_l4: f64,
    pub gamma_l4: f64,
    pub ds_l2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceDiagnostics {
    pub rho_min: f64,
    pub rho_max: f64,
    pub volume: f64,
}

/// Fitted constant `C` in `|log(1 + q_t) − log(1 + q_0)| ≤ C·ℓ_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthFit {
    pub quantity: &'static str,
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletenessReport {
    pub steps: Vec<StepDiagnostics>,
    pub slices: Vec<SliceDiagnostics>,
    pub length: f64,
    pub growth: Vec<GrowthFit>,
}

impl CompletenessReport {
    pub fn min_rho(&self) -> f64 {
        self.slices
            .iter()
            .map(|s| s.rho_min)
            .chain(self.steps.iter().map(|s| s.rho_min))
            .fold(f64::INFINITY, f64::min)
    }
}

const GAUSS_8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

fn frobenius(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn nodal_lp(field: &TensorField, p: f64) -> f64 {
    let q = field.components();
    let area = field.grid().cell_area();
    let sum: f64 = field
        .values()
        .chunks_exact(q)
        .map(|c| frobenius(c).powf(p))
        .sum();
    (sum * area).powf(1.0 / p)
}

fn nodal_linf(field: &TensorField) -> f64 {
    let q = field.components();
    field.values().chunks_exact(q).map(frobenius).fold(0.0, f64::max)
}

fn step_diagnostics(path: &DiscretePath, t: usize, cfg: &MetricConfig) -> Result<StepDiagnostics> {
    let steps = path.steps() as f64;
    let m = path.midpoint(t);
    let geom = InducedGeometry::new(&m, cfg.immersion_floor)?;
    let v = path.increment(t).scaled(steps);
    let big = metric_eval(&geom, &v, &v, cfg)?;
    let bg = background_metric_eval(&v, &v, cfg.k)?;
    let grad_v = chart_gradient(&v);
    let mut avg = 0.0;
    for (x, w) in GAUSS_8 {
        let s = 0.5 * (x + 1.0);
        let p = path.slice(t).positions().axpy(s, &path.increment(t))?;
        let gs = InducedGeometry::new(&GridImmersion::new(p)?, cfg.immersion_floor)?;
        avg += 0.5 * w * lp_norm(&gs, &grad_v, 2.0)?;
    }
    Ok(StepDiagnostics {
        step: t,
        domination_ratio: if big > 0.0 { bg / big } else { 0.0 },
        energy_density: big,
        grad_velocity_l2: lp_norm(&geom, &grad_v, 2.0)?,
        grad_velocity_l2_avg: avg,
        rho_min: geom.rho.min_value(),
        rho_max: geom.rho.max_value(),
        min_singular_value: geom.min_singular_value,
        g_linf: nodal_linf(&geom.g),
        g_inv_linf: nodal_linf(&geom.g_inv),
        s_l4: nodal_lp(&geom.second_fundamental, 4.0),
        gamma_l4: nodal_lp(&geom.gamma, 4.0),
        ds_l2: nodal_lp(&chart_gradient(&geom.second_fundamental), 2.0),
    })
}

/// Per-step and per-slice diagnostics with fitted growth constants.
pub fn completeness_diagnostics(
    path: &DiscretePath,
    cfg: &MetricConfig,
) -> Result<CompletenessReport> {
    cfg.validate()?;
    let steps: Vec<StepDiagnostics> = (0..path.steps())
        .into_par_iter()
        .map(|t| step_diagnostics(path, t, cfg))
        .collect::<Result<_>>()?;
    let slices: Vec<SliceDiagnostics> = path
        .slices()
        .par_iter()
        .map(|f| {
            let g = InducedGeometry::new(f, cfg.immersion_floor)?;
            Ok(SliceDiagnostics {
                rho_min: g.rho.min_value(),
                rho_max: g.rho.max_value(),
                volume: g.volume(),
            })
        })
        .collect::<Result<_>>()?;
    let dtau = path.dtau();
    let speeds: Vec<f64> = steps.iter().map(|s| s.energy_density.sqrt() * dtau).collect();
    let length = speeds.iter().sum();
    let mut cumulative = Vec::with_capacity(steps.len());
    let mut acc = 0.0;
    for s in &speeds {
        cumulative.push(acc + 0.5 * s);
        acc += s;
    }
    let fit = |quantity: &'static str, q: &dyn Fn(&StepDiagnostics) -> f64| {
        let base = (1.0 + q(&steps[0])).ln();
        let constant = steps
            .iter()
            .zip(&cumulative)
            .skip(1)
            .filter(|(_, &l)| l > 0.0)
            .map(|(s, l)| ((1.0 + q(s)).ln() - base).abs() / l)
            .fold(0.0, f64::max);
        GrowthFit { quantity, constant }
    };
    let growth = vec![
        fit("g_linf", &|s| s.g_linf),
        fit("s_l4", &|s| s.s_l4),
        fit("gamma_l4", &|s| s.gamma_l4),
    ];
    Ok(CompletenessReport {
        steps,
        slices,
        length,
        growth,
    })
}
