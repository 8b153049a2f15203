//! Shape-space distance: geodesic energy minimized jointly over paths and
//! reparametrizations `φ` of the target endpoint.

use crate::adjoint::metric_adjoint;
use crate::error::{Error, Result};
use crate::geodesic::{
    completeness_diagnostics, minimize_path, solve_geodesic_bvp, GeodesicSolution, SolverOptions,
};
use crate::grid::{partial_derivative, Direction, GridImmersion, ParamGrid, TensorField, TensorType};
use crate::metric::MetricConfig;
use crate::path::{path_energy, DiscretePath};

/// `φ(u, v) = (u + δu, v + δv) mod 2π`, sampled at the grid nodes and
/// evaluated between nodes by periodic bicubic interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpField {
    du: TensorField,
    dv: TensorField,
}

impl WarpField {
    pub const INTERPOLATION_ORDER: usize = 3;

    pub fn identity(grid: ParamGrid) -> Self {
        WarpField {
            du: TensorField::zeros(grid, TensorType::SCALAR, 1),
            dv: TensorField::zeros(grid, TensorType::SCALAR, 1),
        }
    }

    pub fn constant(grid: ParamGrid, du: f64, dv: f64) -> Self {
        WarpField {
            du: TensorField::scalar_from_fn(grid, |_, _| du),
            dv: TensorField::scalar_from_fn(grid, |_, _| dv),
        }
    }

    pub fn new(du: TensorField, dv: TensorField) -> Result<Self> {
        for f in [&du, &dv] {
            if f.ty() != TensorType::SCALAR {
                return Err(Error::TypeMismatch {
                    expected: TensorType::SCALAR,
                    found: f.ty(),
                });
            }
        }
        du.check_same_shape(&dv)?;
        Ok(WarpField { du, dv })
    }

    pub fn grid(&self) -> ParamGrid {
        self.du.grid()
    }

    pub fn du(&self) -> &TensorField {
        &self.du
    }

    pub fn dv(&self) -> &TensorField {
        &self.dv
    }

    pub fn is_identity(&self) -> bool {
        self.du.max_abs() == 0.0 && self.dv.max_abs() == 0.0
    }

    /// Smallest nodal `det Dφ = det(I + Dδ)`.
    pub fn min_jacobian(&self) -> (usize, f64) {
        let uu = partial_derivative(&self.du, Direction::U);
        let uv = partial_derivative(&self.du, Direction::V);
        let vu = partial_derivative(&self.dv, Direction::U);
        let vv = partial_derivative(&self.dv, Direction::V);
        let mut worst = (0, f64::INFINITY);
        for node in 0..self.grid().len() {
            let det = (1.0 + uu.values()[node]) * (1.0 + vv.values()[node])
                - uv.values()[node] * vu.values()[node];
            if det < worst.1 {
                worst = (node, det);
            }
        }
        worst
    }

    pub fn check_orientation(&self) -> Result<()> {
        let (node, det) = self.min_jacobian();
        if !(det > 0.0) {
            return Err(Error::WarpDegenerate { node, det });
        }
        Ok(())
    }

    /// `f ∘ φ` at the grid nodes.
    pub fn apply(&self, f: &GridImmersion) -> Result<GridImmersion> {
        Ok(self.apply_with_derivatives(f)?.0)
    }

    /// `f ∘ φ` together with `(∂_u f)∘φ` and `(∂_v f)∘φ` of the interpolant.
    fn apply_with_derivatives(
        &self,
        f: &GridImmersion,
    ) -> Result<(GridImmersion, TensorField, TensorField)> {
        if f.grid() != self.grid() {
            return Err(Error::ShapeMismatch("warp and immersion grids differ".into()));
        }
        self.check_orientation()?;
        let grid = self.grid();
        let d = f.dim();
        let (hu, hv) = grid.spacing();
        let src = f.positions();
        let mut val = vec![0.0; grid.len() * d];
        let mut der_u = vec![0.0; grid.len() * d];
        let mut der_v = vec![0.0; grid.len() * d];
        for node in 0..grid.len() {
            let (i, j) = grid.node_ij(node);
            let x = i as f64 + self.du.values()[node] / hu;
            let y = j as f64 + self.dv.values()[node] / hv;
            let (x0, tx) = (x.floor(), x - x.floor());
            let (y0, ty) = (y.floor(), y - y.floor());
            let (wx, dwx) = (keys_weights(tx), keys_derivative(tx));
            let (wy, dwy) = (keys_weights(ty), keys_derivative(ty));
            let o = node * d;
            for (a, (wxa, dwxa)) in wx.iter().zip(&dwx).enumerate() {
                for (b, (wyb, dwyb)) in wy.iter().zip(&dwy).enumerate() {
                    let s = grid.index(x0 as isize + a as isize - 1, y0 as isize + b as isize - 1);
                    let p = src.node(s);
                    for c in 0..d {
                        val[o + c] += wxa * wyb * p[c];
                        der_u[o + c] += dwxa * wyb * p[c] / hu;
                        der_v[o + c] += wxa * dwyb * p[c] / hv;
                    }
                }
            }
        }
        Ok((
            GridImmersion::new(TensorField::new(grid, TensorType::VECTOR, d, val)?)?,
            TensorField::new(grid, TensorType::VECTOR, d, der_u)?,
            TensorField::new(grid, TensorType::VECTOR, d, der_v)?,
        ))
    }

    fn axpy(&self, alpha: f64, gu: &TensorField, gv: &TensorField) -> Result<WarpField> {
        WarpField::new(self.du.axpy(alpha, gu)?, self.dv.axpy(alpha, gv)?)
    }
}

/// Catmull–Rom (Keys, `a = −1/2`) weights of nodes `−1, 0, 1, 2` at offset `t`.
fn keys_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

fn keys_derivative(t: f64) -> [f64; 4] {
    let t2 = t * t;
    [
        0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
        0.5 * (9.0 * t2 - 10.0 * t),
        0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
        0.5 * (3.0 * t2 - 2.0 * t),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchOptions {
    pub solver: SolverOptions,
    /// Alternations between path and warp updates.
    pub outer_iters: usize,
    /// Descent steps on the warp per alternation.
    pub warp_iters: usize,
    /// Passes of the `[¼, ½, ¼]` filter applied to warp gradients.
    pub smoothing_passes: usize,
    /// Seed the warp with the integer grid translation that best aligns the
    /// endpoints in `L²`.
    pub translation_search: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            solver: SolverOptions::default(),
            outer_iters: 5,
            warp_iters: 20,
            smoothing_passes: 4,
            translation_search: true,
        }
    }
}

/// One accepted `(path, φ)` iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct AcceptedIterate {
    pub energy: f64,
    pub min_rho: f64,
    pub min_jacobian: f64,
}

#[derive(Clone, Debug)]
pub struct MatchResult {
    pub distance: f64,
    /// Estimate with `φ` fixed to the identity.
    pub parametrized_distance: f64,
    pub warp: WarpField,
    pub path: DiscretePath,
    pub accepted: Vec<AcceptedIterate>,
    pub rejected_warp_steps: usize,
}

fn accepted_record(path: &DiscretePath, energy: f64, warp: &WarpField, cfg: &MetricConfig) -> Result<AcceptedIterate> {
    Ok(AcceptedIterate {
        energy,
        min_rho: completeness_diagnostics(path, cfg)?.min_rho(),
        min_jacobian: warp.min_jacobian().1,
    })
}

/// Alternating minimization of the path energy over paths ending at `f1 ∘ φ`
/// and over `φ`. Steps are accepted only when they lower the energy, so the
/// returned distance never exceeds the identity-warp estimate.
pub fn quotient_distance(
    f0: &GridImmersion,
    f1: &GridImmersion,
    steps: usize,
    cfg: &MetricConfig,
    opts: &MatchOptions,
) -> Result<MatchResult> {
    let base = solve_geodesic_bvp(f0, f1, steps, cfg, &opts.solver)?;
    let parametrized_distance = base.energy.max(0.0).sqrt();
    let grid = f0.grid();
    let mut warp = WarpField::identity(grid);
    let mut best: GeodesicSolution = base;
    let mut accepted = vec![accepted_record(&best.path, best.energy, &warp, cfg)?];
    let mut rejected = 0;

    if opts.translation_search && best.energy > 0.0 {
        let (a, b) = best_translation(f0, f1);
        if (a, b) != (0, 0) {
            let (hu, hv) = grid.spacing();
            let cand = WarpField::constant(grid, a as f64 * hu, b as f64 * hv);
            let target = cand.apply(f1)?;
            match solve_geodesic_bvp(f0, &target, steps, cfg, &opts.solver) {
                Ok(sol) if sol.energy < best.energy => {
                    warp = cand;
                    best = sol;
                    accepted.push(accepted_record(&best.path, best.energy, &warp, cfg)?);
                }
                Ok(_) => rejected += 1,
                Err(e) if e.is_feasibility_violation() => rejected += 1,
                Err(e) => return Err(e),
            }
        }
    }

    for _ in 0..opts.outer_iters {
        if best.energy == 0.0 {
            break;
        }
        let (new_warp, new_energy, rej) = warp_descent(&best.path, f1, &warp, cfg, opts)?;
        rejected += rej;
        if !(new_energy < best.energy) {
            break;
        }
        let mut slices = best.path.slices().to_vec();
        *slices.last_mut().expect("path has slices") = new_warp.apply(f1)?;
        let start = DiscretePath::new(slices)?;
        let sol = minimize_path(start, cfg, &opts.solver)?;
        if !(sol.energy < best.energy) {
            break;
        }
        warp = new_warp;
        best = sol;
        accepted.push(accepted_record(&best.path, best.energy, &warp, cfg)?);
    }

    Ok(MatchResult {
        distance: best.energy.max(0.0).sqrt(),
        parametrized_distance,
        warp,
        path: best.path,
        accepted,
        rejected_warp_steps: rejected,
    })
}

/// Integer translation `(a, b)` minimizing `‖f0 − f1(· + (a, b))‖²`.
fn best_translation(f0: &GridImmersion, f1: &GridImmersion) -> (isize, isize) {
    let grid = f0.grid();
    let mut best = ((0, 0), f64::INFINITY);
    for b in 0..grid.n_v() as isize {
        for a in 0..grid.n_u() as isize {
            let s = f1.shifted((a, b));
            let e: f64 = s
                .positions()
                .values()
                .iter()
                .zip(f0.positions().values())
                .map(|(x, y)| (x - y).powi(2))
                .sum();
            if e < best.1 {
                best = ((a, b), e);
            }
        }
    }
    let (a, b) = best.0;
    // prefer the representative closest to zero
    let wrap = |x: isize, n: usize| if x > n as isize / 2 { x - n as isize } else { x };
    (wrap(a, grid.n_u()), wrap(b, grid.n_v()))
}

fn smooth(field: &TensorField, passes: usize) -> TensorField {
    let grid = field.grid();
    let mut cur = field.clone();
    for _ in 0..passes {
        let mut next = cur.clone();
        for j in 0..grid.n_v() as isize {
            for i in 0..grid.n_u() as isize {
                let at = |a: isize, b: isize| cur.values()[grid.index(a, b)];
                next.values_mut()[grid.index(i, j)] = 0.0625
                    * (at(i - 1, j - 1) + at(i + 1, j - 1) + at(i - 1, j + 1) + at(i + 1, j + 1))
                    + 0.125 * (at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1))
                    + 0.25 * at(i, j);
            }
        }
        cur = next;
    }
    cur
}

/// Energy of the last step as a function of the warp, with its gradient.
fn endpoint_energy(
    path: &DiscretePath,
    f1: &GridImmersion,
    warp: &WarpField,
    cfg: &MetricConfig,
) -> Result<(f64, TensorField, TensorField)> {
    let steps = path.steps();
    let (target, ju, jv) = warp.apply_with_derivatives(f1)?;
    let prev = path.slice(steps - 1).positions();
    let m = GridImmersion::new(prev.add(target.positions())?.scaled(0.5))?;
    let h = target.positions().sub(prev)?;
    let adj = metric_adjoint(&m, &h, cfg)?;
    let t = steps as f64;
    let fbar = adj.m_bar.scaled(0.5 * t).axpy(t, &adj.h_bar)?;
    let d = f1.dim();
    let grid = f1.grid();
    let mut gu = vec![0.0; grid.len()];
    let mut gv = vec![0.0; grid.len()];
    for node in 0..grid.len() {
        let fb = fbar.node(node);
        gu[node] = (0..d).map(|c| fb[c] * ju.node(node)[c]).sum();
        gv[node] = (0..d).map(|c| fb[c] * jv.node(node)[c]).sum();
    }
    Ok((
        adj.value * t,
        TensorField::new(grid, TensorType::SCALAR, 1, gu)?,
        TensorField::new(grid, TensorType::SCALAR, 1, gv)?,
    ))
}

/// Backtracking descent on the warp with the path interior held fixed.
/// Returns the new warp, the full path energy with it, and the number of
/// rejected trial steps.
fn warp_descent(
    path: &DiscretePath,
    f1: &GridImmersion,
    warp: &WarpField,
    cfg: &MetricConfig,
    opts: &MatchOptions,
) -> Result<(WarpField, f64, usize)> {
    let total = path_energy(path, cfg)?;
    let (mut last, mut gu, mut gv) = endpoint_energy(path, f1, warp, cfg)?;
    let rest = total - last;
    let mut cur = warp.clone();
    let mut rejected = 0;
    let (hu, _) = cur.grid().spacing();
    let mut scale = 1.0;
    for _ in 0..opts.warp_iters {
        let su = smooth(&gu, opts.smoothing_passes);
        let sv = smooth(&gv, opts.smoothing_passes);
        let slope = -(su.dot(&gu) + sv.dot(&gv));
        if !(slope < 0.0) {
            break;
        }
        let sup = su.max_abs().max(sv.max_abs());
        let cap = 0.5 * hu / sup;
        let mut alpha = cap * scale;
        let mut moved = false;
        for _ in 0..40 {
            let trial = cur.axpy(-alpha, &su, &sv)?;
            match endpoint_energy(path, f1, &trial, cfg) {
                Ok((e, nu, nv)) if e <= last + 1e-4 * alpha * slope => {
                    cur = trial;
                    last = e;
                    gu = nu;
                    gv = nv;
                    moved = true;
                    scale = (2.0 * alpha / cap).min(1.0);
                    break;
                }
                Ok(_) => rejected += 1,
                Err(e) if e.is_feasibility_violation() => rejected += 1,
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((cur, rest + last, rejected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surfaces::SurfaceSpec;

    #[test]
    fn interpolation_reproduces_cubics_locally() {
        // Catmull–Rom reproduces quadratics exactly
        for t in [0.0, 0.25, 0.5, 0.9] {
            let w = keys_weights(t);
            let p = |x: f64| 1.0 + 2.0 * x - 0.5 * x * x;
            let v: f64 = (0..4).map(|a| w[a] * p(a as f64 - 1.0)).sum();
            assert!((v - p(t)).abs() < 1e-14);
            let dw = keys_derivative(t);
            let dv: f64 = (0..4).map(|a| dw[a] * p(a as f64 - 1.0)).sum();
            assert!((dv - (2.0 - t)).abs() < 1e-14);
        }
    }

    #[test]
    fn warp_gradient_matches_finite_differences() {
        let f0 = SurfaceSpec::bumpy_default(2).generate(8).unwrap();
        let f1 = SurfaceSpec::bumpy_default(3).generate(8).unwrap();
        let cfg = MetricConfig::default();
        let path = DiscretePath::linear(&f0, &f1, 2).unwrap();
        let grid = f0.grid();
        let du = TensorField::scalar_from_fn(grid, |u, v| 0.05 * (u + v).sin());
        let dv = TensorField::scalar_from_fn(grid, |u, _| 0.03 * u.cos());
        let w = WarpField::new(du.clone(), dv.clone()).unwrap();
        let (_, gu, _) = endpoint_energy(&path, &f1, &w, &cfg).unwrap();
        let eps = 1e-6;
        for node in [0, 9, 37] {
            let mut p = du.clone();
            p.values_mut()[node] += eps;
            let mut m = du.clone();
            m.values_mut()[node] -= eps;
            let ep = endpoint_energy(&path, &f1, &WarpField::new(p, dv.clone()).unwrap(), &cfg).unwrap().0;
            let em = endpoint_energy(&path, &f1, &WarpField::new(m, dv.clone()).unwrap(), &cfg).unwrap().0;
            let fd = (ep - em) / (2.0 * eps);
            assert!((fd - gu.values()[node]).abs() <= 1e-5 * gu.max_abs(), "{fd} {}", gu.values()[node]);
        }
    }
}
