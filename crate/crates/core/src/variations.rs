//! First variations of the induced geometry along `f + t ḟ`, the directional
//! derivative of the metric and of the discrete path energy, and the energy
//! gradient used by the optimizers.

use rayon::prelude::*;

use crate::adjoint::metric_adjoint;
use crate::error::{Error, Result};
use crate::geometry::{
    as4, as8, christoffel_from_parts, connection_correction, covariant_derivative,
    covariant_derivative_tower, Contractor, InducedGeometry, INVERSE_METRIC_TYPE, METRIC_TYPE,
};
use crate::grid::{chart_gradient, dot, GridImmersion, TensorField, TensorType};
use crate::metric::{metric_eval_at, MetricConfig, OrderRole};
use crate::path::DiscretePath;

/// `∂ₜ` of every cached geometric quantity.
#[derive(Clone, Debug)]
pub struct VariationBundle {
    pub dt_g: TensorField,
    pub dt_g_inv: TensorField,
    /// `(∇∂ₜg)`, component `[a][b][c] = (∇_c ∂ₜg)_ab`.
    pub nabla_dt_g: TensorField,
    pub dt_gamma: TensorField,
    pub dt_s: TensorField,
    pub dt_h: TensorField,
    pub dt_rho: TensorField,
}

impl VariationBundle {
    pub fn new(geom: &InducedGeometry, fdot: &TensorField) -> Result<Self> {
        let (dt_g, dt_g_inv) = variation_metric(geom, fdot)?;
        let nabla_dt_g = covariant_derivative(geom, &dt_g)?;
        let dt_gamma = gamma_from_nabla_dt_g(geom, &nabla_dt_g);
        let (dt_s, dt_h) = s_h_from_parts(geom, fdot, &dt_g_inv, &dt_gamma);
        let dt_rho = rho_from_dt_g(geom, &dt_g);
        Ok(VariationBundle {
            dt_g,
            dt_g_inv,
            nabla_dt_g,
            dt_gamma,
            dt_s,
            dt_h,
            dt_rho,
        })
    }
}

fn check_direction(geom: &InducedGeometry, fdot: &TensorField) -> Result<()> {
    if fdot.ty() != TensorType::VECTOR {
        return Err(Error::TypeMismatch {
            expected: TensorType::VECTOR,
            found: fdot.ty(),
        });
    }
    if fdot.grid() != geom.grid() || fdot.dim() != geom.dim() {
        return Err(Error::ShapeMismatch("direction does not match the immersion".into()));
    }
    Ok(())
}

/// `∂ₜg_ab = ⟨∂_a ḟ, ∂_b f⟩ + ⟨∂_b ḟ, ∂_a f⟩` and `∂ₜg⁻¹ = −g⁻¹ ∂ₜg g⁻¹`.
pub fn variation_metric(
    geom: &InducedGeometry,
    fdot: &TensorField,
) -> Result<(TensorField, TensorField)> {
    check_direction(geom, fdot)?;
    let grid = geom.grid();
    let d = geom.dim();
    let dfdot = chart_gradient(fdot);
    let mut dt_g = vec![0.0; grid.len() * 4];
    let mut dt_gi = vec![0.0; grid.len() * 4];
    for node in 0..grid.len() {
        let t = geom.tangent_map.node(node);
        let v = dfdot.node(node);
        let out = &mut dt_g[4 * node..4 * node + 4];
        for a in 0..2 {
            for b in 0..2 {
                out[2 * a + b] = dot(&v[a * d..(a + 1) * d], &t[b * d..(b + 1) * d])
                    + dot(&v[b * d..(b + 1) * d], &t[a * d..(a + 1) * d]);
            }
        }
        let dg = as4(out);
        let gi = geom.node_g_inv(node);
        let inv = sandwich(&gi, &dg);
        dt_gi[4 * node..4 * node + 4].copy_from_slice(&inv);
    }
    Ok((
        TensorField::from_raw(grid, METRIC_TYPE, d, dt_g),
        TensorField::from_raw(grid, INVERSE_METRIC_TYPE, d, dt_gi),
    ))
}

/// `−A B A` for 2×2 matrices.
fn sandwich(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    acc += a[2 * i + k] * b[2 * k + l] * a[2 * l + j];
                }
            }
            out[2 * i + j] = -acc;
        }
    }
    out
}

/// `∇∂ₜg` by the product rule `2 sym⟨∇²ḟ, Tf⟩ + 2 sym⟨∇ḟ, S⟩`.
///
/// Agrees with `covariant_derivative` of `∂ₜg` only up to discretization
/// error, since the chart stencils do not obey the Leibniz rule exactly.
pub fn nabla_dt_g_product_rule(geom: &InducedGeometry, fdot: &TensorField) -> Result<TensorField> {
    check_direction(geom, fdot)?;
    let grid = geom.grid();
    let d = geom.dim();
    let dfdot = chart_gradient(fdot);
    let hess = covariant_derivative(geom, &dfdot)?;
    let mut out = vec![0.0; grid.len() * 8];
    for node in 0..grid.len() {
        let t = geom.tangent_map.node(node);
        let s = geom.second_fundamental.node(node);
        let v = dfdot.node(node);
        let hs = hess.node(node);
        let r = |i: usize| i * d..(i + 1) * d;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let val = dot(&hs[r(2 * a + c)], &t[r(b)])
                        + dot(&v[r(a)], &s[r(2 * b + c)])
                        + dot(&hs[r(2 * b + c)], &t[r(a)])
                        + dot(&v[r(b)], &s[r(2 * a + c)]);
                    out[8 * node + 4 * a + 2 * b + c] = val;
                }
            }
        }
    }
    Ok(TensorField::from_raw(grid, TensorType::new(0, 3, 0), d, out))
}

/// `∂ₜΓ^a_bc = ½ g^{ad} [(∇∂ₜg)_{dc;b} + (∇∂ₜg)_{bd;c} − (∇∂ₜg)_{bc;d}]`.
pub fn variation_gamma(geom: &InducedGeometry, fdot: &TensorField) -> Result<TensorField> {
    let (dt_g, _) = variation_metric(geom, fdot)?;
    let ndg = covariant_derivative(geom, &dt_g)?;
    Ok(gamma_from_nabla_dt_g(geom, &ndg))
}

fn gamma_from_nabla_dt_g(geom: &InducedGeometry, ndg: &TensorField) -> TensorField {
    let mut out = christoffel_from_parts(&geom.g_inv, ndg);
    for node in 0..geom.grid().len() {
        let v = out.node_mut(node);
        for a in 0..2 {
            v[4 * a + 2] = v[4 * a + 1];
        }
    }
    out
}

/// `∂ₜS = ∇²ḟ − ∂ₜΓ·Tf` and `∂ₜH = ∂ₜg^{ab} S_ab + g^{ab} ∂ₜS_ab`.
pub fn variation_s_h(
    geom: &InducedGeometry,
    fdot: &TensorField,
    dt_gamma: &TensorField,
) -> Result<(TensorField, TensorField)> {
    let (_, dt_g_inv) = variation_metric(geom, fdot)?;
    Ok(s_h_from_parts(geom, fdot, &dt_g_inv, dt_gamma))
}

fn s_h_from_parts(
    geom: &InducedGeometry,
    fdot: &TensorField,
    dt_g_inv: &TensorField,
    dt_gamma: &TensorField,
) -> (TensorField, TensorField) {
    let grid = geom.grid();
    let d = geom.dim();
    let mut dt_s =
        covariant_derivative(geom, &chart_gradient(fdot)).expect("direction checked by caller");
    let mut dt_h = TensorField::zeros(grid, TensorType::VECTOR, d);
    for node in 0..grid.len() {
        let dgam = as8(dt_gamma.node(node));
        let t = geom.tangent_map.node(node);
        let ds = dt_s.node_mut(node);
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let coef = dgam[4 * c + 2 * a + b];
                    for x in 0..d {
                        ds[(2 * a + b) * d + x] -= coef * t[c * d + x];
                    }
                }
            }
        }
        let gi = geom.node_g_inv(node);
        let dgi = as4(dt_g_inv.node(node));
        let s = geom.second_fundamental.node(node);
        let ds = dt_s.node(node).to_vec();
        let dh = dt_h.node_mut(node);
        for ab in 0..4 {
            for x in 0..d {
                dh[x] += dgi[ab] * s[ab * d + x] + gi[ab] * ds[ab * d + x];
            }
        }
    }
    (dt_s, dt_h)
}

fn rho_from_dt_g(geom: &InducedGeometry, dt_g: &TensorField) -> TensorField {
    let grid = geom.grid();
    let vals = (0..grid.len())
        .map(|node| {
            let gi = geom.node_g_inv(node);
            let dg = dt_g.node(node);
            let tr: f64 = (0..4).map(|ab| gi[ab] * dg[ab]).sum();
            0.5 * geom.rho.values()[node] * tr
        })
        .collect();
    TensorField::from_raw(grid, TensorType::SCALAR, 1, vals)
}

/// `∂ₜρ = g(Tf, ∇ḟ) ρ` per node and `∂ₜVol = ∫ g(Tf, ∇ḟ) vol`.
pub fn variation_volume(geom: &InducedGeometry, fdot: &TensorField) -> Result<(TensorField, f64)> {
    let (dt_g, _) = variation_metric(geom, fdot)?;
    let dt_rho = rho_from_dt_g(geom, &dt_g);
    let total = dt_rho.values().iter().sum::<f64>() * geom.grid().cell_area();
    Ok((dt_rho, total))
}

/// `∂ₜ∇^j h` with `h` held fixed: `δX_j = ∇δX_{j−1} + ∂ₜΓ·X_{j−1}`, `δX_0 = 0`.
pub fn variation_covderiv(
    geom: &InducedGeometry,
    fdot: &TensorField,
    h: &TensorField,
    order: usize,
    max_order: usize,
) -> Result<TensorField> {
    if order > max_order {
        return Err(Error::OrderTooHigh {
            order,
            max: max_order,
        });
    }
    let dt_gamma = variation_gamma(geom, fdot)?;
    let tower = covariant_derivative_tower(geom, h, order)?;
    let zero = TensorField::zeros(h.grid(), h.ty(), h.dim());
    let dtower = tower_variation(geom, &dt_gamma, &tower, &zero)?;
    Ok(dtower.into_iter().last().expect("tower is never empty"))
}

/// Variation of the whole tower `X_j = ∇^j h` when `h` moves by `hdot` and
/// the connection by `dt_gamma`.
fn tower_variation(
    geom: &InducedGeometry,
    dt_gamma: &TensorField,
    tower: &[TensorField],
    hdot: &TensorField,
) -> Result<Vec<TensorField>> {
    let mut out = Vec::with_capacity(tower.len());
    out.push(hdot.clone());
    for j in 1..tower.len() {
        let mut next = covariant_derivative(geom, &out[j - 1])?;
        if tower[j - 1].ty().chart_slots() > 0 {
            next = next.add(&connection_correction(dt_gamma, &tower[j - 1]))?;
        }
        out.push(next);
    }
    Ok(out)
}

/// `∂ₜ g(A, B)` with `A`, `B` held fixed: one slot at a time contracted with
/// `∂ₜg` (tangent) or `∂ₜg⁻¹` (cotangent).
pub fn variation_fiber_inner(
    geom: &InducedGeometry,
    bundle: &VariationBundle,
    a: &TensorField,
    b: &TensorField,
) -> Result<TensorField> {
    a.check_same_shape(b)?;
    let ty = a.ty();
    let slots = ty.chart_slots();
    let amb = ty.ambient_len(a.dim());
    let grid = a.grid();
    let mut c = Contractor::default();
    let mut vals = vec![0.0; grid.len()];
    for (node, out) in vals.iter_mut().enumerate() {
        let g = geom.node_g(node);
        let gi = geom.node_g_inv(node);
        let dg = as4(bundle.dt_g.node(node));
        let dgi = as4(bundle.dt_g_inv.node(node));
        for s in 0..slots {
            let mats: Vec<&[f64; 4]> = (0..slots)
                .map(|r| match (r < ty.tangent, r == s) {
                    (true, false) => &g,
                    (true, true) => &dg,
                    (false, false) => &gi,
                    (false, true) => &dgi,
                })
                .collect();
            *out += c.contract(slots, amb, a.node(node), b.node(node), &mats);
        }
    }
    Ok(TensorField::from_raw(grid, TensorType::SCALAR, 1, vals))
}

/// `d/dε G_{m + ε ṁ}(h + ε ḣ, h + ε ḣ)` at `ε = 0`, by forward propagation of
/// the variation formulas.
pub fn metric_derivative(
    geom: &InducedGeometry,
    h: &TensorField,
    m_dot: &TensorField,
    h_dot: &TensorField,
    cfg: &MetricConfig,
) -> Result<f64> {
    cfg.validate()?;
    h.check_same_shape(h_dot)?;
    let bundle = VariationBundle::new(geom, m_dot)?;
    let tower = covariant_derivative_tower(geom, h, cfg.k)?;
    let dtower = tower_variation(geom, &bundle.dt_gamma, &tower, h_dot)?;
    let d = geom.dim();
    let w = cfg.weight_exponent;
    let hnorm = geom.mean_curvature_norm();
    let mut ctr = Contractor::default();
    let mut total = 0.0;
    for node in 0..geom.grid().len() {
        let gi = geom.node_g_inv(node);
        let dgi = as4(bundle.dt_g_inv.node(node));
        let hn = hnorm.values()[node];
        let wgt = hn.powf(w);
        let dwgt = if hn > 0.0 && w != 0.0 {
            w * hn.powf(w - 2.0) * dot(geom.mean_curvature.node(node), bundle.dt_h.node(node))
        } else {
            0.0
        };
        let mut density = 0.0;
        let mut d_density = 0.0;
        for order in 0..tower.len() {
            let Some(role) = cfg.order_role(order) else {
                continue;
            };
            let x = tower[order].node(node);
            let dx = dtower[order].node(node);
            let mats = vec![&gi; order];
            let fiber = ctr.contract(order, d, x, x, &mats);
            let mut d_fiber = 2.0 * ctr.contract(order, d, dx, x, &mats);
            for s in 0..order {
                let mut m = mats.clone();
                m[s] = &dgi;
                d_fiber += ctr.contract(order, d, x, x, &m);
            }
            match role {
                OrderRole::Plain => {
                    density += fiber;
                    d_density += d_fiber;
                }
                OrderRole::Weighted => {
                    density += wgt * fiber;
                    d_density += dwgt * fiber + wgt * d_fiber;
                }
            }
        }
        total += d_density * geom.rho.values()[node] + density * bundle.dt_rho.values()[node];
    }
    Ok(total * geom.grid().cell_area())
}

/// Gradient engines for the discrete path energy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    /// Reverse-mode accumulation through the discrete pipeline.
    Analytic,
    /// Central differences over every interior coordinate.
    FiniteDifference,
}

/// Relative step of the finite-difference energy oracle.
pub const ENERGY_FD_STEP: f64 = 1e-5;

fn check_path_direction(path: &DiscretePath, direction: &[TensorField]) -> Result<()> {
    if direction.len() != path.steps() - 1 {
        return Err(Error::ShapeMismatch(format!(
            "direction has {} slices, path has {} interior slices",
            direction.len(),
            path.steps() - 1
        )));
    }
    for d in direction {
        d.check_same_shape(path.slice(0).positions())?;
    }
    Ok(())
}

/// `d/dε E(path + ε·direction)` at `ε = 0`; `direction` holds one field per
/// interior slice (the endpoints stay fixed).
pub fn directional_energy_derivative(
    path: &DiscretePath,
    direction: &[TensorField],
    cfg: &MetricConfig,
) -> Result<f64> {
    check_path_direction(path, direction)?;
    let steps = path.steps();
    let zero = TensorField::zeros(path.grid(), TensorType::VECTOR, path.dim());
    let dir = |t: usize| -> &TensorField {
        if t == 0 || t == steps {
            &zero
        } else {
            &direction[t - 1]
        }
    };
    let terms: Vec<f64> = (0..steps)
        .into_par_iter()
        .map(|t| {
            let m = path.midpoint(t);
            let geom = InducedGeometry::new(&m, cfg.immersion_floor)?;
            let h = path.increment(t);
            let m_dot = dir(t).add(dir(t + 1))?.scaled(0.5);
            let h_dot = dir(t + 1).sub(dir(t))?;
            metric_derivative(&geom, &h, &m_dot, &h_dot, cfg)
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum::<f64>() * steps as f64)
}

/// Energy and its analytic gradient with respect to the interior slices.
pub fn energy_and_gradient(
    path: &DiscretePath,
    cfg: &MetricConfig,
) -> Result<(f64, Vec<TensorField>)> {
    cfg.validate()?;
    let steps = path.steps();
    let scale = steps as f64;
    let adj: Vec<_> = (0..steps)
        .into_par_iter()
        .map(|t| metric_adjoint(&path.midpoint(t), &path.increment(t), cfg))
        .collect::<Result<_>>()?;
    let mut grad: Vec<TensorField> = (1..steps)
        .map(|_| TensorField::zeros(path.grid(), TensorType::VECTOR, path.dim()))
        .collect();
    let mut energy = 0.0;
    for (t, a) in adj.iter().enumerate() {
        energy += a.value;
        // m = (f_t + f_{t+1}) / 2, h = f_{t+1} − f_t
        if t >= 1 {
            grad[t - 1] = grad[t - 1]
                .axpy(0.5 * scale, &a.m_bar)?
                .axpy(-scale, &a.h_bar)?;
        }
        if t + 1 < steps {
            grad[t] = grad[t].axpy(0.5 * scale, &a.m_bar)?.axpy(scale, &a.h_bar)?;
        }
    }
    Ok((energy * scale, grad))
}

/// Euclidean gradient of the path energy with respect to every interior node
/// coordinate.
pub fn energy_gradient(
    path: &DiscretePath,
    cfg: &MetricConfig,
    engine: Engine,
) -> Result<Vec<TensorField>> {
    match engine {
        Engine::Analytic => Ok(energy_and_gradient(path, cfg)?.1),
        Engine::FiniteDifference => fd_energy_gradient(path, cfg),
    }
}

fn step_value(a: &TensorField, b: &TensorField, cfg: &MetricConfig) -> Result<f64> {
    let m = GridImmersion::new(a.add(b)?.scaled(0.5))?;
    let h = b.sub(a)?;
    metric_eval_at(&m, &h, &h, cfg)
}

fn fd_energy_gradient(path: &DiscretePath, cfg: &MetricConfig) -> Result<Vec<TensorField>> {
    cfg.validate()?;
    let steps = path.steps();
    let scale = steps as f64;
    let field_scale = path
        .slices()
        .iter()
        .map(|s| s.positions().max_abs())
        .fold(0.0, f64::max)
        .max(1.0);
    let eps = ENERGY_FD_STEP * field_scale;
    let len = path.grid().len() * path.dim();
    (1..steps)
        .map(|t| {
            let prev = path.slice(t - 1).positions();
            let cur = path.slice(t).positions();
            let next = path.slice(t + 1).positions();
            let vals: Vec<f64> = (0..len)
                .into_par_iter()
                .map(|i| {
                    let local = |delta: f64| -> Result<f64> {
                        let mut p = cur.clone();
                        p.values_mut()[i] += delta;
                        Ok(step_value(prev, &p, cfg)? + step_value(&p, next, cfg)?)
                    };
                    Ok((local(eps)? - local(-eps)?) * scale / (2.0 * eps))
                })
                .collect::<Result<_>>()?;
            TensorField::new(path.grid(), TensorType::VECTOR, path.dim(), vals)
        })
        .collect()
}

/// Flattens per-slice fields into one coordinate vector.
pub fn flatten(fields: &[TensorField]) -> Vec<f64> {
    fields.iter().flat_map(|f| f.values().iter().copied()).collect()
}
