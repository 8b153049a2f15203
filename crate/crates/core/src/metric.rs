//! The curvature-weighted Sobolev metric, the background `H^k` metric and the
//! `L^p(g)` / `Ẇ^{l,p}(g)` norm family.

use crate::error::{Error, Result};
use crate::geometry::{covariant_derivative_tower, fiber_inner, InducedGeometry};
use crate::grid::{chart_gradient, dot, GridImmersion, TensorField, TensorType};

#[derive(Clone, Debug, PartialEq)]
pub struct MetricConfig {
    /// Order of the top derivative term, at least 3.
    pub k: usize,
    /// Power of `|H|` multiplying the intermediate terms.
    pub weight_exponent: f64,
    /// Derivative orders carrying the curvature weight, a subset of `1..k`.
    pub included_orders: Vec<usize>,
    pub immersion_floor: f64,
    /// Largest derivative order any operation may request.
    pub max_order: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            k: 3,
            weight_exponent: 4.0,
            included_orders: vec![1, 2],
            immersion_floor: GridImmersion::DEFAULT_FLOOR,
            max_order: 4,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::InvalidConfig(format!("order k = {} < 3", self.k)));
        }
        if self.k > self.max_order {
            return Err(Error::OrderTooHigh {
                order: self.k,
                max: self.max_order,
            });
        }
        if !(self.weight_exponent >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weight exponent {} < 0",
                self.weight_exponent
            )));
        }
        if let Some(o) = self.included_orders.iter().find(|&&o| o == 0 || o >= self.k) {
            return Err(Error::InvalidConfig(format!(
                "weighted order {o} outside 1..{}",
                self.k
            )));
        }
        if !(self.immersion_floor > 0.0) {
            return Err(Error::InvalidConfig("immersion floor must be positive".into()));
        }
        Ok(())
    }

    /// Per-order coefficient pattern: `0` unweighted L², `1` weighted, `2` top.
    pub(crate) fn order_role(&self, order: usize) -> Option<OrderRole> {
        if order == 0 || order == self.k {
            Some(OrderRole::Plain)
        } else if self.included_orders.contains(&order) {
            Some(OrderRole::Weighted)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum OrderRole {
    Plain,
    Weighted,
}

/// Nodewise curvature weight `|H|^w`.
pub fn curvature_weight(geom: &InducedGeometry, exponent: f64) -> TensorField {
    geom.mean_curvature_norm().map(|h| h.powf(exponent))
}

fn check_vector_field(geom: &InducedGeometry, h: &TensorField) -> Result<()> {
    if h.ty() != TensorType::VECTOR {
        return Err(Error::TypeMismatch {
            expected: TensorType::VECTOR,
            found: h.ty(),
        });
    }
    if h.grid() != geom.grid() || h.dim() != geom.dim() {
        return Err(Error::ShapeMismatch(
            "tangent field does not match the immersion".into(),
        ));
    }
    Ok(())
}

/// `G^k_f(h₁, h₂)` with the geometry of `f` precomputed.
pub fn metric_eval(
    geom: &InducedGeometry,
    h1: &TensorField,
    h2: &TensorField,
    cfg: &MetricConfig,
) -> Result<f64> {
    cfg.validate()?;
    check_vector_field(geom, h1)?;
    check_vector_field(geom, h2)?;
    let t1 = covariant_derivative_tower(geom, h1, cfg.k)?;
    let t2 = if h1 == h2 {
        t1.clone()
    } else {
        covariant_derivative_tower(geom, h2, cfg.k)?
    };
    let density = metric_density_from_towers(geom, &t1, &t2, cfg)?;
    Ok(dot(density.values(), geom.rho.values()) * geom.grid().cell_area())
}

/// Recomputes the geometry of `f` and evaluates `G^k_f(h₁, h₂)`.
pub fn metric_eval_at(
    f: &GridImmersion,
    h1: &TensorField,
    h2: &TensorField,
    cfg: &MetricConfig,
) -> Result<f64> {
    let geom = InducedGeometry::new(f, cfg.immersion_floor)?;
    metric_eval(&geom, h1, h2, cfg)
}

/// Integrand of `G^k` against `vol`, per node.
pub fn metric_density(
    geom: &InducedGeometry,
    h1: &TensorField,
    h2: &TensorField,
    cfg: &MetricConfig,
) -> Result<TensorField> {
    cfg.validate()?;
    check_vector_field(geom, h1)?;
    check_vector_field(geom, h2)?;
    let t1 = covariant_derivative_tower(geom, h1, cfg.k)?;
    let t2 = covariant_derivative_tower(geom, h2, cfg.k)?;
    metric_density_from_towers(geom, &t1, &t2, cfg)
}

fn metric_density_from_towers(
    geom: &InducedGeometry,
    t1: &[TensorField],
    t2: &[TensorField],
    cfg: &MetricConfig,
) -> Result<TensorField> {
    let weight = curvature_weight(geom, cfg.weight_exponent);
    let mut density = TensorField::zeros(geom.grid(), TensorType::SCALAR, 1);
    for order in 0..=cfg.k {
        let Some(role) = cfg.order_role(order) else {
            continue;
        };
        let term = fiber_inner(geom, &t1[order], &t2[order])?;
        let term = match role {
            OrderRole::Plain => term,
            OrderRole::Weighted => term.pointwise_scaled(&weight)?,
        };
        density = density.add(&term)?;
    }
    Ok(density)
}

/// `Ḡ^k(h₁, h₂) = ∫ h₁·h₂ + ∂^k h₁ · ∂^k h₂ dvol̄` for the flat background.
pub fn background_metric_eval(h1: &TensorField, h2: &TensorField, k: usize) -> Result<f64> {
    h1.check_same_shape(h2)?;
    let mut d1 = h1.clone();
    let mut d2 = h2.clone();
    for _ in 0..k {
        d1 = chart_gradient(&d1);
        d2 = chart_gradient(&d2);
    }
    let area = h1.grid().cell_area();
    Ok((h1.dot(h2) + d1.dot(&d2)) * area)
}

/// `‖field‖_{L^p(g)}`; `p = f64::INFINITY` gives the nodal maximum of `|field|_g`.
pub fn lp_norm(geom: &InducedGeometry, field: &TensorField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::BadExponents(format!("p = {p} < 1")));
    }
    let sq = fiber_inner(geom, field, field)?;
    if p.is_infinite() {
        return Ok(sq.values().iter().fold(0.0f64, |m, &x| m.max(x.max(0.0).sqrt())));
    }
    let sum: f64 = sq
        .values()
        .iter()
        .zip(geom.rho.values())
        .map(|(&s, &r)| {
            let s = s.max(0.0);
            let v = if p == 2.0 { s } else { s.powf(0.5 * p) };
            v * r
        })
        .sum();
    let integral = sum * geom.grid().cell_area();
    Ok(if p == 2.0 {
        integral.sqrt()
    } else {
        integral.powf(1.0 / p)
    })
}

/// `‖∇^l field‖_{L^p(g)}`.
pub fn sobolev_seminorm(
    geom: &InducedGeometry,
    field: &TensorField,
    l: usize,
    p: f64,
    max_order: usize,
) -> Result<f64> {
    let d = crate::geometry::iterated_covariant_derivative(geom, field, l, max_order)?;
    lp_norm(geom, &d, p)
}
