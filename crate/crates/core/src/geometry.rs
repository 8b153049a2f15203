//! Induced geometry of a grid immersion.
//!
//! Chart conventions: `g_ab = ⟨∂_a f, ∂_b f⟩`, `Γ^a_{bc}` stored at component
//! `4a + 2b + c` of a `(1, 2, 0)` field, `S_ab` stored with the ambient index
//! last. Covariant differentiation appends the derivative direction as the
//! trailing cotangent slot, so `(∇X)_{…;b}` for the direction `b`.

use crate::error::{Error, Result};
use crate::grid::{
    chart_gradient, dot, integrate, smallest_singular_from_gram, GridImmersion, TensorField,
    TensorType,
};

/// Determinant floor below which `g` is treated as degenerate.
pub const DET_FLOOR: f64 = 1e-14;

pub const METRIC_TYPE: TensorType = TensorType::new(0, 2, 0);
pub const INVERSE_METRIC_TYPE: TensorType = TensorType::new(2, 0, 0);
pub const CHRISTOFFEL_TYPE: TensorType = TensorType::new(1, 2, 0);
pub const TANGENT_MAP_TYPE: TensorType = TensorType::new(0, 1, 1);
pub const SECOND_FORM_TYPE: TensorType = TensorType::new(0, 2, 1);

/// Cached induced geometry of one immersion.
#[derive(Clone, Debug)]
pub struct InducedGeometry {
    pub tangent_map: TensorField,
    pub g: TensorField,
    pub g_inv: TensorField,
    pub rho: TensorField,
    /// Chart partials of `g`, `(0, 3, 0)`, component `[a][b][c] = ∂_c g_ab`.
    pub dg: TensorField,
    pub gamma: TensorField,
    pub second_fundamental: TensorField,
    pub mean_curvature: TensorField,
    pub min_singular_value: f64,
}

impl InducedGeometry {
    pub fn new(f: &GridImmersion, immersion_floor: f64) -> Result<Self> {
        let tangent_map = chart_gradient(f.positions());
        let g = metric_from_tangent_map(&tangent_map);
        let (g_inv, rho, min_singular_value) = invert_metric(&g, immersion_floor)?;
        let dg = chart_gradient(&g);
        let gamma = christoffel_from_parts(&g_inv, &dg);
        let second_fundamental = second_fundamental_from_parts(&tangent_map, &gamma);
        let mean_curvature = trace_with_inverse(&g_inv, &second_fundamental);
        Ok(InducedGeometry {
            tangent_map,
            g,
            g_inv,
            rho,
            dg,
            gamma,
            second_fundamental,
            mean_curvature,
            min_singular_value,
        })
    }

    pub fn grid(&self) -> crate::grid::ParamGrid {
        self.g.grid()
    }

    pub fn dim(&self) -> usize {
        self.tangent_map.dim()
    }

    pub fn node_g(&self, node: usize) -> [f64; 4] {
        as4(self.g.node(node))
    }

    pub fn node_g_inv(&self, node: usize) -> [f64; 4] {
        as4(self.g_inv.node(node))
    }

    pub fn node_gamma(&self, node: usize) -> [f64; 8] {
        as8(self.gamma.node(node))
    }

    /// Total area `∫ vol`.
    pub fn volume(&self) -> f64 {
        let one = TensorField::scalar_from_fn(self.grid(), |_, _| 1.0);
        integrate(&one, &self.rho).expect("scalar fields on one grid")
    }

    /// Euclidean norm `|H|` per node.
    pub fn mean_curvature_norm(&self) -> TensorField {
        let d = self.dim();
        let vals = self
            .mean_curvature
            .values()
            .chunks_exact(d)
            .map(|h| dot(h, h).sqrt())
            .collect();
        TensorField::from_raw(self.grid(), TensorType::SCALAR, 1, vals)
    }
}

pub(crate) fn as4(s: &[f64]) -> [f64; 4] {
    [s[0], s[1], s[2], s[3]]
}

pub(crate) fn as8(s: &[f64]) -> [f64; 8] {
    let mut out = [0.0; 8];
    out.copy_from_slice(&s[..8]);
    out
}

/// First fundamental form of `f`.
pub fn induced_metric(f: &GridImmersion, immersion_floor: f64) -> Result<TensorField> {
    let tf = chart_gradient(f.positions());
    let g = metric_from_tangent_map(&tf);
    invert_metric(&g, immersion_floor)?;
    Ok(g)
}

pub(crate) fn metric_from_tangent_map(tf: &TensorField) -> TensorField {
    let d = tf.dim();
    let grid = tf.grid();
    let mut vals = vec![0.0; grid.len() * 4];
    for (node, out) in vals.chunks_exact_mut(4).enumerate() {
        let t = tf.node(node);
        let (fu, fv) = t.split_at(d);
        out[0] = dot(fu, fu);
        out[1] = dot(fu, fv);
        out[2] = dot(fv, fu);
        out[3] = dot(fv, fv);
    }
    TensorField::from_raw(grid, METRIC_TYPE, d, vals)
}

/// Closed-form 2×2 inverse. Returns `(g⁻¹, ρ = √det g, min singular value)`.
pub(crate) fn invert_metric(
    g: &TensorField,
    immersion_floor: f64,
) -> Result<(TensorField, TensorField, f64)> {
    let grid = g.grid();
    let mut inv = vec![0.0; grid.len() * 4];
    let mut rho = vec![0.0; grid.len()];
    let mut min_sv = f64::INFINITY;
    for node in 0..grid.len() {
        let m = as4(g.node(node));
        let sv = smallest_singular_from_gram(&m);
        let det = m[0] * m[3] - m[1] * m[2];
        if !(sv > immersion_floor) || !(det > DET_FLOOR) {
            return Err(Error::ImmersionViolation {
                node,
                singular_value: sv,
            });
        }
        min_sv = min_sv.min(sv);
        let out = &mut inv[node * 4..node * 4 + 4];
        out[0] = m[3] / det;
        out[1] = -m[1] / det;
        out[2] = -m[2] / det;
        out[3] = m[0] / det;
        rho[node] = det.sqrt();
    }
    Ok((
        TensorField::from_raw(grid, INVERSE_METRIC_TYPE, g.dim(), inv),
        TensorField::from_raw(grid, TensorType::SCALAR, 1, rho),
        min_sv,
    ))
}

/// Christoffel symbols of the second kind of the induced metric.
pub fn christoffel(geom: &InducedGeometry) -> TensorField {
    christoffel_from_parts(&geom.g_inv, &geom.dg)
}

/// `Γ^a_{bc} = ½ g^{ad} (∂_b g_dc + ∂_c g_bd − ∂_d g_bc)`.
pub(crate) fn christoffel_from_parts(g_inv: &TensorField, dg: &TensorField) -> TensorField {
    let grid = g_inv.grid();
    let mut vals = vec![0.0; grid.len() * 8];
    for node in 0..grid.len() {
        let gi = as4(g_inv.node(node));
        let dgn = dg.node(node);
        let out = &mut vals[node * 8..node * 8 + 8];
        christoffel_node(&gi, dgn, out);
    }
    TensorField::from_raw(grid, CHRISTOFFEL_TYPE, g_inv.dim(), vals)
}

#[inline]
pub(crate) fn first_kind(dgn: &[f64], d: usize, b: usize, c: usize) -> f64 {
    // dg[a][b][c] = ∂_c g_ab at index 4a + 2b + c
    0.5 * (dgn[4 * d + 2 * c + b] + dgn[4 * b + 2 * d + c] - dgn[4 * b + 2 * c + d])
}

#[inline]
pub(crate) fn christoffel_node(gi: &[f64; 4], dgn: &[f64], out: &mut [f64]) {
    for b in 0..2 {
        for c in 0..2 {
            let l0 = first_kind(dgn, 0, b, c);
            let l1 = first_kind(dgn, 1, b, c);
            for a in 0..2 {
                out[4 * a + 2 * b + c] = gi[2 * a] * l0 + gi[2 * a + 1] * l1;
            }
        }
    }
}

/// `S_ab = ∂_b ∂_a f − Γ^c_ab ∂_c f` from the tangent map and Christoffel symbols.
pub fn second_fundamental_form(geom: &InducedGeometry) -> TensorField {
    second_fundamental_from_parts(&geom.tangent_map, &geom.gamma)
}

pub(crate) fn second_fundamental_from_parts(tf: &TensorField, gamma: &TensorField) -> TensorField {
    let d = tf.dim();
    let mut s = chart_gradient(tf);
    for node in 0..tf.grid().len() {
        let gam = as8(gamma.node(node));
        let t = tf.node(node).to_vec();
        let out = s.node_mut(node);
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let coef = gam[4 * c + 2 * a + b];
                    for x in 0..d {
                        out[(2 * a + b) * d + x] -= coef * t[c * d + x];
                    }
                }
            }
        }
    }
    s
}

/// Vector-valued mean curvature `H = g^{ab} S_ab`.
pub fn mean_curvature(geom: &InducedGeometry) -> TensorField {
    trace_with_inverse(&geom.g_inv, &geom.second_fundamental)
}

pub(crate) fn trace_with_inverse(g_inv: &TensorField, s: &TensorField) -> TensorField {
    let d = s.dim();
    let grid = s.grid();
    let mut vals = vec![0.0; grid.len() * d];
    for node in 0..grid.len() {
        let gi = as4(g_inv.node(node));
        let sn = s.node(node);
        let out = &mut vals[node * d..(node + 1) * d];
        for ab in 0..4 {
            for x in 0..d {
                out[x] += gi[ab] * sn[ab * d + x];
            }
        }
    }
    TensorField::from_raw(grid, TensorType::VECTOR, d, vals)
}

/// Adds the connection terms of `∇X − ∂X` at one node, with `gamma` playing
/// the role of `Γ`: `+Γ` on tangent slots, `−Γ` on cotangent slots, nothing on
/// ambient slots. `out` uses the differentiated layout.
#[inline]
pub(crate) fn connection_correction_node(
    ty: TensorType,
    amb: usize,
    gamma: &[f64; 8],
    x: &[f64],
    out: &mut [f64],
) {
    let slots = ty.chart_slots();
    let p_len = ty.chart_len();
    for prefix in 0..p_len {
        for b in 0..2 {
            let dst = (2 * prefix + b) * amb;
            for s in 0..slots {
                let stride = 1usize << (slots - 1 - s);
                let ps = (prefix / stride) & 1;
                let base = prefix - ps * stride;
                for e in 0..2 {
                    let coef = if s < ty.tangent {
                        gamma[4 * ps + 2 * b + e]
                    } else {
                        -gamma[4 * e + 2 * b + ps]
                    };
                    if coef == 0.0 {
                        continue;
                    }
                    let src = (base + e * stride) * amb;
                    for k in 0..amb {
                        out[dst + k] += coef * x[src + k];
                    }
                }
            }
        }
    }
}

/// Reverse of [`connection_correction_node`]: given the output cotangent
/// `out_bar`, accumulates into `x_bar` and `gamma_bar`.
#[inline]
pub(crate) fn connection_correction_node_adjoint(
    ty: TensorType,
    amb: usize,
    gamma: &[f64; 8],
    x: &[f64],
    out_bar: &[f64],
    x_bar: &mut [f64],
    gamma_bar: &mut [f64; 8],
) {
    let slots = ty.chart_slots();
    let p_len = ty.chart_len();
    for prefix in 0..p_len {
        for b in 0..2 {
            let dst = (2 * prefix + b) * amb;
            for s in 0..slots {
                let stride = 1usize << (slots - 1 - s);
                let ps = (prefix / stride) & 1;
                let base = prefix - ps * stride;
                for e in 0..2 {
                    let (idx, sign) = if s < ty.tangent {
                        (4 * ps + 2 * b + e, 1.0)
                    } else {
                        (4 * e + 2 * b + ps, -1.0)
                    };
                    let coef = sign * gamma[idx];
                    let src = (base + e * stride) * amb;
                    let mut acc = 0.0;
                    for k in 0..amb {
                        x_bar[src + k] += coef * out_bar[dst + k];
                        acc += x[src + k] * out_bar[dst + k];
                    }
                    gamma_bar[idx] += sign * acc;
                }
            }
        }
    }
}

/// Applies the connection terms of an arbitrary `(1, 2, 0)` field to `x`,
/// returning a field of the differentiated type (no chart partials).
pub(crate) fn connection_correction(gamma: &TensorField, x: &TensorField) -> TensorField {
    let ty = x.ty();
    let amb = ty.ambient_len(x.dim());
    let mut out = TensorField::zeros(x.grid(), ty.differentiated(), x.dim());
    for node in 0..x.grid().len() {
        let gam = as8(gamma.node(node));
        let src = x.node(node);
        connection_correction_node(ty, amb, &gam, src, out.node_mut(node));
    }
    out
}

/// Levi-Civita covariant derivative of an `(i, j, m)` field.
pub fn covariant_derivative(geom: &InducedGeometry, field: &TensorField) -> Result<TensorField> {
    if field.grid() != geom.grid() {
        return Err(Error::ShapeMismatch("field and geometry grids differ".into()));
    }
    let mut out = chart_gradient(field);
    if field.ty().chart_slots() == 0 {
        return Ok(out);
    }
    let ty = field.ty();
    let amb = ty.ambient_len(field.dim());
    for node in 0..field.grid().len() {
        let gam = geom.node_gamma(node);
        let src = field.node(node).to_vec();
        connection_correction_node(ty, amb, &gam, &src, out.node_mut(node));
    }
    Ok(out)
}

/// `order`-fold covariant derivative, bounded by `max_order`.
pub fn iterated_covariant_derivative(
    geom: &InducedGeometry,
    field: &TensorField,
    order: usize,
    max_order: usize,
) -> Result<TensorField> {
    if order > max_order {
        return Err(Error::OrderTooHigh {
            order,
            max: max_order,
        });
    }
    let mut cur = field.clone();
    for _ in 0..order {
        cur = covariant_derivative(geom, &cur)?;
    }
    Ok(cur)
}

/// All covariant derivatives `∇^0 h, …, ∇^order h`.
pub fn covariant_derivative_tower(
    geom: &InducedGeometry,
    field: &TensorField,
    order: usize,
) -> Result<Vec<TensorField>> {
    let mut out = Vec::with_capacity(order + 1);
    out.push(field.clone());
    for j in 0..order {
        let next = covariant_derivative(geom, &out[j])?;
        out.push(next);
    }
    Ok(out)
}

/// Scratch space for per-node slot contractions.
#[derive(Default)]
pub(crate) struct Contractor {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Contractor {
    /// `Σ x[I] y[J] Π_s mats[s][I_s J_s]` over chart slots, Euclidean over
    /// ambient slots.
    pub(crate) fn contract(
        &mut self,
        slots: usize,
        amb: usize,
        x: &[f64],
        y: &[f64],
        mats: &[&[f64; 4]],
    ) -> f64 {
        self.apply(slots, amb, y, mats);
        dot(x, &self.a)
    }

    /// Applies `mats[s]` to chart slot `s` of `y`.
    pub(crate) fn apply(&mut self, slots: usize, amb: usize, y: &[f64], mats: &[&[f64; 4]]) -> &[f64] {
        debug_assert_eq!(mats.len(), slots);
        let len = y.len();
        self.a.clear();
        self.a.extend_from_slice(y);
        self.b.resize(len, 0.0);
        for (s, m) in mats.iter().enumerate() {
            let stride = 1usize << (slots - 1 - s);
            let p_len = 1usize << slots;
            for prefix in 0..p_len {
                let ps = (prefix / stride) & 1;
                let base = prefix - ps * stride;
                let s0 = base * amb;
                let s1 = (base + stride) * amb;
                let dst = prefix * amb;
                let (m0, m1) = (m[2 * ps], m[2 * ps + 1]);
                for k in 0..amb {
                    self.b[dst + k] = m0 * self.a[s0 + k] + m1 * self.a[s1 + k];
                }
            }
            std::mem::swap(&mut self.a, &mut self.b);
        }
        &self.a
    }
}

/// Pointwise fiber inner product `g(A, B)`: tangent slots contracted with
/// `g`, cotangent slots with `g⁻¹`, ambient slots Euclidean.
pub fn fiber_inner(geom: &InducedGeometry, a: &TensorField, b: &TensorField) -> Result<TensorField> {
    fiber_inner_with(&geom.g, &geom.g_inv, a, b)
}

pub(crate) fn fiber_inner_with(
    g: &TensorField,
    g_inv: &TensorField,
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
        let gn = as4(g.node(node));
        let gi = as4(g_inv.node(node));
        let mats: Vec<&[f64; 4]> = (0..slots)
            .map(|s| if s < ty.tangent { &gn } else { &gi })
            .collect();
        *out = c.contract(slots, amb, a.node(node), b.node(node), &mats);
    }
    Ok(TensorField::from_raw(grid, TensorType::SCALAR, 1, vals))
}

/// The metric tensor itself as a `(0, 2, 0)` field.
pub fn metric_tensor(geom: &InducedGeometry) -> TensorField {
    geom.g.clone()
}
