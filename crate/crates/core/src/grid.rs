//! Periodic structured grids on the parameter torus and tensor-field storage.
//!
//! The torus is the chart square `[0, 2π)²` with nodes at `(i·h_u, j·h_v)`,
//! `h = 2π/n`. Node `(i, j)` has linear index `i + n_u·j` (u fastest). The
//! background metric is the flat chart metric, so background derivatives are
//! chart partials and the background area weight of every node is `h_u·h_v`.
//!
//! A [`TensorField`] of type `(i, j, m)` stores, per node, the `2^i·2^j·d^m`
//! chart components of an `(i, j, m)` tensor in row-major order over the slot
//! sequence `(tangent…, cotangent…, ambient…)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Chart direction on the torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    U,
    V,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::U, Direction::V];

    pub fn index(self) -> usize {
        match self {
            Direction::U => 0,
            Direction::V => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamGrid {
    n_u: usize,
    n_v: usize,
    stencil_order: usize,
}

impl ParamGrid {
    pub const DEFAULT_STENCIL_ORDER: usize = 4;

    pub fn new(n_u: usize, n_v: usize) -> Result<Self> {
        Self::with_order(n_u, n_v, Self::DEFAULT_STENCIL_ORDER)
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn with_order(n_u: usize, n_v: usize, stencil_order: usize) -> Result<Self> {
        for (name, n) in [("n_u", n_u), ("n_v", n_v)] {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n}: node counts must be even and at least 8"
                )));
            }
        }
        if !matches!(stencil_order, 2 | 4 | 6) {
            return Err(Error::InvalidGrid(format!(
                "stencil order {stencil_order} not in {{2, 4, 6}}"
            )));
        }
        Ok(ParamGrid {
            n_u,
            n_v,
            stencil_order,
        })
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn stencil_order(&self) -> usize {
        self.stencil_order
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> (f64, f64) {
        (2.0 * PI / self.n_u as f64, 2.0 * PI / self.n_v as f64)
    }

    pub fn step(&self, dir: Direction) -> f64 {
        let (hu, hv) = self.spacing();
        match dir {
            Direction::U => hu,
            Direction::V => hv,
        }
    }

    /// Background area weight of a node.
    pub fn cell_area(&self) -> f64 {
        let (hu, hv) = self.spacing();
        hu * hv
    }

    /// Linear index of `(i, j)` with periodic wrap-around.
    pub fn index(&self, i: isize, j: isize) -> usize {
        let iu = i.rem_euclid(self.n_u as isize) as usize;
        let jv = j.rem_euclid(self.n_v as isize) as usize;
        iu + self.n_u * jv
    }

    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        (node % self.n_u, node / self.n_u)
    }

    /// Chart coordinates of a node.
    pub fn coords(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.node_ij(node);
        let (hu, hv) = self.spacing();
        (i as f64 * hu, j as f64 * hv)
    }

    /// One-sided coefficients `c_s` of the central difference
    /// `f'(x) ≈ Σ_s c_s (f(x + s h) − f(x − s h)) / h`.
    pub fn stencil_coefficients(&self) -> &'static [f64] {
        match self.stencil_order {
            2 => &[0.5],
            4 => &[2.0 / 3.0, -1.0 / 12.0],
            _ => &[3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
        }
    }
}

/// Slot counts `(tangent, cotangent, ambient)` of a tensor bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TensorType {
    pub tangent: usize,
    pub cotangent: usize,
    pub ambient: usize,
}

impl TensorType {
    pub const SCALAR: TensorType = TensorType::new(0, 0, 0);
    pub const VECTOR: TensorType = TensorType::new(0, 0, 1);

    pub const fn new(tangent: usize, cotangent: usize, ambient: usize) -> Self {
        TensorType {
            tangent,
            cotangent,
            ambient,
        }
    }

    /// Number of chart slots (tangent plus cotangent).
    pub fn chart_slots(&self) -> usize {
        self.tangent + self.cotangent
    }

    /// Number of chart-index combinations, `2^(i+j)`.
    pub fn chart_len(&self) -> usize {
        1 << self.chart_slots()
    }

    /// Number of ambient-index combinations, `d^m`.
    pub fn ambient_len(&self, dim: usize) -> usize {
        dim.pow(self.ambient as u32)
    }

    pub fn components(&self, dim: usize) -> usize {
        self.chart_len() * self.ambient_len(dim)
    }

    /// Type after covariant differentiation: one more cotangent slot.
    pub fn differentiated(&self) -> TensorType {
        TensorType::new(self.tangent, self.cotangent + 1, self.ambient)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    grid: ParamGrid,
    ty: TensorType,
    dim: usize,
    values: Vec<f64>,
}

impl TensorField {
    pub fn new(grid: ParamGrid, ty: TensorType, dim: usize, values: Vec<f64>) -> Result<Self> {
        let expected = grid.len() * ty.components(dim);
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{:?} field on {}x{} grid with d = {dim} needs {expected} values, got {}",
                ty,
                grid.n_u(),
                grid.n_v(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::ShapeMismatch(format!(
                "non-finite value at flat index {pos}"
            )));
        }
        Ok(TensorField {
            grid,
            ty,
            dim,
            values,
        })
    }

    /// Unchecked constructor for values produced by this crate's own kernels.
    pub(crate) fn from_raw(grid: ParamGrid, ty: TensorType, dim: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * ty.components(dim));
        TensorField {
            grid,
            ty,
            dim,
            values,
        }
    }

    pub fn zeros(grid: ParamGrid, ty: TensorType, dim: usize) -> Self {
        let n = grid.len() * ty.components(dim);
        TensorField::from_raw(grid, ty, dim, vec![0.0; n])
    }

    /// Fills every node from its chart coordinates.
    pub fn from_fn<F>(grid: ParamGrid, ty: TensorType, dim: usize, mut f: F) -> Self
    where
        F: FnMut(f64, f64, &mut [f64]),
    {
        let q = ty.components(dim);
        let mut values = vec![0.0; grid.len() * q];
        for (node, chunk) in values.chunks_exact_mut(q).enumerate() {
            let (u, v) = grid.coords(node);
            f(u, v, chunk);
        }
        TensorField::from_raw(grid, ty, dim, values)
    }

    pub fn scalar_from_fn<F>(grid: ParamGrid, mut f: F) -> Self
    where
        F: FnMut(f64, f64) -> f64,
    {
        TensorField::from_fn(grid, TensorType::SCALAR, 1, |u, v, out| out[0] = f(u, v))
    }

    pub fn constant_vector(grid: ParamGrid, c: &[f64]) -> Self {
        TensorField::from_fn(grid, TensorType::VECTOR, c.len(), |_, _, out| {
            out.copy_from_slice(c)
        })
    }

    pub fn grid(&self) -> ParamGrid {
        self.grid
    }

    pub fn ty(&self) -> TensorType {
        self.ty
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Components per node.
    pub fn components(&self) -> usize {
        self.ty.components(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, node: usize) -> &[f64] {
        let q = self.components();
        &self.values[node * q..(node + 1) * q]
    }

    pub fn node_mut(&mut self, node: usize) -> &mut [f64] {
        let q = self.components();
        &mut self.values[node * q..(node + 1) * q]
    }

    /// Same grid, type and component count.
    pub fn same_shape(&self, other: &TensorField) -> bool {
        self.grid == other.grid && self.ty == other.ty && self.components() == other.components()
    }

    pub(crate) fn check_same_shape(&self, other: &TensorField) -> Result<()> {
        if self.ty != other.ty {
            return Err(Error::TypeMismatch {
                expected: self.ty,
                found: other.ty,
            });
        }
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch(
                "fields live on different grids or ambient dimensions".into(),
            ));
        }
        Ok(())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> TensorField {
        let values = self.values.iter().map(|&x| f(x)).collect();
        TensorField::from_raw(self.grid, self.ty, self.dim, values)
    }

    pub fn scaled(&self, factor: f64) -> TensorField {
        self.map(|x| factor * x)
    }

    pub fn add(&self, other: &TensorField) -> Result<TensorField> {
        self.check_same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(TensorField::from_raw(self.grid, self.ty, self.dim, values))
    }

    pub fn sub(&self, other: &TensorField) -> Result<TensorField> {
        self.check_same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(TensorField::from_raw(self.grid, self.ty, self.dim, values))
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &TensorField) -> Result<TensorField> {
        self.check_same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(TensorField::from_raw(self.grid, self.ty, self.dim, values))
    }

    /// Multiplies every node by the matching value of a scalar field.
    pub fn pointwise_scaled(&self, scalar: &TensorField) -> Result<TensorField> {
        if scalar.ty != TensorType::SCALAR || scalar.grid != self.grid {
            return Err(Error::TypeMismatch {
                expected: TensorType::SCALAR,
                found: scalar.ty,
            });
        }
        let q = self.components();
        let mut values = self.values.clone();
        for (chunk, s) in values.chunks_exact_mut(q).zip(&scalar.values) {
            chunk.iter_mut().for_each(|x| *x *= s);
        }
        Ok(TensorField::from_raw(self.grid, self.ty, self.dim, values))
    }

    /// Euclidean inner product of the raw component vectors.
    pub fn dot(&self, other: &TensorField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &TensorField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Central-difference chart partial with periodic wrap-around.
pub fn partial_derivative(field: &TensorField, dir: Direction) -> TensorField {
    let grid = field.grid;
    let q = field.components();
    let coeffs = grid.stencil_coefficients();
    let inv_h = 1.0 / grid.step(dir);
    let (nu, nv) = (grid.n_u as isize, grid.n_v as isize);
    let x = &field.values;
    let mut out = vec![0.0; x.len()];
    for j in 0..nv {
        for i in 0..nu {
            let node = grid.index(i, j);
            let dst = &mut out[node * q..(node + 1) * q];
            for (k, c) in coeffs.iter().enumerate() {
                let s = k as isize + 1;
                let (plus, minus) = match dir {
                    Direction::U => (grid.index(i + s, j), grid.index(i - s, j)),
                    Direction::V => (grid.index(i, j + s), grid.index(i, j - s)),
                };
                let xp = &x[plus * q..(plus + 1) * q];
                let xm = &x[minus * q..(minus + 1) * q];
                for ((d, a), b) in dst.iter_mut().zip(xp).zip(xm) {
                    *d += c * (a - b);
                }
            }
            dst.iter_mut().for_each(|d| *d *= inv_h);
        }
    }
    TensorField::from_raw(grid, field.ty, field.dim, out)
}

/// Background gradient: both chart partials stored in a new trailing
/// cotangent slot, `(i, j, m) → (i, j + 1, m)`.
pub fn chart_gradient(field: &TensorField) -> TensorField {
    let du = partial_derivative(field, Direction::U);
    let dv = partial_derivative(field, Direction::V);
    interleave_new_slot(field, &du, &dv)
}

/// Transpose of [`chart_gradient`]. The stencils are antisymmetric, so this is
/// `−∂_u` of the `b = 0` part plus `−∂_v` of the `b = 1` part.
pub(crate) fn chart_gradient_adjoint(bar: &TensorField) -> TensorField {
    let (b0, b1) = split_last_slot(bar);
    let mut out = partial_derivative(&b0, Direction::U);
    let dv = partial_derivative(&b1, Direction::V);
    for (o, v) in out.values.iter_mut().zip(&dv.values) {
        *o = -(*o + v);
    }
    out
}

/// Packs two same-type fields as the `b = 0, 1` values of a new trailing
/// cotangent slot.
pub(crate) fn interleave_new_slot(
    like: &TensorField,
    b0: &TensorField,
    b1: &TensorField,
) -> TensorField {
    let ty = like.ty;
    let p = ty.chart_len();
    let a = ty.ambient_len(like.dim);
    let q = p * a;
    let out_ty = ty.differentiated();
    let mut out = vec![0.0; like.grid.len() * 2 * q];
    for node in 0..like.grid.len() {
        let src0 = b0.node(node);
        let src1 = b1.node(node);
        let dst = &mut out[node * 2 * q..(node + 1) * 2 * q];
        for prefix in 0..p {
            let s = prefix * a;
            dst[(2 * prefix) * a..(2 * prefix + 1) * a].copy_from_slice(&src0[s..s + a]);
            dst[(2 * prefix + 1) * a..(2 * prefix + 2) * a].copy_from_slice(&src1[s..s + a]);
        }
    }
    TensorField::from_raw(like.grid, out_ty, like.dim, out)
}

/// Splits the trailing cotangent slot back into its two components.
pub(crate) fn split_last_slot(field: &TensorField) -> (TensorField, TensorField) {
    let ty = field.ty;
    debug_assert!(ty.cotangent > 0);
    let base = TensorType::new(ty.tangent, ty.cotangent - 1, ty.ambient);
    let p = base.chart_len();
    let a = base.ambient_len(field.dim);
    let q = p * a;
    let mut v0 = vec![0.0; field.grid.len() * q];
    let mut v1 = vec![0.0; field.grid.len() * q];
    for node in 0..field.grid.len() {
        let src = field.node(node);
        for prefix in 0..p {
            let d = node * q + prefix * a;
            v0[d..d + a].copy_from_slice(&src[(2 * prefix) * a..(2 * prefix + 1) * a]);
            v1[d..d + a].copy_from_slice(&src[(2 * prefix + 1) * a..(2 * prefix + 2) * a]);
        }
    }
    (
        TensorField::from_raw(field.grid, base, field.dim, v0),
        TensorField::from_raw(field.grid, base, field.dim, v1),
    )
}

/// Periodic rectangle-rule integral `∫ s ρ dvol̄`.
pub fn integrate(scalar: &TensorField, density: &TensorField) -> Result<f64> {
    for f in [scalar, density] {
        if f.ty != TensorType::SCALAR {
            return Err(Error::TypeMismatch {
                expected: TensorType::SCALAR,
                found: f.ty,
            });
        }
    }
    if scalar.grid != density.grid {
        return Err(Error::ShapeMismatch("integrand and density grids differ".into()));
    }
    let sum: f64 = scalar.values.iter().zip(&density.values).map(|(s, r)| s * r).sum();
    Ok(sum * scalar.grid.cell_area())
}

/// Composition with the grid translation by `offset` nodes:
/// `out(i, j) = field(i + a, j + b)`.
pub fn grid_shift(field: &TensorField, offset: (isize, isize)) -> TensorField {
    let grid = field.grid;
    let q = field.components();
    let mut out = vec![0.0; field.values.len()];
    for j in 0..grid.n_v as isize {
        for i in 0..grid.n_u as isize {
            let dst = grid.index(i, j);
            let src = grid.index(i + offset.0, j + offset.1);
            out[dst * q..(dst + 1) * q].copy_from_slice(&field.values[src * q..(src + 1) * q]);
        }
    }
    TensorField::from_raw(grid, field.ty, field.dim, out)
}

/// A discretized map `T² → R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridImmersion {
    positions: TensorField,
}

impl GridImmersion {
    pub const DEFAULT_FLOOR: f64 = 1e-8;

    pub fn new(positions: TensorField) -> Result<Self> {
        if positions.ty != TensorType::VECTOR {
            return Err(Error::TypeMismatch {
                expected: TensorType::VECTOR,
                found: positions.ty,
            });
        }
        if positions.dim < 3 {
            return Err(Error::UnsupportedAmbientDim(positions.dim));
        }
        Ok(GridImmersion { positions })
    }

    pub fn from_fn<F>(grid: ParamGrid, dim: usize, f: F) -> Result<Self>
    where
        F: FnMut(f64, f64, &mut [f64]),
    {
        GridImmersion::new(TensorField::from_fn(grid, TensorType::VECTOR, dim, f))
    }

    pub fn grid(&self) -> ParamGrid {
        self.positions.grid
    }

    pub fn dim(&self) -> usize {
        self.positions.dim
    }

    pub fn positions(&self) -> &TensorField {
        &self.positions
    }

    pub fn into_positions(self) -> TensorField {
        self.positions
    }

    pub fn translated(&self, c: &[f64]) -> GridImmersion {
        let mut p = self.positions.clone();
        let d = self.dim();
        for chunk in p.values.chunks_exact_mut(d) {
            chunk.iter_mut().zip(c).for_each(|(x, ci)| *x += ci);
        }
        GridImmersion { positions: p }
    }

    pub fn scaled(&self, factor: f64) -> GridImmersion {
        GridImmersion {
            positions: self.positions.scaled(factor),
        }
    }

    pub fn shifted(&self, offset: (isize, isize)) -> GridImmersion {
        GridImmersion {
            positions: grid_shift(&self.positions, offset),
        }
    }

    /// Node and value of the smallest singular value of the chart Jacobian.
    pub fn min_singular_value(&self) -> (usize, f64) {
        let fu = partial_derivative(&self.positions, Direction::U);
        let fv = partial_derivative(&self.positions, Direction::V);
        let d = self.dim();
        let mut worst = (0, f64::INFINITY);
        for node in 0..self.grid().len() {
            let a = &fu.values[node * d..(node + 1) * d];
            let b = &fv.values[node * d..(node + 1) * d];
            let g = [dot(a, a), dot(a, b), dot(b, a), dot(b, b)];
            let s = smallest_singular_from_gram(&g);
            if s < worst.1 {
                worst = (node, s);
            }
        }
        worst
    }

    pub fn check_immersion(&self, floor: f64) -> Result<()> {
        let (node, s) = self.min_singular_value();
        if !(s > floor) {
            return Err(Error::ImmersionViolation {
                node,
                singular_value: s,
            });
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Square root of the smallest eigenvalue of a symmetric 2×2 Gram matrix.
pub(crate) fn smallest_singular_from_gram(g: &[f64; 4]) -> f64 {
    let tr = g[0] + g[3];
    let det = g[0] * g[3] - g[1] * g[2];
    let disc = ((g[0] - g[3]).powi(2) + 4.0 * g[1] * g[2]).max(0.0).sqrt();
    // Stable smaller root: det / larger root.
    let large = 0.5 * (tr + disc);
    let small = if large > 0.0 { det / large } else { 0.0 };
    small.max(0.0).sqrt()
}
