//! Truncated `ℓ²` sequence space `{x : inf |x_i| > 0}` with the metric
//! `G_x(h, h) = Σ (1 + 1/x_i²) h_i²`.
//!
//! The metric is separable, so paths, energies and geodesics decouple into
//! one-dimensional problems per coordinate.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SeqPoint {
    x: Vec<f64>,
}

fn check_entry(index: usize, value: f64) -> Result<()> {
    if value == 0.0 || !value.is_finite() {
        return Err(Error::DomainViolation { index, value });
    }
    Ok(())
}

impl SeqPoint {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidConfig("empty sequence".into()));
        }
        for (i, &v) in x.iter().enumerate() {
            check_entry(i, v)?;
        }
        Ok(SeqPoint { x })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn min_abs(&self) -> f64 {
        self.x.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

fn weight(x: f64) -> f64 {
    1.0 + 1.0 / (x * x)
}

pub fn seq_metric(x: &SeqPoint, h: &[f64]) -> Result<f64> {
    if h.len() != x.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {}", h.len(), x.len())));
    }
    Ok(x.x.iter().zip(h).map(|(&xi, &hi)| weight(xi) * hi * hi).sum())
}

/// The flat metric `Σ h_i²`, dominated by `seq_metric`.
pub fn seq_flat_metric(h: &[f64]) -> f64 {
    h.iter().map(|v| v * v).sum()
}

/// `(log |x_i|)_i`.
pub fn seq_f(x: &SeqPoint) -> Vec<f64> {
    x.x.iter().map(|v| v.abs().ln()).collect()
}

fn check_path(path: &[SeqPoint]) -> Result<usize> {
    if path.len() < 2 {
        return Err(Error::InvalidConfig("a path needs at least two points".into()));
    }
    let n = path[0].len();
    if path.iter().any(|p| p.len() != n) {
        return Err(Error::ShapeMismatch("path points differ in length".into()));
    }
    Ok(n)
}

/// Midpoint-rule energy of coordinate `values` over `[0, 1]`.
fn coord_energy(z: &[f64]) -> Result<f64> {
    let steps = (z.len() - 1) as f64;
    let mut e = 0.0;
    for (t, w) in z.windows(2).enumerate() {
        let m = 0.5 * (w[0] + w[1]);
        check_entry(t, m)?;
        let d = w[1] - w[0];
        e += weight(m) * d * d;
    }
    Ok(steps * e)
}

fn coord_length(z: &[f64]) -> Result<f64> {
    let mut l = 0.0;
    for (t, w) in z.windows(2).enumerate() {
        let m = 0.5 * (w[0] + w[1]);
        check_entry(t, m)?;
        l += weight(m).sqrt() * (w[1] - w[0]).abs();
    }
    Ok(l)
}

fn coordinate(path: &[SeqPoint], i: usize) -> Vec<f64> {
    path.iter().map(|p| p.x[i]).collect()
}

/// Energy of each coordinate; the path energy is their sum.
pub fn seq_coordinate_energies(path: &[SeqPoint]) -> Result<Vec<f64>> {
    let n = check_path(path)?;
    (0..n).map(|i| coord_energy(&coordinate(path, i))).collect()
}

/// `E = T Σ_t G_{m_t}(Δ_t, Δ_t)` with `m_t` the step midpoint, `T` steps on
/// `[0, 1]`.
pub fn seq_path_energy(path: &[SeqPoint]) -> Result<f64> {
    check_path(path)?;
    let steps = (path.len() - 1) as f64;
    let mut e = 0.0;
    for w in path.windows(2) {
        let mid: Vec<f64> = w[0].x.iter().zip(&w[1].x).map(|(a, b)| 0.5 * (a + b)).collect();
        let mid = SeqPoint::new(mid)?;
        let d: Vec<f64> = w[1].x.iter().zip(&w[0].x).map(|(a, b)| a - b).collect();
        e += seq_metric(&mid, &d)?;
    }
    Ok(steps * e)
}

/// `Σ_t √G_{m_t}(Δ_t, Δ_t)`.
pub fn seq_path_length(path: &[SeqPoint]) -> Result<f64> {
    check_path(path)?;
    let mut l = 0.0;
    for w in path.windows(2) {
        let mid: Vec<f64> = w[0].x.iter().zip(&w[1].x).map(|(a, b)| 0.5 * (a + b)).collect();
        let mid = SeqPoint::new(mid)?;
        let d: Vec<f64> = w[1].x.iter().zip(&w[0].x).map(|(a, b)| a - b).collect();
        l += seq_metric(&mid, &d)?.sqrt();
    }
    Ok(l)
}

/// Lengths of the single-coordinate paths, for per-coordinate reports.
pub fn seq_coordinate_lengths(path: &[SeqPoint]) -> Result<Vec<f64>> {
    let n = check_path(path)?;
    (0..n).map(|i| coord_length(&coordinate(path, i))).collect()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Geodesic distance between `a` and `b` in one coordinate: the arc length
/// `|∫_a^b √(1 + 1/z²) dz|`.
pub fn seq_geodesic_1d(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::DomainViolation { index: 0, value: a });
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::DomainViolation { index: 1, value: b });
    }
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi) = (a.min(b), a.max(b));
    Ok(integrate_adaptive(|z| weight(z).sqrt(), lo, hi, 1e-14 * (hi - lo).max(1.0)))
}

/// Distance between two points: the `ℓ²` combination of coordinate distances.
pub fn seq_distance(x0: &SeqPoint, x1: &SeqPoint) -> Result<f64> {
    if x0.len() != x1.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {}", x0.len(), x1.len())));
    }
    let mut s = 0.0;
    for (i, (&a, &b)) in x0.x.iter().zip(&x1.x).enumerate() {
        if a.signum() != b.signum() {
            return Err(Error::DomainViolation { index: i, value: 0.0 });
        }
        let d = seq_geodesic_1d(a.abs(), b.abs())?;
        s += d * d;
    }
    Ok(s.sqrt())
}

#[derive(Clone, Debug)]
pub struct SeqGeodesic {
    pub path: Vec<SeqPoint>,
    pub energy: f64,
    pub coordinate_energies: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeqSolverOptions {
    pub max_iters: usize,
    /// Converged when half the squared Newton decrement is at most this
    /// times `max(1, E)`.
    pub decrement_tol: f64,
    pub armijo_c1: f64,
    pub max_backtracks: usize,
}

impl Default for SeqSolverOptions {
    fn default() -> Self {
        SeqSolverOptions {
            max_iters: 200,
            decrement_tol: 1e-20,
            armijo_c1: 1e-4,
            max_backtracks: 60,
        }
    }
}

/// Energy, interior gradient and tridiagonal Hessian `(diag, off)` of one
/// coordinate path with fixed ends.
fn coord_newton_parts(a: f64, b: f64, interior: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let steps = interior.len() + 1;
    let t = steps as f64;
    let at = |k: usize| {
        if k == 0 {
            a
        } else if k == steps {
            b
        } else {
            interior[k - 1]
        }
    };
    let len = interior.len();
    let (mut e, mut g) = (0.0, vec![0.0; len]);
    let (mut diag, mut off) = (vec![0.0; len], vec![0.0; len.saturating_sub(1)]);
    for k in 0..steps {
        let (z0, z1) = (at(k), at(k + 1));
        let m = 0.5 * (z0 + z1);
        if !(m > 0.0) {
            return Err(Error::DomainViolation { index: k, value: m });
        }
        let d = z1 - z0;
        let w = weight(m);
        let w1 = -2.0 / (m * m * m);
        let w2 = 6.0 / (m * m * m * m);
        e += t * w * d * d;
        let curv = 0.25 * w2 * d * d;
        if k > 0 {
            g[k - 1] += t * (-2.0 * w * d + 0.5 * w1 * d * d);
            diag[k - 1] += t * (2.0 * w - 2.0 * w1 * d + curv);
        }
        if k + 1 < steps {
            g[k] += t * (2.0 * w * d + 0.5 * w1 * d * d);
            diag[k] += t * (2.0 * w + 2.0 * w1 * d + curv);
        }
        if k > 0 && k + 1 < steps {
            off[k - 1] += t * (-2.0 * w + curv);
        }
    }
    Ok((e, g, diag, off))
}

/// Solves the symmetric tridiagonal system; `None` unless positive definite.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = rhs.to_vec();
    let mut prev = 0.0;
    for i in 0..n {
        let lower = if i > 0 { off[i - 1] } else { 0.0 };
        let pivot = diag[i] - lower * prev;
        if !(pivot > 0.0) {
            return None;
        }
        c[i] = if i + 1 < n { off[i] / pivot } else { 0.0 };
        x[i] = (x[i] - if i > 0 { lower * x[i - 1] } else { 0.0 }) / pivot;
        prev = c[i];
    }
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

/// Nodes at (nearly) equal distance along the continuous geodesic from `a`
/// to `b`, read off a log-spaced table of the distance function.
fn arc_length_start(a: f64, b: f64, steps: usize) -> Vec<f64> {
    const TABLE: usize = 2048;
    if a == b {
        return vec![a; steps - 1];
    }
    let (lo, hi) = (a.min(b), a.max(b));
    let ratio = (hi / lo).ln();
    let nodes: Vec<f64> = (0..=TABLE).map(|i| lo * (ratio * i as f64 / TABLE as f64).exp()).collect();
    let mut cum = vec![0.0; TABLE + 1];
    for i in 0..TABLE {
        let (z0, z1) = (nodes[i], nodes[i + 1]);
        cum[i + 1] = cum[i] + integrate_adaptive(|t| weight(t).sqrt(), z0, z1, 1e-12 * (z1 - z0));
    }
    (1..steps)
        .map(|k| {
            let frac = k as f64 / steps as f64;
            let target = cum[TABLE] * if a <= b { frac } else { 1.0 - frac };
            let i = cum.partition_point(|&c| c < target).clamp(1, TABLE);
            let t = (target - cum[i - 1]) / (cum[i] - cum[i - 1]);
            nodes[i - 1] + t * (nodes[i] - nodes[i - 1])
        })
        .collect()
}

struct CoordSolve {
    z: Vec<f64>,
    energy: f64,
    iterations: usize,
    converged: bool,
}

/// Damped Newton on the interior values of one coordinate. Trial points whose
/// midpoints leave the positive axis halve the step.
fn solve_coordinate(a: f64, b: f64, steps: usize, opts: &SeqSolverOptions) -> Result<CoordSolve> {
    let sign = a.signum();
    let (pa, pb) = (a.abs(), b.abs());
    let mut x = arc_length_start(pa, pb, steps);
    let (mut e, mut g, mut diag, mut off) = coord_newton_parts(pa, pb, &x)?;
    let mut iterations = 0;
    let mut converged = pa == pb;
    while !converged && iterations < opts.max_iters {
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let dir = solve_tridiagonal(&diag, &off, &rhs).unwrap_or_else(|| {
            // far from the minimizer: fall back to the flat time Laplacian
            let t = steps as f64;
            let d = vec![4.0 * t; x.len()];
            let o = vec![-2.0 * t; x.len().saturating_sub(1)];
            solve_tridiagonal(&d, &o, &rhs).expect("positive definite")
        });
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if -0.5 * slope <= opts.decrement_tol * e.max(1.0) {
            converged = true;
            break;
        }
        let pure = -0.5 * slope <= 1e-10 * e.max(1.0);
        let mut alpha = 1.0;
        let mut next = None;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
            match coord_newton_parts(pa, pb, &trial) {
                // close to the minimizer the decrease is below the rounding of
                // the energy, and full steps are taken unchecked
                Ok(p) if pure || p.0 <= e + opts.armijo_c1 * alpha * slope => {
                    next = Some((trial, p));
                    break;
                }
                Ok(_) | Err(Error::DomainViolation { .. }) => alpha *= 0.5,
                Err(err) => return Err(err),
            }
        }
        let Some((trial, parts)) = next else { break };
        x = trial;
        (e, g, diag, off) = parts;
        iterations += 1;
    }
    let mut z = Vec::with_capacity(steps + 1);
    z.push(a);
    z.extend(x.iter().map(|v| sign * v));
    z.push(b);
    Ok(CoordSolve {
        z,
        energy: e,
        iterations,
        converged,
    })
}

/// Minimizes the discrete energy between `x0` and `x1` over paths with
/// `steps` steps, one coordinate at a time. Coordinates whose endpoints
/// differ in sign have no finite-energy connection.
pub fn seq_geodesic_bvp(x0: &SeqPoint, x1: &SeqPoint, steps: usize, opts: &SeqSolverOptions) -> Result<SeqGeodesic> {
    if x0.len() != x1.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {}", x0.len(), x1.len())));
    }
    if steps < 1 {
        return Err(Error::InvalidConfig("need at least one step".into()));
    }
    for (i, (&a, &b)) in x0.x.iter().zip(&x1.x).enumerate() {
        if a.signum() != b.signum() {
            return Err(Error::DomainViolation { index: i, value: 0.0 });
        }
    }
    let solved: Vec<CoordSolve> = x0
        .x
        .par_iter()
        .zip(&x1.x)
        .map(|(&a, &b)| solve_coordinate(a, b, steps, opts))
        .collect::<Result<_>>()?;
    let path = (0..=steps)
        .map(|t| SeqPoint::new(solved.iter().map(|c| c.z[t]).collect()))
        .collect::<Result<Vec<_>>>()?;
    let coordinate_energies: Vec<f64> = solved.iter().map(|c| c.energy).collect();
    Ok(SeqGeodesic {
        energy: coordinate_energies.iter().sum(),
        iterations: solved.iter().map(|c| c.iterations).collect(),
        converged: solved.iter().all(|c| c.converged),
        coordinate_energies,
        path,
    })
}
