//! Limited-memory BFGS with Armijo backtracking.
//!
//! Near the optimum the Armijo test is swamped by rounding in the value; a
//! trial whose value has not grown and whose directional derivative has
//! shrunk in magnitude is accepted instead. Accepted values never increase.
//!
//! Trial points that raise a feasibility error (see
//! [`Error::is_feasibility_violation`]) are treated like a failed Armijo test:
//! the step is halved.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Converged when the gradient sup-norm is at most this.
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub max_backtracks: usize,
    /// Give up after this many consecutive iterations that lower the value
    /// by no more than its rounding error.
    pub stall_iters: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iters: 1000,
            grad_tol: 1e-6,
            armijo_c1: 1e-4,
            max_backtracks: 60,
            stall_iters: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// No acceptable step along a descent direction; usually the limit of
    /// floating-point resolution.
    LineSearchFailed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub value: f64,
    pub grad_sup: f64,
    pub step: f64,
    pub backtracks: usize,
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub history: Vec<IterationRecord>,
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn minimize<F>(x0: Vec<f64>, f: F, opts: &LbfgsOptions) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    minimize_preconditioned(x0, f, |g: &[f64]| g.to_vec(), opts)
}

/// As [`minimize`], with `precond` (symmetric positive definite) as the
/// initial inverse Hessian of the two-loop recursion.
pub fn minimize_preconditioned<F, P>(x0: Vec<f64>, mut f: F, precond: P, opts: &LbfgsOptions) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    if opts.memory == 0 || !(opts.grad_tol >= 0.0) {
        return Err(Error::InvalidConfig("bad optimizer options".into()));
    }
    let mut x = x0;
    let (mut value, mut grad) = f(&x)?;
    let mut pairs: VecDeque<Pair> = VecDeque::new();
    let mut history = vec![IterationRecord {
        iteration: 0,
        value,
        grad_sup: sup_norm(&grad),
        step: 0.0,
        backtracks: 0,
    }];
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < opts.max_iters {
        if sup_norm(&grad) <= opts.grad_tol {
            termination = Termination::Converged;
            break;
        }
        let mut dir = two_loop(&grad, &pairs, &precond);
        let mut slope = dot(&grad, &dir);
        if !(slope < 0.0) {
            pairs.clear();
            dir = precond(&grad).iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
        }
        let mut alpha = if pairs.is_empty() {
            (1.0 / sup_norm(&dir)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        let mut backtracks = 0;
        while backtracks <= opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
            match f(&trial) {
                Ok((v, g)) if v <= value + opts.armijo_c1 * alpha * slope => {
                    accepted = Some((trial, v, g));
                    break;
                }
                Ok((v, g)) if v <= value && dot(&g, &dir).abs() <= 0.9 * slope.abs() => {
                    accepted = Some((trial, v, g));
                    break;
                }
                Ok(_) => {}
                Err(e) if e.is_feasibility_violation() => {}
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
            backtracks += 1;
        }
        let Some((x_new, v_new, g_new)) = accepted else {
            if pairs.is_empty() {
                termination = Termination::LineSearchFailed;
                break;
            }
            // retry once from steepest descent
            pairs.clear();
            continue;
        };
        if x_new == x {
            if pairs.is_empty() {
                termination = Termination::LineSearchFailed;
                break;
            }
            pairs.clear();
            continue;
        }
        iterations += 1;
        if value - v_new <= 4.0 * f64::EPSILON * value.abs() {
            stalled += 1;
        } else {
            stalled = 0;
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            let gamma = sy / dot(&y, &precond(&y));
            pairs.push_back((s, y, 1.0 / sy, gamma));
        } else {
            pairs.clear();
        }
        x = x_new;
        value = v_new;
        grad = g_new;
        history.push(IterationRecord {
            iteration: iterations,
            value,
            grad_sup: sup_norm(&grad),
            step: alpha,
            backtracks,
        });
        if stalled >= opts.stall_iters {
            termination = Termination::LineSearchFailed;
            break;
        }
    }
    if termination == Termination::MaxIterations && sup_norm(&grad) <= opts.grad_tol {
        termination = Termination::Converged;
    }
    Ok(LbfgsResult {
        x,
        value,
        grad,
        iterations,
        termination,
        history,
    })
}

/// `(s, y, 1/sᵀy, sᵀy / yᵀPy)`.
type Pair = (Vec<f64>, Vec<f64>, f64, f64);

fn two_loop<P: Fn(&[f64]) -> Vec<f64>>(grad: &[f64], pairs: &VecDeque<Pair>, precond: &P) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, r, _) in pairs.iter().rev() {
        let a = r * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    let gamma = pairs.back().map_or(1.0, |p| p.3);
    let mut q: Vec<f64> = precond(&q).into_iter().map(|v| v * gamma).collect();
    for ((s, y, r, _), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = r * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}
