use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub memory: usize,
    /// Stop when `‖∇f‖ ≤ grad_tol · max(1, |f|)`.
    pub grad_tol: f64,
    /// Stop when an accepted step lowers `f` by less than `f_tol · max(1, |f|)`.
    pub f_tol: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iter: 400,
            memory: 10,
            grad_tol: 1e-9,
            f_tol: 1e-13,
            armijo: 1e-4,
            max_backtracks: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsReport<T> {
    pub x: Vec<T>,
    pub value: T,
    pub gradient_norm: T,
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective after every accepted step, starting with the initial value.
    pub history: Vec<T>,
    pub converged: bool,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Evaluates `f`, mapping a blow-up to an infinite value so the line search
/// backs away from it.
fn eval<T: Real, F>(f: &mut F, x: &[T], n: usize) -> Result<(T, Vec<T>)>
where
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    match f(x) {
        Ok(r) => Ok(r),
        Err(Error::BlowUp { .. }) => Ok((T::infinity(), vec![T::zero(); n])),
        Err(e) => Err(e),
    }
}

/// In-place projection onto a feasible set; returns whether it was active.
pub type Projector<'a, T> = &'a dyn Fn(&mut [T]) -> bool;

/// Limited-memory BFGS with backtracking Armijo search. With `project`, each
/// trial point is projected onto the feasible set and the memory is dropped
/// whenever a projection becomes active.
pub fn lbfgs<T: Real, F>(
    x0: Vec<T>,
    mut f: F,
    project: Option<Projector<T>>,
    opts: &LbfgsOptions,
) -> Result<LbfgsReport<T>>
where
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let n = x0.len();
    let mut x = x0;
    if let Some(p) = project {
        p(&mut x);
    }
    let (mut fx, mut g) = f(&x)?;
    let mut evaluations = 1;
    let mut history = vec![fx];
    let mut mem: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::new();
    let gtol = T::of(opts.grad_tol);
    let ftol = T::of(opts.f_tol);
    let c1 = T::of(opts.armijo);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= gtol * fx.abs().max(T::one()) {
            converged = true;
            break;
        }
        let mut d = two_loop(&g, &mem);
        if dot(&g, &d) >= T::zero() {
            mem.clear();
            d = g.iter().map(|&v| -v).collect();
        }
        let mut accepted = None;
        for attempt in 0..2 {
            let mut alpha = if mem.is_empty() {
                T::one().min(T::one() / gnorm)
            } else {
                T::one()
            };
            for _ in 0..opts.max_backtracks {
                let mut xn: Vec<T> = x.iter().zip(&d).map(|(&a, &b)| a + alpha * b).collect();
                let active = project.is_some_and(|p| p(&mut xn));
                let (fnew, gnew) = eval(&mut f, &xn, n)?;
                evaluations += 1;
                let step: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
                let decrease = dot(&g, &step);
                if fnew.is_finite() && fnew <= fx + c1 * decrease {
                    accepted = Some((xn, fnew, gnew, step, active));
                    break;
                }
                alpha *= T::of(0.5);
            }
            if accepted.is_some() || attempt == 1 || mem.is_empty() {
                break;
            }
            mem.clear();
            d = g.iter().map(|&v| -v).collect();
        }
        let Some((xn, fnew, gnew, s, active)) = accepted else {
            break;
        };
        iterations += 1;
        let y: Vec<T> = gnew.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if active {
            mem.clear();
        } else if sy > T::of(1e-12) * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, T::one() / sy));
        }
        let drop = fx - fnew;
        x = xn;
        fx = fnew;
        g = gnew;
        history.push(fx);
        if drop <= ftol * fx.abs().max(T::one()) {
            converged = true;
            break;
        }
    }

    let gradient_norm = dot(&g, &g).sqrt();
    Ok(LbfgsReport {
        x,
        value: fx,
        gradient_norm,
        iterations,
        evaluations,
        history,
        converged,
    })
}

fn two_loop<T: Real>(g: &[T], mem: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q: Vec<T> = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
