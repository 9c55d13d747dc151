//! Limited-memory quasi-Newton minimization with optional box constraints.
//!
//! Bounded problems use a projected variant: variables pinned at a bound by the gradient are
//! frozen for the step, the two-loop recursion runs on the free set, and the trial point is
//! projected back into the box during backtracking.

use std::collections::VecDeque;

/// Box constraints; use infinities for one-sided bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub memory: usize,
    /// Stop when the (projected) gradient's max-norm falls below this.
    pub grad_tol: f64,
    /// Stop when the relative objective decrease falls below this.
    pub f_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            memory: 10,
            grad_tol: 1e-6,
            f_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    FunctionTolerance,
    MaxIterations,
    LineSearchFailed,
    NonFinite,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Termination::GradientTolerance | Termination::FunctionTolerance)
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl Minimum {
    pub fn grad_norm(&self) -> f64 {
        self.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Max-norm of the projected gradient `x - P(x - g)`.
fn projected_grad_norm(x: &[f64], g: &[f64], bounds: Option<&Bounds>) -> f64 {
    match bounds {
        None => g.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        Some(b) => x
            .iter()
            .zip(g)
            .enumerate()
            .map(|(i, (xi, gi))| (xi - (xi - gi).clamp(b.lower[i], b.upper[i])).abs())
            .fold(0.0, f64::max),
    }
}

/// Variables held at a bound with the gradient pushing outward.
fn active_set(x: &[f64], g: &[f64], bounds: Option<&Bounds>) -> Vec<bool> {
    match bounds {
        None => vec![false; x.len()],
        Some(b) => x
            .iter()
            .zip(g)
            .enumerate()
            .map(|(i, (xi, gi))| (*xi <= b.lower[i] && *gi > 0.0) || (*xi >= b.upper[i] && *gi < 0.0))
            .collect(),
    }
}

/// Minimizes `f` where `f` returns the value and gradient at a point.
pub fn minimize<F>(mut f: F, x0: &[f64], bounds: Option<&Bounds>, opts: &LbfgsOptions) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    if let Some(b) = bounds {
        b.project(&mut x);
    }
    let (mut fx, mut g) = f(&x);
    let mut evaluations = 1;
    let finish = |x: Vec<f64>, fx, g, iterations, evaluations, termination| Minimum {
        x,
        f: fx,
        grad: g,
        iterations,
        evaluations,
        termination,
    };
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return finish(x, fx, g, 0, evaluations, Termination::NonFinite);
    }
    if n == 0 || projected_grad_norm(&x, &g, bounds) <= opts.grad_tol {
        return finish(x, fx, g, 0, evaluations, Termination::GradientTolerance);
    }

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    for iter in 1..=opts.max_iter {
        let active = active_set(&x, &g, bounds);
        let mut q: Vec<f64> = g
            .iter()
            .zip(&active)
            .map(|(gi, a)| if *a { 0.0 } else { *gi })
            .collect();

        // Two-loop recursion.
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        let gamma = match history.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / projected_grad_norm(&x, &g, bounds).max(1.0),
        };
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..n {
                q[i] += s[i] * (a - b);
            }
        }
        let mut d: Vec<f64> = q.iter().zip(&active).map(|(v, a)| if *a { 0.0 } else { -v }).collect();
        if dot(&d, &g) >= 0.0 {
            // Not a descent direction: reset to steepest descent.
            history.clear();
            let scale = 1.0 / projected_grad_norm(&x, &g, bounds).max(1.0);
            d = g
                .iter()
                .zip(&active)
                .map(|(gi, a)| if *a { 0.0 } else { -gi * scale })
                .collect();
        }

        // Backtracking Armijo search along the projected path.
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            if let Some(b) = bounds {
                b.project(&mut xt);
            }
            let step: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &step);
            if step.iter().all(|s| *s == 0.0) {
                break;
            }
            let (ft, gt) = f(&xt);
            evaluations += 1;
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + 1e-4 * decrease {
                accepted = Some((xt, ft, gt, step));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gn, s)) = accepted else {
            return finish(x, fx, g, iter, evaluations, Termination::LineSearchFailed);
        };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let rel = (fx - fnew).abs() / fx.abs().max(fnew.abs()).max(1.0);
        x = xn;
        fx = fnew;
        g = gn;
        if projected_grad_norm(&x, &g, bounds) <= opts.grad_tol {
            return finish(x, fx, g, iter, evaluations, Termination::GradientTolerance);
        }
        if rel <= opts.f_tol {
            return finish(x, fx, g, iter, evaluations, Termination::FunctionTolerance);
        }
    }
    finish(x, fx, g, opts.max_iter, evaluations, Termination::MaxIterations)
}

/// Central-difference gradient with absolute step `h * max(1, |x_i|)`.
pub fn central_gradient(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            xp[i] = x[i] + step;
            let fp = f(&xp);
            xp[i] = x[i] - step;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// Forward-difference gradient with relative step; steps flip direction at an upper bound.
pub fn forward_gradient(
    f: &mut impl FnMut(&[f64]) -> f64,
    x: &[f64],
    fx: f64,
    rel_step: f64,
    bounds: Option<&Bounds>,
) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let mut step = rel_step * x[i].abs().max(1e-3);
            if let Some(b) = bounds {
                if x[i] + step > b.upper[i] {
                    step = -step;
                }
            }
            xp[i] = x[i] + step;
            let fp = f(&xp);
            xp[i] = x[i];
            (fp - fx) / step
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        (f, g)
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let m = minimize(rosenbrock, &[-1.2, 1.0], None, &LbfgsOptions::default());
        assert!(m.termination.converged(), "{:?}", m.termination);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn bounded_quadratic_hits_bound() {
        // min (x-3)^2 + (y+1)^2 on [0,2]x[0,2] -> (2, 0).
        let f = |x: &[f64]| {
            (
                (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2),
                vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)],
            )
        };
        let b = Bounds::new(vec![0.0, 0.0], vec![2.0, 2.0]);
        let m = minimize(f, &[1.0, 1.0], Some(&b), &LbfgsOptions::default());
        assert!(m.termination.converged());
        assert_eq!(m.x, vec![2.0, 0.0]);
    }

    #[test]
    fn bounded_interior_optimum() {
        let b = Bounds::new(vec![-2.0, -2.0], vec![2.0, 2.0]);
        let m = minimize(rosenbrock, &[-1.2, 1.0], Some(&b), &LbfgsOptions::default());
        assert!((m.x[0] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn finite_differences() {
        let mut f = |x: &[f64]| x[0].powi(3) + x[0] * x[1];
        let g = central_gradient(&mut f, &[2.0, 5.0], 1e-5);
        assert!((g[0] - 17.0).abs() < 1e-6 && (g[1] - 2.0).abs() < 1e-6);
        let fx = f(&[2.0, 5.0]);
        let g = forward_gradient(&mut f, &[2.0, 5.0], fx, 1e-7, None);
        assert!((g[0] - 17.0).abs() < 1e-4 && (g[1] - 2.0).abs() < 1e-4);
    }
}
