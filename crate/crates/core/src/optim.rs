//! BFGS with Armijo backtracking, plus a finite-difference gradient check.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm_inf};
use crate::scalar::Scalar;

/// Trial values within this many ulps of the current value count as "flat".
const MAX_EXPANSIONS: usize = 30;
const FLAT_ULPS: f64 = 8.0;

/// Something that returns `(value, gradient)` at a parameter vector.
pub trait Objective<T> {
    fn eval(&self, x: &[T]) -> Result<(T, Vec<T>)>;
}

impl<T, F> Objective<T> for F
where
    F: Fn(&[T]) -> Result<(T, Vec<T>)>,
{
    fn eval(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        self(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    LineSearchFailed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfgsConfig<T> {
    pub max_iter: usize,
    pub grad_tol: T,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo_c: T,
    pub shrink: T,
    pub max_halvings: usize,
    /// Skip the inverse-Hessian update when `sᵀy ≤ curvature_eps·‖s‖‖y‖`.
    pub curvature_eps: T,
    /// Follow an accepted step with one secant step along the search line.
    pub secant_refine: bool,
}

impl<T: Scalar> Default for BfgsConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: T::lit(1e-8),
            armijo_c: T::lit(1e-4),
            shrink: T::lit(0.5),
            max_halvings: 60,
            curvature_eps: T::lit(1e-12),
            secant_refine: true,
        }
    }
}

impl<T: Scalar> BfgsConfig<T> {
    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_grad_tol(mut self, tol: T) -> Self {
        self.grad_tol = tol;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimResult<T> {
    pub x_star: Vec<T>,
    pub f_star: T,
    pub grad_norm: T,
    pub iterations: usize,
    pub status: Status,
    /// Objective value after each accepted step, starting with `f(x₀)`.
    pub trace: Vec<T>,
}

fn check_finite<T: Scalar>(x: &[T], f: T, g: &[T]) -> Result<()> {
    if f.is_finite() && g.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        let shown: Vec<f64> = x.iter().take(8).map(|v| v.to_f64_lossy()).collect();
        Err(Error::NonFinite {
            context: format!("objective at iterate {shown:?}{}", if x.len() > 8 { " …" } else { "" }),
        })
    }
}

/// Minimises `obj` from `x0` by BFGS.
///
/// The inverse Hessian starts at the identity. Each step backtracks from a
/// unit step until the Armijo condition holds; trial points with a
/// non-finite value count as failures and shrink the step as well.
/// An accepted unit step is extended by doubling while the slope stays
/// steep, and then polished with one secant step.
///
/// Near the optimum, where `f` cannot resolve the decrease, a step whose
/// directional derivative has dropped enough is accepted even if `f` rises
/// within [`flat_noise`]; the trace is non-increasing up to that band.
pub fn bfgs<T: Scalar, O: Objective<T> + ?Sized>(obj: &O, x0: &[T], cfg: &BfgsConfig<T>) -> Result<OptimResult<T>> {
    if cfg.max_iter == 0 {
        return Err(invalid("max_iter", "must be at least 1"));
    }
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut f, mut g) = obj.eval(&x)?;
    if g.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: g.len() });
    }
    check_finite(&x, f, &g)?;

    let mut h = identity(n);
    let mut trace = vec![f];
    let mut status = Status::MaxIter;
    let mut iterations = 0;
    let mut scaled = false;

    for _ in 0..cfg.max_iter {
        if norm_inf(&g) < cfg.grad_tol {
            status = Status::Converged;
            break;
        }
        let mut d = neg_mat_vec(&h, &g, n);
        let mut slope = dot(&g, &d);
        if !(slope < T::zero()) {
            // lost positive definiteness numerically: restart from steepest descent
            h = identity(n);
            d = g.iter().map(|&v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + step * di).collect();
            match obj.eval(&trial) {
                Ok((ft, gt)) if ft.is_finite() && acceptable(f, slope, step, ft, &gt, &d, cfg) => {
                    accepted = Some((trial, ft, gt));
                    break;
                }
                Ok(_) | Err(Error::Domain { .. }) | Err(Error::Barrier { .. }) => step *= cfg.shrink,
                Err(e) => return Err(e),
            }
        }
        let Some((mut x_new, mut f_new, mut g_new)) = accepted else {
            status = Status::LineSearchFailed;
            break;
        };
        if step == T::one() {
            // the unit step may sit in a concave stretch where sᵀy < 0 and H never
            // updates; walk forward while the slope stays steep and Armijo holds
            let mut t = step;
            for _ in 0..MAX_EXPANSIONS {
                if dot(&g_new, &d) > T::lit(0.9) * slope {
                    break;
                }
                t = t + t;
                let trial: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + t * di).collect();
                match obj.eval(&trial) {
                    Ok((ft, gt)) if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= f_new
                        && ft <= f + cfg.armijo_c * t * slope =>
                    {
                        (x_new, f_new, g_new) = (trial, ft, gt);
                        step = t;
                    }
                    Ok(_) | Err(Error::Domain { .. }) | Err(Error::Barrier { .. }) => break,
                    Err(e) => return Err(e),
                }
            }
        }
        if cfg.secant_refine {
            if let Some(better) = secant_refinement(obj, &x, &d, slope, step, f_new, &g_new)? {
                (x_new, f_new, g_new) = better;
            }
        }
        check_finite(&x_new, f_new, &g_new)?;
        iterations += 1;

        let s: Vec<T> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > cfg.curvature_eps * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if !scaled {
                scaled = true;
                // rescale the initial identity to the observed curvature
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
            }
            update_inverse_hessian(&mut h, &s, &y, sy, n);
        }
        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);
    }
    if status == Status::MaxIter && norm_inf(&g) < cfg.grad_tol {
        status = Status::Converged;
    }
    Ok(OptimResult {
        grad_norm: norm_inf(&g),
        x_star: x,
        f_star: f,
        iterations,
        status,
        trace,
    })
}

/// Width of the rounding band in which two computed objective values are
/// indistinguishable; accepted steps never raise `f` by more than this.
pub fn flat_noise<T: Scalar>(f: T) -> T {
    T::lit(FLAT_ULPS) * T::epsilon() * f.abs()
}

/// Armijo sufficient decrease, or — once `f` can no longer resolve the
/// decrease — the approximate Wolfe test on the directional derivative
/// (Hager & Zhang), which lets the last few iterates still move.
fn acceptable<T: Scalar>(f: T, slope: T, step: T, ft: T, gt: &[T], d: &[T], cfg: &BfgsConfig<T>) -> bool {
    if ft <= f + cfg.armijo_c * step * slope {
        return true;
    }
    let one = T::one();
    ft - f <= flat_noise(f) && dot(gt, d) <= (one - cfg.armijo_c - cfg.armijo_c) * -slope && dot(gt, d).abs() < -slope
}

/// One secant step on the directional derivative along `d`, taken only when
/// the accepted point is far from the line minimum and the secant point is
/// no worse. Exact on quadratics, which restores BFGS's finite termination.
#[allow(clippy::type_complexity)]
fn secant_refinement<T: Scalar, O: Objective<T> + ?Sized>(
    obj: &O,
    x: &[T],
    d: &[T],
    slope: T,
    step: T,
    f_acc: T,
    g_acc: &[T],
) -> Result<Option<(Vec<T>, T, Vec<T>)>> {
    let slope_acc = dot(g_acc, d);
    let curvature = slope_acc - slope;
    if !(slope_acc.abs() > T::lit(0.1) * slope.abs()) || !(curvature > T::zero()) {
        return Ok(None);
    }
    let t = step * -slope / curvature;
    if !t.is_finite() || !(t > T::zero()) {
        return Ok(None);
    }
    let trial: Vec<T> = x.iter().zip(d).map(|(&xi, &di)| xi + t * di).collect();
    match obj.eval(&trial) {
        Ok((ft, gt)) if ft.is_finite() && ft <= f_acc && gt.iter().all(|v| v.is_finite()) => Ok(Some((trial, ft, gt))),
        Ok(_) | Err(Error::Domain { .. }) | Err(Error::Barrier { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn identity<T: Scalar>(n: usize) -> Vec<T> {
    let mut h = vec![T::zero(); n * n];
    for i in 0..n {
        h[i * n + i] = T::one();
    }
    h
}

fn neg_mat_vec<T: Scalar>(h: &[T], g: &[T], n: usize) -> Vec<T> {
    (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], g)).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`, expanded to avoid forming products.
fn update_inverse_hessian<T: Scalar>(h: &mut [T], s: &[T], y: &[T], sy: T, n: usize) {
    let rho = T::one() / sy;
    let hy: Vec<T> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    let coef = (T::one() + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Largest relative disagreement between the analytic gradient and central differences.
///
/// Each coordinate's error is scaled by `max(|numeric|, 1e-6·‖numeric‖∞)`, so a
/// gradient that is off by a constant factor shows up as an error of order one.
pub fn grad_check<T: Scalar, O: Objective<T> + ?Sized>(obj: &O, x: &[T], h: T) -> Result<T> {
    if !(h > T::zero()) {
        return Err(invalid("h", "step must be positive"));
    }
    let (f0, analytic) = obj.eval(x)?;
    check_finite(x, f0, &analytic)?;
    let mut numeric = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let (fp, _) = obj.eval(&probe)?;
        probe[i] = x[i] - h;
        let (fm, _) = obj.eval(&probe)?;
        probe[i] = x[i];
        let d = (fp - fm) / (h + h);
        if !d.is_finite() {
            return Err(Error::NonFinite {
                context: format!("finite difference in coordinate {i}"),
            });
        }
        numeric.push(d);
    }
    let floor = (norm_inf(&numeric) * T::lit(1e-6)).max(T::min_positive_value());
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| (a - n).abs() / n.abs().max(floor))
        .fold(T::zero(), T::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn quad(a: Matrix<f64>, b: Vec<f64>) -> impl Fn(&[f64]) -> Result<(f64, Vec<f64>)> {
        move |x: &[f64]| {
            let ax = a.mat_vec(x);
            let v = 0.5 * dot(x, &ax) - dot(&b, x);
            let g = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
            Ok((v, g))
        }
    }

    #[test]
    fn scalar_quadratic() {
        let f = |x: &[f64]| Ok(((x[0] - 3.0).powi(2), vec![2.0 * (x[0] - 3.0)]));
        let r = bfgs(&f, &[0.0], &BfgsConfig::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!((r.x_star[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((v, g))
        };
        let r = bfgs(&f, &[-1.2, 1.0], &BfgsConfig::default().with_max_iter(500)).unwrap();
        assert!((r.x_star[0] - 1.0).abs() < 1e-5 && (r.x_star[1] - 1.0).abs() < 1e-5, "{:?}", r);
        for w in r.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn spd_quadratic_matches_solve() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]]).unwrap();
        let b = vec![1.0, -2.0, 0.5];
        let exact = a.solve(&b).unwrap();
        let r = bfgs(&quad(a, b), &[0.0; 3], &BfgsConfig::default()).unwrap();
        assert!(r.iterations <= 3 + 5, "{}", r.iterations);
        for (u, v) in r.x_star.iter().zip(&exact) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let f = |_x: &[f64]| Ok((f64::NAN, vec![0.0]));
        assert!(matches!(bfgs(&f, &[0.0], &BfgsConfig::default()), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn infinite_trials_shrink_the_step() {
        // barrier at x = 1 reported as +∞
        let f = |x: &[f64]| {
            if x[0] >= 1.0 {
                Ok((f64::INFINITY, vec![0.0]))
            } else {
                Ok((-(1.0 - x[0]).ln() - x[0] * 0.0 + (x[0] - 0.9).powi(2), vec![1.0 / (1.0 - x[0]) + 2.0 * (x[0] - 0.9)]))
            }
        };
        let r = bfgs(&f, &[0.0], &BfgsConfig::default()).unwrap();
        assert!(r.x_star[0] < 1.0 && r.f_star.is_finite());
    }

    #[test]
    fn grad_check_cases() {
        let lin = |x: &[f64]| Ok((3.0 * x[0] - 2.0 * x[1] + 1.0, vec![3.0, -2.0]));
        assert!(grad_check(&lin, &[0.3, -1.0], 1e-6).unwrap() <= 1e-10);
        let wrong = |x: &[f64]| Ok((x[0] * x[0] + x[1] * x[1], vec![4.0 * x[0], 4.0 * x[1]]));
        let e = grad_check(&wrong, &[0.7, -1.3], 1e-6).unwrap();
        assert!((e - 1.0).abs() < 1e-4, "{e}");
        assert!(grad_check(&lin, &[0.0, 0.0], 0.0).is_err());
    }
}
