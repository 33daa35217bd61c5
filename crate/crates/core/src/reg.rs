//! Regularized learning: `min Q_y(L(x)) + lambda phi(||x||)`.
//!
//! Routes by space and loss:
//!
//! | space   | loss          | regularizer | method                               |
//! |---------|---------------|-------------|--------------------------------------|
//! | Hilbert | square        | `t^2`       | linear system `(G + lambda I) c = y` |
//! | Hilbert | any           | `t^2`       | accelerated prox-gradient on `-2 lambda c` |
//! | lp      | square        | `t^r, r>=1` | damped Newton on the coefficient system |
//! | l1      | square        | `t`         | accelerated prox-gradient on `x`     |
//! | l1      | hinge / eps   | `t`         | primal-dual proximal iteration       |
//!
//! The l1 routes are certified by the residuals of
//! `c = prox_{Q*}(c + L x)` and `x = prox_{||.||_1}(x - (1/lambda) S(L*(c)))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::duality::{dmap_lq, truncate_s, FACE_REL_TOL};
use crate::error::{mismatch, Error, Result};
use crate::linalg::{op_norm_sq, solve_spd};
use crate::mni::{
    damped_newton, dmap_composite_jacobian, solve_mni, IterationConfig, SolveReport, CHECK_EVERY, GRAM_EIGEN_FLOOR,
};
use crate::prox::{prox_loss_conjugate, shrink, soft_threshold, LossKind, LossSpec};
use crate::sampling::{Coefs, SamplingOperator};
use crate::seq::{conjugate_exponent, lp_norm_of, SpaceTag, SparseSeq};

/// The increasing function `phi` applied to the norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    /// `phi(t) = t`
    Identity,
    /// `phi(t) = t^2`
    Square,
    /// `phi(t) = t^r`, `r > 0`
    Power { r: f64 },
}

impl Regularizer {
    pub fn validate(&self) -> Result<()> {
        let r = self.exponent();
        if r > 0.0 && r.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("power must be positive, got {r}")))
        }
    }

    pub fn exponent(&self) -> f64 {
        match *self {
            Regularizer::Identity => 1.0,
            Regularizer::Square => 2.0,
            Regularizer::Power { r } => r,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Regularizer::Identity => t,
            Regularizer::Square => t * t,
            Regularizer::Power { r } => t.powf(r),
        }
    }

    /// `phi'(s) / s`
    fn weight(&self, s: f64) -> f64 {
        let r = self.exponent();
        r * s.powf(r - 2.0)
    }

    fn weight_derivative(&self, s: f64) -> f64 {
        let r = self.exponent();
        r * (r - 2.0) * s.powf(r - 3.0)
    }

    /// `phi^*(t)` for `t >= 0`, with `phi` extended evenly; needs `r >= 1`.
    fn conjugate(&self, t: f64) -> f64 {
        let r = self.exponent();
        if r == 1.0 {
            if t <= 1.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (r - 1.0) * (t / r).powf(r / (r - 1.0))
        }
    }
}

/// A regularization problem `min Q_y(L(x)) + lambda phi(||x||_space)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegProblem {
    pub op: SamplingOperator,
    pub space: SpaceTag,
    pub loss: LossSpec,
    pub regularizer: Regularizer,
    pub lambda: f64,
}

impl RegProblem {
    pub fn new(
        op: SamplingOperator,
        space: SpaceTag,
        loss: LossSpec,
        regularizer: Regularizer,
        lambda: f64,
    ) -> Result<Self> {
        space.validate()?;
        regularizer.validate()?;
        op.check_data(&loss.y)?;
        let loss = LossSpec::new(loss.kind, loss.y)?;
        check_lambda(lambda)?;
        Ok(RegProblem {
            op,
            space,
            loss,
            regularizer,
            lambda,
        })
    }

    pub fn y(&self) -> &[f64] {
        &self.loss.y
    }

    pub fn norm(&self, x: &SparseSeq) -> Result<f64> {
        x.norm(self.space.norm())
    }

    /// `Q_y(L(x)) + lambda phi(||x||)`
    pub fn objective(&self, x: &SparseSeq) -> Result<f64> {
        let fit = self.loss.value(&self.op.apply(x));
        Ok(fit + self.lambda * self.regularizer.value(self.norm(x)?))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )))
    }
}

fn report(
    problem: &RegProblem,
    solution: SparseSeq,
    coefs: Coefs,
    infimum_dual: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
) -> Result<SolveReport> {
    let objective = problem.objective(&solution)?;
    let lx = problem.op.apply(&solution);
    let interp_residual = lx
        .iter()
        .zip(problem.y())
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(SolveReport {
        support: solution.support(),
        solution,
        coefs,
        objective,
        infimum_dual,
        interp_residual,
        fixed_point_residual: Some(residual),
        iterations,
        converged,
        warnings: problem.op.independence_warning().into_iter().collect(),
    })
}

/// Hilbert space, square loss and `phi(t) = t^2`: the coefficients solve
/// `(G + lambda I) c = y` and `x = L*(c)`.
pub fn solve_reg_hilbert_square(op: &SamplingOperator, y: &[f64], lambda: f64) -> Result<SolveReport> {
    check_lambda(lambda)?;
    let problem = RegProblem::new(
        op.clone(),
        SpaceTag::Hilbert,
        LossSpec::new(LossKind::Square, y.to_vec())?,
        Regularizer::Square,
        lambda,
    )?;
    let g = op.gram();
    let shifted = &g + DMatrix::identity(op.m(), op.m()) * lambda;
    let yv = DVector::from_column_slice(y);
    let c = solve_spd(&shifted, &yv)?;
    let residual = (&shifted * &c - &yv).amax();
    let w: Vec<f64> = c.iter().map(|v| -2.0 * lambda * v).collect();
    let dual = hilbert_dual_value(&problem.loss, &g, lambda, &w);
    let coefs: Coefs = c.iter().copied().collect();
    let solution = op.adjoint(&coefs)?;
    report(&problem, solution, coefs, dual, residual, 1, true)
}

/// `-Q*(w) - w^T G w / (4 lambda)` after moving `w` into the domain of `Q*`.
fn hilbert_dual_value(loss: &LossSpec, g: &DMatrix<f64>, lambda: f64, w: &[f64]) -> f64 {
    let w = loss.project_conjugate_domain(w);
    let wv = DVector::from_column_slice(&w);
    -loss.conjugate_value(&w) - wv.dot(&(g * &wv)) / (4.0 * lambda)
}

type ProxFn<'a> = &'a dyn Fn(&DVector<f64>, f64) -> Result<DVector<f64>>;

/// Accelerated proximal gradient with gradient-based adaptive restart.
///
/// Every `CHECK_EVERY` steps (and at the last one) `monitor` sees the
/// current iterate and may stop the loop by returning `true`. Returns the
/// number of steps taken.
pub(crate) fn accelerated_prox_gradient(
    x0: DVector<f64>,
    step: f64,
    grad: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    prox: ProxFn,
    max_iter: usize,
    monitor: &mut dyn FnMut(&DVector<f64>) -> Result<bool>,
) -> Result<usize> {
    let mut x = x0.clone();
    let mut z = x0;
    let mut t = 1.0_f64;
    for it in 1..=max_iter {
        let x_new = prox(&(&z - step * grad(&z)), step)?;
        if (&z - &x_new).dot(&(&x_new - &x)) > 0.0 {
            t = 1.0;
            z = x_new.clone();
        } else {
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = &x_new + ((t - 1.0) / t_new) * (&x_new - &x);
            t = t_new;
        }
        x = x_new;
        if (it % CHECK_EVERY == 0 || it == max_iter) && monitor(&x)? {
            return Ok(it);
        }
    }
    Ok(max_iter)
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Hilbert space with `phi(t) = t^2` and any loss, through the fixed point
/// `c = (-1/(2 lambda)) prox_{Q*}(-2 lambda c + G c)`.
///
/// The iteration runs on `w = -2 lambda c`, where the map above is a
/// proximal-gradient step for `Q*(w) + w^T G w / (4 lambda)`.
pub fn solve_reg_hilbert_prox(problem: &RegProblem, cfg: &IterationConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if problem.space != SpaceTag::Hilbert || problem.regularizer != Regularizer::Square {
        return Err(Error::InvalidParameter(
            "the Hilbert fixed-point route needs the Hilbert space and phi(t) = t^2".into(),
        ));
    }
    let lambda = problem.lambda;
    let loss = &problem.loss;
    let g = problem.op.gram();
    let g_norm = op_norm_sq(&g).sqrt();
    if g_norm <= GRAM_EIGEN_FLOOR {
        return Err(Error::Degenerate("Gram matrix vanishes".into()));
    }
    let gamma = 2.0 * lambda / g_norm;

    let residual = |c: &DVector<f64>| -> Result<f64> {
        let arg = -2.0 * lambda * c + &g * c;
        let p = prox_loss_conjugate(arg.as_slice(), loss, 1.0)?;
        Ok(c.iter()
            .zip(&p)
            .fold(0.0_f64, |m, (ci, pi)| m.max((ci + pi / (2.0 * lambda)).abs())))
    };
    let grad = |w: &DVector<f64>| (&g * w) / (2.0 * lambda);
    let prox = |v: &DVector<f64>, s: f64| -> Result<DVector<f64>> {
        Ok(DVector::from_vec(prox_loss_conjugate(v.as_slice(), loss, s)?))
    };

    let m = problem.op.m();
    let mut best = (DVector::zeros(m), residual(&DVector::zeros(m))?);
    let done = best.1 <= cfg.tol;
    let mut monitor = |w: &DVector<f64>| -> Result<bool> {
        let c = -w / (2.0 * lambda);
        let r = residual(&c)?;
        if r < best.1 {
            best = (c, r);
        }
        Ok(best.1 <= cfg.tol)
    };
    let iterations = if done {
        0
    } else {
        accelerated_prox_gradient(DVector::zeros(m), gamma, &grad, &prox, cfg.max_iter, &mut monitor)?
    };
    let (c, r) = best;
    let w: Vec<f64> = c.iter().map(|v| -2.0 * lambda * v).collect();
    let dual = hilbert_dual_value(loss, &g, lambda, &w);
    let coefs = to_vec(&c);
    let solution = problem.op.adjoint(&coefs)?;
    report(problem, solution, coefs, dual, r, iterations, r <= cfg.tol)
}

/// lp (or Hilbert as `p = 2`) with square loss and `phi(t) = t^r`, `r >= 1`,
/// by damped Newton on
///
/// ```text
/// 2 (G#(c) - y) + lambda phi'(s) / s * c = 0,   s = ||L*(c)||_q,
/// ```
///
/// where `G#(c) = L((L*(c))#)`, with the exact Jacobian of the system.
/// The solution is `x = (L*(c))#`.
pub fn solve_reg_lp_space(problem: &RegProblem, cfg: &IterationConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let p = match problem.space {
        SpaceTag::Lp(p) => p,
        SpaceTag::Hilbert => 2.0,
        SpaceTag::L1 => return Err(Error::InvalidParameter("the Newton route needs 1 < p < inf".into())),
    };
    if problem.loss.kind != LossKind::Square {
        return Err(Error::InvalidParameter("the Newton route needs the square loss".into()));
    }
    let r = problem.regularizer.exponent();
    if r < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "phi(t) = t^{r} is not convex; the Newton route needs r >= 1"
        )));
    }
    let q = conjugate_exponent(p);
    let lambda = problem.lambda;
    let op = &problem.op;
    let y = problem.y();
    let d = op.dense();
    let a = &d.matrix;
    let yv = DVector::from_column_slice(y);
    let m = op.m();

    let zero_optimal = if r == 1.0 {
        lp_norm_of(a.tr_mul(&yv).iter().map(|v| 2.0 * v), q) <= lambda
    } else {
        y.iter().all(|&v| v == 0.0)
    };
    if zero_optimal {
        let coefs = vec![0.0; m];
        let dual = lp_dual_value(problem, a, q, &SparseSeq::new())?;
        return report(problem, SparseSeq::new(), coefs, dual, 0.0, 0, true);
    }

    let reg = problem.regularizer;
    let system = |c: &DVector<f64>| {
        let u = a.tr_mul(c);
        let s = lp_norm_of(u.iter().copied(), q);
        if s == 0.0 {
            return DVector::from_element(m, f64::INFINITY);
        }
        let x = u.map(|v| v.signum() * s * (v.abs() / s).powf(q - 1.0));
        2.0 * (a * x - &yv) + lambda * reg.weight(s) * c
    };
    let jacobian = |c: &DVector<f64>| {
        let u = a.tr_mul(c);
        let s = lp_norm_of(u.iter().copied(), q);
        let mut jac = 2.0 * dmap_composite_jacobian(a, c, q);
        if s > 0.0 {
            let x = u.map(|v| v.signum() * s * (v.abs() / s).powf(q - 1.0));
            let grad_s = a * x / s;
            jac += DMatrix::identity(m, m) * (lambda * reg.weight(s));
            jac += lambda * reg.weight_derivative(s) * c * grad_s.transpose();
        }
        jac
    };
    let ridge = solve_spd(&(op.gram() + DMatrix::identity(m, m) * lambda), &yv)?;
    let out = damped_newton(&system, &jacobian, None, ridge, cfg.tol, cfg.max_iter)?;
    let coefs = to_vec(&out.c);
    let solution = dmap_lq(&op.adjoint(&coefs)?, q)?;
    let dual = lp_dual_value(problem, a, q, &solution)?;
    report(problem, solution, coefs, dual, out.residual, out.iterations, true)
}

/// `-Q*(w) - lambda phi*(||L*(w)||_q / lambda)` at `w = 2 (L x - y)`,
/// shrunk onto the dual ball when `phi(t) = t`.
fn lp_dual_value(problem: &RegProblem, a: &DMatrix<f64>, q: f64, x: &SparseSeq) -> Result<f64> {
    let lambda = problem.lambda;
    let lx = problem.op.apply(x);
    let mut w: Vec<f64> = lx.iter().zip(problem.y()).map(|(z, y)| 2.0 * (z - y)).collect();
    let mut t = lp_norm_of(a.tr_mul(&DVector::from_column_slice(&w)).iter().copied(), q) / lambda;
    if problem.regularizer.exponent() == 1.0 && t > 1.0 {
        w.iter_mut().for_each(|v| *v /= t);
        t = 1.0;
    }
    Ok(-problem.loss.conjugate_value(&w) - lambda * problem.regularizer.conjugate(t))
}

/// Residuals `r_dual = ||c - prox_{Q*}(c + L x)||_inf` and
/// `r_prox = ||x - soft(x - (1/lambda) S(L*(c)), 1)||_1`.
pub fn reg_fixed_point_residual_l1(problem: &RegProblem, x: &SparseSeq, c: &[f64]) -> Result<(f64, f64)> {
    let m = problem.op.m();
    if c.len() != m {
        return Err(mismatch(m, c.len(), "coefficients vs functionals"));
    }
    let lx = problem.op.apply(x);
    let shifted: Vec<f64> = c.iter().zip(&lx).map(|(a, b)| a + b).collect();
    let p = prox_loss_conjugate(&shifted, &problem.loss, 1.0)?;
    let r_dual = c.iter().zip(&p).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    let s = truncate_s(&problem.op.adjoint(c)?).scale(1.0 / problem.lambda);
    let stepped = SparseSeq::combine(1.0, x, -1.0, &s);
    let r_prox = SparseSeq::combine(1.0, x, -1.0, &soft_threshold(&stepped, 1.0)).norm_l1();
    Ok((r_dual, r_prox))
}

/// Dense counterpart of [`reg_fixed_point_residual_l1`].
fn dense_reg_residuals(
    a: &DMatrix<f64>,
    loss: &LossSpec,
    lambda: f64,
    x: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<f64> {
    let shifted = c + a * x;
    let p = prox_loss_conjugate(shifted.as_slice(), loss, 1.0)?;
    let r_dual = c.iter().zip(&p).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    let nu = a.tr_mul(c);
    let cut = (1.0 - FACE_REL_TOL) * nu.amax();
    let r_prox: f64 = (0..x.len())
        .map(|k| {
            let s = if nu[k].abs() >= cut { nu[k] / lambda } else { 0.0 };
            (x[k] - shrink(x[k] - s, 1.0)).abs()
        })
        .sum();
    Ok(r_dual.max(r_prox))
}

fn support_of(x: &DVector<f64>) -> Vec<usize> {
    (0..x.len()).filter(|&k| x[k] != 0.0).collect()
}

/// Square-loss refinement on the support of `x`:
/// `x_S = (A_S^T A_S)^{-1} (A_S^T y - lambda sign(x_S) / 2)`.
fn polish_square(a: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, x: &DVector<f64>) -> Option<DVector<f64>> {
    let supp = support_of(x);
    if supp.is_empty() || supp.len() > a.nrows() {
        return None;
    }
    let a_s = a.select_columns(&supp);
    let signs = DVector::from_iterator(supp.len(), supp.iter().map(|&k| x[k].signum()));
    let rhs = a_s.tr_mul(y) - 0.5 * lambda * signs;
    let z = solve_spd(&a_s.tr_mul(&a_s), &rhs).ok()?;
    let mut out = DVector::zeros(x.len());
    for (&k, &v) in supp.iter().zip(z.iter()) {
        out[k] = v;
    }
    Some(out)
}

/// Kink of a piecewise-linear loss nearest to `z`, with its distance.
fn nearest_kink(kind: LossKind, y: f64, z: f64) -> (f64, f64) {
    match kind {
        LossKind::EpsInsensitive { eps } => {
            let k = if z >= y { y + eps } else { y - eps };
            (k, (z - k).abs())
        }
        _ => (y, (z - y).abs()),
    }
}

/// Derivative of a piecewise-linear loss away from its kinks.
fn slope(kind: LossKind, y: f64, z: f64) -> f64 {
    match kind {
        LossKind::Hinge => {
            if y * z < 1.0 {
                -y
            } else {
                0.0
            }
        }
        LossKind::EpsInsensitive { eps } => {
            let d = z - y;
            if d > eps {
                1.0
            } else if d < -eps {
                -1.0
            } else {
                0.0
            }
        }
        LossKind::Square => 2.0 * (z - y),
    }
}

fn least_squares(mat: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let sol = mat.svd(true, true).solve(rhs, 1e-12).ok()?;
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

/// Active-set refinement for hinge and epsilon-insensitive losses.
///
/// Samples with `L(x)_j` within `band` of a kink are pinned to it, the
/// others get the fixed slope as multiplier. The support values then solve
/// the pinned equations and the pinned multipliers solve
/// `A_S^T c = -lambda sign(x_S)`, both in the least-squares sense.
fn polish_piecewise(
    a: &DMatrix<f64>,
    loss: &LossSpec,
    lambda: f64,
    x: &DVector<f64>,
    c: &DVector<f64>,
    band: f64,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let z = a * x;
    let supp = support_of(x);
    let mut pinned = Vec::new();
    let mut targets = Vec::new();
    let mut free = Vec::new();
    let mut c_new = c.clone();
    for j in 0..a.nrows() {
        let (k, dist) = nearest_kink(loss.kind, loss.y[j], z[j]);
        if dist <= band {
            pinned.push(j);
            targets.push(k);
        } else {
            c_new[j] = slope(loss.kind, loss.y[j], z[j]);
            free.push(j);
        }
    }
    if !supp.is_empty() && pinned.is_empty() {
        return None;
    }
    let mut x_new = DVector::zeros(x.len());
    if !supp.is_empty() {
        let a_ps = a.select_rows(&pinned).select_columns(&supp);
        let xs = least_squares(a_ps.clone(), &DVector::from_vec(targets))?;
        for (&k, &v) in supp.iter().zip(xs.iter()) {
            x_new[k] = v;
        }
        let signs = DVector::from_iterator(supp.len(), supp.iter().map(|&k| x[k].signum()));
        let c_free = DVector::from_iterator(free.len(), free.iter().map(|&j| c_new[j]));
        let rhs = -lambda * signs - a.select_rows(&free).select_columns(&supp).tr_mul(&c_free);
        let cp = least_squares(a_ps.transpose(), &rhs)?;
        for (&j, &v) in pinned.iter().zip(cp.iter()) {
            c_new[j] = v;
        }
    }
    Some((x_new, c_new))
}

/// l1 with `phi(t) = t`, i.e. `min Q_y(L x) + lambda ||x||_1`.
///
/// The square loss uses accelerated proximal gradient with step `0.95 / L`,
/// `L = ||2 L*L||`, and certifies with `c = 2 (L x - y)`. Hinge and
/// epsilon-insensitive losses use the primal-dual iteration
///
/// ```text
/// x+ = soft(x - tau L*(c), tau lambda)
/// c+ = prox_{sigma Q*}(c + sigma L(x+ + theta (x+ - x)))
/// ```
///
/// with the conjugate prox obtained from the loss prox through Moreau.
pub fn solve_reg_l1(problem: &RegProblem, cfg: &IterationConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if problem.space != SpaceTag::L1 || problem.regularizer != Regularizer::Identity {
        return Err(Error::InvalidParameter(
            "the l1 route needs the l1 space and phi(t) = t".into(),
        ));
    }
    let d = problem.op.dense();
    let a = &d.matrix;
    let yv = DVector::from_column_slice(problem.y());
    let (x, c, _, iterations) = if problem.loss.kind == LossKind::Square {
        lasso(a, &yv, problem, cfg)?
    } else {
        nonsmooth_l1(a, problem, cfg)?
    };
    let solution = d.to_seq(&x);
    let coefs = to_vec(&c);
    let (r_dual, r_prox) = reg_fixed_point_residual_l1(problem, &solution, &coefs)?;
    let residual = r_dual.max(r_prox);
    let dual = l1_dual_value(problem, a, &coefs);
    report(
        problem,
        solution,
        coefs,
        dual,
        residual,
        iterations,
        residual <= cfg.tol,
    )
}

type L1Iterate = (DVector<f64>, DVector<f64>, f64, usize);

fn lasso(a: &DMatrix<f64>, yv: &DVector<f64>, problem: &RegProblem, cfg: &IterationConfig) -> Result<L1Iterate> {
    let lambda = problem.lambda;
    let loss = &problem.loss;
    let lip = 2.0 * op_norm_sq(a);
    if lip == 0.0 {
        return Err(Error::Degenerate("functionals vanish".into()));
    }
    let step = 0.95 / lip;
    let grad = |x: &DVector<f64>| 2.0 * a.tr_mul(&(a * x - yv));
    let prox = |v: &DVector<f64>, s: f64| Ok(v.map(|t| shrink(t, s * lambda)));
    let multiplier = |x: &DVector<f64>| 2.0 * (a * x - yv);

    let n = a.ncols();
    let x0 = DVector::zeros(n);
    let c0 = multiplier(&x0);
    let mut best = (x0.clone(), c0.clone(), dense_reg_residuals(a, loss, lambda, &x0, &c0)?);
    let done = best.2 <= cfg.tol;
    let mut monitor = |x: &DVector<f64>| -> Result<bool> {
        let c = multiplier(x);
        let r = dense_reg_residuals(a, loss, lambda, x, &c)?;
        if r < best.2 {
            best = (x.clone(), c, r);
        }
        if best.2 > cfg.tol && r <= 1e-3 {
            if let Some(px) = polish_square(a, yv, lambda, x) {
                let pc = multiplier(&px);
                let pr = dense_reg_residuals(a, loss, lambda, &px, &pc)?;
                if pr < best.2 {
                    best = (px, pc, pr);
                }
            }
        }
        Ok(best.2 <= cfg.tol)
    };
    let iterations = if done {
        0
    } else {
        accelerated_prox_gradient(x0, step, &grad, &prox, cfg.max_iter, &mut monitor)?
    };
    let (x, c, r) = best;
    Ok((x, c, r, iterations))
}

const POLISH_BANDS: [f64; 5] = [1e-10, 1e-8, 1e-6, 1e-4, 1e-3];

fn nonsmooth_l1(a: &DMatrix<f64>, problem: &RegProblem, cfg: &IterationConfig) -> Result<L1Iterate> {
    let lambda = problem.lambda;
    let loss = &problem.loss;
    let norm_sq = op_norm_sq(a);
    if norm_sq == 0.0 {
        return Err(Error::Degenerate("functionals vanish".into()));
    }
    let (tau, sigma) = cfg.primal_dual_steps(norm_sq, 1.0)?;
    let theta = cfg.relaxation;
    let mut x = DVector::zeros(a.ncols());
    let mut c = DVector::zeros(a.nrows());
    let mut best = (x.clone(), c.clone(), f64::INFINITY);
    let mut iterations = cfg.max_iter;
    for it in 1..=cfg.max_iter {
        let g = a.tr_mul(&c);
        let x_new = DVector::from_fn(x.len(), |k, _| shrink(x[k] - tau * g[k], tau * lambda));
        let x_bar = &x_new + theta * (&x_new - &x);
        let arg = &c + sigma * (a * &x_bar);
        c = DVector::from_vec(prox_loss_conjugate(arg.as_slice(), loss, sigma)?);
        x = x_new;
        if it % CHECK_EVERY != 0 && it != cfg.max_iter {
            continue;
        }
        let r = dense_reg_residuals(a, loss, lambda, &x, &c)?;
        if r < best.2 {
            best = (x.clone(), c.clone(), r);
        }
        if best.2 > cfg.tol && r <= 1e-3 {
            for band in POLISH_BANDS {
                if let Some((px, pc)) = polish_piecewise(a, loss, lambda, &x, &c, band) {
                    let pr = dense_reg_residuals(a, loss, lambda, &px, &pc)?;
                    if pr < best.2 {
                        best = (px, pc, pr);
                    }
                }
            }
        }
        if best.2 <= cfg.tol {
            iterations = it;
            break;
        }
    }
    let (x, c, r) = best;
    Ok((x, c, r, iterations))
}

/// `-Q*(w)` for `w` the domain projection of `c` shrunk into
/// `||L*(w)||_inf <= lambda`.
fn l1_dual_value(problem: &RegProblem, a: &DMatrix<f64>, c: &[f64]) -> f64 {
    let mut w = problem.loss.project_conjugate_domain(c);
    let t = a.tr_mul(&DVector::from_column_slice(&w)).amax() / problem.lambda;
    if t > 1.0 {
        w.iter_mut().for_each(|v| *v /= t);
    }
    -problem.loss.conjugate_value(&w)
}

/// Picks the route matching the problem.
pub fn solve_reg(problem: &RegProblem, cfg: &IterationConfig) -> Result<SolveReport> {
    let square_loss = problem.loss.kind == LossKind::Square;
    match problem.space {
        SpaceTag::Hilbert if square_loss && problem.regularizer == Regularizer::Square => {
            solve_reg_hilbert_square(&problem.op, problem.y(), problem.lambda)
        }
        SpaceTag::Hilbert if problem.regularizer == Regularizer::Square => solve_reg_hilbert_prox(problem, cfg),
        SpaceTag::Hilbert | SpaceTag::Lp(_) if square_loss => solve_reg_lp_space(problem, cfg),
        SpaceTag::L1 => solve_reg_l1(problem, cfg),
        _ => Err(Error::InvalidParameter(format!(
            "no solver for {} loss with phi(t) = t^{} in {}",
            loss_name(problem.loss.kind),
            problem.regularizer.exponent(),
            problem.space.name()
        ))),
    }
}

fn loss_name(kind: LossKind) -> &'static str {
    match kind {
        LossKind::Square => "square",
        LossKind::Hinge => "hinge",
        LossKind::EpsInsensitive { .. } => "epsilon-insensitive",
    }
}

/// Outcome of re-solving minimum-norm interpolation at the data produced by
/// a regularized solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub regularized: SolveReport,
    pub interpolant: SolveReport,
    /// `|| ||f0|| - ||g|| |`
    pub norm_gap: f64,
    /// Difference of the regularized objectives at `f0` and `g`.
    pub objective_gap: f64,
}

/// Solves the regularization problem for `f0`, then minimum-norm
/// interpolation at `y' = L(f0)` for `g`, and compares the two.
pub fn check_mni_reg_link(problem: &RegProblem, cfg: &IterationConfig) -> Result<LinkReport> {
    if problem.regularizer.exponent() <= 0.0 {
        return Err(Error::InvalidParameter("phi must be strictly increasing".into()));
    }
    let regularized = solve_reg(problem, cfg)?;
    let data = problem.op.apply(&regularized.solution);
    let interpolant = solve_mni(&problem.op, &data, problem.space, cfg)?;
    let norm_gap = (problem.norm(&regularized.solution)? - problem.norm(&interpolant.solution)?).abs();
    let objective_gap = (regularized.objective - problem.objective(&interpolant.solution)?).abs();
    Ok(LinkReport {
        regularized,
        interpolant,
        norm_gap,
        objective_gap,
    })
}
