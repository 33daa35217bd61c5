//! Minimum-norm interpolation: `min ||x||  s.t.  L(x) = y`.
//!
//! * Hilbert: the coefficients solve the Gram system `G c = y` and
//!   `x = L*(c)`.
//! * lp: the coefficients solve `L((L*(c))#) = y` where `#` is the lq
//!   duality map; solved by damped Newton globalized on the convex
//!   potential `||L*(c)||_q^2 / 2 - <c, y>`, whose gradient is the system.
//! * l1: primal-dual proximal iteration on `||x||_1 + iota_y(L x)`,
//!   certified by the truncated fixed-point equations
//!   `c = prox_{iota_y^*}(c + L x)` and `x = prox_{||.||_1}(x - S(L*(c)))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::duality::{dmap_lq, truncate_s, FACE_REL_TOL};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, op_norm_sq, solve_spd, solve_square};
use crate::prox::{prox_indicator_conj, shrink, soft_threshold};
use crate::sampling::{Coefs, DenseRestriction, SamplingOperator};
use crate::seq::{check_exponent, conjugate_exponent, lp_norm_of, SpaceTag, SparseSeq};

/// Gram matrices with smallest eigenvalue at or below this are singular.
pub const GRAM_EIGEN_FLOOR: f64 = 1e-10;

/// Result of any solver in this crate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: SparseSeq,
    pub coefs: Coefs,
    pub objective: f64,
    /// The dual/infimum value certified by `coefs` (the lower bound side of
    /// the duality identity).
    pub infimum_dual: f64,
    /// `||L(solution) - y||_inf`
    pub interp_residual: f64,
    pub fixed_point_residual: Option<f64>,
    pub support: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub(crate) fn zero(m: usize) -> Self {
        SolveReport {
            solution: SparseSeq::new(),
            coefs: vec![0.0; m],
            objective: 0.0,
            infimum_dual: 0.0,
            interp_residual: 0.0,
            fixed_point_residual: Some(0.0),
            support: Vec::new(),
            iterations: 0,
            converged: true,
            warnings: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        op: &SamplingOperator,
        y: &[f64],
        solution: SparseSeq,
        coefs: Coefs,
        objective: f64,
        infimum_dual: f64,
        fixed_point_residual: Option<f64>,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let interp_residual = interp_residual(op, &solution, y);
        SolveReport {
            support: solution.support(),
            solution,
            coefs,
            objective,
            infimum_dual,
            interp_residual,
            fixed_point_residual,
            iterations,
            converged,
            warnings: op.independence_warning().into_iter().collect(),
        }
    }
}

pub(crate) fn interp_residual(op: &SamplingOperator, x: &SparseSeq, y: &[f64]) -> f64 {
    op.apply(x).iter().zip(y).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Settings for the iterative solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IterationConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// Primal step; derived from the operator norm when absent.
    pub step_primal: Option<f64>,
    /// Dual step; derived from the operator norm when absent.
    pub step_dual: Option<f64>,
    /// Extrapolation weight of the primal-dual schemes.
    pub relaxation: f64,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            max_iter: 200_000,
            tol: 1e-9,
            step_primal: None,
            step_dual: None,
            relaxation: 1.0,
        }
    }
}

/// Bound on `sigma tau ||L||^2` for the default primal-dual steps.
pub const STEP_PRODUCT: f64 = 0.95;

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.relaxation) {
            return Err(Error::InvalidParameter(format!(
                "relaxation must lie in [0, 1], got {}",
                self.relaxation
            )));
        }
        for s in [self.step_primal, self.step_dual].into_iter().flatten() {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!("steps must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// Primal and dual steps with `sigma tau ||L||^2 < 1`. `weight` balances
    /// the two when neither is configured.
    pub(crate) fn primal_dual_steps(&self, norm_sq: f64, weight: f64) -> Result<(f64, f64)> {
        let norm_sq = norm_sq.max(f64::MIN_POSITIVE);
        let (tau, sigma) = match (self.step_primal, self.step_dual) {
            (Some(t), Some(s)) => (t, s),
            (Some(t), None) => (t, STEP_PRODUCT / (t * norm_sq)),
            (None, Some(s)) => (STEP_PRODUCT / (s * norm_sq), s),
            (None, None) => {
                let base = (STEP_PRODUCT / norm_sq).sqrt();
                (base / weight, base * weight)
            }
        };
        if tau * sigma * norm_sq >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "steps violate sigma*tau*||L||^2 < 1 (got {})",
                tau * sigma * norm_sq
            )));
        }
        Ok((tau, sigma))
    }
}

pub fn solve_mni_hilbert(op: &SamplingOperator, y: &[f64]) -> Result<SolveReport> {
    op.check_data(y)?;
    let g = op.gram();
    let min_eig = min_eigenvalue(&g);
    if min_eig <= GRAM_EIGEN_FLOOR {
        return Err(Error::Degenerate(format!(
            "Gram matrix is singular (smallest eigenvalue {min_eig:e})"
        )));
    }
    if y.iter().all(|&v| v == 0.0) {
        return Ok(SolveReport::zero(op.m()));
    }
    let c = solve_spd(&g, &DVector::from_column_slice(y))?;
    let coefs: Coefs = c.iter().copied().collect();
    let solution = op.adjoint(&coefs)?;
    let energy = c.dot(&(&g * &c)).max(0.0).sqrt();
    Ok(SolveReport::assemble(
        op,
        y,
        solution.clone(),
        coefs,
        solution.norm_lp(2.0),
        energy,
        None,
        1,
        true,
    ))
}

/// `x = (A^T c)#` restricted to the union support.
fn dense_dmap(a: &DMatrix<f64>, c: &DVector<f64>, q: f64) -> DVector<f64> {
    let u = a.tr_mul(c);
    let norm = lp_norm_of(u.iter().copied(), q);
    if norm == 0.0 {
        return DVector::zeros(u.len());
    }
    u.map(|v| v.signum() * norm * (v.abs() / norm).powf(q - 1.0))
}

/// Smallest `|u_k| / ||u||_q` used in the duality-map derivative, which
/// is unbounded at zero when `q < 2`.
const DERIVATIVE_FLOOR: f64 = 1e-20;

/// Jacobian of `c -> A (A^T c)#`, i.e. `A D A^T` with
/// `D = (q-1) s^(2-q) diag(|u|^(q-2)) + (2-q) x x^T / s^2`, where
/// `u = A^T c`, `s = ||u||_q` and `x = u#`.
pub(crate) fn dmap_composite_jacobian(a: &DMatrix<f64>, c: &DVector<f64>, q: f64) -> DMatrix<f64> {
    let u = a.tr_mul(c);
    let s = lp_norm_of(u.iter().copied(), q);
    let m = a.nrows();
    if s == 0.0 {
        return DMatrix::zeros(m, m);
    }
    let x = u.map(|v| v.signum() * s * (v.abs() / s).powf(q - 1.0));
    let scale = (q - 1.0) * s.powf(2.0 - q);
    let diag = u.map(|v| scale * v.abs().max(DERIVATIVE_FLOOR * s).powf(q - 2.0));
    let weighted = DMatrix::from_fn(m, a.ncols(), |j, k| a[(j, k)] * diag[k]);
    let ax = a * &x;
    weighted * a.transpose() + (2.0 - q) / (s * s) * &ax * ax.transpose()
}

/// Central-difference Jacobian of `f` at `c` with steps `1e-6 (1 + |c_k|)`.
#[cfg(test)]
pub(crate) fn fd_jacobian(f: &dyn Fn(&DVector<f64>) -> DVector<f64>, c: &DVector<f64>) -> DMatrix<f64> {
    let m = c.len();
    let mut jac = DMatrix::zeros(m, m);
    for k in 0..m {
        let h = 1e-6 * (1.0 + c[k].abs());
        let mut plus = c.clone();
        plus[k] += h;
        let mut minus = c.clone();
        minus[k] -= h;
        let col = (f(&plus) - f(&minus)) / (2.0 * h);
        jac.set_column(k, &col);
    }
    jac
}

pub(crate) struct NewtonOutcome {
    pub c: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
}

type VecFn<'a> = &'a dyn Fn(&DVector<f64>) -> DVector<f64>;
type ScalarFn<'a> = &'a dyn Fn(&DVector<f64>) -> f64;
type MatFn<'a> = &'a dyn Fn(&DVector<f64>) -> DMatrix<f64>;

const MAX_HALVINGS: usize = 60;

/// Backtracking on `||f||_2` along `dir`.
fn merit_search(
    f: VecFn,
    c: &DVector<f64>,
    fc: &DVector<f64>,
    dir: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let merit = fc.norm();
    let mut t = 1.0;
    for _ in 0..MAX_HALVINGS {
        let trial = c + t * dir;
        let ft = f(&trial);
        if ft.iter().all(|v| v.is_finite()) && ft.norm() < (1.0 - 1e-4 * t) * merit {
            return Some((trial, ft));
        }
        t *= 0.5;
    }
    None
}

/// Armijo backtracking on `phi` (whose gradient is `f`) along the first
/// descent direction among `dirs`.
fn armijo_search(
    phi: ScalarFn,
    f: VecFn,
    c: &DVector<f64>,
    fc: &DVector<f64>,
    dirs: &[DVector<f64>],
) -> Option<(DVector<f64>, DVector<f64>)> {
    let phi0 = phi(c);
    for dir in dirs {
        let slope = fc.dot(dir);
        if slope.is_nan() || slope >= 0.0 {
            continue;
        }
        let mut t = 1.0;
        for _ in 0..MAX_HALVINGS {
            let trial = c + t * dir;
            let v = phi(&trial);
            if v.is_finite() && v < phi0 && v <= phi0 + 1e-4 * t * slope {
                let ft = f(&trial);
                return Some((trial, ft));
            }
            t *= 0.5;
        }
    }
    None
}

/// Damped Newton on `f(c) = 0` with Jacobian `jac` and backtracking
/// halving (at most 60 halvings per step).
///
/// With a `potential` whose gradient is `f`, steps are accepted by an
/// Armijo decrease of the potential, falling back to the steepest-descent
/// direction `-f` when the Newton direction does not descend. Once the
/// potential can no longer resolve a decrease, the `||f||_2` test takes
/// over. The iterate with the smallest `||f||_inf` is returned.
pub(crate) fn damped_newton(
    f: VecFn,
    jac: MatFn,
    potential: Option<ScalarFn>,
    mut c: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    let mut fc = f(&c);
    let mut best = (c.clone(), fc.amax(), 0);
    let mut extra = 0;
    for it in 0..max_iter {
        let res = fc.amax();
        if res < best.1 {
            best = (c.clone(), res, it);
        }
        if res <= tol {
            // a couple of further steps are nearly free in the quadratic
            // regime
            if extra >= 2 || res == 0.0 {
                break;
            }
            extra += 1;
        }
        let jc = jac(&c);
        let newton = solve_square(&jc, &(-&fc));
        let step = potential
            .and_then(|phi| {
                let dirs: Vec<DVector<f64>> = newton.iter().cloned().chain([-&fc]).collect();
                armijo_search(phi, f, &c, &fc, &dirs)
            })
            .or_else(|| {
                let dir = newton.clone().unwrap_or_else(|| -jc.tr_mul(&fc));
                merit_search(f, &c, &fc, &dir)
            });
        match step {
            Some((nc, nf)) => {
                c = nc;
                fc = nf;
            }
            None => break,
        }
    }
    let res = fc.amax();
    if res < best.1 {
        best = (c, res, max_iter);
    }
    let (c, residual, iterations) = best;
    if residual <= tol {
        Ok(NewtonOutcome {
            c,
            residual,
            iterations,
        })
    } else {
        Err(Error::NonConvergence {
            iterations,
            best_residual: residual,
        })
    }
}

/// lp minimum-norm interpolation through the semi-inner-product system
/// `L((L*(c))#) = y`, started from the Gram (p = 2) solution.
pub fn solve_mni_lp_space(op: &SamplingOperator, y: &[f64], p: f64, cfg: &IterationConfig) -> Result<SolveReport> {
    check_exponent(p)?;
    cfg.validate()?;
    op.check_data(y)?;
    let q = conjugate_exponent(p);
    let g = op.gram();
    if min_eigenvalue(&g) <= GRAM_EIGEN_FLOOR {
        return Err(Error::Degenerate("Gram matrix is singular".into()));
    }
    if y.iter().all(|&v| v == 0.0) {
        return Ok(SolveReport::zero(op.m()));
    }
    let d = op.dense();
    let a = &d.matrix;
    let yv = DVector::from_column_slice(y);
    let residual = |c: &DVector<f64>| a * dense_dmap(a, c, q) - &yv;
    let potential = |c: &DVector<f64>| {
        let s = lp_norm_of(a.tr_mul(c).iter().copied(), q);
        0.5 * s * s - c.dot(&yv)
    };
    let jacobian = |c: &DVector<f64>| dmap_composite_jacobian(a, c, q);
    let c0 = solve_spd(&g, &yv)?;
    let out = damped_newton(&residual, &jacobian, Some(&potential), c0, cfg.tol, cfg.max_iter)?;
    let coefs: Coefs = out.c.iter().copied().collect();
    let solution = dmap_lq(&op.adjoint(&coefs)?, q)?;
    let dual = op.adjoint(&coefs)?.norm_lp(q);
    Ok(SolveReport::assemble(
        op,
        y,
        solution.clone(),
        coefs,
        solution.norm_lp(p),
        dual,
        Some(out.residual),
        out.iterations,
        true,
    ))
}

/// Residuals of the truncated fixed-point equations for l1 interpolation:
/// `r_interp = ||prox_{iota_y^*}(c + L x) - c||_inf` (equal to
/// `||L x - y||_inf`) and `r_prox = ||x - soft(x - S(L*(c)), 1)||_1`.
pub fn fixed_point_residual_l1(op: &SamplingOperator, y: &[f64], x: &SparseSeq, c: &[f64]) -> Result<(f64, f64)> {
    op.check_data(y)?;
    let lx = op.apply(x);
    let shifted: Vec<f64> = c.iter().zip(&lx).map(|(a, b)| a + b).collect();
    let pc = prox_indicator_conj(&shifted, y, 1.0)?;
    let r_interp = pc.iter().zip(c).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let s = truncate_s(&op.adjoint(c)?);
    let step = SparseSeq::combine(1.0, x, -1.0, &s);
    let r_prox = SparseSeq::combine(1.0, x, -1.0, &soft_threshold(&step, 1.0)).norm_l1();
    Ok((r_interp, r_prox))
}

/// Same residuals evaluated on the dense restriction.
fn dense_residuals_l1(a: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>, c: &DVector<f64>) -> (f64, f64) {
    let r_interp = (a * x - y).amax();
    let nu = a.tr_mul(c);
    let cut = (1.0 - FACE_REL_TOL) * nu.amax();
    let mut r_prox = 0.0;
    for k in 0..x.len() {
        let s = if nu[k].abs() >= cut { nu[k] } else { 0.0 };
        r_prox += (x[k] - shrink(x[k] - s, 1.0)).abs();
    }
    (r_interp, r_prox)
}

/// Active-set refinement: keep the support and signs of `x`, make `x`
/// interpolate exactly on that support and move `c` minimally so that
/// `-L*(c)` equals the signs there.
fn polish_l1(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    x: &DVector<f64>,
    c: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let supp: Vec<usize> = (0..x.len()).filter(|&k| x[k] != 0.0).collect();
    let m = a.nrows();
    if supp.is_empty() || supp.len() > m {
        return None;
    }
    let a_s = a.select_columns(&supp);
    let gram_s = a_s.tr_mul(&a_s);
    let z = solve_spd(&gram_s, &a_s.tr_mul(y)).ok()?;
    if supp
        .iter()
        .zip(z.iter())
        .any(|(&k, &v)| v == 0.0 || v.signum() != x[k].signum())
    {
        return None;
    }
    let signs = DVector::from_iterator(supp.len(), supp.iter().map(|&k| x[k].signum()));
    let gap = -signs - a_s.tr_mul(c);
    let c_new = c + &a_s * solve_spd(&gram_s, &gap).ok()?;
    let mut x_new = DVector::zeros(x.len());
    for (&k, &v) in supp.iter().zip(z.iter()) {
        x_new[k] = v;
    }
    Some((x_new, c_new))
}

/// Weight balancing primal and dual step sizes.
fn primal_weight(d: &DenseRestriction, y: &[f64]) -> f64 {
    let yn = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if yn == 0.0 {
        1.0
    } else {
        (d.n() as f64).sqrt() / yn
    }
}

/// How often residuals are evaluated in the iterative solvers.
pub(crate) const CHECK_EVERY: usize = 20;

/// l1 minimum-norm interpolation by an extrapolated primal-dual proximal
/// iteration:
///
/// ```text
/// x+ = soft(x - tau L*(c), tau)
/// c+ = prox_{sigma iota_y^*}(c + sigma L(x+ + theta (x+ - x)))
/// ```
///
/// The dual variable is the multiplier of the fixed-point certificate.
/// Once the residuals are small an active-set refinement is attempted; it
/// is kept only if it lowers them.
pub fn solve_mni_l1(op: &SamplingOperator, y: &[f64], cfg: &IterationConfig) -> Result<SolveReport> {
    cfg.validate()?;
    op.check_data(y)?;
    if y.iter().all(|&v| v == 0.0) {
        return Ok(SolveReport::zero(op.m()));
    }
    let d = op.dense();
    let a = &d.matrix;
    let yv = DVector::from_column_slice(y);
    let norm_sq = op_norm_sq(a);
    let (tau, sigma) = cfg.primal_dual_steps(norm_sq, primal_weight(&d, y))?;
    let theta = cfg.relaxation;

    let mut x = DVector::zeros(d.n());
    let mut c = DVector::zeros(d.m());
    let mut best = (x.clone(), c.clone(), f64::INFINITY);
    let mut iterations = cfg.max_iter;
    for it in 1..=cfg.max_iter {
        let grad = a.tr_mul(&c);
        let x_new = DVector::from_fn(x.len(), |k, _| shrink(x[k] - tau * grad[k], tau));
        let x_bar = &x_new + theta * (&x_new - &x);
        c += sigma * (a * &x_bar - &yv);
        x = x_new;

        if it % CHECK_EVERY == 0 || it == cfg.max_iter {
            let (ri, rp) = dense_residuals_l1(a, &yv, &x, &c);
            let merit = ri.max(rp);
            if merit < best.2 {
                best = (x.clone(), c.clone(), merit);
            }
            if merit <= cfg.tol {
                iterations = it;
                break;
            }
            if merit <= 1e-3 {
                if let Some((px, pc)) = polish_l1(a, &yv, &x, &c) {
                    let (pi, pp) = dense_residuals_l1(a, &yv, &px, &pc);
                    if pi.max(pp) < best.2 {
                        best = (px, pc, pi.max(pp));
                    }
                    if pi.max(pp) <= cfg.tol {
                        iterations = it;
                        break;
                    }
                }
            }
        }
    }
    let (bx, bc, _) = best;
    let solution = d.to_seq(&bx);
    let coefs: Coefs = bc.iter().copied().collect();
    let (r_interp, r_prox) = fixed_point_residual_l1(op, y, &solution, &coefs)?;
    let fp = r_interp.max(r_prox);
    let dual_norm = op.adjoint(&coefs)?.norm_linf().max(1.0);
    let dual_value = -coefs.iter().zip(y).map(|(c, y)| c * y).sum::<f64>() / dual_norm;
    Ok(SolveReport::assemble(
        op,
        y,
        solution.clone(),
        coefs,
        solution.norm_l1(),
        dual_value,
        Some(fp),
        iterations,
        fp <= cfg.tol,
    ))
}

/// The infimum expressed through the functionals:
/// `sqrt(c^T G c)` (Hilbert), `||L*(c)||_q` (lp), and `1 / ||L*(c_hat)||_inf`
/// for a dual vector `c_hat` normalized by `<c_hat, y> = 1` (l1).
pub fn infimum_report(op: &SamplingOperator, coefs: &[f64], space: SpaceTag) -> Result<f64> {
    space.validate()?;
    let nu = op.adjoint(coefs)?;
    match space {
        SpaceTag::Hilbert => Ok(nu.norm_lp(2.0)),
        SpaceTag::Lp(p) => Ok(nu.norm_lp(conjugate_exponent(p))),
        SpaceTag::L1 => {
            let v = nu.norm_linf();
            if v == 0.0 {
                Err(Error::Degenerate("functional L*(c_hat) is zero".into()))
            } else {
                Ok(1.0 / v)
            }
        }
    }
}

/// Dispatches to the solver matching `space`.
pub fn solve_mni(op: &SamplingOperator, y: &[f64], space: SpaceTag, cfg: &IterationConfig) -> Result<SolveReport> {
    match space {
        SpaceTag::Hilbert => solve_mni_hilbert(op, y),
        SpaceTag::Lp(p) => solve_mni_lp_space(op, y, p, cfg),
        SpaceTag::L1 => solve_mni_l1(op, y, cfg),
    }
}
