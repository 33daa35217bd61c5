//! Linear-programming reference route for l1 minimum-norm interpolation.
//!
//! Everything here is solved with a dense two-phase simplex using Bland's
//! rule. The LPs are restricted to the union support of the functionals: a
//! coordinate outside it does not enter any constraint, so setting it to zero
//! never hurts the l1 objective and the restriction loses nothing.

use nalgebra::{DMatrix, DVector};

use crate::duality::linf_face;
use crate::error::{mismatch, Error, Result};
use crate::linalg::{inf_norm, solve_square};
use crate::mni::{fixed_point_residual_l1, SolveReport};
use crate::sampling::{Coefs, SamplingOperator};
use crate::seq::SparseSeq;

pub const PIVOT_TOL: f64 = 1e-11;

/// `min cost^T x  s.t.  eq_matrix x = eq_rhs, x >= 0`.
#[derive(Clone, Debug)]
pub struct StandardLp {
    pub cost: Vec<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    /// Equality multipliers `w` with `A^T w <= cost` and `b^T w = value`.
    pub duals: Vec<f64>,
    pub residual: f64,
    pub pivots: usize,
}

#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Result<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Ok(s),
            LpOutcome::Infeasible => Err(Error::Infeasible),
            LpOutcome::Unbounded => Err(Error::Unbounded),
        }
    }
}

impl StandardLp {
    fn validate(&self) -> Result<()> {
        let (r, n) = self.eq_matrix.shape();
        if self.cost.len() != n {
            return Err(mismatch(n, self.cost.len(), "cost vs columns"));
        }
        if self.eq_rhs.len() != r {
            return Err(mismatch(r, self.eq_rhs.len(), "rhs vs rows"));
        }
        let finite =
            self.cost.iter().chain(&self.eq_rhs).all(|v| v.is_finite()) && self.eq_matrix.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("LP data must be finite".into()));
        }
        Ok(())
    }
}

struct Tableau {
    /// rows x (cols + 1); the last column is the right-hand side
    t: DMatrix<f64>,
    /// reduced costs, last entry is minus the objective value
    obj: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.t.ncols() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[(row, col)];
        let width = self.t.ncols();
        for k in 0..width {
            self.t[(row, k)] /= p;
        }
        for i in 0..self.t.nrows() {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f != 0.0 {
                for k in 0..width {
                    let v = self.t[(row, k)];
                    self.t[(i, k)] -= f * v;
                }
                self.t[(i, col)] = 0.0;
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for k in 0..width {
                self.obj[k] -= f * self.t[(row, k)];
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Runs Bland's rule over columns `0..eligible`. Returns `false` when
    /// the objective is unbounded below.
    fn optimize(&mut self, eligible: usize, rc_tol: f64) -> bool {
        let rhs = self.rhs_col();
        loop {
            let Some(col) = (0..eligible).find(|&j| self.obj[j] < -rc_tol) else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.nrows() {
                let a = self.t[(i, col)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(i, rhs)].max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-14 * br.abs().max(1.0)
                                || (ratio <= br + 1e-14 * br.abs().max(1.0) && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return false,
            }
        }
    }
}

/// Two-phase dense simplex with Bland's anti-cycling rule.
///
/// The final basis is re-solved with an LU factorization of the original
/// data, so the reported point and multipliers do not carry the round-off
/// accumulated by the tableau updates.
pub fn simplex_solve(lp: &StandardLp) -> Result<LpOutcome> {
    lp.validate()?;
    let (r, n) = lp.eq_matrix.shape();
    let b_scale = 1.0 + inf_norm(&lp.eq_rhs);
    let c_scale = 1.0 + inf_norm(&lp.cost);

    // phase 1: [A | I | b] with rows flipped so b >= 0
    let mut t = DMatrix::zeros(r, n + r + 1);
    for i in 0..r {
        let sign = if lp.eq_rhs[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = sign * lp.eq_matrix[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, n + r)] = sign * lp.eq_rhs[i];
    }
    let mut obj = vec![0.0; n + r + 1];
    for i in 0..r {
        for j in 0..n {
            obj[j] -= t[(i, j)];
        }
        obj[n + r] -= t[(i, n + r)];
    }
    let mut tab = Tableau {
        t,
        obj,
        basis: (n..n + r).collect(),
        pivots: 0,
    };
    tab.optimize(n + r, 1e-11 * b_scale);
    let phase1 = -tab.obj[n + r];
    if phase1 > 1e-9 * b_scale {
        return Ok(LpOutcome::Infeasible);
    }

    // drive artificials out of the basis; rows where that fails are redundant
    let mut redundant = vec![false; r];
    for (i, flag) in redundant.iter_mut().enumerate() {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| tab.t[(i, j)].abs() > PIVOT_TOL) {
                Some(j) => tab.pivot(i, j),
                None => *flag = true,
            }
        }
    }

    // phase 2
    let rhs = n + r;
    let mut obj = vec![0.0; n + r + 1];
    obj[..n].copy_from_slice(&lp.cost);
    for (i, &skip) in redundant.iter().enumerate() {
        let bi = tab.basis[i];
        let cb = if bi < n && !skip { lp.cost[bi] } else { 0.0 };
        if cb != 0.0 {
            for (k, o) in obj.iter_mut().enumerate().take(rhs + 1) {
                *o -= cb * tab.t[(i, k)];
            }
        }
    }
    tab.obj = obj;
    if !tab.optimize(n, 1e-11 * c_scale) {
        return Ok(LpOutcome::Unbounded);
    }

    let kept: Vec<usize> = (0..r).filter(|&i| !redundant[i]).collect();
    let basic: Vec<usize> = kept.iter().map(|&i| tab.basis[i]).collect();
    let mut x = vec![0.0; n];
    for (&i, &j) in kept.iter().zip(&basic) {
        x[j] = tab.t[(i, rhs)].max(0.0);
    }
    let mut duals = vec![0.0; r];

    // clean re-solve on the final basis
    let k = kept.len();
    let bmat = DMatrix::from_fn(k, k, |a, b| lp.eq_matrix[(kept[a], basic[b])]);
    let bvec = DVector::from_fn(k, |a, _| lp.eq_rhs[kept[a]]);
    if let Some(xb) = solve_square(&bmat, &bvec) {
        if xb.iter().all(|&v| v > -1e-9 * b_scale) {
            x.iter_mut().for_each(|v| *v = 0.0);
            for (a, &j) in basic.iter().enumerate() {
                x[j] = xb[a].max(0.0);
            }
        }
    }
    let cb = DVector::from_fn(k, |a, _| lp.cost[basic[a]]);
    if let Some(w) = solve_square(&bmat.transpose(), &cb) {
        for (a, &i) in kept.iter().enumerate() {
            duals[i] = w[a];
        }
    }

    let xv = DVector::from_vec(x.clone());
    let resid = &lp.eq_matrix * &xv - DVector::from_vec(lp.eq_rhs.clone());
    let value = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal(LpSolution {
        value,
        x,
        duals,
        residual: resid.amax(),
        pivots: tab.pivots,
    }))
}

/// `min ||x||_1  s.t.  L(x) = y` through the split `x = x+ - x-`.
///
/// The reported `coefs` are the multiplier `c = -w` built from the LP
/// equality duals `w`, which is the sign convention of the fixed-point
/// certificate (`-L*(c)` lies in the l1 subdifferential at the solution).
pub fn basis_pursuit(op: &SamplingOperator, y: &[f64]) -> Result<SolveReport> {
    op.check_data(y)?;
    if y.iter().all(|&v| v == 0.0) {
        return Ok(SolveReport::zero(op.m()));
    }
    let d = op.dense();
    let (m, n) = (d.m(), d.n());
    let mut a = DMatrix::zeros(m, 2 * n);
    a.view_mut((0, 0), (m, n)).copy_from(&d.matrix);
    a.view_mut((0, n), (m, n)).copy_from(&(-&d.matrix));
    let lp = StandardLp {
        cost: vec![1.0; 2 * n],
        eq_matrix: a,
        eq_rhs: y.to_vec(),
    };
    let sol = simplex_solve(&lp)?.optimal()?;
    let xs: Vec<f64> = (0..n).map(|k| sol.x[k] - sol.x[n + k]).collect();
    let solution = SparseSeq::from_dense_at(&d.indices, &xs);
    let coefs: Coefs = sol.duals.iter().map(|w| -w).collect();
    let dual_value: f64 = sol.duals.iter().zip(y).map(|(w, yj)| w * yj).sum();
    let (r_interp, r_prox) = fixed_point_residual_l1(op, y, &solution, &coefs)?;
    Ok(SolveReport::assemble(
        op,
        y,
        solution.clone(),
        coefs,
        solution.norm_l1(),
        dual_value,
        Some(r_interp.max(r_prox)),
        sol.pivots,
        true,
    ))
}

/// Solution of `min ||L*(c)||_inf  s.t.  <c, y> = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualLpSolution {
    pub c_hat: Coefs,
    /// `||L*(c_hat)||_inf`; the interpolation infimum is its reciprocal.
    pub value: f64,
}

impl DualLpSolution {
    pub fn infimum(&self) -> f64 {
        1.0 / self.value
    }
}

pub fn dual_inf_norm_lp(op: &SamplingOperator, y: &[f64]) -> Result<DualLpSolution> {
    op.check_data(y)?;
    if y.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("the dual problem needs nonzero data".into()));
    }
    let d = op.dense();
    let (m, n) = (d.m(), d.n());
    // columns: c+ (m) | c- (m) | t | s+ (n) | s- (n)
    let cols = 2 * m + 1 + 2 * n;
    let t_col = 2 * m;
    let mut a = DMatrix::zeros(2 * n + 1, cols);
    for k in 0..n {
        for j in 0..m {
            let v = d.matrix[(j, k)];
            a[(k, j)] = v;
            a[(k, m + j)] = -v;
            a[(n + k, j)] = -v;
            a[(n + k, m + j)] = v;
        }
        a[(k, t_col)] = -1.0;
        a[(n + k, t_col)] = -1.0;
        a[(k, t_col + 1 + k)] = 1.0;
        a[(n + k, t_col + 1 + n + k)] = 1.0;
    }
    for j in 0..m {
        a[(2 * n, j)] = y[j];
        a[(2 * n, m + j)] = -y[j];
    }
    let mut cost = vec![0.0; cols];
    cost[t_col] = 1.0;
    let mut rhs = vec![0.0; 2 * n + 1];
    rhs[2 * n] = 1.0;
    let sol = simplex_solve(&StandardLp {
        cost,
        eq_matrix: a,
        eq_rhs: rhs,
    })?
    .optimal()?;
    let c_hat: Coefs = (0..m).map(|j| sol.x[j] - sol.x[m + j]).collect();
    let value = op.adjoint(&c_hat)?.norm_linf();
    if value <= 0.0 {
        return Err(Error::Degenerate(
            "dual value is zero: data is not in the range of the functionals".into(),
        ));
    }
    Ok(DualLpSolution { c_hat, value })
}

/// Recovers an interpolant of minimal l1 norm from an optimal dual vector.
///
/// With `nu = L*(c_hat)` the solutions are `g / ||nu||_inf` for `g` in the
/// convex hull of `{sign(nu_j) e_j : |nu_j| = ||nu||_inf}` satisfying
/// `L(g) = ||nu||_inf y`. The convex weights come from a feasibility LP;
/// when several exist the first basic one is returned.
pub fn reconstruct_from_dual(op: &SamplingOperator, y: &[f64], c_hat: &[f64]) -> Result<SparseSeq> {
    op.check_data(y)?;
    let nu = op.adjoint(c_hat)?;
    if nu.is_empty() {
        return Err(Error::Degenerate("L*(c_hat) vanishes".into()));
    }
    let face = linf_face(&nu)?;
    let norm = face.norm_value;
    let m = op.m();
    let f = face.max_indices.len();
    let mut a = DMatrix::zeros(m + 1, f);
    for (k, (&idx, &s)) in face.signs.iter().enumerate() {
        for j in 0..m {
            a[(j, k)] = f64::from(s) * op.rows()[j].get(idx);
        }
        a[(m, k)] = 1.0;
    }
    let mut rhs: Vec<f64> = y.iter().map(|v| norm * v).collect();
    rhs.push(1.0);
    let sol = match simplex_solve(&StandardLp {
        cost: vec![0.0; f],
        eq_matrix: a,
        eq_rhs: rhs,
    })? {
        LpOutcome::Optimal(s) => s,
        _ => {
            return Err(Error::NumericalDuality(
                "no convex combination of the face interpolates the data; c_hat is not optimal".into(),
            ))
        }
    };
    let pairs = face
        .signs
        .iter()
        .zip(&sol.x)
        .map(|((&idx, &s), &t)| (idx, f64::from(s) * t / norm))
        .collect();
    SparseSeq::from_pairs(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(pairs: &[(usize, f64)]) -> SparseSeq {
        SparseSeq::from_pairs(pairs.to_vec()).unwrap()
    }

    fn op(rows: &[&[(usize, f64)]]) -> SamplingOperator {
        SamplingOperator::new(rows.iter().map(|r| seq(r)).collect()).unwrap()
    }

    fn lp(cost: &[f64], rows: usize, a: &[f64], b: &[f64]) -> StandardLp {
        StandardLp {
            cost: cost.to_vec(),
            eq_matrix: DMatrix::from_row_slice(rows, cost.len(), a),
            eq_rhs: b.to_vec(),
        }
    }

    #[test]
    fn simplex_forced_variable() {
        let s = simplex_solve(&lp(&[1.0], 1, &[1.0], &[1.0]))
            .unwrap()
            .optimal()
            .unwrap();
        assert!((s.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn simplex_split_problem() {
        // x1 + 0.5 x2 = 1 over x = (x1+, x2+, x1-, x2-)
        let s = simplex_solve(&lp(&[1.0, 1.0, 1.0, 1.0], 1, &[1.0, 0.5, -1.0, -0.5], &[1.0]))
            .unwrap()
            .optimal()
            .unwrap();
        assert!((s.value - 1.0).abs() < 1e-14);
        assert!((s.x[0] - 1.0).abs() < 1e-14 && s.x[1].abs() < 1e-14);
        assert!(s.residual <= 1e-9);
    }

    #[test]
    fn simplex_infeasible_and_unbounded() {
        assert!(matches!(
            simplex_solve(&lp(&[0.0], 1, &[1.0], &[-1.0])).unwrap(),
            LpOutcome::Infeasible
        ));
        assert!(matches!(
            simplex_solve(&lp(&[-1.0, 0.0], 1, &[1.0, -1.0], &[0.0])).unwrap(),
            LpOutcome::Unbounded
        ));
    }

    #[test]
    fn simplex_redundant_rows() {
        let s = simplex_solve(&lp(&[1.0, 2.0], 2, &[1.0, 1.0, 2.0, 2.0], &[1.0, 2.0]))
            .unwrap()
            .optimal()
            .unwrap();
        assert!((s.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn simplex_dimension_errors() {
        let bad = StandardLp {
            cost: vec![1.0],
            eq_matrix: DMatrix::zeros(1, 2),
            eq_rhs: vec![1.0],
        };
        assert!(simplex_solve(&bad).is_err());
    }

    #[test]
    fn basis_pursuit_examples() {
        let r = basis_pursuit(&op(&[&[(0, 1.0), (1, 0.5)]]), &[1.0]).unwrap();
        assert!((r.objective - 1.0).abs() < 1e-12);
        assert_eq!(r.solution, seq(&[(0, 1.0)]));
        let r = basis_pursuit(&op(&[&[(0, 1.0)], &[(1, 1.0)]]), &[2.0, 3.0]).unwrap();
        assert!((r.objective - 5.0).abs() < 1e-12);
        assert_eq!(r.solution, seq(&[(0, 2.0), (1, 3.0)]));
        let r = basis_pursuit(&op(&[&[(0, 1.0)]]), &[0.0]).unwrap();
        assert_eq!(r.objective, 0.0);
        assert!(r.solution.is_empty());
    }

    #[test]
    fn basis_pursuit_inconsistent_data() {
        let o = op(&[&[(0, 1.0), (1, 1.0)], &[(0, 2.0), (1, 2.0)]]);
        assert!(matches!(basis_pursuit(&o, &[1.0, 3.0]), Err(Error::Infeasible)));
    }

    #[test]
    fn dual_examples() {
        let d = dual_inf_norm_lp(&op(&[&[(0, 1.0), (1, 0.5)]]), &[1.0]).unwrap();
        assert!((d.c_hat[0] - 1.0).abs() < 1e-14 && (d.value - 1.0).abs() < 1e-14);
        assert!((d.infimum() - 1.0).abs() < 1e-14);
        let d = dual_inf_norm_lp(&op(&[&[(0, 1.0)]]), &[2.0]).unwrap();
        assert!((d.c_hat[0] - 0.5).abs() < 1e-14 && (d.infimum() - 2.0).abs() < 1e-14);
        let d = dual_inf_norm_lp(&op(&[&[(0, 1.0)], &[(1, 1.0)]]), &[1.0, 0.0]).unwrap();
        assert!((d.value - 1.0).abs() < 1e-14 && (d.c_hat[0] - 1.0).abs() < 1e-14);
        assert!(matches!(
            dual_inf_norm_lp(&op(&[&[(0, 1.0)]]), &[0.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn reconstruct_examples() {
        let o = op(&[&[(0, 1.0), (1, 0.5)]]);
        let x = reconstruct_from_dual(&o, &[1.0], &[1.0]).unwrap();
        assert_eq!(x, seq(&[(0, 1.0)]));

        let o = op(&[&[(0, 1.0)], &[(1, 1.0)]]);
        let y = [2.0, 3.0];
        let d = dual_inf_norm_lp(&o, &y).unwrap();
        let x = reconstruct_from_dual(&o, &y, &d.c_hat).unwrap();
        let lx = o.apply(&x);
        assert!((lx[0] - 2.0).abs() < 1e-12 && (lx[1] - 3.0).abs() < 1e-12);
        assert!((x.norm_l1() - 5.0).abs() < 1e-12);

        for alpha in [2.5, -0.5] {
            let ys: Vec<f64> = y.iter().map(|v| alpha * v).collect();
            let cs: Vec<f64> = d.c_hat.iter().map(|v| v / alpha).collect();
            let xs = reconstruct_from_dual(&o, &ys, &cs).unwrap();
            let diff = SparseSeq::combine(1.0, &xs, -alpha, &x);
            assert!(diff.norm_linf() < 1e-12, "{alpha}: {xs:?}");
        }
    }

    #[test]
    fn reconstruct_rejects_non_optimal_dual() {
        let o = op(&[&[(0, 1.0)], &[(1, 1.0)]]);
        let r = reconstruct_from_dual(&o, &[2.0, 3.0], &[0.5, 0.0]);
        assert!(matches!(r, Err(Error::NumericalDuality(_))));
    }
}
