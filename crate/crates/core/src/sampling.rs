//! The sampling operator built from `m` functionals given as sparse rows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::seq::SparseSeq;

/// Dense coefficient vector of length `m`.
pub type Coefs = Vec<f64>;

/// Smallest singular value below which rows are reported as dependent.
pub const INDEPENDENCE_THRESHOLD: f64 = 1e-10;

/// `m` functionals `nu_j`, each a finitely supported sequence.
///
/// `apply` evaluates the sampling map `x -> [<nu_j, x>]`, `adjoint` maps a
/// coefficient vector back to `sum_j c_j nu_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SparseSeq>", into = "Vec<SparseSeq>")]
pub struct SamplingOperator {
    rows: Vec<SparseSeq>,
}

impl TryFrom<Vec<SparseSeq>> for SamplingOperator {
    type Error = Error;
    fn try_from(rows: Vec<SparseSeq>) -> Result<Self> {
        SamplingOperator::new(rows)
    }
}

impl From<SamplingOperator> for Vec<SparseSeq> {
    fn from(op: SamplingOperator) -> Self {
        op.rows
    }
}

/// The operator restricted to the union support of its rows, as an
/// `m x n` dense matrix. Column `k` corresponds to sequence index
/// `indices[k]`.
#[derive(Clone, Debug)]
pub struct DenseRestriction {
    pub indices: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

impl DenseRestriction {
    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn to_seq(&self, x: &DVector<f64>) -> SparseSeq {
        SparseSeq::from_dense_at(&self.indices, x.as_slice())
    }

    pub fn from_seq(&self, x: &SparseSeq) -> DVector<f64> {
        DVector::from_vec(x.gather(&self.indices))
    }
}

impl SamplingOperator {
    pub fn new(rows: Vec<SparseSeq>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter(
                "sampling operator needs at least one functional".into(),
            ));
        }
        Ok(SamplingOperator { rows })
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SparseSeq] {
        &self.rows
    }

    /// `L(x)_j = <nu_j, x>`.
    pub fn apply(&self, x: &SparseSeq) -> Coefs {
        self.rows.iter().map(|r| r.inner(x)).collect()
    }

    /// `L*(c) = sum_j c_j nu_j`.
    pub fn adjoint(&self, c: &[f64]) -> Result<SparseSeq> {
        if c.len() != self.m() {
            return Err(mismatch(self.m(), c.len(), "coefficients vs functionals"));
        }
        let indices = self.union_support();
        let mut acc = vec![0.0; indices.len()];
        for (row, &cj) in self.rows.iter().zip(c) {
            if cj == 0.0 {
                continue;
            }
            for (i, v) in row.iter() {
                let k = indices.binary_search(&i).expect("index in union support");
                acc[k] += cj * v;
            }
        }
        Ok(SparseSeq::from_dense_at(&indices, &acc))
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.m();
        let mut g = DMatrix::zeros(m, m);
        for j in 0..m {
            for k in j..m {
                let v = self.rows[j].inner(&self.rows[k]);
                g[(j, k)] = v;
                g[(k, j)] = v;
            }
        }
        g
    }

    /// Sorted union of the row supports.
    pub fn union_support(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.rows.iter().flat_map(|r| r.support()).collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    pub fn dense(&self) -> DenseRestriction {
        let indices = self.union_support();
        let mut matrix = DMatrix::zeros(self.m(), indices.len());
        for (j, row) in self.rows.iter().enumerate() {
            for (i, v) in row.iter() {
                let k = indices.binary_search(&i).expect("index in union support");
                matrix[(j, k)] = v;
            }
        }
        DenseRestriction { indices, matrix }
    }

    /// Smallest singular value of the dense restriction (0 when it has
    /// fewer columns than rows).
    pub fn smallest_singular_value(&self) -> f64 {
        let d = self.dense();
        if d.n() < d.m() {
            return 0.0;
        }
        crate::linalg::min_eigenvalue(&self.gram()).max(0.0).sqrt()
    }

    /// `Some(message)` when the rows are numerically dependent. Dependent
    /// rows are allowed; solvers that need independence fail on their own.
    pub fn independence_warning(&self) -> Option<String> {
        let s = self.smallest_singular_value();
        (s <= INDEPENDENCE_THRESHOLD)
            .then(|| format!("functionals are numerically dependent (smallest singular value {s:e})"))
    }

    pub(crate) fn check_data(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.m() {
            return Err(mismatch(self.m(), y.len(), "data vs functionals"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("data contains non-finite values".into()));
        }
        Ok(())
    }
}
