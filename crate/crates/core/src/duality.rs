//! Duality maps and norm subdifferentials for lq, c0 and l1.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::seq::{check_exponent, SparseSeq};

/// Relative tolerance used to decide which entries attain the sup-norm.
pub const FACE_REL_TOL: f64 = 1e-9;

/// The duality map of lq: `u_j |u_j|^(q-2) / ||u||_q^(q-2)`.
///
/// The result has lp norm `||u||_q` and pairs with `u` to `||u||_q^2`.
/// Maps zero to zero.
pub fn dmap_lq(u: &SparseSeq, q: f64) -> Result<SparseSeq> {
    check_exponent(q)?;
    let norm = u.norm_lp(q);
    if norm == 0.0 {
        return Ok(SparseSeq::new());
    }
    // |u|^(q-1) / N^(q-2) == N * (|u| / N)^(q-1)
    Ok(u.map_values(|v| v.signum() * norm * (v.abs() / norm).powf(q - 1.0)))
}

/// The face of the unit ball of l1 exposed by `u`, i.e. the structure of
/// the subdifferential of the sup-norm at a nonzero `u` in c0.
#[derive(Clone, Debug, PartialEq)]
pub struct SubdiffFaceLinf {
    pub norm_value: f64,
    /// Indices attaining the norm, ascending.
    pub max_indices: Vec<usize>,
    pub signs: BTreeMap<usize, i8>,
}

impl SubdiffFaceLinf {
    /// Vertices `sign(u_j) e_j` of the face.
    pub fn vertices(&self) -> Vec<SparseSeq> {
        self.signs
            .iter()
            .map(|(&j, &s)| SparseSeq::unit(j).scale(f64::from(s)))
            .collect()
    }
}

/// Indices where `|u_j| >= (1 - rel_tol) ||u||_inf`. Empty for `u = 0`.
pub fn face_indices(u: &SparseSeq, rel_tol: f64) -> Vec<usize> {
    let norm = u.norm_linf();
    if norm == 0.0 {
        return Vec::new();
    }
    let cut = (1.0 - rel_tol) * norm;
    u.iter().filter(|&(_, v)| v.abs() >= cut).map(|(i, _)| i).collect()
}

pub fn linf_face(u: &SparseSeq) -> Result<SubdiffFaceLinf> {
    linf_face_tol(u, FACE_REL_TOL)
}

pub fn linf_face_tol(u: &SparseSeq, rel_tol: f64) -> Result<SubdiffFaceLinf> {
    if u.is_empty() {
        return Err(Error::Degenerate(
            "the sup-norm subdifferential at zero is the whole unit ball".into(),
        ));
    }
    let max_indices = face_indices(u, rel_tol);
    let signs = max_indices
        .iter()
        .map(|&j| (j, if u.get(j) > 0.0 { 1 } else { -1 }))
        .collect();
    Ok(SubdiffFaceLinf {
        norm_value: u.norm_linf(),
        max_indices,
        signs,
    })
}

/// Keeps only the entries of `u` attaining its sup-norm.
pub fn truncate_s(u: &SparseSeq) -> SparseSeq {
    truncate_s_tol(u, FACE_REL_TOL)
}

pub fn truncate_s_tol(u: &SparseSeq, rel_tol: f64) -> SparseSeq {
    let norm = u.norm_linf();
    let cut = (1.0 - rel_tol) * norm;
    u.filter(|_, v| v.abs() >= cut)
}

/// Outcome of a membership test with the largest constraint violation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Membership {
    pub inside: bool,
    pub violation: f64,
}

impl Membership {
    fn from_violation(violation: f64, tol: f64) -> Self {
        Membership {
            inside: violation <= tol,
            violation,
        }
    }
}

/// Is `v` in `scale * co{sign(u_j) e_j : j attains ||u||_inf}`?
pub fn linf_subdiff_membership(v: &SparseSeq, u: &SparseSeq, scale: f64, tol: f64) -> Result<Membership> {
    if scale.is_nan() || scale < 0.0 {
        return Err(Error::InvalidParameter(format!("scale must be >= 0, got {scale}")));
    }
    let face = linf_face(u)?;
    let mut violation: f64 = 0.0;
    let mut signed_mass = 0.0;
    for (j, vj) in v.iter() {
        match face.signs.get(&j) {
            Some(&s) => {
                let aligned = vj * f64::from(s);
                violation = violation.max(-aligned);
                signed_mass += aligned;
            }
            None => violation = violation.max(vj.abs()),
        }
    }
    violation = violation.max((signed_mass - scale).abs());
    Ok(Membership::from_violation(violation, tol))
}

/// Is `u` in the subdifferential of `||.||_1` at `x`?
pub fn l1_subdiff_membership(u: &SparseSeq, x: &SparseSeq, tol: f64) -> Membership {
    let mut violation: f64 = u.iter().fold(0.0, |m, (_, v)| m.max(v.abs() - 1.0));
    for (j, xj) in x.iter() {
        violation = violation.max((u.get(j) - xj.signum()).abs());
    }
    Membership::from_violation(violation.max(0.0), tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(pairs: &[(usize, f64)]) -> SparseSeq {
        SparseSeq::from_pairs(pairs.to_vec()).unwrap()
    }

    fn close(a: &SparseSeq, b: &SparseSeq, tol: f64) -> bool {
        SparseSeq::combine(1.0, a, -1.0, b).norm_linf() <= tol
    }

    #[test]
    fn dmap_examples() {
        let u = seq(&[(0, 3.0), (1, 4.0)]);
        assert!(close(&dmap_lq(&u, 2.0).unwrap(), &u, 1e-15));
        assert!(dmap_lq(&SparseSeq::new(), 1.7).unwrap().is_empty());
        let c = 2f64.powf(-1.5);
        let got = dmap_lq(&seq(&[(0, c), (1, c)]), 4.0 / 3.0).unwrap();
        assert!(close(&got, &seq(&[(0, 0.5), (1, 0.5)]), 1e-14), "{got:?}");
        assert!(dmap_lq(&u, 1.0).is_err());
    }

    #[test]
    fn face_examples() {
        let f = linf_face(&seq(&[(0, 3.0), (1, -3.0), (2, 1.0)])).unwrap();
        assert_eq!(f.norm_value, 3.0);
        assert_eq!(f.max_indices, vec![0, 1]);
        assert_eq!(f.signs, BTreeMap::from([(0, 1), (1, -1)]));

        let f = linf_face(&seq(&[(5, -2.0)])).unwrap();
        assert_eq!((f.norm_value, f.max_indices.clone()), (2.0, vec![5]));
        assert_eq!(f.signs[&5], -1);

        let f = linf_face(&seq(&[(0, 1.0), (1, 1.0), (2, 1.0)])).unwrap();
        assert_eq!(f.max_indices, vec![0, 1, 2]);
        assert!(f.signs.values().all(|&s| s == 1));

        assert!(matches!(linf_face(&SparseSeq::new()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn face_uses_relative_tolerance() {
        let u = seq(&[(0, 1.0), (1, 1.0 - 1e-12), (2, 1.0 - 1e-6)]);
        assert_eq!(linf_face(&u).unwrap().max_indices, vec![0, 1]);
        assert_eq!(linf_face_tol(&u, 1e-5).unwrap().max_indices, vec![0, 1, 2]);
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(
            truncate_s(&seq(&[(0, 2.0), (1, -2.0), (2, 1.0)])),
            seq(&[(0, 2.0), (1, -2.0)])
        );
        assert!(truncate_s(&SparseSeq::new()).is_empty());
        assert_eq!(truncate_s(&seq(&[(0, 1.0)])), seq(&[(0, 1.0)]));
    }

    #[test]
    fn linf_membership_examples() {
        let u = seq(&[(0, 3.0), (1, -3.0)]);
        assert!(
            linf_subdiff_membership(&seq(&[(0, 3.0)]), &u, 3.0, 1e-12)
                .unwrap()
                .inside
        );
        assert!(
            linf_subdiff_membership(&seq(&[(0, 1.5), (1, -1.5)]), &u, 3.0, 1e-12)
                .unwrap()
                .inside
        );
        let out = linf_subdiff_membership(&seq(&[(2, 1.0)]), &u, 3.0, 1e-12).unwrap();
        assert!(!out.inside && out.violation >= 1.0);
        // wrong sign on a face index
        assert!(
            !linf_subdiff_membership(&seq(&[(1, 3.0)]), &u, 3.0, 1e-12)
                .unwrap()
                .inside
        );
        assert!(linf_subdiff_membership(&seq(&[(0, 1.0)]), &SparseSeq::new(), 1.0, 1e-12).is_err());
    }

    #[test]
    fn l1_membership_examples() {
        assert!(l1_subdiff_membership(&seq(&[(0, 1.0), (1, -0.3)]), &seq(&[(0, 5.0)]), 1e-12).inside);
        assert!(!l1_subdiff_membership(&seq(&[(0, 1.2)]), &SparseSeq::new(), 1e-12).inside);
        assert!(!l1_subdiff_membership(&seq(&[(0, -1.0)]), &seq(&[(0, 5.0)]), 1e-12).inside);
    }

    #[test]
    fn vertices_of_face() {
        let f = linf_face(&seq(&[(0, 3.0), (1, -3.0), (2, 1.0)])).unwrap();
        assert_eq!(f.vertices(), vec![seq(&[(0, 1.0)]), seq(&[(1, -1.0)])]);
    }
}
