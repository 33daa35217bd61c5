//! Closed-form proximity operators and a golden-section oracle.
//!
//! Convention: `prox_{s f}(a) = argmin_b 1/2 |a - b|^2 + s f(b)`.

use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::seq::SparseSeq;

/// Loss kinds of the regularization problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    /// `||z - y||^2`
    Square,
    /// `sum_j max(1 - y_j z_j, 0)` with labels in {-1, +1}
    Hinge,
    /// `sum_j max(|z_j - y_j| - eps, 0)`
    EpsInsensitive { eps: f64 },
}

/// A loss together with its data vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub y: Vec<f64>,
}

impl LossSpec {
    pub fn new(kind: LossKind, y: Vec<f64>) -> Result<Self> {
        match kind {
            LossKind::Hinge => {
                if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "hinge labels must be -1 or +1, got {v}"
                    )));
                }
            }
            LossKind::EpsInsensitive { eps } => {
                if !(eps > 0.0 && eps.is_finite()) {
                    return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
                }
            }
            LossKind::Square => {}
        }
        Ok(LossSpec { kind, y })
    }

    pub fn is_differentiable(&self) -> bool {
        matches!(self.kind, LossKind::Square)
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(&self.y)
            .map(|(&zj, &yj)| scalar_loss(self.kind, zj, yj))
            .sum()
    }

    /// Gradient of the square loss, `2 (z - y)`.
    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            LossKind::Square => Ok(z.iter().zip(&self.y).map(|(a, b)| 2.0 * (a - b)).collect()),
            _ => Err(Error::InvalidParameter("loss is not differentiable".into())),
        }
    }

    /// Nearest point of the domain of the conjugate `Q_y^*`.
    pub fn project_conjugate_domain(&self, w: &[f64]) -> Vec<f64> {
        w.iter()
            .zip(&self.y)
            .map(|(&wj, &yj)| match self.kind {
                LossKind::Square => wj,
                LossKind::Hinge => yj * (yj * wj).clamp(-1.0, 0.0),
                LossKind::EpsInsensitive { .. } => wj.clamp(-1.0, 1.0),
            })
            .collect()
    }

    /// `Q_y^*(w)`, infinite outside its domain.
    pub fn conjugate_value(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(&self.y)
            .map(|(&wj, &yj)| match self.kind {
                LossKind::Square => wj * yj + 0.25 * wj * wj,
                LossKind::Hinge if (-1.0..=0.0).contains(&(wj * yj)) => wj * yj,
                LossKind::EpsInsensitive { eps } if wj.abs() <= 1.0 => wj * yj + eps * wj.abs(),
                _ => f64::INFINITY,
            })
            .sum()
    }
}

pub fn scalar_loss(kind: LossKind, z: f64, y: f64) -> f64 {
    match kind {
        LossKind::Square => (z - y) * (z - y),
        LossKind::Hinge => (1.0 - y * z).max(0.0),
        LossKind::EpsInsensitive { eps } => ((z - y).abs() - eps).max(0.0),
    }
}

fn check_step(name: &str, s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {s}")))
    }
}

#[inline]
pub fn shrink(v: f64, tau: f64) -> f64 {
    (v.abs() - tau).max(0.0) * v.signum()
}

/// Prox of `tau ||.||_1`: componentwise `sign(x_j) max(|x_j| - tau, 0)`.
pub fn soft_threshold(x: &SparseSeq, tau: f64) -> SparseSeq {
    x.map_values(|v| shrink(v, tau))
}

/// Prox of `sigma * iota_y^*`, the conjugate of the indicator of `{y}`:
/// `a - sigma y`.
pub fn prox_indicator_conj(a: &[f64], y: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if a.len() != y.len() {
        return Err(mismatch(y.len(), a.len(), "point vs data"));
    }
    check_step("sigma", sigma)?;
    Ok(a.iter().zip(y).map(|(ai, yi)| ai - sigma * yi).collect())
}

/// Prox of `sigma max(1 - y b, 0)` for a label `y` in {-1, +1}.
pub fn prox_hinge(a: f64, y: f64, sigma: f64) -> f64 {
    let t = y * a;
    if t >= 1.0 {
        a
    } else if t >= 1.0 - sigma {
        y
    } else {
        a + sigma * y
    }
}

/// Prox of `sigma max(|b - y| - eps, 0)`.
pub fn prox_eps_insensitive(a: f64, y: f64, eps: f64, sigma: f64) -> f64 {
    let d = a - y;
    if d > eps + sigma {
        a - sigma
    } else if d > eps {
        y + eps
    } else if d >= -eps {
        a
    } else if d >= -eps - sigma {
        y - eps
    } else {
        a + sigma
    }
}

/// Prox of `sigma Q_y` for the losses above. For the square loss this is
/// `(a + 2 sigma y) / (1 + 2 sigma)`.
pub fn prox_vector_loss(a: &[f64], loss: &LossSpec, sigma: f64) -> Result<Vec<f64>> {
    if a.len() != loss.y.len() {
        return Err(mismatch(loss.y.len(), a.len(), "point vs loss data"));
    }
    check_step("sigma", sigma)?;
    let it = a.iter().zip(&loss.y);
    Ok(match loss.kind {
        LossKind::Square => it
            .map(|(&ai, &yi)| (ai + 2.0 * sigma * yi) / (1.0 + 2.0 * sigma))
            .collect(),
        LossKind::Hinge => it.map(|(&ai, &yi)| prox_hinge(ai, yi, sigma)).collect(),
        LossKind::EpsInsensitive { eps } => it.map(|(&ai, &yi)| prox_eps_insensitive(ai, yi, eps, sigma)).collect(),
    })
}

/// Prox of `sigma f^*` from a prox of `f` via the Moreau identity:
/// `a - sigma prox_{f / sigma}(a / sigma)`.
///
/// `prox_f(point, s)` must return the prox of `s f` at `point`.
pub fn prox_conjugate_via_moreau<F>(prox_f: F, a: &[f64], sigma: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], f64) -> Result<Vec<f64>>,
{
    check_step("sigma", sigma)?;
    let scaled: Vec<f64> = a.iter().map(|v| v / sigma).collect();
    let p = prox_f(&scaled, 1.0 / sigma)?;
    if p.len() != a.len() {
        return Err(mismatch(a.len(), p.len(), "prox output"));
    }
    Ok(a.iter().zip(&p).map(|(ai, pi)| ai - sigma * pi).collect())
}

/// Prox of `sigma Q_y^*`.
pub fn prox_loss_conjugate(a: &[f64], loss: &LossSpec, sigma: f64) -> Result<Vec<f64>> {
    prox_conjugate_via_moreau(|b, s| prox_vector_loss(b, loss, s), a, sigma)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Numeric prox `argmin_b 1/2 (a - b)^2 + objective(b)` on the bracket
/// `[a - half_width, a + half_width]` by golden-section search down to an
/// interval of width `1e-10`.
///
/// Fails when the minimizer sits on the bracket boundary or the objective
/// returns a non-finite value.
pub fn prox_numeric_oracle_1d<F>(objective: F, a: f64, half_width: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let h = |b: f64| 0.5 * (a - b) * (a - b) + objective(b);
    let (lo0, hi0) = (a - half_width, a + half_width);
    let (mut lo, mut hi) = (lo0, hi0);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (h(x1), h(x2));
    while hi - lo > 1e-10 {
        if !(f1.is_finite() && f2.is_finite()) {
            return Err(Error::Oracle("objective is not finite on the bracket".into()));
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = h(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = h(x2);
        }
    }
    let b = 0.5 * (lo + hi);
    let edge = 1e-8 * (1.0 + half_width);
    if b - lo0 < edge || hi0 - b < edge {
        return Err(Error::Oracle(format!("minimizer not bracketed in [{lo0}, {hi0}]")));
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(pairs: &[(usize, f64)]) -> SparseSeq {
        SparseSeq::from_pairs(pairs.to_vec()).unwrap()
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&seq(&[(0, 2.0), (1, -0.5)]), 1.0), seq(&[(0, 1.0)]));
        assert!(soft_threshold(&SparseSeq::new(), 1.0).is_empty());
        assert_eq!(soft_threshold(&seq(&[(0, -3.0)]), 1.0), seq(&[(0, -2.0)]));
        let oracle = prox_numeric_oracle_1d(|b| b.abs(), -3.0, 2.0).unwrap();
        assert!((oracle + 2.0).abs() < 1e-7);
    }

    #[test]
    fn indicator_conjugate_examples() {
        assert_eq!(
            prox_indicator_conj(&[3.0, 1.0], &[1.0, 1.0], 1.0).unwrap(),
            vec![2.0, 0.0]
        );
        assert_eq!(
            prox_indicator_conj(&[1.5, -2.0], &[1.5, -2.0], 1.0).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            prox_indicator_conj(&[0.0, 0.0], &[1.0, 2.0], 2.0).unwrap(),
            vec![-2.0, -4.0]
        );
        // prox of sigma * iota_y is the constant y, so Moreau gives the same
        let y = [1.0, 2.0];
        let via = prox_conjugate_via_moreau(|_, _| Ok(y.to_vec()), &[0.0, 0.0], 2.0).unwrap();
        assert_eq!(via, vec![-2.0, -4.0]);
        assert!(prox_indicator_conj(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn hinge_examples() {
        assert_eq!(prox_hinge(2.0, 1.0, 1.0), 2.0);
        assert_eq!(prox_hinge(0.5, 1.0, 1.0), 1.0);
        assert_eq!(prox_hinge(0.5, -1.0, 1.0), -0.5);
        let o = prox_numeric_oracle_1d(|b| (1.0 + b).max(0.0), 0.5, 2.0).unwrap();
        assert!((o + 0.5).abs() < 1e-7);
    }

    #[test]
    fn eps_insensitive_examples() {
        assert_eq!(prox_eps_insensitive(3.0, 0.0, 1.0, 1.0), 2.0);
        assert_eq!(prox_eps_insensitive(1.5, 0.0, 1.0, 1.0), 1.0);
        assert_eq!(prox_eps_insensitive(0.7, 0.7, 0.3, 2.0), 0.7);
    }

    #[test]
    fn vector_loss_examples() {
        let sq = LossSpec::new(LossKind::Square, vec![1.0]).unwrap();
        assert!((prox_vector_loss(&[0.0], &sq, 0.5).unwrap()[0] - 0.5).abs() < 1e-15);
        let o = prox_numeric_oracle_1d(|b| 0.5 * (b - 1.0) * (b - 1.0), 0.0, 2.0).unwrap();
        assert!((o - 0.5).abs() < 1e-7);
        let h = LossSpec::new(LossKind::Hinge, vec![1.0, 1.0]).unwrap();
        assert_eq!(prox_vector_loss(&[2.0, 0.5], &h, 1.0).unwrap(), vec![2.0, 1.0]);
        // already a minimizer: y for the square loss
        assert_eq!(prox_vector_loss(&[1.0], &sq, 3.0).unwrap(), vec![1.0]);
        assert!(prox_vector_loss(&[1.0, 2.0], &sq, 1.0).is_err());
    }

    #[test]
    fn loss_validation() {
        assert!(LossSpec::new(LossKind::Hinge, vec![1.0, 0.5]).is_err());
        assert!(LossSpec::new(LossKind::EpsInsensitive { eps: 0.0 }, vec![1.0]).is_err());
    }

    #[test]
    fn moreau_examples() {
        let y = [1.0, 1.0];
        let got = prox_conjugate_via_moreau(|_, _| Ok(y.to_vec()), &[3.0, 1.0], 1.0).unwrap();
        assert_eq!(got, vec![2.0, 0.0]);
        let zero = prox_conjugate_via_moreau(|b, _| Ok(b.to_vec()), &[3.0, -7.0], 2.5).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
        // I - soft threshold projects onto [-1, 1]
        let l1 = |b: &[f64], s: f64| Ok(b.iter().map(|&v| shrink(v, s)).collect());
        assert_eq!(prox_conjugate_via_moreau(l1, &[0.5], 1.0).unwrap(), vec![0.5]);
        assert_eq!(prox_conjugate_via_moreau(l1, &[-4.0], 1.0).unwrap(), vec![-1.0]);
    }

    #[test]
    fn oracle_examples() {
        assert!((prox_numeric_oracle_1d(f64::abs, 2.0, 2.0).unwrap() - 1.0).abs() < 1e-7);
        assert!((prox_numeric_oracle_1d(|_| 0.0, 7.0, 1.0).unwrap() - 7.0).abs() < 1e-7);
        let o = prox_numeric_oracle_1d(|b| (1.0 - b).max(0.0), -1.0, 2.0).unwrap();
        assert!(o.abs() < 1e-7);
        // linear objective pushes the minimizer out of a narrow bracket
        assert!(matches!(
            prox_numeric_oracle_1d(|b| 5.0 * b, 0.0, 1.0),
            Err(Error::Oracle(_))
        ));
    }
}
