//! Small complex linear-algebra helpers shared by the beamforming modules.

use nalgebra::linalg::Cholesky;
use nalgebra::{DMatrix, DVector, Dyn};

use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Sum of squared moduli.
pub fn norm_sq(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Stacks vectors end to end.
pub fn stack(parts: &[CVector]) -> CVector {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = CVector::zeros(len);
    let mut at = 0;
    for p in parts {
        out.rows_mut(at, p.len()).copy_from(p);
        at += p.len();
    }
    out
}

/// Splits a stacked vector into `count` equal blocks.
pub fn split(v: &CVector, count: usize) -> Vec<CVector> {
    let block = v.len() / count;
    (0..count)
        .map(|k| v.rows(k * block, block).into_owned())
        .collect()
}

/// Hermitian positive-definite operator `scale * I + U U^H` with a thin `U`.
///
/// Solves use the Woodbury identity, so the cost is linear in the ambient
/// dimension and cubic only in the number of columns of `U`.
pub struct ScaledIdentityPlusLowRank {
    scale: f64,
    basis: CMatrix,
    inner: Option<Cholesky<Complex64, Dyn>>,
}

impl ScaledIdentityPlusLowRank {
    pub fn new(scale: f64, columns: &[CVector], dim: usize) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::Domain(format!(
                "identity weight must be positive, got {scale}"
            )));
        }
        if columns.is_empty() {
            return Ok(Self {
                scale,
                basis: CMatrix::zeros(dim, 0),
                inner: None,
            });
        }
        let basis = CMatrix::from_columns(columns);
        let mut gram = basis.adjoint() * &basis;
        for k in 0..gram.nrows() {
            gram[(k, k)] += Complex64::new(scale, 0.0);
        }
        let inner = Cholesky::new(gram)
            .ok_or_else(|| Error::Domain("low-rank capacitance matrix not positive definite".into()))?;
        Ok(Self {
            scale,
            basis,
            inner: Some(inner),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Returns `(scale I + U U^H)^{-1} y`.
    pub fn solve(&self, y: &CVector) -> CVector {
        match &self.inner {
            None => y.unscale(self.scale),
            Some(chol) => {
                let proj = self.basis.adjoint() * y;
                let coeff = chol.solve(&proj);
                (y - &self.basis * coeff).unscale(self.scale)
            }
        }
    }

    /// Dense form, for diagnostics and small cross-checks.
    pub fn to_dense(&self) -> CMatrix {
        let n = self.dim();
        let mut m = &self.basis * self.basis.adjoint();
        for k in 0..n {
            m[(k, k)] += Complex64::new(self.scale, 0.0);
        }
        m
    }
}

/// Real symmetric positive (semi)definite solve with a small ridge fallback.
pub(crate) fn solve_spd_real(mut h: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let trace: f64 = (0..n).map(|k| h[(k, k)]).sum::<f64>().abs().max(f64::MIN_POSITIVE);
    let mut ridge = 0.0;
    for _ in 0..8 {
        if let Some(chol) = Cholesky::new(h.clone()) {
            return Some(chol.solve(rhs));
        }
        let bump = if ridge == 0.0 { 1e-14 * trace / n as f64 } else { ridge * 9.0 };
        for k in 0..n {
            h[(k, k)] += bump;
        }
        ridge += bump;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn woodbury_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cols: Vec<CVector> = (0..4).map(|_| random_vec(&mut rng, 12)).collect();
        let op = ScaledIdentityPlusLowRank::new(0.01, &cols, 12).unwrap();
        let y = random_vec(&mut rng, 12);
        let fast = op.solve(&y);
        let dense = Cholesky::new(op.to_dense()).unwrap().solve(&y);
        assert!((fast - dense).norm() < 1e-9);
    }

    #[test]
    fn empty_basis_is_scaled_identity() {
        let op = ScaledIdentityPlusLowRank::new(2.0, &[], 3).unwrap();
        let y = CVector::from_element(3, Complex64::new(4.0, -2.0));
        let x = op.solve(&y);
        assert_eq!(x[1], Complex64::new(2.0, -1.0));
    }

    #[test]
    fn stack_and_split_are_inverse() {
        let a = CVector::from_element(3, Complex64::new(1.0, 0.0));
        let b = CVector::from_element(3, Complex64::new(0.0, 1.0));
        let s = stack(&[a.clone(), b.clone()]);
        assert_eq!(split(&s, 2), vec![a, b]);
    }
}
