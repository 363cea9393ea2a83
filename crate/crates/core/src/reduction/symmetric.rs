//! Permutation-invariant operators on `n` qubits in Schur–Weyl block form.
//!
//! An operator commuting with every qubit permutation is `⊕_d X_d ⊗ I_{m_d}`
//! with `d = n, n-2, ...` (twice the total spin), `X_d` acting on a `(d+1)`
//! dimensional irrep of `GL(2)` and `m_d` the multiplicity. A tensor power
//! `M^{⊗n}` contributes `det(M)^{(n-d)/2} Sym^d(M)` to block `d`.

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64, ZERO};

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `Sym^d(M)` in the orthonormal basis of normalized symmetric monomials.
pub fn symmetric_power(m: &ComplexMatrix, d: usize) -> ComplexMatrix {
    let (m00, m01, m10, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let mut out = ComplexMatrix::zeros(d + 1, d + 1);
    for b in 0..=d {
        // image of e0^{d-b} e1^b: (m00 e0 + m10 e1)^{d-b} (m01 e0 + m11 e1)^b,
        // as a polynomial in the e1 exponent
        let mut poly = vec![C64::new(1.0, 0.0)];
        let mut times = |lo: C64, hi: C64| {
            let mut next = vec![ZERO; poly.len() + 1];
            for (k, c) in poly.iter().enumerate() {
                next[k] += c * lo;
                next[k + 1] += c * hi;
            }
            poly = next;
        };
        for _ in 0..d - b {
            times(m00, m10);
        }
        for _ in 0..b {
            times(m01, m11);
        }
        for (a, c) in poly.iter().enumerate() {
            out[(a, b)] = c * (binomial(d, b) / binomial(d, a)).sqrt();
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct SymBlock {
    /// `2j`; the block acts on `d + 1` dimensions.
    pub d: usize,
    pub multiplicity: f64,
    pub matrix: ComplexMatrix,
}

#[derive(Clone, Debug)]
pub struct SymmetricOperator {
    n: usize,
    blocks: Vec<SymBlock>,
}

impl SymmetricOperator {
    /// `sum_k c_k M_k^{⊗n}` for 2x2 matrices `M_k`.
    pub fn from_tensor_powers(n: usize, terms: &[(C64, ComplexMatrix)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one qubit".into()));
        }
        for (_, m) in terms {
            if m.rows() != 2 || m.cols() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    found: m.rows(),
                });
            }
        }
        let mut blocks = Vec::new();
        let mut d = n as i64;
        while d >= 0 {
            let du = d as usize;
            let q = (n - du) / 2;
            let multiplicity = binomial(n, q) - if q > 0 { binomial(n, q - 1) } else { 0.0 };
            let mut matrix = ComplexMatrix::zeros(du + 1, du + 1);
            for (c, m) in terms {
                let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
                matrix.add_scaled(&symmetric_power(m, du), c * det.powu(q as u32));
            }
            blocks.push(SymBlock {
                d: du,
                multiplicity,
                matrix,
            });
            d -= 2;
        }
        Ok(Self { n, blocks })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[SymBlock] {
        &self.blocks
    }

    /// `sum_d m_d (d + 1)`, which must equal `2^n`.
    pub fn represented_dimension(&self) -> f64 {
        self.blocks.iter().map(|b| b.multiplicity * (b.d + 1) as f64).sum()
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.multiplicity * b.matrix.trace().re).sum()
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| SymBlock {
                d: a.d,
                multiplicity: a.multiplicity,
                matrix: &a.matrix - &b.matrix,
            })
            .collect();
        Ok(Self { n: self.n, blocks })
    }

    /// `||X||_1` for Hermitian `X`.
    pub fn trace_norm(&self) -> Result<f64> {
        let mut total = 0.0;
        for b in &self.blocks {
            total += b.multiplicity * linalg::trace_norm_hermitian(&b.matrix.hermitian_part())?;
        }
        Ok(total)
    }

    /// `||X||_1` for any `X`, from singular values.
    pub fn nuclear_norm(&self) -> Result<f64> {
        let mut total = 0.0;
        for b in &self.blocks {
            total += b.multiplicity * linalg::nuclear_norm(&b.matrix)?;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::gates;

    #[test]
    fn dimensions_add_up() {
        for n in 1..10 {
            let op = SymmetricOperator::from_tensor_powers(n, &[(C64::new(1.0, 0.0), gates::identity())]).unwrap();
            assert_eq!(op.represented_dimension(), (1u64 << n) as f64);
            assert!((op.trace() - (1u64 << n) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_power_is_a_homomorphism() {
        let a = &gates::h() * &gates::phase(0.3);
        let b = &gates::s() * &gates::x();
        let ab = &a * &b;
        for d in 0..6 {
            let lhs = symmetric_power(&ab, d);
            let rhs = &symmetric_power(&a, d) * &symmetric_power(&b, d);
            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
        let u = symmetric_power(&a, 5);
        let uu = &u * &u.dagger();
        assert!(uu.max_abs_diff(&ComplexMatrix::identity(6)) < 1e-12);
    }
}
