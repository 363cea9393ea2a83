//! Squaring the overlap of a pair of states: a fixed isometry takes
//! `|+>|0>, |+_phi>|0>` to `|+>|+>, |+_phi'>|+_phi'>` with
//! `|<+|+_phi>| = |<+|+_phi'>|^2`, so overlap `c` becomes `sqrt c`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64, ONE, ZERO};
use crate::states::plus_state_radians;

/// One halving step.
#[derive(Clone, Debug, Serialize)]
pub struct OverlapHalving {
    pub phi: f64,
    pub phi_prime: f64,
    /// `|<+|+_phi>|`
    pub overlap_in: f64,
    /// `|<+|+_phi'>|`
    pub overlap_out: f64,
    /// Largest entry of the difference between the input and output Gram matrices.
    pub gram_defect: f64,
    /// `max |U^†U - I|` over the whole space.
    pub isometry_defect: f64,
    /// Largest deviation of `U|in_k>` from `|out_k>` (phases included).
    pub map_defect: f64,
    #[serde(skip)]
    pub unitary: ComplexMatrix,
}

fn input_pair(phi: f64) -> [Vec<C64>; 2] {
    let zero = [ONE, ZERO];
    [
        linalg::kron_vec(plus_state_radians(0.0).amplitudes(), &zero),
        linalg::kron_vec(plus_state_radians(phi).amplitudes(), &zero),
    ]
}

fn output_pair(phi: f64, phi_prime: f64) -> [Vec<C64>; 2] {
    let a = plus_state_radians(0.0);
    let b = plus_state_radians(phi_prime);
    let phase = C64::from_polar(1.0, phi / 2.0 - phi_prime);
    [
        linalg::kron_vec(a.amplitudes(), a.amplitudes()),
        linalg::kron_vec(b.amplitudes(), b.amplitudes())
            .into_iter()
            .map(|z| z * phase)
            .collect(),
    ]
}

fn gram(v: &[Vec<C64>; 2]) -> [[C64; 2]; 2] {
    [
        [linalg::inner(&v[0], &v[0]), linalg::inner(&v[0], &v[1])],
        [linalg::inner(&v[1], &v[0]), linalg::inner(&v[1], &v[1])],
    ]
}

/// Orthonormal basis of `C^dim` whose first vectors span `seed`.
fn extend_to_basis(seed: &[Vec<C64>], dim: usize) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(dim);
    let candidates = seed.iter().cloned().chain((0..dim).map(|k| {
        let mut e = vec![ZERO; dim];
        e[k] = ONE;
        e
    }));
    for mut v in candidates {
        for b in &basis {
            let c = linalg::inner(b, &v);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        let n = linalg::norm(&v);
        if n > 1e-8 {
            basis.push(v.into_iter().map(|z| z / n).collect());
        }
        if basis.len() == dim {
            break;
        }
    }
    basis
}

/// `phi' = 2 arccos(sqrt|cos(phi/2)|)`, and the unitary realizing the step.
pub fn overlap_halve(phi: f64) -> Result<OverlapHalving> {
    if !(phi > 0.0 && phi < std::f64::consts::PI) {
        return Err(Error::InvalidArgument(format!(
            "phi = {phi} must lie strictly between 0 and pi (states neither identical nor orthogonal)"
        )));
    }
    let phi_prime = 2.0 * (phi / 2.0).cos().abs().sqrt().acos();
    let ins = input_pair(phi);
    let outs = output_pair(phi, phi_prime);
    let (gi, go) = (gram(&ins), gram(&outs));
    let mut gram_defect: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            gram_defect = gram_defect.max((gi[r][c] - go[r][c]).norm());
        }
    }

    // Gram-Schmidt on both pairs gives matching coefficients because the
    // Gram matrices agree; the complements are paired off arbitrarily.
    let e = extend_to_basis(&ins, 4);
    let f = extend_to_basis(&outs, 4);
    let mut unitary = ComplexMatrix::zeros(4, 4);
    for (ek, fk) in e.iter().zip(&f) {
        unitary.add_scaled(&ComplexMatrix::outer(fk, ek), ONE);
    }
    let isometry_defect = (&unitary.dagger() * &unitary).max_abs_diff(&ComplexMatrix::identity(4));
    let mut map_defect: f64 = 0.0;
    for (i, o) in ins.iter().zip(&outs) {
        let image = unitary.matvec(i)?;
        for (a, b) in image.iter().zip(o) {
            map_defect = map_defect.max((a - b).norm());
        }
    }
    Ok(OverlapHalving {
        phi,
        phi_prime,
        overlap_in: (phi / 2.0).cos().abs(),
        overlap_out: (phi_prime / 2.0).cos().abs(),
        gram_defect,
        isometry_defect,
        map_defect,
        unitary,
    })
}

/// `steps` successive halvings starting from `phi`.
pub fn overlap_halve_iterated(phi: f64, steps: usize) -> Result<Vec<OverlapHalving>> {
    let mut out = Vec::with_capacity(steps);
    let mut current = phi;
    for _ in 0..steps {
        let step = overlap_halve(current)?;
        current = step.phi_prime;
        out.push(step);
    }
    Ok(out)
}
