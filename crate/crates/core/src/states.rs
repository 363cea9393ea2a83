//! Pure and mixed states, channels, gates and the purification tools used by
//! the simulators.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::angle::Angle;
use crate::error::{Error, Result};
use crate::linalg::{self, eigh, svd_square, ComplexMatrix, C64, ONE, ZERO};

/// Normalization and trace checks on states use this absolute tolerance.
pub const STATE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
    dims: Vec<usize>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if total != amplitudes.len() {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: amplitudes.len(),
            });
        }
        let n = linalg::norm(&amplitudes);
        if (n - 1.0).abs() > STATE_TOLERANCE {
            return Err(Error::NotNormalized { norm: n });
        }
        Ok(Self { amplitudes, dims })
    }

    /// A state on `log2(len)` qubits.
    pub fn qubits(amplitudes: Vec<C64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "{len} amplitudes is not a qubit register"
            )));
        }
        Self::new(amplitudes, vec![2; len.trailing_zeros() as usize])
    }

    /// Rescale a nonzero vector to unit norm.
    pub fn normalized(mut amplitudes: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let n = linalg::norm(&amplitudes);
        if n == 0.0 {
            return Err(Error::NotNormalized { norm: 0.0 });
        }
        for z in amplitudes.iter_mut() {
            *z /= n;
        }
        Self::new(amplitudes, dims)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn kron(&self, other: &PureState) -> PureState {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        PureState {
            amplitudes: linalg::kron_vec(&self.amplitudes, &other.amplitudes),
            dims,
        }
    }

    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::projector(&self.amplitudes)
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: self.projector(),
            dims: self.dims.clone(),
        }
    }

    /// Coefficient matrix `M[a, b]` for the split (first subsystem, rest).
    pub fn coefficients(&self) -> ComplexMatrix {
        let d1 = self.dims.first().copied().unwrap_or(1);
        let d2 = self.dim() / d1;
        ComplexMatrix::new(d1, d2, self.amplitudes.clone()).expect("dims checked at construction")
    }

    /// `|<self|other>|`
    pub fn overlap(&self, other: &PureState) -> f64 {
        linalg::inner(&self.amplitudes, &other.amplitudes).norm()
    }

    /// Equality up to a global phase, measured as `1 - |<a|b>|`.
    pub fn phase_distance(&self, other: &PureState) -> f64 {
        1.0 - self.overlap(other)
    }
}

/// `(|0> + e^{i theta} |1>) / sqrt 2`
pub fn plus_state(theta: Angle) -> PureState {
    plus_state_radians(theta.radians())
}

pub fn plus_state_radians(theta: f64) -> PureState {
    PureState {
        amplitudes: vec![C64::new(FRAC_1_SQRT_2, 0.0), C64::from_polar(FRAC_1_SQRT_2, theta)],
        dims: vec![2],
    }
}

/// `(|0> - e^{i theta} |1>) / sqrt 2`
pub fn minus_state(theta: Angle) -> PureState {
    plus_state(theta + Angle::PI)
}

pub fn basis_state(dim: usize, k: usize) -> PureState {
    let mut amplitudes = vec![ZERO; dim];
    amplitudes[k] = ONE;
    PureState {
        amplitudes,
        dims: vec![dim],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validate Hermitian, positive semidefinite, unit trace.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let d = matrix.rows();
        Self::with_dims(matrix, vec![d])
    }

    pub fn with_dims(matrix: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        let rho = Self::subnormalized_with_dims(matrix, dims)?;
        let t = rho.trace();
        if (t - 1.0).abs() > STATE_TOLERANCE {
            return Err(Error::BadTrace { trace: t });
        }
        Ok(rho)
    }

    /// Validate Hermitian, positive semidefinite, trace at most one.
    pub fn subnormalized(matrix: ComplexMatrix) -> Result<Self> {
        let d = matrix.rows();
        Self::subnormalized_with_dims(matrix, vec![d])
    }

    pub fn subnormalized_with_dims(matrix: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if !matrix.is_square() || matrix.rows() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: matrix.rows(),
            });
        }
        let defect = matrix.hermiticity_defect();
        if defect > STATE_TOLERANCE {
            return Err(Error::NotHermitian { deviation: defect });
        }
        let values = linalg::eigvalsh(&matrix)?;
        let min = values.last().copied().unwrap_or(0.0);
        if min < -STATE_TOLERANCE {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        let t = matrix.trace().re;
        if t > 1.0 + STATE_TOLERANCE {
            return Err(Error::BadTrace { trace: t });
        }
        Ok(Self { matrix, dims })
    }

    /// Skip validation; for operators produced by trusted internal paths.
    pub(crate) fn from_trusted(matrix: ComplexMatrix, dims: Vec<usize>) -> Self {
        Self { matrix, dims }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
            dims: vec![dim],
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityMatrix {
            matrix: self.matrix.kron(&other.matrix),
            dims,
        }
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let matrix = linalg::partial_trace(&self.matrix, &self.dims, keep)?;
        let dims = keep.iter().map(|&k| self.dims[k]).collect();
        Ok(DensityMatrix { matrix, dims })
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        linalg::trace_distance(&self.matrix, &other.matrix)
    }

    pub fn fidelity(&self, other: &DensityMatrix) -> Result<f64> {
        linalg::fidelity(&self.matrix, &other.matrix)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    TracePreserving,
    TraceNonIncreasing,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    ops: Vec<ComplexMatrix>,
    kind: ChannelKind,
}

impl KrausChannel {
    /// Requires `sum K^dagger K = I` within 1e-10.
    pub fn cptp(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let defect = Self::completeness_defect(&ops)?;
        if defect > STATE_TOLERANCE {
            return Err(Error::NotTracePreserving { deviation: defect });
        }
        Ok(Self {
            ops,
            kind: ChannelKind::TracePreserving,
        })
    }

    /// Requires `I - sum K^dagger K >= 0`.
    pub fn trace_non_increasing(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let sum = Self::gram_sum(&ops)?;
        let gap = &ComplexMatrix::identity(sum.rows()) - &sum;
        let min = linalg::eigvalsh(&gap.hermitian_part())?.last().copied().unwrap_or(0.0);
        if min < -STATE_TOLERANCE {
            return Err(Error::NotTracePreserving { deviation: -min });
        }
        Ok(Self {
            ops,
            kind: ChannelKind::TraceNonIncreasing,
        })
    }

    fn gram_sum(ops: &[ComplexMatrix]) -> Result<ComplexMatrix> {
        let first = ops
            .first()
            .ok_or_else(|| Error::InvalidArgument("channel needs at least one Kraus operator".into()))?;
        let din = first.cols();
        let dout = first.rows();
        let mut sum = ComplexMatrix::zeros(din, din);
        for k in ops {
            if k.cols() != din || k.rows() != dout {
                return Err(Error::DimensionMismatch {
                    expected: din,
                    found: k.cols(),
                });
            }
            sum = &sum + &(&k.dagger() * k);
        }
        Ok(sum)
    }

    fn completeness_defect(ops: &[ComplexMatrix]) -> Result<f64> {
        let sum = Self::gram_sum(ops)?;
        Ok(sum.max_abs_diff(&ComplexMatrix::identity(sum.rows())))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            ops: vec![ComplexMatrix::identity(dim)],
            kind: ChannelKind::TracePreserving,
        }
    }

    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        Self::cptp(vec![u])
    }

    /// `rho -> (1 - p) rho + p I/2` on a qubit.
    pub fn depolarizing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "depolarizing probability {p} outside [0, 1]"
            )));
        }
        let a = (1.0 - 0.75 * p).sqrt();
        let b = (p / 4.0).sqrt();
        Self::cptp(vec![
            gates::identity().scale_real(a),
            gates::x().scale_real(b),
            gates::y().scale_real(b),
            gates::z().scale_real(b),
        ])
    }

    /// `rho -> (1 - p) rho + p Z rho Z`
    pub fn dephasing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "dephasing probability {p} outside [0, 1]"
            )));
        }
        Self::cptp(vec![
            gates::identity().scale_real((1.0 - p).sqrt()),
            gates::z().scale_real(p.sqrt()),
        ])
    }

    /// Discard the input and prepare `sigma`.
    pub fn replace_with(sigma: &DensityMatrix, input_dim: usize) -> Result<Self> {
        let spec = eigh(sigma.matrix())?;
        let mut ops = Vec::new();
        for (k, &lambda) in spec.values.iter().enumerate() {
            if lambda <= 0.0 {
                continue;
            }
            let v = spec.vector(k);
            for j in 0..input_dim {
                let mut e = vec![ZERO; input_dim];
                e[j] = ONE;
                ops.push(ComplexMatrix::outer(&v, &e).scale_real(lambda.sqrt()));
            }
        }
        Self::cptp(ops)
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.ops[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.ops[0].rows()
    }

    pub fn apply_matrix(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let mut out = ComplexMatrix::zeros(self.output_dim(), self.output_dim());
        for k in &self.ops {
            out = &out + &k.conjugate(rho)?;
        }
        Ok(out)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let out = self.apply_matrix(rho.matrix())?;
        let d = out.rows();
        Ok(DensityMatrix::from_trusted(out, vec![d]))
    }

    /// `(E ⊗ id)` applied to the first tensor factor of a bipartite operator.
    pub fn apply_on_first(&self, rho: &ComplexMatrix, rest_dim: usize) -> Result<ComplexMatrix> {
        let id = ComplexMatrix::identity(rest_dim);
        let mut out = ComplexMatrix::zeros(self.output_dim() * rest_dim, self.output_dim() * rest_dim);
        for k in &self.ops {
            out = &out + &k.kron(&id).conjugate(rho)?;
        }
        Ok(out)
    }

    /// `(id_left ⊗ E ⊗ id_right)`
    pub fn apply_between(&self, rho: &ComplexMatrix, left_dim: usize, right_dim: usize) -> Result<ComplexMatrix> {
        let l = ComplexMatrix::identity(left_dim);
        let r = ComplexMatrix::identity(right_dim);
        let d = left_dim * self.output_dim() * right_dim;
        let mut out = ComplexMatrix::zeros(d, d);
        for k in &self.ops {
            out = &out + &l.kron(k).kron(&r).conjugate(rho)?;
        }
        Ok(out)
    }

    /// `(id ⊗ E)` applied to the last tensor factor.
    pub fn apply_on_last(&self, rho: &ComplexMatrix, rest_dim: usize) -> Result<ComplexMatrix> {
        let id = ComplexMatrix::identity(rest_dim);
        let mut out = ComplexMatrix::zeros(self.output_dim() * rest_dim, self.output_dim() * rest_dim);
        for k in &self.ops {
            out = &out + &id.kron(k).conjugate(rho)?;
        }
        Ok(out)
    }
}

pub mod gates {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub fn identity() -> ComplexMatrix {
        ComplexMatrix::identity(2)
    }

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]])
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[&[ZERO, c(0.0, -1.0)], &[c(0.0, 1.0), ZERO]])
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[&[ONE, ZERO], &[ZERO, c(-1.0, 0.0)]])
    }

    pub fn h() -> ComplexMatrix {
        let s = FRAC_1_SQRT_2;
        ComplexMatrix::from_rows(&[&[c(s, 0.0), c(s, 0.0)], &[c(s, 0.0), c(-s, 0.0)]])
    }

    pub fn s() -> ComplexMatrix {
        phase(std::f64::consts::FRAC_PI_2)
    }

    pub fn sdg() -> ComplexMatrix {
        phase(-std::f64::consts::FRAC_PI_2)
    }

    /// `Z(theta) = diag(1, e^{i theta})`
    pub fn phase(theta: f64) -> ComplexMatrix {
        ComplexMatrix::diagonal(&[ONE, C64::from_polar(1.0, theta)])
    }

    pub fn phase_angle(theta: Angle) -> ComplexMatrix {
        phase(theta.radians())
    }

    pub fn cz() -> ComplexMatrix {
        ComplexMatrix::diagonal(&[ONE, ONE, ONE, c(-1.0, 0.0)])
    }
}

/// Apply a 2x2 operator to qubit `q` of an `n`-qubit vector (qubit 0 is the
/// most significant bit).
pub fn apply_single_qubit(amps: &mut [C64], n: usize, q: usize, u: &ComplexMatrix) {
    let stride = 1usize << (n - 1 - q);
    let (u00, u01, u10, u11) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
    let len = amps.len();
    let mut base = 0;
    while base < len {
        for i in base..base + stride {
            let a = amps[i];
            let b = amps[i + stride];
            amps[i] = u00 * a + u01 * b;
            amps[i + stride] = u10 * a + u11 * b;
        }
        base += 2 * stride;
    }
}

pub fn apply_cz(amps: &mut [C64], n: usize, a: usize, b: usize) {
    let ma = 1usize << (n - 1 - a);
    let mb = 1usize << (n - 1 - b);
    for (i, z) in amps.iter_mut().enumerate() {
        if i & ma != 0 && i & mb != 0 {
            *z = -*z;
        }
    }
}

/// Standard purification `sum_k sqrt(lambda_k) |v_k>|v_k>` on `d ⊗ d`.
pub fn purify(rho: &DensityMatrix) -> Result<PureState> {
    purify_matrix(rho.matrix())
}

pub fn purify_matrix(rho: &ComplexMatrix) -> Result<PureState> {
    let d = rho.rows();
    let spec = eigh(rho)?;
    let mut amps = vec![ZERO; d * d];
    for (k, &lambda) in spec.values.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        let w = lambda.sqrt();
        let v = spec.vector(k);
        for a in 0..d {
            for b in 0..d {
                amps[a * d + b] += v[a] * v[b] * w;
            }
        }
    }
    PureState::normalized(amps, vec![d, d])
}

#[derive(Clone, Debug)]
pub struct UhlmannAlignment {
    /// Unitary on the aligned subsystem.
    pub unitary: ComplexMatrix,
    /// Achieved `|<p1| (W ⊗ I) |p2>|`, equal to the root fidelity of the
    /// reduced states on the other subsystem.
    pub overlap: f64,
}

/// Find the unitary `W` on `subsystem` (0 or 1 of a bipartite state) that
/// maximizes `|<p1| W |p2>|`.
pub fn uhlmann_align(p1: &PureState, p2: &PureState, subsystem: usize) -> Result<UhlmannAlignment> {
    if p1.dims().len() != 2 || p1.dims() != p2.dims() {
        return Err(Error::InvalidArgument(format!(
            "uhlmann_align needs two bipartite states of equal shape, got {:?} and {:?}",
            p1.dims(),
            p2.dims()
        )));
    }
    if subsystem > 1 {
        return Err(Error::InvalidArgument(format!("subsystem {subsystem} is not 0 or 1")));
    }
    let m1 = p1.coefficients();
    let m2 = p2.coefficients();
    // <p1|(W ⊗ I)|p2> = Tr(W M2 M1^dagger); <p1|(I ⊗ W)|p2> = Tr(W M2^T conj(M1)).
    let x = if subsystem == 0 {
        &m2 * &m1.dagger()
    } else {
        &m2.transpose() * &m1.conj()
    };
    let (u, _, v) = svd_square(&x)?;
    let unitary = &v * &u.dagger();
    // Recomputed rather than summed: singular values taken from the Gram
    // eigenvalues carry sqrt(eps) noise on the kernel.
    let overlap = (&unitary * &x).trace().norm();
    Ok(UhlmannAlignment { unitary, overlap })
}

/// Apply `W` to one factor of a bipartite pure state.
pub fn apply_to_factor(p: &PureState, w: &ComplexMatrix, subsystem: usize) -> Result<PureState> {
    let m = p.coefficients();
    let out = if subsystem == 0 { w * &m } else { &m * &w.transpose() };
    PureState::new(out.into_vec(), p.dims().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plus_states_are_orthogonal_across_pi() {
        for k in 0..8 {
            let a = plus_state(Angle::eighth(k));
            let b = plus_state(Angle::eighth(k + 4));
            assert!(a.overlap(&b) < 1e-15);
        }
    }

    #[test]
    fn purification_of_maximally_mixed_is_bell() {
        let p = purify(&DensityMatrix::maximally_mixed(2)).unwrap();
        let s = FRAC_1_SQRT_2;
        let bell = [C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)];
        for (a, b) in p.amplitudes().iter().zip(&bell) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_states() {
        let not_psd = ComplexMatrix::diagonal(&[C64::new(1.5, 0.0), C64::new(-0.5, 0.0)]);
        assert!(matches!(DensityMatrix::new(not_psd), Err(Error::NotPositive { .. })));
        let big_trace = ComplexMatrix::identity(2);
        assert!(matches!(DensityMatrix::new(big_trace), Err(Error::BadTrace { .. })));
        assert!(KrausChannel::cptp(vec![gates::x().scale_real(0.5)]).is_err());
        assert!(KrausChannel::trace_non_increasing(vec![gates::x().scale_real(0.5)]).is_ok());
    }

    #[test]
    fn depolarizing_fully_mixes() {
        let ch = KrausChannel::depolarizing(1.0).unwrap();
        let out = ch.apply(&plus_state(Angle::eighth(3)).density()).unwrap();
        assert!(out.matrix().max_abs_diff(DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);
    }

    #[test]
    fn single_qubit_application_matches_kron() {
        let psi = plus_state(Angle::eighth(1))
            .kron(&plus_state(Angle::eighth(6)))
            .kron(&basis_state(2, 1));
        let mut amps = psi.amplitudes().to_vec();
        apply_single_qubit(&mut amps, 3, 1, &gates::h());
        let full = gates::identity().kron(&gates::h()).kron(&gates::identity());
        let expect = full.matvec(psi.amplitudes()).unwrap();
        for (a, b) in amps.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
