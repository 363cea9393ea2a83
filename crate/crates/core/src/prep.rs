//! Remote state preparation resources: angle-indexed state families, the
//! weak-correlation check, square-root steering measurements, the random and
//! chosen-angle preparation resources, and the two-server construction.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::angle::{eight_angles, Angle};
use crate::cq::CQState;
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64, ZERO};
use crate::mbqc::xy_projectors;
use crate::states::{gates, plus_state, DensityMatrix, KrausChannel, PureState, STATE_TOLERANCE};

/// Support cutoff for `eta` when building steering operators.
const SUPPORT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PrepOutcome {
    /// Angle at Alice's interface.
    pub angle: Angle,
    /// System at Bob's interface.
    pub state: DensityMatrix,
}

impl PrepOutcome {
    pub fn new(angle: Angle, state: DensityMatrix) -> Self {
        Self { angle, state }
    }
}

/// `theta -> rho^theta` over a finite angle set.
#[derive(Clone, Debug, PartialEq)]
pub struct PrepStateFamily {
    angles: Vec<Angle>,
    states: Vec<DensityMatrix>,
}

#[derive(Serialize, Deserialize)]
struct FamilyFile {
    states: Vec<FamilyEntry>,
}

#[derive(Serialize, Deserialize)]
struct FamilyEntry {
    angle: Angle,
    matrix: Vec<Vec<[f64; 2]>>,
}

impl PrepStateFamily {
    pub fn new(members: Vec<(Angle, DensityMatrix)>) -> Result<Self> {
        let mut members = members;
        members.sort_by(|a, b| a.0.cmp(&b.0));
        if members.is_empty() {
            return Err(Error::InvalidArgument("empty state family".into()));
        }
        let dim = members[0].1.dim();
        for w in members.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidArgument(format!(
                    "angle {} listed twice",
                    w[0].0.to_pi_string()
                )));
            }
        }
        if let Some((_, s)) = members.iter().find(|(_, s)| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
        let (angles, states) = members.into_iter().unzip();
        Ok(Self { angles, states })
    }

    pub fn from_fn(angles: &[Angle], mut f: impl FnMut(Angle) -> Result<DensityMatrix>) -> Result<Self> {
        Self::new(angles.iter().map(|&a| Ok((a, f(a)?))).collect::<Result<_>>()?)
    }

    /// `|+_theta>` over the eight angles.
    pub fn honest() -> Self {
        Self::from_fn(&eight_angles(), |t| Ok(plus_state(t).density())).expect("valid family")
    }

    /// `|+_{3 theta}>`: weak but not of the form `E(|+_theta><+_theta|)`.
    pub fn cubed() -> Self {
        Self::from_fn(&eight_angles(), |t| Ok(plus_state(t.times(3)).density())).expect("valid family")
    }

    /// `rho^0 = rho^pi = |0><0|`, `|+_theta>` elsewhere.
    pub fn nonweak() -> Self {
        Self::from_fn(&eight_angles(), |t| {
            Ok(if t == Angle::ZERO || t == Angle::PI {
                crate::states::basis_state(2, 0).density()
            } else {
                plus_state(t).density()
            })
        })
        .expect("valid family")
    }

    /// `E(|+_theta><+_theta|)` for one channel `E`.
    pub fn strong(channel: &KrausChannel) -> Result<Self> {
        Self::from_fn(&eight_angles(), |t| channel.apply(&plus_state(t).density()))
    }

    /// Honest states under depolarizing noise of strength `p`.
    pub fn mixed(p: f64) -> Result<Self> {
        Self::strong(&KrausChannel::depolarizing(p)?)
    }

    /// A random family obeying the weak-correlation law in dimension `dim`:
    /// `rho^{theta / theta+pi} = eta^{1/2} (I ± H_theta) eta^{1/2}` with
    /// `||H|| <= 1` and `Tr(eta H) = 0`. `eta` may be rank deficient.
    pub fn random_weak<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        let rank = rng.gen_range(1..=dim);
        let basis = random_unitary(dim, rng);
        let mut weights: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut eta = ComplexMatrix::zeros(dim, dim);
        let mut root = ComplexMatrix::zeros(dim, dim);
        for (k, w) in weights.iter().enumerate() {
            let p = ComplexMatrix::projector(&basis.column(k));
            eta.add_scaled(&p, C64::new(*w, 0.0));
            root.add_scaled(&p, C64::new(w.sqrt(), 0.0));
        }
        let mut members = Vec::new();
        for k in 0..4 {
            let g = random_hermitian(dim, rng);
            let shift = (&eta * &g).trace().re;
            let h = &g - &ComplexMatrix::identity(dim).scale_real(shift);
            let norm = linalg::eigvalsh(&h)?.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let h = h.scale_real(rng.gen_range(0.1..1.0) / norm.max(1e-300));
            for (sign, angle) in [(1.0, Angle::eighth(k)), (-1.0, Angle::eighth(k + 4))] {
                let inner = &ComplexMatrix::identity(dim) + &h.scale_real(sign);
                let rho = (&(&root * &inner) * &root).hermitian_part();
                members.push((angle, DensityMatrix::new(rho)?));
            }
        }
        Self::new(members)
    }

    pub fn angles(&self) -> &[Angle] {
        &self.angles
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn state(&self, theta: Angle) -> Option<&DensityMatrix> {
        self.angles.binary_search(&theta).ok().map(|k| &self.states[k])
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// `{"states":[{"angle":"1/4pi","matrix":[[[re,im],...],...]}, ...]}`
    pub fn from_json(text: &str) -> Result<Self> {
        let file: FamilyFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        let mut members = Vec::new();
        for entry in file.states {
            let d = entry.matrix.len();
            let mut data = Vec::with_capacity(d * d);
            for row in &entry.matrix {
                if row.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: row.len(),
                    });
                }
                data.extend(row.iter().map(|[re, im]| C64::new(*re, *im)));
            }
            members.push((entry.angle, DensityMatrix::new(ComplexMatrix::new(d, d, data)?)?));
        }
        Self::new(members)
    }

    pub fn to_json(&self) -> String {
        let file = FamilyFile {
            states: self
                .angles
                .iter()
                .zip(&self.states)
                .map(|(a, s)| FamilyEntry {
                    angle: *a,
                    matrix: (0..s.dim())
                        .map(|r| s.matrix().row(r).iter().map(|z| [z.re, z.im]).collect())
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("family serializes")
    }
}

fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    g.hermitian_part()
}

/// Unitary from the eigenvectors of a random Hermitian matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let spec = linalg::eigh(&random_hermitian(dim, rng)).expect("square hermitian input");
    ComplexMatrix::from_columns(&(0..dim).map(|k| spec.vector(k)).collect::<Vec<_>>()).expect("square")
}

/// Pairs `(theta, theta + pi)` by index, or an error naming an unpaired angle.
fn pi_pairs(angles: &[Angle]) -> Result<Vec<(usize, usize)>> {
    if angles.len() % 2 == 1 {
        return Err(Error::NotPiClosed(format!("{} angles cannot pair up", angles.len())));
    }
    let mut pairs = Vec::new();
    for (k, a) in angles.iter().enumerate() {
        if *a >= Angle::PI {
            continue;
        }
        let partner = angles
            .binary_search(&(*a + Angle::PI))
            .map_err(|_| Error::NotPiClosed(format!("{} has no partner at +pi", a.to_pi_string())))?;
        pairs.push((k, partner));
    }
    if pairs.len() * 2 != angles.len() {
        return Err(Error::NotPiClosed("angle set is not closed under +pi".into()));
    }
    Ok(pairs)
}

#[derive(Clone, Debug)]
pub struct WeakReport {
    /// Mean of the pair averages `(rho^theta + rho^{theta+pi}) / 2`.
    pub eta: ComplexMatrix,
    /// Largest trace distance between two pair averages.
    pub deviation: f64,
}

impl WeakReport {
    pub fn is_weak(&self) -> bool {
        self.deviation <= STATE_TOLERANCE
    }
}

fn pair_report(angles: &[Angle], blocks: &[ComplexMatrix]) -> Result<WeakReport> {
    let pairs = pi_pairs(angles)?;
    let averages: Vec<ComplexMatrix> = pairs
        .iter()
        .map(|&(a, b)| (&blocks[a] + &blocks[b]).scale_real(0.5))
        .collect();
    let mut deviation: f64 = 0.0;
    for i in 0..averages.len() {
        for j in i + 1..averages.len() {
            deviation = deviation.max(linalg::trace_distance(&averages[i], &averages[j])?);
        }
    }
    let mut eta = ComplexMatrix::zeros(blocks[0].rows(), blocks[0].rows());
    for a in &averages {
        eta.add_scaled(a, C64::new(1.0 / averages.len() as f64, 0.0));
    }
    Ok(WeakReport { eta, deviation })
}

/// Pair averages of the family and how far apart they are.
pub fn check_weak(family: &PrepStateFamily) -> Result<WeakReport> {
    let blocks: Vec<ComplexMatrix> = family.states.iter().map(|s| s.matrix().clone()).collect();
    pair_report(&family.angles, &blocks)
}

/// The common `eta`, or `NotWeak`.
pub fn require_weak(family: &PrepStateFamily) -> Result<DensityMatrix> {
    let report = check_weak(family)?;
    if !report.is_weak() {
        return Err(Error::NotWeak {
            deviation: report.deviation,
        });
    }
    DensityMatrix::new(report.eta.hermitian_part())
}

/// Positive operators `Pi_theta` with `Pi_theta + Pi_{theta+pi} = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementFamily {
    angles: Vec<Angle>,
    ops: Vec<ComplexMatrix>,
}

impl MeasurementFamily {
    pub fn new(members: Vec<(Angle, ComplexMatrix)>) -> Result<Self> {
        let mut members = members;
        members.sort_by(|a, b| a.0.cmp(&b.0));
        let (angles, ops): (Vec<Angle>, Vec<ComplexMatrix>) = members.into_iter().unzip();
        let dim = ops
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty measurement family".into()))?
            .rows();
        for op in &ops {
            if op.rows() != dim || op.cols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: op.rows(),
                });
            }
            let defect = op.hermiticity_defect();
            if defect > STATE_TOLERANCE {
                return Err(Error::NotHermitian { deviation: defect });
            }
            let min = linalg::eigvalsh(&op.hermitian_part())?.last().copied().unwrap_or(0.0);
            if min < -STATE_TOLERANCE {
                return Err(Error::NotPositive { min_eigenvalue: min });
            }
        }
        let family = Self { angles, ops };
        let deviation = family.completeness_defect()?;
        if deviation > STATE_TOLERANCE {
            return Err(Error::IncompleteFamily { deviation });
        }
        Ok(family)
    }

    /// `Pi_theta = |+_{-theta}><+_{-theta}|`, which steers a Bell pair to `|+_theta>`.
    pub fn honest() -> Self {
        Self::new(
            eight_angles()
                .into_iter()
                .map(|t| (t, plus_state(-t).projector()))
                .collect(),
        )
        .expect("complete")
    }

    /// Honest projectors restricted to a `pi`-closed angle set.
    pub fn honest_on(angles: &[Angle]) -> Result<Self> {
        Self::new(angles.iter().map(|&t| (t, plus_state(-t).projector())).collect())
    }

    /// `Pi_theta = I/2` for every angle.
    pub fn trivial(dim: usize) -> Self {
        Self::new(
            eight_angles()
                .into_iter()
                .map(|t| (t, ComplexMatrix::identity(dim).scale_real(0.5)))
                .collect(),
        )
        .expect("complete")
    }

    /// Largest entry of `Pi_theta + Pi_{theta+pi} - I` over all pairs.
    pub fn completeness_defect(&self) -> Result<f64> {
        let id = ComplexMatrix::identity(self.dim());
        Ok(pi_pairs(&self.angles)?
            .iter()
            .map(|&(a, b)| (&self.ops[a] + &self.ops[b]).max_abs_diff(&id))
            .fold(0.0, f64::max))
    }

    pub fn angles(&self) -> &[Angle] {
        &self.angles
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn op(&self, theta: Angle) -> Option<&ComplexMatrix> {
        self.angles.binary_search(&theta).ok().map(|k| &self.ops[k])
    }

    pub fn dim(&self) -> usize {
        self.ops[0].rows()
    }

    /// `Pi'_theta = Pi_{theta - shift}`
    pub fn shifted(&self, shift: Angle) -> Self {
        let members = self
            .angles
            .iter()
            .zip(&self.ops)
            .map(|(a, op)| (*a + shift, op.clone()))
            .collect::<Vec<_>>();
        let mut members = members;
        members.sort_by(|a, b| a.0.cmp(&b.0));
        let (angles, ops) = members.into_iter().unzip();
        Self { angles, ops }
    }
}

/// Purification of `eta` plus the measurements that steer its second half.
#[derive(Clone, Debug)]
pub struct Steering {
    /// `|eta> = sum_k sqrt(lambda_k) |v_k>|v_k>`, measured on the first factor.
    pub purification: PureState,
    pub measurements: MeasurementFamily,
}

/// Square-root steering for operators `sigma^theta` whose pair sums all
/// equal `2 eta` with `Tr eta = 1`. The `sigma` need not be normalized
/// individually. In the eigenbasis `V` of `eta` (support only),
/// `Pi_theta = V (1/2 D^{-1/2} (V^† sigma V)^T D^{-1/2}) V^† + (I - P)/2`,
/// so that `Tr_1[(Pi_theta ⊗ I)|eta><eta|] = sigma^theta / 2`.
pub fn steer(angles: &[Angle], sigmas: &[ComplexMatrix]) -> Result<Steering> {
    if angles.len() != sigmas.len() || sigmas.is_empty() {
        return Err(Error::InvalidArgument("angles and operators must pair up".into()));
    }
    let report = pair_report(angles, sigmas)?;
    if !report.is_weak() {
        return Err(Error::NotWeak {
            deviation: report.deviation,
        });
    }
    let eta = report.eta.hermitian_part();
    let trace = eta.trace().re;
    if (trace - 1.0).abs() > STATE_TOLERANCE {
        return Err(Error::BadTrace { trace });
    }
    let d = eta.rows();
    let spec = linalg::eigh(&eta)?;
    let support: Vec<usize> = (0..d).filter(|&k| spec.values[k] > SUPPORT_TOLERANCE).collect();
    let v = ComplexMatrix::from_columns(&support.iter().map(|&k| spec.vector(k)).collect::<Vec<_>>())?;
    let inv_root: Vec<f64> = support.iter().map(|&k| 1.0 / spec.values[k].sqrt()).collect();

    let mut amps = vec![ZERO; d * d];
    for &k in &support {
        let w = spec.values[k].sqrt();
        let vk = spec.vector(k);
        for a in 0..d {
            for b in 0..d {
                amps[a * d + b] += vk[a] * vk[b] * w;
            }
        }
    }
    let purification = PureState::normalized(amps, vec![d, d])?;

    let projector = &v * &v.dagger();
    let kernel = (&ComplexMatrix::identity(d) - &projector).scale_real(0.5);
    let mut members = Vec::with_capacity(angles.len());
    for (a, sigma) in angles.iter().zip(sigmas) {
        let r = &(&v.dagger() * sigma) * &v;
        let k = support.len();
        let inner = ComplexMatrix::from_fn(k, k, |i, j| r[(j, i)] * (0.5 * inv_root[i] * inv_root[j]));
        let op = &(&(&v * &inner) * &v.dagger()) + &kernel;
        members.push((*a, op.hermitian_part()));
    }
    Ok(Steering {
        purification,
        measurements: MeasurementFamily::new(members)?,
    })
}

pub fn steering_measurements(family: &PrepStateFamily) -> Result<Steering> {
    require_weak(family)?;
    let sigmas: Vec<ComplexMatrix> = family.states.iter().map(|s| s.matrix().clone()).collect();
    steer(&family.angles, &sigmas)
}

/// Unnormalized Bob-side operator after outcome `Pi` on the first factor of
/// `state` (dims `[d_in, d_keep]`). A single-factor input keeps the measured
/// system itself, in its Lüders post-measurement state.
pub(crate) fn measured_block(pi: &ComplexMatrix, state: &DensityMatrix) -> Result<ComplexMatrix> {
    let d_in = pi.rows();
    if state.dims().len() == 1 || state.dim() == d_in {
        if state.dim() != d_in {
            return Err(Error::DimensionMismatch {
                expected: d_in,
                found: state.dim(),
            });
        }
        let root = linalg::sqrt_psd(pi)?;
        return (&root * state.matrix()).matmul(&root);
    }
    if state.dims()[0] != d_in {
        return Err(Error::DimensionMismatch {
            expected: d_in,
            found: state.dims()[0],
        });
    }
    let keep = state.dim() / d_in;
    let rho = state.matrix();
    // out[k][l] = sum_{i,j} Pi[j][i] rho[(i,k)][(j,l)]
    let mut out = ComplexMatrix::zeros(keep, keep);
    for i in 0..d_in {
        for j in 0..d_in {
            let w = pi[(j, i)];
            if w == ZERO {
                continue;
            }
            for k in 0..keep {
                for l in 0..keep {
                    out[(k, l)] += w * rho[(i * keep + k, j * keep + l)];
                }
            }
        }
    }
    Ok(out)
}

fn sample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if x < *w {
            return k;
        }
        x -= w;
    }
    weights.len() - 1
}

fn normalized(block: ComplexMatrix) -> DensityMatrix {
    let t = block.trace().re;
    let d = block.rows();
    DensityMatrix::from_trusted(block.scale_real(1.0 / t), vec![d])
}

fn retry(e: Error) -> Error {
    match e {
        Error::Retry(_) => e,
        other => Error::Retry(other.to_string()),
    }
}

/// Random remote blind preparation. `corrupt = None` is the honest interface.
pub fn rsp_b<R: Rng + ?Sized>(corrupt: Option<&PrepStateFamily>, rng: &mut R) -> Result<PrepOutcome> {
    match corrupt {
        None => {
            let theta = Angle::eighth(rng.gen_range(0..8));
            Ok(PrepOutcome::new(theta, plus_state(theta).density()))
        }
        Some(family) => {
            require_weak(family).map_err(retry)?;
            let k = rng.gen_range(0..family.len());
            Ok(PrepOutcome::new(family.angles[k], family.states[k].clone()))
        }
    }
}

/// Joint `(theta, Bob system)` output of `rsp_b`, exactly.
pub fn rsp_b_joint(corrupt: Option<&PrepStateFamily>) -> Result<CQState> {
    let honest = PrepStateFamily::honest();
    let family = match corrupt {
        None => &honest,
        Some(f) => {
            require_weak(f)?;
            f
        }
    };
    let mut out = CQState::new(family.dim());
    let w = 1.0 / family.len() as f64;
    for (a, s) in family.angles.iter().zip(&family.states) {
        out.accumulate(vec![*a], s.matrix(), w)?;
    }
    Ok(out)
}

/// Measurement-based random preparation: a uniformly chosen pair
/// `{Pi_theta, Pi_{theta+pi}}` is measured on Bob's input, the realized
/// angle goes to Alice.
pub fn mrsp_b<R: Rng + ?Sized>(
    corrupt: Option<(&MeasurementFamily, &DensityMatrix)>,
    rng: &mut R,
) -> Result<PrepOutcome> {
    let Some((family, input)) = corrupt else {
        return rsp_b(None, rng);
    };
    let pairs = pi_pairs(&family.angles).map_err(retry)?;
    let (a, b) = pairs[rng.gen_range(0..pairs.len())];
    let blocks = [
        measured_block(&family.ops[a], input).map_err(retry)?,
        measured_block(&family.ops[b], input).map_err(retry)?,
    ];
    let k = sample(&[blocks[0].trace().re, blocks[1].trace().re], rng);
    let angle = family.angles[if k == 0 { a } else { b }];
    let [b0, b1] = blocks;
    Ok(PrepOutcome::new(angle, normalized(if k == 0 { b0 } else { b1 })))
}

pub fn mrsp_b_joint(corrupt: Option<(&MeasurementFamily, &DensityMatrix)>) -> Result<CQState> {
    let Some((family, input)) = corrupt else {
        return rsp_b_joint(None);
    };
    let pairs = pi_pairs(&family.angles)?;
    let w = 1.0 / pairs.len() as f64;
    let mut out: Option<CQState> = None;
    for (a, op) in family.angles.iter().zip(&family.ops) {
        let block = measured_block(op, input)?;
        let cq = out.get_or_insert_with(|| CQState::new(block.rows()));
        cq.accumulate(vec![*a], &block, w)?;
    }
    Ok(out.expect("nonempty family"))
}

/// Strong random preparation: Bob receives `E(|+_theta><+_theta|)`.
pub fn rsp_s<R: Rng + ?Sized>(corrupt: Option<&KrausChannel>, rng: &mut R) -> Result<PrepOutcome> {
    let theta = Angle::eighth(rng.gen_range(0..8));
    let plus = plus_state(theta).density();
    match corrupt {
        None => Ok(PrepOutcome::new(theta, plus)),
        Some(ch) => {
            check_strong_channel(ch).map_err(retry)?;
            Ok(PrepOutcome::new(theta, ch.apply(&plus)?))
        }
    }
}

fn check_strong_channel(ch: &KrausChannel) -> Result<()> {
    if ch.input_dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: ch.input_dim(),
        });
    }
    if ch.kind() != crate::states::ChannelKind::TracePreserving {
        return Err(Error::NotTracePreserving { deviation: f64::NAN });
    }
    Ok(())
}

pub fn rsp_s_joint(corrupt: Option<&KrausChannel>) -> Result<CQState> {
    let id = KrausChannel::identity(2);
    let ch = corrupt.unwrap_or(&id);
    check_strong_channel(ch)?;
    let mut out = CQState::new(ch.output_dim());
    for t in eight_angles() {
        out.accumulate(vec![t], &ch.apply_matrix(&plus_state(t).projector())?, 0.125)?;
    }
    Ok(out)
}

/// Uniform bit `i`; Bob gets `|+_{i pi/2}>`, Alice gets the angle `i pi/2`.
pub fn sp2_emit<R: Rng + ?Sized>(rng: &mut R) -> PrepOutcome {
    let i = rng.gen_range(0..2i64);
    let theta = Angle::quarter(i);
    PrepOutcome::new(theta, plus_state(theta).density())
}

/// A chosen-angle preparation built from the random one: the resource
/// emits `theta'`, Alice sends `delta = theta - theta'` and Bob rotates by
/// `Z(delta)`.
#[derive(Clone, Debug)]
pub struct ChosenAngleSession {
    /// The only message Bob sees besides his system.
    pub delta: Angle,
    /// Alice's final angle and Bob's system.
    pub outcome: PrepOutcome,
}

/// Alice fixes `theta` exactly (`SP_B` behaviour), honest Bob.
pub fn sp_b<R: Rng + ?Sized>(theta: Angle, rng: &mut R) -> ChosenAngleSession {
    let base = rsp_b(None, rng).expect("honest resource");
    let delta = theta - base.angle;
    let u = gates::phase_angle(delta);
    let state = DensityMatrix::from_trusted(u.conjugate(base.state.matrix()).expect("qubit"), vec![2]);
    ChosenAngleSession {
        delta,
        outcome: PrepOutcome::new(theta, state),
    }
}

/// Alice fixes `theta` up to `pi` (`MSP_B`): `delta` is reduced mod `pi`
/// and the final angle is `theta' + delta`, one of `theta`, `theta + pi`.
/// With a corrupt interface Bob keeps his raw residual and `delta`.
pub fn msp_b<R: Rng + ?Sized>(
    theta: Angle,
    corrupt: Option<(&MeasurementFamily, &DensityMatrix)>,
    rng: &mut R,
) -> Result<ChosenAngleSession> {
    let base = mrsp_b(corrupt, rng)?;
    let mut delta = theta - base.angle;
    if delta >= Angle::PI {
        delta = delta - Angle::PI;
    }
    let angle = base.angle + delta;
    let state = match corrupt {
        None => {
            let u = gates::phase_angle(delta);
            DensityMatrix::from_trusted(u.conjugate(base.state.matrix())?, vec![2])
        }
        Some(_) => base.state,
    };
    Ok(ChosenAngleSession {
        delta,
        outcome: PrepOutcome::new(angle, state),
    })
}

pub const DEFAULT_RETRY_BUDGET: usize = 3;

/// Line log of a resource session, in the transcript's four-field format.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SessionLog {
    pub lines: Vec<String>,
}

impl SessionLog {
    pub fn to_text(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }
}

/// Call `attempt` until it stops signalling `Retry`, at most `budget` times.
pub fn with_retries(
    budget: usize,
    log: &mut SessionLog,
    mut attempt: impl FnMut(usize) -> Result<PrepOutcome>,
) -> Result<PrepOutcome> {
    for k in 0..budget {
        log.lines.push(format!("request\t-\t-\t{k}"));
        match attempt(k) {
            Ok(out) => {
                log.lines.push(format!("emit\t-\t{}\t-", out.angle.to_pi_string()));
                return Ok(out);
            }
            Err(Error::Retry(reason)) => log.lines.push(format!("retry\t-\t-\t{k}\t# {reason}")),
            Err(e) => return Err(e),
        }
    }
    Err(Error::RetriesExhausted(budget))
}

/// What the first server does with the angle it is told.
#[derive(Clone, Debug, PartialEq)]
pub enum B1Strategy {
    /// Measure `{|+_{-theta}>, |-_{-theta}>}`.
    Honest,
    /// Per-angle instruments `{E^0_theta, E^1_theta}` (Kraus lists, any
    /// output dimension); the output system is discarded.
    Instruments(BTreeMap<Angle, [Vec<ComplexMatrix>; 2]>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoServerDeviation {
    pub b1: B1Strategy,
    /// Applied by the second server to its half after steering.
    pub b2: Option<KrausChannel>,
}

impl TwoServerDeviation {
    pub fn honest() -> Self {
        Self {
            b1: B1Strategy::Honest,
            b2: None,
        }
    }

    fn per_angle(f: impl Fn(Angle) -> [Vec<ComplexMatrix>; 2]) -> Self {
        Self {
            b1: B1Strategy::Instruments(eight_angles().into_iter().map(|t| (t, f(t))).collect()),
            b2: None,
        }
    }

    /// First server measures `Z` whatever it is told.
    pub fn computational_b1() -> Self {
        let z = |k| vec![crate::states::basis_state(2, k).projector()];
        Self::per_angle(|_| [z(0), z(1)])
    }

    /// First server measures at `theta + pi/8` instead of `theta`.
    pub fn skewed_b1() -> Self {
        let eighth = Angle::new(1, 8).expect("nonzero");
        Self::per_angle(|t| {
            let [p, m] = xy_projectors(-(t + eighth));
            [vec![p], vec![m]]
        })
    }

    /// First server always reports 0 when told `0` (without measuring),
    /// honest otherwise: the announced angle is no longer uniform.
    pub fn biased_b1() -> Self {
        Self::per_angle(|t| {
            if t == Angle::ZERO {
                [vec![ComplexMatrix::identity(2)], vec![]]
            } else {
                let [p, m] = xy_projectors(-t);
                [vec![p], vec![m]]
            }
        })
    }

    /// Honest first server, second server applies `Z(pi/4)`.
    pub fn rotated_b2() -> Self {
        Self {
            b1: B1Strategy::Honest,
            b2: Some(KrausChannel::unitary(gates::phase_angle(Angle::QUARTER_PI)).expect("unitary")),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "honest" => Self::honest(),
            "computational" => Self::computational_b1(),
            "skewed" => Self::skewed_b1(),
            "biased" => Self::biased_b1(),
            "rotated" => Self::rotated_b2(),
            other => return Err(Error::InvalidArgument(format!("unknown two-server preset {other:?}"))),
        })
    }

    fn instrument(&self, theta: Angle) -> Result<[Vec<ComplexMatrix>; 2]> {
        match &self.b1 {
            B1Strategy::Honest => {
                let [p, m] = xy_projectors(-theta);
                Ok([vec![p], vec![m]])
            }
            B1Strategy::Instruments(map) => {
                let inst = map
                    .get(&theta)
                    .ok_or_else(|| Error::InvalidArgument(format!("no instrument for {}", theta.to_pi_string())))?;
                let all: Vec<ComplexMatrix> = inst.iter().flatten().cloned().collect();
                let ch = KrausChannel::cptp(all)?;
                if ch.input_dim() != 2 {
                    return Err(Error::DimensionMismatch {
                        expected: 2,
                        found: ch.input_dim(),
                    });
                }
                Ok(inst.clone())
            }
        }
    }
}

fn bell_pair() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = [C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)];
    ComplexMatrix::projector(&v)
}

/// `eta^{theta,m} = Tr_{B1}((E ⊗ I) psi+)` for one Kraus list.
fn steered(kraus: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let bell = bell_pair();
    let mut out = ComplexMatrix::zeros(2, 2);
    for k in kraus {
        let lifted = k.kron(&ComplexMatrix::identity(2));
        let joint = lifted.conjugate(&bell)?;
        out = &out + &linalg::partial_trace(&joint, &[k.rows(), 2], &[1])?;
    }
    Ok(out)
}

/// The classical-quantum output of the two-server preparation:
/// `block(phi) = 1/8 sum_m eta^{phi + m pi, m}`, with the second server's
/// channel applied. Blocks are not individually normalized.
#[derive(Clone, Debug)]
pub struct InducedCorrelation {
    pub angles: Vec<Angle>,
    /// Joint weights `p(phi) rho^phi`, without the second server's channel.
    pub blocks: Vec<ComplexMatrix>,
    pub b2: Option<KrausChannel>,
}

impl InducedCorrelation {
    pub fn marginal(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.trace().re).collect()
    }

    /// Weak-correlation check on `8 block(phi)`: pair sums must all equal
    /// `I`, even when single blocks are not normalized.
    pub fn check_weak(&self) -> Result<WeakReport> {
        pair_report(&self.angles, &self.scaled())
    }

    fn scaled(&self) -> Vec<ComplexMatrix> {
        let n = self.angles.len() as f64;
        self.blocks.iter().map(|b| b.scale_real(n)).collect()
    }

    /// Normalized per-angle states; meaningful as a family only when the
    /// marginal is uniform.
    pub fn family(&self) -> Result<PrepStateFamily> {
        PrepStateFamily::new(
            self.angles
                .iter()
                .zip(&self.blocks)
                .filter(|(_, b)| b.trace().re > SUPPORT_TOLERANCE)
                .map(|(a, b)| {
                    Ok((
                        *a,
                        DensityMatrix::new(b.scale_real(1.0 / b.trace().re).hermitian_part())?,
                    ))
                })
                .collect::<Result<_>>()?,
        )
    }

    fn apply_b2(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        match &self.b2 {
            None => Ok(m.clone()),
            Some(ch) => ch.apply_matrix(m),
        }
    }

    pub fn joint(&self) -> Result<CQState> {
        let mut out = CQState::new(self.b2.as_ref().map_or(2, |c| c.output_dim()));
        for (a, b) in self.angles.iter().zip(&self.blocks) {
            out.accumulate(vec![*a], &self.apply_b2(b)?, 1.0)?;
        }
        Ok(out)
    }

    /// The simulator's side: steering measurements for the induced blocks
    /// fed to the measurement-based resource, then the second server's
    /// channel.
    pub fn simulated_joint(&self) -> Result<CQState> {
        let steering = steer(&self.angles, &self.scaled())?;
        let input = steering.purification.density();
        let base = mrsp_b_joint(Some((&steering.measurements, &input)))?;
        base.map_blocks(self.b2.as_ref().map_or(2, |c| c.output_dim()), |b| self.apply_b2(b))
    }
}

pub fn two_server_correlation(dev: &TwoServerDeviation) -> Result<InducedCorrelation> {
    let angles = eight_angles();
    let mut blocks = vec![ComplexMatrix::zeros(2, 2); angles.len()];
    for theta in &angles {
        let inst = dev.instrument(*theta)?;
        for (m, kraus) in inst.iter().enumerate() {
            let phi = theta.plus_pi(m as u8);
            let k = angles.binary_search(&phi).expect("eight angles");
            blocks[k] = &blocks[k] + &steered(kraus)?.scale_real(1.0 / angles.len() as f64);
        }
    }
    Ok(InducedCorrelation {
        angles,
        blocks,
        b2: dev.b2.clone(),
    })
}

/// One run of the two-server preparation: Alice tells the first server a
/// uniform `theta`, it reports `m`, Alice keeps `theta + m pi`, and the
/// second server holds the steered half.
pub fn two_server_prepare<R: Rng + ?Sized>(dev: &TwoServerDeviation, rng: &mut R) -> Result<PrepOutcome> {
    let theta = Angle::eighth(rng.gen_range(0..8));
    let inst = dev.instrument(theta)?;
    let blocks = [steered(&inst[0])?, steered(&inst[1])?];
    let m = sample(&[blocks[0].trace().re, blocks[1].trace().re], rng);
    let [b0, b1] = blocks;
    let mut state = normalized(if m == 0 { b0 } else { b1 });
    if let Some(ch) = &dev.b2 {
        state = ch.apply(&state)?;
    }
    Ok(PrepOutcome::new(theta.plus_pi(m as u8), state))
}

impl fmt::Display for PrepOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "emit\t-\t{}\t-", self.angle.to_pi_string())
    }
}
