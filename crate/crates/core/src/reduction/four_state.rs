//! Four states to eight: Alice sends four BB84 qubits, Bob entangles them
//! with a fresh `|+>` and measures four times; the survivor carries one of
//! the eight `|+_{k pi/4}>` states.

use std::collections::BTreeMap;

use num_rational::Rational64;
use rand::Rng;

use crate::angle::Angle;
use crate::cq::{cq_distance, CQState};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64, ONE, ZERO};
use crate::mbqc::{xy_projectors, Ensemble, Vertex};
use crate::prep::{measured_block, mrsp_b_joint, MeasurementFamily};
use crate::states::{
    apply_cz, apply_single_qubit, gates, minus_state, plus_state, DensityMatrix, KrausChannel, PureState,
};
use crate::ubqc::{BobBehavior, RoundStrategy, Transcript, TranscriptEvent};

/// Reported outcomes `o1..o4`, in measurement order (Q1, Q3, Q2, Q4).
pub type Outcomes = [u8; 4];

/// Every outcome string, `o1` most significant.
pub fn all_outcomes() -> impl Iterator<Item = Outcomes> {
    (0..16u8).map(|k| [k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1])
}

/// Alice's seven secret bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FourStateChoice {
    pub a1: u8,
    pub a2: u8,
    pub b1: u8,
    pub b2: u8,
    pub c1: u8,
    pub c2: u8,
    pub p: u8,
}

impl FourStateChoice {
    pub fn new(bits: [u8; 7]) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument(format!(
                "choice bits must be 0 or 1, got {bits:?}"
            )));
        }
        let [a1, a2, b1, b2, c1, c2, p] = bits;
        Ok(Self {
            a1,
            a2,
            b1,
            b2,
            c1,
            c2,
            p,
        })
    }

    /// Bits `a1 a2 b1 b2 c1 c2 p` read from `k`, `a1` most significant.
    pub fn from_index(k: u8) -> Self {
        let bit = |s: u8| k >> s & 1;
        Self {
            a1: bit(6),
            a2: bit(5),
            b1: bit(4),
            b2: bit(3),
            c1: bit(2),
            c2: bit(1),
            p: bit(0),
        }
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..128u8).map(Self::from_index)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::from_index(rng.gen_range(0..128u8))
    }

    /// Preparation angles of Q1..Q4.
    pub fn input_angles(&self) -> [Angle; 4] {
        let q = |pi_bit: u8, half_bit: u8| Angle::quarter(2 * pi_bit as i64 + half_bit as i64);
        [
            q(self.a1, self.a2),
            q(self.b1, self.b2),
            q(self.c1, self.p),
            q(self.c2, 1 ^ self.p),
        ]
    }
}

/// Alice's output angle for the choice and Bob's reported outcomes.
pub fn four_state_angle(c: &FourStateChoice, o: &Outcomes) -> Angle {
    let [o1, o2, o3, o4] = *o;
    if c.p == 0 {
        let base = Angle::quarter(2 * (c.a1 ^ o1 ^ c.c2) as i64 + c.a2 as i64);
        base.signed(c.c1 ^ o2)
    } else {
        let base = Angle::eighth(4 * (c.b1 ^ o3 ^ c.c1) as i64 + 2 * c.b2 as i64 + 1);
        base.signed(c.c2 ^ o4)
    }
}

/// `X^{c1+o2} Z^{a1+o1+c2} S^{a2} |+>` for `p = 0`,
/// `X^{c2+o4} Z^{b1+o3+c1} S^{b2} Z(pi/4) |+>` for `p = 1`.
pub fn four_state_formula_state(c: &FourStateChoice, o: &Outcomes) -> PureState {
    let [o1, o2, o3, o4] = *o;
    let (x, z, s, t) = if c.p == 0 {
        (c.c1 ^ o2, c.a1 ^ o1 ^ c.c2, c.a2, 0)
    } else {
        (c.c2 ^ o4, c.b1 ^ o3 ^ c.c1, c.b2, 1)
    };
    let mut u = gates::identity();
    if t == 1 {
        u = &gates::phase(std::f64::consts::FRAC_PI_4) * &u;
    }
    if s == 1 {
        u = &gates::s() * &u;
    }
    if z == 1 {
        u = &gates::z() * &u;
    }
    if x == 1 {
        u = &gates::x() * &u;
    }
    let amps = u.matvec(plus_state(Angle::ZERO).amplitudes()).expect("qubit");
    PureState::qubits(amps).expect("unitary image")
}

fn sdg_h_sdg() -> ComplexMatrix {
    &(&gates::sdg() * &gates::h()) * &gates::sdg()
}

fn x_bra(bit: u8) -> Vec<C64> {
    let v = if bit == 0 {
        plus_state(Angle::ZERO)
    } else {
        minus_state(Angle::ZERO)
    };
    v.amplitudes().to_vec()
}

/// Bob's honest round with forced outcomes as a map from Q1..Q4 (16
/// amplitudes) to Q5, including the Born amplitude.
pub fn honest_round_kraus(o: &Outcomes) -> ComplexMatrix {
    let [o1, o2, o3, o4] = *o;
    let local = sdg_h_sdg();
    let plus = plus_state(Angle::ZERO);
    let mut k = ComplexMatrix::zeros(2, 16);
    for col in 0..16 {
        let mut e = vec![ZERO; 16];
        e[col] = ONE;
        let mut v = linalg::kron_vec(&e, plus.amplitudes());
        apply_single_qubit(&mut v, 5, 2, &local);
        apply_single_qubit(&mut v, 5, 3, &local);
        apply_single_qubit(&mut v, 5, 1, &gates::phase(std::f64::consts::FRAC_PI_4));
        // No gate touches a qubit after its measurement, so projecting all
        // four onto their X eigenvectors at the end is the same branch.
        apply_cz(&mut v, 5, 0, 2);
        apply_cz(&mut v, 5, 2, 4);
        apply_cz(&mut v, 5, 1, 3);
        apply_cz(&mut v, 5, 3, 4);
        let bras = [x_bra(o1), x_bra(o3), x_bra(o2), x_bra(o4)];
        for q5 in 0..2 {
            let mut amp = ZERO;
            for idx in 0..16 {
                let mut w = ONE;
                for (q, bra) in bras.iter().enumerate() {
                    w *= bra[idx >> (3 - q) & 1].conj();
                }
                amp += w * v[idx << 1 | q5];
            }
            k[(q5, col)] = amp;
        }
    }
    k
}

/// Honest branch for a choice and forced outcomes: probability and the
/// normalized Q5 state (`None` when the branch has probability zero).
pub fn four_state_branch(c: &FourStateChoice, o: &Outcomes) -> (f64, Option<PureState>) {
    let angles = c.input_angles();
    let mut input = vec![ONE];
    for a in angles {
        input = linalg::kron_vec(&input, plus_state(a).amplitudes());
    }
    let out = honest_round_kraus(o).matvec(&input).expect("16 amplitudes");
    let prob = linalg::norm(&out).powi(2);
    if prob < 1e-14 {
        return (prob, None);
    }
    (prob, PureState::normalized(out, vec![2]).ok())
}

#[derive(Clone, Debug)]
pub struct FourStateRun {
    pub choice: FourStateChoice,
    /// What Bob announced.
    pub outcomes: Outcomes,
    /// Alice's output angle.
    pub angle: Angle,
    /// Bob's Q5.
    pub residual: DensityMatrix,
    pub transcript: Transcript,
}

/// Qubit `q` of the five-qubit register, as a transcript site.
fn site(q: usize) -> Vertex {
    Vertex::new(0, q)
}

/// One run with Bob's behaviour applied to his round. Strategies are keyed
/// by the measured qubit, `Vertex::new(0, q)` for Q`q+1`.
pub fn four_state_run<R: Rng + ?Sized>(bob: &BobBehavior, rng: &mut R) -> Result<FourStateRun> {
    let choice = FourStateChoice::random(rng);
    let mut blocks = Vec::with_capacity(5);
    let mut transcript = Transcript::default();
    for (q, a) in choice.input_angles().into_iter().enumerate() {
        let rho = plus_state(a).density();
        let rho = match &bob.on_receive {
            None => rho,
            Some(ch) => ch.apply(&rho)?,
        };
        blocks.push(rho);
        transcript.events.push(TranscriptEvent::Prep { site: site(q) });
    }
    blocks.push(plus_state(Angle::ZERO).density());
    let mut reg = Ensemble::from_blocks(&blocks)?;
    let local = sdg_h_sdg();
    reg.apply_single(2, &local);
    reg.apply_single(3, &local);
    reg.apply_single(1, &gates::phase(std::f64::consts::FRAC_PI_4));

    let mut outcomes = [0u8; 4];
    for (k, (q, partner)) in [(0usize, 2usize), (2, 4), (1, 3), (3, 4)].into_iter().enumerate() {
        reg.apply_cz(q, partner);
        let honest = xy_projectors(Angle::ZERO);
        let bit = match bob.strategy(site(q)) {
            RoundStrategy::Honest => reg.measure(q, &[vec![honest[0].clone()], vec![honest[1].clone()]], rng),
            RoundStrategy::Offset(off) => {
                let [p0, p1] = xy_projectors(*off);
                reg.measure(q, &[vec![p0], vec![p1]], rng)
            }
            RoundStrategy::FlipReport => 1 ^ reg.measure(q, &[vec![honest[0].clone()], vec![honest[1].clone()]], rng),
            RoundStrategy::Instrument(inst) => reg.measure(q, inst.branches(), rng),
        };
        outcomes[k] = bit;
        transcript.events.push(TranscriptEvent::Outcome { site: site(q), bit });
    }
    transcript.events.push(TranscriptEvent::Output { site: site(4) });
    let residual = DensityMatrix::new(reg.reduced_tail(1))?;
    Ok(FourStateRun {
        choice,
        angle: four_state_angle(&choice, &outcomes),
        outcomes,
        residual,
        transcript,
    })
}

/// Exact distribution of Alice's angle over the choices accepted by `keep`
/// (uniform over them), for fixed reported outcomes.
pub fn four_state_distribution_where(
    o: &Outcomes,
    keep: impl Fn(&FourStateChoice) -> bool,
) -> BTreeMap<Angle, Rational64> {
    let kept: Vec<FourStateChoice> = FourStateChoice::all().filter(|c| keep(c)).collect();
    let mut out = BTreeMap::new();
    if kept.is_empty() {
        return out;
    }
    let w = Rational64::new(1, kept.len() as i64);
    for c in &kept {
        *out.entry(four_state_angle(c, o))
            .or_insert_with(|| Rational64::from_integer(0)) += w;
    }
    out
}

pub fn four_state_distribution(o: &Outcomes) -> BTreeMap<Angle, Rational64> {
    four_state_distribution_where(o, |_| true)
}

/// Who picks which of the seven bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChoiceSplit {
    /// Alice picks `a2, b2, p` (the angles up to pi); the resource's
    /// measurement fixes `a1, b1, c1, c2`.
    AliceBases,
    /// Alice picks `a1, b1, c1, c2`; the functionality draws `a2, b2, p`.
    AliceOffsets,
}

impl ChoiceSplit {
    pub fn alice_bits(&self) -> usize {
        match self {
            ChoiceSplit::AliceBases => 3,
            ChoiceSplit::AliceOffsets => 4,
        }
    }

    /// Assemble a choice from Alice's bits and the other party's bits.
    pub fn assemble(&self, alice: u8, other: u8) -> FourStateChoice {
        let bit = |x: u8, s: u8| x >> s & 1;
        match self {
            ChoiceSplit::AliceBases => FourStateChoice {
                a2: bit(alice, 2),
                b2: bit(alice, 1),
                p: bit(alice, 0),
                a1: bit(other, 3),
                b1: bit(other, 2),
                c1: bit(other, 1),
                c2: bit(other, 0),
            },
            ChoiceSplit::AliceOffsets => FourStateChoice {
                a1: bit(alice, 3),
                b1: bit(alice, 2),
                c1: bit(alice, 1),
                c2: bit(alice, 0),
                a2: bit(other, 2),
                b2: bit(other, 1),
                p: bit(other, 0),
            },
        }
    }
}

/// Distribution of the output angle given Alice's bits, the other party's
/// bits uniform.
pub fn split_distribution(split: ChoiceSplit, alice: u8, o: &Outcomes) -> BTreeMap<Angle, Rational64> {
    let others = 1u8 << (7 - split.alice_bits());
    let w = Rational64::new(1, others as i64);
    let mut out = BTreeMap::new();
    for other in 0..others {
        let c = split.assemble(alice, other);
        *out.entry(four_state_angle(&c, o))
            .or_insert_with(|| Rational64::from_integer(0)) += w;
    }
    out
}

/// `s(theta)`: the choices that yield `theta` under outcomes `o`.
pub fn preimage(theta: Angle, o: &Outcomes) -> Vec<FourStateChoice> {
    FourStateChoice::all()
        .filter(|c| four_state_angle(c, o) == theta)
        .collect()
}

fn family_op(f: &MeasurementFamily, a: Angle) -> Result<&ComplexMatrix> {
    f.op(a)
        .ok_or_else(|| Error::InvalidArgument(format!("input family has no operator for {a}")))
}

/// Aggregate per-system measurements into one eight-angle family on the
/// four-system input: `Pi_theta = 1/2 sum_{s(theta)} Pi^1 ⊗ Pi^2 ⊗ Pi^3 ⊗ Pi^4`.
/// The half makes each `pi` pair sum to the identity, since
/// `s(theta)` and `s(theta + pi)` together cover two full sets of choices
/// for Alice's three bits.
pub fn four_state_simulator_operators(families: &[MeasurementFamily; 4], o: &Outcomes) -> Result<MeasurementFamily> {
    for f in families {
        f.completeness_defect()?;
    }
    let dim: usize = families.iter().map(MeasurementFamily::dim).product();
    let mut ops: BTreeMap<Angle, ComplexMatrix> = BTreeMap::new();
    for c in FourStateChoice::all() {
        let theta = four_state_angle(&c, o);
        let angles = c.input_angles();
        let mut term = ComplexMatrix::identity(1);
        for (f, a) in families.iter().zip(angles) {
            term = term.kron(family_op(f, a)?);
        }
        ops.entry(theta)
            .or_insert_with(|| ComplexMatrix::zeros(dim, dim))
            .add_scaled(&term, C64::new(0.5, 0.0));
    }
    MeasurementFamily::new(ops.into_iter().collect())
}

/// Bob's behaviour in the security comparison: what he feeds each of the
/// four resource calls and what he does in his round.
#[derive(Clone, Debug)]
pub struct FourStateDeviation {
    pub name: String,
    /// Bipartite inputs `[measured, kept]`, both qubits.
    pub inputs: [DensityMatrix; 4],
    pub families: [MeasurementFamily; 4],
    pub round: RoundDeviation,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RoundDeviation {
    Honest,
    /// Report the complement of the outcome at this position (0..4).
    Misreport(usize),
    /// Apply a unitary to one kept qubit (0..4) before the honest round.
    Twist(usize, ComplexMatrix),
}

impl RoundDeviation {
    /// Branch Kraus operators from the four kept qubits to Q5 for the
    /// reported string `o`.
    pub fn kraus(&self, o: &Outcomes) -> Vec<ComplexMatrix> {
        match self {
            RoundDeviation::Honest => vec![honest_round_kraus(o)],
            RoundDeviation::Misreport(k) => {
                let mut actual = *o;
                actual[*k] ^= 1;
                vec![honest_round_kraus(&actual)]
            }
            RoundDeviation::Twist(q, u) => {
                let full = ComplexMatrix::identity(1 << q)
                    .kron(u)
                    .kron(&ComplexMatrix::identity(1 << (3 - q)));
                vec![&honest_round_kraus(o) * &full]
            }
        }
    }
}

fn bell() -> DensityMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = vec![C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)];
    PureState::new(v, vec![2, 2]).expect("normalized").density()
}

fn quarter_angles() -> Vec<Angle> {
    (0..4).map(Angle::quarter).collect()
}

impl FourStateDeviation {
    pub const PRESETS: [&'static str; 5] = ["honest", "computational", "depolarized", "misreport", "twisted"];

    fn with(name: &str, input: DensityMatrix, family: MeasurementFamily, round: RoundDeviation) -> Self {
        Self {
            name: name.to_string(),
            inputs: [input.clone(), input.clone(), input.clone(), input],
            families: [family.clone(), family.clone(), family.clone(), family],
            round,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let honest = MeasurementFamily::honest_on(&quarter_angles())?;
        match name {
            "honest" => Ok(Self::with(name, bell(), honest, RoundDeviation::Honest)),
            "computational" => {
                let z0 = ComplexMatrix::diagonal(&[ONE, ZERO]);
                let z1 = ComplexMatrix::diagonal(&[ZERO, ONE]);
                let fam = MeasurementFamily::new(
                    quarter_angles()
                        .into_iter()
                        .map(|a| (a, if a < Angle::PI { z0.clone() } else { z1.clone() }))
                        .collect(),
                )?;
                Ok(Self::with(name, bell(), fam, RoundDeviation::Honest))
            }
            "depolarized" => {
                let noisy = KrausChannel::depolarizing(0.3)?.apply_on_first(bell().matrix(), 2)?;
                let input = DensityMatrix::with_dims(noisy, vec![2, 2])?;
                Ok(Self::with(name, input, honest, RoundDeviation::Honest))
            }
            "misreport" => Ok(Self::with(name, bell(), honest, RoundDeviation::Misreport(1))),
            "twisted" => Ok(Self::with(
                name,
                bell(),
                honest,
                RoundDeviation::Twist(0, gates::phase(std::f64::consts::FRAC_PI_4)),
            )),
            other => Err(Error::InvalidArgument(format!(
                "unknown four-state deviation {other:?} (expected one of {:?})",
                Self::PRESETS
            ))),
        }
    }

    fn check(&self) -> Result<()> {
        for (input, fam) in self.inputs.iter().zip(&self.families) {
            if input.dims() != [2, 2] || fam.dim() != 2 {
                return Err(Error::InvalidArgument(
                    "four-state deviations use qubit inputs with dims [2, 2]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Per reported string, Alice's angle next to Bob's Q5.
pub type OutcomeResolved = BTreeMap<Outcomes, CQState>;

fn apply_round(kraus: &[ComplexMatrix], x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::zeros(2, 2);
    for k in kraus {
        out = &out + &(k * x).matmul(&k.dagger())?;
    }
    Ok(out)
}

/// Real world: Alice picks `a2, b2, p` (weight 1/8); each resource call
/// measures Bob's input with his family at the chosen angle, whose outcome
/// fixes the remaining bits; Bob runs his round on the kept qubits.
pub fn four_state_real_joint(dev: &FourStateDeviation) -> Result<OutcomeResolved> {
    dev.check()?;
    let mut cache: BTreeMap<(usize, Angle), ComplexMatrix> = BTreeMap::new();
    for (i, (input, fam)) in dev.inputs.iter().zip(&dev.families).enumerate() {
        for a in quarter_angles() {
            cache.insert((i, a), measured_block(family_op(fam, a)?, input)?);
        }
    }
    let mut out = BTreeMap::new();
    for o in all_outcomes() {
        let kraus = dev.round.kraus(&o);
        let mut cq = CQState::new(2);
        for c in FourStateChoice::all() {
            let mut kept = ComplexMatrix::identity(1);
            for (i, a) in c.input_angles().into_iter().enumerate() {
                kept = kept.kron(&cache[&(i, a)]);
            }
            cq.accumulate(vec![four_state_angle(&c, &o)], &apply_round(&kraus, &kept)?, 1.0 / 8.0)?;
        }
        out.insert(o, cq);
    }
    Ok(out)
}

/// Reorder an 8-qubit operator from `(m1 k1 m2 k2 m3 k3 m4 k4)` to
/// `(m1 m2 m3 m4 k1 k2 k3 k4)`.
fn group_measured_first(rho: &ComplexMatrix) -> ComplexMatrix {
    // new position of old qubit j
    let target = |j: usize| if j % 2 == 0 { j / 2 } else { 4 + j / 2 };
    let map = |x: usize| {
        let mut y = 0;
        for j in 0..8 {
            if x >> (7 - j) & 1 == 1 {
                y |= 1 << (7 - target(j));
            }
        }
        y
    };
    let perm: Vec<usize> = (0..256).map(map).collect();
    let mut out = ComplexMatrix::zeros(256, 256);
    for r in 0..256 {
        for c in 0..256 {
            out[(perm[r], perm[c])] = rho[(r, c)];
        }
    }
    out
}

/// Ideal world: the simulator hands Bob the kept halves, learns the
/// reported string, and submits the aggregated family with the measured
/// halves to one eight-angle measurement-based preparation.
pub fn four_state_simulated_joint(dev: &FourStateDeviation) -> Result<OutcomeResolved> {
    dev.check()?;
    let mut joint = ComplexMatrix::identity(1);
    for input in &dev.inputs {
        joint = joint.kron(input.matrix());
    }
    let joint = DensityMatrix::with_dims(group_measured_first(&joint), vec![16, 16])?;
    let mut out = BTreeMap::new();
    for o in all_outcomes() {
        let family = four_state_simulator_operators(&dev.families, &o)?;
        let kraus = dev.round.kraus(&o);
        let cq = mrsp_b_joint(Some((&family, &joint)))?;
        out.insert(o, cq.map_blocks(2, |b| apply_round(&kraus, b))?);
    }
    Ok(out)
}

/// Trace distance between the real and simulated joint states.
pub fn four_state_real_vs_simulated(dev: &FourStateDeviation) -> Result<f64> {
    let real = four_state_real_joint(dev)?;
    let sim = four_state_simulated_joint(dev)?;
    let mut total = 0.0;
    for (o, r) in &real {
        let s = sim
            .get(o)
            .ok_or_else(|| Error::InvalidArgument("outcome strings differ".into()))?;
        total += cq_distance(r, s)?;
    }
    Ok(total)
}
