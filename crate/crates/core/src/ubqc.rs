//! Alice and Bob for the blind brickwork protocol: one-time padded angles,
//! pluggable preparation backends, pluggable (possibly deviant) Bob, and
//! exact enumeration of Bob's view.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, RngCore};

use crate::angle::Angle;
use crate::cq::CQState;
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::mbqc::{self, corrected_angle, xy_projectors, BrickworkPattern, Ensemble, Vertex};
use crate::prep::{PrepOutcome, PrepStateFamily};
use crate::states::{gates, plus_state, DensityMatrix, KrausChannel};

/// Most measured sites `bob_view` will enumerate (16 secret choices each).
pub const VIEW_SITE_CAP: usize = 4;

/// `delta = phi' + theta + r pi`
pub fn delta_angle(phi_corrected: Angle, theta: Angle, r: u8) -> Angle {
    (phi_corrected + theta).plus_pi(r)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AliceSecrets {
    /// Per measured site, in measurement order.
    pub theta: Vec<Angle>,
    pub r: Vec<u8>,
    /// One-time pad `X^{i_x}` on each input qubit.
    pub pad: Vec<u8>,
}

/// Source of the correlated (Alice angle, Bob qubit) pairs for the sites
/// Alice does not prepare herself.
pub trait PrepBackend {
    fn prepare(&mut self, site: Vertex, rng: &mut dyn RngCore) -> Result<PrepOutcome>;
}

/// Uniform `theta` over the eight angles and Bob gets `|+_theta>`.
#[derive(Clone, Copy, Debug, Default)]
pub struct HonestPrep;

impl PrepBackend for HonestPrep {
    fn prepare(&mut self, _site: Vertex, rng: &mut dyn RngCore) -> Result<PrepOutcome> {
        let theta = Angle::eighth(rng.gen_range(0..8));
        Ok(PrepOutcome::new(theta, plus_state(theta).density()))
    }
}

/// Uniform `theta` over the family's angles and Bob gets `rho^theta`.
#[derive(Clone, Debug)]
pub struct FamilyPrep(pub PrepStateFamily);

impl PrepBackend for FamilyPrep {
    fn prepare(&mut self, _site: Vertex, rng: &mut dyn RngCore) -> Result<PrepOutcome> {
        let angles = self.0.angles();
        let theta = angles[rng.gen_range(0..angles.len())];
        let state = self.0.state(theta).expect("angle drawn from the family").clone();
        Ok(PrepOutcome::new(theta, state))
    }
}

/// Two-outcome instrument on one qubit; branch `b` is what Bob reports.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    branches: [Vec<ComplexMatrix>; 2],
}

impl Instrument {
    pub fn new(branch0: Vec<ComplexMatrix>, branch1: Vec<ComplexMatrix>) -> Result<Self> {
        let all: Vec<ComplexMatrix> = branch0.iter().chain(branch1.iter()).cloned().collect();
        let channel = KrausChannel::cptp(all)?;
        if channel.input_dim() != 2 || channel.output_dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: channel.input_dim().max(channel.output_dim()),
            });
        }
        Ok(Self {
            branches: [branch0, branch1],
        })
    }

    pub fn branches(&self) -> &[Vec<ComplexMatrix>; 2] {
        &self.branches
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RoundStrategy {
    Honest,
    /// Measure at `delta + offset`, report truthfully.
    Offset(Angle),
    /// Measure honestly, report the complement.
    FlipReport,
    Instrument(Instrument),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BobBehavior {
    /// Applied to every qubit Bob receives, before entangling.
    pub on_receive: Option<KrausChannel>,
    pub default: RoundStrategy,
    pub overrides: BTreeMap<Vertex, RoundStrategy>,
}

impl Default for BobBehavior {
    fn default() -> Self {
        Self::honest()
    }
}

impl BobBehavior {
    pub fn honest() -> Self {
        Self {
            on_receive: None,
            default: RoundStrategy::Honest,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_receive_channel(mut self, channel: KrausChannel) -> Result<Self> {
        if channel.input_dim() != 2 || channel.output_dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: channel.input_dim().max(channel.output_dim()),
            });
        }
        self.on_receive = Some(channel);
        Ok(self)
    }

    pub fn with_strategy(mut self, strategy: RoundStrategy) -> Self {
        self.default = strategy;
        self
    }

    pub fn with_override(mut self, site: Vertex, strategy: RoundStrategy) -> Self {
        self.overrides.insert(site, strategy);
        self
    }

    pub fn strategy(&self, site: Vertex) -> &RoundStrategy {
        self.overrides.get(&site).unwrap_or(&self.default)
    }

    pub fn is_honest(&self) -> bool {
        self.on_receive.is_none()
            && self.default == RoundStrategy::Honest
            && self.overrides.values().all(|s| *s == RoundStrategy::Honest)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TranscriptEvent {
    Prep { site: Vertex },
    Delta { site: Vertex, angle: Angle },
    Outcome { site: Vertex, bit: u8 },
    Output { site: Vertex },
}

fn site_text(v: Vertex) -> String {
    format!("{},{}", v.row, v.col)
}

/// `kind<TAB>row,col<TAB>angle<TAB>bit`, with `-` for absent fields.
impl fmt::Display for TranscriptEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TranscriptEvent::Prep { site } => write!(f, "prep\t{}\t-\t-", site_text(site)),
            TranscriptEvent::Delta { site, angle } => {
                write!(f, "delta\t{}\t{}\t-", site_text(site), angle.to_pi_string())
            }
            TranscriptEvent::Outcome { site, bit } => write!(f, "outcome\t{}\t-\t{bit}", site_text(site)),
            TranscriptEvent::Output { site } => write!(f, "output\t{}\t-\t-", site_text(site)),
        }
    }
}

/// Everything that crosses the Alice/Bob boundary, in protocol order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub events: Vec<TranscriptEvent>,
}

impl Transcript {
    pub fn to_text(&self) -> String {
        self.events.iter().map(|e| format!("{e}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut events = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse { line: k + 1, message };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(bad(format!("expected 4 tab-separated fields, got {}", fields.len())));
            }
            let (r, c) = fields[1]
                .split_once(',')
                .ok_or_else(|| bad(format!("bad site {:?}", fields[1])))?;
            let site = Vertex::new(
                r.parse().map_err(|_| bad(format!("bad row {r:?}")))?,
                c.parse().map_err(|_| bad(format!("bad column {c:?}")))?,
            );
            let event = match fields[0] {
                "prep" => TranscriptEvent::Prep { site },
                "output" => TranscriptEvent::Output { site },
                "delta" => TranscriptEvent::Delta {
                    site,
                    angle: fields[2].parse().map_err(|e: Error| bad(e.to_string()))?,
                },
                "outcome" => TranscriptEvent::Outcome {
                    site,
                    bit: match fields[3] {
                        "0" => 0,
                        "1" => 1,
                        other => return Err(bad(format!("bad bit {other:?}"))),
                    },
                },
                other => return Err(bad(format!("unknown event {other:?}"))),
            };
            events.push(event);
        }
        Ok(Self { events })
    }

    pub fn deltas(&self) -> Vec<Angle> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TranscriptEvent::Delta { angle, .. } => Some(*angle),
                _ => None,
            })
            .collect()
    }

    pub fn reported_outcomes(&self) -> Vec<u8> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TranscriptEvent::Outcome { bit, .. } => Some(*bit),
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct UbqcRun {
    pub transcript: Transcript,
    /// Alice's corrected output register.
    pub output: DensityMatrix,
    pub secrets: AliceSecrets,
    /// What Bob announced, in measurement order.
    pub reported: Vec<u8>,
}

/// Signals for `v` given Alice's (r-flipped) outcomes and the input pad.
/// The pad `X^{i}` on `(x,0)` commutes through ctrl-Z as `X` there and `Z`
/// on each neighbour.
fn padded_signals(pattern: &BrickworkPattern, v: Vertex, outcomes: &[u8], pad: &[u8]) -> (u8, u8) {
    let n = pattern.rows();
    let (mut sx, mut sz) = mbqc::signals(pattern, v, |u| outcomes[u.col * n + u.row]);
    if v.col == 0 {
        sx ^= pad[v.row];
    }
    for u in pattern.neighbors(v) {
        if u.col == 0 {
            sz ^= pad[u.row];
        }
    }
    (sx, sz)
}

/// One blind run. Column 0 carries Alice's padded input, columns `1..m`
/// come from `prep`, and Bob prepares the output column as `|+>`.
pub fn run_ubqc<R: Rng>(
    pattern: &BrickworkPattern,
    input: &DensityMatrix,
    prep: &mut dyn PrepBackend,
    bob: &BobBehavior,
    rng: &mut R,
) -> Result<UbqcRun> {
    pattern.check_capacity()?;
    let n = pattern.rows();
    let m = pattern.cols();
    if m == 0 {
        return Err(Error::InvalidArgument(
            "a blind run needs at least one measured column".into(),
        ));
    }
    if input.dim() != 1 << n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            found: input.dim(),
        });
    }
    let measured = pattern.measured();
    let mut transcript = Transcript::default();

    let pad: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    let mut theta = Vec::with_capacity(measured.len());
    let mut bob_states = Vec::with_capacity(measured.len());
    for v in &measured {
        if v.col == 0 {
            theta.push(Angle::eighth(rng.gen_range(0..8)));
        } else {
            let out = prep
                .prepare(*v, rng)
                .map_err(|e| Error::InvalidArgument(format!("preparation for site {},{} failed: {e}", v.row, v.col)))?;
            if out.state.dim() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    found: out.state.dim(),
                });
            }
            theta.push(out.angle);
            bob_states.push(out.state);
        }
    }
    let r: Vec<u8> = measured.iter().map(|_| rng.gen_range(0..2u8)).collect();

    // Alice's first column: Z(theta) X^{i} on each input qubit. The pad
    // goes first so that it acts as a plain X byproduct at measurement time.
    let mut first = input.matrix().clone();
    for row in 0..n {
        let mut u = gates::phase_angle(theta[row]);
        if pad[row] == 1 {
            u = &u * &gates::x();
        }
        let full = ComplexMatrix::identity(1 << row)
            .kron(&u)
            .kron(&ComplexMatrix::identity(1 << (n - row - 1)));
        first = full.conjugate(&first)?;
    }
    let received = |rho: ComplexMatrix, qubits: usize| -> Result<ComplexMatrix> {
        match &bob.on_receive {
            None => Ok(rho),
            Some(ch) => {
                let mut rho = rho;
                for q in 0..qubits {
                    rho = ch.apply_between(&rho, 1 << q, 1 << (qubits - q - 1))?;
                }
                Ok(rho)
            }
        }
    };
    let mut blocks = vec![DensityMatrix::from_trusted(received(first, n)?, vec![2; n])];
    for s in bob_states {
        blocks.push(DensityMatrix::from_trusted(received(s.into_matrix(), 1)?, vec![2]));
    }
    let plus = plus_state(Angle::ZERO).density();
    blocks.extend(std::iter::repeat(plus).take(n));
    for v in &measured {
        transcript.events.push(TranscriptEvent::Prep { site: *v });
    }

    let mut reg = Ensemble::from_blocks(&blocks)?;
    for (a, b) in pattern.edges() {
        reg.apply_cz(pattern.qubit(*a), pattern.qubit(*b));
    }

    let mut alice_outcomes: Vec<u8> = Vec::with_capacity(measured.len());
    let mut reported = Vec::with_capacity(measured.len());
    for (k, v) in measured.iter().enumerate() {
        let (sx, sz) = padded_signals(pattern, *v, &alice_outcomes, &pad);
        let delta = delta_angle(corrected_angle(pattern.angle(*v), sx, sz), theta[k], r[k]);
        transcript
            .events
            .push(TranscriptEvent::Delta { site: *v, angle: delta });
        let q = pattern.qubit(*v);
        let b = match bob.strategy(*v) {
            RoundStrategy::Honest => {
                let [p0, p1] = xy_projectors(delta);
                reg.measure(q, &[vec![p0], vec![p1]], rng)
            }
            RoundStrategy::Offset(off) => {
                let [p0, p1] = xy_projectors(delta + *off);
                reg.measure(q, &[vec![p0], vec![p1]], rng)
            }
            RoundStrategy::FlipReport => {
                let [p0, p1] = xy_projectors(delta);
                1 ^ reg.measure(q, &[vec![p0], vec![p1]], rng)
            }
            RoundStrategy::Instrument(inst) => reg.measure(q, inst.branches(), rng),
        };
        transcript.events.push(TranscriptEvent::Outcome { site: *v, bit: b });
        reported.push(b);
        alice_outcomes.push(b ^ r[k]);
    }

    for o in pattern.outputs() {
        transcript.events.push(TranscriptEvent::Output { site: o });
        let (sx, sz) = padded_signals(pattern, o, &alice_outcomes, &pad);
        if sx == 1 {
            reg.apply_single(pattern.qubit(o), &gates::x());
        }
        if sz == 1 {
            reg.apply_single(pattern.qubit(o), &gates::z());
        }
    }
    let output = DensityMatrix::from_trusted(reg.reduced_tail(n), vec![2; n]);
    Ok(UbqcRun {
        transcript,
        output,
        secrets: AliceSecrets { theta, r, pad },
        reported,
    })
}

/// Bob's classical-quantum view for a classical-input run: the delta string
/// next to the product of the states he received, averaged exactly over
/// Alice's `theta` and `r` for the given reported outcomes. Every measured
/// site is prepared from `family`; `input_bits` enter like the pad.
pub fn bob_view(
    pattern: &BrickworkPattern,
    reported: &[u8],
    family: &PrepStateFamily,
    input_bits: &[u8],
) -> Result<CQState> {
    let measured = pattern.measured();
    if measured.len() > VIEW_SITE_CAP {
        return Err(Error::CapacityExceeded {
            qubits: measured.len(),
            cap: VIEW_SITE_CAP,
        });
    }
    if reported.len() != measured.len() {
        return Err(Error::DimensionMismatch {
            expected: measured.len(),
            found: reported.len(),
        });
    }
    if input_bits.len() != pattern.rows() {
        return Err(Error::DimensionMismatch {
            expected: pattern.rows(),
            found: input_bits.len(),
        });
    }
    let d = family.dim();
    let dim = d.pow(measured.len() as u32);
    let weight = (1.0 / (2 * family.angles().len()) as f64).powi(measured.len() as i32);
    let mut view = CQState::new(dim);
    let mut walk = ViewWalk {
        pattern,
        measured: &measured,
        reported,
        family,
        input_bits,
        weight,
        view: &mut view,
    };
    walk.descend(&mut Vec::new(), &mut Vec::new(), &ComplexMatrix::identity(1))?;
    Ok(view)
}

struct ViewWalk<'a> {
    pattern: &'a BrickworkPattern,
    measured: &'a [Vertex],
    reported: &'a [u8],
    family: &'a PrepStateFamily,
    input_bits: &'a [u8],
    weight: f64,
    view: &'a mut CQState,
}

impl ViewWalk<'_> {
    fn descend(&mut self, outcomes: &mut Vec<u8>, label: &mut Vec<Angle>, partial: &ComplexMatrix) -> Result<()> {
        let k = label.len();
        if k == self.measured.len() {
            return self.view.accumulate(label.clone(), partial, self.weight);
        }
        let v = self.measured[k];
        let (sx, sz) = padded_signals(self.pattern, v, outcomes, self.input_bits);
        let phi = corrected_angle(self.pattern.angle(v), sx, sz);
        for &theta in self.family.angles() {
            let next = partial.kron(self.family.state(theta).expect("family angle").matrix());
            for r in 0..2u8 {
                label.push(delta_angle(phi, theta, r));
                outcomes.push(self.reported[k] ^ r);
                self.descend(outcomes, label, &next)?;
                outcomes.pop();
                label.pop();
            }
        }
        Ok(())
    }
}

/// Convenience: eight-angle honest family view of a finished run.
pub fn bob_view_of(pattern: &BrickworkPattern, transcript: &Transcript, input_bits: &[u8]) -> Result<CQState> {
    bob_view(
        pattern,
        &transcript.reported_outcomes(),
        &PrepStateFamily::honest(),
        input_bits,
    )
}
