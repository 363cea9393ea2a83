//! Two states to four: a one-dimensional measurement chain over `N` qubits,
//! each `|+>` or `|+_{pi/2}>`, folds their angles into one residual qubit.

use std::collections::BTreeMap;

use num_rational::Rational64;
use rand::Rng;

use crate::angle::Angle;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64, ZERO};
use crate::mbqc::{max_qubits, xy_projectors, Ensemble, Vertex};
use crate::states::{gates, minus_state, plus_state, DensityMatrix};
use crate::ubqc::{BobBehavior, RoundStrategy, Transcript, TranscriptEvent};

pub fn check_even(n: usize) -> Result<()> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "security parameter N must be a positive even number, got {n}"
        )));
    }
    Ok(())
}

/// Bits of `x` as an `n`-bit string, first entry most significant.
pub fn bits_of(x: u64, n: usize) -> Vec<u8> {
    (0..n).map(|k| (x >> (n - 1 - k) & 1) as u8).collect()
}

/// Bob's correction string from his chain outcomes `b_1..b_{N-1}`:
/// `t_1 = 0` and `t_k = b_{k-1}`. The `X^{b_j}` correction already cancels
/// the byproduct of every earlier measurement, so only the last one flips
/// the sign of a given angle.
pub fn t_bits(b: &[u8]) -> Vec<u8> {
    std::iter::once(0).chain(b.iter().copied()).collect()
}

/// The two states Alice can prepare: `|+>` and `|+_phi>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TwoStateAlphabet {
    pub phi: Angle,
}

impl Default for TwoStateAlphabet {
    fn default() -> Self {
        Self { phi: Angle::HALF_PI }
    }
}

impl TwoStateAlphabet {
    /// `phi = pi / (2 k)` for a power of two `k`.
    pub fn narrow(k: i64) -> Result<Self> {
        if k < 1 || (k & (k - 1)) != 0 {
            return Err(Error::InvalidArgument(format!(
                "narrowing factor {k} is not a power of two"
            )));
        }
        Ok(Self {
            phi: Angle::new(1, 2 * k)?,
        })
    }

    pub fn state(&self, bit: u8) -> Vec<C64> {
        let a = if bit == 0 { Angle::ZERO } else { self.phi };
        plus_state(a).amplitudes().to_vec()
    }

    /// Half the gap, which Bob rotates back before the chain.
    pub fn half(&self) -> Angle {
        Angle::new(self.phi.num(), 2 * self.phi.den()).expect("nonzero denominator")
    }

    /// `sum_k (-1)^{1 + i_k + t_k} phi/2`
    pub fn angle(&self, i: &[u8], t: &[u8]) -> Angle {
        let h = self.half();
        i.iter()
            .zip(t)
            .fold(Angle::ZERO, |acc, (&ik, &tk)| acc + h.signed(1 ^ ik ^ tk))
    }
}

/// Alice's angle for the default alphabet.
pub fn two_state_angle(i: &[u8], t: &[u8]) -> Angle {
    TwoStateAlphabet::default().angle(i, t)
}

fn x_bra(bit: u8) -> [C64; 2] {
    let v = if bit == 0 {
        plus_state(Angle::ZERO)
    } else {
        minus_state(Angle::ZERO)
    };
    [v.amplitudes()[0], v.amplitudes()[1]]
}

/// Honest chain on product input `states` with forced outcomes `b`:
/// returns the unnormalized residual qubit (its squared norm is the
/// branch probability).
pub fn chain_branch(states: &[Vec<C64>], pre: &ComplexMatrix, b: &[u8]) -> Result<[C64; 2]> {
    if states.is_empty() || b.len() + 1 != states.len() {
        return Err(Error::InvalidArgument(format!(
            "{} qubits need {} outcomes, got {}",
            states.len(),
            states.len().saturating_sub(1),
            b.len()
        )));
    }
    let rot = |v: &[C64]| -> Result<Vec<C64>> { pre.matvec(v) };
    let h = gates::h();
    let mut carry = rot(&states[0])?;
    for (j, &bj) in b.iter().enumerate() {
        let c = h.matvec(&carry)?;
        let next = rot(&states[j + 1])?;
        // CZ on c ⊗ next, then <±| on the first factor
        let bra = x_bra(bj);
        let mut out = [ZERO; 2];
        for a in 0..2 {
            for k in 0..2 {
                let sign = if a == 1 && k == 1 { -1.0 } else { 1.0 };
                out[k] += bra[a].conj() * c[a] * next[k] * sign;
            }
        }
        if bj == 1 {
            out.swap(0, 1);
        }
        carry = out.to_vec();
    }
    Ok([carry[0], carry[1]])
}

#[derive(Clone, Debug)]
pub struct TwoStateRun {
    pub n: usize,
    pub i_bits: Vec<u8>,
    /// Bob's raw outcomes, as he reports them.
    pub b_bits: Vec<u8>,
    pub t_bits: Vec<u8>,
    pub angle: Angle,
    pub residual: DensityMatrix,
    pub transcript: Transcript,
}

/// One run with the default alphabet.
pub fn two_state_run<R: Rng + ?Sized>(n: usize, bob: &BobBehavior, rng: &mut R) -> Result<TwoStateRun> {
    two_state_run_with(n, TwoStateAlphabet::default(), bob, rng)
}

/// One run: Alice draws `i`, Bob applies `Z(-phi/2)` to every qubit and
/// runs the chain; measurement strategies are keyed by `Vertex::new(0, j)`.
pub fn two_state_run_with<R: Rng + ?Sized>(
    n: usize,
    alphabet: TwoStateAlphabet,
    bob: &BobBehavior,
    rng: &mut R,
) -> Result<TwoStateRun> {
    check_even(n)?;
    let cap = max_qubits();
    if n > cap {
        return Err(Error::CapacityExceeded { qubits: n, cap });
    }
    let i_bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    let mut transcript = Transcript::default();
    let mut blocks = Vec::with_capacity(n);
    for (j, &i) in i_bits.iter().enumerate() {
        let a = if i == 0 { Angle::ZERO } else { alphabet.phi };
        let rho = plus_state(a).density();
        blocks.push(match &bob.on_receive {
            None => rho,
            Some(ch) => ch.apply(&rho)?,
        });
        transcript.events.push(TranscriptEvent::Prep {
            site: Vertex::new(0, j),
        });
    }
    let mut reg = Ensemble::from_blocks(&blocks)?;
    let pre = gates::phase_angle(-alphabet.half());
    for q in 0..n {
        reg.apply_single(q, &pre);
    }
    let honest = xy_projectors(Angle::ZERO);
    let mut b_bits = Vec::with_capacity(n - 1);
    for j in 0..n - 1 {
        reg.apply_single(j, &gates::h());
        reg.apply_cz(j, j + 1);
        let (actual, reported) = match bob.strategy(Vertex::new(0, j)) {
            RoundStrategy::Honest => {
                let b = reg.measure(j, &[vec![honest[0].clone()], vec![honest[1].clone()]], rng);
                (b, b)
            }
            RoundStrategy::Offset(off) => {
                let [p0, p1] = xy_projectors(*off);
                let b = reg.measure(j, &[vec![p0], vec![p1]], rng);
                (b, b)
            }
            RoundStrategy::FlipReport => {
                let b = reg.measure(j, &[vec![honest[0].clone()], vec![honest[1].clone()]], rng);
                (b, 1 ^ b)
            }
            RoundStrategy::Instrument(inst) => {
                let b = reg.measure(j, inst.branches(), rng);
                (b, b)
            }
        };
        if actual == 1 {
            reg.apply_single(j + 1, &gates::x());
        }
        b_bits.push(reported);
    }
    let t = t_bits(&b_bits);
    for (k, &tk) in t.iter().enumerate() {
        transcript.events.push(TranscriptEvent::Outcome {
            site: Vertex::new(0, k),
            bit: tk,
        });
    }
    transcript.events.push(TranscriptEvent::Output {
        site: Vertex::new(0, n - 1),
    });
    let residual = DensityMatrix::new(reg.reduced_tail(1))?;
    Ok(TwoStateRun {
        n,
        angle: alphabet.angle(&i_bits, &t),
        i_bits,
        b_bits,
        t_bits: t,
        residual,
        transcript,
    })
}

/// Result of the narrow-alphabet variant: the chain angle is a multiple of
/// `phi/2`, and Alice sends one classical correction that Bob applies as
/// `Z(correction)`, landing on a multiple of `pi/2`.
#[derive(Clone, Debug)]
pub struct CorrectedRun {
    pub run: TwoStateRun,
    pub correction: Angle,
    pub angle: Angle,
    pub residual: DensityMatrix,
}

pub fn two_state_run_corrected<R: Rng + ?Sized>(
    n: usize,
    alphabet: TwoStateAlphabet,
    bob: &BobBehavior,
    rng: &mut R,
) -> Result<CorrectedRun> {
    let run = two_state_run_with(n, alphabet, bob, rng)?;
    // largest multiple of pi/2 not above the raw angle
    let steps = (run.angle.num() * 2).div_euclid(run.angle.den());
    let target = Angle::quarter(steps);
    let correction = target - run.angle;
    let u = gates::phase_angle(correction);
    let residual = DensityMatrix::new(u.conjugate(run.residual.matrix())?)?;
    Ok(CorrectedRun {
        run,
        correction,
        angle: target,
        residual,
    })
}

fn binomial(n: usize, k: usize) -> i64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as i128 / (j + 1) as i128;
    }
    acc as i64
}

/// Largest `N` the exact paths accept: class counts fit an `i64` and every
/// probability reduces to a denominator of at most `2^{N/2+1}`.
pub const MAX_EXACT_N: usize = 64;

/// Number of `i` strings with `|i| = r (mod 4)`.
pub fn class_count(n: usize, r: usize) -> i64 {
    (0..=n).filter(|w| w % 4 == r % 4).map(|w| binomial(n, w)).sum()
}

/// With `i` fixed and `t = 0`, `theta = (|i| - K) pi/2`, so `theta = l pi/2`
/// collects the strings of weight `K + l (mod 4)`.
pub fn angle_class(n: usize, l: usize) -> usize {
    (n / 2 + l) % 4
}

fn check_exact(n: usize) -> Result<()> {
    check_even(n)?;
    if n > MAX_EXACT_N {
        return Err(Error::InvalidArgument(format!(
            "N = {n} exceeds the exact-arithmetic limit {MAX_EXACT_N}"
        )));
    }
    Ok(())
}

/// Exact `p(theta)` over `{0, pi/2, pi, 3pi/2}` by binomial class counting.
pub fn two_state_distribution(n: usize) -> Result<BTreeMap<Angle, Rational64>> {
    check_exact(n)?;
    let total = 1i128 << n;
    Ok((0..4)
        .map(|l| {
            let count = class_count(n, angle_class(n, l)) as i128;
            let g = num_integer::gcd(count, total);
            let p = Rational64::new((count / g) as i64, (total / g) as i64);
            (Angle::quarter(l as i64), p)
        })
        .collect())
}

/// Brute force over all `2^N` strings with the chain angle formula.
pub fn two_state_distribution_enumerated(n: usize) -> Result<BTreeMap<Angle, Rational64>> {
    check_even(n)?;
    if n > 24 {
        return Err(Error::InvalidArgument(format!(
            "enumeration limited to N <= 24, got {n}"
        )));
    }
    let zeros = vec![0u8; n];
    let mut counts: BTreeMap<Angle, i64> = (0..4).map(|l| (Angle::quarter(l), 0)).collect();
    for x in 0..1u64 << n {
        *counts.entry(two_state_angle(&bits_of(x, n), &zeros)).or_insert(0) += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(a, c)| (a, Rational64::new(c, 1i64 << n)))
        .collect())
}

/// `p(l pi/2) = 1/4 + 2^{-K-1} cos(l pi/2)` for every even `N = 2K`.
pub fn two_state_closed_form(n: usize) -> Result<BTreeMap<Angle, Rational64>> {
    check_exact(n)?;
    let k = n / 2;
    let bias = Rational64::new(1, 1i64 << (k + 1));
    let quarter = Rational64::new(1, 4);
    Ok([
        (Angle::ZERO, quarter + bias),
        (Angle::HALF_PI, quarter),
        (Angle::PI, quarter - bias),
        (Angle::quarter(3), quarter),
    ]
    .into_iter()
    .collect())
}

/// `1/2 sum_theta |p(theta) - 1/4|`, exactly.
pub fn two_state_correctness_error(n: usize) -> Result<Rational64> {
    let quarter = Rational64::new(1, 4);
    let half = Rational64::new(1, 2);
    Ok(two_state_distribution(n)?
        .values()
        .map(|p| if *p > quarter { *p - quarter } else { quarter - *p })
        .fold(Rational64::from_integer(0), |acc, x| acc + x)
        * half)
}
