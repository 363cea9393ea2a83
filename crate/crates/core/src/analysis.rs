//! End-to-end checks: Bob's view under two computations, the `eta` identity
//! behind blindness, real-vs-simulated comparisons and bound sweeps.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::angle::Angle;
use crate::cq::{cq_distance, CQState};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::mbqc::{BrickworkPattern, Vertex};
use crate::prep::{check_weak, require_weak, two_server_correlation, PrepStateFamily, TwoServerDeviation};
use crate::reduction::{
    four_state_real_vs_simulated, two_state_bounds, two_state_bounds_full, two_state_real_vs_simulated, BoundRecord,
    FourStateDeviation, TwoStateDeviation, FULL_SPACE_MAX_N,
};
use crate::ubqc::{bob_view, delta_angle, VIEW_SITE_CAP};

/// Threshold for claims of exact equality.
pub const PERFECT_TOLERANCE: f64 = 1e-10;
/// A non-weak family must leak at least this much somewhere.
pub const VIOLATION_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct LemmaEtaReport {
    pub phi: Angle,
    /// Largest entry of `|LHS - RHS|`.
    pub deviation: f64,
    /// Size of the `delta` register.
    pub labels: usize,
}

/// `sum_{theta, r} rho^theta ⊗ |delta><delta|` with `delta = phi + theta + r pi`
/// against `2 eta ⊗ I`.
pub fn verify_lemma_eta(family: &PrepStateFamily, phi: Angle) -> Result<LemmaEtaReport> {
    let eta = require_weak(family)?;
    let mut labels: Vec<Angle> = family
        .angles()
        .iter()
        .flat_map(|&t| [delta_angle(phi, t, 0), delta_angle(phi, t, 1)])
        .collect();
    labels.sort();
    labels.dedup();
    let d = family.dim();
    let k = labels.len();
    let mut lhs = ComplexMatrix::zeros(d * k, d * k);
    for (&theta, rho) in family.angles().iter().zip(family.states()) {
        for r in 0..2u8 {
            let slot = labels.binary_search(&delta_angle(phi, theta, r)).expect("label listed");
            let mut e = ComplexMatrix::zeros(k, k);
            e[(slot, slot)] = C64::new(1.0, 0.0);
            lhs = &lhs + &rho.matrix().kron(&e);
        }
    }
    let rhs = eta.matrix().scale_real(2.0).kron(&ComplexMatrix::identity(k));
    Ok(LemmaEtaReport {
        phi,
        deviation: lhs.max_abs_diff(&rhs),
        labels: k,
    })
}

/// How the computation angles are chosen in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleGrid {
    /// Every pair of angle strings drawn from the family's angles.
    Full,
    /// Seeded random pairs.
    Random { pairs: usize, seed: u64 },
}

impl AngleGrid {
    /// All pairs up to two sites, ten seeded pairs beyond.
    pub fn default_for(sites: usize, seed: u64) -> Self {
        if sites <= 2 {
            AngleGrid::Full
        } else {
            AngleGrid::Random { pairs: 10, seed }
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BlindnessReport {
    pub sites: usize,
    /// Largest pair-average deviation of the family (0 for weak families).
    pub weak_deviation: f64,
    pub weak: bool,
    pub pairs: usize,
    pub max_distance: f64,
    /// Computation angles of the worst pair.
    pub worst: [Vec<Angle>; 2],
    /// Reported outcomes at which the worst pair was found.
    pub worst_reported: Vec<u8>,
}

impl BlindnessReport {
    /// Weak families must be blind, non-weak ones must leak.
    pub fn matches_classification(&self) -> bool {
        if self.weak {
            self.max_distance <= PERFECT_TOLERANCE
        } else {
            self.max_distance > VIOLATION_THRESHOLD
        }
    }
}

/// A one-row pattern with `sites` measured qubits, every angle set.
fn line_pattern(angles: &[Angle]) -> Result<BrickworkPattern> {
    let mut p = BrickworkPattern::new(1, angles.len())?;
    for (c, &a) in angles.iter().enumerate() {
        p.set_angle(Vertex::new(0, c), a);
    }
    Ok(p)
}

fn view(angles: &[Angle], reported: &[u8], family: &PrepStateFamily) -> Result<CQState> {
    bob_view(&line_pattern(angles)?, reported, family, &[0])
}

fn strings(alphabet: &[Angle], len: usize) -> Vec<Vec<Angle>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                alphabet.iter().map(move |&a| {
                    let mut t = s.clone();
                    t.push(a);
                    t
                })
            })
            .collect();
    }
    out
}

fn bit_strings(len: usize) -> Vec<Vec<u8>> {
    (0..1usize << len)
        .map(|x| (0..len).map(|k| (x >> (len - 1 - k) & 1) as u8).collect())
        .collect()
}

/// Bob's view on a line of `sites` measured qubits prepared from `family`,
/// compared across computation angle strings for every reported outcome
/// string. Non-weak families are evaluated too: that is the point of the
/// necessity direction.
pub fn blindness_sweep(sites: usize, family: &PrepStateFamily, grid: AngleGrid) -> Result<BlindnessReport> {
    if sites == 0 || sites > VIEW_SITE_CAP {
        return Err(Error::CapacityExceeded {
            qubits: sites,
            cap: VIEW_SITE_CAP,
        });
    }
    let weak = check_weak(family)?;
    let alphabet = crate::angle::eight_angles();
    let mut report = BlindnessReport {
        sites,
        weak_deviation: weak.deviation,
        weak: weak.is_weak(),
        pairs: 0,
        max_distance: 0.0,
        worst: [vec![], vec![]],
        worst_reported: vec![],
    };
    let mut consider = |a: &[Angle], b: &[Angle], reported: &[u8], d: f64| {
        report.pairs += 1;
        if d > report.max_distance || report.pairs == 1 {
            report.max_distance = d;
            report.worst = [a.to_vec(), b.to_vec()];
            report.worst_reported = reported.to_vec();
        }
    };
    match grid {
        AngleGrid::Full => {
            let all = strings(&alphabet, sites);
            for reported in bit_strings(sites) {
                let views: Vec<CQState> = all.iter().map(|a| view(a, &reported, family)).collect::<Result<_>>()?;
                for i in 0..all.len() {
                    for j in i + 1..all.len() {
                        consider(&all[i], &all[j], &reported, cq_distance(&views[i], &views[j])?);
                    }
                }
            }
        }
        AngleGrid::Random { pairs, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..pairs {
                let mut draw = || -> Vec<Angle> {
                    (0..sites)
                        .map(|_| *alphabet.choose(&mut rng).expect("eight angles"))
                        .collect()
                };
                let (a, b) = (draw(), draw());
                let reported: Vec<u8> = (0..sites).map(|_| rng.gen_range(0..2)).collect();
                let d = cq_distance(&view(&a, &reported, family)?, &view(&b, &reported, family)?)?;
                consider(&a, &b, &reported, d);
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    FourState,
    TwoState,
    TwoServer,
}

impl std::str::FromStr for Construction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "four_state" | "four-state" => Ok(Construction::FourState),
            "two_state" | "two-state" => Ok(Construction::TwoState),
            "two_server" | "two-server" => Ok(Construction::TwoServer),
            other => Err(Error::InvalidArgument(format!(
                "unknown construction {other:?} (expected four_state, two_state or two_server)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ComparisonReport {
    pub construction: Construction,
    pub deviation: String,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub distance: f64,
    /// The distance the construction promises: 0 for the exact ones, the
    /// assembled `Delta` for two states.
    pub allowed: f64,
    pub pass: bool,
}

/// Trace distance between the real protocol and the ideal resource with
/// its simulator, for a named deviation preset.
pub fn real_vs_simulated(construction: Construction, deviation: &str, n: Option<usize>) -> Result<ComparisonReport> {
    let (distance, allowed, n) = match construction {
        Construction::FourState => {
            let dev = FourStateDeviation::preset(deviation)?;
            (four_state_real_vs_simulated(&dev)?, PERFECT_TOLERANCE, None)
        }
        Construction::TwoServer => {
            let corr = two_server_correlation(&TwoServerDeviation::preset(deviation)?)?;
            (
                cq_distance(&corr.joint()?, &corr.simulated_joint()?)?,
                PERFECT_TOLERANCE,
                None,
            )
        }
        Construction::TwoState => {
            let n = n.ok_or_else(|| Error::InvalidArgument("the two-state comparison needs N".into()))?;
            let cmp = two_state_real_vs_simulated(n, &TwoStateDeviation::preset(deviation)?)?;
            (cmp.distance, cmp.delta, Some(n))
        }
    };
    Ok(ComparisonReport {
        construction,
        deviation: deviation.to_string(),
        n,
        distance,
        allowed,
        pass: distance <= allowed + crate::reduction::BOUND_SLACK,
    })
}

/// Bound records, in full space up to `N = 12` and in Schur–Weyl form above.
pub fn bound_sweep(ns: &[usize]) -> Result<Vec<BoundRecord>> {
    ns.iter()
        .map(|&n| {
            if n <= FULL_SPACE_MAX_N {
                two_state_bounds_full(n)
            } else {
                two_state_bounds(n)
            }
        })
        .collect()
}

pub const BOUND_CSV_HEADER: &str = "N,p0,p_pi,p_half,p_3half,eps_corr,parity_distance,chi_distance,eps_prime,\
eps_double_prime,purification_0,purification_1,delta,delta_paper_form,bound_eps_corr,bound_parity_distance,\
bound_chi_distance,bound_delta,pass_eps_corr,pass_parity_distance,pass_chi_distance,pass_delta,pass_delta_paper_form";

/// Floats with 17 significant digits.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn bound_csv(records: &[BoundRecord]) -> String {
    let mut out = String::from(BOUND_CSV_HEADER);
    out.push('\n');
    for r in records {
        let f = [
            r.parity_distance,
            r.chi_distance,
            r.eps_prime,
            r.eps_double_prime,
            r.purification[0],
            r.purification[1],
            r.delta,
            r.delta_paper_form,
            r.paper_bounds.eps_corr,
            r.paper_bounds.parity_distance,
            r.paper_bounds.chi_distance,
            r.paper_bounds.delta,
        ]
        .map(sig17)
        .join(",");
        let p = &r.pass;
        // p holds p(0), p(pi/2), p(pi), p(3pi/2)
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.p[0],
            r.p[2],
            r.p[1],
            r.p[3],
            r.eps_corr,
            f,
            p.eps_corr,
            p.parity_distance,
            p.chi_distance,
            p.delta,
            p.delta_paper_form
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honest_family_gives_identity_on_both_registers() {
        let r = verify_lemma_eta(&PrepStateFamily::honest(), Angle::ZERO).unwrap();
        assert!(r.deviation <= 1e-12);
        assert_eq!(r.labels, 8);
    }

    #[test]
    fn non_weak_family_is_rejected() {
        assert!(matches!(
            verify_lemma_eta(&PrepStateFamily::nonweak(), Angle::ZERO),
            Err(Error::NotWeak { .. })
        ));
    }

    #[test]
    fn csv_has_one_line_per_record() {
        let recs = bound_sweep(&[4, 8]).unwrap();
        let csv = bound_csv(&recs);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().starts_with("8,9/32,7/32,1/4,1/4,1/32,"));
    }
}
