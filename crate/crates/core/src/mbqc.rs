//! Brickwork graph states and measurement patterns with flow.
//!
//! Vertex `(row, col)` lives on qubit `col * rows + row`, so the input layer
//! occupies the most significant qubits and the output layer the least
//! significant ones. Measurements run column by column, top to bottom.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;

use crate::angle::Angle;
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64, ZERO};
use crate::states::{self, gates, plus_state, DensityMatrix};

/// Default cap on `rows * (cols + 1)`; `BLINDSIM_MAX_QUBITS` overrides it.
pub const DEFAULT_MAX_QUBITS: usize = 12;

pub fn max_qubits() -> usize {
    std::env::var("BLINDSIM_MAX_QUBITS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_MAX_QUBITS)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    pub row: usize,
    pub col: usize,
}

impl Vertex {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BrickworkPattern {
    rows: usize,
    cols: usize,
    /// Column-major, `cols * rows` entries (the output column is not measured).
    angles: Vec<Angle>,
    edges: Vec<(Vertex, Vertex)>,
}

impl BrickworkPattern {
    /// The `rows x (cols + 1)` brickwork graph with every angle zero.
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 {
            return Err(Error::InvalidArgument("brickwork needs at least one row".into()));
        }
        let mut edges = Vec::new();
        for col in 0..=cols {
            for row in 0..rows {
                if col < cols {
                    edges.push((Vertex::new(row, col), Vertex::new(row, col + 1)));
                }
            }
        }
        for col in 0..=cols {
            let start_parity = match col % 8 {
                2 => 0,
                6 => 1,
                _ => continue,
            };
            for row in (start_parity..rows.saturating_sub(1)).step_by(2) {
                for c in [col, col + 2] {
                    if c <= cols {
                        edges.push((Vertex::new(row, c), Vertex::new(row + 1, c)));
                    }
                }
            }
        }
        edges.sort();
        Ok(Self {
            rows,
            cols,
            angles: vec![Angle::ZERO; rows * cols],
            edges,
        })
    }

    pub fn with_angles(rows: usize, cols: usize, angles: Vec<Angle>) -> Result<Self> {
        let mut p = Self::new(rows, cols)?;
        if angles.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: angles.len(),
            });
        }
        p.angles = angles;
        Ok(p)
    }

    /// Fill every measured site with a uniformly random `k pi / 4`.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Self> {
        let angles = (0..rows * cols).map(|_| Angle::eighth(rng.gen_range(0..8))).collect();
        Self::with_angles(rows, cols, angles)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of measured columns `m`; the graph has `m + 1` columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_qubits(&self) -> usize {
        self.rows * (self.cols + 1)
    }

    pub fn edges(&self) -> &[(Vertex, Vertex)] {
        &self.edges
    }

    pub fn qubit(&self, v: Vertex) -> usize {
        v.col * self.rows + v.row
    }

    pub fn angle(&self, v: Vertex) -> Angle {
        self.angles[v.col * self.rows + v.row]
    }

    pub fn set_angle(&mut self, v: Vertex, a: Angle) {
        self.angles[v.col * self.rows + v.row] = a;
    }

    pub fn angles(&self) -> &[Angle] {
        &self.angles
    }

    /// Measured vertices in measurement order.
    pub fn measured(&self) -> Vec<Vertex> {
        (0..self.cols)
            .flat_map(|c| (0..self.rows).map(move |r| Vertex::new(r, c)))
            .collect()
    }

    pub fn outputs(&self) -> Vec<Vertex> {
        (0..self.rows).map(|r| Vertex::new(r, self.cols)).collect()
    }

    pub fn neighbors(&self, v: Vertex) -> Vec<Vertex> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// The flow successor `(row, col + 1)` of a measured vertex.
    pub fn flow(&self, v: Vertex) -> Option<Vertex> {
        (v.col < self.cols).then(|| Vertex::new(v.row, v.col + 1))
    }

    /// Measured vertices whose outcome flips the sign of `v`'s angle.
    pub fn x_deps(&self, v: Vertex) -> Vec<Vertex> {
        if v.col == 0 {
            Vec::new()
        } else {
            vec![Vertex::new(v.row, v.col - 1)]
        }
    }

    /// Measured vertices whose outcome adds `pi` to `v`'s angle.
    pub fn z_deps(&self, v: Vertex) -> Vec<Vertex> {
        let mut out = BTreeSet::new();
        for u in self.measured() {
            let f = self.flow(u).expect("measured vertex has a successor");
            if u != v && self.neighbors(f).contains(&v) {
                out.insert(u);
            }
        }
        out.into_iter().collect()
    }

    /// Vertical edges inside column `col`.
    fn column_edges(&self, col: usize) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter(|(a, b)| a.col == col && b.col == col)
            .map(|(a, b)| (a.row, b.row))
            .collect()
    }

    /// The `rows`-qubit unitary the pattern implements, composed gate by gate:
    /// each measured column applies `H Z(-phi)` to every wire, and vertical
    /// edges act as controlled-Z between neighbouring wires.
    pub fn ideal_unitary(&self) -> ComplexMatrix {
        let n = self.rows;
        let dim = 1usize << n;
        let cz_layer = |col: usize| {
            let mut diag = vec![linalg::ONE; dim];
            for (a, b) in self.column_edges(col) {
                let (ma, mb) = (1usize << (n - 1 - a), 1usize << (n - 1 - b));
                for (i, d) in diag.iter_mut().enumerate() {
                    if i & ma != 0 && i & mb != 0 {
                        *d = -*d;
                    }
                }
            }
            ComplexMatrix::diagonal(&diag)
        };
        let mut u = cz_layer(0);
        for col in 0..self.cols {
            let mut layer = ComplexMatrix::identity(1);
            for row in 0..n {
                let phi = self.angle(Vertex::new(row, col));
                layer = layer.kron(&(&gates::h() * &gates::phase(-phi.radians())));
            }
            u = &layer * &u;
            u = &cz_layer(col + 1) * &u;
        }
        u
    }

    pub fn check_capacity(&self) -> Result<()> {
        let cap = max_qubits();
        if self.num_qubits() > cap {
            return Err(Error::CapacityExceeded {
                qubits: self.num_qubits(),
                cap,
            });
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "brickwork {} {}", self.rows, self.cols).unwrap();
        for v in self.measured() {
            writeln!(s, "angle {} {} {}", v.row, v.col, self.angle(v)).unwrap();
        }
        for (a, b) in &self.edges {
            writeln!(s, "edge {} {} {} {}", a.row, a.col, b.row, b.col).unwrap();
        }
        let list = |vs: Vec<Vertex>| {
            vs.iter()
                .map(|u| format!("{} {}", u.row, u.col))
                .collect::<Vec<_>>()
                .join(" ; ")
        };
        for v in self.measured().into_iter().chain(self.outputs()) {
            writeln!(s, "xdep {} {} : {}", v.row, v.col, list(self.x_deps(v))).unwrap();
            writeln!(s, "zdep {} {} : {}", v.row, v.col, list(self.z_deps(v))).unwrap();
        }
        s
    }

    /// Parse the text format written by [`to_text`](Self::to_text).
    ///
    /// Only the header and `angle` lines are required; `edge`, `xdep` and
    /// `zdep` lines, when present, must agree with the graph.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut pattern: Option<Self> = None;
        let mut edges_seen = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: line_no, message };
            let words: Vec<&str> = line.split_whitespace().collect();
            let num = |w: &str| {
                w.parse::<usize>()
                    .map_err(|_| err(format!("expected an integer, got {w:?}")))
            };
            match words[0] {
                "brickwork" => {
                    if words.len() != 3 || pattern.is_some() {
                        return Err(err("expected a single `brickwork <rows> <cols>` header".into()));
                    }
                    pattern = Some(Self::new(num(words[1])?, num(words[2])?).map_err(|e| err(e.to_string()))?);
                }
                "angle" | "edge" | "xdep" | "zdep" => {
                    let p = pattern.as_mut().ok_or_else(|| err("missing brickwork header".into()))?;
                    match words[0] {
                        "angle" => {
                            if words.len() != 4 {
                                return Err(err("expected `angle <row> <col> <num/den>`".into()));
                            }
                            let v = Vertex::new(num(words[1])?, num(words[2])?);
                            if v.row >= p.rows || v.col >= p.cols {
                                return Err(err(format!("site {v:?} is not measured")));
                            }
                            let a: Angle = words[3].parse().map_err(|e: Error| err(e.to_string()))?;
                            p.set_angle(v, a);
                        }
                        "edge" => {
                            if words.len() != 5 {
                                return Err(err("expected `edge <r> <c> <r> <c>`".into()));
                            }
                            let a = Vertex::new(num(words[1])?, num(words[2])?);
                            let b = Vertex::new(num(words[3])?, num(words[4])?);
                            if !p.edges.contains(&(a, b)) {
                                return Err(err(format!("{a:?}-{b:?} is not a brickwork edge")));
                            }
                            edges_seen.push((a, b));
                        }
                        kind => {
                            let v = Vertex::new(num(words[1])?, num(words[2])?);
                            let rest = line.split_once(':').map(|(_, r)| r.trim()).unwrap_or("");
                            let mut listed = Vec::new();
                            for item in rest.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                                let parts: Vec<&str> = item.split_whitespace().collect();
                                if parts.len() != 2 {
                                    return Err(err(format!("bad dependency entry {item:?}")));
                                }
                                listed.push(Vertex::new(num(parts[0])?, num(parts[1])?));
                            }
                            let expect = if kind == "xdep" { p.x_deps(v) } else { p.z_deps(v) };
                            if listed != expect {
                                return Err(err(format!("{kind} for {v:?} disagrees with the flow")));
                            }
                        }
                    }
                }
                other => return Err(err(format!("unknown record {other:?}"))),
            }
        }
        let p = pattern.ok_or(Error::Parse {
            line: 0,
            message: "empty pattern".into(),
        })?;
        if !edges_seen.is_empty() && edges_seen.len() != p.edges.len() {
            return Err(Error::Parse {
                line: 0,
                message: "edge list is incomplete".into(),
            });
        }
        Ok(p)
    }
}

/// `phi' = (-1)^{s_x} phi + s_z pi`
pub fn corrected_angle(phi: Angle, s_x: u8, s_z: u8) -> Angle {
    phi.signed(s_x).plus_pi(s_z)
}

/// Kraus pair `{|+_a><+_a|, |-_a><-_a|}` for an XY-plane measurement.
pub fn xy_projectors(a: Angle) -> [ComplexMatrix; 2] {
    [plus_state(a).projector(), states::minus_state(a).projector()]
}

/// A register held as an unnormalized ensemble of pure components, so mixed
/// inputs and non-projective instruments can be simulated exactly with state
/// vectors: `rho = sum_k |psi_k><psi_k| / Tr`.
#[derive(Clone, Debug)]
pub struct Ensemble {
    qubits: usize,
    components: Vec<Vec<C64>>,
}

impl Ensemble {
    /// Start from a list of per-block density matrices, concatenated in order.
    pub fn from_blocks(blocks: &[DensityMatrix]) -> Result<Self> {
        let mut components: Vec<Vec<C64>> = vec![vec![linalg::ONE]];
        let mut qubits = 0;
        for b in blocks {
            let d = b.dim();
            if !d.is_power_of_two() {
                return Err(Error::InvalidArgument(format!(
                    "block of dimension {d} is not a qubit register"
                )));
            }
            qubits += d.trailing_zeros() as usize;
            let spec = linalg::eigh(b.matrix())?;
            let pieces: Vec<Vec<C64>> = spec
                .values
                .iter()
                .enumerate()
                .filter(|(_, &l)| l > 1e-14)
                .map(|(k, &l)| spec.vector(k).into_iter().map(|z| z * l.sqrt()).collect())
                .collect();
            let mut next = Vec::with_capacity(components.len() * pieces.len());
            for c in &components {
                for p in &pieces {
                    next.push(linalg::kron_vec(c, p));
                }
            }
            components = next;
        }
        Ok(Self { qubits, components })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn weight(&self) -> f64 {
        self.components.iter().map(|c| linalg::norm(c).powi(2)).sum()
    }

    pub fn apply_single(&mut self, q: usize, u: &ComplexMatrix) {
        for c in self.components.iter_mut() {
            states::apply_single_qubit(c, self.qubits, q, u);
        }
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) {
        for c in self.components.iter_mut() {
            states::apply_cz(c, self.qubits, a, b);
        }
    }

    fn branch(&self, q: usize, kraus: &[ComplexMatrix]) -> Vec<Vec<C64>> {
        let mut out = Vec::with_capacity(self.components.len() * kraus.len());
        for k in kraus {
            for c in &self.components {
                let mut v = c.clone();
                states::apply_single_qubit(&mut v, self.qubits, q, k);
                if v.iter().any(|z| *z != ZERO) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Apply a two-outcome instrument on qubit `q` and sample the outcome.
    pub fn measure<R: Rng + ?Sized>(&mut self, q: usize, branches: &[Vec<ComplexMatrix>; 2], rng: &mut R) -> u8 {
        let zero = self.branch(q, &branches[0]);
        let w0: f64 = zero.iter().map(|c| linalg::norm(c).powi(2)).sum();
        let total = self.weight();
        let p0 = if total > 0.0 { w0 / total } else { 1.0 };
        let bit = u8::from(rng.gen::<f64>() >= p0);
        self.components = if bit == 0 { zero } else { self.branch(q, &branches[1]) };
        self.renormalize();
        bit
    }

    /// Keep only the given branch; returns its probability.
    pub fn postselect(&mut self, q: usize, kraus: &[ComplexMatrix]) -> f64 {
        let total = self.weight();
        self.components = self.branch(q, kraus);
        let w = self.weight();
        self.renormalize();
        if total > 0.0 {
            w / total
        } else {
            0.0
        }
    }

    fn renormalize(&mut self) {
        let w = self.weight();
        if w > 0.0 {
            let s = 1.0 / w.sqrt();
            for c in self.components.iter_mut() {
                for z in c.iter_mut() {
                    *z *= s;
                }
            }
        }
    }

    /// Reduced state of the last `k` qubits.
    pub fn reduced_tail(&self, k: usize) -> ComplexMatrix {
        let d = 1usize << k;
        let mut rho = ComplexMatrix::zeros(d, d);
        for c in &self.components {
            for chunk in c.chunks(d) {
                for r in 0..d {
                    if chunk[r] == ZERO {
                        continue;
                    }
                    for col in 0..d {
                        rho[(r, col)] += chunk[r] * chunk[col].conj();
                    }
                }
            }
        }
        let t = rho.trace().re;
        if t > 0.0 {
            rho.scale_real(1.0 / t)
        } else {
            rho
        }
    }
}

#[derive(Clone, Debug)]
pub struct PatternRun {
    /// Outcomes in measurement order, aligned with [`BrickworkPattern::measured`].
    pub outcomes: Vec<u8>,
    pub output: DensityMatrix,
}

/// Signals `(s_x, s_z)` for vertex `v` from the outcomes recorded so far.
pub fn signals(pattern: &BrickworkPattern, v: Vertex, outcome: impl Fn(Vertex) -> u8) -> (u8, u8) {
    let sx = pattern.x_deps(v).into_iter().fold(0, |acc, u| acc ^ outcome(u));
    let sz = pattern.z_deps(v).into_iter().fold(0, |acc, u| acc ^ outcome(u));
    (sx, sz)
}

/// Run the pattern directly (no blindness) on an `rows`-qubit input.
pub fn run_pattern<R: Rng + ?Sized>(
    pattern: &BrickworkPattern,
    input: &DensityMatrix,
    rng: &mut R,
) -> Result<PatternRun> {
    pattern.check_capacity()?;
    let n = pattern.rows();
    if input.dim() != 1 << n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            found: input.dim(),
        });
    }
    let plus = plus_state(Angle::ZERO).density();
    let mut blocks = vec![input.clone()];
    blocks.extend(std::iter::repeat(plus).take(n * pattern.cols()));
    let mut reg = Ensemble::from_blocks(&blocks)?;
    for (a, b) in pattern.edges() {
        reg.apply_cz(pattern.qubit(*a), pattern.qubit(*b));
    }
    let measured = pattern.measured();
    let mut outcomes: Vec<u8> = Vec::with_capacity(measured.len());
    let index = |v: Vertex| v.col * n + v.row;
    for v in &measured {
        let (sx, sz) = signals(pattern, *v, |u| outcomes[index(u)]);
        let a = corrected_angle(pattern.angle(*v), sx, sz);
        let [p0, p1] = xy_projectors(a);
        let bit = reg.measure(pattern.qubit(*v), &[vec![p0], vec![p1]], rng);
        outcomes.push(bit);
    }
    for o in pattern.outputs() {
        let (sx, sz) = signals(pattern, o, |u| outcomes[index(u)]);
        if sx == 1 {
            reg.apply_single(pattern.qubit(o), &gates::x());
        }
        if sz == 1 {
            reg.apply_single(pattern.qubit(o), &gates::z());
        }
    }
    let output = DensityMatrix::from_trusted(reg.reduced_tail(n), vec![2; n]);
    Ok(PatternRun { outcomes, output })
}
