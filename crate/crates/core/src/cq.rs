//! Classical-quantum states: a classical label register (strings of angles)
//! in block-diagonal form next to a quantum system.

use std::collections::BTreeMap;

use crate::angle::Angle;
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, C64};

pub type Label = Vec<Angle>;

/// `sum_l |l><l| ⊗ blocks[l]`; absent labels are zero blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct CQState {
    dim: usize,
    blocks: BTreeMap<Label, ComplexMatrix>,
}

impl CQState {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            blocks: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &BTreeMap<Label, ComplexMatrix> {
        &self.blocks
    }

    pub fn block(&self, label: &[Angle]) -> Option<&ComplexMatrix> {
        self.blocks.get(label)
    }

    /// Add `weight * m` into the block for `label`.
    pub fn accumulate(&mut self, label: Label, m: &ComplexMatrix, weight: f64) -> Result<()> {
        if m.rows() != self.dim || m.cols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: m.rows(),
            });
        }
        if let Some(first) = self.blocks.keys().next() {
            if first.len() != label.len() {
                return Err(Error::InvalidArgument(format!(
                    "label of length {} in a register of length {}",
                    label.len(),
                    first.len()
                )));
            }
        }
        self.blocks
            .entry(label)
            .or_insert_with(|| ComplexMatrix::zeros(self.dim, self.dim))
            .add_scaled(m, C64::new(weight, 0.0));
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        self.blocks.values().map(|b| b.trace().re).sum()
    }

    /// Distribution of the classical register.
    pub fn marginal(&self) -> BTreeMap<Label, f64> {
        self.blocks.iter().map(|(l, b)| (l.clone(), b.trace().re)).collect()
    }

    /// Apply `f` to every block, producing blocks of dimension `dim`.
    pub fn map_blocks(
        &self,
        dim: usize,
        mut f: impl FnMut(&ComplexMatrix) -> Result<ComplexMatrix>,
    ) -> Result<CQState> {
        let mut out = CQState::new(dim);
        for (l, b) in &self.blocks {
            out.accumulate(l.clone(), &f(b)?, 1.0)?;
        }
        Ok(out)
    }
}

/// `1/2 || a - b ||_1` for block-diagonal classical-quantum states.
pub fn cq_distance(a: &CQState, b: &CQState) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    let len_a = a.blocks.keys().next().map(Vec::len);
    let len_b = b.blocks.keys().next().map(Vec::len);
    if let (Some(x), Some(y)) = (len_a, len_b) {
        if x != y {
            return Err(Error::InvalidArgument(format!(
                "label alphabets differ in length ({x} vs {y})"
            )));
        }
    }
    let zero = ComplexMatrix::zeros(a.dim, a.dim);
    let mut total = 0.0;
    let labels: std::collections::BTreeSet<&Label> = a.blocks.keys().chain(b.blocks.keys()).collect();
    for l in labels {
        let x = a.blocks.get(l).unwrap_or(&zero);
        let y = b.blocks.get(l).unwrap_or(&zero);
        total += linalg::trace_distance(x, y)?;
    }
    Ok(total)
}
