//! Diagonal group layout over the coefficient matrices and assembly of the
//! stacked generalized Yule-Walker system.

use crate::autocov::AcovPair;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CoeffMatrix {
    A,
    B,
}

/// One penalty group: all coefficients on the k-th pair of diagonals of A or
/// of B, with weight `sqrt(|g|)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Group {
    pub matrix: CoeffMatrix,
    pub diagonal: usize,
    pub members: Vec<usize>,
    pub weight: f64,
}

/// Partition of the stacked coefficient vector into diagonal groups, plus the
/// per-equation column maps that define each block of the design.
///
/// Ordering is fixed: equations i = 1..N in order; within an equation, the
/// admissible A-columns by j ascending, then the B-columns by j ascending.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupLayout {
    pub n_units: usize,
    pub cap: usize,
    /// position -> (matrix, row i, col j), all zero-based
    pub entries: Vec<(CoeffMatrix, usize, usize)>,
    /// start offset of each equation's coefficient segment
    pub equation_offsets: Vec<usize>,
    pub groups: Vec<Group>,
    index: HashMap<(CoeffMatrix, usize, usize), usize>,
}

impl GroupLayout {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position_of(&self, matrix: CoeffMatrix, i: usize, j: usize) -> Option<usize> {
        self.index.get(&(matrix, i, j)).copied()
    }

    /// Columns `(matrix, j)` of equation i's block, in position order.
    pub fn equation_columns(&self, i: usize) -> Vec<(CoeffMatrix, usize)> {
        let start = self.equation_offsets[i];
        let end = if i + 1 < self.n_units {
            self.equation_offsets[i + 1]
        } else {
            self.entries.len()
        };
        self.entries[start..end].iter().map(|&(m, _, j)| (m, j)).collect()
    }

    /// Equation owning a stacked position.
    pub fn equation_of(&self, pos: usize) -> usize {
        self.entries[pos].1
    }
}

/// Build the layout for `n` units at admissible bandwidth `cap`, enforcing
/// the identification cap `cap <= floor(n/4)`.
pub fn build_layout(n: usize, cap: usize) -> Result<GroupLayout> {
    if cap > n / 4 {
        return Err(Error::InvalidArgument(format!(
            "cap {cap} exceeds floor(n/4) = {}",
            n / 4
        )));
    }
    Ok(build_layout_unchecked(n, cap))
}

/// Layout without the identification cap. Exists for population-exactness
/// tests that need `cap = n - 1`; production paths go through `build_layout`.
pub fn build_layout_unchecked(n: usize, cap: usize) -> GroupLayout {
    let mut entries = Vec::new();
    let mut equation_offsets = Vec::with_capacity(n);
    let mut index = HashMap::new();
    for i in 0..n {
        equation_offsets.push(entries.len());
        for j in 0..n {
            if j != i && i.abs_diff(j) <= cap {
                index.insert((CoeffMatrix::A, i, j), entries.len());
                entries.push((CoeffMatrix::A, i, j));
            }
        }
        for j in 0..n {
            if i.abs_diff(j) <= cap {
                index.insert((CoeffMatrix::B, i, j), entries.len());
                entries.push((CoeffMatrix::B, i, j));
            }
        }
    }
    let mut groups = Vec::new();
    for k in 1..=cap {
        let members: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, &(m, i, j))| m == CoeffMatrix::A && i.abs_diff(j) == k)
            .map(|(p, _)| p)
            .collect();
        groups.push(Group {
            matrix: CoeffMatrix::A,
            diagonal: k,
            weight: (members.len() as f64).sqrt(),
            members,
        });
    }
    for k in 0..=cap {
        let members: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, &(m, i, j))| m == CoeffMatrix::B && i.abs_diff(j) == k)
            .map(|(p, _)| p)
            .collect();
        groups.push(Group {
            matrix: CoeffMatrix::B,
            diagonal: k,
            weight: (members.len() as f64).sqrt(),
            members,
        });
    }
    GroupLayout {
        n_units: n,
        cap,
        entries,
        equation_offsets,
        groups,
        index,
    }
}

/// Stacked generalized Yule-Walker system: per-equation targets (rows of the
/// lag-1 autocovariance) and the block-diagonal design selected from
/// `[Sigma_1' Sigma_0]` by each equation's column map.
#[derive(Debug, Clone)]
pub struct YwSystem {
    /// Concatenated per-equation targets, length N*N.
    pub target: Vec<f64>,
    /// One N x p_i design block per equation.
    pub blocks: Vec<Mat>,
    pub layout: GroupLayout,
}

impl YwSystem {
    pub fn n_units(&self) -> usize {
        self.layout.n_units
    }

    /// Target segment of equation i.
    pub fn target_of(&self, i: usize) -> &[f64] {
        let n = self.n_units();
        &self.target[i * n..(i + 1) * n]
    }
}

pub fn assemble_system(acov: &AcovPair, layout: &GroupLayout) -> Result<YwSystem> {
    let n = layout.n_units;
    if acov.sigma0.rows() != n || acov.sigma1.rows() != n {
        return Err(Error::Dimension(format!(
            "autocovariance dimension {} does not match layout n_units {n}",
            acov.sigma0.rows()
        )));
    }
    let mut target = Vec::with_capacity(n * n);
    let mut blocks = Vec::with_capacity(n);
    for i in 0..n {
        target.extend_from_slice(acov.sigma1.row(i));
        let cols = layout.equation_columns(i);
        if cols.is_empty() {
            // equation with no admissible coefficients still contributes its
            // target rows; represent the block as a single zero column
            blocks.push(Mat::zeros(n, 1));
            continue;
        }
        let mut block = Mat::zeros(n, cols.len());
        for (c, &(m, j)) in cols.iter().enumerate() {
            for r in 0..n {
                let v = match m {
                    // column j of Sigma_1' is row j of Sigma_1
                    CoeffMatrix::A => acov.sigma1.get(j, r),
                    CoeffMatrix::B => acov.sigma0.get(r, j),
                };
                block.set(r, c, v);
            }
        }
        blocks.push(block);
    }
    Ok(YwSystem { target, blocks, layout: layout.clone() })
}
