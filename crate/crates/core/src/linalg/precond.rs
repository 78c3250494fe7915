use std::ops::Range;

use super::{LinalgError, SparseMatrix};

pub trait Preconditioner {
    fn dim(&self) -> usize;
    /// `z = M^{-1} r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct Identity(pub usize);

impl Preconditioner for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Incomplete LU factorization with zero fill-in, stored in the sparsity
/// pattern of the input (unit lower factor implied).
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: SparseMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &SparseMatrix) -> Result<Self, LinalgError> {
        a.check_square()?;
        let n = a.nrows();
        let row_ptr = a.row_ptr().to_vec();
        let col_idx = a.col_idx().to_vec();
        let mut vals = a.values().to_vec();
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                if col_idx[k] == i {
                    diag_pos[i] = k;
                }
            }
            if diag_pos[i] == usize::MAX {
                return Err(LinalgError::ZeroPivot(i));
            }
        }
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            let (s, e) = (row_ptr[i], row_ptr[i + 1]);
            for k in s..e {
                marker[col_idx[k]] = k;
            }
            for kk in s..e {
                let k = col_idx[kk];
                if k >= i {
                    break;
                }
                let pivot = vals[diag_pos[k]];
                if pivot == 0.0 {
                    return Err(LinalgError::ZeroPivot(k));
                }
                let factor = vals[kk] / pivot;
                vals[kk] = factor;
                for jj in diag_pos[k] + 1..row_ptr[k + 1] {
                    let m = marker[col_idx[jj]];
                    if m != usize::MAX {
                        vals[m] -= factor * vals[jj];
                    }
                }
            }
            for k in s..e {
                marker[col_idx[k]] = usize::MAX;
            }
            if vals[diag_pos[i]] == 0.0 || !vals[diag_pos[i]].is_finite() {
                return Err(LinalgError::ZeroPivot(i));
            }
        }
        let lu = {
            let mut t = super::TripletBuilder::with_capacity(n, n, vals.len());
            for i in 0..n {
                for k in row_ptr[i]..row_ptr[i + 1] {
                    t.add(i, col_idx[k], vals[k]);
                }
            }
            t.build()
        };
        Ok(Ilu0 { lu, diag_pos })
    }
}

impl Preconditioner for Ilu0 {
    fn dim(&self) -> usize {
        self.lu.nrows()
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.dim();
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let v = self.lu.values();
        for i in 0..n {
            let mut acc = r[i];
            for k in rp[i]..self.diag_pos[i] {
                acc -= v[k] * z[ci[k]];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in self.diag_pos[i] + 1..rp[i + 1] {
                acc -= v[k] * z[ci[k]];
            }
            z[i] = acc / v[self.diag_pos[i]];
        }
    }
}

/// Split of the dofs into the continuous block and the cell-constant block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    pub cg: Range<usize>,
    pub constant: Range<usize>,
}

impl BlockPartition {
    pub fn new(n_cg: usize, n_const: usize) -> Self {
        Self {
            cg: 0..n_cg,
            constant: n_cg..n_cg + n_const,
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), LinalgError> {
        let ok = self.cg.start == 0 && self.cg.end == self.constant.start && self.constant.end == n;
        if !ok {
            return Err(LinalgError::Partition(format!(
                "{:?} + {:?} does not cover 0..{n}",
                self.cg, self.constant
            )));
        }
        Ok(())
    }
}

/// Block-diagonal preconditioner: ILU(0) on each diagonal block, ignoring
/// the off-diagonal coupling blocks.
#[derive(Debug, Clone)]
pub struct BlockDiagonal {
    partition: BlockPartition,
    blocks: Vec<(Range<usize>, Ilu0)>,
}

impl BlockDiagonal {
    pub fn new(a: &SparseMatrix, partition: BlockPartition) -> Result<Self, LinalgError> {
        a.check_square()?;
        partition.validate(a.nrows())?;
        let mut blocks = Vec::with_capacity(2);
        for range in [partition.cg.clone(), partition.constant.clone()] {
            if !range.is_empty() {
                let ilu = Ilu0::new(&a.submatrix(range.clone())).map_err(|e| match e {
                    LinalgError::ZeroPivot(i) => LinalgError::ZeroPivot(i + range.start),
                    other => other,
                })?;
                blocks.push((range, ilu));
            }
        }
        Ok(BlockDiagonal { partition, blocks })
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }
}

impl Preconditioner for BlockDiagonal {
    fn dim(&self) -> usize {
        self.partition.constant.end
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for (range, ilu) in &self.blocks {
            ilu.apply(&r[range.clone()], &mut z[range.clone()]);
        }
    }
}
