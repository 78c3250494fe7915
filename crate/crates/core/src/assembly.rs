//! Local element/face blocks and their scatter into the global EG system.
//!
//! Local dofs of a block are the five basis functions of the first cell
//! followed (for interior faces) by the five of the second cell. Slave dofs
//! never receive contributions; they get identity rows so the system stays
//! square and nonsingular.

use rayon::prelude::*;

use crate::egspace::{DofMap, LOCAL_DOFS};
use crate::linalg::{
    gmres, BlockDiagonal, BlockPartition, GmresConfig, Identity, LinalgError, Preconditioner,
    SolveStats, SparseMatrix, TripletBuilder,
};
use crate::mesh::QuadMesh;

pub(crate) const MAX_LOCAL: usize = 2 * LOCAL_DOFS;

#[derive(Debug, Clone)]
pub(crate) struct Block {
    /// Active indices of the cells involved; `sides == 1` uses only `cells[0]`.
    pub cells: [usize; 2],
    pub sides: usize,
    pub mat: [[f64; MAX_LOCAL]; MAX_LOCAL],
    pub rhs: [f64; MAX_LOCAL],
}

impl Block {
    pub fn cell(ci: usize) -> Self {
        Block {
            cells: [ci, ci],
            sides: 1,
            mat: [[0.0; MAX_LOCAL]; MAX_LOCAL],
            rhs: [0.0; MAX_LOCAL],
        }
    }

    pub fn pair(a: usize, b: usize) -> Self {
        Block {
            cells: [a, b],
            sides: 2,
            mat: [[0.0; MAX_LOCAL]; MAX_LOCAL],
            rhs: [0.0; MAX_LOCAL],
        }
    }

    pub fn n(&self) -> usize {
        self.sides * LOCAL_DOFS
    }
}

/// Scatter blocks into a sparse matrix and right-hand side.
pub(crate) fn scatter(map: &DofMap, blocks: &[Block]) -> (SparseMatrix, Vec<f64>) {
    let n = map.n_dofs();
    let mut tb = TripletBuilder::with_capacity(n, n, blocks.len() * 40);
    let mut rhs = vec![0.0; n];
    for b in blocks {
        let nl = b.n();
        let exps: Vec<&Vec<(usize, f64)>> = (0..nl)
            .map(|k| &map.expansions(b.cells[k / LOCAL_DOFS])[k % LOCAL_DOFS])
            .collect();
        for i in 0..nl {
            for &(di, wi) in exps[i] {
                if b.rhs[i] != 0.0 {
                    rhs[di] += wi * b.rhs[i];
                }
                for j in 0..nl {
                    let v = b.mat[i][j];
                    if v == 0.0 {
                        continue;
                    }
                    for &(dj, wj) in exps[j] {
                        tb.add(di, dj, wi * wj * v);
                    }
                }
            }
        }
    }
    for c in map.constraints() {
        tb.add(c.slave, c.slave, 1.0);
    }
    (tb.build(), rhs)
}

/// Build blocks for `0..count` in parallel; ordering is preserved so the
/// scatter stays deterministic.
pub(crate) fn build_blocks<F>(count: usize, f: F) -> Vec<Block>
where
    F: Fn(usize) -> Option<Block> + Sync + Send,
{
    (0..count).into_par_iter().filter_map(f).collect()
}

/// Solve with the (CG, constant) block-diagonal ILU(0) preconditioner,
/// then distribute hanging constraints and fix the gauge (see
/// [`normalize_gauge`]). `x` holds the initial guess.
pub(crate) fn solve(
    mesh: &QuadMesh,
    map: &DofMap,
    a: &SparseMatrix,
    b: &[f64],
    x: &mut [f64],
    cfg: &GmresConfig,
) -> Result<SolveStats, LinalgError> {
    let partition = BlockPartition::new(map.n_cg(), map.n_const());
    let stats = match BlockDiagonal::new(a, partition) {
        Ok(p) => run(a, b, x, cfg, &p),
        Err(LinalgError::ZeroPivot(_)) => run(a, b, x, cfg, &Identity(a.nrows())),
        Err(e) => Err(e),
    }?;
    normalize_gauge(mesh, map, x);
    Ok(stats)
}

/// The continuous part and the cell constants both contain the global
/// constant, so every EG system has the kernel `(1 on free CG dofs, -1 on
/// constants)`. Shift along it so the area-weighted mean of the constants is
/// zero; the represented function is unchanged.
pub fn normalize_gauge(mesh: &QuadMesh, map: &DofMap, x: &mut [f64]) {
    let mut num = 0.0;
    let mut den = 0.0;
    for (ci, &id) in mesh.active_cells().iter().enumerate() {
        let a = mesh.cell(id).bbox.area();
        num += a * x[map.const_dof(ci)];
        den += a;
    }
    let t = num / den;
    for v in 0..map.n_cg() {
        if !map.is_slave(v) {
            x[v] += t;
        }
    }
    for ci in 0..map.n_const() {
        x[map.const_dof(ci)] -= t;
    }
    map.distribute(x);
}

fn run(
    a: &SparseMatrix,
    b: &[f64],
    x: &mut [f64],
    cfg: &GmresConfig,
    p: &dyn Preconditioner,
) -> Result<SolveStats, LinalgError> {
    gmres(a, b, x, cfg, p)
}
