//! Indicator-driven marking, mesh adaptation under level and count budgets,
//! and mean-preserving transfer of EG fields to the adapted mesh.

use std::collections::HashSet;

use thiserror::Error;

use crate::egspace::{combine, shape_at, DofMap, EgError};
use crate::mesh::{AdaptBounds, CellId, MeshError, QuadMesh};
use crate::quadrature::cell_rule;
use crate::stabilization::IndicatorField;

#[derive(Debug, Error)]
pub enum AmrError {
    #[error("marks were computed on mesh generation {marks}, mesh is at {mesh}")]
    StaleMarks { marks: u64, mesh: u64 },
    #[error("indicator has {got} values for {expected} active cells")]
    IndicatorLength { got: usize, expected: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Space(#[from] EgError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkingPolicy {
    pub refine_fraction: f64,
    pub coarsen_fraction: f64,
    pub bounds: AdaptBounds,
}

impl MarkingPolicy {
    pub fn new(bounds: AdaptBounds) -> Self {
        MarkingPolicy {
            refine_fraction: 0.2,
            coarsen_fraction: 0.1,
            bounds,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marks {
    pub generation: u64,
    /// Highest indicator first.
    pub refine: Vec<CellId>,
    pub coarsen: Vec<CellId>,
}

fn fraction_count(frac: f64, n: usize) -> usize {
    ((frac * n as f64) + 1e-9).floor() as usize
}

/// Top `refine_fraction` of the cells by indicator (nonzero, below `r_max`,
/// and only as many as fit `cell_max` at 3 extra cells each) and bottom
/// `coarsen_fraction` (above `r_min`). Ties are broken by cell id.
pub fn mark(
    mesh: &QuadMesh,
    indicator: &IndicatorField,
    policy: &MarkingPolicy,
) -> Result<Marks, AmrError> {
    let n = mesh.n_active();
    if indicator.values.len() != n {
        return Err(AmrError::IndicatorLength {
            got: indicator.values.len(),
            expected: n,
        });
    }
    let cells = mesh.active_cells();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        indicator.values[b]
            .total_cmp(&indicator.values[a])
            .then(cells[a].cmp(&cells[b]))
    });
    let b = policy.bounds;
    let mut count = n;
    let refine: Vec<CellId> = order[..fraction_count(policy.refine_fraction, n)]
        .iter()
        .filter(|&&i| indicator.values[i] > 0.0)
        .map(|&i| cells[i])
        .filter(|&id| mesh.cell(id).level < b.r_max)
        .take_while(|_| {
            let ok = count + 3 <= b.cell_max;
            if ok {
                count += 3;
            }
            ok
        })
        .collect();
    let refined: HashSet<CellId> = refine.iter().copied().collect();
    order.sort_by(|&a, &b| {
        indicator.values[a]
            .total_cmp(&indicator.values[b])
            .then(cells[a].cmp(&cells[b]))
    });
    let coarsen = order[..fraction_count(policy.coarsen_fraction, n)]
        .iter()
        .map(|&i| cells[i])
        .filter(|id| mesh.cell(*id).level > b.r_min && !refined.contains(id))
        .collect();
    Ok(Marks {
        generation: mesh.generation(),
        refine,
        coarsen,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AdaptReport {
    /// Cells split, including those forced by the balance closure.
    pub refined: usize,
    /// Active cells before and after.
    pub before: usize,
    pub after: usize,
}

impl AdaptReport {
    pub fn changed(&self) -> bool {
        self.refined > 0 || self.before != self.after
    }
}

/// Refine (in mark order, skipping cells whose balance closure would exceed
/// `cell_max`), then coarsen.
pub fn adapt(
    mesh: &mut QuadMesh,
    marks: &Marks,
    bounds: &AdaptBounds,
) -> Result<AdaptReport, AmrError> {
    if marks.generation != mesh.generation() {
        return Err(AmrError::StaleMarks {
            marks: marks.generation,
            mesh: mesh.generation(),
        });
    }
    let before = mesh.n_active();
    let mut pending: HashSet<CellId> = HashSet::new();
    let mut count = before;
    for &id in &marks.refine {
        if mesh.cell(id).level >= bounds.r_max {
            continue;
        }
        let closure = mesh.refine_closure(id, &pending);
        if closure.is_empty() {
            continue;
        }
        if count + 3 * closure.len() > bounds.cell_max {
            continue;
        }
        count += 3 * closure.len();
        pending.extend(closure);
    }
    let mut to_refine: Vec<CellId> = pending.iter().copied().collect();
    to_refine.sort();
    mesh.refine(&to_refine)?;
    let coarsen: Vec<CellId> = marks
        .coarsen
        .iter()
        .copied()
        .filter(|id| mesh.cell(*id).level > bounds.r_min)
        .collect();
    mesh.coarsen(&coarsen);
    Ok(AdaptReport {
        refined: to_refine.len(),
        before,
        after: mesh.n_active(),
    })
}

/// Mean of the old EG function over the new cell `id`.
fn old_mean(old: &QuadMesh, old_map: &DofMap, u: &[f64], new: &QuadMesh, id: CellId) -> f64 {
    if let Some(oi) = old.active_index(id) {
        let l = old_map.local_coeffs(u, oi);
        return 0.25 * (l[0] + l[1] + l[2] + l[3]) + l[4];
    }
    // inside an old cell?
    let mut a = new.cell(id).parent;
    while let Some(pid) = a {
        if let Some(oi) = old.active_index(pid) {
            let ob = old.cell(pid).bbox;
            let nb = new.cell(id).bbox;
            let l = old_map.local_coeffs(u, oi);
            let rule = cell_rule();
            return rule
                .points
                .iter()
                .zip(rule.weights)
                .map(|(r, w)| w * combine(&l, &shape_at(&ob, nb.from_reference(*r))).0)
                .sum();
        }
        a = new.cell(pid).parent;
    }
    // union of old cells
    let children = old
        .cell(id)
        .children
        .expect("coarsened cell has children in the old mesh");
    let area = new.cell(id).bbox.area();
    children
        .iter()
        .map(|&k| old.cell(k).bbox.area() * old_mean(old, old_map, u, new, k))
        .sum::<f64>()
        / area
}

/// Move an EG coefficient vector from `(old, old_map)` to `(new, new_map)`.
/// Vertex values come from the old continuous part; each cell constant is
/// chosen so the cell mean of the old EG function is kept exactly.
pub fn transfer(
    old: &QuadMesh,
    old_map: &DofMap,
    new: &QuadMesh,
    new_map: &DofMap,
    u: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; new_map.n_dofs()];
    for (v, p) in new_map.vertex_positions().iter().enumerate() {
        if new_map.is_slave(v) {
            continue;
        }
        let id = old.locate(*p).expect("vertex inside domain");
        let oi = old.active_index(id).expect("active");
        let mut l = old_map.local_coeffs(u, oi);
        l[4] = 0.0;
        out[v] = combine(&l, &shape_at(&old.cell(id).bbox, *p)).0;
    }
    new_map.distribute(&mut out);
    for (ci, &id) in new.active_cells().iter().enumerate() {
        let l = new_map.local_coeffs(&out, ci);
        let cg_mean = 0.25 * (l[0] + l[1] + l[2] + l[3]);
        out[new_map.const_dof(ci)] = old_mean(old, old_map, u, new, id) - cg_mean;
    }
    out
}

/// Mark-free adaptation step used by the driver: adapt the mesh, rebuild the
/// dof map and transfer every field. Returns the report; `map` and `fields`
/// are replaced only when the mesh changed.
pub fn adapt_and_transfer(
    mesh: &mut QuadMesh,
    map: &mut DofMap,
    fields: &mut [&mut Vec<f64>],
    marks: &Marks,
    bounds: &AdaptBounds,
) -> Result<AdaptReport, AmrError> {
    let old = mesh.clone();
    let report = adapt(mesh, marks, bounds)?;
    if mesh.generation() == old.generation() {
        return Ok(report);
    }
    let new_map = DofMap::build(mesh, map.degree())?;
    for f in fields.iter_mut() {
        **f = transfer(&old, map, mesh, &new_map, f);
    }
    *map = new_map;
    Ok(report)
}
