//! The enriched Galerkin space: continuous bilinear nodal functions plus one
//! constant per cell.
//!
//! Dofs are numbered with the continuous block first (one per mesh vertex,
//! hanging vertices included) followed by one constant per active cell in
//! active-cell order. Hanging vertices are slaves: their value is the mean
//! of the two endpoints of the coarse edge they sit on.

use std::collections::HashMap;

use thiserror::Error;

use crate::mesh::{CellId, Face, FaceKind, QuadMesh, Rect, Side};
use crate::quadrature::{cell_rule, LINE_POINTS, LINE_WEIGHTS, NQF};

#[derive(Debug, Error, PartialEq)]
pub enum EgError {
    #[error("polynomial degree {0} is not supported (only k = 1)")]
    UnsupportedDegree(usize),
    #[error("reference point {0:?} lies outside the unit square")]
    OutsideCell([f64; 2]),
    #[error("cell {0} is not active")]
    InactiveCell(CellId),
    #[error("coefficient vector has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
}

/// Slave dof expressed through free master dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub slave: usize,
    pub masters: Vec<(usize, f64)>,
}

/// Global expansion of one local basis function: `(dof, weight)` pairs.
pub type Expansion = Vec<(usize, f64)>;

/// Local basis on a cell: four bilinear nodal functions (SW, SE, NW, NE)
/// followed by the cell constant.
pub const LOCAL_DOFS: usize = 5;

#[derive(Debug, Clone)]
pub struct DofMap {
    degree: usize,
    n_cg: usize,
    n_const: usize,
    vertex_pos: Vec<[f64; 2]>,
    vertex_index: HashMap<(u64, u64), usize>,
    cell_vertices: Vec<[usize; 4]>,
    constraints: Vec<Constraint>,
    slave_of: Vec<Option<usize>>,
    expansions: Vec<[Expansion; LOCAL_DOFS]>,
    mesh_generation: u64,
}

impl DofMap {
    pub fn build(mesh: &QuadMesh, degree: usize) -> Result<Self, EgError> {
        if degree != 1 {
            return Err(EgError::UnsupportedDegree(degree));
        }
        let mut vertex_index = HashMap::new();
        let mut vertex_pos = Vec::new();
        let mut cell_vertices = Vec::with_capacity(mesh.n_active());
        for &id in mesh.active_cells() {
            let bbox = mesh.cell(id).bbox;
            let corners = [
                [bbox.x0, bbox.y0],
                [bbox.x1, bbox.y0],
                [bbox.x0, bbox.y1],
                [bbox.x1, bbox.y1],
            ];
            let keys = mesh.corner_keys(id);
            let mut verts = [0usize; 4];
            for k in 0..4 {
                verts[k] = *vertex_index.entry(keys[k]).or_insert_with(|| {
                    vertex_pos.push(corners[k]);
                    vertex_pos.len() - 1
                });
            }
            cell_vertices.push(verts);
        }
        let n_cg = vertex_pos.len();

        // Raw constraints from hanging sub-faces.
        let mut raw: HashMap<usize, [usize; 2]> = HashMap::new();
        for face in mesh
            .faces()
            .iter()
            .filter(|f| f.kind == FaceKind::HangingSubFace)
        {
            let coarse = face.neighbor_cell().expect("hanging face has a neighbour");
            let side = opposite_side(face.normal);
            let cb = mesh.cell(coarse).bbox;
            let (ca, cbpt) = side_endpoints(&cb, side);
            let mid = [0.5 * (ca[0] + cbpt[0]), 0.5 * (ca[1] + cbpt[1])];
            let mid_key = mesh.vertex_key(mid);
            if let Some(&slave) = vertex_index.get(&mid_key) {
                let m0 = vertex_index[&mesh.vertex_key(ca)];
                let m1 = vertex_index[&mesh.vertex_key(cbpt)];
                raw.insert(slave, [m0, m1]);
            }
        }
        let mut slaves: Vec<usize> = raw.keys().copied().collect();
        slaves.sort_unstable();
        let mut slave_of = vec![None; n_cg];
        let mut constraints = Vec::with_capacity(slaves.len());
        for s in slaves {
            let mut masters: Vec<(usize, f64)> = Vec::new();
            resolve(s, 1.0, &raw, &mut masters, true);
            masters.sort_by_key(|m| m.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(masters.len());
            for (d, w) in masters {
                match merged.last_mut() {
                    Some(last) if last.0 == d => last.1 += w,
                    _ => merged.push((d, w)),
                }
            }
            slave_of[s] = Some(constraints.len());
            constraints.push(Constraint {
                slave: s,
                masters: merged,
            });
        }

        let n_const = mesh.n_active();
        let expansions = cell_vertices
            .iter()
            .enumerate()
            .map(|(ci, verts)| {
                let cg = |v: usize| -> Expansion {
                    match slave_of[v] {
                        Some(k) => constraints[k].masters.clone(),
                        None => vec![(v, 1.0)],
                    }
                };
                [
                    cg(verts[0]),
                    cg(verts[1]),
                    cg(verts[2]),
                    cg(verts[3]),
                    vec![(n_cg + ci, 1.0)],
                ]
            })
            .collect();

        Ok(DofMap {
            degree,
            n_cg,
            n_const,
            vertex_pos,
            vertex_index,
            cell_vertices,
            constraints,
            slave_of,
            expansions,
            mesh_generation: mesh.generation(),
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_cg(&self) -> usize {
        self.n_cg
    }

    pub fn n_const(&self) -> usize {
        self.n_const
    }

    pub fn n_dofs(&self) -> usize {
        self.n_cg + self.n_const
    }

    pub fn mesh_generation(&self) -> u64 {
        self.mesh_generation
    }

    pub fn vertex_positions(&self) -> &[[f64; 2]] {
        &self.vertex_pos
    }

    pub fn vertex_of_key(&self, key: (u64, u64)) -> Option<usize> {
        self.vertex_index.get(&key).copied()
    }

    /// Vertex dofs of an active cell (SW, SE, NW, NE).
    pub fn cell_vertices(&self, active_idx: usize) -> [usize; 4] {
        self.cell_vertices[active_idx]
    }

    pub fn const_dof(&self, active_idx: usize) -> usize {
        self.n_cg + active_idx
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn is_slave(&self, dof: usize) -> bool {
        dof < self.n_cg && self.slave_of[dof].is_some()
    }

    /// Global expansions of the five local basis functions of a cell.
    pub fn expansions(&self, active_idx: usize) -> &[Expansion; LOCAL_DOFS] {
        &self.expansions[active_idx]
    }

    /// Overwrite slave values with their constrained values. Idempotent.
    pub fn distribute(&self, u: &mut [f64]) {
        for c in &self.constraints {
            u[c.slave] = c.masters.iter().map(|&(m, w)| w * u[m]).sum();
        }
    }

    fn check_len(&self, u: &[f64]) -> Result<(), EgError> {
        if u.len() != self.n_dofs() {
            return Err(EgError::Length {
                got: u.len(),
                expected: self.n_dofs(),
            });
        }
        Ok(())
    }

    /// Local coefficients `[SW, SE, NW, NE, const]` of a cell.
    #[inline]
    pub fn local_coeffs(&self, u: &[f64], active_idx: usize) -> [f64; LOCAL_DOFS] {
        let v = self.cell_vertices[active_idx];
        [
            u[v[0]],
            u[v[1]],
            u[v[2]],
            u[v[3]],
            u[self.n_cg + active_idx],
        ]
    }
}

fn resolve(
    dof: usize,
    weight: f64,
    raw: &HashMap<usize, [usize; 2]>,
    out: &mut Vec<(usize, f64)>,
    top: bool,
) {
    match raw.get(&dof) {
        Some(&[a, b]) => {
            resolve(a, 0.5 * weight, raw, out, false);
            resolve(b, 0.5 * weight, raw, out, false);
        }
        None => {
            debug_assert!(!top);
            out.push((dof, weight));
        }
    }
}

fn opposite_side(normal: [f64; 2]) -> Side {
    // Side of the neighbour facing the owner.
    if normal[0] > 0.5 {
        Side::West
    } else if normal[0] < -0.5 {
        Side::East
    } else if normal[1] > 0.5 {
        Side::South
    } else {
        Side::North
    }
}

fn side_endpoints(b: &Rect, side: Side) -> ([f64; 2], [f64; 2]) {
    match side {
        Side::West => ([b.x0, b.y0], [b.x0, b.y1]),
        Side::East => ([b.x1, b.y0], [b.x1, b.y1]),
        Side::South => ([b.x0, b.y0], [b.x1, b.y0]),
        Side::North => ([b.x0, b.y1], [b.x1, b.y1]),
    }
}

pub fn dof_count(mesh: &QuadMesh, degree: usize) -> Result<(usize, usize, usize), EgError> {
    let map = DofMap::build(mesh, degree)?;
    Ok((map.n_cg(), map.n_const(), map.n_dofs()))
}

/// Local basis values and gradients at physical point `p` of a cell.
#[derive(Debug, Clone, Copy)]
pub struct ShapeValues {
    pub value: [f64; LOCAL_DOFS],
    pub grad: [[f64; 2]; LOCAL_DOFS],
}

#[inline]
pub fn shape_at(bbox: &Rect, p: [f64; 2]) -> ShapeValues {
    let hx = bbox.width();
    let hy = bbox.height();
    let xi = (p[0] - bbox.x0) / hx;
    let eta = (p[1] - bbox.y0) / hy;
    let (a, b) = (1.0 - xi, 1.0 - eta);
    ShapeValues {
        value: [a * b, xi * b, a * eta, xi * eta, 1.0],
        grad: [
            [-b / hx, -a / hy],
            [b / hx, -xi / hy],
            [-eta / hx, a / hy],
            [eta / hx, xi / hy],
            [0.0, 0.0],
        ],
    }
}

#[inline]
pub fn combine(local: &[f64; LOCAL_DOFS], s: &ShapeValues) -> (f64, [f64; 2]) {
    let mut v = 0.0;
    let mut g = [0.0, 0.0];
    for k in 0..LOCAL_DOFS {
        v += local[k] * s.value[k];
        g[0] += local[k] * s.grad[k][0];
        g[1] += local[k] * s.grad[k][1];
    }
    (v, g)
}

/// Value of an EG function at physical point `p` inside active cell `active_idx`.
pub fn value_at(map: &DofMap, mesh: &QuadMesh, u: &[f64], active_idx: usize, p: [f64; 2]) -> f64 {
    let bbox = mesh.cell(mesh.active_cells()[active_idx]).bbox;
    combine(&map.local_coeffs(u, active_idx), &shape_at(&bbox, p)).0
}

fn checked_cell(
    map: &DofMap,
    mesh: &QuadMesh,
    u: &[f64],
    cell: CellId,
    r: [f64; 2],
) -> Result<(usize, Rect), EgError> {
    map.check_len(u)?;
    if !(0.0..=1.0).contains(&r[0]) || !(0.0..=1.0).contains(&r[1]) {
        return Err(EgError::OutsideCell(r));
    }
    let idx = mesh.active_index(cell).ok_or(EgError::InactiveCell(cell))?;
    Ok((idx, mesh.cell(cell).bbox))
}

/// Value at a reference point of a cell. Constraints must already be distributed.
pub fn eval(
    map: &DofMap,
    mesh: &QuadMesh,
    u: &[f64],
    cell: CellId,
    r: [f64; 2],
) -> Result<f64, EgError> {
    let (idx, bbox) = checked_cell(map, mesh, u, cell, r)?;
    Ok(combine(
        &map.local_coeffs(u, idx),
        &shape_at(&bbox, bbox.from_reference(r)),
    )
    .0)
}

/// Physical gradient at a reference point; the cell constant contributes nothing.
pub fn eval_grad(
    map: &DofMap,
    mesh: &QuadMesh,
    u: &[f64],
    cell: CellId,
    r: [f64; 2],
) -> Result<[f64; 2], EgError> {
    let (idx, bbox) = checked_cell(map, mesh, u, cell, r)?;
    Ok(combine(
        &map.local_coeffs(u, idx),
        &shape_at(&bbox, bbox.from_reference(r)),
    )
    .1)
}

/// `Π_h f`: nodal interpolation into the continuous part plus the cell mean
/// of the remainder in the constant part.
pub fn interpolate(f: impl Fn([f64; 2]) -> f64, mesh: &QuadMesh, map: &DofMap) -> Vec<f64> {
    let mut u = vec![0.0; map.n_dofs()];
    for (v, p) in map.vertex_positions().iter().enumerate() {
        u[v] = f(*p);
    }
    map.distribute(&mut u);
    let rule = cell_rule();
    for (ci, &id) in mesh.active_cells().iter().enumerate() {
        let bbox = mesh.cell(id).bbox;
        let mut local = map.local_coeffs(&u, ci);
        local[4] = 0.0;
        let mut mean = 0.0;
        for (r, w) in rule.points.iter().zip(rule.weights) {
            let p = bbox.from_reference(*r);
            mean += w * (f(p) - combine(&local, &shape_at(&bbox, p)).0);
        }
        u[map.const_dof(ci)] = mean;
    }
    u
}

/// Integral of an EG function over the domain.
pub fn integrate(map: &DofMap, mesh: &QuadMesh, u: &[f64]) -> f64 {
    let rule = cell_rule();
    mesh.active_cells()
        .iter()
        .enumerate()
        .map(|(ci, &id)| {
            let bbox = mesh.cell(id).bbox;
            let local = map.local_coeffs(u, ci);
            let s: f64 = rule
                .points
                .iter()
                .zip(rule.weights)
                .map(|(r, w)| w * combine(&local, &shape_at(&bbox, bbox.from_reference(*r))).0)
                .sum();
            s * bbox.area()
        })
        .sum()
}

/// `‖u - f‖_{L²}` with the cell quadrature rule.
pub fn l2_error(map: &DofMap, mesh: &QuadMesh, u: &[f64], f: impl Fn([f64; 2]) -> f64) -> f64 {
    let rule = cell_rule();
    let mut sum = 0.0;
    for (ci, &id) in mesh.active_cells().iter().enumerate() {
        let bbox = mesh.cell(id).bbox;
        let local = map.local_coeffs(u, ci);
        for (r, w) in rule.points.iter().zip(rule.weights) {
            let p = bbox.from_reference(*r);
            sum += w * bbox.area() * (combine(&local, &shape_at(&bbox, p)).0 - f(p)).powi(2);
        }
    }
    sum.sqrt()
}

/// Mean value of an EG function on each active cell.
pub fn cell_means(map: &DofMap, mesh: &QuadMesh, u: &[f64]) -> Vec<f64> {
    mesh.active_cells()
        .iter()
        .enumerate()
        .map(|(ci, _)| {
            let l = map.local_coeffs(u, ci);
            // Bilinear mean is the mean of the nodal values.
            0.25 * (l[0] + l[1] + l[2] + l[3]) + l[4]
        })
        .collect()
}

/// Weighted average `δ ζ⁺ + (1-δ) ζ⁻`.
#[inline]
pub fn weighted_average(plus: f64, minus: f64, delta: f64) -> f64 {
    delta * plus + (1.0 - delta) * minus
}

/// Jump `ζ⁺ n⁺ + ζ⁻ n⁻` with `n⁻ = -n⁺`.
#[inline]
pub fn jump(plus: f64, minus: f64, normal: [f64; 2]) -> [f64; 2] {
    [(plus - minus) * normal[0], (plus - minus) * normal[1]]
}

/// Physical quadrature points and weights (already scaled by the length) of a face.
pub fn face_points(face: &Face) -> [([f64; 2], f64); NQF] {
    let mut out = [([0.0; 2], 0.0); NQF];
    for q in 0..NQF {
        out[q] = (face.point(LINE_POINTS[q]), LINE_WEIGHTS[q] * face.length);
    }
    out
}

/// Traces `(ζ⁺, ζ⁻)` of an EG function at the face quadrature points.
/// On boundary faces both entries hold the interior trace.
pub fn face_traces(map: &DofMap, mesh: &QuadMesh, u: &[f64], face: &Face) -> [(f64, f64); NQF] {
    let oi = mesh.active_index(face.owner).expect("active owner");
    let ni = face
        .neighbor_cell()
        .map(|n| mesh.active_index(n).expect("active neighbour"));
    let mut out = [(0.0, 0.0); NQF];
    for (q, (p, _)) in face_points(face).iter().enumerate() {
        let plus = value_at(map, mesh, u, oi, *p);
        let minus = ni.map_or(plus, |n| value_at(map, mesh, u, n, *p));
        out[q] = (plus, minus);
    }
    out
}

/// Jump vector and `δ`-weighted average of an EG function at each face
/// quadrature point. On the boundary the jump is `ζ n` and the average `ζ`.
pub fn face_jump_avg(
    map: &DofMap,
    mesh: &QuadMesh,
    u: &[f64],
    face: &Face,
    delta: f64,
) -> [([f64; 2], f64); NQF] {
    let mut out = [([0.0; 2], 0.0); NQF];
    for (q, (plus, minus)) in face_traces(map, mesh, u, face).into_iter().enumerate() {
        out[q] = if face.is_boundary() {
            ([plus * face.normal[0], plus * face.normal[1]], plus)
        } else {
            (
                jump(plus, minus, face.normal),
                weighted_average(plus, minus, delta),
            )
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    fn unit(n: usize) -> QuadMesh {
        QuadMesh::build_uniform(Rect::unit(), n, n).unwrap()
    }

    #[test]
    fn dof_totals_on_uniform_meshes() {
        assert_eq!(dof_count(&unit(1), 1).unwrap(), (4, 1, 5));
        assert_eq!(dof_count(&unit(4), 1).unwrap().2, 41);
        assert_eq!(dof_count(&unit(8), 1).unwrap().2, 145);
    }

    #[test]
    fn unsupported_degree() {
        assert_eq!(
            dof_count(&unit(2), 2).unwrap_err(),
            EgError::UnsupportedDegree(2)
        );
    }

    #[test]
    fn interpolate_constant() {
        let m = unit(3);
        let map = DofMap::build(&m, 1).unwrap();
        let u = interpolate(|_| 1.0, &m, &map);
        assert!(u[..map.n_cg()].iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(u[map.n_cg()..].iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn interpolate_linear_has_zero_constants() {
        let mut m = unit(2);
        m.refine(&[CellId(0)]).unwrap();
        let map = DofMap::build(&m, 1).unwrap();
        let u = interpolate(|p| p[0], &m, &map);
        assert!(u[map.n_cg()..].iter().all(|&v| v.abs() < 1e-15));
        for (ci, &id) in m.active_cells().iter().enumerate() {
            let c = m.cell(id).bbox.center();
            assert!((value_at(&map, &m, &u, ci, c) - c[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolate_quadratic_on_single_cell() {
        let m = unit(1);
        let map = DofMap::build(&m, 1).unwrap();
        let u = interpolate(|p| p[0] * p[0], &m, &map);
        assert_eq!(&u[..4], &[0.0, 1.0, 0.0, 1.0]);
        assert!((u[4] + 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn eval_constant_dof_only() {
        let m = unit(2);
        let map = DofMap::build(&m, 1).unwrap();
        let mut u = vec![0.0; map.n_dofs()];
        u[map.const_dof(1)] = 2.5;
        let id = m.active_cells()[1];
        assert_eq!(eval(&map, &m, &u, id, [0.3, 0.7]).unwrap(), 2.5);
        assert_eq!(eval_grad(&map, &m, &u, id, [0.3, 0.7]).unwrap(), [0.0, 0.0]);
        assert_eq!(
            eval(&map, &m, &u, m.active_cells()[0], [0.3, 0.7]).unwrap(),
            0.0
        );
    }

    #[test]
    fn eval_rejects_outside_point() {
        let m = unit(1);
        let map = DofMap::build(&m, 1).unwrap();
        let u = vec![0.0; map.n_dofs()];
        assert_eq!(
            eval(&map, &m, &u, CellId(0), [1.2, 0.0]).unwrap_err(),
            EgError::OutsideCell([1.2, 0.0])
        );
    }

    #[test]
    fn hanging_vertices_are_constrained_to_edge_mean() {
        let mut m = unit(2);
        m.refine(&[CellId(0)]).unwrap();
        let map = DofMap::build(&m, 1).unwrap();
        assert_eq!(map.constraints().len(), 2);
        for c in map.constraints() {
            assert_eq!(c.masters.len(), 2);
            assert!(c.masters.iter().all(|&(_, w)| w == 0.5));
            let p = map.vertex_positions()[c.slave];
            let mid: Vec<f64> = (0..2)
                .map(|k| {
                    0.5 * c
                        .masters
                        .iter()
                        .map(|&(d, _)| map.vertex_positions()[d][k])
                        .sum::<f64>()
                })
                .collect();
            assert_eq!(p.to_vec(), mid);
        }
    }

    #[test]
    fn chained_constraints_resolve_to_free_dofs() {
        let mut m = unit(2);
        m.refine(&[CellId(0)]).unwrap();
        let ne = m.cell(CellId(0)).children.unwrap()[3];
        m.refine(&[ne]).unwrap();
        let map = DofMap::build(&m, 1).unwrap();
        for c in map.constraints() {
            assert!(c.masters.iter().all(|&(d, _)| !map.is_slave(d)));
            assert!((c.masters.iter().map(|m| m.1).sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn distribute_is_idempotent() {
        let mut m = unit(2);
        m.refine(&[CellId(3)]).unwrap();
        let map = DofMap::build(&m, 1).unwrap();
        let mut u: Vec<f64> = (0..map.n_dofs()).map(|i| (i as f64 * 0.37).sin()).collect();
        map.distribute(&mut u);
        let once = u.clone();
        map.distribute(&mut u);
        assert_eq!(once, u);
    }

    #[test]
    fn interpolant_is_continuous_across_hanging_faces() {
        let mut m = unit(2);
        m.refine(&[CellId(0)]).unwrap();
        let map = DofMap::build(&m, 1).unwrap();
        let u = interpolate(|p| (3.0 * p[0]).sin() + p[1] * p[1], &m, &map);
        let mut cg = u.clone();
        for v in cg[map.n_cg()..].iter_mut() {
            *v = 0.0;
        }
        for f in m.faces().iter().filter(|f| !f.is_boundary()) {
            for (j, _) in face_jump_avg(&map, &m, &cg, f, 0.5) {
                assert!(j[0].abs() < 1e-14 && j[1].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn weighted_average_and_jump() {
        assert_eq!(weighted_average(2.0, 1.0, 0.5), 1.5);
        assert_eq!(weighted_average(2.0, 1.0, 1.0), 2.0);
        let j = jump(2.0, 1.0, [1.0, 0.0]);
        assert_eq!((j[0] * j[0] + j[1] * j[1]).sqrt(), 1.0);
    }

    #[test]
    fn continuous_field_has_no_jump() {
        let m = unit(3);
        let map = DofMap::build(&m, 1).unwrap();
        let mut u = interpolate(|p| p[0] + 2.0 * p[1], &m, &map);
        for v in u[map.n_cg()..].iter_mut() {
            *v = 0.7;
        }
        for f in m.faces().iter().filter(|f| !f.is_boundary()) {
            for (j, _) in face_jump_avg(&map, &m, &u, f, 0.3) {
                assert!(j[0].abs() < 1e-14 && j[1].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn interpolation_preserves_cell_means_of_cubic() {
        let mut m = unit(2);
        m.refine(&[CellId(1)]).unwrap();
        let map = DofMap::build(&m, 1).unwrap();
        let f = |p: [f64; 2]| p[0].powi(3) - p[0] * p[1] + 0.5;
        let u = interpolate(f, &m, &map);
        let means = cell_means(&map, &m, &u);
        let rule = cell_rule();
        for (ci, &id) in m.active_cells().iter().enumerate() {
            let b = m.cell(id).bbox;
            let exact: f64 = rule
                .points
                .iter()
                .zip(rule.weights)
                .map(|(r, w)| w * f(b.from_reference(*r)))
                .sum();
            assert!((means[ci] - exact).abs() < 1e-14);
        }
    }
}
