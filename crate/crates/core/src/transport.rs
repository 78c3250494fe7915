//! Upwinded EG advection–dispersion for the concentration, with the
//! stabilization dissipation assembled implicitly.

use thiserror::Error;

use crate::assembly::{self, Block};
use crate::egspace::{combine, face_points, shape_at, DofMap, LOCAL_DOFS};
use crate::flow::{Bdf, FaceFlux};
use crate::linalg::{GmresConfig, LinalgError, SolveStats, SparseMatrix};
use crate::mesh::{Face, FaceNeighbor, QuadMesh, Side};
use crate::physics::{dispersion_tensor, tensor_apply, DispersionParams};
use crate::quadrature::cell_rule;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("flux belongs to mesh generation {flux}, mesh is at {mesh}")]
    StaleFlux { flux: u64, mesh: u64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportParams {
    pub porosity: f64,
    pub rho0: f64,
    /// Interior penalty `α_c`.
    pub penalty: f64,
    /// Penalty `α_s` of the dissipation form.
    pub stab_penalty: f64,
}

impl Default for TransportParams {
    fn default() -> Self {
        TransportParams {
            porosity: 1.0,
            rho0: 1.0,
            penalty: 2.0,
            stab_penalty: 1.0,
        }
    }
}

/// Inflow concentration per domain side (indexed like [`Side::index`]).
/// Whether a boundary point is inflow is decided by the sign of `U·n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportBC {
    pub c_in: [f64; 4],
}

impl TransportBC {
    pub fn uniform(c_in: f64) -> Self {
        TransportBC { c_in: [c_in; 4] }
    }

    pub fn on(&self, side: Side) -> f64 {
        self.c_in[side.index()]
    }
}

/// Volumetric source per active cell with the injected concentration.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceField {
    pub q: Vec<f64>,
    pub c_q: f64,
}

impl SourceField {
    pub fn none(n_cells: usize) -> Self {
        SourceField {
            q: vec![0.0; n_cells],
            c_q: 0.0,
        }
    }
}

/// Upwind trace: `c_plus` (the neighbour) when `U·n⁺ < 0`, otherwise `c_minus`.
#[inline]
pub fn upwind_value(c_plus: f64, c_minus: f64, u_dot_n_plus: f64) -> f64 {
    if u_dot_n_plus < 0.0 {
        c_plus
    } else {
        c_minus
    }
}

/// `(q⁺, q⁻) = (max(0,q), min(0,q))`.
#[inline]
pub fn source_split(q: f64) -> (f64, f64) {
    (q.max(0.0), q.min(0.0))
}

#[derive(Debug, Clone, Copy)]
pub struct TransportInputs<'a> {
    /// Flux at the new time level (advection).
    pub flux: &'a FaceFlux,
    /// Flux at the previous time level (dispersion tensor).
    pub flux_old: &'a FaceFlux,
    pub dispersion: &'a DispersionParams,
    /// Stabilization viscosity per active cell.
    pub mu_stab: &'a [f64],
    pub c_n: &'a [f64],
    pub c_nm1: &'a [f64],
    pub sources: &'a SourceField,
    pub bdf: Bdf,
}

fn check(mesh: &QuadMesh, map: &DofMap, inp: &TransportInputs) -> Result<(), TransportError> {
    for f in [inp.flux, inp.flux_old] {
        if f.mesh_generation != mesh.generation() {
            return Err(TransportError::StaleFlux {
                flux: f.mesh_generation,
                mesh: mesh.generation(),
            });
        }
    }
    let nc = mesh.n_active();
    if inp.mu_stab.len() != nc || inp.sources.q.len() != nc {
        return Err(TransportError::Dimension(format!(
            "{nc} cells, {} viscosities, {} sources",
            inp.mu_stab.len(),
            inp.sources.q.len()
        )));
    }
    if inp.c_n.len() != map.n_dofs() || inp.c_nm1.len() != map.n_dofs() {
        return Err(TransportError::Dimension(format!(
            "{} dofs, history lengths {} and {}",
            map.n_dofs(),
            inp.c_n.len(),
            inp.c_nm1.len()
        )));
    }
    if map.mesh_generation() != mesh.generation() {
        return Err(TransportError::Dimension(
            "dof map and mesh generations differ".into(),
        ));
    }
    Ok(())
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn assemble_transport(
    mesh: &QuadMesh,
    map: &DofMap,
    params: &TransportParams,
    bc: &TransportBC,
    inp: &TransportInputs,
) -> Result<(SparseMatrix, Vec<f64>), TransportError> {
    check(mesh, map, inp)?;
    let rho = params.rho0;
    let phirho = params.porosity * rho;
    let with_d = !inp.dispersion.is_zero();
    let rule = cell_rule();
    let cells = mesh.active_cells();
    let mut blocks = assembly::build_blocks(cells.len(), |ci| {
        let bbox = mesh.cell(cells[ci]).bbox;
        let area = bbox.area();
        let mu = rho * inp.mu_stab[ci];
        let (qp, qm) = source_split(inp.sources.q[ci]);
        let cn = map.local_coeffs(inp.c_n, ci);
        let cnm1 = map.local_coeffs(inp.c_nm1, ci);
        let mut b = Block::cell(ci);
        for (q, (r, wr)) in rule.points.iter().zip(rule.weights).enumerate() {
            let p = bbox.from_reference(*r);
            let s = shape_at(&bbox, p);
            let w = wr * area;
            let u = inp.flux.cell[ci][q];
            let d = with_d.then(|| dispersion_tensor(inp.dispersion, inp.flux_old.cell[ci][q]));
            let hist = inp.bdf.history(combine(&cn, &s).0, combine(&cnm1, &s).0);
            for j in 0..LOCAL_DOFS {
                let flux_j = match &d {
                    Some(d) => {
                        let g = tensor_apply(d, s.grad[j]);
                        [
                            phirho * g[0] + mu * s.grad[j][0],
                            phirho * g[1] + mu * s.grad[j][1],
                        ]
                    }
                    None => [mu * s.grad[j][0], mu * s.grad[j][1]],
                };
                for i in 0..LOCAL_DOFS {
                    b.mat[i][j] += w
                        * (phirho * inp.bdf.leading() * s.value[j] * s.value[i]
                            + dot(flux_j, s.grad[i])
                            - rho * s.value[j] * dot(u, s.grad[i])
                            - qm * s.value[j] * s.value[i]);
                }
            }
            for i in 0..LOCAL_DOFS {
                b.rhs[i] += w * (-phirho * hist + inp.sources.c_q * qp) * s.value[i];
            }
        }
        Some(b)
    });
    let faces = mesh.faces();
    let face_blocks = assembly::build_blocks(faces.len(), |fi| {
        face_block(mesh, params, bc, inp, fi, &faces[fi])
    });
    blocks.extend(face_blocks);
    Ok(assembly::scatter(map, &blocks))
}

fn face_block(
    mesh: &QuadMesh,
    params: &TransportParams,
    bc: &TransportBC,
    inp: &TransportInputs,
    fi: usize,
    face: &Face,
) -> Option<Block> {
    let rho = params.rho0;
    let phirho = params.porosity * rho;
    let oi = mesh.active_index(face.owner).expect("active owner");
    let ob = mesh.cell(face.owner).bbox;
    let n = face.normal;
    let inv_h = 1.0 / face.length;
    let un = &inp.flux.normal[fi];
    match face.neighbor {
        FaceNeighbor::Cell(nb) => {
            let ni = mesh.active_index(nb).expect("active neighbour");
            let nbb = mesh.cell(nb).bbox;
            let (mo, mn) = (rho * inp.mu_stab[oi], rho * inp.mu_stab[ni]);
            let with_d = !inp.dispersion.is_zero();
            let pen = inv_h * (params.penalty * rho + params.stab_penalty * 0.5 * (mo + mn));
            let mut b = Block::pair(oi, ni);
            for (q, (p, w)) in face_points(face).into_iter().enumerate() {
                let so = shape_at(&ob, p);
                let sn = shape_at(&nbb, p);
                let (d_o, d_n) = if with_d {
                    let t = &inp.flux_old.traces[fi];
                    (
                        Some(dispersion_tensor(inp.dispersion, t[0][q])),
                        Some(dispersion_tensor(inp.dispersion, t[1][q])),
                    )
                } else {
                    (None, None)
                };
                let mut jw = [0.0; 2 * LOCAL_DOFS];
                let mut avg = [0.0; 2 * LOCAL_DOFS];
                let mut up = [0.0; 2 * LOCAL_DOFS];
                for k in 0..LOCAL_DOFS {
                    jw[k] = so.value[k];
                    jw[k + LOCAL_DOFS] = -sn.value[k];
                    let go = so.grad[k];
                    let gn = sn.grad[k];
                    let fo = d_o
                        .as_ref()
                        .map_or(0.0, |d| phirho * dot(tensor_apply(d, go), n));
                    let fnb = d_n
                        .as_ref()
                        .map_or(0.0, |d| phirho * dot(tensor_apply(d, gn), n));
                    avg[k] = 0.5 * (fo + mo * dot(go, n));
                    avg[k + LOCAL_DOFS] = 0.5 * (fnb + mn * dot(gn, n));
                    if un[q] >= 0.0 {
                        up[k] = so.value[k];
                    } else {
                        up[k + LOCAL_DOFS] = sn.value[k];
                    }
                }
                for i in 0..2 * LOCAL_DOFS {
                    if jw[i] == 0.0 {
                        continue;
                    }
                    for j in 0..2 * LOCAL_DOFS {
                        b.mat[i][j] += w * jw[i] * (-avg[j] + rho * un[q] * up[j] + pen * jw[j]);
                    }
                }
            }
            Some(b)
        }
        FaceNeighbor::Boundary(side) => {
            if un.iter().all(|v| *v == 0.0) {
                return None;
            }
            let c_in = bc.on(side);
            let mut b = Block::cell(oi);
            for (q, (p, w)) in face_points(face).into_iter().enumerate() {
                let s = shape_at(&ob, p);
                if un[q] > 0.0 {
                    for i in 0..LOCAL_DOFS {
                        for j in 0..LOCAL_DOFS {
                            b.mat[i][j] += w * rho * un[q] * s.value[j] * s.value[i];
                        }
                    }
                } else if un[q] < 0.0 {
                    for i in 0..LOCAL_DOFS {
                        b.rhs[i] -= w * c_in * rho * un[q] * s.value[i];
                    }
                }
            }
            Some(b)
        }
    }
}

/// Assemble and solve for `C^{n+1}`, starting GMRES from `C^n`.
pub fn solve_transport(
    mesh: &QuadMesh,
    map: &DofMap,
    params: &TransportParams,
    bc: &TransportBC,
    inp: &TransportInputs,
    cfg: &GmresConfig,
) -> Result<(Vec<f64>, SolveStats), TransportError> {
    let (a, rhs) = assemble_transport(mesh, map, params, bc, inp)?;
    let mut x = inp.c_n.to_vec();
    let stats = assembly::solve(mesh, map, &a, &rhs, &mut x, cfg)?;
    Ok((x, stats))
}
