//! Slightly compressible Darcy flow: weighted interior-penalty EG pressure
//! solve and the locally conservative flux built from it.

use thiserror::Error;

use crate::assembly::{self, Block};
use crate::egspace::{combine, face_points, shape_at, DofMap, LOCAL_DOFS};
use crate::linalg::{GmresConfig, LinalgError, SolveStats, SparseMatrix};
use crate::mesh::{Face, FaceNeighbor, QuadMesh, Side};
use crate::quadrature::{cell_rule, NQC, NQF};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("directional permeability must be positive (got {0})")]
    NonPositivePermeability(f64),
    #[error("dof map belongs to mesh generation {map}, mesh is at {mesh}")]
    StaleDofMap { map: u64, mesh: u64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Backward differentiation in time: `BDF(u) = (a0 u^{n+1} + a1 u^n + a2 u^{n-1}) / dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bdf {
    pub order: u8,
    pub dt: f64,
}

impl Bdf {
    pub fn new(order: u8, dt: f64) -> Self {
        assert!(order == 1 || order == 2, "BDF order must be 1 or 2");
        Bdf { order, dt }
    }

    pub fn coeffs(&self) -> [f64; 3] {
        match self.order {
            1 => [1.0, -1.0, 0.0],
            _ => [1.5, -2.0, 0.5],
        }
    }

    #[inline]
    pub fn apply(&self, u_np1: f64, u_n: f64, u_nm1: f64) -> f64 {
        let a = self.coeffs();
        (a[0] * u_np1 + a[1] * u_n + a[2] * u_nm1) / self.dt
    }

    /// Part of the operator that does not involve `u^{n+1}`.
    #[inline]
    pub fn history(&self, u_n: f64, u_nm1: f64) -> f64 {
        let a = self.coeffs();
        (a[1] * u_n + a[2] * u_nm1) / self.dt
    }

    #[inline]
    pub fn leading(&self) -> f64 {
        self.coeffs()[0] / self.dt
    }
}

pub fn bdf_apply(order: u8, dt: f64, u_np1: f64, u_n: f64, u_nm1: f64) -> f64 {
    Bdf::new(order, dt).apply(u_np1, u_n, u_nm1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub porosity: f64,
    pub rho0: f64,
    /// Fluid compressibility `c_F` (1/Pa).
    pub c_f: f64,
    /// -1 SIPG, 0 IIPG, +1 NIPG.
    pub theta: f64,
    pub penalty: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            porosity: 1.0,
            rho0: 1.0,
            c_f: 0.0,
            theta: 0.0,
            penalty: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowBoundary {
    /// Pressure value (Pa).
    Dirichlet(f64),
    /// Outward mass flux `ρ₀ u·n` (kg/(m²·s)).
    Neumann(f64),
}

/// Boundary condition per domain side, indexed like [`Side::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowBC {
    pub sides: [FlowBoundary; 4],
}

impl FlowBC {
    pub fn no_flow() -> Self {
        FlowBC {
            sides: [FlowBoundary::Neumann(0.0); 4],
        }
    }

    /// Pressure `p_left` on the west side, `p_right` on the east side, no flow elsewhere.
    pub fn left_to_right(p_left: f64, p_right: f64) -> Self {
        let mut bc = Self::no_flow();
        bc.sides[Side::West.index()] = FlowBoundary::Dirichlet(p_left);
        bc.sides[Side::East.index()] = FlowBoundary::Dirichlet(p_right);
        bc
    }

    pub fn on(&self, side: Side) -> FlowBoundary {
        self.sides[side.index()]
    }
}

/// `(β_e, κ_e)`: weight of the `+` side and harmonic mean.
pub fn weights(kappa_plus: f64, kappa_minus: f64) -> Result<(f64, f64), FlowError> {
    for k in [kappa_plus, kappa_minus] {
        if !(k > 0.0) {
            return Err(FlowError::NonPositivePermeability(k));
        }
    }
    let s = kappa_plus + kappa_minus;
    Ok((kappa_minus / s, 2.0 * kappa_plus * kappa_minus / s))
}

/// Per-cell data for one pressure solve. `kappa` and `source` hold one value
/// per active cell.
#[derive(Debug, Clone, Copy)]
pub struct PressureInputs<'a> {
    pub kappa: &'a [f64],
    pub source: &'a [f64],
    pub p_n: &'a [f64],
    pub p_nm1: &'a [f64],
    pub bdf: Bdf,
}

fn check(mesh: &QuadMesh, map: &DofMap, inp: &PressureInputs) -> Result<(), FlowError> {
    if map.mesh_generation() != mesh.generation() {
        return Err(FlowError::StaleDofMap {
            map: map.mesh_generation(),
            mesh: mesh.generation(),
        });
    }
    let nc = mesh.n_active();
    if inp.kappa.len() != nc || inp.source.len() != nc {
        return Err(FlowError::Dimension(format!(
            "{} cells, {} permeabilities, {} sources",
            nc,
            inp.kappa.len(),
            inp.source.len()
        )));
    }
    let nd = map.n_dofs();
    if inp.p_n.len() != nd || inp.p_nm1.len() != nd {
        return Err(FlowError::Dimension(format!(
            "{} dofs, history lengths {} and {}",
            nd,
            inp.p_n.len(),
            inp.p_nm1.len()
        )));
    }
    if let Some(&k) = inp.kappa.iter().find(|k| !(**k > 0.0)) {
        return Err(FlowError::NonPositivePermeability(k));
    }
    Ok(())
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn assemble_pressure(
    mesh: &QuadMesh,
    map: &DofMap,
    params: &FlowParams,
    bc: &FlowBC,
    inp: &PressureInputs,
) -> Result<(SparseMatrix, Vec<f64>), FlowError> {
    check(mesh, map, inp)?;
    let rho = params.rho0;
    let storage = rho * params.porosity * params.c_f;
    let rule = cell_rule();
    let cells = mesh.active_cells();
    let mut blocks = assembly::build_blocks(cells.len(), |ci| {
        let bbox = mesh.cell(cells[ci]).bbox;
        let area = bbox.area();
        let kappa = inp.kappa[ci];
        let pn = map.local_coeffs(inp.p_n, ci);
        let pnm1 = map.local_coeffs(inp.p_nm1, ci);
        let mut b = Block::cell(ci);
        for (r, wr) in rule.points.iter().zip(rule.weights) {
            let p = bbox.from_reference(*r);
            let s = shape_at(&bbox, p);
            let w = wr * area;
            let hist = if storage != 0.0 {
                inp.bdf.history(combine(&pn, &s).0, combine(&pnm1, &s).0)
            } else {
                0.0
            };
            for i in 0..LOCAL_DOFS {
                for j in 0..LOCAL_DOFS {
                    b.mat[i][j] += w
                        * (rho * kappa * dot(s.grad[i], s.grad[j])
                            + storage * inp.bdf.leading() * s.value[i] * s.value[j]);
                }
                b.rhs[i] += w * (inp.source[ci] - storage * hist) * s.value[i];
            }
        }
        Some(b)
    });
    let faces = mesh.faces();
    let face_blocks = assembly::build_blocks(faces.len(), |fi| {
        face_block(mesh, params, bc, inp.kappa, &faces[fi])
    });
    blocks.extend(face_blocks);
    Ok(assembly::scatter(map, &blocks))
}

fn face_block(
    mesh: &QuadMesh,
    params: &FlowParams,
    bc: &FlowBC,
    kappa: &[f64],
    face: &Face,
) -> Option<Block> {
    let rho = params.rho0;
    let theta = params.theta;
    let oi = mesh.active_index(face.owner).expect("active owner");
    let ob = mesh.cell(face.owner).bbox;
    let n = face.normal;
    let pen = params.penalty / face.length;
    match face.neighbor {
        FaceNeighbor::Cell(nb) => {
            let ni = mesh.active_index(nb).expect("active neighbour");
            let nbb = mesh.cell(nb).bbox;
            let (beta, ke) = weights(kappa[oi], kappa[ni]).expect("validated permeability");
            let mut b = Block::pair(oi, ni);
            for (p, w) in face_points(face) {
                let so = shape_at(&ob, p);
                let sn = shape_at(&nbb, p);
                let mut jw = [0.0; 2 * LOCAL_DOFS];
                let mut avg = [0.0; 2 * LOCAL_DOFS];
                for k in 0..LOCAL_DOFS {
                    jw[k] = so.value[k];
                    jw[k + LOCAL_DOFS] = -sn.value[k];
                    avg[k] = beta * kappa[oi] * dot(so.grad[k], n);
                    avg[k + LOCAL_DOFS] = (1.0 - beta) * kappa[ni] * dot(sn.grad[k], n);
                }
                for i in 0..2 * LOCAL_DOFS {
                    for j in 0..2 * LOCAL_DOFS {
                        b.mat[i][j] += w
                            * rho
                            * (-avg[j] * jw[i] + theta * jw[j] * avg[i] + pen * ke * jw[j] * jw[i]);
                    }
                }
            }
            Some(b)
        }
        FaceNeighbor::Boundary(side) => {
            let k = kappa[oi];
            let mut b = Block::cell(oi);
            match bc.on(side) {
                FlowBoundary::Dirichlet(g) => {
                    for (p, w) in face_points(face) {
                        let s = shape_at(&ob, p);
                        for i in 0..LOCAL_DOFS {
                            let avg_i = k * dot(s.grad[i], n);
                            for j in 0..LOCAL_DOFS {
                                let avg_j = k * dot(s.grad[j], n);
                                b.mat[i][j] += w
                                    * rho
                                    * (-avg_j * s.value[i]
                                        + theta * s.value[j] * avg_i
                                        + pen * k * s.value[j] * s.value[i]);
                            }
                            b.rhs[i] += w * rho * g * (theta * avg_i + pen * k * s.value[i]);
                        }
                    }
                }
                FlowBoundary::Neumann(g) => {
                    if g == 0.0 {
                        return None;
                    }
                    for (p, w) in face_points(face) {
                        let s = shape_at(&ob, p);
                        for i in 0..LOCAL_DOFS {
                            b.rhs[i] -= w * g * s.value[i];
                        }
                    }
                }
            }
            Some(b)
        }
    }
}

/// Assemble and solve for `P^{n+1}`, starting GMRES from `P^n`.
pub fn solve_pressure(
    mesh: &QuadMesh,
    map: &DofMap,
    params: &FlowParams,
    bc: &FlowBC,
    inp: &PressureInputs,
    cfg: &GmresConfig,
) -> Result<(Vec<f64>, SolveStats), FlowError> {
    let (a, rhs) = assemble_pressure(mesh, map, params, bc, inp)?;
    let mut x = inp.p_n.to_vec();
    let stats = assembly::solve(mesh, map, &a, &rhs, &mut x, cfg)?;
    Ok((x, stats))
}

/// Single-valued normal velocity on every face plus the cell velocity field.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFlux {
    pub mesh_generation: u64,
    /// `U·n` at the face quadrature points, `n` pointing owner → neighbour.
    pub normal: Vec<[f64; NQF]>,
    /// Cell velocity traces at the face quadrature points: `[owner, neighbour]`
    /// (both the owner trace on boundary faces).
    pub traces: Vec<[[[f64; 2]; NQF]; 2]>,
    /// Cell velocity at the cell quadrature points.
    pub cell: Vec<[[f64; 2]; NQC]>,
}

impl FaceFlux {
    pub fn zero(mesh: &QuadMesh) -> Self {
        FaceFlux {
            mesh_generation: mesh.generation(),
            normal: vec![[0.0; NQF]; mesh.faces().len()],
            traces: vec![[[[0.0; 2]; NQF]; 2]; mesh.faces().len()],
            cell: vec![[[0.0; 2]; NQC]; mesh.n_active()],
        }
    }

    /// Flux of a prescribed continuous velocity field.
    pub fn from_velocity(mesh: &QuadMesh, u: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let rule = cell_rule();
        let mut out = Self::zero(mesh);
        for (fi, face) in mesh.faces().iter().enumerate() {
            for (q, (p, _)) in face_points(face).iter().enumerate() {
                let v = u(*p);
                out.normal[fi][q] = dot(v, face.normal);
                out.traces[fi][0][q] = v;
                out.traces[fi][1][q] = v;
            }
        }
        for (ci, &id) in mesh.active_cells().iter().enumerate() {
            let bbox = mesh.cell(id).bbox;
            for (q, r) in rule.points.iter().enumerate() {
                out.cell[ci][q] = u(bbox.from_reference(*r));
            }
        }
        out
    }

    /// `∫_e U·n` with the owner orientation.
    pub fn integrated(&self, mesh: &QuadMesh, face: usize) -> f64 {
        let f = &mesh.faces()[face];
        face_points(f)
            .iter()
            .zip(&self.normal[face])
            .map(|((_, w), un)| w * un)
            .sum()
    }

    pub fn max_abs_normal(&self) -> f64 {
        self.normal
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|U|` over the quadrature points of a cell.
    pub fn cell_max_speed(&self, ci: usize) -> f64 {
        self.cell[ci]
            .iter()
            .fold(0.0f64, |m, u| m.max(dot(*u, *u).sqrt()))
    }

    /// `Σ_e ±∫_e U·n` per cell (outward positive).
    pub fn net_outflow(&self, mesh: &QuadMesh) -> Vec<f64> {
        let mut out = vec![0.0; mesh.n_active()];
        for (fi, f) in mesh.faces().iter().enumerate() {
            let flux = self.integrated(mesh, fi);
            out[mesh.active_index(f.owner).expect("active owner")] += flux;
            if let Some(nb) = f.neighbor_cell() {
                out[mesh.active_index(nb).expect("active neighbour")] -= flux;
            }
        }
        out
    }
}

/// Conservative flux from a converged pressure; `kappa` and `bc` must match the solve.
pub fn reconstruct_flux(
    mesh: &QuadMesh,
    map: &DofMap,
    params: &FlowParams,
    bc: &FlowBC,
    kappa: &[f64],
    p: &[f64],
) -> Result<FaceFlux, FlowError> {
    if kappa.len() != mesh.n_active() || p.len() != map.n_dofs() {
        return Err(FlowError::Dimension(format!(
            "{} permeabilities, {} coefficients",
            kappa.len(),
            p.len()
        )));
    }
    let mut out = FaceFlux::zero(mesh);
    let rule = cell_rule();
    for (ci, &id) in mesh.active_cells().iter().enumerate() {
        let bbox = mesh.cell(id).bbox;
        let local = map.local_coeffs(p, ci);
        for (q, r) in rule.points.iter().enumerate() {
            let g = combine(&local, &shape_at(&bbox, bbox.from_reference(*r))).1;
            out.cell[ci][q] = [-kappa[ci] * g[0], -kappa[ci] * g[1]];
        }
    }
    for (fi, face) in mesh.faces().iter().enumerate() {
        let oi = mesh.active_index(face.owner).expect("active owner");
        let ob = mesh.cell(face.owner).bbox;
        let lo = map.local_coeffs(p, oi);
        let n = face.normal;
        let pen = params.penalty / face.length;
        for (q, (pt, _)) in face_points(face).iter().enumerate() {
            let (vo, go) = combine(&lo, &shape_at(&ob, *pt));
            let uo = [-kappa[oi] * go[0], -kappa[oi] * go[1]];
            out.traces[fi][0][q] = uo;
            out.normal[fi][q] = match face.neighbor {
                FaceNeighbor::Cell(nb) => {
                    let ni = mesh.active_index(nb).expect("active neighbour");
                    let (vn, gn) = combine(
                        &map.local_coeffs(p, ni),
                        &shape_at(&mesh.cell(nb).bbox, *pt),
                    );
                    let un = [-kappa[ni] * gn[0], -kappa[ni] * gn[1]];
                    out.traces[fi][1][q] = un;
                    let (beta, ke) = weights(kappa[oi], kappa[ni])?;
                    beta * dot(uo, n) + (1.0 - beta) * dot(un, n) + pen * ke * (vo - vn)
                }
                FaceNeighbor::Boundary(side) => {
                    out.traces[fi][1][q] = uo;
                    match bc.on(side) {
                        FlowBoundary::Dirichlet(g) => dot(uo, n) + pen * kappa[oi] * (vo - g),
                        FlowBoundary::Neumann(g) => g / params.rho0,
                    }
                }
            };
        }
    }
    Ok(out)
}

/// Per-cell mass balance `ρ₀φc_F ∫_T BDF(P) + ρ₀ Σ ±∫_e U·n - ∫_T q`.
pub fn local_conservation_residual(
    mesh: &QuadMesh,
    map: &DofMap,
    params: &FlowParams,
    flux: &FaceFlux,
    source: &[f64],
    p: [&[f64]; 3],
    bdf: Bdf,
) -> Vec<f64> {
    let storage = params.rho0 * params.porosity * params.c_f;
    let outflow = flux.net_outflow(mesh);
    let means = [p[0], p[1], p[2]].map(|u| crate::egspace::cell_means(map, mesh, u));
    mesh.active_cells()
        .iter()
        .enumerate()
        .map(|(ci, &id)| {
            let area = mesh.cell(id).bbox.area();
            storage * area * bdf.apply(means[0][ci], means[1][ci], means[2][ci])
                + params.rho0 * outflow[ci]
                - source[ci] * area
        })
        .collect()
}
