//! Entropy-residual viscosity: entropy functions, cell and face residuals,
//! the per-cell indicator `ER` and the viscosity `μ = min(μ_Lin, μ_Ent)`.

use rayon::prelude::*;

use crate::egspace::{combine, face_points, shape_at, DofMap};
use crate::flow::{Bdf, FaceFlux};
use crate::mesh::{FaceNeighbor, QuadMesh};
use crate::quadrature::cell_rule;
use crate::transport::{source_split, SourceField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyKind {
    /// `|c|^b / b`, `b` a positive even integer.
    Power(u32),
    /// `-log(|c(1-c)| + ε)`.
    Log(f64),
    /// `|c - r|`.
    Kruzkov(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    /// `C* = C^n`.
    Lagged,
    /// `C* = 2C^n - C^{n-1}`.
    Extrapolated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyConfig {
    pub kind: EntropyKind,
    pub lambda_lin: f64,
    pub lambda_ent: f64,
    pub extrapolation: Extrapolation,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            kind: EntropyKind::Log(1e-4),
            lambda_lin: 0.5,
            lambda_ent: 0.5,
            extrapolation: Extrapolation::Extrapolated,
        }
    }
}

impl EntropyConfig {
    pub fn disabled(&self) -> bool {
        self.lambda_lin == 0.0 || self.lambda_ent == 0.0
    }
}

/// `(E(c), E'(c))`.
pub fn entropy_eval(kind: EntropyKind, c: f64) -> (f64, f64) {
    match kind {
        EntropyKind::Power(b) => {
            let b = b as i32;
            let a = c.abs();
            (a.powi(b) / b as f64, c.signum() * a.powi(b - 1))
        }
        EntropyKind::Log(eps) => {
            let g = c * (1.0 - c);
            let d = g.abs() + eps;
            (-d.ln(), -g.signum() * (1.0 - 2.0 * c) / d)
        }
        EntropyKind::Kruzkov(r) => ((c - r).abs(), (c - r).signum()),
    }
}

/// Coefficient vector of `C*` (extrapolation is linear in the coefficients).
pub fn c_star(mode: Extrapolation, c_n: &[f64], c_nm1: &[f64], first_step: bool) -> Vec<f64> {
    match mode {
        Extrapolation::Extrapolated if !first_step => {
            c_n.iter().zip(c_nm1).map(|(a, b)| 2.0 * a - b).collect()
        }
        _ => c_n.to_vec(),
    }
}

/// Coefficient vectors entering the time derivative of the entropy:
/// `BDF(E)` is applied to `E(values[0]), E(values[1]), E(values[2])`.
#[derive(Debug, Clone, Copy)]
pub struct EntropyHistory<'a> {
    pub values: [&'a [f64]; 3],
    pub bdf: Bdf,
}

/// Per-cell `max_qp |BDF(E) + U·E'∇C* - E' q̃|`. Without history the time
/// term is omitted.
#[allow(clippy::too_many_arguments)]
pub fn cell_residual(
    kind: EntropyKind,
    mesh: &QuadMesh,
    map: &DofMap,
    c_star: &[f64],
    history: Option<EntropyHistory>,
    flux: &FaceFlux,
    sources: &SourceField,
) -> Vec<f64> {
    let rule = cell_rule();
    let cells = mesh.active_cells();
    (0..cells.len())
        .into_par_iter()
        .map(|ci| {
            let bbox = mesh.cell(cells[ci]).bbox;
            let ls = map.local_coeffs(c_star, ci);
            let hist = history.map(|h| h.values.map(|u| map.local_coeffs(u, ci)));
            let (qp, qm) = source_split(sources.q[ci]);
            let mut worst = 0.0f64;
            for (q, r) in rule.points.iter().enumerate() {
                let s = shape_at(&bbox, bbox.from_reference(*r));
                let (c, g) = combine(&ls, &s);
                let (_, de) = entropy_eval(kind, c);
                let u = flux.cell[ci][q];
                let q_tilde = sources.c_q * qp + c * qm;
                let mut res = de * (u[0] * g[0] + u[1] * g[1]) - de * q_tilde;
                if let (Some(h), Some(l)) = (history, hist.as_ref()) {
                    let e = l.map(|coef| entropy_eval(kind, combine(&coef, &s).0).0);
                    res += h.bdf.apply(e[0], e[1], e[2]);
                }
                worst = worst.max(res.abs());
            }
            worst
        })
        .collect()
}

/// Per-face `max_qp h_e⁻¹ |{U}·n| |[E(C*)]|`; zero on boundary faces.
pub fn face_residual(
    kind: EntropyKind,
    mesh: &QuadMesh,
    map: &DofMap,
    c_star: &[f64],
    flux: &FaceFlux,
) -> Vec<f64> {
    let faces = mesh.faces();
    (0..faces.len())
        .into_par_iter()
        .map(|fi| {
            let f = &faces[fi];
            let FaceNeighbor::Cell(nb) = f.neighbor else {
                return 0.0;
            };
            let oi = mesh.active_index(f.owner).expect("active owner");
            let ni = mesh.active_index(nb).expect("active neighbour");
            let lo = map.local_coeffs(c_star, oi);
            let ln = map.local_coeffs(c_star, ni);
            let (bo, bn) = (mesh.cell(f.owner).bbox, mesh.cell(nb).bbox);
            let mut worst = 0.0f64;
            for (q, (p, _)) in face_points(f).iter().enumerate() {
                let eo = entropy_eval(kind, combine(&lo, &shape_at(&bo, *p)).0).0;
                let en = entropy_eval(kind, combine(&ln, &shape_at(&bn, *p)).0).0;
                let t = &flux.traces[fi];
                let avg = [
                    0.5 * (t[0][q][0] + t[1][q][0]),
                    0.5 * (t[0][q][1] + t[1][q][1]),
                ];
                let un = avg[0] * f.normal[0] + avg[1] * f.normal[1];
                worst = worst.max(un.abs() * (eo - en).abs() / f.length);
            }
            worst
        })
        .collect()
}

/// Entropy indicator `ER` per active cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndicatorField {
    pub values: Vec<f64>,
}

/// `ER_T = max(cell residual, max over interior faces of T)`.
pub fn indicator(mesh: &QuadMesh, cell_res: &[f64], face_res: &[f64]) -> IndicatorField {
    let mut values = cell_res.to_vec();
    for (f, &j) in mesh.faces().iter().zip(face_res) {
        if let FaceNeighbor::Cell(nb) = f.neighbor {
            for id in [f.owner, nb] {
                let ci = mesh.active_index(id).expect("active cell");
                values[ci] = values[ci].max(j);
            }
        }
    }
    IndicatorField { values }
}

/// `(‖E(C*) - Ē‖_∞, max |E(C*)|)` over the cell quadrature points.
pub fn entropy_normalization(
    kind: EntropyKind,
    mesh: &QuadMesh,
    map: &DofMap,
    c_star: &[f64],
) -> (f64, f64) {
    let rule = cell_rule();
    let mut vals = Vec::with_capacity(mesh.n_active() * rule.weights.len());
    let mut integral = 0.0;
    let mut area = 0.0;
    for (ci, &id) in mesh.active_cells().iter().enumerate() {
        let bbox = mesh.cell(id).bbox;
        let l = map.local_coeffs(c_star, ci);
        for (r, w) in rule.points.iter().zip(rule.weights) {
            let e = entropy_eval(
                kind,
                combine(&l, &shape_at(&bbox, bbox.from_reference(*r))).0,
            )
            .0;
            integral += w * bbox.area() * e;
            vals.push(e);
        }
        area += bbox.area();
    }
    let mean = integral / area;
    let dev = vals.iter().fold(0.0f64, |m, e| m.max((e - mean).abs()));
    let scale = vals.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    (dev, scale)
}

/// Stabilization viscosity per active cell with its two candidates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ViscosityField {
    pub mu: Vec<f64>,
    pub mu_lin: Vec<f64>,
    pub mu_ent: Vec<f64>,
}

impl ViscosityField {
    pub fn zero(n: usize) -> Self {
        ViscosityField {
            mu: vec![0.0; n],
            mu_lin: vec![0.0; n],
            mu_ent: vec![0.0; n],
        }
    }

    /// Whether the first-order viscosity is the active choice on cell `ci`.
    pub fn linear_selected(&self, ci: usize) -> bool {
        self.mu[ci] > 0.0 && self.mu_lin[ci] <= self.mu_ent[ci]
    }
}

/// `μ_Lin = λ_Lin h_T max|U|`, `μ_Ent = λ_Ent h_T² ER_T / norm`, `μ = min`.
pub fn viscosity(
    config: &EntropyConfig,
    mesh: &QuadMesh,
    indicator: &IndicatorField,
    flux: &FaceFlux,
    normalization: (f64, f64),
) -> ViscosityField {
    let (norm, scale) = normalization;
    let degenerate = norm < 1e-14 * scale.max(1.0);
    let mut out = ViscosityField::zero(mesh.n_active());
    for (ci, &id) in mesh.active_cells().iter().enumerate() {
        let h = mesh.cell(id).size();
        let lin = config.lambda_lin * h * flux.cell_max_speed(ci);
        let ent = if degenerate {
            0.0
        } else {
            config.lambda_ent * h * h * indicator.values[ci] / norm
        };
        out.mu_lin[ci] = lin;
        out.mu_ent[ci] = ent;
        out.mu[ci] = lin.min(ent);
    }
    out
}

/// Everything the transport step and the adaptation need from the
/// stabilization stage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Stabilization {
    pub indicator: IndicatorField,
    pub viscosity: ViscosityField,
}

/// Full stabilization stage for one step. `step` counts completed steps,
/// so `step == 0` has no concentration history.
#[allow(clippy::too_many_arguments)]
pub fn compute(
    config: &EntropyConfig,
    mesh: &QuadMesh,
    map: &DofMap,
    c_n: &[f64],
    c_nm1: &[f64],
    flux: &FaceFlux,
    sources: &SourceField,
    dt: f64,
    step: usize,
) -> Stabilization {
    let first = step == 0;
    let cs = c_star(config.extrapolation, c_n, c_nm1, first);
    let history = if first {
        None
    } else {
        match config.extrapolation {
            Extrapolation::Extrapolated => Some(EntropyHistory {
                values: [&cs, c_n, c_nm1],
                bdf: Bdf::new(2, dt),
            }),
            Extrapolation::Lagged => Some(EntropyHistory {
                values: [c_n, c_nm1, c_nm1],
                bdf: Bdf::new(1, dt),
            }),
        }
    };
    let cr = cell_residual(config.kind, mesh, map, &cs, history, flux, sources);
    let fr = face_residual(config.kind, mesh, map, &cs, flux);
    let ind = indicator(mesh, &cr, &fr);
    let norm = entropy_normalization(config.kind, mesh, map, &cs);
    let visc = viscosity(config, mesh, &ind, flux, norm);
    Stabilization {
        indicator: ind,
        viscosity: visc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::egspace::interpolate;
    use crate::mesh::Rect;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn entropy_values() {
        assert_eq!(entropy_eval(EntropyKind::Power(2), 3.0), (4.5, 3.0));
        let (e, _) = entropy_eval(EntropyKind::Log(1e-4), 0.5);
        assert_relative_eq!(e, -(0.2501f64).ln(), max_relative = 1e-14);
        assert!((e - 1.38589).abs() < 1e-5);
        assert_eq!(entropy_eval(EntropyKind::Kruzkov(0.25), 0.75), (0.5, 1.0));
        assert_eq!(entropy_eval(EntropyKind::Kruzkov(0.25), 0.0), (0.25, -1.0));
        assert_eq!(entropy_eval(EntropyKind::Power(4), -2.0), (4.0, -8.0));
    }

    #[test]
    fn log_entropy_derivative_matches_finite_difference() {
        let k = EntropyKind::Log(1e-4);
        for c in [0.1, 0.3, 0.62, 0.9, -0.2, 1.3] {
            let h = 1e-7;
            let fd = (entropy_eval(k, c + h).0 - entropy_eval(k, c - h).0) / (2.0 * h);
            assert_relative_eq!(entropy_eval(k, c).1, fd, max_relative = 1e-5);
        }
    }

    proptest! {
        #[test]
        fn entropies_are_midpoint_convex(a in -0.5..1.5f64, b in -0.5..1.5f64) {
            for k in [EntropyKind::Power(2), EntropyKind::Power(4), EntropyKind::Kruzkov(0.3)] {
                let m = entropy_eval(k, 0.5 * (a + b)).0;
                prop_assert!(m <= 0.5 * (entropy_eval(k, a).0 + entropy_eval(k, b).0) + 1e-12);
            }
            // the log entropy is convex on [0, 1]
            let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
            let k = EntropyKind::Log(1e-4);
            let m = entropy_eval(k, 0.5 * (a + b)).0;
            prop_assert!(m <= 0.5 * (entropy_eval(k, a).0 + entropy_eval(k, b).0) + 1e-12);
        }

        #[test]
        fn viscosity_bounded_by_linear(er in 0.0..1e3f64, u in 0.0..5.0f64) {
            let mesh = QuadMesh::build_uniform(Rect::unit(), 2, 2).unwrap();
            let flux = FaceFlux::from_velocity(&mesh, |_| [u, 0.0]);
            let ind = IndicatorField { values: vec![er; 4] };
            let v = viscosity(&EntropyConfig::default(), &mesh, &ind, &flux, (0.3, 1.0));
            for ci in 0..4 {
                prop_assert!(v.mu[ci] >= 0.0 && v.mu[ci] <= v.mu_lin[ci] + 1e-15);
            }
        }
    }

    #[test]
    fn constant_state_has_zero_residual_and_viscosity() {
        let mesh = QuadMesh::build_uniform(Rect::unit(), 4, 4).unwrap();
        let map = DofMap::build(&mesh, 1).unwrap();
        let c = interpolate(|_| 0.4, &mesh, &map);
        let flux = FaceFlux::from_velocity(&mesh, |_| [1.0, 0.5]);
        let s = compute(
            &EntropyConfig::default(),
            &mesh,
            &map,
            &c,
            &c,
            &flux,
            &SourceField::none(16),
            0.1,
            3,
        );
        assert!(s.indicator.values.iter().all(|v| *v < 1e-13));
        assert!(s.viscosity.mu.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn steady_linear_profile_with_matching_source_is_entropy_exact() {
        let mesh = QuadMesh::build_uniform(Rect::unit(), 4, 4).unwrap();
        let map = DofMap::build(&mesh, 1).unwrap();
        let c = interpolate(|x| x[0], &mesh, &map);
        let flux = FaceFlux::from_velocity(&mesh, |_| [1.0, 0.0]);
        let src = SourceField {
            q: vec![1.0; 16],
            c_q: 1.0,
        };
        for kind in [EntropyKind::Power(2), EntropyKind::Log(1e-4)] {
            let h = EntropyHistory {
                values: [&c, &c, &c],
                bdf: Bdf::new(2, 0.1),
            };
            let r = cell_residual(kind, &mesh, &map, &c, Some(h), &flux, &src);
            assert!(r.iter().all(|v| *v < 1e-12), "{r:?}");
        }
    }

    #[test]
    fn step_profile_concentrates_residual() {
        let n = 16;
        let mesh = QuadMesh::build_uniform(Rect::unit(), n, n).unwrap();
        let map = DofMap::build(&mesh, 1).unwrap();
        // smooth on both sides, jump across x = 0.5 carried by the constants
        let mut c = interpolate(|x| 0.05 * x[1], &mesh, &map);
        for (ci, &id) in mesh.active_cells().iter().enumerate() {
            if mesh.cell(id).bbox.center()[0] < 0.5 {
                c[map.const_dof(ci)] += 1.0;
            }
        }
        let flux = FaceFlux::from_velocity(&mesh, |_| [1.0, 0.0]);
        let kind = EntropyKind::Power(2);
        let cr = cell_residual(
            kind,
            &mesh,
            &map,
            &c,
            None,
            &flux,
            &SourceField::none(n * n),
        );
        let fr = face_residual(kind, &mesh, &map, &c, &flux);
        let ind = indicator(&mesh, &cr, &fr);
        let (mut near, mut far) = (f64::INFINITY, 0.0f64);
        for (ci, &id) in mesh.active_cells().iter().enumerate() {
            let x = mesh.cell(id).bbox.center()[0];
            if (x - 0.5).abs() < 1.0 / n as f64 {
                near = near.min(ind.values[ci]);
            } else {
                far = far.max(ind.values[ci]);
            }
        }
        assert!(near >= 10.0 * far, "near {near}, far {far}");
    }

    #[test]
    fn face_residual_formula_and_trivial_cases() {
        let mesh = QuadMesh::build_uniform(Rect::new(0.0, 0.0, 1.0, 0.5), 2, 1).unwrap();
        let map = DofMap::build(&mesh, 1).unwrap();
        // E = c²/2 jumps by 1 across the face at x = 0.5 when constants are √2 and 0
        let mut c = vec![0.0; map.n_dofs()];
        c[map.const_dof(0)] = 2f64.sqrt();
        let flux = FaceFlux::from_velocity(&mesh, |_| [2.0, 0.0]);
        let fr = face_residual(EntropyKind::Power(2), &mesh, &map, &c, &flux);
        let interior = mesh.faces().iter().position(|f| !f.is_boundary()).unwrap();
        // h_e = 0.5
        assert_relative_eq!(fr[interior], 4.0, max_relative = 1e-14);
        let still = FaceFlux::zero(&mesh);
        assert!(
            face_residual(EntropyKind::Power(2), &mesh, &map, &c, &still)
                .iter()
                .all(|v| *v == 0.0)
        );
        let cont = interpolate(|x| x[0], &mesh, &map);
        assert!(
            face_residual(EntropyKind::Power(2), &mesh, &map, &cont, &flux)
                .iter()
                .all(|v| *v < 1e-15)
        );
    }

    #[test]
    fn viscosity_selection_rules() {
        let mesh = QuadMesh::build_uniform(Rect::unit(), 2, 2).unwrap();
        let cfg = EntropyConfig::default();
        let still = FaceFlux::zero(&mesh);
        let ind = IndicatorField {
            values: vec![5.0; 4],
        };
        assert!(viscosity(&cfg, &mesh, &ind, &still, (1.0, 1.0))
            .mu
            .iter()
            .all(|v| *v == 0.0));
        let flux = FaceFlux::from_velocity(&mesh, |_| [1.0, 0.0]);
        let shock = IndicatorField {
            values: vec![1e9; 4],
        };
        let v = viscosity(&cfg, &mesh, &shock, &flux, (1.0, 1.0));
        assert!((0..4).all(|c| v.linear_selected(c) && v.mu[c] == v.mu_lin[c]));
        let smooth = IndicatorField {
            values: vec![1e-12; 4],
        };
        let v = viscosity(&cfg, &mesh, &smooth, &flux, (1.0, 1.0));
        assert!(v.mu.iter().all(|m| *m < 1e-12));
        // homogeneity in ER
        let a = viscosity(
            &cfg,
            &mesh,
            &IndicatorField {
                values: vec![0.1; 4],
            },
            &flux,
            (1.0, 1.0),
        );
        let b = viscosity(
            &cfg,
            &mesh,
            &IndicatorField {
                values: vec![0.2; 4],
            },
            &flux,
            (1.0, 1.0),
        );
        assert_eq!(b.mu_ent[0], 2.0 * a.mu_ent[0]);
        // degenerate normalization switches the entropy viscosity off
        let d = viscosity(&cfg, &mesh, &shock, &flux, (1e-20, 1.0));
        assert!(d.mu.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn entropy_viscosity_decays_quadratically_for_smooth_data() {
        let mut prev: Option<f64> = None;
        let mut slopes = Vec::new();
        for n in [8, 16, 32] {
            let mesh = QuadMesh::build_uniform(Rect::unit(), n, n).unwrap();
            let map = DofMap::build(&mesh, 1).unwrap();
            let c = interpolate(|x| x[0], &mesh, &map);
            let flux = FaceFlux::from_velocity(&mesh, |_| [1.0, 0.0]);
            let src = SourceField {
                q: vec![1.0; n * n],
                c_q: 1.0,
            };
            let cr = cell_residual(EntropyKind::Power(2), &mesh, &map, &c, None, &flux, &src);
            let fr = face_residual(EntropyKind::Power(2), &mesh, &map, &c, &flux);
            let ind = indicator(&mesh, &cr, &fr);
            // add a fixed smooth residual floor so μ_Ent is nonzero
            let ind = IndicatorField {
                values: ind.values.iter().map(|v| v + 1.0).collect(),
            };
            let norm = entropy_normalization(EntropyKind::Power(2), &mesh, &map, &c);
            let cfg = EntropyConfig {
                lambda_lin: 1e6,
                ..EntropyConfig::default()
            };
            let v = viscosity(&cfg, &mesh, &ind, &flux, norm);
            let m = v.mu_ent.iter().cloned().fold(0.0, f64::max);
            if let Some(p) = prev {
                slopes.push((p / m).log2());
            }
            prev = Some(m);
        }
        assert!(slopes.iter().all(|s| *s >= 1.8), "{slopes:?}");
    }
}
