//! Per-step scalar diagnostics, finger measurements and the CSV writer.

use std::io::{self, Write};

use crate::egspace::{combine, shape_at, DofMap};
use crate::mesh::QuadMesh;
use crate::quadrature::cell_rule;

pub const CSV_HEADER: &str =
    "step,time,cells,dofs,mass,cmin,cmax,xtip,tip_velocity,mixing_length,gmres_flow,gmres_transport";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub step: usize,
    pub time: f64,
    pub cells: usize,
    pub dofs: usize,
    pub mass: f64,
    pub cmin: f64,
    pub cmax: f64,
    pub xtip: f64,
    pub tip_velocity: f64,
    pub mixing_length: f64,
    pub gmres_flow: usize,
    pub gmres_transport: usize,
}

impl Diagnostics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            self.step,
            self.time,
            self.cells,
            self.dofs,
            self.mass,
            self.cmin,
            self.cmax,
            self.xtip,
            self.tip_velocity,
            self.mixing_length,
            self.gmres_flow,
            self.gmres_transport
        )
    }
}

pub fn write_csv<W: Write>(rows: &[Diagnostics], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()
}

/// `(x, y, C)` at every cell quadrature point.
pub fn sample_points(mesh: &QuadMesh, map: &DofMap, c: &[f64]) -> Vec<([f64; 2], f64)> {
    let rule = cell_rule();
    let mut out = Vec::with_capacity(mesh.n_active() * rule.weights.len());
    for (ci, &id) in mesh.active_cells().iter().enumerate() {
        let bbox = mesh.cell(id).bbox;
        let l = map.local_coeffs(c, ci);
        for r in &rule.points {
            let p = bbox.from_reference(*r);
            out.push((p, combine(&l, &shape_at(&bbox, p)).0));
        }
    }
    out
}

/// Extremes of `C` over the cell quadrature points.
pub fn value_range(mesh: &QuadMesh, map: &DofMap, c: &[f64]) -> (f64, f64) {
    sample_points(mesh, map, c)
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| {
            (lo.min(*v), hi.max(*v))
        })
}

/// `max(0, max C - 1) + max(0, -min C)`.
pub fn overshoot(cmin: f64, cmax: f64) -> f64 {
    (cmax - 1.0).max(0.0) + (-cmin).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FingerMeasure {
    /// Furthest point with `C ≥ 0.5`.
    pub x_tip: f64,
    /// Furthest point with `C ≥ 0.1`.
    pub x_lead: f64,
    /// Furthest `x` with `C ≥ 0.9` at every sample to its left.
    pub x_trail: f64,
    pub mixing_length: f64,
}

/// Front measurements for displacement along `+x`, sampled at the cell
/// quadrature points. Positions are absolute; a missing front reports the
/// domain's left edge.
pub fn finger_diagnostics(mesh: &QuadMesh, map: &DofMap, c: &[f64]) -> FingerMeasure {
    let pts = sample_points(mesh, map, c);
    let x0 = mesh.domain().x0;
    let furthest = |thr: f64| {
        pts.iter()
            .filter(|(_, v)| *v >= thr)
            .map(|(p, _)| p[0])
            .fold(x0, f64::max)
    };
    let x_tip = furthest(0.5);
    let x_lead = furthest(0.1);
    let x_trail = pts
        .iter()
        .filter(|(_, v)| *v < 0.9)
        .map(|(p, _)| p[0])
        .fold(f64::INFINITY, f64::min)
        .min(mesh.domain().x1);
    FingerMeasure {
        x_tip,
        x_lead,
        x_trail,
        mixing_length: (x_lead - x_trail).max(0.0),
    }
}

/// Front position `max{x : C(x, y) ≥ 0.5}` along `rows` horizontal lines,
/// each sampled at `cols` points.
pub fn front_profile(
    mesh: &QuadMesh,
    map: &DofMap,
    c: &[f64],
    rows: usize,
    cols: usize,
) -> Vec<f64> {
    let d = mesh.domain();
    (0..rows)
        .map(|j| {
            let y = d.y0 + (j as f64 + 0.5) * d.height() / rows as f64;
            (0..cols)
                .rev()
                .map(|i| d.x0 + (i as f64 + 0.5) * d.width() / cols as f64)
                .find(|&x| {
                    let id = mesh.locate([x, y]).expect("sample inside domain");
                    let ci = mesh.active_index(id).expect("active");
                    combine(
                        &map.local_coeffs(c, ci),
                        &shape_at(&mesh.cell(id).bbox, [x, y]),
                    )
                    .0 >= 0.5
                })
                .unwrap_or(d.x0)
        })
        .collect()
}

/// Population variance of a front profile (m²).
pub fn transverse_variance(profile: &[f64]) -> f64 {
    if profile.is_empty() {
        return 0.0;
    }
    let n = profile.len() as f64;
    let mean = profile.iter().sum::<f64>() / n;
    profile.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}
