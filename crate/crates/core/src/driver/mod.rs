//! Sequential time stepping (pressure, flux, stabilization, transport,
//! adaptation), scenario setup and file output.

pub mod config;
pub mod diagnostics;
pub mod vtk;

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::amr::{adapt_and_transfer, mark, AdaptReport, AmrError};
use crate::egspace::{combine, integrate, interpolate, shape_at, DofMap, EgError};
use crate::flow::{
    local_conservation_residual, reconstruct_flux, solve_pressure, Bdf, FaceFlux, FlowBC,
    FlowError, PressureInputs,
};
use crate::mesh::{CellId, MeshError, QuadMesh, Rect, Side};
use crate::physics::{mix_viscosity, random_centers, random_permeability, single_vortex_velocity};
use crate::quadrature::cell_rule;
use crate::stabilization::{self, c_star, Stabilization, ViscosityField};
use crate::transport::{
    solve_transport, SourceField, TransportBC, TransportError, TransportInputs,
};

pub use config::{ConfigError, Scenario, ScenarioConfig};
pub use diagnostics::{finger_diagnostics, write_csv, Diagnostics, FingerMeasure};
pub use vtk::{write_vtk, CellFields};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("pressure solve failed at step {step}: {source}")]
    Flow { step: usize, source: FlowError },
    #[error("transport solve failed at step {step}: {source}")]
    Transport { step: usize, source: TransportError },
    #[error("adaptation failed at step {step}: {source}")]
    Amr { step: usize, source: AmrError },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Space(#[from] EgError),
}

impl DriverError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Config(_) => 2,
            DriverError::Io { .. } => 1,
            _ => 3,
        }
    }
}

/// Centre of the radial injection.
pub const SOURCE_POINT: [f64; 2] = [0.5, 0.5];

/// What one step produced beyond the CSV row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepReport {
    pub diagnostics: Diagnostics,
    /// `max_T |conservation residual|`, zero for prescribed velocities.
    pub conservation: f64,
    /// `max |U·n|` over the face quadrature points.
    pub max_flux: f64,
    pub adapt: Option<AdaptReport>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: ScenarioConfig,
    pub mesh: QuadMesh,
    pub map: DofMap,
    pub p_n: Vec<f64>,
    pub p_nm1: Vec<f64>,
    pub c_n: Vec<f64>,
    pub c_nm1: Vec<f64>,
    /// Velocity at the current time level on the current mesh.
    pub flux: FaceFlux,
    /// Cell-averaged permeability.
    pub permeability: Vec<f64>,
    pub sources: SourceField,
    /// Stabilization of the last step, on the mesh it was computed on.
    pub stabilization: Stabilization,
    pub step: usize,
    pub time: f64,
    pub history: Vec<Diagnostics>,
    centers: Vec<[f64; 2]>,
    flow_bc: FlowBC,
    transport_bc: TransportBC,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self, DriverError> {
        config.validate()?;
        let mut mesh = QuadMesh::build_uniform(config.domain, config.nx, config.ny)?;
        for _ in 0..config.initial_level {
            let all = mesh.active_cells().to_vec();
            mesh.refine(&all)?;
        }
        let map = DofMap::build(&mesh, 1)?;
        let centers = match config.scenario {
            Scenario::RandomPerm2d => random_centers(&config.domain, config.n_centers, config.seed),
            _ => Vec::new(),
        };
        let mut transport_bc = TransportBC::uniform(0.0);
        transport_bc.c_in[Side::West.index()] = config.c_in;
        let flow_bc = match config.scenario {
            Scenario::HeleShawRadial | Scenario::SingleVortex => FlowBC::no_flow(),
            _ => FlowBC::left_to_right(config.inlet_pressure(), config.p_out),
        };
        let c0 = initial_concentration(&config, &mesh, &map);
        let zero = vec![0.0; map.n_dofs()];
        let mut sim = Simulation {
            permeability: Vec::new(),
            sources: SourceField::none(0),
            flux: FaceFlux::zero(&mesh),
            stabilization: Stabilization::default(),
            p_n: zero.clone(),
            p_nm1: zero,
            c_nm1: c0.clone(),
            c_n: c0,
            step: 0,
            time: 0.0,
            history: Vec::new(),
            config,
            mesh,
            map,
            centers,
            flow_bc,
            transport_bc,
        };
        sim.refresh_cell_data()?;
        Ok(sim)
    }

    /// Permeability `K(x)` of the scenario.
    pub fn permeability_at(&self, x: [f64; 2]) -> f64 {
        match self.config.scenario {
            Scenario::PermBlock => {
                if x[0] > 0.375 && x[0] < 0.625 && x[1] > 0.25 && x[1] < 0.75 {
                    self.config.block_permeability
                } else {
                    1.0
                }
            }
            Scenario::RandomPerm2d => random_permeability(&self.centers, x),
            _ => 1.0,
        }
    }

    /// Mobility `K̄_T / μ(c̄_T)` per cell from the coefficient vector `c`,
    /// with the cell mean clamped to `[0, 1]`.
    pub fn mobility(&self, c: &[f64]) -> Vec<f64> {
        let means = crate::egspace::cell_means(&self.map, &self.mesh, c);
        means
            .iter()
            .zip(&self.permeability)
            .map(|(m, k)| k / mix_viscosity(&self.config.viscosity, m.clamp(0.0, 1.0)))
            .collect()
    }

    fn refresh_cell_data(&mut self) -> Result<(), DriverError> {
        let rule = cell_rule();
        self.permeability = self
            .mesh
            .active_cells()
            .iter()
            .map(|&id| {
                let b = self.mesh.cell(id).bbox;
                rule.points
                    .iter()
                    .zip(rule.weights)
                    .map(|(r, w)| w * self.permeability_at(b.from_reference(*r)))
                    .sum()
            })
            .collect();
        let n = self.mesh.n_active();
        self.sources = SourceField::none(n);
        if self.config.scenario == Scenario::HeleShawRadial {
            let id = self
                .mesh
                .locate(SOURCE_POINT)
                .expect("source inside domain");
            let ci = self.mesh.active_index(id).expect("active");
            self.sources.q[ci] =
                self.config.source_rate * self.config.flow.rho0 / self.mesh.cell(id).bbox.area();
            self.sources.c_q = 1.0;
        }
        self.flux = match self.config.scenario {
            Scenario::SingleVortex => self.vortex_flux(self.time),
            _ => {
                let kappa = self.mobility(&self.c_n);
                reconstruct_flux(
                    &self.mesh,
                    &self.map,
                    &self.config.flow,
                    &self.flow_bc,
                    &kappa,
                    &self.p_n,
                )
                .map_err(|source| DriverError::Flow {
                    step: self.step,
                    source,
                })?
            }
        };
        Ok(())
    }

    fn vortex_flux(&self, t: f64) -> FaceFlux {
        let period = self.config.vortex_period;
        FaceFlux::from_velocity(&self.mesh, |x| {
            single_vortex_velocity(x[0], x[1], t, period)
        })
    }

    pub fn n_steps(&self) -> usize {
        self.config.n_steps()
    }

    /// Advance one time step.
    pub fn step(&mut self) -> Result<StepReport, DriverError> {
        let cfg = self.config.clone();
        let first = self.step == 0;
        let bdf = Bdf::new(if first { 1 } else { cfg.bdf_order }, cfg.dt);
        let t_new = self.time + cfg.dt;
        let step = self.step;

        let mut report = StepReport::default();
        let (p_new, flux, gmres_flow) = if cfg.scenario == Scenario::SingleVortex {
            (self.p_n.clone(), self.vortex_flux(t_new), 0)
        } else {
            let cs = c_star(cfg.entropy.extrapolation, &self.c_n, &self.c_nm1, first);
            let kappa = self.mobility(&cs);
            let inp = PressureInputs {
                kappa: &kappa,
                source: &self.sources.q,
                p_n: &self.p_n,
                p_nm1: &self.p_nm1,
                bdf,
            };
            let flow_err = |source| DriverError::Flow { step, source };
            let (p_new, stats) = solve_pressure(
                &self.mesh,
                &self.map,
                &cfg.flow,
                &self.flow_bc,
                &inp,
                &cfg.gmres,
            )
            .map_err(flow_err)?;
            let flux = reconstruct_flux(
                &self.mesh,
                &self.map,
                &cfg.flow,
                &self.flow_bc,
                &kappa,
                &p_new,
            )
            .map_err(flow_err)?;
            let res = local_conservation_residual(
                &self.mesh,
                &self.map,
                &cfg.flow,
                &flux,
                &self.sources.q,
                [&p_new, &self.p_n, &self.p_nm1],
                bdf,
            );
            report.conservation = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            (p_new, flux, stats.iterations)
        };
        report.max_flux = flux.max_abs_normal();

        let mut stab = stabilization::compute(
            &cfg.entropy,
            &self.mesh,
            &self.map,
            &self.c_n,
            &self.c_nm1,
            &flux,
            &self.sources,
            cfg.dt,
            step,
        );
        if cfg.entropy.disabled() {
            stab.viscosity = ViscosityField::zero(self.mesh.n_active());
        }
        let inp = TransportInputs {
            flux: &flux,
            flux_old: &self.flux,
            dispersion: &cfg.dispersion,
            mu_stab: &stab.viscosity.mu,
            c_n: &self.c_n,
            c_nm1: &self.c_nm1,
            sources: &self.sources,
            bdf,
        };
        let (c_new, tstats) = solve_transport(
            &self.mesh,
            &self.map,
            &cfg.transport,
            &self.transport_bc,
            &inp,
            &cfg.gmres,
        )
        .map_err(|source| DriverError::Transport { step, source })?;

        self.p_nm1 = std::mem::replace(&mut self.p_n, p_new);
        self.c_nm1 = std::mem::replace(&mut self.c_n, c_new);
        self.flux = flux;
        self.stabilization = stab;
        self.step += 1;
        self.time = t_new;

        let d = self.diagnostics(gmres_flow, tstats.iterations);
        self.history.push(d);
        report.diagnostics = d;
        Ok(report)
    }

    fn diagnostics(&self, gmres_flow: usize, gmres_transport: usize) -> Diagnostics {
        let (cmin, cmax) = diagnostics::value_range(&self.mesh, &self.map, &self.c_n);
        let fm = finger_diagnostics(&self.mesh, &self.map, &self.c_n);
        let prev = self
            .history
            .last()
            .map_or(self.mesh.domain().x0, |d| d.xtip);
        Diagnostics {
            step: self.step,
            time: self.time,
            cells: self.mesh.n_active(),
            dofs: self.map.n_dofs(),
            mass: self.mass(),
            cmin,
            cmax,
            xtip: fm.x_tip,
            tip_velocity: (fm.x_tip - prev) / self.config.dt,
            mixing_length: fm.mixing_length,
            gmres_flow,
            gmres_transport,
        }
    }

    /// `∫ φ ρ₀ C`.
    pub fn mass(&self) -> f64 {
        self.config.transport.porosity
            * self.config.transport.rho0
            * integrate(&self.map, &self.mesh, &self.c_n)
    }

    /// Mark on the last indicator, adapt, transfer `P` and `C` histories and
    /// rebuild the current-level velocity.
    pub fn adapt(&mut self) -> Result<AdaptReport, DriverError> {
        let step = self.step;
        let amr_err = |source| DriverError::Amr { step, source };
        let marks = mark(
            &self.mesh,
            &self.stabilization.indicator,
            &self.config.marking,
        )
        .map_err(amr_err)?;
        let bounds = self.config.marking.bounds;
        let report = adapt_and_transfer(
            &mut self.mesh,
            &mut self.map,
            &mut [
                &mut self.p_n,
                &mut self.p_nm1,
                &mut self.c_n,
                &mut self.c_nm1,
            ],
            &marks,
            &bounds,
        )
        .map_err(amr_err)?;
        if report.changed() {
            self.refresh_cell_data()?;
        }
        Ok(report)
    }

    pub fn due_for_adaptation(&self) -> bool {
        self.config.amr
            && self.step % self.config.adapt_stride == 0
            && !self.stabilization.indicator.values.is_empty()
    }

    /// Step and, when due, adapt.
    pub fn advance(&mut self) -> Result<StepReport, DriverError> {
        let mut report = self.step()?;
        if self.due_for_adaptation() {
            report.adapt = Some(self.adapt()?);
        }
        Ok(report)
    }

    pub fn write_vtk_file(&self, path: &Path) -> Result<(), DriverError> {
        let n = self.mesh.n_active();
        let (mu, er) = if self.stabilization.indicator.values.len() == n {
            (
                self.stabilization.viscosity.mu.clone(),
                self.stabilization.indicator.values.clone(),
            )
        } else {
            (vec![0.0; n], vec![0.0; n])
        };
        let fields = CellFields {
            mu_stab: &mu,
            indicator: &er,
            permeability: &self.permeability,
        };
        let file = create(path)?;
        write_vtk(
            &self.mesh,
            &self.map,
            &self.p_n,
            &self.c_n,
            fields,
            BufWriter::new(file),
        )
        .map_err(|source| DriverError::Io {
            path: path.into(),
            source,
        })
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<(), DriverError> {
        let file = create(path)?;
        write_csv(&self.history, BufWriter::new(file)).map_err(|source| DriverError::Io {
            path: path.into(),
            source,
        })
    }
}

fn create(path: &Path) -> Result<File, DriverError> {
    File::create(path).map_err(|source| DriverError::Io {
        path: path.into(),
        source,
    })
}

fn initial_concentration(config: &ScenarioConfig, mesh: &QuadMesh, map: &DofMap) -> Vec<f64> {
    let mut c = match config.scenario {
        Scenario::SingleVortex => interpolate(
            |x| ((x[0] - 0.5).powi(2) + (x[1] - 0.75).powi(2)).sqrt() - 0.15,
            mesh,
            map,
        ),
        _ => interpolate(|_| config.c0, mesh, map),
    };
    if config.perturbation > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let near = |b: &Rect| match config.scenario {
            Scenario::HeleShawRadial => {
                let m = b.center();
                (m[0] - SOURCE_POINT[0]).hypot(m[1] - SOURCE_POINT[1]) < config.perturbation_width
            }
            _ => b.center()[0] - config.domain.x0 < config.perturbation_width,
        };
        for (ci, &id) in mesh.active_cells().iter().enumerate() {
            let r: f64 = rng.gen();
            if near(&mesh.cell(id).bbox) {
                c[map.const_dof(ci)] += config.perturbation * r;
            }
        }
    }
    c
}

/// Concentration at a point, or `None` outside the domain.
pub fn sample(mesh: &QuadMesh, map: &DofMap, u: &[f64], p: [f64; 2]) -> Option<f64> {
    let id: CellId = mesh.locate(p)?;
    let ci = mesh.active_index(id)?;
    Some(combine(&map.local_coeffs(u, ci), &shape_at(&mesh.cell(id).bbox, p)).0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub vtk_files: Vec<PathBuf>,
    pub csv: PathBuf,
}

/// Run a full simulation into `out`: `config.txt`, `step_%06d.vtk` every
/// `output_stride` steps (plus the initial and final state) and
/// `diagnostics.csv`. On solver failure the partial diagnostics and the
/// last state are written before the error is returned.
pub fn run(config: ScenarioConfig, out: &Path) -> Result<RunSummary, DriverError> {
    fs::create_dir_all(out).map_err(|source| DriverError::Io {
        path: out.into(),
        source,
    })?;
    let mut sim = Simulation::new(config)?;
    let cfg_path = out.join("config.txt");
    fs::write(&cfg_path, sim.config.to_config_string()).map_err(|source| DriverError::Io {
        path: cfg_path,
        source,
    })?;
    let csv = out.join("diagnostics.csv");
    let mut vtk_files = Vec::new();
    let mut emit = |sim: &Simulation| -> Result<(), DriverError> {
        if sim.config.write_vtk {
            let path = out.join(format!("step_{:06}.vtk", sim.step));
            sim.write_vtk_file(&path)?;
            vtk_files.push(path);
        }
        Ok(())
    };
    emit(&sim)?;
    let n = sim.n_steps();
    while sim.step < n {
        let result = sim.step();
        if let Err(e) = result {
            let _ = sim.write_csv_file(&csv);
            let _ = sim.write_vtk_file(&out.join(format!("failure_step_{:06}.vtk", sim.step)));
            return Err(e);
        }
        if sim.step % sim.config.output_stride == 0 || sim.step == n {
            emit(&sim)?;
        }
        if sim.step < n && sim.due_for_adaptation() {
            if let Err(e) = sim.adapt() {
                let _ = sim.write_csv_file(&csv);
                return Err(e);
            }
        }
    }
    sim.write_csv_file(&csv)?;
    Ok(RunSummary {
        steps: sim.step,
        final_time: sim.time,
        vtk_files,
        csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenario: Scenario) -> ScenarioConfig {
        let mut c = ScenarioConfig::preset(scenario);
        c.nx = 4;
        c.ny = 4;
        c.initial_level = 0;
        c.t_final = 3.0 * c.dt;
        c
    }

    #[test]
    fn manufactured_single_step() {
        let mut sim = Simulation::new(small(Scenario::Manufactured)).unwrap();
        let r = sim.step().unwrap();
        assert!(r.conservation <= 1e-10, "{}", r.conservation);
        for (v, p) in sim.map.vertex_positions().iter().enumerate() {
            assert!((sim.p_n[v] - (1.0 - p[0])).abs() < 1e-9);
        }
        for cell in &sim.flux.cell {
            for u in cell {
                assert!((u[0] - 1.0).abs() < 1e-9 && u[1].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn perm_block_permeability_field() {
        let sim = Simulation::new(small(Scenario::PermBlock)).unwrap();
        assert_eq!(sim.permeability_at([0.5, 0.5]), 1e-3);
        assert_eq!(sim.permeability_at([0.3, 0.5]), 1.0);
        assert_eq!(sim.permeability_at([0.5, 0.8]), 1.0);
    }

    #[test]
    fn radial_source_is_a_single_cell() {
        let sim = Simulation::new(small(Scenario::HeleShawRadial)).unwrap();
        let nonzero: Vec<f64> = sim
            .sources
            .q
            .iter()
            .copied()
            .filter(|q| *q != 0.0)
            .collect();
        assert_eq!(nonzero.len(), 1);
        let id = sim.mesh.locate(SOURCE_POINT).unwrap();
        let area = sim.mesh.cell(id).bbox.area();
        assert!((nonzero[0] * area / sim.config.flow.rho0 - 100.0).abs() < 1e-9);
    }

    #[test]
    fn every_scenario_runs_a_few_steps() {
        for sc in Scenario::ALL {
            let mut sim = Simulation::new(small(sc)).unwrap();
            for _ in 0..3 {
                let r = sim.advance().unwrap_or_else(|e| panic!("{sc}: {e}"));
                assert!(r.diagnostics.mass.is_finite(), "{sc}");
            }
        }
    }

    #[test]
    fn run_writes_outputs_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(Scenario::PermBlock);
        cfg.output_stride = 2;
        cfg.amr = true;
        let a = run(cfg.clone(), &dir.path().join("a")).unwrap();
        let b = run(cfg, &dir.path().join("b")).unwrap();
        assert_eq!(a.steps, 3);
        let names: Vec<String> = a
            .vtk_files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            vec!["step_000000.vtk", "step_000002.vtk", "step_000003.vtk"]
        );
        let ta = fs::read_to_string(&a.csv).unwrap();
        assert_eq!(ta, fs::read_to_string(&b.csv).unwrap());
        assert_eq!(ta.lines().count(), 4);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            DriverError::Config(ConfigError::MissingScenario).exit_code(),
            2
        );
        let e = DriverError::Transport {
            step: 0,
            source: TransportError::Dimension(String::new()),
        };
        assert_eq!(e.exit_code(), 3);
    }
}
