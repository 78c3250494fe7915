//! Fixtures shared by the solver benchmarks.

use egmd::flow::{solve_pressure, PressureInputs};
use egmd::{
    Bdf, DofMap, FlowBC, FlowParams, GmresConfig, QuadMesh, Rect, Scenario, ScenarioConfig,
    Simulation,
};

/// Uniform `n`×`n` Darcy problem on the unit square with a checkerboard
/// permeability contrast of 1e3.
pub struct PressureProblem {
    pub mesh: QuadMesh,
    pub map: DofMap,
    pub params: FlowParams,
    pub bc: FlowBC,
    pub kappa: Vec<f64>,
    pub zeros: Vec<f64>,
    pub source: Vec<f64>,
    pub gmres: GmresConfig,
}

impl PressureProblem {
    pub fn new(n: usize) -> Self {
        let mesh = QuadMesh::build_uniform(Rect::unit(), n, n).expect("mesh");
        let map = DofMap::build(&mesh, 1).expect("dof map");
        let kappa = (0..mesh.n_active())
            .map(|ci| {
                if (ci / n + ci % n) % 2 == 0 {
                    1.0
                } else {
                    1e-3
                }
            })
            .collect();
        PressureProblem {
            params: FlowParams::default(),
            bc: FlowBC::left_to_right(1.0, 0.0),
            zeros: vec![0.0; map.n_dofs()],
            source: vec![0.0; mesh.n_active()],
            gmres: GmresConfig {
                tol: 1e-10,
                ..GmresConfig::default()
            },
            kappa,
            mesh,
            map,
        }
    }

    pub fn solve(&self) -> Vec<f64> {
        let inp = PressureInputs {
            kappa: &self.kappa,
            source: &self.source,
            p_n: &self.zeros,
            p_nm1: &self.zeros,
            bdf: Bdf::new(1, 1.0),
        };
        solve_pressure(
            &self.mesh,
            &self.map,
            &self.params,
            &self.bc,
            &inp,
            &self.gmres,
        )
        .expect("pressure solve")
        .0
    }
}

/// A preset simulation advanced `warmup` steps so that the front and the
/// adapted mesh are non-trivial. The last step skips adaptation, so the
/// stored indicator still matches the mesh.
pub fn warmed_up(scenario: Scenario, warmup: usize) -> Simulation {
    let mut sim = Simulation::new(ScenarioConfig::preset(scenario)).expect("preset");
    for k in 0..warmup {
        if k + 1 < warmup {
            sim.advance().expect("step");
        } else {
            sim.step().expect("step");
        }
    }
    sim
}
