//! Scenario presets and the flat `key = value` configuration format.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::amr::MarkingPolicy;
use crate::flow::FlowParams;
use crate::linalg::GmresConfig;
use crate::mesh::{AdaptBounds, Rect};
use crate::physics::{DispersionParams, ViscosityModel};
use crate::stabilization::{EntropyConfig, EntropyKind, Extrapolation};
use crate::transport::TransportParams;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("no scenario given")]
    MissingScenario,
    #[error("scenario `{file}` in the config file conflicts with `{cli}`")]
    ScenarioMismatch { cli: String, file: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    SingleVortex,
    PermBlock,
    RandomPerm2d,
    HeleShawRect,
    HeleShawRadial,
    Manufactured,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::SingleVortex,
        Scenario::PermBlock,
        Scenario::RandomPerm2d,
        Scenario::HeleShawRect,
        Scenario::HeleShawRadial,
        Scenario::Manufactured,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SingleVortex => "single_vortex",
            Scenario::PermBlock => "perm_block",
            Scenario::RandomPerm2d => "random_perm_2d",
            Scenario::HeleShawRect => "hele_shaw_rect",
            Scenario::HeleShawRadial => "hele_shaw_radial",
            Scenario::Manufactured => "manufactured",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| ConfigError::UnknownScenario(s.to_string()))
    }
}

/// Everything a run needs. Presets fill every field; files and overrides
/// replace individual keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub domain: Rect,
    /// Root cells per direction.
    pub nx: usize,
    pub ny: usize,
    /// Uniform refinement applied before the first step.
    pub initial_level: u8,
    pub dt: f64,
    pub t_final: f64,
    /// BDF order after the first (always BDF1) step.
    pub bdf_order: u8,
    pub flow: FlowParams,
    pub transport: TransportParams,
    pub entropy: EntropyConfig,
    pub amr: bool,
    pub adapt_stride: usize,
    pub marking: MarkingPolicy,
    pub viscosity: ViscosityModel,
    pub dispersion: DispersionParams,
    pub seed: u64,
    pub output_stride: usize,
    pub write_vtk: bool,
    /// Inlet pressure; `None` derives it from a 0.05 m/s resident-fluid velocity.
    pub p_in: Option<f64>,
    pub p_out: f64,
    pub c_in: f64,
    /// Uniform initial concentration.
    pub c0: f64,
    /// Amplitude of the seeded initial-front perturbation.
    pub perturbation: f64,
    /// Width of the perturbed band next to the inlet (m).
    pub perturbation_width: f64,
    pub n_centers: usize,
    pub block_permeability: f64,
    /// Injection rate `q/ρ₀` at the radial source.
    pub source_rate: f64,
    pub vortex_period: f64,
    pub gmres: GmresConfig,
}

impl ScenarioConfig {
    pub fn preset(scenario: Scenario) -> Self {
        let base = ScenarioConfig {
            scenario,
            domain: Rect::unit(),
            nx: 5,
            ny: 5,
            initial_level: 1,
            dt: 0.01,
            t_final: 2.0,
            bdf_order: 2,
            flow: FlowParams {
                c_f: 1e-8,
                ..FlowParams::default()
            },
            transport: TransportParams::default(),
            entropy: EntropyConfig::default(),
            amr: true,
            adapt_stride: 1,
            marking: MarkingPolicy::new(AdaptBounds::new(2, 0, 7500)),
            viscosity: ViscosityModel::constant(1.0),
            dispersion: DispersionParams::new(0.0, 0.0, 0.0),
            seed: 0,
            output_stride: 10,
            write_vtk: true,
            p_in: Some(1.0),
            p_out: 0.0,
            c_in: 1.0,
            c0: 0.0,
            perturbation: 0.0,
            perturbation_width: 0.0,
            n_centers: 40,
            block_permeability: 1e-3,
            source_rate: 0.0,
            vortex_period: 2.0,
            gmres: GmresConfig {
                tol: 1e-12,
                ..GmresConfig::default()
            },
        };
        match scenario {
            Scenario::SingleVortex => ScenarioConfig {
                nx: 16,
                ny: 16,
                initial_level: 0,
                dt: 1.0 / 64.0,
                amr: false,
                marking: MarkingPolicy::new(AdaptBounds::new(0, 0, 1 << 20)),
                entropy: EntropyConfig {
                    kind: EntropyKind::Power(2),
                    ..EntropyConfig::default()
                },
                ..base
            },
            Scenario::PermBlock => base,
            Scenario::RandomPerm2d => ScenarioConfig {
                t_final: 4.0,
                dispersion: DispersionParams::new(1.8e-7, 1.8e-5, 1.8e-6),
                ..base
            },
            Scenario::HeleShawRect => ScenarioConfig {
                domain: Rect::new(0.0, 0.0, 1.0, 0.25),
                nx: 12,
                ny: 3,
                initial_level: 2,
                t_final: 10.0,
                flow: FlowParams {
                    rho0: 1000.0,
                    c_f: 0.0,
                    ..FlowParams::default()
                },
                transport: TransportParams {
                    rho0: 1000.0,
                    ..TransportParams::default()
                },
                entropy: EntropyConfig {
                    lambda_lin: 1.0,
                    lambda_ent: 1.0,
                    ..EntropyConfig::default()
                },
                marking: MarkingPolicy::new(AdaptBounds::new(2, 1, 20_000)),
                viscosity: ViscosityModel {
                    mu_s: 1e-3,
                    mu_0: 0.1,
                },
                dispersion: DispersionParams::new(1.8e-8, 1.8e-8, 1.8e-9),
                p_in: None,
                perturbation: 1e-3,
                perturbation_width: 0.05,
                ..base
            },
            Scenario::HeleShawRadial => ScenarioConfig {
                nx: 8,
                ny: 8,
                initial_level: 2,
                dt: 0.005,
                t_final: 0.5,
                flow: FlowParams {
                    rho0: 1000.0,
                    c_f: 1e-3,
                    ..FlowParams::default()
                },
                transport: TransportParams {
                    rho0: 1000.0,
                    ..TransportParams::default()
                },
                entropy: EntropyConfig {
                    lambda_lin: 1.0,
                    lambda_ent: 1.0,
                    ..EntropyConfig::default()
                },
                marking: MarkingPolicy::new(AdaptBounds::new(4, 2, 20_000)),
                viscosity: ViscosityModel {
                    mu_s: 1e-3,
                    mu_0: 1.0,
                },
                dispersion: DispersionParams::new(1.8e-8, 1.8e-5, 1.8e-6),
                source_rate: 100.0,
                perturbation: 1e-3,
                perturbation_width: 0.1,
                gmres: GmresConfig {
                    tol: 1e-9,
                    ..GmresConfig::default()
                },
                ..base
            },
            Scenario::Manufactured => ScenarioConfig {
                nx: 8,
                ny: 8,
                initial_level: 0,
                t_final: 0.1,
                flow: FlowParams::default(),
                amr: false,
                ..base
            },
        }
    }

    /// Preset chosen by `scenario` (or the file's `scenario` key), then the
    /// file's pairs, then `overrides`, each applied in order.
    pub fn load(
        scenario: Option<&str>,
        file: Option<&str>,
        overrides: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let pairs = match file {
            Some(text) => parse_pairs(text)?,
            None => Vec::new(),
        };
        let in_file = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "scenario")
            .map(|(_, v)| v.as_str());
        let name = match (scenario, in_file) {
            (Some(cli), Some(f)) if cli != f => {
                return Err(ConfigError::ScenarioMismatch {
                    cli: cli.into(),
                    file: f.into(),
                });
            }
            (Some(s), _) | (None, Some(s)) => s,
            (None, None) => return Err(ConfigError::MissingScenario),
        };
        let mut cfg = Self::preset(name.parse()?);
        for (k, v) in pairs.iter().chain(overrides) {
            if k != "scenario" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
            reason: reason.into(),
        };
        let f = || value.parse::<f64>().map_err(|e| bad(&e.to_string()));
        let u = || value.parse::<usize>().map_err(|e| bad(&e.to_string()));
        let b = || value.parse::<bool>().map_err(|e| bad(&e.to_string()));
        let level = || value.parse::<u8>().map_err(|e| bad(&e.to_string()));
        let bounds = &mut self.marking.bounds;
        match key {
            "x0" => self.domain.x0 = f()?,
            "y0" => self.domain.y0 = f()?,
            "x1" => self.domain.x1 = f()?,
            "y1" => self.domain.y1 = f()?,
            "nx" => self.nx = u()?,
            "ny" => self.ny = u()?,
            "initial_level" => self.initial_level = level()?,
            "dt" => self.dt = f()?,
            "t_final" => self.t_final = f()?,
            "bdf_order" => self.bdf_order = level()?,
            "porosity" => {
                self.flow.porosity = f()?;
                self.transport.porosity = self.flow.porosity;
            }
            "rho0" => {
                self.flow.rho0 = f()?;
                self.transport.rho0 = self.flow.rho0;
            }
            "c_f" => self.flow.c_f = f()?,
            "theta" => self.flow.theta = f()?,
            "flow_penalty" => self.flow.penalty = f()?,
            "transport_penalty" => self.transport.penalty = f()?,
            "stab_penalty" => self.transport.stab_penalty = f()?,
            "entropy" => {
                self.entropy.kind = parse_entropy(value)
                    .ok_or_else(|| bad("expected power:<b>, log:<eps> or kruzkov:<r>"))?
            }
            "lambda_lin" => self.entropy.lambda_lin = f()?,
            "lambda_ent" => self.entropy.lambda_ent = f()?,
            "extrapolation" => {
                self.entropy.extrapolation = match value {
                    "lagged" => Extrapolation::Lagged,
                    "extrapolated" => Extrapolation::Extrapolated,
                    _ => return Err(bad("expected lagged or extrapolated")),
                }
            }
            "amr" => self.amr = b()?,
            "adapt_stride" => self.adapt_stride = u()?,
            "r_max" => bounds.r_max = level()?,
            "r_min" => bounds.r_min = level()?,
            "cell_max" => bounds.cell_max = u()?,
            "refine_fraction" => self.marking.refine_fraction = f()?,
            "coarsen_fraction" => self.marking.coarsen_fraction = f()?,
            "mu_s" => self.viscosity.mu_s = f()?,
            "mu_0" => self.viscosity.mu_0 = f()?,
            "viscosity_ratio" => self.viscosity.mu_0 = f()? * self.viscosity.mu_s,
            "d_m" => self.dispersion.d_m = f()?,
            "alpha_l" => self.dispersion.alpha_l = f()?,
            "alpha_t" => self.dispersion.alpha_t = f()?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|e: std::num::ParseIntError| bad(&e.to_string()))?
            }
            "output_stride" => self.output_stride = u()?,
            "write_vtk" => self.write_vtk = b()?,
            "p_in" => self.p_in = if value == "auto" { None } else { Some(f()?) },
            "p_out" => self.p_out = f()?,
            "c_in" => self.c_in = f()?,
            "c0" => self.c0 = f()?,
            "perturbation" => self.perturbation = f()?,
            "perturbation_width" => self.perturbation_width = f()?,
            "n_centers" => self.n_centers = u()?,
            "block_permeability" => self.block_permeability = f()?,
            "source_rate" => self.source_rate = f()?,
            "vortex_period" => self.vortex_period = f()?,
            "gmres_tol" => self.gmres.tol = f()?,
            "gmres_restart" => self.gmres.restart = u()?,
            "gmres_max_iter" => self.gmres.max_iter = u()?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Invalid(m.into()));
        let d = &self.domain;
        if !(d.x1 > d.x0 && d.y1 > d.y0) {
            return fail("empty domain");
        }
        if self.nx == 0 || self.ny == 0 {
            return fail("nx and ny must be positive");
        }
        if !(self.dt > 0.0) || !(self.t_final > 0.0) {
            return fail("dt and t_final must be positive");
        }
        if !(1..=2).contains(&self.bdf_order) {
            return fail("bdf_order must be 1 or 2");
        }
        if !(self.flow.porosity > 0.0) || !(self.flow.rho0 > 0.0) || !(self.flow.c_f >= 0.0) {
            return fail("porosity and rho0 must be positive, c_f non-negative");
        }
        if !(self.viscosity.mu_s > 0.0) || !(self.viscosity.mu_0 > 0.0) {
            return fail("viscosities must be positive");
        }
        let disp = [
            self.dispersion.d_m,
            self.dispersion.alpha_l,
            self.dispersion.alpha_t,
        ];
        if !(disp.iter().all(|v| *v > 0.0) || disp.iter().all(|v| *v == 0.0)) {
            return fail("d_m, alpha_l, alpha_t must be all positive or all zero");
        }
        if !(self.entropy.lambda_lin >= 0.0) || !(self.entropy.lambda_ent >= 0.0) {
            return fail("stabilization coefficients must be non-negative");
        }
        let fr = [self.marking.refine_fraction, self.marking.coarsen_fraction];
        if fr.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return fail("marking fractions must lie in [0, 1]");
        }
        let b = self.marking.bounds;
        if b.r_min > b.r_max {
            return fail("r_min must not exceed r_max");
        }
        if self.amr && self.initial_level > b.r_max {
            return fail("initial_level exceeds r_max");
        }
        let start = (self.nx * self.ny) << (2 * self.initial_level as usize);
        if self.amr && start > b.cell_max {
            return fail("the initial mesh already exceeds cell_max");
        }
        if self.adapt_stride == 0 || self.output_stride == 0 {
            return fail("strides must be positive");
        }
        if !(self.gmres.tol > 0.0) || self.gmres.restart == 0 || self.gmres.max_iter == 0 {
            return fail("invalid GMRES settings");
        }
        if let EntropyKind::Power(0) = self.entropy.kind {
            return fail("power entropy exponent must be positive");
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    /// Inlet pressure, derived from `K/μ₀ (p_in - p_out)/L = 0.05` when unset.
    pub fn inlet_pressure(&self) -> f64 {
        self.p_in
            .unwrap_or(self.p_out + 0.05 * self.viscosity.mu_0 * self.domain.width())
    }

    /// Render as a config file accepted by [`ScenarioConfig::load`].
    pub fn to_config_string(&self) -> String {
        let entropy = match self.entropy.kind {
            EntropyKind::Power(b) => format!("power:{b}"),
            EntropyKind::Log(e) => format!("log:{e:e}"),
            EntropyKind::Kruzkov(r) => format!("kruzkov:{r}"),
        };
        let b = self.marking.bounds;
        let rows: Vec<(&str, String)> = vec![
            ("scenario", self.scenario.to_string()),
            ("x0", self.domain.x0.to_string()),
            ("y0", self.domain.y0.to_string()),
            ("x1", self.domain.x1.to_string()),
            ("y1", self.domain.y1.to_string()),
            ("nx", self.nx.to_string()),
            ("ny", self.ny.to_string()),
            ("initial_level", self.initial_level.to_string()),
            ("dt", self.dt.to_string()),
            ("t_final", self.t_final.to_string()),
            ("bdf_order", self.bdf_order.to_string()),
            ("porosity", self.flow.porosity.to_string()),
            ("rho0", self.flow.rho0.to_string()),
            ("c_f", self.flow.c_f.to_string()),
            ("theta", self.flow.theta.to_string()),
            ("flow_penalty", self.flow.penalty.to_string()),
            ("transport_penalty", self.transport.penalty.to_string()),
            ("stab_penalty", self.transport.stab_penalty.to_string()),
            ("entropy", entropy),
            ("lambda_lin", self.entropy.lambda_lin.to_string()),
            ("lambda_ent", self.entropy.lambda_ent.to_string()),
            (
                "extrapolation",
                match self.entropy.extrapolation {
                    Extrapolation::Lagged => "lagged".into(),
                    Extrapolation::Extrapolated => "extrapolated".into(),
                },
            ),
            ("amr", self.amr.to_string()),
            ("adapt_stride", self.adapt_stride.to_string()),
            ("r_max", b.r_max.to_string()),
            ("r_min", b.r_min.to_string()),
            ("cell_max", b.cell_max.to_string()),
            ("refine_fraction", self.marking.refine_fraction.to_string()),
            (
                "coarsen_fraction",
                self.marking.coarsen_fraction.to_string(),
            ),
            ("mu_s", self.viscosity.mu_s.to_string()),
            ("mu_0", self.viscosity.mu_0.to_string()),
            ("d_m", self.dispersion.d_m.to_string()),
            ("alpha_l", self.dispersion.alpha_l.to_string()),
            ("alpha_t", self.dispersion.alpha_t.to_string()),
            ("seed", self.seed.to_string()),
            ("output_stride", self.output_stride.to_string()),
            ("write_vtk", self.write_vtk.to_string()),
            ("p_in", self.p_in.map_or("auto".into(), |p| p.to_string())),
            ("p_out", self.p_out.to_string()),
            ("c_in", self.c_in.to_string()),
            ("c0", self.c0.to_string()),
            ("perturbation", self.perturbation.to_string()),
            ("perturbation_width", self.perturbation_width.to_string()),
            ("n_centers", self.n_centers.to_string()),
            ("block_permeability", self.block_permeability.to_string()),
            ("source_rate", self.source_rate.to_string()),
            ("vortex_period", self.vortex_period.to_string()),
            ("gmres_tol", self.gmres.tol.to_string()),
            ("gmres_restart", self.gmres.restart.to_string()),
            ("gmres_max_iter", self.gmres.max_iter.to_string()),
        ];
        rows.into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn parse_entropy(s: &str) -> Option<EntropyKind> {
    let (name, arg) = s.split_once(':')?;
    match name {
        "power" => arg.parse().ok().map(EntropyKind::Power),
        "log" => arg.parse().ok().map(EntropyKind::Log),
        "kruzkov" => arg.parse().ok().map(EntropyKind::Kruzkov),
        _ => None,
    }
}

/// One `key = value` per line; `#` starts a comment, blank lines are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.into(),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.into(),
            });
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Split a `key=value` override as given on the command line.
pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    parse_pairs(s)?.pop().ok_or_else(|| ConfigError::Syntax {
        line: 1,
        text: s.into(),
    })
}
