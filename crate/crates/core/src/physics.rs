//! Closures and benchmark fields: dispersion, viscosity mixing, random
//! permeability, the single-vortex velocity and the Péclet number.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mesh::Rect;

pub type Tensor2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DispersionParams {
    /// Molecular diffusivity (m²/s).
    pub d_m: f64,
    /// Longitudinal dispersivity.
    pub alpha_l: f64,
    /// Transverse dispersivity.
    pub alpha_t: f64,
}

impl DispersionParams {
    pub fn new(d_m: f64, alpha_l: f64, alpha_t: f64) -> Self {
        Self {
            d_m,
            alpha_l,
            alpha_t,
        }
    }

    /// `d_m = α_l = α_t = 0`: advection only.
    pub fn is_zero(&self) -> bool {
        self.d_m == 0.0 && self.alpha_l == 0.0 && self.alpha_t == 0.0
    }
}

/// `D(u) = d_m I + |u| (α_l E(u) + α_t (I - E(u)))`, `E = u uᵀ / |u|²`.
pub fn dispersion_tensor(p: &DispersionParams, u: [f64; 2]) -> Tensor2 {
    let norm = (u[0] * u[0] + u[1] * u[1]).sqrt();
    let mut d = [[p.d_m, 0.0], [0.0, p.d_m]];
    if norm > 0.0 {
        for i in 0..2 {
            for j in 0..2 {
                let e = u[i] * u[j] / (norm * norm);
                let id = if i == j { 1.0 } else { 0.0 };
                d[i][j] += norm * (p.alpha_l * e + p.alpha_t * (id - e));
            }
        }
    }
    d
}

#[inline]
pub fn tensor_apply(t: &Tensor2, v: [f64; 2]) -> [f64; 2] {
    [
        t[0][0] * v[0] + t[0][1] * v[1],
        t[1][0] * v[0] + t[1][1] * v[1],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscosityModel {
    /// Injected (solvent) viscosity, Pa·s.
    pub mu_s: f64,
    /// Resident viscosity, Pa·s.
    pub mu_0: f64,
}

impl ViscosityModel {
    pub fn constant(mu: f64) -> Self {
        Self { mu_s: mu, mu_0: mu }
    }

    pub fn ratio(&self) -> f64 {
        self.mu_0 / self.mu_s
    }
}

/// Quarter-power mixing rule `μ(c) = (c μ_s^{-1/4} + (1-c) μ_0^{-1/4})^{-4}`.
/// The caller clamps `c` to `[0,1]`.
pub fn mix_viscosity(m: &ViscosityModel, c: f64) -> f64 {
    if m.mu_s == m.mu_0 {
        return m.mu_s;
    }
    let s = c * m.mu_s.powf(-0.25) + (1.0 - c) * m.mu_0.powf(-0.25);
    s.powi(-4)
}

const PERM_RADIUS: f64 = 0.05;
const PERM_MIN: f64 = 0.01;
const PERM_MAX: f64 = 4.0;

/// Sum of Gaussian bumps around `centers`, clamped to `[0.01, 4]`.
pub fn random_permeability(centers: &[[f64; 2]], x: [f64; 2]) -> f64 {
    let s: f64 = centers
        .iter()
        .map(|c| {
            let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            (-r2 / (PERM_RADIUS * PERM_RADIUS)).exp()
        })
        .sum();
    s.clamp(PERM_MIN, PERM_MAX)
}

/// `count` centers drawn uniformly in `domain` from a seeded generator.
pub fn random_centers(domain: &Rect, count: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            [
                rng.gen_range(domain.x0..domain.x1),
                rng.gen_range(domain.y0..domain.y1),
            ]
        })
        .collect()
}

pub fn single_vortex_velocity(x: f64, y: f64, t: f64, period: f64) -> [f64; 2] {
    let (sx, cx) = (PI * x).sin_cos();
    let (sy, cy) = (PI * y).sin_cos();
    let ct = (PI * t / period).cos();
    [-2.0 * sy * sx * sx * cy * ct, 2.0 * sx * sy * sy * cx * ct]
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("Péclet number is undefined for zero molecular diffusivity")]
pub struct ZeroDiffusivity;

pub fn peclet(length: f64, velocity: f64, d_m: f64) -> Result<f64, ZeroDiffusivity> {
    if d_m == 0.0 {
        return Err(ZeroDiffusivity);
    }
    Ok(length * velocity / d_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn dispersion_at_rest_is_molecular() {
        let p = DispersionParams::new(1e-3, 0.5, 0.1);
        assert_eq!(
            dispersion_tensor(&p, [0.0, 0.0]),
            [[1e-3, 0.0], [0.0, 1e-3]]
        );
    }

    #[test]
    fn dispersion_along_x() {
        let p = DispersionParams::new(0.1, 0.5, 0.2);
        let d = dispersion_tensor(&p, [1.0, 0.0]);
        assert_relative_eq!(d[0][0], 0.6);
        assert_relative_eq!(d[1][1], 0.3);
        assert_eq!(d[0][1], 0.0);
    }

    #[test]
    fn dispersion_rotation_equivariance() {
        let p = DispersionParams::new(0.1, 0.5, 0.2);
        let s = 0.5f64.sqrt();
        let d = dispersion_tensor(&p, [s, s]);
        // R diag(0.6, 0.3) Rᵀ for a 45° rotation
        let (a, b) = (0.6, 0.3);
        assert_relative_eq!(d[0][0], 0.5 * (a + b), epsilon = 1e-15);
        assert_relative_eq!(d[1][1], 0.5 * (a + b), epsilon = 1e-15);
        assert_relative_eq!(d[0][1], 0.5 * (a - b), epsilon = 1e-15);
        assert_relative_eq!(d[1][0], 0.5 * (a - b), epsilon = 1e-15);
    }

    #[test]
    fn viscosity_endpoints_and_midpoint() {
        let m = ViscosityModel {
            mu_s: 0.001,
            mu_0: 0.1,
        };
        assert_relative_eq!(mix_viscosity(&m, 0.0), 0.1, max_relative = 1e-14);
        assert_relative_eq!(mix_viscosity(&m, 1.0), 0.001, max_relative = 1e-14);
        let oracle = (0.5 * 0.001f64.powf(-0.25) + 0.5 * 0.1f64.powf(-0.25)).powf(-4.0);
        assert_relative_eq!(mix_viscosity(&m, 0.5), oracle, max_relative = 1e-14);
        assert!((mix_viscosity(&m, 0.5) - 5.33e-3).abs() < 0.01e-3);
        let same = ViscosityModel::constant(0.3);
        assert_eq!(mix_viscosity(&same, 0.37), 0.3);
    }

    #[test]
    fn viscosity_is_monotone_decreasing() {
        let m = ViscosityModel {
            mu_s: 0.001,
            mu_0: 0.1,
        };
        let vals: Vec<f64> = (0..=100)
            .map(|i| mix_viscosity(&m, i as f64 / 100.0))
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn permeability_clamps() {
        assert_relative_eq!(random_permeability(&[[0.5, 0.5]], [0.5, 0.5]), 1.0);
        assert_eq!(random_permeability(&[[0.5, 0.5]], [0.0, 0.0]), 0.01);
        assert_eq!(random_permeability(&[[0.5, 0.5]; 7], [0.5, 0.5]), 4.0);
    }

    #[test]
    fn centers_are_deterministic() {
        let d = Rect::unit();
        assert_eq!(random_centers(&d, 40, 7), random_centers(&d, 40, 7));
        assert_ne!(random_centers(&d, 40, 7), random_centers(&d, 40, 8));
        assert!(random_centers(&d, 40, 7).iter().all(|c| d.contains(*c)));
    }

    #[test]
    fn vortex_values() {
        let u = single_vortex_velocity(0.5, 0.25, 0.0, 2.0);
        assert_relative_eq!(u[0], -1.0, epsilon = 1e-15);
        assert!(u[1].abs() < 1e-15);
        let u = single_vortex_velocity(0.3, 0.7, 1.0, 2.0);
        assert!(u[0].abs() < 1e-15 && u[1].abs() < 1e-15);
        for s in [0.0, 0.13, 0.5, 0.77, 1.0] {
            assert!(single_vortex_velocity(0.0, s, 0.3, 2.0)[0].abs() < 1e-15);
            assert!(single_vortex_velocity(1.0, s, 0.3, 2.0)[0].abs() < 1e-15);
            assert!(single_vortex_velocity(s, 0.0, 0.3, 2.0)[1].abs() < 1e-15);
            assert!(single_vortex_velocity(s, 1.0, 0.3, 2.0)[1].abs() < 1e-15);
        }
    }

    #[test]
    fn vortex_is_divergence_free() {
        let h = 1e-5;
        for &(x, y) in &[(0.3, 0.6), (0.71, 0.2), (0.5, 0.5)] {
            let dudx = (single_vortex_velocity(x + h, y, 0.1, 2.0)[0]
                - single_vortex_velocity(x - h, y, 0.1, 2.0)[0])
                / (2.0 * h);
            let dvdy = (single_vortex_velocity(x, y + h, 0.1, 2.0)[1]
                - single_vortex_velocity(x, y - h, 0.1, 2.0)[1])
                / (2.0 * h);
            assert!((dudx + dvdy).abs() < 1e-8);
        }
    }

    #[test]
    fn peclet_values() {
        assert_relative_eq!(peclet(1.0, 0.05, 1.8e-8).unwrap(), 0.05 / 1.8e-8);
        assert!((peclet(1.0, 0.05, 1.8e-8).unwrap() - 2.78e6).abs() < 0.01e6);
        assert_eq!(peclet(1.0, 0.0, 1.8e-8).unwrap(), 0.0);
        assert_relative_eq!(
            peclet(2.0, 0.05, 1.8e-8).unwrap(),
            2.0 * peclet(1.0, 0.05, 1.8e-8).unwrap()
        );
        assert!(peclet(1.0, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn dispersion_is_spd(ux in -10.0..10.0f64, uy in -10.0..10.0f64) {
            let p = DispersionParams::new(1e-3, 0.4, 0.05);
            let d = dispersion_tensor(&p, [ux, uy]);
            prop_assert!((d[0][1] - d[1][0]).abs() < 1e-14);
            let tr = d[0][0] + d[1][1];
            let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
            let lmin = 0.5 * tr - (0.25 * tr * tr - det).max(0.0).sqrt();
            prop_assert!(lmin >= p.d_m * (1.0 - 1e-9));
        }
    }
}
