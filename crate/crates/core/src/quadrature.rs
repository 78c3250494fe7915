//! Gauss–Legendre rules on the unit interval and the unit square.

/// Points per direction.
pub const NQ1: usize = 3;
/// Points per cell.
pub const NQC: usize = NQ1 * NQ1;
/// Points per face.
pub const NQF: usize = NQ1;

const G: f64 = 0.387_298_334_620_741_7; // sqrt(3/5) / 2

/// 3-point Gauss rule on `[0,1]`, exact for polynomials of degree 5.
pub const LINE_POINTS: [f64; NQ1] = [0.5 - G, 0.5, 0.5 + G];
pub const LINE_WEIGHTS: [f64; NQ1] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureRule<const N: usize> {
    pub points: [[f64; 2]; N],
    pub weights: [f64; N],
}

/// Tensor 3x3 rule on the reference square `[0,1]^2`; weights sum to 1.
pub fn cell_rule() -> QuadratureRule<NQC> {
    let mut points = [[0.0; 2]; NQC];
    let mut weights = [0.0; NQC];
    for j in 0..NQ1 {
        for i in 0..NQ1 {
            points[j * NQ1 + i] = [LINE_POINTS[i], LINE_POINTS[j]];
            weights[j * NQ1 + i] = LINE_WEIGHTS[i] * LINE_WEIGHTS[j];
        }
    }
    QuadratureRule { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_measure() {
        assert!((LINE_WEIGHTS.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((cell_rule().weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn line_rule_exact_to_degree_five() {
        for p in 0..=5 {
            let q: f64 = LINE_POINTS
                .iter()
                .zip(LINE_WEIGHTS)
                .map(|(x, w)| w * x.powi(p))
                .sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn cell_rule_exact_for_biquintic_monomials() {
        let r = cell_rule();
        for a in 0..=5 {
            for b in 0..=5 {
                let q: f64 = r
                    .points
                    .iter()
                    .zip(r.weights)
                    .map(|(p, w)| w * p[0].powi(a) * p[1].powi(b))
                    .sum();
                let exact = 1.0 / ((a + 1) as f64 * (b + 1) as f64);
                assert!((q - exact).abs() < 1e-14);
            }
        }
    }
}
