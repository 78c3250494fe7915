use super::{LinalgError, Preconditioner, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    /// Krylov dimension before restart.
    pub restart: usize,
    /// Relative tolerance on the true residual `‖b - Ax‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            restart: 100,
            tol: 1e-10,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
    /// Relative residual after every inner iteration (index 0 = initial).
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else if b.abs() > a.abs() {
        let t = a / b;
        let s = 1.0 / (1.0 + t * t).sqrt();
        (s * t, s)
    } else {
        let t = b / a;
        let c = 1.0 / (1.0 + t * t).sqrt();
        (c, c * t)
    }
}

/// Restarted GMRES with right preconditioning, so the monitored residual is
/// the residual of the original system. `x` holds the initial guess on entry
/// and the last iterate on return (also when convergence fails).
pub fn gmres(
    a: &SparseMatrix,
    b: &[f64],
    x: &mut [f64],
    cfg: &GmresConfig,
    precond: &dyn Preconditioner,
) -> Result<SolveStats, LinalgError> {
    a.check_square()?;
    let n = a.nrows();
    if b.len() != n || x.len() != n {
        return Err(LinalgError::Dimension(format!(
            "A is {n}x{n}, b has {}, x has {}",
            b.len(),
            x.len()
        )));
    }
    if precond.dim() != n {
        return Err(LinalgError::Dimension(format!(
            "preconditioner has dimension {}",
            precond.dim()
        )));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
            history: vec![0.0],
        });
    }
    let m = cfg.restart.max(1);
    let mut iterations = 0usize;
    let mut history = Vec::new();
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];

    loop {
        let r = a.residual(b, x);
        let beta = norm(&r);
        let rel = beta / bnorm;
        if history.is_empty() || *history.last().unwrap() != rel {
            history.push(rel);
        }
        if rel <= cfg.tol {
            return Ok(SolveStats {
                iterations,
                residual: rel,
                history,
            });
        }
        if iterations >= cfg.max_iter {
            return Err(LinalgError::NotConverged {
                iterations,
                residual: rel,
            });
        }
        if !beta.is_finite() {
            return Err(LinalgError::Breakdown("non-finite residual".into()));
        }

        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k_done = 0;
        for k in 0..m {
            iterations += 1;
            precond.apply(&basis[k], &mut z);
            a.matvec(&z, &mut w);
            // modified Gram-Schmidt
            for j in 0..=k {
                let hjk = dot(&w, &basis[j]);
                h[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                    *wi -= hjk * vi;
                }
            }
            let hk1 = norm(&w);
            h[k + 1][k] = hk1;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let (c, s) = givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            h[k][k] = c * h[k][k] + s * h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            k_done = k + 1;
            let est = g[k + 1].abs() / bnorm;
            history.push(est);
            if h[k][k] == 0.0 {
                return Err(LinalgError::Breakdown(format!(
                    "singular Hessenberg at step {k}"
                )));
            }
            // happy breakdown: the Krylov space is invariant
            if hk1 <= 1e-14 * beta || est <= cfg.tol || iterations >= cfg.max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hk1).collect());
        }
        // back substitution
        let mut y = vec![0.0; k_done];
        for i in (0..k_done).rev() {
            let mut acc = g[i];
            for j in i + 1..k_done {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (u, v) in update.iter_mut().zip(&basis[j]) {
                *u += yj * v;
            }
        }
        precond.apply(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        // drop the estimate; the true residual is recomputed at the top
        history.pop();
    }
}
