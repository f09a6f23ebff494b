//! Matrix-free Krylov solvers for the stencil systems.

use crate::error::{Error, Result};
use crate::field::dot;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive (semi-)definite operator.
/// Converges when `‖b - A x‖ ≤ tol · max(‖b‖, 1)`.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let target = tol * dot(b, b).sqrt().max(1.0);
    let ax = apply(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= target {
        return Ok(SolveStats {
            iterations: 0,
            residual: rr.sqrt(),
        });
    }
    let mut p = r.clone();
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Convergence {
                what: "conjugate gradient (operator not positive definite)".into(),
                iterations: it,
                residual: rr.sqrt(),
            });
        }
        let alpha = rr / pap;
        for k in 0..x.len() {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= target {
            return Ok(SolveStats {
                iterations: it,
                residual: rr_new.sqrt(),
            });
        }
        let beta = rr_new / rr;
        for k in 0..p.len() {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_new;
    }
    Err(Error::Convergence {
        what: "conjugate gradient".into(),
        iterations: max_iter,
        residual: rr.sqrt(),
    })
}

/// BiCGSTAB for nonsymmetric operators; same stopping rule as CG.
pub fn bicgstab(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = b.len();
    let target = tol * dot(b, b).sqrt().max(1.0);
    let ax = apply(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let mut res = dot(&r, &r).sqrt();
    if res <= target {
        return Ok(SolveStats {
            iterations: 0,
            residual: res,
        });
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        v = apply(&p);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            break;
        }
        alpha = rho / rv;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        let ss = dot(&s, &s).sqrt();
        if ss <= target {
            for k in 0..n {
                x[k] += alpha * p[k];
            }
            return Ok(SolveStats {
                iterations: it,
                residual: ss,
            });
        }
        let t = apply(&s);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for k in 0..n {
            x[k] += alpha * p[k] + omega * s[k];
            r[k] = s[k] - omega * t[k];
        }
        res = dot(&r, &r).sqrt();
        if res <= target {
            return Ok(SolveStats {
                iterations: it,
                residual: res,
            });
        }
    }
    Err(Error::Convergence {
        what: "BiCGSTAB".into(),
        iterations: max_iter,
        residual: res,
    })
}
