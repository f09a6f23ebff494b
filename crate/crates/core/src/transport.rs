//! Charge and spin transport: fluxes, the diffusion/drift step and the
//! pointwise precession/relaxation step.
//!
//! Each density is advanced conservatively: after the backward-Euler solve
//! the update is rewritten as `u' = u + dt·(DIV2 J + f)` with the flux `J`
//! evaluated at the new level. `J` for the charge is returned so the Ampère
//! law can use the very same object.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::field::{all_finite, PlanarField, VectorField};
use crate::grid::{div2, grad2, Closure, Grid};
use crate::linsolve::conjugate_gradient;
use crate::state::{
    closure_flux, closure_rho, closure_spin, spin_direction, truncate, FluxPair, PhysParams,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportConfig {
    pub diffusion_implicit: bool,
    pub linsolve_tol: f64,
    pub linsolve_max_iter: usize,
    /// Clip negative densities after the step (diagnostic only).
    pub positivity_clip: bool,
    /// Integrate precession and relaxation exactly instead of one Euler step.
    pub exact_reaction: bool,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            diffusion_implicit: true,
            linsolve_tol: 1e-12,
            linsolve_max_iter: 10_000,
            positivity_clip: false,
            exact_reaction: true,
        }
    }
}

/// Manufactured source terms added to the right-hand sides.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportSource {
    pub rho: Vec<f64>,
    pub s: VectorField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportUpdate {
    pub rho: Vec<f64>,
    pub s: VectorField,
    /// Fluxes whose divergence produced the update.
    pub flux: FluxPair,
    pub iterations: usize,
}

/// Largest admissible `dt·‖E‖∞·D/h`.
pub const DRIFT_CFL: f64 = 0.5;

fn drift(weight: impl Fn(usize) -> f64, e: &VectorField, d: f64) -> PlanarField {
    let n = e.len();
    PlanarField {
        x: (0..n).map(|k| -d * weight(k) * e.x[k]).collect(),
        y: (0..n).map(|k| -d * weight(k) * e.y[k]).collect(),
    }
}

fn add_scaled_grad(drift: &PlanarField, u: &[f64], c: &Closure, d: f64, grid: &Grid) -> PlanarField {
    let g = grad2(u, &grid.spec, c);
    PlanarField {
        x: g.x.iter().zip(&drift.x).map(|(a, b)| d * a + b).collect(),
        y: g.y.iter().zip(&drift.y).map(|(a, b)| d * a + b).collect(),
    }
}

/// `Je = D(GRAD2 ρ − [ρ]_M E)`, rows of `Js = D(GRAD2 s_i − spin_direction(s)_i E)`.
/// No-flux on Γ_N is carried by the flux closure (odd normal component).
pub fn compute_fluxes(
    rho: &[f64],
    s: &VectorField,
    e: &VectorField,
    params: &PhysParams,
    grid: &Grid,
) -> FluxPair {
    compute_fluxes_scaled(rho, s, e, params, grid, 1.0)
}

/// As [`compute_fluxes`] with drift and boundary data multiplied by `sigma`.
pub fn compute_fluxes_scaled(
    rho: &[f64],
    s: &VectorField,
    e: &VectorField,
    params: &PhysParams,
    grid: &Grid,
    sigma: f64,
) -> FluxPair {
    let m = params.m_trunc;
    let d = params.d;
    let dirs: Vec<Vector3<f64>> = (0..s.len()).map(|k| spin_direction(s.at(k), m)).collect();
    let je_drift = drift(|k| sigma * truncate(rho[k], m), e, d);
    let je = add_scaled_grad(&je_drift, rho, &closure_rho(grid, &params.rho_d, sigma), d, grid);
    let cs = closure_spin(grid);
    let js = [0usize, 1, 2].map(|c| {
        let dr = drift(|k| sigma * dirs[k][c], e, d);
        add_scaled_grad(&dr, s.comp(c), &cs, d, grid)
    });
    FluxPair { je, js }
}

/// `DIV2` of a flux with the flux closures.
pub fn flux_divergence(f: &PlanarField, grid: &Grid) -> Vec<f64> {
    let cf = closure_flux(grid);
    div2(&f.x, &f.y, &grid.spec, &cf[0], &cf[1])
}

struct Diffusion<'a> {
    grid: &'a Grid,
    cfg: &'a TransportConfig,
    d: f64,
    dt: f64,
}

impl Diffusion<'_> {
    /// Advances `u` by diffusion with closure `c` plus the given drift flux.
    fn advance(
        &self,
        u: &[f64],
        c: &Closure,
        drift: &PlanarField,
        src: Option<&[f64]>,
        what: &str,
    ) -> Result<(Vec<f64>, PlanarField, usize)> {
        let (grid, d, dt) = (self.grid, self.d, self.dt);
        let n = u.len();
        let f = |k: usize| src.map_or(0.0, |s| s[k]);
        let mut iterations = 0;
        let level = if self.cfg.diffusion_implicit {
            let hom = c.homogeneous();
            let lap = |v: &[f64], cl: &Closure| -> Vec<f64> {
                let g = grad2(v, &grid.spec, cl);
                flux_divergence(&g, grid)
            };
            let affine = lap(&vec![0.0; n], c);
            let ddrift = flux_divergence(drift, grid);
            let b: Vec<f64> = (0..n)
                .map(|k| u[k] + dt * (ddrift[k] + d * affine[k] + f(k)))
                .collect();
            let apply = |v: &[f64]| -> Vec<f64> {
                let l = lap(v, &hom);
                v.iter().zip(&l).map(|(a, b)| a - dt * d * b).collect()
            };
            let mut x = u.to_vec();
            let st = conjugate_gradient(
                apply,
                &b,
                &mut x,
                self.cfg.linsolve_tol,
                self.cfg.linsolve_max_iter,
            )
            .map_err(|e| match e {
                Error::Convergence { iterations, residual, .. } => Error::Convergence {
                    what: format!("{what} diffusion solve"),
                    iterations,
                    residual,
                },
                e => e,
            })?;
            iterations = st.iterations;
            x
        } else {
            u.to_vec()
        };
        let flux = add_scaled_grad(drift, &level, c, d, grid);
        let div = flux_divergence(&flux, grid);
        let out = (0..n).map(|k| u[k] + dt * (div[k] + f(k))).collect();
        Ok((out, flux, iterations))
    }
}

/// Precession about `m` and relaxation of one spin vector over `dt`.
pub fn react(
    s: Vector3<f64>,
    m: Vector3<f64>,
    params: &PhysParams,
    sigma: f64,
    dt: f64,
    exact: bool,
) -> Vector3<f64> {
    if exact {
        let norm = s.norm();
        let factor = if params.m_trunc.is_finite() && norm > params.m_trunc {
            params.m_trunc / norm
        } else {
            1.0
        };
        let mn = m.norm();
        let rotated = if mn > 0.0 && norm > 0.0 {
            let u = m / mn;
            let theta = -params.gamma * sigma * factor * mn * dt;
            let (sn, cs) = theta.sin_cos();
            s * cs + u.cross(&s) * sn + u * u.dot(&s) * (1.0 - cs)
        } else {
            s
        };
        rotated * (-dt / params.tau).exp()
    } else {
        let dir = spin_direction(s, params.m_trunc);
        s - dt * (params.gamma * sigma * m.cross(&dir) + s / params.tau)
    }
}

/// One transport step with full coupling strength.
#[allow(clippy::too_many_arguments)]
pub fn step_transport(
    rho: &[f64],
    s: &VectorField,
    e: &VectorField,
    m: &VectorField,
    params: &PhysParams,
    cfg: &TransportConfig,
    grid: &Grid,
    dt: f64,
) -> Result<TransportUpdate> {
    step_transport_scaled(rho, s, e, m, params, cfg, grid, dt, 1.0, None)
}

/// One transport step. Drift, precession and the contact value of ρ are
/// multiplied by `sigma`.
#[allow(clippy::too_many_arguments)]
pub fn step_transport_scaled(
    rho: &[f64],
    s: &VectorField,
    e: &VectorField,
    m: &VectorField,
    params: &PhysParams,
    cfg: &TransportConfig,
    grid: &Grid,
    dt: f64,
    sigma: f64,
    source: Option<&TransportSource>,
) -> Result<TransportUpdate> {
    if !(dt > 0.0) {
        return Err(Error::Data(format!("transport step needs dt > 0, got {dt}")));
    }
    if !all_finite(rho) || !s.all_finite() || !e.all_finite() || !m.all_finite() {
        return Err(Error::Data("non-finite transport input".into()));
    }
    let h = grid.spec.hx().min(grid.spec.hy());
    let d = params.d;
    if !cfg.diffusion_implicit && dt > h * h / (4.0 * d) * (1.0 + 1e-12) {
        return Err(Error::Stability(format!(
            "explicit diffusion needs dt <= h^2/(4D) = {}",
            h * h / (4.0 * d)
        )));
    }
    let emax = sigma * e.planar_max_norm();
    if dt * emax * d / h > DRIFT_CFL {
        return Err(Error::Stability(format!(
            "drift CFL violated: dt*|E|*D/h = {}",
            dt * emax * d / h
        )));
    }
    let mt = params.m_trunc;
    let dirs: Vec<Vector3<f64>> = (0..s.len()).map(|k| spin_direction(s.at(k), mt)).collect();
    let diff = Diffusion { grid, cfg, d, dt };

    let je_drift = drift(|k| sigma * truncate(rho[k], mt), e, d);
    let (mut rho_new, je, mut iterations) = diff.advance(
        rho,
        &closure_rho(grid, &params.rho_d, sigma),
        &je_drift,
        source.map(|f| f.rho.as_slice()),
        "charge",
    )?;

    let cs = closure_spin(grid);
    let mut s_new = VectorField::zeros(s.len());
    let mut js = Vec::with_capacity(3);
    for c in 0..3 {
        let dr = drift(|k| sigma * dirs[k][c], e, d);
        let (u, f, it) = diff.advance(
            s.comp(c),
            &cs,
            &dr,
            source.map(|f| f.s.comp(c)),
            "spin",
        )?;
        *s_new.comp_mut(c) = u;
        js.push(f);
        iterations = iterations.max(it);
    }
    for k in 0..s_new.len() {
        let r = react(s_new.at(k), m.at(k), params, sigma, dt, cfg.exact_reaction);
        s_new.set(k, r);
    }
    if cfg.positivity_clip {
        for v in rho_new.iter_mut() {
            *v = v.max(0.0);
        }
    }
    if !all_finite(&rho_new) || !s_new.all_finite() {
        return Err(Error::Data("transport step produced non-finite values".into()));
    }
    let js: [PlanarField; 3] = js.try_into().expect("three spin rows");
    Ok(TransportUpdate {
        rho: rho_new,
        s: s_new,
        flux: FluxPair { je, js },
        iterations,
    })
}
