//! Landau-Lifshitz-Gilbert stepper on ω.
//!
//! ```text
//! ∂t m = ε Δm + m × h − α m × (m × h),   h = Δm + H + β s
//! ```
//!
//! with the compact Neumann Laplacian on ω and pointwise projection back to
//! the sphere after each step.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::field::{max_abs, VectorField};
use crate::grid::{face_gradient_energy, lap_neumann, Grid};
use crate::state::PhysParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LlgScheme {
    ExplicitRk2Project,
    GilbertForm,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LlgConfig {
    pub eps_exchange_reg: f64,
    pub scheme: LlgScheme,
    pub project_each_step: bool,
    /// Bound on `dt·(‖H‖∞ + β‖s‖∞ + (1+ε)(4/hx² + 4/hy²))`.
    pub stability_cap: f64,
}

impl Default for LlgConfig {
    fn default() -> Self {
        Self {
            eps_exchange_reg: 0.0,
            scheme: LlgScheme::ExplicitRk2Project,
            project_each_step: true,
            stability_cap: 0.5,
        }
    }
}

/// Solves `v − (αm) × v = f`.
pub fn g_inverse(m: Vector3<f64>, alpha: f64, f: Vector3<f64>) -> Vector3<f64> {
    let a = alpha * m;
    (f + a.cross(&f) + a * a.dot(&f)) / (1.0 + a.norm_squared())
}

fn exchange(m: &VectorField, grid: &Grid) -> VectorField {
    let om = grid.omega();
    VectorField {
        x: lap_neumann(&m.x, &grid.spec, om),
        y: lap_neumann(&m.y, &grid.spec, om),
        z: lap_neumann(&m.z, &grid.spec, om),
    }
}

fn assemble(lap: &VectorField, h: &VectorField, s: &VectorField, beta: f64, sigma: f64, grid: &Grid) -> VectorField {
    let mut out = VectorField::zeros(lap.len());
    for k in grid.omega_cells() {
        out.set(k, lap.at(k) + sigma * (h.at(k) + beta * s.at(k)));
    }
    out
}

/// `Δm + H + β s` on ω, zero elsewhere.
pub fn effective_field(
    m: &VectorField,
    h: &VectorField,
    s: &VectorField,
    params: &PhysParams,
    grid: &Grid,
) -> VectorField {
    assemble(&exchange(m, grid), h, s, params.beta, 1.0, grid)
}

struct Rhs<'a> {
    h: &'a VectorField,
    s: &'a VectorField,
    params: &'a PhysParams,
    cfg: &'a LlgConfig,
    grid: &'a Grid,
    sigma: f64,
}

impl Rhs<'_> {
    fn eval(&self, m: &VectorField) -> VectorField {
        let lap = exchange(m, self.grid);
        let heff = assemble(&lap, self.h, self.s, self.params.beta, self.sigma, self.grid);
        let alpha = self.params.alpha;
        let eps = self.cfg.eps_exchange_reg;
        let mut out = VectorField::zeros(m.len());
        for k in self.grid.omega_cells() {
            let mk = m.at(k);
            let hk = heff.at(k);
            let torque = match self.cfg.scheme {
                LlgScheme::ExplicitRk2Project => {
                    mk.cross(&hk) - alpha * mk.cross(&mk.cross(&hk))
                }
                LlgScheme::GilbertForm => {
                    g_inverse(mk, -alpha, (1.0 + alpha * alpha) * mk.cross(&hk))
                }
            };
            out.set(k, eps * lap.at(k) + torque);
        }
        out
    }
}

/// One step at full coupling strength.
#[allow(clippy::too_many_arguments)]
pub fn step_llg(
    m: &VectorField,
    h: &VectorField,
    s: &VectorField,
    params: &PhysParams,
    cfg: &LlgConfig,
    grid: &Grid,
    dt: f64,
) -> Result<VectorField> {
    step_llg_scaled(m, h, s, params, cfg, grid, dt, 1.0)
}

/// One step with `H` and `β s` multiplied by `sigma`; the result is
/// projected to length `sigma` on ω.
#[allow(clippy::too_many_arguments)]
pub fn step_llg_scaled(
    m: &VectorField,
    h: &VectorField,
    s: &VectorField,
    params: &PhysParams,
    cfg: &LlgConfig,
    grid: &Grid,
    dt: f64,
    sigma: f64,
) -> Result<VectorField> {
    if !(dt > 0.0) {
        return Err(Error::Data(format!("LLG step needs dt > 0, got {dt}")));
    }
    if !m.all_finite() || !h.all_finite() || !s.all_finite() {
        return Err(Error::Data("non-finite LLG input".into()));
    }
    if grid.omega_cells().next().is_none() {
        return Ok(m.clone());
    }
    let on_omega = |f: &VectorField| grid.omega_cells().map(|k| f.at(k).norm()).fold(0.0, f64::max);
    let (hx, hy) = (grid.spec.hx(), grid.spec.hy());
    let stiff = (1.0 + cfg.eps_exchange_reg) * (4.0 / (hx * hx) + 4.0 / (hy * hy));
    let load = dt * (sigma * on_omega(h) + sigma * params.beta * on_omega(s) + stiff);
    if load > cfg.stability_cap {
        return Err(Error::Stability(format!(
            "LLG step too large: dt-weighted field bound {load} exceeds {}",
            cfg.stability_cap
        )));
    }
    let rhs = Rhs {
        h,
        s,
        params,
        cfg,
        grid,
        sigma,
    };
    let half = m.axpy(0.5 * dt, &rhs.eval(m));
    let mut out = m.axpy(dt, &rhs.eval(&half));
    for k in 0..out.len() {
        if !grid.in_omega(k) {
            out.set(k, Vector3::zeros());
        }
    }
    if cfg.project_each_step {
        for k in grid.omega_cells() {
            let v = out.at(k);
            let n = v.norm();
            if sigma > 0.0 && n < 0.5 * sigma {
                return Err(Error::Stability(format!(
                    "|m| fell to {n} before projection at cell {k}"
                )));
            }
            out.set(k, if sigma > 0.0 { v * (sigma / n) } else { Vector3::zeros() });
        }
    }
    if !out.all_finite() {
        return Err(Error::Data("LLG step produced non-finite values".into()));
    }
    Ok(out)
}

/// `½ Σ |∇m|²` over ω faces minus the Zeeman term `Σ H·m` over ω, times the
/// cell area.
pub fn exchange_zeeman_energy(m: &VectorField, h: &VectorField, grid: &Grid) -> f64 {
    let om = grid.omega();
    let ex: f64 = (0..3).map(|c| face_gradient_energy(m.comp(c), &grid.spec, om)).sum();
    let zee: f64 = grid.omega_cells().map(|k| h.at(k).dot(&m.at(k))).sum();
    ex - zee * grid.spec.cell_area()
}

/// `max_ω | |m| − 1 |` for unit-length data.
pub fn unit_defect(m: &VectorField, grid: &Grid) -> f64 {
    let d: Vec<f64> = grid.omega_cells().map(|k| m.at(k).norm() - 1.0).collect();
    max_abs(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, BoundaryLayout, GridSpec, Rect};
    use crate::state::SideValues;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn grid() -> Grid {
        build_grid(
            GridSpec::new(16, 16, 8.0, 8.0).unwrap(),
            Some(Rect::new(1.0, 7.0, 1.0, 4.0)),
            Some(Rect::new(1.0, 7.0, 4.5, 7.0)),
            BoundaryLayout::default(),
        )
        .unwrap()
    }

    fn params(g: &Grid, alpha: f64, beta: f64) -> PhysParams {
        PhysParams {
            alpha,
            beta,
            gamma: 1.0,
            d: 1.0,
            tau: 1.0,
            m_trunc: f64::INFINITY,
            doping: vec![0.0; g.spec.len()],
            rho_d: SideValues::uniform(1.0),
        }
    }

    fn on_omega(g: &Grid, v: Vector3<f64>) -> VectorField {
        let mut m = VectorField::zeros(g.spec.len());
        for k in g.omega_cells() {
            m.set(k, v);
        }
        m
    }

    #[test]
    fn effective_field_examples() {
        let g = grid();
        let n = g.spec.len();
        let m = on_omega(&g, Vector3::new(0.6, 0.0, 0.8));
        let z = VectorField::zeros(n);
        assert!(effective_field(&m, &z, &z, &params(&g, 1.0, 0.1), &g).max_norm() < 1e-14);
        let h = VectorField::uniform(n, Vector3::z());
        let s = VectorField::uniform(n, Vector3::new(0.0, 0.5, 0.0));
        let f = effective_field(&m, &h, &s, &params(&g, 1.0, 2.0), &g);
        for k in 0..n {
            let want = if g.in_omega(k) { Vector3::new(0.0, 1.0, 1.0) } else { Vector3::zeros() };
            assert!((f.at(k) - want).norm() < 1e-14);
        }
    }

    #[test]
    fn g_inverse_examples() {
        let f = Vector3::new(0.3, -2.0, 1.0);
        assert_eq!(g_inverse(Vector3::new(1.0, 2.0, 3.0), 0.0, f), f);
        let v = g_inverse(Vector3::z(), 1.0, Vector3::x());
        assert!((v - Vector3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn g_inverse_random_residual() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let mut r = || Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let m = r().normalize();
            let f = r() * 3.0;
            let alpha = 5.0 * r().x;
            let v = g_inverse(m, alpha, f);
            worst = worst.max((v - alpha * m.cross(&v) - f).norm());
        }
        assert!(worst <= 1e-12, "{worst}");
    }

    proptest! {
        #[test]
        fn g_inverse_solves(mx in -1.0..1.0f64, my in -1.0..1.0f64, mz in -1.0..1.0f64,
                            fx in -5.0..5.0f64, fy in -5.0..5.0f64, fz in -5.0..5.0f64,
                            alpha in -3.0..3.0f64) {
            let m = Vector3::new(mx, my, mz);
            let f = Vector3::new(fx, fy, fz);
            let v = g_inverse(m, alpha, f);
            prop_assert!((v - alpha * m.cross(&v) - f).norm() <= 1e-12 * (1.0 + f.norm()));
        }
    }

    #[test]
    fn free_precession() {
        let g = grid();
        let n = g.spec.len();
        let mut m = on_omega(&g, Vector3::x());
        let h = VectorField::uniform(n, Vector3::z());
        let z = VectorField::zeros(n);
        let p = params(&g, 0.0, 0.0);
        let steps = 1571;
        let dt = (PI / 2.0) / steps as f64;
        for _ in 0..steps {
            m = step_llg(&m, &h, &z, &p, &LlgConfig::default(), &g, dt).unwrap();
        }
        let t = PI / 2.0;
        for k in g.omega_cells() {
            assert!((m.at(k) - Vector3::new(t.cos(), -t.sin(), 0.0)).norm() <= 1e-5);
        }
        assert!(m.x.iter().enumerate().all(|(k, v)| g.in_omega(k) || *v == 0.0));
    }

    #[test]
    fn parallel_field_is_fixed_point() {
        let g = grid();
        let n = g.spec.len();
        let dir = Vector3::new(1.0, -2.0, 2.0) / 3.0;
        let m = on_omega(&g, dir);
        let h = VectorField::uniform(n, dir * 0.7);
        let s = VectorField::uniform(n, dir * 1.3);
        let out = step_llg(&m, &h, &s, &params(&g, 0.5, 0.4), &LlgConfig::default(), &g, 0.01).unwrap();
        assert!((0..n).all(|k| (out.at(k) - m.at(k)).norm() < 1e-15));
    }

    #[test]
    fn damping_aligns_with_field() {
        let g = grid();
        let n = g.spec.len();
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = on_omega(&g, Vector3::new(c, 0.0, c));
        let h = VectorField::uniform(n, Vector3::z());
        let z = VectorField::zeros(n);
        let p = params(&g, 1.0, 0.0);
        let dt = 0.01;
        let k0 = g.omega_cells().next().unwrap();
        let mut last = m.z[k0];
        for _ in 0..2000 {
            m = step_llg(&m, &h, &z, &p, &LlgConfig::default(), &g, dt).unwrap();
            assert!(m.z[k0] >= last - 1e-15);
            last = m.z[k0];
        }
        assert!((m.z[k0] - 1.0).abs() <= 1e-6);
        assert!(unit_defect(&m, &g) <= 1e-14);
    }

    #[test]
    fn gilbert_form_agrees() {
        let g = grid();
        let n = g.spec.len();
        let m0 = on_omega(&g, Vector3::new(0.6, 0.0, 0.8));
        let h = VectorField::uniform(n, Vector3::new(0.2, 0.0, 1.0));
        let z = VectorField::zeros(n);
        let p = params(&g, 0.5, 0.0);
        let run = |scheme, dt: f64| {
            let cfg = LlgConfig { scheme, ..Default::default() };
            let mut m = m0.clone();
            for _ in 0..(1.0 / dt).round() as usize {
                m = step_llg(&m, &h, &z, &p, &cfg, &g, dt).unwrap();
            }
            m
        };
        for dt in [0.01, 0.005] {
            let a = run(LlgScheme::ExplicitRk2Project, dt);
            let b = run(LlgScheme::GilbertForm, dt);
            let diff = a.axpy(-1.0, &b).max_norm();
            assert!(diff <= 10.0 * dt * dt, "{diff}");
        }
    }

    #[test]
    fn energy_decreases_with_frozen_field() {
        let g = grid();
        let n = g.spec.len();
        let mut m = VectorField::zeros(n);
        for k in g.omega_cells() {
            let (i, j) = g.spec.ij(k);
            let (x, y) = g.spec.center(i, j);
            let th = 0.6 * (x * 0.9).sin() + 0.3 * y;
            m.set(k, Vector3::new(th.sin(), 0.2, th.cos()).normalize());
        }
        let h = VectorField::uniform(n, Vector3::new(0.0, 0.3, 0.5));
        let z = VectorField::zeros(n);
        let p = params(&g, 1.0, 0.0);
        let mut w = exchange_zeeman_energy(&m, &h, &g);
        for _ in 0..200 {
            m = step_llg(&m, &h, &z, &p, &LlgConfig::default(), &g, 0.01).unwrap();
            let w1 = exchange_zeeman_energy(&m, &h, &g);
            assert!(w1 <= w + 1e-8, "{w1} > {w}");
            w = w1;
        }
    }

    #[test]
    fn stability_and_data_errors() {
        let g = grid();
        let n = g.spec.len();
        let m = on_omega(&g, Vector3::x());
        let z = VectorField::zeros(n);
        let p = params(&g, 1.0, 0.0);
        let r = step_llg(&m, &z, &z, &p, &LlgConfig::default(), &g, 0.2);
        assert!(matches!(r, Err(Error::Stability(_))));
        let mut bad = m.clone();
        bad.y[0] = f64::NAN;
        let r = step_llg(&bad, &z, &z, &p, &LlgConfig::default(), &g, 0.01);
        assert!(matches!(r, Err(Error::Data(_))));
    }

    #[test]
    fn exchange_converges_second_order() {
        let err = |n: usize| {
            let g = build_grid(
                GridSpec::new(n, n, 1.0, 1.0).unwrap(),
                Some(Rect::new(0.25, 0.75, 0.25, 0.75)),
                None,
                BoundaryLayout::default(),
            )
            .unwrap();
            let a = 0.4;
            let k4 = 4.0 * PI;
            let mut m = VectorField::zeros(g.spec.len());
            let mut worst = 0.0f64;
            let mut want = Vec::new();
            for k in g.omega_cells() {
                let (i, j) = g.spec.ij(k);
                let (x, _) = g.spec.center(i, j);
                let th = a * (k4 * (x - 0.25)).cos();
                m.set(k, Vector3::new(th.sin(), 0.0, th.cos()));
                let t1 = -a * k4 * (k4 * (x - 0.25)).sin();
                let t2 = -a * k4 * k4 * (k4 * (x - 0.25)).cos();
                // Δ(sin θ, 0, cos θ) for θ = θ(x)
                want.push((k, Vector3::new(t2 * th.cos() - t1 * t1 * th.sin(), 0.0, -t2 * th.sin() - t1 * t1 * th.cos())));
            }
            let lap = exchange(&m, &g);
            for (k, w) in want {
                let (i, _) = g.spec.ij(k);
                // away from the edges of ω where the closure is first order
                let (x, _) = g.spec.center(i, 0);
                if x > 0.3 && x < 0.7 {
                    worst = worst.max((lap.at(k) - w).norm());
                }
            }
            worst
        };
        let (e1, e2) = (err(64), err(128));
        let rate = (e1 / e2).log2();
        assert!(rate > 1.8, "rate {rate} ({e1}, {e2})");
    }
}
