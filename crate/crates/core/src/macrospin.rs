//! Single-domain magnet in a uniform field, run through the LLG stepper and
//! compared with the closed-form trajectory.

use nalgebra::Vector3;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::{build_grid, BoundaryLayout, GridSpec, Rect};
use crate::llg::{step_llg, LlgConfig, LlgScheme};
use crate::state::{PhysParams, SideValues};

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacrospinParams {
    pub alpha: f64,
    pub h: [f64; 3],
    pub m0: [f64; 3],
    pub dt: f64,
    pub t_end: f64,
    pub scheme: LlgScheme,
}

impl Default for MacrospinParams {
    /// Free precession about z for a quarter period.
    fn default() -> Self {
        Self {
            alpha: 0.0,
            h: [0.0, 0.0, 1.0],
            m0: [1.0, 0.0, 0.0],
            dt: 1e-3,
            t_end: std::f64::consts::FRAC_PI_2,
            scheme: LlgScheme::ExplicitRk2Project,
        }
    }
}

impl MacrospinParams {
    pub fn parse(text: &str) -> Result<Self> {
        json5::from_str(text).map_err(|e| {
            let (line, column) = e.position().map_or((0, 0), |p| (p.line + 1, p.column + 1));
            Error::Parse {
                line,
                column,
                message: e.to_string(),
            }
        })
    }
}

/// Exact solution of `ṁ = m × h − α m × (m × h)` for constant `h`: the polar
/// angle about `h` obeys `tan(θ/2) = tan(θ₀/2) e^{−α|h|t}` and the azimuth
/// turns at rate `−|h|`.
pub fn exact(m0: Vector3<f64>, h: Vector3<f64>, alpha: f64, t: f64) -> Vector3<f64> {
    let b = h.norm();
    let m0 = m0.normalize();
    if b == 0.0 {
        return m0;
    }
    let e3 = h / b;
    let perp = m0 - e3 * m0.dot(&e3);
    if perp.norm() < 1e-300 {
        return m0;
    }
    let e1 = perp.normalize();
    let e2 = e3.cross(&e1);
    let th0 = m0.dot(&e3).clamp(-1.0, 1.0).acos();
    let th = 2.0 * ((th0 / 2.0).tan() * (-alpha * b * t).exp()).atan();
    let phi = -b * t;
    th.sin() * (phi.cos() * e1 + phi.sin() * e2) + th.cos() * e3
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacrospinReport {
    pub steps: usize,
    pub m_final: Vector3<f64>,
    pub m_exact: Vector3<f64>,
    /// Largest `|m − m_exact|` over all steps.
    pub max_error: f64,
    pub max_unit_defect: f64,
}

pub fn run_macrospin(p: &MacrospinParams) -> Result<MacrospinReport> {
    if !(p.dt > 0.0) || !(p.t_end >= 0.0) {
        return Err(Error::config("dt", "need dt > 0 and t_end >= 0"));
    }
    if !(p.alpha >= 0.0) {
        return Err(Error::config("alpha", "must be nonnegative"));
    }
    let m0 = Vector3::from(p.m0);
    if m0.norm() == 0.0 {
        return Err(Error::config("m0", "must be nonzero"));
    }
    let m0 = m0.normalize();
    let h = Vector3::from(p.h);
    // single ω cell in a large box
    let grid = build_grid(
        GridSpec::new(3, 3, 300.0, 300.0)?,
        Some(Rect::new(100.0, 200.0, 100.0, 200.0)),
        None,
        BoundaryLayout::default(),
    )?;
    let n = grid.spec.len();
    let k0 = grid.omega_cells().next().expect("centre cell");
    let params = PhysParams {
        alpha: p.alpha,
        beta: 0.0,
        gamma: 1.0,
        d: 1.0,
        tau: 1.0,
        m_trunc: f64::INFINITY,
        doping: vec![0.0; n],
        rho_d: SideValues::uniform(1.0),
    };
    let cfg = LlgConfig {
        scheme: p.scheme,
        ..Default::default()
    };
    let hf = VectorField::uniform(n, h);
    let zero = VectorField::zeros(n);
    let mut m = VectorField::zeros(n);
    m.set(k0, m0);
    let steps = (p.t_end / p.dt - 1e-9).ceil().max(0.0) as usize;
    let (mut max_error, mut max_unit_defect) = (0.0f64, 0.0f64);
    for k in 1..=steps {
        let dt = if k == steps { p.t_end - (steps - 1) as f64 * p.dt } else { p.dt };
        m = step_llg(&m, &hf, &zero, &params, &cfg, &grid, dt)?;
        let t = if k == steps { p.t_end } else { k as f64 * p.dt };
        let mk = m.at(k0);
        max_error = max_error.max((mk - exact(m0, h, p.alpha, t)).norm());
        max_unit_defect = max_unit_defect.max((mk.norm() - 1.0).abs());
    }
    Ok(MacrospinReport {
        steps,
        m_final: m.at(k0),
        m_exact: exact(m0, h, p.alpha, p.t_end),
        max_error,
        max_unit_defect,
    })
}
