//! Grid-refinement studies against manufactured and closed-form solutions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::{build_grid, BoundaryLayout, Grid, GridSpec, Rect};
use crate::llg::{step_llg, LlgConfig};
use crate::maxwell::{step_maxwell, MaxwellSources};
use crate::state::{PhysParams, SideValues};
use crate::transport::{step_transport_scaled, TransportConfig, TransportSource};

/// Finest-pair order below which a study fails.
pub const MIN_ORDER: f64 = 1.5;

pub const DEFAULT_LADDER: [usize; 3] = [32, 64, 128];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmsKind {
    /// Charge and spin diffusion with relaxation.
    Transport,
    /// Source-free standing electromagnetic mode.
    Maxwell,
    /// Exchange operator on ω, measured through the LLG stepper.
    LlgExchange,
}

impl MmsKind {
    pub const ALL: [MmsKind; 3] = [MmsKind::Transport, MmsKind::Maxwell, MmsKind::LlgExchange];
}

impl fmt::Display for MmsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MmsKind::Transport => "TRANSPORT",
            MmsKind::Maxwell => "MAXWELL",
            MmsKind::LlgExchange => "LLG_EXCHANGE",
        })
    }
}

impl FromStr for MmsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "TRANSPORT" => Ok(MmsKind::Transport),
            "MAXWELL" => Ok(MmsKind::Maxwell),
            "LLG_EXCHANGE" => Ok(MmsKind::LlgExchange),
            _ => Err(Error::config(
                "kind",
                format!("unknown study {s:?}, expected TRANSPORT, MAXWELL or LLG_EXCHANGE"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmsRow {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub kind: MmsKind,
    pub rows: Vec<MmsRow>,
    /// `log2(e_k / e_{k+1})` for successive rows.
    pub orders: Vec<f64>,
}

impl ConvergenceTable {
    pub fn finest_order(&self) -> f64 {
        *self.orders.last().expect("ladder of at least two grids")
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} convergence", self.kind)?;
        writeln!(f, "{:>6} {:>12} {:>12} {:>7} {:>14} {:>7}", "n", "h", "dt", "steps", "L2 error", "order")?;
        for (i, r) in self.rows.iter().enumerate() {
            let order = if i == 0 {
                "-".to_string()
            } else {
                format!("{:.3}", self.orders[i - 1])
            };
            writeln!(
                f,
                "{:>6} {:>12.4e} {:>12.4e} {:>7} {:>14.6e} {:>7}",
                r.n, r.h, r.dt, r.steps, r.error, order
            )?;
        }
        Ok(())
    }
}

fn unit_square(n: usize, omega: Option<Rect>, layout: BoundaryLayout) -> Result<Grid> {
    build_grid(GridSpec::new(n, n, 1.0, 1.0)?, omega, None, layout)
}

fn params(g: &Grid) -> PhysParams {
    PhysParams {
        alpha: 1.0,
        beta: 0.0,
        gamma: 1.0,
        d: 1.0,
        tau: 1.0,
        m_trunc: f64::INFINITY,
        doping: vec![0.0; g.spec.len()],
        rho_d: SideValues::uniform(1.0),
    }
}

fn steps_for(t_end: f64, dt_max: f64) -> (usize, f64) {
    let steps = (t_end / dt_max).ceil() as usize;
    (steps, t_end / steps as f64)
}

/// Cell-weighted L² norm over the cells where `keep` holds.
fn l2(spec: &GridSpec, keep: impl Fn(usize) -> bool, diff: impl Fn(usize) -> f64) -> f64 {
    let area = spec.hx() * spec.hy();
    (0..spec.len()).filter(|&k| keep(k)).map(|k| diff(k).powi(2) * area).sum::<f64>().sqrt()
}

/// `ρ* = 2 + e^{−t} cos(πx) cos(πy)` and `s* = e^{−t} cos(πx) cos(πy) e_x`
/// with insulating edges and no field, driven by compensating sources.
/// `dt = h²`, run to `t = 0.05`.
fn transport_error(n: usize) -> Result<MmsRow> {
    const T: f64 = 0.05;
    let g = unit_square(n, None, BoundaryLayout::all_neumann())?;
    let p = params(&g);
    let spec = g.spec;
    let h = spec.hx();
    let (steps, dt) = steps_for(T, h * h);
    let shape = spec.sample(|x, y| (PI * x).cos() * (PI * y).cos());
    let cells = spec.len();
    let rho_exact = |t: f64| -> Vec<f64> { shape.iter().map(|v| 2.0 + (-t).exp() * v).collect() };
    let s_exact = |t: f64| -> VectorField {
        let mut s = VectorField::zeros(cells);
        s.x = shape.iter().map(|v| (-t).exp() * v).collect();
        s
    };
    let lap = -2.0 * PI * PI * p.d;
    let mut rho = rho_exact(0.0);
    let mut s = s_exact(0.0);
    let zero = VectorField::zeros(cells);
    let cfg = TransportConfig::default();
    for k in 1..=steps {
        let t = k as f64 * dt;
        let amp = (-t).exp();
        let mut src = TransportSource {
            rho: shape.iter().map(|v| amp * v * (-1.0 - lap)).collect(),
            s: VectorField::zeros(cells),
        };
        src.s.x = shape.iter().map(|v| amp * v * (-1.0 - lap + 1.0 / p.tau)).collect();
        let up = step_transport_scaled(&rho, &s, &zero, &zero, &p, &cfg, &g, dt, 1.0, Some(&src))?;
        rho = up.rho;
        s = up.s;
    }
    let (re, se) = (rho_exact(T), s_exact(T));
    let err = l2(&spec, |_| true, |k| ((rho[k] - re[k]).powi(2) + (s.at(k) - se.at(k)).norm_squared()).sqrt());
    Ok(MmsRow { n, h, dt, steps, error: err })
}

/// `E_z = cos(ωt) sin(πx) cos(πy)` with the matching H, ω = π√2, on the
/// default contact layout. `dt = h/4`, run to `t = 0.5`.
fn maxwell_error(n: usize) -> Result<MmsRow> {
    const T: f64 = 0.5;
    let g = unit_square(n, None, BoundaryLayout::default())?;
    let spec = g.spec;
    let h = spec.hx();
    let (steps, dt) = steps_for(T, 0.25 * h);
    let w = PI * 2f64.sqrt();
    let exact = |t: f64| -> (VectorField, VectorField) {
        let cells = spec.len();
        let mut e = VectorField::zeros(cells);
        e.z = spec.sample(|x, y| (w * t).cos() * (PI * x).sin() * (PI * y).cos());
        let mut hf = VectorField::zeros(cells);
        let a = (w * t).sin() / w;
        hf.x = spec.sample(|x, y| a * PI * (PI * x).sin() * (PI * y).sin());
        hf.y = spec.sample(|x, y| a * PI * (PI * x).cos() * (PI * y).cos());
        (e, hf)
    };
    let (mut e, mut hf) = exact(0.0);
    let src = MaxwellSources::zeros(spec.len());
    for _ in 0..steps {
        (e, hf) = step_maxwell(&e, &hf, &src, dt, 0.5, &g)?;
    }
    let (ee, he) = exact(T);
    let err = l2(&spec, |_| true, |k| ((e.at(k) - ee.at(k)).norm_squared() + (hf.at(k) - he.at(k)).norm_squared()).sqrt());
    Ok(MmsRow { n, h, dt, steps, error: err })
}

/// `m* = (sin θ, 0, cos θ)`, `θ = 0.4 cos(4π(x−¼)) cos(4π(y−¼))` on
/// ω = [¼,¾]², held by the applied field `H = −Δm*`. Any motion comes from
/// the exchange discretization error. Run to `t = 2·10⁻³`.
fn exchange_error(n: usize) -> Result<MmsRow> {
    const T: f64 = 2e-3;
    const A: f64 = 0.4;
    let k4 = 4.0 * PI;
    let g = unit_square(n, Some(Rect::new(0.25, 0.75, 0.25, 0.75)), BoundaryLayout::default())?;
    let mut p = params(&g);
    p.alpha = 0.5;
    let spec = g.spec;
    let h = spec.hx();
    let cells = spec.len();
    let mut m = VectorField::zeros(cells);
    let mut hf = VectorField::zeros(cells);
    for k in g.omega_cells() {
        let (i, j) = spec.ij(k);
        let (x, y) = spec.center(i, j);
        let (cx, sx) = ((k4 * (x - 0.25)).cos(), (k4 * (x - 0.25)).sin());
        let (cy, sy) = ((k4 * (y - 0.25)).cos(), (k4 * (y - 0.25)).sin());
        let th = A * cx * cy;
        let (tx, ty) = (-A * k4 * sx * cy, -A * k4 * cx * sy);
        let lap_th = -2.0 * k4 * k4 * th;
        let grad2 = tx * tx + ty * ty;
        m.set(k, Vector3::new(th.sin(), 0.0, th.cos()));
        let lap_m = Vector3::new(lap_th * th.cos() - grad2 * th.sin(), 0.0, -lap_th * th.sin() - grad2 * th.cos());
        hf.set(k, -lap_m);
    }
    let exact = m.clone();
    let cfg = LlgConfig::default();
    let stiff = 8.0 / (h * h) + hf.max_norm();
    let (steps, dt) = steps_for(T, 0.9 * cfg.stability_cap / stiff);
    let zero = VectorField::zeros(cells);
    for _ in 0..steps {
        m = step_llg(&m, &hf, &zero, &p, &cfg, &g, dt)?;
    }
    let err = l2(&spec, |k| g.in_omega(k), |k| (m.at(k) - exact.at(k)).norm());
    Ok(MmsRow { n, h, dt, steps, error: err })
}

/// Runs `kind` on each grid of `ladder` (at least three, increasing).
pub fn run_mms_study(kind: MmsKind, ladder: &[usize]) -> Result<ConvergenceTable> {
    if ladder.len() < 3 {
        return Err(Error::config("ladder", "need at least three grids"));
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("ladder", "grid sizes must increase"));
    }
    let rows = ladder
        .iter()
        .map(|&n| match kind {
            MmsKind::Transport => transport_error(n),
            MmsKind::Maxwell => maxwell_error(n),
            MmsKind::LlgExchange => exchange_error(n),
        })
        .collect::<Result<Vec<_>>>()?;
    let orders = rows
        .windows(2)
        .map(|w| (w[0].error / w[1].error).log2() / (w[0].h / w[1].h).log2())
        .collect();
    let table = ConvergenceTable { kind, rows, orders };
    let finest = table.finest_order();
    if !(finest >= MIN_ORDER) {
        return Err(Error::Accuracy(format!(
            "{kind}: observed order {finest:.3} on the finest pair is below {MIN_ORDER}\n{table}"
        )));
    }
    Ok(table)
}
