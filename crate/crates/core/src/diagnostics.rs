//! Functionals tracked along a run: the quadratic functional S, the free
//! energy with its dissipation rate, the L^p ladder of the spin density and
//! the β threshold.

use crate::error::{Error, Result};
use crate::field::{max_abs, PlanarField, VectorField};
use crate::grid::{dx_padded, dy_padded, face_gradient_energy, grad2, pad, Closure, Ghost, Grid};
use crate::state::{closure_rho, closure_spin, gauss_residuals, interior_max_abs, PhysParams, SimState};

pub const LOG_FLOOR: f64 = 1e-12;

/// One row of the time series.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub s: f64,
    pub e_total: f64,
    pub e_spin: f64,
    pub e_em: f64,
    pub e_ex: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub max_abs_s: f64,
    pub max_m_defect: f64,
    pub res_e: f64,
    pub res_h: f64,
    pub picard_iters: usize,
    pub beta_ok: bool,
    /// NaN where `ρ > |s|` fails somewhere.
    pub diss_rate: f64,
    /// The log floor was active somewhere.
    pub clamped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSplit {
    pub rho_plus: Vec<f64>,
    pub rho_minus: Vec<f64>,
}

/// `ρ± = ρ ± |s|` and whether `ρ > |s|` holds everywhere.
pub fn spectral_split(rho: &[f64], s: &VectorField) -> (SpectralSplit, bool) {
    let norms: Vec<f64> = (0..rho.len()).map(|k| s.at(k).norm()).collect();
    let flag = rho.iter().zip(&norms).all(|(r, a)| r > a);
    (
        SpectralSplit {
            rho_plus: rho.iter().zip(&norms).map(|(r, a)| r + a).collect(),
            rho_minus: rho.iter().zip(&norms).map(|(r, a)| r - a).collect(),
        },
        flag,
    )
}

fn exchange_energy(m: &VectorField, grid: &Grid) -> f64 {
    (0..3).map(|c| face_gradient_energy(m.comp(c), &grid.spec, grid.omega())).sum()
}

/// `½Σ((ρ−ρ_D)² + |s|² + |E|² + |H|²) + ½Σ_ω|∇m|²`, times the cell area.
pub fn functional_s(state: &SimState, rho_d: &[f64], grid: &Grid) -> f64 {
    let dens: f64 = state
        .rho
        .iter()
        .zip(rho_d)
        .map(|(r, d)| (r - d) * (r - d))
        .sum();
    let bulk = dens + state.s.sum_sq() + state.e.sum_sq() + state.h.sum_sq();
    0.5 * bulk * grid.spec.cell_area() + exchange_energy(&state.m, grid)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreeEnergy {
    pub total: f64,
    pub spin: f64,
    pub em: f64,
    pub ex: f64,
    /// `None` when `ρ > |s|` fails somewhere.
    pub diss_rate: Option<f64>,
    pub clamped: bool,
}

/// `∇ log ρ±` from the padded densities (transport ghosts, floor applied
/// before the logarithm), and whether the floor was active.
pub fn log_gradients(
    state: &SimState,
    params: &PhysParams,
    grid: &Grid,
    floor: f64,
    sigma: f64,
) -> ([PlanarField; 2], bool) {
    let spec = &grid.spec;
    let pr = pad(&state.rho, spec, &closure_rho(grid, &params.rho_d, sigma));
    let cs = closure_spin(grid);
    let ps = [0, 1, 2].map(|c| pad(state.s.comp(c), spec, &cs));
    let norm = ps[0]
        .zip(&ps[1], |a, b| a * a + b * b)
        .zip(&ps[2], |a, b| (a + b * b).sqrt());
    let mut clamped = false;
    let grads = [1.0, -1.0].map(|sign| {
        let lp = pr.zip(&norm, |r, a| r + sign * a);
        let mut hit = false;
        for k in 0..spec.len() {
            let (i, j) = spec.ij(k);
            hit |= lp.at(i as isize, j as isize) < floor;
        }
        clamped |= hit;
        let logs = lp.map(|v| v.max(floor).ln());
        PlanarField {
            x: dx_padded(&logs, spec.hx()),
            y: dy_padded(&logs, spec.hy()),
        }
    });
    (grads, clamped)
}

/// Free energy split into spin, electromagnetic and exchange parts, plus the
/// dissipation rate.
pub fn free_energy(
    state: &SimState,
    params: &PhysParams,
    rho_d: &[f64],
    grid: &Grid,
    floor: f64,
    sigma: f64,
) -> Result<FreeEnergy> {
    if rho_d.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Data("rho_D must be positive for the free energy".into()));
    }
    let area = grid.spec.cell_area();
    let (split, flag) = spectral_split(&state.rho, &state.s);
    let mut clamped = false;
    let mut ent = |v: f64| {
        if v < floor {
            clamped = true;
        }
        let v = v.max(floor);
        v * (v.ln() - 1.0)
    };
    let mut spin = 0.0;
    for k in 0..state.rho.len() {
        spin += ent(split.rho_plus[k]) + ent(split.rho_minus[k])
            - 2.0 * rho_d[k].ln() * (state.rho[k] - rho_d[k]);
    }
    spin *= 0.5 * area;
    let log_d: Vec<f64> = rho_d.iter().map(|v| v.ln()).collect();
    let gd = grad2(&log_d, &grid.spec, &Closure::uniform(Ghost::Even));
    let mut em = 0.0;
    for k in 0..state.rho.len() {
        let ex = state.e.x[k] - gd.x[k];
        let ey = state.e.y[k] - gd.y[k];
        em += ex * ex + ey * ey + state.e.z[k] * state.e.z[k] + state.h.at(k).norm_squared();
    }
    em *= 0.5 * area;
    let ex = exchange_energy(&state.m, grid);
    let diss_rate = if flag {
        let (g, hit) = log_gradients(state, params, grid, floor, sigma);
        clamped |= hit;
        let mut acc = 0.0;
        for k in 0..state.rho.len() {
            for (gp, r) in g.iter().zip([split.rho_plus[k], split.rho_minus[k]]) {
                let dx = gp.x[k] - state.e.x[k];
                let dy = gp.y[k] - state.e.y[k];
                acc += r * (dx * dx + dy * dy);
            }
        }
        Some(0.5 * params.d * acc * area)
    } else {
        None
    };
    Ok(FreeEnergy {
        total: spin + em + ex,
        spin,
        em,
        ex,
        diss_rate,
        clamped,
    })
}

/// `[2, 4, 8, ..., 256]`
pub fn default_p_list() -> Vec<f64> {
    (1..=8).map(|k| 2f64.powi(k)).collect()
}

/// Normalized norms `(Σ|s|^p hxhy / |Ω|)^{1/p}` and the sup of `|s|`.
pub fn lp_ladder(s: &VectorField, p_list: &[f64]) -> (Vec<f64>, f64) {
    let n = s.len();
    let abs: Vec<f64> = (0..n).map(|k| s.at(k).norm()).collect();
    let sup = max_abs(&abs);
    if sup == 0.0 {
        return (vec![0.0; p_list.len()], 0.0);
    }
    // uniform cells: the area weights cancel against |Ω|
    let norms = p_list
        .iter()
        .map(|&p| {
            let mean = abs.iter().map(|a| (a / sup).powf(p)).sum::<f64>() / n as f64;
            sup * mean.powf(1.0 / p)
        })
        .collect();
    (norms, sup)
}

/// `β_max = sqrt(4α / (τ M_T (1 + α²)))` and whether `β ≤ β_max`.
pub fn beta_threshold(alpha: f64, tau: f64, m_t: f64, beta: f64) -> Result<(f64, bool)> {
    for (name, v) in [("alpha", alpha), ("tau", tau), ("M_T", m_t)] {
        if !(v > 0.0) {
            return Err(Error::Data(format!("{name} must be positive, got {v}")));
        }
    }
    let bmax = (4.0 * alpha / (tau * m_t * (1.0 + alpha * alpha))).sqrt();
    Ok((bmax, beta <= bmax))
}

/// Everything in a record that depends only on the state.
pub fn record(
    state: &SimState,
    params: &PhysParams,
    grid: &Grid,
    picard_iters: usize,
    m_t: f64,
    sigma: f64,
) -> Result<DiagnosticsRecord> {
    let rho_d = params.rho_d_field(grid);
    let fe = free_energy(state, params, &rho_d, grid, LOG_FLOOR, sigma)?;
    let (re, rh) = gauss_residuals(state, &params.doping, grid);
    let (_, beta_ok) = beta_threshold(params.alpha, params.tau, m_t.max(f64::MIN_POSITIVE), params.beta)?;
    Ok(DiagnosticsRecord {
        t: state.t,
        s: functional_s(state, &rho_d, grid),
        e_total: fe.total,
        e_spin: fe.spin,
        e_em: fe.em,
        e_ex: fe.ex,
        min_rho: state.rho.iter().cloned().fold(f64::INFINITY, f64::min),
        max_rho: state.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        max_abs_s: state.s.max_norm(),
        max_m_defect: state.max_m_defect_from(grid, sigma),
        res_e: interior_max_abs(&re, &grid.spec),
        res_h: interior_max_abs(&rh, &grid.spec),
        picard_iters,
        beta_ok,
        diss_rate: fe.diss_rate.unwrap_or(f64::NAN),
        clamped: fe.clamped,
    })
}
