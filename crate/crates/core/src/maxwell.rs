//! Explicit integrator for the Ampère and Faraday laws
//!
//! ```text
//! ∂t E =  CURL3 H + je_term
//! ∂t H = -CURL3 E + dm_dt
//! ```
//!
//! The curl closures come from [`closure_e`] / [`closure_h`]; with them the
//! semi-discrete curl pair is skew-adjoint (source-free energy is conserved
//! up to the time integrator) and `DIV2 CURL3` vanishes, so both Gauss laws
//! are carried exactly by the update.

use crate::error::{Error, Result};
use crate::field::{max_abs, VectorField};
use crate::grid::{curl3, Grid};
use crate::state::{closure_e, closure_h, gauss_residuals, interior_max_abs, SimState};

/// Right-hand sides of the Maxwell system.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxwellSources {
    /// Ampère source, `D(∇ρ − [ρ]_M E)` with zero third component.
    pub je_term: VectorField,
    /// Faraday source, `−∂t m` (zero outside ω).
    pub dm_dt: VectorField,
}

impl MaxwellSources {
    pub fn zeros(n: usize) -> Self {
        Self {
            je_term: VectorField::zeros(n),
            dm_dt: VectorField::zeros(n),
        }
    }
}

/// Largest admissible `dt / min(hx, hy)`.
pub const MAX_CFL: f64 = 0.5;

fn rhs(
    field: &VectorField,
    src: &VectorField,
    grid: &Grid,
    electric: bool,
) -> VectorField {
    // E is driven by curl H, H by -curl E.
    if electric {
        let c = curl3(field, &grid.spec, &closure_h(grid));
        c.axpy(1.0, src)
    } else {
        let c = curl3(field, &grid.spec, &closure_e(grid));
        src.axpy(-1.0, &c)
    }
}

/// One explicit-midpoint step. `cfl` must not exceed [`MAX_CFL`].
pub fn step_maxwell(
    e: &VectorField,
    h: &VectorField,
    src: &MaxwellSources,
    dt: f64,
    cfl: f64,
    grid: &Grid,
) -> Result<(VectorField, VectorField)> {
    let hmin = grid.spec.hx().min(grid.spec.hy());
    let cfl = cfl.min(MAX_CFL);
    if !(dt > 0.0) || dt > cfl * hmin * (1.0 + 1e-12) {
        return Err(Error::Stability(format!(
            "Maxwell step dt = {dt} exceeds {cfl} * h = {}",
            cfl * hmin
        )));
    }
    if !src.je_term.all_finite() || !src.dm_dt.all_finite() {
        return Err(Error::Data("non-finite Maxwell source".into()));
    }
    let e_half = e.axpy(0.5 * dt, &rhs(h, &src.je_term, grid, true));
    let h_half = h.axpy(0.5 * dt, &rhs(e, &src.dm_dt, grid, false));
    let e_new = e.axpy(dt, &rhs(&h_half, &src.je_term, grid, true));
    let h_new = h.axpy(dt, &rhs(&e_half, &src.dm_dt, grid, false));
    Ok((e_new, h_new))
}

/// `½ Σ (|E|² + |H|²) hx hy`.
pub fn em_energy(e: &VectorField, h: &VectorField, grid: &Grid) -> f64 {
    0.5 * (e.sum_sq() + h.sum_sq()) * grid.spec.cell_area()
}

/// Electromagnetic energy and the interior Gauss-law residuals
/// `‖DIV2 E − (ρ − C)‖∞` and `‖DIV2 (H + m)‖∞`.
pub fn em_energy_and_residuals(
    e: &VectorField,
    h: &VectorField,
    m: &VectorField,
    rho: &[f64],
    doping: &[f64],
    grid: &Grid,
) -> (f64, f64, f64) {
    let st = SimState {
        rho: rho.to_vec(),
        s: VectorField::zeros(0),
        e: e.clone(),
        h: h.clone(),
        m: m.clone(),
        t: 0.0,
    };
    let (re, rh) = gauss_residuals(&st, doping, grid);
    (
        em_energy(e, h, grid),
        interior_max_abs(&re, &grid.spec),
        interior_max_abs(&rh, &grid.spec),
    )
}

/// Largest entry of a source, for diagnostics.
pub fn source_magnitude(src: &MaxwellSources) -> f64 {
    [&src.je_term, &src.dm_dt]
        .iter()
        .flat_map(|f| [max_abs(&f.x), max_abs(&f.y), max_abs(&f.z)])
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, BoundaryLayout, GridSpec};
    use nalgebra::Vector3;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        build_grid(
            GridSpec::new(n, n, 1.0, 1.0).unwrap(),
            None,
            None,
            BoundaryLayout::default(),
        )
        .unwrap()
    }

    #[test]
    fn zero_dynamics() {
        let g = grid(8);
        let z = VectorField::zeros(64);
        let (e, h) = step_maxwell(&z, &z, &MaxwellSources::zeros(64), 0.01, 0.5, &g).unwrap();
        assert_eq!(e, z);
        assert_eq!(h, z);
    }

    #[test]
    fn constant_current_integrates_exactly() {
        let g = grid(8);
        let z = VectorField::zeros(64);
        let mut src = MaxwellSources::zeros(64);
        src.je_term = VectorField::uniform(64, Vector3::x());
        let dt = 0.05;
        let (e, h) = step_maxwell(&z, &z, &src, dt, 0.5, &g).unwrap();
        // E1 is even at the contacts, so curl H stays zero: H only sees curl E = 0
        for k in 0..64 {
            assert!((e.at(k) - Vector3::new(dt, 0.0, 0.0)).norm() < 1e-15);
        }
        assert!(h.max_norm() < 1e-15);
    }

    #[test]
    fn cfl_violation() {
        let g = grid(8);
        let z = VectorField::zeros(64);
        let r = step_maxwell(&z, &z, &MaxwellSources::zeros(64), 0.1, 0.5, &g);
        assert!(matches!(r, Err(Error::Stability(_))));
        let mut src = MaxwellSources::zeros(64);
        src.dm_dt.x[5] = f64::NAN;
        let r = step_maxwell(&z, &z, &src, 0.01, 0.5, &g);
        assert!(matches!(r, Err(Error::Data(_))));
    }

    #[test]
    fn standing_wave_energy_drift() {
        let g = grid(64);
        let n = g.spec.len();
        let mut e = VectorField::zeros(n);
        e.z = g.spec.sample(|x, y| (PI * x).sin() * (PI * y).sin());
        let mut h = VectorField::zeros(n);
        let dt = 0.4 * g.spec.hx();
        let src = MaxwellSources::zeros(n);
        let w0 = em_energy(&e, &h, &g);
        for _ in 0..100 {
            (e, h) = step_maxwell(&e, &h, &src, dt, 0.5, &g).unwrap();
        }
        let drift = (em_energy(&e, &h, &g) - w0).abs() / w0;
        assert!(drift <= 1e-3, "relative drift {drift}");
    }

    #[test]
    fn energy_of_unit_field() {
        let g = grid(10);
        let e = VectorField::uniform(100, Vector3::x());
        let h = VectorField::zeros(100);
        assert!((em_energy(&e, &h, &g) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn affine_field_gauss_residual() {
        let g = grid(16);
        let n = g.spec.len();
        let e = VectorField {
            x: g.spec.sample(|x, _| x),
            y: g.spec.sample(|_, y| y),
            z: vec![0.0; n],
        };
        let z = VectorField::zeros(n);
        let (_, re, rh) = em_energy_and_residuals(&e, &z, &z, &vec![2.0; n], &vec![0.0; n], &g);
        assert!(re <= 1e-13, "{re}");
        assert_eq!(rh, 0.0);
    }
}
