//! State container, physical parameters, boundary closures of every field
//! family, and construction/validation of initial data.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::field::{all_finite, dot, max_abs, PlanarField, ScalarField, VectorField};
use crate::grid::{
    div2, grad2, Closure, EdgeKind, Ghost, Grid, GridSpec, Side,
};
use crate::linsolve::conjugate_gradient;

/// All unknowns at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub rho: ScalarField,
    pub s: VectorField,
    pub e: VectorField,
    pub h: VectorField,
    /// Zero outside ω.
    pub m: VectorField,
    pub t: f64,
}

impl SimState {
    pub fn zeros(n: usize) -> Self {
        Self {
            rho: vec![0.0; n],
            s: VectorField::zeros(n),
            e: VectorField::zeros(n),
            h: VectorField::zeros(n),
            m: VectorField::zeros(n),
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        all_finite(&self.rho)
            && self.s.all_finite()
            && self.e.all_finite()
            && self.h.all_finite()
            && self.m.all_finite()
            && self.t.is_finite()
    }

    /// `max | |m| - 1 |` over ω.
    pub fn max_m_defect(&self, grid: &Grid) -> f64 {
        self.max_m_defect_from(grid, 1.0)
    }

    /// Largest `||m| − len|` on ω.
    pub fn max_m_defect_from(&self, grid: &Grid, len: f64) -> f64 {
        grid.omega_cells()
            .map(|k| (self.m.at(k).norm() - len).abs())
            .fold(0.0, f64::max)
    }

    /// Every field multiplied by `a` (homotopy scaling of initial data).
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            rho: self.rho.iter().map(|v| a * v).collect(),
            s: self.s.scaled(a),
            e: self.e.scaled(a),
            h: self.h.scaled(a),
            m: self.m.scaled(a),
            t: self.t,
        }
    }
}

/// A value per side of the rectangle; only Dirichlet sides are read.
#[derive(Clone, Copy, Debug, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct SideValues {
    pub left: f64,
    pub right: f64,
    pub bottom: f64,
    pub top: f64,
}

impl SideValues {
    pub fn uniform(v: f64) -> Self {
        Self {
            left: v,
            right: v,
            bottom: v,
            top: v,
        }
    }

    pub fn get(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysParams {
    /// Gilbert damping
    pub alpha: f64,
    /// magnetization-spin coupling
    pub beta: f64,
    /// precession strength
    pub gamma: f64,
    /// diffusivity
    pub d: f64,
    /// spin-flip time
    pub tau: f64,
    /// truncation level; `f64::INFINITY` disables truncation
    pub m_trunc: f64,
    /// doping profile C(x)
    pub doping: ScalarField,
    /// boundary charge density on Γ_D
    pub rho_d: SideValues,
}

impl PhysParams {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("D", self.d),
            ("tau", self.tau),
            ("M_trunc", self.m_trunc),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::Data(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Data(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.doping.len() != grid.spec.len() || !all_finite(&self.doping) {
            return Err(Error::Data("doping must be finite on every cell".into()));
        }
        for side in Side::ALL {
            if grid.layout().kind(side) == EdgeKind::Dirichlet && !(self.rho_d.get(side) > 0.0) {
                return Err(Error::Data(format!(
                    "rho_D must be positive on the {side:?} contact"
                )));
            }
        }
        Ok(())
    }

    /// Constant interior extension of ρ_D: the mean over the Dirichlet sides
    /// (over all four sides when there is no contact).
    pub fn rho_d_field(&self, grid: &Grid) -> ScalarField {
        let sides: Vec<Side> = Side::ALL
            .into_iter()
            .filter(|&s| grid.layout().kind(s) == EdgeKind::Dirichlet)
            .collect();
        let sides = if sides.is_empty() { Side::ALL.to_vec() } else { sides };
        let v = sides.iter().map(|&s| self.rho_d.get(s)).sum::<f64>() / sides.len() as f64;
        vec![v; grid.spec.len()]
    }

    pub fn truncated(&self) -> bool {
        self.m_trunc.is_finite()
    }
}

/// Charge flux and the three rows of the spin flux, cell-centred.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxPair {
    pub je: PlanarField,
    pub js: [PlanarField; 3],
}

/// `[z]_M = min(M, max(0, z))`
#[inline]
pub fn truncate(z: f64, m: f64) -> f64 {
    m.min(z.max(0.0))
}

/// `[|s|]_M s/|s|`, extended by zero at the origin.
#[inline]
pub fn spin_direction(s: Vector3<f64>, m: f64) -> Vector3<f64> {
    let n = s.norm();
    if n == 0.0 {
        return Vector3::zeros();
    }
    if n <= m {
        s
    } else {
        s * (m / n)
    }
}

fn image(kind: EdgeKind, at_contact: Ghost, at_insulator: Ghost) -> Ghost {
    match kind {
        EdgeKind::Dirichlet => at_contact,
        EdgeKind::Neumann => at_insulator,
        EdgeKind::Periodic => Ghost::Periodic,
    }
}

fn per_side(f: impl Fn(Side) -> Ghost) -> Closure {
    Closure(Side::ALL.map(f))
}

/// Component `c` of a field with the given (contact, insulator) rules for the
/// normal and tangential parts.
fn vector_closure(
    grid_layout: &crate::grid::BoundaryLayout,
    normal: (Ghost, Ghost),
    tangential: (Ghost, Ghost),
) -> [Closure; 3] {
    [0usize, 1, 2].map(|c| {
        per_side(|side| {
            let (d, n) = if side.normal_axis() == c {
                normal
            } else {
                tangential
            };
            image(grid_layout.kind(side), d, n)
        })
    })
}

/// Electric field: `E × ν = 0` on Γ_D, `E · ν = 0` on Γ_N.
pub fn closure_e(grid: &Grid) -> [Closure; 3] {
    vector_closure(
        grid.layout(),
        (Ghost::Even, Ghost::Odd),
        (Ghost::Odd, Ghost::Even),
    )
}

/// Magnetic field: `H × ν = 0` on Γ_N; normal part odd at the contacts.
pub fn closure_h(grid: &Grid) -> [Closure; 3] {
    vector_closure(
        grid.layout(),
        (Ghost::Odd, Ghost::Even),
        (Ghost::Even, Ghost::Odd),
    )
}

/// Charge and spin fluxes: zero normal flux on Γ_N. Same rules as `E`, so
/// that `DIV2` of the flux and of `E` coincide.
pub fn closure_flux(grid: &Grid) -> [Closure; 2] {
    let c = closure_e(grid);
    [c[0], c[1]]
}

/// Charge density: `ρ = scale·ρ_D` on Γ_D, reflecting on Γ_N.
pub fn closure_rho(grid: &Grid, rho_d: &SideValues, scale: f64) -> Closure {
    per_side(|side| {
        image(
            grid.layout().kind(side),
            Ghost::OddAbout(scale * rho_d.get(side)),
            Ghost::Even,
        )
    })
}

/// Spin density component: `s = 0` on Γ_D, reflecting on Γ_N.
pub fn closure_spin(grid: &Grid) -> Closure {
    per_side(|side| image(grid.layout().kind(side), Ghost::Odd, Ghost::Even))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    /// `‖DIV2 E − (ρ − C)‖∞` over interior cells
    pub gauss_e: f64,
    /// `‖DIV2 (H + m)‖∞` over interior cells
    pub gauss_h: f64,
    /// `max |E · ν|` over Γ_N boundary cells
    pub normal_e: f64,
    /// `max | |m| − 1 |` over ω
    pub m_defect: f64,
    /// `max |m|` outside ω
    pub m_outside: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Residual fields of both Gauss laws (full grid; callers restrict).
pub fn gauss_residuals(state: &SimState, doping: &[f64], grid: &Grid) -> (ScalarField, ScalarField) {
    let ce = closure_e(grid);
    let ch = closure_h(grid);
    let de = div2(&state.e.x, &state.e.y, &grid.spec, &ce[0], &ce[1]);
    let re = de
        .iter()
        .zip(&state.rho)
        .zip(doping)
        .map(|((d, r), c)| d - (r - c))
        .collect();
    let hx: Vec<f64> = state.h.x.iter().zip(&state.m.x).map(|(a, b)| a + b).collect();
    let hy: Vec<f64> = state.h.y.iter().zip(&state.m.y).map(|(a, b)| a + b).collect();
    let rh = div2(&hx, &hy, &grid.spec, &ch[0], &ch[1]);
    (re, rh)
}

/// Max of `|u|` over interior cells (full 3x3 stencil inside the grid).
pub fn interior_max_abs(u: &[f64], spec: &GridSpec) -> f64 {
    (0..spec.len())
        .filter(|&k| {
            let (i, j) = spec.ij(k);
            spec.is_interior(i, j)
        })
        .fold(0.0, |a, k| a.max(u[k].abs()))
}

pub fn validate_initial(
    state: &SimState,
    params: &PhysParams,
    grid: &Grid,
    tol: f64,
) -> Result<ValidationReport> {
    validate_initial_scaled(state, params, grid, tol, 1.0)
}

/// [`validate_initial`] for data scaled by the homotopy parameter: `|m|`
/// must equal `sigma` on ω.
pub fn validate_initial_scaled(
    state: &SimState,
    params: &PhysParams,
    grid: &Grid,
    tol: f64,
    sigma: f64,
) -> Result<ValidationReport> {
    if !state.all_finite() || !all_finite(&params.doping) {
        return Err(Error::Data("initial state has non-finite entries".into()));
    }
    let (re, rh) = gauss_residuals(state, &params.doping, grid);
    let gauss_e = interior_max_abs(&re, &grid.spec);
    let gauss_h = interior_max_abs(&rh, &grid.spec);
    let normal_e = grid
        .tags
        .neumann_edges()
        .map(|e| (state.e.x[e.cell] * e.normal[0] + state.e.y[e.cell] * e.normal[1]).abs())
        .fold(0.0, f64::max);
    let m_defect = state.max_m_defect_from(grid, sigma);
    let m_outside = (0..grid.spec.len())
        .filter(|&k| !grid.in_omega(k))
        .map(|k| state.m.at(k).norm())
        .fold(0.0, f64::max);
    let pass = [gauss_e, gauss_h, normal_e, m_defect, m_outside]
        .iter()
        .all(|&r| r <= tol);
    Ok(ValidationReport {
        gauss_e,
        gauss_h,
        normal_e,
        m_defect,
        m_outside,
        tol,
        pass,
    })
}

const POISSON_MAX_ITER: usize = 20_000;

/// Grid functions annihilated by `GRAD2` under closure `c`. Candidates are
/// the products of constant and alternating patterns in each direction.
fn gradient_kernel(spec: &GridSpec, c: &Closure) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for (ax, ay) in [(false, false), (true, false), (false, true), (true, true)] {
        let v: Vec<f64> = (0..spec.len())
            .map(|k| {
                let (i, j) = spec.ij(k);
                let sx = if ax && i % 2 == 1 { -1.0 } else { 1.0 };
                let sy = if ay && j % 2 == 1 { -1.0 } else { 1.0 };
                sx * sy
            })
            .collect();
        let g = grad2(&v, spec, c);
        if max_abs(&g.x).max(max_abs(&g.y)) < 1e-9 / spec.hx().min(spec.hy()) {
            out.push(v);
        }
    }
    out
}

/// Removes the components of `b` along `kernel` by adding a multiple of each
/// kernel vector restricted to the boundary ring, so interior entries of `b`
/// are untouched.
fn make_compatible(b: &mut [f64], kernel: &[Vec<f64>], spec: &GridSpec) {
    if kernel.is_empty() {
        return;
    }
    let ring: Vec<Vec<f64>> = kernel
        .iter()
        .map(|v| {
            (0..spec.len())
                .map(|k| {
                    let (i, j) = spec.ij(k);
                    if spec.is_interior(i, j) { 0.0 } else { v[k] }
                })
                .collect()
        })
        .collect();
    let m = kernel.len();
    let gram = nalgebra::DMatrix::from_fn(m, m, |a, c| dot(&kernel[a], &ring[c]));
    let rhs = nalgebra::DVector::from_fn(m, |a, _| -dot(&kernel[a], b));
    if let Some(coef) = gram.lu().solve(&rhs) {
        for (c, w) in ring.iter().enumerate() {
            for k in 0..b.len() {
                b[k] += coef[c] * w[k];
            }
        }
    }
}

/// `E⁰ = GRAD2 φ` with `DIV2 GRAD2 φ = ρ⁰ − C`, `φ = 0` on Γ_D and
/// `∇φ · ν = 0` on Γ_N. The wide stencil leaves alternating modes in the
/// kernel; their share of the source is moved onto the boundary ring, so the
/// Gauss law holds at every interior cell.
pub fn init_electric_field(
    rho0: &[f64],
    doping: &[f64],
    grid: &Grid,
    tol: f64,
) -> Result<VectorField> {
    if !all_finite(rho0) || !all_finite(doping) {
        return Err(Error::Data("non-finite charge or doping".into()));
    }
    let spec = grid.spec;
    let n = spec.len();
    let ce = closure_e(grid);
    let phi_c = closure_spin(grid);
    let mut b: Vec<f64> = rho0.iter().zip(doping).map(|(r, c)| c - r).collect();
    if max_abs(&b) == 0.0 {
        return Ok(VectorField::zeros(n));
    }
    make_compatible(&mut b, &gradient_kernel(&spec, &phi_c), &spec);
    // -DIV2 GRAD2 is symmetric positive semi-definite for this pairing
    let apply = |phi: &[f64]| -> Vec<f64> {
        let g = grad2(phi, &spec, &phi_c);
        div2(&g.x, &g.y, &spec, &ce[0], &ce[1])
            .into_iter()
            .map(|v| -v)
            .collect()
    };
    let bnorm = dot(&b, &b).sqrt().max(1.0);
    let mut phi = vec![0.0; n];
    conjugate_gradient(apply, &b, &mut phi, tol / bnorm, POISSON_MAX_ITER).map_err(|e| match e {
        Error::Convergence { iterations, residual, .. } => Error::Convergence {
            what: "initial electric potential".into(),
            iterations,
            residual,
        },
        e => e,
    })?;
    let g = grad2(&phi, &spec, &phi_c);
    Ok(VectorField {
        x: g.x,
        y: g.y,
        z: vec![0.0; n],
    })
}

/// Planar field `H = GRAD2 ψ` with `DIV2 (H + m) = 0` (field closures of `H`),
/// used to make magnetized initial data satisfy the magnetic Gauss law.
pub fn init_magnetic_field(m: &VectorField, grid: &Grid, tol: f64) -> Result<VectorField> {
    let spec = grid.spec;
    let layout = *grid.layout();
    let ch = closure_h(grid);
    let src = div2(&m.x, &m.y, &spec, &ch[0], &ch[1]);
    let n = spec.len();
    if max_abs(&src) == 0.0 {
        return Ok(VectorField::zeros(n));
    }
    // ψ is even where H·ν is odd and vice versa, which makes -DIV2 GRAD2 symmetric.
    let psi_c = per_side(|s| image(layout.kind(s), Ghost::Even, Ghost::Odd));
    let apply = |psi: &[f64]| -> Vec<f64> {
        let g = grad2(psi, &spec, &psi_c);
        div2(&g.x, &g.y, &spec, &ch[0], &ch[1])
            .into_iter()
            .map(|v| -v)
            .collect()
    };
    let bnorm = src.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let mut psi = vec![0.0; n];
    conjugate_gradient(apply, &src, &mut psi, tol / bnorm, POISSON_MAX_ITER)?;
    let g = grad2(&psi, &spec, &psi_c);
    Ok(VectorField {
        x: g.x,
        y: g.y,
        z: vec![0.0; n],
    })
}
