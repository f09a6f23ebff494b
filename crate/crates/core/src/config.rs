//! Run configuration: a JSON5 document with the blocks `grid`, `domains`,
//! `physics`, `bc`, `time`, `coupling`, `reg`, `solver`, `initial`,
//! `output` and `seed`. Everything except `grid` has defaults.

use nalgebra::Vector3;
use serde::Deserialize;

use crate::coupling::{CouplingConfig, Model};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::{build_grid, BoundaryLayout, Grid, GridSpec, Rect};
use crate::llg::{LlgConfig, LlgScheme};
use crate::maxwell::MAX_CFL;
use crate::regularization::RegParams;
use crate::state::{init_electric_field, init_magnetic_field, PhysParams, SideValues, SimState};
use crate::transport::TransportConfig;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub nx: usize,
    pub ny: usize,
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ly")]
    pub ly: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainsBlock {
    pub omega1: Option<Rect>,
    pub omega2: Option<Rect>,
}

/// A scalar profile over Ω: a plain number or a named shape.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Constant(f64),
    Shaped(Shape),
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// `base + amplitude·exp(−((x − center)/width)²)`
    XBump {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `base + amplitude·exp(−|x − (x0, y0)|²/width²)`
    Gaussian {
        base: f64,
        amplitude: f64,
        x0: f64,
        y0: f64,
        width: f64,
    },
    /// Linear in x from `left` at x = 0 to `right` at x = Lx.
    XLinear { left: f64, right: f64 },
}

impl Profile {
    pub fn eval(&self, x: f64, y: f64, lx: f64) -> f64 {
        match *self {
            Profile::Constant(v) => v,
            Profile::Shaped(Shape::XBump {
                base,
                amplitude,
                center,
                width,
            }) => base + amplitude * (-((x - center) / width).powi(2)).exp(),
            Profile::Shaped(Shape::Gaussian {
                base,
                amplitude,
                x0,
                y0,
                width,
            }) => {
                let r2 = (x - x0).powi(2) + (y - y0).powi(2);
                base + amplitude * (-r2 / (width * width)).exp()
            }
            Profile::Shaped(Shape::XLinear { left, right }) => left + (right - left) * x / lx,
        }
    }

    pub fn sample(&self, spec: &GridSpec) -> Vec<f64> {
        spec.sample(|x, y| self.eval(x, y, spec.lx))
    }
}

/// Contact density: one number for every side or one per side.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SideSpec {
    Uniform(f64),
    PerSide(SideValues),
}

impl SideSpec {
    pub fn values(&self) -> SideValues {
        match *self {
            SideSpec::Uniform(v) => SideValues::uniform(v),
            SideSpec::PerSide(s) => s,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn beta_default() -> f64 {
    0.1
}
fn one_profile() -> Profile {
    Profile::Constant(1.0)
}
fn one_side() -> SideSpec {
    SideSpec::Uniform(1.0)
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsBlock {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "beta_default")]
    pub beta: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(rename = "D", default = "one")]
    pub d: f64,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(rename = "C", default = "one_profile")]
    pub doping: Profile,
    #[serde(rename = "rho_D", default = "one_side")]
    pub rho_d: SideSpec,
}

impl Default for PhysicsBlock {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.1,
            gamma: 1.0,
            d: 1.0,
            tau: 1.0,
            doping: one_profile(),
            rho_d: one_side(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeBlock {
    pub dt: Option<f64>,
    /// `dt = cfl·min(hx, hy)` when `dt` is absent.
    pub cfl: Option<f64>,
    pub t_end: f64,
    pub output_every: usize,
}

impl Default for TimeBlock {
    fn default() -> Self {
        Self {
            dt: None,
            cfl: None,
            t_end: 1.0,
            output_every: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingBlock {
    pub sigma: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub reverse_order: bool,
}

impl Default for CouplingBlock {
    fn default() -> Self {
        let c = CouplingConfig::default();
        Self {
            sigma: c.sigma,
            picard_tol: c.picard_tol,
            picard_max: c.picard_max,
            reverse_order: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegBlock {
    pub eps_x: f64,
    pub eps_t: f64,
    #[serde(rename = "M_trunc")]
    pub m_trunc: f64,
    /// Exchange regularization ε of the magnetization equation.
    pub eps_exchange: f64,
}

impl Default for RegBlock {
    fn default() -> Self {
        Self {
            eps_x: 0.0,
            eps_t: 0.0,
            m_trunc: f64::INFINITY,
            eps_exchange: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub llg_scheme: LlgScheme,
    pub llg_stability_cap: f64,
    pub project_each_step: bool,
    pub diffusion_implicit: bool,
    pub exact_reaction: bool,
    pub positivity_clip: bool,
    pub linsolve_tol: f64,
    pub linsolve_max_iter: usize,
    pub poisson_tol: f64,
    pub maxwell_cfl: f64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let t = TransportConfig::default();
        let l = LlgConfig::default();
        Self {
            llg_scheme: l.scheme,
            llg_stability_cap: l.stability_cap,
            project_each_step: l.project_each_step,
            diffusion_implicit: t.diffusion_implicit,
            exact_reaction: t.exact_reaction,
            positivity_clip: t.positivity_clip,
            linsolve_tol: t.linsolve_tol,
            linsolve_max_iter: t.linsolve_max_iter,
            poisson_tol: 1e-10,
            maxwell_cfl: MAX_CFL,
        }
    }
}

/// Initial spin density: a fixed direction times a scalar profile.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinInit {
    pub direction: [f64; 3],
    pub magnitude: Profile,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialBlock {
    /// Defaults to the doping profile (neutral start, E⁰ = 0).
    pub rho: Option<Profile>,
    pub s: Option<SpinInit>,
    /// Magnetization direction on ω1 and ω2 (normalized).
    pub m1: [f64; 3],
    pub m2: [f64; 3],
    /// Uniform field added to the stray field of m⁰.
    pub applied_h: [f64; 3],
}

impl Default for InitialBlock {
    fn default() -> Self {
        Self {
            rho: None,
            s: None,
            m1: [0.0, 0.0, 1.0],
            m2: [0.0, 0.0, -1.0],
            applied_h: [0.0; 3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: String,
    pub snapshots: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            snapshots: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridBlock,
    #[serde(default)]
    pub domains: DomainsBlock,
    #[serde(default)]
    pub physics: PhysicsBlock,
    #[serde(default)]
    pub bc: BoundaryLayout,
    #[serde(default)]
    pub time: TimeBlock,
    #[serde(default)]
    pub coupling: CouplingBlock,
    #[serde(default)]
    pub reg: RegBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub initial: InitialBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub seed: u64,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = json5::from_str(text).map_err(|e| {
        let (line, column) = e.position().map_or((0, 0), |p| (p.line + 1, p.column + 1));
        Error::Parse {
            line,
            column,
            message: e.to_string(),
        }
    })?;
    cfg.check()?;
    Ok(cfg)
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

fn nonneg(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite and >= 0, got {v}")))
    }
}

impl RunConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        let g = &self.grid;
        if g.nx < 3 {
            return Err(Error::config("grid.nx", "need at least 3 cells"));
        }
        if g.ny < 3 {
            return Err(Error::config("grid.ny", "need at least 3 cells"));
        }
        positive("grid.Lx", g.lx)?;
        positive("grid.Ly", g.ly)?;
        GridSpec::new(g.nx, g.ny, g.lx, g.ly).map_err(|e| Error::config("grid", e.to_string()))
    }

    /// Time step after resolving `cfl`.
    pub fn dt(&self) -> Result<f64> {
        let spec = self.spec()?;
        let h = spec.hx().min(spec.hy());
        match (self.time.dt, self.time.cfl) {
            (Some(dt), _) => Ok(dt),
            (None, Some(c)) => Ok(c * h),
            (None, None) => Err(Error::config("time.dt", "give either dt or cfl")),
        }
    }

    /// Field-level constraint checks.
    pub fn check(&self) -> Result<()> {
        let spec = self.spec()?;
        for (name, r) in [("domains.omega1", self.domains.omega1), ("domains.omega2", self.domains.omega2)] {
            if let Some(r) = r {
                let inside = r.x0 > 0.0 && r.x1 < spec.lx && r.y0 > 0.0 && r.y1 < spec.ly;
                if !(r.x0 < r.x1 && r.y0 < r.y1) || !inside {
                    return Err(Error::config(name, "rectangle must lie strictly inside the domain"));
                }
            }
        }
        let p = &self.physics;
        positive("physics.alpha", p.alpha)?;
        nonneg("physics.beta", p.beta)?;
        positive("physics.gamma", p.gamma)?;
        positive("physics.D", p.d)?;
        positive("physics.tau", p.tau)?;
        let rd = p.rho_d.values();
        for v in [rd.left, rd.right, rd.bottom, rd.top] {
            positive("physics.rho_D", v)?;
        }
        let c = &self.coupling;
        if !(0.0..=1.0).contains(&c.sigma) {
            return Err(Error::config("coupling.sigma", "must lie in [0, 1]"));
        }
        positive("coupling.picard_tol", c.picard_tol)?;
        if c.picard_max == 0 {
            return Err(Error::config("coupling.picard_max", "must be at least 1"));
        }
        nonneg("reg.eps_x", self.reg.eps_x)?;
        nonneg("reg.eps_t", self.reg.eps_t)?;
        nonneg("reg.eps_exchange", self.reg.eps_exchange)?;
        positive("reg.M_trunc", self.reg.m_trunc)?;
        let s = &self.solver;
        positive("solver.linsolve_tol", s.linsolve_tol)?;
        positive("solver.poisson_tol", s.poisson_tol)?;
        positive("solver.llg_stability_cap", s.llg_stability_cap)?;
        if !(s.maxwell_cfl > 0.0 && s.maxwell_cfl <= MAX_CFL) {
            return Err(Error::config("solver.maxwell_cfl", format!("must lie in (0, {MAX_CFL}]")));
        }
        nonneg("time.t_end", self.time.t_end)?;
        if self.time.output_every == 0 {
            return Err(Error::config("time.output_every", "must be at least 1"));
        }
        if let Some(c) = self.time.cfl {
            positive("time.cfl", c)?;
        }
        let dt = self.dt()?;
        positive("time.dt", dt)?;
        let h = spec.hx().min(spec.hy());
        if dt > s.maxwell_cfl * h * (1.0 + 1e-12) {
            return Err(Error::config(
                "time.dt",
                format!("exceeds the Maxwell limit {} * h = {}", s.maxwell_cfl, s.maxwell_cfl * h),
            ));
        }
        let stiff = (1.0 + self.reg.eps_exchange)
            * (4.0 / spec.hx().powi(2) + 4.0 / spec.hy().powi(2));
        let has_omega = self.domains.omega1.is_some() || self.domains.omega2.is_some();
        if has_omega && dt * stiff > s.llg_stability_cap {
            return Err(Error::config(
                "time.dt",
                format!("exchange term needs dt <= {}", s.llg_stability_cap / stiff),
            ));
        }
        for (name, v) in [("initial.m1", self.initial.m1), ("initial.m2", self.initial.m2)] {
            if Vector3::from(v).norm() == 0.0 {
                return Err(Error::config(name, "direction must be nonzero"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        build_grid(self.spec()?, self.domains.omega1, self.domains.omega2, self.bc).map_err(|e| {
            let field = match &e {
                Error::Geometry(m) if m.contains("ω1") || m.contains("omega1") => "domains.omega1",
                Error::Geometry(m) if m.contains("ω2") || m.contains("omega2") => "domains.omega2",
                Error::Geometry(m) if m.to_lowercase().contains("periodic") || m.contains("Neumann") => "bc",
                _ => "domains",
            };
            Error::config(field, e.to_string())
        })
    }

    /// Model and initial state. The state is scaled by σ and, with it, the
    /// doping, so that the Gauss laws keep holding.
    pub fn build(&self) -> Result<(Model, SimState)> {
        self.check()?;
        let grid = self.grid()?;
        let spec = grid.spec;
        let sigma = self.coupling.sigma;
        let doping = self.physics.doping.sample(&spec);
        let params = PhysParams {
            alpha: self.physics.alpha,
            beta: self.physics.beta,
            gamma: self.physics.gamma,
            d: self.physics.d,
            tau: self.physics.tau,
            m_trunc: self.reg.m_trunc,
            doping: doping.clone(),
            rho_d: self.physics.rho_d.values(),
        };
        params.validate(&grid).map_err(|e| Error::config("physics", e.to_string()))?;
        let n = spec.len();
        let mut st = SimState::zeros(n);
        st.rho = match &self.initial.rho {
            Some(p) => p.sample(&spec),
            None => doping,
        };
        if let Some(si) = &self.initial.s {
            let dir = Vector3::from(si.direction);
            let mag = si.magnitude.sample(&spec);
            st.s = VectorField::from_fn(n, |k| dir * mag[k]);
        }
        let (d1, d2) = (Vector3::from(self.initial.m1).normalize(), Vector3::from(self.initial.m2).normalize());
        for k in grid.omega_cells() {
            st.m.set(k, if grid.mask.in_omega1[k] { d1 } else { d2 });
        }
        let tol = self.solver.poisson_tol;
        st.e = init_electric_field(&st.rho, &params.doping, &grid, tol)?;
        let applied = Vector3::from(self.initial.applied_h);
        st.h = init_magnetic_field(&st.m, &grid, tol)?.axpy(1.0, &VectorField::uniform(n, applied));
        let mut params = params;
        if sigma != 1.0 {
            st = st.scaled(sigma);
            params.doping.iter_mut().for_each(|c| *c *= sigma);
        }
        let model = Model {
            grid,
            params,
            coupling: CouplingConfig {
                sigma,
                picard_tol: self.coupling.picard_tol,
                picard_max: self.coupling.picard_max,
                dt: self.dt()?,
                t_end: self.time.t_end,
                output_every: self.time.output_every,
                cfl: self.solver.maxwell_cfl,
                reverse_order: self.coupling.reverse_order,
            },
            transport: TransportConfig {
                diffusion_implicit: self.solver.diffusion_implicit,
                linsolve_tol: self.solver.linsolve_tol,
                linsolve_max_iter: self.solver.linsolve_max_iter,
                positivity_clip: self.solver.positivity_clip,
                exact_reaction: self.solver.exact_reaction,
            },
            llg: LlgConfig {
                eps_exchange_reg: self.reg.eps_exchange,
                scheme: self.solver.llg_scheme,
                project_each_step: self.solver.project_each_step,
                stability_cap: self.solver.llg_stability_cap,
            },
            reg: RegParams {
                eps_x: self.reg.eps_x,
                eps_t: self.reg.eps_t,
            },
        };
        Ok((model, st))
    }
}
