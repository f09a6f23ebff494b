//! Per-step fixed-point map (Maxwell, then LLG, then transport) iterated to
//! self-consistency, and the outer time loop.

use std::time::Instant;

use crate::diagnostics::{record, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::field::{sum_sq, VectorField};
use crate::grid::Grid;
use crate::llg::{step_llg_scaled, LlgConfig};
use crate::maxwell::{step_maxwell, MaxwellSources};
use crate::regularization::{smooth_space, RegParams, TimeSmoother};
use crate::state::{validate_initial_scaled, FluxPair, PhysParams, SimState};
use crate::transport::{compute_fluxes_scaled, step_transport_scaled, TransportConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingConfig {
    pub sigma: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub dt: f64,
    pub t_end: f64,
    pub output_every: usize,
    /// Maxwell CFL number, `dt ≤ cfl·min(h)`.
    pub cfl: f64,
    /// Transport before Maxwell inside each sweep (sensitivity studies only).
    pub reverse_order: bool,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            picard_tol: 1e-8,
            picard_max: 50,
            dt: 1e-3,
            t_end: 1.0,
            output_every: 1,
            cfl: 0.5,
            reverse_order: false,
        }
    }
}

/// Everything a step needs besides the state.
#[derive(Clone, Debug)]
pub struct Model {
    pub grid: Grid,
    pub params: PhysParams,
    pub coupling: CouplingConfig,
    pub transport: TransportConfig,
    pub llg: LlgConfig,
    pub reg: RegParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub picard_iters: usize,
    pub final_residual: f64,
    pub wallclock: f64,
    /// Residual after each sweep.
    pub residuals: Vec<f64>,
}

/// Fields of one Picard iterate.
struct Iterate {
    rho: Vec<f64>,
    s: VectorField,
    m: VectorField,
    e: VectorField,
    h: VectorField,
    je: FluxPair,
}

const NORM_FLOOR: f64 = 1e-30;

fn rel_change(new: &[f64], old: &[f64]) -> (f64, f64) {
    let d: f64 = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum();
    (d, sum_sq(new))
}

fn vec_change(new: &VectorField, old: &VectorField) -> f64 {
    let mut d = 0.0;
    let mut n = 0.0;
    for c in 0..3 {
        let (a, b) = rel_change(new.comp(c), old.comp(c));
        d += a;
        n += b;
    }
    d.sqrt() / n.sqrt().max(NORM_FLOOR)
}

fn residual(a: &Iterate, b: &Iterate) -> f64 {
    let (d, n) = rel_change(&a.rho, &b.rho);
    d.sqrt() / n.sqrt().max(NORM_FLOOR)
        + vec_change(&a.s, &b.s)
        + vec_change(&a.m, &b.m)
        + vec_change(&a.e, &b.e)
        + vec_change(&a.h, &b.h)
}

impl Model {
    fn sigma(&self) -> f64 {
        self.coupling.sigma
    }

    /// Ampère source from the charge flux, with the regularized density
    /// gradient when `eps_x > 0`.
    fn ampere_source(&self, flux: &FluxPair, rho: &[f64]) -> VectorField {
        let n = rho.len();
        let mut je = VectorField {
            x: flux.je.x.clone(),
            y: flux.je.y.clone(),
            z: vec![0.0; n],
        };
        if self.reg.eps_x > 0.0 {
            let d = self.params.d;
            let rs = smooth_space(rho, self.reg.eps_x, &self.grid);
            let c = crate::state::closure_rho(&self.grid, &self.params.rho_d, self.sigma());
            let g0 = crate::grid::grad2(rho, &self.grid.spec, &c);
            let g1 = crate::grid::grad2(&rs, &self.grid.spec, &c);
            for k in 0..n {
                je.x[k] += d * (g1.x[k] - g0.x[k]);
                je.y[k] += d * (g1.y[k] - g0.y[k]);
            }
        }
        je
    }

    fn faraday_source(
        &self,
        m_new: &VectorField,
        m_old: &VectorField,
        dt: f64,
        smoother: Option<&TimeSmoother>,
    ) -> VectorField {
        match smoother {
            Some(sm) if sm.window() > 1 => sm.derivative(m_new, dt).scaled(-1.0),
            _ => m_old.axpy(-1.0, m_new).scaled(1.0 / dt),
        }
    }

    fn maxwell(
        &self,
        state: &SimState,
        flux: &FluxPair,
        rho: &[f64],
        m_new: &VectorField,
        dt: f64,
        smoother: Option<&TimeSmoother>,
    ) -> Result<(VectorField, VectorField)> {
        let src = MaxwellSources {
            je_term: self.ampere_source(flux, rho),
            dm_dt: self.faraday_source(m_new, &state.m, dt, smoother),
        };
        step_maxwell(&state.e, &state.h, &src, dt, self.coupling.cfl, &self.grid)
    }

    /// One time step: Picard iteration of the three sub-solves.
    pub fn fixed_point_step(
        &self,
        state: &SimState,
        dt: f64,
        smoother: Option<&TimeSmoother>,
    ) -> Result<(SimState, StepReport)> {
        let clock = Instant::now();
        let sigma = self.sigma();
        let (grid, params) = (&self.grid, &self.params);
        let mut cur = Iterate {
            rho: state.rho.clone(),
            s: state.s.clone(),
            m: state.m.clone(),
            e: state.e.clone(),
            h: state.h.clone(),
            je: compute_fluxes_scaled(&state.rho, &state.s, &state.e, params, grid, sigma),
        };
        let mut residuals = Vec::new();
        for it in 1..=self.coupling.picard_max {
            let transport = |e_k: &VectorField, m_k: &VectorField| {
                let e_mid = state.e.axpy(1.0, e_k).scaled(0.5);
                step_transport_scaled(
                    &state.rho,
                    &state.s,
                    &e_mid,
                    m_k,
                    params,
                    &self.transport,
                    grid,
                    dt,
                    sigma,
                    None,
                )
            };
            let llg = |s_k: &VectorField| {
                step_llg_scaled(&state.m, &state.h, s_k, params, &self.llg, grid, dt, sigma)
            };
            let next = if self.coupling.reverse_order {
                let tr = transport(&cur.e, &cur.m)?;
                let m = llg(&tr.s)?;
                let (e, h) = self.maxwell(state, &tr.flux, &tr.rho, &m, dt, smoother)?;
                Iterate {
                    rho: tr.rho,
                    s: tr.s,
                    m,
                    e,
                    h,
                    je: tr.flux,
                }
            } else {
                let (e, h) = self.maxwell(state, &cur.je, &cur.rho, &cur.m, dt, smoother)?;
                let m = llg(&cur.s)?;
                let tr = transport(&e, &m)?;
                Iterate {
                    rho: tr.rho,
                    s: tr.s,
                    m,
                    e,
                    h,
                    je: tr.flux,
                }
            };
            let r = residual(&next, &cur);
            residuals.push(r);
            cur = next;
            if !r.is_finite() {
                break;
            }
            if r <= self.coupling.picard_tol {
                // final field update with the accepted flux and magnetization increment
                let (e, h) = self.maxwell(state, &cur.je, &cur.rho, &cur.m, dt, smoother)?;
                let out = SimState {
                    rho: cur.rho,
                    s: cur.s,
                    e,
                    h,
                    m: cur.m,
                    t: state.t + dt,
                };
                return Ok((
                    out,
                    StepReport {
                        picard_iters: it,
                        final_residual: r,
                        wallclock: clock.elapsed().as_secs_f64(),
                        residuals,
                    },
                ));
            }
        }
        Err(Error::Convergence {
            what: "Picard iteration".into(),
            iterations: residuals.len(),
            residual: residuals.last().copied().unwrap_or(f64::NAN),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.coupling;
        if !(0.0..=1.0).contains(&c.sigma) {
            return Err(Error::Data(format!("sigma must lie in [0, 1], got {}", c.sigma)));
        }
        if !(c.picard_tol > 0.0) || c.picard_max == 0 {
            return Err(Error::Data("picard_tol must be positive and picard_max at least 1".into()));
        }
        if !(c.dt > 0.0) || !(c.t_end >= 0.0) || c.output_every == 0 {
            return Err(Error::Data("need dt > 0, t_end >= 0 and output_every >= 1".into()));
        }
        self.params.validate(&self.grid)
    }

    /// Number of steps taken to reach `t_end`.
    pub fn step_count(&self) -> usize {
        (self.coupling.t_end / self.coupling.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Advances `initial` to `t_end`, handing every emitted record and the
    /// state it describes to `sink`.
    pub fn run_simulation(
        &self,
        initial: &SimState,
        check_initial: bool,
        sink: &mut dyn FnMut(&DiagnosticsRecord, &SimState) -> Result<()>,
    ) -> Result<RunSummary> {
        self.validate()?;
        if check_initial {
            let rep = validate_initial_scaled(initial, &self.params, &self.grid, 1e-8, self.sigma())?;
            if !rep.pass {
                return Err(Error::Data(format!(
                    "initial state fails validation: gauss_e {:.3e}, gauss_h {:.3e}, normal_e {:.3e}, m_defect {:.3e}, m_outside {:.3e}",
                    rep.gauss_e, rep.gauss_h, rep.normal_e, rep.m_defect, rep.m_outside
                )));
            }
        }
        let sigma = self.sigma();
        let dt = self.coupling.dt;
        let max_rho = |st: &SimState| st.rho.iter().cloned().fold(0.0, f64::max);
        let mut m_t = max_rho(initial);
        let mut state = initial.clone();
        let mut records = Vec::new();
        let mut emit = |st: &SimState, iters: usize, m_t: f64, records: &mut Vec<DiagnosticsRecord>| -> Result<()> {
            let rec = record(st, &self.params, &self.grid, iters, m_t, sigma)?;
            sink(&rec, st)?;
            records.push(rec);
            Ok(())
        };
        emit(&state, 0, m_t, &mut records)?;
        let mut smoother = (self.reg.eps_t > 0.0).then(|| TimeSmoother::new(state.m.clone(), self.reg.eps_t, dt));
        let steps = self.step_count();
        let mut max_iters = 0;
        let mut reports = Vec::with_capacity(steps);
        for n in 1..=steps {
            let (next, rep) = self
                .fixed_point_step(&state, dt, smoother.as_ref())
                .map_err(|e| Error::AtTime {
                    t: state.t,
                    source: Box::new(e),
                })?;
            if let Some(sm) = smoother.as_mut() {
                sm.push(next.m.clone());
            }
            state = next;
            // t = t0 + n·dt
            state.t = initial.t + n as f64 * dt;
            m_t = m_t.max(max_rho(&state));
            max_iters = max_iters.max(rep.picard_iters);
            if n % self.coupling.output_every == 0 || n == steps {
                emit(&state, rep.picard_iters, m_t, &mut records)?;
            }
            reports.push(rep);
        }
        Ok(RunSummary {
            state,
            records,
            reports,
            max_picard_iters: max_iters,
            m_t,
        })
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub state: SimState,
    pub records: Vec<DiagnosticsRecord>,
    pub reports: Vec<StepReport>,
    pub max_picard_iters: usize,
    /// Running maximum of ρ over the run.
    pub m_t: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, BoundaryLayout, GridSpec, Rect};
    use crate::state::{gauss_residuals, interior_max_abs, SideValues};
    use nalgebra::Vector3;

    fn model(sigma: f64) -> Model {
        let grid = build_grid(
            GridSpec::new(16, 16, 4.0, 4.0).unwrap(),
            Some(Rect::new(0.75, 1.75, 1.0, 3.0)),
            Some(Rect::new(2.25, 3.25, 1.0, 3.0)),
            BoundaryLayout::default(),
        )
        .unwrap();
        let n = grid.spec.len();
        Model {
            params: PhysParams {
                alpha: 1.0,
                beta: 0.1,
                gamma: 1.0,
                d: 1.0,
                tau: 1.0,
                m_trunc: f64::INFINITY,
                doping: vec![1.0; n],
                rho_d: SideValues::uniform(1.0),
            },
            grid,
            coupling: CouplingConfig {
                sigma,
                dt: 2e-3,
                t_end: 0.1,
                ..Default::default()
            },
            transport: TransportConfig::default(),
            llg: LlgConfig::default(),
            reg: RegParams::default(),
        }
    }

    fn equilibrium(m: &Model) -> SimState {
        let n = m.grid.spec.len();
        let mut st = SimState::zeros(n);
        st.rho = vec![1.0; n];
        for k in m.grid.omega_cells() {
            st.m.set(k, Vector3::z());
        }
        st
    }

    #[test]
    fn zero_homotopy_keeps_zero_state() {
        let m = model(0.0);
        let st = SimState::zeros(m.grid.spec.len());
        let (out, rep) = m.fixed_point_step(&st, 2e-3, None).unwrap();
        assert_eq!(rep.picard_iters, 1);
        assert_eq!(out.rho, st.rho);
        assert_eq!(out.s, st.s);
        assert_eq!(out.e, st.e);
        assert_eq!(out.h, st.h);
        assert_eq!(out.m, st.m);
    }

    #[test]
    fn equilibrium_is_stationary() {
        let m = model(1.0);
        let st = equilibrium(&m);
        let (out, rep) = m.fixed_point_step(&st, 2e-3, None).unwrap();
        assert_eq!(rep.picard_iters, 1);
        let d = out.rho.iter().zip(&st.rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d <= 1e-10);
        assert!(out.m.axpy(-1.0, &st.m).max_norm() <= 1e-10);
        assert!(out.e.max_norm() <= 1e-10 && out.h.max_norm() <= 1e-10);
    }

    #[test]
    fn coupled_step_keeps_gauss_laws() {
        let m = model(1.0);
        let mut st = equilibrium(&m);
        let n = m.grid.spec.len();
        for k in 0..n {
            let (i, j) = m.grid.spec.ij(k);
            let (x, y) = m.grid.spec.center(i, j);
            st.s.set(k, Vector3::new(0.1 * (x * 0.8).sin() * y.sin(), 0.05, 0.0) * (x * (4.0 - x)) * 0.2);
        }
        for k in m.grid.omega_cells() {
            st.m.set(k, Vector3::new(0.6, 0.0, 0.8));
        }
        st.h = crate::state::init_magnetic_field(&st.m, &m.grid, 1e-12).unwrap();
        let (re0, rh0) = gauss_residuals(&st, &m.params.doping, &m.grid);
        let mut cur = st;
        let mut iters = Vec::new();
        for _ in 0..10 {
            let (next, rep) = m.fixed_point_step(&cur, 2e-3, None).unwrap();
            iters.push(rep.picard_iters);
            assert!(rep.residuals.windows(2).all(|w| w[1] <= w[0]));
            cur = next;
        }
        let (re, rh) = gauss_residuals(&cur, &m.params.doping, &m.grid);
        let de: Vec<f64> = re.iter().zip(&re0).map(|(a, b)| a - b).collect();
        let dh: Vec<f64> = rh.iter().zip(&rh0).map(|(a, b)| a - b).collect();
        assert!(interior_max_abs(&de, &m.grid.spec) <= 1e-12);
        assert!(interior_max_abs(&dh, &m.grid.spec) <= 1e-10);
        assert!(iters.iter().all(|&i| i <= 10), "{iters:?}");
    }

    #[test]
    fn empty_time_loop() {
        let mut m = model(1.0);
        m.coupling.t_end = 0.0;
        let st = equilibrium(&m);
        let mut rows = 0;
        let out = m
            .run_simulation(&st, true, &mut |_, _| {
                rows += 1;
                Ok(())
            })
            .unwrap();
        assert_eq!(rows, 1);
        assert_eq!(out.state, st);
        assert_eq!(out.records.len(), 1);
    }

    #[test]
    fn picard_cap_reports_convergence_error() {
        let mut m = model(1.0);
        m.coupling.picard_max = 1;
        let mut st = equilibrium(&m);
        st.rho[40] = 1.3;
        let e = m.fixed_point_step(&st, 2e-3, None).unwrap_err();
        assert!(matches!(e, Error::Convergence { iterations: 1, .. }));
    }
}
