//! Invariant suite evaluated on a run's record stream.

use std::fmt;

use crate::config::RunConfig;
use crate::coupling::RunSummary;
use crate::diagnostics::DiagnosticsRecord;
use crate::error::Result;
use crate::runner;

pub const UNIT_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = -1e-10;
/// Allowed growth of the interior Gauss residuals per unit time.
pub const GAUSS_DRIFT_TOL: f64 = 1e-10;
/// Slack in the sup-norm growth bound on s.
pub const GROWTH_SLACK: f64 = 1.05;
/// Horizon of the sup-norm growth bound.
pub const GROWTH_HORIZON: f64 = 1.0;
/// `S + ∫ dissipation` must stay below this multiple of `1 + S(0)`.
pub const S_BOUND_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Pass,
    Fail,
    /// Hypotheses of the property do not hold for this run.
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckItem {
    pub name: &'static str,
    pub outcome: Outcome,
    pub value: f64,
    pub bound: f64,
}

impl CheckItem {
    fn compare(name: &'static str, value: f64, bound: f64, ok: bool) -> Self {
        let outcome = if ok { Outcome::Pass } else { Outcome::Fail };
        Self {
            name,
            outcome,
            value,
            bound,
        }
    }

    fn skipped(name: &'static str, why: impl Into<String>) -> Self {
        Self {
            name,
            outcome: Outcome::Skipped(why.into()),
            value: f64::NAN,
            bound: f64::NAN,
        }
    }

    pub fn failed(&self) -> bool {
        self.outcome == Outcome::Fail
    }
}

impl fmt::Display for CheckItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            Outcome::Skipped(why) => write!(f, "SKIP {:<22} {why}", self.name),
            o => write!(
                f,
                "{} {:<22} value {:.6e}  bound {:.6e}",
                if *o == Outcome::Pass { "PASS" } else { "FAIL" },
                self.name,
                self.value,
                self.bound
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        !self.items.iter().any(CheckItem::failed)
    }

    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.items {
            writeln!(f, "{i}")?;
        }
        write!(f, "{}", if self.passed() { "all checks passed" } else { "some checks FAILED" })
    }
}

/// What the suite needs to know about the run besides its records.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunFacts {
    pub dt: f64,
    /// `D ‖C‖∞`, the exponent of the sup-norm growth bound.
    pub growth_rate: f64,
    /// Mollified coupling is on, so the Gauss laws are not carried exactly.
    pub regularized: bool,
}

impl RunFacts {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let spec = cfg.spec()?;
        let c_max = cfg.physics.doping.sample(&spec).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Ok(Self {
            dt: cfg.dt()?,
            growth_rate: cfg.physics.d * c_max * cfg.coupling.sigma,
            regularized: cfg.reg.eps_x > 0.0 || cfg.reg.eps_t > 0.0,
        })
    }
}

fn max_of(records: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    records.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
}

/// Evaluates every invariant on `records`, which must hold one record per
/// step for the energy checks to apply.
pub fn evaluate(records: &[DiagnosticsRecord], facts: &RunFacts) -> CheckReport {
    let mut items = Vec::new();
    if records.is_empty() {
        items.push(CheckItem::skipped("records", "empty record stream"));
        return CheckReport { items };
    }
    let first = &records[0];
    let last = records.last().expect("nonempty");

    let finite = records.iter().all(|r| {
        [r.s, r.e_total, r.min_rho, r.max_rho, r.max_abs_s, r.max_m_defect, r.res_e, r.res_h]
            .iter()
            .all(|v| v.is_finite())
    });
    items.push(CheckItem::compare("finite", f64::from(u8::from(finite)), 1.0, finite));

    let defect = max_of(records, |r| r.max_m_defect);
    items.push(CheckItem::compare("unit_magnetization", defect, UNIT_TOL, defect <= UNIT_TOL));

    let min_rho = records.iter().map(|r| r.min_rho).fold(f64::INFINITY, f64::min);
    items.push(CheckItem::compare("charge_positivity", min_rho, POSITIVITY_TOL, min_rho >= POSITIVITY_TOL));

    let span = last.t - first.t;
    for (name, res) in [
        ("gauss_e_drift", (|r: &DiagnosticsRecord| r.res_e) as fn(&DiagnosticsRecord) -> f64),
        ("gauss_h_drift", |r: &DiagnosticsRecord| r.res_h),
    ] {
        if facts.regularized {
            items.push(CheckItem::skipped(name, "mollified coupling does not carry the Gauss laws"));
        } else if span > 0.0 {
            let drift = records.iter().skip(1).map(|r| (res(r) - res(first)) / (r.t - first.t)).fold(0.0, f64::max);
            items.push(CheckItem::compare(name, drift, GAUSS_DRIFT_TOL, drift <= GAUSS_DRIFT_TOL));
        }
    }

    let beta_ok = records.iter().all(|r| r.beta_ok);
    let split_ok = records.iter().all(|r| r.diss_rate.is_finite());
    let per_step = records.windows(2).all(|w| (w[1].t - w[0].t - facts.dt).abs() <= 1e-9 * facts.dt.max(1.0));
    let tol = 1e-6 + 10.0 * facts.dt * facts.dt;
    if !beta_ok {
        items.push(CheckItem::skipped("energy_monotone", "beta above the threshold"));
    } else if !split_ok {
        items.push(CheckItem::skipped("energy_monotone", "rho > |s| fails somewhere"));
    } else if !per_step {
        items.push(CheckItem::skipped("energy_monotone", "needs one record per step"));
    } else if records.len() > 1 {
        let worst = records.windows(2).map(|w| w[1].e_total - w[0].e_total).fold(f64::NEG_INFINITY, f64::max);
        items.push(CheckItem::compare("energy_monotone", worst, tol, worst <= tol));
        let slack = records
            .windows(2)
            .map(|w| -(w[1].e_total - w[0].e_total) / facts.dt - w[0].diss_rate.max(w[1].diss_rate))
            .fold(f64::INFINITY, f64::min);
        items.push(CheckItem::compare("dissipation_rate", slack, -tol / facts.dt, slack >= -tol / facts.dt));
    }

    let beta_flag = f64::from(u8::from(beta_ok));
    items.push(CheckItem::compare("beta_threshold", beta_flag, 1.0, beta_ok));

    let s0 = first.max_abs_s;
    let growth = records
        .iter()
        .filter(|r| r.t - first.t <= GROWTH_HORIZON + 1e-12)
        .map(|r| r.max_abs_s - GROWTH_SLACK * (facts.growth_rate * (r.t - first.t)).exp() * s0)
        .fold(f64::NEG_INFINITY, f64::max);
    items.push(CheckItem::compare("spin_sup_growth", growth, 0.0, growth <= 0.0));

    let mut integral = 0.0;
    let mut sup = first.s;
    for w in records.windows(2) {
        let rate = |r: &DiagnosticsRecord| if r.diss_rate.is_finite() { r.diss_rate.max(0.0) } else { 0.0 };
        integral += 0.5 * (rate(&w[0]) + rate(&w[1])) * (w[1].t - w[0].t);
        sup = sup.max(w[1].s + integral);
    }
    let bound = S_BOUND_FACTOR * (1.0 + first.s.abs());
    items.push(CheckItem::compare("s_bounded", sup, bound, sup.is_finite() && sup <= bound));

    CheckReport { items }
}

/// Runs `cfg` with one record per step and evaluates the suite.
pub fn check_config(cfg: &RunConfig) -> Result<(CheckReport, RunSummary)> {
    let mut cfg = cfg.clone();
    cfg.time.output_every = 1;
    let facts = RunFacts::from_config(&cfg)?;
    let summary = runner::execute(&cfg, None)?;
    Ok((evaluate(&summary.records, &facts), summary))
}
