//! The twelve acceptance criteria, run in order with one PASS/FAIL line each.

use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdml::check::{check_config, CheckReport, Outcome};
use sdml::config::{parse_config, RunConfig};
use sdml::coupling::{CouplingConfig, Model, RunSummary};
use sdml::diagnostics::beta_threshold;
use sdml::field::VectorField;
use sdml::grid::{build_grid, BoundaryLayout, GridSpec, Rect};
use sdml::llg::{g_inverse, LlgConfig};
use sdml::macrospin::{run_macrospin, MacrospinParams};
use sdml::mms::{run_mms_study, MmsKind, DEFAULT_LADDER};
use sdml::presets::{self, preset};
use sdml::regularization::RegParams;
use sdml::runner::{execute, CSV_NAME};
use sdml::state::{gauss_residuals, PhysParams, SideValues, SimState};
use sdml::transport::TransportConfig;

struct PresetRun {
    name: &'static str,
    cfg: RunConfig,
    report: CheckReport,
    summary: RunSummary,
    initial: SimState,
    elapsed: Duration,
}

fn run_presets() -> Vec<PresetRun> {
    presets::names()
        .map(|name| {
            let cfg = preset(name).unwrap();
            let (_, initial) = cfg.build().unwrap();
            let start = Instant::now();
            let (report, summary) = check_config(&cfg).unwrap();
            PresetRun {
                name,
                cfg,
                report,
                summary,
                initial,
                elapsed: start.elapsed(),
            }
        })
        .collect()
}

type Verdict = (bool, String);
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn item_passed(run: &PresetRun, name: &str) -> (bool, f64) {
    let item = run.report.item(name).unwrap_or_else(|| panic!("{}: no item {name}", run.name));
    (item.outcome == Outcome::Pass, item.value)
}

fn c1_unit_magnetization(runs: &[PresetRun]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let (pass, v) = item_passed(r, "unit_magnetization");
        let fast = r.elapsed < Duration::from_secs(60);
        ok &= pass && fast;
        parts.push(format!("{} {v:.1e} in {:.1}s", r.name, r.elapsed.as_secs_f64()));
    }
    (ok, parts.join(", "))
}

fn c2_charge_positivity(runs: &[PresetRun]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let (pass, v) = item_passed(r, "charge_positivity");
        ok &= pass;
        parts.push(format!("{} min {v:.3}", r.name));
    }
    (ok, parts.join(", "))
}

/// Coupled steps on a fully periodic grid: every cell is interior, so the
/// Gauss residual fields must not move at all.
fn torus_gauss_drift() -> f64 {
    let l = 4.0;
    let grid = build_grid(
        GridSpec::new(32, 32, l, l).unwrap(),
        Some(Rect::new(0.75, 1.75, 1.0, 3.0)),
        Some(Rect::new(2.25, 3.25, 1.0, 3.0)),
        BoundaryLayout::torus(),
    )
    .unwrap();
    let spec = grid.spec;
    let n = spec.len();
    let w = 2.0 * std::f64::consts::PI / l;
    let mut st = SimState::zeros(n);
    st.rho = spec.sample(|x, y| 1.0 + 0.3 * (w * x).sin() * (w * y).cos());
    st.s = VectorField {
        x: spec.sample(|x, y| 0.1 * (w * x).cos() * (w * y).sin()),
        y: spec.sample(|x, _| 0.05 * (2.0 * w * x).sin()),
        z: spec.sample(|_, y| 0.05 * (w * y).cos()),
    };
    st.e = VectorField {
        x: spec.sample(|x, y| 0.2 * (w * x).cos() * (w * y).cos()),
        y: spec.sample(|x, y| -0.1 * (w * x).sin() * (w * y).sin()),
        z: spec.sample(|x, _| 0.1 * (w * x).sin()),
    };
    st.h = VectorField {
        x: spec.sample(|_, y| 0.1 * (w * y).sin()),
        y: spec.sample(|x, y| 0.1 * (w * x).cos() * (w * y).sin()),
        z: vec![0.05; n],
    };
    for k in grid.omega_cells() {
        let (i, j) = spec.ij(k);
        let (x, y) = spec.center(i, j);
        st.m.set(k, Vector3::new((w * x).sin(), (w * y).cos(), 2.0).normalize());
    }
    let model = Model {
        params: PhysParams {
            alpha: 1.0,
            beta: 0.3,
            gamma: 1.0,
            d: 1.0,
            tau: 1.0,
            m_trunc: f64::INFINITY,
            doping: spec.sample(|x, _| 1.0 + 0.1 * (w * x).cos()),
            rho_d: SideValues::uniform(1.0),
        },
        grid,
        coupling: CouplingConfig {
            dt: 4e-4,
            ..Default::default()
        },
        transport: TransportConfig::default(),
        llg: LlgConfig::default(),
        reg: RegParams::default(),
    };
    let (re0, rh0) = gauss_residuals(&st, &model.params.doping, &model.grid);
    let mut cur = st;
    for _ in 0..100 {
        cur = model.fixed_point_step(&cur, 4e-4, None).unwrap().0;
    }
    let (re, rh) = gauss_residuals(&cur, &model.params.doping, &model.grid);
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    diff(&re, &re0).max(diff(&rh, &rh0))
}

fn c3_gauss_laws(runs: &[PresetRun]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        for name in ["gauss_e_drift", "gauss_h_drift"] {
            let item = r.report.item(name).unwrap();
            match &item.outcome {
                Outcome::Skipped(_) => {}
                o => {
                    ok &= *o == Outcome::Pass;
                    parts.push(format!("{} {} {:.1e}", r.name, &name[..7], item.value));
                }
            }
        }
    }
    let torus = torus_gauss_drift();
    ok &= torus <= 1e-12;
    parts.push(format!("torus field change {torus:.1e}"));
    (ok, parts.join(", "))
}

fn c4_free_energy(runs: &[PresetRun]) -> Verdict {
    let base = runs.iter().find(|r| r.name == "interlayer").unwrap();
    let p = &base.cfg.physics;
    let (bmax, _) = beta_threshold(p.alpha, p.tau, 2.0, 0.0).unwrap();
    let mut cfg = base.cfg.clone();
    cfg.physics.beta = 0.5 * bmax;
    let start = Instant::now();
    let fresh;
    let (report, summary) = if cfg == base.cfg {
        (&base.report, &base.summary)
    } else {
        fresh = check_config(&cfg).unwrap();
        (&fresh.0, &fresh.1)
    };
    let elapsed = start.elapsed() + if cfg == base.cfg { base.elapsed } else { Duration::ZERO };
    let split = summary.records.iter().all(|r| r.diss_rate.is_finite());
    let mono = report.item("energy_monotone").unwrap();
    let rate = report.item("dissipation_rate").unwrap();
    let ok = summary.m_t <= 2.0
        && split
        && mono.outcome == Outcome::Pass
        && rate.outcome == Outcome::Pass
        && elapsed < Duration::from_secs(300);
    (
        ok,
        format!(
            "beta {:.3} (max {bmax}), M_T run max {:.3}, worst dE {:.2e} (tol {:.2e}), rate slack {:.2e}, {:.1}s",
            cfg.physics.beta,
            summary.m_t,
            mono.value,
            mono.bound,
            rate.value,
            elapsed.as_secs_f64()
        ),
    )
}

fn c5_beta_threshold() -> Verdict {
    let (bmax, _) = beta_threshold(1.0, 1.0, 2.0, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut monotone = true;
    for _ in 0..1000 {
        let (a, t, m) = (rng.gen_range(0.01..10.0), rng.gen_range(0.01..10.0), rng.gen_range(0.01..10.0));
        let mut seen_false = false;
        for k in 0..200 {
            let (_, ok) = beta_threshold(a, t, m, 0.05 * k as f64).unwrap();
            monotone &= !(seen_false && ok);
            seen_false |= !ok;
        }
    }
    (bmax == 1.0 && monotone, format!("beta_max(1,1,2) = {bmax}, ok monotone in beta: {monotone}"))
}

fn c6_sup_growth(runs: &[PresetRun]) -> Verdict {
    let r = runs.iter().find(|r| r.name == "moser").unwrap();
    let (pass, v) = item_passed(r, "spin_sup_growth");
    let s0 = r.summary.records[0].max_abs_s;
    (pass && s0 > 0.0, format!("max of |s|_inf - bound over t <= 1: {v:.3e} (|s0|_inf {s0:.3})"))
}

fn c7_g_inverse() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1_000_000 {
        let m = loop {
            let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                break v / n;
            }
        };
        let alpha = rng.gen_range(0.0..10.0);
        let f = Vector3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let v = g_inverse(m, alpha, f);
        let res = (v - alpha * m.cross(&v) - f).norm() / (1.0 + f.norm());
        worst = worst.max(res);
    }
    let elapsed = start.elapsed();
    (
        worst <= 1e-12 && elapsed < Duration::from_secs(10),
        format!("worst scaled residual {worst:.2e} over 1e6 triples in {:.2}s", elapsed.as_secs_f64()),
    )
}

fn c8_macrospin() -> Verdict {
    let prec = run_macrospin(&MacrospinParams::default()).unwrap();
    let damp = run_macrospin(&MacrospinParams {
        alpha: 1.0,
        m0: [1.0, 0.0, 1.0],
        dt: 0.01,
        t_end: 20.0,
        ..Default::default()
    })
    .unwrap();
    let align = (damp.m_final.z - 1.0).abs();
    (
        prec.max_error <= 1e-5 && align <= 1e-6,
        format!("precession error {:.2e}, |m3 - 1| at t=20 {align:.2e}", prec.max_error),
    )
}

fn c9_mms() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in MmsKind::ALL {
        match run_mms_study(kind, &DEFAULT_LADDER) {
            Ok(t) => {
                ok &= t.orders.iter().all(|o| *o >= 1.9);
                let orders: Vec<String> = t.orders.iter().map(|o| format!("{o:.3}")).collect();
                parts.push(format!("{kind} {}", orders.join("/")));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{kind} {e}"));
            }
        }
    }
    (ok, parts.join(", "))
}

fn max_state_diff(a: &SimState, b: &SimState) -> f64 {
    let rho = a.rho.iter().zip(&b.rho).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    [(&a.s, &b.s), (&a.e, &b.e), (&a.h, &b.h), (&a.m, &b.m)]
        .iter()
        .map(|(x, y)| x.axpy(-1.0, y).max_norm())
        .fold(rho, f64::max)
}

fn c10_homotopy(runs: &[PresetRun]) -> Verdict {
    let mut cfg = preset("interlayer").unwrap();
    cfg.grid.nx = 32;
    cfg.grid.ny = 32;
    cfg.time.dt = Some(2e-3);
    cfg.time.t_end = 0.5;
    cfg.coupling.sigma = 0.0;
    let (_, initial) = cfg.build().unwrap();
    let zero_start = max_state_diff(&initial, &SimState::zeros(initial.rho.len())) == 0.0;
    let out = execute(&cfg, None).unwrap();
    let mut end = out.state.clone();
    end.t = 0.0;
    let stays_zero = zero_start && end == SimState::zeros(end.rho.len());
    let eq = runs.iter().find(|r| r.name == "equilibrium").unwrap();
    let drift = max_state_diff(&eq.summary.state, &eq.initial);
    (
        stays_zero && drift <= 1e-9,
        format!("sigma = 0 stays identically zero: {stays_zero}, equilibrium drift {drift:.1e}"),
    )
}

fn c11_s_bounded(runs: &[PresetRun]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let item = r.report.item("s_bounded").unwrap();
        ok &= item.outcome == Outcome::Pass;
        parts.push(format!("{} {:.3} <= {:.3}", r.name, item.value, item.bound));
    }
    (ok, parts.join(", "))
}

fn c12_determinism() -> Verdict {
    let mut ok = true;
    let mut bytes = 0;
    for name in presets::names() {
        let mut cfg = preset(name).unwrap();
        cfg.time.t_end = 0.1;
        cfg.time.output_every = 5;
        let csv = || {
            let dir = tempfile::tempdir().unwrap();
            execute(&cfg, Some(dir.path())).unwrap();
            std::fs::read(dir.path().join(CSV_NAME)).unwrap()
        };
        let (a, b) = (csv(), csv());
        bytes += a.len();
        ok &= a == b && !a.is_empty();
    }
    (ok, format!("two runs of every preset to t = 0.1 byte-identical ({bytes} bytes each)"))
}

fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

#[test]
fn acceptance_criteria() {
    assert!(parse_config(presets::preset_text("interlayer").unwrap()).is_ok());
    let start = Instant::now();
    let runs = run_presets();
    say(&format!("preset runs finished in {:.1}s", start.elapsed().as_secs_f64()));
    let criteria: Vec<Criterion<'_>> = vec![
        ("unit magnetization", Box::new(|| c1_unit_magnetization(&runs))),
        ("charge positivity", Box::new(|| c2_charge_positivity(&runs))),
        ("Gauss-law conservation", Box::new(|| c3_gauss_laws(&runs))),
        ("free-energy monotonicity", Box::new(|| c4_free_energy(&runs))),
        ("beta threshold", Box::new(c5_beta_threshold)),
        ("sup-norm growth bound", Box::new(|| c6_sup_growth(&runs))),
        ("G-map oracle", Box::new(c7_g_inverse)),
        ("macrospin oracles", Box::new(c8_macrospin)),
        ("MMS convergence", Box::new(c9_mms)),
        ("homotopy sanity", Box::new(|| c10_homotopy(&runs))),
        ("S(t) boundedness", Box::new(|| c11_s_bounded(&runs))),
        ("determinism", Box::new(c12_determinism)),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| (false, format!("panicked: {:?}", e.downcast_ref::<String>())));
        say(&format!(
            "criterion {:>2} {} {name}: {detail}",
            k + 1,
            if pass { "PASS" } else { "FAIL" }
        ));
        if !pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
