//! Space and time mollifiers: separable triangle-kernel averaging in space,
//! causal moving averages in time.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::field::{max_abs, sum_sq, VectorField};
use crate::grid::{grad2, Closure, EdgeKind, Ghost, Grid, Side};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RegParams {
    pub eps_x: f64,
    pub eps_t: f64,
}

impl RegParams {
    pub fn is_off(&self) -> bool {
        self.eps_x == 0.0 && self.eps_t == 0.0
    }
}

/// Normalized weights `r+1−|k|` for `k = −r..=r`.
fn triangle(r: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..=2 * r)
        .map(|k| (r + 1) as f64 - (k as f64 - r as f64).abs())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Maps an out-of-range index back into `0..n` by half-sample reflection
/// (or wrap-around).
fn fold(i: isize, n: usize, periodic: bool) -> usize {
    let n = n as isize;
    if periodic {
        return i.rem_euclid(n) as usize;
    }
    let p = i.rem_euclid(2 * n);
    (if p < n { p } else { 2 * n - 1 - p }) as usize
}

fn smooth_lines(u: &[f64], n: usize, count: usize, stride: usize, step: usize, w: &[f64], periodic: bool) -> Vec<f64> {
    let r = (w.len() / 2) as isize;
    let mut out = vec![0.0; u.len()];
    for line in 0..count {
        let base = line * stride;
        for i in 0..n {
            let mut acc = 0.0;
            for (q, wq) in w.iter().enumerate() {
                let src = fold(i as isize + q as isize - r, n, periodic);
                acc += wq * u[base + src * step];
            }
            out[base + i * step] = acc;
        }
    }
    out
}

/// Triangle-kernel mollification of radius `ceil(eps/h)` cells in each
/// direction, reflecting at the boundary. Identity for `eps = 0`.
pub fn smooth_space(u: &[f64], eps_x: f64, grid: &Grid) -> Vec<f64> {
    if eps_x <= 0.0 {
        return u.to_vec();
    }
    let spec = &grid.spec;
    let rx = (eps_x / spec.hx()).ceil() as usize;
    let ry = (eps_x / spec.hy()).ceil() as usize;
    let px = grid.layout().kind(Side::Left) == EdgeKind::Periodic;
    let py = grid.layout().kind(Side::Bottom) == EdgeKind::Periodic;
    let along_x = smooth_lines(u, spec.nx, spec.ny, spec.nx, 1, &triangle(rx), px);
    smooth_lines(&along_x, spec.ny, spec.nx, 1, spec.nx, &triangle(ry), py)
}

fn window(eps_t: f64, dt: f64) -> usize {
    if eps_t <= 0.0 {
        1
    } else {
        ((eps_t / dt).ceil() as usize).max(1)
    }
}

/// Index `i` of a series reflected at `t = 0`.
fn reflect_past(i: isize) -> usize {
    i.unsigned_abs()
}

/// Causal moving average over `ceil(eps_t/dt)` samples and its backward
/// difference. The first derivative entry uses the forward difference.
pub fn smooth_time(series: &[f64], eps_t: f64, dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if series.len() < 2 {
        return Err(Error::Data(format!(
            "time smoothing needs at least two samples, got {}",
            series.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Data(format!("time smoothing needs dt > 0, got {dt}")));
    }
    let w = window(eps_t, dt);
    let n = series.len();
    // reflected indices never reach past the current sample
    let at = |i: isize, now: isize| series[reflect_past(i).min(now as usize)];
    let smooth: Vec<f64> = (0..n as isize)
        .map(|k| (0..w as isize).map(|q| at(k - q, k)).sum::<f64>() / w as f64)
        .collect();
    let mut deriv = vec![0.0; n];
    for k in 1..n {
        deriv[k] = (smooth[k] - smooth[k - 1]) / dt;
    }
    deriv[0] = deriv[1];
    Ok((smooth, deriv))
}

/// Running version of [`smooth_time`] for a vector field sampled once per
/// step, keeping only the samples the window can reach.
#[derive(Clone, Debug)]
pub struct TimeSmoother {
    w: usize,
    early: Vec<VectorField>,
    recent: VecDeque<VectorField>,
    count: usize,
}

impl TimeSmoother {
    pub fn new(first: VectorField, eps_t: f64, dt: f64) -> Self {
        let w = window(eps_t, dt);
        let mut s = Self {
            w,
            early: Vec::new(),
            recent: VecDeque::new(),
            count: 0,
        };
        s.push(first);
        s
    }

    pub fn window(&self) -> usize {
        self.w
    }

    pub fn push(&mut self, v: VectorField) {
        if self.count < self.w {
            self.early.push(v.clone());
        }
        self.recent.push_back(v);
        while self.recent.len() > self.w + 1 {
            self.recent.pop_front();
        }
        self.count += 1;
    }

    fn sample<'a>(&'a self, i: isize, now: usize, candidate: &'a VectorField) -> &'a VectorField {
        let i = reflect_past(i).min(now);
        if i == self.count {
            return candidate;
        }
        let first_recent = self.count - self.recent.len();
        if i >= first_recent {
            &self.recent[i - first_recent]
        } else {
            &self.early[i]
        }
    }

    fn average(&self, last: usize, candidate: &VectorField) -> VectorField {
        let n = candidate.len();
        let mut acc = VectorField::zeros(n);
        for q in 0..self.w as isize {
            acc = acc.axpy(1.0, self.sample(last as isize - q, last, candidate));
        }
        acc.scaled(1.0 / self.w as f64)
    }

    /// `(R m)(t_{n+1}) − (R m)(t_n)` divided by `dt`, where `candidate` is
    /// the sample at `t_{n+1}` not yet pushed.
    pub fn derivative(&self, candidate: &VectorField, dt: f64) -> VectorField {
        let next = self.count;
        if self.w == 1 {
            let last = self.recent.back().expect("smoother holds a sample");
            return candidate.axpy(-1.0, last).scaled(1.0 / dt);
        }
        let a = self.average(next, candidate);
        let b = self.average(next - 1, candidate);
        a.axpy(-1.0, &b).scaled(1.0 / dt)
    }
}

/// Discrete `C¹` norm `max|u| + max|∇u|`.
pub fn c1_norm(u: &[f64], grid: &Grid) -> f64 {
    let g = grad2(u, &grid.spec, &Closure::uniform(Ghost::Even));
    max_abs(u) + max_abs(&g.x).max(max_abs(&g.y))
}

pub fn l2_norm(u: &[f64], grid: &Grid) -> f64 {
    (sum_sq(u) * grid.spec.cell_area()).sqrt()
}

/// Largest observed ratios `‖R u‖_{C¹}/‖u‖₂` and `‖R u‖₂/‖u‖₂` over the
/// given sample fields.
pub fn operator_bounds(samples: &[Vec<f64>], eps_x: f64, grid: &Grid) -> (f64, f64) {
    samples.iter().fold((0.0f64, 0.0f64), |(ke, k0), u| {
        let n = l2_norm(u, grid);
        if n == 0.0 {
            return (ke, k0);
        }
        let r = smooth_space(u, eps_x, grid);
        (ke.max(c1_norm(&r, grid) / n), k0.max(l2_norm(&r, grid) / n))
    })
}
