//! Viscosity solutions of `∂_t u + H(q, ∇u) = 0` on uniform grids by the
//! monotone Lax-Friedrichs scheme
//!
//! `u⁺_j = u_j - dt [H(q_j, D_c u_j) - Σ_i α_i/2 (u_{j+e_i} - 2u_j + u_{j-e_i}) / Δx_i]`
//!
//! with forward Euler in time and `dt ≤ λ / Σ_i α_i/Δx_i`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::Chart;
use crate::grid::{Grid, GridFunction};
use crate::hamiltonian::HamiltonianField;
use crate::transfer::{ManifoldFunction, TangentHamiltonian};

/// Dissipation coefficients and CFL factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    /// Per-axis `α_i`; estimated from the initial datum when absent.
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    /// `λ ∈ (0, 1]`.
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn default_cfl() -> f64 {
    0.4
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self { alpha: None, cfl: default_cfl() }
    }
}

impl SchemeParams {
    pub fn with_cfl(cfl: f64) -> Self {
        Self { cfl, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidArgument(format!("CFL factor must lie in (0, 1], got {}", self.cfl)));
        }
        if let Some(a) = &self.alpha {
            if a.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidArgument(format!("dissipation coefficients must be finite and >= 0: {a:?}")));
            }
        }
        Ok(())
    }
}

/// Largest stable step `λ / Σ_i α_i/Δx_i`; infinite when every `α_i` vanishes.
pub fn stable_time_step(grid: &Grid, alpha: &[f64], cfl: f64) -> f64 {
    let rate: f64 = alpha.iter().zip(grid.spacing()).map(|(a, h)| a / h).sum();
    if rate == 0.0 {
        f64::INFINITY
    } else {
        cfl / rate
    }
}

fn central_gradient(u: &GridFunction, node: usize, spacing: &[f64]) -> Vec<f64> {
    spacing
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let plus = u.grid.neighbour_value(&u.values, node, k, 1);
            let minus = u.grid.neighbour_value(&u.values, node, k, -1);
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Per-axis sup of `|∂H/∂p_i|` over grid nodes and the momentum hull of the
/// given functions: the box spanned by their central differences, inflated
/// by 50% about its centre. The hull is sampled on a tensor grid with 5
/// points per axis in one dimension and 3 otherwise.
pub fn estimate_dissipation(h: &HamiltonianField, fns: &[&GridFunction]) -> Result<Vec<f64>> {
    let first = fns.first().ok_or_else(|| Error::InvalidArgument("no grid function given".into()))?;
    let grid = &first.grid;
    check_dim(grid.dim(), h.dim())?;
    let d = grid.dim();
    let spacing = grid.spacing();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for u in fns {
        if u.grid != *grid {
            return Err(Error::InvalidGrid("functions live on different grids".into()));
        }
        let (l, hgh) = (0..grid.len())
            .into_par_iter()
            .map(|j| {
                let g = central_gradient(u, j, &spacing);
                (g.clone(), g)
            })
            .reduce(
                || (vec![f64::INFINITY; d], vec![f64::NEG_INFINITY; d]),
                |(a, b), (c, e)| {
                    (
                        a.iter().zip(&c).map(|(x, y)| x.min(*y)).collect(),
                        b.iter().zip(&e).map(|(x, y)| x.max(*y)).collect(),
                    )
                },
            );
        for k in 0..d {
            lo[k] = lo[k].min(l[k]);
            hi[k] = hi[k].max(hgh[k]);
        }
    }
    let per_axis: usize = if d == 1 { 5 } else { 3 };
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let centre = 0.5 * (lo[k] + hi[k]);
            let half = 1.5 * 0.5 * (hi[k] - lo[k]);
            (0..per_axis).map(|i| centre - half + 2.0 * half * i as f64 / (per_axis - 1) as f64).collect()
        })
        .collect();
    let count = per_axis.pow(d as u32);
    let momenta: Vec<Vec<f64>> = (0..count)
        .map(|mut c| {
            let mut p = vec![0.0; d];
            for k in (0..d).rev() {
                p[k] = axes[k][c % per_axis];
                c /= per_axis;
            }
            p
        })
        .collect();
    let alpha = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let q = grid.node(j);
            let mut a = vec![0.0f64; d];
            for p in &momenta {
                for (ak, g) in a.iter_mut().zip(h.grad_p(&q, p)) {
                    *ak = ak.max(g.abs());
                }
            }
            a
        })
        .reduce(|| vec![0.0; d], |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect());
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFiniteGradient { q: vec![], p: vec![] });
    }
    Ok(alpha)
}

/// One forward-Euler Lax-Friedrichs step of length `dt`.
pub fn lax_friedrichs_step(
    u: &GridFunction,
    h: &HamiltonianField,
    alpha: &[f64],
    dt: f64,
    cfl: f64,
) -> Result<GridFunction> {
    let grid = &u.grid;
    check_dim(grid.dim(), h.dim())?;
    check_dim(grid.dim(), alpha.len())?;
    let limit = stable_time_step(grid, alpha, cfl);
    if !(dt >= 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    let spacing = grid.spacing();
    let t = u.t + dt;
    let d = spacing.len();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map_init(
            || (vec![0.0; d], vec![0.0; d]),
            |(q, grad), j| {
                grid.node_into(j, q);
                let mut viscosity = 0.0;
                for (k, hk) in spacing.iter().enumerate() {
                    let plus = grid.neighbour_value(&u.values, j, k, 1);
                    let minus = grid.neighbour_value(&u.values, j, k, -1);
                    grad[k] = (plus - minus) / (2.0 * hk);
                    viscosity += 0.5 * alpha[k] * (plus - 2.0 * u.values[j] + minus) / hk;
                }
                u.values[j] - dt * (h.value(q, grad) - viscosity)
            },
        )
        .collect();
    if let Some(node) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { node, t });
    }
    Ok(GridFunction { grid: grid.clone(), values, t })
}

/// Step size, step count and coefficients used by a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub alpha: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
    pub cfl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub u: GridFunction,
    pub diagnostics: SolveDiagnostics,
}

/// Advances `u0` to time `u0.t + duration`, shortening the last step to land on it.
pub fn evolve(u0: GridFunction, h: &HamiltonianField, duration: f64, params: &SchemeParams) -> Result<Solution> {
    params.validate()?;
    if !(duration >= 0.0) {
        return Err(Error::InvalidArgument(format!("final time must be >= 0, got {duration}")));
    }
    let alpha = match &params.alpha {
        Some(a) => {
            check_dim(u0.grid.dim(), a.len())?;
            a.clone()
        }
        None => estimate_dissipation(h, &[&u0])?,
    };
    let dt_max = stable_time_step(&u0.grid, &alpha, params.cfl);
    let steps = if duration == 0.0 {
        0
    } else if dt_max.is_infinite() {
        1
    } else {
        // absorb round-off so that T/dt = n does not add a sliver step
        (duration / dt_max * (1.0 - 1e-12)).ceil() as usize
    };
    let dt = if steps == 0 { 0.0 } else { dt_max.min(duration) };
    let end = u0.t + duration;
    let mut u = u0;
    for n in 0..steps {
        let step = if n + 1 == steps { (end - u.t).min(dt) } else { dt };
        u = lax_friedrichs_step(&u, h, &alpha, step, params.cfl)?;
    }
    u.t = end;
    Ok(Solution { u, diagnostics: SolveDiagnostics { alpha, dt, steps, cfl: params.cfl } })
}

/// Solves the Cauchy problem with datum `u0` up to time `t_end`.
pub fn solve_cp(
    grid: &Grid,
    h: &HamiltonianField,
    u0: impl Fn(&[f64]) -> f64 + Sync,
    t_end: f64,
    params: &SchemeParams,
) -> Result<Solution> {
    let initial = GridFunction::from_fn(grid.clone(), 0.0, u0)?;
    evolve(initial, h, t_end, params)
}

/// Solves the restricted problem on `M` in tangent chart coordinates, with the
/// Hamiltonian pulled back through `chart`. Returns `ū(t_end)` on `grid`.
pub fn solve_cp_on_manifold(
    chart: Arc<dyn Chart>,
    hbar: &TangentHamiltonian,
    u0bar: &ManifoldFunction,
    t_end: f64,
    grid: &Grid,
    params: &SchemeParams,
) -> Result<Solution> {
    check_dim(hbar.manifold().dim(), grid.dim())?;
    let h = hbar.chart_hamiltonian(chart.clone())?;
    for j in 0..grid.len() {
        h.check_domain(&grid.node(j))?;
    }
    let initial = u0bar.on_chart_grid(chart.as_ref(), grid, 0.0)?;
    evolve(initial, &h, t_end, params)
}

pub type Evaluable<'a> = &'a (dyn Fn(f64, &[f64]) -> Result<f64> + Sync);

/// `sup |∂_t u + H(q, ∇u)|` over `points x times`, all derivatives by central
/// differences with step `step`.
pub fn pde_residual(u: Evaluable, h: &HamiltonianField, points: &[Vec<f64>], times: &[f64], step: f64) -> Result<f64> {
    let pairs: Vec<(&Vec<f64>, f64)> = points.iter().flat_map(|q| times.iter().map(move |&t| (q, t))).collect();
    pairs
        .par_iter()
        .map(|&(q, t)| {
            check_dim(h.dim(), q.len())?;
            let dt = (u(t + step, q)? - u(t - step, q)?) / (2.0 * step);
            let mut grad = vec![0.0; q.len()];
            let mut x = q.clone();
            for k in 0..q.len() {
                x[k] = q[k] + step;
                let plus = u(t, &x)?;
                x[k] = q[k] - step;
                let minus = u(t, &x)?;
                x[k] = q[k];
                grad[k] = (plus - minus) / (2.0 * step);
            }
            Ok((dt + h.value(q, &grad)).abs())
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// One row of a refinement study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dx: f64,
    pub error: f64,
    /// `log(e_prev / e) / log(dx_prev / dx)`; absent on the first row or when saturated.
    pub order: Option<f64>,
    /// Both errors at round-off level, so no order is meaningful.
    pub saturated: bool,
}

/// Errors below this are treated as round-off.
pub const SATURATION: f64 = 1e-12;

/// Runs `measure` (returning the L∞ error against an oracle) on each grid and
/// tabulates observed orders.
pub fn convergence_study(grids: &[Grid], measure: impl Fn(&Grid) -> Result<f64>) -> Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(grids.len());
    for g in grids {
        let dx = g.max_spacing();
        let error = measure(g)?;
        let (order, saturated) = match rows.last() {
            None => (None, error < SATURATION),
            Some(prev) if error < SATURATION || prev.error < SATURATION => (None, true),
            Some(prev) => (Some((prev.error / error).ln() / (prev.dx / dx).ln()), false),
        };
        rows.push(ConvergenceRow { dx, error, order, saturated });
    }
    Ok(rows)
}

/// `min_{‖y - q‖ ≤ radius} u0(y)` by brute force: tensor samples of spacing
/// at most `resolution` inside the ball, the two ball ends along every axis,
/// and in two dimensions the bounding circle at the same resolution.
pub fn hopf_lax_min(u0: impl Fn(&[f64]) -> f64, q: &[f64], radius: f64, resolution: f64) -> f64 {
    let d = q.len();
    if radius <= 0.0 {
        return u0(q);
    }
    let per_axis = (2.0 * radius / resolution).ceil() as usize + 1;
    let step = 2.0 * radius / (per_axis - 1) as f64;
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; d];
    let mut y = vec![0.0; d];
    'outer: loop {
        let mut r2 = 0.0;
        for ((yk, qk), i) in y.iter_mut().zip(q).zip(&idx) {
            *yk = qk - radius + *i as f64 * step;
            r2 += (*yk - qk).powi(2);
        }
        if r2 <= radius * radius * (1.0 + 1e-12) {
            best = best.min(u0(&y));
        }
        for i in idx.iter_mut() {
            *i += 1;
            if *i < per_axis {
                continue 'outer;
            }
            *i = 0;
        }
        break;
    }
    for k in 0..d {
        for s in [-1.0, 1.0] {
            y.copy_from_slice(q);
            y[k] += s * radius;
            best = best.min(u0(&y));
        }
    }
    if d == 2 {
        let count = (std::f64::consts::TAU * radius / resolution).ceil() as usize;
        for i in 0..count {
            let (s, c) = (std::f64::consts::TAU * i as f64 / count as f64).sin_cos();
            best = best.min(u0(&[q[0] + radius * c, q[1] + radius * s]));
        }
    }
    best
}

/// Half-width of the boundary layer excluded from error metrics on
/// non-periodic axes: `max_i α_i T` plus two cells.
pub fn discard_margin(grid: &Grid, alpha: &[f64], t_end: f64) -> f64 {
    alpha.iter().fold(0.0f64, |m, a| m.max(a * t_end)) + 2.0 * grid.max_spacing()
}

/// Outcome of random comparison-principle spot checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub pairs: usize,
    pub violations: usize,
    /// `max (u⁺ - v⁺)` over nodes and pairs; non-positive when monotone.
    pub max_violation: f64,
}

/// Draws `pairs` random `u ≤ v` on `grid` (values in `[-1, 1]`, `v = u +` a
/// non-negative perturbation), advances both by one step with shared
/// coefficients, and checks `u⁺ ≤ v⁺` up to `1e-12`.
pub fn monotonicity_check(
    grid: &Grid,
    h: &HamiltonianField,
    cfl: f64,
    pairs: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let u: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = u.iter().map(|x| x + rng.gen_range(0.0..0.5)).collect();
        let u = GridFunction::new(grid.clone(), u, 0.0)?;
        let v = GridFunction::new(grid.clone(), v, 0.0)?;
        let alpha = estimate_dissipation(h, &[&u, &v])?;
        let dt = stable_time_step(grid, &alpha, cfl).min(1.0);
        let un = lax_friedrichs_step(&u, h, &alpha, dt, cfl)?;
        let vn = lax_friedrichs_step(&v, h, &alpha, dt, cfl)?;
        let gap = un.values.iter().zip(&vn.values).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(gap);
        if gap > 1e-12 {
            violations += 1;
        }
    }
    Ok(MonotonicityReport { pairs, violations, max_violation: worst })
}
