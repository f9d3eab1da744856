//! One runner per experiment kind. Each returns a finished [`Report`].

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use hjsub::geometry::Submanifold;
use hjsub::grid::{Grid, GridFunction};
use hjsub::hamiltonian::{
    check_m_invariance, check_tm_invariance, flow_drift, normal_independence_defect, pullback_hamiltonian,
    tangency_residual,
};
use hjsub::hjsolver::{
    convergence_study, discard_margin, hopf_lax_min, monotonicity_check, pde_residual, solve_cp, solve_cp_on_manifold,
};
use hjsub::sampling::ball_points;
use hjsub::transfer::{
    chart_point, extend_function, extend_hamiltonian, restrict_hamiltonian, restrict_to_chart_grid, ExtensionParams,
    ManifoldFunction,
};
use hjsub::Vector;

use crate::error::{HarnessError, Result};
use crate::expr::Expr;
use crate::report::{Check, Outcome, Report};
use crate::scenario::{env_q, vector, GridSpec, Kind, OracleSpec, Scenario};

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for snapshots; overrides the scenario's output directory.
    pub out_dir: Option<PathBuf>,
    /// Grid refinement multiplier applied to every grid of the scenario.
    pub refine: Option<usize>,
    pub seed: Option<u64>,
}

struct Context {
    scenario: Scenario,
    out_dir: Option<PathBuf>,
}

impl Context {
    fn grid(&self, spec: &GridSpec) -> Result<Grid> {
        spec.build()
    }

    fn save(&self, report: &mut Report, label: &str, u: &GridFunction) -> Result<()> {
        let (Some(dir), Some(out)) = (&self.out_dir, &self.scenario.output) else {
            return Ok(());
        };
        std::fs::create_dir_all(dir)?;
        let ext = match out.format {
            crate::scenario::OutputFormat::Csv => "csv",
            crate::scenario::OutputFormat::Binary => "bin",
        };
        let path = dir.join(format!("{}.{label}.{ext}", self.scenario.name));
        u.save(&path, out.format.into())?;
        report.notes.push(format!("snapshot {label} written to {}", path.display()));
        Ok(())
    }
}

/// Runs a scenario and returns its report. Errors are configuration or
/// numerical failures; check failures and violated hypotheses are outcomes.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<Report> {
    let mut scenario = scenario.clone();
    if let Some(seed) = opts.seed {
        scenario.seed = seed;
    }
    let refine = opts.refine.unwrap_or(1);
    if refine == 0 {
        return Err(HarnessError::Config("--refine must be at least 1".into()));
    }
    if refine > 1 {
        for g in [&mut scenario.ambient_grid, &mut scenario.chart_grid].into_iter().flatten() {
            *g = g.refined(refine)?;
        }
    }
    scenario.validate()?;
    let out_dir = opts.out_dir.clone().or_else(|| scenario.output.as_ref().and_then(|o| o.dir.clone()));
    let ctx = Context { scenario: scenario.clone(), out_dir };
    let mut report = Report::new(scenario);
    if refine > 1 {
        report.notes.push(format!("grids refined by a factor {refine}"));
    }
    let start = Instant::now();
    match ctx.scenario.kind {
        Kind::RestrictCheck => restrict_check(&ctx, &mut report)?,
        Kind::ExtendCheck => extend_check(&ctx, &mut report)?,
        Kind::InvarianceReport => invariance_report(&ctx, &mut report)?,
        Kind::ChartEquivalence => chart_equivalence(&ctx, &mut report)?,
        Kind::Convergence => convergence(&ctx, &mut report)?,
    }
    report.finish();
    report.timing.wall_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn datum(e: &Expr) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |q| e.eval_scalar(&env_q(q, 0.0)).unwrap_or(f64::NAN)
}

fn closed_form(e: &Expr) -> impl Fn(f64, &[f64]) -> f64 + Sync + '_ {
    move |t, q| e.eval_scalar(&env_q(q, t)).unwrap_or(f64::NAN)
}

fn max_gap(a: &GridFunction, b: &GridFunction) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Restriction: the ambient solution, restricted to `M`, against the solution of
/// the restricted problem in a chart of `M`.
fn restrict_check(ctx: &Context, report: &mut Report) -> Result<()> {
    let s = &ctx.scenario;
    let m = s.build_manifold()?;
    let h = s.build_hamiltonian(Some(m.clone()))?;
    let tol_inv = s.tolerance("invariance", 1e-8);
    let inv = check_m_invariance(&h, &m, &s.sampling_plan(), tol_inv)?;
    report.push(Check::at_most("invariance.tangency", inv.max_tangency_residual, tol_inv));
    report.push(Check::at_most("invariance.normal_independence", inv.max_normal_independence_residual, tol_inv));
    if !inv.invariant() {
        report.outcome = Outcome::HypothesisViolated;
        report.notes.push(format!(
            "refused: {} does not leave {} x R^d invariant (tangency residual {:e}, independence residual {:e}, tolerance {:e})",
            h.name(),
            m.name(),
            inv.max_tangency_residual,
            inv.max_normal_independence_residual,
            tol_inv
        ));
        return Ok(());
    }

    let chart = s.build_chart(Some(&m))?;
    let u0 = s.initial_expr()?;
    let exact = match &s.exact {
        Some(OracleSpec::Expr(src)) => Some(Expr::parse(src)?),
        Some(OracleSpec::HopfLax { .. }) => {
            return Err(HarnessError::Config("restrict_check supports closed-form `exact` only".into()))
        }
        None => None,
    };
    let params = s.solver.params();
    let t_end = s.final_time;
    let hbar = restrict_hamiltonian(&h, m.clone())?;
    let u0bar = {
        let e = u0.clone();
        ManifoldFunction::new(m.clone(), Arc::new(move |_t, q: &Vector| Ok(e.eval_scalar(&env_q(q.as_slice(), 0.0))?)))
    };
    let mut ambient_grid = ctx.grid(s.require(&s.ambient_grid, "ambient_grid")?)?;
    let mut chart_grid = ctx.grid(s.require(&s.chart_grid, "chart_grid")?)?;
    let levels = if s.refinement.is_some() { 2 } else { 1 };
    let mut discrepancies = Vec::new();
    for level in 0..levels {
        let prefix = if level == 0 { String::new() } else { "refined.".to_string() };
        let ambient = solve_cp(&ambient_grid, &h, datum(&u0), t_end, &params)?;
        let restricted = restrict_to_chart_grid(&ambient.u, chart.as_ref(), &chart_grid)?;
        let on_chart = solve_cp_on_manifold(chart.clone(), &hbar, &u0bar, t_end, &chart_grid, &params)?;
        let d = max_gap(&restricted, &on_chart.u);
        discrepancies.push(d);
        let key = if level == 0 { "discrepancy" } else { "refined_discrepancy" };
        report.push(Check::at_most(
            format!("{prefix}discrepancy"),
            d,
            s.tolerance(key, if level == 0 { 0.05 } else { 0.03 }),
        ));
        if let Some(e) = &exact {
            let f = closed_form(e);
            let reference = GridFunction::try_from_fn(chart_grid.clone(), t_end, |x| {
                Ok(f(t_end, chart_point(chart.as_ref(), x)?.as_slice()))
            })?;
            let tol = s.tolerance("exact", 0.05);
            report.push(Check::at_most(format!("{prefix}ambient_error"), max_gap(&restricted, &reference), tol));
            report.push(Check::at_most(format!("{prefix}chart_error"), max_gap(&on_chart.u, &reference), tol));
        }
        // chart nodes against the ambient boundary layer
        let margin = discard_margin(&ambient_grid, &ambient.diagnostics.alpha, t_end);
        let clearance = (0..chart_grid.len())
            .map(|j| Ok(ambient_grid.boundary_distance(chart_point(chart.as_ref(), &chart_grid.node(j))?.as_slice())))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        report.values.insert(format!("{prefix}boundary_clearance"), clearance);
        report.values.insert(format!("{prefix}discard_margin"), margin);
        report.diagnostics.insert(format!("{prefix}ambient"), ambient.diagnostics.clone());
        report.diagnostics.insert(format!("{prefix}chart"), on_chart.diagnostics.clone());
        let tag = if level == 0 { "coarse" } else { "refined" };
        ctx.save(report, &format!("{tag}.ambient"), &ambient.u)?;
        ctx.save(report, &format!("{tag}.restricted"), &restricted)?;
        ctx.save(report, &format!("{tag}.chart"), &on_chart.u)?;
        if level + 1 < levels {
            let k = s.refinement.as_ref().map_or(2, |r| r.factor);
            ambient_grid = ambient_grid.refined(k)?;
            chart_grid = chart_grid.refined(k)?;
        }
    }
    if let [coarse, fine] = discrepancies[..] {
        let ratio = fine / coarse;
        report.push(Check::at_most("refinement_ratio", ratio, s.tolerance("refinement_ratio", 1.0)));
        if let Some(&lo) = s.tolerances.get("refinement_ratio_min") {
            report.push(Check::at_least("refinement_ratio_min", ratio, lo));
        }
    }
    Ok(())
}

/// Points `b + N s` with `b` on `M`, `N` a normal frame and `|s| <= depth`.
fn tube_points(m: &Submanifold, count: usize, depth: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    let bases = m.sample_points(count, seed)?;
    let offsets = ball_points(m.codim(), depth, bases.len(), seed + 1);
    bases
        .iter()
        .zip(offsets)
        .map(|(b, s)| {
            let frame = m.tangent_frame(b)?;
            let mut q = b.clone();
            for (n, c) in frame.normal.iter().zip(&s) {
                q += n * *c;
            }
            Ok(q.as_slice().to_vec())
        })
        .collect()
}

/// Extension: the residual of `u = ū(t, q̃) + a|q - q̃|²` under the extended
/// Hamiltonian, for each `a` in the sweep.
fn extend_check(ctx: &Context, report: &mut Report) -> Result<()> {
    let s = &ctx.scenario;
    let ext = s.require(&s.extension, "extension")?;
    let m = s.build_manifold()?;
    let h = s.build_hamiltonian(Some(m.clone()))?;
    let hbar = restrict_hamiltonian(&h, m.clone())?;
    let extended = extend_hamiltonian(&hbar).into_field();
    let Some(OracleSpec::Expr(src)) = &s.exact else {
        return Err(HarnessError::Config("extend_check needs a closed-form `exact` expression".into()));
    };
    let ubar_expr = Expr::parse(src)?;
    let ubar = ManifoldFunction::new(
        m.clone(),
        Arc::new(move |t, q: &Vector| Ok(ubar_expr.eval_scalar(&env_q(q.as_slice(), t))?)),
    );
    if !(ext.depth < m.theta()) {
        return Err(HarnessError::Config(format!(
            "sample depth {} must stay below the tube radius {}",
            ext.depth,
            m.theta()
        )));
    }
    let points = tube_points(&m, ext.points, ext.depth, s.seed)?;
    let horizon = if s.final_time > 0.0 { s.final_time } else { 1.0 };
    let times: Vec<f64> = (1..=ext.times).map(|k| horizon * k as f64 / ext.times as f64).collect();
    report.values.insert("tube_points".into(), points.len() as f64);
    report.values.insert("times".into(), times.len() as f64);
    let tol = s.tolerance("residual", 1e-5);
    for &a in &ext.a {
        let u = extend_function(&ubar, ExtensionParams { a }).as_time_fn();
        let eval = move |t: f64, q: &[f64]| u(t, &vector(q));
        let r = pde_residual(&eval, &extended, &points, &times, ext.step)?;
        report.push(Check::at_most(format!("residual[a={a}]"), r, tol));
    }

    let pairs = s.sampling_plan().pairs(&m)?;
    let mut defect: f64 = 0.0;
    for (q, p) in &pairs {
        defect = defect.max(normal_independence_defect(&extended, &m, q, p)?);
    }
    report.push(Check::at_most("independence_defect", defect, s.tolerance("independence", 1e-10)));

    if let Some(src) = &ext.negative_control {
        let wrong = Expr::parse(src)?;
        let eval = move |t: f64, q: &[f64]| -> hjsub::Result<f64> { Ok(wrong.eval_scalar(&env_q(q, t))?) };
        let r = pde_residual(&eval, &extended, &points, &times, ext.step)?;
        report.push(Check::at_least("negative_control.residual", r, ext.control_factor * tol));
    }
    Ok(())
}

/// Invariance criteria on `M x R^d` and `TM`, plus the drift of flows started on `M`.
fn invariance_report(ctx: &Context, report: &mut Report) -> Result<()> {
    let s = &ctx.scenario;
    let m = s.build_manifold()?;
    let h = s.build_hamiltonian(Some(m.clone()))?;
    let plan = s.sampling_plan();
    let tol = s.tolerance("invariance", 1e-8);
    let rep = check_m_invariance(&h, &m, &plan, tol)?;
    report.values.insert("samples".into(), rep.sample_count as f64);
    report.push(Check::at_most("tangency", rep.max_tangency_residual, tol));
    report.push(Check::at_most("normal_independence", rep.max_normal_independence_residual, tol));

    let tol_tm = s.tolerance("tm", 1e-6);
    let tm = check_tm_invariance(&h, &m, &plan, tol_tm)?;
    report.push(Check::at_most("tm", tm.max_tm_residual.unwrap_or(f64::NAN), tol_tm));

    if let Some(probe) = &s.sampling.probe {
        let (q, p) = (vector(&probe.q), vector(&probe.p));
        let r = tangency_residual(&h, &m, &q, &p)?;
        report.push(Check::at_most("probe.tangency", r, tol));
    }

    if s.sampling.flow_starts > 0 {
        if rep.invariant() {
            let starts: Vec<_> = plan
                .pairs(&m)?
                .into_iter()
                .step_by(plan.sample_count().checked_div(s.sampling.flow_starts).unwrap_or(1).max(1))
                .take(s.sampling.flow_starts)
                .map(|(q, p)| {
                    let pt = m.projector_matrix(&q)? * p;
                    Ok((q, pt))
                })
                .collect::<hjsub::Result<_>>()?;
            let horizon = if s.final_time > 0.0 { s.final_time } else { 1.0 };
            let drift = flow_drift(&h, &m, &starts, horizon, s.sampling.flow_dt)?;
            report.push(Check::at_most("flow_drift", drift, s.tolerance("flow_drift", 1e-6)));
        } else {
            report.notes.push("flow drift not measured: the invariance criteria fail".into());
        }
    }
    Ok(())
}

/// Change of variables: the direct solve against the solve of the pulled-back
/// problem, pushed forward through the chart.
fn chart_equivalence(ctx: &Context, report: &mut Report) -> Result<()> {
    let s = &ctx.scenario;
    let h = s.build_hamiltonian(None)?;
    let chart = s.build_chart(None)?;
    let u0 = s.initial_expr()?;
    let params = s.solver.params();
    let t_end = s.final_time;
    let exact = match &s.exact {
        Some(OracleSpec::Expr(src)) => Some(Expr::parse(src)?),
        _ => None,
    };
    let pulled_h = pullback_hamiltonian(&h, chart.clone())?;
    let mut grid = ctx.grid(s.require(&s.ambient_grid, "ambient_grid")?)?;
    let mut xgrid = match &s.chart_grid {
        Some(g) => ctx.grid(g)?,
        None => grid.clone(),
    };
    let levels = if s.refinement.is_some() { 2 } else { 1 };
    let mut interior = Vec::new();
    for level in 0..levels {
        let prefix = if level == 0 { String::new() } else { "refined.".to_string() };
        let direct = solve_cp(&grid, &h, datum(&u0), t_end, &params)?;
        let u0_pulled = |x: &[f64]| datum(&u0)(chart.to_ambient(&vector(x)).as_slice());
        let pulled = solve_cp(&xgrid, &pulled_h, u0_pulled, t_end, &params)?;
        let margin = discard_margin(&grid, &direct.diagnostics.alpha, t_end);
        let xmargin = discard_margin(&xgrid, &pulled.diagnostics.alpha, t_end);

        let (mut all, mut inner, mut err_direct, mut err_pulled) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let f = exact.as_ref().map(closed_form);
        for j in 0..grid.len() {
            let q = grid.node(j);
            let Some(x) = chart.to_chart(&vector(&q)) else {
                continue;
            };
            let Ok(pushed) = pulled.u.interpolate(x.as_slice()) else {
                continue;
            };
            let gap = (direct.u.values[j] - pushed).abs();
            all = all.max(gap);
            if grid.boundary_distance(&q) > margin && xgrid.boundary_distance(x.as_slice()) > xmargin {
                inner = inner.max(gap);
                if let Some(f) = &f {
                    let reference = f(t_end, &q);
                    err_direct = err_direct.max((direct.u.values[j] - reference).abs());
                    err_pulled = err_pulled.max((pushed - reference).abs());
                }
            }
        }
        let dx = grid.max_spacing();
        interior.push(inner);
        report.values.insert(format!("{prefix}dx"), dx);
        report.values.insert(format!("{prefix}interior_discrepancy"), inner);
        if let Some(&tol) = s.tolerances.get("discrepancy") {
            report.push(Check::at_most(format!("{prefix}discrepancy"), all, tol));
        }
        if let Some(&c) = s.tolerances.get("discrepancy_per_dx") {
            report.push(Check::at_most(format!("{prefix}discrepancy_per_dx"), inner / dx, c));
        }
        if f.is_some() {
            let tol = s.tolerance("exact", f64::INFINITY);
            report.push(Check::at_most(format!("{prefix}direct_error"), err_direct, tol));
            report.push(Check::at_most(format!("{prefix}pullback_error"), err_pulled, tol));
        }
        report.diagnostics.insert(format!("{prefix}direct"), direct.diagnostics.clone());
        report.diagnostics.insert(format!("{prefix}pullback"), pulled.diagnostics.clone());
        let tag = if level == 0 { "coarse" } else { "refined" };
        ctx.save(report, &format!("{tag}.direct"), &direct.u)?;
        ctx.save(report, &format!("{tag}.pullback"), &pulled.u)?;
        if level + 1 < levels {
            let k = s.refinement.as_ref().map_or(2, |r| r.factor);
            grid = grid.refined(k)?;
            xgrid = xgrid.refined(k)?;
        }
    }
    if let [coarse, fine] = interior[..] {
        let ratio = if coarse == 0.0 && fine == 0.0 { 0.0 } else { fine / coarse };
        report.push(Check::at_most("refinement_ratio", ratio, s.tolerance("refinement_ratio", 1.0)));
    }
    Ok(())
}

/// Observed orders against a closed form or the Hopf-Lax formula, and
/// monotonicity spot checks on the base grid.
fn convergence(ctx: &Context, report: &mut Report) -> Result<()> {
    let s = &ctx.scenario;
    let h = s.build_hamiltonian(None)?;
    let u0 = s.initial_expr()?;
    let params = s.solver.params();
    let t_end = s.final_time;
    let refinement = s.require(&s.refinement, "refinement")?;
    let base = ctx.grid(s.require(&s.ambient_grid, "ambient_grid")?)?;
    let mut grids = vec![base.clone()];
    for _ in 1..refinement.levels {
        let next = grids.last().expect("non-empty").refined(refinement.factor)?;
        grids.push(next);
    }

    // the base nodes are nodes of every refined grid; errors are measured there
    let reference: Vec<f64> = {
        let oracle = s.require(&s.exact, "exact")?;
        let nodes: Vec<Vec<f64>> = (0..base.len()).map(|j| base.node(j)).collect();
        match oracle {
            OracleSpec::Expr(src) => {
                let e = Expr::parse(src)?;
                let f = closed_form(&e);
                nodes.iter().map(|q| f(t_end, q)).collect()
            }
            OracleSpec::HopfLax { speed, resolution } => {
                let g = datum(&u0);
                nodes.iter().map(|q| hopf_lax_min(&g, q, speed * t_end, *resolution)).collect()
            }
        }
    };
    let diagnostics = std::sync::Mutex::new(Vec::new());
    let rows = convergence_study(&grids, |g| {
        let sol = solve_cp(g, &h, datum(&u0), t_end, &params)?;
        let margin = discard_margin(g, &sol.diagnostics.alpha, t_end);
        let mut err: f64 = 0.0;
        for (j, r) in reference.iter().enumerate() {
            let q = base.node(j);
            if g.boundary_distance(&q) > margin {
                err = err.max((sol.u.interpolate(&q)? - r).abs());
            }
        }
        diagnostics.lock().expect("not poisoned").push(sol.diagnostics);
        Ok(err)
    })?;
    for (k, d) in diagnostics.into_inner().expect("not poisoned").into_iter().enumerate() {
        report.diagnostics.insert(format!("level{k}"), d);
    }
    let tol = s.tolerance("order", 0.8);
    for (k, row) in rows.iter().enumerate() {
        match row.order {
            Some(order) => report.push(Check::at_least(format!("order[{k}]"), order, tol)),
            None if row.saturated => report.notes.push(format!("level {k}: error at round-off, no order")),
            None => {}
        }
    }
    if let Some(&tol) = s.tolerances.get("finest_error") {
        report.push(Check::at_most("finest_error", rows.last().expect("non-empty").error, tol));
    }
    report.tables.insert("convergence".into(), rows);

    if s.sampling.monotonicity_pairs > 0 {
        let r = monotonicity_check(&base, &h, params.cfl, s.sampling.monotonicity_pairs, s.seed)?;
        report.values.insert("monotonicity.pairs".into(), r.pairs as f64);
        report.values.insert("monotonicity.max_violation".into(), r.max_violation);
        report.push(Check::at_most("monotonicity.violations", r.violations as f64, 0.0));
    }
    Ok(())
}
