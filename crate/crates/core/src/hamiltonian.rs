//! Hamiltonian functions on `T R^d ≅ R^d x R^d`, their flows, and the
//! invariance criteria for `M x R^d` and `TM`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{Chart, Submanifold};
use crate::sampling::{ball_points, Halton};
use crate::{Matrix, Vector};

pub type ScalarFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type DomainFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A scalar function `H(q, p)` with optional closed-form gradients. Missing
/// gradients fall back to central differences with steps
/// `1e-6 (1 + ‖q‖)` and `1e-6 (1 + ‖p‖)`.
#[derive(Clone)]
pub struct HamiltonianField {
    name: String,
    dim: usize,
    eval: ScalarFn,
    grad_q: Option<GradientFn>,
    grad_p: Option<GradientFn>,
    domain: Option<DomainFn>,
}

impl fmt::Debug for HamiltonianField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_grad_q", &self.grad_q.is_some())
            .field("analytic_grad_p", &self.grad_p.is_some())
            .finish()
    }
}

impl HamiltonianField {
    pub fn new(name: impl Into<String>, dim: usize, eval: ScalarFn) -> Self {
        Self { name: name.into(), dim, eval, grad_q: None, grad_p: None, domain: None }
    }

    pub fn with_grad_q(mut self, g: GradientFn) -> Self {
        self.grad_q = Some(g);
        self
    }

    pub fn with_grad_p(mut self, g: GradientFn) -> Self {
        self.grad_p = Some(g);
        self
    }

    /// Restrict the admissible positions; outside, [`Self::check_domain`] fails.
    pub fn with_domain(mut self, domain: DomainFn) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_gradients(&self) -> bool {
        self.grad_q.is_some() && self.grad_p.is_some()
    }

    pub fn value(&self, q: &[f64], p: &[f64]) -> f64 {
        (self.eval)(q, p)
    }

    pub fn check_domain(&self, q: &[f64]) -> Result<()> {
        check_dim(self.dim, q.len())?;
        match &self.domain {
            Some(inside) if !inside(q) => Err(Error::ChartDomain { point: q.to_vec() }),
            _ => Ok(()),
        }
    }

    pub fn grad_q(&self, q: &[f64], p: &[f64]) -> Vec<f64> {
        match &self.grad_q {
            Some(g) => g(q, p),
            None => self.grad_q_fd(q, p),
        }
    }

    pub fn grad_p(&self, q: &[f64], p: &[f64]) -> Vec<f64> {
        match &self.grad_p {
            Some(g) => g(q, p),
            None => self.grad_p_fd(q, p),
        }
    }

    pub fn grad_q_fd(&self, q: &[f64], p: &[f64]) -> Vec<f64> {
        let h = 1e-6 * (1.0 + norm(q));
        central_gradient(q, h, |x| self.value(x, p))
    }

    pub fn grad_p_fd(&self, q: &[f64], p: &[f64]) -> Vec<f64> {
        let h = 1e-6 * (1.0 + norm(p));
        central_gradient(p, h, |x| self.value(q, x))
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn central_gradient(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            work[i] = x[i] + h;
            let plus = f(&work);
            work[i] = x[i] - h;
            let minus = f(&work);
            work[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// The planar rotation generator `J = [[0, -1], [1, 0]]` acting on the first
/// two coordinates.
pub fn rotate_quarter(q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; q.len()];
    out[0] = -q[1];
    out[1] = q[0];
    out
}

/// Built-in Hamiltonians.
pub mod catalog {
    use super::*;

    /// `‖p‖² / 2`.
    pub fn free(dim: usize) -> HamiltonianField {
        HamiltonianField::new("free", dim, Arc::new(|_q, p| 0.5 * p.iter().map(|v| v * v).sum::<f64>()))
            .with_grad_q(Arc::new(|q, _p| vec![0.0; q.len()]))
            .with_grad_p(Arc::new(|_q, p| p.to_vec()))
    }

    /// `⟨p, J q⟩`: transport along rotations of the first coordinate plane.
    pub fn rotation(dim: usize) -> Result<HamiltonianField> {
        if dim < 2 {
            return Err(Error::InvalidArgument("rotation Hamiltonian needs d >= 2".into()));
        }
        Ok(HamiltonianField::new("rotation", dim, Arc::new(|q, p| p[0] * -q[1] + p[1] * q[0]))
            // ∇_q ⟨p, Jq⟩ = Jᵀ p
            .with_grad_q(Arc::new(|q, p| {
                let mut g = vec![0.0; q.len()];
                g[0] = p[1];
                g[1] = -p[0];
                g
            }))
            .with_grad_p(Arc::new(|q, _p| rotate_quarter(q))))
    }

    /// `⟨c, p⟩`.
    pub fn transport(c: Vec<f64>) -> HamiltonianField {
        let dim = c.len();
        let cc = c.clone();
        HamiltonianField::new("transport", dim, Arc::new(move |_q, p| cc.iter().zip(p).map(|(a, b)| a * b).sum()))
            .with_grad_q(Arc::new(|q, _p| vec![0.0; q.len()]))
            .with_grad_p(Arc::new(move |_q, _p| c.clone()))
    }

    /// `‖p‖`; the gradient in `p` is taken as `0` at `p = 0`.
    pub fn abs(dim: usize) -> HamiltonianField {
        HamiltonianField::new("abs", dim, Arc::new(|_q, p| norm(p)))
            .with_grad_q(Arc::new(|q, _p| vec![0.0; q.len()]))
            .with_grad_p(Arc::new(|_q, p| {
                let n = norm(p);
                if n == 0.0 {
                    vec![0.0; p.len()]
                } else {
                    p.iter().map(|v| v / n).collect()
                }
            }))
    }

    /// `‖Π_{q̃} p‖² / 2` with `q̃ = π_M(q)`. Evaluates to NaN outside the tube.
    pub fn tangent_kinetic(manifold: Arc<Submanifold>) -> HamiltonianField {
        let dim = manifold.ambient_dim();
        let m1 = manifold.clone();
        let m2 = manifold.clone();
        let project = move |m: &Submanifold, q: &[f64], p: &[f64]| -> Option<Vector> {
            let qv = Vector::from_column_slice(q);
            let foot = m.closest_point(&qv).ok()?;
            Some(m.projector_field(&foot).ok()? * Vector::from_column_slice(p))
        };
        let project2 = project;
        let m3 = manifold.clone();
        HamiltonianField::new(
            format!("tangent_kinetic({})", manifold.name()),
            dim,
            Arc::new(move |q, p| project(&m1, q, p).map_or(f64::NAN, |v| 0.5 * v.norm_squared())),
        )
        .with_grad_p(Arc::new(move |q, p| {
            project2(&m2, q, p).map_or_else(|| vec![f64::NAN; p.len()], |v| v.as_slice().to_vec())
        }))
        .with_domain(Arc::new(move |q| m3.closest_point(&Vector::from_column_slice(q)).is_ok()))
    }
}

/// Phase-space state `(q, p)` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl FlowState {
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: f64) -> Self {
        Self { q, p, t }
    }

    fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|v| v.is_finite())
    }
}

/// `X_H(q, p) = (∇_p H, -∇_q H)`.
pub fn hamiltonian_vector_field(h: &HamiltonianField, s: &FlowState) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(h.dim(), s.q.len())?;
    check_dim(h.dim(), s.p.len())?;
    let dq = h.grad_p(&s.q, &s.p);
    let dp: Vec<f64> = h.grad_q(&s.q, &s.p).into_iter().map(|v| -v).collect();
    if dq.iter().chain(&dp).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient { q: s.q.clone(), p: s.p.clone() });
    }
    Ok((dq, dp))
}

fn axpy(base: &[f64], k: &[f64], a: f64) -> Vec<f64> {
    base.iter().zip(k).map(|(b, v)| b + a * v).collect()
}

/// Classical fourth-order Runge-Kutta integration of `X_H` from `s0.t` to
/// `t_end`. The last step is shortened to land on `t_end`. Returns every state,
/// starting with `s0`.
pub fn integrate_flow(h: &HamiltonianField, s0: &FlowState, t_end: f64, dt: f64) -> Result<Vec<FlowState>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if t_end < s0.t {
        return Err(Error::InvalidArgument(format!("t_end = {t_end} precedes the initial time {}", s0.t)));
    }
    let mut out = vec![s0.clone()];
    let mut s = s0.clone();
    while s.t < t_end {
        let step = dt.min(t_end - s.t);
        let at = |q: Vec<f64>, p: Vec<f64>| FlowState { q, p, t: s.t };
        let (k1q, k1p) = hamiltonian_vector_field(h, &s)?;
        let (k2q, k2p) = hamiltonian_vector_field(h, &at(axpy(&s.q, &k1q, step / 2.0), axpy(&s.p, &k1p, step / 2.0)))?;
        let (k3q, k3p) = hamiltonian_vector_field(h, &at(axpy(&s.q, &k2q, step / 2.0), axpy(&s.p, &k2p, step / 2.0)))?;
        let (k4q, k4p) = hamiltonian_vector_field(h, &at(axpy(&s.q, &k3q, step), axpy(&s.p, &k3p, step)))?;
        let combine = |x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
            (0..x.len()).map(|i| x[i] + step / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i])).collect()
        };
        let next = FlowState {
            q: combine(&s.q, &k1q, &k2q, &k3q, &k4q),
            p: combine(&s.p, &k1p, &k2p, &k3p, &k4p),
            // land exactly on t_end on the final step
            t: if step < dt { t_end } else { s.t + step },
        };
        if !next.is_finite() {
            return Err(Error::StepRejected { t: next.t });
        }
        out.push(next.clone());
        s = next;
    }
    Ok(out)
}

/// Where to evaluate the invariance criteria: base points on `M` and momenta
/// from the ball of radius `p_max`, both from fixed Halton sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub base_points: usize,
    pub momenta_per_point: usize,
    pub p_max: f64,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self { base_points: 64, momenta_per_point: 16, p_max: 5.0, seed: 0 }
    }
}

impl SamplingPlan {
    pub fn sample_count(&self) -> usize {
        self.base_points * self.momenta_per_point
    }

    /// `(q, p)` pairs; `q ∈ M`, `p` in the momentum ball.
    pub fn pairs(&self, manifold: &Submanifold) -> Result<Vec<(Vector, Vector)>> {
        let bases = manifold.sample_points(self.base_points, self.seed)?;
        let momenta = ball_points(manifold.ambient_dim(), self.p_max, self.momenta_per_point, self.seed + 1);
        Ok(bases.iter().flat_map(|q| momenta.iter().map(move |p| (q.clone(), Vector::from_column_slice(p)))).collect())
    }
}

/// Residuals of the invariance criteria over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    /// `sup ‖Π_q⊥ ∇_p H(q, p)‖`.
    pub max_tangency_residual: f64,
    /// `sup |H(q, p) - H(q, Π_q p)|`.
    pub max_normal_independence_residual: f64,
    /// `sup ‖(I - Π_q) ∇_q H(q, p) + h_q(∇_p H(q, p), p)‖` over tangent `p`.
    pub max_tm_residual: Option<f64>,
    pub sample_count: usize,
    pub tolerance: f64,
    pub tangency_ok: bool,
    pub independence_ok: bool,
    pub tm_ok: Option<bool>,
}

impl InvarianceReport {
    /// Whether every filled criterion holds at the report tolerance.
    pub fn invariant(&self) -> bool {
        self.tangency_ok && self.independence_ok && self.tm_ok.unwrap_or(true)
    }
}

/// `|H(q, p) - H(q, Π_q p)|`.
pub fn normal_independence_defect(h: &HamiltonianField, manifold: &Submanifold, q: &Vector, p: &Vector) -> Result<f64> {
    let proj = manifold.projector_matrix(q)?;
    check_dim(h.dim(), p.len())?;
    let pt = &proj * p;
    Ok((h.value(q.as_slice(), p.as_slice()) - h.value(q.as_slice(), pt.as_slice())).abs())
}

/// `‖Π_q⊥ ∇_p H(q, p)‖`.
pub fn tangency_residual(h: &HamiltonianField, manifold: &Submanifold, q: &Vector, p: &Vector) -> Result<f64> {
    let proj = manifold.projector_matrix(q)?;
    let g = Vector::from_vec(h.grad_p(q.as_slice(), p.as_slice()));
    Ok((&g - &proj * &g).norm())
}

/// `‖(I - Π_q)∇_q H + h_q(Π_q ∇_p H, p)‖` for tangent `p`. The first slot of
/// `h` receives the tangent part of `∇_p H` so that the residual stays
/// defined when the tangency criterion fails; that failure is reported by
/// [`tangency_residual`].
pub fn tm_residual(h: &HamiltonianField, manifold: &Submanifold, q: &Vector, p: &Vector) -> Result<f64> {
    let proj = manifold.projector_matrix(q)?;
    let d = manifold.ambient_dim();
    let gq = Vector::from_vec(h.grad_q(q.as_slice(), p.as_slice()));
    let gp = &proj * Vector::from_vec(h.grad_p(q.as_slice(), p.as_slice()));
    let normal_part = (Matrix::identity(d, d) - &proj) * gq;
    let curvature = manifold.projector_derivative(q, &gp)? * p;
    Ok((normal_part + curvature).norm())
}

fn max_of(values: impl ParallelIterator<Item = Result<f64>>) -> Result<f64> {
    values.try_fold(|| 0.0f64, |acc, v| Ok(acc.max(v?))).try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Both `M x R^d` invariance criteria: tangency of `∇_p H` and independence of
/// `H` from normal momenta, evaluated independently.
pub fn check_m_invariance(
    h: &HamiltonianField,
    manifold: &Submanifold,
    plan: &SamplingPlan,
    tolerance: f64,
) -> Result<InvarianceReport> {
    check_dim(manifold.ambient_dim(), h.dim())?;
    let pairs = plan.pairs(manifold)?;
    let tangency = max_of(pairs.par_iter().map(|(q, p)| tangency_residual(h, manifold, q, p)))?;
    let independence = max_of(pairs.par_iter().map(|(q, p)| normal_independence_defect(h, manifold, q, p)))?;
    Ok(InvarianceReport {
        max_tangency_residual: tangency,
        max_normal_independence_residual: independence,
        max_tm_residual: None,
        sample_count: pairs.len(),
        tolerance,
        tangency_ok: tangency <= tolerance,
        independence_ok: independence <= tolerance,
        tm_ok: None,
    })
}

/// The `TM` invariance criterion over tangent momenta `Π_q p`, together with
/// the tangency residual on the same samples.
pub fn check_tm_invariance(
    h: &HamiltonianField,
    manifold: &Submanifold,
    plan: &SamplingPlan,
    tolerance: f64,
) -> Result<InvarianceReport> {
    check_dim(manifold.ambient_dim(), h.dim())?;
    let pairs: Vec<(Vector, Vector)> = plan
        .pairs(manifold)?
        .into_iter()
        .map(|(q, p)| {
            let pt = manifold.projector_matrix(&q)? * p;
            Ok((q, pt))
        })
        .collect::<Result<_>>()?;
    let tangency = max_of(pairs.par_iter().map(|(q, p)| tangency_residual(h, manifold, q, p)))?;
    let independence = max_of(pairs.par_iter().map(|(q, p)| normal_independence_defect(h, manifold, q, p)))?;
    let tm = max_of(pairs.par_iter().map(|(q, p)| tm_residual(h, manifold, q, p)))?;
    Ok(InvarianceReport {
        max_tangency_residual: tangency,
        max_normal_independence_residual: independence,
        max_tm_residual: Some(tm),
        sample_count: pairs.len(),
        tolerance,
        tangency_ok: tangency <= tolerance,
        independence_ok: independence <= tolerance,
        tm_ok: Some(tm <= tolerance),
    })
}

/// Largest distance from `M` reached by flows started on `M`.
pub fn flow_drift(
    h: &HamiltonianField,
    manifold: &Submanifold,
    starts: &[(Vector, Vector)],
    t_end: f64,
    dt: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (q, p) in starts {
        let traj = integrate_flow(h, &FlowState::new(q.as_slice().to_vec(), p.as_slice().to_vec(), 0.0), t_end, dt)?;
        for s in &traj {
            worst = worst.max(manifold.distance(&Vector::from_column_slice(&s.q))?);
        }
    }
    Ok(worst)
}

/// Region over which the growth bounds are sampled: `‖q - center‖ ≤ q_radius`,
/// `‖p‖ ≤ p_radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRegion {
    pub q_center: Vec<f64>,
    pub q_radius: f64,
    pub p_radius: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Largest observed ratios `‖d²H‖ / C`, `‖∇_p H‖ / (C (1 + ‖p‖))` and
/// `|H| / (C (1 + ‖p‖²))`. Sampling only; says nothing off the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub constant: f64,
    pub max_hessian_ratio: f64,
    pub max_grad_p_ratio: f64,
    pub max_value_ratio: f64,
    /// All ratios at most `1 + GROWTH_SLACK`.
    pub satisfied: bool,
}

/// Relative allowance for finite-difference noise in the Hessian ratio.
pub const GROWTH_SLACK: f64 = 1e-6;

fn hessian_norm(h: &HamiltonianField, q: &[f64], p: &[f64]) -> f64 {
    let d = h.dim();
    let z: Vec<f64> = q.iter().chain(p).copied().collect();
    let grad = |z: &[f64]| -> Vec<f64> {
        let (q, p) = z.split_at(d);
        h.grad_q(q, p).into_iter().chain(h.grad_p(q, p)).collect()
    };
    let step = 1e-4 * (1.0 + norm(&z));
    let mut hess = Matrix::zeros(2 * d, 2 * d);
    let mut work = z.clone();
    for j in 0..2 * d {
        work[j] = z[j] + step;
        let plus = grad(&work);
        work[j] = z[j] - step;
        let minus = grad(&work);
        work[j] = z[j];
        for i in 0..2 * d {
            hess[(i, j)] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    let sym = (&hess + hess.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Sampling check of the growth assumptions `‖d²H‖ ≤ C`,
/// `‖∇_p H‖ ≤ C (1 + ‖p‖)`, `|H| ≤ C (1 + ‖p‖²)`.
pub fn check_growth_assumptions(h: &HamiltonianField, region: &GrowthRegion, constant: f64) -> GrowthReport {
    let d = h.dim();
    let mut qs = ball_points(d, region.q_radius, region.samples, region.seed);
    let mut ps = ball_points(d, region.p_radius, region.samples, region.seed + 1);
    // include the extreme radii, where the bounds are tightest
    if let Some(u) = Halton::new(d, region.seed + 2).next() {
        let dir = Vector::from_iterator(d, u.iter().map(|s| s - 0.5 + 1e-3)).normalize();
        qs.push((&dir * region.q_radius).as_slice().to_vec());
        ps.push((&dir * region.p_radius).as_slice().to_vec());
    }
    let (mut hr, mut gr, mut vr) = (0.0f64, 0.0f64, 0.0f64);
    for (dq, p) in qs.iter().zip(&ps) {
        let q: Vec<f64> = dq.iter().zip(&region.q_center).map(|(a, b)| a + b).collect();
        let pn = norm(p);
        hr = hr.max(hessian_norm(h, &q, p) / constant);
        gr = gr.max(norm(&h.grad_p(&q, p)) / (constant * (1.0 + pn)));
        vr = vr.max(h.value(&q, p).abs() / (constant * (1.0 + pn * pn)));
    }
    let limit = 1.0 + GROWTH_SLACK;
    GrowthReport {
        constant,
        max_hessian_ratio: hr,
        max_grad_p_ratio: gr,
        max_value_ratio: vr,
        satisfied: hr <= limit && gr <= limit && vr <= limit,
    }
}

/// `Ĥ(x, p) = H(φ(x), dφ(x)⁻ᵀ p)`: the Hamiltonian for which `û = u ∘ φ`
/// solves the equation whenever `u` does. `∇_p Ĥ = dφ(x)⁻¹ ∇_p H` in closed
/// form when `H` has it; `∇_x Ĥ` by differences.
pub fn pullback_hamiltonian(h: &HamiltonianField, chart: Arc<dyn Chart>) -> Result<HamiltonianField> {
    check_dim(h.dim(), chart.ambient_dim())?;
    let d = h.dim();
    let ev = {
        let (h, chart) = (h.clone(), chart.clone());
        move |x: &[f64], p: &[f64]| -> f64 {
            let xv = Vector::from_column_slice(x);
            let Ok(inv) = chart.inverse_jacobian(&xv) else {
                return f64::NAN;
            };
            let q = chart.to_ambient(&xv);
            let pp = inv.transpose() * Vector::from_column_slice(p);
            h.value(q.as_slice(), pp.as_slice())
        }
    };
    let gp = {
        let (h, chart) = (h.clone(), chart.clone());
        move |x: &[f64], p: &[f64]| -> Vec<f64> {
            let xv = Vector::from_column_slice(x);
            let Ok(inv) = chart.inverse_jacobian(&xv) else {
                return vec![f64::NAN; x.len()];
            };
            let q = chart.to_ambient(&xv);
            let pp = inv.transpose() * Vector::from_column_slice(p);
            let g = Vector::from_vec(h.grad_p(q.as_slice(), pp.as_slice()));
            (inv * g).as_slice().to_vec()
        }
    };
    let domain = {
        let chart = chart.clone();
        move |x: &[f64]| chart.contains(&Vector::from_column_slice(x))
    };
    let mut out = HamiltonianField::new(format!("pullback({}, {})", h.name(), chart.name()), d, Arc::new(ev))
        .with_domain(Arc::new(domain));
    if h.grad_p.is_some() {
        out = out.with_grad_p(Arc::new(gp));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::catalog as manifolds;
    use crate::geometry::chart::{LinearChart, PolarChart};
    use std::f64::consts::PI;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn vector_field_examples() {
        let free = catalog::free(2);
        let (dq, dp) = hamiltonian_vector_field(&free, &FlowState::new(vec![1.0, 2.0], vec![3.0, 4.0], 0.0)).unwrap();
        assert_eq!(dq, vec![3.0, 4.0]);
        assert_eq!(dp, vec![0.0, 0.0]);

        let rot = catalog::rotation(2).unwrap();
        let s = FlowState::new(vec![1.0, 0.0], vec![0.0, 1.0], 0.0);
        let (dq, dp) = hamiltonian_vector_field(&rot, &s).unwrap();
        assert!(close(&dq, &[0.0, 1.0], 0.0));
        assert!(close(&dp, &[-1.0, 0.0], 0.0));
        // the analytic gradients agree with differences
        assert!(close(&rot.grad_q(&s.q, &s.p), &rot.grad_q_fd(&s.q, &s.p), 1e-8));
        assert!(close(&rot.grad_p(&s.q, &s.p), &rot.grad_p_fd(&s.q, &s.p), 1e-8));

        let constant = HamiltonianField::new("const", 2, Arc::new(|_, _| 3.0));
        let (dq, dp) = hamiltonian_vector_field(&constant, &s).unwrap();
        assert!(close(&dq, &[0.0, 0.0], 0.0) && close(&dp, &[0.0, 0.0], 0.0));
    }

    #[test]
    fn non_finite_gradient_is_reported() {
        let bad = HamiltonianField::new("bad", 1, Arc::new(|_, p| p[0].sqrt()));
        let err = hamiltonian_vector_field(&bad, &FlowState::new(vec![0.0], vec![-1.0], 0.0)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { .. }));
    }

    #[test]
    fn catalog_gradients_agree_with_differences() {
        let circle = Arc::new(manifolds::circle(1.0).unwrap());
        let fields = vec![
            catalog::free(2),
            catalog::rotation(2).unwrap(),
            catalog::transport(vec![0.3, -1.2]),
            catalog::abs(2),
            catalog::tangent_kinetic(circle),
        ];
        for (i, (q, p)) in ball_points(2, 0.4, 20, 9).iter().zip(ball_points(2, 3.0, 20, 11)).enumerate() {
            let q: Vec<f64> = vec![1.0 + q[0], q[1]];
            for h in &fields {
                let a = h.grad_p(&q, &p);
                let f = h.grad_p_fd(&q, &p);
                let scale = 1.0 + norm(&a);
                assert!(close(&a, &f, 1e-5 * scale), "{} sample {i}: {a:?} vs {f:?}", h.name());
                let a = h.grad_q(&q, &p);
                let f = h.grad_q_fd(&q, &p);
                assert!(close(&a, &f, 1e-5 * (1.0 + norm(&a))), "{} sample {i}", h.name());
            }
        }
    }

    #[test]
    fn rk4_rotates_quarter_turn() {
        let rot = catalog::rotation(2).unwrap();
        let traj = integrate_flow(&rot, &FlowState::new(vec![1.0, 0.0], vec![0.0, 1.0], 0.0), PI / 2.0, 1e-3).unwrap();
        let last = traj.last().unwrap();
        assert_eq!(last.t, PI / 2.0);
        assert!(close(&last.q, &[0.0, 1.0], 1e-6));
    }

    #[test]
    fn rk4_is_exact_for_free_particle() {
        let free = catalog::free(2);
        let traj = integrate_flow(&free, &FlowState::new(vec![1.0, -1.0], vec![0.5, 2.0], 0.0), 1.3, 0.1).unwrap();
        let last = traj.last().unwrap();
        assert!(close(&last.q, &[1.0 + 1.3 * 0.5, -1.0 + 1.3 * 2.0], 1e-13));
    }

    #[test]
    fn rk4_error_ratio_on_halving_is_sixteen() {
        let rot = catalog::rotation(2).unwrap();
        let s0 = FlowState::new(vec![1.0, 0.0], vec![0.0, 1.0], 0.0);
        let err = |dt: f64| {
            let last = integrate_flow(&rot, &s0, PI / 2.0, dt).unwrap().pop().unwrap();
            ((last.q[0] - 0.0).powi(2) + (last.q[1] - 1.0).powi(2)).sqrt()
        };
        let ratio = err(PI / 2.0 / 8.0) / err(PI / 2.0 / 16.0);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
        assert!(ratio.log2() >= 3.5);
    }

    #[test]
    fn integrate_flow_rejects_bad_arguments() {
        let free = catalog::free(1);
        let s0 = FlowState::new(vec![0.0], vec![1.0], 0.0);
        assert!(integrate_flow(&free, &s0, 1.0, 0.0).is_err());
        assert!(integrate_flow(&free, &s0, -1.0, 0.1).is_err());
        let blowup = HamiltonianField::new("blowup", 1, Arc::new(|_, p| p[0].powi(4)));
        let s0 = FlowState::new(vec![0.0], vec![1e80], 0.0);
        assert!(matches!(
            integrate_flow(&blowup, &s0, 1.0, 0.5),
            Err(Error::StepRejected { .. } | Error::NonFiniteGradient { .. })
        ));
    }

    #[test]
    fn energy_is_conserved_along_catalog_flows() {
        let circle = Arc::new(manifolds::circle(1.0).unwrap());
        let fields = vec![
            catalog::free(2),
            catalog::rotation(2).unwrap(),
            catalog::transport(vec![1.0, 0.5]),
            catalog::abs(2),
            catalog::tangent_kinetic(circle),
        ];
        let s0 = FlowState::new(vec![1.0, 0.0], vec![0.3, 0.8], 0.0);
        for h in &fields {
            let traj = integrate_flow(h, &s0, 1.0, 1e-3).unwrap();
            let e0 = h.value(&s0.q, &s0.p);
            let drift = traj.iter().map(|s| (h.value(&s.q, &s.p) - e0).abs()).fold(0.0, f64::max);
            assert!(drift <= 1e-6, "{}: drift {drift}", h.name());
        }
    }

    #[test]
    fn m_invariance_examples() {
        let circle = manifolds::circle(1.0).unwrap();
        let plan = SamplingPlan::default();
        let rot = check_m_invariance(&catalog::rotation(2).unwrap(), &circle, &plan, 1e-9).unwrap();
        assert!(rot.max_tangency_residual <= 1e-9 && rot.max_normal_independence_residual <= 1e-9);
        assert!(rot.invariant());

        let free = catalog::free(2);
        let q = Vector::from_vec(vec![0.0, 1.0]);
        let p = Vector::from_vec(vec![0.0, 1.0]);
        assert!((tangency_residual(&free, &circle, &q, &p).unwrap() - 1.0).abs() < 1e-12);
        assert!((normal_independence_defect(&free, &circle, &q, &p).unwrap() - 0.5).abs() < 1e-12);
        let report = check_m_invariance(&free, &circle, &plan, 1e-9).unwrap();
        assert!(!report.tangency_ok && !report.independence_ok);

        // flat M and a Hamiltonian built from tangential momenta only
        let flat = manifolds::flat(1, 2).unwrap();
        let h = HamiltonianField::new("f", 2, Arc::new(|q, p| (q[0] * p[0]).sin() + p[0] * p[0]));
        let report = check_m_invariance(&h, &flat, &plan, 1e-9).unwrap();
        assert!(report.max_tangency_residual <= 1e-9 && report.max_normal_independence_residual <= 1e-9);
    }

    #[test]
    fn tangent_momenta_have_no_defect() {
        let circle = manifolds::circle(1.0).unwrap();
        let free = catalog::free(2);
        for q in circle.sample_points(10, 3).unwrap() {
            let p = circle.projector_matrix(&q).unwrap() * Vector::from_vec(vec![0.7, -2.0]);
            assert!(normal_independence_defect(&free, &circle, &q, &p).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn tm_invariance_examples() {
        let plan = SamplingPlan::default();
        let flat = manifolds::flat(1, 2).unwrap();
        let r = check_tm_invariance(&catalog::free(2), &flat, &plan, 1e-9).unwrap();
        assert!(r.max_tm_residual.unwrap() <= 1e-9);

        let circle = manifolds::circle(1.0).unwrap();
        let r = check_tm_invariance(&catalog::rotation(2).unwrap(), &circle, &plan, 1e-6).unwrap();
        assert!(r.max_tm_residual.unwrap() <= 1e-6, "{r:?}");

        let r = check_tm_invariance(&catalog::transport(vec![1.0, 0.0]), &circle, &plan, 1e-6).unwrap();
        assert!(r.max_tangency_residual > 0.1);
        assert!(!r.invariant());
    }

    #[test]
    fn growth_examples() {
        let region = GrowthRegion { q_center: vec![0.0, 0.0], q_radius: 2.0, p_radius: 5.0, samples: 200, seed: 0 };
        let free = check_growth_assumptions(&catalog::free(2), &region, 1.0);
        assert!(free.satisfied, "{free:?}");
        let rot = check_growth_assumptions(&catalog::rotation(2).unwrap(), &region, 2.0);
        assert!(rot.satisfied, "{rot:?}");
        let quartic = HamiltonianField::new("quartic", 2, Arc::new(|_, p| norm(p).powi(4)));
        let region = GrowthRegion { p_radius: 10.0, ..region };
        let q = check_growth_assumptions(&quartic, &region, 1.0);
        assert!(!q.satisfied && q.max_grad_p_ratio > 10.0);
    }

    #[test]
    fn pullback_examples() {
        let rot = catalog::rotation(2).unwrap();
        let ident = pullback_hamiltonian(&rot, Arc::new(LinearChart::identity(2, 1))).unwrap();
        let (q, p) = ([0.3, -1.1], [2.0, 0.7]);
        assert_eq!(ident.value(&q, &p), rot.value(&q, &p));

        let transport = catalog::transport(vec![1.0, 2.0]);
        let angle = 0.4;
        let chart = LinearChart::rotation(angle);
        let r = chart.matrix().clone();
        let pulled = pullback_hamiltonian(&transport, Arc::new(chart)).unwrap();
        let rq = &r * Vector::from_column_slice(&q);
        let rp = &r * Vector::from_column_slice(&p);
        assert!((pulled.value(&q, &p) - transport.value(rq.as_slice(), rp.as_slice())).abs() < 1e-14);

        // polar chart: the rotation generator becomes the angular momentum
        let polar = pullback_hamiltonian(&rot, Arc::new(PolarChart { radius: 1.0 })).unwrap();
        for (x, p) in [([0.3, 0.0], [1.7, -0.4]), ([2.0, 0.2], [-0.5, 3.0])] {
            assert!((polar.value(&x, &p) - p[0]).abs() < 1e-12);
            assert!(close(&polar.grad_p(&x, &p), &[1.0, 0.0], 1e-12));
        }
        assert!(polar.check_domain(&[0.0, -2.0]).is_err());
    }
}
