//! Embedded submanifolds of `R^d` and their extrinsic operators.
//!
//! For `q ∈ M`, `Π_q` is the orthogonal projector on `T_qM`. Its derivative
//! along a tangent vector gives the second fundamental form
//! `h_q(v, w) = dΠ_q(v) w ∈ (T_qM)^⊥` and, on normal arguments, the Weingarten
//! adjoint `h*_q(a, n) = dΠ_q(a) n ∈ T_qM`. Inside the tube of radius `θ` the
//! closest-point map `π_M` is single valued; the restriction `v(q)` of its
//! differential to `T_{q̃}M` satisfies `v⁻¹(q) p = p - h*_{q̃}(p, q - q̃)`.

pub mod catalog;
pub mod chart;
pub mod constraint;
mod frame;

use std::fmt;
use std::sync::Arc;

use nalgebra::linalg::SVD;

pub use chart::Chart;
pub use constraint::Constraint;
pub use frame::TangentFrame;

use crate::error::{check_dim, Error, Result};
use crate::sampling::Halton;
use crate::tolerances::Tolerances;
use crate::{Matrix, Vector};

/// How the submanifold is described.
#[derive(Clone)]
pub enum Representation {
    /// `M = F⁻¹(0)` for a submersion `F`.
    Implicit(Arc<dyn Constraint>),
    /// `M` covered by adapted charts.
    Parametric(Vec<Arc<dyn Chart>>),
}

/// Maps points of the unit cube `[0, 1]^k` onto the manifold. Used for
/// deterministic sampling and for the coarse cloud that seeds closest-point
/// Newton iterations.
pub type Sampler = Arc<dyn Fn(&[f64]) -> Vector + Send + Sync>;

#[derive(Clone)]
struct SamplerSpec {
    input_dim: usize,
    map: Sampler,
}

/// An embedded submanifold `M ⊂ R^d` together with a constant lower bound
/// `theta` for its tubular radius.
#[derive(Clone)]
pub struct Submanifold {
    name: String,
    dim: usize,
    ambient_dim: usize,
    repr: Representation,
    theta: f64,
    tol: Tolerances,
    sampler: Option<SamplerSpec>,
    cloud: Vec<Vector>,
}

impl fmt::Debug for Submanifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Submanifold")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("ambient_dim", &self.ambient_dim)
            .field("theta", &self.theta)
            .field("cloud", &self.cloud.len())
            .finish()
    }
}

const CLOUD_SIZE: usize = 256;
const MULTISTARTS: usize = 3;

impl Submanifold {
    pub fn implicit(name: impl Into<String>, constraint: Arc<dyn Constraint>, theta: f64) -> Result<Self> {
        let d = constraint.ambient_dim();
        let k = constraint.codim();
        if k == 0 || k > d {
            return Err(Error::InvalidArgument(format!("codimension {k} invalid in R^{d}")));
        }
        Self::new(name.into(), d - k, d, Representation::Implicit(constraint), theta)
    }

    pub fn parametric(name: impl Into<String>, charts: Vec<Arc<dyn Chart>>, theta: f64) -> Result<Self> {
        let first = charts
            .first()
            .ok_or_else(|| Error::InvalidArgument("a parametric submanifold needs at least one chart".into()))?;
        let (m, d) = (first.manifold_dim(), first.ambient_dim());
        if charts.iter().any(|c| c.manifold_dim() != m || c.ambient_dim() != d) {
            return Err(Error::InvalidArgument("charts disagree on dimensions".into()));
        }
        Self::new(name.into(), m, d, Representation::Parametric(charts), theta)
    }

    fn new(name: String, dim: usize, ambient_dim: usize, repr: Representation, theta: f64) -> Result<Self> {
        if dim >= ambient_dim {
            return Err(Error::InvalidArgument(format!("need m < d, got m = {dim}, d = {ambient_dim}")));
        }
        if !(theta > 0.0) {
            return Err(Error::InvalidArgument(format!("tubular radius must be positive, got {theta}")));
        }
        Ok(Self { name, dim, ambient_dim, repr, theta, tol: Tolerances::default(), sampler: None, cloud: Vec::new() })
    }

    /// Attach a sampler `[0,1]^input_dim -> M` and build the multistart cloud from it.
    pub fn with_sampler(mut self, input_dim: usize, map: Sampler) -> Self {
        self.cloud = Halton::new(input_dim, 0).take(CLOUD_SIZE).map(|u| map(&u)).collect();
        self.sampler = Some(SamplerSpec { input_dim, map });
        self
    }

    /// Build a sampler for an implicit manifold by projecting points of the
    /// box `bounds` onto `M` with Gauss-Newton steps `x ← x - dF⁺ F(x)`.
    pub fn with_sample_box(self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        check_dim(self.ambient_dim, bounds.len())?;
        let Representation::Implicit(constraint) = self.repr.clone() else {
            return Err(Error::InvalidArgument("box sampling requires an implicit representation".into()));
        };
        let tol = self.tol.on_manifold;
        let map: Sampler = Arc::new(move |u: &[f64]| {
            let mut x = Vector::from_iterator(u.len(), u.iter().zip(&bounds).map(|(s, (lo, hi))| lo + s * (hi - lo)));
            for _ in 0..60 {
                let f = constraint.value(&x);
                if f.norm() <= 1e-3 * tol {
                    return x;
                }
                let j = constraint.jacobian(&x);
                let Some(step) = (&j * j.transpose()).cholesky().map(|c| j.transpose() * c.solve(&f)) else {
                    break;
                };
                x -= step;
            }
            // failed projections are marked and dropped by `sample_points`
            Vector::from_element(u.len(), f64::NAN)
        });
        let d = self.ambient_dim;
        let mut out = self.with_sampler(d, map);
        out.cloud.retain(|x| x.iter().all(|v| v.is_finite()));
        if out.cloud.is_empty() {
            return Err(Error::InvalidArgument("no sample of the box could be projected onto the manifold".into()));
        }
        Ok(out)
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Intrinsic dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn codim(&self) -> usize {
        self.ambient_dim - self.dim
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    /// `n` deterministic points of `M`.
    pub fn sample_points(&self, n: usize, seed: u64) -> Result<Vec<Vector>> {
        let spec = self
            .sampler
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("manifold `{}` has no sampler", self.name)))?;
        let pts: Vec<Vector> = Halton::new(spec.input_dim, seed)
            .take(50 * n.max(1))
            .map(|u| (spec.map)(&u))
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .take(n)
            .collect();
        if pts.len() < n {
            return Err(Error::InvalidArgument(format!("could only sample {} of {n} points", pts.len())));
        }
        Ok(pts)
    }

    /// Distance of `q` from `M` as measured by the representation: `‖F(q)‖`
    /// for implicit manifolds, chart reconstruction error for parametric ones.
    pub fn constraint_residual(&self, q: &Vector) -> f64 {
        match &self.repr {
            Representation::Implicit(c) => c.value(q).norm(),
            Representation::Parametric(charts) => charts
                .iter()
                .filter_map(|c| {
                    let x = c.to_chart(q)?;
                    let on = c.embed_tangent(x.rows(0, self.dim).as_slice());
                    c.contains(&on).then(|| (c.to_ambient(&on) - q).norm())
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn is_on_manifold(&self, q: &Vector) -> bool {
        self.constraint_residual(q) <= self.tol.on_manifold
    }

    fn require_on_manifold(&self, q: &Vector) -> Result<()> {
        check_dim(self.ambient_dim, q.len())?;
        let residual = self.constraint_residual(q);
        if residual <= self.tol.on_manifold {
            Ok(())
        } else {
            Err(Error::NotOnManifold { residual })
        }
    }

    /// `Π_q`, the orthogonal projector on `T_qM`.
    pub fn projector_matrix(&self, q: &Vector) -> Result<Matrix> {
        self.require_on_manifold(q)?;
        self.projector_field(q)
    }

    /// `Π_q⊥ = I - Π_q`.
    pub fn normal_projector_matrix(&self, q: &Vector) -> Result<Matrix> {
        let p = self.projector_matrix(q)?;
        Ok(Matrix::identity(self.ambient_dim, self.ambient_dim) - p)
    }

    /// Smooth extension of `q ↦ Π_q` to a neighbourhood of `M`: the projector
    /// on `ker dF(q)` (implicit) or on the span of the tangent chart columns
    /// at the chart foot point (parametric).
    pub fn projector_field(&self, q: &Vector) -> Result<Matrix> {
        check_dim(self.ambient_dim, q.len())?;
        match &self.repr {
            Representation::Implicit(c) => self.kernel_projector(&c.jacobian(q)),
            Representation::Parametric(charts) => {
                let (chart, x) = self.locate(charts, q)?;
                self.chart_projector(chart.as_ref(), &x)
            }
        }
    }

    fn kernel_projector(&self, j: &Matrix) -> Result<Matrix> {
        let sigma_min = smallest_singular_value(j);
        if sigma_min <= self.tol.rank {
            return Err(Error::RankDeficient { sigma_min });
        }
        let d = self.ambient_dim;
        let gram = j * j.transpose();
        let chol = gram.cholesky().ok_or(Error::RankDeficient { sigma_min })?;
        let p = Matrix::identity(d, d) - j.transpose() * chol.solve(j);
        Ok((&p + p.transpose()) * 0.5)
    }

    fn chart_projector(&self, chart: &dyn Chart, x: &Vector) -> Result<Matrix> {
        let tangent = chart.jacobian(x).columns(0, self.dim).into_owned();
        let sigma_min = smallest_singular_value(&tangent);
        if sigma_min <= self.tol.rank {
            return Err(Error::RankDeficient { sigma_min });
        }
        let gram = tangent.transpose() * &tangent;
        let chol = gram.cholesky().ok_or(Error::RankDeficient { sigma_min })?;
        let p = &tangent * chol.solve(&tangent.transpose());
        Ok((&p + p.transpose()) * 0.5)
    }

    /// Chart containing `q` and the chart coordinates of its foot point `(x_T, 0)`.
    fn locate<'a>(&self, charts: &'a [Arc<dyn Chart>], q: &Vector) -> Result<(&'a Arc<dyn Chart>, Vector)> {
        charts
            .iter()
            .find_map(|c| {
                let x = c.to_chart(q)?;
                let foot = c.embed_tangent(x.rows(0, self.dim).as_slice());
                c.contains(&foot).then_some((c, foot))
            })
            .ok_or_else(|| Error::ChartDomain { point: q.as_slice().to_vec() })
    }

    /// `dΠ_q(v)`. Uses closed-form second derivatives of the constraint when
    /// available, central differences of the projector field otherwise.
    pub fn projector_derivative(&self, q: &Vector, v: &Vector) -> Result<Matrix> {
        check_dim(self.ambient_dim, v.len())?;
        if let Representation::Implicit(c) = &self.repr {
            if let Some(dj) = c.jacobian_derivative(q, v) {
                return self.analytic_projector_derivative(&c.jacobian(q), &dj);
            }
        }
        self.projector_derivative_fd(q, v)
    }

    /// Central-difference `dΠ_q(v)` with step `1e-4 (1 + ‖q‖)` along `v`
    /// (along the chart curve through `q` with velocity `v` for parametric
    /// manifolds).
    pub fn projector_derivative_fd(&self, q: &Vector, v: &Vector) -> Result<Matrix> {
        check_dim(self.ambient_dim, v.len())?;
        let d = self.ambient_dim;
        let speed = v.norm();
        if speed == 0.0 {
            return Ok(Matrix::zeros(d, d));
        }
        let h = self.tol.projector_step * (1.0 + q.norm());
        match &self.repr {
            Representation::Implicit(_) => {
                let dir = v / speed;
                let plus = self.projector_field(&(q + &dir * h))?;
                let minus = self.projector_field(&(q - &dir * h))?;
                Ok((plus - minus) * (speed / (2.0 * h)))
            }
            Representation::Parametric(charts) => {
                let (chart, x) = self.locate(charts, q)?;
                let tangent = chart.jacobian(&x).columns(0, self.dim).into_owned();
                let gram = tangent.transpose() * &tangent;
                let coords =
                    gram.cholesky().ok_or(Error::RankDeficient { sigma_min: 0.0 })?.solve(&(tangent.transpose() * v));
                let velocity = chart.embed_tangent(coords.as_slice());
                let scale = velocity.norm();
                let dir = &velocity / scale;
                let plus = self.chart_projector(chart.as_ref(), &(&x + &dir * h))?;
                let minus = self.chart_projector(chart.as_ref(), &(&x - &dir * h))?;
                Ok((plus - minus) * (scale / (2.0 * h)))
            }
        }
    }

    /// Differentiates `Π = I - Jᵀ (J Jᵀ)⁻¹ J` given `J` and its directional derivative `dJ`.
    fn analytic_projector_derivative(&self, j: &Matrix, dj: &Matrix) -> Result<Matrix> {
        let sigma_min = smallest_singular_value(j);
        if sigma_min <= self.tol.rank {
            return Err(Error::RankDeficient { sigma_min });
        }
        let gram = j * j.transpose();
        let ginv = gram.try_inverse().ok_or(Error::RankDeficient { sigma_min })?;
        let dgram = dj * j.transpose() + j * dj.transpose();
        let dginv = -&ginv * dgram * &ginv;
        let dp = -(dj.transpose() * &ginv * j + j.transpose() * dginv * j + j.transpose() * &ginv * dj);
        Ok((&dp + dp.transpose()) * 0.5)
    }

    fn tangency_residual(&self, projector: &Matrix, v: &Vector) -> f64 {
        (v - projector * v).norm()
    }

    fn require_tangent(&self, projector: &Matrix, v: &Vector) -> Result<()> {
        let residual = self.tangency_residual(projector, v);
        if residual <= self.tol.tangency * v.norm() {
            Ok(())
        } else {
            Err(Error::NotTangent { residual })
        }
    }

    fn require_normal(&self, projector: &Matrix, n: &Vector) -> Result<()> {
        let residual = (projector * n).norm();
        if residual <= self.tol.tangency * n.norm() {
            Ok(())
        } else {
            Err(Error::NotNormal { residual })
        }
    }

    /// `h_q(v, w) = dΠ_q(v) w` for tangent `v, w`.
    pub fn second_fundamental_form(&self, q: &Vector, v: &Vector, w: &Vector) -> Result<Vector> {
        let p = self.projector_matrix(q)?;
        check_dim(self.ambient_dim, v.len())?;
        check_dim(self.ambient_dim, w.len())?;
        self.require_tangent(&p, v)?;
        self.require_tangent(&p, w)?;
        Ok(self.projector_derivative(q, v)? * w)
    }

    /// `h*_q(a, n) = dΠ_q(a) n` for tangent `a` and normal `n`; the adjoint of
    /// `h_q(a, ·)`.
    pub fn weingarten_adjoint(&self, q: &Vector, a: &Vector, n: &Vector) -> Result<Vector> {
        let p = self.projector_matrix(q)?;
        check_dim(self.ambient_dim, a.len())?;
        check_dim(self.ambient_dim, n.len())?;
        self.require_tangent(&p, a)?;
        self.require_normal(&p, n)?;
        Ok(self.projector_derivative(q, a)? * n)
    }

    /// `π_M(q)`, the unique nearest point of `M` for `q` in the tube.
    pub fn closest_point(&self, q: &Vector) -> Result<Vector> {
        check_dim(self.ambient_dim, q.len())?;
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutsideTube { reason: "non-finite point".into() });
        }
        if self.cloud.is_empty() {
            return Err(Error::InvalidArgument(format!("manifold `{}` has no sample cloud", self.name)));
        }
        let scale = 1.0 + q.norm();

        let mut candidates: Vec<Vector> = Vec::with_capacity(MULTISTARTS + 1);
        if let Representation::Parametric(charts) = &self.repr {
            if let Ok((chart, foot)) = self.locate(charts, q) {
                if let Some(x) = self.newton_parametric(chart.as_ref(), q, &foot) {
                    candidates.push(x);
                }
            }
        }
        for start in self.nearest_cloud_points(q, MULTISTARTS) {
            let found = match &self.repr {
                Representation::Implicit(c) => self.newton_implicit(c.as_ref(), q, start),
                Representation::Parametric(charts) => self
                    .locate(charts, start)
                    .ok()
                    .and_then(|(chart, foot)| self.newton_parametric(chart.as_ref(), q, &foot)),
            };
            candidates.extend(found);
        }
        if candidates.is_empty() {
            return Err(Error::OutsideTube {
                reason: format!("Newton did not converge in {} iterations", self.tol.max_newton_iter),
            });
        }

        let dists: Vec<f64> = candidates.iter().map(|x| (q - x).norm()).collect();
        let best = (0..candidates.len()).min_by(|&a, &b| dists[a].total_cmp(&dists[b])).expect("non-empty");
        for (i, x) in candidates.iter().enumerate() {
            if i != best
                && (dists[i] - dists[best]).abs() <= self.tol.equidistance
                && (x - &candidates[best]).norm() > 1e3 * self.tol.equidistance
            {
                return Err(Error::NonUnique {
                    first: candidates[best].as_slice().to_vec(),
                    second: x.as_slice().to_vec(),
                });
            }
        }
        let foot = candidates.swap_remove(best);
        let dist = dists[best];
        // points within round-off of the boundary count as on it
        if dist >= self.theta - 1e-12 * (1.0 + self.theta) {
            return Err(Error::OutsideTube { reason: format!("distance {dist} is not below theta = {}", self.theta) });
        }
        let ortho = (self.projector_field(&foot)? * (q - &foot)).norm();
        if ortho > self.tol.orthogonality * scale {
            return Err(Error::OutsideTube { reason: format!("orthogonality residual {ortho:e} above tolerance") });
        }
        if dist <= 1e-14 * scale {
            return Ok(q.clone());
        }
        Ok(foot)
    }

    /// `d(q, M)` for `q` in the tube.
    pub fn distance(&self, q: &Vector) -> Result<f64> {
        Ok((q - self.closest_point(q)?).norm())
    }

    fn nearest_cloud_points(&self, q: &Vector, k: usize) -> Vec<&Vector> {
        let mut ranked: Vec<(f64, &Vector)> = self.cloud.iter().map(|x| ((x - q).norm_squared(), x)).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
        ranked.into_iter().take(k).map(|(_, x)| x).collect()
    }

    /// Newton on the Lagrange system `x - q + dF(x)ᵀ λ = 0`, `F(x) = 0`.
    fn newton_implicit(&self, c: &dyn Constraint, q: &Vector, start: &Vector) -> Option<Vector> {
        let d = self.ambient_dim;
        let k = c.codim();
        let scale = 1.0 + q.norm();
        let mut x = start.clone();
        let j0 = c.jacobian(&x);
        let mut lambda = (&j0 * j0.transpose()).cholesky()?.solve(&(&j0 * (q - &x)));

        for _ in 0..=self.tol.max_newton_iter {
            let j = c.jacobian(&x);
            let f = c.value(&x);
            let stationarity = &x - q + j.transpose() * &lambda;
            let residual = (stationarity.norm_squared() + f.norm_squared()).sqrt();
            if !residual.is_finite() {
                return None;
            }
            if residual <= self.tol.newton_residual * scale {
                return Some(x);
            }
            let mut system = Matrix::zeros(d + k, d + k);
            for col in 0..d {
                let mut e = Vector::zeros(d);
                e[col] = 1.0;
                let dj = c.jacobian_derivative(&x, &e).unwrap_or_else(|| constraint::jacobian_derivative_fd(c, &x, &e));
                let curvature = dj.transpose() * &lambda;
                system.view_mut((0, col), (d, 1)).copy_from(&curvature);
                system[(col, col)] += 1.0;
            }
            system.view_mut((0, d), (d, k)).copy_from(&j.transpose());
            system.view_mut((d, 0), (k, d)).copy_from(&j);
            let mut rhs = Vector::zeros(d + k);
            rhs.rows_mut(0, d).copy_from(&(-stationarity));
            rhs.rows_mut(d, k).copy_from(&(-f));
            let step = system.lu().solve(&rhs)?;
            x += step.rows(0, d);
            lambda += step.rows(d, k);
        }
        None
    }

    /// Newton on `g(x) = dφ_T(x)ᵀ (φ(x_T, 0) - q) = 0` in tangent chart coordinates.
    fn newton_parametric(&self, chart: &dyn Chart, q: &Vector, foot: &Vector) -> Option<Vector> {
        let m = self.dim;
        let scale = 1.0 + q.norm();
        let gradient = |xt: &Vector| -> Option<Vector> {
            let x = chart.embed_tangent(xt.as_slice());
            if !chart.contains(&x) {
                return None;
            }
            let tangent = chart.jacobian(&x).columns(0, m).into_owned();
            Some(tangent.transpose() * (chart.to_ambient(&x) - q))
        };
        let mut xt = foot.rows(0, m).into_owned();
        for _ in 0..=self.tol.max_newton_iter {
            let g = gradient(&xt)?;
            if !g.norm().is_finite() {
                return None;
            }
            if g.norm() <= self.tol.newton_residual * scale {
                return Some(chart.to_ambient(&chart.embed_tangent(xt.as_slice())));
            }
            let h = 1e-6 * (1.0 + xt.norm());
            let mut hess = Matrix::zeros(m, m);
            for i in 0..m {
                let mut e = Vector::zeros(m);
                e[i] = h;
                let col = (gradient(&(&xt + &e))? - gradient(&(&xt - &e))?) / (2.0 * h);
                hess.set_column(i, &col);
            }
            xt -= hess.lu().solve(&g)?;
        }
        None
    }

    /// Deterministic orthonormal frame of `T_qM ⊕ (T_qM)^⊥`.
    pub fn tangent_frame(&self, q: &Vector) -> Result<TangentFrame> {
        let p = self.projector_matrix(q)?;
        let d = self.ambient_dim;
        let tangent = frame::pivoted_gram_schmidt(&p, self.dim, self.tol.rank)?;
        let normal = frame::pivoted_gram_schmidt(&(Matrix::identity(d, d) - &p), d - self.dim, self.tol.rank)?;
        Ok(TangentFrame { base: q.clone(), tangent, normal })
    }

    /// Matrix of `v⁻¹(q)` in the tangent frame at `q̃ = π_M(q)`, together with that frame.
    pub fn v_inverse_matrix(&self, q: &Vector) -> Result<(TangentFrame, Matrix)> {
        let foot = self.closest_point(q)?;
        let frame = self.tangent_frame(&foot)?;
        let offset = q - &foot;
        let m = self.dim;
        let mut mat = Matrix::zeros(m, m);
        for (j, e) in frame.tangent.iter().enumerate() {
            let image = e - self.projector_derivative(&foot, e)? * &offset;
            for (i, f) in frame.tangent.iter().enumerate() {
                mat[(i, j)] = f.dot(&image);
            }
        }
        Ok((frame, mat))
    }

    /// `v⁻¹(q) p = p - h*_{q̃}(p, q - q̃)` for `p ∈ T_{q̃}M`.
    pub fn v_inverse_apply(&self, q: &Vector, p: &Vector) -> Result<Vector> {
        check_dim(self.ambient_dim, p.len())?;
        let foot = self.closest_point(q)?;
        let proj = self.projector_field(&foot)?;
        self.require_tangent(&proj, p)?;
        self.v_inverse_at(&foot, q, p)
    }

    /// `p - h*_{q̃}(p, q - q̃)` with the foot point already known; no input checks.
    pub(crate) fn v_inverse_at(&self, foot: &Vector, q: &Vector, p: &Vector) -> Result<Vector> {
        let offset = q - foot;
        if offset.iter().all(|&v| v == 0.0) {
            return Ok(p.clone());
        }
        Ok(p - self.projector_derivative(foot, p)? * offset)
    }

    /// `v(q) p`, by solving the tangent-frame system of `v⁻¹(q)`.
    pub fn v_apply(&self, q: &Vector, p: &Vector) -> Result<Vector> {
        check_dim(self.ambient_dim, p.len())?;
        let (frame, mat) = self.v_inverse_matrix(q)?;
        let proj = self.projector_field(&frame.base)?;
        self.require_tangent(&proj, p)?;
        if q == &frame.base {
            return Ok(p.clone());
        }
        let sigma_min = smallest_singular_value(&mat);
        if sigma_min <= 1e-12 * (1.0 + mat.norm()) {
            return Err(Error::SingularMap { sigma_min });
        }
        let coords = frame.tangent_coordinates(p);
        let solved = mat.lu().solve(&coords).ok_or(Error::SingularMap { sigma_min })?;
        Ok(frame.from_tangent_coordinates(&solved))
    }
}

pub(crate) fn smallest_singular_value(m: &Matrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    SVD::new(m.clone(), false, false).singular_values.iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests;
