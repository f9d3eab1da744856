//! Restriction of Hamiltonians and solutions from `R^d` to `M`, and their
//! extension from `M` to the tube `U_θ`.
//!
//! The extension of a Hamiltonian `H̄` on `TM` is
//! `H(q, p) = H̄(q̃, v⁻¹(q) Π_{q̃} p)` with `q̃ = π_M(q)`; the projector is taken
//! at the foot point `q̃` since `v⁻¹(q)` acts on `T_{q̃}M`. The extension of a
//! function is `u(t, q) = ū(t, q̃) + a ‖q - q̃‖²`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{Chart, Submanifold};
use crate::grid::{Grid, GridFunction};
use crate::hamiltonian::HamiltonianField;
use crate::{Matrix, Vector};

pub type TimeFn = Arc<dyn Fn(f64, &Vector) -> Result<f64> + Send + Sync>;
pub type PhaseFn = Arc<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>;

/// A time-dependent function `ū(t, q)` on `M`, evaluated at ambient points of `M`.
#[derive(Clone)]
pub struct ManifoldFunction {
    manifold: Arc<Submanifold>,
    eval: TimeFn,
}

impl fmt::Debug for ManifoldFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifoldFunction").field("manifold", &self.manifold.name()).finish()
    }
}

impl ManifoldFunction {
    pub fn new(manifold: Arc<Submanifold>, eval: TimeFn) -> Self {
        Self { manifold, eval }
    }

    /// `ū(t, q) = f(t, x_T)` where `x_T` are the tangent chart coordinates of `q`.
    pub fn from_chart(
        manifold: Arc<Submanifold>,
        chart: Arc<dyn Chart>,
        f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let m = manifold.dim();
        let eval = move |t: f64, q: &Vector| -> Result<f64> {
            let x = chart.to_chart(q).ok_or_else(|| Error::ChartDomain { point: q.as_slice().to_vec() })?;
            Ok(f(t, &x.as_slice()[..m]))
        };
        Self::new(manifold, Arc::new(eval))
    }

    pub fn manifold(&self) -> &Arc<Submanifold> {
        &self.manifold
    }

    /// `ū(t, q)` for `q ∈ M`.
    pub fn value(&self, t: f64, q: &Vector) -> Result<f64> {
        check_dim(self.manifold.ambient_dim(), q.len())?;
        let residual = self.manifold.constraint_residual(q);
        if residual > self.manifold.tolerances().on_manifold {
            return Err(Error::NotOnManifold { residual });
        }
        (self.eval)(t, q)
    }

    /// `ū(t, π_M(q))` for `q` in the tube.
    pub fn value_snapped(&self, t: f64, q: &Vector) -> Result<f64> {
        let foot = self.manifold.closest_point(q)?;
        (self.eval)(t, &foot)
    }

    /// Samples `ū(t, φ(x_T, 0))` on a grid of tangent chart coordinates.
    pub fn on_chart_grid(&self, chart: &dyn Chart, grid: &Grid, t: f64) -> Result<GridFunction> {
        check_dim(self.manifold.dim(), grid.dim())?;
        GridFunction::try_from_fn(grid.clone(), t, |x| {
            let q = chart_point(chart, x)?;
            (self.eval)(t, &q)
        })
    }
}

/// `φ(x_T, 0)`.
pub fn chart_point(chart: &dyn Chart, x_tangent: &[f64]) -> Result<Vector> {
    let x = chart.embed_tangent(x_tangent);
    if !chart.contains(&x) {
        return Err(Error::ChartDomain { point: x_tangent.to_vec() });
    }
    Ok(chart.to_ambient(&x))
}

/// A Hamiltonian `H̄` on `TM`. When it comes from restricting an ambient
/// Hamiltonian, that source is kept so the normal-momentum defect can be
/// reported.
#[derive(Clone)]
pub struct TangentHamiltonian {
    name: String,
    manifold: Arc<Submanifold>,
    eval: PhaseFn,
    source: Option<HamiltonianField>,
}

impl fmt::Debug for TangentHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TangentHamiltonian")
            .field("name", &self.name)
            .field("manifold", &self.manifold.name())
            .field("restricted", &self.source.is_some())
            .finish()
    }
}

/// `H̄(q, p)` together with `|H(q, p) - H̄(q, Π_q p)|` when an ambient source exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentValue {
    pub value: f64,
    pub defect: Option<f64>,
}

impl TangentHamiltonian {
    /// A Hamiltonian given directly on `TM`; `eval` receives `q ∈ M` and `p ∈ T_qM`.
    pub fn new(name: impl Into<String>, manifold: Arc<Submanifold>, eval: PhaseFn) -> Self {
        Self { name: name.into(), manifold, eval, source: None }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn manifold(&self) -> &Arc<Submanifold> {
        &self.manifold
    }

    pub fn source(&self) -> Option<&HamiltonianField> {
        self.source.as_ref()
    }

    /// `H̄(q, Π_q p)` for `q ∈ M` and any `p`, with the defect of the projection.
    pub fn evaluate(&self, q: &Vector, p: &Vector) -> Result<TangentValue> {
        check_dim(self.manifold.ambient_dim(), p.len())?;
        let proj = self.manifold.projector_matrix(q)?;
        let pt = &proj * p;
        let value = (self.eval)(q, &pt);
        let defect = self.source.as_ref().map(|h| (h.value(q.as_slice(), p.as_slice()) - value).abs());
        Ok(TangentValue { value, defect })
    }

    pub fn value(&self, q: &Vector, p: &Vector) -> Result<f64> {
        Ok(self.evaluate(q, p)?.value)
    }

    /// Evaluation at a tangent momentum without any checks.
    pub(crate) fn value_unchecked(&self, q: &Vector, p: &Vector) -> f64 {
        (self.eval)(q, p)
    }

    /// The Hamiltonian in tangent chart coordinates `x_T` of `M`:
    /// `Ĥ(x, p̄) = H̄(φ(x, 0), D G⁻¹ p̄)` with `D` the tangent columns of
    /// `dφ(x, 0)` and `G = DᵀD`. If `ū ∘ φ` has gradient `p̄`, the tangential
    /// gradient of `ū` is `D G⁻¹ p̄`.
    pub fn chart_hamiltonian(&self, chart: Arc<dyn Chart>) -> Result<HamiltonianField> {
        check_dim(self.manifold.ambient_dim(), chart.ambient_dim())?;
        let m = self.manifold.dim();
        let lift = {
            let chart = chart.clone();
            move |x: &[f64], pbar: &[f64]| -> Option<(Vector, Vector)> {
                let full = chart.embed_tangent(x);
                if !chart.contains(&full) {
                    return None;
                }
                let d: Matrix = chart.jacobian(&full).columns(0, m).into_owned();
                let g = (d.transpose() * &d).cholesky()?;
                let p = &d * g.solve(&Vector::from_column_slice(pbar));
                Some((chart.to_ambient(&full), p))
            }
        };
        let this = self.clone();
        let eval = move |x: &[f64], pbar: &[f64]| match lift(x, pbar) {
            Some((q, p)) => this.value_unchecked(&q, &p),
            None => f64::NAN,
        };
        let domain = move |x: &[f64]| chart.contains(&chart.embed_tangent(x));
        Ok(HamiltonianField::new(format!("chart({})", self.name), m, Arc::new(eval)).with_domain(Arc::new(domain)))
    }
}

/// `H̄ = H|_{TM}`.
pub fn restrict_hamiltonian(h: &HamiltonianField, manifold: Arc<Submanifold>) -> Result<TangentHamiltonian> {
    check_dim(manifold.ambient_dim(), h.dim())?;
    let source = h.clone();
    let eval = move |q: &Vector, p: &Vector| source.value(q.as_slice(), p.as_slice());
    Ok(TangentHamiltonian { name: format!("{}|TM", h.name()), manifold, eval: Arc::new(eval), source: Some(h.clone()) })
}

/// `ū(t, q) = u(t, q)` for `q ∈ M`.
pub fn restrict_solution(u: TimeFn, manifold: Arc<Submanifold>) -> ManifoldFunction {
    ManifoldFunction::new(manifold, u)
}

/// Restriction of a grid snapshot by multilinear interpolation; the result
/// carries an `O(Δx²)` interpolation error for smooth `u`. The time argument
/// of the returned function is ignored.
pub fn restrict_grid_solution(u: &GridFunction, manifold: Arc<Submanifold>) -> Result<ManifoldFunction> {
    check_dim(manifold.ambient_dim(), u.grid.dim())?;
    let u = u.clone();
    let eval = move |_t: f64, q: &Vector| u.interpolate(q.as_slice());
    Ok(ManifoldFunction::new(manifold, Arc::new(eval)))
}

/// Interpolates an ambient snapshot at `φ(x_T, 0)` for every node `x_T` of a chart grid.
pub fn restrict_to_chart_grid(u: &GridFunction, chart: &dyn Chart, chart_grid: &Grid) -> Result<GridFunction> {
    GridFunction::try_from_fn(chart_grid.clone(), u.t, |x| u.interpolate(chart_point(chart, x)?.as_slice()))
}

/// `H(q, p) = H̄(q̃, v⁻¹(q) Π_{q̃} p)` on `U_θ x R^d`.
#[derive(Debug, Clone)]
pub struct ExtendedHamiltonian {
    hbar: TangentHamiltonian,
}

impl ExtendedHamiltonian {
    pub fn try_value(&self, q: &Vector, p: &Vector) -> Result<f64> {
        let m = &self.hbar.manifold;
        check_dim(m.ambient_dim(), p.len())?;
        let foot = m.closest_point(q)?;
        let pt = m.projector_field(&foot)? * p;
        let w = m.v_inverse_at(&foot, q, &pt)?;
        Ok(self.hbar.value_unchecked(&foot, &w))
    }

    pub fn manifold(&self) -> &Arc<Submanifold> {
        &self.hbar.manifold
    }

    /// As a [`HamiltonianField`]; NaN outside the tube, gradients by differences.
    pub fn into_field(self) -> HamiltonianField {
        let d = self.hbar.manifold.ambient_dim();
        let name = format!("extend({})", self.hbar.name);
        let m = self.hbar.manifold.clone();
        let eval = move |q: &[f64], p: &[f64]| {
            self.try_value(&Vector::from_column_slice(q), &Vector::from_column_slice(p)).unwrap_or(f64::NAN)
        };
        let domain = move |q: &[f64]| m.closest_point(&Vector::from_column_slice(q)).is_ok();
        HamiltonianField::new(name, d, Arc::new(eval)).with_domain(Arc::new(domain))
    }
}

pub fn extend_hamiltonian(hbar: &TangentHamiltonian) -> ExtendedHamiltonian {
    ExtendedHamiltonian { hbar: hbar.clone() }
}

/// Coefficient of the quadratic normal term. The tube radius comes from the manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionParams {
    pub a: f64,
}

impl Default for ExtensionParams {
    fn default() -> Self {
        Self { a: 0.0 }
    }
}

/// `u(t, q) = ū(t, q̃) + a ‖q - q̃‖²` on `U_θ`.
#[derive(Debug, Clone)]
pub struct ExtendedFunction {
    ubar: ManifoldFunction,
    params: ExtensionParams,
}

impl ExtendedFunction {
    pub fn value(&self, t: f64, q: &Vector) -> Result<f64> {
        let m = &self.ubar.manifold;
        check_dim(m.ambient_dim(), q.len())?;
        let foot = m.closest_point(q)?;
        let dist2 = (q - &foot).norm_squared();
        Ok((self.ubar.eval)(t, &foot)? + self.params.a * dist2)
    }

    pub fn params(&self) -> ExtensionParams {
        self.params
    }

    /// Samples `u(t, ·)` on a grid, whose nodes are mapped to ambient points
    /// by `chart` when given. Fails if a node leaves the tube.
    pub fn to_grid_function(&self, grid: &Grid, t: f64, chart: Option<&dyn Chart>) -> Result<GridFunction> {
        GridFunction::try_from_fn(grid.clone(), t, |x| {
            let q = match chart {
                Some(c) => {
                    let xv = Vector::from_column_slice(x);
                    if !c.contains(&xv) {
                        return Err(Error::ChartDomain { point: x.to_vec() });
                    }
                    c.to_ambient(&xv)
                }
                None => Vector::from_column_slice(x),
            };
            self.value(t, &q)
        })
    }

    /// As a fallible closure.
    pub fn as_time_fn(&self) -> TimeFn {
        let this = self.clone();
        Arc::new(move |t, q| this.value(t, q))
    }
}

pub fn extend_function(ubar: &ManifoldFunction, params: ExtensionParams) -> ExtendedFunction {
    ExtendedFunction { ubar: ubar.clone(), params }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::catalog as manifolds;
    use crate::geometry::chart::PolarChart;
    use crate::grid::{Axis, Boundary};
    use crate::hamiltonian::{catalog, normal_independence_defect, SamplingPlan};

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn unit_circle() -> Arc<Submanifold> {
        Arc::new(manifolds::circle(1.0).unwrap())
    }

    #[test]
    fn restricted_hamiltonian_examples() {
        let circle = unit_circle();
        let hbar = restrict_hamiltonian(&catalog::rotation(2).unwrap(), circle).unwrap();
        assert_eq!(hbar.value(&v(&[1.0, 0.0]), &v(&[0.0, 2.0])).unwrap(), 2.0);
        // normal momenta are projected away, and the rotation field does not see them
        let r = hbar.evaluate(&v(&[1.0, 0.0]), &v(&[5.0, 2.0])).unwrap();
        assert_eq!(r.value, 2.0);
        assert!(r.defect.unwrap() <= 1e-12);
        assert!(matches!(hbar.value(&v(&[1.2, 0.0]), &v(&[0.0, 1.0])), Err(Error::NotOnManifold { .. })));

        let flat = Arc::new(manifolds::flat(1, 2).unwrap());
        let free = restrict_hamiltonian(&catalog::free(2), flat).unwrap();
        assert_eq!(free.value(&v(&[0.4, 0.0]), &v(&[3.0, 0.0])).unwrap(), 4.5);
        let r = free.evaluate(&v(&[0.4, 0.0]), &v(&[3.0, 1.0])).unwrap();
        assert_eq!(r.value, 4.5);
        assert!((r.defect.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn restricted_solution_examples() {
        let circle = unit_circle();
        let u = restrict_solution(Arc::new(|_t, q: &Vector| Ok(q.norm_squared())), circle.clone());
        for q in circle.sample_points(20, 1).unwrap() {
            assert!((u.value(0.3, &q).unwrap() - 1.0).abs() < 1e-12);
        }
        // rotation flow: u(t, q) = u0(e^{-tJ} q) is an angular shift on the circle
        let u0 = |q: &Vector| q[0] + 0.5 * q[1] * q[1];
        let rotated = restrict_solution(
            Arc::new(move |t, q: &Vector| {
                let (s, c) = t.sin_cos();
                Ok(u0(&v(&[c * q[0] + s * q[1], -s * q[0] + c * q[1]])))
            }),
            circle.clone(),
        );
        let t = 0.7f64;
        for k in 0..16 {
            let th = k as f64 * 0.4;
            let q = v(&[th.cos(), th.sin()]);
            let shifted = v(&[(th - t).cos(), (th - t).sin()]);
            assert!((rotated.value(t, &q).unwrap() - u0(&shifted)).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_restriction_is_a_slice() {
        let flat = Arc::new(manifolds::flat(1, 2).unwrap());
        let grid = Grid::new(vec![
            Axis::new(-1.0, 1.0, 9, Boundary::Extrapolate).unwrap(),
            Axis::new(-1.0, 1.0, 9, Boundary::Extrapolate).unwrap(),
        ])
        .unwrap();
        let u = GridFunction::from_fn(grid.clone(), 0.0, |x| (2.0 * x[0]).sin() + x[1].powi(3)).unwrap();
        let ubar = restrict_grid_solution(&u, flat).unwrap();
        for i in 0..9 {
            let x = grid.axes()[0].node(i);
            let slice = u.values[grid.flat_index(&[i, 4])];
            assert_eq!(ubar.value(0.0, &v(&[x, 0.0])).unwrap(), slice);
        }
    }

    #[test]
    fn extended_hamiltonian_examples() {
        let circle = unit_circle();
        let kinetic = TangentHamiltonian::new("kinetic", circle.clone(), Arc::new(|_q, p| 0.5 * p.norm_squared()));
        let ext = extend_hamiltonian(&kinetic);
        // v⁻¹(q) scales tangent momenta by ‖q‖ = 1.5
        assert!((ext.try_value(&v(&[1.5, 0.0]), &v(&[0.0, 1.0])).unwrap() - 1.125).abs() < 1e-6);
        // ‖q - q̃‖ = θ lies on the boundary of the open tube
        assert!(matches!(ext.try_value(&v(&[2.0, 0.0]), &v(&[0.0, 1.0])), Err(Error::OutsideTube { .. })));
        // on M, v is the identity
        assert!((ext.try_value(&v(&[0.0, 1.0]), &v(&[3.0, 7.0])).unwrap() - 4.5).abs() < 1e-12);
        assert!(matches!(
            ext.try_value(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])),
            Err(Error::NonUnique { .. } | Error::OutsideTube { .. })
        ));

        // the extended restricted rotation field is the rotation field again
        let rot = catalog::rotation(2).unwrap();
        let ext = extend_hamiltonian(&restrict_hamiltonian(&rot, circle).unwrap());
        for (q, p) in [([1.5, 0.3], [0.2, -1.0]), ([-0.4, 0.5], [3.0, 2.0])] {
            let e = ext.try_value(&v(&q), &v(&p)).unwrap();
            assert!((e - rot.value(&q, &p)).abs() < 1e-6, "{e}");
        }

        let flat = Arc::new(manifolds::flat(1, 2).unwrap());
        let h = TangentHamiltonian::new("f", flat, Arc::new(|q, p| q[0].cos() * p[0] * p[0]));
        let ext = extend_hamiltonian(&h);
        assert_eq!(ext.try_value(&v(&[0.3, 5.0]), &v(&[2.0, -9.0])).unwrap(), 0.3f64.cos() * 4.0);
    }

    #[test]
    fn extension_is_normal_momentum_independent() {
        let m = Arc::new(manifolds::torus(2.0, 0.5).unwrap());
        let hbar = TangentHamiltonian::new("k", m.clone(), Arc::new(|q, p| 0.5 * p.norm_squared() + q[2] * p[0]));
        let ext = extend_hamiltonian(&hbar).into_field();
        let plan = SamplingPlan { base_points: 16, momenta_per_point: 8, ..SamplingPlan::default() };
        for (q, p) in plan.pairs(&m).unwrap() {
            assert!(normal_independence_defect(&ext, &m, &q, &p).unwrap() <= 1e-10);
            // and restricting back recovers H̄ on tangent momenta
            let pt = m.projector_matrix(&q).unwrap() * &p;
            assert!((ext.value(q.as_slice(), pt.as_slice()) - hbar.value(&q, &pt).unwrap()).abs() <= 1e-10);
        }
    }

    #[test]
    fn extended_function_examples() {
        let circle = unit_circle();
        let c = ManifoldFunction::new(circle.clone(), Arc::new(|_t, _q| Ok(3.0)));
        let u = extend_function(&c, ExtensionParams { a: 1.0 });
        assert!((u.value(0.0, &v(&[1.9, 0.0])).unwrap() - (3.0 + 0.81)).abs() < 1e-12);
        assert!((u.value(0.0, &v(&[0.5, 0.0])).unwrap() - (3.0 + 0.25)).abs() < 1e-12);
        // the tube is open: dist = θ is rejected
        assert!(matches!(u.value(0.0, &v(&[2.0, 0.0])), Err(Error::OutsideTube { .. })));

        let ubar = ManifoldFunction::new(circle.clone(), Arc::new(|t, q: &Vector| Ok(q[0] * t.cos() + q[1])));
        let flat_ext = extend_function(&ubar, ExtensionParams::default());
        for r in [0.5, 1.0, 1.6] {
            let q = v(&[r * 0.6, r * 0.8]);
            assert!((flat_ext.value(0.4, &q).unwrap() - (0.6 * 0.4f64.cos() + 0.8)).abs() < 1e-12);
        }
        // restrict ∘ extend = id on M
        let round = restrict_solution(flat_ext.as_time_fn(), circle.clone());
        for q in circle.sample_points(25, 4).unwrap() {
            assert!((round.value(0.4, &q).unwrap() - ubar.value(0.4, &q).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn extension_sampled_through_polar_chart() {
        let circle = unit_circle();
        let ubar =
            ManifoldFunction::from_chart(circle.clone(), Arc::new(PolarChart { radius: 1.0 }), |_t, x| x[0].sin());
        let u = extend_function(&ubar, ExtensionParams { a: -0.5 });
        let grid = Grid::new(vec![
            Axis::new(0.0, std::f64::consts::TAU, 32, Boundary::Periodic).unwrap(),
            Axis::new(-0.5, 0.5, 5, Boundary::Extrapolate).unwrap(),
        ])
        .unwrap();
        let g = u.to_grid_function(&grid, 0.0, Some(&PolarChart { radius: 1.0 })).unwrap();
        for i in 0..grid.len() {
            let x = grid.node(i);
            assert!((g.values[i] - (x[0].sin() - 0.5 * x[1] * x[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn chart_hamiltonian_of_rotation_is_angular_transport() {
        let circle = unit_circle();
        let hbar = restrict_hamiltonian(&catalog::rotation(2).unwrap(), circle).unwrap();
        for r in [1.0, 2.5] {
            let m = Arc::new(manifolds::circle(r).unwrap());
            let hbar_r = restrict_hamiltonian(&catalog::rotation(2).unwrap(), m).unwrap();
            let h = hbar_r.chart_hamiltonian(Arc::new(PolarChart { radius: r })).unwrap();
            for (x, p) in [(0.3, 1.7), (4.0, -0.2)] {
                assert!((h.value(&[x], &[p]) - p).abs() < 1e-12);
            }
        }
        let h = hbar.chart_hamiltonian(Arc::new(PolarChart { radius: 1.0 })).unwrap();
        assert!((h.grad_p(&[1.0], &[0.5])[0] - 1.0).abs() < 1e-8);
    }
}
