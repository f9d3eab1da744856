//! Adapted charts.
//!
//! A chart maps chart coordinates `x = (x_T, x_N) ∈ R^m x R^(d-m)` to ambient
//! points, sending `x_N = 0` onto the submanifold. Tangent coordinates always
//! come first.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Determinant magnitude below which a chart Jacobian counts as singular.
pub const CHART_TOL: f64 = 1e-12;

pub trait Chart: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn ambient_dim(&self) -> usize;

    /// Dimension `m` of the straightened submanifold `R^m x {0}`.
    fn manifold_dim(&self) -> usize;

    /// Whether chart coordinates `x` belong to the chart domain `U`.
    fn contains(&self, x: &Vector) -> bool;

    /// `φ(x)`.
    fn to_ambient(&self, x: &Vector) -> Vector;

    /// `φ⁻¹(q)`, or `None` when `q` is not in the image `V`.
    fn to_chart(&self, q: &Vector) -> Option<Vector>;

    /// `dφ(x)`.
    fn jacobian(&self, x: &Vector) -> Matrix;

    /// `dφ⁻¹(φ(x)) = dφ(x)⁻¹`.
    fn inverse_jacobian(&self, x: &Vector) -> Result<Matrix> {
        let j = self.jacobian(x);
        if j.determinant().abs() <= CHART_TOL {
            return Err(Error::ChartDomain { point: x.as_slice().to_vec() });
        }
        j.try_inverse().ok_or_else(|| Error::ChartDomain { point: x.as_slice().to_vec() })
    }

    /// Chart coordinates `(x_T, 0)` for tangent coordinates `x_T`.
    fn embed_tangent(&self, tangent: &[f64]) -> Vector {
        let mut x = Vector::zeros(self.ambient_dim());
        x.rows_mut(0, tangent.len()).copy_from_slice(tangent);
        x
    }
}

/// Largest round-trip error `‖φ⁻¹(φ(x)) - x‖` over the given chart points,
/// ignoring points outside the domain. Periodic angles are compared modulo 2π.
pub fn round_trip_error(chart: &dyn Chart, points: &[Vector], periodic_axes: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for x in points.iter().filter(|x| chart.contains(x)) {
        let Some(back) = chart.to_chart(&chart.to_ambient(x)) else {
            return f64::INFINITY;
        };
        let mut diff = back - x;
        for &axis in periodic_axes {
            diff[axis] = (diff[axis] + PI).rem_euclid(2.0 * PI) - PI;
        }
        worst = worst.max(diff.norm());
    }
    worst
}

/// Affine chart `x ↦ A x + b`. With `A` the identity this is the identity
/// chart; with `A` orthogonal it is a rigid motion.
#[derive(Debug, Clone)]
pub struct LinearChart {
    matrix: Matrix,
    inverse: Matrix,
    offset: Vector,
    manifold_dim: usize,
    label: String,
}

impl LinearChart {
    pub fn new(matrix: Matrix, offset: Vector, manifold_dim: usize) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != offset.len() {
            return Err(Error::InvalidArgument("linear chart needs a square matrix matching the offset".into()));
        }
        if matrix.determinant().abs() <= CHART_TOL {
            return Err(Error::InvalidArgument("linear chart matrix is singular".into()));
        }
        let inverse = matrix.clone().try_inverse().expect("non-singular");
        Ok(Self { matrix, inverse, offset, manifold_dim, label: "linear".into() })
    }

    pub fn identity(ambient_dim: usize, manifold_dim: usize) -> Self {
        let mut chart = Self::new(Matrix::identity(ambient_dim, ambient_dim), Vector::zeros(ambient_dim), manifold_dim)
            .expect("identity is invertible");
        chart.label = format!("identity({ambient_dim})");
        chart
    }

    /// Planar rotation by `angle` (counter-clockwise).
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let mut chart = Self::new(Matrix::from_row_slice(2, 2, &[c, -s, s, c]), Vector::zeros(2), 1)
            .expect("rotations are invertible");
        chart.label = format!("rotation({angle})");
        chart
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

impl Chart for LinearChart {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn ambient_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn manifold_dim(&self) -> usize {
        self.manifold_dim
    }

    fn contains(&self, x: &Vector) -> bool {
        x.len() == self.ambient_dim() && x.iter().all(|v| v.is_finite())
    }

    fn to_ambient(&self, x: &Vector) -> Vector {
        &self.matrix * x + &self.offset
    }

    fn to_chart(&self, q: &Vector) -> Option<Vector> {
        Some(&self.inverse * (q - &self.offset))
    }

    fn jacobian(&self, _x: &Vector) -> Matrix {
        self.matrix.clone()
    }

    fn inverse_jacobian(&self, _x: &Vector) -> Result<Matrix> {
        Ok(self.inverse.clone())
    }
}

/// Polar chart of the circle of radius `radius`: `(θ, s) ↦ (r + s)(cos θ, sin θ)`.
#[derive(Debug, Clone)]
pub struct PolarChart {
    pub radius: f64,
}

impl Chart for PolarChart {
    fn name(&self) -> String {
        format!("polar({})", self.radius)
    }

    fn ambient_dim(&self) -> usize {
        2
    }

    fn manifold_dim(&self) -> usize {
        1
    }

    fn contains(&self, x: &Vector) -> bool {
        x.len() == 2 && x[0].is_finite() && self.radius + x[1] > 0.0
    }

    fn to_ambient(&self, x: &Vector) -> Vector {
        let rho = self.radius + x[1];
        let (s, c) = x[0].sin_cos();
        Vector::from_vec(vec![rho * c, rho * s])
    }

    fn to_chart(&self, q: &Vector) -> Option<Vector> {
        let rho = q.norm();
        (rho > 0.0).then(|| Vector::from_vec(vec![q[1].atan2(q[0]), rho - self.radius]))
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        let rho = self.radius + x[1];
        let (s, c) = x[0].sin_cos();
        Matrix::from_row_slice(2, 2, &[-rho * s, c, rho * c, s])
    }
}

/// Spherical chart of the sphere of radius `radius` in `R^3`:
/// `(ϑ, ϕ, s) ↦ (r + s)(sin ϑ cos ϕ, sin ϑ sin ϕ, cos ϑ)`, with `0 < ϑ < π`.
#[derive(Debug, Clone)]
pub struct SphericalChart {
    pub radius: f64,
}

impl Chart for SphericalChart {
    fn name(&self) -> String {
        format!("spherical({})", self.radius)
    }

    fn ambient_dim(&self) -> usize {
        3
    }

    fn manifold_dim(&self) -> usize {
        2
    }

    fn contains(&self, x: &Vector) -> bool {
        x.len() == 3 && x[0] > 0.0 && x[0] < PI && x[1].is_finite() && self.radius + x[2] > 0.0
    }

    fn to_ambient(&self, x: &Vector) -> Vector {
        let rho = self.radius + x[2];
        let (st, ct) = x[0].sin_cos();
        let (sp, cp) = x[1].sin_cos();
        Vector::from_vec(vec![rho * st * cp, rho * st * sp, rho * ct])
    }

    fn to_chart(&self, q: &Vector) -> Option<Vector> {
        let rho = q.norm();
        if rho == 0.0 || (q[0] == 0.0 && q[1] == 0.0) {
            return None;
        }
        Some(Vector::from_vec(vec![(q[2] / rho).clamp(-1.0, 1.0).acos(), q[1].atan2(q[0]), rho - self.radius]))
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        let rho = self.radius + x[2];
        let (st, ct) = x[0].sin_cos();
        let (sp, cp) = x[1].sin_cos();
        Matrix::from_row_slice(
            3,
            3,
            &[rho * ct * cp, -rho * st * sp, st * cp, rho * ct * sp, rho * st * cp, st * sp, -rho * st, 0.0, ct],
        )
    }
}

/// Toroidal chart: `(α, β, s) ↦ ((R + (r+s) cos β) cos α, (R + (r+s) cos β) sin α, (r+s) sin β)`.
#[derive(Debug, Clone)]
pub struct ToroidalChart {
    pub major: f64,
    pub minor: f64,
}

impl Chart for ToroidalChart {
    fn name(&self) -> String {
        format!("toroidal({},{})", self.major, self.minor)
    }

    fn ambient_dim(&self) -> usize {
        3
    }

    fn manifold_dim(&self) -> usize {
        2
    }

    fn contains(&self, x: &Vector) -> bool {
        x.len() == 3
            && x[0].is_finite()
            && x[1].is_finite()
            && self.minor + x[2] > 0.0
            && self.minor + x[2] < self.major
    }

    fn to_ambient(&self, x: &Vector) -> Vector {
        let tube = self.minor + x[2];
        let (sa, ca) = x[0].sin_cos();
        let (sb, cb) = x[1].sin_cos();
        let ring = self.major + tube * cb;
        Vector::from_vec(vec![ring * ca, ring * sa, tube * sb])
    }

    fn to_chart(&self, q: &Vector) -> Option<Vector> {
        let planar = (q[0] * q[0] + q[1] * q[1]).sqrt();
        if planar == 0.0 {
            return None;
        }
        let radial = planar - self.major;
        let tube = (radial * radial + q[2] * q[2]).sqrt();
        if tube == 0.0 {
            return None;
        }
        Some(Vector::from_vec(vec![q[1].atan2(q[0]), q[2].atan2(radial), tube - self.minor]))
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        let tube = self.minor + x[2];
        let (sa, ca) = x[0].sin_cos();
        let (sb, cb) = x[1].sin_cos();
        let ring = self.major + tube * cb;
        Matrix::from_row_slice(
            3,
            3,
            &[-ring * sa, -tube * sb * ca, cb * ca, ring * ca, -tube * sb * sa, cb * sa, 0.0, tube * cb, sb],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Halton;

    fn fd_jacobian(chart: &dyn Chart, x: &Vector) -> Matrix {
        let d = chart.ambient_dim();
        let mut j = Matrix::zeros(d, d);
        let h = 1e-6;
        for i in 0..d {
            let mut e = Vector::zeros(d);
            e[i] = h;
            let col = (chart.to_ambient(&(x + &e)) - chart.to_ambient(&(x - &e))) / (2.0 * h);
            j.set_column(i, &col);
        }
        j
    }

    fn chart_points(dim: usize, lo: &[f64], hi: &[f64], n: usize) -> Vec<Vector> {
        Halton::new(dim, 3)
            .take(n)
            .map(|u| Vector::from_iterator(dim, u.iter().enumerate().map(|(i, v)| lo[i] + v * (hi[i] - lo[i]))))
            .collect()
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        type Case = (Box<dyn Chart>, Vec<f64>, Vec<f64>);
        let charts: Vec<Case> = vec![
            (Box::new(PolarChart { radius: 1.0 }), vec![-3.0, -0.5], vec![3.0, 0.5]),
            (Box::new(SphericalChart { radius: 1.0 }), vec![0.2, -3.0, -0.5], vec![2.9, 3.0, 0.5]),
            (Box::new(ToroidalChart { major: 2.0, minor: 0.5 }), vec![-3.0, -3.0, -0.3], vec![3.0, 3.0, 0.3]),
            (Box::new(LinearChart::rotation(0.7)), vec![-2.0, -2.0], vec![2.0, 2.0]),
        ];
        for (chart, lo, hi) in &charts {
            for x in chart_points(chart.ambient_dim(), lo, hi, 40) {
                let err = (chart.jacobian(&x) - fd_jacobian(chart.as_ref(), &x)).abs().max();
                assert!(err < 1e-7, "{}: jacobian error {err}", chart.name());
            }
        }
    }

    #[test]
    fn round_trips_within_tolerance() {
        let polar = PolarChart { radius: 1.0 };
        let pts = chart_points(2, &[-3.0, -0.5], &[3.0, 0.5], 100);
        assert!(round_trip_error(&polar, &pts, &[0]) < 1e-10);

        let sph = SphericalChart { radius: 2.0 };
        let pts = chart_points(3, &[0.1, -3.0, -1.0], &[3.0, 3.0, 1.0], 100);
        assert!(round_trip_error(&sph, &pts, &[1]) < 1e-10);

        let tor = ToroidalChart { major: 2.0, minor: 0.5 };
        let pts = chart_points(3, &[-3.0, -3.0, -0.4], &[3.0, 3.0, 0.4], 100);
        assert!(round_trip_error(&tor, &pts, &[0, 1]) < 1e-10);

        let rot = LinearChart::rotation(1.1);
        let pts = chart_points(2, &[-2.0, -2.0], &[2.0, 2.0], 100);
        assert!(round_trip_error(&rot, &pts, &[]) < 1e-12);
    }

    #[test]
    fn polar_chart_straightens_the_circle() {
        let polar = PolarChart { radius: 1.0 };
        for k in 0..12 {
            let q = polar.to_ambient(&polar.embed_tangent(&[k as f64 * 0.5]));
            assert!((q.norm() - 1.0).abs() < 1e-15);
        }
        assert!(polar.to_chart(&Vector::zeros(2)).is_none());
        assert!(!polar.contains(&Vector::from_vec(vec![0.0, -1.0])));
    }

    #[test]
    fn rotation_inverse_jacobian_is_transpose() {
        let rot = LinearChart::rotation(0.3);
        let x = Vector::zeros(2);
        let inv = rot.inverse_jacobian(&x).unwrap();
        assert!((inv - rot.jacobian(&x).transpose()).abs().max() < 1e-15);
    }
}
