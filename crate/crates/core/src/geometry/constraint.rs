//! Constraint maps `F: R^d -> R^(d-m)` whose zero set is the submanifold.

use std::fmt;

use crate::{Matrix, Vector};

/// A submersion near its zero set. `M = F⁻¹(0)`.
pub trait Constraint: Send + Sync + fmt::Debug {
    fn ambient_dim(&self) -> usize;

    /// Number of scalar constraints, `d - m`.
    fn codim(&self) -> usize;

    fn value(&self, q: &Vector) -> Vector;

    /// `dF(q)`, a `(d-m) x d` matrix.
    fn jacobian(&self, q: &Vector) -> Matrix;

    /// Directional derivative of the Jacobian, `d/ds dF(q + s v)|_{s=0}`, when
    /// second derivatives are known in closed form.
    fn jacobian_derivative(&self, _q: &Vector, _v: &Vector) -> Option<Matrix> {
        None
    }
}

/// Central difference of the Jacobian along `v`.
pub fn jacobian_derivative_fd(c: &dyn Constraint, q: &Vector, v: &Vector) -> Matrix {
    let h = 1e-6 * (1.0 + q.norm());
    let plus = c.jacobian(&(q + v * h));
    let minus = c.jacobian(&(q - v * h));
    (plus - minus) / (2.0 * h)
}

/// `R^m x {0}`: the last `d - m` coordinates vanish.
#[derive(Debug, Clone)]
pub struct FlatConstraint {
    pub dim: usize,
    pub ambient_dim: usize,
}

impl Constraint for FlatConstraint {
    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    fn codim(&self) -> usize {
        self.ambient_dim - self.dim
    }

    fn value(&self, q: &Vector) -> Vector {
        q.rows(self.dim, self.codim()).into_owned()
    }

    fn jacobian(&self, _q: &Vector) -> Matrix {
        let k = self.codim();
        let mut j = Matrix::zeros(k, self.ambient_dim);
        for i in 0..k {
            j[(i, self.dim + i)] = 1.0;
        }
        j
    }

    fn jacobian_derivative(&self, _q: &Vector, _v: &Vector) -> Option<Matrix> {
        Some(Matrix::zeros(self.codim(), self.ambient_dim))
    }
}

/// Sphere of radius `radius` centred at the origin of `R^d`, written as
/// `(‖q‖² - r²) / (2r)` so that the gradient has unit norm on the sphere.
#[derive(Debug, Clone)]
pub struct SphereConstraint {
    pub radius: f64,
    pub ambient_dim: usize,
}

impl Constraint for SphereConstraint {
    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    fn codim(&self) -> usize {
        1
    }

    fn value(&self, q: &Vector) -> Vector {
        Vector::from_element(1, (q.norm_squared() - self.radius * self.radius) / (2.0 * self.radius))
    }

    fn jacobian(&self, q: &Vector) -> Matrix {
        Matrix::from_row_slice(1, q.len(), q.as_slice()) / self.radius
    }

    fn jacobian_derivative(&self, _q: &Vector, v: &Vector) -> Option<Matrix> {
        Some(Matrix::from_row_slice(1, v.len(), v.as_slice()) / self.radius)
    }
}

/// Torus of revolution around the `z` axis in `R^3`, tube radius `minor`,
/// centre-line radius `major`. Uses the quartic implicit equation
/// `(‖q‖² + R² - r²)² - 4R²(x² + y²) = 0`, scaled by `1 / (8 R² r)`.
#[derive(Debug, Clone)]
pub struct TorusConstraint {
    pub major: f64,
    pub minor: f64,
}

impl TorusConstraint {
    fn scale(&self) -> f64 {
        1.0 / (8.0 * self.major * self.major * self.minor)
    }

    fn shift(&self) -> f64 {
        self.major * self.major - self.minor * self.minor
    }
}

impl Constraint for TorusConstraint {
    fn ambient_dim(&self) -> usize {
        3
    }

    fn codim(&self) -> usize {
        1
    }

    fn value(&self, q: &Vector) -> Vector {
        let big2 = self.major * self.major;
        let s = q.norm_squared() + self.shift();
        let rho2 = q[0] * q[0] + q[1] * q[1];
        Vector::from_element(1, (s * s - 4.0 * big2 * rho2) * self.scale())
    }

    fn jacobian(&self, q: &Vector) -> Matrix {
        let big2 = self.major * self.major;
        let s = q.norm_squared() + self.shift();
        let k = self.scale();
        Matrix::from_row_slice(
            1,
            3,
            &[(4.0 * s - 8.0 * big2) * q[0] * k, (4.0 * s - 8.0 * big2) * q[1] * k, 4.0 * s * q[2] * k],
        )
    }

    fn jacobian_derivative(&self, q: &Vector, v: &Vector) -> Option<Matrix> {
        let big2 = self.major * self.major;
        let s = q.norm_squared() + self.shift();
        let ds = 2.0 * q.dot(v);
        let k = self.scale();
        Some(Matrix::from_row_slice(
            1,
            3,
            &[
                (4.0 * ds * q[0] + (4.0 * s - 8.0 * big2) * v[0]) * k,
                (4.0 * ds * q[1] + (4.0 * s - 8.0 * big2) * v[1]) * k,
                (4.0 * ds * q[2] + 4.0 * s * v[2]) * k,
            ],
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_jacobian(c: &dyn Constraint, q: &Vector) {
        let j = c.jacobian(q);
        let h = 1e-6;
        for i in 0..c.ambient_dim() {
            let mut e = Vector::zeros(c.ambient_dim());
            e[i] = h;
            let fd = (c.value(&(q + &e)) - c.value(&(q - &e))) / (2.0 * h);
            for k in 0..c.codim() {
                assert!((fd[k] - j[(k, i)]).abs() < 1e-7, "d{k}/dq{i}: {} vs {}", fd[k], j[(k, i)]);
            }
        }
    }

    fn check_jacobian_derivative(c: &dyn Constraint, q: &Vector, v: &Vector) {
        let analytic = c.jacobian_derivative(q, v).unwrap();
        let fd = jacobian_derivative_fd(c, q, v);
        assert!((analytic - fd).abs().max() < 1e-7);
    }

    #[test]
    fn torus_derivatives_match_finite_differences() {
        let c = TorusConstraint { major: 2.0, minor: 0.5 };
        let q = Vector::from_vec(vec![1.7, 0.9, -0.3]);
        let v = Vector::from_vec(vec![0.2, -0.4, 1.0]);
        check_jacobian(&c, &q);
        check_jacobian_derivative(&c, &q, &v);
        // outer equator lies on the torus
        let on = Vector::from_vec(vec![2.5, 0.0, 0.0]);
        assert!(c.value(&on)[0].abs() < 1e-14);
    }

    #[test]
    fn sphere_and_flat_derivatives() {
        let s = SphereConstraint { radius: 1.5, ambient_dim: 3 };
        let q = Vector::from_vec(vec![0.3, -1.0, 0.8]);
        let v = Vector::from_vec(vec![1.0, 0.5, -0.2]);
        check_jacobian(&s, &q);
        check_jacobian_derivative(&s, &q, &v);
        let f = FlatConstraint { dim: 1, ambient_dim: 3 };
        check_jacobian(&f, &q);
        check_jacobian_derivative(&f, &q, &v);
        assert_eq!(f.value(&q).as_slice(), &[-1.0, 0.8]);
    }
}
