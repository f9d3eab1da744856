//! Numerical tolerances shared by the geometric operators.
//!
//! All thresholds live in one record so that a [`crate::geometry::Submanifold`]
//! carries the exact values its checks were made with.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Maximal constraint residual `‖F(q)‖` for `q` to count as a point of M.
    pub on_manifold: f64,
    /// Relative bound on the normal (resp. tangent) part of a tangent (resp. normal) vector.
    pub tangency: f64,
    /// Residual of the closest-point Lagrange system at which Newton stops.
    pub newton_residual: f64,
    /// Smallest admissible singular value of a constraint Jacobian.
    pub rank: f64,
    /// Relative central-difference step for the projector derivative.
    pub projector_step: f64,
    /// Newton iteration cap for the closest-point solve.
    pub max_newton_iter: usize,
    /// Two closest-point candidates closer than this in distance are "equidistant".
    pub equidistance: f64,
    /// Relative orthogonality residual `‖Π(q - q̃)‖ / (1 + ‖q‖)` accepted after Newton.
    pub orthogonality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            on_manifold: 1e-9,
            tangency: 1e-8,
            newton_residual: 1e-12,
            rank: 1e-10,
            projector_step: 1e-4,
            max_newton_iter: 50,
            equidistance: 1e-8,
            orthogonality: 1e-10,
        }
    }
}
