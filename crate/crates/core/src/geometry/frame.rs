use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Orthonormal bases of `T_qM` and `(T_qM)^⊥` at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    pub base: Vector,
    pub tangent: Vec<Vector>,
    pub normal: Vec<Vector>,
}

impl TangentFrame {
    /// All `d` frame vectors as the columns of one matrix, tangent first.
    pub fn matrix(&self) -> Matrix {
        let cols: Vec<Vector> = self.tangent.iter().chain(&self.normal).cloned().collect();
        Matrix::from_columns(&cols)
    }

    /// `‖EᵀE - I‖_max` for the frame matrix `E`.
    pub fn orthonormality_defect(&self) -> f64 {
        let e = self.matrix();
        let n = e.ncols();
        (e.transpose() * &e - Matrix::identity(n, n)).abs().max()
    }

    /// `Σ t tᵀ` over the tangent vectors.
    pub fn tangent_projector(&self) -> Matrix {
        let d = self.base.len();
        self.tangent.iter().fold(Matrix::zeros(d, d), |acc, t| acc + t * t.transpose())
    }

    pub fn tangent_coordinates(&self, v: &Vector) -> Vector {
        Vector::from_iterator(self.tangent.len(), self.tangent.iter().map(|t| t.dot(v)))
    }

    pub fn from_tangent_coordinates(&self, c: &Vector) -> Vector {
        self.tangent.iter().zip(c.iter()).fold(Vector::zeros(self.base.len()), |acc, (t, &ci)| acc + t * ci)
    }
}

/// Gram-Schmidt on the columns of a projector, each step taking the residual
/// column of largest norm (lowest index on ties). The chosen vector has a
/// positive entry at its pivot index, which fixes signs.
pub(crate) fn pivoted_gram_schmidt(projector: &Matrix, count: usize, rank_tol: f64) -> Result<Vec<Vector>> {
    let mut residual: Vec<Vector> = projector.column_iter().map(|c| c.into_owned()).collect();
    let mut basis: Vec<Vector> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut pivot = None;
        let mut best = 0.0;
        for (j, r) in residual.iter().enumerate() {
            let n = r.norm();
            if n > best {
                best = n;
                pivot = Some(j);
            }
        }
        let Some(pivot) = pivot.filter(|_| best > rank_tol.sqrt()) else {
            return Err(Error::RankDeficient { sigma_min: best });
        };
        let mut b = residual[pivot].clone() / best;
        if b[pivot] < 0.0 {
            b = -b;
        }
        for r in residual.iter_mut() {
            let c = b.dot(r);
            *r -= &b * c;
        }
        basis.push(b);
    }
    Ok(basis)
}
