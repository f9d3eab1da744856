//! Constraints and Hamiltonians given by expressions. Derivatives are taken
//! by central differences.

use std::fmt;
use std::sync::Arc;

use hjsub::geometry::Constraint;
use hjsub::hamiltonian::HamiltonianField;
use hjsub::{Matrix, Vector};

use crate::error::{HarnessError, Result};
use crate::expr::{Env, Expr};

/// `F(q) = (f_1(q), ..., f_k(q))`.
#[derive(Clone)]
pub struct ExprConstraint {
    dim: usize,
    parts: Vec<Expr>,
}

impl fmt::Debug for ExprConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExprConstraint").field("dim", &self.dim).field("parts", &self.parts).finish()
    }
}

impl ExprConstraint {
    pub fn parse(dim: usize, sources: &[String]) -> Result<Self> {
        if sources.is_empty() || sources.len() >= dim {
            return Err(HarnessError::Config(format!(
                "an implicit manifold in R^{dim} needs between 1 and {} constraints, got {}",
                dim.saturating_sub(1),
                sources.len()
            )));
        }
        let parts = sources.iter().map(|s| Expr::parse(s)).collect::<std::result::Result<Vec<_>, _>>()?;
        let zeros = vec![0.0; dim];
        for e in &parts {
            if e.uses_momentum() {
                return Err(HarnessError::Config(format!("constraint `{e}` may only depend on q")));
            }
            e.eval_scalar(&Env { q: &zeros, p: &[], t: 0.0 })
                .map_err(|err| HarnessError::Config(format!("constraint `{e}`: {err}")))?;
        }
        Ok(Self { dim, parts })
    }

    fn component(&self, k: usize, q: &[f64]) -> f64 {
        self.parts[k].eval_scalar(&Env { q, p: &[], t: 0.0 }).unwrap_or(f64::NAN)
    }
}

impl Constraint for ExprConstraint {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn codim(&self) -> usize {
        self.parts.len()
    }

    fn value(&self, q: &Vector) -> Vector {
        Vector::from_iterator(self.parts.len(), (0..self.parts.len()).map(|k| self.component(k, q.as_slice())))
    }

    fn jacobian(&self, q: &Vector) -> Matrix {
        let mut j = Matrix::zeros(self.parts.len(), self.dim);
        let mut x = q.as_slice().to_vec();
        for i in 0..self.dim {
            let h = 1e-6 * (1.0 + q[i].abs());
            x[i] = q[i] + h;
            let plus: Vec<f64> = (0..self.parts.len()).map(|k| self.component(k, &x)).collect();
            x[i] = q[i] - h;
            for (k, p) in plus.iter().enumerate() {
                j[(k, i)] = (p - self.component(k, &x)) / (2.0 * h);
            }
            x[i] = q[i];
        }
        j
    }
}

/// `H(q, p)` from an expression in `q` and `p`; NaN where evaluation fails.
pub fn expr_hamiltonian(source: &str, dim: usize) -> Result<HamiltonianField> {
    let e = Expr::parse(source)?;
    let zeros = vec![0.0; dim];
    e.eval_scalar(&Env { q: &zeros, p: &zeros, t: 0.0 })
        .map_err(|err| HarnessError::Config(format!("Hamiltonian `{e}`: {err}")))?;
    let name = format!("expr({source})");
    let eval = move |q: &[f64], p: &[f64]| e.eval_scalar(&Env { q, p, t: 0.0 }).unwrap_or(f64::NAN);
    Ok(HamiltonianField::new(name, dim, Arc::new(eval)))
}
