use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad scenario, unknown catalog entry, invalid grid, unreadable file.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error(transparent)]
    Core(#[from] hjsub::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Whether the failure lies in the scenario rather than in a computation.
    pub fn is_config(&self) -> bool {
        use hjsub::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::Expr(_) | HarnessError::Io(_) => true,
            HarnessError::Core(e) => matches!(
                e,
                E::InvalidGrid(_)
                    | E::InvalidArgument(_)
                    | E::UnknownCatalogEntry(_)
                    | E::DimensionMismatch { .. }
                    | E::Io(_)
                    | E::ChartDomain { .. }
                    | E::OutsideTube { .. }
                    | E::OutOfGrid { .. }
            ),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
