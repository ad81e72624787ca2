use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (geometry, material table, port set-up, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("unknown line tag `{0}`")]
    UnknownLine(String),

    #[error("no refractive index given for material `{material}` (region `{region}`)")]
    MissingMaterial { material: String, region: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular system: zero pivot at dof {dof} ({entity})")]
    Singular { dof: usize, entity: String },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    /// A mode whose non-conjugated self product vanishes cannot be normalised.
    #[error("mode {mode} is self-orthogonal (e^T B e = {value:.3e})")]
    SelfOrthogonal { mode: usize, value: f64 },

    #[error("modes {0:?} have vanishing normalisation constant and are unusable")]
    UnusableModes(Vec<usize>),

    #[error("restriction matrix is rank deficient: columns {first} and {second} are numerically dependent")]
    RankDeficient { first: usize, second: usize },

    #[error("projection onto {modes} modes is rank deficient (numerical rank {rank})")]
    ProjectionRank { rank: usize, modes: usize },

    #[error("linear solver did not converge: {0}")]
    NoConvergence(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dense linear algebra failure: {0}")]
    Lapack(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Mesh(_)
                | Error::UnknownLine(_)
                | Error::MissingMaterial { .. }
                | Error::Config(_)
                | Error::Io { .. }
        )
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Lapack(e.to_string())
    }
}
