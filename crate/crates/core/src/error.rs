use std::path::PathBuf;

/// Errors raised by the library.
///
/// [`Error::is_config`] separates configuration mistakes (bad tags, invalid
/// hyperparameters) from contract violations and numeric failures; the CLI
/// maps the two groups onto different exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    Convergence { sweeps: usize, off_norm: f64 },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("non-finite value produced at node {node}")]
    NonFinite { node: usize },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("search space has {size} encodings, above the cap of {cap}; reduce the node count or the op set")]
    SpaceTooLarge { size: u128, cap: u64 },

    #[error("mutation impossible: the op set has a single operation")]
    MutationImpossible,

    #[error("no cached value for {key} in record {arch}; rebuild the benchmark with snapshot epochs that include t={epoch} or pass --recompute")]
    MissingSnapshot { arch: String, key: String, epoch: usize },

    #[error("all values tied; rank correlation undefined")]
    TiedRanks,

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::MutationImpossible | Error::SpaceTooLarge { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
