use thiserror::Error;

/// Pipeline stages, used to attribute numerical failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    GenPotential,
    Classify,
    Forward,
    Evolve,
    Invert,
    Verify,
    Io,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::GenPotential => "gen-potential",
            Stage::Classify => "classify",
            Stage::Forward => "forward",
            Stage::Evolve => "evolve",
            Stage::Invert => "invert",
            Stage::Verify => "verify",
            Stage::Io => "io",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or grid parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative solver failed to converge or produced non-finite values.
    #[error("numerical failure in stage {stage}: {msg}")]
    Numerical { stage: Stage, msg: String },

    /// Reconstruction produced a field violating the reality symmetry.
    #[error("symmetry violation: imaginary defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    SymmetryViolation { defect: f64, tol: f64 },

    /// A positive solution was requested for a potential that has none.
    #[error("classification conflict: {0}")]
    ClassificationConflict(String),

    /// The potential is supercritical; the inverse scattering method does not apply.
    #[error("refusing supercritical potential: lambda_min = {lambda_min:.6e}")]
    Refusal { lambda_min: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn numerical(stage: Stage, msg: impl Into<String>) -> Self {
        Error::Numerical {
            stage,
            msg: msg.into(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
