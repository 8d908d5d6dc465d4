use std::fmt;

/// Failure of a CLI run, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(mmfe_core::Error),
    /// Some sweep cells failed to converge; their rows carry the status.
    Numerical(String),
    /// A check or estimate disagreed with its reference.
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use mmfe_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 4,
            CliError::Numerical(_) => 3,
            CliError::Core(e) => match e {
                E::InvalidParameter(_) | E::UnknownStrategy { .. } => 2,
                E::NonConvergence { .. }
                | E::Unstable(_)
                | E::Divergence(_)
                | E::UndefinedMetric(_)
                | E::Discretization(_) => 3,
                _ => 1,
            },
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Validation(_) => "validation",
            CliError::Numerical(_) => "non_convergence",
            CliError::Core(e) => e.category(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Validation(m) | CliError::Numerical(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mmfe_core::Error> for CliError {
    fn from(e: mmfe_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}
