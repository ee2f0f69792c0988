use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Verification(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::NonConvergence(_) => "nonconvergence",
            CliError::Verification(_) => "verification",
        }
    }

    /// `error kind=<kind> code=<code> reason="<message>"` on one line.
    pub fn report(&self) -> ExitCode {
        let reason = self.to_string().replace('\n', " ").replace('"', "'");
        eprintln!(
            "error kind={} code={} reason=\"{}\"",
            self.kind(),
            self.code(),
            reason
        );
        ExitCode::from(self.code())
    }
}

impl From<tlasso::Error> for CliError {
    fn from(e: tlasso::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("io: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Validation(format!("csv: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}
