use qflrl_core::error::Error;

/// Runner failures, each mapped to a process exit status.
#[derive(Debug)]
pub enum CliError {
    /// Unparseable or invalid configuration.
    Config(String),
    /// An experiment aborted on a numerical failure.
    Numerical(Error),
    /// Any other failure inside an experiment.
    Run(Error),
    /// A summary metric came out NaN or infinite; names the metrics.
    NonFinite(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::NonFinite(_) => 3,
            CliError::Run(_) | CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) | CliError::NonFinite(_) => "numerical",
            CliError::Run(_) => "runtime",
            CliError::Io(_) => "io",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) => f.write_str(m),
            CliError::NonFinite(keys) => write!(f, "non-finite metrics: {keys}"),
            CliError::Numerical(e) | CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Errors raised while the experiment runs. Invalid arguments at that point
/// come from the configuration values.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else if matches!(e, Error::InvalidArgument(_) | Error::Unsupported(_) | Error::Shape(_)) {
            CliError::Config(e.to_string())
        } else {
            CliError::Run(e)
        }
    }
}
