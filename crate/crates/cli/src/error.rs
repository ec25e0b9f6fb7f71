use thiserror::Error;

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const NOT_CONVERGED: i32 = 3;
    pub const INVALID_CONFIG: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{source_name}: line {line}, column {column}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] convex_bicluster::Error),
}

impl CliError {
    pub fn parse(source: &str, line: u64, column: usize, message: impl Into<String>) -> Self {
        CliError::Parse {
            source_name: source.to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use convex_bicluster::Error as E;
        match self {
            CliError::Parse { .. } => exit::PARSE,
            CliError::Config(_) => exit::INVALID_CONFIG,
            CliError::Io(_) => exit::FAILURE,
            CliError::Core(e) => match e {
                E::InvalidInput(_)
                | E::DimensionMismatch(_)
                | E::InvalidConfig(_)
                | E::NotCompositional { .. }
                | E::UnknownStrategy { .. } => exit::INVALID_CONFIG,
                _ => exit::FAILURE,
            },
        }
    }
}
