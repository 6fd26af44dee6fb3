use std::path::PathBuf;

use infodemic_core::Violation;
use thiserror::Error;

use crate::svg::SvgError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration")]
    Invalid(Vec<Violation>),

    #[error("cannot parse configuration: {0}")]
    Parse(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] infodemic_core::Error),

    #[error(transparent)]
    Svg(#[from] SvgError),
}

impl CliError {
    /// One `error: <kind>: <field>: <message>` line per problem.
    pub fn lines(&self) -> Vec<String> {
        use infodemic_core::Error as E;
        let line = |kind: &str, field: &str, message: &str| {
            format!("error: {kind}: {field}: {}", message.replace('\n', " "))
        };
        match self {
            CliError::Invalid(vs) => vs
                .iter()
                .map(|v| line("invalid", &v.field, &v.message))
                .collect(),
            CliError::Parse(m) => vec![line("parse", "config", m)],
            CliError::Io { path, source } => {
                vec![line("io", &path.display().to_string(), &source.to_string())]
            }
            CliError::Svg(e) => vec![line("svg", "series", &e.to_string())],
            CliError::Core(e) => match e {
                E::Invalid(vs) => vs
                    .iter()
                    .map(|v| line("invalid", &v.field, &v.message))
                    .collect(),
                E::NonFinite { .. } | E::Run { .. } | E::Cell { .. } => {
                    vec![line("numeric", "simulation", &e.to_string())]
                }
                E::Config(m) => vec![line("config", "integrator", m)],
                E::GridMismatch(m) => vec![line("data", "grid", m)],
                E::InsufficientData { .. } => vec![line("data", "values", &e.to_string())],
                E::Csv(_) => vec![line("data", "csv", &e.to_string())],
                E::Io(_) => vec![line("io", "-", &e.to_string())],
            },
        }
    }
}
