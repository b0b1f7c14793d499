use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("projection singularity: point is antipodal to the projection center")]
    ProjectionSingularity,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed grid at line {line}: {msg}")]
    GridParse { line: usize, msg: String },

    #[error("grid dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("no preference data for criterion {criterion} ({tech})")]
    NoPreferenceData { criterion: u8, tech: String },

    #[error("region below resolution: {0} rasterizes to zero cells")]
    RegionBelowResolution(String),

    #[error("no yield: annual energy must be positive")]
    NoYield,

    #[error("missing water balance components: {}", .0.join(", "))]
    MissingComponents(Vec<String>),

    #[error("missing scenario data: {}", abbreviate(.0, 8))]
    MissingScenarioData(Vec<String>),

    #[error("no coastal access within {0} km")]
    NoCoastalAccess(f64),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("invalid input data: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

fn abbreviate(items: &[String], keep: usize) -> String {
    if items.len() <= keep {
        return items.join(", ");
    }
    format!("{}, ... ({} files in total)", items[..keep].join(", "), items.len())
}
