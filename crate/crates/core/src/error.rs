use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Csv {
        file: PathBuf,
        line: u64,
        message: String,
    },

    #[error("dataset detection failed: {0}")]
    Detect(String),

    #[error("recording {recording}: {message}")]
    Recording { recording: String, message: String },

    #[error("cannot decimate recording {recording}: {source_hz} Hz -> {target_hz} Hz is not an integer ratio")]
    Rate {
        recording: String,
        source_hz: f64,
        target_hz: f64,
    },

    #[error("filter design: {0}")]
    Filter(String),

    #[error("scenario {scenario_id}, field `{field}`: {message}")]
    Record {
        scenario_id: String,
        field: &'static str,
        message: String,
    },

    #[error("split format: {0}")]
    Format(String),

    #[error("osm element {element}: {message}")]
    Osm { element: String, message: String },

    #[error("projection: {0}")]
    Projection(String),

    #[error("maneuver labeling: {0}")]
    Label(String),

    #[error("prediction file line {line}: {message}")]
    Prediction { line: usize, message: String },

    #[error("evaluation: {0}")]
    Evaluation(String),

    #[error("metric: {0}")]
    Metric(String),

    #[error("leakage audit found {0} agents scored in more than one split or outside their owning split")]
    Leakage(usize),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("json ({context}): {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// The error with any stage tags removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// Tag an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn record(
        scenario_id: impl Into<String>,
        field: &'static str,
        message: impl Into<String>,
    ) -> Self {
        Error::Record {
            scenario_id: scenario_id.into(),
            field,
            message: message.into(),
        }
    }
}
