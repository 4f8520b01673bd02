use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulation / planning pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh has {0} vertices, at least 2 are required")]
    TooFewVertices(usize),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("light direction is below the surface (L·N = {0})")]
    LightBelowSurface(f64),

    #[error("response recovery failed: {0}")]
    SingularResponse(String),

    #[error("recovered response curve is not monotone ({violations} violations)")]
    NonMonotoneResponse { violations: usize },

    #[error("calibration exposure too long: every masked pixel is saturated")]
    CalibrationSaturated,

    #[error("calibration mask selects no usable pixels")]
    EmptyMask,

    #[error("only {found} back-lobe samples (cos α < 0), need {required}; try a calibration pose that shows more of the surface away from the highlight")]
    TooFewDiffuseSamples { found: usize, required: usize },

    #[error("no specular signal: {0}")]
    NoSpecularSignal(String),

    #[error("candidate set is empty")]
    NoCandidates,

    #[error("candidate pool exhausted")]
    CandidatesExhausted,

    #[error("max-distance baseline needs at least one visited viewpoint")]
    NoVisitedViewpoints,

    #[error("unknown mesh or material reference: {0}")]
    UnresolvedReference(String),

    #[error("config validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Wraps the error with a context line (e.g. a run id).
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_) | Error::Parse { .. } | Error::InvalidArgument(_) => true,
            Error::Context { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
