use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("region crosses the antimeridian, which is not supported")]
    AntimeridianCrossing,
    #[error("latitude {lat_deg}° is too close to a pole for a local degree step (|lat| must be < 89°)")]
    PoleProximity { lat_deg: f64 },
    #[error("spacing must be positive, got {0} m")]
    InvalidSpacing(f64),
    #[error("region {0} contains no sample locations")]
    EmptyRegion(String),
    #[error("rejection sampling gave up after {0} consecutive rejections")]
    RejectionOverflow(u64),
    #[error("views per point must be at least 1")]
    InvalidK,
    #[error("provider rejected credentials: {0}")]
    ProviderAuth(String),
    #[error("duplicate image id {0} in manifest")]
    DuplicateImageId(String),
    #[error("image dimensions unknown for {0}; fraction mode needs them")]
    MissingDims(String),
    #[error("point {point_id} falls inside regions {first} and {second}")]
    OverlappingRegions {
        point_id: String,
        first: String,
        second: String,
    },
    #[error("detector backend error: {0}")]
    Backend(String),
    #[error("invalid detection data: {0}")]
    InvalidDetection(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Format(String),
}

impl Error {
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

    /// Errors caused by bad input rather than a failing runtime dependency.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io { .. } | Error::Backend(_) | Error::ProviderAuth(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
