use std::path::PathBuf;

use crate::geo::TazId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry for TAZ {0}: {1}")]
    InvalidGeometry(TazId, String),

    #[error("invalid TAZ layer: {0}")]
    InvalidTazLayer(String),

    #[error("duplicate TAZ id {0}")]
    DuplicateTaz(TazId),

    #[error("distance matrix has no entry for pair ({0}, {1})")]
    IncompleteMatrix(TazId, TazId),

    #[error("distance matrix is asymmetric for pair ({0}, {1}): {2} vs {3}")]
    AsymmetricMatrix(TazId, TazId, f64, f64),

    #[error("no distance row for pair ({0}, {1})")]
    MissingDistance(TazId, TazId),

    #[error("zero distance between {0} and {1} after flooring")]
    ZeroDistance(TazId, TazId),

    #[error("network has no weight (2m = 0)")]
    EmptyNetwork,

    #[error("unknown node index {0}")]
    UnknownNode(usize),

    #[error("unknown zone {0}")]
    UnknownZone(usize),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("node sets differ: {0}")]
    IdMismatch(String),

    #[error("fragment of zone {0} has no polygon neighbors")]
    IslandNoNeighbors(usize),

    #[error("repair did not converge after {0} merges")]
    NonConvergence(usize),

    #[error("cannot reach {k} zones: zone adjacency has {components} connected components")]
    Infeasible { k: usize, components: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },

    #[error("malformed record at line {line}: {reason}")]
    Malformed { line: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    GeoJson(#[from] Box<geojson::Error>),
}

impl From<geojson::Error> for Error {
    fn from(e: geojson::Error) -> Self {
        Error::GeoJson(Box::new(e))
    }
}
