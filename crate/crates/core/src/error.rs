use std::path::PathBuf;

use crate::geometry::Point3;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty geometry")]
    EmptyGeometry,

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),

    #[error("invalid scale: {0}")]
    InvalidScale(String),

    #[error("coordinate outside encoded volume: {axis} = {value}")]
    OutsideEncodedVolume { axis: char, value: f64 },

    #[error("scale volume too small: mesh extends to {point:?}")]
    ScaleTooSmall { point: Point3 },

    #[error("map count {maps} does not match schedule frame count {frames}")]
    MapCountMismatch { maps: usize, frames: usize },

    #[error("coordinate maps do not share one scale")]
    MixedScales,

    #[error("invalid coordinate map: {0}")]
    InvalidMap(String),

    #[error("invalid fixation: {0}")]
    InvalidFixation(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid voxel grid: {0}")]
    InvalidGrid(String),

    #[error("fixation outside voxel grid: ({}, {}, {})", point.x, point.y, point.z)]
    OutsideVoxelGrid { point: Point3 },

    #[error("vertex {index} outside voxel grid")]
    VertexOutsideGrid { index: usize },

    #[error("empty saliency map")]
    EmptySaliencyMap,

    #[error("no fixations")]
    NoFixations,

    #[error("grid dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: [usize; 3], b: [usize; 3] },

    #[error("constant map has undefined correlation")]
    ConstantMap,

    #[error("mesh has no region labels")]
    MissingRegionLabels,

    #[error("invalid colormap: {0}")]
    InvalidColormap(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message} at line {line}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl Error {
    /// Short stable identifier, used for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyGeometry => "empty_geometry",
            Error::InvalidCamera(_) => "invalid_camera",
            Error::InvalidMesh(_) => "invalid_mesh",
            Error::InvalidTransform(_) => "invalid_transform",
            Error::InvalidScale(_) => "invalid_scale",
            Error::OutsideEncodedVolume { .. } => "outside_encoded_volume",
            Error::ScaleTooSmall { .. } => "scale_too_small",
            Error::MapCountMismatch { .. } => "map_count_mismatch",
            Error::MixedScales => "mixed_scales",
            Error::InvalidMap(_) => "invalid_map",
            Error::InvalidFixation(_) => "invalid_fixation",
            Error::InvalidSchedule(_) => "invalid_schedule",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::OutsideVoxelGrid { .. } => "outside_voxel_grid",
            Error::VertexOutsideGrid { .. } => "vertex_outside_grid",
            Error::EmptySaliencyMap => "empty_saliency_map",
            Error::NoFixations => "no_fixations",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ConstantMap => "constant_map",
            Error::MissingRegionLabels => "missing_region_labels",
            Error::InvalidColormap(_) => "invalid_colormap",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Format { .. } => "format",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
