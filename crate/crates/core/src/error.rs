use thiserror::Error;

/// Errors produced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("frame {frame} is unlabeled inside the pole-in-reach region")]
    UnlabeledFrame { frame: usize },
    #[error("invalid segments: {0}")]
    InvalidSegments(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("template has zero variance")]
    DegenerateTemplate,
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invalid offset {0}")]
    InvalidOffset(i64),
    #[error("invalid window {0}: must be odd and >= 3")]
    InvalidWindow(usize),
    #[error("need at least 2 features, got {0}")]
    TooFewFeatures(usize),
    #[error("label error: {0}")]
    Label(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no start frame keeps the pole in reach for every selected video")]
    NoCommonWindow,
    #[error("missing metadata: {0}")]
    MissingMetadata(String),
    #[error("no usable touch onsets")]
    NoOnsets,
    #[error("baseline standard deviation is zero")]
    DegenerateBaseline,
    #[error("signal window is empty")]
    EmptyWindow,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("frame index {index} out of range for {count} frames")]
    FrameIndex { index: usize, count: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnlabeledFrame { .. } => "UnlabeledFrame",
            Error::InvalidSegments(_) => "InvalidSegments",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::Format(_) => "FormatError",
            Error::CorruptFile(_) => "CorruptFile",
            Error::Size(_) => "SizeError",
            Error::DegenerateTemplate => "DegenerateTemplate",
            Error::EmptyInput(_) => "EmptyInput",
            Error::InvalidOffset(_) => "InvalidOffset",
            Error::InvalidWindow(_) => "InvalidWindow",
            Error::TooFewFeatures(_) => "TooFewFeatures",
            Error::Label(_) => "LabelError",
            Error::DegenerateData(_) => "DegenerateData",
            Error::UndefinedMetric(_) => "UndefinedMetric",
            Error::InsufficientData(_) => "InsufficientData",
            Error::NoCommonWindow => "NoCommonWindow",
            Error::MissingMetadata(_) => "MissingMetadata",
            Error::NoOnsets => "NoOnsets",
            Error::DegenerateBaseline => "DegenerateBaseline",
            Error::EmptyWindow => "EmptyWindow",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::FrameIndex { .. } => "FrameIndex",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
