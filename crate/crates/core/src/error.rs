use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two operands disagree along a named axis.
    #[error("{op}: {axis} mismatch ({detail})")]
    Shape {
        op: &'static str,
        axis: &'static str,
        detail: String,
    },

    #[error("{op}: invalid argument: {detail}")]
    InvalidArgument { op: &'static str, detail: String },

    #[error("{op}: non-finite value at flat index {index}")]
    NonFinite { op: &'static str, index: usize },

    #[error("inverse transform left an imaginary residue of {residue:.3e} (max real part {max_real:.3e})")]
    ImaginaryResidue { residue: f64, max_real: f64 },

    #[error("weights archive has no entry named `{0}`")]
    MissingWeight(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("graph: {0}")]
    Graph(String),

    #[error("config: {0}")]
    Config(String),

    #[error("format: {0}")]
    Format(#[from] crate::io::FormatError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, axis: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            axis,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(op: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            detail: detail.into(),
        }
    }

    /// Wraps the error with a human-readable location, e.g. `mddc scale 6`.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error after peeling off all context layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context_with(self, f: impl FnOnce() -> String) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context_with(self, f: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.context(f()))
    }
}
