use alloc::boxed::Box;
use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter or precondition is out of its allowed range.
    #[error("configuration error: {0}")]
    Config(String),
    /// Dimensions of two inputs do not agree.
    #[error("shape error: {0}")]
    Shape(String),
    /// A computation produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("item {index}: {source}")]
    AtIndex { index: usize, source: Box<Error> },
}

impl Error {
    pub fn at(self, index: usize) -> Self {
        Error::AtIndex {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(alloc::format!($($arg)*)) };
}
macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(alloc::format!($($arg)*)) };
}
pub(crate) use config_err;
pub(crate) use shape_err;
