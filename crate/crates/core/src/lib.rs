pub mod eels;
pub mod error;
pub mod floquet;
pub mod lindblad;
pub mod model;
pub mod oracle;

pub use error::{Error, ErrorKind, Result};
