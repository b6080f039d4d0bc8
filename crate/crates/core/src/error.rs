//! One error enum for the whole crate. Variants map to the failure classes
//! the public operations can actually produce; internal invariant violations
//! panic instead (they indicate simulator bugs, not bad input).

use std::fmt;
use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Bad run configuration (out-of-range parameter, inconsistent modes...).
    Config(String),
    /// A node index that does not exist in the configured mesh.
    InvalidNode { index: u32, nodes: u32 },
    /// Bus endpoints coincide; the span (and the allocation) is degenerate.
    DegenerateSpan { node: u32 },
    /// Trace file rejected, with the 1-based line number that failed.
    Trace { line: usize, msg: String },
    /// Reconfiguration protocol violated (e.g. duplicate node reports).
    Protocol(String),
    /// Optical span needs more laser power than the configured ceiling.
    InfeasibleSpan { span_mm: f64, required_w: f64, ceiling_w: f64 },
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::InvalidNode { index, nodes } => {
                write!(f, "node {index} out of range (mesh has {nodes} nodes)")
            }
            Error::DegenerateSpan { node } => {
                write!(f, "bus endpoints coincide at node {node}; span is degenerate")
            }
            Error::Trace { line, msg } => write!(f, "trace line {line}: {msg}"),
            Error::Protocol(msg) => write!(f, "reconfiguration protocol error: {msg}"),
            Error::InfeasibleSpan { span_mm, required_w, ceiling_w } => write!(
                f,
                "optical span {span_mm} mm needs {required_w:.3e} W of laser power, \
                 above the {ceiling_w:.3e} W ceiling"
            ),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

// Display already embeds the cause text, so no variant re-exposes it as
// source(); printers that walk the chain would repeat the message.
impl std::error::Error for Error {}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}
