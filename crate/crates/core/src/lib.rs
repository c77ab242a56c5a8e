//! Desk-scale laboratory for identifying overloaded vehicles on a bridge
//! girder section from displacement monitoring data.
//!
//! The pipeline runs traffic simulation ([`traffic`]), quasi-static bridge
//! response synthesis ([`structure`]), dataset preparation ([`dataset`]),
//! classifier training ([`models`]) and evaluation studies
//! ([`evaluation`]).

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod io_util;
pub mod models;
pub mod pipeline;
pub mod presets;
pub mod structure;
pub mod traffic;

pub use error::{Error, ErrorKind, Result};
