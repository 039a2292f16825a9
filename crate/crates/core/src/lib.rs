//! Distributed reactive programming with persistent signals: a reduction
//! machine over a time-series store, with consistency checks and the
//! checkpoint recovery protocol.

pub mod calculus;
pub mod consistency;
pub mod engine;
pub mod env;
pub mod feed;
pub mod fixtures;
pub mod oracle;
pub mod recovery;
pub mod store;

pub use calculus::{Expr, Ident, Mode, Process};
pub use engine::{EngineError, MachineState};
pub use store::Timestamp;
