//! Signal-class surface language.
//!
//! A program is a list of `signal class` declarations and a `main` block.
//! [`compile`] parses it, infers each class's timing and lowers the whole
//! thing to an initial resolver plus one calculus expression whose explicit
//! reduction builds the network.

pub mod annotate;
pub mod ast;
pub mod lexer;
pub mod lower;
pub mod parser;
pub mod timing;

pub use annotate::{annotate_classes, infer_and_check_annotations, ClassTiming};
pub use ast::{ClassDecl, Program, SExpr, Stmt};
pub use lower::{lower, Lowered};
pub use parser::{parse_expr, parse_program};
pub use timing::{parse_timing, TimingSpec};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class `{0}` declared twice")]
    DuplicateClass(String),
    #[error("class `{class}` declares `{member}` twice")]
    DuplicateMember { class: String, member: String },
    #[error("instance id `{0}` used twice")]
    DuplicateId(String),
    #[error("`new {class}` expects {expected} upstream argument(s), found {found}")]
    ArityMismatch { class: String, expected: usize, found: usize },
    #[error("slot `{slot}` of `{class}` expects a `{expected}`, found a `{found}`")]
    SlotClassMismatch {
        class: String,
        slot: String,
        expected: String,
        found: String,
    },
    #[error("class `{class}` declares a period of {declared} tick(s) but its upstreams give {expected}")]
    Annotation { class: String, expected: u64, declared: u64 },
    #[error("a period of {seconds}s is not a whole number of {tick_seconds}s ticks")]
    IndivisiblePeriod { seconds: u64, tick_seconds: u64 },
    #[error("upstream declarations are cyclic through class `{0}`")]
    CyclicWiring(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("`{class}` has no member `{member}`")]
    UnknownMember { class: String, member: String },
    #[error("bad `new`: {0}")]
    BadNew(String),
    #[error("bad annotation on `{class}`: {message}")]
    BadAnnotation { class: String, message: String },
}

impl DslError {
    pub fn syntax(offset: usize, message: impl Into<String>) -> Self {
        DslError::Syntax {
            offset,
            message: message.into(),
        }
    }

    /// Move a syntax error found in a substring to its place in the source.
    pub fn shifted(self, base: usize) -> Self {
        match self {
            DslError::Syntax { offset, message } => DslError::Syntax {
                offset: offset + base,
                message,
            },
            other => other,
        }
    }
}

/// Parse, check annotations and lower in one go.
pub fn compile(src: &str, tick_seconds: u64) -> Result<Lowered, DslError> {
    let program = parse_program(src)?;
    lower(&program, tick_seconds)
}
