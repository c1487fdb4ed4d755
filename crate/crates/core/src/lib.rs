//! Grammatical models of administrative workflow processes.
//!
//! A process is described by an attributed-free grammar whose productions are
//! annotated as sequential or parallel, plus per-actor accreditations. A case
//! is a tree artifact that actors grow by developing buds. Each actor only
//! ever sees the projection of that tree onto the sorts it may read.

pub mod engine;
pub mod enumeration;
pub mod expansion;
pub mod format;
pub mod model;
pub mod projection;

pub use model::artifact::{Address, Artifact, NodeState};
pub use model::grammar::{
    is_structuring, Accreditation, Annotation, Gmawfp, Gmwf, Production, Sort, SortKind, View,
};
pub use model::order::{conforms, is_complete, is_prefix, is_update};
pub use model::validate::{validate_gmawfp, Issue, Severity, ValidationOptions, ValidationReport};
