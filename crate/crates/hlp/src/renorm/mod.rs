//! Renormalization schemes as executable diagnostics: schedules, block
//! classification, deterministic validators and connection bounds.

pub mod bounds;
pub mod full;
pub mod graph;
pub mod interaction;
pub mod levels;
pub mod recursion;
pub mod schedule;
pub mod simple;
pub mod validate;

pub use bounds::{bound_evaluators, BoundKind, BoundParams, BoundResult};
pub use full::{classify_full, Case, Label, LabelTree};
pub use graph::{block_graph, BlockGraph, GraphVariant};
pub use interaction::{interaction, Interaction};
pub use recursion::{bm_recursion, BmReport};
pub use schedule::{FullParams, ScheduleFull, ScheduleSimple};
pub use simple::{check_niceness, classify_simple, NicenessReport, SimpleLabels};
pub use validate::{validate_density_evolution, DensityReport};
