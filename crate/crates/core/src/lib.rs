//! Relaxable behavioral relations for sound, free-choice workflow nets.
//!
//! The pipeline runs in three steps: derive the relation matrix of a net
//! ([`pipeline::derive`]), relax it with user edits ([`relaxation`]), and
//! generate branched Declare constraints from the result ([`constraints`]).
//! Constraints are then checked against event logs ([`checker`]) or
//! translated to MATCH_RECOGNIZE queries ([`sqlgen`]).

pub mod checker;
pub mod constraints;
pub mod net;
pub mod pipeline;
pub mod relations;
pub mod relaxation;
pub mod sqlgen;

pub use checker::{
    check_log, evaluate_constraint, parse_event_log, ConformanceReport, Trace, Verdict,
};
pub use constraints::{constraints_from_matrix, generate_constraints, Constraint, ConstraintSet};
pub use net::{check_free_choice, check_soundness, parse_pnml, WorkflowNet};
pub use relations::{
    build_matrix, derive_directly_follows, transitive_closure, Activity, RelationKind,
    RelationMatrix,
};
pub use relaxation::{apply_op, replay, EditHistory, MatrixDiff, RelaxationOp, RelaxationScript};
pub use sqlgen::{emit_query, emit_schema, render_bundle, QueryBundle, QueryMode};
