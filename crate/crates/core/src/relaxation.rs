//! User-driven relaxation of a relation matrix.
//!
//! Every operation is local: it only rewrites cells in the rows and columns
//! of its own activity parameters, and reports exactly those cells in a
//! [`MatrixDiff`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relations::{Activity, RelationKind, RelationMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "OpRecord", into = "OpRecord")]
pub enum RelaxationOp {
    /// Make the activity optional and free to occur anywhere.
    RemoveActivity(Activity),
    /// Drop every ordering relation between two distinct activities.
    Decouple(Activity, Activity),
    /// `−` becomes `→`; `←` becomes `||`; a `−` diagonal becomes `||`.
    ExclusiveToDirect(Activity, Activity),
    /// `→` becomes `≺`; `||` becomes `≺≻`.
    DirectToEventual(Activity, Activity),
}

impl RelaxationOp {
    pub fn name(&self) -> &'static str {
        match self {
            RelaxationOp::RemoveActivity(_) => "remove_activity",
            RelaxationOp::Decouple(..) => "decouple",
            RelaxationOp::ExclusiveToDirect(..) => "exclusive_to_direct",
            RelaxationOp::DirectToEventual(..) => "direct_to_eventual",
        }
    }

    pub fn activities(&self) -> Vec<&Activity> {
        match self {
            RelaxationOp::RemoveActivity(x) => vec![x],
            RelaxationOp::Decouple(a, b)
            | RelaxationOp::ExclusiveToDirect(a, b)
            | RelaxationOp::DirectToEventual(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for RelaxationOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelaxationOp::RemoveActivity(x) => write!(f, "{}({x})", self.name()),
            RelaxationOp::Decouple(a, b)
            | RelaxationOp::ExclusiveToDirect(a, b)
            | RelaxationOp::DirectToEventual(a, b) => write!(f, "{}({a}, {b})", self.name()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpRecord {
    op: String,
    a: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<String>,
}

impl TryFrom<OpRecord> for RelaxationOp {
    type Error = String;

    fn try_from(r: OpRecord) -> Result<Self, Self::Error> {
        if r.a.is_empty() || r.b.as_deref() == Some("") {
            return Err("activity labels must be non-empty".into());
        }
        let a = Activity::new(r.a);
        let pair = |b: Option<String>| {
            b.map(Activity::new)
                .ok_or_else(|| format!("operation `{}` needs field `b`", r.op))
        };
        Ok(match r.op.as_str() {
            "remove_activity" => {
                if r.b.is_some() {
                    return Err("`remove_activity` takes no field `b`".into());
                }
                RelaxationOp::RemoveActivity(a)
            }
            "decouple" => RelaxationOp::Decouple(a, pair(r.b)?),
            "exclusive_to_direct" => RelaxationOp::ExclusiveToDirect(a, pair(r.b)?),
            "direct_to_eventual" => RelaxationOp::DirectToEventual(a, pair(r.b)?),
            other => return Err(format!("unknown operation `{other}`")),
        })
    }
}

impl From<RelaxationOp> for OpRecord {
    fn from(op: RelaxationOp) -> Self {
        let name = op.name().to_owned();
        match op {
            RelaxationOp::RemoveActivity(x) => OpRecord {
                op: name,
                a: x.to_string(),
                b: None,
            },
            RelaxationOp::Decouple(a, b)
            | RelaxationOp::ExclusiveToDirect(a, b)
            | RelaxationOp::DirectToEventual(a, b) => OpRecord {
                op: name,
                a: a.to_string(),
                b: Some(b.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelaxError {
    #[error("unknown activity `{0}`")]
    UnknownActivity(String),
    #[error("{op} rejected: {reason}")]
    PreconditionViolated {
        op: RelaxationOp,
        /// State of the `(a, b)` cell the precondition inspected, if any.
        cell: Option<RelationKind>,
        reason: String,
    },
    #[error("nothing to undo")]
    EmptyHistory,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("operation {index} of the script: {error}")]
pub struct ReplayError {
    pub index: usize,
    pub error: RelaxError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellChange {
    pub row: Activity,
    pub col: Activity,
    pub old: RelationKind,
    pub new: RelationKind,
}

/// Changed cells of one edit, in row-major order. Mirror cells are listed too.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixDiff {
    pub changes: Vec<CellChange>,
}

impl MatrixDiff {
    pub fn between(old: &RelationMatrix, new: &RelationMatrix) -> Self {
        assert_eq!(old.activities(), new.activities());
        let n = old.len();
        let mut changes = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (before, after) = (old.cell(i, j), new.cell(i, j));
                if before != after {
                    changes.push(CellChange {
                        row: old.activities()[i].clone(),
                        col: old.activities()[j].clone(),
                        old: before,
                        new: after,
                    });
                }
            }
        }
        MatrixDiff { changes }
    }

    pub fn len(&self) -> usize {
        self.changes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    /// Applies the recorded changes; `m` is expected to hold every `old` value.
    pub fn apply(&self, m: &RelationMatrix) -> RelationMatrix {
        self.rewrite(m, |c| c.new)
    }

    pub fn revert(&self, m: &RelationMatrix) -> RelationMatrix {
        self.rewrite(m, |c| c.old)
    }

    fn rewrite(
        &self,
        m: &RelationMatrix,
        pick: impl Fn(&CellChange) -> RelationKind,
    ) -> RelationMatrix {
        let mut out = m.clone();
        for c in &self.changes {
            let i = out
                .index_of(c.row.as_str())
                .expect("diff refers to matrix activities");
            let j = out
                .index_of(c.col.as_str())
                .expect("diff refers to matrix activities");
            out.set_pair(i, j, pick(c));
        }
        out
    }
}

fn lookup(m: &RelationMatrix, a: &Activity) -> Result<usize, RelaxError> {
    m.index_of(a.as_str())
        .ok_or_else(|| RelaxError::UnknownActivity(a.to_string()))
}

/// Applies one operation under its precondition.
pub fn apply_op(
    m: &RelationMatrix,
    op: &RelaxationOp,
) -> Result<(RelationMatrix, MatrixDiff), RelaxError> {
    use RelationKind::*;
    let rejected = |cell: Option<RelationKind>, reason: String| RelaxError::PreconditionViolated {
        op: op.clone(),
        cell,
        reason,
    };
    let mut out = m.clone();
    match op {
        RelaxationOp::RemoveActivity(x) => {
            let i = lookup(m, x)?;
            for j in 0..m.len() {
                out.set_pair(i, j, EventualBoth);
            }
        }
        RelaxationOp::Decouple(a, b) => {
            let (i, j) = (lookup(m, a)?, lookup(m, b)?);
            if i == j {
                return Err(rejected(
                    Some(m.cell(i, i)),
                    "decoupling needs two distinct activities".into(),
                ));
            }
            out.set_pair(i, j, EventualBoth);
        }
        RelaxationOp::ExclusiveToDirect(a, b) => {
            let (i, j) = (lookup(m, a)?, lookup(m, b)?);
            let cell = m.cell(i, j);
            let next = match (i == j, cell) {
                (false, Exclusive) => DirectForward,
                (false, DirectBackward) => Concurrent,
                (true, Exclusive) => Concurrent,
                _ => {
                    return Err(rejected(
                        Some(cell),
                        format!(
                            "cell ({a}, {b}) is {cell}; expected {}",
                            if i == j { "−" } else { "− or ←" }
                        ),
                    ))
                }
            };
            out.set_pair(i, j, next);
        }
        RelaxationOp::DirectToEventual(a, b) => {
            let (i, j) = (lookup(m, a)?, lookup(m, b)?);
            let cell = m.cell(i, j);
            let next = match cell {
                DirectForward => EventualForward,
                Concurrent => EventualBoth,
                _ => {
                    return Err(rejected(
                        Some(cell),
                        format!("cell ({a}, {b}) is {cell}; expected → or ||"),
                    ))
                }
            };
            out.set_pair(i, j, next);
        }
    }
    let diff = MatrixDiff::between(m, &out);
    Ok((out, diff))
}

/// An ordered, replayable list of operations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelaxationScript {
    pub ops: Vec<RelaxationOp>,
}

impl RelaxationScript {
    pub fn new(ops: Vec<RelaxationOp>) -> Self {
        RelaxationScript { ops }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("script serializes");
        out.push('\n');
        out
    }

    pub fn from_json(document: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(document)
    }
}

impl FromIterator<RelaxationOp> for RelaxationScript {
    fn from_iter<I: IntoIterator<Item = RelaxationOp>>(iter: I) -> Self {
        RelaxationScript::new(iter.into_iter().collect())
    }
}

/// Left fold of [`apply_op`] over the script.
pub fn replay(
    base: &RelationMatrix,
    script: &RelaxationScript,
) -> Result<RelationMatrix, ReplayError> {
    script
        .ops
        .iter()
        .enumerate()
        .try_fold(base.clone(), |m, (index, op)| {
            apply_op(&m, op)
                .map(|(next, _)| next)
                .map_err(|error| ReplayError { index, error })
        })
}

#[derive(Debug, Clone)]
pub struct Step {
    pub op: RelaxationOp,
    pub before: RelationMatrix,
    pub diff: MatrixDiff,
}

/// Base matrix plus the stack of applied edits.
#[derive(Debug, Clone)]
pub struct EditHistory {
    base: RelationMatrix,
    current: RelationMatrix,
    steps: Vec<Step>,
}

impl EditHistory {
    pub fn new(base: RelationMatrix) -> Self {
        EditHistory {
            current: base.clone(),
            base,
            steps: Vec::new(),
        }
    }

    pub fn base(&self) -> &RelationMatrix {
        &self.base
    }

    pub fn current(&self) -> &RelationMatrix {
        &self.current
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn apply(&mut self, op: RelaxationOp) -> Result<&MatrixDiff, RelaxError> {
        let (next, diff) = apply_op(&self.current, &op)?;
        let before = std::mem::replace(&mut self.current, next);
        self.steps.push(Step { op, before, diff });
        Ok(&self.steps.last().unwrap().diff)
    }

    /// Restores the matrix from before the most recent edit.
    pub fn undo(&mut self) -> Result<&RelationMatrix, RelaxError> {
        let step = self.steps.pop().ok_or(RelaxError::EmptyHistory)?;
        self.current = step.before;
        Ok(&self.current)
    }

    pub fn script(&self) -> RelaxationScript {
        self.steps.iter().map(|s| s.op.clone()).collect()
    }
}
