//! Behavioral relations: directly-follows derivation over the reachability
//! graph, the relation matrix and transitive closure.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{ReachabilityGraph, WorkflowNet};

/// An activity label. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Activity(String);

impl Activity {
    /// # Panics
    /// If `label` is empty.
    pub fn new(label: impl Into<String>) -> Self {
        let label = label.into();
        assert!(!label.is_empty(), "activity labels must be non-empty");
        Activity(label)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Activity {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Activity {
    fn from(label: &str) -> Self {
        Activity::new(label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationKind {
    /// `→`
    DirectForward,
    /// `←`
    DirectBackward,
    /// `||`
    Concurrent,
    /// `−`
    Exclusive,
    /// `≺`
    EventualForward,
    /// `≻`
    EventualBackward,
    /// `≺≻`, unconstrained in both directions
    EventualBoth,
}

impl RelationKind {
    pub const ALL: [RelationKind; 7] = [
        RelationKind::DirectForward,
        RelationKind::DirectBackward,
        RelationKind::Concurrent,
        RelationKind::Exclusive,
        RelationKind::EventualForward,
        RelationKind::EventualBackward,
        RelationKind::EventualBoth,
    ];

    pub fn mirror(self) -> Self {
        use RelationKind::*;
        match self {
            DirectForward => DirectBackward,
            DirectBackward => DirectForward,
            EventualForward => EventualBackward,
            EventualBackward => EventualForward,
            Concurrent | Exclusive | EventualBoth => self,
        }
    }

    /// Kinds allowed on the diagonal.
    pub fn is_reflexive(self) -> bool {
        matches!(
            self,
            RelationKind::Exclusive | RelationKind::Concurrent | RelationKind::EventualBoth
        )
    }

    /// ASCII code used in matrix files.
    pub fn code(self) -> &'static str {
        use RelationKind::*;
        match self {
            DirectForward => "->",
            DirectBackward => "<-",
            Concurrent => "||",
            Exclusive => "-",
            EventualForward => "<",
            EventualBackward => ">",
            EventualBoth => "<>",
        }
    }

    pub fn symbol(self) -> &'static str {
        use RelationKind::*;
        match self {
            DirectForward => "→",
            DirectBackward => "←",
            Concurrent => "||",
            Exclusive => "−",
            EventualForward => "≺",
            EventualBackward => "≻",
            EventualBoth => "≺≻",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for RelationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationKind::ALL
            .into_iter()
            .find(|k| k.code() == s || k.symbol() == s)
            .ok_or_else(|| format!("unknown relation symbol `{s}`"))
    }
}

impl Serialize for RelationKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for RelationKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A set of ordered activity pairs, stored as a successor map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairSet {
    succ: BTreeMap<Activity, BTreeSet<Activity>>,
}

/// Directly-follows pairs `(a, b)`: `b` may occur immediately after `a`.
pub type DirectlyFollowsSet = PairSet;

impl PairSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, a: Activity, b: Activity) -> bool {
        self.succ.entry(a).or_default().insert(b)
    }

    pub fn remove(&mut self, a: &str, b: &str) -> bool {
        let Some(targets) = self.succ.get_mut(a) else {
            return false;
        };
        let removed = targets.remove(b);
        if targets.is_empty() {
            self.succ.remove(a);
        }
        removed
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        self.succ.get(a).is_some_and(|s| s.contains(b))
    }

    /// Activities appearing as the first component of some pair, sorted.
    pub fn sources(&self) -> impl Iterator<Item = &Activity> {
        self.succ.keys()
    }

    pub fn successors(&self, a: &str) -> impl Iterator<Item = &Activity> {
        self.succ.get(a).into_iter().flatten()
    }

    pub fn successor_set(&self, a: &str) -> Option<&BTreeSet<Activity>> {
        self.succ.get(a)
    }

    /// Sources `a` with `(a, x)` in the set.
    pub fn predecessors<'a>(&'a self, x: &'a str) -> impl Iterator<Item = &'a Activity> + 'a {
        self.succ
            .iter()
            .filter(move |(_, s)| s.contains(x))
            .map(|(a, _)| a)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Activity, &Activity)> {
        self.succ
            .iter()
            .flat_map(|(a, s)| s.iter().map(move |b| (a, b)))
    }

    pub fn len(&self) -> usize {
        self.succ.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }
}

impl<A: Into<Activity>> FromIterator<(A, A)> for PairSet {
    fn from_iter<I: IntoIterator<Item = (A, A)>>(iter: I) -> Self {
        let mut set = PairSet::new();
        for (a, b) in iter {
            set.insert(a.into(), b.into());
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelationError {
    #[error("unknown activity `{0}`")]
    UnknownActivity(String),
    #[error("activity `{0}` listed more than once")]
    DuplicateActivity(String),
    #[error("empty activity label")]
    EmptyLabel,
    #[error("malformed matrix document: {0}")]
    Malformed(String),
    #[error("matrix has {rows} rows of lengths {lengths:?} for {activities} activities")]
    Shape {
        activities: usize,
        rows: usize,
        lengths: Vec<usize>,
    },
    #[error("cell ({row}, {col}) holds `{symbol}`: unknown relation symbol")]
    UnknownSymbol {
        row: String,
        col: String,
        symbol: String,
    },
    #[error("cells ({a}, {b}) = {ab} and ({b}, {a}) = {ba} are not mirror images")]
    MirrorViolation {
        a: String,
        b: String,
        ab: RelationKind,
        ba: RelationKind,
    },
    #[error("diagonal cell of `{activity}` holds {kind}; only −, || and ≺≻ are allowed")]
    DiagonalViolation {
        activity: String,
        kind: RelationKind,
    },
}

/// Square matrix of relations over an ordered activity list.
///
/// Invariants: `cell(a, b) == cell(b, a).mirror()` for `a != b`, and
/// diagonal cells are reflexive kinds.
#[derive(Debug, Clone)]
pub struct RelationMatrix {
    activities: Vec<Activity>,
    index: HashMap<Activity, usize>,
    cells: Vec<RelationKind>,
}

impl PartialEq for RelationMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.activities == other.activities && self.cells == other.cells
    }
}

impl Eq for RelationMatrix {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    activities: Vec<String>,
    cells: Vec<Vec<String>>,
}

impl RelationMatrix {
    fn filled(activities: Vec<Activity>, kind: RelationKind) -> Result<Self, RelationError> {
        let mut index = HashMap::with_capacity(activities.len());
        for (i, a) in activities.iter().enumerate() {
            if index.insert(a.clone(), i).is_some() {
                return Err(RelationError::DuplicateActivity(a.to_string()));
            }
        }
        let n = activities.len();
        Ok(RelationMatrix {
            activities,
            index,
            cells: vec![kind; n * n],
        })
    }

    /// Builds a matrix from explicit rows and checks all invariants.
    pub fn from_rows(
        activities: Vec<Activity>,
        rows: Vec<Vec<RelationKind>>,
    ) -> Result<Self, RelationError> {
        let n = activities.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(RelationError::Shape {
                activities: n,
                rows: rows.len(),
                lengths: rows.iter().map(Vec::len).collect(),
            });
        }
        let mut m = Self::filled(activities, RelationKind::Exclusive)?;
        m.cells = rows.into_iter().flatten().collect();
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), RelationError> {
        let n = self.len();
        for i in 0..n {
            let d = self.cell(i, i);
            if !d.is_reflexive() {
                return Err(RelationError::DiagonalViolation {
                    activity: self.activities[i].to_string(),
                    kind: d,
                });
            }
            for j in (i + 1)..n {
                let (ab, ba) = (self.cell(i, j), self.cell(j, i));
                if ab.mirror() != ba {
                    return Err(RelationError::MirrorViolation {
                        a: self.activities[i].to_string(),
                        b: self.activities[j].to_string(),
                        ab,
                        ba,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn activities(&self) -> &[Activity] {
        &self.activities
    }

    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }

    pub fn index_of(&self, activity: &str) -> Option<usize> {
        self.index.get(activity).copied()
    }

    pub fn cell(&self, row: usize, col: usize) -> RelationKind {
        self.cells[row * self.len() + col]
    }

    pub fn get(&self, a: &str, b: &str) -> Option<RelationKind> {
        Some(self.cell(self.index_of(a)?, self.index_of(b)?))
    }

    /// Sets `(row, col)` and its mirror cell.
    pub(crate) fn set_pair(&mut self, row: usize, col: usize, kind: RelationKind) {
        let n = self.len();
        self.cells[row * n + col] = kind;
        self.cells[col * n + row] = kind.mirror();
    }

    pub fn rows(&self) -> impl Iterator<Item = &[RelationKind]> {
        self.cells.chunks(self.len().max(1)).take(self.len())
    }

    pub fn to_json(&self) -> String {
        let file = MatrixFile {
            activities: self.activities.iter().map(|a| a.to_string()).collect(),
            cells: self
                .rows()
                .map(|r| r.iter().map(|k| k.code().to_owned()).collect())
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("matrix serializes");
        out.push('\n');
        out
    }

    pub fn from_json(document: &str) -> Result<Self, RelationError> {
        let file: MatrixFile =
            serde_json::from_str(document).map_err(|e| RelationError::Malformed(e.to_string()))?;
        if file.activities.iter().any(String::is_empty) {
            return Err(RelationError::EmptyLabel);
        }
        let activities: Vec<Activity> = file.activities.into_iter().map(Activity::new).collect();
        let mut rows = Vec::with_capacity(file.cells.len());
        for (i, row) in file.cells.into_iter().enumerate() {
            let parsed = row
                .into_iter()
                .enumerate()
                .map(|(j, code)| {
                    code.parse().map_err(|_| RelationError::UnknownSymbol {
                        row: activities.get(i).map(|a| a.to_string()).unwrap_or_default(),
                        col: activities.get(j).map(|a| a.to_string()).unwrap_or_default(),
                        symbol: code.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(parsed);
        }
        Self::from_rows(activities, rows)
    }

    /// Every ordered pair of activities (including diagonal) currently holding `kind`.
    pub fn pairs_with(&self, kind: RelationKind) -> impl Iterator<Item = (&Activity, &Activity)> {
        let n = self.len();
        (0..n * n)
            .filter(move |&k| self.cells[k] == kind)
            .map(move |k| (&self.activities[k / n], &self.activities[k % n]))
    }
}

impl fmt::Display for RelationMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .activities
            .iter()
            .map(|a| a.as_str().chars().count())
            .max()
            .unwrap_or(0)
            .max(2);
        write!(f, "{:width$}", "")?;
        for a in &self.activities {
            write!(f, " {a:>width$}")?;
        }
        writeln!(f)?;
        for (a, row) in self.activities.iter().zip(self.rows()) {
            write!(f, "{a:width$}")?;
            for k in row {
                write!(f, " {:>width$}", k.symbol())?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Pairs `(a, b)` such that some reachable firing sequence fires the
/// transition labeled `a`, then only silent transitions, then the one
/// labeled `b`.
pub fn derive_directly_follows(net: &WorkflowNet, graph: &ReachabilityGraph) -> DirectlyFollowsSet {
    let transitions = net.transitions();
    // labels enabled after zero or more silent steps, per state, computed lazily
    let mut visible_after: Vec<Option<BTreeSet<usize>>> = vec![None; graph.len()];
    let mut result = PairSet::new();
    for state in 0..graph.len() {
        for &(t, target) in graph.successors(state) {
            let Some(a) = &transitions[t].label else {
                continue;
            };
            if visible_after[target].is_none() {
                visible_after[target] = Some(visible_closure(net, graph, target));
            }
            for &u in visible_after[target].as_ref().unwrap() {
                let b = transitions[u].label.as_ref().unwrap();
                result.insert(Activity::new(a.as_str()), Activity::new(b.as_str()));
            }
        }
    }
    result
}

fn visible_closure(net: &WorkflowNet, graph: &ReachabilityGraph, start: usize) -> BTreeSet<usize> {
    let mut seen = vec![false; graph.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut visible = BTreeSet::new();
    while let Some(s) = stack.pop() {
        for &(t, target) in graph.successors(s) {
            if net.transitions()[t].is_silent() {
                if !seen[target] {
                    seen[target] = true;
                    stack.push(target);
                }
            } else {
                visible.insert(t);
            }
        }
    }
    visible
}

/// Alpha-relation matrix from directly-follows pairs.
pub fn build_matrix(
    d: &DirectlyFollowsSet,
    activities: &[Activity],
) -> Result<RelationMatrix, RelationError> {
    let mut m = RelationMatrix::filled(activities.to_vec(), RelationKind::Exclusive)?;
    for (a, b) in d.pairs() {
        for x in [a, b] {
            if m.index_of(x.as_str()).is_none() {
                return Err(RelationError::UnknownActivity(x.to_string()));
            }
        }
    }
    let n = m.len();
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (m.activities[i].as_str(), m.activities[j].as_str());
            let kind = match (d.contains(a, b), d.contains(b, a)) {
                (true, true) => RelationKind::Concurrent,
                (true, false) => RelationKind::DirectForward,
                (false, true) => RelationKind::DirectBackward,
                (false, false) => RelationKind::Exclusive,
            };
            m.cells[i * n + j] = kind;
        }
    }
    Ok(m)
}

/// `(p, q)` such that a path of one or more pairs leads from `p` to `q`.
pub fn transitive_closure(d: &PairSet) -> PairSet {
    let mut closure = PairSet::new();
    for start in d.sources() {
        let mut stack: Vec<&Activity> = d.successors(start.as_str()).collect();
        let mut reached: BTreeSet<&Activity> = BTreeSet::new();
        while let Some(x) = stack.pop() {
            if reached.insert(x) {
                stack.extend(d.successors(x.as_str()));
            }
        }
        for q in reached {
            closure.insert(start.clone(), q.clone());
        }
    }
    closure
}
