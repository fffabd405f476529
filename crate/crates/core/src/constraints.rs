//! Branched Declare constraints generated from a (relaxed) relation matrix.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relations::{
    transitive_closure, Activity, DirectlyFollowsSet, PairSet, RelationKind, RelationMatrix,
};

pub type ActivitySet = BTreeSet<Activity>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Template {
    Init,
    ChainResponse,
    AlternateResponse,
}

impl Template {
    pub fn name(self) -> &'static str {
        match self {
            Template::Init => "Init",
            Template::ChainResponse => "ChainResponse",
            Template::AlternateResponse => "AlternateResponse",
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A template instance over activity sets.
///
/// The derived ordering (template first, then sets lexicographically) is the
/// presentation order used everywhere constraints are listed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "ConstraintRecord", into = "ConstraintRecord")]
pub enum Constraint {
    /// The first event is in the set. An empty set is unsatisfiable.
    Init(ActivitySet),
    ChainResponse {
        source: ActivitySet,
        target: ActivitySet,
    },
    AlternateResponse {
        source: ActivitySet,
        target: ActivitySet,
    },
}

impl Constraint {
    pub fn init<'a>(labels: impl IntoIterator<Item = &'a str>) -> Self {
        Constraint::Init(set_of(labels))
    }

    pub fn chain_response<'a>(
        source: impl IntoIterator<Item = &'a str>,
        target: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        Constraint::ChainResponse {
            source: set_of(source),
            target: set_of(target),
        }
    }

    pub fn alternate_response<'a>(
        source: impl IntoIterator<Item = &'a str>,
        target: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        Constraint::AlternateResponse {
            source: set_of(source),
            target: set_of(target),
        }
    }

    pub fn template(&self) -> Template {
        match self {
            Constraint::Init(_) => Template::Init,
            Constraint::ChainResponse { .. } => Template::ChainResponse,
            Constraint::AlternateResponse { .. } => Template::AlternateResponse,
        }
    }

    pub fn source(&self) -> Option<&ActivitySet> {
        match self {
            Constraint::Init(_) => None,
            Constraint::ChainResponse { source, .. }
            | Constraint::AlternateResponse { source, .. } => Some(source),
        }
    }

    pub fn target(&self) -> &ActivitySet {
        match self {
            Constraint::Init(target)
            | Constraint::ChainResponse { target, .. }
            | Constraint::AlternateResponse { target, .. } => target,
        }
    }

    /// Every label mentioned by the constraint.
    pub fn activities(&self) -> impl Iterator<Item = &Activity> {
        self.source().into_iter().flatten().chain(self.target())
    }
}

fn set_of<'a>(labels: impl IntoIterator<Item = &'a str>) -> ActivitySet {
    labels.into_iter().map(Activity::new).collect()
}

fn fmt_set(set: &ActivitySet) -> String {
    let labels: Vec<&str> = set.iter().map(Activity::as_str).collect();
    format!("{{{}}}", labels.join(","))
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.source() {
            None => write!(f, "{}({})", self.template(), fmt_set(self.target())),
            Some(source) => write!(
                f,
                "{}({},{})",
                self.template(),
                fmt_set(source),
                fmt_set(self.target())
            ),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintRecord {
    template: Template,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<Vec<String>>,
    target: Vec<String>,
}

impl TryFrom<ConstraintRecord> for Constraint {
    type Error = String;

    fn try_from(r: ConstraintRecord) -> Result<Self, Self::Error> {
        let labels = |v: Vec<String>, field: &str| -> Result<ActivitySet, String> {
            if v.iter().any(String::is_empty) {
                return Err(format!("empty label in `{field}`"));
            }
            Ok(v.into_iter().map(Activity::new).collect())
        };
        let target = labels(r.target, "target")?;
        match (r.template, r.source) {
            (Template::Init, None) => Ok(Constraint::Init(target)),
            (Template::Init, Some(_)) => Err("`Init` takes no `source`".into()),
            (_, None) => Err(format!("`{}` needs a `source`", r.template)),
            (template, Some(source)) => {
                let source = labels(source, "source")?;
                if source.is_empty() || target.is_empty() {
                    return Err(format!(
                        "`{template}` needs non-empty `source` and `target`"
                    ));
                }
                Ok(match template {
                    Template::ChainResponse => Constraint::ChainResponse { source, target },
                    _ => Constraint::AlternateResponse { source, target },
                })
            }
        }
    }
}

impl From<Constraint> for ConstraintRecord {
    fn from(c: Constraint) -> Self {
        let names = |s: &ActivitySet| s.iter().map(|a| a.to_string()).collect();
        ConstraintRecord {
            template: c.template(),
            source: c.source().map(names),
            target: names(c.target()),
        }
    }
}

/// A duplicate-free, ordered constraint set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstraintSet {
    constraints: BTreeSet<Constraint>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, c: Constraint) -> bool {
        self.constraints.insert(c)
    }

    pub fn contains(&self, c: &Constraint) -> bool {
        self.constraints.contains(c)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter()
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Union of all labels the constraints mention.
    pub fn alphabet(&self) -> ActivitySet {
        self.iter()
            .flat_map(Constraint::activities)
            .cloned()
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("constraints serialize");
        out.push('\n');
        out
    }

    pub fn from_json(document: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(document)
    }
}

impl FromIterator<Constraint> for ConstraintSet {
    fn from_iter<I: IntoIterator<Item = Constraint>>(iter: I) -> Self {
        ConstraintSet {
            constraints: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a ConstraintSet {
    type Item = &'a Constraint;
    type IntoIter = std::collections::btree_set::Iter<'a, Constraint>;

    fn into_iter(self) -> Self::IntoIter {
        self.constraints.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("the activity alphabet is empty")]
    EmptyAlphabet,
    #[error("relation pair mentions `{0}`, which is not in the alphabet")]
    UnknownActivity(String),
}

/// Directly-follows pairs (`→` and `||` cells, diagonal included) and
/// eventually-follows pairs (`≺` cells) of a matrix.
pub fn extract_relations(m: &RelationMatrix) -> (DirectlyFollowsSet, PairSet) {
    let mut direct = PairSet::new();
    let mut eventual = PairSet::new();
    for kind in [RelationKind::DirectForward, RelationKind::Concurrent] {
        for (a, b) in m.pairs_with(kind) {
            direct.insert(a.clone(), b.clone());
        }
    }
    for (a, b) in m.pairs_with(RelationKind::EventualForward) {
        eventual.insert(a.clone(), b.clone());
    }
    (direct, eventual)
}

/// Activities that never occur as a successor in `d`.
pub fn get_start_activities(d: &DirectlyFollowsSet, alphabet: &[Activity]) -> ActivitySet {
    let successors: BTreeSet<&Activity> = d.pairs().map(|(_, b)| b).collect();
    alphabet
        .iter()
        .filter(|a| !successors.contains(a))
        .cloned()
        .collect()
}

/// Bypass test: some predecessor `a` and successor `b` of `x`, neither
/// parallel to `x` nor `b` preceding `a`, are directly connected by `(a, b)`.
pub fn is_optional_activity(x: &str, d: &DirectlyFollowsSet) -> bool {
    d.predecessors(x).any(|a| {
        let a = a.as_str();
        !d.contains(x, a)
            && d.successors(x).any(|b| {
                let b = b.as_str();
                !d.contains(b, x) && !d.contains(b, a) && d.contains(a, b)
            })
    })
}

/// Constraint generation over directly-follows pairs `d` and eventually-follows pairs `e`.
pub fn generate_constraints(
    d: &DirectlyFollowsSet,
    e: &PairSet,
    alphabet: &[Activity],
) -> Result<ConstraintSet, ConstraintError> {
    if alphabet.is_empty() {
        return Err(ConstraintError::EmptyAlphabet);
    }
    let known: BTreeSet<&str> = alphabet.iter().map(Activity::as_str).collect();
    for (a, b) in d.pairs().chain(e.pairs()) {
        for x in [a, b] {
            if !known.contains(x.as_str()) {
                return Err(ConstraintError::UnknownActivity(x.to_string()));
            }
        }
    }

    let mut out = ConstraintSet::new();
    out.insert(Constraint::Init(get_start_activities(d, alphabet)));

    for a in d.sources() {
        let succ = d
            .successor_set(a.as_str())
            .expect("sources have successors");
        out.insert(Constraint::ChainResponse {
            source: BTreeSet::from([a.clone()]),
            target: succ.clone(),
        });
        let succ: Vec<&Activity> = succ.iter().collect();
        for (k, b) in succ.iter().enumerate() {
            for c in &succ[k + 1..] {
                if !(d.contains(b.as_str(), c.as_str()) && d.contains(c.as_str(), b.as_str())) {
                    continue;
                }
                for target in [b, c] {
                    if !is_optional_activity(target.as_str(), d) {
                        out.insert(Constraint::AlternateResponse {
                            source: BTreeSet::from([a.clone()]),
                            target: BTreeSet::from([(*target).clone()]),
                        });
                    }
                }
            }
        }
    }

    let closure = transitive_closure(d);
    for a in e.sources() {
        let target: ActivitySet = e
            .successors(a.as_str())
            .filter(|x| !closure.contains(a.as_str(), x.as_str()))
            .cloned()
            .collect();
        if !target.is_empty() {
            out.insert(Constraint::AlternateResponse {
                source: BTreeSet::from([a.clone()]),
                target,
            });
        }
    }
    Ok(out)
}

/// Extracts relations from `m` and generates constraints over its activities.
pub fn constraints_from_matrix(m: &RelationMatrix) -> Result<ConstraintSet, ConstraintError> {
    let (d, e) = extract_relations(m);
    generate_constraints(&d, &e, m.activities())
}
