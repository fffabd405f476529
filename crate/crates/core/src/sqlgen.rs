//! MATCH_RECOGNIZE query generation.
//!
//! Paper mode emits the satisfaction patterns (`PATTERN (^CPR ANY*)` and
//! friends) that find at least one satisfying occurrence per case. Violation
//! mode emits queries returning exactly the cases that violate a constraint
//! under the checker's semantics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constraints::{ActivitySet, Constraint, ConstraintSet};
use crate::relations::Activity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    Paper,
    Violation,
}

impl fmt::Display for QueryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryMode::Paper => "paper",
            QueryMode::Violation => "violation",
        })
    }
}

impl FromStr for QueryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(QueryMode::Paper),
            "violation" => Ok(QueryMode::Violation),
            other => Err(format!(
                "unknown query mode `{other}` (expected paper or violation)"
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SqlConfig {
    /// Optional schema qualifying the `events` table.
    pub schema: Option<String>,
}

impl SqlConfig {
    pub fn table(&self) -> String {
        match &self.schema {
            Some(s) => format!("{s}.events"),
            None => "events".to_owned(),
        }
    }
}

pub fn emit_schema(config: &SqlConfig) -> String {
    format!(
        "CREATE TABLE {} (\n  case_id TEXT NOT NULL,\n  end_time TIMESTAMP NOT NULL,\n  event_name TEXT NOT NULL\n)",
        config.table()
    )
}

/// Pattern variables used by the generated queries themselves.
const RESERVED: &[&str] = &["ANY", "NONE", "OTHER", "TRIG", "MISS", "GAP", "AGAIN"];

/// Words a sanitized label must not turn into.
const KEYWORDS: &[&str] = &[
    "ALL",
    "AND",
    "AS",
    "BY",
    "DEFINE",
    "DISTINCT",
    "FROM",
    "IN",
    "IS",
    "MATCH",
    "MATCH_RECOGNIZE",
    "MEASURES",
    "NOT",
    "NULL",
    "ONE",
    "OR",
    "ORDER",
    "PARTITION",
    "PATTERN",
    "PER",
    "ROW",
    "ROWS",
    "SELECT",
    "SKIP",
    "SUBSET",
    "WHERE",
];

/// Injective mapping from activity labels to pattern variable names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariableNames {
    names: BTreeMap<Activity, String>,
}

impl VariableNames {
    /// Labels are upper-cased and every character outside `[A-Z0-9]` becomes
    /// `_`; a leading digit gets a `V_` prefix. Collisions (with each other,
    /// reserved variables or keywords) get `_1`, `_2`, ... in label order.
    pub fn for_alphabet<'a>(alphabet: impl IntoIterator<Item = &'a Activity>) -> Self {
        let labels: BTreeSet<&Activity> = alphabet.into_iter().collect();
        let mut taken: BTreeSet<String> = RESERVED
            .iter()
            .chain(KEYWORDS)
            .map(|s| s.to_string())
            .collect();
        let mut names = BTreeMap::new();
        for label in labels {
            let base = sanitize(label.as_str());
            let mut name = base.clone();
            let mut n = 0;
            while taken.contains(&name) {
                n += 1;
                name = format!("{base}_{n}");
            }
            taken.insert(name.clone());
            names.insert(label.clone(), name);
        }
        VariableNames { names }
    }

    pub fn get(&self, label: &Activity) -> &str {
        self.names
            .get(label)
            .map(String::as_str)
            .expect("label belongs to the alphabet")
    }
}

fn sanitize(label: &str) -> String {
    let mut out: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_uppercase()
            } else {
                '_'
            }
        })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert_str(0, "V_");
    }
    out
}

fn literal(label: &str) -> String {
    format!("'{}'", label.replace('\'', "''"))
}

fn membership(set: &ActivitySet, negated: bool) -> String {
    if set.is_empty() {
        return if negated { "1 = 1" } else { "1 = 0" }.to_owned();
    }
    let items: Vec<String> = set.iter().map(|a| literal(a.as_str())).collect();
    format!(
        "event_name {}IN ({})",
        if negated { "NOT " } else { "" },
        items.join(", ")
    )
}

fn alternation(set: &ActivitySet, names: &VariableNames) -> String {
    let vars: Vec<&str> = set.iter().map(|a| names.get(a)).collect();
    match vars.as_slice() {
        [single] => (*single).to_owned(),
        _ => format!("({})", vars.join(" | ")),
    }
}

fn label_definitions<'a>(
    sets: impl IntoIterator<Item = &'a ActivitySet>,
    names: &VariableNames,
) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut defs = Vec::new();
    for set in sets {
        for a in set {
            if seen.insert(a) {
                defs.push(format!(
                    "{} AS event_name = {}",
                    names.get(a),
                    literal(a.as_str())
                ));
            }
        }
    }
    defs
}

fn wrap(config: &SqlConfig, distinct: bool, pattern: &str, defines: &[String]) -> String {
    format!(
        "SELECT {}case_id FROM {} MATCH_RECOGNIZE (\n  PARTITION BY case_id\n  ORDER BY end_time\n  ONE ROW PER MATCH\n  PATTERN ({pattern})\n  DEFINE {}\n)",
        if distinct { "DISTINCT " } else { "" },
        config.table(),
        defines.join(", ")
    )
}

/// Query for one constraint with variable names derived from its own labels.
pub fn emit_query(c: &Constraint, mode: QueryMode) -> String {
    let names = VariableNames::for_alphabet(c.activities());
    emit_query_with(c, mode, &names, &SqlConfig::default())
}

pub fn emit_query_with(
    c: &Constraint,
    mode: QueryMode,
    names: &VariableNames,
    config: &SqlConfig,
) -> String {
    match mode {
        QueryMode::Paper => paper_query(c, names, config),
        QueryMode::Violation => violation_query(c, config),
    }
}

fn paper_query(c: &Constraint, names: &VariableNames, config: &SqlConfig) -> String {
    match c {
        Constraint::Init(set) if set.is_empty() => {
            wrap(config, false, "^NONE ANY*", &["NONE AS 1 = 0".to_owned()])
        }
        Constraint::Init(set) => wrap(
            config,
            false,
            &format!("^{} ANY*", alternation(set, names)),
            &label_definitions([set], names),
        ),
        Constraint::ChainResponse { source, target } => wrap(
            config,
            false,
            &format!(
                "ANY* {} {} ANY*",
                alternation(source, names),
                alternation(target, names)
            ),
            &label_definitions([source, target], names),
        ),
        Constraint::AlternateResponse { source, target } => {
            let mut defs = label_definitions([source, target], names);
            defs.push(format!("GAP AS {}", membership(source, true)));
            wrap(
                config,
                false,
                &format!(
                    "ANY* {} GAP* {} ANY*",
                    alternation(source, names),
                    alternation(target, names)
                ),
                &defs,
            )
        }
    }
}

fn violation_query(c: &Constraint, config: &SqlConfig) -> String {
    match c {
        Constraint::Init(set) => wrap(
            config,
            true,
            "^OTHER",
            &[format!("OTHER AS {}", membership(set, true))],
        ),
        Constraint::ChainResponse { source, target } => wrap(
            config,
            true,
            "TRIG (MISS | $)",
            &[
                format!("TRIG AS {}", membership(source, false)),
                format!("MISS AS {}", membership(target, true)),
            ],
        ),
        Constraint::AlternateResponse { source, target } => {
            let either: ActivitySet = source.union(target).cloned().collect();
            let again: ActivitySet = source.difference(target).cloned().collect();
            let mut defs = vec![
                format!("TRIG AS {}", membership(source, false)),
                format!("GAP AS {}", membership(&either, true)),
            ];
            let pattern = if again.is_empty() {
                "TRIG GAP* $"
            } else {
                defs.push(format!("AGAIN AS {}", membership(&again, false)));
                "TRIG GAP* (AGAIN | $)"
            };
            wrap(config, true, pattern, &defs)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RenderedQuery {
    pub constraint: Constraint,
    pub sql: String,
}

/// Schema statement plus one query per constraint, in constraint order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryBundle {
    pub mode: QueryMode,
    pub schema: String,
    pub queries: Vec<RenderedQuery>,
}

impl QueryBundle {
    /// The whole bundle as a `;`-terminated SQL script, schema first.
    pub fn script(&self) -> String {
        let mut out = format!("{};\n", self.schema);
        for q in &self.queries {
            out.push_str(&format!("\n-- {}\n{};\n", q.constraint, q.sql));
        }
        out
    }
}

pub fn render_bundle(cs: &ConstraintSet, mode: QueryMode, config: &SqlConfig) -> QueryBundle {
    let alphabet = cs.alphabet();
    let names = VariableNames::for_alphabet(&alphabet);
    QueryBundle {
        mode,
        schema: emit_schema(config),
        queries: cs
            .iter()
            .map(|c| RenderedQuery {
                constraint: c.clone(),
                sql: emit_query_with(c, mode, &names, config),
            })
            .collect(),
    }
}
