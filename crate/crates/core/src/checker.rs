//! Event-log ingestion and per-trace evaluation of Declare constraints.

use std::collections::{BTreeSet, HashMap};

use chrono::{DateTime, NaiveDateTime};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::constraints::{Constraint, ConstraintSet};

pub const CASE_ID: &str = "case_id";
pub const EVENT_NAME: &str = "event_name";
pub const END_TIME: &str = "end_time";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogError {
    #[error("header has no `{0}` column")]
    MissingColumn(&'static str),
    #[error("line {line}: cannot parse timestamp `{value}`")]
    UnparseableTimestamp { line: u64, value: String },
    #[error("line {line}: empty `{column}`")]
    EmptyField { line: u64, column: &'static str },
    #[error("{}malformed log: {message}", .line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Malformed { line: Option<u64>, message: String },
    #[error("the log contains no events")]
    EmptyLog,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub case_id: String,
    pub activity: String,
    pub timestamp: NaiveDateTime,
}

/// Activity labels of one case in timestamp order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub case_id: String,
    pub activities: Vec<String>,
}

impl Trace {
    pub fn new<S: Into<String>>(
        case_id: impl Into<String>,
        activities: impl IntoIterator<Item = S>,
    ) -> Self {
        Trace {
            case_id: case_id.into(),
            activities: activities.into_iter().map(Into::into).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }
}

/// Accepts `YYYY-MM-DD HH:MM:SS[.fff]`, the same with `T`, and RFC 3339
/// with an offset (normalized to UTC).
pub fn parse_timestamp(value: &str) -> Option<NaiveDateTime> {
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(value, fmt) {
            return Some(t);
        }
    }
    DateTime::parse_from_rfc3339(value)
        .ok()
        .map(|t| t.naive_utc())
}

/// Parses a comma-separated log with `case_id`, `event_name` and `end_time`
/// columns (any order, extra columns ignored) into traces.
///
/// Traces appear in order of first occurrence of their case id; events
/// with equal timestamps keep their row order.
pub fn parse_event_log(document: &str) -> Result<Vec<Trace>, LogError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(document.as_bytes());
    let headers = reader.headers().map_err(csv_error)?.clone();
    let column = |name: &'static str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(LogError::MissingColumn(name))
    };
    let (case_col, name_col, time_col) = (column(CASE_ID)?, column(EVENT_NAME)?, column(END_TIME)?);

    let mut order: HashMap<String, usize> = HashMap::new();
    let mut cases: Vec<(String, Vec<(NaiveDateTime, String)>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |col: usize, name: &'static str| -> Result<&str, LogError> {
            match record.get(col) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(LogError::EmptyField { line, column: name }),
            }
        };
        let case_id = field(case_col, CASE_ID)?;
        let activity = field(name_col, EVENT_NAME)?;
        let raw_time = field(time_col, END_TIME)?;
        let timestamp =
            parse_timestamp(raw_time).ok_or_else(|| LogError::UnparseableTimestamp {
                line,
                value: raw_time.to_owned(),
            })?;
        let slot = *order.entry(case_id.to_owned()).or_insert_with(|| {
            cases.push((case_id.to_owned(), Vec::new()));
            cases.len() - 1
        });
        cases[slot].1.push((timestamp, activity.to_owned()));
    }
    if cases.is_empty() {
        return Err(LogError::EmptyLog);
    }
    Ok(cases
        .into_iter()
        .map(|(case_id, mut events)| {
            // stable: ties keep row order
            events.sort_by_key(|(t, _)| *t);
            Trace {
                case_id,
                activities: events.into_iter().map(|(_, a)| a).collect(),
            }
        })
        .collect())
}

fn csv_error(e: csv::Error) -> LogError {
    LogError::Malformed {
        line: e.position().map(|p| p.line()),
        message: e.to_string(),
    }
}

/// Outcome of one constraint on one trace. Positions are 1-based and name
/// the activating event (or the first event for `Init`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub holds: bool,
    pub violations: Vec<usize>,
}

impl Verdict {
    fn from_violations(violations: Vec<usize>) -> Self {
        Verdict {
            holds: violations.is_empty(),
            violations,
        }
    }
}

pub fn evaluate_constraint(trace: &Trace, c: &Constraint) -> Verdict {
    evaluate_labels(&trace.activities, c)
}

pub fn evaluate_labels<S: AsRef<str>>(labels: &[S], c: &Constraint) -> Verdict {
    match c {
        Constraint::Init(set) => match labels.first() {
            Some(first) if set.contains(first.as_ref()) => Verdict::from_violations(Vec::new()),
            Some(_) => Verdict::from_violations(vec![1]),
            None => Verdict {
                holds: false,
                violations: Vec::new(),
            },
        },
        Constraint::ChainResponse { source, target } => {
            let violations = labels
                .iter()
                .enumerate()
                .filter(|(i, l)| {
                    source.contains(l.as_ref())
                        && labels
                            .get(i + 1)
                            .is_none_or(|next| !target.contains(next.as_ref()))
                })
                .map(|(i, _)| i + 1)
                .collect();
            Verdict::from_violations(violations)
        }
        Constraint::AlternateResponse { source, target } => {
            // scanning backwards: does the nearest later source-or-target event satisfy?
            let mut next_ok = false;
            let mut violations = Vec::new();
            for (i, l) in labels.iter().enumerate().rev() {
                let l = l.as_ref();
                if source.contains(l) && !next_ok {
                    violations.push(i + 1);
                }
                if target.contains(l) {
                    next_ok = true;
                } else if source.contains(l) {
                    next_ok = false;
                }
            }
            violations.reverse();
            Verdict::from_violations(violations)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceReport {
    pub case_id: String,
    pub conforms: bool,
    /// One verdict per constraint, in the report's constraint order.
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("no traces to check")]
    EmptyLog,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConformanceReport {
    pub constraints: Vec<Constraint>,
    pub traces: Vec<TraceReport>,
    pub conforming: usize,
}

impl ConformanceReport {
    pub fn total(&self) -> usize {
        self.traces.len()
    }

    pub fn rate(&self) -> f64 {
        self.conforming as f64 / self.total() as f64
    }

    /// The rate with three decimals.
    pub fn rate_text(&self) -> String {
        format!("{:.3}", self.rate())
    }

    /// Number of violating traces per constraint.
    pub fn violation_counts(&self) -> Vec<usize> {
        (0..self.constraints.len())
            .map(|k| self.traces.iter().filter(|t| !t.verdicts[k].holds).count())
            .collect()
    }

    /// Case ids violating the constraint at `index`.
    pub fn violating_cases(&self, index: usize) -> BTreeSet<&str> {
        self.traces
            .iter()
            .filter(|t| !t.verdicts[index].holds)
            .map(|t| t.case_id.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            constraint: &'a Constraint,
            violating_traces: usize,
        }
        #[derive(Serialize)]
        struct File<'a> {
            conformance_rate: f64,
            conforming: usize,
            total: usize,
            constraints: Vec<Summary<'a>>,
            traces: &'a [TraceReport],
        }
        let file = File {
            conformance_rate: self.rate_text().parse().expect("formatted float"),
            conforming: self.conforming,
            total: self.total(),
            constraints: self
                .constraints
                .iter()
                .zip(self.violation_counts())
                .map(|(constraint, violating_traces)| Summary {
                    constraint,
                    violating_traces,
                })
                .collect(),
            traces: &self.traces,
        };
        let mut out = serde_json::to_string_pretty(&file).expect("report serializes");
        out.push('\n');
        out
    }
}

/// Evaluates every constraint on every trace. Traces are checked in parallel.
pub fn check_log(traces: &[Trace], cs: &ConstraintSet) -> Result<ConformanceReport, CheckError> {
    if traces.is_empty() {
        return Err(CheckError::EmptyLog);
    }
    let constraints: Vec<Constraint> = cs.iter().cloned().collect();
    let reports: Vec<TraceReport> = traces
        .par_iter()
        .map(|t| {
            let verdicts: Vec<Verdict> = constraints
                .iter()
                .map(|c| evaluate_constraint(t, c))
                .collect();
            TraceReport {
                case_id: t.case_id.clone(),
                conforms: verdicts.iter().all(|v| v.holds),
                verdicts,
            }
        })
        .collect();
    let conforming = reports.iter().filter(|r| r.conforms).count();
    Ok(ConformanceReport {
        constraints,
        traces: reports,
        conforming,
    })
}
