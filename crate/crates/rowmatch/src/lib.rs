//! A small in-memory SQL engine for row pattern recognition.
//!
//! Supports `CREATE TABLE`, `INSERT ... VALUES` and
//! `SELECT [DISTINCT] ... FROM t MATCH_RECOGNIZE (...)` with
//! `ONE ROW PER MATCH`, `AFTER MATCH SKIP PAST LAST ROW | TO NEXT ROW`,
//! anchors, alternation, grouping and all repetition quantifiers.
//! `DEFINE` conditions may use the current row's columns, literals,
//! comparisons, `IN` lists, `IS [NOT] NULL` and boolean connectives.
//! Plain `SELECT [DISTINCT] cols FROM t [WHERE ...]` works as well.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use chrono::NaiveDateTime;
use sqlparser::ast::{
    self, AfterMatchSkip, BinaryOperator, DataType, Expr, MatchRecognizePattern,
    MatchRecognizeSymbol, ObjectName, ObjectNamePart, OrderBySort, RepetitionQuantifier,
    RowsPerMatch, SelectItem, SetExpr, Statement, TableFactor, TableObject, UnaryOperator,
};
use sqlparser::dialect::GenericDialect;
use sqlparser::parser::Parser;
use thiserror::Error;

/// Backtracking steps allowed per partition before a query is abandoned.
pub const DEFAULT_STEP_LIMIT: u64 = 5_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("table `{0}` does not exist")]
    UnknownTable(String),
    #[error("table `{0}` already exists")]
    TableExists(String),
    #[error("column `{0}` does not exist")]
    UnknownColumn(String),
    #[error("{0}")]
    Type(String),
    #[error("pattern matching exceeded {0} steps")]
    StepLimit(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Number(f64),
    Text(String),
    Timestamp(NaiveDateTime),
}

impl Value {
    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Bool(_) => 1,
            Value::Number(_) => 2,
            Value::Text(_) => 3,
            Value::Timestamp(_) => 4,
        }
    }

    /// Total order used for sorting; NULL sorts first.
    fn sort_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Number(a), Value::Number(b)) => a.total_cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::Timestamp(a), Value::Timestamp(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }

    /// SQL comparison; `None` when either side is NULL.
    fn sql_cmp(&self, other: &Value) -> Result<Option<Ordering>, EngineError> {
        match (self, other) {
            (Value::Null, _) | (_, Value::Null) => Ok(None),
            (Value::Text(t), Value::Timestamp(_)) => {
                Value::Timestamp(parse_timestamp(t)?).sql_cmp(other)
            }
            (Value::Timestamp(_), Value::Text(t)) => {
                self.sql_cmp(&Value::Timestamp(parse_timestamp(t)?))
            }
            (a, b) if a.rank() == b.rank() => Ok(Some(a.sort_cmp(b))),
            (a, b) => Err(EngineError::Type(format!("cannot compare {a} with {b}"))),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Bool(b) => write!(f, "{}", if *b { "TRUE" } else { "FALSE" }),
            Value::Number(n) => write!(f, "{n}"),
            Value::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Value::Timestamp(t) => write!(f, "TIMESTAMP '{}'", t.format("%Y-%m-%d %H:%M:%S%.f")),
        }
    }
}

fn parse_timestamp(s: &str) -> Result<NaiveDateTime, EngineError> {
    ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .ok_or_else(|| EngineError::Type(format!("invalid timestamp `{s}`")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnType {
    Text,
    Number,
    Timestamp,
    Bool,
}

#[derive(Debug, Clone)]
struct Table {
    columns: Vec<(String, ColumnType)>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    fn column(&self, name: &str) -> Result<usize, EngineError> {
        self.columns
            .iter()
            .position(|(c, _)| c == name)
            .ok_or_else(|| EngineError::UnknownColumn(name.to_owned()))
    }
}

/// Rows returned by a query.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultSet {
    /// Values of one column rendered as plain text (strings unquoted).
    pub fn column_text(&self, name: &str) -> Option<Vec<String>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[k] {
                    Value::Text(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct Database {
    tables: HashMap<String, Table>,
    step_limit: u64,
}

impl Default for Database {
    fn default() -> Self {
        Database {
            tables: HashMap::new(),
            step_limit: DEFAULT_STEP_LIMIT,
        }
    }
}

fn table_key(name: &ObjectName) -> Result<String, EngineError> {
    let parts: Result<Vec<String>, EngineError> = name
        .0
        .iter()
        .map(|p| match p {
            ObjectNamePart::Identifier(id) => Ok(id.value.to_lowercase()),
            other => Err(EngineError::Unsupported(format!(
                "table name part `{other}`"
            ))),
        })
        .collect();
    Ok(parts?.join("."))
}

fn column_type(dt: &DataType) -> ColumnType {
    let name = dt.to_string().to_uppercase();
    if name.starts_with("TIMESTAMP") || name.starts_with("DATETIME") {
        ColumnType::Timestamp
    } else if name.starts_with("INT")
        || name.starts_with("BIGINT")
        || name.starts_with("SMALLINT")
        || name.starts_with("NUMERIC")
        || name.starts_with("DECIMAL")
        || name.starts_with("DOUBLE")
        || name.starts_with("FLOAT")
        || name.starts_with("REAL")
    {
        ColumnType::Number
    } else if name.starts_with("BOOL") {
        ColumnType::Bool
    } else {
        ColumnType::Text
    }
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_step_limit(step_limit: u64) -> Self {
        Database {
            step_limit,
            ..Self::default()
        }
    }

    /// Executes every statement of `sql`; one result set per query statement.
    pub fn execute(&mut self, sql: &str) -> Result<Vec<ResultSet>, EngineError> {
        let statements = Parser::parse_sql(&GenericDialect {}, sql)
            .map_err(|e| EngineError::Parse(e.to_string()))?;
        let mut results = Vec::new();
        for statement in statements {
            if let Some(rs) = self.run(statement)? {
                results.push(rs);
            }
        }
        Ok(results)
    }

    /// Runs a single query and returns its rows.
    pub fn query(&mut self, sql: &str) -> Result<ResultSet, EngineError> {
        let mut results = self.execute(sql)?;
        match results.len() {
            1 => Ok(results.pop().unwrap()),
            n => Err(EngineError::Unsupported(format!(
                "expected one query, got {n}"
            ))),
        }
    }

    /// Appends a row given as column name/value pairs; missing columns are NULL.
    pub fn insert_row(&mut self, table: &str, values: &[(&str, Value)]) -> Result<(), EngineError> {
        let t = self
            .tables
            .get_mut(&table.to_lowercase())
            .ok_or_else(|| EngineError::UnknownTable(table.to_owned()))?;
        let mut row = vec![Value::Null; t.columns.len()];
        for (name, value) in values {
            let k = t.column(name)?;
            row[k] = coerce(value.clone(), t.columns[k].1)?;
        }
        t.rows.push(row);
        Ok(())
    }

    fn run(&mut self, statement: Statement) -> Result<Option<ResultSet>, EngineError> {
        match statement {
            Statement::CreateTable(create) => {
                let key = table_key(&create.name)?;
                if self.tables.contains_key(&key) {
                    return Err(EngineError::TableExists(key));
                }
                let columns = create
                    .columns
                    .iter()
                    .map(|c| (c.name.value.clone(), column_type(&c.data_type)))
                    .collect();
                self.tables.insert(
                    key,
                    Table {
                        columns,
                        rows: Vec::new(),
                    },
                );
                Ok(None)
            }
            Statement::Insert(insert) => {
                let TableObject::TableName(name) = &insert.table else {
                    return Err(EngineError::Unsupported(
                        "INSERT into a table function".into(),
                    ));
                };
                let key = table_key(name)?;
                let table = self
                    .tables
                    .get_mut(&key)
                    .ok_or_else(|| EngineError::UnknownTable(key.clone()))?;
                let targets: Vec<usize> = if insert.columns.is_empty() {
                    (0..table.columns.len()).collect()
                } else {
                    insert
                        .columns
                        .iter()
                        .map(|c| table.column(&c.to_string()))
                        .collect::<Result<_, _>>()?
                };
                let Some(source) = &insert.source else {
                    return Err(EngineError::Unsupported("INSERT without VALUES".into()));
                };
                let SetExpr::Values(values) = source.body.as_ref() else {
                    return Err(EngineError::Unsupported("INSERT ... SELECT".into()));
                };
                for row in &values.rows {
                    if row.content.len() != targets.len() {
                        return Err(EngineError::Type(format!(
                            "INSERT row has {} values for {} columns",
                            row.content.len(),
                            targets.len()
                        )));
                    }
                    let mut out = vec![Value::Null; table.columns.len()];
                    for (expr, &k) in row.content.iter().zip(&targets) {
                        out[k] = coerce(constant(expr)?, table.columns[k].1)?;
                    }
                    table.rows.push(out);
                }
                Ok(None)
            }
            Statement::Query(query) => self.select(&query).map(Some),
            other => Err(EngineError::Unsupported(format!(
                "statement `{}`",
                other.to_string().chars().take(40).collect::<String>()
            ))),
        }
    }

    fn select(&self, query: &ast::Query) -> Result<ResultSet, EngineError> {
        if query.with.is_some() || query.order_by.is_some() || query.limit_clause.is_some() {
            return Err(EngineError::Unsupported(
                "WITH, ORDER BY or LIMIT on a query".into(),
            ));
        }
        let SetExpr::Select(select) = query.body.as_ref() else {
            return Err(EngineError::Unsupported("set operations".into()));
        };
        let distinct = match &select.distinct {
            None | Some(ast::Distinct::All) => false,
            Some(ast::Distinct::Distinct) => true,
            Some(ast::Distinct::On(_)) => {
                return Err(EngineError::Unsupported("DISTINCT ON".into()))
            }
        };
        if select.from.len() != 1 || !select.from[0].joins.is_empty() {
            return Err(EngineError::Unsupported(
                "joins or multiple FROM items".into(),
            ));
        }
        if select.group_by != ast::GroupByExpr::Expressions(vec![], vec![])
            || select.having.is_some()
        {
            return Err(EngineError::Unsupported("GROUP BY / HAVING".into()));
        }

        let (columns, rows) = match &select.from[0].relation {
            TableFactor::Table { name, .. } => {
                let table = self.table(name)?;
                let mut rows = Vec::new();
                for row in &table.rows {
                    let keep = match &select.selection {
                        Some(cond) => eval(cond, table, row)?.is_true(),
                        None => true,
                    };
                    if keep {
                        rows.push(row.clone());
                    }
                }
                let columns: Vec<String> = table.columns.iter().map(|(c, _)| c.clone()).collect();
                (columns, rows)
            }
            TableFactor::MatchRecognize {
                table,
                partition_by,
                order_by,
                measures,
                rows_per_match,
                after_match_skip,
                pattern,
                symbols,
                ..
            } => {
                if select.selection.is_some() {
                    return Err(EngineError::Unsupported(
                        "WHERE over MATCH_RECOGNIZE".into(),
                    ));
                }
                let TableFactor::Table { name, .. } = table.as_ref() else {
                    return Err(EngineError::Unsupported(
                        "MATCH_RECOGNIZE over a derived table".into(),
                    ));
                };
                if !measures.is_empty() {
                    return Err(EngineError::Unsupported("MEASURES".into()));
                }
                if matches!(rows_per_match, Some(RowsPerMatch::AllRows(_))) {
                    return Err(EngineError::Unsupported("ALL ROWS PER MATCH".into()));
                }
                let skip_to_next = match after_match_skip {
                    None | Some(AfterMatchSkip::PastLastRow) => false,
                    Some(AfterMatchSkip::ToNextRow) => true,
                    Some(other) => {
                        return Err(EngineError::Unsupported(format!(
                            "AFTER MATCH SKIP {other}"
                        )))
                    }
                };
                let table = self.table(name)?;
                let spec = MatchSpec::compile(table, partition_by, order_by, pattern, symbols)?;
                spec.run(table, skip_to_next, self.step_limit)?
            }
            other => {
                return Err(EngineError::Unsupported(format!("FROM item `{other}`")));
            }
        };

        let mut projected_cols = Vec::new();
        let mut picks = Vec::new();
        for item in &select.projection {
            match item {
                SelectItem::Wildcard(_) => {
                    for (k, c) in columns.iter().enumerate() {
                        picks.push(k);
                        projected_cols.push(c.clone());
                    }
                }
                SelectItem::UnnamedExpr(Expr::Identifier(id)) => {
                    let k = columns
                        .iter()
                        .position(|c| *c == id.value)
                        .ok_or_else(|| EngineError::UnknownColumn(id.value.clone()))?;
                    picks.push(k);
                    projected_cols.push(id.value.clone());
                }
                SelectItem::ExprWithAlias {
                    expr: Expr::Identifier(id),
                    alias,
                } => {
                    let k = columns
                        .iter()
                        .position(|c| *c == id.value)
                        .ok_or_else(|| EngineError::UnknownColumn(id.value.clone()))?;
                    picks.push(k);
                    projected_cols.push(alias.value.clone());
                }
                other => return Err(EngineError::Unsupported(format!("select item `{other}`"))),
            }
        }
        let mut out_rows: Vec<Vec<Value>> = Vec::new();
        for row in rows {
            let projected: Vec<Value> = picks.iter().map(|&k| row[k].clone()).collect();
            if distinct && out_rows.contains(&projected) {
                continue;
            }
            out_rows.push(projected);
        }
        Ok(ResultSet {
            columns: projected_cols,
            rows: out_rows,
        })
    }

    fn table(&self, name: &ObjectName) -> Result<&Table, EngineError> {
        let key = table_key(name)?;
        self.tables.get(&key).ok_or(EngineError::UnknownTable(key))
    }
}

fn coerce(value: Value, ty: ColumnType) -> Result<Value, EngineError> {
    Ok(match (value, ty) {
        (Value::Null, _) => Value::Null,
        (Value::Text(s), ColumnType::Timestamp) => Value::Timestamp(parse_timestamp(&s)?),
        (v @ Value::Timestamp(_), ColumnType::Timestamp)
        | (v @ Value::Text(_), ColumnType::Text)
        | (v @ Value::Number(_), ColumnType::Number)
        | (v @ Value::Bool(_), ColumnType::Bool) => v,
        (Value::Number(n), ColumnType::Text) => Value::Text(n.to_string()),
        (v, ty) => {
            return Err(EngineError::Type(format!(
                "{v} does not fit a {ty:?} column"
            )))
        }
    })
}

fn constant(expr: &Expr) -> Result<Value, EngineError> {
    match expr {
        Expr::Value(v) => literal(&v.value),
        Expr::TypedString(ts) => {
            let ast::Value::SingleQuotedString(s) = &ts.value.value else {
                return Err(EngineError::Unsupported(format!("typed literal `{expr}`")));
            };
            match column_type(&ts.data_type) {
                ColumnType::Timestamp => Ok(Value::Timestamp(parse_timestamp(s)?)),
                ColumnType::Text => Ok(Value::Text(s.clone())),
                _ => Err(EngineError::Unsupported(format!("typed literal `{expr}`"))),
            }
        }
        Expr::UnaryOp {
            op: UnaryOperator::Minus,
            expr,
        } => match constant(expr)? {
            Value::Number(n) => Ok(Value::Number(-n)),
            other => Err(EngineError::Type(format!("cannot negate {other}"))),
        },
        Expr::Nested(inner) => constant(inner),
        other => Err(EngineError::Unsupported(format!(
            "expression `{other}` in VALUES"
        ))),
    }
}

fn literal(v: &ast::Value) -> Result<Value, EngineError> {
    match v {
        ast::Value::SingleQuotedString(s) => Ok(Value::Text(s.clone())),
        ast::Value::Number(n, _) => n
            .parse::<f64>()
            .map(Value::Number)
            .map_err(|_| EngineError::Type(format!("bad number `{n}`"))),
        ast::Value::Boolean(b) => Ok(Value::Bool(*b)),
        ast::Value::Null => Ok(Value::Null),
        other => Err(EngineError::Unsupported(format!("literal `{other}`"))),
    }
}

/// Three-valued logic result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Truth {
    True,
    False,
    Unknown,
}

impl Truth {
    fn is_true(self) -> bool {
        self == Truth::True
    }

    fn not(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }
}

fn truth_of(v: Value) -> Result<Truth, EngineError> {
    match v {
        Value::Bool(true) => Ok(Truth::True),
        Value::Bool(false) => Ok(Truth::False),
        Value::Null => Ok(Truth::Unknown),
        other => Err(EngineError::Type(format!("{other} is not a boolean"))),
    }
}

fn from_truth(t: Truth) -> Value {
    match t {
        Truth::True => Value::Bool(true),
        Truth::False => Value::Bool(false),
        Truth::Unknown => Value::Null,
    }
}

fn eval(expr: &Expr, table: &Table, row: &[Value]) -> Result<Truth, EngineError> {
    truth_of(eval_value(expr, table, row)?)
}

fn eval_value(expr: &Expr, table: &Table, row: &[Value]) -> Result<Value, EngineError> {
    match expr {
        Expr::Identifier(id) => Ok(row[table.column(&id.value)?].clone()),
        Expr::Nested(inner) => eval_value(inner, table, row),
        Expr::Value(_) | Expr::TypedString(_) => constant(expr),
        Expr::UnaryOp {
            op: UnaryOperator::Not,
            expr,
        } => Ok(from_truth(eval(expr, table, row)?.not())),
        Expr::UnaryOp {
            op: UnaryOperator::Minus,
            ..
        } => constant(expr),
        Expr::IsNull(inner) => Ok(Value::Bool(eval_value(inner, table, row)? == Value::Null)),
        Expr::IsNotNull(inner) => Ok(Value::Bool(eval_value(inner, table, row)? != Value::Null)),
        Expr::BinaryOp { left, op, right } => match op {
            BinaryOperator::And => {
                let (l, r) = (eval(left, table, row)?, eval(right, table, row)?);
                Ok(from_truth(match (l, r) {
                    (Truth::False, _) | (_, Truth::False) => Truth::False,
                    (Truth::True, Truth::True) => Truth::True,
                    _ => Truth::Unknown,
                }))
            }
            BinaryOperator::Or => {
                let (l, r) = (eval(left, table, row)?, eval(right, table, row)?);
                Ok(from_truth(match (l, r) {
                    (Truth::True, _) | (_, Truth::True) => Truth::True,
                    (Truth::False, Truth::False) => Truth::False,
                    _ => Truth::Unknown,
                }))
            }
            BinaryOperator::Eq
            | BinaryOperator::NotEq
            | BinaryOperator::Lt
            | BinaryOperator::LtEq
            | BinaryOperator::Gt
            | BinaryOperator::GtEq => {
                let l = eval_value(left, table, row)?;
                let r = eval_value(right, table, row)?;
                let Some(ord) = l.sql_cmp(&r)? else {
                    return Ok(Value::Null);
                };
                Ok(Value::Bool(match op {
                    BinaryOperator::Eq => ord == Ordering::Equal,
                    BinaryOperator::NotEq => ord != Ordering::Equal,
                    BinaryOperator::Lt => ord == Ordering::Less,
                    BinaryOperator::LtEq => ord != Ordering::Greater,
                    BinaryOperator::Gt => ord == Ordering::Greater,
                    _ => ord != Ordering::Less,
                }))
            }
            other => Err(EngineError::Unsupported(format!("operator `{other}`"))),
        },
        Expr::InList {
            expr,
            list,
            negated,
        } => {
            let needle = eval_value(expr, table, row)?;
            let mut result = Truth::False;
            for item in list {
                match needle.sql_cmp(&eval_value(item, table, row)?)? {
                    Some(Ordering::Equal) => {
                        result = Truth::True;
                        break;
                    }
                    None => result = Truth::Unknown,
                    Some(_) => {}
                }
            }
            Ok(from_truth(if *negated { result.not() } else { result }))
        }
        other => Err(EngineError::Unsupported(format!("expression `{other}`"))),
    }
}

/// Compiled row pattern over symbol indices.
#[derive(Debug, Clone)]
enum Node {
    Symbol(usize),
    Start,
    End,
    Concat(Vec<Node>),
    Alt(Vec<Node>),
    Repeat {
        node: Box<Node>,
        min: u32,
        max: Option<u32>,
    },
}

struct MatchSpec<'a> {
    partition: Vec<usize>,
    order: Vec<(usize, bool)>,
    pattern: Node,
    /// `None` for symbols without a DEFINE (always true).
    conditions: Vec<Option<&'a Expr>>,
}

impl<'a> MatchSpec<'a> {
    fn compile(
        table: &Table,
        partition_by: &[Expr],
        order_by: &[ast::OrderByExpr],
        pattern: &MatchRecognizePattern,
        symbols: &'a [ast::SymbolDefinition],
    ) -> Result<Self, EngineError> {
        let column_of = |e: &Expr| match e {
            Expr::Identifier(id) => table.column(&id.value),
            other => Err(EngineError::Unsupported(format!(
                "non-column key `{other}`"
            ))),
        };
        let partition = partition_by
            .iter()
            .map(column_of)
            .collect::<Result<_, _>>()?;
        let order = order_by
            .iter()
            .map(|o| {
                let desc = match &o.options.sort {
                    None | Some(OrderBySort::Asc) => false,
                    Some(OrderBySort::Desc) => true,
                    Some(other) => {
                        return Err(EngineError::Unsupported(format!("ORDER BY {other:?}")))
                    }
                };
                Ok((column_of(&o.expr)?, desc))
            })
            .collect::<Result<_, _>>()?;

        let mut names: Vec<String> = Vec::new();
        let mut conditions: Vec<Option<&Expr>> = Vec::new();
        for def in symbols {
            let name = def.symbol.value.to_uppercase();
            if names.contains(&name) {
                return Err(EngineError::Parse(format!("symbol `{name}` defined twice")));
            }
            names.push(name);
            conditions.push(Some(&def.definition));
        }
        let pattern = compile_pattern(pattern, &mut names, &mut conditions)?;
        Ok(MatchSpec {
            partition,
            order,
            pattern,
            conditions,
        })
    }

    fn run(
        &self,
        table: &Table,
        skip_to_next: bool,
        step_limit: u64,
    ) -> Result<(Vec<String>, Vec<Vec<Value>>), EngineError> {
        let mut partitions: Vec<(Vec<Value>, Vec<&Vec<Value>>)> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for row in &table.rows {
            let key: Vec<Value> = self.partition.iter().map(|&k| row[k].clone()).collect();
            let label = key
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("\u{1f}");
            let slot = *index.entry(label).or_insert_with(|| {
                partitions.push((key, Vec::new()));
                partitions.len() - 1
            });
            partitions[slot].1.push(row);
        }
        partitions.sort_by(|(a, _), (b, _)| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.sort_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        });

        let mut out = Vec::new();
        for (key, mut rows) in partitions {
            // stable sort keeps insertion order among ties
            rows.sort_by(|a, b| {
                self.order
                    .iter()
                    .map(|&(k, desc)| {
                        let o = a[k].sort_cmp(&b[k]);
                        if desc {
                            o.reverse()
                        } else {
                            o
                        }
                    })
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            });
            let mut holds = vec![Vec::with_capacity(rows.len()); self.conditions.len()];
            for (s, cond) in self.conditions.iter().enumerate() {
                for row in &rows {
                    holds[s].push(match cond {
                        Some(e) => eval(e, table, row)?.is_true(),
                        None => true,
                    });
                }
            }
            let mut matcher = Matcher {
                holds: &holds,
                len: rows.len(),
                steps: 0,
                limit: step_limit,
            };
            let mut start = 0;
            while start < rows.len() {
                match matcher.find(&self.pattern, start)? {
                    Some(end) => {
                        out.push(key.clone());
                        start = if skip_to_next || end == start {
                            start + 1
                        } else {
                            end
                        };
                    }
                    None => start += 1,
                }
            }
        }
        let columns = self
            .partition
            .iter()
            .map(|&k| table.columns[k].0.clone())
            .collect();
        Ok((columns, out))
    }
}

fn compile_pattern(
    p: &MatchRecognizePattern,
    names: &mut Vec<String>,
    conditions: &mut Vec<Option<&Expr>>,
) -> Result<Node, EngineError> {
    Ok(match p {
        MatchRecognizePattern::Symbol(MatchRecognizeSymbol::Start) => Node::Start,
        MatchRecognizePattern::Symbol(MatchRecognizeSymbol::End) => Node::End,
        MatchRecognizePattern::Symbol(MatchRecognizeSymbol::Named(id)) => {
            let name = id.value.to_uppercase();
            let k = match names.iter().position(|n| *n == name) {
                Some(k) => k,
                None => {
                    names.push(name);
                    conditions.push(None);
                    names.len() - 1
                }
            };
            Node::Symbol(k)
        }
        MatchRecognizePattern::Exclude(_) | MatchRecognizePattern::Permute(_) => {
            return Err(EngineError::Unsupported(format!("pattern `{p}`")))
        }
        MatchRecognizePattern::Concat(ps) => Node::Concat(
            ps.iter()
                .map(|q| compile_pattern(q, names, conditions))
                .collect::<Result<_, _>>()?,
        ),
        MatchRecognizePattern::Group(q) => compile_pattern(q, names, conditions)?,
        MatchRecognizePattern::Alternation(ps) => Node::Alt(
            ps.iter()
                .map(|q| compile_pattern(q, names, conditions))
                .collect::<Result<_, _>>()?,
        ),
        MatchRecognizePattern::Repetition(q, quant) => {
            let (min, max) = match *quant {
                RepetitionQuantifier::ZeroOrMore => (0, None),
                RepetitionQuantifier::OneOrMore => (1, None),
                RepetitionQuantifier::AtMostOne => (0, Some(1)),
                RepetitionQuantifier::Exactly(n) => (n, Some(n)),
                RepetitionQuantifier::AtLeast(n) => (n, None),
                RepetitionQuantifier::AtMost(n) => (0, Some(n)),
                RepetitionQuantifier::Range(a, b) => {
                    if a > b {
                        return Err(EngineError::Parse(format!("empty range {{{a},{b}}}")));
                    }
                    (a, Some(b))
                }
            };
            Node::Repeat {
                node: Box::new(compile_pattern(q, names, conditions)?),
                min,
                max,
            }
        }
    })
}

struct Matcher<'h> {
    holds: &'h [Vec<bool>],
    len: usize,
    steps: u64,
    limit: u64,
}

type Cont<'c> = &'c mut dyn FnMut(&mut Matcher, usize) -> Result<Option<usize>, EngineError>;

impl Matcher<'_> {
    /// Preferred match starting at `start`: greedy quantifiers, leftmost alternatives.
    fn find(&mut self, pattern: &Node, start: usize) -> Result<Option<usize>, EngineError> {
        self.steps = 0;
        self.go(pattern, start, &mut |_, end| Ok(Some(end)))
    }

    fn tick(&mut self) -> Result<(), EngineError> {
        self.steps += 1;
        if self.steps > self.limit {
            return Err(EngineError::StepLimit(self.limit));
        }
        Ok(())
    }

    fn go(&mut self, node: &Node, pos: usize, k: Cont) -> Result<Option<usize>, EngineError> {
        self.tick()?;
        match node {
            Node::Symbol(s) => {
                if pos < self.len && self.holds[*s][pos] {
                    k(self, pos + 1)
                } else {
                    Ok(None)
                }
            }
            Node::Start => {
                if pos == 0 {
                    k(self, pos)
                } else {
                    Ok(None)
                }
            }
            Node::End => {
                if pos == self.len {
                    k(self, pos)
                } else {
                    Ok(None)
                }
            }
            Node::Concat(items) => self.seq(items, pos, k),
            Node::Alt(options) => {
                for option in options {
                    if let Some(end) = self.go(option, pos, k)? {
                        return Ok(Some(end));
                    }
                }
                Ok(None)
            }
            Node::Repeat { node, min, max } => self.repeat(node, *min, *max, 0, pos, usize::MAX, k),
        }
    }

    fn seq(&mut self, items: &[Node], pos: usize, k: Cont) -> Result<Option<usize>, EngineError> {
        match items.split_first() {
            None => k(self, pos),
            Some((first, rest)) => self.go(first, pos, &mut |m, next| m.seq(rest, next, k)),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn repeat(
        &mut self,
        node: &Node,
        min: u32,
        max: Option<u32>,
        count: u32,
        pos: usize,
        last: usize,
        k: Cont,
    ) -> Result<Option<usize>, EngineError> {
        self.tick()?;
        let can_more = max.is_none_or(|m| count < m);
        // an iteration past the minimum must consume input
        if can_more && !(count >= min && last == pos) {
            let found = self.go(node, pos, &mut |m, next| {
                if count >= min && next == pos {
                    return Ok(None);
                }
                m.repeat(node, min, max, count + 1, next, pos, k)
            })?;
            if found.is_some() {
                return Ok(found);
            }
        }
        if count >= min {
            k(self, pos)
        } else {
            Ok(None)
        }
    }
}
