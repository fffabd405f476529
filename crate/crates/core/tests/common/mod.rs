//! Generators and independent oracles shared by the integration tests and
//! the acceptance harness.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::RngExt;
use relaxq::constraints::ActivitySet;
use relaxq::net::NetBuilder;
use relaxq::relations::PairSet;
use relaxq::relaxation::RelaxationOp;
use relaxq::{
    build_matrix, emit_query, emit_schema, Activity, Constraint, QueryMode, RelationKind,
    RelationMatrix, Trace, WorkflowNet,
};
use relaxq_rowmatch::{Database, Value};

pub fn testdata(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("testdata")
        .join(name)
}

pub fn read_testdata(name: &str) -> String {
    std::fs::read_to_string(testdata(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

pub const RUNNING_EXAMPLE_ORDER: [&str; 9] =
    ["CPR", "KPR", "CPO", "RG", "PQC", "RI", "SP", "CO", "RR"];

pub const RUNNING_EXAMPLE_PAIRS: [(&str, &str); 8] = [
    ("CPR", "KPR"),
    ("KPR", "CPO"),
    ("KPR", "RR"),
    ("CPO", "RG"),
    ("RG", "PQC"),
    ("PQC", "RI"),
    ("RI", "SP"),
    ("SP", "CO"),
];

// ---------------------------------------------------------------------------
// Block-structured nets

/// Process tree; every construct maps to a sound, free-choice net fragment.
#[derive(Debug, Clone)]
pub enum Block {
    Act(String),
    Tau,
    Seq(Box<Block>, Box<Block>),
    Xor(Box<Block>, Box<Block>),
    And(Box<Block>, Box<Block>),
    Loop(Box<Block>, Box<Block>),
}

/// A generated net together with its own copy of the flow relation, so the
/// oracle token game does not depend on the library's firing rule.
pub struct GeneratedNet {
    pub tree: Block,
    pub net: WorkflowNet,
    pub places: usize,
    /// (preset places, postset places, visible label)
    pub transitions: Vec<(Vec<usize>, Vec<usize>, Option<String>)>,
}

pub fn random_block(rng: &mut StdRng, labels: &mut Vec<String>, depth: u32) -> Block {
    let leaf = depth == 0 || rng.random_bool(0.3);
    if leaf {
        return match labels.pop() {
            Some(l) if rng.random_bool(0.9) => Block::Act(l),
            Some(l) => {
                labels.push(l);
                Block::Tau
            }
            None => Block::Tau,
        };
    }
    let sub =
        |rng: &mut StdRng, labels: &mut Vec<String>| Box::new(random_block(rng, labels, depth - 1));
    match rng.random_range(0..5) {
        0 | 1 => {
            let (a, b) = (sub(rng, labels), sub(rng, labels));
            Block::Seq(a, b)
        }
        2 => {
            let (a, b) = (sub(rng, labels), sub(rng, labels));
            Block::Xor(a, b)
        }
        3 => {
            let (a, b) = (sub(rng, labels), sub(rng, labels));
            Block::And(a, b)
        }
        _ => {
            let body = sub(rng, labels);
            let redo = if rng.random_bool(0.5) {
                Box::new(Block::Tau)
            } else {
                sub(rng, labels)
            };
            Block::Loop(body, redo)
        }
    }
}

struct Compiler {
    places: usize,
    transitions: Vec<(Vec<usize>, Vec<usize>, Option<String>)>,
}

impl Compiler {
    fn place(&mut self) -> usize {
        self.places += 1;
        self.places - 1
    }

    fn transition(&mut self, pre: Vec<usize>, post: Vec<usize>, label: Option<String>) {
        self.transitions.push((pre, post, label));
    }

    fn compile(&mut self, b: &Block, input: usize, output: usize) {
        match b {
            Block::Act(l) => self.transition(vec![input], vec![output], Some(l.clone())),
            Block::Tau => self.transition(vec![input], vec![output], None),
            Block::Seq(x, y) => {
                let mid = self.place();
                self.compile(x, input, mid);
                self.compile(y, mid, output);
            }
            Block::Xor(x, y) => {
                self.compile(x, input, output);
                self.compile(y, input, output);
            }
            Block::And(x, y) => {
                let (xi, xo, yi, yo) = (self.place(), self.place(), self.place(), self.place());
                self.transition(vec![input], vec![xi, yi], None);
                self.compile(x, xi, xo);
                self.compile(y, yi, yo);
                self.transition(vec![xo, yo], vec![output], None);
            }
            Block::Loop(body, redo) => {
                let (entry, exit) = (self.place(), self.place());
                self.transition(vec![input], vec![entry], None);
                self.compile(body, entry, exit);
                self.compile(redo, exit, entry);
                self.transition(vec![exit], vec![output], None);
            }
        }
    }
}

pub fn count_labels(b: &Block) -> usize {
    match b {
        Block::Act(_) => 1,
        Block::Tau => 0,
        Block::Seq(x, y) | Block::Xor(x, y) | Block::And(x, y) | Block::Loop(x, y) => {
            count_labels(x) + count_labels(y)
        }
    }
}

/// Random sound free-choice net with at most `max_labels` labeled transitions.
pub fn random_net(rng: &mut StdRng, max_labels: usize) -> GeneratedNet {
    let mut labels: Vec<String> = (0..max_labels)
        .map(|k| ((b'a' + k as u8) as char).to_string())
        .collect();
    labels.shuffle(rng);
    let tree = random_block(rng, &mut labels, 4);
    let mut c = Compiler {
        places: 0,
        transitions: Vec::new(),
    };
    let (source, sink) = (c.place(), c.place());
    c.compile(&tree, source, sink);

    let mut builder = NetBuilder::new().id("generated");
    for p in 0..c.places {
        builder = builder.place(format!("p{p}"));
    }
    for (k, (pre, post, label)) in c.transitions.iter().enumerate() {
        builder = builder.transition(format!("t{k}"), label.as_deref());
        for p in pre {
            builder = builder.arc(format!("p{p}"), format!("t{k}"));
        }
        for p in post {
            builder = builder.arc(format!("t{k}"), format!("p{p}"));
        }
    }
    let net = builder
        .build()
        .expect("block-structured nets are workflow nets");
    GeneratedNet {
        tree,
        net,
        places: c.places,
        transitions: c.transitions,
    }
}

/// Directly-follows pairs of all complete firing sequences, found by an
/// independent token game over states (marking, last visible label). A pair
/// counts only if the state it leads to can still reach the final marking.
pub fn brute_force_pairs(g: &GeneratedNet) -> PairSet {
    type State = (Vec<u32>, Option<usize>);
    /// (from, to, directly-follows pair of transition indices)
    type Edge = (usize, usize, Option<(usize, usize)>);
    let mut initial = vec![0; g.places];
    initial[0] = 1;
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut states: Vec<State> = vec![(initial.clone(), None)];
    index.insert((initial, None), 0);
    let mut edges: Vec<Edge> = Vec::new();
    let mut k = 0;
    while k < states.len() {
        let (marking, last) = states[k].clone();
        for (t, (pre, post, label)) in g.transitions.iter().enumerate() {
            if !pre.iter().all(|&p| marking[p] > 0) {
                continue;
            }
            let mut next = marking.clone();
            for &p in pre {
                next[p] -= 1;
            }
            for &p in post {
                next[p] += 1;
            }
            let (next_last, pair) = match (label, last) {
                (Some(_), Some(prev)) => (Some(t), Some((prev, t))),
                (Some(_), None) => (Some(t), None),
                (None, _) => (last, None),
            };
            let state = (next, next_last);
            let target = *index.entry(state.clone()).or_insert_with(|| {
                states.push(state);
                states.len() - 1
            });
            edges.push((k, target, pair));
        }
        k += 1;
    }
    // backward reachability from the final marking
    let mut alive: Vec<bool> = states
        .iter()
        .map(|(m, _)| m[1] == 1 && m.iter().sum::<u32>() == 1)
        .collect();
    let mut changed = true;
    while changed {
        changed = false;
        for &(from, to, _) in &edges {
            if alive[to] && !alive[from] {
                alive[from] = true;
                changed = true;
            }
        }
    }
    let label = |t: usize| Activity::new(g.transitions[t].2.as_deref().unwrap());
    let mut d = PairSet::new();
    for &(_, to, pair) in &edges {
        if let (true, Some((a, b))) = (alive[to], pair) {
            d.insert(label(a), label(b));
        }
    }
    d
}

// ---------------------------------------------------------------------------
// Finite-trace temporal logic, evaluated by direct unrolling

/// Formula over positions of `start · trace`, where position 0 is a virtual
/// start marker that carries no activity.
#[derive(Debug, Clone)]
pub enum Ltl {
    Start,
    In(BTreeSet<String>),
    Not(Box<Ltl>),
    Implies(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
    Globally(Box<Ltl>),
}

impl Ltl {
    pub fn holds(&self, word: &[Option<&str>], i: usize) -> bool {
        match self {
            Ltl::Start => i == 0,
            Ltl::In(set) => word[i].is_some_and(|l| set.contains(l)),
            Ltl::Not(f) => !f.holds(word, i),
            Ltl::Implies(a, b) => !a.holds(word, i) || b.holds(word, i),
            // strong next: there must be a following position
            Ltl::Next(f) => i + 1 < word.len() && f.holds(word, i + 1),
            Ltl::Until(a, b) => (i..word.len())
                .find(|&j| b.holds(word, j))
                .is_some_and(|j| (i..j).all(|k| a.holds(word, k))),
            Ltl::Globally(f) => (i..word.len()).all(|j| f.holds(word, j)),
        }
    }
}

fn labels(set: &ActivitySet) -> BTreeSet<String> {
    set.iter().map(|a| a.to_string()).collect()
}

/// The temporal formula of a template instance.
pub fn formula(c: &Constraint) -> Ltl {
    use Ltl::*;
    let b = Box::new;
    match c {
        Constraint::Init(p) => Globally(b(Implies(b(Start), b(Next(b(In(labels(p)))))))),
        Constraint::ChainResponse { source, target } => Globally(b(Implies(
            b(In(labels(source))),
            b(Next(b(In(labels(target))))),
        ))),
        Constraint::AlternateResponse { source, target } => Globally(b(Implies(
            b(In(labels(source))),
            b(Next(b(Until(
                b(Not(b(In(labels(source))))),
                b(In(labels(target))),
            )))),
        ))),
    }
}

pub fn ltl_holds(trace: &[String], c: &Constraint) -> bool {
    let word: Vec<Option<&str>> = std::iter::once(None)
        .chain(trace.iter().map(|s| Some(s.as_str())))
        .collect();
    formula(c).holds(&word, 0)
}

pub fn alphabet(n: usize) -> Vec<String> {
    (0..n)
        .map(|k| ((b'a' + k as u8) as char).to_string())
        .collect()
}

pub fn random_trace(rng: &mut StdRng, sigma: &[String], max_len: usize) -> Vec<String> {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| sigma.choose(rng).unwrap().clone())
        .collect()
}

fn random_subset(rng: &mut StdRng, sigma: &[String], allow_empty: bool) -> Vec<String> {
    loop {
        let s: Vec<String> = sigma
            .iter()
            .filter(|_| rng.random_bool(0.4))
            .cloned()
            .collect();
        if allow_empty || !s.is_empty() {
            return s;
        }
    }
}

pub fn random_constraint(rng: &mut StdRng, sigma: &[String]) -> Constraint {
    let p = random_subset(rng, sigma, false);
    let q = random_subset(rng, sigma, false);
    let (p, q): (Vec<&str>, Vec<&str>) = (
        p.iter().map(String::as_str).collect(),
        q.iter().map(String::as_str).collect(),
    );
    match rng.random_range(0..3) {
        0 => {
            let init = random_subset(rng, sigma, true);
            Constraint::init(init.iter().map(String::as_str))
        }
        1 => Constraint::chain_response(p, q),
        _ => Constraint::alternate_response(p, q),
    }
}

// ---------------------------------------------------------------------------
// SQL through the row-pattern engine

pub fn load_log(traces: &[Trace]) -> Database {
    let mut db = Database::new();
    db.execute(&emit_schema(&Default::default()))
        .expect("schema loads");
    for t in traces {
        for (k, a) in t.activities.iter().enumerate() {
            db.insert_row(
                "events",
                &[
                    ("case_id", Value::Text(t.case_id.clone())),
                    (
                        "end_time",
                        Value::Text(format!("2024-01-01 00:{:02}:{:02}", k / 60, k % 60)),
                    ),
                    ("event_name", Value::Text(a.clone())),
                ],
            )
            .expect("row inserts");
        }
    }
    db
}

pub fn sql_violating_cases(db: &mut Database, c: &Constraint) -> BTreeSet<String> {
    let sql = emit_query(c, QueryMode::Violation);
    db.query(&sql)
        .unwrap_or_else(|e| panic!("query for {c} failed: {e}\n{sql}"))
        .column_text("case_id")
        .expect("case_id column")
        .into_iter()
        .collect()
}

pub fn random_log(rng: &mut StdRng, sigma: &[String], cases: usize, max_len: usize) -> Vec<Trace> {
    (0..cases)
        .map(|k| {
            let mut t = random_trace(rng, sigma, max_len);
            if t.is_empty() {
                t.push(sigma[0].clone());
            }
            Trace::new(format!("c{k}"), t)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Relation matrices and relaxation ops

pub fn random_matrix(rng: &mut StdRng, sigma: &[String]) -> RelationMatrix {
    let mut d = PairSet::new();
    for a in sigma {
        for b in sigma {
            if rng.random_bool(0.3) {
                d.insert(Activity::new(a.as_str()), Activity::new(b.as_str()));
            }
        }
    }
    let acts: Vec<Activity> = sigma.iter().map(|s| Activity::new(s.as_str())).collect();
    build_matrix(&d, &acts).expect("pairs use the alphabet")
}

/// Every op whose precondition holds on `m`.
pub fn applicable_ops(m: &RelationMatrix) -> Vec<RelaxationOp> {
    let acts = m.activities();
    let mut ops = Vec::new();
    for (i, a) in acts.iter().enumerate() {
        ops.push(RelaxationOp::RemoveActivity(a.clone()));
        for (j, b) in acts.iter().enumerate() {
            let cell = m.cell(i, j);
            if i != j {
                ops.push(RelaxationOp::Decouple(a.clone(), b.clone()));
            }
            if matches!(cell, RelationKind::Exclusive)
                || (i != j && matches!(cell, RelationKind::DirectBackward))
            {
                ops.push(RelaxationOp::ExclusiveToDirect(a.clone(), b.clone()));
            }
            if matches!(cell, RelationKind::DirectForward | RelationKind::Concurrent) {
                ops.push(RelaxationOp::DirectToEventual(a.clone(), b.clone()));
            }
        }
    }
    ops
}

pub fn all_traces(sigma: &[String], max_len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for t in &frontier {
            for a in sigma {
                let mut u: Vec<String> = t.clone();
                u.push(a.clone());
                next.push(u);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

// ---------------------------------------------------------------------------
// Suite runners

#[derive(Debug, Default)]
pub struct Outcome {
    pub checked: usize,
    pub agreed: usize,
    pub skipped: usize,
    /// First few disagreements, human readable.
    pub mismatches: Vec<String>,
}

impl Outcome {
    pub fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if ok {
            self.agreed += 1;
        } else if self.mismatches.len() < 5 {
            self.mismatches.push(describe());
        }
    }

    pub fn all_agree(&self) -> bool {
        self.agreed == self.checked
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{}/{} agree", self.agreed, self.checked);
        if self.skipped > 0 {
            s.push_str(&format!(", {} skipped", self.skipped));
        }
        for m in &self.mismatches {
            s.push_str("\n      ");
            s.push_str(m);
        }
        s
    }
}

pub fn seeded(seed: u64) -> StdRng {
    use rand::SeedableRng;
    StdRng::seed_from_u64(seed)
}

/// Derived directly-follows pairs against brute-force trace enumeration.
pub fn df_oracle(nets: usize, seed: u64) -> Outcome {
    let mut rng = seeded(seed);
    let mut out = Outcome::default();
    while out.checked < nets {
        let g = random_net(&mut rng, 8);
        let expected = brute_force_pairs(&g);
        let derived = relaxq::pipeline::derive(g.net.clone(), relaxq::net::DEFAULT_STATE_LIMIT)
            .map(|d| d.directly_follows);
        match derived {
            Ok(d) => out.record(d == expected, || {
                format!("{:?}: derived {d:?}, expected {expected:?}", g.tree)
            }),
            Err(e) => out.record(false, || format!("{:?}: {e}", g.tree)),
        }
    }
    out
}

/// Checker verdicts against the temporal formulas.
pub fn checker_oracle(pairs: usize, seed: u64) -> Outcome {
    let mut rng = seeded(seed);
    let mut out = Outcome::default();
    for _ in 0..pairs {
        let sigma = alphabet(rng.random_range(1..=4));
        let trace = random_trace(&mut rng, &sigma, 6);
        let c = random_constraint(&mut rng, &sigma);
        let got = relaxq::checker::evaluate_labels(&trace, &c).holds;
        let want = ltl_holds(&trace, &c);
        out.record(got == want, || {
            format!("{c} on {trace:?}: checker {got}, formula {want}")
        });
    }
    out
}

/// Violation-mode SQL against the checker's violating cases.
pub fn sql_oracle(logs: usize, seed: u64) -> Outcome {
    let mut rng = seeded(seed);
    let mut out = Outcome::default();
    for _ in 0..logs {
        let sigma = alphabet(rng.random_range(1..=4));
        let cases = rng.random_range(1..=8);
        let log = random_log(&mut rng, &sigma, cases, 6);
        let mut db = load_log(&log);
        let constraints: Vec<Constraint> = (0..6)
            .map(|_| random_constraint(&mut rng, &sigma))
            .collect();
        let mut ok = true;
        let mut detail = String::new();
        for c in &constraints {
            let want: BTreeSet<String> = log
                .iter()
                .filter(|t| !relaxq::evaluate_constraint(t, c).holds)
                .map(|t| t.case_id.clone())
                .collect();
            let got = sql_violating_cases(&mut db, c);
            if got != want && ok {
                ok = false;
                detail = format!("{c}: sql {got:?}, checker {want:?}");
            }
        }
        out.record(ok, || detail);
    }
    out
}

/// Language inclusion before and after a single relaxation op.
pub fn monotonicity(pairs: usize, seed: u64) -> Outcome {
    let mut rng = seeded(seed);
    let mut out = Outcome::default();
    while out.checked < pairs {
        let sigma = alphabet(rng.random_range(1..=4));
        let m = random_matrix(&mut rng, &sigma);
        let ops = applicable_ops(&m);
        let op = ops
            .choose(&mut rng)
            .expect("remove is always applicable")
            .clone();
        let (after, _) = relaxq::apply_op(&m, &op).expect("applicable op");
        let before_cs = relaxq::constraints_from_matrix(&m).expect("non-empty alphabet");
        let after_cs = relaxq::constraints_from_matrix(&after).expect("non-empty alphabet");
        let accepts = |cs: &relaxq::ConstraintSet, t: &[String]| {
            cs.iter()
                .all(|c| relaxq::checker::evaluate_labels(t, c).holds)
        };
        let lost = all_traces(&sigma, 6)
            .into_iter()
            .find(|t| accepts(&before_cs, t) && !accepts(&after_cs, t));
        out.record(lost.is_none(), || {
            format!(
                "{op} on D={{{}}}: {:?} accepted before, rejected after",
                show_pairs(&relaxq::constraints::extract_relations(&m).0),
                lost.unwrap()
            )
        });
    }
    out
}

/// Mirror symmetry and diagonal alphabet after every op of random edit sequences.
pub fn matrix_invariants(applications: usize, seed: u64) -> Outcome {
    let mut rng = seeded(seed);
    let mut out = Outcome::default();
    while out.checked < applications {
        let sigma = alphabet(rng.random_range(1..=5));
        let mut m = random_matrix(&mut rng, &sigma);
        for _ in 0..10 {
            let ops = applicable_ops(&m);
            let op = ops.choose(&mut rng).unwrap().clone();
            let (next, _) = relaxq::apply_op(&m, &op).expect("applicable op");
            let verdict = next.validate();
            out.record(verdict.is_ok(), || format!("{op}: {verdict:?}"));
            m = next;
        }
    }
    out
}

/// CSV log with `cases` cases of `per_case` events each over `sigma`.
pub fn synthetic_log(seed: u64, cases: usize, per_case: usize, sigma: &[String]) -> String {
    let mut rng = seeded(seed);
    let mut out = String::from("case_id,event_name,end_time\n");
    for c in 0..cases {
        for k in 0..per_case {
            let a = sigma.choose(&mut rng).unwrap();
            out.push_str(&format!(
                "case{c},{a},2024-01-{:02} {:02}:{:02}:{:02}\n",
                1 + k / 24,
                k % 24,
                c % 60,
                (c / 60) % 60
            ));
        }
    }
    out
}

pub fn scale_constraints(sigma: &[String]) -> relaxq::ConstraintSet {
    let s = |k: usize| sigma[k % sigma.len()].as_str();
    let mut cs = relaxq::ConstraintSet::new();
    cs.insert(Constraint::init([s(0), s(1), s(2)]));
    for k in 0..5 {
        cs.insert(Constraint::chain_response([s(k)], [s(k + 1), s(k + 2)]));
    }
    for k in 0..4 {
        cs.insert(Constraint::alternate_response([s(k), s(k + 3)], [s(k + 5)]));
    }
    cs
}

pub fn show_pairs(d: &PairSet) -> String {
    d.pairs()
        .map(|(a, b)| format!("({a},{b})"))
        .collect::<Vec<_>>()
        .join(",")
}
