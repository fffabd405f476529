//! Workflow nets: ingestion from a PNML subset, structural validation,
//! the free-choice test and bounded soundness analysis.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

/// Default bound on the number of distinct markings explored by [`check_soundness`].
pub const DEFAULT_STATE_LIMIT: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("malformed document{}: {message}", line_suffix(*.line))]
    MalformedDocument { message: String, line: Option<u32> },
    #[error("not a workflow net: {violation}{}", node_suffix(.node))]
    NotAWorkflowNet {
        violation: WfViolation,
        node: Option<String>,
    },
    #[error("activity label `{label}` is used by transitions `{first}` and `{second}`")]
    DuplicateLabel {
        label: String,
        first: String,
        second: String,
    },
}

fn line_suffix(line: Option<u32>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

fn node_suffix(node: &Option<String>) -> String {
    node.as_ref()
        .map(|n| format!(" (node `{n}`)"))
        .unwrap_or_default()
}

impl NetError {
    fn malformed(message: impl Into<String>, line: Option<u32>) -> Self {
        NetError::MalformedDocument {
            message: message.into(),
            line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WfViolation {
    NoSourcePlace,
    MultipleSourcePlaces,
    NoSinkPlace,
    MultipleSinkPlaces,
    SourceIsSink,
    NotOnSourceSinkPath,
}

impl fmt::Display for WfViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WfViolation::NoSourcePlace => "no place with an empty preset",
            WfViolation::MultipleSourcePlaces => "more than one place with an empty preset",
            WfViolation::NoSinkPlace => "no place with an empty postset",
            WfViolation::MultipleSinkPlaces => "more than one place with an empty postset",
            WfViolation::SourceIsSink => "the source place is also the sink place",
            WfViolation::NotOnSourceSinkPath => "node is not on a path from source to sink",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Place {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub id: String,
    /// `None` for silent transitions.
    pub label: Option<String>,
}

impl Transition {
    pub fn is_silent(&self) -> bool {
        self.label.is_none()
    }
}

/// A validated workflow net. Node order follows the order of first declaration.
#[derive(Debug, Clone)]
pub struct WorkflowNet {
    id: String,
    places: Vec<Place>,
    transitions: Vec<Transition>,
    arcs: Vec<(String, String)>,
    preset: Vec<Vec<usize>>,
    postset: Vec<Vec<usize>>,
    consumers: Vec<Vec<usize>>,
    source: usize,
    sink: usize,
}

/// Incremental construction of a [`WorkflowNet`]; `build` runs every structural check.
#[derive(Debug, Clone, Default)]
pub struct NetBuilder {
    id: Option<String>,
    places: Vec<String>,
    transitions: Vec<(String, Option<String>)>,
    arcs: Vec<(String, String)>,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn place(mut self, id: impl Into<String>) -> Self {
        self.places.push(id.into());
        self
    }

    pub fn transition(mut self, id: impl Into<String>, label: Option<&str>) -> Self {
        self.transitions.push((id.into(), label.map(str::to_owned)));
        self
    }

    /// Shorthand for a labeled transition whose id equals its label.
    pub fn activity(self, label: &str) -> Self {
        self.transition(label, Some(label))
    }

    pub fn silent(self, id: impl Into<String>) -> Self {
        self.transition(id, None)
    }

    pub fn arc(mut self, source: impl Into<String>, target: impl Into<String>) -> Self {
        self.arcs.push((source.into(), target.into()));
        self
    }

    pub fn build(self) -> Result<WorkflowNet, NetError> {
        WorkflowNet::from_parts(
            self.id.unwrap_or_else(|| "net".to_owned()),
            self.places,
            self.transitions,
            self.arcs,
        )
    }
}

#[derive(Clone, Copy)]
enum NodeRef {
    Place(usize),
    Transition(usize),
}

impl WorkflowNet {
    fn from_parts(
        id: String,
        places: Vec<String>,
        transitions: Vec<(String, Option<String>)>,
        arcs: Vec<(String, String)>,
    ) -> Result<Self, NetError> {
        let mut nodes: HashMap<&str, NodeRef> = HashMap::new();
        for (i, p) in places.iter().enumerate() {
            if p.is_empty() {
                return Err(NetError::malformed("place with empty id", None));
            }
            if nodes.insert(p, NodeRef::Place(i)).is_some() {
                return Err(NetError::malformed(
                    format!("duplicate node id `{p}`"),
                    None,
                ));
            }
        }
        for (i, (t, _)) in transitions.iter().enumerate() {
            if t.is_empty() {
                return Err(NetError::malformed("transition with empty id", None));
            }
            if nodes.insert(t, NodeRef::Transition(i)).is_some() {
                return Err(NetError::malformed(
                    format!("duplicate node id `{t}`"),
                    None,
                ));
            }
        }

        let mut preset = vec![Vec::new(); transitions.len()];
        let mut postset = vec![Vec::new(); transitions.len()];
        let mut consumers = vec![Vec::new(); places.len()];
        let mut producers = vec![Vec::new(); places.len()];
        let mut seen = HashSet::new();
        for (src, dst) in &arcs {
            let lookup = |n: &str| {
                nodes.get(n).copied().ok_or_else(|| {
                    NetError::malformed(format!("arc endpoint `{n}` does not exist"), None)
                })
            };
            match (lookup(src)?, lookup(dst)?) {
                (NodeRef::Place(p), NodeRef::Transition(t)) => {
                    preset[t].push(p);
                    consumers[p].push(t);
                }
                (NodeRef::Transition(t), NodeRef::Place(p)) => {
                    postset[t].push(p);
                    producers[p].push(t);
                }
                _ => {
                    return Err(NetError::malformed(
                        format!("arc `{src}` -> `{dst}` does not connect a place and a transition"),
                        None,
                    ))
                }
            }
            if !seen.insert((src.as_str(), dst.as_str())) {
                return Err(NetError::malformed(
                    format!("duplicate arc `{src}` -> `{dst}`"),
                    None,
                ));
            }
        }
        for set in preset.iter_mut().chain(postset.iter_mut()) {
            set.sort_unstable();
        }

        let find_unique = |empty: &dyn Fn(usize) -> bool,
                           none: WfViolation,
                           many: WfViolation|
         -> Result<usize, NetError> {
            let mut found = (0..places.len()).filter(|&p| empty(p));
            let first = found.next().ok_or(NetError::NotAWorkflowNet {
                violation: none,
                node: None,
            })?;
            if let Some(second) = found.next() {
                return Err(NetError::NotAWorkflowNet {
                    violation: many,
                    node: Some(places[second].clone()),
                });
            }
            Ok(first)
        };
        let source = find_unique(
            &|p| producers[p].is_empty(),
            WfViolation::NoSourcePlace,
            WfViolation::MultipleSourcePlaces,
        )?;
        let sink = find_unique(
            &|p| consumers[p].is_empty(),
            WfViolation::NoSinkPlace,
            WfViolation::MultipleSinkPlaces,
        )?;
        if source == sink {
            return Err(NetError::NotAWorkflowNet {
                violation: WfViolation::SourceIsSink,
                node: Some(places[source].clone()),
            });
        }

        // forward from the source and backward from the sink over the bipartite graph
        let n_places = places.len();
        let mut forward = vec![false; n_places + transitions.len()];
        let mut stack = vec![source];
        forward[source] = true;
        while let Some(node) = stack.pop() {
            let next: Vec<usize> = if node < n_places {
                consumers[node].iter().map(|t| n_places + t).collect()
            } else {
                postset[node - n_places].clone()
            };
            for n in next {
                if !forward[n] {
                    forward[n] = true;
                    stack.push(n);
                }
            }
        }
        let mut backward = vec![false; n_places + transitions.len()];
        let mut stack = vec![sink];
        backward[sink] = true;
        while let Some(node) = stack.pop() {
            let next: Vec<usize> = if node < n_places {
                producers[node].iter().map(|t| n_places + t).collect()
            } else {
                preset[node - n_places].clone()
            };
            for n in next {
                if !backward[n] {
                    backward[n] = true;
                    stack.push(n);
                }
            }
        }
        if let Some(bad) = (0..forward.len()).find(|&n| !(forward[n] && backward[n])) {
            let node = if bad < n_places {
                places[bad].clone()
            } else {
                transitions[bad - n_places].0.clone()
            };
            return Err(NetError::NotAWorkflowNet {
                violation: WfViolation::NotOnSourceSinkPath,
                node: Some(node),
            });
        }

        let mut labels: HashMap<&str, &str> = HashMap::new();
        for (tid, label) in &transitions {
            if let Some(label) = label {
                if let Some(first) = labels.insert(label, tid) {
                    return Err(NetError::DuplicateLabel {
                        label: label.clone(),
                        first: first.to_owned(),
                        second: tid.clone(),
                    });
                }
            }
        }

        Ok(WorkflowNet {
            id,
            places: places.into_iter().map(|id| Place { id }).collect(),
            transitions: transitions
                .into_iter()
                .map(|(id, label)| Transition { id, label })
                .collect(),
            arcs,
            preset,
            postset,
            consumers,
            source,
            sink,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn arcs(&self) -> &[(String, String)] {
        &self.arcs
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Input place indices of transition `t`, sorted.
    pub fn preset(&self, t: usize) -> &[usize] {
        &self.preset[t]
    }

    /// Output place indices of transition `t`, sorted.
    pub fn postset(&self, t: usize) -> &[usize] {
        &self.postset[t]
    }

    /// Labels of the non-silent transitions, in declaration order.
    pub fn activity_labels(&self) -> Vec<&str> {
        self.transitions
            .iter()
            .filter_map(|t| t.label.as_deref())
            .collect()
    }

    pub fn initial_marking(&self) -> Marking {
        let mut m = Marking::empty(self.places.len());
        m.tokens[self.source] = 1;
        m
    }

    pub fn final_marking(&self) -> Marking {
        let mut m = Marking::empty(self.places.len());
        m.tokens[self.sink] = 1;
        m
    }

    pub fn is_enabled(&self, marking: &Marking, t: usize) -> bool {
        self.preset[t].iter().all(|&p| marking.tokens[p] > 0)
    }

    /// Fires `t`, which must be enabled. Token counts are not capped.
    pub fn fire(&self, marking: &Marking, t: usize) -> Marking {
        let mut next = marking.clone();
        for &p in &self.preset[t] {
            next.tokens[p] -= 1;
        }
        for &p in &self.postset[t] {
            next.tokens[p] += 1;
        }
        next
    }

    pub fn to_pnml(&self) -> String {
        use quick_xml::escape::escape;
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<pnml>\n");
        out.push_str(&format!(
            "  <net id=\"{}\" type=\"http://www.pnml.org/version-2009/grammar/ptnet\">\n",
            escape(self.id.as_str())
        ));
        for p in &self.places {
            out.push_str(&format!("    <place id=\"{}\"/>\n", escape(p.id.as_str())));
        }
        for t in &self.transitions {
            match &t.label {
                Some(label) => out.push_str(&format!(
                    "    <transition id=\"{}\"><name><text>{}</text></name></transition>\n",
                    escape(t.id.as_str()),
                    escape(label.as_str())
                )),
                None => out.push_str(&format!(
                    "    <transition id=\"{}\"/>\n",
                    escape(t.id.as_str())
                )),
            }
        }
        for (n, (src, dst)) in self.arcs.iter().enumerate() {
            out.push_str(&format!(
                "    <arc id=\"arc{n}\" source=\"{}\" target=\"{}\"/>\n",
                escape(src.as_str()),
                escape(dst.as_str())
            ));
        }
        out.push_str("  </net>\n</pnml>\n");
        out
    }
}

/// Token counts indexed by place position in the owning net.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking {
    tokens: Vec<u32>,
}

impl Marking {
    fn empty(places: usize) -> Self {
        Marking {
            tokens: vec![0; places],
        }
    }

    pub fn tokens(&self, place: usize) -> u32 {
        self.tokens[place]
    }

    /// Marked places by id with their token counts.
    pub fn describe(&self, net: &WorkflowNet) -> BTreeMap<String, u32> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(p, &n)| (net.places[p].id.clone(), n))
            .collect()
    }

    fn key<'a>(&self, net: &'a WorkflowNet) -> Vec<(&'a str, u32)> {
        let mut key: Vec<_> = self
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(p, &n)| (net.places[p].id.as_str(), n))
            .collect();
        key.sort_unstable();
        key
    }
}

pub fn parse_pnml(document: &str) -> Result<WorkflowNet, NetError> {
    let doc = roxmltree::Document::parse(document)
        .map_err(|e| NetError::malformed(e.to_string(), Some(e.pos().row)))?;
    let line_of = |node: roxmltree::Node| doc.text_pos_at(node.range().start).row;

    let root = doc.root_element();
    if root.tag_name().name() != "pnml" {
        return Err(NetError::malformed(
            format!(
                "root element is `{}`, expected `pnml`",
                root.tag_name().name()
            ),
            Some(line_of(root)),
        ));
    }
    let mut nets = root.children().filter(|n| n.has_tag_name("net"));
    let net = nets
        .next()
        .ok_or_else(|| NetError::malformed("no `net` element", Some(line_of(root))))?;
    if let Some(extra) = nets.next() {
        return Err(NetError::malformed(
            "more than one `net` element",
            Some(line_of(extra)),
        ));
    }

    let mut builder = NetBuilder::new().id(net.attribute("id").unwrap_or("net"));
    collect_nodes(net, &mut builder, &line_of)?;
    builder.build()
}

fn required_attr<'a>(
    node: roxmltree::Node<'a, '_>,
    name: &str,
    line: u32,
) -> Result<&'a str, NetError> {
    node.attribute(name)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| {
            NetError::malformed(
                format!(
                    "`{}` element without `{name}` attribute",
                    node.tag_name().name()
                ),
                Some(line),
            )
        })
}

fn collect_nodes(
    container: roxmltree::Node,
    builder: &mut NetBuilder,
    line_of: &dyn Fn(roxmltree::Node) -> u32,
) -> Result<(), NetError> {
    for child in container.children().filter(|n| n.is_element()) {
        let line = line_of(child);
        match child.tag_name().name() {
            "page" => collect_nodes(child, builder, line_of)?,
            "place" => {
                if let Some(m) = child.children().find(|n| n.has_tag_name("initialMarking")) {
                    return Err(NetError::malformed(
                        "explicit `initialMarking` is not supported; the source place is marked implicitly",
                        Some(line_of(m)),
                    ));
                }
                builder
                    .places
                    .push(required_attr(child, "id", line)?.to_owned());
            }
            "transition" => {
                let id = required_attr(child, "id", line)?.to_owned();
                let label = child
                    .children()
                    .find(|n| n.has_tag_name("name"))
                    .and_then(|name| name.children().find(|n| n.has_tag_name("text")))
                    .and_then(|text| text.text())
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_owned);
                builder.transitions.push((id, label));
            }
            "arc" => {
                let source = required_attr(child, "source", line)?.to_owned();
                let target = required_attr(child, "target", line)?.to_owned();
                if let Some(weight) = child
                    .children()
                    .find(|n| n.has_tag_name("inscription"))
                    .and_then(|i| i.children().find(|n| n.has_tag_name("text")))
                    .and_then(|t| t.text())
                {
                    if weight.trim() != "1" {
                        return Err(NetError::malformed(
                            format!("weighted arc `{source}` -> `{target}` is not supported"),
                            Some(line),
                        ));
                    }
                }
                builder.arcs.push((source, target));
            }
            "referencePlace" | "referenceTransition" => {
                return Err(NetError::malformed(
                    format!("`{}` is not supported", child.tag_name().name()),
                    Some(line),
                ))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Extended free-choice: transitions with intersecting presets have equal presets.
pub fn check_free_choice(net: &WorkflowNet) -> bool {
    free_choice_violation(net).is_none()
}

/// A shared place and two of its consumers with different presets, if any.
pub fn free_choice_violation(net: &WorkflowNet) -> Option<(&str, &str, &str)> {
    net.consumers.iter().enumerate().find_map(|(p, ts)| {
        ts.windows(2)
            .find(|pair| net.preset[pair[0]] != net.preset[pair[1]])
            .map(|pair| {
                (
                    net.places[p].id.as_str(),
                    net.transitions[pair[0]].id.as_str(),
                    net.transitions[pair[1]].id.as_str(),
                )
            })
    })
}

/// Reachable markings and the labeled firing edges between them. State 0 is the initial marking.
#[derive(Debug, Clone)]
pub struct ReachabilityGraph {
    markings: Vec<Marking>,
    edges: Vec<Vec<(usize, usize)>>,
}

impl ReachabilityGraph {
    pub fn len(&self) -> usize {
        self.markings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markings.is_empty()
    }

    pub fn marking(&self, state: usize) -> &Marking {
        &self.markings[state]
    }

    pub fn markings(&self) -> &[Marking] {
        &self.markings
    }

    /// Outgoing `(transition, target state)` pairs of `state`.
    pub fn successors(&self, state: usize) -> &[(usize, usize)] {
        &self.edges[state]
    }

    pub fn state_of(&self, marking: &Marking) -> Option<usize> {
        self.markings.iter().position(|m| m == marking)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnsoundReason {
    /// Firing `transition` from a reachable marking puts a second token on `place`.
    Unsafe {
        marking: Marking,
        transition: String,
        place: String,
    },
    /// The sink is marked together with some other place.
    ImproperCompletion {
        marking: Marking,
    },
    /// The final marking is unreachable from this reachable marking.
    CannotComplete {
        marking: Marking,
        deadlock: bool,
    },
    DeadTransition {
        transition: String,
    },
}

impl UnsoundReason {
    pub fn witness(&self) -> Option<&Marking> {
        match self {
            UnsoundReason::Unsafe { marking, .. }
            | UnsoundReason::ImproperCompletion { marking }
            | UnsoundReason::CannotComplete { marking, .. } => Some(marking),
            UnsoundReason::DeadTransition { .. } => None,
        }
    }

    pub fn describe(&self, net: &WorkflowNet) -> String {
        let show = |m: &Marking| {
            let parts: Vec<String> = m
                .describe(net)
                .into_iter()
                .map(|(p, n)| if n == 1 { p } else { format!("{p}:{n}") })
                .collect();
            format!("[{}]", parts.join(", "))
        };
        match self {
            UnsoundReason::Unsafe {
                marking,
                transition,
                place,
            } => format!(
                "firing `{transition}` at {} puts a second token on `{place}`",
                show(marking)
            ),
            UnsoundReason::ImproperCompletion { marking } => {
                format!("sink marked with leftover tokens at {}", show(marking))
            }
            UnsoundReason::CannotComplete { marking, deadlock } => format!(
                "{} at {}: the final marking is unreachable",
                if *deadlock { "deadlock" } else { "livelock" },
                show(marking)
            ),
            UnsoundReason::DeadTransition { transition } => {
                format!("transition `{transition}` can never fire")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Soundness {
    Sound,
    Unsound(UnsoundReason),
}

#[derive(Debug, Clone)]
pub struct SoundnessVerdict {
    pub soundness: Soundness,
    pub graph: ReachabilityGraph,
}

impl SoundnessVerdict {
    pub fn is_sound(&self) -> bool {
        self.soundness == Soundness::Sound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("state space exceeds the limit of {limit} markings")]
pub struct StateSpaceExceeded {
    pub limit: usize,
}

/// Explores the safe reachability graph and decides soundness.
///
/// Markings that would carry two tokens on a place are not added to the
/// graph; any such firing makes the net unsound. The reported witness is
/// chosen canonically (smallest marking by sorted place ids), so the
/// verdict does not depend on node declaration order.
pub fn check_soundness(
    net: &WorkflowNet,
    state_limit: usize,
) -> Result<SoundnessVerdict, StateSpaceExceeded> {
    let mut index: HashMap<Marking, usize> = HashMap::new();
    let mut markings = vec![net.initial_marking()];
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    index.insert(markings[0].clone(), 0);
    let mut unsafe_firings: Vec<(usize, usize, usize)> = Vec::new();

    let mut queue = VecDeque::from([0usize]);
    while let Some(state) = queue.pop_front() {
        for t in 0..net.transitions.len() {
            if !net.is_enabled(&markings[state], t) {
                continue;
            }
            let next = net.fire(&markings[state], t);
            if let Some(p) = next.tokens.iter().position(|&n| n > 1) {
                unsafe_firings.push((state, t, p));
                continue;
            }
            let target = match index.get(&next) {
                Some(&s) => s,
                None => {
                    if markings.len() >= state_limit {
                        return Err(StateSpaceExceeded { limit: state_limit });
                    }
                    let s = markings.len();
                    index.insert(next.clone(), s);
                    markings.push(next);
                    edges.push(Vec::new());
                    queue.push_back(s);
                    s
                }
            };
            edges[state].push((t, target));
        }
    }
    let graph = ReachabilityGraph { markings, edges };
    let soundness = match judge(net, &graph, &unsafe_firings) {
        Some(reason) => Soundness::Unsound(reason),
        None => Soundness::Sound,
    };
    Ok(SoundnessVerdict { soundness, graph })
}

fn judge(
    net: &WorkflowNet,
    graph: &ReachabilityGraph,
    unsafe_firings: &[(usize, usize, usize)],
) -> Option<UnsoundReason> {
    if let Some(&(state, t, p)) = unsafe_firings.iter().min_by(|a, b| {
        let key = |&(s, t, p): &(usize, usize, usize)| {
            (
                graph.markings[s].key(net),
                net.transitions[t].id.as_str(),
                net.places[p].id.as_str(),
            )
        };
        key(a).cmp(&key(b))
    }) {
        return Some(UnsoundReason::Unsafe {
            marking: graph.markings[state].clone(),
            transition: net.transitions[t].id.clone(),
            place: net.places[p].id.clone(),
        });
    }

    let final_marking = net.final_marking();
    if let Some(m) = graph
        .markings
        .iter()
        .filter(|m| m.tokens[net.sink] > 0 && **m != final_marking)
        .min_by(|a, b| a.key(net).cmp(&b.key(net)))
    {
        return Some(UnsoundReason::ImproperCompletion { marking: m.clone() });
    }

    let mut reverse = vec![Vec::new(); graph.len()];
    for (s, out) in graph.edges.iter().enumerate() {
        for &(_, target) in out {
            reverse[target].push(s);
        }
    }
    let mut completes = vec![false; graph.len()];
    if let Some(f) = graph.state_of(&final_marking) {
        completes[f] = true;
        let mut stack = vec![f];
        while let Some(s) = stack.pop() {
            for &pred in &reverse[s] {
                if !completes[pred] {
                    completes[pred] = true;
                    stack.push(pred);
                }
            }
        }
    }
    if let Some(s) = (0..graph.len())
        .filter(|&s| !completes[s])
        .min_by(|&a, &b| {
            let key = |s: usize| (!graph.edges[s].is_empty(), graph.markings[s].key(net));
            key(a).cmp(&key(b))
        })
    {
        return Some(UnsoundReason::CannotComplete {
            marking: graph.markings[s].clone(),
            deadlock: graph.edges[s].is_empty(),
        });
    }

    let mut fired = vec![false; net.transitions.len()];
    for out in &graph.edges {
        for &(t, _) in out {
            fired[t] = true;
        }
    }
    net.transitions
        .iter()
        .zip(&fired)
        .filter(|(_, &f)| !f)
        .map(|(t, _)| t.id.as_str())
        .min()
        .map(|t| UnsoundReason::DeadTransition {
            transition: t.to_owned(),
        })
}
