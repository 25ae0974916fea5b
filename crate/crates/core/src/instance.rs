//! Network instances: representation, file format, validation, and the
//! minimum queuing-capacity cut.

use crate::maxflow::FlowNetwork;
use crate::rat::{serde_rat, Rat};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::ops::Deref;

/// One fluid queue followed by a constant-delay link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arc {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    pub capacity: Rat,
    pub delay: Rat,
    /// Queue volume seen by the first particles (source time 0) reaching the arc.
    pub initial_queue: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub nodes: Vec<String>,
    pub arcs: Vec<Arc>,
    pub source: usize,
    pub sink: usize,
    pub inflow: Rat,
    /// Free-form provenance and calibration records (gadget generators).
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl Violation {
    fn new(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown node {node:?} referenced by {by}")]
    UnknownNode { node: String, by: String },
    #[error("duplicate arc id {0:?}")]
    DuplicateArc(String),
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("invalid instance: {}", join(.0))]
    Invalid(Vec<Violation>),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Serialize, Deserialize)]
struct ArcFile {
    id: String,
    tail: String,
    head: String,
    #[serde(with = "serde_rat")]
    capacity: Rat,
    #[serde(with = "serde_rat")]
    delay: Rat,
    #[serde(with = "serde_rat", default = "Rat::zero")]
    initial_queue: Rat,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    nodes: Vec<String>,
    source: Option<String>,
    sink: Option<String>,
    #[serde(with = "serde_rat")]
    inflow: Rat,
    arcs: Vec<ArcFile>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
}

impl Instance {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == id)
    }

    pub fn arc_index(&self, id: &str) -> Option<usize> {
        self.arcs.iter().position(|a| a.id == id)
    }

    pub fn arc(&self, id: &str) -> &Arc {
        &self.arcs[self.arc_index(id).unwrap_or_else(|| panic!("no arc {id:?}"))]
    }

    pub fn node(&self, id: &str) -> usize {
        self.node_index(id)
            .unwrap_or_else(|| panic!("no node {id:?}"))
    }

    /// Numeric field checks shared by parsing and validation.
    fn field_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.inflow.is_positive() {
            out.push(Violation::new("inflow", "inflow must be positive"));
        }
        if self.source == self.sink {
            out.push(Violation::new("source", "source and sink must differ"));
        }
        for a in &self.arcs {
            if !a.capacity.is_positive() {
                out.push(Violation::new(&a.id, "capacity must be positive"));
            }
            if a.delay.is_negative() {
                out.push(Violation::new(&a.id, "delay must be nonnegative"));
            }
            if a.initial_queue.is_negative() {
                out.push(Violation::new(&a.id, "initial queue must be nonnegative"));
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.to_file()).expect("instance serializes")
    }

    fn to_file(&self) -> InstanceFile {
        InstanceFile {
            nodes: self.nodes.clone(),
            source: Some(self.nodes[self.source].clone()),
            sink: Some(self.nodes[self.sink].clone()),
            inflow: self.inflow.clone(),
            arcs: self
                .arcs
                .iter()
                .map(|a| ArcFile {
                    id: a.id.clone(),
                    tail: self.nodes[a.tail].clone(),
                    head: self.nodes[a.head].clone(),
                    capacity: a.capacity.clone(),
                    delay: a.delay.clone(),
                    initial_queue: a.initial_queue.clone(),
                })
                .collect(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn from_json(value: serde_json::Value) -> Result<Instance, ModelError> {
        let file: InstanceFile = serde_json::from_value(value)?;
        Self::from_file(file)
    }

    fn from_file(file: InstanceFile) -> Result<Instance, ModelError> {
        let mut index = HashMap::new();
        for (i, n) in file.nodes.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(ModelError::DuplicateNode(n.clone()));
            }
        }
        let lookup = |node: &str, by: &str| {
            index.get(node).copied().ok_or_else(|| ModelError::UnknownNode {
                node: node.to_string(),
                by: by.to_string(),
            })
        };
        let source = lookup(&file.source.ok_or(ModelError::Missing("source"))?, "source")?;
        let sink = lookup(&file.sink.ok_or(ModelError::Missing("sink"))?, "sink")?;
        let mut seen = HashMap::new();
        let mut arcs = Vec::with_capacity(file.arcs.len());
        for a in file.arcs {
            if seen.insert(a.id.clone(), ()).is_some() {
                return Err(ModelError::DuplicateArc(a.id));
            }
            arcs.push(Arc {
                tail: lookup(&a.tail, &a.id)?,
                head: lookup(&a.head, &a.id)?,
                id: a.id,
                capacity: a.capacity,
                delay: a.delay,
                initial_queue: a.initial_queue,
            });
        }
        let inst = Instance {
            nodes: file.nodes,
            arcs,
            source,
            sink,
            inflow: file.inflow,
            metadata: file.metadata,
        };
        let v = inst.field_violations();
        if v.is_empty() {
            Ok(inst)
        } else {
            Err(ModelError::Invalid(v))
        }
    }

    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = emit_instance(self);
        let hash = Sha256::digest(text.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Builder used by generators and tests.
    pub fn builder(source: &str, sink: &str, inflow: Rat) -> InstanceBuilder {
        InstanceBuilder::new(source, sink, inflow)
    }
}

pub struct InstanceBuilder {
    nodes: Vec<String>,
    arcs: Vec<(String, String, String, Rat, Rat, Rat)>,
    source: String,
    sink: String,
    inflow: Rat,
    metadata: BTreeMap<String, String>,
}

impl InstanceBuilder {
    fn new(source: &str, sink: &str, inflow: Rat) -> Self {
        let mut b = Self {
            nodes: Vec::new(),
            arcs: Vec::new(),
            source: source.to_string(),
            sink: sink.to_string(),
            inflow,
            metadata: BTreeMap::new(),
        };
        b.touch(source);
        b.touch(sink);
        b
    }

    fn touch(&mut self, n: &str) {
        if !self.nodes.iter().any(|x| x == n) {
            self.nodes.push(n.to_string());
        }
    }

    pub fn node(mut self, n: &str) -> Self {
        self.touch(n);
        self
    }

    pub fn arc(self, id: &str, tail: &str, head: &str, capacity: Rat, delay: Rat) -> Self {
        self.arc_with_queue(id, tail, head, capacity, delay, Rat::zero())
    }

    pub fn arc_with_queue(
        mut self,
        id: &str,
        tail: &str,
        head: &str,
        capacity: Rat,
        delay: Rat,
        queue: Rat,
    ) -> Self {
        self.touch(tail);
        self.touch(head);
        self.arcs.push((
            id.to_string(),
            tail.to_string(),
            head.to_string(),
            capacity,
            delay,
            queue,
        ));
        self
    }

    pub fn meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn build(self) -> Result<Instance, ModelError> {
        Instance::from_file(InstanceFile {
            nodes: self.nodes,
            source: Some(self.source),
            sink: Some(self.sink),
            inflow: self.inflow,
            arcs: self
                .arcs
                .into_iter()
                .map(|(id, tail, head, capacity, delay, initial_queue)| ArcFile {
                    id,
                    tail,
                    head,
                    capacity,
                    delay,
                    initial_queue,
                })
                .collect(),
            metadata: self.metadata,
        })
    }
}

pub fn parse_instance(text: &str) -> Result<Instance, ModelError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    Instance::from_file(file)
}

pub fn emit_instance(inst: &Instance) -> String {
    serde_json::to_string_pretty(&inst.to_file()).expect("instance serializes")
}

/// An instance whose invariants have been checked. Arcs and nodes that lie on
/// no s→t path have been removed and are listed in `warnings`.
#[derive(Debug, Clone)]
pub struct ValidatedInstance {
    inst: Instance,
    pub warnings: Vec<String>,
}

impl ValidatedInstance {
    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    pub fn into_instance(self) -> Instance {
        self.inst
    }
}

impl Deref for ValidatedInstance {
    type Target = Instance;
    fn deref(&self) -> &Instance {
        &self.inst
    }
}

fn reach(n: usize, start: usize, edges: impl Fn(usize) -> Vec<usize>) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut q = VecDeque::from([start]);
    while let Some(u) = q.pop_front() {
        for v in edges(u) {
            if !seen[v] {
                seen[v] = true;
                q.push_back(v);
            }
        }
    }
    seen
}

/// Returns the nodes of some cycle made only of zero-delay arcs, if any.
fn zero_delay_cycle(inst: &Instance) -> Option<Vec<usize>> {
    let n = inst.nodes.len();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in &inst.arcs {
        if a.delay.is_zero() {
            out[a.tail].push(a.head);
        }
    }
    // iterative DFS with colors
    let mut color = vec![0u8; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        color[root] = 1;
        while let Some(&mut (u, ref mut i)) = stack.last_mut() {
            if *i < out[u].len() {
                let v = out[u][*i];
                *i += 1;
                match color[v] {
                    0 => {
                        color[v] = 1;
                        parent[v] = u;
                        stack.push((v, 0));
                    }
                    1 => {
                        let mut cyc = vec![v];
                        let mut w = u;
                        while w != v {
                            cyc.push(w);
                            w = parent[w];
                        }
                        cyc.reverse();
                        return Some(cyc);
                    }
                    _ => {}
                }
            } else {
                color[u] = 2;
                stack.pop();
            }
        }
    }
    None
}

pub fn validate(inst: &Instance) -> Result<ValidatedInstance, Vec<Violation>> {
    let mut violations = inst.field_violations();
    if let Some(cyc) = zero_delay_cycle(inst) {
        let names: Vec<_> = cyc.iter().map(|&v| inst.nodes[v].as_str()).collect();
        violations.push(Violation::new(
            names.join("->"),
            "zero-delay cycle",
        ));
    }
    let n = inst.nodes.len();
    let fwd = reach(n, inst.source, |u| {
        inst.arcs.iter().filter(|a| a.tail == u).map(|a| a.head).collect()
    });
    let bwd = reach(n, inst.sink, |u| {
        inst.arcs.iter().filter(|a| a.head == u).map(|a| a.tail).collect()
    });
    if !fwd[inst.sink] {
        violations.push(Violation::new(&inst.nodes[inst.sink], "sink unreachable from source"));
    }
    if !violations.is_empty() {
        return Err(violations);
    }

    let mut warnings = Vec::new();
    let keep_node: Vec<bool> = (0..n).map(|v| fwd[v] && bwd[v]).collect();
    for v in 0..n {
        if !fwd[v] {
            warnings.push(format!("node {} unreachable from source; removed", inst.nodes[v]));
        } else if !bwd[v] {
            warnings.push(format!("node {} cannot reach sink; removed", inst.nodes[v]));
        }
    }
    let mut remap = vec![usize::MAX; n];
    let mut nodes = Vec::new();
    for v in 0..n {
        if keep_node[v] {
            remap[v] = nodes.len();
            nodes.push(inst.nodes[v].clone());
        }
    }
    let mut arcs = Vec::new();
    for a in &inst.arcs {
        if keep_node[a.tail] && keep_node[a.head] {
            arcs.push(Arc {
                tail: remap[a.tail],
                head: remap[a.head],
                ..a.clone()
            });
        } else {
            warnings.push(format!("arc {} lies on no s-t path; removed", a.id));
        }
    }
    Ok(ValidatedInstance {
        inst: Instance {
            nodes,
            arcs,
            source: remap[inst.source],
            sink: remap[inst.sink],
            inflow: inst.inflow.clone(),
            metadata: inst.metadata.clone(),
        },
        warnings,
    })
}

/// The s–t cut of minimum total capacity, with setwise-minimal source side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutReport {
    pub capacity: Rat,
    pub cut_arcs: Vec<usize>,
    pub source_side: Vec<usize>,
}

pub fn min_queuing_cut(inst: &Instance) -> CutReport {
    let mut net = FlowNetwork::new(inst.nodes.len());
    for a in &inst.arcs {
        net.add_edge(a.tail, a.head, a.capacity.clone());
    }
    let capacity = net.max_flow(inst.source, inst.sink, None);
    let side = net.residual_reachable(inst.source);
    let cut_arcs = (0..inst.arcs.len())
        .filter(|&i| side[inst.arcs[i].tail] && !side[inst.arcs[i].head])
        .collect();
    let source_side = (0..inst.nodes.len()).filter(|&v| side[v]).collect();
    CutReport {
        capacity,
        cut_arcs,
        source_side,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{frac, int};

    const SINGLE: &str = r#"{"nodes":["s","t"],"source":"s","sink":"t","inflow":1,
        "arcs":[{"id":"e","tail":"s","head":"t","capacity":"1","delay":"0"}]}"#;

    #[test]
    fn parses_single_arc() {
        let inst = parse_instance(SINGLE).unwrap();
        assert_eq!(inst.arcs.len(), 1);
        assert_eq!(inst.arcs[0].initial_queue, Rat::zero());
        assert!(validate(&inst).is_ok());
    }

    #[test]
    fn rejects_zero_capacity() {
        let text = SINGLE.replace(r#""capacity":"1""#, r#""capacity":"0""#);
        let err = parse_instance(&text).unwrap_err();
        assert!(err.to_string().contains("capacity must be positive"), "{err}");
    }

    #[test]
    fn parse_errors() {
        let bad_rat = SINGLE.replace(r#""delay":"0""#, r#""delay":"x/2""#);
        assert!(parse_instance(&bad_rat).unwrap_err().to_string().contains("malformed rational"));
        let unknown = SINGLE.replace(r#""head":"t""#, r#""head":"q""#);
        assert!(matches!(parse_instance(&unknown), Err(ModelError::UnknownNode { .. })));
        let missing = SINGLE.replace(r#""source":"s","#, "");
        assert!(matches!(parse_instance(&missing), Err(ModelError::Missing("source"))));
        let dup = r#"{"nodes":["s","t"],"source":"s","sink":"t","inflow":1,
            "arcs":[{"id":"e","tail":"s","head":"t","capacity":1,"delay":0},
                    {"id":"e","tail":"s","head":"t","capacity":1,"delay":0}]}"#;
        assert!(matches!(parse_instance(dup), Err(ModelError::DuplicateArc(_))));
    }

    #[test]
    fn zero_delay_self_loop_rejected() {
        let inst = Instance::builder("s", "t", int(1))
            .arc("e", "s", "t", int(1), int(1))
            .arc("l", "t", "t", int(1), int(0))
            .build()
            .unwrap();
        let v = validate(&inst).unwrap_err();
        assert!(v.iter().any(|x| x.message == "zero-delay cycle"));
    }

    #[test]
    fn unreachable_node_is_flagged_and_pruned() {
        let inst = Instance::builder("s", "t", int(1))
            .arc("e", "s", "t", int(1), int(1))
            .arc("x", "u", "t", int(1), int(1))
            .build()
            .unwrap();
        let v = validate(&inst).unwrap();
        assert!(v.warnings.iter().any(|w| w.contains("node u")));
        assert_eq!(v.arcs.len(), 1);
        assert_eq!(v.nodes, vec!["s", "t"]);
    }

    #[test]
    fn single_arc_cut() {
        let inst = Instance::builder("s", "t", int(1))
            .arc("e", "s", "t", int(5), int(0))
            .build()
            .unwrap();
        let cut = min_queuing_cut(&inst);
        assert_eq!(cut.capacity, int(5));
        assert_eq!(cut.cut_arcs, vec![0]);
        assert_eq!(cut.source_side, vec![0]);
    }

    #[test]
    fn setwise_minimal_side_on_ties() {
        // s -> a -> t with equal capacities: both {s} and {s,a} are min cuts.
        let inst = Instance::builder("s", "t", int(1))
            .arc("x", "s", "a", frac(1, 2), int(0))
            .arc("y", "a", "t", frac(1, 2), int(0))
            .build()
            .unwrap();
        let cut = min_queuing_cut(&inst);
        assert_eq!(cut.source_side, vec![inst.node("s")]);
        assert_eq!(cut.cut_arcs, vec![0]);
    }

    #[test]
    fn roundtrip_preserves_metadata() {
        let inst = Instance::builder("s", "t", frac(13, 12))
            .arc_with_queue("e", "s", "t", frac(1, 3), int(2), frac(2, 3))
            .meta("origin", "test")
            .build()
            .unwrap();
        assert_eq!(parse_instance(&emit_instance(&inst)).unwrap(), inst);
    }
}
