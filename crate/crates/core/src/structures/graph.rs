//! Config-driven wiring of primitives, pyramids, columns and associative
//! layers into a directed acyclic graph with a single sink.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::combiners::{concat, split, ConcatLayout};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::primitive::{ArchetypeId, Codebook, Primitive, PrimitiveSpec};
use crate::sample::{check_grid, Sample, Shape, DEFAULT_GRID};
use crate::set::FiniteSet;

use super::associative::{train_associative_layer, AssociativeLayer};
use super::column::{train_column, DiscriminatoryColumn};
use super::pyramid::{train_pyramid, DiscriminatoryPyramid, PyramidParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    #[serde(default = "default_grid")]
    pub grid: f64,
    #[serde(default)]
    pub seed: u64,
    pub nodes: Vec<NodeConfig>,
    pub edges: Vec<EdgeConfig>,
    pub sources: Vec<String>,
    pub sink: String,
}

fn default_grid() -> f64 {
    DEFAULT_GRID
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub name: String,
    pub kind: NodeKind,
    pub params: NodeParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Primitive,
    Pyramid,
    Column,
    AssociativeLayer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Exemplar,
    Trivial,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitive: Option<PrimitiveKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_jitter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<ConcatLayout>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub slot: usize,
}

impl GraphConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Where a node slot gets its value from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Source(usize),
    Node(usize),
}

/// A validated [`GraphConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphConfig", into = "GraphConfig")]
pub struct ArchitectureGraph {
    config: GraphConfig,
    /// `inputs[node][slot]`
    inputs: Vec<Vec<Endpoint>>,
    order: Vec<usize>,
    sink: usize,
}

impl TryFrom<GraphConfig> for ArchitectureGraph {
    type Error = Error;
    fn try_from(c: GraphConfig) -> Result<Self> {
        ArchitectureGraph::new(c)
    }
}

impl From<ArchitectureGraph> for GraphConfig {
    fn from(g: ArchitectureGraph) -> Self {
        g.config
    }
}

fn graph_err(msg: impl Into<String>) -> Error {
    Error::Graph(msg.into())
}

impl NodeConfig {
    fn primitive_spec(&self) -> Result<PrimitiveSpec> {
        match self.params.primitive.unwrap_or(PrimitiveKind::Exemplar) {
            PrimitiveKind::Trivial => Ok(PrimitiveSpec::Trivial),
            PrimitiveKind::Exemplar => {
                let r = self
                    .params
                    .merge_radius
                    .ok_or_else(|| graph_err(format!("node {}: merge_radius is required", self.name)))?;
                if !(r.is_finite() && r > 0.0) {
                    return Err(graph_err(format!("node {}: merge_radius must be > 0", self.name)));
                }
                Ok(PrimitiveSpec::Exemplar { merge_radius: r })
            }
        }
    }

    fn levels(&self) -> Result<usize> {
        let l = self
            .params
            .levels
            .ok_or_else(|| graph_err(format!("node {}: levels is required", self.name)))?;
        super::check_levels(l).map_err(|e| graph_err(format!("node {}: {e}", self.name)))?;
        Ok(l)
    }

    fn arity(&self) -> usize {
        match (self.kind, &self.params.layout) {
            (NodeKind::AssociativeLayer, Some(l)) => l.arity(),
            _ => 1,
        }
    }

    /// Shape expected on `slot`.
    fn slot_shape(&self, slot: usize) -> Result<Shape> {
        match self.kind {
            NodeKind::AssociativeLayer => Ok(self.layout()?.part_shapes()[slot].clone()),
            _ => self.own_shape(),
        }
    }

    fn output_shape(&self) -> Result<Shape> {
        match self.kind {
            NodeKind::AssociativeLayer => Ok(self.layout()?.concat_shape()),
            _ => self.own_shape(),
        }
    }

    fn own_shape(&self) -> Result<Shape> {
        self.params
            .shape
            .clone()
            .ok_or_else(|| graph_err(format!("node {}: shape is required", self.name)))
    }

    fn layout(&self) -> Result<&ConcatLayout> {
        self.params
            .layout
            .as_ref()
            .ok_or_else(|| graph_err(format!("node {}: layout is required", self.name)))
    }

    fn check_params(&self) -> Result<()> {
        self.primitive_spec()?;
        match self.kind {
            NodeKind::Primitive => {
                self.own_shape()?;
            }
            NodeKind::Column => {
                self.own_shape()?;
                self.levels()?;
            }
            NodeKind::Pyramid => {
                self.own_shape()?;
                self.levels()?;
                if let Some(j) = self.params.radius_jitter {
                    if !(0.0..1.0).contains(&j) {
                        return Err(graph_err(format!("node {}: radius_jitter must be in [0, 1)", self.name)));
                    }
                }
            }
            NodeKind::AssociativeLayer => {
                self.layout()?;
            }
        }
        Ok(())
    }
}

impl ArchitectureGraph {
    pub fn new(config: GraphConfig) -> Result<Self> {
        check_grid(config.grid)?;
        if config.nodes.is_empty() {
            return Err(graph_err("graph has no nodes"));
        }
        let mut names = BTreeSet::new();
        for n in config.sources.iter().chain(config.nodes.iter().map(|n| &n.name)) {
            if n.is_empty() || !names.insert(n.as_str()) {
                return Err(graph_err(format!("duplicate or empty name {n:?}")));
            }
        }
        for node in &config.nodes {
            node.check_params()?;
        }
        let node_index = |name: &str| config.nodes.iter().position(|n| n.name == name);
        let source_index = |name: &str| config.sources.iter().position(|n| n == name);

        let mut slots: Vec<Vec<Option<Endpoint>>> = config.nodes.iter().map(|n| vec![None; n.arity()]).collect();
        for e in &config.edges {
            let to = node_index(&e.to).ok_or_else(|| graph_err(format!("edge to unknown node {:?}", e.to)))?;
            let from = match (source_index(&e.from), node_index(&e.from)) {
                (Some(s), _) => Endpoint::Source(s),
                (None, Some(n)) => Endpoint::Node(n),
                _ => return Err(graph_err(format!("edge from unknown endpoint {:?}", e.from))),
            };
            let arity = slots[to].len();
            let slot = slots[to]
                .get_mut(e.slot)
                .ok_or_else(|| graph_err(format!("node {}: slot {} out of range (arity {arity})", e.to, e.slot)))?;
            if slot.is_some() {
                return Err(graph_err(format!("node {}: slot {} wired twice", e.to, e.slot)));
            }
            *slot = Some(from);
        }
        let mut inputs = Vec::with_capacity(slots.len());
        for (node, s) in config.nodes.iter().zip(slots) {
            let wired = s
                .into_iter()
                .enumerate()
                .map(|(i, e)| e.ok_or_else(|| graph_err(format!("node {}: slot {i} is not wired", node.name))))
                .collect::<Result<Vec<_>>>()?;
            inputs.push(wired);
        }

        for (k, node) in config.nodes.iter().enumerate() {
            for (slot, ep) in inputs[k].iter().enumerate() {
                if let Endpoint::Node(u) = *ep {
                    let have = config.nodes[u].output_shape()?;
                    let want = node.slot_shape(slot)?;
                    if have != want {
                        return Err(graph_err(format!(
                            "edge {} -> {}[{slot}]: shape {have} does not fit {want}",
                            config.nodes[u].name, node.name
                        )));
                    }
                }
            }
        }

        let order = topological_order(&inputs).ok_or_else(|| graph_err("graph has a cycle"))?;
        let sink = node_index(&config.sink).ok_or_else(|| graph_err(format!("sink {:?} is not a node", config.sink)))?;
        Ok(ArchitectureGraph {
            config,
            inputs,
            order,
            sink,
        })
    }

    pub fn config(&self) -> &GraphConfig {
        &self.config
    }

    /// Node indices in evaluation order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn node_inputs(&self, node: usize) -> &[Endpoint] {
        &self.inputs[node]
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.config.nodes.iter().position(|n| n.name == name)
    }

    /// Sources feeding `node`, directly or not.
    pub fn sources_under(&self, node: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            for ep in &self.inputs[n] {
                match *ep {
                    Endpoint::Source(s) => {
                        out.insert(s);
                    }
                    Endpoint::Node(u) => stack.push(u),
                }
            }
        }
        out
    }
}

// Kahn's algorithm, always releasing the lowest ready index first.
fn topological_order(inputs: &[Vec<Endpoint>]) -> Option<Vec<usize>> {
    let n = inputs.len();
    let mut indegree = vec![0usize; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, eps) in inputs.iter().enumerate() {
        for ep in eps {
            if let Endpoint::Node(u) = *ep {
                indegree[k] += 1;
                children[u].push(k);
            }
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&k| indegree[k] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(k) = ready.pop_first() {
        order.push(k);
        for &c in &children[k] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// A trained node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum NodeModel {
    Primitive(Codebook),
    Pyramid(DiscriminatoryPyramid),
    Column(DiscriminatoryColumn),
    AssociativeLayer(AssociativeLayer),
}

impl NodeModel {
    pub fn as_primitive(&self) -> &dyn Primitive {
        match self {
            NodeModel::Primitive(p) => p,
            NodeModel::Pyramid(p) => p,
            NodeModel::Column(c) => c,
            NodeModel::AssociativeLayer(a) => a,
        }
    }

    /// Node-level input for one set of slot values.
    pub fn assemble(&self, parts: &[Sample]) -> Result<Sample> {
        match self {
            NodeModel::AssociativeLayer(al) => concat(parts, al.layout()),
            _ => match parts {
                [one] => Ok(one.clone()),
                _ => Err(Error::ArityMismatch {
                    expected: 1,
                    found: parts.len(),
                }),
            },
        }
    }

    /// Inverse of [`NodeModel::assemble`].
    pub fn disassemble(&self, input: Sample) -> Result<Vec<Sample>> {
        match self {
            NodeModel::AssociativeLayer(al) => split(&input, al.layout()),
            _ => Ok(vec![input]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeStats {
    pub input_diversity: usize,
    pub output_diversity: usize,
    /// Per-level output diversity, bottom first (columns and pyramids).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub level_diversity: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedNode {
    pub name: String,
    pub stats: NodeStats,
    #[serde(flatten)]
    pub model: NodeModel,
}

/// Identifies the data a graph was trained on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStamp {
    pub rows: usize,
    pub fingerprint: String,
    /// Distinct source tuples.
    pub input_diversity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedGraph {
    pub architecture: ArchitectureGraph,
    pub source_shapes: Vec<Shape>,
    pub dataset: DatasetStamp,
    pub nodes: Vec<TrainedNode>,
}

/// Per-row node inputs and outputs over a dataset.
pub struct Replay {
    /// `inputs[node][row]`, assembled node-level inputs
    pub inputs: Vec<Vec<Sample>>,
    /// `parts[node][row][slot]`
    pub parts: Vec<Vec<Vec<Sample>>>,
    /// `outputs[node][row]`
    pub outputs: Vec<Vec<(ArchetypeId, Sample)>>,
}

fn source_rows(g: &ArchitectureGraph, data: &Dataset) -> Result<(Vec<Shape>, Vec<Vec<Sample>>)> {
    let mut shapes = Vec::new();
    let mut cols = Vec::new();
    for name in &g.config.sources {
        shapes.push(data.slot_shape(name)?);
        cols.push(data.slot_values(name)?);
    }
    Ok((shapes, cols))
}

fn gather(
    g: &ArchitectureGraph,
    node: usize,
    sources: &[Vec<Sample>],
    outputs: &[Vec<(ArchetypeId, Sample)>],
    rows: usize,
) -> Vec<Vec<Sample>> {
    (0..rows)
        .map(|r| {
            g.inputs[node]
                .iter()
                .map(|ep| match *ep {
                    Endpoint::Source(s) => sources[s][r].clone(),
                    Endpoint::Node(u) => outputs[u][r].1.clone(),
                })
                .collect()
        })
        .collect()
}

fn check_source_shapes(g: &ArchitectureGraph, shapes: &[Shape]) -> Result<()> {
    for (k, node) in g.config.nodes.iter().enumerate() {
        for (slot, ep) in g.inputs[k].iter().enumerate() {
            if let Endpoint::Source(s) = *ep {
                let want = node.slot_shape(slot)?;
                if shapes[s] != want {
                    return Err(graph_err(format!(
                        "source {} -> {}[{slot}]: shape {} does not fit {want}",
                        g.config.sources[s], node.name, shapes[s]
                    )));
                }
            }
        }
    }
    Ok(())
}

fn node_seed(base: u64, node: usize) -> u64 {
    base.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(node as u64)
}

/// Trains every node in topological order. Each node's training set is the
/// set of distinct values it receives over the dataset rows.
pub fn graph_train(g: &ArchitectureGraph, data: &Dataset) -> Result<TrainedGraph> {
    if data.rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let (shapes, sources) = source_rows(g, data)?;
    check_source_shapes(g, &shapes)?;
    let rows = data.rows();
    let grid = g.config.grid;

    let n = g.config.nodes.len();
    let mut outputs: Vec<Vec<(ArchetypeId, Sample)>> = vec![Vec::new(); n];
    let mut trained: Vec<Option<TrainedNode>> = vec![None; n];
    for &k in &g.order {
        let cfg = &g.config.nodes[k];
        let named = |e: Error| graph_err(format!("node {}: {e}", cfg.name));
        let parts = gather(g, k, &sources, &outputs, rows);
        let spec = cfg.primitive_spec()?;
        let single = || {
            FiniteSet::from_samples(cfg.own_shape()?, grid, parts.iter().map(|p| p[0].clone()))
        };
        let model = match cfg.kind {
            NodeKind::Primitive => NodeModel::Primitive(spec.train(&single().map_err(named)?).map_err(named)?),
            NodeKind::Column => {
                NodeModel::Column(train_column(&single().map_err(named)?, cfg.levels()?, &spec).map_err(named)?)
            }
            NodeKind::Pyramid => {
                let params = PyramidParams {
                    primitive: spec,
                    radius_jitter: cfg.params.radius_jitter.unwrap_or(0.0),
                    seed: node_seed(g.config.seed, k),
                };
                NodeModel::Pyramid(train_pyramid(&single().map_err(named)?, cfg.levels()?, &params).map_err(named)?)
            }
            NodeKind::AssociativeLayer => NodeModel::AssociativeLayer(
                train_associative_layer(&parts, cfg.layout()?, &spec, grid).map_err(named)?,
            ),
        };
        let assembled = parts
            .iter()
            .map(|p| model.assemble(p))
            .collect::<Result<Vec<_>>>()
            .map_err(named)?;
        let p = model.as_primitive();
        let outs = crate::par::map(&assembled, |x| p.encode(x))
            .into_iter()
            .collect::<Result<Vec<_>>>()
            .map_err(named)?;
        let input_set = FiniteSet::from_samples(p.shape().clone(), grid, assembled)?;
        let output_set = FiniteSet::from_samples(p.shape().clone(), grid, outs.iter().map(|o| o.1.clone()))?;
        let level_diversity = match &model {
            NodeModel::Column(c) => c.level_output_sets(&input_set)?.iter().map(FiniteSet::len).collect(),
            NodeModel::Pyramid(py) => py.level_output_sets(&input_set)?.iter().map(FiniteSet::len).collect(),
            _ => Vec::new(),
        };
        trained[k] = Some(TrainedNode {
            name: cfg.name.clone(),
            stats: NodeStats {
                input_diversity: input_set.len(),
                output_diversity: output_set.len(),
                level_diversity,
            },
            model,
        });
        outputs[k] = outs;
    }

    let tuples = (0..rows)
        .map(|r| sources.iter().map(|c| c[r].clone()).collect::<Vec<_>>())
        .collect::<Vec<_>>();
    let input_diversity = source_tuple_set(&shapes, grid, &tuples)?.len();
    Ok(TrainedGraph {
        architecture: g.clone(),
        source_shapes: shapes,
        dataset: DatasetStamp {
            rows,
            fingerprint: data.fingerprint(),
            input_diversity,
        },
        nodes: trained.into_iter().map(|t| t.expect("every node trained")).collect(),
    })
}

fn source_layout(shapes: &[Shape]) -> Result<ConcatLayout> {
    ConcatLayout::new(shapes.to_vec())
}

fn source_tuple_set(shapes: &[Shape], grid: f64, tuples: &[Vec<Sample>]) -> Result<FiniteSet> {
    let layout = source_layout(shapes)?;
    super::associative::observed_tuples(tuples, &layout, grid)
}

impl TrainedGraph {
    pub fn config(&self) -> &GraphConfig {
        self.architecture.config()
    }

    pub fn sink(&self) -> &TrainedNode {
        &self.nodes[self.architecture.sink()]
    }

    pub fn node(&self, name: &str) -> Option<&TrainedNode> {
        self.architecture.node_index(name).map(|k| &self.nodes[k])
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: TrainedGraph = serde_json::from_str(text)?;
        if g.nodes.len() != g.config().nodes.len() || g.source_shapes.len() != g.config().sources.len() {
            return Err(graph_err("model does not match its architecture"));
        }
        for (node, cfg) in g.nodes.iter().zip(&g.config().nodes) {
            if node.name != cfg.name {
                return Err(graph_err(format!("model node {} does not match {}", node.name, cfg.name)));
            }
        }
        Ok(g)
    }

    fn node_output(&self, k: usize, cache: &mut BTreeMap<usize, (ArchetypeId, Sample)>, inputs: &[Sample]) -> Result<(ArchetypeId, Sample)> {
        if let Some(v) = cache.get(&k) {
            return Ok(v.clone());
        }
        let parts = self.architecture.inputs[k]
            .iter()
            .map(|ep| match *ep {
                Endpoint::Source(s) => Ok(inputs[s].clone()),
                Endpoint::Node(u) => self.node_output(u, cache, inputs).map(|o| o.1),
            })
            .collect::<Result<Vec<_>>>()?;
        let model = &self.nodes[k].model;
        let out = model.as_primitive().encode(&model.assemble(&parts)?)?;
        cache.insert(k, out.clone());
        Ok(out)
    }

    fn bind(&self, inputs: &BTreeMap<String, Sample>) -> Result<Vec<Sample>> {
        self.config()
            .sources
            .iter()
            .zip(&self.source_shapes)
            .map(|(name, shape)| {
                let s = inputs
                    .get(name)
                    .ok_or_else(|| graph_err(format!("source {name} is not bound")))?;
                s.ensure_shape(shape)?;
                Ok(s.clone())
            })
            .collect()
    }

    /// Sink archetype for one bound input tuple.
    pub fn encode(&self, inputs: &BTreeMap<String, Sample>) -> Result<(ArchetypeId, Sample)> {
        let bound = self.bind(inputs)?;
        self.node_output(self.architecture.sink(), &mut BTreeMap::new(), &bound)
    }

    /// Output of every node for one input tuple, by node index.
    pub fn encode_all(&self, inputs: &BTreeMap<String, Sample>) -> Result<Vec<(ArchetypeId, Sample)>> {
        let bound = self.bind(inputs)?;
        let mut cache = BTreeMap::new();
        (0..self.nodes.len()).map(|k| self.node_output(k, &mut cache, &bound)).collect()
    }

    /// Replays every dataset row through the trained graph.
    pub fn replay(&self, data: &Dataset) -> Result<Replay> {
        let (shapes, sources) = source_rows(&self.architecture, data)?;
        if shapes != self.source_shapes {
            return Err(graph_err("dataset slot shapes differ from the trained model"));
        }
        let rows = data.rows();
        let n = self.nodes.len();
        let mut outputs = vec![Vec::new(); n];
        let mut inputs = vec![Vec::new(); n];
        let mut parts_all = vec![Vec::new(); n];
        for &k in self.architecture.order() {
            let parts = gather(&self.architecture, k, &sources, &outputs, rows);
            let model = &self.nodes[k].model;
            let assembled = parts.iter().map(|p| model.assemble(p)).collect::<Result<Vec<_>>>()?;
            let p = model.as_primitive();
            outputs[k] = crate::par::map(&assembled, |x| p.encode(x))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            inputs[k] = assembled;
            parts_all[k] = parts;
        }
        Ok(Replay {
            inputs,
            parts: parts_all,
            outputs,
        })
    }

    /// Bound source tuples of every dataset row.
    pub fn source_tuples(&self, data: &Dataset) -> Result<Vec<BTreeMap<String, Sample>>> {
        let (_, sources) = source_rows(&self.architecture, data)?;
        Ok((0..data.rows())
            .map(|r| {
                self.config()
                    .sources
                    .iter()
                    .cloned()
                    .zip(sources.iter().map(|c| c[r].clone()))
                    .collect()
            })
            .collect())
    }

    fn project_into(&self, k: usize, id: ArchetypeId, out: &mut BTreeMap<String, Sample>) -> Result<()> {
        let model = &self.nodes[k].model;
        let input = model.as_primitive().project(id)?;
        let parts = model.disassemble(input)?;
        for (ep, part) in self.architecture.inputs[k].iter().zip(parts) {
            self.project_endpoint(*ep, part, out)?;
        }
        Ok(())
    }

    fn project_endpoint(&self, ep: Endpoint, value: Sample, out: &mut BTreeMap<String, Sample>) -> Result<()> {
        match ep {
            Endpoint::Source(s) => {
                let name = &self.config().sources[s];
                if let Some(prev) = out.get(name) {
                    if prev != &value {
                        return Err(graph_err(format!("source {name} projects to two different values")));
                    }
                }
                out.insert(name.clone(), value);
                Ok(())
            }
            Endpoint::Node(u) => {
                let id = self.nodes[u]
                    .model
                    .as_primitive()
                    .locate(&value)
                    .ok_or(Error::NoMatchingArchetype)?;
                self.project_into(u, id, out)
            }
        }
    }

    /// Materializes a sink archetype as one value per source. Each value is
    /// a stored exemplar of its source; branches are projected separately,
    /// so the tuple as a whole need not be a dataset row.
    pub fn project(&self, id: ArchetypeId) -> Result<BTreeMap<String, Sample>> {
        let mut out = BTreeMap::new();
        self.project_into(self.architecture.sink(), id, &mut out)?;
        Ok(out)
    }

    /// Fills in the unknown sources from the known ones. Completion happens
    /// at the associative layer nearest the sink where known and unknown
    /// inputs meet; the winning relationship is projected down every branch.
    pub fn complete(&self, known: &BTreeMap<String, Sample>) -> Result<BTreeMap<String, Sample>> {
        let names = &self.config().sources;
        for k in known.keys() {
            if !names.contains(k) {
                return Err(graph_err(format!("unknown source {k}")));
            }
        }
        let known_idx: BTreeSet<usize> = names
            .iter()
            .enumerate()
            .filter(|(_, n)| known.contains_key(*n))
            .map(|(i, _)| i)
            .collect();
        if known_idx.is_empty() || known_idx.len() == names.len() {
            return Err(Error::NothingToComplete);
        }
        let mut bound: Vec<Option<Sample>> = names.iter().map(|n| known.get(n).cloned()).collect();
        for (i, s) in bound.iter().enumerate() {
            if let Some(s) = s {
                s.ensure_shape(&self.source_shapes[i])?;
            }
        }
        let mut out = BTreeMap::new();
        self.complete_at(self.architecture.sink(), &known_idx, &mut bound, &mut out)?;
        Ok(out)
    }

    fn complete_at(
        &self,
        k: usize,
        known: &BTreeSet<usize>,
        bound: &mut [Option<Sample>],
        out: &mut BTreeMap<String, Sample>,
    ) -> Result<()> {
        let eps = &self.architecture.inputs[k];
        match &self.nodes[k].model {
            NodeModel::AssociativeLayer(al) => {
                let mut known_parts = BTreeMap::new();
                for (slot, ep) in eps.iter().enumerate() {
                    let under = self.endpoint_sources(*ep);
                    if under.is_subset(known) {
                        known_parts.insert(slot, self.evaluate(*ep, bound)?);
                    } else if !under.is_disjoint(known) {
                        return Err(graph_err(format!(
                            "node {}: slot {slot} is only partially known",
                            self.nodes[k].name
                        )));
                    }
                }
                let id = al.nearest_restricted(&known_parts)?;
                self.project_into(k, id, out)
            }
            _ => match eps[0] {
                Endpoint::Node(u) => self.complete_at(u, known, bound, out),
                Endpoint::Source(_) => Err(Error::NothingToComplete),
            },
        }
    }

    fn endpoint_sources(&self, ep: Endpoint) -> BTreeSet<usize> {
        match ep {
            Endpoint::Source(s) => BTreeSet::from([s]),
            Endpoint::Node(u) => self.architecture.sources_under(u),
        }
    }

    fn evaluate(&self, ep: Endpoint, bound: &[Option<Sample>]) -> Result<Sample> {
        match ep {
            Endpoint::Source(s) => bound[s].clone().ok_or(Error::NothingToComplete),
            Endpoint::Node(u) => {
                let parts = self.architecture.inputs[u]
                    .iter()
                    .map(|e| self.evaluate(*e, bound))
                    .collect::<Result<Vec<_>>>()?;
                let model = &self.nodes[u].model;
                Ok(model.as_primitive().encode(&model.assemble(&parts)?)?.1)
            }
        }
    }

    /// Layout of the concatenated source tuple, in source declaration order.
    pub fn source_layout(&self) -> Result<ConcatLayout> {
        source_layout(&self.source_shapes)
    }

    /// Distinct source tuples of `data`, concatenated.
    pub fn input_set(&self, data: &Dataset) -> Result<FiniteSet> {
        let (_, sources) = source_rows(&self.architecture, data)?;
        let tuples = (0..data.rows())
            .map(|r| sources.iter().map(|c| c[r].clone()).collect::<Vec<_>>())
            .collect::<Vec<_>>();
        source_tuple_set(&self.source_shapes, self.config().grid, &tuples)
    }

    /// Corrupts one codebook so the projection contract breaks. Returns the
    /// affected node name.
    pub fn inject_fault(&mut self) -> Result<String> {
        let k = self.architecture.sink();
        let corrupt = |cb: &Codebook| -> Result<Codebook> {
            if cb.archetype_count() >= 2 {
                cb.with_swapped_representatives(0, 1)
            } else {
                let rep = &cb.representatives()[0];
                let mut v = rep.values().to_vec();
                v[0] += 1.0e3;
                cb.with_representative(0, Sample::new(rep.shape().clone(), v)?)
            }
        };
        let node = &mut self.nodes[k];
        node.model = match &node.model {
            NodeModel::Primitive(cb) => NodeModel::Primitive(corrupt(cb)?),
            NodeModel::AssociativeLayer(al) => NodeModel::AssociativeLayer(al.with_codebook(corrupt(al.codebook())?)?),
            NodeModel::Column(c) => NodeModel::Column(c.with_level(0, corrupt(&c.levels()[0])?)?),
            NodeModel::Pyramid(p) => NodeModel::Pyramid(p.with_codebook(0, 0, corrupt(&p.levels()[0][0])?)?),
        };
        Ok(node.name.clone())
    }
}

/// The whole trained graph seen as one primitive over concatenated source
/// tuples.
pub struct GraphPrimitive<'a> {
    graph: &'a TrainedGraph,
    layout: ConcatLayout,
    shape: Shape,
}

impl<'a> GraphPrimitive<'a> {
    pub fn new(graph: &'a TrainedGraph) -> Result<Self> {
        let layout = graph.source_layout()?;
        let shape = layout.concat_shape();
        Ok(GraphPrimitive { graph, layout, shape })
    }

    fn unpack(&self, x: &Sample) -> Result<BTreeMap<String, Sample>> {
        let parts = split(x, &self.layout)?;
        Ok(self.graph.config().sources.iter().cloned().zip(parts).collect())
    }
}

impl Primitive for GraphPrimitive<'_> {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn grid(&self) -> f64 {
        self.graph.config().grid
    }

    fn archetype_count(&self) -> usize {
        self.graph.sink().model.as_primitive().archetype_count()
    }

    fn encode(&self, x: &Sample) -> Result<(ArchetypeId, Sample)> {
        x.ensure_shape(&self.shape)?;
        self.graph.encode(&self.unpack(x)?)
    }

    fn project(&self, id: ArchetypeId) -> Result<Sample> {
        let map = self.graph.project(id)?;
        let parts = self
            .graph
            .config()
            .sources
            .iter()
            .map(|n| map.get(n).cloned().ok_or_else(|| graph_err(format!("source {n} not reached by projection"))))
            .collect::<Result<Vec<_>>>()?;
        concat(&parts, &self.layout)
    }

    fn locate(&self, archetype: &Sample) -> Option<ArchetypeId> {
        self.graph.sink().model.as_primitive().locate(archetype)
    }
}
