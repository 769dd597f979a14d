//! Executable property checks over trained structures. Every check returns a
//! report entry instead of an error; a failed entry always carries a
//! concrete witness that reproduces the failure when replayed.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::combiners::{average, average_recover, concat, split, ConcatLayout};
use crate::data::{Correlation, Dataset};
use crate::error::{Error, Result};
use crate::mapping::MappingLog;
use crate::primitive::{ArchetypeId, Codebook, Primitive, PrimitiveSpec};
use crate::sample::Sample;
use crate::set::FiniteSet;
use crate::structures::associative::observed_tuples;
use crate::structures::column::{train_column, DiscriminatoryColumn};
use crate::structures::graph::{GraphPrimitive, NodeModel, PrimitiveKind, TrainedGraph};
use crate::structures::pyramid::{train_pyramid, PyramidParams};

pub const SURJECTIVE_MAP: &str = "surjective_map";
pub const DIVERSITY_REDUCTION: &str = "diversity_reduction";
pub const LATENT_SET: &str = "latent_set";
pub const LATENT_TRANSITIVITY: &str = "latent_transitivity";
pub const LATENT_AVERAGE: &str = "latent_average";
pub const PYRAMID_COLUMN_EQUIVALENCE: &str = "pyramid_column_equivalence";
pub const CARDINALITY_CHAIN: &str = "cardinality_chain";
pub const CORRELATED_TUPLES: &str = "correlated_tuples";
pub const INDEPENDENT_PRODUCT: &str = "independent_product";
pub const CONCAT_BIJECTIVE: &str = "concat_bijective";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Passed,
    Failed,
    /// The property's hypothesis does not hold for this subject.
    PreconditionUnmet,
    /// Not enough evidence to decide yet.
    Deferred,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub theorem_id: String,
    /// What was checked, e.g. a node name.
    pub subject: String,
    pub status: CheckStatus,
    /// False only when `status` is `Failed`.
    pub passed: bool,
    pub cases_run: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    fn new(theorem_id: &str, subject: &str, cases_run: usize) -> Self {
        CheckResult {
            theorem_id: theorem_id.to_string(),
            subject: subject.to_string(),
            status: CheckStatus::Passed,
            passed: true,
            cases_run: cases_run.max(1),
            counterexample: None,
            note: None,
        }
    }

    fn fail(mut self, witness: Value) -> Self {
        self.status = CheckStatus::Failed;
        self.passed = false;
        self.counterexample = Some(witness);
        self
    }

    fn with_status(mut self, status: CheckStatus, note: impl Into<String>) -> Self {
        self.status = status;
        self.passed = status != CheckStatus::Failed;
        self.note = Some(note.into());
        self
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn error(theorem_id: &str, subject: &str, e: &Error) -> Self {
        CheckResult::new(theorem_id, subject, 1).fail(json!({ "error": e.to_string() }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// The log must describe a surjective function onto its output set; with
/// fewer outputs than inputs some output must have two preimages.
pub fn check_surjective_equivalence(log: &MappingLog, subject: &str) -> CheckResult {
    let r = CheckResult::new(SURJECTIVE_MAP, subject, log.pairs().len());
    if let Some(x) = log.domain_violation() {
        return r.fail(json!({ "kind": "outside_domain", "input": x }));
    }
    if let Some((x, a, b)) = log.non_function_witness() {
        return r.fail(json!({ "kind": "two_outputs", "input": x, "outputs": [a, b] }));
    }
    if let Some(o) = log.unreached_output() {
        return r.fail(json!({ "kind": "unreached_output", "output": o }));
    }
    if log.output_set().len() < log.input_set().len() && log.shared_output_witness().is_none() {
        return r.fail(json!({ "kind": "no_shared_output", "inputs": log.input_set().len(), "outputs": log.output_set().len() }));
    }
    r
}

/// Strict reduction, and the pigeonhole consequence: some output has at
/// least two preimages.
pub fn check_diversity(log: &MappingLog, subject: &str) -> CheckResult {
    let (i, o) = (log.input_set().len(), log.output_set().len());
    let r = CheckResult::new(DIVERSITY_REDUCTION, subject, log.pairs().len());
    if o >= i {
        return r.fail(json!({ "kind": "no_reduction", "inputs": i, "outputs": o }));
    }
    match log.shared_output_witness() {
        Some((a, b, out)) => r.with_note(format!("{i} -> {o}; shared output e.g. {out} <- {a}, {b}")),
        None => r.fail(json!({ "kind": "no_shared_output", "inputs": i, "outputs": o })),
    }
}

/// Encodes every input and groups by archetype, in canonical input order.
fn reachable<P: Primitive + ?Sized>(p: &P, inputs: &FiniteSet) -> Result<BTreeMap<ArchetypeId, (Sample, Sample)>> {
    let items = inputs.to_vec();
    let encoded = crate::par::map(&items, |x| p.encode(x));
    let mut out = BTreeMap::new();
    for (x, e) in items.into_iter().zip(encoded) {
        let (id, o) = e?;
        out.entry(id).or_insert((o, x));
    }
    Ok(out)
}

/// `inputs` must be the set `p` was trained on.
pub fn check_latent_set<P: Primitive + ?Sized>(inputs: &FiniteSet, p: &P, subject: &str) -> CheckResult {
    check_latent_set_with(inputs, p, subject, &|x| inputs.contains(x))
}

/// As [`check_latent_set`], with a caller-defined membership test for
/// projected values.
pub fn check_latent_set_with<P: Primitive + ?Sized>(
    inputs: &FiniteSet,
    p: &P,
    subject: &str,
    member: &(dyn Fn(&Sample) -> bool + Sync),
) -> CheckResult {
    let reach = match reachable(p, inputs) {
        Ok(r) => r,
        Err(e) => return CheckResult::error(LATENT_SET, subject, &e),
    };
    let r = CheckResult::new(LATENT_SET, subject, reach.len());
    if reach.len() >= inputs.len() {
        return r.fail(json!({ "kind": "no_reduction", "inputs": inputs.len(), "outputs": reach.len() }));
    }
    let mut seen: BTreeMap<Sample, ArchetypeId> = BTreeMap::new();
    for (&id, (archetype, _)) in &reach {
        let projected = match p.project(id) {
            Ok(x) => x,
            Err(e) => return r.fail(json!({ "kind": "project_error", "archetype": id.0, "error": e.to_string() })),
        };
        if !member(&projected) {
            return r.fail(json!({ "kind": "projection_outside_inputs", "archetype": id.0, "projected": projected }));
        }
        match p.encode(&projected) {
            Ok((back, _)) if back == id => {}
            Ok((back, _)) => {
                return r.fail(json!({
                    "kind": "round_trip",
                    "archetype": id.0,
                    "archetype_value": archetype,
                    "projected": projected,
                    "encoded_as": back.0,
                }))
            }
            Err(e) => return r.fail(json!({ "kind": "encode_error", "archetype": id.0, "error": e.to_string() })),
        }
        if let Some(other) = seen.insert(projected.clone(), id) {
            return r.fail(json!({ "kind": "not_injective", "archetypes": [other.0, id.0], "projected": projected }));
        }
    }
    r.with_note(format!("{} -> {}", inputs.len(), reach.len()))
}

/// `mid` is trained on `inputs`, `top` on the outputs of `mid`. The composed
/// projection must land in `inputs` and re-encode to the same top archetype.
pub fn check_latent_transitivity<M, T>(inputs: &FiniteSet, mid: &M, top: &T, subject: &str) -> CheckResult
where
    M: Primitive + ?Sized,
    T: Primitive + ?Sized,
{
    let run = || -> Result<CheckResult> {
        let mids = crate::primitive::output_set(mid, inputs)?;
        let reach = reachable(top, &mids)?;
        let r = CheckResult::new(LATENT_TRANSITIVITY, subject, reach.len());
        if reach.len() >= inputs.len() {
            return Ok(r.fail(json!({ "kind": "no_reduction", "inputs": inputs.len(), "outputs": reach.len() })));
        }
        for &id in reach.keys() {
            let m = top.project(id)?;
            if !mids.contains(&m) {
                return Ok(r.fail(json!({ "kind": "top_projection_outside_mid", "archetype": id.0, "projected": m })));
            }
            let mid_id = mid.locate(&m).ok_or(Error::NoMatchingArchetype)?;
            let x = mid.project(mid_id)?;
            if !inputs.contains(&x) {
                return Ok(r.fail(json!({ "kind": "projection_outside_inputs", "archetype": id.0, "projected": x })));
            }
            let (_, o1) = mid.encode(&x)?;
            let (back, _) = top.encode(&o1)?;
            if back != id {
                return Ok(r.fail(json!({ "kind": "round_trip", "archetype": id.0, "projected": x, "encoded_as": back.0 })));
            }
        }
        Ok(r.with_note(format!("{} -> {} -> {}", inputs.len(), mids.len(), reach.len())))
    };
    run().unwrap_or_else(|e| CheckResult::error(LATENT_TRANSITIVITY, subject, &e))
}

/// Averages the outputs of two primitives trained on the same inputs and
/// checks the recovery formula `2·o − o2` plus the cardinality bound.
/// The recovery is exact only when the mean is representable on the grid;
/// otherwise the check reports an unmet precondition.
pub fn check_average_latent<P1, P2>(inputs: &FiniteSet, p1: &P1, p2: &P2, subject: &str) -> CheckResult
where
    P1: Primitive + ?Sized,
    P2: Primitive + ?Sized,
{
    let run = || -> Result<CheckResult> {
        let grid = inputs.grid();
        let r = CheckResult::new(LATENT_AVERAGE, subject, inputs.len());
        let mut o1s = BTreeSet::new();
        let mut o2s = BTreeSet::new();
        let mut averaged: BTreeMap<Sample, (Sample, Sample)> = BTreeMap::new();
        for i in inputs.iter() {
            let (id1, o1) = p1.encode(i)?;
            let (_, o2) = p2.encode(i)?;
            let o = average(&o1, &o2, grid)?;
            let target: Vec<f64> = o.values().iter().zip(o2.values()).map(|(a, b)| 2.0 * a - b).collect();
            if target != o1.values() {
                return Ok(r.with_status(
                    CheckStatus::PreconditionUnmet,
                    format!("mean of {o1} and {o2} is not representable on grid {grid}"),
                ));
            }
            let recovered = average_recover(&o, &o2, p1)?;
            let (back, _) = p1.encode(&recovered)?;
            if back != id1 {
                return Ok(r.fail(json!({
                    "kind": "recover",
                    "input": i,
                    "averaged": o,
                    "sibling": o2,
                    "recovered": recovered,
                    "expected_archetype": id1.0,
                    "encoded_as": back.0,
                })));
            }
            if let Some((a, b)) = averaged.get(&o) {
                if (a, b) != (&o1, &o2) {
                    return Ok(r.fail(json!({ "kind": "ambiguous_mean", "averaged": o, "pairs": [[a, b], [o1, o2]] })));
                }
            }
            averaged.insert(o, (o1.clone(), o2.clone()));
            o1s.insert(o1);
            o2s.insert(o2);
        }
        let bound = o1s.len().max(o2s.len());
        if averaged.len() >= inputs.len() || averaged.len() > bound {
            return Ok(r.fail(json!({
                "kind": "cardinality",
                "inputs": inputs.len(),
                "averaged": averaged.len(),
                "first_outputs": o1s.len(),
                "second_outputs": o2s.len(),
            })));
        }
        Ok(r.with_note(format!(
            "{} inputs, {} averaged, {}/{} per primitive",
            inputs.len(),
            averaged.len(),
            o1s.len(),
            o2s.len()
        )))
    };
    run().unwrap_or_else(|e| CheckResult::error(LATENT_AVERAGE, subject, &e))
}

/// Distinct means of the two primitives' outputs over `inputs`.
pub fn averaged_outputs<P1, P2>(inputs: &FiniteSet, p1: &P1, p2: &P2) -> Result<FiniteSet>
where
    P1: Primitive + ?Sized,
    P2: Primitive + ?Sized,
{
    let mut out = FiniteSet::new(p1.shape().clone(), inputs.grid())?;
    for i in inputs.iter() {
        out.insert(average(&p1.encode(i)?.1, &p2.encode(i)?.1, inputs.grid())?)?;
    }
    Ok(out)
}

/// Trains a pyramid and a column of equal depth and compares them level by
/// level and input by input.
pub fn check_pyramid_column_corollary(
    inputs: &FiniteSet,
    levels: usize,
    params: &PyramidParams,
    subject: &str,
) -> CheckResult {
    let run = || -> Result<CheckResult> {
        let pyramid = train_pyramid(inputs, levels, params)?;
        let r = CheckResult::new(PYRAMID_COLUMN_EQUIVALENCE, subject, inputs.len());
        if !pyramid.is_homogeneous() {
            return Ok(r.with_status(
                CheckStatus::PreconditionUnmet,
                "pyramid primitives are not identical",
            ));
        }
        let column = train_column(inputs, levels, &params.primitive)?;
        let p_sets = pyramid.level_output_sets(inputs)?;
        let c_sets = column.level_output_sets(inputs)?;
        for (level, (a, b)) in p_sets.iter().zip(&c_sets).enumerate() {
            if a != b {
                return Ok(r.fail(json!({
                    "kind": "output_sets",
                    "level_from_bottom": level,
                    "pyramid": a.len(),
                    "column": b.len(),
                })));
            }
        }
        for x in inputs.iter() {
            let (a, b) = (pyramid.encode(x)?, column.encode(x)?);
            if a != b {
                return Ok(r.fail(json!({ "kind": "encode", "input": x, "pyramid": a.1, "column": b.1 })));
            }
        }
        Ok(r)
    };
    run().unwrap_or_else(|e| CheckResult::error(PYRAMID_COLUMN_EQUIVALENCE, subject, &e))
}

/// `|I| > |O_1| > |O_2| > ...`, bottom level first.
pub fn check_cardinality_chain(input_len: usize, level_lens: &[usize], subject: &str) -> CheckResult {
    let r = CheckResult::new(CARDINALITY_CHAIN, subject, level_lens.len());
    let chain: Vec<usize> = std::iter::once(input_len).chain(level_lens.iter().copied()).collect();
    match chain.windows(2).position(|w| w[1] >= w[0]) {
        Some(k) => r.fail(json!({ "kind": "not_decreasing", "chain": chain, "level": k })),
        None => r.with_note(format!("{chain:?}")),
    }
}

/// Correlated presentation: the layer's input set is exactly the distinct
/// presented tuples. Independent presentation: it is the full product of
/// per-slot values, decided only once every product tuple was presented.
pub fn check_correlation(
    presented: &[Vec<Sample>],
    al_inputs: &FiniteSet,
    layout: &ConcatLayout,
    mode: Correlation,
    subject: &str,
) -> CheckResult {
    let id = match mode {
        Correlation::Correlated => CORRELATED_TUPLES,
        Correlation::Independent => INDEPENDENT_PRODUCT,
    };
    let run = || -> Result<CheckResult> {
        let observed = observed_tuples(presented, layout, al_inputs.grid())?;
        let r = CheckResult::new(id, subject, presented.len());
        let expected = match mode {
            Correlation::Correlated => observed,
            Correlation::Independent => {
                let product = product_set(presented, layout, al_inputs.grid())?;
                if observed.len() < product.len() {
                    return Ok(r.with_status(
                        CheckStatus::Deferred,
                        format!("{} of {} product tuples presented", observed.len(), product.len()),
                    ));
                }
                product
            }
        };
        if let Some(extra) = al_inputs.iter().find(|t| !expected.contains(t)) {
            return Ok(r.fail(json!({ "kind": "unexpected_tuple", "tuple": split(extra, layout)? })));
        }
        if let Some(missing) = expected.iter().find(|t| !al_inputs.contains(t)) {
            return Ok(r.fail(json!({ "kind": "missing_tuple", "tuple": split(missing, layout)? })));
        }
        Ok(r.with_note(format!("{} distinct tuples", al_inputs.len())))
    };
    run().unwrap_or_else(|e| CheckResult::error(id, subject, &e))
}

fn product_set(presented: &[Vec<Sample>], layout: &ConcatLayout, grid: f64) -> Result<FiniteSet> {
    let mut per_slot: Vec<BTreeSet<Sample>> = vec![BTreeSet::new(); layout.arity()];
    for t in presented {
        for (slot, s) in t.iter().enumerate() {
            per_slot
                .get_mut(slot)
                .ok_or(Error::ArityMismatch {
                    expected: layout.arity(),
                    found: t.len(),
                })?
                .insert(s.quantize(grid)?);
        }
    }
    let mut tuples: Vec<Vec<Sample>> = vec![Vec::new()];
    for values in &per_slot {
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                values.iter().map(move |v| {
                    let mut t = t.clone();
                    t.push(v.clone());
                    t
                })
            })
            .collect();
    }
    observed_tuples(&tuples, layout, grid)
}

/// Random tuples: `split∘concat` and `concat∘split` are identities and
/// distinct tuples never collide.
pub fn check_concat_bijective(layout: &ConcatLayout, trials: usize, seed: u64, subject: &str) -> CheckResult {
    let run = || -> Result<CheckResult> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = CheckResult::new(CONCAT_BIJECTIVE, subject, trials);
        let mut images: BTreeMap<Sample, Vec<Sample>> = BTreeMap::new();
        for _ in 0..trials {
            let tuple = layout
                .part_shapes()
                .iter()
                .map(|shape| {
                    // Small integer range so that distinct tuples share parts.
                    let values = (0..shape.element_count()).map(|_| rng.random_range(-3i32..=3) as f64 * 0.5).collect();
                    Sample::new(shape.clone(), values)
                })
                .collect::<Result<Vec<_>>>()?;
            let joined = concat(&tuple, layout)?;
            let back = split(&joined, layout)?;
            if back != tuple {
                return Ok(r.fail(json!({ "kind": "split_concat", "tuple": tuple, "split": back })));
            }
            if concat(&back, layout)? != joined {
                return Ok(r.fail(json!({ "kind": "concat_split", "concatenated": joined })));
            }
            if let Some(prev) = images.get(&joined) {
                if prev != &tuple {
                    return Ok(r.fail(json!({ "kind": "collision", "tuples": [prev, tuple], "concatenated": joined })));
                }
            }
            images.insert(joined, tuple);
        }
        Ok(r.with_note(format!("{} distinct tuples", images.len())))
    };
    run().unwrap_or_else(|e| CheckResult::error(CONCAT_BIJECTIVE, subject, &e))
}

const CONCAT_TRIALS: usize = 200;

/// Runs every applicable check against every node of a trained graph, then
/// against the graph as a whole. Node checks follow declaration order; each
/// node's checks follow a fixed order.
pub fn run_all(graph: &TrainedGraph, data: &Dataset, seed: u64) -> Result<VerificationReport> {
    if graph.nodes.is_empty() {
        return Err(Error::Graph("cannot verify an empty graph".into()));
    }
    let replay = graph.replay(data)?;
    let grid = graph.config().grid;
    let mut checks = Vec::new();
    for (k, node) in graph.nodes.iter().enumerate() {
        let name = node.name.as_str();
        let p = node.model.as_primitive();
        let inputs = FiniteSet::from_samples(p.shape().clone(), grid, replay.inputs[k].iter().cloned())?;

        match MappingLog::record(p, &inputs) {
            Ok(log) => {
                checks.push(check_surjective_equivalence(&log, name));
                checks.push(check_diversity(&log, name));
            }
            Err(e) => checks.push(CheckResult::error(SURJECTIVE_MAP, name, &e)),
        }
        checks.push(check_latent_set(&inputs, p, name));

        let cfg = &graph.config().nodes[k];
        match &node.model {
            NodeModel::Column(c) => {
                if c.depth() >= 2 {
                    let (bottom, upper) = split_column(c)?;
                    checks.push(check_latent_transitivity(&inputs, &bottom, &upper, name));
                }
                checks.push(check_cardinality_chain(inputs.len(), &node.stats.level_diversity, name));
            }
            NodeModel::Pyramid(py) => {
                checks.push(check_cardinality_chain(inputs.len(), &node.stats.level_diversity, name));
                let bottom = &py.levels()[py.depth() - 1];
                if bottom.len() >= 2 {
                    checks.push(check_average_latent(&inputs, &bottom[0], &bottom[1], name));
                }
                let spec = match (cfg.params.primitive, cfg.params.merge_radius) {
                    (Some(PrimitiveKind::Trivial), _) => PrimitiveSpec::Trivial,
                    (_, Some(r)) => PrimitiveSpec::Exemplar { merge_radius: r },
                    _ => return Err(Error::Graph(format!("node {name}: missing primitive parameters"))),
                };
                // A jittered pyramid is retrained with jitter so the checker
                // sees the same heterogeneity and reports the unmet hypothesis.
                let params = PyramidParams {
                    primitive: spec,
                    radius_jitter: if py.is_homogeneous() { 0.0 } else { cfg.params.radius_jitter.unwrap_or(0.0) },
                    seed,
                };
                checks.push(check_pyramid_column_corollary(&inputs, py.depth(), &params, name));
            }
            NodeModel::AssociativeLayer(al) => {
                let mut r = check_correlation(&replay.parts[k], &inputs, al.layout(), Correlation::Correlated, name);
                if r.passed && inputs.len() != node.stats.input_diversity {
                    r = r.fail(json!({
                        "kind": "training_mismatch",
                        "trained_on": node.stats.input_diversity,
                        "replayed": inputs.len(),
                    }));
                }
                checks.push(r);
                checks.push(check_concat_bijective(al.layout(), CONCAT_TRIALS, seed, name));
            }
            NodeModel::Primitive(_) => {}
        }
    }

    let whole = GraphPrimitive::new(graph)?;
    let tuples = graph.input_set(data)?;
    let layout = graph.source_layout()?;
    let names = &graph.config().sources;
    let mut source_sets = Vec::with_capacity(names.len());
    for n in names {
        source_sets.push(data.slot_set(n)?);
    }
    let member = |x: &Sample| {
        split(x, &layout)
            .map(|parts| parts.iter().zip(&source_sets).all(|(p, s)| s.contains(p)))
            .unwrap_or(false)
    };
    let mut r = check_latent_set_with(&tuples, &whole, "graph", &member);
    if r.passed {
        let note = format!("{}; projected values are checked per source", r.note.take().unwrap_or_default());
        r = r.with_note(note);
    }
    checks.push(r);
    Ok(VerificationReport { seed, checks })
}

/// Bottom level and the column above it.
fn split_column(c: &DiscriminatoryColumn) -> Result<(Codebook, DiscriminatoryColumn)> {
    let levels = c.levels();
    let bottom = levels[levels.len() - 1].clone();
    let upper = DiscriminatoryColumn::from_levels(levels[..levels.len() - 1].to_vec())?;
    Ok((bottom, upper))
}
