//! Diversity-reducing primitives.
//!
//! A primitive maps an input set onto a strictly smaller set of archetypes
//! and can project every archetype back to a member of the input set that
//! encodes to it. Two reference constructions are provided: an exemplar
//! quantizer (leader clustering with a forced merge) and the trivial
//! primitive that collapses everything into one archetype.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{check_grid, Sample, Shape};
use crate::set::{ensure_nonempty, FiniteSet};

/// Index of an archetype inside a trained structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArchetypeId(pub usize);

impl ArchetypeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Encode/project capability shared by primitives and every composed
/// structure. Input and output shapes are the same.
pub trait Primitive: Sync {
    fn shape(&self) -> &Shape;

    fn grid(&self) -> f64;

    fn archetype_count(&self) -> usize;

    /// Nearest archetype and its vector.
    fn encode(&self, x: &Sample) -> Result<(ArchetypeId, Sample)>;

    /// A member of the training input set that encodes to `id`.
    fn project(&self, id: ArchetypeId) -> Result<Sample>;

    /// Id of the archetype whose vector equals `archetype` on the grid.
    fn locate(&self, archetype: &Sample) -> Option<ArchetypeId>;
}

/// Trained archetypes with one stored exemplar each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "CodebookWire", try_from = "CodebookWire")]
pub struct Codebook {
    shape: Shape,
    grid: f64,
    archetypes: Vec<Sample>,
    representatives: Vec<Sample>,
    merge_radius: Option<f64>,
    degenerate: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodebookWire {
    shape: Shape,
    grid: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    merge_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    degenerate: bool,
    archetypes: Vec<Vec<f64>>,
    representatives: Vec<Vec<f64>>,
}

impl From<Codebook> for CodebookWire {
    fn from(cb: Codebook) -> Self {
        CodebookWire {
            shape: cb.shape,
            grid: cb.grid,
            merge_radius: cb.merge_radius,
            degenerate: cb.degenerate,
            archetypes: cb.archetypes.into_iter().map(Sample::into_values).collect(),
            representatives: cb.representatives.into_iter().map(Sample::into_values).collect(),
        }
    }
}

impl TryFrom<CodebookWire> for Codebook {
    type Error = Error;
    fn try_from(w: CodebookWire) -> Result<Self> {
        let to_samples = |rows: Vec<Vec<f64>>| {
            rows.into_iter()
                .map(|r| Sample::new(w.shape.clone(), r))
                .collect::<Result<Vec<_>>>()
        };
        let archetypes = to_samples(w.archetypes)?;
        let representatives = to_samples(w.representatives)?;
        let mut cb = Codebook::from_parts(w.shape.clone(), w.grid, archetypes, representatives)?;
        cb.merge_radius = w.merge_radius;
        cb.degenerate = w.degenerate;
        Ok(cb)
    }
}

impl Codebook {
    /// Builds a codebook from explicit parts. Only structural checks are
    /// made here; the encode/project contract is left to the verifier.
    pub fn from_parts(
        shape: Shape,
        grid: f64,
        archetypes: Vec<Sample>,
        representatives: Vec<Sample>,
    ) -> Result<Self> {
        check_grid(grid)?;
        if archetypes.is_empty() {
            return Err(Error::Untrained);
        }
        if archetypes.len() != representatives.len() {
            return Err(Error::LengthMismatch {
                expected: archetypes.len(),
                found: representatives.len(),
            });
        }
        for s in archetypes.iter().chain(&representatives) {
            s.ensure_shape(&shape)?;
        }
        Ok(Codebook {
            shape,
            grid,
            archetypes,
            representatives,
            merge_radius: None,
            degenerate: false,
        })
    }

    pub fn archetypes(&self) -> &[Sample] {
        &self.archetypes
    }

    pub fn representatives(&self) -> &[Sample] {
        &self.representatives
    }

    pub fn merge_radius(&self) -> Option<f64> {
        self.merge_radius
    }

    /// Set when training saw fewer than two distinct inputs, so no reduction
    /// was possible.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn archetype(&self, id: ArchetypeId) -> Result<&Sample> {
        self.archetypes.get(id.0).ok_or(Error::ArchetypeOutOfRange {
            id: id.0,
            len: self.archetypes.len(),
        })
    }

    pub fn archetype_set(&self) -> Result<FiniteSet> {
        FiniteSet::from_samples(self.shape.clone(), self.grid, self.archetypes.iter().cloned())
    }

    /// Copy with two representatives exchanged. Used to seed faults when
    /// exercising the verifier.
    pub fn with_swapped_representatives(&self, a: usize, b: usize) -> Result<Codebook> {
        let len = self.representatives.len();
        for id in [a, b] {
            if id >= len {
                return Err(Error::ArchetypeOutOfRange { id, len });
            }
        }
        let mut cb = self.clone();
        cb.representatives.swap(a, b);
        Ok(cb)
    }

    /// Copy with one representative replaced by an arbitrary sample.
    pub fn with_representative(&self, id: usize, rep: Sample) -> Result<Codebook> {
        rep.ensure_shape(&self.shape)?;
        let len = self.representatives.len();
        if id >= len {
            return Err(Error::ArchetypeOutOfRange { id, len });
        }
        let mut cb = self.clone();
        cb.representatives[id] = rep;
        Ok(cb)
    }

    /// Encodes every sample with the given execution mode.
    pub fn encode_batch_with(
        &self,
        xs: &[Sample],
        exec: crate::par::Execution,
    ) -> Result<Vec<(ArchetypeId, Sample)>> {
        exec.map(xs, |x| self.encode(x)).into_iter().collect()
    }

    pub fn encode_batch(&self, xs: &[Sample]) -> Result<Vec<(ArchetypeId, Sample)>> {
        self.encode_batch_with(xs, crate::par::Execution::default())
    }
}

fn nearest(archetypes: &[Sample], x: &Sample) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, a) in archetypes.iter().enumerate() {
        let d = a.squared_distance(x);
        // strict `<` keeps the lowest index on ties
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((k, d));
        }
    }
    best
}

impl Primitive for Codebook {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn grid(&self) -> f64 {
        self.grid
    }

    fn archetype_count(&self) -> usize {
        self.archetypes.len()
    }

    fn encode(&self, x: &Sample) -> Result<(ArchetypeId, Sample)> {
        x.ensure_shape(&self.shape)?;
        let (k, _) = nearest(&self.archetypes, x).ok_or(Error::Untrained)?;
        Ok((ArchetypeId(k), self.archetypes[k].clone()))
    }

    fn project(&self, id: ArchetypeId) -> Result<Sample> {
        self.representatives
            .get(id.0)
            .cloned()
            .ok_or(Error::ArchetypeOutOfRange {
                id: id.0,
                len: self.representatives.len(),
            })
    }

    fn locate(&self, archetype: &Sample) -> Option<ArchetypeId> {
        let q = archetype.quantize(self.grid).ok()?;
        self.archetypes.iter().position(|a| *a == q).map(ArchetypeId)
    }
}

/// Archetype vectors reachable from `inputs`.
pub fn output_set<P: Primitive + ?Sized>(p: &P, inputs: &FiniteSet) -> Result<FiniteSet> {
    let items = inputs.to_vec();
    let outs = crate::par::map(&items, |x| p.encode(x).map(|(_, o)| o))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    FiniteSet::from_samples(p.shape().clone(), inputs.grid(), outs)
}

/// How a primitive instance is trained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrimitiveSpec {
    Exemplar { merge_radius: f64 },
    Trivial,
}

impl PrimitiveSpec {
    pub fn train(&self, inputs: &FiniteSet) -> Result<Codebook> {
        match *self {
            PrimitiveSpec::Exemplar { merge_radius } => {
                train_exemplar_quantizer(inputs, merge_radius, inputs.shape())
            }
            PrimitiveSpec::Trivial => train_trivial(inputs, inputs.shape()),
        }
    }

    /// Same spec with the merge radius multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> Self {
        match self {
            PrimitiveSpec::Exemplar { merge_radius } => PrimitiveSpec::Exemplar {
                merge_radius: merge_radius * factor,
            },
            PrimitiveSpec::Trivial => PrimitiveSpec::Trivial,
        }
    }
}

struct Cluster {
    sum: Vec<f64>,
    count: usize,
    vector: Sample,
    seed: Sample,
}

impl Cluster {
    fn seeded(x: &Sample) -> Self {
        Cluster {
            sum: x.values().to_vec(),
            count: 1,
            vector: x.clone(),
            seed: x.clone(),
        }
    }

    fn absorb(&mut self, sum: &[f64], count: usize, grid: f64) -> Result<()> {
        for (acc, v) in self.sum.iter_mut().zip(sum) {
            *acc += v;
        }
        self.count += count;
        let n = self.count as f64;
        let mean = Sample::new(self.vector.shape().clone(), self.sum.iter().map(|s| s / n).collect())?;
        self.vector = mean.quantize(grid)?;
        Ok(())
    }
}

/// Leader-style exemplar quantizer.
///
/// Inputs are visited in canonical order. An input within `merge_radius` of
/// its nearest archetype joins it (the archetype moves to the running mean);
/// otherwise it seeds a new archetype. If no merge happened, the closest
/// pair is merged so the archetype count is strictly below the input count.
/// Finally each archetype's representative is its seed when the seed still
/// encodes to it, else the first input that does; archetypes no input
/// reaches are dropped.
pub fn train_exemplar_quantizer(inputs: &FiniteSet, merge_radius: f64, shape: &Shape) -> Result<Codebook> {
    if !(merge_radius.is_finite() && merge_radius > 0.0) {
        return Err(Error::InvalidRadius(merge_radius));
    }
    check_input(inputs, shape)?;
    let grid = inputs.grid();
    if inputs.len() < 2 {
        let mut cb = single_archetype(inputs, inputs.iter().next().unwrap().clone())?;
        cb.merge_radius = Some(merge_radius);
        return Ok(cb);
    }

    let r2 = merge_radius * merge_radius;
    let mut clusters: Vec<Cluster> = Vec::new();
    for x in inputs.iter() {
        let vectors: Vec<Sample> = clusters.iter().map(|c| c.vector.clone()).collect();
        match nearest(&vectors, x) {
            Some((k, d2)) if d2 <= r2 => clusters[k].absorb(x.values(), 1, grid)?,
            _ => clusters.push(Cluster::seeded(x)),
        }
    }

    while clusters.len() >= inputs.len() {
        let (i, j) = closest_pair(&clusters);
        let absorbed = clusters.remove(j);
        clusters[i].absorb(&absorbed.sum, absorbed.count, grid)?;
    }

    let mut cb = finalize(inputs, shape, grid, clusters)?;
    cb.merge_radius = Some(merge_radius);
    Ok(cb)
}

fn closest_pair(clusters: &[Cluster]) -> (usize, usize) {
    let mut best = (0, 1, f64::INFINITY);
    for i in 0..clusters.len() {
        for j in i + 1..clusters.len() {
            let d = clusters[i].vector.squared_distance(&clusters[j].vector);
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    (best.0, best.1)
}

fn finalize(inputs: &FiniteSet, shape: &Shape, grid: f64, clusters: Vec<Cluster>) -> Result<Codebook> {
    let vectors: Vec<Sample> = clusters.iter().map(|c| c.vector.clone()).collect();
    let mut members: Vec<Vec<&Sample>> = vec![Vec::new(); vectors.len()];
    for x in inputs.iter() {
        let (k, _) = nearest(&vectors, x).ok_or(Error::Untrained)?;
        members[k].push(x);
    }

    let mut archetypes = Vec::new();
    let mut representatives = Vec::new();
    for (cluster, assigned) in clusters.into_iter().zip(members) {
        let Some(&first) = assigned.first() else {
            continue; // unreachable archetype
        };
        let rep = if assigned.contains(&&cluster.seed) {
            cluster.seed
        } else {
            first.clone()
        };
        archetypes.push(cluster.vector);
        representatives.push(rep);
    }

    let cb = Codebook::from_parts(shape.clone(), grid, archetypes, representatives)?;
    debug_assert!(
        (0..cb.archetype_count()).all(|k| cb
            .encode(&cb.representatives[k])
            .map(|(id, _)| id.0 == k)
            .unwrap_or(false)),
        "representative does not encode to its archetype"
    );
    Ok(cb)
}

fn check_input(inputs: &FiniteSet, shape: &Shape) -> Result<()> {
    ensure_nonempty(inputs)?;
    if inputs.shape() != shape {
        return Err(Error::ShapeMismatch {
            expected: shape.clone(),
            found: inputs.shape().clone(),
        });
    }
    Ok(())
}

fn single_archetype(inputs: &FiniteSet, archetype: Sample) -> Result<Codebook> {
    let rep = inputs.iter().next().ok_or(Error::EmptyInput)?.clone();
    let mut cb = Codebook::from_parts(inputs.shape().clone(), inputs.grid(), vec![archetype], vec![rep])?;
    cb.degenerate = inputs.len() < 2;
    Ok(cb)
}

/// Merges every input into one archetype at the mean; the representative is
/// the first input in canonical order.
pub fn train_trivial(inputs: &FiniteSet, shape: &Shape) -> Result<Codebook> {
    check_input(inputs, shape)?;
    let n = inputs.len() as f64;
    let mut sum = vec![0.0; shape.element_count()];
    for x in inputs.iter() {
        for (acc, v) in sum.iter_mut().zip(x.values()) {
            *acc += v;
        }
    }
    let mean = Sample::new(shape.clone(), sum.into_iter().map(|s| s / n).collect())?.quantize(inputs.grid())?;
    single_archetype(inputs, mean)
}
