//! Associative layer: concatenation of synchronized inputs followed by one
//! primitive. Its archetypes stand for relationships between slots.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::combiners::{concat, split, ConcatLayout};
use crate::error::{Error, Result};
use crate::primitive::{ArchetypeId, Codebook, Primitive, PrimitiveSpec};
use crate::sample::{Sample, Shape};
use crate::set::FiniteSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociativeLayer {
    layout: ConcatLayout,
    codebook: Codebook,
}

/// Distinct concatenations of the presented tuples. Only tuples that were
/// actually presented are members, never the full product of slot values.
pub fn observed_tuples(tuples: &[Vec<Sample>], layout: &ConcatLayout, grid: f64) -> Result<FiniteSet> {
    let mut set = FiniteSet::new(layout.concat_shape(), grid)?;
    for t in tuples {
        set.insert(concat(t, layout)?)?;
    }
    Ok(set)
}

pub fn train_associative_layer(
    tuples: &[Vec<Sample>],
    layout: &ConcatLayout,
    spec: &PrimitiveSpec,
    grid: f64,
) -> Result<AssociativeLayer> {
    let inputs = observed_tuples(tuples, layout, grid)?;
    let codebook = spec.train(&inputs)?;
    Ok(AssociativeLayer {
        layout: layout.clone(),
        codebook,
    })
}

impl AssociativeLayer {
    pub fn new(layout: ConcatLayout, codebook: Codebook) -> Result<Self> {
        let expected = layout.concat_shape();
        if codebook.shape() != &expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: codebook.shape().clone(),
            });
        }
        Ok(AssociativeLayer { layout, codebook })
    }

    pub fn layout(&self) -> &ConcatLayout {
        &self.layout
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    /// Relationship archetype of a full tuple.
    pub fn encode_parts(&self, parts: &[Sample]) -> Result<(ArchetypeId, Sample)> {
        self.codebook.encode(&concat(parts, &self.layout)?)
    }

    /// Archetype nearest to the known slots only, measured on those slots'
    /// coordinates. Ties go to the lowest index.
    pub fn nearest_restricted(&self, known: &BTreeMap<usize, Sample>) -> Result<ArchetypeId> {
        let arity = self.layout.arity();
        if known.is_empty() || known.len() >= arity {
            return Err(Error::NothingToComplete);
        }
        let mut ranges = Vec::with_capacity(known.len());
        for (&slot, value) in known {
            let range = self.layout.range(slot)?;
            value.ensure_shape(&self.layout.part_shapes()[slot])?;
            ranges.push((range, value));
        }
        let mut best: Option<(usize, f64)> = None;
        for (k, a) in self.codebook.archetypes().iter().enumerate() {
            let d: f64 = ranges
                .iter()
                .map(|(r, v)| {
                    a.values()[r.clone()]
                        .iter()
                        .zip(v.values())
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum::<f64>()
                })
                .sum();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        best.map(|(k, _)| ArchetypeId(k)).ok_or(Error::Untrained)
    }

    /// Completes a partial tuple with the projection of the best-matching
    /// relationship archetype. Every slot of the result comes from one
    /// training tuple.
    pub fn complete(&self, known: &BTreeMap<usize, Sample>) -> Result<Vec<Sample>> {
        let id = self.nearest_restricted(known)?;
        split(&self.codebook.project(id)?, &self.layout)
    }

    pub fn with_codebook(&self, codebook: Codebook) -> Result<Self> {
        AssociativeLayer::new(self.layout.clone(), codebook)
    }
}

pub fn al_encode(al: &AssociativeLayer, parts: &[Sample]) -> Result<Sample> {
    al.encode_parts(parts).map(|(_, o)| o)
}

pub fn al_complete(al: &AssociativeLayer, known: &BTreeMap<usize, Sample>) -> Result<Vec<Sample>> {
    al.complete(known)
}

/// Over concatenated samples.
impl Primitive for AssociativeLayer {
    fn shape(&self) -> &Shape {
        self.codebook.shape()
    }

    fn grid(&self) -> f64 {
        self.codebook.grid()
    }

    fn archetype_count(&self) -> usize {
        self.codebook.archetype_count()
    }

    fn encode(&self, x: &Sample) -> Result<(ArchetypeId, Sample)> {
        self.codebook.encode(x)
    }

    fn project(&self, id: ArchetypeId) -> Result<Sample> {
        self.codebook.project(id)
    }

    fn locate(&self, archetype: &Sample) -> Option<ArchetypeId> {
        self.codebook.locate(archetype)
    }
}
