//! Composition between levels: pairwise averaging for pyramids, and
//! concatenation with its inverse split for associative layers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primitive::Primitive;
use crate::sample::{Sample, Shape};

/// Elementwise mean of two samples, re-quantized on `grid`.
pub fn average(a: &Sample, b: &Sample, grid: f64) -> Result<Sample> {
    b.ensure_shape(a.shape())?;
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x + y) / 2.0)
        .collect();
    Sample::new(a.shape().clone(), values)?.quantize(grid)
}

/// Recovers an input of the first primitive from an averaged output `o`
/// and the sibling output `o2`: projects the archetype equal to `2·o − o2`.
pub fn average_recover<P: Primitive + ?Sized>(o: &Sample, o2: &Sample, first: &P) -> Result<Sample> {
    o2.ensure_shape(o.shape())?;
    o.ensure_shape(first.shape())?;
    let values = o
        .values()
        .iter()
        .zip(o2.values())
        .map(|(a, b)| 2.0 * a - b)
        .collect();
    let target = Sample::new(o.shape().clone(), values)?;
    let id = first.locate(&target).ok_or(Error::NoMatchingArchetype)?;
    first.project(id)
}

/// Ordered part shapes of a concatenation. Offsets are derived.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Shape>", into = "Vec<Shape>")]
pub struct ConcatLayout {
    parts: Vec<Shape>,
    offsets: Vec<usize>,
    total: usize,
}

impl ConcatLayout {
    pub fn new(parts: Vec<Shape>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::ArityMismatch { expected: 1, found: 0 });
        }
        let mut offsets = Vec::with_capacity(parts.len());
        let mut total = 0;
        for p in &parts {
            offsets.push(total);
            total += p.element_count();
        }
        Ok(ConcatLayout { parts, offsets, total })
    }

    pub fn arity(&self) -> usize {
        self.parts.len()
    }

    pub fn part_shapes(&self) -> &[Shape] {
        &self.parts
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Coordinate range of `slot` inside the flat concatenation.
    pub fn range(&self, slot: usize) -> Result<std::ops::Range<usize>> {
        let start = *self.offsets.get(slot).ok_or(Error::SlotOutOfRange {
            slot,
            arity: self.arity(),
        })?;
        Ok(start..start + self.parts[slot].element_count())
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    /// Shape of the concatenated sample: a flat vector.
    pub fn concat_shape(&self) -> Shape {
        Shape::vector(self.total).expect("layout parts have at least one element")
    }
}

impl TryFrom<Vec<Shape>> for ConcatLayout {
    type Error = Error;
    fn try_from(parts: Vec<Shape>) -> Result<Self> {
        ConcatLayout::new(parts)
    }
}

impl From<ConcatLayout> for Vec<Shape> {
    fn from(l: ConcatLayout) -> Self {
        l.parts
    }
}

pub fn concat(parts: &[Sample], layout: &ConcatLayout) -> Result<Sample> {
    if parts.len() != layout.arity() {
        return Err(Error::ArityMismatch {
            expected: layout.arity(),
            found: parts.len(),
        });
    }
    let mut values = Vec::with_capacity(layout.total_len());
    for (part, shape) in parts.iter().zip(layout.part_shapes()) {
        part.ensure_shape(shape)?;
        values.extend_from_slice(part.values());
    }
    Sample::new(layout.concat_shape(), values)
}

pub fn split(x: &Sample, layout: &ConcatLayout) -> Result<Vec<Sample>> {
    if x.len() != layout.total_len() {
        return Err(Error::LengthMismatch {
            expected: layout.total_len(),
            found: x.len(),
        });
    }
    layout
        .part_shapes()
        .iter()
        .enumerate()
        .map(|(slot, shape)| Sample::new(shape.clone(), x.values()[layout.range(slot)?].to_vec()))
        .collect()
}
