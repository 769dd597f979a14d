//! Finite sets of quantized samples. Cardinality is the "diversity" of a set.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sample::{check_grid, Sample, Shape};

/// Deduplicated collection of same-shape samples.
///
/// Elements are quantized on insertion, so membership is exact equality
/// on the grid. Iteration follows the canonical (lexicographic) order.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSet {
    shape: Shape,
    grid: f64,
    elements: BTreeSet<Sample>,
}

impl FiniteSet {
    pub fn new(shape: Shape, grid: f64) -> Result<Self> {
        check_grid(grid)?;
        Ok(FiniteSet {
            shape,
            grid,
            elements: BTreeSet::new(),
        })
    }

    pub fn from_samples<I>(shape: Shape, grid: f64, samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = Sample>,
    {
        let mut set = FiniteSet::new(shape, grid)?;
        for s in samples {
            set.insert(s)?;
        }
        Ok(set)
    }

    /// Inserts the quantized sample. Returns `false` if an equal element was
    /// already present.
    pub fn insert(&mut self, sample: Sample) -> Result<bool> {
        sample.ensure_shape(&self.shape)?;
        let q = sample.quantize(self.grid)?;
        Ok(self.elements.insert(q))
    }

    pub fn contains(&self, sample: &Sample) -> bool {
        match sample.quantize(self.grid) {
            Ok(q) => self.elements.contains(&q),
            Err(_) => false,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn grid(&self) -> f64 {
        self.grid
    }

    /// Elements in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.elements.iter()
    }

    pub fn to_vec(&self) -> Vec<Sample> {
        self.elements.iter().cloned().collect()
    }

    pub fn is_subset(&self, other: &FiniteSet) -> bool {
        self.elements.is_subset(&other.elements)
    }

    /// Reads a JSON array of flat sample arrays. Order and duplicates are
    /// irrelevant.
    pub fn from_json(shape: Shape, grid: f64, json: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = serde_json::from_str(json)?;
        let samples = rows
            .into_iter()
            .map(|r| Sample::new(shape.clone(), r))
            .collect::<Result<Vec<_>>>()?;
        FiniteSet::from_samples(shape, grid, samples)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.elements.iter().collect::<Vec<_>>())?)
    }
}

impl Serialize for FiniteSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.elements.iter())
    }
}

/// Number of distinct elements.
pub fn diversity(set: &FiniteSet) -> usize {
    set.len()
}

/// Diversity of a raw list after quantization on `grid`.
pub fn diversity_of(samples: &[Sample], grid: f64) -> Result<usize> {
    let Some(first) = samples.first() else {
        check_grid(grid)?;
        return Ok(0);
    };
    let set = FiniteSet::from_samples(first.shape().clone(), grid, samples.iter().cloned())?;
    Ok(set.len())
}

pub(crate) fn ensure_nonempty(set: &FiniteSet) -> Result<()> {
    if set.is_empty() {
        Err(Error::EmptyInput)
    } else {
        Ok(())
    }
}
