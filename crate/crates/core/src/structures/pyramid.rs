//! Discriminatory pyramid: level `l` (top = 0) holds 2^l primitives. Every
//! bottom primitive sees the raw input; adjacent outputs are averaged
//! pairwise (left-right) on the way up.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::combiners::average;
use crate::error::{Error, Result};
use crate::primitive::{ArchetypeId, Codebook, Primitive, PrimitiveSpec};
use crate::sample::{Sample, Shape};
use crate::set::{ensure_nonempty, FiniteSet};

use super::check_levels;

/// Training parameters shared by every primitive of a pyramid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PyramidParams {
    pub primitive: PrimitiveSpec,
    /// Each exemplar primitive's radius is scaled by `1 + jitter·u`,
    /// `u` uniform in [-1, 1]. Zero keeps all instances identical.
    pub radius_jitter: f64,
    pub seed: u64,
}

impl PyramidParams {
    pub fn identical(primitive: PrimitiveSpec) -> Self {
        PyramidParams {
            primitive,
            radius_jitter: 0.0,
            seed: 0,
        }
    }

    /// Per-instance specs, top level first.
    fn instance_specs(&self, levels: usize) -> Vec<Vec<PrimitiveSpec>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..levels)
            .map(|l| {
                (0..1usize << l)
                    .map(|_| {
                        if self.radius_jitter == 0.0 {
                            self.primitive
                        } else {
                            let u: f64 = rng.random_range(-1.0..=1.0);
                            self.primitive.scaled(1.0 + self.radius_jitter * u)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatoryPyramid {
    shape: Shape,
    grid: f64,
    /// `levels[l]` holds 2^l codebooks; index 0 is the top.
    levels: Vec<Vec<Codebook>>,
}

pub fn train_pyramid(inputs: &FiniteSet, levels: usize, params: &PyramidParams) -> Result<DiscriminatoryPyramid> {
    check_levels(levels)?;
    ensure_nonempty(inputs)?;
    if params.radius_jitter < 0.0 || params.radius_jitter >= 1.0 || !params.radius_jitter.is_finite() {
        return Err(Error::InvalidRadius(params.radius_jitter));
    }
    let grid = inputs.grid();
    let specs = params.instance_specs(levels);
    let samples = inputs.to_vec();

    // flow[k][i]: input of primitive k at the current level for sample i
    let bottom = levels - 1;
    let mut flow: Vec<Vec<Sample>> = vec![samples; 1 << bottom];
    let mut trained: Vec<Vec<Codebook>> = Vec::with_capacity(levels);

    for level in (0..levels).rev() {
        let jobs: Vec<(usize, &Vec<Sample>)> = flow.iter().enumerate().collect();
        let level_specs = &specs[level];
        let results = crate::par::map(&jobs, |&(k, xs)| -> Result<(Codebook, Vec<Sample>)> {
            let set = FiniteSet::from_samples(inputs.shape().clone(), grid, xs.iter().cloned())?;
            let cb = level_specs[k].train(&set)?;
            let outs = xs.iter().map(|x| cb.encode(x).map(|(_, o)| o)).collect::<Result<Vec<_>>>()?;
            Ok((cb, outs))
        });
        let mut codebooks = Vec::with_capacity(results.len());
        let mut outputs = Vec::with_capacity(results.len());
        for r in results {
            let (cb, outs) = r?;
            codebooks.push(cb);
            outputs.push(outs);
        }
        if level > 0 {
            flow = outputs
                .chunks(2)
                .map(|pair| {
                    pair[0]
                        .iter()
                        .zip(&pair[1])
                        .map(|(a, b)| average(a, b, grid))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
        }
        trained.push(codebooks);
    }
    trained.reverse();
    Ok(DiscriminatoryPyramid {
        shape: inputs.shape().clone(),
        grid,
        levels: trained,
    })
}

impl DiscriminatoryPyramid {
    pub fn from_levels(levels: Vec<Vec<Codebook>>) -> Result<Self> {
        check_levels(levels.len())?;
        let top = levels[0].first().ok_or(Error::Untrained)?;
        let shape = top.shape().clone();
        let grid = top.grid();
        for (l, row) in levels.iter().enumerate() {
            if row.len() != 1 << l {
                return Err(Error::InvalidLevels {
                    max: 1 << l,
                    found: row.len(),
                });
            }
            if let Some(cb) = row.iter().find(|cb| cb.shape() != &shape) {
                return Err(Error::ShapeMismatch {
                    expected: shape,
                    found: cb.shape().clone(),
                });
            }
        }
        Ok(DiscriminatoryPyramid { shape, grid, levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Codebooks per level, top first.
    pub fn levels(&self) -> &[Vec<Codebook>] {
        &self.levels
    }

    /// True when every level holds bit-identical codebooks, which is the
    /// precondition for treating the pyramid as a column.
    pub fn is_homogeneous(&self) -> bool {
        self.levels.iter().all(|row| row.iter().all(|cb| cb == &row[0]))
    }

    /// Values flowing out of each level for `x`, bottom first. Entry `l` of
    /// the result holds the averaged level output (or the top output).
    pub fn trace(&self, x: &Sample) -> Result<Vec<Sample>> {
        x.ensure_shape(&self.shape)?;
        let bottom = self.depth() - 1;
        let mut flow: Vec<Sample> = vec![x.clone(); 1 << bottom];
        let mut out = Vec::with_capacity(self.depth());
        for level in (0..self.depth()).rev() {
            let encoded = self.levels[level]
                .iter()
                .zip(&flow)
                .map(|(cb, v)| cb.encode(v).map(|(_, o)| o))
                .collect::<Result<Vec<_>>>()?;
            flow = if level > 0 {
                encoded
                    .chunks(2)
                    .map(|p| average(&p[0], &p[1], self.grid))
                    .collect::<Result<Vec<_>>>()?
            } else {
                encoded
            };
            // left-most stream stands for the level
            out.push(flow[0].clone());
        }
        Ok(out)
    }

    /// Distinct values leaving each level over `inputs`, bottom first. A
    /// level with several primitives contributes every averaged stream.
    pub fn level_output_sets(&self, inputs: &FiniteSet) -> Result<Vec<FiniteSet>> {
        let bottom = self.depth() - 1;
        let mut flow: Vec<Vec<Sample>> = vec![inputs.to_vec(); 1 << bottom];
        let mut sets = Vec::with_capacity(self.depth());
        for level in (0..self.depth()).rev() {
            let encoded: Vec<Vec<Sample>> = self.levels[level]
                .iter()
                .zip(&flow)
                .map(|(cb, xs)| xs.iter().map(|x| cb.encode(x).map(|(_, o)| o)).collect())
                .collect::<Result<_>>()?;
            flow = if level > 0 {
                encoded
                    .chunks(2)
                    .map(|p| p[0].iter().zip(&p[1]).map(|(a, b)| average(a, b, self.grid)).collect())
                    .collect::<Result<_>>()?
            } else {
                encoded
            };
            // cardinality of the widest stream at this level
            let mut widest = FiniteSet::new(self.shape.clone(), self.grid)?;
            for stream in &flow {
                let set = FiniteSet::from_samples(self.shape.clone(), self.grid, stream.iter().cloned())?;
                if set.len() > widest.len() {
                    widest = set;
                }
            }
            sets.push(widest);
        }
        Ok(sets)
    }

    /// Pyramid with one codebook replaced.
    pub fn with_codebook(&self, level: usize, index: usize, cb: Codebook) -> Result<Self> {
        let mut levels = self.levels.clone();
        let depth = levels.len();
        let row = levels.get_mut(level).ok_or(Error::InvalidLevels { max: depth, found: level })?;
        let len = row.len();
        *row.get_mut(index).ok_or(Error::ArchetypeOutOfRange { id: index, len })? = cb;
        DiscriminatoryPyramid::from_levels(levels)
    }
}

/// Top-level archetype vector for `x`.
pub fn pyramid_encode(p: &DiscriminatoryPyramid, x: &Sample) -> Result<Sample> {
    p.encode(x).map(|(_, o)| o)
}

impl Primitive for DiscriminatoryPyramid {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn grid(&self) -> f64 {
        self.grid
    }

    fn archetype_count(&self) -> usize {
        self.levels[0][0].archetype_count()
    }

    fn encode(&self, x: &Sample) -> Result<(ArchetypeId, Sample)> {
        let top = self.trace(x)?.pop().ok_or(Error::Untrained)?;
        let id = self.levels[0][0].locate(&top).ok_or(Error::NoMatchingArchetype)?;
        Ok((id, top))
    }

    /// Available only for homogeneous pyramids, where averaging is the
    /// identity and the left-most path is a column.
    fn project(&self, id: ArchetypeId) -> Result<Sample> {
        if !self.is_homogeneous() {
            return Err(Error::HeterogeneousPyramid);
        }
        let mut current = self.levels[0][0].project(id)?;
        for row in &self.levels[1..] {
            let below = row[0].locate(&current).ok_or(Error::NoMatchingArchetype)?;
            current = row[0].project(below)?;
        }
        Ok(current)
    }

    fn locate(&self, archetype: &Sample) -> Option<ArchetypeId> {
        self.levels[0][0].locate(archetype)
    }
}
