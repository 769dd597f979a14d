//! Discriminatory column: one primitive per level, each level trained on the
//! output set of the level below.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primitive::{output_set, ArchetypeId, Codebook, Primitive, PrimitiveSpec};
use crate::sample::{Sample, Shape};
use crate::set::{ensure_nonempty, FiniteSet};

use super::check_levels;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatoryColumn {
    shape: Shape,
    grid: f64,
    /// Index 0 is the top level.
    levels: Vec<Codebook>,
}

pub fn train_column(inputs: &FiniteSet, levels: usize, spec: &PrimitiveSpec) -> Result<DiscriminatoryColumn> {
    check_levels(levels)?;
    ensure_nonempty(inputs)?;
    let mut trained = Vec::with_capacity(levels);
    let mut current = inputs.clone();
    for _ in 0..levels {
        let cb = spec.train(&current)?;
        current = output_set(&cb, &current)?;
        trained.push(cb);
    }
    trained.reverse();
    Ok(DiscriminatoryColumn {
        shape: inputs.shape().clone(),
        grid: inputs.grid(),
        levels: trained,
    })
}

impl DiscriminatoryColumn {
    pub fn from_levels(levels: Vec<Codebook>) -> Result<Self> {
        let top = levels.first().ok_or(Error::InvalidLevels {
            max: super::MAX_LEVELS,
            found: 0,
        })?;
        let shape = top.shape().clone();
        let grid = top.grid();
        for cb in &levels {
            if cb.shape() != &shape {
                return Err(Error::ShapeMismatch {
                    expected: shape,
                    found: cb.shape().clone(),
                });
            }
        }
        Ok(DiscriminatoryColumn { shape, grid, levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Level codebooks, top first.
    pub fn levels(&self) -> &[Codebook] {
        &self.levels
    }

    /// Output set of each level over `inputs`, bottom first.
    pub fn level_output_sets(&self, inputs: &FiniteSet) -> Result<Vec<FiniteSet>> {
        let mut sets = Vec::with_capacity(self.depth());
        let mut current = inputs.clone();
        for cb in self.levels.iter().rev() {
            current = output_set(cb, &current)?;
            sets.push(current.clone());
        }
        Ok(sets)
    }

    /// Archetype id at every level for `x`, bottom first.
    pub fn trace(&self, x: &Sample) -> Result<Vec<(ArchetypeId, Sample)>> {
        x.ensure_shape(&self.shape)?;
        let mut out = Vec::with_capacity(self.depth());
        let mut current = x.clone();
        for cb in self.levels.iter().rev() {
            let (id, o) = cb.encode(&current)?;
            current = o.clone();
            out.push((id, o));
        }
        Ok(out)
    }

    /// Same column with one level's codebook replaced (top = 0).
    pub fn with_level(&self, level: usize, cb: Codebook) -> Result<Self> {
        let mut levels = self.levels.clone();
        let len = levels.len();
        *levels.get_mut(level).ok_or(Error::InvalidLevels { max: len, found: level })? = cb;
        DiscriminatoryColumn::from_levels(levels)
    }
}

/// Projects a top archetype level by level down to a member of the
/// original input set.
pub fn column_project(c: &DiscriminatoryColumn, top: ArchetypeId) -> Result<Sample> {
    c.project(top)
}

impl Primitive for DiscriminatoryColumn {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn grid(&self) -> f64 {
        self.grid
    }

    fn archetype_count(&self) -> usize {
        self.levels[0].archetype_count()
    }

    fn encode(&self, x: &Sample) -> Result<(ArchetypeId, Sample)> {
        self.trace(x)?.pop().ok_or(Error::Untrained)
    }

    fn project(&self, id: ArchetypeId) -> Result<Sample> {
        let mut current = self.levels[0].project(id)?;
        for cb in &self.levels[1..] {
            let below = cb.locate(&current).ok_or(Error::NoMatchingArchetype)?;
            current = cb.project(below)?;
        }
        Ok(current)
    }

    fn locate(&self, archetype: &Sample) -> Option<ArchetypeId> {
        self.levels[0].locate(archetype)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::DEFAULT_GRID;

    fn s(x: f64) -> Sample {
        Sample::vector(vec![x]).unwrap()
    }

    fn set(xs: &[f64]) -> FiniteSet {
        FiniteSet::from_samples(Shape::vector(1).unwrap(), DEFAULT_GRID, xs.iter().map(|&x| s(x))).unwrap()
    }

    const R: PrimitiveSpec = PrimitiveSpec::Exemplar { merge_radius: 0.5 };

    #[test]
    fn single_level_is_the_primitive() {
        let inputs = set(&[0.0, 0.1, 5.0]);
        let c = train_column(&inputs, 1, &R).unwrap();
        let p = R.train(&inputs).unwrap();
        assert_eq!(c.levels(), std::slice::from_ref(&p));
        assert_eq!(column_project(&c, ArchetypeId(1)).unwrap(), p.project(ArchetypeId(1)).unwrap());
    }

    #[test]
    fn two_levels_project_back_to_five() {
        let inputs = set(&[0.0, 0.1, 5.0]);
        let c = train_column(&inputs, 2, &R).unwrap();
        // level 1: {0.05, 5}; level 0 force-merges them into one archetype
        assert_eq!(c.archetype_count(), 1);
        let top = c.encode(&s(5.0)).unwrap().0;
        let back = column_project(&c, top).unwrap();
        assert!(inputs.contains(&back));
        assert_eq!(c.encode(&back).unwrap().0, top);

        let wide = train_column(&set(&[0.0, 0.1, 5.0, 9.0, 9.1, 30.0]), 2, &R).unwrap();
        let top = wide.encode(&s(30.0)).unwrap().0;
        let back = column_project(&wide, top).unwrap();
        assert_eq!(wide.encode(&back).unwrap().0, top);
    }

    #[test]
    fn cardinalities_strictly_decrease() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 10.0).collect();
        let inputs = set(&xs);
        let c = train_column(&inputs, 3, &PrimitiveSpec::Exemplar { merge_radius: 0.4 }).unwrap();
        let sets = c.level_output_sets(&inputs).unwrap();
        let mut prev = inputs.len();
        for s in sets {
            assert!(s.len() < prev, "{} !< {}", s.len(), prev);
            prev = s.len();
        }
    }

    #[test]
    fn rejects_zero_levels() {
        assert!(train_column(&set(&[0.0, 1.0]), 0, &R).is_err());
    }

    #[test]
    fn every_top_archetype_round_trips() {
        let xs: Vec<f64> = (0..60).map(|i| ((i * 7919) % 101) as f64 / 10.0).collect();
        let inputs = set(&xs);
        let c = train_column(&inputs, 3, &PrimitiveSpec::Exemplar { merge_radius: 0.3 }).unwrap();
        for k in 0..c.archetype_count() {
            let back = column_project(&c, ArchetypeId(k)).unwrap();
            assert!(inputs.contains(&back));
            assert_eq!(c.encode(&back).unwrap().0, ArchetypeId(k));
        }
        assert!(column_project(&c, ArchetypeId(c.archetype_count())).is_err());
    }
}
