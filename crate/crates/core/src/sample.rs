//! Fixed-shape numeric samples and canonical quantization.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Grid used when an architecture does not declare one.
pub const DEFAULT_GRID: f64 = 1e-6;

/// Ordered list of extents. Every extent is at least one.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidShape(dims));
        }
        Ok(Shape(dims))
    }

    /// One-dimensional shape with `len` elements.
    pub fn vector(len: usize) -> Result<Self> {
        Shape::new(vec![len])
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn element_count(&self) -> usize {
        self.0.iter().product()
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Shape::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(s: Shape) -> Self {
        s.0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", dims.join("x"))
    }
}

/// A finite vector of `f64` laid out over a [`Shape`].
///
/// Negative zero is normalized to zero at construction, so numeric
/// equality and the total order used for sets agree.
#[derive(Clone, Debug)]
pub struct Sample {
    shape: Shape,
    values: Vec<f64>,
}

impl fmt::Display for Sample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let values: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        write!(f, "[{}]", values.join(", "))
    }
}

impl Sample {
    pub fn new(shape: Shape, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.element_count() {
            return Err(Error::LengthMismatch {
                expected: shape.element_count(),
                found: values.len(),
            });
        }
        for (index, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index, value: *v });
            }
            if *v == 0.0 {
                *v = 0.0;
            }
        }
        Ok(Sample { shape, values })
    }

    /// Flat vector sample.
    pub fn vector(values: Vec<f64>) -> Result<Self> {
        let shape = Shape::vector(values.len())?;
        Sample::new(shape, values)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn ensure_shape(&self, expected: &Shape) -> Result<()> {
        if &self.shape != expected {
            return Err(Error::ShapeMismatch {
                expected: expected.clone(),
                found: self.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn squared_distance(&self, other: &Sample) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn distance(&self, other: &Sample) -> f64 {
        self.squared_distance(other).sqrt()
    }

    /// Rounds every scalar to the nearest multiple of `grid`.
    pub fn quantize(&self, grid: f64) -> Result<Sample> {
        let values = self
            .values
            .iter()
            .map(|&v| quantize_scalar(v, grid))
            .collect::<Result<Vec<_>>>()?;
        Sample::new(self.shape.clone(), values)
    }
}

/// Free-function form of [`Sample::quantize`].
pub fn canonical_quantize(x: &Sample, grid: f64) -> Result<Sample> {
    x.quantize(grid)
}

pub(crate) fn check_grid(grid: f64) -> Result<()> {
    if grid.is_finite() && grid > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidGrid(grid))
    }
}

/// Nearest multiple of `grid`, ties away from zero.
pub fn quantize_scalar(v: f64, grid: f64) -> Result<f64> {
    check_grid(grid)?;
    if !v.is_finite() {
        return Err(Error::NonFinite { index: 0, value: v });
    }
    // Grids like 1e-6 or 0.25 are reciprocals of integers; dividing by the
    // integer lands on the nearest decimal (0.05, not 0.049999...).
    let inv = (1.0 / grid).round();
    let q = if inv >= 1.0 && 1.0 / inv == grid {
        (v * inv).round() / inv
    } else {
        (v / grid).round() * grid
    };
    if !q.is_finite() {
        return Err(Error::NonFinite { index: 0, value: q });
    }
    Ok(if q == 0.0 { 0.0 } else { q })
}

impl PartialEq for Sample {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Sample {}

impl PartialOrd for Sample {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Lexicographic on values; this is the canonical training order.
impl Ord for Sample {
    fn cmp(&self, other: &Self) -> Ordering {
        self.shape.cmp(&other.shape).then_with(|| {
            for (a, b) in self.values.iter().zip(&other.values) {
                match a.total_cmp(b) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            self.values.len().cmp(&other.values.len())
        })
    }
}

impl Hash for Sample {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.shape.hash(state);
        for v in &self.values {
            v.to_bits().hash(state);
        }
    }
}

/// Serializes as a flat array; the shape travels in a sidecar.
impl Serialize for Sample {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.values.serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(values: &[f64]) -> Sample {
        Sample::vector(values.to_vec()).unwrap()
    }

    #[test]
    fn shape_rejects_zero_and_empty() {
        assert!(Shape::new(vec![]).is_err());
        assert!(Shape::new(vec![3, 0]).is_err());
        assert_eq!(Shape::new(vec![2, 3]).unwrap().element_count(), 6);
    }

    #[test]
    fn sample_rejects_bad_values() {
        let s = Shape::vector(2).unwrap();
        assert!(matches!(
            Sample::new(s.clone(), vec![1.0]),
            Err(Error::LengthMismatch { expected: 2, found: 1 })
        ));
        assert!(matches!(
            Sample::new(s.clone(), vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(Sample::new(s, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(v(&[0.24, 0.26]).quantize(0.5).unwrap(), v(&[0.0, 0.5]));
        assert_eq!(v(&[1.0]).quantize(0.5).unwrap(), v(&[1.0]));
        assert_eq!(v(&[-0.26]).quantize(0.5).unwrap(), v(&[-0.5]));
        assert!(v(&[1.0]).quantize(0.0).is_err());
        assert!(v(&[1.0]).quantize(-1.0).is_err());
    }

    #[test]
    fn negative_zero_is_normalized() {
        let q = v(&[-0.1]).quantize(0.5).unwrap();
        assert_eq!(q.values()[0].to_bits(), 0.0f64.to_bits());
    }

    // Oracle: nearest grid point by comparing the two candidate neighbours.
    fn oracle_round(x: f64, grid: f64) -> f64 {
        let lo = (x / grid).floor();
        let hi = lo + 1.0;
        let dlo = x - lo * grid;
        let dhi = hi * grid - x;
        // Ties go away from zero.
        let k = if dlo < dhi {
            lo
        } else if dhi < dlo || x >= 0.0 {
            hi
        } else {
            lo
        };
        k * grid
    }

    #[test]
    fn quantize_matches_scalar_rounding_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-10.0..10.0);
            let q = quantize_scalar(x, 0.5).unwrap();
            assert_eq!(q, oracle_round(x, 0.5), "x = {x}");
        }
        assert_eq!(quantize_scalar(-0.26, 0.5).unwrap(), -0.5);
    }

    proptest! {
        #[test]
        fn quantize_is_idempotent_and_keeps_shape(
            xs in prop::collection::vec(-1.0e3f64..1.0e3, 1..16),
            grid in prop::sample::select(vec![1e-6, 1e-3, 0.25, 0.5, 1.0]),
        ) {
            let s = Sample::vector(xs).unwrap();
            let once = s.quantize(grid).unwrap();
            let twice = once.quantize(grid).unwrap();
            prop_assert_eq!(once.shape(), s.shape());
            prop_assert_eq!(&once, &twice);
        }

        #[test]
        fn equality_is_an_equivalence(
            a in prop::collection::vec(-5.0f64..5.0, 3),
            b in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            let a = Sample::vector(a).unwrap().quantize(0.5).unwrap();
            let b = Sample::vector(b).unwrap().quantize(0.5).unwrap();
            prop_assert_eq!(&a, &a);
            prop_assert_eq!(a == b, b == a);
            let c = b.clone();
            if a == b { prop_assert_eq!(&a, &c); }
        }
    }
}
