//! Recorded (input, output) pairs of a processing run.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::primitive::Primitive;
use crate::set::FiniteSet;
use crate::sample::Sample;

/// Pairs produced by running a process over an input set, together with the
/// input and output sets the run is judged against.
#[derive(Clone, Debug)]
pub struct MappingLog {
    pairs: Vec<(Sample, Sample)>,
    input_set: FiniteSet,
    output_set: FiniteSet,
}

impl MappingLog {
    /// Pairs are quantized on the grid of the respective set.
    pub fn new(pairs: Vec<(Sample, Sample)>, input_set: FiniteSet, output_set: FiniteSet) -> Result<Self> {
        let pairs = pairs
            .into_iter()
            .map(|(i, o)| Ok((i.quantize(input_set.grid())?, o.quantize(output_set.grid())?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MappingLog {
            pairs,
            input_set,
            output_set,
        })
    }

    /// Derives both sets from the pairs themselves.
    pub fn from_pairs(pairs: Vec<(Sample, Sample)>, grid: f64) -> Result<Self> {
        let (first_in, first_out) = match pairs.first() {
            Some((i, o)) => (i.shape().clone(), o.shape().clone()),
            None => return Err(crate::error::Error::EmptyInput),
        };
        let input_set = FiniteSet::from_samples(first_in, grid, pairs.iter().map(|p| p.0.clone()))?;
        let output_set = FiniteSet::from_samples(first_out, grid, pairs.iter().map(|p| p.1.clone()))?;
        MappingLog::new(pairs, input_set, output_set)
    }

    /// Runs `process` over every element of `inputs`.
    pub fn record<P: Primitive + ?Sized>(process: &P, inputs: &FiniteSet) -> Result<Self> {
        let items = inputs.to_vec();
        let outputs = crate::par::map(&items, |x| process.encode(x).map(|(_, o)| o))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let output_set = FiniteSet::from_samples(process.shape().clone(), inputs.grid(), outputs.iter().cloned())?;
        MappingLog::new(items.into_iter().zip(outputs).collect(), inputs.clone(), output_set)
    }

    pub fn pairs(&self) -> &[(Sample, Sample)] {
        &self.pairs
    }

    pub fn input_set(&self) -> &FiniteSet {
        &self.input_set
    }

    pub fn output_set(&self) -> &FiniteSet {
        &self.output_set
    }

    /// First input that is paired with two different outputs.
    pub fn non_function_witness(&self) -> Option<(Sample, Sample, Sample)> {
        let mut seen: BTreeMap<&Sample, &Sample> = BTreeMap::new();
        for (i, o) in &self.pairs {
            if let Some(prev) = seen.insert(i, o) {
                if prev != o {
                    return Some((i.clone(), prev.clone(), o.clone()));
                }
            }
        }
        None
    }

    /// Two distinct inputs sharing one output, if any.
    pub fn shared_output_witness(&self) -> Option<(Sample, Sample, Sample)> {
        let mut first: BTreeMap<&Sample, &Sample> = BTreeMap::new();
        for (i, o) in &self.pairs {
            match first.get(o) {
                Some(&prev) if prev != i => return Some((prev.clone(), i.clone(), o.clone())),
                Some(_) => {}
                None => {
                    first.insert(o, i);
                }
            }
        }
        None
    }

    /// Output set element hit by no pair.
    pub fn unreached_output(&self) -> Option<Sample> {
        self.output_set
            .iter()
            .find(|o| !self.pairs.iter().any(|(_, po)| po == *o))
            .cloned()
    }

    /// Sample used by a pair but absent from the declared sets, or an input
    /// set element that no pair covers.
    pub fn domain_violation(&self) -> Option<Sample> {
        for (i, o) in &self.pairs {
            if !self.input_set.contains(i) {
                return Some(i.clone());
            }
            if !self.output_set.contains(o) {
                return Some(o.clone());
            }
        }
        self.input_set
            .iter()
            .find(|x| !self.pairs.iter().any(|(pi, _)| pi == *x))
            .cloned()
    }
}

/// True iff the log describes a total function from its input set onto its
/// output set.
pub fn log_is_surjective_function(log: &MappingLog) -> bool {
    log.non_function_witness().is_none() && log.unreached_output().is_none() && log.domain_violation().is_none()
}
