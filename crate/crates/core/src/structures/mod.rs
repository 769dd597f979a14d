//! Structures composed from primitives.

pub mod associative;
pub mod column;
pub mod graph;
pub mod pyramid;

pub use associative::{observed_tuples, train_associative_layer, AssociativeLayer};
pub use column::{train_column, DiscriminatoryColumn};
pub use graph::{ArchitectureGraph, EdgeConfig, GraphConfig, NodeConfig, NodeKind, NodeParams, TrainedGraph};
pub use pyramid::{train_pyramid, DiscriminatoryPyramid, PyramidParams};

use crate::error::{Error, Result};

/// Upper bound on hierarchy depth; a pyramid level holds 2^level primitives.
pub const MAX_LEVELS: usize = 16;

pub(crate) fn check_levels(levels: usize) -> Result<()> {
    if levels == 0 || levels > MAX_LEVELS {
        return Err(Error::InvalidLevels {
            max: MAX_LEVELS,
            found: levels,
        });
    }
    Ok(())
}
