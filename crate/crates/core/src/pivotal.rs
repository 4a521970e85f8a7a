//! Plus-pivotal traces: those whose removal alone makes an occurring event
//! fail.

use serde::{Deserialize, Serialize};

use crate::events::IncreasingEvent;
use crate::interlacement::Configuration;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotalReport {
    pub occurred: bool,
    pub n_plus: usize,
    /// Indices into the configuration's points.
    pub pivotal_indices: Vec<usize>,
}

/// Counts plus-pivotal traces by leave-one-out re-evaluation. Zero when the
/// event does not occur.
pub fn count_plus_pivotal(ev: &dyn IncreasingEvent, c: &Configuration<'_>) -> PivotalReport {
    if !ev.occurs(c) {
        return PivotalReport { occurred: false, n_plus: 0, pivotal_indices: Vec::new() };
    }
    let pivotal_indices: Vec<usize> = (0..c.len()).filter(|&i| !ev.occurs(&c.without(i))).collect();
    PivotalReport { occurred: true, n_plus: pivotal_indices.len(), pivotal_indices }
}
