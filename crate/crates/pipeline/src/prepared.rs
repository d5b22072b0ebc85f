//! Per-trace quantities that do not depend on the training fold: velocity,
//! zero profile over the full width grid, writing time, and a cache of
//! reconstruction distances keyed by the estimated widths.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::Result;
use pomh_core::manifest::ChildRecord;
use pomh_core::morphology::{zero_profile, ZeroProfile, MAX_WIDTH};
use pomh_core::pomh::{Distances, PomhFit};
use pomh_core::trace::{compute_velocity, total_pen_down_time, VelocitySeries};
use pomh_core::{SymbolId, Trace};

#[derive(Debug)]
pub struct PreparedTrace {
    pub velocity: VelocitySeries,
    pub profile: ZeroProfile,
    pub total_time: f64,
    distances: Mutex<HashMap<(usize, usize), Distances>>,
}

impl PreparedTrace {
    pub fn new(trace: &Trace) -> Result<Self> {
        let velocity = compute_velocity(trace)?;
        let profile = zero_profile(&velocity, MAX_WIDTH);
        Ok(PreparedTrace {
            velocity,
            profile,
            total_time: total_pen_down_time(trace),
            distances: Mutex::new(HashMap::new()),
        })
    }

    /// Reconstruction distances at closing widths `(wx, wy)`, memoised.
    pub fn distances(&self, trace: &Trace, wx: usize, wy: usize) -> Result<Distances> {
        if let Some(d) = self.distances.lock().expect("poisoned cache").get(&(wx, wy)) {
            return Ok(*d);
        }
        let d = PomhFit::at_widths(trace, &self.velocity, wx, wy)?.distances(trace);
        self.distances.lock().expect("poisoned cache").insert((wx, wy), d);
        Ok(d)
    }
}

/// A cohort with its fold-independent preprocessing.
#[derive(Debug)]
pub struct PreparedCohort {
    pub children: Vec<ChildRecord>,
    /// `[child][symbol]`, `None` where the symbol was not written.
    pub traces: Vec<Vec<Option<PreparedTrace>>>,
}

impl PreparedCohort {
    pub fn new(children: Vec<ChildRecord>) -> Result<Self> {
        let traces = children
            .par_iter()
            .map(|c| {
                c.traces
                    .iter()
                    .map(|t| t.as_ref().map(PreparedTrace::new).transpose())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedCohort { children, traces })
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.children.iter().map(|c| c.dysgraphia).collect()
    }

    pub fn get(&self, child: usize, symbol: SymbolId) -> Option<(&Trace, &PreparedTrace)> {
        let trace = self.children[child].trace(symbol)?;
        let prepared = self.traces[child][symbol.index()].as_ref()?;
        Some((trace, prepared))
    }
}
