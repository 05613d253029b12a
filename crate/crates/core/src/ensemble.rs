//! Parallel trajectory ensembles with reproducible seeding.
//!
//! Trajectory `j` draws its uniform numbers from a ChaCha8 stream seeded with
//! [`child_seed`]`(master_seed, j)`. Trajectories are grouped into fixed
//! chunks of [`CHUNK`] consecutive indices; each chunk is accumulated in
//! index order and the chunk accumulators are merged in chunk order, so the
//! result does not depend on how many workers ran the chunks.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::observables::{Observable, TimeSeries};
use crate::stats::{EnsembleAccumulator, EnsembleSummary};
use crate::unravel::{TrajectoryState, Unraveling};

pub const CHUNK: usize = 32;

/// SplitMix64 output number `index + 1` for the state `master`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub summary: EnsembleSummary,
    pub master_seed: u64,
}

impl EnsembleResult {
    pub fn times(&self) -> &[f64] {
        &self.summary.times
    }

    pub fn n_traj(&self) -> u64 {
        self.summary.count
    }

    pub fn mean(&self, name: &str) -> Option<&[f64]> {
        let k = self.summary.names.iter().position(|n| n == name)?;
        Some(&self.summary.mean[k])
    }

    pub fn stderr(&self, name: &str) -> Option<&[f64]> {
        let k = self.summary.names.iter().position(|n| n == name)?;
        Some(&self.summary.stderr[k])
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EnsembleParams {
    pub t_max: f64,
    pub n_traj: usize,
    pub master_seed: u64,
    pub sample_stride: usize,
    /// Worker threads; 0 picks the rayon default.
    pub workers: usize,
}

/// Mean and standard error of every observable over `n_traj` trajectories.
pub fn run_ensemble(
    unraveling: &Unraveling<'_>,
    initial: &TrajectoryState,
    observables: &[Observable],
    params: EnsembleParams,
) -> Result<EnsembleResult> {
    if params.n_traj == 0 {
        return Err(Error::InvalidArgument("n_traj must be at least 1".into()));
    }
    let run = |j: usize| -> Result<TimeSeries> {
        unraveling
            .run_trajectory(
                initial,
                params.t_max,
                child_seed(params.master_seed, j as u64),
                observables,
                params.sample_stride,
            )
            .map_err(|e| Error::Trajectory {
                index: j,
                source: Box::new(e),
            })
    };

    // Trajectory 0 fixes the grid and surfaces setup errors before fan-out.
    let first = run(0)?;
    let template = EnsembleAccumulator::new(first.times.clone(), first.names.clone());

    let chunks: Vec<(usize, usize)> = (0..params.n_traj)
        .step_by(CHUNK)
        .map(|start| (start, (start + CHUNK).min(params.n_traj)))
        .collect();
    let work = |&(start, end): &(usize, usize)| -> Result<EnsembleAccumulator> {
        let mut acc = template.clone();
        for j in start..end {
            if j == 0 {
                acc.accumulate(&first)?;
            } else {
                acc.accumulate(&run(j)?)?;
            }
        }
        Ok(acc)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(params.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let partials: Vec<Result<EnsembleAccumulator>> =
        pool.install(|| chunks.par_iter().map(work).collect());

    let mut total = template.clone();
    for partial in partials {
        total.merge(&partial?)?;
    }
    Ok(EnsembleResult {
        summary: total.finalize(),
        master_seed: params.master_seed,
    })
}
