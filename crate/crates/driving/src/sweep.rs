//! Batch runs over many scenario variants, one simulation per job.

use arbitration_core::EvalMode;

use crate::assembly::AssemblyError;
use crate::scenario::LoadedScenario;
use crate::sim::RunTrace;

/// One simulation: a scenario and the seed to run it with.
#[derive(Debug, Clone)]
pub struct Job {
    pub scenario: LoadedScenario,
    pub seed: u64,
}

fn run_one(job: &Job) -> Result<RunTrace, AssemblyError> {
    job.scenario.run(job.seed, EvalMode::Sequential)
}

/// Runs every job; results keep the job order. With `EvalMode::Parallel`
/// and the `parallel` feature, jobs run on the rayon pool.
pub fn run_batch(jobs: &[Job], mode: EvalMode) -> Vec<Result<RunTrace, AssemblyError>> {
    match mode {
        #[cfg(feature = "parallel")]
        EvalMode::Parallel => {
            use rayon::prelude::*;
            jobs.par_iter().map(run_one).collect()
        }
        _ => jobs.iter().map(run_one).collect(),
    }
}
