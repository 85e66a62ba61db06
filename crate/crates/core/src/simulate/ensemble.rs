//! Independent runs, optionally on a thread pool.

use super::engine::{simulate_euler, Engine};
use super::ssa::simulate_ssa_run;
use super::{Method, SimConfig, Trajectory};
use crate::error::{Error, Result};
use crate::kinetics::Layout;
use crate::model::Model;
use crate::stats::Ensemble;
use rayon::prelude::*;

/// Path of run `run_index` under `config.method`. The result depends only
/// on `(model, config, run_index)`.
pub fn simulate_run(model: &Model, config: &SimConfig, run_index: usize) -> Result<Trajectory> {
    match config.method {
        Method::Ssa => simulate_ssa_run(model, config, run_index),
        _ => simulate_euler(model, config, run_index),
    }
}

/// Layout in which the states of `method` are expressed.
pub(crate) fn method_layout(model: &Model, config: &SimConfig) -> Result<Layout> {
    Ok(match config.method {
        Method::Ssa => Layout::all_discrete(model),
        _ => Engine::for_method(model, config)?.layout().clone(),
    })
}

/// Runs `config.runs` independent paths. Run `k` uses random stream `k` of
/// `config.seed`, so the ensemble is identical for any worker count.
pub fn run_ensemble(model: &Model, config: &SimConfig) -> Result<Ensemble> {
    config.validate()?;
    let layout = method_layout(model, config)?;
    let runs = if config.method.is_stochastic() { config.runs } else { 1 };
    let work = |k: usize| simulate_run(model, config, k);
    let trajectories: Vec<Trajectory> = if config.workers == 1 || runs == 1 {
        (0..runs).map(work).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| (0..runs).into_par_iter().map(work).collect::<Result<_>>())?
    };
    Ok(Ensemble::new(
        model.species.iter().map(|s| s.name.clone()).collect(),
        layout,
        config.record_times(),
        trajectories,
    ))
}
