//! Exact simulation of the original chain by the First-Reaction method.

use super::{run_rng, SimConfig, TerminalFlag, Trajectory};
use crate::error::Result;
use crate::kinetics::{intensity_with, HybridState};
use crate::model::Model;
use rand::Rng;
use rand_distr::Exp1;

/// Exact path of run 0.
pub fn simulate_ssa(model: &Model, config: &SimConfig) -> Result<Trajectory> {
    simulate_ssa_run(model, config, 0)
}

/// Exact path of run `run_index`. At every state one exponential delay is
/// drawn per enabled reaction (in reaction order) and the earliest fires;
/// ties go to the lowest reaction index. The sample at a recording time is
/// the state holding at that time.
pub(crate) fn simulate_ssa_run(model: &Model, config: &SimConfig, run_index: usize) -> Result<Trajectory> {
    config.validate()?;
    let mut rng = run_rng(config.seed, run_index);
    let times = config.record_times();
    let params = model.param_values();
    let info = model.reaction_info();

    // Reactions whose intensity must be refreshed after each reaction fires.
    let affected: Vec<Vec<usize>> = info
        .iter()
        .map(|fired| {
            (0..info.len())
                .filter(|&r| info[r].deps.iter().any(|d| fired.change.iter().any(|(i, _)| i == d)))
                .collect()
        })
        .collect();

    let mut counts: Vec<f64> = model.init_counts().iter().map(|&c| c as f64).collect();
    let mut rates = (0..info.len())
        .map(|r| intensity_with(model, &params, &counts, r))
        .collect::<Result<Vec<f64>>>()?;
    let mut t = 0.0;
    let mut samples = Vec::with_capacity(times.len());
    let mut next = 0;
    let mut flag = TerminalFlag::Completed;
    let snapshot = |counts: &[f64], time: f64| HybridState {
        fluid: Vec::new(),
        discrete: counts.iter().map(|&c| c as i64).collect(),
        time,
    };

    loop {
        let mut best: Option<(f64, usize)> = None;
        for (r, &q) in rates.iter().enumerate() {
            if q > 0.0 {
                let e: f64 = rng.sample(Exp1);
                let tau = e / q;
                if best.is_none_or(|(b, _)| tau < b) {
                    best = Some((tau, r));
                }
            }
        }
        let t_next = best.map_or(f64::INFINITY, |(tau, _)| t + tau);
        while next < times.len() && times[next] < t_next {
            samples.push((times[next], snapshot(&counts, times[next])));
            next += 1;
        }
        if next == times.len() {
            if best.is_none() {
                flag = TerminalFlag::Absorbed;
            }
            break;
        }
        let (_, r) = best.expect("finite next event time");
        for &(i, l) in &info[r].change {
            counts[i] += l as f64;
        }
        for &a in &affected[r] {
            rates[a] = intensity_with(model, &params, &counts, a)?;
        }
        t = t_next;
    }
    Ok(Trajectory {
        run_index,
        samples,
        terminal_flag: flag,
        repair_failed: false,
    })
}
