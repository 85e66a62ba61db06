//! Shared fixtures for the benchmarks: the workloads are kept small enough
//! for criterion's repeated sampling while exercising each simulator.

use hsjd_core::{builtin, FpParams, Method, Model, SimConfig};

/// A named simulation workload.
pub struct Workload {
    pub name: &'static str,
    pub model: Model,
    pub config: SimConfig,
}

fn workload(name: &'static str, model: &str, method: Method, step: f64, t_max: f64, runs: usize) -> Workload {
    let config = SimConfig::new(method, step, t_max, t_max)
        .with_runs(runs)
        .with_seed(1);
    Workload {
        name,
        model: builtin(model).expect("built-in model"),
        config: SimConfig { workers: 1, ..config },
    }
}

/// Ensemble workloads, one per simulator.
pub fn workloads() -> Vec<Workload> {
    vec![
        workload("crazy_clock/ssa/100", "crazy_clock", Method::Ssa, 1e-5, 0.002, 100),
        workload("crazy_clock/hsde/100", "crazy_clock", Method::Hsde, 1e-5, 0.002, 100),
        workload("crazy_clock/sde/100", "crazy_clock", Method::Sde, 1e-5, 0.002, 100),
        workload("crazy_clock/ode", "crazy_clock", Method::Ode, 1e-6, 0.002, 1),
        workload("crazy_clock_switch/hode/100", "crazy_clock_switch", Method::Hode, 1e-5, 0.003, 100),
        workload("viral/hsde/10", "viral", Method::Hsde, 0.05, 200.0, 10),
        workload("viral/ssa/1", "viral", Method::Ssa, 0.05, 50.0, 1),
        workload("transcription/hsde/10", "transcription", Method::Hsde, 0.05, 720.0, 10),
    ]
}

/// Fokker-Planck workload on a coarse grid.
pub fn fokker_planck_params() -> FpParams {
    let mut p = FpParams::crazy_clock(0.0016, 0.0016);
    p.cells = 500;
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workload_configs_are_valid() {
        for w in workloads() {
            w.config.validate().unwrap_or_else(|e| panic!("{}: {e}", w.name));
            assert_eq!(w.config.workers, 1);
        }
    }
}
