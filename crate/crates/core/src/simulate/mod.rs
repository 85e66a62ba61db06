//! Path simulation: exact SSA, Euler ODE, Euler–Maruyama SDE, jump
//! diffusion, hybrid switching jump diffusion and its noise-free PDMP limit.

mod engine;
mod ensemble;
mod ssa;

pub use engine::{choose_dt, clamp_and_repair, hsjd_step, simulate_hode, simulate_hsjd, simulate_jd, simulate_ode, simulate_sde};
pub use ensemble::{run_ensemble, simulate_run};
pub use ssa::simulate_ssa;

use crate::error::{Error, Result};
use crate::kinetics::HybridState;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// Solution regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Exact First-Reaction simulation of the original chain.
    Ssa,
    /// Deterministic Euler integration of the fluid limit, all species fluid.
    Ode,
    /// Euler–Maruyama diffusion approximation, all species fluid.
    Sde,
    /// Jump diffusion: all species fluid, boundary events as jumps.
    Jd,
    /// Hybrid switching jump diffusion over the declared fluid/discrete split.
    Hsde,
    /// Noise-free hybrid limit (switched ODEs with discrete jumps).
    Hode,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Ssa, Method::Ode, Method::Sde, Method::Jd, Method::Hsde, Method::Hode];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ssa => "ssa",
            Method::Ode => "ode",
            Method::Sde => "sde",
            Method::Jd => "jd",
            Method::Hsde => "hsde",
            Method::Hode => "hode",
        }
    }

    /// Whether a path depends on the random stream.
    pub fn is_stochastic(self) -> bool {
        self != Method::Ode
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Case-insensitive; `sim` and `hsjd` are accepted as aliases.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ssa" | "sim" => Method::Ssa,
            "ode" => Method::Ode,
            "sde" => Method::Sde,
            "jd" => Method::Jd,
            "hsde" | "hsjd" => Method::Hsde,
            "hode" => Method::Hode,
            _ => return Err(Error::Config(format!("unknown method '{s}'"))),
        })
    }
}

/// What the SDE does when a component leaves its bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SdeBoundary {
    /// Clamp to the bound and continue.
    #[default]
    Clamp,
    /// Clamp, freeze the path and flag it.
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub method: Method,
    /// Maximum Euler step.
    pub step_max: f64,
    pub t_max: f64,
    pub runs: usize,
    pub seed: u64,
    /// Output sampling period.
    pub record_interval: f64,
    /// Shrink the Euler step to a hundredth of the inverse largest drift term.
    pub adaptive_dt: bool,
    /// Brownian increments on; off gives the noise-free limit.
    pub noise: bool,
    pub sde_boundary: SdeBoundary,
    /// Worker threads for ensembles; 0 means all available cores.
    pub workers: usize,
}

impl SimConfig {
    pub fn new(method: Method, step_max: f64, t_max: f64, record_interval: f64) -> Self {
        SimConfig {
            method,
            step_max,
            t_max,
            runs: 1,
            seed: 0,
            record_interval,
            adaptive_dt: true,
            noise: true,
            sde_boundary: SdeBoundary::Clamp,
            workers: 0,
        }
    }

    pub fn with_runs(mut self, runs: usize) -> Self {
        self.runs = runs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be a positive finite number, got {v}")))
            }
        };
        positive(self.step_max, "step_max")?;
        positive(self.t_max, "t_max")?;
        positive(self.record_interval, "record_interval")?;
        if self.record_interval < self.step_max {
            return Err(Error::Config(format!(
                "record_interval ({}) must not be smaller than step_max ({})",
                self.record_interval, self.step_max
            )));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        Ok(())
    }

    /// Recording times `k * record_interval` up to `t_max`, with `t_max`
    /// appended when it is not on the grid.
    pub fn record_times(&self) -> Vec<f64> {
        let count = (self.t_max / self.record_interval * (1.0 + 1e-12)).floor() as usize;
        let mut times: Vec<f64> = (0..=count).map(|k| k as f64 * self.record_interval).collect();
        let last = *times.last().unwrap_or(&0.0);
        if self.t_max - last > 1e-9 * self.record_interval {
            times.push(self.t_max);
        } else if let Some(l) = times.last_mut() {
            *l = l.min(self.t_max);
        }
        times
    }
}

/// Why a path ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalFlag {
    Completed,
    /// Every intensity vanished; the state is final.
    Absorbed,
    /// The SDE left its bounds and was frozen there.
    SdeBoundaryStop,
}

/// One recorded path on the configuration's recording grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub run_index: usize,
    pub samples: Vec<(f64, HybridState)>,
    pub terminal_flag: TerminalFlag,
    /// Some conservation law could not be restored after clamping.
    pub repair_failed: bool,
}

/// Random stream of run `run_index`: ChaCha8 keyed by `seed`, with the run
/// index selecting an independent stream.
pub fn run_rng(seed: u64, run_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index as u64);
    rng
}
