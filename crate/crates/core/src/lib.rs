//! Simulation of density-dependent reaction networks: exact stochastic
//! simulation, fluid (ODE) and diffusion (SDE) limits, jump diffusions and
//! hybrid switching jump diffusions in which part of the species stay
//! discrete, plus a Fokker–Planck solver for one-dimensional cases.
//!
//! A [`Model`] is built from the text DSL ([`parse_model`]) or taken from
//! [`builtin`]; [`run_ensemble`] produces an [`Ensemble`] of paths for any
//! [`Method`], and [`stats`] turns ensembles into means and distributions.

pub mod builtin;
pub mod error;
pub mod expr;
pub mod fokker_planck;
pub mod kinetics;
pub mod model;
pub mod parser;
pub mod simulate;
pub mod stats;

pub use builtin::{builtin, crazy_clock, BUILTIN_NAMES};
pub use error::{Error, Result};
pub use expr::{parse_rate_expr, EvalContext, RateExpr, Symbols};
pub use fokker_planck::{
    default_cells, fp_mass_accounting, fp_solve, fp_solve_switched, FpGrid, FpParams, FpSolver, FpSwitchedParams, MassAccount,
};
pub use kinetics::{
    boundary_map, density_f, density_f_by_change, drift, intensity, jump_intensity, partition_static,
    split_dynamic, EventPartition, HybridState, Layout, Slot,
};
pub use model::{
    change_vector, derive_bounds, detect_p_invariants, validate_model, Bounds, Model, PInvariant, Param,
    PartitionMode, RateLaw, Reaction, Species, SpeciesKind,
};
pub use parser::{parse_bounds_file, parse_model, serialize_model};
pub use simulate::{
    choose_dt, clamp_and_repair, hsjd_step, run_ensemble, run_rng, simulate_hode, simulate_hsjd, simulate_jd,
    simulate_ode, simulate_run, simulate_sde, simulate_ssa, Method, SdeBoundary, SimConfig, TerminalFlag,
    Trajectory,
};
pub use stats::{ensemble_mean, ks_distance, mean_stderr, pmf_from_values, write_mean_csv, ks_distance_to_pmf, pmf_at_time, Ensemble, MeanPoint, Pmf};
