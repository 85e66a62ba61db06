//! Subcommand implementations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use hsjd_core::fokker_planck::{default_cells, grid_too_coarse, write_grid_csv, write_masses_csv, FpSolver};
use hsjd_core::stats::write_mean_csv;
use hsjd_core::{
    builtin, ensemble_mean, fp_mass_accounting, parse_bounds_file, parse_model, pmf_at_time, run_ensemble,
    serialize_model, Ensemble, Error, FpGrid, FpParams, FpSwitchedParams, Method, Model, SimConfig, TerminalFlag,
    BUILTIN_NAMES,
};
use serde::Serialize;

use crate::args::{FokkerPlanckArgs, FpModel, ModelsArgs, SimulateArgs, StatsArgs};

/// Exit statuses.
pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::Parse { .. } | Error::Model(_) => EXIT_PARSE,
            Error::Config(_) => EXIT_USAGE,
            Error::Numerical(_) | Error::Eval(_) => EXIT_NUMERICAL,
            Error::Io(_) => EXIT_IO,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn read_input(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// Reads a model file, falling back to a built-in of the same name.
fn load_model(source: &str) -> CliResult<Model> {
    let path = Path::new(source);
    if path.exists() {
        let text = read_input(path)?;
        return parse_model(&text).map_err(|e| {
            let mut e = CliError::from(e);
            e.message = format!("{source}:{}", e.message);
            e
        });
    }
    if BUILTIN_NAMES.contains(&source) {
        return Ok(builtin(source)?);
    }
    Err(CliError::usage(format!(
        "{source}: no such model file or built-in model (built-ins: {})",
        BUILTIN_NAMES.join(", ")
    )))
}

#[derive(Serialize)]
struct BoundsEntry {
    species: String,
    lower: u64,
    upper: Option<u64>,
    from_invariant: bool,
}

#[derive(Serialize)]
struct OverrideEntry {
    species: String,
    lower: u64,
    upper: Option<u64>,
}

#[derive(Serialize)]
struct Flags {
    completed: usize,
    absorbed: usize,
    sde_boundary_stop: usize,
    repair_failed: usize,
}

#[derive(Serialize)]
struct SimulateManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    model_source: &'a str,
    model_name: &'a str,
    /// Effective model, including bound overrides, in the DSL.
    model_text: String,
    config: &'a SimConfig,
    partition: hsjd_core::PartitionMode,
    bounds_file: Option<String>,
    bounds_overrides: Vec<OverrideEntry>,
    effective_bounds: Vec<BoundsEntry>,
    unbounded_fluid_species: Vec<String>,
    trajectories: usize,
    samples_per_trajectory: usize,
    terminal_flags: Flags,
    output: String,
    wall_time_seconds: f64,
}

fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn simulate(args: &SimulateArgs) -> CliResult {
    let method: Method = args.method.into();
    if method == Method::Ode && args.runs != 1 {
        return Err(CliError::usage(format!(
            "the ODE is deterministic, --runs must be 1 (got {})",
            args.runs
        )));
    }
    let mut model = load_model(&args.model)?;
    let mut overrides = Vec::new();
    if let Some(path) = &args.bounds {
        overrides = parse_bounds_file(&read_input(path)?).map_err(|e| {
            let mut e = CliError::from(e);
            e.message = format!("{}:{}", path.display(), e.message);
            e
        })?;
        model = model.with_bounds(&overrides)?;
    }
    if let Some(p) = args.partition {
        model.partition_mode = p.into();
    }

    let record = args.record.unwrap_or_else(|| (args.tmax / 100.0).max(args.step));
    let mut config = SimConfig::new(method, args.step, args.tmax, record)
        .with_runs(args.runs)
        .with_seed(args.seed);
    config.noise = !args.no_noise;
    config.adaptive_dt = !args.fixed_step;
    config.sde_boundary = args.sde_boundary.into();
    config.workers = args.workers.unwrap_or_else(available_workers);
    if config.workers == 0 {
        return Err(CliError::usage("--workers must be at least 1"));
    }
    config.validate()?;

    let unbounded: Vec<String> = model
        .unbounded_fluid()
        .into_iter()
        .map(|i| model.species[i].name.clone())
        .collect();
    if !unbounded.is_empty() && method != Method::Ssa {
        eprintln!(
            "warning: fluid species without an upper bound: {} (only the lower bound is guarded)",
            unbounded.join(", ")
        );
    }

    let start = Instant::now();
    let ensemble = run_ensemble(&model, &config)?;
    let wall = start.elapsed().as_secs_f64();

    let mut w = create(&args.out)?;
    ensemble.write_csv(&mut w)?;
    w.flush().map_err(|e| CliError::io(&args.out, e))?;

    let count = |f: TerminalFlag| ensemble.trajectories.iter().filter(|t| t.terminal_flag == f).count();
    let flags = Flags {
        completed: count(TerminalFlag::Completed),
        absorbed: count(TerminalFlag::Absorbed),
        sde_boundary_stop: count(TerminalFlag::SdeBoundaryStop),
        repair_failed: ensemble.trajectories.iter().filter(|t| t.repair_failed).count(),
    };
    if flags.repair_failed > 0 {
        eprintln!(
            "warning: {} trajectories could not restore a conservation law after clamping",
            flags.repair_failed
        );
    }
    let manifest = SimulateManifest {
        tool: "hsjd",
        version: env!("CARGO_PKG_VERSION"),
        command: "simulate",
        model_source: &args.model,
        model_name: &model.name,
        model_text: serialize_model(&model),
        config: &config,
        partition: model.partition_mode,
        bounds_file: args.bounds.as_ref().map(|p| p.display().to_string()),
        bounds_overrides: overrides
            .iter()
            .map(|(s, lower, upper)| OverrideEntry {
                species: s.clone(),
                lower: *lower,
                upper: *upper,
            })
            .collect(),
        effective_bounds: model
            .species
            .iter()
            .zip(model.bounds())
            .map(|(s, b)| BoundsEntry {
                species: s.name.clone(),
                lower: b.lower,
                upper: b.upper,
                from_invariant: b.from_invariant,
            })
            .collect(),
        unbounded_fluid_species: unbounded,
        trajectories: ensemble.trajectories.len(),
        samples_per_trajectory: ensemble.times.len(),
        terminal_flags: flags,
        output: args.out.display().to_string(),
        wall_time_seconds: wall,
    };
    write_json(&with_suffix(&args.out, ".manifest.json"), &manifest)?;
    eprintln!(
        "{}: {} {} trajectories to t={} in {wall:.2}s -> {}",
        model.name,
        ensemble.trajectories.len(),
        method,
        args.tmax,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct FpManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    model: &'static str,
    lambda1: f64,
    lambda2: f64,
    lambda3: Option<f64>,
    s: Option<f64>,
    n: f64,
    cells: usize,
    dt: f64,
    tmax: f64,
    interval: f64,
    final_total_mass: f64,
    outputs: Vec<String>,
    wall_time_seconds: f64,
}

fn write_level_pmf(path: &Path, grid: &FpGrid, n: f64) -> CliResult {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "level,prob").map_err(io)?;
    for (k, p) in grid.level_pmf(n.round() as u64) {
        writeln!(w, "{k:?},{p:?}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn fokker_planck(args: &FokkerPlanckArgs) -> CliResult {
    let switched = args.model == FpModel::CrazyClockSwitch;
    let tmax = args.tmax.unwrap_or(if switched { 0.003 } else { 0.0016 });
    let interval = args.interval.unwrap_or(tmax / 4.0);
    if !(tmax > 0.0 && interval > 0.0 && tmax.is_finite()) {
        return Err(CliError::usage("--tmax and --interval must be positive"));
    }
    let (solver, name, l1, l2, l3, s, n) = if switched {
        let mut p = FpSwitchedParams::crazy_clock_switch(tmax, interval);
        p.lambda1 = args.lambda1.unwrap_or(p.lambda1);
        p.lambda2 = args.lambda2.unwrap_or(p.lambda2);
        p.lambda3 = args.lambda3.unwrap_or(p.lambda3);
        p.s = args.s.unwrap_or(p.s);
        p.n = args.n.unwrap_or(p.n);
        p.cells = args.cells.unwrap_or_else(|| default_cells(p.n));
        p.dt = args.dt;
        (FpSolver::switched(&p), "crazy_clock_switch", p.lambda1, p.lambda2, Some(p.lambda3), Some(p.s), p.n)
    } else {
        if args.lambda3.is_some() || args.s.is_some() {
            return Err(CliError::usage("--lambda3 and --s apply to crazy-clock-switch only"));
        }
        let mut p = FpParams::crazy_clock(tmax, interval);
        p.lambda1 = args.lambda1.unwrap_or(p.lambda1);
        p.lambda2 = args.lambda2.unwrap_or(p.lambda2);
        p.n = args.n.unwrap_or(p.n);
        p.cells = args.cells.unwrap_or_else(|| default_cells(p.n));
        p.dt = args.dt;
        (FpSolver::plain(&p), "crazy_clock", p.lambda1, p.lambda2, None, None, p.n)
    };
    let solver = solver?;
    let cells = solver.grid().cells();
    if grid_too_coarse(cells, n) {
        eprintln!(
            "warning: cell width 1/{cells} is coarser than 1/N = 1/{n}; the re-injection point is not resolved"
        );
    }
    let dt = solver.dt();
    let start = Instant::now();
    let grids = solver.run(tmax, interval)?;
    let wall = start.elapsed().as_secs_f64();
    let last = grids.last().expect("at least the initial snapshot");

    let grid_path = with_suffix(&args.out, ".grid.csv");
    let masses_path = with_suffix(&args.out, ".masses.csv");
    let pmf_path = with_suffix(&args.out, ".pmf.csv");
    let mut w = create(&grid_path)?;
    write_grid_csv(&mut w, &grids)?;
    w.flush().map_err(|e| CliError::io(&grid_path, e))?;
    let mut w = create(&masses_path)?;
    write_masses_csv(&mut w, &grids)?;
    w.flush().map_err(|e| CliError::io(&masses_path, e))?;
    write_level_pmf(&pmf_path, last, n)?;

    let total = fp_mass_accounting(last).total;
    let manifest = FpManifest {
        tool: "hsjd",
        version: env!("CARGO_PKG_VERSION"),
        command: "fokker-planck",
        model: name,
        lambda1: l1,
        lambda2: l2,
        lambda3: l3,
        s,
        n,
        cells,
        dt,
        tmax,
        interval,
        final_total_mass: total,
        outputs: [&grid_path, &masses_path, &pmf_path]
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        wall_time_seconds: wall,
    };
    write_json(&with_suffix(&args.out, ".manifest.json"), &manifest)?;
    eprintln!(
        "{name}: {cells} cells, dt={dt:.3e}, {} snapshots to u={tmax}, total mass {total:.12} in {wall:.2}s",
        grids.len()
    );
    Ok(())
}

pub fn stats(args: &StatsArgs) -> CliResult {
    let file = File::open(&args.trajectories)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", args.trajectories.display())))?;
    let ensemble = Ensemble::from_csv(BufReader::new(file)).map_err(|e| match e {
        Error::Io(m) => CliError {
            code: EXIT_PARSE,
            message: format!("{}: {m}", args.trajectories.display()),
        },
        other => other.into(),
    })?;
    let species: Vec<String> = match &args.species {
        Some(s) => {
            ensemble.species_index(s)?;
            vec![s.clone()]
        }
        None => ensemble.species.clone(),
    };
    let mut rows = Vec::new();
    for s in &species {
        rows.push((s.clone(), ensemble_mean(&ensemble, s)?));
    }
    let mean_path = with_suffix(&args.out, ".mean.csv");
    let mut w = create(&mean_path)?;
    write_mean_csv(&mut w, &rows)?;
    w.flush().map_err(|e| CliError::io(&mean_path, e))?;

    if let Some(t) = args.at {
        let Some(s) = &args.species else {
            return Err(CliError::usage("--at needs --species"));
        };
        let pmf = pmf_at_time(&ensemble, s, t, args.bins, &args.atoms)?;
        let pmf_path = with_suffix(&args.out, ".pmf.csv");
        let mut w = create(&pmf_path)?;
        pmf.write_csv(&mut w)?;
        w.flush().map_err(|e| CliError::io(&pmf_path, e))?;
        for (value, p) in &pmf.atoms {
            println!("P({s} = {value}) at t={t}: {p:.6}");
        }
    } else if !args.atoms.is_empty() {
        return Err(CliError::usage("--atoms needs --at"));
    }
    for (s, means) in &rows {
        if let Some(last) = means.last() {
            println!("mean {s} at t={}: {} +- {}", last.time, last.mean, last.stderr);
        }
    }
    Ok(())
}

pub fn models(args: &ModelsArgs) -> CliResult {
    if args.list {
        for name in BUILTIN_NAMES {
            println!("{name}\t{}", hsjd_core::builtin::describe(name).unwrap_or(""));
        }
        return Ok(());
    }
    let name = args.emit.as_deref().expect("clap enforces --list or --emit");
    if !BUILTIN_NAMES.contains(&name) {
        return Err(CliError::usage(format!(
            "unknown built-in model '{name}' (available: {})",
            BUILTIN_NAMES.join(", ")
        )));
    }
    let text = serialize_model(&builtin(name)?);
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(path, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
