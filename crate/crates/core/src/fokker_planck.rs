//! Explicit finite-volume solver for the one-dimensional crazy-clock jump
//! diffusion and its two-mode switched variant.
//!
//! The fluid level `x ∈ (0, 1)` drifts down at rate `f(x)` and diffuses with
//! coefficient `f(x)/(2N)`. Mass reaching `0` is absorbed in `π₀`; mass
//! reaching `1` is held in the atom `π₁`, which leaves at rate `N f(1)` by
//! a jump to `1 − 1/N`. In the switched variant, mode 1 turns into mode 2 at
//! rate `c(x)`; both modes share the absorbing mass at `0`.
//!
//! Cells are uniform with centres `x_i`. With `q_i = f(x_i) π_i`, the
//! rightward flux through an interior face is
//! `J = −f(x_face) π_right − (q_right − q_left)/(2NΔx)` (upwinded drift,
//! centred diffusion). At `x = 0` the flux is `−q_0/(NΔx)` into `π₀`; at
//! `x = 1` the density vanishes and the flux is `q_last/(NΔx)` into `π₁`.

use crate::error::{Error, Result};
use std::io::Write;

const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// Parameters of the plain (one-mode) problem.
#[derive(Debug, Clone, PartialEq)]
pub struct FpParams {
    pub lambda1: f64,
    pub lambda2: f64,
    /// System size `N`.
    pub n: f64,
    /// Number of cells `M`.
    pub cells: usize,
    /// Time step; `None` picks a safe fraction of the stability bound.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Spacing of the returned snapshots.
    pub output_interval: f64,
}

/// Default number of cells for system size `n`: the smallest
/// `M = n (j + ½) ≥ 1000`, so that the re-injection point `1 − 1/n` is the
/// centre of its cell. Depositing the jump mass in a cell whose centre lies
/// closer to the boundary overstates returns to the upper atom.
pub fn default_cells(n: f64) -> usize {
    let j = (1000.0 / n - 0.5).ceil().max(0.0);
    (n * (j + 0.5)).round().max(100.0) as usize
}

impl FpParams {
    pub fn crazy_clock(t_end: f64, output_interval: f64) -> Self {
        FpParams {
            lambda1: 3.0,
            lambda2: 6000.0,
            n: 1000.0,
            cells: default_cells(1000.0),
            dt: None,
            t_end,
            output_interval,
        }
    }
}

/// Parameters of the switched problem. In mode 1 the autocatalytic
/// coefficient is `lambda2 / 2`, in mode 2 it is `lambda2`; the switch rate
/// is `c(x) = max(0, λ3 (N x − (N − S)) / S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FpSwitchedParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub s: f64,
    pub n: f64,
    pub cells: usize,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub output_interval: f64,
}

impl FpSwitchedParams {
    pub fn crazy_clock_switch(t_end: f64, output_interval: f64) -> Self {
        FpSwitchedParams {
            lambda1: 3.0,
            lambda2: 3000.0,
            lambda3: 500.0,
            s: 50.0,
            n: 1000.0,
            cells: default_cells(1000.0),
            dt: None,
            t_end,
            output_interval,
        }
    }

    /// Switch rate at density `x`.
    pub fn switch_rate(&self, x: f64) -> f64 {
        (self.lambda3 * (self.n * x - (self.n - self.s)) / self.s).max(0.0)
    }
}

/// Snapshot of the probability distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FpGrid {
    pub time: f64,
    pub dx: f64,
    /// Density per mode and cell.
    pub density: Vec<Vec<f64>>,
    /// Absorbed mass at 0, shared by all modes.
    pub mass_lower: f64,
    /// Atom at 1, per mode.
    pub mass_upper: Vec<f64>,
}

impl FpGrid {
    /// Distribution of the unscaled level over all modes.
    pub fn level_pmf(&self, n: u64) -> Vec<(f64, f64)> {
        let modes: Vec<usize> = (0..self.density.len()).collect();
        self.level_pmf_of(n, &modes, true)
    }

    pub fn cells(&self) -> usize {
        self.density[0].len()
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    /// Distribution of the unscaled level `k = 0..=N`: level `k` collects
    /// the interior mass on `[(k − ½)/N, (k + ½)/N)` (cells split by
    /// overlap, interior mass kept on levels `1..N−1`); levels 0 and `N`
    /// carry the boundary atoms. `modes` selects which modes to include
    /// and `include_lower` whether the shared absorbed mass is added.
    pub fn level_pmf_of(&self, n: u64, modes: &[usize], include_lower: bool) -> Vec<(f64, f64)> {
        let nf = n as f64;
        let mut p = vec![0.0; n as usize + 1];
        if include_lower {
            p[0] += self.mass_lower;
        }
        for &m in modes {
            p[n as usize] += self.mass_upper[m];
            for (i, &d) in self.density[m].iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let (a, b) = (i as f64 * self.dx, (i + 1) as f64 * self.dx);
                let k_lo = ((a * nf + 0.5).floor() as i64).max(0);
                let k_hi = ((b * nf + 0.5).floor() as i64).min(n as i64);
                for k in k_lo..=k_hi {
                    let lo = ((k as f64 - 0.5) / nf).max(a);
                    let hi = ((k as f64 + 0.5) / nf).min(b);
                    if hi > lo {
                        let level = k.clamp(1, n as i64 - 1) as usize;
                        p[level] += d * (hi - lo);
                    }
                }
            }
        }
        p.into_iter().enumerate().map(|(k, v)| (k as f64, v)).collect()
    }
}

/// Mass breakdown of a snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassAccount {
    pub mass_lower: f64,
    pub mass_upper: f64,
    pub interior: f64,
    pub total: f64,
}

/// Absorbed, upper-atom and interior mass (summed over modes) and the total.
pub fn fp_mass_accounting(grid: &FpGrid) -> MassAccount {
    let interior: f64 = grid.density.iter().flatten().sum::<f64>() * grid.dx;
    let mass_upper: f64 = grid.mass_upper.iter().sum();
    MassAccount {
        mass_lower: grid.mass_lower,
        mass_upper,
        interior,
        total: grid.mass_lower + mass_upper + interior,
    }
}

struct Mode {
    /// `f` at cell centres.
    f_center: Vec<f64>,
    /// `f` at the interior faces `i + ½`, `i = 0..M−1`.
    f_face: Vec<f64>,
    f_one: f64,
}

impl Mode {
    fn new(cells: usize, f: impl Fn(f64) -> f64) -> Self {
        let dx = 1.0 / cells as f64;
        Mode {
            f_center: (0..cells).map(|i| f((i as f64 + 0.5) * dx)).collect(),
            f_face: (0..cells.saturating_sub(1)).map(|i| f((i + 1) as f64 * dx)).collect(),
            f_one: f(1.0),
        }
    }
}

/// Time stepper; `step` advances by the fixed `dt`.
pub struct FpSolver {
    n: f64,
    dx: f64,
    dt: f64,
    modes: Vec<Mode>,
    /// Mode-1 → mode-2 switch rate per cell and at `x = 1` (empty if plain).
    switch: Option<(Vec<f64>, f64)>,
    inject_cell: usize,
    grid: FpGrid,
    flux: Vec<f64>,
    rhs: Vec<f64>,
    floored: f64,
}

impl FpSolver {
    fn build(n: f64, cells: usize, dt: Option<f64>, modes: Vec<Mode>, switch: Option<(Vec<f64>, f64)>) -> Result<Self> {
        if cells < 2 {
            return Err(Error::Config("the grid needs at least two cells".into()));
        }
        if n.is_nan() || n < 1.0 {
            return Err(Error::Config(format!("system size must be at least 1, got {n}")));
        }
        let dx = 1.0 / cells as f64;
        let bound = stability_bound(n, dx, &modes, switch.as_ref());
        let dt = match dt {
            Some(dt) if dt > 0.0 && dt <= bound => dt,
            Some(dt) => {
                return Err(Error::Numerical(format!(
                    "time step {dt} violates the stability bound {bound:.3e}"
                )))
            }
            None => 0.5 * bound,
        };
        let inject = ((cells as f64 * (n - 1.0) / n).floor() as usize).min(cells - 1);
        let n_modes = modes.len();
        let mut upper = vec![0.0; n_modes];
        upper[0] = 1.0;
        Ok(FpSolver {
            n,
            dx,
            dt,
            modes,
            switch,
            inject_cell: inject,
            grid: FpGrid {
                time: 0.0,
                dx,
                density: vec![vec![0.0; cells]; n_modes],
                mass_lower: 0.0,
                mass_upper: upper,
            },
            flux: vec![0.0; cells + 1],
            rhs: vec![0.0; cells],
            floored: 0.0,
        })
    }

    pub fn plain(p: &FpParams) -> Result<Self> {
        let (l1, l2) = (p.lambda1, p.lambda2);
        Self::build(p.n, p.cells, p.dt, vec![Mode::new(p.cells, |x| l1 * x + l2 * x * (1.0 - x))], None)
    }

    pub fn switched(p: &FpSwitchedParams) -> Result<Self> {
        let (l1, l2) = (p.lambda1, p.lambda2);
        let modes = vec![
            Mode::new(p.cells, |x| l1 * x + 0.5 * l2 * x * (1.0 - x)),
            Mode::new(p.cells, |x| l1 * x + l2 * x * (1.0 - x)),
        ];
        let dx = 1.0 / p.cells as f64;
        let c: Vec<f64> = (0..p.cells).map(|i| p.switch_rate((i as f64 + 0.5) * dx)).collect();
        Self::build(p.n, p.cells, p.dt, modes, Some((c, p.switch_rate(1.0))))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &FpGrid {
        &self.grid
    }

    /// Mass removed so far by flooring tiny negative densities.
    pub fn floored_mass(&self) -> f64 {
        self.floored
    }

    /// Advances by `dt` (which must not exceed the configured step).
    pub fn step_by(&mut self, dt: f64) -> Result<()> {
        let n = self.n;
        let dx = self.dx;
        let cells = self.grid.cells();
        let mut switched_in = vec![0.0; cells];
        let mut switched_upper = 0.0;
        let mut lower_gain = 0.0;
        let mut upper_new = self.grid.mass_upper.clone();

        for (m, mode) in self.modes.iter().enumerate() {
            let pi = &self.grid.density[m];
            // Face fluxes (positive to the right).
            self.flux[0] = -mode.f_center[0] * pi[0] / (n * dx);
            for i in 0..cells - 1 {
                let q_l = mode.f_center[i] * pi[i];
                let q_r = mode.f_center[i + 1] * pi[i + 1];
                self.flux[i + 1] = -mode.f_face[i] * pi[i + 1] - (q_r - q_l) / (2.0 * n * dx);
            }
            self.flux[cells] = mode.f_center[cells - 1] * pi[cells - 1] / (n * dx);

            let upper = self.grid.mass_upper[m];
            let reinjection = n * mode.f_one * upper;
            for i in 0..cells {
                self.rhs[i] = -(self.flux[i + 1] - self.flux[i]) / dx;
            }
            self.rhs[self.inject_cell] += reinjection / dx;
            let mut d_upper = self.flux[cells] - reinjection;

            if let Some((c, c_one)) = &self.switch {
                if m == 0 {
                    for i in 0..cells {
                        let out = c[i] * pi[i];
                        self.rhs[i] -= out;
                        switched_in[i] = out;
                    }
                    switched_upper = c_one * upper;
                    d_upper -= switched_upper;
                } else {
                    for i in 0..cells {
                        self.rhs[i] += switched_in[i];
                    }
                    d_upper += switched_upper;
                }
            }
            lower_gain -= self.flux[0];
            upper_new[m] = upper + dt * d_upper;

            let pi = &mut self.grid.density[m];
            for i in 0..cells {
                let v = pi[i] + dt * self.rhs[i];
                pi[i] = if v < 0.0 {
                    if v < -NEGATIVE_TOLERANCE {
                        return Err(Error::Numerical(format!(
                            "density {v:.3e} at cell {i} (mode {}) at time {:.6e}; reduce the time step",
                            m + 1,
                            self.grid.time
                        )));
                    }
                    self.floored -= v * dx;
                    0.0
                } else if !v.is_finite() {
                    return Err(Error::Numerical(format!("non-finite density at cell {i}")));
                } else {
                    v
                };
            }
        }
        for (m, u) in upper_new.into_iter().enumerate() {
            if u < -NEGATIVE_TOLERANCE {
                return Err(Error::Numerical(format!("negative upper mass {u:.3e} in mode {}", m + 1)));
            }
            self.grid.mass_upper[m] = u.max(0.0);
        }
        self.grid.mass_lower += dt * lower_gain;
        self.grid.time += dt;
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        self.step_by(self.dt)
    }

    /// Snapshots at `k · interval` for `k·interval ≤ t_end` (and `t_end`).
    pub fn run(mut self, t_end: f64, interval: f64) -> Result<Vec<FpGrid>> {
        if !(t_end > 0.0 && interval > 0.0) {
            return Err(Error::Config("t_end and the output interval must be positive".into()));
        }
        let mut targets: Vec<f64> = (1..)
            .map(|k| k as f64 * interval)
            .take_while(|t| *t <= t_end * (1.0 + 1e-12))
            .collect();
        if targets.last().is_none_or(|t| t_end - t > 1e-9 * interval) {
            targets.push(t_end);
        }
        let mut out = vec![self.grid.clone()];
        let mut now = 0.0;
        for target in targets {
            let span = target - now;
            let steps = (span / self.dt).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                self.step_by(h)?;
            }
            self.grid.time = target;
            now = target;
            out.push(self.grid.clone());
        }
        Ok(out)
    }
}

fn stability_bound(n: f64, dx: f64, modes: &[Mode], switch: Option<&(Vec<f64>, f64)>) -> f64 {
    let max_c = switch.map_or(0.0, |(c, c_one)| c.iter().cloned().fold(*c_one, f64::max));
    modes
        .iter()
        .map(|m| {
            let max_f = m.f_center.iter().chain(&m.f_face).cloned().fold(m.f_one, f64::max);
            let interior = 1.0 / (max_f / dx + 1.5 * max_f / (n * dx * dx) + max_c);
            let atom = 1.0 / (n * m.f_one + max_c);
            interior.min(atom)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Solves the one-mode problem from `π₁ = 1`.
pub fn fp_solve(p: &FpParams) -> Result<Vec<FpGrid>> {
    FpSolver::plain(p)?.run(p.t_end, p.output_interval)
}

/// Solves the switched problem from mode 1 with `π₁ = 1`.
pub fn fp_solve_switched(p: &FpSwitchedParams) -> Result<Vec<FpGrid>> {
    FpSolver::switched(p)?.run(p.t_end, p.output_interval)
}

/// Grid is coarser than one molecule, so the re-injection offset `1/N` is
/// not resolved.
pub fn grid_too_coarse(cells: usize, n: f64) -> bool {
    1.0 / cells as f64 > 1.0 / n
}

/// Writes `time,mode,x,density` rows (modes numbered from 1).
pub fn write_grid_csv<W: Write>(writer: W, grids: &[FpGrid]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Io(format!("csv: {e}"));
    w.write_record(["time", "mode", "x", "density"]).map_err(err)?;
    for g in grids {
        for (m, d) in g.density.iter().enumerate() {
            for (i, v) in d.iter().enumerate() {
                w.write_record([format!("{:?}", g.time), (m + 1).to_string(), format!("{:?}", g.center(i)), format!("{v:?}")])
                    .map_err(err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `time,mode,mass_lower,mass_upper,interior` rows. The absorbed mass
/// is shared by all modes and reported on the mode-1 row (0 elsewhere).
pub fn write_masses_csv<W: Write>(writer: W, grids: &[FpGrid]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Io(format!("csv: {e}"));
    w.write_record(["time", "mode", "mass_lower", "mass_upper", "interior"]).map_err(err)?;
    for g in grids {
        for (m, d) in g.density.iter().enumerate() {
            let lower = if m == 0 { g.mass_lower } else { 0.0 };
            let interior = d.iter().sum::<f64>() * g.dx;
            w.write_record([
                format!("{:?}", g.time),
                (m + 1).to_string(),
                format!("{lower:?}"),
                format!("{:?}", g.mass_upper[m]),
                format!("{interior:?}"),
            ])
            .map_err(err)?;
        }
    }
    w.flush()?;
    Ok(())
}
