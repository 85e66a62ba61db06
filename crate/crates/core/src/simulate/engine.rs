//! Euler-type stepping shared by the ODE, SDE, jump-diffusion, HSJD and
//! HODE regimes.
//!
//! Every regime is the same step with different switches:
//!
//! | regime | layout   | drift events             | jump events      | noise |
//! |--------|----------|--------------------------|------------------|-------|
//! | ode    | fluid    | all                      | none             | off   |
//! | sde    | fluid    | all                      | none             | on    |
//! | jd     | fluid    | interior                 | boundary         | on    |
//! | hsde   | declared | interior of C^F          | C^D ∪ boundary   | on    |
//! | hode   | declared | C^F                      | C^D              | off   |
//!
//! Random draws per step, in order: one exponential (only when the total
//! jump rate is positive), one standard normal per drift event (only when
//! noise is on), one uniform for channel selection (only when a jump fires).

use super::{run_rng, Method, SdeBoundary, SimConfig, TerminalFlag, Trajectory};
use crate::error::{Error, Result};
use crate::kinetics::{
    boundary_map_into, density_f_with, intensity_with, partition_static, split_dynamic_into, EventPartition,
    HybridState, Layout, Slot,
};
use crate::model::Model;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

/// Fraction of the inverse largest drift term used as the adaptive step.
const ADAPTIVE_FRACTION: f64 = 0.01;
const REPAIR_TOLERANCE: f64 = 1e-12;
const REPAIR_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct StepOutcome {
    pub elapsed: f64,
    pub fired: Option<usize>,
    /// Some fluid component left its bounds before clamping.
    pub left_bounds: bool,
    pub repair_failed: bool,
}

pub(crate) struct Engine<'m> {
    model: &'m Model,
    layout: Layout,
    params: Vec<f64>,
    partition: EventPartition,
    dynamic_split: bool,
    noise: bool,
    adaptive: bool,
    inv_sqrt_n: f64,
    mixed: Vec<f64>,
    unscaled: Vec<f64>,
    scratch: Vec<f64>,
    extremal: Vec<usize>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    jumps: Vec<usize>,
    rates: Vec<f64>,
    fvals: Vec<f64>,
}

impl<'m> Engine<'m> {
    pub fn new(model: &'m Model, layout: Layout, partition: EventPartition, dynamic_split: bool, noise: bool, adaptive: bool) -> Self {
        let n = model.species.len();
        Engine {
            model,
            inv_sqrt_n: 1.0 / layout.scale().sqrt(),
            layout,
            params: model.param_values(),
            partition,
            dynamic_split,
            noise,
            adaptive,
            mixed: vec![0.0; n],
            unscaled: vec![0.0; n],
            scratch: vec![0.0; n],
            extremal: Vec::new(),
            interior: Vec::new(),
            boundary: Vec::new(),
            jumps: Vec::new(),
            rates: Vec::new(),
            fvals: Vec::new(),
        }
    }

    /// Engine for one of the Euler-type regimes.
    pub fn for_method(model: &'m Model, config: &SimConfig) -> Result<Self> {
        let all: Vec<usize> = (0..model.reactions.len()).collect();
        let everything_fluid = EventPartition {
            fluid_events: all,
            discrete_events: Vec::new(),
        };
        let (layout, partition, dynamic, noise) = match config.method {
            Method::Ode => (Layout::all_fluid(model), everything_fluid, false, false),
            Method::Sde => (Layout::all_fluid(model), everything_fluid, false, config.noise),
            Method::Jd => (Layout::all_fluid(model), everything_fluid, true, config.noise),
            Method::Hsde | Method::Hode => {
                let layout = Layout::declared(model);
                let partition = partition_static(model, &layout, model.partition_mode);
                let hsde = config.method == Method::Hsde;
                (layout, partition, hsde, hsde && config.noise)
            }
            Method::Ssa => return Err(Error::Config("the exact method has no Euler engine".into())),
        };
        Ok(Engine::new(model, layout, partition, dynamic, noise, config.adaptive_dt))
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn refresh(&mut self, state: &HybridState) {
        self.layout.mixed_into(state, &mut self.mixed);
        self.layout.unscaled_into(state, &mut self.unscaled);
        if self.dynamic_split {
            boundary_map_into(&self.layout, state, &mut self.extremal);
            split_dynamic_into(self.model, &self.partition, &self.extremal, &mut self.interior, &mut self.boundary);
        } else {
            self.interior.clear();
            self.interior.extend_from_slice(&self.partition.fluid_events);
            self.boundary.clear();
        }
        self.jumps.clear();
        self.jumps.extend_from_slice(&self.partition.discrete_events);
        self.jumps.extend_from_slice(&self.boundary);
        self.jumps.sort_unstable();
    }

    fn eval_interior(&mut self) -> Result<()> {
        self.fvals.clear();
        for &r in &self.interior {
            let f = density_f_with(self.model, &self.layout, &self.params, &self.mixed, &mut self.scratch, r)?;
            self.fvals.push(f);
        }
        Ok(())
    }

    fn adaptive_dt(&self, step_max: f64) -> f64 {
        if !self.adaptive {
            return step_max;
        }
        let info = self.model.reaction_info();
        let mut max_term: f64 = 0.0;
        for (&r, &f) in self.interior.iter().zip(&self.fvals) {
            for &(i, l) in &info[r].change {
                if self.layout.is_fluid(i) {
                    max_term = max_term.max((l as f64 * f).abs());
                }
            }
        }
        if max_term > 0.0 {
            step_max.min(1.0 / (max_term / ADAPTIVE_FRACTION))
        } else {
            step_max
        }
    }

    /// Step length the engine would take from `state` (before jump timing).
    pub fn choose_dt(&mut self, state: &HybridState, step_max: f64) -> Result<f64> {
        self.refresh(state);
        self.eval_interior()?;
        Ok(self.adaptive_dt(step_max))
    }

    /// One step of at most `min(step_max, cap)`.
    pub fn step<R: Rng>(&mut self, state: &mut HybridState, step_max: f64, cap: f64, rng: &mut R) -> Result<StepOutcome> {
        self.refresh(state);

        self.rates.clear();
        let mut nu = 0.0;
        for &r in &self.jumps {
            let q = intensity_with(self.model, &self.params, &self.unscaled, r)?;
            nu += q;
            self.rates.push(q);
        }
        let r_jump = if nu > 0.0 {
            let e: f64 = rng.sample(Exp1);
            e / nu
        } else {
            f64::INFINITY
        };

        self.eval_interior()?;
        let dt = self.adaptive_dt(step_max).min(cap);
        let fires = r_jump <= dt;
        let h = if fires { r_jump } else { dt };

        let info = self.model.reaction_info();
        let sqrt_h = h.sqrt();
        for (&r, &f) in self.interior.iter().zip(&self.fvals) {
            let xi: f64 = if self.noise { rng.sample(StandardNormal) } else { 0.0 };
            let noise = if self.noise { self.inv_sqrt_n * f.sqrt() * xi * sqrt_h } else { 0.0 };
            for &(i, l) in &info[r].change {
                if let Slot::Fluid(j) = self.layout.slot(i) {
                    state.fluid[j] += l as f64 * (f * h + noise);
                }
            }
        }

        let mut fired = None;
        if fires {
            let u: f64 = rng.random::<f64>() * nu;
            let mut acc = 0.0;
            let mut choice = None;
            for (k, &q) in self.rates.iter().enumerate() {
                if q <= 0.0 {
                    continue;
                }
                acc += q;
                choice = Some(k);
                if u < acc {
                    break;
                }
            }
            let r = self.jumps[choice.expect("positive total rate has a channel")];
            apply_jump(self.model, &self.layout, state, r);
            fired = Some(r);
        }
        state.time += h;

        if state.fluid.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite fluid state at time {} (step {h})",
                state.time
            )));
        }
        let left_bounds = out_of_bounds(&self.layout, state);
        let repair_failed = !clamp_and_repair_in(self.model, &self.layout, state);
        Ok(StepOutcome {
            elapsed: h,
            fired,
            left_bounds,
            repair_failed,
        })
    }
}

fn apply_jump(model: &Model, layout: &Layout, state: &mut HybridState, reaction: usize) {
    let scale = layout.scale();
    for &(i, l) in &model.reaction_info()[reaction].change {
        match layout.slot(i) {
            Slot::Fluid(j) => state.fluid[j] += l as f64 / scale,
            Slot::Discrete(k) => state.discrete[k] += l,
        }
    }
}

fn out_of_bounds(layout: &Layout, state: &HybridState) -> bool {
    state.fluid.iter().enumerate().any(|(j, &y)| {
        y < layout.fluid_lower(j) || layout.fluid_upper(j).is_some_and(|u| y > u)
    })
}

fn clamp(layout: &Layout, state: &mut HybridState) {
    for (j, y) in state.fluid.iter_mut().enumerate() {
        let lo = layout.fluid_lower(j);
        if *y < lo {
            *y = lo;
        }
        if let Some(hi) = layout.fluid_upper(j) {
            if *y > hi {
                *y = hi;
            }
        }
    }
}

fn clamp_and_repair_in(model: &Model, layout: &Layout, state: &mut HybridState) -> bool {
    clamp(layout, state);
    if model.invariants.is_empty() {
        return true;
    }
    let scale = layout.scale();
    for _ in 0..REPAIR_ITERATIONS {
        let mut all_ok = true;
        for inv in &model.invariants {
            let mut sum = 0.0;
            for (i, &w) in inv.weights.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                sum += w as f64
                    * match layout.slot(i) {
                        Slot::Fluid(j) => state.fluid[j] * scale,
                        Slot::Discrete(k) => state.discrete[k] as f64,
                    };
            }
            let total = inv.total as f64;
            let defect = total - sum;
            if defect.abs() <= REPAIR_TOLERANCE * total.max(1.0) {
                continue;
            }
            // Fluid participants that can move in the required direction.
            let movable: Vec<(usize, f64)> = inv
                .weights
                .iter()
                .enumerate()
                .filter_map(|(i, &w)| match layout.slot(i) {
                    Slot::Fluid(j) if w > 0 => {
                        let y = state.fluid[j];
                        let blocked = if defect > 0.0 {
                            layout.fluid_upper(j) == Some(y)
                        } else {
                            y == layout.fluid_lower(j)
                        };
                        (!blocked).then_some((j, w as f64))
                    }
                    _ => None,
                })
                .collect();
            if movable.is_empty() {
                continue;
            }
            all_ok = false;
            let weighted: f64 = movable.iter().map(|&(j, w)| w * state.fluid[j]).sum();
            if weighted > 0.0 {
                let factor = defect / (scale * weighted);
                for &(j, _) in &movable {
                    state.fluid[j] += state.fluid[j] * factor;
                }
            } else {
                let share = defect / movable.len() as f64;
                for &(j, w) in &movable {
                    state.fluid[j] += share / (w * scale);
                }
            }
            clamp(layout, state);
        }
        if all_ok {
            return true;
        }
    }
    invariants_hold(model, layout, state)
}

fn invariants_hold(model: &Model, layout: &Layout, state: &HybridState) -> bool {
    let counts = layout.unscaled(state);
    model.invariants.iter().all(|inv| {
        let sum: f64 = inv.weights.iter().zip(&counts).map(|(&w, &c)| w as f64 * c).sum();
        (inv.total as f64 - sum).abs() <= 1e-9 * (inv.total as f64).max(1.0)
    })
}

/// Clamps fluid components to their bounds and then restores every
/// conservation law by spreading its defect over the fluid participants
/// that are free to move, proportionally to `w·y` (equally when that is
/// zero). Discrete components are never altered. Returns `false` when some
/// law could not be restored.
pub fn clamp_and_repair(model: &Model, layout: &Layout, state: &mut HybridState) -> bool {
    clamp_and_repair_in(model, layout, state)
}

/// Euler step length at `state`: `min(step_max, 1 / (100 · max |l_j f|))`
/// over the drift events and fluid components, or `step_max` when every
/// term vanishes or `adaptive` is off.
pub fn choose_dt(
    model: &Model,
    layout: &Layout,
    drift_events: &[usize],
    state: &HybridState,
    step_max: f64,
    adaptive: bool,
) -> Result<f64> {
    let partition = EventPartition {
        fluid_events: drift_events.to_vec(),
        discrete_events: Vec::new(),
    };
    Engine::new(model, layout.clone(), partition, false, false, adaptive).choose_dt(state, step_max)
}

/// One HSJD step from `state` with the adaptive step rule; returns the new
/// state and the elapsed time.
pub fn hsjd_step<R: Rng>(
    model: &Model,
    layout: &Layout,
    partition: &EventPartition,
    state: &HybridState,
    step_max: f64,
    rng: &mut R,
) -> Result<(HybridState, f64)> {
    let mut engine = Engine::new(model, layout.clone(), partition.clone(), true, true, true);
    let mut next = state.clone();
    let out = engine.step(&mut next, step_max, f64::INFINITY, rng)?;
    Ok((next, out.elapsed))
}

/// Runs one Euler-type path for run `run_index`.
pub(crate) fn simulate_euler(model: &Model, config: &SimConfig, run_index: usize) -> Result<Trajectory> {
    config.validate()?;
    let mut engine = Engine::for_method(model, config)?;
    let mut rng = run_rng(config.seed, run_index);
    let times = config.record_times();
    let mut state = engine.layout().initial_state(model);
    let mut samples = Vec::with_capacity(times.len());
    samples.push((0.0, state.clone()));
    let mut flag = TerminalFlag::Completed;
    let mut repair_failed = false;
    let stop_at_bounds = config.method == Method::Sde && config.sde_boundary == SdeBoundary::Stop;

    'grid: for &target in &times[1..] {
        loop {
            let remaining = target - state.time;
            if remaining <= 1e-12 * target.max(1.0) {
                break;
            }
            let out = engine.step(&mut state, config.step_max, remaining, &mut rng)?;
            repair_failed |= out.repair_failed;
            if out.elapsed == remaining {
                state.time = target;
            }
            if stop_at_bounds && out.left_bounds {
                flag = TerminalFlag::SdeBoundaryStop;
                break 'grid;
            }
        }
        state.time = target;
        samples.push((target, state.clone()));
    }
    if flag == TerminalFlag::SdeBoundaryStop {
        for &t in &times[samples.len()..] {
            let mut frozen = state.clone();
            frozen.time = t;
            samples.push((t, frozen));
        }
    }
    Ok(Trajectory {
        run_index,
        samples,
        terminal_flag: flag,
        repair_failed,
    })
}

fn with_method(config: &SimConfig, method: Method) -> SimConfig {
    let mut c = config.clone();
    c.method = method;
    c
}

/// Deterministic Euler path of the fluid limit (every species fluid).
pub fn simulate_ode(model: &Model, config: &SimConfig) -> Result<Trajectory> {
    simulate_euler(model, &with_method(config, Method::Ode), 0)
}

/// Euler–Maruyama path of the diffusion approximation (every species fluid).
pub fn simulate_sde(model: &Model, config: &SimConfig) -> Result<Trajectory> {
    simulate_euler(model, &with_method(config, Method::Sde), 0)
}

/// Jump diffusion with every species fluid.
pub fn simulate_jd(model: &Model, config: &SimConfig) -> Result<Trajectory> {
    simulate_euler(model, &with_method(config, Method::Jd), 0)
}

/// Hybrid switching jump diffusion over the model's fluid/discrete split.
pub fn simulate_hsjd(model: &Model, config: &SimConfig) -> Result<Trajectory> {
    simulate_euler(model, &with_method(config, Method::Hsde), 0)
}

/// Noise-free hybrid limit: switched ODEs with discrete jumps.
pub fn simulate_hode(model: &Model, config: &SimConfig) -> Result<Trajectory> {
    simulate_euler(model, &with_method(config, Method::Hode), 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{builtin, crazy_clock};
    use crate::model::PartitionMode;
    use crate::parser::parse_model;

    fn decay() -> Model {
        parse_model("model decay\nscale N = 1000\nspecies A : fluid, init 1000\nreaction d : A -> 0 @ mass_action 2\n").unwrap()
    }

    #[test]
    fn choose_dt_rule() {
        // Two independent decays with drift terms 2 and 5 at y = 1.
        let m = parse_model(
            "model two\nscale N = 10\nspecies A : fluid, init 10\nspecies B : fluid, init 10\n\
             reaction a : A -> 0 @ mass_action 2\nreaction b : B -> 0 @ mass_action 5\n",
        )
        .unwrap();
        let layout = Layout::all_fluid(&m);
        let s = layout.initial_state(&m);
        assert!((choose_dt(&m, &layout, &[0, 1], &s, 1.0, true).unwrap() - 0.002).abs() < 1e-15);
        assert_eq!(choose_dt(&m, &layout, &[0, 1], &s, 1e-4, true).unwrap(), 1e-4);
        assert_eq!(choose_dt(&m, &layout, &[0, 1], &s, 1.0, false).unwrap(), 1.0);
        let empty = layout.from_unscaled(&[0.0, 0.0], 0.0);
        assert_eq!(choose_dt(&m, &layout, &[0, 1], &empty, 1.0, true).unwrap(), 1.0);
    }

    #[test]
    fn clamp_repair_examples() {
        let m = crazy_clock(1, 3.0, 6.0).unwrap();
        let layout = Layout::all_fluid(&m);
        let mut s = HybridState {
            fluid: vec![-0.01, 0.98],
            discrete: vec![],
            time: 0.0,
        };
        assert!(clamp_and_repair(&m, &layout, &mut s));
        assert_eq!(s.fluid[0], 0.0);
        assert!((s.fluid[1] - 1.0).abs() < 1e-12);

        let inside = HybridState {
            fluid: vec![0.25, 0.75],
            discrete: vec![],
            time: 0.0,
        };
        let mut s = inside.clone();
        assert!(clamp_and_repair(&m, &layout, &mut s));
        assert_eq!(s, inside);

        let decay = decay();
        let layout = Layout::all_fluid(&decay);
        let mut s = layout.from_unscaled(&[-3.0], 0.0);
        assert!(clamp_and_repair(&decay, &layout, &mut s));
        assert_eq!(s.fluid, vec![0.0]);
    }

    #[test]
    fn repair_leaves_discrete_alone() {
        let m = builtin("transcription").unwrap();
        let layout = Layout::declared(&m);
        let mut s = layout.initial_state(&m);
        s.fluid[layout.fluid_species().iter().position(|&i| i == 6).unwrap()] -= 0.01;
        let before = s.discrete.clone();
        assert!(clamp_and_repair(&m, &layout, &mut s));
        assert_eq!(s.discrete, before);
        let counts = layout.unscaled(&s);
        assert!((counts[6] + counts[7] - 80.0).abs() < 1e-9);
    }

    #[test]
    fn ode_decay_is_first_order() {
        let m = decay();
        let err = |h: f64| {
            let mut c = SimConfig::new(Method::Ode, h, 1.0, 0.5);
            c.adaptive_dt = false;
            let t = simulate_ode(&m, &c).unwrap();
            let y = t.samples.last().unwrap().1.fluid[0];
            (y - (-2.0f64).exp()).abs()
        };
        let (e1, e2) = (err(0.01), err(0.005));
        assert!(e1 < 0.01, "{e1}");
        let ratio = e1 / e2;
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn upper_boundary_jump_at_crazy_clock_start() {
        let m = builtin("crazy_clock").unwrap();
        let layout = Layout::declared(&m);
        let p = partition_static(&m, &layout, PartitionMode::Relaxed);
        let s0 = layout.initial_state(&m);
        let mut rng = run_rng(1, 0);
        let mut fired = 0;
        let mut total_wait = 0.0;
        for _ in 0..2000 {
            let (s1, h) = hsjd_step(&m, &layout, &p, &s0, 1.0, &mut rng).unwrap();
            // At the top nothing diffuses: either the jump fired or time advanced by step_max.
            if h < 1.0 {
                fired += 1;
                assert_eq!(s1.fluid[0], 1.0 - 1.0 / 1000.0);
                assert!((s1.fluid[1] - 1.0 / 1000.0).abs() < 1e-15);
                total_wait += h;
            } else {
                assert_eq!(s1.fluid, s0.fluid);
            }
        }
        assert_eq!(fired, 2000);
        let mean = total_wait / 2000.0;
        // Exp(N λ1) = Exp(3000): mean 3.33e-4, standard error ~7.5e-6.
        assert!((mean - 1.0 / 3000.0).abs() < 3.0 * (1.0 / 3000.0) / 2000f64.sqrt(), "{mean}");
    }

    #[test]
    fn jump_selection_frequencies() {
        // Two discrete channels with intensities 3 and 1.
        let m = parse_model(
            "model pick\nscale N = 1\nspecies X : discrete, init 1\nspecies Y : fluid, init 0\n\
             reaction a : X -> 0 @ mass_action 3\nreaction b : X -> 2 X @ mass_action 1\n",
        )
        .unwrap();
        let layout = Layout::declared(&m);
        let p = partition_static(&m, &layout, PartitionMode::Relaxed);
        assert_eq!(p.discrete_events, vec![0, 1]);
        let s0 = layout.initial_state(&m);
        let mut rng = run_rng(5, 0);
        let draws = 100_000;
        let mut first = 0;
        for _ in 0..draws {
            let (s1, _) = hsjd_step(&m, &layout, &p, &s0, 1e6, &mut rng).unwrap();
            if s1.discrete[0] == 0 {
                first += 1;
            }
        }
        let freq = first as f64 / draws as f64;
        let sigma = (0.75 * 0.25 / draws as f64).sqrt();
        assert!((freq - 0.75).abs() < 3.0 * sigma, "{freq}");
    }

    #[test]
    fn recorded_samples_respect_bounds_and_invariants() {
        let m = builtin("crazy_clock").unwrap();
        let mut c = SimConfig::new(Method::Hsde, 1e-5, 0.003, 0.0004);
        c.seed = 3;
        for run in 0..20 {
            let t = simulate_euler(&m, &c, run).unwrap();
            assert!(!t.repair_failed);
            for (_, s) in &t.samples {
                assert!(s.fluid.iter().all(|&y| (0.0..=1.0).contains(&y)));
                assert!((s.fluid[0] + s.fluid[1] - 1.0).abs() * 1000.0 < 1e-9);
            }
        }
    }

    #[test]
    fn sde_stop_flag_freezes_path() {
        let m = decay();
        let mut c = SimConfig::new(Method::Sde, 0.01, 20.0, 1.0);
        c.sde_boundary = SdeBoundary::Stop;
        let m = m.with_scale(1).unwrap();
        let mut stopped = 0;
        for run in 0..20 {
            let t = simulate_euler(&m, &c, run).unwrap();
            assert_eq!(t.samples.len(), 21);
            if t.terminal_flag == TerminalFlag::SdeBoundaryStop {
                stopped += 1;
                let last = &t.samples.last().unwrap().1;
                assert_eq!(last.fluid, vec![0.0]);
            }
        }
        assert!(stopped > 0);
    }
}
