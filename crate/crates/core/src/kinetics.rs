//! Intensities of the original chain, density-dependent rate functions,
//! drift, boundary detection and the static/dynamic event partitions.

use crate::error::Result;
use crate::expr::EvalContext;
use crate::model::{Model, PartitionMode, RateLaw, SpeciesKind};

/// Where a species lives in a [`HybridState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Fluid(usize),
    Discrete(usize),
}

/// Assignment of species to fluid (scaled by `N`) or discrete (raw count)
/// components, with the fluid bounds in density units.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    slots: Vec<Slot>,
    fluid: Vec<usize>,
    discrete: Vec<usize>,
    fluid_lower: Vec<f64>,
    fluid_upper: Vec<Option<f64>>,
    scale: f64,
}

impl Layout {
    /// Uses the fluid/discrete kinds declared in the model.
    pub fn declared(model: &Model) -> Self {
        Self::build(model, |i| model.species[i].kind)
    }

    /// Every species fluid (ODE, SDE and pure jump diffusion).
    pub fn all_fluid(model: &Model) -> Self {
        Self::build(model, |_| SpeciesKind::Fluid)
    }

    /// Every species discrete (exact simulation).
    pub fn all_discrete(model: &Model) -> Self {
        Self::build(model, |_| SpeciesKind::Discrete)
    }

    fn build(model: &Model, kind: impl Fn(usize) -> SpeciesKind) -> Self {
        debug_assert!(model.is_validated());
        let scale = model.scale as f64;
        let mut layout = Layout {
            slots: Vec::with_capacity(model.species.len()),
            fluid: Vec::new(),
            discrete: Vec::new(),
            fluid_lower: Vec::new(),
            fluid_upper: Vec::new(),
            scale,
        };
        for (i, b) in model.bounds().iter().enumerate() {
            match kind(i) {
                SpeciesKind::Fluid => {
                    layout.slots.push(Slot::Fluid(layout.fluid.len()));
                    layout.fluid.push(i);
                    layout.fluid_lower.push(b.lower as f64 / scale);
                    layout.fluid_upper.push(b.upper.map(|u| u as f64 / scale));
                }
                SpeciesKind::Discrete => {
                    layout.slots.push(Slot::Discrete(layout.discrete.len()));
                    layout.discrete.push(i);
                }
            }
        }
        layout
    }

    /// `n` unbounded fluid species at scale 1, so that states hold raw
    /// values. Used for data read back from CSV.
    pub fn raw(n: usize) -> Self {
        Layout {
            slots: (0..n).map(Slot::Fluid).collect(),
            fluid: (0..n).collect(),
            discrete: Vec::new(),
            fluid_lower: vec![0.0; n],
            fluid_upper: vec![None; n],
            scale: 1.0,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn slot(&self, species: usize) -> Slot {
        self.slots[species]
    }

    pub fn n_species(&self) -> usize {
        self.slots.len()
    }

    pub fn is_fluid(&self, species: usize) -> bool {
        matches!(self.slots[species], Slot::Fluid(_))
    }

    /// Species index of each fluid component.
    pub fn fluid_species(&self) -> &[usize] {
        &self.fluid
    }

    /// Species index of each discrete component.
    pub fn discrete_species(&self) -> &[usize] {
        &self.discrete
    }

    /// Lower bound of fluid component `j` as a density.
    pub fn fluid_lower(&self, j: usize) -> f64 {
        self.fluid_lower[j]
    }

    /// Upper bound of fluid component `j` as a density, if finite.
    pub fn fluid_upper(&self, j: usize) -> Option<f64> {
        self.fluid_upper[j]
    }

    pub fn initial_state(&self, model: &Model) -> HybridState {
        self.from_unscaled(&model.init_counts().iter().map(|&c| c as f64).collect::<Vec<_>>(), 0.0)
    }

    /// Builds a state from raw counts. Discrete entries are rounded.
    pub fn from_unscaled(&self, counts: &[f64], time: f64) -> HybridState {
        HybridState {
            fluid: self.fluid.iter().map(|&i| counts[i] / self.scale).collect(),
            discrete: self.discrete.iter().map(|&i| counts[i].round() as i64).collect(),
            time,
        }
    }

    /// Raw counts over all species (fluid components multiplied by `N`).
    pub fn unscaled_into(&self, state: &HybridState, out: &mut [f64]) {
        for (i, slot) in self.slots.iter().enumerate() {
            out[i] = match *slot {
                Slot::Fluid(j) => state.fluid[j] * self.scale,
                Slot::Discrete(k) => state.discrete[k] as f64,
            };
        }
    }

    pub fn unscaled(&self, state: &HybridState) -> Vec<f64> {
        let mut out = vec![0.0; self.slots.len()];
        self.unscaled_into(state, &mut out);
        out
    }

    /// Mixed vector over all species: densities for fluid, counts for discrete.
    pub fn mixed_into(&self, state: &HybridState, out: &mut [f64]) {
        for (i, slot) in self.slots.iter().enumerate() {
            out[i] = match *slot {
                Slot::Fluid(j) => state.fluid[j],
                Slot::Discrete(k) => state.discrete[k] as f64,
            };
        }
    }

    pub fn mixed(&self, state: &HybridState) -> Vec<f64> {
        let mut out = vec![0.0; self.slots.len()];
        self.mixed_into(state, &mut out);
        out
    }
}

/// Partially scaled state: fluid densities, discrete counts and time.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub fluid: Vec<f64>,
    pub discrete: Vec<i64>,
    pub time: f64,
}

/// Static split of the reactions into diffusion-approximated (fluid) and
/// jump (discrete) events. Indices refer to `Model::reactions`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventPartition {
    pub fluid_events: Vec<usize>,
    pub discrete_events: Vec<usize>,
}

fn binomial(m: f64, k: u32) -> f64 {
    let mut acc = 1.0;
    for j in 0..k {
        let factor = m - j as f64;
        if factor <= 0.0 {
            return 0.0;
        }
        acc *= factor / (j + 1) as f64;
    }
    acc
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Intensity of `reaction` in the unscaled chain at raw counts `counts`.
///
/// Mass action uses `N^(1 - Σ I) · μ · Π C(m_i, I_i)`; expressions are
/// evaluated directly and vanish unless every input species is present.
/// Negative values are clamped to zero.
pub fn intensity(model: &Model, counts: &[f64], reaction: usize) -> Result<f64> {
    let params = model.param_values();
    intensity_with(model, &params, counts, reaction)
}

pub(crate) fn intensity_with(
    model: &Model,
    params: &[f64],
    counts: &[f64],
    reaction: usize,
) -> Result<f64> {
    let scale = model.scale as f64;
    let value = match &model.reactions[reaction].rate {
        RateLaw::MassAction { rate, .. } => {
            let info = &model.reaction_info()[reaction];
            let order: i32 = info.inputs.iter().map(|(_, k)| *k as i32).sum();
            let mut v = rate * scale.powi(1 - order);
            for &(i, k) in &info.inputs {
                v *= binomial(counts[i], k);
            }
            v
        }
        RateLaw::Expr(e) => {
            // A reaction cannot fire without its input molecules, whatever
            // the expression says.
            let info = &model.reaction_info()[reaction];
            if info.inputs.iter().any(|&(i, k)| counts[i] < k as f64) {
                return Ok(0.0);
            }
            e.eval(&EvalContext {
                counts,
                scale,
                params,
            })?
        }
    };
    Ok(value.max(0.0))
}

/// Density-dependent rate function `f(y, l)` for one reaction, at the mixed
/// vector `y` (densities for fluid species, counts for discrete ones).
///
/// For mass action: `μ · N^(-Σ_D I) · Π_F y^I / I! · Π_D C(m, I)`. For
/// expressions: the unscaled intensity divided by `N` (zero when a
/// discrete input is short or a fluid input is exhausted).
pub fn density_f(model: &Model, layout: &Layout, y: &[f64], reaction: usize) -> Result<f64> {
    let params = model.param_values();
    let mut scratch = vec![0.0; y.len()];
    density_f_with(model, layout, &params, y, &mut scratch, reaction)
}

pub(crate) fn density_f_with(
    model: &Model,
    layout: &Layout,
    params: &[f64],
    y: &[f64],
    scratch: &mut [f64],
    reaction: usize,
) -> Result<f64> {
    let scale = layout.scale;
    let value = match &model.reactions[reaction].rate {
        RateLaw::MassAction { rate, .. } => {
            let info = &model.reaction_info()[reaction];
            let mut v = *rate;
            let mut discrete_order = 0;
            for &(i, k) in &info.inputs {
                if layout.is_fluid(i) {
                    v *= y[i].max(0.0).powi(k as i32) / factorial(k);
                } else {
                    v *= binomial(y[i], k);
                    discrete_order += k as i32;
                }
            }
            v * scale.powi(-discrete_order)
        }
        RateLaw::Expr(e) => {
            let info = &model.reaction_info()[reaction];
            let disabled = info.inputs.iter().any(|&(i, k)| {
                if layout.is_fluid(i) {
                    y[i] <= 0.0
                } else {
                    y[i] < k as f64
                }
            });
            if disabled {
                return Ok(0.0);
            }
            for (i, out) in scratch.iter_mut().enumerate() {
                *out = if layout.is_fluid(i) { y[i] * scale } else { y[i] };
            }
            e.eval(&EvalContext {
                counts: scratch,
                scale,
                params,
            })? / scale
        }
    };
    Ok(value.max(0.0))
}

/// `f(y, l)` summed over every reaction whose change vector is `l`; zero if
/// no reaction produces `l`.
pub fn density_f_by_change(model: &Model, layout: &Layout, y: &[f64], l: &[i64]) -> Result<f64> {
    let mut total = 0.0;
    for (r, reaction) in model.reactions.iter().enumerate() {
        if crate::model::change_vector(reaction) == l {
            total += density_f(model, layout, y, r)?;
        }
    }
    Ok(total)
}

/// `F_j = Σ_{l ∈ active} l_j f(y, l)` over the fluid components.
pub fn drift(model: &Model, layout: &Layout, state: &HybridState, active: &[usize]) -> Result<Vec<f64>> {
    let params = model.param_values();
    let y = layout.mixed(state);
    let mut scratch = vec![0.0; y.len()];
    let mut out = vec![0.0; layout.fluid.len()];
    for &r in active {
        let f = density_f_with(model, layout, &params, &y, &mut scratch, r)?;
        for &(i, l) in &model.reaction_info()[r].change {
            if let Slot::Fluid(j) = layout.slots[i] {
                out[j] += l as f64 * f;
            }
        }
    }
    Ok(out)
}

/// Species indices of fluid components sitting exactly on a bound.
pub fn boundary_map(layout: &Layout, state: &HybridState) -> Vec<usize> {
    let mut out = Vec::new();
    boundary_map_into(layout, state, &mut out);
    out
}

pub(crate) fn boundary_map_into(layout: &Layout, state: &HybridState, out: &mut Vec<usize>) {
    out.clear();
    for (j, &y) in state.fluid.iter().enumerate() {
        if y == layout.fluid_lower[j] || layout.fluid_upper[j] == Some(y) {
            out.push(layout.fluid[j]);
        }
    }
}

/// Static fluid/discrete event partition.
///
/// Reactions changing a discrete species are always discrete. In strict
/// mode so are reactions whose rate reads a discrete species.
pub fn partition_static(model: &Model, layout: &Layout, mode: PartitionMode) -> EventPartition {
    let mut fluid_events = Vec::new();
    let mut discrete_events = Vec::new();
    for (r, info) in model.reaction_info().iter().enumerate() {
        let changes_discrete = info.change.iter().any(|(i, _)| !layout.is_fluid(*i));
        let reads_discrete = info.deps.iter().any(|i| !layout.is_fluid(*i));
        if changes_discrete || (mode == PartitionMode::Strict && reads_discrete) {
            discrete_events.push(r);
        } else {
            fluid_events.push(r);
        }
    }
    EventPartition {
        fluid_events,
        discrete_events,
    }
}

/// Splits the fluid events into `(interior, boundary)`: a fluid event is a
/// boundary event when it changes, or its rate reads, a component that is
/// on a bound.
pub fn split_dynamic(
    model: &Model,
    layout: &Layout,
    partition: &EventPartition,
    state: &HybridState,
) -> (Vec<usize>, Vec<usize>) {
    let extremal = boundary_map(layout, state);
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    split_dynamic_into(model, partition, &extremal, &mut interior, &mut boundary);
    (interior, boundary)
}

pub(crate) fn split_dynamic_into(
    model: &Model,
    partition: &EventPartition,
    extremal: &[usize],
    interior: &mut Vec<usize>,
    boundary: &mut Vec<usize>,
) {
    interior.clear();
    boundary.clear();
    if extremal.is_empty() {
        interior.extend_from_slice(&partition.fluid_events);
        return;
    }
    let info = model.reaction_info();
    for &r in &partition.fluid_events {
        let touches = info[r].change.iter().any(|(i, _)| extremal.contains(i))
            || info[r].deps.iter().any(|i| extremal.contains(i));
        if touches {
            boundary.push(r);
        } else {
            interior.push(r);
        }
    }
}

/// Intensity of a jump channel at the current (pre-jump) state.
pub fn jump_intensity(model: &Model, layout: &Layout, state: &HybridState, reaction: usize) -> Result<f64> {
    let counts = layout.unscaled(state);
    intensity(model, &counts, reaction)
}
