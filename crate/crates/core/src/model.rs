//! Reaction-network data model: species, reactions, conservation laws and
//! the bounds they imply.
//!
//! Counts in a [`Model`] are always unscaled molecule numbers. Scaling by
//! `N` happens in [`crate::kinetics`].

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{RateExpr, Symbols};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeciesKind {
    Fluid,
    Discrete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub name: String,
    pub kind: SpeciesKind,
    pub init_count: u64,
    /// User-supplied lower bound; fluid species default to 0.
    pub lower_bound: Option<u64>,
    /// User-supplied upper bound. `None` leaves it to the invariants.
    pub upper_bound: Option<u64>,
}

impl Species {
    pub fn new(name: &str, kind: SpeciesKind, init_count: u64) -> Self {
        Species {
            name: name.to_string(),
            kind,
            init_count,
            lower_bound: None,
            upper_bound: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateLaw {
    /// Stochastic mass action with rate constant `rate`; `param` names the
    /// model parameter it was taken from, if any.
    MassAction { rate: f64, param: Option<String> },
    /// Intensity of the unscaled chain as an expression of raw counts.
    Expr(RateExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub name: String,
    /// Input stoichiometry over all species.
    pub input: Vec<u32>,
    /// Output stoichiometry over all species.
    pub output: Vec<u32>,
    pub rate: RateLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: f64,
}

/// A semi-positive conservation law `w · X = total`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PInvariant {
    pub weights: Vec<u64>,
    pub total: u64,
}

impl PInvariant {
    pub fn support(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// How a fluid event whose rate reads a discrete species is classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    /// Such events are discrete.
    Strict,
    /// Only events that change a discrete species are discrete.
    #[default]
    Relaxed,
}

/// Effective `[lower, upper]` range of a species in raw counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub lower: u64,
    pub upper: Option<u64>,
    /// True when the upper bound came from a conservation law.
    pub from_invariant: bool,
}

/// Per-reaction data derived at validation, in sparse form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReactionInfo {
    /// `(species, input multiplicity)` for non-zero inputs.
    pub inputs: Vec<(usize, u32)>,
    /// `(species, l_i)` for non-zero entries of the change vector.
    pub change: Vec<(usize, i64)>,
    /// Species the rate structurally reads.
    pub deps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub name: String,
    pub scale: u64,
    pub species: Vec<Species>,
    pub params: Vec<Param>,
    pub reactions: Vec<Reaction>,
    pub partition_mode: PartitionMode,
    /// Conservation laws; detected during validation unless declared.
    pub invariants: Vec<PInvariant>,
    bounds: Vec<Bounds>,
    info: Vec<ReactionInfo>,
}

impl Model {
    /// An unvalidated model; pass it through [`validate_model`] before use.
    pub fn new(name: &str, scale: u64) -> Self {
        Model {
            name: name.to_string(),
            scale,
            species: Vec::new(),
            params: Vec::new(),
            reactions: Vec::new(),
            partition_mode: PartitionMode::Relaxed,
            invariants: Vec::new(),
            bounds: Vec::new(),
            info: Vec::new(),
        }
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn reaction_index(&self, name: &str) -> Option<usize> {
        self.reactions.iter().position(|r| r.name == name)
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn param_values(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.value).collect()
    }

    pub fn symbols(&self) -> Symbols<'_> {
        Symbols {
            species: self.species.iter().map(|s| s.name.as_str()).collect(),
            params: self.params.iter().map(|p| p.name.as_str()).collect(),
        }
    }

    pub fn init_counts(&self) -> Vec<u64> {
        self.species.iter().map(|s| s.init_count).collect()
    }

    /// Effective bounds; empty before validation.
    pub fn bounds(&self) -> &[Bounds] {
        &self.bounds
    }

    pub fn reaction_info(&self) -> &[ReactionInfo] {
        &self.info
    }

    pub fn is_validated(&self) -> bool {
        self.info.len() == self.reactions.len() && self.bounds.len() == self.species.len()
    }

    /// Fluid species with no finite upper bound. Only their lower bound is
    /// guarded by the boundary machinery.
    pub fn unbounded_fluid(&self) -> Vec<usize> {
        self.species
            .iter()
            .zip(&self.bounds)
            .enumerate()
            .filter(|(_, (s, b))| s.kind == SpeciesKind::Fluid && b.upper.is_none())
            .map(|(i, _)| i)
            .collect()
    }

    /// Same network at a different scale, revalidated.
    pub fn with_scale(&self, scale: u64) -> Result<Model> {
        let mut m = self.clone();
        m.scale = scale;
        m.invariants.clear();
        validate_model(m)
    }

    /// Overrides per-species bounds (`name -> (lower, upper)`) and revalidates.
    pub fn with_bounds(&self, overrides: &[(String, u64, Option<u64>)]) -> Result<Model> {
        let mut m = self.clone();
        for (name, lower, upper) in overrides {
            let i = m
                .species_index(name)
                .ok_or_else(|| Error::Model(format!("bounds given for unknown species '{name}'")))?;
            m.species[i].lower_bound = Some(*lower);
            m.species[i].upper_bound = *upper;
        }
        validate_model(m)
    }
}

/// `O_t − I_t` over all species.
pub fn change_vector(reaction: &Reaction) -> Vec<i64> {
    reaction
        .output
        .iter()
        .zip(&reaction.input)
        .map(|(o, i)| *o as i64 - *i as i64)
        .collect()
}

/// Checks the model and fills the derived caches: change vectors, rate
/// dependencies, conservation laws and effective bounds.
pub fn validate_model(mut model: Model) -> Result<Model> {
    if model.scale == 0 {
        return Err(Error::Model("scale N must be positive".into()));
    }
    if model.species.is_empty() {
        return Err(Error::Model("model declares no species".into()));
    }
    if model.reactions.is_empty() {
        return Err(Error::Model("model declares no reactions".into()));
    }
    let mut seen = BTreeSet::new();
    for s in &model.species {
        if !seen.insert(s.name.as_str()) {
            return Err(Error::Model(format!("duplicate species '{}'", s.name)));
        }
    }
    let mut seen = BTreeSet::new();
    for r in &model.reactions {
        if !seen.insert(r.name.as_str()) {
            return Err(Error::Model(format!("duplicate reaction '{}'", r.name)));
        }
    }
    let mut seen = BTreeSet::new();
    for p in &model.params {
        if !seen.insert(p.name.as_str()) {
            return Err(Error::Model(format!("duplicate parameter '{}'", p.name)));
        }
        if !p.value.is_finite() {
            return Err(Error::Model(format!("parameter '{}' is not finite", p.name)));
        }
    }

    let n_species = model.species.len();
    let mut info = Vec::with_capacity(model.reactions.len());
    for r in &model.reactions {
        if r.input.len() != n_species || r.output.len() != n_species {
            return Err(Error::Model(format!(
                "reaction '{}' references undeclared species",
                r.name
            )));
        }
        let l = change_vector(r);
        if l.iter().all(|v| *v == 0) {
            return Err(Error::Model(format!("reaction '{}': null change vector", r.name)));
        }
        let deps: BTreeSet<usize> = match &r.rate {
            RateLaw::MassAction { rate, .. } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::Model(format!(
                        "reaction '{}': mass-action rate must be positive",
                        r.name
                    )));
                }
                (0..n_species).filter(|i| r.input[*i] > 0).collect()
            }
            RateLaw::Expr(e) => {
                check_expr_refs(e, n_species, model.params.len(), &r.name)?;
                e.species_deps()
            }
        };
        info.push(ReactionInfo {
            inputs: (0..n_species)
                .filter(|i| r.input[*i] > 0)
                .map(|i| (i, r.input[i]))
                .collect(),
            change: l
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0)
                .map(|(i, v)| (i, *v))
                .collect(),
            deps: deps.into_iter().collect(),
        });
    }
    model.info = info;

    let init = model.init_counts();
    if model.invariants.is_empty() {
        model.invariants = detect_p_invariants(&model);
    } else {
        for inv in &model.invariants {
            if inv.weights.len() != n_species {
                return Err(Error::Model("invariant has wrong length".into()));
            }
            for (r, ri) in model.reactions.iter().zip(&model.info) {
                let dot: i64 = ri.change.iter().map(|(i, l)| inv.weights[*i] as i64 * l).sum();
                if dot != 0 {
                    return Err(Error::Model(format!(
                        "invariant {:?} violated by reaction '{}'",
                        inv.weights, r.name
                    )));
                }
            }
            let total: u64 = inv.weights.iter().zip(&init).map(|(w, x)| w * x).sum();
            if total != inv.total {
                return Err(Error::Model(format!(
                    "invariant {:?} has total {} but the initial state gives {}",
                    inv.weights, inv.total, total
                )));
            }
        }
    }

    model.bounds = derive_bounds(&model);
    for (s, b) in model.species.iter().zip(&model.bounds) {
        if let Some(u) = b.upper {
            if b.lower > u {
                return Err(Error::Model(format!(
                    "species '{}': lower bound {} exceeds upper bound {}",
                    s.name, b.lower, u
                )));
            }
        }
        if s.init_count < b.lower || b.upper.is_some_and(|u| s.init_count > u) {
            return Err(Error::Model(format!(
                "species '{}': initial count {} outside its bounds",
                s.name, s.init_count
            )));
        }
    }
    Ok(model)
}

fn check_expr_refs(e: &RateExpr, n_species: usize, n_params: usize, reaction: &str) -> Result<()> {
    let bad = match e {
        RateExpr::Species(i) => *i >= n_species,
        RateExpr::Param(i) => *i >= n_params,
        RateExpr::Num(_) | RateExpr::Scale => false,
        RateExpr::Neg(a) => return check_expr_refs(a, n_species, n_params, reaction),
        RateExpr::Binary(_, a, b) | RateExpr::Call(_, a, b) => {
            check_expr_refs(a, n_species, n_params, reaction)?;
            return check_expr_refs(b, n_species, n_params, reaction);
        }
    };
    if bad {
        return Err(Error::Model(format!(
            "reaction '{reaction}': expression references an undeclared symbol"
        )));
    }
    Ok(())
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Minimal-support semi-positive P-invariants, by Farkas elimination over
/// the species × reaction incidence matrix.
///
/// Result is ordered lexicographically by support, then by weights.
pub fn detect_p_invariants(model: &Model) -> Vec<PInvariant> {
    let n = model.species.len();
    let changes: Vec<Vec<i64>> = model.reactions.iter().map(change_vector).collect();

    // Each row: (incidence row over reactions, identity part over species).
    let mut rows: Vec<(Vec<i64>, Vec<i64>)> = (0..n)
        .map(|i| {
            let c = changes.iter().map(|l| l[i]).collect();
            let mut e = vec![0; n];
            e[i] = 1;
            (c, e)
        })
        .collect();

    for col in 0..changes.len() {
        let mut next: Vec<(Vec<i64>, Vec<i64>)> = Vec::new();
        for (a, row_a) in rows.iter().enumerate() {
            if row_a.0[col] == 0 {
                next.push(row_a.clone());
                continue;
            }
            for row_b in rows.iter().skip(a + 1) {
                let (va, vb) = (row_a.0[col], row_b.0[col]);
                if va.signum() * vb.signum() >= 0 {
                    continue;
                }
                let (ma, mb) = (vb.abs(), va.abs());
                let c: Vec<i64> = row_a.0.iter().zip(&row_b.0).map(|(x, y)| ma * x + mb * y).collect();
                let e: Vec<i64> = row_a.1.iter().zip(&row_b.1).map(|(x, y)| ma * x + mb * y).collect();
                let g = e
                    .iter()
                    .chain(c.iter())
                    .fold(0u64, |g, v| gcd(g, v.unsigned_abs()));
                let g = g.max(1) as i64;
                next.push((
                    c.into_iter().map(|v| v / g).collect(),
                    e.into_iter().map(|v| v / g).collect(),
                ));
            }
        }
        // Keep only rows of minimal support to bound the growth.
        rows = minimal_support(next);
    }

    let init = model.init_counts();
    let mut out: Vec<PInvariant> = rows
        .into_iter()
        .map(|(_, e)| {
            let weights: Vec<u64> = e.into_iter().map(|v| v as u64).collect();
            let total = weights.iter().zip(&init).map(|(w, x)| w * x).sum();
            PInvariant { weights, total }
        })
        .collect();
    out.sort_by(|a, b| a.support().cmp(&b.support()).then(a.weights.cmp(&b.weights)));
    out.dedup();
    out
}

fn minimal_support(rows: Vec<(Vec<i64>, Vec<i64>)>) -> Vec<(Vec<i64>, Vec<i64>)> {
    let supports: Vec<BTreeSet<usize>> = rows
        .iter()
        .map(|(_, e)| e.iter().enumerate().filter(|(_, v)| **v != 0).map(|(i, _)| i).collect())
        .collect();
    let mut keep = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let dominated = supports.iter().enumerate().any(|(j, s)| {
            j != i
                && s.is_subset(&supports[i])
                && (s.len() < supports[i].len() || (j < i && rows[j].1 == row.1))
        });
        if !dominated {
            keep.push(row.clone());
        }
    }
    keep
}

/// Effective per-species bounds: lower defaults to 0, upper is the tightest
/// `total / w_i` over the invariants covering the species. User-supplied
/// bounds take precedence.
pub fn derive_bounds(model: &Model) -> Vec<Bounds> {
    model
        .species
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let derived = model
                .invariants
                .iter()
                .filter(|inv| inv.weights[i] > 0)
                .map(|inv| inv.total / inv.weights[i])
                .min();
            let (upper, from_invariant) = match s.upper_bound {
                Some(u) => (Some(u), false),
                None => (derived, derived.is_some()),
            };
            Bounds {
                lower: s.lower_bound.unwrap_or(0),
                upper,
                from_invariant,
            }
        })
        .collect()
}
