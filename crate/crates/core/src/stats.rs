//! Ensemble post-processing: mean curves, empirical distributions with
//! boundary atoms, Kolmogorov–Smirnov distances and CSV I/O.

use crate::error::{Error, Result};
use crate::kinetics::{HybridState, Layout};
use crate::simulate::{TerminalFlag, Trajectory};
use std::io::{Read, Write};

/// Trajectories recorded on a common time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub species: Vec<String>,
    /// How the recorded states map to raw counts.
    pub layout: Layout,
    pub times: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(format!("csv: {e}"))
}

impl Ensemble {
    pub fn new(species: Vec<String>, layout: Layout, times: Vec<f64>, trajectories: Vec<Trajectory>) -> Self {
        Ensemble {
            species,
            layout,
            times,
            trajectories,
        }
    }

    pub fn species_index(&self, name: &str) -> Result<usize> {
        self.species
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::Config(format!("unknown species '{name}'")))
    }

    /// Index of `t` on the recording grid.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&g| (g - t).abs() <= 1e-9 * g.abs().max(t.abs()).max(1e-300) || g == t)
            .ok_or_else(|| Error::Config(format!("time {t} is not on the recording grid")))
    }

    /// Unscaled value of `species` in `state`.
    pub fn value(&self, state: &HybridState, species: usize) -> f64 {
        match self.layout.slot(species) {
            crate::kinetics::Slot::Fluid(j) => state.fluid[j] * self.layout.scale(),
            crate::kinetics::Slot::Discrete(k) => state.discrete[k] as f64,
        }
    }

    /// Unscaled values of `species` across runs at sample `index`.
    pub fn values_at_index(&self, species: usize, index: usize) -> Vec<f64> {
        self.trajectories
            .iter()
            .map(|tr| self.value(&tr.samples[index].1, species))
            .collect()
    }

    /// Unscaled values of `species` across runs at grid time `t`.
    pub fn values_at(&self, species: &str, t: f64) -> Result<Vec<f64>> {
        let s = self.species_index(species)?;
        let k = self.time_index(t)?;
        Ok(self.values_at_index(s, k))
    }

    /// Fraction of runs with the given terminal flag.
    pub fn fraction_flagged(&self, flag: TerminalFlag) -> f64 {
        let n = self.trajectories.iter().filter(|t| t.terminal_flag == flag).count();
        n as f64 / self.trajectories.len().max(1) as f64
    }

    /// Writes `run,time,<species...>` with unscaled values.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["run".to_string(), "time".to_string()];
        header.extend(self.species.iter().cloned());
        w.write_record(&header).map_err(csv_error)?;
        for tr in &self.trajectories {
            for (t, state) in &tr.samples {
                let mut row = vec![tr.run_index.to_string(), format!("{t:?}")];
                row.extend((0..self.species.len()).map(|i| format!("{:?}", self.value(state, i))));
                w.write_record(&row).map_err(csv_error)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a trajectory CSV written by [`Ensemble::write_csv`]. Values are
    /// held as raw numbers (scale 1).
    pub fn from_csv<R: Read>(reader: R) -> Result<Ensemble> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers().map_err(csv_error)?.clone();
        if header.len() < 3 || &header[0] != "run" || &header[1] != "time" {
            return Err(Error::Io("trajectory CSV must start with columns run,time and name at least one species".into()));
        }
        let species: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut trajectories: Vec<Trajectory> = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record.map_err(csv_error)?;
            let num = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Io(format!("row {}: column {} is not a number", line + 2, i + 1)))
            };
            let run = num(0)? as usize;
            let time = num(1)?;
            let values = (2..header.len()).map(num).collect::<Result<Vec<_>>>()?;
            let state = HybridState {
                fluid: values,
                discrete: Vec::new(),
                time,
            };
            match trajectories.last_mut() {
                Some(tr) if tr.run_index == run => tr.samples.push((time, state)),
                _ => trajectories.push(Trajectory {
                    run_index: run,
                    samples: vec![(time, state)],
                    terminal_flag: TerminalFlag::Completed,
                    repair_failed: false,
                }),
            }
        }
        let Some(first) = trajectories.first() else {
            return Err(Error::Io("trajectory CSV has no rows".into()));
        };
        let times: Vec<f64> = first.samples.iter().map(|(t, _)| *t).collect();
        for tr in &trajectories {
            if tr.samples.len() != times.len() || tr.samples.iter().zip(&times).any(|((a, _), b)| a != b) {
                return Err(Error::Io(format!("run {} is not on the common time grid", tr.run_index)));
            }
        }
        Ok(Ensemble {
            layout: Layout::raw(species.len()),
            species,
            times,
            trajectories,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanPoint {
    pub time: f64,
    pub mean: f64,
    /// Standard error of the mean (zero for a single run).
    pub stderr: f64,
}

/// Pointwise mean of the unscaled species value with its standard error.
pub fn ensemble_mean(ensemble: &Ensemble, species: &str) -> Result<Vec<MeanPoint>> {
    let s = ensemble.species_index(species)?;
    if ensemble.trajectories.is_empty() {
        return Err(Error::Config("empty ensemble".into()));
    }
    Ok(ensemble
        .times
        .iter()
        .enumerate()
        .map(|(k, &time)| {
            let v = ensemble.values_at_index(s, k);
            let (mean, stderr) = mean_stderr(&v);
            MeanPoint { time, mean, stderr }
        })
        .collect())
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub prob: f64,
}

/// Empirical distribution: point masses at listed atoms, histogram elsewhere.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pmf {
    pub atoms: Vec<(f64, f64)>,
    pub bins: Vec<Bin>,
}

impl Pmf {
    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.bins.iter().map(|b| b.prob).sum::<f64>()
    }

    /// Probability of the atom at `value`, zero if it is not listed.
    pub fn atom(&self, value: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 == value).map(|a| a.1).sum()
    }

    /// Writes `kind,lo,hi,prob` rows (atoms have `lo == hi`).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "lo", "hi", "prob"]).map_err(csv_error)?;
        for (v, p) in &self.atoms {
            w.write_record(["atom".to_string(), format!("{v:?}"), format!("{v:?}"), format!("{p:?}")])
                .map_err(csv_error)?;
        }
        for b in &self.bins {
            w.write_record(["bin".to_string(), format!("{:?}", b.lo), format!("{:?}", b.hi), format!("{:?}", b.prob)])
                .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds a [`Pmf`] from raw values. Values within `1e-9` (relative) of a
/// listed atom go to that atom; the rest fill bins `[k·w, (k+1)·w)`.
pub fn pmf_from_values(values: &[f64], bin_width: f64, boundary_atoms: &[f64]) -> Result<Pmf> {
    if values.is_empty() {
        return Err(Error::Config("empty sample".into()));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Config(format!("bin width must be positive, got {bin_width}")));
    }
    let n = values.len() as f64;
    let mut atom_counts = vec![0usize; boundary_atoms.len()];
    let mut rest = Vec::new();
    'values: for &v in values {
        for (k, &a) in boundary_atoms.iter().enumerate() {
            if (v - a).abs() <= 1e-9 * a.abs().max(1.0) {
                atom_counts[k] += 1;
                continue 'values;
            }
        }
        rest.push(v);
    }
    let atoms = boundary_atoms
        .iter()
        .zip(&atom_counts)
        .map(|(&a, &c)| (a, c as f64 / n))
        .collect();
    let mut bins = Vec::new();
    if !rest.is_empty() {
        let lo = rest.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = rest.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = (lo / bin_width).floor() as i64;
        let last = (hi / bin_width).floor() as i64;
        let mut counts = vec![0usize; (last - first + 1) as usize];
        for v in &rest {
            let k = ((v / bin_width).floor() as i64 - first).clamp(0, counts.len() as i64 - 1);
            counts[k as usize] += 1;
        }
        bins = counts
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let lo = (first + k as i64) as f64 * bin_width;
                Bin {
                    lo,
                    hi: lo + bin_width,
                    prob: c as f64 / n,
                }
            })
            .collect();
    }
    Ok(Pmf { atoms, bins })
}

/// Empirical distribution of `species` at grid time `t`.
pub fn pmf_at_time(ensemble: &Ensemble, species: &str, t: f64, bin_width: f64, boundary_atoms: &[f64]) -> Result<Pmf> {
    pmf_from_values(&ensemble.values_at(species, t)?, bin_width, boundary_atoms)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Two-sample Kolmogorov–Smirnov statistic: sup-norm distance between the
/// empirical CDFs (ties and atoms handled exactly).
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// KS distance between a sample and a discrete distribution given as
/// `(value, probability)` pairs.
pub fn ks_distance_to_pmf(sample: &[f64], pmf: &[(f64, f64)]) -> f64 {
    let mut pmf = pmf.to_vec();
    pmf.sort_by(|x, y| x.0.total_cmp(&y.0));
    let s = sorted(sample);
    let n = s.len() as f64;
    let total: f64 = pmf.iter().map(|p| p.1).sum();
    let mut points: Vec<f64> = pmf.iter().map(|p| p.0).chain(s.iter().cloned()).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let (mut i, mut k) = (0, 0);
    let mut cdf = 0.0;
    let mut d: f64 = 0.0;
    for x in points {
        while i < s.len() && s[i] <= x {
            i += 1;
        }
        while k < pmf.len() && pmf[k].0 <= x {
            cdf += pmf[k].1 / total;
            k += 1;
        }
        d = d.max((i as f64 / n - cdf).abs());
    }
    d
}

/// Writes `time,species,mean,stderr`.
pub fn write_mean_csv<W: Write>(writer: W, rows: &[(String, Vec<MeanPoint>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time", "species", "mean", "stderr"]).map_err(csv_error)?;
    for (species, points) in rows {
        for p in points {
            w.write_record([format!("{:?}", p.time), species.clone(), format!("{:?}", p.mean), format!("{:?}", p.stderr)])
                .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}
