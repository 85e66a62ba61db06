//! Acceptance suite: one `PASS`/`FAIL` line per criterion.
//!
//! Runs as a plain binary (`harness = false`). The process exits with
//! status 0 even when a criterion is red, so that statistical findings are
//! reported rather than hidden behind a failing build; set
//! `HSJD_ACCEPTANCE_STRICT=1` to turn any `FAIL` into a non-zero exit.
//! `HSJD_ACCEPTANCE_QUICK=1` divides every ensemble size by ten (the
//! tolerances are then not meaningful and each line is marked `quick`).

mod common;

use std::time::{Duration, Instant};

use hsjd_core::{
    builtin, crazy_clock, density_f, ensemble_mean, fp_mass_accounting, fp_solve, fp_solve_switched,
    intensity, ks_distance, ks_distance_to_pmf, parse_model, run_ensemble, simulate_run, Ensemble, FpGrid,
    FpParams, FpSwitchedParams, Layout, MeanPoint, Method, Model, SimConfig,
};

struct Report {
    passed: usize,
    failed: Vec<String>,
    quick: bool,
}

impl Report {
    fn check(&mut self, id: &str, ok: bool, detail: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        let quick = if self.quick { " (quick)" } else { "" };
        println!("{tag} [{id}] {detail}{quick}");
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(id.to_string());
        }
    }

    fn runs(&self, full: usize) -> usize {
        if self.quick {
            (full / 10).max(10)
        } else {
            full
        }
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn ensemble(model: &Model, method: Method, step: f64, t_max: f64, interval: f64, runs: usize, seed: u64) -> (Ensemble, Duration) {
    let config = SimConfig::new(method, step, t_max, interval).with_runs(runs).with_seed(seed);
    let start = Instant::now();
    let e = run_ensemble(model, &config).unwrap_or_else(|e| panic!("{method} on {}: {e}", model.name));
    (e, start.elapsed())
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.round()).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fraction(v: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    v.iter().filter(|&&x| pred(x)).count() as f64 / v.len() as f64
}

/// Probability mass on `[lo, hi)` of integer-valued levels.
fn band(pmf: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    pmf.iter().filter(|(k, _)| *k >= lo && *k < hi).map(|(_, p)| p).sum()
}

fn empirical_levels(values: &[f64], n: usize) -> Vec<(f64, f64)> {
    common::empirical_pmf(values, n)
        .into_iter()
        .enumerate()
        .map(|(k, p)| (k as f64, p))
        .collect()
}

/// The distribution rises again toward the upper bound: the top band
/// `[950, 1000]` carries clearly more mass than the thinnest 50-wide band
/// between 500 and 950.
fn rises_toward_top(pmf: &[(f64, f64)]) -> (bool, f64, f64) {
    let top = band(pmf, 950.0, 1001.0);
    let trough = (10..19)
        .map(|k| band(pmf, k as f64 * 50.0, (k + 1) as f64 * 50.0))
        .fold(f64::INFINITY, f64::min);
    (top > 2.0 * trough && top > 0.01, top, trough)
}

fn crazy_clock_suite(r: &mut Report) {
    let model = builtin("crazy_clock").unwrap();
    let (t_end, interval) = (0.002, 0.0004);
    let started = Instant::now();

    let (ode, _) = ensemble(&model, Method::Ode, 1e-6, t_end, interval, 1, 0);
    let a_ode = ode.values_at("A", 0.002).unwrap()[0];
    r.check(
        "1a",
        (10.8..=13.2).contains(&a_ode),
        format!("crazy clock ODE A(0.002) = {a_ode:.3}, expected [10.8, 13.2]"),
    );

    let runs = r.runs(100_000);
    let (ssa, t_ssa) = ensemble(&model, Method::Ssa, 1e-5, t_end, interval, runs, 1);
    let ssa_mean = mean(&ssa.values_at("A", 0.002).unwrap());
    r.check(
        "1b",
        (114.0..=140.0).contains(&ssa_mean),
        format!("crazy clock SSA mean A(0.002) = {ssa_mean:.2} over {runs} runs, expected [114, 140] ({})", secs(t_ssa)),
    );

    let (hsjd, t_hsjd) = ensemble(&model, Method::Hsde, 1e-5, t_end, interval, runs, 2);
    let hsjd_mean = mean(&hsjd.values_at("A", 0.002).unwrap());
    let rel = (hsjd_mean - ssa_mean).abs() / ssa_mean;
    r.check(
        "1c",
        rel <= 0.10,
        format!(
            "crazy clock HSJD mean A(0.002) = {hsjd_mean:.2} vs SSA {ssa_mean:.2}: relative gap {:.1}%, limit 10% ({})",
            rel * 100.0,
            secs(t_hsjd)
        ),
    );
    let total = started.elapsed();
    r.check(
        "1d",
        total < Duration::from_secs(120),
        format!("crazy clock mean suite runtime {} (budget 120s)", secs(total)),
    );

    for (id, u) in [("2a", 0.0012), ("2b", 0.0016)] {
        let s = ssa.values_at("A", u).unwrap();
        let h = rounded(&hsjd.values_at("A", u).unwrap());
        let d = ks_distance(&h, &s);
        r.check(id, d <= 0.05, format!("KS(HSJD, SSA) at u={u} = {d:.4}, limit 0.05"));
    }

    // Finer centred grid than the default (3.5 N cells) for a converged pmf.
    let mut p = FpParams::crazy_clock(0.0016, 0.0004);
    p.cells = 3500;
    let start = Instant::now();
    let grids = fp_solve(&p).unwrap();
    let fp_time = start.elapsed();
    let fp_last = grids.last().unwrap();
    let fp_pmf = fp_last.level_pmf(1000);
    let ssa_016 = ssa.values_at("A", 0.0016).unwrap();
    let d = ks_distance_to_pmf(&ssa_016, &fp_pmf);
    let fp_mean: f64 = fp_pmf.iter().map(|(k, p)| k * p).sum();
    r.check(
        "2c",
        d <= 0.05,
        format!(
            "KS(Fokker-Planck, SSA) at u=0.0016 = {d:.4}, limit 0.05 (M={}, FP mean {fp_mean:.1} vs SSA {:.1}, {})",
            p.cells,
            mean(&ssa_016),
            secs(fp_time)
        ),
    );

    let hsjd_pmf = empirical_levels(&rounded(&hsjd.values_at("A", 0.0016).unwrap()), 1000);
    let ssa_pmf = empirical_levels(&ssa_016, 1000);
    let (ok_h, top_h, trough_h) = rises_toward_top(&hsjd_pmf);
    let (ok_f, top_f, trough_f) = rises_toward_top(&fp_pmf);
    let (_, top_s, trough_s) = rises_toward_top(&ssa_pmf);
    r.check(
        "2d",
        ok_h && ok_f,
        format!(
            "pmf rises toward 1000 at u=0.0016: P[950,1000] vs thinnest band in [500,950): \
             HSJD {top_h:.4}/{trough_h:.4}, FP {top_f:.4}/{trough_f:.4} (SSA {top_s:.4}/{trough_s:.4})"
        ),
    );
}

fn mass_ok(grids: &[FpGrid]) -> (bool, f64) {
    let worst = grids
        .iter()
        .map(|g| (fp_mass_accounting(g).total - 1.0).abs())
        .fold(0.0, f64::max);
    (worst <= 1e-6, worst)
}

fn initial_ok(g: &FpGrid) -> bool {
    g.time == 0.0
        && g.mass_upper[0] == 1.0
        && g.mass_upper[1..].iter().all(|&m| m == 0.0)
        && g.mass_lower == 0.0
        && g.density.iter().flatten().all(|&d| d == 0.0)
}

fn fokker_planck_suite(r: &mut Report) {
    let plain = fp_solve(&FpParams::crazy_clock(0.003, 0.0001)).unwrap();
    let (ok, worst) = mass_ok(&plain);
    r.check(
        "3a",
        ok,
        format!("plain FP total mass within 1e-6 at all {} outputs (worst deviation {worst:.2e})", plain.len()),
    );
    let switched = fp_solve_switched(&FpSwitchedParams::crazy_clock_switch(0.003, 0.0001)).unwrap();
    let (ok, worst) = mass_ok(&switched);
    r.check(
        "3b",
        ok,
        format!("switched FP total mass within 1e-6 at all {} outputs (worst deviation {worst:.2e})", switched.len()),
    );
    r.check(
        "3c",
        initial_ok(&plain[0]) && initial_ok(&switched[0]),
        "initial condition pi_1 = 1 reproduced exactly by both solvers".into(),
    );
}

fn switched_suite(r: &mut Report) {
    let model = builtin("crazy_clock_switch").unwrap();
    let (u, interval) = (0.003, 0.0005);
    let runs = r.runs(100_000);
    let (ssa, _) = ensemble(&model, Method::Ssa, 1e-5, u, interval, runs, 3);
    let (hsjd, t_hsjd) = ensemble(&model, Method::Hsde, 1e-5, u, interval, runs, 4);
    let (hode, _) = ensemble(&model, Method::Hode, 1e-5, u, interval, r.runs(20_000), 5);

    let mode2 = |e: &Ensemble| -> Vec<(f64, bool)> {
        let a = e.values_at("A", u).unwrap();
        let c = e.values_at("C", u).unwrap();
        a.into_iter().zip(c).map(|(a, c)| (a, c == 0.0)).collect()
    };
    let h = mode2(&hsjd);
    let n = h.len() as f64;
    let below = h.iter().filter(|(a, m2)| *m2 && *a < 100.0).count() as f64 / n;
    let above = h.iter().filter(|(a, m2)| *m2 && *a > 650.0).count() as f64 / n;
    let s = mode2(&ssa);
    let s_below = s.iter().filter(|(a, m2)| *m2 && *a < 100.0).count() as f64 / s.len() as f64;
    let s_above = s.iter().filter(|(a, m2)| *m2 && *a > 650.0).count() as f64 / s.len() as f64;
    r.check(
        "4a",
        below >= 0.01 && above >= 0.01,
        format!(
            "switched HSJD mode-2 mass at u={u}: P(A<100) = {below:.4}, P(A>650) = {above:.4}, each >= 0.01 \
             (SSA {s_below:.4}, {s_above:.4}; {})",
            secs(t_hsjd)
        ),
    );

    let bin = 10.0;
    let o: Vec<f64> = mode2(&hode).into_iter().filter(|(_, m2)| *m2).map(|(a, _)| a).collect();
    let (lo, hi) = o.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &a| (l.min(a), h.max(a)));
    r.check(
        "4b",
        !o.is_empty() && lo >= 100.0 - bin && hi <= 650.0 + bin,
        format!(
            "switched HODE mode-2 support at u={u} = [{lo:.1}, {hi:.1}] over {} of {} runs, within [100, 650] +- {bin}",
            o.len(),
            hode.trajectories.len()
        ),
    );

    let d = ks_distance(&rounded(&hsjd.values_at("A", u).unwrap()), &ssa.values_at("A", u).unwrap());
    r.check("4c", d <= 0.05, format!("switched KS(HSJD, SSA) for A at u={u} = {d:.4}, limit 0.05"));
}

fn max_relative_error(a: &[MeanPoint], b: &[MeanPoint], from: f64) -> (f64, f64) {
    a.iter()
        .zip(b)
        .filter(|(p, q)| p.time >= from && q.mean > 0.0)
        .map(|(p, q)| ((p.mean - q.mean).abs() / q.mean, p.time))
        .fold((0.0, f64::NAN), |acc, x| if x.0 > acc.0 { x } else { acc })
}

fn viral_suite(r: &mut Report) {
    let model = builtin("viral").unwrap();
    let (step, t_end) = (0.05, 200.0);

    let (ode, _) = ensemble(&model, Method::Ode, step, t_end, 1.0, 1, 0);
    let plateau = ode.values_at("struct", 200.0).unwrap()[0];
    r.check(
        "5a",
        (plateau - 10000.0).abs() <= 500.0,
        format!("viral ODE struct(200) = {plateau:.0}, expected 10000 +- 5%"),
    );

    let ssa_runs = r.runs(1000);
    let (ssa, t_ssa) = ensemble(&model, Method::Ssa, step, t_end, 1.0, ssa_runs, 6);
    let ssa_mean = ensemble_mean(&ssa, "struct").unwrap();
    let m200 = ssa_mean.last().unwrap();
    r.check(
        "5b",
        (m200.mean - 7000.0).abs() <= 700.0,
        format!(
            "viral SSA mean struct(200) = {:.0} +- {:.0} over {ssa_runs} runs, expected 7000 +- 10% ({})",
            m200.mean,
            m200.stderr,
            secs(t_ssa)
        ),
    );

    let (sde, _) = ensemble(&model, Method::Sde, step, t_end, 1.0, r.runs(5000), 7);
    let (err, at) = max_relative_error(&ensemble_mean(&sde, "struct").unwrap(), &ssa_mean, 1.0);
    r.check(
        "5c",
        err <= 0.10,
        format!("viral SDE mean vs SSA mean: max relative error {:.1}% at day {at} over [1, 200], limit 10%", err * 100.0),
    );

    let hsjd_runs = r.runs(5000);
    let (hsjd, t_hsjd) = ensemble(&model, Method::Hsde, step, t_end, 1.0, hsjd_runs, 8);
    let p0 = fraction(&hsjd.values_at("struct", 200.0).unwrap(), |v| v == 0.0);
    let ssa_p0 = fraction(&ssa.values_at("struct", 200.0).unwrap(), |v| v == 0.0);
    r.check(
        "5d",
        (p0 - 0.25).abs() <= 0.03,
        format!("viral HSJD P(struct(200) = 0) = {p0:.4} over {hsjd_runs} runs, expected 0.25 +- 0.03 (SSA {ssa_p0:.4})"),
    );

    let (hode, _) = ensemble(&model, Method::Hode, step, t_end, 1.0, hsjd_runs, 9);
    for (id, name, e) in [("5e", "HSJD", &hsjd), ("5f", "HODE", &hode)] {
        let means = ensemble_mean(e, "struct").unwrap();
        let (err, at) = max_relative_error(&means, &ssa_mean, 20.0);
        let k = ssa_mean.iter().position(|p| p.time == at).unwrap_or(0);
        r.check(
            id,
            err <= 0.05,
            format!(
                "viral {name} mean vs SSA mean over [20, 200]: max relative error {:.1}% at day {at} \
                 (SSA {:.0} +- {:.0}, {name} {:.0}), limit 5%",
                err * 100.0,
                ssa_mean[k].mean,
                ssa_mean[k].stderr,
                means[k].mean
            ),
        );
    }
    r.check(
        "5g",
        t_hsjd <= Duration::from_secs(600),
        format!("viral HSJD {hsjd_runs} trajectories in {} (budget 600s)", secs(t_hsjd)),
    );
}

fn transcription_suite(r: &mut Report) {
    let model = builtin("transcription").unwrap();
    let (t_end, interval) = (720.0, 60.0);
    let runs = r.runs(5000);
    let (ssa, _) = ensemble(&model, Method::Ssa, 0.5, t_end, interval, runs, 10);
    let (hsjd, _) = ensemble(&model, Method::Hsde, 0.05, t_end, interval, runs, 11);
    let (hode, _) = ensemble(&model, Method::Hode, 0.05, t_end, interval, runs, 12);

    for (id, species) in [("6a", "E"), ("6b", "M")] {
        let d = ks_distance(
            &rounded(&hsjd.values_at(species, t_end).unwrap()),
            &ssa.values_at(species, t_end).unwrap(),
        );
        r.check(id, d <= 0.07, format!("transcription KS(HSJD, SSA) for {species} at t=720 = {d:.4}, limit 0.07"));
    }

    // Boundary atoms: states exactly on a bound of E (0 and 80) or M (0).
    let atoms = [("E", 0.0), ("E", 80.0), ("M", 0.0)];
    let atom = |e: &Ensemble, s: &str, b: f64| fraction(&e.values_at(s, t_end).unwrap(), |v| (v - b).abs() <= 1e-9);
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    let mut hode_mass: f64 = 0.0;
    for (s, b) in atoms {
        let (ps, ph, po) = (atom(&ssa, s, b), atom(&hsjd, s, b), atom(&hode, s, b));
        worst = worst.max((ps - ph).abs());
        hode_mass = hode_mass.max(po);
        detail.push(format!("P({s}={b}) SSA {ps:.4} HSJD {ph:.4}"));
    }
    r.check(
        "6c",
        worst <= 0.05,
        format!("transcription boundary atoms within 0.05: {} (worst gap {worst:.4})", detail.join(", ")),
    );
    r.check(
        "6d",
        hode_mass == 0.0,
        format!("transcription HODE boundary-atom mass at t=720 = {hode_mass:.4}, expected 0"),
    );
}

fn invariant_defect(model: &Model, counts: &[f64]) -> f64 {
    model
        .invariants
        .iter()
        .map(|inv| {
            let s: f64 = inv.weights.iter().zip(counts).map(|(&w, &c)| w as f64 * c).sum();
            (s - inv.total as f64).abs()
        })
        .fold(0.0, f64::max)
}

fn worst_defect(model: &Model, e: &Ensemble) -> f64 {
    e.trajectories
        .iter()
        .flat_map(|tr| tr.samples.iter())
        .map(|(_, s)| invariant_defect(model, &e.layout.unscaled(s)))
        .fold(0.0, f64::max)
}

fn scaling_gap(model: &Model, n: u64) -> f64 {
    let model = model.with_scale(n).unwrap();
    let layout = Layout::all_fluid(&model);
    let mut worst: f64 = 0.0;
    for i in 0..=10u64 {
        for j in 0..=(10 - i) {
            let y = [i as f64 / 10.0, j as f64 / 10.0];
            let counts = [y[0] * n as f64, y[1] * n as f64];
            for k in 0..model.reactions.len() {
                let lam = intensity(&model, &counts, k).unwrap() / n as f64;
                worst = worst.max((lam - density_f(&model, &layout, &y, k).unwrap()).abs());
            }
        }
    }
    worst
}

fn property_suite(r: &mut Report) {
    let mut ssa_worst: f64 = 0.0;
    let mut hsjd_worst: f64 = 0.0;
    for (name, t, step) in [("crazy_clock", 0.002, 1e-5), ("crazy_clock_switch", 0.003, 1e-5), ("transcription", 100.0, 0.05)] {
        let model = builtin(name).unwrap();
        let (e, _) = ensemble(&model, Method::Ssa, step, t, t / 10.0, 200, 13);
        ssa_worst = ssa_worst.max(worst_defect(&model, &e));
        let (e, _) = ensemble(&model, Method::Hsde, step, t, t / 10.0, 200, 14);
        hsjd_worst = hsjd_worst.max(worst_defect(&model, &e) / model.scale as f64);
    }
    r.check("7a", ssa_worst == 0.0, format!("SSA P-invariant defect = {ssa_worst} (exact)"));
    r.check("7b", hsjd_worst <= 1e-9, format!("HSJD P-invariant defect (density units) = {hsjd_worst:.2e}, limit 1e-9"));

    let exchange = parse_model(
        "model exchange
scale N = 1000
species X : fluid, init 400
species Y : fluid, init 600
reaction forward : X -> Y @ mass_action 1.0
reaction backward : Y -> X @ mass_action 1.0
",
    )
    .unwrap();
    let gene = parse_model(
        "model gene
scale N = 1000
species On : discrete, init 1
species Off : discrete, init 0
species X : fluid, init 500
reaction deactivate : On -> Off @ mass_action 2.0
reaction activate : Off -> On @ mass_action 2.0
reaction produce : On -> On + X @ mass_action 1000.0
reaction degrade : X -> 0 @ mass_action 1.0
",
    )
    .unwrap();
    let path = |m: &Model, method: Method, noise: bool, k: usize| {
        let mut c = SimConfig::new(method, 0.001, 2.0, 0.1).with_seed(21);
        c.noise = noise;
        simulate_run(m, &c, k).unwrap().samples
    };
    let mut identities = true;
    for k in 0..5 {
        identities &= path(&exchange, Method::Hsde, true, k) == path(&exchange, Method::Sde, true, k);
        identities &= path(&exchange, Method::Sde, false, k) == path(&exchange, Method::Ode, true, k);
        identities &= path(&gene, Method::Hsde, false, k) == path(&gene, Method::Hode, true, k);
    }
    r.check(
        "7c",
        identities,
        "reduction identities HSJD=SDE (no discrete events, no contact), SDE(noise off)=ODE, HSJD(noise off)=HODE".into(),
    );

    let abc = builtin("abc").unwrap();
    let gaps: Vec<f64> = [100, 1000, 10000].iter().map(|&n| scaling_gap(&abc, n)).collect();
    let tightening = gaps.windows(2).all(|w| (8.0..=12.0).contains(&(w[0] / w[1])));
    r.check(
        "7d",
        tightening,
        format!("near-density-dependence gap for abc at N=1e2,1e3,1e4: {:.3e}, {:.3e}, {:.3e} (O(1/N))", gaps[0], gaps[1], gaps[2]),
    );
    let epidemic = builtin("epidemic").unwrap();
    let g = [100, 1000, 10000].iter().map(|&n| scaling_gap(&epidemic, n)).fold(0.0, f64::max);
    r.check("7e", g <= 1e-12, format!("epidemic generator N f(k/N) constant in N: max gap {g:.1e}"));

    let small = crazy_clock(20, 3.0, 60.0).unwrap();
    let (e, _) = ensemble(&small, Method::Ssa, 0.01, 0.05, 0.05, r.runs(100_000), 15);
    let tv = common::total_variation(
        &common::empirical_pmf(&e.values_at("A", 0.05).unwrap(), 20),
        &common::crazy_clock_transient(20, 3.0, 60.0, 0.05),
    );
    r.check("7f", tv <= 0.02, format!("SSA vs uniformization oracle (N=20, u=0.05): total variation {tv:.4}, limit 0.02"));

    let csv = |method: Method, seed: u64| {
        let model = builtin("crazy_clock_switch").unwrap();
        let (e, _) = ensemble(&model, method, 1e-5, 0.002, 0.0004, 30, seed);
        let mut out = Vec::new();
        e.write_csv(&mut out).unwrap();
        out
    };
    let reproducible = Method::ALL.iter().all(|&m| csv(m, 99) == csv(m, 99));
    r.check("7g", reproducible, "trajectory CSV byte-identical across reruns for every method".into());
}

fn main() {
    let quick = std::env::var("HSJD_ACCEPTANCE_QUICK").is_ok_and(|v| v == "1");
    let strict = std::env::var("HSJD_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut r = Report {
        passed: 0,
        failed: Vec::new(),
        quick,
    };
    let start = Instant::now();
    crazy_clock_suite(&mut r);
    fokker_planck_suite(&mut r);
    switched_suite(&mut r);
    viral_suite(&mut r);
    transcription_suite(&mut r);
    property_suite(&mut r);
    println!(
        "acceptance: {} passed, {} failed{} in {}",
        r.passed,
        r.failed.len(),
        if r.failed.is_empty() { String::new() } else { format!(" ({})", r.failed.join(", ")) },
        secs(start.elapsed())
    );
    if strict && !r.failed.is_empty() {
        std::process::exit(1);
    }
}
