//! Built-in example networks.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::parser::parse_model;

pub const BUILTIN_NAMES: [&str; 6] = [
    "epidemic",
    "abc",
    "crazy_clock",
    "crazy_clock_switch",
    "viral",
    "transcription",
];

/// One-line description of each built-in, for listings.
pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "epidemic" => "S/I epidemic with immigration (exactly density dependent; illustrative rates)",
        "abc" => "A+B->2A, 2A->A+B, 2A+B->A+B mass-action triple (illustrative rates)",
        "crazy_clock" => "autocatalytic A->B, A+B->2B with N=1000, lambda1=3, lambda2=6000",
        "crazy_clock_switch" => "crazy clock whose autocatalysis doubles after a one-way switch C->0",
        "viral" => "intracellular viral kinetics, N=20000, gen and tem discrete",
        "transcription" => "transcriptional regulation with enzymatic sink, N=650, DNA states discrete",
        _ => return None,
    })
}

/// Constructs a built-in model by name.
pub fn builtin(name: &str) -> Result<Model> {
    let text = match name {
        "epidemic" => EPIDEMIC.to_string(),
        "abc" => ABC.to_string(),
        "crazy_clock" => return crazy_clock(1000, 3.0, 6000.0),
        "crazy_clock_switch" => crazy_clock_switch_text(),
        "viral" => viral_text(),
        "transcription" => transcription_text(1.0),
        _ => {
            return Err(Error::Model(format!(
                "unknown built-in model '{name}' (available: {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    parse_model(&text)
}

/// The two-species crazy clock `A -> B` (rate `lambda1`), `A + B -> 2B`
/// (rate `lambda2`) at scale `n`, starting from `(n, 0)`.
pub fn crazy_clock(n: u64, lambda1: f64, lambda2: f64) -> Result<Model> {
    parse_model(&format!(
        "model crazy_clock
scale N = {n}
param lambda1 = {lambda1:?}
param lambda2 = {lambda2:?}
species A : fluid, init {n}
species B : fluid, init 0
reaction conversion : A -> B @ mass_action lambda1
reaction autocatalysis : A + B -> 2 B @ mass_action lambda2
"
    ))
}

/// Transcription network with an explicit value for the `EM -> E + P` rate.
pub fn transcription(mu13: f64) -> Result<Model> {
    parse_model(&transcription_text(mu13))
}

const EPIDEMIC: &str = "model epidemic
scale N = 1000
param lambda1 = 0.5
param lambda2 = 2.0
param lambda3 = 1.0
species S : fluid, init 500
species I : fluid, init 10
reaction birth : 0 -> S @ mass_action lambda1
reaction infection : S + I -> 2 I @ mass_action lambda2
reaction recovery : I -> 0 @ mass_action lambda3
";

const ABC: &str = "model abc
scale N = 1000
param nu1 = 1.0
param nu2 = 0.5
param nu3 = 0.2
species A : fluid, init 300
species B : fluid, init 700
reaction r1 : A + B -> 2 A @ mass_action nu1
reaction r2 : 2 A -> A + B @ mass_action nu2
reaction r3 : 2 A + B -> A + B @ mass_action nu3
";

fn crazy_clock_switch_text() -> String {
    "model crazy_clock_switch
scale N = 1000
param lambda1 = 3.0
param lambda2 = 3000.0
param lambda3 = 500.0
param S = 50.0
species A : fluid, init 1000
species B : fluid, init 0
species C : discrete, init 1
reaction conversion : A -> B @ mass_action lambda1
reaction autocatalysis : A + B -> 2 B @ expr lambda2 / 2 * (2 - C) * A * B / N
reaction switch : C -> 0 @ expr C * max(0, lambda3 * (A - (N - S)) / S)
"
    .to_string()
}

fn viral_text() -> String {
    let n = 20000u64;
    // The per-pair rate of gen + struct -> 0 is given divided by N.
    let mu4 = 7.5e-6 * n as f64;
    format!(
        "model viral
scale N = {n}
param mu1 = 0.025
param mu2 = 0.25
param mu3 = 1.0
param mu4 = {mu4:?}
param mu5 = 1000.0
param mu6 = 2.0
species gen : discrete, init 0
species tem : discrete, init 1
species struct : fluid, init 0
reaction k1 : gen -> tem @ mass_action mu1
reaction k2 : tem -> 0 @ mass_action mu2
reaction k3 : tem -> tem + gen @ mass_action mu3
reaction k4 : gen + struct -> 0 @ mass_action mu4
reaction k5 : tem -> tem + struct @ mass_action mu5
reaction k6 : struct -> 0 @ mass_action mu6
"
    )
}

fn transcription_text(mu13: f64) -> String {
    let n = 650u64;
    let nf = n as f64;
    // Second-order rates are tabulated divided by N (2N for dimerisation).
    let mu5 = 0.014 * nf;
    let mu7 = 0.00014 * nf;
    let mu9 = 0.029 * 2.0 * nf;
    let mu11 = 0.001 * nf;
    format!(
        "model transcription
scale N = {n}
param mu1 = 0.043
param mu2 = 0.0001
param mu3 = 0.72
param mu4 = 0.0039
param mu5 = {mu5:?}
param mu6 = 0.48
param mu7 = {mu7:?}
param mu8 = 8.8e-12
param mu9 = {mu9:?}
param mu10 = 0.5
param mu11 = {mu11:?}
param mu12 = 0.0001
param mu13 = {mu13:?}
species D : fluid, init 40
species DNA : discrete, init 2
species DNA_D : discrete, init 0
species DNA_2D : discrete, init 0
species mRNA : fluid, init 0
species M : fluid, init 0
species E : fluid, init 80
species EM : fluid, init 0
species P : fluid, init 0
reaction k1 : mRNA -> mRNA + M @ mass_action mu1
reaction k2 : M -> 0 @ mass_action mu2
reaction k3 : DNA_D -> DNA_D + mRNA @ mass_action mu3
reaction k4 : mRNA -> 0 @ mass_action mu4
reaction k5 : DNA + D -> DNA_D @ mass_action mu5
reaction k6 : DNA_D -> DNA + D @ mass_action mu6
reaction k7 : DNA_D + D -> DNA_2D @ mass_action mu7
reaction k8 : DNA_2D -> DNA_D + D @ mass_action mu8
reaction k9 : 2 M -> D @ mass_action mu9
reaction k10 : D -> 2 M @ mass_action mu10
reaction k11 : E + M -> EM @ mass_action mu11
reaction k12 : EM -> E + M @ mass_action mu12
reaction k13 : EM -> E + P @ mass_action mu13
"
    )
}
