//! Line-oriented model DSL.
//!
//! ```text
//! # comment
//! model crazy_clock
//! scale N = 1000
//! param lambda1 = 3
//! species A : fluid, init 1000, bounds [0, inf]
//! reaction conversion : A -> B @ mass_action lambda1
//! reaction switch : C -> 0 @ expr max(0, 500*(A - 950)/50)
//! ```
//!
//! Reactions may reference species and parameters declared anywhere in the
//! file. An optional `partition strict|relaxed` line selects the static
//! partition mode.

use crate::error::{Error, Result};
use crate::expr::{tokenize, ExprParser, Symbols, Tok, Token};
use crate::model::{
    validate_model, Model, Param, PartitionMode, RateLaw, Reaction, Species, SpeciesKind,
};
use std::fmt::Write;

struct Line<'a> {
    number: usize,
    tokens: Vec<Token>,
    end_column: usize,
    #[allow(dead_code)]
    text: &'a str,
}

struct Cursor<'l> {
    tokens: &'l [Token],
    pos: usize,
    line: usize,
    end_column: usize,
}

impl<'l> Cursor<'l> {
    fn new(line: &'l Line<'_>) -> Self {
        Cursor {
            tokens: &line.tokens,
            pos: 0,
            line: line.number,
            end_column: line.end_column,
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end_column, |t| t.column)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::parse(self.line, self.column(), message)
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<()> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == word => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected '{word}'"))),
        }
    }

    fn sym(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// A real literal with optional leading sign.
    fn real(&mut self, what: &str) -> Result<f64> {
        let negative = self.eat_sym('-');
        if !negative {
            self.eat_sym('+');
        }
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.error(format!("expected numeric {what}"))),
        }
    }

    fn integer(&mut self, what: &str) -> Result<u64> {
        let column = self.column();
        match self.peek() {
            Some(Tok::Num(v)) if v.fract() == 0.0 && *v >= 0.0 && *v < 9.0e15 => {
                let v = *v as u64;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(Error::parse(self.line, column, format!("expected non-negative integer {what}"))),
        }
    }

    fn end(&self) -> Result<()> {
        if self.pos < self.tokens.len() {
            Err(self.error("unexpected trailing input"))
        } else {
            Ok(())
        }
    }
}

fn split_lines(text: &str) -> Result<Vec<Line<'_>>> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(body, i + 1)?;
        if tokens.is_empty() {
            continue;
        }
        lines.push(Line {
            number: i + 1,
            tokens,
            end_column: body.chars().count() + 1,
            text: raw,
        });
    }
    Ok(lines)
}

fn keyword_of<'a>(line: &'a Line<'_>) -> Option<&'a str> {
    match &line.tokens[0].tok {
        Tok::Ident(s) => Some(s.as_str()),
        _ => None,
    }
}

/// Parses and validates a model written in the DSL.
pub fn parse_model(text: &str) -> Result<Model> {
    let lines = split_lines(text)?;
    let Some(first) = lines.first() else {
        return Err(Error::parse(1, 1, "missing model header"));
    };
    if keyword_of(first) != Some("model") {
        return Err(Error::parse(first.number, 1, "missing model header"));
    }
    let mut c = Cursor::new(first);
    c.keyword("model")?;
    let name = c.ident("model name")?;
    c.end()?;

    let mut scale = None;
    let mut model = Model::new(&name, 1);
    let mut reaction_lines = Vec::new();
    let mut seen_partition = false;

    // First pass: everything except reactions, so that reactions and
    // expressions may refer to symbols declared later in the file.
    for line in &lines[1..] {
        let mut c = Cursor::new(line);
        match keyword_of(line) {
            Some("model") => return Err(c.error("duplicate model header")),
            Some("scale") => {
                if scale.is_some() {
                    return Err(c.error("duplicate scale declaration"));
                }
                c.pos += 1;
                c.keyword("N")?;
                c.sym('=')?;
                let n = c.integer("scale")?;
                if n == 0 {
                    return Err(Error::parse(line.number, c.tokens[c.pos - 1].column, "scale N must be positive"));
                }
                c.end()?;
                scale = Some(n);
            }
            Some("partition") => {
                if seen_partition {
                    return Err(c.error("duplicate partition declaration"));
                }
                c.pos += 1;
                let column = c.column();
                model.partition_mode = match c.ident("partition mode")?.as_str() {
                    "strict" => PartitionMode::Strict,
                    "relaxed" => PartitionMode::Relaxed,
                    other => {
                        return Err(Error::parse(
                            line.number,
                            column,
                            format!("unknown partition mode '{other}' (expected strict or relaxed)"),
                        ))
                    }
                };
                c.end()?;
                seen_partition = true;
            }
            Some("param") => {
                c.pos += 1;
                let name = c.ident("parameter name")?;
                c.sym('=')?;
                let value = c.real("parameter value")?;
                c.end()?;
                if model.param_index(&name).is_some() {
                    return Err(Error::parse(line.number, 1, format!("duplicate parameter '{name}'")));
                }
                model.params.push(Param { name, value });
            }
            Some("species") => {
                c.pos += 1;
                let species = parse_species(&mut c)?;
                if model.species_index(&species.name).is_some() {
                    return Err(Error::parse(line.number, 1, format!("duplicate species '{}'", species.name)));
                }
                model.species.push(species);
            }
            Some("reaction") => reaction_lines.push(line),
            _ => return Err(Error::parse(line.number, line.tokens[0].column, "unknown declaration")),
        }
    }
    let Some(scale) = scale else {
        return Err(Error::parse(first.number, 1, "missing 'scale N = <int>' declaration"));
    };
    model.scale = scale;
    for name in model.species.iter().map(|s| &s.name) {
        if name == "N" || model.param_index(name).is_some() {
            return Err(Error::Model(format!("species name '{name}' clashes with another symbol")));
        }
    }
    if model.param_index("N").is_some() {
        return Err(Error::Model("parameter name 'N' is reserved for the scale".into()));
    }

    for line in reaction_lines {
        let reaction = parse_reaction(line, &model)?;
        if model.reaction_index(&reaction.name).is_some() {
            return Err(Error::parse(line.number, 1, format!("duplicate reaction '{}'", reaction.name)));
        }
        model.reactions.push(reaction);
    }
    validate_model(model)
}

fn parse_species(c: &mut Cursor<'_>) -> Result<Species> {
    let name = c.ident("species name")?;
    c.sym(':')?;
    let column = c.column();
    let kind = match c.ident("species kind")?.as_str() {
        "fluid" => SpeciesKind::Fluid,
        "discrete" => SpeciesKind::Discrete,
        other => {
            return Err(Error::parse(
                c.line,
                column,
                format!("unknown species kind '{other}' (expected fluid or discrete)"),
            ))
        }
    };
    let mut species = Species::new(&name, kind, 0);
    let mut seen_init = false;
    let mut seen_bounds = false;
    while c.eat_sym(',') {
        let column = c.column();
        match c.ident("'init' or 'bounds'")?.as_str() {
            "init" if !seen_init => {
                species.init_count = c.integer("initial count")?;
                seen_init = true;
            }
            "bounds" if !seen_bounds => {
                c.sym('[')?;
                let lower = c.integer("lower bound")?;
                c.sym(',')?;
                let upper = match c.peek() {
                    Some(Tok::Ident(s)) if s == "inf" => {
                        c.pos += 1;
                        None
                    }
                    _ => Some(c.integer("upper bound or 'inf'")?),
                };
                c.sym(']')?;
                species.lower_bound = Some(lower);
                species.upper_bound = upper;
                seen_bounds = true;
            }
            other => {
                return Err(Error::parse(c.line, column, format!("unexpected species attribute '{other}'")));
            }
        }
    }
    c.end()?;
    Ok(species)
}

fn parse_side(c: &mut Cursor<'_>, model: &Model, stop: impl Fn(Option<&Tok>) -> bool) -> Result<Vec<u32>> {
    let mut stoich = vec![0u32; model.species.len()];
    if stop(c.peek()) {
        return Ok(stoich);
    }
    if matches!(c.peek(), Some(Tok::Sym('∅'))) || matches!(c.peek(), Some(Tok::Num(v)) if *v == 0.0) {
        c.pos += 1;
        return Ok(stoich);
    }
    loop {
        let coefficient = match c.peek() {
            Some(Tok::Num(_)) => {
                let k = c.integer("stoichiometric coefficient")?;
                if k == 0 || k > u32::MAX as u64 {
                    return Err(Error::parse(c.line, c.tokens[c.pos - 1].column, "stoichiometric coefficient must be positive"));
                }
                k as u32
            }
            _ => 1,
        };
        let column = c.column();
        let name = c.ident("species name")?;
        let i = model
            .species_index(&name)
            .ok_or_else(|| Error::parse(c.line, column, format!("unknown species '{name}'")))?;
        stoich[i] += coefficient;
        if !c.eat_sym('+') {
            return Ok(stoich);
        }
    }
}

fn parse_reaction(line: &Line<'_>, model: &Model) -> Result<Reaction> {
    let mut c = Cursor::new(line);
    c.keyword("reaction")?;
    let name = c.ident("reaction name")?;
    c.sym(':')?;
    let input = parse_side(&mut c, model, |t| t == Some(&Tok::Arrow))?;
    if c.peek() != Some(&Tok::Arrow) {
        return Err(c.error("expected '->'"));
    }
    c.pos += 1;
    let output = parse_side(&mut c, model, |t| t == Some(&Tok::Sym('@')))?;
    c.sym('@')?;
    let column = c.column();
    let rate = match c.ident("'mass_action' or 'expr'")?.as_str() {
        "mass_action" => {
            let column = c.column();
            let rate = match c.peek() {
                Some(Tok::Ident(p)) => {
                    let p = p.clone();
                    let i = model
                        .param_index(&p)
                        .ok_or_else(|| Error::parse(line.number, column, format!("unknown parameter '{p}'")))?;
                    c.pos += 1;
                    RateLaw::MassAction {
                        rate: model.params[i].value,
                        param: Some(p),
                    }
                }
                _ => RateLaw::MassAction {
                    rate: c.real("rate constant")?,
                    param: None,
                },
            };
            c.end()?;
            rate
        }
        "expr" => {
            let symbols = model.symbols();
            let mut parser = ExprParser {
                tokens: &line.tokens[c.pos..],
                pos: 0,
                line: line.number,
                end_column: line.end_column,
                symbols: &symbols,
            };
            if parser.tokens.is_empty() {
                return Err(Error::parse(line.number, line.end_column, "expected rate expression"));
            }
            let e = parser.sum()?;
            parser.expect_end()?;
            RateLaw::Expr(e)
        }
        other => {
            return Err(Error::parse(
                line.number,
                column,
                format!("unknown rate law '{other}' (expected mass_action or expr)"),
            ))
        }
    };
    Ok(Reaction {
        name,
        input,
        output,
        rate,
    })
}

fn format_real(v: f64) -> String {
    format!("{v:?}")
}

fn format_side(stoich: &[u32], symbols: &Symbols<'_>) -> String {
    let terms: Vec<String> = stoich
        .iter()
        .enumerate()
        .filter(|(_, k)| **k > 0)
        .map(|(i, k)| {
            if *k == 1 {
                symbols.species[i].to_string()
            } else {
                format!("{k} {}", symbols.species[i])
            }
        })
        .collect();
    if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join(" + ")
    }
}

/// Canonical DSL text; declaration order is preserved.
pub fn serialize_model(model: &Model) -> String {
    let symbols = model.symbols();
    let mut out = String::new();
    let _ = writeln!(out, "model {}", model.name);
    let _ = writeln!(out, "scale N = {}", model.scale);
    if model.partition_mode == PartitionMode::Strict {
        let _ = writeln!(out, "partition strict");
    }
    for p in &model.params {
        let _ = writeln!(out, "param {} = {}", p.name, format_real(p.value));
    }
    for s in &model.species {
        let kind = match s.kind {
            SpeciesKind::Fluid => "fluid",
            SpeciesKind::Discrete => "discrete",
        };
        let _ = write!(out, "species {} : {kind}, init {}", s.name, s.init_count);
        if s.lower_bound.is_some() || s.upper_bound.is_some() {
            let upper = s.upper_bound.map_or("inf".to_string(), |u| u.to_string());
            let _ = write!(out, ", bounds [{}, {upper}]", s.lower_bound.unwrap_or(0));
        }
        out.push('\n');
    }
    for r in &model.reactions {
        let rate = match &r.rate {
            RateLaw::MassAction { param: Some(p), .. } => format!("mass_action {p}"),
            RateLaw::MassAction { rate, param: None } => format!("mass_action {}", format_real(*rate)),
            RateLaw::Expr(e) => format!("expr {}", e.to_text(&symbols)),
        };
        let _ = writeln!(
            out,
            "reaction {} : {} -> {} @ {rate}",
            r.name,
            format_side(&r.input, &symbols),
            format_side(&r.output, &symbols)
        );
    }
    out
}

/// Parses a bounds-override file: one `name lower upper` line per species,
/// `inf` allowed for `upper`, `#` comments.
pub fn parse_bounds_file(text: &str) -> Result<Vec<(String, u64, Option<u64>)>> {
    let mut out = Vec::new();
    for line in split_lines(text)? {
        let mut c = Cursor::new(&line);
        let name = c.ident("species name")?;
        let lower = c.integer("lower bound")?;
        let upper = match c.peek() {
            Some(Tok::Ident(s)) if s == "inf" => {
                c.pos += 1;
                None
            }
            _ => Some(c.integer("upper bound or 'inf'")?),
        };
        c.end()?;
        if out.iter().any(|(n, _, _): &(String, u64, Option<u64>)| *n == name) {
            return Err(Error::parse(line.number, 1, format!("duplicate bounds for '{name}'")));
        }
        out.push((name, lower, upper));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{builtin, BUILTIN_NAMES};

    const SWITCH: &str = "\
# switched autocatalysis
model sw
scale N = 1000
param lambda1 = 3
param lambda2 = 3000
species A : fluid, init 1000
species B : fluid, init 0
species C : discrete, init 1
reaction conversion : A -> B @ mass_action lambda1
reaction autocatalysis : A + B -> 2 B @ expr lambda2 / 2 * (2 - C) * A * B / N
reaction switch : C -> 0 @ expr max(0, 500*(A - 950)/50)
";

    #[test]
    fn parses_switched_model() {
        let m = parse_model(SWITCH).unwrap();
        assert_eq!(m.species.len(), 3);
        assert_eq!(m.reactions.len(), 3);
        assert_eq!(m.species[2].kind, SpeciesKind::Discrete);
        assert_eq!(m.scale, 1000);
        assert!(matches!(m.reactions[0].rate, RateLaw::MassAction { rate, .. } if rate == 3.0));
        assert_eq!(m.reactions[2].output, vec![0, 0, 0]);
    }

    #[test]
    fn empty_text_reports_missing_header() {
        let err = parse_model("").unwrap_err();
        assert_eq!(err, Error::parse(1, 1, "missing model header"));
        assert!(err.to_string().contains("missing model header"));
        assert!(matches!(parse_model("# only a comment\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn builtins_round_trip() {
        for name in BUILTIN_NAMES {
            let m = builtin(name).unwrap();
            let text = serialize_model(&m);
            let back = parse_model(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
            assert_eq!(back, m, "{name}");
            assert_eq!(serialize_model(&back), text);
        }
    }

    #[test]
    fn viral_serialization_mentions_fluid_struct() {
        let text = serialize_model(&builtin("viral").unwrap());
        assert!(text.contains("species struct : fluid"), "{text}");
    }

    #[test]
    fn error_positions() {
        let cases = [
            ("model m\nscale N = 10\nspecies A : fluid\nreaction r : A -> Q @ mass_action 1\n", 4, 19, "unknown species"),
            ("model m\nscale N = 10\nparam k = abc\n", 3, 11, "numeric"),
            ("model m\nscale N = 10\nspecies A : fluid\nreaction r : A -> 0 @ expr max(A\n", 4, 28, "parenthes"),
            ("model m\nscale N = 10\nspecies A : fluid\nreaction r : A -> 0 @ expr min(A)\n", 4, 0, "2 arguments"),
            ("model m\nscale N = 10\nspecies A : fluid\nreaction r : A -> 0 @ mass_action 1 extra\n", 4, 37, "trailing"),
            ("model m\nscale N = 10\nspecies A : gas\n", 3, 13, "species kind"),
            ("model m\nspecies A : fluid\n", 1, 1, "scale"),
        ];
        for (text, line, column, needle) in cases {
            match parse_model(text) {
                Err(Error::Parse { line: l, column: c, message }) => {
                    assert_eq!(l, line, "{text}: {message}");
                    if column > 0 {
                        assert_eq!(c, column, "{text}: {message}");
                    }
                    assert!(message.contains(needle), "{message}");
                }
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn mass_action_accepts_literal_and_empty_sides() {
        let m = parse_model(
            "model m\nscale N = 10\nspecies A : fluid, init 3, bounds [0, inf]\nreaction in : ∅ -> A @ mass_action 2.5e-1\nreaction out : 2A -> @ mass_action 1\n",
        )
        .unwrap();
        assert!(matches!(m.reactions[0].rate, RateLaw::MassAction { rate, param: None } if rate == 0.25));
        assert_eq!(m.reactions[1].input, vec![2]);
        assert_eq!(m.species[0].upper_bound, None);
        assert_eq!(m.species[0].lower_bound, Some(0));
        let back = parse_model(&serialize_model(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn partition_line_round_trips() {
        let text = SWITCH.replace("scale N = 1000\n", "scale N = 1000\npartition strict\n");
        let m = parse_model(&text).unwrap();
        assert_eq!(m.partition_mode, PartitionMode::Strict);
        assert!(serialize_model(&m).contains("partition strict"));
        assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }

    #[test]
    fn bounds_file() {
        let b = parse_bounds_file("# overrides\nA 0 500\nB 10 inf\n").unwrap();
        assert_eq!(b, vec![("A".into(), 0, Some(500)), ("B".into(), 10, None)]);
        assert!(matches!(parse_bounds_file("A 0\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn serialization_is_deterministic() {
        let m = builtin("transcription").unwrap();
        assert_eq!(serialize_model(&m), serialize_model(&m));
    }
}
