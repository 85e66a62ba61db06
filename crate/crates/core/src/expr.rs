//! Arithmetic rate expressions.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' sum ',' sum ')' | '(' sum ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-2^2`
//! is `-4` and `2^3^2` is `512`. Identifiers resolve to species (raw
//! counts), parameters, or the scale `N`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Max,
    Min,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Max => "max",
            Func::Min => "min",
        }
    }
}

/// Expression tree for a reaction intensity in raw counts.
#[derive(Debug, Clone, PartialEq)]
pub enum RateExpr {
    Num(f64),
    /// Raw count of the species at this index.
    Species(usize),
    /// Model parameter at this index.
    Param(usize),
    /// The scale parameter `N`.
    Scale,
    Neg(Box<RateExpr>),
    Binary(BinOp, Box<RateExpr>, Box<RateExpr>),
    Call(Func, Box<RateExpr>, Box<RateExpr>),
}

/// Names visible to an expression.
#[derive(Debug, Clone, Default)]
pub struct Symbols<'a> {
    pub species: Vec<&'a str>,
    pub params: Vec<&'a str>,
}

/// Values an expression is evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub counts: &'a [f64],
    pub scale: f64,
    pub params: &'a [f64],
}

impl RateExpr {
    pub fn eval(&self, ctx: &EvalContext<'_>) -> Result<f64> {
        let value = match self {
            RateExpr::Num(v) => *v,
            RateExpr::Species(i) => ctx.counts[*i],
            RateExpr::Param(i) => ctx.params[*i],
            RateExpr::Scale => ctx.scale,
            RateExpr::Neg(e) => -e.eval(ctx)?,
            RateExpr::Binary(op, a, b) => {
                let a = a.eval(ctx)?;
                let b = b.eval(ctx)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(Error::Eval("division by zero".into()));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            RateExpr::Call(func, a, b) => {
                let a = a.eval(ctx)?;
                let b = b.eval(ctx)?;
                match func {
                    Func::Max => a.max(b),
                    Func::Min => a.min(b),
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Eval(format!("non-finite value {value}")))
        }
    }

    /// Species indices the expression reads.
    pub fn species_deps(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_species(&mut out);
        out
    }

    fn collect_species(&self, out: &mut BTreeSet<usize>) {
        match self {
            RateExpr::Species(i) => {
                out.insert(*i);
            }
            RateExpr::Num(_) | RateExpr::Param(_) | RateExpr::Scale => {}
            RateExpr::Neg(e) => e.collect_species(out),
            RateExpr::Binary(_, a, b) | RateExpr::Call(_, a, b) => {
                a.collect_species(out);
                b.collect_species(out);
            }
        }
    }

    /// Renders the expression with the minimal parentheses needed to
    /// parse back to the same tree.
    pub fn to_text(&self, symbols: &Symbols<'_>) -> String {
        let mut out = String::new();
        self.write_text(symbols, &mut out);
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            RateExpr::Binary(op, _, _) => op.precedence(),
            RateExpr::Neg(_) => 3,
            _ => 5,
        }
    }

    fn write_text(&self, symbols: &Symbols<'_>, out: &mut String) {
        match self {
            RateExpr::Num(v) => {
                let _ = write!(out, "{v:?}");
            }
            RateExpr::Species(i) => out.push_str(symbols.species[*i]),
            RateExpr::Param(i) => out.push_str(symbols.params[*i]),
            RateExpr::Scale => out.push('N'),
            RateExpr::Neg(e) => {
                out.push('-');
                write_child(e, e.precedence() < 3, symbols, out);
            }
            RateExpr::Binary(op, a, b) => {
                let p = op.precedence();
                let (left_paren, right_paren) = if *op == BinOp::Pow {
                    // Right operand is parsed as a unary expression.
                    (a.precedence() <= p, b.precedence() < 3)
                } else {
                    (a.precedence() < p, b.precedence() <= p)
                };
                write_child(a, left_paren, symbols, out);
                let _ = write!(out, " {} ", op.symbol());
                write_child(b, right_paren, symbols, out);
            }
            RateExpr::Call(func, a, b) => {
                out.push_str(func.name());
                out.push('(');
                a.write_text(symbols, out);
                out.push_str(", ");
                b.write_text(symbols, out);
                out.push(')');
            }
        }
    }
}

fn write_child(e: &RateExpr, paren: bool, symbols: &Symbols<'_>, out: &mut String) {
    if paren {
        out.push('(');
        e.write_text(symbols, out);
        out.push(')');
    } else {
        e.write_text(symbols, out);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    Arrow,
}

/// Token with its 1-based column.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub column: usize,
}

/// Splits one line into tokens. Columns are 1-based and counted in chars.
pub(crate) fn tokenize(text: &str, line: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lexeme: String = chars[start..i].iter().collect();
            let value = lexeme
                .parse::<f64>()
                .map_err(|_| Error::parse(line, column, format!("malformed number '{lexeme}'")))?;
            out.push(Token {
                tok: Tok::Num(value),
                column,
            });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                column,
            });
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            out.push(Token {
                tok: Tok::Arrow,
                column,
            });
            i += 2;
        } else if "+-*/^(),:=@[]".contains(c) || c == '∅' {
            out.push(Token {
                tok: Tok::Sym(c),
                column,
            });
            i += 1;
        } else {
            return Err(Error::parse(line, column, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

/// Parses a standalone rate expression.
pub fn parse_rate_expr(text: &str, symbols: &Symbols<'_>) -> Result<RateExpr> {
    let tokens = tokenize(text, 1)?;
    let end_column = text.chars().count() + 1;
    let mut parser = ExprParser {
        tokens: &tokens,
        pos: 0,
        line: 1,
        end_column,
        symbols,
    };
    let expr = parser.sum()?;
    parser.expect_end()?;
    Ok(expr)
}

pub(crate) struct ExprParser<'t, 's> {
    pub tokens: &'t [Token],
    pub pos: usize,
    pub line: usize,
    pub end_column: usize,
    pub symbols: &'t Symbols<'s>,
}

impl ExprParser<'_, '_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map_or(self.end_column, |t| t.column)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::parse(self.line, self.column(), message)
    }

    pub fn expect_end(&self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(Tok::Sym(')')) => Err(self.error("unbalanced parentheses: unexpected ')'")),
            Some(tok) => Err(self.error(format!("unexpected trailing input {tok:?}"))),
        }
    }

    pub fn sum(&mut self) -> Result<RateExpr> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym('+')) => BinOp::Add,
                Some(Tok::Sym('-')) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = RateExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<RateExpr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym('*')) => BinOp::Mul,
                Some(Tok::Sym('/')) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = RateExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<RateExpr> {
        if self.peek() == Some(&Tok::Sym('-')) {
            self.pos += 1;
            return Ok(RateExpr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<RateExpr> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Sym('^')) {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(RateExpr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<RateExpr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("unexpected end of expression"));
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(RateExpr::Num(v))
            }
            Tok::Sym('(') => {
                let open_column = self.column();
                self.pos += 1;
                let inner = self.sum()?;
                if self.peek() != Some(&Tok::Sym(')')) {
                    return Err(Error::parse(
                        self.line,
                        open_column,
                        "unbalanced parentheses: '(' is never closed",
                    ));
                }
                self.pos += 1;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let column = self.column();
                self.pos += 1;
                if self.peek() == Some(&Tok::Sym('(')) {
                    return self.call(&name, column);
                }
                self.resolve(&name, column)
            }
            other => Err(self.error(format!("unexpected token {other:?}"))),
        }
    }

    fn call(&mut self, name: &str, column: usize) -> Result<RateExpr> {
        let func = match name {
            "max" => Func::Max,
            "min" => Func::Min,
            _ => return Err(Error::parse(self.line, column, format!("unknown function '{name}'"))),
        };
        self.pos += 1; // '('
        let mut args = Vec::new();
        if self.peek() != Some(&Tok::Sym(')')) {
            loop {
                args.push(self.sum()?);
                match self.peek() {
                    Some(Tok::Sym(',')) => self.pos += 1,
                    Some(Tok::Sym(')')) => break,
                    None => {
                        return Err(Error::parse(
                            self.line,
                            column,
                            "unbalanced parentheses: call is never closed",
                        ))
                    }
                    Some(_) => return Err(self.error("expected ',' or ')'")),
                }
            }
        }
        self.pos += 1; // ')'
        if args.len() != 2 {
            return Err(Error::parse(
                self.line,
                column,
                format!("{name} takes 2 arguments, got {}", args.len()),
            ));
        }
        let b = args.pop().expect("two args");
        let a = args.pop().expect("two args");
        Ok(RateExpr::Call(func, Box::new(a), Box::new(b)))
    }

    fn resolve(&self, name: &str, column: usize) -> Result<RateExpr> {
        if name == "N" {
            return Ok(RateExpr::Scale);
        }
        if let Some(i) = self.symbols.species.iter().position(|s| *s == name) {
            return Ok(RateExpr::Species(i));
        }
        if let Some(i) = self.symbols.params.iter().position(|s| *s == name) {
            return Ok(RateExpr::Param(i));
        }
        Err(Error::parse(self.line, column, format!("unknown identifier '{name}'")))
    }
}
