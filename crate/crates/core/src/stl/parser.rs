//! Recursive-descent parser for the formula grammar.
//!
//! ```text
//! formula  := or
//! or       := and { ("|" | "or") and }
//! and      := until { ("&" | "and") until }
//! until    := unary [ ("U" | "until") [interval] until ]
//! unary    := ("!" | "not") unary
//!           | ("G" | "always") [interval] unary
//!           | ("F" | "eventually") [interval] unary
//!           | "(" formula ")"
//!           | ident [ "(" number { "," number } ")" ]
//! interval := "[" number "," (number | "inf") ("]" | ")")
//! ```
//!
//! Identifiers may contain letters, digits, `_` and `.`. A missing interval
//! means `[0, inf)`.

use std::fmt;

use thiserror::Error;

use super::ast::{Atom, StlFormula, TimeInterval};
use super::predicate::PredicateRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownPredicate,
    MalformedInterval,
    BadArguments,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::UnknownPredicate => "unknown predicate",
            ParseErrorKind::MalformedInterval => "malformed interval",
            ParseErrorKind::BadArguments => "bad predicate arguments",
        };
        f.write_str(s)
    }
}

/// Parse failure; `position` is a character offset into the input.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at position {position}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Inf,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Not,
    And,
    Or,
    Always,
    Eventually,
    Until,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Number(n) => write!(f, "number {n}"),
            Tok::Inf => f.write_str("`inf`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrack => f.write_str("`[`"),
            Tok::RBrack => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Not => f.write_str("`!`"),
            Tok::And => f.write_str("`&`"),
            Tok::Or => f.write_str("`|`"),
            Tok::Always => f.write_str("`G`"),
            Tok::Eventually => f.write_str("`F`"),
            Tok::Until => f.write_str("`U`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn syntax(position: usize, message: impl Into<String>) -> ParseError {
    ParseError { kind: ParseErrorKind::Syntax, position, message: message.into() }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBrack,
            ']' => Tok::RBrack,
            ',' => Tok::Comma,
            '!' | '¬' => Tok::Not,
            '∞' => Tok::Inf,
            '&' | '∧' => {
                if chars.get(i + 1) == Some(&'&') {
                    i += 1;
                }
                Tok::And
            }
            '|' | '∨' => {
                if chars.get(i + 1) == Some(&'|') {
                    i += 1;
                }
                Tok::Or
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let mut j = i + 1;
                while j < chars.len() {
                    let d = chars[j];
                    let exp_sign = (d == '-' || d == '+') && matches!(chars[j - 1], 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        j += 1;
                    } else {
                        break;
                    }
                }
                let s: String = chars[i..j].iter().collect();
                let v: f64 = s.parse().map_err(|_| syntax(start, format!("invalid number `{s}`")))?;
                i = j - 1;
                Tok::Number(v)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '.') {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                i = j - 1;
                match s.as_str() {
                    "not" => Tok::Not,
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "G" | "always" => Tok::Always,
                    "F" | "eventually" => Tok::Eventually,
                    "U" | "until" => Tok::Until,
                    "inf" => Tok::Inf,
                    _ => Tok::Ident(s),
                }
            }
            other => return Err(syntax(start, format!("unexpected character `{other}`"))),
        };
        toks.push((tok, start));
        i += 1;
    }
    toks.push((Tok::End, chars.len()));
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    registry: &'a PredicateRegistry,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, context: &str) -> Result<usize, ParseError> {
        let (t, p) = self.bump();
        if t == want {
            Ok(p)
        } else {
            Err(syntax(p, format!("expected {want} {context}, found {t}")))
        }
    }

    fn formula(&mut self) -> Result<StlFormula, ParseError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = StlFormula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<StlFormula, ParseError> {
        let mut lhs = self.until()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.until()?;
            lhs = StlFormula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<StlFormula, ParseError> {
        let lhs = self.unary()?;
        if *self.peek() == Tok::Until {
            self.bump();
            let window = self.optional_interval()?;
            let rhs = self.until()?;
            return Ok(StlFormula::until(window, lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<StlFormula, ParseError> {
        match self.peek().clone() {
            Tok::Not => {
                self.bump();
                Ok(StlFormula::not(self.unary()?))
            }
            Tok::Always => {
                self.bump();
                let w = self.optional_interval()?;
                Ok(StlFormula::always(w, self.unary()?))
            }
            Tok::Eventually => {
                self.bump();
                let w = self.optional_interval()?;
                Ok(StlFormula::eventually(w, self.unary()?))
            }
            Tok::LParen => {
                let open = self.at();
                self.bump();
                let inner = self.formula()?;
                match self.peek() {
                    Tok::RParen => {
                        self.bump();
                        Ok(inner)
                    }
                    other => Err(syntax(
                        self.at(),
                        format!("unbalanced parenthesis opened at position {open}: expected `)`, found {other}"),
                    )),
                }
            }
            Tok::Ident(name) => {
                let start = self.at();
                self.bump();
                let mut args = Vec::new();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    loop {
                        let (t, p) = self.bump();
                        match t {
                            Tok::Number(v) => args.push(v),
                            other => return Err(syntax(p, format!("expected numeric argument, found {other}"))),
                        }
                        match self.bump() {
                            (Tok::Comma, _) => continue,
                            (Tok::RParen, _) => break,
                            (other, p) => {
                                return Err(syntax(p, format!("expected `,` or `)` in arguments, found {other}")))
                            }
                        }
                    }
                }
                let def = self.registry.get(&name).ok_or_else(|| ParseError {
                    kind: ParseErrorKind::UnknownPredicate,
                    position: start,
                    message: format!("`{name}` is not a registered predicate"),
                })?;
                def.resolve_args(&args).map_err(|message| ParseError {
                    kind: ParseErrorKind::BadArguments,
                    position: start,
                    message,
                })?;
                Ok(StlFormula::Atom(Atom { name, args }))
            }
            other => Err(syntax(self.at(), format!("expected a formula, found {other}"))),
        }
    }

    fn optional_interval(&mut self) -> Result<TimeInterval, ParseError> {
        if *self.peek() != Tok::LBrack {
            return Ok(TimeInterval::unbounded());
        }
        let open = self.expect(Tok::LBrack, "")?;
        let lo = match self.bump() {
            (Tok::Number(v), _) => v,
            (other, p) => return Err(syntax(p, format!("expected interval lower bound, found {other}"))),
        };
        self.expect(Tok::Comma, "between interval bounds")?;
        let hi = match self.bump() {
            (Tok::Number(v), _) => v,
            (Tok::Inf, _) => f64::INFINITY,
            (other, p) => return Err(syntax(p, format!("expected interval upper bound, found {other}"))),
        };
        match self.bump() {
            (Tok::RBrack, _) | (Tok::RParen, _) => {}
            (other, p) => return Err(syntax(p, format!("expected `]` closing interval, found {other}"))),
        }
        TimeInterval::new(lo, hi).ok_or_else(|| ParseError {
            kind: ParseErrorKind::MalformedInterval,
            position: open,
            message: if lo < 0.0 {
                format!("lower bound {lo} is negative")
            } else {
                format!("lower bound {lo} exceeds upper bound {hi}")
            },
        })
    }
}

/// Parse `text` against the predicates known to `registry`.
pub fn parse(text: &str, registry: &PredicateRegistry) -> Result<StlFormula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, registry };
    let f = p.formula()?;
    match p.peek() {
        Tok::End => Ok(f),
        Tok::RParen => Err(syntax(p.at(), "unbalanced parenthesis: unexpected `)`")),
        other => Err(syntax(p.at(), format!("unexpected {other} after complete formula"))),
    }
}
