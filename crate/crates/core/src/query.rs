//! Query language accepted by `rulecheck query`, a subset of UPPAAL's
//! verifier syntax:
//!
//! ```text
//! query   := ("E<>" | "A[]") expr
//! expr    := and ("or" and)*
//! and     := unary ("and" unary)*
//! unary   := "not" unary | "(" expr ")" | atom
//! atom    := "true" | "false"
//!          | ("es1" | "es2") "." location
//!          | "r[" INT "]" "==" ("true" | "false")
//!          | "p[" INT "]" "==" ("0" | "1" | "2")
//!          | "forall" "(" "i" ":" "typem" ")" "r[i]" "==" "true"
//! ```
//!
//! `&&`, `||` and `!` are accepted for `and`, `or` and `not`.

use std::fmt;

use thiserror::Error;

use crate::automaton::{Location, TriValue};
use crate::explorer::{Checker, ExploreError, Process, StatePredicate, Verdict};
use crate::rulebase::RuleBase;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathQuantifier {
    /// `E<>`
    Possibly,
    /// `A[]`
    Invariantly,
}

impl fmt::Display for PathQuantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathQuantifier::Possibly => f.write_str("E<>"),
            PathQuantifier::Invariantly => f.write_str("A[]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub quantifier: PathQuantifier,
    pub predicate: StatePredicate,
}

impl Query {
    pub fn check(&self, checker: &Checker) -> Result<Verdict, ExploreError> {
        match self.quantifier {
            PathQuantifier::Possibly => checker.check_ef(&self.predicate),
            PathQuantifier::Invariantly => checker.check_ag(&self.predicate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("query column {column}: {message}")]
pub struct QueryError {
    /// 1-based character column.
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ef,
    Ag,
    Ident(String),
    Int(usize),
    Dot,
    LParen,
    RParen,
    LBracket,
    RBracket,
    EqEq,
    Colon,
    And,
    Or,
    Not,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ef => f.write_str("'E<>'"),
            Tok::Ag => f.write_str("'A[]'"),
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Int(k) => write!(f, "'{k}'"),
            Tok::Dot => f.write_str("'.'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::LBracket => f.write_str("'['"),
            Tok::RBracket => f.write_str("']'"),
            Tok::EqEq => f.write_str("'=='"),
            Tok::Colon => f.write_str("':'"),
            Tok::And => f.write_str("'and'"),
            Tok::Or => f.write_str("'or'"),
            Tok::Not => f.write_str("'not'"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, QueryError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        if c.is_whitespace() {
            i += 1;
        } else if rest == "E<>" {
            out.push((Tok::Ef, col));
            i += 3;
        } else if rest == "A[]" {
            out.push((Tok::Ag, col));
            i += 3;
        } else if rest.starts_with("==") {
            out.push((Tok::EqEq, col));
            i += 2;
        } else if rest.starts_with("&&") {
            out.push((Tok::And, col));
            i += 2;
        } else if rest.starts_with("||") {
            out.push((Tok::Or, col));
            i += 2;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            let value = digits
                .parse()
                .map_err(|_| QueryError { column: col, message: format!("number {digits} is too large") })?;
            out.push((Tok::Int(value), col));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match word.as_str() {
                "and" => Tok::And,
                "or" => Tok::Or,
                "not" => Tok::Not,
                _ => Tok::Ident(word),
            };
            out.push((tok, col));
        } else {
            let tok = match c {
                '.' => Tok::Dot,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ':' => Tok::Colon,
                '!' => Tok::Not,
                _ => return Err(QueryError { column: col, message: format!("unexpected character '{c}'") }),
            };
            out.push((tok, col));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    rb: &'a RuleBase,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map(|(_, c)| *c).unwrap_or(self.end)
    }

    fn error(&self, message: impl Into<String>) -> QueryError {
        QueryError { column: self.column(), message: message.into() }
    }

    fn found(&self) -> String {
        self.peek().map(|t| t.to_string()).unwrap_or_else(|| "end of query".into())
    }

    fn expect(&mut self, tok: Tok) -> Result<(), QueryError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {tok}, found {}", self.found())))
        }
    }

    fn expect_ident(&mut self, word: &str) -> Result<(), QueryError> {
        self.expect(Tok::Ident(word.into()))
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        let quantifier = match self.peek() {
            Some(Tok::Ef) => PathQuantifier::Possibly,
            Some(Tok::Ag) => PathQuantifier::Invariantly,
            _ => return Err(self.error(format!("expected 'E<>' or 'A[]', found {}", self.found()))),
        };
        self.pos += 1;
        let predicate = self.disjunction()?;
        if self.peek().is_some() {
            return Err(self.error(format!("unexpected {} after the end of the formula", self.found())));
        }
        Ok(Query { quantifier, predicate })
    }

    fn disjunction(&mut self) -> Result<StatePredicate, QueryError> {
        let mut acc = self.conjunction()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            acc = acc.or(self.conjunction()?);
        }
        Ok(acc)
    }

    fn conjunction(&mut self) -> Result<StatePredicate, QueryError> {
        let mut acc = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            acc = acc.and(self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<StatePredicate, QueryError> {
        match self.peek() {
            Some(Tok::Not) => {
                self.pos += 1;
                Ok(self.unary()?.negate())
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.disjunction()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            _ => self.atom(),
        }
    }

    fn index(&mut self) -> Result<usize, QueryError> {
        self.expect(Tok::LBracket)?;
        let idx = match self.peek() {
            Some(Tok::Int(k)) => *k,
            _ => return Err(self.error(format!("expected an index, found {}", self.found()))),
        };
        self.pos += 1;
        self.expect(Tok::RBracket)?;
        self.expect(Tok::EqEq)?;
        Ok(idx)
    }

    fn bool_literal(&mut self) -> Result<bool, QueryError> {
        let value = match self.peek() {
            Some(Tok::Ident(w)) if w == "true" => true,
            Some(Tok::Ident(w)) if w == "false" => false,
            _ => return Err(self.error(format!("expected 'true' or 'false', found {}", self.found()))),
        };
        self.pos += 1;
        Ok(value)
    }

    fn atom(&mut self) -> Result<StatePredicate, QueryError> {
        let word = match self.peek() {
            Some(Tok::Ident(w)) => w.clone(),
            _ => return Err(self.error(format!("expected a state formula, found {}", self.found()))),
        };
        let start = self.column();
        self.pos += 1;
        match word.as_str() {
            "true" => Ok(StatePredicate::Const(true)),
            "false" => Ok(StatePredicate::Const(false)),
            "es1" | "es2" => {
                let process = if word == "es1" { Process::Es1 } else { Process::Es2 };
                self.expect(Tok::Dot)?;
                let loc_col = self.column();
                let name = match self.peek() {
                    Some(Tok::Ident(n)) => n.clone(),
                    _ => return Err(self.error(format!("expected a location name, found {}", self.found()))),
                };
                self.pos += 1;
                let loc = Location::from_name(&name, self.rb)
                    .ok_or_else(|| QueryError { column: loc_col, message: format!("unknown location {name}") })?;
                Ok(StatePredicate::AtLoc(process, loc))
            }
            "r" => {
                let idx = self.index()?;
                if idx >= self.rb.rule_count() {
                    return Err(QueryError {
                        column: start,
                        message: format!("rule index {idx} out of range for {} rules", self.rb.rule_count()),
                    });
                }
                let used = self.bool_literal()?;
                let atom = StatePredicate::RuleUsed(idx);
                Ok(if used { atom } else { atom.negate() })
            }
            "p" => {
                let idx = self.index()?;
                if idx >= self.rb.prop_count {
                    return Err(QueryError {
                        column: start,
                        message: format!(
                            "proposition index {idx} out of range for {} propositions",
                            self.rb.prop_count
                        ),
                    });
                }
                let value = match self.peek() {
                    Some(Tok::Int(v)) => {
                        TriValue::try_from(u8::try_from(*v).unwrap_or(u8::MAX)).map_err(|m| self.error(m))?
                    }
                    _ => return Err(self.error(format!("expected 0, 1 or 2, found {}", self.found()))),
                };
                self.pos += 1;
                Ok(StatePredicate::PropIs(idx, value))
            }
            "forall" => {
                self.expect(Tok::LParen)?;
                self.expect_ident("i")?;
                self.expect(Tok::Colon)?;
                self.expect_ident("typem")?;
                self.expect(Tok::RParen)?;
                self.expect_ident("r")?;
                self.expect(Tok::LBracket)?;
                self.expect_ident("i")?;
                self.expect(Tok::RBracket)?;
                self.expect(Tok::EqEq)?;
                self.expect_ident("true")?;
                Ok(StatePredicate::AllRulesUsed)
            }
            _ => Err(QueryError { column: start, message: format!("unknown name '{word}'") }),
        }
    }
}

pub fn parse_query(text: &str, rb: &RuleBase) -> Result<Query, QueryError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0, end: text.chars().count() + 1, rb };
    parser.query()
}
