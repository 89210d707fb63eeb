//! Rule DSL: literals, LHS formulas, rules and the rule base.
//!
//! One rule per line:
//!
//! ```text
//! r0: p0 -> p1 & p4
//! r3: p0 | p3 -> p4     # comment
//! ```
//!
//! `~` binds tighter than `&`, which binds tighter than `|`. The Unicode
//! operators `¬`, `∧`, `∨` and `→` are accepted as aliases. The right-hand
//! side must be a conjunction of literals.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A proposition `p<k>` or its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub prop_index: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(prop_index: usize) -> Self {
        Self { prop_index, negated: false }
    }

    pub fn neg(prop_index: usize) -> Self {
        Self { prop_index, negated: true }
    }

    pub fn complement(self) -> Self {
        Self { negated: !self.negated, ..self }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "~p{}", self.prop_index)
        } else {
            write!(f, "p{}", self.prop_index)
        }
    }
}

/// Left-hand side of a rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    Lit(Literal),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn and(lhs: Formula, rhs: Formula) -> Self {
        Formula::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Formula, rhs: Formula) -> Self {
        Formula::Or(Box::new(lhs), Box::new(rhs))
    }

    /// Leaves in left-to-right order.
    pub fn literals(&self) -> Vec<Literal> {
        let mut out = Vec::new();
        self.collect_literals(&mut out);
        out
    }

    fn collect_literals(&self, out: &mut Vec<Literal>) {
        match self {
            Formula::Lit(l) => out.push(*l),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_literals(out);
                b.collect_literals(out);
            }
        }
    }

    pub fn max_prop_index(&self) -> usize {
        self.literals().iter().map(|l| l.prop_index).max().unwrap_or(0)
    }

    pub fn contains_or(&self) -> bool {
        match self {
            Formula::Lit(_) => false,
            Formula::Or(..) => true,
            Formula::And(a, b) => a.contains_or() || b.contains_or(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Lit(_) => 3,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Operators are left-associative, so a right child of equal
        // precedence needs parentheses to keep its shape.
        match self {
            Formula::Lit(l) => write!(f, "{l}"),
            Formula::And(a, b) => {
                a.fmt_child(f, 2)?;
                f.write_str(" & ")?;
                b.fmt_child(f, 3)
            }
            Formula::Or(a, b) => {
                a.fmt_child(f, 1)?;
                f.write_str(" | ")?;
                b.fmt_child(f, 2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    /// Declaration index.
    pub id: usize,
    pub name: String,
    pub lhs: Formula,
    /// Conjunction of literals.
    pub rhs: Vec<Literal>,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ->", self.name, self.lhs)?;
        for (k, lit) in self.rhs.iter().enumerate() {
            if k > 0 {
                f.write_str(" &")?;
            }
            write!(f, " {lit}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleBase {
    pub rules: Vec<Rule>,
    pub prop_count: usize,
}

impl RuleBase {
    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn rule_by_name(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.rules.iter().map(|r| r.name.clone()).collect()
    }
}

impl fmt::Display for RuleBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A violated rule-base invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Checks every rule-base invariant and reports one diagnostic per violation.
pub fn validate(rb: &RuleBase) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut diag = |rule: Option<&Rule>, message: String| {
        out.push(Diagnostic { rule: rule.map(|r| r.name.clone()), message });
    };

    if rb.rules.is_empty() {
        diag(None, "rule base has no rules".into());
    }
    if rb.prop_count == 0 {
        diag(None, "rule base has no propositions".into());
    }

    let mut seen = HashSet::new();
    for (idx, rule) in rb.rules.iter().enumerate() {
        if rule.id != idx {
            diag(Some(rule), format!("rule {} has id {} but is declared at position {idx}", rule.name, rule.id));
        }
        if !seen.insert(rule.name.as_str()) {
            diag(Some(rule), format!("duplicate rule name {}", rule.name));
        }
        if rule.rhs.is_empty() {
            diag(Some(rule), format!("empty RHS in {}", rule.name));
        }
        for (k, lit) in rule.rhs.iter().enumerate() {
            for other in &rule.rhs[..k] {
                if other.prop_index != lit.prop_index {
                    continue;
                }
                if other.negated == lit.negated {
                    diag(Some(rule), format!("duplicate literal {lit} in RHS of {}", rule.name));
                } else {
                    diag(Some(rule), format!("complementary literals in RHS of {}", rule.name));
                }
            }
        }
        let out_of_range = rule
            .lhs
            .literals()
            .into_iter()
            .chain(rule.rhs.iter().copied())
            .filter(|l| l.prop_index >= rb.prop_count)
            .map(|l| l.prop_index)
            .max();
        if let Some(idx) = out_of_range {
            diag(Some(rule), format!("p{idx} in {} is out of range for {} propositions", rule.name, rb.prop_count));
        }
    }
    out
}

/// Parses a rule base written in the rule DSL.
pub fn parse_rule_base(source: &str) -> Result<RuleBase, ParseError> {
    let mut rules: Vec<Rule> = Vec::new();
    let mut max_prop = 0usize;

    for (line_no, raw) in source.lines().enumerate() {
        let text = match raw.find('#') {
            Some(cut) => &raw[..cut],
            None => raw,
        };
        if text.trim().is_empty() {
            continue;
        }
        let tokens = tokenize(text, line_no + 1)?;
        let mut parser = LineParser { tokens: &tokens, pos: 0, line: line_no + 1, end_col: raw.chars().count() + 1 };
        let (name, name_tok, lhs, rhs) = parser.rule()?;

        if rules.iter().any(|r| r.name == name) {
            return Err(ParseError {
                line: name_tok.line,
                column: name_tok.column,
                message: format!("duplicate rule name {name}"),
            });
        }
        for l in lhs.literals().iter().chain(rhs.iter()) {
            max_prop = max_prop.max(l.prop_index);
        }
        rules.push(Rule { id: rules.len(), name, lhs, rhs });
    }

    if rules.is_empty() {
        return Err(ParseError { line: 1, column: 1, message: "rule base contains no rules".into() });
    }
    Ok(RuleBase { rules, prop_count: max_prop + 1 })
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    RuleName(usize),
    Prop(usize),
    Colon,
    Not,
    And,
    Or,
    Arrow,
    LParen,
    RParen,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::RuleName(k) => write!(f, "r{k}"),
            Tok::Prop(k) => write!(f, "p{k}"),
            Tok::Colon => f.write_str("':'"),
            Tok::Not => f.write_str("'~'"),
            Tok::And => f.write_str("'&'"),
            Tok::Or => f.write_str("'|'"),
            Tok::Arrow => f.write_str("'->'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |column: usize, message: String| ParseError { line, column, message };

    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        let single = match c {
            ':' => Some(Tok::Colon),
            '~' | '¬' | '!' => Some(Tok::Not),
            '&' | '∧' => Some(Tok::And),
            '|' | '∨' => Some(Tok::Or),
            '→' => Some(Tok::Arrow),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned { tok, line, column });
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '-' {
            if chars.get(i + 1) == Some(&'>') {
                out.push(Spanned { tok: Tok::Arrow, line, column });
                i += 2;
                continue;
            }
            return Err(err(column, "expected '->'".into()));
        }
        if c == 'p' || c == 'r' {
            let start = i + 1;
            let mut end = start;
            while end < chars.len() && chars[end].is_ascii_digit() {
                end += 1;
            }
            if end == start || chars.get(end).is_some_and(|ch| ch.is_alphanumeric() || *ch == '_') {
                let mut stop = end;
                while stop < chars.len() && (chars[stop].is_alphanumeric() || chars[stop] == '_') {
                    stop += 1;
                }
                let word: String = chars[i..stop].iter().collect();
                let what = if c == 'p' { "proposition" } else { "rule name" };
                return Err(err(column, format!("malformed {what} '{word}', expected {c}<index>")));
            }
            let digits: String = chars[start..end].iter().collect();
            let index: usize = digits.parse().map_err(|_| err(column, format!("index {digits} is too large")))?;
            let tok = if c == 'p' { Tok::Prop(index) } else { Tok::RuleName(index) };
            out.push(Spanned { tok, line, column });
            i = end;
            continue;
        }
        let mut stop = i + 1;
        while stop < chars.len() && (chars[stop].is_alphanumeric() || chars[stop] == '_') {
            stop += 1;
        }
        let word: String = chars[i..stop].iter().collect();
        return Err(err(column, format!("unexpected '{word}'")));
    }
    Ok(out)
}

struct LineParser<'a> {
    tokens: &'a [Spanned],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> LineParser<'a> {
    fn peek(&self) -> Option<&'a Spanned> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&'a Spanned> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let (line, column) = match self.peek() {
            Some(t) => (t.line, t.column),
            None => (self.line, self.end_col),
        };
        ParseError { line, column, message: message.into() }
    }

    fn describe_next(&self) -> String {
        match self.peek() {
            Some(t) => format!("{}", t.tok),
            None => "end of line".into(),
        }
    }

    fn rule(&mut self) -> Result<(String, Spanned, Formula, Vec<Literal>), ParseError> {
        let name_tok = match self.peek() {
            Some(t @ Spanned { tok: Tok::RuleName(k), .. }) => {
                let k = *k;
                self.pos += 1;
                (format!("r{k}"), t.clone())
            }
            _ => return Err(self.error_here(format!("expected rule name r<index>, found {}", self.describe_next()))),
        };
        match self.next() {
            Some(Spanned { tok: Tok::Colon, .. }) => {}
            _ => {
                self.pos -= 1;
                return Err(self.error_here(format!("expected ':' after rule name, found {}", self.describe_next())));
            }
        }
        if matches!(self.peek(), Some(Spanned { tok: Tok::Arrow, .. }) | None) {
            return Err(self.error_here(format!("empty LHS in {}", name_tok.0)));
        }
        let lhs = self.disjunction()?;
        match self.peek() {
            Some(Spanned { tok: Tok::Arrow, .. }) => self.pos += 1,
            _ => return Err(self.error_here(format!("expected '->', found {}", self.describe_next()))),
        }
        if self.peek().is_none() {
            return Err(self.error_here(format!("empty RHS in {}", name_tok.0)));
        }
        let rhs = self.rhs(&name_tok.0)?;
        Ok((name_tok.0, name_tok.1, lhs, rhs))
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.conjunction()?;
        while let Some(Spanned { tok: Tok::Or, .. }) = self.peek() {
            self.pos += 1;
            let rhs = self.conjunction()?;
            acc = Formula::or(acc, rhs);
        }
        Ok(acc)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.atom()?;
        while let Some(Spanned { tok: Tok::And, .. }) = self.peek() {
            self.pos += 1;
            let rhs = self.atom()?;
            acc = Formula::and(acc, rhs);
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Some(Spanned { tok: Tok::LParen, .. }) => {
                self.pos += 1;
                let inner = self.disjunction()?;
                match self.peek() {
                    Some(Spanned { tok: Tok::RParen, .. }) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(self.error_here(format!("expected ')', found {}", self.describe_next()))),
                }
            }
            _ => self.literal().map(Formula::Lit),
        }
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let negated = matches!(self.peek(), Some(Spanned { tok: Tok::Not, .. }));
        if negated {
            self.pos += 1;
        }
        match self.peek() {
            Some(Spanned { tok: Tok::Prop(k), .. }) => {
                self.pos += 1;
                Ok(Literal { prop_index: *k, negated })
            }
            _ => Err(self.error_here(format!("expected literal p<index>, found {}", self.describe_next()))),
        }
    }

    fn rhs(&mut self, rule: &str) -> Result<Vec<Literal>, ParseError> {
        let mut lits: Vec<Literal> = Vec::new();
        loop {
            let at = self.peek().cloned();
            let lit = self.literal()?;
            if let Some(prev) = lits.iter().find(|l| l.prop_index == lit.prop_index) {
                let at = at.expect("literal was parsed from a token");
                let message = if prev.negated == lit.negated {
                    format!("duplicate literal {lit} in RHS of {rule}")
                } else {
                    format!("complementary literals in RHS of {rule}")
                };
                return Err(ParseError { line: at.line, column: at.column, message });
            }
            lits.push(lit);
            match self.peek() {
                None => return Ok(lits),
                Some(Spanned { tok: Tok::And, .. }) => self.pos += 1,
                Some(Spanned { tok: Tok::Or, .. }) => {
                    return Err(self.error_here(format!(
                        "'|' is not allowed in the RHS of {rule}: a deduction must be a conjunction of literals"
                    )))
                }
                Some(_) => {
                    return Err(self.error_here(format!("expected '&' or end of rule, found {}", self.describe_next())))
                }
            }
        }
    }
}
