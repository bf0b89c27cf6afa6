//! Text grammar for linear constraints and objectives.
//!
//! ```text
//! constraint := expr REL number
//! expr       := ['+'|'-'] term (('+'|'-') term)*
//! term       := [number '*'] name
//! REL        := '<=' | '>=' | '='
//! name       := [A-Za-z0-9_.]+
//! ```
//!
//! Example: `2*wind+solar<=500`. Repeated names are summed.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::lp::Relation;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message} at position {position}")]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub message: String,
}

impl ParseError {
    /// The input with a caret line under the offending position.
    pub fn caret(&self, input: &str) -> String {
        let pad: String = vec![' '; input[..self.position.min(input.len())].chars().count()]
            .into_iter()
            .collect();
        format!("{input}\n{pad}^")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConstraint {
    pub terms: Vec<(String, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

pub fn parse_constraint(input: &str) -> Result<ParsedConstraint, ParseError> {
    let mut p = Parser { s: input.as_bytes(), pos: 0 };
    let terms = p.expr()?;
    let relation = p.relation()?;
    let rhs = p.number()?;
    p.end()?;
    Ok(ParsedConstraint { terms, relation, rhs })
}

/// A bare linear expression, as used for objectives.
pub fn parse_expression(input: &str) -> Result<Vec<(String, f64)>, ParseError> {
    let mut p = Parser { s: input.as_bytes(), pos: 0 };
    let terms = p.expr()?;
    p.end()?;
    Ok(terms)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

fn is_name_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'.'
}

impl Parser<'_> {
    fn err<T>(&self, at: usize, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { position: at, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn text(&self, from: usize) -> &str {
        core::str::from_utf8(&self.s[from..self.pos]).unwrap_or("")
    }

    /// A run of name bytes, extended over an exponent sign when the run so far reads as a
    /// number ending in `e` (so `1e-3` stays one token).
    fn token(&mut self) -> Option<(usize, String)> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && is_name_byte(self.s[self.pos]) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        let tok = self.text(start);
        let exponent_pending = tok.len() > 1
            && tok.ends_with(['e', 'E'])
            && tok[..tok.len() - 1].parse::<f64>().is_ok()
            && matches!(self.s.get(self.pos), Some(b'+' | b'-'))
            && self.s.get(self.pos + 1).is_some_and(u8::is_ascii_digit);
        if exponent_pending {
            self.pos += 1;
            while self.pos < self.s.len() && is_name_byte(self.s[self.pos]) {
                self.pos += 1;
            }
        }
        Some((start, self.text(start).to_string()))
    }

    fn term(&mut self, sign: f64, terms: &mut Vec<(String, f64)>) -> Result<(), ParseError> {
        let Some((start, tok)) = self.token() else {
            return self.err(self.pos, "expected a term");
        };
        let (coef, name) = if self.peek() == Some(b'*') {
            let Ok(c) = tok.parse::<f64>() else {
                return self.err(start, format!("invalid coefficient `{tok}`"));
            };
            if !c.is_finite() {
                return self.err(start, "coefficient must be finite");
            }
            self.pos += 1;
            match self.token() {
                Some((_, name)) => (c, name),
                None => return self.err(self.pos, "expected a dimension name after `*`"),
            }
        } else {
            (1.0, tok)
        };
        match terms.iter_mut().find(|(n, _)| *n == name) {
            Some((_, c)) => *c += sign * coef,
            None => terms.push((name, sign * coef)),
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Vec<(String, f64)>, ParseError> {
        let mut terms = Vec::new();
        let mut sign = 1.0;
        match self.peek() {
            Some(b'-') => {
                sign = -1.0;
                self.pos += 1;
            }
            Some(b'+') => self.pos += 1,
            _ => {}
        }
        self.term(sign, &mut terms)?;
        loop {
            match self.peek() {
                Some(b'+') => sign = 1.0,
                Some(b'-') => sign = -1.0,
                _ => return Ok(terms),
            }
            self.pos += 1;
            self.term(sign, &mut terms)?;
        }
    }

    fn relation(&mut self) -> Result<Relation, ParseError> {
        let at = self.pos;
        let rel = match (self.peek(), self.s.get(self.pos + 1)) {
            (Some(b'<'), Some(b'=')) => Relation::Le,
            (Some(b'>'), Some(b'=')) => Relation::Ge,
            (Some(b'='), _) => Relation::Eq,
            (None, _) => return self.err(self.pos, "expected `<=`, `>=` or `=`"),
            _ => return self.err(self.pos.max(at), "expected `<=`, `>=` or `=`"),
        };
        self.pos += if rel == Relation::Eq { 1 } else { 2 };
        Ok(rel)
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let mut sign = 1.0;
        match self.peek() {
            Some(b'-') => {
                sign = -1.0;
                self.pos += 1;
            }
            Some(b'+') => self.pos += 1,
            _ => {}
        }
        let Some((start, tok)) = self.token() else {
            return self.err(self.pos, "expected a number");
        };
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(sign * v),
            _ => self.err(start, format!("invalid number `{tok}`")),
        }
    }

    fn end(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(_) => self.err(self.pos, "unexpected trailing input"),
        }
    }
}
