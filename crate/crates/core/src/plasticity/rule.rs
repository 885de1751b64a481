//! The learning-rule expression language.
//!
//! Grammar:
//!
//! ```text
//! rule   := ('+' | '-')? term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := INT '^' SIGNED_INT | DECIMAL | VARIABLE
//! ```
//!
//! Whitespace is insignificant. Numeric factors multiply into the term's
//! coefficient (default 1). The supported variables are the pre-synaptic
//! trace pair `x0`/`x1`, the post-synaptic traces `y0`/`y1`/`y2` and the
//! current weight `w`; anything else is rejected at parse time.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use thiserror::Error;

use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleVariable {
    X0,
    X1,
    Y0,
    Y1,
    Y2,
    W,
}

impl RuleVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleVariable::X0 => "x0",
            RuleVariable::X1 => "x1",
            RuleVariable::Y0 => "y0",
            RuleVariable::Y1 => "y1",
            RuleVariable::Y2 => "y2",
            RuleVariable::W => "w",
        }
    }

    fn from_ident(s: &str) -> Option<Self> {
        match s {
            "x0" => Some(RuleVariable::X0),
            "x1" => Some(RuleVariable::X1),
            "y0" => Some(RuleVariable::Y0),
            "y1" => Some(RuleVariable::Y1),
            "y2" => Some(RuleVariable::Y2),
            "w" => Some(RuleVariable::W),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleTerm {
    /// +1 or -1.
    pub sign: i8,
    pub coefficient: f64,
    pub factors: Vec<RuleVariable>,
}

impl RuleTerm {
    pub fn evaluate(&self, lookup: &dyn Fn(RuleVariable) -> f64) -> f64 {
        let mut acc = f64::from(self.sign) * self.coefficient;
        for &factor in &self.factors {
            acc *= lookup(factor);
        }
        acc
    }
}

/// A parsed learning rule: an ordered sum of signed product terms.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleAst {
    pub terms: Vec<RuleTerm>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("parse error at position {position}: expected {expected}")]
pub struct RuleParseError {
    pub position: usize,
    pub expected: &'static str,
}

impl RuleAst {
    pub fn parse(text: &str) -> Result<Self, RuleParseError> {
        Parser {
            bytes: text.as_bytes(),
            pos: 0,
        }
        .parse_rule()
    }

    /// Weight change for one synapse given its variable values.
    pub fn evaluate(&self, lookup: &dyn Fn(RuleVariable) -> f64) -> f64 {
        self.terms.iter().map(|t| t.evaluate(lookup)).sum()
    }
}

impl fmt::Display for RuleAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, term) in self.terms.iter().enumerate() {
            if i == 0 {
                if term.sign < 0 {
                    write!(f, "-")?;
                }
            } else if term.sign < 0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut separate = false;
            if term.coefficient != 1.0 || term.factors.is_empty() {
                write!(f, "{}", term.coefficient)?;
                separate = true;
            }
            for &factor in &term.factors {
                if separate {
                    write!(f, "*")?;
                }
                write!(f, "{}", factor.as_str())?;
                separate = true;
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn error(&self, expected: &'static str) -> RuleParseError {
        RuleParseError {
            position: self.pos,
            expected,
        }
    }

    fn parse_rule(&mut self) -> Result<RuleAst, RuleParseError> {
        self.skip_ws();
        let mut sign: i8 = 1;
        match self.peek() {
            Some(b'+') => {
                self.pos += 1;
            }
            Some(b'-') => {
                sign = -1;
                self.pos += 1;
            }
            _ => {}
        }
        let mut terms = Vec::new();
        loop {
            terms.push(self.parse_term(sign)?);
            self.skip_ws();
            match self.peek() {
                None => break,
                Some(b'+') => {
                    sign = 1;
                    self.pos += 1;
                }
                Some(b'-') => {
                    sign = -1;
                    self.pos += 1;
                }
                Some(_) => return Err(self.error("'+' or '-'")),
            }
        }
        Ok(RuleAst { terms })
    }

    fn parse_term(&mut self, sign: i8) -> Result<RuleTerm, RuleParseError> {
        let mut coefficient = 1.0;
        let mut factors = Vec::new();
        loop {
            self.parse_factor(&mut coefficient, &mut factors)?;
            self.skip_ws();
            if self.peek() == Some(b'*') {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(RuleTerm {
            sign,
            coefficient,
            factors,
        })
    }

    fn parse_factor(
        &mut self,
        coefficient: &mut f64,
        factors: &mut Vec<RuleVariable>,
    ) -> Result<(), RuleParseError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                let (integer_text, had_fraction) = self.scan_number()?;
                if self.peek() == Some(b'^') {
                    if had_fraction {
                        return Err(self.error("an integer base before '^'"));
                    }
                    self.pos += 1;
                    let exponent = self.scan_signed_int()?;
                    let base: f64 = integer_text
                        .parse()
                        .map_err(|_| self.error("a numeric base"))?;
                    *coefficient *= math::int_pow(base, exponent);
                } else {
                    let value: f64 = integer_text
                        .parse()
                        .map_err(|_| self.error("a numeric coefficient"))?;
                    *coefficient *= value;
                }
                Ok(())
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
                {
                    self.pos += 1;
                }
                let ident = core::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
                match RuleVariable::from_ident(ident) {
                    Some(variable) => {
                        factors.push(variable);
                        Ok(())
                    }
                    None => Err(RuleParseError {
                        position: start,
                        expected: "a known variable (x0, x1, y0, y1, y2, w)",
                    }),
                }
            }
            _ => Err(self.error("a number or variable")),
        }
    }

    /// Scan `[0-9]+ ('.' [0-9]+)?`; returns the text and whether a
    /// fraction was present.
    fn scan_number(&mut self) -> Result<(String, bool), RuleParseError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let mut had_fraction = false;
        if self.peek() == Some(b'.') {
            self.pos += 1;
            if !self.peek().is_some_and(|c| c.is_ascii_digit()) {
                return Err(self.error("digits after the decimal point"));
            }
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            had_fraction = true;
        }
        let text = core::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        Ok((String::from(text), had_fraction))
    }

    fn scan_signed_int(&mut self) -> Result<i32, RuleParseError> {
        let mut sign = 1i32;
        match self.peek() {
            Some(b'-') => {
                sign = -1;
                self.pos += 1;
            }
            Some(b'+') => {
                self.pos += 1;
            }
            _ => {}
        }
        if !self.peek().is_some_and(|c| c.is_ascii_digit()) {
            return Err(self.error("an integer exponent"));
        }
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text = core::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let magnitude: i32 = text.parse().map_err(|_| self.error("a smaller exponent"))?;
        Ok(sign * magnitude)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;
    use RuleVariable::*;

    const REFERENCE_RULE: &str = "2^-2*x1*y0 - 2^-2*y1*x0 + 2^-4*x1*y1*y0 - 2^-3*y0*w*w";

    #[test]
    fn reference_rule_parses_to_four_terms() {
        let ast = RuleAst::parse(REFERENCE_RULE).unwrap();
        assert_eq!(ast.terms.len(), 4);
        let signs: Vec<i8> = ast.terms.iter().map(|t| t.sign).collect();
        assert_eq!(signs, vec![1, -1, 1, -1]);
        let coefficients: Vec<f64> = ast.terms.iter().map(|t| t.coefficient).collect();
        assert_eq!(coefficients, vec![0.25, 0.25, 0.0625, 0.125]);
        let factors: Vec<Vec<RuleVariable>> =
            ast.terms.iter().map(|t| t.factors.clone()).collect();
        assert_eq!(
            factors,
            vec![
                vec![X1, Y0],
                vec![Y1, X0],
                vec![X1, Y1, Y0],
                vec![Y0, W, W]
            ]
        );
    }

    #[test]
    fn bare_variable_is_a_unit_term() {
        let ast = RuleAst::parse("w").unwrap();
        assert_eq!(
            ast.terms,
            vec![RuleTerm {
                sign: 1,
                coefficient: 1.0,
                factors: vec![W]
            }]
        );
    }

    #[test]
    fn missing_exponent_is_reported_with_position() {
        let err = RuleAst::parse("2^*x1").unwrap_err();
        assert_eq!(err.position, 2);
        assert_eq!(err.expected, "an integer exponent");
    }

    #[test]
    fn unknown_variables_are_rejected() {
        let err = RuleAst::parse("2^-2*u0*x1").unwrap_err();
        assert_eq!(err.position, 5);
        assert!(err.expected.contains("known variable"));
        assert!(RuleAst::parse("x1*t").is_err());
        assert!(RuleAst::parse("d*y0").is_err());
    }

    #[test]
    fn leading_sign_and_whitespace_are_accepted() {
        let a = RuleAst::parse("-2^-1*x1 + y0").unwrap();
        assert_eq!(a.terms[0].sign, -1);
        assert_eq!(a.terms[0].coefficient, 0.5);
        let b = RuleAst::parse("  -  2^-1 * x1+y0 ").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn decimal_coefficients_multiply_within_a_term() {
        let ast = RuleAst::parse("0.5*2.0*x1").unwrap();
        assert_eq!(ast.terms[0].coefficient, 1.0);
        assert_eq!(ast.terms[0].factors, vec![X1]);
    }

    #[test]
    fn bare_coefficient_term_is_allowed() {
        let ast = RuleAst::parse("x1*y0 - 0.125").unwrap();
        assert_eq!(ast.terms[1].factors, vec![]);
        assert_eq!(ast.terms[1].coefficient, 0.125);
    }

    #[test]
    fn empty_rule_is_rejected() {
        assert!(RuleAst::parse("").is_err());
        assert!(RuleAst::parse("   ").is_err());
        assert!(RuleAst::parse("x1 +").is_err());
    }

    #[test]
    fn fractional_base_before_caret_is_rejected() {
        let err = RuleAst::parse("2.5^3*x1").unwrap_err();
        assert_eq!(err.expected, "an integer base before '^'");
    }

    #[test]
    fn evaluate_multiplies_factors_with_sign() {
        let ast = RuleAst::parse("2^-2*x1*y0 - 2^-3*w").unwrap();
        let value = ast.evaluate(&|v| match v {
            X1 => 4.0,
            Y0 => 1.0,
            W => 8.0,
            _ => 0.0,
        });
        assert_eq!(value, 0.25 * 4.0 - 0.125 * 8.0);
    }

    #[test]
    fn print_then_parse_is_identity_on_reference_rule() {
        let ast = RuleAst::parse(REFERENCE_RULE).unwrap();
        let printed = ast.to_string();
        assert_eq!(RuleAst::parse(&printed).unwrap(), ast);
    }

    #[test]
    fn print_parse_round_trip_over_generated_rules() {
        // xorshift-driven rule generator; the acceptance suite runs the
        // full 1000-rule version.
        let mut state = 0xDEADBEEFu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let variables = ["x0", "x1", "y0", "y1", "y2", "w"];
        for _ in 0..200 {
            let n_terms = 1 + next() % 5;
            let mut text = String::new();
            for term_idx in 0..n_terms {
                if term_idx > 0 || next() % 2 == 0 {
                    text.push_str(if next() % 2 == 0 { " + " } else { " - " });
                }
                let n_factors = next() % 4;
                let mut pieces: Vec<String> = Vec::new();
                match next() % 3 {
                    0 => pieces.push(format!("2^{}", (next() % 17) as i64 - 8)),
                    1 => pieces.push(format!("{}.{:04}", next() % 4, next() % 10_000)),
                    _ => {
                        if n_factors == 0 {
                            pieces.push(format!("{}", next() % 9));
                        }
                    }
                }
                for _ in 0..n_factors {
                    pieces.push(variables[(next() % 6) as usize].to_string());
                }
                text.push_str(&pieces.join("*"));
            }
            let first = match RuleAst::parse(&text) {
                Ok(ast) => ast,
                Err(e) => panic!("generated rule {text:?} failed to parse: {e}"),
            };
            let printed = first.to_string();
            let second = RuleAst::parse(&printed)
                .unwrap_or_else(|e| panic!("printed rule {printed:?} failed to parse: {e}"));
            assert_eq!(second, first, "round trip changed {text:?} -> {printed:?}");
        }
    }
}
