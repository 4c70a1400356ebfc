//! Recursive-descent parser.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (("+" | "-") product)*
//! product := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := atom ("^" unary)?
//! atom    := number | ident | func "(" sum ")" | "(" sum ")"
//! ```
//!
//! The exponent must fold to a constant.

use super::{Expr, ExprError, Func, Var};

/// Parses `src`, allowing the state variables `u1..u{n_vars}`.
pub fn parse_expr(src: &str, n_vars: usize) -> Result<Expr, ExprError> {
    let mut p = Parser { src, pos: 0, n_vars };
    p.skip_ws();
    if p.pos == src.len() {
        return Err(p.error("empty expression"));
    }
    let e = p.sum()?;
    p.skip_ws();
    if p.pos != src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    n_vars: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        self.error_at(self.pos, message)
    }

    fn error_at(&self, offset: usize, message: &str) -> ExprError {
        ExprError::Syntax { offset, message: message.to_string() }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    /// Consumes `c` after optional whitespace.
    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let start = self.pos;
        let exponent = self.unary()?;
        match exponent.as_constant() {
            Some(p) => Ok(Expr::Pow(Box::new(base), p)),
            None => Err(self.error_at(start, "exponent must be a constant")),
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.sum()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            Some(b) if b.is_ascii_digit() || b == b'.' => self.number(),
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => self.identifier(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let digits = |p: &mut usize| {
            let from = *p;
            while bytes.get(*p).is_some_and(u8::is_ascii_digit) {
                *p += 1;
            }
            *p > from
        };
        let mut end = start;
        let mut seen = digits(&mut end);
        if bytes.get(end) == Some(&b'.') {
            end += 1;
            seen |= digits(&mut end);
        }
        if !seen {
            return Err(self.error_at(start, "malformed number"));
        }
        if matches!(bytes.get(end), Some(b'e' | b'E')) {
            let mut p = end + 1;
            if matches!(bytes.get(p), Some(b'+' | b'-')) {
                p += 1;
            }
            if digits(&mut p) {
                end = p;
            }
        }
        let value: f64 = self.src[start..end]
            .parse()
            .map_err(|_| self.error_at(start, "malformed number"))?;
        if !value.is_finite() {
            return Err(self.error_at(start, "number out of range"));
        }
        self.pos = end;
        Ok(Expr::Const(value))
    }

    fn identifier(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = start;
        while bytes.get(end).is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_') {
            end += 1;
        }
        let name = &self.src[start..end];
        self.pos = end;
        if let Some(func) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.error(&format!("expected `(` after `{name}`")));
            }
            let arg = self.sum()?;
            if !self.eat(b')') {
                return Err(self.error("expected `)`"));
            }
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        let var = match name {
            "r" => Some(Var::R),
            "t" => Some(Var::T),
            "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
            _ => name
                .strip_prefix('u')
                .filter(|d| !d.starts_with('0'))
                .and_then(|d| d.parse::<usize>().ok())
                .filter(|i| (1..=self.n_vars).contains(i))
                .map(Var::U),
        };
        var.map(Expr::Var).ok_or_else(|| ExprError::UnknownIdentifier {
            offset: start,
            name: name.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Box<Expr> {
        Box::new(Expr::Const(v))
    }

    fn v(x: Var) -> Box<Expr> {
        Box::new(Expr::Var(x))
    }

    #[test]
    fn grammar_case() {
        let e = parse_expr("0.5*u1 + sin(t)", 1).unwrap();
        assert_eq!(
            e,
            Expr::Add(
                Box::new(Expr::Mul(c(0.5), v(Var::U(1)))),
                Box::new(Expr::Call(Func::Sin, v(Var::T)))
            )
        );
    }

    #[test]
    fn double_caret_is_rejected_at_second_caret() {
        match parse_expr("2^^3", 0) {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_state_variable() {
        assert_eq!(
            parse_expr("u9", 2),
            Err(ExprError::UnknownIdentifier { offset: 0, name: "u9".into() })
        );
        assert!(matches!(parse_expr("1 + u0", 2), Err(ExprError::UnknownIdentifier { offset: 4, .. })));
        assert!(matches!(parse_expr("circle", 2), Err(ExprError::UnknownIdentifier { .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(
            parse_expr("-r^2", 0).unwrap(),
            Expr::Neg(Box::new(Expr::Pow(v(Var::R), 2.0)))
        );
        assert_eq!(
            parse_expr("r - t - 1", 0).unwrap(),
            Expr::Sub(Box::new(Expr::Sub(v(Var::R), v(Var::T))), c(1.0))
        );
        assert_eq!(
            parse_expr("r/t*2", 0).unwrap(),
            Expr::Mul(Box::new(Expr::Div(v(Var::R), v(Var::T))), c(2.0))
        );
        assert_eq!(parse_expr("r^-1", 0).unwrap(), Expr::Pow(v(Var::R), -1.0));
        assert_eq!(parse_expr("r^(1/2)", 0).unwrap(), Expr::Pow(v(Var::R), 0.5));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        let offset = |s: &str| match parse_expr(s, 1) {
            Err(ExprError::Syntax { offset, .. }) => offset,
            other => panic!("{s}: unexpected {other:?}"),
        };
        assert_eq!(offset(""), 0);
        assert_eq!(offset("(r"), 2);
        assert_eq!(offset("r +"), 3);
        assert_eq!(offset("sin r"), 4);
        assert_eq!(offset("r^t"), 2);
        assert_eq!(offset("r $"), 2);
        assert_eq!(offset("1e999"), 0);
        assert_eq!(offset("r r"), 2);
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_expr("1.5e-3", 0).unwrap(), Expr::Const(1.5e-3));
        assert_eq!(parse_expr(".25", 0).unwrap(), Expr::Const(0.25));
        assert_eq!(parse_expr("3.", 0).unwrap(), Expr::Const(3.0));
        assert_eq!(parse_expr("pi", 0).unwrap(), Expr::Const(std::f64::consts::PI));
    }
}
