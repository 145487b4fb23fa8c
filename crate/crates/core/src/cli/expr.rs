//! Recursive-descent parser for rate-map expressions over `b0` and `b1`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'b0' | 'b1' | func '(' args ')' | '(' expr ')'
//! func   := sin | cos | exp | abs     (one argument)
//!         | min | max                 (two arguments)
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-2^2` is
//! `-4`. Numbers are decimal or scientific (`1e-9`, `.5`, `3.`).

use std::sync::Arc;

use thiserror::Error;

use crate::dynamics::DynamicsSpec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("`{func}` at {pos} takes {expected} argument(s), got {found}")]
    Arity {
        func: String,
        expected: usize,
        found: usize,
        pos: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Sin,
    Cos,
    Exp,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    B0,
    B1,
    Neg(Box<Expr>),
    Call(Unary, Box<Expr>),
    Bin(Binary, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, b0: f64, b1: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::B0 => b0,
            Expr::B1 => b1,
            Expr::Neg(e) => -e.eval(b0, b1),
            Expr::Call(f, e) => {
                let x = e.eval(b0, b1);
                match f {
                    Unary::Sin => x.sin(),
                    Unary::Cos => x.cos(),
                    Unary::Exp => x.exp(),
                    Unary::Abs => x.abs(),
                }
            }
            Expr::Bin(op, l, r) => {
                let (x, y) = (l.eval(b0, b1), r.eval(b0, b1));
                match op {
                    Binary::Add => x + y,
                    Binary::Sub => x - y,
                    Binary::Mul => x * y,
                    Binary::Div => x / y,
                    Binary::Pow => x.powf(y),
                    Binary::Min => x.min(y),
                    Binary::Max => x.max(y),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value = text.parse::<f64>().map_err(|_| ExprError::Syntax {
                pos: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((Tok::Num(value), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => {
                let ch = src[start..].chars().next().unwrap_or(c);
                return Err(ExprError::Syntax {
                    pos: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => Binary::Add,
                Tok::Op('-') => Binary::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => Binary::Mul,
                Tok::Op('/') => Binary::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Bin(Binary::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return self.syntax("expected `)`");
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name, pos),
            Tok::End => Err(ExprError::Syntax {
                pos,
                message: "unexpected end of expression".into(),
            }),
            other => Err(ExprError::Syntax {
                pos,
                message: format!("unexpected {}", describe(&other)),
            }),
        }
    }

    fn identifier(&mut self, name: String, pos: usize) -> Result<Expr, ExprError> {
        match name.as_str() {
            "b0" => return Ok(Expr::B0),
            "b1" => return Ok(Expr::B1),
            _ => {}
        }
        let expected = match name.as_str() {
            "sin" | "cos" | "exp" | "abs" => 1,
            "min" | "max" => 2,
            _ => return Err(ExprError::UnknownIdentifier { name, pos }),
        };
        if *self.peek() != Tok::LParen {
            return self.syntax(format!("expected `(` after `{name}`"));
        }
        self.bump();
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => break,
                    _ => return self.syntax("expected `,` or `)`"),
                }
            }
        }
        self.bump();
        if args.len() != expected {
            return Err(ExprError::Arity {
                func: name,
                expected,
                found: args.len(),
                pos,
            });
        }
        let mut args = args.into_iter().map(Box::new);
        let first = args.next().expect("arity checked");
        Ok(match name.as_str() {
            "sin" => Expr::Call(Unary::Sin, first),
            "cos" => Expr::Call(Unary::Cos, first),
            "exp" => Expr::Call(Unary::Exp, first),
            "abs" => Expr::Call(Unary::Abs, first),
            "min" => Expr::Bin(Binary::Min, first, args.next().expect("arity checked")),
            _ => Expr::Bin(Binary::Max, first, args.next().expect("arity checked")),
        })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(c) => format!("operator `{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of expression".into(),
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, ExprError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        at: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        let t = p.peek().clone();
        return p.syntax(format!("unexpected {} after expression", describe(&t)));
    }
    Ok(e)
}

/// Builds dynamics from expression sources for `f0` and `f1`.
pub fn parse_dynamics(f0_src: &str, f1_src: &str) -> Result<DynamicsSpec, ExprError> {
    let f0 = Arc::new(parse_expr(f0_src)?);
    let f1 = Arc::new(parse_expr(f1_src)?);
    Ok(DynamicsSpec::new(
        "expression",
        move |b0, b1| f0.eval(b0, b1),
        move |b0, b1| f1.eval(b0, b1),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::builtin;

    fn eval(src: &str) -> f64 {
        parse_expr(src).unwrap().eval(0.25, 0.5)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3"), 7.0);
        assert_eq!(eval("(1 + 2) * 3"), 9.0);
        assert_eq!(eval("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(eval("-2 ^ 2"), -4.0);
        assert_eq!(eval("2 ^ -1"), 0.5);
        assert_eq!(eval("8 / 4 / 2"), 1.0);
        assert_eq!(eval("1 - 2 - 3"), -4.0);
        assert_eq!(eval("--3"), 3.0);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(eval("b0 + b1"), 0.75);
        assert_eq!(eval("min(b0, b1)"), 0.25);
        assert_eq!(eval("max(b0, -b1)"), 0.25);
        assert_eq!(eval("abs(b0 - b1)"), 0.25);
        assert_eq!(eval("exp(0)"), 1.0);
        assert_eq!(eval("sin(0) + cos(0)"), 1.0);
    }

    #[test]
    fn number_forms() {
        assert_eq!(eval("1e-3"), 1e-3);
        assert_eq!(eval("2.5E+2"), 250.0);
        assert_eq!(eval(".5"), 0.5);
        assert_eq!(eval("3."), 3.0);
        assert_eq!(eval("0.000000001"), 1e-9);
    }

    #[test]
    fn constants_match_builtin() {
        let parsed = parse_dynamics("0.2", "0.8").unwrap();
        let built = builtin::constant(0.2, 0.8).unwrap();
        for (b0, b1) in [(0.0, 0.0), (0.3, 0.9), (1.0, 1.0)] {
            assert_eq!(parsed.f0(b0, b1), built.f0(b0, b1));
            assert_eq!(parsed.f1(b0, b1), built.f1(b0, b1));
        }
    }

    #[test]
    fn worked_example_source_matches_builtin() {
        let d = parse_dynamics(
            "(b1 + b1/5)/1.2 + 0.01",
            "0.5*(b1 + b1/5)/1.4 + exp(-0.000000001*(b0+b1))*sin(18*(b0+b1)) + 0.1",
        )
        .unwrap();
        for i in 0..=20 {
            for j in 0..=20 {
                let (b0, b1) = (i as f64 / 20.0, j as f64 / 20.0);
                assert!((d.raw_f1(b0, b1) - builtin::appendix_c_f1(b0, b1)).abs() <= 1e-12);
                assert!((d.raw_f0(b0, b1) - builtin::appendix_c_f0(b0, b1)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            parse_expr("b2 + 1"),
            Err(ExprError::UnknownIdentifier { name: "b2".into(), pos: 0 })
        );
        assert_eq!(
            parse_expr("1 + min(b0)"),
            Err(ExprError::Arity { func: "min".into(), expected: 2, found: 1, pos: 4 })
        );
        assert_eq!(
            parse_expr("sin(b0, b1)"),
            Err(ExprError::Arity { func: "sin".into(), expected: 1, found: 2, pos: 0 })
        );
        assert!(matches!(parse_expr("1 +"), Err(ExprError::Syntax { pos: 3, .. })));
        assert!(matches!(parse_expr("(1 + 2"), Err(ExprError::Syntax { pos: 6, .. })));
        assert!(matches!(parse_expr("1 2"), Err(ExprError::Syntax { pos: 2, .. })));
        assert!(matches!(parse_expr("1 $ 2"), Err(ExprError::Syntax { pos: 2, .. })));
        assert!(matches!(parse_expr("1..2"), Err(ExprError::Syntax { pos: 0, .. })));
        assert!(matches!(parse_expr("sin 1"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse_expr(""), Err(ExprError::Syntax { pos: 0, .. })));
    }
}
