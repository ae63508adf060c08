//! Small complex-valued expression language for catalog parameters, e.g. `0.1*exp(i*x)`.
//!
//! Variables are `x`, `y`, `z` (alias `t`) and the constants `i`, `pi`. Functions:
//! `exp`, `sin`, `cos`, `sinh`, `cosh`, `sqrt`, `conj`, `re`, `im`.

use crate::error::{CrError, Result};
use num_complex::Complex64 as C64;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Imag,
    Var(usize),
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Call(String, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { s: src.as_bytes(), pos: 0 };
        let e = p.sum()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(CrError::Expr(format!("unexpected input at byte {} of {src:?}", p.pos)));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        match self {
            Expr::Num(v) => C64::new(*v, 0.0),
            Expr::Imag => C64::new(0.0, 1.0),
            Expr::Var(k) => C64::new(x.get(*k).copied().unwrap_or(0.0), 0.0),
            Expr::Neg(a) => -a.eval(x),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => {
                        if b.im == 0.0 && b.re.fract() == 0.0 && b.re.abs() < 64.0 {
                            a.powi(b.re as i32)
                        } else {
                            a.powc(b)
                        }
                    }
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(x);
                match f.as_str() {
                    "exp" => v.exp(),
                    "sin" => v.sin(),
                    "cos" => v.cos(),
                    "sinh" => v.sinh(),
                    "cosh" => v.cosh(),
                    "sqrt" => v.sqrt(),
                    "conj" => v.conj(),
                    "re" => C64::new(v.re, 0.0),
                    _ => C64::new(v.im, 0.0),
                }
            }
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

const FUNCS: [&str; 9] = ["exp", "sin", "cos", "sinh", "cosh", "sqrt", "conj", "re", "im"];

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::Bin(c as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(c as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.unary()?;
            return Ok(Expr::Bin('^', Box::new(base), Box::new(e)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                match name {
                    "i" => Ok(Expr::Imag),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "x" => Ok(Expr::Var(0)),
                    "y" => Ok(Expr::Var(1)),
                    "z" | "t" => Ok(Expr::Var(2)),
                    f if FUNCS.contains(&f) => {
                        self.expect(b'(')?;
                        let arg = self.sum()?;
                        self.expect(b')')?;
                        Ok(Expr::Call(f.to_string(), Box::new(arg)))
                    }
                    other => Err(CrError::Expr(format!("unknown identifier {other:?}"))),
                }
            }
            Some(c) => Err(CrError::Expr(format!("unexpected character {:?}", c as char))),
            None => Err(CrError::Expr("unexpected end of expression".into())),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.s.len() && (self.s[self.pos] == b'e' || self.s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.s.len() && (self.s[self.pos] == b'-' || self.s[self.pos] == b'+') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        text.parse::<f64>().map(Expr::Num).map_err(|_| CrError::Expr(format!("bad number {text:?}")))
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(CrError::Expr(format!("expected {:?} at byte {}", c as char, self.pos)))
        }
    }
}
