//! A small arithmetic-expression language for user-supplied kernels.
//!
//! Variables are `x1..xm` (the kernel arguments) and `i1..im` (the 1-based
//! sample indices the arguments were taken from). Operators `+ - * / ^`
//! with the usual precedence (`^` binds tightest and is right-associative),
//! unary minus, and the functions `abs`, `sign`, `exp`, `min`, `max`.
//!
//! Expressions are compiled once to a postfix program and evaluated on a
//! fixed-size stack.

use crate::error::{Error, Result};

const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    X(usize),
    I(usize),
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Neg,
    Abs,
    Sign,
    Exp,
    Min(usize),
    Max(usize),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Expression {
                pos: start,
                msg: format!("bad number `{text}`"),
            })?;
            out.push((start, Token::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(src[start..i].to_string())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Token::Sym(c)));
            i += 1;
        } else {
            return Err(Error::Expression {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [(usize, Token)],
    pos: usize,
    end: usize,
    ops: Vec<Op>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Expression {
            pos: self.here(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Token::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<()> {
        self.term()?;
        loop {
            if self.eat('+') {
                self.term()?;
                self.ops.push(Op::Add);
            } else if self.eat('-') {
                self.term()?;
                self.ops.push(Op::Sub);
            } else {
                return Ok(());
            }
        }
    }

    fn term(&mut self) -> Result<()> {
        self.unary()?;
        loop {
            if self.eat('*') {
                self.unary()?;
                self.ops.push(Op::Mul);
            } else if self.eat('/') {
                self.unary()?;
                self.ops.push(Op::Div);
            } else {
                return Ok(());
            }
        }
    }

    fn unary(&mut self) -> Result<()> {
        if self.eat('-') {
            self.unary()?;
            self.ops.push(Op::Neg);
            Ok(())
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<()> {
        self.atom()?;
        if self.eat('^') {
            self.unary()?;
            self.ops.push(Op::Pow);
        }
        Ok(())
    }

    fn atom(&mut self) -> Result<()> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        match tok {
            Token::Num(v) => {
                self.pos += 1;
                self.ops.push(Op::Const(v));
                Ok(())
            }
            Token::Sym('(') => {
                self.pos += 1;
                self.expr()?;
                if !self.eat(')') {
                    return self.err("expected `)`");
                }
                Ok(())
            }
            Token::Ident(name) => {
                let start = self.here();
                self.pos += 1;
                if let Some(op) = variable(&name) {
                    self.ops.push(op);
                    return Ok(());
                }
                if !self.eat('(') {
                    return Err(Error::Expression {
                        pos: start,
                        msg: format!("unknown identifier `{name}`"),
                    });
                }
                let mut argc = 0;
                if !self.eat(')') {
                    loop {
                        self.expr()?;
                        argc += 1;
                        if self.eat(')') {
                            break;
                        }
                        if !self.eat(',') {
                            return self.err("expected `,` or `)`");
                        }
                    }
                }
                let op = match (name.as_str(), argc) {
                    ("abs", 1) => Op::Abs,
                    ("sign", 1) => Op::Sign,
                    ("exp", 1) => Op::Exp,
                    ("min", n) if n >= 2 => Op::Min(n),
                    ("max", n) if n >= 2 => Op::Max(n),
                    ("abs" | "sign" | "exp" | "min" | "max", n) => {
                        return Err(Error::Expression {
                            pos: start,
                            msg: format!("`{name}` does not take {n} argument(s)"),
                        })
                    }
                    _ => {
                        return Err(Error::Expression {
                            pos: start,
                            msg: format!("unknown function `{name}`"),
                        })
                    }
                };
                self.ops.push(op);
                Ok(())
            }
            Token::Sym(c) => self.err(format!("unexpected `{c}`")),
        }
    }
}

fn variable(name: &str) -> Option<Op> {
    let (kind, digits) = name.split_at(1);
    let k: usize = digits.parse().ok()?;
    if k == 0 || digits.starts_with('0') {
        return None;
    }
    match kind {
        "x" => Some(Op::X(k - 1)),
        "i" => Some(Op::I(k - 1)),
        _ => None,
    }
}

/// A compiled expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    ops: Vec<Op>,
    args: usize,
    indices: usize,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
            end: source.len(),
            ops: Vec::new(),
        };
        p.expr()?;
        if p.pos != tokens.len() {
            return p.err("trailing input");
        }
        let ops = p.ops;

        let mut depth = 0usize;
        let mut max_depth = 0usize;
        let (mut args, mut indices) = (0, 0);
        for op in &ops {
            match *op {
                Op::Const(_) => depth += 1,
                Op::X(k) => {
                    args = args.max(k + 1);
                    depth += 1
                }
                Op::I(k) => {
                    indices = indices.max(k + 1);
                    depth += 1
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow => depth -= 1,
                Op::Neg | Op::Abs | Op::Sign | Op::Exp => {}
                Op::Min(n) | Op::Max(n) => depth -= n - 1,
            }
            max_depth = max_depth.max(depth);
        }
        if max_depth > MAX_DEPTH {
            return Err(Error::Expression {
                pos: 0,
                msg: format!("expression nests deeper than {MAX_DEPTH}"),
            });
        }
        Ok(Self {
            source: source.to_string(),
            ops,
            args,
            indices,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Highest `x` variable referenced (so `x3` gives 3).
    pub fn arity_used(&self) -> usize {
        self.args
    }

    /// Whether any `i` variable is referenced.
    pub fn uses_indices(&self) -> bool {
        self.indices > 0
    }

    pub fn index_arity_used(&self) -> usize {
        self.indices
    }

    /// Evaluates with 0-based `index`; `i_k` sees `index[k-1] + 1`.
    /// Callers guarantee `x` and `index` are long enough.
    #[inline]
    pub fn eval(&self, x: &[f64], index: &[usize]) -> f64 {
        let mut stack = [0.0f64; MAX_DEPTH];
        let mut sp = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(v) => {
                    stack[sp] = v;
                    sp += 1;
                }
                Op::X(k) => {
                    stack[sp] = x[k];
                    sp += 1;
                }
                Op::I(k) => {
                    stack[sp] = (index[k] + 1) as f64;
                    sp += 1;
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow => {
                    sp -= 1;
                    let b = stack[sp];
                    let a = &mut stack[sp - 1];
                    *a = match *op {
                        Op::Add => *a + b,
                        Op::Sub => *a - b,
                        Op::Mul => *a * b,
                        Op::Div => *a / b,
                        _ => pow(*a, b),
                    };
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::Abs => stack[sp - 1] = stack[sp - 1].abs(),
                Op::Sign => {
                    let v = stack[sp - 1];
                    stack[sp - 1] = if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                }
                Op::Exp => stack[sp - 1] = stack[sp - 1].exp(),
                Op::Min(n) => {
                    let v = stack[sp - n..sp].iter().copied().fold(f64::INFINITY, f64::min);
                    sp -= n - 1;
                    stack[sp - 1] = v;
                }
                Op::Max(n) => {
                    let v = stack[sp - n..sp]
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max);
                    sp -= n - 1;
                    stack[sp - 1] = v;
                }
            }
        }
        stack[0]
    }
}

#[inline]
fn pow(a: f64, b: f64) -> f64 {
    if b == 2.0 {
        a * a
    } else if b.fract() == 0.0 && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src).unwrap().eval(x, &[0, 1, 2])
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", &[]), 512.0);
        assert_eq!(ev("-2 ^ 2", &[]), -4.0);
        assert_eq!(ev("2 ^ -1", &[]), 0.5);
        assert_eq!(ev("8 / 4 / 2", &[]), 1.0);
        assert_eq!(ev("1 - 2 - 3", &[]), -4.0);
        assert_eq!(ev("1.5e1 + .5", &[]), 15.5);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("x1*x2", &[3.0, -2.0]), -6.0);
        assert_eq!(ev("x1 + x2", &[1.0, 2.0]), 3.0);
        assert_eq!(ev("(x1 - x2)^2 / 2", &[3.0, 1.0]), 2.0);
        assert_eq!(ev("sign(x2 - x1)", &[3.0, 1.0]), -1.0);
        assert_eq!(ev("sign(0)", &[]), 0.0);
        assert_eq!(ev("abs(-3) + min(4, 2, 7) + max(1, 5)", &[]), 10.0);
        assert_eq!(ev("exp(0)", &[]), 1.0);
        let e = Expr::parse("x1*x2/i2").unwrap();
        assert!(e.uses_indices());
        assert_eq!(e.arity_used(), 2);
        assert_eq!(e.eval(&[2.0, 3.0], &[0, 4]), 6.0 / 5.0);
    }

    #[test]
    fn errors_carry_positions() {
        for bad in ["x1 +", "foo(1)", "x0", "1 $ 2", "(1", "abs(1, 2)", "y1", "1 2"] {
            assert!(matches!(Expr::parse(bad), Err(Error::Expression { .. })), "{bad}");
        }
        match Expr::parse("1 + bogus") {
            Err(Error::Expression { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
    }
}
