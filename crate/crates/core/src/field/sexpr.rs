//! Prefix s-expression text form, e.g.
//! `(mul (const -36) (pow (y 1) 4) (add (x 1) (const 12)))`.
//! Coordinate indices are 1-based in text. Parsing builds nodes verbatim
//! (no simplification) so printing a parsed tree reproduces the input.

use std::fmt;

use super::expr::{Coord, Expr, Node};
use super::FieldError;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write!(f, "(const {c})"),
            Node::Var(Coord::T) => write!(f, "(t)"),
            Node::Var(Coord::X(i)) => write!(f, "(x {})", i + 1),
            Node::Var(Coord::Y(i)) => write!(f, "(y {})", i + 1),
            Node::Var(Coord::Z(i)) => write!(f, "(z {})", i + 1),
            Node::Add(v) | Node::Mul(v) => {
                write!(f, "({}", self.head())?;
                for e in v {
                    write!(f, " {e}")?;
                }
                write!(f, ")")
            }
            Node::Div(a, b) => write!(f, "(div {a} {b})"),
            Node::Pow(a, p) => write!(f, "(pow {a} {p})"),
            Node::Exp(a) | Node::Sin(a) | Node::Cos(a) | Node::Tanh(a) => {
                write!(f, "({} {a})", self.head())
            }
            Node::GuardedQuot { order, arg } | Node::SmoothStep { order, arg } => {
                write!(f, "({} {order} {arg})", self.head())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(s: &str) -> Vec<(usize, Tok<'_>)> {
    let mut out = Vec::new();
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'(' => {
                out.push((i, Tok::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::Close));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'(' && b[i] != b')' {
                    i += 1;
                }
                out.push((start, Tok::Atom(&s[start..i])));
            }
        }
    }
    out
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> FieldError {
        let at = self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.len);
        FieldError::Parse { offset: at, message: msg.into() }
    }

    fn next(&mut self) -> Option<Tok<'a>> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<&Tok<'a>> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn expect_close(&mut self) -> Result<(), FieldError> {
        match self.next() {
            Some(Tok::Close) => Ok(()),
            _ => {
                self.pos -= 1;
                Err(self.err("expected ')'"))
            }
        }
    }

    fn number(&mut self) -> Result<f64, FieldError> {
        match self.next() {
            Some(Tok::Atom(a)) => a.parse::<f64>().map_err(|_| {
                self.pos -= 1;
                self.err(format!("bad number '{a}'"))
            }),
            _ => {
                self.pos -= 1;
                Err(self.err("expected number"))
            }
        }
    }

    fn index(&mut self) -> Result<usize, FieldError> {
        match self.next() {
            Some(Tok::Atom(a)) => match a.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => {
                    self.pos -= 1;
                    Err(self.err(format!("bad 1-based index '{a}'")))
                }
            },
            _ => {
                self.pos -= 1;
                Err(self.err("expected index"))
            }
        }
    }

    fn order(&mut self) -> Result<u32, FieldError> {
        match self.next() {
            Some(Tok::Atom(a)) => a.parse::<u32>().map_err(|_| {
                self.pos -= 1;
                self.err(format!("bad order '{a}'"))
            }),
            _ => {
                self.pos -= 1;
                Err(self.err("expected order"))
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, FieldError> {
        match self.next() {
            Some(Tok::Open) => {}
            _ => {
                self.pos = self.pos.saturating_sub(1);
                return Err(self.err("expected '('"));
            }
        }
        let head = match self.next() {
            Some(Tok::Atom(a)) => a,
            _ => {
                self.pos -= 1;
                return Err(self.err("expected operator"));
            }
        };
        let node = match head {
            "const" => Node::Const(self.number()?),
            "t" => Node::Var(Coord::T),
            "x" => Node::Var(Coord::X(self.index()?)),
            "y" => Node::Var(Coord::Y(self.index()?)),
            "z" => Node::Var(Coord::Z(self.index()?)),
            "add" | "mul" => {
                let mut v = Vec::new();
                while matches!(self.peek(), Some(Tok::Open)) {
                    v.push(self.expr()?);
                }
                if v.is_empty() {
                    return Err(self.err(format!("'{head}' needs at least one operand")));
                }
                if head == "add" {
                    Node::Add(v)
                } else {
                    Node::Mul(v)
                }
            }
            "div" => {
                let a = self.expr()?;
                Node::Div(a, self.expr()?)
            }
            "pow" => {
                let a = self.expr()?;
                Node::Pow(a, self.number()?)
            }
            "exp" => Node::Exp(self.expr()?),
            "sin" => Node::Sin(self.expr()?),
            "cos" => Node::Cos(self.expr()?),
            "tanh" => Node::Tanh(self.expr()?),
            "guarded-quot" => {
                let order = self.order()?;
                Node::GuardedQuot { order, arg: self.expr()? }
            }
            "smoothstep" => {
                let order = self.order()?;
                Node::SmoothStep { order, arg: self.expr()? }
            }
            other => {
                self.pos -= 1;
                return Err(self.err(format!("unknown operator '{other}'")));
            }
        };
        self.expect_close()?;
        Ok(Expr::from_node(node))
    }
}

impl Expr {
    /// Parses the s-expression form produced by `Display`.
    pub fn parse(s: &str) -> Result<Expr, FieldError> {
        let mut p = Parser { toks: tokenize(s), pos: 0, len: s.len() };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }
}

impl std::str::FromStr for Expr {
    type Err = FieldError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prints_expected_form() {
        let e = Expr::mul([
            Expr::constant(-36.0),
            Expr::pow(Expr::y(0), 4.0),
            Expr::add([Expr::x(0), Expr::constant(12.0)]),
        ]);
        assert_eq!(e.to_string(), "(mul (const -36) (pow (y 1) 4) (add (x 1) (const 12)))");
    }

    #[test]
    fn round_trip_exact() {
        let src = "(add (guarded-quot 2 (mul (const 0.1) (x 1))) (smoothstep 0 (z 2)) (div (t) (tanh (const -0))) (const 0.30000000000000004))";
        let e = Expr::parse(src).unwrap();
        assert_eq!(e.to_string(), src);
        let again = Expr::parse(&e.to_string()).unwrap();
        assert_eq!(again, e);
    }

    #[test]
    fn parse_errors() {
        assert!(Expr::parse("(x 0)").is_err());
        assert!(Expr::parse("(foo (x 1))").is_err());
        assert!(Expr::parse("(add (x 1)").is_err());
        assert!(Expr::parse("(x 1) (x 2)").is_err());
        assert!(Expr::parse("(add)").is_err());
    }
}
