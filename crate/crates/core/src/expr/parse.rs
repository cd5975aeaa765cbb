//! Recursive-descent parser.
//!
//! Precedence, lowest first: `+ -`, `* /`, unary `-`, `^` (right
//! associative), calls and parentheses. A literal `p/q` written without
//! whitespace is one rational constant; `p / q` is a division.

use super::num::Num;
use super::{Expr, Func, Node, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Num),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            lx.skip_ws();
            let start = lx.pos;
            let Some(&c) = lx.src.get(lx.pos) else {
                out.push((Tok::End, start));
                return Ok(out);
            };
            let tok = match c {
                b'+' => Tok::Plus,
                b'-' => Tok::Minus,
                b'*' => Tok::Star,
                b'/' => Tok::Slash,
                b'^' => Tok::Caret,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'0'..=b'9' | b'.' => {
                    out.push((lx.number()?, start));
                    continue;
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    while lx
                        .src
                        .get(lx.pos)
                        .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
                    {
                        lx.pos += 1;
                    }
                    let name = std::str::from_utf8(&lx.src[start..lx.pos]).unwrap_or_default();
                    out.push((Tok::Ident(name.to_string()), start));
                    continue;
                }
                _ => {
                    return Err(ParseError::Syntax {
                        offset: start,
                        message: format!("unexpected character `{}`", char::from(c)),
                    })
                }
            };
            lx.pos += 1;
            out.push((tok, start));
        }
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn digits(&mut self) -> usize {
        let s = self.pos;
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.pos - s
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        let int_digits = self.digits();
        let mut is_float = false;
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            is_float = true;
            if self.digits() == 0 && int_digits == 0 {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: "malformed number".into(),
                });
            }
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.digits() == 0 {
                self.pos = save;
            } else {
                is_float = true;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        if is_float {
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            return Ok(Tok::Num(Num::Float(v)));
        }
        // `p/q` with no whitespace is a single rational literal
        let numer = text;
        if self.src.get(self.pos) == Some(&b'/')
            && self.src.get(self.pos + 1).is_some_and(|c| c.is_ascii_digit())
        {
            self.pos += 1;
            let ds = self.pos;
            self.digits();
            let denom = std::str::from_utf8(&self.src[ds..self.pos]).unwrap_or_default();
            return match (numer.parse::<i64>(), denom.parse::<i64>()) {
                (_, Ok(0)) => Err(ParseError::Syntax {
                    offset: ds,
                    message: "zero denominator in rational literal".into(),
                }),
                (Ok(p), Ok(q)) => Ok(Tok::Num(Num::ratio(p, q))),
                _ => Ok(Tok::Num(Num::Float(
                    numer.parse::<f64>().unwrap_or(f64::NAN) / denom.parse::<f64>().unwrap_or(f64::NAN),
                ))),
            };
        }
        Ok(Tok::Num(match numer.parse::<i64>() {
            Ok(n) => Num::int(n),
            Err(_) => Num::Float(numer.parse::<f64>().unwrap_or(f64::INFINITY)),
        }))
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

/// Parse an expression in `t`, `x` and `v`/`u`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser {
        toks: Lexer::tokens(text)?,
        i: 0,
    };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        other => Err(p.err(format!("unexpected {}", describe(other)))),
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(n) => format!("number `{n}`"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err(&self, message: String) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            message,
        }
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {}, found {}", describe(&t), describe(self.peek()))))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::raw(Node::Add(lhs, self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::raw(Node::Sub(lhs, self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::raw(Node::Mul(lhs, self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::raw(Node::Div(lhs, self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() != Tok::Minus {
            return self.power();
        }
        self.bump();
        // `-3` is the constant -3, but `-3^2` is -(3^2)
        if let Tok::Num(n) = self.peek().clone() {
            if *self.peek_at(1) != Tok::Caret {
                self.bump();
                return Ok(Expr::constant(n.neg()));
            }
        }
        Ok(Expr::raw(Node::Neg(self.unary()?)))
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let at = self.offset();
        let exponent = self.unary()?;
        match const_value(&exponent) {
            Some(r) => Ok(Expr::raw(Node::Pow(base, r))),
            None => Err(ParseError::Syntax {
                offset: at,
                message: "exponent must be a numeric constant".into(),
            }),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(n) => Ok(Expr::constant(n)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "t" => Ok(Expr::var(Var::T)),
                "x" => Ok(Expr::var(Var::X)),
                "v" | "u" => Ok(Expr::var(Var::W)),
                other => match Func::from_name(other) {
                    Some(f) => {
                        self.expect(Tok::LParen)?;
                        let arg = self.expr()?;
                        self.expect(Tok::RParen)?;
                        Ok(Expr::raw(Node::Func(f, arg)))
                    }
                    None => Err(ParseError::UnknownIdentifier {
                        name: other.to_string(),
                        offset: at,
                    }),
                },
            },
            Tok::End => Err(ParseError::Syntax {
                offset: at,
                message: "unexpected end of input".into(),
            }),
            other => Err(ParseError::Syntax {
                offset: at,
                message: format!("unexpected {}", describe(&other)),
            }),
        }
    }
}

/// Exact value of a constant subtree, if it is one.
fn const_value(e: &Expr) -> Option<Num> {
    match e.node() {
        Node::Const(c) => Some(*c),
        Node::Neg(a) => const_value(a).map(Num::neg),
        Node::Add(a, b) => Some(const_value(a)?.add(const_value(b)?)),
        Node::Sub(a, b) => Some(const_value(a)?.sub(const_value(b)?)),
        Node::Mul(a, b) => Some(const_value(a)?.mul(const_value(b)?)),
        Node::Div(a, b) => const_value(a)?.div(const_value(b)?),
        Node::Pow(a, r) => const_value(a)?.powi(r.as_integer()?),
        _ => None,
    }
}
