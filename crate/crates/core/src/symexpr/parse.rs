use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::{Poly, Rat, VarTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("undeclared variable `{name}` at byte {offset}")]
    UndeclaredVariable { name: String, offset: usize },
    #[error("syntax error at byte {offset}: {message}")]
    SyntaxError { offset: usize, message: String },
    #[error("negative exponent at byte {offset}")]
    NegativeExponent { offset: usize },
}

impl ParseError {
    pub(crate) fn syntax(offset: usize, message: impl Into<String>) -> Self {
        ParseError::SyntaxError {
            offset,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Number(Rat),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

/// Whitespace-insensitive lexer that remembers byte offsets.
pub struct Tokenizer;

impl Tokenizer {
    pub fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
        let bytes = text.as_bytes();
        let mut out = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if c.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            let tok = match c {
                b'+' => Token::Plus,
                b'-' => Token::Minus,
                b'*' => Token::Star,
                b'/' => Token::Slash,
                b'^' => Token::Caret,
                b'(' => Token::LParen,
                b')' => Token::RParen,
                b',' => Token::Comma,
                b'0'..=b'9' | b'.' => {
                    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                        i += 1;
                    }
                    let lit = &text[start..i];
                    out.push((Token::Number(decimal(lit, start)?), start));
                    continue;
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                        i += 1;
                    }
                    out.push((Token::Ident(text[start..i].to_string()), start));
                    continue;
                }
                _ => {
                    return Err(ParseError::syntax(
                        start,
                        format!("unexpected character `{}`", text[start..].chars().next().unwrap()),
                    ))
                }
            };
            out.push((tok, start));
            i += 1;
        }
        out.push((Token::End, text.len()));
        Ok(out)
    }
}

fn decimal(lit: &str, offset: usize) -> Result<Rat, ParseError> {
    let bad = || ParseError::syntax(offset, format!("malformed number `{lit}`"));
    let (int, frac) = match lit.split_once('.') {
        Some((a, b)) => (a, b),
        None => (lit, ""),
    };
    if frac.contains('.') || (int.is_empty() && frac.is_empty()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let numer: BigInt = digits.parse().map_err(|_| bad())?;
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    Ok(Rat::new(numer, denom))
}

/// Parses a rational literal such as `3`, `-1/2` or `0.25`.
pub fn parse_rat(text: &str) -> Result<Rat, ParseError> {
    let p = parse(text, &VarTable::new())?;
    p.constant_value()
        .ok_or_else(|| ParseError::syntax(0, "expected a rational constant"))
}

/// Recursive-descent parser over a token stream. Exposed so that other
/// grammars (E-forms) can embed polynomial sub-expressions.
pub struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    vars: &'a VarTable,
}

impl<'a> Parser<'a> {
    pub fn new(text: &str, vars: &'a VarTable) -> Result<Self, ParseError> {
        Ok(Parser {
            tokens: Tokenizer::tokenize(text)?,
            pos: 0,
            vars,
        })
    }

    pub fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    pub fn peek_at(&self, k: usize) -> &Token {
        let i = (self.pos + k).min(self.tokens.len() - 1);
        &self.tokens[i].0
    }

    pub fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    pub fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    pub fn expect(&mut self, tok: Token, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::syntax(self.offset(), format!("expected {what}")))
        }
    }

    pub fn expect_end(&mut self) -> Result<(), ParseError> {
        self.expect(Token::End, "end of input")
    }

    pub fn vars(&self) -> &VarTable {
        self.vars
    }

    /// `sum := term (('+'|'-') term)*`
    pub fn sum(&mut self) -> Result<Poly, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Token::Plus => {
                    self.bump();
                    acc += self.term()?;
                }
                Token::Minus => {
                    self.bump();
                    acc -= self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Poly, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Token::Star => {
                    self.bump();
                    acc = &acc * &self.unary()?;
                }
                Token::Slash => {
                    self.bump();
                    let at = self.offset();
                    let d = self.unary()?;
                    let c = d
                        .constant_value()
                        .ok_or_else(|| ParseError::syntax(at, "division by a non-constant"))?;
                    if c.is_zero() {
                        return Err(ParseError::syntax(at, "division by zero"));
                    }
                    acc = acc.scale(&(Rat::one() / c));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Poly, ParseError> {
        match self.peek() {
            Token::Minus => {
                self.bump();
                Ok(-self.unary()?)
            }
            Token::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Poly, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Token::Caret {
            return Ok(base);
        }
        self.bump();
        let e = self.exponent()?;
        Ok(base.pow(e))
    }

    /// Non-negative integer exponent following a `^`.
    pub fn exponent(&mut self) -> Result<u32, ParseError> {
        let at = self.offset();
        if *self.peek() == Token::Minus {
            return Err(ParseError::NegativeExponent { offset: at });
        }
        match self.bump() {
            Token::Number(r) if r.is_integer() => {
                let n: Option<u32> = r.numer().try_into().ok();
                n.ok_or_else(|| ParseError::syntax(at, "exponent too large"))
            }
            _ => Err(ParseError::syntax(at, "expected an integer exponent")),
        }
    }

    fn atom(&mut self) -> Result<Poly, ParseError> {
        let at = self.offset();
        match self.bump() {
            Token::Number(r) => Ok(Poly::constant(r)),
            Token::Ident(name) => match self.vars.lookup(&name) {
                Some(id) => Ok(Poly::var(id)),
                None => Err(ParseError::UndeclaredVariable { name, offset: at }),
            },
            Token::LParen => {
                let inner = self.sum()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            Token::End => Err(ParseError::syntax(at, "unexpected end of input")),
            t => Err(ParseError::syntax(at, format!("unexpected token {t:?}"))),
        }
    }
}

/// Parses a polynomial over the declared variables of `vars`.
pub fn parse(text: &str, vars: &VarTable) -> Result<Poly, ParseError> {
    let mut p = Parser::new(text, vars)?;
    let out = p.sum()?;
    p.expect_end()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{rat, Monomial, VarKind};

    fn t3() -> VarTable {
        let mut t = VarTable::new();
        t.declare_all(&["X1", "X2", "X3"], VarKind::Target).unwrap();
        t
    }

    #[test]
    fn grammar_examples() {
        let t = t3();
        let x3 = t.lookup("X3").unwrap();
        assert_eq!(parse("X3", &t).unwrap(), Poly::var(x3));
        let x1 = t.lookup("X1").unwrap();
        assert_eq!(
            parse("(X1)^2", &t).unwrap(),
            Poly::monomial(rat(1, 1), Monomial::from_pairs([(x1, 2)]))
        );
        assert!(parse("X1*X2 - X2*X1", &t).unwrap().is_zero());
        assert_eq!(
            parse(" - ( X1 + 1/2 ) * 4 ", &t).unwrap(),
            parse("-4*X1 - 2", &t).unwrap()
        );
        assert_eq!(parse("0.25*X2", &t).unwrap(), parse("X2/4", &t).unwrap());
        assert_eq!(parse("-X1^2", &t).unwrap(), -parse("X1*X1", &t).unwrap());
    }

    #[test]
    fn error_kinds_carry_offsets() {
        let t = t3();
        assert_eq!(
            parse("X1 + Y", &t),
            Err(ParseError::UndeclaredVariable {
                name: "Y".into(),
                offset: 5
            })
        );
        assert_eq!(
            parse("X1^-2", &t),
            Err(ParseError::NegativeExponent { offset: 3 })
        );
        assert!(matches!(
            parse("X1 + * X2", &t),
            Err(ParseError::SyntaxError { offset: 5, .. })
        ));
        assert!(matches!(
            parse("(X1", &t),
            Err(ParseError::SyntaxError { offset: 3, .. })
        ));
        assert!(matches!(parse("X1/X2", &t), Err(ParseError::SyntaxError { .. })));
        assert!(matches!(parse("1/0", &t), Err(ParseError::SyntaxError { .. })));
        assert!(matches!(parse("X1 $", &t), Err(ParseError::SyntaxError { offset: 3, .. })));
    }

    #[test]
    fn rational_literals() {
        assert_eq!(parse_rat("-3/4").unwrap(), rat(-3, 4));
        assert_eq!(parse_rat("1.5").unwrap(), rat(3, 2));
        assert!(parse_rat("1.2.3").is_err());
    }
}
