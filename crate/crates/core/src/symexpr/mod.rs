//! Exact multivariate polynomials over the rationals.
//!
//! Every structure function, field component and gauge parameter in this
//! crate is a [`Poly`]. Equality is decided on the canonical term map, so
//! `is_zero` is exact.

mod parse;
mod poly;

use std::collections::HashMap;
use std::fmt;

pub use parse::{parse, parse_rat, ParseError, Parser, Token, Tokenizer};
pub use poly::{Monomial, Poly, PolyDisplay};

use num_bigint::BigInt;
use num_traits::One;

/// Coefficient field.
pub type Rat = num_rational::BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn fmt_rat(r: &Rat, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if r.denom().is_one() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

pub(crate) fn is_unit(r: &Rat) -> bool {
    r.is_one()
}


/// Index of a variable inside a [`VarTable`]. Ids follow declaration order,
/// which is also the global variable order used by the monomial ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    /// Worldsheet / source base coordinate `x^μ`.
    Source,
    /// Target base coordinate `X^i`.
    Target,
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Var {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VarError {
    #[error("variable `{0}` already declared with a different kind")]
    KindClash(String),
    #[error("`{0}` is not a valid identifier")]
    BadName(String),
}

/// Interning table for variables. One table is shared by every object in a
/// session; polynomials only store [`VarId`]s.
#[derive(Debug, Clone, Default)]
pub struct VarTable {
    vars: Vec<Var>,
    index: HashMap<String, VarId>,
}

impl VarTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a variable, returning the existing id when the name is
    /// already known with the same kind.
    pub fn declare(&mut self, name: &str, kind: VarKind) -> Result<VarId, VarError> {
        if !is_identifier(name) {
            return Err(VarError::BadName(name.to_string()));
        }
        if let Some(&id) = self.index.get(name) {
            if self.vars[id.0 as usize].kind != kind {
                return Err(VarError::KindClash(name.to_string()));
            }
            return Ok(id);
        }
        let id = VarId(self.vars.len() as u32);
        self.vars.push(Var {
            name: name.to_string(),
            kind,
        });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn declare_all(&mut self, names: &[&str], kind: VarKind) -> Result<Vec<VarId>, VarError> {
        names.iter().map(|n| self.declare(n, kind)).collect()
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn var(&self, id: VarId) -> &Var {
        &self.vars[id.0 as usize]
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.vars[id.0 as usize].name
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.vars.len()).map(|i| VarId(i as u32))
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
