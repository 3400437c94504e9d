//! Exterior forms over an algebroid coframe `b^I`, with the algebroid
//! differential, contraction and Lie derivative.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_traits::Signed;

use crate::algebroid::{Algebroid, Section};
use crate::symexpr::{fmt_rat, is_unit, ParseError, Parser, Poly, Token, VarTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormError {
    #[error("forms live over coframes of different rank ({0} vs {1})")]
    AlgebroidMismatch(usize, usize),
    #[error("contraction of a 0-form")]
    DegreeZero,
}

/// A wedge monomial `b^{I1} ∧ … ∧ b^{Ip}` stored as a bit set of frame
/// indices (increasing order is implicit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Blade(pub u64);

impl Blade {
    pub const ONE: Blade = Blade(0);

    pub fn single(i: usize) -> Blade {
        assert!(i < 64, "frame index out of range");
        Blade(1 << i)
    }

    pub fn from_indices(idx: &[usize]) -> Option<(Blade, i32)> {
        let mut b = Blade::ONE;
        let mut sign = 1;
        for &i in idx {
            let (nb, s) = b.wedge(Blade::single(i))?;
            b = nb;
            sign *= s;
        }
        Some((b, sign))
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn indices(self) -> Vec<usize> {
        (0..64).filter(|&i| self.contains(i)).collect()
    }

    /// Product of two blades: `None` when they share an index, otherwise the
    /// merged blade and the shuffle sign.
    pub fn wedge(self, other: Blade) -> Option<(Blade, i32)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        // Each index of `other` must move past the indices of `self` above it.
        let mut swaps = 0u32;
        let mut rest = other.0;
        while rest != 0 {
            let j = rest.trailing_zeros();
            swaps += (self.0 >> j).count_ones();
            rest &= rest - 1;
        }
        let sign = if swaps % 2 == 0 { 1 } else { -1 };
        Some((Blade(self.0 | other.0), sign))
    }

    /// Removes index `i`; the sign is `(-1)^k` with `k` the position of `i`.
    pub fn remove(self, i: usize) -> Option<(Blade, i32)> {
        if !self.contains(i) {
            return None;
        }
        let below = (self.0 & ((1u64 << i) - 1)).count_ones();
        let sign = if below % 2 == 0 { 1 } else { -1 };
        Some((Blade(self.0 & !(1 << i)), sign))
    }
}

/// Degree first, then lexicographic on the index tuple.
impl Ord for Blade {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.indices().cmp(&other.indices()))
    }
}

impl PartialOrd for Blade {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A (possibly mixed-degree) E-form: a map from blades to coefficient
/// polynomials. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EForm {
    rank: usize,
    terms: BTreeMap<Blade, Poly>,
}

impl EForm {
    pub fn zero(rank: usize) -> Self {
        EForm {
            rank,
            terms: BTreeMap::new(),
        }
    }

    pub fn scalar(rank: usize, f: Poly) -> Self {
        EForm::term(rank, Blade::ONE, f)
    }

    /// The coframe element `b^i`.
    pub fn generator(rank: usize, i: usize) -> Self {
        assert!(i < rank);
        EForm::term(rank, Blade::single(i), Poly::one())
    }

    pub fn term(rank: usize, blade: Blade, f: Poly) -> Self {
        let mut out = EForm::zero(rank);
        out.add_term(blade, f);
        out
    }

    pub fn from_terms(rank: usize, terms: impl IntoIterator<Item = (Blade, Poly)>) -> Self {
        let mut out = EForm::zero(rank);
        for (b, f) in terms {
            out.add_term(b, f);
        }
        out
    }

    /// `Σ_I comps[I] b^I`.
    pub fn one_form(comps: &[Poly]) -> Self {
        EForm::from_terms(
            comps.len(),
            comps
                .iter()
                .enumerate()
                .map(|(i, f)| (Blade::single(i), f.clone())),
        )
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Blade, &Poly)> {
        self.terms.iter()
    }

    pub fn coeff(&self, b: Blade) -> Poly {
        self.terms.get(&b).cloned().unwrap_or_default()
    }

    /// Coefficient of `b^i` in a 1-form.
    pub fn component(&self, i: usize) -> Poly {
        self.coeff(Blade::single(i))
    }

    /// `Some(p)` when every stored term has degree `p` (zero counts as any
    /// degree and reports `None`).
    pub fn degree(&self) -> Option<usize> {
        let mut it = self.terms.keys().map(|b| b.degree());
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(|b| b.degree()).max().unwrap_or(0)
    }

    pub fn part(&self, p: usize) -> EForm {
        EForm {
            rank: self.rank,
            terms: self
                .terms
                .iter()
                .filter(|(b, _)| b.degree() == p)
                .map(|(b, f)| (*b, f.clone()))
                .collect(),
        }
    }

    pub(crate) fn add_term(&mut self, b: Blade, f: Poly) {
        if f.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(b) {
            Entry::Vacant(e) => {
                e.insert(f);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += &f;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    fn check(&self, other: &EForm) -> Result<(), FormError> {
        if self.rank == other.rank {
            Ok(())
        } else {
            Err(FormError::AlgebroidMismatch(self.rank, other.rank))
        }
    }

    pub fn try_add(&self, other: &EForm) -> Result<EForm, FormError> {
        self.check(other)?;
        let mut out = self.clone();
        for (b, f) in &other.terms {
            out.add_term(*b, f.clone());
        }
        Ok(out)
    }

    /// Panics on rank mismatch; see [`EForm::try_add`].
    pub fn add(&self, other: &EForm) -> EForm {
        self.try_add(other).expect("E-form rank mismatch")
    }

    pub fn sub(&self, other: &EForm) -> EForm {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> EForm {
        self.map_coeffs(|f| -f)
    }

    /// Multiplies by a function.
    pub fn mul_poly(&self, g: &Poly) -> EForm {
        self.map_coeffs(|f| f * g)
    }

    pub fn scale(&self, c: &crate::symexpr::Rat) -> EForm {
        self.map_coeffs(|f| f.scale(c))
    }

    pub fn map_coeffs(&self, mut op: impl FnMut(&Poly) -> Poly) -> EForm {
        let mut out = EForm::zero(self.rank);
        for (b, f) in &self.terms {
            out.add_term(*b, op(f));
        }
        out
    }

    /// Graded-commutative product.
    pub fn try_wedge(&self, other: &EForm) -> Result<EForm, FormError> {
        self.check(other)?;
        let mut out = EForm::zero(self.rank);
        for (ba, fa) in &self.terms {
            for (bb, fb) in &other.terms {
                if let Some((b, s)) = ba.wedge(*bb) {
                    let prod = fa * fb;
                    out.add_term(b, if s < 0 { -prod } else { prod });
                }
            }
        }
        Ok(out)
    }

    /// Panics on rank mismatch; see [`EForm::try_wedge`].
    pub fn wedge(&self, other: &EForm) -> EForm {
        self.try_wedge(other).expect("E-form rank mismatch")
    }

    /// Interior product, total on all degrees (functions map to zero).
    pub fn interior(&self, s: &Section) -> EForm {
        let mut out = EForm::zero(self.rank);
        for (b, f) in &self.terms {
            for i in b.indices() {
                let (rest, sign) = b.remove(i).unwrap();
                let c = f * &s.components[i];
                out.add_term(rest, if sign < 0 { -c } else { c });
            }
        }
        out
    }

    /// Contraction `ι_s`; rejects forms with a degree-0 part.
    pub fn contract(&self, s: &Section) -> Result<EForm, FormError> {
        if s.components.len() != self.rank {
            return Err(FormError::AlgebroidMismatch(self.rank, s.components.len()));
        }
        if self.terms.keys().any(|b| b.degree() == 0) {
            return Err(FormError::DegreeZero);
        }
        Ok(self.interior(s))
    }

    /// Re-indexes the coframe: index `i` becomes `map[i]` in a coframe of
    /// rank `new_rank`. `map` must be strictly increasing.
    pub fn embed(&self, new_rank: usize, map: &[usize]) -> EForm {
        let mut out = EForm::zero(new_rank);
        for (b, f) in &self.terms {
            let idx: Vec<usize> = b.indices().iter().map(|&i| map[i]).collect();
            let (nb, sign) = Blade::from_indices(&idx).expect("embedding must be injective");
            out.add_term(nb, if sign < 0 { -f } else { f.clone() });
        }
        out
    }

    pub fn display<'a>(&'a self, frame: &'a [String], vars: &'a VarTable) -> FormDisplay<'a> {
        FormDisplay {
            form: self,
            frame,
            vars,
        }
    }
}

/// Algebroid differential on a function: `f ↦ ρ^i_I ∂_i f b^I`.
pub fn d_function(alg: &Algebroid, f: &Poly) -> EForm {
    let mut out = EForm::zero(alg.rank());
    if f.is_zero() {
        return out;
    }
    let partials: Vec<Poly> = alg.base().iter().map(|&x| f.differentiate(x)).collect();
    for big_i in 0..alg.rank() {
        let mut c = Poly::zero();
        for (i, p) in partials.iter().enumerate() {
            if !p.is_zero() {
                c += &(alg.anchor(big_i, i) * p);
            }
        }
        out.add_term(Blade::single(big_i), c);
    }
    out
}

/// `d b^I = -1/2 C^I_JK b^J ∧ b^K = -Σ_{J<K} C^I_JK b^J ∧ b^K`.
pub fn d_generator(alg: &Algebroid, upper: usize) -> EForm {
    let r = alg.rank();
    let mut out = EForm::zero(r);
    for j in 0..r {
        for k in j + 1..r {
            let c = alg.structure(upper, j, k);
            if !c.is_zero() {
                out.add_term(Blade::single(j).wedge(Blade::single(k)).unwrap().0, -c);
            }
        }
    }
    out
}

/// The algebroid (Chevalley–Eilenberg) differential, degree +1.
pub fn e_differential(alg: &Algebroid, w: &EForm) -> Result<EForm, FormError> {
    if w.rank != alg.rank() {
        return Err(FormError::AlgebroidMismatch(w.rank, alg.rank()));
    }
    let r = alg.rank();
    let dgen: Vec<EForm> = (0..r).map(|i| d_generator(alg, i)).collect();
    let mut out = EForm::zero(r);
    for (b, f) in &w.terms {
        let blade = EForm::term(r, *b, Poly::one());
        // d(f) ∧ blade
        for (db, df) in &d_function(alg, f).terms {
            if let Some((nb, s)) = db.wedge(*b) {
                out.add_term(nb, if s < 0 { -df } else { df.clone() });
            }
        }
        // f Σ_k (-1)^k b^{I1} … d b^{Ik} … b^{Ip}
        let idx = b.indices();
        for (k, &i) in idx.iter().enumerate() {
            if dgen[i].is_zero() {
                continue;
            }
            let before = Blade(idx[..k].iter().fold(0, |acc, &j| acc | 1 << j));
            let after = Blade(idx[k + 1..].iter().fold(0, |acc, &j| acc | 1 << j));
            let piece = EForm::term(r, before, Poly::one())
                .wedge(&dgen[i])
                .wedge(&EForm::term(r, after, Poly::one()));
            let piece = piece.mul_poly(f);
            let piece = if k % 2 == 1 { piece.neg() } else { piece };
            out = out.add(&piece);
        }
        let _ = blade;
    }
    Ok(out)
}

/// `L_s = d ι_s + ι_s d`.
pub fn lie_derivative(alg: &Algebroid, w: &EForm, s: &Section) -> Result<EForm, FormError> {
    let di = e_differential(alg, &w.interior(s))?;
    let id = e_differential(alg, w)?.interior(s);
    Ok(di.add(&id))
}

pub struct FormDisplay<'a> {
    form: &'a EForm,
    frame: &'a [String],
    vars: &'a VarTable,
}

impl fmt::Display for FormDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.form.is_zero() {
            return write!(f, "0");
        }
        for (k, (b, c)) in self.form.terms.iter().enumerate() {
            let names: Vec<&str> = b.indices().iter().map(|&i| self.frame[i].as_str()).collect();
            let blade = names.join("^");
            let single = c.num_terms() == 1;
            let (neg, coeff) = if single {
                let (m, r) = c.terms().next().unwrap();
                let neg = r.is_negative();
                (neg, Poly::monomial(r.abs(), m.clone()))
            } else {
                (false, c.clone())
            };
            if k > 0 {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            } else if neg {
                write!(f, "-")?;
            }
            if b.degree() == 0 {
                write!(f, "{}", coeff.display(self.vars))?;
            } else if coeff == Poly::one() {
                write!(f, "{blade}")?;
            } else if single {
                let (m, r) = coeff.terms().next().unwrap();
                if m.is_one() {
                    fmt_rat(r, f)?;
                } else if is_unit(r) {
                    write!(f, "{}", coeff.display(self.vars))?;
                } else {
                    write!(f, "{}", coeff.display(self.vars))?;
                }
                write!(f, " * {blade}")?;
            } else {
                write!(f, "({}) * {blade}", coeff.display(self.vars))?;
            }
        }
        Ok(())
    }
}

/// Parses the printer's syntax: sums of products of polynomial factors and
/// wedge monomials of frame names, e.g. `(x1 + 1) * dx1^dx2 - 3 * dx2`.
pub fn parse_form(text: &str, frame: &[String], vars: &VarTable) -> Result<EForm, ParseError> {
    let mut p = Parser::new(text, vars)?;
    let out = form_sum(&mut p, frame)?;
    p.expect_end()?;
    Ok(out)
}

fn form_sum(p: &mut Parser<'_>, frame: &[String]) -> Result<EForm, ParseError> {
    let mut acc = form_term(p, frame)?;
    loop {
        match p.peek() {
            Token::Plus => {
                p.bump();
                acc = acc.add(&form_term(p, frame)?);
            }
            Token::Minus => {
                p.bump();
                acc = acc.sub(&form_term(p, frame)?);
            }
            _ => return Ok(acc),
        }
    }
}

fn form_term(p: &mut Parser<'_>, frame: &[String]) -> Result<EForm, ParseError> {
    let mut acc = form_unary(p, frame)?;
    loop {
        match p.peek() {
            Token::Star => {
                p.bump();
                acc = acc.wedge(&form_unary(p, frame)?);
            }
            Token::Slash => {
                p.bump();
                let at = p.offset();
                let d = form_unary(p, frame)?;
                let c = (d.max_degree() == 0)
                    .then(|| d.coeff(Blade::ONE).constant_value())
                    .flatten()
                    .filter(|c| !num_traits::Zero::is_zero(c))
                    .ok_or_else(|| ParseError::syntax(at, "division by a non-constant"))?;
                acc = acc.scale(&num_traits::Inv::inv(c));
            }
            _ => return Ok(acc),
        }
    }
}

fn form_unary(p: &mut Parser<'_>, frame: &[String]) -> Result<EForm, ParseError> {
    match p.peek() {
        Token::Minus => {
            p.bump();
            Ok(form_unary(p, frame)?.neg())
        }
        Token::Plus => {
            p.bump();
            form_unary(p, frame)
        }
        _ => form_atom(p, frame),
    }
}

fn frame_index(frame: &[String], tok: &Token) -> Option<usize> {
    match tok {
        Token::Ident(n) => frame.iter().position(|f| f == n),
        _ => None,
    }
}

fn form_atom(p: &mut Parser<'_>, frame: &[String]) -> Result<EForm, ParseError> {
    let r = frame.len();
    if let Some(i) = frame_index(frame, p.peek()) {
        p.bump();
        let mut acc = EForm::generator(r, i);
        while *p.peek() == Token::Caret {
            let at = p.offset();
            p.bump();
            let Some(j) = frame_index(frame, p.peek()) else {
                return Err(ParseError::syntax(at, "expected a frame name after `^`"));
            };
            p.bump();
            acc = acc.wedge(&EForm::generator(r, j));
        }
        return Ok(acc);
    }
    match p.peek() {
        Token::LParen => {
            p.bump();
            let inner = form_sum(p, frame)?;
            p.expect(Token::RParen, "`)`")?;
            if *p.peek() == Token::Caret {
                if inner.max_degree() > 0 {
                    return Err(ParseError::syntax(p.offset(), "power of a form"));
                }
                p.bump();
                let e = p.exponent()?;
                return Ok(EForm::scalar(r, inner.coeff(Blade::ONE).pow(e)));
            }
            Ok(inner)
        }
        Token::Number(c) => {
            let c = c.clone();
            p.bump();
            Ok(EForm::scalar(r, Poly::constant(c)))
        }
        Token::Ident(name) => {
            let at = p.offset();
            let Some(id) = p.vars().lookup(name) else {
                return Err(ParseError::UndeclaredVariable {
                    name: name.clone(),
                    offset: at,
                });
            };
            p.bump();
            let mut f = Poly::var(id);
            if *p.peek() == Token::Caret {
                p.bump();
                f = f.pow(p.exponent()?);
            }
            Ok(EForm::scalar(r, f))
        }
        _ => Err(ParseError::syntax(p.offset(), "expected a factor")),
    }
}
