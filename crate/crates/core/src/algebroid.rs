//! Lie algebroids given by local data over a single polynomial chart.

use std::collections::HashSet;
use std::fmt;

use crate::eform::{d_function, e_differential, EForm};
use crate::symexpr::{Poly, Rat, VarId, VarTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlgebroidError {
    #[error("matrix is not antisymmetric at ({0}, {1})")]
    NotAntisymmetric(usize, usize),
    #[error("name `{0}` is used by both algebroids")]
    NameClash(String),
    #[error("B * B_inv is not the identity")]
    InvalidInverse,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("`{0}` depends on a variable outside the base coordinates")]
    ForeignVariable(String),
    #[error("unknown frame name `{0}`")]
    UnknownFrame(String),
    #[error("structure entry with repeated lower index `{0}`")]
    RepeatedLower(String),
    #[error("an algebroid needs rank at least 1")]
    ZeroRank,
}

/// Components `s^I` of a section in the algebroid frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Section {
    pub components: Vec<Poly>,
}

impl Section {
    pub fn new(components: Vec<Poly>) -> Self {
        Section { components }
    }

    pub fn zero(rank: usize) -> Self {
        Section::new(vec![Poly::zero(); rank])
    }

    /// The frame element `e_i`.
    pub fn basis(rank: usize, i: usize) -> Self {
        let mut s = Section::zero(rank);
        s.components[i] = Poly::one();
        s
    }

    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Poly::is_zero)
    }

    pub fn add(&self, other: &Section) -> Section {
        Section::new(zip_with(&self.components, &other.components, |a, b| a + b))
    }

    pub fn sub(&self, other: &Section) -> Section {
        Section::new(zip_with(&self.components, &other.components, |a, b| a - b))
    }

    pub fn mul_poly(&self, f: &Poly) -> Section {
        Section::new(self.components.iter().map(|c| c * f).collect())
    }
}

fn zip_with(a: &[Poly], b: &[Poly], op: impl Fn(&Poly, &Poly) -> Poly) -> Vec<Poly> {
    assert_eq!(a.len(), b.len(), "section ranks differ");
    a.iter().zip(b).map(|(x, y)| op(x, y)).collect()
}

/// `B^I_J` with its polynomial inverse; the new coframe satisfies
/// `b^I = B^I_J b̃^J`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameChange {
    b: Vec<Vec<Poly>>,
    b_inv: Vec<Vec<Poly>>,
}

pub(crate) fn mat_mul(a: &[Vec<Poly>], b: &[Vec<Poly>]) -> Vec<Vec<Poly>> {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..b.len()).map(|k| &a[i][k] * &b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub(crate) fn is_identity(m: &[Vec<Poly>]) -> bool {
    m.iter().enumerate().all(|(i, row)| {
        row.iter()
            .enumerate()
            .all(|(j, e)| if i == j { *e == Poly::one() } else { e.is_zero() })
    })
}

impl FrameChange {
    pub fn new(b: Vec<Vec<Poly>>, b_inv: Vec<Vec<Poly>>) -> Result<Self, AlgebroidError> {
        let r = b.len();
        let square = |m: &Vec<Vec<Poly>>| m.len() == r && m.iter().all(|row| row.len() == r);
        if !square(&b) || !square(&b_inv) {
            return Err(AlgebroidError::Shape("frame change must be square".into()));
        }
        if !is_identity(&mat_mul(&b, &b_inv)) || !is_identity(&mat_mul(&b_inv, &b)) {
            return Err(AlgebroidError::InvalidInverse);
        }
        Ok(FrameChange { b, b_inv })
    }

    pub fn identity(r: usize) -> Self {
        let id: Vec<Vec<Poly>> = (0..r)
            .map(|i| {
                (0..r)
                    .map(|j| if i == j { Poly::one() } else { Poly::zero() })
                    .collect()
            })
            .collect();
        FrameChange {
            b: id.clone(),
            b_inv: id,
        }
    }

    pub fn rank(&self) -> usize {
        self.b.len()
    }

    /// `B^I_J` (row `I`, column `J`).
    pub fn b(&self, i: usize, j: usize) -> &Poly {
        &self.b[i][j]
    }

    pub fn b_inv(&self, i: usize, j: usize) -> &Poly {
        &self.b_inv[i][j]
    }

    pub fn matrix(&self) -> &[Vec<Poly>] {
        &self.b
    }

    pub fn inverse(&self) -> FrameChange {
        FrameChange {
            b: self.b_inv.clone(),
            b_inv: self.b.clone(),
        }
    }
}

/// Local data of a Lie algebroid: anchor `ρ^i_I` and structure functions
/// `C^I_JK`, the latter kept only for `J < K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Algebroid {
    base: Vec<VarId>,
    frame: Vec<String>,
    anchor: Vec<Vec<Poly>>,
    structure: Vec<Vec<Poly>>,
}

fn pair_index(r: usize, j: usize, k: usize) -> usize {
    debug_assert!(j < k && k < r);
    j * r - j * (j + 1) / 2 + (k - j - 1)
}

/// One structure-function entry `C^upper_{lower.0 lower.1}`.
#[derive(Debug, Clone)]
pub struct StructureEntry {
    pub upper: usize,
    pub lower: (usize, usize),
    pub coeff: Poly,
}

impl Algebroid {
    pub fn new(
        base: Vec<VarId>,
        frame: Vec<String>,
        anchor: Vec<Vec<Poly>>,
        entries: impl IntoIterator<Item = StructureEntry>,
    ) -> Result<Self, AlgebroidError> {
        let r = frame.len();
        let n = base.len();
        if r == 0 {
            return Err(AlgebroidError::ZeroRank);
        }
        if r > 64 {
            return Err(AlgebroidError::Shape("rank above 64".into()));
        }
        let mut seen = HashSet::new();
        for f in &frame {
            if !seen.insert(f) {
                return Err(AlgebroidError::NameClash(f.clone()));
            }
        }
        if anchor.len() != r || anchor.iter().any(|row| row.len() != n) {
            return Err(AlgebroidError::Shape(format!("anchor must be {r}x{n}")));
        }
        let mut alg = Algebroid {
            base,
            frame,
            anchor,
            structure: vec![vec![Poly::zero(); r * (r.saturating_sub(1)) / 2]; r],
        };
        for e in entries {
            let (j, k) = e.lower;
            if e.upper >= r || j >= r || k >= r {
                return Err(AlgebroidError::Shape("structure index out of range".into()));
            }
            if j == k {
                if e.coeff.is_zero() {
                    continue;
                }
                return Err(AlgebroidError::RepeatedLower(alg.frame[j].clone()));
            }
            let slot = &mut alg.structure[e.upper][pair_index(r, j.min(k), j.max(k))];
            if j < k {
                *slot += &e.coeff;
            } else {
                *slot -= &e.coeff;
            }
        }
        let allowed: std::collections::BTreeSet<VarId> = alg.base.iter().copied().collect();
        for (i, row) in alg.anchor.iter().enumerate() {
            if row.iter().any(|p| !p.vars().is_subset(&allowed)) {
                return Err(AlgebroidError::ForeignVariable(format!("anchor row {}", i + 1)));
            }
        }
        for (i, row) in alg.structure.iter().enumerate() {
            if row.iter().any(|p| !p.vars().is_subset(&allowed)) {
                return Err(AlgebroidError::ForeignVariable(format!(
                    "structure functions C^{}",
                    alg.frame[i]
                )));
            }
        }
        Ok(alg)
    }

    pub fn rank(&self) -> usize {
        self.frame.len()
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[VarId] {
        &self.base
    }

    pub fn frame(&self) -> &[String] {
        &self.frame
    }

    pub fn frame_index(&self, name: &str) -> Result<usize, AlgebroidError> {
        self.frame
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| AlgebroidError::UnknownFrame(name.to_string()))
    }

    /// `ρ^i_I` for frame index `big_i` and base index `i`.
    pub fn anchor(&self, big_i: usize, i: usize) -> &Poly {
        &self.anchor[big_i][i]
    }

    /// `C^upper_{jk}` with antisymmetry applied.
    pub fn structure(&self, upper: usize, j: usize, k: usize) -> Poly {
        let r = self.rank();
        match j.cmp(&k) {
            std::cmp::Ordering::Less => self.structure[upper][pair_index(r, j, k)].clone(),
            std::cmp::Ordering::Greater => -&self.structure[upper][pair_index(r, k, j)],
            std::cmp::Ordering::Equal => Poly::zero(),
        }
    }

    /// All nonzero entries with `J < K`.
    pub fn structure_entries(&self) -> Vec<StructureEntry> {
        let r = self.rank();
        let mut out = Vec::new();
        for upper in 0..r {
            for j in 0..r {
                for k in j + 1..r {
                    let c = &self.structure[upper][pair_index(r, j, k)];
                    if !c.is_zero() {
                        out.push(StructureEntry {
                            upper,
                            lower: (j, k),
                            coeff: c.clone(),
                        });
                    }
                }
            }
        }
        out
    }

    /// `ρ_I(f) = ρ^i_I ∂_i f`.
    pub fn anchor_apply(&self, big_i: usize, f: &Poly) -> Poly {
        self.base
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let a = &self.anchor[big_i][i];
                if a.is_zero() {
                    Poly::zero()
                } else {
                    a * &f.differentiate(x)
                }
            })
            .sum()
    }

    /// `ρ(s)(f)`.
    pub fn anchor_section(&self, s: &Section, f: &Poly) -> Poly {
        (0..self.rank())
            .filter(|&i| !s.components[i].is_zero())
            .map(|i| &s.components[i] * &self.anchor_apply(i, f))
            .sum()
    }

    pub fn is_flat(&self) -> bool {
        self.structure.iter().flatten().all(Poly::is_zero)
    }
}

/// Which axiom a witness violates. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// `ρ^j_I ρ^i_{J,j} − ρ^j_J ρ^i_{I,j} − ρ^i_K C^K_IJ` at `(I, J, i)`.
    AnchorCompat { pair: (usize, usize), coord: usize, value: Poly },
    /// Cyclic Jacobi sum at `(I, J, K)` and upper index `L`.
    Jacobi { triple: (usize, usize, usize), upper: usize, value: Poly },
}

impl Witness {
    pub fn value(&self) -> &Poly {
        match self {
            Witness::AnchorCompat { value, .. } | Witness::Jacobi { value, .. } => value,
        }
    }

    pub fn display<'a>(&'a self, alg: &'a Algebroid, vars: &'a VarTable) -> impl fmt::Display + 'a {
        WitnessDisplay { w: self, alg, vars }
    }
}

struct WitnessDisplay<'a> {
    w: &'a Witness,
    alg: &'a Algebroid,
    vars: &'a VarTable,
}

impl fmt::Display for WitnessDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.w {
            Witness::AnchorCompat { pair, coord, value } => write!(
                f,
                "anchor ({},{}) along {}: {}",
                pair.0 + 1,
                pair.1 + 1,
                self.vars.name(self.alg.base[*coord]),
                value.display(self.vars)
            ),
            Witness::Jacobi {
                triple,
                upper,
                value,
            } => write!(
                f,
                "jacobi ({},{},{}) upper {}: {}",
                triple.0 + 1,
                triple.1 + 1,
                triple.2 + 1,
                upper + 1,
                value.display(self.vars)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxiomReport {
    pub anchor_compat: bool,
    pub jacobi: bool,
    /// `^Ed ^Ed X^i = 0` for all `i`.
    pub dd_coords: bool,
    /// `^Ed ^Ed b^I = 0` for all `I`.
    pub dd_frame: bool,
    pub witnesses: Vec<Witness>,
}

impl AxiomReport {
    pub fn pass(&self) -> bool {
        self.anchor_compat && self.jacobi
    }

    /// The coordinate formulas and the `^Ed² = 0` route give the same verdicts.
    pub fn routes_agree(&self) -> bool {
        self.anchor_compat == self.dd_coords && self.jacobi == self.dd_frame
    }
}

pub fn verify_axioms(e: &Algebroid) -> AxiomReport {
    let r = e.rank();
    let n = e.dim();
    let mut witnesses = Vec::new();

    let mut anchor_compat = true;
    for bi in 0..r {
        for bj in bi + 1..r {
            for i in 0..n {
                let mut v = e.anchor_apply(bi, e.anchor(bj, i)) - e.anchor_apply(bj, e.anchor(bi, i));
                for k in 0..r {
                    v -= e.anchor(k, i) * &e.structure(k, bi, bj);
                }
                if !v.is_zero() {
                    anchor_compat = false;
                    witnesses.push(Witness::AnchorCompat {
                        pair: (bi, bj),
                        coord: i,
                        value: v,
                    });
                }
            }
        }
    }

    let mut jacobi = true;
    for a in 0..r {
        for b in a + 1..r {
            for c in b + 1..r {
                for l in 0..r {
                    let mut v = Poly::zero();
                    for (i, j, k) in [(a, b, c), (b, c, a), (c, a, b)] {
                        v += e.anchor_apply(i, &e.structure(l, j, k));
                        for m in 0..r {
                            v += &e.structure(l, i, m) * &e.structure(m, j, k);
                        }
                    }
                    if !v.is_zero() {
                        jacobi = false;
                        witnesses.push(Witness::Jacobi {
                            triple: (a, b, c),
                            upper: l,
                            value: v,
                        });
                    }
                }
            }
        }
    }

    let dd_coords = e.base.iter().all(|&x| {
        let dx = d_function(e, &Poly::var(x));
        e_differential(e, &dx).unwrap().is_zero()
    });
    let dd_frame = (0..r).all(|i| {
        let db = e_differential(e, &EForm::generator(r, i)).unwrap();
        e_differential(e, &db).unwrap().is_zero()
    });

    AxiomReport {
        anchor_compat,
        jacobi,
        dd_coords,
        dd_frame,
        witnesses,
    }
}

/// Antisymmetric matrix of polynomials.
pub fn check_antisymmetric(p: &[Vec<Poly>]) -> Result<(), AlgebroidError> {
    let n = p.len();
    if p.iter().any(|row| row.len() != n) {
        return Err(AlgebroidError::Shape("matrix must be square".into()));
    }
    for i in 0..n {
        for j in i..n {
            if p[i][j] != -&p[j][i] {
                return Err(AlgebroidError::NotAntisymmetric(i, j));
            }
        }
    }
    Ok(())
}

/// A Lie algebra as an algebroid over a point.
pub fn lie_algebra(
    frame: Vec<String>,
    entries: impl IntoIterator<Item = StructureEntry>,
) -> Result<Algebroid, AlgebroidError> {
    let r = frame.len();
    let entries: Vec<StructureEntry> = entries.into_iter().collect();
    if entries.iter().any(|e| !e.coeff.is_constant()) {
        return Err(AlgebroidError::ForeignVariable("structure constants".into()));
    }
    Algebroid::new(Vec::new(), frame, vec![Vec::new(); r], entries)
}

/// `TM` in the coordinate frame; frame names are `d` + coordinate name.
pub fn tangent_bundle(base: Vec<VarId>, vars: &VarTable) -> Result<Algebroid, AlgebroidError> {
    let n = base.len();
    let frame = base.iter().map(|&x| format!("d{}", vars.name(x))).collect();
    let anchor = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Poly::one() } else { Poly::zero() })
                .collect()
        })
        .collect();
    Algebroid::new(base, frame, anchor, [])
}

/// `T*M` of a Poisson bivector: frame `b_i ~ dX^i` (named `d` + coordinate),
/// `ρ^j_i = P^{ij}`, `C^i_{jk} = ∂_i P^{jk}`.
pub fn poisson_cotangent(
    base: Vec<VarId>,
    p: &[Vec<Poly>],
    vars: &VarTable,
) -> Result<Algebroid, AlgebroidError> {
    check_antisymmetric(p)?;
    let n = base.len();
    if p.len() != n {
        return Err(AlgebroidError::Shape(format!("Poisson matrix must be {n}x{n}")));
    }
    let frame = base.iter().map(|&x| format!("d{}", vars.name(x))).collect();
    let anchor = (0..n).map(|i| (0..n).map(|j| p[i][j].clone()).collect()).collect();
    let mut entries = Vec::new();
    for (i, &xi) in base.iter().enumerate() {
        for j in 0..n {
            for k in j + 1..n {
                entries.push(StructureEntry {
                    upper: i,
                    lower: (j, k),
                    coeff: p[j][k].differentiate(xi),
                });
            }
        }
    }
    Algebroid::new(base, frame, anchor, entries)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoissonReport {
    pub holds: bool,
    /// `(i, j, k)` with `i < j < k` (0-based) and the nonzero cyclic sum.
    pub witnesses: Vec<((usize, usize, usize), Poly)>,
}

/// Cyclic sums `P^{is}∂_s P^{jk} + P^{js}∂_s P^{ki} + P^{ks}∂_s P^{ij}`.
pub fn jacobi_poisson(base: &[VarId], p: &[Vec<Poly>]) -> Result<PoissonReport, AlgebroidError> {
    check_antisymmetric(p)?;
    let n = base.len();
    if p.len() != n {
        return Err(AlgebroidError::Shape(format!("Poisson matrix must be {n}x{n}")));
    }
    let mut witnesses = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let mut v = Poly::zero();
                for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                    for (s, &xs) in base.iter().enumerate() {
                        if !p[a][s].is_zero() {
                            v += &p[a][s] * &p[b][c].differentiate(xs);
                        }
                    }
                }
                if !v.is_zero() {
                    witnesses.push(((i, j, k), v));
                }
            }
        }
    }
    Ok(PoissonReport {
        holds: witnesses.is_empty(),
        witnesses,
    })
}

/// `E1 ⊞ E2` over the product base; E1 indices come first.
pub fn exterior_sum(e1: &Algebroid, e2: &Algebroid) -> Result<Algebroid, AlgebroidError> {
    if let Some(&x) = e1.base.iter().find(|x| e2.base.contains(x)) {
        return Err(AlgebroidError::NameClash(format!("variable #{}", x.0)));
    }
    if let Some(f) = e1.frame.iter().find(|f| e2.frame.contains(f)) {
        return Err(AlgebroidError::NameClash(f.clone()));
    }
    let (n1, r1) = (e1.dim(), e1.rank());
    let n2 = e2.dim();
    let base: Vec<VarId> = e1.base.iter().chain(&e2.base).copied().collect();
    let frame: Vec<String> = e1.frame.iter().chain(&e2.frame).cloned().collect();
    let mut anchor = Vec::new();
    for row in &e1.anchor {
        let mut r = row.clone();
        r.resize(n1 + n2, Poly::zero());
        anchor.push(r);
    }
    for row in &e2.anchor {
        let mut r = vec![Poly::zero(); n1];
        r.extend(row.iter().cloned());
        anchor.push(r);
    }
    let entries = e1.structure_entries().into_iter().chain(
        e2.structure_entries().into_iter().map(|e| StructureEntry {
            upper: e.upper + r1,
            lower: (e.lower.0 + r1, e.lower.1 + r1),
            coeff: e.coeff,
        }),
    );
    Algebroid::new(base, frame, anchor, entries)
}

/// Rewrites `E` in the frame with `b^I = B^I_J b̃^J`.
pub fn change_frame(e: &Algebroid, f: &FrameChange) -> Result<Algebroid, AlgebroidError> {
    let r = e.rank();
    if f.rank() != r {
        return Err(AlgebroidError::Shape(format!(
            "frame change of rank {} on an algebroid of rank {r}",
            f.rank()
        )));
    }
    let allowed: std::collections::BTreeSet<VarId> = e.base.iter().copied().collect();
    for row in f.b.iter().chain(&f.b_inv) {
        if row.iter().any(|p| !p.vars().is_subset(&allowed)) {
            return Err(AlgebroidError::ForeignVariable("frame change".into()));
        }
    }
    let n = e.dim();
    let anchor: Vec<Vec<Poly>> = (0..r)
        .map(|j| {
            (0..n)
                .map(|i| (0..r).map(|bi| f.b(bi, j) * e.anchor(bi, i)).sum())
                .collect()
        })
        .collect();
    // ρ_I(B^M_K), reused below.
    let rho_b: Vec<Vec<Vec<Poly>>> = (0..r)
        .map(|bi| {
            (0..r)
                .map(|m| (0..r).map(|k| e.anchor_apply(bi, f.b(m, k))).collect())
                .collect()
        })
        .collect();
    let mut entries = Vec::new();
    for j in 0..r {
        for k in j + 1..r {
            // Bracket of the new frame elements in old components.
            let old: Vec<Poly> = (0..r)
                .map(|m| {
                    let mut v = Poly::zero();
                    for i in 0..r {
                        for l in 0..r {
                            let c = e.structure(m, i, l);
                            if !c.is_zero() {
                                v += &(&(f.b(i, j) * f.b(l, k)) * &c);
                            }
                        }
                        v += f.b(i, j) * &rho_b[i][m][k];
                        v -= f.b(i, k) * &rho_b[i][m][j];
                    }
                    v
                })
                .collect();
            for nn in 0..r {
                let c: Poly = (0..r).map(|m| f.b_inv(nn, m) * &old[m]).sum();
                entries.push(StructureEntry {
                    upper: nn,
                    lower: (j, k),
                    coeff: c,
                });
            }
        }
    }
    Algebroid::new(e.base.clone(), e.frame.clone(), anchor, entries)
}

/// `[s,s']^K = s^I s'^J C^K_IJ + ρ(s)(s'^K) − ρ(s')(s^K)`.
pub fn section_bracket(e: &Algebroid, s: &Section, t: &Section) -> Section {
    let r = e.rank();
    let comps = (0..r)
        .map(|k| {
            let mut v = e.anchor_section(s, &t.components[k]) - e.anchor_section(t, &s.components[k]);
            for i in 0..r {
                if s.components[i].is_zero() {
                    continue;
                }
                for j in 0..r {
                    if t.components[j].is_zero() {
                        continue;
                    }
                    let c = e.structure(k, i, j);
                    if !c.is_zero() {
                        v += &(&(&s.components[i] * &t.components[j]) * &c);
                    }
                }
            }
            v
        })
        .collect();
    Section::new(comps)
}

/// Computes `[s,s']` as `ι_s L_{s'} b^K − L_{s'} ι_s b^K`.
pub fn section_bracket_via_forms(e: &Algebroid, s: &Section, t: &Section) -> Section {
    let r = e.rank();
    let comps = (0..r)
        .map(|k| {
            let bk = EForm::generator(r, k);
            let lie = crate::eform::lie_derivative(e, &bk, t).unwrap();
            let a = lie.interior(s).coeff(crate::eform::Blade::ONE);
            let b = e.anchor_section(t, &s.components[k]);
            a - b
        })
        .collect();
    Section::new(comps)
}

/// Integer structure constants helper: `C^u_{jk} = c` (0-based).
pub fn entry(upper: usize, j: usize, k: usize, c: Rat) -> StructureEntry {
    StructureEntry {
        upper,
        lower: (j, k),
        coeff: Poly::constant(c),
    }
}
