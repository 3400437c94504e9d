//! Gauge transformations of bundle maps and their commutators.

use std::collections::BTreeSet;

use crate::algebroid::{change_frame, check_antisymmetric, Algebroid, AlgebroidError, FrameChange, Section};
use crate::eform::{d_function, EForm};
use crate::fieldcalc::{Expr, FieldError, FieldSpace, IdentityReport, SlotKind, VariationSpec};
use crate::morphism::BundleMap;
use crate::symexpr::{Poly, VarId};

pub use crate::morphism::Connection;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GaugeError {
    #[error("the source part of the parameter depends on target coordinates")]
    NotProjectable,
    #[error("this transformation needs a vertical parameter (no source part)")]
    NotVertical,
    #[error("the source algebroid is not a tangent bundle in its coordinate frame")]
    WrongSourceAlgebroid,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Algebroid(#[from] AlgebroidError),
}

/// A projectable parameter `ε = ε1 + ε2`: `ε1` a section of the source
/// (functions of `x`), `ε2^I` functions of `(x, X)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaugeParam {
    pub eps1: Vec<Poly>,
    pub eps2: Vec<Poly>,
}

impl GaugeParam {
    pub fn new(space: &FieldSpace, eps1: Vec<Poly>, eps2: Vec<Poly>) -> Result<Self, GaugeError> {
        if eps1.len() != space.source.rank() || eps2.len() != space.target.rank() {
            return Err(GaugeError::Shape("parameter component counts".into()));
        }
        let x: BTreeSet<VarId> = space.source.base().iter().copied().collect();
        if eps1.iter().any(|p| !p.vars().is_subset(&x)) {
            return Err(GaugeError::NotProjectable);
        }
        Ok(GaugeParam { eps1, eps2 })
    }

    pub fn vertical(space: &FieldSpace, eps2: Vec<Poly>) -> Result<Self, GaugeError> {
        GaugeParam::new(space, vec![Poly::zero(); space.source.rank()], eps2)
    }

    pub fn exprs(&self) -> ParamExprs {
        ParamExprs {
            eps1: self.eps1.iter().cloned().map(Expr::func).collect(),
            eps2: self.eps2.iter().cloned().map(Expr::func).collect(),
        }
    }
}

/// Parameter components as field expressions (concrete or slot-valued).
#[derive(Debug, Clone)]
pub struct ParamExprs {
    pub eps1: Vec<Expr>,
    pub eps2: Vec<Expr>,
}

impl ParamExprs {
    /// Fresh parameter slots starting at `first`; `vertical` leaves `ε1 = 0`.
    pub fn slots(space: &FieldSpace, first: usize, vertical: bool) -> (ParamExprs, Vec<SlotKind>) {
        let mut kinds = Vec::new();
        let mut next = first;
        let mut fresh = |kind| {
            kinds.push(kind);
            next += 1;
            Expr::param(next - 1)
        };
        let eps1 = (0..space.source.rank())
            .map(|_| if vertical { Expr::zero() } else { fresh(SlotKind::Source) })
            .collect();
        let eps2 = (0..space.target.rank()).map(|_| fresh(SlotKind::Mixed)).collect();
        (ParamExprs { eps1, eps2 }, kinds)
    }

    pub fn is_vertical(&self) -> bool {
        self.eps1.iter().all(Expr::is_zero_node)
    }
}

/// `δ⁰X^i = ρ^i_I ε^I`, `δ⁰A^I = d1 ε^I + C^I_JK A^J ε^K` for a target
/// written in some frame, with connection expressions `a`.
pub fn delta0_with(target: &Algebroid, a: &[Expr], eps: &[Expr]) -> (Vec<Expr>, Vec<Expr>) {
    let r = target.rank();
    let dx = (0..target.dim())
        .map(|i| Expr::sum((0..r).map(|big| Expr::func(target.anchor(big, i).clone()).wedge(&eps[big]))))
        .collect();
    let da = (0..r)
        .map(|upper| {
            let mut terms = vec![eps[upper].d1()];
            for j in 0..r {
                for k in 0..r {
                    let c = target.structure(upper, j, k);
                    if !c.is_zero() {
                        terms.push(Expr::func(c).wedge(&a[j]).wedge(&eps[k]));
                    }
                }
            }
            Expr::sum(terms)
        })
        .collect();
    (dx, da)
}

pub fn delta0(space: &FieldSpace, eps: &ParamExprs) -> Result<VariationSpec, GaugeError> {
    if !eps.is_vertical() {
        return Err(GaugeError::NotVertical);
    }
    let (dx, da) = delta0_with(&space.target, &space.a_fields(), &eps.eps2);
    Ok(space.spec(dx, da))
}

/// The covariant transformation:
/// `δX^i = ρ^i_I ε2^I − ι_{ε1} d1 X^i`,
/// `δA^I = δ⁰_{ε2} A^I − ε2^I_{,i} F^i − (d1 ι_{ε1} + ι_{ε1} d1) A^I`.
pub fn delta_cov_with(
    space: &FieldSpace,
    target: &Algebroid,
    a: &[Expr],
    eps: &ParamExprs,
) -> Result<(Vec<Expr>, Vec<Expr>), GaugeError> {
    let (mut dx, mut da) = delta0_with(target, a, &eps.eps2);
    let f = space.f_base_with(target, a);
    for (i, d) in dx.iter_mut().enumerate() {
        *d = d.sub(&space.x(i).d1().contract(&eps.eps1));
    }
    for (upper, d) in da.iter_mut().enumerate() {
        let mut terms = vec![d.clone()];
        for (i, &xi) in target.base().iter().enumerate() {
            let de = eps.eps2[upper].partial(xi)?;
            terms.push(de.wedge(&f[i]).neg());
        }
        let lie = a[upper].contract(&eps.eps1).d1().add(&a[upper].d1().contract(&eps.eps1));
        terms.push(lie.neg());
        *d = Expr::sum(terms);
    }
    Ok((dx, da))
}

pub fn delta_cov(space: &FieldSpace, eps: &ParamExprs) -> Result<VariationSpec, GaugeError> {
    let (dx, da) = delta_cov_with(space, &space.target, &space.a_fields(), eps)?;
    Ok(space.spec(dx, da))
}

/// `δ^(Γ)A^I = δ⁰A^I + Γ^I_{iJ} F^i ε^J`.
pub fn delta_conn(space: &FieldSpace, eps: &ParamExprs, gamma: &Connection) -> Result<VariationSpec, GaugeError> {
    let mut v = delta0(space, eps)?;
    let f = space.f_base();
    let (r, n) = (space.target.rank(), space.target.dim());
    for upper in 0..r {
        let mut terms = vec![v.delta_a[upper].clone()];
        for (i, fi) in f.iter().enumerate().take(n) {
            for j in 0..r {
                let g = gamma.get(upper, i, j);
                if !g.is_zero() {
                    terms.push(Expr::func(g.clone()).wedge(fi).wedge(&eps.eps2[j]));
                }
            }
        }
        v.delta_a[upper] = Expr::sum(terms);
    }
    Ok(v)
}

/// Bracket of projectable parameters in the exterior sum.
pub fn e_bracket(space: &FieldSpace, e: &ParamExprs, f: &ParamExprs) -> Result<ParamExprs, GaugeError> {
    let s = &space.source;
    let t = &space.target;
    let mut eps1 = Vec::new();
    for g in 0..s.rank() {
        let mut terms = vec![space.rho1(&e.eps1, &f.eps1[g])?, space.rho1(&f.eps1, &e.eps1[g])?.neg()];
        for a in 0..s.rank() {
            for b in 0..s.rank() {
                let c = s.structure(g, a, b);
                if !c.is_zero() {
                    terms.push(Expr::func(c).wedge(&e.eps1[a]).wedge(&f.eps1[b]));
                }
            }
        }
        eps1.push(Expr::sum(terms));
    }
    let mut eps2 = Vec::new();
    for upper in 0..t.rank() {
        let mut terms = vec![
            space.rho1(&e.eps1, &f.eps2[upper])?,
            space.rho2(&e.eps2, &f.eps2[upper])?,
            space.rho1(&f.eps1, &e.eps2[upper])?.neg(),
            space.rho2(&f.eps2, &e.eps2[upper])?.neg(),
        ];
        for j in 0..t.rank() {
            for k in 0..t.rank() {
                let c = t.structure(upper, j, k);
                if !c.is_zero() {
                    terms.push(Expr::func(c).wedge(&e.eps2[j]).wedge(&f.eps2[k]));
                }
            }
        }
        eps2.push(Expr::sum(terms));
    }
    Ok(ParamExprs { eps1, eps2 })
}

#[derive(Debug, Clone)]
pub enum GaugeKind {
    Naive,
    Covariant,
    Connection(Connection),
}

fn variation(space: &FieldSpace, kind: &GaugeKind, eps: &ParamExprs) -> Result<VariationSpec, GaugeError> {
    match kind {
        GaugeKind::Naive => delta0(space, eps),
        GaugeKind::Covariant => delta_cov(space, eps),
        GaugeKind::Connection(g) => delta_conn(space, eps, g),
    }
}

/// `[δ_ε, δ_ε'] g − δ_{[ε,ε']} g` on every generator `X^i`, `A^I`, where
/// `[δ_ε, δ_ε'] g = δ_ε(δ_ε' g) − δ_ε'(δ_ε g)`.
pub fn commutator_defects(
    space: &FieldSpace,
    kind: &GaugeKind,
    e: &ParamExprs,
    f: &ParamExprs,
) -> Result<Vec<(String, Expr)>, GaugeError> {
    let ve = variation(space, kind, e)?;
    let vf = variation(space, kind, f)?;
    let vb = variation(space, kind, &e_bracket(space, e, f)?)?;
    let gens = space
        .x_fields()
        .into_iter()
        .enumerate()
        .map(|(i, g)| (format!("X{}", i + 1), g))
        .chain(space.a_fields().into_iter().enumerate().map(|(i, g)| (format!("A{}", i + 1), g)));
    Ok(gens
        .map(|(name, g)| {
            let ef = space.vary(&space.vary(&g, &vf), &ve);
            let fe = space.vary(&space.vary(&g, &ve), &vf);
            (name, ef.sub(&fe).sub(&space.vary(&g, &vb)))
        })
        .collect())
}

/// `−C^I_{JK,i} F^i ε^J ε'^K` on `A^I`, zero on `X^i`.
pub fn corollary_defect(space: &FieldSpace, e: &ParamExprs, f: &ParamExprs) -> Vec<Expr> {
    let t = &space.target;
    let fb = space.f_base();
    let mut out: Vec<Expr> = vec![Expr::zero(); t.dim()];
    for upper in 0..t.rank() {
        let mut terms = Vec::new();
        for j in 0..t.rank() {
            for k in 0..t.rank() {
                let c = t.structure(upper, j, k);
                for (i, &xi) in t.base().iter().enumerate() {
                    let dc = c.differentiate(xi);
                    if !dc.is_zero() {
                        terms.push(Expr::func(-dc).wedge(&fb[i]).wedge(&e.eps2[j]).wedge(&f.eps2[k]));
                    }
                }
            }
        }
        out.push(Expr::sum(terms));
    }
    out
}

#[derive(Debug, Clone)]
pub struct ClosureReport {
    pub kind: &'static str,
    /// Commutator defect minus the predicted defect.
    pub identity: IdentityReport,
}

/// Runs the closure identity with random parameters from fresh slots:
/// the covariant defect must vanish, the naive one must equal the
/// corollary defect. Connection-based transformations are compared to
/// zero.
pub fn closure_check(
    space: &FieldSpace,
    kind: &GaugeKind,
    vertical: bool,
    trials: usize,
    degree: u32,
    seed: u64,
) -> Result<ClosureReport, GaugeError> {
    run_closure(space, kind, vertical, true, trials, degree, seed)
}

/// The commutator defect compared to zero for every kind, so the naive
/// transformation passes only when the corollary defect vanishes.
pub fn exact_closure_check(
    space: &FieldSpace,
    kind: &GaugeKind,
    vertical: bool,
    trials: usize,
    degree: u32,
    seed: u64,
) -> Result<ClosureReport, GaugeError> {
    run_closure(space, kind, vertical, false, trials, degree, seed)
}

fn run_closure(
    space: &FieldSpace,
    kind: &GaugeKind,
    vertical: bool,
    predicted: bool,
    trials: usize,
    degree: u32,
    seed: u64,
) -> Result<ClosureReport, GaugeError> {
    let vertical = vertical || !matches!(kind, GaugeKind::Covariant);
    let (e, mut slots) = ParamExprs::slots(space, 0, vertical);
    let (f, more) = ParamExprs::slots(space, slots.len(), vertical);
    slots.extend(more);
    let mut exprs = commutator_defects(space, kind, &e, &f)?;
    let label = match kind {
        GaugeKind::Naive if predicted => {
            for ((_, d), c) in exprs.iter_mut().zip(corollary_defect(space, &e, &f)) {
                *d = d.sub(&c);
            }
            "naive"
        }
        GaugeKind::Naive => "naive exact",
        GaugeKind::Covariant => "covariant",
        GaugeKind::Connection(_) => "connection",
    };
    let identity = space.identity_check(&exprs, &slots, trials, degree, seed)?;
    Ok(ClosureReport { kind: label, identity })
}

/// Frame-change check in the frame `b̃` with `b^I = B^I_J b̃^J`. Fields are
/// the tilde fields; `A^I = B^I_J Ã^J` and `ε^I = B^I_J ε̃^J`. Returns the
/// naive defect minus `B^I_{J,i} F^i ε̃^J` and the covariant defect, each
/// of which must vanish.
pub fn frame_defects(
    space: &FieldSpace,
    f: &FrameChange,
    eps_tilde: &ParamExprs,
) -> Result<(FieldSpace, Vec<(String, Expr)>), GaugeError> {
    if !eps_tilde.is_vertical() {
        return Err(GaugeError::NotVertical);
    }
    let e = &space.target;
    let tilde = FieldSpace::new(space.source.clone(), change_frame(e, f)?);
    let r = e.rank();
    let rotate = |v: &[Expr]| -> Vec<Expr> {
        (0..r)
            .map(|i| Expr::sum((0..r).map(|j| Expr::func(f.b(i, j).clone()).wedge(&v[j]))))
            .collect()
    };
    let a_b = rotate(&tilde.a_fields());
    let eps_b = rotate(&eps_tilde.eps2);
    let fb = tilde.f_base();
    let mut out = Vec::new();

    let (dx, da) = delta0_with(e, &a_b, &eps_b);
    let (tx, ta) = delta0_with(&tilde.target, &tilde.a_fields(), &eps_tilde.eps2);
    let naive = tilde.spec(tx, ta);
    for (i, d) in dx.iter().enumerate() {
        out.push((format!("naive X{}", i + 1), d.sub(&naive.delta_x[i])));
    }
    for upper in 0..r {
        let mut predicted = Vec::new();
        for j in 0..r {
            for (i, &xi) in e.base().iter().enumerate() {
                let db = f.b(upper, j).differentiate(xi);
                if !db.is_zero() {
                    predicted.push(Expr::func(db).wedge(&fb[i]).wedge(&eps_tilde.eps2[j]));
                }
            }
        }
        let defect = da[upper].sub(&tilde.vary(&a_b[upper], &naive));
        out.push((format!("naive A{}", upper + 1), defect.sub(&Expr::sum(predicted))));
    }

    let eps_b = ParamExprs {
        eps1: eps_tilde.eps1.clone(),
        eps2: eps_b,
    };
    let (cx, ca) = delta_cov_with(&tilde, e, &a_b, &eps_b)?;
    let (ux, ua) = delta_cov_with(&tilde, &tilde.target, &tilde.a_fields(), eps_tilde)?;
    let cov = tilde.spec(ux, ua);
    for (i, d) in cx.iter().enumerate() {
        out.push((format!("covariant X{}", i + 1), d.sub(&cov.delta_x[i])));
    }
    for upper in 0..r {
        out.push((
            format!("covariant A{}", upper + 1),
            ca[upper].sub(&tilde.vary(&a_b[upper], &cov)),
        ));
    }
    Ok((tilde, out))
}

pub fn frame_defect_check(
    space: &FieldSpace,
    f: &FrameChange,
    trials: usize,
    degree: u32,
    seed: u64,
) -> Result<IdentityReport, GaugeError> {
    let (eps, slots) = ParamExprs::slots(space, 0, true);
    let (tilde, exprs) = frame_defects(space, f, &eps)?;
    Ok(tilde.identity_check(&exprs, &slots, trials, degree, seed)?)
}

fn is_coordinate_tangent(e: &Algebroid) -> bool {
    e.rank() == e.dim()
        && e.is_flat()
        && (0..e.rank()).all(|a| {
            (0..e.dim()).all(|m| *e.anchor(a, m) == if a == m { Poly::one() } else { Poly::zero() })
        })
}

/// `ε_I = ι_v A^I` for a vector field `v` on a tangent-bundle source.
pub fn diffeo_param(phi: &BundleMap, v: &Section) -> Result<GaugeParam, GaugeError> {
    if !is_coordinate_tangent(phi.source()) {
        return Err(GaugeError::WrongSourceAlgebroid);
    }
    if v.rank() != phi.source().rank() {
        return Err(GaugeError::Shape("vector field components".into()));
    }
    let space = FieldSpace::new(phi.source().clone(), phi.target().clone());
    GaugeParam::vertical(&space, phi.push_section(v))
}

/// `δ⁰_ε X^i − v(X^i) + ι_v F^i` for `ε = diffeo_param(φ, v)`; all zero.
pub fn diffeo_identity(phi: &BundleMap, v: &Section) -> Result<Vec<Poly>, GaugeError> {
    let eps = diffeo_param(phi, v)?;
    let t = phi.target();
    let f = phi.curvature();
    Ok((0..t.dim())
        .map(|i| {
            let dx: Poly = (0..t.rank())
                .map(|big| &phi.pull_function(t.anchor(big, i)) * &eps.eps2[big])
                .sum();
            let vx = d_function(phi.source(), &phi.phi0()[i]).interior(v).coeff(crate::eform::Blade::ONE);
            let ivf = f.f_base[i].interior(v).coeff(crate::eform::Blade::ONE);
            dx - vx + ivf
        })
        .collect())
}

/// Pairs `(i, k)` (0-based) where `(ε_{j,i} − ε_{i,j}) P^{jk} ≠ 0`.
pub fn gauge_condition_violations(
    base: &[VarId],
    p: &[Vec<Poly>],
    eps: &[Poly],
) -> Result<Vec<((usize, usize), Poly)>, GaugeError> {
    check_antisymmetric(p)?;
    let n = base.len();
    if p.len() != n || eps.len() != n {
        return Err(GaugeError::Shape("Poisson matrix and 1-form sizes".into()));
    }
    let mut out = Vec::new();
    for i in 0..n {
        for k in 0..n {
            let v: Poly = (0..n)
                .map(|j| &(eps[j].differentiate(base[i]) - eps[i].differentiate(base[j])) * &p[j][k])
                .sum();
            if !v.is_zero() {
                out.push(((i, k), v));
            }
        }
    }
    Ok(out)
}

pub fn gauge_condition_check(base: &[VarId], p: &[Vec<Poly>], eps: &[Poly]) -> Result<bool, GaugeError> {
    Ok(gauge_condition_violations(base, p, eps)?.is_empty())
}

/// `Φ(ε) = ε_i(X(x)) d1 X^i` as a 1-form over the source.
pub fn pull_one_form(phi: &BundleMap, eps: &[Poly]) -> EForm {
    eps.iter().enumerate().fold(EForm::zero(phi.source().rank()), |acc, (i, e)| {
        acc.add(&d_function(phi.source(), &phi.phi0()[i]).mul_poly(&phi.pull_function(e)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::{poisson_cotangent, tangent_bundle};
    use crate::morphism::tests::{example1, symplectic};
    use crate::random::trial_rng;
    use crate::symexpr::{parse, VarKind, VarTable};

    pub(crate) fn poisson_space(entries: &[(usize, usize, &str)], n: usize) -> (VarTable, FieldSpace, Vec<Vec<Poly>>) {
        let mut t = VarTable::new();
        let xs = t.declare_all(&["x1", "x2"], VarKind::Source).unwrap();
        let names: Vec<String> = (1..=n).map(|i| format!("X{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let ys = t.declare_all(&refs, VarKind::Target).unwrap();
        let mut p = vec![vec![Poly::zero(); n]; n];
        for &(i, j, s) in entries {
            let v = parse(s, &t).unwrap();
            p[i][j] = v.clone();
            p[j][i] = -v;
        }
        let src = tangent_bundle(xs, &t).unwrap();
        let tgt = poisson_cotangent(ys, &p, &t).unwrap();
        (t, FieldSpace::new(src, tgt), p)
    }

    #[test]
    fn psm_specialization_of_delta0() {
        let (t, sp, p) = poisson_space(&[(0, 1, "X1^2")], 2);
        let (eps, slots) = ParamExprs::slots(&sp, 0, true);
        let v = delta0(&sp, &eps).unwrap();
        // δX^i = P^{ji} ε_j, δA_i = dε_i + P^{jk},_i A_j ε_k
        let mut exprs = Vec::new();
        for i in 0..2 {
            let want = Expr::sum((0..2).map(|j| Expr::func(p[j][i].clone()).wedge(&eps.eps2[j])));
            exprs.push((format!("X{i}"), v.delta_x[i].sub(&want)));
            let mut terms = vec![eps.eps2[i].d1()];
            for j in 0..2 {
                for k in 0..2 {
                    let c = p[j][k].differentiate(sp.target.base()[i]);
                    terms.push(Expr::func(c).wedge(&Expr::a(j)).wedge(&eps.eps2[k]));
                }
            }
            exprs.push((format!("A{i}"), v.delta_a[i].sub(&Expr::sum(terms))));
        }
        assert!(sp.identity_check(&exprs, &slots, 4, 2, 11).unwrap().pass);
        let _ = t;
    }

    #[test]
    fn lie_algebra_target_closes() {
        let mut t = VarTable::new();
        let xs = t.declare_all(&["x1", "x2"], VarKind::Source).unwrap();
        let src = tangent_bundle(xs, &t).unwrap();
        let (_, g) = crate::algebroid::tests::so3();
        let sp = FieldSpace::new(src, g);
        for kind in [GaugeKind::Naive, GaugeKind::Covariant] {
            let rep = closure_check(&sp, &kind, true, 3, 2, 5).unwrap();
            assert!(rep.identity.pass, "{}", rep.kind);
        }
    }

    #[test]
    fn quadratic_poisson_closure() {
        let (_, sp, _) = poisson_space(&[(0, 1, "X1^2")], 2);
        for kind in [GaugeKind::Naive, GaugeKind::Covariant] {
            let rep = closure_check(&sp, &kind, true, 4, 2, 1).unwrap();
            assert!(rep.identity.pass, "{}", rep.kind);
        }
        // Naive commutator alone does not close.
        let e = GaugeParam::vertical(&sp, vec![Poly::one(), Poly::zero()]).unwrap().exprs();
        let f = GaugeParam::vertical(&sp, vec![Poly::zero(), Poly::one()]).unwrap().exprs();
        let d = commutator_defects(&sp, &GaugeKind::Naive, &e, &f).unwrap();
        let f1 = sp.f_base()[0].clone();
        let exprs = vec![
            ("A1".to_string(), d[2].1.add(&f1.scale(crate::symexpr::rat_int(2)))),
            ("A2".to_string(), d[3].1.clone()),
            ("X1".to_string(), d[0].1.clone()),
        ];
        assert!(sp.identity_check(&exprs, &[], 4, 2, 2).unwrap().pass);
        let raw = vec![("A1".to_string(), d[2].1.clone())];
        assert!(!sp.identity_check(&raw, &[], 4, 2, 2).unwrap().pass);
    }

    #[test]
    fn exact_naive_closure_needs_linear_structure() {
        let (_, lin, _) = poisson_space(&[(0, 1, "X3"), (1, 2, "X1"), (2, 0, "X2")], 3);
        assert!(exact_closure_check(&lin, &GaugeKind::Naive, true, 3, 2, 0).unwrap().identity.pass);
        let (_, quad, _) = poisson_space(&[(0, 1, "X1^2")], 2);
        let rep = exact_closure_check(&quad, &GaugeKind::Naive, true, 3, 2, 0).unwrap();
        assert!(!rep.identity.pass);
        assert!(rep.identity.witness.is_some());
    }

    #[test]
    fn connection_closure_picks_up_gamma_terms() {
        let (t, sp, _) = poisson_space(&[(0, 1, "1")], 2);
        let zero = Connection::zero(2, 2);
        let rep = exact_closure_check(&sp, &GaugeKind::Connection(zero), true, 3, 2, 0).unwrap();
        assert!(rep.identity.pass);
        // Γ^1_{11} = X1: the commutator keeps Γ-dependent terms off-shell.
        let mut g = Connection::zero(2, 2);
        g.set(0, 0, 0, Poly::var(t.lookup("X1").unwrap()));
        let rep = exact_closure_check(&sp, &GaugeKind::Connection(g), true, 3, 2, 0).unwrap();
        assert!(!rep.identity.pass);
        assert!(rep.identity.witness.is_some());
    }

    #[test]
    fn covariant_closure_with_source_part() {
        let (_, sp, _) = poisson_space(&[(0, 1, "X1^2")], 2);
        let rep = closure_check(&sp, &GaugeKind::Covariant, false, 3, 1, 9).unwrap();
        assert!(rep.identity.pass);
    }

    #[test]
    fn lie_poisson_naive_closes_exactly() {
        let (_, sp, _) = poisson_space(&[(0, 1, "X3"), (1, 2, "X1"), (2, 0, "X2")], 3);
        let e = GaugeParam::vertical(&sp, vec![Poly::one(), Poly::int(2), Poly::zero()]).unwrap().exprs();
        let f = GaugeParam::vertical(&sp, vec![Poly::zero(), Poly::one(), Poly::int(-1)]).unwrap().exprs();
        let d = commutator_defects(&sp, &GaugeKind::Naive, &e, &f).unwrap();
        assert!(sp.identity_check(&d, &[], 3, 2, 4).unwrap().pass);
        // Vertical constants: [e1, e2] = e3.
        let b = e_bracket(
            &sp,
            &GaugeParam::vertical(&sp, vec![Poly::one(), Poly::zero(), Poly::zero()]).unwrap().exprs(),
            &GaugeParam::vertical(&sp, vec![Poly::zero(), Poly::one(), Poly::zero()]).unwrap().exprs(),
        )
        .unwrap();
        match b.eps2[2].node() {
            crate::fieldcalc::Node::Fn(p) => assert_eq!(*p, Poly::one()),
            other => panic!("{other:?}"),
        }
        assert!(b.eps2[0].is_zero_node() && b.eps2[1].is_zero_node());
    }

    #[test]
    fn unipotent_frame_defect() {
        let (t, sp, _) = poisson_space(&[(0, 1, "X1^2")], 2);
        let x1 = Poly::var(t.lookup("X1").unwrap());
        let b = vec![vec![Poly::one(), x1.clone()], vec![Poly::zero(), Poly::one()]];
        let bi = vec![vec![Poly::one(), -x1], vec![Poly::zero(), Poly::one()]];
        let f = FrameChange::new(b, bi).unwrap();
        assert!(frame_defect_check(&sp, &f, 4, 2, 3).unwrap().pass);
    }

    #[test]
    fn diffeo_params() {
        let (t, m) = symplectic();
        let v = Section::basis(2, 0);
        let eps = diffeo_param(&m, &v).unwrap();
        assert!(diffeo_identity(&m, &v).unwrap().iter().all(Poly::is_zero));
        assert_eq!(eps.eps2, vec![Poly::zero(), Poly::int(-1)]);
        let (_, m1) = example1();
        assert!(diffeo_identity(&m1, &Section::basis(2, 1)).unwrap().iter().all(Poly::is_zero));
        assert!(diffeo_param(&m1, &Section::zero(2)).unwrap().eps2.iter().all(Poly::is_zero));
        let _ = t;
    }

    #[test]
    fn gauge_conditions() {
        let (t, sp, p) = poisson_space(&[(0, 1, "1")], 4);
        let xs = sp.target.base();
        let x4 = Poly::var(xs[3]);
        let eps = vec![Poly::zero(), Poly::zero(), x4, Poly::zero()];
        assert!(gauge_condition_check(xs, &p, &eps).unwrap());
        let h = parse("X1^2*X3 + X2*X4", &t).unwrap();
        let closed: Vec<Poly> = xs.iter().map(|&x| h.differentiate(x)).collect();
        assert!(gauge_condition_check(xs, &p, &closed).unwrap());

        let (_, sp2, p2) = poisson_space(&[(0, 1, "1")], 2);
        let xs2 = sp2.target.base();
        let eps = vec![Poly::var(xs2[1]), Poly::zero()];
        let bad = gauge_condition_violations(xs2, &p2, &eps).unwrap();
        // (i,k) = (1,1): (ε_{2,1} − ε_{1,2}) P^{21} = 1; (2,2): (ε_{1,2} − ε_{2,1}) P^{12} = 1.
        assert_eq!(bad, vec![((0, 0), Poly::one()), ((1, 1), Poly::one())]);
        let _ = trial_rng(0, 0);
    }
}
