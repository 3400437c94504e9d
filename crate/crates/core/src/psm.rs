//! Poisson sigma model on a two-dimensional worldsheet.

use crate::algebroid::{check_antisymmetric, jacobi_poisson, poisson_cotangent, tangent_bundle, Algebroid, AlgebroidError};
use crate::eform::{d_function, Blade, EForm};
use crate::fieldcalc::{Expr, FieldSpace};
use crate::morphism::{BundleMap, Curvature, MorphismError};
use crate::symexpr::{rat, Poly, VarId, VarTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PsmError {
    #[error("map does not go from the worldsheet tangent bundle to this model's target")]
    AlgebroidMismatch,
    #[error("the action constructions disagree")]
    Inconsistent,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Algebroid(#[from] AlgebroidError),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
}

#[derive(Debug, Clone)]
pub struct PsmModel {
    sigma: [VarId; 2],
    p: Vec<Vec<Poly>>,
    source: Algebroid,
    target: Algebroid,
    jacobi: bool,
}

impl PsmModel {
    pub fn new(vars: &VarTable, sigma: [VarId; 2], base: Vec<VarId>, p: Vec<Vec<Poly>>) -> Result<Self, PsmError> {
        check_antisymmetric(&p)?;
        let source = tangent_bundle(sigma.to_vec(), vars)?;
        let jacobi = jacobi_poisson(&base, &p)?.holds;
        let target = poisson_cotangent(base, &p, vars)?;
        Ok(PsmModel {
            sigma,
            p,
            source,
            target,
            jacobi,
        })
    }

    pub fn sigma(&self) -> [VarId; 2] {
        self.sigma
    }

    pub fn poisson(&self) -> &[Vec<Poly>] {
        &self.p
    }

    pub fn source(&self) -> &Algebroid {
        &self.source
    }

    pub fn target(&self) -> &Algebroid {
        &self.target
    }

    pub fn satisfies_jacobi(&self) -> bool {
        self.jacobi
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn space(&self) -> FieldSpace {
        FieldSpace::new(self.source.clone(), self.target.clone())
    }

    fn check(&self, phi: &BundleMap) -> Result<(), PsmError> {
        if *phi.source() != self.source || *phi.target() != self.target {
            return Err(PsmError::AlgebroidMismatch);
        }
        Ok(())
    }

    /// `A_i ∧ d1X^i + 1/2 P^{ij} A_i ∧ A_j`, checked against three other
    /// constructions of the same density.
    pub fn action_density(&self, phi: &BundleMap) -> Result<EForm, PsmError> {
        let routes = self.action_routes(phi)?;
        if routes.iter().any(|r| *r != routes[0]) {
            return Err(PsmError::Inconsistent);
        }
        Ok(routes[0].clone())
    }

    /// The density by the local formula, by antisymmetrising the pulled
    /// back tensor `δ + P`, by pulling `δ + P` back along the extended map
    /// into `T*M ⊕ TM`, and by the component pairing formula.
    pub fn action_routes(&self, phi: &BundleMap) -> Result<[EForm; 4], PsmError> {
        self.check(phi)?;
        Ok([
            self.local_density(phi),
            self.alt_density(phi),
            self.extended_density(phi)?,
            self.pairing_density(phi),
        ])
    }

    fn dx(&self, phi: &BundleMap) -> Vec<EForm> {
        phi.phi0().iter().map(|x| d_function(&self.source, x)).collect()
    }

    fn local_density(&self, phi: &BundleMap) -> EForm {
        let n = self.dim();
        let a = phi.a();
        let dx = self.dx(phi);
        let mut out = EForm::zero(2);
        for i in 0..n {
            out = out.add(&a[i].wedge(&dx[i]));
            for j in 0..n {
                let pij = phi.pull_function(&self.p[i][j]).scale(&rat(1, 2));
                out = out.add(&a[i].wedge(&a[j]).mul_poly(&pij));
            }
        }
        out
    }

    fn alt_density(&self, phi: &BundleMap) -> EForm {
        // T = Σ_i A_i ⊗ dX^i + 1/2 Σ_ij P^{ij} A_i ⊗ A_j, as (coefficient, left, right).
        let n = self.dim();
        let a = phi.a();
        let dx = self.dx(phi);
        let mut tensor: Vec<(Poly, &EForm, &EForm)> = Vec::new();
        for i in 0..n {
            tensor.push((Poly::one(), &a[i], &dx[i]));
            for j in 0..n {
                tensor.push((phi.pull_function(&self.p[i][j]).scale(&rat(1, 2)), &a[i], &a[j]));
            }
        }
        let comp = |w: &EForm, mu: usize| w.component(mu);
        let t = |mu: usize, nu: usize| -> Poly {
            tensor
                .iter()
                .map(|(c, l, r)| &(c * &comp(l, mu)) * &comp(r, nu))
                .sum()
        };
        EForm::term(2, Blade(0b11), t(0, 1) - t(1, 0))
    }

    fn extended_density(&self, phi: &BundleMap) -> Result<EForm, PsmError> {
        let n = self.dim();
        let base = self.target.base().to_vec();
        let mut frame: Vec<String> = self.target.frame().to_vec();
        frame.extend((0..n).map(|i| format!("v{}", i + 1)));
        let mut anchor: Vec<Vec<Poly>> = (0..n).map(|i| (0..n).map(|j| self.p[i][j].clone()).collect()).collect();
        anchor.extend((0..n).map(|i| (0..n).map(|j| if i == j { Poly::one() } else { Poly::zero() }).collect()));
        let doubled = Algebroid::new(base, frame, anchor, [])?;
        let mut a = phi.a().to_vec();
        a.extend(self.dx(phi));
        let psi = BundleMap::new(self.source.clone(), doubled, phi.phi0().to_vec(), a)?;
        let r = 2 * n;
        let mut w = EForm::zero(r);
        for i in 0..n {
            w = w.add(&EForm::generator(r, i).wedge(&EForm::generator(r, n + i)));
            for j in i + 1..n {
                w = w.add(&EForm::generator(r, i).wedge(&EForm::generator(r, j)).mul_poly(&self.p[i][j]));
            }
        }
        Ok(psi.pullback(&w)?)
    }

    fn pairing_density(&self, phi: &BundleMap) -> EForm {
        let n = self.dim();
        let [s1, s2] = self.sigma;
        let a = phi.a();
        let mut c = Poly::zero();
        for i in 0..n {
            let x = &phi.phi0()[i];
            c += &(&a[i].component(0) * &x.differentiate(s2)) - &(&a[i].component(1) * &x.differentiate(s1));
            for j in 0..n {
                let pij = phi.pull_function(&self.p[i][j]);
                c += &(&pij * &a[i].component(0)) * &a[j].component(1);
            }
        }
        EForm::term(2, Blade(0b11), c)
    }

    /// Field strengths, checked against the variational derivatives
    /// `dX^i + P^{ij}A_j` and `dA_i + 1/2 P^{kl}_{,i} A_k ∧ A_l`.
    pub fn euler_lagrange(&self, phi: &BundleMap) -> Result<Curvature, PsmError> {
        self.check(phi)?;
        let c = phi.curvature();
        let n = self.dim();
        let a = phi.a();
        let dx = self.dx(phi);
        for i in 0..n {
            let mut ea = dx[i].clone();
            let mut ex = phi.d1(&a[i]);
            for j in 0..n {
                ea = ea.add(&a[j].mul_poly(&phi.pull_function(&self.p[i][j])));
                for l in 0..n {
                    let dp = self.p[j][l].differentiate(self.target.base()[i]).scale(&rat(1, 2));
                    ex = ex.add(&a[j].wedge(&a[l]).mul_poly(&phi.pull_function(&dp)));
                }
            }
            if ea != c.f_base[i] || ex != c.f_frame[i] {
                return Err(PsmError::Inconsistent);
            }
        }
        Ok(c)
    }

    /// Density `L` as a field expression.
    pub fn action_expr(&self) -> Expr {
        let sp = self.space();
        let n = self.dim();
        let mut terms = Vec::new();
        for i in 0..n {
            terms.push(Expr::a(i).wedge(&sp.x(i).d1()));
            for j in i + 1..n {
                terms.push(Expr::func(self.p[i][j].clone()).wedge(&Expr::a(i).wedge(&Expr::a(j))));
            }
        }
        Expr::sum(terms)
    }

    /// `d1(ε_i dX^i)` for parameter expressions `ε_i`.
    pub fn exact_term(&self, eps: &[Expr]) -> Expr {
        let sp = self.space();
        Expr::sum(eps.iter().enumerate().map(|(i, e)| e.wedge(&sp.x(i).d1()))).d1()
    }

    /// The variation density for a 1-form `ε = ε_i(X) dX^i` on the target:
    /// `d1(ε_i dX^i) + W_{ij} P^{jk} A_k ∧ dX^i + 1/2 W_{ij} P^{ki} P^{lj} A_k ∧ A_l`
    /// with `W_{ij} = ε_{j,i} − ε_{i,j}`.
    pub fn variation_expr(&self, eps: &[Poly]) -> Result<Expr, PsmError> {
        let n = self.dim();
        if eps.len() != n {
            return Err(PsmError::Shape(format!("need {n} components")));
        }
        let sp = self.space();
        let xs = self.target.base();
        let w = |i: usize, j: usize| eps[j].differentiate(xs[i]) - eps[i].differentiate(xs[j]);
        let eps_e: Vec<Expr> = eps.iter().cloned().map(Expr::func).collect();
        let mut terms = vec![self.exact_term(&eps_e)];
        for i in 0..n {
            for k in 0..n {
                let c: Poly = (0..n).map(|j| &w(i, j) * &self.p[j][k]).sum();
                if !c.is_zero() {
                    terms.push(Expr::func(c).wedge(&Expr::a(k)).wedge(&sp.x(i).d1()));
                }
            }
        }
        for k in 0..n {
            for l in 0..n {
                let mut c = Poly::zero();
                for i in 0..n {
                    for j in 0..n {
                        c += &(&w(i, j) * &self.p[k][i]) * &self.p[l][j];
                    }
                }
                if !c.is_zero() {
                    terms.push(Expr::func(c.scale(&rat(1, 2))).wedge(&Expr::a(k)).wedge(&Expr::a(l)));
                }
            }
        }
        Ok(Expr::sum(terms))
    }

    /// Concrete variation density on a given map.
    pub fn psm_variation(&self, phi: &BundleMap, eps: &[Poly]) -> Result<EForm, PsmError> {
        self.check(phi)?;
        let e = self.variation_expr(eps)?;
        Ok(self.space().instantiate(&e, phi, &[]).expect("no parameter slots"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eform::parse_form;
    use crate::fieldcalc::SlotKind;
    use crate::gauge::{delta0, delta_conn, diffeo_param, gauge_condition_check, Connection, ParamExprs};
    use crate::morphism::tests::{example1, symplectic};
    use crate::random::trial_rng;
    use crate::symexpr::{parse, VarKind};

    fn model_of(m: &BundleMap, t: &VarTable) -> PsmModel {
        let sigma = [m.source().base()[0], m.source().base()[1]];
        let n = m.target().dim();
        let p = (0..n)
            .map(|i| (0..n).map(|j| m.target().anchor(i, j).clone()).collect())
            .collect();
        PsmModel::new(t, sigma, m.target().base().to_vec(), p).unwrap()
    }

    fn r_model(n: usize, entries: &[(usize, usize, &str)]) -> (VarTable, PsmModel) {
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
        let m = PsmModel::new(&t, [xs[0], xs[1]], ys, p).unwrap();
        (t, m)
    }

    #[test]
    fn example1_density_vanishes() {
        let (t, m) = example1();
        let model = model_of(&m, &t);
        assert!(model.action_density(&m).unwrap().is_zero());
        let c = model.euler_lagrange(&m).unwrap();
        let nz = c.nonzero(m.target(), &t);
        assert_eq!(nz.len(), 1);
        assert_eq!(nz[0].0, "F[2]");
    }

    #[test]
    fn symplectic_density() {
        let (t, m) = symplectic();
        let model = model_of(&m, &t);
        let d = model.action_density(&m).unwrap();
        // dx2∧dx1 + (−dx1)∧dx2 + P^{12} dx2∧(−dx1) = −dx1∧dx2
        assert_eq!(d, parse_form("-dx1*dx2", m.source().frame(), &t).unwrap());
        assert!(model.euler_lagrange(&m).unwrap().is_zero());
    }

    #[test]
    fn routes_agree_on_random_maps() {
        let (_, model) = r_model(3, &[(0, 1, "X3"), (1, 2, "X1^2"), (0, 2, "X2 - 1")]);
        let sp = model.space();
        for trial in 0..10 {
            let phi = sp.random_fields(&mut trial_rng(42, trial), 2);
            let routes = model.action_routes(&phi).unwrap();
            assert!(routes.iter().all(|r| *r == routes[0]));
            model.euler_lagrange(&phi).unwrap();
        }
    }

    #[test]
    fn naive_variation_is_exact() {
        let (_, model) = r_model(2, &[(0, 1, "X1^2 + X2")]);
        let sp = model.space();
        let (eps, slots) = ParamExprs::slots(&sp, 0, true);
        let v = delta0(&sp, &eps).unwrap();
        let l = model.action_expr();
        let e = sp.vary(&l, &v).sub(&model.exact_term(&eps.eps2));
        assert!(sp.identity_check(&[("dL".into(), e)], &slots, 4, 2, 0).unwrap().pass);
    }

    #[test]
    fn torsion_criterion() {
        let (t, model) = r_model(2, &[(0, 1, "1")]);
        let sp = model.space();
        let (eps, slots) = ParamExprs::slots(&sp, 0, true);
        let l = model.action_expr();
        let x2 = parse("X2", &t).unwrap();
        let check = |g: &Connection| {
            let v = delta_conn(&sp, &eps, g).unwrap();
            let e = sp.vary(&l, &v).sub(&model.exact_term(&eps.eps2));
            sp.identity_check(&[("dL".into(), e)], &slots, 4, 2, 1).unwrap().pass
        };
        let mut free = Connection::zero(2, 2);
        free.set(0, 0, 0, x2);
        free.set(0, 1, 0, Poly::one());
        free.set(1, 0, 0, Poly::one());
        assert!(free.is_torsion_free_cotangent());
        assert!(check(&free));
        let mut full = Connection::zero(2, 2);
        full.set(0, 1, 0, Poly::one());
        assert!(!full.is_torsion_free_cotangent());
        assert!(!check(&full));
    }

    #[test]
    fn variation_identity_tracks_gauge_condition() {
        let cases: Vec<(usize, Vec<(usize, usize, &str)>, Vec<&str>, bool)> = vec![
            (4, vec![(0, 1, "1")], vec!["0", "0", "X4", "0"], true),
            (2, vec![(0, 1, "1")], vec!["X2", "0"], false),
            (2, vec![(0, 1, "X1*X2")], vec!["2*X1*X2", "X1^2"], true),
        ];
        for (n, entries, eps, expect) in cases {
            let (t, model) = r_model(n, &entries);
            let eps: Vec<Poly> = eps.iter().map(|s| parse(s, &t).unwrap()).collect();
            let sp = model.space();
            assert_eq!(gauge_condition_check(model.target().base(), model.poisson(), &eps).unwrap(), expect);
            let eps_e: Vec<Expr> = eps.iter().cloned().map(Expr::func).collect();
            let e = model.variation_expr(&eps).unwrap().sub(&model.exact_term(&eps_e));
            let rep = sp.identity_check(&[("residual".into(), e)], &[], 8, 2, 0).unwrap();
            assert_eq!(rep.pass, expect);
        }
    }

    #[test]
    fn diffeo_probe_on_morphisms() {
        let (t, m) = symplectic();
        let model = model_of(&m, &t);
        let sp = model.space();
        let v = crate::algebroid::Section::new(vec![Poly::one(), parse("x1", &t).unwrap()]);
        let eps = diffeo_param(&m, &v).unwrap();
        let ex = eps.exprs();
        let var = delta0(&sp, &ex).unwrap();
        let dl = sp.instantiate(&sp.vary(&model.action_expr(), &var), &m, &[]).unwrap();
        let dens = model.action_density(&m).unwrap();
        let lie = crate::eform::lie_derivative(m.source(), &dens, &v).unwrap();
        let pot = crate::gauge::pull_one_form(&m, &eps.eps2).sub(&dens.interior(&v));
        assert_eq!(dl.sub(&lie), m.d1(&pot));
        let _ = SlotKind::Mixed;
    }
}
