use std::collections::HashMap;

use algebroid::algebroid::{
    entry, exterior_sum, jacobi_poisson, lie_algebra, poisson_cotangent, section_bracket,
    section_bracket_via_forms, tangent_bundle, verify_axioms, Algebroid,
};
use algebroid::eform::{e_differential, lie_derivative, Blade, EForm};
use algebroid::morphism::BundleMap;
use algebroid::random::{random_homogeneous, random_poly, random_rat, random_section, trial_rng};
use algebroid::symexpr::{parse, rat_int, Poly, Rat, VarId, VarKind, VarTable};
use proptest::prelude::*;
use rand::Rng;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

fn vars3() -> (VarTable, Vec<VarId>) {
    let mut t = VarTable::new();
    let xs = t.declare_all(&["X1", "X2", "X3"], VarKind::Target).unwrap();
    (t, xs)
}

fn point(seed: u64, vars: &[VarId]) -> HashMap<VarId, Rat> {
    let mut rng = trial_rng(seed, 99);
    vars.iter().map(|&v| (v, random_rat(&mut rng))).collect()
}

fn so3_star(t: &VarTable, xs: &[VarId]) -> Algebroid {
    let x = |i: usize| Poly::var(xs[i]);
    let z = Poly::zero;
    let p = vec![
        vec![z(), x(2), -x(1)],
        vec![-x(2), z(), x(0)],
        vec![x(1), -x(0), z()],
    ];
    poisson_cotangent(xs.to_vec(), &p, t).unwrap()
}

fn quadratic(t: &VarTable, xs: &[VarId]) -> Algebroid {
    let x1 = Poly::var(xs[0]);
    let z = Poly::zero;
    let p = vec![
        vec![z(), &x1 * &x1, z()],
        vec![-(&x1 * &x1), z(), z()],
        vec![z(), z(), z()],
    ];
    poisson_cotangent(xs.to_vec(), &p, t).unwrap()
}

fn targets() -> Vec<(VarTable, Algebroid)> {
    let (t, xs) = vars3();
    let so3 = lie_algebra(
        vec!["e1".into(), "e2".into(), "e3".into()],
        [
            entry(2, 0, 1, rat_int(1)),
            entry(0, 1, 2, rat_int(1)),
            entry(1, 2, 0, rat_int(1)),
        ],
    )
    .unwrap();
    let tb = tangent_bundle(xs.clone(), &t).unwrap();
    let star = so3_star(&t, &xs);
    let quad = quadratic(&t, &xs);
    vec![(t.clone(), so3), (t.clone(), tb), (t.clone(), star), (t, quad)]
}

/// Components of a `p`-form on sorted index tuples, extended antisymmetrically.
fn component(w: &EForm, idx: &[usize]) -> Poly {
    match Blade::from_indices(idx) {
        Some((b, sign)) => w.coeff(b).scale(&rat_int(sign as i64)),
        None => Poly::zero(),
    }
}

fn permutations(n: usize) -> Vec<(Vec<usize>, i64)> {
    if n == 0 {
        return vec![(Vec::new(), 1)];
    }
    let mut out = Vec::new();
    for (p, s) in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            let flips = (p.len() - pos) as i64;
            out.push((q, if flips % 2 == 0 { s } else { -s }));
        }
    }
    out
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

/// `(a∧b)_{i1..i(p+q)} = 1/(p!q!) Σ_σ sgn σ a_{σ(1..p)} b_{σ(p+1..)}`.
fn wedge_oracle(a: &EForm, p: usize, b: &EForm, q: usize, idx: &[usize]) -> Poly {
    let mut total = Poly::zero();
    for (perm, sign) in permutations(p + q) {
        let i: Vec<usize> = perm.iter().map(|&k| idx[k]).collect();
        let term = &component(a, &i[..p]) * &component(b, &i[p..]);
        total += &term.scale(&rat_int(sign));
    }
    total.scale(&Rat::new(1.into(), (factorial(p) * factorial(q)).into()))
}

fn subsets(r: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << r)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..r).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn ring_operations_match_pointwise_evaluation(seed in any::<u64>(), deg in 0u32..4) {
        let (_, xs) = vars3();
        let mut rng = trial_rng(seed, 0);
        let a = random_poly(&mut rng, &xs, deg);
        let b = random_poly(&mut rng, &xs, deg);
        let pt = point(seed, &xs);
        let ev = |p: &Poly| p.eval_at(&pt).unwrap();
        prop_assert_eq!(ev(&(&a * &b)), ev(&a) * ev(&b));
        prop_assert_eq!(ev(&(&a + &b)), ev(&a) + ev(&b));
        prop_assert_eq!(ev(&(&a - &b)), ev(&a) - ev(&b));
        prop_assert_eq!(ev(&a.pow(3)), ev(&a) * ev(&a) * ev(&a));
    }

    #[test]
    fn substitution_matches_evaluation(seed in any::<u64>()) {
        let (_, xs) = vars3();
        let mut rng = trial_rng(seed, 1);
        let f = random_poly(&mut rng, &xs, 2);
        let g: Vec<Poly> = xs.iter().map(|_| random_poly(&mut rng, &xs, 2)).collect();
        let sub: HashMap<VarId, Poly> = xs.iter().copied().zip(g.iter().cloned()).collect();
        let pt = point(seed, &xs);
        let inner: HashMap<VarId, Rat> = xs.iter().zip(&g).map(|(&v, p)| (v, p.eval_at(&pt).unwrap())).collect();
        prop_assert_eq!(f.substitute(&sub).eval_at(&pt).unwrap(), f.eval_at(&inner).unwrap());
    }

    #[test]
    fn derivative_is_a_derivation(seed in any::<u64>(), v in 0usize..3) {
        let (_, xs) = vars3();
        let mut rng = trial_rng(seed, 2);
        let a = random_poly(&mut rng, &xs, 3);
        let b = random_poly(&mut rng, &xs, 3);
        let x = xs[v];
        let lhs = (&a * &b).differentiate(x);
        let rhs = &(&a.differentiate(x) * &b) + &(&a * &b.differentiate(x));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn printed_polynomials_parse_back(seed in any::<u64>(), deg in 0u32..4) {
        let (t, xs) = vars3();
        let p = random_poly(&mut trial_rng(seed, 3), &xs, deg);
        let text = p.display(&t).to_string();
        prop_assert_eq!(parse(&text, &t).unwrap(), p);
    }

    #[test]
    fn wedge_matches_alternation_oracle(seed in any::<u64>(), p in 0usize..3, q in 0usize..3) {
        let (_, xs) = vars3();
        let r = 4;
        let mut rng = trial_rng(seed, 4);
        let a = random_homogeneous(&mut rng, r, p, &xs[..1], 1);
        let b = random_homogeneous(&mut rng, r, q, &xs[..1], 1);
        let w = a.wedge(&b);
        for idx in subsets(r, p + q) {
            prop_assert_eq!(component(&w, &idx), wedge_oracle(&a, p, &b, q, &idx));
        }
    }

    #[test]
    fn wedge_is_associative_and_graded(seed in any::<u64>(), p in 0usize..3, q in 0usize..3, s in 0usize..3) {
        let (_, xs) = vars3();
        let mut rng = trial_rng(seed, 5);
        let a = random_homogeneous(&mut rng, 5, p, &xs, 1);
        let b = random_homogeneous(&mut rng, 5, q, &xs, 1);
        let c = random_homogeneous(&mut rng, 5, s, &xs, 1);
        prop_assert_eq!(a.wedge(&b).wedge(&c), a.wedge(&b.wedge(&c)));
        let swapped = b.wedge(&a);
        let expected = if (p * q) % 2 == 0 { swapped } else { swapped.neg() };
        prop_assert_eq!(a.wedge(&b), expected);
        if !a.wedge(&b).is_zero() {
            prop_assert_eq!(a.wedge(&b).degree(), Some(p + q));
        }
    }

    #[test]
    fn differential_squares_to_zero_and_is_graded_derivation(
        seed in any::<u64>(), which in 0usize..4, p in 0usize..3, q in 0usize..2
    ) {
        let (_, e) = targets().swap_remove(which);
        let mut rng = trial_rng(seed, 6);
        let a = random_homogeneous(&mut rng, e.rank(), p, e.base(), 2);
        let b = random_homogeneous(&mut rng, e.rank(), q, e.base(), 2);
        let d = |w: &EForm| e_differential(&e, w).unwrap();
        prop_assert!(d(&d(&a)).is_zero());
        let lhs = d(&a.wedge(&b));
        let first = d(&a).wedge(&b);
        let second = a.wedge(&d(&b));
        let rhs = if p % 2 == 0 { first.add(&second) } else { first.sub(&second) };
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn cartan_identities(seed in any::<u64>(), which in 0usize..4, p in 0usize..3) {
        let (_, e) = targets().swap_remove(which);
        let mut rng = trial_rng(seed, 7);
        let w = random_homogeneous(&mut rng, e.rank(), p, e.base(), 2);
        let s = random_section(&mut rng, &e, 1);
        let t = random_section(&mut rng, &e, 1);
        let d = |w: &EForm| e_differential(&e, w).unwrap();
        let l = |w: &EForm, s| lie_derivative(&e, w, s).unwrap();
        prop_assert_eq!(d(&l(&w, &s)), l(&d(&w), &s));
        // [L_s, ι_t] = ι_[s,t]
        let lhs = l(&w.interior(&t), &s).sub(&l(&w, &s).interior(&t));
        prop_assert_eq!(lhs, w.interior(&section_bracket(&e, &s, &t)));
    }

    #[test]
    fn bracket_routes_agree(seed in any::<u64>(), which in 0usize..4) {
        let (_, e) = targets().swap_remove(which);
        let mut rng = trial_rng(seed, 8);
        let s = random_section(&mut rng, &e, 2);
        let t = random_section(&mut rng, &e, 2);
        prop_assert_eq!(section_bracket(&e, &s, &t), section_bracket_via_forms(&e, &s, &t));
        let back = section_bracket(&e, &t, &s);
        prop_assert!(section_bracket(&e, &s, &t).add(&back).is_zero());
    }

    #[test]
    fn jacobi_check_agrees_with_axioms(seed in any::<u64>(), deg in 0u32..3) {
        let (t, xs) = vars3();
        let mut rng = trial_rng(seed, 9);
        let mut p = vec![vec![Poly::zero(); 3]; 3];
        for i in 0..3 {
            for j in i + 1..3 {
                let v = if rng.gen_bool(0.3) { Poly::zero() } else { random_poly(&mut rng, &xs, deg) };
                p[j][i] = -v.clone();
                p[i][j] = v;
            }
        }
        let report = jacobi_poisson(&xs, &p).unwrap();
        let e = poisson_cotangent(xs.clone(), &p, &t).unwrap();
        let ax = verify_axioms(&e);
        prop_assert_eq!(report.holds, ax.pass());
        prop_assert!(ax.routes_agree());
    }

    #[test]
    fn tangent_maps_are_morphisms_and_chain_maps(seed in any::<u64>(), p in 0usize..3) {
        let mut t = VarTable::new();
        let xs = t.declare_all(&["x1", "x2"], VarKind::Source).unwrap();
        let ys = t.declare_all(&["Y1", "Y2", "Y3"], VarKind::Target).unwrap();
        let src = tangent_bundle(xs.clone(), &t).unwrap();
        let tgt = tangent_bundle(ys.clone(), &t).unwrap();
        let mut rng = trial_rng(seed, 10);
        let phi0: Vec<Poly> = ys.iter().map(|_| random_poly(&mut rng, &xs, 2)).collect();
        let a: Vec<EForm> = phi0
            .iter()
            .map(|f| EForm::one_form(&[f.differentiate(xs[0]), f.differentiate(xs[1])]))
            .collect();
        let m = BundleMap::new(src.clone(), tgt.clone(), phi0, a).unwrap();
        prop_assert!(m.curvature().is_zero());
        let w = random_homogeneous(&mut rng, 3, p, &ys, 2);
        let v = random_homogeneous(&mut rng, 3, 1, &ys, 1);
        let d2 = e_differential(&tgt, &w).unwrap();
        prop_assert_eq!(m.pullback(&d2).unwrap(), m.d1(&m.pullback(&w).unwrap()));
        prop_assert_eq!(m.pullback(&w.wedge(&v)).unwrap(), m.pullback(&w).unwrap().wedge(&m.pullback(&v).unwrap()));
        prop_assert!(m.graph_is_morphism().unwrap());
    }

    #[test]
    fn exterior_sums_stay_algebroids(seed in any::<u64>()) {
        let (_, so3) = targets().swap_remove(0);
        let (_, star) = targets().swap_remove(2);
        let sum = exterior_sum(&so3, &star).unwrap();
        prop_assert!(verify_axioms(&sum).pass());
        let w = random_homogeneous(&mut trial_rng(seed, 11), sum.rank(), 1, sum.base(), 2);
        let d = |w: &EForm| e_differential(&sum, w).unwrap();
        prop_assert!(d(&d(&w)).is_zero());
    }
}

#[test]
fn broken_targets_fail_both_routes() {
    let (t, xs) = vars3();
    let x2 = Poly::var(xs[1]);
    let z = Poly::zero;
    let p = vec![vec![z(), Poly::one(), z()], vec![-Poly::one(), z(), x2.clone()], vec![z(), -x2, z()]];
    let report = jacobi_poisson(&xs, &p).unwrap();
    assert!(!report.holds);
    let ax = verify_axioms(&poisson_cotangent(xs.clone(), &p, &t).unwrap());
    assert!(!ax.pass() && ax.routes_agree());
}
