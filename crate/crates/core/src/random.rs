//! Seeded random polynomials, forms and bundle maps for identity testing.

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebroid::{Algebroid, Section};
use crate::eform::{Blade, EForm};
use crate::symexpr::{Monomial, Poly, Rat, VarId};

/// Generator for trial `trial` of a run seeded with `seed`; streams are
/// independent, so trials can be replayed individually.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Uniform in `{-3..3}/{1..3}`.
pub fn random_rat(rng: &mut impl Rng) -> Rat {
    let n: i64 = rng.gen_range(-3..=3);
    let d: i64 = rng.gen_range(1..=3);
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Every monomial of total degree `<= degree` in `vars`.
pub fn monomials(vars: &[VarId], degree: u32) -> Vec<Monomial> {
    let mut out = vec![Monomial::one()];
    let mut frontier = vec![(Vec::<(VarId, u32)>::new(), 0usize, 0u32)];
    while let Some((pairs, start, deg)) = frontier.pop() {
        if deg == degree {
            continue;
        }
        for (k, &v) in vars.iter().enumerate().skip(start) {
            let mut p = pairs.clone();
            match p.last_mut() {
                Some((w, e)) if *w == v => *e += 1,
                _ => p.push((v, 1)),
            }
            out.push(Monomial::from_pairs(p.iter().copied()));
            frontier.push((p, k, deg + 1));
        }
    }
    out
}

/// Dense random polynomial of total degree `<= degree`.
pub fn random_poly(rng: &mut impl Rng, vars: &[VarId], degree: u32) -> Poly {
    Poly::from_terms(
        monomials(vars, degree)
            .into_iter()
            .map(|m| (m, random_rat(rng))),
    )
}

/// Random form with every blade of degree `<= max_deg` populated.
pub fn random_eform(
    rng: &mut impl Rng,
    rank: usize,
    max_deg: usize,
    vars: &[VarId],
    degree: u32,
) -> EForm {
    let mut terms = Vec::new();
    for bits in 0u64..(1u64 << rank) {
        if bits.count_ones() as usize <= max_deg {
            terms.push((Blade(bits), random_poly(rng, vars, degree)));
        }
    }
    EForm::from_terms(rank, terms)
}

/// Random homogeneous form of degree `p`.
pub fn random_homogeneous(rng: &mut impl Rng, rank: usize, p: usize, vars: &[VarId], degree: u32) -> EForm {
    random_eform(rng, rank, p, vars, degree).part(p)
}

pub fn random_section(rng: &mut impl Rng, alg: &Algebroid, degree: u32) -> Section {
    Section::new(
        (0..alg.rank())
            .map(|_| random_poly(rng, alg.base(), degree))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{VarKind, VarTable};

    #[test]
    fn monomial_count_is_binomial() {
        let mut t = VarTable::new();
        let v = t.declare_all(&["a", "b", "c"], VarKind::Auxiliary).unwrap();
        // C(3+2, 2) = 10
        let ms = monomials(&v, 2);
        assert_eq!(ms.len(), 10);
        let set: std::collections::HashSet<_> = ms.iter().cloned().collect();
        assert_eq!(set.len(), 10);
        assert_eq!(monomials(&[], 3), vec![Monomial::one()]);
    }

    #[test]
    fn trials_are_reproducible() {
        let mut t = VarTable::new();
        let v = t.declare_all(&["a", "b"], VarKind::Auxiliary).unwrap();
        let p = random_poly(&mut trial_rng(7, 2), &v, 2);
        assert_eq!(p, random_poly(&mut trial_rng(7, 2), &v, 2));
        assert_ne!(p, random_poly(&mut trial_rng(7, 3), &v, 2));
    }
}
