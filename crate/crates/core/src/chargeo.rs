//! Characters of (Z/p^k)^x and of K(l)/K(2l), the exp*/log* dictionary and
//! genericity of character tuples.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arith::{ipow, rem, Root};
use crate::error::{Error, Result};
use crate::matgroup::{ResMat, Subgroup};

/// Discrete logarithms on (Z/p^depth)^x with respect to its smallest generator.
#[derive(Debug)]
pub struct DlogTable {
    pub p: u64,
    pub depth: u32,
    pub generator: u64,
    pub order: u64,
    log: Vec<u32>,
}

impl DlogTable {
    fn build(p: u64, depth: u32) -> DlogTable {
        let m = ipow(p, depth);
        let order = m / p * (p - 1);
        let mut generator = 0;
        let mut log = vec![u32::MAX; m as usize];
        for g in 2..m.max(3) {
            if g % p == 0 {
                continue;
            }
            log.iter_mut().for_each(|v| *v = u32::MAX);
            let mut x = 1u64;
            let mut k = 0u32;
            while log[x as usize] == u32::MAX {
                log[x as usize] = k;
                x = x * g % m;
                k += 1;
            }
            if k as u64 == order {
                generator = g;
                break;
            }
        }
        DlogTable {
            p,
            depth,
            generator,
            order,
            log,
        }
    }

    pub fn get(p: u64, depth: u32) -> Arc<DlogTable> {
        static CACHE: OnceLock<Mutex<HashMap<(u64, u32), Arc<DlogTable>>>> = OnceLock::new();
        let c = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut g = c.lock().unwrap();
        g.entry((p, depth))
            .or_insert_with(|| Arc::new(DlogTable::build(p, depth)))
            .clone()
    }

    pub fn dlog(&self, x: u64) -> Result<u64> {
        let m = ipow(self.p, self.depth);
        match self.log[(x % m) as usize] {
            u32::MAX => Err(Error::NonUnit),
            k => Ok(k as u64),
        }
    }
}

/// A character of (Z/p^depth)^x, chi(g^k) = zeta_phi^(exponent * k).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultChar {
    pub p: u64,
    pub depth: u32,
    pub exponent: u64,
}

impl MultChar {
    pub fn new(p: u64, depth: u32, exponent: u64) -> Self {
        let order = ipow(p, depth) / p * (p - 1);
        MultChar {
            p,
            depth,
            exponent: exponent % order,
        }
    }

    pub fn trivial(p: u64, depth: u32) -> Self {
        MultChar::new(p, depth, 0)
    }

    pub fn group_order(&self) -> u64 {
        ipow(self.p, self.depth) / self.p * (self.p - 1)
    }

    pub fn eval(&self, x: u64) -> Result<Root> {
        let t = DlogTable::get(self.p, self.depth);
        let k = t.dlog(x)?;
        let phi = self.group_order();
        Ok(Root::new(phi, rem(k as i128 * self.exponent as i128, phi)))
    }

    pub fn eval_signed(&self, x: i128) -> Result<Root> {
        self.eval(rem(x, ipow(self.p, self.depth)))
    }

    pub fn mul(&self, o: &MultChar) -> Result<MultChar> {
        if self.p != o.p || self.depth != o.depth {
            return Err(Error::SpecMismatch("characters on different groups".into()));
        }
        Ok(MultChar::new(self.p, self.depth, self.exponent + o.exponent))
    }

    pub fn inv(&self) -> MultChar {
        MultChar::new(self.p, self.depth, self.group_order() - self.exponent)
    }

    /// Smallest c with chi trivial on 1 + p^c (c = 0: unramified).
    pub fn conductor(&self) -> u32 {
        if self.eval(DlogTable::get(self.p, self.depth).generator).unwrap().is_one() {
            return 0;
        }
        for c in 1..self.depth {
            if self.eval(1 + ipow(self.p, c)).unwrap().is_one() {
                return c;
            }
        }
        self.depth
    }

    /// The character of (Z/p^(2l))^x with exp*_1 equal to `a` and free tame part `tame`.
    pub fn from_fingerprint(p: u64, l: u32, a: u64, tame: u64) -> MultChar {
        let depth = 2 * l;
        let pl = ipow(p, l);
        let t = DlogTable::get(p, depth);
        let order = t.order;
        // dlog(1 + p^l) = (order / p^l) * u with u a unit mod p^l.
        let d = t.dlog(1 + pl).unwrap();
        let u = d / (order / pl);
        let uinv = crate::arith::inv_mod(u % pl, pl).unwrap_or(0);
        let e = (a % pl) * uinv % pl + pl * tame;
        MultChar::new(p, depth, e)
    }
}

/// exp*_1(chi): the a in O/p^l with chi(1 + y) = theta(p^(-2l) a y) for y in p^l.
pub fn exp_star_1(chi: &MultChar, l: u32) -> Result<u64> {
    let p = chi.p;
    if chi.depth > 2 * l && !chi.eval(1 + ipow(p, 2 * l)).unwrap().is_one() {
        return Err(Error::NotTrivialOnDepth2l);
    }
    let pl = ipow(p, l);
    let v = chi.eval_signed((1 + pl) as i128)?;
    let r = v.normalized();
    if pl % r.m != 0 {
        return Err(Error::NotTrivialOnDepth2l);
    }
    Ok(r.in_order(pl).e)
}

/// Fingerprint D(chi) = diag(exp*_1(chi_i)).
pub fn fingerprint(chars: &[MultChar], l: u32) -> Result<Vec<u64>> {
    chars.iter().map(|c| exp_star_1(c, l)).collect()
}

/// log*[X](1 + Y) = theta(p^(-2l) tr(X Y)) on K(l)/K(2l).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct K1K2Char {
    pub l: u32,
    /// X modulo p^l.
    pub x: ResMat,
}

impl K1K2Char {
    pub fn new(x: ResMat) -> Self {
        K1K2Char { l: x.level(), x }
    }

    pub fn eval(&self, k: &ResMat) -> Result<Root> {
        let l = self.l;
        if k.level() < 2 * l {
            return Err(Error::LevelTooLow {
                have: k.level(),
                need: 2 * l,
            });
        }
        if !k.is_congruent_one(l) {
            return Err(Error::NotInSubgroup("log* is defined on K(l)".into()));
        }
        let k = k.reduce_to(2 * l)?;
        let y = k.sub(&ResMat::identity(k.n, k.ring));
        let x = self.x.lift_to(2 * l)?;
        let n = k.n;
        let mut tr: i128 = 0;
        for i in 0..n {
            for j in 0..n {
                tr += x.get(i, j) as i128 * y.get(j, i) as i128;
            }
        }
        Ok(Root::new(ipow(k.p(), 2 * l), rem(tr, k.modulus())))
    }
}

/// Recover X from a character of K(l)/K(2l) by probing elementary matrices.
pub fn recover_log_star(
    n: usize,
    p: u64,
    l: u32,
    f: impl Fn(&ResMat) -> Result<Root>,
) -> Result<ResMat> {
    let ring2 = crate::arith::ResRing::new(p, 2 * l)?;
    let ring1 = crate::arith::ResRing::new(p, l)?;
    let pl = ipow(p, l);
    let p2l = ipow(p, 2 * l);
    let mut x = ResMat::zero(n, ring1);
    for i in 0..n {
        for j in 0..n {
            let mut k = ResMat::identity(n, ring2);
            k.set(j, i, (k.get(j, i) + pl) as i128);
            let v = f(&k)?.in_order(p2l);
            x.set(i, j, (v.e / pl) as i128);
        }
    }
    Ok(x)
}

/// The restriction of chi~ (for a tuple) to K(l), as a function.
pub fn chi_tilde_on_kl(chars: &[MultChar], k: &ResMat) -> Result<Root> {
    let mut r = Root::one();
    for (i, c) in chars.iter().enumerate() {
        r = r.mul(&c.eval(k.get(i, i))?);
    }
    Ok(r)
}

/// Conductor test: every chi_i chi_j^-1 has exact conductor p^(2l).
pub fn is_generic(chars: &[MultChar], l: u32) -> bool {
    for i in 0..chars.len() {
        for j in 0..chars.len() {
            if i != j {
                let q = chars[i].mul(&chars[j].inv()).unwrap();
                if q.conductor() != 2 * l {
                    return false;
                }
            }
        }
    }
    true
}

/// Fingerprint test: D(chi) is regular modulo p.
pub fn is_generic_by_fingerprint(chars: &[MultChar], l: u32) -> Result<bool> {
    let d = fingerprint(chars, l)?;
    let residues: BTreeSet<u64> = d.iter().map(|a| a % chars[0].p).collect();
    Ok(residues.len() == d.len())
}

/// A generic tuple of characters of (Z/p^(2l))^x.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericTuple {
    pub p: u64,
    pub l: u32,
    pub chars: Vec<MultChar>,
}

impl GenericTuple {
    pub fn new(p: u64, l: u32, chars: Vec<MultChar>) -> Result<Self> {
        if chars.iter().any(|c| c.p != p || c.depth != 2 * l) {
            return Err(Error::SpecMismatch("characters must live on (Z/p^(2l))^x".into()));
        }
        if !is_generic(&chars, l) {
            return Err(Error::NotGeneric);
        }
        Ok(GenericTuple { p, l, chars })
    }

    pub fn from_fingerprint(p: u64, l: u32, d: &[u64], tame: &[u64]) -> Result<Self> {
        let chars = d
            .iter()
            .zip(tame)
            .map(|(&a, &t)| MultChar::from_fingerprint(p, l, a, t))
            .collect();
        GenericTuple::new(p, l, chars)
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn fingerprint(&self) -> Vec<u64> {
        fingerprint(&self.chars, self.l).unwrap()
    }

    pub fn inverse(&self) -> GenericTuple {
        GenericTuple {
            p: self.p,
            l: self.l,
            chars: self.chars.iter().map(|c| c.inv()).collect(),
        }
    }

    /// chi(b) for b upper triangular, depending only on the diagonal.
    pub fn eval_diag(&self, d: &[u64]) -> Result<Root> {
        let mut r = Root::one();
        for (c, &x) in self.chars.iter().zip(d) {
            r = r.mul(&c.eval(x)?);
        }
        Ok(r)
    }

    /// chi~ on T~(l): product of chi_i on the diagonal.
    pub fn chi_tilde(&self, t: &ResMat) -> Result<Root> {
        if !crate::matgroup::membership(t, &Subgroup::TorusTilde(self.l))? {
            return Err(Error::NotInSubgroup("chi~ is defined on T~(l)".into()));
        }
        let d: Vec<u64> = (0..t.n).map(|i| t.get(i, i)).collect();
        self.eval_diag(&d)
    }
}

/// A generic pair (chi on GL(n+1), chi_H on GL(n)) with disjoint fingerprint residues.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericPair {
    pub g: GenericTuple,
    pub h: GenericTuple,
}

impl GenericPair {
    pub fn new(g: GenericTuple, h: GenericTuple) -> Result<Self> {
        if g.len() != h.len() + 1 || g.p != h.p || g.l != h.l {
            return Err(Error::SpecMismatch("pair must be (GL(n+1), GL(n)) at equal p, l".into()));
        }
        let p = g.p;
        let a: BTreeSet<u64> = g.fingerprint().iter().map(|x| x % p).collect();
        if h.fingerprint().iter().any(|x| a.contains(&(x % p))) {
            return Err(Error::NotDisjoint);
        }
        Ok(GenericPair { g, h })
    }

    pub fn alpha(&self) -> Vec<u64> {
        self.g.fingerprint()
    }

    pub fn beta(&self) -> Vec<u64> {
        self.h.fingerprint()
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    /// Random generic pair; needs 2n+1 distinct residues modulo p.
    pub fn random(n: usize, p: u64, l: u32, rng: &mut impl Rng) -> Result<Self> {
        if (p as usize) < 2 * n + 1 {
            return Err(Error::InvalidConfig(format!(
                "a generic pair for n = {n} needs p >= {}",
                2 * n + 1
            )));
        }
        let mut residues: Vec<u64> = (0..p).collect();
        for i in 0..residues.len() {
            let j = rng.gen_range(i..residues.len());
            residues.swap(i, j);
        }
        let pl1 = ipow(p, l - 1);
        let tame_range = p - 1;
        let mut lift = |r: u64| r + p * rng.gen_range(0..pl1);
        let d: Vec<u64> = residues[..2 * n + 1].iter().map(|&r| lift(r)).collect();
        let tg: Vec<u64> = (0..=n).map(|_| rng.gen_range(0..tame_range)).collect();
        let th: Vec<u64> = (0..n).map(|_| rng.gen_range(0..tame_range)).collect();
        let g = GenericTuple::from_fingerprint(p, l, &d[..n + 1], &tg)?;
        let h = GenericTuple::from_fingerprint(p, l, &d[n + 1..], &th)?;
        GenericPair::new(g, h)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ExpLogReport {
    pub n: usize,
    pub p: u64,
    pub l: u32,
    pub characters: usize,
    pub elements: usize,
    pub pairs: usize,
    pub roundtrip_failures: usize,
    pub multiplicativity_failures: usize,
    pub duality_failures: usize,
    pub witness: Option<String>,
}

impl ExpLogReport {
    pub fn ok(&self) -> bool {
        self.roundtrip_failures == 0 && self.multiplicativity_failures == 0 && self.duality_failures == 0
    }
}

const MAX_ENUMERATED: u128 = 4096;

/// Roundtrip X -> log*[X] -> X, multiplicativity on K(l)/K(2l), and
/// "log*[X] trivial on K(l) iff X = 0". Exhaustive over X when
/// p^(l n^2) <= `max_chars`, otherwise `max_chars` random X. K(l)/K(2l) is
/// enumerated up to 4096 elements and sampled beyond; products run over all
/// pairs when that fits in `pair_budget`, else over `pair_budget` random pairs.
pub fn exp_log_check(
    n: usize,
    p: u64,
    l: u32,
    max_chars: usize,
    pair_budget: usize,
    rng: &mut impl Rng,
) -> Result<ExpLogReport> {
    use rayon::prelude::*;
    let ring1 = crate::arith::ResRing::new(p, l)?;
    let total = (ipow(p, l) as u128).saturating_pow((n * n) as u32);
    let m = ipow(p, l);
    let ks: Vec<ResMat> = if total <= MAX_ENUMERATED {
        crate::matgroup::enumerate_elements(n, p, &Subgroup::Congruence(l), 2 * l, MAX_ENUMERATED)?
    } else {
        let ring2 = crate::arith::ResRing::new(p, 2 * l)?;
        (0..MAX_ENUMERATED)
            .map(|_| {
                let t: Vec<u64> = (0..n * n).map(|_| rng.gen_range(0..m)).collect();
                ResMat::from_fn(n, ring2, |i, j| (i == j) as i128 + (m * t[i * n + j]) as i128)
            })
            .collect()
    };
    let xs: Vec<ResMat> = if total <= max_chars as u128 {
        let mut v = Vec::with_capacity(total as usize);
        crate::matgroup::for_each_tuple(n * n, m, |t| {
            v.push(ResMat::from_fn(n, ring1, |i, j| t[i * n + j] as i128));
        });
        v
    } else {
        (0..max_chars)
            .map(|_| {
                let t: Vec<u64> = (0..n * n).map(|_| rng.gen_range(0..m)).collect();
                ResMat::from_fn(n, ring1, |i, j| t[i * n + j] as i128)
            })
            .collect()
    };
    let pairs: Vec<(usize, usize)> = if ks.len() * ks.len() <= pair_budget {
        (0..ks.len()).flat_map(|a| (0..ks.len()).map(move |b| (a, b))).collect()
    } else {
        (0..pair_budget).map(|_| (rng.gen_range(0..ks.len()), rng.gen_range(0..ks.len()))).collect()
    };
    let rows: Vec<Result<(bool, usize, bool, String)>> = xs
        .par_iter()
        .map(|x| {
            let ch = K1K2Char::new(*x);
            let vals: Vec<Root> = ks.iter().map(|k| ch.eval(k).map(|r| r.normalized())).collect::<Result<_>>()?;
            let back = recover_log_star(n, p, l, |k| ch.eval(k))?;
            let mut mult = 0;
            for &(a, b) in &pairs {
                if ch.eval(&ks[a].mul(&ks[b]))?.normalized() != vals[a].mul(&vals[b]).normalized() {
                    mult += 1;
                }
            }
            let trivial = vals.iter().all(|r| r.is_one());
            let is_zero = x.entries().iter().all(|&e| e == 0);
            Ok((back == *x, mult, trivial == is_zero, x.to_string()))
        })
        .collect();
    let mut out = ExpLogReport {
        n,
        p,
        l,
        characters: xs.len(),
        elements: ks.len(),
        pairs: pairs.len(),
        ..Default::default()
    };
    for r in rows {
        let (rt, mult, dual, label) = r?;
        if !rt || mult > 0 || !dual {
            out.witness.get_or_insert(label);
        }
        out.roundtrip_failures += usize::from(!rt);
        out.multiplicativity_failures += mult;
        out.duality_failures += usize::from(!dual);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GenericAgreement {
    pub tuples: usize,
    pub generic: usize,
    pub disagreements: usize,
    pub exhaustive: bool,
}

/// Conductor and fingerprint genericity tests agree on tuples of length `len`.
pub fn generic_agreement(len: usize, p: u64, l: u32, samples: usize, rng: &mut impl Rng) -> Result<GenericAgreement> {
    let order = ipow(p, 2 * l) / p * (p - 1);
    let total = (order as u128).saturating_pow(len as u32);
    let mut out = GenericAgreement {
        exhaustive: total <= samples as u128,
        ..Default::default()
    };
    let mut visit = |e: &[u64]| -> Result<()> {
        let c: Vec<MultChar> = e.iter().map(|&x| MultChar::new(p, 2 * l, x)).collect();
        let a = is_generic(&c, l);
        out.tuples += 1;
        out.generic += usize::from(a);
        out.disagreements += usize::from(a != is_generic_by_fingerprint(&c, l)?);
        Ok(())
    };
    if total <= samples as u128 {
        let mut err = None;
        crate::matgroup::for_each_tuple(len, order, |t| {
            if err.is_none() {
                err = visit(t).err();
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    } else {
        for _ in 0..samples {
            let t: Vec<u64> = (0..len).map(|_| rng.gen_range(0..order)).collect();
            visit(&t)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::ResRing;
    use crate::matgroup::enumerate_elements;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators() {
        assert_eq!(DlogTable::get(3, 2).generator, 2);
        assert_eq!(DlogTable::get(5, 2).generator, 2);
        assert_eq!(DlogTable::get(7, 2).generator, 3);
        assert_eq!(DlogTable::get(3, 1).generator, 2);
    }

    #[test]
    fn exp_star_example() {
        // chi(1 + 3) = zeta_3 on (Z/9)^x.
        let t = DlogTable::get(3, 2);
        let d = t.dlog(4).unwrap();
        let e = (0..6).find(|e| Root::new(6, d * e).normalized() == Root::new(3, 1)).unwrap();
        let chi = MultChar::new(3, 2, e);
        assert_eq!(exp_star_1(&chi, 1).unwrap(), 1);
        let wide = MultChar::new(3, 4, 1);
        assert_eq!(exp_star_1(&wide, 1), Err(Error::NotTrivialOnDepth2l));
    }

    #[test]
    fn fingerprint_roundtrip() {
        for (p, l) in [(3u64, 1u32), (3, 2), (5, 1), (5, 2), (7, 1)] {
            let pl = ipow(p, l);
            for a in 0..pl {
                for tame in 0..p - 1 {
                    let c = MultChar::from_fingerprint(p, l, a, tame);
                    assert_eq!(exp_star_1(&c, l).unwrap(), a);
                }
            }
        }
    }

    #[test]
    fn log_star_example() {
        let r1 = ResRing::new(3, 1).unwrap();
        let r2 = ResRing::new(3, 2).unwrap();
        let x = ResMat::diag(r1, &[1, 2]);
        let k = ResMat::from_rows(r2, &[vec![4, 0], vec![0, 1]]);
        let v = K1K2Char::new(x).eval(&k).unwrap();
        assert_eq!(v.normalized(), Root::new(3, 1));
    }

    #[test]
    fn log_star_is_a_character_and_recovers_x() {
        let r1 = ResRing::new(3, 1).unwrap();
        let x = ResMat::from_rows(r1, &[vec![1, 2], vec![0, 2]]);
        let ch = K1K2Char::new(x);
        let ks = enumerate_elements(2, 3, &Subgroup::Congruence(1), 2, 1 << 20).unwrap();
        for a in ks.iter().step_by(7) {
            for b in ks.iter().step_by(5) {
                let lhs = ch.eval(&a.mul(b)).unwrap();
                let rhs = ch.eval(a).unwrap().mul(&ch.eval(b).unwrap());
                assert_eq!(lhs.normalized(), rhs.normalized());
            }
        }
        assert_eq!(recover_log_star(2, 3, 1, |k| ch.eval(k)).unwrap(), x);
    }

    #[test]
    fn genericity_examples() {
        let t = GenericTuple::from_fingerprint(5, 1, &[0, 1, 2], &[0, 1, 2]).unwrap();
        assert!(is_generic_by_fingerprint(&t.chars, 1).unwrap());
        let c = [
            MultChar::from_fingerprint(5, 1, 1, 0),
            MultChar::from_fingerprint(5, 1, 1, 2),
            MultChar::from_fingerprint(5, 1, 3, 0),
        ];
        assert!(!is_generic(&c, 1));
        assert_eq!(
            GenericTuple::new(5, 1, c.to_vec()),
            Err(Error::NotGeneric)
        );
    }

    #[test]
    fn generic_tests_agree_exhaustively() {
        for (p, l) in [(3u64, 1u32), (5, 1), (3, 2)] {
            let order = ipow(p, 2 * l) / p * (p - 1);
            for e1 in 0..order {
                for e2 in (0..order).step_by(3) {
                    let c = [MultChar::new(p, 2 * l, e1), MultChar::new(p, 2 * l, e2)];
                    assert_eq!(is_generic(&c, l), is_generic_by_fingerprint(&c, l).unwrap());
                }
            }
        }
    }

    #[test]
    fn exp_log_exhaustive_231() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = exp_log_check(2, 3, 1, 1000, 10_000, &mut rng).unwrap();
        assert_eq!((r.characters, r.elements, r.pairs), (81, 81, 6561));
        assert!(r.ok(), "{r:?}");
    }

    #[test]
    fn generic_agreement_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = generic_agreement(2, 3, 1, 1000, &mut rng).unwrap();
        assert!(a.exhaustive);
        assert_eq!(a.tuples, 36);
        assert_eq!(a.disagreements, 0);
        let b = generic_agreement(3, 5, 1, 1000, &mut rng).unwrap();
        assert!(!b.exhaustive && b.disagreements == 0 && b.generic > 0);
    }

    #[test]
    fn pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pr = GenericPair::random(2, 5, 1, &mut rng).unwrap();
        assert_eq!(pr.alpha().len(), 3);
        assert!(GenericPair::random(2, 3, 1, &mut rng).is_err());
        let g = GenericTuple::from_fingerprint(3, 1, &[0, 1], &[0, 0]).unwrap();
        let h = GenericTuple::from_fingerprint(3, 1, &[1], &[0]).unwrap();
        assert_eq!(GenericPair::new(g, h), Err(Error::NotDisjoint));
    }
}
