//! The compatible element g0, the Fan-Pall closed forms, the compatible
//! double coset and the intersection J n H.

use std::collections::HashSet;

use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{inv_mod, ipow, rem, ResRing, Q};
use crate::error::{Error, Result};
use crate::matgroup::{enumerate_elements, RatMat, ResMat, Subgroup};

fn inv_diff(a: u64, b: u64, m: u64) -> Result<u64> {
    inv_mod(rem(a as i128 - b as i128, m), m).ok_or(Error::NotDisjoint)
}

/// g0 with entries 1/(alpha_j - beta_i) in the first n rows and a bottom row of ones.
pub fn build_g0(alpha: &[u64], beta: &[u64], ring: ResRing) -> Result<ResMat> {
    let n = beta.len();
    if alpha.len() != n + 1 {
        return Err(Error::DimensionMismatch("need |alpha| = |beta| + 1".into()));
    }
    let m = ring.modulus();
    let mut g = ResMat::zero(n + 1, ring);
    for i in 0..n {
        for j in 0..=n {
            g.set(i, j, inv_diff(alpha[j], beta[i], m)? as i128);
        }
    }
    for j in 0..=n {
        g.set(n, j, 1);
    }
    Ok(g)
}

/// Closed-form solution (y, z) of alpha_j = z + sum_i y_i / (alpha_j - beta_i).
pub fn fan_pall_solve(alpha: &[u64], beta: &[u64], ring: ResRing) -> Result<(Vec<u64>, u64)> {
    let n = beta.len();
    let m = ring.modulus() as i128;
    let z = rem(
        alpha.iter().map(|&a| a as i128).sum::<i128>() - beta.iter().map(|&b| b as i128).sum::<i128>(),
        m as u64,
    );
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let mut num: i128 = -1;
        for &a in alpha {
            num = num * (a as i128 - beta[i] as i128) % m;
        }
        let mut den: i128 = 1;
        for j in 0..n {
            if j != i {
                den = den * (beta[j] as i128 - beta[i] as i128) % m;
            }
        }
        let di = inv_mod(rem(den, m as u64), m as u64).ok_or(Error::NotDisjoint)?;
        y.push(rem(num * di as i128, m as u64));
    }
    Ok((y, z))
}

/// The coefficient matrix of the Fan-Pall system in the unknowns (z, y_1, ..., y_n).
pub fn fan_pall_matrix(alpha: &[Q], beta: &[Q], p: u64) -> RatMat {
    let n = beta.len();
    RatMat::from_fn(n + 1, p, |j, c| {
        if c == 0 {
            Q::one()
        } else {
            (alpha[j] - beta[c - 1]).recip()
        }
    })
}

/// (-1)^(n(n-1)/2) prod(alpha_i - alpha_j) prod(beta_i - beta_j) / prod(alpha_i - beta_j).
pub fn fan_pall_det_closed(alpha: &[Q], beta: &[Q]) -> Q {
    let n = beta.len();
    let mut v = if (n * n.saturating_sub(1) / 2) % 2 == 0 {
        Q::one()
    } else {
        -Q::one()
    };
    for i in 0..alpha.len() {
        for j in i + 1..alpha.len() {
            v *= alpha[i] - alpha[j];
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            v *= beta[i] - beta[j];
        }
    }
    for a in alpha {
        for b in beta {
            v /= *a - *b;
        }
    }
    v
}

/// Check g0 diag(alpha) g0^-1 = [[diag(beta), 1], [y^t, z]] modulo p^l, computing
/// at level 2l with the canonical lift of g0.
pub fn verify_conjugate_identity(alpha: &[u64], beta: &[u64], ring: ResRing) -> Result<bool> {
    let n = beta.len();
    let g0 = build_g0(alpha, beta, ring)?;
    let (y, z) = fan_pall_solve(alpha, beta, ring)?;
    let hi = ring.with_level(2 * ring.level)?;
    let g = g0.lift_to(hi.level)?;
    let da = ResMat::diag(hi, &alpha.iter().map(|&a| a as i128).collect::<Vec<_>>());
    let c = g.mul(&da).mul(&g.inv()?).reduce_to(ring.level)?;
    let mut want = ResMat::zero(n + 1, ring);
    for i in 0..n {
        want.set(i, i, beta[i] as i128);
        want.set(i, n, 1);
        want.set(n, i, y[i] as i128);
    }
    want.set(n, n, z as i128);
    Ok(c == want)
}

/// All entries of g0 and g0^-1 are units.
pub fn g0_entries_are_units(g0: &ResMat) -> Result<bool> {
    let p = g0.p();
    let gi = g0.inv()?;
    Ok(g0.entries().iter().chain(gi.entries()).all(|&e| e as u64 % p != 0))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitCheck {
    pub scanned: usize,
    pub matches: usize,
    pub expected: usize,
    pub equal: bool,
}

/// {k : k diag(alpha) k^-1 has upper-left block diag(beta)} equals T_H g0 T modulo p^l.
pub fn compatible_orbit_check(alpha: &[u64], beta: &[u64], ring: ResRing, budget: u128) -> Result<OrbitCheck> {
    let n = beta.len();
    let big_n = n + 1;
    let g0 = build_g0(alpha, beta, ring)?;
    let da = ResMat::diag(ring, &alpha.iter().map(|&a| a as i128).collect::<Vec<_>>());
    let ks = enumerate_elements(big_n, ring.p, &Subgroup::K, ring.level, budget)?;
    let hits: Vec<u128> = ks
        .par_iter()
        .filter_map(|k| {
            let c = k.mul(&da).mul(&k.inv().ok()?);
            let ok = (0..n).all(|i| (0..n).all(|j| c.get(i, j) == if i == j { beta[i] } else { 0 }));
            ok.then(|| k.code())
        })
        .collect();
    let th = enumerate_elements(n, ring.p, &Subgroup::TorusCompact, ring.level, budget)?;
    let t = enumerate_elements(big_n, ring.p, &Subgroup::TorusCompact, ring.level, budget)?;
    let mut expected: HashSet<u128> = HashSet::new();
    for h in &th {
        let he = h.embed_upper_left();
        let left = he.mul(&g0);
        for s in &t {
            expected.insert(left.mul(s).code());
        }
    }
    let found: HashSet<u128> = hits.iter().copied().collect();
    Ok(OrbitCheck {
        scanned: ks.len(),
        matches: found.len(),
        expected: expected.len(),
        equal: found == expected,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtransCheck {
    pub scanned: usize,
    pub in_j: usize,
    pub in_kh: usize,
    pub mismatches: usize,
    pub noncompact_samples: usize,
    pub noncompact_hits: usize,
}

impl AtransCheck {
    pub fn ok(&self) -> bool {
        self.mismatches == 0 && self.noncompact_hits == 0
    }
}

fn in_h_embedded(h: &RatMat) -> bool {
    let n = h.n - 1;
    (0..n).all(|k| h.get(n, k).is_zero() && h.get(k, n).is_zero()) && h.get(n, n).is_one()
}

/// J n H = K_H(l): exhaustive over GL_n(Z/p^(2l)) plus sampled non-compact torus
/// elements t with k1 g0 t g0^-1 k2 never landing in H.
pub fn atrans_check(
    alpha: &[u64],
    beta: &[u64],
    ring: ResRing,
    samples: usize,
    rng: &mut impl Rng,
    budget: u128,
) -> Result<AtransCheck> {
    let n = beta.len();
    let l = ring.level;
    let p = ring.p;
    let g0 = build_g0(alpha, beta, ring)?.lift_to(2 * l)?;
    let g0i = g0.inv()?;
    let hs = enumerate_elements(n, p, &Subgroup::K, 2 * l, budget)?;
    let rows: Vec<(bool, bool)> = hs
        .par_iter()
        .map(|h| {
            let e = h.embed_upper_left();
            let in_j = g0i.mul(&e).mul(&g0).off_diagonal_divisible(l);
            (in_j, h.is_congruent_one(l))
        })
        .collect();
    let in_j = rows.iter().filter(|r| r.0).count();
    let in_kh = rows.iter().filter(|r| r.1).count();
    let mismatches = rows.iter().filter(|r| r.0 != r.1).count();

    let g0q = g0.to_ratmat();
    let g0qi = g0q.inv()?;
    let pl = ipow(p, l) as i64;
    let mut noncompact_samples = 0;
    let mut noncompact_hits = 0;
    let big_n = n + 1;
    let mut exps = vec![-1i32; big_n];
    loop {
        if exps.iter().any(|&e| e != 0) {
            let t = RatMat::torus(p, &exps);
            let mid = g0q.mul(&t).mul(&g0qi);
            for _ in 0..samples {
                let mut k1 = RatMat::identity(big_n, p);
                let mut k2 = RatMat::identity(big_n, p);
                for i in 0..big_n {
                    for j in 0..big_n {
                        let a = Q::from_integer((pl * rng.gen_range(0..pl * p as i64)) as i128);
                        let b = Q::from_integer((pl * rng.gen_range(0..pl * p as i64)) as i128);
                        k1.set(i, j, *k1.get(i, j) + a);
                        k2.set(i, j, *k2.get(i, j) + b);
                    }
                }
                let h = k1.mul(&mid).mul(&k2);
                noncompact_samples += 1;
                if in_h_embedded(&h) {
                    noncompact_hits += 1;
                }
            }
        }
        let mut k = 0;
        loop {
            if k == big_n {
                return Ok(AtransCheck {
                    scanned: hs.len(),
                    in_j,
                    in_kh,
                    mismatches,
                    noncompact_samples,
                    noncompact_hits,
                });
            }
            exps[k] += 1;
            if exps[k] <= 1 {
                break;
            }
            exps[k] = -1;
            k += 1;
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FanPallCheck {
    pub n: usize,
    pub p: u64,
    pub l: u32,
    /// False when 2n+1 distinct residues do not exist modulo p; only the rational identity is tested.
    pub modular: bool,
    pub conjugate: bool,
    pub system: bool,
    pub trace: bool,
    pub units: bool,
    pub determinant: bool,
}

impl FanPallCheck {
    pub fn ok(&self) -> bool {
        self.determinant && (!self.modular || (self.conjugate && self.system && self.trace && self.units))
    }
}

/// One random instance: the conjugation identity, the closed forms solving the
/// system modulo p^l, z = sum alpha - sum beta, and the determinant over Q.
pub fn fan_pall_random_check(n: usize, p: u64, l: u32, rng: &mut impl Rng) -> Result<FanPallCheck> {
    let ring = ResRing::new(p, l)?;
    let m = ring.modulus();
    let mut out = FanPallCheck { n, p, l, ..Default::default() };
    if p as usize >= 2 * n + 1 {
        out.modular = true;
        let pair = crate::chargeo::GenericPair::random(n, p, l, rng)?;
        let (alpha, beta) = (pair.alpha(), pair.beta());
        let g0 = build_g0(&alpha, &beta, ring)?;
        out.conjugate = verify_conjugate_identity(&alpha, &beta, ring)?;
        out.units = g0_entries_are_units(&g0)?;
        let (y, z) = fan_pall_solve(&alpha, &beta, ring)?;
        out.trace = rem(
            alpha.iter().map(|&a| a as i128).sum::<i128>() - beta.iter().map(|&b| b as i128).sum::<i128>() - z as i128,
            m,
        ) == 0;
        out.system = alpha.iter().all(|&a| {
            let mut s = z as i128;
            for (yi, &b) in y.iter().zip(&beta) {
                match inv_mod(rem(a as i128 - b as i128, m), m) {
                    Some(inv) => s += (*yi as i128 * inv as i128) % m as i128,
                    None => return false,
                }
            }
            rem(s - a as i128, m) == 0
        });
    }
    let mut vals: Vec<i64> = Vec::new();
    while vals.len() < 2 * n + 1 {
        let v = rng.gen_range(-50..50);
        if !vals.contains(&v) {
            vals.push(v);
        }
    }
    let alpha: Vec<Q> = vals[..=n].iter().map(|&v| Q::from_integer(v as i128)).collect();
    let beta: Vec<Q> = vals[n + 1..].iter().map(|&v| Q::new(2 * v as i128 + 1, 2)).collect();
    out.determinant = fan_pall_matrix(&alpha, &beta, p).det() == fan_pall_det_closed(&alpha, &beta);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(p: u64, l: u32) -> ResRing {
        ResRing::new(p, l).unwrap()
    }

    #[test]
    fn g0_example() {
        let g0 = build_g0(&[0, 1], &[2], r(3, 1)).unwrap();
        assert_eq!(g0, ResMat::from_rows(r(3, 1), &[vec![1, 2], vec![1, 1]]));
        assert_eq!(g0.det(), 2);
        assert!(g0_entries_are_units(&g0).unwrap());
        assert_eq!(fan_pall_solve(&[0, 1], &[2], r(3, 1)).unwrap(), (vec![1], 2));
        assert!(verify_conjugate_identity(&[0, 1], &[2], r(3, 1)).unwrap());
        assert_eq!(build_g0(&[0, 1], &[1], r(3, 1)), Err(Error::NotDisjoint));
    }

    #[test]
    fn fan_pall_determinant_over_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=3 {
            for _ in 0..20 {
                let alpha: Vec<Q> = (0..=n).map(|_| Q::from_integer(rng.gen_range(-40..40))).collect();
                let beta: Vec<Q> = (0..n)
                    .map(|_| Q::new(rng.gen_range(-400..400) * 2 + 1, 2))
                    .collect();
                let m = fan_pall_matrix(&alpha, &beta, 3);
                if alpha.iter().enumerate().any(|(i, a)| alpha[..i].contains(a)) {
                    continue;
                }
                assert_eq!(m.det(), fan_pall_det_closed(&alpha, &beta));
            }
        }
    }

    #[test]
    fn fan_pall_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (n, p, l) in [(1, 3, 1), (1, 5, 2), (2, 5, 1), (2, 7, 2), (2, 3, 1)] {
            let c = fan_pall_random_check(n, p, l, &mut rng).unwrap();
            assert_eq!(c.modular, p as usize > 2 * n);
            assert!(c.ok(), "{c:?}");
        }
    }

    #[test]
    fn orbit_example() {
        let o = compatible_orbit_check(&[0, 1], &[2], r(3, 1), 1 << 20).unwrap();
        assert_eq!(o.scanned, 48);
        assert_eq!(o.matches, 8);
        assert!(o.equal);
    }

    #[test]
    fn atrans_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = atrans_check(&[0, 1], &[2], r(3, 1), 5, &mut rng, 1 << 20).unwrap();
        assert_eq!(a.scanned, 6);
        assert_eq!(a.in_kh, 3);
        assert!(a.ok());
    }
}
