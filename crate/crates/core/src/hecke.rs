//! Spherical Hecke algebra of GL_N(Q_p): cosets, convolution, Satake
//! eigenvalues, spherical functions, restriction to GL_{N-1} x GL_1 and heights.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{ipow, q_to_f64, qpow, val_q, Q};
use crate::error::{Error, Result};
use crate::matgroup::{enumerate_elements, iwasawa_a, smith_cartan, RatMat, Subgroup};

/// Non-increasing rearrangement.
pub fn dominant(mu: &[i32]) -> Vec<i32> {
    let mut v = mu.to_vec();
    v.sort_unstable_by(|a, b| b.cmp(a));
    v
}

/// 2 rho as an integer vector: (N-1, N-3, ..., 1-N).
pub fn two_rho(nn: usize) -> Vec<i64> {
    (0..nn).map(|i| nn as i64 - 1 - 2 * i as i64).collect()
}

/// 2 <a, rho>.
pub fn pair_rho2(a: &[i32]) -> i64 {
    a.iter().zip(two_rho(a.len())).map(|(&x, r)| x as i64 * r).sum()
}

/// Twice the seminorm max_w <w mu, rho>.
pub fn norm_star2(mu: &[i32]) -> i64 {
    pair_rho2(&dominant(mu))
}

pub fn norm_star(mu: &[i32]) -> f64 {
    norm_star2(mu) as f64 / 2.0
}

pub fn is_central(mu: &[i32]) -> bool {
    mu.windows(2).all(|w| w[0] == w[1])
}

/// a >= b in dominance order; both are taken dominant.
pub fn dominates(a: &[i32], b: &[i32]) -> bool {
    let (a, b) = (dominant(a), dominant(b));
    if a.iter().sum::<i32>() != b.iter().sum::<i32>() {
        return false;
    }
    let (mut sa, mut sb) = (0, 0);
    for i in 0..a.len() {
        sa += a[i];
        sb += b[i];
        if sa < sb {
            return false;
        }
    }
    true
}

/// [j] = (j, 0, ..., 0).
pub fn bracket(nn: usize, j: i32) -> Vec<i32> {
    let mut v = vec![0; nn];
    v[0] = j;
    v
}

/// [j, -j] = (j, 0, ..., 0, -j).
pub fn bracket_pm(nn: usize, j: i32) -> Vec<i32> {
    let mut v = vec![0; nn];
    v[0] = j;
    v[nn - 1] -= j;
    v
}

/// a + b sqrt(q) with rational a, b.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QSqrt {
    pub a: Q,
    pub b: Q,
}

impl QSqrt {
    pub fn zero() -> Self {
        QSqrt { a: Q::zero(), b: Q::zero() }
    }

    pub fn rational(a: Q) -> Self {
        QSqrt { a, b: Q::zero() }
    }

    /// q^(k/2).
    pub fn half_power(q: u64, k: i64) -> Self {
        let whole = qpow(q, k.div_euclid(2) as i32);
        if k.rem_euclid(2) == 0 {
            QSqrt::rational(whole)
        } else {
            QSqrt { a: Q::zero(), b: whole }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn add(&self, o: &QSqrt) -> QSqrt {
        QSqrt { a: self.a + o.a, b: self.b + o.b }
    }

    pub fn mul(&self, o: &QSqrt, q: u64) -> QSqrt {
        let qq = Q::from_integer(q as i128);
        QSqrt {
            a: self.a * o.a + self.b * o.b * qq,
            b: self.a * o.b + self.b * o.a,
        }
    }

    pub fn scale(&self, c: Q) -> QSqrt {
        QSqrt { a: self.a * c, b: self.b * c }
    }

    pub fn to_f64(&self, q: u64) -> f64 {
        q_to_f64(&self.a) + q_to_f64(&self.b) * (q as f64).sqrt()
    }
}

impl fmt::Display for QSqrt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a.is_zero(), self.b.is_zero()) {
            (_, true) => write!(f, "{}", self.a),
            (true, false) => write!(f, "{}*sqrt(q)", self.b),
            _ => write!(f, "{} + {}*sqrt(q)", self.a, self.b),
        }
    }
}

fn compositions(len: usize, total: i32, top: i32, cur: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
    if cur.len() == len - 1 {
        if (0..=top).contains(&total) {
            let mut v = cur.clone();
            v.push(total);
            out.push(v);
        }
        return;
    }
    for x in 0..=top.min(total) {
        cur.push(x);
        compositions(len, total - x, top, cur, out);
        cur.pop();
    }
}

fn shape_count(a: &[i32], p: u64) -> u128 {
    let nn = a.len();
    (0..nn)
        .map(|i| (p as u128).pow(a[i] as u32 * (nn - 1 - i) as u32))
        .product()
}

/// Left coset representatives of K mu(p) K / K: upper triangular, diagonal
/// p^(a_i), entry (i, j) reduced modulo p^(a_i) after shifting min(mu) to 0.
pub fn left_cosets(mu: &[i32], p: u64, budget: u128) -> Result<Vec<RatMat>> {
    let nn = mu.len();
    if nn == 0 {
        return Err(Error::DimensionMismatch("empty cocharacter".into()));
    }
    let lo = *mu.iter().min().unwrap();
    let hi = *mu.iter().max().unwrap();
    let total: i32 = mu.iter().map(|m| m - lo).sum();
    let target: Vec<i32> = dominant(mu).iter().map(|m| m - lo).collect();
    let mut comps = Vec::new();
    compositions(nn, total, hi - lo, &mut Vec::new(), &mut comps);
    let needed: u128 = comps.iter().map(|a| shape_count(a, p)).sum();
    if needed > budget {
        return Err(Error::BudgetExceeded { what: format!("left cosets of {mu:?}"), needed, budget });
    }
    let scale = qpow(p, lo);
    let jobs: Vec<(usize, u128)> = comps
        .iter()
        .enumerate()
        .flat_map(|(c, a)| (0..shape_count(a, p)).map(move |k| (c, k)))
        .collect();
    let mut reps: Vec<RatMat> = jobs
        .par_iter()
        .filter_map(|&(c, mut k)| {
            let a = &comps[c];
            let mut m = RatMat::torus(p, a);
            for i in 0..nn {
                let radix = ipow(p, a[i] as u32) as u128;
                for j in i + 1..nn {
                    m.set(i, j, Q::from_integer((k % radix) as i128));
                    k /= radix;
                }
            }
            (smith_cartan(&m).ok()? == target).then(|| {
                for x in m.e.iter_mut() {
                    *x *= scale;
                }
                m
            })
        })
        .collect();
    reps.sort_by(|x, y| x.e.cmp(&y.e));
    Ok(reps)
}

/// Diagonal valuations of a triangular representative.
pub fn diag_valuations(r: &RatMat) -> Vec<i32> {
    (0..r.n).map(|i| val_q(r.get(i, i), r.p)).collect()
}

/// Number of left K-cosets in K mu(p) K, from the closed form for the
/// triangular parametrisation.
pub fn coset_count(mu: &[i32], p: u64, budget: u128) -> Result<usize> {
    Ok(left_cosets(mu, p, budget)?.len())
}

/// c_nu = #{r in K mu1 K / K : r^-1 nu(p) in K mu2 K} for every dominant nu.
pub fn structure_constants(mu1: &[i32], mu2: &[i32], p: u64, budget: u128) -> Result<BTreeMap<Vec<i32>, u64>> {
    let nn = mu1.len();
    if mu2.len() != nn {
        return Err(Error::DimensionMismatch("cocharacters of different rank".into()));
    }
    let reps = left_cosets(mu1, p, budget)?;
    let inv: Vec<RatMat> = reps.iter().map(|r| r.inv()).collect::<Result<_>>()?;
    let top: Vec<i32> = dominant(mu1).iter().zip(dominant(mu2)).map(|(a, b)| a + b).collect();
    let target = dominant(mu2);
    let lo = mu1.iter().min().unwrap() + mu2.iter().min().unwrap();
    let hi = mu1.iter().max().unwrap() + mu2.iter().max().unwrap();
    let sum: i32 = top.iter().sum();
    let mut out = BTreeMap::new();
    let mut cands = Vec::new();
    compositions(nn, sum - lo * nn as i32, hi - lo, &mut Vec::new(), &mut cands);
    for c in cands {
        let nu: Vec<i32> = c.iter().map(|x| x + lo).collect();
        if nu.windows(2).any(|w| w[0] < w[1]) || !dominates(&top, &nu) {
            continue;
        }
        let t = RatMat::torus(p, &nu);
        let cnt = inv
            .par_iter()
            .filter(|ri| smith_cartan(&ri.mul(&t)).map(|s| s == target).unwrap_or(false))
            .count() as u64;
        if cnt > 0 {
            out.insert(nu, cnt);
        }
    }
    Ok(out)
}

/// The same constants from all products r1 r2 classified by Cartan type.
pub fn structure_constants_by_products(
    mu1: &[i32],
    mu2: &[i32],
    p: u64,
    budget: u128,
) -> Result<BTreeMap<Vec<i32>, u64>> {
    let r1 = left_cosets(mu1, p, budget)?;
    let r2 = left_cosets(mu2, p, budget)?;
    if (r1.len() as u128) * (r2.len() as u128) > budget {
        return Err(Error::BudgetExceeded {
            what: "coset products".into(),
            needed: r1.len() as u128 * r2.len() as u128,
            budget,
        });
    }
    let types: Vec<Vec<i32>> = r1
        .par_iter()
        .flat_map_iter(|a| r2.iter().map(move |b| smith_cartan(&a.mul(b))))
        .collect::<Result<_>>()?;
    let mut tally: BTreeMap<Vec<i32>, u64> = BTreeMap::new();
    for t in types {
        *tally.entry(t).or_default() += 1;
    }
    let mut out = BTreeMap::new();
    for (nu, c) in tally {
        let k = left_cosets(&nu, p, budget)?.len() as u64;
        if c % k != 0 {
            return Err(Error::CounterexampleFound(format!("{c} products of type {nu:?} with {k} cosets")));
        }
        out.insert(nu, c / k);
    }
    Ok(out)
}

/// Element of the spherical Hecke algebra in the basis of double-coset indicators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeckeElem {
    pub rank: usize,
    pub q: u64,
    pub terms: BTreeMap<Vec<i32>, QSqrt>,
}

impl HeckeElem {
    pub fn zero(rank: usize, q: u64) -> Self {
        HeckeElem { rank, q, terms: BTreeMap::new() }
    }

    /// 1_{K mu K}.
    pub fn indicator(mu: &[i32], q: u64) -> Self {
        let mut e = HeckeElem::zero(mu.len(), q);
        e.terms.insert(dominant(mu), QSqrt::rational(Q::one()));
        e
    }

    /// tau(mu) = q^(-||mu||*) 1_{K mu K}.
    pub fn tau(mu: &[i32], q: u64) -> Self {
        let mut e = HeckeElem::zero(mu.len(), q);
        e.terms.insert(dominant(mu), QSqrt::half_power(q, -norm_star2(mu)));
        e
    }

    pub fn identity(rank: usize, q: u64) -> Self {
        HeckeElem::indicator(&vec![0; rank], q)
    }

    pub fn add(&self, o: &HeckeElem) -> HeckeElem {
        let mut out = self.clone();
        for (k, v) in &o.terms {
            let e = out.terms.entry(k.clone()).or_insert_with(QSqrt::zero);
            *e = e.add(v);
        }
        out.terms.retain(|_, v| !v.is_zero());
        out
    }

    pub fn scale(&self, c: &QSqrt) -> HeckeElem {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = v.mul(c, self.q);
        }
        out.terms.retain(|_, v| !v.is_zero());
        out
    }

    /// Coefficient of tau(nu) when the element is expanded in the tau basis.
    pub fn tau_coefficient(&self, nu: &[i32]) -> QSqrt {
        self.terms
            .get(&dominant(nu))
            .map(|c| c.mul(&QSqrt::half_power(self.q, norm_star2(nu)), self.q))
            .unwrap_or_else(QSqrt::zero)
    }

    pub fn support(&self) -> BTreeSet<Vec<i32>> {
        self.terms.keys().cloned().collect()
    }

    pub fn convolve(&self, o: &HeckeElem, budget: u128) -> Result<HeckeElem> {
        if self.rank != o.rank || self.q != o.q {
            return Err(Error::SpecMismatch("Hecke elements over different groups".into()));
        }
        let mut out = HeckeElem::zero(self.rank, self.q);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let c = c1.mul(c2, self.q);
                for (nu, k) in structure_constants(m1, m2, self.q, budget)? {
                    let mut t = HeckeElem::zero(self.rank, self.q);
                    t.terms.insert(nu, c.scale(Q::from_integer(k as i128)));
                    out = out.add(&t);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmplifierRelation {
    pub rank: usize,
    pub j: i32,
    pub q: u64,
    /// (i, c_ij) for tau[i,-i].
    pub coefficients: Vec<(i32, QSqrt)>,
}

/// tau[j] * tau[-j] = sum_i c_ij tau[i,-i]; errors when the support leaves that shape.
pub fn amplifier_relation(rank: usize, j: i32, q: u64, budget: u128) -> Result<AmplifierRelation> {
    let prod = HeckeElem::tau(&bracket(rank, j), q).convolve(&HeckeElem::tau(&bracket(rank, -j), q), budget)?;
    let allowed: BTreeMap<Vec<i32>, i32> = (0..=j).map(|i| (dominant(&bracket_pm(rank, i)), i)).collect();
    let mut coefficients = Vec::new();
    for nu in prod.terms.keys() {
        let i = *allowed
            .get(nu)
            .ok_or_else(|| Error::SupportViolation(format!("{nu:?} in tau[{j}]*tau[-{j}]")))?;
        coefficients.push((i, prod.tau_coefficient(nu)));
    }
    coefficients.sort_by_key(|c| c.0);
    Ok(AmplifierRelation { rank, j, q, coefficients })
}

/// (delta^(1/2) alpha)(p^a) = prod alpha_i^(a_i) q^(-<a, rho>).
pub fn unramified_value(alpha: &[Complex64], a: &[i32], q: u64) -> Complex64 {
    let mut v = Complex64::new((q as f64).powf(-(pair_rho2(a) as f64) / 2.0), 0.0);
    for (x, &k) in alpha.iter().zip(a) {
        v *= x.powi(k);
    }
    v
}

fn coset_sum(mu: &[i32], alpha: &[Complex64], p: u64, budget: u128) -> Result<(Complex64, usize)> {
    if alpha.len() != mu.len() {
        return Err(Error::DimensionMismatch("Satake parameter length".into()));
    }
    let reps = left_cosets(mu, p, budget)?;
    let s = reps.iter().map(|r| unramified_value(alpha, &diag_valuations(r), p)).sum();
    Ok((s, reps.len()))
}

/// Eigenvalue of tau(mu) on the spherical vector with Satake parameter alpha.
pub fn satake_eigenvalue(mu: &[i32], alpha: &[Complex64], p: u64, budget: u128) -> Result<Complex64> {
    let (s, _) = coset_sum(mu, alpha, p, budget)?;
    Ok(s * (p as f64).powf(-norm_star(mu)))
}

/// phi_alpha(mu(p)) as the average of (delta^(1/2) alpha)(A(r)) over left cosets.
pub fn spherical_oracle(mu: &[i32], alpha: &[Complex64], p: u64, budget: u128) -> Result<Complex64> {
    let (s, k) = coset_sum(mu, alpha, p, budget)?;
    Ok(s / k as f64)
}

/// Diagonal valuations of the left coset representatives of K mu(p) K, with multiplicity.
/// Enumerate once, then evaluate the coset-sum oracle at many parameters.
pub struct CosetOracle {
    pub p: u64,
    pub valuations: Vec<Vec<i32>>,
}

impl CosetOracle {
    pub fn new(mu: &[i32], p: u64, budget: u128) -> Result<Self> {
        let reps = left_cosets(mu, p, budget)?;
        Ok(CosetOracle { p, valuations: reps.iter().map(diag_valuations).collect() })
    }

    pub fn spherical(&self, alpha: &[Complex64]) -> Complex64 {
        let s: Complex64 = self.valuations.iter().map(|a| unramified_value(alpha, a, self.p)).sum();
        s / self.valuations.len() as f64
    }
}

/// phi_alpha(mu(p)) as the average over K/K(m) of (delta^(1/2) alpha)(A(k mu(p))).
pub fn spherical_by_k_average(mu: &[i32], alpha: &[Complex64], p: u64, budget: u128) -> Result<Complex64> {
    let nn = mu.len();
    let spread = (mu.iter().max().unwrap() - mu.iter().min().unwrap()).max(1) as u32;
    let ks = enumerate_elements(nn, p, &Subgroup::K, spread, budget)?;
    let t = RatMat::torus(p, mu);
    let vals: Vec<Complex64> = ks
        .par_iter()
        .map(|k| Ok(unramified_value(alpha, &iwasawa_a(&k.to_ratmat().mul(&t))?, p)))
        .collect::<Result<_>>()?;
    Ok(vals.iter().sum::<Complex64>() / ks.len() as f64)
}

fn permutations(n: usize) -> Vec<(Vec<usize>, i64)> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out.into_iter()
        .map(|w| {
            let inv = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| w[i] > w[j]).count();
            (w, if inv % 2 == 0 { 1 } else { -1 })
        })
        .collect()
}

/// Poincare polynomial of S_N at t.
pub fn weyl_poincare(nn: usize, t: f64) -> f64 {
    (1..=nn).map(|k| (0..k).map(|e| t.powi(e as i32)).sum::<f64>()).product()
}

fn is_regular(alpha: &[Complex64]) -> bool {
    let scale = alpha.iter().map(|a| a.norm()).fold(1.0, f64::max);
    (0..alpha.len()).all(|i| (i + 1..alpha.len()).all(|j| (alpha[i] - alpha[j]).norm() > 1e-9 * scale))
}

fn is_trivial(alpha: &[Complex64]) -> bool {
    alpha.iter().all(|a| (a - Complex64::new(1.0, 0.0)).norm() < 1e-12)
}

/// Polynomial in N variables with rational coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    pub terms: BTreeMap<Vec<u32>, Q>,
}

impl Poly {
    fn add_term(&mut self, m: Vec<u32>, c: Q) {
        let e = self.terms.entry(m).or_insert_with(Q::zero);
        *e += c;
        if e.is_zero() {
            let k: Vec<Vec<u32>> = self.terms.iter().filter(|(_, v)| v.is_zero()).map(|(k, _)| k.clone()).collect();
            for k in k {
                self.terms.remove(&k);
            }
        }
    }

    fn mul(&self, o: &Poly) -> Poly {
        let mut out = Poly::default();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let m: Vec<u32> = m1.iter().zip(m2).map(|(a, b)| a + b).collect();
                out.add_term(m, *c1 * *c2);
            }
        }
        out
    }

    /// Exact quotient by x_i - x_j; None if the division leaves a remainder.
    fn div_difference(&self, i: usize, j: usize) -> Option<Poly> {
        let mut f = self.clone();
        let mut quo = Poly::default();
        loop {
            let lead = f.terms.iter().filter(|(m, _)| m[i] > 0).max_by_key(|(m, _)| m[i]).map(|(m, c)| (m.clone(), *c));
            let Some((m, c)) = lead else { break };
            let mut m1 = m.clone();
            m1[i] -= 1;
            quo.add_term(m1.clone(), c);
            f.add_term(m, -c);
            let mut m2 = m1;
            m2[j] += 1;
            f.add_term(m2, c);
        }
        f.terms.is_empty().then_some(quo)
    }

    pub fn eval(&self, x: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                m.iter().zip(x).fold(Complex64::new(q_to_f64(c), 0.0), |acc, (&e, v)| acc * v.powi(e as i32))
            })
            .sum()
    }
}

/// sum_w w(x^lambda prod_{i<j} (x_i - t x_j) / (x_i - x_j)) for dominant
/// lambda >= 0, as an exact polynomial.
pub fn symmetrized_polynomial(lambda: &[u32], t: Q) -> Result<Poly> {
    let nn = lambda.len();
    let mut base = Poly::default();
    base.add_term(lambda.to_vec(), Q::one());
    for i in 0..nn {
        for j in i + 1..nn {
            let mut f = Poly::default();
            let mut a = vec![0; nn];
            a[i] = 1;
            f.add_term(a, Q::one());
            let mut b = vec![0; nn];
            b[j] = 1;
            f.add_term(b, -t);
            base = base.mul(&f);
        }
    }
    let mut num = Poly::default();
    for (w, sgn) in permutations(nn) {
        for (m, c) in &base.terms {
            let mut mw = vec![0; nn];
            for k in 0..nn {
                mw[w[k]] = m[k];
            }
            num.add_term(mw, *c * Q::from_integer(sgn as i128));
        }
    }
    for i in 0..nn {
        for j in i + 1..nn {
            num = num
                .div_difference(i, j)
                .ok_or_else(|| Error::CounterexampleFound("antisymmetrisation not divisible".into()))?;
        }
    }
    Ok(num)
}

/// v_lambda(t) = prod over multiplicities m of prod_{k<=m} (1 - t^k)/(1 - t).
pub fn v_lambda(lambda: &[i32], t: Q) -> Q {
    let mut counts: BTreeMap<i32, u32> = BTreeMap::new();
    for &x in lambda {
        *counts.entry(x).or_default() += 1;
    }
    let mut v = Q::one();
    for &m in counts.values() {
        for k in 1..=m {
            let mut s = Q::zero();
            let mut tp = Q::one();
            for _ in 0..k {
                s += tp;
                tp *= t;
            }
            v *= s;
        }
    }
    v
}

/// Hall-Littlewood polynomial P_mu(x; t) for any integral mu, with the
/// central shift returned separately: P_mu = x^shift * poly.
pub fn hall_littlewood(mu: &[i32], t: Q) -> Result<(Poly, i32)> {
    let d = dominant(mu);
    let lo = *d.last().unwrap();
    let lam: Vec<u32> = d.iter().map(|&x| (x - lo) as u32).collect();
    let num = symmetrized_polynomial(&lam, t)?;
    let v = v_lambda(&d, t);
    let mut out = Poly::default();
    for (m, c) in num.terms {
        out.add_term(m, c / v);
    }
    Ok((out, lo))
}

pub fn hall_littlewood_eval(mu: &[i32], alpha: &[Complex64], q: u64) -> Result<Complex64> {
    let (poly, shift) = hall_littlewood(mu, Q::new(1, q as i128))?;
    let central: Complex64 = alpha.iter().product();
    Ok(poly.eval(alpha) * central.powi(shift))
}

/// Macdonald's formula phi_alpha(mu(p)) = q^(-<mu,rho>)/W(q^-1) sum_w w(...).
/// Regular alpha is evaluated directly, trivial alpha through the exact
/// polynomial; anything else is SingularParameter.
pub fn macdonald_spherical(mu: &[i32], alpha: &[Complex64], q: u64) -> Result<Complex64> {
    let nn = mu.len();
    if alpha.len() != nn {
        return Err(Error::DimensionMismatch("Satake parameter length".into()));
    }
    let d = dominant(mu);
    let t = 1.0 / q as f64;
    let pre = (q as f64).powf(-(pair_rho2(&d) as f64) / 2.0) / weyl_poincare(nn, t);
    if is_regular(alpha) {
        let mut s = Complex64::zero();
        for (w, _) in permutations(nn) {
            let z: Vec<Complex64> = (0..nn).map(|i| alpha[w[i]]).collect();
            let mut term = Complex64::one();
            for i in 0..nn {
                term *= z[i].powi(d[i]);
                for j in i + 1..nn {
                    term *= (z[i] - z[j] * t) / (z[i] - z[j]);
                }
            }
            s += term;
        }
        return Ok(s * pre);
    }
    if is_trivial(alpha) {
        let lo = *d.last().unwrap();
        let lam: Vec<u32> = d.iter().map(|&x| (x - lo) as u32).collect();
        let poly = symmetrized_polynomial(&lam, Q::new(1, q as i128))?;
        return Ok(poly.eval(alpha) * pre);
    }
    Err(Error::SingularParameter)
}

pub fn random_tempered(nn: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..nn).map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))).collect()
}

/// Coordinates with q^-theta <= |alpha_i| <= q^theta.
pub fn random_theta_tempered(nn: usize, q: u64, theta: f64, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..nn)
        .map(|_| {
            let r = (q as f64).powf(rng.gen_range(-theta..=theta));
            Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmplifierLowerBound {
    pub rank: usize,
    pub q: u64,
    pub samples: usize,
    /// min over samples of max_{1<=j<=rank} |lambda(j)|.
    pub min_max: f64,
}

/// Empirical constant for the amplifier lower bound over tempered parameters.
pub fn amplifier_lower_bound(rank: usize, q: u64, samples: usize, rng: &mut impl Rng) -> Result<AmplifierLowerBound> {
    let t = Q::new(1, q as i128);
    let polys: Vec<(Poly, i32)> =
        (1..=rank as i32).map(|j| hall_littlewood(&bracket(rank, j), t)).collect::<Result<_>>()?;
    let mut min_max = f64::INFINITY;
    for _ in 0..samples {
        let a = random_tempered(rank, rng);
        let central: Complex64 = a.iter().product();
        let m = polys.iter().map(|(p, s)| (p.eval(&a) * central.powi(*s)).norm()).fold(0.0, f64::max);
        min_max = min_max.min(m);
    }
    Ok(AmplifierLowerBound { rank, q, samples, min_max })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhiBound {
    pub q: u64,
    /// max over non-central mu of phi_1(mu) / ((||mu||*)^(N(N-1)/2) q^(-||mu||*)).
    pub max_ratio: f64,
    /// max of |phi_alpha(mu)| - max_w |alpha(w mu)| phi_1(mu); <= tol when the bound holds.
    pub max_excess: f64,
    pub checked: usize,
}

/// Dominant cocharacters with sum |mu_i| <= weight.
pub fn dominant_cochars(nn: usize, weight: i32) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    let mut cur = vec![0; nn];
    fn rec(i: usize, prev: i32, left: i32, cur: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for x in (-left..=prev.min(left)).rev() {
            cur[i] = x;
            rec(i + 1, x, left - x.abs(), cur, out);
        }
    }
    rec(0, weight, weight, &mut cur, &mut out);
    out
}

pub fn phibound_check(
    nn: usize,
    q: u64,
    weight: i32,
    samples: usize,
    rng: &mut impl Rng,
    budget: u128,
) -> Result<PhiBound> {
    let ones = vec![Complex64::one(); nn];
    let exp = (nn * (nn - 1) / 2) as i32;
    let mut max_ratio: f64 = 0.0;
    let mut max_excess = f64::NEG_INFINITY;
    let mut checked = 0;
    for mu in dominant_cochars(nn, weight) {
        let phi1 = spherical_oracle(&mu, &ones, q, budget)?.re;
        if !is_central(&mu) {
            let ns = norm_star(&mu);
            max_ratio = max_ratio.max(phi1 / (ns.powi(exp) * (q as f64).powf(-ns)));
        }
        for _ in 0..samples {
            let a = random_tempered(nn, rng);
            let phi = spherical_oracle(&mu, &a, q, budget)?.norm();
            let wmax = permutations(nn)
                .iter()
                .map(|(w, _)| (0..nn).fold(1.0, |acc, i| acc * a[w[i]].norm().powi(mu[i])))
                .fold(0.0, f64::max);
            max_excess = max_excess.max(phi - wmax * phi1);
            checked += 1;
        }
    }
    Ok(PhiBound { q, max_ratio, max_excess, checked })
}

/// H~ double-coset label: (dominant GL_{N-1} part, GL_1 exponent).
pub type HLabel = (Vec<i32>, i32);

/// The labels lambda^(k) = (mu without mu_k, mu_k) for the distinct entries mu_k.
pub fn expected_restriction_labels(mu: &[i32]) -> BTreeSet<HLabel> {
    let d = dominant(mu);
    (0..d.len())
        .map(|k| {
            let mut h = d.clone();
            let c = h.remove(k);
            (h, c)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestrictionDecomposition {
    pub mu: Vec<i32>,
    pub scanned: usize,
    pub found: BTreeSet<HLabel>,
    pub expected: BTreeSet<HLabel>,
}

impl RestrictionDecomposition {
    pub fn exact(&self) -> bool {
        self.found == self.expected
    }
}

/// Scan diag(h, p^c) with h over left-coset representatives of every GL_{N-1}
/// double coset with entries in [min mu, max mu], keeping those in K mu K.
pub fn restriction_decomposition(mu: &[i32], p: u64, budget: u128) -> Result<RestrictionDecomposition> {
    let nn = mu.len();
    if nn < 2 {
        return Err(Error::DimensionMismatch("need rank at least 2".into()));
    }
    let lo = *mu.iter().min().unwrap();
    let hi = *mu.iter().max().unwrap();
    let target = dominant(mu);
    let mut found = BTreeSet::new();
    let mut scanned = 0;
    let mut hs: Vec<Vec<i32>> = Vec::new();
    let mut comps = Vec::new();
    for s in 0..=((hi - lo) * (nn as i32 - 1)) {
        compositions(nn - 1, s, hi - lo, &mut Vec::new(), &mut comps);
    }
    for c in comps {
        let lam: Vec<i32> = c.iter().map(|x| x + lo).collect();
        if lam.windows(2).all(|w| w[0] >= w[1]) {
            hs.push(lam);
        }
    }
    for lam in hs {
        for h in left_cosets(&lam, p, budget)? {
            for c in lo..=hi {
                let g = RatMat::from_fn(nn, p, |i, j| {
                    if i < nn - 1 && j < nn - 1 {
                        *h.get(i, j)
                    } else if i == j {
                        qpow(p, c)
                    } else {
                        Q::zero()
                    }
                });
                scanned += 1;
                if smith_cartan(&g)? == target {
                    found.insert((smith_cartan(&h)?, c));
                }
            }
        }
    }
    Ok(RestrictionDecomposition { mu: mu.to_vec(), scanned, found, expected: expected_restriction_labels(mu) })
}

/// For each label: (label, 2(||lambda||*_H - ||mu||*), -sum |mu_j - mu_k|).
pub fn norm_difference_identity(mu: &[i32]) -> Vec<(HLabel, i64, i64)> {
    let n2 = norm_star2(mu);
    expected_restriction_labels(mu)
        .into_iter()
        .map(|(h, c)| {
            let lhs = norm_star2(&h) - n2;
            let rhs = -mu.iter().map(|&m| (m - c).abs() as i64).sum::<i64>();
            ((h, c), lhs, rhs)
        })
        .collect()
}

/// q^(-||mu||*) sum_i vol(K_H lambda^(i) K_H) phi^H_alpha(lambda^(i)) with
/// alpha = (alpha_h, alpha_z) on GL_{N-1} x GL_1.
pub fn hecke_restriction_value(
    mu: &[i32],
    alpha_h: &[Complex64],
    alpha_z: Complex64,
    p: u64,
    budget: u128,
) -> Result<Complex64> {
    if is_central(mu) {
        return Err(Error::CentralMu);
    }
    let mut s = Complex64::zero();
    for (h, c) in expected_restriction_labels(mu) {
        let (sum, _) = coset_sum(&h, alpha_h, p, budget)?;
        s += sum * alpha_z.powi(c);
    }
    Ok(s * (p as f64).powf(-norm_star(mu)))
}

/// theta-tempered parameter for GL_{N-1} x GL_1 with unitary central character.
pub fn random_h_parameter(n: usize, q: u64, theta: f64, rng: &mut impl Rng) -> (Vec<Complex64>, Complex64) {
    let mut h = random_theta_tempered(n, q, theta, rng);
    if n > 1 {
        let r: f64 = h[..n - 1].iter().map(|x| x.norm()).product();
        let target = 1.0 / r;
        let lim = (q as f64).powf(theta);
        if target <= lim && target >= 1.0 / lim {
            h[n - 1] = Complex64::from_polar(target, h[n - 1].arg());
        } else {
            h = random_tempered(n, rng);
        }
    } else {
        h[0] = Complex64::from_polar(1.0, h[0].arg());
    }
    let z = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
    (h, z)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeightCheck {
    pub mu: Vec<i32>,
    pub reps: usize,
    pub expected: (f64, f64),
    pub failures: usize,
}

/// max |entry|_p of r and r^-1 against {q^max mu, q^max(-mu)} for every coset rep.
pub fn hecke_height_check(mu: &[i32], p: u64, budget: u128) -> Result<HeightCheck> {
    let qf = p as f64;
    let a = qf.powi(*mu.iter().max().unwrap());
    let b = qf.powi(-*mu.iter().min().unwrap());
    let reps = left_cosets(mu, p, budget)?;
    let mut failures = 0;
    for r in &reps {
        let x = r.max_norm();
        let y = r.inv()?.max_norm();
        let mut got = [x, y];
        got.sort_by(f64::total_cmp);
        let mut want = [a, b];
        want.sort_by(f64::total_cmp);
        if got != want {
            failures += 1;
        }
    }
    Ok(HeightCheck { mu: mu.to_vec(), reps: reps.len(), expected: (a, b), failures })
}
