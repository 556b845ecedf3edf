//! Residue rings Z/p^L, p-adic rationals and exact cyclotomic integers.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Q = Ratio<i128>;

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = ((r as u128 * b as u128) % m as u128) as u64;
        }
        b = ((b as u128 * b as u128) % m as u128) as u64;
        e >>= 1;
    }
    r
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let eg = (a as i128 % m as i128).extended_gcd(&(m as i128));
    if eg.gcd != 1 {
        return None;
    }
    Some(eg.x.rem_euclid(m as i128) as u64)
}

/// Reduce a signed integer into `[0, m)`.
pub fn rem(x: i128, m: u64) -> u64 {
    x.rem_euclid(m as i128) as u64
}

/// p-adic valuation of a nonzero integer; `u32::MAX` for zero.
pub fn val_int(x: i128, p: u64) -> u32 {
    if x == 0 {
        return u32::MAX;
    }
    let p = p as i128;
    let mut x = x;
    let mut v = 0;
    while x % p == 0 {
        x /= p;
        v += 1;
    }
    v
}

/// p-adic valuation of a rational; `i32::MAX` for zero.
pub fn val_q(x: &Q, p: u64) -> i32 {
    if x.is_zero() {
        return i32::MAX;
    }
    val_int(*x.numer(), p) as i32 - val_int(*x.denom(), p) as i32
}

pub fn ipow(p: u64, e: u32) -> u64 {
    p.checked_pow(e).expect("prime power overflows u64")
}

pub fn qpow(p: u64, e: i32) -> Q {
    let b = Q::from_integer(p as i128);
    if e >= 0 {
        num_traits::pow(b, e as usize)
    } else {
        num_traits::pow(b.recip(), (-e) as usize)
    }
}

/// The ring Z/p^L standing in for O/p^L.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResRing {
    pub p: u64,
    pub level: u32,
}

impl ResRing {
    pub fn new(p: u64, level: u32) -> Result<Self> {
        if p == 2 || !is_prime(p) {
            return Err(Error::InvalidConfig(format!("p = {p} must be an odd prime")));
        }
        if level == 0 {
            return Err(Error::InvalidConfig("level must be at least 1".into()));
        }
        match p.checked_pow(level) {
            Some(m) if m < (1 << 31) => Ok(ResRing { p, level }),
            _ => Err(Error::InvalidConfig(format!("{p}^{level} is too large"))),
        }
    }

    pub fn modulus(&self) -> u64 {
        ipow(self.p, self.level)
    }

    pub fn elem(&self, v: i128) -> ResElem {
        ResElem {
            ring: *self,
            value: rem(v, self.modulus()),
        }
    }

    pub fn with_level(&self, level: u32) -> Result<Self> {
        ResRing::new(self.p, level)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ResElem {
    pub ring: ResRing,
    pub value: u64,
}

impl ResElem {
    fn check(&self, o: &ResElem) -> Result<()> {
        if self.ring != o.ring {
            return Err(Error::SpecMismatch(format!(
                "Z/{}^{} vs Z/{}^{}",
                self.ring.p, self.ring.level, o.ring.p, o.ring.level
            )));
        }
        Ok(())
    }

    pub fn add(&self, o: &ResElem) -> Result<ResElem> {
        self.check(o)?;
        Ok(self.ring.elem(self.value as i128 + o.value as i128))
    }

    pub fn sub(&self, o: &ResElem) -> Result<ResElem> {
        self.check(o)?;
        Ok(self.ring.elem(self.value as i128 - o.value as i128))
    }

    pub fn mul(&self, o: &ResElem) -> Result<ResElem> {
        self.check(o)?;
        Ok(self.ring.elem(self.value as i128 * o.value as i128))
    }

    pub fn neg(&self) -> ResElem {
        self.ring.elem(-(self.value as i128))
    }

    pub fn is_unit(&self) -> bool {
        self.value % self.ring.p != 0
    }

    pub fn inv(&self) -> Result<ResElem> {
        inv_mod(self.value, self.ring.modulus())
            .map(|v| ResElem {
                ring: self.ring,
                value: v,
            })
            .ok_or(Error::NonUnit)
    }

    /// Valuation, capped at the ring level for zero.
    pub fn valuation(&self) -> u32 {
        val_int(self.value as i128, self.ring.p).min(self.ring.level)
    }

    pub fn reduce_to(&self, level: u32) -> Result<ResElem> {
        if level > self.ring.level {
            return Err(Error::LevelTooLow {
                have: self.ring.level,
                need: level,
            });
        }
        Ok(self.ring.with_level(level)?.elem(self.value as i128))
    }

    /// Lift using the canonical representative in [0, p^L).
    pub fn lift_to(&self, level: u32) -> Result<ResElem> {
        Ok(self.ring.with_level(level)?.elem(self.value as i128))
    }
}

impl fmt::Display for ResElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}^{}", self.value, self.ring.p, self.ring.level)
    }
}

/// A rational number viewed in Q_p.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PadicRational {
    pub p: u64,
    pub value: Q,
}

impl PadicRational {
    pub fn new(p: u64, value: Q) -> Self {
        PadicRational { p, value }
    }

    pub fn from_parts(p: u64, numer: i128, p_exp: i32) -> Self {
        PadicRational {
            p,
            value: Q::from_integer(numer) * qpow(p, p_exp),
        }
    }

    pub fn valuation(&self) -> i32 {
        val_q(&self.value, self.p)
    }

    pub fn abs(&self) -> f64 {
        if self.value.is_zero() {
            0.0
        } else {
            (self.p as f64).powi(-self.valuation())
        }
    }

    /// The p-adic fractional part as `c / p^k` with `0 <= c < p^k`.
    pub fn frac(&self) -> (u64, u32) {
        let v = self.valuation();
        if v >= 0 {
            return (0, 0);
        }
        let k = (-v) as u32;
        let pk = ipow(self.p, k);
        let num = *self.value.numer();
        let den = *self.value.denom();
        let den_unit = den / (pk as i128);
        let c = rem(num, pk) as u128 * inv_mod(rem(den_unit, pk), pk).unwrap() as u128;
        ((c % pk as u128) as u64, k)
    }
}

/// The additive character x -> exp(2 pi i {x}_p), trivial exactly on Z_p.
pub fn additive_char(x: &PadicRational) -> Root {
    let (c, k) = x.frac();
    Root::new(ipow(x.p, k), c)
}

/// A root of unity zeta_m^e.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Root {
    pub m: u64,
    pub e: u64,
}

impl Root {
    pub fn new(m: u64, e: u64) -> Self {
        Root { m, e: e % m }
    }

    pub fn one() -> Self {
        Root { m: 1, e: 0 }
    }

    pub fn is_one(&self) -> bool {
        self.e == 0
    }

    /// Re-express in a larger cyclotomic order; `self.m` must divide `m`.
    pub fn in_order(&self, m: u64) -> Root {
        assert!(m % self.m == 0, "order {} does not divide {}", self.m, m);
        Root::new(m, self.e * (m / self.m))
    }

    /// Smallest order in which this root lives.
    pub fn normalized(&self) -> Root {
        let g = self.e.gcd(&self.m);
        Root::new(self.m / g, self.e / g)
    }

    pub fn mul(&self, o: &Root) -> Root {
        let m = self.m.lcm(&o.m);
        let a = self.in_order(m);
        let b = o.in_order(m);
        Root::new(m, a.e + b.e)
    }

    pub fn inv(&self) -> Root {
        Root::new(self.m, self.m - self.e)
    }

    pub fn pow(&self, k: i64) -> Root {
        Root::new(self.m, rem(self.e as i128 * k as i128, self.m))
    }

    pub fn embed(&self) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * PI * self.e as f64 / self.m as f64)
    }
}

/// Cyclotomic polynomial data for Q(zeta_m): Phi_m stored sparsely.
#[derive(Debug)]
pub struct Cyclotomic {
    pub m: u64,
    pub phi: usize,
    /// Nonzero lower-order terms of Phi_m as (degree, coefficient); the leading term x^phi is implicit.
    terms: Vec<(usize, i64)>,
}

fn dense_cyclotomic(n: u64, memo: &mut HashMap<u64, Vec<i64>>) -> Vec<i64> {
    if let Some(v) = memo.get(&n) {
        return v.clone();
    }
    // x^n - 1 divided by Phi_d for every proper divisor d.
    let mut num = vec![0i64; n as usize + 1];
    num[0] = -1;
    num[n as usize] = 1;
    for d in 1..n {
        if n % d == 0 {
            let den = dense_cyclotomic(d, memo);
            num = poly_div_exact(&num, &den);
        }
    }
    memo.insert(n, num.clone());
    num
}

fn poly_div_exact(num: &[i64], den: &[i64]) -> Vec<i64> {
    let dn = den.len() - 1;
    let mut r = num.to_vec();
    let nq = num.len() - dn;
    let mut q = vec![0i64; nq];
    for k in (0..nq).rev() {
        let c = r[k + dn];
        q[k] = c;
        if c != 0 {
            for (j, &d) in den.iter().enumerate() {
                r[k + j] -= c * d;
            }
        }
    }
    debug_assert!(r.iter().all(|&x| x == 0));
    q
}

fn radical(mut m: u64) -> u64 {
    let mut r = 1;
    let mut d = 2;
    while d * d <= m {
        if m % d == 0 {
            r *= d;
            while m % d == 0 {
                m /= d;
            }
        }
        d += 1;
    }
    if m > 1 {
        r *= m;
    }
    r
}

impl Cyclotomic {
    fn build(m: u64) -> Cyclotomic {
        let rad = radical(m);
        let mut memo = HashMap::new();
        let base = dense_cyclotomic(rad, &mut memo);
        let stretch = (m / rad) as usize;
        let phi = (base.len() - 1) * stretch;
        let terms = base[..base.len() - 1]
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(k, &c)| (k * stretch, c))
            .collect();
        Cyclotomic { m, phi, terms }
    }

    /// Context for order `m`, cached process-wide.
    pub fn get(m: u64) -> Arc<Cyclotomic> {
        static CACHE: OnceLock<Mutex<HashMap<u64, Arc<Cyclotomic>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut g = cache.lock().unwrap();
        g.entry(m)
            .or_insert_with(|| Arc::new(Cyclotomic::build(m)))
            .clone()
    }

    /// Reduce a dense polynomial modulo Phi_m into the power basis.
    pub fn reduce(&self, mut v: Vec<i64>) -> Vec<i64> {
        let phi = self.phi;
        if v.len() > phi {
            for d in (phi..v.len()).rev() {
                let c = v[d];
                if c != 0 {
                    let shift = d - phi;
                    for &(k, a) in &self.terms {
                        v[shift + k] -= c * a;
                    }
                    v[d] = 0;
                }
            }
        }
        v.resize(phi, 0);
        v
    }
}

/// An element of Z[zeta_m] in the power basis modulo Phi_m.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CycInt {
    pub m: u64,
    pub coeffs: Vec<i64>,
}

impl CycInt {
    pub fn zero(m: u64) -> Self {
        let phi = Cyclotomic::get(m).phi;
        CycInt {
            m,
            coeffs: vec![0; phi],
        }
    }

    pub fn from_int(m: u64, c: i64) -> Self {
        let mut z = CycInt::zero(m);
        z.coeffs[0] = c;
        z
    }

    /// From coefficients on zeta^0, ..., zeta^(k-1) for any k.
    pub fn from_dense(m: u64, dense: Vec<i64>) -> Self {
        let ctx = Cyclotomic::get(m);
        let mut folded = vec![0i64; m as usize];
        for (k, c) in dense.into_iter().enumerate() {
            folded[k % m as usize] += c;
        }
        CycInt {
            m,
            coeffs: ctx.reduce(folded),
        }
    }

    pub fn from_root(r: &Root) -> Self {
        let mut d = vec![0i64; r.e as usize + 1];
        d[r.e as usize] = 1;
        CycInt::from_dense(r.m, d)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// Rational integer value if the element lies in Z.
    pub fn as_integer(&self) -> Option<i64> {
        if self.coeffs.iter().skip(1).all(|&c| c == 0) {
            Some(self.coeffs.first().copied().unwrap_or(0))
        } else {
            None
        }
    }

    pub fn in_order(&self, m: u64) -> CycInt {
        assert!(m % self.m == 0);
        if m == self.m {
            return self.clone();
        }
        let s = (m / self.m) as usize;
        let mut d = vec![0i64; (self.coeffs.len().max(1) - 1) * s + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            d[k * s] += c;
        }
        CycInt::from_dense(m, d)
    }

    fn common(&self, o: &CycInt) -> (CycInt, CycInt) {
        let m = self.m.lcm(&o.m);
        (self.in_order(m), o.in_order(m))
    }

    pub fn add(&self, o: &CycInt) -> CycInt {
        let (a, b) = self.common(o);
        CycInt {
            m: a.m,
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn sub(&self, o: &CycInt) -> CycInt {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> CycInt {
        CycInt {
            m: self.m,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn scale(&self, k: i64) -> CycInt {
        CycInt {
            m: self.m,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    pub fn mul(&self, o: &CycInt) -> CycInt {
        let (a, b) = self.common(o);
        let mut d = vec![0i64; a.coeffs.len() + b.coeffs.len()];
        for (i, &x) in a.coeffs.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.coeffs.iter().enumerate() {
                d[i + j] += x * y;
            }
        }
        CycInt::from_dense(a.m, d)
    }

    /// Complex conjugate, zeta -> zeta^(-1).
    pub fn conj(&self) -> CycInt {
        let m = self.m as usize;
        let mut d = vec![0i64; m];
        for (k, &c) in self.coeffs.iter().enumerate() {
            d[(m - k) % m] += c;
        }
        CycInt::from_dense(self.m, d)
    }

    pub fn embed(&self) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c != 0 {
                s += Complex64::from_polar(c as f64, 2.0 * PI * k as f64 / self.m as f64);
            }
        }
        s
    }
}

impl fmt::Display for CycInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(k, c)| format!("{c}*z{}^{k}", self.m))
            .collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// Integer combination of m-th roots of unity, kept in the group ring until reduced.
#[derive(Clone, Debug)]
pub struct CycAccumulator {
    pub m: u64,
    pub counts: Vec<i64>,
}

impl CycAccumulator {
    pub fn new(m: u64) -> Self {
        CycAccumulator {
            m,
            counts: vec![0; m as usize],
        }
    }

    pub fn add_root(&mut self, r: &Root, c: i64) {
        let r = r.in_order(self.m);
        self.counts[r.e as usize] += c;
    }

    pub fn merge(&mut self, o: &CycAccumulator) {
        assert_eq!(self.m, o.m);
        for (a, b) in self.counts.iter_mut().zip(&o.counts) {
            *a += b;
        }
    }

    pub fn to_cycint(&self) -> CycInt {
        CycInt::from_dense(self.m, self.counts.clone())
    }

    pub fn is_zero(&self) -> bool {
        self.to_cycint().is_zero()
    }

    pub fn embed(&self) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (k, &c) in self.counts.iter().enumerate() {
            if c != 0 {
                s += Complex64::from_polar(c as f64, 2.0 * PI * k as f64 / self.m as f64);
            }
        }
        s
    }
}

pub fn cyc_is_zero(z: &CycInt) -> bool {
    z.is_zero()
}

/// Absolute value |x|_p of a rational.
pub fn abs_p(x: &Q, p: u64) -> f64 {
    if x.is_zero() {
        0.0
    } else {
        (p as f64).powi(-val_q(x, p))
    }
}

pub fn q_to_f64(x: &Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

pub fn q_abs(x: &Q) -> Q {
    x.abs()
}
