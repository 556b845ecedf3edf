//! Matrices over Z/p^L and Q, congruence subgroups, coset enumeration and
//! Cartan / Iwasawa invariants.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{inv_mod, ipow, qpow, rem, val_int, val_q, ResRing, Q};
use crate::error::{Error, Result};

pub const MAX_DIM: usize = 4;

/// Square matrix over Z/p^L with at most `MAX_DIM` rows.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResMat {
    pub n: usize,
    pub ring: ResRing,
    e: [u32; MAX_DIM * MAX_DIM],
}

impl fmt::Debug for ResMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for ResMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = (0..self.n)
            .map(|i| {
                let r: Vec<String> = (0..self.n).map(|j| self.get(i, j).to_string()).collect();
                format!("[{}]", r.join(","))
            })
            .collect();
        write!(f, "[{}] mod {}^{}", rows.join(","), self.ring.p, self.ring.level)
    }
}

impl PartialOrd for ResMat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ResMat {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then(self.entries().cmp(other.entries()))
    }
}

impl ResMat {
    pub fn zero(n: usize, ring: ResRing) -> Self {
        assert!(n >= 1 && n <= MAX_DIM, "dimension {n} unsupported");
        ResMat {
            n,
            ring,
            e: [0; MAX_DIM * MAX_DIM],
        }
    }

    pub fn identity(n: usize, ring: ResRing) -> Self {
        let mut m = ResMat::zero(n, ring);
        for i in 0..n {
            m.e[i * n + i] = 1 % ring.modulus() as u32;
        }
        m
    }

    pub fn from_fn(n: usize, ring: ResRing, f: impl Fn(usize, usize) -> i128) -> Self {
        let mut m = ResMat::zero(n, ring);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn from_rows(ring: ResRing, rows: &[Vec<i64>]) -> Self {
        let n = rows.len();
        ResMat::from_fn(n, ring, |i, j| rows[i][j] as i128)
    }

    pub fn diag(ring: ResRing, d: &[i128]) -> Self {
        ResMat::from_fn(d.len(), ring, |i, j| if i == j { d[i] } else { 0 })
    }

    pub fn modulus(&self) -> u64 {
        self.ring.modulus()
    }

    pub fn p(&self) -> u64 {
        self.ring.p
    }

    pub fn level(&self) -> u32 {
        self.ring.level
    }

    pub fn entries(&self) -> &[u32] {
        &self.e[..self.n * self.n]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.e[i * self.n + j] as u64
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: i128) {
        self.e[i * self.n + j] = rem(v, self.modulus()) as u32;
    }

    /// Entry as a signed representative in (-m/2, m/2].
    pub fn get_signed(&self, i: usize, j: usize) -> i64 {
        let m = self.modulus() as i64;
        let v = self.get(i, j) as i64;
        if v > m / 2 {
            v - m
        } else {
            v
        }
    }

    fn same(&self, o: &ResMat) {
        assert!(
            self.n == o.n && self.ring == o.ring,
            "matrix shape or ring mismatch"
        );
    }

    pub fn try_mul(&self, o: &ResMat) -> Result<ResMat> {
        if self.ring != o.ring {
            return Err(Error::SpecMismatch("matrices over different rings".into()));
        }
        if self.n != o.n {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.n, o.n)));
        }
        Ok(self.mul(o))
    }

    pub fn mul(&self, o: &ResMat) -> ResMat {
        self.same(o);
        let n = self.n;
        let m = self.modulus();
        let mut r = ResMat::zero(n, self.ring);
        for i in 0..n {
            for j in 0..n {
                let mut s: u64 = 0;
                for k in 0..n {
                    s += self.e[i * n + k] as u64 * o.e[k * n + j] as u64;
                    if s >= 1 << 62 {
                        s %= m;
                    }
                }
                r.e[i * n + j] = (s % m) as u32;
            }
        }
        r
    }

    pub fn add(&self, o: &ResMat) -> ResMat {
        self.same(o);
        let mut r = *self;
        for i in 0..self.n * self.n {
            r.e[i] = ((self.e[i] as u64 + o.e[i] as u64) % self.modulus()) as u32;
        }
        r
    }

    pub fn sub(&self, o: &ResMat) -> ResMat {
        self.same(o);
        let mut r = *self;
        for i in 0..self.n * self.n {
            r.e[i] = rem(self.e[i] as i128 - o.e[i] as i128, self.modulus()) as u32;
        }
        r
    }

    pub fn scale(&self, c: i128) -> ResMat {
        let mut r = *self;
        for i in 0..self.n * self.n {
            r.e[i] = rem(self.e[i] as i128 * c, self.modulus()) as u32;
        }
        r
    }

    pub fn transpose(&self) -> ResMat {
        ResMat::from_fn(self.n, self.ring, |i, j| self.get(j, i) as i128)
    }

    pub fn det(&self) -> u64 {
        let n = self.n;
        let m = self.modulus() as i128;
        let a = |i: usize, j: usize| self.get(i, j) as i128;
        let d = match n {
            1 => a(0, 0),
            2 => a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0),
            _ => {
                let mut s: i128 = 0;
                for j in 0..n {
                    let minor = self.minor(0, j);
                    let c = a(0, j) * minor.det() as i128 % m;
                    if j % 2 == 0 {
                        s += c;
                    } else {
                        s -= c;
                    }
                }
                s
            }
        };
        rem(d, self.modulus())
    }

    fn minor(&self, r: usize, c: usize) -> ResMat {
        let n = self.n - 1;
        ResMat::from_fn(n, self.ring, |i, j| {
            let ii = if i < r { i } else { i + 1 };
            let jj = if j < c { j } else { j + 1 };
            self.get(ii, jj) as i128
        })
    }

    /// Determinant of the bottom-right k x k block.
    pub fn trailing_minor(&self, k: usize) -> u64 {
        if k == 0 {
            return 1 % self.modulus();
        }
        let s = self.n - k;
        ResMat::from_fn(k, self.ring, |i, j| self.get(s + i, s + j) as i128).det()
    }

    pub fn is_invertible(&self) -> bool {
        self.det() % self.p() != 0
    }

    pub fn inv(&self) -> Result<ResMat> {
        let n = self.n;
        let m = self.modulus();
        let mut a: Vec<Vec<i128>> = (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j) as i128).collect())
            .collect();
        let mut b: Vec<Vec<i128>> = (0..n)
            .map(|i| (0..n).map(|j| i128::from(i == j)).collect())
            .collect();
        let mi = m as i128;
        for c in 0..n {
            let piv = (c..n)
                .find(|&r| a[r][c] % self.p() as i128 != 0)
                .ok_or(Error::NotInvertible)?;
            a.swap(c, piv);
            b.swap(c, piv);
            let iv = inv_mod(a[c][c] as u64, m).unwrap() as i128;
            for j in 0..n {
                a[c][j] = a[c][j] * iv % mi;
                b[c][j] = b[c][j] * iv % mi;
            }
            for r in 0..n {
                if r != c && a[r][c] != 0 {
                    let f = a[r][c];
                    for j in 0..n {
                        a[r][j] = (a[r][j] - f * a[c][j]).rem_euclid(mi);
                        b[r][j] = (b[r][j] - f * b[c][j]).rem_euclid(mi);
                    }
                }
            }
        }
        Ok(ResMat::from_fn(n, self.ring, |i, j| b[i][j]))
    }

    pub fn reduce_to(&self, level: u32) -> Result<ResMat> {
        if level > self.level() {
            return Err(Error::LevelTooLow {
                have: self.level(),
                need: level,
            });
        }
        let ring = self.ring.with_level(level)?;
        Ok(ResMat::from_fn(self.n, ring, |i, j| self.get(i, j) as i128))
    }

    /// Lift with canonical representatives.
    pub fn lift_to(&self, level: u32) -> Result<ResMat> {
        let ring = self.ring.with_level(level)?;
        Ok(ResMat::from_fn(self.n, ring, |i, j| self.get(i, j) as i128))
    }

    pub fn is_identity(&self) -> bool {
        *self == ResMat::identity(self.n, self.ring)
    }

    /// True when g is congruent to 1 modulo p^depth.
    pub fn is_congruent_one(&self, depth: u32) -> bool {
        let pd = ipow(self.p(), depth.min(self.level()));
        (0..self.n).all(|i| {
            (0..self.n).all(|j| {
                let v = self.get(i, j) as i128 - i128::from(i == j);
                v.rem_euclid(pd as i128) == 0
            })
        })
    }

    /// Off-diagonal entries all divisible by p^depth.
    pub fn off_diagonal_divisible(&self, depth: u32) -> bool {
        let pd = ipow(self.p(), depth.min(self.level()));
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self.get(i, j) % pd == 0))
    }

    /// Strictly lower entries divisible by p^depth.
    pub fn lower_divisible(&self, depth: u32) -> bool {
        let pd = ipow(self.p(), depth.min(self.level()));
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) % pd == 0))
    }

    /// Compact integer code, unique per (n, ring) shape.
    pub fn code(&self) -> u128 {
        let m = self.modulus() as u128;
        self.entries()
            .iter()
            .fold(0u128, |acc, &v| acc.wrapping_mul(m).wrapping_add(v as u128))
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Block embedding h -> diag(h, 1).
    pub fn embed_upper_left(&self) -> ResMat {
        let n = self.n + 1;
        ResMat::from_fn(n, self.ring, |i, j| {
            if i < self.n && j < self.n {
                self.get(i, j) as i128
            } else {
                i128::from(i == j)
            }
        })
    }

    /// The upper-left (n-1) x (n-1) block.
    pub fn upper_left_block(&self) -> ResMat {
        let k = self.n - 1;
        ResMat::from_fn(k, self.ring, |i, j| self.get(i, j) as i128)
    }

    pub fn to_ratmat(&self) -> RatMat {
        RatMat::from_fn(self.n, self.p(), |i, j| Q::from_integer(self.get(i, j) as i128))
    }
}

/// Compact subgroups and the conjugated types inside K = GL_N(O).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Subgroup {
    K,
    /// K(m) = ker(K -> GL_N(O/p^m)).
    Congruence(u32),
    /// Upper triangular matrices in K.
    Borel,
    /// Diagonal matrices in K.
    TorusCompact,
    /// T_c K(l): off-diagonal entries in p^l.
    TorusTilde(u32),
    /// diag(h, 1).
    HEmbedded,
    /// diag(h, z).
    HTildeEmbedded,
    /// diag(h, 1) with h in K_H(m).
    KH(u32),
    /// conj * T~(depth) * conj^-1.
    TypeGroup { conj: ResMat, depth: u32 },
    /// The part of `TypeGroup` inside K(1).
    TypeGroup1 { conj: ResMat, depth: u32 },
}

impl Subgroup {
    pub fn name(&self) -> String {
        match self {
            Subgroup::K => "K".into(),
            Subgroup::Congruence(m) => format!("K{m}"),
            Subgroup::Borel => "B".into(),
            Subgroup::TorusCompact => "Tc".into(),
            Subgroup::TorusTilde(l) => format!("Tt{l}"),
            Subgroup::HEmbedded => "H".into(),
            Subgroup::HTildeEmbedded => "Ht".into(),
            Subgroup::KH(m) => format!("KH{m}"),
            Subgroup::TypeGroup { conj, depth } => format!("J{depth}x{:x}", conj.code()),
            Subgroup::TypeGroup1 { conj, depth } => format!("Jone{depth}x{:x}", conj.code()),
        }
    }

    fn required_level(&self) -> u32 {
        match self {
            Subgroup::Congruence(m) | Subgroup::KH(m) => (*m).max(1),
            Subgroup::TorusTilde(l) => (*l).max(1),
            Subgroup::TypeGroup { depth, .. } | Subgroup::TypeGroup1 { depth, .. } => (*depth).max(1),
            _ => 1,
        }
    }
}

fn last_row_col_trivial(g: &ResMat, need_one: bool) -> bool {
    let n = g.n;
    let last = n - 1;
    for k in 0..last {
        if g.get(last, k) != 0 || g.get(k, last) != 0 {
            return false;
        }
    }
    if need_one {
        g.get(last, last) == 1
    } else {
        g.get(last, last) % g.p() != 0
    }
}

/// Membership of `g` in the image of `tag` at the working level of `g`.
pub fn membership(g: &ResMat, tag: &Subgroup) -> Result<bool> {
    let need = tag.required_level();
    if g.level() < need {
        return Err(Error::LevelTooLow {
            have: g.level(),
            need,
        });
    }
    if !g.is_invertible() {
        return Ok(false);
    }
    Ok(match tag {
        Subgroup::K => true,
        Subgroup::Congruence(m) => g.is_congruent_one(*m),
        Subgroup::Borel => g.lower_divisible(g.level()),
        Subgroup::TorusCompact => g.off_diagonal_divisible(g.level()),
        Subgroup::TorusTilde(l) => g.off_diagonal_divisible(*l),
        Subgroup::HEmbedded => last_row_col_trivial(g, true),
        Subgroup::HTildeEmbedded => last_row_col_trivial(g, false),
        Subgroup::KH(m) => last_row_col_trivial(g, true) && g.is_congruent_one(*m),
        Subgroup::TypeGroup { conj, depth } => {
            let c = conj.lift_to(g.level())?;
            c.inv()?.mul(g).mul(&c).off_diagonal_divisible(*depth)
        }
        Subgroup::TypeGroup1 { conj, depth } => {
            let c = conj.lift_to(g.level())?;
            g.is_congruent_one(1) && c.inv()?.mul(g).mul(&c).off_diagonal_divisible(*depth)
        }
    })
}

/// Odometer over tuples in [0, radix)^len.
pub fn for_each_tuple(len: usize, radix: u64, mut f: impl FnMut(&[u64])) {
    let mut t = vec![0u64; len];
    loop {
        f(&t);
        let mut k = 0;
        loop {
            if k == len {
                return;
            }
            t[k] += 1;
            if t[k] < radix {
                break;
            }
            t[k] = 0;
            k += 1;
        }
    }
}

fn units_mod(m: u64, p: u64) -> Vec<u64> {
    (0..m).filter(|v| v % p != 0).collect()
}

fn gl_count(n: usize, p: u64, level: u32) -> u128 {
    let mut c: u128 = 1;
    let q = p as u128;
    for i in 0..n as u32 {
        c *= q.pow(n as u32) - q.pow(i);
    }
    c * q.pow((level - 1) * (n * n) as u32)
}

/// Number of elements of the image of `tag` in GL_n(Z/p^level).
pub fn subgroup_order(n: usize, p: u64, tag: &Subgroup, level: u32) -> u128 {
    let q = p as u128;
    let units = (q - 1) * q.pow(level - 1);
    let off = (n * (n - 1)) as u32;
    match tag {
        Subgroup::K => gl_count(n, p, level),
        Subgroup::Congruence(m) => q.pow(level.saturating_sub(*m) * (n * n) as u32),
        Subgroup::Borel => units.pow(n as u32) * q.pow(level * off / 2),
        Subgroup::TorusCompact => units.pow(n as u32),
        Subgroup::TorusTilde(l) | Subgroup::TypeGroup { depth: l, .. } => {
            units.pow(n as u32) * q.pow(level.saturating_sub(*l) * off)
        }
        Subgroup::TypeGroup1 { depth: l, .. } => {
            q.pow((level - 1) * n as u32) * q.pow(level.saturating_sub((*l).max(1)) * off)
        }
        Subgroup::HEmbedded => gl_count(n - 1, p, level),
        Subgroup::HTildeEmbedded => gl_count(n - 1, p, level) * units,
        Subgroup::KH(0) => gl_count(n - 1, p, level),
        Subgroup::KH(m) => q.pow(level.saturating_sub(*m) * ((n - 1) * (n - 1)) as u32),
    }
}

fn check_budget(what: &str, needed: u128, budget: u128) -> Result<()> {
    if needed > budget {
        Err(Error::BudgetExceeded {
            what: what.into(),
            needed,
            budget,
        })
    } else {
        Ok(())
    }
}

/// All elements of the image of `tag` in GL_n(Z/p^level), sorted lexicographically.
pub fn enumerate_elements(
    n: usize,
    p: u64,
    tag: &Subgroup,
    level: u32,
    budget: u128,
) -> Result<Vec<ResMat>> {
    let ring = ResRing::new(p, level)?;
    let need = tag.required_level();
    if level < need {
        return Err(Error::LevelTooLow { have: level, need });
    }
    let size = subgroup_order(n, p, tag, level);
    check_budget(&format!("{} in GL_{n}(Z/{p}^{level})", tag.name()), size, budget)?;
    let m = ring.modulus();
    let mut out = Vec::with_capacity(size as usize);
    match tag {
        Subgroup::K => {
            for_each_tuple(n * n, m, |t| {
                let g = ResMat::from_fn(n, ring, |i, j| t[i * n + j] as i128);
                if g.is_invertible() {
                    out.push(g);
                }
            });
        }
        Subgroup::Congruence(mm) => {
            let step = ipow(p, (*mm).min(level));
            let radix = m / step;
            for_each_tuple(n * n, radix, |t| {
                out.push(ResMat::from_fn(n, ring, |i, j| {
                    i128::from(i == j) + (step * t[i * n + j]) as i128
                }));
            });
        }
        Subgroup::Borel | Subgroup::TorusCompact | Subgroup::TorusTilde(_) => {
            let depth = match tag {
                Subgroup::Borel => 0,
                Subgroup::TorusCompact => level,
                Subgroup::TorusTilde(l) => (*l).min(level),
                _ => unreachable!(),
            };
            let step = ipow(p, depth);
            let radix_off = m / step;
            let us = units_mod(m, p);
            let offs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| match tag {
                    Subgroup::Borel => i < j,
                    _ => i != j,
                })
                .collect();
            for_each_tuple(n, us.len() as u64, |d| {
                for_each_tuple(offs.len(), radix_off, |o| {
                    let mut g = ResMat::zero(n, ring);
                    for i in 0..n {
                        g.set(i, i, us[d[i] as usize] as i128);
                    }
                    for (k, &(i, j)) in offs.iter().enumerate() {
                        g.set(i, j, (step * o[k]) as i128);
                    }
                    out.push(g);
                });
            });
        }
        Subgroup::HEmbedded | Subgroup::HTildeEmbedded | Subgroup::KH(_) => {
            let inner_tag = match tag {
                Subgroup::KH(mm) if *mm > 0 => Subgroup::Congruence(*mm),
                _ => Subgroup::K,
            };
            let inner = enumerate_elements(n - 1, p, &inner_tag, level, budget)?;
            let zs: Vec<u64> = if matches!(tag, Subgroup::HTildeEmbedded) {
                units_mod(m, p)
            } else {
                vec![1]
            };
            for h in &inner {
                for &z in &zs {
                    let mut g = h.embed_upper_left();
                    g.set(n - 1, n - 1, z as i128);
                    out.push(g);
                }
            }
        }
        Subgroup::TypeGroup { conj, depth } | Subgroup::TypeGroup1 { conj, depth } => {
            let c = conj.lift_to(level)?;
            let ci = c.inv()?;
            let base = enumerate_elements(n, p, &Subgroup::TorusTilde(*depth), level, budget)?;
            let one = matches!(tag, Subgroup::TypeGroup1 { .. });
            for t in base {
                let g = c.mul(&t).mul(&ci);
                if !one || g.is_congruent_one(1) {
                    out.push(g);
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Left cosets g*S of a subgroup S inside an ambient finite group image.
#[derive(Clone, Debug)]
pub struct CosetSpace {
    pub n: usize,
    pub p: u64,
    pub level: u32,
    pub ambient: Subgroup,
    pub sub: Subgroup,
    /// Lexicographically smallest element of each coset, in increasing order.
    pub reps: Vec<ResMat>,
    index: HashMap<u128, u32>,
}

impl CosetSpace {
    pub fn cache_key(n: usize, p: u64, ambient: &Subgroup, sub: &Subgroup, level: u32) -> String {
        format!(
            "cosets/n{n}-p{p}-{}-{}-L{level}",
            ambient.name(),
            sub.name()
        )
    }

    pub fn build(
        n: usize,
        p: u64,
        ambient: &Subgroup,
        sub: &Subgroup,
        level: u32,
        budget: u128,
    ) -> Result<Self> {
        let elems = enumerate_elements(n, p, ambient, level, budget)?;
        let subs = enumerate_elements(n, p, sub, level, budget)?;
        let mut index: HashMap<u128, u32> = HashMap::with_capacity(elems.len());
        let mut reps = Vec::new();
        for g in &elems {
            if index.contains_key(&g.code()) {
                continue;
            }
            let id = reps.len() as u32;
            reps.push(*g);
            for s in &subs {
                index.insert(g.mul(s).code(), id);
            }
        }
        if index.len() != elems.len() {
            return Err(Error::SpecMismatch(format!(
                "{} is not a subgroup of {}",
                sub.name(),
                ambient.name()
            )));
        }
        Ok(CosetSpace {
            n,
            p,
            level,
            ambient: ambient.clone(),
            sub: sub.clone(),
            reps,
            index,
        })
    }

    /// Rebuild from stored representatives.
    pub fn from_reps(
        n: usize,
        p: u64,
        ambient: &Subgroup,
        sub: &Subgroup,
        level: u32,
        reps: Vec<ResMat>,
        budget: u128,
    ) -> Result<Self> {
        let subs = enumerate_elements(n, p, sub, level, budget)?;
        let mut index = HashMap::new();
        for (id, g) in reps.iter().enumerate() {
            for s in &subs {
                index.insert(g.mul(s).code(), id as u32);
            }
        }
        Ok(CosetSpace {
            n,
            p,
            level,
            ambient: ambient.clone(),
            sub: sub.clone(),
            reps,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn coset_of(&self, g: &ResMat) -> Option<usize> {
        self.index.get(&g.code()).map(|&i| i as usize)
    }

    /// The unique representative r with r^-1 g in the subgroup.
    pub fn lookup(&self, g: &ResMat) -> Result<ResMat> {
        self.coset_of(g)
            .map(|i| self.reps[i])
            .ok_or_else(|| Error::NotInSubgroup(format!("{g} is not in {}", self.ambient.name())))
    }
}

/// Square matrix over Q, read p-adically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RatMat {
    pub n: usize,
    pub p: u64,
    pub e: Vec<Q>,
}

impl RatMat {
    pub fn from_fn(n: usize, p: u64, f: impl Fn(usize, usize) -> Q) -> Self {
        let mut e = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                e.push(f(i, j));
            }
        }
        RatMat { n, p, e }
    }

    pub fn identity(n: usize, p: u64) -> Self {
        RatMat::from_fn(n, p, |i, j| if i == j { Q::one() } else { Q::zero() })
    }

    pub fn from_ints(p: u64, rows: &[Vec<i64>]) -> Self {
        RatMat::from_fn(rows.len(), p, |i, j| Q::from_integer(rows[i][j] as i128))
    }

    /// diag(p^mu_1, ..., p^mu_n).
    pub fn torus(p: u64, mu: &[i32]) -> Self {
        RatMat::from_fn(mu.len(), p, |i, j| if i == j { qpow(p, mu[i]) } else { Q::zero() })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &Q {
        &self.e[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Q) {
        self.e[i * self.n + j] = v;
    }

    pub fn mul(&self, o: &RatMat) -> RatMat {
        assert_eq!(self.n, o.n);
        let n = self.n;
        RatMat::from_fn(n, self.p, |i, j| {
            let mut s = Q::zero();
            for k in 0..n {
                let a = self.get(i, k);
                if !a.is_zero() {
                    s += a * o.get(k, j);
                }
            }
            s
        })
    }

    pub fn det(&self) -> Q {
        let n = self.n;
        let mut a = self.e.clone();
        let mut d = Q::one();
        for c in 0..n {
            let piv = match (c..n).find(|&r| !a[r * n + c].is_zero()) {
                Some(r) => r,
                None => return Q::zero(),
            };
            if piv != c {
                for j in 0..n {
                    a.swap(c * n + j, piv * n + j);
                }
                d = -d;
            }
            let pv = a[c * n + c];
            d *= pv;
            for r in c + 1..n {
                let f = a[r * n + c] / pv;
                if !f.is_zero() {
                    for j in c..n {
                        let t = a[c * n + j];
                        a[r * n + j] -= f * t;
                    }
                }
            }
        }
        d
    }

    pub fn inv(&self) -> Result<RatMat> {
        let n = self.n;
        let mut a = self.e.clone();
        let mut b = RatMat::identity(n, self.p).e;
        for c in 0..n {
            let piv = (c..n)
                .find(|&r| !a[r * n + c].is_zero())
                .ok_or(Error::NotInvertible)?;
            for j in 0..n {
                a.swap(c * n + j, piv * n + j);
                b.swap(c * n + j, piv * n + j);
            }
            let iv = a[c * n + c].recip();
            for j in 0..n {
                a[c * n + j] *= iv;
                b[c * n + j] *= iv;
            }
            for r in 0..n {
                let f = a[r * n + c];
                if r != c && !f.is_zero() {
                    for j in 0..n {
                        let (ta, tb) = (a[c * n + j], b[c * n + j]);
                        a[r * n + j] -= f * ta;
                        b[r * n + j] -= f * tb;
                    }
                }
            }
        }
        Ok(RatMat { n, p: self.p, e: b })
    }

    /// Smallest valuation among the entries (the log of the max-entry norm, negated).
    pub fn min_valuation(&self) -> i32 {
        self.e.iter().map(|x| val_q(x, self.p)).min().unwrap_or(i32::MAX)
    }

    /// max |g_ij|_p.
    pub fn max_norm(&self) -> f64 {
        (self.p as f64).powi(-self.min_valuation())
    }

    pub fn is_integral(&self) -> bool {
        self.min_valuation() >= 0
    }

    /// Reduce an integral matrix modulo p^level.
    pub fn to_resmat(&self, level: u32) -> Result<ResMat> {
        let ring = ResRing::new(self.p, level)?;
        let m = ring.modulus();
        if !self.is_integral() {
            return Err(Error::NotInSubgroup("matrix is not integral".into()));
        }
        Ok(ResMat::from_fn(self.n, ring, |i, j| {
            let x = self.get(i, j);
            let d = rem(*x.denom(), m);
            let inv = inv_mod(d, m).unwrap() as i128;
            rem(*x.numer(), m) as i128 * inv
        }))
    }

    pub fn in_k(&self) -> bool {
        self.is_integral() && val_q(&self.det(), self.p) == 0
    }
}

impl fmt::Display for RatMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = (0..self.n)
            .map(|i| {
                let r: Vec<String> = (0..self.n).map(|j| self.get(i, j).to_string()).collect();
                format!("[{}]", r.join(","))
            })
            .collect();
        write!(f, "[{}]", rows.join(","))
    }
}

/// The cocharacter mu, sorted non-increasingly, with g in K mu(p) K.
pub fn smith_cartan(g: &RatMat) -> Result<Vec<i32>> {
    let n = g.n;
    let p = g.p;
    let mut a = g.e.clone();
    let mut vals = Vec::with_capacity(n);
    for k in 0..n {
        let mut best: Option<(usize, usize, i32)> = None;
        for i in k..n {
            for j in k..n {
                let v = val_q(&a[i * n + j], p);
                if v != i32::MAX && best.map_or(true, |b| v < b.2) {
                    best = Some((i, j, v));
                }
            }
        }
        let (bi, bj, bv) = best.ok_or(Error::NotInvertible)?;
        for j in 0..n {
            a.swap(k * n + j, bi * n + j);
        }
        for i in 0..n {
            a.swap(i * n + k, i * n + bj);
        }
        let pv = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / pv;
            if !f.is_zero() {
                for j in k..n {
                    let t = a[k * n + j];
                    a[i * n + j] -= f * t;
                }
            }
        }
        for j in k + 1..n {
            let f = a[k * n + j] / pv;
            if !f.is_zero() {
                for i in k..n {
                    let t = a[i * n + k];
                    a[i * n + j] -= f * t;
                }
            }
        }
        vals.push(bv);
    }
    vals.sort_unstable_by(|a, b| b.cmp(a));
    Ok(vals)
}

/// The torus part A(g) in the decomposition g = n a k (n upper unipotent, k in K),
/// as the exponent vector of a.
pub fn iwasawa_a(g: &RatMat) -> Result<Vec<i32>> {
    let n = g.n;
    let p = g.p;
    let mut a = g.e.clone();
    let mut out = vec![0i32; n];
    for r in (0..n).rev() {
        let mut best: Option<(usize, i32)> = None;
        for c in 0..=r {
            let v = val_q(&a[r * n + c], p);
            if v != i32::MAX && best.map_or(true, |b| v < b.1) {
                best = Some((c, v));
            }
        }
        let (bc, bv) = best.ok_or(Error::NotInvertible)?;
        for i in 0..n {
            a.swap(i * n + bc, i * n + r);
        }
        let pv = a[r * n + r];
        for c in 0..r {
            let f = a[r * n + c] / pv;
            if !f.is_zero() {
                for i in 0..=r {
                    let t = a[i * n + r];
                    a[i * n + c] -= f * t;
                }
            }
        }
        out[r] = bv;
    }
    Ok(out)
}

/// Distance to K_H~ = {diag(h, z)} inside K, at the working level of `g`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distance {
    /// d = q^(-depth) unless `truncated`.
    pub depth: u32,
    /// Set when g lies in K_H~ at the working level; d is then reported as 0.
    pub truncated: bool,
}

impl Distance {
    pub fn value(&self, q: u64) -> f64 {
        if self.truncated {
            0.0
        } else {
            (q as f64).powi(-(self.depth as i32))
        }
    }
}

pub fn distance_to_htilde(g: &ResMat) -> Result<Distance> {
    if !g.is_invertible() {
        return Err(Error::NotInSubgroup("distance is defined on K".into()));
    }
    let n = g.n;
    let last = n - 1;
    let mut depth = g.level();
    for k in 0..last {
        for v in [g.get(last, k), g.get(k, last)] {
            depth = depth.min(val_int(v as i128, g.p()).min(g.level()));
        }
    }
    Ok(Distance {
        depth,
        truncated: depth >= g.level(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(p: u64, l: u32) -> ResRing {
        ResRing::new(p, l).unwrap()
    }

    #[test]
    fn inverse_and_det() {
        let r = ring(3, 2);
        let g = ResMat::from_rows(r, &[vec![1, 3], vec![2, 7]]);
        let gi = g.inv().unwrap();
        assert!(g.mul(&gi).is_identity());
        assert_eq!(g.det(), rem(7 - 6, 9));
        let s = ResMat::from_rows(r, &[vec![3, 0], vec![0, 1]]);
        assert_eq!(s.inv(), Err(Error::NotInvertible));
        let h = ResMat::from_rows(ring(5, 1), &[vec![1, 2, 3], vec![0, 1, 4], vec![2, 0, 1]]);
        assert!(h.mul(&h.inv().unwrap()).is_identity());
    }

    #[test]
    fn membership_examples() {
        let r = ring(3, 2);
        let g = ResMat::from_rows(r, &[vec![1, 3], vec![0, 1]]);
        assert!(membership(&g, &Subgroup::TorusTilde(1)).unwrap());
        assert!(membership(&g, &Subgroup::Congruence(1)).unwrap());
        assert!(!membership(&g, &Subgroup::Congruence(2)).unwrap());
        let low = g.reduce_to(1).unwrap();
        assert!(matches!(
            membership(&low, &Subgroup::Congruence(2)),
            Err(Error::LevelTooLow { .. })
        ));
    }

    #[test]
    fn coset_counts() {
        let cs = CosetSpace::build(2, 3, &Subgroup::Congruence(1), &Subgroup::Congruence(2), 2, 1 << 20).unwrap();
        assert_eq!(cs.len(), 81);
        let g = enumerate_elements(2, 3, &Subgroup::K, 2, 1 << 20).unwrap();
        assert_eq!(g.len(), 3888);
        let types = CosetSpace::build(2, 3, &Subgroup::K, &Subgroup::TorusTilde(1), 1, 1 << 20).unwrap();
        assert_eq!(types.len(), 12);
        let borel = CosetSpace::build(2, 3, &Subgroup::K, &Subgroup::Borel, 1, 1 << 20).unwrap();
        assert_eq!(borel.len(), 4);
        for h in &g[..50] {
            let r = borel.lookup(&h.reduce_to(1).unwrap()).unwrap();
            let hb = h.reduce_to(1).unwrap();
            assert!(membership(&r.inv().unwrap().mul(&hb), &Subgroup::Borel).unwrap());
        }
    }

    #[test]
    fn subgroup_orders_match_enumeration() {
        let cases = [
            Subgroup::K,
            Subgroup::Congruence(1),
            Subgroup::Borel,
            Subgroup::TorusCompact,
            Subgroup::TorusTilde(1),
            Subgroup::HEmbedded,
            Subgroup::HTildeEmbedded,
            Subgroup::KH(1),
        ];
        for tag in &cases {
            let v = enumerate_elements(2, 3, tag, 2, 1 << 22).unwrap();
            assert_eq!(v.len() as u128, subgroup_order(2, 3, tag, 2), "{}", tag.name());
            assert!(v.iter().all(|g| membership(g, tag).unwrap()));
        }
    }

    #[test]
    fn smith_examples() {
        let g = RatMat::from_ints(3, &[vec![3, 1], vec![0, 3]]);
        assert_eq!(smith_cartan(&g).unwrap(), vec![2, 0]);
        let t = RatMat::torus(5, &[-1, 2, 0]);
        assert_eq!(smith_cartan(&t).unwrap(), vec![2, 0, -1]);
    }

    #[test]
    fn iwasawa_examples() {
        let g = RatMat::from_ints(3, &[vec![1, 0], vec![1, 3]]);
        assert_eq!(iwasawa_a(&g).unwrap(), vec![1, 0]);
        let u = RatMat::from_ints(3, &[vec![9, 5], vec![0, 1]]);
        assert_eq!(iwasawa_a(&u).unwrap(), vec![2, 0]);
    }

    #[test]
    fn distance_examples() {
        for l in 1..=2u32 {
            let r = ring(3, 2 * l);
            for m in 0..2 * l {
                let g = ResMat::from_rows(r, &[vec![1, 3i64.pow(m)], vec![0, 1]]);
                let d = distance_to_htilde(&g).unwrap();
                assert_eq!(d.depth, m);
                assert!(!d.truncated);
                assert!((d.value(3) - 3f64.powi(-(m as i32))).abs() < 1e-15);
            }
            let h = ResMat::from_rows(r, &[vec![2, 0], vec![0, 5]]);
            assert!(distance_to_htilde(&h).unwrap().truncated);
        }
    }
}
