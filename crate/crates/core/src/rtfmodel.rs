//! Finite-group model of the relative trace inequality.
//!
//! Counting measures are scaled so that vol(Γ\𝔾) = vol((Γ∩ℍ)\ℍ) = 1.

use crate::arith::{CycInt, Root, Q};
use crate::error::{Error, Result};
use num_complex::Complex64 as C;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// A finite group given by its multiplication table.
#[derive(Clone, Debug)]
pub struct FiniteGroup {
    pub name: String,
    pub order: usize,
    table: Vec<u32>,
    inverse: Vec<u32>,
    pub identity: usize,
    pub labels: Vec<String>,
}

impl FiniteGroup {
    /// Builds the table from an element list and a multiplication closed on it.
    pub fn from_elements<T: Clone + Eq + std::hash::Hash + std::fmt::Debug>(
        name: &str,
        elems: Vec<T>,
        mul: impl Fn(&T, &T) -> T,
    ) -> Result<Self> {
        let order = elems.len();
        let index: HashMap<T, usize> = elems.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        let mut table = vec![0u32; order * order];
        for (i, a) in elems.iter().enumerate() {
            for (j, b) in elems.iter().enumerate() {
                let c = mul(a, b);
                let k = *index
                    .get(&c)
                    .ok_or_else(|| Error::InvalidConfig(format!("{name}: product {c:?} not in element list")))?;
                table[i * order + j] = k as u32;
            }
        }
        let identity = (0..order)
            .find(|&e| (0..order).all(|g| table[e * order + g] as usize == g && table[g * order + e] as usize == g))
            .ok_or_else(|| Error::InvalidConfig(format!("{name}: no identity")))?;
        let mut inverse = vec![u32::MAX; order];
        for g in 0..order {
            for h in 0..order {
                if table[g * order + h] as usize == identity {
                    inverse[g] = h as u32;
                    break;
                }
            }
            if inverse[g] == u32::MAX {
                return Err(Error::InvalidConfig(format!("{name}: element without inverse")));
            }
        }
        Ok(FiniteGroup {
            name: name.to_string(),
            order,
            table,
            inverse,
            identity,
            labels: elems.iter().map(|e| format!("{e:?}")).collect(),
        })
    }

    pub fn cyclic(n: usize) -> Self {
        Self::from_elements(&format!("Z/{n}"), (0..n).collect(), |a, b| (a + b) % n).expect("cyclic group")
    }

    /// Dihedral group of order 2m; element (a, b) is r^a s^b.
    pub fn dihedral(m: usize) -> Self {
        let elems: Vec<(usize, usize)> = (0..2).flat_map(|b| (0..m).map(move |a| (a, b))).collect();
        Self::from_elements(&format!("D{m}"), elems, |&(a, b), &(c, d)| {
            let c2 = if b == 1 { (m - c) % m } else { c };
            ((a + c2) % m, (b + d) % 2)
        })
        .expect("dihedral group")
    }

    /// GL_2(F_p) with matrices stored row-major.
    pub fn gl2(p: u64) -> Self {
        let mut elems = Vec::new();
        for a in 0..p {
            for b in 0..p {
                for c in 0..p {
                    for d in 0..p {
                        if (a * d + p * p - b * c) % p != 0 {
                            elems.push([a, b, c, d]);
                        }
                    }
                }
            }
        }
        Self::from_elements(&format!("GL2(F{p})"), elems, |x, y| {
            [
                (x[0] * y[0] + x[1] * y[2]) % p,
                (x[0] * y[1] + x[1] * y[3]) % p,
                (x[2] * y[0] + x[3] * y[2]) % p,
                (x[2] * y[1] + x[3] * y[3]) % p,
            ]
        })
        .expect("GL2")
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b] as usize
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a] as usize
    }

    pub fn find(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Subgroup generated by `gens`, sorted.
    pub fn generated(&self, gens: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; self.order];
        seen[self.identity] = true;
        let mut out = vec![self.identity];
        let mut i = 0;
        while i < out.len() {
            let x = out[i];
            for &g in gens {
                let y = self.mul(x, g);
                if !seen[y] {
                    seen[y] = true;
                    out.push(y);
                }
            }
            i += 1;
        }
        out.sort_unstable();
        out
    }

    pub fn is_subgroup(&self, s: &[usize]) -> bool {
        let mut mem = vec![false; self.order];
        for &x in s {
            mem[x] = true;
        }
        mem[self.identity] && s.iter().all(|&a| mem[self.inv(a)] && s.iter().all(|&b| mem[self.mul(a, b)]))
    }
}

/// A subgroup J with a character λ: J → μ_∞.
#[derive(Clone, Debug)]
pub struct TypePair {
    pub elements: Vec<usize>,
    pub values: Vec<Root>,
}

#[derive(Clone, Debug)]
pub struct FiniteModel {
    pub group: FiniteGroup,
    pub gamma: Vec<usize>,
    pub h: Vec<usize>,
    /// Index of Γg in Γ\𝔾 for each g.
    pub g_coset: Vec<usize>,
    pub g_reps: Vec<usize>,
    /// Representatives of (Γ∩ℍ)\ℍ.
    pub h_reps: Vec<usize>,
    /// Haar mass of a point of 𝔾 and of ℍ.
    pub c_g: Q,
    pub c_h: Q,
    pub type_pair: TypePair,
}

impl FiniteModel {
    pub fn new(group: FiniteGroup, gamma: Vec<usize>, h: Vec<usize>, type_pair: TypePair) -> Result<Self> {
        for (what, s) in [("lattice", &gamma), ("period subgroup", &h), ("type subgroup", &type_pair.elements)] {
            if !group.is_subgroup(s) {
                return Err(Error::InvalidConfig(format!("{what} is not a subgroup of {}", group.name)));
            }
        }
        if type_pair.values.len() != type_pair.elements.len() {
            return Err(Error::DimensionMismatch("character values".into()));
        }
        let n = group.order;
        let mut g_coset = vec![usize::MAX; n];
        let mut g_reps = Vec::new();
        for g in 0..n {
            if g_coset[g] == usize::MAX {
                let id = g_reps.len();
                g_reps.push(g);
                for &y in &gamma {
                    g_coset[group.mul(y, g)] = id;
                }
            }
        }
        let mut in_gamma = vec![false; n];
        for &y in &gamma {
            in_gamma[y] = true;
        }
        let gh: Vec<usize> = h.iter().copied().filter(|&x| in_gamma[x]).collect();
        let mut seen = vec![false; n];
        let mut h_reps = Vec::new();
        for &x in &h {
            if !seen[x] {
                h_reps.push(x);
                for &y in &gh {
                    seen[group.mul(y, x)] = true;
                }
            }
        }
        let c_g = Q::new(gamma.len() as i128, n as i128);
        let c_h = Q::new(gh.len() as i128, h.len() as i128);
        Ok(FiniteModel {
            group,
            gamma,
            h,
            g_coset,
            g_reps,
            h_reps,
            c_g,
            c_h,
            type_pair,
        })
    }

    /// Z/6 with Γ = {0,3}, ℍ = {0,2,4}; type pair ({0,2,4}, 2k ↦ ζ_3^k).
    pub fn z6() -> Self {
        let g = FiniteGroup::cyclic(6);
        let tp = TypePair {
            elements: vec![0, 2, 4],
            values: (0..3).map(|k| Root::new(3, k)).collect(),
        };
        FiniteModel::new(g, vec![0, 3], vec![0, 2, 4], tp).expect("Z/6 model")
    }

    /// D_4 with Γ = ⟨s⟩, ℍ = {1, r², s, r²s}; type pair (⟨r⟩, r^a ↦ i^a).
    pub fn d4() -> Self {
        let g = FiniteGroup::dihedral(4);
        let idx = |a: usize, b: usize| g.find(&format!("({a}, {b})")).expect("D4 element");
        let gamma = g.generated(&[idx(0, 1)]);
        let h = g.generated(&[idx(2, 0), idx(0, 1)]);
        let rot: Vec<usize> = (0..4).map(|a| idx(a, 0)).collect();
        let tp = TypePair {
            elements: rot,
            values: (0..4).map(|a| Root::new(4, a)).collect(),
        };
        FiniteModel::new(g, gamma, h, tp).expect("D4 model")
    }

    /// GL_2(F_p) with Γ = upper unipotent, ℍ = diagonal torus; type pair
    /// (lower unipotent, x ↦ ζ_p^x).
    pub fn gl2(p: u64) -> Self {
        let g = FiniteGroup::gl2(p);
        let idx = |m: [u64; 4]| g.find(&format!("{m:?}")).expect("GL2 element");
        let gamma = g.generated(&[idx([1, 1, 0, 1])]);
        let h: Vec<usize> = (1..p).flat_map(|a| (1..p).map(move |d| (a, d))).map(|(a, d)| idx([a, 0, 0, d])).collect();
        let mut h = h;
        h.sort_unstable();
        let tp = TypePair {
            elements: (0..p).map(|x| idx([1, 0, x, 1])).collect(),
            values: (0..p).map(|x| Root::new(p, x)).collect(),
        };
        FiniteModel::new(g, gamma, h, tp).expect("GL2 model")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "z6" | "z/6" => Ok(Self::z6()),
            "d4" => Ok(Self::d4()),
            "gl2" | "gl2f3" | "gl2(f3)" => Ok(Self::gl2(3)),
            _ => Err(Error::InvalidConfig(format!("unknown model group {name}"))),
        }
    }

    pub fn names() -> &'static [&'static str] {
        &["z6", "d4", "gl2"]
    }
}

/// Values along the unfolding chain for one instance.
#[derive(Clone, Copy, Debug)]
pub struct ChainValues {
    pub f_norm2: f64,
    pub p_direct: C,
    pub p_folded: C,
    pub p_swapped: C,
    pub phi_norm2: f64,
    pub phi_norm2_swapped: C,
    pub phi_norm2_unfolded: C,
    pub rhs: C,
}

impl ChainValues {
    pub fn lhs(&self) -> f64 {
        self.p_direct.norm_sqr()
    }

    /// Largest scaled gap among the equalities of the chain.
    pub fn max_gap(&self) -> f64 {
        let rel = |a: C, b: C| (a - b).norm() / 1f64.max(a.norm()).max(b.norm());
        let phi = C::new(self.phi_norm2, 0.0);
        [
            rel(self.p_direct, self.p_folded),
            rel(self.p_folded, self.p_swapped),
            rel(phi, self.phi_norm2_swapped),
            rel(self.phi_norm2_swapped, self.phi_norm2_unfolded),
            rel(self.phi_norm2_unfolded, self.rhs),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn qf(x: &Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// Evaluates every stage of the chain for kernel k₀ on 𝔾, f on Γ\𝔾 and f_H on (Γ∩ℍ)\ℍ.
pub fn evaluate_chain(model: &FiniteModel, k0: &[C], f: &[C], fh: &[C]) -> ChainValues {
    let g = &model.group;
    let n = g.order;
    let c = qf(&model.c_g);
    let ch = qf(&model.c_h);
    let fv = |x: usize| f[model.g_coset[x]];
    let xs = &model.h_reps;
    let f_norm2 = c * f.iter().map(|z| z.norm_sqr()).sum::<f64>();

    let rf = |x: usize| -> C { (0..n).map(|y| k0[y] * fv(g.mul(x, y))).sum::<C>() * c };
    let p_direct: C = xs.iter().zip(fh).map(|(&x, a)| a.conj() * rf(x)).sum::<C>() * ch;

    let kern = |x: usize, y: usize| -> C {
        let xi = g.inv(x);
        model.gamma.iter().map(|&gm| k0[g.mul(xi, g.mul(gm, y))]).sum()
    };
    let k0mat: Vec<Vec<C>> = xs.iter().map(|&x| model.g_reps.iter().map(|&y| kern(x, y)).collect()).collect();
    let p_folded: C = xs
        .iter()
        .enumerate()
        .map(|(i, _)| {
            fh[i].conj() * model.g_reps.iter().enumerate().map(|(j, &y)| k0mat[i][j] * fv(y)).sum::<C>() * c
        })
        .sum::<C>()
        * ch;

    let phi: Vec<C> = (0..model.g_reps.len())
        .map(|j| (0..xs.len()).map(|i| fh[i] * k0mat[i][j].conj()).sum::<C>() * ch)
        .collect();
    let p_swapped: C = model.g_reps.iter().zip(&phi).map(|(&y, ph)| fv(y) * ph.conj()).sum::<C>() * c;
    let phi_norm2 = c * phi.iter().map(|z| z.norm_sqr()).sum::<f64>();

    let m = xs.len();
    let mut swapped = C::zero();
    let mut unfolded = C::zero();
    for i in 0..m {
        for i2 in 0..m {
            let w = fh[i] * fh[i2].conj() * ch * ch;
            let s: C = (0..model.g_reps.len()).map(|j| k0mat[i2][j] * k0mat[i][j].conj()).sum::<C>() * c;
            swapped += w * s;
            let (xa, xb) = (g.inv(xs[i2]), g.inv(xs[i]));
            let u: C = (0..n)
                .map(|y| {
                    let inner: C = model.gamma.iter().map(|&d| k0[g.mul(xb, g.mul(d, y))].conj()).sum();
                    k0[g.mul(xa, y)] * inner
                })
                .sum::<C>()
                * c;
            unfolded += w * u;
        }
    }

    let k = self_convolution(model, k0);
    let mut rhs = C::zero();
    for (i, &x) in xs.iter().enumerate() {
        let xi = g.inv(x);
        for (i2, &y) in xs.iter().enumerate() {
            let s: C = model.gamma.iter().map(|&gm| k[g.mul(xi, g.mul(gm, y))]).sum();
            rhs += fh[i].conj() * fh[i2] * s;
        }
    }
    rhs *= ch * ch;

    ChainValues {
        f_norm2,
        p_direct,
        p_folded,
        p_swapped,
        phi_norm2,
        phi_norm2_swapped: swapped,
        phi_norm2_unfolded: unfolded,
        rhs,
    }
}

/// k = k₀ * k₀^∨ with k₀^∨(g) = conj k₀(g⁻¹).
pub fn self_convolution(model: &FiniteModel, k0: &[C]) -> Vec<C> {
    let g = &model.group;
    let c = qf(&model.c_g);
    (0..g.order)
        .map(|t| {
            let ti = g.inv(t);
            (0..g.order).map(|x| k0[x] * k0[g.mul(ti, x)].conj()).sum::<C>() * c
        })
        .collect()
}

/// Hermitian form B(u, v) = ∫∫ conj u(x) v(y) Σ_γ k(x⁻¹γy).
pub fn rhs_form(model: &FiniteModel, k: &[C], u: &[C], v: &[C]) -> C {
    let g = &model.group;
    let ch = qf(&model.c_h);
    let mut s = C::zero();
    for (i, &x) in model.h_reps.iter().enumerate() {
        let xi = g.inv(x);
        for (j, &y) in model.h_reps.iter().enumerate() {
            let t: C = model.gamma.iter().map(|&gm| k[g.mul(xi, g.mul(gm, y))]).sum();
            s += u[i].conj() * v[j] * t;
        }
    }
    s * ch * ch
}

fn random_c(rng: &mut impl Rng) -> C {
    C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn normalize(model: &FiniteModel, f: &mut [C]) {
    let c = qf(&model.c_g);
    let norm = (c * f.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
    if norm > 0.0 {
        for z in f.iter_mut() {
            *z /= norm;
        }
    }
}

/// Random instance (k₀, f, f_H) with ‖f‖₂ = 1.
pub fn random_instance(model: &FiniteModel, rng: &mut impl Rng) -> (Vec<C>, Vec<C>, Vec<C>) {
    let k0: Vec<C> = (0..model.group.order).map(|_| random_c(rng)).collect();
    let mut f: Vec<C> = (0..model.g_reps.len()).map(|_| random_c(rng)).collect();
    normalize(model, &mut f);
    let fh: Vec<C> = (0..model.h_reps.len()).map(|_| random_c(rng)).collect();
    (k0, f, fh)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RtfReport {
    pub group: String,
    pub trials: usize,
    pub tol: f64,
    pub max_chain_gap: f64,
    pub max_excess: f64,
    pub min_rhs: f64,
    pub max_rhs_imag: f64,
    pub max_sesquilinear_gap: f64,
    pub failures: usize,
    pub witness: Option<String>,
}

impl RtfReport {
    pub fn ok(&self) -> bool {
        self.failures == 0
    }
}

struct Trial {
    gap: f64,
    excess: f64,
    rhs: f64,
    imag: f64,
    sesq: f64,
    fail: bool,
    desc: String,
}

fn run_trial(model: &FiniteModel, seed: u64, tol: f64) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k0, f, fh) = random_instance(model, &mut rng);
    let v = evaluate_chain(model, &k0, &f, &fh);
    let scale = 1f64.max(v.rhs.norm());
    let gap = v.max_gap();
    let excess = v.lhs() - v.rhs.re;
    let cs_excess = v.p_swapped.norm_sqr() - v.f_norm2 * v.phi_norm2;

    let k = self_convolution(model, &k0);
    let u: Vec<C> = (0..fh.len()).map(|_| random_c(&mut rng)).collect();
    let (a, b) = (random_c(&mut rng), random_c(&mut rng));
    let mix: Vec<C> = fh.iter().zip(&u).map(|(x, y)| a * x + b * y).collect();
    let lhs_form = rhs_form(model, &k, &mix, &mix);
    let expanded = a.norm_sqr() * rhs_form(model, &k, &fh, &fh)
        + a.conj() * b * rhs_form(model, &k, &fh, &u)
        + b.conj() * a * rhs_form(model, &k, &u, &fh)
        + b.norm_sqr() * rhs_form(model, &k, &u, &u);
    let sesq = (lhs_form - expanded).norm() / 1f64.max(lhs_form.norm());

    let fail = gap > tol
        || excess > tol * scale
        || cs_excess > tol * scale
        || v.rhs.re < -tol * scale
        || v.rhs.im.abs() > tol * scale
        || (v.f_norm2 - 1.0).abs() > tol
        || sesq > tol;
    Trial {
        gap,
        excess,
        rhs: v.rhs.re,
        imag: v.rhs.im.abs(),
        sesq,
        fail,
        desc: format!(
            "seed {seed}: lhs {:.3e}, rhs {:.3e}{:+.3e}i, chain gap {gap:.3e}, sesquilinear gap {sesq:.3e}",
            v.lhs(),
            v.rhs.re,
            v.rhs.im
        ),
    }
}

/// Runs `trials` random instances; each trial uses its own seeded generator.
pub fn rtf_inequality_scan(model: &FiniteModel, trials: usize, seed: u64, tol: f64) -> RtfReport {
    let results: Vec<Trial> = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(model, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i), tol))
        .collect();
    RtfReport {
        group: model.group.name.clone(),
        trials,
        tol,
        max_chain_gap: results.iter().map(|t| t.gap).fold(0.0, f64::max),
        max_excess: results.iter().map(|t| t.excess).fold(f64::NEG_INFINITY, f64::max),
        min_rhs: results.iter().map(|t| t.rhs).fold(f64::INFINITY, f64::min),
        max_rhs_imag: results.iter().map(|t| t.imag).fold(0.0, f64::max),
        max_sesquilinear_gap: results.iter().map(|t| t.sesq).fold(0.0, f64::max),
        failures: results.iter().filter(|t| t.fail).count(),
        witness: results.iter().find(|t| t.fail).map(|t| t.desc.clone()),
    }
}

pub fn rtf_inequality_check(model: &FiniteModel, trials: usize, seed: u64) -> Result<RtfReport> {
    let r = rtf_inequality_scan(model, trials, seed, 1e-12);
    if r.ok() {
        Ok(r)
    } else {
        Err(Error::CounterexampleFound(r.witness.clone().unwrap_or_default()))
    }
}

/// Identity point mass for k₀ and f, f_H supported on the identity cosets.
pub fn point_mass_witness(model: &FiniteModel) -> ChainValues {
    let g = &model.group;
    let mut k0 = vec![C::zero(); g.order];
    k0[g.identity] = C::new(1.0 / qf(&model.c_g), 0.0);
    let mut f = vec![C::zero(); model.g_reps.len()];
    f[model.g_coset[g.identity]] = C::one();
    normalize(model, &mut f);
    let fh: Vec<C> = model
        .h_reps
        .iter()
        .map(|&x| if model.g_coset[x] == model.g_coset[g.identity] { C::new(0.6, -0.8) } else { C::zero() })
        .collect();
    evaluate_chain(model, &k0, &f, &fh)
}

/// Random k₀, f_H with f chosen proportional to the Cauchy–Schwarz inner function.
pub fn aligned_witness(model: &FiniteModel, rng: &mut impl Rng) -> ChainValues {
    let (k0, _, fh) = random_instance(model, rng);
    let zero = vec![C::zero(); model.g_reps.len()];
    let probe = |j: usize| {
        let mut e = zero.clone();
        e[j] = C::one();
        evaluate_chain(model, &k0, &e, &fh).p_swapped
    };
    let c = qf(&model.c_g);
    let mut f: Vec<C> = (0..model.g_reps.len()).map(|j| probe(j).conj() / c).collect();
    normalize(model, &mut f);
    evaluate_chain(model, &k0, &f, &fh)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectorReport {
    pub group: String,
    pub type_order: usize,
    pub vol: String,
    pub homomorphism: bool,
    pub self_adjoint: bool,
    pub idempotent: bool,
    pub fixes_equivariant: bool,
    pub nonnormalized_idempotent: bool,
}

impl ProjectorReport {
    pub fn ok(&self) -> bool {
        self.homomorphism && self.self_adjoint && self.idempotent && self.fixes_equivariant
    }
}

/// Exact check that k₀ = vol(J)⁻¹·λ̄·1_J is a self-adjoint idempotent fixing λ-equivariant vectors.
pub fn rtf_projector_scan(model: &FiniteModel, seed: u64) -> ProjectorReport {
    let g = &model.group;
    let tp = &model.type_pair;
    let order = tp.values.iter().fold(1u64, |a, r| a.lcm(&r.m));
    let jn = tp.elements.len();
    let mut lam: Vec<Option<Root>> = vec![None; g.order];
    for (&x, r) in tp.elements.iter().zip(&tp.values) {
        lam[x] = Some(r.in_order(order));
    }
    let homomorphism = tp.elements.iter().all(|&a| {
        tp.elements
            .iter()
            .all(|&b| lam[g.mul(a, b)] == Some(lam[a].unwrap().mul(&lam[b].unwrap()).in_order(order)))
    });
    let cyc = |r: Option<Root>| r.map(|r| CycInt::from_root(&r)).unwrap_or_else(|| CycInt::zero(order));
    // u = λ̄·1_J; k₀ = u / vol(J).
    let u: Vec<CycInt> = (0..g.order).map(|x| cyc(lam[x].map(|r| r.inv()))).collect();
    let self_adjoint = (0..g.order).all(|x| u[g.inv(x)].conj() == u[x]);
    // k₀*k₀ = c/vol² · (u ⋆ u) with ⋆ the counting convolution; c/vol = 1/|J|.
    let idempotent = (0..g.order).all(|t| {
        let mut s = CycInt::zero(order);
        for &x in &tp.elements {
            s = s.add(&u[x].mul(&u[g.mul(g.inv(x), t)]));
        }
        s == u[t].scale(jn as i64)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi: Vec<Option<CycInt>> = vec![None; g.order];
    for x in 0..g.order {
        if phi[x].is_none() {
            let v = CycInt::from_int(order, rng.gen_range(-5..=5));
            for (&j, r) in tp.elements.iter().zip(&tp.values) {
                phi[g.mul(x, j)] = Some(v.mul(&CycInt::from_root(&r.in_order(order))));
            }
        }
    }
    let phi: Vec<CycInt> = phi.into_iter().map(|v| v.expect("assigned")).collect();
    let fixes_equivariant = (0..g.order).all(|x| {
        let mut s = CycInt::zero(order);
        for &j in &tp.elements {
            s = s.add(&u[j].mul(&phi[g.mul(x, j)]));
        }
        s == phi[x].scale(jn as i64)
    });
    // 1_J ⋆ 1_J = c·|J|·1_J under the model measure.
    let cj = model.c_g * Q::from_integer(jn as i128);
    let nonnormalized_idempotent = cj.is_one();
    ProjectorReport {
        group: g.name.clone(),
        type_order: jn,
        vol: cj.to_string(),
        homomorphism,
        self_adjoint,
        idempotent,
        fixes_equivariant,
        nonnormalized_idempotent,
    }
}

pub fn rtf_projector_check(model: &FiniteModel, seed: u64) -> Result<ProjectorReport> {
    let r = rtf_projector_scan(model, seed);
    if r.ok() {
        Ok(r)
    } else {
        Err(Error::CounterexampleFound(format!("{r:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_shapes() {
        let z = FiniteModel::z6();
        assert_eq!((z.g_reps.len(), z.h_reps.len()), (3, 3));
        assert_eq!(z.c_g, Q::new(1, 3));
        let d = FiniteModel::d4();
        assert_eq!((d.group.order, d.gamma.len(), d.h.len()), (8, 2, 4));
        assert_eq!(d.h_reps.len(), 2);
        let g = FiniteModel::gl2(3);
        assert_eq!((g.group.order, g.gamma.len(), g.h.len()), (48, 3, 4));
        assert_eq!((g.g_reps.len(), g.h_reps.len()), (16, 4));
    }

    #[test]
    fn dihedral_is_nonabelian() {
        let d = FiniteGroup::dihedral(4);
        let r = d.find("(1, 0)").unwrap();
        let s = d.find("(0, 1)").unwrap();
        assert_ne!(d.mul(r, s), d.mul(s, r));
        assert_eq!(d.generated(&[r, s]).len(), 8);
    }

    #[test]
    fn z6_by_direct_summation() {
        // Independent evaluation of both sides straight from the definitions.
        let m = FiniteModel::z6();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (k0, f, fh) = random_instance(&m, &mut rng);
            let c = 1.0 / 3.0;
            let ch = 1.0 / 3.0;
            let fv = |x: usize| f[m.g_coset[x % 6]];
            let mut p = C::zero();
            for (i, &h) in [0usize, 2, 4].iter().enumerate() {
                let rf: C = (0..6).map(|g| k0[g] * fv(h + g)).sum::<C>() * c;
                p += rf * fh[i].conj() * ch;
            }
            let k: Vec<C> = (0..6)
                .map(|t| (0..6).map(|x| k0[x] * k0[(x + 6 - t) % 6].conj()).sum::<C>() * c)
                .collect();
            let mut rhs = C::zero();
            for (i, &x) in [0usize, 2, 4].iter().enumerate() {
                for (j, &y) in [0usize, 2, 4].iter().enumerate() {
                    let s: C = [0usize, 3].iter().map(|&g| k[(6 - x + g + y) % 6]).sum();
                    rhs += fh[i].conj() * fh[j] * s * ch * ch;
                }
            }
            let v = evaluate_chain(&m, &k0, &f, &fh);
            assert!((v.p_direct - p).norm() < 1e-13);
            assert!((v.rhs - rhs).norm() < 1e-13);
            assert!(p.norm_sqr() <= rhs.re + 1e-12);
        }
    }

    #[test]
    fn inequality_holds_on_all_models() {
        for name in FiniteModel::names() {
            let m = FiniteModel::by_name(name).unwrap();
            let r = rtf_inequality_check(&m, 100, 7).unwrap();
            assert!(r.min_rhs >= -1e-12 && r.max_excess <= 1e-12, "{r:?}");
        }
    }

    #[test]
    fn equality_witnesses() {
        for name in FiniteModel::names() {
            let m = FiniteModel::by_name(name).unwrap();
            let v = point_mass_witness(&m);
            assert!(v.lhs() > 0.0);
            assert!((v.lhs() - v.rhs.re).abs() < 1e-12, "{name}: {v:?}");
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let w = aligned_witness(&m, &mut rng);
            assert!((w.lhs() - w.rhs.re).abs() < 1e-12 * w.rhs.re.max(1.0), "{name}: {w:?}");
        }
    }

    #[test]
    fn zero_kernel() {
        let m = FiniteModel::gl2(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (_, f, fh) = random_instance(&m, &mut rng);
        let v = evaluate_chain(&m, &vec![C::zero(); 48], &f, &fh);
        assert_eq!((v.lhs(), v.rhs), (0.0, C::zero()));
    }

    #[test]
    fn projectors() {
        for name in FiniteModel::names() {
            let m = FiniteModel::by_name(name).unwrap();
            let r = rtf_projector_check(&m, 5).unwrap();
            assert!(r.ok());
        }
        // c·|J| = 1 only for Z/6 with J of order 3.
        let mut m = FiniteModel::z6();
        assert!(rtf_projector_scan(&m, 0).nonnormalized_idempotent);
        m.type_pair = TypePair {
            elements: vec![0, 3],
            values: vec![Root::new(2, 0), Root::new(2, 1)],
        };
        let r = rtf_projector_scan(&m, 0);
        assert!(r.ok() && !r.nonnormalized_idempotent);
        assert!(!rtf_projector_scan(&FiniteModel::gl2(3), 0).nonnormalized_idempotent);
    }

    #[test]
    fn broken_character_is_caught() {
        let mut m = FiniteModel::d4();
        m.type_pair.values[1] = Root::new(4, 2);
        let r = rtf_projector_scan(&m, 0);
        assert!(!r.homomorphism);
        assert!(rtf_projector_check(&m, 0).is_err());
    }
}
