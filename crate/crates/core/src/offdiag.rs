//! The operator A_delta on L^2(K_H^1), the projector onto J_H^1-invariants,
//! Schur and spectral norms, transversality counts, the P_i Q_i invariants and
//! the volume bound for c_{-1}/x + c_0 + c_1 x.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{inv_mod, ipow, rem, val_int, ResRing};
use crate::compat::build_g0;
use crate::error::{Error, Result};
use crate::matgroup::{distance_to_htilde, enumerate_elements, subgroup_order, Distance, ResMat, Subgroup};

/// Dense real matrix acting on column vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub dim: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(dim: usize) -> Self {
        Dense { dim, a: vec![0.0; dim * dim] }
    }

    pub fn scalar(dim: usize, c: f64) -> Self {
        let mut m = Dense::zeros(dim);
        for i in 0..dim {
            m.a[i * dim + i] = c;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.dim + j]
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        self.a.par_chunks(self.dim).map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
    }

    pub fn tmatvec(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).into_par_iter().map(|j| (0..d).map(|i| self.a[i * d + j] * v[i]).sum()).collect()
    }

    pub fn mul(&self, o: &Dense) -> Dense {
        let d = self.dim;
        let mut out = Dense::zeros(d);
        out.a.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
            for k in 0..d {
                let x = self.a[i * d + k];
                if x != 0.0 {
                    for j in 0..d {
                        row[j] += x * o.a[k * d + j];
                    }
                }
            }
        });
        out
    }

    pub fn transpose(&self) -> Dense {
        let d = self.dim;
        let mut out = Dense::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.a[j * d + i] = self.a[i * d + j];
            }
        }
        out
    }

    /// Multiply by diag(mask) on the left and/or right.
    pub fn masked(&self, left: Option<&[bool]>, right: Option<&[bool]>) -> Dense {
        let d = self.dim;
        let mut out = self.clone();
        for i in 0..d {
            for j in 0..d {
                if left.is_some_and(|m| !m[i]) || right.is_some_and(|m| !m[j]) {
                    out.a[i * d + j] = 0.0;
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, o: &Dense) -> f64 {
        self.a.iter().zip(&o.a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

/// max(max row sum, max column sum) of |entries|.
pub fn schur_bound(m: &Dense) -> f64 {
    let d = m.dim;
    let row = (0..d).map(|i| (0..d).map(|j| m.get(i, j).abs()).sum::<f64>()).fold(0.0, f64::max);
    let col = (0..d).map(|j| (0..d).map(|i| m.get(i, j).abs()).sum::<f64>()).fold(0.0, f64::max);
    row.max(col)
}

fn power_run(m: &Dense, mut v: Vec<f64>, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>)> {
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let n0 = norm(&v);
    if n0 == 0.0 {
        return Ok((0.0, v));
    }
    v.iter_mut().for_each(|x| *x /= n0);
    let mut prev = norm(&m.matvec(&v));
    for _ in 0..max_iter {
        let w = m.tmatvec(&m.matvec(&v));
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok((0.0, v));
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let s = norm(&m.matvec(&v));
        if (s - prev).abs() <= tol * s.max(f64::MIN_POSITIVE) {
            return Ok((s, v));
        }
        prev = s;
    }
    Err(Error::NoConvergence(max_iter))
}

/// Largest singular value by power iteration on M^T M: all-ones start, then a
/// deterministic restart orthogonal to the first limit vector.
pub fn op_norm(m: &Dense, tol: f64) -> Result<f64> {
    if m.dim == 0 {
        return Ok(0.0);
    }
    let max_iter = 100_000;
    let (s1, v1) = power_run(m, vec![1.0; m.dim], tol, max_iter)?;
    let mut w: Vec<f64> = (0..m.dim).map(|i| ((i * 7919 + 13) % 97) as f64 - 48.0).collect();
    let dot: f64 = w.iter().zip(&v1).map(|(a, b)| a * b).sum();
    w.iter_mut().zip(&v1).for_each(|(a, b)| *a -= dot * b);
    let (s2, _) = power_run(m, w, tol, max_iter)?;
    Ok(s1.max(s2))
}

/// K_H(1)/K_H(2l) with equal Haar weights and the left J_H^1-coset structure.
#[derive(Clone, Debug)]
pub struct OffdiagSetup {
    pub n: usize,
    pub p: u64,
    pub l: u32,
    pub g0: ResMat,
    pub g0_inv: ResMat,
    /// GL_n points, congruent to 1 mod p, at level 2l.
    pub points: Vec<ResMat>,
    /// The same points as diag(x, 1).
    pub embedded: Vec<ResMat>,
    pub index: HashMap<u128, usize>,
    /// Haar weight of one point, vol(K_H) = 1.
    pub weight: f64,
    pub coset_of: Vec<usize>,
    pub cosets: usize,
    pub coset_size: usize,
    conj_points: Vec<ResMat>,
    conj_inv: Vec<ResMat>,
}

impl OffdiagSetup {
    pub fn new(alpha: &[u64], beta: &[u64], p: u64, l: u32, budget: u128) -> Result<Self> {
        let n = beta.len();
        let ring = ResRing::new(p, l)?;
        let g0 = build_g0(alpha, beta, ring)?.lift_to(2 * l)?;
        let g0_inv = g0.inv()?;
        let points = enumerate_elements(n, p, &Subgroup::Congruence(1), 2 * l, budget)?;
        let embedded: Vec<ResMat> = points.iter().map(|x| x.embed_upper_left()).collect();
        let index: HashMap<u128, usize> = points.iter().enumerate().map(|(i, x)| (x.code(), i)).collect();
        let gl = subgroup_order(n, p, &Subgroup::K, 1) as f64;
        let weight = 1.0 / (gl * points.len() as f64);
        let jh: Vec<&ResMat> = points.iter().filter(|x| x.off_diagonal_divisible(l)).collect();
        let mut coset_of = vec![usize::MAX; points.len()];
        let mut cosets = 0;
        for i in 0..points.len() {
            if coset_of[i] != usize::MAX {
                continue;
            }
            for j in &jh {
                coset_of[index[&points[i].mul(j).code()]] = cosets;
            }
            cosets += 1;
        }
        let conj_points: Vec<ResMat> = embedded.iter().map(|y| g0_inv.mul(y).mul(&g0)).collect();
        let conj_inv: Vec<ResMat> = conj_points.iter().map(|y| y.inv()).collect::<Result<_>>()?;
        Ok(OffdiagSetup {
            n,
            p,
            l,
            coset_size: jh.len(),
            g0,
            g0_inv,
            points,
            embedded,
            index,
            weight,
            coset_of,
            cosets,
            conj_points,
            conj_inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn big_ring(&self) -> ResRing {
        self.g0.ring
    }

    /// g in J^1 = g0 T^1 g0^-1 K(p^l).
    pub fn in_j1(&self, g: &ResMat) -> bool {
        g.is_congruent_one(1) && self.g0_inv.mul(g).mul(&self.g0).off_diagonal_divisible(self.l)
    }

    /// q^(n(n+1)l).
    pub fn normalisation(&self) -> f64 {
        (self.p as f64).powi((self.n * (self.n + 1)) as i32 * self.l as i32)
    }

    /// Support of 1_{J^1}(x^-1 delta y), row-major.
    pub fn support(&self, delta: &ResMat) -> Vec<bool> {
        let conj = |g: &ResMat| self.g0_inv.mul(g).mul(&self.g0);
        let xs: Vec<ResMat> = self.conj_inv.iter().map(|x| x.mul(&conj(delta))).collect();
        let l = self.l;
        let ys = &self.conj_points;
        if !delta.is_congruent_one(1) {
            return vec![false; ys.len() * ys.len()];
        }
        xs.par_iter().flat_map_iter(|x| ys.iter().map(move |y| x.mul(y).off_diagonal_divisible(l))).collect()
    }

    pub fn a_delta(&self, delta: &ResMat) -> Dense {
        self.from_support(&self.support(delta))
    }

    pub fn from_support(&self, s: &[bool]) -> Dense {
        let c = self.normalisation() * self.weight;
        Dense { dim: self.dim(), a: s.iter().map(|&b| if b { c } else { 0.0 }).collect() }
    }

    pub fn pi(&self) -> Dense {
        let d = self.dim();
        let c = 1.0 / self.coset_size as f64;
        let mut m = Dense::zeros(d);
        for i in 0..d {
            for j in 0..d {
                if self.coset_of[i] == self.coset_of[j] {
                    m.a[i * d + j] = c;
                }
            }
        }
        m
    }

    /// U^T M U for the orthonormal coset indicators U; ||Pi M Pi|| = ||U^T M U||.
    pub fn compress(&self, m: &Dense) -> Dense {
        let c = self.cosets;
        let mut b = Dense::zeros(c);
        for i in 0..m.dim {
            for j in 0..m.dim {
                b.a[self.coset_of[i] * c + self.coset_of[j]] += m.get(i, j);
            }
        }
        b.a.iter_mut().for_each(|x| *x /= self.coset_size as f64);
        b
    }

    pub fn random_k1(&self, rng: &mut impl Rng) -> ResMat {
        let r = self.big_ring();
        let m = r.modulus() / self.p;
        let nn = self.n + 1;
        let v: Vec<u64> = (0..nn * nn).map(|_| rng.gen_range(0..m)).collect();
        ResMat::from_fn(nn, r, |i, j| (i == j) as i128 + (self.p * v[i * nn + j]) as i128)
    }

    /// An element of K_H~ n K(1): diag(h, z) with h, z congruent to 1 mod p.
    pub fn random_htilde1(&self, rng: &mut impl Rng) -> ResMat {
        let r = self.big_ring();
        let m = r.modulus() / self.p;
        let nn = self.n + 1;
        let v: Vec<u64> = (0..nn * nn).map(|_| rng.gen_range(0..m)).collect();
        ResMat::from_fn(nn, r, |i, j| {
            if (i == nn - 1 || j == nn - 1) && i != j {
                0
            } else {
                (i == j) as i128 + (self.p * v[i * nn + j]) as i128
            }
        })
    }

    /// delta = h~ (1 + p^m E) with a unit in E's last row, so d(delta) = q^-m;
    /// m = None gives delta in K_H~.
    pub fn delta_in_stratum(&self, m: Option<u32>, rng: &mut impl Rng) -> ResMat {
        let h = self.random_htilde1(rng);
        let Some(m) = m else { return h };
        let r = self.big_ring();
        let nn = self.n + 1;
        let pm = ipow(self.p, m) as i128;
        let v: Vec<u64> = (0..nn * nn).map(|_| rng.gen_range(0..r.modulus())).collect();
        let e = ResMat::from_fn(nn, r, |i, j| {
            let x = v[i * nn + j] as i128;
            let x = if i == nn - 1 && j == 0 && x % self.p as i128 == 0 { x + 1 } else { x };
            (i == j) as i128 + pm * x
        });
        h.mul(&e)
    }

    /// Strata depths 1..2l-1 followed by the truncated stratum.
    pub fn strata(&self) -> Vec<Option<u32>> {
        (1..2 * self.l).map(Some).chain(std::iter::once(None)).collect()
    }
}

/// q^(nl) min{1, q^(-l/2) d^(-1/2)}.
pub fn offdiagw_scale(setup: &OffdiagSetup, d: &Distance) -> f64 {
    let q = setup.p as f64;
    let base = q.powi((setup.n as u32 * setup.l) as i32);
    if d.truncated {
        base
    } else {
        base * (q.powf((d.depth as f64 - setup.l as f64) / 2.0)).min(1.0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrivialReport {
    pub dim: usize,
    pub cosets: usize,
    pub deltas: usize,
    /// max schur_bound(A_delta) / q^(nl).
    pub max_schur_ratio: f64,
    pub norm_exceeds_schur: usize,
    pub adjoint_failures: usize,
    pub well_defined_failures: usize,
    pub pi_idempotent: bool,
    pub pi_self_adjoint: bool,
    pub pi_constants: bool,
    pub pi_rank: usize,
    pub pi_norm: f64,
    /// max | ||Pi 1_S1||^2 - ||1_S1 Pi 1_S1|| |, relative.
    pub max_identity_gap: f64,
}

impl TrivialReport {
    pub fn ok(&self) -> bool {
        self.max_schur_ratio <= 2.0
            && self.norm_exceeds_schur == 0
            && self.adjoint_failures == 0
            && self.well_defined_failures == 0
            && self.pi_idempotent
            && self.pi_self_adjoint
            && self.pi_constants
            && self.pi_rank == self.cosets
            && (self.pi_norm - 1.0).abs() < 1e-6
            && self.max_identity_gap < 1e-6
    }
}

fn lift_random(g: &ResMat, rng: &mut impl Rng) -> Result<ResMat> {
    let up = g.lift_to(g.level() + 1)?;
    let m = g.modulus() as i128;
    let mut out = up;
    for i in 0..g.n {
        for j in 0..g.n {
            out.set(i, j, out.get(i, j) as i128 + m * rng.gen_range(0..g.p()) as i128);
        }
    }
    Ok(out)
}

/// Trivial bound, adjointness, kernel well-definedness, projector identities.
pub fn trivial_check(setup: &OffdiagSetup, deltas_per_stratum: usize, rng: &mut impl Rng) -> Result<TrivialReport> {
    let d = setup.dim();
    let pi = setup.pi();
    let pi2 = pi.mul(&pi);
    let p = &setup.coset_of;
    let pi_constants = pi.matvec(&vec![1.0; d]).iter().all(|x| (x - 1.0).abs() < 1e-12);
    let pi_idempotent = {
        // exact: (0/1 matrix)^2 = coset_size * (0/1 matrix)
        (0..d).all(|i| (0..d).all(|j| {
            let c = (0..d).filter(|&k| p[i] == p[k] && p[k] == p[j]).count();
            c == if p[i] == p[j] { setup.coset_size } else { 0 }
        })) && pi2.max_abs_diff(&pi) < 1e-12
    };
    let pi_self_adjoint = pi.max_abs_diff(&pi.transpose()) == 0.0;
    let trace: f64 = (0..d).map(|i| pi.get(i, i)).sum();
    let pi_rank = trace.round() as usize;
    let pi_norm = op_norm(&pi, 1e-12)?;
    let q_nl = (setup.p as f64).powi((setup.n as u32 * setup.l) as i32);

    let mut deltas = Vec::new();
    for s in setup.strata() {
        for _ in 0..deltas_per_stratum {
            deltas.push(setup.delta_in_stratum(s, rng));
        }
    }
    let mut rep = TrivialReport {
        dim: d,
        cosets: setup.cosets,
        deltas: deltas.len(),
        max_schur_ratio: 0.0,
        norm_exceeds_schur: 0,
        adjoint_failures: 0,
        well_defined_failures: 0,
        pi_idempotent,
        pi_self_adjoint,
        pi_constants,
        pi_rank,
        pi_norm,
        max_identity_gap: 0.0,
    };
    let hi_setup = |g: &ResMat| -> Result<bool> {
        let g0 = setup.g0.lift_to(g.level())?;
        Ok(g.is_congruent_one(1) && g0.inv()?.mul(g).mul(&g0).off_diagonal_divisible(setup.l))
    };
    for delta in &deltas {
        let s = setup.support(delta);
        let a = setup.from_support(&s);
        let sb = schur_bound(&a);
        rep.max_schur_ratio = rep.max_schur_ratio.max(sb / q_nl);
        if op_norm(&a, 1e-10)? > sb * (1.0 + 1e-9) {
            rep.norm_exceeds_schur += 1;
        }
        let sinv = setup.support(&delta.inv()?);
        if (0..d).any(|i| (0..d).any(|j| s[i * d + j] != sinv[j * d + i])) {
            rep.adjoint_failures += 1;
        }
        let dl = lift_random(delta, rng)?;
        for i in 0..d {
            let xi = lift_random(&setup.embedded[i], rng)?.inv()?;
            for j in 0..d {
                let y = lift_random(&setup.embedded[j], rng)?;
                if hi_setup(&xi.mul(&dl).mul(&y))? != s[i * d + j] {
                    rep.well_defined_failures += 1;
                }
            }
        }
        let s1: Vec<bool> = (0..d).map(|i| (0..d).any(|j| s[i * d + j])).collect();
        let lhs = op_norm(&pi.masked(None, Some(&s1)), 1e-12)?.powi(2);
        let rhs = op_norm(&pi.masked(Some(&s1), Some(&s1)), 1e-12)?;
        rep.max_identity_gap = rep.max_identity_gap.max((lhs - rhs).abs() / rhs.max(1e-300));
    }
    Ok(rep)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StratumNorms {
    /// None for the truncated stratum.
    pub depth: Option<u32>,
    pub samples: usize,
    pub max_ratio: f64,
    pub max_pi_a_pi: f64,
    /// ||Pi A Pi|| <= ||A|| violations (A norm computed on every sample).
    pub order_violations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormScan {
    pub strata: Vec<StratumNorms>,
    pub max_ratio: f64,
    pub threshold: f64,
    pub witness: Option<String>,
}

impl NormScan {
    pub fn ok(&self) -> bool {
        self.max_ratio <= self.threshold && self.strata.iter().all(|s| s.order_violations == 0)
    }
}

/// r(delta) = ||Pi A_delta Pi|| / (q^(nl) min{1, q^(-l/2) d^(-1/2)}) over constructed strata.
pub fn offdiagw_scan(setup: &OffdiagSetup, samples: usize, threshold: f64, rng: &mut impl Rng) -> Result<NormScan> {
    let mut out = NormScan { strata: Vec::new(), max_ratio: 0.0, threshold, witness: None };
    for s in setup.strata() {
        let mut st = StratumNorms { depth: s, samples, max_ratio: 0.0, max_pi_a_pi: 0.0, order_violations: 0 };
        for _ in 0..samples {
            let delta = setup.delta_in_stratum(s, rng);
            let dist = distance_to_htilde(&delta)?;
            if dist.truncated != s.is_none() || s.is_some_and(|m| m != dist.depth) {
                return Err(Error::CounterexampleFound(format!("stratum construction missed: {delta}")));
            }
            let a = setup.a_delta(&delta);
            let b = op_norm(&setup.compress(&a), 1e-12)?;
            let an = op_norm(&a, 1e-10)?;
            if b > an * (1.0 + 1e-8) + 1e-12 {
                st.order_violations += 1;
            }
            let r = b / offdiagw_scale(setup, &dist);
            st.max_pi_a_pi = st.max_pi_a_pi.max(b);
            if r > st.max_ratio {
                st.max_ratio = r;
            }
            if r > out.max_ratio {
                out.max_ratio = r;
                out.witness = Some(delta.to_string());
            }
        }
        out.strata.push(st);
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TransverseReport {
    pub deltas: usize,
    pub vacuous: usize,
    pub comparisons: usize,
    pub counterexamples: usize,
    /// max over comparisons of count / (2 q^(1-l/2) d^(-1/2) coset_size).
    pub max_ratio: f64,
    /// Truncated-stratum deltas whose S_1 is not a union of J_H^1-cosets.
    pub structure_failures: usize,
    pub witness: Option<String>,
}

impl TransverseReport {
    pub fn ok(&self) -> bool {
        self.counterexamples == 0 && self.structure_failures == 0
    }

    pub fn merge(&mut self, o: &TransverseReport) {
        self.deltas += o.deltas;
        self.vacuous += o.vacuous;
        self.comparisons += o.comparisons;
        self.counterexamples += o.counterexamples;
        self.structure_failures += o.structure_failures;
        if o.max_ratio > self.max_ratio {
            self.max_ratio = o.max_ratio;
        }
        if self.witness.is_none() {
            self.witness = o.witness.clone();
        }
    }
}

/// Exact counts |S_1 n x J_H^1| and |S_2 n y J_H^1| against 2 q^(1-l/2) d^(-1/2) vol(J_H^1),
/// compared on squares.
pub fn transverse_count(setup: &OffdiagSetup, delta: &ResMat) -> Result<TransverseReport> {
    let d = setup.dim();
    let dist = distance_to_htilde(delta)?;
    let s = setup.support(delta);
    let s1: Vec<bool> = (0..d).map(|i| (0..d).any(|j| s[i * d + j])).collect();
    let s2: Vec<bool> = (0..d).map(|j| (0..d).any(|i| s[i * d + j])).collect();
    let mut rep = TransverseReport { deltas: 1, ..Default::default() };
    let mut counts = vec![[0u128; 2]; setup.cosets];
    for i in 0..d {
        counts[setup.coset_of[i]][0] += s1[i] as u128;
        counts[setup.coset_of[i]][1] += s2[i] as u128;
    }
    let size = setup.coset_size as u128;
    if dist.truncated {
        rep.vacuous = 1;
        if counts.iter().flatten().any(|&c| c != 0 && c != size) {
            rep.structure_failures = 1;
            rep.witness = Some(delta.to_string());
        }
        return Ok(rep);
    }
    let q = setup.p as u128;
    let m = dist.depth;
    let lhs_scale = q.pow(setup.l);
    let rhs = 4 * q.pow(2 + m) * size * size;
    let bound = 2.0 * (setup.p as f64).powf(1.0 - setup.l as f64 / 2.0 + m as f64 / 2.0) * size as f64;
    for c in counts.iter().flatten() {
        rep.comparisons += 1;
        rep.max_ratio = rep.max_ratio.max(*c as f64 / bound);
        if c * c * lhs_scale > rhs {
            rep.counterexamples += 1;
            rep.witness.get_or_insert_with(|| delta.to_string());
        }
    }
    Ok(rep)
}

/// All of K(1)/K(2l) when it fits the budget, otherwise `samples` constructed deltas per stratum.
pub fn transverse_scan(setup: &OffdiagSetup, samples: usize, budget: u128, rng: &mut impl Rng) -> Result<(TransverseReport, bool)> {
    let nn = setup.n + 1;
    let full = subgroup_order(nn, setup.p, &Subgroup::Congruence(1), 2 * setup.l);
    let work = full * setup.dim() as u128;
    let exhaustive = work <= budget;
    let deltas: Vec<ResMat> = if exhaustive {
        enumerate_elements(nn, setup.p, &Subgroup::Congruence(1), 2 * setup.l, budget)?
    } else {
        let mut v = Vec::new();
        for s in setup.strata() {
            for _ in 0..samples {
                v.push(setup.delta_in_stratum(s, rng));
            }
        }
        v
    };
    let reps: Vec<TransverseReport> = deltas.par_iter().map(|d| transverse_count(setup, d)).collect::<Result<_>>()?;
    let mut out = TransverseReport::default();
    for r in &reps {
        out.merge(r);
    }
    Ok((out, exhaustive))
}

/// P_i(g) = g_{N,i}, Q_i(g) = (g^-1)_{i,N}.
pub fn pq_functions(g: &ResMat) -> Result<(Vec<u64>, Vec<u64>)> {
    let nn = g.n;
    let gi = g.inv()?;
    Ok(((0..nn).map(|i| g.get(nn - 1, i)).collect(), (0..nn).map(|i| gi.get(i, nn - 1)).collect()))
}

pub fn pq_products(g: &ResMat) -> Result<Vec<u64>> {
    let (p, q) = pq_functions(g)?;
    let m = g.modulus() as u128;
    Ok(p.iter().zip(&q).map(|(a, b)| ((*a as u128 * *b as u128) % m) as u64).collect())
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PqReport {
    pub sigmas: usize,
    pub members: usize,
    pub sum_failures: usize,
    pub congruence_failures: usize,
    pub iz_checked: usize,
    pub iz_violations: usize,
    /// max vol(I_z) / (2 d^(-1/2) q^(-l/2-n+1)).
    pub max_iz_ratio: f64,
}

impl PqReport {
    pub fn ok(&self) -> bool {
        self.sum_failures == 0 && self.congruence_failures == 0 && self.iz_violations == 0
    }
}

/// For sigma in each stratum and every t_H in T_H^1 mod p^(2l): membership of
/// sigma t_H g0 in K_H^1 g0 T^1 K(p^l), the P_i Q_i congruence, and the I_z volume bound.
pub fn pqconst_check(setup: &OffdiagSetup, samples: usize, budget: u128, rng: &mut impl Rng) -> Result<PqReport> {
    let n = setup.n;
    let nn = n + 1;
    let l = setup.l;
    let p = setup.p;
    let g0l = setup.g0.reduce_to(l)?;
    let kh = enumerate_elements(n, p, &Subgroup::Congruence(1), l, budget)?;
    let t1 = enumerate_elements(nn, p, &Subgroup::TorusCompact, l, budget)?
        .into_iter()
        .filter(|t| t.is_congruent_one(1))
        .collect::<Vec<_>>();
    let mut target: HashSet<u128> = HashSet::new();
    for k in &kh {
        let left = k.embed_upper_left().mul(&g0l);
        for t in &t1 {
            target.insert(left.mul(t).code());
        }
    }
    let th: Vec<ResMat> = enumerate_elements(nn, p, &Subgroup::TorusCompact, 2 * l, budget)?
        .into_iter()
        .filter(|t| t.is_congruent_one(1) && t.get(n, n) == 1)
        .collect();
    let base = pq_products(&setup.g0)?;
    let ml = ipow(p, l);
    let q = p as u128;
    let mut rep = PqReport::default();
    let mut sigmas = vec![ResMat::identity(nn, setup.big_ring())];
    for s in setup.strata() {
        for _ in 0..samples {
            sigmas.push(setup.delta_in_stratum(s, rng));
        }
    }
    for sigma in &sigmas {
        rep.sigmas += 1;
        let mut count: u128 = 0;
        for t in &th {
            let g = sigma.mul(t).mul(&setup.g0);
            let (pp, qq) = pq_functions(&g)?;
            let sum: u128 = pp.iter().zip(&qq).map(|(a, b)| *a as u128 * *b as u128).sum();
            if sum % g.modulus() as u128 != 1 {
                rep.sum_failures += 1;
            }
            if target.contains(&g.reduce_to(l)?.code()) {
                count += 1;
                rep.members += 1;
                let v = pq_products(&g)?;
                if v.iter().zip(&base).any(|(a, b)| a % ml != b % ml) {
                    rep.congruence_failures += 1;
                }
            }
        }
        let dist = distance_to_htilde(sigma)?;
        if !dist.truncated {
            rep.iz_checked += 1;
            let m = dist.depth;
            // vol(I_z) = count q^-n / p^(n(2l-1)); bound 2 q^(m/2) q^(-l/2-n+1).
            let e = n as u32 * (2 * l - 1);
            if count * count * q.pow(l) > 4 * q.pow(m + 2 + 2 * e) {
                rep.iz_violations += 1;
            }
            let vol = count as f64 * (p as f64).powi(-(n as i32)) / (p as f64).powi(e as i32);
            let bound = 2.0 * (p as f64).powf(m as f64 / 2.0 - l as f64 / 2.0 - n as f64 + 1.0);
            rep.max_iz_ratio = rep.max_iz_ratio.max(vol / bound);
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolyReport {
    pub p: u64,
    pub l: u32,
    pub level: u32,
    pub trials: usize,
    pub counterexamples: usize,
    pub max_ratio: f64,
    /// Per valuation of c_1: number of trials.
    pub by_valuation: BTreeMap<u32, usize>,
}

/// Number of x in 1 + p mod p^level with c_{-1}/x + c_0 + c_1 x = y mod p^l.
pub fn poly_count(p: u64, l: u32, level: u32, c: [u64; 3], y: u64) -> Result<u128> {
    let m = ipow(p, level);
    let ml = ipow(p, l);
    if c[2] % m == 0 {
        return Err(Error::InvalidConfig("c1 must be nonzero".into()));
    }
    let mut count = 0;
    for k in 0..m / p {
        let x = 1 + p * k;
        let xi = inv_mod(x, m).ok_or(Error::NonUnit)?;
        let f = (c[0] as u128 * xi as u128 + c[1] as u128 + c[2] as u128 * x as u128) % m as u128;
        if rem(f as i128 - y as i128, ml) == 0 {
            count += 1;
        }
    }
    Ok(count)
}

/// Random trials of vol(f^-1(y + p^l)) <= 2 d^(-1/2) q^(-l/2), exact on squares.
pub fn poly_volume_check(p: u64, l: u32, trials: usize, rng: &mut impl Rng) -> Result<PolyReport> {
    let level = 2 * l + 1;
    let m = ipow(p, level);
    let q = p as u128;
    let mut rep = PolyReport { p, l, level, trials, counterexamples: 0, max_ratio: 0.0, by_valuation: BTreeMap::new() };
    for _ in 0..trials {
        let e = rng.gen_range(0..level);
        let mut u = rng.gen_range(1..m);
        while u % p == 0 {
            u = rng.gen_range(1..m);
        }
        let c1 = (ipow(p, e) as u128 * u as u128 % m as u128) as u64;
        let c = [rng.gen_range(0..m), rng.gen_range(0..m), c1];
        debug_assert_eq!(val_int(c1 as i128, p), e);
        let y = rng.gen_range(0..m);
        let count = poly_count(p, l, level, c, y)?;
        *rep.by_valuation.entry(e).or_default() += 1;
        if count * count > 4 * q.pow(2 * level + e - l) {
            rep.counterexamples += 1;
        }
        let vol = count as f64 * (p as f64).powi(-(level as i32));
        let bound = 2.0 * (p as f64).powf((e as f64 - l as f64) / 2.0);
        rep.max_ratio = rep.max_ratio.max(vol / bound);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const B: u128 = 1 << 26;

    #[test]
    fn dense_norms() {
        assert_eq!(op_norm(&Dense::zeros(3), 1e-12).unwrap(), 0.0);
        assert!((op_norm(&Dense::scalar(4, 3.0), 1e-12).unwrap() - 3.0).abs() < 1e-9);
        assert_eq!(schur_bound(&Dense::zeros(2)), 0.0);
        let m = Dense { dim: 2, a: vec![1.0, -1.0, 1.0, -1.0] };
        // all-ones lies in the kernel; the restart finds sqrt(2)*sqrt(2)
        assert!((op_norm(&m, 1e-12).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn small_setup() {
        let s = OffdiagSetup::new(&[0, 1], &[2], 3, 1, B).unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.cosets, 1);
        let id = ResMat::identity(2, s.big_ring());
        assert!(s.in_j1(&id));
        let a = s.a_delta(&id);
        assert!(a.get(0, 0) > 0.0);
        assert!((op_norm(&s.pi(), 1e-12).unwrap() - 1.0).abs() < 1e-9);
        assert!((schur_bound(&s.pi()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = OffdiagSetup::new(&[0, 1], &[2], 3, 2, B).unwrap();
        assert_eq!(s.dim(), 27);
        let r = trivial_check(&s, 3, &mut rng).unwrap();
        assert!(r.ok(), "{r:?}");
    }

    #[test]
    fn transverse_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = OffdiagSetup::new(&[0, 1], &[2], 3, 1, B).unwrap();
        let (r, exhaustive) = transverse_scan(&s, 5, B, &mut rng).unwrap();
        assert!(exhaustive);
        assert_eq!(r.deltas, 81);
        assert!(r.ok(), "{r:?}");
    }

    #[test]
    fn pq_identity_and_equivariance() {
        let r = ResRing::new(5, 2).unwrap();
        let g = ResMat::from_rows(r, &[vec![1, 2, 3], vec![0, 1, 4], vec![2, 0, 1]]);
        let (p, q) = pq_functions(&ResMat::identity(3, r)).unwrap();
        assert_eq!((p, q), (vec![0, 0, 1], vec![0, 0, 1]));
        let h = ResMat::from_rows(r, &[vec![2, 1, 0], vec![1, 1, 0], vec![0, 0, 1]]);
        let t = ResMat::diag(r, &[3, 7, 2]);
        assert_eq!(pq_products(&h.mul(&g).mul(&t)).unwrap(), pq_products(&g).unwrap());
        let sum: u64 = pq_products(&g).unwrap().iter().sum::<u64>() % 25;
        assert_eq!(sum, 1);
    }

    #[test]
    fn poly_examples() {
        // f(x) = x - 1, y = 0, l = 1: every x in 1 + p
        let c = poly_count(3, 1, 3, [0, 26, 1], 0).unwrap();
        assert_eq!(c, 9);
        assert!(poly_count(3, 1, 3, [1, 1, 0], 0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = poly_volume_check(3, 2, 100, &mut rng).unwrap();
        assert_eq!(r.counterexamples, 0);
    }
}
