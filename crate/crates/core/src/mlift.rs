//! chi-types, microlocal vectors in the compact model and their matrix
//! coefficients, type uniqueness and the diagonal-adjustment step.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{inv_mod, ipow, CycAccumulator, ResRing, Root, Q};
use crate::chargeo::GenericTuple;
use crate::error::{Error, Result};
use crate::matgroup::{
    enumerate_elements, for_each_tuple, membership, subgroup_order, CosetSpace, ResMat, Subgroup,
};

/// Cyclotomic order holding every character value at depth 2l.
pub fn value_order(p: u64, l: u32) -> u64 {
    ipow(p, 2 * l) * (p - 1)
}

/// A chi-type (T~(l)^k, chi~^k) with conjugator k, stored at level 2l.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChiType {
    pub chars: GenericTuple,
    pub conj: ResMat,
    conj_inv: ResMat,
}

impl ChiType {
    pub fn new(chars: GenericTuple, conj: ResMat) -> Result<Self> {
        let l = chars.l;
        if conj.n != chars.len() {
            return Err(Error::DimensionMismatch("conjugator size".into()));
        }
        let conj = conj.lift_to(2 * l)?;
        let conj_inv = conj.inv()?;
        Ok(ChiType {
            chars,
            conj,
            conj_inv,
        })
    }

    pub fn standard(chars: GenericTuple) -> Result<Self> {
        let ring = ResRing::new(chars.p, 2 * chars.l)?;
        let n = chars.len();
        ChiType::new(chars, ResMat::identity(n, ring))
    }

    pub fn l(&self) -> u32 {
        self.chars.l
    }

    pub fn group(&self) -> Subgroup {
        Subgroup::TypeGroup {
            conj: self.conj,
            depth: self.l(),
        }
    }

    pub fn contains(&self, j: &ResMat) -> bool {
        self.conj_inv
            .mul(j)
            .mul(&self.conj)
            .off_diagonal_divisible(self.l())
    }

    /// lambda~(j) = chi~(k^-1 j k).
    pub fn lambda(&self, j: &ResMat) -> Result<Root> {
        self.chars.chi_tilde(&self.conj_inv.mul(j).mul(&self.conj))
    }

    pub fn elements(&self, budget: u128) -> Result<Vec<ResMat>> {
        enumerate_elements(self.chars.len(), self.chars.p, &self.group(), 2 * self.l(), budget)
    }
}

/// The vector of a chi-type in the compact model of I(chi): supported on
/// B_K T~(l) k^-1 with f(b a k^-1) = chi(b) chi~(a).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MicrolocalVector {
    pub ty: ChiType,
}

impl MicrolocalVector {
    pub fn new(ty: ChiType) -> Self {
        MicrolocalVector { ty }
    }

    /// The dual vector in I(chi^-1) attached to (J, lambda~^-1).
    pub fn dual(&self) -> MicrolocalVector {
        MicrolocalVector {
            ty: ChiType::new(self.ty.chars.inverse(), self.ty.conj).unwrap(),
        }
    }

    pub fn eval(&self, x: &ResMat) -> Result<Option<Root>> {
        let y = x.mul(&self.ty.conj);
        standard_value(&self.ty.chars, &y)
    }
}

/// Value of the standard vector at y: chi(b) when y = b u with u lower unipotent in K(l).
pub fn standard_value(chars: &GenericTuple, y: &ResMat) -> Result<Option<Root>> {
    if !y.lower_divisible(chars.l) {
        return Ok(None);
    }
    let n = y.n;
    let m = y.modulus();
    let minors: Vec<u64> = (0..=n).map(|k| y.trailing_minor(k)).collect();
    let mut d = vec![0u64; n];
    for i in 0..n {
        let num = minors[n - i];
        let den = minors[n - i - 1];
        let inv = inv_mod(den, m).ok_or(Error::NonUnit)?;
        d[i] = (num as u128 * inv as u128 % m as u128) as u64;
    }
    chars.eval_diag(&d).map(Some)
}

/// Lower unitriangular matrices with strictly lower entries in p^l, at level 2l.
pub fn lower_unipotent_reps(n: usize, p: u64, l: u32) -> Result<Vec<ResMat>> {
    let ring = ResRing::new(p, 2 * l)?;
    let pl = ipow(p, l);
    let slots: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    for_each_tuple(slots.len(), pl, |t| {
        let mut u = ResMat::identity(n, ring);
        for (k, &(i, j)) in slots.iter().enumerate() {
            u.set(i, j, (t[k] * pl) as i128);
        }
        out.push(u);
    });
    Ok(out)
}

/// Right coset representatives of B_K \ K at level 2l.
pub fn borel_right_reps(n: usize, p: u64, l: u32, budget: u128) -> Result<Vec<ResMat>> {
    let cs = CosetSpace::build(n, p, &Subgroup::K, &Subgroup::Borel, 2 * l, budget)?;
    cs.reps.iter().map(|g| g.inv()).collect()
}

/// rho(g) = avg_k v(k g) v^(k), as an exact sum times a rational weight.
#[derive(Clone, Debug)]
pub struct MatrixCoefficient {
    pub sum: CycAccumulator,
    pub weight: Q,
}

impl MatrixCoefficient {
    pub fn is_zero(&self) -> bool {
        self.sum.is_zero()
    }

    pub fn value(&self) -> num_complex::Complex64 {
        self.sum.embed() * crate::arith::q_to_f64(&self.weight)
    }
}

fn borel_weight(n: usize, p: u64, l: u32) -> Q {
    let b = subgroup_order(n, p, &Subgroup::Borel, 2 * l);
    let g = subgroup_order(n, p, &Subgroup::K, 2 * l);
    Q::new(b as i128, g as i128)
}

/// Matrix coefficient of v against its dual, summing over the support of the dual.
pub fn matrix_coefficient(v: &MicrolocalVector, g: &ResMat, units: &[ResMat]) -> Result<MatrixCoefficient> {
    let ty = &v.ty;
    let dual = v.dual();
    let (p, l, n) = (ty.chars.p, ty.l(), ty.chars.len());
    let mut sum = CycAccumulator::new(value_order(p, l));
    for u in units {
        let x = u.mul(&ty.conj_inv);
        if let (Some(a), Some(b)) = (v.eval(&x.mul(g))?, dual.eval(&x)?) {
            sum.add_root(&a.mul(&b), 1);
        }
    }
    Ok(MatrixCoefficient {
        sum,
        weight: borel_weight(n, p, l),
    })
}

/// Matrix coefficient summed over all of B_K \ K (reference path).
pub fn matrix_coefficient_full(
    v: &MicrolocalVector,
    vd: &MicrolocalVector,
    g: &ResMat,
    right_reps: &[ResMat],
) -> Result<MatrixCoefficient> {
    let (p, l, n) = (v.ty.chars.p, v.ty.l(), v.ty.chars.len());
    let mut sum = CycAccumulator::new(value_order(p, l));
    for x in right_reps {
        if let (Some(a), Some(b)) = (v.eval(&x.mul(g))?, vd.eval(x)?) {
            sum.add_root(&a.mul(&b), 1);
        }
    }
    Ok(MatrixCoefficient {
        sum,
        weight: borel_weight(n, p, l),
    })
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SupportScan {
    pub checked: usize,
    pub inside: usize,
    /// g outside J with rho(g) != 0.
    pub nonzero_outside: Vec<String>,
    /// g inside J where rho(g) != lambda~(g) rho(1).
    pub equivariance_failures: Vec<String>,
}

impl SupportScan {
    pub fn ok(&self) -> bool {
        self.nonzero_outside.is_empty() && self.equivariance_failures.is_empty()
    }
}

/// Check supp(rho) inside K equals J, with rho(j) = lambda~(j) rho(1) on J.
pub fn support_scan(v: &MicrolocalVector, gs: &[ResMat]) -> Result<SupportScan> {
    let ty = &v.ty;
    let units = lower_unipotent_reps(ty.chars.len(), ty.chars.p, ty.l())?;
    let one = ResMat::identity(ty.conj.n, ty.conj.ring);
    let rho1 = matrix_coefficient(v, &one, &units)?.sum.to_cycint();
    let rows: Vec<Result<(bool, bool, bool)>> = gs
        .par_iter()
        .map(|g| {
            let rho = matrix_coefficient(v, g, &units)?;
            let inside = ty.contains(g);
            if inside {
                let expect = crate::arith::CycInt::from_root(&ty.lambda(g)?).mul(&rho1);
                Ok((true, true, rho.sum.to_cycint() == expect.in_order(rho.sum.m)))
            } else {
                Ok((false, rho.is_zero(), true))
            }
        })
        .collect();
    let mut out = SupportScan::default();
    for (g, r) in gs.iter().zip(rows) {
        let (inside, zero_ok, eq_ok) = r?;
        out.checked += 1;
        if inside {
            out.inside += 1;
            if !eq_ok {
                out.equivariance_failures.push(g.to_string());
            }
        } else if !zero_ok {
            out.nonzero_outside.push(g.to_string());
        }
    }
    Ok(out)
}

/// dim of the lambda-isotypic part of {f on K/K(2l) : f(bk) = chi(b) f(k)} for a
/// character `lambda` of the finite group `j_elems`, via the trace of the projector.
pub fn isotypic_dimension_for(
    chars: &GenericTuple,
    j_elems: &[ResMat],
    lambda: impl Fn(&ResMat) -> Result<Root> + Sync,
    right_reps: &[ResMat],
) -> Result<u64> {
    let m = value_order(chars.p, chars.l);
    let rx: Vec<(ResMat, ResMat)> = right_reps.iter().map(|x| (*x, x.inv().unwrap())).collect();
    let parts: Vec<Result<CycAccumulator>> = j_elems
        .par_chunks(64)
        .map(|chunk| {
            let mut acc = CycAccumulator::new(m);
            for a in chunk {
                let la = lambda(a)?.inv();
                for (x, xi) in &rx {
                    let c = x.mul(a).mul(xi);
                    if c.lower_divisible(c.level()) {
                        let d: Vec<u64> = (0..c.n).map(|i| c.get(i, i)).collect();
                        acc.add_root(&la.mul(&chars.eval_diag(&d)?), 1);
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut acc = CycAccumulator::new(m);
    for p in parts {
        acc.merge(&p?);
    }
    let tr = acc
        .to_cycint()
        .as_integer()
        .ok_or_else(|| Error::NotAType("projector trace is not rational".into()))?;
    let size = j_elems.len() as i64;
    if tr % size != 0 || tr < 0 {
        return Err(Error::NotAType(format!("trace {tr} not divisible by |J| = {size}")));
    }
    Ok((tr / size) as u64)
}

pub fn isotypic_dimension(ty: &ChiType, budget: u128) -> Result<u64> {
    let reps = borel_right_reps(ty.chars.len(), ty.chars.p, ty.l(), budget)?;
    let js = ty.elements(budget)?;
    isotypic_dimension_for(&ty.chars, &js, |a| ty.lambda(a), &reps)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeUniqueness {
    pub types: usize,
    /// Indices of the types under which the standard vector is equivariant.
    pub equivariant: Vec<usize>,
    pub dimensions: Vec<u64>,
    pub stabilizer_size: usize,
    pub stabilizer_is_j: bool,
}

impl TypeUniqueness {
    pub fn ok(&self) -> bool {
        self.equivariant.len() == 1
            && self.dimensions.iter().all(|&d| d == 1)
            && self.stabilizer_is_j
    }
}

/// Enumerate all chi-types via K/T~(l), test the standard vector against each,
/// and compute the stabilizer of the standard type exhaustively.
pub fn unique_type_check(chars: &GenericTuple, budget: u128) -> Result<TypeUniqueness> {
    let (n, p, l) = (chars.len(), chars.p, chars.l);
    let type_space = CosetSpace::build(n, p, &Subgroup::K, &Subgroup::TorusTilde(l), l, budget)?;
    unique_type_check_with(chars, &type_space, budget)
}

/// As `unique_type_check`, with K/T~(l) at level l supplied by the caller.
pub fn unique_type_check_with(chars: &GenericTuple, type_space: &CosetSpace, budget: u128) -> Result<TypeUniqueness> {
    let (n, p, l) = (chars.len(), chars.p, chars.l);
    if type_space.n != n || type_space.p != p || type_space.level != l || type_space.sub != Subgroup::TorusTilde(l) {
        return Err(Error::SpecMismatch("type space does not match the character tuple".into()));
    }
    let reps = borel_right_reps(n, p, l, budget)?;
    let std_ty = ChiType::standard(chars.clone())?;
    let v = MicrolocalVector::new(std_ty.clone());
    let mut equivariant = Vec::new();
    let mut dimensions = Vec::new();
    for (idx, k) in type_space.reps.iter().enumerate() {
        let ty = ChiType::new(chars.clone(), k.lift_to(2 * l)?)?;
        let js = ty.elements(budget)?;
        let mut eq = true;
        'outer: for a in &js {
            let la = ty.lambda(a)?;
            for x in &reps {
                let lhs = v.eval(&x.mul(a))?;
                let rhs = v.eval(x)?.map(|r| r.mul(&la));
                if lhs.map(|r| r.normalized()) != rhs.map(|r| r.normalized()) {
                    eq = false;
                    break 'outer;
                }
            }
        }
        if eq {
            equivariant.push(idx);
        }
        dimensions.push(isotypic_dimension_for(chars, &js, |a| ty.lambda(a), &reps)?);
    }
    let js = std_ty.elements(budget)?;
    let jset: HashSet<u128> = js.iter().map(|j| j.code()).collect();
    let gs = enumerate_elements(n, p, &Subgroup::K, 2 * l, budget)?;
    let stab: Vec<&ResMat> = gs
        .par_iter()
        .filter(|k| {
            let ki = k.inv().unwrap();
            js.iter().all(|a| {
                let c = ki.mul(a).mul(k);
                jset.contains(&c.code())
                    && std_ty.lambda(&c).unwrap().normalized() == std_ty.lambda(a).unwrap().normalized()
            })
        })
        .collect();
    let stabilizer_is_j = stab.len() == js.len() && stab.iter().all(|k| jset.contains(&k.code()));
    Ok(TypeUniqueness {
        types: type_space.len(),
        equivariant,
        dimensions,
        stabilizer_size: stab.len(),
        stabilizer_is_j,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiagAdjust {
    pub k: ResMat,
    /// Diagonal part of k (Y + y) k^-1.
    pub z_diag: ResMat,
    /// Off-diagonal part, divisible by p^(l+1).
    pub z_off: ResMat,
}

fn split_diag(m: &ResMat) -> (ResMat, ResMat) {
    let d = ResMat::from_fn(m.n, m.ring, |i, j| if i == j { m.get(i, j) as i128 } else { 0 });
    (d, m.sub(&d))
}

/// One step: k = 1 + p^l A in K(l) with k (Y + y) k^-1 = Z + z, z in p^(l+1).
pub fn diag_adjust(y_diag: &ResMat, y: &ResMat, l: u32) -> Result<DiagAdjust> {
    let n = y_diag.n;
    let p = y_diag.p();
    if y_diag.level() <= l {
        return Err(Error::LevelTooLow {
            have: y_diag.level(),
            need: l + 1,
        });
    }
    if !y_diag.off_diagonal_divisible(y_diag.level()) {
        return Err(Error::NotRegular);
    }
    let diag: Vec<u64> = (0..n).map(|i| y_diag.get(i, i)).collect();
    for i in 0..n {
        for j in 0..i {
            if (diag[i] + p - diag[j] % p) % p == 0 {
                return Err(Error::NotRegular);
            }
        }
    }
    let pl = ipow(p, l);
    if (0..n).any(|i| (0..n).any(|j| y.get(i, j) % pl != 0)) {
        return Err(Error::NotSmall(l));
    }
    let mut a = ResMat::zero(n, y_diag.ring);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let target = -((y.get(i, j) / pl) as i128);
                let gap = (diag[j] as i128 - diag[i] as i128).rem_euclid(p as i128) as u64;
                let gi = inv_mod(gap, p).unwrap() as i128;
                a.set(i, j, (target * gi).rem_euclid(p as i128));
            }
        }
    }
    let k = ResMat::identity(n, y_diag.ring).add(&a.scale(pl as i128));
    let conj = k.mul(&y_diag.add(y)).mul(&k.inv()?);
    let (z_diag, z_off) = split_diag(&conj);
    Ok(DiagAdjust { k, z_diag, z_off })
}

/// Iterate the step from depth l up to the working level, diagonalising Y + y.
pub fn diag_adjust_full(y_diag: &ResMat, y: &ResMat, l: u32) -> Result<DiagAdjust> {
    let level = y_diag.level();
    let mut k = ResMat::identity(y_diag.n, y_diag.ring);
    let mut cur_d = *y_diag;
    let mut cur_o = *y;
    for depth in l..level {
        let step = diag_adjust(&cur_d, &cur_o, depth)?;
        k = step.k.mul(&k);
        cur_d = step.z_diag;
        cur_o = step.z_off;
    }
    if !cur_o.entries().iter().all(|&e| e == 0) {
        return Err(Error::SpecMismatch("adjustment did not converge".into()));
    }
    Ok(DiagAdjust {
        k,
        z_diag: cur_d,
        z_off: cur_o,
    })
}

/// Whether `g` is in the group of the type, at the working level.
pub fn in_type_group(ty: &ChiType, g: &ResMat) -> Result<bool> {
    membership(g, &ty.group())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars231() -> GenericTuple {
        GenericTuple::from_fingerprint(3, 1, &[0, 1], &[0, 1]).unwrap()
    }

    #[test]
    fn standard_vector_is_equivariant() {
        let chars = chars231();
        let ty = ChiType::standard(chars.clone()).unwrap();
        let v = MicrolocalVector::new(ty.clone());
        let ring = ResRing::new(3, 2).unwrap();
        let bs = enumerate_elements(2, 3, &Subgroup::Borel, 2, 1 << 20).unwrap();
        let js = ty.elements(1 << 20).unwrap();
        let gs = enumerate_elements(2, 3, &Subgroup::K, 2, 1 << 20).unwrap();
        for x in gs.iter().step_by(37) {
            let fx = v.eval(x).unwrap();
            for b in bs.iter().step_by(11) {
                let d: Vec<u64> = (0..2).map(|i| b.get(i, i)).collect();
                let cb = chars.eval_diag(&d).unwrap();
                let lhs = v.eval(&b.mul(x)).unwrap().map(|r| r.normalized());
                assert_eq!(lhs, fx.map(|r| r.mul(&cb).normalized()));
            }
            for a in js.iter().step_by(13) {
                let lhs = v.eval(&x.mul(a)).unwrap().map(|r| r.normalized());
                let la = ty.lambda(a).unwrap();
                assert_eq!(lhs, fx.map(|r| r.mul(&la).normalized()));
            }
        }
        assert!(v.eval(&ResMat::identity(2, ring)).unwrap().unwrap().is_one());
    }

    #[test]
    fn coefficient_paths_agree() {
        let chars = chars231();
        let ring = ResRing::new(3, 2).unwrap();
        let conj = ResMat::from_rows(ring, &[vec![1, 2], vec![1, 1]]);
        let ty = ChiType::new(chars, conj).unwrap();
        let v = MicrolocalVector::new(ty);
        let vd = v.dual();
        let reps = borel_right_reps(2, 3, 1, 1 << 20).unwrap();
        let units = lower_unipotent_reps(2, 3, 1).unwrap();
        let gs = enumerate_elements(2, 3, &Subgroup::K, 2, 1 << 20).unwrap();
        for g in gs.iter().step_by(29) {
            let a = matrix_coefficient(&v, g, &units).unwrap();
            let b = matrix_coefficient_full(&v, &vd, g, &reps).unwrap();
            assert_eq!(a.sum.to_cycint(), b.sum.to_cycint());
        }
    }

    #[test]
    fn isotypic_dimension_is_one() {
        let ty = ChiType::standard(chars231()).unwrap();
        assert_eq!(isotypic_dimension(&ty, 1 << 22).unwrap(), 1);
    }

    #[test]
    fn non_type_character_has_no_vectors() {
        let chars = chars231();
        let other = GenericTuple::from_fingerprint(3, 1, &[1, 2], &[0, 1]).unwrap();
        let ty = ChiType::standard(chars.clone()).unwrap();
        let wrong = ChiType::standard(other).unwrap();
        let reps = borel_right_reps(2, 3, 1, 1 << 20).unwrap();
        let js = ty.elements(1 << 20).unwrap();
        let d = isotypic_dimension_for(&chars, &js, |a| wrong.lambda(a), &reps).unwrap();
        assert_eq!(d, 0);
    }

    #[test]
    fn diag_adjust_example() {
        let ring = ResRing::new(3, 2).unwrap();
        let yd = ResMat::diag(ring, &[0, 1]);
        let y = ResMat::from_rows(ring, &[vec![0, 3], vec![3, 0]]);
        let r = diag_adjust(&yd, &y, 1).unwrap();
        assert_eq!(r.k, ResMat::from_rows(ring, &[vec![1, 6], vec![3, 1]]));
        assert!(r.z_off.entries().iter().all(|e| e % 9 == 0));
        let bad = ResMat::diag(ring, &[1, 4]);
        assert_eq!(diag_adjust(&bad, &y, 1), Err(Error::NotRegular));
    }

    #[test]
    fn diag_adjust_full_converges() {
        let ring = ResRing::new(5, 4).unwrap();
        let yd = ResMat::diag(ring, &[0, 1, 3]);
        let y = ResMat::from_rows(ring, &[vec![5, 10, 15], vec![20, 0, 5], vec![35, 40, 10]]);
        let r = diag_adjust_full(&yd, &y, 1).unwrap();
        let lhs = r.k.mul(&yd.add(&y)).mul(&r.k.inv().unwrap());
        assert_eq!(lhs, r.z_diag);
        assert!(r.k.is_congruent_one(1));
    }
}
