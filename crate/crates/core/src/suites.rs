//! Named verification suites and the parallel runner.

use std::time::Instant;

use num_complex::Complex64;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::arith::{ipow, ResRing, Q};
use crate::cache::Cache;
use crate::chargeo::{exp_log_check, generic_agreement, GenericPair, GenericTuple};
use crate::compat::{atrans_check, build_g0, compatible_orbit_check, fan_pall_random_check, g0_entries_are_units, verify_conjugate_identity};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::exponents::{exponents, parse_rational, theta_zero_consistent};
use crate::hecke::{
    amplifier_lower_bound, amplifier_relation, bracket, CosetOracle, dominant_cochars, hecke_height_check, hecke_restriction_value,
    is_central, macdonald_spherical, norm_difference_identity, phibound_check, random_h_parameter, random_tempered,
    restriction_decomposition, spherical_oracle, QSqrt,
};
use crate::matgroup::{enumerate_elements, subgroup_order, ResMat, Subgroup};
use crate::mlift::{diag_adjust_full, support_scan, unique_type_check_with, ChiType, MicrolocalVector, TypeUniqueness};
use crate::offdiag::{offdiagw_scan, poly_volume_check, pqconst_check, transverse_scan, trivial_check, OffdiagSetup};
use crate::report::{Check, Report, SuiteResult, REPORT_VERSION};
use crate::rtfmodel::{rtf_inequality_scan, rtf_projector_scan, FiniteModel};

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub cache: &'a Cache,
}

type SuiteFn = fn(&Ctx, &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)>;

const SUITES: &[(&str, SuiteFn)] = &[
    ("chargeo.explog", chargeo_explog),
    ("chargeo.duality", chargeo_duality),
    ("chargeo.generic", chargeo_generic),
    ("mlift.uniqueness", mlift_uniqueness),
    ("mlift.support", mlift_support),
    ("mlift.type-unique", mlift_type_unique),
    ("mlift.diag-adjust", mlift_diag_adjust),
    ("compat.g0", compat_g0),
    ("compat.fan-pall", compat_fan_pall),
    ("compat.orbit", compat_orbit),
    ("compat.atrans", compat_atrans),
    ("hecke.amplifier", hecke_amplifier),
    ("hecke.spherical", hecke_spherical),
    ("hecke.restriction", hecke_restriction),
    ("hecke.height", hecke_height),
    ("offdiag.trivial", offdiag_trivial),
    ("offdiag.norm-scan", offdiag_norm_scan),
    ("offdiag.transverse", offdiag_transverse),
    ("offdiag.pq", offdiag_pq),
    ("offdiag.poly", offdiag_poly),
    ("rtf.inequality", rtf_inequality),
    ("rtf.projector", rtf_projector),
    ("exponents", exponent_table),
];

pub fn names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.0).collect()
}

/// Suites that need a generic pair, hence 2n+1 distinct residues modulo p.
pub fn needs_pair(name: &str) -> bool {
    name.starts_with("compat.") || (name.starts_with("offdiag.") && name != "offdiag.poly") || name == "mlift.support"
}

/// Per-suite generator: depends on the seed and the suite name only.
pub fn suite_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

fn base_params(cfg: &RunConfig) -> Value {
    json!({ "n": cfg.n, "p": cfg.p, "l": cfg.l, "seed": cfg.seed })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Some(x), Value::Object(y)) = (a.as_object_mut(), b) {
        x.extend(y);
    }
    a
}

pub fn run_suite(name: &str, ctx: &Ctx) -> SuiteResult {
    let start = Instant::now();
    let params = base_params(ctx.cfg);
    let Some((_, f)) = SUITES.iter().find(|s| s.0 == name) else {
        return SuiteResult::failed(name, params, Error::UnknownSuite(name.into()).to_string(), 0.0);
    };
    let c = ctx.cfg;
    if needs_pair(name) && (c.p as usize) < 2 * c.n + 1 {
        return SuiteResult::skipped(name, params, format!("needs p >= {} for a generic pair", 2 * c.n + 1), 0.0);
    }
    let mut rng = suite_rng(c.seed, name);
    let out = f(ctx, &mut rng);
    let t = start.elapsed().as_secs_f64();
    match out {
        Ok((extra, checks)) => SuiteResult::from_checks(name, merge(params, extra), checks, t),
        Err(e @ Error::BudgetExceeded { .. }) => SuiteResult::skipped(name, params, e.to_string(), t),
        Err(e) => SuiteResult::failed(name, params, e.to_string(), t),
    }
}

/// Validates `config`, then runs its suites on the worker pool; results keep the requested order.
pub fn run_suites(config: &RunConfig) -> Result<Report> {
    let mut cfg = config.clone();
    cfg.validate()?;
    let cache = Cache::resolve(cfg.cache_dir.as_deref());
    let start = Instant::now();
    let ctx = Ctx { cfg: &cfg, cache: &cache };
    let suites: Vec<SuiteResult> = cfg
        .suites
        .par_iter()
        .map(|name| {
            if let Some(limit) = cfg.time_budget {
                let el = start.elapsed().as_secs_f64();
                if el > limit {
                    return SuiteResult::skipped(
                        name,
                        base_params(&cfg),
                        format!("time budget of {limit} s spent before start ({el:.1} s)"),
                        0.0,
                    );
                }
            }
            run_suite(name, &ctx)
        })
        .collect();
    Ok(Report { version: REPORT_VERSION.into(), config: cfg.clone(), suites, wall_time: start.elapsed().as_secs_f64() })
}

fn pair(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<GenericPair> {
    GenericPair::random(cfg.n, cfg.p, cfg.l, rng)
}

/// A generic tuple for GL_{n+1}: the first half of a random pair when one exists.
fn type_chars(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<GenericTuple> {
    if cfg.p as usize > 2 * cfg.n {
        return Ok(pair(cfg, rng)?.g);
    }
    let d: Vec<u64> = (0..=cfg.n as u64).collect();
    GenericTuple::from_fingerprint(cfg.p, cfg.l, &d, &vec![0; cfg.n + 1])
}

/// Uniform element of GL_nn(Z/p^level).
pub fn random_k(nn: usize, p: u64, level: u32, rng: &mut impl Rng) -> Result<ResMat> {
    let ring = ResRing::new(p, level)?;
    let m = ring.modulus();
    loop {
        let v: Vec<u64> = (0..nn * nn).map(|_| rng.gen_range(0..m)).collect();
        let g = ResMat::from_fn(nn, ring, |i, j| v[i * nn + j] as i128);
        if g.is_invertible() {
            return Ok(g);
        }
    }
}

fn budget_guard(what: &str, needed: u128, budget: u128) -> Result<()> {
    if needed > budget {
        Err(Error::BudgetExceeded { what: what.into(), needed, budget })
    } else {
        Ok(())
    }
}

fn chargeo_explog(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let r = exp_log_check(c.n + 1, c.p, c.l, 1024, 8192, rng)?;
    let w = r.witness.clone();
    Ok((
        json!({ "characters": r.characters, "elements": r.elements, "pairs": r.pairs }),
        vec![
            Check::assert("roundtrip", r.roundtrip_failures == 0, r.roundtrip_failures).with_witness(w.clone()),
            Check::assert("multiplicativity", r.multiplicativity_failures == 0, r.multiplicativity_failures).with_witness(w),
        ],
    ))
}

fn chargeo_duality(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let r = exp_log_check(c.n + 1, c.p, c.l, 1024, 1, rng)?;
    Ok((
        json!({ "characters": r.characters, "elements": r.elements }),
        vec![Check::assert("trivial-iff-zero", r.duality_failures == 0, r.duality_failures).with_witness(r.witness)],
    ))
}

fn chargeo_generic(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let r = generic_agreement(c.n + 1, c.p, c.l, 1000, rng)?;
    Ok((
        json!({ "tuples": r.tuples, "exhaustive": r.exhaustive }),
        vec![
            Check::assert("conductor-vs-fingerprint", r.disagreements == 0, r.disagreements),
            Check::report("generic-tuples", r.generic),
        ],
    ))
}

fn types_work(nn: usize, p: u64, l: u32) -> u128 {
    let types = subgroup_order(nn, p, &Subgroup::K, l) / subgroup_order(nn, p, &Subgroup::TorusTilde(l), l);
    let j = subgroup_order(nn, p, &Subgroup::TorusTilde(l), 2 * l);
    let reps = subgroup_order(nn, p, &Subgroup::K, 2 * l) / subgroup_order(nn, p, &Subgroup::Borel, 2 * l);
    types.saturating_mul(j).saturating_mul(reps)
}

fn uniqueness(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<TypeUniqueness> {
    let c = ctx.cfg;
    let nn = c.n + 1;
    budget_guard("chi-type projector traces", types_work(nn, c.p, c.l), c.budget)?;
    let chars = type_chars(c, rng)?;
    let space = ctx.cache.coset_space(nn, c.p, &Subgroup::K, &Subgroup::TorusTilde(c.l), c.l, c.budget)?;
    unique_type_check_with(&chars, &space, c.budget)
}

fn mlift_uniqueness(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let u = uniqueness(ctx, rng)?;
    let ones = u.dimensions.iter().filter(|&&d| d == 1).count();
    Ok((
        json!({ "types": u.types }),
        vec![Check::assert("isotypic-dimension-one", ones == u.types && u.dimensions.len() == u.types, json!({ "types": u.types, "dimension_one": ones }))],
    ))
}

fn mlift_type_unique(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let u = uniqueness(ctx, rng)?;
    Ok((
        json!({ "types": u.types }),
        vec![
            Check::assert("single-equivariant-type", u.equivariant.len() == 1, &u.equivariant),
            Check::assert("stabilizer-is-j", u.stabilizer_is_j, u.stabilizer_size),
        ],
    ))
}

fn mlift_support(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let nn = c.n + 1;
    let pr = pair(c, rng)?;
    let ring = ResRing::new(c.p, c.l)?;
    let g0 = build_g0(&pr.alpha(), &pr.beta(), ring)?;
    let v = MicrolocalVector::new(ChiType::new(pr.g.clone(), g0)?);
    let total = subgroup_order(nn, c.p, &Subgroup::K, 2 * c.l);
    let exhaustive = total <= 20_000 && total <= c.budget;
    let gs = if exhaustive {
        enumerate_elements(nn, c.p, &Subgroup::K, 2 * c.l, c.budget)?
    } else {
        (0..c.samples.max(10_000)).map(|_| random_k(nn, c.p, 2 * c.l, rng)).collect::<Result<Vec<_>>>()?
    };
    let s = support_scan(&v, &gs)?;
    Ok((
        json!({ "exhaustive": exhaustive, "checked": s.checked, "inside": s.inside }),
        vec![
            Check::assert("support-in-type-group", s.nonzero_outside.is_empty(), s.nonzero_outside.len())
                .with_witness(s.nonzero_outside.first()),
            Check::assert("equivariance", s.equivariance_failures.is_empty(), s.equivariance_failures.len())
                .with_witness(s.equivariance_failures.first()),
        ],
    ))
}

fn mlift_diag_adjust(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let nn = c.n + 1;
    if (c.p as usize) < nn {
        return Err(Error::InvalidConfig(format!("a regular diagonal needs p >= {nn}")));
    }
    let level = 2 * c.l + 2;
    let ring = ResRing::new(c.p, level)?;
    let m = ring.modulus();
    let pl = ipow(c.p, c.l);
    let mut failures = 0;
    let mut witness = None;
    for _ in 0..c.samples {
        let mut res: Vec<u64> = (0..c.p).collect();
        for i in 0..nn {
            let j = rng.gen_range(i..res.len());
            res.swap(i, j);
        }
        let d: Vec<i128> = (0..nn).map(|i| (res[i] + c.p * rng.gen_range(0..m / c.p)) as i128).collect();
        let yd = ResMat::diag(ring, &d);
        let e: Vec<u64> = (0..nn * nn).map(|_| rng.gen_range(0..m / pl)).collect();
        let y = ResMat::from_fn(nn, ring, |i, j| (pl * e[i * nn + j]) as i128);
        let r = diag_adjust_full(&yd, &y, c.l)?;
        let lhs = r.k.mul(&yd.add(&y)).mul(&r.k.inv()?);
        let diagonal = (0..nn).all(|i| (0..nn).all(|j| i == j || r.z_diag.get(i, j) == 0));
        if lhs != r.z_diag || !diagonal || !r.k.is_congruent_one(1) {
            failures += 1;
            witness.get_or_insert_with(|| format!("Y = {yd}, y = {y}"));
        }
    }
    Ok((json!({ "samples": c.samples, "level": level }), vec![Check::assert("diagonalizes", failures == 0, failures).with_witness(witness)]))
}

fn compat_g0(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let ring = ResRing::new(c.p, c.l)?;
    let (mut conj, mut units) = (0, 0);
    let mut witness = None;
    for _ in 0..c.samples {
        let pr = pair(c, rng)?;
        let g0 = build_g0(&pr.alpha(), &pr.beta(), ring)?;
        let a = verify_conjugate_identity(&pr.alpha(), &pr.beta(), ring)?;
        let b = g0_entries_are_units(&g0)?;
        conj += usize::from(!a);
        units += usize::from(!b);
        if !(a && b) {
            witness.get_or_insert_with(|| json!({ "alpha": pr.alpha(), "beta": pr.beta() }));
        }
    }
    Ok((
        json!({ "samples": c.samples }),
        vec![
            Check::assert("conjugate-identity", conj == 0, conj).with_witness(witness.clone()),
            Check::assert("unit-entries", units == 0, units).with_witness(witness),
        ],
    ))
}

fn compat_fan_pall(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let mut failures = 0;
    let mut witness = None;
    for _ in 0..c.samples {
        let r = fan_pall_random_check(c.n, c.p, c.l, rng)?;
        if !r.ok() {
            failures += 1;
            witness.get_or_insert(r);
        }
    }
    Ok((json!({ "samples": c.samples }), vec![Check::assert("fan-pall", failures == 0, failures).with_witness(witness)]))
}

fn compat_orbit(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let pr = pair(c, rng)?;
    let o = compatible_orbit_check(&pr.alpha(), &pr.beta(), ResRing::new(c.p, c.l)?, c.budget)?;
    Ok((
        json!({ "alpha": pr.alpha(), "beta": pr.beta(), "scanned": o.scanned }),
        vec![Check::assert("orbit-equals-torus-translate", o.equal, json!({ "matches": o.matches, "expected": o.expected }))],
    ))
}

fn compat_atrans(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let pr = pair(c, rng)?;
    let a = atrans_check(&pr.alpha(), &pr.beta(), ResRing::new(c.p, c.l)?, c.samples.min(20), rng, c.budget)?;
    Ok((
        json!({ "alpha": pr.alpha(), "beta": pr.beta(), "scanned": a.scanned }),
        vec![
            Check::assert("j-cap-h-equals-kh", a.mismatches == 0, json!({ "in_j": a.in_j, "in_kh": a.in_kh, "mismatches": a.mismatches })),
            Check::assert("noncompact-torus-misses-h", a.noncompact_hits == 0, json!({ "samples": a.noncompact_samples, "hits": a.noncompact_hits })),
        ],
    ))
}

fn qs(x: &QSqrt) -> String {
    x.to_string()
}

fn hecke_amplifier(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let nn = c.n + 1;
    let q = c.p;
    let mut checks = Vec::new();
    for j in 1..=2 {
        let r = amplifier_relation(nn, j, q, c.budget)?;
        let idx: Vec<i32> = r.coefficients.iter().map(|x| x.0).collect();
        let coeffs: Vec<(i32, String)> = r.coefficients.iter().map(|(i, x)| (*i, qs(x))).collect();
        checks.push(Check::assert(&format!("support-j{j}"), idx == (0..=j).collect::<Vec<_>>(), &coeffs));
        if nn == 2 && j == 1 {
            let want = vec![
                (0, QSqrt::rational(Q::one() + Q::new(1, q as i128))),
                (1, QSqrt::rational(Q::one())),
            ];
            checks.push(Check::assert("gl2-coefficients", r.coefficients == want, &coeffs));
        }
    }
    let lb = amplifier_lower_bound(nn, q, c.samples, rng)?;
    checks.push(Check::report("lower-bound-min-max", lb.min_max));
    Ok((json!({ "rank": nn, "q": q }), checks))
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / 1f64.max(b.norm())
}

fn hecke_spherical(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let nn = c.n + 1;
    let q = c.p;
    let mut max_err: f64 = 0.0;
    let mut worst = None;
    let mut count = 0;
    for mu in dominant_cochars(nn, 3) {
        let oracle = CosetOracle::new(&mu, q, c.budget)?;
        for _ in 0..20 {
            let a = random_tempered(nn, rng);
            let x = macdonald_spherical(&mu, &a, q)?;
            let y = oracle.spherical(&a);
            count += 1;
            let e = rel(x, y);
            if e > max_err {
                max_err = e;
                worst = Some(json!({ "mu": mu }));
            }
        }
    }
    let mut checks = vec![Check::bounded("macdonald-vs-coset-sum", max_err, 1e-9).with_witness(worst)];
    if nn == 2 {
        let ones = vec![Complex64::one(); 2];
        let want = 2.0 * (q as f64).sqrt() / (q as f64 + 1.0);
        let a = spherical_oracle(&[1, 0], &ones, q, c.budget)?;
        let b = macdonald_spherical(&[1, 0], &ones, q)?;
        let err = (a.re - want).abs().max((b.re - want).abs()).max(a.im.abs()).max(b.im.abs());
        checks.push(Check::bounded("trivial-parameter-value", err, 1e-12));
    }
    let pb = phibound_check(nn, q, 2, 3, rng, c.budget)?;
    checks.push(Check::report("phi-trivial-ratio", pb.max_ratio));
    checks.push(Check::report("phi-bound-excess", pb.max_excess));
    Ok((json!({ "rank": nn, "q": q, "evaluations": count }), checks))
}

fn hecke_restriction(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let nn = c.n + 1;
    let q = c.p;
    let theta = c.theta_f64()?;
    let mut inexact = Vec::new();
    let mut identity_failures = 0;
    let mut tested = 0;
    for mu in dominant_cochars(nn, 2) {
        if is_central(&mu) {
            continue;
        }
        tested += 1;
        let d = restriction_decomposition(&mu, q, c.budget)?;
        if !d.exact() {
            inexact.push(mu.clone());
        }
        identity_failures += norm_difference_identity(&mu).iter().filter(|(_, a, b)| a != b).count();
    }
    let mu = bracket(nn, 1);
    let mut max_abs: f64 = 0.0;
    for _ in 0..50 {
        let (h, z) = random_h_parameter(c.n, q, theta, rng);
        max_abs = max_abs.max(hecke_restriction_value(&mu, &h, z, q, c.budget)?.norm());
    }
    let bound = 2.0 / (q as f64).sqrt();
    let mut checks = vec![
        Check::assert("coset-intersection", inexact.is_empty(), tested).with_witness(inexact.first()),
        Check::assert("norm-difference", identity_failures == 0, identity_failures),
    ];
    if nn == 2 && theta == 0.0 {
        checks.push(Check::bounded("restricted-eigenvalue", max_abs, bound));
    } else {
        checks.push(Check::report("restricted-eigenvalue", json!({ "max": max_abs, "gl2_bound": bound })));
    }
    Ok((json!({ "rank": nn, "q": q, "theta": c.theta }), checks))
}

fn hecke_height(ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let mut failures = 0;
    let mut reps = 0;
    let mut witness = None;
    for mu in dominant_cochars(c.n + 1, 2) {
        if mu.iter().all(|&x| x == 0) {
            continue;
        }
        let h = hecke_height_check(&mu, c.p, c.budget)?;
        reps += h.reps;
        if h.failures > 0 {
            failures += h.failures;
            witness.get_or_insert(mu);
        }
    }
    Ok((json!({ "reps": reps }), vec![Check::assert("height", failures == 0, failures).with_witness(witness)]))
}

fn setup(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<OffdiagSetup> {
    let c = ctx.cfg;
    let pr = pair(c, rng)?;
    OffdiagSetup::new(&pr.alpha(), &pr.beta(), c.p, c.l, c.budget)
}

fn offdiag_params(s: &OffdiagSetup) -> Value {
    json!({ "dim": s.dim(), "cosets": s.cosets, "coset_size": s.coset_size, "g0": s.g0.to_rows() })
}

fn offdiag_trivial(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let s = setup(ctx, rng)?;
    let r = trivial_check(&s, 3, rng)?;
    Ok((
        offdiag_params(&s),
        vec![
            Check::bounded("schur-over-q-nl", r.max_schur_ratio, 2.0),
            Check::assert("norm-below-schur", r.norm_exceeds_schur == 0, r.norm_exceeds_schur),
            Check::assert("adjoint", r.adjoint_failures == 0, r.adjoint_failures),
            Check::assert("well-defined", r.well_defined_failures == 0, r.well_defined_failures),
            Check::assert("projector", r.pi_idempotent && r.pi_self_adjoint && r.pi_constants && r.pi_rank == r.cosets, r.pi_rank),
            Check::bounded("projector-norm-gap", (r.pi_norm - 1.0).abs(), 1e-6),
            Check::bounded("cs-identity-gap", r.max_identity_gap, 1e-6),
        ],
    ))
}

fn offdiag_norm_scan(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let s = setup(ctx, rng)?;
    let r = offdiagw_scan(&s, c.samples, c.threshold, rng)?;
    let order = r.strata.iter().map(|x| x.order_violations).sum::<usize>();
    let per: Vec<Value> = r
        .strata
        .iter()
        .map(|x| json!({ "depth": x.depth, "samples": x.samples, "max_ratio": x.max_ratio }))
        .collect();
    Ok((
        merge(offdiag_params(&s), json!({ "strata": per, "empirical_constant": true })),
        vec![
            Check::bounded("normalized-ratio", r.max_ratio, c.threshold).with_witness(r.witness),
            Check::assert("compression-below-norm", order == 0, order),
        ],
    ))
}

fn offdiag_transverse(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let s = setup(ctx, rng)?;
    let (r, exhaustive) = transverse_scan(&s, c.samples.max(100), c.budget, rng)?;
    Ok((
        merge(offdiag_params(&s), json!({ "exhaustive": exhaustive, "deltas": r.deltas, "comparisons": r.comparisons })),
        vec![
            Check::assert("volume-bound", r.counterexamples == 0, r.counterexamples).with_witness(r.witness.clone()),
            Check::assert("truncated-structure", r.structure_failures == 0, r.structure_failures),
            Check::report("max-ratio", r.max_ratio),
        ],
    ))
}

fn offdiag_pq(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let s = setup(ctx, rng)?;
    let r = pqconst_check(&s, (c.samples / 10).max(1), c.budget, rng)?;
    Ok((
        merge(offdiag_params(&s), json!({ "sigmas": r.sigmas, "members": r.members })),
        vec![
            Check::assert("pq-sum", r.sum_failures == 0, r.sum_failures),
            Check::assert("pq-constant", r.congruence_failures == 0, r.congruence_failures),
            Check::assert("iz-volume", r.iz_violations == 0, json!({ "checked": r.iz_checked, "violations": r.iz_violations })),
            Check::report("iz-max-ratio", r.max_iz_ratio),
        ],
    ))
}

fn offdiag_poly(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let trials = c.samples.max(500);
    let r = poly_volume_check(c.p, c.l, trials, rng)?;
    Ok((
        json!({ "trials": trials, "level": r.level }),
        vec![
            Check::assert("volume-bound", r.counterexamples == 0, r.counterexamples),
            Check::report("max-ratio", r.max_ratio),
        ],
    ))
}

fn models(cfg: &RunConfig) -> Result<Vec<FiniteModel>> {
    match &cfg.group {
        Some(g) => Ok(vec![FiniteModel::by_name(g)?]),
        None => FiniteModel::names().iter().map(|n| FiniteModel::by_name(n)).collect(),
    }
}

fn rtf_inequality(ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let mut checks = Vec::new();
    for m in models(c)? {
        let r = rtf_inequality_scan(&m, c.trials, c.seed, 1e-12);
        checks.push(
            Check::assert(
                &format!("{}", m.group.name),
                r.ok(),
                json!({
                    "failures": r.failures,
                    "max_chain_gap": r.max_chain_gap,
                    "max_excess": r.max_excess,
                    "min_rhs": r.min_rhs,
                    "max_sesquilinear_gap": r.max_sesquilinear_gap
                }),
            )
            .with_witness(r.witness),
        );
    }
    Ok((json!({ "trials": c.trials, "tol": 1e-12 }), checks))
}

fn rtf_projector(ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let mut checks = Vec::new();
    for m in models(ctx.cfg)? {
        let r = rtf_projector_scan(&m, ctx.cfg.seed);
        checks.push(Check::assert(&m.group.name, r.ok(), &r));
    }
    Ok((json!({}), checks))
}

fn exponent_table(ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(Value, Vec<Check>)> {
    let c = ctx.cfg;
    let theta = parse_rational(&c.theta)?;
    let r = exponents(c.n as u32, c.l, theta)?;
    let n1 = exponents(1, c.l, Q::zero())?;
    let n1_ok = n1.delta_period == Q::new(1, 16)
        && n1.delta_subconvex == Q::new(1, 64)
        && n1.subconvex_exponent == Q::new(15, 64)
        && n1.conductor_exponent == Q::from_integer(8 * c.l as i128);
    let consistent = (1..=10).map(theta_zero_consistent).collect::<Result<Vec<bool>>>()?;
    Ok((
        json!({ "theta": c.theta }),
        vec![
            Check::assert("n1-row", n1_ok, &n1),
            Check::assert("theta-zero-consistency", consistent.iter().all(|&b| b), consistent.len()),
            Check::report("record", &r),
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry() {
        let n = names();
        assert_eq!(n.len(), 23);
        let set: std::collections::HashSet<_> = n.iter().collect();
        assert_eq!(set.len(), n.len());
        assert!(needs_pair("offdiag.pq") && !needs_pair("offdiag.poly") && !needs_pair("rtf.inequality"));
    }

    #[test]
    fn single_suite_report() {
        let cfg = RunConfig { suites: vec!["rtf.inequality".into()], trials: 50, ..Default::default() };
        let r = run_suites(&cfg).unwrap();
        assert_eq!(r.suites.len(), 1);
        assert_eq!(r.suites[0].status, crate::report::Status::Pass);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn p2_rejected() {
        let cfg = RunConfig { suites: vec!["exponents".into()], p: 2, ..Default::default() };
        assert!(run_suites(&cfg).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            suites: vec!["chargeo.generic".into(), "hecke.amplifier".into(), "offdiag.poly".into()],
            cache_dir: Some(dir.path().into()),
            seed: 3,
            samples: 20,
            ..Default::default()
        };
        let strip = |r: Report| -> Vec<(String, Vec<Check>)> { r.suites.into_iter().map(|s| (s.name, s.checks)).collect() };
        let a = strip(run_suites(&cfg).unwrap());
        let b = strip(run_suites(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn budget_downgrades_to_skipped() {
        let cfg = RunConfig { suites: vec!["mlift.uniqueness".into()], budget: 10, ..Default::default() };
        let r = run_suites(&cfg).unwrap();
        assert_eq!(r.suites[0].status, crate::report::Status::Skipped);
        assert_eq!(r.exit_code(), 0);
    }
}
