//! Acceptance criteria 1-14; one PASS/FAIL line each.

use std::time::Instant;

use ggplab::arith::{ResRing, Q};
use ggplab::chargeo::{exp_log_check, GenericPair};
use ggplab::compat::{atrans_check, build_g0, fan_pall_random_check};
use ggplab::config::RunConfig;
use ggplab::exponents::{exponents, theta_zero_consistent};
use ggplab::hecke::{
    amplifier_relation, bracket, dominant_cochars, hecke_restriction_value, is_central, macdonald_spherical,
    norm_difference_identity, random_h_parameter, random_tempered, restriction_decomposition, spherical_oracle,
    CosetOracle, QSqrt,
};
use ggplab::matgroup::{enumerate_elements, Subgroup};
use ggplab::mlift::{support_scan, unique_type_check, ChiType, MicrolocalVector};
use ggplab::offdiag::{offdiagw_scan, poly_volume_check, transverse_scan, OffdiagSetup};
use ggplab::report::Status;
use ggplab::rtfmodel::{rtf_inequality_scan, FiniteModel};
use ggplab::suites::{random_k, run_suites};
use num_complex::Complex64;
use num_traits::One;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BUDGET: u128 = 1 << 26;

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c1_explog() -> Outcome {
    let r = exp_log_check(2, 3, 1, 1024, u64::MAX as usize, &mut rng(1)).map_err(|e| e.to_string())?;
    let expected = 3usize.pow(4);
    ensure(
        r.characters == expected && r.elements == expected && r.ok(),
        format!(
            "{} characters, {} elements, {} pairs, roundtrip failures {}, multiplicativity failures {}",
            r.characters, r.elements, r.pairs, r.roundtrip_failures, r.multiplicativity_failures
        ),
    )
}

fn c2_uniqueness() -> Outcome {
    let pair = GenericPair::random(1, 3, 1, &mut rng(2)).map_err(|e| e.to_string())?;
    let u = unique_type_check(&pair.g, BUDGET).map_err(|e| e.to_string())?;
    ensure(
        u.types == 12 && u.dimensions.iter().all(|&d| d == 1) && u.ok(),
        format!("{} types, dimensions {:?}, equivariant {:?}", u.types, u.dimensions, u.equivariant),
    )
}

fn support(n: usize, p: u64, samples: Option<usize>, seed: u64) -> Result<(usize, usize, usize), String> {
    let mut r = rng(seed);
    let pair = GenericPair::random(n, p, 1, &mut r).map_err(|e| e.to_string())?;
    let ring = ResRing::new(p, 1).map_err(|e| e.to_string())?;
    let g0 = build_g0(&pair.alpha(), &pair.beta(), ring).map_err(|e| e.to_string())?;
    let v = MicrolocalVector::new(ChiType::new(pair.g.clone(), g0).map_err(|e| e.to_string())?);
    let gs = match samples {
        None => enumerate_elements(n + 1, p, &Subgroup::K, 2, BUDGET).map_err(|e| e.to_string())?,
        Some(k) => (0..k).map(|_| random_k(n + 1, p, 2, &mut r)).collect::<Result<_, _>>().map_err(|e| e.to_string())?,
    };
    let s = support_scan(&v, &gs).map_err(|e| e.to_string())?;
    Ok((s.checked, s.nonzero_outside.len(), s.equivariance_failures.len()))
}

fn c3_support() -> Outcome {
    let (a, bad_a, eq_a) = support(1, 3, None, 3)?;
    let (b, bad_b, eq_b) = support(2, 5, Some(10_000), 4)?;
    ensure(
        a == 3888 && b == 10_000 && bad_a + bad_b + eq_a + eq_b == 0,
        format!("GL2(Z/9): {a} scanned, {bad_a} outside; (3,5,1): {b} sampled, {bad_b} outside; equivariance failures {}", eq_a + eq_b),
    )
}

fn c4_fan_pall() -> Outcome {
    let mut r = rng(5);
    let grid: Vec<(usize, u64, u32)> =
        [1usize, 2].iter().flat_map(|&n| [3u64, 5, 7].iter().flat_map(move |&p| [1u32, 2].map(|l| (n, p, l)))).collect();
    let (mut total, mut failures, mut modular) = (0, 0, 0);
    for i in 0..1000 {
        let (n, p, l) = grid[i % grid.len()];
        let c = fan_pall_random_check(n, p, l, &mut r).map_err(|e| e.to_string())?;
        total += 1;
        modular += c.modular as usize;
        failures += !c.ok() as usize;
    }
    ensure(failures == 0, format!("{total} instances ({modular} modular), {failures} failures"))
}

fn c5_atrans() -> Outcome {
    let mut r = rng(6);
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, p, l) in [(1usize, 3u64, 1u32), (1, 3, 2), (2, 5, 1)] {
        let pair = GenericPair::random(n, p, l, &mut r).map_err(|e| e.to_string())?;
        let ring = ResRing::new(p, l).map_err(|e| e.to_string())?;
        let a = atrans_check(&pair.alpha(), &pair.beta(), ring, 5, &mut r, BUDGET).map_err(|e| e.to_string())?;
        ok &= a.ok() && a.in_j == a.in_kh;
        if (n, p, l) == (2, 5, 1) {
            ok &= a.scanned == 300_000;
        }
        parts.push(format!("({n},{p},{l}): {} scanned, {} mismatches", a.scanned, a.mismatches));
    }
    ensure(ok, parts.join("; "))
}

fn c6_amplifier() -> Outcome {
    let mut ok = true;
    let mut gl2 = String::new();
    for rank in [2usize, 3] {
        for q in [3u64, 5] {
            for j in 1..=2 {
                let a = amplifier_relation(rank, j, q, BUDGET).map_err(|e| e.to_string())?;
                let idx: Vec<i32> = a.coefficients.iter().map(|c| c.0).collect();
                ok &= idx == (0..=j).collect::<Vec<_>>();
                if rank == 2 && j == 1 {
                    let want = vec![(0, QSqrt::rational(Q::one() + Q::new(1, q as i128))), (1, QSqrt::rational(Q::one()))];
                    ok &= a.coefficients == want;
                    gl2.push_str(&format!(" q={q}: ({}, {})", a.coefficients[0].1, a.coefficients[1].1));
                }
            }
        }
    }
    ensure(ok, format!("supports exact for GL2, GL3 at q in {{3,5}}, j <= 2; GL2 j=1 coefficients{gl2}"))
}

/// Two-variable closed form of the spherical function on GL2.
fn gl2_closed_form(mu: &[i32], a: &[Complex64], q: f64) -> Complex64 {
    let (hi, lo) = (mu[0].max(mu[1]), mu[0].min(mu[1]));
    let term = |x: Complex64, y: Complex64| x.powi(hi) * y.powi(lo) * (1.0 - y / (q * x)) / (1.0 - y / x);
    (term(a[0], a[1]) + term(a[1], a[0])) * q.powf(-(hi - lo) as f64 / 2.0) / (1.0 + 1.0 / q)
}

fn c7_spherical() -> Outcome {
    let q = 3;
    let mut r = rng(7);
    let mut max_err: f64 = 0.0;
    let mut evals = 0;
    for rank in [2usize, 3] {
        for mu in dominant_cochars(rank, 3) {
            let oracle = CosetOracle::new(&mu, q, BUDGET).map_err(|e| e.to_string())?;
            for _ in 0..20 {
                let a = random_tempered(rank, &mut r);
                let m = macdonald_spherical(&mu, &a, q).map_err(|e| e.to_string())?;
                let o = oracle.spherical(&a);
                max_err = max_err.max((m - o).norm() / o.norm().max(1.0));
                if rank == 2 {
                    max_err = max_err.max((gl2_closed_form(&mu, &a, q as f64) - o).norm() / o.norm().max(1.0));
                }
                evals += 1;
            }
        }
    }
    let ones = vec![Complex64::one(); 2];
    let want = 2.0 * 3f64.sqrt() / 4.0;
    let o = spherical_oracle(&[1, 0], &ones, q, BUDGET).map_err(|e| e.to_string())?;
    let m = macdonald_spherical(&[1, 0], &ones, q).map_err(|e| e.to_string())?;
    let triv = (o - want).norm().max((m - want).norm());
    ensure(max_err < 1e-9 && triv < 1e-12, format!("{evals} evaluations, max relative error {max_err:.2e}; trivial-parameter error {triv:.2e}"))
}

fn c8_restriction() -> Outcome {
    let mut ok = true;
    let mut tested = 0;
    for (n, q) in [(1usize, 3u64), (2, 5)] {
        for mu in dominant_cochars(n + 1, 2) {
            if is_central(&mu) {
                continue;
            }
            let d = restriction_decomposition(&mu, q, BUDGET).map_err(|e| e.to_string())?;
            ok &= d.exact();
            ok &= norm_difference_identity(&mu).iter().all(|(_, a, b)| a == b);
            tested += 1;
        }
    }
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    for q in [3u64, 5, 7] {
        let bound = 2.0 / (q as f64).sqrt();
        for _ in 0..50 {
            let (h, z) = random_h_parameter(1, q, 0.0, &mut r);
            let v = hecke_restriction_value(&bracket(2, 1), &h, z, q, BUDGET).map_err(|e| e.to_string())?;
            worst = worst.max(v.norm() / bound);
        }
    }
    ensure(ok && worst <= 1.0 + 1e-12, format!("{tested} cocharacters exact; max |eigenvalue| / 2q^(-1/2) = {worst:.9}"))
}

fn c9_transverse() -> Outcome {
    let mut r = rng(9);
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, p, l, must_be_exhaustive) in [(1usize, 3u64, 1u32, true), (1, 3, 2, true), (2, 5, 1, false)] {
        let pair = GenericPair::random(n, p, l, &mut r).map_err(|e| e.to_string())?;
        let s = OffdiagSetup::new(&pair.alpha(), &pair.beta(), p, l, BUDGET).map_err(|e| e.to_string())?;
        let (t, ex) = transverse_scan(&s, 100, BUDGET, &mut r).map_err(|e| e.to_string())?;
        ok &= t.ok() && (ex || !must_be_exhaustive) && (ex || t.deltas >= 100 * s.strata().len());
        parts.push(format!("({n},{p},{l}) {}: {} deltas, {} counterexamples", if ex { "exhaustive" } else { "sampled" }, t.deltas, t.counterexamples));
    }
    ensure(ok, parts.join("; "))
}

fn c10_offdiagw() -> Outcome {
    let mut r = rng(10);
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, p, l) in [(1usize, 3u64, 1u32), (1, 3, 2), (1, 5, 1), (1, 5, 2), (2, 5, 1)] {
        let pair = GenericPair::random(n, p, l, &mut r).map_err(|e| e.to_string())?;
        let s = OffdiagSetup::new(&pair.alpha(), &pair.beta(), p, l, BUDGET).map_err(|e| e.to_string())?;
        let scan = offdiagw_scan(&s, 100, 8.0, &mut r).map_err(|e| e.to_string())?;
        ok &= scan.ok() && scan.max_ratio < 8.0;
        parts.push(format!("({n},{p},{l}) {:.3}", scan.max_ratio));
    }
    ensure(ok, format!("max normalized ratio (threshold 8): {}", parts.join(", ")))
}

fn c11_poly() -> Outcome {
    let mut r = rng(11);
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    for p in [3u64, 5] {
        for l in 1..=3 {
            let rep = poly_volume_check(p, l, 500, &mut r).map_err(|e| e.to_string())?;
            bad += rep.counterexamples;
            worst = worst.max(rep.max_ratio);
        }
    }
    ensure(bad == 0, format!("3000 trials, {bad} counterexamples, max ratio {worst:.3}"))
}

fn c12_rtf() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in FiniteModel::names() {
        let m = FiniteModel::by_name(name).map_err(|e| e.to_string())?;
        let rep = rtf_inequality_scan(&m, 1000, 12, 1e-12);
        ok &= rep.ok() && rep.trials == 1000;
        parts.push(format!("{name}: {} failures, min rhs {:.3e}", rep.failures, rep.min_rhs));
    }
    ensure(ok, parts.join("; "))
}

fn c13_exponents() -> Outcome {
    let mut ok = true;
    for l in 1..=5 {
        let r = exponents(1, l, Q::new(0, 1)).map_err(|e| e.to_string())?;
        ok &= (r.delta_period, r.delta_subconvex, r.subconvex_exponent) == (Q::new(1, 16), Q::new(1, 64), Q::new(15, 64));
        ok &= r.conductor_exponent == Q::from_integer(8 * l as i128);
    }
    for n in 1..=10 {
        ok &= theta_zero_consistent(n).map_err(|e| e.to_string())?;
    }
    ensure(ok, "n=1 row (1/16, 1/64, 15/64), conductor 8l for l <= 5, theta = 0 consistency for n <= 10".into())
}

fn battery(n: usize, sets: &[(u64, u32)], dir: &std::path::Path) -> Result<(f64, usize), String> {
    let start = Instant::now();
    let mut suites = 0;
    for &(p, l) in sets {
        let cfg = RunConfig {
            n,
            p,
            l,
            suites: vec!["all".into()],
            cache_dir: Some(dir.to_path_buf()),
            ..Default::default()
        };
        let rep = run_suites(&cfg).map_err(|e| e.to_string())?;
        if let Some(s) = rep.suites.iter().find(|s| s.status == Status::Fail) {
            return Err(format!("(n={n}, p={p}, l={l}) suite {} failed: {:?}", s.name, s.reason));
        }
        suites += rep.suites.len();
    }
    Ok((start.elapsed().as_secs_f64(), suites))
}

fn c14_batteries() -> Outcome {
    std::env::remove_var("GGPLAB_CACHE_DIR");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (t1, s1) = battery(1, &[(3, 1), (3, 2), (5, 1), (5, 2)], dir.path())?;
    let (t2, s2) = battery(2, &[(5, 1)], dir.path())?;
    ensure(t1 < 600.0 && t2 < 1800.0, format!("n=1: {s1} suite runs in {t1:.1} s (limit 600); n=2: {s2} in {t2:.1} s (limit 1800)"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, f64); 14] = [
        (1, "exp/log duality on K(1)/K(2) at (2,3,1)", c1_explog, 1.0),
        (2, "isotypic dimension one for all 12 types", c2_uniqueness, 30.0),
        (3, "matrix-coefficient support", c3_support, 120.0),
        (4, "conjugation identity and Fan-Pall system", c4_fan_pall, 60.0),
        (5, "J n H = K_H(l)", c5_atrans, 300.0),
        (6, "amplifier product support", c6_amplifier, 120.0),
        (7, "spherical function consistency", c7_spherical, f64::INFINITY),
        (8, "Hecke restriction", c8_restriction, f64::INFINITY),
        (9, "transverse volume bound", c9_transverse, 600.0),
        (10, "off-diagonal norm scaling", c10_offdiagw, f64::INFINITY),
        (11, "polynomial volume bound", c11_poly, 60.0),
        (12, "finite relative trace inequality", c12_rtf, 60.0),
        (13, "exponent table", c13_exponents, f64::INFINITY),
        (14, "battery wall time", c14_batteries, f64::INFINITY),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (id, name, f, limit) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let out = f();
        let t = start.elapsed().as_secs_f64();
        let (ok, detail) = match out {
            Ok(d) if t < limit => (true, d),
            Ok(d) => (false, format!("{d}; took {t:.1} s, limit {limit} s")),
            Err(d) => (false, d),
        };
        failed += !ok as usize;
        println!("criterion {id:>2} {} {name} ({t:.2} s): {detail}", if ok { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
