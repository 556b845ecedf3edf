use ggplab::arith::{additive_char, cyc_is_zero, ipow, PadicRational, ResRing, CycInt, Q};
use ggplab::chargeo::{exp_log_check, GenericPair};
use ggplab::compat::{build_g0, g0_entries_are_units, verify_conjugate_identity};
use ggplab::config::RunConfig;
use ggplab::exponents::{exponents, parse_rational};
use ggplab::hecke::{coset_count, dominant, dominates, HeckeElem};
use ggplab::matgroup::{distance_to_htilde, iwasawa_a, smith_cartan, subgroup_order, CosetSpace, RatMat, ResMat, Subgroup};
use ggplab::mlift::{support_scan, ChiType, MicrolocalVector};
use ggplab::offdiag::{op_norm, schur_bound, OffdiagSetup};
use ggplab::rtfmodel::{rtf_inequality_scan, FiniteModel};
use ggplab::suites::{random_k, run_suites};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn prime() -> impl Strategy<Value = u64> {
    prop_oneof![Just(3u64), Just(5), Just(7)]
}

/// Random element of GL_n(Z_p) as an integral rational matrix.
fn random_kq(n: usize, p: u64, r: &mut ChaCha8Rng) -> RatMat {
    random_k(n, p, 2, r).unwrap().to_ratmat()
}

fn random_rat(n: usize, p: u64, r: &mut ChaCha8Rng) -> RatMat {
    loop {
        let v: Vec<Q> = (0..n * n)
            .map(|_| {
                let e = r.gen_range(-2..=2);
                Q::from_integer(r.gen_range(-9..=9)) * ggplab::arith::qpow(p, e)
            })
            .collect();
        let g = RatMat::from_fn(n, p, |i, j| v[i * n + j]);
        if g.det() != Q::from_integer(0) {
            return g;
        }
    }
}

#[test]
fn unit_group_orders() {
    for p in [3u64, 5, 7] {
        let mut level = 1;
        while ipow(p, level) <= 10_000 {
            let ring = ResRing::new(p, level).unwrap();
            let m = ring.modulus();
            let units = (0..m).filter(|&v| ring.elem(v as i128).is_unit()).count() as u64;
            assert_eq!(units, m - m / p);
            for v in (0..m).filter(|v| v % p != 0) {
                let x = ring.elem(v as i128);
                assert_eq!(x.mul(&x.inv().unwrap()).unwrap().value, 1);
            }
            level += 1;
        }
    }
}

#[test]
fn coset_spaces_partition() {
    let cases = [
        (2usize, 3u64, Subgroup::K, Subgroup::TorusTilde(1), 1u32),
        (2, 3, Subgroup::K, Subgroup::Borel, 2),
        (2, 5, Subgroup::K, Subgroup::TorusTilde(1), 1),
        (3, 3, Subgroup::K, Subgroup::TorusTilde(1), 1),
        (2, 3, Subgroup::K, Subgroup::Congruence(1), 2),
    ];
    for (n, p, amb, sub, level) in cases {
        let s = CosetSpace::build(n, p, &amb, &sub, level, 1 << 26).unwrap();
        assert_eq!(s.len() as u128 * subgroup_order(n, p, &sub, level), subgroup_order(n, p, &amb, level), "{sub:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms(p in prime(), level in 1u32..=3, a in any::<u32>(), b in any::<u32>(), c in any::<u32>()) {
        let r = ResRing::new(p, level).unwrap();
        let (a, b, c) = (r.elem(a as i128), r.elem(b as i128), r.elem(c as i128));
        prop_assert_eq!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
        prop_assert_eq!(a.add(&b).unwrap().add(&c).unwrap(), a.add(&b.add(&c).unwrap()).unwrap());
        prop_assert_eq!(a.mul(&b.add(&c).unwrap()).unwrap(), a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap());
        prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
        prop_assert_eq!(a.add(&a.neg()).unwrap().value, 0);
    }

    #[test]
    fn additive_character_is_additive(p in prime(), a in -500i128..500, b in -500i128..500, ka in 0i32..4, kb in 0i32..4) {
        let x = PadicRational::from_parts(p, a, -ka);
        let y = PadicRational::from_parts(p, b, -kb);
        let s = PadicRational::new(p, x.value + y.value);
        prop_assert_eq!(additive_char(&s).normalized(), additive_char(&x).mul(&additive_char(&y)).normalized());
        prop_assert!(additive_char(&PadicRational::from_parts(p, a, 0)).is_one());
    }

    #[test]
    fn cyclotomic_zero_test_matches_embedding(m in prop_oneof![Just(3u64), Just(4), Just(5), Just(9), Just(12), Just(25)],
                                              coeffs in prop::collection::vec(-3i64..=3, 1..30), kill in any::<bool>()) {
        let mut dense = vec![0; m as usize];
        for (i, c) in coeffs.iter().enumerate() {
            dense[i % m as usize] += c;
        }
        let mut z = CycInt::from_dense(m, dense);
        if kill {
            let q = ggplab::arith::Root::new(m, 0);
            let mut all = CycInt::zero(m);
            for e in 0..m {
                all = all.add(&CycInt::from_root(&ggplab::arith::Root::new(m, e)));
            }
            prop_assert!(cyc_is_zero(&all));
            z = z.mul(&all).add(&CycInt::from_root(&q)).sub(&CycInt::from_root(&q));
        }
        prop_assert_eq!(cyc_is_zero(&z), z.embed().norm() < 1e-9);
    }

    #[test]
    fn cartan_is_k_bi_invariant(p in prime(), n in 2usize..=3, seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_rat(n, p, &mut r);
        let (k1, k2) = (random_kq(n, p, &mut r), random_kq(n, p, &mut r));
        prop_assert_eq!(smith_cartan(&k1.mul(&g).mul(&k2)).unwrap(), smith_cartan(&g).unwrap());
        prop_assert_eq!(k1.mul(&g).max_norm(), g.max_norm());
        prop_assert_eq!(g.mul(&k2).max_norm(), g.max_norm());
    }

    #[test]
    fn iwasawa_a_invariances(p in prime(), n in 2usize..=3, seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_rat(n, p, &mut r);
        let mut u = RatMat::identity(n, p);
        for i in 0..n {
            for j in i + 1..n {
                u.set(i, j, Q::new(r.gen_range(-20..=20), ipow(p, r.gen_range(0..3)) as i128));
            }
        }
        let k = random_kq(n, p, &mut r);
        let a = iwasawa_a(&g).unwrap();
        prop_assert_eq!(iwasawa_a(&u.mul(&g)).unwrap(), a.clone());
        prop_assert_eq!(iwasawa_a(&g.mul(&k)).unwrap(), a);
    }

    #[test]
    fn distance_is_kh_bi_invariant(p in prime(), n in 1usize..=2, level in 1u32..=3, seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_k(n + 1, p, level, &mut r).unwrap();
        let kh = |r: &mut ChaCha8Rng| {
            let h = random_k(n, p, level, r).unwrap().embed_upper_left();
            let z = random_k(1, p, level, r).unwrap().get(0, 0);
            let mut d = ResMat::identity(n + 1, h.ring);
            d.set(n, n, z as i128);
            h.mul(&d)
        };
        let (k1, k2) = (kh(&mut r), kh(&mut r));
        prop_assert_eq!(distance_to_htilde(&k1.mul(&g).mul(&k2)).unwrap(), distance_to_htilde(&g).unwrap());
    }

    #[test]
    fn exp_log_sampled(seed in any::<u64>()) {
        let rep = exp_log_check(3, 5, 1, 64, 200, &mut rng(seed)).unwrap();
        prop_assert!(rep.ok(), "{:?}", rep);
    }

    #[test]
    fn chi_tilde_is_multiplicative(n in 1usize..=2, p in prop_oneof![Just(5u64), Just(7)], l in 1u32..=2, seed in any::<u64>()) {
        let mut r = rng(seed);
        let pair = GenericPair::random(n, p, l, &mut r).unwrap();
        let ring = ResRing::new(p, 2 * l).unwrap();
        let pl = ipow(p, l);
        let nn = n + 1;
        let mut t = || {
            let d: Vec<i128> = (0..nn).map(|_| loop {
                let x = r.gen_range(1..ring.modulus());
                if x % p != 0 { break x as i128; }
            }).collect();
            let e: Vec<u64> = (0..nn * nn).map(|_| r.gen_range(0..pl)).collect();
            ResMat::diag(ring, &d).add(&ResMat::from_fn(nn, ring, |i, j| if i == j { 0 } else { (pl * e[i * nn + j]) as i128 }))
        };
        let (a, b) = (t(), t());
        let g = &pair.g;
        prop_assert_eq!(g.chi_tilde(&a.mul(&b)).unwrap().normalized(), g.chi_tilde(&a).unwrap().mul(&g.chi_tilde(&b).unwrap()).normalized());
    }

    #[test]
    fn coefficient_is_bi_equivariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let pair = GenericPair::random(1, 5, 1, &mut r).unwrap();
        let g0 = build_g0(&pair.alpha(), &pair.beta(), ResRing::new(5, 1).unwrap()).unwrap();
        let v = MicrolocalVector::new(ChiType::new(pair.g.clone(), g0).unwrap());
        let gs: Vec<ResMat> = (0..20).map(|_| random_k(2, 5, 2, &mut r).unwrap()).collect();
        let s = support_scan(&v, &gs).unwrap();
        prop_assert!(s.ok());
    }

    #[test]
    fn g0_identities(n in 1usize..=2, p in prop_oneof![Just(5u64), Just(7)], l in 1u32..=2, seed in any::<u64>()) {
        let pair = GenericPair::random(n, p, l, &mut rng(seed)).unwrap();
        let ring = ResRing::new(p, l).unwrap();
        prop_assert!(verify_conjugate_identity(&pair.alpha(), &pair.beta(), ring).unwrap());
        prop_assert!(g0_entries_are_units(&build_g0(&pair.alpha(), &pair.beta(), ring).unwrap()).unwrap());
    }

    #[test]
    fn convolution_support_is_dominated(rank in 2usize..=3, a in prop::collection::vec(-1i32..=1, 3), b in prop::collection::vec(-1i32..=1, 3)) {
        let (mu, la) = (dominant(&a[..rank]), dominant(&b[..rank]));
        let prod = HeckeElem::tau(&mu, 3).convolve(&HeckeElem::tau(&la, 3), 1 << 24).unwrap();
        let top: Vec<i32> = mu.iter().zip(&la).map(|(x, y)| x + y).collect();
        prop_assert!(prod.terms.contains_key(&top));
        for nu in prod.terms.keys() {
            prop_assert!(dominates(&top, nu), "{:?} not below {:?}", nu, top);
        }
    }

    #[test]
    fn coset_count_ignores_weyl_order(rank in 2usize..=3, a in prop::collection::vec(-2i32..=2, 3), q in prop_oneof![Just(3u64), Just(5)]) {
        let mu: Vec<i32> = a[..rank].iter().map(|&x| if rank == 3 { x.signum() } else { x }).collect();
        let mut rev = mu.clone();
        rev.reverse();
        prop_assert_eq!(coset_count(&mu, q, 1 << 24).unwrap(), coset_count(&rev, q, 1 << 24).unwrap());
        prop_assert_eq!(coset_count(&mu, q, 1 << 24).unwrap(), coset_count(&dominant(&mu), q, 1 << 24).unwrap());
    }

    #[test]
    fn rtf_holds_for_any_seed(seed in any::<u64>()) {
        for name in FiniteModel::names() {
            let rep = rtf_inequality_scan(&FiniteModel::by_name(name).unwrap(), 10, seed, 1e-12);
            prop_assert!(rep.ok(), "{}: {:?}", name, rep.witness);
            prop_assert!(rep.min_rhs >= -1e-12);
        }
    }

    #[test]
    fn exponent_arithmetic(n in 1u32..=10, l in 1u32..=5, a in 0i128..50, b in 1i128..50) {
        let theta = Q::new(a, 2 * b + 2 * a + 1) ;
        prop_assume!(theta < Q::new(1, 2));
        let r = exponents(n, l, theta).unwrap();
        let z = exponents(n, l, Q::from_integer(0)).unwrap();
        prop_assert!(r.delta_period <= z.delta_period);
        prop_assert_eq!(r.delta_subconvex * Q::from_integer(2 * n as i128 * (n as i128 + 1)), r.delta_period);
        prop_assert_eq!(r.subconvex_exponent + r.delta_subconvex, Q::new(1, 4));
        prop_assert_eq!(parse_rational(&theta.to_string()).unwrap(), theta);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn compressed_norm_below_norm_below_schur(p in prop_oneof![Just(3u64), Just(5)], seed in any::<u64>()) {
        let mut r = rng(seed);
        let pair = GenericPair::random(1, p, 1, &mut r).unwrap();
        let s = OffdiagSetup::new(&pair.alpha(), &pair.beta(), p, 1, 1 << 26).unwrap();
        for m in s.strata() {
            let a = s.a_delta(&s.delta_in_stratum(m, &mut r));
            let na = op_norm(&a, 1e-10).unwrap();
            let nc = op_norm(&s.compress(&a), 1e-10).unwrap();
            prop_assert!(nc <= na * (1.0 + 1e-6) + 1e-9);
            prop_assert!(na <= schur_bound(&a) * (1.0 + 1e-9) + 1e-9);
        }
    }

    #[test]
    fn reports_are_deterministic(seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            suites: vec!["chargeo.generic".into(), "compat.*".into(), "rtf.inequality".into()],
            seed,
            samples: 10,
            trials: 20,
            cache_dir: Some(dir.path().into()),
            ..Default::default()
        };
        let a = run_suites(&cfg).unwrap();
        let b = run_suites(&cfg).unwrap();
        prop_assert!(a.passed());
        let strip = |r: &ggplab::report::Report| r.suites.iter().map(|s| (s.name.clone(), s.checks.clone(), s.params.clone())).collect::<Vec<_>>();
        prop_assert_eq!(strip(&a), strip(&b));
    }
}
