mod common;

use diffcover::expr::{enumerate_unreduced, parse};
use diffcover::program::Program;
use diffcover::residue::Modulus;
use diffcover::verify::{full_domain_image, iterated_sumset, l_sq_plus_k, product_set};
use diffcover::zset::ZSet;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::sync::Arc;

fn naive_sum(a: &[u64], b: &[u64], n: u64) -> Vec<u64> {
    let s: BTreeSet<u64> = a.iter().flat_map(|&x| b.iter().map(move |&y| (x + y) % n)).collect();
    s.into_iter().collect()
}

#[test]
fn sumset_engine_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=1000u64);
        let a: Vec<u64> = (0..rng.gen_range(0..=50)).map(|_| rng.gen_range(0..n)).collect();
        let b: Vec<u64> = (0..rng.gen_range(0..=50)).map(|_| rng.gen_range(0..n)).collect();
        let (za, zb) = (ZSet::from_iter(n, a.iter().copied()), ZSet::from_iter(n, b.iter().copied()));
        assert_eq!(za.sumset(&zb, u64::MAX).unwrap().to_vec(), naive_sum(&a, &b, n));
    }
}

#[test]
fn hashed_sets_match_double_loop() {
    // above the bitset range
    let n = (1u64 << 27) + 3;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let a: Vec<u64> = (0..30).map(|_| rng.gen_range(0..n)).collect();
        let za = ZSet::from_iter(n, a.iter().copied());
        assert_eq!(za.sumset(&za, u64::MAX).unwrap().to_vec(), naive_sum(&a, &a, n));
    }
}

#[test]
fn sum_and_product_families_match_triple_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let n = rng.gen_range(2..=60u64);
        let a: Vec<u64> = (0..rng.gen_range(1..=8)).map(|_| rng.gen_range(0..n)).collect();
        let za = ZSet::from_iter(n, a.iter().copied());
        let mut want = BTreeSet::new();
        for &x in &a {
            for &y in &a {
                for &z in &a {
                    for &w in &a {
                        want.insert((x * y + z + w) % n);
                    }
                }
            }
        }
        assert_eq!(l_sq_plus_k(&za, 1, 2, u64::MAX).unwrap().to_vec(), want.into_iter().collect::<Vec<_>>());
        let prod: BTreeSet<u64> = a.iter().flat_map(|&x| a.iter().map(move |&y| x * y % n)).collect();
        assert_eq!(product_set(&za, u64::MAX).unwrap().to_vec(), prod.into_iter().collect::<Vec<_>>());
        let zero = ZSet::from_iter(n, [0]);
        assert_eq!(iterated_sumset(&zero, &za, 1, u64::MAX).unwrap(), za);
    }
}

/// Footprint-reduced images equal plain enumeration for random maps on
/// every expression shape with a full domain of at most 10^6 points.
#[test]
fn reduced_images_match_full_domain() {
    let moduli: [&[u64]; 3] = [&[5, 7], &[3, 5], &[3, 5, 7]];
    let mut exprs = enumerate_unreduced(1, 1);
    exprs.extend(enumerate_unreduced(2, 0));
    exprs.push(parse("a(x)*b(y) + (a(x)+x)*(b(y)+y) + a(x)*c(z)").unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut compared = 0;
    for e in &exprs {
        for ps in moduli {
            let m = Arc::new(Modulus::from_u64s(ps).unwrap());
            let q: u64 = ps.iter().product();
            if q.pow(e.num_vars() as u32) > 1_000_000 || e.max_coeff() >= ps[0] {
                continue;
            }
            let maps = common::random_maps(&mut rng, m, e.num_vars());
            let img = Program::compile(e, &maps).unwrap().image(u64::MAX).unwrap();
            let got: BTreeSet<Vec<u32>> = img.values(u64::MAX).unwrap().into_iter().collect();
            assert_eq!(got, common::naive_image(e, &maps), "{e} over {ps:?}");
            assert_eq!(got, full_domain_image(e, &maps, 1_000_000).unwrap(), "{e} over {ps:?}");
            compared += 1;
        }
    }
    assert!(compared > 30, "{compared}");
}

#[test]
fn parallel_and_sequential_images_agree() {
    let e = parse("a(x)*b(y) + b(y)*c(z) + a(x) + x + c(z) + z").unwrap();
    let m = Arc::new(Modulus::from_u64s(&[11, 13]).unwrap());
    let maps = common::random_maps(&mut ChaCha8Rng::seed_from_u64(14), m, 3);
    let prog = Program::compile(&e, &maps).unwrap();
    let par = prog.image(u64::MAX).unwrap().values(u64::MAX).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let seq = pool.install(|| prog.image(u64::MAX).unwrap().values(u64::MAX).unwrap());
    assert_eq!(par, seq);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Compiled evaluation equals the residue-by-residue evaluator.
    #[test]
    fn compiled_eval_matches_direct(seed in any::<u64>(), idx in 0usize..26) {
        let exprs = enumerate_unreduced(1, 1);
        let e = &exprs[idx % exprs.len()];
        let m = Arc::new(Modulus::from_u64s(&[5, 7, 11]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maps = common::random_maps(&mut rng, m.clone(), e.num_vars());
        let prog = Program::compile(e, &maps).unwrap();
        let primes = m.prime_values();
        for _ in 0..50 {
            let xs: Vec<Vec<u32>> = (0..e.num_vars()).map(|_| primes.iter().map(|&p| rng.gen_range(0..p)).collect()).collect();
            let pt: Vec<_> = xs.iter().map(|x| diffcover::residue::RingElem::new(m.clone(), x.clone()).unwrap()).collect();
            let direct = diffcover::maps::evaluate(e, &maps, &pt).unwrap();
            prop_assert_eq!(prog.eval(&xs), direct.residues().to_vec());
        }
    }
}

fn image_size_mod6(alpha: &[u32], beta: &[u32]) -> usize {
    let mut seen = [false; 6];
    for x in 0..6 {
        for y in 0..6 {
            seen[(alpha[x] * beta[y] + x as u32 + y as u32) as usize % 6] = true;
        }
    }
    seen.iter().filter(|&&b| b).count()
}

#[test]
fn experiment_minimum_is_attained_and_not_beaten() {
    let r = diffcover::verify::min_image_experiment(2, 3).unwrap();
    assert_eq!(image_size_mod6(&r.alpha, &r.beta), r.minimum as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..200_000 {
        let a: Vec<u32> = (0..6).map(|_| rng.gen_range(0..6)).collect();
        let b: Vec<u32> = (0..6).map(|_| rng.gen_range(0..6)).collect();
        assert!(image_size_mod6(&a, &b) >= r.minimum as usize);
    }
    // for the returned α, no β does better
    let mut best = 6;
    for code in 0..6u32.pow(6) {
        let b: Vec<u32> = (0..6).map(|i| code / 6u32.pow(i) % 6).collect();
        best = best.min(image_size_mod6(&r.alpha, &b));
    }
    assert_eq!(best, r.minimum as usize);
}
