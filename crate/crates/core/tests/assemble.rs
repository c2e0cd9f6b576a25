use diffcover::assemble::*;
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn linear_build() -> &'static Build {
    static B: OnceLock<Build> = OnceLock::new();
    B.get_or_init(|| {
        let p = plan(0, 2, 0.6).unwrap();
        assemble(&p, &AssembleConfig { base_primes: Some(vec![5, 7, 11]), ..Default::default() }).unwrap()
    })
}

#[test]
fn stage_two_layout() {
    let b = linear_build();
    assert_eq!(b.phi.q1, 385);
    assert_eq!(b.phi.cases.len(), 3);
    assert!(b.phi.cases.iter().all(|c| c.count == 385 * 384));
    assert_eq!(b.phi.modulus.len(), 3 + 3 * 147_840);
    assert!(b.density.within_epsilon);
    // 1/5 + 1/7 + 1/11
    assert_eq!(b.density.stage1, "167/385");
}

/// Changing the input on one stage-2 coordinate changes φ there only.
#[test]
fn stage_two_rules_are_coordinate_local() {
    let b = linear_build();
    let primes = b.phi.modulus.prime_values();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<u32> = primes.iter().map(|&p| rng.gen_range(0..p)).collect();
    let base = b.phi.eval(&x);
    for _ in 0..20 {
        let c = rng.gen_range(3..primes.len());
        let mut y = x.clone();
        y[c] = (y[c] + 1) % primes[c];
        let moved = b.phi.eval(&y);
        let diff: Vec<usize> = (0..primes.len()).filter(|&i| moved[i] != base[i]).collect();
        assert!(diff.is_empty() || diff == vec![c]);
        assert_eq!(b.phi.footprint(c), vec![0, 1, 2, c]);
    }
}

#[test]
fn witnesses_and_sums() {
    let b = linear_build();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rep = witness_sweep(b, 0, 50, &mut rng);
    assert!(rep.pass && rep.checked == 50);
    let mut stage2 = 0;
    for _ in 0..100 {
        let s = sample_sum_element(b, &mut rng).unwrap();
        assert!(s.certified, "{s:?}");
        stage2 += (s.route.coords[0] >= 3) as u32;
    }
    assert!(stage2 > 10);
}

/// The case coordinate of a two-variable sum reads exactly θ_j on the
/// input in position j, so the sum vanishes there.
#[test]
fn case_coordinate_vanishes() {
    let b = linear_build();
    let primes = b.phi.modulus.prime_values();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let x: Vec<u32> = primes.iter().map(|&p| rng.gen_range(0..p)).collect();
        let y: Vec<u32> = primes.iter().map(|&p| rng.gen_range(0..p)).collect();
        if b.phi.reduce_q1(&x) == b.phi.reduce_q1(&y) {
            continue;
        }
        // φ(x) + x + φ(y) + y
        let r = route(b, &[(1, 1), (1, 1)], &[&x, &y]).unwrap();
        let c = r.coords[0];
        let (fx, fy) = (b.phi.eval(&x), b.phi.eval(&y));
        assert_eq!((fx[c] as u64 + x[c] as u64 + fy[c] as u64 + y[c] as u64) % primes[c] as u64, 0);
    }
}

#[test]
fn small_single_stage_is_exhaustive() {
    let p = plan(0, 1, 0.5).unwrap();
    let b = assemble(&p, &AssembleConfig { base_primes: Some(vec![5, 7]), ..Default::default() }).unwrap();
    let rep = witness_sweep(&b, 1000, 0, &mut ChaCha8Rng::seed_from_u64(0));
    assert!(rep.exhaustive && rep.pass);
    // A = {φ(x)} ∪ {φ(x) + x} over Z_35 has full difference set
    let q = 35u64;
    let mut a = diffcover::zset::ZSet::new(q);
    for z in 0..q {
        let x = [(z % 5) as u32, (z % 7) as u32];
        let y = b.phi.eval(&x);
        let m = diffcover::residue::Modulus::from_u64s(&[5, 7]).unwrap();
        let yv = m.combine(&y);
        let yz = (yv.clone() + z) % q;
        a.insert(u64::try_from(yv).unwrap());
        a.insert(u64::try_from(yz).unwrap());
    }
    assert!(diffcover::verify::verify_cover(&a, u64::MAX).unwrap());
}

#[test]
fn strict_and_quadratic_are_infeasible() {
    let p = plan(0, 2, 0.6).unwrap();
    let strict = AssembleConfig { base_primes: Some(vec![5, 7, 11]), mode: Mode::Strict, ..Default::default() };
    assert!(matches!(assemble(&p, &strict), Err(diffcover::Error::Infeasible(_))));
    let q = plan(1, 0, 0.5).unwrap();
    let est = estimate(&q, None, &Limits::default());
    assert!(!est.strict_feasible);
    assert!(matches!(assemble(&q, &AssembleConfig::default()), Err(diffcover::Error::Infeasible(_))));
}

#[test]
fn estimate_counts_cases_exactly() {
    let p = plan(0, 2, 0.6).unwrap();
    let est = estimate(&p, Some(&[5, 7, 11]), &Limits::default());
    let s2 = &est.stages[1];
    assert_eq!(s2.cases_per_expression.as_deref(), Some("147840"));
    assert_eq!(s2.coordinates, Some(443_520));
    assert_eq!(case_count(&BigUint::from(385u32), 2), BigUint::from(147_840u32));
}

proptest! {
    #[test]
    fn tuple_codes_are_bijective(q in 2u64..5000, a in any::<u64>(), b in any::<u64>()) {
        let (x, y) = (a % q, b % q);
        prop_assume!(x != y);
        let t = encode_tuple(&[x, y], q);
        prop_assert!(t < q * (q - 1));
        prop_assert_eq!(decode_tuple(t, q, 2), vec![x, y]);
    }
}
