//! One PASS/FAIL line per acceptance criterion. Tolerances are pinned
//! below; the process exits non-zero if any criterion fails.

mod common;

use diffcover::assemble::{assemble, estimate, plan, sample_sum_element, witness_sweep, AssembleConfig, Limits};
use diffcover::construct::affine::affine_solve_weighted;
use diffcover::construct::basic::basic_ident;
use diffcover::construct::cycle::{closed_form_maps, five_prime_stats, isqrt};
use diffcover::construct::small::{poly_eval, small_value_bound, small_value_search};
use diffcover::construct::{construct, ConstructConfig};
use diffcover::expr::{parse, q_mod, qi, Atom, CaseTag, CycleCoeffs, Expression, Linear, Term, Q};
use diffcover::program::Program;
use diffcover::residue::{centered_lift, Modulus};
use diffcover::verify::{full_domain_image, image_exhaustive, image_sampled, min_image_experiment};
use diffcover::zset::ZSet;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

const BUDGET: u64 = 200_000_000;
/// Constant in the basic identification bound K·q.
const K_BASIC: f64 = 15.0;
/// Constant in the small-value bound C_d·p^(1 − 2^(−d)).
const C_SMALL: f64 = 4.0;
/// Allowed |t − uv| in units of √p4.
const C1_FIVE: f64 = 5.0;
/// Mean retries allowed for the two-variable lemma.
const MEAN_RETRIES: f64 = 4.0;
/// ε for the assembler run; base primes (5, 7, 11) alone give 167/385.
const ASSEMBLY_EPS: f64 = 0.6;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn within(t: Instant, limit: Duration, msg: String) -> Outcome {
    let el = t.elapsed();
    ensure(el < limit, format!("{msg}; {:.2}s of {}s", el.as_secs_f64(), limit.as_secs()))
}

fn c1_carries() -> Outcome {
    let t = Instant::now();
    let (checked, failed) = common::carry_identities(47);
    if failed > 0 {
        return Err(format!("{failed} of {checked} checks failed"));
    }
    within(t, Duration::from_secs(10), format!("{checked} checks, 0 failures"))
}

fn c2_single_var() -> Outcome {
    let t = Instant::now();
    let e = parse("a(x)^2 + a(x) + x").unwrap();
    let primes = [101u64, 103, 107, 109];
    let cfg = ConstructConfig { epsilon: 0.32, primes: Some(primes.to_vec()), ..Default::default() };
    let c = construct(&e, &cfg).map_err(|e| e.to_string())?;
    if c.maps.primes().len() != 4 {
        return Err(format!("used {} primes", c.maps.primes().len()));
    }
    let r = image_exhaustive(&e, &c.maps, Some(&c.certificate), BUDGET).map_err(|e| e.to_string())?;
    let size: f64 = r.image_size.as_deref().unwrap().parse().unwrap();
    let q: f64 = primes.iter().map(|&p| p as f64).product();
    let bound = 0.75f64.powi(4) * q;
    if !(r.pass && size <= bound) {
        return Err(format!("image {size} vs bound {bound:.0}, violations {}", r.violations));
    }
    within(t, Duration::from_secs(60), format!("image {size} ≤ (3/4)^4·q = {bound:.0} (ratio {:.4})", size / q))
}

fn eval_q(r: Q, p: u32) -> u64 {
    q_mod(r, p).unwrap() as u64
}

fn c3_constancy() -> Outcome {
    const P: u32 = 101;
    let p = P as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let nz = |rng: &mut ChaCha8Rng| {
        let v = rng.gen_range(1..=6i64);
        if rng.gen_bool(0.5) {
            v
        } else {
            -v
        }
    };
    // affine lemma
    let mut done = 0;
    let mut tried = 0;
    while done < 100 {
        tried += 1;
        let (k1, k2, n1, n2) = (qi(nz(&mut rng)), qi(nz(&mut rng)), qi(nz(&mut rng)), qi(nz(&mut rng)));
        let l1 = Linear::new(rng.gen_range(0..5), rng.gen_range(0..5));
        let l2 = Linear::new(rng.gen_range(0..5), rng.gen_range(0..5));
        let c = qi(rng.gen_range(-3..=3));
        let Ok(s) = affine_solve_weighted(k1, k2, n1, n2, l1, l2, c) else { continue };
        if [s.a, s.b, s.c, s.d, s.value].iter().any(|&v| q_mod(v, P).is_err()) {
            continue;
        }
        let (a, b, cc, d) = (eval_q(s.a, P), eval_q(s.b, P), eval_q(s.c, P), eval_q(s.d, P));
        let (k1, k2, n1, n2) = (eval_q(k1, P), eval_q(k2, P), eval_q(n1, P), eval_q(n2, P));
        let (la1, mu1, la2, mu2) = (eval_q(l1.lambda, P), eval_q(l1.mu, P), eval_q(l2.lambda, P), eval_q(l2.mu, P));
        let mut seen = BTreeSet::new();
        for x in 0..p {
            let al = (a * x + b) % p;
            for y in 0..p {
                let be = (cc * y + d) % p;
                let v = k1 * al % p * be + k2 * ((al + n1 * x) % p) % p * ((be + n2 * y) % p) + la1 * al + mu1 * x + la2 * be + mu2 * y;
                seen.insert(v % p);
            }
        }
        if seen.len() != 1 || *seen.iter().next().unwrap() != eval_q(s.value, P) {
            return Err(format!("affine tuple {done}: image size {}", seen.len()));
        }
        done += 1;
    }
    // closed-form cycle
    let mut cyc = 0;
    while cyc < 100 {
        let c: [i64; 6] = std::array::from_fn(|_| rng.gen_range(-3..=3));
        if c[0] == c[5] || c[1] == c[2] || c[3] == c[4] {
            continue;
        }
        let lin: [Linear; 3] = std::array::from_fn(|_| Linear::new(rng.gen_range(0..4), rng.gen_range(0..4)));
        let cc = CycleCoeffs { c: c.map(qi), lin };
        let m = Arc::new(Modulus::from_u64s(&[p]).unwrap());
        let Ok(maps) = closed_form_maps(&cc, m) else { continue };
        let r = |v: usize| (maps.rule(v, 0).own as u64, maps.rule(v, 0).constant as u64);
        let ((ao, ac), (bo, bc), (go, gc)) = (r(0), r(1), r(2));
        let cm: Vec<u64> = c.iter().map(|&v| v.rem_euclid(p as i64) as u64).collect();
        let lm: Vec<(u64, u64)> = lin.iter().map(|l| (eval_q(l.lambda, P), eval_q(l.mu, P))).collect();
        let mut seen = BTreeSet::new();
        for x in 0..p {
            let al = (ao * x + ac) % p;
            for y in 0..p {
                let be = (bo * y + bc) % p;
                let xy = (al + cm[0] * x) % p * ((be + cm[1] * y) % p) + lm[0].0 * al + lm[0].1 * x + lm[1].0 * be + lm[1].1 * y;
                for z in 0..p {
                    let ga = (go * z + gc) % p;
                    let v = xy + (be + cm[2] * y) % p * ((ga + cm[3] * z) % p) + (ga + cm[4] * z) % p * ((al + cm[5] * x) % p) + lm[2].0 * ga + lm[2].1 * z;
                    seen.insert(v % p);
                }
            }
            if seen.len() > 1 {
                break;
            }
        }
        if seen.len() != 1 {
            return Err(format!("cycle tuple {c:?}: not constant"));
        }
        cyc += 1;
    }
    Ok(format!("100 affine tuples ({tried} drawn) and 100 cycle tuples constant over Z_101"))
}

fn c4_basic() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = ConstructConfig { budget: BUDGET, ..Default::default() };
    let mut worst = 0f64;
    for i in 0..20 {
        let g = |rng: &mut ChaCha8Rng| rng.gen_range(1..=9i64);
        let (l0, l1, m1, l2, m2) = (g(&mut rng), g(&mut rng), g(&mut rng), g(&mut rng), g(&mut rng));
        let c = basic_ident(l0, l1, m1, l2, m2, 101, 103, &cfg).map_err(|e| format!("tuple {i}: {e}"))?;
        let e = Expression::new(vec![Term::new(l0, vec![Atom::new(0, 0), Atom::new(1, 0)])], vec![Linear::new(l1, m1), Linear::new(l2, m2)]);
        let r = image_exhaustive(&e, &c.maps, Some(&c.certificate), BUDGET).map_err(|e| e.to_string())?;
        let size: f64 = r.image_size.as_deref().unwrap().parse().unwrap();
        if !r.pass || size > K_BASIC * 103.0 {
            return Err(format!("tuple {i}: image {size}, claim {}, violations {}", r.claimed_size, r.violations));
        }
        worst = worst.max(size / 103.0);
    }
    within(t, Duration::from_secs(60), format!("20 tuples, max image/q = {worst:.2} ≤ {K_BASIC}"))
}

fn c5_small_values() -> Outcome {
    let p = 499u32;
    let bound = small_value_bound(2, p, C_SMALL);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0i64;
    for _ in 0..1000 {
        let coeffs = [rng.gen_range(0..p), rng.gen_range(0..p), rng.gen_range(1..p)];
        let (t, v) = small_value_search(&coeffs, p).map_err(|e| e.to_string())?;
        // independent minimum over all t
        let best = (0..p).map(|s| centered_lift(poly_eval(&coeffs, s, p), p).abs()).min().unwrap();
        if v.abs() != best || centered_lift(poly_eval(&coeffs, t, p), p) != v {
            return Err(format!("search returned {v}, minimum is {best}"));
        }
        worst = worst.max(best);
    }
    ensure(worst as f64 <= bound, format!("1000 polynomials, worst minimum {worst} ≤ {bound:.1}"))
}

fn c6_two_var() -> Outcome {
    let e = parse("a(x)^2 + a(x)*b(y) + (a(x)+x)*(b(y)+y)").unwrap();
    let mut total = 0u64;
    for seed in 0..100 {
        let cfg = ConstructConfig { primes: Some(vec![23]), seed, ..Default::default() };
        let c = construct(&e, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        if c.tag != Some(CaseTag::ProbTwoVar) {
            return Err(format!("classified as {:?}", c.tag));
        }
        let img = full_domain_image(&e, &c.maps, 1000).map_err(|e| e.to_string())?;
        if img.contains(&vec![0]) {
            return Err(format!("seed {seed}: the expression vanishes"));
        }
        total += c.details["attempts"][0].as_u64().unwrap();
    }
    let mean = total as f64 / 100.0;
    ensure(mean < MEAN_RETRIES, format!("100 seeds, 529 points each nonzero, mean attempts {mean:.2} < {MEAN_RETRIES}"))
}

fn c7_final_pq() -> Outcome {
    let t = Instant::now();
    let e = parse("a(x)*b(y) + (a(x)+x)*(b(y)+y) + a(x)*c(z)").unwrap();
    let c = construct(&e, &ConstructConfig { primes: Some(vec![31, 37]), ..Default::default() }).map_err(|e| e.to_string())?;
    let designated: Vec<Vec<u32>> = serde_json::from_value(c.details["pairs"][0]["designated"].clone()).unwrap();
    let r = image_exhaustive(&e, &c.maps, Some(&c.certificate), BUDGET).map_err(|e| e.to_string())?;
    let img = Program::compile(&e, &c.maps).unwrap().image(BUDGET).unwrap();
    let vals: BTreeSet<Vec<u32>> = img.values(u64::MAX).unwrap().into_iter().collect();
    let hit = designated.iter().filter(|v| vals.contains(*v)).count();
    if designated.len() != 6 || hit > 0 || !r.pass {
        return Err(format!("{} designated, {hit} attained", designated.len()));
    }
    within(t, Duration::from_secs(30), format!("{} points, image {} of 1147, all 6 designated values missed", r.points, vals.len()))
}

fn c8_five_prime() -> Outcome {
    let e = parse("(a(x)+x)*(b(y)+y) + (b(y)+y)*(c(z)+z) + c(z)*a(x) + x + y + z").unwrap();
    let ps = [17u64, 19, 23, 29, 31];
    let c = construct(&e, &ConstructConfig { primes: Some(ps.to_vec()), ..Default::default() }).map_err(|e| e.to_string())?;
    let r = image_sampled(&e, &c.maps, &c.certificate, 1_000_000, 8).map_err(|e| e.to_string())?;
    let st = five_prime_stats(ps[2], ps[3], ps[4]);
    // independent sweep over all (ȳ3, z̄3)
    let m = isqrt(ps[3]);
    let mut worst = 0u64;
    for y in 0..ps[2] {
        for z in 0..ps[2] {
            worst = worst.max((y * z).div_ceil(ps[3]).abs_diff((y / m) * (z / m)));
        }
    }
    let bound = C1_FIVE * (ps[3] as f64).sqrt();
    let q: BigUint = ps.iter().product::<u64>().into();
    let vacuous = if c.certificate.claimed_size >= q { ", claim covers Z_q" } else { "" };
    ensure(
        r.violations == 0 && worst == st.max_t_minus_uv && (worst as f64) <= bound,
        format!("10^6 samples, {} violations; |S1| = {}; max|t−uv| = {worst} ≤ {C1_FIVE}·√29 = {bound:.1}{vacuous}", r.violations, st.s1_size),
    )
}

fn c9_assembler() -> Outcome {
    let t = Instant::now();
    let p = plan(0, 2, ASSEMBLY_EPS).map_err(|e| e.to_string())?;
    let b = assemble(&p, &AssembleConfig { base_primes: Some(vec![5, 7, 11]), ..Default::default() }).map_err(|e| e.to_string())?;
    let coords: usize = b.phi.cases.iter().map(|c| c.count).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let w = witness_sweep(&b, 0, 1000, &mut rng);
    let mut bad = 0;
    for _ in 0..1000 {
        bad += !sample_sum_element(&b, &mut rng).map_err(|e| e.to_string())?.certified as u32;
    }
    let quad = estimate(&plan(1, 0, 0.5).unwrap(), None, &Limits::default());
    let counts = quad.stages.get(1).and_then(|s| s.cases_per_expression.clone()).unwrap_or_default();
    let ok = w.pass && w.checked == 1000 && bad == 0 && b.density.within_epsilon && !quad.strict_feasible && !counts.is_empty();
    let msg = format!(
        "{coords} stage-2 coordinates, 1000 witnesses ({} bad), 1000 sums ({bad} uncertified), density ≤ {:.4} ≤ ε = {ASSEMBLY_EPS}; quadratic (1,0) infeasible with {}-digit case count",
        w.failures, b.density.total_upper, counts.len()
    );
    if !ok {
        return Err(msg);
    }
    within(t, Duration::from_secs(300), msg)
}

fn c10_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for i in 0..1000 {
        let n = rng.gen_range(1..=1000u64);
        let a: Vec<u64> = (0..rng.gen_range(0..=50)).map(|_| rng.gen_range(0..n)).collect();
        let b: Vec<u64> = (0..rng.gen_range(0..=50)).map(|_| rng.gen_range(0..n)).collect();
        let want: BTreeSet<u64> = a.iter().flat_map(|&x| b.iter().map(move |&y| (x + y) % n)).collect();
        let got = ZSet::from_iter(n, a.iter().copied()).sumset(&ZSet::from_iter(n, b.iter().copied()), u64::MAX).unwrap();
        if got.to_vec() != want.into_iter().collect::<Vec<_>>() {
            return Err(format!("sumset trial {i} differs"));
        }
    }
    let cases: [(&str, &[u64]); 8] = [
        ("a(x)^2 + a(x) + x", &[499]),
        ("a(x)*b(y) + (a(x)+x)*(b(y)+y) + x + y", &[101]),
        ("a(x)*b(y) + a(x) + x + b(y) + y", &[11, 13]),
        ("(a(x)+x)*b(y) + (b(y)+y)*c(z) + (c(z)+z)*a(x) + x", &[7]),
        ("a(x)^2 + x + b(y)^2 + y", &[499]),
        ("a(x)^2 + a(x)*b(y) + (a(x)+x)*(b(y)+y)", &[23]),
        ("a(x)*b(y) + (a(x)+x)*(b(y)+y) + a(x)*c(z) + y", &[7]),
        ("a(x)*b(y) + (a(x)+x)*(b(y)+y) + c(z)^2 + z", &[11]),
    ];
    let mut compared = 0;
    for (text, ps) in cases {
        let e = parse(text).unwrap();
        // ε = 0.76 lets the single-variable case use one prime
        let cfg = ConstructConfig { primes: Some(ps.to_vec()), epsilon: 0.76, ..Default::default() };
        let c = construct(&e, &cfg).map_err(|err| format!("{text}: {err}"))?;
        let Ok(full) = full_domain_image(&e, &c.maps, 1_000_000) else { continue };
        let img = Program::compile(&e, &c.maps).unwrap().image(BUDGET).unwrap();
        let red: BTreeSet<Vec<u32>> = img.values(u64::MAX).unwrap().into_iter().collect();
        if red != full {
            return Err(format!("{text}: reduced image differs from full enumeration"));
        }
        compared += 1;
    }
    ensure(compared >= 6, format!("1000 sumset trials equal; {compared} constructions with full domain ≤ 10^6 equal"))
}

fn c11_experiment() -> Outcome {
    let t = Instant::now();
    let r = min_image_experiment(2, 3).map_err(|e| e.to_string())?;
    let msg = format!("minimum |Im| = {} over {} maps α (β by exact search)", r.minimum, r.alphas_examined);
    if r.minimum < 2 {
        return Err(msg);
    }
    within(t, Duration::from_secs(120), msg)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("carry identities, primes ≤ 47", c1_carries),
        ("single-variable bound", c2_single_var),
        ("affine and closed-form constancy", c3_constancy),
        ("basic identification", c4_basic),
        ("small-value search", c5_small_values),
        ("probabilistic two-variable", c6_two_var),
        ("finalPQ on (31, 37)", c7_final_pq),
        ("five-prime 3-cycle", c8_five_prime),
        ("assembler, linear family", c9_assembler),
        ("oracle equivalences", c10_oracles),
        ("minimum-image experiment", c11_experiment),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match out {
            Ok(m) => println!("criterion {:>2} PASS  {name}: {m}", i + 1),
            Err(m) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {m}", i + 1)
            }
        }
    }
    println!("{} of 11 criteria pass", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
