use diffcover::construct::{construct, ConstructConfig, Construction};
use diffcover::expr::{parse, CaseTag};
use diffcover::maps::Rule;
use diffcover::program::Program;
use diffcover::verify::{full_domain_image, image_exhaustive, image_sampled};
use num_bigint::BigUint;

const BUDGET: u64 = 100_000_000;

fn build(text: &str, primes: Option<&[u64]>) -> Construction {
    let e = parse(text).unwrap();
    let cfg = ConstructConfig { primes: primes.map(<[u64]>::to_vec), ..Default::default() };
    construct(&e, &cfg).unwrap_or_else(|err| panic!("{text}: {err}"))
}

/// Exhaustive image within the claim, every value certified, and equal to
/// plain enumeration when the full domain is at most 10^6 points.
fn check(text: &str, primes: Option<&[u64]>, tag: CaseTag) -> Construction {
    let e = parse(text).unwrap();
    let c = build(text, primes);
    assert_eq!(c.tag, Some(tag), "{text}");
    let r = image_exhaustive(&e, &c.maps, Some(&c.certificate), BUDGET).unwrap();
    assert!(r.pass && r.certificate_checked && r.violations == 0, "{text}: {r:?}");
    if let Ok(full) = full_domain_image(&e, &c.maps, 1_000_000) {
        let img = Program::compile(&e, &c.maps).unwrap().image(BUDGET).unwrap();
        let mut reduced = img.values(u64::MAX).unwrap();
        reduced.sort();
        assert_eq!(reduced, full.into_iter().collect::<Vec<_>>(), "{text}");
    }
    c
}

#[test]
fn single_variable_polynomial() {
    let c = check("a(x)^2 + a(x) + x", Some(&[101, 103, 107]), CaseTag::SingleVar);
    let q = BigUint::from(101u64 * 103 * 107);
    assert!(c.certificate.claimed_size < q);
}

#[test]
fn affine_case_is_constant() {
    let c = check("a(x)*b(y) + (a(x)+x)*(b(y)+y) + x + y", Some(&[101]), CaseTag::Affine);
    assert_eq!(c.certificate.claimed_size, BigUint::from(1u32));
}

#[test]
fn basic_identification_within_kq() {
    for text in ["a(x)*b(y) + a(x) + x + b(y) + y", "a(x)*b(y) + 2*a(x) + 3*x + 5*b(y) + 7*y"] {
        let c = check(text, Some(&[11, 13]), CaseTag::BasicIdent);
        assert!(c.certificate.claimed_size <= BigUint::from(15u32 * 11));
    }
}

#[test]
fn acyclic_and_split() {
    check("a(x)*b(y) + b(y)*c(z) + a(x) + x + c(z) + z", Some(&[101, 103, 107]), CaseTag::AcyclicIdent);
    check("a(x)^2 + x + b(y)^2 + y", Some(&[499]), CaseTag::SplitSingleVars);
}

#[test]
fn three_cycle_five_primes_sampled() {
    let text = "(a(x)+x)*(b(y)+y) + (b(y)+y)*(c(z)+z) + c(z)*a(x) + x + y + z";
    let e = parse(text).unwrap();
    let c = build(text, Some(&[17, 19, 23, 29, 31]));
    assert_eq!(c.tag, Some(CaseTag::ThreeCycleFivePrime));
    let r = image_sampled(&e, &c.maps, &c.certificate, 50_000, 3).unwrap();
    assert_eq!(r.violations, 0);
}

#[test]
fn three_cycle_closed_form() {
    for primes in [&[7u64][..], &[101]] {
        let c = check("(a(x)+x)*b(y) + (b(y)+y)*c(z) + (c(z)+z)*a(x) + x", Some(primes), CaseTag::ThreeCycleClosed);
        assert_eq!(c.certificate.claimed_size, BigUint::from(1u32));
    }
}

#[test]
fn three_cycle_degenerate() {
    check("a(x)*b(y) + b(y)*c(z) + c(z)*a(x)", None, CaseTag::ThreeCycleDegenerate);
}

#[test]
fn repeated_edge_plus_polynomial() {
    check("a(x)*b(y) + (a(x)+x)*(b(y)+y) + c(z)^2 + z", Some(&[101]), CaseTag::RepeatedEdgePlusPoly);
}

#[test]
fn randomized_cases() {
    check("a(x)^2 + a(x)*b(y) + (a(x)+x)*(b(y)+y)", Some(&[23]), CaseTag::ProbTwoVar);
    check("a(x)*b(y) + (a(x)+x)*(b(y)+y) + a(x)*c(z) + y", Some(&[7]), CaseTag::FinalPqSimple);
    check("a(x)*b(y) + (a(x)+x)*(b(y)+y) + a(x)*c(z)", Some(&[31, 37]), CaseTag::FinalPqProb);
}

#[test]
fn verifier_catches_a_broken_map() {
    let text = "a(x)*b(y) + (a(x)+x)*(b(y)+y) + x + y";
    let e = parse(text).unwrap();
    let mut c = build(text, Some(&[101]));
    c.maps.set(0, 0, Rule::affine(1, 0, 101));
    let r = image_exhaustive(&e, &c.maps, Some(&c.certificate), BUDGET).unwrap();
    assert!(!r.pass && r.violations > 0 && r.witness.is_some());
    let s = image_sampled(&e, &c.maps, &c.certificate, 1000, 0).unwrap();
    assert!(!s.pass);
}

#[test]
fn exhaustive_over_budget_asks_for_sampling() {
    let text = "(a(x)+x)*(b(y)+y) + (b(y)+y)*(c(z)+z) + c(z)*a(x) + x + y + z";
    let e = parse(text).unwrap();
    let c = build(text, Some(&[17, 19, 23, 29, 31]));
    let err = image_exhaustive(&e, &c.maps, Some(&c.certificate), 1000).unwrap_err();
    assert!(err.to_string().contains("sampled"));
}

#[test]
fn seeded_builds_are_deterministic() {
    let text = "a(x)^2 + a(x)*b(y) + (a(x)+x)*(b(y)+y)";
    let a = serde_json::to_string(&build(text, Some(&[23]))).unwrap();
    let b = serde_json::to_string(&build(text, Some(&[23]))).unwrap();
    assert_eq!(a, b);
}
