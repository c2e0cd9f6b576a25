use diffcover_web::{classify_json, construct_json, sumset_json};
use std::collections::BTreeSet;

#[test]
fn classify_names_the_case() {
    let v = classify_json("a(x)*b(y) + x").unwrap();
    assert_eq!(v["tag"], "BASIC_IDENT");
    assert!(classify_json("a(x)*b(y) +").unwrap_err().contains("parse error"));
}

#[test]
fn construct_reports_a_checked_image() {
    let v = construct_json("(a(x)+x)*b(y) + b(y)*c(z) + c(z)*(a(x)+x) + x", "", 0).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["violations"], 0);
    let img: u64 = v["image_size"].as_str().unwrap().parse().unwrap();
    let claim: u64 = v["claimed_size"].as_str().unwrap().parse().unwrap();
    assert!(img <= claim);
    let v = construct_json("a(x)*b(y) + x", "101, 103", 0).unwrap();
    assert_eq!(v["primes"], serde_json::json!([101, 103]));
}

#[test]
fn sumset_matches_double_loop() {
    let (a, b, q) = ([0u64, 1, 3], [2u64, 5, 9], 13u64);
    let v = sumset_json("0,1,3", "2 5 9", q).unwrap();
    let want: BTreeSet<u64> = a.iter().flat_map(|x| b.iter().map(move |y| (x + y) % q)).collect();
    let got: BTreeSet<u64> = v["sum"]["elements"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert_eq!(got, want);
    // {0, 1, 3} is a perfect difference set mod 7
    assert_eq!(sumset_json("0,1,3", "0", 7).unwrap()["covers"], true);
    assert_eq!(sumset_json("0,1,3", "0", 13).unwrap()["covers"], false);
    assert!(sumset_json("1", "1", 0).is_err());
}
