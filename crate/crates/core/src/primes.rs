//! Primality testing and prime enumeration.

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let bases: &[u64] = if n < 4_759_123_141 {
        &[2, 7, 61]
    } else {
        &[2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]
    };
    'outer: for &a in bases {
        let mut x = pow_mod(a, d, n);
        if x == 0 || x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// All primes in `[lo, hi)` via a simple sieve.
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    if hi <= 2 || hi <= lo {
        return Vec::new();
    }
    let n = hi as usize;
    let mut composite = vec![false; n];
    let mut out = Vec::new();
    let mut i = 2usize;
    while i * i < n {
        if !composite[i] {
            let mut j = i * i;
            while j < n {
                composite[j] = true;
                j += i;
            }
        }
        i += 1;
    }
    for (v, &c) in composite.iter().enumerate().skip(lo.max(2) as usize) {
        if !c {
            out.push(v as u64);
        }
    }
    out
}

/// The first `count` primes that are at least `lo`.
pub fn primes_from(lo: u64, count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut hi = (lo.max(16)) * 2;
    while out.len() < count {
        out = primes_in(lo, hi);
        hi *= 2;
    }
    out.truncate(count);
    out
}

/// Primes strictly between `lo` and `hi`.
pub fn window(lo: u64, hi: u64) -> Vec<u64> {
    primes_in(lo + 1, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sieve_agrees_with_trial_division() {
        let trial = |n: u64| n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0);
        let sieve = primes_in(0, 5000);
        let naive: Vec<u64> = (0..5000).filter(|&n| trial(n)).collect();
        assert_eq!(sieve, naive);
        for n in 0..5000 {
            assert_eq!(is_prime(n), trial(n), "{n}");
        }
    }

    #[test]
    fn large_known_values() {
        assert!(is_prime(4_294_967_291));
        assert!(!is_prime(4_294_967_297));
        assert!(is_prime(1_000_000_007));
        assert!(!is_prime(3_215_031_751));
    }

    #[test]
    fn windows() {
        assert_eq!(window(100, 110), vec![101, 103, 107, 109]);
        assert_eq!(primes_from(20, 3), vec![23, 29, 31]);
    }
}
