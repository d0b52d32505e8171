//! Ground-truth helpers shared by integration tests.
//!
//! Everything here is written for obviousness, not speed, and is kept
//! independent of the optimized library internals: the occurrence oracle
//! walks every candidate translation and compares cell by cell through the
//! public accessors, and the counting oracles use plain big-integer
//! combinatorics.

use num_bigint::BigUint;
use subshift::lattice::GridBox;
use subshift::patterns::Pattern;
use subshift::Rational;

/// Brute-force occurrence scan: every translation `g` with `A_1 + g` inside
/// the host support, compared cell by cell, optionally filtered by the
/// residue of the translated corner modulo `m`.
pub fn naive_occurrences(
    needle: &Pattern,
    host: &Pattern,
    class: Option<(&[i64], u64)>,
) -> Vec<Vec<i64>> {
    let d = needle.support().dim();
    assert_eq!(d, host.support().dim());
    assert_eq!(needle.alphabet(), host.alphabet());
    let mut out = Vec::new();
    // generous translation bounds derived from the two supports
    let lo: Vec<i64> = (0..d)
        .map(|i| host.support().corner()[i] - needle.support().corner()[i])
        .collect();
    let sides: Vec<u64> = (0..d)
        .map(|i| {
            let extra = host.support().sides()[i] as i64 - needle.support().sides()[i] as i64;
            if extra < 0 {
                0
            } else {
                extra as u64 + 1
            }
        })
        .collect();
    if sides.iter().any(|&s| s == 0) {
        return out;
    }
    let range = GridBox::new(lo, sides).unwrap();
    'outer: for g in range.iter_points() {
        if let Some((rep, m)) = class {
            for i in 0..d {
                let corner = needle.support().corner()[i] + g[i];
                if (corner - rep[i]).rem_euclid(m as i64) != 0 {
                    continue 'outer;
                }
            }
        }
        for p in needle.support().iter_points() {
            let q: Vec<i64> = p.iter().zip(&g).map(|(a, b)| a + b).collect();
            if !host.support().contains_point(&q) || host.get(&q) != needle.get(&p) {
                continue 'outer;
            }
        }
        out.push(g);
    }
    out
}

/// Binomial coefficient `C(n, k)` as a big integer.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut num = BigUint::from(1u32);
    let mut den = BigUint::from(1u32);
    for i in 0..k {
        num *= BigUint::from(n - i);
        den *= BigUint::from(i + 1);
    }
    num / den
}

/// Exact rational from big-integer numerator and denominator.
pub fn big_ratio(num: BigUint, den: BigUint) -> Rational {
    Rational::new(num.into(), den.into())
}

/// Small deterministic generator for test instances (SplitMix64).
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform value in `[0, bound)`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        // rejection sampling on the top bits keeps this unbiased
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    pub fn range_i64(&mut self, lo: i64, hi_inclusive: i64) -> i64 {
        lo + self.below((hi_inclusive - lo + 1) as u64) as i64
    }
}

/// Random pattern on the given support.
pub fn random_pattern(rng: &mut TestRng, support: GridBox, alphabet: u32) -> Pattern {
    let values: Vec<u16> = (0..support.cells())
        .map(|_| rng.below(u64::from(alphabet)) as u16)
        .collect();
    Pattern::new(support, alphabet, values).unwrap()
}
