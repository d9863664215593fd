use erwlab_core::lattice::LatticePoint;
use erwlab_core::oracles::{self, block_size};
use num::bigint::BigInt;
use num::{Integer, One, Signed, ToPrimitive, Zero};

// Evaluation A: fixed point at 10^60, ln by atanh series with binary
// reduction, fourth root by two integer square roots, exp by Taylor.
mod fixed {
    use super::*;

    pub fn scale() -> BigInt {
        BigInt::from(10u32).pow(60)
    }

    /// 2·atanh(1/q)·S for integer q > 1.
    fn atanh_inv(q: u64, s: &BigInt) -> BigInt {
        let q2 = BigInt::from(q * q);
        let mut power = s / BigInt::from(q);
        let mut sum = BigInt::zero();
        let mut k = 1u64;
        while !power.is_zero() {
            sum += &power / BigInt::from(k);
            power /= &q2;
            k += 2;
        }
        sum * 2
    }

    /// ln(x)·S for a fixed-point x in [1, 2).
    fn ln_unit(x: &BigInt, s: &BigInt) -> BigInt {
        // 2 atanh(t), t = (x − S)/(x + S)
        let t = (x - s) * s / (x + s);
        let t2 = &t * &t / s;
        let mut power = t.clone();
        let mut sum = BigInt::zero();
        let mut k = 1u64;
        while !power.is_zero() {
            sum += &power / BigInt::from(k);
            power = power * &t2 / s;
            k += 2;
        }
        sum * 2
    }

    pub fn ln(n: u64, s: &BigInt) -> BigInt {
        let e = 63 - n.leading_zeros() as u64;
        let ln2 = atanh_inv(3, s);
        let m = BigInt::from(n) * s / (BigInt::one() << e);
        ln2 * BigInt::from(e) + ln_unit(&m, s)
    }

    pub fn exp(y: &BigInt, s: &BigInt) -> BigInt {
        let mut term = s.clone();
        let mut sum = BigInt::zero();
        let mut k = 1u64;
        while !term.is_zero() {
            sum += &term;
            term = term * y / s / BigInt::from(k);
            k += 1;
        }
        sum
    }

    pub fn block_size(n: u64) -> (u64, BigInt) {
        let s = scale();
        let l = ln(n, &s);
        let root = (l * &s).sqrt();
        let root = (root * &s).sqrt();
        let e = exp(&root, &s);
        let (q, rem) = (BigInt::from(n) * &s).div_rem(&e);
        let k = if rem.is_zero() { q } else { q + 1 };
        (k.to_u64().unwrap(), rem)
    }
}

// Evaluation B: fixed point at 10^80, ln by Newton on exp, fourth root by
// Newton on z⁴, and k found as the least integer with k·e^y ≥ n.
mod newton {
    use super::*;

    pub fn scale() -> BigInt {
        BigInt::from(10u32).pow(80)
    }

    fn exp(y: &BigInt, s: &BigInt) -> BigInt {
        // e^y = (e^{y/2^h})^{2^h}
        let h = 12u32;
        let small = y >> h;
        let mut term = s.clone();
        let mut sum = BigInt::zero();
        let mut k = 1u64;
        while !term.is_zero() {
            sum += &term;
            term = term * &small / s / BigInt::from(k);
            k += 1;
        }
        for _ in 0..h {
            sum = &sum * &sum / s;
        }
        sum
    }

    fn ln(n: u64, s: &BigInt) -> BigInt {
        let target = BigInt::from(n) * s;
        let mut z = BigInt::from(((n as f64).ln() * 1e15) as u64) * s / BigInt::from(10u64.pow(15));
        for _ in 0..12 {
            // z ← z + n/e^z − 1
            let ez = exp(&z, s);
            z = z + &target * s / ez - s;
        }
        z
    }

    fn fourth_root(l: &BigInt, s: &BigInt) -> BigInt {
        let guess = (l.to_f64().unwrap() / s.to_f64().unwrap()).powf(0.25);
        let mut z = BigInt::from((guess * 1e15) as u64) * s / BigInt::from(10u64.pow(15));
        let s3 = s * s * s;
        for _ in 0..12 {
            let z3 = &z * &z * &z;
            // z ← (3z + l·S³/z³)/4
            z = (&z * 3 + l * &s3 / z3) / 4;
        }
        z
    }

    pub fn block_size(n: u64) -> u64 {
        let s = scale();
        let e = exp(&fourth_root(&ln(n, &s), &s), &s);
        let target = BigInt::from(n) * &s;
        let mut k = (n as f64 / e.to_f64().unwrap() * s.to_f64().unwrap()) as u64;
        k = k.max(1);
        while BigInt::from(k) * &e < target {
            k += 1;
        }
        while k > 1 && BigInt::from(k - 1) * &e >= target {
            k -= 1;
        }
        k
    }
}

fn sample_ns() -> Vec<u64> {
    let mut ns: Vec<u64> = (2..200).collect();
    ns.extend((3..=18).map(|e| 10u64.pow(e)));
    ns.extend((1..=62).map(|e| 1u64 << e).filter(|&n| n >= 2));
    let mut x = 0x9e3779b97f4a7c15u64;
    for _ in 0..300 {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        ns.push(2 + x % 1_000_000_000_000);
    }
    ns
}

#[test]
fn block_size_agrees_with_two_high_precision_evaluations() {
    for n in sample_ns() {
        let (a, rem) = fixed::block_size(n);
        let b = newton::block_size(n);
        assert_eq!(a, b, "evaluations disagree at n = {n}");
        assert_eq!(block_size(n).unwrap(), a, "n = {n}");
        // the quotient is never within rounding distance of an integer
        assert!(rem.is_zero() || rem.abs() > BigInt::from(10u32).pow(20), "n = {n}");
    }
    assert_eq!(block_size(2).unwrap(), 1);
    assert_eq!(fixed::block_size(1_000_000).0, 145_449);
}

#[test]
fn block_size_is_monotone_from_16() {
    let mut prev = block_size(16).unwrap();
    let mut n = 16u64;
    while n < 100_000_000_000 {
        n += 1 + n / 997;
        let k = block_size(n).unwrap();
        assert!(k >= prev, "k({n}) = {k} < {prev}");
        assert!(k >= 1 && k <= n);
        prev = k;
    }
}

const RADII: [f64; 4] = [8.0, 16.0, 32.0, 64.0];

fn p_exact(r: f64) -> f64 {
    oracles::exact_hit_probability(&LatticePoint::xy(r as i64, 0), r).unwrap()
}

#[test]
fn hit_probability_decreases_and_approaches_the_asymptote() {
    let ps: Vec<f64> = RADII.iter().map(|&r| p_exact(r)).collect();
    let ratio: Vec<f64> = RADII.iter().zip(&ps).map(|(r, p)| p * r.ln() / 2f64.ln()).collect();
    let resid: Vec<f64> = RADII.iter().zip(&ps).map(|(r, p)| (p - 2f64.ln() / r.ln()).abs()).collect();
    for i in 1..RADII.len() {
        assert!(ps[i] < ps[i - 1]);
        assert!((ratio[i] - 1.0).abs() < (ratio[i - 1] - 1.0).abs(), "{ratio:?}");
        assert!(resid[i] < resid[i - 1], "{resid:?}");
    }
    // the O(1) term of the kernel accounts for the gap: p ≈ log 2 / (log 2r + πκ/2)
    let kappa = oracles::potential_kernel_constant();
    for (r, p) in RADII.iter().zip(&ps) {
        let corrected = 2f64.ln() / ((2.0 * r).ln() + std::f64::consts::FRAC_PI_2 * kappa);
        assert!((p / corrected - 1.0).abs() < 0.03, "r = {r}: {p} vs {corrected}");
    }
}

#[test]
fn hit_probability_ratio_band() {
    for r in RADII {
        let ratio = p_exact(r) * r.ln() / 2f64.ln();
        println!("r = {r}: p·log r/log 2 = {ratio:.4}");
        assert!((0.7..=1.3).contains(&ratio), "r = {r}: p·log r/log 2 = {ratio} outside [0.7, 1.3]");
    }
}
