//! Integer arithmetic modulo `m`: inverses, primitive roots, discrete log
//! tables, CRT splitting and the usual multiplicative functions.
//!
//! Everything here is desk-scale. Factorization goes through a cached
//! smallest-prime-factor sieve up to [`SIEVE_LIMIT`] and falls back to trial
//! division by sieved primes beyond it.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIEVE_LIMIT: usize = 1_000_000;

/// Smallest-prime-factor sieve.
#[derive(Debug, Clone)]
pub struct PrimeSieve {
    spf: Vec<u32>,
    primes: Vec<u32>,
}

impl PrimeSieve {
    pub fn new(limit: usize) -> Self {
        let limit = limit.max(2);
        let mut spf = vec![0u32; limit + 1];
        let mut primes = Vec::new();
        for i in 2..=limit {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                let j = i * p as usize;
                if p > si || j > limit {
                    break;
                }
                spf[j] = p;
            }
        }
        Self { spf, primes }
    }

    pub fn limit(&self) -> usize {
        self.spf.len() - 1
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// Smallest prime factor of `n` for `2 <= n <= limit`.
    pub fn spf(&self, n: usize) -> usize {
        self.spf[n] as usize
    }

    pub fn is_prime(&self, n: u64) -> bool {
        if (n as usize) <= self.limit() {
            n >= 2 && self.spf[n as usize] as u64 == n
        } else {
            matches!(self.factorize(n).as_slice(), [(_, 1)])
        }
    }

    /// Prime factorization as `(prime, exponent)` pairs in increasing order.
    pub fn factorize(&self, mut n: u64) -> Vec<(u64, u32)> {
        let mut out: Vec<(u64, u32)> = Vec::new();
        let push = |out: &mut Vec<(u64, u32)>, p: u64| match out.last_mut() {
            Some((last, e)) if *last == p => *e += 1,
            _ => out.push((p, 1)),
        };
        if n <= 1 {
            return out;
        }
        if (n as usize) > self.limit() {
            for &p in &self.primes {
                let p = p as u64;
                if p * p > n {
                    break;
                }
                while n % p == 0 {
                    n /= p;
                    push(&mut out, p);
                }
                if (n as usize) <= self.limit() {
                    break;
                }
            }
            if (n as usize) > self.limit() {
                // every prime up to the sieve limit has been removed
                assert!(
                    (self.limit() as u64).saturating_mul(self.limit() as u64) >= n,
                    "{n} exceeds the factorization range of the sieve"
                );
                out.push((n, 1));
                return out;
            }
        }
        let mut m = n as usize;
        while m > 1 {
            let p = self.spf[m] as usize;
            m /= p;
            push(&mut out, p as u64);
        }
        out
    }
}

/// The process-wide sieve up to [`SIEVE_LIMIT`].
pub fn sieve() -> &'static PrimeSieve {
    static SIEVE: OnceLock<PrimeSieve> = OnceLock::new();
    SIEVE.get_or_init(|| PrimeSieve::new(SIEVE_LIMIT))
}

pub fn factorize(n: u64) -> Vec<(u64, u32)> {
    sieve().factorize(n)
}

pub fn is_prime(n: u64) -> bool {
    sieve().is_prime(n)
}

/// Primes in `[lo, hi)`.
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    (lo.max(2)..hi).filter(|&n| is_prime(n)).collect()
}

/// A positive modulus together with its factorization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modulus {
    value: u64,
    factorization: Vec<(u64, u32)>,
    is_prime: bool,
}

impl Modulus {
    pub fn new(value: u64) -> Result<Self> {
        if value == 0 {
            return Err(Error::InvalidModulus("modulus must be >= 1".into()));
        }
        let factorization = factorize(value);
        let is_prime = factorization.len() == 1 && factorization[0].1 == 1;
        Ok(Self {
            value,
            factorization,
            is_prime,
        })
    }

    /// A modulus that must be prime.
    pub fn prime(value: u64) -> Result<Self> {
        let m = Self::new(value)?;
        if !m.is_prime {
            return Err(Error::InvalidModulus(format!("{value} is not prime")));
        }
        Ok(m)
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn factorization(&self) -> &[(u64, u32)] {
        &self.factorization
    }

    pub fn is_prime(&self) -> bool {
        self.is_prime
    }

    /// Reduce a signed integer to its least non-negative residue.
    pub fn reduce(&self, x: i64) -> u64 {
        x.rem_euclid(self.value as i64) as u64
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

/// Returns `(g, s, t)` with `a*s + b*t = g = gcd(a, b)`.
pub fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i64, 0i64);
    let (mut old_t, mut t) = (0i64, 1i64);
    while r != 0 {
        let qt = old_r / r;
        (old_r, r) = (r, old_r - qt * r);
        (old_s, s) = (s, old_s - qt * s);
        (old_t, t) = (t, old_t - qt * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Inverse of `x` modulo `m`, or `None` when `gcd(x, m) > 1`.
pub fn inverse_mod(x: i64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let xm = x.rem_euclid(m as i64);
    let (g, s, _) = ext_gcd(xm, m as i64);
    (g == 1).then(|| s.rem_euclid(m as i64) as u64)
}

pub fn mod_inverse(x: i64, m: &Modulus) -> Result<u64> {
    inverse_mod(x, m.value()).ok_or(Error::NotInvertible {
        x,
        modulus: m.value(),
    })
}

pub fn pow_mod(base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let m128 = m as u128;
    let mut b = (base % m) as u128;
    let mut acc = 1u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m128;
        }
        b = b * b % m128;
        exp >>= 1;
    }
    acc as u64
}

/// Smallest generator of `(Z/qZ)^x` for prime `q`.
pub fn primitive_root(q: &Modulus) -> Result<u64> {
    if !q.is_prime() {
        return Err(Error::InvalidModulus(format!(
            "primitive roots are only computed for prime moduli, got {}",
            q.value()
        )));
    }
    let qv = q.value();
    if qv == 2 {
        return Ok(1);
    }
    let order_primes: Vec<u64> = factorize(qv - 1).into_iter().map(|(p, _)| p).collect();
    (2..qv)
        .find(|&g| order_primes.iter().all(|&p| pow_mod(g, (qv - 1) / p, qv) != 1))
        .ok_or_else(|| Error::InvalidModulus(format!("no primitive root modulo {qv}")))
}

/// Full discrete-log table for a prime modulus.
#[derive(Debug, Clone)]
pub struct DlogTable {
    modulus: Modulus,
    generator: u64,
    log: Vec<u32>,
    exp: Vec<u32>,
}

impl DlogTable {
    pub fn new(q: &Modulus) -> Result<Self> {
        let generator = primitive_root(q)?;
        let qv = q.value() as usize;
        let mut log = vec![u32::MAX; qv];
        let mut exp = Vec::with_capacity(qv - 1);
        let mut x = 1u64;
        for k in 0..qv - 1 {
            log[x as usize] = k as u32;
            exp.push(x as u32);
            x = x * generator % q.value();
        }
        Ok(Self {
            modulus: q.clone(),
            generator,
            log,
            exp,
        })
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn generator(&self) -> u64 {
        self.generator
    }

    /// Order of the unit group, `q - 1`.
    pub fn group_order(&self) -> usize {
        self.exp.len()
    }

    /// Exponent `k` with `g^k = x`, or `None` for `x = 0 mod q`.
    pub fn log(&self, x: u64) -> Option<u32> {
        let r = (x % self.modulus.value()) as usize;
        (r != 0).then(|| self.log[r])
    }

    /// `g^k mod q`.
    pub fn exp(&self, k: u64) -> u64 {
        self.exp[(k % self.exp.len() as u64) as usize] as u64
    }
}

pub fn mobius(n: u64) -> i32 {
    assert!(n >= 1, "mobius is defined for n >= 1");
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn euler_phi(n: u64) -> u64 {
    factorize(n)
        .into_iter()
        .fold(n, |acc, (p, _)| acc / p * (p - 1))
}

/// Number of distinct prime factors.
pub fn omega(n: u64) -> u32 {
    factorize(n).len() as u32
}

/// Divisors of `n` in increasing order.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut divs = vec![1u64];
    for (p, e) in factorize(n) {
        let len = divs.len();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                divs.push(divs[i] * pk);
            }
        }
    }
    divs.sort_unstable();
    divs
}

/// Residue of `x` modulo each prime-power factor of `m`, as `(residue, prime_power)`.
pub fn crt_split(x: i64, m: &Modulus) -> Vec<(u64, u64)> {
    m.factorization()
        .iter()
        .map(|&(p, e)| {
            let pe = p.pow(e);
            (x.rem_euclid(pe as i64) as u64, pe)
        })
        .collect()
}

/// Recombine residues modulo pairwise coprime moduli.
pub fn crt_combine(parts: &[(u64, u64)]) -> Option<(u64, u64)> {
    parts.iter().try_fold((0u64, 1u64), |(x, m), &(r, n)| {
        let inv = inverse_mod(m as i64, n)?;
        let mn = m.checked_mul(n)?;
        // x + m * ((r - x) * m^{-1} mod n)
        let diff = (r as i128 - x as i128).rem_euclid(n as i128) as u128;
        let t = diff * inv as u128 % n as u128;
        Some(((x as u128 + m as u128 * t) as u64 % mn, mn))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_examples() {
        assert_eq!(mod_inverse(1, &Modulus::new(7).unwrap()).unwrap(), 1);
        // exhaustive search oracle
        let five = Modulus::new(5).unwrap();
        let brute = (0..5).find(|y| (2 * y) % 5 == 1).unwrap();
        assert_eq!(brute, 3);
        assert_eq!(mod_inverse(2, &five).unwrap(), brute);
        assert!(matches!(
            mod_inverse(3, &Modulus::new(6).unwrap()),
            Err(Error::NotInvertible { x: 3, modulus: 6 })
        ));
        assert_eq!(mod_inverse(-1, &five).unwrap(), 4);
    }

    #[test]
    fn inverses_exhaustive_small_primes() {
        for &q in sieve().primes().iter().take_while(|&&p| p <= 1000) {
            let q = q as u64;
            let m = Modulus::new(q).unwrap();
            for x in 1..q {
                let y = mod_inverse(x as i64, &m).unwrap();
                assert_eq!(x * y % q, 1, "q = {q}, x = {x}");
            }
        }
    }

    fn order(g: u64, q: u64) -> u64 {
        let mut x = g % q;
        let mut k = 1;
        while x != 1 {
            x = x * g % q;
            k += 1;
        }
        k
    }

    #[test]
    fn primitive_root_examples() {
        assert_eq!(primitive_root(&Modulus::new(2).unwrap()).unwrap(), 1);
        // order-check oracle over all candidates
        for (q, want) in [(7u64, 3u64), (5, 2)] {
            let brute = (1..q).find(|&g| order(g, q) == q - 1).unwrap();
            assert_eq!(brute, want);
            assert_eq!(primitive_root(&Modulus::new(q).unwrap()).unwrap(), want);
        }
        assert!(primitive_root(&Modulus::new(9).unwrap()).is_err());
    }

    #[test]
    fn dlog_round_trip_exhaustive() {
        for &q in sieve().primes().iter().take_while(|&&p| p <= 1000) {
            let m = Modulus::new(q as u64).unwrap();
            let t = DlogTable::new(&m).unwrap();
            let mut seen = vec![false; t.group_order()];
            for x in 1..q as u64 {
                let k = t.log(x).unwrap();
                assert_eq!(pow_mod(t.generator(), k as u64, q as u64), x);
                assert!(!seen[k as usize]);
                seen[k as usize] = true;
            }
            assert_eq!(t.log(0), None);
        }
    }

    #[test]
    fn mobius_examples_and_summatory() {
        assert_eq!(mobius(1), 1);
        assert_eq!(mobius(6), 1);
        assert_eq!(mobius(12), 0);
        assert_eq!(mobius(30), -1);
        for n in 1..=10_000u64 {
            let s: i32 = divisors(n).into_iter().map(mobius).sum();
            assert_eq!(s, (n == 1) as i32, "n = {n}");
        }
    }

    #[test]
    fn crt_examples() {
        assert_eq!(crt_split(5, &Modulus::new(6).unwrap()), vec![(1, 2), (2, 3)]);
        assert_eq!(crt_split(0, &Modulus::new(12).unwrap()), vec![(0, 4), (0, 3)]);
        assert_eq!(crt_split(7, &Modulus::new(15).unwrap()), vec![(1, 3), (2, 5)]);
        for m in 1..200u64 {
            let md = Modulus::new(m).unwrap();
            for x in 0..m {
                let parts = crt_split(x as i64, &md);
                assert_eq!(crt_combine(&parts), Some((x, m)));
            }
        }
    }

    #[test]
    fn factorization_beyond_sieve() {
        let n = 999_983u64 * 1_000_003;
        assert_eq!(factorize(n), vec![(999_983, 1), (1_000_003, 1)]);
        assert_eq!(factorize(1 << 40), vec![(2, 40)]);
        assert!(is_prime(1_000_003));
        assert_eq!(euler_phi(36), 12);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(omega(360), 3);
    }

    #[test]
    fn modulus_invariants() {
        assert!(Modulus::new(0).is_err());
        let m = Modulus::new(360).unwrap();
        let prod: u64 = m.factorization().iter().map(|&(p, e)| p.pow(e)).product();
        assert_eq!(prod, 360);
        assert!(!m.is_prime());
        assert!(Modulus::prime(101).unwrap().is_prime());
        assert!(Modulus::prime(100).is_err());
        assert_eq!(m.reduce(-1), 359);
    }
}
