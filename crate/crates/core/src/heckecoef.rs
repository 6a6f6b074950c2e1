//! Hecke eigenvalues of the discriminant form `Delta` and the coefficients
//! `lambda(m, n)` of its symmetric-square lift to GL(3).
//!
//! Ramanujan's `tau(n)` is expanded exactly from `Delta = q prod (1 - q^n)^24`:
//! the pentagonal series is raised to the 24th power by the power-series
//! recurrence `n g_n = sum_k (25k - n) a_k g_{n-k}`, run modulo three primes
//! near `10^12` and recombined by CRT into `i128`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::modarith::{factorize, inverse_mod, is_prime, mobius, sieve, SIEVE_LIMIT};

/// Largest table size for which `|tau(n)|` provably fits the CRT range.
pub const TAU_LIMIT: usize = SIEVE_LIMIT;

/// Relative tolerance for the coefficient identities.
pub const HECKE_TOL: f64 = 1e-9;

/// Exponent in the Kim-Sarnak bound `|lambda(1,p)| <= 3 p^{5/14}`.
pub const THETA_3: f64 = 5.0 / 14.0;

/// Environment variable naming the directory of the `tau` cache file.
pub const CACHE_DIR_ENV: &str = "TRACESUM_CACHE_DIR";

const CACHE_MAGIC: [u8; 4] = *b"TAU\0";
const CACHE_VERSION: u32 = 1;
const CACHE_FILE: &str = "tau.bin";

/// Primes just below `10^12`; their product exceeds `2 * max |tau(n)|` for
/// `n <= TAU_LIMIT` (Deligne: `|tau(n)| <= d(n) n^{11/2} < 2^118`).
const CRT_PRIMES: [u64; 3] = [999_999_999_989, 999_999_999_961, 999_999_999_959];

/// `(k, a_k)` for the nonzero coefficients of `prod (1 - x^n)` with `0 < k <= n`.
fn pentagonal_terms(n: usize) -> Vec<(usize, bool)> {
    let mut out = Vec::new();
    for j in 1.. {
        let first = j * (3 * j - 1) / 2;
        if first > n {
            break;
        }
        let negative = j % 2 == 1;
        out.push((first, negative));
        let second = j * (3 * j + 1) / 2;
        if second <= n {
            out.push((second, negative));
        }
    }
    out.sort_unstable();
    out
}

/// Coefficients `g_0..g_len` of `prod (1 - x^n)^24` modulo `p`.
fn eta24_mod(len: usize, p: u64, terms: &[(usize, bool)]) -> Vec<u64> {
    const ALPHA_PLUS_ONE: u128 = 25;
    let p128 = p as u128;
    let mut g = vec![0u64; len + 1];
    g[0] = 1;
    for n in 1..=len {
        let (mut a_pos, mut a_neg, mut b_pos, mut b_neg) = (0u128, 0u128, 0u128, 0u128);
        for &(k, negative) in terms {
            if k > n {
                break;
            }
            let v = g[n - k] as u128;
            if negative {
                a_neg += k as u128 * v;
                b_neg += v;
            } else {
                a_pos += k as u128 * v;
                b_pos += v;
            }
        }
        let a = (a_pos + (p128 - a_neg % p128)) % p128;
        let b = (b_pos + (p128 - b_neg % p128)) % p128;
        let num = (ALPHA_PLUS_ONE * a + (p128 - (n as u128 * b) % p128)) % p128;
        let inv_n = inverse_mod(n as i64, p).expect("n is below the CRT primes") as u128;
        g[n] = (num * inv_n % p128) as u64;
    }
    g
}

/// Symmetric representative of the residues modulo `prod CRT_PRIMES`.
fn crt_symmetric(residues: [u64; 3]) -> i128 {
    let [p0, p1, p2] = CRT_PRIMES.map(|p| p as u128);
    let [r0, r1, r2] = residues.map(|r| r as u128);
    // Garner: x = c0 + c1 p0 + c2 p0 p1
    let c0 = r0;
    let inv01 = inverse_mod(p0 as i64, p1 as u64).unwrap() as u128;
    let c1 = (r1 + p1 - c0 % p1) % p1 * inv01 % p1;
    let inv012 = inverse_mod((p0 * p1 % p2) as i64, p2 as u64).unwrap() as u128;
    let partial = (c0 + c1 * p0) % p2;
    let c2 = (r2 + p2 - partial) % p2 * inv012 % p2;
    let modulus = p0 * p1 * p2;
    let x = c0 + c1 * p0 + c2 * p0 * p1;
    if x > modulus / 2 {
        -((modulus - x) as i128)
    } else {
        x as i128
    }
}

/// `tau(1..=n)`, with index 0 holding 0.
pub fn tau_table(n: usize) -> Result<Vec<i128>> {
    if n == 0 {
        return Err(Error::OutOfRange("tau table needs N >= 1".into()));
    }
    if n > TAU_LIMIT {
        return Err(Error::Overflow(format!(
            "tau(n) for n up to {n}; the 128-bit CRT range covers n <= {TAU_LIMIT}"
        )));
    }
    let terms = pentagonal_terms(n);
    let residues: Vec<Vec<u64>> = CRT_PRIMES
        .par_iter()
        .map(|&p| eta24_mod(n - 1, p, &terms))
        .collect();
    let mut tau = vec![0i128; n + 1];
    for (k, t) in tau.iter_mut().enumerate().skip(1) {
        *t = crt_symmetric([residues[0][k - 1], residues[1][k - 1], residues[2][k - 1]]);
    }
    Ok(tau)
}

fn cache_path(dir: &Path) -> PathBuf {
    dir.join(CACHE_FILE)
}

/// Reads `tau(1..=n)` from a cache file holding at least `n` entries.
pub fn read_tau_cache(path: &Path, n: usize) -> Result<Option<Vec<i128>>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut r = BufReader::new(file);
    let mut header = [0u8; 16];
    if r.read_exact(&mut header).is_err() {
        return Ok(None);
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    let stored = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    if header[..4] != CACHE_MAGIC || version != CACHE_VERSION || stored < n {
        return Ok(None);
    }
    let mut tau = vec![0i128; n + 1];
    let mut buf = [0u8; 16];
    for t in tau.iter_mut().skip(1) {
        if r.read_exact(&mut buf).is_err() {
            return Ok(None);
        }
        *t = i128::from_le_bytes(buf);
    }
    Ok(Some(tau))
}

/// Writes `tau(1..)` (index 0 ignored) as a little-endian cache file.
pub fn write_tau_cache(path: &Path, tau: &[i128]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&((tau.len() - 1) as u64).to_le_bytes())?;
    for t in &tau[1..] {
        w.write_all(&t.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// `tau(1..=n)`, going through the cache file in `dir` when one is given.
pub fn tau_table_cached(n: usize, dir: Option<&Path>) -> Result<Vec<i128>> {
    let Some(dir) = dir else {
        return tau_table(n);
    };
    let path = cache_path(dir);
    if let Some(tau) = read_tau_cache(&path, n)? {
        return Ok(tau);
    }
    let tau = tau_table(n)?;
    std::fs::create_dir_all(dir)?;
    write_tau_cache(&path, &tau)?;
    Ok(tau)
}

/// `lambda(p^k)` from `lambda(p)` by the Hecke recursion
/// `lambda(p^{k+1}) = lambda(p) lambda(p^k) - lambda(p^{k-1})`.
pub fn hecke_prime_power(lambda_p: f64, k: u32) -> f64 {
    let (mut prev, mut cur) = (1.0, lambda_p);
    if k == 0 {
        return 1.0;
    }
    for _ in 1..k {
        (prev, cur) = (cur, lambda_p * cur - prev);
    }
    cur
}

/// Complete homogeneous symmetric polynomials `h_0..=h_max` of `{x, 1, 1/x}`.
fn complete_homogeneous(x: Complex64, max: usize) -> Vec<Complex64> {
    let xi = x.inv();
    (0..=max)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..=k {
                for l in 0..=k - i {
                    acc += x.powu(i as u32) * xi.powu(l as u32);
                }
            }
            acc
        })
        .collect()
}

/// Schur polynomial `s_{(l1, l2, l3)}(x, 1, 1/x)` by the Jacobi-Trudi determinant.
pub fn schur3(partition: [u32; 3], x: Complex64) -> Complex64 {
    let max = partition[0] as usize + 2;
    let h = complete_homogeneous(x, max);
    let at = |k: i64| -> Complex64 {
        if k < 0 {
            Complex64::new(0.0, 0.0)
        } else {
            h[k as usize]
        }
    };
    let m: Vec<Vec<Complex64>> = (0..3)
        .map(|i| (0..3).map(|j| at(partition[i] as i64 - i as i64 + j as i64)).collect())
        .collect();
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// GL(2) and symmetric-square GL(3) coefficients attached to `Delta`.
#[derive(Debug, Clone)]
pub struct HeckeSystem {
    limit: usize,
    tau: Vec<i128>,
    lambda: Vec<f64>,
    lambda_1n: Vec<f64>,
}

impl HeckeSystem {
    /// Tables up to `limit`, using the cache directory named by
    /// `TRACESUM_CACHE_DIR` when it is set.
    pub fn new(limit: usize) -> Result<Self> {
        let dir = std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from);
        Self::from_tau(tau_table_cached(limit, dir.as_deref())?)
    }

    /// Builds the system from `tau(0..=N)` (index 0 ignored).
    pub fn from_tau(tau: Vec<i128>) -> Result<Self> {
        let limit = tau.len().saturating_sub(1);
        if limit == 0 || tau[1] != 1 {
            return Err(Error::InvalidSpec("tau table must start with tau(1) = 1".into()));
        }
        let lambda: Vec<f64> = tau
            .iter()
            .enumerate()
            .map(|(n, &t)| if n == 0 { 0.0 } else { t as f64 / (n as f64).powf(5.5) })
            .collect();
        let mut sys = Self {
            limit,
            tau,
            lambda,
            lambda_1n: Vec::new(),
        };
        sys.lambda_1n = sys.multiplicative_table(limit, |p, e, s| s.gl3_one_prime_power(p, e))?;
        Ok(sys)
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn tau(&self, n: usize) -> Result<i128> {
        self.check(n)?;
        Ok(self.tau[n])
    }

    pub fn tau_slice(&self) -> &[i128] {
        &self.tau
    }

    fn check(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.limit {
            Err(Error::OutOfRange(format!("index {n} outside the table 1..={}", self.limit)))
        } else {
            Ok(())
        }
    }

    /// `lambda(n) = tau(n) / n^{11/2}`.
    pub fn lambda(&self, n: usize) -> Result<f64> {
        self.check(n)?;
        Ok(self.lambda[n])
    }

    fn lambda_prime(&self, p: u64) -> Result<f64> {
        self.check(p as usize)
            .map_err(|_| Error::OutOfRange(format!("tau({p}) is beyond the table limit {}", self.limit)))?;
        Ok(self.lambda[p as usize])
    }

    /// `lambda(p^k)` from the Hecke recursion; `p` must be in the table.
    pub fn lambda_prime_power(&self, p: u64, k: u32) -> Result<f64> {
        Ok(hecke_prime_power(self.lambda_prime(p)?, k))
    }

    /// `lambda(n)` for any `n` whose prime factors lie in the table.
    pub fn lambda_any(&self, n: u64) -> Result<f64> {
        if n as usize <= self.limit && n > 0 {
            return Ok(self.lambda[n as usize]);
        }
        factorize(n)
            .into_iter()
            .try_fold(1.0, |acc, (p, e)| Ok(acc * self.lambda_prime_power(p, e)?))
    }

    /// Satake parameter `alpha_p` with `alpha_p + conj(alpha_p) = lambda(p)`, `|alpha_p| = 1`.
    pub fn satake(&self, p: u64) -> Result<Complex64> {
        if !is_prime(p) {
            return Err(Error::InvalidSpec(format!("{p} is not prime")));
        }
        let half = self.lambda_prime(p)? / 2.0;
        Ok(Complex64::new(half, (1.0 - half * half).max(0.0).sqrt()))
    }

    /// `lambda(1, p^e) = sum_{2i <= e} lambda(p^{2e - 4i})`.
    fn gl3_one_prime_power(&self, p: u64, e: u32) -> Result<f64> {
        let lp = self.lambda_prime(p)?;
        Ok((0..=e / 2).map(|i| hecke_prime_power(lp, 2 * e - 4 * i)).sum())
    }

    /// Table `f(1..=n)` of a multiplicative function given on prime powers.
    fn multiplicative_table(
        &self,
        n: usize,
        prime_power: impl Fn(u64, u32, &Self) -> Result<f64>,
    ) -> Result<Vec<f64>> {
        if n > SIEVE_LIMIT {
            return Err(Error::OutOfRange(format!("{n} exceeds the sieve limit {SIEVE_LIMIT}")));
        }
        let s = sieve();
        let mut out = vec![0.0; n + 1];
        if n >= 1 {
            out[1] = 1.0;
        }
        for m in 2..=n {
            let p = s.spf(m);
            let mut rest = m;
            let mut e = 0;
            while rest % p == 0 {
                rest /= p;
                e += 1;
            }
            out[m] = out[rest] * prime_power(p as u64, e, self)?;
        }
        Ok(out)
    }

    /// `lambda(1, n)` for `n <= limit`, from the table.
    pub fn lambda_1n(&self, n: usize) -> Result<f64> {
        self.check(n)?;
        Ok(self.lambda_1n[n])
    }

    pub fn lambda_1n_slice(&self) -> &[f64] {
        &self.lambda_1n
    }

    /// `lambda(n^2)` for `n = 0..=len` (index 0 is 0).
    pub fn square_arg_table(&self, len: usize) -> Result<Vec<f64>> {
        let mut t = self.multiplicative_table(len, |p, e, s| s.lambda_prime_power(p, 2 * e))?;
        if let Some(first) = t.first_mut() {
            *first = 0.0;
        }
        Ok(t)
    }

    /// `lambda(n)^2` for `n = 0..=len`.
    pub fn squared_table(&self, len: usize) -> Result<Vec<f64>> {
        if len > self.limit {
            return Err(Error::OutOfRange(format!("{len} exceeds the table limit {}", self.limit)));
        }
        Ok(self.lambda[..=len].iter().map(|l| l * l).collect())
    }

    /// `lambda(m, n)` of the symmetric-square lift: at each prime the Schur
    /// polynomial `s_{(a+b, b, 0)}(alpha^2, 1, alpha^{-2})` with `a = v_p(m)`,
    /// `b = v_p(n)`, multiplied over primes.
    pub fn gl3_coefficient(&self, m: u64, n: u64) -> Result<f64> {
        if m == 0 || n == 0 {
            return Err(Error::OutOfRange("lambda(m, n) needs m, n >= 1".into()));
        }
        let fm = factorize(m);
        let fn_ = factorize(n);
        let mut primes: Vec<u64> = fm.iter().chain(&fn_).map(|&(p, _)| p).collect();
        primes.sort_unstable();
        primes.dedup();
        let exp = |f: &[(u64, u32)], p: u64| f.iter().find(|&&(q, _)| q == p).map_or(0, |&(_, e)| e);
        let mut acc = 1.0;
        for p in primes {
            let (a, b) = (exp(&fm, p), exp(&fn_, p));
            let alpha = self.satake(p)?;
            acc *= schur3([a + b, b, 0], alpha * alpha).re;
        }
        Ok(acc)
    }

    /// Checks the coefficient identities for every `n <= up_to`:
    /// (a) `lambda(n)^2 = sum_{ab=n} lambda(a^2)`,
    /// (b) `lambda(1,n) = sum_{d^2 | n} lambda((n/d^2)^2)`,
    /// (c) `lambda(n^2) = sum_{d^2 | n} mu(d) lambda(1, n/d^2)`,
    /// (d) `|lambda(1,p)| <= 3 p^{5/14}` at primes.
    pub fn verify_identities(&self, up_to: usize) -> Result<IdentityReport> {
        if up_to == 0 || up_to > self.limit {
            return Err(Error::OutOfRange(format!("identity range 1..={up_to} vs table limit {}", self.limit)));
        }
        let square = |a: u64| -> Result<f64> {
            let a2 = a * a;
            if a2 as usize <= self.limit {
                Ok(self.lambda[a2 as usize])
            } else {
                self.lambda_any(a2)
            }
        };
        let mut report = IdentityReport {
            checked: up_to,
            ..IdentityReport::default()
        };
        let check = |name: &str, n: usize, lhs: f64, rhs: f64, scale: f64, slot: &mut f64| -> Result<()> {
            let defect = (lhs - rhs).abs();
            let tol = HECKE_TOL * scale.max(f64::MIN_POSITIVE);
            let rel = defect / scale.max(f64::MIN_POSITIVE);
            *slot = slot.max(rel);
            if defect > tol {
                return Err(Error::identity(name, format!("n = {n}"), defect, tol));
            }
            Ok(())
        };
        for n in 1..=up_to {
            let nu = n as u64;
            let ln = self.lambda[n];
            let divisors = crate::modarith::divisors(nu);
            let terms: Vec<f64> = divisors.iter().map(|&a| square(a)).collect::<Result<_>>()?;
            let (sum, abs): (f64, f64) = terms.iter().fold((0.0, 0.0), |(s, a), t| (s + t, a + t.abs()));
            check("lambda(n)^2 = sum_{ab=n} lambda(a^2)", n, ln * ln, sum, abs.max(ln * ln), &mut report.max_rel_a)?;

            let square_divs: Vec<u64> = divisors.iter().copied().filter(|&d| nu % (d * d) == 0).collect();
            let schur = self.gl3_coefficient(1, nu)?;
            let terms: Vec<f64> = square_divs.iter().map(|&d| square(nu / (d * d))).collect::<Result<_>>()?;
            let (sum, abs): (f64, f64) = terms.iter().fold((0.0, 0.0), |(s, a), t| (s + t, a + t.abs()));
            check("lambda(1,n) = sum lambda((n/d^2)^2)", n, schur, sum, abs.max(schur.abs()), &mut report.max_rel_b)?;
            check("lambda(1,n) table vs Schur", n, self.lambda_1n[n], schur, abs.max(schur.abs()), &mut report.max_rel_b)?;

            let lhs = square(nu)?;
            let (sum, abs) = square_divs.iter().fold((0.0, 0.0), |(s, a), &d| {
                let t = mobius(d) as f64 * self.lambda_1n[n / (d * d) as usize];
                (s + t, a + t.abs())
            });
            check("lambda(n^2) = sum mu(d) lambda(1, n/d^2)", n, lhs, sum, f64::max(abs, lhs.abs()), &mut report.max_rel_c)?;

            if is_prime(nu) {
                let ratio = self.lambda_1n[n].abs() / (3.0 * (n as f64).powf(THETA_3));
                report.max_kim_sarnak_ratio = report.max_kim_sarnak_ratio.max(ratio);
                if ratio > 1.0 {
                    return Err(Error::identity("|lambda(1,p)| <= 3 p^{5/14}", format!("p = {n}"), ratio - 1.0, 0.0));
                }
            }
        }
        Ok(report)
    }

    /// `(sum_{n <= X} |lambda(1,n)|^2 / X, sum_{m^2 n <= X} m |lambda(m,n)|^2 / X)`.
    pub fn rankin_selberg_ratios(&self, x: usize) -> Result<(f64, f64)> {
        if x == 0 || x > self.limit {
            return Err(Error::OutOfRange(format!("X = {x} vs table limit {}", self.limit)));
        }
        let first: f64 = self.lambda_1n[1..=x].iter().map(|l| l * l).sum();
        let ms: Vec<u64> = (1..).take_while(|m| m * m <= x as u64).collect();
        let second: f64 = ms
            .par_iter()
            .map(|&m| -> Result<f64> {
                let mut acc = 0.0;
                for n in 1..=(x as u64 / (m * m)) {
                    let l = if m == 1 { self.lambda_1n[n as usize] } else { self.gl3_coefficient(m, n)? };
                    acc += m as f64 * l * l;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum();
        Ok((first / x as f64, second / x as f64))
    }
}

/// Largest relative defect seen for each identity of
/// [`HeckeSystem::verify_identities`].
#[derive(Debug, Clone, Default, Serialize)]
pub struct IdentityReport {
    pub checked: usize,
    pub max_rel_a: f64,
    pub max_rel_b: f64,
    pub max_rel_c: f64,
    pub max_kim_sarnak_ratio: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(n: usize) -> HeckeSystem {
        HeckeSystem::from_tau(tau_table(n).unwrap()).unwrap()
    }

    /// `tau` by multiplying out `x prod_{n} (1 - x^n)^24` term by term.
    fn tau_by_product(len: usize) -> Vec<i128> {
        let mut series = vec![0i128; len];
        series[0] = 1;
        for n in 1..len {
            for _ in 0..24 {
                for k in (n..len).rev() {
                    series[k] -= series[k - n];
                }
            }
        }
        let mut tau = vec![0i128; len + 1];
        tau[1..].copy_from_slice(&series);
        tau
    }

    fn sigma11_mod(n: u64, m: u64) -> i128 {
        crate::modarith::divisors(n)
            .into_iter()
            .map(|d| crate::modarith::pow_mod(d, 11, m) as i128)
            .sum()
    }

    #[test]
    fn crt_range_covers_deligne_bound() {
        assert!(CRT_PRIMES.iter().all(|&p| is_prime(p)));
        let log2_range: f64 = CRT_PRIMES.iter().map(|&p| (p as f64).log2()).sum();
        // d(n) <= 240 for n <= 10^6
        let log2_bound = 240f64.log2() + 5.5 * (TAU_LIMIT as f64).log2();
        assert!(log2_bound + 1.0 < log2_range);
        assert_eq!(crt_symmetric([5, 5, 5]), 5);
        assert_eq!(crt_symmetric(CRT_PRIMES.map(|p| p - 7)), -7);
    }

    #[test]
    fn tau_known_values() {
        let tau = tau_table(10).unwrap();
        assert_eq!(&tau[1..=5], &[1, -24, 252, -1472, 4830]);
        assert_eq!(tau[10], -115_920);
        assert!(matches!(tau_table(TAU_LIMIT + 1), Err(Error::Overflow(_))));
    }

    #[test]
    fn tau_matches_direct_product() {
        let n = 300;
        assert_eq!(tau_table(n).unwrap(), tau_by_product(n));
    }

    #[test]
    fn tau_congruence_and_multiplicativity() {
        let n = 20_000;
        let tau = tau_table(n).unwrap();
        for k in 1..=n {
            assert_eq!((tau[k] - sigma11_mod(k as u64, 691)).rem_euclid(691), 0, "n = {k}");
        }
        for m in 1..150usize {
            for k in 1..150usize {
                if crate::modarith::gcd(m as u64, k as u64) == 1 && m * k <= n {
                    assert_eq!(tau[m * k], tau[m] * tau[k]);
                }
            }
        }
        for p in [2usize, 3, 5, 7, 11] {
            // tau(p^2) = tau(p)^2 - p^11
            assert_eq!(tau[p * p], tau[p] * tau[p] - (p as i128).pow(11));
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let fresh = tau_table_cached(500, Some(dir.path())).unwrap();
        let bytes = std::fs::read(dir.path().join(CACHE_FILE)).unwrap();
        assert_eq!(bytes.len(), 16 + 16 * 500);
        assert_eq!(&bytes[..4], b"TAU\0");
        assert_eq!(tau_table_cached(200, Some(dir.path())).unwrap(), fresh[..=200].to_vec());
        assert_eq!(tau_table_cached(800, Some(dir.path())).unwrap()[..=500], fresh[..]);
        std::fs::write(dir.path().join(CACHE_FILE), b"junk").unwrap();
        assert_eq!(tau_table_cached(500, Some(dir.path())).unwrap(), fresh);
    }

    #[test]
    fn gl3_examples() {
        let h = system(100);
        assert_eq!(h.gl3_coefficient(1, 1).unwrap(), 1.0);
        assert!((h.gl3_coefficient(1, 2).unwrap() + 0.71875).abs() < 1e-12);
        assert!((h.lambda_1n(2).unwrap() + 0.71875).abs() < 1e-12);
        assert!(matches!(h.gl3_coefficient(1, 101), Err(Error::OutOfRange(_))));
    }

    /// `lambda(p^a, p^b)` for `a + b <= depth` from the Pieri rules, writing
    /// `s(a,b)` for `lambda(p^a, p^b)` and `c = lambda(1,p) = h_1 = e_2`:
    /// `c s(a,b) = s(a+1,b) + s(a-1,b+1) + s(a,b-1)` (one box) and
    /// `c s(0,k) = s(0,k+1) + s(1,k-1)` (two boxes in distinct rows).
    /// Out-of-range terms vanish.
    fn pieri_table(c: f64, depth: usize) -> Vec<Vec<f64>> {
        let mut t = vec![vec![0.0; depth + 1]; depth + 1];
        t[0][0] = 1.0;
        let get = |t: &Vec<Vec<f64>>, a: i64, b: i64| -> f64 {
            if a < 0 || b < 0 {
                0.0
            } else {
                t[a as usize][b as usize]
            }
        };
        for level in 0..depth {
            for a in (1..=level + 1).rev() {
                let b = level + 1 - a;
                let (a, b) = (a as i64, b as i64);
                t[a as usize][b as usize] = c * get(&t, a - 1, b) - get(&t, a - 2, b + 1) - get(&t, a - 1, b - 1);
            }
            let k = level as i64;
            t[0][level + 1] = c * get(&t, 0, k) - get(&t, 1, k - 1);
        }
        t
    }

    #[test]
    fn schur_matches_pieri_oracle() {
        let h = system(10);
        for p in [2u64, 3, 5, 7] {
            let table = pieri_table(h.gl3_coefficient(1, p).unwrap(), 6);
            for a in 0..=6u32 {
                for b in 0..=6 - a {
                    let got = h.gl3_coefficient(p.pow(a), p.pow(b)).unwrap();
                    let want = table[a as usize][b as usize];
                    assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "p={p} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn self_duality_and_multiplicativity() {
        let h = system(2_000);
        for m in 1..40u64 {
            for n in 1..40u64 {
                let a = h.gl3_coefficient(m, n).unwrap();
                let b = h.gl3_coefficient(n, m).unwrap();
                assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
            }
        }
        let l1 = h.lambda_1n_slice();
        let lam: Vec<f64> = (0..=2000).map(|n| if n == 0 { 0.0 } else { h.lambda(n).unwrap() }).collect();
        for m in 1..45usize {
            for n in 1..45usize {
                if crate::modarith::gcd(m as u64, n as u64) == 1 {
                    assert!((l1[m * n] - l1[m] * l1[n]).abs() < 1e-9 * l1[m * n].abs().max(1.0));
                    assert!((lam[m * n] - lam[m] * lam[n]).abs() < 1e-9 * lam[m * n].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn satake_and_symmetric_square_relation() {
        let h = system(1_000);
        for p in crate::modarith::primes_in(2, 1_000) {
            let alpha = h.satake(p).unwrap();
            assert!((alpha.norm() - 1.0).abs() < 1e-12);
            assert!((2.0 * alpha.re - h.lambda(p as usize).unwrap()).abs() < 1e-12);
            let lp = h.lambda(p as usize).unwrap();
            assert!((lp * lp - 1.0 - h.lambda_1n(p as usize).unwrap()).abs() < 1e-9);
            assert!(lp.abs() <= 2.0);
        }
    }

    #[test]
    fn identities_hold() {
        let h = system(10_000);
        let report = h.verify_identities(10_000).unwrap();
        assert!(report.max_kim_sarnak_ratio < 1.0);
        let small = h.verify_identities(2).unwrap();
        assert!(small.max_rel_a < 1e-12);
        assert!((h.lambda(2).unwrap().powi(2) - 0.28125).abs() < 1e-12);
        assert!((h.lambda(4).unwrap() - (h.lambda(2).unwrap().powi(2) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn literal_square_divisor_reading_fails() {
        // sum_{d^2 | n} lambda(n^2 / d^2) disagrees with lambda(1, n) at n = 4
        let h = system(64);
        let literal = h.lambda(16).unwrap() + h.lambda(4).unwrap();
        let corrected = h.lambda(16).unwrap() + 1.0;
        let lam14 = h.gl3_coefficient(1, 4).unwrap();
        assert!((corrected - lam14).abs() < 1e-9);
        assert!((literal - lam14).abs() > 0.1);
    }

    #[test]
    fn rankin_selberg_examples() {
        let h = system(10_000);
        assert_eq!(h.rankin_selberg_ratios(1).unwrap(), (1.0, 1.0));
        let (a3, b3) = h.rankin_selberg_ratios(1_000).unwrap();
        let (a4, b4) = h.rankin_selberg_ratios(10_000).unwrap();
        for r in [a3, b3, a4, b4] {
            assert!((0.05..=20.0).contains(&r), "{r}");
        }
        assert!((0.2..=5.0).contains(&(a4 / a3)));
        assert!((0.2..=5.0).contains(&(b4 / b3)));
    }

    #[test]
    fn square_and_squared_tables() {
        let h = system(400);
        let sq = h.square_arg_table(20).unwrap();
        for n in 1..=20usize {
            assert!((sq[n] - h.lambda(n * n).unwrap()).abs() < 1e-9);
        }
        let s2 = h.squared_table(20).unwrap();
        assert!((s2[7] - h.lambda(7).unwrap().powi(2)).abs() < 1e-15);
    }
}
