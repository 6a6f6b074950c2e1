//! `q`-periodic complex functions and their unitary discrete Fourier transform.
//!
//! The transform is `K^(n) = q^{-1/2} sum_x K(x) e(nx/q)` with inverse
//! `K(x) = q^{-1/2} sum_n K^(n) e(-nx/q)`. It is evaluated naively in `O(q^2)`
//! against a table of `q`-th roots of unity; at desk scale (`q <= 10^4`) this
//! is exact up to rounding and sidesteps prime-length FFT plumbing.

use std::io::{Read, Write};
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modarith::{gcd, inverse_mod, Modulus};

/// Relative tolerance for the exact Fourier identities in this module.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Work above which the transforms are split across the rayon pool.
const PAR_THRESHOLD: usize = 256;

/// `e(z) = exp(2 pi i z)`.
pub fn e(z: f64) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::TAU * z)
}

/// `e(k/q)` for `k = 0..q`.
#[derive(Debug, Clone)]
pub struct RootTable {
    roots: Vec<Complex64>,
}

impl RootTable {
    pub fn new(q: u64) -> Self {
        let qf = q as f64;
        Self {
            roots: (0..q).map(|k| e(k as f64 / qf)).collect(),
        }
    }

    pub fn modulus(&self) -> u64 {
        self.roots.len() as u64
    }

    /// `e(k/q)` for any integer `k`.
    #[inline]
    pub fn e(&self, k: i64) -> Complex64 {
        self.roots[k.rem_euclid(self.roots.len() as i64) as usize]
    }

    #[inline]
    pub fn get(&self, k: usize) -> Complex64 {
        self.roots[k]
    }
}

/// `out(n) = scale * sum_x input(x) e(sign * n x / q)`.
fn naive_transform(input: &[Complex64], roots: &RootTable, sign: i64, scale: f64) -> Vec<Complex64> {
    let q = input.len();
    let row = |n: usize| -> Complex64 {
        let step = (sign * n as i64).rem_euclid(q as i64) as usize;
        let mut idx = 0usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for &v in input {
            acc += v * roots.get(idx);
            idx += step;
            if idx >= q {
                idx -= q;
            }
        }
        acc * scale
    };
    if q >= PAR_THRESHOLD {
        (0..q).into_par_iter().map(row).collect()
    } else {
        (0..q).map(row).collect()
    }
}

/// A complex-valued function on `Z/qZ`.
#[derive(Debug, Clone)]
pub struct PeriodicFunction {
    modulus: Modulus,
    values: Vec<Complex64>,
    dft_cache: OnceLock<Vec<Complex64>>,
}

impl PartialEq for PeriodicFunction {
    fn eq(&self, other: &Self) -> bool {
        self.modulus == other.modulus && self.values == other.values
    }
}

impl PeriodicFunction {
    pub fn new(modulus: Modulus, values: Vec<Complex64>) -> Result<Self> {
        if values.len() as u64 != modulus.value() {
            return Err(Error::InvalidSpec(format!(
                "expected {} values, got {}",
                modulus.value(),
                values.len()
            )));
        }
        Ok(Self {
            modulus,
            values,
            dft_cache: OnceLock::new(),
        })
    }

    pub fn from_fn(modulus: Modulus, f: impl Fn(u64) -> Complex64) -> Self {
        let values = (0..modulus.value()).map(f).collect();
        Self {
            modulus,
            values,
            dft_cache: OnceLock::new(),
        }
    }

    pub fn zero(modulus: Modulus) -> Self {
        Self::from_fn(modulus, |_| Complex64::new(0.0, 0.0))
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn q(&self) -> u64 {
        self.modulus.value()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `K(n)` for any integer `n`.
    #[inline]
    pub fn at(&self, n: i64) -> Complex64 {
        self.values[n.rem_euclid(self.values.len() as i64) as usize]
    }

    fn roots(&self) -> RootTable {
        RootTable::new(self.q())
    }

    /// The transform values `K^(0..q)`, computed once.
    pub fn dft_values(&self) -> &[Complex64] {
        self.dft_cache.get_or_init(|| {
            let scale = 1.0 / (self.q() as f64).sqrt();
            naive_transform(&self.values, &self.roots(), 1, scale)
        })
    }

    /// `K^` as a periodic function in its own right.
    pub fn dft(&self) -> PeriodicFunction {
        PeriodicFunction {
            modulus: self.modulus.clone(),
            values: self.dft_values().to_vec(),
            dft_cache: OnceLock::new(),
        }
    }

    /// Inverse transform: the function whose `dft` is `self`.
    pub fn inverse_dft(&self) -> PeriodicFunction {
        let scale = 1.0 / (self.q() as f64).sqrt();
        let values = naive_transform(&self.values, &self.roots(), -1, scale);
        PeriodicFunction {
            modulus: self.modulus.clone(),
            dft_cache: OnceLock::from(self.values.clone()),
            values,
        }
    }

    /// `max_n |K^(n)|`.
    pub fn sup_norm_dft(&self) -> f64 {
        self.dft_values().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `sum_x |K(x)|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `| sum_x |K(x)|^2 - sum_n |K^(n)|^2 |`.
    pub fn plancherel_defect(&self) -> f64 {
        let spectral: f64 = self.dft_values().iter().map(|z| z.norm_sqr()).sum();
        (self.l2_norm_sq() - spectral).abs()
    }

    /// Largest deviation between `self` and the inverse transform of its transform.
    pub fn round_trip_defect(&self) -> f64 {
        let back = self.dft().inverse_dft();
        self.values
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(u64, Complex64) -> Complex64) -> PeriodicFunction {
        PeriodicFunction::from_fn(self.modulus.clone(), |x| f(x, self.values[x as usize]))
    }

    /// The correlation function
    /// `L(x) = q^{-1/2} sum_{u != 0} |K^(u)|^2 e(-u^{-1} x / q) + q^{-1/2} |K^(0)|^2`,
    /// returned only after checking that its transform is
    /// `L^(0) = |K^(0)|^2` and `L^(h) = |K^(h^{-1})|^2` for `h != 0`.
    pub fn correlation_l(&self) -> Result<PeriodicFunction> {
        require_prime(&self.modulus)?;
        let q = self.q();
        let khat = self.dft_values();
        let roots = self.roots();
        let inv: Vec<u64> = (0..q).map(|u| inverse_mod(u as i64, q).unwrap_or(0)).collect();
        let scale = 1.0 / (q as f64).sqrt();
        let l = PeriodicFunction::from_fn(self.modulus.clone(), |x| {
            let mut acc = Complex64::new(khat[0].norm_sqr(), 0.0);
            for u in 1..q {
                let phase = -((inv[u as usize] * x % q) as i64);
                acc += roots.e(phase) * khat[u as usize].norm_sqr();
            }
            acc * scale
        });

        let tol = IDENTITY_TOL * self.l2_norm_sq();
        let lhat = l.dft_values();
        for h in 0..q {
            let expected = if h == 0 {
                khat[0].norm_sqr()
            } else {
                khat[inv[h as usize] as usize].norm_sqr()
            };
            let defect = (lhat[h as usize] - expected).norm();
            if defect > tol {
                return Err(Error::identity("correlation transform L^", format!("h = {h}"), defect, tol));
            }
        }
        Ok(l)
    }

    /// `h -> q^{-1/2} sum_n K(d^2 m1 n) conj(K(d^2 m2 n)) e(nh/q)`.
    pub fn correlation_k2hat(&self, d: i64, m1: i64, m2: i64) -> Result<PeriodicFunction> {
        let q = self.q();
        let prod = (d as i128 * m1 as i128 * m2 as i128).rem_euclid(q as i128) as u64;
        if gcd(prod, q) != 1 {
            return Err(Error::NotCoprime { modulus: q });
        }
        let qi = q as i64;
        let a1 = (d * d % qi * m1).rem_euclid(qi);
        let a2 = (d * d % qi * m2).rem_euclid(qi);
        let product = PeriodicFunction::from_fn(self.modulus.clone(), |n| {
            let n = n as i64;
            self.at(a1 * n) * self.at(a2 * n).conj()
        });
        Ok(product.dft())
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (residue, v) in self.values.iter().enumerate() {
            w.serialize(CsvRow {
                residue: residue as u64,
                re: v.re,
                im: v.im,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `residue,re,im` layout written by [`to_csv`](Self::to_csv); the
    /// modulus is the number of rows.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rows: Vec<CsvRow> = csv::Reader::from_reader(reader)
            .deserialize()
            .collect::<std::result::Result<_, _>>()?;
        rows.sort_by_key(|r| r.residue);
        if rows.iter().enumerate().any(|(i, r)| r.residue != i as u64) {
            return Err(Error::Parse("residues must cover 0..q exactly once".into()));
        }
        let modulus = Modulus::new(rows.len() as u64)?;
        let values = rows.into_iter().map(|r| Complex64::new(r.re, r.im)).collect();
        Self::new(modulus, values)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&PeriodicRecord::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: PeriodicRecord = serde_json::from_str(s)?;
        let modulus = Modulus::new(rec.modulus)?;
        Self::new(modulus, rec.values.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    residue: u64,
    re: f64,
    im: f64,
}

/// JSON mirror of a periodic function: `{"modulus": q, "values": [[re, im], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicRecord {
    pub modulus: u64,
    pub values: Vec<[f64; 2]>,
}

impl From<&PeriodicFunction> for PeriodicRecord {
    fn from(k: &PeriodicFunction) -> Self {
        Self {
            modulus: k.q(),
            values: k.values().iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

pub(crate) fn require_prime(m: &Modulus) -> Result<()> {
    if m.is_prime() {
        Ok(())
    } else {
        Err(Error::InvalidModulus(format!("{} is not prime", m.value())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn modulus(q: u64) -> Modulus {
        Modulus::new(q).unwrap()
    }

    fn legendre(q: u64) -> PeriodicFunction {
        PeriodicFunction::from_fn(modulus(q), |x| {
            if x == 0 {
                c(0.0, 0.0)
            } else if (1..q).any(|y| y * y % q == x) {
                c(1.0, 0.0)
            } else {
                c(-1.0, 0.0)
            }
        })
    }

    /// Direct `O(q^2)` evaluation with fresh transcendental calls, independent of the root table.
    fn direct_dft(k: &PeriodicFunction) -> Vec<Complex64> {
        let q = k.q();
        (0..q)
            .map(|n| {
                (0..q)
                    .map(|x| k.values()[x as usize] * e((n * x) as f64 / q as f64))
                    .sum::<Complex64>()
                    / (q as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn dft_examples() {
        let one = PeriodicFunction::from_fn(modulus(5), |_| c(1.0, 0.0));
        let hat = one.dft_values();
        assert!((hat[0] - c(5f64.sqrt(), 0.0)).norm() < 1e-12);
        assert!(hat[1..].iter().all(|z| z.norm() < 1e-12));

        let q = 11u64;
        let delta = PeriodicFunction::from_fn(modulus(q), |x| {
            c(if x == 0 { (q as f64).sqrt() } else { 0.0 }, 0.0)
        });
        assert!(delta.dft_values().iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-12));

        let leg = legendre(5);
        let oracle = direct_dft(&leg);
        for (a, b) in leg.dft_values().iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(oracle[0].norm() < 1e-12);
        assert!(oracle[1..].iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn sup_norm_examples() {
        let one = PeriodicFunction::from_fn(modulus(5), |_| c(1.0, 0.0));
        assert!((one.sup_norm_dft() - 5f64.sqrt()).abs() < 1e-12);
        assert!((legendre(5).sup_norm_dft() - 1.0).abs() < 1e-12);
        let add = PeriodicFunction::from_fn(modulus(5), |x| e(x as f64 / 5.0));
        assert!((add.sup_norm_dft() - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn plancherel_and_round_trip() {
        let one = PeriodicFunction::from_fn(modulus(7), |_| c(1.0, 0.0));
        assert!(one.plancherel_defect() <= 1e-9 * one.l2_norm_sq());
        let k = PeriodicFunction::from_fn(modulus(101), |x| {
            let t = x as f64;
            c((t * 0.37).sin() * 3.0, (t * t * 0.011).cos())
        });
        assert!(k.plancherel_defect() <= 1e-9 * k.l2_norm_sq());
        assert!(k.round_trip_defect() <= 1e-9 * k.l2_norm_sq().sqrt());
    }

    #[test]
    fn correlation_l_examples() {
        let one = PeriodicFunction::from_fn(modulus(5), |_| c(1.0, 0.0));
        let l = one.correlation_l().unwrap();
        assert!(l.values().iter().all(|z| (z - c(5f64.sqrt(), 0.0)).norm() < 1e-12));

        let l = legendre(5).correlation_l().unwrap();
        let lhat = l.dft_values();
        assert!(lhat[0].norm() < 1e-12);
        assert!(lhat[1..].iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-12));

        let composite = PeriodicFunction::from_fn(modulus(6), |_| c(1.0, 0.0));
        assert!(composite.correlation_l().is_err());
    }

    #[test]
    fn correlation_k2hat_examples() {
        let q = 7u64;
        let k2 = legendre(q).correlation_k2hat(1, 1, 1).unwrap();
        let want0 = (q - 1) as f64 / (q as f64).sqrt();
        assert!((k2.values()[0] - c(want0, 0.0)).norm() < 1e-12);
        // |K(n)|^2 = [n != 0], so the other frequencies are -q^{-1/2}
        for h in 1..q as usize {
            assert!((k2.values()[h] - c(-1.0 / (q as f64).sqrt(), 0.0)).norm() < 1e-12);
        }

        let one = PeriodicFunction::from_fn(modulus(q), |_| c(1.0, 0.0));
        let k2 = one.correlation_k2hat(3, 2, 5).unwrap();
        assert!((k2.values()[0] - c((q as f64).sqrt(), 0.0)).norm() < 1e-12);
        assert!(k2.values()[1..].iter().all(|z| z.norm() < 1e-12));

        assert!(matches!(
            one.correlation_k2hat(7, 1, 1),
            Err(Error::NotCoprime { modulus: 7 })
        ));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let k = PeriodicFunction::from_fn(modulus(13), |x| c(x as f64 * 0.5, -(x as f64)));
        let mut buf = Vec::new();
        k.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("residue,re,im\n0,0.0,"));
        assert_eq!(PeriodicFunction::from_csv(buf.as_slice()).unwrap(), k);
        assert_eq!(PeriodicFunction::from_json(&k.to_json().unwrap()).unwrap(), k);
        assert!(PeriodicFunction::from_csv("residue,re,im\n1,0,0\n".as_bytes()).is_err());
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(PeriodicFunction::new(modulus(5), vec![c(0.0, 0.0); 4]).is_err());
    }
}
