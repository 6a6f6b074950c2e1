//! The amplifier family `K(n, h)`, prime-pair averages over it, and the exact
//! split of the amplified sum into its `h = 0` and `h != 0` parts.
//!
//! `K(n, h) = q^{-1/2} sum_{z != 0} K^(z) e(-h z^{-1} / q) e(-nz / q)`, so that
//! `K(n, 0) = K(n) - K^(0)/sqrt(q)`. Averaging `h p l^{-1}` over primes
//! `p = 1 mod 4` in `[P, 2P)` and `l = 3 mod 4` in `[L, 2L)` against the weight
//! `W^(h/H)` gives `F`, whose `h != 0` part is `O`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::heckecoef::HeckeSystem;
use crate::modarith::{gcd, inverse_mod, primes_in};
use crate::periodic::{require_prime, PeriodicFunction, RootTable};
use crate::sums::{coefficient_table, window_range, Coefficient, SmoothWindow, QUADRATURE_TOL};

/// Relative tolerance of the detector identity.
pub const DETECTOR_TOL: f64 = 1e-9;

/// Default relative tolerance of the `F`/`O` decomposition.
pub const DECOMPOSITION_TOL: f64 = 1e-6;

const MAX_HMAX: u64 = 1 << 22;

/// The family `K(n, h)` built from a base function `K` modulo a prime.
#[derive(Debug, Clone)]
pub struct AmplifierFamily {
    base: PeriodicFunction,
    inverses: Vec<u64>,
    roots: RootTable,
}

impl AmplifierFamily {
    pub fn new(base: PeriodicFunction) -> Result<Self> {
        require_prime(base.modulus())?;
        let q = base.q();
        base.dft_values();
        Ok(Self {
            inverses: (0..q).map(|z| inverse_mod(z as i64, q).unwrap_or(0)).collect(),
            roots: RootTable::new(q),
            base,
        })
    }

    pub fn base(&self) -> &PeriodicFunction {
        &self.base
    }

    pub fn q(&self) -> u64 {
        self.base.q()
    }

    pub fn dft(&self) -> &[Complex64] {
        self.base.dft_values()
    }

    /// `K(n, h)`.
    pub fn family_value(&self, n: i64, h: i64) -> Complex64 {
        let q = self.q();
        let (n, h) = (n.rem_euclid(q as i64) as u64, h.rem_euclid(q as i64) as u64);
        let khat = self.dft();
        let mut acc = Complex64::new(0.0, 0.0);
        for z in 1..q {
            let phase = (h * self.inverses[z as usize] + n * z) % q;
            acc += khat[z as usize] * self.roots.e(-(phase as i64));
        }
        acc / (q as f64).sqrt()
    }

    /// `n -> K(n, h)` for all residues.
    pub fn family_table(&self, h: i64) -> PeriodicFunction {
        PeriodicFunction::from_fn(self.base.modulus().clone(), |n| self.family_value(n as i64, h))
    }

    /// `K(n) - K^(0)/sqrt(q)`.
    pub fn detector(&self, n: i64) -> Complex64 {
        self.base.at(n) - self.dft()[0] / (self.q() as f64).sqrt()
    }

    /// Largest `|K(n, 0) - (K(n) - K^(0)/sqrt q)|`, checked against
    /// [`DETECTOR_TOL`] relative to `|K|_2`.
    pub fn verify_detector(&self) -> Result<f64> {
        let table = self.family_table(0);
        let worst = (0..self.q() as i64)
            .map(|n| (table.at(n) - self.detector(n)).norm())
            .fold(0.0, f64::max);
        let tol = DETECTOR_TOL * self.base.l2_norm_sq().sqrt();
        if worst > tol {
            return Err(Error::identity("K(n,0) = K(n) - K^(0)/sqrt(q)", format!("q = {}", self.q()), worst, tol));
        }
        Ok(worst)
    }
}

/// Uniform measure on pairs `(p, l)`: primes `p = 1 mod 4` in `[P, 2P)` and
/// `l = 3 mod 4` in `[L, 2L)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimePairMeasure {
    pub p: u64,
    pub l: u64,
    pub p_set: Vec<u64>,
    pub l_set: Vec<u64>,
}

impl PrimePairMeasure {
    /// The prime sets for `P`, `L`; every element must lie below `q/2`.
    pub fn new(p: u64, l: u64, q: u64) -> Result<Self> {
        let p_set: Vec<u64> = primes_in(p, 2 * p).into_iter().filter(|x| x % 4 == 1).collect();
        let l_set: Vec<u64> = primes_in(l, 2 * l).into_iter().filter(|x| x % 4 == 3).collect();
        if let Some(x) = p_set.iter().chain(&l_set).find(|&&x| 2 * x >= q) {
            return Err(Error::OutOfRange(format!("prime {x} is not below q/2 = {}", q as f64 / 2.0)));
        }
        Ok(Self { p, l, p_set, l_set })
    }

    pub fn is_empty(&self) -> bool {
        self.p_set.is_empty() || self.l_set.is_empty()
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyMeasure(format!(
                "P = {} gives {} primes = 1 mod 4, L = {} gives {} primes = 3 mod 4",
                self.p,
                self.p_set.len(),
                self.l,
                self.l_set.len()
            )));
        }
        Ok(())
    }

    /// `p l^{-1} mod q` for every pair.
    pub fn ratios(&self, q: u64) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.p_set.len() * self.l_set.len());
        for &p in &self.p_set {
            for &l in &self.l_set {
                let li = inverse_mod(l as i64, q).expect("l is below q");
                out.push(p * li % q);
            }
        }
        out
    }
}

/// `H = q^2 L / (X P)`.
pub fn h_parameter(q: u64, x: f64, p: u64, l: u64) -> f64 {
    (q as f64).powi(2) * l as f64 / (x * p as f64)
}

/// The amplifier lengths `(P, L)` that balance the final estimate:
/// `P = q^{7/9} / (X^{1/3} Z^{10/9})` and `L = Z^{2/3} X P / q^{5/3}`.
pub fn balanced_lengths(q: u64, x: f64, z: f64) -> (f64, f64) {
    let qf = q as f64;
    let p = qf.powf(7.0 / 9.0) / (x.powf(1.0 / 3.0) * z.powf(10.0 / 9.0));
    let l = z.powf(2.0 / 3.0) * x * p / qf.powf(5.0 / 3.0);
    (p, l)
}

/// `(1/|P||L|) sum_{p,l} K(n, h p l^{-1})`.
pub fn measure_average(f: &AmplifierFamily, m: &PrimePairMeasure, n: i64, h: i64) -> Result<Complex64> {
    m.require_nonempty()?;
    let q = f.q() as i64;
    let ratios = m.ratios(f.q());
    let total: Complex64 = ratios
        .iter()
        .map(|&r| f.family_value(n, (h.rem_euclid(q) * r as i64) % q))
        .sum();
    Ok(total / ratios.len() as f64)
}

/// The unit-mass weight `W = V / int V`, so `W^(0) = 1` exactly.
#[derive(Debug, Clone)]
pub struct UnitMassWeight {
    window: SmoothWindow,
    mass: f64,
}

impl UnitMassWeight {
    pub fn new(window: SmoothWindow) -> Result<Self> {
        let mass = window.integral()?;
        Ok(Self { window, mass })
    }

    pub fn value(&self, x: f64) -> f64 {
        self.window.value(x) / self.mass
    }

    /// `W^(y) = V^(y) / V^(0)`.
    pub fn fourier(&self, y: f64) -> Result<Complex64> {
        if y == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        Ok(self.window.fourier(y)? / self.mass)
    }

    /// Bound for `sum_{|h| > hmax} |W^(h/H)|`.
    pub fn tail_bound(&self, h_param: f64, hmax: u64) -> f64 {
        self.window.tail_bound(1.0 / h_param, hmax) / self.mass
    }

    /// Smallest power of two `hmax >= H` whose tail bound is below [`QUADRATURE_TOL`].
    pub fn choose_hmax(&self, h_param: f64) -> Result<u64> {
        let mut hmax = (h_param.ceil() as u64).max(1).next_power_of_two();
        loop {
            let tail = self.tail_bound(h_param, hmax);
            if tail <= QUADRATURE_TOL {
                return Ok(hmax);
            }
            if hmax >= MAX_HMAX {
                return Err(Error::TruncationTooCoarse { hmax, tail });
            }
            hmax *= 2;
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Decomposition {
    #[serde(rename = "F")]
    pub f: Complex64,
    #[serde(rename = "O")]
    pub o: Complex64,
    #[serde(rename = "S")]
    pub s: Complex64,
    #[serde(rename = "T")]
    pub t: f64,
    pub defect: f64,
    pub hmax: u64,
    pub h_param: f64,
}

/// `x -> S_V(K(., x), X) = sum_n lambda(1,n) K(n, x) V(n/X)` for all residues,
/// through `A(z) = sum_n lambda(1,n) V(n/X) e(-nz/q)`.
fn family_sums(f: &AmplifierFamily, lam: &[f64], w: &SmoothWindow, x: f64) -> Vec<Complex64> {
    let q = f.q();
    let mut by_residue = vec![0.0; q as usize];
    for n in window_range(x) {
        by_residue[n % q as usize] += lam[n] * w.value(n as f64 / x);
    }
    let roots = &f.roots;
    let a: Vec<Complex64> = (0..q)
        .into_par_iter()
        .map(|z| {
            (0..q)
                .map(|r| roots.e(-(((r * z) % q) as i64)) * by_residue[r as usize])
                .sum()
        })
        .collect();
    let khat = f.dft();
    let scale = 1.0 / (q as f64).sqrt();
    (0..q)
        .into_par_iter()
        .map(|res| {
            let mut acc = Complex64::new(0.0, 0.0);
            for z in 1..q {
                let phase = (res * f.inverses[z as usize]) % q;
                acc += khat[z as usize] * a[z as usize] * roots.e(-(phase as i64));
            }
            acc * scale
        })
        .collect()
}

/// Computes `F` (all `|h| <= hmax`), `O` (`h != 0`), `S = S_V(K, X)` and
/// `T = sum_n lambda(1,n) V(n/X)`, and returns
/// `defect = |F - O - S + (K^(0)/sqrt q) T|` alongside.
///
/// `hmax = None` picks the truncation adaptively; an explicit `hmax` whose
/// `W^` tail exceeds the quadrature target is rejected.
pub fn decompose_fo(
    k: &PeriodicFunction,
    h: &HeckeSystem,
    w: &SmoothWindow,
    x: f64,
    m: &PrimePairMeasure,
    hmax: Option<u64>,
) -> Result<Decomposition> {
    m.require_nonempty()?;
    let q = k.q();
    let h_param = h_parameter(q, x, m.p, m.l);
    if h_param < 1.0 {
        return Err(Error::OutOfRange(format!("H = q^2 L / (X P) = {h_param} < 1")));
    }
    let family = AmplifierFamily::new(k.clone())?;
    let weight = UnitMassWeight::new(w.clone())?;
    let hmax = match hmax {
        None => weight.choose_hmax(h_param)?,
        Some(hm) => {
            let tail = weight.tail_bound(h_param, hm);
            if tail > QUADRATURE_TOL {
                return Err(Error::TruncationTooCoarse { hmax: hm, tail });
            }
            hm
        }
    };

    let lam = coefficient_table(h, Coefficient::Gl3, *window_range(x).end())?;
    let per_residue = family_sums(&family, &lam, w, x);
    let ratios = m.ratios(q);
    let count = ratios.len() as f64;

    let weights: Vec<Complex64> = (1..=hmax)
        .into_par_iter()
        .map(|hh| weight.fourier(hh as f64 / h_param))
        .collect::<Result<_>>()?;
    let at = |hh: i64| -> Complex64 {
        ratios
            .iter()
            .map(|&r| per_residue[((hh.rem_euclid(q as i64) as u64 * r) % q) as usize])
            .sum::<Complex64>()
            / count
    };
    let mut o = Complex64::new(0.0, 0.0);
    for (i, wh) in weights.iter().enumerate() {
        let hh = i as i64 + 1;
        // W is real, so W^(-y) = conj(W^(y))
        o += *wh * at(hh) + wh.conj() * at(-hh);
    }
    let f = o + at(0);

    let s = crate::sums::s_v_with_table(k, &lam, w, x)?;
    let t: f64 = window_range(x).map(|n| lam[n] * w.value(n as f64 / x)).sum();
    let correction = family.dft()[0] / (q as f64).sqrt() * t;
    let defect = (f - o - s + correction).norm();
    Ok(Decomposition {
        f,
        o,
        s,
        t,
        defect,
        hmax,
        h_param,
    })
}

/// `nu(x)` together with its mass and collision statistics.
#[derive(Debug, Clone)]
pub struct NuReport {
    pub nu: PeriodicFunction,
    /// `sum_x |nu(x)|^2`.
    pub sum_sq: f64,
    /// `sum_x nu(x)`.
    pub total: Complex64,
    /// Number of admissible triples `(p, h, l)`.
    pub triples: u64,
    /// `sum_x N(x)^2` for the unweighted count `N(x)`.
    pub collisions: u64,
}

/// `nu(x) = sum W^(h/H)` over `p` in the `p`-set, `h` in `[H', 2H')`, `l` in
/// the `l`-set with `(h, l) = 1` and `p h l^{-1} = x mod q`.
pub fn nu_count(m: &PrimePairMeasure, h_prime: u64, weight: &UnitMassWeight, h_param: f64, q: u64) -> Result<NuReport> {
    let modulus = crate::modarith::Modulus::prime(q)?;
    let mut values = vec![Complex64::new(0.0, 0.0); q as usize];
    let mut counts = vec![0u64; q as usize];
    let mut triples = 0;
    for hh in h_prime..2 * h_prime {
        let wh = weight.fourier(hh as f64 / h_param)?;
        for &l in &m.l_set {
            if gcd(hh, l) != 1 {
                continue;
            }
            let li = inverse_mod(l as i64, q).ok_or(Error::NotInvertible { x: l as i64, modulus: q })?;
            for &p in &m.p_set {
                let x = ((p as u128 * hh as u128 % q as u128) * li as u128 % q as u128) as usize;
                values[x] += wh;
                counts[x] += 1;
                triples += 1;
            }
        }
    }
    let nu = PeriodicFunction::new(modulus, values)?;
    Ok(NuReport {
        sum_sq: nu.l2_norm_sq(),
        total: nu.values().iter().sum(),
        collisions: counts.iter().map(|c| c * c).sum(),
        triples,
        nu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heckecoef::tau_table;
    use crate::modarith::Modulus;
    use crate::tracefn::{TraceFunctionSpec, TraceVariant};

    fn trace(v: TraceVariant, q: u64) -> PeriodicFunction {
        TraceFunctionSpec::new(v, Modulus::new(q).unwrap()).build().unwrap()
    }

    #[test]
    fn family_examples() {
        let q = 7u64;
        let one = AmplifierFamily::new(trace(TraceVariant::AdditiveCharacter { slope: 0 }, q)).unwrap();
        for n in 0..7 {
            for h in 0..7 {
                assert!(one.family_value(n, h).norm() < 1e-12);
            }
        }
        let add = AmplifierFamily::new(trace(TraceVariant::AdditiveCharacter { slope: 1 }, q)).unwrap();
        for n in 0..7i64 {
            for h in 0..7i64 {
                let want = crate::periodic::e(((n + h).rem_euclid(7)) as f64 / 7.0);
                assert!((add.family_value(n, h) - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn detector_identity() {
        for q in [5u64, 101] {
            for v in [TraceVariant::LegendreSymbol, TraceVariant::HyperKloosterman { rank: 2 }, TraceVariant::Delta { point: 3 }] {
                AmplifierFamily::new(trace(v, q)).unwrap().verify_detector().unwrap();
            }
        }
    }

    #[test]
    fn measure_average_examples() {
        let q = 101u64;
        let fam = AmplifierFamily::new(trace(TraceVariant::LegendreSymbol, q)).unwrap();
        let m1 = PrimePairMeasure::new(3, 3, q).unwrap();
        let m2 = PrimePairMeasure::new(13, 7, q).unwrap();
        for n in [0i64, 5, 77] {
            let a = measure_average(&fam, &m1, n, 0).unwrap();
            let b = measure_average(&fam, &m2, n, 0).unwrap();
            assert!((a - b).norm() < 1e-12);
            assert!((a - fam.detector(n)).norm() < 1e-9);
        }
        // independent re-summation of the double average
        let (n, h) = (5i64, 2i64);
        let mut want = Complex64::new(0.0, 0.0);
        let mut count = 0.0;
        for &p in &m1.p_set {
            for &l in &m1.l_set {
                let li = inverse_mod(l as i64, q).unwrap() as i64;
                let arg = h * p as i64 % q as i64 * li % q as i64;
                let khat = fam.dft();
                let mut v = Complex64::new(0.0, 0.0);
                for z in 1..q as i64 {
                    let zi = inverse_mod(z, q).unwrap() as i64;
                    let t = (-(arg * zi) - n * z).rem_euclid(q as i64);
                    v += khat[z as usize] * crate::periodic::e(t as f64 / q as f64);
                }
                want += v / (q as f64).sqrt();
                count += 1.0;
            }
        }
        let got = measure_average(&fam, &m1, n, h).unwrap();
        assert!((got - want / count).norm() < 1e-9);

        let zero = AmplifierFamily::new(trace(TraceVariant::AdditiveCharacter { slope: 0 }, q)).unwrap();
        assert!(measure_average(&zero, &m1, 3, 9).unwrap().norm() < 1e-12);
        let empty = PrimePairMeasure::new(2, 2, q).unwrap();
        assert!(matches!(measure_average(&fam, &empty, 1, 1), Err(Error::EmptyMeasure(_))));
    }

    #[test]
    fn measure_sets() {
        let m = PrimePairMeasure::new(3, 2, 211).unwrap();
        assert_eq!(m.p_set, vec![5]);
        assert_eq!(m.l_set, vec![3]);
        let m = PrimePairMeasure::new(2, 2, 101).unwrap();
        assert!(m.p_set.is_empty() && m.is_empty());
        assert!(PrimePairMeasure::new(40, 3, 101).is_err());
    }

    #[test]
    fn family_sums_match_direct_family_values() {
        let q = 31u64;
        let h = HeckeSystem::from_tau(tau_table(400).unwrap()).unwrap();
        let w = SmoothWindow::new(2.0).unwrap();
        let fam = AmplifierFamily::new(trace(TraceVariant::HyperKloosterman { rank: 2 }, q)).unwrap();
        let x = 150.0;
        let lam = h.lambda_1n_slice();
        let fast = family_sums(&fam, lam, &w, x);
        for res in [0u64, 1, 17, 30] {
            let table = fam.family_table(res as i64);
            let direct: Complex64 = window_range(x).map(|n| table.at(n as i64) * (lam[n] * w.value(n as f64 / x))).sum();
            assert!((fast[res as usize] - direct).norm() < 1e-9 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn decomposition_examples() {
        let h = HeckeSystem::from_tau(tau_table(13_000).unwrap()).unwrap();
        let w = SmoothWindow::new(2.0).unwrap();
        let q = 101u64;
        let m = PrimePairMeasure::new(5, 3, q).unwrap();
        // H = 1.2 keeps the h-range short
        let x = (q * q) as f64 * 3.0 / (5.0 * 1.2);
        let zero = PeriodicFunction::zero(Modulus::new(q).unwrap());
        let d = decompose_fo(&zero, &h, &w, x, &m, None).unwrap();
        assert_eq!((d.f, d.o, d.s, d.defect), (Complex64::default(), Complex64::default(), Complex64::default(), 0.0));

        let leg = trace(TraceVariant::LegendreSymbol, q);
        let d = decompose_fo(&leg, &h, &w, x, &m, None).unwrap();
        assert!(d.defect <= DECOMPOSITION_TOL * (d.s.norm() + 1.0));
        assert!((d.f - d.o - d.s).norm() <= DECOMPOSITION_TOL * (d.s.norm() + 1.0));

        let kl2 = trace(TraceVariant::HyperKloosterman { rank: 2 }, q);
        let d = decompose_fo(&kl2, &h, &w, x, &m, None).unwrap();
        assert!(d.defect <= DECOMPOSITION_TOL * (d.s.norm() + 1.0));
        assert!(matches!(
            decompose_fo(&kl2, &h, &w, x, &m, Some(1)),
            Err(Error::TruncationTooCoarse { .. })
        ));
        let empty = PrimePairMeasure::new(2, 2, q).unwrap();
        assert!(matches!(decompose_fo(&kl2, &h, &w, x, &empty, None), Err(Error::EmptyMeasure(_))));
    }

    #[test]
    fn nu_count_matches_triple_loop_and_bookkeeping() {
        let q = 101u64;
        let weight = UnitMassWeight::new(SmoothWindow::new(2.0).unwrap()).unwrap();
        let m = PrimePairMeasure::new(5, 3, q).unwrap();
        let h_param = 3.0;
        for h_prime in [1u64, 2, 3] {
            let report = nu_count(&m, h_prime, &weight, h_param, q).unwrap();
            assert_eq!(report.nu.values()[0], Complex64::default());
            for x in 0..q {
                let mut want = Complex64::new(0.0, 0.0);
                for &p in &m.p_set {
                    for hh in h_prime..2 * h_prime {
                        for &l in &m.l_set {
                            if gcd(hh, l) == 1 && p * hh % q == x * l % q {
                                want += weight.fourier(hh as f64 / h_param).unwrap();
                            }
                        }
                    }
                }
                assert!((report.nu.values()[x as usize] - want).norm() < 1e-12);
            }
            let mut mass = Complex64::new(0.0, 0.0);
            for hh in h_prime..2 * h_prime {
                let coprime = m.l_set.iter().filter(|&&l| gcd(hh, l) == 1).count() as f64;
                mass += weight.fourier(hh as f64 / h_param).unwrap() * (m.p_set.len() as f64 * coprime);
            }
            assert!((report.total - mass).norm() < 1e-12);
        }
        let empty = PrimePairMeasure::new(2, 2, q).unwrap();
        let report = nu_count(&empty, 2, &weight, h_param, q).unwrap();
        assert!(report.nu.values().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn collisions_are_integer_solutions_when_small() {
        let q = 1009u64;
        let weight = UnitMassWeight::new(SmoothWindow::new(2.0).unwrap()).unwrap();
        let m = PrimePairMeasure::new(5, 7, q).unwrap();
        let h_prime = 3u64;
        assert!(8 * m.p * h_prime * m.l <= q);
        let report = nu_count(&m, h_prime, &weight, 3.0, q).unwrap();
        let mut triples = Vec::new();
        for &p in &m.p_set {
            for hh in h_prime..2 * h_prime {
                for &l in &m.l_set {
                    if gcd(hh, l) == 1 {
                        triples.push((p, hh, l));
                    }
                }
            }
        }
        let mut solutions = 0u64;
        for &(p1, h1, l1) in &triples {
            for &(p2, h2, l2) in &triples {
                if l1 * h2 * p2 == l2 * h1 * p1 {
                    solutions += 1;
                }
            }
        }
        assert_eq!(report.triples, triples.len() as u64);
        assert_eq!(report.collisions, solutions);
    }

    #[test]
    fn balanced_lengths_formula() {
        let (p, l) = balanced_lengths(1000, 1000f64.powf(1.5), 1.0);
        assert!((p - 1000f64.powf(7.0 / 9.0 - 0.5)).abs() < 1e-9 * p);
        assert!((l - 1000f64.powf(1.5) * p / 1000f64.powf(5.0 / 3.0)).abs() < 1e-9 * l);
        assert!((h_parameter(101, 1000.0, 2, 3) - 101.0 * 101.0 * 3.0 / 2000.0).abs() < 1e-12);
    }
}
