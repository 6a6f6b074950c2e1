//! Bilinear forms `sum_{m,n} alpha(m) beta(n) K(m - n)` over `Z/qZ` and their
//! spectral bound `sqrt(q) |K^|_inf |alpha|_2 |beta|_2`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::periodic::PeriodicFunction;

/// Relative tolerance for the direct/spectral agreement and for the bound.
pub const BILINEAR_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct BilinearInstance {
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    pub kernel: PeriodicFunction,
}

/// Both evaluations of a bilinear form and the bound they are compared with.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BilinearReport {
    pub direct: Complex64,
    pub spectral: Complex64,
    pub bound: f64,
    pub ratio: f64,
}

impl BilinearInstance {
    pub fn new(alpha: Vec<Complex64>, beta: Vec<Complex64>, kernel: PeriodicFunction) -> Result<Self> {
        let q = kernel.q() as usize;
        if alpha.len() != q || beta.len() != q {
            return Err(Error::InvalidSpec(format!(
                "coefficient arrays of length {} and {} for modulus {q}",
                alpha.len(),
                beta.len()
            )));
        }
        Ok(Self { alpha, beta, kernel })
    }

    pub fn q(&self) -> u64 {
        self.kernel.q()
    }

    /// `sum_{m,n} alpha(m) beta(n) K(m - n)` by the double loop.
    pub fn direct(&self) -> Complex64 {
        let q = self.alpha.len();
        let k = self.kernel.values();
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, a) in self.alpha.iter().enumerate() {
            if *a == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut inner = Complex64::new(0.0, 0.0);
            for (n, b) in self.beta.iter().enumerate() {
                inner += b * k[(m + q - n) % q];
            }
            acc += a * inner;
        }
        acc
    }

    /// `sqrt(q) sum_t alpha^(-t) beta^(t) K^(t)` with unitary transforms.
    pub fn spectral(&self) -> Complex64 {
        let m = self.kernel.modulus().clone();
        let q = self.alpha.len();
        let ahat = PeriodicFunction::new(m.clone(), self.alpha.clone()).expect("length checked").dft();
        let bhat = PeriodicFunction::new(m, self.beta.clone()).expect("length checked").dft();
        let khat = self.kernel.dft_values();
        let sum: Complex64 = (0..q)
            .map(|t| ahat.values()[(q - t) % q] * bhat.values()[t] * khat[t])
            .sum();
        sum * (q as f64).sqrt()
    }

    /// `sqrt(q) |K^|_inf |alpha|_2 |beta|_2`.
    pub fn bound(&self) -> f64 {
        let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        (self.q() as f64).sqrt() * self.kernel.sup_norm_dft() * norm(&self.alpha) * norm(&self.beta)
    }

    /// The form's value after checking that both evaluations agree.
    pub fn bilinear_form(&self) -> Result<Complex64> {
        Ok(self.evaluate()?.direct)
    }

    pub fn evaluate(&self) -> Result<BilinearReport> {
        let direct = self.direct();
        let spectral = self.spectral();
        let bound = self.bound();
        let defect = (direct - spectral).norm();
        let tol = BILINEAR_TOL * bound;
        if defect > tol {
            return Err(Error::identity("bilinear form, direct vs spectral", format!("q = {}", self.q()), defect, tol));
        }
        let ratio = if bound > 0.0 { direct.norm() / bound } else { f64::NAN };
        Ok(BilinearReport {
            direct,
            spectral,
            bound,
            ratio,
        })
    }

    /// `|B| / (sqrt(q) |K^|_inf |alpha|_2 |beta|_2)`, at most 1.
    pub fn bound_ratio(&self) -> Result<f64> {
        let bound = self.bound();
        if bound == 0.0 {
            return Err(Error::DegenerateNorm(
                "sqrt(q) |K^|_inf |alpha|_2 |beta|_2 vanishes".into(),
            ));
        }
        let form = self.bilinear_form()?;
        Ok(form.norm() / bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modarith::Modulus;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_vec(rng: &mut ChaCha8Rng, q: usize) -> Vec<Complex64> {
        (0..q).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn delta_coefficients_pick_out_k0() {
        let q = 11u64;
        let k = PeriodicFunction::from_fn(Modulus::new(q).unwrap(), |x| Complex64::new(x as f64, 1.0));
        let mut delta = vec![c(0.0); q as usize];
        delta[0] = c(1.0);
        let inst = BilinearInstance::new(delta.clone(), delta, k.clone()).unwrap();
        assert!((inst.bilinear_form().unwrap() - k.values()[0]).norm() < 1e-12);
    }

    #[test]
    fn constant_coefficients_sum_kernel() {
        let q = 13u64;
        let k = PeriodicFunction::from_fn(Modulus::new(q).unwrap(), |x| Complex64::new((x * x % 7) as f64, -1.0));
        let total: Complex64 = k.values().iter().sum();
        let ones = vec![c(1.0); q as usize];
        let inst = BilinearInstance::new(ones.clone(), ones, k).unwrap();
        assert!((inst.bilinear_form().unwrap() - total * q as f64).norm() < 1e-9);
    }

    #[test]
    fn saturating_instances() {
        let q = 7u64;
        let m = Modulus::new(q).unwrap();
        let ones = vec![c(1.0); q as usize];
        let one = PeriodicFunction::from_fn(m.clone(), |_| c(1.0));
        let inst = BilinearInstance::new(ones.clone(), ones, one).unwrap();
        assert!((inst.bound_ratio().unwrap() - 1.0).abs() < 1e-12);

        // K^ a unimodular phase with constant argument: K(0) = sqrt(q), |K^|_inf = 1
        let phase = PeriodicFunction::from_fn(m, |_| Complex64::from_polar(1.0, 0.7));
        let k = phase.inverse_dft();
        let mut delta = vec![c(0.0); q as usize];
        delta[0] = c(1.0);
        let inst = BilinearInstance::new(delta.clone(), delta, k).unwrap();
        assert!((inst.bound_ratio().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_instances_respect_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for q in [5u64, 101, 499] {
            let m = Modulus::new(q).unwrap();
            for _ in 0..5 {
                let k = PeriodicFunction::new(m.clone(), random_vec(&mut rng, q as usize)).unwrap();
                let a = random_vec(&mut rng, q as usize);
                let b = random_vec(&mut rng, q as usize);
                let ratio = BilinearInstance::new(a, b, k).unwrap().bound_ratio().unwrap();
                assert!(ratio <= 1.0 + BILINEAR_TOL);
            }
        }
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = 31usize;
        let m = Modulus::new(q as u64).unwrap();
        let k = PeriodicFunction::new(m.clone(), random_vec(&mut rng, q)).unwrap();
        let a = random_vec(&mut rng, q);
        let b = random_vec(&mut rng, q);
        let base = BilinearInstance::new(a.clone(), b.clone(), k.clone()).unwrap().bilinear_form().unwrap();
        for shift in [1usize, 5, 17] {
            let shifted_k = PeriodicFunction::from_fn(m.clone(), |x| k.at(x as i64 - shift as i64));
            // K(m - n - c) with beta(n) moved to beta(n - c) restores K(m - n)
            let shifted_b: Vec<Complex64> = (0..q).map(|n| b[(n + shift) % q]).collect();
            let got = BilinearInstance::new(a.clone(), shifted_b, shifted_k).unwrap().bilinear_form().unwrap();
            assert!((got.norm() - base.norm()).abs() < 1e-9 * base.norm().max(1.0));
        }
    }

    #[test]
    fn zero_coefficients_are_degenerate() {
        let m = Modulus::new(5).unwrap();
        let k = PeriodicFunction::from_fn(m, |_| c(1.0));
        let inst = BilinearInstance::new(vec![c(0.0); 5], vec![c(1.0); 5], k).unwrap();
        assert!(matches!(inst.bound_ratio(), Err(Error::DegenerateNorm(_))));
        assert!(BilinearInstance::new(vec![c(0.0); 4], vec![c(1.0); 5], inst.kernel.clone()).is_err());
    }
}
