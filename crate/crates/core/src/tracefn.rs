//! Trace functions modulo a prime: hyper-Kloosterman sums, characters, deltas,
//! additive phases and mixed character sums, plus the multiplicative (Mellin)
//! side used to rewrite twisted sums through Gauss sums.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::modarith::{inverse_mod, pow_mod, DlogTable, Modulus};
use crate::periodic::{require_prime, PeriodicFunction, RootTable};

/// Relative tolerance for the two evaluations of the `Kl_3` twist.
pub const TWIST_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// The family part of a trace function, independent of the modulus.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceVariant {
    /// `x -> prod_i chi_{j_i}(f_i(x)) * e(g(x)/q)`; polynomials list coefficients
    /// in ascending degree.
    MixedCharacter {
        indices: Vec<u64>,
        numerators: Vec<Vec<i64>>,
        phase: Vec<i64>,
    },
    HyperKloosterman { rank: u32 },
    /// `sqrt(q)` at `a`, zero elsewhere.
    Delta { point: i64 },
    AdditiveCharacter { slope: i64 },
    LegendreSymbol,
    CustomTable(Vec<Complex64>),
}

/// A trace function recipe bound to a prime modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFunctionSpec {
    pub variant: TraceVariant,
    pub modulus: Modulus,
}

impl TraceFunctionSpec {
    pub fn new(variant: TraceVariant, modulus: Modulus) -> Self {
        Self { variant, modulus }
    }

    pub fn build(&self) -> Result<PeriodicFunction> {
        build(self)
    }
}

/// Evaluates a trace function recipe to its table of values.
pub fn build(spec: &TraceFunctionSpec) -> Result<PeriodicFunction> {
    let m = &spec.modulus;
    require_prime(m).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let q = m.value();
    let sqrt_q = (q as f64).sqrt();
    match &spec.variant {
        TraceVariant::HyperKloosterman { rank } => {
            if *rank < 2 {
                return Err(Error::InvalidSpec(format!("Kloosterman rank {rank} < 2")));
            }
            PeriodicFunction::new(m.clone(), hyper_kloosterman_table(m, *rank)?)
        }
        TraceVariant::Delta { point } => {
            let a = m.reduce(*point);
            Ok(PeriodicFunction::from_fn(m.clone(), |x| {
                Complex64::new(if x == a { sqrt_q } else { 0.0 }, 0.0)
            }))
        }
        TraceVariant::AdditiveCharacter { slope } => {
            let roots = RootTable::new(q);
            let a = m.reduce(*slope);
            Ok(PeriodicFunction::from_fn(m.clone(), |x| roots.e(((a * x) % q) as i64)))
        }
        TraceVariant::LegendreSymbol => Ok(PeriodicFunction::from_fn(m.clone(), |x| {
            Complex64::new(legendre(x, q) as f64, 0.0)
        })),
        TraceVariant::CustomTable(values) => PeriodicFunction::new(m.clone(), values.clone())
            .map_err(|_| Error::InvalidSpec(format!("custom table needs {q} values, got {}", values.len()))),
        TraceVariant::MixedCharacter {
            indices,
            numerators,
            phase,
        } => build_mixed(m, indices, numerators, phase),
    }
}

fn build_mixed(m: &Modulus, indices: &[u64], numerators: &[Vec<i64>], phase: &[i64]) -> Result<PeriodicFunction> {
    let q = m.value();
    if indices.len() != numerators.len() {
        return Err(Error::InvalidSpec(format!(
            "{} character indices but {} numerator polynomials",
            indices.len(),
            numerators.len()
        )));
    }
    if numerators.iter().any(Vec::is_empty) || phase.is_empty() {
        return Err(Error::InvalidSpec("polynomials need at least one coefficient".into()));
    }
    if let Some(&j) = indices.iter().find(|&&j| j > q.saturating_sub(2)) {
        return Err(Error::InvalidSpec(format!("character index {j} outside 0..={}", q.saturating_sub(2))));
    }
    let dlog = Arc::new(DlogTable::new(m)?);
    let chars: Vec<DirichletCharacter> = indices
        .iter()
        .map(|&j| DirichletCharacter::with_table(dlog.clone(), j))
        .collect::<Result<_>>()?;
    let roots = RootTable::new(q);
    Ok(PeriodicFunction::from_fn(m.clone(), |x| {
        let mut v = roots.e(eval_poly(phase, x, q) as i64);
        for (chi, f) in chars.iter().zip(numerators) {
            v *= chi.value(eval_poly(f, x, q));
        }
        v
    }))
}

/// `f(x) mod q` for integer coefficients in ascending degree.
pub fn eval_poly(coeffs: &[i64], x: u64, q: u64) -> u64 {
    coeffs.iter().rev().fold(0u64, |acc, &c| {
        ((acc as u128 * x as u128 + c.rem_euclid(q as i64) as u128) % q as u128) as u64
    })
}

/// Legendre symbol `(x/q)` for an odd prime `q`; for `q = 2` every odd `x` maps to 1.
pub fn legendre(x: u64, q: u64) -> i32 {
    let x = x % q;
    if x == 0 {
        0
    } else if q == 2 || pow_mod(x, (q - 1) / 2, q) == 1 {
        1
    } else {
        -1
    }
}

/// `Kl_r(n) = q^{-(r-1)/2} sum_{x_1...x_r = n} e((x_1 + ... + x_r)/q)`, `Kl_r(0) = 0`.
///
/// Ranks 2 and 3 use direct multiplicative convolution; higher ranks go
/// through the Fourier transform on the cyclic unit group.
pub fn hyper_kloosterman_table(m: &Modulus, rank: u32) -> Result<Vec<Complex64>> {
    require_prime(m)?;
    match rank {
        0 | 1 => Err(Error::InvalidSpec(format!("Kloosterman rank {rank} < 2"))),
        2 | 3 => {
            let q = m.value();
            let roots = RootTable::new(q);
            let mut table: Vec<Complex64> = (0..q)
                .map(|x| if x == 0 { ZERO } else { roots.get(x as usize) })
                .collect();
            for _ in 1..rank {
                table = convolve_with_phase(&table, q, &roots);
            }
            Ok(table)
        }
        _ => hyper_kloosterman_unit_dft(m, rank),
    }
}

/// `n -> q^{-1/2} sum_{x unit} prev(n x^{-1}) e(x/q)`: one more variable in a
/// hyper-Kloosterman sum.
fn convolve_with_phase(prev: &[Complex64], q: u64, roots: &RootTable) -> Vec<Complex64> {
    let inv: Vec<u64> = (0..q).map(|x| inverse_mod(x as i64, q).unwrap_or(0)).collect();
    let scale = 1.0 / (q as f64).sqrt();
    let entry = |n: u64| -> Complex64 {
        if n == 0 {
            return ZERO;
        }
        let mut acc = ZERO;
        for x in 1..q {
            acc += prev[(n * inv[x as usize] % q) as usize] * roots.get(x as usize);
        }
        acc * scale
    };
    if q >= 256 {
        (0..q).into_par_iter().map(entry).collect()
    } else {
        (0..q).map(entry).collect()
    }
}

fn hyper_kloosterman_unit_dft(m: &Modulus, rank: u32) -> Result<Vec<Complex64>> {
    let q = m.value();
    let dlog = DlogTable::new(m)?;
    let order = dlog.group_order();
    let roots_q = RootTable::new(q);
    let roots_u = RootTable::new(order as u64);
    // E(k) = e(g^k / q) on the exponent group Z/(q-1)
    let phase: Vec<Complex64> = (0..order).map(|k| roots_q.get(dlog.exp(k as u64) as usize)).collect();
    let transform = |input: &[Complex64], sign: i64| -> Vec<Complex64> {
        (0..order)
            .into_par_iter()
            .map(|j| {
                let mut acc = ZERO;
                for (k, &v) in input.iter().enumerate() {
                    acc += v * roots_u.e(sign * ((j * k) % order) as i64);
                }
                acc
            })
            .collect()
    };
    let spectrum: Vec<Complex64> = transform(&phase, -1).into_iter().map(|z| z.powu(rank)).collect();
    let scale = (q as f64).powf(-((rank - 1) as f64) / 2.0) / order as f64;
    let on_units = transform(&spectrum, 1);
    let mut table = vec![ZERO; q as usize];
    for (k, v) in on_units.into_iter().enumerate() {
        table[dlog.exp(k as u64) as usize] = v * scale;
    }
    Ok(table)
}

/// Normalized Kloosterman sum `m^{-1/2} sum_{x unit mod m} e((n x + x^{-1})/m)` for any `m >= 1`.
pub fn kloosterman(n: i64, m: &Modulus) -> Complex64 {
    let mv = m.value();
    if mv == 1 {
        return Complex64::new(1.0, 0.0);
    }
    let n = m.reduce(n) as u128;
    let mut re = 0.0;
    for x in 1..mv {
        if let Some(xi) = inverse_mod(x as i64, mv) {
            let arg = ((n * x as u128 + xi as u128) % mv as u128) as f64 / mv as f64;
            re += (std::f64::consts::TAU * arg).cos();
        }
    }
    // the sum is invariant under x -> -x, so the sine terms cancel identically
    Complex64::new(re / (mv as f64).sqrt(), 0.0)
}

/// Full-sum version of [`kloosterman`] that keeps the imaginary part, used to
/// confirm that it vanishes.
pub fn kloosterman_complex(n: i64, m: &Modulus) -> Complex64 {
    let mv = m.value();
    if mv == 1 {
        return Complex64::new(1.0, 0.0);
    }
    let n = m.reduce(n) as u128;
    let mut acc = ZERO;
    for x in 1..mv {
        if let Some(xi) = inverse_mod(x as i64, mv) {
            let arg = ((n * x as u128 + xi as u128) % mv as u128) as f64 / mv as f64;
            acc += crate::periodic::e(arg);
        }
    }
    acc / (mv as f64).sqrt()
}

/// Multiplicative character `chi_j(g^k) = e(jk/(q-1))` for the smallest primitive root `g`.
#[derive(Debug, Clone)]
pub struct DirichletCharacter {
    index: u64,
    dlog: Arc<DlogTable>,
}

impl DirichletCharacter {
    pub fn new(modulus: &Modulus, index: u64) -> Result<Self> {
        Self::with_table(Arc::new(DlogTable::new(modulus)?), index)
    }

    pub fn with_table(dlog: Arc<DlogTable>, index: u64) -> Result<Self> {
        let order = dlog.group_order() as u64;
        if index >= order {
            return Err(Error::InvalidSpec(format!("character index {index} outside 0..{order}")));
        }
        Ok(Self { index, dlog })
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn modulus(&self) -> &Modulus {
        self.dlog.modulus()
    }

    pub fn is_trivial(&self) -> bool {
        self.index == 0
    }

    pub fn value(&self, x: u64) -> Complex64 {
        match self.dlog.log(x) {
            None => ZERO,
            Some(k) => {
                let order = self.dlog.group_order() as u64;
                crate::periodic::e(((self.index * k as u64) % order) as f64 / order as f64)
            }
        }
    }

    pub fn table(&self) -> PeriodicFunction {
        PeriodicFunction::from_fn(self.modulus().clone(), |x| self.value(x))
    }
}

/// `tau(chi) = q^{-1/2} sum_x chi(x) e(x/q)` for nontrivial `chi`.
pub fn gauss_sum(chi: &DirichletCharacter) -> Result<Complex64> {
    if chi.is_trivial() {
        return Err(Error::TrivialCharacter);
    }
    Ok(gauss_sums(&chi.dlog)[chi.index as usize])
}

/// `tau(chi_j)` for every index `j`; the trivial character gets `-q^{-1/2}`
/// because `chi_0(0) = 0`.
fn gauss_sums(dlog: &DlogTable) -> Vec<Complex64> {
    let q = dlog.modulus().value();
    let order = dlog.group_order();
    let roots_q = RootTable::new(q);
    let roots_u = RootTable::new(order as u64);
    let scale = 1.0 / (q as f64).sqrt();
    (0..order)
        .into_par_iter()
        .map(|j| {
            let mut acc = ZERO;
            for k in 0..order {
                acc += roots_u.get(j * k % order) * roots_q.get(dlog.exp(k as u64) as usize);
            }
            acc * scale
        })
        .collect()
}

/// `M(chi_j) = q^{-1/2} sum_{x != 0} K(x) conj(chi_j(x))`, indexed by `j = 0..q-1`.
pub fn mellin_transform(k: &PeriodicFunction) -> Result<Vec<Complex64>> {
    require_prime(k.modulus())?;
    let dlog = DlogTable::new(k.modulus())?;
    Ok(mellin_with(k, &dlog))
}

fn mellin_with(k: &PeriodicFunction, dlog: &DlogTable) -> Vec<Complex64> {
    let order = dlog.group_order();
    let roots_u = RootTable::new(order as u64);
    let on_units: Vec<Complex64> = (0..order).map(|e| k.values()[dlog.exp(e as u64) as usize]).collect();
    let scale = 1.0 / (k.q() as f64).sqrt();
    (0..order)
        .into_par_iter()
        .map(|j| {
            let mut acc = ZERO;
            for (e, &v) in on_units.iter().enumerate() {
                acc += v * roots_u.e(-(((j * e) % order) as i64));
            }
            acc * scale
        })
        .collect()
}

/// `L(n) = q^{-1/2} sum_x K(x) Kl_3(nx)` with `L(0) = 0`.
///
/// The table is evaluated twice, directly and as
/// `(sqrt(q)/(q-1)) sum_chi tau(chi)^3 M(chi) conj(chi(n))`; the two must agree.
pub fn kl3_twist(k: &PeriodicFunction) -> Result<PeriodicFunction> {
    require_prime(k.modulus())?;
    let q = k.q();
    let m = k.modulus();
    let kl3 = hyper_kloosterman_table(m, 3)?;
    let scale = 1.0 / (q as f64).sqrt();
    let direct = PeriodicFunction::from_fn(m.clone(), |n| {
        if n == 0 {
            return ZERO;
        }
        let mut acc = ZERO;
        for x in 1..q {
            acc += k.values()[x as usize] * kl3[(n * x % q) as usize];
        }
        acc * scale
    });

    let dlog = DlogTable::new(m)?;
    let order = dlog.group_order();
    let taus = gauss_sums(&dlog);
    let mellin = mellin_with(k, &dlog);
    let weights: Vec<Complex64> = taus.iter().zip(&mellin).map(|(t, mv)| t.powu(3) * mv).collect();
    let roots_u = RootTable::new(order as u64);
    let outer = (q as f64).sqrt() / order as f64;
    let tol = TWIST_TOL * k.l2_norm_sq().sqrt();
    for n in 1..q {
        let ln = dlog.log(n).unwrap() as usize;
        let mut acc = ZERO;
        for (j, w) in weights.iter().enumerate() {
            acc += w * roots_u.e(-(((j * ln) % order) as i64));
        }
        let defect = (acc * outer - direct.values()[n as usize]).norm();
        if defect > tol {
            return Err(Error::identity("Kl_3 twist via Gauss sums", format!("n = {n}"), defect, tol));
        }
    }
    Ok(direct)
}

impl fmt::Display for TraceVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let poly = |p: &[i64]| p.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
        match self {
            TraceVariant::HyperKloosterman { rank: 2 } => write!(f, "kl2"),
            TraceVariant::HyperKloosterman { rank: 3 } => write!(f, "kl3"),
            TraceVariant::HyperKloosterman { rank } => write!(f, "kl:{rank}"),
            TraceVariant::LegendreSymbol => write!(f, "legendre"),
            TraceVariant::Delta { point } => write!(f, "delta:{point}"),
            TraceVariant::AdditiveCharacter { slope } => write!(f, "additive:{slope}"),
            TraceVariant::MixedCharacter {
                indices,
                numerators,
                phase,
            } => {
                let js = indices.iter().map(u64::to_string).collect::<Vec<_>>().join("/");
                let fs = numerators.iter().map(|p| poly(p)).collect::<Vec<_>>().join("/");
                write!(f, "mixed:j={js},f={fs},g={}", poly(phase))
            }
            TraceVariant::CustomTable(v) => write!(f, "custom[{}]", v.len()),
        }
    }
}

impl FromStr for TraceVariant {
    type Err = Error;

    /// Parses `kl2`, `kl3`, `kl:R`, `legendre`, `delta:a`, `additive:a`, or
    /// `mixed:j=J1/J2,f=F1/F2,g=G` where each polynomial is a space-separated
    /// coefficient list in ascending degree.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |msg: &str| Error::InvalidSpec(format!("{msg} in `{s}`"));
        let int = |t: &str| t.trim().parse::<i64>().map_err(|_| bad("expected an integer"));
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        match (head, rest) {
            ("kl2", None) => Ok(TraceVariant::HyperKloosterman { rank: 2 }),
            ("kl3", None) => Ok(TraceVariant::HyperKloosterman { rank: 3 }),
            ("kl", Some(r)) => {
                let rank: u32 = r.trim().parse().map_err(|_| bad("expected a rank"))?;
                if rank < 2 {
                    return Err(bad("rank must be at least 2"));
                }
                Ok(TraceVariant::HyperKloosterman { rank })
            }
            ("legendre", None) => Ok(TraceVariant::LegendreSymbol),
            ("delta", Some(a)) => Ok(TraceVariant::Delta { point: int(a)? }),
            ("additive", Some(a)) => Ok(TraceVariant::AdditiveCharacter { slope: int(a)? }),
            ("mixed", Some(body)) => {
                let mut indices = None;
                let mut numerators = None;
                let mut phase = None;
                let poly = |t: &str| -> Result<Vec<i64>> {
                    let coeffs = t.split_whitespace().map(int).collect::<Result<Vec<_>>>()?;
                    if coeffs.is_empty() {
                        return Err(bad("empty polynomial"));
                    }
                    Ok(coeffs)
                };
                for field in body.split(',') {
                    let (key, value) = field.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                    match key.trim() {
                        "j" => {
                            indices = Some(
                                value
                                    .split('/')
                                    .map(|t| t.trim().parse::<u64>().map_err(|_| bad("bad character index")))
                                    .collect::<Result<Vec<_>>>()?,
                            )
                        }
                        "f" => numerators = Some(value.split('/').map(poly).collect::<Result<Vec<_>>>()?),
                        "g" => phase = Some(poly(value)?),
                        other => return Err(bad(&format!("unknown field `{other}`"))),
                    }
                }
                let indices = indices.unwrap_or_default();
                let numerators = numerators.unwrap_or_default();
                if indices.len() != numerators.len() {
                    return Err(bad("j and f must list the same number of entries"));
                }
                Ok(TraceVariant::MixedCharacter {
                    indices,
                    numerators,
                    phase: phase.unwrap_or_else(|| vec![0]),
                })
            }
            _ => Err(bad("unrecognized trace function")),
        }
    }
}
