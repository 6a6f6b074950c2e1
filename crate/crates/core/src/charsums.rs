//! Complete sums of products of Kloosterman sums to composite moduli,
//! Ramanujan sums, and an audit of the bounds these sums satisfy.
//!
//! For primes `p1, p2, l1, l2` and `m | r l_i`, with `M_i = r l_i / m` and
//! `M = r [l1, l2] / m`,
//!
//! `C(n) = sum_{b mod M} Kl_2(p1^{-1} q b; M_1) conj(Kl_2(p2^{-1} q b; M_2)) e(bn / M)`,
//!
//! where `p_i^{-1}` is taken modulo `M_i`.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::modarith::{divisors, gcd, inverse_mod, lcm, mobius, omega, Modulus};
use crate::periodic::{e, RootTable};
use crate::tracefn::kloosterman;

/// Relative slack when comparing a sum against its bound.
pub const AUDIT_TOL: f64 = 1e-9;

/// One complete sum `C(n, p1, p2, l1, l2, r, m)` with outer prime `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CInstance {
    pub n: i64,
    pub p1: u64,
    pub p2: u64,
    pub l1: u64,
    pub l2: u64,
    pub r: u64,
    pub m: u64,
    pub q: u64,
}

impl fmt::Display for CInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} p1={} p2={} l1={} l2={} r={} m={} q={}",
            self.n, self.p1, self.p2, self.l1, self.l2, self.r, self.m, self.q
        )
    }
}

impl CInstance {
    /// `(M_1, M_2, M)`, after checking `m | r l_i`.
    pub fn moduli(&self) -> Result<(u64, u64, u64)> {
        if self.m == 0 || self.r == 0 || self.l1 == 0 || self.l2 == 0 {
            return Err(Error::InvalidInstance(format!("zero parameter in {self}")));
        }
        let (a, b) = (self.r * self.l1, self.r * self.l2);
        if a % self.m != 0 || b % self.m != 0 {
            return Err(Error::InvalidInstance(format!("m does not divide r l1 and r l2 in {self}")));
        }
        Ok((a / self.m, b / self.m, self.r * lcm(self.l1, self.l2) / self.m))
    }

    /// `Delta = q (l2^2 p2 - l1^2 p1) / (l1, l2)^2`.
    pub fn delta(&self) -> i128 {
        let g = gcd(self.l1, self.l2) as i128;
        let l1 = self.l1 as i128;
        let l2 = self.l2 as i128;
        self.q as i128 * (l2 * l2 * self.p2 as i128 - l1 * l1 * self.p1 as i128) / (g * g)
    }

    /// `(p1^{-1} mod M_1, p2^{-1} mod M_2)`.
    fn inverses(&self, m1: u64, m2: u64) -> Result<(u64, u64)> {
        let inv = |p: u64, modulus: u64| {
            inverse_mod(p as i64, modulus)
                .ok_or_else(|| Error::InvalidInstance(format!("{p} is not invertible modulo {modulus} in {self}")))
        };
        Ok((inv(self.p1, m1)?, inv(self.p2, m2)?))
    }
}

/// `Kl_2(x; M)` for every residue `x mod M`.
fn kloosterman_row(modulus: u64) -> Vec<f64> {
    let m = Modulus::new(modulus).expect("positive modulus");
    (0..modulus).map(|x| kloosterman(x as i64, &m).re).collect()
}

#[derive(Default)]
struct RowCache {
    rows: HashMap<u64, Vec<f64>>,
}

impl RowCache {
    fn prepare(&mut self, moduli: impl IntoIterator<Item = u64>) {
        let missing: Vec<u64> = moduli.into_iter().filter(|m| !self.rows.contains_key(m)).collect();
        let mut missing = missing;
        missing.sort_unstable();
        missing.dedup();
        let rows: Vec<(u64, Vec<f64>)> = missing.into_par_iter().map(|m| (m, kloosterman_row(m))).collect();
        self.rows.extend(rows);
    }

    fn get(&self, m: u64) -> &[f64] {
        &self.rows[&m]
    }
}

/// `(C, sum_b |Kl_2(..; M_1) Kl_2(..; M_2)|)`; the second value sets the
/// scale for tolerances.
fn c_sum_with_rows(inst: &CInstance, row1: &[f64], row2: &[f64]) -> Result<(Complex64, f64)> {
    let (m1, m2, big) = inst.moduli()?;
    let (i1, i2) = inst.inverses(m1, m2)?;
    let a1 = (i1 as u128 * inst.q as u128 % m1 as u128) as u64;
    let a2 = (i2 as u128 * inst.q as u128 % m2 as u128) as u64;
    let roots = RootTable::new(big);
    let n = inst.n.rem_euclid(big as i64) as u64;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for b in 0..big {
        let k1 = row1[(a1 * (b % m1) % m1) as usize];
        let k2 = row2[(a2 * (b % m2) % m2) as usize];
        let w = k1 * k2;
        scale += w.abs();
        acc += roots.get((b * n % big) as usize) * w;
    }
    Ok((acc, scale))
}

/// `C(n, p1, p2, l1, l2, r, m)` by direct summation over `b mod M`.
pub fn c_sum(inst: &CInstance) -> Result<Complex64> {
    let (m1, m2, _) = inst.moduli()?;
    inst.inverses(m1, m2)?;
    Ok(c_sum_with_rows(inst, &kloosterman_row(m1), &kloosterman_row(m2))?.0)
}

/// `c_m(n) = sum_{d | (m, n)} d mu(m/d)`.
pub fn ramanujan_sum(n: i64, m: &Modulus) -> i64 {
    let mv = m.value();
    let g = gcd(n.unsigned_abs(), mv);
    divisors(g).into_iter().map(|d| d as i64 * mobius(mv / d) as i64).sum()
}

/// `c_m(n)` as the exponential sum over units, for cross-checking.
pub fn ramanujan_sum_direct(n: i64, m: &Modulus) -> Complex64 {
    let mv = m.value();
    (0..mv)
        .filter(|&x| gcd(x, mv) == 1)
        .map(|x| e((n.rem_euclid(mv as i64) as u128 * x as u128 % mv as u128) as f64 / mv as f64))
        .sum()
}

/// Which bound an audit row tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LemmaPart {
    /// `n = 0`, `l1 != l2`: `C = 0`.
    Vanishing,
    /// `n = 0`, `l1 = l2`: `|C| <= (r l / m, p2 - p1)`.
    Ramanujan,
    /// `Delta != 0`: ratio against `(r[l1,l2]/m)^{1/2} (Delta, n, M_1, M_2) / (n, M_1, M_2)^{1/2}`, logged only.
    GenericRatio,
    /// `Delta = 0` within the congruence classes `p = 1`, `l = 3 mod 4`:
    /// `p1 = p2`, `l1 = l2` and `|C| <= 2^{omega(rl/m)} (rl/m)^{1/2} (n, rl/m)^{1/2}`.
    Diagonal,
}

impl LemmaPart {
    pub fn number(self) -> u8 {
        match self {
            LemmaPart::Vanishing => 1,
            LemmaPart::Ramanujan => 2,
            LemmaPart::GenericRatio => 3,
            LemmaPart::Diagonal => 4,
        }
    }

    pub fn is_asserted(self) -> bool {
        self != LemmaPart::GenericRatio
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    pub instance: CInstance,
    pub part: LemmaPart,
    pub abs_c: f64,
    pub bound: f64,
    pub pass: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LemmaReport {
    pub rows: Vec<AuditRow>,
    /// Instances where some `p_i` is not invertible modulo `M_i`.
    pub skipped: usize,
    pub max_generic_ratio: f64,
    /// Largest `|C| / ((rl/m)^{1/2} (n, rl/m)^{1/2})` on the diagonal.
    pub max_diagonal_constant: f64,
}

impl LemmaReport {
    pub fn checked(&self, part: LemmaPart) -> usize {
        self.rows.iter().filter(|r| r.part == part).count()
    }

    pub fn passed(&self, part: LemmaPart) -> usize {
        self.rows.iter().filter(|r| r.part == part && r.pass).count()
    }

    pub fn violations(&self) -> impl Iterator<Item = &AuditRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// The first failing row as an error.
    pub fn ensure(self) -> Result<Self> {
        if let Some(row) = self.violations().next() {
            return Err(Error::LemmaViolation {
                part: row.part.number(),
                instance: row.instance.to_string(),
                detail: row
                    .detail
                    .clone()
                    .unwrap_or_else(|| format!("|C| = {:.6e} exceeds {:.6e}", row.abs_c, row.bound)),
            });
        }
        Ok(self)
    }
}

fn gcd_signed(a: i128, b: u64) -> u64 {
    gcd((a.unsigned_abs() % b as u128) as u64, b)
}

fn audit_one(inst: &CInstance, cache: &RowCache) -> Result<AuditRow> {
    let (m1, m2, big) = inst.moduli()?;
    let (c, scale) = c_sum_with_rows(inst, cache.get(m1), cache.get(m2))?;
    let abs_c = c.norm();
    let slack = AUDIT_TOL * scale.max(1.0);
    let delta = inst.delta();
    let classes = inst.p1 % 4 == 1 && inst.p2 % 4 == 1 && inst.l1 % 4 == 3 && inst.l2 % 4 == 3;
    let row = |part, bound: f64, pass, detail| AuditRow {
        instance: *inst,
        part,
        abs_c,
        bound,
        pass,
        detail,
    };
    if inst.n == 0 && inst.l1 != inst.l2 {
        return Ok(row(LemmaPart::Vanishing, 0.0, abs_c <= slack, None));
    }
    if inst.n == 0 && inst.l1 == inst.l2 {
        let bound = gcd(m1, inst.p2.abs_diff(inst.p1)) as f64;
        return Ok(row(LemmaPart::Ramanujan, bound, abs_c <= bound + slack, None));
    }
    if delta == 0 && classes {
        if inst.p1 != inst.p2 || inst.l1 != inst.l2 {
            return Ok(row(
                LemmaPart::Diagonal,
                0.0,
                false,
                Some("Delta = 0 without p1 = p2 and l1 = l2".into()),
            ));
        }
        let n_gcd = gcd(inst.n.unsigned_abs(), m1) as f64;
        let base = (m1 as f64).sqrt() * n_gcd.sqrt();
        let bound = f64::from(1u32 << omega(m1)) * base;
        return Ok(row(LemmaPart::Diagonal, bound, abs_c <= bound + slack, None));
    }
    let n_gcd = gcd(gcd(inst.n.unsigned_abs(), m1), m2);
    let full_gcd = gcd_signed(delta, n_gcd);
    let reference = (big as f64).sqrt() * full_gcd as f64 / (n_gcd as f64).sqrt();
    Ok(row(LemmaPart::GenericRatio, reference, true, None))
}

/// Evaluates every instance and records pass/fail per bound without failing.
pub fn evaluate_audit(instances: &[CInstance]) -> Result<LemmaReport> {
    let mut valid = Vec::with_capacity(instances.len());
    let mut skipped = 0;
    for inst in instances {
        let (m1, m2, _) = inst.moduli()?;
        if inst.inverses(m1, m2).is_ok() {
            valid.push(*inst);
        } else {
            skipped += 1;
        }
    }
    let mut cache = RowCache::default();
    cache.prepare(valid.iter().flat_map(|i| {
        let (m1, m2, _) = i.moduli().expect("validated");
        [m1, m2]
    }));
    let rows: Vec<AuditRow> = valid
        .par_iter()
        .map(|inst| audit_one(inst, &cache))
        .collect::<Result<_>>()?;
    let mut report = LemmaReport {
        skipped,
        ..LemmaReport::default()
    };
    for r in &rows {
        match r.part {
            LemmaPart::GenericRatio => report.max_generic_ratio = report.max_generic_ratio.max(r.abs_c / r.bound),
            LemmaPart::Diagonal if r.bound > 0.0 => {
                let m1 = r.instance.moduli()?.0;
                let base = r.bound / f64::from(1u32 << omega(m1));
                report.max_diagonal_constant = report.max_diagonal_constant.max(r.abs_c / base);
            }
            _ => {}
        }
    }
    report.rows = rows;
    Ok(report)
}

/// [`evaluate_audit`] followed by a `LemmaViolation` for the first failing
/// row of parts (1), (2) or (4).
pub fn audit_sums(instances: &[CInstance]) -> Result<LemmaReport> {
    evaluate_audit(instances)?.ensure()
}

/// All instances with `r <= r_max`, `l_i` from `ls`, `p_i` from `ps`,
/// `m | (r l1, r l2)`, `|n| <= n_max` and `q` from `qs`.
pub fn audit_grid(r_max: u64, ls: &[u64], ps: &[u64], n_max: i64, qs: &[u64]) -> Vec<CInstance> {
    let mut out = Vec::new();
    for &q in qs {
        for r in 1..=r_max {
            for &l1 in ls {
                for &l2 in ls {
                    for m in divisors(gcd(r * l1, r * l2)) {
                        for &p1 in ps {
                            for &p2 in ps {
                                for n in -n_max..=n_max {
                                    out.push(CInstance {
                                        n,
                                        p1,
                                        p2,
                                        l1,
                                        l2,
                                        r,
                                        m,
                                        q,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
