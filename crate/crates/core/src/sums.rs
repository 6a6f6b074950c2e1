//! Smooth windows and the twisted sums `S_V(K, X) = sum_n c(n) K(n) V(n/X)`:
//! Poisson summation checks, cancellation scans, and the Mobius/divisor
//! rewritings of the `lambda(n^2)` and `lambda(n)^2` variants.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::heckecoef::HeckeSystem;
use crate::modarith::{mobius, Modulus};
use crate::periodic::{e, PeriodicFunction};
use crate::tracefn::{TraceFunctionSpec, TraceVariant};

/// Absolute target for `V^` quadrature and for truncation tails.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Relative tolerance of the Poisson check.
pub const POISSON_TOL: f64 = 1e-6;

/// Relative tolerance of the Mobius and divisor rewritings.
pub const TELESCOPE_TOL: f64 = 1e-8;

/// Number of integrations by parts in the truncation tail bounds.
pub const TAIL_DERIVATIVES: usize = 8;

/// Multiplier on finite-difference derivative norms used in tail bounds.
const TAIL_SAFETY: f64 = 2.0;

const MAX_SIMPSON_DEPTH: u32 = 48;
const MAX_HMAX: u64 = 1 << 24;
const NORM_GRID: usize = 4000;

fn sigma(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`.
fn smooth_step(t: f64) -> f64 {
    let a = sigma(t);
    let b = sigma(1.0 - t);
    a / (a + b)
}

/// `V_Z(x) = S(Z'(x - 1)) S(Z'(2 - x))` with `Z' = max(Z, 2)`: smooth, supported
/// in `(1, 2)`, equal to 1 on `[1 + 1/Z', 2 - 1/Z']`, derivatives of size `Z^i`.
#[derive(Debug, Clone)]
pub struct SmoothWindow {
    z: f64,
    derivative_l1: OnceLock<Vec<f64>>,
    integral: OnceLock<f64>,
}

impl SmoothWindow {
    pub fn new(z: f64) -> Result<Self> {
        if !(z >= 1.0 && z.is_finite()) {
            return Err(Error::OutOfRange(format!("window sharpness Z = {z} must be >= 1")));
        }
        Ok(Self {
            z,
            derivative_l1: OnceLock::new(),
            integral: OnceLock::new(),
        })
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    fn ramp(&self) -> f64 {
        self.z.max(2.0)
    }

    pub fn value(&self, x: f64) -> f64 {
        if x <= 1.0 || x >= 2.0 {
            return 0.0;
        }
        let zr = self.ramp();
        smooth_step(zr * (x - 1.0)) * smooth_step(zr * (2.0 - x))
    }

    /// `V^{(k)}(x)` for `k <= 8`; derivatives by central differences.
    pub fn eval(&self, x: f64, order: usize) -> f64 {
        assert!(order <= TAIL_DERIVATIVES, "derivative order {order} > {TAIL_DERIVATIVES}");
        if order == 0 {
            return self.value(x);
        }
        let h = f64::EPSILON.powf(1.0 / (order as f64 + 2.0)) / self.ramp();
        let mut binom = 1.0;
        let mut acc = 0.0;
        for i in 0..=order {
            let offset = (order as f64 / 2.0 - i as f64) * h;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * self.value(x + offset);
            binom = binom * (order - i) as f64 / (i + 1) as f64;
        }
        acc / h.powi(order as i32)
    }

    /// `||V^{(k)}||_1` for `k = 0..=8`, estimated on a uniform grid.
    pub fn derivative_l1_norms(&self) -> &[f64] {
        self.derivative_l1.get_or_init(|| {
            (0..=TAIL_DERIVATIVES)
                .into_par_iter()
                .map(|k| {
                    let step = 1.0 / NORM_GRID as f64;
                    (0..NORM_GRID).map(|i| self.eval(1.0 + (i as f64 + 0.5) * step, k).abs()).sum::<f64>() * step
                })
                .collect()
        })
    }

    /// `sup |V^{(k)}|` on the grid.
    pub fn derivative_sup(&self, order: usize) -> f64 {
        let step = 1.0 / NORM_GRID as f64;
        (0..=NORM_GRID).map(|i| self.eval(1.0 + i as f64 * step, order).abs()).fold(0.0, f64::max)
    }

    /// `int V`.
    pub fn integral(&self) -> Result<f64> {
        if let Some(v) = self.integral.get() {
            return Ok(*v);
        }
        let v = self.fourier(0.0)?.re;
        Ok(*self.integral.get_or_init(|| v))
    }

    /// `V^(y) = int V(x) e(-xy) dx` by adaptive Simpson on `[1, 2]`.
    pub fn fourier(&self, y: f64) -> Result<Complex64> {
        let panels = (4.0 * y.abs()).ceil().max(8.0) as usize;
        let tol = QUADRATURE_TOL / panels as f64;
        let f = |x: f64| e(-x * y) * self.value(x);
        let width = 1.0 / panels as f64;
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..panels {
            let a = 1.0 + i as f64 * width;
            total += adaptive_simpson(&f, a, a + width, tol)?;
        }
        Ok(total)
    }

    /// Upper bound for `|V^(y)|` from `j` integrations by parts.
    pub fn fourier_decay_bound(&self, y: f64, j: usize) -> f64 {
        TAIL_SAFETY * self.derivative_l1_norms()[j] / (std::f64::consts::TAU * y.abs()).powi(j as i32)
    }

    /// Bound for `sum_{|h| > hmax} |V^(h s)|` with `j = 8`, via
    /// `sum_{h > H} h^{-8} <= H^{-7} / 7`.
    pub fn tail_bound(&self, scale: f64, hmax: u64) -> f64 {
        let j = TAIL_DERIVATIVES;
        let per = TAIL_SAFETY * self.derivative_l1_norms()[j] / (std::f64::consts::TAU * scale).powi(j as i32);
        2.0 * per * (hmax as f64).powi(-(j as i32 - 1)) / (j as f64 - 1.0)
    }
}

fn simpson<F: Fn(f64) -> Complex64>(f: &F, a: f64, fa: Complex64, b: f64, fb: Complex64) -> (f64, Complex64, Complex64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (fa + fm * 4.0 + fb) * ((b - a) / 6.0))
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    fa: Complex64,
    b: f64,
    fb: Complex64,
    m: f64,
    fm: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Result<Complex64> {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if delta.norm() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureFailure { a, b, tolerance: tol });
    }
    Ok(simpson_rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)?
        + simpson_rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)?)
}

/// Adaptive Simpson quadrature of a complex integrand to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: f64) -> Result<Complex64> {
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, MAX_SIMPSON_DEPTH)
}

/// Arithmetic weights `c(n)` in `S_V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Coefficient {
    /// `lambda(1, n)`.
    Gl3,
    /// `lambda(n^2)`.
    Gl2SquareArg,
    /// `lambda(n)^2`.
    Gl2Squared,
    /// `1`.
    Unit,
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coefficient::Gl3 => "gl3",
            Coefficient::Gl2SquareArg => "gl2-square-arg",
            Coefficient::Gl2Squared => "gl2-squared",
            Coefficient::Unit => "unit",
        })
    }
}

impl FromStr for Coefficient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gl3" => Ok(Coefficient::Gl3),
            "gl2-square-arg" => Ok(Coefficient::Gl2SquareArg),
            "gl2-squared" => Ok(Coefficient::Gl2Squared),
            "unit" => Ok(Coefficient::Unit),
            _ => Err(Error::Parse(format!(
                "unknown coefficient `{s}` (expected gl3, gl2-square-arg, gl2-squared or unit)"
            ))),
        }
    }
}

/// `c(0..=upto)`.
pub fn coefficient_table(h: &HeckeSystem, coeff: Coefficient, upto: usize) -> Result<Vec<f64>> {
    let too_small = || Error::OutOfRange(format!("coefficients up to {upto} need a table of that size, have {}", h.limit()));
    match coeff {
        Coefficient::Unit => Ok(vec![1.0; upto + 1]),
        Coefficient::Gl3 => h.lambda_1n_slice().get(..=upto).map(<[f64]>::to_vec).ok_or_else(too_small),
        Coefficient::Gl2Squared => h.squared_table(upto),
        Coefficient::Gl2SquareArg => {
            if upto > h.limit() {
                return Err(too_small());
            }
            h.square_arg_table(upto)
        }
    }
}

/// Integers `n` with `V(n/X) != 0`, i.e. `X < n < 2X`.
pub fn window_range(x: f64) -> std::ops::RangeInclusive<usize> {
    let lo = x.floor() as usize + 1;
    let hi = (2.0 * x).ceil() as usize - 1;
    lo..=hi
}

fn check_length(x: f64) -> Result<()> {
    if !(x >= 1.0 && x.is_finite()) {
        return Err(Error::OutOfRange(format!("sum length X = {x} must be >= 1")));
    }
    Ok(())
}

/// `sum_n c(n) K(n) V(n/X)` with weights from a precomputed table.
pub fn s_v_with_table(k: &PeriodicFunction, table: &[f64], w: &SmoothWindow, x: f64) -> Result<Complex64> {
    check_length(x)?;
    let range = window_range(x);
    if *range.end() >= table.len() {
        return Err(Error::OutOfRange(format!("need coefficients up to {}, have {}", range.end(), table.len() - 1)));
    }
    Ok(range.map(|n| k.at(n as i64) * (table[n] * w.value(n as f64 / x))).sum())
}

/// `S_V(K, X) = sum_n c(n) K(n) V(n/X)`.
pub fn s_v(k: &PeriodicFunction, h: &HeckeSystem, w: &SmoothWindow, x: f64, coeff: Coefficient) -> Result<Complex64> {
    check_length(x)?;
    let table = coefficient_table(h, coeff, *window_range(x).end())?;
    s_v_with_table(k, &table, w, x)
}

/// Both sides of the Poisson formula and their relative defect.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PoissonReport {
    pub direct: Complex64,
    pub dual: Complex64,
    pub hmax: u64,
    pub tail_bound: f64,
    pub defect: f64,
}

/// Compares `sum_n K(n) V(n/X)` with `(X/sqrt q) sum_h K^(h) V^(hX/q)`.
///
/// The dual sum runs over `|h| <= hmax`, with `hmax` doubled until the
/// eight-derivative tail bound falls below [`QUADRATURE_TOL`]. The defect is
/// relative to `sum_n |K(n)| V(n/X)`.
pub fn poisson_check(k: &PeriodicFunction, w: &SmoothWindow, x: f64) -> Result<PoissonReport> {
    check_length(x)?;
    let q = k.q();
    let sqrt_q = (q as f64).sqrt();
    let range = window_range(x);
    let direct: Complex64 = range.clone().map(|n| k.at(n as i64) * w.value(n as f64 / x)).sum();
    let scale: f64 = range.map(|n| k.at(n as i64).norm() * w.value(n as f64 / x)).sum();

    let khat = k.dft_values();
    let khat_inf = k.sup_norm_dft();
    let step = x / q as f64;
    let prefactor = x / sqrt_q;
    let mut hmax = 1u64;
    let mut tail = prefactor * khat_inf * w.tail_bound(step, hmax);
    while tail > QUADRATURE_TOL {
        if hmax >= MAX_HMAX {
            return Err(Error::TruncationTooCoarse { hmax, tail });
        }
        hmax *= 2;
        tail = prefactor * khat_inf * w.tail_bound(step, hmax);
    }
    let terms: Vec<Complex64> = (0..=hmax)
        .into_par_iter()
        .map(|h| -> Result<Complex64> {
            let vhat = w.fourier(h as f64 * step)?;
            let pos = khat[(h % q) as usize] * vhat;
            if h == 0 {
                return Ok(pos);
            }
            let neg = khat[((q - h % q) % q) as usize] * vhat.conj();
            Ok(pos + neg)
        })
        .collect::<Result<_>>()?;
    let dual = terms.into_iter().sum::<Complex64>() * prefactor;
    let defect = if scale == 0.0 { (direct - dual).norm() } else { (direct - dual).norm() / scale };
    Ok(PoissonReport {
        direct,
        dual,
        hmax,
        tail_bound: tail,
        defect,
    })
}

/// Relative defect of the Poisson formula.
pub fn poisson_defect(k: &PeriodicFunction, w: &SmoothWindow, x: f64) -> Result<f64> {
    Ok(poisson_check(k, w, x)?.defect)
}

/// Sum length as a function of the modulus: a constant or `c * q^e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum XRule {
    Fixed(f64),
    Power { coefficient: f64, exponent: f64 },
}

impl XRule {
    pub fn length(&self, q: u64) -> f64 {
        match *self {
            XRule::Fixed(x) => x,
            XRule::Power { coefficient, exponent } => coefficient * (q as f64).powf(exponent),
        }
    }
}

impl fmt::Display for XRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            XRule::Fixed(x) => write!(f, "{x}"),
            XRule::Power { coefficient, exponent } if coefficient == 1.0 => write!(f, "q^{exponent}"),
            XRule::Power { coefficient, exponent } => write!(f, "{coefficient}*q^{exponent}"),
        }
    }
}

impl FromStr for XRule {
    type Err = Error;

    /// Accepts `1000`, `q^1.5` or `2*q^1.5`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad length rule `{s}` (expected N, q^E or C*q^E)"));
        let t = s.trim();
        let num = |v: &str| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad);
        if let Some((c, rest)) = t.split_once('*') {
            let exponent = rest.trim().strip_prefix("q^").ok_or_else(bad)?;
            return Ok(XRule::Power {
                coefficient: num(c)?,
                exponent: num(exponent)?,
            });
        }
        if let Some(exponent) = t.strip_prefix("q^") {
            return Ok(XRule::Power {
                coefficient: 1.0,
                exponent: num(exponent)?,
            });
        }
        Ok(XRule::Fixed(num(t)?))
    }
}

/// One cancellation-scan run: a trace family over several primes.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub trace: TraceVariant,
    pub q_list: Vec<u64>,
    pub x_rule: XRule,
    pub z: f64,
    pub coeff: Coefficient,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub q: u64,
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    pub family: String,
    #[serde(rename = "S_re")]
    pub s_re: f64,
    #[serde(rename = "S_im")]
    pub s_im: f64,
    pub khat_inf: f64,
    pub bound: f64,
    pub ratio: f64,
    pub trivial_ratio: f64,
    /// `Z^{2/3} q^{4/3} <= X <= Z^{-2} q^2`.
    pub in_window: bool,
    /// `|K^|_inf >= sqrt(q) max|K| / 2`: the bound is no better than trivial.
    pub trivial_regime: bool,
}

impl ScanRow {
    pub fn abs_s(&self) -> f64 {
        Complex64::new(self.s_re, self.s_im).norm()
    }
}

/// `|K^|_inf Z^{10/9} q^{2/9} X^{5/6}`.
pub fn theorem_bound(khat_inf: f64, z: f64, q: u64, x: f64) -> f64 {
    khat_inf * z.powf(10.0 / 9.0) * (q as f64).powf(2.0 / 9.0) * x.powf(5.0 / 6.0)
}

/// `Z^{2/3} q^{4/3} <= X <= Z^{-2} q^2`.
pub fn in_theorem_window(z: f64, q: u64, x: f64) -> bool {
    let qf = q as f64;
    z.powf(2.0 / 3.0) * qf.powf(4.0 / 3.0) <= x && x <= qf * qf / (z * z)
}

/// `|S_V| / X` against the bound, one row per prime, sorted by `q`.
pub fn exponent_scan(cfg: &ScanConfig, h: &HeckeSystem) -> Result<Vec<ScanRow>> {
    let w = SmoothWindow::new(cfg.z)?;
    w.derivative_l1_norms();
    let mut rows: Vec<ScanRow> = cfg
        .q_list
        .par_iter()
        .map(|&q| -> Result<ScanRow> {
            let modulus = Modulus::new(q)?;
            let k = TraceFunctionSpec::new(cfg.trace.clone(), modulus).build()?;
            let x = cfg.x_rule.length(q);
            let s = s_v(&k, h, &w, x, cfg.coeff)?;
            let khat_inf = k.sup_norm_dft();
            let bound = theorem_bound(khat_inf, cfg.z, q, x);
            Ok(ScanRow {
                q,
                x,
                z: cfg.z,
                family: cfg.trace.to_string(),
                s_re: s.re,
                s_im: s.im,
                khat_inf,
                bound,
                ratio: s.norm() / bound,
                trivial_ratio: s.norm() / x,
                in_window: in_theorem_window(cfg.z, q, x),
                trivial_regime: khat_inf >= 0.5 * (q as f64).sqrt() * k.sup_norm(),
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.q.cmp(&b.q).then(a.x.total_cmp(&b.x)));
    Ok(rows)
}

/// The `lambda(n^2)` and `lambda(n)^2` sums, each computed directly and
/// through the Mobius/divisor decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct CorollaryReport {
    /// `sum_n lambda(n^2) K(n) V(n/X)`.
    pub square_arg_sum: Complex64,
    /// `sum_d mu(d) sum_n lambda(1,n) K(n d^2) V(n d^2 / X)`.
    pub square_arg_mobius: Complex64,
    /// `sum_n lambda(n)^2 K(n) V(n/X)`.
    pub squared_sum: Complex64,
    /// `sum_d mu(d) T_{d,X}`.
    pub squared_mobius: Complex64,
    /// `(d, mu(d), T_{d,X})` for square-free `d` with `d^2 < 2X`.
    pub d_decomposition: Vec<(u64, i32, Complex64)>,
    pub square_arg_defect: f64,
    pub squared_defect: f64,
}

/// `T_{d,X} = sum_k K(d^2 k) V(d^2 k / X) D(k)` with `D(k) = sum_{c | k} lambda(1, c)`.
fn t_d(k: &PeriodicFunction, w: &SmoothWindow, x: f64, d: u64, divisor_sums: &[f64]) -> Complex64 {
    let d2 = (d * d) as usize;
    let range = window_range(x);
    let lo = range.start().div_ceil(d2);
    let hi = range.end() / d2;
    (lo..=hi)
        .map(|m| k.at((m * d2) as i64) * (divisor_sums[m] * w.value((m * d2) as f64 / x)))
        .sum()
}

/// Corollary sums with their telescoping checks at relative tolerance
/// [`TELESCOPE_TOL`].
pub fn corollary_sums(k: &PeriodicFunction, h: &HeckeSystem, w: &SmoothWindow, x: f64) -> Result<CorollaryReport> {
    check_length(x)?;
    let top = *window_range(x).end();
    let lam1 = coefficient_table(h, Coefficient::Gl3, top)?;
    let sq_arg = coefficient_table(h, Coefficient::Gl2SquareArg, top)?;
    let squared = coefficient_table(h, Coefficient::Gl2Squared, top)?;
    let weight = |n: usize| k.at(n as i64) * w.value(n as f64 / x);

    let square_arg_sum = s_v_with_table(k, &sq_arg, w, x)?;
    let squared_sum = s_v_with_table(k, &squared, w, x)?;
    let square_arg_scale: f64 = window_range(x).map(|n| (weight(n) * sq_arg[n]).norm()).sum();
    let squared_scale: f64 = window_range(x).map(|n| (weight(n) * squared[n]).norm()).sum();

    let mut divisor_sums = vec![0.0; top + 1];
    for c in 1..=top {
        for mult in (c..=top).step_by(c) {
            divisor_sums[mult] += lam1[c];
        }
    }

    let ds: Vec<u64> = (1..).take_while(|d| (d * d) as usize <= top).filter(|&d| mobius(d) != 0).collect();
    let mut square_arg_mobius = Complex64::new(0.0, 0.0);
    let mut decomposition = Vec::with_capacity(ds.len());
    for &d in &ds {
        let mu = mobius(d);
        let d2 = (d * d) as usize;
        let range = window_range(x);
        let inner: Complex64 = (range.start().div_ceil(d2)..=range.end() / d2)
            .map(|n| weight(n * d2) * lam1[n])
            .sum();
        square_arg_mobius += inner * mu as f64;
        decomposition.push((d, mu, t_d(k, w, x, d, &divisor_sums)));
    }
    let squared_mobius: Complex64 = decomposition.iter().map(|&(_, mu, t)| t * mu as f64).sum();

    let relative = |a: Complex64, b: Complex64, scale: f64| {
        if scale == 0.0 {
            (a - b).norm()
        } else {
            (a - b).norm() / scale
        }
    };
    let square_arg_defect = relative(square_arg_sum, square_arg_mobius, square_arg_scale);
    let squared_defect = relative(squared_sum, squared_mobius, squared_scale);
    if square_arg_defect > TELESCOPE_TOL {
        return Err(Error::identity("lambda(n^2) sum vs Mobius form", format!("X = {x}"), square_arg_defect, TELESCOPE_TOL));
    }
    if squared_defect > TELESCOPE_TOL {
        return Err(Error::identity("lambda(n)^2 sum vs sum_d mu(d) T_d", format!("X = {x}"), squared_defect, TELESCOPE_TOL));
    }
    Ok(CorollaryReport {
        square_arg_sum,
        square_arg_mobius,
        squared_sum,
        squared_mobius,
        d_decomposition: decomposition,
        square_arg_defect,
        squared_defect,
    })
}

/// Additive frequency for the GL(3) additive-twist experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Frequency {
    Real(f64),
    Rational { a: i64, q: u64 },
}

impl Frequency {
    fn phase(&self, n: usize) -> Complex64 {
        match *self {
            Frequency::Real(alpha) => e((alpha * n as f64).fract()),
            Frequency::Rational { a, q } => {
                e(((a.rem_euclid(q as i64) as u128 * n as u128) % q as u128) as f64 / q as f64)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MillerRow {
    pub frequency: Frequency,
    #[serde(rename = "X")]
    pub x: f64,
    pub abs_sum: f64,
    /// `|sum| / X^{3/4}`.
    pub normalized: f64,
}

/// `|sum_n lambda(1,n) e(alpha n) V(n/X)| / X^{3/4}` over frequencies and lengths.
pub fn additive_twist_scan(
    h: &HeckeSystem,
    w: &SmoothWindow,
    frequencies: &[Frequency],
    lengths: &[f64],
) -> Result<Vec<MillerRow>> {
    let cells: Vec<(Frequency, f64)> = lengths
        .iter()
        .flat_map(|&x| frequencies.iter().map(move |&f| (f, x)))
        .collect();
    cells
        .par_iter()
        .map(|&(frequency, x)| {
            check_length(x)?;
            let lam = coefficient_table(h, Coefficient::Gl3, *window_range(x).end())?;
            let sum: Complex64 = window_range(x)
                .map(|n| frequency.phase(n) * (lam[n] * w.value(n as f64 / x)))
                .sum();
            Ok(MillerRow {
                frequency,
                x,
                abs_sum: sum.norm(),
                normalized: sum.norm() / x.powf(0.75),
            })
        })
        .collect()
}
