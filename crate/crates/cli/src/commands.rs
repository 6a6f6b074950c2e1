use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use tracesum_core::amplifier::{decompose_fo, PrimePairMeasure};
use tracesum_core::bilinear::{BilinearInstance, BILINEAR_TOL};
use tracesum_core::charsums::{evaluate_audit, audit_grid, LemmaPart};
use tracesum_core::heckecoef::HeckeSystem;
use tracesum_core::modarith::Modulus;
use tracesum_core::periodic::PeriodicFunction;
use tracesum_core::sums::{exponent_scan, poisson_check, window_range, ScanConfig, SmoothWindow, XRule, POISSON_TOL};
use tracesum_core::tracefn::{hyper_kloosterman_table, TraceFunctionSpec, TraceVariant};

use crate::manifest::{flag_map, RunManifest};
use crate::{Cli, Command, Format, Verdict};

pub fn execute(cli: &Cli) -> Result<Verdict> {
    let (name, mut flags) = match &cli.command {
        Command::Dft(a) => ("dft", flag_map(a)),
        Command::SumScan(a) => ("sum-scan", flag_map(a)),
        Command::BilinearCheck(a) => ("bilinear-check", flag_map(a)),
        Command::AmplifierCheck(a) => ("amplifier-check", flag_map(a)),
        Command::LemmaCheck(a) => ("lemma-check", flag_map(a)),
        Command::HeckeTable(a) => ("hecke-table", flag_map(a)),
        Command::PoissonCheck(a) => ("poisson-check", flag_map(a)),
        Command::KlStats(a) => ("kl-stats", flag_map(a)),
    };
    flags.insert("format".into(), format!("{:?}", cli.format).to_lowercase());
    if let Some(out) = &cli.out {
        flags.insert("out".into(), out.display().to_string());
    }
    if let Some(t) = cli.threads {
        flags.insert("threads".into(), t.to_string());
    }
    let mut manifest = RunManifest::start(name, flags, cli.seed);

    let mut out = open_output(cli.out.as_deref())?;
    let verdict = match &cli.command {
        Command::Dft(a) => dft(a, cli.format, &mut out),
        Command::SumScan(a) => sum_scan(a, cli, &mut out),
        Command::BilinearCheck(a) => bilinear_check(a, cli, &mut out),
        Command::AmplifierCheck(a) => amplifier_check(a, &mut out),
        Command::LemmaCheck(a) => lemma_check(a, cli.format, &mut out),
        Command::HeckeTable(a) => hecke_table(a, cli.format, &mut out),
        Command::PoissonCheck(a) => poisson(a, cli.format, &mut out),
        Command::KlStats(a) => kl_stats(a, cli.format, &mut out),
    }?;
    out.flush()?;

    manifest.finish();
    let text = serde_json::to_string_pretty(&manifest)?;
    match &cli.out {
        Some(path) => {
            let path = manifest_path(path);
            std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?
        }
        None => eprintln!("{text}"),
    }
    Ok(verdict)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("--out {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit<T: Serialize>(rows: &[T], format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn build(trace: &str, q: u64) -> Result<PeriodicFunction> {
    let variant: TraceVariant = trace.parse()?;
    Ok(TraceFunctionSpec::new(variant, Modulus::new(q)?).build()?)
}

fn random_values(rng: &mut ChaCha8Rng, q: u64) -> Vec<Complex64> {
    (0..q).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

/// Coefficients needed for every sum length in `xs`.
fn hecke_for(xs: impl IntoIterator<Item = f64>) -> Result<HeckeSystem> {
    let limit = xs.into_iter().map(|x| *window_range(x).end()).max().unwrap_or(1).max(1);
    Ok(HeckeSystem::new(limit)?)
}

fn dft(a: &crate::DftArgs, format: Format, out: &mut dyn Write) -> Result<Verdict> {
    let k = build(&a.trace, a.q)?;
    let t = if a.inverse { k.inverse_dft() } else { k.dft() };
    match format {
        Format::Csv => t.to_csv(out)?,
        Format::Json => writeln!(out, "{}", t.to_json()?)?,
    }
    Ok(Verdict::Pass)
}

fn sum_scan(a: &crate::SumScanArgs, cli: &Cli, out: &mut dyn Write) -> Result<Verdict> {
    let cfg = ScanConfig {
        trace: a.trace.parse()?,
        q_list: a.q_list.clone(),
        x_rule: a.x_rule.parse()?,
        z: a.z,
        coeff: a.coeff.parse()?,
        seed: cli.seed,
    };
    let hecke = hecke_for(cfg.q_list.iter().map(|&q| cfg.x_rule.length(q)))?;
    let rows = exponent_scan(&cfg, &hecke)?;
    emit(&rows, cli.format, out)?;
    Ok(Verdict::Pass)
}

#[derive(Serialize)]
struct BilinearRow {
    trial: usize,
    q: u64,
    direct_re: f64,
    direct_im: f64,
    spectral_re: f64,
    spectral_im: f64,
    bound: f64,
    ratio: f64,
    pass: bool,
}

fn bilinear_check(a: &crate::BilinearArgs, cli: &Cli, out: &mut dyn Write) -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let modulus = Modulus::new(a.q)?;
    let fixed = a.trace.as_deref().map(|t| build(t, a.q)).transpose()?;
    let mut rows = Vec::with_capacity(a.trials);
    for trial in 0..a.trials {
        let kernel = match &fixed {
            Some(k) => k.clone(),
            None => PeriodicFunction::new(modulus.clone(), random_values(&mut rng, a.q))?,
        };
        let alpha = random_values(&mut rng, a.q);
        let beta = random_values(&mut rng, a.q);
        let report = BilinearInstance::new(alpha, beta, kernel)?.evaluate()?;
        rows.push(BilinearRow {
            trial,
            q: a.q,
            direct_re: report.direct.re,
            direct_im: report.direct.im,
            spectral_re: report.spectral.re,
            spectral_im: report.spectral.im,
            bound: report.bound,
            ratio: report.ratio,
            pass: report.ratio <= 1.0 + BILINEAR_TOL,
        });
    }
    emit(&rows, cli.format, out)?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    Ok(if failed == 0 {
        Verdict::Pass
    } else {
        Verdict::Fail(format!("{failed} of {} ratios exceed 1", rows.len()))
    })
}

#[derive(Serialize)]
struct AmplifierReport {
    q: u64,
    #[serde(rename = "X")]
    x: f64,
    #[serde(rename = "P")]
    p: u64,
    #[serde(rename = "L")]
    l: u64,
    trace: String,
    #[serde(rename = "H")]
    h: f64,
    hmax: u64,
    p_set: Vec<u64>,
    l_set: Vec<u64>,
    #[serde(rename = "F")]
    f: Complex64,
    #[serde(rename = "O")]
    o: Complex64,
    #[serde(rename = "S")]
    s: Complex64,
    #[serde(rename = "T")]
    t: f64,
    defect: f64,
    relative_defect: f64,
    tol: f64,
    pass: bool,
}

fn amplifier_check(a: &crate::AmplifierArgs, out: &mut dyn Write) -> Result<Verdict> {
    let k = build(&a.trace, a.q)?;
    let x = a.x.parse::<XRule>()?.length(a.q);
    let measure = PrimePairMeasure::new(a.p, a.l, a.q).with_context(|| format!("--P {} --L {}", a.p, a.l))?;
    if measure.is_empty() {
        anyhow::bail!(
            "--P {} --L {}: {} primes = 1 mod 4 in [P, 2P) and {} primes = 3 mod 4 in [L, 2L); both must be nonempty",
            a.p,
            a.l,
            measure.p_set.len(),
            measure.l_set.len()
        );
    }
    let hecke = hecke_for([x])?;
    let w = SmoothWindow::new(a.z)?;
    let d = decompose_fo(&k, &hecke, &w, x, &measure, None)?;
    let relative_defect = d.defect / (d.s.norm() + 1.0);
    let report = AmplifierReport {
        q: a.q,
        x,
        p: a.p,
        l: a.l,
        trace: a.trace.clone(),
        h: d.h_param,
        hmax: d.hmax,
        p_set: measure.p_set,
        l_set: measure.l_set,
        f: d.f,
        o: d.o,
        s: d.s,
        t: d.t,
        defect: d.defect,
        relative_defect,
        tol: a.tol,
        pass: relative_defect <= a.tol,
    };
    serde_json::to_writer_pretty(&mut *out, &report)?;
    writeln!(out)?;
    Ok(if report.pass {
        Verdict::Pass
    } else {
        Verdict::Fail(format!("defect {:.3e} exceeds {:.1e} (|S| + 1)", d.defect, a.tol))
    })
}

#[derive(Serialize)]
struct LemmaRow {
    instance: String,
    part: u8,
    abs_c: f64,
    bound: f64,
    pass: bool,
}

fn lemma_check(a: &crate::LemmaArgs, format: Format, out: &mut dyn Write) -> Result<Verdict> {
    let grid = audit_grid(a.r_max, &a.l_list, &a.p_list, a.n_max, &a.q);
    let report = evaluate_audit(&grid)?;
    let rows: Vec<LemmaRow> = report
        .rows
        .iter()
        .map(|r| LemmaRow {
            instance: r.instance.to_string(),
            part: r.part.number(),
            abs_c: r.abs_c,
            bound: r.bound,
            pass: r.pass,
        })
        .collect();
    emit(&rows, format, out)?;
    for part in [LemmaPart::Vanishing, LemmaPart::Ramanujan, LemmaPart::GenericRatio, LemmaPart::Diagonal] {
        let tag = if part.is_asserted() { "" } else { " (logged)" };
        eprintln!("part {}: {}/{} pass{tag}", part.number(), report.passed(part), report.checked(part));
    }
    eprintln!(
        "instances {}, skipped {}, max part-3 ratio {:.4}, max diagonal constant {:.4}",
        grid.len(),
        report.skipped,
        report.max_generic_ratio,
        report.max_diagonal_constant
    );
    let violations = report.violations().count();
    Ok(if violations == 0 {
        Verdict::Pass
    } else {
        Verdict::Fail(format!("{violations} rows violate their bound"))
    })
}

#[derive(Serialize)]
struct HeckeRow {
    n: usize,
    tau: i128,
    lambda: f64,
    lambda_1n: f64,
}

fn hecke_table(a: &crate::HeckeArgs, format: Format, out: &mut dyn Write) -> Result<Verdict> {
    let limit = a.limit as usize;
    let h = HeckeSystem::new(limit)?;
    let rows = (1..=limit)
        .map(|n| {
            Ok(HeckeRow {
                n,
                tau: h.tau(n)?,
                lambda: h.lambda(n)?,
                lambda_1n: h.lambda_1n(n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    emit(&rows, format, out)?;
    Ok(Verdict::Pass)
}

#[derive(Serialize)]
struct PoissonRow {
    trace: String,
    q: u64,
    #[serde(rename = "X")]
    x: f64,
    #[serde(rename = "Z")]
    z: f64,
    direct_re: f64,
    direct_im: f64,
    dual_re: f64,
    dual_im: f64,
    hmax: u64,
    tail_bound: f64,
    defect: f64,
    pass: bool,
}

fn poisson(a: &crate::PoissonArgs, format: Format, out: &mut dyn Write) -> Result<Verdict> {
    let k = build(&a.trace, a.q)?;
    let x = a.x.parse::<XRule>()?.length(a.q);
    let w = SmoothWindow::new(a.z)?;
    let r = poisson_check(&k, &w, x)?;
    let row = PoissonRow {
        trace: a.trace.clone(),
        q: a.q,
        x,
        z: a.z,
        direct_re: r.direct.re,
        direct_im: r.direct.im,
        dual_re: r.dual.re,
        dual_im: r.dual.im,
        hmax: r.hmax,
        tail_bound: r.tail_bound,
        defect: r.defect,
        pass: r.defect <= POISSON_TOL,
    };
    emit(std::slice::from_ref(&row), format, out)?;
    Ok(if row.pass {
        Verdict::Pass
    } else {
        Verdict::Fail(format!("Poisson defect {:.3e}", r.defect))
    })
}

#[derive(Serialize)]
struct KlRow {
    q: u64,
    rank: u32,
    max_abs: f64,
    bound: u32,
    mean_square: f64,
    khat_inf: f64,
    pass: bool,
}

fn kl_stats(a: &crate::KlStatsArgs, format: Format, out: &mut dyn Write) -> Result<Verdict> {
    let mut rows = Vec::with_capacity(a.q_list.len());
    for &q in &a.q_list {
        let m = Modulus::new(q)?;
        let table = hyper_kloosterman_table(&m, a.rank)?;
        let max_abs = table.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mean_square = table[1..].iter().map(|z| z.norm_sqr()).sum::<f64>() / (q - 1) as f64;
        let khat_inf = PeriodicFunction::new(m, table)?.sup_norm_dft();
        rows.push(KlRow {
            q,
            rank: a.rank,
            max_abs,
            bound: a.rank,
            mean_square,
            khat_inf,
            pass: max_abs <= a.rank as f64 + 1e-9,
        });
    }
    emit(&rows, format, out)?;
    let failed: Vec<u64> = rows.iter().filter(|r| !r.pass).map(|r| r.q).collect();
    Ok(if failed.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail(format!("|Kl_{}| exceeds {} at q in {failed:?}", a.rank, a.rank))
    })
}
