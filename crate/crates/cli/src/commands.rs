use std::io::Write;

use anyhow::{bail, Result};
use plaquette::correlators::{multispin_infinite, multispin_plus_finite, PlusMethod};
use plaquette::cycles::{
    bottom_row_check, crimea_bound, economic_check, screening_ratio, spm_stripe_basis, tpm_pascal_basis,
};
use plaquette::gibbs::MarginalMethod;
use plaquette::lengths::{
    beta_grid, ell_multispin, ordering_report, renorm_length, scaling_fit, LengthKind, OrderingConfig,
    MULTISPIN_THRESHOLD,
};
use plaquette::magnetization::{magnetization_decay_scan, magnetization_plus_exact};
use plaquette::mcmc::{estimate_pooled, run_chain, Estimate};
use plaquette::renorm::{decimation_check, DecimationRegion};
use plaquette::shadows::{is_null_equivalent, minimal_decomposition};
use plaquette::verify::{run_criterion, VerifyOptions, CRITERIA};
use plaquette::{Model, Region, Site};
use serde::Serialize;

use crate::input::{parse_betas, parse_ells, parse_family, parse_sites, McmcConfig};
use crate::{Cli, Command};

/// Runs the selected command; `Ok(false)` means a check failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let json = cli.json;
    match &cli.command {
        Command::Multispin(a) => {
            let sites = parse_sites(&a.sites)?;
            match a.plus {
                Some(ell) => {
                    let method = if a.enumerate { PlusMethod::Enumeration } else { PlusMethod::CycleExpansion };
                    let r = multispin_plus_finite(a.model, &Region::centered(ell), &sites, a.beta, method)?;
                    emit(json, &r, || format!("{:.17e}  (n = {}, lower bound {:.6e})", r.value, r.n, r.spiderman_bound))?;
                }
                None => {
                    let r = multispin_infinite(a.model, &sites, a.beta)?;
                    emit(json, &r, || match r.n {
                        Some(n) => format!("{:.17e}  (n = {n})", r.value),
                        None => "0  (not a sum of plaquettes)".to_string(),
                    })?;
                }
            }
            Ok(true)
        }
        Command::Decompose(a) => {
            let sites = parse_sites(&a.sites)?;
            let report = if is_null_equivalent(a.model, &sites)? {
                let d = minimal_decomposition(a.model, &sites)?;
                DecomposeReport { equivalent: true, n: Some(d.size), bases: d.bases }
            } else {
                DecomposeReport { equivalent: false, n: None, bases: Vec::new() }
            };
            emit(json, &report, || match report.n {
                Some(n) => {
                    let bases: Vec<String> = report.bases.iter().map(|b| format!("{},{}", b.x1, b.x2)).collect();
                    format!("n = {n}\n{}", bases.join(" "))
                }
                None => "not a sum of plaquettes".to_string(),
            })?;
            Ok(true)
        }
        Command::RenormCheck(a) => {
            let region = match a.model {
                Model::Spm => DecimationRegion::spm(a.ell, a.big_n)?,
                Model::Tpm if a.ell.is_power_of_two() => DecimationRegion::tpm(a.ell.trailing_zeros(), a.big_n)?,
                Model::Tpm => bail!("the triangular model needs a power-of-two ell, got {}", a.ell),
                m => bail!("renormalization is not defined for {m}"),
            };
            let reports = parse_betas(&a.betas)?
                .into_iter()
                .map(|b| decimation_check(&region, b))
                .collect::<plaquette::Result<Vec<_>>>()?;
            let ok = reports.iter().all(|r| r.max_discrepancy <= a.tol);
            emit(json, &reports, || {
                reports
                    .iter()
                    .map(|r| {
                        let tag = if r.max_discrepancy <= a.tol { "ok" } else { "FAIL" };
                        format!(
                            "{tag} beta {} -> {:.12}  states {}  max |diff| {:.3e}",
                            r.beta, r.beta_prime, r.states, r.max_discrepancy
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            })?;
            Ok(ok)
        }
        Command::Magnetization(a) => {
            let betas = parse_betas(&a.beta)?;
            if a.scan {
                let ells = parse_ells(&a.ells)?;
                let threshold = a.threshold.unwrap_or(0.0);
                let scans = betas
                    .iter()
                    .map(|&b| magnetization_decay_scan(b, &ells, threshold))
                    .collect::<plaquette::Result<Vec<_>>>()?;
                if json {
                    print_json(&scans)?;
                } else {
                    let mut w = csv::Writer::from_writer(std::io::stdout());
                    for s in &scans {
                        for r in &s.rows {
                            w.serialize(r)?;
                        }
                    }
                    w.flush()?;
                    if a.threshold.is_some() {
                        for s in &scans {
                            eprintln!("beta {}: crossover {:?}", s.beta, s.crossover);
                        }
                    }
                }
            } else {
                let ell = a.ell.unwrap_or(1);
                let rows = betas
                    .iter()
                    .map(|&b| magnetization_plus_exact(ell, b))
                    .collect::<plaquette::Result<Vec<_>>>()?;
                emit(json, &rows, || {
                    rows.iter().map(|r| format!("beta {} ell {}: {:.17e}", r.beta, r.ell, r.value)).collect::<Vec<_>>().join("\n")
                })?;
            }
            Ok(true)
        }
        Command::Lengths(a) => lengths(a, json),
        Command::McmcValidate(a) => mcmc_validate(&McmcConfig::load(&a.config)?, a.series.as_deref(), json),
        Command::CyclesAudit(a) => cycles_audit(a),
        Command::Screening(a) => {
            let family = parse_family(&a.family, a.seed)?;
            let r = screening_ratio(a.model, a.n, a.beta, &family)?;
            emit(json, &r, || {
                format!(
                    "{} ratio {:.6e}  bound {:.6e}  over {} boundary conditions ({:?})",
                    if r.ok { "ok" } else { "FAIL" },
                    r.ratio,
                    r.bound,
                    r.boundaries,
                    r.exactness
                )
            })?;
            Ok(r.ok)
        }
        Command::VerifyAll(a) => {
            let opts = VerifyOptions { quick: a.quick, seed: a.seed };
            let ids: Vec<u8> = match a.criterion {
                Some(id) if (1..=CRITERIA).contains(&id) => vec![id],
                Some(id) => bail!("criteria are numbered 1..={CRITERIA}, got {id}"),
                None => (1..=CRITERIA).collect(),
            };
            let mut all = true;
            let mut outcomes = Vec::new();
            for id in ids {
                let o = run_criterion(id, &opts);
                all &= o.passed;
                if !json {
                    let mut out = std::io::stdout().lock();
                    writeln!(out, "{}", o.line())?;
                    for c in o.failures() {
                        writeln!(out, "    FAIL {}: {}", c.label, c.detail)?;
                    }
                }
                outcomes.push(o);
            }
            if json {
                print_json(&outcomes)?;
            }
            Ok(all)
        }
    }
}

#[derive(Serialize)]
struct DecomposeReport {
    equivalent: bool,
    n: Option<usize>,
    bases: Vec<Site>,
}

#[derive(Serialize)]
struct PlotRow {
    beta: f64,
    kind: &'static str,
    lo: u64,
    hi: u64,
    flag: &'static str,
}

#[derive(Serialize)]
struct SeriesPoint {
    beta: f64,
    kind: &'static str,
    ln_ell: f64,
}

/// CSV `beta,kind,lo,hi,flag` on stdout; `--emit-plotdata` also writes the
/// `ln ℓ` series and the fitted slopes as JSON.
fn lengths(a: &crate::LengthsArgs, json: bool) -> Result<bool> {
    let betas = beta_grid(a.from, a.to, a.step);
    if betas.is_empty() {
        bail!("the beta grid is empty");
    }
    let sampled = match &a.sampled {
        Some(s) => {
            let Some(seed) = a.seed else {
                bail!("--seed is required with --sampled");
            };
            let config = OrderingConfig {
                family: plaquette::gibbs::BoundaryFamily::declared(8, seed),
                method: MarginalMethod::Auto { sweeps: 40_000, burn_in: 2_000, seed },
                ..OrderingConfig::default()
            };
            ordering_report(a.model, &parse_betas(s)?, &config)?
        }
        None => Vec::new(),
    };
    let mut rows = Vec::new();
    for &beta in &betas {
        for e in [ell_multispin(a.model, beta, MULTISPIN_THRESHOLD)?, renorm_length(a.model, beta)?] {
            let (lo, hi) = e.bounds();
            rows.push(PlotRow { beta, kind: e.kind.as_str(), lo, hi, flag: e.certainty.as_str() });
        }
    }
    for r in &sampled {
        for e in [&r.cavity.estimate, &r.mix.estimate] {
            let (lo, hi) = e.bounds();
            rows.push(PlotRow { beta: r.beta, kind: e.kind.as_str(), lo, hi, flag: e.certainty.as_str() });
        }
    }
    if let Some(path) = &a.emit_plotdata {
        if betas.len() < 2 {
            bail!("fitting a slope needs at least two grid points");
        }
        let fits = [LengthKind::Multispin, LengthKind::Renorm]
            .into_iter()
            .map(|k| scaling_fit(a.model, k, &betas))
            .collect::<plaquette::Result<Vec<_>>>()?;
        let series: Vec<SeriesPoint> = fits
            .iter()
            .flat_map(|f| {
                f.betas.iter().zip(&f.ells).map(|(&beta, &l)| SeriesPoint { beta, kind: f.kind.as_str(), ln_ell: (l as f64).ln() })
            })
            .collect();
        let doc = serde_json::json!({ "model": a.model, "series": series, "fits": fits, "ordering": sampled });
        std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
        for f in &fits {
            eprintln!("{:<9} slope {:.4}  intercept {:.4}  target {:.4}", f.kind.as_str(), f.slope, f.intercept, f.target);
        }
    }
    if json {
        print_json(&serde_json::json!({ "rows": rows, "ordering": sampled }))?;
    } else {
        let mut w = csv::Writer::from_writer(std::io::stdout());
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
        for r in &sampled {
            let (lo, hi) = r.multispin.bounds();
            eprintln!(
                "beta {}: multispin [{lo}, {hi}]  cavity >= {}  mix >= {}  ordering {}",
                r.beta,
                r.cavity.estimate.value,
                r.mix.estimate.value,
                if r.holds { "holds" } else { "violated" }
            );
        }
    }
    Ok(true)
}

#[derive(Serialize)]
struct McmcRow {
    index: usize,
    kind: String,
    mean: f64,
    std_error: f64,
    samples: usize,
    target: Option<f64>,
    z_score: Option<f64>,
    pass: bool,
}

fn mcmc_validate(cfg: &McmcConfig, series: Option<&std::path::Path>, json: bool) -> Result<bool> {
    if series.is_some() && cfg.chains != 1 {
        bail!("--series needs a single chain");
    }
    let estimates: Vec<Estimate> = if cfg.chains == 1 {
        let out = run_chain(&cfg.chain, &cfg.observables)?;
        for w in &out.warnings {
            eprintln!("warning: {w}");
        }
        if let Some(path) = series {
            write_series(path, &out.series, cfg.chain.burn_in, cfg.chain.thin.max(1))?;
        }
        out.estimates
    } else {
        cfg.observables
            .iter()
            .map(|o| estimate_pooled(&cfg.chain, o, cfg.chains))
            .collect::<plaquette::Result<_>>()?
    };
    let rows: Vec<McmcRow> = estimates
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let target = cfg.targets.get(i).copied().flatten();
            let z = target.map(|t| e.z_score(t));
            McmcRow {
                index: i,
                kind: serde_json::to_value(&cfg.observables[i])
                    .ok()
                    .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(String::from))
                    .unwrap_or_default(),
                mean: e.mean,
                std_error: e.std_error,
                samples: e.samples,
                target,
                z_score: z,
                pass: z.map_or(true, |z| z <= cfg.sigmas),
            }
        })
        .collect();
    let passed = rows.iter().all(|r| r.pass);
    if json {
        print_json(&serde_json::json!({ "rows": rows, "passed": passed, "sigmas": cfg.sigmas }))?;
    } else {
        let mut w = csv::Writer::from_writer(std::io::stdout());
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
        let checked = rows.iter().filter(|r| r.target.is_some()).count();
        let failed = rows.iter().filter(|r| !r.pass).count();
        eprintln!("{} {checked} compared, {failed} outside {} sigma", if passed { "PASS" } else { "FAIL" }, cfg.sigmas);
    }
    Ok(passed)
}

#[derive(Serialize)]
struct BasisRow {
    basis: &'static str,
    n: u32,
    rank: usize,
    expected: usize,
    ok: bool,
}

#[derive(Serialize)]
struct BoundRow {
    basis: &'static str,
    n: u32,
    t: f64,
    lhs: f64,
    rhs: f64,
    ok: bool,
}

#[derive(Serialize)]
struct PropertyRow {
    n: u32,
    checked: u64,
    violations: u64,
    ok: bool,
}

/// Always JSON: `{bases, bound_checks, bottom_row, economic, passed}`.
fn cycles_audit(a: &crate::AuditArgs) -> Result<bool> {
    let ts = parse_betas(&a.t)?;
    let mut bases = Vec::new();
    let mut bounds = Vec::new();
    for n in 0..=a.max_n {
        let pascal = tpm_pascal_basis(n)?;
        let stripes = if n >= 1 { Some(spm_stripe_basis(n)?) } else { None };
        bases.push(BasisRow { basis: "tpm-pascal", n, rank: pascal.rank(), expected: n as usize + 2, ok: pascal.rank() == n as usize + 2 });
        if let Some(b) = &stripes {
            let expected = 2 * n as usize + 1;
            bases.push(BasisRow { basis: "spm-stripes", n, rank: b.rank(), expected, ok: b.rank() == expected });
        }
        for &t in &ts {
            let rhs = crimea_bound(n, t);
            let lhs = pascal.weighted_cycle_sum(t, true)?;
            bounds.push(BoundRow { basis: "tpm-pascal", n, t, lhs, rhs, ok: lhs <= rhs });
            if let Some(b) = &stripes {
                let lhs = b.weighted_cycle_sum(t, true)?;
                bounds.push(BoundRow { basis: "spm-stripes", n, t, lhs, rhs, ok: lhs <= rhs });
            }
        }
    }
    let property = |n: u32, r: plaquette::cycles::CheckReport| PropertyRow { n, checked: r.checked, violations: r.violations, ok: r.ok() };
    let bottom = (0..=a.max_n).map(|n| Ok(property(n, bottom_row_check(n)?))).collect::<Result<Vec<_>>>()?;
    let economic = (1..=a.max_economic).map(|n| Ok(property(n, economic_check(n)?))).collect::<Result<Vec<_>>>()?;
    let passed = bases.iter().all(|r| r.ok)
        && bounds.iter().all(|r| r.ok)
        && bottom.iter().all(|r| r.ok)
        && economic.iter().all(|r| r.ok);
    print_json(&serde_json::json!({
        "bases": bases,
        "bound_checks": bounds,
        "bottom_row": bottom,
        "economic": economic,
        "passed": passed,
    }))?;
    Ok(passed)
}

/// Columns `sweep,obs0,obs1,...`; sweep numbers include the burn-in.
fn write_series(path: &std::path::Path, series: &[Vec<f64>], burn_in: u64, thin: u64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["sweep".to_string()];
    header.extend((0..series.len()).map(|i| format!("obs{i}")));
    w.write_record(&header)?;
    let len = series.first().map_or(0, Vec::len);
    for t in 0..len {
        let mut rec = vec![(burn_in + (t as u64 + 1) * thin).to_string()];
        rec.extend(series.iter().map(|s| s[t].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn print_json<T: Serialize + ?Sized>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn emit<T: Serialize + ?Sized>(json: bool, value: &T, text: impl FnOnce() -> String) -> Result<()> {
    if json {
        print_json(value)
    } else {
        writeln!(std::io::stdout().lock(), "{}", text())?;
        Ok(())
    }
}
