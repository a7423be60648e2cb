//! The `sample`, `fit` and `validate` subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::io::{
    fmt_f64, read_model, read_samples, read_sigma, write_model, write_samples, RunManifest,
};
use super::{ArgMap, CliError};
use crate::augment::Variant;
use crate::checks;
use crate::em::{em_fit, log_likelihood, EmConfig};
use crate::estimator::{fit, match_components, metrics, FitConfig, FitMode, Metrics};
use crate::moments::{empirical_cross_term, objective, GmmParams};
use crate::sampling::{make_benchmark, sample_gmm, SampleMatrix};

fn out_dir(args: &ArgMap) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(args.required("out")?);
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn record_flags(manifest: &mut RunManifest, args: &ArgMap) {
    for (key, value) in args.iter() {
        manifest.set(key, value);
    }
}

pub(super) fn cmd_sample(args: &ArgMap) -> Result<(), CliError> {
    let start = Instant::now();
    let p: usize = args.parsed("p", 0)?;
    if p == 0 {
        return Err(CliError::usage("--p must be a positive sample count"));
    }
    let seed: u64 = args.parsed("seed", 0)?;
    let dir = out_dir(args)?;

    let (truth, samples) = match (args.get("model"), args.get("benchmark")) {
        (Some(path), None) => {
            let truth = read_model(Path::new(path))?;
            let samples = sample_gmm(&truth, p, seed)?;
            (truth, samples)
        }
        (None, Some(spec)) => {
            let parts: Vec<&str> = spec.split(',').collect();
            if parts.len() != 3 {
                return Err(CliError::usage("--benchmark expects n,m,sigma2"));
            }
            let n: usize = parts[0]
                .trim()
                .parse()
                .map_err(|_| CliError::usage("bad n in --benchmark"))?;
            let m: usize = parts[1]
                .trim()
                .parse()
                .map_err(|_| CliError::usage("bad m in --benchmark"))?;
            let sigma2: f64 = parts[2]
                .trim()
                .parse()
                .map_err(|_| CliError::usage("bad sigma2 in --benchmark"))?;
            make_benchmark(n, m, sigma2, p, seed)?
        }
        _ => {
            return Err(CliError::usage("give exactly one of --model or --benchmark"));
        }
    };

    write_samples(&dir.join("samples.csv"), &samples)?;
    write_model(&dir.join("truth.csv"), &truth)?;
    let mut manifest = RunManifest::new("sample", seed);
    record_flags(&mut manifest, args);
    manifest.runtime_seconds = start.elapsed().as_secs_f64();
    manifest.write(&dir.join("manifest.json"))?;
    Ok(())
}

const REPORT_HEADER: &str = "restart,final_objective,loglik,mom_objective,runtime_seconds,\
                             proportion_error,mean_rel_error,cov_rel_error,cosine_angle";

fn metrics_fields(metrics: Option<&Metrics>) -> String {
    match metrics {
        Some(m) => format!(
            "{},{},{},{}",
            fmt_f64(m.proportion_error),
            fmt_f64(m.mean_rel_error),
            fmt_f64(m.cov_rel_error),
            fmt_f64(m.cosine_angle)
        ),
        None => ",,,".to_string(),
    }
}

/// The order-d squared moment distance of a fitted model, constant included;
/// comparable across methods.
fn plain_moment_objective(
    params: &GmmParams,
    x: &SampleMatrix,
    d: usize,
    cross: f64,
) -> Option<f64> {
    objective(params, x, d, false).ok().map(|o| o.value + cross)
}

pub(super) fn cmd_fit(args: &ArgMap) -> Result<(), CliError> {
    let start = Instant::now();
    let data_path = args.required("data")?;
    let x = read_samples(Path::new(data_path))
        .map_err(|e| CliError::usage(format!("cannot read {data_path}: {e}")))?;
    let m: usize = args.parsed("m", 0)?;
    if m == 0 {
        return Err(CliError::usage("--m must be a positive component count"));
    }
    let d: usize = args.parsed("d", 3)?;
    if !(1..=18).contains(&d) {
        return Err(CliError::usage("--d must lie in 1..=18"));
    }
    let method = args.get("method").unwrap_or("mom");
    let omega: f64 = args.parsed("omega", 0.5)?;
    let variant = match args.get("variant").unwrap_or("postprocess") {
        "implicit" => Variant::Implicit,
        "postprocess" => Variant::PostProcessing,
        other => return Err(CliError::usage(format!("unknown --variant {other:?}"))),
    };
    let mode = match args.get("mode").unwrap_or("moments") {
        "moments" => FitMode::Moments,
        "debias" => {
            let sigma_path = args
                .get("sigma")
                .ok_or_else(|| CliError::usage("--mode debias requires --sigma"))?;
            FitMode::Debias(read_sigma(Path::new(sigma_path))?)
        }
        other => return Err(CliError::usage(format!("unknown --mode {other:?}"))),
    };
    let restarts: usize = args.parsed("restarts", 10)?;
    let seed: u64 = args.parsed("seed", 0)?;
    let truth = match args.get("truth") {
        Some(path) => Some(read_model(Path::new(path))?),
        None => None,
    };
    let dir = out_dir(args)?;

    let cross = empirical_cross_term(&x, d)?;
    let mut report = String::from(REPORT_HEADER);
    report.push('\n');

    let best_params = match method {
        "mom" => {
            let config = FitConfig {
                d,
                restarts,
                omega,
                variant,
                mode,
                seed,
                ..FitConfig::moments(d)
            };
            let outcome = fit(&x, m, &config, truth.as_ref())?;
            for rec in &outcome.restarts {
                let loglik = log_likelihood(&rec.params, &x)
                    .map(fmt_f64)
                    .unwrap_or_default();
                let mom_obj = plain_moment_objective(&rec.params, &x, d, cross)
                    .map(fmt_f64)
                    .unwrap_or_default();
                writeln!(
                    report,
                    "{},{},{},{},{},{}",
                    rec.restart,
                    fmt_f64(rec.objective),
                    loglik,
                    mom_obj,
                    fmt_f64(rec.runtime_seconds),
                    metrics_fields(rec.metrics.as_ref()),
                )
                .unwrap();
            }
            outcome.best_params
        }
        "em" => {
            let config = EmConfig { restarts, seed, ..EmConfig::default() };
            let outcome = em_fit(&x, m, &config)?;
            for rec in &outcome.restarts {
                let met = match &truth {
                    Some(t) => {
                        let (perm, _) =
                            match_components(&rec.params.means().view(), &t.means().view())?;
                        Some(metrics(&rec.params, t, &perm)?)
                    }
                    None => None,
                };
                let mom_obj = plain_moment_objective(&rec.params, &x, d, cross)
                    .map(fmt_f64)
                    .unwrap_or_default();
                writeln!(
                    report,
                    "{},{},{},{},{},{}",
                    rec.restart,
                    fmt_f64(rec.loglik()),
                    fmt_f64(rec.loglik()),
                    mom_obj,
                    fmt_f64(rec.runtime_seconds),
                    metrics_fields(met.as_ref()),
                )
                .unwrap();
            }
            outcome.params().clone()
        }
        other => return Err(CliError::usage(format!("unknown --method {other:?}"))),
    };

    write_model(&dir.join("fitted.csv"), &best_params)?;
    fs::write(dir.join("report.csv"), report).map_err(crate::Error::from)?;
    let mut manifest = RunManifest::new("fit", seed);
    record_flags(&mut manifest, args);
    manifest.set("resolved_d", d);
    manifest.set("resolved_method", method);
    manifest.set("resolved_omega", omega);
    manifest.set("resolved_restarts", restarts);
    manifest.runtime_seconds = start.elapsed().as_secs_f64();
    manifest.write(&dir.join("manifest.json"))?;
    Ok(())
}

fn write_convergence_table(path: &Path, rows: &[(usize, f64)]) -> Result<(), CliError> {
    let mut out = String::from("p,error\n");
    for &(p, err) in rows {
        writeln!(out, "{p},{}", fmt_f64(err)).unwrap();
    }
    fs::write(path, out).map_err(crate::Error::from)?;
    Ok(())
}

fn write_check_table(path: &Path, rows: &[checks::CheckOutcome]) -> Result<(), CliError> {
    let mut out = String::from("name,statistic,threshold,pass\n");
    for c in rows {
        writeln!(out, "{},{},{},{}", c.name, fmt_f64(c.statistic), fmt_f64(c.threshold), c.pass)
            .unwrap();
    }
    fs::write(path, out).map_err(crate::Error::from)?;
    Ok(())
}

fn report_checks(label: &str, rows: &[checks::CheckOutcome]) -> bool {
    let mut all_pass = true;
    for c in rows {
        let status = if c.pass { "PASS" } else { "FAIL" };
        println!("{status} {label}: {} (statistic {:.3e}, threshold {:.3e})", c.name, c.statistic, c.threshold);
        all_pass &= c.pass;
    }
    all_pass
}

const SLOPE_BOUNDS: (f64, f64) = (-0.65, -0.35);

pub(super) fn cmd_validate(args: &ArgMap) -> Result<(), CliError> {
    let start = Instant::now();
    let experiment = args.required("experiment")?.to_string();
    let seed: u64 = args.parsed("seed", 0)?;
    let dir = match args.get("out") {
        Some(path) => {
            let dir = PathBuf::from(path);
            fs::create_dir_all(&dir)
                .map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
            Some(dir)
        }
        None => None,
    };

    let passed = match experiment.as_str() {
        "moments" | "debias" => {
            let rows = if experiment == "moments" {
                checks::moment_convergence(seed)?
            } else {
                checks::debias_convergence(seed)?
            };
            let slope = checks::log_log_slope(&rows);
            for &(p, err) in &rows {
                println!("p = {p:>7}  moment error = {err:.6e}");
            }
            let pass = (SLOPE_BOUNDS.0..=SLOPE_BOUNDS.1).contains(&slope);
            let status = if pass { "PASS" } else { "FAIL" };
            println!(
                "{status} {experiment} convergence: log-log slope {slope:.4} within [{}, {}]",
                SLOPE_BOUNDS.0, SLOPE_BOUNDS.1
            );
            if let Some(dir) = &dir {
                write_convergence_table(&dir.join(format!("{experiment}_convergence.csv")), &rows)?;
            }
            pass
        }
        "oracle" => {
            let mut rows = checks::oracle_equivalence_suite(seed);
            rows.extend(checks::gradient_suite(seed));
            let pass = report_checks("oracle", &rows);
            if let Some(dir) = &dir {
                write_check_table(&dir.join("oracle_checks.csv"), &rows)?;
            }
            pass
        }
        "identities" => {
            let rows = checks::identity_suite(seed);
            let pass = report_checks("identities", &rows);
            if let Some(dir) = &dir {
                write_check_table(&dir.join("identity_checks.csv"), &rows)?;
            }
            pass
        }
        other => return Err(CliError::usage(format!("unknown --experiment {other:?}"))),
    };

    if let Some(dir) = &dir {
        let mut manifest = RunManifest::new("validate", seed);
        record_flags(&mut manifest, args);
        manifest.runtime_seconds = start.elapsed().as_secs_f64();
        manifest.write(&dir.join("manifest.json"))?;
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::validation(format!("validation experiment {experiment:?} failed")))
    }
}
