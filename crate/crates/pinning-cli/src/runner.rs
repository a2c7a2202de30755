//! Experiment execution: deterministic job scheduling, per-job randomness,
//! and the CSV row schemas for every experiment kind.
//!
//! Determinism contract: an artifact's bytes depend only on the
//! configuration file, never on the worker count. Jobs are enumerated in a
//! fixed order, each job derives its RNG from `(master_seed, job index)`,
//! and rows are collected in job order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use pinning_core::dp::{
    self, contact_marginals, ln_contact_distribution, ConstrainedTable, FreeTable, PolymerParams,
    SuffixTable,
};
use pinning_core::observables::{
    empirical_rate, estimate_quenched, lclt_residual, window_density_max, GapAccumulator,
};
use pinning_core::pure::{GapPrediction, PureCurves};
use pinning_core::sampler::{sample_conditioned, sample_functional, sample_soft};
use pinning_core::{cache, ChargeSequence, DisorderSpec, InterArrivalLaw};

use crate::config::{self, ContactFunctional, Experiment, ExperimentConfig, LoadedConfig};
use crate::csvout::{fmt_float, guard_overwrite, write_artifact};

/// Distinguishes "the input is wrong" from "the run failed".
#[derive(Debug)]
pub enum RunError {
    /// Configuration rejected (exit code 1).
    Invalid(Vec<String>),
    /// Output file refused by the overwrite guard (exit code 1).
    Refused(String),
    /// Failure during computation or while writing artifacts (exit code 2).
    Runtime(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(errors) => {
                writeln!(f, "configuration rejected:")?;
                for e in errors {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
            RunError::Refused(msg) => write!(f, "{msg}"),
            RunError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

/// Salt folded into the master seed so sampler streams are unrelated to any
/// direct use of the seed elsewhere.
const SAMPLER_SALT: u64 = 0xA5A5_5A5A_DEAD_BEEF;

fn sampler_rng(master_seed: u64, job: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ SAMPLER_SALT);
    rng.set_stream(job);
    rng
}

fn runtime(e: impl std::fmt::Display) -> RunError {
    RunError::Runtime(e.to_string())
}

/// Builds a constrained table, going through the cache directory when one
/// is configured. `disorder` must be the spec that generated `charges`.
fn obtain_table(
    cache_dir: Option<&Path>,
    law: &InterArrivalLaw,
    disorder: &DisorderSpec,
    charges: &ChargeSequence,
    n: usize,
    l_max: usize,
) -> Result<ConstrainedTable, String> {
    let Some(dir) = cache_dir else {
        return ConstrainedTable::build(n, charges, law, l_max).map_err(|e| e.to_string());
    };
    let key = cache::table_key(law.spec(), disorder, n, l_max);
    match cache::load_table(dir, &key, n, l_max) {
        Ok(Some(table)) => return Ok(table),
        Ok(None) => {}
        Err(e) => return Err(format!("cache read failed: {e}")),
    }
    let table = ConstrainedTable::build(n, charges, law, l_max).map_err(|e| e.to_string())?;
    cache::save_table(dir, &key, &table).map_err(|e| format!("cache write failed: {e}"))?;
    Ok(table)
}

/// Interpolated quantile of an unsorted f64 sample; NaN on empty input.
fn fquantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("densities are finite"));
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn experiment_kind(e: &Experiment) -> &'static str {
    match e {
        Experiment::BigJumpGaps { .. } => "big_jump_gaps",
        Experiment::LogGaps { .. } => "log_gaps",
        Experiment::DisorderGapContrast { .. } => "disorder_gap_contrast",
        Experiment::LcltLadder { .. } => "lclt_ladder",
        Experiment::RateGrid { .. } => "rate_grid",
        Experiment::WindowProfile { .. } => "window_profile",
        Experiment::UmodelCompare { .. } => "umodel_compare",
        Experiment::SoftConditioning { .. } => "soft_conditioning",
    }
}

/// Conditioned contact count for a target fraction: `max(1, floor(r n))`,
/// capped at `n`.
fn contact_target(n: usize, fraction: f64) -> usize {
    (((fraction * n as f64).floor() as usize).max(1)).min(n)
}

/// Runs one experiment configuration and writes `<name>.csv` under
/// `out_dir`. Returns the artifact path.
pub fn run_experiment(
    loaded: &LoadedConfig,
    out_dir: &Path,
    force: bool,
    workers: usize,
    cache_dir: Option<&Path>,
) -> Result<PathBuf, RunError> {
    let cfg = &loaded.config;
    let errors = config::validate(cfg);
    if !errors.is_empty() {
        return Err(RunError::Invalid(errors));
    }
    let law = InterArrivalLaw::build(cfg.law.clone()).expect("validated");
    let out_path = out_dir.join(format!("{}.csv", cfg.name));
    guard_overwrite(&out_path, &loaded.hash, force).map_err(RunError::Refused)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Runtime(format!("thread pool: {e}")))?;

    let (header, rows, extra_meta): (Vec<&str>, Vec<Vec<String>>, Vec<(&str, String)>) =
        match &cfg.experiment {
            Experiment::BigJumpGaps { n, target_fraction, replicas, samples_per_replica }
            | Experiment::LogGaps { n, target_fraction, replicas, samples_per_replica } => {
                run_gap_study(
                    cfg,
                    &law,
                    &pool,
                    cache_dir,
                    n,
                    *target_fraction,
                    *replicas,
                    *samples_per_replica,
                    false,
                )?
            }
            Experiment::DisorderGapContrast {
                n,
                target_fraction,
                replicas,
                samples_per_replica,
            } => run_gap_study(
                cfg,
                &law,
                &pool,
                cache_dir,
                n,
                *target_fraction,
                *replicas,
                *samples_per_replica,
                true,
            )?,
            Experiment::LcltLadder { n, h } => run_lclt_ladder(cfg, &law, &pool, cache_dir, n, *h)?,
            Experiment::RateGrid { n, h, r_lo, r_hi, dr } => {
                run_rate_grid(cfg, &law, cache_dir, *n, *h, *r_lo, *r_hi, *dr)?
            }
            Experiment::WindowProfile { n, target_fraction, w, samples } => {
                run_window_profile(cfg, &law, cache_dir, *n, *target_fraction, w, *samples)?
            }
            Experiment::UmodelCompare { n, u, samples } => {
                run_umodel_compare(cfg, &law, cache_dir, *n, u, *samples)?
            }
            Experiment::SoftConditioning { n, h, l_lo, l_hi, samples } => {
                run_soft_conditioning(cfg, &law, cache_dir, *n, *h, *l_lo, *l_hi, *samples)?
            }
        };

    let mut meta: Vec<(&str, String)> = vec![
        ("config_hash", loaded.hash.clone()),
        ("master_seed", cfg.master_seed.to_string()),
        ("version", env!("CARGO_PKG_VERSION").to_string()),
        ("name", cfg.name.clone()),
        ("experiment", experiment_kind(&cfg.experiment).to_string()),
        ("law", serde_json::to_string(&cfg.law).map_err(runtime)?),
        ("disorder", serde_json::to_string(&cfg.disorder).map_err(runtime)?),
    ];
    meta.extend(extra_meta);
    write_artifact(&out_path, &meta, &header, &rows)
        .map_err(|e| RunError::Runtime(format!("writing {}: {e}", out_path.display())))?;
    Ok(out_path)
}

/// Pure-model gap prediction for a contact fraction, flattened to CSV
/// columns `(kind, value, typical_size(n))`.
fn gap_prediction_columns(
    pure: &PureCurves,
    r: f64,
    n: usize,
) -> Result<(String, f64, f64), String> {
    let pred = pure.predict_max_gap(r).map_err(|e| e.to_string())?;
    let (kind, value) = match pred {
        GapPrediction::BigJump { fraction } => ("big_jump".to_string(), fraction),
        GapPrediction::LogGap { rate } => ("log_gap".to_string(), rate),
        GapPrediction::Boundary => ("boundary".to_string(), f64::NAN),
    };
    let size = pred.typical_size(n).unwrap_or(f64::NAN);
    Ok((kind, value, size))
}

/// Shared driver for the three conditioned-gap experiments. One job per
/// `(n, variant, replica)`; each job owns one table and one RNG stream.
#[allow(clippy::too_many_arguments)]
fn run_gap_study(
    cfg: &ExperimentConfig,
    law: &InterArrivalLaw,
    pool: &rayon::ThreadPool,
    cache_dir: Option<&Path>,
    sizes: &[usize],
    fraction: f64,
    replicas: u32,
    samples: u32,
    contrast: bool,
) -> Result<(Vec<&'static str>, Vec<Vec<String>>, Vec<(&'static str, String)>), RunError> {
    let pure = PureCurves::new(law);
    let mut predictions: BTreeMap<usize, (String, f64, f64)> = BTreeMap::new();
    for &n in sizes {
        let r = contact_target(n, fraction) as f64 / n as f64;
        predictions.insert(n, gap_prediction_columns(&pure, r, n).map_err(RunError::Runtime)?);
    }

    let variants: &'static [&'static str] = if contrast { &["given", "pure"] } else { &["given"] };
    struct Job {
        n: usize,
        variant: &'static str,
        replica: u32,
    }
    let mut jobs = Vec::new();
    for &n in sizes {
        for &variant in variants {
            for replica in 0..replicas {
                jobs.push(Job { n, variant, replica });
            }
        }
    }

    let master_seed = cfg.master_seed;
    let rows: Result<Vec<Vec<String>>, String> = pool.install(|| {
        jobs.into_par_iter()
            .enumerate()
            .map(|(job_id, job)| {
                let disorder = if job.variant == "pure" {
                    DisorderSpec::zero()
                } else {
                    DisorderSpec {
                        seed: cfg.disorder.seed.wrapping_add(job.replica as u64),
                        ..cfg.disorder.clone()
                    }
                };
                let charges = ChargeSequence::generate(disorder.clone(), job.n)
                    .map_err(|e| e.to_string())?;
                let l = contact_target(job.n, fraction);
                let table = obtain_table(cache_dir, law, &disorder, &charges, job.n, l)?;
                let mut rng = sampler_rng(master_seed, job_id as u64);
                let mut acc = GapAccumulator::new(format!("{}-{}-{}", job.n, job.variant, job.replica));
                for _ in 0..samples {
                    let path = sample_conditioned(&table, &charges, law, l, &mut rng)
                        .map_err(|e| e.to_string())?;
                    acc.observe(&path);
                }
                let report = acc.report();
                let (kind, value, size) = predictions[&job.n].clone();
                Ok(vec![
                    job.variant.to_string(),
                    job.n.to_string(),
                    l.to_string(),
                    fmt_float(fraction),
                    job.replica.to_string(),
                    samples.to_string(),
                    fmt_float(report.max_gap_median),
                    fmt_float(report.max_gap_q10),
                    fmt_float(report.max_gap_q90),
                    fmt_float(report.second_gap_median),
                    kind,
                    fmt_float(value),
                    fmt_float(size),
                ])
            })
            .collect()
    });
    let rows = rows.map_err(RunError::Runtime)?;
    let header = vec![
        "variant",
        "n",
        "l",
        "target_fraction",
        "replica",
        "samples",
        "max_gap_median",
        "max_gap_q10",
        "max_gap_q90",
        "second_gap_median",
        "predicted_kind",
        "predicted_value",
        "predicted_typical_size",
    ];
    let rho_c = pure.rho_c();
    Ok((header, rows, vec![("rho_c", fmt_float(rho_c))]))
}

/// Contact statistics and local-CLT residual along a size ladder; one job
/// per size, no sampling involved.
fn run_lclt_ladder(
    cfg: &ExperimentConfig,
    law: &InterArrivalLaw,
    pool: &rayon::ThreadPool,
    cache_dir: Option<&Path>,
    sizes: &[usize],
    h: f64,
) -> Result<(Vec<&'static str>, Vec<Vec<String>>, Vec<(&'static str, String)>), RunError> {
    let pure = PureCurves::new(law);
    let predicted_f = pure.free_energy(h).map_err(|e| RunError::Runtime(e.to_string()))?;
    let predicted_rho = pure.rho(h).unwrap_or(f64::NAN);
    let predicted_v = pure.variance_coeff(h).unwrap_or(f64::NAN);

    let rows: Result<Vec<Vec<String>>, String> = pool.install(|| {
        sizes
            .par_iter()
            .map(|&n| {
                let charges = ChargeSequence::generate(cfg.disorder.clone(), n)
                    .map_err(|e| e.to_string())?;
                let params = PolymerParams { n, h };
                let free =
                    FreeTable::build(params, &charges, law).map_err(|e| e.to_string())?;
                let est = estimate_quenched(&free);
                let table = obtain_table(cache_dir, law, &cfg.disorder, &charges, n, n)?;
                let ln_dist = ln_contact_distribution(&table, h).map_err(|e| e.to_string())?;
                let residual = lclt_residual(&ln_dist);
                Ok(vec![
                    n.to_string(),
                    fmt_float(h),
                    fmt_float(free.log_partition()),
                    fmt_float(est.free_energy_density),
                    fmt_float(est.error_bar),
                    fmt_float(free.contact_mean()),
                    fmt_float(est.contact_density),
                    fmt_float(free.contact_var()),
                    fmt_float(est.variance_density),
                    fmt_float(residual),
                ])
            })
            .collect()
    });
    let rows = rows.map_err(RunError::Runtime)?;
    let header = vec![
        "n",
        "h",
        "log_partition",
        "free_energy_density",
        "error_bar",
        "contact_mean",
        "contact_density",
        "contact_var",
        "variance_density",
        "lclt_residual",
    ];
    let meta = vec![
        ("predicted_free_energy", fmt_float(predicted_f)),
        ("predicted_rho", fmt_float(predicted_rho)),
        ("predicted_v", fmt_float(predicted_v)),
    ];
    Ok((header, rows, meta))
}

/// Empirical large-deviation rate of the contact fraction on a grid versus
/// the closed-form pure rate function.
#[allow(clippy::too_many_arguments)]
fn run_rate_grid(
    cfg: &ExperimentConfig,
    law: &InterArrivalLaw,
    cache_dir: Option<&Path>,
    n: usize,
    h: f64,
    r_lo: f64,
    r_hi: f64,
    dr: f64,
) -> Result<(Vec<&'static str>, Vec<Vec<String>>, Vec<(&'static str, String)>), RunError> {
    let charges =
        ChargeSequence::generate(cfg.disorder.clone(), n).map_err(runtime)?;
    let table = obtain_table(cache_dir, law, &cfg.disorder, &charges, n, n)
        .map_err(RunError::Runtime)?;
    let ln_dist = ln_contact_distribution(&table, h).map_err(runtime)?;
    let pure = PureCurves::new(law);

    let mut rows = Vec::new();
    let mut k = 0usize;
    loop {
        let r = r_lo + k as f64 * dr;
        if r > r_hi + 1e-12 {
            break;
        }
        k += 1;
        // nearest contact count: keeps the l-grid uniform when r*n rounds
        // to an integer up to float error; the half offset makes the floor
        // inside the estimator land exactly on l
        let l = (r * n as f64).round() as usize;
        let empirical = empirical_rate(&ln_dist, (l as f64 + 0.5) / n as f64);
        let predicted = pure.rate(h, r).unwrap_or(f64::NAN);
        let abs_error = empirical.map_or(f64::NAN, |e| (e - predicted).abs());
        rows.push(vec![
            n.to_string(),
            fmt_float(h),
            fmt_float(r),
            l.to_string(),
            fmt_float(empirical.unwrap_or(f64::NAN)),
            fmt_float(predicted),
            fmt_float(abs_error),
        ]);
    }
    let header = vec!["n", "h", "r", "l", "empirical_rate", "predicted_rate", "abs_error"];
    let meta = vec![("rho_c", fmt_float(pure.rho_c()))];
    Ok((header, rows, meta))
}

/// Sliding-window contact densities of conditioned paths: one sample pool,
/// evaluated at every requested window length.
fn run_window_profile(
    cfg: &ExperimentConfig,
    law: &InterArrivalLaw,
    cache_dir: Option<&Path>,
    n: usize,
    fraction: f64,
    windows: &[usize],
    samples: u32,
) -> Result<(Vec<&'static str>, Vec<Vec<String>>, Vec<(&'static str, String)>), RunError> {
    let charges =
        ChargeSequence::generate(cfg.disorder.clone(), n).map_err(runtime)?;
    let l = contact_target(n, fraction);
    let table = obtain_table(cache_dir, law, &cfg.disorder, &charges, n, l)
        .map_err(RunError::Runtime)?;
    let mut rng = sampler_rng(cfg.master_seed, 0);
    let mut paths = Vec::with_capacity(samples as usize);
    for _ in 0..samples {
        paths.push(sample_conditioned(&table, &charges, law, l, &mut rng).map_err(runtime)?);
    }

    let mut rows = Vec::new();
    for &w in windows {
        let mut densities = Vec::with_capacity(paths.len());
        for path in &paths {
            densities.push(window_density_max(path, w).map_err(runtime)?);
        }
        let mean = densities.iter().sum::<f64>() / densities.len() as f64;
        rows.push(vec![
            n.to_string(),
            l.to_string(),
            fmt_float(fraction),
            w.to_string(),
            samples.to_string(),
            fmt_float(mean),
            fmt_float(fquantile(&densities, 0.5)),
            fmt_float(fquantile(&densities, 0.9)),
            fmt_float(fquantile(&densities, 1.0)),
        ]);
    }
    let header = vec![
        "n",
        "l",
        "target_fraction",
        "w",
        "samples",
        "mean_density",
        "median_density",
        "q90_density",
        "max_density",
    ];
    Ok((header, rows, Vec::new()))
}

/// Exact versus sampled contact-number law under a contact-fraction
/// functional `U`.
fn run_umodel_compare(
    cfg: &ExperimentConfig,
    law: &InterArrivalLaw,
    cache_dir: Option<&Path>,
    n: usize,
    u: &ContactFunctional,
    samples: u32,
) -> Result<(Vec<&'static str>, Vec<Vec<String>>, Vec<(&'static str, String)>), RunError> {
    let charges =
        ChargeSequence::generate(cfg.disorder.clone(), n).map_err(runtime)?;
    let table = obtain_table(cache_dir, law, &cfg.disorder, &charges, n, n)
        .map_err(RunError::Runtime)?;

    // Exact law: P[L = l] proportional to exp(n U(l/n)) Z_{n,l}.
    let weights: Vec<f64> = (0..=n)
        .map(|l| {
            if l == 0 {
                f64::NEG_INFINITY
            } else {
                n as f64 * u.eval(l as f64 / n as f64) + table.log_z(n, l)
            }
        })
        .collect();
    let exact = normalized_probs(&weights);

    let mut rng = sampler_rng(cfg.master_seed, 0);
    let mut counts = vec![0u64; n + 1];
    for _ in 0..samples {
        let (l, _path) =
            sample_functional(&table, &charges, law, |r| u.eval(r), &mut rng).map_err(runtime)?;
        counts[l] += 1;
    }

    let mut rows = Vec::new();
    for l in 1..=n {
        if exact[l] <= 1e-15 && counts[l] == 0 {
            continue;
        }
        rows.push(vec![
            n.to_string(),
            l.to_string(),
            fmt_float(l as f64 / n as f64),
            fmt_float(u.eval(l as f64 / n as f64)),
            fmt_float(exact[l]),
            fmt_float(counts[l] as f64 / samples as f64),
            samples.to_string(),
        ]);
    }
    let header = vec!["n", "l", "r", "u_value", "exact_prob", "sampled_freq", "samples"];
    Ok((header, rows, vec![("u", u.describe())]))
}

/// Exact versus sampled contact-number law under soft conditioning to an
/// `l` window, with per-`l` gap medians from the same draws.
#[allow(clippy::too_many_arguments)]
fn run_soft_conditioning(
    cfg: &ExperimentConfig,
    law: &InterArrivalLaw,
    cache_dir: Option<&Path>,
    n: usize,
    h: f64,
    l_lo: usize,
    l_hi: usize,
    samples: u32,
) -> Result<(Vec<&'static str>, Vec<Vec<String>>, Vec<(&'static str, String)>), RunError> {
    let charges =
        ChargeSequence::generate(cfg.disorder.clone(), n).map_err(runtime)?;
    let table = obtain_table(cache_dir, law, &cfg.disorder, &charges, n, l_hi)
        .map_err(RunError::Runtime)?;

    let weights: Vec<f64> = (0..=l_hi)
        .map(|l| {
            if l < l_lo {
                f64::NEG_INFINITY
            } else {
                h * l as f64 + table.log_z(n, l)
            }
        })
        .collect();
    let exact = normalized_probs(&weights);

    let mut rng = sampler_rng(cfg.master_seed, 0);
    let mut counts = vec![0u64; l_hi + 1];
    let mut max_gaps: Vec<Vec<f64>> = vec![Vec::new(); l_hi + 1];
    for _ in 0..samples {
        let (l, path) =
            sample_soft(&table, &charges, law, h, l_lo, l_hi, &mut rng).map_err(runtime)?;
        counts[l] += 1;
        max_gaps[l].push(path.max_gap() as f64);
    }

    let mut rows = Vec::new();
    for l in l_lo..=l_hi {
        rows.push(vec![
            n.to_string(),
            fmt_float(h),
            l.to_string(),
            fmt_float(exact[l]),
            fmt_float(counts[l] as f64 / samples as f64),
            samples.to_string(),
            fmt_float(fquantile(&max_gaps[l], 0.5)),
        ]);
    }
    let header =
        vec!["n", "h", "l", "exact_prob", "sampled_freq", "samples", "max_gap_median"];
    Ok((header, rows, Vec::new()))
}

/// Softmax over log weights (`-inf` entries get probability zero).
fn normalized_probs(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; log_w.len()];
    }
    let mut probs: Vec<f64> = log_w.iter().map(|&w| (w - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// `pure-curves`: closed-form pure-model curves on a grid. Writes
/// `pure_curves.csv` (per pinning strength) and `pure_rates.csv`
/// (per strength and contact fraction, when fractions are given).
pub fn run_pure_curves(
    law_bytes: &[u8],
    grid_bytes: &[u8],
    out_dir: &Path,
    force: bool,
) -> Result<Vec<PathBuf>, RunError> {
    let (law_spec, grid, hash) =
        config::parse_pure_inputs(law_bytes, grid_bytes).map_err(|e| RunError::Invalid(vec![e]))?;
    let mut errors = Vec::new();
    let law = match InterArrivalLaw::build(law_spec.clone()) {
        Ok(law) => Some(law),
        Err(e) => {
            errors.push(format!("gap law: {e}"));
            None
        }
    };
    if grid.h.is_empty() {
        errors.push("grid must list at least one pinning strength h".into());
    }
    for &h in &grid.h {
        if !h.is_finite() {
            errors.push(format!("pinning strength {h} must be finite"));
        }
    }
    for &r in &grid.r {
        if !(r > 0.0 && r <= 1.0) {
            errors.push(format!("contact fraction {r} must lie in (0, 1]"));
        }
    }
    if !errors.is_empty() {
        return Err(RunError::Invalid(errors));
    }
    let law = law.expect("checked above");
    let pure = PureCurves::new(&law);
    let rho_c = pure.rho_c();

    let law_json = serde_json::to_string(&law_spec).map_err(runtime)?;
    let base_meta = |which: &str| {
        vec![
            ("config_hash", hash.clone()),
            ("version", env!("CARGO_PKG_VERSION").to_string()),
            ("table", which.to_string()),
            ("law", law_json.clone()),
            ("rho_c", fmt_float(rho_c)),
        ]
    };

    let curves_path = out_dir.join("pure_curves.csv");
    guard_overwrite(&curves_path, &hash, force).map_err(RunError::Refused)?;
    let mut curve_rows = Vec::new();
    for &h in &grid.h {
        let f = pure.free_energy(h).map_err(runtime)?;
        let rho = pure.rho(h).unwrap_or(f64::NAN);
        let v = pure.variance_coeff(h).unwrap_or(f64::NAN);
        curve_rows.push(vec![fmt_float(h), fmt_float(f), fmt_float(rho), fmt_float(v)]);
    }
    write_artifact(
        &curves_path,
        &base_meta("curves"),
        &["h", "free_energy", "rho", "variance_coeff"],
        &curve_rows,
    )
    .map_err(runtime)?;
    let mut written = vec![curves_path];

    if !grid.r.is_empty() {
        let rates_path = out_dir.join("pure_rates.csv");
        guard_overwrite(&rates_path, &hash, force).map_err(RunError::Refused)?;
        let mut rate_rows = Vec::new();
        for &h in &grid.h {
            for &r in &grid.r {
                let rate = pure.rate(h, r).unwrap_or(f64::NAN);
                rate_rows.push(vec![fmt_float(h), fmt_float(r), fmt_float(rate)]);
            }
        }
        write_artifact(&rates_path, &base_meta("rates"), &["h", "r", "rate"], &rate_rows)
            .map_err(runtime)?;
        written.push(rates_path);
    }
    Ok(written)
}

/// `dp-dump`: every table the engine computes for one environment, in tidy
/// long form (`quantity,index,value`).
pub fn run_dp_dump(bytes: &[u8], out_dir: &Path, force: bool) -> Result<PathBuf, RunError> {
    let (cfg, hash) = config::parse_dump_config(bytes).map_err(|e| RunError::Invalid(vec![e]))?;
    let mut errors = Vec::new();
    if !config::valid_name(&cfg.name) {
        errors.push(format!(
            "name {:?} must be non-empty and use only [A-Za-z0-9_-] (it becomes a file name)",
            cfg.name
        ));
    }
    let law = match InterArrivalLaw::build(cfg.law.clone()) {
        Ok(law) => Some(law),
        Err(e) => {
            errors.push(format!("gap law: {e}"));
            None
        }
    };
    if cfg.n < 1 {
        errors.push("n must be >= 1".into());
    }
    if config::table_bytes(cfg.n) > dp::MAX_TABLE_BYTES {
        errors.push(format!("n = {} needs a table beyond the memory cap", cfg.n));
    }
    if !cfg.h.is_finite() {
        errors.push(format!("h = {} must be finite", cfg.h));
    }
    if let Err(e) = ChargeSequence::generate(cfg.disorder.clone(), 1) {
        errors.push(format!("disorder: {e}"));
    }
    if !errors.is_empty() {
        return Err(RunError::Invalid(errors));
    }
    let law = law.expect("checked above");

    let out_path = out_dir.join(format!("{}.csv", cfg.name));
    guard_overwrite(&out_path, &hash, force).map_err(RunError::Refused)?;

    let charges = ChargeSequence::generate(cfg.disorder.clone(), cfg.n).map_err(runtime)?;
    let params = PolymerParams { n: cfg.n, h: cfg.h };
    let free = FreeTable::build(params, &charges, &law).map_err(runtime)?;
    let suffix = SuffixTable::build(params, &charges, &law).map_err(runtime)?;
    let marginals = contact_marginals(&free, &suffix);
    let cons = ConstrainedTable::build(cfg.n, &charges, &law, cfg.n).map_err(runtime)?;
    let ln_dist = ln_contact_distribution(&cons, cfg.h).map_err(runtime)?;

    let mut rows = Vec::new();
    let mut push = |quantity: &str, index: usize, value: f64| {
        rows.push(vec![quantity.to_string(), index.to_string(), fmt_float(value)]);
    };
    for m in 0..=cfg.n {
        push("log_z_free", m, free.log_z(m));
    }
    for a in 0..=cfg.n {
        push("log_w_suffix", a, suffix.log_w(a));
    }
    for (a, &p) in marginals.iter().enumerate() {
        push("contact_marginal", a, p);
    }
    for (l, &lp) in ln_dist.iter().enumerate() {
        push("ln_contact_law", l, lp);
    }

    let meta = vec![
        ("config_hash", hash),
        ("version", env!("CARGO_PKG_VERSION").to_string()),
        ("name", cfg.name.clone()),
        ("n", cfg.n.to_string()),
        ("h", fmt_float(cfg.h)),
        ("law", serde_json::to_string(&cfg.law).map_err(runtime)?),
        ("disorder", serde_json::to_string(&cfg.disorder).map_err(runtime)?),
    ];
    write_artifact(&out_path, &meta, &["quantity", "index", "value"], &rows)
        .map_err(runtime)?;
    Ok(out_path)
}
