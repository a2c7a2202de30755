//! Experiment configuration: TOML schema, parsing, and static validation.

use serde::Deserialize;
use sha2::{Digest, Sha256};

use pinning_core::dp::MAX_TABLE_BYTES;
use pinning_core::{DisorderSpec, InterArrivalLaw, LawSpec};

/// A parsed experiment configuration together with the hash of the exact
/// bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// hex SHA-256 of the raw file bytes
    pub hash: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Output file stem and the label stamped into every row.
    pub name: String,
    /// Master seed for all sampling randomness (disorder seeds live in
    /// `[disorder]`).
    pub master_seed: u64,
    pub law: LawSpec,
    #[serde(default = "default_disorder")]
    pub disorder: DisorderSpec,
    pub experiment: Experiment,
}

fn default_disorder() -> DisorderSpec {
    DisorderSpec::zero()
}

/// The experiment menu. Each variant is one self-contained study writing one
/// CSV artifact.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Conditioned paths below the critical contact density: the largest gap
    /// should be macroscopic (a single big jump).
    BigJumpGaps {
        n: Vec<usize>,
        target_fraction: f64,
        replicas: u32,
        samples_per_replica: u32,
    },
    /// Conditioned paths above the critical density: all gaps logarithmic.
    LogGaps {
        n: Vec<usize>,
        target_fraction: f64,
        replicas: u32,
        samples_per_replica: u32,
    },
    /// The same conditioning run side by side in the given disorder and in
    /// the pure environment.
    DisorderGapContrast {
        n: Vec<usize>,
        target_fraction: f64,
        replicas: u32,
        samples_per_replica: u32,
    },
    /// Contact-number mean/variance and local-CLT residual along a ladder of
    /// polymer sizes.
    LcltLadder { n: Vec<usize>, h: f64 },
    /// Empirical large-deviation rate of the contact fraction on a grid,
    /// against the closed-form pure rate function.
    RateGrid {
        n: usize,
        h: f64,
        r_lo: f64,
        r_hi: f64,
        dr: f64,
    },
    /// Sliding-window contact densities of conditioned paths.
    WindowProfile {
        n: usize,
        target_fraction: f64,
        w: Vec<usize>,
        samples: u32,
    },
    /// Exact vs sampled contact-number law under a contact-fraction
    /// functional `U`.
    UmodelCompare {
        n: usize,
        u: ContactFunctional,
        samples: u32,
    },
    /// Exact vs sampled contact-number law under soft conditioning to an
    /// `l` window.
    SoftConditioning {
        n: usize,
        h: f64,
        l_lo: usize,
        l_hi: usize,
        samples: u32,
    },
}

/// TOML-specifiable contact-fraction functionals `U(r)`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContactFunctional {
    /// `U(r) = slope * r` — identical to the free model at `h = slope`.
    Linear { slope: f64 },
    /// `U(r) = slope * r - strength * (r - center)^2`.
    Quadratic { slope: f64, strength: f64, center: f64 },
}

impl ContactFunctional {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            ContactFunctional::Linear { slope } => slope * r,
            ContactFunctional::Quadratic { slope, strength, center } => {
                slope * r - strength * (r - center) * (r - center)
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            ContactFunctional::Linear { slope } => format!("linear(slope={slope})"),
            ContactFunctional::Quadratic { slope, strength, center } => {
                format!("quadratic(slope={slope},strength={strength},center={center})")
            }
        }
    }
}

/// Parses a configuration file's bytes.
pub fn parse_config(bytes: &[u8]) -> Result<LoadedConfig, String> {
    let text = std::str::from_utf8(bytes).map_err(|e| format!("config is not UTF-8: {e}"))?;
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| format!("TOML parse error: {e}"))?;
    let hash = hex(&Sha256::digest(bytes));
    Ok(LoadedConfig { config, hash })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Static validation: every problem found, as human-readable lines.
/// An empty result means the configuration is runnable.
pub fn validate(config: &ExperimentConfig) -> Vec<String> {
    let mut errors = Vec::new();
    if !valid_name(&config.name) {
        errors.push(format!(
            "name {:?} must be non-empty and use only [A-Za-z0-9_-] (it becomes a file name)",
            config.name
        ));
    }
    let law = match InterArrivalLaw::build(config.law.clone()) {
        Ok(law) => Some(law),
        Err(e) => {
            errors.push(format!("gap law: {e}"));
            None
        }
    };
    if let Err(e) = pinning_core::ChargeSequence::generate(config.disorder.clone(), 1) {
        errors.push(format!("disorder: {e}"));
    }
    let check_fraction = |errors: &mut Vec<String>, r: f64, what: &str| {
        if !(r > 0.0 && r < 1.0) {
            errors.push(format!("{what} = {r} must lie strictly inside (0, 1)"));
        }
    };
    let check_sizes = |errors: &mut Vec<String>, ns: &[usize]| {
        if ns.is_empty() {
            errors.push("n list must not be empty".into());
        }
        for &n in ns {
            if n < 2 {
                errors.push(format!("n = {n} is too small"));
            }
            if table_bytes(n) > MAX_TABLE_BYTES {
                errors.push(format!(
                    "n = {n} needs a {} byte table, over the {} cap",
                    table_bytes(n),
                    MAX_TABLE_BYTES
                ));
            }
        }
        if ns.windows(2).any(|w| w[0] >= w[1]) {
            errors.push("n list must be strictly increasing".into());
        }
    };
    let check_feasible_l = |errors: &mut Vec<String>, law: &Option<InterArrivalLaw>, n: usize, r: f64| {
        if let Some(law) = law {
            if let Some(t_max) = law.spec().t_max {
                let l = ((r * n as f64).floor() as usize).max(1);
                if (l as u64) * t_max < n as u64 {
                    errors.push(format!(
                        "target_fraction {r} gives l = {l}, but gaps capped at {t_max} cannot span n = {n}"
                    ));
                }
            }
        }
    };
    match &config.experiment {
        Experiment::BigJumpGaps { n, target_fraction, replicas, samples_per_replica }
        | Experiment::LogGaps { n, target_fraction, replicas, samples_per_replica }
        | Experiment::DisorderGapContrast { n, target_fraction, replicas, samples_per_replica } => {
            check_sizes(&mut errors, n);
            check_fraction(&mut errors, *target_fraction, "target_fraction");
            if *replicas == 0 {
                errors.push("replicas must be >= 1".into());
            }
            if *samples_per_replica == 0 {
                errors.push("samples_per_replica must be >= 1".into());
            }
            for &n in n {
                check_feasible_l(&mut errors, &law, n, *target_fraction);
            }
        }
        Experiment::LcltLadder { n, h } => {
            check_sizes(&mut errors, n);
            if !h.is_finite() {
                errors.push(format!("h = {h} must be finite"));
            }
        }
        Experiment::RateGrid { n, h, r_lo, r_hi, dr } => {
            check_sizes(&mut errors, std::slice::from_ref(n));
            if !h.is_finite() {
                errors.push(format!("h = {h} must be finite"));
            }
            check_fraction(&mut errors, *r_lo, "r_lo");
            check_fraction(&mut errors, *r_hi, "r_hi");
            if !(r_lo < r_hi) {
                errors.push(format!("need r_lo < r_hi (got {r_lo} >= {r_hi})"));
            }
            if !(*dr > 0.0 && *dr < 1.0) {
                errors.push(format!("dr = {dr} must lie in (0, 1)"));
            }
        }
        Experiment::WindowProfile { n, target_fraction, w, samples } => {
            check_sizes(&mut errors, std::slice::from_ref(n));
            check_fraction(&mut errors, *target_fraction, "target_fraction");
            check_feasible_l(&mut errors, &law, *n, *target_fraction);
            if w.is_empty() {
                errors.push("window list w must not be empty".into());
            }
            for &w in w {
                if w == 0 || w > *n {
                    errors.push(format!("window w = {w} outside 1..={n}"));
                }
            }
            if *samples == 0 {
                errors.push("samples must be >= 1".into());
            }
        }
        Experiment::UmodelCompare { n, u: _, samples } => {
            check_sizes(&mut errors, std::slice::from_ref(n));
            if *samples == 0 {
                errors.push("samples must be >= 1".into());
            }
        }
        Experiment::SoftConditioning { n, h, l_lo, l_hi, samples } => {
            check_sizes(&mut errors, std::slice::from_ref(n));
            if !h.is_finite() {
                errors.push(format!("h = {h} must be finite"));
            }
            if *l_lo < 1 || l_lo > l_hi || *l_hi > *n {
                errors.push(format!("window [{l_lo}, {l_hi}] invalid for n = {n}"));
            }
            if *samples == 0 {
                errors.push("samples must be >= 1".into());
            }
        }
    }
    errors
}

/// Bytes of the triangular constrained table at full depth.
pub(crate) fn table_bytes(n: usize) -> u128 {
    let n = n as u128;
    (n + 1) * (n + 2) / 2 * 8
}

/// Whether a string is safe to use as an artifact file stem.
pub(crate) fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Evaluation grid for the `pure-curves` subcommand: pinning strengths for
/// the curve table and contact fractions for the rate table.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PureGrid {
    pub h: Vec<f64>,
    #[serde(default)]
    pub r: Vec<f64>,
}

/// Parses the `pure-curves` inputs. The artifact hash covers both files.
pub fn parse_pure_inputs(
    law_bytes: &[u8],
    grid_bytes: &[u8],
) -> Result<(LawSpec, PureGrid, String), String> {
    let law_text =
        std::str::from_utf8(law_bytes).map_err(|e| format!("law file is not UTF-8: {e}"))?;
    let law: LawSpec =
        toml::from_str(law_text).map_err(|e| format!("law TOML parse error: {e}"))?;
    let grid_text =
        std::str::from_utf8(grid_bytes).map_err(|e| format!("grid file is not UTF-8: {e}"))?;
    let grid: PureGrid =
        toml::from_str(grid_text).map_err(|e| format!("grid TOML parse error: {e}"))?;
    let mut digest = Sha256::new();
    digest.update(law_bytes);
    digest.update(grid_bytes);
    Ok((law, grid, hex(&digest.finalize())))
}

/// Input for the `dp-dump` subcommand: one environment, one polymer size,
/// one pinning strength.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpConfig {
    #[serde(default = "default_dump_name")]
    pub name: String,
    pub law: LawSpec,
    #[serde(default = "default_disorder")]
    pub disorder: DisorderSpec,
    pub n: usize,
    pub h: f64,
}

fn default_dump_name() -> String {
    "dp_dump".into()
}

/// Parses a `dp-dump` configuration file's bytes.
pub fn parse_dump_config(bytes: &[u8]) -> Result<(DumpConfig, String), String> {
    let text = std::str::from_utf8(bytes).map_err(|e| format!("config is not UTF-8: {e}"))?;
    let config: DumpConfig =
        toml::from_str(text).map_err(|e| format!("TOML parse error: {e}"))?;
    Ok((config, hex(&Sha256::digest(bytes))))
}
