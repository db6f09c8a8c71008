use std::path::{Path, PathBuf};

use mild_descent::RDConfig;

pub const KNOWN_KEYS: [&str; 12] = [
    "nu",
    "beta",
    "T",
    "alpha",
    "radius",
    "epsilon",
    "n_space",
    "dt",
    "n_intervals",
    "outer_iters",
    "seed",
    "output_dir",
];

#[derive(Debug, Clone)]
pub struct CliConfig {
    pub rd: RDConfig,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            rd: RDConfig::default(),
            seed: 42,
            output_dir: None,
        }
    }
}

/// Parses a flat key=value file ('#' starts a comment). Unknown keys are a
/// hard error naming them; keys left unset fall back to the defaults and are
/// returned as notices so the caller can log them.
pub fn load_config(path: &Path) -> Result<(CliConfig, Vec<String>), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut cfg = CliConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    let mut unknown: Vec<String> = Vec::new();
    let mut notices: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(format!(
                "{}:{}:1: expected key=value, got {:?}",
                path.display(),
                line_no,
                line
            ));
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        // Column of the value, 1-based in the original (untrimmed) line.
        let value_col = raw.find('=').unwrap() + 2;
        let bad = |what: &str| {
            format!(
                "{}:{}:{}: invalid value for {}: {} ({})",
                path.display(),
                line_no,
                value_col,
                key,
                value,
                what
            )
        };
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|e| bad(&e.to_string()));
        let parse_usize = |v: &str| v.parse::<usize>().map_err(|e| bad(&e.to_string()));
        match key {
            "nu" => cfg.rd.nu = parse_f64(value)?,
            "beta" => cfg.rd.beta = parse_f64(value)?,
            "T" => cfg.rd.horizon = parse_f64(value)?,
            "alpha" => cfg.rd.alpha = parse_f64(value)?,
            "radius" => cfg.rd.radius = parse_f64(value)?,
            "epsilon" => cfg.rd.epsilon = parse_f64(value)?,
            "n_space" => cfg.rd.n_space = parse_usize(value)?,
            "dt" => cfg.rd.dt = parse_f64(value)?,
            "n_intervals" => cfg.rd.n_intervals = parse_usize(value)?,
            "outer_iters" => cfg.rd.outer_iters = parse_usize(value)?,
            "seed" => cfg.seed = value.parse::<u64>().map_err(|e| bad(&e.to_string()))?,
            "output_dir" => cfg.output_dir = Some(PathBuf::from(value)),
            other => {
                unknown.push(format!("{other} (line {line_no})"));
                continue;
            }
        }
        if seen.contains(&key) {
            notices.push(format!("config: key {key} set more than once, last value wins"));
        } else {
            // Keys are borrowed from KNOWN_KEYS so the vec owns nothing.
            seen.push(KNOWN_KEYS.iter().find(|k| **k == key).unwrap());
        }
    }
    if !unknown.is_empty() {
        return Err(format!("unknown config key(s): {}", unknown.join(", ")));
    }
    let missing: Vec<&str> = KNOWN_KEYS
        .iter()
        .filter(|k| !seen.contains(k))
        .copied()
        .collect();
    if !missing.is_empty() {
        notices.push(format!(
            "config: using defaults for unset key(s): {}",
            missing.join(", ")
        ));
    }
    cfg.rd.validate().map_err(|e| e.to_string())?;
    Ok((cfg, notices))
}
