//! Optional config file: a flat TOML table of default parameter values.
//! Command-line flags always win over file values.

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<u32>,
    pub w: Option<u32>,
    pub r: Option<u32>,
    pub lambda: Option<f64>,
    pub xi: Option<f64>,
    pub t: Option<f64>,
    pub at_read_j: Option<u32>,
    pub method: Option<String>,
    pub t_sweep: Option<String>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub chunks: Option<u64>,
    pub write_shift: Option<f64>,
    pub read_shift: Option<f64>,
    pub epsilon: Option<f64>,
    pub t_max: Option<f64>,
    pub objective: Option<String>,
    pub format: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&std::path::Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config file {}: {e}", path.display())))
    }
}

/// Default seed when neither the flag nor the config file provides one; the
/// environment variable `QSTALE_SEED` overrides the built-in default of 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag.or(file) {
        return Ok(seed);
    }
    match std::env::var("QSTALE_SEED") {
        Ok(text) => text
            .parse::<u64>()
            .map_err(|_| CliError::Usage(format!("QSTALE_SEED must be an unsigned integer, got {text:?}"))),
        Err(_) => Ok(0),
    }
}
