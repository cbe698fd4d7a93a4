//! `key = value` run configuration. Blank lines and `#` comments are
//! ignored; unknown keys and duplicates are errors.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use fmd_core::cnn::{NetworkConfig, TrainConfig};
use fmd_core::{sample_basis, FiberSpec, GridSpec, ModeBasis};

use crate::error::{io_err, CliError, Result};

pub const REQUIRED_KEYS: &[&str] = &["core_radius_um", "numerical_aperture", "wavelength_um", "modes", "resolution"];

pub const OPTIONAL_KEYS: &[&str] = &[
    "window_half_width_um",
    "preset",
    "seed",
    "samples_per_epoch",
    "batch_size",
    "epochs",
    "lr_schedule",
    "train_noise_sigma",
    "holdout_samples",
    "noise_sigma",
    "quantize",
    "eval_samples",
    "sweep_noise",
    "sweep_resolution",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub core_radius_um: f64,
    pub numerical_aperture: f64,
    pub wavelength_um: f64,
    pub modes: usize,
    /// grid and network input side
    pub resolution: usize,
    /// defaults to twice the core radius
    pub window_half_width_um: Option<f64>,
    pub preset: String,
    pub seed: u64,
    pub train: TrainConfig,
    /// noise applied to generated datasets and evaluation samples
    pub noise_sigma: f64,
    /// round generated images to 8-bit levels
    pub quantize: bool,
    pub eval_samples: usize,
    pub sweep_noise: Vec<f64>,
    pub sweep_resolution: Vec<usize>,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| CliError::ConfigValue(format!("{key}: cannot parse '{v}'")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| parse(key, s.trim())).collect()
}

/// `epoch:lr` pairs, comma separated.
fn parse_schedule(v: &str) -> Result<Vec<(usize, f64)>> {
    v.split(',')
        .map(|item| {
            let (e, lr) = item
                .split_once(':')
                .ok_or_else(|| CliError::ConfigValue(format!("lr_schedule: '{item}' is not epoch:lr")))?;
            Ok((parse("lr_schedule", e.trim())?, parse("lr_schedule", lr.trim())?))
        })
        .collect()
}

impl RunConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| CliError::Config { line: i + 1, message };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key = value, got '{line}'")))?;
            let (k, v) = (k.trim(), v.trim());
            if !REQUIRED_KEYS.contains(&k) && !OPTIONAL_KEYS.contains(&k) {
                return Err(bad(format!("unknown key '{k}'")));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(bad(format!("duplicate key '{k}'")));
            }
        }
        if let Some(missing) = REQUIRED_KEYS.iter().find(|k| !map.contains_key(**k)) {
            return Err(CliError::ConfigValue(format!("missing required key '{missing}'")));
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let req = |k: &str| get(k).expect("checked above");
        let defaults = TrainConfig::default();
        let seed = get("seed").map_or(Ok(0), |v| parse("seed", v))?;
        let train = TrainConfig {
            samples_per_epoch: get("samples_per_epoch").map_or(Ok(defaults.samples_per_epoch), |v| parse("samples_per_epoch", v))?,
            batch_size: get("batch_size").map_or(Ok(defaults.batch_size), |v| parse("batch_size", v))?,
            epochs: get("epochs").map_or(Ok(defaults.epochs), |v| parse("epochs", v))?,
            lr_schedule: get("lr_schedule").map_or(Ok(defaults.lr_schedule), parse_schedule)?,
            seed,
            noise_sigma: get("train_noise_sigma").map_or(Ok(0.0), |v| parse("train_noise_sigma", v))?,
            holdout_samples: get("holdout_samples").map_or(Ok(defaults.holdout_samples), |v| parse("holdout_samples", v))?,
        };
        let cfg = Self {
            core_radius_um: parse("core_radius_um", req("core_radius_um"))?,
            numerical_aperture: parse("numerical_aperture", req("numerical_aperture"))?,
            wavelength_um: parse("wavelength_um", req("wavelength_um"))?,
            modes: parse("modes", req("modes"))?,
            resolution: parse("resolution", req("resolution"))?,
            window_half_width_um: get("window_half_width_um").map(|v| parse("window_half_width_um", v)).transpose()?,
            preset: get("preset").unwrap_or("compact").to_string(),
            seed,
            train,
            noise_sigma: get("noise_sigma").map_or(Ok(0.0), |v| parse("noise_sigma", v))?,
            quantize: get("quantize").map_or(Ok(false), |v| parse("quantize", v))?,
            eval_samples: get("eval_samples").map_or(Ok(1000), |v| parse("eval_samples", v))?,
            sweep_noise: get("sweep_noise").map_or(Ok(vec![0.0, 0.08, 0.16, 0.32]), |v| parse_list("sweep_noise", v))?,
            sweep_resolution: get("sweep_resolution").map_or(Ok(vec![64, 128, 256]), |v| parse_list("sweep_resolution", v))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse_str(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(CliError::ConfigValue("modes must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) || self.sweep_noise.iter().any(|s| !(*s >= 0.0)) {
            return Err(CliError::ConfigValue("noise levels must be nonnegative".into()));
        }
        self.train.validate()?;
        self.network()?.validate()?;
        self.fiber()?;
        Ok(())
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
            self.train.seed = s;
        }
        self
    }

    pub fn fiber(&self) -> Result<FiberSpec> {
        Ok(FiberSpec::new(self.core_radius_um, self.numerical_aperture, self.wavelength_um)?)
    }

    pub fn grid_at(&self, resolution: usize) -> Result<GridSpec> {
        let w = self.window_half_width_um.unwrap_or(2.0 * self.core_radius_um);
        Ok(GridSpec::new(resolution, w)?)
    }

    pub fn basis_at(&self, resolution: usize) -> Result<ModeBasis> {
        Ok(sample_basis(&self.fiber()?, &self.grid_at(resolution)?, self.modes)?)
    }

    pub fn basis(&self) -> Result<ModeBasis> {
        self.basis_at(self.resolution)
    }

    pub fn network(&self) -> Result<NetworkConfig> {
        let mut net = NetworkConfig::preset(&self.preset, self.modes)?;
        net.input_resolution = self.resolution;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "core_radius_um = 4.1\nnumerical_aperture = 0.14\nwavelength_um = 1.073\nmodes = 3\nresolution = 64\n";

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::parse_str(MINIMAL).unwrap();
        assert_eq!(c.modes, 3);
        assert_eq!(c.preset, "compact");
        assert_eq!(c.train.batch_size, 64);
        assert_eq!(c.sweep_noise, vec![0.0, 0.08, 0.16, 0.32]);
        assert_eq!(c.basis().unwrap().len(), 3);
    }

    #[test]
    fn comments_and_overrides() {
        let text = format!("# fiber\n{MINIMAL}\nlr_schedule = 0:0.05, 7:0.005 # decay\nseed = 9\nquantize = true\n");
        let c = RunConfig::parse_str(&text).unwrap();
        assert_eq!(c.train.lr_schedule, vec![(0, 0.05), (7, 0.005)]);
        assert_eq!(c.train.seed, 9);
        assert!(c.quantize);
        assert_eq!(c.with_seed(Some(4)).train.seed, 4);
    }

    #[test]
    fn rejects_unknown_duplicate_and_missing() {
        let unknown = format!("{MINIMAL}colour = blue\n");
        assert!(matches!(RunConfig::parse_str(&unknown), Err(CliError::Config { line: 6, .. })));
        let dup = format!("{MINIMAL}modes = 3\n");
        assert!(matches!(RunConfig::parse_str(&dup), Err(CliError::Config { .. })));
        let missing = MINIMAL.replace("modes = 3\n", "");
        let err = RunConfig::parse_str(&missing).unwrap_err().to_string();
        assert!(err.contains("modes"), "{err}");
        assert!(RunConfig::parse_str(&MINIMAL.replace("64", "sixty")).is_err());
        assert!(RunConfig::parse_str(&format!("{MINIMAL}preset = huge\n")).is_err());
    }
}
