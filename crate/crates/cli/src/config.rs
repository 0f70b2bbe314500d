//! Run configuration: TOML with one table per concern.

use nslift_core::fixed_point::IterationConfig;
use nslift_core::forcing::ForcingSpec;
use nslift_core::grid::GridSpec;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub origin: [f64; 3],
    #[serde(default = "unit_extent")]
    pub extent: [f64; 3],
    pub n_space: [usize; 3],
    pub t_final: f64,
    pub n_time: usize,
}

fn unit_extent() -> [f64; 3] {
    [1.0; 3]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub mu: f64,
    pub tau: f64,
}

/// Parameters of the set `Omega_C`. `m` and `c` are derived when absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaConfig {
    pub theta: f64,
    pub alpha: f64,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationSection {
    pub lambda: f64,
    pub max_iters: usize,
    #[serde(default)]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingSection {
    #[serde(flatten)]
    pub spec: ForcingSpec,
    /// Rescale the forcing to this fraction of its admissibility crossing.
    #[serde(default)]
    pub admissible_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub seed: u64,
    /// Random frequencies for `symbol-check` when no CSV is given.
    #[serde(default = "default_symbol_points")]
    pub symbol_points: usize,
    #[serde(default)]
    pub symbol_csv: Option<PathBuf>,
    /// Probe fields for the `M_T` estimators.
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Spatial resolutions of the Poisson ball study.
    #[serde(default = "default_ball")]
    pub ball_resolutions: Vec<usize>,
    /// Spatial resolutions of the factorization study.
    #[serde(default = "default_factorization")]
    pub factorization_resolutions: Vec<usize>,
    #[serde(default = "default_heat")]
    pub heat_resolution: usize,
}

fn default_symbol_points() -> usize {
    100
}
fn default_probes() -> usize {
    3
}
fn default_ball() -> Vec<usize> {
    vec![17, 33, 65]
}
fn default_factorization() -> Vec<usize> {
    vec![9, 17, 33]
}
fn default_heat() -> usize {
    17
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            seed: 0,
            symbol_points: default_symbol_points(),
            symbol_csv: None,
            probes: default_probes(),
            ball_resolutions: default_ball(),
            factorization_resolutions: default_factorization(),
            heat_resolution: default_heat(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub physics: Physics,
    pub omega: OmegaConfig,
    pub iteration: IterationSection,
    #[serde(default)]
    pub forcing: Option<ForcingSection>,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates; relative paths inside the file resolve against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &mut cfg.sweep.symbol_csv {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(ForcingSection { spec: ForcingSpec::GridFile { paths }, .. }) = &mut cfg.forcing {
            for p in paths.iter_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        let g = &self.grid;
        GridSpec::new(g.origin, g.extent, g.n_space, g.t_final, g.n_time).map_err(|e| ConfigError(format!("grid: {e}")))
    }

    pub fn forcing_spec(&self) -> ForcingSpec {
        self.forcing.as_ref().map_or(ForcingSpec::Zero, |f| f.spec.clone())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        let grid = self.grid_spec()?;
        let Physics { mu, tau } = self.physics;
        if !(mu > 0.0 && mu.is_finite()) {
            return bad(format!("physics.mu must be > 0, got {mu}"));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return bad(format!("physics.tau must be > 0, got {tau}"));
        }
        let o = self.omega;
        if !(o.theta > 0.0 && o.theta < 1.0) {
            return bad(format!("omega.theta must satisfy 0 < theta < 1, got {}", o.theta));
        }
        if !(o.alpha > 0.0 && o.alpha < 1.0) {
            return bad(format!("omega.alpha must satisfy 0 < alpha < 1, got {}", o.alpha));
        }
        for (name, v) in [("omega.m", o.m), ("omega.c", o.c)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be > 0, got {v}"));
                }
            }
        }
        self.iteration_config(1.0, 1.0).validate().map_err(|e| ConfigError(format!("iteration: {e}")))?;
        if let Some(f) = &self.forcing {
            f.spec.validate(&grid).map_err(|e| ConfigError(format!("forcing: {e}")))?;
            if let Some(a) = f.admissible_fraction {
                if !(a > 0.0 && a.is_finite()) {
                    return bad(format!("forcing.admissible_fraction must be > 0, got {a}"));
                }
            }
        }
        let s = &self.sweep;
        if s.probes == 0 {
            return bad("sweep.probes must be at least 1".into());
        }
        for (name, r) in [("sweep.ball_resolutions", &s.ball_resolutions), ("sweep.factorization_resolutions", &s.factorization_resolutions)] {
            if r.len() < 2 || r.iter().any(|n| *n < 9) {
                return bad(format!("{name} needs at least two entries, each >= 9"));
            }
        }
        if s.heat_resolution < 9 {
            return bad("sweep.heat_resolution must be >= 9".into());
        }
        Ok(())
    }

    pub fn iteration_config(&self, m_bound: f64, c_bound: f64) -> IterationConfig {
        IterationConfig {
            max_iters: self.iteration.max_iters,
            lambda: self.iteration.lambda,
            tol: self.iteration.tol,
            m_bound,
            c_bound,
            alpha: self.omega.alpha,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[grid]
n_space = [9, 9, 9]
t_final = 0.5
n_time = 5

[physics]
mu = 0.5
tau = 1.0

[omega]
theta = 0.5
alpha = 0.5

[iteration]
lambda = 0.5
max_iters = 10

[output]
dir = "out"
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(c.grid.extent, [1.0; 3]);
        assert_eq!(c.forcing_spec(), ForcingSpec::Zero);
        assert_eq!(c.sweep.symbol_points, 100);
    }

    #[test]
    fn theta_out_of_range_names_the_bound() {
        let e = RunConfig::parse(&BASE.replace("theta = 0.5", "theta = 1.5")).unwrap_err();
        assert!(e.0.contains("0 < theta < 1"), "{}", e.0);
        assert!(RunConfig::parse(&BASE.replace("mu = 0.5", "mu = -1.0")).is_err());
        assert!(RunConfig::parse(&BASE.replace("alpha = 0.5", "alpha = 0.0")).is_err());
        assert!(RunConfig::parse(&BASE.replace("n_time = 5", "n_time = 3")).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse(&BASE.replace("[output]", "[output]\ncolour = 1")).is_err());
    }

    #[test]
    fn forcing_section_parses() {
        let text = format!(
            "{BASE}\n[forcing]\nkind = \"gaussian_bump\"\ncenter = [0.5, 0.5, 0.5]\nwidth = 0.1\namplitude = [1.0, 0.0, 0.0]\nadmissible_fraction = 0.5\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.forcing.unwrap().admissible_fraction, Some(0.5));
        let outside = text.replace("center = [0.5, 0.5, 0.5]", "center = [0.1, 0.5, 0.5]");
        assert!(RunConfig::parse(&outside).is_err());
    }
}
