use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::DisorderLaw;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GreenConvergence,
    FrdVerify,
    HierarchyVerify,
    PstarSweep,
    UhSweep,
    RhoVsH,
    FreeEnergy,
    HeightProfile,
    BoxDiagnostics,
    BoundsSuite,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::GreenConvergence => "green-convergence",
            Self::FrdVerify => "frd-verify",
            Self::HierarchyVerify => "hierarchy-verify",
            Self::PstarSweep => "pstar-sweep",
            Self::UhSweep => "uh-sweep",
            Self::RhoVsH => "rho-vs-h",
            Self::FreeEnergy => "free-energy",
            Self::HeightProfile => "height-profile",
            Self::BoxDiagnostics => "box-diagnostics",
            Self::BoundsSuite => "bounds-suite",
        }
    }

    fn uses_chains(self) -> bool {
        matches!(
            self,
            Self::RhoVsH | Self::FreeEnergy | Self::HeightProfile | Self::BoxDiagnostics
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub spacing: Spacing,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

/// A scalar, an explicit list, or an evenly spaced range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Single(f64),
    Values(Vec<f64>),
    Range(GridRange),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Single(v) => vec![*v],
            Grid::Values(v) => v.clone(),
            Grid::Range(r) => {
                if r.points == 1 {
                    return vec![r.from];
                }
                let step = |k: usize| k as f64 / (r.points - 1) as f64;
                (0..r.points)
                    .map(|k| match r.spacing {
                        Spacing::Linear => r.from + (r.to - r.from) * step(k),
                        Spacing::Log => (r.from.ln() + (r.to.ln() - r.from.ln()) * step(k)).exp(),
                    })
                    .collect()
            }
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        if let Grid::Range(r) = self {
            if r.points == 0 {
                return field_error(field, "points must be positive");
            }
            if r.spacing == Spacing::Log && !(r.from > 0.0 && r.to > 0.0) {
                return field_error(field, "log spacing needs positive endpoints");
            }
        }
        let v = self.values();
        if v.is_empty() {
            return field_error(field, "grid is empty");
        }
        if v.iter().any(|x| !x.is_finite()) {
            return field_error(field, "grid values must be finite");
        }
        Ok(())
    }
}

/// `F = 0` reference point of the free-energy integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorChoice {
    /// The first grid point is deep in the delocalized phase.
    Delocalized,
    /// `F = 0` exactly at the first grid point; valid at `β = 0, h = 0`.
    Exact,
}

fn default_seed() -> u64 {
    1
}
fn default_d() -> usize {
    3
}
fn default_beta() -> Grid {
    Grid::Single(1.0)
}
fn default_law() -> DisorderLaw {
    DisorderLaw::Normal
}
fn default_replicas() -> u64 {
    8
}
fn default_batches() -> usize {
    30
}
fn default_padding() -> i64 {
    18
}
fn default_varkappa() -> f64 {
    0.5
}
fn default_epsilon() -> f64 {
    0.25
}
fn default_anchor() -> AnchorChoice {
    AnchorChoice::Delocalized
}
fn default_max_sites() -> usize {
    300_000
}

/// One experiment, read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    /// Output directory, relative to the config file unless absolute.
    pub output: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_d")]
    pub d: usize,
    /// Box edge; the sampled region is the interior of `⟦0, n⟧^d`.
    pub n: Option<i64>,
    /// Box edges for `green-convergence`.
    pub sizes: Option<Vec<i64>>,
    #[serde(default = "default_beta")]
    pub beta: Grid,
    pub h: Option<Grid>,
    #[serde(default = "default_law")]
    pub disorder: DisorderLaw,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    pub sweeps: Option<usize>,
    /// Defaults to 20% of the sweeps.
    pub burn_in: Option<usize>,
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Overlap lengths for `frd-verify`.
    pub overlaps: Option<Vec<i64>>,
    #[serde(default = "default_padding")]
    pub padding: i64,
    #[serde(default = "default_varkappa")]
    pub varkappa: f64,
    /// Numbers of levels for `hierarchy-verify`.
    pub levels: Option<Vec<usize>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Put the contact window at `u_h` instead of 0 (`rho-vs-h`, `box-diagnostics`).
    #[serde(default)]
    pub shifted: bool,
    /// Start chains at `φ ≡ u_h` rather than at the window center
    /// for `β > 0` (`rho-vs-h`, `free-energy`; the other chain experiments
    /// always do).
    #[serde(default)]
    pub lifted_start: bool,
    #[serde(default = "default_anchor")]
    pub anchor: AnchorChoice,
    /// Edge of the cubes carrying harmonic averages (`box-diagnostics`).
    pub harmonic_edge: Option<i64>,
    #[serde(default = "default_max_sites")]
    pub max_sites: usize,
    /// Write the final field of every chain as little-endian f64.
    #[serde(default)]
    pub snapshots: bool,
}

fn field_error<T>(field: &str, msg: &str) -> Result<T> {
    Err(Error::Config(format!("field `{field}`: {msg}")))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the config echoed in a run manifest (`.json`).
    /// A relative `output` is resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value = serde_json::from_str(&text)?;
            let echo = manifest
                .get("config")
                .cloned()
                .ok_or_else(|| Error::Config("manifest has no `config` entry".into()))?;
            let cfg: RunConfig =
                serde_json::from_value(echo).map_err(|e| Error::Config(e.to_string()))?;
            cfg.validate()?;
            cfg
        } else {
            Self::from_toml(&text)?
        };
        if cfg.output.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.output = base.join(&cfg.output);
        }
        Ok(cfg)
    }

    pub fn h_values(&self) -> Vec<f64> {
        self.h.as_ref().map(Grid::values).unwrap_or_default()
    }

    pub fn beta_values(&self) -> Vec<f64> {
        self.beta.values()
    }

    /// Burn-in actually used.
    pub fn effective_burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.sweeps.unwrap_or(0) / 5)
    }

    pub fn validate(&self) -> Result<()> {
        use ExperimentKind as E;
        let kind = self.experiment;
        if self.d < 2 || self.d > 6 {
            return field_error("d", "must be between 2 and 6");
        }
        let needs_transience =
            matches!(kind, E::GreenConvergence | E::FrdVerify | E::HierarchyVerify) || kind.uses_chains();
        if needs_transience && self.d < 3 {
            return field_error("d", "this experiment needs d >= 3");
        }
        self.beta.validate("beta")?;
        if self.beta_values().iter().any(|b| *b < 0.0) {
            return field_error("beta", "must be nonnegative");
        }
        self.disorder.validate().or_else(|e| field_error("disorder", &e.to_string()))?;
        if let Some(h) = &self.h {
            h.validate("h")?;
        }
        let needs_h = !matches!(kind, E::GreenConvergence | E::FrdVerify);
        if needs_h && self.h.is_none() {
            return field_error("h", &format!("required by {}", kind.name()));
        }
        let hs = self.h_values();
        match kind {
            E::HierarchyVerify
            | E::PstarSweep
            | E::UhSweep
            | E::HeightProfile
            | E::BoxDiagnostics
            | E::BoundsSuite => {
                if hs.iter().any(|h| !(*h > 0.0 && *h < 1.0)) {
                    return field_error("h", "values must lie in (0, 1)");
                }
            }
            E::FreeEnergy => {
                if hs.windows(2).any(|w| w[1] <= w[0]) {
                    return field_error("h", "free-energy grid must be strictly increasing");
                }
                if hs.len() < 2 {
                    return field_error("h", "free-energy grid needs at least two points");
                }
                if self.shifted {
                    return field_error("shifted", "the window must not move along the h-grid");
                }
            }
            _ => {}
        }
        if kind == E::GreenConvergence {
            let sizes = self.sizes.as_deref().unwrap_or(&[]);
            if sizes.len() < 3 {
                return field_error("sizes", "at least three box edges are needed");
            }
            if sizes.iter().any(|n| *n < 4 || n % 2 != 0) {
                return field_error("sizes", "edges must be even and at least 4");
            }
            if sizes.windows(2).any(|w| w[1] != 2 * w[0]) {
                return field_error("sizes", "edges must double");
            }
        }
        if kind == E::FrdVerify {
            let o = self.overlaps.as_deref().unwrap_or(&[]);
            if o.is_empty() || o.iter().any(|l| *l < 2 || l % 2 != 0) {
                return field_error("overlaps", "need even overlaps >= 2");
            }
            if self.padding < 1 {
                return field_error("padding", "must be positive");
            }
        }
        if kind == E::HierarchyVerify {
            let l = self.levels.as_deref().unwrap_or(&[]);
            if l.is_empty() || l.iter().any(|j| *j == 0 || *j > 6) {
                return field_error("levels", "need level counts in 1..=6");
            }
        }
        if !(self.varkappa > 0.0 && self.varkappa < 1.0) {
            return field_error("varkappa", "must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return field_error("epsilon", "must lie in (0, 1)");
        }
        if kind.uses_chains() {
            let n = match self.n {
                Some(n) if n >= 3 => n,
                Some(_) => return field_error("n", "must be at least 3"),
                None => return field_error("n", &format!("required by {}", kind.name())),
            };
            let sites = ((n - 1) as usize).pow(self.d as u32);
            if sites > self.max_sites {
                return Err(Error::TooLarge {
                    sites,
                    limit: self.max_sites,
                });
            }
            let sweeps = match self.sweeps {
                Some(s) => s,
                None => return field_error("sweeps", &format!("required by {}", kind.name())),
            };
            if self.replicas == 0 {
                return field_error("replicas", "must be positive");
            }
            if self.batches < crate::mcmc::MIN_BATCHES {
                return field_error("batches", "at least 20 batches are required");
            }
            let burn = self.effective_burn_in();
            if burn >= sweeps || sweeps - burn < self.batches {
                return field_error("burn-in", "too few post-burn-in sweeps for the batches");
            }
        }
        if kind == E::BoxDiagnostics {
            if let Some(l) = self.harmonic_edge {
                if l < 1 {
                    return field_error("harmonic-edge", "must be positive");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PSTAR: &str = r#"
        experiment = "pstar-sweep"
        output = "out"
        beta = 1.0
        h = { spacing = "log", from = 1e-4, to = 1e-1, points = 13 }
    "#;

    #[test]
    fn parses_grids() {
        let cfg = RunConfig::from_toml(PSTAR).unwrap();
        let hs = cfg.h_values();
        assert_eq!(hs.len(), 13);
        assert!((hs[0] - 1e-4).abs() < 1e-18 && (hs[12] - 0.1).abs() < 1e-15);
        assert!((hs[4] - 1e-3).abs() < 1e-15);
        assert_eq!(cfg.disorder, DisorderLaw::Normal);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{PSTAR}\nbogus = 3\n");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn field_errors_name_the_field() {
        let text = PSTAR.replace("beta = 1.0", "beta = -1.0");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("`beta`"), "{err}");
        let text = "experiment = \"rho-vs-h\"\noutput = \"o\"\nh = 0.1\nn = 8\n";
        let err = RunConfig::from_toml(text).unwrap_err().to_string();
        assert!(err.contains("`sweeps`"), "{err}");
    }

    #[test]
    fn oversized_boxes_ask_to_reduce_n() {
        let text = "experiment = \"rho-vs-h\"\noutput = \"o\"\nh = 0.1\nn = 200\nsweeps = 100\n";
        let err = RunConfig::from_toml(text).unwrap_err().to_string();
        assert!(err.contains("reduce N"), "{err}");
    }
}
