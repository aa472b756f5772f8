//! Experiment configuration.
//!
//! Configs are TOML files with dotted keys (`adversary.kind = "far_cluster"`)
//! or the equivalent tables. Unknown keys are rejected. [`ExperimentConfig::resolve`]
//! validates ranges and produces the typed inputs of a run.

use std::fs;
use std::path::{Path, PathBuf};

use attrlearn_core::distributions::LogConcaveKind;
use attrlearn_core::erm::ErmOptions;
use attrlearn_core::geometry::DykstraOptions;
use attrlearn_core::learner::{Access, ConstantsProfile, LearnerConfig, ProfileMode, SizingPolicy, SolverOptions};
use attrlearn_core::oracle::{AdversaryKind, AdversaryStrategy};
use attrlearn_core::outlier::{CertifyOptions, FindWeightsOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Active,
    Passive,
}

impl Mode {
    pub fn access(self) -> Access {
        match self {
            Mode::Active => Access::Active,
            Mode::Passive => Access::Passive,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "active" => Ok(Mode::Active),
            "passive" => Ok(Mode::Passive),
            other => Err(format!("unknown mode `{other}` (expected active or passive)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdversaryConfig {
    pub kind: String,
    pub cluster_scale: f64,
    pub flip_margin: f64,
    pub antipodal_scale: f64,
    pub jitter: f64,
    pub mixture: [f64; 3],
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        let s = AdversaryStrategy::default();
        AdversaryConfig {
            kind: "far_cluster".into(),
            cluster_scale: s.cluster_scale,
            flip_margin: s.flip_margin,
            antipodal_scale: s.antipodal_scale,
            jitter: s.jitter,
            mixture: s.mixture,
        }
    }
}

/// A named constants profile with optional per-constant overrides.
/// `c5`, `c6`, `kappa` and `C1` are always derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c7: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c8: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c9: Option<f64>,
    #[serde(rename = "C2", skip_serializing_if = "Option::is_none")]
    pub big_c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_bar: Option<f64>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            name: "practical".into(),
            c0: None,
            c1: None,
            c2: None,
            c3: None,
            c4: None,
            c7: None,
            c8: None,
            c9: None,
            big_c2: None,
            c_bar: None,
        }
    }
}

impl ProfileConfig {
    pub fn resolve(&self) -> Result<ConstantsProfile, ConfigError> {
        let base = ConstantsProfile::by_name(&self.name)
            .ok_or_else(|| invalid("profile.name", format!("unknown profile `{}`", self.name)))?;
        let overrides = [
            (0, self.c0),
            (1, self.c1),
            (2, self.c2),
            (3, self.c3),
            (4, self.c4),
            (7, self.c7),
            (8, self.c8),
            (9, self.c9),
        ];
        if overrides.iter().all(|(_, v)| v.is_none()) && self.big_c2.is_none() && self.c_bar.is_none() {
            return Ok(base);
        }
        let mut c = base.c;
        for (i, v) in overrides {
            if let Some(v) = v {
                c[i] = v;
            }
        }
        ConstantsProfile::derive(
            base.mode,
            c,
            self.big_c2.unwrap_or(base.big_c2),
            self.c_bar.unwrap_or(base.c_bar),
        )
        .map_err(|e| invalid("profile", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SizingConfig {
    /// `practical` or `theory`.
    pub policy: String,
    pub a: f64,
    pub b: f64,
}

impl Default for SizingConfig {
    fn default() -> Self {
        let (a, b) = SizingPolicy::default().constants();
        SizingConfig {
            policy: "practical".into(),
            a,
            b,
        }
    }
}

impl SizingConfig {
    pub fn resolve(&self) -> Result<SizingPolicy, ConfigError> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(invalid("sizing.a", "must be positive"));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(invalid("sizing.b", "must be positive"));
        }
        match self.policy.as_str() {
            "practical" => Ok(SizingPolicy::Practical { a: self.a, b: self.b }),
            "theory" => Ok(SizingPolicy::Theory { a: self.a, b: self.b }),
            other => Err(invalid("sizing.policy", format!("unknown policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_cuts: usize,
    pub cut_target: f64,
    pub retry_inflated: bool,
    pub certify_tol: f64,
    pub certify_max_iter: usize,
    pub certify_dual_iter: usize,
    pub dykstra_max_iter: usize,
    pub dykstra_tol: f64,
    pub erm_max_iter: usize,
    pub erm_probes: usize,
    pub n_mc: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverOptions::default();
        SolverConfig {
            max_cuts: s.find_weights.max_cuts,
            cut_target: s.find_weights.cut_target,
            retry_inflated: s.retry_inflated,
            certify_tol: s.find_weights.certify.tol,
            certify_max_iter: s.find_weights.certify.max_iter,
            certify_dual_iter: s.find_weights.certify.dual_iter,
            dykstra_max_iter: s.erm.dykstra.max_iter,
            dykstra_tol: s.erm.dykstra.tol,
            erm_max_iter: s.erm.max_iter,
            erm_probes: s.erm.probes,
            n_mc: s.n_mc,
        }
    }
}

impl SolverConfig {
    pub fn resolve(&self) -> Result<SolverOptions, ConfigError> {
        if self.max_cuts < 1 {
            return Err(invalid("solver.max_cuts", "must be at least 1"));
        }
        if !(self.cut_target > 0.0 && self.cut_target <= 1.0) {
            return Err(invalid("solver.cut_target", "must lie in (0, 1]"));
        }
        if !(self.certify_tol > 0.0) {
            return Err(invalid("solver.certify_tol", "must be positive"));
        }
        if !(self.dykstra_tol > 0.0) || self.dykstra_max_iter < 1 {
            return Err(invalid("solver.dykstra_tol", "tolerance and iteration cap must be positive"));
        }
        if self.erm_max_iter < 1 {
            return Err(invalid("solver.erm_max_iter", "must be at least 1"));
        }
        if self.n_mc < 1 {
            return Err(invalid("solver.n_mc", "must be at least 1"));
        }
        let dykstra = DykstraOptions {
            max_iter: self.dykstra_max_iter,
            tol: self.dykstra_tol,
        };
        Ok(SolverOptions {
            find_weights: FindWeightsOptions {
                max_cuts: self.max_cuts,
                cut_target: self.cut_target,
                certify: CertifyOptions {
                    tol: self.certify_tol,
                    max_iter: self.certify_max_iter,
                    dual_iter: self.certify_dual_iter,
                    dykstra,
                    decide_at: None,
                },
            },
            erm: ErmOptions {
                max_iter: self.erm_max_iter,
                probes: self.erm_probes,
                dykstra,
            },
            retry_inflated: self.retry_inflated,
            n_mc: self.n_mc,
        })
    }
}

fn default_dist() -> String {
    "gaussian".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub s: usize,
    pub eps: f64,
    pub delta: f64,
    /// Absolute noise rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Noise rate as a multiple of the tolerated rate `c₅·ε`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_over_eps: Option<f64>,
    #[serde(default = "default_dist")]
    pub dist: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub sizing: SizingConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// Validated inputs of an experiment.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub d: usize,
    pub s: usize,
    pub eps: f64,
    pub delta: f64,
    pub eta: f64,
    pub kind: LogConcaveKind,
    pub adversary: AdversaryStrategy,
    pub learner: LearnerConfig,
    pub seeds: Vec<u64>,
    pub mode: Mode,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = self.to_toml()?;
        fs::write(path, text).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// The seeds to run, in order.
    pub fn seed_list(&self) -> Vec<u64> {
        match (self.seed, self.seeds.is_empty()) {
            (Some(s), true) => vec![s],
            (None, false) => self.seeds.clone(),
            _ => vec![0],
        }
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        if self.d < 1 {
            return Err(invalid("d", "must be at least 1"));
        }
        if self.s < 1 || self.s > self.d {
            return Err(invalid("s", "must satisfy 1 ≤ s ≤ d"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid("eps", "must lie in (0, 1)"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", "must lie in (0, 1)"));
        }
        if self.seed.is_some() && !self.seeds.is_empty() {
            return Err(invalid("seeds", "give either `seed` or `seeds`, not both"));
        }
        let kind = LogConcaveKind::from_name(&self.dist)
            .ok_or_else(|| invalid("dist", format!("unknown distribution `{}`", self.dist)))?;
        let profile = self.profile.resolve()?;
        let eta = match (self.eta, self.eta_over_eps) {
            (Some(_), Some(_)) => return Err(invalid("eta", "give either `eta` or `eta_over_eps`, not both")),
            (Some(e), None) => e,
            (None, Some(r)) => {
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(invalid("eta_over_eps", "must be finite and non-negative"));
                }
                r * profile.c5() * self.eps
            }
            (None, None) => 0.0,
        };
        if !(0.0..0.5).contains(&eta) {
            return Err(invalid("eta", format!("noise rate {eta} must lie in [0, 1/2)")));
        }
        let adv_kind = AdversaryKind::from_name(&self.adversary.kind)
            .ok_or_else(|| invalid("adversary.kind", format!("unknown adversary `{}`", self.adversary.kind)))?;
        let adversary = AdversaryStrategy {
            kind: adv_kind,
            cluster_scale: self.adversary.cluster_scale,
            flip_margin: self.adversary.flip_margin,
            antipodal_scale: self.adversary.antipodal_scale,
            jitter: self.adversary.jitter,
            mixture: self.adversary.mixture,
        };
        adversary.validate().map_err(|e| invalid("adversary", e.to_string()))?;
        let learner = LearnerConfig {
            profile,
            sizing: self.sizing.resolve()?,
            solver: self.solver.resolve()?,
        };
        Ok(Resolved {
            d: self.d,
            s: self.s,
            eps: self.eps,
            delta: self.delta,
            eta,
            kind,
            adversary,
            learner,
            seeds: self.seed_list(),
            mode: self.mode,
        })
    }

    /// Sets a sweepable key from its textual value.
    pub fn set_axis(&mut self, axis: &str, value: &str) -> Result<(), ConfigError> {
        let num = |v: &str| -> Result<f64, ConfigError> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| invalid(axis, format!("`{v}` is not a number")))
        };
        let int = |v: &str| -> Result<usize, ConfigError> {
            v.trim()
                .parse::<usize>()
                .map_err(|_| invalid(axis, format!("`{v}` is not a non-negative integer")))
        };
        match axis {
            "d" => self.d = int(value)?,
            "s" => self.s = int(value)?,
            "eps" => self.eps = num(value)?,
            "eta_over_eps" => {
                self.eta = None;
                self.eta_over_eps = Some(num(value)?);
            }
            "adversary" | "adversary.kind" => self.adversary.kind = value.trim().to_string(),
            other => {
                return Err(invalid(
                    "axis",
                    format!("`{other}` is not sweepable (d, s, eps, eta_over_eps, adversary)"),
                ))
            }
        }
        self.resolve().map(|_| ())
    }
}

/// Human-readable `key = value` listing of a resolved profile.
pub fn describe_profile(p: &ConstantsProfile) -> String {
    let mut out = String::new();
    let mode = match p.mode {
        ProfileMode::Theory => "theory",
        ProfileMode::Practical => "practical",
    };
    out.push_str(&format!("mode = \"{mode}\"\n"));
    for (i, v) in p.c.iter().enumerate() {
        out.push_str(&format!("c{i} = {v:e}\n"));
    }
    out.push_str(&format!("C1 = {:e}\n", p.big_c1));
    out.push_str(&format!("C2 = {:e}\n", p.big_c2));
    out.push_str(&format!("c_bar = {:e}\n", p.c_bar));
    out.push_str(&format!("kappa = {:e}\n", p.kappa));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "d = 50\ns = 3\neps = 0.1\ndelta = 0.1\neta = 0.0\ndist = \"gaussian\"\nseed = 1\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.adversary, AdversaryConfig::default());
        assert_eq!(cfg.mode, Mode::Active);
        assert_eq!(cfg.seed_list(), vec![1]);
    }

    #[test]
    fn rejects_large_eta() {
        let text = MINIMAL.replace("eta = 0.0", "eta = 0.6");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = format!("{MINIMAL}bogus = 3\n");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(ConfigError::Parse(_))));
        let text = format!("{MINIMAL}adversary.nope = 1\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn dotted_keys_parse() {
        let text = format!("{MINIMAL}adversary.kind = \"antipodal_in_band\"\nsolver.max_cuts = 17\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.adversary.kind, "antipodal_in_band");
        assert_eq!(cfg.solver.max_cuts, 17);
    }

    #[test]
    fn round_trip() {
        let text = format!("{MINIMAL}profile.c0 = 0.3\nsizing.a = 0.07\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, back);
    }
}
