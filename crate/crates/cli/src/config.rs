//! Experiment configuration: TOML with scenario keys at the top level and
//! one bracketed section per component. Omitted keys take the defaults of
//! [`ScenarioConfig::default`].

use std::path::Path;

use fogform::analysis::CERTAIN;
use fogform::distribution::SolverConfig;
use fogform::formation::IdealNodeSpec;
use fogform::queueing::{dbm_to_watts, BandwidthScheme, ChannelParams, LocalCloudSpec};
use fogform::scenario::{ArrivalSpec, ScenarioConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("override '{key}': {message}")]
    Override { key: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Output families of the `sweep` command, in output order.
pub const FAMILIES: [&str; 10] = [
    "latency_vs_rate",
    "local_fraction",
    "latency_vs_size",
    "gamma_trace",
    "fog_tx_rate",
    "task_split",
    "fixed_gamma",
    "efficiency",
    "offline_size",
    "formation_probability",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    /// Offered load at the initial node, packets/s.
    pub x_rate: f64,
    pub n_observations: usize,
    pub tau: f64,
    pub gamma0: f64,
    pub replications: usize,
    pub seed: u64,
    pub baseline_sample: usize,
    pub max_iterations: usize,
    pub j_max: usize,
    pub replay_streams: bool,
    pub fixed_gamma_budget: usize,
    pub channel: ChannelSection,
    pub local_cloud: LocalCloudSection,
    pub arrival: ArrivalSection,
    pub ideal: IdealSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub analyze: AnalyzeSection,
    pub offline: OfflineSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub fading: f64,
    pub bandwidth_hz: f64,
    pub packet_bits: f64,
    pub scheme: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalCloudSection {
    pub local_comp_rate: f64,
    pub local_proc_delay: f64,
    pub cloud_proc_delay: f64,
    pub cloud_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrivalSection {
    pub disk_radius: f64,
    pub comp_rate_min: f64,
    pub comp_rate_max: f64,
    pub proc_delay_min: f64,
    pub proc_delay_max: f64,
}

/// Ideal and worst neighbor; unset fields follow the arrival support.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdealSection {
    pub best_comp_rate: Option<f64>,
    pub best_proc_delay: Option<f64>,
    pub min_distance: Option<f64>,
    pub worst_comp_rate: Option<f64>,
    pub worst_proc_delay: Option<f64>,
    pub max_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub stability_margin: f64,
    pub tol_u: f64,
    pub tol_lambda: f64,
    pub spread_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub families: Vec<String>,
    /// Replications per sweep point; unset uses the top-level count.
    pub replications: Option<usize>,
    pub x_rates: Vec<f64>,
    pub cloud_distances: Vec<f64>,
    pub fadings: Vec<f64>,
    pub size_min: usize,
    pub size_max: usize,
    pub size_rates: Vec<f64>,
    pub size_proc_delays: Vec<f64>,
    pub schemes: Vec<String>,
    pub trace_cloud_distances: Vec<f64>,
    pub trace_iterations: usize,
    pub trace_tau: f64,
    pub fixed_gammas: Vec<f64>,
    pub fixed_cloud_distances: Vec<f64>,
    pub efficiency_gamma: f64,
    pub efficiency_cloud_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub observations: Vec<usize>,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_step: f64,
    /// Target size and per-neighbor load; unset uses Phase 1.
    pub j_hat: Option<usize>,
    pub lambda_hat: Option<f64>,
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfflineSection {
    pub distances: Vec<f64>,
    pub comp_rate: f64,
    pub proc_delay: f64,
    pub cloud_distance: f64,
    pub size_min: usize,
    pub size_max: usize,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let d = ScenarioConfig::default();
        Self {
            x_rate: d.x_rate,
            n_observations: d.n_observations,
            tau: d.tau,
            gamma0: d.gamma0,
            replications: d.replications,
            seed: d.seed,
            baseline_sample: d.baseline_sample,
            max_iterations: d.max_iterations,
            j_max: d.j_max,
            replay_streams: d.replay_streams,
            fixed_gamma_budget: d.fixed_gamma_budget,
            channel: ChannelSection::default(),
            local_cloud: LocalCloudSection::default(),
            arrival: ArrivalSection::default(),
            ideal: IdealSection::default(),
            solver: SolverSection::default(),
            sweep: SweepSection::default(),
            analyze: AnalyzeSection::default(),
            offline: OfflineSection::default(),
        }
    }
}

impl Default for ChannelSection {
    fn default() -> Self {
        let c = ChannelParams::table_defaults();
        Self {
            tx_power_dbm: 20.0,
            noise_psd_dbm_hz: -174.0,
            beta1: c.beta1,
            beta2: c.beta2,
            fading: c.fading,
            bandwidth_hz: c.total_bandwidth,
            packet_bits: c.packet_bits,
            scheme: BandwidthScheme::Equal.name().to_string(),
        }
    }
}

impl Default for LocalCloudSection {
    fn default() -> Self {
        let l = LocalCloudSpec::default();
        Self {
            local_comp_rate: l.local_comp_rate,
            local_proc_delay: l.local_proc_delay,
            cloud_proc_delay: l.cloud_proc_delay,
            cloud_distance: l.cloud_distance,
        }
    }
}

impl Default for ArrivalSection {
    fn default() -> Self {
        let a = ArrivalSpec::default();
        Self {
            disk_radius: a.disk_radius,
            comp_rate_min: a.comp_rate_range.0,
            comp_rate_max: a.comp_rate_range.1,
            proc_delay_min: a.proc_delay_range.0,
            proc_delay_max: a.proc_delay_range.1,
        }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            stability_margin: s.stability_margin,
            tol_u: s.tol_u,
            tol_lambda: s.tol_lambda,
            spread_tol: s.spread_tol,
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            families: FAMILIES.iter().map(|s| s.to_string()).collect(),
            replications: None,
            x_rates: (10..=19).map(f64::from).collect(),
            cloud_distances: vec![100.0, 120.0, 140.0],
            fadings: vec![0.3, 0.6, 1.0],
            size_min: 1,
            size_max: 10,
            size_rates: vec![10.0, 13.0],
            size_proc_delays: vec![0.05, 0.03],
            schemes: vec!["equal".into(), "cloud-centric".into()],
            trace_cloud_distances: vec![100.0, 120.0],
            trace_iterations: 700,
            trace_tau: 0.005,
            fixed_gammas: vec![1.2, 1.3, 1.4, 1.5],
            fixed_cloud_distances: vec![100.0, 120.0],
            efficiency_gamma: 1.2,
            efficiency_cloud_distance: 100.0,
        }
    }
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            observations: vec![50, 100, 300, 1000],
            gamma_min: 1.0,
            gamma_max: 3.0,
            gamma_step: 0.01,
            j_hat: None,
            lambda_hat: None,
            target: CERTAIN,
        }
    }
}

impl Default for OfflineSection {
    fn default() -> Self {
        Self {
            distances: vec![10.0, 20.0, 30.0, 40.0],
            comp_rate: 20.0,
            proc_delay: 0.05,
            cloud_distance: 150.0,
            size_min: 1,
            size_max: 10,
        }
    }
}

pub fn parse_scheme(name: &str) -> Result<BandwidthScheme, ConfigError> {
    name.parse().map_err(|e: fogform::ModelError| invalid(e.to_string()))
}

impl ConfigFile {
    /// Parses TOML text. `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = match e.span() {
                Some(span) => line_column(text, span.start),
                None => (0, 0),
            };
            ConfigError::Parse {
                path: origin.to_string(),
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })
    }

    /// Applies `key=value` overrides; dotted keys address sections.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, ConfigError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Table::try_from(self).map_err(|e| invalid(e.to_string()))?;
        for item in overrides {
            let (key, raw) = item.split_once('=').ok_or_else(|| ConfigError::Override {
                key: item.clone(),
                message: "expected key=value".into(),
            })?;
            let key = key.trim();
            let value = parse_value(raw.trim());
            let mut path: Vec<&str> = key.split('.').collect();
            let leaf = path.pop().filter(|s| !s.is_empty()).ok_or_else(|| ConfigError::Override {
                key: key.into(),
                message: "empty key".into(),
            })?;
            let mut table = &mut root;
            for section in path {
                table = match table.get_mut(section) {
                    Some(toml::Value::Table(t)) => t,
                    _ => {
                        return Err(ConfigError::Override {
                            key: key.into(),
                            message: format!("unknown section '{section}'"),
                        })
                    }
                };
            }
            table.insert(leaf.to_string(), value);
            // Check each override on its own so errors name the culprit.
            toml::Value::Table(root.clone())
                .try_into::<ConfigFile>()
                .map_err(|e| ConfigError::Override { key: key.into(), message: e.message().trim().to_string() })?;
        }
        toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| invalid(e.message().trim().to_string()))
    }

    pub fn ideal_spec(&self) -> IdealNodeSpec {
        let support = self.arrival_spec().extremes();
        let i = &self.ideal;
        IdealNodeSpec {
            best_comp_rate: i.best_comp_rate.unwrap_or(support.best_comp_rate),
            best_proc_delay: i.best_proc_delay.unwrap_or(support.best_proc_delay),
            min_distance: i.min_distance.unwrap_or(support.min_distance),
            worst_comp_rate: i.worst_comp_rate.unwrap_or(support.worst_comp_rate),
            worst_proc_delay: i.worst_proc_delay.unwrap_or(support.worst_proc_delay),
            max_distance: i.max_distance.unwrap_or(support.max_distance),
        }
    }

    pub fn arrival_spec(&self) -> ArrivalSpec {
        let a = &self.arrival;
        ArrivalSpec {
            disk_radius: a.disk_radius,
            comp_rate_range: (a.comp_rate_min, a.comp_rate_max),
            proc_delay_range: (a.proc_delay_min, a.proc_delay_max),
        }
    }

    /// The validated model configuration. Power values are converted from dBm here.
    pub fn scenario(&self) -> Result<ScenarioConfig, ConfigError> {
        let c = &self.channel;
        let l = &self.local_cloud;
        let s = &self.solver;
        let cfg = ScenarioConfig {
            x_rate: self.x_rate,
            channel: ChannelParams {
                tx_power: dbm_to_watts(c.tx_power_dbm),
                beta1: c.beta1,
                beta2: c.beta2,
                fading: c.fading,
                noise_psd: dbm_to_watts(c.noise_psd_dbm_hz),
                total_bandwidth: c.bandwidth_hz,
                packet_bits: c.packet_bits,
            },
            scheme: parse_scheme(&c.scheme)?,
            local_cloud: LocalCloudSpec {
                local_comp_rate: l.local_comp_rate,
                local_proc_delay: l.local_proc_delay,
                cloud_proc_delay: l.cloud_proc_delay,
                cloud_distance: l.cloud_distance,
            },
            ideal: self.ideal_spec(),
            arrival: self.arrival_spec(),
            n_observations: self.n_observations,
            tau: self.tau,
            gamma0: self.gamma0,
            replications: self.replications,
            seed: self.seed,
            baseline_sample: self.baseline_sample,
            max_iterations: self.max_iterations,
            j_max: self.j_max,
            replay_streams: self.replay_streams,
            fixed_gamma_budget: self.fixed_gamma_budget,
            solver: SolverConfig {
                stability_margin: s.stability_margin,
                tol_u: s.tol_u,
                tol_lambda: s.tol_lambda,
                spread_tol: s.spread_tol,
            },
        };
        cfg.validate().map_err(|e| invalid(e.to_string()))?;
        if !(0.0..1.0).contains(&s.stability_margin) || !(s.tol_u > 0.0 && s.tol_lambda > 0.0 && s.spread_tol > 0.0) {
            return Err(invalid("solver margin must lie in [0, 1) and tolerances must be positive"));
        }
        Ok(cfg)
    }

    /// Checks the sweep, analysis and offline sections.
    pub fn validate_sections(&self) -> Result<(), ConfigError> {
        let w = &self.sweep;
        for f in &w.families {
            if !FAMILIES.contains(&f.as_str()) {
                return Err(invalid(format!("unknown sweep family '{f}' (known: {})", FAMILIES.join(", "))));
            }
        }
        if w.replications == Some(0) {
            return Err(invalid("sweep.replications must be at least 1"));
        }
        positive_list("sweep.x_rates", &w.x_rates)?;
        positive_list("sweep.cloud_distances", &w.cloud_distances)?;
        positive_list("sweep.fadings", &w.fadings)?;
        positive_list("sweep.size_rates", &w.size_rates)?;
        positive_list("sweep.size_proc_delays", &w.size_proc_delays)?;
        positive_list("sweep.trace_cloud_distances", &w.trace_cloud_distances)?;
        positive_list("sweep.fixed_gammas", &w.fixed_gammas)?;
        positive_list("sweep.fixed_cloud_distances", &w.fixed_cloud_distances)?;
        for s in &w.schemes {
            parse_scheme(s)?;
        }
        if w.size_min < 1 || w.size_min > w.size_max {
            return Err(invalid("sweep sizes must satisfy 1 <= size_min <= size_max"));
        }
        if !(w.trace_tau > 0.0) {
            return Err(invalid("sweep.trace_tau must be positive"));
        }
        if w.fixed_gammas.iter().chain([&w.efficiency_gamma]).any(|&g| g < 1.0) {
            return Err(invalid("fixed gammas must be at least 1"));
        }
        let a = &self.analyze;
        if a.observations.is_empty() || a.observations.contains(&0) {
            return Err(invalid("analyze.observations must be a nonempty list of positive counts"));
        }
        if !(a.gamma_min >= 1.0 && a.gamma_max >= a.gamma_min && a.gamma_step > 0.0) {
            return Err(invalid("analyze gammas must satisfy 1 <= gamma_min <= gamma_max and gamma_step > 0"));
        }
        if !(a.target > 0.0 && a.target < 1.0) {
            return Err(invalid("analyze.target must lie in (0, 1)"));
        }
        if a.j_hat.is_some() != a.lambda_hat.is_some() {
            return Err(invalid("analyze.j_hat and analyze.lambda_hat must be set together"));
        }
        let o = &self.offline;
        positive_list("offline.distances", &o.distances)?;
        if !(o.comp_rate > 0.0 && o.proc_delay > 0.0 && o.cloud_distance > 0.0) {
            return Err(invalid("offline comp_rate, proc_delay and cloud_distance must be positive"));
        }
        if o.size_min > o.size_max {
            return Err(invalid("offline sizes must satisfy size_min <= size_max"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn positive_list(name: &str, values: &[f64]) -> Result<(), ConfigError> {
    if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(invalid(format!("{name} must be a nonempty list of positive values")));
    }
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

/// A loaded experiment: the effective file contents and the model config.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub file: ConfigFile,
    pub scenario: ScenarioConfig,
}

impl Experiment {
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self, ConfigError> {
        let base = match path {
            Some(p) => {
                let origin = p.display().to_string();
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: origin.clone(), source })?;
                ConfigFile::parse(&text, &origin)?
            }
            None => ConfigFile::default(),
        };
        let mut file = base.with_overrides(overrides)?;
        if let Some(seed) = seed {
            file.seed = seed;
        }
        file.validate_sections()?;
        let scenario = file.scenario()?;
        Ok(Self { file, scenario })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let f = ConfigFile::parse("", "x").unwrap();
        assert_eq!(f, ConfigFile::default());
        assert_eq!(f.scenario().unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn negative_tau_names_the_invariant() {
        let f = ConfigFile::parse("tau = -0.1\n", "x").unwrap();
        let e = f.scenario().unwrap_err().to_string();
        assert!(e.contains("tau must be positive"), "{e}");
    }

    #[test]
    fn power_is_converted_from_dbm() {
        let f = ConfigFile::parse("[channel]\ntx_power_dbm = 20\nnoise_psd_dbm_hz = -174\n", "x").unwrap();
        let c = f.scenario().unwrap().channel;
        // 20 dBm = 100 mW; -174 dBm/Hz = 10^-20.4 W/Hz.
        assert!((c.tx_power - 0.1).abs() < 1e-15);
        assert!((c.noise_psd / 10f64.powf(-20.4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parse_errors_carry_the_line() {
        match ConfigFile::parse("tau = 0.1\n\n[channel]\nfading = \n", "cfg.toml") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        match ConfigFile::parse("tau = 0.1\n[channel]\nfaded = 1\n", "cfg.toml") {
            Err(ConfigError::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("faded"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_set_nested_keys_and_reject_unknown_ones() {
        let f = ConfigFile::default()
            .with_overrides(&["channel.fading=0.6".into(), "sweep.x_rates=[11, 12]".into(), "channel.scheme=cloud-centric".into()])
            .unwrap();
        assert_eq!(f.channel.fading, 0.6);
        assert_eq!(f.sweep.x_rates, vec![11.0, 12.0]);
        assert_eq!(f.scenario().unwrap().scheme, BandwidthScheme::CloudCentric);
        for bad in ["channel.fade=1", "nosuch.x=1", "taux=2", "tau"] {
            assert!(matches!(
                ConfigFile::default().with_overrides(&[bad.into()]),
                Err(ConfigError::Override { .. })
            ), "{bad}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = ConfigFile::default();
        let b = a.with_overrides(&["seed=1".into()]).unwrap();
        assert_eq!(a.hash(), ConfigFile::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn ideal_follows_arrival_support_unless_set() {
        let f = ConfigFile::parse("[arrival]\ncomp_rate_max = 30\n[ideal]\nmin_distance = 2.0\n", "x").unwrap();
        let i = f.ideal_spec();
        assert_eq!(i.best_comp_rate, 30.0);
        assert_eq!(i.min_distance, 2.0);
    }
}
