//! Experiment description, seeded arrival streams and Monte Carlo replication.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::offline_benchmark;
use crate::distribution::SolverConfig;
use crate::error::{FormationError, ModelError};
use crate::formation::{
    distribute, link_budget, phase1_for, run_fixed_gamma, run_framework_with, secretary_baseline, ArrivalStream,
    IdealNodeSpec, Phase1Result,
};
use crate::queueing::{service_rate, BandwidthScheme, ChannelParams, LocalCloudSpec, NodeProfile};

/// Distribution of arriving neighbors: area-uniform on a disk, uniform
/// computing rate, uniform processing delay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrivalSpec {
    pub disk_radius: f64,
    pub comp_rate_range: (f64, f64),
    pub proc_delay_range: (f64, f64),
}

impl Default for ArrivalSpec {
    fn default() -> Self {
        Self {
            disk_radius: 50.0,
            comp_rate_range: (15.0, 40.0),
            proc_delay_range: (0.050, 0.050),
        }
    }
}

impl ArrivalSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.disk_radius > 0.0) {
            return Err(ModelError::invalid("disk_radius must be positive"));
        }
        let (a, b) = self.comp_rate_range;
        if !(a > 0.0 && a <= b) {
            return Err(ModelError::invalid("comp_rate range must be positive and nonempty"));
        }
        let (a, b) = self.proc_delay_range;
        if !(a > 0.0 && a <= b) {
            return Err(ModelError::invalid("proc_delay range must be positive and nonempty"));
        }
        Ok(())
    }

    /// Ideal and worst neighbors at the edges of the arrival support.
    pub fn extremes(&self) -> IdealNodeSpec {
        IdealNodeSpec {
            best_comp_rate: self.comp_rate_range.1,
            best_proc_delay: self.proc_delay_range.0,
            min_distance: 0.0,
            worst_comp_rate: self.comp_rate_range.0,
            worst_proc_delay: self.proc_delay_range.1,
            max_distance: self.disk_radius,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> NodeProfile {
        let u: f64 = rng.random();
        let distance = self.disk_radius * u.sqrt();
        NodeProfile::new(
            distance,
            uniform(rng, self.comp_rate_range),
            uniform(rng, self.proc_delay_range),
        )
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

/// A complete experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    /// Offered load at the initial node, packets per second.
    pub x_rate: f64,
    pub channel: ChannelParams,
    pub scheme: BandwidthScheme,
    pub local_cloud: LocalCloudSpec,
    pub ideal: IdealNodeSpec,
    pub arrival: ArrivalSpec,
    /// Observations per formation attempt.
    pub n_observations: usize,
    pub tau: f64,
    pub gamma0: f64,
    pub replications: usize,
    pub seed: u64,
    /// Arrivals the secretary baseline only observes.
    pub baseline_sample: usize,
    pub max_iterations: usize,
    pub j_max: usize,
    /// Reuse one arrival realization across framework iterations.
    pub replay_streams: bool,
    /// Observation cap for the fixed-gamma mode.
    pub fixed_gamma_budget: usize,
    pub solver: SolverConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let arrival = ArrivalSpec::default();
        Self {
            x_rate: 10.0,
            channel: ChannelParams::table_defaults(),
            scheme: BandwidthScheme::Equal,
            local_cloud: LocalCloudSpec::default(),
            ideal: arrival.extremes(),
            arrival,
            n_observations: 300,
            tau: 0.002,
            gamma0: 1.0,
            replications: 1000,
            seed: 2017,
            baseline_sample: 110,
            max_iterations: 10_000,
            j_max: 64,
            replay_streams: false,
            fixed_gamma_budget: 100_000,
            solver: SolverConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.x_rate > 0.0 && self.x_rate.is_finite()) {
            return Err(ModelError::invalid("x_rate must be positive"));
        }
        self.channel.validate()?;
        self.local_cloud.validate()?;
        self.ideal.validate()?;
        self.arrival.validate()?;
        if self.n_observations < 1 {
            return Err(ModelError::invalid("n_observations must be at least 1"));
        }
        if !(self.tau > 0.0) {
            return Err(ModelError::invalid("tau must be positive"));
        }
        if !(self.gamma0 >= 1.0) {
            return Err(ModelError::invalid("gamma0 must be at least 1"));
        }
        if self.replications < 1 {
            return Err(ModelError::invalid("replications must be at least 1"));
        }
        if self.baseline_sample >= self.n_observations {
            return Err(ModelError::invalid("baseline_sample must be below n_observations"));
        }
        if self.max_iterations < 1 {
            return Err(ModelError::invalid("max_iterations must be at least 1"));
        }
        if self.j_max < 1 {
            return Err(ModelError::invalid("j_max must be at least 1"));
        }
        if self.fixed_gamma_budget < self.n_observations {
            return Err(ModelError::invalid("fixed_gamma_budget must be at least n_observations"));
        }
        Ok(())
    }
}

/// Random-stream purposes; part of the RNG key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamPurpose {
    Arrivals = 1,
    Benchmark = 2,
}

/// A generator keyed by `(seed, rep, iteration, purpose)`. Distinct keys give
/// independent ChaCha streams, so replications can run in any order.
pub fn keyed_rng(seed: u64, rep: u64, iteration: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = (rep << 32) | ((iteration & 0x00FF_FFFF) << 8) | purpose as u64;
    rng.set_stream(stream);
    rng
}

/// The first arrival realization of replication `rep`.
pub fn generate_stream(cfg: &ScenarioConfig, rep: u64) -> ArrivalStream {
    generate_stream_at(cfg, rep, 0)
}

/// Arrival realization `iteration` of replication `rep`.
pub fn generate_stream_at(cfg: &ScenarioConfig, rep: u64, iteration: u64) -> ArrivalStream {
    let mut rng = keyed_rng(cfg.seed, rep, iteration, StreamPurpose::Arrivals);
    ArrivalStream::new((0..cfg.n_observations).map(|_| cfg.arrival.sample(&mut rng)).collect())
}

/// Outcome of one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationRecord {
    pub index: usize,
    pub j_hat: usize,
    pub u_hat: f64,
    /// Optimized max latency of the formed network.
    pub latency: f64,
    pub gamma: f64,
    pub gamma_updates: usize,
    pub baseline_latency: f64,
    pub observations_used: usize,
    pub baseline_observations: usize,
    pub alpha_local: f64,
    pub alpha_cloud: f64,
    pub alpha_fog: f64,
    /// Mean fog-link service rate of the selected neighbors; zero if none.
    pub mean_fog_rate: f64,
    pub per_node_latency: Vec<f64>,
    pub efficiency: f64,
    /// Latency with the best `j_hat` nodes of the same realization.
    pub offline_latency: f64,
}

impl ReplicationRecord {
    pub fn competitive_ratio(&self) -> f64 {
        self.latency / self.offline_latency
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, stderr: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self { mean, stderr: (var / n as f64).sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateReport {
    pub replications: usize,
    pub successes: usize,
    pub failures: usize,
    pub latency: MeanStderr,
    pub gamma: MeanStderr,
    pub baseline_latency: MeanStderr,
    pub observations_used: MeanStderr,
    pub alpha_local: MeanStderr,
    pub alpha_cloud: MeanStderr,
    pub alpha_fog: MeanStderr,
    pub efficiency: MeanStderr,
    pub competitive_ratio: MeanStderr,
}

impl AggregateReport {
    pub fn from_records(records: &[ReplicationRecord], failures: usize) -> Self {
        let col = |f: &dyn Fn(&ReplicationRecord) -> f64| -> MeanStderr {
            MeanStderr::of(&records.iter().map(f).collect::<Vec<_>>())
        };
        Self {
            replications: records.len() + failures,
            successes: records.len(),
            failures,
            latency: col(&|r| r.latency),
            gamma: col(&|r| r.gamma),
            baseline_latency: col(&|r| r.baseline_latency),
            observations_used: col(&|r| r.observations_used as f64),
            alpha_local: col(&|r| r.alpha_local),
            alpha_cloud: col(&|r| r.alpha_cloud),
            alpha_fog: col(&|r| r.alpha_fog),
            efficiency: col(&|r| r.efficiency),
            competitive_ratio: col(&|r| r.competitive_ratio()),
        }
    }

    /// Relative latency reduction of the framework against the baseline.
    pub fn gain_over_baseline(&self) -> f64 {
        (self.baseline_latency.mean - self.latency.mean) / self.baseline_latency.mean
    }
}

#[derive(Clone, Debug)]
pub struct ReplicationReport {
    pub records: Vec<ReplicationRecord>,
    pub failures: Vec<(usize, FormationError)>,
    pub aggregate: AggregateReport,
}

/// One paired replication: the framework, then the baseline on the arrival
/// realization of the framework's successful iteration.
pub fn run_replication(
    cfg: &ScenarioConfig,
    p1: &Phase1Result,
    index: usize,
) -> Result<ReplicationRecord, FormationError> {
    let run = run_framework_with(cfg, index as u64, p1)?;
    let (baseline_latency, baseline_observations, offline_latency) = match &run.final_stream {
        Some(stream) => {
            let base = secretary_baseline(stream, cfg.baseline_sample, p1, &cfg.channel, cfg.scheme);
            let base_solve = distribute(&base, &cfg.channel, cfg.scheme, &cfg.local_cloud, cfg.x_rate, &cfg.solver)?;
            let offline = offline_benchmark(stream, p1, cfg)?;
            (base_solve.u_star, base.observations_used, offline.u_star)
        }
        None => (run.solve.u_star, 0, run.solve.u_star),
    };
    let d = &run.solve.distribution;
    let profiles = run.outcome.profiles();
    let (fog_bw, _) = link_budget(&cfg.channel, cfg.scheme, &cfg.local_cloud, profiles.len());
    let mean_fog_rate = if profiles.is_empty() {
        0.0
    } else {
        profiles.iter().map(|p| service_rate(&cfg.channel, fog_bw, p.distance)).sum::<f64>()
            / profiles.len() as f64
    };
    Ok(ReplicationRecord {
        index,
        j_hat: p1.j_hat,
        u_hat: p1.u_hat,
        latency: run.solve.u_star,
        gamma: run.gamma_final(),
        gamma_updates: run.updates(),
        baseline_latency,
        observations_used: run.outcome.observations_used,
        baseline_observations,
        alpha_local: d.alpha_local,
        alpha_cloud: d.alpha_cloud,
        alpha_fog: d.alpha_fog(),
        mean_fog_rate,
        per_node_latency: run.solve.per_node_latency.clone(),
        efficiency: run.solve.efficiency,
        offline_latency,
    })
}

/// Runs `cfg.replications` paired replications in parallel. Output order and
/// values do not depend on scheduling.
pub fn run_replications(cfg: &ScenarioConfig) -> Result<ReplicationReport, FormationError> {
    let p1 = phase1_for(cfg)?;
    Ok(run_replications_with(cfg, &p1))
}

/// [`run_replications`] with a precomputed Phase 1.
pub fn run_replications_with(cfg: &ScenarioConfig, p1: &Phase1Result) -> ReplicationReport {
    let results: Vec<(usize, Result<ReplicationRecord, FormationError>)> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| (i, run_replication(cfg, p1, i)))
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push((i, e)),
        }
    }
    let aggregate = AggregateReport::from_records(&records, failures.len());
    ReplicationReport { records, failures, aggregate }
}

/// Outcome of one fixed-gamma replication.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedGammaRecord {
    pub index: usize,
    /// Whether Phase 2 filled the network within the observation budget.
    pub complete: bool,
    pub observations_used: usize,
    /// Optimized latency of the formed network; NaN when incomplete.
    pub latency: f64,
    pub alpha_cloud: f64,
    pub efficiency: f64,
    /// Baseline on the first `n_observations` arrivals; NaN when it failed.
    pub baseline_latency: f64,
    pub baseline_observations: usize,
}

/// Runs `cfg.replications` fixed-gamma replications in parallel.
pub fn run_fixed_gamma_replications(
    cfg: &ScenarioConfig,
    gamma: f64,
    p1: &Phase1Result,
) -> Result<Vec<FixedGammaRecord>, FormationError> {
    (0..cfg.replications)
        .into_par_iter()
        .map(|index| {
            let run = run_fixed_gamma(cfg, index as u64, gamma, p1)?;
            let (latency, alpha_cloud, efficiency) = match &run.solve {
                Some(s) => (s.u_star, s.distribution.alpha_cloud, s.efficiency),
                None => (f64::NAN, f64::NAN, f64::NAN),
            };
            Ok(FixedGammaRecord {
                index,
                complete: run.outcome.complete,
                observations_used: run.outcome.observations_used,
                latency,
                alpha_cloud,
                efficiency,
                baseline_latency: run.baseline_solve.as_ref().map_or(f64::NAN, |s| s.u_star),
                baseline_observations: run.baseline.observations_used,
            })
        })
        .collect()
}
