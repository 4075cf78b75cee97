//! Online network formation.
//!
//! Phase 1 sizes the network by assuming every neighbor is ideal, growing the
//! network one node at a time until its min-max latency stops improving. Phase 2 then admits arriving nodes whose latency at the Phase 1
//! load is within `gamma` times the ideal latency. The framework loop raises
//! `gamma` by `tau` every time Phase 2 fails to fill the network.

use crate::distribution::{solve_min_max, ComputeSet, SolveResult, SolverConfig};
use crate::error::{FormationError, ModelError};
use crate::queueing::{
    bandwidth_per_node, service_rate, BandwidthScheme, ChannelParams, Destination,
    LocalCloudSpec, NodeProfile,
};
use crate::scenario::{generate_stream_at, ScenarioConfig};

/// Best- and worst-case neighbor parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdealNodeSpec {
    pub best_comp_rate: f64,
    pub best_proc_delay: f64,
    pub min_distance: f64,
    pub worst_comp_rate: f64,
    pub worst_proc_delay: f64,
    pub max_distance: f64,
}

impl IdealNodeSpec {
    pub fn best_profile(&self) -> NodeProfile {
        NodeProfile::new(self.min_distance, self.best_comp_rate, self.best_proc_delay)
    }

    pub fn worst_profile(&self) -> NodeProfile {
        NodeProfile::new(self.max_distance, self.worst_comp_rate, self.worst_proc_delay)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.best_profile().validate()?;
        self.worst_profile().validate()?;
        if self.best_comp_rate < self.worst_comp_rate {
            return Err(ModelError::invalid("ideal comp rate must be at least the worst comp rate"));
        }
        if self.best_proc_delay > self.worst_proc_delay {
            return Err(ModelError::invalid("ideal proc delay must not exceed the worst proc delay"));
        }
        if self.min_distance > self.max_distance {
            return Err(ModelError::invalid("min distance must not exceed max distance"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phase1Config {
    /// Largest network size Phase 1 will try.
    pub j_max: usize,
    pub solver: SolverConfig,
}

impl Default for Phase1Config {
    fn default() -> Self {
        Self { j_max: 64, solver: SolverConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phase1Result {
    /// Target number of neighbors.
    pub j_hat: usize,
    /// Min-max latency of the size-`j_hat` ideal network.
    pub u_hat: f64,
    /// Load per ideal neighbor.
    pub lambda_hat: f64,
    pub lambda_hat_local: f64,
    pub lambda_hat_cloud: f64,
    /// Min-max latency of the ideal network for each size tried, starting at
    /// size 0. Infeasible sizes are `+inf`.
    pub size_latency: Vec<f64>,
}

impl Phase1Result {
    /// A Phase 1 outcome with externally supplied targets.
    pub fn given(j_hat: usize, lambda_hat: f64, u_hat: f64) -> Self {
        Self {
            j_hat,
            u_hat,
            lambda_hat,
            lambda_hat_local: 0.0,
            lambda_hat_cloud: 0.0,
            size_latency: Vec::new(),
        }
    }
}

/// Fog-link bandwidth and cloud-link rate for a network of `size` neighbors.
pub fn link_budget(
    channel: &ChannelParams,
    scheme: BandwidthScheme,
    local_cloud: &LocalCloudSpec,
    size: usize,
) -> (f64, f64) {
    let share = bandwidth_per_node(scheme, channel.total_bandwidth, size);
    (share.fog, service_rate(channel, share.cloud, local_cloud.cloud_distance))
}

/// The local node, the cloud, and `neighbors` with link rates for a network
/// of exactly that many neighbors.
pub fn network_compute_set(
    channel: &ChannelParams,
    scheme: BandwidthScheme,
    local_cloud: &LocalCloudSpec,
    neighbors: &[NodeProfile],
) -> ComputeSet {
    let (fog_bw, cloud_rate) = link_budget(channel, scheme, local_cloud, neighbors.len());
    ComputeSet::new(
        (local_cloud.local_comp_rate, local_cloud.local_proc_delay),
        (cloud_rate, local_cloud.cloud_proc_delay),
        neighbors
            .iter()
            .map(|p| (service_rate(channel, fog_bw, p.distance), *p))
            .collect(),
    )
}

/// Phase 1: network size, ideal latency and per-neighbor load.
pub fn phase1(
    ideal: &IdealNodeSpec,
    channel: &ChannelParams,
    scheme: BandwidthScheme,
    local_cloud: &LocalCloudSpec,
    x: f64,
    cfg: &Phase1Config,
) -> Result<Phase1Result, FormationError> {
    let best = ideal.best_profile();
    let solve_size = |size: usize| -> Option<SolveResult> {
        let set = network_compute_set(channel, scheme, local_cloud, &vec![best; size]);
        solve_min_max(&set, x, &cfg.solver).ok()
    };

    let mut sols: Vec<Option<SolveResult>> = vec![solve_size(0)];
    let mut curve = vec![sols[0].as_ref().map_or(f64::INFINITY, |s| s.u_star)];
    let mut j_hat = None;
    for size in 1..=cfg.j_max {
        let sol = solve_size(size);
        let d = sol.as_ref().map_or(f64::INFINITY, |s| s.u_star);
        let delta = curve[size - 1] - d;
        sols.push(sol);
        curve.push(d);
        // NaN (both sizes infeasible) keeps searching.
        if delta < 0.0 {
            j_hat = Some(size - 1);
            break;
        }
    }
    let j_hat = match j_hat {
        Some(j) => j,
        None if curve[cfg.j_max].is_finite() => cfg.j_max,
        None => return Err(FormationError::Infeasible { j_max: cfg.j_max }),
    };
    let sol = sols[j_hat]
        .as_ref()
        .ok_or(FormationError::Infeasible { j_max: cfg.j_max })?;

    Ok(phase1_result(j_hat, sol, curve))
}

fn phase1_result(j_hat: usize, sol: &SolveResult, size_latency: Vec<f64>) -> Phase1Result {
    // Identical ideal neighbors carry identical loads; take the largest so
    // the loads still sum to x after residual allocation.
    Phase1Result {
        j_hat,
        u_hat: sol.u_star,
        lambda_hat: sol.neighbor_loads().fold(0.0, f64::max),
        lambda_hat_local: sol.local_load(),
        lambda_hat_cloud: sol.cloud_load(),
        size_latency,
    }
}

/// Phase 1 targets for a network forced to `size` ideal neighbors.
pub fn phase1_at_size(
    ideal: &IdealNodeSpec,
    channel: &ChannelParams,
    scheme: BandwidthScheme,
    local_cloud: &LocalCloudSpec,
    x: f64,
    size: usize,
    solver: &SolverConfig,
) -> Result<Phase1Result, FormationError> {
    let set = network_compute_set(channel, scheme, local_cloud, &vec![ideal.best_profile(); size]);
    let sol = solve_min_max(&set, x, solver).map_err(|_| FormationError::Infeasible { j_max: size })?;
    Ok(phase1_result(size, &sol, Vec::new()))
}

/// Min-max latency of networks of `sizes` identical neighbors, `None` where
/// the offered load cannot be carried.
pub fn size_sweep(
    profile: &NodeProfile,
    channel: &ChannelParams,
    scheme: BandwidthScheme,
    local_cloud: &LocalCloudSpec,
    x: f64,
    sizes: std::ops::RangeInclusive<usize>,
    solver: &SolverConfig,
) -> Vec<(usize, Option<SolveResult>)> {
    sizes
        .map(|size| {
            let set = network_compute_set(channel, scheme, local_cloud, &vec![*profile; size]);
            (size, solve_min_max(&set, x, solver).ok())
        })
        .collect()
}

/// Latency when all of `x` goes to the cloud over the whole bandwidth.
pub fn cloud_only_latency(channel: &ChannelParams, local_cloud: &LocalCloudSpec, x: f64) -> f64 {
    Destination::Cloud {
        tx_rate: service_rate(channel, channel.total_bandwidth, local_cloud.cloud_distance),
        proc_delay: local_cloud.cloud_proc_delay,
    }
    .total_delay(x)
    .unwrap_or(f64::INFINITY)
}

/// Ordered beacon arrivals seen by the initial node.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrivalStream {
    nodes: Vec<NodeProfile>,
}

impl ArrivalStream {
    pub fn new(nodes: Vec<NodeProfile>) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[NodeProfile] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectedNode {
    /// Zero-based arrival index in the stream.
    pub arrival: usize,
    pub profile: NodeProfile,
    /// Latency at the Phase 1 load when the node was evaluated.
    pub latency: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormationOutcome {
    pub selected: Vec<SelectedNode>,
    /// Competitive-ratio target; `None` for rules that do not use one.
    pub gamma_used: Option<f64>,
    pub phase1: Phase1Result,
    pub observations_used: usize,
    pub complete: bool,
}

impl FormationOutcome {
    pub fn profiles(&self) -> Vec<NodeProfile> {
        self.selected.iter().map(|s| s.profile).collect()
    }
}

/// Latency of a candidate neighbor at load `lambda_hat` over a fog link of
/// bandwidth `fog_bw`; `+inf` when either of its queues would be unstable.
pub fn candidate_latency(
    node: &NodeProfile,
    lambda_hat: f64,
    fog_bw: f64,
    channel: &ChannelParams,
) -> f64 {
    let dest = Destination::Neighbor {
        tx_rate: service_rate(channel, fog_bw, node.distance),
        profile: *node,
    };
    dest.total_delay(lambda_hat).unwrap_or(f64::INFINITY)
}

fn fog_bandwidth(channel: &ChannelParams, scheme: BandwidthScheme, size: usize) -> f64 {
    bandwidth_per_node(scheme, channel.total_bandwidth, size).fog
}

/// Phase 2: irrevocable threshold selection over the arrival stream.
pub fn phase2(
    stream: &ArrivalStream,
    gamma: f64,
    p1: &Phase1Result,
    channel: &ChannelParams,
    scheme: BandwidthScheme,
) -> FormationOutcome {
    let fog_bw = fog_bandwidth(channel, scheme, p1.j_hat);
    let threshold = gamma * p1.u_hat;
    let mut selected = Vec::with_capacity(p1.j_hat);
    let mut n = 0;
    while selected.len() < p1.j_hat && n < stream.len() {
        let node = stream.nodes[n];
        let latency = candidate_latency(&node, p1.lambda_hat, fog_bw, channel);
        if latency <= threshold {
            selected.push(SelectedNode { arrival: n, profile: node, latency });
        }
        n += 1;
    }
    FormationOutcome {
        complete: selected.len() == p1.j_hat,
        selected,
        gamma_used: Some(gamma),
        phase1: p1.clone(),
        observations_used: n,
    }
}

/// Observe-then-select baseline: the first `sample_size` arrivals are only
/// observed; afterwards a node is taken when it beats the best observed
/// latency. When the remaining arrivals can only just fill the open slots,
/// all of them are taken.
pub fn secretary_baseline(
    stream: &ArrivalStream,
    sample_size: usize,
    p1: &Phase1Result,
    channel: &ChannelParams,
    scheme: BandwidthScheme,
) -> FormationOutcome {
    let fog_bw = fog_bandwidth(channel, scheme, p1.j_hat);
    let total = stream.len();
    let mut best_sampled = f64::INFINITY;
    let mut selected = Vec::with_capacity(p1.j_hat);
    let mut n = 0;
    while selected.len() < p1.j_hat && n < total {
        let node = stream.nodes[n];
        let latency = candidate_latency(&node, p1.lambda_hat, fog_bw, channel);
        let open = p1.j_hat - selected.len();
        let remaining = total - n;
        if remaining <= open || (n >= sample_size && latency < best_sampled) {
            selected.push(SelectedNode { arrival: n, profile: node, latency });
        } else if n < sample_size {
            best_sampled = best_sampled.min(latency);
        }
        n += 1;
    }
    FormationOutcome {
        complete: selected.len() == p1.j_hat,
        selected,
        gamma_used: None,
        phase1: p1.clone(),
        observations_used: n,
    }
}

/// Solves the task distribution over the nodes an outcome selected.
pub fn distribute(
    outcome: &FormationOutcome,
    channel: &ChannelParams,
    scheme: BandwidthScheme,
    local_cloud: &LocalCloudSpec,
    x: f64,
    solver: &SolverConfig,
) -> Result<SolveResult, FormationError> {
    let set = network_compute_set(channel, scheme, local_cloud, &outcome.profiles());
    Ok(solve_min_max(&set, x, solver)?)
}

/// Result of one run of the formation framework.
#[derive(Clone, Debug)]
pub struct FrameworkRun {
    pub outcome: FormationOutcome,
    pub solve: SolveResult,
    /// Every gamma tried, in order; the last one succeeded.
    pub gamma_trace: Vec<f64>,
    /// The arrival realization of the successful iteration (`None` when the
    /// network needs no neighbors).
    pub final_stream: Option<ArrivalStream>,
}

impl FrameworkRun {
    pub fn gamma_final(&self) -> f64 {
        *self.gamma_trace.last().expect("trace is never empty")
    }

    /// Number of gamma increases before success.
    pub fn updates(&self) -> usize {
        self.gamma_trace.len().saturating_sub(1)
    }
}

pub fn phase1_for(cfg: &ScenarioConfig) -> Result<Phase1Result, FormationError> {
    phase1(
        &cfg.ideal,
        &cfg.channel,
        cfg.scheme,
        &cfg.local_cloud,
        cfg.x_rate,
        &Phase1Config { j_max: cfg.j_max, solver: cfg.solver },
    )
}

fn gamma_at(cfg: &ScenarioConfig, updates: usize) -> f64 {
    cfg.gamma0 + updates as f64 * cfg.tau
}

/// Runs the formation framework for replication `rep`: fresh arrivals every
/// iteration, gamma raised by `tau` after each incomplete formation, then the
/// task distribution over the formed network.
pub fn run_framework(cfg: &ScenarioConfig, rep: u64) -> Result<FrameworkRun, FormationError> {
    let p1 = phase1_for(cfg)?;
    run_framework_with(cfg, rep, &p1)
}

/// [`run_framework`] with a precomputed Phase 1.
pub fn run_framework_with(
    cfg: &ScenarioConfig,
    rep: u64,
    p1: &Phase1Result,
) -> Result<FrameworkRun, FormationError> {
    if p1.j_hat == 0 {
        let outcome = FormationOutcome {
            selected: Vec::new(),
            gamma_used: Some(cfg.gamma0),
            phase1: p1.clone(),
            observations_used: 0,
            complete: true,
        };
        let solve = distribute(&outcome, &cfg.channel, cfg.scheme, &cfg.local_cloud, cfg.x_rate, &cfg.solver)?;
        return Ok(FrameworkRun { outcome, solve, gamma_trace: vec![cfg.gamma0], final_stream: None });
    }

    let mut trace = Vec::new();
    for iteration in 0..cfg.max_iterations {
        let gamma = gamma_at(cfg, iteration);
        trace.push(gamma);
        let stream_index = if cfg.replay_streams { 0 } else { iteration as u64 };
        let stream = generate_stream_at(cfg, rep, stream_index);
        let outcome = phase2(&stream, gamma, p1, &cfg.channel, cfg.scheme);
        if outcome.complete {
            let solve = distribute(&outcome, &cfg.channel, cfg.scheme, &cfg.local_cloud, cfg.x_rate, &cfg.solver)?;
            return Ok(FrameworkRun { outcome, solve, gamma_trace: trace, final_stream: Some(stream) });
        }
    }
    Err(FormationError::IterationCapExceeded {
        cap: cfg.max_iterations,
        gamma: gamma_at(cfg, cfg.max_iterations),
    })
}

/// Gamma evolution when the framework keeps forming networks for a fixed
/// number of iterations, raising gamma only after failures.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaTrace {
    /// Gamma in force at each iteration.
    pub gammas: Vec<f64>,
    /// Whether each iteration filled the network.
    pub completed: Vec<bool>,
}

impl GammaTrace {
    pub fn final_gamma(&self) -> f64 {
        self.gammas.last().copied().unwrap_or(f64::NAN)
    }

    pub fn updates(&self) -> usize {
        self.completed.iter().filter(|c| !**c).count()
    }

    /// First iteration (zero-based) whose gamma reached `value`.
    pub fn first_reaching(&self, value: f64) -> Option<usize> {
        self.gammas.iter().position(|&g| g >= value - 1e-12)
    }
}

pub fn track_gamma(
    cfg: &ScenarioConfig,
    rep: u64,
    iterations: usize,
) -> Result<GammaTrace, FormationError> {
    let p1 = phase1_for(cfg)?;
    let mut updates = 0;
    let mut trace = GammaTrace { gammas: Vec::with_capacity(iterations), completed: Vec::with_capacity(iterations) };
    for iteration in 0..iterations {
        let gamma = gamma_at(cfg, updates);
        let stream = generate_stream_at(cfg, rep, iteration as u64);
        let complete = phase2(&stream, gamma, &p1, &cfg.channel, cfg.scheme).complete;
        trace.gammas.push(gamma);
        trace.completed.push(complete);
        if !complete {
            updates += 1;
        }
    }
    Ok(trace)
}

/// Phase 2 with a preset gamma and no observation budget beyond
/// `cfg.fixed_gamma_budget`.
#[derive(Clone, Debug)]
pub struct FixedGammaRun {
    pub outcome: FormationOutcome,
    pub solve: Option<SolveResult>,
    pub baseline: FormationOutcome,
    pub baseline_solve: Option<SolveResult>,
}

pub fn run_fixed_gamma(
    cfg: &ScenarioConfig,
    rep: u64,
    gamma: f64,
    p1: &Phase1Result,
) -> Result<FixedGammaRun, FormationError> {
    let long = ScenarioConfig { n_observations: cfg.fixed_gamma_budget, ..cfg.clone() };
    let stream = generate_stream_at(&long, rep, 0);
    let outcome = phase2(&stream, gamma, p1, &cfg.channel, cfg.scheme);
    let solve = if outcome.complete {
        Some(distribute(&outcome, &cfg.channel, cfg.scheme, &cfg.local_cloud, cfg.x_rate, &cfg.solver)?)
    } else {
        None
    };
    let short = ArrivalStream::new(stream.nodes()[..cfg.n_observations.min(stream.len())].to_vec());
    let baseline = secretary_baseline(&short, cfg.baseline_sample, p1, &cfg.channel, cfg.scheme);
    let baseline_solve = if baseline.complete {
        distribute(&baseline, &cfg.channel, cfg.scheme, &cfg.local_cloud, cfg.x_rate, &cfg.solver).ok()
    } else {
        None
    };
    Ok(FixedGammaRun { outcome, solve, baseline, baseline_solve })
}
