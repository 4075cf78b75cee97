//! Offline min-max task distribution over a fixed set of destinations.
//!
//! Every destination's latency is strictly increasing in its load, so the
//! optimum equalizes the latencies of all loaded destinations. The solver
//! bisects on the common latency level `u`; for each candidate level the
//! admissible load of every destination is itself found by bisection.

use crate::error::SolveError;
use crate::queueing::{Destination, DestinationKind, NodeProfile, STABILITY_MARGIN};

/// Numerical tolerances of the nested bisection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Loads are capped at `(1 - stability_margin) * capacity`.
    pub stability_margin: f64,
    /// Relative tolerance on the latency level.
    pub tol_u: f64,
    /// Load tolerance relative to the destination's capacity.
    pub tol_lambda: f64,
    /// Relative latency spread under which a solution counts as equalized.
    pub spread_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            stability_margin: STABILITY_MARGIN,
            tol_u: 1e-9,
            tol_lambda: 1e-10,
            spread_tol: 1e-6,
        }
    }
}

/// A monotone latency-versus-load curve with a finite stability limit.
pub trait DelayCurve {
    /// Latency at `load`; `+inf` outside the stable region.
    fn delay(&self, load: f64) -> f64;
    /// Supremum of stable loads.
    fn capacity(&self) -> f64;
}

impl DelayCurve for Destination {
    fn delay(&self, load: f64) -> f64 {
        self.total_delay(load).unwrap_or(f64::INFINITY)
    }

    fn capacity(&self) -> f64 {
        Destination::capacity(self)
    }
}

/// Largest load in `[0, (1 - margin) * capacity]` whose latency does not
/// exceed `u`. Returns 0 when even an idle destination is slower than `u`.
pub fn max_load_at<C: DelayCurve + ?Sized>(u: f64, curve: &C, cfg: &SolverConfig) -> f64 {
    let capacity = curve.capacity();
    let cap = (1.0 - cfg.stability_margin) * capacity;
    if !(u >= curve.delay(0.0)) || cap <= 0.0 {
        return 0.0;
    }
    if curve.delay(cap) <= u {
        return cap;
    }
    let tol = cfg.tol_lambda * capacity;
    let (mut lo, mut hi) = (0.0, cap);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if curve.delay(mid) <= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// The destinations available to the initial node for one fixed network.
#[derive(Clone, Debug, PartialEq)]
pub struct ComputeSet {
    /// Local computing rate and processing delay, if the initial node computes.
    pub local: Option<(f64, f64)>,
    /// Cloud link rate and cloud processing delay, if the cloud is reachable.
    pub cloud: Option<(f64, f64)>,
    /// Fog link rate and profile of each neighbor, in selection order.
    pub neighbors: Vec<(f64, NodeProfile)>,
}

impl ComputeSet {
    pub fn new(local: (f64, f64), cloud: (f64, f64), neighbors: Vec<(f64, NodeProfile)>) -> Self {
        Self { local: Some(local), cloud: Some(cloud), neighbors }
    }

    /// Destinations in canonical order: local, cloud, then neighbors.
    pub fn destinations(&self) -> Vec<Destination> {
        let mut out = Vec::with_capacity(self.neighbors.len() + 2);
        if let Some((comp_rate, proc_delay)) = self.local {
            out.push(Destination::Local { comp_rate, proc_delay });
        }
        if let Some((tx_rate, proc_delay)) = self.cloud {
            out.push(Destination::Cloud { tx_rate, proc_delay });
        }
        out.extend(
            self.neighbors
                .iter()
                .map(|&(tx_rate, profile)| Destination::Neighbor { tx_rate, profile }),
        );
        out
    }
}

/// Fractions of the offered load sent to each destination.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskDistribution {
    pub alpha_local: f64,
    pub alpha_cloud: f64,
    pub alpha_neighbors: Vec<f64>,
    /// Offered load in packets per second.
    pub total_rate: f64,
}

impl TaskDistribution {
    pub fn alpha_sum(&self) -> f64 {
        self.alpha_local + self.alpha_cloud + self.alpha_neighbors.iter().sum::<f64>()
    }

    pub fn alpha_fog(&self) -> f64 {
        self.alpha_neighbors.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub distribution: TaskDistribution,
    /// Optimal maximum latency over all destinations.
    pub u_star: f64,
    /// Latency of every destination at its assigned load, in
    /// [`ComputeSet::destinations`] order. Idle destinations report their
    /// zero-load latency.
    pub per_node_latency: Vec<f64>,
    /// Assigned loads in the same order.
    pub loads: Vec<f64>,
    pub kinds: Vec<DestinationKind>,
    /// Scheduling efficiency of `per_node_latency`.
    pub efficiency: f64,
    /// Common latency of the loaded destinations.
    pub level: f64,
}

impl SolveResult {
    /// Latencies of the neighbor destinations.
    pub fn neighbor_latencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.kinds
            .iter()
            .zip(&self.per_node_latency)
            .filter(|(k, _)| **k == DestinationKind::Neighbor)
            .map(|(_, &d)| d)
    }

    pub fn neighbor_loads(&self) -> impl Iterator<Item = f64> + '_ {
        self.kinds
            .iter()
            .zip(&self.loads)
            .filter(|(k, _)| **k == DestinationKind::Neighbor)
            .map(|(_, &l)| l)
    }

    fn load_of(&self, kind: DestinationKind) -> f64 {
        self.kinds
            .iter()
            .zip(&self.loads)
            .filter(|(k, _)| **k == kind)
            .map(|(_, &l)| l)
            .sum()
    }

    pub fn local_load(&self) -> f64 {
        self.load_of(DestinationKind::Local)
    }

    pub fn cloud_load(&self) -> f64 {
        self.load_of(DestinationKind::Cloud)
    }

    /// Max-minus-min latency over all destinations.
    pub fn spread(&self) -> f64 {
        let max = self.per_node_latency.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.per_node_latency.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// Every destination carries load and all latencies coincide within `rel_tol`.
    pub fn is_interior(&self, rel_tol: f64) -> bool {
        self.loads.iter().all(|&l| l > 0.0) && self.spread() <= rel_tol * self.u_star
    }
}

/// Minimizes the maximum destination latency for offered load `x`.
pub fn solve_min_max(nodes: &ComputeSet, x: f64, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    solve_destinations(&nodes.destinations(), x, cfg)
}

/// [`solve_min_max`] over an explicit destination list.
pub fn solve_destinations(
    dests: &[Destination],
    x: f64,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(SolveError::InvalidLoad(x));
    }
    if dests.is_empty() {
        return Err(SolveError::NoDestinations);
    }
    let caps: Vec<f64> = dests
        .iter()
        .map(|d| (1.0 - cfg.stability_margin) * d.capacity())
        .collect();
    let capacity: f64 = caps.iter().sum();
    if !(capacity >= x) {
        return Err(SolveError::Infeasible { offered: x, capacity });
    }

    let loads_at = |u: f64| -> Vec<f64> { dests.iter().map(|d| max_load_at(u, d, cfg)).collect() };
    let total = |v: &[f64]| -> f64 { v.iter().sum() };

    // Bracket: nothing fits below the fastest idle latency.
    let mut lo = dests.iter().map(|d| d.delay(0.0)).fold(f64::INFINITY, f64::min);
    let ceiling = dests
        .iter()
        .zip(&caps)
        .map(|(d, &c)| d.delay(c))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut hi = (2.0 * lo).min(ceiling);
    let mut loads_hi = loads_at(hi);
    while total(&loads_hi) < x {
        lo = hi;
        hi = (2.0 * hi).min(ceiling);
        loads_hi = loads_at(hi);
        if hi >= ceiling {
            break;
        }
    }
    let mut loads_lo = loads_at(lo);
    if total(&loads_lo) >= x {
        // Only possible when the lowest level already fits; keep it as the answer.
        loads_hi = loads_lo.clone();
        hi = lo;
    }
    while hi - lo > cfg.tol_u * hi {
        let mid = 0.5 * (lo + hi);
        let loads_mid = loads_at(mid);
        if total(&loads_mid) >= x {
            hi = mid;
            loads_hi = loads_mid;
        } else {
            lo = mid;
            loads_lo = loads_mid;
        }
    }

    // Interpolate between the bracketing allocations so every loaded
    // destination stays between the two levels, then absorb rounding in the
    // largest load.
    let s_lo = total(&loads_lo);
    let s_hi = total(&loads_hi);
    let t = if s_hi > s_lo { ((x - s_lo) / (s_hi - s_lo)).clamp(0.0, 1.0) } else { 1.0 };
    let mut loads: Vec<f64> = loads_lo
        .iter()
        .zip(&loads_hi)
        .map(|(&a, &b)| a + t * (b - a))
        .collect();
    let residual = x - total(&loads);
    if residual != 0.0 {
        let (k, _) = loads
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &l)| if l > acc.1 { (i, l) } else { acc });
        loads[k] = (loads[k] + residual).clamp(0.0, caps[k]);
    }

    let per_node_latency: Vec<f64> = dests.iter().zip(&loads).map(|(d, &l)| d.delay(l)).collect();
    let level = dests
        .iter()
        .zip(&loads)
        .zip(&per_node_latency)
        .filter(|((_, &l), _)| l > 0.0)
        .map(|(_, &d)| d)
        .fold(f64::NEG_INFINITY, f64::max);
    let u_star = per_node_latency.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let efficiency = efficiency(&per_node_latency);

    let kinds: Vec<DestinationKind> = dests.iter().map(|d| d.kind()).collect();
    let mut distribution = TaskDistribution {
        alpha_local: 0.0,
        alpha_cloud: 0.0,
        alpha_neighbors: Vec::new(),
        total_rate: x,
    };
    for (kind, &l) in kinds.iter().zip(&loads) {
        let a = l / x;
        match kind {
            DestinationKind::Local => distribution.alpha_local += a,
            DestinationKind::Cloud => distribution.alpha_cloud += a,
            DestinationKind::Neighbor => distribution.alpha_neighbors.push(a),
        }
    }

    Ok(SolveResult {
        distribution,
        u_star,
        per_node_latency,
        loads,
        kinds,
        efficiency,
        level,
    })
}

/// Scheduling efficiency: one plus total idle time over total busy time.
/// Exactly 1 when all latencies are equal.
pub fn efficiency(latencies: &[f64]) -> f64 {
    let max = latencies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let idle: f64 = latencies.iter().map(|d| max - d).sum();
    let busy: f64 = latencies.iter().sum();
    1.0 + idle / busy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queueing::fog_compute_delay;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn max_load_examples() {
        let cloud = Destination::Cloud { tx_rate: 10.0, proc_delay: 0.025 };
        assert_eq!(max_load_at(cloud.delay(0.0), &cloud, &cfg()), 0.0);
        assert_eq!(max_load_at(0.01, &cloud, &cfg()), 0.0);
        assert_eq!(max_load_at(f64::INFINITY, &cloud, &cfg()), (1.0 - 1e-9) * 10.0);
        let l = max_load_at(0.7 / 3.0, &cloud, &cfg());
        assert!((l - 4.0).abs() < 1e-8, "{l}");
        assert!(max_load_at(0.2833, &cloud, &cfg()) > 4.0);
    }

    #[test]
    fn single_destination_takes_everything() {
        let set = ComputeSet { local: Some((20.0, 0.05)), cloud: None, neighbors: vec![] };
        let r = solve_min_max(&set, 10.0, &cfg()).unwrap();
        assert!((r.distribution.alpha_local - 1.0).abs() < 1e-12);
        let expect = fog_compute_delay(10.0, 20.0, 0.05).unwrap();
        assert!((expect - 0.575).abs() < 1e-12);
        assert!((r.u_star - expect).abs() < 1e-9);
        assert!((r.efficiency - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_neighbors_split_evenly() {
        let p = NodeProfile::new(10.0, 20.0, 0.05);
        let set = ComputeSet { local: None, cloud: None, neighbors: vec![(15.0, p), (15.0, p)] };
        let r = solve_min_max(&set, 8.0, &cfg()).unwrap();
        let a = &r.distribution.alpha_neighbors;
        assert!((a[0] - a[1]).abs() < 1e-9, "{a:?}");
        assert!((a[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_when_capacity_short() {
        let set = ComputeSet::new((5.0, 0.05), (3.0, 0.025), vec![]);
        assert!(matches!(
            solve_min_max(&set, 9.0, &cfg()),
            Err(SolveError::Infeasible { .. })
        ));
        assert!(matches!(solve_min_max(&set, 0.0, &cfg()), Err(SolveError::InvalidLoad(_))));
        let empty = ComputeSet { local: None, cloud: None, neighbors: vec![] };
        assert!(matches!(solve_min_max(&empty, 1.0, &cfg()), Err(SolveError::NoDestinations)));
    }

    #[test]
    fn idle_destination_keeps_zero_load_latency() {
        // A very slow cloud link stays idle; u* still reports its latency.
        let set = ComputeSet::new((40.0, 0.01), (1.0, 0.025), vec![]);
        let r = solve_min_max(&set, 2.0, &cfg()).unwrap();
        assert_eq!(r.loads[1], 0.0);
        assert!((r.u_star - 1.0).abs() < 1e-12);
        assert!(r.level < r.u_star);
        assert!(r.efficiency > 1.0);
        assert!(!r.is_interior(1e-6));
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(efficiency(&[0.5, 0.5, 0.5]), 1.0);
        assert!((efficiency(&[1.0, 0.5, 0.5]) - 1.5).abs() < 1e-15);
    }
}
