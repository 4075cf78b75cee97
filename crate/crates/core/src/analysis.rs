//! Closed-form formation analytics.
//!
//! A node passes the Phase 2 threshold whenever its link rate, computing rate
//! and processing delay are each within a `gamma` factor of the ideal
//! node's. The product of the three marginal probabilities lower-bounds the
//! per-arrival selection probability; the binomial upper tail of that bound
//! lower-bounds the probability of filling the network within `N` arrivals.

use crate::error::{AnalysisError, FormationError};
use crate::formation::{candidate_latency, network_compute_set, ArrivalStream, IdealNodeSpec, Phase1Result};
use crate::distribution::{solve_min_max, SolveResult};
use crate::queueing::{bandwidth_per_node, service_rate, BandwidthScheme, ChannelParams, Destination};
use crate::scenario::{ArrivalSpec, ScenarioConfig};

/// A one-dimensional distribution known through its CDF.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    /// Distance of a point drawn uniformly over a disk: `F(r) = r^2 / R^2`.
    Disk { radius: f64 },
    PointMass(f64),
}

impl Marginal {
    /// `P(X <= x)`, right-continuous.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } if hi > lo => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Marginal::Uniform { lo, .. } | Marginal::PointMass(lo) => {
                if x >= lo {
                    1.0
                } else {
                    0.0
                }
            }
            Marginal::Disk { radius } => {
                let r = x.clamp(0.0, radius) / radius;
                r * r
            }
        }
    }

    /// `P(X < x)`, the left limit of the CDF.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } if hi > lo => self.cdf(x),
            Marginal::Uniform { lo, .. } | Marginal::PointMass(lo) => {
                if x > lo {
                    1.0
                } else {
                    0.0
                }
            }
            Marginal::Disk { .. } => self.cdf(x),
        }
    }
}

/// Distributions of a random arrival's distance, computing rate and
/// processing delay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrivalDistributions {
    pub distance: Marginal,
    pub comp_rate: Marginal,
    pub proc_delay: Marginal,
}

impl From<&ArrivalSpec> for ArrivalDistributions {
    fn from(a: &ArrivalSpec) -> Self {
        let uniform = |(lo, hi): (f64, f64)| Marginal::Uniform { lo, hi };
        Self {
            distance: Marginal::Disk { radius: a.disk_radius },
            comp_rate: uniform(a.comp_rate_range),
            proc_delay: uniform(a.proc_delay_range),
        }
    }
}

/// Everything the selection-probability bound depends on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectionSetting {
    pub ideal: IdealNodeSpec,
    pub j_hat: usize,
    pub lambda_hat: f64,
    pub channel: ChannelParams,
    pub scheme: BandwidthScheme,
    pub dists: ArrivalDistributions,
}

impl SelectionSetting {
    pub fn fog_bandwidth(&self) -> f64 {
        bandwidth_per_node(self.scheme, self.channel.total_bandwidth, self.j_hat).fog
    }

    /// Link rate of the ideal node.
    pub fn ideal_tx_rate(&self) -> f64 {
        service_rate(&self.channel, self.fog_bandwidth(), self.ideal.min_distance)
    }

    /// Largest distance whose link rate is at least `rate`; `-inf` when no
    /// distance reaches it.
    pub fn distance_for_rate(&self, rate: f64) -> f64 {
        let c = &self.channel;
        let w = self.fog_bandwidth();
        let gain = ((rate * c.packet_bits / w).exp2() - 1.0) * w * c.noise_psd / (c.fading * c.tx_power);
        if gain > c.beta1 * (1.0 + 1e-12) {
            f64::NEG_INFINITY
        } else if gain >= c.beta1 {
            1.0
        } else {
            (gain / c.beta1).powf(-1.0 / c.beta2)
        }
    }
}

/// Lower bound on the probability that one arrival passes the threshold
/// `gamma * u_hat`.
pub fn p_select(gamma: f64, s: &SelectionSetting) -> f64 {
    let lam = s.lambda_hat;
    let rate_needed = (s.ideal_tx_rate() - lam) / gamma + lam;
    let d_star = s.distance_for_rate(rate_needed);
    let p_link = if d_star.is_finite() { s.dists.distance.cdf(d_star) } else { 0.0 };
    let comp_needed = (s.ideal.best_comp_rate - lam) / gamma + lam;
    let p_comp = 1.0 - s.dists.comp_rate.cdf_left(comp_needed);
    let p_proc = s.dists.proc_delay.cdf(gamma * s.ideal.best_proc_delay);
    p_link * p_comp * p_proc
}

/// `P(Binomial(n, p) >= j)`.
///
/// Terms are accumulated in log space outward from the mode, then
/// normalized by their own total, so neither the binomial coefficients nor
/// the mode's absolute probability are ever formed. The smaller of the two
/// tails is the one divided out, which keeps results near 1 accurate.
pub fn p_form(p_s: f64, n: usize, j_hat: usize) -> f64 {
    if j_hat == 0 {
        return 1.0;
    }
    if j_hat > n || p_s <= 0.0 {
        return 0.0;
    }
    if p_s >= 1.0 {
        return 1.0;
    }
    let ln_odds = p_s.ln() - (-p_s).ln_1p();
    let mode = (((n + 1) as f64 * p_s).floor() as usize).min(n);
    // log(pmf(k) / pmf(mode)) for k above and below the mode.
    let mut upper = 0.0;
    let mut lower = 0.0;
    let (mut tail, mut head) = if mode >= j_hat { (1.0, 0.0) } else { (0.0, 1.0) };
    let mut total = 1.0;
    let mut ln_ratio = 0.0;
    for k in mode..n {
        ln_ratio += ((n - k) as f64).ln() - ((k + 1) as f64).ln() + ln_odds;
        let term = ln_ratio.exp();
        if term == 0.0 {
            break;
        }
        upper += term;
        if k + 1 >= j_hat {
            tail += term;
        } else {
            head += term;
        }
    }
    ln_ratio = 0.0;
    for k in (1..=mode).rev() {
        ln_ratio += (k as f64).ln() - ((n - k + 1) as f64).ln() - ln_odds;
        let term = ln_ratio.exp();
        if term == 0.0 {
            break;
        }
        lower += term;
        if k - 1 >= j_hat {
            tail += term;
        } else {
            head += term;
        }
    }
    total += upper + lower;
    let p = if tail <= head { tail / total } else { 1.0 - head / total };
    p.clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbabilityReport {
    pub p_select: f64,
    pub p_form: f64,
    pub gamma: f64,
    pub n_observations: usize,
    pub j_hat: usize,
}

pub fn probability_report(gamma: f64, s: &SelectionSetting, n: usize) -> ProbabilityReport {
    let ps = p_select(gamma, s);
    ProbabilityReport { p_select: ps, p_form: p_form(ps, n, s.j_hat), gamma, n_observations: n, j_hat: s.j_hat }
}

/// Worst-case ratio: latency of a neighbor with the worst link, computing
/// rate and processing delay at the Phase 1 load, over `u_hat`. `+inf` when
/// that neighbor cannot carry the load.
pub fn gamma_bar(ideal: &IdealNodeSpec, p1: &Phase1Result, channel: &ChannelParams, scheme: BandwidthScheme) -> f64 {
    let fog_bw = bandwidth_per_node(scheme, channel.total_bandwidth, p1.j_hat).fog;
    candidate_latency(&ideal.worst_profile(), p1.lambda_hat, fog_bw, channel) / p1.u_hat
}

/// Ideal-neighbor latency at the setting's load; the `u_hat` it implies.
pub fn ideal_latency(s: &SelectionSetting) -> f64 {
    Destination::Neighbor { tx_rate: s.ideal_tx_rate(), profile: s.ideal.best_profile() }
        .total_delay(s.lambda_hat)
        .unwrap_or(f64::INFINITY)
}

/// Default target for "formation is certain".
pub const CERTAIN: f64 = 1.0 - 1e-6;

/// Smallest gamma in `[1, gamma_max]` with `p_form >= target`, by bisection
/// to `tol`. An infinite `gamma_max` is replaced by a doubling search.
pub fn gamma_bar_s(
    s: &SelectionSetting,
    n: usize,
    gamma_max: f64,
    target: f64,
    tol: f64,
) -> Result<f64, AnalysisError> {
    let form = |g: f64| p_form(p_select(g, s), n, s.j_hat);
    if form(1.0) >= target {
        return Ok(1.0);
    }
    let mut hi = if gamma_max.is_finite() { gamma_max } else { 2.0 };
    if !gamma_max.is_finite() {
        while form(hi) < target && hi < 1e6 {
            hi *= 2.0;
        }
    }
    let reached = form(hi);
    if reached < target {
        return Err(AnalysisError::NotReached { target, gamma_max: hi, reached });
    }
    let mut lo = 1.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if form(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn competitive_ratio(alg_latency: f64, opt_latency: f64) -> f64 {
    alg_latency / opt_latency
}

/// Offline benchmark for one realization: the `j_hat` arrivals with the
/// lowest latency at the Phase 1 load, with an optimized distribution.
pub fn offline_benchmark(
    stream: &ArrivalStream,
    p1: &Phase1Result,
    cfg: &ScenarioConfig,
) -> Result<SolveResult, FormationError> {
    let fog_bw = bandwidth_per_node(cfg.scheme, cfg.channel.total_bandwidth, p1.j_hat).fog;
    let mut ranked: Vec<(f64, usize)> = stream
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| (candidate_latency(n, p1.lambda_hat, fog_bw, &cfg.channel), i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let best: Vec<_> = ranked
        .iter()
        .take(p1.j_hat)
        .map(|&(_, i)| stream.nodes()[i])
        .collect();
    let set = network_compute_set(&cfg.channel, cfg.scheme, &cfg.local_cloud, &best);
    Ok(solve_min_max(&set, cfg.x_rate, &cfg.solver)?)
}
