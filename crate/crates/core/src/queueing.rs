//! Latency models for the hybrid fog/cloud network.
//!
//! Transmission links and fog computation queues are M/D/1 queues; the cloud
//! computes without queueing. Every function here is pure.

use crate::error::{ModelError, QueueError};

/// Default relative stability margin: admissible loads satisfy
/// `lambda <= (1 - STABILITY_MARGIN) * mu`.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Radio and channel constants shared by every wireless link of the
/// initial fog node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    /// Transmit power in watts.
    pub tx_power: f64,
    /// Path-loss constant.
    pub beta1: f64,
    /// Path-loss exponent.
    pub beta2: f64,
    /// Average fading gain, in (0, 1].
    pub fading: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
    /// Total bandwidth in Hz shared by the cloud link and all fog links.
    pub total_bandwidth: f64,
    /// Task packet size in bits.
    pub packet_bits: f64,
}

impl ChannelParams {
    /// 20 dBm, beta1 = 1e-3, beta2 = 4, h = 1, -174 dBm/Hz, 3 MHz, 64 KiB packets.
    pub fn table_defaults() -> Self {
        Self {
            tx_power: dbm_to_watts(20.0),
            beta1: 1e-3,
            beta2: 4.0,
            fading: 1.0,
            noise_psd: dbm_to_watts(-174.0),
            total_bandwidth: 3e6,
            packet_bits: 64.0 * 1024.0 * 8.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("tx_power", self.tx_power),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("fading", self.fading),
            ("noise_psd", self.noise_psd),
            ("total_bandwidth", self.total_bandwidth),
            ("packet_bits", self.packet_bits),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::invalid(format!("{name} must be positive")));
            }
        }
        if self.beta2 < 2.0 {
            return Err(ModelError::invalid("beta2 must be at least 2"));
        }
        if self.fading > 1.0 {
            return Err(ModelError::invalid("fading must lie in (0, 1]"));
        }
        Ok(())
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::table_defaults()
    }
}

/// How the total bandwidth is split between the cloud link and fog links.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum BandwidthScheme {
    /// Every link, cloud included, gets `B / (J + 1)`.
    #[default]
    Equal,
    /// The cloud link gets twice a fog link: `2B / (J + 2)` vs `B / (J + 2)`.
    CloudCentric,
}

impl BandwidthScheme {
    pub fn name(self) -> &'static str {
        match self {
            BandwidthScheme::Equal => "equal",
            BandwidthScheme::CloudCentric => "cloud-centric",
        }
    }
}

impl std::str::FromStr for BandwidthScheme {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equal" | "1" => Ok(BandwidthScheme::Equal),
            "cloud-centric" | "cloud_centric" | "cloudcentric" | "2" => {
                Ok(BandwidthScheme::CloudCentric)
            }
            other => Err(ModelError::invalid(format!(
                "unknown bandwidth scheme '{other}' (expected 'equal' or 'cloud-centric')"
            ))),
        }
    }
}

/// Per-link bandwidth for one network size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandwidthShare {
    pub fog: f64,
    pub cloud: f64,
}

/// Bandwidth of one fog link and of the cloud link when `neighbors` fog
/// nodes share the band with the cloud link.
pub fn bandwidth_per_node(scheme: BandwidthScheme, total: f64, neighbors: usize) -> BandwidthShare {
    let j = neighbors as f64;
    match scheme {
        BandwidthScheme::Equal => {
            let w = total / (j + 1.0);
            BandwidthShare { fog: w, cloud: w }
        }
        BandwidthScheme::CloudCentric => BandwidthShare {
            fog: total / (j + 2.0),
            cloud: 2.0 * total / (j + 2.0),
        },
    }
}

/// Piecewise path-loss gain: `beta1` up to one meter, `beta1 * d^-beta2` beyond.
pub fn channel_gain(params: &ChannelParams, distance: f64) -> f64 {
    if distance <= 1.0 {
        params.beta1
    } else {
        params.beta1 * distance.powf(-params.beta2)
    }
}

/// Wireless service rate in packets per second over a link of bandwidth
/// `bandwidth` Hz and length `distance` meters.
pub fn service_rate(params: &ChannelParams, bandwidth: f64, distance: f64) -> f64 {
    let g = channel_gain(params, distance);
    let snr = g * params.fading * params.tx_power / (bandwidth * params.noise_psd);
    bandwidth / params.packet_bits * (1.0 + snr).log2()
}

fn md1_sojourn(lambda: f64, mu: f64) -> Result<f64, QueueError> {
    if !(lambda >= 0.0) {
        return Err(QueueError::NegativeLoad { load: lambda });
    }
    if !(lambda < mu) {
        return Err(QueueError::Unstable { load: lambda, rate: mu });
    }
    Ok(lambda / (2.0 * mu * (mu - lambda)) + 1.0 / mu)
}

/// M/D/1 transmission-queue delay: waiting time plus one packet transmission.
/// Used for fog links and for the cloud link alike.
pub fn transmission_delay(lambda: f64, mu: f64) -> Result<f64, QueueError> {
    md1_sojourn(lambda, mu)
}

/// Computation delay at a fog node (neighbor or the initial node itself):
/// M/D/1 waiting, application fetch `1/mu`, and processing `omega * lambda`.
pub fn fog_compute_delay(lambda: f64, mu: f64, omega: f64) -> Result<f64, QueueError> {
    Ok(md1_sojourn(lambda, mu)? + omega * lambda)
}

/// Cloud computation delay; the cloud has no computation queue.
pub fn cloud_compute_delay(lambda: f64, omega_c: f64) -> f64 {
    omega_c * lambda
}

/// Parameters of one neighboring fog node as announced in its beacon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeProfile {
    /// Distance to the initial fog node in meters.
    pub distance: f64,
    /// Computing service rate in packets per second.
    pub comp_rate: f64,
    /// Processing delay in seconds per packet.
    pub proc_delay: f64,
}

impl NodeProfile {
    pub fn new(distance: f64, comp_rate: f64, proc_delay: f64) -> Self {
        Self { distance, comp_rate, proc_delay }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.distance >= 0.0) {
            return Err(ModelError::invalid("node distance must be non-negative"));
        }
        if !(self.comp_rate > 0.0) {
            return Err(ModelError::invalid("node computing rate must be positive"));
        }
        if !(self.proc_delay > 0.0) {
            return Err(ModelError::invalid("node processing delay must be positive"));
        }
        Ok(())
    }
}

/// The initial node's own computing parameters and the cloud's.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalCloudSpec {
    pub local_comp_rate: f64,
    pub local_proc_delay: f64,
    pub cloud_proc_delay: f64,
    pub cloud_distance: f64,
}

impl LocalCloudSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("local_comp_rate", self.local_comp_rate),
            ("local_proc_delay", self.local_proc_delay),
            ("cloud_proc_delay", self.cloud_proc_delay),
            ("cloud_distance", self.cloud_distance),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

impl Default for LocalCloudSpec {
    fn default() -> Self {
        Self {
            local_comp_rate: 20.0,
            local_proc_delay: 0.050,
            cloud_proc_delay: 0.025,
            cloud_distance: 120.0,
        }
    }
}

/// Where a share of the offered load is processed, with everything needed
/// to evaluate its end-to-end latency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Destination {
    /// The initial node computes locally; there is no transmission queue.
    Local { comp_rate: f64, proc_delay: f64 },
    /// Offload to the cloud over a link with service rate `tx_rate`.
    Cloud { tx_rate: f64, proc_delay: f64 },
    /// Offload to a neighboring fog node over a link with service rate `tx_rate`.
    Neighbor { tx_rate: f64, profile: NodeProfile },
}

impl Destination {
    /// Total latency of this destination at load `lambda`.
    pub fn total_delay(&self, lambda: f64) -> Result<f64, QueueError> {
        match *self {
            Destination::Local { comp_rate, proc_delay } => {
                fog_compute_delay(lambda, comp_rate, proc_delay)
            }
            Destination::Cloud { tx_rate, proc_delay } => {
                Ok(transmission_delay(lambda, tx_rate)? + cloud_compute_delay(lambda, proc_delay))
            }
            Destination::Neighbor { tx_rate, profile } => Ok(transmission_delay(lambda, tx_rate)?
                + fog_compute_delay(lambda, profile.comp_rate, profile.proc_delay)?),
        }
    }

    /// Supremum of stable loads.
    pub fn capacity(&self) -> f64 {
        match *self {
            Destination::Local { comp_rate, .. } => comp_rate,
            Destination::Cloud { tx_rate, .. } => tx_rate,
            Destination::Neighbor { tx_rate, profile } => tx_rate.min(profile.comp_rate),
        }
    }

    pub fn kind(&self) -> DestinationKind {
        match self {
            Destination::Local { .. } => DestinationKind::Local,
            Destination::Cloud { .. } => DestinationKind::Cloud,
            Destination::Neighbor { .. } => DestinationKind::Neighbor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DestinationKind {
    Local,
    Cloud,
    Neighbor,
}

/// Free-function form of [`Destination::total_delay`].
pub fn total_delay(dest: &Destination, lambda: f64) -> Result<f64, QueueError> {
    dest.total_delay(lambda)
}
