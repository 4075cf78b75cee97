//! Property checks shared by the `properties` and `acceptance` targets.
//!
//! Each check drives its own deterministic proptest runner for [`CASES`]
//! cases and returns the failure message, if any.

use fogform::analysis::{p_form, p_select, ArrivalDistributions, SelectionSetting};
use fogform::distribution::{solve_destinations, SolverConfig};
use fogform::formation::{
    candidate_latency, phase1, phase2, run_framework_with, Phase1Config, Phase1Result,
};
use fogform::queueing::{
    bandwidth_per_node, channel_gain, cloud_compute_delay, fog_compute_delay, service_rate,
    transmission_delay, BandwidthScheme, ChannelParams, Destination, LocalCloudSpec, NodeProfile,
};
use fogform::scenario::{generate_stream, ArrivalSpec, ScenarioConfig};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub const CASES: u32 = 1000;

fn runner() -> TestRunner {
    let config = Config { cases: CASES, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S: Strategy>(
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner().run(&strategy, test).map_err(|e| e.to_string())
}

fn scheme() -> impl Strategy<Value = BandwidthScheme> {
    prop_oneof![Just(BandwidthScheme::Equal), Just(BandwidthScheme::CloudCentric)]
}

/// A random destination whose capacity lies in a realistic range.
fn destination() -> impl Strategy<Value = Destination> {
    prop_oneof![
        (5.0..40.0f64, 0.01..0.1f64)
            .prop_map(|(comp_rate, proc_delay)| Destination::Local { comp_rate, proc_delay }),
        (3.0..30.0f64, 0.005..0.05f64)
            .prop_map(|(tx_rate, proc_delay)| Destination::Cloud { tx_rate, proc_delay }),
        (5.0..40.0f64, 5.0..40.0f64, 0.01..0.1f64).prop_map(|(tx_rate, comp, w)| {
            Destination::Neighbor { tx_rate, profile: NodeProfile::new(10.0, comp, w) }
        }),
    ]
}

fn capacity(dests: &[Destination]) -> f64 {
    dests.iter().map(|d| d.capacity()).sum()
}

fn with_rate(dest: &Destination, factor: f64) -> Destination {
    match *dest {
        Destination::Local { comp_rate, proc_delay } => {
            Destination::Local { comp_rate: comp_rate * factor, proc_delay }
        }
        Destination::Cloud { tx_rate, proc_delay } => {
            Destination::Cloud { tx_rate: tx_rate * factor, proc_delay }
        }
        Destination::Neighbor { tx_rate, profile } => Destination::Neighbor {
            tx_rate: tx_rate * factor,
            profile: NodeProfile { comp_rate: profile.comp_rate * factor, ..profile },
        },
    }
}

pub fn delays_increase_with_load() -> Result<(), String> {
    check(
        (1.0..100.0f64, 0.0..0.2f64, 0.0..0.999f64, 1e-6..1e-3f64),
        |(mu, w, f, step)| {
            let (a, b) = (f * mu, (f + step).min(1.0 - 1e-9) * mu);
            prop_assume!(b > a);
            prop_assert!(transmission_delay(a, mu).unwrap() < transmission_delay(b, mu).unwrap());
            prop_assert!(fog_compute_delay(a, mu, w).unwrap() < fog_compute_delay(b, mu, w).unwrap());
            prop_assert!(cloud_compute_delay(a, w + 1e-3) < cloud_compute_delay(b, w + 1e-3));
            Ok(())
        },
    )
}

pub fn delays_diverge_at_capacity() -> Result<(), String> {
    check((1.0..100.0f64, 0.0..0.2f64), |(mu, w)| {
        let lam = mu * (1.0 - 1e-9);
        prop_assert!(transmission_delay(lam, mu).unwrap() > 1e6);
        prop_assert!(fog_compute_delay(lam, mu, w).unwrap() > 1e6);
        prop_assert!(transmission_delay(mu, mu).is_err());
        Ok(())
    })
}

pub fn service_rate_monotone() -> Result<(), String> {
    let ch = ChannelParams::table_defaults();
    check(
        (1.0..1000.0f64, 1e-6..1.0f64, 1e3..1e8f64, 1e-6..1.0f64),
        |(d, dd, bw, dbw)| {
            let far = d * (1.0 + dd);
            prop_assert!(service_rate(&ch, bw, d) > service_rate(&ch, bw, far));
            prop_assert!(service_rate(&ch, bw * (1.0 + dbw), d) > service_rate(&ch, bw, d));
            prop_assert!(channel_gain(&ch, d) >= channel_gain(&ch, far));
            Ok(())
        },
    )
}

pub fn channel_gain_continuous() -> Result<(), String> {
    let ch = ChannelParams::table_defaults();
    check(0.0..1.0f64, |d| {
        prop_assert_eq!(channel_gain(&ch, d), ch.beta1);
        let just_past = channel_gain(&ch, 1.0 + 1e-12);
        prop_assert!((just_past - ch.beta1).abs() <= 1e-9 * ch.beta1);
        Ok(())
    })
}

pub fn bandwidth_conservation() -> Result<(), String> {
    check((scheme(), 1e3..1e9f64, 0usize..=64), |(scheme, total, j)| {
        let share = bandwidth_per_node(scheme, total, j);
        let sum = match scheme {
            BandwidthScheme::Equal => {
                prop_assert_eq!(share.fog, share.cloud);
                (j + 1) as f64 * share.fog
            }
            BandwidthScheme::CloudCentric => {
                prop_assert!((share.cloud - 2.0 * share.fog).abs() <= 1e-12 * total);
                j as f64 * share.fog + share.cloud
            }
        };
        prop_assert!((sum - total).abs() <= 1e-12 * total, "{} vs {}", sum, total);
        Ok(())
    })
}

pub fn solver_conservation() -> Result<(), String> {
    let cfg = SolverConfig::default();
    check(
        (prop::collection::vec(destination(), 1..=8), 0.01..0.95f64),
        |(dests, frac)| {
            let x = frac * capacity(&dests);
            let r = solve_destinations(&dests, x, &cfg).unwrap();
            prop_assert!((r.distribution.alpha_sum() - 1.0).abs() <= 1e-9);
            for (d, &l) in dests.iter().zip(&r.loads) {
                prop_assert!(l >= 0.0 && l < d.capacity());
            }
            prop_assert!(r.efficiency >= 1.0);
            let max = r.per_node_latency.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(r.u_star, max);
            Ok(())
        },
    )
}

pub fn solver_monotone_in_load() -> Result<(), String> {
    let cfg = SolverConfig::default();
    check(
        (prop::collection::vec(destination(), 1..=8), 0.01..0.9f64, 1e-4..0.05f64),
        |(dests, frac, more)| {
            let cap = capacity(&dests);
            let a = solve_destinations(&dests, frac * cap, &cfg).unwrap();
            let b = solve_destinations(&dests, (frac + more) * cap, &cfg).unwrap();
            prop_assert!(a.u_star <= b.u_star * (1.0 + 1e-8), "{} > {}", a.u_star, b.u_star);
            Ok(())
        },
    )
}

pub fn solver_monotone_in_rate() -> Result<(), String> {
    let cfg = SolverConfig::default();
    check(
        (prop::collection::vec(destination(), 1..=8), 0.01..0.9f64, any::<prop::sample::Index>(), 1.0..2.0f64),
        |(dests, frac, which, factor)| {
            let x = frac * capacity(&dests);
            let base = solve_destinations(&dests, x, &cfg).unwrap();
            let mut faster = dests.clone();
            let k = which.index(dests.len());
            faster[k] = with_rate(&dests[k], factor);
            let r = solve_destinations(&faster, x, &cfg).unwrap();
            prop_assert!(r.u_star <= base.u_star * (1.0 + 1e-8), "{} > {}", r.u_star, base.u_star);
            Ok(())
        },
    )
}

pub fn solver_permutation_invariant() -> Result<(), String> {
    let cfg = SolverConfig::default();
    check(
        (prop::collection::vec(destination(), 2..=8), 0.01..0.9f64)
            .prop_flat_map(|(d, f)| {
                let n = d.len();
                (Just(d), Just(f), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
            }),
        |(dests, frac, perm)| {
            let x = frac * capacity(&dests);
            let shuffled: Vec<Destination> = perm.iter().map(|&i| dests[i]).collect();
            let a = solve_destinations(&dests, x, &cfg).unwrap();
            let b = solve_destinations(&shuffled, x, &cfg).unwrap();
            prop_assert!((a.u_star - b.u_star).abs() <= 1e-8 * a.u_star);
            for (pos, &i) in perm.iter().enumerate() {
                prop_assert!((a.loads[i] - b.loads[pos]).abs() / x <= 1e-6);
            }
            Ok(())
        },
    )
}

fn small_scenario(seed: u64, n: usize, tau: f64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        n_observations: n,
        tau,
        local_cloud: LocalCloudSpec { cloud_distance: 120.0, ..LocalCloudSpec::default() },
        ..ScenarioConfig::default()
    }
}

fn table_phase1(cfg: &ScenarioConfig) -> Phase1Result {
    fogform::formation::phase1_for(cfg).expect("default scenario is feasible")
}

pub fn phase2_sound_and_repeatable() -> Result<(), String> {
    let base = small_scenario(0, 300, 0.002);
    let p1 = table_phase1(&base);
    let fog_bw = bandwidth_per_node(base.scheme, base.channel.total_bandwidth, p1.j_hat).fog;
    check((any::<u64>(), 0u64..1000, 1.0..2.0f64, 10usize..300), |(seed, rep, gamma, n)| {
        let cfg = ScenarioConfig { seed, n_observations: n, ..base.clone() };
        let stream = generate_stream(&cfg, rep);
        let out = phase2(&stream, gamma, &p1, &cfg.channel, cfg.scheme);
        for s in &out.selected {
            let d = candidate_latency(&s.profile, p1.lambda_hat, fog_bw, &cfg.channel);
            prop_assert_eq!(d, s.latency);
            prop_assert!(d <= gamma * p1.u_hat);
        }
        prop_assert!(out.selected.len() <= p1.j_hat && out.observations_used <= n);
        prop_assert_eq!(out.complete, out.selected.len() == p1.j_hat);
        let again = phase2(&stream, gamma, &p1, &cfg.channel, cfg.scheme);
        prop_assert_eq!(again, out);
        Ok(())
    })
}

pub fn gamma_trace_steps() -> Result<(), String> {
    let base = small_scenario(0, 300, 0.002);
    let p1 = table_phase1(&base);
    check((any::<u64>(), 0u64..1000, 0.005..0.05f64, 20usize..120), |(seed, rep, tau, n)| {
        let cfg = small_scenario(seed, n, tau);
        let run = run_framework_with(&cfg, rep, &p1).unwrap();
        let trace = &run.gamma_trace;
        prop_assert_eq!(trace[0], cfg.gamma0);
        for (k, w) in trace.windows(2).enumerate() {
            prop_assert!(w[1] > w[0]);
            let expect = cfg.gamma0 + (k + 1) as f64 * tau;
            prop_assert!((w[1] - expect).abs() <= 1e-12 * expect);
        }
        prop_assert!(run.outcome.complete);
        Ok(())
    })
}

pub fn stream_determinism() -> Result<(), String> {
    check((any::<u64>(), 0u64..1_000_000, 1usize..64), |(seed, rep, n)| {
        let cfg = ScenarioConfig { seed, n_observations: n, ..ScenarioConfig::default() };
        let a = generate_stream(&cfg, rep);
        prop_assert_eq!(&a, &generate_stream(&cfg, rep));
        prop_assert_eq!(a.len(), n);
        prop_assert_ne!(&a, &generate_stream(&cfg, rep + 1));
        for node in a.nodes() {
            prop_assert!(node.distance >= 0.0 && node.distance <= cfg.arrival.disk_radius);
            prop_assert!(node.comp_rate >= 15.0 && node.comp_rate <= 40.0);
        }
        Ok(())
    })
}

pub fn phase1_exit_is_local_minimum() -> Result<(), String> {
    let cfg = Phase1Config::default();
    let ch = ChannelParams::table_defaults();
    let ideal = ArrivalSpec::default().extremes();
    check((scheme(), 5.0..20.0f64, 80.0..160.0f64), |(scheme, x, dc)| {
        let lc = LocalCloudSpec { cloud_distance: dc, ..LocalCloudSpec::default() };
        let p1 = phase1(&ideal, &ch, scheme, &lc, x, &cfg).unwrap();
        let c = &p1.size_latency;
        let j = p1.j_hat;
        if j > 0 {
            prop_assert!(c[j] <= c[j - 1]);
        }
        if j < cfg.j_max {
            prop_assert!(c[j] < c[j + 1]);
        }
        let sum = j as f64 * p1.lambda_hat + p1.lambda_hat_local + p1.lambda_hat_cloud;
        prop_assert!((sum - x).abs() <= 1e-6, "loads sum to {} not {}", sum, x);
        Ok(())
    })
}

fn wide_delay_setting(lambda_hat: f64) -> SelectionSetting {
    let arrival = ArrivalSpec { proc_delay_range: (0.05, 0.10), ..ArrivalSpec::default() };
    SelectionSetting {
        ideal: arrival.extremes(),
        j_hat: 6,
        lambda_hat,
        channel: ChannelParams::table_defaults(),
        scheme: BandwidthScheme::Equal,
        dists: ArrivalDistributions::from(&arrival),
    }
}

pub fn p_select_monotone_in_gamma() -> Result<(), String> {
    check((0.2..3.0f64, 1.0..4.0f64, 0.0..1.0f64), |(lam, g, dg)| {
        let s = wide_delay_setting(lam);
        let (a, b) = (p_select(g, &s), p_select(g + dg, &s));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(a <= b, "p_select({}) = {} > p_select({}) = {}", g, a, g + dg, b);
        Ok(())
    })
}

pub fn p_form_monotone() -> Result<(), String> {
    check(
        (0.0..1.0f64, 0.0..1.0f64, 1usize..500, 0usize..100, 0usize..50),
        |(p, dp, n, dn, j)| {
            let q = p + dp * (1.0 - p);
            let j = j.min(n);
            let base = p_form(p, n, j);
            prop_assert!((0.0..=1.0).contains(&base));
            prop_assert!(base <= p_form(q, n, j) + 1e-12);
            prop_assert!(base <= p_form(p, n + dn, j) + 1e-12);
            if j < n {
                prop_assert!(p_form(p, n, j + 1) <= base + 1e-12);
            }
            Ok(())
        },
    )
}

/// Every check, by name.
#[allow(dead_code)]
pub fn all() -> Vec<(&'static str, fn() -> Result<(), String>)> {
    vec![
        ("delays increase with load", delays_increase_with_load),
        ("delays diverge at capacity", delays_diverge_at_capacity),
        ("service rate monotone", service_rate_monotone),
        ("channel gain continuous", channel_gain_continuous),
        ("bandwidth conservation", bandwidth_conservation),
        ("solver conservation", solver_conservation),
        ("solver monotone in load", solver_monotone_in_load),
        ("solver monotone in rate", solver_monotone_in_rate),
        ("solver permutation invariant", solver_permutation_invariant),
        ("phase 2 sound and repeatable", phase2_sound_and_repeatable),
        ("gamma trace steps", gamma_trace_steps),
        ("stream determinism", stream_determinism),
        ("phase 1 exit is a local minimum", phase1_exit_is_local_minimum),
        ("p_select monotone in gamma", p_select_monotone_in_gamma),
        ("p_form monotone", p_form_monotone),
    ]
}
