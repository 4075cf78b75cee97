use fogform::analysis::{
    gamma_bar, gamma_bar_s, p_form, p_select, ArrivalDistributions, Marginal, SelectionSetting,
    CERTAIN,
};
use fogform::formation::phase1_for;
use fogform::queueing::{BandwidthScheme, ChannelParams, LocalCloudSpec};
use fogform::scenario::{ArrivalSpec, ScenarioConfig};
use fogform::AnalysisError;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use statrs::distribution::{Binomial, DiscreteCDF};

/// `P(Bin(n, a/b) >= j)` in exact rational arithmetic.
fn exact_tail(a: u64, b: u64, n: usize, j: usize) -> f64 {
    let (a, c) = (BigUint::from(a), BigUint::from(b - a));
    let mut binom = BigUint::one();
    let mut num = BigUint::zero();
    for k in 0..=n {
        if k > 0 {
            binom = binom * BigUint::from(n - k + 1) / BigUint::from(k);
        }
        if k >= j {
            num += &binom * a.pow(k as u32) * c.pow((n - k) as u32);
        }
    }
    let den = BigUint::from(b).pow(n as u32);
    BigRational::new(BigInt::from(num), BigInt::from(den)).to_f64().unwrap()
}

#[test]
fn p_form_matches_exact_rational_tail() {
    let cases = [
        (1, 2, 10, 3),
        (3, 1024, 300, 6),
        (150, 1024, 300, 6),
        (151, 1024, 300, 44),
        (7, 8, 300, 290),
        (1, 1024, 300, 1),
        (511, 1024, 1, 1),
        (1000, 1024, 50, 50),
        (41, 1024, 300, 2),
    ];
    for (a, b, n, j) in cases {
        let p = a as f64 / b as f64;
        let got = p_form(p, n, j);
        let want = exact_tail(a, b, n, j);
        assert!((got - want).abs() <= 1e-12, "p={p} n={n} j={j}: {got} vs {want}");
    }
}

#[test]
fn p_form_at_ten_thousand_observations() {
    for (a, j) in [(1u64, 5usize), (100, 1000), (512, 5000), (512, 5100), (1000, 9770)] {
        let p = a as f64 / 1024.0;
        let got = p_form(p, 10_000, j);
        let want = exact_tail(a, 1024, 10_000, j);
        assert!((got - want).abs() <= 1e-12, "p={p} j={j}: {got} vs {want}");
        let sf = Binomial::new(p, 10_000).unwrap().sf(j as u64 - 1);
        assert!((got - sf).abs() <= 1e-9, "p={p} j={j}: {got} vs statrs {sf}");
    }
}

fn wide_delay() -> SelectionSetting {
    let arrival = ArrivalSpec { proc_delay_range: (0.05, 0.10), ..ArrivalSpec::default() };
    SelectionSetting {
        ideal: arrival.extremes(),
        j_hat: 6,
        lambda_hat: 1.4,
        channel: ChannelParams::table_defaults(),
        scheme: BandwidthScheme::Equal,
        dists: ArrivalDistributions::from(&arrival),
    }
}

#[test]
fn certain_formation_at_gamma_2_08() {
    let s = wide_delay();
    assert!(p_form(p_select(2.08, &s), 300, 6) >= 0.999);
}

#[test]
fn fewer_observations_need_larger_gamma() {
    let s = wide_delay();
    let g: Vec<f64> = [50, 100, 300, 1000]
        .iter()
        .map(|&n| gamma_bar_s(&s, n, f64::INFINITY, CERTAIN, 1e-4).unwrap())
        .collect();
    assert!(g.windows(2).all(|w| w[0] > w[1]), "{g:?}");
    let at = p_form(p_select(g[2], &s), 300, 6);
    assert!(at >= CERTAIN);
    let below = p_form(p_select(g[2] - 1e-3, &s), 300, 6);
    assert!(below < CERTAIN);
}

#[test]
fn gamma_bar_s_reports_unreachable_targets() {
    let s = wide_delay();
    match gamma_bar_s(&s, 300, 1.3, CERTAIN, 1e-4) {
        Err(AnalysisError::NotReached { gamma_max, reached, .. }) => {
            assert_eq!(gamma_max, 1.3);
            assert!(reached < CERTAIN);
        }
        other => panic!("expected NotReached, got {other:?}"),
    }
}

#[test]
fn point_mass_boundary_uses_left_limit_for_rates() {
    let mut s = wide_delay();
    s.dists = ArrivalDistributions {
        distance: Marginal::PointMass(0.0),
        comp_rate: Marginal::PointMass(40.0),
        proc_delay: Marginal::PointMass(0.05),
    };
    // Every event holds with equality at gamma = 1.
    assert_eq!(p_select(1.0, &s), 1.0);
    s.dists.comp_rate = Marginal::PointMass(39.0);
    assert_eq!(p_select(1.0, &s), 0.0);
    assert!(p_select(1.1, &s) > 0.0);
}

#[test]
fn worst_case_bound_exceeds_converged_gamma() {
    let cfg = ScenarioConfig {
        local_cloud: LocalCloudSpec { cloud_distance: 120.0, ..LocalCloudSpec::default() },
        ..ScenarioConfig::default()
    };
    let p1 = phase1_for(&cfg).unwrap();
    let bar = gamma_bar(&cfg.ideal, &p1, &cfg.channel, cfg.scheme);
    assert!(bar.is_finite() && bar > 1.21, "gamma_bar = {bar}");
}
