//! Subcommands. Each returns the tables it produced; writing is left to `main`.

use fogform::analysis::{
    gamma_bar, gamma_bar_s, ideal_latency, p_form, p_select, ArrivalDistributions, SelectionSetting,
};
use fogform::formation::{cloud_only_latency, phase1_at_size, phase1_for, size_sweep, track_gamma, Phase1Result};
use fogform::queueing::{LocalCloudSpec, NodeProfile};
use fogform::scenario::{
    run_fixed_gamma_replications, run_replications, run_replications_with, MeanStderr, ReplicationReport,
    ScenarioConfig,
};
use fogform::FormationError;
use thiserror::Error;

use crate::config::{parse_scheme, ConfigError, ConfigFile, Experiment};
use crate::output::{int, num, CsvTable};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("{0}")]
    IterationCap(String),
    #[error("output: {0}")]
    Output(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::IterationCap(_) => 4,
            CliError::Output(_) => 1,
        }
    }
}

impl From<FormationError> for CliError {
    fn from(e: FormationError) -> Self {
        match e {
            FormationError::IterationCapExceeded { .. } => CliError::IterationCap(e.to_string()),
            FormationError::Model(m) => CliError::Config(ConfigError::Invalid(m.to_string())),
            other => CliError::Infeasible(other.to_string()),
        }
    }
}

/// Tables produced by a command, plus the number of replications that hit
/// the iteration cap.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<CsvTable>,
    pub capped: usize,
}

impl Outcome {
    fn absorb(&mut self, report: &ReplicationReport) {
        self.capped += capped(report);
    }
}

fn capped(report: &ReplicationReport) -> usize {
    report
        .failures
        .iter()
        .filter(|(_, e)| matches!(e, FormationError::IterationCapExceeded { .. }))
        .count()
}

pub fn run(exp: &Experiment) -> Result<Outcome, CliError> {
    let cfg = &exp.scenario;
    let report = run_replications(cfg)?;
    let mut reps = CsvTable::new(
        "replications",
        &[
            "replication",
            "j_hat",
            "u_hat_s",
            "latency_s",
            "baseline_latency_s",
            "offline_latency_s",
            "gamma",
            "gamma_updates",
            "observations",
            "baseline_observations",
            "alpha_local",
            "alpha_cloud",
            "alpha_fog",
            "mean_fog_rate_pps",
            "efficiency",
        ],
    );
    for r in &report.records {
        reps.push(vec![
            int(r.index),
            int(r.j_hat),
            num(r.u_hat),
            num(r.latency),
            num(r.baseline_latency),
            num(r.offline_latency),
            num(r.gamma),
            int(r.gamma_updates),
            int(r.observations_used),
            int(r.baseline_observations),
            num(r.alpha_local),
            num(r.alpha_cloud),
            num(r.alpha_fog),
            num(r.mean_fog_rate),
            num(r.efficiency),
        ]);
    }
    let a = &report.aggregate;
    let mut summary = CsvTable::new("summary", &["metric", "mean", "stderr"]);
    let rows: [(&str, MeanStderr); 9] = [
        ("latency_s", a.latency),
        ("baseline_latency_s", a.baseline_latency),
        ("gamma", a.gamma),
        ("observations", a.observations_used),
        ("alpha_local", a.alpha_local),
        ("alpha_cloud", a.alpha_cloud),
        ("alpha_fog", a.alpha_fog),
        ("efficiency", a.efficiency),
        ("competitive_ratio", a.competitive_ratio),
    ];
    for (name, m) in rows {
        summary.push(vec![name.into(), num(m.mean), num(m.stderr)]);
    }
    summary.push(vec!["gain_over_baseline".into(), num(a.gain_over_baseline()), "nan".into()]);
    summary.push(vec!["successes".into(), int(a.successes), "nan".into()]);
    summary.push(vec!["failures".into(), int(a.failures), "nan".into()]);
    let mut out = Outcome::default();
    out.absorb(&report);
    out.tables = vec![reps, summary];
    Ok(out)
}

pub fn sweep(exp: &Experiment) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    for family in &exp.file.sweep.families {
        let table = match family.as_str() {
            "latency_vs_rate" => latency_vs_rate(exp, &mut out)?,
            "local_fraction" => local_fraction(exp, &mut out)?,
            "latency_vs_size" => latency_vs_size(exp, &mut out)?,
            "gamma_trace" => gamma_trace(exp)?,
            "fog_tx_rate" => fog_tx_rate(exp, &mut out)?,
            "task_split" => task_split(exp, &mut out)?,
            "fixed_gamma" => fixed_gamma(exp)?,
            "efficiency" => efficiency(exp)?,
            "offline_size" => offline_tables(exp)?.0,
            "formation_probability" => analyze_tables(exp)?.0,
            other => return Err(ConfigError::Invalid(format!("unknown sweep family '{other}'")).into()),
        };
        out.tables.push(table);
    }
    Ok(out)
}

pub fn analyze(exp: &Experiment) -> Result<Outcome, CliError> {
    let (curves, bounds) = analyze_tables(exp)?;
    Ok(Outcome { tables: vec![curves, bounds], capped: 0 })
}

pub fn offline_sweep(exp: &Experiment) -> Result<Outcome, CliError> {
    let (sizes, summary) = offline_tables(exp)?;
    Ok(Outcome { tables: vec![sizes, summary], capped: 0 })
}

/// A sweep point: the experiment with `edit` applied and the sweep's
/// replication count.
fn point(exp: &Experiment, edit: impl FnOnce(&mut ConfigFile)) -> Result<ScenarioConfig, CliError> {
    let mut file = exp.file.clone();
    file.replications = file.sweep.replications.unwrap_or(file.replications);
    edit(&mut file);
    Ok(file.scenario()?)
}

fn sizes(exp: &Experiment) -> std::ops::RangeInclusive<usize> {
    exp.file.sweep.size_min..=exp.file.sweep.size_max
}

fn forced(cfg: &ScenarioConfig, size: usize) -> Result<Phase1Result, FormationError> {
    phase1_at_size(&cfg.ideal, &cfg.channel, cfg.scheme, &cfg.local_cloud, cfg.x_rate, size, &cfg.solver)
}

fn latency_vs_rate(exp: &Experiment, out: &mut Outcome) -> Result<CsvTable, CliError> {
    let mut t = CsvTable::new(
        "latency_vs_rate",
        &[
            "cloud_distance_m",
            "x_rate_pps",
            "j_hat",
            "latency_s",
            "latency_stderr_s",
            "baseline_latency_s",
            "baseline_stderr_s",
            "gain_over_baseline",
            "gamma",
            "competitive_ratio",
            "successes",
            "failures",
        ],
    );
    for &dc in &exp.file.sweep.cloud_distances {
        for &x in &exp.file.sweep.x_rates {
            let cfg = point(exp, |f| {
                f.local_cloud.cloud_distance = dc;
                f.x_rate = x;
            })?;
            let p1 = phase1_for(&cfg)?;
            let r = run_replications_with(&cfg, &p1);
            out.absorb(&r);
            let a = &r.aggregate;
            t.push(vec![
                num(dc),
                num(x),
                int(p1.j_hat),
                num(a.latency.mean),
                num(a.latency.stderr),
                num(a.baseline_latency.mean),
                num(a.baseline_latency.stderr),
                num(a.gain_over_baseline()),
                num(a.gamma.mean),
                num(a.competitive_ratio.mean),
                int(a.successes),
                int(a.failures),
            ]);
        }
    }
    Ok(t)
}

fn local_fraction(exp: &Experiment, out: &mut Outcome) -> Result<CsvTable, CliError> {
    let mut t = CsvTable::new(
        "local_fraction",
        &[
            "fading",
            "x_rate_pps",
            "j_hat",
            "latency_s",
            "latency_stderr_s",
            "alpha_local",
            "alpha_cloud",
            "alpha_fog",
            "successes",
            "failures",
        ],
    );
    for &h in &exp.file.sweep.fadings {
        for &x in &exp.file.sweep.x_rates {
            let cfg = point(exp, |f| {
                f.channel.fading = h;
                f.x_rate = x;
            })?;
            let p1 = phase1_for(&cfg)?;
            let r = run_replications_with(&cfg, &p1);
            out.absorb(&r);
            let a = &r.aggregate;
            t.push(vec![
                num(h),
                num(x),
                int(p1.j_hat),
                num(a.latency.mean),
                num(a.latency.stderr),
                num(a.alpha_local.mean),
                num(a.alpha_cloud.mean),
                num(a.alpha_fog.mean),
                int(a.successes),
                int(a.failures),
            ]);
        }
    }
    Ok(t)
}

/// Replications with the network size forced to each value of the sweep's
/// size range; `None` where the forced size cannot carry the load.
fn per_size(
    exp: &Experiment,
    cfg: &ScenarioConfig,
    out: &mut Outcome,
) -> Result<Vec<(usize, Option<(Phase1Result, ReplicationReport)>)>, CliError> {
    let mut rows = Vec::new();
    for size in sizes(exp) {
        match forced(cfg, size) {
            Ok(p1) => {
                let r = run_replications_with(cfg, &p1);
                out.absorb(&r);
                rows.push((size, Some((p1, r))));
            }
            Err(FormationError::Infeasible { .. }) => rows.push((size, None)),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(rows)
}

fn latency_vs_size(exp: &Experiment, out: &mut Outcome) -> Result<CsvTable, CliError> {
    let mut t = CsvTable::new(
        "latency_vs_size",
        &[
            "x_rate_pps",
            "proc_delay_s",
            "size",
            "phase1_j_hat",
            "u_hat_s",
            "latency_s",
            "latency_stderr_s",
            "baseline_latency_s",
            "successes",
            "failures",
        ],
    );
    for &x in &exp.file.sweep.size_rates {
        for &omega in &exp.file.sweep.size_proc_delays {
            let cfg = point(exp, |f| {
                f.x_rate = x;
                f.local_cloud.local_proc_delay = omega;
                f.arrival.proc_delay_min = omega;
                f.arrival.proc_delay_max = omega;
            })?;
            let natural = phase1_for(&cfg)?.j_hat;
            for (size, res) in per_size(exp, &cfg, out)? {
                let (u_hat, a) = match &res {
                    Some((p1, r)) => (p1.u_hat, Some(&r.aggregate)),
                    None => (f64::NAN, None),
                };
                t.push(vec![
                    num(x),
                    num(omega),
                    int(size),
                    int(natural),
                    num(u_hat),
                    num(a.map_or(f64::NAN, |a| a.latency.mean)),
                    num(a.map_or(f64::NAN, |a| a.latency.stderr)),
                    num(a.map_or(f64::NAN, |a| a.baseline_latency.mean)),
                    int(a.map_or(0, |a| a.successes)),
                    int(a.map_or(cfg.replications, |a| a.failures)),
                ]);
            }
        }
    }
    Ok(t)
}

fn gamma_trace(exp: &Experiment) -> Result<CsvTable, CliError> {
    let mut t = CsvTable::new("gamma_trace", &["cloud_distance_m", "iteration", "gamma", "completed", "updates"]);
    let w = &exp.file.sweep;
    for &dc in &w.trace_cloud_distances {
        let cfg = point(exp, |f| {
            f.local_cloud.cloud_distance = dc;
            f.tau = w.trace_tau;
        })?;
        let trace = track_gamma(&cfg, 0, w.trace_iterations)?;
        let mut updates = 0;
        for (i, (&g, &done)) in trace.gammas.iter().zip(&trace.completed).enumerate() {
            if !done {
                updates += 1;
            }
            t.push(vec![num(dc), int(i), num(g), int(done as usize), int(updates)]);
        }
    }
    Ok(t)
}

fn fog_tx_rate(exp: &Experiment, out: &mut Outcome) -> Result<CsvTable, CliError> {
    let mut t = CsvTable::new(
        "fog_tx_rate",
        &["x_rate_pps", "size", "mean_fog_rate_pps", "mean_fog_rate_stderr_pps", "successes"],
    );
    for &x in &exp.file.sweep.size_rates {
        let cfg = point(exp, |f| f.x_rate = x)?;
        for (size, res) in per_size(exp, &cfg, out)? {
            let rates: Vec<f64> = res
                .as_ref()
                .map(|(_, r)| r.records.iter().map(|r| r.mean_fog_rate).collect())
                .unwrap_or_default();
            let m = MeanStderr::of(&rates);
            t.push(vec![num(x), int(size), num(m.mean), num(m.stderr), int(rates.len())]);
        }
    }
    Ok(t)
}

fn task_split(exp: &Experiment, out: &mut Outcome) -> Result<CsvTable, CliError> {
    let mut t = CsvTable::new(
        "task_split",
        &["scheme", "size", "alpha_local", "alpha_cloud", "alpha_fog", "latency_s", "successes"],
    );
    for scheme in &exp.file.sweep.schemes {
        let name = parse_scheme(scheme)?.name();
        let cfg = point(exp, |f| f.channel.scheme = name.to_string())?;
        for (size, res) in per_size(exp, &cfg, out)? {
            let a = res.as_ref().map(|(_, r)| &r.aggregate);
            let get = |f: fn(&fogform::scenario::AggregateReport) -> f64| num(a.map_or(f64::NAN, f));
            t.push(vec![
                name.to_string(),
                int(size),
                get(|a| a.alpha_local.mean),
                get(|a| a.alpha_cloud.mean),
                get(|a| a.alpha_fog.mean),
                get(|a| a.latency.mean),
                int(a.map_or(0, |a| a.successes)),
            ]);
        }
    }
    Ok(t)
}

fn fixed_gamma(exp: &Experiment) -> Result<CsvTable, CliError> {
    let mut t = CsvTable::new(
        "fixed_gamma",
        &[
            "cloud_distance_m",
            "gamma",
            "latency_s",
            "latency_stderr_s",
            "baseline_latency_s",
            "observations",
            "observations_stderr",
            "baseline_observations",
            "completed",
            "replications",
        ],
    );
    for &dc in &exp.file.sweep.fixed_cloud_distances {
        let cfg = point(exp, |f| f.local_cloud.cloud_distance = dc)?;
        let p1 = phase1_for(&cfg)?;
        for &gamma in &exp.file.sweep.fixed_gammas {
            let recs = run_fixed_gamma_replications(&cfg, gamma, &p1)?;
            let done: Vec<_> = recs.iter().filter(|r| r.complete).collect();
            let lat = MeanStderr::of(&done.iter().map(|r| r.latency).collect::<Vec<_>>());
            let base = MeanStderr::of(
                &recs.iter().map(|r| r.baseline_latency).filter(|v| !v.is_nan()).collect::<Vec<_>>(),
            );
            let obs = MeanStderr::of(&recs.iter().map(|r| r.observations_used as f64).collect::<Vec<_>>());
            let base_obs =
                MeanStderr::of(&recs.iter().map(|r| r.baseline_observations as f64).collect::<Vec<_>>());
            t.push(vec![
                num(dc),
                num(gamma),
                num(lat.mean),
                num(lat.stderr),
                num(base.mean),
                num(obs.mean),
                num(obs.stderr),
                num(base_obs.mean),
                int(done.len()),
                int(recs.len()),
            ]);
        }
    }
    Ok(t)
}

fn efficiency(exp: &Experiment) -> Result<CsvTable, CliError> {
    let mut t = CsvTable::new(
        "efficiency",
        &["scheme", "gamma", "cloud_distance_m", "size", "efficiency", "alpha_cloud", "completed", "replications"],
    );
    let w = &exp.file.sweep;
    for scheme in &w.schemes {
        let name = parse_scheme(scheme)?.name();
        let cfg = point(exp, |f| {
            f.channel.scheme = name.to_string();
            f.local_cloud.cloud_distance = w.efficiency_cloud_distance;
        })?;
        for size in sizes(exp) {
            let (eff, cloud, done, total) = match forced(&cfg, size) {
                Ok(p1) => {
                    let recs = run_fixed_gamma_replications(&cfg, w.efficiency_gamma, &p1)?;
                    let done: Vec<_> = recs.iter().filter(|r| r.complete).collect();
                    let eff = MeanStderr::of(&done.iter().map(|r| r.efficiency).collect::<Vec<_>>());
                    let cloud = MeanStderr::of(&done.iter().map(|r| r.alpha_cloud).collect::<Vec<_>>());
                    (eff.mean, cloud.mean, done.len(), recs.len())
                }
                Err(FormationError::Infeasible { .. }) => (f64::NAN, f64::NAN, 0, cfg.replications),
                Err(e) => return Err(e.into()),
            };
            t.push(vec![
                name.to_string(),
                num(w.efficiency_gamma),
                num(w.efficiency_cloud_distance),
                int(size),
                num(eff),
                num(cloud),
                int(done),
                int(total),
            ]);
        }
    }
    Ok(t)
}

/// Offline size sweep over identical neighbors, and the best size per
/// neighbor distance against sending everything to the cloud.
fn offline_tables(exp: &Experiment) -> Result<(CsvTable, CsvTable), CliError> {
    let cfg = &exp.scenario;
    let o = &exp.file.offline;
    let lc = LocalCloudSpec { cloud_distance: o.cloud_distance, ..cfg.local_cloud };
    let cloud = cloud_only_latency(&cfg.channel, &lc, cfg.x_rate);
    let mut sizes_t = CsvTable::new(
        "offline_size",
        &["distance_m", "size", "latency_s", "alpha_local", "alpha_cloud", "alpha_fog", "efficiency"],
    );
    let mut best_t = CsvTable::new(
        "offline_summary",
        &["distance_m", "best_size", "best_latency_s", "cloud_only_latency_s", "reduction_vs_cloud_only"],
    );
    for &d in &o.distances {
        let profile = NodeProfile::new(d, o.comp_rate, o.proc_delay);
        let sweep = size_sweep(&profile, &cfg.channel, cfg.scheme, &lc, cfg.x_rate, o.size_min..=o.size_max, &cfg.solver);
        let mut best: Option<(usize, f64)> = None;
        for (size, sol) in &sweep {
            match sol {
                Some(s) => {
                    let dist = &s.distribution;
                    sizes_t.push(vec![
                        num(d),
                        int(*size),
                        num(s.u_star),
                        num(dist.alpha_local),
                        num(dist.alpha_cloud),
                        num(dist.alpha_fog()),
                        num(s.efficiency),
                    ]);
                    if best.is_none_or(|(_, u)| s.u_star < u) {
                        best = Some((*size, s.u_star));
                    }
                }
                None => sizes_t.push(vec![num(d), int(*size), num(f64::INFINITY), "nan".into(), "nan".into(), "nan".into(), "nan".into()]),
            }
        }
        let (j, u) = best.ok_or_else(|| CliError::Infeasible(format!("no network size carries the load at {d} m")))?;
        best_t.push(vec![num(d), int(j), num(u), num(cloud), num((cloud - u) / cloud)]);
    }
    Ok((sizes_t, best_t))
}

/// Selection and formation probability curves, and the gamma bounds, for
/// every configured observation budget.
fn analyze_tables(exp: &Experiment) -> Result<(CsvTable, CsvTable), CliError> {
    let cfg = &exp.scenario;
    let a = &exp.file.analyze;
    let given = match (a.j_hat, a.lambda_hat) {
        (Some(j), Some(l)) => Some((j, l)),
        _ => None,
    };
    let p1 = match given {
        Some((j, l)) => Phase1Result::given(j, l, f64::NAN),
        None => phase1_for(cfg)?,
    };
    let s = SelectionSetting {
        ideal: cfg.ideal,
        j_hat: p1.j_hat,
        lambda_hat: p1.lambda_hat,
        channel: cfg.channel,
        scheme: cfg.scheme,
        dists: ArrivalDistributions::from(&cfg.arrival),
    };
    // Supplied targets carry no network latency; use the ideal neighbor's.
    let p1 = if given.is_some() { Phase1Result { u_hat: ideal_latency(&s), ..p1 } } else { p1 };
    let (j_hat, lambda_hat, u_hat) = (p1.j_hat, p1.lambda_hat, p1.u_hat);
    let bar = gamma_bar(&cfg.ideal, &p1, &cfg.channel, cfg.scheme);

    let steps = ((a.gamma_max - a.gamma_min) / a.gamma_step + 1e-9).floor() as usize;
    let mut curves = CsvTable::new("formation_probability", &["n_observations", "gamma", "p_select", "p_form"]);
    let mut bounds = CsvTable::new(
        "formation_bounds",
        &["n_observations", "j_hat", "lambda_hat_pps", "u_hat_s", "gamma_bar", "gamma_bar_s", "target"],
    );
    for &n in &a.observations {
        for k in 0..=steps {
            let gamma = a.gamma_min + k as f64 * a.gamma_step;
            let ps = p_select(gamma, &s);
            curves.push(vec![int(n), num(gamma), num(ps), num(p_form(ps, n, j_hat))]);
        }
        let bar_s = gamma_bar_s(&s, n, f64::INFINITY, a.target, 1e-6).unwrap_or(f64::NAN);
        bounds.push(vec![int(n), int(j_hat), num(lambda_hat), num(u_hat), num(bar), num(bar_s), num(a.target)]);
    }
    Ok((curves, bounds))
}
