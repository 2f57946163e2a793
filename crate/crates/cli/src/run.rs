//! Command dispatch.

use serde_json::{json, Value};

use rc_lab_core::order_stats::{falk_constants, normality_diagnostic};
use rc_lab_core::scaling::{
    bound_checks, evaluate_point, fit_sweep, m_rule, run_sweep, upper_bound_reference,
};
use rc_lab_core::sim::{estimate_from_outcomes, estimate_throughput, simulate_trials};
use rc_lab_core::{
    seed, BoundCheck, ChannelLaw, NetworkConfig, OrderStatSpec, ParentDistribution, Policy,
    SweepPlan, SweepRow, ThroughputEstimate, TopSampler, VERSION,
};

use crate::config::{default_rank, Command, DistributionKind, ExperimentConfig};
use crate::error::RunError;
use crate::output::{Cell, Writer};

/// What a finished run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub status: &'static str,
    pub files: Vec<String>,
}

/// Runs `cfg` on a pool capped at `cfg.threads` workers (rayon's default
/// otherwise) and writes its outputs plus `manifest.json`.
///
/// On failure the manifest is still written when the output directory is
/// usable, with status `partial` or `failed` and the error record.
pub fn run(cfg: &ExperimentConfig) -> Result<Summary, RunError> {
    let mut w = Writer::new(&cfg.output_dir, VERSION, cfg.effective())?;
    let outcome = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| RunError::Threads(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(cfg, &mut w))),
        None => dispatch(cfg, &mut w),
    };
    match outcome {
        Ok(()) => {
            w.manifest("complete", None)?;
            Ok(Summary {
                status: "complete",
                files: w.files().to_vec(),
            })
        }
        Err(e) => {
            let status = if w.files().is_empty() {
                "failed"
            } else {
                "partial"
            };
            // The original error matters more than a failure to record it.
            let _ = w.manifest(status, Some(e.record()));
            Err(e)
        }
    }
}

fn dispatch(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), RunError> {
    match cfg.command {
        Command::Simulate => simulate(cfg, w),
        Command::Sweep => sweep(cfg, w),
        Command::FalkCheck => falk_check(cfg, w),
        Command::DistCheck => dist_check(cfg, w),
    }
}

fn sampler(cfg: &ExperimentConfig) -> TopSampler {
    if cfg.oracle_mode {
        TopSampler::Naive
    } else {
        TopSampler::Spacing
    }
}

const POINT_HEADER: [&str; 10] = [
    "n",
    "m",
    "trials",
    "mean_M",
    "std_error",
    "success_rate",
    "markov_event_prob",
    "markov_bound",
    "tail_event_prob",
    "quarter_ratio",
];

fn point_row(n: u64, m: usize, est: &ThroughputEstimate, b: Option<&BoundCheck>) -> Vec<Cell> {
    let nan = f64::NAN;
    let (mp, mb, tp, qr) = b.map_or((nan, nan, nan, nan), |b| {
        (
            b.markov_event_prob,
            b.markov_bound,
            b.tail_event_prob,
            b.quarter_ratio,
        )
    });
    vec![
        n.into(),
        m.into(),
        est.trials.into(),
        est.mean_m.into(),
        est.std_error.into(),
        est.success_rate.into(),
        mp.into(),
        mb.into(),
        tp.into(),
        qr.into(),
    ]
}

fn simulate(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), RunError> {
    let n = cfg.n_grid[0];
    let m = match cfg.m {
        Some(m) => m,
        None => m_rule(n, cfg.delta)?,
    };
    let net = NetworkConfig {
        n,
        m,
        beta: cfg.beta,
        noise: cfg.noise,
        policy: cfg.policy,
        distribution: cfg.law()?,
        trials: cfg.trials,
        seed: cfg.seed,
        sampler: sampler(cfg),
    };
    net.validate()?;
    let top = cfg.policy == Policy::TopM;

    let (estimate, bounds) = if cfg.dump_trials {
        let outcomes = simulate_trials(&net)?;
        let estimate = estimate_from_outcomes(m, &outcomes)?;
        let bounds = if top {
            Some(bound_checks(&net, &outcomes)?)
        } else {
            None
        };
        let mut rows = Vec::with_capacity(outcomes.len() * m);
        for (t, o) in outcomes.iter().enumerate() {
            for (k, (&g, &s)) in o.direct_gains.iter().zip(&o.sinr).enumerate() {
                rows.push(vec![
                    t.into(),
                    (k + 1).into(),
                    g.into(),
                    s.into(),
                    (s >= cfg.beta).into(),
                ]);
            }
        }
        w.csv(
            "trials.csv",
            &["trial", "rank", "direct_gain", "sinr", "success"],
            &rows,
        )?;
        (estimate, bounds)
    } else if top {
        let (e, b) = evaluate_point(&net)?;
        (e, Some(b))
    } else {
        (estimate_throughput(&net)?, None)
    };

    if cfg.format.csv() {
        w.csv(
            "simulate.csv",
            &POINT_HEADER,
            &[point_row(n, m, &estimate, bounds.as_ref())],
        )?;
    }
    if cfg.format.json() {
        w.json(
            "simulate.json",
            &json!({ "n": n, "m": m, "estimate": estimate, "bounds": bounds }),
        )?;
    }
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), RunError> {
    let plan = SweepPlan {
        n_grid: cfg.n_grid.clone(),
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        beta: cfg.beta,
        noise: cfg.noise,
        trials: cfg.trials,
        seed: cfg.seed,
        policy: cfg.policy,
        sampler: sampler(cfg),
    };
    plan.validate()?;
    let (rows, failure) = match run_sweep(&plan) {
        Ok(rows) => (rows, None),
        Err(f) => (f.partial.clone(), Some(f)),
    };
    write_sweep_rows(cfg, w, &rows)?;
    if let Some(f) = failure {
        return Err(RunError::Sweep(f.to_string()));
    }

    let fit = fit_sweep(&rows);
    let last = rows.last().expect("validated grid is non-empty");
    let anchor = last.estimate.mean_m / (last.n as f64).cbrt();
    let reference = if anchor > 0.0 {
        Some(upper_bound_reference(&cfg.n_grid, anchor)?)
    } else {
        None
    };
    let (fit, fit_error) = match fit {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    w.json(
        "sweep_fit.json",
        &json!({
            "fit": fit,
            "fit_error": fit_error,
            "target_exponent": 1.0 / 3.0 - cfg.delta,
            "upper_bound_reference": {
                "constant": anchor,
                "points": reference.map(|r| r.into_iter().map(|(n, v)| json!([n, v])).collect::<Vec<_>>()),
            },
        }),
    )?;
    Ok(())
}

fn write_sweep_rows(
    cfg: &ExperimentConfig,
    w: &mut Writer,
    rows: &[SweepRow],
) -> Result<(), RunError> {
    if cfg.format.csv() {
        let table: Vec<Vec<Cell>> = rows
            .iter()
            .map(|r| point_row(r.n, r.m, &r.estimate, Some(&r.bounds)))
            .collect();
        w.csv("sweep.csv", &POINT_HEADER, &table)?;
    }
    if cfg.format.json() {
        w.json("sweep.json", &json!({ "rows": rows }))?;
    }
    Ok(())
}

fn falk_check(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), RunError> {
    let law = cfg.law()?;
    let replicates = usize::try_from(cfg.trials)
        .map_err(|_| RunError::Usage(crate::config::UsageError::new("trials", "too large")))?;
    let mut points = Vec::new();
    let mut samples = Vec::new();
    for (idx, &n) in cfg.n_grid.iter().enumerate() {
        let i = cfg.rank.unwrap_or_else(|| default_rank(n));
        let spec = OrderStatSpec::new(n, i)?;
        let report = normality_diagnostic(&law, spec, replicates, seed::mix(cfg.seed, idx as u64))?;
        let mut point = json!({
            "n": n,
            "rank": i,
            "a_n": report.normalization.a_n,
            "b_n": report.normalization.b_n,
            "ks": report.ks,
            "replicates": replicates,
            "monte_carlo_noise": 1.0 / (replicates as f64).sqrt(),
        });
        if !cfg.format.csv() {
            point["normalized"] = json!(report.normalized);
        }
        points.push(point);
        for (k, &z) in report.normalized.iter().enumerate() {
            samples.push(vec![n.into(), i.into(), k.into(), z.into()]);
        }
    }
    let ks: Vec<f64> = points
        .iter()
        .map(|p| p["ks"].as_f64().unwrap_or(f64::NAN))
        .collect();
    w.json("falk.json", &json!({ "points": points, "ks": ks }))?;
    if cfg.format.csv() {
        w.csv(
            "falk_samples.csv",
            &["n", "rank", "replicate", "normalized"],
            &samples,
        )?;
    }
    Ok(())
}

/// Probabilities for the round-trip check: a uniform grid plus points
/// deep in the upper tail.
fn round_trip_grid() -> Vec<f64> {
    let mut u: Vec<f64> = (0..1000).map(|k| k as f64 / 1000.0).collect();
    u.extend((4..=12).map(|k| 1.0 - 10f64.powi(-k)));
    u
}

fn dist_check(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), RunError> {
    let law = cfg.law()?;
    let mut round_trip = 0.0f64;
    for u in round_trip_grid() {
        let x = law.quantile(u)?;
        round_trip = round_trip.max((law.cumulative(x) - u).abs());
    }

    let count = usize::try_from(cfg.trials)
        .map_err(|_| RunError::Usage(crate::config::UsageError::new("trials", "too large")))?;
    let mut rng = seed::substream(cfg.seed, 0);
    let draws = rc_lab_core::dist::sample_iid(&law, count, &mut rng)?;
    let k = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / k;
    let var = if draws.len() > 1 {
        draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        f64::NAN
    };
    let moments = law.moments();

    let mut von_mises = Vec::new();
    let mut limit = None;
    for e in 0..=12 {
        let x = 10f64.powi(e);
        match law.von_mises_ratio(x) {
            Ok(r) => {
                limit = Some(r);
                von_mises.push((x, Some(r)));
            }
            Err(_) => von_mises.push((x, None)),
        }
    }
    let expected_limit = match (&law, cfg.distribution) {
        (ChannelLaw::Paper(p), DistributionKind::Paper) => Some(p.tail_index()),
        _ => None,
    };

    // Falk constants at the default intermediate rank show where the
    // normalisation sits for each grid size.
    let falk: Vec<Value> = cfg
        .n_grid
        .iter()
        .filter(|&&n| n >= 2)
        .filter_map(|&n| {
            let spec = OrderStatSpec::new(n, default_rank(n).min(n - 1)).ok()?;
            let c = falk_constants(&law, spec).ok()?;
            Some(json!({ "n": n, "rank": spec.i(), "a_n": c.a_n, "b_n": c.b_n }))
        })
        .collect();

    w.json(
        "dist_check.json",
        &json!({
            "distribution": law,
            "round_trip_max_error": round_trip,
            "exact": moments.as_ref().ok(),
            "exact_error": moments.as_ref().err().map(|e| e.to_string()),
            "empirical": {
                "samples": draws.len(),
                "mean": mean,
                "variance": var,
                "mean_std_error": (var / k).sqrt(),
            },
            "von_mises": von_mises.iter().map(|(x, r)| json!({ "x": x, "ratio": r })).collect::<Vec<_>>(),
            "von_mises_limit_estimate": limit,
            "von_mises_expected_limit": expected_limit,
            "falk_constants": falk,
        }),
    )?;
    if cfg.format.csv() {
        let rows: Vec<Vec<Cell>> = von_mises
            .iter()
            .map(|&(x, r)| vec![x.into(), r.unwrap_or(f64::NAN).into()])
            .collect();
        w.csv("dist_check.csv", &["x", "von_mises_ratio"], &rows)?;
    }
    Ok(())
}
