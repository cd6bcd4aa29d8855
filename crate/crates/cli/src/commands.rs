use std::hint::black_box;
use std::time::Instant;

use rand::Rng;
use rht_core::distance::{default_m, relative_error, round_query_seed};
use rht_core::features::default_feature_blocks;
use rht_core::lab::{
    basis_max_experiment, default_t_grid, ecdf_deviation, gaussian_baseline_max, lipschitz_deviation, test_vector_suite,
};
use rht_core::rng::{fill_standard_normal, keyed_rng, StreamKind};
use rht_core::{
    fwht_in_place, naive_hadamard_apply, next_pow2, rbf_kernel, DistanceEstimator, FourierFeatureMap, QueryParams,
    RhtEnsemble, ScalarFunctional, VectorLabel,
};
use serde_json::{json, Map, Value};

use crate::config::{BenchArgs, CommandName, DistestArgs, KernelArgs, LowerboundArgs, RunConfig, VerifyArgs};
use crate::io::{read_points, Table};
use crate::CliError;

/// Experiment streams used by the CLI start here, clear of the ranges the core crate uses.
const CLI_STREAM_BASE: u64 = 1 << 48;
const POINTS_STREAM: u64 = CLI_STREAM_BASE;
const QUERIES_STREAM: u64 = CLI_STREAM_BASE + (1 << 32);
const PAIRS_STREAM: u64 = CLI_STREAM_BASE + (2 << 32);
const BENCH_STREAM: u64 = CLI_STREAM_BASE + (3 << 32);
const QUERY_SEED_STREAM: u64 = CLI_STREAM_BASE + (4 << 32);

const BENCH_MIN_D: usize = 64;

/// The resolved configuration plus the command's results.
pub struct Outcome {
    pub config: RunConfig,
    pub results: Map<String, Value>,
    pub table: Table,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn unit_vector(seed: u64, stream: u64, d: usize) -> Vec<f64> {
    unit_from(&mut keyed_rng(seed, StreamKind::Experiment, stream), d)
}

fn unit_from(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    loop {
        fill_standard_normal(rng, &mut v);
        let n = norm(&v);
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}

/// Uniform in the closed unit ball: a uniform direction with radius `U^{1/d}`.
fn ball_point(seed: u64, stream: u64, d: usize) -> Vec<f64> {
    let mut rng = keyed_rng(seed, StreamKind::Experiment, stream);
    let mut v = unit_from(&mut rng, d);
    let u: f64 = rng.random_range(0.0..1.0);
    let r = u.powf(1.0 / d as f64);
    v.iter_mut().for_each(|x| *x *= r);
    v
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// `--d` when given, else the column count of `points`, else `default`.
fn resolve_d(flag: Option<usize>, points: Option<&Vec<Vec<f64>>>, default: usize) -> Result<usize, CliError> {
    match (flag, points) {
        (Some(d), Some(p)) if p[0].len() != d => Err(CliError::Usage(format!(
            "--d {d} disagrees with the {} input columns",
            p[0].len()
        ))),
        (Some(d), _) => Ok(d),
        (None, Some(p)) => Ok(p[0].len()),
        (None, None) => Ok(default),
    }
}

/// Minimum over `reps` of the mean time per call across `iters` calls, in nanoseconds.
fn time_ns(reps: usize, iters: usize, mut f: impl FnMut()) -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..reps {
        let start = Instant::now();
        for _ in 0..iters {
            f();
        }
        best = best.min(start.elapsed().as_nanos() as f64 / iters as f64);
    }
    best
}

pub fn bench(args: &BenchArgs, seed: u64) -> Result<Outcome, CliError> {
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let config = RunConfig::new(CommandName::Bench, args.d, args.m, seed, &args.common).with_extra("reps", args.reps);
    config.validate()?;
    let top = next_pow2(args.d)?.padded();
    let mut d = BENCH_MIN_D.min(top);
    let mut per_d = Vec::new();
    let mut table = Table::new(vec!["d", "fwht_ns", "embed_ns", "naive_ns", "speedup", "max_abs_diff"]);
    while d <= top {
        let m = args.m;
        let ensemble = RhtEnsemble::new(d, m, seed)?;
        let x = unit_vector(seed, BENCH_STREAM + d.ilog2() as u64, d);
        let log = d.ilog2() as usize + 1;
        let fast_iters = ((1usize << 20) / (d * log * m)).max(1);
        let naive_iters = ((1usize << 22) / (d * d * m)).max(1);

        let mut buf = x.clone();
        let fwht_ns = time_ns(args.reps, fast_iters, || {
            buf.copy_from_slice(&x);
            fwht_in_place(black_box(&mut buf)).expect("power-of-two buffer");
        });
        let embed_ns = time_ns(args.reps, fast_iters, || {
            black_box(ensemble.embed_serial(black_box(&x)).expect("valid input"));
        });
        let naive = |out: &mut Vec<f64>| {
            out.clear();
            for diag in ensemble.diagonals() {
                let scaled: Vec<f64> = diag.iter().zip(&x).map(|(a, b)| a * b).collect();
                out.extend(naive_hadamard_apply(&scaled).expect("power-of-two buffer"));
            }
        };
        let mut naive_out = Vec::with_capacity(d * m);
        let naive_ns = time_ns(args.reps, naive_iters, || {
            naive(&mut naive_out);
            black_box(&naive_out);
        });
        let fast = ensemble.embed_serial(&x)?;
        let max_abs_diff = fast
            .values()
            .iter()
            .zip(&naive_out)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let speedup = naive_ns / embed_ns;
        table.push(vec![
            d.to_string(),
            fmt(fwht_ns),
            fmt(embed_ns),
            fmt(naive_ns),
            fmt(speedup),
            fmt(max_abs_diff),
        ]);
        per_d.push(json!({
            "d": d,
            "fwht_ns": fwht_ns,
            "embed_ns": embed_ns,
            "naive_ns": naive_ns,
            "speedup": speedup,
            "max_abs_diff": max_abs_diff,
        }));
        d *= 2;
    }
    let mut results = Map::new();
    results.insert("timings".into(), Value::Array(per_d));
    Ok(Outcome { config, results, table })
}

pub fn verify(args: &VerifyArgs, seed: u64) -> Result<Outcome, CliError> {
    let mut config =
        RunConfig::new(CommandName::Verify, args.d, args.m, seed, &args.common).with_extra("pairs", args.pairs);
    config.n = Some(args.n);
    config.eps = Some(args.eps);
    config.validate()?;
    if args.pairs == 0 {
        return Err(CliError::Usage("--pairs must be at least 1".into()));
    }
    let ensemble = RhtEnsemble::new(args.d, args.m, seed)?;
    let suite = test_vector_suite(args.d, args.n, seed)?;
    let radius = 2.0 * (1.0 / args.eps).ln().sqrt();
    let functionals = [
        ScalarFunctional::cos(),
        ScalarFunctional::abs(),
        ScalarFunctional::psi(radius)?,
    ];

    let mut table = Table::new(vec!["section", "case", "value"]);
    let mut reports = Vec::new();
    let mut max_deviation = 0.0f64;
    for f in &functionals {
        let report = lipschitz_deviation(&ensemble, f, &suite)?;
        for c in &report.per_case {
            table.push(vec![report.label.clone(), c.case_id.clone(), fmt(c.deviation)]);
        }
        max_deviation = max_deviation.max(report.max_deviation);
        reports.push(to_value(&report));
    }

    let grid = default_t_grid();
    let mut ecdf = Map::new();
    for label in [VectorLabel::Flat, VectorLabel::Basis] {
        let z = suite.get(label).expect("suite holds the structured vectors");
        let dev = ecdf_deviation(&ensemble, z, &grid)?;
        table.push(vec!["ecdf".into(), label.case_id(), fmt(dev)]);
        ecdf.insert(label.case_id(), json!(dev));
    }

    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..args.pairs as u64)
        .map(|i| {
            (
                unit_vector(seed, PAIRS_STREAM + 2 * i, args.d),
                unit_vector(seed, PAIRS_STREAM + 2 * i + 1, args.d),
            )
        })
        .collect();
    let distortion = ensemble.distortion_check(&pairs)?;
    table.push(vec!["distortion".into(), "max".into(), fmt(distortion)]);

    let mut results = Map::new();
    results.insert("max_deviation".into(), json!(max_deviation));
    results.insert("psi_radius".into(), json!(radius));
    results.insert("lipschitz".into(), Value::Array(reports));
    results.insert("ecdf".into(), Value::Object(ecdf));
    results.insert("distortion".into(), json!(distortion));
    Ok(Outcome { config, results, table })
}

pub fn kernel(args: &KernelArgs, seed: u64) -> Result<Outcome, CliError> {
    if !(args.bandwidth.is_finite() && args.bandwidth > 0.0) {
        return Err(CliError::Usage("--bandwidth must be positive and finite".into()));
    }
    let input = args.input.as_deref().map(read_points).transpose()?;
    let d = resolve_d(args.d, input.as_ref(), 64)?;
    let raw = match input {
        Some(p) => p,
        None => (0..args.n as u64)
            .map(|i| ball_point(seed, POINTS_STREAM + i, d))
            .collect(),
    };
    if raw.len() < 2 {
        return Err(CliError::Usage("the kernel sweep needs at least two points".into()));
    }
    let points: Vec<Vec<f64>> = raw
        .iter()
        .map(|p| p.iter().map(|v| v / args.bandwidth).collect())
        .collect();
    let mut diameter = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            diameter = diameter.max(distance(p, q));
        }
    }
    let m = match args.m {
        Some(m) => m,
        None => default_feature_blocks(args.eps, args.delta, diameter)?,
    };
    let mut config =
        RunConfig::new(CommandName::Kernel, d, m, seed, &args.common).with_extra("bandwidth", args.bandwidth);
    config.n = Some(points.len());
    config.eps = Some(args.eps);
    config.delta = Some(args.delta);
    config.input_path = args.input.clone();
    config.validate()?;

    let map = FourierFeatureMap::new(RhtEnsemble::new(d, m, seed)?, seed);
    let sweep = map.kernel_error_sweep(&points)?;
    let features = points.iter().map(|p| map.features(p)).collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(vec!["i", "j", "kernel", "approx", "error", "sum_term", "diff_term"]);
    let (mut gap, mut sum_max, mut diff_err) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let exact = rbf_kernel(&points[i], &points[j])?;
            let approx: f64 = features[i].iter().zip(&features[j]).map(|(a, b)| a * b).sum();
            let dec = map.kerdec_decompose(&points[i], &points[j])?;
            gap = gap.max((dec.sum_term + dec.diff_term - approx).abs());
            sum_max = sum_max.max(dec.sum_term.abs());
            diff_err = diff_err.max((dec.diff_term - exact).abs());
            table.push(vec![
                i.to_string(),
                j.to_string(),
                fmt(exact),
                fmt(approx),
                fmt((approx - exact).abs()),
                fmt(dec.sum_term),
                fmt(dec.diff_term),
            ]);
        }
    }

    let mut results = Map::new();
    results.insert("max_error".into(), json!(sweep.max_deviation));
    results.insert("diameter".into(), json!(diameter));
    results.insert(
        "kerdec".into(),
        json!({
            "max_identity_gap": gap,
            "max_abs_sum_term": sum_max,
            "max_diff_term_error": diff_err,
        }),
    );
    results.insert("sweep".into(), to_value(&sweep));
    Ok(Outcome { config, results, table })
}

pub fn distest(args: &DistestArgs, seed: u64) -> Result<Outcome, CliError> {
    let input = args.input.as_deref().map(read_points).transpose()?;
    let d = resolve_d(args.d, input.as_ref(), 128)?;
    let points = match input {
        Some(p) => p,
        None => (0..args.n as u64)
            .map(|i| unit_vector(seed, POINTS_STREAM + i, d))
            .collect(),
    };
    let queries = match args.query.as_deref() {
        Some(path) => read_points(path)?,
        None => (0..args.queries as u64)
            .map(|i| unit_vector(seed, QUERIES_STREAM + i, d))
            .collect(),
    };
    let m = match args.m {
        Some(m) => m,
        None => default_m(args.eps, args.delta, d)?,
    };
    let mut params = QueryParams::new(args.eps, args.delta, seed)?;
    if let Some(k) = args.k {
        params = params.with_k(k);
    }
    let k = params.resolved_k(points.len())?;

    let mut config = RunConfig::new(CommandName::Distest, d, m, seed, &args.common)
        .with_extra("queries", queries.len())
        .with_extra("rounds", args.rounds)
        .with_extra("adversary", rht_core::Adversary::from(args.adversary).name());
    config.k = Some(k);
    config.n = Some(points.len());
    config.eps = Some(args.eps);
    config.delta = Some(args.delta);
    config.input_path = args.input.clone();
    config.query_path = args.query.clone();
    config.validate()?;

    let mut estimator = DistanceEstimator::new(d, m, seed)?;
    estimator.extend(&points)?;
    let query_seed: u64 = keyed_rng(seed, StreamKind::Experiment, QUERY_SEED_STREAM).random();

    let mut table = Table::new(vec!["query_index", "point_index", "estimate", "exact"]);
    let mut per_query = Vec::with_capacity(queries.len());
    let mut max_rel = 0.0f64;
    for (qi, q) in queries.iter().enumerate() {
        let qp = params.with_seed(round_query_seed(query_seed, qi));
        let details = estimator.query_detailed(q, &qp)?;
        let mut rows = Vec::with_capacity(details.len());
        for (pi, (det, x)) in details.iter().zip(&points).enumerate() {
            let exact = distance(q, x);
            let rel = relative_error(det.estimate, exact);
            max_rel = max_rel.max(rel);
            table.push(vec![qi.to_string(), pi.to_string(), fmt(det.estimate), fmt(exact)]);
            rows.push(json!({
                "point_index": pi,
                "estimate": det.estimate,
                "exact": exact,
                "relative_error": rel,
                "quantile": det.quantile,
                "radius": det.radius,
            }));
        }
        per_query.push(json!({ "query_index": qi, "estimates": rows }));
    }

    let mut results = Map::new();
    results.insert("max_relative_error".into(), json!(max_rel));
    results.insert("queries".into(), Value::Array(per_query));
    if args.rounds > 0 {
        let stress = estimator.adaptive_stress(&points, args.rounds, args.adversary.into(), &params, seed)?;
        results.insert("stress".into(), to_value(&stress));
    }
    Ok(Outcome { config, results, table })
}

pub fn lowerbound(args: &LowerboundArgs, seed: u64) -> Result<Outcome, CliError> {
    if args.d.is_empty() || args.trials == 0 {
        return Err(CliError::Usage(
            "--d needs at least one value and --trials at least 1".into(),
        ));
    }
    let n = ((args.baseline_d as f64) / (4.0 * args.eps * args.eps)).ceil() as usize;
    let mut config = RunConfig::new(
        CommandName::Lowerbound,
        *args.d.iter().max().expect("nonempty"),
        args.m,
        seed,
        &args.common,
    )
    .with_extra("dims", args.d.clone())
    .with_extra("trials", args.trials)
    .with_extra("baseline_d", args.baseline_d);
    config.eps = Some(args.eps);
    config.n = Some(n);
    config.validate()?;
    if args.d.contains(&0) || args.baseline_d == 0 {
        return Err(CliError::Usage("dimensions must be at least 1".into()));
    }

    let mut table = Table::new(vec!["experiment", "d", "m_or_n", "median", "mean", "reference"]);
    let mut basis = Vec::new();
    for &d in &args.d {
        let stats = basis_max_experiment(d, args.m, args.trials, seed)?;
        let reference = (2.0 * (d as f64).ln() / args.m as f64).sqrt();
        table.push(vec![
            "basis_max".into(),
            d.to_string(),
            args.m.to_string(),
            fmt(stats.median),
            fmt(stats.mean),
            fmt(reference),
        ]);
        let mut v = to_value(&stats);
        v["reference"] = json!(reference);
        v["median_over_reference"] = json!(stats.median / reference);
        basis.push(v);
    }
    let baseline = gaussian_baseline_max(n, args.baseline_d, args.trials, seed)?;
    let fraction = baseline.fraction_at_least(args.eps);
    table.push(vec![
        "gaussian_baseline_max".into(),
        args.baseline_d.to_string(),
        n.to_string(),
        fmt(baseline.median),
        fmt(baseline.mean),
        fmt(args.eps),
    ]);
    let mut baseline_v = to_value(&baseline);
    baseline_v["fraction_at_least_eps"] = json!(fraction);

    let mut results = Map::new();
    results.insert("basis_max".into(), Value::Array(basis));
    results.insert("gaussian_baseline".into(), baseline_v);
    Ok(Outcome { config, results, table })
}
