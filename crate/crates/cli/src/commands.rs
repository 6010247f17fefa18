use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;
use lsnm::bench::ingest::{read_pair_file, SkippedPair};
use lsnm::bench::{
    corpus, ingest_pairs, run_benchmark, run_estimator_bench, BenchmarkConfig, EstimatorBenchConfig,
    REPORT_SCHEMA_VERSION,
};
use lsnm::features::standardize;
use lsnm::inference::{self, fit_direction, InferenceConfig, Method};
use serde::Serialize;
use serde_json::json;

use crate::args::{
    BenchmarkArgs, EstimatorBenchArgs, FitArgs, GlobalArgs, HsicArgs, InferArgs, ModelArgs, SimulateArgs,
};

fn inference_config(global: &GlobalArgs, model: &ModelArgs, hsic: &HsicArgs) -> InferenceConfig {
    let mut cfg = InferenceConfig { seed: global.seed, ..Default::default() };
    if let Some(v) = model.order {
        cfg.spline.order = v;
    }
    if let Some(v) = model.knots {
        cfg.spline.n_knots = v;
    }
    if let Some(v) = model.delta {
        cfg.concave.delta = v;
    }
    if let Some(v) = model.outer_iters {
        cfg.concave.max_outer_iters = v;
    }
    if let Some(v) = model.tol {
        cfg.concave.loglik_tol = v;
    }
    if let Some(v) = model.hidden {
        cfg.mlp.hidden_width = v;
    }
    if let Some(v) = model.activation {
        cfg.mlp.activation = v.into();
    }
    if let Some(v) = model.steps {
        cfg.mlp.steps = v;
    }
    if let Some(v) = model.lr {
        cfg.mlp.lr_init = v;
    }
    if let Some(v) = model.lr_final {
        cfg.mlp.lr_final = v;
    }
    if let Some(v) = hsic.hsic_method {
        cfg.hsic.method = v.into();
    }
    if let Some(v) = hsic.n_perms {
        cfg.hsic.n_perms = v;
    }
    cfg.hsic.sample_split = hsic.sample_split;
    cfg
}

fn validate(method: Method, hsic: &HsicArgs, model: &ModelArgs) -> Result<()> {
    if method != Method::LociH && hsic.any_set() {
        bail!("--hsic-method, --n-perms and --sample-split only apply to --method loci_h");
    }
    if hsic.n_perms == Some(0) {
        bail!("--n-perms must be at least 1");
    }
    if model.order == Some(0) {
        bail!("--order must be at least 1");
    }
    if matches!(model.knots, Some(k) if k < 2) {
        bail!("--knots must be at least 2");
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn fit(global: &GlobalArgs, args: &FitArgs) -> Result<()> {
    validate(Method::LociM, &HsicArgs::default(), &args.model)?;
    let cfg = inference_config(global, &args.model, &HsicArgs::default());
    let pair = read_pair_file(&args.input)?;
    let pair = if args.reverse { pair.swapped() } else { pair };
    let (std_pair, st) = standardize(&pair)?;
    let fit = fit_direction(&std_pair.x, &std_pair.y, args.estimator, &cfg)?;
    let mu_hat: Vec<f64> = fit.mu_hat.iter().map(|m| st.mean_y + st.std_y * m).collect();
    let sigma_hat: Vec<f64> = fit.sigma_hat.iter().map(|s| st.std_y * s).collect();
    let summary = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "fit",
        "input": args.input.display().to_string(),
        "estimator": args.estimator,
        "conditional": if args.reverse { "x_given_y" } else { "y_given_x" },
        "n_points": pair.len(),
        "standardizer": st,
        "mean_loglik_standardized": fit.mean_loglik(),
        "converged": fit.converged,
        "iters": fit.iters,
        "mu_hat": mu_hat,
        "sigma_hat": sigma_hat,
        "model": fit.predictor,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(out) = &args.output {
        write_json(out, &summary)?;
    }
    Ok(())
}

/// Returns whether a direction was decided.
pub fn infer(global: &GlobalArgs, args: &InferArgs) -> Result<bool> {
    validate(args.method, &args.hsic, &args.model)?;
    let cfg = inference_config(global, &args.model, &args.hsic);
    let pair = read_pair_file(&args.input)?;
    let verdict = inference::infer(&pair, args.method, args.estimator, &cfg)?;
    let record = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "verdict",
        "input": args.input.display().to_string(),
        "verdict": verdict,
    });
    println!("{}", serde_json::to_string_pretty(&record)?);
    if let Some(out) = &args.output {
        write_json(out, &record)?;
    }
    Ok(verdict.is_decided())
}

pub fn simulate(global: &GlobalArgs, args: &SimulateArgs) -> Result<()> {
    let pairs = corpus(args.family, args.n_pairs, args.n_points, global.seed, !args.no_randomize)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut labels = String::from("pair_id,direction\n");
    for lp in &pairs {
        let mut text = String::from("x,y\n");
        for (x, y) in lp.pair.x.iter().zip(&lp.pair.y) {
            text.push_str(&format!("{x},{y}\n"));
        }
        let path = args.out_dir.join(format!("{}.csv", lp.pair_id));
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        let tag = serde_json::to_value(lp.true_direction)?;
        labels.push_str(&format!("{},{}\n", lp.pair_id, tag.as_str().unwrap_or_default()));
    }
    fs::write(args.out_dir.join("labels.csv"), labels)?;
    println!("wrote {} {} pairs to {}", pairs.len(), args.family, args.out_dir.display());
    Ok(())
}

pub fn benchmark(global: &GlobalArgs, args: &BenchmarkArgs) -> Result<()> {
    validate(args.method, &args.hsic, &args.model)?;
    let cfg = BenchmarkConfig {
        methods: vec![args.method],
        estimator: args.estimator,
        inference: inference_config(global, &args.model, &args.hsic),
        workers: global.workers,
        weighted_accuracy: args.weighted_accuracy,
    };
    let ingested = ingest_pairs(&args.corpus, args.format)?;
    info!("{} pairs, {} skipped, {} unreadable", ingested.pairs.len(), ingested.skipped.len(), ingested.errors.len());
    let mut report = run_benchmark(&ingested.pairs, &cfg)?.remove(0);
    report.skipped = ingested
        .skipped
        .into_iter()
        .chain(ingested.errors.into_iter().map(|e| SkippedPair { reason: format!("error: {}", e.reason), ..e }))
        .collect();
    write_json(&args.output, &report)?;
    if let Some(csv) = &args.curve_csv {
        fs::write(csv, report.decision_rate_csv()).with_context(|| format!("writing {}", csv.display()))?;
    }
    let m = &report.metrics;
    println!(
        "{} + {}: accuracy {:.4}  audrc {:.4}  decided {}/{}  report {}",
        args.method,
        args.estimator,
        m.accuracy,
        m.audrc,
        m.n_decided,
        m.n_pairs,
        args.output.display()
    );
    Ok(())
}

pub fn estimator_bench(global: &GlobalArgs, args: &EstimatorBenchArgs) -> Result<()> {
    let cfg = EstimatorBenchConfig {
        sizes: args.sizes.clone(),
        knot_rules: args.knot_rules.iter().map(|&r| r.into()).collect(),
        seeds: args.seeds,
        n_grid: args.n_grid,
        order: args.order,
        orientation: args.kl_orientation.into(),
        seed: global.seed,
        workers: global.workers,
        ..Default::default()
    };
    let report = run_estimator_bench(&cfg)?;
    write_json(&args.output, &report)?;
    println!("{:>7} {:>6} {:>7} {:>14} {:>14}", "T", "rule", "knots", "concave_kl", "ifgls_kl");
    for c in &report.cells {
        let rule = serde_json::to_value(c.knot_rule)?;
        println!(
            "{:>7} {:>6} {:>7} {:>14.6} {:>14.6}",
            c.t,
            rule.as_str().unwrap_or_default(),
            c.n_knots,
            c.concave_median_kl,
            c.ifgls_median_kl
        );
    }
    Ok(())
}
