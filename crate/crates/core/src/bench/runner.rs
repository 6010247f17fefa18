//! Corpus benchmarks and the estimator comparison sweep, with JSON reports.

use std::collections::BTreeMap;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generators::{generate, sinusoid_truth, Family, GeneratorSpec};
use super::ingest::SkippedPair;
use super::metrics::{audrc, grid_kl, weighted_accuracy, KlOrientation, VerdictRecord};
use super::LabeledPair;
use crate::concave::{fit_concave, ConcaveFitConfig};
use crate::error::{Error, Result};
use crate::features::{build_spline_map, count_distinct, standardize};
use crate::fit::FittedLSNM;
use crate::ifgls::{fit_ifgls, IFGLSConfig};
use crate::inference::{infer_methods, Direction, DirectionVerdict, Estimator, InferenceConfig, Method};
use crate::model::MeanVarParams;
use crate::seed::mix;

/// Bumped on any breaking change to the report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(job))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub estimator: Estimator,
    pub inference: InferenceConfig,
    /// Worker threads; 0 picks the number of CPUs.
    pub workers: usize,
    /// Also report accuracy weighted by the corpus metadata weights.
    pub weighted_accuracy: bool,
}

impl BenchmarkConfig {
    pub fn new(method: Method, estimator: Estimator) -> Self {
        Self { methods: vec![method], estimator, inference: InferenceConfig::default(), workers: 1, weighted_accuracy: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair_id: String,
    pub dataset: String,
    pub true_direction: Direction,
    pub verdict: DirectionVerdict,
    pub correct: bool,
    /// Wall time for both directional fits, shared between methods.
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub dataset: String,
    pub n_pairs: usize,
    pub n_decided: usize,
    pub accuracy: f64,
    pub audrc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetrics {
    pub n_pairs: usize,
    pub n_decided: usize,
    /// Mean over datasets, each dataset weighted equally.
    pub accuracy: f64,
    /// Mean over datasets, each dataset weighted equally.
    pub audrc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted_accuracy: Option<f64>,
    pub per_dataset: Vec<DatasetMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub kind: String,
    pub created_unix_s: u64,
    pub method: Method,
    pub estimator: Estimator,
    pub config: BenchmarkConfig,
    pub metrics: CorpusMetrics,
    pub records: Vec<PairRecord>,
    #[serde(default)]
    pub skipped: Vec<SkippedPair>,
}

impl BenchmarkReport {
    /// The report with wall-clock fields zeroed, for byte comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.created_unix_s = 0;
        r.records.iter_mut().for_each(|p| p.runtime_ms = 0.0);
        r
    }

    /// Decision-rate curve of the whole corpus as CSV.
    pub fn decision_rate_csv(&self) -> String {
        audrc(&self.verdict_records()).to_csv()
    }

    fn verdict_records(&self) -> Vec<VerdictRecord> {
        self.records
            .iter()
            .map(|r| VerdictRecord { pair_id: r.pair_id.clone(), certainty: r.verdict.certainty, correct: r.correct })
            .collect()
    }
}

fn corpus_metrics(records: &[PairRecord], weights: Option<&[f64]>) -> CorpusMetrics {
    let mut by_dataset: BTreeMap<&str, Vec<VerdictRecord>> = BTreeMap::new();
    for r in records {
        by_dataset.entry(r.dataset.as_str()).or_default().push(VerdictRecord {
            pair_id: r.pair_id.clone(),
            certainty: r.verdict.certainty,
            correct: r.correct,
        });
    }
    let per_dataset: Vec<DatasetMetrics> = by_dataset
        .into_iter()
        .map(|(name, recs)| {
            let curve = audrc(&recs);
            DatasetMetrics {
                dataset: name.to_string(),
                n_pairs: recs.len(),
                n_decided: records.iter().filter(|r| r.dataset == name && r.verdict.is_decided()).count(),
                accuracy: curve.accuracy,
                audrc: curve.audrc,
            }
        })
        .collect();
    let k = per_dataset.len().max(1) as f64;
    let all: Vec<VerdictRecord> = records
        .iter()
        .map(|r| VerdictRecord { pair_id: r.pair_id.clone(), certainty: r.verdict.certainty, correct: r.correct })
        .collect();
    CorpusMetrics {
        n_pairs: records.len(),
        n_decided: records.iter().filter(|r| r.verdict.is_decided()).count(),
        accuracy: per_dataset.iter().map(|d| d.accuracy).sum::<f64>() / k,
        audrc: per_dataset.iter().map(|d| d.audrc).sum::<f64>() / k,
        weighted_accuracy: weights.map(|w| weighted_accuracy(&all, w)),
        per_dataset,
    }
}

/// Verdicts for every pair and method; one report per method.
///
/// Both directional fits are shared between the requested methods. A pair
/// whose input is unusable is recorded as undecided.
pub fn run_benchmark(corpus: &[LabeledPair], cfg: &BenchmarkConfig) -> Result<Vec<BenchmarkReport>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("benchmark corpus has no pairs".into()));
    }
    if cfg.methods.is_empty() {
        return Err(Error::Config("no decision method requested".into()));
    }
    let per_pair: Vec<(Vec<DirectionVerdict>, f64)> = with_pool(cfg.workers, || {
        corpus
            .par_iter()
            .map(|lp| {
                let start = Instant::now();
                let verdicts = infer_methods(&lp.pair, &cfg.methods, cfg.estimator, &cfg.inference).unwrap_or_else(|e| {
                    warn!("pair {}: {e}", lp.pair_id);
                    cfg.methods
                        .iter()
                        .map(|&m| DirectionVerdict {
                            direction: Direction::Undecided,
                            score_xy: f64::NAN,
                            score_yx: f64::NAN,
                            certainty: 0.0,
                            method: m,
                            estimator: cfg.estimator,
                            diagnostic: Some(e.to_string()),
                        })
                        .collect()
                });
                (verdicts, start.elapsed().as_secs_f64() * 1e3)
            })
            .collect()
    })?;

    let created = unix_now();
    let weights: Vec<f64> = corpus.iter().map(|p| p.weight).collect();
    Ok(cfg
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let records: Vec<PairRecord> = corpus
                .iter()
                .zip(&per_pair)
                .map(|(lp, (verdicts, ms))| {
                    let v = verdicts[k].clone();
                    PairRecord {
                        pair_id: lp.pair_id.clone(),
                        dataset: lp.dataset.clone(),
                        true_direction: lp.true_direction,
                        correct: v.is_decided() && v.direction == lp.true_direction,
                        verdict: v,
                        runtime_ms: *ms,
                    }
                })
                .collect();
            BenchmarkReport {
                schema_version: REPORT_SCHEMA_VERSION,
                kind: "benchmark".into(),
                created_unix_s: created,
                method,
                estimator: cfg.estimator,
                config: cfg.clone(),
                metrics: corpus_metrics(&records, cfg.weighted_accuracy.then_some(weights.as_slice())),
                records,
                skipped: Vec::new(),
            }
        })
        .collect())
}

/// How the number of spline knots grows with the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnotRule {
    /// `round(√T)`
    Sqrt,
    /// `T / 10`
    Tenth,
}

impl KnotRule {
    pub fn knots(self, t: usize) -> usize {
        let k = match self {
            KnotRule::Sqrt => (t as f64).sqrt().round() as usize,
            KnotRule::Tenth => t / 10,
        };
        k.max(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorBenchConfig {
    pub sizes: Vec<usize>,
    pub knot_rules: Vec<KnotRule>,
    /// Repetitions per cell.
    pub seeds: usize,
    pub n_grid: usize,
    /// Spline polynomial degree.
    pub order: usize,
    pub concave: ConcaveFitConfig,
    pub ifgls: IFGLSConfig,
    pub orientation: KlOrientation,
    pub seed: u64,
    pub workers: usize,
}

impl Default for EstimatorBenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![100, 1000, 10_000],
            knot_rules: vec![KnotRule::Sqrt, KnotRule::Tenth],
            seeds: 20,
            n_grid: 10_000,
            order: 5,
            concave: ConcaveFitConfig::default(),
            ifgls: IFGLSConfig::default(),
            orientation: KlOrientation::TrueToEstimate,
            seed: 0,
            workers: 1,
        }
    }
}

fn inf_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorCell {
    pub t: usize,
    pub knot_rule: KnotRule,
    pub n_knots: usize,
    /// `null` in JSON when half the seeds or more failed.
    #[serde(deserialize_with = "inf_if_null")]
    pub concave_median_kl: f64,
    #[serde(deserialize_with = "inf_if_null")]
    pub ifgls_median_kl: f64,
    /// Per-seed grid KL; `null` where the fit failed or diverged.
    pub concave_kl: Vec<Option<f64>>,
    pub ifgls_kl: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorBenchReport {
    pub schema_version: u32,
    pub kind: String,
    pub created_unix_s: u64,
    pub config: EstimatorBenchConfig,
    pub cells: Vec<EstimatorCell>,
}

impl EstimatorBenchReport {
    pub fn without_timing(&self) -> Self {
        Self { created_unix_s: 0, ..self.clone() }
    }
}

/// Median with failures counted as `+∞`.
pub fn median_kl(values: &[Option<f64>]) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|x| x.unwrap_or(f64::INFINITY)).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else if v[n / 2 - 1].is_infinite() || v[n / 2].is_infinite() {
        f64::INFINITY
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Grid KL of a fit made on standardized data, evaluated on the raw scale.
fn fit_kl(fit: &FittedLSNM, st: &crate::features::Standardizer, cfg: &EstimatorBenchConfig) -> Option<f64> {
    let (lo, hi) = (-4.0 * std::f64::consts::PI, 4.0 * std::f64::consts::PI);
    let predict = |xs: &[f64]| {
        let xs_std: Vec<f64> = xs.iter().map(|x| (x - st.mean_x) / st.std_x).collect();
        fit.predictor
            .predict(&xs_std)
            .into_iter()
            .map(|p| MeanVarParams::floored(st.mean_y + st.std_y * p.mu(), st.std_y * st.std_y * p.var()))
            .collect::<Vec<_>>()
    };
    let g = grid_kl(predict, sinusoid_truth, lo, hi, cfg.n_grid, cfg.orientation);
    g.value.is_finite().then_some(g.value)
}

/// Concave-estimator and IFGLS grid KL on one sinusoid sample.
pub fn estimator_cell_run(t: usize, rule: KnotRule, seed: u64, cfg: &EstimatorBenchConfig) -> Result<(Option<f64>, Option<f64>)> {
    let lp = generate(&GeneratorSpec::new(Family::AppendixDSinusoid, t, seed))?;
    let (std_pair, st) = standardize(&lp.pair)?;
    let knots = rule.knots(t).min(count_distinct(&std_pair.x));
    let map = build_spline_map(&std_pair.x, cfg.order, knots)?;
    let concave = fit_concave(&std_pair, &map, &map, &cfg.concave).ok().and_then(|f| fit_kl(&f, &st, cfg));
    let ifgls = fit_ifgls(&std_pair, &map, &map, &cfg.ifgls).ok().and_then(|f| fit_kl(&f, &st, cfg));
    Ok((concave, ifgls))
}

/// Sweep sample sizes and knot rules on the sinusoid benchmark.
pub fn run_estimator_bench(cfg: &EstimatorBenchConfig) -> Result<EstimatorBenchReport> {
    if cfg.sizes.is_empty() || cfg.knot_rules.is_empty() || cfg.seeds == 0 {
        return Err(Error::Config("estimator benchmark needs sizes, knot rules and at least one seed".into()));
    }
    if cfg.n_grid < 2 {
        return Err(Error::Config("n_grid must be at least 2".into()));
    }
    let jobs: Vec<(usize, KnotRule, usize)> = cfg
        .sizes
        .iter()
        .flat_map(|&t| cfg.knot_rules.iter().flat_map(move |&r| (0..cfg.seeds).map(move |s| (t, r, s))))
        .collect();
    let results: Vec<Result<(Option<f64>, Option<f64>)>> = with_pool(cfg.workers, || {
        jobs.par_iter()
            .map(|&(t, rule, s)| estimator_cell_run(t, rule, mix(mix(cfg.seed, t as u64), s as u64), cfg))
            .collect()
    })?;
    let mut cells = Vec::new();
    let mut it = results.into_iter();
    for &t in &cfg.sizes {
        for &rule in &cfg.knot_rules {
            let (mut c, mut i) = (Vec::with_capacity(cfg.seeds), Vec::with_capacity(cfg.seeds));
            for _ in 0..cfg.seeds {
                let (a, b) = it.next().expect("one result per job")?;
                c.push(a);
                i.push(b);
            }
            cells.push(EstimatorCell {
                t,
                knot_rule: rule,
                n_knots: rule.knots(t),
                concave_median_kl: median_kl(&c),
                ifgls_median_kl: median_kl(&i),
                concave_kl: c,
                ifgls_kl: i,
            });
        }
    }
    Ok(EstimatorBenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: "estimator_bench".into(),
        created_unix_s: unix_now(),
        config: cfg.clone(),
        cells,
    })
}
