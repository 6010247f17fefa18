//! Direction decisions between two variables from fitted location-scale models.
//!
//! Both variables are standardized, a model is fitted in each direction with
//! identical settings, and the directions are compared either by mean
//! conditional log-likelihood ([`Method::LociM`]) or by the HSIC p-value of
//! cause versus standardized residual ([`Method::LociH`]).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::concave::{fit_concave, ConcaveFitConfig};
use crate::data::SamplePair;
use crate::error::{Error, Result};
use crate::features::{build_spline_map, count_distinct, standardize};
use crate::fit::FittedLSNM;
use crate::ifgls::{fit_homoscedastic, fit_ifgls, IFGLSConfig};
use crate::independence::{hsic_pvalue, residuals, HsicMethod};
use crate::mlp::{fit_mlp_with_head, MlpConfig, MlpHead};
use crate::seed::{hash_f64s, mix};

/// Fewer points than this are refused.
pub const MIN_SAMPLES: usize = 20;

/// Score differences at or below this are ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    XToY,
    YToX,
    Undecided,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::XToY => Direction::YToX,
            Direction::YToX => Direction::XToY,
            Direction::Undecided => Direction::Undecided,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LociM,
    LociH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    SplineConcave,
    Mlp,
    Ifgls,
    AnmSpline,
    AnmMlp,
}

macro_rules! tag_strings {
    ($ty:ty, $what:literal, $($variant:path => $tag:literal),+ $(,)?) => {
        impl $ty {
            pub const TAGS: &'static [&'static str] = &[$($tag),+];

            pub fn tag(self) -> &'static str {
                match self {
                    $($variant => $tag),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.tag())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($tag => Ok($variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} '{}'; valid: {}",
                        $what,
                        other,
                        Self::TAGS.join(", ")
                    ))),
                }
            }
        }
    };
}

tag_strings!(Direction, "direction",
    Direction::XToY => "x_to_y",
    Direction::YToX => "y_to_x",
    Direction::Undecided => "undecided",
);
tag_strings!(Method, "method",
    Method::LociM => "loci_m",
    Method::LociH => "loci_h",
);
tag_strings!(Estimator, "estimator",
    Estimator::SplineConcave => "spline_concave",
    Estimator::Mlp => "mlp",
    Estimator::Ifgls => "ifgls",
    Estimator::AnmSpline => "anm_spline",
    Estimator::AnmMlp => "anm_mlp",
);

impl Estimator {
    /// The fixed-variance counterpart with the same mean model.
    pub fn anm_counterpart(self) -> Result<Self> {
        match self {
            Estimator::SplineConcave | Estimator::AnmSpline => Ok(Estimator::AnmSpline),
            Estimator::Mlp | Estimator::AnmMlp => Ok(Estimator::AnmMlp),
            Estimator::Ifgls => Err(Error::Config("ifgls has no additive-noise counterpart".into())),
        }
    }

    fn seed_tag(self) -> u64 {
        match self {
            Estimator::SplineConcave => 1,
            Estimator::Mlp => 2,
            Estimator::Ifgls => 3,
            Estimator::AnmSpline => 4,
            Estimator::AnmMlp => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplineSettings {
    /// Polynomial degree of each spline piece.
    pub order: usize,
    pub n_knots: usize,
}

impl Default for SplineSettings {
    fn default() -> Self {
        Self { order: 5, n_knots: 25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsicSettings {
    pub method: HsicMethod,
    pub n_perms: usize,
    /// Fit on the first half, test on the second.
    pub sample_split: bool,
}

impl Default for HsicSettings {
    fn default() -> Self {
        Self { method: HsicMethod::Gamma, n_perms: 500, sample_split: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct InferenceConfig {
    pub spline: SplineSettings,
    pub concave: ConcaveFitConfig,
    pub mlp: MlpConfig,
    pub ifgls: IFGLSConfig,
    pub hsic: HsicSettings,
    /// Master seed; per-direction seeds are derived from it.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionVerdict {
    pub direction: Direction,
    /// `null` in JSON when the fit failed.
    #[serde(deserialize_with = "nan_if_null")]
    pub score_xy: f64,
    #[serde(deserialize_with = "nan_if_null")]
    pub score_yx: f64,
    pub certainty: f64,
    pub method: Method,
    pub estimator: Estimator,
    /// Why no decision was reached, when an estimator or test failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl DirectionVerdict {
    fn from_scores(score_xy: f64, score_yx: f64, method: Method, estimator: Estimator) -> Self {
        let diff = score_xy - score_yx;
        let direction = if !diff.is_finite() || diff.abs() <= TIE_TOLERANCE {
            Direction::Undecided
        } else if diff > 0.0 {
            Direction::XToY
        } else {
            Direction::YToX
        };
        let certainty = if diff.is_finite() { diff.abs() } else { 0.0 };
        Self { direction, score_xy, score_yx, certainty, method, estimator, diagnostic: None }
    }

    fn failed(method: Method, estimator: Estimator, diagnostic: String) -> Self {
        Self {
            direction: Direction::Undecided,
            score_xy: f64::NAN,
            score_yx: f64::NAN,
            certainty: 0.0,
            method,
            estimator,
            diagnostic: Some(diagnostic),
        }
    }

    /// The verdict for the pair with `x` and `y` exchanged.
    pub fn mirrored(&self) -> Self {
        Self {
            direction: self.direction.flipped(),
            score_xy: self.score_yx,
            score_yx: self.score_xy,
            ..self.clone()
        }
    }

    pub fn is_decided(&self) -> bool {
        self.direction != Direction::Undecided
    }
}

/// Seed for a fit that depends only on the master seed, the estimator and
/// the role-ordered data, so exchanging the roles exchanges the seeds.
fn direction_seed(master: u64, estimator: Estimator, cause: &[f64], effect: &[f64]) -> u64 {
    mix(mix(master, estimator.seed_tag()), mix(hash_f64s(cause), hash_f64s(effect)))
}

/// Fit `effect | cause` with the given estimator on already standardized data.
pub fn fit_direction(
    cause: &[f64],
    effect: &[f64],
    estimator: Estimator,
    cfg: &InferenceConfig,
) -> Result<FittedLSNM> {
    let pair = SamplePair::new(cause.to_vec(), effect.to_vec())?;
    let spline = || {
        let knots = cfg.spline.n_knots.min(count_distinct(cause));
        build_spline_map(cause, cfg.spline.order, knots)
    };
    match estimator {
        Estimator::SplineConcave => {
            let map = spline()?;
            fit_concave(&pair, &map, &map, &cfg.concave)
        }
        Estimator::Ifgls => {
            let map = spline()?;
            fit_ifgls(&pair, &map, &map, &cfg.ifgls)
        }
        Estimator::AnmSpline => fit_homoscedastic(&pair, &spline()?, cfg.concave.delta),
        Estimator::Mlp | Estimator::AnmMlp => {
            let head = if estimator == Estimator::Mlp { MlpHead::Heteroscedastic } else { MlpHead::Homoscedastic };
            let mlp = MlpConfig { seed: direction_seed(cfg.seed, estimator, cause, effect), ..cfg.mlp };
            fit_mlp_with_head(&pair, &mlp, head)
        }
    }
}

fn prepare(pair: &SamplePair) -> Result<SamplePair> {
    if pair.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { got: pair.len(), required: MIN_SAMPLES });
    }
    Ok(standardize(pair)?.0)
}

/// HSIC p-value of cause versus standardized residual; the flag reports a
/// degenerate test.
fn independence_score(
    cause: &[f64],
    effect: &[f64],
    fit: Option<&FittedLSNM>,
    estimator: Estimator,
    cfg: &InferenceConfig,
) -> Result<(f64, bool)> {
    let hs = &cfg.hsic;
    let (test_cause, resid) = match fit {
        Some(fit) if !hs.sample_split => {
            let pair = SamplePair { x: cause.to_vec(), y: effect.to_vec() };
            (cause.to_vec(), residuals(fit, &pair)?)
        }
        _ => {
            let half = cause.len() / 2;
            let fit = fit_direction(&cause[..half], &effect[..half], estimator, cfg)?;
            let held_x = &cause[half..];
            let pred = fit.predictor.predict(held_x);
            let r: Vec<f64> = effect[half..].iter().zip(&pred).map(|(y, p)| (y - p.mu()) / p.sd()).collect();
            (held_x.to_vec(), r)
        }
    };
    let seed = mix(direction_seed(cfg.seed, estimator, cause, effect), 0x4853_4943);
    let res = hsic_pvalue(&test_cause, &resid, hs.method, hs.n_perms, seed)?;
    Ok((res.p_value, res.degenerate))
}

fn method_verdict(
    std_pair: &SamplePair,
    fits: &(FittedLSNM, FittedLSNM),
    method: Method,
    estimator: Estimator,
    cfg: &InferenceConfig,
) -> DirectionVerdict {
    match method {
        Method::LociM => DirectionVerdict::from_scores(fits.0.mean_loglik(), fits.1.mean_loglik(), method, estimator),
        Method::LociH => {
            let scores = independence_score(&std_pair.x, &std_pair.y, Some(&fits.0), estimator, cfg).and_then(|xy| {
                independence_score(&std_pair.y, &std_pair.x, Some(&fits.1), estimator, cfg).map(|yx| (xy, yx))
            });
            match scores {
                Ok(((_, true), (_, true))) => {
                    let mut v = DirectionVerdict::from_scores(1.0, 1.0, method, estimator);
                    v.diagnostic = Some("independence test degenerate in both directions".into());
                    v
                }
                Ok(((pxy, _), (pyx, _))) => DirectionVerdict::from_scores(pxy, pyx, method, estimator),
                Err(e) => DirectionVerdict::failed(method, estimator, format!("independence test failed: {e}")),
            }
        }
    }
}

/// Verdicts for several methods from one pair of fits.
///
/// Errors only on invalid input (fewer than [`MIN_SAMPLES`] points or a
/// constant variable); estimator failures yield undecided verdicts that
/// carry a diagnostic.
pub fn infer_methods(
    pair: &SamplePair,
    methods: &[Method],
    estimator: Estimator,
    cfg: &InferenceConfig,
) -> Result<Vec<DirectionVerdict>> {
    let std_pair = prepare(pair)?;
    let fits = fit_direction(&std_pair.x, &std_pair.y, estimator, cfg)
        .and_then(|xy| fit_direction(&std_pair.y, &std_pair.x, estimator, cfg).map(|yx| (xy, yx)));
    Ok(match fits {
        Ok(fits) => methods.iter().map(|&m| method_verdict(&std_pair, &fits, m, estimator, cfg)).collect(),
        Err(e) => methods
            .iter()
            .map(|&m| DirectionVerdict::failed(m, estimator, format!("{estimator} fit failed: {e}")))
            .collect(),
    })
}

fn decide(pair: &SamplePair, method: Method, estimator: Estimator, cfg: &InferenceConfig) -> Result<DirectionVerdict> {
    if method == Method::LociH && cfg.hsic.sample_split {
        let std_pair = prepare(pair)?;
        let scores = independence_score(&std_pair.x, &std_pair.y, None, estimator, cfg)
            .and_then(|xy| independence_score(&std_pair.y, &std_pair.x, None, estimator, cfg).map(|yx| (xy, yx)));
        return Ok(match scores {
            Ok(((pxy, _), (pyx, _))) => DirectionVerdict::from_scores(pxy, pyx, method, estimator),
            Err(e) => DirectionVerdict::failed(method, estimator, format!("{estimator} fit failed: {e}")),
        });
    }
    Ok(infer_methods(pair, &[method], estimator, cfg)?.remove(0))
}

/// Decide by comparing mean conditional log-likelihoods `ℓ(y|x)/T` and `ℓ(x|y)/T`.
///
/// Errors only on invalid input (fewer than [`MIN_SAMPLES`] points or a
/// constant variable); estimator failures yield an undecided verdict.
pub fn loci_m(pair: &SamplePair, estimator: Estimator, cfg: &InferenceConfig) -> Result<DirectionVerdict> {
    decide(pair, Method::LociM, estimator, cfg)
}

/// Decide for the direction whose residuals look more independent of the
/// cause (larger HSIC p-value).
pub fn loci_h(pair: &SamplePair, estimator: Estimator, cfg: &InferenceConfig) -> Result<DirectionVerdict> {
    decide(pair, Method::LociH, estimator, cfg)
}

/// Same decision rule with the variance model replaced by a single constant.
pub fn anm_ablation(pair: &SamplePair, method: Method, estimator: Estimator, cfg: &InferenceConfig) -> Result<DirectionVerdict> {
    decide(pair, method, estimator.anm_counterpart()?, cfg)
}

pub fn infer(pair: &SamplePair, method: Method, estimator: Estimator, cfg: &InferenceConfig) -> Result<DirectionVerdict> {
    decide(pair, method, estimator, cfg)
}
