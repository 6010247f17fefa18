//! Synthetic cause-effect pairs.
//!
//! Mechanisms are random mixtures of sigmoid, monomial and sine components.
//! The cause is always emitted as `x`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::LabeledPair;
use crate::data::SamplePair;
use crate::error::{Error, Result};
use crate::inference::Direction;
use crate::seed::mix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `y = f(x) + 0.2·n`
    An,
    /// `y = s(f(x)) + 0.2·n`
    AnS,
    /// `y = f(x) + g(x)·n`
    Ls,
    /// `y = s(f(x)) + g(s(f(x)))·n`
    LsS,
    /// `y = |f(x)|·u` with uniform `u`
    Mnu,
    /// `x ∼ U[−4π, 4π]`, `y ∼ N(sin x, 0.1(4π − |x|) + 0.2)`
    AppendixDSinusoid,
}

impl Family {
    pub const TAGS: &'static [&'static str] = &["an", "an_s", "ls", "ls_s", "mnu", "appendix_d_sinusoid"];
    const ALL: [Family; 6] = [Family::An, Family::AnS, Family::Ls, Family::LsS, Family::Mnu, Family::AppendixDSinusoid];

    pub fn tag(self) -> &'static str {
        Self::TAGS[Self::ALL.iter().position(|f| *f == self).unwrap()]
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::TAGS
            .iter()
            .position(|t| *t == s)
            .map(|i| Self::ALL[i])
            .ok_or_else(|| Error::Config(format!("unknown family '{s}'; valid: {}", Self::TAGS.join(", "))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n_points: usize,
    pub seed: u64,
    /// Number of random components in each of `f` and `g`.
    pub mechanism_complexity: usize,
}

impl GeneratorSpec {
    pub fn new(family: Family, n_points: usize, seed: u64) -> Self {
        Self { family, n_points, seed, mechanism_complexity: 5 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 20 {
            return Err(Error::Config(format!("n_points must be at least 20, got {}", self.n_points)));
        }
        if self.mechanism_complexity == 0 && self.family != Family::AppendixDSinusoid {
            return Err(Error::Config("mechanism_complexity must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Component {
    Sigmoid { steepness: f64, center: f64 },
    Monomial { power: i32 },
    Sine { freq: f64, phase: f64 },
}

impl Component {
    fn eval(self, x: f64) -> f64 {
        match self {
            Component::Sigmoid { steepness, center } => 1.0 / (1.0 + (-steepness * (x - center)).exp()),
            Component::Monomial { power } => (x / 2.0).powi(power),
            Component::Sine { freq, phase } => (freq * x + phase).sin(),
        }
    }
}

/// A random smooth function on roughly `[−3, 3]`, affinely normalized so
/// that its values on a reference grid have zero mean and unit spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    terms: Vec<(f64, Component)>,
    shift: f64,
    scale: f64,
}

impl Mechanism {
    pub fn sample(complexity: usize, rng: &mut impl Rng) -> Self {
        let mut terms = Vec::with_capacity(complexity);
        for _ in 0..complexity {
            let weight: f64 = rng.sample(StandardNormal);
            let comp = match rng.random_range(0..3) {
                0 => Component::Sigmoid { steepness: rng.random_range(1.0..5.0), center: rng.random_range(-2.0..2.0) },
                1 => Component::Monomial { power: rng.random_range(1..=3) },
                _ => Component::Sine { freq: rng.random_range(0.5..2.0), phase: rng.random_range(0.0..2.0 * PI) },
            };
            terms.push((weight, comp));
        }
        let mut m = Self { terms, shift: 0.0, scale: 1.0 };
        let grid: Vec<f64> = (0..601).map(|i| -3.0 + i as f64 * 0.01).collect();
        let vals: Vec<f64> = grid.iter().map(|&x| m.raw(x)).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        m.shift = mean;
        m.scale = if sd > 1e-8 { 1.0 / sd } else { 1.0 };
        m
    }

    fn raw(&self, x: f64) -> f64 {
        self.terms.iter().map(|(w, c)| w * c.eval(x)).sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.raw(x) - self.shift) * self.scale
    }
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

/// Invertible squashing used by the `_s` families.
pub fn squash(z: f64) -> f64 {
    4.0 / (1.0 + (-z).exp()) - 2.0
}

fn truncated_normal(rng: &mut impl Rng, bound: f64) -> f64 {
    loop {
        let v: f64 = rng.sample(StandardNormal);
        if v.abs() <= bound {
            return v;
        }
    }
}

/// Conditional mean and variance of the sinusoid benchmark at `x`.
pub fn sinusoid_truth(x: f64) -> (f64, f64) {
    (x.sin(), 0.1 * (4.0 * PI - x.abs()) + 0.2)
}

/// A generated pair together with its true location `f(xᵢ)` and scale
/// `g(xᵢ)` (for the multiplicative family, the conditional median and
/// half-width).
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub pair: LabeledPair,
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
}

pub fn generate(spec: &GeneratorSpec) -> Result<LabeledPair> {
    generate_with_truth(spec).map(|g| g.pair)
}

pub fn generate_with_truth(spec: &GeneratorSpec) -> Result<Generated> {
    spec.validate()?;
    let n = spec.n_points;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, spec.family as u64 + 1));
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let (x, location, scale, y): (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);
    match spec.family {
        Family::AppendixDSinusoid => {
            let u = Uniform::new(-4.0 * PI, 4.0 * PI).expect("valid range");
            x = (0..n).map(|_| u.sample(&mut rng)).collect();
            let truth: Vec<(f64, f64)> = x.iter().map(|&v| sinusoid_truth(v)).collect();
            location = truth.iter().map(|t| t.0).collect();
            scale = truth.iter().map(|t| t.1.sqrt()).collect();
        }
        Family::Mnu => {
            let f = Mechanism::sample(spec.mechanism_complexity, &mut rng);
            x = (0..n).map(|_| rng.random::<f64>()).collect();
            let amp: Vec<f64> = x.iter().map(|&v| f.eval(6.0 * v - 3.0).abs()).collect();
            location = amp.iter().map(|a| 0.5 * a).collect();
            scale = location.clone();
        }
        family => {
            let f = Mechanism::sample(spec.mechanism_complexity, &mut rng);
            let g = Mechanism::sample(spec.mechanism_complexity, &mut rng);
            x = (0..n).map(|_| truncated_normal(&mut rng, 3.0)).collect();
            let fx: Vec<f64> = x.iter().map(|&v| f.eval(v)).collect();
            match family {
                Family::An => {
                    location = fx;
                    scale = vec![0.2; n];
                }
                Family::AnS => {
                    location = fx.iter().map(|&v| squash(v)).collect();
                    scale = vec![0.2; n];
                }
                Family::Ls => {
                    scale = x.iter().map(|&v| softplus(g.eval(v)) + 0.1).collect();
                    location = fx;
                }
                Family::LsS => {
                    location = fx.iter().map(|&v| squash(v)).collect();
                    scale = location.iter().map(|&v| softplus(g.eval(v)) + 0.1).collect();
                }
                _ => unreachable!(),
            }
        }
    }
    if spec.family == Family::Mnu {
        y = location.iter().map(|&half| 2.0 * half * rng.random::<f64>()).collect();
    } else {
        y = location.iter().zip(&scale).map(|(m, s)| m + s * noise.sample(&mut rng)).collect();
    }
    let pair = LabeledPair {
        pair: SamplePair::new(x, y)?,
        true_direction: Direction::XToY,
        dataset: spec.family.tag().to_string(),
        pair_id: format!("{}_{:016x}", spec.family.tag(), spec.seed),
        weight: 1.0,
    };
    Ok(Generated { pair, location, scale })
}

/// `n_pairs` pairs with seeds derived from `seed`. With `randomize`, each
/// pair is swapped with probability ½ (ground truth swapped with it).
pub fn corpus(family: Family, n_pairs: usize, n_points: usize, seed: u64, randomize: bool) -> Result<Vec<LabeledPair>> {
    let mut flips = ChaCha8Rng::seed_from_u64(mix(seed, 0x0F11_9000));
    (0..n_pairs)
        .map(|i| {
            let mut lp = generate(&GeneratorSpec::new(family, n_points, mix(seed, i as u64)))?;
            lp.pair_id = format!("{}_{:04}", family.tag(), i);
            Ok(if randomize && flips.random::<bool>() { lp.flipped() } else { lp })
        })
        .collect()
}
