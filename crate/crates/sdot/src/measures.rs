//! Discrete and continuous probability measures, deterministic seeded
//! sampling, and the specific test laws used by the experiments.

use crate::error::{Error, Result};
use crate::stats::{kahan_sum, KahanSum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Finitely supported probability measure: N pairwise-distinct atoms with
/// weights summing to one. `empirical` relaxes the strict-positivity
/// requirement so that multinomial resamples with zero counts are valid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub empirical: bool,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let m = Self {
            points,
            weights,
            empirical: false,
        };
        m.validate()?;
        Ok(m)
    }

    /// Empirical variant: zero weights are allowed.
    pub fn empirical(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let m = Self {
            points,
            weights,
            empirical: true,
        };
        m.validate()?;
        Ok(m)
    }

    /// Uniform weights on the given support.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n as f64; n])
    }

    fn validate(&self) -> Result<()> {
        if self.points.is_empty() || self.points.len() != self.weights.len() {
            return Err(Error::InvalidMeasure(
                "points and weights must be non-empty and of equal length".into(),
            ));
        }
        let d = self.points[0].len();
        for p in &self.points {
            if p.len() != d {
                return Err(Error::InvalidMeasure("inconsistent point dimensions".into()));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite atom coordinate".into()));
            }
        }
        for (i, a) in self.points.iter().enumerate() {
            for b in self.points.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::InvalidMeasure("atoms must be pairwise distinct".into()));
                }
            }
        }
        for &w in &self.weights {
            if !w.is_finite() || w < 0.0 || (!self.empirical && w <= 0.0) {
                return Err(Error::InvalidMeasure("weights must be strictly positive".into()));
            }
        }
        let total = kahan_sum(self.weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Diameter of the support.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.points.iter().enumerate() {
            for b in self.points.iter().skip(i + 1) {
                let dist2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                d = d.max(dist2.sqrt());
            }
        }
        d
    }

    /// Drop zero-weight atoms, renormalizing is not needed (they carry no mass).
    /// Returns the restricted measure and the original indices kept.
    pub fn positive_part(&self) -> (DiscreteMeasure, Vec<usize>) {
        let kept: Vec<usize> = (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect();
        let m = DiscreteMeasure {
            points: kept.iter().map(|&i| self.points[i].clone()).collect(),
            weights: kept.iter().map(|&i| self.weights[i]).collect(),
            empirical: false,
        };
        (m, kept)
    }
}

/// Plain i.i.d. sample: one observation per row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    pub rows: Vec<Vec<f64>>,
}

impl Sample {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidMeasure("a sample needs at least one row".into()));
        }
        let d = rows[0].len();
        for r in &rows {
            if r.len() != d || r.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMeasure("rows must be finite and share a dimension".into()));
            }
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    /// Resample rows with replacement (bootstrap replicate).
    pub fn resample(&self, rng: &mut impl Rng) -> Sample {
        let m = self.len();
        let rows = (0..m).map(|_| self.rows[rng.gen_range(0..m)].clone()).collect();
        Sample { rows }
    }
}

/// One-dimensional factor of a product law.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Axis1d {
    Uniform { lo: f64, hi: f64 },
    Gauss { mean: f64, sd: f64 },
}

/// The continuous test distributions: axis-aligned boxes, Gaussian products,
/// per-axis products, and the uniform mixture on small cubes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContinuousSpec {
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    GaussProduct { means: Vec<f64>, sds: Vec<f64> },
    Product { axes: Vec<Axis1d> },
    CubeMixture { centers: Vec<Vec<f64>>, half_width: f64 },
}

impl ContinuousSpec {
    pub fn dim(&self) -> usize {
        match self {
            ContinuousSpec::UniformBox { lo, .. } => lo.len(),
            ContinuousSpec::GaussProduct { means, .. } => means.len(),
            ContinuousSpec::Product { axes } => axes.len(),
            ContinuousSpec::CubeMixture { centers, .. } => centers[0].len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ContinuousSpec::UniformBox { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(Error::UnsupportedSpec("uniform_box bounds mismatch".into()));
                }
                if lo.iter().zip(hi).any(|(a, b)| a >= b) {
                    return Err(Error::UnsupportedSpec("uniform_box needs lo < hi per axis".into()));
                }
            }
            ContinuousSpec::GaussProduct { means, sds } => {
                if means.len() != sds.len() || means.is_empty() || sds.iter().any(|s| *s <= 0.0) {
                    return Err(Error::UnsupportedSpec("gauss_product needs positive sds".into()));
                }
            }
            ContinuousSpec::Product { axes } => {
                if axes.is_empty() {
                    return Err(Error::UnsupportedSpec("empty product".into()));
                }
                for a in axes {
                    match a {
                        Axis1d::Uniform { lo, hi } if lo >= hi => {
                            return Err(Error::UnsupportedSpec("product uniform axis needs lo < hi".into()))
                        }
                        Axis1d::Gauss { sd, .. } if *sd <= 0.0 => {
                            return Err(Error::UnsupportedSpec("product gauss axis needs sd > 0".into()))
                        }
                        _ => {}
                    }
                }
            }
            ContinuousSpec::CubeMixture { centers, half_width } => {
                if centers.is_empty() || *half_width <= 0.0 {
                    return Err(Error::UnsupportedSpec("cube_mixture needs centers and half_width > 0".into()));
                }
                let d = centers[0].len();
                if centers.iter().any(|c| c.len() != d) {
                    return Err(Error::UnsupportedSpec("cube_mixture centers dimension mismatch".into()));
                }
            }
        }
        Ok(())
    }
}

/// Seeded, stream-splittable randomness. Identical `(master_seed, stream_id)`
/// reproduces identical draws; distinct streams are independent ChaCha states.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RandomSource {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RandomSource {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            stream_id: 0,
        }
    }

    pub fn stream(&self, stream_id: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_id,
        }
    }

    /// Derived sub-stream, for nesting (replicate -> inner draws).
    pub fn substream(&self, offset: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_id: self
                .stream_id
                .wrapping_mul(0x9e3779b97f4a7c15)
                .wrapping_add(offset)
                .wrapping_add(1),
        }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.stream_id.to_le_bytes());
        seed[16..24].copy_from_slice(&0x5d0_f00d_u64.to_le_bytes());
        ChaCha12Rng::from_seed(seed)
    }
}

/// Empirical measure of n i.i.d. draws from `p`, on the same atoms, with
/// multinomial-count weights. Zero weights are allowed in the result.
pub fn sample_discrete(p: &DiscreteMeasure, n: usize, rng: &RandomSource) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let mut r = rng.rng();
    let cum: Vec<f64> = {
        let mut acc = KahanSum::new();
        p.weights
            .iter()
            .map(|w| {
                acc.add(*w);
                acc.value()
            })
            .collect()
    };
    let mut counts = vec![0u64; p.len()];
    for _ in 0..n {
        let u: f64 = r.gen();
        let idx = cum.partition_point(|c| *c < u).min(p.len() - 1);
        counts[idx] += 1;
    }
    let mut weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    // pin the total to exactly 1 by adjusting the heaviest atom
    let imax = (0..weights.len())
        .max_by(|&a, &b| weights[a].partial_cmp(&weights[b]).unwrap())
        .unwrap();
    let rest = kahan_sum(weights.iter().enumerate().filter(|(i, _)| *i != imax).map(|(_, w)| *w));
    weights[imax] = 1.0 - rest;
    DiscreteMeasure::empirical(p.points.clone(), weights)
}

/// m i.i.d. draws from the continuous law, deterministic given `rng`.
pub fn sample_continuous(spec: &ContinuousSpec, m: usize, rng: &RandomSource) -> Result<Sample> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    spec.validate()?;
    let mut r = rng.rng();
    let rows = (0..m)
        .map(|_| match spec {
            ContinuousSpec::UniformBox { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(a, b)| a + (b - a) * r.gen::<f64>())
                .collect(),
            ContinuousSpec::GaussProduct { means, sds } => means
                .iter()
                .zip(sds)
                .map(|(mu, s)| {
                    let g: f64 = StandardNormal.sample(&mut r);
                    mu + s * g
                })
                .collect(),
            ContinuousSpec::Product { axes } => axes
                .iter()
                .map(|a| match a {
                    Axis1d::Uniform { lo, hi } => lo + (hi - lo) * r.gen::<f64>(),
                    Axis1d::Gauss { mean, sd } => {
                        let g: f64 = StandardNormal.sample(&mut r);
                        mean + sd * g
                    }
                })
                .collect(),
            ContinuousSpec::CubeMixture { centers, half_width } => {
                let c = &centers[r.gen_range(0..centers.len())];
                c.iter()
                    .map(|x| x + half_width * (2.0 * r.gen::<f64>() - 1.0))
                    .collect()
            }
        })
        .collect();
    Sample::new(rows)
}

/// Analytic second moment of the law: the integral of |y|^2.
pub fn second_moment_spec(spec: &ContinuousSpec) -> Result<f64> {
    spec.validate()?;
    let axis_m2 = |a: &Axis1d| match a {
        Axis1d::Uniform { lo, hi } => (hi.powi(3) - lo.powi(3)) / (3.0 * (hi - lo)),
        Axis1d::Gauss { mean, sd } => mean * mean + sd * sd,
    };
    Ok(match spec {
        ContinuousSpec::UniformBox { lo, hi } => lo
            .iter()
            .zip(hi)
            .map(|(a, b)| axis_m2(&Axis1d::Uniform { lo: *a, hi: *b }))
            .sum(),
        ContinuousSpec::GaussProduct { means, sds } => means
            .iter()
            .zip(sds)
            .map(|(m, s)| axis_m2(&Axis1d::Gauss { mean: *m, sd: *s }))
            .sum(),
        ContinuousSpec::Product { axes } => axes.iter().map(axis_m2).sum(),
        ContinuousSpec::CubeMixture { centers, half_width } => {
            let k = centers.len() as f64;
            let h2 = half_width * half_width / 3.0;
            centers
                .iter()
                .map(|c| c.iter().map(|x| x * x + h2).sum::<f64>())
                .sum::<f64>()
                / k
        }
    })
}

/// Plug-in second moment of a sample: average of |y|^2.
pub fn second_moment_sample(s: &Sample) -> f64 {
    kahan_sum(s.rows.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>())) / s.len() as f64
}
