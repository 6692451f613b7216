//! Monte Carlo estimation of `u(x, t)` as the mean of independent cascade values.
//!
//! Sample `i` at point `j` draws from the stream keyed `(seed, j, i)`. Samples
//! are grouped into fixed chunks of [`CHUNK_SIZE`] consecutive ids; each chunk
//! is accumulated with Welford's recurrence and chunks are merged in id order
//! (Chan et al. pairwise update). Because the partition does not depend on the
//! number of worker threads, the result is bit-identical for any thread count.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::branching::BranchingLaw;
use crate::cascade::{
    self, Caps, CascadeError, CascadeSample, SpaceTimePoint, VertexKind, Visitor,
};
use crate::dalembert::{InitialData, QuadratureSpec};
use crate::rng::StreamKey;

/// Samples per work unit.
pub const CHUNK_SIZE: u64 = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("point {point} is at or beyond the existence horizon T* = {t_star}; pass --force to sample anyway")]
    BeyondHorizon { point: SpaceTimePoint, t_star: f64 },
    #[error("point {0} must have positive time")]
    InvalidPoint(SpaceTimePoint),
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("every sample at {0} overflowed")]
    AllExcluded(SpaceTimePoint),
    #[error("cascade at {point} failed: {source}")]
    Cascade {
        point: SpaceTimePoint,
        source: CascadeError,
    },
    #[error("could not build worker pool: {0}")]
    ThreadPool(String),
}

/// Everything a cascade needs besides its root and stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub law: BranchingLaw,
    pub data: InitialData,
    pub quadrature: QuadratureSpec,
}

/// Sampling parameters shared by every point of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub samples: u64,
    pub seed: u64,
    pub caps: Caps,
    pub threads: usize,
    /// Existence horizon; points with `t >= t_star` are refused unless `force` is set.
    pub t_star: Option<f64>,
    pub force: bool,
}

impl RunSettings {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            caps: Caps::default(),
            threads: 1,
            t_star: None,
            force: false,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn with_caps(mut self, caps: Caps) -> Self {
        self.caps = caps;
        self
    }

    pub fn with_horizon(mut self, t_star: f64, force: bool) -> Self {
        self.t_star = Some(t_star);
        self.force = force;
        self
    }

    fn check(&self, point: SpaceTimePoint) -> Result<(), EstimatorError> {
        if self.samples == 0 {
            return Err(EstimatorError::NoSamples);
        }
        if !(point.t > 0.0) {
            return Err(EstimatorError::InvalidPoint(point));
        }
        if let Some(t_star) = self.t_star {
            if point.t >= t_star && !self.force {
                return Err(EstimatorError::BeyondHorizon { point, t_star });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub points: Vec<SpaceTimePoint>,
    pub settings: RunSettings,
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * (other.count as f64 / n as f64);
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64 / n as f64);
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Tally {
    moments: Moments,
    truncated: u64,
    excluded: u64,
    bias_sum: f64,
    max_abs: f64,
    vertices: u64,
}

impl Tally {
    fn record(&mut self, sample: &CascadeSample) {
        if !sample.value.is_finite() || !sample.bias_bound.is_finite() {
            self.excluded += 1;
            return;
        }
        self.moments.push(sample.value);
        self.vertices += sample.vertex_count;
        if sample.truncated {
            self.truncated += 1;
            self.bias_sum += sample.bias_bound;
        } else {
            self.max_abs = self.max_abs.max(sample.value.abs());
        }
    }

    fn merge(&mut self, other: &Tally) {
        self.moments.merge(&other.moments);
        self.truncated += other.truncated;
        self.excluded += other.excluded;
        self.bias_sum += other.bias_sum;
        self.max_abs = self.max_abs.max(other.max_abs);
        self.vertices += other.vertices;
    }
}

/// Monte Carlo estimate at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub point: SpaceTimePoint,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`.
    pub stderr: f64,
    /// Samples that entered the mean.
    pub n: u64,
    pub n_truncated: u64,
    /// Samples dropped because their value overflowed.
    pub n_excluded: u64,
    /// Bracket on the truncation bias of `mean`: `bias_low <= 0 <= bias_high`.
    pub bias_low: f64,
    pub bias_high: f64,
    pub seed: u64,
    /// Largest `|value|` over untruncated samples.
    pub max_abs_value: f64,
    pub mean_vertex_count: f64,
}

impl Estimate {
    fn from_tally(point: SpaceTimePoint, seed: u64, tally: &Tally) -> Self {
        let n = tally.moments.count();
        let stderr = if n > 1 {
            (tally.moments.variance() / n as f64).sqrt()
        } else {
            0.0
        };
        let half = if n > 0 {
            tally.bias_sum / n as f64
        } else {
            0.0
        };
        Self {
            point,
            mean: tally.moments.mean(),
            stderr,
            n,
            n_truncated: tally.truncated,
            n_excluded: tally.excluded,
            bias_low: if half > 0.0 { -half } else { 0.0 },
            bias_high: half,
            seed,
            max_abs_value: tally.max_abs,
            mean_vertex_count: if n > 0 {
                tally.vertices as f64 / n as f64
            } else {
                0.0
            },
        }
    }
}

fn run_in_pool<T: Send>(
    threads: usize,
    job: impl FnOnce() -> T + Send,
) -> Result<T, EstimatorError> {
    if threads <= 1 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| EstimatorError::ThreadPool(e.to_string()))?;
    Ok(pool.install(job))
}

fn chunk_ranges(samples: u64) -> Vec<(u64, u64)> {
    (0..samples.div_ceil(CHUNK_SIZE))
        .map(|c| (c * CHUNK_SIZE, ((c + 1) * CHUNK_SIZE).min(samples)))
        .collect()
}

fn estimate_chunked(
    problem: &Problem,
    point_id: u64,
    point: SpaceTimePoint,
    settings: &RunSettings,
) -> Result<Estimate, EstimatorError> {
    let chunk = |(lo, hi): (u64, u64)| -> Result<Tally, EstimatorError> {
        let mut tally = Tally::default();
        for sample_id in lo..hi {
            let mut rng = StreamKey::new(settings.seed, point_id, sample_id).stream();
            let sample = cascade::evaluate_cascade(
                &mut rng,
                &problem.law,
                &problem.data,
                &problem.quadrature,
                point,
                &settings.caps,
            )
            .map_err(|source| EstimatorError::Cascade { point, source })?;
            tally.record(&sample);
        }
        Ok(tally)
    };
    let ranges = chunk_ranges(settings.samples);
    let tallies: Vec<Result<Tally, EstimatorError>> = if settings.threads <= 1 {
        ranges.into_iter().map(chunk).collect()
    } else {
        ranges.into_par_iter().map(chunk).collect()
    };
    let mut total = Tally::default();
    for tally in tallies {
        total.merge(&tally?);
    }
    if total.moments.count() == 0 {
        return Err(EstimatorError::AllExcluded(point));
    }
    Ok(Estimate::from_tally(point, settings.seed, &total))
}

/// Estimate at a single point, using stream keys `(seed, point_id, i)`.
pub fn estimate_point(
    problem: &Problem,
    point_id: u64,
    point: SpaceTimePoint,
    settings: &RunSettings,
) -> Result<Estimate, EstimatorError> {
    settings.check(point)?;
    run_in_pool(settings.threads, || {
        estimate_chunked(problem, point_id, point, settings)
    })?
}

/// Estimates at every point of the plan, in plan order; point `j` uses point id `j`.
///
/// All points are checked against the horizon before any sampling starts.
pub fn estimate_grid(problem: &Problem, plan: &RunPlan) -> Result<Vec<Estimate>, EstimatorError> {
    for point in &plan.points {
        plan.settings.check(*point)?;
    }
    run_in_pool(plan.settings.threads, || {
        plan.points
            .iter()
            .enumerate()
            .map(|(j, point)| estimate_chunked(problem, j as u64, *point, &plan.settings))
            .collect()
    })?
}

struct DepthOnly;

impl Visitor for DepthOnly {
    fn root(&mut self, _point: SpaceTimePoint) -> usize {
        0
    }

    fn child(&mut self, _parent: usize, _index: usize, _point: SpaceTimePoint) -> usize {
        0
    }

    fn visit(&mut self, _: usize, _: SpaceTimePoint, _: VertexKind) -> Result<(), CascadeError> {
        Ok(())
    }
}

/// One row of a convergence probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeRow {
    pub generation: u32,
    /// Fraction of cascades with a vertex beyond generation `n`, i.e. those whose
    /// generation-`n` truncation differs from the full cascade.
    pub fraction: f64,
    pub count: u64,
    pub samples: u64,
}

/// Fraction of cascades deeper than each requested generation.
///
/// Uses the same stream keys as [`estimate_point`], so it describes exactly
/// the cascades behind an estimate with identical seed and point id. A
/// truncated cascade counts as deeper than every generation up to the cap.
pub fn convergence_probe(
    law: &BranchingLaw,
    point_id: u64,
    point: SpaceTimePoint,
    settings: &RunSettings,
    generations: &[u32],
) -> Result<Vec<ProbeRow>, EstimatorError> {
    if settings.samples == 0 {
        return Err(EstimatorError::NoSamples);
    }
    if !(point.t > 0.0) {
        return Err(EstimatorError::InvalidPoint(point));
    }
    let chunk = |(lo, hi): (u64, u64)| -> Result<Vec<u32>, EstimatorError> {
        (lo..hi)
            .map(|sample_id| {
                let mut rng = StreamKey::new(settings.seed, point_id, sample_id).stream();
                let stats =
                    cascade::walk(&mut rng, law, point, &settings.caps, None, &mut DepthOnly)
                        .map_err(|source| EstimatorError::Cascade { point, source })?;
                Ok(if stats.truncated {
                    u32::MAX
                } else {
                    stats.max_generation
                })
            })
            .collect()
    };
    let depths: Vec<u32> = run_in_pool(settings.threads, || {
        let ranges = chunk_ranges(settings.samples);
        let parts: Result<Vec<Vec<u32>>, EstimatorError> = if settings.threads <= 1 {
            ranges.into_iter().map(chunk).collect()
        } else {
            ranges.into_par_iter().map(chunk).collect()
        };
        parts.map(|p| p.into_iter().flatten().collect())
    })??;
    Ok(generations
        .iter()
        .map(|&generation| {
            let count = depths.iter().filter(|d| **d > generation).count() as u64;
            ProbeRow {
                generation,
                fraction: count as f64 / settings.samples as f64,
                count,
                samples: settings.samples,
            }
        })
        .collect())
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(value: f64) -> String {
    format!("{value:.16e}")
}

pub const CSV_HEADER: &str = "x,t,mean,stderr,n,n_truncated,bias_low,bias_high,seed";

pub fn write_csv<W: Write>(mut out: W, estimates: &[Estimate]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for e in estimates {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt17(e.point.x),
            fmt17(e.point.t),
            fmt17(e.mean),
            fmt17(e.stderr),
            e.n,
            e.n_truncated,
            fmt17(e.bias_low),
            fmt17(e.bias_high),
            e.seed
        )?;
    }
    Ok(())
}

/// JSON record with the same fields as a CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub x: f64,
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub n_truncated: u64,
    pub bias_low: f64,
    pub bias_high: f64,
    pub seed: u64,
}

impl From<&Estimate> for EstimateRecord {
    fn from(e: &Estimate) -> Self {
        Self {
            x: e.point.x,
            t: e.point.t,
            mean: e.mean,
            stderr: e.stderr,
            n: e.n,
            n_truncated: e.n_truncated,
            bias_low: e.bias_low,
            bias_high: e.bias_high,
            seed: e.seed,
        }
    }
}

/// Reads rows written by [`write_csv`].
pub fn read_csv(text: &str) -> Result<Vec<EstimateRecord>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(format!("expected header `{CSV_HEADER}`, found {other:?}")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 9 {
                return Err(format!(
                    "row {}: expected 9 columns, found {}",
                    i + 1,
                    cols.len()
                ));
            }
            let f = |j: usize| {
                cols[j]
                    .parse::<f64>()
                    .map_err(|e| format!("row {}, column {}: {e}", i + 1, j + 1))
            };
            let u = |j: usize| {
                cols[j]
                    .parse::<u64>()
                    .map_err(|e| format!("row {}, column {}: {e}", i + 1, j + 1))
            };
            Ok(EstimateRecord {
                x: f(0)?,
                t: f(1)?,
                mean: f(2)?,
                stderr: f(3)?,
                n: u(4)?,
                n_truncated: u(5)?,
                bias_low: f(6)?,
                bias_high: f(7)?,
                seed: u(8)?,
            })
        })
        .collect()
}
