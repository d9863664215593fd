//! Replication runner, estimates, and the named experiments.
//!
//! Replication `i` of an experiment seeded with `s` draws from stream
//! `(s, i)`; auxiliary draws use `(s, i + (j+1)·2⁴⁰)` (see
//! [`RngStream::auxiliary`]). Rows are merged in replication order, so
//! every output is independent of the worker count.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::excursion::{hit_before_exit, hit_before_exit_accelerated, visits_before_domain_exit, BallWalker, ExcursionError};
use crate::holes::{self, HoleExperimentConfig, HoleRow};
use crate::lattice::{inner_boundary_with_budget, BallSpec, LatticeError, LatticePoint, Which};
use crate::oracles::{self, OracleError};
use crate::rng::RngStream;
use crate::walk::{
    coupled_moves, erw_move, run_walk, ErwParams, ExternalConfiguration, Move, RecordMode, VisitedSet, WalkError,
    WalkKind,
};

pub const DEFAULT_LEVEL: f64 = 0.99;

/// Largest start ring enumerated by the avoid-origin experiment.
pub const RING_BUDGET: usize = 1_000_000;

/// Minimum count of J > j for a continuation ratio to be reported.
pub const TAIL_MIN_COUNT: u64 = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("reps must be at least 1")]
    NoReplications,
    #[error("workers must be at least 1")]
    NoWorkers,
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("successes {successes} exceed trials {trials}")]
    TooManySuccesses { successes: u64, trials: u64 },
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Excursion(#[from] ExcursionError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Holes(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<holes::HoleError> for HarnessError {
    fn from(e: holes::HoleError) -> Self {
        match e {
            holes::HoleError::Harness(h) => h,
            other => HarnessError::Holes(other.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// estimates

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_level: f64,
    /// Set when the interval carries no information (a single observation).
    pub degenerate: bool,
}

fn z_for(level: f64) -> Result<f64, HarnessError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(HarnessError::InvalidLevel(level));
    }
    Ok(Normal::standard().inverse_cdf(0.5 + level / 2.0))
}

/// Wilson score interval.
pub fn bernoulli_ci(successes: u64, trials: u64, level: f64) -> Result<(f64, f64), HarnessError> {
    if trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    if successes > trials {
        return Err(HarnessError::TooManySuccesses { successes, trials });
    }
    let z = z_for(level)?;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    Ok((low, high))
}

impl Estimate {
    /// Sample mean with a normal-approximation interval.
    pub fn from_samples(xs: &[f64], level: f64) -> Result<Estimate, HarnessError> {
        let z = z_for(level)?;
        if xs.is_empty() {
            return Err(HarnessError::NoReplications);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stderr = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        };
        Ok(Estimate {
            mean,
            stderr,
            count: xs.len() as u64,
            ci_low: mean - z * stderr,
            ci_high: mean + z * stderr,
            ci_level: level,
            degenerate: xs.len() < 2,
        })
    }

    /// Proportion with a Wilson interval.
    pub fn proportion(successes: u64, trials: u64, level: f64) -> Result<Estimate, HarnessError> {
        let (low, high) = bernoulli_ci(successes, trials, level)?;
        let p = successes as f64 / trials as f64;
        Ok(Estimate {
            mean: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            count: trials,
            ci_low: low.min(p),
            ci_high: high.max(p),
            ci_level: level,
            degenerate: trials < 2,
        })
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 }
}

/// Least-squares line y = a + b x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit { intercept: my - slope * mx, slope, r_squared, points: xs.len() })
}

// ---------------------------------------------------------------------------
// replication runner

fn pool(workers: usize) -> Result<rayon::ThreadPool, HarnessError> {
    if workers == 0 {
        return Err(HarnessError::NoWorkers);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::InvalidParams(e.to_string()))
}

/// Runs `f(rep)` for rep in 0..reps on `workers` threads; results come back
/// in replication order.
pub fn run_replications<T, E, F>(reps: u64, workers: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send + From<HarnessError>,
    F: Fn(u64) -> Result<T, E> + Sync + Send,
{
    if reps == 0 {
        return Err(HarnessError::NoReplications.into());
    }
    let pool = pool(workers).map_err(E::from)?;
    pool.install(|| (0..reps).into_par_iter().map(&f).collect())
}

#[derive(Serialize, Deserialize)]
struct CheckpointLine<T> {
    rep: u64,
    row: T,
}

/// [`run_replications`] that appends each finished replication to a JSONL
/// file and, when the file already holds some replications, only runs the
/// missing ones. Lines may land in any order; the merged result is sorted.
pub fn run_replications_checkpointed<T, F>(
    reps: u64,
    workers: usize,
    checkpoint: &Path,
    f: F,
) -> Result<Vec<T>, HarnessError>
where
    T: Send + Serialize + DeserializeOwned,
    F: Fn(u64) -> Result<T, HarnessError> + Sync + Send,
{
    let mut done: BTreeMap<u64, T> = BTreeMap::new();
    if checkpoint.exists() {
        let reader = BufReader::new(File::open(checkpoint)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CheckpointLine<T>>(&line) {
                Ok(l) if l.rep < reps => {
                    done.insert(l.rep, l.row);
                }
                Ok(_) => {}
                // a torn final line from an interrupted write
                Err(_) if line_is_last(checkpoint, i)? => {}
                Err(e) => return Err(HarnessError::Checkpoint(format!("line {}: {e}", i + 1))),
            }
        }
    }
    let missing: Vec<u64> = (0..reps).filter(|r| !done.contains_key(r)).collect();
    let file = Mutex::new(OpenOptions::new().create(true).append(true).open(checkpoint)?);
    let fresh: Vec<(u64, T)> = pool(workers)?.install(|| {
        missing
            .par_iter()
            .map(|&rep| {
                let row = f(rep)?;
                let line = serde_json::to_string(&CheckpointLine { rep, row: &row })
                    .map_err(|e| HarnessError::Checkpoint(e.to_string()))?;
                let mut fh = file.lock().unwrap();
                writeln!(fh, "{line}")?;
                Ok((rep, row))
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;
    done.extend(fresh);
    Ok(done.into_values().collect())
}

fn line_is_last(path: &Path, index: usize) -> Result<bool, HarnessError> {
    let count = BufReader::new(File::open(path)?).lines().count();
    Ok(index + 1 == count)
}

// ---------------------------------------------------------------------------
// tables

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

/// A per-replication record with a fixed CSV schema.
pub trait Row {
    const HEADER: &'static [&'static str];
    fn cells(&self) -> Vec<Cell>;
}

impl Row for HoleRow {
    const HEADER: &'static [&'static str] = &["rep", "seed", "n", "m", "holes", "distinct_r1", "distinct_r2"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            self.rep.into(),
            self.seed.into(),
            self.n.into(),
            self.m.into(),
            self.holes.into(),
            self.distinct_r1.into(),
            self.distinct_r2.into(),
        ]
    }
}

fn table<R: Row>(rows: &[R]) -> (Vec<String>, Vec<Vec<Cell>>) {
    (R::HEADER.iter().map(|s| s.to_string()).collect(), rows.iter().map(Row::cells).collect())
}

// ---------------------------------------------------------------------------
// speed

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedParams {
    pub epsilon: f64,
    pub n: u64,
    /// Pre-visited half-space x₁ ≤ t, if any.
    pub half_space: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedRow {
    pub rep: u64,
    pub seed: u64,
    pub n: u64,
    pub x1_n: i64,
    pub x1_2n: i64,
    pub speed_n: f64,
    pub speed_2n: f64,
    pub no_progress: bool,
}

impl Row for SpeedRow {
    const HEADER: &'static [&'static str] = &["rep", "seed", "n", "x1_n", "x1_2n", "speed_n", "speed_2n", "no_progress"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            self.rep.into(),
            self.seed.into(),
            self.n.into(),
            self.x1_n.into(),
            self.x1_2n.into(),
            self.speed_n.into(),
            self.speed_2n.into(),
            self.no_progress.into(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedResult {
    /// R(n)₁/n.
    pub mean_speed: Estimate,
    /// R(2n)₁/(2n).
    pub mean_speed_2n: Estimate,
    /// P(R(2n)₁ ≤ R(n)₁).
    pub p_no_progress: Estimate,
    pub rows: Vec<SpeedRow>,
}

pub fn speed_replication(p: &SpeedParams, seed: u64, rep: u64) -> Result<SpeedRow, HarnessError> {
    let params = ErwParams::new(p.epsilon)?;
    let config = p.half_space.map_or(ExternalConfiguration::None, ExternalConfiguration::HalfSpace);
    let mut rng = RngStream::for_replication(seed, rep);
    let path = run_walk(
        WalkKind::Erw(params),
        2 * p.n as usize,
        LatticePoint::xyz(0, 0, 0),
        &config,
        &mut rng,
        RecordMode::TraceOnly,
    )?;
    let tr = path.first_coord_trace();
    let (a, b) = (tr[p.n as usize], tr[2 * p.n as usize]);
    Ok(SpeedRow {
        rep,
        seed,
        n: p.n,
        x1_n: a,
        x1_2n: b,
        speed_n: a as f64 / p.n as f64,
        speed_2n: b as f64 / (2 * p.n) as f64,
        no_progress: b <= a,
    })
}

pub fn summarize_speed(rows: Vec<SpeedRow>, level: f64) -> Result<SpeedResult, HarnessError> {
    let s: Vec<f64> = rows.iter().map(|r| r.speed_n).collect();
    let s2: Vec<f64> = rows.iter().map(|r| r.speed_2n).collect();
    let stuck = rows.iter().filter(|r| r.no_progress).count() as u64;
    Ok(SpeedResult {
        mean_speed: Estimate::from_samples(&s, level)?,
        mean_speed_2n: Estimate::from_samples(&s2, level)?,
        p_no_progress: Estimate::proportion(stuck, rows.len() as u64, level)?,
        rows,
    })
}

pub fn speed_experiment(p: &SpeedParams, reps: u64, seed: u64, workers: usize, level: f64) -> Result<SpeedResult, HarnessError> {
    validate_speed(p)?;
    let rows = run_replications(reps, workers, |rep| speed_replication(p, seed, rep))?;
    summarize_speed(rows, level)
}

fn validate_speed(p: &SpeedParams) -> Result<(), HarnessError> {
    ErwParams::new(p.epsilon)?;
    if p.n == 0 {
        return Err(HarnessError::InvalidParams("speed needs n ≥ 1".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// hitting

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingParams {
    pub r: f64,
}

impl HittingParams {
    /// Walks start at (round(r), 0).
    pub fn start(&self) -> LatticePoint {
        LatticePoint::xy(self.r.round() as i64, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingRow {
    pub rep: u64,
    pub seed: u64,
    pub r: f64,
    pub hit: bool,
}

impl Row for HittingRow {
    const HEADER: &'static [&'static str] = &["rep", "seed", "r", "hit"];
    fn cells(&self) -> Vec<Cell> {
        vec![self.rep.into(), self.seed.into(), self.r.into(), self.hit.into()]
    }
}

/// Monte Carlo, exact and asymptotic hit-before-exit probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub r: f64,
    /// None when B(0, 2r) exceeds the solver budget.
    pub p_exact: Option<f64>,
    /// log 2 / log r.
    pub p_asym: f64,
    pub p_mc: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingResult {
    pub estimate: HittingEstimate,
    pub rows: Vec<HittingRow>,
}

pub fn hitting_replication(p: &HittingParams, seed: u64, rep: u64) -> Result<HittingRow, HarnessError> {
    let ball = BallSpec::centered(2, p.r)?;
    let mut rng = RngStream::for_replication(seed, rep);
    let hit = hit_before_exit(p.start(), LatticePoint::xy(0, 0), &ball, &mut rng)?;
    Ok(HittingRow { rep, seed, r: p.r, hit })
}

pub fn summarize_hitting(p: &HittingParams, rows: Vec<HittingRow>, level: f64) -> Result<HittingResult, HarnessError> {
    let hits = rows.iter().filter(|r| r.hit).count() as u64;
    let p_exact = match oracles::exact_hit_probability(&p.start(), p.r) {
        Ok(v) => Some(v),
        Err(OracleError::BudgetExceeded { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(HittingResult {
        estimate: HittingEstimate {
            r: p.r,
            p_exact,
            p_asym: std::f64::consts::LN_2 / p.r.ln(),
            p_mc: Estimate::proportion(hits, rows.len() as u64, level)?,
        },
        rows,
    })
}

pub fn hitting_experiment(p: &HittingParams, reps: u64, seed: u64, workers: usize, level: f64) -> Result<HittingResult, HarnessError> {
    validate_hitting(p)?;
    let rows = run_replications(reps, workers, |rep| hitting_replication(p, seed, rep))?;
    summarize_hitting(p, rows, level)
}

fn validate_hitting(p: &HittingParams) -> Result<(), HarnessError> {
    if !(p.r > 1.0 && p.r.is_finite()) {
        return Err(HarnessError::InvalidParams("hitting needs r > 1".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// avoid-origin

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidOriginParams {
    pub k_list: Vec<u32>,
    /// r = multiplier · e^{√k}.
    pub multiplier: f64,
}

impl AvoidOriginParams {
    pub fn radius(&self, k: u32) -> f64 {
        self.multiplier * (k as f64).sqrt().exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidRow {
    pub rep: u64,
    pub seed: u64,
    pub k: u32,
    pub r: f64,
    pub success: bool,
}

impl Row for AvoidRow {
    const HEADER: &'static [&'static str] = &["rep", "seed", "k", "r", "success"];
    fn cells(&self) -> Vec<Cell> {
        vec![self.rep.into(), self.seed.into(), (self.k as u64).into(), self.r.into(), self.success.into()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidLevel {
    pub k: u32,
    pub r: f64,
    pub ring_size: usize,
    pub success: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeFit {
    pub beta: f64,
    pub fit: LinearFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidOriginResult {
    pub levels: Vec<AvoidLevel>,
    /// −ln P(success) regressed on k^β.
    pub fits: Vec<ShapeFit>,
    pub best_beta: Option<f64>,
    pub rows: Vec<AvoidRow>,
}

/// Candidate exponents for the decay-shape regression.
pub const SHAPE_BETAS: [f64; 3] = [0.25, 0.5, 1.0];

/// Inner-boundary ring of B(0, r), lexicographic.
pub fn start_ring(r: f64) -> Result<Vec<LatticePoint>, HarnessError> {
    let ball = BallSpec::centered(2, r)?;
    Ok(inner_boundary_with_budget(&ball, Which::Inner, RING_BUDGET)?.into_iter().collect())
}

fn avoid_once(k: u32, ring: &[LatticePoint], ball: &BallSpec, rng: &mut RngStream) -> Result<bool, HarnessError> {
    let origin = LatticePoint::xy(0, 0);
    for _ in 0..k {
        let start = ring[rng.below(ring.len() as u64) as usize];
        if hit_before_exit_accelerated(start, origin, ball, rng)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn avoid_origin_experiment(
    p: &AvoidOriginParams,
    reps: u64,
    seed: u64,
    workers: usize,
    level: f64,
) -> Result<AvoidOriginResult, HarnessError> {
    if !(p.multiplier > 0.0 && p.multiplier.is_finite()) {
        return Err(HarnessError::InvalidParams("multiplier must be positive".into()));
    }
    let setups: Vec<(u32, f64, Vec<LatticePoint>, BallSpec)> = p
        .k_list
        .iter()
        .map(|&k| {
            let r = p.radius(k);
            Ok((k, r, start_ring(r)?, BallSpec::centered(2, r)?))
        })
        .collect::<Result<_, HarnessError>>()?;
    let per_rep: Vec<Vec<AvoidRow>> = run_replications(reps, workers, |rep| {
        let main = RngStream::for_replication(seed, rep);
        setups
            .iter()
            .enumerate()
            .map(|(j, (k, r, ring, ball))| {
                let mut rng = main.auxiliary(j as u64);
                Ok(AvoidRow { rep, seed, k: *k, r: *r, success: avoid_once(*k, ring, ball, &mut rng)? })
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;
    let rows: Vec<AvoidRow> = per_rep.into_iter().flatten().collect();
    summarize_avoid(&setups.iter().map(|s| (s.0, s.1, s.2.len())).collect::<Vec<_>>(), rows, level)
}

pub fn summarize_avoid(
    setups: &[(u32, f64, usize)],
    rows: Vec<AvoidRow>,
    level: f64,
) -> Result<AvoidOriginResult, HarnessError> {
    let mut levels = Vec::new();
    for &(k, r, ring_size) in setups {
        let mine: Vec<&AvoidRow> = rows.iter().filter(|row| row.k == k).collect();
        let ok = mine.iter().filter(|row| row.success).count() as u64;
        levels.push(AvoidLevel { k, r, ring_size, success: Estimate::proportion(ok, mine.len() as u64, level)? });
    }
    let usable: Vec<(f64, f64)> = levels
        .iter()
        .filter(|l| l.k > 0 && l.success.mean > 0.0)
        .map(|l| (l.k as f64, -l.success.mean.ln()))
        .collect();
    let ys: Vec<f64> = usable.iter().map(|u| u.1).collect();
    let fits: Vec<ShapeFit> = SHAPE_BETAS
        .iter()
        .filter_map(|&beta| {
            let xs: Vec<f64> = usable.iter().map(|u| u.0.powf(beta)).collect();
            linear_fit(&xs, &ys).map(|fit| ShapeFit { beta, fit })
        })
        .collect();
    let best_beta = fits
        .iter()
        .max_by(|a, b| a.fit.r_squared.total_cmp(&b.fit.r_squared))
        .map(|f| f.beta);
    Ok(AvoidOriginResult { levels, fits, best_beta, rows })
}

// ---------------------------------------------------------------------------
// visit-count tail

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitTailParams {
    pub r: f64,
    /// Walks run until they leave B(0, 2·n_domain).
    pub n_domain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitRow {
    pub rep: u64,
    pub seed: u64,
    pub visits: u64,
}

impl Row for VisitRow {
    const HEADER: &'static [&'static str] = &["rep", "seed", "visits"];
    fn cells(&self) -> Vec<Cell> {
        vec![self.rep.into(), self.seed.into(), self.visits.into()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub j: u64,
    /// #{J > j}.
    pub count: u64,
    pub p_exceed: f64,
    /// P(J > j+1) / P(J > j), when #{J > j} ≥ TAIL_MIN_COUNT.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitTailResult {
    pub tail: Vec<TailPoint>,
    /// 1 − log 2 / log(2·n_domain / r).
    pub reference_ratio: f64,
    /// Pooled continuation ratio Σ#{J > j+1} / Σ#{J > j} over j ≥ 1.
    pub pooled_ratio: Option<f64>,
    /// P(no return to B(0,r) after leaving B(0,2r)), from all visits.
    pub escape: Estimate,
    pub mean_visits: Estimate,
    pub rows: Vec<VisitRow>,
}

fn validate_visit_tail(p: &VisitTailParams) -> Result<(), HarnessError> {
    if !(p.r >= 4.0 && p.n_domain > 4.0 * p.r && p.n_domain.is_finite()) {
        return Err(HarnessError::InvalidParams(format!(
            "visit tail needs r ≥ 4 and n_domain > 4r, got r = {}, n_domain = {}",
            p.r, p.n_domain
        )));
    }
    Ok(())
}

pub fn visit_tail_experiment(p: &VisitTailParams, reps: u64, seed: u64, workers: usize, level: f64) -> Result<VisitTailResult, HarnessError> {
    validate_visit_tail(p)?;
    let ball = BallSpec::centered(2, p.r)?;
    let rows = run_replications(reps, workers, |rep| {
        let mut rng = RngStream::for_replication(seed, rep);
        let j = visits_before_domain_exit(LatticePoint::xy(0, 0), &ball, 2.0 * p.n_domain, &mut rng, true)?;
        Ok::<_, HarnessError>(VisitRow { rep, seed, visits: j as u64 })
    })?;
    summarize_visit_tail(p, rows, level)
}

pub fn summarize_visit_tail(p: &VisitTailParams, rows: Vec<VisitRow>, level: f64) -> Result<VisitTailResult, HarnessError> {
    let n = rows.len() as u64;
    let max = rows.iter().map(|r| r.visits).max().unwrap_or(0);
    let count_gt = |j: u64| rows.iter().filter(|r| r.visits > j).count() as u64;
    let counts: Vec<u64> = (0..=max + 1).map(count_gt).collect();
    let tail: Vec<TailPoint> = (0..=max)
        .map(|j| {
            let c = counts[j as usize];
            TailPoint {
                j,
                count: c,
                p_exceed: c as f64 / n as f64,
                ratio: (c >= TAIL_MIN_COUNT).then(|| counts[j as usize + 1] as f64 / c as f64),
            }
        })
        .collect();
    let num: u64 = counts.iter().skip(2).sum();
    let den: u64 = counts.iter().skip(1).take(counts.len().saturating_sub(2)).sum();
    let total: u64 = rows.iter().map(|r| r.visits).sum();
    let escapes = rows.iter().filter(|r| r.visits > 0).count() as u64;
    let visits: Vec<f64> = rows.iter().map(|r| r.visits as f64).collect();
    Ok(VisitTailResult {
        tail,
        reference_ratio: 1.0 - oracles::annulus_escape(p.r, 2.0 * p.n_domain)?,
        pooled_ratio: (den > 0).then(|| num as f64 / den as f64),
        escape: Estimate::proportion(escapes, total.max(1), level)?,
        mean_visits: Estimate::from_samples(&visits, level)?,
        rows,
    })
}

// ---------------------------------------------------------------------------
// exit-time tail

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTailResult {
    pub r: f64,
    /// (λ, P(σ > λr²)).
    pub points: Vec<(f64, f64)>,
    /// ln P(σ > λr²) against λ.
    pub fit: Option<LinearFit>,
    pub mean_exit_time: Estimate,
    pub exit_times: Vec<u64>,
}

/// Exit times of B(0, 2r) for planar walks from (round(r), 0), and the tail
/// P(σ > λr²) on the given λ grid.
pub fn exit_time_tail(r: f64, lambdas: &[f64], reps: u64, seed: u64, workers: usize, level: f64) -> Result<ExitTailResult, HarnessError> {
    let ball = BallSpec::centered(2, r)?;
    let walker = BallWalker::new(&ball);
    let start = LatticePoint::xy(r.round() as i64, 0);
    let exit_times = run_replications(reps, workers, |rep| {
        let mut rng = RngStream::for_replication(seed, rep);
        let (_, t) = walker.run(start, &mut rng, |_, _| true)?;
        Ok::<_, HarnessError>(t as u64)
    })?;
    let n = exit_times.len() as f64;
    let points: Vec<(f64, f64)> = lambdas
        .iter()
        .map(|&l| {
            let cut = l * r * r;
            (l, exit_times.iter().filter(|&&t| t as f64 > cut).count() as f64 / n)
        })
        .collect();
    let positive: Vec<&(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).collect();
    let fit = linear_fit(
        &positive.iter().map(|p| p.0).collect::<Vec<_>>(),
        &positive.iter().map(|p| p.1.ln()).collect::<Vec<_>>(),
    );
    let as_f: Vec<f64> = exit_times.iter().map(|&t| t as f64).collect();
    Ok(ExitTailResult { r, points, fit, mean_exit_time: Estimate::from_samples(&as_f, level)?, exit_times })
}

// ---------------------------------------------------------------------------
// block diagnostics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    pub epsilon: f64,
    pub n: u64,
    pub drift_ref: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub index: u64,
    /// The block covers times ]start, end].
    pub start: u64,
    pub end: u64,
    /// First-time vertices occupied during the block.
    pub new_vertices: u64,
    pub drift: i64,
    /// drift / (ε k^{3/4}).
    pub drift_normalized: f64,
    /// max_{t ≤ start} R(t)₁ + ⌊k^{5/8}⌋.
    pub a: i64,
    pub many_new: bool,
    pub advanced: bool,
    pub drift_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub n: u64,
    pub k: u64,
    pub blocks: Vec<BlockRecord>,
    /// First visits at times in ]n, 2n].
    pub first_visits: u64,
    pub distinct: u64,
    pub sum_new: u64,
    /// Fraction of blocks with #V_i ≤ ½k^{3/4}.
    pub frac_few_new: f64,
    pub frac_advanced: f64,
    pub frac_drift_pass: f64,
}

/// ⌊k^{5/8}⌋ in integers.
fn floor_pow_5_8(k: u64) -> i64 {
    let target = (k as u128).pow(5);
    let mut t = (k as f64).powf(0.625).floor() as u128;
    while (t + 1).pow(8) <= target {
        t += 1;
    }
    while t > 0 && t.pow(8) > target {
        t -= 1;
    }
    t as i64
}

/// Splits ]n, 2n] into ⌈n/k⌉ blocks of length k (the last possibly short)
/// and evaluates each one. `trace[t]` is R(t)₁ and `first_visit[t]` says
/// whether R(t) was occupied for the first time at t.
pub fn analyze_blocks(
    trace: &[i64],
    first_visit: &[bool],
    n: u64,
    k: u64,
    epsilon: f64,
    drift_ref: f64,
) -> Result<BlockDiagnostics, HarnessError> {
    let need = 2 * n as usize + 1;
    if trace.len() < need || first_visit.len() < need || k == 0 {
        return Err(HarnessError::InvalidParams(format!("block analysis needs traces of length {need} and k ≥ 1")));
    }
    let k34 = (k as f64).powf(0.75);
    let k58 = floor_pow_5_8(k);
    let mut prefix_max = trace[..=n as usize].iter().copied().max().unwrap();
    let mut blocks = Vec::new();
    let mut start = n;
    let mut index = 0u64;
    while start < 2 * n {
        let end = (start + k).min(2 * n);
        let new_vertices = (start + 1..=end).filter(|&t| first_visit[t as usize]).count() as u64;
        let drift = trace[end as usize] - trace[start as usize];
        let a = prefix_max + k58;
        blocks.push(BlockRecord {
            index,
            start,
            end,
            new_vertices,
            drift,
            drift_normalized: drift as f64 / (epsilon * k34),
            a,
            many_new: new_vertices as f64 > 0.5 * k34,
            advanced: trace[end as usize] > a,
            drift_pass: drift as f64 >= drift_ref,
        });
        prefix_max = prefix_max.max(trace[start as usize + 1..=end as usize].iter().copied().max().unwrap());
        start = end;
        index += 1;
    }
    let nb = blocks.len() as f64;
    let frac = |f: fn(&BlockRecord) -> bool| blocks.iter().filter(|b| f(b)).count() as f64 / nb;
    Ok(BlockDiagnostics {
        n,
        k,
        first_visits: (n as usize + 1..need).filter(|&t| first_visit[t]).count() as u64,
        distinct: first_visit[..need].iter().filter(|&&b| b).count() as u64,
        sum_new: blocks.iter().map(|b| b.new_vertices).sum(),
        frac_few_new: frac(|b| !b.many_new),
        frac_advanced: frac(|b| b.advanced),
        frac_drift_pass: frac(|b| b.drift_pass),
        blocks,
    })
}

/// An excited walk of 2n steps from the origin, with its first-coordinate
/// trace and first-occupation flags.
pub fn erw_trace_with_first_visits(epsilon: f64, n: u64, rng: &mut RngStream) -> Result<(Vec<i64>, Vec<bool>, usize), HarnessError> {
    let params = ErwParams::new(epsilon)?;
    let config = ExternalConfiguration::None;
    let mut visited = VisitedSet::new(&config);
    let len = 2 * n as usize;
    let mut trace = Vec::with_capacity(len + 1);
    let mut first = Vec::with_capacity(len + 1);
    let mut pos = LatticePoint::xyz(0, 0, 0);
    for _ in 0..len {
        let fresh = visited.visit(&pos);
        trace.push(pos.x1());
        first.push(fresh);
        pos = erw_move(rng.uniform(), fresh, params.epsilon()).apply(pos)?;
    }
    trace.push(pos.x1());
    first.push(visited.visit(&pos));
    Ok((trace, first, visited.occupied_count()))
}

pub fn block_diagnostics(p: &BlockParams, seed: u64, rep: u64) -> Result<BlockDiagnostics, HarnessError> {
    let k = validate_blocks(p)?;
    let mut rng = RngStream::for_replication(seed, rep);
    let (trace, first, distinct) = erw_trace_with_first_visits(p.epsilon, p.n, &mut rng)?;
    let d = analyze_blocks(&trace, &first, p.n, k, p.epsilon, p.drift_ref)?;
    debug_assert_eq!(d.distinct as usize, distinct);
    Ok(d)
}

fn validate_blocks(p: &BlockParams) -> Result<u64, HarnessError> {
    ErwParams::new(p.epsilon)?;
    let k = if p.n >= 2 { oracles::block_size(p.n)? } else { 0 };
    if k < 4 {
        return Err(HarnessError::InvalidParams(format!("n = {} too small: block size must be at least 4", p.n)));
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub rep: u64,
    pub seed: u64,
    pub n: u64,
    pub k: u64,
    pub blocks: u64,
    pub first_visits: u64,
    pub sum_new: u64,
    pub frac_few_new: f64,
    pub frac_advanced: f64,
    pub frac_drift_pass: f64,
}

impl Row for BlockRow {
    const HEADER: &'static [&'static str] = &[
        "rep",
        "seed",
        "n",
        "k",
        "blocks",
        "first_visits",
        "sum_new",
        "frac_few_new",
        "frac_advanced",
        "frac_drift_pass",
    ];
    fn cells(&self) -> Vec<Cell> {
        vec![
            self.rep.into(),
            self.seed.into(),
            self.n.into(),
            self.k.into(),
            self.blocks.into(),
            self.first_visits.into(),
            self.sum_new.into(),
            self.frac_few_new.into(),
            self.frac_advanced.into(),
            self.frac_drift_pass.into(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlocksResult {
    pub frac_few_new: Estimate,
    pub frac_advanced: Estimate,
    pub frac_drift_pass: Estimate,
    pub rows: Vec<BlockRow>,
}

pub fn blocks_replication(p: &BlockParams, seed: u64, rep: u64) -> Result<BlockRow, HarnessError> {
    let d = block_diagnostics(p, seed, rep)?;
    Ok(BlockRow {
        rep,
        seed,
        n: d.n,
        k: d.k,
        blocks: d.blocks.len() as u64,
        first_visits: d.first_visits,
        sum_new: d.sum_new,
        frac_few_new: d.frac_few_new,
        frac_advanced: d.frac_advanced,
        frac_drift_pass: d.frac_drift_pass,
    })
}

pub fn summarize_blocks(rows: Vec<BlockRow>, level: f64) -> Result<BlocksResult, HarnessError> {
    let col = |f: fn(&BlockRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    Ok(BlocksResult {
        frac_few_new: Estimate::from_samples(&col(|r| r.frac_few_new), level)?,
        frac_advanced: Estimate::from_samples(&col(|r| r.frac_advanced), level)?,
        frac_drift_pass: Estimate::from_samples(&col(|r| r.frac_drift_pass), level)?,
        rows,
    })
}

pub fn blocks_experiment(p: &BlockParams, reps: u64, seed: u64, workers: usize, level: f64) -> Result<BlocksResult, HarnessError> {
    validate_blocks(p)?;
    let rows = run_replications(reps, workers, |rep| blocks_replication(p, seed, rep))?;
    summarize_blocks(rows, level)
}

// ---------------------------------------------------------------------------
// coupling audit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    /// 0 is allowed here: the two walks then coincide.
    pub epsilon: f64,
    pub n: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    pub rep: u64,
    pub seed: u64,
    pub n: u64,
    pub violations: u64,
    pub min_srw_x1: i64,
    pub deep_excursion: bool,
    pub final_gap: i64,
}

impl Row for CouplingRow {
    const HEADER: &'static [&'static str] = &["rep", "seed", "n", "violations", "min_srw_x1", "deep_excursion", "final_gap"];
    fn cells(&self) -> Vec<Cell> {
        vec![
            self.rep.into(),
            self.seed.into(),
            self.n.into(),
            self.violations.into(),
            self.min_srw_x1.into(),
            self.deep_excursion.into(),
            self.final_gap.into(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingResult {
    pub violations: u64,
    /// P(min_i R'(i)₁ < −n^{5/8}).
    pub p_deep: Estimate,
    pub rows: Vec<CouplingRow>,
}

/// One coupled pair of length n. A violation is a step after which
/// x₁(ERW) < x₁(SRW) or the gap x₁(ERW) − x₁(SRW) shrank.
pub fn coupling_replication(p: &CouplingParams, seed: u64, rep: u64) -> Result<CouplingRow, HarnessError> {
    let params = ErwParams::allowing_zero(p.epsilon)?;
    let config = ExternalConfiguration::None;
    let mut visited = VisitedSet::new(&config);
    let mut rng = RngStream::for_replication(seed, rep);
    let mut erw = LatticePoint::xyz(0, 0, 0);
    let (mut srw_x1, mut gap, mut min_srw, mut violations) = (0i64, 0i64, 0i64, 0u64);
    for _ in 0..p.n {
        let fresh = visited.visit(&erw);
        let (me, ms): (Move, Move) = coupled_moves(rng.uniform(), fresh, params.epsilon());
        erw = me.apply(erw)?;
        srw_x1 += ms.e1_increment();
        let g = erw.x1() - srw_x1;
        if g < gap || g < 0 {
            violations += 1;
        }
        gap = g;
        min_srw = min_srw.min(srw_x1);
    }
    let threshold = (p.n as f64).powf(0.625);
    Ok(CouplingRow {
        rep,
        seed,
        n: p.n,
        violations,
        min_srw_x1: min_srw,
        deep_excursion: (min_srw as f64) < -threshold,
        final_gap: gap,
    })
}

pub fn summarize_coupling(rows: Vec<CouplingRow>, level: f64) -> Result<CouplingResult, HarnessError> {
    let deep = rows.iter().filter(|r| r.deep_excursion).count() as u64;
    Ok(CouplingResult {
        violations: rows.iter().map(|r| r.violations).sum(),
        p_deep: Estimate::proportion(deep, rows.len() as u64, level)?,
        rows,
    })
}

pub fn coupling_audit(p: &CouplingParams, reps: u64, seed: u64, workers: usize, level: f64) -> Result<CouplingResult, HarnessError> {
    ErwParams::allowing_zero(p.epsilon)?;
    let rows = run_replications(reps, workers, |rep| coupling_replication(p, seed, rep))?;
    summarize_coupling(rows, level)
}

// ---------------------------------------------------------------------------
// step-law audit

/// Step counts of excited walks split by the status of the vertex stepped
/// from. Lateral counts are in the order +e₂, −e₂, +e₃, −e₃.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepLaw {
    pub steps_from_new: u64,
    pub plus_e1_from_new: u64,
    pub steps_from_visited: u64,
    pub plus_e1_from_visited: u64,
    pub lateral: [u64; 4],
}

impl StepLaw {
    pub fn lateral_total(&self) -> u64 {
        self.lateral.iter().sum()
    }

    /// Pearson statistic of the lateral counts against uniform (3 d.o.f.).
    pub fn lateral_chi_square(&self) -> f64 {
        let e = self.lateral_total() as f64 / 4.0;
        self.lateral.iter().map(|&o| (o as f64 - e).powi(2) / e).sum()
    }
}

/// Runs excited walks of `walk_len` steps from the origin, on streams
/// (seed, 0), (seed, 1), …, until `total_steps` steps were taken.
pub fn step_law_audit(epsilon: f64, total_steps: u64, walk_len: u64, seed: u64) -> Result<StepLaw, HarnessError> {
    audit(epsilon, walk_len, seed, |_, taken| taken >= total_steps)
}

/// As [`step_law_audit`], stopping once `lateral_steps` lateral steps were
/// taken.
pub fn lateral_law_audit(epsilon: f64, lateral_steps: u64, walk_len: u64, seed: u64) -> Result<StepLaw, HarnessError> {
    audit(epsilon, walk_len, seed, |law, _| law.lateral_total() >= lateral_steps)
}

fn audit<F: Fn(&StepLaw, u64) -> bool>(epsilon: f64, walk_len: u64, seed: u64, done: F) -> Result<StepLaw, HarnessError> {
    let params = ErwParams::new(epsilon)?;
    if walk_len == 0 {
        return Err(HarnessError::InvalidParams("walk length must be positive".into()));
    }
    let config = ExternalConfiguration::None;
    let mut law = StepLaw::default();
    let mut taken = 0u64;
    let mut stream = 0u64;
    while !done(&law, taken) {
        let mut rng = RngStream::new(seed, stream);
        let mut visited = VisitedSet::new(&config);
        let mut pos = LatticePoint::xyz(0, 0, 0);
        for _ in 0..walk_len {
            if done(&law, taken) {
                break;
            }
            let fresh = visited.visit(&pos);
            let mv = erw_move(rng.uniform(), fresh, params.epsilon());
            if fresh {
                law.steps_from_new += 1;
                law.plus_e1_from_new += (mv == Move::PlusE1) as u64;
            } else {
                law.steps_from_visited += 1;
                law.plus_e1_from_visited += (mv == Move::PlusE1) as u64;
            }
            match mv {
                Move::PlusE2 => law.lateral[0] += 1,
                Move::MinusE2 => law.lateral[1] += 1,
                Move::PlusE3 => law.lateral[2] += 1,
                Move::MinusE3 => law.lateral[3] += 1,
                _ => {}
            }
            pos = mv.apply(pos)?;
            taken += 1;
        }
        stream += 1;
    }
    Ok(law)
}

/// Quantile of the chi-square distribution.
pub fn chi_square_quantile(df: f64, p: f64) -> f64 {
    statrs::distribution::ChiSquared::new(df).map_or(f64::NAN, |d| d.inverse_cdf(p))
}

// ---------------------------------------------------------------------------
// spec-driven dispatch

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentParams {
    Speed(SpeedParams),
    Holes { n: u64, m: u64 },
    Hitting(HittingParams),
    AvoidOrigin(AvoidOriginParams),
    VisitTail(VisitTailParams),
    Blocks(BlockParams),
    CouplingAudit(CouplingParams),
}

impl ExperimentParams {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentParams::Speed(_) => "speed",
            ExperimentParams::Holes { .. } => "holes",
            ExperimentParams::Hitting(_) => "hitting",
            ExperimentParams::AvoidOrigin(_) => "avoid_origin",
            ExperimentParams::VisitTail(_) => "visit_tail",
            ExperimentParams::Blocks(_) => "blocks",
            ExperimentParams::CouplingAudit(_) => "coupling_audit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub params: ExperimentParams,
    pub reps: u64,
    pub seed: u64,
    pub workers: usize,
    pub level: f64,
}

/// Everything an experiment produces, flattened for emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub estimates: BTreeMap<String, Estimate>,
    /// Kind-specific summaries (tail tables, fits, oracle values).
    pub details: serde_json::Value,
    pub warnings: Vec<String>,
}

fn report<R: Row>(
    name: &str,
    rows: &[R],
    estimates: Vec<(&str, Estimate)>,
    details: serde_json::Value,
    warnings: Vec<String>,
) -> ExperimentReport {
    let (header, rows) = table(rows);
    ExperimentReport {
        experiment: name.to_string(),
        header,
        rows,
        estimates: estimates.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        details,
        warnings,
    }
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

/// Runs the experiment described by `spec`, checkpointing per-replication
/// rows to `checkpoint` when given.
pub fn run_experiment(spec: &ExperimentSpec, checkpoint: Option<&Path>) -> Result<ExperimentReport, HarnessError> {
    if spec.reps == 0 {
        return Err(HarnessError::NoReplications);
    }
    z_for(spec.level)?;
    let (reps, seed, workers, level) = (spec.reps, spec.seed, spec.workers, spec.level);
    fn go<T, F>(reps: u64, workers: usize, ck: Option<&Path>, f: F) -> Result<Vec<T>, HarnessError>
    where
        T: Send + Serialize + DeserializeOwned,
        F: Fn(u64) -> Result<T, HarnessError> + Sync + Send,
    {
        match ck {
            Some(path) => run_replications_checkpointed(reps, workers, path, f),
            None => run_replications(reps, workers, f),
        }
    }
    let name = spec.params.name();
    Ok(match &spec.params {
        ExperimentParams::Speed(p) => {
            validate_speed(p)?;
            let r = summarize_speed(go(reps, workers, checkpoint, |i| speed_replication(p, seed, i))?, level)?;
            report(
                name,
                &r.rows,
                vec![("mean_speed", r.mean_speed), ("mean_speed_2n", r.mean_speed_2n), ("p_no_progress", r.p_no_progress)],
                serde_json::Value::Null,
                vec![],
            )
        }
        ExperimentParams::Holes { n, m } => {
            let cfg = HoleExperimentConfig { n: *n, m: *m, reps, seed };
            let warnings = cfg.validate()?;
            let rows = go(reps, workers, checkpoint, |rep| {
                let h = holes::hole_replication(*n, *m, seed, rep);
                Ok(HoleRow { rep, seed, n: *n, m: *m, holes: h.holes, distinct_r1: h.distinct_r1, distinct_r2: h.distinct_r2 })
            })?;
            let r = holes::summarize(cfg, rows, warnings, level)?;
            report(
                name,
                &r.rows,
                vec![("p_within_threshold", r.within_threshold), ("mean_holes", r.mean_holes)],
                serde_json::json!({ "mu": r.mu, "threshold": r.threshold, "median_holes": r.median_holes }),
                r.warnings.clone(),
            )
        }
        ExperimentParams::Hitting(p) => {
            validate_hitting(p)?;
            let r = summarize_hitting(p, go(reps, workers, checkpoint, |i| hitting_replication(p, seed, i))?, level)?;
            report(name, &r.rows, vec![("p_mc", r.estimate.p_mc)], json(&r.estimate), vec![])
        }
        ExperimentParams::AvoidOrigin(p) => {
            // checkpointing is per replication; all k share a replication
            let r = if let Some(path) = checkpoint {
                let setups: Vec<(u32, f64, Vec<LatticePoint>, BallSpec)> = p
                    .k_list
                    .iter()
                    .map(|&k| {
                        let r = p.radius(k);
                        Ok((k, r, start_ring(r)?, BallSpec::centered(2, r)?))
                    })
                    .collect::<Result<_, HarnessError>>()?;
                let per_rep: Vec<Vec<AvoidRow>> = run_replications_checkpointed(reps, workers, path, |rep| {
                    let main = RngStream::for_replication(seed, rep);
                    setups
                        .iter()
                        .enumerate()
                        .map(|(j, (k, r, ring, ball))| {
                            let mut rng = main.auxiliary(j as u64);
                            Ok(AvoidRow { rep, seed, k: *k, r: *r, success: avoid_once(*k, ring, ball, &mut rng)? })
                        })
                        .collect()
                })?;
                let meta: Vec<(u32, f64, usize)> = setups.iter().map(|s| (s.0, s.1, s.2.len())).collect();
                summarize_avoid(&meta, per_rep.into_iter().flatten().collect(), level)?
            } else {
                avoid_origin_experiment(p, reps, seed, workers, level)?
            };
            let estimates: Vec<(String, Estimate)> =
                r.levels.iter().map(|l| (format!("p_success_k{}", l.k), l.success)).collect();
            let mut rep = report(
                name,
                &r.rows,
                vec![],
                serde_json::json!({ "levels": json(&r.levels), "fits": json(&r.fits), "best_beta": r.best_beta }),
                vec![],
            );
            rep.estimates = estimates.into_iter().collect();
            rep
        }
        ExperimentParams::VisitTail(p) => {
            validate_visit_tail(p)?;
            let ball = BallSpec::centered(2, p.r)?;
            let rows = go(reps, workers, checkpoint, |rep| {
                let mut rng = RngStream::for_replication(seed, rep);
                let j = visits_before_domain_exit(LatticePoint::xy(0, 0), &ball, 2.0 * p.n_domain, &mut rng, true)?;
                Ok(VisitRow { rep, seed, visits: j as u64 })
            })?;
            let r = summarize_visit_tail(p, rows, level)?;
            report(
                name,
                &r.rows,
                vec![("mean_visits", r.mean_visits), ("escape", r.escape)],
                serde_json::json!({
                    "tail": json(&r.tail),
                    "reference_ratio": r.reference_ratio,
                    "pooled_ratio": r.pooled_ratio,
                }),
                vec![],
            )
        }
        ExperimentParams::Blocks(p) => {
            validate_blocks(p)?;
            let r = summarize_blocks(go(reps, workers, checkpoint, |i| blocks_replication(p, seed, i))?, level)?;
            report(
                name,
                &r.rows,
                vec![
                    ("frac_few_new", r.frac_few_new),
                    ("frac_advanced", r.frac_advanced),
                    ("frac_drift_pass", r.frac_drift_pass),
                ],
                serde_json::json!({ "k": oracles::block_size(p.n)? }),
                vec![],
            )
        }
        ExperimentParams::CouplingAudit(p) => {
            ErwParams::allowing_zero(p.epsilon)?;
            let r = summarize_coupling(go(reps, workers, checkpoint, |i| coupling_replication(p, seed, i))?, level)?;
            report(
                name,
                &r.rows,
                vec![("p_deep_excursion", r.p_deep)],
                serde_json::json!({ "violations": r.violations }),
                vec![],
            )
        }
    })
}
