//! The two-walk hole statistic: sites reached by a short planar walk R₂ of
//! length m that a long walk R₁ of length n, from the same origin, never
//! reaches.

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{self, Estimate, HarnessError};
use crate::lattice::LatticePoint;
use crate::rng::RngStream;
use crate::walk::{WalkError, WalkPath};

/// Walks longer than this would not fit the packed site keys.
pub const MAX_HOLE_WALK: u64 = (1 << 31) - 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HoleError {
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error("both walks must be planar, got dimensions {0} and {1}")]
    Dimension(usize, usize),
    #[error("walks must share their start, got {0:?} and {1:?}")]
    StartMismatch(LatticePoint, LatticePoint),
    #[error("n must be at least 3 (log log n), got {0}")]
    ShortLongWalk(u64),
    #[error("walk length {0} exceeds {MAX_HOLE_WALK}")]
    TooLong(u64),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleCount {
    pub holes: u64,
    pub distinct_r1: u64,
    pub distinct_r2: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleExperimentConfig {
    pub n: u64,
    pub m: u64,
    pub reps: u64,
    pub seed: u64,
}

impl HoleExperimentConfig {
    /// log log m / log log n, defined for m ≥ 3.
    pub fn mu(&self) -> Option<f64> {
        if self.n < 3 || self.m < 3 {
            return None;
        }
        Some((self.m as f64).ln().ln() / (self.n as f64).ln().ln())
    }

    /// ⌊m^{3/4}⌋, exact in integers.
    pub fn threshold(&self) -> u64 {
        let m = self.m as u128;
        let cube = m * m * m;
        let mut t = (self.m as f64).powf(0.75).floor() as u128;
        while (t + 1).pow(4) <= cube {
            t += 1;
        }
        while t > 0 && t.pow(4) > cube {
            t -= 1;
        }
        t as u64
    }

    /// Hard errors, then soft warnings.
    pub fn validate(&self) -> Result<Vec<String>, HoleError> {
        if self.n < 3 {
            return Err(HoleError::ShortLongWalk(self.n));
        }
        for len in [self.n, self.m] {
            if len > MAX_HOLE_WALK {
                return Err(HoleError::TooLong(len));
            }
        }
        if self.reps == 0 {
            return Err(HarnessError::NoReplications.into());
        }
        let mut warnings = Vec::new();
        match self.mu() {
            None => warnings.push(format!("m = {} < 3: mu is undefined", self.m)),
            Some(mu) if !(0.5..=1.0).contains(&mu) => {
                warnings.push(format!("mu = {mu:.4} lies outside [1/2, 1]"))
            }
            Some(_) => {}
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleRow {
    pub rep: u64,
    pub seed: u64,
    pub n: u64,
    pub m: u64,
    pub holes: u64,
    pub distinct_r1: u64,
    pub distinct_r2: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleExperiment {
    pub config: HoleExperimentConfig,
    pub mu: Option<f64>,
    pub threshold: u64,
    /// P(holes ≤ threshold).
    pub within_threshold: Estimate,
    pub mean_holes: Estimate,
    pub median_holes: f64,
    pub rows: Vec<HoleRow>,
    pub warnings: Vec<String>,
}

fn range_of(path: &WalkPath) -> Result<FxHashSet<LatticePoint>, WalkError> {
    Ok(path.require_positions()?.iter().copied().collect())
}

/// Holes of `path2` with respect to `path1`.
pub fn count_holes(path1: &WalkPath, path2: &WalkPath) -> Result<HoleCount, HoleError> {
    if path1.dim() != 2 || path2.dim() != 2 {
        return Err(HoleError::Dimension(path1.dim(), path2.dim()));
    }
    if path1.start() != path2.start() {
        return Err(HoleError::StartMismatch(path1.start(), path2.start()));
    }
    let r1 = range_of(path1)?;
    let r2 = range_of(path2)?;
    let holes = r2.iter().filter(|v| !r1.contains(v)).count() as u64;
    Ok(HoleCount { holes, distinct_r1: r1.len() as u64, distinct_r2: r2.len() as u64 })
}

/// Number of distinct sites a path occupies.
pub fn distinct_sites(path: &WalkPath) -> usize {
    path.distinct_count()
}

#[inline]
fn key(x: i64, y: i64) -> u64 {
    (((x + (1 << 31)) as u64) << 32) | (y + (1 << 31)) as u64
}

#[inline]
fn quarter_step(rng: &mut RngStream, x: &mut i64, y: &mut i64) {
    match rng.next_u64() >> 62 {
        0 => *x -= 1,
        1 => *x += 1,
        2 => *y += 1,
        _ => *y -= 1,
    }
}

/// One replication without storing either path. R₁ uses the replication
/// stream and R₂ its first auxiliary stream, so the result equals
/// [`count_holes`] on the corresponding recorded walks.
pub fn hole_replication(n: u64, m: u64, seed: u64, rep: u64) -> HoleCount {
    let mut r1_rng = RngStream::for_replication(seed, rep);
    let mut r2_rng = r1_rng.auxiliary(0);

    let mut r2: FxHashSet<u64> = FxHashSet::default();
    let (mut x, mut y) = (0i64, 0i64);
    r2.insert(key(0, 0));
    for _ in 0..m {
        quarter_step(&mut r2_rng, &mut x, &mut y);
        r2.insert(key(x, y));
    }

    let mut r1: FxHashSet<u64> = FxHashSet::default();
    r1.reserve((n as usize / 4).min(1 << 24));
    let mut covered = 0u64;
    let (mut x, mut y) = (0i64, 0i64);
    let mut mark = |k: u64, r1: &mut FxHashSet<u64>| {
        if r1.insert(k) && r2.contains(&k) {
            covered += 1;
        }
    };
    mark(key(0, 0), &mut r1);
    for _ in 0..n {
        quarter_step(&mut r1_rng, &mut x, &mut y);
        mark(key(x, y), &mut r1);
    }
    let distinct_r2 = r2.len() as u64;
    HoleCount { holes: distinct_r2 - covered, distinct_r1: r1.len() as u64, distinct_r2 }
}

pub fn run_hole_experiment(
    config: &HoleExperimentConfig,
    workers: usize,
    level: f64,
) -> Result<HoleExperiment, HoleError> {
    let warnings = config.validate()?;
    let c = *config;
    let rows: Vec<HoleRow> = harness::run_replications(c.reps, workers, |rep| {
        let h = hole_replication(c.n, c.m, c.seed, rep);
        Ok::<_, HarnessError>(HoleRow {
            rep,
            seed: c.seed,
            n: c.n,
            m: c.m,
            holes: h.holes,
            distinct_r1: h.distinct_r1,
            distinct_r2: h.distinct_r2,
        })
    })?;
    Ok(summarize(c, rows, warnings, level)?)
}

pub fn summarize(
    config: HoleExperimentConfig,
    rows: Vec<HoleRow>,
    warnings: Vec<String>,
    level: f64,
) -> Result<HoleExperiment, HarnessError> {
    let threshold = config.threshold();
    let within = rows.iter().filter(|r| r.holes <= threshold).count() as u64;
    let holes: Vec<f64> = rows.iter().map(|r| r.holes as f64).collect();
    Ok(HoleExperiment {
        config,
        mu: config.mu(),
        threshold,
        within_threshold: Estimate::proportion(within, rows.len() as u64, level)?,
        mean_holes: Estimate::from_samples(&holes, level)?,
        median_holes: harness::median(&holes),
        rows,
        warnings,
    })
}
