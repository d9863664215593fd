//! Stopping-time machinery over paths: visit counts to a ball pair
//! B(x,r)/B(x,2r), exit times, hit-before-exit events, excursions
//! conditioned on their exit point, and unvisited-site counts.
//!
//! "Exit" always means the first time the walk stands strictly outside the
//! closed outer ball.

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jump::{admissible_half, SquareJumper};
use crate::lattice::{BallSpec, LatticeError, LatticePoint, Which};
use crate::rng::RngStream;
use crate::walk::{srw_move, WalkError, WalkPath};

/// Site budget for enumerating a ball in [`unvisited_in_ball`].
pub const UNVISITED_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExcursionError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error("stop index {stop} exceeds path length {len}")]
    StopBeyondPath { stop: usize, len: usize },
    #[error("start {0:?} lies outside the outer ball")]
    StartOutside(LatticePoint),
    #[error("records refer to different balls")]
    MixedBalls,
    #[error("no excursion exited at {x_out:?} within {attempts} attempts")]
    AttemptsExhausted { x_out: LatticePoint, attempts: u64 },
}

/// Entry/exit bookkeeping for one walk and one ball pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub ball: BallSpec,
    /// (τ_in, τ_out) per visit; τ_out is `None` when the exit was not
    /// observed by the stopping time.
    pub tau_pairs: Vec<(usize, Option<usize>)>,
    pub visits: usize,
    pub truncated: bool,
}

/// Incremental visit counter fed one position at a time.
#[derive(Debug, Clone)]
pub struct VisitTracker {
    center: LatticePoint,
    inner_sq: i128,
    outer_sq: i128,
    in_visit: bool,
    pairs: Vec<(usize, Option<usize>)>,
}

impl VisitTracker {
    pub fn new(ball: &BallSpec) -> Self {
        VisitTracker {
            center: ball.center(),
            inner_sq: ball.radius_sq_floor(Which::Inner),
            outer_sq: ball.radius_sq_floor(Which::Outer),
            in_visit: false,
            pairs: Vec::new(),
        }
    }

    /// Feeds the position at time `t`. New entries are only opened when
    /// `allow_entry` is set.
    pub fn observe(&mut self, t: usize, p: &LatticePoint, allow_entry: bool) -> Result<(), LatticeError> {
        let d = self.center.dist_sq(p)?;
        if !self.in_visit {
            if allow_entry && d <= self.inner_sq {
                self.pairs.push((t, None));
                self.in_visit = true;
            }
        } else if d > self.outer_sq {
            self.pairs.last_mut().unwrap().1 = Some(t);
            self.in_visit = false;
        }
        Ok(())
    }

    /// Between an entry and the matching exit.
    pub fn in_visit(&self) -> bool {
        self.in_visit
    }

    pub fn visits(&self) -> usize {
        self.pairs.len()
    }

    pub fn into_record(self, ball: BallSpec) -> VisitRecord {
        let truncated = self.in_visit;
        VisitRecord { ball, visits: self.pairs.len(), tau_pairs: self.pairs, truncated }
    }
}

/// Visits of `path` to `ball` before time `stop`.
///
/// τ_in(j) is the first time ≥ τ_out(j−1) inside the inner ball, τ_out(j)
/// the first later time outside the outer ball; only entries strictly before
/// `stop` count, and only positions up to `stop` are examined.
pub fn count_visits(path: &WalkPath, ball: &BallSpec, stop: usize) -> Result<VisitRecord, ExcursionError> {
    if stop > path.len() {
        return Err(ExcursionError::StopBeyondPath { stop, len: path.len() });
    }
    if path.dim() != ball.dim() {
        return Err(LatticeError::DimensionMismatch { left: path.dim(), right: ball.dim() }.into());
    }
    let positions = path.require_positions()?;
    let mut tracker = VisitTracker::new(ball);
    for (t, p) in positions[..=stop].iter().enumerate() {
        tracker.observe(t, p, t < stop)?;
    }
    Ok(tracker.into_record(*ball))
}

/// Σ J over records sharing one ball.
pub fn total_visits(records: &[VisitRecord]) -> Result<usize, ExcursionError> {
    if let Some(first) = records.first() {
        if records.iter().any(|r| r.ball != first.ball) {
            return Err(ExcursionError::MixedBalls);
        }
    }
    Ok(records.iter().map(|r| r.visits).sum())
}

/// First index at which the path is outside the closed outer ball.
pub fn exit_time(path: &WalkPath, ball: &BallSpec) -> Result<Option<usize>, ExcursionError> {
    let positions = path.require_positions()?;
    if !ball.contains(&path.start(), Which::Outer)? {
        return Err(ExcursionError::StartOutside(path.start()));
    }
    let outer_sq = ball.radius_sq_floor(Which::Outer);
    let c = ball.center();
    for (t, p) in positions.iter().enumerate() {
        if c.dist_sq(p)? > outer_sq {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// A simple walk confined to the outer member of a ball pair, stepping until
/// it leaves. Works in 2D and 3D.
#[derive(Debug, Clone)]
pub struct BallWalker {
    center: LatticePoint,
    outer_sq: i128,
}

impl BallWalker {
    pub fn new(ball: &BallSpec) -> Self {
        BallWalker { center: ball.center(), outer_sq: ball.radius_sq_floor(Which::Outer) }
    }

    pub fn inside(&self, p: &LatticePoint) -> Result<bool, LatticeError> {
        Ok(self.center.dist_sq(p)? <= self.outer_sq)
    }

    /// Walks from `start` until the first exit, calling `visit(t, p)` on each
    /// position including the start and the exit position. `visit` may stop
    /// the walk early by returning false. Returns the last position and its
    /// time.
    pub fn run<F>(&self, start: LatticePoint, rng: &mut RngStream, mut visit: F) -> Result<(LatticePoint, usize), LatticeError>
    where
        F: FnMut(usize, &LatticePoint) -> bool,
    {
        let dim = start.dim();
        let mut p = start;
        let mut t = 0usize;
        if !visit(t, &p) {
            return Ok((p, t));
        }
        while self.center.dist_sq(&p)? <= self.outer_sq {
            let mv = srw_move(rng.uniform(), dim);
            p = mv.apply(p)?;
            t += 1;
            if !visit(t, &p) {
                break;
            }
        }
        Ok((p, t))
    }
}

/// Simulates a simple walk from `start`; true iff it reaches `target` strictly
/// before it first exits the outer ball of `outer`.
pub fn hit_before_exit(
    start: LatticePoint,
    target: LatticePoint,
    outer: &BallSpec,
    rng: &mut RngStream,
) -> Result<bool, ExcursionError> {
    if start.dim() != target.dim() || start.dim() != outer.dim() {
        return Err(LatticeError::DimensionMismatch { left: start.dim(), right: outer.dim() }.into());
    }
    let walker = BallWalker::new(outer);
    if !walker.inside(&start)? {
        return Err(ExcursionError::StartOutside(start));
    }
    if start.dim() == 2 {
        return Ok(hit_before_exit_2d(start, target, outer, rng));
    }
    let mut hit = false;
    walker.run(start, rng, |_, p| {
        if *p == target {
            hit = true;
            false
        } else {
            true
        }
    })?;
    Ok(hit && walker.inside(&target)?)
}

/// 2D specialisation on raw coordinates; same stream consumption as the
/// generic path (one uniform per step, quarter partition).
fn hit_before_exit_2d(start: LatticePoint, target: LatticePoint, outer: &BallSpec, rng: &mut RngStream) -> bool {
    let (cx, cy) = (outer.center().coord(0), outer.center().coord(1));
    let outer_sq = outer.radius_sq_floor(Which::Outer);
    let (tx, ty) = (target.coord(0) - cx, target.coord(1) - cy);
    let (mut x, mut y) = (start.coord(0) - cx, start.coord(1) - cy);
    if (tx as i128).pow(2) + (ty as i128).pow(2) > outer_sq {
        return false;
    }
    let outer_sq = outer_sq as i64;
    loop {
        if x == tx && y == ty {
            return true;
        }
        if x * x + y * y > outer_sq {
            return false;
        }
        match rng.next_u64() >> 62 {
            0 => x -= 1,
            1 => x += 1,
            2 => y += 1,
            _ => y -= 1,
        }
    }
}

/// A walk from `x_in` to its first exit from the outer ball, conditioned
/// (by rejection) to exit at `x_out`.
#[derive(Debug, Clone)]
pub struct ExcursionSample {
    pub x_in: LatticePoint,
    pub x_out: LatticePoint,
    pub path: WalkPath,
    pub attempts: u64,
}

pub fn sample_conditioned_excursion(
    x_in: LatticePoint,
    x_out: LatticePoint,
    ball: &BallSpec,
    rng: &mut RngStream,
    max_attempts: u64,
) -> Result<ExcursionSample, ExcursionError> {
    let walker = BallWalker::new(ball);
    if !walker.inside(&x_in)? {
        return Err(ExcursionError::StartOutside(x_in));
    }
    x_out.dist_sq(&x_in)?;
    let mut buf: Vec<LatticePoint> = Vec::new();
    for attempt in 1..=max_attempts {
        buf.clear();
        let (last, _) = walker.run(x_in, rng, |_, p| {
            buf.push(*p);
            true
        })?;
        if last == x_out {
            return Ok(ExcursionSample {
                x_in,
                x_out,
                path: WalkPath::from_positions(std::mem::take(&mut buf))?,
                attempts: attempt,
            });
        }
    }
    Err(ExcursionError::AttemptsExhausted { x_out, attempts: max_attempts })
}

/// Inner-ball sites occupied by none of the paths.
pub fn unvisited_in_ball(paths: &[WalkPath], ball: &BallSpec) -> Result<usize, ExcursionError> {
    let mut remaining: FxHashSet<LatticePoint> =
        ball.sites(Which::Inner, UNVISITED_BUDGET)?.into_iter().collect();
    for path in paths {
        if path.dim() != ball.dim() {
            return Err(LatticeError::DimensionMismatch { left: path.dim(), right: ball.dim() }.into());
        }
        for p in path.require_positions()? {
            remaining.remove(p);
            if remaining.is_empty() {
                return Ok(0);
            }
        }
    }
    Ok(remaining.len())
}

/// [`hit_before_exit`] for planar walks with far-from-target stretches
/// replaced by exact square jumps. Same law, different use of the stream.
pub fn hit_before_exit_accelerated(
    start: LatticePoint,
    target: LatticePoint,
    outer: &BallSpec,
    rng: &mut RngStream,
) -> Result<bool, ExcursionError> {
    if start.dim() != 2 || target.dim() != 2 || outer.dim() != 2 {
        return Err(LatticeError::DimensionMismatch { left: start.dim(), right: outer.dim() }.into());
    }
    if !outer.contains(&start, Which::Outer)? {
        return Err(ExcursionError::StartOutside(start));
    }
    let jumper = SquareJumper::shared();
    let (cx, cy) = (outer.center().coord(0), outer.center().coord(1));
    let outer_sq = outer.radius_sq_floor(Which::Outer);
    let (tx, ty) = (target.coord(0) - cx, target.coord(1) - cy);
    if (tx as i128).pow(2) + (ty as i128).pow(2) > outer_sq {
        return Ok(false);
    }
    let (mut x, mut y) = (start.coord(0) - cx, start.coord(1) - cy);
    let outer_sq = outer_sq as i64;
    loop {
        if x == tx && y == ty {
            return Ok(true);
        }
        if x * x + y * y > outer_sq {
            return Ok(false);
        }
        let gap = (x - tx).abs().max((y - ty).abs()) - 1;
        let half = gap.min(admissible_half(x, y, f64::NEG_INFINITY, outer_sq as i128));
        if let Some(table) = jumper.fitting(half) {
            let (dx, dy) = table.sample(rng);
            x += dx;
            y += dy;
            continue;
        }
        match rng.next_u64() >> 62 {
            0 => x -= 1,
            1 => x += 1,
            2 => y += 1,
            _ => y -= 1,
        }
    }
}

/// Number of visits J of a planar simple walk from `start` to the ball
/// pair, counted until the walk first leaves the closed disc of radius
/// `domain` about the ball's center. Stretches spent outside a visit and
/// away from the inner ball are replaced by exact square jumps when
/// `accelerate` is set.
pub fn visits_before_domain_exit(
    start: LatticePoint,
    ball: &BallSpec,
    domain: f64,
    rng: &mut RngStream,
    accelerate: bool,
) -> Result<usize, ExcursionError> {
    if start.dim() != 2 || ball.dim() != 2 {
        return Err(LatticeError::DimensionMismatch { left: start.dim(), right: ball.dim() }.into());
    }
    let dom = BallSpec::new(ball.center(), domain)?;
    if !dom.contains(&start, Which::Inner)? {
        return Err(ExcursionError::StartOutside(start));
    }
    let jumper = SquareJumper::shared();
    let (cx, cy) = (ball.center().coord(0), ball.center().coord(1));
    let inner_sq = ball.radius_sq_floor(Which::Inner) as i64;
    let outer_sq = ball.radius_sq_floor(Which::Outer) as i64;
    let dom_sq = dom.radius_sq_floor(Which::Inner);
    let (mut x, mut y) = (start.coord(0) - cx, start.coord(1) - cy);
    let mut in_visit = false;
    let mut visits = 0usize;
    loop {
        let d2 = x * x + y * y;
        if d2 as i128 > dom_sq {
            return Ok(visits);
        }
        if in_visit {
            if d2 > outer_sq {
                in_visit = false;
            }
        } else if d2 <= inner_sq {
            in_visit = true;
            visits += 1;
        }
        if accelerate && !in_visit {
            let half = admissible_half(x, y, ball.r(), dom_sq);
            if let Some(table) = jumper.fitting(half) {
                let (dx, dy) = table.sample(rng);
                x += dx;
                y += dy;
                continue;
            }
        }
        match rng.next_u64() >> 62 {
            0 => x -= 1,
            1 => x += 1,
            2 => y += 1,
            _ => y -= 1,
        }
    }
}
