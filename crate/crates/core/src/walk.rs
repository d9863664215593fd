//! Seedable walk steppers: simple random walk on Z² and Z³, the ε-excited
//! random walk with its visited-set memory and external configuration, and
//! the monotone coupling of the excited walk to a simple walk.
//!
//! Every stepper consumes exactly one uniform variate per step and maps it
//! to a move through one fixed interval partition:
//!
//! | interval (3D)      | move |
//! |--------------------|------|
//! | [0, 1/6)           | −e₁  |
//! | [1/6, 2/6)         | +e₁  |
//! | [2/6, 3/6)         | +e₂  |
//! | [3/6, 4/6)         | −e₂  |
//! | [4/6, 5/6)         | +e₃  |
//! | [5/6, 1)           | −e₃  |
//!
//! In 2D the same order is used with quarters. From a new vertex the excited
//! walk moves the −e₁/+e₁ boundary down to 1/6 − ε.

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{LatticeError, LatticePoint};
use crate::rng::RngStream;

/// Largest number of steps a walk may store position by position.
pub const FULL_RECORD_LIMIT: usize = 10_000_000;

const PACK_BITS: u32 = 21;
const PACK_LIMIT: i64 = 1 << 20;

const SIXTHS: [f64; 5] = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0, 4.0 / 6.0, 5.0 / 6.0];
const QUARTERS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("epsilon must satisfy 0 < ε ≤ 1/6, got {0}")]
    InvalidEpsilon(f64),
    #[error("the excited walk is defined on Z³, got a {0}-dimensional point")]
    NotThreeDimensional(usize),
    #[error("walk kind needs dimension {expected}, start has dimension {got}")]
    StartDimension { expected: usize, got: usize },
    #[error("full recording of {requested} steps exceeds the limit of {limit}")]
    MemoryBudget { requested: usize, limit: usize },
    #[error("consecutive positions {0:?} and {1:?} are not lattice neighbors")]
    NotAPath(LatticePoint, LatticePoint),
    #[error("path has no recorded positions")]
    NotRecorded,
}

/// Excitation strength of the excited walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErwParams {
    epsilon: f64,
}

impl ErwParams {
    pub const MAX_EPSILON: f64 = 1.0 / 6.0;

    pub fn new(epsilon: f64) -> Result<Self, WalkError> {
        if !(epsilon > 0.0 && epsilon <= Self::MAX_EPSILON) {
            return Err(WalkError::InvalidEpsilon(epsilon));
        }
        Ok(ErwParams { epsilon })
    }

    /// Like [`ErwParams::new`] but also admits ε = 0, under which the excited
    /// walk coincides with the simple walk. Only the coupling audit uses it.
    pub fn allowing_zero(epsilon: f64) -> Result<Self, WalkError> {
        if epsilon == 0.0 {
            return Ok(ErwParams { epsilon });
        }
        Self::new(epsilon)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Vertices that count as visited before the walk starts.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ExternalConfiguration {
    #[default]
    None,
    /// Every point with x₁ ≤ threshold.
    HalfSpace(i64),
    Explicit(FxHashSet<LatticePoint>),
}

impl ExternalConfiguration {
    pub fn explicit<I: IntoIterator<Item = LatticePoint>>(points: I) -> Self {
        ExternalConfiguration::Explicit(points.into_iter().collect())
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        match self {
            ExternalConfiguration::None => false,
            ExternalConfiguration::HalfSpace(t) => p.x1() <= *t,
            ExternalConfiguration::Explicit(set) => set.contains(p),
        }
    }
}

/// The walk's memory: vertices it has occupied, plus the external
/// configuration.
#[derive(Debug, Clone)]
pub struct VisitedSet<'c> {
    packed: FxHashSet<u64>,
    wide: FxHashSet<[i64; 3]>,
    config: &'c ExternalConfiguration,
}

#[inline]
fn pack(p: &LatticePoint) -> Option<u64> {
    let mut key = 0u64;
    for axis in 0..3 {
        let c = p.coord(axis);
        if c <= -PACK_LIMIT || c >= PACK_LIMIT {
            return None;
        }
        key |= ((c + PACK_LIMIT) as u64) << (PACK_BITS * axis as u32);
    }
    Some(key)
}

impl<'c> VisitedSet<'c> {
    pub fn new(config: &'c ExternalConfiguration) -> Self {
        VisitedSet { packed: FxHashSet::default(), wide: FxHashSet::default(), config }
    }

    pub fn with_capacity(config: &'c ExternalConfiguration, capacity: usize) -> Self {
        let mut packed = FxHashSet::default();
        packed.reserve(capacity);
        VisitedSet { packed, wide: FxHashSet::default(), config }
    }

    pub fn config(&self) -> &ExternalConfiguration {
        self.config
    }

    /// Marks `p` as occupied. Returns true iff `p` was new: never occupied
    /// before and not covered by the external configuration.
    #[inline]
    pub fn visit(&mut self, p: &LatticePoint) -> bool {
        let first = self.occupy(p);
        first && !self.config.contains(p)
    }

    /// Records occupation only; true on first occupation.
    #[inline]
    pub fn occupy(&mut self, p: &LatticePoint) -> bool {
        match pack(p) {
            Some(k) => self.packed.insert(k),
            None => self.wide.insert([p.coord(0), p.coord(1), p.coord(2)]),
        }
    }

    pub fn was_occupied(&self, p: &LatticePoint) -> bool {
        match pack(p) {
            Some(k) => self.packed.contains(&k),
            None => self.wide.contains(&[p.coord(0), p.coord(1), p.coord(2)]),
        }
    }

    /// Visited in the model's sense: occupied or in the configuration.
    pub fn is_visited(&self, p: &LatticePoint) -> bool {
        self.was_occupied(p) || self.config.contains(p)
    }

    /// Number of distinct vertices the walk itself occupied.
    pub fn occupied_count(&self) -> usize {
        self.packed.len() + self.wide.len()
    }
}

/// One of the 2d axis moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    MinusE1,
    PlusE1,
    PlusE2,
    MinusE2,
    PlusE3,
    MinusE3,
}

impl Move {
    /// Moves in partition order.
    pub const ORDER: [Move; 6] =
        [Move::MinusE1, Move::PlusE1, Move::PlusE2, Move::MinusE2, Move::PlusE3, Move::MinusE3];

    pub fn axis(self) -> usize {
        match self {
            Move::MinusE1 | Move::PlusE1 => 0,
            Move::PlusE2 | Move::MinusE2 => 1,
            Move::PlusE3 | Move::MinusE3 => 2,
        }
    }

    pub fn sign(self) -> i64 {
        match self {
            Move::PlusE1 | Move::PlusE2 | Move::PlusE3 => 1,
            _ => -1,
        }
    }

    /// Change of the first coordinate.
    pub fn e1_increment(self) -> i64 {
        if self.axis() == 0 {
            self.sign()
        } else {
            0
        }
    }

    pub fn is_lateral(self) -> bool {
        self.axis() != 0
    }

    pub fn apply(self, p: LatticePoint) -> Result<LatticePoint, LatticeError> {
        p.offset(self.axis(), self.sign())
    }
}

#[inline]
fn partition_index(u: f64, thresholds: &[f64]) -> usize {
    thresholds.iter().take_while(|&&t| u >= t).count()
}

/// Simple-walk move for a uniform `u` in dimension `dim`.
#[inline]
pub fn srw_move(u: f64, dim: usize) -> Move {
    if dim == 2 {
        Move::ORDER[partition_index(u, &QUARTERS)]
    } else {
        Move::ORDER[partition_index(u, &SIXTHS)]
    }
}

/// Excited-walk move for a uniform `u`. From a visited vertex this is the
/// simple-walk move; from a new vertex the −e₁ interval shrinks to
/// [0, 1/6 − ε).
#[inline]
pub fn erw_move(u: f64, from_new: bool, epsilon: f64) -> Move {
    if from_new {
        let mut t = SIXTHS;
        t[0] = SIXTHS[0] - epsilon;
        Move::ORDER[partition_index(u, &t)]
    } else {
        Move::ORDER[partition_index(u, &SIXTHS)]
    }
}

/// Both moves of the coupled pair for one shared uniform.
pub fn coupled_moves(u: f64, erw_from_new: bool, epsilon: f64) -> (Move, Move) {
    (erw_move(u, erw_from_new, epsilon), srw_move(u, 3))
}

/// One simple-walk step from `position`.
pub fn srw_step(position: LatticePoint, rng: &mut RngStream) -> Result<LatticePoint, WalkError> {
    let mv = srw_move(rng.uniform(), position.dim());
    Ok(mv.apply(position)?)
}

/// One excited-walk step. The current position is marked occupied first;
/// the returned flag says whether it was new at that moment.
pub fn erw_step(
    position: LatticePoint,
    visited: &mut VisitedSet<'_>,
    params: &ErwParams,
    rng: &mut RngStream,
) -> Result<(LatticePoint, bool), WalkError> {
    let (next, _, was_new) = erw_step_detailed(position, visited, params, rng)?;
    Ok((next, was_new))
}

/// [`erw_step`] that also reports the move taken.
pub fn erw_step_detailed(
    position: LatticePoint,
    visited: &mut VisitedSet<'_>,
    params: &ErwParams,
    rng: &mut RngStream,
) -> Result<(LatticePoint, Move, bool), WalkError> {
    if position.dim() != 3 {
        return Err(WalkError::NotThreeDimensional(position.dim()));
    }
    let was_new = visited.visit(&position);
    let mv = erw_move(rng.uniform(), was_new, params.epsilon);
    Ok((mv.apply(position)?, mv, was_new))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledStep {
    pub erw_move: Move,
    pub srw_move: Move,
    pub erw_to: LatticePoint,
    pub srw_to: LatticePoint,
    pub erw_was_new: bool,
}

/// Advances an excited walk and a simple walk with one shared uniform.
/// The excited walk's e₁-increment is never below the simple walk's.
pub fn coupled_step(
    position_erw: LatticePoint,
    position_srw: LatticePoint,
    visited: &mut VisitedSet<'_>,
    params: &ErwParams,
    rng: &mut RngStream,
) -> Result<CoupledStep, WalkError> {
    for p in [&position_erw, &position_srw] {
        if p.dim() != 3 {
            return Err(WalkError::NotThreeDimensional(p.dim()));
        }
    }
    let erw_was_new = visited.visit(&position_erw);
    let (erw_move, srw_move) = coupled_moves(rng.uniform(), erw_was_new, params.epsilon);
    Ok(CoupledStep {
        erw_move,
        srw_move,
        erw_to: erw_move.apply(position_erw)?,
        srw_to: srw_move.apply(position_srw)?,
        erw_was_new,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WalkKind {
    Srw2,
    Srw3,
    Erw(ErwParams),
}

impl WalkKind {
    pub fn dim(&self) -> usize {
        match self {
            WalkKind::Srw2 => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordMode {
    /// Keep every position.
    Full,
    /// Keep only the x₁ trace and summary counts.
    TraceOnly,
}

/// A recorded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    start: LatticePoint,
    end: LatticePoint,
    positions: Option<Vec<LatticePoint>>,
    length: usize,
    first_coord_trace: Vec<i64>,
    distinct_count: usize,
}

impl WalkPath {
    /// Builds a path from explicit positions, checking that consecutive
    /// positions are lattice neighbors.
    pub fn from_positions(positions: Vec<LatticePoint>) -> Result<Self, WalkError> {
        let start = *positions.first().ok_or(WalkError::NotRecorded)?;
        let mut seen = FxHashSet::default();
        for w in positions.windows(2) {
            if w[0].l1_dist(&w[1])? != 1 {
                return Err(WalkError::NotAPath(w[0], w[1]));
            }
        }
        for p in &positions {
            seen.insert(*p);
        }
        Ok(WalkPath {
            start,
            end: *positions.last().unwrap(),
            length: positions.len() - 1,
            first_coord_trace: positions.iter().map(|p| p.x1()).collect(),
            distinct_count: seen.len(),
            positions: Some(positions),
        })
    }

    pub fn start(&self) -> LatticePoint {
        self.start
    }

    pub fn end(&self) -> LatticePoint {
        self.end
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn dim(&self) -> usize {
        self.start.dim()
    }

    /// Positions at times 0..=len, if recorded.
    pub fn positions(&self) -> Option<&[LatticePoint]> {
        self.positions.as_deref()
    }

    pub fn require_positions(&self) -> Result<&[LatticePoint], WalkError> {
        self.positions().ok_or(WalkError::NotRecorded)
    }

    /// x₁ at times 0..=len.
    pub fn first_coord_trace(&self) -> &[i64] {
        &self.first_coord_trace
    }

    pub fn distinct_count(&self) -> usize {
        self.distinct_count
    }

    /// Appends positions that continue the path.
    pub fn extend(&mut self, more: &[LatticePoint]) -> Result<(), WalkError> {
        let positions = self.positions.as_mut().ok_or(WalkError::NotRecorded)?;
        let mut seen: FxHashSet<LatticePoint> = positions.iter().copied().collect();
        for &p in more {
            let last = *positions.last().unwrap();
            if last.l1_dist(&p)? != 1 {
                return Err(WalkError::NotAPath(last, p));
            }
            positions.push(p);
            seen.insert(p);
            self.first_coord_trace.push(p.x1());
        }
        self.length = positions.len() - 1;
        self.end = *positions.last().unwrap();
        self.distinct_count = seen.len();
        Ok(())
    }
}

/// Runs a walk of exactly `length` steps from `start`.
pub fn run_walk(
    kind: WalkKind,
    length: usize,
    start: LatticePoint,
    config: &ExternalConfiguration,
    rng: &mut RngStream,
    record: RecordMode,
) -> Result<WalkPath, WalkError> {
    if start.dim() != kind.dim() {
        return Err(WalkError::StartDimension { expected: kind.dim(), got: start.dim() });
    }
    if record == RecordMode::Full && length > FULL_RECORD_LIMIT {
        return Err(WalkError::MemoryBudget { requested: length, limit: FULL_RECORD_LIMIT });
    }
    let mut visited = VisitedSet::new(config);
    let mut positions = match record {
        RecordMode::Full => {
            let mut v = Vec::with_capacity(length + 1);
            v.push(start);
            Some(v)
        }
        RecordMode::TraceOnly => None,
    };
    let mut trace = Vec::with_capacity(length + 1);
    trace.push(start.x1());
    let mut pos = start;
    for _ in 0..length {
        pos = match kind {
            WalkKind::Srw2 | WalkKind::Srw3 => {
                visited.occupy(&pos);
                srw_step(pos, rng)?
            }
            WalkKind::Erw(params) => erw_step(pos, &mut visited, &params, rng)?.0,
        };
        trace.push(pos.x1());
        if let Some(v) = positions.as_mut() {
            v.push(pos);
        }
    }
    visited.occupy(&pos);
    Ok(WalkPath {
        start,
        end: pos,
        positions,
        length,
        first_coord_trace: trace,
        distinct_count: visited.occupied_count(),
    })
}
