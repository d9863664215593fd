//! Integer-lattice geometry on Z² and Z³: points, axis neighbors, closed
//! Euclidean balls paired with their doubled companion, inner boundaries and
//! the lateral projection Z³ → Z².

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exclusive bound on the magnitude of every coordinate.
pub const COORD_LIMIT: i64 = 1 << 62;

/// Largest number of lattice sites an enumeration will touch.
pub const ENUMERATION_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("unsupported dimension {0}; only 2 and 3 are supported")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("coordinate {0} out of range (|x| must be < 2^62)")]
    CoordinateOverflow(i128),
    #[error("radius must be a finite non-negative number, got {0}")]
    InvalidRadius(f64),
    #[error("enumeration of {needed} sites exceeds the budget of {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
}

/// A point of Z² or Z³.
///
/// Unused trailing coordinates of 2D points are kept at zero so derived
/// equality and hashing only depend on the meaningful part.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    coords: [i64; 3],
    dim: u8,
}

impl LatticePoint {
    pub fn new(coords: &[i64]) -> Result<Self, LatticeError> {
        let dim = coords.len();
        if dim != 2 && dim != 3 {
            return Err(LatticeError::UnsupportedDimension(dim));
        }
        let mut out = [0i64; 3];
        for (slot, &c) in out.iter_mut().zip(coords) {
            check_coord(c as i128)?;
            *slot = c;
        }
        Ok(LatticePoint { coords: out, dim: dim as u8 })
    }

    pub fn origin(dim: usize) -> Result<Self, LatticeError> {
        Self::new(&vec![0; dim])
    }

    /// 2D constructor for trusted in-range values.
    pub fn xy(x: i64, y: i64) -> Self {
        debug_assert!(x.abs() < COORD_LIMIT && y.abs() < COORD_LIMIT);
        LatticePoint { coords: [x, y, 0], dim: 2 }
    }

    /// 3D constructor for trusted in-range values.
    pub fn xyz(x: i64, y: i64, z: i64) -> Self {
        debug_assert!(x.abs() < COORD_LIMIT && y.abs() < COORD_LIMIT && z.abs() < COORD_LIMIT);
        LatticePoint { coords: [x, y, z], dim: 3 }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn coord(&self, axis: usize) -> i64 {
        self.coords[axis]
    }

    pub fn x1(&self) -> i64 {
        self.coords[0]
    }

    /// Moves `delta` along `axis`, failing if the result leaves the
    /// representable range.
    pub fn offset(self, axis: usize, delta: i64) -> Result<Self, LatticeError> {
        let mut out = self;
        let v = self.coords[axis] as i128 + delta as i128;
        check_coord(v)?;
        out.coords[axis] = v as i64;
        Ok(out)
    }

    pub fn translate(self, by: &LatticePoint) -> Result<Self, LatticeError> {
        same_dim(&self, by)?;
        let mut out = self;
        for axis in 0..self.dim() {
            let v = self.coords[axis] as i128 + by.coords[axis] as i128;
            check_coord(v)?;
            out.coords[axis] = v as i64;
        }
        Ok(out)
    }

    pub fn norm_sq(&self) -> i128 {
        self.coords.iter().map(|&c| (c as i128) * (c as i128)).sum()
    }

    pub fn dist_sq(&self, other: &LatticePoint) -> Result<i128, LatticeError> {
        same_dim(self, other)?;
        Ok((0..self.dim())
            .map(|a| {
                let d = self.coords[a] as i128 - other.coords[a] as i128;
                d * d
            })
            .sum())
    }

    pub fn l1_dist(&self, other: &LatticePoint) -> Result<i128, LatticeError> {
        same_dim(self, other)?;
        Ok((0..self.dim())
            .map(|a| (self.coords[a] as i128 - other.coords[a] as i128).abs())
            .sum())
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

fn check_coord(v: i128) -> Result<(), LatticeError> {
    if v.abs() >= COORD_LIMIT as i128 {
        Err(LatticeError::CoordinateOverflow(v))
    } else {
        Ok(())
    }
}

fn same_dim(a: &LatticePoint, b: &LatticePoint) -> Result<(), LatticeError> {
    if a.dim != b.dim {
        Err(LatticeError::DimensionMismatch { left: a.dim(), right: b.dim() })
    } else {
        Ok(())
    }
}

/// The 2d axis neighbors in the fixed order +e₁, −e₁, +e₂, −e₂ (, +e₃, −e₃).
pub fn neighbors(p: &LatticePoint) -> Result<Vec<LatticePoint>, LatticeError> {
    let mut out = Vec::with_capacity(2 * p.dim());
    for axis in 0..p.dim() {
        out.push(p.offset(axis, 1)?);
        out.push(p.offset(axis, -1)?);
    }
    Ok(out)
}

/// Which member of the B(x,r) / B(x,2r) pair a query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    Inner,
    Outer,
}

/// A closed Euclidean ball B(center, r) together with its companion
/// B(center, 2r).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    center: LatticePoint,
    r: f64,
}

impl BallSpec {
    pub const OUTER_FACTOR: f64 = 2.0;

    /// `r = 0` is accepted and yields the single-point ball {center}.
    pub fn new(center: LatticePoint, r: f64) -> Result<Self, LatticeError> {
        if !r.is_finite() || r < 0.0 {
            return Err(LatticeError::InvalidRadius(r));
        }
        Ok(BallSpec { center, r })
    }

    pub fn centered(dim: usize, r: f64) -> Result<Self, LatticeError> {
        Self::new(LatticePoint::origin(dim)?, r)
    }

    pub fn center(&self) -> LatticePoint {
        self.center
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn radius(&self, which: Which) -> f64 {
        match which {
            Which::Inner => self.r,
            Which::Outer => Self::OUTER_FACTOR * self.r,
        }
    }

    /// Squared radius in the form used for exact integer comparisons:
    /// a site is inside iff its squared distance is ≤ this value.
    pub fn radius_sq_floor(&self, which: Which) -> i128 {
        let rad = self.radius(which);
        let mut q = (rad * rad).floor() as i128;
        // guard against rounding in rad*rad
        while ((q + 1) as f64).sqrt() <= rad {
            q += 1;
        }
        while q > 0 && (q as f64).sqrt() > rad {
            q -= 1;
        }
        q
    }

    pub fn contains(&self, p: &LatticePoint, which: Which) -> Result<bool, LatticeError> {
        Ok(self.center.dist_sq(p)? <= self.radius_sq_floor(which))
    }

    /// All lattice sites of the chosen ball, in lexicographic order.
    pub fn sites(&self, which: Which, budget: usize) -> Result<Vec<LatticePoint>, LatticeError> {
        let rad_sq = self.radius_sq_floor(which);
        let reach = (rad_sq as f64).sqrt().floor() as i64;
        let side = (2 * reach + 1) as f64;
        let estimate = side.powi(self.dim() as i32);
        if estimate > (budget as f64) * 4.0 {
            // the bounding box is at most 2^d / vol(unit ball) times the ball
            return Err(LatticeError::BudgetExceeded { needed: estimate as usize, budget });
        }
        let c = self.center;
        let mut out = Vec::new();
        let mut push = |p: LatticePoint| -> Result<(), LatticeError> {
            if c.dist_sq(&p)? <= rad_sq {
                if out.len() >= budget {
                    return Err(LatticeError::BudgetExceeded { needed: out.len() + 1, budget });
                }
                out.push(p);
            }
            Ok(())
        };
        if self.dim() == 2 {
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    push(LatticePoint::new(&[c.coord(0) + dx, c.coord(1) + dy])?)?;
                }
            }
        } else {
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    for dz in -reach..=reach {
                        push(LatticePoint::new(&[
                            c.coord(0) + dx,
                            c.coord(1) + dy,
                            c.coord(2) + dz,
                        ])?)?;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Free-standing form of [`BallSpec::contains`].
pub fn in_ball(p: &LatticePoint, b: &BallSpec, which: Which) -> Result<bool, LatticeError> {
    b.contains(p, which)
}

/// Sites of the ball having at least one neighbor outside it.
pub fn inner_boundary(b: &BallSpec, which: Which) -> Result<BTreeSet<LatticePoint>, LatticeError> {
    inner_boundary_with_budget(b, which, ENUMERATION_BUDGET)
}

pub fn inner_boundary_with_budget(
    b: &BallSpec,
    which: Which,
    budget: usize,
) -> Result<BTreeSet<LatticePoint>, LatticeError> {
    let sites = b.sites(which, budget)?;
    let mut out = BTreeSet::new();
    for v in sites {
        for w in neighbors(&v)? {
            if !b.contains(&w, which)? {
                out.insert(v);
                break;
            }
        }
    }
    Ok(out)
}

/// (x₁, x₂, x₃) ↦ (x₂, x₃).
pub fn project_lateral(p: &LatticePoint) -> Result<LatticePoint, LatticeError> {
    if p.dim() != 3 {
        return Err(LatticeError::DimensionMismatch { left: p.dim(), right: 3 });
    }
    Ok(LatticePoint::xy(p.coord(1), p.coord(2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p2(x: i64, y: i64) -> LatticePoint {
        LatticePoint::xy(x, y)
    }

    #[test]
    fn neighbors_of_3d_origin() {
        let n = neighbors(&LatticePoint::xyz(0, 0, 0)).unwrap();
        assert_eq!(
            n,
            vec![
                LatticePoint::xyz(1, 0, 0),
                LatticePoint::xyz(-1, 0, 0),
                LatticePoint::xyz(0, 1, 0),
                LatticePoint::xyz(0, -1, 0),
                LatticePoint::xyz(0, 0, 1),
                LatticePoint::xyz(0, 0, -1),
            ]
        );
    }

    #[test]
    fn neighbors_2d() {
        assert_eq!(neighbors(&p2(0, 0)).unwrap(), vec![p2(1, 0), p2(-1, 0), p2(0, 1), p2(0, -1)]);
        assert_eq!(
            neighbors(&p2(5, -3)).unwrap(),
            vec![p2(6, -3), p2(4, -3), p2(5, -2), p2(5, -4)]
        );
    }

    #[test]
    fn neighbors_overflow() {
        let p = LatticePoint::new(&[COORD_LIMIT - 1, 0]).unwrap();
        assert!(matches!(neighbors(&p), Err(LatticeError::CoordinateOverflow(_))));
        assert!(LatticePoint::new(&[COORD_LIMIT, 0]).is_err());
        assert!(LatticePoint::new(&[1, 2, 3, 4]).is_err());
    }

    #[test]
    fn ball_membership() {
        let b1 = BallSpec::centered(2, 1.0).unwrap();
        assert!(in_ball(&p2(0, 0), &b1, Which::Inner).unwrap());
        assert!(!in_ball(&p2(1, 1), &b1, Which::Inner).unwrap());
        assert!(in_ball(&p2(1, 1), &b1, Which::Outer).unwrap());
        let b5 = BallSpec::centered(2, 5.0).unwrap();
        assert!(in_ball(&p2(3, 4), &b5, Which::Inner).unwrap());
        assert!(!in_ball(&p2(3, 5), &b5, Which::Inner).unwrap());
        assert!(matches!(
            in_ball(&LatticePoint::xyz(0, 0, 0), &b1, Which::Inner),
            Err(LatticeError::DimensionMismatch { .. })
        ));
        assert!(BallSpec::centered(2, -1.0).is_err());
        assert!(BallSpec::centered(2, f64::NAN).is_err());
    }

    #[test]
    fn inner_boundary_small_balls() {
        let b1 = BallSpec::centered(2, 1.0).unwrap();
        let got: Vec<_> = inner_boundary(&b1, Which::Inner).unwrap().into_iter().collect();
        let mut want = vec![p2(1, 0), p2(-1, 0), p2(0, 1), p2(0, -1)];
        want.sort();
        assert_eq!(got, want);

        let b0 = BallSpec::centered(2, 0.0).unwrap();
        let got: Vec<_> = inner_boundary(&b0, Which::Inner).unwrap().into_iter().collect();
        assert_eq!(got, vec![p2(0, 0)]);
    }

    #[test]
    fn inner_boundary_radius_two_by_enumeration() {
        // brute force over the bounding box, independent of `sites`
        let b = BallSpec::centered(2, 2.0).unwrap();
        let inside = |x: i64, y: i64| x * x + y * y <= 4;
        let mut want = Vec::new();
        let mut ball_count = 0;
        for x in -3..=3 {
            for y in -3..=3 {
                if !inside(x, y) {
                    continue;
                }
                ball_count += 1;
                let outside_nbr = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|(dx, dy)| !inside(x + dx, y + dy));
                if outside_nbr {
                    want.push(p2(x, y));
                }
            }
        }
        want.sort();
        assert_eq!(ball_count, 13);
        assert_eq!(want.len(), 8);
        let got: Vec<_> = inner_boundary(&b, Which::Inner).unwrap().into_iter().collect();
        assert_eq!(got, want);
    }

    #[test]
    fn enumeration_budget() {
        let b = BallSpec::centered(2, 100.0).unwrap();
        assert!(matches!(
            inner_boundary(&b, Which::Inner),
            Err(LatticeError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn projection() {
        assert_eq!(project_lateral(&LatticePoint::xyz(7, 1, -2)).unwrap(), p2(1, -2));
        assert_eq!(project_lateral(&LatticePoint::xyz(0, 0, 0)).unwrap(), p2(0, 0));
        assert!(project_lateral(&p2(1, 1)).is_err());
    }

    fn arb_point() -> impl Strategy<Value = LatticePoint> {
        prop_oneof![
            (-1000i64..1000, -1000i64..1000).prop_map(|(x, y)| LatticePoint::xy(x, y)),
            (-1000i64..1000, -1000i64..1000, -1000i64..1000)
                .prop_map(|(x, y, z)| LatticePoint::xyz(x, y, z)),
        ]
    }

    proptest! {
        #[test]
        fn neighbors_are_unit_steps(p in arb_point()) {
            let n = neighbors(&p).unwrap();
            prop_assert_eq!(n.len(), 2 * p.dim());
            for q in n {
                prop_assert_eq!(p.l1_dist(&q).unwrap(), 1);
            }
        }

        #[test]
        fn inner_implies_outer(p in arb_point(), r in 0.0f64..50.0) {
            let b = BallSpec::new(LatticePoint::origin(p.dim()).unwrap(), r).unwrap();
            if b.contains(&p, Which::Inner).unwrap() {
                prop_assert!(b.contains(&p, Which::Outer).unwrap());
            }
        }

        #[test]
        fn boundary_members_have_outside_neighbor(r in 0.5f64..12.0, cx in -5i64..5, cy in -5i64..5) {
            let b = BallSpec::new(p2(cx, cy), r).unwrap();
            for v in inner_boundary(&b, Which::Inner).unwrap() {
                prop_assert!(b.contains(&v, Which::Inner).unwrap());
                prop_assert!(neighbors(&v).unwrap().iter().any(|w| !b.contains(w, Which::Inner).unwrap()));
            }
        }

        #[test]
        fn projection_under_axis_steps(x in -100i64..100, y in -100i64..100, z in -100i64..100) {
            let p = LatticePoint::xyz(x, y, z);
            let base = project_lateral(&p).unwrap();
            prop_assert_eq!(project_lateral(&p.offset(0, 1).unwrap()).unwrap(), base);
            prop_assert_eq!(project_lateral(&p.offset(1, 1).unwrap()).unwrap(), base.offset(0, 1).unwrap());
        }
    }
}
