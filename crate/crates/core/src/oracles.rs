//! Exact and asymptotic reference values.
//!
//! * the planar potential kernel a(x): an exact recursion in Q + Q/π and
//!   the asymptotic form (2/π) ln|x| + κ, with κ computed from the closed
//!   form of a on the diagonal;
//! * hit-before-exit probabilities and exit distributions on a lattice ball,
//!   by solving the discrete Dirichlet problem;
//! * the annulus escape reference log 2 / log(R/r);
//! * the block size k(n) = ⌈n / exp(ln^{1/4} n)⌉ and the α recursion
//!   α_n = α_k (1 − (2λ+2)/(n/k)).

use std::collections::HashMap;
use std::sync::OnceLock;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{LatticeError, LatticePoint};

/// Largest ball (in sites) the Dirichlet solver accepts.
pub const SOLVE_BUDGET: usize = 1_000_000;

/// Target for max |h(v) − mean of neighbors| at free sites.
pub const HARMONIC_TOLERANCE: f64 = 1e-12;

/// Diagonal index used to extract κ; the remainder is O(n⁻²).
const KAPPA_DIAGONAL_INDEX: u64 = 1_000_000;

/// 1/π to 80 significant digits.
const INV_PI_DIGITS: &str =
    "31830988618379067153776752674502872406891929148091289749533468811779359526845307";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("oracle is only defined on Z², got dimension {0}")]
    NotPlanar(usize),
    #[error("ball of radius {radius} has {sites} sites, over the budget of {budget}")]
    BudgetExceeded { radius: f64, sites: usize, budget: usize },
    #[error("linear solve did not reach the harmonic tolerance (residual {0:e})")]
    NoConvergence(f64),
    #[error("annulus needs R > 2r, got r = {r}, R = {outer}")]
    AnnulusDomain { r: f64, outer: f64 },
    #[error("block size needs n ≥ 2, got {0}")]
    BlockSizeDomain(u64),
    #[error("base_alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("at n = {n}, k = {k}: n/k = {ratio} does not exceed 2λ+2 = {needed}")]
    RatioConstraint { n: u64, k: u64, ratio: f64, needed: f64 },
    #[error("chain from top_n = {top_n} cannot descend to base_n = {base_n}")]
    ChainDoesNotReachBase { top_n: u64, base_n: u64 },
}

// ---------------------------------------------------------------------------
// potential kernel

/// a(n, n) = (4/π) Σ_{k=1}^{n} 1/(2k − 1), summed with compensation.
pub fn potential_kernel_diagonal(n: u64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    // small terms first
    for k in (1..=n).rev() {
        let term = 1.0 / (2 * k - 1) as f64;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    4.0 / std::f64::consts::PI * sum
}

/// The potential-kernel constant κ with a(x) = (2/π) ln|x| + κ + o(1),
/// evaluated as a(n,n) − (2/π) ln(√2 n) at n = 10⁶.
pub fn potential_kernel_constant() -> f64 {
    static KAPPA: OnceLock<f64> = OnceLock::new();
    *KAPPA.get_or_init(|| {
        let n = KAPPA_DIAGONAL_INDEX;
        potential_kernel_diagonal(n)
            - 2.0 / std::f64::consts::PI * (std::f64::consts::SQRT_2 * n as f64).ln()
    })
}

/// (2/π) ln|x| + κ for x ≠ 0, and exactly 0 at the origin.
pub fn potential_kernel_asymptotic(x: &LatticePoint) -> Result<f64, OracleError> {
    if x.dim() != 2 {
        return Err(OracleError::NotPlanar(x.dim()));
    }
    if x.norm_sq() == 0 {
        return Ok(0.0);
    }
    let norm = (x.norm_sq() as f64).sqrt();
    Ok(2.0 / std::f64::consts::PI * norm.ln() + potential_kernel_constant())
}

/// An exact potential-kernel value `rational + inv_pi / π`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelValue {
    pub rational: BigRational,
    pub inv_pi: BigRational,
}

impl KernelValue {
    fn zero() -> Self {
        KernelValue { rational: BigRational::zero(), inv_pi: BigRational::zero() }
    }

    fn lin(terms: &[(i64, &KernelValue)]) -> Self {
        let mut out = KernelValue::zero();
        for (c, v) in terms {
            let c = BigRational::from_integer(BigInt::from(*c));
            out.rational += &c * &v.rational;
            out.inv_pi += &c * &v.inv_pi;
        }
        out
    }

    /// Evaluates with an 80-digit 1/π before rounding to f64.
    pub fn to_f64(&self) -> f64 {
        let inv_pi = BigRational::new(
            INV_PI_DIGITS.parse::<BigInt>().unwrap(),
            BigInt::from(10).pow(INV_PI_DIGITS.len() as u32),
        );
        (&self.rational + &self.inv_pi * inv_pi).to_f64().unwrap_or(f64::NAN)
    }
}

/// Exact potential kernel on the square |x|, |y| ≤ radius, built outward
/// from a(0) = 0, a(±1,0) = 1 and the closed form on the diagonal, using
/// harmonicity off the origin and the lattice symmetries.
#[derive(Debug, Clone)]
pub struct PotentialKernelTable {
    radius: u64,
    octant: HashMap<(u64, u64), KernelValue>,
}

impl PotentialKernelTable {
    pub fn new(radius: u64) -> Self {
        let mut t: HashMap<(u64, u64), KernelValue> = HashMap::new();
        let n = radius;
        // diagonal
        let mut odd_sum = BigRational::zero();
        t.insert((0, 0), KernelValue::zero());
        for y in 1..=n {
            odd_sum += BigRational::new(BigInt::one(), BigInt::from(2 * y - 1));
            t.insert(
                (y, y),
                KernelValue { rational: BigRational::zero(), inv_pi: &odd_sum * BigRational::from_integer(4.into()) },
            );
        }
        // first off-diagonal: harmonic at (y, y) gives a(y+1, y) = 2a(y,y) − a(y, y−1)
        if n >= 1 {
            t.insert(
                (1, 0),
                KernelValue { rational: BigRational::one(), inv_pi: BigRational::zero() },
            );
        }
        for y in 1..n {
            let v = KernelValue::lin(&[(2, &t[&(y, y)]), (-1, &t[&(y, y - 1)])]);
            t.insert((y + 1, y), v);
        }
        // further lines x − y = d, harmonic at (x − 1, y)
        for d in 2..=n {
            for y in 0..=(n - d) {
                let x = d + y;
                let below = if y == 0 { (x - 1, 1) } else { (x - 1, y - 1) };
                let v = if y == 0 {
                    KernelValue::lin(&[(4, &t[&(x - 1, 0)]), (-1, &t[&(x - 2, 0)]), (-2, &t[&(x - 1, 1)])])
                } else {
                    KernelValue::lin(&[
                        (4, &t[&(x - 1, y)]),
                        (-1, &t[&(x - 2, y)]),
                        (-1, &t[&(x - 1, y + 1)]),
                        (-1, &t[&below]),
                    ])
                };
                t.insert((x, y), v);
            }
        }
        PotentialKernelTable { radius, octant: t }
    }

    pub fn radius(&self) -> u64 {
        self.radius
    }

    pub fn exact(&self, x: i64, y: i64) -> Option<&KernelValue> {
        let (a, b) = (x.unsigned_abs(), y.unsigned_abs());
        let key = if a >= b { (a, b) } else { (b, a) };
        self.octant.get(&key)
    }

    pub fn value(&self, x: i64, y: i64) -> Option<f64> {
        self.exact(x, y).map(KernelValue::to_f64)
    }
}

// ---------------------------------------------------------------------------
// Dirichlet problems on a lattice ball

/// Lattice sites of the closed disc of a given radius about the origin,
/// indexed for linear solves.
#[derive(Debug, Clone)]
pub struct BallDomain {
    radius: f64,
    rad_sq: i64,
    reach: i64,
    index: Vec<i32>,
    sites: Vec<(i64, i64)>,
}

impl BallDomain {
    pub fn new(radius: f64) -> Result<Self, OracleError> {
        let ball = crate::lattice::BallSpec::centered(2, radius)?;
        let rad_sq = ball.radius_sq_floor(crate::lattice::Which::Inner) as i64;
        let reach = (rad_sq as f64).sqrt().floor() as i64;
        let side = (2 * reach + 1) as usize;
        let approx = (std::f64::consts::PI * radius * radius) as usize;
        if approx > SOLVE_BUDGET + SOLVE_BUDGET / 10 {
            return Err(OracleError::BudgetExceeded { radius, sites: approx, budget: SOLVE_BUDGET });
        }
        let mut index = vec![-1i32; side * side];
        let mut sites = Vec::new();
        for x in -reach..=reach {
            for y in -reach..=reach {
                if x * x + y * y <= rad_sq {
                    index[((x + reach) as usize) * side + (y + reach) as usize] = sites.len() as i32;
                    sites.push((x, y));
                }
            }
        }
        if sites.len() > SOLVE_BUDGET {
            return Err(OracleError::BudgetExceeded { radius, sites: sites.len(), budget: SOLVE_BUDGET });
        }
        Ok(BallDomain { radius, rad_sq, reach, index, sites })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[(i64, i64)] {
        &self.sites
    }

    pub fn site_index(&self, x: i64, y: i64) -> Option<usize> {
        if x.abs() > self.reach || y.abs() > self.reach || x * x + y * y > self.rad_sq {
            return None;
        }
        let side = (2 * self.reach + 1) as usize;
        let i = self.index[((x + self.reach) as usize) * side + (y + self.reach) as usize];
        (i >= 0).then_some(i as usize)
    }

    fn neighbor_sites(x: i64, y: i64) -> [(i64, i64); 4] {
        [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
    }

    /// Solves h(v) = mean of h over the four neighbors at every site that
    /// is not pinned, with pinned sites fixed and every point outside the
    /// disc taking `exterior(point)`.
    pub fn solve<F>(&self, pinned: &[((i64, i64), f64)], exterior: F) -> Result<HarmonicField, OracleError>
    where
        F: Fn(i64, i64) -> f64,
    {
        let n = self.sites.len();
        let mut fixed: Vec<Option<f64>> = vec![None; n];
        for &((x, y), v) in pinned {
            if let Some(i) = self.site_index(x, y) {
                fixed[i] = Some(v);
            }
        }
        // rhs b = 4·(mean of known neighbor values) contribution
        let mut b = vec![0.0; n];
        for (i, &(x, y)) in self.sites.iter().enumerate() {
            if fixed[i].is_some() {
                continue;
            }
            for (nx, ny) in Self::neighbor_sites(x, y) {
                match self.site_index(nx, ny) {
                    Some(j) => {
                        if let Some(v) = fixed[j] {
                            b[i] += v;
                        }
                    }
                    None => b[i] += exterior(nx, ny),
                }
            }
        }
        let free: Vec<bool> = fixed.iter().map(Option::is_none).collect();
        let values = self.conjugate_gradient(&b, &free)?;
        let values: Vec<f64> = values
            .into_iter()
            .zip(&fixed)
            .map(|(v, f)| f.unwrap_or(v))
            .collect();
        let mut boundary = HashMap::new();
        for &(x, y) in &self.sites {
            for (nx, ny) in Self::neighbor_sites(x, y) {
                if self.site_index(nx, ny).is_none() {
                    boundary.entry((nx, ny)).or_insert_with(|| exterior(nx, ny));
                }
            }
        }
        let field = HarmonicField { domain: self.clone(), values, free, boundary };
        let residual = field.max_residual();
        if residual > 1e-10 {
            return Err(OracleError::NoConvergence(residual));
        }
        Ok(field)
    }

    /// y = A x where A = 4I − adjacency restricted to free sites.
    fn apply(&self, x: &[f64], free: &[bool], out: &mut [f64]) {
        for (i, &(sx, sy)) in self.sites.iter().enumerate() {
            if !free[i] {
                out[i] = 0.0;
                continue;
            }
            let mut acc = 4.0 * x[i];
            for (nx, ny) in Self::neighbor_sites(sx, sy) {
                if let Some(j) = self.site_index(nx, ny) {
                    if free[j] {
                        acc -= x[j];
                    }
                }
            }
            out[i] = acc;
        }
    }

    fn conjugate_gradient(&self, b: &[f64], free: &[bool]) -> Result<Vec<f64>, OracleError> {
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r: Vec<f64> = b.iter().zip(free).map(|(&v, &f)| if f { v } else { 0.0 }).collect();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        let max_iter = 20 * n + 100;
        for _ in 0..max_iter {
            // harmonic residual is |r_i| / 4
            let worst = r.iter().fold(0.0f64, |m, v| m.max(v.abs())) / 4.0;
            if worst < HARMONIC_TOLERANCE {
                return Ok(x);
            }
            self.apply(&p, free, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                break;
            }
            let alpha = rr / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
        // recompute the true residual before giving up
        self.apply(&x, free, &mut ap);
        let worst = (0..n)
            .filter(|&i| free[i])
            .map(|i| (b[i] - ap[i]).abs() / 4.0)
            .fold(0.0, f64::max);
        if worst < 1e-10 {
            Ok(x)
        } else {
            Err(OracleError::NoConvergence(worst))
        }
    }
}

/// Solution of a Dirichlet problem on a [`BallDomain`].
#[derive(Debug, Clone)]
pub struct HarmonicField {
    domain: BallDomain,
    values: Vec<f64>,
    free: Vec<bool>,
    boundary: HashMap<(i64, i64), f64>,
}

impl HarmonicField {
    pub fn domain(&self) -> &BallDomain {
        &self.domain
    }

    /// Value at any point of Z²; points beyond the first exterior layer
    /// report 0.
    pub fn at(&self, x: i64, y: i64) -> f64 {
        match self.domain.site_index(x, y) {
            Some(i) => self.values[i],
            None => self.boundary.get(&(x, y)).copied().unwrap_or(0.0),
        }
    }

    /// max |h(v) − mean of neighbors| over free sites.
    pub fn max_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, &(x, y)) in self.domain.sites.iter().enumerate() {
            if !self.free[i] {
                continue;
            }
            let mean: f64 = BallDomain::neighbor_sites(x, y)
                .iter()
                .map(|&(nx, ny)| self.at(nx, ny))
                .sum::<f64>()
                / 4.0;
            worst = worst.max((self.values[i] - mean).abs());
        }
        worst
    }
}

/// h(v) = P_v(walk hits 0 before first leaving the closed disc B(0, 2r)).
pub fn hit_probability_field(r: f64) -> Result<HarmonicField, OracleError> {
    let domain = BallDomain::new(2.0 * r)?;
    domain.solve(&[((0, 0), 1.0)], |_, _| 0.0)
}

/// Probability that a simple walk from `start` reaches the origin before
/// first leaving B(0, 2r).
pub fn exact_hit_probability(start: &LatticePoint, r: f64) -> Result<f64, OracleError> {
    if start.dim() != 2 {
        return Err(OracleError::NotPlanar(start.dim()));
    }
    let (x, y) = (start.coord(0), start.coord(1));
    if x == 0 && y == 0 {
        return Ok(1.0);
    }
    let domain = BallDomain::new(2.0 * r)?;
    if domain.site_index(x, y).is_none() {
        return Ok(0.0);
    }
    Ok(domain.solve(&[((0, 0), 1.0)], |_, _| 0.0)?.at(x, y))
}

/// Distribution of the first position outside the closed disc B(0, radius)
/// for a simple walk started at `start` (inside the disc).
///
/// Uses the killed Green's function g = G(start, ·), which solves the same
/// system with a unit source, and P(exit at w) = Σ_{v ~ w} g(v) / 4.
pub fn exit_distribution(start: &LatticePoint, radius: f64) -> Result<Vec<(LatticePoint, f64)>, OracleError> {
    if start.dim() != 2 {
        return Err(OracleError::NotPlanar(start.dim()));
    }
    let domain = BallDomain::new(radius)?;
    let (sx, sy) = (start.coord(0), start.coord(1));
    let si = domain
        .site_index(sx, sy)
        .ok_or(OracleError::Lattice(LatticeError::InvalidRadius(radius)))?;
    let mut b = vec![0.0; domain.len()];
    b[si] = 4.0;
    let free = vec![true; domain.len()];
    let g = domain.conjugate_gradient(&b, &free)?;
    let mut mass: HashMap<(i64, i64), f64> = HashMap::new();
    for (i, &(x, y)) in domain.sites.iter().enumerate() {
        for (nx, ny) in BallDomain::neighbor_sites(x, y) {
            if domain.site_index(nx, ny).is_none() {
                *mass.entry((nx, ny)).or_insert(0.0) += g[i] / 4.0;
            }
        }
    }
    let mut out: Vec<(LatticePoint, f64)> =
        mass.into_iter().map(|((x, y), m)| (LatticePoint::xy(x, y), m)).collect();
    out.sort_by_key(|a| a.0);
    Ok(out)
}

// ---------------------------------------------------------------------------
// annulus, block size, α recursion

/// log 2 / log(R/r): the reference probability of reaching distance R from
/// the ring at 2r before returning to B(0, r).
pub fn annulus_escape(r: f64, outer: f64) -> Result<f64, OracleError> {
    if !(r > 0.0 && outer > 2.0 * r && outer.is_finite()) {
        return Err(OracleError::AnnulusDomain { r, outer });
    }
    Ok(std::f64::consts::LN_2 / (outer / r).ln())
}

/// k(n) = ⌈n / exp((ln n)^{1/4})⌉.
pub fn block_size(n: u64) -> Result<u64, OracleError> {
    if n < 2 {
        return Err(OracleError::BlockSizeDomain(n));
    }
    let nf = n as f64;
    let q = nf / nf.ln().powf(0.25).exp();
    // f64 is trusted only when n is exact and q is far from an integer
    if n < 1 << 53 && (q - q.round()).abs() > 1e-9 * q.max(1.0) {
        return Ok((q.ceil() as u64).max(1));
    }
    Ok(block_size_exact(n))
}

/// Fixed-point evaluation with 256 fractional bits.
fn block_size_exact(n: u64) -> u64 {
    const BITS: u32 = 256;
    let one = BigInt::one() << BITS;
    // 2·atanh(t)·2^BITS for a fixed-point t
    let atanh2 = |t: &BigInt| {
        let t2 = (t * t) >> BITS;
        let (mut power, mut sum, mut k) = (t.clone(), BigInt::zero(), 1u32);
        while !power.is_zero() {
            sum += &power / k;
            power = (power * &t2) >> BITS;
            k += 2;
        }
        sum * 2
    };
    let e = 63 - n.leading_zeros();
    let ln2 = atanh2(&(&one / 3u32));
    let m = (BigInt::from(n) << BITS) >> e;
    let ln_n: BigInt = ln2 * e + atanh2(&(((&m - &one) << BITS) / (&m + &one)));
    let root = ((ln_n << BITS).sqrt() << BITS).sqrt();
    let (mut term, mut exp, mut k) = (one.clone(), BigInt::zero(), 1u32);
    while !term.is_zero() {
        exp += &term;
        term = ((term * &root) >> BITS) / k;
        k += 1;
    }
    let num = BigInt::from(n) << BITS;
    let q = &num / &exp;
    let k = if &q * &exp == num { q } else { q + 1 };
    k.to_u64().expect("k ≤ n").max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaLevel {
    pub n: u64,
    pub k: u64,
    /// n/k as a real number.
    pub ratio: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub lambda: u32,
    pub base_n: u64,
    pub base_alpha: f64,
    /// Levels where the recursion applies, descending by n.
    pub levels: Vec<AlphaLevel>,
    /// Where the chain came to rest (≤ base_n); it carries base_alpha.
    pub floor_n: u64,
    pub inf_alpha: f64,
}

impl AlphaSchedule {
    /// α at the level below `i` (the level of k_i).
    pub fn alpha_below(&self, i: usize) -> f64 {
        self.levels.get(i + 1).map_or(self.base_alpha, |l| l.alpha)
    }
}

/// Applies α_n = α_k (1 − (2λ+2)/(n/k)) bottom-up over explicit (n, k)
/// levels listed top-down.
pub fn alpha_recursion(
    base_alpha: f64,
    lambda: u32,
    levels: &[(u64, u64)],
) -> Result<Vec<AlphaLevel>, OracleError> {
    if !(base_alpha > 0.0) {
        return Err(OracleError::NonPositiveAlpha(base_alpha));
    }
    let needed = 2.0 * lambda as f64 + 2.0;
    let mut out = Vec::with_capacity(levels.len());
    let mut alpha = base_alpha;
    for &(n, k) in levels.iter().rev() {
        let ratio = n as f64 / k as f64;
        if !(ratio > needed) {
            return Err(OracleError::RatioConstraint { n, k, ratio, needed });
        }
        alpha *= 1.0 - needed / ratio;
        out.push(AlphaLevel { n, k, ratio, alpha });
    }
    out.reverse();
    Ok(out)
}

/// The α schedule along top_n → k(top_n) → k(k(top_n)) → … down to the
/// first value ≤ base_n, which carries `base_alpha`.
pub fn alpha_schedule(base_n: u64, base_alpha: f64, lambda: u32, top_n: u64) -> Result<AlphaSchedule, OracleError> {
    if top_n < base_n || base_n < 1 {
        return Err(OracleError::ChainDoesNotReachBase { top_n, base_n });
    }
    let mut chain = Vec::new();
    let mut n = top_n;
    while n > base_n {
        let k = block_size(n)?;
        if k >= n {
            return Err(OracleError::ChainDoesNotReachBase { top_n, base_n });
        }
        chain.push((n, k));
        n = k;
    }
    let levels = alpha_recursion(base_alpha, lambda, &chain)?;
    let inf_alpha = levels.iter().map(|l| l.alpha).fold(base_alpha, f64::min);
    Ok(AlphaSchedule { lambda, base_n, base_alpha, levels, floor_n: n, inf_alpha })
}
