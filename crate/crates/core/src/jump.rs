//! Exact jumps for planar simple random walk.
//!
//! A walk started at the center of the open square x + (−L, L)² leaves it
//! at a point with one coordinate offset ±L and the other offset o with
//! |o| ≤ L − 1. By symmetry each side carries mass 1/4, and the position
//! along a side has the Fourier form (N = 2L, j = o + L ∈ 1..N−1)
//!
//!   P(j) = Σ_{k=1}^{N−1} (2/N) sin(kπj/N) sin(kπ/2) sinh(β_k L) / sinh(β_k N),
//!   cosh β_k = 2 − cos(kπ/N),
//!
//! normalised per side. Replacing the steps of such an excursion by one
//! draw from this law is exact for any event that only looks at positions,
//! provided no point of the closed square matters to the event.

use std::sync::OnceLock;

use crate::rng::RngStream;

/// Half-widths of the shared tables are 2, 4, …, 2^MAX_LEVEL.
pub const MAX_LEVEL: u32 = 12;

#[derive(Debug, Clone)]
pub struct SquareExit {
    half: i64,
    /// Exit mass per side position, offsets −(L−1)..=(L−1), summing to 1/4.
    mass: Vec<f64>,
    cdf: Vec<f64>,
}

impl SquareExit {
    pub fn new(half: i64) -> Self {
        assert!(half >= 1);
        let n = 2 * half as usize;
        let nf = n as f64;
        let pi = std::f64::consts::PI;
        // sin(mπ/N) for m mod 2N
        let sines: Vec<f64> = (0..2 * n).map(|m| (m as f64 * pi / nf).sin()).collect();
        let mut weight = vec![0.0; n];
        for (k, w) in weight.iter_mut().enumerate().skip(1).step_by(2) {
            // sin(kπ/2) = ±1 for odd k, 0 for even k
            let sign = if k % 4 == 1 { 1.0 } else { -1.0 };
            let beta = (2.0 - (k as f64 * pi / nf).cos()).acosh();
            let l = half as f64;
            // sinh(βL)/sinh(βN) without overflow
            let ratio = (beta * (l - nf)).exp() * (-(-2.0 * beta * l).exp_m1()) / (-(-2.0 * beta * nf).exp_m1());
            *w = sign * 2.0 / nf * ratio;
        }
        let mut mass: Vec<f64> = (1..n)
            .map(|j| {
                let mut s = 0.0;
                for k in (1..n).step_by(2) {
                    s += weight[k] * sines[(k * j) % (2 * n)];
                }
                s.max(0.0)
            })
            .collect();
        let total: f64 = mass.iter().sum();
        for m in &mut mass {
            *m *= 0.25 / total;
        }
        let mut acc = 0.0;
        let cdf = mass
            .iter()
            .map(|m| {
                acc += 4.0 * m;
                acc
            })
            .collect();
        SquareExit { half, mass, cdf }
    }

    pub fn half(&self) -> i64 {
        self.half
    }

    /// Mass at offset `o` along one side.
    pub fn mass_at(&self, offset: i64) -> f64 {
        let j = offset + self.half - 1;
        if j < 0 || j as usize >= self.mass.len() {
            return 0.0;
        }
        self.mass[j as usize]
    }

    /// Exit displacement from the center; two words of randomness.
    pub fn sample(&self, rng: &mut RngStream) -> (i64, i64) {
        let side = rng.next_u64() >> 62;
        let u = rng.uniform();
        let j = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        let o = j as i64 - (self.half - 1);
        match side {
            0 => (self.half, o),
            1 => (-self.half, o),
            2 => (o, self.half),
            _ => (o, -self.half),
        }
    }
}

/// Exit tables for L = 2^1 .. 2^MAX_LEVEL.
#[derive(Debug)]
pub struct SquareJumper {
    tables: Vec<SquareExit>,
}

impl SquareJumper {
    pub fn new(max_level: u32) -> Self {
        SquareJumper { tables: (1..=max_level).map(|l| SquareExit::new(1 << l)).collect() }
    }

    pub fn shared() -> &'static SquareJumper {
        static SHARED: OnceLock<SquareJumper> = OnceLock::new();
        SHARED.get_or_init(|| SquareJumper::new(MAX_LEVEL))
    }

    /// Largest table with half-width ≤ `max_half`.
    pub fn fitting(&self, max_half: i64) -> Option<&SquareExit> {
        if max_half < 2 {
            return None;
        }
        let level = (63 - max_half.leading_zeros()).min(self.tables.len() as u32) as usize;
        self.tables.get(level - 1)
    }
}

/// Largest L for which the closed square x + [−L, L]² stays at Euclidean
/// distance > `keep_out` from the origin and its interior x + [−(L−1), L−1]²
/// stays within the closed disc of squared radius `inside_sq`.
pub fn admissible_half(x: i64, y: i64, keep_out: f64, inside_sq: i128) -> i64 {
    let d = ((x as f64).powi(2) + (y as f64).powi(2)).sqrt();
    let inside = (inside_sq as f64).sqrt();
    let slack = 1e-9 * (1.0 + d);
    let by_keep_out = (d - keep_out - slack) / std::f64::consts::SQRT_2;
    let by_inside = (inside - d - slack) / std::f64::consts::SQRT_2 + 1.0;
    let l = by_keep_out.min(by_inside).floor();
    if l.is_finite() && l >= 1.0 { l as i64 } else { 0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exit law from the center of the square by Gauss–Seidel on its interior.
    fn solve_square(half: i64, exit: (i64, i64)) -> f64 {
        let side = (2 * half - 1) as usize;
        let mut h = vec![0.0f64; side * side];
        let at = |h: &Vec<f64>, x: i64, y: i64| -> f64 {
            if x.abs() >= half || y.abs() >= half {
                if (x, y) == exit { 1.0 } else { 0.0 }
            } else {
                h[((x + half - 1) as usize) * side + (y + half - 1) as usize]
            }
        };
        for _ in 0..20_000 {
            let mut delta = 0.0f64;
            for x in -(half - 1)..half {
                for y in -(half - 1)..half {
                    let v = (at(&h, x + 1, y) + at(&h, x - 1, y) + at(&h, x, y + 1) + at(&h, x, y - 1)) / 4.0;
                    let i = ((x + half - 1) as usize) * side + (y + half - 1) as usize;
                    delta = delta.max((v - h[i]).abs());
                    h[i] = v;
                }
            }
            if delta < 1e-15 {
                break;
            }
        }
        at(&h, 0, 0)
    }

    #[test]
    fn fourier_law_matches_direct_solve() {
        for half in [1i64, 2, 3, 5, 8] {
            let t = SquareExit::new(half);
            for o in -(half - 1)..half {
                let direct = solve_square(half, (half, o));
                assert!((t.mass_at(o) - direct).abs() < 1e-12, "L={half} o={o}: {} vs {direct}", t.mass_at(o));
            }
        }
    }

    #[test]
    fn large_tables_are_normalised_and_symmetric() {
        let t = SquareExit::new(4096);
        let total: f64 = (-4095..4096).map(|o| t.mass_at(o)).sum();
        assert!((total - 0.25).abs() < 1e-12);
        assert!((t.mass_at(17) - t.mass_at(-17)).abs() < 1e-15);
        assert!(t.mass_at(0) > t.mass_at(2000));
        assert_eq!(t.mass_at(4096), 0.0);
    }

    #[test]
    fn samples_follow_the_table() {
        let t = SquareExit::new(2);
        let mut rng = RngStream::new(3, 0);
        let n = 400_000;
        let mut center = 0usize;
        for _ in 0..n {
            let (dx, dy) = t.sample(&mut rng);
            assert!(dx.abs() == 2 || dy.abs() == 2);
            assert!(dx.abs().min(dy.abs()) <= 1);
            if dx == 0 || dy == 0 {
                center += 1;
            }
        }
        let p = 4.0 * t.mass_at(0);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((center as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn admissible_half_respects_both_discs() {
        assert_eq!(admissible_half(0, 0, 0.0, 10_000), 0);
        let l = admissible_half(100, 0, 16.0, 8192 * 8192);
        assert!(l >= 2 && (100.0 - l as f64 * 2f64.sqrt()) > 16.0);
        let l = admissible_half(8000, 0, 16.0, 8192 * 8192);
        assert!(8000.0 + (l - 1) as f64 * 2f64.sqrt() <= 8192.0);
        let jumper = SquareJumper::new(4);
        assert_eq!(jumper.fitting(1).map(|t| t.half()), None);
        assert_eq!(jumper.fitting(7).map(|t| t.half()), Some(4));
        assert_eq!(jumper.fitting(1000).map(|t| t.half()), Some(16));
    }
}
