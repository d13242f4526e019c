//! Deterministic sampling utilities.
//!
//! Every randomized sweep in this crate draws from [`SeededLcg`], a plain
//! 64-bit linear congruential generator. The generator is deliberately
//! trivial so that any other implementation (a script, a spreadsheet, a
//! browser) can reproduce the exact sample streams from the seed alone:
//!
//! ```text
//! state' = state * 6364136223846793005 + 1442695040888963407   (mod 2^64)
//! f64    = (state' >> 11) / 2^53                               (in [0, 1))
//! ```
//!
//! The multiplier/increment pair is Knuth's MMIX choice. Statistical
//! quality is more than sufficient for quasi-random test points; what we
//! actually care about is bit-for-bit reproducibility across platforms,
//! including wasm.

use num_complex::Complex64;

use crate::calculus::ComplexPoint;

const LCG_MUL: u64 = 6364136223846793005;
const LCG_INC: u64 = 1442695040888963407;

/// Minimal deterministic RNG. See the module docs for the exact recurrence.
#[derive(Debug, Clone)]
pub struct SeededLcg {
    state: u64,
}

impl SeededLcg {
    pub fn new(seed: u64) -> Self {
        // Advance once so that seed 0 does not start the stream at 0.
        let mut rng = SeededLcg { state: seed };
        rng.next_u64();
        rng
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(LCG_MUL).wrapping_add(LCG_INC);
        self.state
    }

    /// Uniform draw from [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform draw from [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform point in the closed real cube [-half_width, half_width]^dim.
    pub fn point_in_cube(&mut self, dim: usize, half_width: f64) -> Vec<f64> {
        (0..dim).map(|_| self.uniform(-half_width, half_width)).collect()
    }

    /// Uniform point in the real ball of the given radius (rejection from
    /// the bounding cube; acceptance is fine for the dimensions used here).
    pub fn point_in_ball(&mut self, dim: usize, radius: f64) -> Vec<f64> {
        loop {
            let v = self.point_in_cube(dim, 1.0);
            let n2: f64 = v.iter().map(|x| x * x).sum();
            if n2 <= 1.0 {
                return v.into_iter().map(|x| x * radius).collect();
            }
        }
    }

    /// Uniform complex point in the ball of the given radius in C^n
    /// (viewed as R^{2n}).
    pub fn complex_point_in_ball(&mut self, dim: usize, radius: f64) -> ComplexPoint {
        let reals = self.point_in_ball(2 * dim, radius);
        ComplexPoint::from_reals(&reals)
    }

    /// Complex point in the spherical shell inner <= |z| <= outer.
    pub fn complex_point_in_shell(&mut self, dim: usize, inner: f64, outer: f64) -> ComplexPoint {
        loop {
            let p = self.complex_point_in_ball(dim, outer);
            if p.norm() >= inner {
                return p;
            }
        }
    }

    /// Point on the unit sphere of C^n = R^{2n} (normalized ball sample).
    pub fn complex_point_on_sphere(&mut self, dim: usize) -> ComplexPoint {
        loop {
            let p = self.complex_point_in_ball(dim, 1.0);
            let n = p.norm();
            if n > 1e-3 {
                let coords: Vec<Complex64> = p.coords().iter().map(|z| z / n).collect();
                return ComplexPoint::new(coords).expect("normalized sample is finite");
            }
        }
    }
}

/// Deterministic real grid: per_axis points per axis, spanning
/// [-half_width, half_width]^dim, flattened in row-major order. When the
/// full grid would exceed max_points, a fixed stride subsamples it, so the
/// returned set is still independent of any runtime conditions.
pub fn real_grid(dim: usize, per_axis: usize, half_width: f64, max_points: usize) -> Vec<Vec<f64>> {
    assert!(per_axis >= 2, "grid needs at least two points per axis");
    let total = (per_axis as u128).pow(dim as u32);
    let stride = total.div_ceil(max_points as u128).max(1) as u128;
    let mut out = Vec::new();
    let mut flat: u128 = 0;
    while flat < total {
        let mut idx = flat;
        let mut point = Vec::with_capacity(dim);
        for _ in 0..dim {
            let i = (idx % per_axis as u128) as usize;
            idx /= per_axis as u128;
            point.push(-half_width + 2.0 * half_width * i as f64 / (per_axis - 1) as f64);
        }
        out.push(point);
        flat += stride;
    }
    out
}
