//! Complex differential calculus on C^n via real finite differences.
//!
//! A point of C^n is identified with R^{2n} through z_j = x_j + i y_j.
//! The complex Hessian (Levi form) of a real-valued function f is
//! recovered from real second derivatives through
//!
//! ```text
//! d2f/dz_j dzbar_k = 1/4 (f_{x_j x_k} + f_{y_j y_k})
//!                  + i/4 (f_{x_j y_k} - f_{y_j x_k})
//! ```
//!
//! so everything reduces to real central-difference stencils. Two schemes
//! are provided: the classic 3-point/cross stencils (order 2) and 5-point
//! stencils with first-derivative composition for mixed terms (order 4).

use num_complex::Complex64;

use crate::error::{CalcError, CalcResult};
use crate::report::{Certificate, VerificationReport, WorseIs};

/// A point of C^n. Coordinates are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPoint {
    coords: Vec<Complex64>,
}

impl ComplexPoint {
    pub fn new(coords: Vec<Complex64>) -> CalcResult<Self> {
        if coords.is_empty() {
            return Err(CalcError::parameter("point must have dimension >= 1"));
        }
        if !coords.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(CalcError::numeric("point has non-finite coordinate"));
        }
        Ok(ComplexPoint { coords })
    }

    /// Build from interleaved real coordinates [x_0, y_0, x_1, y_1, ...].
    pub fn from_reals(reals: &[f64]) -> Self {
        assert!(reals.len() % 2 == 0 && !reals.is_empty());
        let coords = reals
            .chunks_exact(2)
            .map(|xy| Complex64::new(xy[0], xy[1]))
            .collect();
        ComplexPoint { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    /// Interleaved real coordinates [x_0, y_0, x_1, y_1, ...].
    pub fn to_reals(&self) -> Vec<f64> {
        self.coords.iter().flat_map(|z| [z.re, z.im]).collect()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// The point z + t v.
    pub fn translate(&self, v: &Tangent, t: f64) -> ComplexPoint {
        let coords = self
            .coords
            .iter()
            .zip(v.coords.iter())
            .map(|(z, w)| z + t * w)
            .collect();
        ComplexPoint { coords }
    }

    /// Shift a single real coordinate (axis < 2n) by delta.
    fn shift_real(&self, axis: usize, delta: f64) -> ComplexPoint {
        let mut coords = self.coords.clone();
        let j = axis / 2;
        if axis % 2 == 0 {
            coords[j].re += delta;
        } else {
            coords[j].im += delta;
        }
        ComplexPoint { coords }
    }
}

/// A real tangent vector to C^n = R^{2n}, stored in complex notation:
/// the complex coordinate a + i b stands for a d/dx + b d/dy.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    coords: Vec<Complex64>,
}

impl Tangent {
    pub fn new(coords: Vec<Complex64>) -> CalcResult<Self> {
        if coords.is_empty() {
            return Err(CalcError::parameter("tangent must have dimension >= 1"));
        }
        if !coords.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(CalcError::numeric("tangent has non-finite coordinate"));
        }
        Ok(Tangent { coords })
    }

    pub fn from_reals(reals: &[f64]) -> Self {
        let p = ComplexPoint::from_reals(reals);
        Tangent { coords: p.coords }
    }

    pub fn zero(dim: usize) -> Self {
        Tangent { coords: vec![Complex64::new(0.0, 0.0); dim] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn to_reals(&self) -> Vec<f64> {
        self.coords.iter().flat_map(|z| [z.re, z.im]).collect()
    }

    pub fn scale(&self, t: f64) -> Tangent {
        Tangent { coords: self.coords.iter().map(|z| t * z).collect() }
    }

    pub fn add(&self, other: &Tangent) -> Tangent {
        Tangent {
            coords: self
                .coords
                .iter()
                .zip(other.coords.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Euclidean inner product of the underlying real vectors,
    /// Re <v, w> = sum_j Re(v_j conj(w_j)).
    pub fn real_dot(&self, other: &Tangent) -> f64 {
        self.coords
            .iter()
            .zip(other.coords.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.real_dot(self).sqrt()
    }

    /// Multiplication by i (the complex structure J acting on R^{2n}).
    pub fn rotate_i(&self) -> Tangent {
        Tangent { coords: self.coords.iter().map(|z| Complex64::i() * z).collect() }
    }
}

/// Finite-difference accuracy order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOrder {
    Two,
    Four,
}

/// Step size and order for all finite-difference derivatives.
#[derive(Debug, Clone, Copy)]
pub struct FdScheme {
    pub step: f64,
    pub order: DiffOrder,
}

impl Default for FdScheme {
    fn default() -> Self {
        FdScheme { step: 1e-4, order: DiffOrder::Four }
    }
}

impl FdScheme {
    pub fn new(step: f64, order: DiffOrder) -> CalcResult<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(CalcError::parameter("finite-difference step must be positive"));
        }
        Ok(FdScheme { step, order })
    }

    /// Radius (in units of `step`) of the widest stencil this scheme uses.
    pub fn stencil_radius(&self) -> f64 {
        match self.order {
            DiffOrder::Two => self.step,
            DiffOrder::Four => 2.0 * self.step,
        }
    }
}

/// A Hermitian n x n form, stored row-major. Construction always
/// symmetrizes: H <- (H + H^dagger)/2, so stored data is Hermitian to the
/// last bit (diagonal imaginary parts are exactly zero).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianForm {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianForm {
    pub fn new(n: usize, data: Vec<Complex64>) -> CalcResult<Self> {
        if n == 0 || data.len() != n * n {
            return Err(CalcError::parameter(format!(
                "matrix data length {} does not match dimension {}",
                data.len(),
                n
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(CalcError::numeric("matrix has non-finite entry"));
        }
        let mut h = HermitianForm { n, data };
        h.symmetrize();
        Ok(h)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            data[j * n + j] = Complex64::new(1.0, 0.0);
        }
        HermitianForm { n, data }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> CalcResult<Self> {
        let mut data = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                data.push(f(j, k));
            }
        }
        HermitianForm::new(n, data)
    }

    fn symmetrize(&mut self) {
        let n = self.n;
        for j in 0..n {
            for k in j..n {
                let a = self.data[j * n + k];
                let b = self.data[k * n + j];
                let avg = 0.5 * (a + b.conj());
                if j == k {
                    self.data[j * n + k] = Complex64::new(avg.re, 0.0);
                } else {
                    self.data[j * n + k] = avg;
                    self.data[k * n + j] = avg.conj();
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.data[j * self.n + k]
    }

    pub fn scale(&self, t: f64) -> HermitianForm {
        HermitianForm { n: self.n, data: self.data.iter().map(|z| t * z).collect() }
    }

    pub fn add(&self, other: &HermitianForm) -> CalcResult<HermitianForm> {
        if self.n != other.n {
            return Err(CalcError::parameter("matrix dimension mismatch"));
        }
        Ok(HermitianForm {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// The sesquilinear value sum_{j,k} H_{jk} u_j conj(v_k).
    pub fn pair(&self, u: &Tangent, v: &Tangent) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.n {
            for k in 0..self.n {
                acc += self.data[j * self.n + k] * u.coords[j] * v.coords[k].conj();
            }
        }
        acc
    }

    /// The induced real inner product Re sum H_{jk} u_j conj(v_k); symmetric
    /// in (u, v) and positive definite exactly when the form is.
    pub fn metric(&self, u: &Tangent, v: &Tangent) -> f64 {
        self.pair(u, v).re
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|j| self.data[j * self.n + j].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest |H_{jk} - conj(H_{kj})| over all entries. Always 0 for forms
    /// built through the public constructors; exposed so that consumers can
    /// certify the invariant.
    pub fn hermitian_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n {
            for k in 0..self.n {
                let d = self.data[j * self.n + k] - self.data[k * self.n + j].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// All eigenvalues in ascending order, by cyclic complex Jacobi
    /// rotations. Each pivot is first made real by a phase rotation and
    /// then annihilated by a standard real Jacobi rotation; convergence is
    /// quadratic once sweeps settle.
    pub fn eigenvalues(&self) -> CalcResult<Vec<f64>> {
        let n = self.n;
        if n == 1 {
            return Ok(vec![self.data[0].re]);
        }
        let mut h = self.data.clone();
        let scale = self.frobenius_norm().max(1.0);
        let tol = 1e-15 * scale;
        let max_sweeps = 64;
        for _ in 0..max_sweeps {
            let mut off = 0.0_f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += h[p * n + q].norm_sqr();
                }
            }
            if off.sqrt() <= tol {
                let mut eigs: Vec<f64> = (0..n).map(|j| h[j * n + j].re).collect();
                eigs.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
                return Ok(eigs);
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let alpha = h[p * n + q];
                    let mag = alpha.norm();
                    if mag <= tol / (n * n) as f64 {
                        continue;
                    }
                    // Phase that makes the pivot real: D = diag(1, e^{-i phi}).
                    let phase = alpha / mag;
                    let a = h[p * n + p].re;
                    let d = h[q * n + q].re;
                    let theta = (d - a) / (2.0 * mag);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (theta * theta + 1.0).sqrt())
                    } else {
                        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    // Combined unitary U = D * J acting on columns p, q:
                    //   U_pp = c         U_pq = s
                    //   U_qp = -s e^{-i phi}   U_qq = c e^{-i phi}
                    let e = phase.conj();
                    for i in 0..n {
                        let hip = h[i * n + p];
                        let hiq = h[i * n + q];
                        h[i * n + p] = c * hip - s * e * hiq;
                        h[i * n + q] = s * hip + c * e * hiq;
                    }
                    let ec = e.conj();
                    for j in 0..n {
                        let hpj = h[p * n + j];
                        let hqj = h[q * n + j];
                        h[p * n + j] = c * hpj - s * ec * hqj;
                        h[q * n + j] = s * hpj + c * ec * hqj;
                    }
                    h[p * n + p] = Complex64::new(a - t * mag, 0.0);
                    h[q * n + q] = Complex64::new(d + t * mag, 0.0);
                    h[p * n + q] = Complex64::new(0.0, 0.0);
                    h[q * n + p] = Complex64::new(0.0, 0.0);
                }
            }
        }
        Err(CalcError::Convergence(format!(
            "Jacobi eigenvalue sweep did not converge in {max_sweeps} sweeps"
        )))
    }

    pub fn min_eigenvalue(&self) -> CalcResult<f64> {
        Ok(self.eigenvalues()?[0])
    }

    pub fn max_eigenvalue(&self) -> CalcResult<f64> {
        Ok(*self.eigenvalues()?.last().expect("dimension >= 1"))
    }

    /// Cholesky factor L with self = L L^dagger. Fails unless the form is
    /// positive definite.
    fn cholesky(&self) -> CalcResult<Vec<Complex64>> {
        let n = self.n;
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for k in 0..=j {
                let mut sum = self.data[j * n + k];
                for m in 0..k {
                    sum -= l[j * n + m] * l[k * n + m].conj();
                }
                if j == k {
                    if sum.re <= 0.0 {
                        return Err(CalcError::numeric(
                            "form is not positive definite (Cholesky pivot <= 0)",
                        ));
                    }
                    l[j * n + j] = Complex64::new(sum.re.sqrt(), 0.0);
                } else {
                    l[j * n + k] = sum / l[k * n + k];
                }
            }
        }
        Ok(l)
    }
}

/// Smallest generalized eigenvalue of the pencil A v = lambda B v, for
/// Hermitian A and positive-definite B. Reduces to an ordinary Hermitian
/// problem through the Cholesky factor of B.
pub fn generalized_min_eigenvalue(a: &HermitianForm, b: &HermitianForm) -> CalcResult<f64> {
    if a.dim() != b.dim() {
        return Err(CalcError::parameter("pencil dimension mismatch"));
    }
    let n = a.dim();
    let l = b.cholesky()?;
    // Forward substitution: solve L X = M for X, column by column.
    let solve_lower = |m: &[Complex64]| -> Vec<Complex64> {
        let mut x = vec![Complex64::new(0.0, 0.0); n * n];
        for col in 0..n {
            for row in 0..n {
                let mut sum = m[row * n + col];
                for k in 0..row {
                    sum -= l[row * n + k] * x[k * n + col];
                }
                x[row * n + col] = sum / l[row * n + row];
            }
        }
        x
    };
    let w = solve_lower(&a.data);
    // B-reduced form: L^{-1} A L^{-dagger} = (L^{-1} W^dagger)^dagger.
    let mut w_dag = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for k in 0..n {
            w_dag[j * n + k] = w[k * n + j].conj();
        }
    }
    let y = solve_lower(&w_dag);
    let mut reduced = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for k in 0..n {
            reduced[j * n + k] = y[k * n + j].conj();
        }
    }
    HermitianForm::new(n, reduced)?.min_eigenvalue()
}

/// Evaluate f at a stencil point, distinguishing base-point failures (which
/// propagate unchanged) from shifted-point failures (which become stencil
/// errors) and non-finite values (numeric errors).
fn eval_at<F>(f: &F, base: &ComplexPoint, point: &ComplexPoint, is_base: bool) -> CalcResult<f64>
where
    F: Fn(&ComplexPoint) -> CalcResult<f64>,
{
    match f(point) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(CalcError::numeric(format!(
            "evaluation returned {v} at {:?}",
            point.to_reals()
        ))),
        Err(e) if is_base => Err(e),
        Err(e) => Err(CalcError::Stencil {
            point: base.to_reals(),
            reason: e.to_string(),
        }),
    }
}

/// Real second derivative d^2 f / dr_a dr_b by central differences, where
/// r_a are the interleaved real coordinates of C^n.
fn second_derivative<F>(
    f: &F,
    z: &ComplexPoint,
    a: usize,
    b: usize,
    scheme: &FdScheme,
    f0: f64,
) -> CalcResult<f64>
where
    F: Fn(&ComplexPoint) -> CalcResult<f64>,
{
    let h = scheme.step;
    let ev = |da: f64, db: f64| -> CalcResult<f64> {
        let p = z.shift_real(a, da).shift_real(b, db);
        eval_at(f, z, &p, da == 0.0 && db == 0.0)
    };
    match (scheme.order, a == b) {
        (DiffOrder::Two, true) => {
            let fp = ev(h, 0.0)?;
            let fm = ev(-h, 0.0)?;
            Ok((fp - 2.0 * f0 + fm) / (h * h))
        }
        (DiffOrder::Two, false) => {
            let fpp = ev(h, h)?;
            let fpm = ev(h, -h)?;
            let fmp = ev(-h, h)?;
            let fmm = ev(-h, -h)?;
            Ok((fpp - fpm - fmp + fmm) / (4.0 * h * h))
        }
        (DiffOrder::Four, true) => {
            let f2p = ev(2.0 * h, 0.0)?;
            let fp = ev(h, 0.0)?;
            let fm = ev(-h, 0.0)?;
            let f2m = ev(-2.0 * h, 0.0)?;
            Ok((-f2m + 16.0 * fm - 30.0 * f0 + 16.0 * fp - f2p) / (12.0 * h * h))
        }
        (DiffOrder::Four, false) => {
            // Composition of two 4th-order first-derivative stencils.
            const OFFSETS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
            const COEFFS: [f64; 4] = [1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0];
            let mut acc = 0.0;
            for (oa, ca) in OFFSETS.iter().zip(COEFFS.iter()) {
                for (ob, cb) in OFFSETS.iter().zip(COEFFS.iter()) {
                    acc += ca * cb * ev(oa * h, ob * h)?;
                }
            }
            Ok(acc / (h * h))
        }
    }
}

/// Levi form (complex Hessian) of f at z by real finite differences.
/// The result is Hermitian by construction and symmetrized before return.
pub fn levi_form<F>(f: F, z: &ComplexPoint, scheme: &FdScheme) -> CalcResult<HermitianForm>
where
    F: Fn(&ComplexPoint) -> CalcResult<f64>,
{
    let n = z.dim();
    let f0 = eval_at(&f, z, z, true)?;
    // Real Hessian entries for every unordered pair of real axes we need.
    let m = 2 * n;
    let mut hess = vec![0.0_f64; m * m];
    for a in 0..m {
        for b in a..m {
            let d = second_derivative(&f, z, a, b, scheme, f0)?;
            hess[a * m + b] = d;
            hess[b * m + a] = d;
        }
    }
    let x = |j: usize| 2 * j;
    let y = |j: usize| 2 * j + 1;
    HermitianForm::from_fn(n, |j, k| {
        let re = 0.25 * (hess[x(j) * m + x(k)] + hess[y(j) * m + y(k)]);
        let im = 0.25 * (hess[x(j) * m + y(k)] - hess[y(j) * m + x(k)]);
        Complex64::new(re, im)
    })
}

/// First derivative of f at z along the real tangent vector v.
pub fn directional_derivative<F>(
    f: F,
    z: &ComplexPoint,
    v: &Tangent,
    scheme: &FdScheme,
) -> CalcResult<f64>
where
    F: Fn(&ComplexPoint) -> CalcResult<f64>,
{
    if v.dim() != z.dim() {
        return Err(CalcError::parameter("tangent dimension mismatch"));
    }
    let h = scheme.step;
    let ev = |t: f64| eval_at(&f, z, &z.translate(v, t), t == 0.0);
    match scheme.order {
        DiffOrder::Two => Ok((ev(h)? - ev(-h)?) / (2.0 * h)),
        DiffOrder::Four => {
            Ok((ev(-2.0 * h)? - 8.0 * ev(-h)? + 8.0 * ev(h)? - ev(2.0 * h)?) / (12.0 * h))
        }
    }
}

/// Sweep the sample points and certify that the smallest Levi eigenvalue
/// stays at or above `margin` everywhere. Points where evaluation fails
/// (stencil leaving the domain, poles) are tallied in a separate
/// certificate instead of aborting the sweep.
pub fn is_strictly_psh<F>(
    f: F,
    samples: &[ComplexPoint],
    margin: f64,
    scheme: &FdScheme,
) -> VerificationReport
where
    F: Fn(&ComplexPoint) -> CalcResult<f64>,
{
    let mut eig = Certificate::sweep("levi_min_eigenvalue", margin, WorseIs::Smaller);
    let mut errors = Certificate::sweep("evaluation_errors", 0.0, WorseIs::Larger);
    for z in samples {
        match levi_form(&f, z, scheme).and_then(|h| h.min_eigenvalue()) {
            Ok(lambda) => {
                eig.observe(&z.to_reals(), lambda);
                errors.observe(&z.to_reals(), 0.0);
            }
            Err(_) => errors.observe(&z.to_reals(), 1.0),
        }
    }
    let mut report = VerificationReport::new("strict_plurisubharmonicity");
    report.push(eig.finish_at_least());
    report.push(errors.finish_at_most());
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pt(coords: &[(f64, f64)]) -> ComplexPoint {
        ComplexPoint::new(coords.iter().map(|&(a, b)| c(a, b)).collect()).unwrap()
    }

    fn norm_sq_field(z: &ComplexPoint) -> CalcResult<f64> {
        Ok(z.norm_sq())
    }

    #[test]
    fn levi_of_squared_norm_is_identity() {
        let z = pt(&[(0.3, -0.2), (1.1, 0.7)]);
        for order in [DiffOrder::Two, DiffOrder::Four] {
            let scheme = FdScheme { step: 1e-4, order };
            let h = levi_form(norm_sq_field, &z, &scheme).unwrap();
            for j in 0..2 {
                for k in 0..2 {
                    let expect = if j == k { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(h.get(j, k).re, expect, epsilon = 1e-6);
                    assert_abs_diff_eq!(h.get(j, k).im, 0.0, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn levi_of_log_modulus_vanishes_off_pole() {
        // log |z|^2 is pluriharmonic away from z = 0 in one variable.
        let f = |z: &ComplexPoint| -> CalcResult<f64> { Ok(z.norm_sq().ln()) };
        let z = pt(&[(1.0, 0.4)]);
        let h = levi_form(f, &z, &FdScheme::default()).unwrap();
        assert_abs_diff_eq!(h.get(0, 0).re, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn levi_of_fubini_study_matches_closed_form() {
        // log(1 + |z|^2) in C^1 has Levi value 1/(1+|z|^2)^2.
        let f = |z: &ComplexPoint| -> CalcResult<f64> { Ok((1.0 + z.norm_sq()).ln()) };
        for (x, expect) in [(0.5, 0.64), (1.0, 0.25)] {
            let z = pt(&[(x, 0.0)]);
            let h = levi_form(f, &z, &FdScheme::default()).unwrap();
            assert_abs_diff_eq!(h.get(0, 0).re, expect, epsilon = 1e-6);
        }
    }

    #[test]
    fn order_two_converges_at_rate_four() {
        // |z|^4 has Levi value 4|z|^2 in C^1; the quartic's nonzero fourth
        // derivatives make the order-2 truncation error visible.
        let f = |z: &ComplexPoint| -> CalcResult<f64> { Ok(z.norm_sq() * z.norm_sq()) };
        let z = pt(&[(0.7, 0.3)]);
        let exact = 4.0 * z.norm_sq();
        let err = |step: f64| {
            let scheme = FdScheme { step, order: DiffOrder::Two };
            (levi_form(f, &z, &scheme).unwrap().get(0, 0).re - exact).abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio} not ~4");
    }

    #[test]
    fn directional_derivative_matches_gradient() {
        let z = pt(&[(1.0, 0.0)]);
        let ex = Tangent::new(vec![c(1.0, 0.0)]).unwrap();
        let ey = Tangent::new(vec![c(0.0, 1.0)]).unwrap();
        let d_x = directional_derivative(norm_sq_field, &z, &ex, &FdScheme::default()).unwrap();
        let d_y = directional_derivative(norm_sq_field, &z, &ey, &FdScheme::default()).unwrap();
        assert_abs_diff_eq!(d_x, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d_y, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn min_eigenvalue_of_known_matrix() {
        // Eigenvalues of [[2, 1+i], [1-i, 2]] are 2 +- sqrt(2).
        let h = HermitianForm::new(2, vec![c(2.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(2.0, 0.0)])
            .unwrap();
        let eigs = h.eigenvalues().unwrap();
        assert_abs_diff_eq!(eigs[0], 0.5857864376269049, epsilon = 1e-12);
        assert_abs_diff_eq!(eigs[1], 2.0 + 1.4142135623730951, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalues_preserve_trace_and_frobenius() {
        let mut rng = crate::sampling::SeededLcg::new(99);
        for n in 2..=6 {
            let h = HermitianForm::from_fn(n, |_, _| {
                c(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))
            })
            .unwrap();
            let eigs = h.eigenvalues().unwrap();
            let trace: f64 = eigs.iter().sum();
            let frob: f64 = eigs.iter().map(|e| e * e).sum::<f64>();
            assert_abs_diff_eq!(trace, h.trace(), epsilon = 1e-10);
            assert_abs_diff_eq!(frob, h.frobenius_norm().powi(2), epsilon = 1e-10);
            for w in eigs.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn constructor_symmetrizes() {
        let h = HermitianForm::new(2, vec![c(1.0, 5.0), c(2.0, 3.0), c(0.0, 0.0), c(4.0, -2.0)])
            .unwrap();
        assert_eq!(h.hermitian_residual(), 0.0);
        assert_eq!(h.get(0, 0), c(1.0, 0.0));
        assert_eq!(h.get(1, 1), c(4.0, 0.0));
        assert_eq!(h.get(0, 1), c(1.0, 1.5));
        assert_eq!(h.get(1, 0), c(1.0, -1.5));
    }

    #[test]
    fn generalized_pencil_diagonal_case() {
        let a = HermitianForm::new(2, vec![c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(8.0, 0.0)])
            .unwrap();
        let b = HermitianForm::new(2, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(4.0, 0.0)])
            .unwrap();
        let lambda = generalized_min_eigenvalue(&a, &b).unwrap();
        assert_abs_diff_eq!(lambda, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn generalized_pencil_rejects_indefinite_base() {
        let a = HermitianForm::identity(2);
        let b = HermitianForm::new(2, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
            .unwrap();
        assert!(generalized_min_eigenvalue(&a, &b).is_err());
    }

    #[test]
    fn psh_sweep_passes_for_squared_norm() {
        let mut rng = crate::sampling::SeededLcg::new(5);
        let samples: Vec<ComplexPoint> =
            (0..20).map(|_| rng.complex_point_in_ball(2, 2.0)).collect();
        let report = is_strictly_psh(norm_sq_field, &samples, 0.9, &FdScheme::default());
        assert!(report.pass());
        let report = is_strictly_psh(norm_sq_field, &samples, 1.5, &FdScheme::default());
        assert!(!report.pass());
    }

    #[test]
    fn psh_sweep_records_errors_without_aborting() {
        // A field only defined inside the unit ball.
        let f = |z: &ComplexPoint| -> CalcResult<f64> {
            if z.norm() > 1.0 {
                Err(CalcError::domain("outside unit ball"))
            } else {
                Ok(z.norm_sq())
            }
        };
        let inside = pt(&[(0.1, 0.1)]);
        let outside = pt(&[(3.0, 0.0)]);
        let report = is_strictly_psh(
            f,
            &[inside, outside],
            0.5,
            &FdScheme::default(),
        );
        assert!(!report.pass());
        let err_cert = report.certificate("evaluation_errors").unwrap();
        assert_eq!(err_cert.sample_count, 2);
        assert_eq!(err_cert.worst_value, 1.0);
        assert!(!err_cert.pass);
        let eig_cert = report.certificate("levi_min_eigenvalue").unwrap();
        assert!(eig_cert.pass);
        assert_eq!(eig_cert.sample_count, 1);
    }

    #[test]
    fn stencil_error_reports_base_point() {
        let f = |z: &ComplexPoint| -> CalcResult<f64> {
            if z.coords()[0].re < 0.0 {
                Err(CalcError::domain("left half-plane"))
            } else {
                Ok(z.norm_sq())
            }
        };
        // Base point valid but within one step of the boundary.
        let z = pt(&[(5e-5, 0.0)]);
        match levi_form(f, &z, &FdScheme::default()) {
            Err(CalcError::Stencil { point, .. }) => assert_eq!(point, z.to_reals()),
            other => panic!("expected stencil error, got {other:?}"),
        }
    }
}
