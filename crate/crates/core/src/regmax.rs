//! Regularized maximum of two functions.
//!
//! For a transition width delta > 0 the regularized maximum is
//!
//! ```text
//! M(x, y) = x + g(y - x),    g(w) = integral of max(0, w + a s) rho~(s) ds,
//! ```
//!
//! with a = delta/2 and rho~ the autocorrelation of a mollifier rho
//! supported on [-1, 1]. Because rho is an even polynomial, rho~ is an even
//! piecewise polynomial on [-2, 2] and g has a closed form: writing
//! s0 = -w/a,
//!
//! ```text
//! g(w) = w * T(s0) + a * U(s0),   T(s0) = int_{s0}^{2} rho~,
//!                                 U(s0) = int_{s0}^{2} s rho~(s) ds,
//! ```
//!
//! both exact polynomial expressions. Outside the transition band
//! (|x - y| >= delta) the function returns max(x, y) *bit-exactly*; inside
//! it is smooth, symmetric, majorizes max, and preserves
//! plurisubharmonicity when composed with psh inputs.

use serde::{Deserialize, Serialize};

use crate::error::{CalcError, CalcResult};
use crate::potentials::{Constraint, Domain, PotentialField};

// ---------------------------------------------------------------------------
// Dense univariate polynomials (ascending coefficients)
// ---------------------------------------------------------------------------

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Antiderivative with zero constant term.
fn poly_integrate(coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len() + 1];
    for (k, &c) in coeffs.iter().enumerate() {
        out[k + 1] = c / (k + 1) as f64;
    }
    out
}

/// Multiply by x (used to form s * rho~(s)).
fn poly_shift_up(coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    out.extend_from_slice(coeffs);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

// ---------------------------------------------------------------------------
// Mollifier kernels
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct KernelRepr {
    coeffs: Vec<f64>,
}

/// An even polynomial mollifier rho on [-1, 1] with rho >= 0,
/// rho(+-1) = 0, and total mass 1, together with cached antiderivatives of
/// its autocorrelation. The cached tables make the closed-form regularized
/// max cheap enough for finite-difference inner loops.
///
/// Serialization stores only the raw (pre-normalization) coefficients; all
/// derived tables are recomputed on deserialization, so a round trip
/// reproduces the kernel bit-for-bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct MollifierKernel {
    /// Raw coefficients as supplied, ascending in h; odd entries are zero.
    raw: Vec<f64>,
    /// Normalized rho coefficients (unit mass on [-1, 1]).
    coeffs: Vec<f64>,
    /// Autocorrelation Q(s) = (rho * rho)(s) for s in [0, 2].
    q: Vec<f64>,
    /// IQ(s) = int_0^s Q.
    iq: Vec<f64>,
    /// ISQ(s) = int_0^s u Q(u) du.
    isq: Vec<f64>,
}

impl PartialEq for MollifierKernel {
    fn eq(&self, other: &Self) -> bool {
        self.raw == other.raw
    }
}

impl TryFrom<KernelRepr> for MollifierKernel {
    type Error = CalcError;
    fn try_from(r: KernelRepr) -> CalcResult<Self> {
        MollifierKernel::from_even_coeffs(r.coeffs)
    }
}

impl From<MollifierKernel> for KernelRepr {
    fn from(k: MollifierKernel) -> KernelRepr {
        KernelRepr { coeffs: k.raw }
    }
}

impl Default for MollifierKernel {
    fn default() -> Self {
        MollifierKernel::polynomial(2).expect("default kernel degree is valid")
    }
}

impl MollifierKernel {
    /// The standard family rho(h) = c_m (1 - h^2)^m, m >= 2. The
    /// normalization constant is computed exactly from the binomial
    /// expansion (c_2 = 15/16).
    pub fn polynomial(m: u32) -> CalcResult<Self> {
        if m < 2 {
            return Err(CalcError::parameter(
                "kernel exponent must be >= 2 for a C^1 mollifier",
            ));
        }
        let mut coeffs = vec![0.0; 2 * m as usize + 1];
        for k in 0..=m as usize {
            coeffs[2 * k] = binomial(m as usize, k) * if k % 2 == 0 { 1.0 } else { -1.0 };
        }
        MollifierKernel::from_even_coeffs(coeffs)
    }

    /// Build from raw even-polynomial coefficients (ascending in h). The
    /// polynomial must be even, nonnegative on [-1, 1], and vanish at the
    /// endpoints; it is rescaled here so its integral over [-1, 1] is 1.
    pub fn from_even_coeffs(coeffs: Vec<f64>) -> CalcResult<Self> {
        if coeffs.is_empty() || !coeffs.iter().all(|c| c.is_finite()) {
            return Err(CalcError::parameter("kernel coefficients must be finite"));
        }
        if coeffs.iter().skip(1).step_by(2).any(|&c| c != 0.0) {
            return Err(CalcError::parameter("kernel polynomial must be even"));
        }
        if poly_eval(&coeffs, 1.0).abs() > 1e-12 {
            return Err(CalcError::parameter("kernel must vanish at the support boundary"));
        }
        for i in 0..=200 {
            let h = i as f64 / 200.0;
            if poly_eval(&coeffs, h) < -1e-12 {
                return Err(CalcError::parameter("kernel must be nonnegative on [-1, 1]"));
            }
        }
        // Normalize: integral over [-1,1] of an even polynomial.
        let anti = poly_integrate(&coeffs);
        let mass = 2.0 * poly_eval(&anti, 1.0);
        if mass <= 0.0 {
            return Err(CalcError::parameter("kernel must have positive mass"));
        }
        let raw = coeffs;
        let coeffs: Vec<f64> = raw.iter().map(|c| c / mass).collect();
        let q = autocorrelation(&coeffs);
        let iq = poly_integrate(&q);
        let isq = poly_integrate(&poly_shift_up(&q));
        Ok(MollifierKernel { raw, coeffs, q, iq, isq })
    }

    /// rho(h) for |h| <= 1 (0 outside).
    pub fn density(&self, h: f64) -> f64 {
        if h.abs() > 1.0 {
            0.0
        } else {
            poly_eval(&self.coeffs, h)
        }
    }

    /// The autocorrelation rho~(s) = int rho(t) rho(t - s) dt, supported on
    /// [-2, 2] and even.
    pub fn autocorrelation_at(&self, s: f64) -> f64 {
        let s = s.abs();
        if s >= 2.0 {
            0.0
        } else {
            poly_eval(&self.q, s)
        }
    }

    /// Normalized (unit-mass) coefficients of rho.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Polynomial coefficients of the autocorrelation on [0, 2].
    pub fn autocorrelation_coeffs(&self) -> &[f64] {
        &self.q
    }

    /// T(s0) = int_{s0}^{2} rho~(s) ds for s0 in [-2, 2].
    fn tail_mass(&self, s0: f64) -> f64 {
        let iq2 = poly_eval(&self.iq, 2.0);
        if s0 >= 0.0 {
            iq2 - poly_eval(&self.iq, s0)
        } else {
            iq2 + poly_eval(&self.iq, -s0)
        }
    }

    /// U(s0) = int_{s0}^{2} s rho~(s) ds for s0 in [-2, 2].
    fn tail_moment(&self, s0: f64) -> f64 {
        let isq2 = poly_eval(&self.isq, 2.0);
        if s0 >= 0.0 {
            isq2 - poly_eval(&self.isq, s0)
        } else {
            isq2 - poly_eval(&self.isq, -s0)
        }
    }
}

/// Q(s) = int_{s-1}^{1} rho(t) rho(t-s) dt as an exact polynomial in s,
/// valid for s in [0, 2]. Expand rho(t) rho(t-s) as a bivariate polynomial
/// in (t, s), antidifferentiate in t, and evaluate at the limits.
fn autocorrelation(p: &[f64]) -> Vec<f64> {
    let d = p.len() - 1;
    // c[m][l]: coefficient of t^m s^l.
    let mut c = vec![vec![0.0; d + 1]; 2 * d + 1];
    for (i, &pi) in p.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        for (j, &pj) in p.iter().enumerate() {
            if pj == 0.0 {
                continue;
            }
            for k in 0..=j {
                let sign = if (j - k) % 2 == 0 { 1.0 } else { -1.0 };
                c[i + k][j - k] += pi * pj * binomial(j, k) * sign;
            }
        }
    }
    let mut q = vec![0.0; 2 * d + 2];
    for (m, row) in c.iter().enumerate() {
        for (l, &cml) in row.iter().enumerate() {
            if cml == 0.0 {
                continue;
            }
            let anti = cml / (m + 1) as f64;
            // Upper limit t = 1 contributes anti * s^l.
            q[l] += anti;
            // Lower limit t = s - 1 contributes anti * (s-1)^{m+1} s^l.
            for r in 0..=(m + 1) {
                let sign = if (m + 1 - r) % 2 == 0 { 1.0 } else { -1.0 };
                q[l + r] -= anti * binomial(m + 1, r) * sign;
            }
        }
    }
    while q.len() > 1 && q.last() == Some(&0.0) {
        q.pop();
    }
    q
}

// ---------------------------------------------------------------------------
// Regularized max
// ---------------------------------------------------------------------------

/// Transition width plus kernel for the regularized maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegMaxParams {
    delta: f64,
    kernel: MollifierKernel,
}

impl RegMaxParams {
    pub fn new(delta: f64, kernel: MollifierKernel) -> CalcResult<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(CalcError::parameter("transition width delta must be positive"));
        }
        Ok(RegMaxParams { delta, kernel })
    }

    pub fn with_default_kernel(delta: f64) -> CalcResult<Self> {
        RegMaxParams::new(delta, MollifierKernel::default())
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kernel(&self) -> &MollifierKernel {
        &self.kernel
    }
}

/// Smoothed maximum. Returns max(x, y) bit-exactly whenever
/// |x - y| >= delta; inside the band it evaluates the closed form,
/// clamped below by the hard maximum so majorization holds bit-for-bit.
pub fn reg_max(x: f64, y: f64, params: &RegMaxParams) -> f64 {
    let delta = params.delta;
    if (x - y).abs() >= delta {
        return x.max(y);
    }
    let a = 0.5 * delta;
    let w = y - x;
    let s0 = -w / a;
    let v = x + w * params.kernel.tail_mass(s0) + a * params.kernel.tail_moment(s0);
    // The tail integrals are differences of polynomial evaluations, which
    // cancel catastrophically as |x - y| approaches delta: the computed
    // value can land a few ulps below the hard max even though the true
    // function never does. Clamp so the majorization is unconditional.
    v.max(x.max(y))
}

/// Regularized max of two fields. Where one field has a logarithmic pole
/// (value -infinity), the max is the other field's value exactly, so the
/// result lifts pole-type domain exclusions; all other evaluation errors
/// propagate.
pub fn reg_max_field(
    f: &PotentialField,
    g: &PotentialField,
    params: &RegMaxParams,
) -> CalcResult<PotentialField> {
    let dim = f.domain().dim();
    if g.domain().dim() != dim {
        return Err(CalcError::parameter("field dimensions do not match"));
    }
    let mut domain = Domain::entire(dim);
    for c in f.domain().constraints().iter().chain(g.domain().constraints()) {
        match c {
            Constraint::OffVariety { pole: true, .. } => {} // lifted by the max
            other => domain = domain.with(other.clone()),
        }
    }
    let (f, g, params_owned) = (f.clone(), g.clone(), params.clone());
    let label = format!("regmax({}|{})", f.label(), g.label());
    Ok(PotentialField::new(&label, domain, move |z| {
        match (f.eval(z), g.eval(z)) {
            (Ok(a), Ok(b)) => Ok(reg_max(a, b, &params_owned)),
            (Err(CalcError::Pole(_)), Ok(b)) => Ok(b),
            (Ok(a), Err(CalcError::Pole(_))) => Ok(a),
            (Err(e), _) => Err(e),
            (_, Err(e)) => Err(e),
        }
    }))
}
