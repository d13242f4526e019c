//! Potential fields on C^n and their building blocks.
//!
//! A [`PotentialField`] bundles an evaluation closure with an explicit
//! [`Domain`] and, when the potential is homogeneous under a radial flow,
//! the [`RadialOperator`] generating that flow. Constructors are provided
//! for the standard examples: the squared norm, weighted cone potentials
//! defined implicitly by sum_j |z_j|^2 phi^{-alpha_j} = 1, and potentials
//! with logarithmic poles along a polynomial variety.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{levi_form, ComplexPoint, FdScheme, HermitianForm, Tangent};
use crate::error::{CalcError, CalcResult};

// ---------------------------------------------------------------------------
// Polynomial maps and varieties
// ---------------------------------------------------------------------------

/// One monomial: coeff * prod_j z_j^{powers[j]}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coeff: Complex64,
    pub powers: Vec<u32>,
}

/// A polynomial map C^n -> C given as a sum of monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyMap {
    dim: usize,
    terms: Vec<PolyTerm>,
}

impl PolyMap {
    pub fn new(dim: usize, terms: Vec<PolyTerm>) -> CalcResult<Self> {
        if dim == 0 {
            return Err(CalcError::parameter("polynomial dimension must be >= 1"));
        }
        for t in &terms {
            if t.powers.len() != dim {
                return Err(CalcError::parameter(format!(
                    "monomial exponent list has length {}, expected {dim}",
                    t.powers.len()
                )));
            }
            if !(t.coeff.re.is_finite() && t.coeff.im.is_finite()) {
                return Err(CalcError::numeric("monomial coefficient is not finite"));
            }
        }
        Ok(PolyMap { dim, terms })
    }

    /// The linear form sum_j coeffs[j] z_j.
    pub fn linear(coeffs: Vec<Complex64>) -> CalcResult<Self> {
        let dim = coeffs.len();
        let terms = coeffs
            .into_iter()
            .enumerate()
            .map(|(j, c)| {
                let mut powers = vec![0u32; dim];
                powers[j] = 1;
                PolyTerm { coeff: c, powers }
            })
            .collect();
        PolyMap::new(dim, terms)
    }

    /// The coordinate function z_j.
    pub fn coordinate(dim: usize, j: usize) -> CalcResult<Self> {
        if j >= dim {
            return Err(CalcError::parameter("coordinate index out of range"));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
        coeffs[j] = Complex64::new(1.0, 0.0);
        PolyMap::linear(coeffs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, z: &ComplexPoint) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let mut m = t.coeff;
            for (zj, &p) in z.coords().iter().zip(t.powers.iter()) {
                for _ in 0..p {
                    m *= zj;
                }
            }
            acc += m;
        }
        acc
    }

    /// If the polynomial is a homogeneous linear form, return its
    /// coefficient vector (summing duplicate monomials).
    pub fn homogeneous_linear_coeffs(&self) -> Option<Vec<Complex64>> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.dim];
        for t in &self.terms {
            let total: u32 = t.powers.iter().sum();
            if total != 1 {
                return None;
            }
            let j = t.powers.iter().position(|&p| p == 1).expect("degree-1 monomial");
            coeffs[j] += t.coeff;
        }
        Some(coeffs)
    }
}

/// A variety cut out by the common zeros of polynomial generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarietySpec {
    ambient_dim: usize,
    generators: Vec<PolyMap>,
}

impl VarietySpec {
    pub fn new(ambient_dim: usize, generators: Vec<PolyMap>) -> CalcResult<Self> {
        if generators.is_empty() {
            return Err(CalcError::parameter("variety needs at least one generator"));
        }
        for g in &generators {
            if g.dim() != ambient_dim {
                return Err(CalcError::parameter("generator dimension mismatch"));
            }
        }
        Ok(VarietySpec { ambient_dim, generators })
    }

    /// The hyperplane z_j = 0.
    pub fn coordinate_hyperplane(ambient_dim: usize, j: usize) -> CalcResult<Self> {
        VarietySpec::new(ambient_dim, vec![PolyMap::coordinate(ambient_dim, j)?])
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn generators(&self) -> &[PolyMap] {
        &self.generators
    }

    /// sum_k |g_k(z)|^2; vanishes exactly on the variety.
    pub fn sum_sq_moduli(&self, z: &ComplexPoint) -> f64 {
        self.generators.iter().map(|g| g.eval(z).norm_sqr()).sum()
    }

    /// Exact linear model, available when every generator is a homogeneous
    /// linear form. Needed for true distances and projections.
    pub fn linear_model(&self) -> CalcResult<LinearSubspace> {
        let rows: Option<Vec<Vec<Complex64>>> = self
            .generators
            .iter()
            .map(|g| g.homogeneous_linear_coeffs())
            .collect();
        let rows = rows.ok_or_else(|| {
            CalcError::parameter(
                "operation requires a variety with homogeneous linear generators",
            )
        })?;
        LinearSubspace::from_normal_rows(self.ambient_dim, rows)
    }
}

/// A complex-linear subspace Z of C^n, stored through an orthonormal basis
/// of its Hermitian orthocomplement ("normals") plus an orthonormal basis
/// of Z itself.
#[derive(Debug, Clone)]
pub struct LinearSubspace {
    ambient_dim: usize,
    normals: Vec<Vec<Complex64>>,
    tangents: Vec<Vec<Complex64>>,
}

fn hermitian_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

fn vec_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

impl LinearSubspace {
    /// Build Z = ker of the linear forms z -> sum_j row_j z_j. The normal
    /// vector of the form with coefficients a is conj(a).
    fn from_normal_rows(ambient_dim: usize, rows: Vec<Vec<Complex64>>) -> CalcResult<Self> {
        let mut normals: Vec<Vec<Complex64>> = Vec::new();
        for row in rows {
            let mut v: Vec<Complex64> = row.iter().map(|c| c.conj()).collect();
            for n in &normals {
                let proj = hermitian_inner(&v, n);
                for (vj, nj) in v.iter_mut().zip(n.iter()) {
                    *vj -= proj * nj;
                }
            }
            let norm = vec_norm(&v);
            if norm > 1e-12 {
                for vj in v.iter_mut() {
                    *vj /= norm;
                }
                normals.push(v);
            }
        }
        if normals.len() >= ambient_dim {
            return Err(CalcError::parameter(
                "variety generators cut out the zero subspace; nothing to glue along",
            ));
        }
        // Complete to an orthonormal basis; the leftovers span Z.
        let mut tangents: Vec<Vec<Complex64>> = Vec::new();
        for j in 0..ambient_dim {
            let mut v = vec![Complex64::new(0.0, 0.0); ambient_dim];
            v[j] = Complex64::new(1.0, 0.0);
            for b in normals.iter().chain(tangents.iter()) {
                let proj = hermitian_inner(&v, b);
                for (vj, bj) in v.iter_mut().zip(b.iter()) {
                    *vj -= proj * bj;
                }
            }
            let norm = vec_norm(&v);
            if norm > 1e-8 {
                for vj in v.iter_mut() {
                    *vj /= norm;
                }
                tangents.push(v);
            }
        }
        Ok(LinearSubspace { ambient_dim, normals, tangents })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Complex dimension of Z.
    pub fn dim(&self) -> usize {
        self.tangents.len()
    }

    pub fn tangent_basis(&self) -> &[Vec<Complex64>] {
        &self.tangents
    }

    /// Orthonormal basis of the Hermitian orthocomplement of Z.
    pub fn normal_basis(&self) -> &[Vec<Complex64>] {
        &self.normals
    }

    /// Coordinates of the projection of z onto Z in the tangent basis:
    /// w_i = <z, b_i>. Composing with the embedding reproduces project(z).
    pub fn coordinates(&self, z: &ComplexPoint) -> ComplexPoint {
        let coords: Vec<Complex64> = self
            .tangents
            .iter()
            .map(|b| hermitian_inner(z.coords(), b))
            .collect();
        ComplexPoint::new(coords).expect("coordinates of a finite point are finite")
    }

    /// Euclidean distance from z to Z.
    pub fn distance(&self, z: &ComplexPoint) -> f64 {
        self.normals
            .iter()
            .map(|n| hermitian_inner(z.coords(), n).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Hermitian-orthogonal projection of z onto Z.
    pub fn project(&self, z: &ComplexPoint) -> ComplexPoint {
        let mut coords = z.coords().to_vec();
        for n in &self.normals {
            let proj = hermitian_inner(z.coords(), n);
            for (cj, nj) in coords.iter_mut().zip(n.iter()) {
                *cj -= proj * nj;
            }
        }
        ComplexPoint::new(coords).expect("projection of a finite point is finite")
    }

    /// The affine embedding C^k -> C^n sending w to sum w_i b_i for the
    /// orthonormal tangent basis b_i of Z.
    pub fn embedding(&self) -> AffineEmbedding {
        AffineEmbedding {
            base: vec![Complex64::new(0.0, 0.0); self.ambient_dim],
            basis: self.tangents.clone(),
        }
    }
}

/// Affine map C^k -> C^n, w -> base + sum_i w_i basis_i.
#[derive(Debug, Clone)]
pub struct AffineEmbedding {
    base: Vec<Complex64>,
    basis: Vec<Vec<Complex64>>,
}

impl AffineEmbedding {
    pub fn new(base: Vec<Complex64>, basis: Vec<Vec<Complex64>>) -> CalcResult<Self> {
        if basis.is_empty() {
            return Err(CalcError::parameter("embedding needs at least one basis vector"));
        }
        for b in &basis {
            if b.len() != base.len() {
                return Err(CalcError::parameter("embedding basis dimension mismatch"));
            }
        }
        Ok(AffineEmbedding { base, basis })
    }

    pub fn source_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn target_dim(&self) -> usize {
        self.base.len()
    }

    pub fn apply(&self, w: &ComplexPoint) -> CalcResult<ComplexPoint> {
        if w.dim() != self.basis.len() {
            return Err(CalcError::parameter("embedding source dimension mismatch"));
        }
        let mut coords = self.base.clone();
        for (wi, b) in w.coords().iter().zip(self.basis.iter()) {
            for (cj, bj) in coords.iter_mut().zip(b.iter()) {
                *cj += wi * bj;
            }
        }
        ComplexPoint::new(coords)
    }
}

// ---------------------------------------------------------------------------
// Domains
// ---------------------------------------------------------------------------

/// One restriction on where a field may be evaluated.
#[derive(Debug, Clone)]
pub enum Constraint {
    /// |z| <= radius.
    InsideBall { radius: f64 },
    /// |z| > radius (radius 0 excludes exactly the origin).
    OutsideBall { radius: f64 },
    /// z must avoid a variety. `clearance` is advisory (samplers keep that
    /// distance); evaluation only fails *on* the variety, as a pole when
    /// `pole` is set and as a plain domain violation otherwise.
    OffVariety { variety: VarietySpec, clearance: f64, pole: bool },
}

/// Where a potential field lives: a dimension plus a constraint list.
#[derive(Debug, Clone)]
pub struct Domain {
    dim: usize,
    constraints: Vec<Constraint>,
}

impl Domain {
    pub fn entire(dim: usize) -> Self {
        Domain { dim, constraints: Vec::new() }
    }

    pub fn with(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn check(&self, z: &ComplexPoint) -> CalcResult<()> {
        if z.dim() != self.dim {
            return Err(CalcError::parameter(format!(
                "point dimension {} does not match domain dimension {}",
                z.dim(),
                self.dim
            )));
        }
        for c in &self.constraints {
            match c {
                Constraint::InsideBall { radius } => {
                    if z.norm() > *radius {
                        return Err(CalcError::domain(format!(
                            "|z| = {} exceeds ball radius {radius}",
                            z.norm()
                        )));
                    }
                }
                Constraint::OutsideBall { radius } => {
                    if z.norm() <= *radius {
                        return Err(CalcError::domain(format!(
                            "|z| = {} inside excluded ball of radius {radius}",
                            z.norm()
                        )));
                    }
                }
                Constraint::OffVariety { variety, pole, .. } => {
                    if variety.sum_sq_moduli(z) == 0.0 {
                        let msg = "point lies on the excluded variety".to_string();
                        return Err(if *pole {
                            CalcError::Pole(msg)
                        } else {
                            CalcError::Domain(msg)
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, z: &ComplexPoint) -> bool {
        self.check(z).is_ok()
    }
}

// ---------------------------------------------------------------------------
// Radial operators (generators of scaling flows)
// ---------------------------------------------------------------------------

/// Generator A of a radial flow r(t, z) = exp(tA) z. All eigenvalues must
/// have strictly positive real part, so the flow contracts to the origin
/// as t -> -infinity.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialOperator {
    /// A = diag(weights) with positive real weights.
    Diagonal(Vec<f64>),
    /// Dense complex matrix, row-major.
    General { dim: usize, entries: Vec<Complex64> },
}

impl RadialOperator {
    pub fn identity(dim: usize) -> Self {
        RadialOperator::Diagonal(vec![1.0; dim])
    }

    pub fn diagonal(weights: Vec<f64>) -> CalcResult<Self> {
        if weights.is_empty() {
            return Err(CalcError::parameter("radial operator needs dimension >= 1"));
        }
        if !weights.iter().all(|w| w.is_finite() && *w > 0.0) {
            return Err(CalcError::parameter("radial weights must be positive"));
        }
        Ok(RadialOperator::Diagonal(weights))
    }

    pub fn general(dim: usize, entries: Vec<Complex64>) -> CalcResult<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(CalcError::parameter("radial operator entries do not match dimension"));
        }
        let op = RadialOperator::General { dim, entries };
        let (min_re, _) = op.eigenvalue_real_span()?;
        if min_re <= 0.0 {
            return Err(CalcError::parameter(format!(
                "radial operator has eigenvalue with real part {min_re} <= 0"
            )));
        }
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        match self {
            RadialOperator::Diagonal(w) => w.len(),
            RadialOperator::General { dim, .. } => *dim,
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            RadialOperator::Diagonal(w) => w.iter().all(|&x| x == 1.0),
            RadialOperator::General { .. } => false,
        }
    }

    /// The tangent vector A z at the point z.
    pub fn apply(&self, z: &ComplexPoint) -> Tangent {
        let coords = match self {
            RadialOperator::Diagonal(w) => z
                .coords()
                .iter()
                .zip(w.iter())
                .map(|(zj, &wj)| wj * zj)
                .collect(),
            RadialOperator::General { dim, entries } => {
                let n = *dim;
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| entries[j * n + k] * z.coords()[k])
                            .sum::<Complex64>()
                    })
                    .collect()
            }
        };
        Tangent::new(coords).expect("A z is finite for finite z")
    }

    /// Dense exp(tA), row-major.
    pub fn flow_matrix(&self, t: f64) -> CalcResult<Vec<Complex64>> {
        match self {
            RadialOperator::Diagonal(w) => {
                let n = w.len();
                let mut m = vec![Complex64::new(0.0, 0.0); n * n];
                for (j, &wj) in w.iter().enumerate() {
                    m[j * n + j] = Complex64::new((t * wj).exp(), 0.0);
                }
                Ok(m)
            }
            RadialOperator::General { dim, entries } => {
                let scaled: Vec<Complex64> = entries.iter().map(|e| t * e).collect();
                matrix_exp(*dim, &scaled)
            }
        }
    }

    /// The flow point exp(tA) z.
    pub fn flow(&self, z: &ComplexPoint, t: f64) -> CalcResult<ComplexPoint> {
        match self {
            RadialOperator::Diagonal(w) => {
                let coords = z
                    .coords()
                    .iter()
                    .zip(w.iter())
                    .map(|(zj, &wj)| (t * wj).exp() * zj)
                    .collect();
                ComplexPoint::new(coords)
            }
            RadialOperator::General { dim, .. } => {
                let m = self.flow_matrix(t)?;
                let n = *dim;
                let coords = (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| m[j * n + k] * z.coords()[k])
                            .sum::<Complex64>()
                    })
                    .collect();
                ComplexPoint::new(coords)
            }
        }
    }

    /// (min, max) of the real parts of the eigenvalues of A.
    pub fn eigenvalue_real_span(&self) -> CalcResult<(f64, f64)> {
        match self {
            RadialOperator::Diagonal(w) => {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for &x in w {
                    min = min.min(x);
                    max = max.max(x);
                }
                Ok((min, max))
            }
            RadialOperator::General { dim, entries } => {
                let eigs = dense_eigenvalues(*dim, entries)?;
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for e in eigs {
                    min = min.min(e.re);
                    max = max.max(e.re);
                }
                Ok((min, max))
            }
        }
    }

    /// max Re(lambda) over eigenvalues of A.
    pub fn spectral_abscissa(&self) -> CalcResult<f64> {
        Ok(self.eigenvalue_real_span()?.1)
    }
}

fn matrix_mul(n: usize, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

fn frobenius(m: &[Complex64]) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// exp of a small dense complex matrix by scaling-and-squaring with a
/// Taylor series on the scaled matrix.
fn matrix_exp(n: usize, a: &[Complex64]) -> CalcResult<Vec<Complex64>> {
    let norm = frobenius(a);
    if !norm.is_finite() {
        return Err(CalcError::numeric("matrix exponential of non-finite matrix"));
    }
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(squarings as i32);
    let b: Vec<Complex64> = a.iter().map(|z| scale * z).collect();
    let mut result = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        result[j * n + j] = Complex64::new(1.0, 0.0);
    }
    let mut term = result.clone();
    for k in 1..=64 {
        term = matrix_mul(n, &term, &b);
        for t in term.iter_mut() {
            *t /= k as f64;
        }
        for (r, t) in result.iter_mut().zip(term.iter()) {
            *r += t;
        }
        if frobenius(&term) < 1e-18 * frobenius(&result).max(1.0) {
            break;
        }
    }
    for _ in 0..squarings {
        result = matrix_mul(n, &result, &result);
    }
    Ok(result)
}

/// All eigenvalues of a small dense complex matrix: characteristic
/// polynomial by the Faddeev–LeVerrier recursion, roots by Durand–Kerner.
fn dense_eigenvalues(n: usize, a: &[Complex64]) -> CalcResult<Vec<Complex64>> {
    // Monic characteristic polynomial coefficients c[0..=n], c[n] = 1:
    // p(x) = sum_k c[k] x^k.
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
    coeffs[n] = Complex64::new(1.0, 0.0);
    let mut m = a.to_vec();
    for k in 1..=n {
        let trace: Complex64 = (0..n).map(|j| m[j * n + j]).sum();
        let c = -trace / k as f64;
        coeffs[n - k] = c;
        if k < n {
            let mut shifted = m.clone();
            for j in 0..n {
                shifted[j * n + j] += c;
            }
            m = matrix_mul(n, a, &shifted);
        }
    }
    // Durand–Kerner iteration on the monic polynomial.
    let scale = frobenius(a).max(1.0);
    let eval = |x: Complex64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in (0..=n).rev() {
            acc = acc * x + coeffs[k];
        }
        acc
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| scale * seed.powu(k as u32 + 1)).collect();
    for _ in 0..500 {
        let mut shift = 0.0f64;
        let prev = roots.clone();
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= prev[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                denom = Complex64::new(1e-300, 0.0);
            }
            let delta = eval(prev[i]) / denom;
            roots[i] = prev[i] - delta;
            shift = shift.max(delta.norm());
        }
        if shift < 1e-13 * scale {
            return Ok(roots);
        }
    }
    Err(CalcError::Convergence("eigenvalue root finding did not converge".into()))
}

// ---------------------------------------------------------------------------
// Potential fields
// ---------------------------------------------------------------------------

type EvalFn = dyn Fn(&ComplexPoint) -> CalcResult<f64> + Send + Sync;

/// A real-valued field on (part of) C^n.
#[derive(Clone)]
pub struct PotentialField {
    label: String,
    domain: Domain,
    homogeneity: Option<RadialOperator>,
    eval_fn: Arc<EvalFn>,
}

impl fmt::Debug for PotentialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialField")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("homogeneity", &self.homogeneity)
            .finish_non_exhaustive()
    }
}

impl PotentialField {
    pub fn new(
        label: &str,
        domain: Domain,
        eval_fn: impl Fn(&ComplexPoint) -> CalcResult<f64> + Send + Sync + 'static,
    ) -> Self {
        PotentialField {
            label: label.to_string(),
            domain,
            homogeneity: None,
            eval_fn: Arc::new(eval_fn),
        }
    }

    pub fn with_homogeneity(mut self, op: RadialOperator) -> Self {
        self.homogeneity = Some(op);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// The radial operator A for which f(exp(tA) z) = e^{2t} f(z), when the
    /// field is known to be homogeneous.
    pub fn homogeneity(&self) -> Option<&RadialOperator> {
        self.homogeneity.as_ref()
    }

    pub fn eval(&self, z: &ComplexPoint) -> CalcResult<f64> {
        self.domain.check(z)?;
        let v = (self.eval_fn)(z)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CalcError::numeric(format!(
                "field '{}' returned {v} at {:?}",
                self.label,
                z.to_reals()
            )))
        }
    }

    pub fn levi(&self, z: &ComplexPoint, scheme: &FdScheme) -> CalcResult<HermitianForm> {
        levi_form(|p| self.eval(p), z, scheme)
    }
}

/// The flat potential |z|^2 with the identity radial operator.
pub fn euclidean_potential(dim: usize) -> PotentialField {
    PotentialField::new("euclidean", Domain::entire(dim), |z| Ok(z.norm_sq()))
        .with_homogeneity(RadialOperator::identity(dim))
}

/// Weighted cone potential: the unique phi > 0 with
/// sum_j |z_j|^2 phi^{-alpha_j} = 1, solved to machine precision. It is
/// 2-homogeneous for the diagonal operator A = diag(alpha): substituting
/// z -> exp(tA) z multiplies |z_j|^2 by e^{2 alpha_j t}, which the factor
/// phi^{-alpha_j} absorbs exactly when phi -> e^{2t} phi.
pub fn hopf_potential(weights: &[f64]) -> CalcResult<PotentialField> {
    let op = RadialOperator::diagonal(weights.to_vec())?;
    let alphas = weights.to_vec();
    let domain = Domain::entire(weights.len()).with(Constraint::OutsideBall { radius: 0.0 });
    let field = PotentialField::new("weighted_cone", domain, move |z| {
        solve_cone_radius(&alphas, z)
    })
    .with_homogeneity(op);
    Ok(field)
}

/// Solve sum_j s_j phi^{-alpha_j} = 1 for phi > 0, where s_j = |z_j|^2.
/// The left side is strictly decreasing in phi, so the root is unique;
/// a bracketed Newton iteration with bisection fallback converges to the
/// last bit.
fn solve_cone_radius(alphas: &[f64], z: &ComplexPoint) -> CalcResult<f64> {
    if z.dim() != alphas.len() {
        return Err(CalcError::parameter("point dimension does not match weights"));
    }
    let s: Vec<f64> = z.coords().iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = s.iter().sum();
    if total == 0.0 {
        return Err(CalcError::domain("cone potential undefined at the origin"));
    }
    let f = |phi: f64| -> f64 {
        s.iter()
            .zip(alphas.iter())
            .map(|(&sj, &aj)| sj * phi.powf(-aj))
            .sum::<f64>()
            - 1.0
    };
    let df = |phi: f64| -> f64 {
        s.iter()
            .zip(alphas.iter())
            .map(|(&sj, &aj)| -aj * sj * phi.powf(-aj - 1.0))
            .sum::<f64>()
    };
    // Bracket the root: f is decreasing, so grow/shrink from |z|^2.
    let mut lo = total;
    let mut hi = total;
    for _ in 0..2048 {
        if f(lo) >= 0.0 {
            break;
        }
        lo *= 0.5;
    }
    for _ in 0..2048 {
        if f(hi) <= 0.0 {
            break;
        }
        hi *= 2.0;
    }
    if !(f(lo) >= 0.0 && f(hi) <= 0.0) {
        return Err(CalcError::Convergence("could not bracket cone radius".into()));
    }
    let mut phi = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fv = f(phi);
        if fv == 0.0 {
            return Ok(phi);
        }
        if fv > 0.0 {
            lo = phi;
        } else {
            hi = phi;
        }
        let d = df(phi);
        let newton = phi - fv / d;
        let next = if d < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - phi).abs() <= f64::EPSILON * phi.abs() {
            return Ok(next);
        }
        phi = next;
    }
    Ok(phi)
}

/// Potential with logarithmic poles along the variety:
/// phi(z) = 1/2 log sum_k |g_k(z)|^2. Evaluation on the variety itself
/// reports a pole.
pub fn log_pole_potential(variety: VarietySpec) -> PotentialField {
    let dim = variety.ambient_dim();
    let domain = Domain::entire(dim).with(Constraint::OffVariety {
        variety: variety.clone(),
        clearance: 0.0,
        pole: true,
    });
    PotentialField::new("log_pole", domain, move |z| {
        let s = variety.sum_sq_moduli(z);
        if s == 0.0 {
            return Err(CalcError::Pole("log potential at its pole locus".into()));
        }
        Ok(0.5 * s.ln())
    })
}

/// a*f + b. Requires a >= 0 so plurisubharmonicity is preserved. The
/// homogeneity marker survives only when b = 0 (a constant shift breaks
/// the scaling law).
pub fn affine_combine(f: &PotentialField, a: f64, b: f64) -> CalcResult<PotentialField> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(CalcError::parameter("affine coefficients must be finite"));
    }
    if a < 0.0 {
        return Err(CalcError::parameter(
            "affine_combine requires a >= 0 to preserve plurisubharmonicity",
        ));
    }
    let inner = f.clone();
    let mut out = PotentialField::new(
        &format!("affine({})", f.label()),
        f.domain().clone(),
        move |z| Ok(a * inner.eval(z)? + b),
    );
    if b == 0.0 {
        if let Some(op) = f.homogeneity() {
            out = out.with_homogeneity(op.clone());
        }
    }
    Ok(out)
}

/// The squared-distance bump c1 * d(z, Z)^2 for a linear variety Z.
pub fn distance_term(variety: &VarietySpec, c1: f64) -> CalcResult<PotentialField> {
    if !(c1.is_finite() && c1 > 0.0) {
        return Err(CalcError::parameter("distance term coefficient must be positive"));
    }
    let model = variety.linear_model()?;
    let dim = variety.ambient_dim();
    Ok(PotentialField::new(
        "distance_sq",
        Domain::entire(dim),
        move |z| {
            let d = model.distance(z);
            Ok(c1 * d * d)
        },
    ))
}

/// Pull a field back along an affine embedding: (pullback f)(w) = f(E w).
/// Domain checks happen in the ambient field, so ambient errors propagate.
pub fn pullback(f: &PotentialField, embedding: &AffineEmbedding) -> CalcResult<PotentialField> {
    if embedding.target_dim() != f.domain().dim() {
        return Err(CalcError::parameter("embedding target does not match field domain"));
    }
    let inner = f.clone();
    let emb = embedding.clone();
    Ok(PotentialField::new(
        &format!("pullback({})", f.label()),
        Domain::entire(embedding.source_dim()),
        move |w| inner.eval(&emb.apply(w)?),
    ))
}

// ---------------------------------------------------------------------------
// Serializable construction specs
// ---------------------------------------------------------------------------

/// Declarative description of a potential, used by configuration files.
/// Round-trips through serde and builds the corresponding field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Euclidean { dim: usize },
    Hopf { weights: Vec<f64> },
    LogPole { variety: VarietySpec },
    Affine { base: Box<PotentialSpec>, scale: f64, offset: f64 },
}

impl PotentialSpec {
    pub fn build(&self) -> CalcResult<PotentialField> {
        match self {
            PotentialSpec::Euclidean { dim } => {
                if *dim == 0 {
                    return Err(CalcError::parameter("potential dimension must be >= 1"));
                }
                Ok(euclidean_potential(*dim))
            }
            PotentialSpec::Hopf { weights } => hopf_potential(weights),
            PotentialSpec::LogPole { variety } => Ok(log_pole_potential(variety.clone())),
            PotentialSpec::Affine { base, scale, offset } => {
                affine_combine(&base.build()?, *scale, *offset)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PotentialSpec::Euclidean { dim } => *dim,
            PotentialSpec::Hopf { weights } => weights.len(),
            PotentialSpec::LogPole { variety } => variety.ambient_dim(),
            PotentialSpec::Affine { base, .. } => base.dim(),
        }
    }
}
