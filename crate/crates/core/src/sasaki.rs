//! Level-set geometry of cone potentials.
//!
//! A 2-homogeneous strictly psh potential f with radial operator A induces
//! a metric structure on the level set {f = level}; the distinguished
//! (Reeb) direction at p is i A p. For the round structure (f = |z|^2,
//! level 1) the metric is the unit-sphere metric and the curvature
//! operator satisfies
//!
//! ```text
//! R(X, xi) Y = g(xi, Y) X - g(X, Y) xi
//! ```
//!
//! for tangent fields X, Y. [`verify_sasaki_identity`] certifies this
//! numerically: it builds a transversal chart through each sample point by
//! projecting along the radial flow, pulls the ambient metric back through
//! finite differences, assembles Christoffel symbols and the curvature
//! tensor, and compares both sides. Sectional curvature through the Reeb
//! direction, Reeb tangency, and unit norm are certified alongside.
//!
//! The remaining operations deform a Reeb direction to a nearby
//! quasi-regular (rational) one and check orbit closure: rational
//! directions yield closed torus orbits with an exactly computable period,
//! irrational ones never return within any finite window.

use num_complex::Complex64;

use crate::calculus::{
    directional_derivative, levi_form, ComplexPoint, DiffOrder, FdScheme, Tangent,
};
use crate::cone_flow::project_to_level;
use crate::error::{CalcError, CalcResult};
use crate::potentials::{PotentialField, RadialOperator};
use crate::report::{Certificate, VerificationReport, WorseIs};
use crate::sampling::SeededLcg;

/// A level set {f = level} of a homogeneous potential, carrying the
/// ambient Levi metric.
#[derive(Debug, Clone)]
pub struct LevelSetStructure {
    potential: PotentialField,
    level: f64,
}

impl LevelSetStructure {
    pub fn new(potential: PotentialField, level: f64) -> CalcResult<Self> {
        if !(level.is_finite() && level > 0.0) {
            return Err(CalcError::parameter("level must be positive"));
        }
        if potential.homogeneity().is_none() {
            return Err(CalcError::parameter(
                "level-set structure requires a potential with a radial operator",
            ));
        }
        Ok(LevelSetStructure { potential, level })
    }

    pub fn potential(&self) -> &PotentialField {
        &self.potential
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn operator(&self) -> &RadialOperator {
        self.potential.homogeneity().expect("validated at construction")
    }

    /// Whether f = |z|^2 with the identity operator: the round sphere.
    pub fn is_round(&self) -> bool {
        self.operator().is_identity() && self.potential.label() == "euclidean"
    }

    /// |f(p) - level| relative to the level.
    pub fn level_residual(&self, p: &ComplexPoint) -> CalcResult<f64> {
        Ok((self.potential.eval(p)? - self.level).abs() / self.level.max(1.0))
    }

    /// The ambient metric at p: the Levi form of the potential, paired on
    /// real tangent vectors.
    pub fn metric_form(&self, p: &ComplexPoint, scheme: &FdScheme) -> CalcResult<crate::calculus::HermitianForm> {
        self.potential.levi(p, scheme)
    }
}

/// The Reeb vector i A p at a point of the level set. Fails when p does
/// not lie on the level set (relative tolerance 1e-9).
pub fn reeb_field(structure: &LevelSetStructure, p: &ComplexPoint) -> CalcResult<Tangent> {
    let residual = structure.level_residual(p)?;
    if residual > 1e-9 {
        return Err(CalcError::domain(format!(
            "point is off the level set (relative residual {residual:.3e})"
        )));
    }
    Ok(structure.operator().apply(p).rotate_i())
}

// ---------------------------------------------------------------------------
// Chart geometry: metric, Christoffels, curvature via the radial projection
// ---------------------------------------------------------------------------

/// Finite-difference steps for the curvature pipeline. Chart and metric
/// derivatives use 4th-order stencils; the listed steps balance truncation
/// against subtraction noise so the assembled curvature carries roughly
/// 1e-4 absolute error on unit-scale geometry.
const CHART_STEP: f64 = 1e-2;
const METRIC_DERIV_STEP: f64 = 1e-2;
const CURVATURE_DERIV_STEP: f64 = 5e-2;
const LEVI_SCHEME: FdScheme = FdScheme { step: 1e-3, order: DiffOrder::Four };

struct ChartGeometry<'a> {
    structure: &'a LevelSetStructure,
    base: ComplexPoint,
    /// Orthonormal real frame of the Euclidean complement of the flow
    /// direction A p; the chart sends x to project(p + sum x_i e_i).
    frame: Vec<Tangent>,
}

/// Orthonormal (real) basis of the orthogonal complement of `avoid`.
fn complement_frame(avoid: &Tangent, dim: usize) -> CalcResult<Vec<Tangent>> {
    let n = avoid.norm();
    if n == 0.0 {
        return Err(CalcError::parameter("flow direction vanishes"));
    }
    let mut basis = vec![avoid.scale(1.0 / n)];
    let real_dim = 2 * dim;
    for axis in 0..real_dim {
        let mut reals = vec![0.0; real_dim];
        reals[axis] = 1.0;
        let mut v = Tangent::from_reals(&reals);
        for b in &basis {
            let proj = v.real_dot(b);
            v = v.add(&b.scale(-proj));
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v.scale(1.0 / norm));
        }
    }
    if basis.len() != real_dim {
        return Err(CalcError::numeric("could not complete the transversal frame"));
    }
    Ok(basis.into_iter().skip(1).collect())
}

impl<'a> ChartGeometry<'a> {
    fn new(structure: &'a LevelSetStructure, p: &ComplexPoint) -> CalcResult<Self> {
        let flow_dir = structure.operator().apply(p);
        let frame = complement_frame(&flow_dir, p.dim())?;
        Ok(ChartGeometry { structure, base: p.clone(), frame })
    }

    fn chart_dim(&self) -> usize {
        self.frame.len()
    }

    fn chart(&self, x: &[f64]) -> CalcResult<ComplexPoint> {
        let mut p = self.base.clone();
        for (xi, e) in x.iter().zip(self.frame.iter()) {
            p = p.translate(e, *xi);
        }
        project_to_level(&self.structure.potential, &p, self.structure.level)
    }

    /// Coordinate tangent vectors d(chart)/dx_i at x, by 4th-order central
    /// differences with step `CHART_STEP`.
    fn chart_derivatives(&self, x: &[f64]) -> CalcResult<Vec<Tangent>> {
        let m = self.chart_dim();
        let h = CHART_STEP;
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let shifted = |d: f64| -> CalcResult<ComplexPoint> {
                let mut y = x.to_vec();
                y[i] += d;
                self.chart(&y)
            };
            let p1 = shifted(-2.0 * h)?;
            let p2 = shifted(-h)?;
            let p3 = shifted(h)?;
            let p4 = shifted(2.0 * h)?;
            let coords: Vec<Complex64> = (0..self.base.dim())
                .map(|j| {
                    (p1.coords()[j] - 8.0 * p2.coords()[j] + 8.0 * p3.coords()[j]
                        - p4.coords()[j])
                        / (12.0 * h)
                })
                .collect();
            out.push(Tangent::new(coords)?);
        }
        Ok(out)
    }

    /// Pulled-back metric g_ij(x), row-major m x m.
    fn metric(&self, x: &[f64]) -> CalcResult<Vec<f64>> {
        let m = self.chart_dim();
        let point = self.chart(x)?;
        let h = levi_form(|p| self.structure.potential.eval(p), &point, &LEVI_SCHEME)?;
        let d = self.chart_derivatives(x)?;
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = h.metric(&d[i], &d[j]);
                g[i * m + j] = v;
                g[j * m + i] = v;
            }
        }
        Ok(g)
    }

    /// Christoffel symbols Gamma^k_ij at x, indexed [k*m*m + i*m + j].
    fn christoffel(&self, x: &[f64]) -> CalcResult<Vec<f64>> {
        let m = self.chart_dim();
        let g0 = self.metric(x)?;
        let dg = derivative_grid(m, METRIC_DERIV_STEP, |y| self.metric(y), x)?;
        let ginv = invert_spd(m, &g0)?;
        let mut gamma = vec![0.0; m * m * m];
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut acc = 0.0;
                    for l in 0..m {
                        let term =
                            dg[i][j * m + l] + dg[j][i * m + l] - dg[l][i * m + j];
                        acc += ginv[k * m + l] * term;
                    }
                    gamma[k * m * m + i * m + j] = 0.5 * acc;
                }
            }
        }
        Ok(gamma)
    }

    /// Full curvature tensor R^l_{ijk} at the chart origin, indexed
    /// [((l*m + i)*m + j)*m + k], with the convention
    /// R(d_i, d_j) d_k = R^l_{ijk} d_l.
    fn curvature(&self) -> CalcResult<Vec<f64>> {
        let m = self.chart_dim();
        let origin = vec![0.0; m];
        let gamma = self.christoffel(&origin)?;
        let dgamma =
            derivative_grid(m, CURVATURE_DERIV_STEP, |y| self.christoffel(y), &origin)?;
        let mut r = vec![0.0; m * m * m * m];
        let g = |k: usize, i: usize, j: usize| gamma[k * m * m + i * m + j];
        for l in 0..m {
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let mut acc = dgamma[i][l * m * m + j * m + k]
                            - dgamma[j][l * m * m + i * m + k];
                        for s in 0..m {
                            acc += g(l, i, s) * g(s, j, k) - g(l, j, s) * g(s, i, k);
                        }
                        r[((l * m + i) * m + j) * m + k] = acc;
                    }
                }
            }
        }
        Ok(r)
    }

    /// Components of an ambient tangent vector in the coordinate basis
    /// b_i = d(chart)/dx_i at the origin. Exact for vectors tangent to the
    /// level set (the basis spans the tangent space).
    fn components(&self, basis: &[Tangent], v: &Tangent) -> CalcResult<Vec<f64>> {
        let m = basis.len();
        let mut gram = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            rhs[i] = basis[i].real_dot(v);
            for j in 0..m {
                gram[i * m + j] = basis[i].real_dot(&basis[j]);
            }
        }
        solve_real(m, gram, rhs)
    }
}

/// Central 4th-order derivatives of a vector-valued function along each of
/// the m coordinate directions; result[a] = dF/dx_a.
fn derivative_grid<F>(m: usize, h: f64, f: F, x: &[f64]) -> CalcResult<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> CalcResult<Vec<f64>>,
{
    let mut out = Vec::with_capacity(m);
    for a in 0..m {
        let eval = |d: f64| -> CalcResult<Vec<f64>> {
            let mut y = x.to_vec();
            y[a] += d;
            f(&y)
        };
        let f1 = eval(-2.0 * h)?;
        let f2 = eval(-h)?;
        let f3 = eval(h)?;
        let f4 = eval(2.0 * h)?;
        out.push(
            (0..f1.len())
                .map(|i| (f1[i] - 8.0 * f2[i] + 8.0 * f3[i] - f4[i]) / (12.0 * h))
                .collect(),
        );
    }
    Ok(out)
}

/// Solve a dense symmetric-positive system by Gaussian elimination with
/// partial pivoting (sizes here are at most 2n-1 for small n).
fn solve_real(n: usize, mut a: Vec<f64>, mut b: Vec<f64>) -> CalcResult<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-14 {
            return Err(CalcError::numeric("singular system in chart solve"));
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for j in (col + 1)..n {
            acc -= a[col * n + j] * x[j];
        }
        x[col] = acc / a[col * n + col];
    }
    Ok(x)
}

fn invert_spd(n: usize, a: &[f64]) -> CalcResult<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let x = solve_real(n, a.to_vec(), e)?;
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    Ok(inv)
}

// ---------------------------------------------------------------------------
// Curvature identity verification
// ---------------------------------------------------------------------------

/// Generate `count` seeded triples (p, X, Y): p uniform on the unit sphere
/// of C^dim, X and Y raw directions to be tangentialized by the verifier.
pub fn sample_sphere_triples(
    dim: usize,
    count: usize,
    seed: u64,
) -> Vec<(ComplexPoint, Tangent, Tangent)> {
    let mut rng = SeededLcg::new(seed);
    (0..count)
        .map(|_| {
            let p = rng.complex_point_on_sphere(dim);
            let x = Tangent::from_reals(&rng.point_in_ball(2 * dim, 1.0));
            let y = Tangent::from_reals(&rng.point_in_ball(2 * dim, 1.0));
            (p, x, y)
        })
        .collect()
}

/// Project v onto the tangent space at p of the round sphere and normalize.
fn unit_tangent_at(p: &ComplexPoint, v: &Tangent) -> Option<Tangent> {
    let normal = Tangent::new(p.coords().to_vec()).ok()?;
    let radial = v.real_dot(&normal) / normal.real_dot(&normal);
    let t = v.add(&normal.scale(-radial));
    let n = t.norm();
    if n < 1e-6 {
        None
    } else {
        Some(t.scale(1.0 / n))
    }
}

/// Certify the round-structure curvature identity
/// R(X, xi) Y = g(xi, Y) X - g(X, Y) xi on the given triples, together
/// with sectional curvature g(R(X, xi) xi, X) = 1 for unit X orthogonal to
/// xi, the contraction antisymmetry R(X, X) = 0, Reeb tangency, and Reeb
/// unit norm. Only the round structure (euclidean potential, level 1) is
/// accepted: the identity is specific to it.
pub fn verify_sasaki_identity(
    structure: &LevelSetStructure,
    triples: &[(ComplexPoint, Tangent, Tangent)],
    tol: f64,
) -> CalcResult<VerificationReport> {
    if !structure.is_round() || structure.level() != 1.0 {
        return Err(CalcError::parameter(
            "curvature identity check requires the round structure (|z|^2 at level 1)",
        ));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CalcError::parameter("tolerance must be positive"));
    }
    let mut identity = Certificate::sweep("curvature_identity_residual", tol, WorseIs::Larger);
    let mut sectional = Certificate::sweep("sectional_curvature_deviation", tol, WorseIs::Larger);
    let mut antisym = Certificate::sweep("curvature_antisymmetry", 1e-10, WorseIs::Larger);
    let mut tangency = Certificate::sweep("reeb_tangency_residual", 1e-9, WorseIs::Larger);
    let mut unit_norm = Certificate::sweep("reeb_unit_norm_deviation", 1e-7, WorseIs::Larger);
    let mut errors = Certificate::sweep("evaluation_errors", 0.0, WorseIs::Larger);

    for (p_raw, x_raw, y_raw) in triples {
        let coords = p_raw.to_reals();
        let result = verify_triple(structure, p_raw, x_raw, y_raw);
        match result {
            Ok(data) => {
                identity.observe(&coords, data.identity_residual);
                sectional.observe(&coords, data.sectional_deviation);
                antisym.observe(&coords, data.antisymmetry_residual);
                tangency.observe(&coords, data.tangency_residual);
                unit_norm.observe(&coords, data.unit_norm_deviation);
                errors.observe(&coords, 0.0);
            }
            Err(_) => errors.observe(&coords, 1.0),
        }
    }
    let mut report = VerificationReport::new("round_curvature_identity");
    report.push(identity.finish_at_most());
    report.push(sectional.finish_at_most());
    report.push(antisym.finish_at_most());
    report.push(tangency.finish_at_most());
    report.push(unit_norm.finish_at_most());
    report.push(errors.finish_at_most());
    Ok(report)
}

struct TripleData {
    identity_residual: f64,
    sectional_deviation: f64,
    antisymmetry_residual: f64,
    tangency_residual: f64,
    unit_norm_deviation: f64,
}

fn verify_triple(
    structure: &LevelSetStructure,
    p_raw: &ComplexPoint,
    x_raw: &Tangent,
    y_raw: &Tangent,
) -> CalcResult<TripleData> {
    // Land exactly on the level set, then tangentialize the directions.
    let p = project_to_level(&structure.potential, p_raw, structure.level)?;
    let xi = reeb_field(structure, &p)?;
    let x = unit_tangent_at(&p, x_raw)
        .ok_or_else(|| CalcError::numeric("degenerate tangent sample"))?;
    let y = unit_tangent_at(&p, y_raw)
        .ok_or_else(|| CalcError::numeric("degenerate tangent sample"))?;

    let geo = ChartGeometry::new(structure, &p)?;
    let m = geo.chart_dim();
    let basis = geo.chart_derivatives(&vec![0.0; m])?;
    let metric_form = structure.metric_form(&p, &LEVI_SCHEME)?;
    let g = |u: &Tangent, v: &Tangent| metric_form.metric(u, v);

    let r = geo.curvature()?;
    let xc = geo.components(&basis, &x)?;
    let yc = geo.components(&basis, &y)?;
    let xic = geo.components(&basis, &xi)?;

    // (R(u, v) w)^l for chart components.
    let apply_r = |u: &[f64], v: &[f64], w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; m];
        for l in 0..m {
            let mut acc = 0.0;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        acc += r[((l * m + i) * m + j) * m + k] * u[i] * v[j] * w[k];
                    }
                }
            }
            out[l] = acc;
        }
        out
    };
    let to_ambient = |c: &[f64]| -> Tangent {
        let mut acc = Tangent::zero(p.dim());
        for (ci, b) in c.iter().zip(basis.iter()) {
            acc = acc.add(&b.scale(*ci));
        }
        acc
    };

    // Identity: R(X, xi) Y = g(xi, Y) X - g(X, Y) xi.
    let lhs = to_ambient(&apply_r(&xc, &xic, &yc));
    let rhs = x.scale(g(&xi, &y)).add(&xi.scale(-g(&x, &y)));
    let diff = lhs.add(&rhs.scale(-1.0));
    let identity_residual = diff.norm();

    // Sectional curvature through the Reeb direction with X orthonormalized
    // against xi in g.
    let xi_norm_sq = g(&xi, &xi);
    let mut x_perp = x.add(&xi.scale(-g(&x, &xi) / xi_norm_sq));
    let xn = g(&x_perp, &x_perp).sqrt();
    if xn < 1e-6 {
        return Err(CalcError::numeric("sample direction parallel to the Reeb field"));
    }
    x_perp = x_perp.scale(1.0 / xn);
    let xpc = geo.components(&basis, &x_perp)?;
    let r_xp = to_ambient(&apply_r(&xpc, &xic, &xic));
    let sectional = g(&r_xp, &x_perp) / xi_norm_sq;
    let sectional_deviation = (sectional - 1.0).abs();

    // Contraction antisymmetry: R(X, X) xi must vanish.
    let antisymmetry_residual = to_ambient(&apply_r(&xc, &xc, &xic)).norm();

    // Reeb tangency: the derivative of the potential along xi vanishes.
    let tangency_residual = directional_derivative(
        |q| structure.potential.eval(q),
        &p,
        &xi,
        &FdScheme::default(),
    )?
    .abs();

    // Unit norm of the Reeb vector in the ambient Levi metric.
    let unit_norm_deviation = (g(&xi, &xi).sqrt() - 1.0).abs();

    Ok(TripleData {
        identity_residual,
        sectional_deviation,
        antisymmetry_residual,
        tangency_residual,
        unit_norm_deviation,
    })
}

// ---------------------------------------------------------------------------
// Reeb directions: quasi-regular deformation and orbit closure
// ---------------------------------------------------------------------------

/// A Reeb direction given by positive weights: the torus flow
/// z_j(t) = e^{i w_j t} z_j.
#[derive(Debug, Clone, PartialEq)]
pub struct ReebDirection {
    weights: Vec<f64>,
}

impl ReebDirection {
    pub fn new(weights: Vec<f64>) -> CalcResult<Self> {
        if weights.is_empty() {
            return Err(CalcError::parameter("direction needs at least one weight"));
        }
        if !weights.iter().all(|w| w.is_finite() && *w > 0.0) {
            return Err(CalcError::parameter("direction weights must be positive"));
        }
        Ok(ReebDirection { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// A rational direction: weights p_j / q over a common denominator,
/// reduced so gcd(p_1, ..., p_n, q) = 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalDirection {
    numerators: Vec<u64>,
    denominator: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl RationalDirection {
    pub fn new(numerators: Vec<u64>, denominator: u64) -> CalcResult<Self> {
        if numerators.is_empty() || numerators.iter().any(|&p| p == 0) || denominator == 0 {
            return Err(CalcError::parameter(
                "rational direction needs positive numerators and denominator",
            ));
        }
        let mut g = denominator;
        for &p in &numerators {
            g = gcd(g, p);
        }
        Ok(RationalDirection {
            numerators: numerators.iter().map(|p| p / g).collect(),
            denominator: denominator / g,
        })
    }

    /// Interpret exact integer weights (denominator 1).
    pub fn from_integers(weights: &[u64]) -> CalcResult<Self> {
        RationalDirection::new(weights.to_vec(), 1)
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn weights(&self) -> ReebDirection {
        ReebDirection {
            weights: self
                .numerators
                .iter()
                .map(|&p| p as f64 / self.denominator as f64)
                .collect(),
        }
    }

    /// Minimal common period of the torus flow: every angle w_j T is a
    /// multiple of 2 pi exactly when T = 2 pi q / gcd(p_1, ..., p_n).
    pub fn period(&self) -> f64 {
        let mut g = self.numerators[0];
        for &p in &self.numerators[1..] {
            g = gcd(g, p);
        }
        2.0 * std::f64::consts::PI * self.denominator as f64 / g as f64
    }

    /// Number of whole turns coordinate j makes over one period (exact:
    /// gcd of the numerators divides each of them).
    fn turns_at_period(&self, j: usize) -> u64 {
        let mut g = self.numerators[0];
        for &p in &self.numerators[1..] {
            g = gcd(g, p);
        }
        self.numerators[j] / g
    }
}

/// Result of deforming a direction to the nearest quasi-regular one.
#[derive(Debug, Clone)]
pub struct DeformedDirection {
    pub rational: RationalDirection,
    /// Sup-norm distance between the original and deformed weights.
    pub deviation: f64,
}

/// Find the rational direction with common denominator q <= q_max closest
/// to the given weights in sup norm (numerators rounded per coordinate and
/// clamped to be positive; ties break toward the smaller denominator).
pub fn quasi_regular_deform(
    direction: &ReebDirection,
    q_max: u64,
) -> CalcResult<DeformedDirection> {
    if q_max == 0 {
        return Err(CalcError::parameter("denominator bound must be >= 1"));
    }
    let mut best: Option<(f64, u64, Vec<u64>)> = None;
    for q in 1..=q_max {
        let mut nums = Vec::with_capacity(direction.weights.len());
        let mut dev = 0.0f64;
        for &w in &direction.weights {
            let p = (w * q as f64).round().max(1.0) as u64;
            dev = dev.max((w - p as f64 / q as f64).abs());
            nums.push(p);
        }
        let better = match &best {
            None => true,
            Some((best_dev, _, _)) => dev < *best_dev,
        };
        if better {
            best = Some((dev, q, nums));
        }
    }
    let (deviation, q, nums) = best.expect("q_max >= 1 guarantees a candidate");
    Ok(DeformedDirection {
        rational: RationalDirection::new(nums, q)?,
        deviation,
    })
}

/// A direction for orbit-closure checking: rational directions carry exact
/// integer data; anything else must be explicitly declared irrational.
#[derive(Debug, Clone)]
pub enum OrbitDirection {
    Rational(RationalDirection),
    Irrational(ReebDirection),
}

impl OrbitDirection {
    /// Interpret weight data from a configuration: weights declared
    /// rational must be exactly representable as p/q with q <= q_max,
    /// otherwise this is a parameter error (declare them irrational
    /// instead).
    pub fn from_weights(weights: &[f64], irrational: bool, q_max: u64) -> CalcResult<Self> {
        let dir = ReebDirection::new(weights.to_vec())?;
        if irrational {
            return Ok(OrbitDirection::Irrational(dir));
        }
        let deformed = quasi_regular_deform(&dir, q_max)?;
        if deformed.deviation > 1e-9 {
            return Err(CalcError::parameter(format!(
                "weights are not rational with denominator <= {q_max} \
                 (best deviation {:.3e}); declare the direction irrational",
                deformed.deviation
            )));
        }
        Ok(OrbitDirection::Rational(deformed.rational))
    }

    pub fn weights(&self) -> ReebDirection {
        match self {
            OrbitDirection::Rational(r) => r.weights(),
            OrbitDirection::Irrational(d) => d.clone(),
        }
    }
}

/// Torus flow point: z_j -> e^{i w_j t} z_j. Angles are reduced modulo one
/// turn before trigonometry, so whole turns are exact: at the period of a
/// rational direction the flow returns bit-for-bit.
pub fn torus_flow(direction: &OrbitDirection, z: &ComplexPoint, t: f64) -> ComplexPoint {
    let coords = match direction {
        OrbitDirection::Rational(r) => {
            let period = r.period();
            z.coords()
                .iter()
                .enumerate()
                .map(|(j, zj)| {
                    // Exact whole-turn reduction: turns = (p_j / g) * (t / T).
                    let whole = r.turns_at_period(j) as f64;
                    let turns = whole * (t / period);
                    let frac = turns - turns.round();
                    let angle = 2.0 * std::f64::consts::PI * frac;
                    zj * Complex64::new(angle.cos(), angle.sin())
                })
                .collect()
        }
        OrbitDirection::Irrational(d) => z
            .coords()
            .iter()
            .zip(d.weights().iter())
            .map(|(zj, &w)| {
                let turns = w * t / (2.0 * std::f64::consts::PI);
                let frac = turns - turns.round();
                let angle = 2.0 * std::f64::consts::PI * frac;
                zj * Complex64::new(angle.cos(), angle.sin())
            })
            .collect(),
    };
    ComplexPoint::new(coords).expect("rotation preserves finiteness")
}

/// Parameters for the orbit-closure sweep.
#[derive(Debug, Clone)]
pub struct OrbitCheckParams {
    /// Pass bound for the relative return distance of a rational orbit.
    pub return_tol: f64,
    /// Time window swept for irrational directions.
    pub window: f64,
    /// Number of sweep samples in the window.
    pub sweep_samples: usize,
    /// Minimum distance the orbit must keep from its start over the window
    /// (evidence of non-closure).
    pub separation_floor: f64,
}

impl Default for OrbitCheckParams {
    fn default() -> Self {
        OrbitCheckParams {
            return_tol: 1e-12,
            window: 200.0,
            sweep_samples: 20_000,
            separation_floor: 1e-2,
        }
    }
}

/// Check orbit closure of the torus flow through z on the structure's
/// level set. Rational directions must return to the start after exactly
/// one period; irrational directions must stay separated from the start
/// across the sweep window (this is numerical evidence, not a proof of
/// non-closure). The start point must lie on the level set.
pub fn orbit_closure_check(
    direction: &OrbitDirection,
    structure: &LevelSetStructure,
    z: &ComplexPoint,
    params: &OrbitCheckParams,
) -> CalcResult<VerificationReport> {
    if structure.level_residual(z)? > 1e-9 {
        return Err(CalcError::domain("orbit start point is off the level set"));
    }
    if direction.weights().dim() != z.dim() {
        return Err(CalcError::parameter("direction dimension does not match point"));
    }
    let norm = z.norm();
    if norm == 0.0 {
        return Err(CalcError::parameter("orbit through the origin is trivial"));
    }
    let mut report = VerificationReport::new("orbit_closure");
    match direction {
        OrbitDirection::Rational(r) => {
            let period = r.period();
            let back = torus_flow(direction, z, period);
            let dist = point_distance(&back, z) / norm;
            report.push(Certificate::scalar(
                "period_return_distance",
                dist,
                params.return_tol,
                dist <= params.return_tol,
            ));
            report.push(Certificate::scalar(
                "period_positive",
                period,
                0.0,
                period > 0.0,
            ));
            // The level set is preserved along the whole orbit.
            let mut level = Certificate::sweep("stays_on_level", 1e-9, WorseIs::Larger);
            for i in 1..=32 {
                let t = period * i as f64 / 32.0;
                let w = torus_flow(direction, z, t);
                level.observe(&w.to_reals(), structure.level_residual(&w)?);
            }
            report.push(level.finish_at_most());
        }
        OrbitDirection::Irrational(_) => {
            if params.sweep_samples < 2 || params.window <= 0.0 {
                return Err(CalcError::parameter("irrational check needs a sweep window"));
            }
            let mut separation =
                Certificate::sweep("no_return_separation", params.separation_floor, WorseIs::Smaller);
            let dt = params.window / params.sweep_samples as f64;
            for i in 1..=params.sweep_samples {
                let t = dt * i as f64;
                let w = torus_flow(direction, z, t);
                let mut coords = vec![t];
                coords.extend(w.to_reals());
                separation.observe(&coords, point_distance(&w, z) / norm);
            }
            report.push(separation.finish_at_least());
        }
    }
    Ok(report)
}

fn point_distance(a: &ComplexPoint, b: &ComplexPoint) -> f64 {
    a.coords()
        .iter()
        .zip(b.coords().iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}
