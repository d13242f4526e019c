//! Gluing a target potential along a linear subvariety.
//!
//! Given a strictly psh ambient potential F on a ball region, a complex
//! linear subvariety Z, and a target potential u0 living on Z, this module
//! builds a globally defined potential
//!
//! ```text
//! psi = reg_max((eps / C) phi + A,  u0 o pi_Z + c1 d(., Z)^2)
//! ```
//!
//! where phi has logarithmic poles along Z. Near Z the pole branch drops
//! to -infinity, so psi restricts to the extended target; far from Z a
//! large enough offset A makes the pole branch win, so psi becomes a
//! smooth shift of phi with a Levi form controlled by the compensation
//! constant C. The result is a potential whose perturbation F + psi keeps
//! a definite fraction eps of the ambient positivity while matching the
//! target along Z.
//!
//! Every quantified claim is certified on explicit sample sets: the
//! constants C and A come from sample sweeps with safety factors
//! (1.25 on C, +delta on A) absorbing the gap between sampled and true
//! suprema, and [`verify_extension`] re-checks restriction, positivity,
//! and branch exactness on independent grids.

use num_complex::Complex64;

use crate::calculus::{generalized_min_eigenvalue, ComplexPoint, FdScheme};
use crate::error::{CalcError, CalcResult};
use crate::potentials::{
    affine_combine, log_pole_potential, Constraint, Domain, LinearSubspace, PotentialField,
    VarietySpec,
};
use crate::regmax::{reg_max_field, MollifierKernel, RegMaxParams};
use crate::report::{Certificate, Sweep, VerificationReport, WorseIs};
use crate::sampling::{real_grid, SeededLcg};

/// The data being glued: ambient potential, region, variety, and the
/// target restriction on the variety.
#[derive(Debug, Clone)]
pub struct GluingProblem {
    ambient: PotentialField,
    region_radius: f64,
    variety: VarietySpec,
    model: LinearSubspace,
    target: PotentialField,
}

impl GluingProblem {
    pub fn new(
        ambient: PotentialField,
        region_radius: f64,
        variety: VarietySpec,
        target: PotentialField,
    ) -> CalcResult<Self> {
        if !(region_radius.is_finite() && region_radius > 0.0) {
            return Err(CalcError::parameter("region radius must be positive"));
        }
        if ambient.domain().dim() != variety.ambient_dim() {
            return Err(CalcError::parameter(
                "ambient potential and variety dimensions do not match",
            ));
        }
        let model = variety.linear_model()?;
        if target.domain().dim() != model.dim() {
            return Err(CalcError::parameter(format!(
                "target potential lives on C^{} but the variety has dimension {}",
                target.domain().dim(),
                model.dim()
            )));
        }
        Ok(GluingProblem { ambient, region_radius, variety, model, target })
    }

    pub fn ambient(&self) -> &PotentialField {
        &self.ambient
    }

    pub fn region_radius(&self) -> f64 {
        self.region_radius
    }

    pub fn variety(&self) -> &VarietySpec {
        &self.variety
    }

    pub fn model(&self) -> &LinearSubspace {
        &self.model
    }

    pub fn target(&self) -> &PotentialField {
        &self.target
    }

    fn dim(&self) -> usize {
        self.ambient.domain().dim()
    }
}

/// Tuning constants for the gluing pipeline.
#[derive(Debug, Clone)]
pub struct GluingConfig {
    /// Fraction of ambient positivity to retain, strictly in (0, 1/2).
    pub epsilon: f64,
    /// Transition band width of the regularized maximum.
    pub delta: f64,
    /// Coefficient of the squared-distance term (may be zero).
    pub c1: f64,
    /// Tubular radius of the neighborhood U around the variety; outside U
    /// the pole branch must win outright.
    pub neighborhood_radius: f64,
    /// Per-axis resolution of the sample grids.
    pub sample_density: usize,
    /// Cap on the total number of sweep samples (grids are strided down).
    pub max_sweep_points: usize,
    /// Lower bound for the compensation constant, in units of the sampled
    /// ambient positivity: C >= c_floor / min-eig(levi(ambient)). Keeps
    /// eps/C finite when phi is already plurisubharmonic, and scales with
    /// the ambient so the pipeline commutes with rescaling.
    pub c_floor: f64,
    /// Seed for the ring sampler certifying the near-variety radius.
    pub seed: u64,
    /// Mollifier kernel for the regularized maximum.
    pub kernel: MollifierKernel,
    /// Finite-difference scheme for every Levi-form evaluation.
    pub fd: FdScheme,
    /// Worker threads for certificate sweeps (results are
    /// partition-independent).
    pub workers: usize,
}

impl Default for GluingConfig {
    fn default() -> Self {
        GluingConfig {
            epsilon: 0.25,
            delta: 0.5,
            c1: 1.0,
            neighborhood_radius: 0.5,
            sample_density: 30,
            max_sweep_points: 100_000,
            c_floor: 0.1,
            seed: 11,
            kernel: MollifierKernel::default(),
            fd: FdScheme::default(),
            workers: 1,
        }
    }
}

impl GluingConfig {
    pub fn validate(&self, problem: &GluingProblem) -> CalcResult<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(CalcError::parameter("epsilon must lie strictly between 0 and 1/2"));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(CalcError::parameter("delta must be positive"));
        }
        if !(self.c1.is_finite() && self.c1 >= 0.0) {
            return Err(CalcError::parameter("distance coefficient c1 must be nonnegative"));
        }
        if !(self.neighborhood_radius.is_finite()
            && self.neighborhood_radius > 0.0
            && self.neighborhood_radius < problem.region_radius())
        {
            return Err(CalcError::parameter(
                "neighborhood radius must be positive and smaller than the region",
            ));
        }
        if self.sample_density < 2 {
            return Err(CalcError::parameter("sample density must be at least 2"));
        }
        if self.max_sweep_points < 16 {
            return Err(CalcError::parameter("sweep budget must allow at least 16 points"));
        }
        if !(self.c_floor.is_finite() && self.c_floor > 0.0) {
            return Err(CalcError::parameter("compensation floor must be positive"));
        }
        if self.workers == 0 {
            return Err(CalcError::parameter("worker count must be at least 1"));
        }
        Ok(())
    }
}

/// Output of [`glue`]: the glued potential, its two branches, the computed
/// constants, and the verification report.
#[derive(Debug, Clone)]
pub struct GluingResult {
    /// The glued potential, defined on the closed ball region.
    pub psi: PotentialField,
    /// The pole branch (eps / C) phi + A.
    pub pole_branch: PotentialField,
    /// The extended target u0 o pi_Z + c1 d^2.
    pub extension: PotentialField,
    /// Compensation constant actually used (after the floor).
    pub c: f64,
    /// The sampled requirement before the floor, safety factor included.
    pub c_required: f64,
    /// Offset making the pole branch win outside the neighborhood.
    pub a: f64,
    /// Radius of a certified tube around the variety on which psi equals
    /// the extended target bit-for-bit.
    pub near_z_radius: f64,
    /// Smallest sampled eigenvalue of the ambient Levi form.
    pub ambient_min_eig: f64,
    /// Restriction / positivity / exactness certificates.
    pub report: VerificationReport,
}

// ---------------------------------------------------------------------------
// Sample grids
// ---------------------------------------------------------------------------

/// Euclidean clearance needed around any point where a Levi form is
/// evaluated by finite differences.
fn stencil_clearance(fd: &FdScheme) -> f64 {
    2.0 * fd.stencil_radius()
}

/// Deterministic grid over the region ball, kept clear of the boundary by
/// one stencil clearance so finite differences stay inside the domain.
pub fn ball_grid(problem: &GluingProblem, config: &GluingConfig) -> Vec<ComplexPoint> {
    let r = problem.region_radius();
    let buffer = stencil_clearance(&config.fd);
    real_grid(
        2 * problem.dim(),
        config.sample_density,
        r,
        config.max_sweep_points,
    )
    .into_iter()
    .map(|reals| ComplexPoint::from_reals(&reals))
    .filter(|z| z.norm() <= r - buffer)
    .collect()
}

/// Deterministic grid on the variety (in its intrinsic coordinates),
/// buffered like [`ball_grid`].
pub fn variety_grid(problem: &GluingProblem, config: &GluingConfig) -> Vec<ComplexPoint> {
    let r = problem.region_radius();
    let buffer = stencil_clearance(&config.fd);
    real_grid(
        2 * problem.model().dim(),
        config.sample_density,
        r,
        config.max_sweep_points,
    )
    .into_iter()
    .map(|reals| ComplexPoint::from_reals(&reals))
    .filter(|w| w.norm() <= r - buffer)
    .collect()
}

// ---------------------------------------------------------------------------
// Pipeline stages
// ---------------------------------------------------------------------------

/// Smallest C >= 0 with levi(phi) + C levi(ambient) >= 0 at every sample,
/// via the generalized eigenvalue reduction (the ambient Levi form must be
/// positive definite), multiplied by the 1.25 safety factor.
pub fn estimate_c(
    phi: &PotentialField,
    ambient: &PotentialField,
    samples: &[ComplexPoint],
    fd: &FdScheme,
) -> CalcResult<f64> {
    if samples.is_empty() {
        return Err(CalcError::parameter("compensation estimate needs samples"));
    }
    let mut worst = 0.0f64;
    for z in samples {
        let h_phi = phi.levi(z, fd)?;
        let h_amb = ambient.levi(z, fd)?;
        let pencil = generalized_min_eigenvalue(&h_phi, &h_amb).map_err(|_| {
            CalcError::parameter(format!(
                "ambient potential is not strictly plurisubharmonic at {:?}",
                z.to_reals()
            ))
        })?;
        worst = worst.max(-pencil);
    }
    Ok(1.25 * worst)
}

/// Extend the target from the variety to the ambient space:
/// u(z) = u0(pi_Z(z)) + c1 d(z, Z)^2. Constant in normal directions up to
/// the quadratic distance term, and equal to u0 on Z exactly.
pub fn extend_u(problem: &GluingProblem, config: &GluingConfig) -> CalcResult<PotentialField> {
    if !(config.c1.is_finite() && config.c1 >= 0.0) {
        return Err(CalcError::parameter("distance coefficient c1 must be nonnegative"));
    }
    let model = problem.model().clone();
    let target = problem.target().clone();
    let c1 = config.c1;
    Ok(PotentialField::new(
        "extended_target",
        Domain::entire(problem.dim()),
        move |z| {
            let base = target.eval(&model.coordinates(z))?;
            if c1 == 0.0 {
                return Ok(base);
            }
            let d = model.distance(z);
            Ok(base + c1 * d * d)
        },
    ))
}

/// Smallest offset A making the pole branch win by delta on every sample
/// outside the neighborhood U, plus one more delta of safety:
/// A = max over {d(z, Z) >= neighborhood_radius} of (u + delta - (eps/C) phi) + delta.
pub fn choose_a(
    problem: &GluingProblem,
    config: &GluingConfig,
    phi: &PotentialField,
    u: &PotentialField,
    c: f64,
) -> CalcResult<f64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(CalcError::parameter("compensation constant must be positive"));
    }
    let scale = config.epsilon / c;
    let mut best: Option<f64> = None;
    for z in ball_grid(problem, config) {
        if problem.model().distance(&z) < config.neighborhood_radius {
            continue;
        }
        let pole = phi.eval(&z)?;
        let target = u.eval(&z)?;
        let needed = target + config.delta - scale * pole;
        best = Some(best.map_or(needed, |b: f64| b.max(needed)));
    }
    match best {
        Some(a) if a.is_finite() => Ok(a + config.delta),
        Some(_) => Err(CalcError::Infeasible(
            "offset requirement is unbounded on the outer region".into(),
        )),
        None => Err(CalcError::Infeasible(
            "the neighborhood covers every sample; nothing constrains the offset".into(),
        )),
    }
}

/// Restrict a field's domain to the closed region ball.
fn clip_to_ball(f: &PotentialField, radius: f64) -> PotentialField {
    let inner = f.clone();
    let domain = f.domain().clone().with(Constraint::InsideBall { radius });
    PotentialField::new(f.label(), domain, move |z| (|| inner.eval(z))())
}

/// Largest dyadic fraction of the starting radius at which every sampled
/// ring point around the variety has the target branch winning by at
/// least delta (so the glued field equals the extension bit-for-bit on
/// the enclosed tube; the branch gap grows monotonically toward Z on the
/// radii searched here).
fn find_near_radius(
    problem: &GluingProblem,
    config: &GluingConfig,
    pole_branch: &PotentialField,
    u: &PotentialField,
    c: f64,
) -> CalcResult<f64> {
    let model = problem.model();
    let codim = problem.dim() - model.dim();
    let r_region = problem.region_radius();
    // The gap u - pole decreases in the distance d only while
    // 2 c1 d^2 < eps / C; start the search inside that range.
    let mut r = config.neighborhood_radius;
    if config.c1 > 0.0 {
        let turn = (config.epsilon / (2.0 * config.c1 * c)).sqrt();
        r = r.min(0.99 * turn);
    }
    let floor = 2.0 * stencil_clearance(&config.fd);
    let mut rng = SeededLcg::new(config.seed);
    // Coarse intrinsic grid on the variety; a handful of seeded normal
    // directions per ring point.
    let base_points: Vec<ComplexPoint> = real_grid(2 * model.dim(), 5, r_region, 64)
        .into_iter()
        .map(|reals| ComplexPoint::from_reals(&reals))
        .collect();
    for _ in 0..64 {
        if r < floor {
            break;
        }
        let mut ok = true;
        'ring: for w in &base_points {
            if w.norm_sq() + r * r > r_region * r_region {
                continue;
            }
            let anchor = problem.model().embedding().apply(w)?;
            for _ in 0..8 {
                let eta = rng.complex_point_on_sphere(codim);
                // Unit normal direction nu = sum eta_i n_i.
                let mut coords = vec![Complex64::new(0.0, 0.0); problem.dim()];
                for (ei, n) in eta.coords().iter().zip(model.normal_basis()) {
                    for (cj, nj) in coords.iter_mut().zip(n.iter()) {
                        *cj += ei * nj;
                    }
                }
                let point = ComplexPoint::new(
                    anchor
                        .coords()
                        .iter()
                        .zip(coords.iter())
                        .map(|(a, nu)| a + r * nu)
                        .collect(),
                )?;
                let gap = u.eval(&point)? - pole_branch.eval(&point)?;
                if !(gap >= config.delta) {
                    ok = false;
                    break 'ring;
                }
            }
        }
        if ok {
            return Ok(r);
        }
        r *= 0.5;
    }
    Err(CalcError::Infeasible(
        "no certified tube around the variety where the target branch wins; \
         lower the offset pressure (smaller delta or larger region)"
            .into(),
    ))
}

/// Run the full pipeline: log-pole potential, compensation constant,
/// extension, offset, regularized maximum, and verification.
pub fn glue(problem: &GluingProblem, config: &GluingConfig) -> CalcResult<GluingResult> {
    glue_inner(problem, config, None)
}

/// [`glue`] with the offset constant forced to a given value instead of
/// the sampled choice. Exists so tests can demonstrate that the
/// verification catches an offset that is too small.
pub fn glue_with_a(
    problem: &GluingProblem,
    config: &GluingConfig,
    a_override: f64,
) -> CalcResult<GluingResult> {
    if !a_override.is_finite() {
        return Err(CalcError::parameter("offset override must be finite"));
    }
    glue_inner(problem, config, Some(a_override))
}

fn glue_inner(
    problem: &GluingProblem,
    config: &GluingConfig,
    a_override: Option<f64>,
) -> CalcResult<GluingResult> {
    config.validate(problem)?;
    let phi = log_pole_potential(problem.variety().clone());

    // Constant estimation on a thinned grid kept clear of the pole locus;
    // the 1.25 safety factor absorbs the thinning.
    let clearance = (0.02 * problem.region_radius()).max(2.0 * stencil_clearance(&config.fd));
    let clear: Vec<ComplexPoint> = ball_grid(problem, config)
        .into_iter()
        .filter(|z| problem.model().distance(z) >= clearance)
        .collect();
    if clear.is_empty() {
        return Err(CalcError::Infeasible(
            "no samples clear of the variety; raise the density or region size".into(),
        ));
    }
    let stride = clear.len().div_ceil(2000).max(1);
    let thinned: Vec<ComplexPoint> = clear.iter().step_by(stride).cloned().collect();
    let c_required = estimate_c(&phi, problem.ambient(), &thinned, &config.fd)?;
    let mut ambient_min_eig = f64::INFINITY;
    for z in &thinned {
        ambient_min_eig = ambient_min_eig.min(problem.ambient().levi(z, &config.fd)?.min_eigenvalue()?);
    }
    if !(ambient_min_eig > 0.0) {
        return Err(CalcError::parameter(
            "ambient potential is not strictly plurisubharmonic on the sampled region",
        ));
    }
    let c = c_required.max(config.c_floor / ambient_min_eig);

    let u = extend_u(problem, config)?;
    let a = match a_override {
        Some(a) => a,
        None => choose_a(problem, config, &phi, &u, c)?,
    };

    let r = problem.region_radius();
    let pole_branch = clip_to_ball(&affine_combine(&phi, config.epsilon / c, a)?, r);
    let extension = clip_to_ball(&u, r);
    let params = RegMaxParams::new(config.delta, config.kernel.clone())?;
    let psi = reg_max_field(&pole_branch, &extension, &params)?;

    let near_z_radius = find_near_radius(problem, config, &pole_branch, &extension, c)?;

    let mut result = GluingResult {
        psi,
        pole_branch,
        extension,
        c,
        c_required,
        a,
        near_z_radius,
        ambient_min_eig,
        report: VerificationReport::new("kahler_extension"),
    };
    result.report = verify_extension(&result, problem, config)?;
    Ok(result)
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

/// Run a sweep body over samples, fanned out across workers. Merging is
/// associative and direction-free, so the outcome is identical for every
/// worker count.
fn parallel_sweep<F>(
    samples: &[ComplexPoint],
    workers: usize,
    make: &(dyn Fn() -> Sweep + Sync),
    body: F,
) -> Sweep
where
    F: Fn(&ComplexPoint, &mut Sweep) + Send + Sync,
{
    let workers = workers.max(1);
    if workers == 1 || samples.len() < 2 * workers {
        let mut sweep = make();
        for z in samples {
            body(z, &mut sweep);
        }
        return sweep;
    }
    let chunk = samples.len().div_ceil(workers);
    let body = &body;
    std::thread::scope(|scope| {
        let handles: Vec<_> = samples
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    let mut sweep = make();
                    for z in part {
                        body(z, &mut sweep);
                    }
                    sweep
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .reduce(|acc, s| acc.merge(s))
            .expect("at least one chunk")
    })
}

/// Certify the glued potential on fresh deterministic grids:
///
/// * `restriction`: on the variety, the Levi form of (ambient + psi)
///   pulled back to Z matches the Levi form of (ambient|Z + target) to
///   1e-5 in Frobenius norm.
/// * `positivity`: at every ball sample, min-eig levi(ambient + psi)
///   >= epsilon * min-eig levi(ambient) - 1e-4.
/// * `near_z_exactness`: psi equals the winning branch bit-for-bit —
///   the pole branch at every sample outside the neighborhood U, the
///   extension wherever it wins by more than delta (in particular near Z,
///   where the pole branch plunges).
pub fn verify_extension(
    result: &GluingResult,
    problem: &GluingProblem,
    config: &GluingConfig,
) -> CalcResult<VerificationReport> {
    config.validate(problem)?;
    let embedding = problem.model().embedding();
    let ambient_on_z = crate::potentials::pullback(problem.ambient(), &embedding)?;
    let glued_on_z = crate::potentials::pullback(
        &field_sum("ambient_plus_psi", problem.ambient(), &result.psi),
        &embedding,
    )?;
    let target_on_z = field_sum("ambient_plus_target", &ambient_on_z, problem.target());

    let fd = config.fd;
    let restriction = parallel_sweep(
        &variety_grid(problem, config),
        config.workers,
        &|| Certificate::sweep("restriction", 1e-5, WorseIs::Larger),
        |w, sweep| {
            let value = match (glued_on_z.levi(w, &fd), target_on_z.levi(w, &fd)) {
                (Ok(a), Ok(b)) => match a.add(&b.scale(-1.0)) {
                    Ok(diff) => diff.frobenius_norm(),
                    Err(_) => 1.0, // sentinel failure: mismatched forms
                },
                _ => 1.0, // sentinel failure: Levi evaluation failed
            };
            sweep.observe(&w.to_reals(), value);
        },
    )
    .finish_at_most();

    let samples = ball_grid(problem, config);
    let total = field_sum("ambient_plus_psi", problem.ambient(), &result.psi);
    let positivity = parallel_sweep(
        &samples,
        config.workers,
        &|| Certificate::sweep("positivity", -1e-4, WorseIs::Smaller),
        |z, sweep| {
            let margin = match (total.levi(z, &fd), problem.ambient().levi(z, &fd)) {
                (Ok(h_total), Ok(h_amb)) => {
                    match (h_total.min_eigenvalue(), h_amb.min_eigenvalue()) {
                        (Ok(lo), Ok(amb)) => lo - config.epsilon * amb,
                        _ => -1.0, // sentinel failure: eigenvalue solve failed
                    }
                }
                _ => -1.0, // sentinel failure: Levi evaluation failed
            };
            sweep.observe(&z.to_reals(), margin);
        },
    )
    .finish_at_least();

    let exactness = parallel_sweep(
        &samples,
        config.workers,
        &|| Certificate::sweep("near_z_exactness", 0.0, WorseIs::Larger),
        |z, sweep| {
            let psi_val = result.psi.eval(z);
            let u_val = result.extension.eval(z);
            let pole_val = result.pole_branch.eval(z);
            let outside = problem.model().distance(z) >= config.neighborhood_radius;
            let verdict = match (&psi_val, &u_val, &pole_val) {
                (Ok(psi), Ok(_), Ok(pole)) if outside => {
                    Some(if psi == pole { 0.0 } else { 1.0 })
                }
                (Ok(psi), Ok(u), Ok(pole)) if *pole < u - config.delta => {
                    Some(if psi == u { 0.0 } else { 1.0 })
                }
                (Ok(_), Ok(_), Ok(_)) => None, // inside the band: no claim
                // On the pole locus the pole branch reports its pole and
                // the extension must take over exactly.
                (Ok(psi), Ok(u), Err(CalcError::Pole(_))) if !outside => {
                    Some(if psi == u { 0.0 } else { 1.0 })
                }
                _ => Some(1.0), // sentinel failure: evaluation failed
            };
            if let Some(v) = verdict {
                sweep.observe(&z.to_reals(), v);
            }
        },
    )
    .finish_at_most();

    let mut report = VerificationReport::new("kahler_extension");
    report.push(restriction);
    report.push(positivity);
    report.push(exactness);
    Ok(report)
}

/// Tube-region lower bound: at samples within the neighborhood radius of
/// the variety, min-eig levi(psi) >= -(1 - epsilon) min-eig levi(ambient)
/// minus the 1e-4 numerical allowance. This is the quasi-positivity that
/// makes the glued perturbation keep epsilon of the ambient form on U.
pub fn verify_tube_bound(
    result: &GluingResult,
    problem: &GluingProblem,
    config: &GluingConfig,
) -> CalcResult<Certificate> {
    config.validate(problem)?;
    let clearance = stencil_clearance(&config.fd);
    let tube: Vec<ComplexPoint> = ball_grid(problem, config)
        .into_iter()
        .filter(|z| {
            let d = problem.model().distance(z);
            d <= config.neighborhood_radius && d >= clearance
        })
        .collect();
    let fd = config.fd;
    Ok(parallel_sweep(
        &tube,
        config.workers,
        &|| Certificate::sweep("tube_lower_bound", -1e-4, WorseIs::Smaller),
        |z, sweep| {
            let margin = match (result.psi.levi(z, &fd), problem.ambient().levi(z, &fd)) {
                (Ok(h_psi), Ok(h_amb)) => {
                    match (h_psi.min_eigenvalue(), h_amb.min_eigenvalue()) {
                        (Ok(lo), Ok(amb)) => lo + (1.0 - config.epsilon) * amb,
                        _ => -1.0, // sentinel failure
                    }
                }
                _ => -1.0, // sentinel failure
            };
            sweep.observe(&z.to_reals(), margin);
        },
    )
    .finish_at_least())
}

fn field_sum(label: &str, f: &PotentialField, g: &PotentialField) -> PotentialField {
    let mut domain = f.domain().clone();
    for c in g.domain().constraints() {
        domain = domain.with(c.clone());
    }
    let (f, g) = (f.clone(), g.clone());
    PotentialField::new(label, domain, move |z| Ok(f.eval(z)? + g.eval(z)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::euclidean_potential;
    use approx::assert_abs_diff_eq;

    fn hyperplane_problem(target: PotentialField) -> GluingProblem {
        GluingProblem::new(
            euclidean_potential(2),
            2.0,
            VarietySpec::coordinate_hyperplane(2, 1).unwrap(),
            target,
        )
        .unwrap()
    }

    fn wave_target() -> PotentialField {
        PotentialField::new(
            "wave",
            Domain::entire(1).with(Constraint::InsideBall { radius: 2.0 }),
            |w| {
                let z = w.coords()[0];
                Ok(0.3 * z.re.sin() * (-z.norm_sqr()).exp())
            },
        )
    }

    fn quick_config() -> GluingConfig {
        GluingConfig {
            sample_density: 9,
            max_sweep_points: 4000,
            ..GluingConfig::default()
        }
    }

    fn pt(coords: &[(f64, f64)]) -> ComplexPoint {
        ComplexPoint::new(coords.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap()
    }

    #[test]
    fn compensation_is_zero_for_psh_and_one_for_negated() {
        let ambient = euclidean_potential(2);
        let mut rng = SeededLcg::new(3);
        let samples: Vec<ComplexPoint> =
            (0..12).map(|_| rng.complex_point_in_shell(2, 0.3, 1.5)).collect();
        let fd = FdScheme::default();
        // A psh candidate needs no compensation at all.
        let c0 = estimate_c(&euclidean_potential(2), &ambient, &samples, &fd).unwrap();
        assert_eq!(c0, 0.0);
        // phi = -|z|^2 against |z|^2 needs exactly C = 1, times the factor.
        let neg = PotentialField::new("neg", Domain::entire(2), |z| Ok(-z.norm_sq()));
        let c1 = estimate_c(&neg, &ambient, &samples, &fd).unwrap();
        assert_abs_diff_eq!(c1, 1.25, epsilon = 1e-6);
    }

    #[test]
    fn compensation_for_log_pole_is_tiny() {
        // In the flat model the log-pole potential is plurisubharmonic away
        // from its locus, so only finite-difference noise registers.
        let phi = log_pole_potential(VarietySpec::coordinate_hyperplane(2, 1).unwrap());
        let ambient = euclidean_potential(2);
        let mut rng = SeededLcg::new(5);
        let samples: Vec<ComplexPoint> = (0..20)
            .map(|_| {
                // annulus around the variety: 0.3 <= |z2| and |z| <= 1.5
                loop {
                    let z = rng.complex_point_in_shell(2, 0.4, 1.5);
                    if z.coords()[1].norm() >= 0.3 {
                        break z;
                    }
                }
            })
            .collect();
        let c = estimate_c(&phi, &ambient, &samples, &FdScheme::default()).unwrap();
        assert!((0.0..1e-5).contains(&c), "C = {c}");
    }

    #[test]
    fn compensation_rejects_flat_ambient() {
        // A pluriharmonic "ambient" has a singular Levi form; the pencil
        // reduction must refuse it.
        let flat = log_pole_potential(VarietySpec::coordinate_hyperplane(2, 1).unwrap());
        let candidate = euclidean_potential(2);
        let samples = vec![pt(&[(0.5, 0.0), (1.0, 0.0)])];
        let err = estimate_c(&candidate, &flat, &samples, &FdScheme::default());
        assert!(matches!(err, Err(CalcError::Parameter(_))));
    }

    #[test]
    fn extension_restricts_to_target_and_grows_quadratically() {
        let problem = hyperplane_problem(wave_target());
        let config = quick_config();
        let u = extend_u(&problem, &config).unwrap();
        // On the variety the distance term vanishes and u = u0 exactly.
        let on_z = pt(&[(0.7, -0.2), (0.0, 0.0)]);
        let w = problem.model().coordinates(&on_z);
        assert_eq!(
            u.eval(&on_z).unwrap(),
            problem.target().eval(&w).unwrap()
        );
        // Trivial target: u(0, 2i) = c1 * 4.
        let zero_target = PotentialField::new("zero", Domain::entire(1), |_| Ok(0.0));
        let trivial = hyperplane_problem(zero_target);
        let u0 = extend_u(&trivial, &config).unwrap();
        assert_abs_diff_eq!(
            u0.eval(&pt(&[(0.0, 0.0), (0.0, 2.0)])).unwrap(),
            4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn extension_propagates_target_domain_errors() {
        let tiny = PotentialField::new(
            "tiny",
            Domain::entire(1).with(Constraint::InsideBall { radius: 0.5 }),
            |_| Ok(0.0),
        );
        let problem = hyperplane_problem(tiny);
        let u = extend_u(&problem, &quick_config()).unwrap();
        // Projection lands at |w| = 1.5, outside the target's validity.
        let err = u.eval(&pt(&[(1.5, 0.0), (0.1, 0.0)]));
        assert!(matches!(err, Err(CalcError::Domain(_))));
    }

    #[test]
    fn offset_formula_on_trivial_target() {
        // With u = 0 the offset is delta + (eps/C) * (-min phi) + delta
        // over the far samples.
        let zero_target = PotentialField::new("zero", Domain::entire(1), |_| Ok(0.0));
        let problem = hyperplane_problem(zero_target);
        let config = GluingConfig { c1: 0.0, ..quick_config() };
        let phi = log_pole_potential(problem.variety().clone());
        let u = extend_u(&problem, &config).unwrap();
        let c = 0.1;
        let a = choose_a(&problem, &config, &phi, &u, c).unwrap();
        let scale = config.epsilon / c;
        let mut min_phi = f64::INFINITY;
        for z in ball_grid(&problem, &config) {
            if problem.model().distance(&z) >= config.neighborhood_radius {
                min_phi = min_phi.min(phi.eval(&z).unwrap());
            }
        }
        assert_abs_diff_eq!(a, 2.0 * config.delta - scale * min_phi, epsilon = 1e-12);
    }

    #[test]
    fn offset_needs_samples_outside_neighborhood() {
        let zero_target = PotentialField::new("zero", Domain::entire(1), |_| Ok(0.0));
        let problem = hyperplane_problem(zero_target);
        // A neighborhood radius of 1.95 swallows every buffered grid
        // sample of the density-7 grid.
        let config = GluingConfig {
            neighborhood_radius: 1.95,
            sample_density: 7,
            max_sweep_points: 4000,
            ..GluingConfig::default()
        };
        let phi = log_pole_potential(problem.variety().clone());
        let u = extend_u(&problem, &config).unwrap();
        let err = choose_a(&problem, &config, &phi, &u, 0.1);
        assert!(matches!(err, Err(CalcError::Infeasible(_))));
    }

    #[test]
    fn trivial_scenario_passes_all_certificates() {
        let zero_target = PotentialField::new(
            "zero",
            Domain::entire(1).with(Constraint::InsideBall { radius: 2.0 }),
            |_| Ok(0.0),
        );
        let problem = hyperplane_problem(zero_target);
        let config = GluingConfig { c1: 0.0, ..quick_config() };
        let result = glue(&problem, &config).unwrap();
        assert!(result.report.pass(), "{:#?}", result.report);
        // The compensation floor engages: the log-pole branch is psh, so
        // only c_floor / min-eig keeps eps/C finite.
        assert!(result.c_required < 1e-5);
        assert_abs_diff_eq!(result.c, 0.1, epsilon = 1e-3);
        assert_eq!(result.report.certificates.len(), 3);
    }

    #[test]
    fn acceptance_style_scenario_passes_and_sabotage_fails() {
        let problem = hyperplane_problem(wave_target());
        let config = quick_config();
        let result = glue(&problem, &config).unwrap();
        assert!(result.report.pass(), "{:#?}", result.report);
        assert!(result.near_z_radius > 4.0 * config.fd.stencil_radius());

        // Lowering the offset by ten band widths starves the pole branch
        // on the outer region; exactness must catch it.
        let sabotaged =
            glue_with_a(&problem, &config, result.a - 10.0 * config.delta).unwrap();
        let exact = sabotaged.report.certificate("near_z_exactness").unwrap();
        assert!(!exact.pass, "{exact:?}");
        // Restriction along the variety is indifferent to the offset.
        assert!(sabotaged.report.certificate("restriction").unwrap().pass);
    }

    #[test]
    fn tube_bound_holds_on_acceptance_style_scenario() {
        let problem = hyperplane_problem(wave_target());
        let config = quick_config();
        let result = glue(&problem, &config).unwrap();
        let cert = verify_tube_bound(&result, &problem, &config).unwrap();
        assert!(cert.pass, "{cert:?}");
        assert!(cert.sample_count > 0);
    }

    #[test]
    fn pipeline_commutes_with_common_rescaling() {
        // Scaling the ambient, target, distance coefficient, and band width
        // by s rescales the glued potential by s.
        let s = 2.0;
        let problem = hyperplane_problem(wave_target());
        let scaled_ambient = affine_combine(&euclidean_potential(2), s, 0.0).unwrap();
        let scaled_target = PotentialField::new(
            "wave_scaled",
            Domain::entire(1).with(Constraint::InsideBall { radius: 2.0 }),
            move |w| {
                let z = w.coords()[0];
                Ok(s * 0.3 * z.re.sin() * (-z.norm_sqr()).exp())
            },
        );
        let scaled_problem = GluingProblem::new(
            scaled_ambient,
            2.0,
            VarietySpec::coordinate_hyperplane(2, 1).unwrap(),
            scaled_target,
        )
        .unwrap();
        let config = quick_config();
        let scaled_config = GluingConfig {
            delta: s * config.delta,
            c1: s * config.c1,
            ..quick_config()
        };
        let base = glue(&problem, &config).unwrap();
        let scaled = glue(&scaled_problem, &scaled_config).unwrap();
        assert_abs_diff_eq!(scaled.a, s * base.a, epsilon = 1e-9);
        let mut rng = SeededLcg::new(77);
        for _ in 0..50 {
            let z = rng.complex_point_in_ball(2, 1.9);
            let v = base.psi.eval(&z).unwrap();
            let vs = scaled.psi.eval(&z).unwrap();
            assert_abs_diff_eq!(vs, s * v, epsilon = 1e-10 * v.abs().max(1.0));
        }
    }

    #[test]
    fn raising_the_offset_keeps_the_near_variety_values() {
        let problem = hyperplane_problem(wave_target());
        let config = quick_config();
        let base = glue(&problem, &config).unwrap();
        let raised = glue_with_a(&problem, &config, base.a + 2.0 * config.delta).unwrap();
        // Close to the variety both versions sit on the extension branch,
        // so the values agree bit-for-bit.
        let r = base.near_z_radius.min(raised.near_z_radius) / 4.0;
        let mut rng = SeededLcg::new(13);
        for _ in 0..10 {
            let w = rng.complex_point_in_ball(1, 1.0);
            let anchor = problem.model().embedding().apply(&w).unwrap();
            let z = ComplexPoint::new(vec![
                anchor.coords()[0],
                anchor.coords()[1] + Complex64::new(r, 0.0),
            ])
            .unwrap();
            assert_eq!(base.psi.eval(&z).unwrap(), raised.psi.eval(&z).unwrap());
        }
    }

    #[test]
    fn verification_is_deterministic_and_worker_independent() {
        let problem = hyperplane_problem(wave_target());
        let config = quick_config();
        let result = glue(&problem, &config).unwrap();
        let again = verify_extension(&result, &problem, &config).unwrap();
        assert_eq!(result.report.to_json_value(), again.to_json_value());
        let threaded_config = GluingConfig { workers: 3, ..quick_config() };
        let threaded = verify_extension(&result, &problem, &threaded_config).unwrap();
        assert_eq!(result.report.to_json_value(), threaded.to_json_value());
    }

    #[test]
    fn config_guards_reject_bad_fractions() {
        let problem = hyperplane_problem(wave_target());
        let bad = GluingConfig { epsilon: 0.6, ..quick_config() };
        assert!(matches!(glue(&problem, &bad), Err(CalcError::Parameter(_))));
        let bad = GluingConfig { epsilon: 0.0, ..quick_config() };
        assert!(glue(&problem, &bad).is_err());
        let bad = GluingConfig { neighborhood_radius: 3.0, ..quick_config() };
        assert!(glue(&problem, &bad).is_err());
    }
}
