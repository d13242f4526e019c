//! Command pipelines. Each subcommand builds its inputs from the parsed
//! configuration, runs the corresponding verification, and returns the
//! report together with command-specific detail scalars and optional CSV
//! dumps. Certificate failures live inside the report (exit code 1);
//! anything returned as an error here is a configuration problem (exit 2).

use serde_json::{Map, Value};

use conekit::calculus::{levi_form, is_strictly_psh, ComplexPoint, FdScheme};
use conekit::cone_flow::{check_unique_intersection, contraction_check, flow, project_to_level, verify_homogeneity};
use conekit::gluing::{ball_grid, glue, glue_with_a, GluingConfig, GluingProblem, GluingResult};
use conekit::potentials::euclidean_potential;
use conekit::regmax::{reg_max, RegMaxParams};
use conekit::report::{Certificate, VerificationReport, WorseIs};
use conekit::sampling::SeededLcg;
use conekit::sasaki::{
    orbit_closure_check, quasi_regular_deform, sample_sphere_triples, torus_flow,
    verify_sasaki_identity, LevelSetStructure, OrbitCheckParams, OrbitDirection, ReebDirection,
};

use crate::config::{require_seed, ExperimentConfig};
use crate::CliError;

/// Everything a pipeline needs besides the config file itself.
pub struct RunContext<'a> {
    pub config: &'a ExperimentConfig,
    pub seed_flag: Option<u64>,
    pub workers: usize,
    pub csv: bool,
}

/// Result of one pipeline: the verification report, the seed that was
/// actually used (None for deterministic commands), extra scalars for the
/// report's `details` object, and CSV dumps as (file name, contents).
pub struct CommandOutput {
    pub report: VerificationReport,
    pub seed: Option<u64>,
    pub details: Map<String, Value>,
    pub csv_files: Vec<(String, String)>,
}

impl CommandOutput {
    fn new(report: VerificationReport) -> Self {
        CommandOutput { report, seed: None, details: Map::new(), csv_files: Vec::new() }
    }

    fn detail(&mut self, key: &str, value: impl Into<Value>) {
        self.details.insert(key.to_string(), value.into());
    }
}

pub fn run_command(name: &str, ctx: &RunContext) -> Result<CommandOutput, CliError> {
    match name {
        "levi" => levi_cmd(ctx),
        "psh-check" => psh_check_cmd(ctx),
        "regmax-probe" => regmax_probe_cmd(ctx),
        "glue" => glue_cmd(ctx),
        "flow" => flow_cmd(ctx),
        "project" => project_cmd(ctx),
        "sasaki-check" => sasaki_check_cmd(ctx),
        "reeb-deform" => reeb_deform_cmd(ctx),
        "orbit-check" => orbit_check_cmd(ctx),
        other => Err(CliError::Config(format!("unknown command {other}"))),
    }
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("config key `{section}`: section is required for this command"))
}

/// Assemble a CSV dump: header row plus one line per record.
fn csv_table(header: &str, rows: &[String]) -> String {
    let mut out = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}

fn coord_header(dim: usize) -> String {
    (0..dim).map(|j| format!("z{j}_re,z{j}_im")).collect::<Vec<_>>().join(",")
}

fn coord_row(z: &ComplexPoint) -> String {
    z.to_reals().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

// ---------------------------------------------------------------------------
// levi
// ---------------------------------------------------------------------------

/// Probe the Levi form of the configured potential on seeded samples. The
/// certificate asserts that the form is computable at every sample; the
/// observed eigenvalue and trace ranges land in `details` and the CSV.
fn levi_cmd(ctx: &RunContext) -> Result<CommandOutput, CliError> {
    let seed = require_seed(ctx.seed_flag, ctx.config)?;
    let field = ctx.config.potential()?.build()?;
    let dim = field.domain().dim();
    let samples = ctx.config.samples()?.generate(dim, seed)?;
    let scheme = match &ctx.config.levi {
        Some(spec) => spec.scheme()?,
        None => FdScheme::default(),
    };

    let mut errors = Certificate::sweep("evaluation_errors", 0.0, WorseIs::Larger);
    let mut eig_lo = f64::INFINITY;
    let mut eig_hi = f64::NEG_INFINITY;
    let mut trace_lo = f64::INFINITY;
    let mut trace_hi = f64::NEG_INFINITY;
    let mut rows = Vec::new();
    for z in &samples {
        match field.levi(z, &scheme).and_then(|h| Ok((h.min_eigenvalue()?, h.trace()))) {
            Ok((eig, trace)) => {
                errors.observe(&z.to_reals(), 0.0);
                eig_lo = eig_lo.min(eig);
                eig_hi = eig_hi.max(eig);
                trace_lo = trace_lo.min(trace);
                trace_hi = trace_hi.max(trace);
                if ctx.csv {
                    rows.push(format!("{},{eig},{trace}", coord_row(z)));
                }
            }
            Err(_) => {
                errors.observe(&z.to_reals(), 1.0);
                if ctx.csv {
                    rows.push(format!("{},nan,nan", coord_row(z)));
                }
            }
        }
    }

    let mut report = VerificationReport::new("levi_form_probe");
    report.push(errors.finish_at_most());
    let mut out = CommandOutput::new(report);
    out.seed = Some(seed);
    if eig_lo.is_finite() {
        out.detail("min_eigenvalue_low", eig_lo);
        out.detail("min_eigenvalue_high", eig_hi);
        out.detail("trace_low", trace_lo);
        out.detail("trace_high", trace_hi);
    }
    if ctx.csv {
        let header = format!("{},min_eigenvalue,trace", coord_header(dim));
        out.csv_files.push(("levi.csv".to_string(), csv_table(&header, &rows)));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// psh-check
// ---------------------------------------------------------------------------

/// Certify a strict plurisubharmonicity margin on seeded samples, fanning
/// the sweep out to the worker pool. Chunks merge by certificate name, so
/// the report is identical for any worker count.
fn psh_check_cmd(ctx: &RunContext) -> Result<CommandOutput, CliError> {
    let seed = require_seed(ctx.seed_flag, ctx.config)?;
    let spec = ctx.config.psh.as_ref().ok_or_else(|| missing("psh"))?;
    if !spec.margin.is_finite() {
        return Err(CliError::Config("config key `psh.margin`: must be finite".into()));
    }
    let field = ctx.config.potential()?.build()?;
    let dim = field.domain().dim();
    let samples = ctx.config.samples()?.generate(dim, seed)?;
    let scheme = spec.scheme()?;
    let margin = spec.margin;

    let workers = ctx.workers.max(1);
    let report = if workers == 1 || samples.len() < 2 * workers {
        is_strictly_psh(|z| field.eval(z), &samples, margin, &scheme)
    } else {
        let chunk = samples.len().div_ceil(workers);
        let field = &field;
        let scheme = &scheme;
        let parts: Vec<VerificationReport> = std::thread::scope(|s| {
            let handles: Vec<_> = samples
                .chunks(chunk)
                .map(|part| {
                    s.spawn(move || is_strictly_psh(|z| field.eval(z), part, margin, scheme))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
        });
        let mut iter = parts.into_iter();
        let first = iter.next().expect("at least one chunk");
        iter.try_fold(first, |acc, part| acc.merge(&part))?
    };

    let mut out = CommandOutput::new(report);
    out.seed = Some(seed);
    if ctx.csv {
        let rows: Vec<String> = samples
            .iter()
            .map(|z| match field.levi(z, &scheme).and_then(|h| h.min_eigenvalue()) {
                Ok(eig) => format!("{},{eig}", coord_row(z)),
                Err(_) => format!("{},nan", coord_row(z)),
            })
            .collect();
        let header = format!("{},min_eigenvalue", coord_header(dim));
        out.csv_files.push(("psh_check.csv".to_string(), csv_table(&header, &rows)));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// regmax-probe
// ---------------------------------------------------------------------------

/// Probe the scalar regularized maximum on a square grid: exactness off the
/// transition band, the majorization bounds max <= value <= max + delta/2,
/// convexity of the finite-difference Hessian, and monotone slopes.
fn regmax_probe_cmd(ctx: &RunContext) -> Result<CommandOutput, CliError> {
    let spec = ctx.config.regmax.as_ref().ok_or_else(|| missing("regmax"))?;
    let params = RegMaxParams::new(spec.delta, spec.kernel()?)
        .map_err(|e| CliError::Config(format!("config key `regmax.delta`: {e}")))?;
    let n = spec.grid()?;
    let w = spec.half_width()?;
    let delta = spec.delta;

    let mut exact = Certificate::sweep("band_exactness", 0.0, WorseIs::Larger);
    let mut major = Certificate::sweep("majorization", 0.0, WorseIs::Smaller);
    let mut ceiling = Certificate::sweep("band_ceiling", delta / 2.0, WorseIs::Larger);
    let mut convex = Certificate::sweep("convexity_min_eigenvalue", -1e-8, WorseIs::Smaller);
    let mut slope = Certificate::sweep("monotonicity_slope", -1e-12, WorseIs::Smaller);

    let f = |x: f64, y: f64| reg_max(x, y, &params);
    let step = 2.0 * w / (n - 1) as f64;
    let hess_h = 1e-3;
    let slope_h = 1e-5;
    let mut rows = Vec::new();
    for i in 0..n {
        let x = -w + step * i as f64;
        for j in 0..n {
            let y = -w + step * j as f64;
            let v = f(x, y);
            let m = x.max(y);
            if (x - y).abs() >= delta {
                exact.observe(&[x, y], if v == m { 0.0 } else { 1.0 });
            }
            major.observe(&[x, y], v - m);
            ceiling.observe(&[x, y], v - m);

            // Second differences along the axes and the diagonal; the cross
            // term comes from the diagonal identity
            // dxy = (dvv - dxx - dyy) / 2, which keeps the exact null
            // direction (1, 1) of the smoothed max out of the truncation
            // error.
            let h = hess_h;
            let dxx = (f(x + h, y) - 2.0 * v + f(x - h, y)) / (h * h);
            let dyy = (f(x, y + h) - 2.0 * v + f(x, y - h)) / (h * h);
            let dvv = (f(x + h, y + h) - 2.0 * v + f(x - h, y - h)) / (h * h);
            let dxy = 0.5 * (dvv - dxx - dyy);
            let half_tr = 0.5 * (dxx + dyy);
            let disc = (0.25 * (dxx - dyy).powi(2) + dxy * dxy).sqrt();
            convex.observe(&[x, y], half_tr - disc);

            let sx = (f(x + slope_h, y) - f(x - slope_h, y)) / (2.0 * slope_h);
            let sy = (f(x, y + slope_h) - f(x, y - slope_h)) / (2.0 * slope_h);
            slope.observe(&[x, y], sx.min(sy));

            if ctx.csv {
                rows.push(format!("{x},{y},{v}"));
            }
        }
    }

    let mut report = VerificationReport::new("regularized_maximum");
    report.push(exact.finish_at_most());
    report.push(major.finish_at_least());
    report.push(ceiling.finish_at_most());
    report.push(convex.finish_at_least());
    report.push(slope.finish_at_least());
    let mut out = CommandOutput::new(report);
    out.detail("delta", delta);
    out.detail("grid", n as u64);
    out.detail("half_width", w);
    if ctx.csv {
        out.csv_files.push(("regmax.csv".to_string(), csv_table("x,y,value", &rows)));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// glue
// ---------------------------------------------------------------------------

/// Run the full gluing pipeline and its three-certificate verification.
fn glue_cmd(ctx: &RunContext) -> Result<CommandOutput, CliError> {
    let seed = require_seed(ctx.seed_flag, ctx.config)?;
    let spec = ctx.config.glue.as_ref().ok_or_else(|| missing("glue"))?;
    let ambient = ctx.config.potential()?.build()?;
    let dim = ambient.domain().dim();
    let variety = spec.variety(dim)?;
    let model_dim = variety
        .linear_model()
        .map_err(|e| CliError::Config(format!("config key `glue.generators`: {e}")))?
        .dim();
    let target = spec.target.build(model_dim)?;
    let problem = GluingProblem::new(ambient, spec.region_radius, variety, target)
        .map_err(|e| CliError::Config(format!("config key `glue`: {e}")))?;

    let defaults = GluingConfig::default();
    let gc = GluingConfig {
        epsilon: spec.epsilon,
        delta: spec.delta,
        c1: spec.c1,
        neighborhood_radius: spec.neighborhood_radius,
        sample_density: spec.sample_density,
        max_sweep_points: spec.max_sweep_points,
        c_floor: spec.c_floor.unwrap_or(defaults.c_floor),
        seed,
        kernel: spec.kernel()?,
        fd: defaults.fd,
        workers: ctx.workers.max(1),
    };
    gc.validate(&problem)
        .map_err(|e| CliError::Config(format!("config key `glue`: {e}")))?;

    let result = match spec.a_override {
        None => glue(&problem, &gc)?,
        Some(a) => glue_with_a(&problem, &gc, a)?,
    };

    let mut out = CommandOutput::new(result.report.clone());
    out.seed = Some(seed);
    out.detail("offset_a", result.a);
    out.detail("compensation_c", result.c);
    out.detail("compensation_required", result.c_required);
    out.detail("near_z_radius", result.near_z_radius);
    out.detail("ambient_min_eig", result.ambient_min_eig);
    if ctx.csv {
        out.csv_files.push(("glue.csv".to_string(), glue_csv(&problem, &gc, &result)));
    }
    Ok(out)
}

/// Per-sample dump of the glued potential: distance to the variety, value,
/// Levi minimum eigenvalue of ambient + psi, and which branch won (decided
/// by bitwise comparison against the two branch fields).
fn glue_csv(problem: &GluingProblem, gc: &GluingConfig, result: &GluingResult) -> String {
    let grid = ball_grid(problem, gc);
    let stride = grid.len().div_ceil(2000).max(1);
    let dim = problem.ambient().domain().dim();
    let total = |z: &ComplexPoint| Ok(problem.ambient().eval(z)? + result.psi.eval(z)?);
    let mut rows = Vec::new();
    for z in grid.iter().step_by(stride) {
        let dist = problem.model().distance(z);
        let psi = match result.psi.eval(z) {
            Ok(v) => v,
            Err(_) => {
                rows.push(format!("{},{dist},nan,nan,error", coord_row(z)));
                continue;
            }
        };
        let branch = match (result.pole_branch.eval(z), result.extension.eval(z)) {
            (Ok(p), _) if p == psi => "pole",
            (_, Ok(u)) if u == psi => "target",
            _ => "band",
        };
        let eig = match levi_form(total, z, &gc.fd).and_then(|h| h.min_eigenvalue()) {
            Ok(v) => v.to_string(),
            Err(_) => "nan".to_string(),
        };
        rows.push(format!("{},{dist},{psi},{eig},{branch}", coord_row(z)));
    }
    let header = format!("{},variety_distance,psi,min_eigenvalue,branch", coord_header(dim));
    csv_table(&header, &rows)
}

// ---------------------------------------------------------------------------
// flow
// ---------------------------------------------------------------------------

/// Scaling law, Euler identity, and backward contraction for the radial
/// flow of a homogeneous potential, combined into one report. The second
/// error tally is renamed to keep certificate names unique.
fn flow_cmd(ctx: &RunContext) -> Result<CommandOutput, CliError> {
    let seed = require_seed(ctx.seed_flag, ctx.config)?;
    let spec = ctx.config.flow.as_ref().ok_or_else(|| missing("flow"))?;
    spec.validate()?;
    let field = ctx.config.potential()?.build()?;
    let op = field.homogeneity().cloned().ok_or_else(|| {
        CliError::Config(
            "config key `potential.kind`: flow requires a homogeneous potential \
             (euclidean or weighted_cone)"
                .into(),
        )
    })?;
    let dim = field.domain().dim();
    let samples = ctx.config.samples()?.generate(dim, seed)?;
    let scheme = spec.scheme()?;

    let homogeneity = verify_homogeneity(&field, &op, &samples, &spec.times, spec.tolerance, &scheme)?;
    let t_end = spec.contraction_time.unwrap_or(-30.0);
    let contraction = contraction_check(&op, &samples, t_end, spec.contraction_tolerance.unwrap_or(1e-12))?;

    let mut report = VerificationReport::new("radial_flow");
    for cert in homogeneity.certificates {
        report.push(cert);
    }
    for mut cert in contraction.certificates {
        if cert.name == "evaluation_errors" {
            cert.name = "contraction_evaluation_errors".to_string();
        }
        report.push(cert);
    }

    let mut out = CommandOutput::new(report);
    out.seed = Some(seed);
    out.detail("contraction_time", t_end);
    if ctx.csv {
        let mut rows = Vec::new();
        for (ray, z) in samples.iter().enumerate() {
            for &t in &spec.times {
                let row = match flow(&op, z, t).and_then(|w| field.eval(&w)) {
                    Ok(v) => match field.eval(z) {
                        Ok(base) => format!("{ray},{t},{v},{}", (2.0 * t).exp() * base),
                        Err(_) => format!("{ray},{t},{v},nan"),
                    },
                    Err(_) => format!("{ray},{t},nan,nan"),
                };
                rows.push(row);
            }
        }
        out.csv_files.push((
            "flow.csv".to_string(),
            csv_table("ray,t,value,expected", &rows),
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// project
// ---------------------------------------------------------------------------

/// Unique level crossing along flow lines, with a projection round-trip
/// residual appended: |f(project(z)) - level| at most 1e-9 per ray.
fn project_cmd(ctx: &RunContext) -> Result<CommandOutput, CliError> {
    let seed = require_seed(ctx.seed_flag, ctx.config)?;
    let spec = ctx.config.project.as_ref().ok_or_else(|| missing("project"))?;
    spec.validate()?;
    let field = ctx.config.potential()?.build()?;
    if field.homogeneity().is_none() {
        return Err(CliError::Config(
            "config key `potential.kind`: project requires a homogeneous potential \
             (euclidean or weighted_cone)"
                .into(),
        ));
    }
    let dim = field.domain().dim();
    let rays = ctx.config.samples()?.generate(dim, seed)?;
    let grid = spec.grid.unwrap_or(2001);
    let level = spec.level;

    let mut report = check_unique_intersection(
        &field,
        &rays,
        level,
        (spec.t_range[0], spec.t_range[1]),
        grid,
    )?;

    let mut residual = Certificate::sweep("projection_residual", 1e-9, WorseIs::Larger);
    let mut rows = Vec::new();
    for (ray, z) in rays.iter().enumerate() {
        let out = project_to_level(&field, z, level).and_then(|w| field.eval(&w));
        let r = match out {
            Ok(v) => (v - level).abs(),
            Err(_) => 1.0, // sentinel failure
        };
        residual.observe(&z.to_reals(), r);
        if ctx.csv {
            let t_star = match field.eval(z) {
                Ok(base) if base > 0.0 => (0.5 * (level / base).ln()).to_string(),
                _ => "nan".to_string(),
            };
            rows.push(format!("{ray},{t_star},{r}"));
        }
    }
    report.push(residual.finish_at_most());

    let mut out = CommandOutput::new(report);
    out.seed = Some(seed);
    out.detail("level", level);
    if ctx.csv {
        out.csv_files.push((
            "project.csv".to_string(),
            csv_table("ray,crossing_t,residual", &rows),
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// sasaki-check
// ---------------------------------------------------------------------------

/// Curvature identity sweep on the round level set. The structure is pinned
/// to the euclidean potential at level 1, where the identity is exact.
fn sasaki_check_cmd(ctx: &RunContext) -> Result<CommandOutput, CliError> {
    let seed = require_seed(ctx.seed_flag, ctx.config)?;
    let spec = ctx.config.sasaki.as_ref().ok_or_else(|| missing("sasaki"))?;
    if spec.triples == 0 {
        return Err(CliError::Config("config key `sasaki.triples`: must be at least 1".into()));
    }
    if !(spec.tolerance.is_finite() && spec.tolerance > 0.0) {
        return Err(CliError::Config("config key `sasaki.tolerance`: must be positive".into()));
    }
    let pot_spec = ctx.config.potential()?;
    if pot_spec.kind != "euclidean" {
        return Err(CliError::Config(
            "config key `potential.kind`: sasaki-check requires the euclidean potential".into(),
        ));
    }
    let field = pot_spec.build()?;
    let dim = field.domain().dim();
    let structure = LevelSetStructure::new(field, 1.0)?;
    let triples = sample_sphere_triples(dim, spec.triples, seed);
    let report = verify_sasaki_identity(&structure, &triples, spec.tolerance)?;

    let mut out = CommandOutput::new(report);
    out.seed = Some(seed);
    if ctx.csv {
        // Per-triple residuals: rerun each triple alone and read off the
        // observed values (a single-sample sweep's worst value is the value).
        let names = [
            "curvature_identity_residual",
            "sectional_curvature_deviation",
            "curvature_antisymmetry",
            "reeb_tangency_residual",
            "reeb_unit_norm_deviation",
        ];
        let mut rows = Vec::new();
        for (i, triple) in triples.iter().enumerate() {
            let single = verify_sasaki_identity(&structure, std::slice::from_ref(triple), spec.tolerance)?;
            let cols: Vec<String> = names
                .iter()
                .map(|n| match single.certificate(n) {
                    Some(c) if c.sample_count > 0 => c.worst_value.to_string(),
                    _ => "nan".to_string(),
                })
                .collect();
            rows.push(format!("{i},{},{}", coord_row(&triple.0), cols.join(",")));
        }
        let header = format!("triple,{},{}", coord_header(dim), names.join(","));
        out.csv_files.push(("sasaki.csv".to_string(), csv_table(&header, &rows)));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// reeb-deform
// ---------------------------------------------------------------------------

/// Deform a Reeb direction to the nearest quasi-regular one. The deviation
/// certificate asserts the sup-norm distance stays within the half-spacing
/// 1/(2 q_max) of the rational grid, which holds whenever every weight is
/// at least 1/(2 q_max) (the rounding is clamped below by 1).
fn reeb_deform_cmd(ctx: &RunContext) -> Result<CommandOutput, CliError> {
    let spec = ctx.config.reeb.as_ref().ok_or_else(|| missing("reeb"))?;
    if spec.q_max == 0 {
        return Err(CliError::Config("config key `reeb.q_max`: must be at least 1".into()));
    }
    let direction = ReebDirection::new(spec.weights.clone())
        .map_err(|e| CliError::Config(format!("config key `reeb.weights`: {e}")))?;
    let deformed = quasi_regular_deform(&direction, spec.q_max)?;
    let period = deformed.rational.period();
    let bound = 0.5 / spec.q_max as f64;

    let mut report = VerificationReport::new("quasi_regular_deformation");
    report.push(Certificate::scalar(
        "deviation_within_denominator_bound",
        deformed.deviation,
        bound,
        deformed.deviation <= bound,
    ));
    report.push(Certificate::scalar("period_positive", period, 0.0, period > 0.0));

    let mut out = CommandOutput::new(report);
    out.detail(
        "numerators",
        Value::Array(deformed.rational.numerators().iter().map(|&n| Value::from(n)).collect()),
    );
    out.detail("denominator", deformed.rational.denominator());
    out.detail("deviation", deformed.deviation);
    out.detail("period", period);
    if ctx.csv {
        let mut rows = Vec::new();
        for q in 1..=spec.q_max {
            let dev = spec
                .weights
                .iter()
                .map(|&w| {
                    let p = (w * q as f64).round().max(1.0);
                    (w - p / q as f64).abs()
                })
                .fold(0.0f64, f64::max);
            rows.push(format!("{q},{dev}"));
        }
        out.csv_files.push(("reeb_deform.csv".to_string(), csv_table("q,deviation", &rows)));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// orbit-check
// ---------------------------------------------------------------------------

/// Orbit closure of the torus flow through a seeded point of the unit
/// sphere: rational directions must return after one period, irrational
/// ones must stay separated across the sweep window.
fn orbit_check_cmd(ctx: &RunContext) -> Result<CommandOutput, CliError> {
    let seed = require_seed(ctx.seed_flag, ctx.config)?;
    let spec = ctx.config.orbit.as_ref().ok_or_else(|| missing("orbit"))?;
    let dim = spec.weights.len();
    if dim == 0 {
        return Err(CliError::Config("config key `orbit.weights`: must be nonempty".into()));
    }
    let direction = OrbitDirection::from_weights(&spec.weights, spec.irrational, spec.q_max.unwrap_or(100))
        .map_err(|e| CliError::Config(format!("config key `orbit.weights`: {e}")))?;
    let structure = LevelSetStructure::new(euclidean_potential(dim), 1.0)?;
    let z = SeededLcg::new(seed).complex_point_on_sphere(dim);

    let mut params = OrbitCheckParams::default();
    if let Some(w) = spec.window {
        if !(w.is_finite() && w > 0.0) {
            return Err(CliError::Config("config key `orbit.window`: must be positive".into()));
        }
        params.window = w;
    }
    if let Some(n) = spec.sweep_samples {
        if n < 2 {
            return Err(CliError::Config("config key `orbit.sweep_samples`: must be at least 2".into()));
        }
        params.sweep_samples = n;
    }
    if let Some(s) = spec.separation_floor {
        if !(s.is_finite() && s > 0.0) {
            return Err(CliError::Config("config key `orbit.separation_floor`: must be positive".into()));
        }
        params.separation_floor = s;
    }
    if let Some(t) = spec.return_tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::Config("config key `orbit.return_tol`: must be positive".into()));
        }
        params.return_tol = t;
    }

    let report = orbit_closure_check(&direction, &structure, &z, &params)?;

    let mut out = CommandOutput::new(report);
    out.seed = Some(seed);
    if ctx.csv {
        // Separation trace |flow(z, t) - z| / |z| over the relevant window:
        // one period for rational directions, the sweep window otherwise.
        let span = match &direction {
            OrbitDirection::Rational(r) => r.period(),
            OrbitDirection::Irrational(_) => params.window,
        };
        let steps = 512usize;
        let norm = z.norm_sq().sqrt();
        let mut rows = Vec::new();
        for i in 0..=steps {
            let t = span * i as f64 / steps as f64;
            let w = torus_flow(&direction, &z, t);
            let sep = w
                .coords()
                .iter()
                .zip(z.coords().iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
                / norm;
            rows.push(format!("{t},{sep}"));
        }
        out.csv_files.push(("orbit.csv".to_string(), csv_table("t,separation", &rows)));
    }
    Ok(out)
}
