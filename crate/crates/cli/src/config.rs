//! TOML experiment configuration: schema, validation, and builders that
//! turn declarative specs into core objects. Every validation error names
//! the offending config key so a bad file is diagnosable from the message
//! alone.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use conekit::calculus::{DiffOrder, FdScheme};
use conekit::potentials::{
    euclidean_potential, hopf_potential, log_pole_potential, Domain, PolyMap, PotentialField,
    VarietySpec,
};
use conekit::regmax::MollifierKernel;
use conekit::sampling::SeededLcg;

use crate::CliError;

fn key_err(key: &str, msg: &str) -> CliError {
    CliError::Config(format!("config key `{key}`: {msg}"))
}

/// Root of the experiment file. Unknown keys are rejected so typos are
/// reported by name instead of being silently ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Report identifier; defaults to the pipeline's own name.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    /// Seed for every randomized sampler (mandatory where sampling occurs;
    /// the --seed flag overrides it).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<SamplesSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levi: Option<LeviSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psh: Option<PshSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regmax: Option<RegmaxSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub glue: Option<GlueSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub project: Option<ProjectSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sasaki: Option<SasakiSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reeb: Option<ReebSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbit: Option<OrbitSpec>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }

    pub fn potential(&self) -> Result<&PotentialSpec, CliError> {
        self.potential
            .as_ref()
            .ok_or_else(|| key_err("potential", "section is required for this command"))
    }

    pub fn samples(&self) -> Result<&SamplesSpec, CliError> {
        self.samples
            .as_ref()
            .ok_or_else(|| key_err("samples", "section is required for this command"))
    }

    /// The echo embedded in report.json: the config as a JSON value (TOML
    /// maps convert to objects with lexicographically sorted keys).
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config echo serialization cannot fail")
    }
}

/// Resolve the seed for a command that samples: the flag wins, then the
/// config; absence is a configuration error because seeded sampling is the
/// reproducibility contract.
pub fn require_seed(flag: Option<u64>, config: &ExperimentConfig) -> Result<u64, CliError> {
    flag.or(config.seed).ok_or_else(|| {
        key_err("seed", "required for seeded sampling (set it in the config or pass --seed)")
    })
}

// ---------------------------------------------------------------------------
// Potentials
// ---------------------------------------------------------------------------

/// Declarative potential: `kind` plus the fields that kind needs. Complex
/// coefficients are written as [re, im] pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// "euclidean" | "weighted_cone" | "log_pole"
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Linear generators of a variety, one coefficient list per generator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<[f64; 2]>>>,
    /// Optional post-composition a*f + b (a may be negative, e.g. to probe
    /// non-psh inputs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
}

fn parse_generators(
    key: &str,
    rows: &[Vec<[f64; 2]>],
    dimension: Option<usize>,
) -> Result<VarietySpec, CliError> {
    if rows.is_empty() {
        return Err(key_err(key, "needs at least one generator"));
    }
    let dim = rows[0].len();
    if dim == 0 {
        return Err(key_err(key, "generator coefficient lists must be nonempty"));
    }
    if let Some(d) = dimension {
        if d != dim {
            return Err(key_err(
                key,
                &format!("generators have {dim} coefficients but dimension is {d}"),
            ));
        }
    }
    let mut maps = Vec::with_capacity(rows.len());
    for row in rows {
        if row.len() != dim {
            return Err(key_err(key, "generators must all have the same length"));
        }
        let coeffs: Vec<Complex64> = row.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        maps.push(
            PolyMap::linear(coeffs).map_err(|e| key_err(key, &format!("bad generator: {e}")))?,
        );
    }
    VarietySpec::new(dim, maps).map_err(|e| key_err(key, &e.to_string()))
}

impl PotentialSpec {
    pub fn build(&self) -> Result<PotentialField, CliError> {
        let base = match self.kind.as_str() {
            "euclidean" => {
                let dim = self
                    .dimension
                    .ok_or_else(|| key_err("potential.dimension", "required for kind \"euclidean\""))?;
                if dim == 0 {
                    return Err(key_err("potential.dimension", "must be at least 1"));
                }
                euclidean_potential(dim)
            }
            "weighted_cone" => {
                let weights = self.weights.as_ref().ok_or_else(|| {
                    key_err("potential.weights", "required for kind \"weighted_cone\"")
                })?;
                hopf_potential(weights)
                    .map_err(|e| key_err("potential.weights", &e.to_string()))?
            }
            "log_pole" => {
                let rows = self.generators.as_ref().ok_or_else(|| {
                    key_err("potential.generators", "required for kind \"log_pole\"")
                })?;
                log_pole_potential(parse_generators("potential.generators", rows, self.dimension)?)
            }
            other => {
                return Err(key_err(
                    "potential.kind",
                    &format!(
                        "unknown kind \"{other}\" (expected euclidean, weighted_cone, or log_pole)"
                    ),
                ))
            }
        };
        let scale = self.scale.unwrap_or(1.0);
        let offset = self.offset.unwrap_or(0.0);
        if !(scale.is_finite() && offset.is_finite()) {
            return Err(key_err("potential.scale", "scale and offset must be finite"));
        }
        if scale == 1.0 && offset == 0.0 {
            return Ok(base);
        }
        // Positive scaling with no offset keeps the 2-homogeneity; anything
        // else drops the operator metadata.
        let op = base.homogeneity().cloned().filter(|_| scale > 0.0 && offset == 0.0);
        let label = format!("scaled({})", base.label());
        let domain = base.domain().clone();
        let inner = base;
        let mut field =
            PotentialField::new(&label, domain, move |z| Ok(scale * inner.eval(z)? + offset));
        if let Some(op) = op {
            field = field.with_homogeneity(op);
        }
        Ok(field)
    }
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesSpec {
    pub count: usize,
    pub radius: f64,
    /// When present, sample the shell inner_radius <= |z| <= radius instead
    /// of the full ball.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_radius: Option<f64>,
}

impl SamplesSpec {
    pub fn generate(
        &self,
        dim: usize,
        seed: u64,
    ) -> Result<Vec<conekit::calculus::ComplexPoint>, CliError> {
        if self.count == 0 {
            return Err(key_err("samples.count", "must be at least 1"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(key_err("samples.radius", "must be positive"));
        }
        let mut rng = SeededLcg::new(seed);
        match self.inner_radius {
            None => Ok((0..self.count).map(|_| rng.complex_point_in_ball(dim, self.radius)).collect()),
            Some(inner) => {
                if !(inner > 0.0 && inner < self.radius) {
                    return Err(key_err(
                        "samples.inner_radius",
                        "must lie strictly between 0 and samples.radius",
                    ));
                }
                Ok((0..self.count)
                    .map(|_| rng.complex_point_in_shell(dim, inner, self.radius))
                    .collect())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

fn scheme_from(key: &str, step: Option<f64>, order: Option<u32>) -> Result<FdScheme, CliError> {
    let mut scheme = FdScheme::default();
    if let Some(h) = step {
        if !(h.is_finite() && h > 0.0) {
            return Err(key_err(&format!("{key}.step"), "must be positive"));
        }
        scheme.step = h;
    }
    match order {
        None => {}
        Some(2) => scheme.order = DiffOrder::Two,
        Some(4) => scheme.order = DiffOrder::Four,
        Some(other) => {
            return Err(key_err(
                &format!("{key}.order"),
                &format!("must be 2 or 4, got {other}"),
            ))
        }
    }
    Ok(scheme)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeviSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
}

impl LeviSpec {
    pub fn scheme(&self) -> Result<FdScheme, CliError> {
        scheme_from("levi", self.step, self.order)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PshSpec {
    /// Levi eigenvalue floor the sweep must certify.
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
}

impl PshSpec {
    pub fn scheme(&self) -> Result<FdScheme, CliError> {
        scheme_from("psh", self.step, self.order)
    }
}

// ---------------------------------------------------------------------------
// Regularized maximum probe
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegmaxSpec {
    pub delta: f64,
    /// Kernel exponent m in (1-h^2)^m; default 2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_degree: Option<u32>,
    /// Grid points per axis; default 120.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Half-width of the probed square; default 3.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
}

impl RegmaxSpec {
    pub fn kernel(&self) -> Result<MollifierKernel, CliError> {
        match self.kernel_degree {
            None => Ok(MollifierKernel::default()),
            Some(m) => MollifierKernel::polynomial(m)
                .map_err(|e| key_err("regmax.kernel_degree", &e.to_string())),
        }
    }

    pub fn grid(&self) -> Result<usize, CliError> {
        let n = self.grid.unwrap_or(120);
        if n < 2 {
            return Err(key_err("regmax.grid", "must be at least 2"));
        }
        Ok(n)
    }

    pub fn half_width(&self) -> Result<f64, CliError> {
        let w = self.half_width.unwrap_or(3.0);
        if !(w.is_finite() && w > 0.0) {
            return Err(key_err("regmax.half_width", "must be positive"));
        }
        Ok(w)
    }
}

// ---------------------------------------------------------------------------
// Gluing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueSpec {
    pub region_radius: f64,
    /// Linear generators cutting out the subvariety Z.
    pub generators: Vec<Vec<[f64; 2]>>,
    pub target: TargetSpec,
    pub epsilon: f64,
    pub delta: f64,
    pub c1: f64,
    pub neighborhood_radius: f64,
    pub sample_density: usize,
    pub max_sweep_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_degree: Option<u32>,
    /// Force the offset constant instead of choosing it from samples
    /// (lets a config demonstrate a failing verification).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_override: Option<f64>,
}

/// Target potential on the subvariety, in its intrinsic coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    /// "zero" | "damped_wave"
    pub kind: String,
    /// Amplitude for damped_wave: a*sin(Re w_1)*exp(-|w|^2).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
}

impl TargetSpec {
    pub fn build(&self, dim: usize) -> Result<PotentialField, CliError> {
        match self.kind.as_str() {
            "zero" => Ok(PotentialField::new("zero", Domain::entire(dim), |_| Ok(0.0))),
            "damped_wave" => {
                let a = self.amplitude.unwrap_or(0.3);
                if !a.is_finite() {
                    return Err(key_err("glue.target.amplitude", "must be finite"));
                }
                Ok(PotentialField::new("damped_wave", Domain::entire(dim), move |w| {
                    let z = w.coords()[0];
                    Ok(a * z.re.sin() * (-w.norm_sq()).exp())
                }))
            }
            other => Err(key_err(
                "glue.target.kind",
                &format!("unknown kind \"{other}\" (expected zero or damped_wave)"),
            )),
        }
    }
}

impl GlueSpec {
    pub fn variety(&self, ambient_dim: usize) -> Result<VarietySpec, CliError> {
        parse_generators("glue.generators", &self.generators, Some(ambient_dim))
    }

    pub fn kernel(&self) -> Result<MollifierKernel, CliError> {
        match self.kernel_degree {
            None => Ok(MollifierKernel::default()),
            Some(m) => MollifierKernel::polynomial(m)
                .map_err(|e| key_err("glue.kernel_degree", &e.to_string())),
        }
    }
}

// ---------------------------------------------------------------------------
// Cone flow
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    /// Flow times for the scaling-law sweep.
    pub times: Vec<f64>,
    pub tolerance: f64,
    /// Backward time for the contraction check; default -30.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_time: Option<f64>,
    /// Norm-ratio ceiling at the backward time; default 1e-12.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
}

impl FlowSpec {
    pub fn scheme(&self) -> Result<FdScheme, CliError> {
        scheme_from("flow", self.step, self.order)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.times.is_empty() {
            return Err(key_err("flow.times", "needs at least one time"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(key_err("flow.tolerance", "must be positive"));
        }
        if let Some(t) = self.contraction_time {
            if t >= 0.0 {
                return Err(key_err("flow.contraction_time", "must be negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectSpec {
    pub level: f64,
    pub t_range: [f64; 2],
    /// Time-grid resolution for the crossing sweep; default 2001.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

impl ProjectSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.level.is_finite() && self.level > 0.0) {
            return Err(key_err("project.level", "must be positive"));
        }
        if !(self.t_range[0] < self.t_range[1]) {
            return Err(key_err("project.t_range", "must be an increasing pair"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Level-set geometry
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SasakiSpec {
    /// Number of seeded (point, X, Y) triples.
    pub triples: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReebSpec {
    pub weights: Vec<f64>,
    pub q_max: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSpec {
    pub weights: Vec<f64>,
    /// Declare the direction irrational (no exact rational representation).
    pub irrational: bool,
    /// Denominator bound when interpreting rational weights; default 100.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_max: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub return_tol: Option<f64>,
}
