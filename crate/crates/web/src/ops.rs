//! Demo operations, each returning a JSON string ready for a canvas plot.
//! Everything here is deterministic and pure, so the demos are tested
//! natively; the wasm layer only forwards calls.

use serde_json::{json, Value};

use conekit::calculus::ComplexPoint;
use conekit::cone_flow::{flow, project_to_level};
use conekit::gluing::{glue, GluingConfig, GluingProblem};
use conekit::potentials::{euclidean_potential, hopf_potential, Domain, PotentialField, VarietySpec};
use conekit::regmax::{reg_max, MollifierKernel, RegMaxParams};

fn bad(msg: &str) -> String {
    format!("invalid input: {msg}")
}

/// reg_max(x, 0) across the transition band: the hard maximum, the smooth
/// one, and its finite-difference second derivative (nonnegative — that is
/// the whole point of the construction).
pub fn regmax_profile_json(delta: f64, kernel_degree: u32, samples: usize) -> Result<String, String> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(bad("delta must be positive"));
    }
    if !(16..=20_000).contains(&samples) {
        return Err(bad("samples must lie between 16 and 20000"));
    }
    let kernel = MollifierKernel::polynomial(kernel_degree).map_err(|e| e.to_string())?;
    let params = RegMaxParams::new(delta, kernel).map_err(|e| e.to_string())?;

    let span = 1.2 * delta;
    let h = delta / 100.0;
    let mut xs = Vec::with_capacity(samples);
    let mut hard = Vec::with_capacity(samples);
    let mut smooth = Vec::with_capacity(samples);
    let mut curvature = Vec::with_capacity(samples);
    for i in 0..samples {
        let x = -span + 2.0 * span * i as f64 / (samples - 1) as f64;
        let f = |t: f64| reg_max(t, 0.0, &params);
        xs.push(x);
        hard.push(x.max(0.0));
        smooth.push(f(x));
        curvature.push((f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h));
    }
    Ok(json!({
        "delta": delta,
        "kernel_degree": kernel_degree,
        "x": xs,
        "hard_max": hard,
        "smooth_max": smooth,
        "second_derivative": curvature,
    })
    .to_string())
}

/// Level curve {phi = 1} of the weighted cone potential in the moduli
/// plane (|z_1|, |z_2|), plus flow lines that project sample points onto
/// it along the radial flow.
pub fn cone_geometry_json(
    a1: f64,
    a2: f64,
    curve_samples: usize,
    flow_lines: usize,
) -> Result<String, String> {
    if !(a1.is_finite() && a1 > 0.0 && a2.is_finite() && a2 > 0.0) {
        return Err(bad("weights must be positive"));
    }
    if !(8..=2000).contains(&curve_samples) {
        return Err(bad("curve_samples must lie between 8 and 2000"));
    }
    if flow_lines > 16 {
        return Err(bad("flow_lines must be at most 16"));
    }
    let field = hopf_potential(&[a1, a2]).map_err(|e| e.to_string())?;
    let op = field.homogeneity().expect("cone potential is homogeneous").clone();

    let quarter = std::f64::consts::FRAC_PI_2;
    let mut curve_x = Vec::with_capacity(curve_samples);
    let mut curve_y = Vec::with_capacity(curve_samples);
    for k in 0..curve_samples {
        // Stay off the axes: a coordinate of exactly zero is fine for the
        // potential but degenerate for the plot.
        let theta = quarter * (k as f64 + 0.5) / curve_samples as f64;
        let dir = ComplexPoint::from_reals(&[theta.cos(), 0.0, theta.sin(), 0.0]);
        let w = project_to_level(&field, &dir, 1.0).map_err(|e| e.to_string())?;
        curve_x.push(w.coords()[0].norm());
        curve_y.push(w.coords()[1].norm());
    }

    let mut flows = Vec::with_capacity(flow_lines);
    for j in 0..flow_lines {
        let theta = quarter * (j as f64 + 0.7) / (flow_lines as f64 + 0.4);
        // Alternate between starts outside and inside the level set so the
        // flow lines approach it from both sides.
        let r = if j % 2 == 0 { 1.8 } else { 0.35 };
        let start = ComplexPoint::from_reals(&[r * theta.cos(), 0.0, r * theta.sin(), 0.0]);
        let base = field.eval(&start).map_err(|e| e.to_string())?;
        let t_end = 0.5 * (1.0 / base).ln();
        let steps = 33usize;
        let mut px = Vec::with_capacity(steps);
        let mut py = Vec::with_capacity(steps);
        for i in 0..steps {
            let t = t_end * i as f64 / (steps - 1) as f64;
            let p = flow(&op, &start, t).map_err(|e| e.to_string())?;
            px.push(p.coords()[0].norm());
            py.push(p.coords()[1].norm());
        }
        flows.push(json!({ "x": px, "y": py }));
    }

    Ok(json!({
        "weights": [a1, a2],
        "level": 1.0,
        "curve_x": curve_x,
        "curve_y": curve_y,
        "flows": flows,
    })
    .to_string())
}

/// Run the hyperplane gluing pipeline at demo scale and slice the glued
/// potential along a line normal to the variety: z(s) = (0.4, s). Returns
/// the three branch profiles, the computed constants, and the
/// verification certificates.
pub fn glue_profile_json(
    epsilon: f64,
    delta: f64,
    c1: f64,
    amplitude: f64,
    samples: usize,
) -> Result<String, String> {
    if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < 0.5) {
        return Err(bad("epsilon must lie strictly between 0 and 0.5"));
    }
    if !(delta.is_finite() && delta > 0.0 && delta <= 2.0) {
        return Err(bad("delta must lie in (0, 2]"));
    }
    if !(c1.is_finite() && (0.0..=4.0).contains(&c1)) {
        return Err(bad("c1 must lie in [0, 4]"));
    }
    if !(amplitude.is_finite() && amplitude.abs() <= 1.0) {
        return Err(bad("amplitude must lie in [-1, 1]"));
    }
    if !(16..=2000).contains(&samples) {
        return Err(bad("samples must lie between 16 and 2000"));
    }

    let variety = VarietySpec::coordinate_hyperplane(2, 1).map_err(|e| e.to_string())?;
    let target = PotentialField::new("demo_wave", Domain::entire(1), move |w| {
        let z = w.coords()[0];
        Ok(amplitude * z.re.sin() * (-w.norm_sq()).exp())
    });
    let problem = GluingProblem::new(euclidean_potential(2), 2.0, variety, target)
        .map_err(|e| e.to_string())?;
    let config = GluingConfig {
        epsilon,
        delta,
        c1,
        sample_density: 7,
        max_sweep_points: 3000,
        ..GluingConfig::default()
    };
    let result = glue(&problem, &config).map_err(|e| e.to_string())?;

    let span = 1.2;
    let mut s_values = Vec::with_capacity(samples);
    let mut psi = Vec::with_capacity(samples);
    let mut pole = Vec::with_capacity(samples);
    let mut extension = Vec::with_capacity(samples);
    let opt = |v: Result<f64, conekit::CalcError>| -> Value {
        match v {
            Ok(x) => json!(x),
            Err(_) => Value::Null,
        }
    };
    for i in 0..samples {
        let s = -span + 2.0 * span * i as f64 / (samples - 1) as f64;
        let z = ComplexPoint::from_reals(&[0.4, 0.0, s, 0.0]);
        s_values.push(s);
        psi.push(opt(result.psi.eval(&z)));
        pole.push(opt(result.pole_branch.eval(&z)));
        extension.push(opt(result.extension.eval(&z)));
    }

    let certificates: Vec<Value> = result
        .report
        .certificates
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "pass": c.pass,
                "worst_value": c.worst_value,
                "tolerance": c.tolerance,
            })
        })
        .collect();

    Ok(json!({
        "s": s_values,
        "psi": psi,
        "pole_branch": pole,
        "extension": extension,
        "constants": {
            "compensation_c": result.c,
            "offset_a": result.a,
            "near_z_radius": result.near_z_radius,
        },
        "certificates": certificates,
        "pass": result.report.pass(),
    })
    .to_string())
}
