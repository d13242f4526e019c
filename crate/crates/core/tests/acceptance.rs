//! Acceptance suite: one test per shipping criterion, each printing a
//! single pass/fail line (run with `--nocapture` to see them on success).
//! Every tolerance is pinned here rather than referenced from the library
//! so that a library-side change that weakens a guarantee fails loudly.

use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64;

use conekit::calculus::{is_strictly_psh, levi_form, ComplexPoint, DiffOrder, FdScheme};
use conekit::cone_flow::{check_unique_intersection, contraction_check, flow, verify_homogeneity};
use conekit::gluing::{
    ball_grid, glue, glue_with_a, verify_tube_bound, GluingConfig, GluingProblem, GluingResult,
};
use conekit::potentials::{
    euclidean_potential, hopf_potential, Constraint, Domain, PotentialField, VarietySpec,
};
use conekit::regmax::{reg_max, reg_max_field, RegMaxParams};
use conekit::sampling::SeededLcg;
use conekit::sasaki::{
    orbit_closure_check, quasi_regular_deform, sample_sphere_triples, verify_sasaki_identity,
    LevelSetStructure, OrbitCheckParams, OrbitDirection, ReebDirection,
};

/// Collects named sub-checks and prints one verdict line for the whole
/// criterion before asserting.
struct Criterion {
    number: usize,
    title: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    fn new(number: usize, title: &'static str) -> Self {
        Criterion { number, title, failures: Vec::new() }
    }

    fn check(&mut self, label: &str, ok: bool) {
        if !ok {
            self.failures.push(label.to_string());
        }
    }

    fn check_le(&mut self, label: &str, value: f64, bound: f64) {
        self.check(&format!("{label}: {value:.6e} <= {bound:.6e}"), value <= bound);
    }

    fn check_ge(&mut self, label: &str, value: f64, bound: f64) {
        self.check(&format!("{label}: {value:.6e} >= {bound:.6e}"), value >= bound);
    }

    fn finish(self) {
        let verdict = if self.failures.is_empty() { "pass" } else { "FAIL" };
        println!("criterion {} ({}): {}", self.number, self.title, verdict);
        for f in &self.failures {
            println!("  failing check: {f}");
        }
        assert!(
            self.failures.is_empty(),
            "criterion {} ({}) failed: {:?}",
            self.number,
            self.title,
            self.failures
        );
    }
}

// ---------------------------------------------------------------------------
// 1. Regularized maximum: band contract and convexity
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_regularized_maximum_band_and_convexity() {
    let started = Instant::now();
    let mut crit = Criterion::new(1, "regularized maximum band and convexity");
    let delta = 0.5;
    let params = RegMaxParams::with_default_kernel(delta).unwrap();

    let n = 200;
    let mut exact_off_band = true;
    let mut inside_band = true;
    let mut hessian_min = f64::INFINITY;
    let h = 1e-3;
    for i in 0..n {
        for j in 0..n {
            let x = -3.0 + 6.0 * i as f64 / (n - 1) as f64;
            let y = -3.0 + 6.0 * j as f64 / (n - 1) as f64;
            let v = reg_max(x, y, &params);
            let m = x.max(y);
            if (x - y).abs() >= delta {
                // Bit-exact agreement with the plain maximum off the band.
                exact_off_band &= v == m;
            } else {
                inside_band &= v >= m && v <= m + delta / 2.0;
            }
            // Central-difference Hessian, cross term from the diagonal
            // identity d^2_{(1,1)} = fxx + 2 fxy + fyy; convexity means it
            // is PSD up to stencil noise.
            let dxx = (reg_max(x + h, y, &params) - 2.0 * v + reg_max(x - h, y, &params))
                / (h * h);
            let dyy = (reg_max(x, y + h, &params) - 2.0 * v + reg_max(x, y - h, &params))
                / (h * h);
            let dvv = (reg_max(x + h, y + h, &params) - 2.0 * v
                + reg_max(x - h, y - h, &params))
                / (h * h);
            let dxy = 0.5 * (dvv - dxx - dyy);
            let min_eig =
                0.5 * ((dxx + dyy) - ((dxx - dyy).powi(2) + 4.0 * dxy * dxy).sqrt());
            hessian_min = hessian_min.min(min_eig);
        }
    }
    crit.check("reg_max equals max bit-exactly wherever |x - y| >= delta", exact_off_band);
    crit.check("band output stays in [max, max + delta/2]", inside_band);
    crit.check_ge("finite-difference Hessian minimum eigenvalue", hessian_min, -1e-8);
    crit.check_le("runtime seconds", started.elapsed().as_secs_f64(), 5.0);
    crit.finish();
}

// ---------------------------------------------------------------------------
// 2. Regularized maximum preserves strict plurisubharmonicity
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_regularized_maximum_preserves_strict_psh() {
    let started = Instant::now();
    let mut crit = Criterion::new(2, "strict plurisubharmonicity of the regularized maximum");
    let f = euclidean_potential(2);
    let shift = [Complex64::new(0.6, -0.3), Complex64::new(0.2, 0.5)];
    let g = PotentialField::new("shifted_paraboloid", Domain::entire(2), move |z| {
        let d: f64 = z.coords().iter().zip(shift.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok(d + 0.1)
    });
    let params = RegMaxParams::with_default_kernel(0.5).unwrap();
    let glued = reg_max_field(&f, &g, &params).unwrap();

    let mut rng = SeededLcg::new(2026);
    let samples: Vec<ComplexPoint> =
        (0..500).map(|_| rng.complex_point_in_ball(2, 2.5)).collect();
    let report = is_strictly_psh(|z| glued.eval(z), &samples, 0.0, &FdScheme::default());
    let eig = report.certificate("levi_min_eigenvalue").unwrap();
    crit.check("verification report passes", report.pass());
    crit.check("all 500 samples swept", eig.sample_count == 500);
    crit.check_ge("worst Levi eigenvalue margin", eig.worst_value, f64::MIN_POSITIVE);
    crit.check_le("runtime seconds", started.elapsed().as_secs_f64(), 10.0);
    crit.finish();
}

// ---------------------------------------------------------------------------
// 3 & 4. Gluing scenario (shared between the two criteria)
// ---------------------------------------------------------------------------

struct Scenario {
    problem: GluingProblem,
    config: GluingConfig,
    result: GluingResult,
    glue_seconds: f64,
}

fn scenario() -> &'static Scenario {
    static CELL: OnceLock<Scenario> = OnceLock::new();
    CELL.get_or_init(|| {
        let target = PotentialField::new(
            "wave",
            Domain::entire(1).with(Constraint::InsideBall { radius: 2.0 }),
            |w| {
                let z = w.coords()[0];
                Ok(0.3 * z.re.sin() * (-z.norm_sqr()).exp())
            },
        );
        let problem = GluingProblem::new(
            euclidean_potential(2),
            2.0,
            VarietySpec::coordinate_hyperplane(2, 1).unwrap(),
            target,
        )
        .unwrap();
        // Default config: epsilon 0.25, delta 0.5, c1 1, tube radius 0.5,
        // 30 points per real axis capped at 1e5 sweep samples.
        let config = GluingConfig::default();
        let started = Instant::now();
        let result = glue(&problem, &config).unwrap();
        Scenario { problem, config, result, glue_seconds: started.elapsed().as_secs_f64() }
    })
}

#[test]
fn criterion_3_kahler_extension_certificates_and_negative_control() {
    let mut crit = Criterion::new(3, "glued extension certificates and negative control");
    let sc = scenario();
    let started = Instant::now();

    let restriction = sc.result.report.certificate("restriction").unwrap();
    crit.check("restriction certificate passes", restriction.pass);
    crit.check("restriction tolerance pinned at 1e-5", restriction.tolerance == 1e-5);

    let positivity = sc.result.report.certificate("positivity").unwrap();
    crit.check("positivity certificate passes", positivity.pass);
    crit.check_ge(
        "worst positivity margin (min-eig of the glued form minus epsilon)",
        positivity.worst_value,
        -1e-4,
    );
    crit.check(
        "positivity sweep stayed within the 1e5 sample budget",
        positivity.sample_count > 0 && positivity.sample_count <= 100_000,
    );

    let exactness = sc.result.report.certificate("near_z_exactness").unwrap();
    crit.check("branch exactness certificate passes", exactness.pass);
    crit.check("branch exactness is bit-exact (worst deviation 0)", exactness.worst_value == 0.0);

    // Negative control: starving the pole branch of ten band widths must
    // be caught by the exactness certificate.
    let sabotaged = glue_with_a(
        &sc.problem,
        &sc.config,
        sc.result.a - 10.0 * sc.config.delta,
    )
    .unwrap();
    let broken = sabotaged.report.certificate("near_z_exactness").unwrap();
    crit.check("lowered offset fails the exactness certificate", !broken.pass);

    crit.check_le(
        "runtime seconds",
        sc.glue_seconds + started.elapsed().as_secs_f64(),
        120.0,
    );
    crit.finish();
}

#[test]
fn criterion_4_tube_quasi_positivity() {
    let mut crit = Criterion::new(4, "tube lower bound for the glued potential");
    let sc = scenario();
    let cert = verify_tube_bound(&sc.result, &sc.problem, &sc.config).unwrap();
    crit.check("tube certificate passes", cert.pass);
    crit.check("tube sweep is nonempty", cert.sample_count > 0);

    // Literal form of the bound against the flat ambient: min-eig of
    // levi(psi) >= -(1 - epsilon) - 1e-4, spot-checked directly on a
    // thinned subset of the tube samples.
    let eps = sc.config.epsilon;
    let fd = sc.config.fd;
    let tube: Vec<ComplexPoint> = ball_grid(&sc.problem, &sc.config)
        .into_iter()
        .filter(|z| {
            let d = sc.problem.model().distance(z);
            d <= sc.config.neighborhood_radius && d >= 2.0 * fd.stencil_radius()
        })
        .collect();
    let mut worst = f64::INFINITY;
    for z in tube.iter().step_by(7) {
        let lam = sc.result.psi.levi(z, &fd).unwrap().min_eigenvalue().unwrap();
        worst = worst.min(lam);
    }
    crit.check_ge("direct tube minimum eigenvalue", worst, -(1.0 - eps) - 1e-4);
    crit.finish();
}

// ---------------------------------------------------------------------------
// 5. Weighted cone rays cross the level exactly once
// ---------------------------------------------------------------------------

/// Independent root-finder: plain bisection on g(t) = f(exp(tA) z) - level.
fn bisect_crossing(f: &PotentialField, z: &ComplexPoint, level: f64, mut lo: f64, mut hi: f64) -> f64 {
    let op = f.homogeneity().unwrap();
    let g = |t: f64| f.eval(&flow(op, z, t).unwrap()).unwrap() - level;
    assert!(g(lo) < 0.0 && g(hi) > 0.0, "bisection bracket must straddle the level");
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_5_weighted_cone_ray_crossings() {
    let started = Instant::now();
    let mut crit = Criterion::new(5, "weighted cone rays cross the unit level once");
    for (weights, seed) in [(vec![1.0, 2.0], 51u64), (vec![1.0, 1.0, 3.0], 52u64)] {
        let tag = format!("alpha={weights:?}");
        let f = hopf_potential(&weights).unwrap();
        let op = f.homogeneity().unwrap().clone();
        let dim = weights.len();
        let mut rng = SeededLcg::new(seed);
        let rays: Vec<ComplexPoint> =
            (0..200).map(|_| rng.complex_point_in_shell(dim, 0.4, 1.8)).collect();

        let report = check_unique_intersection(&f, &rays, 1.0, (-4.0, 4.0), 2001).unwrap();
        crit.check(&format!("{tag}: crossing report passes"), report.pass());
        let count = report.certificate("crossing_count").unwrap();
        crit.check(
            &format!("{tag}: every ray crosses exactly once"),
            count.worst_value == 1.0 && count.sample_count == 200,
        );
        let covered = report.certificate("range_covers_level").unwrap();
        crit.check(&format!("{tag}: every swept range covers the level"), covered.worst_value == 1.0);

        // Closed form t* = (1/2) ln(level / f(z)) against the independent
        // bisection root of the same ray function.
        let mut worst_gap = 0.0f64;
        for z in &rays {
            let t_star = 0.5 * (1.0 / f.eval(z).unwrap()).ln();
            let t_root = bisect_crossing(&f, z, 1.0, -4.0, 4.0);
            worst_gap = worst_gap.max((t_root - t_star).abs());
        }
        crit.check_le(&format!("{tag}: closed-form vs bisection crossing time"), worst_gap, 1e-8);

        let homo = verify_homogeneity(
            &f,
            &op,
            &rays[..25],
            &[-0.9, -0.3, 0.4, 1.1],
            1e-8,
            &FdScheme::default(),
        )
        .unwrap();
        crit.check(&format!("{tag}: homogeneity residual <= 1e-8"), homo.pass());

        let contraction = contraction_check(&op, &rays[..50], -30.0, 1e-12).unwrap();
        crit.check(&format!("{tag}: backward flow contraction"), contraction.pass());
    }
    crit.check_le("runtime seconds", started.elapsed().as_secs_f64(), 10.0);
    crit.finish();
}

// ---------------------------------------------------------------------------
// 6. Round-sphere curvature identity
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_round_sphere_curvature_identity() {
    let started = Instant::now();
    let mut crit = Criterion::new(6, "round-sphere curvature identity for the Reeb field");
    let structure = LevelSetStructure::new(euclidean_potential(2), 1.0).unwrap();
    let triples = sample_sphere_triples(2, 20, 2026);
    let report = verify_sasaki_identity(&structure, &triples, 1e-3).unwrap();

    let identity = report.certificate("curvature_identity_residual").unwrap();
    crit.check("identity certificate passes", identity.pass);
    crit.check("identity tolerance pinned at 1e-3", identity.tolerance == 1e-3);
    crit.check_le("worst identity residual", identity.worst_value, 1e-3);

    let sectional = report.certificate("sectional_curvature_deviation").unwrap();
    crit.check("sectional curvature within 1 +/- 1e-3", sectional.pass);
    crit.check("full report passes", report.pass());
    crit.check_le("runtime seconds", started.elapsed().as_secs_f64(), 30.0);
    crit.finish();
}

// ---------------------------------------------------------------------------
// 7. Quasi-regular deformation and orbit closure
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_quasi_regular_deformation_and_orbits() {
    let started = Instant::now();
    let mut crit = Criterion::new(7, "quasi-regular deformation and torus orbit closure");

    // (1, sqrt 2) with denominators up to 5 deforms to (1, 7/5).
    let direction = ReebDirection::new(vec![1.0, 2f64.sqrt()]).unwrap();
    let deformed = quasi_regular_deform(&direction, 5).unwrap();
    crit.check(
        "deformed weights are (1, 7/5)",
        deformed.rational.numerators() == [5, 7] && deformed.rational.denominator() == 5,
    );
    let expected_dev = (2f64.sqrt() - 1.4).abs();
    crit.check_le(
        "deviation equals |sqrt(2) - 7/5|",
        (deformed.deviation - expected_dev).abs(),
        1e-15,
    );

    // Independent exhaustive search over all denominators (re-derived here
    // rather than shared with the library).
    let mut brute: Option<(f64, u64, Vec<u64>)> = None;
    for q in 1..=5u64 {
        let mut dev = 0.0f64;
        let mut nums = Vec::new();
        for &w in direction.weights() {
            let p = (w * q as f64).round().max(1.0) as u64;
            dev = dev.max((w - p as f64 / q as f64).abs());
            nums.push(p);
        }
        if brute.as_ref().map_or(true, |(d, _, _)| dev < *d) {
            brute = Some((dev, q, nums));
        }
    }
    let (brute_dev, brute_q, brute_nums) = brute.unwrap();
    crit.check(
        "matches the exhaustive search",
        brute_dev == deformed.deviation
            && brute_q == deformed.rational.denominator()
            && brute_nums == deformed.rational.numerators(),
    );

    // Rational orbit (1, 2) returns bit-exactly after one period.
    let structure = LevelSetStructure::new(euclidean_potential(2), 1.0).unwrap();
    let s = 0.5f64.sqrt();
    let z = ComplexPoint::new(vec![Complex64::new(s, 0.0), Complex64::new(0.0, s)]).unwrap();
    let rational = OrbitDirection::from_weights(&[1.0, 2.0], false, 10).unwrap();
    let params = OrbitCheckParams::default();
    let closed = orbit_closure_check(&rational, &structure, &z, &params).unwrap();
    crit.check("rational orbit report passes", closed.pass());
    let ret = closed.certificate("period_return_distance").unwrap();
    crit.check_le("relative return distance", ret.worst_value, 1e-12);

    // Irrational (1, sqrt 2) keeps its distance from the start across the
    // sampled window.
    let irrational = OrbitDirection::from_weights(&[1.0, 2f64.sqrt()], true, 5).unwrap();
    let open = orbit_closure_check(&irrational, &structure, &z, &params).unwrap();
    crit.check("irrational orbit report passes", open.pass());
    let sep = open.certificate("no_return_separation").unwrap();
    crit.check_ge("minimum separation from the start", sep.worst_value, 1e-2);

    crit.check_le("runtime seconds", started.elapsed().as_secs_f64(), 10.0);
    crit.finish();
}

// ---------------------------------------------------------------------------
// 8. Levi kernel against the symbolic oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_levi_kernel_against_symbolic_oracle() {
    let mut crit = Criterion::new(8, "Levi form of log(1+|z|^2) against its symbolic oracle");
    let fubini = |z: &ComplexPoint| Ok((1.0 + z.norm_sq()).ln());
    // d^2/dz dzbar log(1+|z|^2) = 1/(1+|z|^2)^2 in one complex variable.
    let oracle = |z: &ComplexPoint| {
        let s = 1.0 + z.norm_sq();
        1.0 / (s * s)
    };

    let mut rng = SeededLcg::new(88);
    let points: Vec<ComplexPoint> =
        (0..100).map(|_| rng.complex_point_in_ball(1, 2.0)).collect();
    let scheme = FdScheme::default();
    let mut worst = 0.0f64;
    for z in &points {
        let h = levi_form(fubini, z, &scheme).unwrap();
        worst = worst.max((h.get(0, 0) - Complex64::new(oracle(z), 0.0)).norm());
    }
    crit.check_le("default scheme error at 100 points", worst, 1e-6);

    // Order-2 convergence: halving the step divides the worst error by
    // about four.
    let error_at = |step: f64| -> f64 {
        let scheme = FdScheme { step, order: DiffOrder::Two };
        points
            .iter()
            .take(25)
            .map(|z| {
                let h = levi_form(fubini, z, &scheme).unwrap();
                (h.get(0, 0) - Complex64::new(oracle(z), 0.0)).norm()
            })
            .fold(0.0f64, f64::max)
    };
    let coarse = error_at(0.04);
    let fine = error_at(0.02);
    let ratio = coarse / fine;
    crit.check(
        &format!("error ratio {ratio:.3} within [3.5, 4.5] when the step halves"),
        (3.5..=4.5).contains(&ratio),
    );
    crit.finish();
}
