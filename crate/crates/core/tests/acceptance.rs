//! Runs each acceptance criterion at its stated tolerance and prints one
//! PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use densitylab::density::{BakryEmeryParams, DensityField, MParam, Monomial};
use densitylab::heintze::shrinker_radius;
use densitylab::lab::{fitted_order, run_scenario, CheckId, CheckOutcome, ResolvedScenario, ScenarioOutcome, SuiteConfig};
use densitylab::reilly::{bochner_gap, Quadratic};
use densitylab::report::{CheckReport, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;

fn suite_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("suites").join(name)
}

fn suite(name: &str) -> Vec<ResolvedScenario> {
    SuiteConfig::load(&suite_path(name)).and_then(|s| s.resolve()).expect("bundled suite resolves")
}

fn inline(json: &str) -> Vec<ResolvedScenario> {
    SuiteConfig::from_json(json).and_then(|s| s.resolve()).expect("inline suite resolves")
}

fn run_named(scenarios: &[ResolvedScenario], name: &str) -> ScenarioOutcome {
    let sc = scenarios.iter().find(|s| s.name == name).unwrap_or_else(|| panic!("no scenario {name}"));
    run_scenario(sc, None)
}

fn report(o: &ScenarioOutcome, check: CheckId) -> std::result::Result<&CheckReport, String> {
    match o.checks.get(&check) {
        Some(CheckOutcome::Report(r)) => Ok(r),
        Some(CheckOutcome::Error(e)) => Err(format!("{}/{}: {} ({})", o.scenario.name, check.name(), e.message, e.kind)),
        None => Err(format!("{}/{} missing", o.scenario.name, check.name())),
    }
}

fn require(cond: bool, msg: String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn ros_disk_equality() -> Outcome {
    let o = run_named(&suite("equality-cases.json"), "ros-unit-disk");
    let r = report(&o, CheckId::Ros)?;
    require(r.history.len() == 3, format!("expected 3 levels, got {}", r.history.len()))?;
    let order = fitted_order(&r.history).ok_or("no fitted order")?;
    require(r.relative_gap.abs() < 1e-3, format!("relative gap {:.3e}", r.relative_gap))?;
    require((1.6..=2.4).contains(&order), format!("order {order:.3}"))?;
    require(r.equality && r.status == Status::Pass, "equality flag not set".into())?;
    Ok(format!("relative gap {:.2e}, order {order:.3}", r.relative_gap))
}

fn cone_equality() -> Outcome {
    let o = run_named(&suite("equality-cases.json"), "cone-quarter-wedge");
    let r = report(&o, CheckId::Cone)?;
    let cutoff = r.details.get("cutoff_radius").copied().unwrap_or(f64::NAN);
    require(cutoff <= 1e-4 * (1.0 + 1e-12), format!("cutoff {cutoff:.2e}"))?;
    require(r.relative_gap.abs() < 1e-3 && r.pass, format!("relative gap {:.3e}", r.relative_gap))?;
    Ok(format!("relative gap {:.2e} at cutoff {cutoff:.0e}", r.relative_gap))
}

fn linear_isoperimetric_equality() -> Outcome {
    let eq = suite("equality-cases.json");
    let disk = run_named(&eq, "linear-isoperimetric-disk");
    let rd = report(&disk, CheckId::LinearIsoperimetric)?;
    require(rd.relative_gap.abs() < 1e-3 && rd.pass, format!("disk relative gap {:.3e}", rd.relative_gap))?;
    let ball = run_named(&eq, "linear-isoperimetric-ball");
    let rb = report(&ball, CheckId::LinearIsoperimetric)?;
    require(rb.gap.abs() <= 1e-10, format!("ball gap {:.3e}", rb.gap))?;
    require(rb.pass && rb.equality, "ball equality not flagged".into())?;
    Ok(format!("disk relative gap {:.2e}, ball gap {:.1e}", rd.relative_gap, rb.gap))
}

fn reilly_identity() -> Outcome {
    let conv = suite("convergence.json");
    let mut parts = Vec::new();
    for name in ["reilly-disk-flat", "reilly-disk-linear-weight"] {
        let o = run_named(&conv, name);
        let r = report(&o, CheckId::Reilly)?;
        let order = fitted_order(&r.history).ok_or("no fitted order")?;
        require(r.pass && r.relative_gap.abs() < 1e-3, format!("{name}: relative gap {:.3e}", r.relative_gap))?;
        require((1.6..=2.4).contains(&order), format!("{name}: order {order:.3}"))?;
        parts.push(format!("{name} {:.1e} (order {order:.2})", r.relative_gap));
    }
    Ok(parts.join(", "))
}

fn random_quadratic(rng: &mut ChaCha8Rng, d: usize) -> Quadratic {
    let mut a = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let v = rng.gen_range(-2.0..2.0);
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    let b = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Quadratic::new(rng.gen_range(-1.0..1.0), b, a).unwrap()
}

fn random_field(rng: &mut ChaCha8Rng, d: usize) -> DensityField {
    match rng.gen_range(0..4) {
        0 => DensityField::constant(rng.gen_range(-1.0..1.0)),
        1 => DensityField::Gaussian { a: rng.gen_range(-1.0..1.0), center: (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect() },
        2 => DensityField::linear((0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()),
        _ => {
            let terms = (0..3)
                .map(|_| Monomial { coeff: rng.gen_range(-1.0..1.0), powers: (0..d).map(|_| rng.gen_range(0..4)).collect() })
                .collect();
            DensityField::Polynomial { terms, center: Vec::new() }
        }
    }
}

fn bochner_inequality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut min_gap = f64::INFINITY;
    for _ in 0..10_000 {
        let d = rng.gen_range(2..=3);
        let f = random_field(&mut rng, d);
        let m = if rng.gen_bool(0.25) {
            MParam::Infinite
        } else if f.is_constant() && rng.gen_bool(0.5) {
            MParam::Finite(d as f64)
        } else {
            MParam::Finite(d as f64 + rng.gen_range(0.1..5.0))
        };
        let u = random_quadratic(&mut rng, d);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g = bochner_gap(&f, &BakryEmeryParams::new(m, d), &x, &u).map_err(|e| e.to_string())?;
        min_gap = min_gap.min(g);
    }
    require(min_gap >= -1e-12, format!("min sampled gap {min_gap:.3e}"))?;
    // equality: u = |x|²/2 + b·x with f constant and m = d, and u affine with
    // f affine and m = ∞
    let mut max_eq = 0.0f64;
    for d in 2..=3 {
        let id: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let u = Quadratic::new(0.3, vec![0.5; d], id).unwrap();
        let affine = Quadratic::new(1.0, vec![0.7; d], vec![vec![0.0; d]; d]).unwrap();
        for k in 0..100 {
            let x: Vec<f64> = (0..d).map(|i| ((k * (i + 3)) as f64 * 0.37).sin()).collect();
            let g1 = bochner_gap(&DensityField::constant(0.4), &BakryEmeryParams::new(MParam::Finite(d as f64), d), &x, &u).unwrap();
            let lin = DensityField::linear((0..d).map(|i| 0.5 - i as f64).collect());
            let g2 = bochner_gap(&lin, &BakryEmeryParams::new(MParam::Infinite, d), &x, &affine).unwrap();
            max_eq = max_eq.max(g1.abs()).max(g2.abs());
        }
    }
    require(max_eq < 1e-10, format!("equality gap {max_eq:.3e}"))?;
    Ok(format!("min sampled gap {min_gap:.2e}, max equality gap {max_eq:.1e}"))
}

fn flat_spectral_equality() -> Outcome {
    let eq = suite("equality-cases.json");
    let c = run_named(&eq, "unit-circle-spectrum");
    let rc = report(&c, CheckId::Lambda1MeanBound)?;
    require((rc.lhs - 1.0).abs() < 5e-3 && (rc.rhs - 1.0).abs() < 5e-3, format!("circle lambda {:.5} bound {:.5}", rc.lhs, rc.rhs))?;
    require(rc.pass && rc.equality, "circle equality not flagged".into())?;
    let s = run_named(&eq, "unit-icosphere-spectrum");
    let rs = report(&s, CheckId::Lambda1MeanBound)?;
    require((rs.lhs - 2.0).abs() < 0.04 && (rs.rhs - 2.0).abs() < 0.04, format!("icosphere lambda {:.5} bound {:.5}", rs.lhs, rs.rhs))?;
    require(rs.pass && rs.equality, "icosphere equality not flagged".into())?;
    Ok(format!("circle {:.5} vs {:.5}, icosphere {:.4} vs {:.4}", rc.lhs, rc.rhs, rs.lhs, rs.rhs))
}

fn hyperbolic_equality() -> Outcome {
    let eq = suite("equality-cases.json");
    let mut parts = Vec::new();
    for (name, n) in [("hyperbolic-circle", 1.0), ("hyperbolic-sphere", 2.0)] {
        let o = run_named(&eq, name);
        let r = report(&o, CheckId::Lambda1MaxBound)?;
        require((r.rhs - n).abs() < 1e-6, format!("{name}: bound {:.6} expected {n}", r.rhs))?;
        let rel = (r.lhs - r.rhs).abs() / r.rhs;
        require(rel < 0.02 && r.pass && r.equality, format!("{name}: lambda {:.5} vs bound {:.5}", r.lhs, r.rhs))?;
        parts.push(format!("n={n}: {:.2e}", rel));
    }
    Ok(parts.join(", "))
}

fn spherical_equality() -> Outcome {
    let scs = inline(
        r#"{"scenarios": [
            {"name": "n1", "geometry": {"generator": "geodesic_sphere", "rho": 0.5235987755982988, "resolution": 256},
             "ambient": {"delta": 1.0, "dim": 2}, "checks": ["lambda1_mean_bound"], "tolerances": {"equality_tol": 0.02}},
            {"name": "n2", "geometry": {"generator": "geodesic_sphere", "rho": 0.5235987755982988, "resolution": 4},
             "ambient": {"delta": 1.0, "dim": 3}, "checks": ["lambda1_mean_bound"], "tolerances": {"equality_tol": 0.02}}
        ]}"#,
    );
    let mut parts = Vec::new();
    for (name, n) in [("n1", 1.0), ("n2", 2.0)] {
        let o = run_named(&scs, name);
        let r = report(&o, CheckId::Lambda1MeanBound)?;
        let expected = n / 0.25;
        require((r.rhs - expected).abs() < 1e-6 * expected, format!("{name}: bound {:.6} expected {expected}", r.rhs))?;
        let rel = (r.lhs - r.rhs).abs() / r.rhs;
        require(rel < 0.02 && r.pass && r.equality, format!("{name}: lambda {:.5} vs bound {:.5}", r.lhs, r.rhs))?;
        parts.push(format!("{name}: {:.2e}", rel));
    }
    Ok(parts.join(", "))
}

fn shrinker_sphere_claim() -> Outcome {
    for n in 1..=2 {
        let r0 = shrinker_radius(0.0, n).map_err(|e| e.to_string())?;
        require((r0 - (2.0 * n as f64).sqrt()).abs() < 1e-12, format!("n={n}: radius {r0}"))?;
    }
    let an = suite("analytic.json");
    let mut parts = Vec::new();
    for name in ["shrinker-circle", "shrinker-sphere"] {
        let o = run_named(&an, name);
        let r = report(&o, CheckId::ShrinkerSphere)?;
        let max_hf = r.details["max_abs_hf"];
        let q = r.details["min_hf_minus_gradf_sq"];
        require(max_hf < 1e-8, format!("{name}: max|H_f| = {max_hf:.3e}"))?;
        require(q > 0.1, format!("{name}: |H_f - grad f|^2 = {q:.3e}"))?;
        parts.push(format!("{name} max|H_f| {max_hf:.1e}, |H|^2 {q:.3}"));
    }
    Ok(parts.join(", "))
}

fn hypersurface_suite() -> Outcome {
    let scs = suite("hypersurface-suite.json");
    let mut worst_ratio = 0.0f64;
    for sc in &scs {
        let o = run_scenario(sc, None);
        let chain = report(&o, CheckId::RadialChain)?;
        require(chain.pass, format!("{}: radial chain gaps {:.3e}", sc.name, chain.gap))?;
        let gs = report(&o, CheckId::GradientSum)?;
        require(gs.pass, format!("{}: gradient sum gap {:.3e}", sc.name, gs.gap))?;
        let n = (sc.ambient.dim - 1) as f64;
        let max = gs.details["max_gradient_sum"];
        let eps = gs.details["epsilon_h"];
        require(max <= n + eps, format!("{}: max {max:.6} > n + eps = {:.6}", sc.name, n + eps))?;
        worst_ratio = worst_ratio.max(max / n);
    }
    Ok(format!("{} scenarios, max gradient sum / n = {worst_ratio:.6}", scs.len()))
}

fn strictness_controls() -> Outcome {
    let strict = suite("strict-controls.json");
    let mut parts = Vec::new();
    for sc in &strict {
        let o = run_scenario(sc, None);
        for (id, _) in &o.checks {
            let r = report(&o, *id)?;
            require(r.status == Status::Pass, format!("{}: status {:?}", sc.name, r.status))?;
            require(r.gap > r.tolerance.max(0.0), format!("{}: gap {:.3e} not strictly positive", sc.name, r.gap))?;
            require(!r.equality, format!("{}: flagged as equality", sc.name))?;
            parts.push(format!("{} {:.2e}", sc.name, r.relative_gap));
        }
    }
    let o = run_named(&suite("hypothesis-controls.json"), "concave-weight-disk");
    let r = report(&o, CheckId::Ros)?;
    let be = r.hypotheses.iter().find(|(k, _)| k.starts_with("be")).map(|(_, v)| *v);
    require(
        r.status == Status::HypothesisFailed && be == Some(densitylab::report::HypothesisState::Failed),
        format!("concave weight: status {:?}, hypotheses {:?}", r.status, r.hypotheses),
    )?;
    Ok(format!("{}; concave weight reports hypothesis failure", parts.join(", ")))
}

fn data_sections(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), serde_json::to_string(&v["data"]).unwrap());
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap());
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for entry in std::fs::read_dir(suite_path("")).unwrap() {
        let path = entry.unwrap().path();
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let mut runs = Vec::new();
        for k in 0..2 {
            let out = tmp.path().join(format!("{stem}-{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_lab")).arg("run").arg(&path).arg("--out").arg(&out).output().map_err(|e| e.to_string())?;
            require(status.status.code() == Some(0), format!("{stem}: exit {:?}", status.status.code()))?;
            runs.push(data_sections(&out));
        }
        require(runs[0] == runs[1], format!("{stem}: report data differs between runs"))?;
        compared += runs[0].len();
    }
    Ok(format!("{compared} report files identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("ros equality on the unit disk", ros_disk_equality),
        ("cone equality on the quarter wedge", cone_equality),
        ("linear isoperimetric equality on disk and ball", linear_isoperimetric_equality),
        ("weighted reilly identity on the disk", reilly_identity),
        ("pointwise bochner inequality", bochner_inequality),
        ("eigenvalue bound equality, flat spheres", flat_spectral_equality),
        ("eigenvalue bound equality, hyperbolic spheres", hyperbolic_equality),
        ("eigenvalue bound equality, spherical caps", spherical_equality),
        ("shrinker sphere mean curvature", shrinker_sphere_claim),
        ("radial chain and gradient sum suite", hypersurface_suite),
        ("strictness and hypothesis controls", strictness_controls),
        ("deterministic reports", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let result = f();
        let secs = start.elapsed().as_secs_f64();
        match &result {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                println!("FAIL {:>2} {name}: {msg} [{secs:.1}s]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
