//! End-to-end acceptance checks on analytic shapes.
//!
//! Runs as a plain binary so every line prints whether or not it passes.
//! Exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use funcmark::attack::AttackSpec;
use funcmark::embed::{bake_watermarked, deform, deform_jacobian, invert_deform, NewtonConfig, WatermarkedField};
use funcmark::field::{finite_difference_gradient, Bbox, GridField, PerturbedField, Primitive, ScalarField};
use funcmark::mesh::TriangleMesh;
use funcmark::metrics::{chamfer, p2s};
use funcmark::partition::PartitionLayout;
use funcmark::surface::{dual_contouring, marching_cubes, sample_surface, DEFAULT_SAMPLE_TOLERANCE};
use funcmark::verify::{align, decode, detect, AlignConfig, SimilarityTransform, Verdict, DEFAULT_ALPHA};
use funcmark::{message, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SHAPES: [&str; 3] = ["sphere", "torus", "blob"];
const N_S: usize = 32;
const DELTA: f64 = 0.001;
const MESSAGE: &str = "b5a3";

fn layout(delta: f64) -> PartitionLayout {
    PartitionLayout::new(N_S, message::from_hex(MESSAGE).unwrap(), delta).unwrap()
}

fn shape(name: &str) -> Primitive {
    Primitive::preset(name).unwrap()
}

type Cache<T> = Mutex<HashMap<String, Arc<OnceLock<Arc<T>>>>>;

fn cached<T>(cache: &'static OnceLock<Cache<T>>, key: String, make: impl FnOnce() -> T) -> Arc<T> {
    let cell = cache
        .get_or_init(Default::default)
        .lock()
        .unwrap()
        .entry(key)
        .or_default()
        .clone();
    cell.get_or_init(|| Arc::new(make())).clone()
}

/// Watermarked field baked at 128³.
fn baked(name: &str, delta: f64) -> Arc<GridField> {
    static C: OnceLock<Cache<GridField>> = OnceLock::new();
    cached(&C, format!("{name}/{delta}"), || {
        let wf = WatermarkedField::new(shape(name), layout(delta), NewtonConfig::default()).unwrap();
        bake_watermarked(&wf, [128; 3], Bbox::standard()).unwrap().0
    })
}

fn wm_mesh(name: &str, res: usize) -> Arc<TriangleMesh> {
    static C: OnceLock<Cache<TriangleMesh>> = OnceLock::new();
    cached(&C, format!("{name}/{res}"), || {
        marching_cubes(baked(name, DELTA).as_ref(), res, &Bbox::standard()).unwrap()
    })
}

fn accuracy(mesh: &TriangleMesh, name: &str) -> f64 {
    decode(&mesh.vertices, &shape(name), &layout(DELTA)).unwrap().bit_accuracy
}

/// Points within `band` of the zero set of `name`.
fn near_surface(name: &str, n: usize, band: f64, seed: u64) -> Vec<Vec3> {
    let f = shape(name);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_surface(&f, n, seed, DEFAULT_SAMPLE_TOLERANCE)
        .unwrap()
        .points
        .into_iter()
        .map(|y| {
            let g = f.gradient(&y).unwrap().normalize();
            y + g * rng.random_range(-band..band)
        })
        .collect()
}

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn noiseless() -> Outcome {
    let l = layout(DELTA);
    let mut parts = Vec::new();
    let mut pass = true;
    for name in SHAPES {
        let f = shape(name);
        let ys = sample_surface(&f, 20_000, 11, DEFAULT_SAMPLE_TOLERANCE).unwrap().points;
        let xs: Vec<Vec3> = ys
            .iter()
            .filter(|y| l.window(y).unwrap_or(0.0) > 0.1 * DELTA)
            .map(|y| deform(y, &f, &l).unwrap())
            .collect();
        let d = decode(&xs, &f, &l).unwrap();
        pass &= d.bit_accuracy == 1.0;
        parts.push(format!("{name} {:.4} ({} partitions)", d.bit_accuracy, d.decodable));
    }
    Outcome { pass, detail: parts.join(", ") }
}

fn end_to_end() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in SHAPES {
        let hi = accuracy(&wm_mesh(name, 256), name);
        let lo = accuracy(&wm_mesh(name, 64), name);
        pass &= hi >= 0.93 && lo < hi;
        parts.push(format!("{name} mc256 {hi:.4} mc64 {lo:.4}"));
    }
    Outcome { pass, detail: parts.join(", ") }
}

/// Trial `t` draws 50 points from shape `t mod 3`.
fn detection_rejects(delta: f64) -> (usize, [usize; 3]) {
    let l = layout(delta);
    let mut per_shape = [0; 3];
    for t in 0..100u64 {
        let k = t as usize % 3;
        let g = baked(SHAPES[k], delta);
        let pts = sample_surface(g.as_ref(), 50, 100 + t, DEFAULT_SAMPLE_TOLERANCE).unwrap().points;
        let r = detect(&pts, &shape(SHAPES[k]), &l, DEFAULT_ALPHA).unwrap();
        per_shape[k] += (r.verdict == Verdict::Reject) as usize;
    }
    (per_shape.iter().sum(), per_shape)
}

fn detection() -> Outcome {
    let (strong, s_shape) = detection_rejects(DELTA);
    let (weak, w_shape) = detection_rejects(DELTA / 2.0);
    let rate = weak as f64 / 100.0;
    Outcome {
        pass: strong >= 95 && (0.45..=0.85).contains(&rate),
        detail: format!(
            "delta 0.001: {strong}/100 {s_shape:?}, delta 0.0005: {weak}/100 {w_shape:?} (sphere, torus, blob)"
        ),
    }
}

fn calibration() -> Outcome {
    let mut rejects = 0;
    for t in 0..1000u64 {
        let base = shape(SHAPES[t as usize % 3]);
        let l = PartitionLayout::new(N_S, message::random(16, 7000 + t), DELTA).unwrap();
        let null = PerturbedField::new(base.clone(), DELTA, 0.05, 8, 9000 + t).unwrap();
        let pts = sample_surface(&null, 50, t, DEFAULT_SAMPLE_TOLERANCE).unwrap().points;
        let r = detect(&pts, &base, &l, DEFAULT_ALPHA).unwrap();
        rejects += (r.verdict == Verdict::Reject) as usize;
    }
    Outcome {
        pass: rejects <= 5,
        detail: format!("{rejects}/1000 rejections"),
    }
}

fn newton_round_trip() -> Outcome {
    let l = layout(DELTA);
    let cfg = NewtonConfig::default();
    let mut sum = 0.0;
    let mut n = 0;
    for (i, name) in SHAPES.iter().enumerate() {
        let f = shape(name);
        let count = if i == 0 { 3334 } else { 3333 };
        for y in near_surface(name, count, 0.02, 21 + i as u64) {
            let x = deform(&y, &f, &l).unwrap();
            let back = invert_deform(&x, &f, &l, &cfg).unwrap();
            sum += (back - y).norm_squared();
            n += 1;
        }
    }
    let mse = sum / n as f64;
    Outcome {
        pass: n == 10_000 && mse <= 1e-12,
        detail: format!("MSE {mse:.3e} over {n} points"),
    }
}

fn gradients() -> Outcome {
    let l = layout(DELTA);
    let h = 1e-5;
    let mut worst_g: f64 = 0.0;
    let mut worst_j: f64 = 0.0;
    for (i, name) in SHAPES.iter().enumerate() {
        let f = shape(name);
        let wf = WatermarkedField::new(f.clone(), l.clone(), NewtonConfig::default()).unwrap();
        let count = if i == 0 { 34 } else { 33 };
        for y in near_surface(name, count, 0.01, 31 + i as u64) {
            let x = deform(&y, &f, &l).unwrap();
            let g = wf.gradient(&x).unwrap();
            let fd = finite_difference_gradient(&wf, &x, h).unwrap();
            worst_g = worst_g.max((g - fd).norm() / g.norm());

            let j = deform_jacobian(&y, &f, &l).unwrap();
            let mut fdj = funcmark::Mat3::zeros();
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = h;
                let col = (deform(&(y + e), &f, &l).unwrap() - deform(&(y - e), &f, &l).unwrap()) / (2.0 * h);
                fdj.set_column(k, &col);
            }
            worst_j = worst_j.max((j - fdj).norm() / j.norm());
        }
    }
    Outcome {
        pass: worst_g <= 1e-3 && worst_j <= 1e-3,
        detail: format!("max relative error gradient {worst_g:.2e}, jacobian {worst_j:.2e}"),
    }
}

fn robustness() -> Outcome {
    let m = wm_mesh("sphere", 256);
    let base = accuracy(&m, "sphere");
    let run = |spec: &str| {
        let spec: AttackSpec = spec.parse().unwrap();
        accuracy(&spec.apply(&m, 1).unwrap(), "sphere")
    };
    let remesh_target = m.mean_edge_length();
    let checks: [(String, f64, bool); 7] = {
        let g1 = run("gaussian:0.001");
        let q16 = run("quantize:16");
        let s1 = run("smooth:1");
        let simp = run("simplify:0.3");
        let rem = run(&format!("remesh:{remesh_target}"));
        let g10 = run("gaussian:0.01");
        let q8 = run("quantize:8");
        [
            ("gaussian 0.001".into(), g1, base - g1 <= 0.01),
            ("quantize 16".into(), q16, q16 >= 0.90),
            ("smooth 1".into(), s1, s1 >= 0.90),
            ("simplify 0.3".into(), simp, simp >= 0.90),
            ("remesh".into(), rem, rem >= 0.88),
            ("gaussian 0.01".into(), g10, g10 <= 0.75),
            ("quantize 8".into(), q8, q8 <= 0.75),
        ]
    };
    let detail = std::iter::once(format!("clean {base:.4}"))
        .chain(checks.iter().map(|(n, a, ok)| format!("{n} {a:.4}{}", if *ok { "" } else { " [x]" })))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome {
        pass: checks.iter().all(|c| c.2),
        detail,
    }
}

fn alignment() -> Outcome {
    let m = wm_mesh("blob", 256);
    let g = baked("blob", DELTA);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut good = 0;
    let mut accs = Vec::new();
    for trial in 0..10 {
        let axis = loop {
            let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if v.norm() > 1e-3 && v.norm() <= 1.0 {
                break v;
            }
        };
        let angle = rng.random_range(0.0..=PI);
        let scale = rng.random_range(0.8f64.ln()..=1.25f64.ln()).exp();
        let dir = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let t = dir.normalize() * rng.random_range(0.0..=0.1);
        let attack = SimilarityTransform::new(scale, angle, &axis, t).unwrap();
        let moved = attack.apply_mesh(&m);
        let acc = match align(&moved, g.as_ref(), &AlignConfig { seed: trial, ..AlignConfig::default() }) {
            Ok(a) => accuracy(&a.mesh, "blob"),
            Err(_) => 0.0,
        };
        good += (acc >= 0.80) as usize;
        accs.push(format!("{acc:.3}"));
    }
    Outcome {
        pass: good >= 9,
        detail: format!("{good}/10 trials >= 0.80 [{}]", accs.join(" ")),
    }
}

fn geometry_budget() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in SHAPES {
        let original = marching_cubes(&shape(name), 256, &Bbox::standard()).unwrap();
        let cd = chamfer(&original, &wm_mesh(name, 256), 30_000, 3).unwrap();
        let pts = sample_surface(baked(name, DELTA).as_ref(), 10_000, 4, DEFAULT_SAMPLE_TOLERANCE)
            .unwrap()
            .points;
        let d = p2s(&pts, &original).unwrap();
        pass &= cd <= 0.005 && d <= 3.0 * DELTA;
        parts.push(format!("{name} chamfer {cd:.2e} p2s {d:.2e}"));
    }
    Outcome { pass, detail: parts.join(", ") }
}

fn isosurfacers() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in SHAPES {
        let mc = accuracy(&wm_mesh(name, 256), name);
        let dc = accuracy(&dual_contouring(baked(name, DELTA).as_ref(), 256, &Bbox::standard()).unwrap(), name);
        pass &= (mc - dc).abs() <= 0.06;
        parts.push(format!("{name} mc {mc:.4} dc {dc:.4}"));
    }
    Outcome { pass, detail: parts.join(", ") }
}

fn z_curve() -> Outcome {
    let g = baked("sphere", DELTA);
    let f = shape("sphere");
    let l = layout(DELTA);
    let sizes = [10usize, 50, 100, 1000, 5000];
    let means: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            (0..20u64)
                .map(|t| {
                    let pts = sample_surface(g.as_ref(), n, 500 + t, DEFAULT_SAMPLE_TOLERANCE).unwrap().points;
                    detect(&pts, &f, &l, DEFAULT_ALPHA).unwrap().z_score
                })
                .sum::<f64>()
                / 20.0
        })
        .collect();
    Outcome {
        pass: means.windows(2).all(|w| w[1] > w[0]),
        detail: sizes
            .iter()
            .zip(&means)
            .map(|(n, z)| format!("N={n} z={z:.2}"))
            .collect::<Vec<_>>()
            .join(", "),
    }
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("noiseless channel", noiseless),
        ("end-to-end accuracy", end_to_end),
        ("detection", detection),
        ("null calibration", calibration),
        ("newton round trip", newton_round_trip),
        ("analytic gradients", gradients),
        ("robustness", robustness),
        ("alignment", alignment),
        ("geometry budget", geometry_budget),
        ("isosurfacer agreement", isosurfacers),
        ("z curve", z_curve),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        failed += !out.pass as usize;
        println!(
            "criterion {:>2} {} {name}: {} ({:.1}s)",
            i + 1,
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
