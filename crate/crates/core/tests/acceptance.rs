//! Acceptance criteria, one test and one PASS/FAIL line each.
//!
//! The MNIST reproduction needs the real dataset and about half an hour of
//! CPU time, so it is ignored by default:
//! `TXN_DATA_DIR=/path/to/mnist cargo test --release --test acceptance -- --ignored`.

mod common;

use std::collections::{BinaryHeap, HashMap, HashSet};
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use rosynet::conv::{texture_conv_forward, Aggregation, TextureConvWeights};
use rosynet::geodesic::{extract_geodesic_patch, SampleIndex};
use rosynet::math::{Vec2, Vec3};
use rosynet::mesh::shapes;
use rosynet::nn::mnist::{mnist_experiment, MnistData, MnistVariant};
use rosynet::nn::train::TrainConfig;
use rosynet::rosy::{OrientationSolver, SurfaceSample};
use rosynet::toy::{segment_toy, ToyConfig};
use rosynet::{euler_characteristic, TriMesh};

fn report(n: usize, name: &str, pass: bool, detail: String) {
    println!(
        "criterion {n} [{name}]: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} failed: {detail}");
}

#[test]
#[ignore = "needs the MNIST files and ~30 min of single-core CPU"]
fn criterion_1_mnist() {
    let dir = std::env::var_os("TXN_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("/root/data/mnist"));
    let data = MnistData::load(&dir).expect("MNIST files");
    let start = Instant::now();
    let cfg = TrainConfig::default();
    let (base, _) = mnist_experiment(&data, MnistVariant::Baseline, &cfg, None).unwrap();
    let (rosy, _) = mnist_experiment(&data, MnistVariant::Rosy, &cfg, None).unwrap();
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    let (b, r) = (base.test_accuracy, rosy.test_accuracy);
    let pass = b >= 0.988 && r >= 0.980 && (b - r).abs() <= 0.015 && minutes <= 60.0;
    report(
        1,
        "MNIST reproduction",
        pass,
        format!(
            "baseline {b:.4} (>= 0.988), rosy {r:.4} (>= 0.980), gap {:.4} (<= 0.015), {minutes:.1} min",
            (b - r).abs()
        ),
    );
}

fn rotate_quarter(t: &Vec2) -> Vec2 {
    Vec2::new(-t.y, t.x)
}

#[test]
fn criterion_2_four_fold_invariance() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rho = 1.0;
    let (mut max_exact, mut avg_worst) = (true, 0.0f64);
    for _ in 0..1000 {
        let points = rng.random_range(5..=50);
        let ci = rng.random_range(1..=16);
        let co = rng.random_range(1..=16);
        let coords: Vec<Vec2> = (0..points)
            .map(|_| Vec2::new(rng.random_range(-rho..rho), rng.random_range(-rho..rho)))
            .collect();
        let feats = uniform(points * ci, &mut rng);
        for agg in [Aggregation::Max, Aggregation::Avg] {
            let w = TextureConvWeights::<f64>::random(ci, co, agg, &mut rng);
            let (y0, _) = texture_conv_forward(&coords, &feats, rho, &w).unwrap();
            let mut rotated = coords.clone();
            for _ in 0..3 {
                rotated = rotated.iter().map(rotate_quarter).collect();
                let (y, _) = texture_conv_forward(&rotated, &feats, rho, &w).unwrap();
                match agg {
                    Aggregation::Max => max_exact &= y == y0,
                    Aggregation::Avg => {
                        for (a, b) in y.iter().zip(&y0) {
                            avg_worst = avg_worst.max((a - b).abs() / b.abs().max(1e-12));
                        }
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "4-fold invariance",
        max_exact && avg_worst <= 1e-6 && secs <= 60.0,
        format!("max exact: {max_exact}, avg worst relative {avg_worst:.2e}, {secs:.1} s"),
    );
}

#[test]
fn criterion_3_gradients() {
    let start = Instant::now();
    let mut ops = GradCheck::default();
    for seed in 0..5 {
        ops = ops
            .merge(texture_conv_case(Aggregation::Max, seed))
            .merge(texture_conv_case(Aggregation::Avg, seed))
            .merge(rosy4m_case(seed));
    }
    for seed in 0..3 {
        ops = ops.merge(encoder_case(seed));
    }
    let net = unet_case(3);
    let secs = start.elapsed().as_secs_f64();
    report(
        3,
        "gradient suite",
        ops.max_rel <= 1e-4 && net.max_rel <= 1e-3 && ops.checked > 0 && net.checked > 0 && secs <= 300.0,
        format!(
            "operators max rel {:.2e} over {} coords ({} kinks), toy network max rel {:.2e} over {} ({} kinks), {secs:.1} s",
            ops.max_rel, ops.checked, ops.kinks, net.max_rel, net.checked, net.kinks
        ),
    );
}

/// Random samples spread over every face, frames along `x`.
fn random_samples(mesh: &TriMesh, count: usize, seed: u64) -> Vec<SurfaceSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let f = rng.random_range(0..mesh.num_faces());
            let (a, b): (f64, f64) = (rng.random_range(0.01..0.98), rng.random());
            let bary = [a, (1.0 - a) * b, (1.0 - a) * (1.0 - b)];
            SurfaceSample::with_frame(mesh, f, bary, Vec3::new(1.0, 0.37, 0.21))
        })
        .collect()
}

/// Compares a patch against analytic coordinates; returns
/// (worst coordinate error, membership mismatches).
fn compare_patch(
    mesh: &TriMesh,
    samples: &[SurfaceSample],
    index: &SampleIndex,
    center: &SurfaceSample,
    rho: f64,
    analytic: impl Fn(&SurfaceSample) -> Vec2,
) -> (f64, usize) {
    let patch = extract_geodesic_patch(mesh, samples, index, center, rho).unwrap();
    let got: HashMap<usize, Vec2> = patch.members.iter().map(|m| (m.sample, m.t)).collect();
    let mut worst = 0.0f64;
    let mut mismatches = 0;
    for (i, s) in samples.iter().enumerate() {
        let t = analytic(s);
        let inf = t.x.abs().max(t.y.abs());
        let inside = inf < rho;
        match got.get(&i) {
            Some(g) => {
                worst = worst.max((g - t).norm());
                if !inside && inf - rho > 1e-9 {
                    mismatches += 1;
                }
            }
            None => {
                if inside && rho - inf > 1e-9 {
                    mismatches += 1;
                }
            }
        }
    }
    (worst, mismatches)
}

#[test]
fn criterion_4_developable_unfolding() {
    let start = Instant::now();
    let rho = 0.2;
    let mut worst = 0.0f64;
    let mut mismatches = 0;
    let mut patches = 0;

    let plane = shapes::plane_grid(75, 75, 2.0, 2.0);
    assert!(plane.num_faces() >= 10_000);
    let samples = random_samples(&plane, 20_000, 4);
    let index = SampleIndex::new(&plane, &samples);
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let mut done = 0;
    while done < 10 {
        let c = samples[rng.random_range(0..samples.len())];
        if (c.position.x - 1.0).abs() > 0.6 || (c.position.y - 1.0).abs() > 0.6 {
            continue;
        }
        done += 1;
        let (w, m) = compare_patch(&plane, &samples, &index, &c, rho, |s| {
            let l = c.frame.local(&(s.position - c.position));
            Vec2::new(l[0], l[1])
        });
        worst = worst.max(w);
        mismatches += m;
        patches += 1;
    }

    let (r, h, n) = (0.5, 2.0, 120);
    let cyl = shapes::open_cylinder(r, h, n, 50);
    assert!(cyl.num_faces() >= 10_000);
    let samples = random_samples(&cyl, 20_000, 5);
    let index = SampleIndex::new(&cyl, &samples);
    let step = std::f64::consts::TAU / n as f64;
    let side = 2.0 * r * (step / 2.0).sin();
    let perimeter = side * n as f64;
    let corner = |k: usize| Vec3::new(r * (k as f64 * step).cos(), r * (k as f64 * step).sin(), 0.0);
    // arc length along the polygon and the facet direction at a point
    let unrolled = |p: &Vec3| {
        let phi = p.y.atan2(p.x).rem_euclid(std::f64::consts::TAU);
        let k = ((phi / step) as usize).min(n - 1);
        let e = (corner(k + 1) - corner(k)) / side;
        let s = k as f64 * side + (Vec3::new(p.x, p.y, 0.0) - corner(k)).dot(&e);
        (s, e)
    };
    let mut done = 0;
    while done < 10 {
        let c = samples[rng.random_range(0..samples.len())];
        if (c.position.z - h / 2.0).abs() > 0.6 {
            continue;
        }
        done += 1;
        let (s0, e) = unrolled(&c.position);
        let (i, j) = (c.frame.i, c.frame.j);
        let (w, m) = compare_patch(&cyl, &samples, &index, &c, rho, |q| {
            let (s, _) = unrolled(&q.position);
            let ds = (s - s0 + perimeter / 2.0).rem_euclid(perimeter) - perimeter / 2.0;
            let dz = q.position.z - c.position.z;
            Vec2::new(ds * i.dot(&e) + dz * i.z, ds * j.dot(&e) + dz * j.z)
        });
        worst = worst.max(w);
        mismatches += m;
        patches += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        4,
        "developable unfolding",
        worst <= 1e-4 * rho && mismatches == 0 && patches == 20 && secs <= 60.0,
        format!("{patches} patches, worst coordinate error {worst:.2e} (<= {:.0e}), {mismatches} membership mismatches, {secs:.1} s", 1e-4 * rho),
    );
}

#[test]
fn criterion_5_topology() {
    let start = Instant::now();
    let meshes = [
        ("icosphere", shapes::icosphere(3, 1.0)),
        ("torus", shapes::torus(1.0, 0.35, 48, 18)),
        ("genus-2", shapes::genus2_plate(3, 1.0)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, m) in &meshes {
        let chi = euler_characteristic(m);
        let solver = OrientationSolver {
            seed: 11,
            ..Default::default()
        };
        let (field, rep) = solver.solve(m).unwrap();
        let monotone = rep.levels.iter().all(|l| l.after <= l.before);
        ok &= field.index_sum() as i64 == 4 * chi && monotone;
        parts.push(format!(
            "{name}: sum {} = 4·χ {} monotone {monotone}",
            field.index_sum(),
            4 * chi
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        5,
        "topology",
        ok && secs <= 120.0,
        format!("{}; {secs:.1} s", parts.join(", ")),
    );
}

/// Side of the unit cube a point lies on, as (axis, value).
fn cube_sides(p: &Vec3) -> Vec<(usize, i8)> {
    let mut out = Vec::new();
    for a in 0..3 {
        if p[a].abs() < 1e-9 {
            out.push((a, 0));
        } else if (p[a] - 1.0).abs() < 1e-9 {
            out.push((a, 1));
        }
    }
    out
}

/// Exact-within-discretization geodesic distances on the unit cube: each
/// side is flat, so shortest paths are straight inside sides and bend only
/// at points of the cube edges, which are sampled every `1/steps`.
fn cube_geodesics(source: &Vec3, targets: &[Vec3], steps: usize) -> Vec<f64> {
    let mut points: Vec<Vec3> = Vec::new();
    let mut key: HashMap<[i64; 3], usize> = HashMap::new();
    let mut by_side: HashMap<(usize, i8), Vec<usize>> = HashMap::new();
    let mut add = |p: Vec3, points: &mut Vec<Vec3>, by_side: &mut HashMap<(usize, i8), Vec<usize>>| {
        let k = [0, 1, 2].map(|a| (p[a] * 1e7).round() as i64);
        let id = *key.entry(k).or_insert_with(|| {
            points.push(p);
            points.len() - 1
        });
        for s in cube_sides(&p) {
            let list = by_side.entry(s).or_default();
            if !list.contains(&id) {
                list.push(id);
            }
        }
        id
    };
    for axis in 0..3 {
        for u in [0.0, 1.0] {
            for v in [0.0, 1.0] {
                for k in 0..=steps {
                    let mut p = Vec3::zeros();
                    p[axis] = k as f64 / steps as f64;
                    p[(axis + 1) % 3] = u;
                    p[(axis + 2) % 3] = v;
                    add(p, &mut points, &mut by_side);
                }
            }
        }
    }
    let src = add(*source, &mut points, &mut by_side);
    let tgt: Vec<usize> = targets.iter().map(|t| add(*t, &mut points, &mut by_side)).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); points.len()];
    for list in by_side.values() {
        for &a in list {
            adj[a].extend(list.iter().copied().filter(|&b| b != a));
        }
    }
    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            o.0.total_cmp(&self.0)
        }
    }
    let mut dist = vec![f64::INFINITY; points.len()];
    dist[src] = 0.0;
    let mut heap = BinaryHeap::from([Item(0.0, src)]);
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &v in &adj[u] {
            let nd = d + (points[u] - points[v]).norm();
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Item(nd, v));
            }
        }
    }
    tgt.iter().map(|&t| dist[t]).collect()
}

#[test]
fn criterion_6_seams() {
    let start = Instant::now();
    let rho = 0.3;
    let cube = shapes::subdivided_cube(12);
    let samples = random_samples(&cube, 4000, 6);
    let index = SampleIndex::new(&cube, &samples);
    let corners: Vec<Vec3> = (0..8)
        .map(|k| Vec3::new((k & 1) as f64, ((k >> 1) & 1) as f64, ((k >> 2) & 1) as f64))
        .collect();
    let near: Vec<usize> = (0..samples.len())
        .filter(|&i| corners.iter().any(|c| (samples[i].position - c).norm() < rho))
        .collect();
    let mut duplicates = 0;
    let mut members = Vec::new();
    for &ci in near.iter().step_by(3) {
        let patch = extract_geodesic_patch(&cube, &samples, &index, &samples[ci], rho).unwrap();
        let mut seen = HashSet::new();
        for m in &patch.members {
            if !seen.insert(m.sample) {
                duplicates += 1;
            }
            members.push((ci, m.sample, m.t));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let mut worst = 0.0f64;
    let checked = 100.min(members.len());
    for _ in 0..checked {
        let (ci, si, t) = members[rng.random_range(0..members.len())];
        let d = cube_geodesics(&samples[ci].position, &[samples[si].position], 400)[0];
        worst = worst.max((t.norm() - d).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        6,
        "seam semantics",
        duplicates == 0 && checked == 100 && worst <= 1e-3 && secs <= 120.0,
        format!(
            "{} corner patches, {duplicates} duplicate coordinates, {checked} members vs shortest path: worst |‖t‖ − d| {worst:.2e}, {secs:.1} s",
            near.len().div_ceil(3)
        ),
    );
}

fn run_txn(args: &[&str], dir: &std::path::Path) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_txn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run txn");
    assert!(
        out.status.success(),
        "txn {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

#[test]
fn criterion_7_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_obj(&shapes::subdivided_cube(8), &d.join("cube.obj"));
    let mnist_dir = std::env::var_os("TXN_DATA_DIR")
        .map(PathBuf::from)
        .filter(|p| MnistData::load(p).is_ok())
        .unwrap_or_else(|| {
            let p = d.join("mnist");
            std::fs::create_dir(&p).unwrap();
            write_synthetic_mnist(&p, 200, 7);
            p
        });
    let mnist = mnist_dir.to_str().unwrap().to_string();
    let mut same = Vec::new();
    for run in 0..2 {
        let r = d.join(format!("run{run}"));
        std::fs::create_dir(&r).unwrap();
        std::fs::copy(d.join("cube.obj"), r.join("cube.obj")).unwrap();
        let field_out = run_txn(
            &[
                "--seed",
                "3",
                "--threads",
                "1",
                "field",
                "--mesh",
                "cube.obj",
                "--out",
                "field.ply",
            ],
            &r,
        );
        let patch_out = run_txn(
            &[
                "--seed",
                "3",
                "--threads",
                "1",
                "patches",
                "--mesh",
                "cube.obj",
                "--spacing",
                "0.1",
                "--n",
                "8",
                "--d",
                "0.01",
                "--out",
                "patches.bin",
            ],
            &r,
        );
        let mnist_out = run_txn(
            &[
                "--seed",
                "3",
                "--threads",
                "1",
                "mnist",
                "--variant",
                "rosy",
                "--epochs",
                "1",
                "--train-limit",
                "200",
                "--data-dir",
                &mnist,
                "--checkpoint",
                "weights.bin",
            ],
            &r,
        );
        let read = |name: &str| std::fs::read(r.join(name)).unwrap();
        same.push([
            [read("field.ply"), read("field.csv"), field_out].concat(),
            [read("patches.bin"), patch_out].concat(),
            [read("weights.bin"), mnist_out].concat(),
        ]);
    }
    let names = ["field", "patches", "mnist"];
    let diffs: Vec<&str> = (0..3).filter(|&k| same[0][k] != same[1][k]).map(|k| names[k]).collect();
    report(
        7,
        "determinism",
        diffs.is_empty(),
        if diffs.is_empty() {
            "field, patches and mnist outputs byte-identical across two runs".into()
        } else {
            format!("differing: {diffs:?}")
        },
    );
}

#[test]
fn criterion_8_toy_segmentation() {
    let start = Instant::now();
    let cfg = ToyConfig::default();
    let (rep, _) = segment_toy(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    report(
        8,
        "toy segmentation",
        rep.test_accuracy >= 0.9 && secs <= 600.0,
        format!(
            "{} samples per scene, held-out point accuracy {:.4} (>= 0.90), {secs:.0} s total ({:.0} s training)",
            cfg.samples, rep.test_accuracy, rep.train_seconds
        ),
    );
}
