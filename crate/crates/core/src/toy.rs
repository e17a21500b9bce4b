//! Synthetic three-class segmentation: a plane, an open cylinder and a
//! sphere placed apart in one scene, labeled by which shape a sample lies on.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv::Aggregation;
use crate::error::{Error, Result};
use crate::math::{rotate_about, Vec3};
use crate::mesh::{shapes, TriMesh};
use crate::nn::encoder::PatchBatch;
use crate::nn::train::{train, BatchStats, EpochStat, OptimizerKind, TrainConfig, Trainable};
use crate::nn::unet::{LevelSpec, NetworkSpec, Unet, UnetGeometry, UnetInput};
use crate::nn::{Param, Real};
use crate::rosy::{sample_surface, solve_orientation_field, SamplingMethod, SurfaceSample};
use crate::signal::{batch_patches, SignalPatch, SignalSource};

pub const CLASS_NAMES: [&str; 3] = ["plane", "cylinder", "sphere"];

/// A merged scene mesh with the class of every face.
pub struct ToyScene {
    pub mesh: TriMesh,
    pub face_labels: Vec<usize>,
}

fn place(mesh: &TriMesh, axis: &Vec3, angle: f64, offset: Vec3) -> Vec<Vec3> {
    mesh.positions()
        .iter()
        .map(|p| rotate_about(p, axis, angle) + offset)
        .collect()
}

/// Builds a scene with randomized sizes, poses and spacing between shapes.
pub fn toy_scene(seed: u64) -> Result<ToyScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = rng.random_range(1.0..1.3);
    let plane = shapes::plane_grid(36, 36, side, side);
    let r_cyl = rng.random_range(0.18..0.28);
    let h_cyl = rng.random_range(0.5..0.8);
    let cylinder = shapes::open_cylinder(r_cyl, h_cyl, 40, 16);
    let r_sph = rng.random_range(0.28..0.4);
    let sphere = shapes::icosphere(4, r_sph);

    let tilt = |rng: &mut ChaCha8Rng| {
        let a = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        (a.normalize(), rng.random_range(0.0..std::f64::consts::PI))
    };
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    let mut face_labels = Vec::new();
    let parts = [
        (&plane, Vec3::new(-side / 2.0, -side / 2.0, 0.0)),
        (&cylinder, Vec3::new(side / 2.0 + 1.0, 0.0, 0.0)),
        (&sphere, Vec3::new(0.0, side / 2.0 + 1.0, 0.3)),
    ];
    for (label, (m, offset)) in parts.into_iter().enumerate() {
        let (axis, angle) = tilt(&mut rng);
        let base = positions.len() as u32;
        let placed = if label == 0 {
            // plane: centered first so the tilt turns it in place
            let shifted: Vec<Vec3> = m.positions().iter().map(|p| p + offset).collect();
            shifted.iter().map(|p| rotate_about(p, &axis, angle)).collect()
        } else {
            place(m, &axis, angle, offset)
        };
        positions.extend(placed);
        faces.extend(m.faces().iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
        face_labels.extend(std::iter::repeat_n(label, m.num_faces()));
    }
    Ok(ToyScene {
        mesh: TriMesh::new(positions, faces)?,
        face_labels,
    })
}

/// Turns a normal patch into one rotation-invariant channel: how far each
/// cell's normal tilts from the center normal, scaled by `gain`.
pub fn tilt_signal(normals: &SignalPatch, gain: f32) -> SignalPatch {
    let n0 = normals.frame.n;
    let mut out = SignalPatch::empty(normals.n, 1, normals.center, normals.frame);
    for cell in 0..normals.n * normals.n {
        if !normals.mask[cell] {
            continue;
        }
        let v = &normals.values[cell * 3..cell * 3 + 3];
        let dot = v[0] as f64 * n0.x + v[1] as f64 * n0.y + v[2] as f64 * n0.z;
        out.mask[cell] = true;
        out.values[cell] = (1.0 - dot) as f32 * gain;
    }
    out
}

/// Settings of the toy experiment.
#[derive(Debug, Clone)]
pub struct ToyConfig {
    pub samples: usize,
    pub train_scenes: usize,
    pub test_scenes: usize,
    pub patch_n: usize,
    pub patch_d: f64,
    pub gain: f32,
    pub spec: NetworkSpec,
    pub train: TrainConfig,
    pub threads: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            samples: 2000,
            train_scenes: 4,
            test_scenes: 1,
            patch_n: 8,
            patch_d: 0.012,
            gain: 50.0,
            spec: NetworkSpec {
                levels: vec![
                    LevelSpec {
                        samples: 0,
                        rho: 0.1,
                        width: 16,
                    },
                    LevelSpec {
                        samples: 0,
                        rho: 0.2,
                        width: 32,
                    },
                    LevelSpec {
                        samples: 0,
                        rho: 0.4,
                        width: 64,
                    },
                ],
                encoder_width: 16,
                head_width: 32,
                classes: 3,
                aggregation: Aggregation::Max,
            },
            train: TrainConfig {
                optimizer: OptimizerKind::Adam,
                lr: 3e-3,
                batch: 1,
                epochs: 25,
                seed: 0,
            },
            threads: 1,
            seed: 0,
        }
    }
}

/// A scene ready for the network: hierarchy, patches and labels.
pub struct PreparedScene {
    pub scene: ToyScene,
    pub samples: Vec<SurfaceSample>,
    pub geometry: UnetGeometry,
    pub patches: Vec<SignalPatch>,
    pub labels: Vec<usize>,
}

impl PreparedScene {
    pub fn batch<T: Real>(&self) -> Result<PatchBatch<T>> {
        let refs: Vec<&SignalPatch> = self.patches.iter().collect();
        PatchBatch::from_patches(&refs)
    }
}

/// Samples, resamples and builds the hierarchy for the scene of `seed`.
pub fn prepare_scene(seed: u64, cfg: &ToyConfig) -> Result<PreparedScene> {
    let scene = toy_scene(seed)?;
    let mesh = &scene.mesh;
    if mesh.num_vertices() < cfg.samples {
        return Err(Error::InvalidArgument(format!(
            "scene has {} vertices, fewer than {} samples",
            mesh.num_vertices(),
            cfg.samples
        )));
    }
    let field = solve_orientation_field(mesh, 8, 10, seed)?;
    let samples = sample_surface(
        mesh,
        &field,
        0.05,
        SamplingMethod::Fps {
            count: Some(cfg.samples),
        },
        seed,
    )?;
    let normals = batch_patches(
        mesh,
        &samples,
        cfg.patch_n,
        cfg.patch_d,
        &SignalSource::Normal,
        cfg.threads,
    )?;
    let patches = normals.iter().map(|p| tilt_signal(p, cfg.gain)).collect();
    let labels = samples.iter().map(|s| scene.face_labels[s.face]).collect();
    let geometry = UnetGeometry::build(mesh, &samples, &cfg.spec, 0)?;
    Ok(PreparedScene {
        scene,
        samples,
        geometry,
        patches,
        labels,
    })
}

struct SceneTask<'a, T: Real> {
    net: &'a mut Unet<T>,
    scenes: &'a [PreparedScene],
    inputs: Vec<UnetInput<T>>,
}

impl<T: Real> Trainable<T> for SceneTask<'_, T> {
    fn len(&self) -> usize {
        self.scenes.len()
    }

    fn params(&mut self) -> Vec<&mut Param<T>> {
        self.net.params()
    }

    fn accumulate(&mut self, batch: &[usize]) -> Result<BatchStats> {
        let mut stats = BatchStats::default();
        for &i in batch {
            let s = &self.scenes[i];
            let (loss, correct) = self.net.loss_and_backward(&s.geometry, &self.inputs[i], &s.labels)?;
            stats.loss += loss * s.labels.len() as f64;
            stats.correct += correct;
            stats.count += s.labels.len();
        }
        stats.loss /= stats.count.max(1) as f64;
        Ok(stats)
    }
}

/// Point accuracy of `net` on a prepared scene.
pub fn scene_accuracy<T: Real>(net: &mut Unet<T>, scene: &PreparedScene) -> Result<f64> {
    let logits = net.forward_patches(&scene.geometry, &scene.batch()?)?;
    let pred = crate::nn::layers::argmax_rows(logits.data(), net.spec.classes);
    let hits = pred.iter().zip(&scene.labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / scene.labels.len() as f64)
}

#[derive(Debug, Clone)]
pub struct ToyReport {
    pub log: Vec<EpochStat>,
    pub test_accuracy: f64,
    pub prepare_seconds: f64,
    pub train_seconds: f64,
}

/// Trains on `train_scenes` scenes and reports accuracy on held-out scenes.
pub fn segment_toy(cfg: &ToyConfig) -> Result<(ToyReport, Unet<f32>)> {
    let t0 = Instant::now();
    let base = cfg.seed.wrapping_mul(1000);
    let prep = |k: usize| prepare_scene(base + k as u64, cfg);
    let train_set = (0..cfg.train_scenes).map(prep).collect::<Result<Vec<_>>>()?;
    let test_set = (cfg.train_scenes..cfg.train_scenes + cfg.test_scenes)
        .map(prep)
        .collect::<Result<Vec<_>>>()?;
    let prepare_seconds = t0.elapsed().as_secs_f64();
    log::info!(
        "prepared {} scenes in {prepare_seconds:.1} s",
        train_set.len() + test_set.len()
    );

    let t1 = Instant::now();
    let mut net = Unet::<f32>::new(cfg.spec.clone(), 1, true, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let inputs = train_set
        .iter()
        .map(|s| s.batch().map(UnetInput::Patches))
        .collect::<Result<Vec<_>>>()?;
    let log = {
        let mut task = SceneTask {
            net: &mut net,
            scenes: &train_set,
            inputs,
        };
        train(&mut task, &cfg.train)?
    };
    let mut correct = 0.0;
    let mut total = 0.0;
    for s in &test_set {
        correct += scene_accuracy(&mut net, s)? * s.labels.len() as f64;
        total += s.labels.len() as f64;
    }
    Ok((
        ToyReport {
            log,
            test_accuracy: if total > 0.0 { correct / total } else { 0.0 },
            prepare_seconds,
            train_seconds: t1.elapsed().as_secs_f64(),
        },
        net,
    ))
}
