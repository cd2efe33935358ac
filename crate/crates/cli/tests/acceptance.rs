//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use gaze3d::coordmap::{decode_pixel, encode_point, ScaleSpec};
use gaze3d::geometry::{mesh_bbox, ray_cast, shapes, Camera, Point3, RigidTransform, SurfaceMesh};
use gaze3d::metrics::{cc, region_fractions, sim, wss};
use gaze3d::projection::{
    default_depth_break, reconstruct_cloud, triangulate_coordmap, FixationCloud3D, Provenance,
};
use gaze3d::rasterizer::{make_rotation_schedule, rasterize_coordmap, FrameSpec, Motion};
use gaze3d::saliency::{gaussian_blur3d, VoxelGrid};
use gaze3d_cli::commands;
use gaze3d_cli::config::PipelineConfig;
use gaze3d_cli::manifest::StudyManifest;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances and budgets.
const QUANT_POINTS: usize = 10_000;
const QUANT_BUDGET: Duration = Duration::from_secs(1);
/// Float round-off allowed on top of the half-step bound, in ulps of the
/// largest magnitude involved.
const QUANT_ULPS: f64 = 4.0;
const LUT_FACES: usize = 5_000;
const LUT_SIZE: u32 = 512;
const LUT_SAMPLES: usize = 1_000;
const LUT_REL_TOL: f64 = 1e-3;
const LUT_BUDGET: Duration = Duration::from_secs(30);
const WSS_CLOUDS: usize = 100;
const WSS_REL_TOL: f64 = 1e-9;
const BLUR_N: usize = 32;
const BLUR_SIGMAS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
const BLUR_MASS_TOL: f64 = 1e-9;
const BLUR_MIRROR_TOL: f64 = 1e-12;
const METRIC_SELF_TOL: f64 = 1e-9;
const METRIC_HAND_TOL: f64 = 1e-12;
const DEMO_BUDGET: Duration = Duration::from_secs(60);
const SPHERE_RADIUS_TOL: f64 = 2e-3;
const PLANE_AREA_REL_TOL: f64 = 0.01;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn front_camera(distance: f64, fov: f64, size: u32) -> Camera {
    Camera::new(
        Point3::new(0.0, -distance, 0.0),
        Point3::ORIGIN,
        Point3::new(0.0, 0.0, 1.0),
        fov,
        size,
        size,
    )
    .unwrap()
}

fn quantization_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let min: [f64; 3] = std::array::from_fn(|_| rng.random_range(-100.0..100.0));
    let range: [f64; 3] = std::array::from_fn(|_| 10f64.powf(rng.random_range(-3.0..3.0)));
    let scale = ScaleSpec::new(min, range).map_err(|e| e.to_string())?;
    let points: Vec<Point3> = (0..QUANT_POINTS)
        .map(|_| Point3::from_array(std::array::from_fn(|i| min[i] + range[i] * rng.random::<f64>())))
        .collect();

    let start = Instant::now();
    let decoded: Vec<Point3> = points
        .iter()
        .map(|&p| encode_point(p, &scale).map(|rgb| decode_pixel(rgb, &scale)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let mut worst = 0.0f64;
    for (p, q) in points.iter().zip(&decoded) {
        for i in 0..3 {
            let half_step = range[i] / 131070.0;
            let slack = QUANT_ULPS * f64::EPSILON * (min[i].abs() + range[i]);
            let err = (q[i] - p[i]).abs();
            check(err <= half_step + slack, format!("axis {i} error {err:e} > {half_step:e}"))?;
            worst = worst.max(err / half_step);
        }
    }
    check(elapsed < QUANT_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("worst error {worst:.4} half-steps, {elapsed:.2?}"))
}

fn lut_matches_rays(name: &str, mesh: &SurfaceMesh, frame: &FrameSpec, seed: u64) -> Result<f64, String> {
    check(mesh.faces().len() == LUT_FACES, format!("{name} has {} faces", mesh.faces().len()))?;
    let camera = front_camera(4.0, 40.0, LUT_SIZE);
    let bbox = mesh_bbox(mesh).map_err(|e| e.to_string())?;
    let scale = ScaleSpec::from_bbox(&bbox, 0.01).map_err(|e| e.to_string())?;
    let map = rasterize_coordmap(mesh, &camera, frame, &scale).map_err(|e| e.to_string())?;
    let posed = mesh.transformed(&frame.model_transform);
    let tol = LUT_REL_TOL * bbox.diagonal();

    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for r in 0..LUT_SIZE {
        for c in 0..LUT_SIZE {
            if map.is_foreground(c, r) { fg.push((c, r)) } else { bg.push((c, r)) }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..LUT_SAMPLES {
        let (c, r) = fg[rng.random_range(0..fg.len())];
        let hit = ray_cast(&posed, &camera, c as f64 + 0.5, r as f64 + 0.5)
            .ok_or_else(|| format!("{name}: ray missed foreground pixel ({c}, {r})"))?;
        let p = frame.model_transform.apply(map.point_at(c, r).unwrap());
        let d = p.distance(hit.point);
        check(d <= tol, format!("{name}: pixel ({c}, {r}) off by {d:e}"))?;
        worst = worst.max(d / bbox.diagonal());
    }
    for _ in 0..LUT_SAMPLES {
        let (c, r) = bg[rng.random_range(0..bg.len())];
        check(
            ray_cast(&posed, &camera, c as f64 + 0.5, r as f64 + 0.5).is_none(),
            format!("{name}: ray hit background pixel ({c}, {r})"),
        )?;
    }
    Ok(worst)
}

fn lut_vs_ray() -> Outcome {
    let start = Instant::now();
    let frames = make_rotation_schedule(50.0, 61, Motion::Sinusoidal);
    let sphere = shapes::uv_sphere(Point3::ORIGIN, 1.0, 51, 50);
    let blob = shapes::statue_blob(51, 50);
    let a = lut_matches_rays("sphere", &sphere, &frames[12], 2)?;
    let b = lut_matches_rays("blob", &blob, &frames[45], 3)?;
    let elapsed = start.elapsed();
    check(elapsed < LUT_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!("worst deviation {:.2e} of bbox diagonal, {elapsed:.2?}", a.max(b)))
}

fn wss_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..WSS_CLOUDS {
        let n = rng.random_range(1..500);
        let spread = 10f64.powf(rng.random_range(-2.0..2.0));
        let offset: [f64; 3] = std::array::from_fn(|_| rng.random_range(-50.0..50.0));
        let mut cloud = FixationCloud3D::new();
        for _ in 0..n {
            let p = Point3::from_array(std::array::from_fn(|i| offset[i] + spread * rng.random_range(-1.0..1.0)));
            let prov = Provenance { observer_id: String::new(), timestamp: 0.0, frame_index: 0 };
            cloud.push(p, rng.random_range(0.1..3.0), prov).map_err(|e| e.to_string())?;
        }
        let r = wss(&cloud).map_err(|e| e.to_string())?;

        // Independent two-pass oracle for the per-axis weighted variances.
        let (pts, ws) = (cloud.points(), cloud.weights());
        let total: f64 = ws.iter().sum();
        let var_sum: f64 = (0..3)
            .map(|i| {
                let mean = pts.iter().zip(ws).map(|(p, w)| w * p[i]).sum::<f64>() / total;
                pts.iter().zip(ws).map(|(p, w)| w * (p[i] - mean).powi(2)).sum::<f64>() / total
            })
            .sum();
        let scale = var_sum.abs().max(f64::MIN_POSITIVE);
        let rel_lib = (r.mean_wss - (r.var_x + r.var_y + r.var_z)).abs() / scale;
        let rel_oracle = (r.mean_wss - var_sum).abs() / scale;
        check(rel_lib <= WSS_REL_TOL && rel_oracle <= WSS_REL_TOL, format!("relative gap {rel_lib:e} / {rel_oracle:e}"))?;
        worst = worst.max(rel_lib).max(rel_oracle);
    }
    Ok(format!("{WSS_CLOUDS} clouds, worst relative gap {worst:.1e}"))
}

fn mirror(g: &VoxelGrid, axis: usize) -> VoxelGrid {
    let d = g.dims();
    let mut values = vec![0.0; g.len()];
    for z in 0..d[2] {
        for y in 0..d[1] {
            for x in 0..d[0] {
                let mut src = [x, y, z];
                src[axis] = d[axis] - 1 - src[axis];
                values[g.index([x, y, z])] = g.get(src);
            }
        }
    }
    VoxelGrid::from_values(d, g.origin(), g.voxel_size(), values).unwrap()
}

fn blur_mass_and_symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_mass, mut worst_mirror) = (0.0f64, 0.0f64);
    for sigma in BLUR_SIGMAS {
        let radius = (3.0 * sigma).ceil() as usize;
        let mut inputs = Vec::new();
        let mut delta = VoxelGrid::zeros([BLUR_N; 3], Point3::ORIGIN, 1.0).unwrap();
        delta.set([BLUR_N / 2; 3], 1.0).unwrap();
        inputs.push(delta);
        for _ in 0..2 {
            // Random mass confined to voxels at least `radius` from every face.
            let mut g = VoxelGrid::zeros([BLUR_N; 3], Point3::ORIGIN, 1.0).unwrap();
            let inner = radius..BLUR_N - radius;
            for _ in 0..200 {
                let ijk = std::array::from_fn(|_| rng.random_range(inner.clone()));
                g.set(ijk, g.get(ijk) + rng.random::<f64>()).unwrap();
            }
            inputs.push(g);
        }
        for g in &inputs {
            let out = gaussian_blur3d(g, sigma).map_err(|e| e.to_string())?;
            let rel = (out.sum() - g.sum()).abs() / g.sum();
            check(rel <= BLUR_MASS_TOL, format!("sigma {sigma}: mass changed by {rel:e}"))?;
            worst_mass = worst_mass.max(rel);
            for axis in 0..3 {
                let a = mirror(&out, axis);
                let b = gaussian_blur3d(&mirror(g, axis), sigma).map_err(|e| e.to_string())?;
                let diff = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                check(diff <= BLUR_MIRROR_TOL, format!("sigma {sigma}: mirror axis {axis} differs by {diff:e}"))?;
                worst_mirror = worst_mirror.max(diff);
            }
        }
        // Random grids over the whole volume exercise the border path.
        let full: Vec<f64> = (0..BLUR_N.pow(3)).map(|_| rng.random()).collect();
        let g = VoxelGrid::from_values([BLUR_N; 3], Point3::ORIGIN, 1.0, full).unwrap();
        let out = gaussian_blur3d(&g, sigma).map_err(|e| e.to_string())?;
        check(out.sum() <= g.sum() * (1.0 + BLUR_MASS_TOL), "border blur created mass")?;
        for axis in 0..3 {
            let a = mirror(&out, axis);
            let b = gaussian_blur3d(&mirror(&g, axis), sigma).map_err(|e| e.to_string())?;
            let diff = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            check(diff <= BLUR_MIRROR_TOL, format!("sigma {sigma}: full-grid mirror differs by {diff:e}"))?;
            worst_mirror = worst_mirror.max(diff);
        }
    }
    Ok(format!("worst mass drift {worst_mass:.1e}, worst mirror gap {worst_mirror:.1e}"))
}

fn line(values: &[f64]) -> VoxelGrid {
    VoxelGrid::from_values([values.len(), 1, 1], Point3::ORIGIN, 1.0, values.to_vec()).unwrap()
}

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = VoxelGrid::from_values([8; 3], Point3::ORIGIN, 1.0, (0..512).map(|_| rng.random()).collect()).unwrap();
    let err = |e: gaze3d::Error| e.to_string();
    let cc_aa = cc(&a, &a).map_err(err)?;
    let sim_aa = sim(&a, &a).map_err(err)?;
    check((cc_aa - 1.0).abs() <= METRIC_SELF_TOL, format!("cc(a,a) = {cc_aa}"))?;
    check((sim_aa - 1.0).abs() <= METRIC_SELF_TOL, format!("sim(a,a) = {sim_aa}"))?;

    let mut left = vec![0.0; 512];
    let mut right = vec![0.0; 512];
    for i in 0..512 {
        if i % 2 == 0 { left[i] = rng.random_range(0.1..1.0) } else { right[i] = rng.random_range(0.1..1.0) }
    }
    let disjoint = sim(&line(&left), &line(&right)).map_err(err)?;
    check(disjoint == 0.0, format!("disjoint sim = {disjoint}"))?;

    let c = cc(&line(&[1.0, 0.0]), &line(&[0.0, 1.0])).map_err(err)?;
    check((c + 1.0).abs() <= METRIC_HAND_TOL, format!("cc([1,0],[0,1]) = {c}"))?;
    let s = sim(&line(&[0.7, 0.3]), &line(&[0.3, 0.7])).map_err(err)?;
    check((s - 0.6).abs() <= METRIC_HAND_TOL, format!("sim([0.7,0.3],[0.3,0.7]) = {s}"))?;
    Ok(format!("cc(a,a)={cc_aa}, sim(a,a)={sim_aa}, cc={c}, sim={s}"))
}

fn region_oracle() -> Outcome {
    let mesh = shapes::statue_blob(51, 50);
    let labels = mesh.region_labels().unwrap();
    let by_label = |l: i32| -> Vec<Point3> {
        mesh.vertices().iter().zip(labels).filter(|(_, &x)| x == l).map(|(&v, _)| v).collect()
    };
    let head = by_label(shapes::HEAD_LABEL);
    let body = by_label(shapes::BODY_LABEL);
    let names = BTreeMap::from([(shapes::BODY_LABEL, "body".to_string()), (shapes::HEAD_LABEL, "head".to_string())]);
    let max_dist = 0.05 * mesh_bbox(&mesh).unwrap().diagonal();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut pick = |pool: &[Point3], n: usize| -> Vec<Point3> {
        (0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    };

    let only_head = FixationCloud3D::from_points(pick(&head, 400));
    let r = region_fractions(&only_head, &mesh, max_dist, &names).map_err(|e| e.to_string())?;
    check(r.fractions["head"] == 1.0, format!("head-only fraction {}", r.fractions["head"]))?;

    let mut mixed = pick(&head, 300);
    mixed.extend(pick(&body, 100));
    let r = region_fractions(&FixationCloud3D::from_points(mixed), &mesh, max_dist, &names).map_err(|e| e.to_string())?;
    check(r.fractions["head"] == 0.75, format!("75/25 head fraction {}", r.fractions["head"]))?;
    check(r.unassigned_count == 0, "fixations left unassigned")?;
    Ok(format!("head-only 1.0, mixed {}", r.fractions["head"]))
}

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

fn copy_tree(from: &Path, to: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(to)?;
    for entry in std::fs::read_dir(from)? {
        let entry = entry?;
        let name = entry.file_name();
        if name == "out" {
            continue;
        }
        if entry.file_type()?.is_dir() {
            copy_tree(&entry.path(), &to.join(&name))?;
        } else {
            std::fs::copy(entry.path(), to.join(&name))?;
        }
    }
    Ok(())
}

fn tree_bytes(root: &Path) -> std::io::Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p)?);
            }
        }
    }
    Ok(out)
}

fn demo_determinism() -> Outcome {
    let start = Instant::now();
    let mut trees = Vec::new();
    for _ in 0..2 {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        copy_tree(&demo_dir(), tmp.path()).map_err(|e| e.to_string())?;
        let manifest = StudyManifest::load(&tmp.path().join("manifest.toml")).map_err(|e| format!("{e:#}"))?;
        let config = PipelineConfig::load(manifest.config.as_deref().ok_or("demo manifest names no config")?)
            .map_err(|e| format!("{e:#}"))?;
        check(config.schedule.frames == 61 && config.schedule.full_angle == 50.0, "demo is not the 61-frame, 50 degree schedule")?;
        check(config.camera.width == 256 && config.camera.height == 256, "demo raster is not 256x256")?;
        check(config.saliency.voxels == [32; 3], "demo grid is not 32^3")?;
        commands::pipeline(&manifest, &config, &mut std::io::sink()).map_err(|e| format!("{e:#}"))?;
        trees.push(tree_bytes(&manifest.output).map_err(|e| e.to_string())?);
    }
    let elapsed = start.elapsed();
    let (a, b) = (&trees[0], &trees[1]);
    check(a.keys().eq(b.keys()), "runs produced different file sets")?;
    for (path, bytes) in a {
        check(&b[path] == bytes, format!("{} differs between runs", path.display()))?;
    }
    let count = |ext: &str| a.keys().filter(|p| p.to_string_lossy().ends_with(ext)).count();
    check(count(".grid") == 4 && count(".ply") == 8 && count("report.json") == 1, "missing demo outputs")?;
    check(elapsed < DEMO_BUDGET, format!("two runs took {elapsed:?}"))?;
    Ok(format!("{} files identical across two runs, {elapsed:.2?} total", a.len()))
}

fn reconstruction_fidelity() -> Outcome {
    // Facets of a 51x50 sphere sag up to 2.5e-3 below the true surface, so
    // the reconstruction is checked on a finer tessellation (sag < 7e-4).
    let sphere = shapes::uv_sphere(Point3::ORIGIN, 1.0, 101, 100);
    let scale = ScaleSpec::from_bbox(&mesh_bbox(&sphere).unwrap(), 0.01).unwrap();
    let map = rasterize_coordmap(&sphere, &front_camera(4.0, 40.0, 512), &FrameSpec::identity(0), &scale)
        .map_err(|e| e.to_string())?;
    let pts = reconstruct_cloud(&map);
    check(!pts.is_empty(), "sphere not visible")?;
    let worst = pts.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max);
    check(worst <= SPHERE_RADIUS_TOL, format!("radius off by {worst:e}"))?;

    // Plane through the origin facing the camera, much larger than the view.
    let (d, fov, n) = (3.0f64, 50.0f64, 512u32);
    let half = d * (fov.to_radians() / 2.0).tan();
    let stand = RigidTransform::new([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]], Point3::ORIGIN).unwrap();
    let plane = shapes::grid_plane(6.0 * half, 6.0 * half, 6, 6, 0.0).transformed(&stand);
    let scale = ScaleSpec::from_bbox(&mesh_bbox(&plane).unwrap(), 0.01).unwrap();
    let map = rasterize_coordmap(&plane, &front_camera(d, fov, n), &FrameSpec::identity(0), &scale)
        .map_err(|e| e.to_string())?;
    check(map.foreground_count() == (n * n) as usize, "plane does not fill the frame")?;
    let tri = triangulate_coordmap(&map, default_depth_break(&map)).map_err(|e| e.to_string())?;
    let analytic = (2.0 * half).powi(2);
    let rel = (tri.surface_area() - analytic).abs() / analytic;
    check(rel <= PLANE_AREA_REL_TOL, format!("plane area off by {:.3}%", rel * 100.0))?;
    Ok(format!("sphere radius error {worst:.2e}, plane area error {:.3}%", rel * 100.0))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("quantization round-trip", quantization_round_trip),
        ("coordinate map agrees with ray casting", lut_vs_ray),
        ("mean WSS equals summed variances", wss_identity),
        ("blur conserves mass and commutes with mirroring", blur_mass_and_symmetry),
        ("metric identities", metric_identities),
        ("region fractions", region_oracle),
        ("demo pipeline is deterministic", demo_determinism),
        ("reconstruction fidelity", reconstruction_fidelity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
