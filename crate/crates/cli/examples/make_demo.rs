//! Generates the demo study: a statue-like blob mesh with head/body labels,
//! a reduced-size pipeline config, a manifest and synthetic fixation logs.
//!
//! Usage: `cargo run -p gaze3d-cli --example make_demo -- [DIR]` (default `demo`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use gaze3d::coordmap::CoordinateMap;
use gaze3d::geometry::shapes;
use gaze3d::io;
use gaze3d::projection::{select_frame, FixationRecord};
use gaze3d_cli::commands::scale_for_mesh;
use gaze3d_cli::config::PipelineConfig;
use gaze3d::rasterizer::{make_rotation_schedule, rasterize_animation};
use gaze3d::projection::Playback;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QUESTIONS: [(&str, f64); 2] = [("free", 0.55), ("shape", 0.25)];
const MATERIALS: [(&str, f64); 2] = [("gold", 0.0), ("silver", 0.1)];
const OBSERVERS: usize = 6;
const FIXATIONS_PER_OBSERVER: usize = 40;
const HEAD_MIN_Z: f64 = 0.45;

fn demo_config() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.camera.width = 256;
    c.camera.height = 256;
    c.schedule.playback = Playback::Pingpong;
    c.saliency.voxels = [32; 3];
    c.saliency.sigma_voxels = 1.0;
    c
}

/// Foreground pixels of one frame split by whether they show the head.
fn pixel_pools(map: &CoordinateMap) -> [Vec<(u32, u32)>; 2] {
    let mut pools = [Vec::new(), Vec::new()];
    for row in 0..map.height() {
        for col in 0..map.width() {
            if let Some(p) = map.point_at(col, row) {
                pools[usize::from(p.z > HEAD_MIN_Z)].push((col, row));
            }
        }
    }
    pools
}

fn session_log(
    pools: &[[Vec<(u32, u32)>; 2]],
    config: &PipelineConfig,
    head_share: f64,
    seed: u64,
) -> Vec<FixationRecord> {
    let schedule = config.frame_schedule().expect("demo schedule is valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (config.camera.width as f64, config.camera.height as f64);
    let mut out = Vec::new();
    for obs in 0..OBSERVERS {
        let mut t = rng.random_range(0.05..0.3);
        for _ in 0..FIXATIONS_PER_OBSERVER {
            let duration: f64 = rng.random_range(0.15..0.45);
            let frame = select_frame(t, &schedule) as usize;
            let (col, row) = if rng.random_bool(0.05) {
                (rng.random_range(0.0..w), rng.random_range(0.0..h))
            } else {
                let pool = &pools[frame][usize::from(rng.random_bool(head_share))];
                let (c, r) = pool[rng.random_range(0..pool.len())];
                (c as f64 + rng.random_range(0.0..1.0), r as f64 + rng.random_range(0.0..1.0))
            };
            let mut rec = FixationRecord::new(round3(t), round3(col), round3(row), &format!("obs{}", obs + 1));
            rec.duration = Some(round3(duration));
            out.push(rec);
            t += duration + rng.random_range(0.02..0.08);
        }
    }
    out
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn manifest_text(sessions: &[(String, String, PathBuf)]) -> String {
    let mut s = String::from(
        "# Demo study: one model, two questions, two materials.\n\
         config = \"config.toml\"\n\
         output = \"out\"\n\n\
         [[models]]\n\
         name = \"blob\"\n\
         mesh = \"blob.ply\"\n\
         region_labels = \"blob.labels\"\n\
         regions = { \"0\" = \"body\", \"1\" = \"head\" }\n",
    );
    for (q, m, path) in sessions {
        let _ = write!(
            s,
            "\n[[sessions]]\nquestion = \"{q}\"\nmodel = \"blob\"\nmaterial = \"{m}\"\nfixations = \"{}\"\n",
            path.display()
        );
    }
    for (q, _) in QUESTIONS {
        let _ = write!(s, "\n[[pairs]]\na = \"{q}/blob/gold\"\nb = \"{q}/blob/silver\"\n");
    }
    for (m, _) in MATERIALS {
        let (a, b) = (QUESTIONS[0].0, QUESTIONS[1].0);
        let _ = write!(s, "\n[[pairs]]\na = \"{a}/blob/{m}\"\nb = \"{b}/blob/{m}\"\n");
    }
    s
}

fn main() -> Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".into()));
    std::fs::create_dir_all(dir.join("fixations"))?;

    let labeled = shapes::statue_blob(51, 50);
    let labels = labeled.region_labels().expect("blob carries labels").to_vec();
    let mesh = gaze3d::geometry::SurfaceMesh::new(labeled.vertices().to_vec(), labeled.faces().to_vec())?;
    io::write_mesh(&mesh, &dir.join("blob.ply"))?;
    io::write_region_labels(&labels, &dir.join("blob.labels"))?;

    let config = demo_config();
    io::atomic_write(&dir.join("config.toml"), config.to_toml().as_bytes())?;

    // Sample from the mesh as it is read back, so the logs match what the
    // pipeline will render.
    let mesh = io::read_mesh(&dir.join("blob.ply"))?;
    let s = &config.schedule;
    let frames = make_rotation_schedule(s.full_angle, s.frames, s.motion);
    let maps = rasterize_animation(&mesh, &config.camera()?, &frames, &scale_for_mesh(&mesh, &config)?)?;
    let pools: Vec<_> = maps.iter().map(pixel_pools).collect();

    let mut sessions = Vec::new();
    for (qi, (q, head)) in QUESTIONS.iter().enumerate() {
        for (mi, (m, shift)) in MATERIALS.iter().enumerate() {
            let log = session_log(&pools, &config, head + shift, (qi * 10 + mi) as u64);
            let rel = Path::new("fixations").join(format!("{q}_{m}.csv"));
            io::write_fixations(&log, &dir.join(&rel))?;
            sessions.push((q.to_string(), m.to_string(), rel));
        }
    }
    io::atomic_write(&dir.join("manifest.toml"), manifest_text(&sessions).as_bytes())?;
    println!("demo written to {}", dir.display());
    Ok(())
}
