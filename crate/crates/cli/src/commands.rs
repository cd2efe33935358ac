//! Subcommand implementations. Each writes its artifacts atomically and
//! reports a short summary to `out`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gaze3d::coordmap::{CoordinateMap, ScaleSpec};
use gaze3d::geometry::{mesh_bbox, SurfaceMesh};
use gaze3d::io;
use gaze3d::metrics::{distribution_report, region_fractions, similarity_report, ReportEntry};
use gaze3d::projection::{
    project_fixations, reconstruct_cloud, triangulate_coordmap, FixationCloud3D, FixationRecord,
    FrameSchedule,
};
use gaze3d::rasterizer::{make_rotation_schedule, rasterize_animation};
use gaze3d::saliency::{colorize_mesh, gaussian_blur3d, normalize, voxelize_into, VoxelGrid};
use log::info;

use crate::config::PipelineConfig;
use crate::manifest::{ModelEntry, SessionEntry, StudyManifest};

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Writes the effective configuration next to an output.
pub fn echo_config(config: &PipelineConfig, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    io::atomic_write(path, config.to_toml().as_bytes())?;
    Ok(())
}

/// Encoded volume for a mesh: its bounding box grown by the configured margin.
pub fn scale_for_mesh(mesh: &SurfaceMesh, config: &PipelineConfig) -> Result<ScaleSpec> {
    Ok(ScaleSpec::from_bbox(&mesh_bbox(mesh)?, config.encoding.margin)?)
}

/// Saliency grid layout shared by every session of one model.
pub fn grid_for_scale(scale: &ScaleSpec, config: &PipelineConfig) -> Result<VoxelGrid> {
    Ok(VoxelGrid::covering_dims(scale, config.saliency.voxels, config.saliency.padding)?)
}

/// Reads a mesh and, when given, attaches region labels from a label file.
pub fn load_mesh(mesh: &Path, labels: Option<&Path>) -> Result<SurfaceMesh> {
    let m = io::read_mesh(mesh)?;
    match labels {
        Some(l) => {
            let labels = io::read_region_labels(l)?;
            m.with_region_labels(labels)
                .with_context(|| format!("attaching {} to {}", l.display(), mesh.display()))
        }
        None => Ok(m),
    }
}

fn render_maps(mesh: &SurfaceMesh, config: &PipelineConfig) -> Result<Vec<CoordinateMap>> {
    let camera = config.camera()?;
    let scale = scale_for_mesh(mesh, config)?;
    let s = &config.schedule;
    let frames = make_rotation_schedule(s.full_angle, s.frames, s.motion);
    Ok(rasterize_animation(mesh, &camera, &frames, &scale)?)
}

/// Removes `<prefix>_NNNN.png` files left over from a longer earlier run.
fn remove_stale_frames(prefix: &Path, from: u32) -> Result<()> {
    let mut k = from;
    loop {
        let p = io::frame_path(prefix, k);
        if !p.exists() {
            return Ok(());
        }
        std::fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
        k += 1;
    }
}

fn write_maps(maps: &[CoordinateMap], prefix: &Path) -> Result<()> {
    ensure_parent(prefix)?;
    io::write_coordmap_sequence(maps, prefix)?;
    remove_stale_frames(prefix, maps.len() as u32)
}

/// Renders one coordinate map per frame of the rotation schedule.
pub fn rasterize(mesh_path: &Path, config: &PipelineConfig, prefix: &Path, out: &mut dyn Write) -> Result<Vec<f64>> {
    let mesh = load_mesh(mesh_path, None)?;
    let maps = render_maps(&mesh, config)?;
    write_maps(&maps, prefix)?;
    echo_config(config, &with_suffix(prefix, ".config.toml"))?;
    writeln!(out, "frames: {}", maps.len())?;
    let coverage: Vec<f64> = maps.iter().map(CoordinateMap::coverage).collect();
    for (k, c) in coverage.iter().enumerate() {
        writeln!(out, "frame {k:04} coverage {c:.6}")?;
    }
    Ok(coverage)
}

/// Rebuilds the visible surface of one frame as a triangle mesh, or as a bare
/// point cloud when `points_only`.
pub fn reconstruct(
    maps_prefix: &Path,
    frame: u32,
    points_only: bool,
    config: &PipelineConfig,
    out_path: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    let maps = io::read_coordmap_sequence(maps_prefix)?;
    let Some(map) = maps.get(frame as usize) else {
        bail!("frame {frame} out of range: {} frames under {}", maps.len(), maps_prefix.display());
    };
    ensure_parent(out_path)?;
    if points_only {
        let cloud = FixationCloud3D::from_points(reconstruct_cloud(map));
        io::write_cloud(&cloud, out_path)?;
        writeln!(out, "points: {}", cloud.len())?;
    } else {
        let mesh = triangulate_coordmap(map, config.depth_break(map.scale()))?;
        io::write_mesh(&mesh, out_path)?;
        writeln!(out, "vertices: {}", mesh.vertices().len())?;
        writeln!(out, "faces: {}", mesh.faces().len())?;
    }
    echo_config(config, &with_suffix(out_path, ".config.toml"))
}

fn read_session_log(path: &Path, session: Option<&SessionEntry>) -> Result<Vec<FixationRecord>> {
    let mut records = io::read_fixations(path)?;
    if let Some(s) = session {
        let labels = s.condition();
        for r in &mut records {
            r.condition = labels.clone();
        }
    }
    Ok(records)
}

/// Reprojects a fixation log through a coordinate-map sequence.
pub fn project(
    fixations_path: &Path,
    maps_prefix: &Path,
    config: &PipelineConfig,
    out_path: &Path,
    out: &mut dyn Write,
) -> Result<FixationCloud3D> {
    let maps = io::read_coordmap_sequence(maps_prefix)?;
    let schedule = FrameSchedule::new(config.schedule.fps, maps.len() as u32, config.schedule.playback)?;
    let records = read_session_log(fixations_path, None)?;
    let n = records.len();
    let cloud = project_fixations(&records, &maps, &schedule, config.projection_options())?;
    ensure_parent(out_path)?;
    io::write_cloud(&cloud, out_path)?;
    echo_config(config, &with_suffix(out_path, ".config.toml"))?;
    writeln!(out, "fixations: {n}")?;
    writeln!(out, "projected: {}", cloud.len())?;
    writeln!(out, "dropped_count: {}", cloud.dropped_count)?;
    Ok(cloud)
}

/// Voxelizes, blurs and normalizes a cloud on the grid implied by `mesh`,
/// then colors the mesh with it.
fn build_saliency(
    cloud: &FixationCloud3D,
    mesh: &SurfaceMesh,
    config: &PipelineConfig,
) -> Result<(VoxelGrid, SurfaceMesh)> {
    let scale = scale_for_mesh(mesh, config)?;
    let raw = voxelize_into(cloud, grid_for_scale(&scale, config)?)?;
    let blurred = gaussian_blur3d(&raw, config.saliency.sigma_voxels)?;
    let saliency = normalize(&blurred)?;
    let colored = colorize_mesh(mesh, &saliency, &config.colormap()?)?;
    Ok((saliency, colored))
}

fn write_saliency(grid: &VoxelGrid, colored: &SurfaceMesh, grid_path: &Path, mesh_path: &Path) -> Result<()> {
    ensure_parent(grid_path)?;
    ensure_parent(mesh_path)?;
    io::write_grid(grid, grid_path)?;
    io::write_mesh(colored, mesh_path)?;
    Ok(())
}

/// Writes `<prefix>.grid` and `<prefix>.colored.ply`.
pub fn saliency(
    cloud_path: &Path,
    mesh_path: &Path,
    config: &PipelineConfig,
    prefix: &Path,
    out: &mut dyn Write,
) -> Result<VoxelGrid> {
    let cloud = io::read_cloud(cloud_path)?;
    let mesh = load_mesh(mesh_path, None)?;
    let (grid, colored) = build_saliency(&cloud, &mesh, config)?;
    write_saliency(&grid, &colored, &with_suffix(prefix, ".grid"), &with_suffix(prefix, ".colored.ply"))?;
    echo_config(config, &with_suffix(prefix, ".config.toml"))?;
    let d = grid.dims();
    writeln!(out, "grid: {}x{}x{} voxel_size {}", d[0], d[1], d[2], grid.voxel_size())?;
    writeln!(out, "fixations: {}", cloud.len())?;
    writeln!(out, "map_max: {}", grid.max())?;
    Ok(grid)
}

struct ModelData {
    mesh: SurfaceMesh,
    names: BTreeMap<i32, String>,
    scale: ScaleSpec,
}

fn load_model(entry: &ModelEntry, config: &PipelineConfig) -> Result<ModelData> {
    let mesh = load_mesh(&entry.mesh, entry.region_labels.as_deref())?;
    let scale = scale_for_mesh(&mesh, config)?;
    Ok(ModelData {
        mesh,
        names: entry.region_names(),
        scale,
    })
}

fn build_report(
    manifest: &StudyManifest,
    config: &PipelineConfig,
    models: &BTreeMap<String, ModelData>,
    sessions: &BTreeMap<String, (FixationCloud3D, VoxelGrid)>,
) -> Result<BTreeMap<String, ReportEntry>> {
    let mut report = BTreeMap::new();
    for s in &manifest.sessions {
        let key = s.key();
        let (cloud, grid) = &sessions[&key];
        let mut d = distribution_report(cloud, grid).with_context(|| format!("session {key}"))?;
        let model = &models[&s.model];
        if model.mesh.region_labels().is_some() {
            let max_dist = config.max_dist(&model.scale);
            d.regions = Some(region_fractions(cloud, &model.mesh, max_dist, &model.names)?);
        }
        report.insert(key, ReportEntry::Distribution(d));
    }
    for p in &manifest.pairs {
        let (ca, ga) = &sessions[&p.a];
        let (cb, gb) = &sessions[&p.b];
        let sim = similarity_report(ca, ga, cb, gb).with_context(|| format!("pair {}", p.key()))?;
        report.insert(p.key(), ReportEntry::Similarity(sim));
    }
    Ok(report)
}

fn load_models(manifest: &StudyManifest, config: &PipelineConfig) -> Result<BTreeMap<String, ModelData>> {
    manifest
        .models
        .iter()
        .map(|m| Ok((m.name.clone(), load_model(m, config).with_context(|| format!("model {}", m.name))?)))
        .collect()
}

/// Distribution and similarity report from the clouds and grids a manifest
/// points at.
pub fn metrics(
    manifest: &StudyManifest,
    config: &PipelineConfig,
    out_path: &Path,
    out: &mut dyn Write,
) -> Result<BTreeMap<String, ReportEntry>> {
    let models = load_models(manifest, config)?;
    let mut sessions = BTreeMap::new();
    for s in &manifest.sessions {
        let cloud = io::read_cloud(&manifest.cloud_path(s))?;
        let grid = io::read_grid(&manifest.grid_path(s))?;
        sessions.insert(s.key(), (cloud, grid));
    }
    let report = build_report(manifest, config, &models, &sessions)?;
    ensure_parent(out_path)?;
    io::write_report(&report, out_path)?;
    echo_config(config, &with_suffix(out_path, ".config.toml"))?;
    writeln!(out, "conditions: {}", manifest.sessions.len())?;
    writeln!(out, "pairs: {}", manifest.pairs.len())?;
    Ok(report)
}

/// Rasterize, project, build saliency maps and report for every session of
/// a manifest. All inputs are loaded and checked before the first write.
pub fn pipeline(
    manifest: &StudyManifest,
    config: &PipelineConfig,
    out: &mut dyn Write,
) -> Result<BTreeMap<String, ReportEntry>> {
    let models = load_models(manifest, config)?;
    let mut logs = BTreeMap::new();
    for s in &manifest.sessions {
        logs.insert(s.key(), read_session_log(&s.fixations, Some(s))?);
    }
    let mut external_maps = BTreeMap::new();
    for s in &manifest.sessions {
        if let Some(prefix) = &s.maps {
            external_maps.insert(s.key(), io::read_coordmap_sequence(prefix)?);
        }
    }

    std::fs::create_dir_all(&manifest.output)
        .with_context(|| format!("creating {}", manifest.output.display()))?;
    let mut rendered = BTreeMap::new();
    for (name, model) in &models {
        let needed = manifest.sessions.iter().any(|s| &s.model == name && s.maps.is_none());
        if !needed {
            continue;
        }
        info!("rasterizing model {name}");
        let maps = render_maps(&model.mesh, config)?;
        write_maps(&maps, &manifest.maps_prefix(name))?;
        rendered.insert(name.clone(), maps);
    }

    let mut sessions = BTreeMap::new();
    for s in &manifest.sessions {
        let key = s.key();
        info!("projecting session {key}");
        let maps = match external_maps.get(&key) {
            Some(m) => m,
            None => &rendered[&s.model],
        };
        let schedule = FrameSchedule::new(
            s.fps.unwrap_or(config.schedule.fps),
            maps.len() as u32,
            s.playback.unwrap_or(config.schedule.playback),
        )?;
        let records = &logs[&key];
        let n = records.len();
        let cloud = project_fixations(records, maps, &schedule, config.projection_options())
            .with_context(|| format!("projecting {}", s.fixations.display()))?;
        let cloud_path = manifest.cloud_path(s);
        ensure_parent(&cloud_path)?;
        io::write_cloud(&cloud, &cloud_path)?;
        let (grid, colored) = build_saliency(&cloud, &models[&s.model].mesh, config)
            .with_context(|| format!("session {key}"))?;
        write_saliency(&grid, &colored, &manifest.grid_path(s), &manifest.colored_mesh_path(s))?;
        writeln!(out, "{key}: {} of {n} fixations projected, {} dropped", cloud.len(), cloud.dropped_count)?;
        sessions.insert(key, (cloud, grid));
    }

    let report = build_report(manifest, config, &models, &sessions)?;
    io::write_report(&report, &manifest.output.join("report.json"))?;
    echo_config(config, &manifest.output.join("config.toml"))?;
    writeln!(out, "report: {}", manifest.output.join("report.json").display())?;
    Ok(report)
}
