//! Pipeline configuration file (TOML) and command-line overrides.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use gaze3d::coordmap::ScaleSpec;
use gaze3d::geometry::{Camera, Point3};
use gaze3d::projection::{FrameSchedule, Playback, ProjectionOptions};
use gaze3d::rasterizer::Motion;
use gaze3d::saliency::ColormapSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
    /// Degrees.
    pub vertical_fov: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            position: [0.0, -4.0, 0.0],
            look_at: [0.0, 0.0, 0.0],
            up: [0.0, 0.0, 1.0],
            vertical_fov: 40.0,
            width: 512,
            height: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Full sweep in degrees about the object's z-axis.
    pub full_angle: f64,
    pub frames: u32,
    pub motion: Motion,
    pub fps: f64,
    pub playback: Playback,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            full_angle: 50.0,
            frames: 61,
            motion: Motion::Sinusoidal,
            fps: 30.0,
            playback: Playback::Clamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingConfig {
    /// Fraction of the mesh extent added on each side of the encoded volume.
    pub margin: f64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self { margin: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub duration_weighting: bool,
    /// Triangulation edge cutoff in object units; 0 selects 2% of the
    /// encoded volume's diagonal.
    pub depth_break: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaliencyConfig {
    pub voxels: [usize; 3],
    /// Fraction of the encoded volume added on each side of the grid.
    pub padding: f64,
    pub sigma_voxels: f64,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        Self {
            voxels: [64; 3],
            padding: 0.05,
            sigma_voxels: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Region assignment cutoff in object units; 0 selects 5% of the encoded
    /// volume's diagonal.
    pub max_dist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColormapConfig {
    /// `[position, r, g, b]` rows with increasing positions from 0 to 1.
    pub anchors: Vec<[f64; 4]>,
}

impl Default for ColormapConfig {
    fn default() -> Self {
        Self {
            anchors: ColormapSpec::jet()
                .anchors()
                .iter()
                .map(|&(t, [r, g, b])| [t, r, g, b])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub camera: CameraConfig,
    pub schedule: ScheduleConfig,
    pub encoding: EncodingConfig,
    pub projection: ProjectionConfig,
    pub saliency: SaliencyConfig,
    pub metrics: MetricsConfig,
    pub colormap: ColormapConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate().with_context(|| format!("invalid config {}", path.display()))?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every value against the range its consumer accepts.
    pub fn validate(&self) -> Result<()> {
        self.camera()?;
        self.frame_schedule()?;
        self.colormap()?;
        let s = &self.schedule;
        if !s.full_angle.is_finite() {
            bail!("schedule.full_angle must be finite");
        }
        if !(self.encoding.margin >= 0.0 && self.encoding.margin.is_finite()) {
            bail!("encoding.margin must be >= 0");
        }
        if !(self.projection.depth_break >= 0.0 && self.projection.depth_break.is_finite()) {
            bail!("projection.depth_break must be >= 0");
        }
        let sal = &self.saliency;
        if sal.voxels.contains(&0) {
            bail!("saliency.voxels must all be >= 1");
        }
        if !(sal.padding >= 0.0 && sal.padding.is_finite()) {
            bail!("saliency.padding must be >= 0");
        }
        if !(sal.sigma_voxels > 0.0 && sal.sigma_voxels.is_finite()) {
            bail!("saliency.sigma_voxels must be > 0");
        }
        if !(self.metrics.max_dist >= 0.0 && self.metrics.max_dist.is_finite()) {
            bail!("metrics.max_dist must be >= 0");
        }
        Ok(())
    }

    pub fn camera(&self) -> Result<Camera> {
        let c = &self.camera;
        Ok(Camera::new(
            Point3::from_array(c.position),
            Point3::from_array(c.look_at),
            Point3::from_array(c.up),
            c.vertical_fov,
            c.width,
            c.height,
        )?)
    }

    pub fn frame_schedule(&self) -> Result<FrameSchedule> {
        Ok(FrameSchedule::new(self.schedule.fps, self.schedule.frames, self.schedule.playback)?)
    }

    pub fn projection_options(&self) -> ProjectionOptions {
        ProjectionOptions {
            duration_weighting: self.projection.duration_weighting,
        }
    }

    pub fn colormap(&self) -> Result<ColormapSpec> {
        let anchors = self
            .colormap
            .anchors
            .iter()
            .map(|&[t, r, g, b]| (t, [r, g, b]))
            .collect();
        Ok(ColormapSpec::new(anchors)?)
    }

    pub fn depth_break(&self, scale: &ScaleSpec) -> f64 {
        match self.projection.depth_break {
            d if d > 0.0 => d,
            _ => 0.02 * scale.diagonal(),
        }
    }

    pub fn max_dist(&self, scale: &ScaleSpec) -> f64 {
        match self.metrics.max_dist {
            d if d > 0.0 => d,
            _ => 0.05 * scale.diagonal(),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Copy>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = *v;
            }
        }
        set(&mut self.camera.width, &o.width);
        set(&mut self.camera.height, &o.height);
        set(&mut self.camera.vertical_fov, &o.fov);
        set(&mut self.schedule.frames, &o.frames);
        set(&mut self.schedule.full_angle, &o.angle);
        set(&mut self.schedule.motion, &o.motion);
        set(&mut self.schedule.fps, &o.fps);
        set(&mut self.schedule.playback, &o.playback);
        set(&mut self.encoding.margin, &o.margin);
        set(&mut self.projection.depth_break, &o.depth_break);
        set(&mut self.saliency.sigma_voxels, &o.sigma);
        set(&mut self.metrics.max_dist, &o.max_dist);
        if o.duration_weighting {
            self.projection.duration_weighting = true;
        }
        if let Some(n) = o.voxels {
            self.saliency.voxels = [n; 3];
        }
    }
}

/// Flags that take precedence over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Raster width in pixels.
    #[arg(long, global = true)]
    pub width: Option<u32>,
    /// Raster height in pixels.
    #[arg(long, global = true)]
    pub height: Option<u32>,
    /// Vertical field of view in degrees.
    #[arg(long, global = true)]
    pub fov: Option<f64>,
    /// Number of animation frames.
    #[arg(long, global = true)]
    pub frames: Option<u32>,
    /// Full rotation sweep in degrees.
    #[arg(long, global = true)]
    pub angle: Option<f64>,
    /// linear | sinusoidal
    #[arg(long, global = true)]
    pub motion: Option<Motion>,
    /// Animation playback rate.
    #[arg(long, global = true)]
    pub fps: Option<f64>,
    /// clamp | loop | pingpong
    #[arg(long, global = true)]
    pub playback: Option<Playback>,
    /// Encoded-volume margin as a fraction of the mesh extent.
    #[arg(long, global = true)]
    pub margin: Option<f64>,
    /// Triangulation edge cutoff in object units.
    #[arg(long, global = true)]
    pub depth_break: Option<f64>,
    /// Voxels per axis.
    #[arg(long, global = true)]
    pub voxels: Option<usize>,
    /// Gaussian sigma in voxels.
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Region assignment cutoff in object units.
    #[arg(long, global = true)]
    pub max_dist: Option<f64>,
    /// Weight fixations by duration instead of counting them.
    #[arg(long, global = true)]
    pub duration_weighting: bool,
}
