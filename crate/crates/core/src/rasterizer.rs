//! Z-buffered software rasterization of coordinate maps.
//!
//! Every covered pixel stores the encoded object-space position of the
//! nearest surface point under its center. Depth testing runs on the
//! transformed (camera-space) geometry while the stored coordinates are the
//! pre-transform ones, so maps from all frames of an animation decode into a
//! single object-fixed coordinate system.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coordmap::{encode_point, CoordinateMap, ScaleSpec};
use crate::error::{Error, Result};
use crate::geometry::{Camera, Point3, RigidTransform, SurfaceMesh};

/// One animation frame: its index and the object's model transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpec {
    pub frame_index: u32,
    pub model_transform: RigidTransform,
    /// Rotation angle in degrees, informational.
    pub angle: f64,
}

impl FrameSpec {
    pub fn identity(frame_index: u32) -> Self {
        Self {
            frame_index,
            model_transform: RigidTransform::IDENTITY,
            angle: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Motion {
    Linear,
    /// Sweep with sinusoidal angular velocity: slow at both ends.
    #[default]
    Sinusoidal,
}

impl std::str::FromStr for Motion {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(Motion::Linear),
            "sinusoidal" => Ok(Motion::Sinusoidal),
            other => Err(format!("unknown motion {other:?} (linear | sinusoidal)")),
        }
    }
}

/// Rotation angle in degrees of frame `k` out of `n_frames`, sweeping
/// `-full_angle / 2 .. +full_angle / 2`.
pub fn schedule_angle(full_angle: f64, n_frames: u32, motion: Motion, k: u32) -> f64 {
    if n_frames <= 1 {
        return 0.0;
    }
    let s = k as f64 / (n_frames - 1) as f64;
    let half = 0.5 * full_angle;
    match motion {
        Motion::Linear => -half + full_angle * s,
        Motion::Sinusoidal => -half * (std::f64::consts::PI * s).cos(),
    }
}

/// Frames rotating the object about its z-axis.
pub fn make_rotation_schedule(full_angle: f64, n_frames: u32, motion: Motion) -> Vec<FrameSpec> {
    let n = n_frames.max(1);
    (0..n)
        .map(|k| {
            let angle = schedule_angle(full_angle, n, motion, k);
            FrameSpec {
                frame_index: k,
                model_transform: if angle == 0.0 {
                    RigidTransform::IDENTITY
                } else {
                    RigidTransform::rotation_z(angle.to_radians())
                },
                angle,
            }
        })
        .collect()
}

#[derive(Clone, Copy)]
struct ClipVertex {
    view: Point3,
    object: Point3,
}

impl ClipVertex {
    fn lerp(self, o: ClipVertex, t: f64) -> ClipVertex {
        ClipVertex {
            view: self.view + (o.view - self.view) * t,
            object: self.object + (o.object - self.object) * t,
        }
    }
}

#[derive(Clone, Copy)]
struct ScreenVertex {
    x: f64,
    y: f64,
    inv_depth: f64,
    object: Point3,
}

/// Signed edge function. Evaluated from the lexicographically smaller
/// endpoint so that `edge(a, b, p) == -edge(b, a, p)` holds exactly and a
/// pixel on a shared edge is never rejected by both triangles.
fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    if (ax, ay) > (bx, by) {
        return -edge(bx, by, ax, ay, px, py);
    }
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

/// Top-left rule for a positively oriented triangle in y-down screen space.
fn is_top_left(ax: f64, ay: f64, bx: f64, by: f64) -> bool {
    let (dx, dy) = (bx - ax, by - ay);
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

struct Target<'a> {
    map: &'a mut CoordinateMap,
    depth: Vec<f64>,
    scale: &'a ScaleSpec,
}

impl Target<'_> {
    fn draw(&mut self, tri: [ScreenVertex; 3]) -> Result<()> {
        let [v0, mut v1, mut v2] = tri;
        let mut area = edge(v0.x, v0.y, v1.x, v1.y, v2.x, v2.y);
        if !(area.is_finite()) || area == 0.0 {
            return Ok(());
        }
        if area < 0.0 {
            std::mem::swap(&mut v1, &mut v2);
            area = -area;
        }
        let (w, h) = (self.map.width(), self.map.height());
        let min_x = v0.x.min(v1.x).min(v2.x);
        let max_x = v0.x.max(v1.x).max(v2.x);
        let min_y = v0.y.min(v1.y).min(v2.y);
        let max_y = v0.y.max(v1.y).max(v2.y);
        // Pixel centers c + 0.5 inside [min, max].
        let c0 = (min_x - 0.5).ceil().max(0.0);
        let c1 = (max_x - 0.5).floor().min(w as f64 - 1.0);
        let r0 = (min_y - 0.5).ceil().max(0.0);
        let r1 = (max_y - 0.5).floor().min(h as f64 - 1.0);
        if c0 > c1 || r0 > r1 {
            return Ok(());
        }
        let tl0 = is_top_left(v1.x, v1.y, v2.x, v2.y);
        let tl1 = is_top_left(v2.x, v2.y, v0.x, v0.y);
        let tl2 = is_top_left(v0.x, v0.y, v1.x, v1.y);
        let inside = |e: f64, tl: bool| e > 0.0 || (e == 0.0 && tl);

        for r in r0 as u32..=r1 as u32 {
            let py = r as f64 + 0.5;
            for c in c0 as u32..=c1 as u32 {
                let px = c as f64 + 0.5;
                let e0 = edge(v1.x, v1.y, v2.x, v2.y, px, py);
                let e1 = edge(v2.x, v2.y, v0.x, v0.y, px, py);
                let e2 = edge(v0.x, v0.y, v1.x, v1.y, px, py);
                if !(inside(e0, tl0) && inside(e1, tl1) && inside(e2, tl2)) {
                    continue;
                }
                // Screen-space barycentrics, then perspective-correct weights.
                let (l0, l1, l2) = (e0 / area, e1 / area, e2 / area);
                let (p0, p1, p2) = (l0 * v0.inv_depth, l1 * v1.inv_depth, l2 * v2.inv_depth);
                let inv_depth = p0 + p1 + p2;
                if !(inv_depth > 0.0) {
                    continue;
                }
                let depth = 1.0 / inv_depth;
                let idx = r as usize * w as usize + c as usize;
                if depth >= self.depth[idx] {
                    continue;
                }
                let object = (v0.object * p0 + v1.object * p1 + v2.object * p2) / inv_depth;
                let rgb = encode_point(object, self.scale)?;
                self.depth[idx] = depth;
                self.map.set(c, r, rgb);
            }
        }
        Ok(())
    }
}

/// Renders the coordinate map of `mesh` seen by `camera` after applying the
/// frame's model transform.
pub fn rasterize_coordmap(
    mesh: &SurfaceMesh,
    camera: &Camera,
    frame: &FrameSpec,
    scale: &ScaleSpec,
) -> Result<CoordinateMap> {
    let (w, h) = (camera.width(), camera.height());
    let mut map = CoordinateMap::empty(w, h, *scale);
    if let Some(&p) = mesh.vertices().iter().find(|&&v| !scale.covers(v)) {
        return Err(Error::ScaleTooSmall { point: p });
    }
    if mesh.faces().is_empty() {
        return Ok(map);
    }
    let near = 1e-6 * scale.diagonal().max(1e-3);
    let focal = camera.focal_length();
    let (half_w, half_h) = (0.5 * w as f64, 0.5 * h as f64);
    let to_screen = |v: ClipVertex| ScreenVertex {
        x: half_w + focal * v.view.x / v.view.z,
        y: half_h - focal * v.view.y / v.view.z,
        inv_depth: 1.0 / v.view.z,
        object: v.object,
    };

    let view: Vec<Point3> = mesh
        .vertices()
        .iter()
        .map(|&p| camera.to_view(frame.model_transform.apply(p)))
        .collect();
    let mut target = Target {
        map: &mut map,
        depth: vec![f64::INFINITY; w as usize * h as usize],
        scale,
    };
    let mut poly: Vec<ClipVertex> = Vec::with_capacity(4);
    for f in mesh.faces() {
        let verts = f.map(|i| ClipVertex {
            view: view[i as usize],
            object: mesh.vertices()[i as usize],
        });
        if verts.iter().all(|v| v.view.z > near) {
            target.draw(verts.map(to_screen))?;
            continue;
        }
        // Clip against the near plane.
        poly.clear();
        for i in 0..3 {
            let (a, b) = (verts[i], verts[(i + 1) % 3]);
            let (ina, inb) = (a.view.z > near, b.view.z > near);
            if ina {
                poly.push(a);
            }
            if ina != inb {
                let t = (near - a.view.z) / (b.view.z - a.view.z);
                poly.push(a.lerp(b, t));
            }
        }
        for k in 1..poly.len().saturating_sub(1) {
            target.draw([to_screen(poly[0]), to_screen(poly[k]), to_screen(poly[k + 1])])?;
        }
    }
    Ok(map)
}

/// One coordinate map per frame, all sharing `scale`. Frames render in parallel;
/// output order follows `frames`.
pub fn rasterize_animation(
    mesh: &SurfaceMesh,
    camera: &Camera,
    frames: &[FrameSpec],
    scale: &ScaleSpec,
) -> Result<Vec<CoordinateMap>> {
    frames
        .par_iter()
        .map(|f| rasterize_coordmap(mesh, camera, f, scale))
        .collect()
}
