//! Reprojection of timestamped screen fixations through per-frame coordinate
//! maps into a 3D fixation cloud, and reconstruction of the visible surface.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::coordmap::{decode_pixel, lookup_fixation, CoordinateMap};
use crate::error::{Error, Result};
use crate::geometry::{Point3, SurfaceMesh};

/// Experimental condition a fixation was recorded under.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct ConditionLabels {
    pub question: String,
    pub model: String,
    pub material: String,
}

impl ConditionLabels {
    pub fn new(question: &str, model: &str, material: &str) -> Self {
        Self {
            question: question.into(),
            model: model.into(),
            material: material.into(),
        }
    }

    /// `question/model/material`, used as a report key.
    pub fn key(&self) -> String {
        format!("{}/{}/{}", self.question, self.model, self.material)
    }
}

/// One fixation event in screen space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixationRecord {
    /// Seconds since stimulus onset.
    pub timestamp: f64,
    pub col: f64,
    pub row: f64,
    /// Seconds.
    pub duration: Option<f64>,
    pub observer_id: String,
    pub condition: ConditionLabels,
}

impl FixationRecord {
    pub fn new(timestamp: f64, col: f64, row: f64, observer_id: &str) -> Self {
        Self {
            timestamp,
            col,
            row,
            duration: None,
            observer_id: observer_id.into(),
            condition: ConditionLabels::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub observer_id: String,
    pub timestamp: f64,
    pub frame_index: u32,
}

/// Reprojected fixations in object space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixationCloud3D {
    points: Vec<Point3>,
    weights: Vec<f64>,
    provenance: Vec<Provenance>,
    /// Fixations that hit background or fell outside the image.
    pub dropped_count: usize,
}

impl FixationCloud3D {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unit-weight cloud without provenance details.
    pub fn from_points(points: Vec<Point3>) -> Self {
        let n = points.len();
        Self {
            points,
            weights: vec![1.0; n],
            provenance: vec![
                Provenance {
                    observer_id: String::new(),
                    timestamp: 0.0,
                    frame_index: 0,
                };
                n
            ],
            dropped_count: 0,
        }
    }

    pub fn push(&mut self, point: Point3, weight: f64, provenance: Provenance) -> Result<()> {
        if !point.is_finite() {
            return Err(Error::InvalidFixation("non-finite point".into()));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidFixation(format!("weight {weight} must be > 0")));
        }
        self.points.push(point);
        self.weights.push(weight);
        self.provenance.push(provenance);
        Ok(())
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Appends `other` after `self`, keeping input order.
    pub fn extend(&mut self, other: FixationCloud3D) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
        self.provenance.extend(other.provenance);
        self.dropped_count += other.dropped_count;
    }

    /// Same cloud with every weight multiplied by `factor`.
    pub fn scaled_weights(&self, factor: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Playback {
    /// Hold the last frame once the animation ends.
    #[default]
    Clamp,
    Loop,
    /// Play forward then backward.
    Pingpong,
}

impl std::str::FromStr for Playback {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "clamp" => Ok(Playback::Clamp),
            "loop" => Ok(Playback::Loop),
            "pingpong" => Ok(Playback::Pingpong),
            other => Err(format!("unknown playback {other:?} (clamp | loop | pingpong)")),
        }
    }
}

/// How fixation timestamps map onto animation frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSchedule {
    pub fps: f64,
    pub frame_count: u32,
    pub playback: Playback,
}

impl FrameSchedule {
    pub fn new(fps: f64, frame_count: u32, playback: Playback) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidSchedule(format!("fps {fps} must be finite and > 0")));
        }
        if frame_count == 0 {
            return Err(Error::InvalidSchedule("frame count must be >= 1".into()));
        }
        Ok(Self {
            fps,
            frame_count,
            playback,
        })
    }
}

/// Frame shown at time `t` seconds (`t >= 0`).
pub fn select_frame(t: f64, schedule: &FrameSchedule) -> u32 {
    let n = schedule.frame_count.max(1) as u64;
    let raw = (t * schedule.fps).floor().max(0.0);
    // Saturating float-to-int conversion.
    let raw = raw as u64;
    let k = match schedule.playback {
        Playback::Clamp => raw.min(n - 1),
        Playback::Loop => raw % n,
        Playback::Pingpong => {
            if n == 1 {
                0
            } else {
                let period = 2 * (n - 1);
                let m = raw % period;
                if m < n {
                    m
                } else {
                    period - m
                }
            }
        }
    };
    k as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProjectionOptions {
    /// Weight hits by fixation duration instead of counting them.
    pub duration_weighting: bool,
}

/// Reprojects each fixation through the map of the frame on screen at its
/// timestamp. Misses (background, off-image, zero-duration when weighting
/// by duration) are counted in `dropped_count`.
pub fn project_fixations(
    fixations: &[FixationRecord],
    maps: &[CoordinateMap],
    schedule: &FrameSchedule,
    options: ProjectionOptions,
) -> Result<FixationCloud3D> {
    if maps.len() != schedule.frame_count as usize {
        return Err(Error::MapCountMismatch {
            maps: maps.len(),
            frames: schedule.frame_count as usize,
        });
    }
    if let Some(first) = maps.first() {
        if maps.iter().any(|m| m.scale() != first.scale()) {
            return Err(Error::MixedScales);
        }
    }
    let mut cloud = FixationCloud3D::new();
    for (i, fx) in fixations.iter().enumerate() {
        if !(fx.timestamp >= 0.0 && fx.timestamp.is_finite()) {
            return Err(Error::InvalidFixation(format!(
                "fixation {i} has timestamp {}",
                fx.timestamp
            )));
        }
        if fx.duration.is_some_and(|d| !(d >= 0.0)) {
            return Err(Error::InvalidFixation(format!("fixation {i} has negative duration")));
        }
        let frame = select_frame(fx.timestamp, schedule);
        let weight = match (options.duration_weighting, fx.duration) {
            (true, Some(d)) => d,
            _ => 1.0,
        };
        match lookup_fixation(&maps[frame as usize], fx.col, fx.row) {
            Some(p) if weight > 0.0 => cloud.push(
                p,
                weight,
                Provenance {
                    observer_id: fx.observer_id.clone(),
                    timestamp: fx.timestamp,
                    frame_index: frame,
                },
            )?,
            _ => cloud.dropped_count += 1,
        }
    }
    Ok(cloud)
}

/// One decoded point per foreground pixel, row-major.
pub fn reconstruct_cloud(map: &CoordinateMap) -> Vec<Point3> {
    map.pixels()
        .iter()
        .zip(map.mask())
        .filter(|(_, &fg)| fg)
        .map(|(&rgb, _)| decode_pixel(rgb, map.scale()))
        .collect()
}

/// Default edge-length threshold for [`triangulate_coordmap`]: 2% of the
/// encoded volume's diagonal.
pub fn default_depth_break(map: &CoordinateMap) -> f64 {
    0.02 * map.scale().diagonal()
}

/// Grid triangulation of the foreground pixels. Each 2x2 block gives up to
/// two triangles; triangles with an edge longer than `depth_break` (in object
/// units) are dropped so silhouettes and depth jumps are not bridged.
/// Only vertices used by some triangle are kept, in row-major pixel order.
pub fn triangulate_coordmap(map: &CoordinateMap, depth_break: f64) -> Result<SurfaceMesh> {
    if !(depth_break > 0.0) {
        return Err(Error::InvalidMap(format!("depth break {depth_break} must be > 0")));
    }
    let (w, h) = (map.width(), map.height());
    let ok = |a: Point3, b: Point3| a.distance(b) <= depth_break;
    let mut tris: Vec<[(u32, u32); 3]> = Vec::new();
    for r in 0..h.saturating_sub(1) {
        for c in 0..w.saturating_sub(1) {
            // Corners: a b / d e (top-left, top-right, bottom-left, bottom-right).
            let px = [(c, r), (c + 1, r), (c, r + 1), (c + 1, r + 1)];
            let pts = px.map(|(x, y)| map.point_at(x, y));
            let [a, b, d, e] = pts;
            let mut emit = |i: usize, j: usize, k: usize| {
                if let (Some(p), Some(q), Some(s)) = (pts[i], pts[j], pts[k]) {
                    if ok(p, q) && ok(q, s) && ok(s, p) {
                        tris.push([px[i], px[j], px[k]]);
                    }
                }
            };
            match (a.is_some(), b.is_some(), d.is_some(), e.is_some()) {
                (true, true, true, true) => {
                    // Split along the shorter diagonal.
                    let (a, b, d, e) = (a.unwrap(), b.unwrap(), d.unwrap(), e.unwrap());
                    if a.distance(e) <= b.distance(d) {
                        emit(0, 2, 3);
                        emit(0, 3, 1);
                    } else {
                        emit(0, 2, 1);
                        emit(1, 2, 3);
                    }
                }
                (false, true, true, true) => emit(1, 2, 3),
                (true, false, true, true) => emit(0, 2, 3),
                (true, true, false, true) => emit(0, 3, 1),
                (true, true, true, false) => emit(0, 2, 1),
                _ => {}
            }
        }
    }

    let mut used: Vec<(u32, u32)> = tris.iter().flatten().copied().collect();
    used.sort_unstable_by_key(|&(c, r)| (r, c));
    used.dedup();
    let index: HashMap<(u32, u32), u32> =
        used.iter().enumerate().map(|(i, &p)| (p, i as u32)).collect();
    let vertices = used
        .iter()
        .map(|&(c, r)| map.point_at(c, r).expect("foreground pixel"))
        .collect();
    let faces = tris.iter().map(|t| t.map(|p| index[&p])).collect();
    SurfaceMesh::new(vertices, faces)
}
