//! Color encoding of object-space coordinates into 16-bit channels and the
//! coordinate map, an image whose pixels store the surface point they see.
//!
//! Each axis maps linearly onto `[0, 65535]`:
//!
//! ```text
//! channel = round(65535 * (p - min) / range)      (half away from zero)
//! p       = channel * range / 65535 + min
//! ```
//!
//! The divisor is 65535, the largest representable channel value, so the
//! upper bound of the volume is encodable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Point3};

/// Largest 16-bit channel value.
pub const CHANNEL_MAX: f64 = 65535.0;

/// Points this far outside the encoded volume (relative to its size) are
/// clamped rather than rejected. Covers interpolation round-off only.
const VOLUME_SLACK: f64 = 1e-9;

const AXES: [char; 3] = ['x', 'y', 'z'];

/// Per-axis linear mapping between object-space coordinates and channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    min: [f64; 3],
    range: [f64; 3],
}

impl ScaleSpec {
    pub fn new(min: [f64; 3], range: [f64; 3]) -> Result<Self> {
        if min.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidScale(format!("non-finite minimum {min:?}")));
        }
        if range.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidScale(format!(
                "range must be finite and non-negative, got {range:?}"
            )));
        }
        Ok(Self { min, range })
    }

    /// Scale covering `bbox` grown by `margin * extent` on each side of every axis.
    pub fn from_bbox(bbox: &BoundingBox, margin: f64) -> Result<Self> {
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(Error::InvalidScale(format!("margin {margin} must be >= 0")));
        }
        let ext = bbox.extent();
        let mut min = [0.0; 3];
        let mut range = [0.0; 3];
        for i in 0..3 {
            min[i] = bbox.min[i] - margin * ext[i];
            range[i] = ext[i] * (1.0 + 2.0 * margin);
        }
        Self::new(min, range)
    }

    pub fn min(&self) -> [f64; 3] {
        self.min
    }

    pub fn range(&self) -> [f64; 3] {
        self.range
    }

    /// Decoding coefficients `(k_r, k_g, k_b)`: object units per channel step.
    pub fn coefficients(&self) -> [f64; 3] {
        self.range.map(|r| r / CHANNEL_MAX)
    }

    pub fn bounds(&self) -> BoundingBox {
        let lo = Point3::from_array(self.min);
        let hi = Point3::new(
            self.min[0] + self.range[0],
            self.min[1] + self.range[1],
            self.min[2] + self.range[2],
        );
        BoundingBox { min: lo, max: hi }
    }

    pub fn diagonal(&self) -> f64 {
        Point3::from_array(self.range).norm()
    }

    /// Whether `p` lies inside the encoded volume, up to round-off slack.
    pub fn covers(&self, p: Point3) -> bool {
        (0..3).all(|i| self.normalized_axis(i, p[i]).is_some())
    }

    /// Position of `v` along axis `i` in `[0, 1]`, clamped within slack.
    fn normalized_axis(&self, i: usize, v: f64) -> Option<f64> {
        let (min, range) = (self.min[i], self.range[i]);
        if !v.is_finite() {
            return None;
        }
        if range == 0.0 {
            let tol = VOLUME_SLACK * min.abs().max(1.0);
            return ((v - min).abs() <= tol).then_some(0.0);
        }
        let t = (v - min) / range;
        (-VOLUME_SLACK..=1.0 + VOLUME_SLACK)
            .contains(&t)
            .then(|| t.clamp(0.0, 1.0))
    }
}

/// Free-function form of [`ScaleSpec::from_bbox`].
pub fn scale_from_bbox(bbox: &BoundingBox, margin: f64) -> Result<ScaleSpec> {
    ScaleSpec::from_bbox(bbox, margin)
}

/// Encodes an in-volume point as three 16-bit channels.
pub fn encode_point(p: Point3, scale: &ScaleSpec) -> Result<[u16; 3]> {
    let mut out = [0u16; 3];
    for (i, ch) in out.iter_mut().enumerate() {
        let t = scale
            .normalized_axis(i, p[i])
            .ok_or(Error::OutsideEncodedVolume {
                axis: AXES[i],
                value: p[i],
            })?;
        // f64::round rounds half away from zero.
        *ch = (CHANNEL_MAX * t).round() as u16;
    }
    Ok(out)
}

/// Decodes three channels back to an object-space point.
pub fn decode_pixel(rgb: [u16; 3], scale: &ScaleSpec) -> Point3 {
    let k = scale.coefficients();
    let min = scale.min;
    Point3::new(
        rgb[0] as f64 * k[0] + min[0],
        rgb[1] as f64 * k[1] + min[1],
        rgb[2] as f64 * k[2] + min[2],
    )
}

/// 16-bit three-channel image plus a foreground mask. Background pixels
/// always carry channel value 0; the mask is authoritative.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMap {
    width: u32,
    height: u32,
    pixels: Vec<[u16; 3]>,
    mask: Vec<bool>,
    scale: ScaleSpec,
}

impl CoordinateMap {
    /// All-background map.
    pub fn empty(width: u32, height: u32, scale: ScaleSpec) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            pixels: vec![[0; 3]; n],
            mask: vec![false; n],
            scale,
        }
    }

    /// Row-major pixels and mask; channels under background pixels are zeroed.
    pub fn from_parts(
        width: u32,
        height: u32,
        mut pixels: Vec<[u16; 3]>,
        mask: Vec<bool>,
        scale: ScaleSpec,
    ) -> Result<Self> {
        let n = width as usize * height as usize;
        if pixels.len() != n || mask.len() != n {
            return Err(Error::InvalidMap(format!(
                "{}x{} map needs {n} pixels and mask entries, got {} and {}",
                width,
                height,
                pixels.len(),
                mask.len()
            )));
        }
        for (px, &fg) in pixels.iter_mut().zip(&mask) {
            if !fg {
                *px = [0; 3];
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
            mask,
            scale,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn scale(&self) -> &ScaleSpec {
        &self.scale
    }

    pub fn pixels(&self) -> &[[u16; 3]] {
        &self.pixels
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    fn index(&self, col: u32, row: u32) -> usize {
        row as usize * self.width as usize + col as usize
    }

    /// Channels of a foreground pixel, `None` for background.
    pub fn get(&self, col: u32, row: u32) -> Option<[u16; 3]> {
        let i = self.index(col, row);
        self.mask[i].then(|| self.pixels[i])
    }

    pub fn set(&mut self, col: u32, row: u32, rgb: [u16; 3]) {
        let i = self.index(col, row);
        self.pixels[i] = rgb;
        self.mask[i] = true;
    }

    pub fn clear(&mut self, col: u32, row: u32) {
        let i = self.index(col, row);
        self.pixels[i] = [0; 3];
        self.mask[i] = false;
    }

    pub fn is_foreground(&self, col: u32, row: u32) -> bool {
        self.mask[self.index(col, row)]
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Fraction of pixels covered by the surface.
    pub fn coverage(&self) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        self.foreground_count() as f64 / self.mask.len() as f64
    }

    /// Decoded object-space point under pixel `(col, row)`.
    pub fn point_at(&self, col: u32, row: u32) -> Option<Point3> {
        self.get(col, row).map(|rgb| decode_pixel(rgb, &self.scale))
    }

    /// Snaps continuous image coordinates to the nearest pixel center.
    pub fn pixel_at(&self, col: f64, row: f64) -> Option<(u32, u32)> {
        if !(col >= 0.0 && row >= 0.0) {
            return None;
        }
        let (c, r) = (col.floor(), row.floor());
        (c < self.width as f64 && r < self.height as f64).then_some((c as u32, r as u32))
    }
}

/// Looks up the surface point under a fixation. Returns `None` for
/// background pixels and positions outside the image.
pub fn lookup_fixation(map: &CoordinateMap, col: f64, row: f64) -> Option<Point3> {
    let (c, r) = map.pixel_at(col, row)?;
    map.point_at(c, r)
}
