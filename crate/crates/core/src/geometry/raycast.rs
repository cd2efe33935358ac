//! Brute-force nearest-hit ray casting, used as the reference against which
//! coordinate-map lookups are validated.

use super::{BoundingBox, Camera, Point3, SurfaceMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point3,
    pub direction: Point3,
}

impl Ray {
    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.direction * t
    }

    /// Euclidean distance from `p` to the ray's supporting half-line.
    pub fn distance_to(&self, p: Point3) -> f64 {
        let d2 = self.direction.norm_squared();
        let t = ((p - self.origin).dot(self.direction) / d2).max(0.0);
        p.distance(self.at(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub point: Point3,
    pub face: usize,
    /// Ray parameter of the hit (in units of the ray direction).
    pub t: f64,
}

/// Nearest intersection of the camera ray through `(col, row)` with `mesh`,
/// in front of the camera. Equal-depth ties go to the lowest face index.
pub fn ray_cast(mesh: &SurfaceMesh, camera: &Camera, col: f64, row: f64) -> Option<RayHit> {
    intersect_mesh(mesh, &camera.ray_through(col, row))
}

pub(crate) fn intersect_mesh(mesh: &SurfaceMesh, ray: &Ray) -> Option<RayHit> {
    let bbox = BoundingBox::from_points(mesh.vertices().iter().copied()).ok()?;
    if !ray_hits_box(ray, &bbox) {
        return None;
    }
    let prep = WatertightRay::new(ray);
    let mut best: Option<RayHit> = None;
    for face in 0..mesh.faces().len() {
        let tri = mesh.triangle(face);
        if let Some((t, bary)) = prep.intersect(tri) {
            if best.is_none_or(|b| t < b.t) {
                // Barycentric blend keeps the hit on the triangle's plane.
                let point = tri[0] * bary[0] + tri[1] * bary[1] + tri[2] * bary[2];
                best = Some(RayHit { point, face, t });
            }
        }
    }
    best
}

fn ray_hits_box(ray: &Ray, b: &BoundingBox) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for axis in 0..3 {
        let o = ray.origin[axis];
        let d = ray.direction[axis];
        let (lo, hi) = (b.min[axis], b.max[axis]);
        // Pad slightly so flat boxes and grazing rays are not rejected.
        let pad = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
        if d == 0.0 {
            if o < lo - pad || o > hi + pad {
                return false;
            }
            continue;
        }
        let inv = 1.0 / d;
        let (mut ta, mut tb) = ((lo - pad - o) * inv, (hi + pad - o) * inv);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Ray pre-transformed into the shear space of the watertight ray/triangle
/// test: the dominant direction axis becomes z and the ray becomes the +z
/// axis, so the edge functions are evaluated in 2D.
struct WatertightRay {
    origin: Point3,
    kx: usize,
    ky: usize,
    kz: usize,
    sx: f64,
    sy: f64,
    sz: f64,
}

impl WatertightRay {
    fn new(ray: &Ray) -> Self {
        let d = ray.direction;
        let abs = [d.x.abs(), d.y.abs(), d.z.abs()];
        let kz = if abs[0] >= abs[1] && abs[0] >= abs[2] {
            0
        } else if abs[1] >= abs[2] {
            1
        } else {
            2
        };
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if d[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        Self {
            origin: ray.origin,
            kx,
            ky,
            kz,
            sx: d[kx] / d[kz],
            sy: d[ky] / d[kz],
            sz: 1.0 / d[kz],
        }
    }

    /// Returns the ray parameter and barycentric weights of the hit.
    fn intersect(&self, [a, b, c]: [Point3; 3]) -> Option<(f64, [f64; 3])> {
        let (kx, ky, kz) = (self.kx, self.ky, self.kz);
        let a = a - self.origin;
        let b = b - self.origin;
        let c = c - self.origin;
        let ax = a[kx] - self.sx * a[kz];
        let ay = a[ky] - self.sy * a[kz];
        let bx = b[kx] - self.sx * b[kz];
        let by = b[ky] - self.sy * b[kz];
        let cx = c[kx] - self.sx * c[kz];
        let cy = c[ky] - self.sy * c[kz];

        let u = cx * by - cy * bx;
        let v = ax * cy - ay * cx;
        let w = bx * ay - by * ax;
        if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
            return None;
        }
        let det = u + v + w;
        if det == 0.0 {
            return None;
        }
        let az = self.sz * a[kz];
        let bz = self.sz * b[kz];
        let cz = self.sz * c[kz];
        let t_scaled = u * az + v * bz + w * cz;
        if (det < 0.0 && t_scaled >= 0.0) || (det > 0.0 && t_scaled <= 0.0) {
            return None;
        }
        let inv = 1.0 / det;
        Some((t_scaled * inv, [u * inv, v * inv, w * inv]))
    }
}
