use super::{BoundingBox, Point3, RigidTransform};
use crate::error::{Error, Result};

/// Indexed triangle mesh with optional per-vertex colors and region labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurfaceMesh {
    vertices: Vec<Point3>,
    faces: Vec<[u32; 3]>,
    vertex_colors: Option<Vec<[f64; 3]>>,
    region_labels: Option<Vec<i32>>,
}

impl SurfaceMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
        }
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i as usize >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references a vertex beyond {n}"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} is degenerate: {f:?}")));
            }
        }
        Ok(Self {
            vertices,
            faces,
            vertex_colors: None,
            region_labels: None,
        })
    }

    pub fn with_vertex_colors(mut self, colors: Vec<[f64; 3]>) -> Result<Self> {
        if colors.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} colors for {} vertices",
                colors.len(),
                self.vertices.len()
            )));
        }
        if colors.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidMesh("vertex color outside [0, 1]".into()));
        }
        self.vertex_colors = Some(colors);
        Ok(self)
    }

    pub fn with_region_labels(mut self, labels: Vec<i32>) -> Result<Self> {
        if labels.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} region labels for {} vertices",
                labels.len(),
                self.vertices.len()
            )));
        }
        self.region_labels = Some(labels);
        Ok(self)
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn vertex_colors(&self) -> Option<&[[f64; 3]]> {
        self.vertex_colors.as_deref()
    }

    pub fn region_labels(&self) -> Option<&[i32]> {
        self.region_labels.as_deref()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        self.faces[face].map(|i| self.vertices[i as usize])
    }

    /// Copy with every vertex moved by `t`; colors and labels carry over.
    pub fn transformed(&self, t: &RigidTransform) -> SurfaceMesh {
        SurfaceMesh {
            vertices: self.vertices.iter().map(|&v| t.apply(v)).collect(),
            ..self.clone()
        }
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                0.5 * (b - a).cross(c - a).norm()
            })
            .sum()
    }
}

/// Tight axis-aligned bound of the mesh vertices.
pub fn mesh_bbox(mesh: &SurfaceMesh) -> Result<BoundingBox> {
    BoundingBox::from_points(mesh.vertices().iter().copied())
}
