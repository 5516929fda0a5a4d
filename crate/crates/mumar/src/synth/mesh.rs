use nalgebra::Unit;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, RigidTransform, UnitVector3, Vector3};

/// The polyhedra used as markers and as test objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerShape {
    /// Six square faces, edge = `size`, resting on z = 0.
    Cube,
    /// Square base (edge = `size`) on z = 0, apex at height `size`:
    /// four slanted faces plus the base.
    Pyramid,
    /// Two pyramids joined tip-to-tip (an hourglass), point-symmetric about
    /// the shared tip at height `size`. Eight slanted faces; the top and
    /// bottom squares are open.
    DoublePyramid,
}

impl MarkerShape {
    pub fn as_str(&self) -> &'static str {
        match self {
            MarkerShape::Cube => "cube",
            MarkerShape::Pyramid => "pyramid",
            MarkerShape::DoublePyramid => "double_pyramid",
        }
    }
}

/// An indexed triangle mesh whose triangles are grouped into planar faces.
///
/// Triangles are wound counter-clockwise seen from outside, so
/// [`TriangleMesh::triangle_normal`] is the outward face normal.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    /// Planar-face id per triangle.
    pub face_ids: Vec<u32>,
}

/// Builds the canonical mesh for a shape, sitting on the z = 0 plane and
/// centred on the z axis. `size` is the edge length of the cube or of the
/// square base; pyramids are as tall as their base is wide.
pub fn generate_mesh(shape: MarkerShape, size: f64) -> TriangleMesh {
    assert!(size > 0.0, "mesh size must be positive");
    let h = size / 2.0;
    let mut mesh = TriangleMesh {
        vertices: Vec::new(),
        triangles: Vec::new(),
        face_ids: Vec::new(),
    };
    match shape {
        MarkerShape::Cube => {
            for (x, y, z) in [
                (-h, -h, 0.0),
                (h, -h, 0.0),
                (h, h, 0.0),
                (-h, h, 0.0),
                (-h, -h, size),
                (h, -h, size),
                (h, h, size),
                (-h, h, size),
            ] {
                mesh.vertices.push(Point3::new(x, y, z));
            }
            mesh.push_quad([1, 2, 6, 5], 0); // +x
            mesh.push_quad([0, 4, 7, 3], 1); // -x
            mesh.push_quad([2, 3, 7, 6], 2); // +y
            mesh.push_quad([0, 1, 5, 4], 3); // -y
            mesh.push_quad([4, 5, 6, 7], 4); // top
            mesh.push_quad([0, 3, 2, 1], 5); // bottom
        }
        MarkerShape::Pyramid => {
            for (x, y, z) in [
                (-h, -h, 0.0),
                (h, -h, 0.0),
                (h, h, 0.0),
                (-h, h, 0.0),
                (0.0, 0.0, size),
            ] {
                mesh.vertices.push(Point3::new(x, y, z));
            }
            for side in 0..4u32 {
                let a = side as usize;
                let b = (a + 1) % 4;
                mesh.push_triangle([a, b, 4], side);
            }
            mesh.push_quad([0, 3, 2, 1], 4); // base
        }
        MarkerShape::DoublePyramid => {
            // Lower base ring, shared tip, upper base ring (the reflection of
            // the lower ring through the tip).
            for (x, y, z) in [
                (-h, -h, 0.0),
                (h, -h, 0.0),
                (h, h, 0.0),
                (-h, h, 0.0),
                (0.0, 0.0, size),
            ] {
                mesh.vertices.push(Point3::new(x, y, z));
            }
            for i in 0..4 {
                let b = mesh.vertices[i];
                mesh.vertices.push(Point3::new(-b.x, -b.y, 2.0 * size));
            }
            for side in 0..4u32 {
                let a = side as usize;
                let b = (a + 1) % 4;
                mesh.push_triangle([a, b, 4], side);
                // Mirror image of the lower face: tip first, ring reversed.
                mesh.push_triangle([4, 5 + b, 5 + a], 4 + side);
            }
        }
    }
    mesh
}

impl TriangleMesh {
    fn push_triangle(&mut self, tri: [usize; 3], face: u32) {
        self.triangles.push(tri);
        self.face_ids.push(face);
    }

    fn push_quad(&mut self, q: [usize; 4], face: u32) {
        self.push_triangle([q[0], q[1], q[2]], face);
        self.push_triangle([q[0], q[2], q[3]], face);
    }

    pub fn n_faces(&self) -> usize {
        self.face_ids.iter().map(|&f| f as usize + 1).max().unwrap_or(0)
    }

    pub fn corners(&self, tri: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[tri];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.corners(tri);
        (b - a).cross(&(c - a)).norm() / 2.0
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Outward unit normal of a triangle (winding order is outward).
    pub fn triangle_normal(&self, tri: usize) -> UnitVector3 {
        let [a, b, c] = self.corners(tri);
        Unit::new_normalize((b - a).cross(&(c - a)))
    }

    /// Outward normal of a planar face (all its triangles agree).
    pub fn face_normal(&self, face: u32) -> UnitVector3 {
        let tri = self
            .face_ids
            .iter()
            .position(|&f| f == face)
            .expect("face id exists");
        self.triangle_normal(tri)
    }

    pub fn face_centroid(&self, face: u32) -> Point3 {
        let mut acc = Vector3::zeros();
        let mut weight = 0.0;
        for (t, &f) in self.face_ids.iter().enumerate() {
            if f == face {
                let [a, b, c] = self.corners(t);
                let area = self.triangle_area(t);
                acc += (a.coords + b.coords + c.coords) / 3.0 * area;
                weight += area;
            }
        }
        Point3::from(acc / weight)
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| t.transform_point(v)).collect(),
            triangles: self.triangles.clone(),
            face_ids: self.face_ids.clone(),
        }
    }

    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }

    /// Unsigned distance from `p` to the closest point of the surface.
    pub fn point_distance(&self, p: &Point3) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                (closest_point_on_triangle(p, &a, &b, &c) - p).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk over the
/// barycentric expression).
pub fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Möller–Trumbore segment/triangle test: does the open segment
/// `origin + t·dir, t ∈ (t_min, t_max)` cross the triangle?
pub fn segment_hits_triangle(
    origin: &Point3,
    dir: &Vector3,
    a: &Point3,
    b: &Point3,
    c: &Point3,
    t_min: f64,
    t_max: f64,
) -> bool {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-13 {
        return false; // parallel
    }
    let inv_det = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    let t = e2.dot(&qvec) * inv_det;
    t > t_min && t < t_max
}
