use serde::{Deserialize, Serialize};

use crate::Vec2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(&'static str),
    #[error("limit positions do not exist (arccos argument {0:.6})")]
    NoLimitPositions(f64),
    #[error("nonpositive length {0}")]
    NonPositiveLength(f64),
}

/// Convex polygon with counter-clockwise vertex order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    pub fn new(points: &[[f64; 2]]) -> Result<Self, GeometryError> {
        if points.len() < 3 {
            return Err(GeometryError::DegeneratePolygon("fewer than 3 vertices"));
        }
        let mut vertices: Vec<Vec2> = points.iter().map(|p| Vec2::new(p[0], p[1])).collect();
        let n = vertices.len();
        let area2: f64 = (0..n)
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                a.x * b.y - a.y * b.x
            })
            .sum();
        if area2.abs() < 1e-12 {
            return Err(GeometryError::DegeneratePolygon("zero area"));
        }
        if area2 < 0.0 {
            vertices.reverse();
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).norm() < 1e-12 {
                return Err(GeometryError::DegeneratePolygon("repeated vertex"));
            }
            if cross(b - a, c - b) < -1e-12 {
                return Err(GeometryError::DegeneratePolygon("not convex"));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    /// Euclidean distance to the boundary, positive outside and negative inside.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        let n = self.vertices.len();
        let mut outside = false;
        let mut dmin = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b - a;
            let len = e.norm();
            // outward normal of a ccw edge is (ey, -ex)
            let c = cross(e, p - a) / len;
            if c < 0.0 {
                outside = true;
            }
            let t = (p - a).dot(&e) / (len * len);
            let d = if t <= 0.0 {
                (p - a).norm()
            } else if t >= 1.0 {
                (p - b).norm()
            } else {
                c.abs()
            };
            dmin = dmin.min(d);
        }
        if outside {
            dmin
        } else {
            -dmin
        }
    }
}

pub(crate) fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> ConvexPolygon {
        ConvexPolygon::new(&[[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]).unwrap()
    }

    #[test]
    fn inside_boundary_outside() {
        let sq = square();
        assert!((sq.signed_distance(Vec2::new(0.0, 0.0)) + 1.0).abs() < 1e-15);
        assert_eq!(sq.signed_distance(Vec2::new(1.0, 0.2)), 0.0);
        assert!((sq.signed_distance(Vec2::new(1.3, 0.0)) - 0.3).abs() < 1e-15);
        assert!((sq.signed_distance(Vec2::new(2.0, 2.0)) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let cw = ConvexPolygon::new(&[[-1.0, 1.0], [1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]]).unwrap();
        assert!(cw.signed_distance(Vec2::zeros()) < 0.0);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(ConvexPolygon::new(&[[0.0, 0.0], [1.0, 0.0]]).is_err());
        assert!(ConvexPolygon::new(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        assert!(ConvexPolygon::new(&[[0.0, 0.0], [2.0, 0.0], [0.5, 0.5], [0.0, 2.0]]).is_err());
    }
}
