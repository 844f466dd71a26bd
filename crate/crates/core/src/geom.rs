//! Planar and 3-D geometry helpers shared by the scenario and channel code.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// A position in metres; `z` is the height above ground.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn ground(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn distance(self, other: Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Axis-aligned rectangle. The boundary belongs to the rectangle but is
/// not part of its interior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min: x_min.min(x_max),
            y_min: y_min.min(y_max),
            x_max: x_min.max(x_max),
            y_max: y_min.max(y_max),
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn contains_strictly(&self, p: Point2) -> bool {
        p.x > self.x_min && p.x < self.x_max && p.y > self.y_min && p.y < self.y_max
    }

    /// Open-interior intersection test.
    pub fn interior_overlaps(&self, other: &Rect) -> bool {
        self.x_min < other.x_max
            && other.x_min < self.x_max
            && self.y_min < other.y_max
            && other.y_min < self.y_max
    }

    /// Whether the closed segment `a`-`b` passes through the open interior.
    ///
    /// Clips the segment against the closed rectangle (Liang-Barsky). A
    /// clipped piece of positive length whose midpoint lies on the boundary
    /// runs along an edge, so only the midpoint needs the strict test.
    pub fn segment_crosses_interior(&self, a: Point2, b: Point2) -> bool {
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        let checks = [
            (-dx, a.x - self.x_min),
            (dx, self.x_max - a.x),
            (-dy, a.y - self.y_min),
            (dy, self.y_max - a.y),
        ];
        for (p, q) in checks {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    if r > t1 {
                        return false;
                    }
                    t0 = t0.max(r);
                } else {
                    if r < t0 {
                        return false;
                    }
                    t1 = t1.min(r);
                }
            }
        }
        if t1 <= t0 {
            return false;
        }
        let mid = a.lerp(b, 0.5 * (t0 + t1));
        self.contains_strictly(mid)
    }
}

/// Open polyline through a list of vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Point2>,
}

impl Polyline {
    pub fn new(points: Vec<Point2>) -> Self {
        Self { points }
    }

    pub fn segment_count(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn segment_length(&self, index: usize) -> f64 {
        self.points[index].distance(self.points[index + 1])
    }

    pub fn length(&self) -> f64 {
        (0..self.segment_count())
            .map(|i| self.segment_length(i))
            .sum()
    }

    /// Point at arc length `s`, clamped to the ends.
    pub fn point_at(&self, s: f64) -> Point2 {
        let mut remaining = s.max(0.0);
        for i in 0..self.segment_count() {
            let len = self.segment_length(i);
            if remaining <= len {
                let t = if len > 0.0 { remaining / len } else { 0.0 };
                return self.points[i].lerp(self.points[i + 1], t);
            }
            remaining -= len;
        }
        *self.points.last().expect("polyline has no points")
    }

    /// Unit direction of the segment containing arc length `s`.
    pub fn direction_at(&self, s: f64) -> Point2 {
        let mut remaining = s.max(0.0);
        let n = self.segment_count();
        for i in 0..n {
            let len = self.segment_length(i);
            if remaining <= len || i + 1 == n {
                let a = self.points[i];
                let b = self.points[i + 1];
                return if len > 0.0 {
                    Point2::new((b.x - a.x) / len, (b.y - a.y) / len)
                } else {
                    Point2::new(1.0, 0.0)
                };
            }
            remaining -= len;
        }
        Point2::new(1.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block() -> Rect {
        Rect::new(0.0, 0.0, 10.0, 10.0)
    }

    #[test]
    fn segment_through_middle_crosses() {
        assert!(block().segment_crosses_interior(Point2::new(-5.0, 5.0), Point2::new(15.0, 5.0)));
    }

    #[test]
    fn segment_along_edge_does_not_cross() {
        assert!(!block().segment_crosses_interior(Point2::new(-5.0, 0.0), Point2::new(15.0, 0.0)));
        assert!(!block().segment_crosses_interior(Point2::new(10.0, -3.0), Point2::new(10.0, 30.0)));
    }

    #[test]
    fn segment_touching_corner_does_not_cross() {
        assert!(!block().segment_crosses_interior(Point2::new(-5.0, -5.0), Point2::new(0.0, 0.0)));
        assert!(!block().segment_crosses_interior(Point2::new(-5.0, 5.0), Point2::new(5.0, -5.0)));
    }

    #[test]
    fn segment_starting_on_edge_going_inward_crosses() {
        assert!(block().segment_crosses_interior(Point2::new(5.0, 10.0), Point2::new(5.0, -10.0)));
    }

    #[test]
    fn polyline_point_and_direction() {
        let pl = Polyline::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(10.0, 5.0),
        ]);
        assert_eq!(pl.length(), 15.0);
        assert_eq!(pl.point_at(12.0), Point2::new(10.0, 2.0));
        assert_eq!(pl.direction_at(3.0), Point2::new(1.0, 0.0));
        assert_eq!(pl.direction_at(12.0), Point2::new(0.0, 1.0));
        assert_eq!(pl.point_at(99.0), Point2::new(10.0, 5.0));
    }
}
