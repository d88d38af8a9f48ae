//! Planar geometry for the attenuation model and the detector-network prior.
//!
//! Buildings are simple polygons stored counter-clockwise. Ray attenuation
//! needs the length of a source-to-detector segment inside each building,
//! which [`BuildingPolygon::chord_length`] computes by splitting the segment
//! at every edge crossing and keeping the sub-intervals whose midpoint lies
//! strictly inside the polygon. Grazing contacts (along an edge or through a
//! vertex) therefore contribute a zero-length chord.

use std::ops::{Add, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute geometric tolerance in meters.
pub const GEOM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn distance_sq(self, o: Point2) -> f64 {
        let d = self - o;
        d.dot(d)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Orientation of `p` relative to the directed line `o -> a`; positive when
/// `p` is to the left.
fn orient(o: Point2, a: Point2, p: Point2) -> f64 {
    (a - o).cross(p - o)
}

/// Distance from `p` to the closed segment `a-b`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    p.distance(a + d * t)
}

/// Minimum distance between two closed segments.
pub fn segment_distance(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> f64 {
    let o1 = orient(a0, a1, b0);
    let o2 = orient(a0, a1, b1);
    let o3 = orient(b0, b1, a0);
    let o4 = orient(b0, b1, a1);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return 0.0;
    }
    point_segment_distance(b0, a0, a1)
        .min(point_segment_distance(b1, a0, a1))
        .min(point_segment_distance(a0, b0, b1))
        .min(point_segment_distance(a1, b0, b1))
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        if ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("bounds"));
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::DegenerateInput(format!(
                "empty bounds [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(b)
    }

    fn around(points: &[Point2]) -> Self {
        let mut b = Self {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for p in points {
            b.x_min = b.x_min.min(p.x);
            b.x_max = b.x_max.max(p.x);
            b.y_min = b.y_min.min(p.y);
            b.y_max = b.y_max.max(p.y);
        }
        b
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    /// Inclusive containment.
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    fn overlaps_segment(&self, a: Point2, b: Point2, tol: f64) -> bool {
        a.x.max(b.x) >= self.x_min - tol
            && a.x.min(b.x) <= self.x_max + tol
            && a.y.max(b.y) >= self.y_min - tol
            && a.y.min(b.y) <= self.y_max + tol
    }

    fn overlaps(&self, o: &Bounds) -> bool {
        self.x_min <= o.x_max && o.x_min <= self.x_max && self.y_min <= o.y_max && o.y_min <= self.y_max
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        Point2::new(
            self.x_min + self.width() * rng.random::<f64>(),
            self.y_min + self.height() * rng.random::<f64>(),
        )
    }
}

/// Source intensity interval `[min, max]` in Bq.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityRange {
    pub min: f64,
    pub max: f64,
}

impl IntensityRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::NonFinite("intensity range"));
        }
        if min <= 0.0 || min >= max {
            return Err(Error::DegenerateInput(format!(
                "intensity range [{min}, {max}] must satisfy 0 < min < max"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, i: f64) -> bool {
        i >= self.min && i <= self.max
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.min + self.width() * rng.random::<f64>()
    }
}

/// A homogeneous building footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingPolygon {
    vertices: Vec<Point2>,
    mean_free_path: f64,
    bbox: Bounds,
}

impl BuildingPolygon {
    /// Validates and normalizes to counter-clockwise order. A repeated
    /// closing vertex is accepted and dropped.
    pub fn new(mut vertices: Vec<Point2>, mean_free_path: f64) -> Result<Self> {
        if !mean_free_path.is_finite() || mean_free_path <= 0.0 {
            return Err(Error::DegenerateInput(format!(
                "mean free path must be positive, got {mean_free_path}"
            )));
        }
        if vertices.len() > 3 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::DegenerateInput(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if !vertices.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFinite("polygon vertex"));
        }
        let area = signed_area(&vertices);
        if area.abs() <= GEOM_TOL {
            return Err(Error::DegenerateInput("polygon has zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let (a0, a1) = (vertices[i], vertices[(i + 1) % n]);
            if a0.distance(a1) <= GEOM_TOL {
                return Err(Error::DegenerateInput(format!("repeated vertex at index {i}")));
            }
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (b0, b1) = (vertices[j], vertices[(j + 1) % n]);
                if segment_distance(a0, a1, b0, b1) <= GEOM_TOL {
                    return Err(Error::DegenerateInput(format!(
                        "polygon is not simple: edges {i} and {j} intersect"
                    )));
                }
            }
        }
        let bbox = Bounds::around(&vertices);
        Ok(Self {
            vertices,
            mean_free_path,
            bbox,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn mean_free_path(&self) -> f64 {
        self.mean_free_path
    }

    pub fn bbox(&self) -> &Bounds {
        &self.bbox
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn on_boundary(&self, p: Point2) -> bool {
        self.edges()
            .any(|(a, b)| point_segment_distance(p, a, b) <= GEOM_TOL)
    }

    // Even-odd crossing test; boundary points land on either side.
    fn crossing_inside(&self, p: Point2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Interior or boundary.
    pub fn contains(&self, p: Point2) -> bool {
        if !self.bbox.overlaps_segment(p, p, GEOM_TOL) {
            return false;
        }
        self.on_boundary(p) || self.crossing_inside(p)
    }

    /// Interior only, at least [`GEOM_TOL`] from every edge.
    pub fn contains_strict(&self, p: Point2) -> bool {
        self.bbox.overlaps_segment(p, p, 0.0) && !self.on_boundary(p) && self.crossing_inside(p)
    }

    /// Length of the closed segment `a-b` lying strictly inside the polygon.
    pub fn chord_length(&self, a: Point2, b: Point2) -> f64 {
        if !self.bbox.overlaps_segment(a, b, GEOM_TOL) {
            return 0.0;
        }
        let d = b - a;
        let len = d.norm();
        if len <= GEOM_TOL {
            return 0.0;
        }
        let tol_t = GEOM_TOL / len;
        let mut ts = vec![0.0, 1.0];
        for (p, q) in self.edges() {
            let e = q - p;
            let denom = d.cross(e);
            let ap = p - a;
            if denom.abs() > 1e-12 * len * e.norm() {
                let t = ap.cross(e) / denom;
                let s = ap.cross(d) / denom;
                let tol_s = GEOM_TOL / e.norm();
                if (-tol_s..=1.0 + tol_s).contains(&s) && (-tol_t..=1.0 + tol_t).contains(&t) {
                    ts.push(t.clamp(0.0, 1.0));
                }
            } else if ap.cross(d).abs() <= GEOM_TOL * len {
                // Collinear edge: its endpoints split the segment; the
                // overlapping piece is on the boundary and scores zero below.
                for v in [p, q] {
                    let t = (v - a).dot(d) / (len * len);
                    if (0.0..=1.0).contains(&t) {
                        ts.push(t);
                    }
                }
            }
        }
        ts.sort_by(f64::total_cmp);
        let mut inside_t = 0.0;
        for w in ts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            if t1 - t0 <= 0.0 {
                continue;
            }
            let mid = a + d * (0.5 * (t0 + t1));
            if self.contains_strict(mid) {
                inside_t += t1 - t0;
            }
        }
        inside_t * len
    }

    /// True when the closed segment touches the polygon anywhere, including
    /// its boundary.
    pub fn touches_segment(&self, a: Point2, b: Point2) -> bool {
        if !self.bbox.overlaps_segment(a, b, GEOM_TOL) {
            return false;
        }
        self.edges()
            .any(|(p, q)| segment_distance(a, b, p, q) <= GEOM_TOL)
            || self.contains(a)
    }
}

fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    0.5 * (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum::<f64>()
}

/// Simulation domain: bounds, attenuating buildings and the admissible
/// source-intensity interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    bounds: Bounds,
    buildings: Vec<BuildingPolygon>,
    intensity_range: IntensityRange,
}

impl Scene {
    pub fn new(
        bounds: Bounds,
        buildings: Vec<BuildingPolygon>,
        intensity_range: IntensityRange,
    ) -> Result<Self> {
        for (i, b) in buildings.iter().enumerate() {
            if !b.vertices.iter().all(|&v| bounds.contains(v)) {
                return Err(Error::DegenerateInput(format!(
                    "building {i} extends outside the scene bounds"
                )));
            }
        }
        for i in 0..buildings.len() {
            for j in (i + 1)..buildings.len() {
                if buildings_touch(&buildings[i], &buildings[j]) {
                    return Err(Error::DegenerateInput(format!(
                        "buildings {i} and {j} overlap"
                    )));
                }
            }
        }
        Ok(Self {
            bounds,
            buildings,
            intensity_range,
        })
    }

    /// Open field: no buildings.
    pub fn open(bounds: Bounds, intensity_range: IntensityRange) -> Self {
        Self {
            bounds,
            buildings: Vec::new(),
            intensity_range,
        }
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn buildings(&self) -> &[BuildingPolygon] {
        &self.buildings
    }

    pub fn intensity_range(&self) -> &IntensityRange {
        &self.intensity_range
    }

    /// Per-building chord lengths of segment `a-b`; buildings with a zero
    /// chord are omitted.
    pub fn chord_lengths(&self, a: Point2, b: Point2) -> Result<Vec<(usize, f64)>> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite("segment endpoint"));
        }
        if a.distance(b) <= GEOM_TOL {
            return Err(Error::DegenerateInput("segment endpoints coincide".into()));
        }
        Ok(self
            .buildings
            .iter()
            .enumerate()
            .filter_map(|(i, bld)| {
                let l = bld.chord_length(a, b);
                (l > 0.0).then_some((i, l))
            })
            .collect())
    }

    /// Total optical depth `sum(l_h / lambda_h)` along `a-b`; zero for a
    /// degenerate segment.
    pub fn optical_depth(&self, a: Point2, b: Point2) -> f64 {
        self.buildings
            .iter()
            .map(|bld| bld.chord_length(a, b) / bld.mean_free_path)
            .sum()
    }

    /// Index of the first building containing `p` (boundary inclusive).
    pub fn building_at(&self, p: Point2) -> Option<usize> {
        self.buildings.iter().position(|b| b.contains(p))
    }

    /// True if the segment touches any building.
    pub fn segment_blocked(&self, a: Point2, b: Point2) -> bool {
        self.buildings.iter().any(|bld| bld.touches_segment(a, b))
    }
}

fn buildings_touch(a: &BuildingPolygon, b: &BuildingPolygon) -> bool {
    if !a.bbox.overlaps(&b.bbox) {
        return false;
    }
    a.edges()
        .any(|(p, q)| b.edges().any(|(r, s)| segment_distance(p, q, r, s) <= GEOM_TOL))
        || a.contains(b.vertices[0])
        || b.contains(a.vertices[0])
}

/// A strictly convex polygon, counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    vertices: Vec<Point2>,
    bbox: Bounds,
}

/// Andrew's monotone chain. Points within [`GEOM_TOL`] of a hull edge are
/// dropped, so the result is strictly convex.
pub fn convex_hull(points: &[Point2]) -> Result<ConvexHull> {
    if !points.iter().all(|p| p.is_finite()) {
        return Err(Error::NonFinite("hull input"));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "convex hull needs 3 distinct points, got {}",
            pts.len()
        )));
    }
    fn push_chain(chain: &mut Vec<Point2>, p: Point2) {
        while chain.len() >= 2 {
            let o = chain[chain.len() - 2];
            let a = chain[chain.len() - 1];
            if orient(o, a, p) <= GEOM_TOL * (p - o).norm() {
                chain.pop();
            } else {
                break;
            }
        }
        chain.push(p);
    }
    let mut lower = Vec::with_capacity(pts.len());
    for &p in &pts {
        push_chain(&mut lower, p);
    }
    let mut upper = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        push_chain(&mut upper, p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(Error::DegenerateInput("input points are collinear".into()));
    }
    let bbox = Bounds::around(&lower);
    Ok(ConvexHull {
        vertices: lower,
        bbox,
    })
}

impl ConvexHull {
    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn bounding_box(&self) -> &Bounds {
        &self.bbox
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Boundary-inclusive half-plane test.
    pub fn contains(&self, p: Point2) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            orient(a, b, p) >= -GEOM_TOL * (b - a).norm()
        })
    }

    /// Uniform draw by rejection from the bounding box; also returns the
    /// number of box draws used.
    pub fn sample_with_attempts<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Point2, u64)> {
        if self.area() <= GEOM_TOL {
            return Err(Error::DegenerateInput("hull has zero area".into()));
        }
        let mut attempts = 0;
        loop {
            attempts += 1;
            let p = self.bbox.sample(rng);
            if self.contains(p) {
                return Ok((p, attempts));
            }
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point2> {
        self.sample_with_attempts(rng).map(|(p, _)| p)
    }
}

pub fn point_in_hull(hull: &ConvexHull, p: Point2) -> bool {
    hull.contains(p)
}

pub fn sample_uniform_hull<R: Rng + ?Sized>(hull: &ConvexHull, rng: &mut R) -> Result<Point2> {
    hull.sample_uniform(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn unit_square() -> BuildingPolygon {
        BuildingPolygon::new(vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)], 1.0).unwrap()
    }

    fn scene_with(buildings: Vec<BuildingPolygon>) -> Scene {
        Scene::new(
            Bounds::new(-10., 10., -10., 10.).unwrap(),
            buildings,
            IntensityRange::new(1.0, 2.0).unwrap(),
        )
        .unwrap()
    }

    /// Brute-force chord: fraction of midpoints of M equal sub-intervals
    /// that fall strictly inside the polygon.
    fn dense_chord(poly: &BuildingPolygon, a: Point2, b: Point2, m: usize) -> f64 {
        let d = b - a;
        let inside = (0..m)
            .filter(|&i| poly.contains_strict(a + d * ((i as f64 + 0.5) / m as f64)))
            .count();
        inside as f64 / m as f64 * d.norm()
    }

    #[test]
    fn hull_drops_interior_point() {
        let h = convex_hull(&[p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.), p(0.5, 0.5)]).unwrap();
        assert_eq!(h.vertices().len(), 4);
        assert_relative_eq!(h.area(), 1.0);
    }

    #[test]
    fn hull_drops_collinear_point() {
        let h = convex_hull(&[p(0., 0.), p(2., 0.), p(1., 1.), p(1., 0.)]).unwrap();
        let mut v = h.vertices().to_vec();
        v.sort_by(|a, b| a.x.total_cmp(&b.x));
        assert_eq!(v, vec![p(0., 0.), p(1., 1.), p(2., 0.)]);
    }

    #[test]
    fn hull_rejects_degenerate_input() {
        assert!(convex_hull(&[p(0., 0.), p(1., 1.)]).is_err());
        assert!(convex_hull(&[p(0., 0.), p(1., 1.), p(2., 2.), p(3., 3.)]).is_err());
        assert!(convex_hull(&[p(0., 0.), p(0., 0.), p(0., 0.)]).is_err());
    }

    #[test]
    fn hull_membership() {
        let h = convex_hull(&[p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)]).unwrap();
        assert!(point_in_hull(&h, p(0.5, 0.5)));
        assert!(!point_in_hull(&h, p(2.0, 0.0)));
        assert!(point_in_hull(&h, p(1.0, 0.5)));
        assert!(point_in_hull(&h, p(0.0, 0.0)));
        assert!(!point_in_hull(&h, p(1.0 + 1e-6, 0.5)));
    }

    #[test]
    fn hull_of_urban_detectors_contains_every_segment() {
        let dets = [
            p(68.8, 35.8),
            p(66.4, 119.5),
            p(4.1, 48.1),
            p(190.2, 50.1),
            p(94.0, 99.9),
            p(189.2, 19.2),
            p(154.5, 3.0),
            p(188.9, 141.3),
            p(119.9, 160.0),
            p(214.5, 77.9),
        ];
        let h = convex_hull(&dets).unwrap();
        // Every detector and every point on every pairwise segment lies in
        // the hull (convexity + containment).
        for a in &dets {
            for b in &dets {
                for i in 0..=20 {
                    let q = *a + (*b - *a) * (i as f64 / 20.0);
                    assert!(h.contains(q), "{q:?} outside hull");
                }
            }
        }
        for v in h.vertices() {
            assert!(dets.contains(v));
        }
    }

    #[test]
    fn square_hull_samples_accept_first_try() {
        let h = convex_hull(&[p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)]).unwrap();
        let mut rng = RandomStream::new(7, 0);
        let mut attempts = 0;
        for _ in 0..1000 {
            let (q, a) = h.sample_with_attempts(&mut rng).unwrap();
            assert!(h.contains(q));
            attempts += a;
        }
        assert_eq!(attempts, 1000);
    }

    #[test]
    fn triangle_sample_mean_is_centroid() {
        let h = convex_hull(&[p(0., 0.), p(1., 0.), p(0., 1.)]).unwrap();
        let mut rng = RandomStream::new(11, 0);
        let n = 100_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let q = sample_uniform_hull(&h, &mut rng).unwrap();
            assert!(h.contains(q));
            sx += q.x;
            sy += q.y;
        }
        assert!((sx / n as f64 - 1.0 / 3.0).abs() < 0.01);
        assert!((sy / n as f64 - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn chord_examples() {
        let s = scene_with(vec![unit_square()]);
        assert_eq!(s.chord_lengths(p(-1., 0.5), p(2., 0.5)).unwrap(), vec![(0, 1.0)]);
        assert!(s.chord_lengths(p(-1., 2.), p(2., 2.)).unwrap().is_empty());
        let c = s.chord_lengths(p(-1., 0.5), p(0.5, 0.5)).unwrap();
        assert_eq!(c.len(), 1);
        assert_relative_eq!(c[0].1, 0.5, epsilon = 1e-12);
        assert!(s.chord_lengths(p(1., 1.), p(1., 1.)).is_err());
    }

    #[test]
    fn grazing_chords_are_zero() {
        let s = scene_with(vec![unit_square()]);
        // Along the top edge.
        assert!(s.chord_lengths(p(-1., 1.), p(2., 1.)).unwrap().is_empty());
        // Through a single vertex.
        assert!(s.chord_lengths(p(0., 2.), p(2., 0.)).unwrap().is_empty());
        // Diagonal is a real chord.
        let c = s.chord_lengths(p(-1., -1.), p(2., 2.)).unwrap();
        assert_relative_eq!(c[0].1, 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn concave_polygon_has_two_chord_pieces() {
        // U shape: the horizontal ray at y=1.5 crosses both arms.
        let u = BuildingPolygon::new(
            vec![
                p(0., 0.),
                p(3., 0.),
                p(3., 2.),
                p(2., 2.),
                p(2., 1.),
                p(1., 1.),
                p(1., 2.),
                p(0., 2.),
            ],
            1.0,
        )
        .unwrap();
        assert_relative_eq!(u.chord_length(p(-1., 1.5), p(4., 1.5)), 2.0, epsilon = 1e-12);
        assert_relative_eq!(u.chord_length(p(-1., 0.5), p(4., 0.5)), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn clockwise_input_is_normalized() {
        let cw = BuildingPolygon::new(vec![p(0., 0.), p(0., 1.), p(1., 1.), p(1., 0.)], 2.0).unwrap();
        assert!(cw.area() > 0.0);
    }

    #[test]
    fn invalid_polygons_rejected() {
        assert!(BuildingPolygon::new(vec![p(0., 0.), p(1., 0.)], 1.0).is_err());
        assert!(BuildingPolygon::new(vec![p(0., 0.), p(1., 0.), p(0., 1.)], 0.0).is_err());
        // Bow tie.
        assert!(
            BuildingPolygon::new(vec![p(0., 0.), p(1., 1.), p(1., 0.), p(0., 1.)], 1.0).is_err()
        );
    }

    #[test]
    fn scene_rejects_overlap_and_escape() {
        let b = Bounds::new(0., 10., 0., 10.).unwrap();
        let r = IntensityRange::new(1., 2.).unwrap();
        let sq = |x0: f64| {
            BuildingPolygon::new(vec![p(x0, 1.), p(x0 + 2., 1.), p(x0 + 2., 3.), p(x0, 3.)], 1.)
                .unwrap()
        };
        assert!(Scene::new(b, vec![sq(1.0), sq(2.0)], r).is_err());
        assert!(Scene::new(b, vec![sq(9.0)], r).is_err());
        assert!(Scene::new(b, vec![sq(1.0), sq(4.0)], r).is_ok());
    }

    #[test]
    fn segment_blocking() {
        let s = scene_with(vec![unit_square()]);
        assert!(s.segment_blocked(p(-1., 0.5), p(0.5, 0.5)));
        assert!(s.segment_blocked(p(-1., 0.5), p(0.0, 0.5)));
        assert!(!s.segment_blocked(p(-1., 0.5), p(-0.1, 0.5)));
    }

    fn arb_point() -> impl Strategy<Value = Point2> {
        (-3.0..4.0f64, -3.0..4.0f64).prop_map(|(x, y)| p(x, y))
    }

    fn arb_convex_poly() -> impl Strategy<Value = BuildingPolygon> {
        prop::collection::vec(arb_point(), 3..9).prop_filter_map("degenerate", |pts| {
            let h = convex_hull(&pts).ok()?;
            BuildingPolygon::new(h.vertices().to_vec(), 1.0).ok()
        })
    }

    proptest! {
        #[test]
        fn chord_bounded_and_symmetric(poly in arb_convex_poly(), a in arb_point(), b in arb_point()) {
            prop_assume!(a.distance(b) > 1e-6);
            let l = poly.chord_length(a, b);
            prop_assert!(l >= 0.0);
            prop_assert!(l <= a.distance(b) + 1e-9);
            prop_assert!((l - poly.chord_length(b, a)).abs() < 1e-9);
        }

        #[test]
        fn chord_matches_dense_sampling(poly in arb_convex_poly(), a in arb_point(), b in arb_point()) {
            prop_assume!(a.distance(b) > 1e-3);
            let m = 10_000;
            let oracle = dense_chord(&poly, a, b, m);
            prop_assert!((poly.chord_length(a, b) - oracle).abs() <= a.distance(b) / m as f64 * 10.0);
        }

        #[test]
        fn hull_is_idempotent(pts in prop::collection::vec(arb_point(), 3..30)) {
            if let Ok(h) = convex_hull(&pts) {
                let h2 = convex_hull(h.vertices()).unwrap();
                prop_assert_eq!(h.vertices(), h2.vertices());
                for q in &pts {
                    prop_assert!(h.contains(*q));
                }
            }
        }

        #[test]
        fn hull_samples_stay_inside(pts in prop::collection::vec(arb_point(), 3..12), seed in any::<u64>()) {
            if let Ok(h) = convex_hull(&pts) {
                prop_assume!(h.area() > 1e-3);
                let mut rng = RandomStream::new(seed, 0);
                for _ in 0..20 {
                    prop_assert!(h.contains(h.sample_uniform(&mut rng).unwrap()));
                }
            }
        }
    }
}
