//! Planar path primitives: straight segments, circular arcs, and the sampled
//! polylines used for intersection finding.

use serde::{Deserialize, Serialize};

/// 2-D point / vector in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the cross product; sign gives orientation.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        self.sub(o).norm()
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n == 0.0 {
            Vec2::new(0.0, 0.0)
        } else {
            self.scale(1.0 / n)
        }
    }

    /// Rotate by +90 degrees (counterclockwise).
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

/// One piece of a trajectory: a straight line or a circular arc.
///
/// Arcs are parameterized by center, radius, start angle and a signed sweep;
/// positive sweep is counterclockwise.
#[derive(Clone, Debug)]
pub enum PathSegment {
    Line { a: Vec2, b: Vec2 },
    Arc { center: Vec2, radius: f64, start_angle: f64, sweep: f64 },
}

impl PathSegment {
    pub fn length(&self) -> f64 {
        match self {
            PathSegment::Line { a, b } => a.dist(*b),
            PathSegment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Point at arc length `s` from the start of this segment.
    pub fn point_at(&self, s: f64) -> Vec2 {
        match self {
            PathSegment::Line { a, b } => {
                let dir = b.sub(*a).normalized();
                a.add(dir.scale(s))
            }
            PathSegment::Arc { center, radius, start_angle, sweep } => {
                let phi = start_angle + sweep.signum() * s / radius;
                center.add(Vec2::new(phi.cos(), phi.sin()).scale(*radius))
            }
        }
    }

    /// Unit tangent at arc length `s` from the start of this segment.
    pub fn tangent_at(&self, s: f64) -> Vec2 {
        match self {
            PathSegment::Line { a, b } => b.sub(*a).normalized(),
            PathSegment::Arc { radius, start_angle, sweep, .. } => {
                let phi = start_angle + sweep.signum() * s / radius;
                let radial = Vec2::new(phi.cos(), phi.sin());
                if *sweep >= 0.0 {
                    radial.perp()
                } else {
                    radial.perp().scale(-1.0)
                }
            }
        }
    }
}

/// A trajectory's exact geometry: consecutive segments with cumulative arc
/// lengths. `point_at`/`tangent_at` extrapolate linearly beyond both ends so
/// vehicles upstream of the path start still have well-defined poses.
#[derive(Clone, Debug)]
pub struct PathGeom {
    segments: Vec<PathSegment>,
    cum: Vec<f64>,
    total: f64,
}

impl PathGeom {
    pub fn new(segments: Vec<PathSegment>) -> Self {
        assert!(!segments.is_empty(), "path needs at least one segment");
        let mut cum = Vec::with_capacity(segments.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for seg in &segments {
            acc += seg.length();
            cum.push(acc);
        }
        PathGeom { segments, cum, total: acc }
    }

    pub fn length(&self) -> f64 {
        self.total
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        // Binary search over cumulative lengths; clamp into the valid range.
        let idx = match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.segments.len() - 1),
            Err(i) => i.saturating_sub(1).min(self.segments.len() - 1),
        };
        (idx, s - self.cum[idx])
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        if s < 0.0 {
            let t = self.segments[0].tangent_at(0.0);
            return self.segments[0].point_at(0.0).add(t.scale(s));
        }
        if s > self.total {
            let last = self.segments.len() - 1;
            let end_local = self.segments[last].length();
            let t = self.segments[last].tangent_at(end_local);
            return self.segments[last].point_at(end_local).add(t.scale(s - self.total));
        }
        let (idx, local) = self.locate(s);
        self.segments[idx].point_at(local)
    }

    pub fn tangent_at(&self, s: f64) -> Vec2 {
        if s <= 0.0 {
            return self.segments[0].tangent_at(0.0);
        }
        if s >= self.total {
            let last = self.segments.len() - 1;
            return self.segments[last].tangent_at(self.segments[last].length());
        }
        let (idx, local) = self.locate(s);
        self.segments[idx].tangent_at(local)
    }

    /// Sample into a polyline with roughly `step` spacing. Every segment
    /// boundary is included so straight pieces stay exact.
    pub fn sample(&self, step: f64) -> Polyline {
        assert!(step > 0.0);
        let mut points = Vec::new();
        let mut arc_s = Vec::new();
        let mut offset = 0.0;
        for seg in &self.segments {
            let len = seg.length();
            let n = (len / step).ceil().max(1.0) as usize;
            for i in 0..n {
                let local = len * i as f64 / n as f64;
                points.push(seg.point_at(local));
                arc_s.push(offset + local);
            }
            offset += len;
        }
        let last = self.segments.len() - 1;
        points.push(self.segments[last].point_at(self.segments[last].length()));
        arc_s.push(self.total);
        Polyline { points, arc_s }
    }
}

/// Sampled polyline with the true arc length of every vertex, so segment-level
/// intersection hits can be mapped back to positions along the exact path.
#[derive(Clone, Debug)]
pub struct Polyline {
    pub points: Vec<Vec2>,
    pub arc_s: Vec<f64>,
}

impl Polyline {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }
}

/// Result of intersecting two line segments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SegmentHit {
    None,
    /// Transversal crossing at parameters (t on first, u on second), both in
    /// [0, 1], with the crossing point.
    Point { t: f64, u: f64, p: Vec2 },
    /// Segments are collinear and overlap over more than a point.
    CollinearOverlap,
}

/// Segment-segment intersection. Parallel non-collinear segments yield `None`.
pub fn segment_intersection(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> SegmentHit {
    let r = a2.sub(a1);
    let s = b2.sub(b1);
    let denom = r.cross(s);
    let qp = b1.sub(a1);
    const EPS: f64 = 1e-12;
    if denom.abs() < EPS {
        if qp.cross(r).abs() < 1e-9 {
            // Collinear: check 1-D overlap along r.
            let rr = r.dot(r);
            if rr < EPS {
                return SegmentHit::None;
            }
            let t0 = qp.dot(r) / rr;
            let t1 = t0 + s.dot(r) / rr;
            let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
            if hi > 1e-9 && lo < 1.0 - 1e-9 && (hi - lo) > 1e-9 {
                return SegmentHit::CollinearOverlap;
            }
        }
        return SegmentHit::None;
    }
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if (-EPS..=1.0 + EPS).contains(&t) && (-EPS..=1.0 + EPS).contains(&u) {
        let p = a1.add(r.scale(t));
        SegmentHit::Point { t: t.clamp(0.0, 1.0), u: u.clamp(0.0, 1.0), p }
    } else {
        SegmentHit::None
    }
}
