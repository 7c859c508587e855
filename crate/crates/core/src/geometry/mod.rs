//! Intersection layout: the four-way six-lane geometry, the twelve predefined
//! trajectories, and every conflict point between them.
//!
//! Each approach carries a left-turn, a straight, and a right-turn lane.
//! Straight movements are single line segments; turns are circular arcs
//! tangent to the entry and exit lane centerlines. Conflict points are found
//! by intersecting densely sampled polylines and refined against the exact
//! segment formulas.

pub mod path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use path::{segment_intersection, PathGeom, PathSegment, Polyline, SegmentHit, Vec2};

/// Compass arm a vehicle enters the intersection from. A vehicle from the
/// south approach drives north.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Approach {
    North,
    East,
    South,
    West,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::North, Approach::East, Approach::South, Approach::West];

    /// Unit heading of inbound traffic from this approach.
    pub fn heading(self) -> Vec2 {
        match self {
            Approach::North => Vec2::new(0.0, -1.0),
            Approach::East => Vec2::new(-1.0, 0.0),
            Approach::South => Vec2::new(0.0, 1.0),
            Approach::West => Vec2::new(1.0, 0.0),
        }
    }

    /// The approach on this approach's right-hand side (as seen by its
    /// inbound drivers). A vehicle from the south heading north has the east
    /// arm on its right.
    pub fn right_neighbor(self) -> Approach {
        match self {
            Approach::North => Approach::West,
            Approach::West => Approach::South,
            Approach::South => Approach::East,
            Approach::East => Approach::North,
        }
    }

    pub fn opposite(self) -> Approach {
        match self {
            Approach::North => Approach::South,
            Approach::South => Approach::North,
            Approach::East => Approach::West,
            Approach::West => Approach::East,
        }
    }

    pub fn is_adjacent(self, other: Approach) -> bool {
        other != self && other != self.opposite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Movement {
    Left,
    Straight,
    Right,
}

impl Movement {
    pub const ALL: [Movement; 3] = [Movement::Left, Movement::Straight, Movement::Right];

    /// Outbound arm for a given entry approach.
    pub fn exit_arm(self, from: Approach) -> Approach {
        match self {
            Movement::Straight => from.opposite(),
            // Turning left from the south (heading north) exits the west arm.
            Movement::Left => from.right_neighbor().opposite(),
            Movement::Right => from.right_neighbor(),
        }
    }
}

/// Geometry parameters of the standard scenario. Distances in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    /// Width of a single lane.
    pub lane_width: f64,
    /// Incoming lanes per approach (right, straight, left).
    pub lanes_per_approach: usize,
    /// Depth of the preparation zone, measured back from the stop line.
    pub prep_depth: f64,
    /// The crossing-zone boundary sits this far upstream of the stop line.
    pub crossing_margin: f64,
    /// Radius of left-turn arcs.
    pub left_turn_radius: f64,
    /// Radius of right-turn arcs.
    pub right_turn_radius: f64,
    /// Polyline sampling step for intersection finding.
    pub sample_step: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            lane_width: 3.5,
            lanes_per_approach: 3,
            prep_depth: 100.0,
            crossing_margin: 5.0,
            left_turn_radius: 12.0,
            right_turn_radius: 6.0,
            sample_step: 0.1,
        }
    }
}

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("turn arc for trajectory {trajectory} leaves the crossing zone (radius {radius} m)")]
    ArcOutsideCrossingZone { trajectory: usize, radius: f64 },
    #[error("trajectories {a} and {b} share a collinear section; layout is degenerate")]
    OverlappingPaths { a: usize, b: usize },
    #[error("invalid layout config: {0}")]
    BadConfig(String),
}

/// One predefined route through the intersection.
///
/// Arc length `s = 0` is the preparation-zone entry, 100 m upstream of the
/// stop line; vehicles spawn further upstream at negative `s`.
#[derive(Clone, Debug)]
pub struct TrajectoryPath {
    pub id: usize,
    pub approach: Approach,
    pub movement: Movement,
    /// Exact piecewise geometry from preparation-zone entry to crossing exit.
    pub geom: PathGeom,
    /// Dense sampling of `geom` used for intersection finding.
    pub polyline: Polyline,
    /// Arc length from path start to the stop line.
    pub stop_line_s: f64,
    /// Arc length to the crossing-zone exit (= total path length).
    pub exit_s: f64,
    /// Arc length at which the path enters the crossing zone.
    pub crossing_entry_s: f64,
}

impl TrajectoryPath {
    pub fn point_at(&self, s: f64) -> Vec2 {
        self.geom.point_at(s)
    }

    pub fn tangent_at(&self, s: f64) -> Vec2 {
        self.geom.tangent_at(s)
    }

    /// Heading angle in radians at arc position `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        self.geom.tangent_at(s).angle()
    }
}

/// Geometric crossing of two trajectories inside the crossing zone.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConflictPoint {
    pub id: usize,
    pub position: Vec2,
    /// The two member trajectories with the arc length from each trajectory's
    /// start to this point.
    pub members: [(usize, f64); 2],
    /// Crossing angle between the tangents, in (0, pi).
    pub theta: f64,
}

impl ConflictPoint {
    /// Arc length of this point along the given member trajectory.
    pub fn arc_on(&self, trajectory: usize) -> Option<f64> {
        self.members.iter().find(|(t, _)| *t == trajectory).map(|(_, s)| *s)
    }

    pub fn other_member(&self, trajectory: usize) -> Option<usize> {
        match self.members {
            [(a, _), (b, _)] if a == trajectory => Some(b),
            [(a, _), (b, _)] if b == trajectory => Some(a),
            _ => None,
        }
    }
}

/// All conflict points plus per-trajectory lookups.
#[derive(Clone, Debug, Default)]
pub struct ConflictMap {
    pub points: Vec<ConflictPoint>,
    /// Conflict-point ids passed by each trajectory, ordered by arc length.
    pub by_trajectory: Vec<Vec<usize>>,
    /// Trajectories in conflict with each trajectory.
    pub conflicting: Vec<Vec<usize>>,
}

impl ConflictMap {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Conflict points shared by the two trajectories.
    pub fn shared_points(&self, a: usize, b: usize) -> Vec<usize> {
        self.by_trajectory[a]
            .iter()
            .copied()
            .filter(|&cp| self.points[cp].other_member(a) == Some(b))
            .collect()
    }
}

/// The complete intersection layout.
#[derive(Clone, Debug)]
pub struct Layout {
    pub config: LayoutConfig,
    pub trajectories: Vec<TrajectoryPath>,
    pub conflicts: ConflictMap,
    /// Half-width of the central box (stop-line distance from center).
    pub half_box: f64,
    /// Half-width of the crossing-zone square.
    pub half_crossing: f64,
}

impl Layout {
    pub fn n_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    /// Longest path length over all trajectories.
    pub fn max_exit_s(&self) -> f64 {
        self.trajectories.iter().map(|t| t.exit_s).fold(0.0, f64::max)
    }
}

/// Signed distance from a vehicle's front bumper (at arc position `v_pos` on
/// the conflict point's own trajectory) to the conflict point. Negative once
/// the bumper has passed it.
pub fn distance_to_conflict(v_pos: f64, cp: &ConflictPoint, trajectory: usize) -> f64 {
    let s = cp
        .arc_on(trajectory)
        .expect("conflict point does not lie on the vehicle's trajectory");
    s - v_pos
}

/// Build the standard four-way six-lane layout.
pub fn build_layout(config: &LayoutConfig) -> Result<Layout, LayoutError> {
    if config.lane_width <= 0.0 || config.prep_depth <= 0.0 || config.crossing_margin < 0.0 {
        return Err(LayoutError::BadConfig("non-positive dimension".into()));
    }
    if config.lanes_per_approach != 3 {
        return Err(LayoutError::BadConfig(
            "standard scenario requires 3 lanes per approach".into(),
        ));
    }
    if config.sample_step <= 0.0 {
        return Err(LayoutError::BadConfig("sample step must be positive".into()));
    }

    let half_box = config.lanes_per_approach as f64 * config.lane_width;
    let half_crossing = half_box + config.crossing_margin;

    let mut trajectories = Vec::new();
    let mut id = 0;
    for approach in Approach::ALL {
        for movement in Movement::ALL {
            let traj = build_trajectory(config, id, approach, movement, half_box, half_crossing)?;
            trajectories.push(traj);
            id += 1;
        }
    }

    let conflicts = build_conflict_map(&trajectories)?;
    Ok(Layout { config: config.clone(), trajectories, conflicts, half_box, half_crossing })
}

/// Lane-center offset (to the right of the heading) for a movement's entry or
/// exit lane. Left turns use the innermost lane, right turns the outermost.
fn lane_offset(config: &LayoutConfig, movement: Movement) -> f64 {
    let k = match movement {
        Movement::Left => 0.0,
        Movement::Straight => 1.0,
        Movement::Right => 2.0,
    };
    (k + 0.5) * config.lane_width
}

fn build_trajectory(
    config: &LayoutConfig,
    id: usize,
    approach: Approach,
    movement: Movement,
    half_box: f64,
    half_crossing: f64,
) -> Result<TrajectoryPath, LayoutError> {
    let d_in = approach.heading();
    let right_in = d_in.perp().scale(-1.0); // right-hand side of inbound traffic
    let offset = lane_offset(config, movement);
    // Entry lane centerline: start at preparation-zone entry, 100 m upstream
    // of the stop line.
    let stop_line_from_center = half_box;
    let entry_start = d_in
        .scale(-(stop_line_from_center + config.prep_depth))
        .add(right_in.scale(offset));

    let segments: Vec<PathSegment> = match movement {
        Movement::Straight => {
            let exit_end = d_in.scale(half_crossing).add(right_in.scale(offset));
            vec![PathSegment::Line { a: entry_start, b: exit_end }]
        }
        Movement::Left | Movement::Right => {
            let exit_arm = movement.exit_arm(approach);
            let d_out = exit_arm.heading().scale(-1.0); // outbound heading
            let right_out = d_out.perp().scale(-1.0);
            let (radius, turn_sign) = match movement {
                Movement::Left => (config.left_turn_radius, 1.0),
                Movement::Right => (config.right_turn_radius, -1.0),
                Movement::Straight => unreachable!(),
            };
            // Arc center: offset from the entry line toward the turn side and
            // from the exit line likewise; tangency fixes both coordinates.
            let entry_normal = d_in.perp().scale(turn_sign);
            let exit_normal = d_out.perp().scale(turn_sign);
            // Entry line: P = entry_point + t * d_in. Center = entry line point
            // + entry_normal * radius, and symmetrically for the exit line.
            // Solve via the two line equations.
            let entry_line_point = entry_start;
            let exit_line_point = d_out.scale(half_crossing).add(right_out.scale(offset)).sub(
                d_out.scale(2.0 * half_crossing), // any point on the exit lane centerline
            );
            let center = line_line_point(
                entry_line_point.add(entry_normal.scale(radius)),
                d_in,
                exit_line_point.add(exit_normal.scale(radius)),
                d_out,
            )
            .ok_or_else(|| LayoutError::BadConfig("degenerate turn geometry".into()))?;
            let arc_start = center.sub(entry_normal.scale(radius));
            let arc_end = center.sub(exit_normal.scale(radius));
            let start_angle = arc_start.sub(center).angle();
            let end_angle = arc_end.sub(center).angle();
            let mut sweep = end_angle - start_angle;
            // Normalize to the quarter-turn matching the turn direction.
            while sweep > std::f64::consts::PI {
                sweep -= 2.0 * std::f64::consts::PI;
            }
            while sweep < -std::f64::consts::PI {
                sweep += 2.0 * std::f64::consts::PI;
            }
            if (movement == Movement::Left && sweep <= 0.0)
                || (movement == Movement::Right && sweep >= 0.0)
            {
                return Err(LayoutError::BadConfig("turn sweeps the wrong way".into()));
            }
            let exit_end = d_out.scale(half_crossing).add(right_out.scale(offset));
            let mut segs = vec![PathSegment::Line { a: entry_start, b: arc_start }];
            segs.push(PathSegment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            });
            // The arc may end exactly at the crossing boundary.
            if arc_end.dist(exit_end) > 1e-9 {
                segs.push(PathSegment::Line { a: arc_end, b: exit_end });
            }
            segs
        }
    };

    let geom = PathGeom::new(segments);
    let exit_s = geom.length();
    let crossing_entry_s = config.prep_depth - config.crossing_margin;
    let stop_line_s = find_stop_line_s(&geom, approach, half_box);

    // Turn arcs must live entirely inside the crossing zone.
    for seg in geom.segments() {
        if let PathSegment::Arc { radius, .. } = seg {
            let n = (seg.length() / 0.05).ceil() as usize;
            for i in 0..=n {
                let p = seg.point_at(seg.length() * i as f64 / n as f64);
                if p.x.abs() > half_crossing + 1e-6 || p.y.abs() > half_crossing + 1e-6 {
                    return Err(LayoutError::ArcOutsideCrossingZone { trajectory: id, radius: *radius });
                }
            }
        }
    }

    let polyline = geom.sample(config.sample_step);
    Ok(TrajectoryPath {
        id,
        approach,
        movement,
        geom,
        polyline,
        stop_line_s,
        exit_s,
        crossing_entry_s,
    })
}

/// Arc length at which the path crosses its approach's stop line.
fn find_stop_line_s(geom: &PathGeom, approach: Approach, half_box: f64) -> f64 {
    // The stop line is the core-box edge perpendicular to the inbound heading.
    // Walk the path until the projection along the heading passes -half_box.
    let d_in = approach.heading();
    let mut lo = 0.0;
    let mut hi = geom.length();
    // Projection is monotone along the inbound axis before mid-intersection.
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        let proj = geom.point_at(mid).dot(d_in);
        if proj < -half_box {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn line_line_point(p1: Vec2, d1: Vec2, p2: Vec2, d2: Vec2) -> Option<Vec2> {
    let denom = d1.cross(d2);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = p2.sub(p1).cross(d2) / denom;
    Some(p1.add(d1.scale(t)))
}

/// All transversal crossings of two trajectories inside the crossing zone.
///
/// Returns conflict points with `id = usize::MAX`; ids are assigned when the
/// full map is assembled. Collinear overlap between distinct trajectories is
/// a layout error.
pub fn conflict_points(a: &TrajectoryPath, b: &TrajectoryPath) -> Result<Vec<ConflictPoint>, LayoutError> {
    assert_ne!(a.id, b.id, "conflict_points requires distinct trajectories");
    let mut raw: Vec<(f64, f64, Vec2)> = Vec::new();

    let (alo, ahi) = a.polyline.bbox();
    let (blo, bhi) = b.polyline.bbox();
    if alo.x > bhi.x || blo.x > ahi.x || alo.y > bhi.y || blo.y > ahi.y {
        return Ok(Vec::new());
    }

    for i in 0..a.polyline.len() - 1 {
        let a1 = a.polyline.points[i];
        let a2 = a.polyline.points[i + 1];
        // Skip segments fully outside the other path's bounding box.
        if (a1.x.max(a2.x) < blo.x - 0.5)
            || (a1.x.min(a2.x) > bhi.x + 0.5)
            || (a1.y.max(a2.y) < blo.y - 0.5)
            || (a1.y.min(a2.y) > bhi.y + 0.5)
        {
            continue;
        }
        for j in 0..b.polyline.len() - 1 {
            let b1 = b.polyline.points[j];
            let b2 = b.polyline.points[j + 1];
            match segment_intersection(a1, a2, b1, b2) {
                SegmentHit::None => {}
                SegmentHit::CollinearOverlap => {
                    return Err(LayoutError::OverlappingPaths { a: a.id, b: b.id });
                }
                SegmentHit::Point { t, u, p } => {
                    let sa = a.polyline.arc_s[i] + t * (a.polyline.arc_s[i + 1] - a.polyline.arc_s[i]);
                    let sb = b.polyline.arc_s[j] + u * (b.polyline.arc_s[j + 1] - b.polyline.arc_s[j]);
                    raw.push((sa, sb, p));
                }
            }
        }
    }

    // Merge duplicate hits produced by adjacent sampled segments.
    raw.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut merged: Vec<(f64, f64, Vec2)> = Vec::new();
    for hit in raw {
        if let Some(last) = merged.last() {
            if hit.2.dist(last.2) < 0.5 {
                continue;
            }
        }
        merged.push(hit);
    }

    let mut out = Vec::new();
    for (sa, sb, p) in merged {
        // Conflicts exist only inside the crossing zone.
        if sa <= a.crossing_entry_s || sa >= a.exit_s || sb <= b.crossing_entry_s || sb >= b.exit_s {
            continue;
        }
        let ta = a.tangent_at(sa);
        let tb = b.tangent_at(sb);
        let theta = ta.dot(tb).clamp(-1.0, 1.0).acos();
        // Keep theta strictly inside (0, pi) so cot(theta) stays finite in
        // the exact occupancy form.
        let theta = theta.clamp(0.1, std::f64::consts::PI - 0.1);
        out.push(ConflictPoint { id: usize::MAX, position: p, members: [(a.id, sa), (b.id, sb)], theta });
    }
    Ok(out)
}

fn build_conflict_map(trajectories: &[TrajectoryPath]) -> Result<ConflictMap, LayoutError> {
    let n = trajectories.len();
    let mut points = Vec::new();
    let mut by_trajectory = vec![Vec::new(); n];
    let mut conflicting = vec![Vec::new(); n];

    for i in 0..n {
        for j in i + 1..n {
            let found = conflict_points(&trajectories[i], &trajectories[j])?;
            for mut cp in found {
                cp.id = points.len();
                by_trajectory[i].push(cp.id);
                by_trajectory[j].push(cp.id);
                if !conflicting[i].contains(&j) {
                    conflicting[i].push(j);
                    conflicting[j].push(i);
                }
                points.push(cp);
            }
        }
    }

    for (traj, list) in by_trajectory.iter_mut().enumerate() {
        list.sort_by(|&p, &q| {
            points[p]
                .arc_on(traj)
                .unwrap()
                .partial_cmp(&points[q].arc_on(traj).unwrap())
                .unwrap()
        });
    }
    for list in conflicting.iter_mut() {
        list.sort_unstable();
    }

    Ok(ConflictMap { points, by_trajectory, conflicting })
}

/// Serializable snapshot of the layout for plotting and debugging.
#[derive(Serialize, Deserialize)]
pub struct LayoutDump {
    pub lane_width: f64,
    pub half_box: f64,
    pub half_crossing: f64,
    pub trajectories: Vec<TrajectoryDump>,
    pub conflict_points: Vec<ConflictPoint>,
}

#[derive(Serialize, Deserialize)]
pub struct TrajectoryDump {
    pub id: usize,
    pub approach: Approach,
    pub movement: Movement,
    pub stop_line_s: f64,
    pub exit_s: f64,
    pub polyline: Vec<Vec2>,
}

impl Layout {
    pub fn dump(&self) -> LayoutDump {
        LayoutDump {
            lane_width: self.config.lane_width,
            half_box: self.half_box,
            half_crossing: self.half_crossing,
            trajectories: self
                .trajectories
                .iter()
                .map(|t| TrajectoryDump {
                    id: t.id,
                    approach: t.approach,
                    movement: t.movement,
                    stop_line_s: t.stop_line_s,
                    exit_s: t.exit_s,
                    // Thin the polyline for export; 1 m resolution is plenty
                    // for plotting.
                    polyline: t
                        .polyline
                        .points
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| i % 10 == 0)
                        .map(|(_, p)| *p)
                        .collect(),
                })
                .collect(),
            conflict_points: self.conflicts.points.clone(),
        }
    }
}
