//! Lane geometry: piecewise line/arc centerlines with a varying width, and
//! the bijection between world coordinates and the lane frame.
//!
//! The lane frame of a point is `(lon, alpha)`:
//!
//! * `lon` — arc length along the centerline from the lane start (m),
//! * `alpha` — normalized lateral position in `[-1/2, 1/2]`, scaled by the
//!   local lane width. `alpha` grows to the *driver's right*, so a point to
//!   the left of another maps to a smaller `alpha`.
//!
//! Within the lane's footprint the mapping is bijective and preserves
//! ordering: "behind" means smaller `lon`, "left of" means smaller `alpha`.
//! Bijectivity is guaranteed by requiring arc widths to stay below half the
//! arc radius.

use crate::math::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Angular tolerance for smooth joins between consecutive pieces (radians),
/// also used for the positional gap at the seam (meters).
pub const JOIN_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("a lane needs at least one centerline piece")]
    EmptyLane,
    #[error("piece {index} is degenerate (zero length or zero sweep)")]
    DegeneratePiece { index: usize },
    #[error("pieces {} and {index} do not join smoothly", index - 1)]
    NonSmoothJoin { index: usize },
    #[error("piece {index}: lane width exceeds half the arc radius")]
    WidthTooLargeForArc { index: usize },
    #[error("invalid width profile: {0}")]
    InvalidWidths(String),
    #[error("point lies outside the lane footprint")]
    OutsideLane,
    #[error("lane-frame coordinates out of domain (lon={lon}, alpha={alpha})")]
    OutOfDomain { lon: f64, alpha: f64 },
    #[error("motion projection needs at least three samples")]
    TooFewSamples,
    #[error("motion projection needs uniformly spaced timestamps")]
    NonUniformTimestep,
}

/// One centerline piece. Arcs are counterclockwise for positive `sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurvePiece {
    Line {
        start: Vec2,
        end: Vec2,
    },
    Arc {
        center: Vec2,
        radius: f64,
        /// Angle of the starting point as seen from the center (radians).
        start_angle: f64,
        /// Signed angular extent; positive turns left (counterclockwise).
        sweep: f64,
    },
}

impl CurvePiece {
    pub fn length(&self) -> f64 {
        match self {
            CurvePiece::Line { start, end } => start.dist(*end),
            CurvePiece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Centerline point at arc length `s` from the piece start.
    pub fn point_at(&self, s: f64) -> Vec2 {
        match self {
            CurvePiece::Line { start, end } => {
                let u = (*end - *start) / start.dist(*end);
                *start + u * s
            }
            CurvePiece::Arc { center, radius, start_angle, sweep } => {
                let theta = start_angle + sweep.signum() * s / radius;
                *center + Vec2::from_angle(theta) * *radius
            }
        }
    }

    /// Unit tangent (driving direction) at arc length `s`.
    pub fn tangent_at(&self, s: f64) -> Vec2 {
        match self {
            CurvePiece::Line { start, end } => (*end - *start) / start.dist(*end),
            CurvePiece::Arc { radius, start_angle, sweep, .. } => {
                let theta = start_angle + sweep.signum() * s / radius;
                Vec2::new(-theta.sin(), theta.cos()) * sweep.signum()
            }
        }
    }
}

/// A lane: smooth centerline pieces plus a piecewise-linear width profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneGeometry {
    pieces: Vec<CurvePiece>,
    /// Arc length at the start of each piece; one extra entry for the total.
    cum_len: Vec<f64>,
    /// `(lon, width)` breakpoints, ascending; constant beyond the ends.
    widths: Vec<(f64, f64)>,
}

/// Builds and validates a lane.
///
/// `widths` are `(lon, width)` breakpoints along the centerline; the width is
/// interpolated linearly between breakpoints and extended as a constant
/// beyond them. Consecutive collinear line pieces are merged.
pub fn build_lane(pieces: Vec<CurvePiece>, widths: Vec<(f64, f64)>) -> Result<LaneGeometry, GeometryError> {
    if pieces.is_empty() {
        return Err(GeometryError::EmptyLane);
    }
    for (i, piece) in pieces.iter().enumerate() {
        let degenerate = match piece {
            CurvePiece::Line { start, end } => start.dist(*end) < 1e-12,
            CurvePiece::Arc { radius, sweep, .. } => *radius <= 0.0 || sweep.abs() < 1e-12,
        };
        if degenerate {
            return Err(GeometryError::DegeneratePiece { index: i });
        }
    }
    // Merge runs of collinear line pieces.
    let mut merged: Vec<CurvePiece> = Vec::with_capacity(pieces.len());
    for piece in pieces {
        if let (Some(CurvePiece::Line { start, end }), CurvePiece::Line { start: s2, end: e2 }) =
            (merged.last().copied(), piece)
        {
            let u1 = (end - start).try_normalize().unwrap();
            let u2 = (e2 - s2).try_normalize().unwrap();
            if end.dist(s2) <= JOIN_TOL && u1.angle_between(u2) <= JOIN_TOL {
                *merged.last_mut().unwrap() = CurvePiece::Line { start, end: e2 };
                continue;
            }
        }
        merged.push(piece);
    }
    // Smooth joins: shared endpoint and tangent.
    for i in 1..merged.len() {
        let prev = &merged[i - 1];
        let next = &merged[i];
        let gap = prev.point_at(prev.length()).dist(next.point_at(0.0));
        let kink = prev.tangent_at(prev.length()).angle_between(next.tangent_at(0.0));
        if gap > JOIN_TOL || kink > JOIN_TOL {
            return Err(GeometryError::NonSmoothJoin { index: i });
        }
    }
    if widths.is_empty() {
        return Err(GeometryError::InvalidWidths("at least one width breakpoint required".into()));
    }
    for w in widths.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(GeometryError::InvalidWidths("breakpoints must be strictly ascending".into()));
        }
    }
    if widths.iter().any(|&(_, w)| w <= 0.0) {
        return Err(GeometryError::InvalidWidths("widths must be positive".into()));
    }
    let mut cum_len = Vec::with_capacity(merged.len() + 1);
    let mut acc = 0.0;
    for piece in &merged {
        cum_len.push(acc);
        acc += piece.length();
    }
    cum_len.push(acc);
    let lane = LaneGeometry { pieces: merged, cum_len, widths };
    // Bijectivity on arcs: the lane must stay well inside the arc radius.
    for (i, piece) in lane.pieces.iter().enumerate() {
        if let CurvePiece::Arc { radius, .. } = piece {
            let lo = lane.cum_len[i];
            let hi = lane.cum_len[i + 1];
            if lane.max_width_on(lo, hi) > radius / 2.0 {
                return Err(GeometryError::WidthTooLargeForArc { index: i });
            }
        }
    }
    Ok(lane)
}

impl LaneGeometry {
    /// Total centerline length.
    pub fn length(&self) -> f64 {
        *self.cum_len.last().unwrap()
    }

    /// Interpolated lane width at a longitudinal position.
    pub fn width_at(&self, lon: f64) -> f64 {
        let ws = &self.widths;
        if lon <= ws[0].0 {
            return ws[0].1;
        }
        if lon >= ws[ws.len() - 1].0 {
            return ws[ws.len() - 1].1;
        }
        let idx = ws.partition_point(|&(y, _)| y <= lon);
        let (y0, w0) = ws[idx - 1];
        let (y1, w1) = ws[idx];
        w0 + (w1 - w0) * (lon - y0) / (y1 - y0)
    }

    fn max_width_on(&self, lo: f64, hi: f64) -> f64 {
        let mut m = self.width_at(lo).max(self.width_at(hi));
        for &(y, w) in &self.widths {
            if y > lo && y < hi {
                m = m.max(w);
            }
        }
        m
    }

    fn piece_index_at(&self, lon: f64) -> usize {
        let idx = self.cum_len.partition_point(|&c| c <= lon);
        idx.clamp(1, self.pieces.len()) - 1
    }

    /// Centerline point at a longitudinal position.
    pub fn centerline_at(&self, lon: f64) -> Vec2 {
        let i = self.piece_index_at(lon);
        self.pieces[i].point_at(lon - self.cum_len[i])
    }

    /// Unit driving direction at a longitudinal position.
    pub fn tangent_at(&self, lon: f64) -> Vec2 {
        let i = self.piece_index_at(lon);
        self.pieces[i].tangent_at(lon - self.cum_len[i])
    }

    /// Lane frame to world coordinates.
    pub fn from_lane_frame(&self, lon: f64, alpha: f64) -> Result<Vec2, GeometryError> {
        let tol = 1e-9;
        if lon < -tol || lon > self.length() + tol || alpha.abs() > 0.5 + tol {
            return Err(GeometryError::OutOfDomain { lon, alpha });
        }
        let lon = lon.clamp(0.0, self.length());
        let center = self.centerline_at(lon);
        let right = self.tangent_at(lon).perp_right();
        Ok(center + right * (alpha * self.width_at(lon)))
    }

    /// World coordinates to the lane frame.
    ///
    /// Points outside the lane footprint (laterally beyond the width, or
    /// before/after the centerline ends) yield [`GeometryError::OutsideLane`].
    pub fn to_lane_frame(&self, p: Vec2) -> Result<(f64, f64), GeometryError> {
        let mut best: Option<(f64, f64, f64)> = None; // (err, lon, alpha)
        let alpha_tol = 1e-9;
        for (i, piece) in self.pieces.iter().enumerate() {
            let len = self.cum_len[i + 1] - self.cum_len[i];
            let candidate = match piece {
                CurvePiece::Line { start, end } => {
                    let u = (*end - *start) / len;
                    let t = (p - *start).dot(u);
                    if t < -1e-9 || t > len + 1e-9 {
                        None
                    } else {
                        let s = t.clamp(0.0, len);
                        let offset = (p - *start).dot(u.perp_right());
                        Some((s, offset))
                    }
                }
                CurvePiece::Arc { center, radius, start_angle, sweep } => {
                    let r_vec = p - *center;
                    let d = r_vec.norm();
                    if d < 1e-9 {
                        None
                    } else {
                        let theta = r_vec.angle();
                        // Angular progress along the driving direction.
                        let mut delta = if *sweep >= 0.0 { theta - start_angle } else { start_angle - theta };
                        delta = delta.rem_euclid(std::f64::consts::TAU);
                        let span = sweep.abs();
                        let ang_tol = 1e-9 / radius;
                        if delta >= std::f64::consts::TAU - ang_tol {
                            // Wrap-around hit at the very start of the arc.
                            delta = 0.0;
                        }
                        if delta > span + ang_tol {
                            None
                        } else {
                            let s = delta.min(span) * radius;
                            let offset = sweep.signum() * (d - radius);
                            Some((s, offset))
                        }
                    }
                }
            };
            if let Some((s, offset)) = candidate {
                let lon = self.cum_len[i] + s;
                let alpha = offset / self.width_at(lon);
                if alpha.abs() <= 0.5 + alpha_tol {
                    let err = self
                        .from_lane_frame(lon, alpha.clamp(-0.5, 0.5))
                        .map(|q| q.dist(p))
                        .unwrap_or(f64::INFINITY);
                    if best.map_or(true, |(e, _, _)| err < e) {
                        best = Some((err, lon, alpha.clamp(-0.5, 0.5)));
                    }
                }
            }
        }
        match best {
            Some((err, lon, alpha)) if err < 1e-6 => Ok((lon, alpha)),
            _ => Err(GeometryError::OutsideLane),
        }
    }
}

/// Lane-frame kinematics of one motion sample.
///
/// Lateral rates are reported both in alpha-units and in meters (alpha rate
/// scaled by the local width): a car tracking a widening lane's boundary has
/// zero alpha-rate and hence zero lateral velocity in this sense, even though
/// its world-frame offset from the centerline grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneKinematics {
    pub t: f64,
    pub lon_pos: f64,
    pub lon_vel: f64,
    pub lon_acc: f64,
    pub alpha: f64,
    pub alpha_vel: f64,
    pub alpha_acc: f64,
    /// `alpha_vel * width(lon_pos)` (m/s).
    pub lat_vel: f64,
    /// `alpha_acc * width(lon_pos)` (m/s^2).
    pub lat_acc: f64,
}

/// Projects a uniformly sampled world-frame track into the lane frame and
/// differentiates it (central differences inside, one-sided at the ends).
pub fn project_motion(lane: &LaneGeometry, samples: &[(f64, Vec2)]) -> Result<Vec<LaneKinematics>, GeometryError> {
    if samples.len() < 3 {
        return Err(GeometryError::TooFewSamples);
    }
    let dt = samples[1].0 - samples[0].0;
    if dt <= 0.0 {
        return Err(GeometryError::NonUniformTimestep);
    }
    for w in samples.windows(2) {
        if ((w[1].0 - w[0].0) - dt).abs() > 1e-9 {
            return Err(GeometryError::NonUniformTimestep);
        }
    }
    let frames: Vec<(f64, f64)> =
        samples.iter().map(|&(_, p)| lane.to_lane_frame(p)).collect::<Result<_, _>>()?;
    let n = frames.len();
    let diff = |get: &dyn Fn(usize) -> f64, i: usize| -> (f64, f64) {
        let (vel, acc);
        if i == 0 {
            vel = (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * dt);
            acc = (get(0) - 2.0 * get(1) + get(2)) / (dt * dt);
        } else if i == n - 1 {
            vel = (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * dt);
            acc = (get(n - 1) - 2.0 * get(n - 2) + get(n - 3)) / (dt * dt);
        } else {
            vel = (get(i + 1) - get(i - 1)) / (2.0 * dt);
            acc = (get(i + 1) - 2.0 * get(i) + get(i - 1)) / (dt * dt);
        }
        (vel, acc)
    };
    let lon = |i: usize| frames[i].0;
    let alpha = |i: usize| frames[i].1;
    Ok((0..n)
        .map(|i| {
            let (lon_vel, lon_acc) = diff(&lon, i);
            let (alpha_vel, alpha_acc) = diff(&alpha, i);
            let w = lane.width_at(frames[i].0);
            LaneKinematics {
                t: samples[i].0,
                lon_pos: frames[i].0,
                lon_vel,
                lon_acc,
                alpha: frames[i].1,
                alpha_vel,
                alpha_acc,
                lat_vel: alpha_vel * w,
                lat_acc: alpha_acc * w,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_lane(width: f64) -> LaneGeometry {
        build_lane(
            vec![CurvePiece::Line { start: Vec2::ZERO, end: Vec2::new(0.0, 100.0) }],
            vec![(0.0, width)],
        )
        .unwrap()
    }

    #[test]
    fn straight_lane_frame_sign_convention() {
        // Lane along +y, width 4: the point (2, 30) sits on the right edge.
        let lane = straight_lane(4.0);
        let (lon, alpha) = lane.to_lane_frame(Vec2::new(2.0, 30.0)).unwrap();
        assert!((lon - 30.0).abs() < 1e-12);
        assert!((alpha - 0.5).abs() < 1e-12);
        // Left of the centerline maps to a smaller alpha.
        let (_, alpha_left) = lane.to_lane_frame(Vec2::new(-1.0, 30.0)).unwrap();
        assert!(alpha_left < 0.0);
    }

    #[test]
    fn outside_lane_is_an_error() {
        let lane = straight_lane(4.0);
        assert_eq!(lane.to_lane_frame(Vec2::new(2.5, 30.0)), Err(GeometryError::OutsideLane));
        assert_eq!(lane.to_lane_frame(Vec2::new(0.0, 101.0)), Err(GeometryError::OutsideLane));
        assert!(matches!(
            lane.from_lane_frame(30.0, 0.6),
            Err(GeometryError::OutOfDomain { .. })
        ));
        assert!(matches!(lane.from_lane_frame(-1.0, 0.0), Err(GeometryError::OutOfDomain { .. })));
    }

    #[test]
    fn build_validations() {
        assert_eq!(build_lane(vec![], vec![(0.0, 4.0)]), Err(GeometryError::EmptyLane));
        let z = CurvePiece::Line { start: Vec2::ZERO, end: Vec2::ZERO };
        assert!(matches!(
            build_lane(vec![z], vec![(0.0, 4.0)]),
            Err(GeometryError::DegeneratePiece { index: 0 })
        ));
        // Kinked join.
        let a = CurvePiece::Line { start: Vec2::ZERO, end: Vec2::new(0.0, 10.0) };
        let b = CurvePiece::Line { start: Vec2::new(0.0, 10.0), end: Vec2::new(5.0, 20.0) };
        assert!(matches!(
            build_lane(vec![a, b], vec![(0.0, 4.0)]),
            Err(GeometryError::NonSmoothJoin { index: 1 })
        ));
        // Arc too narrow for the requested width.
        let arc = CurvePiece::Arc { center: Vec2::ZERO, radius: 5.0, start_angle: 0.0, sweep: 1.0 };
        assert!(matches!(
            build_lane(vec![arc], vec![(0.0, 3.0)]),
            Err(GeometryError::WidthTooLargeForArc { index: 0 })
        ));
        assert!(matches!(
            build_lane(
                vec![CurvePiece::Line { start: Vec2::ZERO, end: Vec2::new(0.0, 10.0) }],
                vec![(0.0, -1.0)]
            ),
            Err(GeometryError::InvalidWidths(_))
        ));
    }

    #[test]
    fn collinear_lines_merge() {
        let a = CurvePiece::Line { start: Vec2::ZERO, end: Vec2::new(0.0, 10.0) };
        let b = CurvePiece::Line { start: Vec2::new(0.0, 10.0), end: Vec2::new(0.0, 25.0) };
        let lane = build_lane(vec![a, b], vec![(0.0, 4.0)]).unwrap();
        assert_eq!(lane.pieces.len(), 1);
        assert!((lane.length() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_lane_round_trip() {
        // Straight, then a left turn, then straight again.
        let lane = build_lane(
            vec![
                CurvePiece::Line { start: Vec2::ZERO, end: Vec2::new(50.0, 0.0) },
                CurvePiece::Arc {
                    center: Vec2::new(50.0, 30.0),
                    radius: 30.0,
                    start_angle: -std::f64::consts::FRAC_PI_2,
                    sweep: std::f64::consts::FRAC_PI_2,
                },
                CurvePiece::Line { start: Vec2::new(80.0, 30.0), end: Vec2::new(80.0, 90.0) },
            ],
            vec![(0.0, 4.0), (120.0, 6.0)],
        )
        .unwrap();
        for i in 0..60 {
            let lon = lane.length() * (i as f64) / 59.0;
            for alpha in [-0.5, -0.2, 0.0, 0.3, 0.5] {
                let p = lane.from_lane_frame(lon, alpha).unwrap();
                let (lon2, alpha2) = lane.to_lane_frame(p).unwrap();
                assert!((lon - lon2).abs() < 1e-9, "lon {lon} vs {lon2}");
                assert!((alpha - alpha2).abs() < 1e-9, "alpha {alpha} vs {alpha2}");
            }
        }
    }

    #[test]
    fn arc_right_turn_orientation() {
        // Clockwise arc (right turn): inside of the curve is to the right.
        let lane = build_lane(
            vec![CurvePiece::Arc {
                center: Vec2::new(0.0, 0.0),
                radius: 40.0,
                start_angle: std::f64::consts::FRAC_PI_2,
                sweep: -std::f64::consts::FRAC_PI_2,
            }],
            vec![(0.0, 4.0)],
        )
        .unwrap();
        // Start point (0, 40) driving along +x; right edge is closer to the
        // center.
        let p = lane.from_lane_frame(0.0, 0.5).unwrap();
        assert!((p.norm() - 38.0).abs() < 1e-9);
    }

    #[test]
    fn project_motion_constant_speed() {
        let lane = straight_lane(4.0);
        let samples: Vec<(f64, Vec2)> =
            (0..20).map(|i| (i as f64 * 0.1, Vec2::new(0.0, 5.0 * i as f64 * 0.1))).collect();
        let k = project_motion(&lane, &samples).unwrap();
        for s in &k {
            assert!((s.lon_vel - 5.0).abs() < 1e-9);
            assert!(s.lat_vel.abs() < 1e-9);
            assert!(s.lon_acc.abs() < 1e-6);
        }
    }

    #[test]
    fn widening_lane_distinguishes_boundary_hugging() {
        // Lane along +x, width growing from 2 to 12 over 100 m.
        let lane = build_lane(
            vec![CurvePiece::Line { start: Vec2::ZERO, end: Vec2::new(100.0, 0.0) }],
            vec![(0.0, 2.0), (100.0, 12.0)],
        )
        .unwrap();
        let dt = 0.1;
        let speed = 10.0;
        // Driving parallel to the centerline at a fixed world offset.
        let parallel: Vec<(f64, Vec2)> =
            (0..30).map(|i| (i as f64 * dt, Vec2::new(speed * i as f64 * dt, 0.8))).collect();
        let k = project_motion(&lane, &parallel).unwrap();
        assert!(
            k[10].alpha_vel.abs() > 1e-3,
            "fixed-offset driving must show alpha drift in a widening lane"
        );
        // Hugging the (left) boundary: alpha stays at -1/2.
        let hugging: Vec<(f64, Vec2)> = (0..30)
            .map(|i| {
                let x = speed * i as f64 * dt;
                (i as f64 * dt, Vec2::new(x, lane.width_at(x) / 2.0))
            })
            .collect();
        let k = project_motion(&lane, &hugging).unwrap();
        assert!(k[10].alpha_vel.abs() < 1e-9);
        assert!(k[10].lat_vel.abs() < 1e-9);
    }

    #[test]
    fn project_motion_errors() {
        let lane = straight_lane(4.0);
        let two = vec![(0.0, Vec2::ZERO), (0.1, Vec2::new(0.0, 1.0))];
        assert_eq!(project_motion(&lane, &two), Err(GeometryError::TooFewSamples));
        let jitter = vec![
            (0.0, Vec2::ZERO),
            (0.1, Vec2::new(0.0, 1.0)),
            (0.25, Vec2::new(0.0, 2.0)),
        ];
        assert_eq!(project_motion(&lane, &jitter), Err(GeometryError::NonUniformTimestep));
    }

    #[test]
    fn circular_motion_has_zero_lateral_velocity() {
        let r = 50.0;
        let lane = build_lane(
            vec![CurvePiece::Arc { center: Vec2::ZERO, radius: r, start_angle: 0.0, sweep: 3.0 }],
            vec![(0.0, 4.0)],
        )
        .unwrap();
        let v = 10.0;
        let samples: Vec<(f64, Vec2)> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.05;
                (t, Vec2::from_angle(v * t / r) * r)
            })
            .collect();
        let k = project_motion(&lane, &samples).unwrap();
        for s in &k[1..k.len() - 1] {
            assert!((s.lon_vel - v).abs() < 1e-6);
            assert!(s.lat_vel.abs() < 1e-6);
        }
    }
}
