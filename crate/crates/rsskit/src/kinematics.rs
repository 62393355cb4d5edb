//! Exact one-dimensional motion under piecewise-constant acceleration.
//!
//! All closed-form safety distances, reachability envelopes and trajectory
//! profiles in this crate reduce to the same primitive: a chain of constant
//! acceleration phases, optionally clamped so that the velocity holds at zero
//! once a braking phase reaches standstill (vehicles do not reverse while
//! braking). [`Motion1D`] evaluates such chains exactly — positions and
//! velocities come from the kinematic equations, never from numeric
//! integration.

/// One phase of constant acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpec {
    /// Acceleration applied during the phase (m/s^2).
    pub accel: f64,
    /// Phase length in seconds; `f64::INFINITY` is allowed for the last phase.
    pub duration: f64,
    /// When true, a velocity zero-crossing inside the phase freezes the state
    /// for the remainder of the phase (braking-to-standstill semantics).
    pub stop_at_zero: bool,
}

impl PhaseSpec {
    pub fn free(accel: f64, duration: f64) -> Self {
        PhaseSpec { accel, duration, stop_at_zero: false }
    }

    pub fn braking(accel: f64, duration: f64) -> Self {
        PhaseSpec { accel, duration, stop_at_zero: true }
    }
}

#[derive(Debug, Clone, Copy)]
struct Seg {
    t0: f64,
    p0: f64,
    v0: f64,
    a: f64,
}

impl Seg {
    fn position(&self, t: f64) -> f64 {
        let dt = t - self.t0;
        self.p0 + self.v0 * dt + 0.5 * self.a * dt * dt
    }

    fn velocity(&self, t: f64) -> f64 {
        self.v0 + self.a * (t - self.t0)
    }
}

/// A fully evaluated piecewise-constant-acceleration motion starting at
/// displacement 0 and time 0.
#[derive(Debug, Clone)]
pub struct Motion1D {
    segs: Vec<Seg>,
    seg_ends: Vec<f64>,
    end_time: f64,
    /// First time after which position and velocity stay constant, if any.
    rest_time: Option<f64>,
}

impl Motion1D {
    pub fn new(v0: f64, phases: &[PhaseSpec]) -> Self {
        let mut segs = Vec::with_capacity(phases.len() + 2);
        let mut seg_ends = Vec::with_capacity(phases.len() + 2);
        let mut t = 0.0;
        let mut p = 0.0;
        let mut v = v0;
        for ph in phases {
            debug_assert!(ph.duration >= 0.0);
            if ph.duration <= 0.0 {
                continue;
            }
            let t_end = t + ph.duration;
            let crossing = if ph.stop_at_zero && v != 0.0 && ph.accel != 0.0 && (v > 0.0) != (ph.accel > 0.0) {
                let tau = -v / ph.accel;
                (tau < ph.duration).then_some(t + tau)
            } else {
                None
            };
            match crossing {
                Some(tc) => {
                    let seg = Seg { t0: t, p0: p, v0: v, a: ph.accel };
                    p = seg.position(tc);
                    segs.push(seg);
                    seg_ends.push(tc);
                    // Held at rest for the remainder of the phase.
                    segs.push(Seg { t0: tc, p0: p, v0: 0.0, a: 0.0 });
                    seg_ends.push(t_end);
                    v = 0.0;
                }
                None => {
                    if ph.stop_at_zero && v == 0.0 && ph.accel <= 0.0 {
                        // At rest and not driven forward: braking keeps the
                        // state frozen rather than reversing.
                        segs.push(Seg { t0: t, p0: p, v0: 0.0, a: 0.0 });
                    } else {
                        let seg = Seg { t0: t, p0: p, v0: v, a: ph.accel };
                        if t_end.is_finite() {
                            p = seg.position(t_end);
                            v = seg.velocity(t_end);
                        }
                        segs.push(seg);
                    }
                    seg_ends.push(t_end);
                }
            }
            t = t_end;
            if !t.is_finite() {
                break;
            }
        }
        if segs.is_empty() {
            segs.push(Seg { t0: 0.0, p0: 0.0, v0: v0, a: 0.0 });
            seg_ends.push(0.0);
            t = 0.0;
        }
        // Walk backward over the trailing segments that hold still.
        let mut rest_time = None;
        for seg in segs.iter().rev() {
            if seg.v0 == 0.0 && seg.a == 0.0 {
                rest_time = Some(seg.t0);
            } else {
                break;
            }
        }
        Motion1D { segs, seg_ends, end_time: t, rest_time }
    }

    /// Convenience constructor for the canonical proper-response shape:
    /// acceleration `a_resp` during `[0, rho)` and a braking deceleration of
    /// magnitude `brake` afterwards, holding at standstill.
    ///
    /// `clamp_response` selects whether a zero-crossing during the response
    /// phase also freezes the motion (true for longitudinal travel, false for
    /// lateral motion where steering through zero velocity is ordinary).
    pub fn response_then_brake(v0: f64, a_resp: f64, rho: f64, brake: f64, clamp_response: bool) -> Self {
        debug_assert!(brake > 0.0);
        // Peek at the response-phase end to orient the braking deceleration.
        let head = Motion1D::new(
            v0,
            &[PhaseSpec { accel: a_resp, duration: rho, stop_at_zero: clamp_response }],
        );
        let v_mid = head.velocity(rho);
        let brake_accel = if v_mid >= 0.0 { -brake } else { brake };
        Motion1D::new(
            v0,
            &[
                PhaseSpec { accel: a_resp, duration: rho, stop_at_zero: clamp_response },
                PhaseSpec::braking(brake_accel, f64::INFINITY),
            ],
        )
    }

    /// Time of the last phase boundary (`INFINITY` when the final phase is
    /// unbounded).
    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    /// First time after which the state no longer changes.
    pub fn rest_time(&self) -> Option<f64> {
        self.rest_time
    }

    fn seg_at(&self, t: f64) -> &Seg {
        let mut idx = self.segs.len() - 1;
        for (i, &end) in self.seg_ends.iter().enumerate() {
            if t < end {
                idx = i;
                break;
            }
        }
        &self.segs[idx]
    }

    /// Displacement from the start at time `t >= 0`. Beyond the last finite
    /// phase the terminal state is extrapolated with its own acceleration.
    pub fn position(&self, t: f64) -> f64 {
        self.seg_at(t).position(t)
    }

    pub fn velocity(&self, t: f64) -> f64 {
        self.seg_at(t).velocity(t)
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        self.seg_at(t).a
    }

    /// Final displacement; requires the motion to come to rest or end.
    pub fn final_displacement(&self) -> f64 {
        match self.rest_time {
            Some(rt) => self.position(rt),
            None => self.position(self.end_time),
        }
    }

    /// Extremes of the displacement over `[0, horizon]`.
    pub fn displacement_extremes(&self, horizon: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut consider = |p: f64| {
            lo = lo.min(p);
            hi = hi.max(p);
        };
        consider(self.position(0.0));
        for (seg, &end) in self.segs.iter().zip(&self.seg_ends) {
            if seg.t0 > horizon {
                break;
            }
            let t_hi = end.min(horizon);
            consider(seg.position(t_hi));
            // Interior extremum where the velocity crosses zero.
            if seg.a != 0.0 {
                let tv = seg.t0 - seg.v0 / seg.a;
                if tv > seg.t0 && tv < t_hi {
                    consider(seg.position(tv));
                }
            }
        }
        consider(self.position(horizon.min(self.end_time)));
        (lo, hi)
    }

    /// Earliest `t` with `position(t) >= d` for `d > 0`, or `None` when the
    /// motion never gets there.
    pub fn earliest_time_at(&self, d: f64) -> Option<f64> {
        for (seg, &end) in self.segs.iter().zip(&self.seg_ends) {
            let t_hi = end;
            // Solve p0 + v0 dt + a/2 dt^2 = d on [0, t_hi - seg.t0].
            let span = t_hi - seg.t0;
            let c = seg.p0 - d;
            let roots = solve_quadratic(0.5 * seg.a, seg.v0, c);
            let mut best: Option<f64> = None;
            for r in roots.into_iter().flatten() {
                if r >= -1e-12 && r <= span + 1e-12 {
                    let cand = (seg.t0 + r.max(0.0)).min(t_hi);
                    best = Some(best.map_or(cand, |b: f64| b.min(cand)));
                }
            }
            if let Some(t) = best {
                return Some(t);
            }
        }
        None
    }
}

/// Real roots of `a x^2 + b x + c = 0`, ascending; degenerate cases handled.
pub fn solve_quadratic(a: f64, b: f64, c: f64) -> [Option<f64>; 2] {
    if a.abs() < 1e-15 {
        if b.abs() < 1e-15 {
            return [None, None];
        }
        return [Some(-c / b), None];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return [None, None];
    }
    let sq = disc.sqrt();
    // Numerically stable form.
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    if r1 <= r2 {
        [Some(r1), Some(r2)]
    } else {
        [Some(r2), Some(r1)]
    }
}

/// Bang-bang plan bringing a unit point mass from velocity `v0` to rest at
/// displacement `d`, with acceleration magnitude `a_peak`.
///
/// The plan is exact on its endpoint contract (final displacement `d`, final
/// velocity 0) but is not always minimum-time: overshooting starts are
/// resolved by braking to rest first and doubling back.
pub fn plan_to_rest(v0: f64, d: f64, a_peak: f64) -> Vec<PhaseSpec> {
    assert!(a_peak > 0.0, "peak acceleration must be positive");
    if d.abs() < 1e-12 && v0.abs() < 1e-12 {
        return Vec::new();
    }
    if d < 0.0 {
        return plan_to_rest(-v0, -d, a_peak)
            .into_iter()
            .map(|p| PhaseSpec { accel: -p.accel, ..p })
            .collect();
    }
    let a = a_peak;
    if v0 >= 0.0 {
        let brake_dist = v0 * v0 / (2.0 * a);
        if d + 1e-12 >= brake_dist {
            // Accelerate to a peak velocity, then brake to rest exactly at d.
            let vp = (a * d + 0.5 * v0 * v0).sqrt();
            let t1 = ((vp - v0) / a).max(0.0);
            let t2 = vp / a;
            vec![PhaseSpec::free(a, t1), PhaseSpec::free(-a, t2)]
        } else {
            // Too fast to stop by d: brake through rest, come back.
            let overshoot = brake_dist - d;
            let t_back = (overshoot / a).sqrt();
            vec![PhaseSpec::free(-a, v0 / a + t_back), PhaseSpec::free(a, t_back)]
        }
    } else {
        // Moving away from the goal: brake to rest, then do a rest-to-rest leg.
        let t_stop = -v0 / a;
        let d_rest = -v0 * v0 / (2.0 * a);
        let remaining = d - d_rest;
        let t_leg = (remaining / a).sqrt();
        vec![PhaseSpec::free(a, t_stop + t_leg), PhaseSpec::free(-a, t_leg)]
    }
}

/// Total duration of a phase plan.
pub fn plan_duration(phases: &[PhaseSpec]) -> f64 {
    phases.iter().map(|p| p.duration).sum()
}
