//! Continuation of saddles along a schedule of final positions, with
//! detection of folds, complex caustics and singularity crossings.

use crate::dynamics::{integrate_ivp, ControlParameter};
use crate::error::{Error, Result};
use crate::model::PhysicalSystem;
use crate::saddles::{
    action_quantum, asinh_c, newton_solve, CoordinateMode, NewtonOptions, Saddle, RELEVANCE_TOL,
};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Two real saddles coalesce and turn into a complex-conjugate pair.
    Fold,
    /// The path sweeps across a singularity of the potential.
    SingularityCrossing,
    /// Two complex saddles coalesce at a real final position.
    ComplexCaustic,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Fold => "fold",
            Self::SingularityCrossing => "singularity_crossing",
            Self::ComplexCaustic => "complex_caustic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fold" => Self::Fold,
            "singularity_crossing" => Self::SingularityCrossing,
            "complex_caustic" => Self::ComplexCaustic,
            _ => return None,
        })
    }

    pub fn is_caustic(&self) -> bool {
        matches!(self, Self::Fold | Self::ComplexCaustic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackEvent {
    pub kind: EventKind,
    pub x1: f64,
    /// Final positions bracketing the event.
    pub bracket: (f64, f64),
    /// Control value at the event.
    pub ctrl: Complex64,
    /// Change of the net crossing count (crossings only).
    pub direction: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordinatePolicy {
    Plain,
    SinhX1,
    /// Plain residual, switching to the sinh residual once the path comes
    /// within `margin` of a singularity or ends on a shifted copy of x1.
    Auto {
        margin: f64,
    },
}

/// Which member to follow when both saddles leaving a caustic have the same
/// relevance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchPreference {
    /// Larger real part of the control.
    LaterTime,
    /// Smaller real part of the control.
    EarlierTime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOptions {
    pub policy: CoordinatePolicy,
    pub newton: NewtonOptions,
    pub max_halvings: usize,
    pub stop_at_fold: bool,
    pub preference: BranchPreference,
    /// Distance past a caustic at which the track restarts.
    pub caustic_offset: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            policy: CoordinatePolicy::Auto { margin: 0.5 },
            newton: NewtonOptions::default(),
            max_halvings: 24,
            stop_at_fold: false,
            preference: BranchPreference::LaterTime,
            caustic_offset: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    /// One saddle per schedule point reached.
    pub states: Vec<Saddle>,
    pub events: Vec<TrackEvent>,
    /// Why the track ended before the end of the schedule, if it did.
    pub stopped: Option<String>,
}

impl TrackRecord {
    pub fn state_at(&self, x1: f64) -> Option<&Saddle> {
        self.states.iter().find(|s| (s.x1 - x1).abs() < 1e-12)
    }

    pub fn first_event(&self, kind: EventKind) -> Option<&TrackEvent> {
        self.events.iter().find(|e| e.kind == kind)
    }
}

/// Relevance under a given hbar: Re(exponent) <= 1e-10.
pub fn classify_relevance(sys: &PhysicalSystem, s: &Saddle, hbar: f64) -> bool {
    s.exponent_with(sys, hbar).re <= RELEVANCE_TOL
}

/// Relabel `after` (solved just past a singularity crossing) so its action
/// continues that of `before`, adding the required action quanta.
pub fn continue_past_crossing(sys: &PhysicalSystem, before: &Saddle, after: Saddle) -> Saddle {
    let q = action_quantum(sys);
    let mut s = after;
    if q.norm() > 0.0 {
        let count = ((before.action - s.ivp_action).im / q.im).round() as i32;
        s.set_crossing_count(sys, count);
    }
    s
}

struct Tracker<'a> {
    sys: &'a PhysicalSystem,
    opts: &'a TrackOptions,
}

impl Tracker<'_> {
    fn mode_for(&self, s: &Saddle) -> CoordinateMode {
        match self.opts.policy {
            CoordinatePolicy::Plain => CoordinateMode::Plain,
            CoordinatePolicy::SinhX1 => CoordinateMode::SinhX1,
            CoordinatePolicy::Auto { margin } => {
                if self.sys.potential.has_poles()
                    && (s.min_pole_distance < margin || !s.lands_on_target())
                {
                    CoordinateMode::SinhX1
                } else {
                    CoordinateMode::Plain
                }
            }
        }
    }

    fn solve(&self, guess: Complex64, x1: f64, mode: CoordinateMode, sign: i8) -> Result<Saddle> {
        let ctrl = ControlParameter::for_system(self.sys, guess);
        newton_solve(self.sys, ctrl, x1, mode, sign, &self.opts.newton)
    }

    /// d r / d c at `c` for the given residual mode.
    fn jacobian(&self, c: Complex64, mode: CoordinateMode, sign: i8) -> Result<Complex64> {
        let ctrl = ControlParameter::for_system(self.sys, c);
        let p = integrate_ivp(self.sys, ctrl, sign, &self.opts.newton.ivp)?;
        Ok(mode.derivative(p.terminal()) * p.sensitivity)
    }

    fn jacobian_and_curvature(
        &self,
        c: Complex64,
        mode: CoordinateMode,
        sign: i8,
    ) -> Result<(Complex64, Complex64)> {
        let d = 1e-5 * (1.0 + c.norm());
        let j = self.jacobian(c, mode, sign)?;
        let jp = self.jacobian(c + d, mode, sign)?;
        let jm = self.jacobian(c - d, mode, sign)?;
        Ok((j, (jp - jm) / (2.0 * d)))
    }

    fn target_coordinate(mode: CoordinateMode, s: Complex64) -> Complex64 {
        match mode {
            CoordinateMode::Plain => s,
            CoordinateMode::SinhX1 => asinh_c(s),
        }
    }

    /// A caustic between `cur.x1` and `cur.x1 + h`, if the local quadratic
    /// model of the residual predicts one.
    fn caustic_ahead(&self, cur: &Saddle, h: f64) -> Option<(f64, Complex64, Complex64)> {
        let mode = cur.mode;
        let c = cur.ctrl.value();
        let (j, j2) = self.jacobian_and_curvature(c, mode, cur.sign).ok()?;
        if j2.norm() == 0.0 {
            return None;
        }
        let here = mode.map(Complex64::new(cur.x1, 0.0));
        let predicted = Self::target_coordinate(mode, here - j * j / (2.0 * j2));
        let ahead = (predicted.re - cur.x1) / h;
        if !(ahead > 0.0 && ahead <= 1.2 && predicted.im.abs() < 0.5 * h.abs() + 1e-3) {
            return None;
        }
        // Newton on J(c) = 0
        let mut cc = c - j / j2;
        let mut curvature = j2;
        for _ in 0..40 {
            let (jj, jj2) = self.jacobian_and_curvature(cc, mode, cur.sign).ok()?;
            if jj2.norm() == 0.0 {
                return None;
            }
            let step = jj / jj2;
            cc -= step;
            curvature = jj2;
            if step.norm() < 1e-12 * (1.0 + cc.norm()) {
                break;
            }
        }
        let ctrl = ControlParameter::for_system(self.sys, cc);
        let p = integrate_ivp(self.sys, ctrl, cur.sign, &self.opts.newton.ivp).ok()?;
        let x1c = Self::target_coordinate(mode, mode.map(p.terminal()));
        if x1c.im.abs() > 1e-6 {
            return None;
        }
        let ahead = (x1c.re - cur.x1) / h;
        if !(ahead > 0.0 && ahead <= 1.0) {
            return None;
        }
        Some((x1c.re, cc, curvature))
    }

    fn choose(&self, mut candidates: Vec<Saddle>) -> Option<Saddle> {
        if candidates.is_empty() {
            return None;
        }
        let relevant: Vec<Saddle> = candidates.iter().filter(|s| s.relevant).cloned().collect();
        if relevant.len() == 1 {
            return relevant.into_iter().next();
        }
        if !relevant.is_empty() {
            candidates = relevant;
        }
        candidates.sort_by(|a, b| a.ctrl.value().re.total_cmp(&b.ctrl.value().re));
        match self.opts.preference {
            BranchPreference::LaterTime => candidates.pop(),
            BranchPreference::EarlierTime => candidates.into_iter().next(),
        }
    }

    /// Restart on the far side of a caustic at `x1c`.
    fn pass_caustic(
        &self,
        cur: &Saddle,
        x1c: f64,
        cc: Complex64,
        curvature: Complex64,
        target: f64,
    ) -> Result<Saddle> {
        let mode = cur.mode;
        let dir = (target - x1c).signum();
        let gap = (target - x1c).abs();
        let x_next = if gap > 1e-6 {
            x1c + dir * gap.min(self.opts.caustic_offset)
        } else {
            target
        };
        let ds = mode.map(Complex64::new(x_next, 0.0)) - mode.map(Complex64::new(x1c, 0.0));
        let d = (2.0 * ds / curvature).sqrt();
        let mut found: Vec<Saddle> = Vec::new();
        for seed in [cc + d, cc - d] {
            if let Ok(s) = self.solve(seed, x_next, mode, cur.sign) {
                if (s.ctrl.value() - seed).norm() < 0.5 * d.norm() + 1e-8
                    && !found
                        .iter()
                        .any(|f| (f.ctrl.value() - s.ctrl.value()).norm() < 1e-8)
                {
                    found.push(continue_past_crossing(self.sys, cur, s));
                }
            }
        }
        self.choose(found).ok_or_else(|| Error::TrackStalled {
            x1: x1c,
            reason: "no saddle beyond the caustic".into(),
        })
    }

    fn locate_crossing(&self, a: &Saddle, b: &Saddle) -> (f64, (f64, f64)) {
        let (mut lo, mut hi) = (a.clone(), b.clone());
        for _ in 0..60 {
            if (hi.x1 - lo.x1).abs() < 1e-9 {
                break;
            }
            let mid = 0.5 * (lo.x1 + hi.x1);
            let t = (mid - lo.x1) / (hi.x1 - lo.x1);
            let guess = lo.ctrl.value() + (hi.ctrl.value() - lo.ctrl.value()) * t;
            let mut fine = self.opts.newton;
            fine.ivp.tol = fine.ivp.tol.min(1e-12);
            fine.tol = fine.tol.max(1e-9);
            let ctrl = ControlParameter::for_system(self.sys, guess);
            let Ok(s) = newton_solve(self.sys, ctrl, mid, CoordinateMode::SinhX1, a.sign, &fine)
            else {
                break;
            };
            if s.net_crossings == lo.net_crossings {
                lo = s;
            } else {
                hi = s;
            }
        }
        let (p, q) = (lo.x1.min(hi.x1), lo.x1.max(hi.x1));
        (0.5 * (p + q), (p, q))
    }

    fn step(&self, cur: &Saddle, h: f64) -> Result<Saddle> {
        let mode = self.mode_for(cur);
        let x_new = cur.x1 + h;
        let tangent = cur.mode.derivative(Complex64::new(cur.x1, 0.0)) / cur.jacobian;
        let guess = cur.ctrl.value() + tangent * h;
        // a corrector that needs many iterations has lost the branch anyway
        let mut newton = self.opts.newton;
        newton.max_iter = newton.max_iter.min(CORRECTOR_ITERATIONS);
        let ctrl = ControlParameter::for_system(self.sys, guess);
        let s = newton_solve(self.sys, ctrl, x_new, mode, cur.sign, &newton)?;
        let predicted = (guess - cur.ctrl.value()).norm();
        if (s.ctrl.value() - guess).norm() > 0.5 * predicted + 1e-6 * (1.0 + guess.norm()) {
            return Err(Error::TrackStalled {
                x1: x_new,
                reason: "corrector left the branch".into(),
            });
        }
        Ok(continue_past_crossing(self.sys, cur, s))
    }
}

const CORRECTOR_ITERATIONS: usize = 12;
/// Steps shorter than this (relative to |x1|) make no real progress.
const MIN_STEP: f64 = 1e-9;

/// Follow `start` along `schedule` (whose first entry should be `start.x1`).
pub fn track(
    sys: &PhysicalSystem,
    start: &Saddle,
    schedule: &[f64],
    opts: &TrackOptions,
) -> Result<TrackRecord> {
    let rec = track_partial(sys, start, schedule, opts)?;
    if rec.states.len() < schedule.len() && !opts.stop_at_fold {
        let x1 = rec.states.last().map_or(schedule[0], |s| s.x1);
        return Err(Error::TrackStalled {
            x1,
            reason: rec.stopped.unwrap_or_default(),
        });
    }
    Ok(rec)
}

/// Like [`track`], but a stalled step ends the record instead of failing;
/// `stopped` then says where and why.
pub fn track_partial(
    sys: &PhysicalSystem,
    start: &Saddle,
    schedule: &[f64],
    opts: &TrackOptions,
) -> Result<TrackRecord> {
    if schedule.is_empty() {
        return Err(Error::InvalidInput("empty tracking schedule".into()));
    }
    let tr = Tracker { sys, opts };
    let mut cur = start.clone();
    if (cur.x1 - schedule[0]).abs() > 1e-12 {
        let guess = cur.ctrl.value();
        cur = tr.solve(guess, schedule[0], tr.mode_for(&cur), cur.sign)?;
    }
    let mut rec = TrackRecord {
        states: vec![cur.clone()],
        events: Vec::new(),
        stopped: None,
    };
    for &target in &schedule[1..] {
        let mut halvings = 0;
        let mut h = target - cur.x1;
        while (target - cur.x1).abs() > 1e-13 {
            h = h.signum() * h.abs().min((target - cur.x1).abs());
            if let Some((x1c, cc, curvature)) = tr.caustic_ahead(&cur, h) {
                let kind = if cc.im.abs() < 1e-7 * (1.0 + cc.norm()) {
                    EventKind::Fold
                } else {
                    EventKind::ComplexCaustic
                };
                rec.events.push(TrackEvent {
                    kind,
                    x1: x1c,
                    bracket: (cur.x1, cur.x1 + h),
                    ctrl: cc,
                    direction: 0,
                });
                if opts.stop_at_fold {
                    rec.stopped = Some(format!("stopped at {} near x1 = {x1c}", kind.name()));
                    return Ok(rec);
                }
                match tr.pass_caustic(&cur, x1c, cc, curvature, target) {
                    Ok(next) => cur = next,
                    Err(e) => {
                        rec.stopped = Some(e.to_string());
                        return Ok(rec);
                    }
                }
                h = target - cur.x1;
                continue;
            }
            match tr.step(&cur, h) {
                Ok(next) => {
                    if next.net_crossings != cur.net_crossings
                        || next.branch.crossing_count != cur.branch.crossing_count
                    {
                        let (x1s, bracket) = tr.locate_crossing(&cur, &next);
                        rec.events.push(TrackEvent {
                            kind: EventKind::SingularityCrossing,
                            x1: x1s,
                            bracket,
                            ctrl: next.ctrl.value(),
                            direction: next.net_crossings - cur.net_crossings,
                        });
                    }
                    cur = next;
                    halvings = 0;
                    h *= 2.0;
                }
                Err(_) => {
                    halvings += 1;
                    h *= 0.5;
                    if halvings > opts.max_halvings || h.abs() < MIN_STEP * (1.0 + cur.x1.abs()) {
                        rec.stopped = Some(format!("step size underflow near x1 = {}", cur.x1));
                        return Ok(rec);
                    }
                }
            }
        }
        let mut at = cur.clone();
        at.x1 = target;
        rec.states.push(at);
    }
    Ok(rec)
}
