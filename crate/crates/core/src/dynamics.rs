//! Complex classical dynamics on the unit parameter interval.
//!
//! Paths are parametrized as x(lambda), lambda in [0, 1], with physical time
//! t = T lambda, so m x'' = -T^2 V'(x) where ' denotes d/dlambda.

use crate::error::{Error, Result};
use crate::model::{Mode, PhysicalSystem, PotentialKind, PotentialSpec};
use num_complex::Complex64;
use std::f64::consts::PI;

/// The complex quantity varied when searching for saddle points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlParameter {
    /// Complex total time (fixed-energy problems).
    ComplexTime(Complex64),
    /// Complex initial velocity dx/dlambda at lambda = 0 (fixed-time problems).
    ComplexVelocity(Complex64),
}

impl ControlParameter {
    pub fn value(&self) -> Complex64 {
        match *self {
            Self::ComplexTime(z) | Self::ComplexVelocity(z) => z,
        }
    }

    pub fn with_value(&self, z: Complex64) -> Self {
        match self {
            Self::ComplexTime(_) => Self::ComplexTime(z),
            Self::ComplexVelocity(_) => Self::ComplexVelocity(z),
        }
    }

    /// The control variant matching the system's mode.
    pub fn for_system(sys: &PhysicalSystem, z: Complex64) -> Self {
        match sys.mode {
            Mode::FixedEnergy { .. } => Self::ComplexTime(z),
            Mode::FixedTime { .. } => Self::ComplexVelocity(z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvpOptions {
    /// Relative and absolute local error tolerance.
    pub tol: f64,
    /// A path closer than this to a singularity aborts with `PoleHit`.
    pub pole_radius: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IvpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            pole_radius: 1e-6,
            min_step: 1e-14,
            max_steps: 200_000,
        }
    }
}

impl IvpOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(1e-13..=1e-6).contains(&self.tol) {
            return Err(Error::InvalidInput(format!(
                "integration tolerance {} outside [1e-13, 1e-6]",
                self.tol
            )));
        }
        Ok(())
    }
}

/// One accepted integration point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub lambda: f64,
    pub x: Complex64,
    pub xdot: Complex64,
}

/// Crossing of a horizontal line through a pole of the potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    pub lambda: f64,
    /// Imaginary part of the crossed line.
    pub line: f64,
    /// +1 when Im x increases through the line, -1 otherwise.
    pub direction: i32,
}

/// Result of one initial value problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub samples: Vec<Sample>,
    /// Total time T of the path.
    pub time: Complex64,
    pub action: Complex64,
    pub energy: Complex64,
    pub energy_drift: f64,
    /// d x(1) / d control.
    pub sensitivity: Complex64,
    pub crossings: Vec<CrossingEvent>,
}

impl PathRecord {
    pub fn terminal(&self) -> Complex64 {
        self.samples.last().expect("path has samples").x
    }

    pub fn terminal_xdot(&self) -> Complex64 {
        self.samples.last().expect("path has samples").xdot
    }

    pub fn initial_xdot(&self) -> Complex64 {
        self.samples[0].xdot
    }

    /// Net signed number of pole-line crossings.
    pub fn net_crossings(&self) -> i32 {
        self.crossings.iter().map(|c| c.direction).sum()
    }

    /// Closest approach of the path to a singularity, checked on samples.
    pub fn min_singularity_distance(&self, potential: &PotentialSpec) -> f64 {
        self.samples
            .iter()
            .map(|s| potential.singularity_distance(s.x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Position at `lambda` by cubic Hermite interpolation between samples.
    pub fn position_at(&self, lambda: f64) -> Complex64 {
        let s = &self.samples;
        if lambda <= s[0].lambda {
            return s[0].x;
        }
        let i = s.partition_point(|p| p.lambda < lambda);
        if i >= s.len() {
            return s[s.len() - 1].x;
        }
        let (a, b) = (&s[i - 1], &s[i]);
        let h = b.lambda - a.lambda;
        if h <= 0.0 {
            return b.x;
        }
        let t = (lambda - a.lambda) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        a.x * (2.0 * t3 - 3.0 * t2 + 1.0)
            + a.xdot * (h * (t3 - 2.0 * t2 + t))
            + b.x * (-2.0 * t3 + 3.0 * t2)
            + b.xdot * (h * (t3 - t2))
    }

    /// `n + 1` equally spaced points of the path in lambda.
    pub fn resample(&self, n: usize) -> Vec<(f64, Complex64)> {
        let (l0, l1) = (
            self.samples[0].lambda,
            self.samples[self.samples.len() - 1].lambda,
        );
        (0..=n)
            .map(|k| {
                let l = l0 + (l1 - l0) * k as f64 / n.max(1) as f64;
                (l, self.position_at(l))
            })
            .collect()
    }
}

/// Initial velocity dx/dlambda for total time `time` in fixed-energy mode.
pub fn initial_velocity(sys: &PhysicalSystem, time: Complex64, sign: i8) -> Result<Complex64> {
    let energy = sys
        .energy()
        .ok_or_else(|| Error::InvalidInput("initial velocity needs a fixed energy".into()))?;
    let v = sys.potential.eval(Complex64::new(sys.x0, 0.0))?;
    let speed = ((2.0 / sys.mass) * (energy - v)).sqrt();
    Ok(f64::from(sign.signum()) * speed * time)
}

/// Which sensitivity equation accompanies the path.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Sensitivity {
    Time,
    Velocity,
}

#[derive(Clone, Copy)]
struct State([Complex64; 5]);

impl State {
    fn axpy(&self, h: f64, k: &[State], w: &[f64]) -> State {
        let mut out = self.0;
        for (ki, &wi) in k.iter().zip(w) {
            if wi != 0.0 {
                for (o, kj) in out.iter_mut().zip(&ki.0) {
                    *o += kj * (h * wi);
                }
            }
        }
        State(out)
    }

    fn finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

struct Rhs<'a> {
    potential: &'a PotentialSpec,
    mass: f64,
    time: Complex64,
    kind: Sensitivity,
}

impl Rhs<'_> {
    fn eval(&self, y: &State) -> Result<State> {
        let [x, v, _, dx, dv] = y.0;
        let t = self.time;
        let m = self.mass;
        let vp = self.potential.deriv(x)?;
        let vpp = self.potential.second_deriv(x)?;
        let pot = self.potential.eval(x)?;
        let ds = m * v * v / (2.0 * t) - t * pot;
        let acc = -(t * t / m) * vp;
        let ddv = match self.kind {
            Sensitivity::Time => -(2.0 * t / m) * vp - (t * t / m) * vpp * dx,
            Sensitivity::Velocity => -(t * t / m) * vpp * dx,
        };
        Ok(State([v, acc, ds, dv, ddv]))
    }
}

// Dormand-Prince 5(4) tableau. The system is autonomous, so the nodes are
// not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate from explicit initial data over [l0, l1] (l1 may be below l0).
///
/// The sensitivity columns start at zero, so `sensitivity` of the result is
/// only meaningful for [`integrate_ivp`].
pub fn integrate_segment(
    sys: &PhysicalSystem,
    time: Complex64,
    x_start: Complex64,
    xdot_start: Complex64,
    span: (f64, f64),
    opts: &IvpOptions,
) -> Result<PathRecord> {
    let init = State([
        x_start,
        xdot_start,
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    ]);
    run(sys, time, init, span, opts, Sensitivity::Velocity)
}

/// Solve the initial value problem for the given control.
///
/// `sign` selects the root of the initial velocity in fixed-energy mode and
/// is ignored in fixed-time mode.
pub fn integrate_ivp(
    sys: &PhysicalSystem,
    ctrl: ControlParameter,
    sign: i8,
    opts: &IvpOptions,
) -> Result<PathRecord> {
    let zero = Complex64::new(0.0, 0.0);
    let x0 = Complex64::new(sys.x0, 0.0);
    match (ctrl, sys.mode) {
        (ControlParameter::ComplexTime(t), Mode::FixedEnergy { .. }) => {
            if t.norm() < 1e-12 {
                return Err(Error::InvalidInput("total time must be nonzero".into()));
            }
            let v0 = initial_velocity(sys, t, sign)?;
            let init = State([x0, v0, zero, zero, v0 / t]);
            run(sys, t, init, (0.0, 1.0), opts, Sensitivity::Time)
        }
        (ControlParameter::ComplexVelocity(v0), Mode::FixedTime { time }) => {
            let init = State([x0, v0, zero, zero, Complex64::new(1.0, 0.0)]);
            run(
                sys,
                Complex64::new(time, 0.0),
                init,
                (0.0, 1.0),
                opts,
                Sensitivity::Velocity,
            )
        }
        _ => Err(Error::InvalidInput(
            "control parameter does not match the system mode".into(),
        )),
    }
}

/// Terminal position x(1) of the initial value problem.
pub fn final_position(
    sys: &PhysicalSystem,
    ctrl: ControlParameter,
    sign: i8,
    opts: &IvpOptions,
) -> Result<Complex64> {
    integrate_ivp(sys, ctrl, sign, opts).map(|p| p.terminal())
}

fn energy_of(rhs: &Rhs, x: Complex64, v: Complex64) -> Result<Complex64> {
    let w = v / rhs.time;
    Ok(0.5 * rhs.mass * w * w + rhs.potential.eval(x)?)
}

fn run(
    sys: &PhysicalSystem,
    time: Complex64,
    init: State,
    span: (f64, f64),
    opts: &IvpOptions,
    kind: Sensitivity,
) -> Result<PathRecord> {
    opts.validate()?;
    let rhs = Rhs {
        potential: &sys.potential,
        mass: sys.mass,
        time,
        kind,
    };
    let (l0, l1) = span;
    let dir = if l1 >= l0 { 1.0 } else { -1.0 };
    let length = (l1 - l0).abs();
    let mut lambda = l0;
    let mut y = init;
    let e0 = energy_of(&rhs, y.0[0], y.0[1])?;
    let mut drift: f64 = 0.0;
    let mut samples = vec![Sample {
        lambda,
        x: y.0[0],
        xdot: y.0[1],
    }];
    let mut h = (0.01 * length).max(opts.min_step);
    let mut k1 = rhs.eval(&y)?;
    let mut steps = 0usize;
    while (l1 - lambda) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepUnderflow { lambda });
        }
        let remaining = (l1 - lambda).abs();
        let last = h >= remaining;
        let hs = if last { remaining } else { h };
        let hd = hs * dir;
        match dp_step(&rhs, &y, &k1, hd) {
            Ok((y_new, k7, err)) => {
                let mut norm: f64 = 0.0;
                for j in 0..5 {
                    let scale = opts.tol * (1.0 + y.0[j].norm().max(y_new.0[j].norm()));
                    norm = norm.max(err.0[j].norm() / scale);
                }
                if norm <= 1.0 && y_new.finite() {
                    lambda = if last { l1 } else { lambda + hd };
                    y = y_new;
                    k1 = k7;
                    let dist = sys.potential.singularity_distance(y.0[0]);
                    if dist < opts.pole_radius {
                        return Err(Error::PoleHit {
                            lambda,
                            distance: dist,
                        });
                    }
                    let e = energy_of(&rhs, y.0[0], y.0[1])?;
                    drift = drift.max((e - e0).norm());
                    samples.push(Sample {
                        lambda,
                        x: y.0[0],
                        xdot: y.0[1],
                    });
                    let fac = if norm == 0.0 {
                        5.0
                    } else {
                        (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    h = hs * fac;
                } else {
                    let fac = if norm.is_finite() {
                        (0.9 * norm.powf(-0.2)).clamp(0.1, 0.5)
                    } else {
                        0.25
                    };
                    h = hs * fac;
                }
            }
            Err(Error::PoleEvaluation(_)) => h = hs * 0.25,
            Err(e) => return Err(e),
        }
        if h < opts.min_step {
            let dist = sys.potential.singularity_distance(y.0[0]);
            if dist < 1e-3 {
                return Err(Error::PoleHit {
                    lambda,
                    distance: dist,
                });
            }
            return Err(Error::StepUnderflow { lambda });
        }
    }
    let crossings = crossings_of(&samples, &sys.potential);
    Ok(PathRecord {
        samples,
        time,
        action: y.0[2],
        energy: e0,
        energy_drift: drift,
        sensitivity: y.0[3],
        crossings,
    })
}

fn dp_step(rhs: &Rhs, y: &State, k1: &State, h: f64) -> Result<(State, State, State)> {
    let mut k = [*k1; 7];
    for s in 1..7 {
        let ys = y.axpy(h, &k[..s], &A[s][..s]);
        k[s] = rhs.eval(&ys)?;
    }
    let y_new = y.axpy(h, &k[..6], &A[6][..6]);
    let k7 = rhs.eval(&y_new)?;
    k[6] = k7;
    let zero = State([Complex64::new(0.0, 0.0); 5]);
    let err = zero.axpy(h, &k, &E);
    Ok((y_new, k7, err))
}

/// Imaginary parts of the horizontal lines through the potential's poles
/// that lie between `a` and `b`.
fn pole_lines_between(potential: &PotentialSpec, a: f64, b: f64) -> Vec<f64> {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    match potential.kind {
        PotentialKind::RosenMorse => {
            let first = (lo / PI - 0.5).ceil() as i64;
            let last = (hi / PI - 0.5).floor() as i64;
            (first..=last)
                .map(|n| PI * (n as f64 + 0.5))
                .filter(|&l| l > lo && l <= hi)
                .collect()
        }
        PotentialKind::Lorentzian => [-1.0, 1.0]
            .into_iter()
            .filter(|&l| l > lo && l <= hi)
            .collect(),
        _ => Vec::new(),
    }
}

fn crossings_of(samples: &[Sample], potential: &PotentialSpec) -> Vec<CrossingEvent> {
    let mut out = Vec::new();
    for w in samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.x.im == b.x.im {
            continue;
        }
        let up = b.x.im > a.x.im;
        let mut lines = pole_lines_between(potential, a.x.im, b.x.im);
        if !up {
            lines.reverse();
        }
        for line in lines {
            let t = (line - a.x.im) / (b.x.im - a.x.im);
            out.push(CrossingEvent {
                lambda: a.lambda + t * (b.lambda - a.lambda),
                line,
                direction: if up { 1 } else { -1 },
            });
        }
    }
    out
}

/// Crossings of the horizontal pole lines by a recorded path.
pub fn detect_crossings(
    path: &PathRecord,
    potential: &PotentialSpec,
) -> Result<Vec<CrossingEvent>> {
    if !potential.has_poles() {
        return Err(Error::InvalidInput(
            "crossing detection needs a potential with poles".into(),
        ));
    }
    Ok(crossings_of(&path.samples, potential))
}

/// Classical action accumulated along the path.
pub fn action_along_path(path: &PathRecord) -> Complex64 {
    path.action
}
