//! Saddle points of the real-time path integral: Newton solves of the
//! shooting problem, the Rosen-Morse closed form, real-saddle enumeration and
//! caustic location.

use crate::dynamics::{integrate_ivp, ControlParameter, IvpOptions, PathRecord};
use crate::error::{Error, Result};
use crate::model::{Mode, PhysicalSystem, PotentialKind};
use num_complex::Complex64;
use std::f64::consts::PI;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which function of the endpoint the shooting residual compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordinateMode {
    /// r = x(1) - x1
    Plain,
    /// r = sinh x(1) - sinh x1, blind to the branch of arcsinh reached.
    SinhX1,
}

impl CoordinateMode {
    pub fn map(&self, z: Complex64) -> Complex64 {
        match self {
            Self::Plain => z,
            Self::SinhX1 => z.sinh(),
        }
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        match self {
            Self::Plain => Complex64::new(1.0, 0.0),
            Self::SinhX1 => z.cosh(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Plain => "plain",
            Self::SinhX1 => "sinh_x1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaddleKind {
    RealDirect,
    RealBounce,
    ComplexPair,
    Continued,
}

impl SaddleKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RealDirect => "real_direct",
            Self::RealBounce => "real_bounce",
            Self::ComplexPair => "complex_pair",
            Self::Continued => "continued",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "real_direct" => Self::RealDirect,
            "real_bounce" => Self::RealBounce,
            "complex_pair" => Self::ComplexPair,
            "continued" => Self::Continued,
            _ => return None,
        })
    }

    pub fn is_real(&self) -> bool {
        matches!(self, Self::RealDirect | Self::RealBounce)
    }
}

/// Sheet bookkeeping for the Rosen-Morse closed form.
///
/// `c` is the overall sign in sinh x = c b sinh u, `sheet0`/`sheet1` label the
/// arcsinh branches of the endpoints and `crossing_count` is the number of
/// quanta i pi sqrt(2 m V0) added to the action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchLabel {
    pub c: i8,
    pub sheet0: i64,
    pub sheet1: i64,
    pub crossing_count: i32,
}

impl BranchLabel {
    pub fn new(c: i8, sheet0: i64, sheet1: i64) -> Self {
        Self {
            c,
            sheet0,
            sheet1,
            crossing_count: 0,
        }
    }
}

/// Principal arcsinh with cuts on the imaginary axis beyond +-i. Points on
/// the cut take the limit from Re z > 0.
pub fn asinh_c(z: Complex64) -> Complex64 {
    if z.re < 0.0 {
        return -asinh_c(-z);
    }
    let z = Complex64::new(z.re.abs(), z.im);
    (z + (z + I).sqrt() * (z - I).sqrt()).ln()
}

/// Value of arcsinh on sheet `j`.
pub fn sheet_value(w: Complex64, j: i64) -> Complex64 {
    let a = asinh_c(w);
    let s = if j.rem_euclid(2) == 0 { a } else { -a };
    s + I * (PI * j as f64)
}

/// Closed-form solution of the Rosen-Morse problem at a (possibly complex)
/// energy: sinh x = c b sinh(u) with u linear in lambda.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmClosedForm {
    pub energy: Complex64,
    pub mass: f64,
    pub strength: f64,
    pub b: Complex64,
    pub omega: Complex64,
    pub r: Complex64,
    /// sqrt(2 m V0)
    pub coupling: f64,
}

impl RmClosedForm {
    pub fn new(sys: &PhysicalSystem, energy: Complex64) -> Result<Self> {
        if sys.potential.kind != PotentialKind::RosenMorse {
            return Err(Error::InvalidInput(
                "closed form exists only for the Rosen-Morse barrier".into(),
            ));
        }
        let v0 = sys.potential.strength;
        if (energy - v0).norm() < 1e-14 * v0.max(1.0) {
            return Err(Error::DegenerateEnergy);
        }
        if energy.norm() < 1e-300 {
            return Err(Error::InvalidInput(
                "closed form needs nonzero energy".into(),
            ));
        }
        let m = sys.mass;
        Ok(Self {
            energy,
            mass: m,
            strength: v0,
            b: ((energy - v0) / energy).sqrt(),
            omega: (2.0 * energy / m).sqrt(),
            r: (v0 / energy).sqrt(),
            coupling: (2.0 * m * v0).sqrt(),
        })
    }

    /// Closed form at the system's fixed energy.
    pub fn for_system(sys: &PhysicalSystem) -> Result<Self> {
        let e = sys
            .energy()
            .ok_or_else(|| Error::InvalidInput("fixed-energy system required".into()))?;
        Self::new(sys, Complex64::new(e, 0.0))
    }

    /// The action quantum i pi sqrt(2 m V0).
    pub fn quantum(&self) -> Complex64 {
        I * (PI * self.coupling)
    }

    fn argument(&self, x: Complex64, c: i8) -> Result<Complex64> {
        let mut w = x.sinh() / (self.b * f64::from(c.signum()));
        if w.re.abs() <= 1e-15 * w.norm() {
            w.re = 0.0;
        }
        if (w - I).norm() < 1e-14 || (w + I).norm() < 1e-14 {
            return Err(Error::BranchAmbiguity);
        }
        Ok(w)
    }

    pub fn u_on_sheet(&self, x: Complex64, c: i8, sheet: i64) -> Result<Complex64> {
        Ok(sheet_value(self.argument(x, c)?, sheet))
    }

    /// Branch value of u for endpoint `x` closest to `reference`, with its sheet.
    pub fn u_nearest(&self, x: Complex64, c: i8, reference: Complex64) -> Result<(Complex64, i64)> {
        let w = self.argument(x, c)?;
        let centre = (reference.im / PI).round() as i64;
        let mut best = (sheet_value(w, centre), centre);
        for j in centre - 3..=centre + 3 {
            let v = sheet_value(w, j);
            if (v - reference).norm() < (best.0 - reference).norm() {
                best = (v, j);
            }
        }
        Ok(best)
    }

    pub fn time(&self, u0: Complex64, u1: Complex64) -> Complex64 {
        (u1 - u0) / self.omega
    }

    /// dx/dlambda at a point of the closed-form path.
    pub fn xdot(&self, x: Complex64, u: Complex64, c: i8, time: Complex64) -> Complex64 {
        f64::from(c.signum()) * self.b * self.omega * time * u.cosh() / x.cosh()
    }

    fn factors(&self, u: Complex64) -> (Complex64, Complex64) {
        let (ch, sh) = (u.cosh(), u.sinh());
        (ch + self.r * sh, ch - self.r * sh)
    }

    /// arctanh(r tanh u) written as a difference of principal logarithms.
    pub fn arctanh_term(&self, u: Complex64) -> Complex64 {
        let (p, m) = self.factors(u);
        0.5 * (p.ln() - m.ln())
    }

    /// Action with principal logarithms at both endpoints.
    pub fn action_principal(&self, u0: Complex64, u1: Complex64) -> Complex64 {
        self.energy * self.time(u0, u1)
            - self.coupling * (self.arctanh_term(u1) - self.arctanh_term(u0))
    }

    /// Action with the logarithms continued along the straight segment from
    /// u0 to u1, which is the image of the classical path.
    pub fn action_lambda_continuous(&self, u0: Complex64, u1: Complex64) -> Result<Complex64> {
        let dp = self.unwrapped_log_change(u0, u1, true)?;
        let dm = self.unwrapped_log_change(u0, u1, false)?;
        Ok(self.energy * self.time(u0, u1) - self.coupling * 0.5 * (dp - dm))
    }

    /// Integer n with lambda-continuous = principal + n * quantum.
    pub fn winding(&self, u0: Complex64, u1: Complex64) -> Result<i32> {
        let d = self.action_lambda_continuous(u0, u1)? - self.action_principal(u0, u1);
        Ok((d.im / (PI * self.coupling)).round() as i32)
    }

    fn unwrapped_log_change(&self, u0: Complex64, u1: Complex64, plus: bool) -> Result<Complex64> {
        let g = |t: f64| {
            let (p, m) = self.factors(u0 + (u1 - u0) * t);
            if plus {
                p
            } else {
                m
            }
        };
        let (g0, g1) = (g(0.0), g(1.0));
        if g0.norm() == 0.0 || g1.norm() == 0.0 {
            return Err(Error::BranchAmbiguity);
        }
        let mut phase = 0.0;
        let n = 256;
        for k in 0..n {
            phase += phase_change(&g, k as f64 / n as f64, (k + 1) as f64 / n as f64, 0)?;
        }
        Ok(Complex64::new((g1.norm() / g0.norm()).ln(), phase))
    }
}

fn phase_change(g: &dyn Fn(f64) -> Complex64, a: f64, b: f64, depth: u32) -> Result<f64> {
    let (ga, gb) = (g(a), g(b));
    if ga.norm() == 0.0 || gb.norm() == 0.0 {
        return Err(Error::BranchAmbiguity);
    }
    let d = (gb / ga).arg();
    if d.abs() < 0.2 || depth > 48 {
        return Ok(d);
    }
    let mid = 0.5 * (a + b);
    Ok(phase_change(g, a, mid, depth + 1)? + phase_change(g, mid, b, depth + 1)?)
}

/// Closed-form saddle for a chosen pair of endpoint sheets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormSaddle {
    pub time: Complex64,
    /// Time offset C in u = omega (T lambda - C).
    pub offset: Complex64,
    pub u0: Complex64,
    pub u1: Complex64,
    pub action: Complex64,
    /// Shooting sign of the initial velocity that produces this path.
    pub sign: i8,
}

/// Total time, offset and action of the Rosen-Morse saddle on `branch`.
pub fn rm_closed_form_saddle(
    sys: &PhysicalSystem,
    x1: f64,
    branch: BranchLabel,
) -> Result<ClosedFormSaddle> {
    let cf = RmClosedForm::for_system(sys)?;
    let x0 = Complex64::new(sys.x0, 0.0);
    let u0 = cf.u_on_sheet(x0, branch.c, branch.sheet0)?;
    let u1 = cf.u_on_sheet(Complex64::new(x1, 0.0), branch.c, branch.sheet1)?;
    let time = cf.time(u0, u1);
    let offset = -u0 / cf.omega;
    let action = cf.action_principal(u0, u1) + cf.quantum() * f64::from(branch.crossing_count);
    let xdot = cf.xdot(x0, u0, branch.c, time);
    let plus = crate::dynamics::initial_velocity(sys, time, 1)?;
    let sign = if (xdot - plus).norm() <= (xdot + plus).norm() {
        1
    } else {
        -1
    };
    Ok(ClosedFormSaddle {
        time,
        offset,
        u0,
        u1,
        action,
        sign,
    })
}

/// Closed-form action for total time `time` and offset `offset`, with
/// `branch.crossing_count` quanta added to the principal value.
pub fn rm_classical_action(
    sys: &PhysicalSystem,
    time: Complex64,
    offset: Complex64,
    branch: &BranchLabel,
) -> Result<Complex64> {
    let cf = RmClosedForm::for_system(sys)?;
    let u0 = -cf.omega * offset;
    let u1 = cf.omega * (time - offset);
    Ok(cf.action_principal(u0, u1) + cf.quantum() * f64::from(branch.crossing_count))
}

/// u-plane endpoints of an integrated Rosen-Morse path (c = +1).
pub fn path_u_endpoints(
    cf: &RmClosedForm,
    x0: f64,
    path: &PathRecord,
) -> Result<(Complex64, Complex64)> {
    u_endpoints(cf, x0, path.time, path.initial_xdot())
}

/// u-plane endpoints of the path with total time `time` leaving `x0` with
/// dx/dlambda = `xdot0` (c = +1).
pub fn u_endpoints(
    cf: &RmClosedForm,
    x0: f64,
    time: Complex64,
    xdot0: Complex64,
) -> Result<(Complex64, Complex64)> {
    let x = Complex64::new(x0, 0.0);
    let target = xdot0;
    let mut best: Option<(f64, Complex64)> = None;
    for j in 0..2 {
        let u = cf.u_on_sheet(x, 1, j)?;
        let d = (cf.xdot(x, u, 1, time) - target).norm();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, u));
        }
    }
    let u0 = best.expect("two candidates").1;
    Ok((u0, u0 + cf.omega * time))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMethod {
    /// Variational equations integrated with the path.
    Sensitivity,
    /// Central difference with step 1e-7 (1 + |ctrl|).
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub jacobian: JacobianMethod,
    pub ivp: IvpOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            jacobian: JacobianMethod::Sensitivity,
            ivp: IvpOptions::default(),
        }
    }
}

/// A converged saddle point together with its path data.
#[derive(Debug, Clone, PartialEq)]
pub struct Saddle {
    pub ctrl: ControlParameter,
    pub sign: i8,
    pub x1: f64,
    pub mode: CoordinateMode,
    pub branch: BranchLabel,
    pub terminal: Complex64,
    pub initial_xdot: Complex64,
    pub terminal_xdot: Complex64,
    /// Action accumulated by quadrature along the integrated path.
    pub ivp_action: Complex64,
    /// Action including `branch.crossing_count` quanta.
    pub action: Complex64,
    pub exponent: Complex64,
    pub net_crossings: i32,
    pub kind: SaddleKind,
    pub relevant: bool,
    /// d r / d ctrl at the solution.
    pub jacobian: Complex64,
    pub residual: f64,
    pub min_pole_distance: f64,
    pub energy: Complex64,
}

/// Re(exponent) at or below this counts as relevant.
pub const RELEVANCE_TOL: f64 = 1e-10;

impl Saddle {
    /// Total time T of the path.
    pub fn time(&self, sys: &PhysicalSystem) -> Complex64 {
        match (self.ctrl, sys.mode) {
            (ControlParameter::ComplexTime(t), _) => t,
            (_, Mode::FixedTime { time }) => Complex64::new(time, 0.0),
            _ => unreachable!("control matches mode"),
        }
    }

    /// i (S + E T) / hbar at fixed energy, i S / hbar at fixed time.
    pub fn exponent_with(&self, sys: &PhysicalSystem, hbar: f64) -> Complex64 {
        let phase = match sys.mode {
            Mode::FixedEnergy { energy } => self.action + energy * self.time(sys),
            Mode::FixedTime { .. } => self.action,
        };
        I * phase / hbar
    }

    /// Change the number of action quanta and refresh derived fields.
    pub fn set_crossing_count(&mut self, sys: &PhysicalSystem, count: i32) {
        let q = action_quantum(sys);
        self.branch.crossing_count = count;
        self.action = self.ivp_action + q * f64::from(count);
        self.refresh(sys);
    }

    fn refresh(&mut self, sys: &PhysicalSystem) {
        self.exponent = self.exponent_with(sys, sys.hbar);
        self.relevant = self.exponent.re <= RELEVANCE_TOL;
        self.kind = classify_kind(self);
    }

    /// Whether the path ends on the requested point itself rather than on
    /// another point with the same sinh.
    pub fn lands_on_target(&self) -> bool {
        (self.terminal - self.x1).norm() < 1e-6 * (1.0 + self.x1.abs())
    }
}

/// i pi sqrt(2 m V0) for the Rosen-Morse barrier, zero otherwise.
pub fn action_quantum(sys: &PhysicalSystem) -> Complex64 {
    if sys.potential.kind == PotentialKind::RosenMorse {
        I * (PI * (2.0 * sys.mass * sys.potential.strength).sqrt())
    } else {
        Complex64::new(0.0, 0.0)
    }
}

fn classify_kind(s: &Saddle) -> SaddleKind {
    let c = s.ctrl.value();
    let real = c.im.abs() <= 1e-9 * (1.0 + c.norm())
        && s.terminal.im.abs() < 1e-7
        && s.initial_xdot.im.abs() < 1e-7 * (1.0 + s.initial_xdot.norm());
    if real {
        if s.initial_xdot.re * s.terminal_xdot.re > 0.0 {
            SaddleKind::RealDirect
        } else {
            SaddleKind::RealBounce
        }
    } else if s.lands_on_target() {
        SaddleKind::ComplexPair
    } else {
        SaddleKind::Continued
    }
}

fn residual_of(path: &PathRecord, target: Complex64, mode: CoordinateMode) -> Complex64 {
    mode.map(path.terminal()) - mode.map(target)
}

fn jacobian_of(
    sys: &PhysicalSystem,
    ctrl: ControlParameter,
    sign: i8,
    path: &PathRecord,
    mode: CoordinateMode,
    opts: &NewtonOptions,
) -> Result<Complex64> {
    match opts.jacobian {
        JacobianMethod::Sensitivity => Ok(mode.derivative(path.terminal()) * path.sensitivity),
        JacobianMethod::FiniteDifference => {
            let c = ctrl.value();
            let h = 1e-7 * (1.0 + c.norm());
            let a = integrate_ivp(sys, ctrl.with_value(c + h), sign, &opts.ivp)?.terminal();
            let b = integrate_ivp(sys, ctrl.with_value(c - h), sign, &opts.ivp)?.terminal();
            Ok((mode.map(a) - mode.map(b)) / (2.0 * h))
        }
    }
}

/// Solve x(1; ctrl) = x1 (or its sinh image) by damped Newton iteration.
pub fn newton_solve(
    sys: &PhysicalSystem,
    guess: ControlParameter,
    x1: f64,
    mode: CoordinateMode,
    sign: i8,
    opts: &NewtonOptions,
) -> Result<Saddle> {
    let target = Complex64::new(x1, 0.0);
    let scale = 1.0 + mode.map(target).norm();
    let mut ctrl = guess;
    let mut path = integrate_ivp(sys, ctrl, sign, &opts.ivp)?;
    let mut r = residual_of(&path, target, mode);
    for it in 0..=opts.max_iter {
        if r.norm() <= opts.tol * scale {
            let jac = jacobian_of(sys, ctrl, sign, &path, mode, opts)?;
            return finish(sys, ctrl, sign, x1, mode, &path, jac, r.norm());
        }
        if it == opts.max_iter {
            break;
        }
        let jac = jacobian_of(sys, ctrl, sign, &path, mode, opts)?;
        if jac.norm() < 1e-12 {
            return Err(Error::JacobianSingular(jac.norm()));
        }
        let step = -r / jac;
        let mut damping = 1.0;
        loop {
            let trial = ctrl.with_value(ctrl.value() + step * damping);
            if let Ok(p) = integrate_ivp(sys, trial, sign, &opts.ivp) {
                let rt = residual_of(&p, target, mode);
                if rt.norm() < r.norm() || rt.norm() <= opts.tol * scale {
                    ctrl = trial;
                    path = p;
                    r = rt;
                    break;
                }
            }
            damping *= 0.5;
            if damping < 1e-4 {
                // integration noise floor
                if r.norm() <= 100.0 * opts.tol * scale {
                    let jac = jacobian_of(sys, ctrl, sign, &path, mode, opts)?;
                    return finish(sys, ctrl, sign, x1, mode, &path, jac, r.norm());
                }
                return Err(Error::NoConvergence {
                    iterations: it + 1,
                    residual: r.norm(),
                });
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: r.norm(),
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    sys: &PhysicalSystem,
    ctrl: ControlParameter,
    sign: i8,
    x1: f64,
    mode: CoordinateMode,
    path: &PathRecord,
    jacobian: Complex64,
    residual: f64,
) -> Result<Saddle> {
    let mut s = Saddle {
        ctrl,
        sign,
        x1,
        mode,
        branch: BranchLabel::new(1, 0, 0),
        terminal: path.terminal(),
        initial_xdot: path.initial_xdot(),
        terminal_xdot: path.terminal_xdot(),
        ivp_action: path.action,
        action: path.action,
        exponent: Complex64::new(0.0, 0.0),
        net_crossings: path.net_crossings(),
        kind: SaddleKind::ComplexPair,
        relevant: false,
        jacobian,
        residual,
        min_pole_distance: path.min_singularity_distance(&sys.potential),
        energy: path.energy,
    };
    let mut count = 0;
    if sys.potential.kind == PotentialKind::RosenMorse {
        if let Ok(cf) = RmClosedForm::new(sys, path.energy) {
            if let Ok((u0, u1)) = path_u_endpoints(&cf, sys.x0, path) {
                let sheet0 = cf
                    .u_nearest(Complex64::new(sys.x0, 0.0), 1, u0)
                    .map(|p| p.1)
                    .unwrap_or(0);
                let sheet1 = cf
                    .u_nearest(Complex64::new(x1, 0.0), 1, u1)
                    .map(|p| p.1)
                    .unwrap_or(0);
                s.branch = BranchLabel::new(1, sheet0, sheet1);
                if !s.lands_on_target() {
                    let d = cf.action_principal(u0, u1) - path.action;
                    count = (d.im / (PI * cf.coupling)).round() as i32;
                }
            }
        }
    }
    s.set_crossing_count(sys, count);
    Ok(s)
}

/// Range and resolution of a real-axis control scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealScan {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
}

impl RealScan {
    /// A scan range wide enough for the direct, bounce and lingering paths
    /// of the barrier problems considered here.
    pub fn default_for(sys: &PhysicalSystem, x1: f64) -> Self {
        let dist = (x1 - sys.x0).abs() + 10.0;
        match sys.mode {
            Mode::FixedEnergy { energy } => {
                let speed = (2.0 * energy / sys.mass).sqrt();
                Self {
                    lo: 1e-3,
                    hi: 4.0 * dist / speed,
                    samples: 1600,
                }
            }
            Mode::FixedTime { time } => {
                let kick = time * (2.0 * sys.potential.strength / sys.mass).sqrt();
                let v = dist + 2.0 * kick;
                Self {
                    lo: -v,
                    hi: v,
                    samples: 2000,
                }
            }
        }
    }

    fn points(&self) -> Vec<f64> {
        let n = self.samples.max(2);
        (0..n)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64)
            .collect()
    }
}

fn real_signs(sys: &PhysicalSystem) -> Vec<i8> {
    match sys.mode {
        Mode::FixedEnergy { .. } => vec![1, -1],
        Mode::FixedTime { .. } => vec![1],
    }
}

fn real_terminal(sys: &PhysicalSystem, c: f64, sign: i8, ivp: &IvpOptions) -> Option<f64> {
    let ctrl = ControlParameter::for_system(sys, Complex64::new(c, 0.0));
    integrate_ivp(sys, ctrl, sign, ivp)
        .ok()
        .map(|p| p.terminal().re)
        .filter(|v| v.is_finite())
}

fn bisect<F: Fn(f64) -> Option<f64>>(f: F, mut a: f64, mut b: f64, mut fa: f64) -> Option<f64> {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            return Some(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs()) {
            break;
        }
    }
    Some(0.5 * (a + b))
}

/// All real saddles reaching `x1`, found by bracketing sign changes of
/// x(1; c) - x1 along the real control axis.
pub fn find_all_real_saddles(
    sys: &PhysicalSystem,
    x1: f64,
    scan: &RealScan,
    opts: &NewtonOptions,
) -> Result<Vec<Saddle>> {
    let mut out: Vec<Saddle> = Vec::new();
    for sign in real_signs(sys) {
        let pts = scan.points();
        let vals: Vec<Option<f64>> = pts
            .iter()
            .map(|&c| real_terminal(sys, c, sign, &opts.ivp).map(|v| v - x1))
            .collect();
        for k in 0..pts.len() - 1 {
            let (Some(fa), Some(fb)) = (vals[k], vals[k + 1]) else {
                continue;
            };
            if (fa > 0.0) == (fb > 0.0) && fa != 0.0 {
                continue;
            }
            let f = |c: f64| real_terminal(sys, c, sign, &opts.ivp).map(|v| v - x1);
            let Some(root) = bisect(f, pts[k], pts[k + 1], fa) else {
                continue;
            };
            let ctrl = ControlParameter::for_system(sys, Complex64::new(root, 0.0));
            let Ok(s) = newton_solve(sys, ctrl, x1, CoordinateMode::Plain, sign, opts) else {
                continue;
            };
            if !s.kind.is_real() {
                continue;
            }
            if out
                .iter()
                .any(|o| o.sign == s.sign && (o.ctrl.value() - s.ctrl.value()).norm() < 1e-6)
            {
                continue;
            }
            out.push(s);
        }
    }
    out.sort_by(|a, b| a.ctrl.value().re.total_cmp(&b.ctrl.value().re));
    Ok(out)
}

/// Final positions in `bracket` where two real saddles coalesce, located as
/// sign changes of d x(1) / d c along the real control axis.
pub fn caustic_locate(
    sys: &PhysicalSystem,
    sign: i8,
    bracket: (f64, f64),
    scan: &RealScan,
    opts: &NewtonOptions,
) -> Result<Vec<f64>> {
    let jac = |c: f64| -> Option<(f64, f64)> {
        let ctrl = ControlParameter::for_system(sys, Complex64::new(c, 0.0));
        let p = integrate_ivp(sys, ctrl, sign, &opts.ivp).ok()?;
        Some((p.sensitivity.re, p.terminal().re))
    };
    let pts = scan.points();
    let vals: Vec<Option<(f64, f64)>> = pts.iter().map(|&c| jac(c)).collect();
    let (lo, hi) = if bracket.0 <= bracket.1 {
        bracket
    } else {
        (bracket.1, bracket.0)
    };
    let mut out = Vec::new();
    for k in 0..pts.len() - 1 {
        let (Some((ja, _)), Some((jb, _))) = (vals[k], vals[k + 1]) else {
            continue;
        };
        if (ja > 0.0) == (jb > 0.0) {
            continue;
        }
        let Some(root) = bisect(|c| jac(c).map(|v| v.0), pts[k], pts[k + 1], ja) else {
            continue;
        };
        if let Some((_, x1)) = jac(root) {
            if x1 >= lo && x1 <= hi {
                out.push(x1);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoBracket);
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}
