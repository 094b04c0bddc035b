//! Semiclassical energy-domain propagator built from tracked saddles, and
//! its comparison with the exact result.

use crate::error::{Error, Result};
use crate::exactprop::exact_energy_propagator;
use crate::model::{Mode, PhysicalSystem, PotentialKind};
use crate::saddles::{
    find_all_real_saddles, newton_solve, u_endpoints, NewtonOptions, RealScan, RmClosedForm,
    Saddle, SaddleKind,
};
use crate::tracking::{
    classify_relevance, track, EventKind, TrackEvent, TrackOptions, TrackRecord,
};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Second derivatives of W(x0, x1, E) = S + E T and of S(x0, x1, T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondDerivatives {
    pub w_ee: Complex64,
    pub w_x0e: Complex64,
    pub w_ex1: Complex64,
    pub w_x0x1: Complex64,
    pub s_x0x1: Complex64,
    pub s_tt: Complex64,
}

impl SecondDerivatives {
    fn from_w(
        w_ee: Complex64,
        w_x0e: Complex64,
        w_ex1: Complex64,
        w_x0x1: Complex64,
    ) -> Result<Self> {
        let s_tt = -1.0 / w_ee;
        if !(s_tt.norm() >= 1e-10) {
            return Err(Error::CausticDivergence(s_tt.norm()));
        }
        Ok(Self {
            w_ee,
            w_x0e,
            w_ex1,
            w_x0x1,
            s_x0x1: w_x0x1 - w_x0e * w_ex1 / w_ee,
            s_tt,
        })
    }

    /// -S_x0x1 / S_TT, the square of the semiclassical amplitude.
    pub fn amplitude_squared(&self) -> Complex64 {
        self.w_x0x1 * self.w_ee - self.w_x0e * self.w_ex1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMethod {
    /// Central differences of the Rosen-Morse closed form with the sheets of
    /// the saddle held fixed.
    ClosedForm,
    /// Central differences of re-solved neighbouring saddles.
    Resolve,
}

fn fd_step(v: f64) -> f64 {
    1e-5 * (1.0 + v.abs())
}

/// Closed-form total time T(x0, x1, E) on the branch of saddle `s`.
struct ClosedFormTime {
    u0: Complex64,
    u1: Complex64,
}

impl ClosedFormTime {
    fn new(sys: &PhysicalSystem, s: &Saddle) -> Result<Self> {
        let cf = RmClosedForm::for_system(sys)?;
        let (u0, u1) = u_endpoints(&cf, sys.x0, s.time(sys), s.initial_xdot)?;
        Ok(Self { u0, u1 })
    }

    fn time(&self, sys: &PhysicalSystem, x0: f64, x1: f64, energy: f64) -> Result<Complex64> {
        let cf = RmClosedForm::new(sys, Complex64::new(energy, 0.0))?;
        let (u0, _) = cf.u_nearest(Complex64::new(x0, 0.0), 1, self.u0)?;
        let (u1, _) = cf.u_nearest(Complex64::new(x1, 0.0), 1, self.u1)?;
        Ok(cf.time(u0, u1))
    }

    /// dW/dx1 = momentum at the labelled endpoint.
    fn momentum(&self, sys: &PhysicalSystem, x0: f64, x1: f64, energy: f64) -> Result<Complex64> {
        let cf = RmClosedForm::new(sys, Complex64::new(energy, 0.0))?;
        let (u1, _) = cf.u_nearest(Complex64::new(x1, 0.0), 1, self.u1)?;
        let _ = x0;
        let x = Complex64::new(x1, 0.0);
        Ok(sys.mass * cf.b * cf.omega * u1.cosh() / x.cosh())
    }
}

/// Second derivatives of the action at a saddle.
///
/// The energy derivative of W is the total time, so the closed-form
/// derivatives are central differences of T(x0, x1, E); W_x0x1 is a central
/// difference of the endpoint momentum.
pub fn second_derivatives(
    sys: &PhysicalSystem,
    s: &Saddle,
    method: DerivativeMethod,
) -> Result<SecondDerivatives> {
    let energy = sys.energy().ok_or_else(|| {
        Error::InvalidInput("second derivatives need a fixed-energy system".into())
    })?;
    let (x0, x1) = (sys.x0, s.x1);
    let (he, h0, h1) = (fd_step(energy), fd_step(x0), fd_step(x1));
    match method {
        DerivativeMethod::ClosedForm => {
            let cft = ClosedFormTime::new(sys, s)?;
            let t = |a: f64, b: f64, e: f64| cft.time(sys, a, b, e);
            let w_ee = (t(x0, x1, energy + he)? - t(x0, x1, energy - he)?) / (2.0 * he);
            let w_x0e = (t(x0 + h0, x1, energy)? - t(x0 - h0, x1, energy)?) / (2.0 * h0);
            let w_ex1 = (t(x0, x1 + h1, energy)? - t(x0, x1 - h1, energy)?) / (2.0 * h1);
            let w_x0x1 = (cft.momentum(sys, x0 + h0, x1, energy)?
                - cft.momentum(sys, x0 - h0, x1, energy)?)
                / (2.0 * h0);
            SecondDerivatives::from_w(w_ee, w_x0e, w_ex1, w_x0x1)
        }
        DerivativeMethod::Resolve => {
            let mut opts = NewtonOptions::default();
            opts.ivp.tol = 1e-12;
            let h = 1e-4;
            let solve = |sy: &PhysicalSystem, target: f64| -> Result<Saddle> {
                newton_solve(sy, s.ctrl, target, s.mode, s.sign, &opts)
            };
            let time = |sy: &PhysicalSystem, target: f64| solve(sy, target).map(|q| q.time(sy));
            let momentum = |sy: &PhysicalSystem, target: f64| -> Result<Complex64> {
                let q = solve(sy, target)?;
                let xt = q.terminal;
                let label = Complex64::new(target, 0.0);
                Ok(
                    sy.mass * q.terminal_xdot / q.time(sy) * s.mode.derivative(xt)
                        / s.mode.derivative(label),
                )
            };
            let w_ee = (time(&sys.with_energy(energy + h), x1)?
                - time(&sys.with_energy(energy - h), x1)?)
                / (2.0 * h);
            let w_x0e =
                (time(&sys.with_x0(x0 + h), x1)? - time(&sys.with_x0(x0 - h), x1)?) / (2.0 * h);
            let w_ex1 = (time(sys, x1 + h)? - time(sys, x1 - h)?) / (2.0 * h);
            let w_x0x1 = (momentum(&sys.with_x0(x0 + h), x1)?
                - momentum(&sys.with_x0(x0 - h), x1)?)
                / (2.0 * h);
            SecondDerivatives::from_w(w_ee, w_x0e, w_ex1, w_x0x1)
        }
    }
}

fn default_method(sys: &PhysicalSystem) -> DerivativeMethod {
    if sys.potential.kind == PotentialKind::RosenMorse {
        DerivativeMethod::ClosedForm
    } else {
        DerivativeMethod::Resolve
    }
}

/// Root of the amplitude squared with a fixed rule for the negative real
/// axis: there the root is taken on the negative imaginary axis, the
/// quarter-period phase loss of a reflection.
pub fn amplitude_root(a2: Complex64) -> Complex64 {
    if a2.re < 0.0 && a2.im.abs() <= 1e-12 * a2.norm() {
        return Complex64::new(0.0, -(-a2.re).sqrt());
    }
    a2.sqrt()
}

/// Keeps the branch of a square root continuous along a sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTracker {
    previous: Option<Complex64>,
}

impl PhaseTracker {
    pub fn reset(&mut self) {
        self.previous = None;
    }

    pub fn root(&mut self, a2: Complex64) -> Complex64 {
        let mut r = amplitude_root(a2);
        if let Some(p) = self.previous {
            if (r + p).norm() < (r - p).norm() {
                r = -r;
            }
        }
        self.previous = Some(r);
        r
    }
}

/// One saddle's contribution A exp(i W / hbar) with the given amplitude root.
pub fn saddle_term(sys: &PhysicalSystem, s: &Saddle, root: Complex64) -> Complex64 {
    root * s.exponent_with(sys, sys.hbar).exp()
}

/// Semiclassical propagator at a single point from an explicit saddle set,
/// counting only relevant saddles.
pub fn approx_energy_propagator(sys: &PhysicalSystem, saddles: &[Saddle]) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    for s in saddles
        .iter()
        .filter(|s| classify_relevance(sys, s, sys.hbar))
    {
        let d = second_derivatives(sys, s, default_method(sys))?;
        total += saddle_term(sys, s, amplitude_root(d.amplitude_squared()));
    }
    Ok(total)
}

/// Which saddles enter an approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxMode {
    /// Real saddles only.
    RealOnly,
    /// Real and complex saddles that solve the boundary value problem,
    /// dropped once the family has swept across a singularity.
    BvpComplex,
    /// All relevant saddles, analytically continued past crossings.
    Continued,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSample {
    pub x1: f64,
    pub exact: Complex64,
    pub real_only: Option<Complex64>,
    pub bvp_complex: Option<Complex64>,
    pub continued: Option<Complex64>,
    /// Kind and relevance of every saddle present at this point.
    pub inventory: Vec<(SaddleKind, bool)>,
    /// Events located in (previous x1, x1].
    pub events: Vec<EventKind>,
}

impl ComparisonSample {
    pub fn value(&self, mode: ApproxMode) -> Option<Complex64> {
        match mode {
            ApproxMode::RealOnly => self.real_only,
            ApproxMode::BvpComplex => self.bvp_complex,
            ApproxMode::Continued => self.continued,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonCurve {
    pub samples: Vec<ComparisonSample>,
    pub events: Vec<TrackEvent>,
}

impl ComparisonCurve {
    /// max |approx - exact| / max |exact| over samples with x1 in [lo, hi].
    pub fn sup_relative_error(&self, mode: ApproxMode, lo: f64, hi: f64) -> f64 {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for s in self.samples.iter().filter(|s| s.x1 >= lo && s.x1 <= hi) {
            let a = s.value(mode).unwrap_or(Complex64::new(f64::NAN, 0.0));
            num = num.max((a - s.exact).norm());
            den = den.max(s.exact.norm());
        }
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompareOptions {
    pub track: TrackOptions,
}

/// The saddle families used in the comparison: the direct path, which
/// continues through the fold into the complex plane, and the reflected
/// path, which ends at the fold.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleFamilies {
    pub direct: TrackRecord,
    pub bounce: Option<TrackRecord>,
}

/// Track the direct and bounce families of a fixed-energy barrier problem
/// over an ascending grid of final positions right of x0.
pub fn track_families(
    sys: &PhysicalSystem,
    grid: &[f64],
    opts: &TrackOptions,
) -> Result<SaddleFamilies> {
    let start = *grid
        .first()
        .ok_or_else(|| Error::InvalidInput("empty grid".into()))?;
    let real = find_all_real_saddles(sys, start, &RealScan::default_for(sys, start), &opts.newton)?;
    let direct = real
        .iter()
        .find(|s| s.kind == SaddleKind::RealDirect && s.sign == 1)
        .ok_or_else(|| Error::TrackStalled {
            x1: start,
            reason: "no direct real saddle".into(),
        })?;
    let bounce = real
        .iter()
        .find(|s| s.kind == SaddleKind::RealBounce && s.sign == 1);
    let direct = track(sys, direct, grid, opts)?;
    let bounce = match bounce {
        Some(b) => {
            let o = TrackOptions {
                stop_at_fold: true,
                ..*opts
            };
            Some(track(sys, b, grid, &o)?)
        }
        None => None,
    };
    Ok(SaddleFamilies { direct, bounce })
}

fn ascending(grid: &[f64]) -> bool {
    grid.windows(2).all(|w| w[1] > w[0])
}

/// Exact propagator alongside the real-only, complex and continued
/// semiclassical approximations on `grid`.
pub fn comparison_curve(
    sys: &PhysicalSystem,
    grid: &[f64],
    opts: &CompareOptions,
) -> Result<ComparisonCurve> {
    if !matches!(sys.mode, Mode::FixedEnergy { .. })
        || sys.potential.kind != PotentialKind::RosenMorse
    {
        return Err(Error::InvalidInput(
            "comparison needs a fixed-energy Rosen-Morse system".into(),
        ));
    }
    if grid.is_empty() || !ascending(grid) {
        return Err(Error::InvalidInput(
            "comparison grid must be ascending and nonempty".into(),
        ));
    }
    let degenerate: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&x| x <= sys.x0 + 1e-9)
        .collect();
    if degenerate.iter().any(|&x| x < sys.x0 - 1e-9) {
        return Err(Error::InvalidInput(
            "comparison grid must not extend left of x0".into(),
        ));
    }
    let tracked: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&x| x > sys.x0 + 1e-9)
        .collect();
    let families = track_families(sys, &tracked, &opts.track)?;
    let events = families.direct.events.clone();
    let crossing = events
        .iter()
        .find(|e| e.kind == EventKind::SingularityCrossing)
        .map(|e| e.x1);

    let mut samples = Vec::with_capacity(grid.len());
    let mut phase_direct = PhaseTracker::default();
    let mut phase_bounce = PhaseTracker::default();
    let mut prev_x1 = f64::NEG_INFINITY;
    for &x1 in grid {
        let exact = exact_energy_propagator(sys, x1)?;
        let here: Vec<EventKind> = events
            .iter()
            .filter(|e| e.x1 > prev_x1 && e.x1 <= x1)
            .map(|e| e.kind)
            .collect();
        if here.iter().any(|k| k.is_caustic()) {
            phase_direct.reset();
        }
        prev_x1 = x1;
        if x1 <= sys.x0 + 1e-9 {
            samples.push(degenerate_sample(sys, x1, exact, &families)?);
            continue;
        }
        let mut terms: Vec<(SaddleKind, bool, Option<Complex64>)> = Vec::new();
        let mut add = |s: &Saddle, tracker: &mut PhaseTracker| {
            let relevant = classify_relevance(sys, s, sys.hbar);
            let term = if relevant {
                second_derivatives(sys, s, DerivativeMethod::ClosedForm)
                    .ok()
                    .map(|d| saddle_term(sys, s, tracker.root(d.amplitude_squared())))
            } else {
                None
            };
            terms.push((s.kind, relevant, term));
        };
        if let Some(s) = families.direct.state_at(x1) {
            add(s, &mut phase_direct);
        }
        if let Some(s) = families.bounce.as_ref().and_then(|b| b.state_at(x1)) {
            add(s, &mut phase_bounce);
        }
        let sum = |keep: &dyn Fn(SaddleKind) -> bool| -> Option<Complex64> {
            let mut total = Complex64::new(0.0, 0.0);
            for (kind, relevant, term) in &terms {
                if *relevant && keep(*kind) {
                    total += (*term)?;
                }
            }
            Some(total)
        };
        let before_crossing = crossing.is_none_or(|c| x1 < c);
        samples.push(ComparisonSample {
            x1,
            exact,
            real_only: sum(&|k| k.is_real()),
            bvp_complex: sum(&|k| k.is_real() || (before_crossing && k == SaddleKind::ComplexPair)),
            continued: sum(&|_| true),
            inventory: terms.iter().map(|t| (t.0, t.1)).collect(),
            events: here,
        });
    }
    Ok(ComparisonCurve { samples, events })
}

/// At x1 = x0 the direct path has zero duration; its term is the limit
/// 1 / v(x0). The bounce term is computed as usual.
fn degenerate_sample(
    sys: &PhysicalSystem,
    x1: f64,
    exact: Complex64,
    families: &SaddleFamilies,
) -> Result<ComparisonSample> {
    let energy = sys.energy().expect("fixed energy");
    let v = sys.potential.eval(Complex64::new(sys.x0, 0.0))?;
    let speed = ((2.0 / sys.mass) * (energy - v)).sqrt();
    let mut total = 1.0 / speed;
    let mut inventory = vec![(SaddleKind::RealDirect, true)];
    if let Some(b) = families.bounce.as_ref().and_then(|b| b.states.first()) {
        let o = NewtonOptions::default();
        let s = newton_solve(sys, b.ctrl, x1, b.mode, b.sign, &o)?;
        let d = second_derivatives(sys, &s, DerivativeMethod::ClosedForm)?;
        total += saddle_term(sys, &s, amplitude_root(d.amplitude_squared()));
        inventory.push((s.kind, true));
    }
    Ok(ComparisonSample {
        x1,
        exact,
        real_only: Some(total),
        bvp_complex: Some(total),
        continued: Some(total),
        inventory,
        events: Vec::new(),
    })
}

/// Grid of `n` + 1 equally spaced points from `a` to `b`.
pub fn uniform_grid(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step).abs().round().max(1.0) as usize;
    (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_phase(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ControlParameter;
    use crate::model::PotentialSpec;
    use crate::saddles::CoordinateMode;

    fn rm() -> PhysicalSystem {
        PhysicalSystem::new(
            1.0,
            0.5,
            PotentialSpec::rosen_morse(1.0),
            Mode::FixedEnergy { energy: 0.9 },
            -5.0,
        )
        .unwrap()
    }

    fn saddle(sys: &PhysicalSystem, guess: Complex64, x1: f64, mode: CoordinateMode) -> Saddle {
        newton_solve(
            sys,
            ControlParameter::ComplexTime(guess),
            x1,
            mode,
            1,
            &NewtonOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn amplitude_is_inverse_velocity_product() {
        let sys = rm();
        let s = saddle(&sys, Complex64::new(2.25, 0.0), -2.0, CoordinateMode::Plain);
        let d = second_derivatives(&sys, &s, DerivativeMethod::ClosedForm).unwrap();
        let t = s.time(&sys);
        let expect = 1.0 / ((s.initial_xdot / t) * (s.terminal_xdot / t));
        assert!((d.amplitude_squared() - expect).norm() < 1e-8 * expect.norm());
    }

    #[test]
    fn methods_agree_on_complex_saddle() {
        let sys = rm();
        let s = saddle(&sys, Complex64::new(4.5, -1.2), 0.0, CoordinateMode::SinhX1);
        let a = second_derivatives(&sys, &s, DerivativeMethod::ClosedForm).unwrap();
        let b = second_derivatives(&sys, &s, DerivativeMethod::Resolve).unwrap();
        assert!(
            (a.s_tt - b.s_tt).norm() < 1e-5 * a.s_tt.norm(),
            "{} vs {}",
            a.s_tt,
            b.s_tt
        );
        assert!(
            (a.amplitude_squared() - b.amplitude_squared()).norm()
                < 1e-5 * a.amplitude_squared().norm()
        );
    }

    #[test]
    fn closed_form_derivatives_are_step_stable() {
        // Richardson check: halving the step leaves the result unchanged
        let sys = rm();
        let s = saddle(&sys, Complex64::new(2.25, 0.0), -2.0, CoordinateMode::Plain);
        let cft = ClosedFormTime::new(&sys, &s).unwrap();
        let w_ee = |h: f64| {
            (cft.time(&sys, -5.0, -2.0, 0.9 + h).unwrap()
                - cft.time(&sys, -5.0, -2.0, 0.9 - h).unwrap())
                / (2.0 * h)
        };
        let (a, b) = (w_ee(1.9e-5), w_ee(0.95e-5));
        let rich = (4.0 * b - a) / 3.0;
        let d = second_derivatives(&sys, &s, DerivativeMethod::ClosedForm).unwrap();
        assert!((d.w_ee - rich).norm() < 1e-6 * rich.norm());
        assert!((d.s_tt + 1.0 / rich).norm() < 1e-6 * d.s_tt.norm());
    }

    #[test]
    fn free_limit_of_second_derivatives() {
        // S(x0, x1, T) = m (x1 - x0)^2 / (2T): S_x0x1 = -m/T, S_TT = m d^2 / T^3
        let sys = PhysicalSystem::new(
            1.0,
            1.0,
            PotentialSpec::free(),
            Mode::FixedEnergy { energy: 0.5 },
            -1.0,
        )
        .unwrap();
        let s = saddle(&sys, Complex64::new(1.5, 0.0), 1.0, CoordinateMode::Plain);
        let d = second_derivatives(&sys, &s, DerivativeMethod::Resolve).unwrap();
        let t = s.time(&sys).re;
        assert!((t - 2.0).abs() < 1e-9);
        assert!((d.s_x0x1 + 1.0 / t).norm() < 1e-6);
        assert!((d.s_tt - 4.0 / t.powi(3)).norm() < 1e-6);
    }

    #[test]
    fn phase_tracker_is_continuous() {
        let mut p = PhaseTracker::default();
        let mut last = p.root(Complex64::new(1.0, 0.0));
        for k in 1..=200 {
            let a = 2.0 * PI * k as f64 / 100.0;
            let r = p.root(Complex64::from_polar(1.0, a));
            assert!((r - last).norm() < 0.1);
            last = r;
        }
        // two full turns of the radicand return the root to itself
        assert!((last - 1.0).norm() < 1e-12);
    }

    #[test]
    fn reflection_root_convention() {
        assert!(
            (amplitude_root(Complex64::new(-4.0, 0.0)) - Complex64::new(0.0, -2.0)).norm() < 1e-15
        );
        assert!(
            (amplitude_root(Complex64::new(-4.0, -0.0)) - Complex64::new(0.0, -2.0)).norm() < 1e-15
        );
    }
}
