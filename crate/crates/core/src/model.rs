//! Physical system description: potentials, masses, energies and the
//! control-parameter mode.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Distance below which a potential evaluation is considered to be on a pole.
pub const POLE_EVAL_RADIUS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    RosenMorse,
    Gaussian,
    Lorentzian,
    Free,
}

/// A barrier of the given shape and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    #[serde(default)]
    pub strength: f64,
}

/// Rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }
}

/// sech z and tanh z without overflow for large |Re z|.
fn sech_tanh(z: Complex64) -> (Complex64, Complex64) {
    let w = if z.re >= 0.0 { z } else { -z };
    let e = (-2.0 * w).exp();
    let d = 1.0 + e;
    let s = 2.0 * (-w).exp() / d;
    let t = (1.0 - e) / d;
    if z.re >= 0.0 {
        (s, t)
    } else {
        (s, -t)
    }
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, strength: f64) -> Result<Self> {
        if !strength.is_finite() || strength < 0.0 {
            return Err(Error::InvalidInput(format!(
                "potential strength {strength} must be finite and non-negative"
            )));
        }
        Ok(Self { kind, strength })
    }

    pub fn rosen_morse(v0: f64) -> Self {
        Self {
            kind: PotentialKind::RosenMorse,
            strength: v0,
        }
    }

    pub fn gaussian(v0: f64) -> Self {
        Self {
            kind: PotentialKind::Gaussian,
            strength: v0,
        }
    }

    pub fn lorentzian(v0: f64) -> Self {
        Self {
            kind: PotentialKind::Lorentzian,
            strength: v0,
        }
    }

    pub fn free() -> Self {
        Self {
            kind: PotentialKind::Free,
            strength: 0.0,
        }
    }

    pub fn has_poles(&self) -> bool {
        matches!(
            self.kind,
            PotentialKind::RosenMorse | PotentialKind::Lorentzian
        )
    }

    /// Nearest singularity of the potential to `z`, if the potential has any.
    pub fn nearest_singularity(&self, z: Complex64) -> Option<Complex64> {
        match self.kind {
            PotentialKind::RosenMorse => {
                let n = (z.im / PI - 0.5).round();
                Some(Complex64::new(0.0, PI * (n + 0.5)))
            }
            PotentialKind::Lorentzian => {
                Some(Complex64::new(0.0, if z.im >= 0.0 { 1.0 } else { -1.0 }))
            }
            _ => None,
        }
    }

    pub fn singularity_distance(&self, z: Complex64) -> f64 {
        self.nearest_singularity(z)
            .map_or(f64::INFINITY, |s| (z - s).norm())
    }

    fn check_pole(&self, z: Complex64) -> Result<()> {
        if let Some(s) = self.nearest_singularity(z) {
            if (z - s).norm() < POLE_EVAL_RADIUS {
                return Err(Error::PoleEvaluation(z));
            }
        }
        Ok(())
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.check_pole(z)?;
        let v0 = self.strength;
        Ok(match self.kind {
            PotentialKind::RosenMorse => {
                let (s, _) = sech_tanh(z);
                v0 * s * s
            }
            PotentialKind::Gaussian => v0 * (-z * z).exp(),
            PotentialKind::Lorentzian => v0 / (1.0 + z * z),
            PotentialKind::Free => Complex64::new(0.0, 0.0),
        })
    }

    /// First derivative dV/dx.
    pub fn deriv(&self, z: Complex64) -> Result<Complex64> {
        self.check_pole(z)?;
        let v0 = self.strength;
        Ok(match self.kind {
            PotentialKind::RosenMorse => {
                let (s, t) = sech_tanh(z);
                -2.0 * v0 * s * s * t
            }
            PotentialKind::Gaussian => -2.0 * v0 * z * (-z * z).exp(),
            PotentialKind::Lorentzian => {
                let d = 1.0 + z * z;
                -2.0 * v0 * z / (d * d)
            }
            PotentialKind::Free => Complex64::new(0.0, 0.0),
        })
    }

    /// Second derivative d2V/dx2.
    pub fn second_deriv(&self, z: Complex64) -> Result<Complex64> {
        self.check_pole(z)?;
        let v0 = self.strength;
        Ok(match self.kind {
            PotentialKind::RosenMorse => {
                let (s, t) = sech_tanh(z);
                let sech2 = s * s;
                -2.0 * v0 * sech2 * (sech2 - 2.0 * t * t)
            }
            PotentialKind::Gaussian => v0 * (4.0 * z * z - 2.0) * (-z * z).exp(),
            PotentialKind::Lorentzian => {
                let d = 1.0 + z * z;
                v0 * (6.0 * z * z - 2.0) / (d * d * d)
            }
            PotentialKind::Free => Complex64::new(0.0, 0.0),
        })
    }

    /// All singularities inside `window`.
    pub fn singularities(&self, window: &Window) -> Vec<Complex64> {
        match self.kind {
            PotentialKind::RosenMorse => {
                if window.re_min > 0.0 || window.re_max < 0.0 {
                    return Vec::new();
                }
                let lo = (window.im_min / PI - 0.5).ceil() as i64;
                let hi = (window.im_max / PI - 0.5).floor() as i64;
                (lo..=hi)
                    .map(|n| Complex64::new(0.0, PI * (n as f64 + 0.5)))
                    .collect()
            }
            PotentialKind::Lorentzian => [1.0, -1.0]
                .iter()
                .map(|&y| Complex64::new(0.0, y))
                .filter(|z| window.contains(*z))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Positive classical turning point x_c with V(x_c) = energy.
    pub fn turning_point(&self, energy: f64) -> Result<f64> {
        let v0 = self.strength;
        if !(energy > 0.0) || energy >= v0 || self.kind == PotentialKind::Free {
            return Err(Error::NoTurningPoint { energy });
        }
        let closed = match self.kind {
            PotentialKind::RosenMorse => (v0 / energy).sqrt().acosh(),
            PotentialKind::Gaussian => (v0 / energy).ln().sqrt(),
            PotentialKind::Lorentzian => (v0 / energy - 1.0).sqrt(),
            PotentialKind::Free => unreachable!(),
        };
        Ok(closed)
    }

    /// Turning point by bracketed bisection on V(x) = E, independent of the
    /// closed forms.
    pub fn turning_point_bisect(&self, energy: f64) -> Result<f64> {
        let v0 = self.strength;
        if !(energy > 0.0) || energy >= v0 || self.kind == PotentialKind::Free {
            return Err(Error::NoTurningPoint { energy });
        }
        let f = |x: f64| self.eval(Complex64::new(x, 0.0)).map(|v| v.re - energy);
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(hi)? > 0.0 {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::NoTurningPoint { energy });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi.max(1.0) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Which quantity is held fixed and which one is the complex control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    /// Energy fixed, complex total time T is the control.
    FixedEnergy { energy: f64 },
    /// Total time fixed, complex initial velocity is the control.
    FixedTime { time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalSystem {
    pub mass: f64,
    pub hbar: f64,
    pub potential: PotentialSpec,
    pub mode: Mode,
    pub x0: f64,
}

impl PhysicalSystem {
    pub fn new(
        mass: f64,
        hbar: f64,
        potential: PotentialSpec,
        mode: Mode,
        x0: f64,
    ) -> Result<Self> {
        let sys = Self {
            mass,
            hbar,
            potential,
            mode,
            x0,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "mass {} must be positive",
                self.mass
            )));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "hbar {} must be positive",
                self.hbar
            )));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidInput("x0 must be finite".into()));
        }
        PotentialSpec::new(self.potential.kind, self.potential.strength)?;
        match self.mode {
            Mode::FixedEnergy { energy } => {
                if !(energy > 0.0 && energy.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "energy {energy} must be positive"
                    )));
                }
                if self.potential.kind == PotentialKind::RosenMorse {
                    let bound = self.hbar * self.hbar / (8.0 * self.mass);
                    if self.potential.strength < bound {
                        return Err(Error::BarrierCondition {
                            strength: self.potential.strength,
                            bound,
                        });
                    }
                }
            }
            Mode::FixedTime { time } => {
                if !(time > 0.0 && time.is_finite()) {
                    return Err(Error::InvalidInput(format!("time {time} must be positive")));
                }
            }
        }
        Ok(())
    }

    pub fn energy(&self) -> Option<f64> {
        match self.mode {
            Mode::FixedEnergy { energy } => Some(energy),
            Mode::FixedTime { .. } => None,
        }
    }

    pub fn with_energy(&self, energy: f64) -> Self {
        Self {
            mode: Mode::FixedEnergy { energy },
            ..*self
        }
    }

    pub fn with_x0(&self, x0: f64) -> Self {
        Self { x0, ..*self }
    }

    pub fn with_hbar(&self, hbar: f64) -> Self {
        Self { hbar, ..*self }
    }
}
