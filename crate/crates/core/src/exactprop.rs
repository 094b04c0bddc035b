//! Exact energy-domain propagator of the Rosen-Morse barrier and the special
//! functions it needs.

use crate::error::{Error, Result};
use crate::model::{PhysicalSystem, PotentialKind};
use num_complex::Complex64;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn near_nonpositive_integer(z: Complex64) -> bool {
    z.re <= 0.5 && z.im.abs() < 1e-14 && (z.re - z.re.round()).abs() < 1e-14
}

/// log Gamma for Re z >= 1/2 by the Lanczos approximation.
fn ln_gamma_right(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut a = Complex64::new(LANCZOS[0], 0.0);
    let t = z + LANCZOS_G + 0.5;
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (z + k as f64);
    }
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + a.ln()
}

/// Complex Gamma function.
pub fn gamma(z: Complex64) -> Result<Complex64> {
    if near_nonpositive_integer(z) {
        return Err(Error::PoleOfGamma(z));
    }
    if z.re < 0.5 {
        // reflection
        let s = (PI * z).sin();
        return Ok(PI / (s * ln_gamma_right(1.0 - z).exp()));
    }
    Ok(ln_gamma_right(z).exp())
}

/// 1 / Gamma(z), zero at the poles of Gamma.
pub fn rgamma(z: Complex64) -> Complex64 {
    if near_nonpositive_integer(z) {
        return Complex64::new(0.0, 0.0);
    }
    if z.re < 0.5 {
        return (PI * z).sin() * ln_gamma_right(1.0 - z).exp() / PI;
    }
    (-ln_gamma_right(z)).exp()
}

const SERIES_MAX_TERMS: usize = 200_000;

fn series(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    z: Complex64,
    max_terms: usize,
) -> Result<Complex64> {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut small = 0;
    for n in 0..max_terms {
        let nf = n as f64;
        let den = (c + nf) * (nf + 1.0);
        if den.norm() == 0.0 {
            return Err(Error::ParameterPole);
        }
        term *= (a + nf) * (b + nf) / den * z;
        sum += term;
        if term.norm() == 0.0 {
            return Ok(sum);
        }
        if term.norm() <= 1e-17 * sum.norm() {
            small += 1;
            if small >= 3 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
        if !sum.re.is_finite() || !sum.im.is_finite() {
            return Err(Error::SeriesDivergence);
        }
    }
    Err(Error::SeriesDivergence)
}

/// Gauss hypergeometric function 2F1(a, b; c; z) for |z| < 1.
///
/// The power series is summed directly for |z| <= 0.75; otherwise the
/// function is mapped to 1 - z or z / (z - 1).
pub fn hyp2f1(a: Complex64, b: Complex64, c: Complex64, z: Complex64) -> Result<Complex64> {
    if near_nonpositive_integer(c) {
        return Err(Error::ParameterPole);
    }
    if z.norm() >= 1.0 {
        return Err(Error::InvalidInput("hyp2f1 requires |z| < 1".into()));
    }
    if z.norm() <= 0.75 {
        return series(a, b, c, z, SERIES_MAX_TERMS);
    }
    let w = 1.0 - z;
    let s = c - a - b;
    let s_integer = s.im.abs() < 1e-6 && (s.re - s.re.round()).abs() < 1e-6;
    if w.norm() <= 0.75 && !s_integer {
        // 2F1 = G(c)G(s)/(G(c-a)G(c-b)) F(a,b;1-s;w)
        //     + w^s G(c)G(-s)/(G(a)G(b)) F(c-a,c-b;1+s;w)
        let gc = gamma(c)?;
        let f1 = series(a, b, 1.0 - s, w, SERIES_MAX_TERMS)?;
        let f2 = series(c - a, c - b, 1.0 + s, w, SERIES_MAX_TERMS)?;
        let t1 = gc * gamma(s)? * rgamma(c - a) * rgamma(c - b) * f1;
        let t2 = w.powc(s) * gc * gamma(-s)? * rgamma(a) * rgamma(b) * f2;
        return Ok(t1 + t2);
    }
    let p = z / (z - 1.0);
    if p.norm() <= 0.75 {
        // Pfaff transformation
        return Ok(w.powc(-a) * series(a, c - b, c, p, SERIES_MAX_TERMS)?);
    }
    series(a, b, c, z, SERIES_MAX_TERMS)
}

/// 2F1(a, b; c; z) / Gamma(c), finite for c a non-positive integer.
pub fn hyp2f1_regularized(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    z: Complex64,
) -> Result<Complex64> {
    if !near_nonpositive_integer(c) {
        return Ok(hyp2f1(a, b, c, z)? * rgamma(c));
    }
    // c = -n: the series starts at z^(n+1)
    let n = (-c.re).round() as usize;
    let mut coef = Complex64::new(1.0, 0.0);
    for k in 0..=n {
        coef *= (a + k as f64) * (b + k as f64) / (k as f64 + 1.0);
    }
    let shift = (n + 1) as f64;
    Ok(coef
        * z.powu(n as u32 + 1)
        * hyp2f1(a + shift, b + shift, Complex64::new(shift + 1.0, 0.0), z)?)
}

/// Ferrers (on-the-cut) associated Legendre function P_degree^order(z) for
/// real |z| < 1.
pub fn legendre_p(degree: Complex64, order: Complex64, z: f64) -> Result<Complex64> {
    if !(z.abs() < 1.0) {
        return Err(Error::InvalidInput(format!(
            "Ferrers function needs |z| < 1, got {z}"
        )));
    }
    let ratio = Complex64::new((1.0 + z) / (1.0 - z), 0.0);
    let f = hyp2f1_regularized(
        -degree,
        degree + 1.0,
        1.0 - order,
        Complex64::new(0.5 * (1.0 - z), 0.0),
    )?;
    Ok(ratio.powc(0.5 * order) * f)
}

/// Parameters of the exact propagator: wave number and Legendre degree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorParams {
    pub k: f64,
    pub degree: Complex64,
}

pub fn propagator_params(sys: &PhysicalSystem) -> Result<PropagatorParams> {
    if sys.potential.kind != PotentialKind::RosenMorse {
        return Err(Error::InvalidInput(
            "exact propagator is available for the Rosen-Morse barrier only".into(),
        ));
    }
    let energy = sys
        .energy()
        .ok_or_else(|| Error::InvalidInput("exact propagator needs a fixed energy".into()))?;
    let (m, h, v0) = (sys.mass, sys.hbar, sys.potential.strength);
    let disc = 8.0 * m * v0 - h * h;
    if disc < 0.0 {
        return Err(Error::BarrierCondition {
            strength: v0,
            bound: h * h / (8.0 * m),
        });
    }
    Ok(PropagatorParams {
        k: (2.0 * m * energy).sqrt() / h,
        degree: Complex64::new(-0.5, disc.sqrt() / (2.0 * h)),
    })
}

/// Energy-domain propagator K(x1, x0; E) = i hbar G(x1, x0; E + i0).
pub fn exact_energy_propagator(sys: &PhysicalSystem, x1: f64) -> Result<Complex64> {
    let p = propagator_params(sys)?;
    let mu = Complex64::new(0.0, p.k);
    let n = p.degree;
    let (lo, hi) = if x1 <= sys.x0 {
        (x1, sys.x0)
    } else {
        (sys.x0, x1)
    };
    let pref = Complex64::new(0.0, -sys.mass / sys.hbar) * gamma(-mu - n)? * gamma(-mu + n + 1.0)?;
    Ok(pref * legendre_p(n, mu, hi.tanh())? * legendre_p(n, mu, -lo.tanh())?)
}
