//! Reference computations that share no code with the library.

use saddlecross::Complex64 as C;
use std::f64::consts::PI;

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

/// Lanczos approximation (g = 7), with reflection for Re z < 1/2.
pub fn gamma(z: C) -> C {
    if z.re < 0.5 {
        return PI / ((z * PI).sin() * gamma(1.0 - z));
    }
    let z = z - 1.0;
    let mut x = C::new(LANCZOS[0], 0.0);
    for (i, &p) in LANCZOS.iter().enumerate().skip(1) {
        x += p / (z + i as f64);
    }
    let t = z + 7.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * x
}

type Pair = [C; 2];

fn rk4<F: Fn(f64, Pair) -> Pair>(f: &F, x: f64, y: Pair, h: f64) -> Pair {
    let add = |y: Pair, k: Pair, s: f64| [y[0] + k[0] * s, y[1] + k[1] * s];
    let k1 = f(x, y);
    let k2 = f(x + 0.5 * h, add(y, k1, 0.5 * h));
    let k3 = f(x + 0.5 * h, add(y, k2, 0.5 * h));
    let k4 = f(x + h, add(y, k3, h));
    [
        y[0] + (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) * (h / 6.0),
        y[1] + (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) * (h / 6.0),
    ]
}

/// Integrate a linear second-order equation w'' = q(s) w from `a` to `b`
/// with about `per_unit` RK4 steps per unit length.
fn second_order<Q: Fn(f64) -> C>(q: Q, a: f64, b: f64, init: Pair, per_unit: f64) -> Pair {
    let n = ((b - a).abs() * per_unit).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let f = |s: f64, y: Pair| [y[1], q(s) * y[0]];
    let mut y = init;
    for k in 0..n {
        y = rk4(&f, a + h * k as f64, y, h);
    }
    y
}

/// Rosen-Morse barrier problem for the Green's-function oracle.
#[derive(Debug, Clone, Copy)]
pub struct Barrier {
    pub mass: f64,
    pub hbar: f64,
    pub strength: f64,
    pub energy: f64,
}

impl Barrier {
    fn q(&self, x: f64) -> C {
        let v = self.strength / x.cosh().powi(2);
        C::new(
            2.0 * self.mass / (self.hbar * self.hbar) * (v - self.energy),
            0.0,
        )
    }

    fn k(&self) -> f64 {
        (2.0 * self.mass * self.energy).sqrt() / self.hbar
    }

    /// i hbar G(x, x0; E + i0) for x >= x0, from the Schrodinger equation.
    ///
    /// The right solution starts as e^{ikx} at `edge` and is integrated left
    /// with step `h`; the left solution starts as e^{-ikx} at `-edge`. The
    /// Wronskian is taken at x0. `xs` must be multiples of `h` away from
    /// `edge` and not below x0.
    pub fn energy_kernel(&self, x0: f64, xs: &[f64], edge: f64, h: f64) -> Vec<C> {
        let ik = C::new(0.0, self.k());
        let f = |x: f64, y: Pair| [y[1], self.q(x) * y[0]];
        let wave = |x: f64, s: f64| {
            let e = (ik * s * x).exp();
            [e, ik * s * e]
        };

        // right solution, stored at every step index
        let steps = ((edge - x0) / h).round() as usize;
        let mut right = Vec::with_capacity(steps + 1);
        let mut y = wave(edge, 1.0);
        right.push(y);
        for k in 0..steps {
            y = rk4(&f, edge - h * k as f64, y, -h);
            right.push(y);
        }
        let at_x0 = right[steps];

        let left = second_order(|x| self.q(x), -edge, x0, wave(-edge, -1.0), 1.0 / h);
        let wronskian = left[0] * at_x0[1] - left[1] * at_x0[0];
        let scale = C::new(0.0, self.hbar) * (2.0 * self.mass / (self.hbar * self.hbar)) * left[0]
            / wronskian;
        xs.iter()
            .map(|&x| {
                let k = ((edge - x) / h).round() as usize;
                scale * right[k][0]
            })
            .collect()
    }
}

/// Ferrers function P_nu^mu(z) by integrating the Legendre equation in
/// s = artanh z, where it reads w'' = (mu^2 - nu (nu + 1) sech^2 s) w.
///
/// For Re mu > 0 the integration starts at z = 0 from the closed-form value
/// and slope there. Otherwise P is the solution decaying like
/// e^{mu s} / Gamma(1 - mu) for large s, which is stable to integrate
/// inwards from s = 20.
pub fn legendre_by_ode(nu: C, mu: C, z: f64) -> C {
    let q = |s: f64| mu * mu - nu * (nu + 1.0) / s.cosh().powi(2);
    let target = z.atanh();
    let per_unit = 5000.0;
    if mu.re > 0.0 {
        let sqrt_pi = PI.sqrt();
        let two_mu = C::new(2.0, 0.0).powc(mu);
        let p0 = two_mu * sqrt_pi
            / (gamma(nu / 2.0 - mu / 2.0 + 1.0) * gamma(0.5 - nu / 2.0 - mu / 2.0));
        let d0 = -two_mu * 2.0 * sqrt_pi
            / (gamma(nu / 2.0 - mu / 2.0 + 0.5) * gamma(-nu / 2.0 - mu / 2.0));
        // dw/ds = (1 - z^2) dw/dz, which is dw/dz at z = 0
        second_order(q, 0.0, target, [p0, d0], per_unit)[0]
    } else {
        let start = 20.0;
        let w = (mu * start).exp() / gamma(1.0 - mu);
        second_order(q, start, target, [w, mu * w], per_unit)[0]
    }
}
